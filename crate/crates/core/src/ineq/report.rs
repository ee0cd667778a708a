use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// One evaluated `(f, parameters)` pair.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub f_id: String,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` for a divergent sample (`rhs = 0 < lhs`).
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub f_id: String,
    pub params: BTreeMap<String, f64>,
}

/// Outcome of one checker.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub params: BTreeMap<String, Value>,
    /// Largest recorded ratio; `None` when no sample was usable.
    pub constant: Option<f64>,
    pub diverges: bool,
    pub witness: Option<Witness>,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub range_note: String,
    pub samples: Vec<Sample>,
    pub extras: BTreeMap<String, Value>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            params: BTreeMap::new(),
            constant: None,
            diverges: false,
            witness: None,
            n_samples: 0,
            n_skipped: 0,
            range_note: String::new(),
            samples: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.into(), v.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.range_note = note.into();
        self
    }

    pub fn extra(&mut self, key: &str, v: impl Serialize) {
        self.extras
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn skip(&mut self) {
        self.n_skipped += 1;
    }

    /// Records `lhs <= C rhs`. A zero right side with a positive left side
    /// marks the report divergent; `0/0` is skipped.
    pub fn push(&mut self, f_id: &str, params: &[(&str, f64)], lhs: f64, rhs: f64) {
        if rhs == 0.0 && lhs == 0.0 || lhs.is_nan() || rhs.is_nan() {
            self.n_skipped += 1;
            return;
        }
        let params: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let ratio = if rhs > 0.0 && rhs.is_finite() {
            Some(lhs / rhs)
        } else {
            None
        };
        match ratio {
            None => self.diverges = true,
            Some(r) => {
                if self.constant.is_none_or(|c| r > c) {
                    self.constant = Some(r);
                    self.witness = Some(Witness {
                        f_id: f_id.to_string(),
                        params: params.clone(),
                    });
                }
            }
        }
        self.n_samples += 1;
        self.samples.push(Sample {
            f_id: f_id.to_string(),
            params,
            lhs,
            rhs,
            ratio,
        });
    }

    /// Finite, usable constant.
    pub fn is_finite(&self) -> bool {
        !self.diverges && self.constant.is_some_and(f64::is_finite)
    }

    /// Largest ratio among samples satisfying `pred`.
    pub fn max_ratio_where(&self, pred: impl Fn(&Sample) -> bool) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| pred(s))
            .filter_map(|s| s.ratio)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Samples table; parameter columns are the union of sample keys.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&String> = self.samples.iter().flat_map(|s| s.params.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut out = String::from("f_id");
        for k in &keys {
            let _ = write!(out, ",{k}");
        }
        out.push_str(",lhs,rhs,ratio\n");
        for s in &self.samples {
            out.push_str(&s.f_id);
            for k in &keys {
                match s.params.get(*k) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            let ratio = s.ratio.map_or_else(|| "inf".to_string(), |r| r.to_string());
            let _ = writeln!(out, ",{},{},{ratio}", s.lhs, s.rhs);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_max_ratio() {
        let mut r = CheckReport::new("demo");
        r.push("a", &[("t", 1.0)], 1.0, 2.0);
        r.push("b", &[("t", 2.0)], 3.0, 2.0);
        r.push("c", &[], 0.0, 0.0);
        assert_eq!(r.constant, Some(1.5));
        assert_eq!(r.witness.as_ref().unwrap().f_id, "b");
        assert_eq!((r.n_samples, r.n_skipped), (2, 1));
        assert!(r.is_finite());
        r.push("d", &[], 1.0, 0.0);
        assert!(r.diverges && !r.is_finite());
        let csv = r.to_csv();
        assert!(csv.starts_with("f_id,t,lhs,rhs,ratio\n"));
        assert!(csv.contains("d,,1,0,inf"));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "name",
            "params",
            "constant",
            "witness",
            "n_samples",
            "n_skipped",
            "range_note",
            "samples",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
