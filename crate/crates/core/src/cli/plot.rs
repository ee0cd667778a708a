use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::config::{ConfigError, RunConfig};
use super::suite::{Context, RunError};
use crate::rearrange::StepFunction;

const NOT_REPORTS: [&str; 3] = ["summary.json", "metadata.json", "space.json"];
/// Preferred abscissa for ratio curves, in order.
const AXES: [&str; 3] = ["t", "s", "r"];

/// Report JSON files in `dir`, sorted by file name.
pub fn load_reports(dir: &Path) -> Result<Vec<(PathBuf, Value)>, RunError> {
    if !dir.is_dir() {
        return Err(ConfigError(format!("report directory {} does not exist", dir.display())).into());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| RunError::Internal(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| !NOT_REPORTS.iter().any(|n| p.file_name().is_some_and(|f| f == *n)))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| RunError::Internal(format!("{}: {e}", p.display())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{} is not valid JSON: {e}", p.display())))?;
        if v.get("name").is_some() && v.get("samples").is_some_and(Value::is_array) {
            out.push((p, v));
        }
    }
    if out.is_empty() {
        return Err(ConfigError(format!("no reports found in {}", dir.display())).into());
    }
    Ok(out)
}

fn num(v: &Value) -> String {
    v.as_f64().map(|x| x.to_string()).unwrap_or_default()
}

/// `x,max_ratio,f_id` with the largest ratio per abscissa value.
fn ratio_curve(report: &Value) -> Option<String> {
    let samples = report["samples"].as_array()?;
    let axis = AXES
        .iter()
        .find(|a| samples.first().is_some_and(|s| s["params"].get(**a).is_some()))?;
    let mut best: BTreeMap<u64, (f64, f64, String)> = BTreeMap::new();
    for s in samples {
        let (Some(x), Some(r)) = (s["params"][*axis].as_f64(), s["ratio"].as_f64()) else {
            continue;
        };
        let id = s["f_id"].as_str().unwrap_or_default().to_string();
        let e = best.entry(x.to_bits()).or_insert((x, f64::NEG_INFINITY, String::new()));
        if r > e.1 {
            *e = (x, r, id);
        }
    }
    let mut rows: Vec<_> = best.into_values().collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = format!("{axis},max_ratio,f_id\n");
    for (x, r, id) in rows {
        let _ = writeln!(out, "{x},{r},{id}");
    }
    Some(out)
}

/// Kernel decay rows from the on-diagonal and Gaussian reports.
fn kernel_curve(report: &Value) -> Option<String> {
    let samples = report["samples"].as_array()?;
    match report["name"].as_str()? {
        "sobolev_kernel" => {
            let e = report["params"]["nu"].as_f64()? / (2.0 * report["params"]["q"].as_f64()?);
            let mut out = String::from("t,kernel_norm,scaled\n");
            for s in samples {
                let t = s["params"]["t"].as_f64()?;
                let scaled = s["lhs"].as_f64()?;
                let _ = writeln!(out, "{t},{},{scaled}", scaled / t.powf(e));
            }
            Some(out)
        }
        "gaussian_bound" => {
            let mut out = String::from("t,c,constant\n");
            for s in samples {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    num(&s["params"]["t"]),
                    num(&s["params"]["c"]),
                    num(&s["lhs"])
                );
            }
            Some(out)
        }
        _ => None,
    }
}

/// `t_start,t_end,f_star,f_double_star` per piece, `f**` taken at `t_end`.
pub fn rearrangement_csv(sf: &StepFunction) -> String {
    let mut out = String::from("t_start,t_end,f_star,f_double_star\n");
    for (a, b, v) in sf.pieces() {
        let _ = writeln!(out, "{a},{b},{v},{}", sf.integral(b) / b);
    }
    if sf.support() < sf.total_measure() {
        let t = sf.total_measure();
        let _ = writeln!(out, "{},{t},0,{}", sf.support(), sf.integral(t) / t);
    }
    out
}

/// Writes plot series for the reports in `dir` into `out`; returns the file names.
pub fn plotdata(dir: &Path, out: &Path) -> Result<Vec<String>, RunError> {
    let reports = load_reports(dir)?;
    let io = |e: std::io::Error| RunError::Internal(e.to_string());
    fs::create_dir_all(out).map_err(io)?;
    let mut files = Vec::new();
    let mut witnesses = BTreeSet::new();
    for (_, r) in &reports {
        let name = r["name"].as_str().unwrap_or("report");
        if let Some(csv) = ratio_curve(r) {
            let f = format!("curve_{name}.csv");
            fs::write(out.join(&f), csv).map_err(io)?;
            files.push(f);
        }
        if let Some(csv) = kernel_curve(r) {
            let f = format!("kernel_{name}.csv");
            fs::write(out.join(&f), csv).map_err(io)?;
            files.push(f);
        }
        if let Some(id) = r["witness"]["f_id"].as_str() {
            witnesses.insert(id.to_string());
        }
    }
    let cfg: Option<RunConfig> = reports
        .iter()
        .find_map(|(_, r)| serde_json::from_value(r["config"].clone()).ok());
    if let Some(cfg) = cfg {
        let ctx = Context::prepare(&cfg)?;
        for f in ctx.corpus.functions.iter().filter(|f| witnesses.contains(&f.id)) {
            let sf = StepFunction::rearrange(&f.values, ctx.space.measure());
            let name = format!("rearrangement_{}.csv", f.id);
            fs::write(out.join(&name), rearrangement_csv(&sf)).map_err(io)?;
            files.push(name);
        }
    }
    Ok(files)
}
