//! Seeded families of test functions.
//!
//! Function `i` draws from its own SplitMix64 stream whose initial state is
//! `seed ^ z`, where `z` is the first SplitMix64 output for state `i + 1`.
//! Uniforms are `(x >> 11) * 2^-53`; normals use Box-Muller with one cosine
//! draw per pair. Kinds are assigned round-robin in the requested order.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcnorms::lp_norm_weighted;
use crate::heat::Semigroup;

const SMOOTHING_TIME: f64 = 1.0;
const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SmoothedNoise,
    BallIndicator,
    DistanceBump,
    Eigenvector,
    Rademacher,
}

impl Kind {
    pub const ALL: [Kind; 5] = [
        Kind::SmoothedNoise,
        Kind::BallIndicator,
        Kind::DistanceBump,
        Kind::Eigenvector,
        Kind::Rademacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SmoothedNoise => "smoothed_noise",
            Kind::BallIndicator => "ball_indicator",
            Kind::DistanceBump => "distance_bump",
            Kind::Eigenvector => "eigenvector",
            Kind::Rademacher => "rademacher",
        }
    }

    /// Comma-separated kind list.
    pub fn parse_list(s: &str) -> Result<Vec<Kind>> {
        let kinds: Vec<Kind> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Kind::from_str)
            .collect::<Result<_>>()?;
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("empty kind list".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown corpus kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean_zero: bool,
    pub sup_one: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            mean_zero: true,
            sup_one: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusFunction {
    pub id: String,
    pub kind: Kind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub seed: u64,
    pub kinds: Vec<Kind>,
    pub normalization: Normalization,
    pub functions: Vec<CorpusFunction>,
}

/// SplitMix64 stream for function `index`.
pub struct Stream(SplitMix64);

impl Stream {
    pub fn new(seed: u64, index: u64) -> Self {
        let z = SplitMix64::seed_from_u64(index.wrapping_add(1)).next_u64();
        Stream(SplitMix64::seed_from_u64(seed ^ z))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

impl Corpus {
    pub fn generate(sg: &Semigroup, seed: u64, n: usize, kinds: &[Kind], normalization: Normalization) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("corpus size must be >= 1".into()));
        }
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("empty kind list".into()));
        }
        if kinds.contains(&Kind::Eigenvector) && !sg.is_dense() {
            return Err(Error::DenseCapExceeded {
                n: sg.space().len(),
                cap: sg.dense_cap(),
            });
        }
        let mut functions = Vec::with_capacity(n);
        for i in 0..n {
            let kind = kinds[i % kinds.len()];
            let mut rng = Stream::new(seed, i as u64);
            let mut values = None;
            for _ in 0..MAX_REDRAWS {
                let raw = draw(sg, kind, &mut rng)?;
                if let Some(v) = normalize(sg, raw, normalization) {
                    values = Some(v);
                    break;
                }
            }
            let values = values
                .ok_or_else(|| Error::InvalidArgument(format!("kind {kind} yields only constants on this space")))?;
            functions.push(CorpusFunction {
                id: format!("f{i:03}_{kind}"),
                kind,
                values,
            });
        }
        Ok(Corpus {
            seed,
            kinds: kinds.to_vec(),
            normalization,
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.functions.iter().map(|f| f.values.clone()).collect()
    }

    /// CSV rows `function_id,vertex_id,value`.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("function_id,vertex_id,value\n");
        for f in &self.functions {
            for (id, v) in ids.iter().zip(&f.values) {
                let _ = writeln!(out, "{},{id},{v}", f.id);
            }
        }
        out
    }
}

fn random_radius(sg: &Semigroup, rng: &mut Stream) -> usize {
    1 + rng.below((sg.space().diameter() / 2).max(1))
}

fn draw(sg: &Semigroup, kind: Kind, rng: &mut Stream) -> Result<Vec<f64>> {
    let space = sg.space();
    let n = space.len();
    Ok(match kind {
        Kind::SmoothedNoise => {
            let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            sg.apply(&z, SMOOTHING_TIME)?
        }
        Kind::BallIndicator => {
            let x = rng.below(n);
            let r = random_radius(sg, rng);
            let mut f = vec![0.0; n];
            for &y in space.balls().ball(x, r) {
                f[y as usize] = 1.0;
            }
            f
        }
        Kind::DistanceBump => {
            let x = rng.below(n);
            let r = random_radius(sg, rng) as f64;
            distance_bump(space, x, r)
        }
        Kind::Eigenvector => {
            let k = 1 + rng.below(n.saturating_sub(1).max(1));
            sg.eigenvector(k.min(n - 1))?.to_vec()
        }
        Kind::Rademacher => (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect(),
    })
}

/// `max(0, r - d(x, .))`.
pub fn distance_bump(space: &crate::mm_space::Space, x: usize, r: f64) -> Vec<f64> {
    (0..space.len())
        .map(|y| (r - space.dist(x, y) as f64).max(0.0))
        .collect()
}

/// Applies the normalization; `None` marks a constant function.
fn normalize(sg: &Semigroup, mut f: Vec<f64>, norm: Normalization) -> Option<Vec<f64>> {
    let space = sg.space();
    let scale = lp_norm_weighted(&f, &[], f64::INFINITY);
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * scale) {
        return None;
    }
    if norm.mean_zero {
        let m = space.mean(&f);
        f.iter_mut().for_each(|v| *v -= m);
    }
    if norm.sup_one {
        let s = lp_norm_weighted(&f, &[], f64::INFINITY);
        f.iter_mut().for_each(|v| *v /= s);
        if norm.mean_zero {
            let m = space.mean(&f);
            f.iter_mut().for_each(|v| *v -= m);
        }
    }
    Some(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::HeatOptions;
    use crate::mm_space::Space;
    use std::sync::Arc;

    fn sg(desc: &str) -> Semigroup {
        Semigroup::with_defaults(Arc::new(Space::builtin(desc, 5000).unwrap())).unwrap()
    }

    #[test]
    fn splitmix_reference_stream() {
        // reference splitmix64.c outputs
        let mut r = SplitMix64::seed_from_u64(1477776061723855037);
        assert_eq!(r.next_u64(), 1985237415132408290);
        assert_eq!(r.next_u64(), 2979275885539914483);
    }

    #[test]
    fn deterministic_and_distinct_streams() {
        let s = sg("cycle:12");
        let a = Corpus::generate(&s, 42, 3, &[Kind::Rademacher], Normalization::default()).unwrap();
        let b = Corpus::generate(&s, 42, 3, &[Kind::Rademacher], Normalization::default()).unwrap();
        assert_eq!(a.functions, b.functions);
        assert_ne!(a.functions[0].values, a.functions[1].values);
        let c = Corpus::generate(&s, 43, 3, &[Kind::Rademacher], Normalization::default()).unwrap();
        assert_ne!(a.functions[0].values, c.functions[0].values);
    }

    #[test]
    fn normalization_and_kinds() {
        let s = sg("torus:6x6");
        let c = Corpus::generate(&s, 7, 25, &Kind::ALL, Normalization::default()).unwrap();
        for (i, f) in c.functions.iter().enumerate() {
            assert_eq!(f.kind, Kind::ALL[i % 5]);
            assert!(s.space().mean(&f.values).abs() <= 1e-12);
            let sup = lp_norm_weighted(&f.values, &[], f64::INFINITY);
            assert!((sup - 1.0).abs() < 1e-12);
            let spread = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - f.values.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(spread > 0.1);
        }
    }

    #[test]
    fn distance_bump_cycle8() {
        let s = Space::builtin("cycle:8", 10).unwrap();
        assert_eq!(distance_bump(&s, 0, 2.0), vec![2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn eigenvector_needs_dense() {
        let sp = Arc::new(Space::builtin("cycle:12", 100).unwrap());
        let small = Semigroup::new(
            sp,
            &HeatOptions {
                dense_cap: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(Corpus::generate(&small, 1, 2, &[Kind::Eigenvector], Normalization::default()).is_err());
        assert!(Corpus::generate(&small, 1, 2, &[Kind::SmoothedNoise], Normalization::default()).is_ok());
    }

    #[test]
    fn kind_names_round_trip() {
        assert_eq!(
            Kind::parse_list("rademacher, eigenvector").unwrap(),
            vec![Kind::Rademacher, Kind::Eigenvector]
        );
        assert!(Kind::parse_list("gaussian").is_err());
        assert!(Corpus::generate(&sg("cycle:5"), 1, 0, &Kind::ALL, Normalization::default()).is_err());
    }
}
