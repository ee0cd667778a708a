#![allow(dead_code)]

use gnlab_core::corpus::Stream;
use gnlab_core::mm_space::{Edge, Space, DEFAULT_MAX_VERTICES};
use microlp::{ComparisonOp, OptimizationDirection, Problem};

/// Connected simple graphs on `n` vertices up to isomorphism, as edge lists.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let perms = permutations(n);
    // bit index of pair (a, b) after relabelling
    let index = |a: usize, b: usize| pairs.iter().position(|&p| p == (a.min(b), a.max(b))).unwrap();
    let maps: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| pairs.iter().map(|&(a, b)| index(p[a], p[b])).collect())
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| pairs[i])
            .collect();
        if !is_connected(n, &edges) {
            continue;
        }
        let canon = maps
            .iter()
            .map(|m| {
                (0..pairs.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .fold(0u32, |acc, i| acc | 1 << m[i])
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(edges);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &(a, b) in edges {
            for (u, v) in [(a, b), (b, a)] {
                if u == x && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Builds a space from an edge list; `random` draws measures and weights in `[0.5, 2)`.
pub fn space_from_edges(n: usize, edges: &[(usize, usize)], rng: Option<&mut Stream>) -> Space {
    let (measure, weights) = match rng {
        Some(r) => {
            let m = (0..n).map(|_| 0.5 + 1.5 * r.uniform()).collect();
            let w = edges.iter().map(|_| 0.5 + 1.5 * r.uniform()).collect();
            (m, w)
        }
        None => (vec![1.0; n], vec![1.0; edges.len()]),
    };
    let edges = edges
        .iter()
        .zip(weights)
        .map(|(&(a, b), weight)| Edge { a, b, weight })
        .collect();
    let ids = (0..n).map(|i| format!("v{i}")).collect();
    Space::new(format!("graph{n}"), ids, measure, edges, None, DEFAULT_MAX_VERTICES).unwrap()
}

/// Connected graph on at most `max_n` vertices: a random spanning tree plus extra edges.
pub fn random_space(rng: &mut Stream, max_n: usize) -> Space {
    let n = 1 + rng.below(max_n);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.below(v), v));
    }
    let extra = if n > 2 { rng.below(n) } else { 0 };
    for _ in 0..extra {
        let a = rng.below(n);
        let b = rng.below(n);
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    space_from_edges(n, &edges, Some(rng))
}

/// `min_g sum_x mu_x max_{y~x} sqrt(w)|(f-g)_y - (f-g)_x|` over `g`, with the edge
/// constraint `sqrt(w)|g_b - g_a| <= lambda` when `lambda` is given, and with
/// `t * lambda` added to the objective when it is free.
fn kprime_lp(space: &Space, f: &[f64], lambda: Option<f64>, t: f64) -> f64 {
    let n = space.len();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let g: Vec<_> = (0..n)
        .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let s: Vec<_> = space
        .measure()
        .iter()
        .map(|&m| problem.add_var(m, (0.0, f64::INFINITY)))
        .collect();
    let lam = match lambda {
        Some(l) => problem.add_var(0.0, (l, l)),
        None => problem.add_var(t, (0.0, f64::INFINITY)),
    };
    for e in space.edges() {
        let r = e.weight.sqrt();
        let df = r * (f[e.b] - f[e.a]);
        for x in [e.a, e.b] {
            // r (g_b - g_a) - s_x <= r (f_b - f_a) and the mirrored side
            problem.add_constraint([(g[e.b], r), (g[e.a], -r), (s[x], -1.0)], ComparisonOp::Le, df);
            problem.add_constraint([(g[e.b], -r), (g[e.a], r), (s[x], -1.0)], ComparisonOp::Le, -df);
        }
        problem.add_constraint([(g[e.b], r), (g[e.a], -r), (lam, -1.0)], ComparisonOp::Le, 0.0);
        problem.add_constraint([(g[e.b], -r), (g[e.a], r), (lam, -1.0)], ComparisonOp::Le, 0.0);
    }
    problem.add_constraint([(g[0], 1.0)], ComparisonOp::Eq, 0.0);
    let out = problem.solve().expect("K' LP is feasible and bounded");
    assert!(out.is_optimal(), "LP stopped without an optimality proof");
    out.solution().expect("solution").objective()
}

/// Exact `K'(f, t)` for `q = 1` with the max-aggregated gradient.
pub fn kprime_exact(space: &Space, f: &[f64], t: f64) -> f64 {
    kprime_lp(space, f, None, t)
}

/// `max_e sqrt(w_e) |f_b - f_a|`; at or above it `g = f` is admissible.
pub fn edge_slope(space: &Space, f: &[f64]) -> f64 {
    space
        .edges()
        .iter()
        .map(|e| e.weight.sqrt() * (f[e.b] - f[e.a]).abs())
        .fold(0.0, f64::max)
}

/// Inner values `phi(lambda_k)` on the grid `k * pitch * L`, `k = 0..=1/pitch`, `L = edge_slope(f)`.
pub fn kprime_inner_grid(space: &Space, f: &[f64], pitch: f64) -> Vec<(f64, f64)> {
    let lip = edge_slope(space, f);
    let steps = (1.0 / pitch).round() as usize;
    (0..=steps)
        .map(|k| {
            let l = lip * k as f64 / steps as f64;
            (l, kprime_lp(space, f, Some(l), 0.0))
        })
        .collect()
}

/// `min_k phi(lambda_k) + t lambda_k`.
pub fn kprime_grid_search(inner: &[(f64, f64)], t: f64) -> f64 {
    inner.iter().map(|&(l, v)| v + t * l).fold(f64::INFINITY, f64::min)
}

/// Seeded values in `[-1, 1)`.
pub fn random_values(rng: &mut Stream, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()
}

/// `f*` oracle from the distribution function: for each distinct level `v` of
/// `|f|` in decreasing order, the piece ends at `mu(|f| >= v)`.
pub fn rearrangement_oracle(f: &[f64], mu: &[f64]) -> Vec<(f64, f64)> {
    let mut levels: Vec<f64> = f.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    levels
        .into_iter()
        .map(|v| {
            let end: f64 = f.iter().zip(mu).filter(|(x, _)| x.abs() >= v).map(|(_, m)| m).sum();
            (end, v)
        })
        .collect()
}

/// `f*(t) = inf { lambda : mu(|f| > lambda) <= t }`, evaluated over the levels of `|f|`.
pub fn star_at(f: &[f64], mu: &[f64], t: f64) -> f64 {
    let mut levels: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    levels.push(0.0);
    levels
        .into_iter()
        .filter(|&l| {
            f.iter()
                .zip(mu)
                .filter(|(x, _)| x.abs() > l)
                .map(|(_, m)| m)
                .sum::<f64>()
                <= t
        })
        .fold(f64::INFINITY, f64::min)
}
