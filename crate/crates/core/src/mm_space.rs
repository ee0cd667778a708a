//! Finite metric measure spaces built on connected weighted graphs.
//!
//! The metric is the hop count (every edge has length one). Edge weights
//! only enter gradients and Dirichlet forms. Balls `B(x, r) = {y : d(x, y) <= r}`
//! are precomputed for every centre and every integer radius up to the
//! diameter.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of vertices a builder will accept.
pub const DEFAULT_MAX_VERTICES: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Row-major coordinates of a grid or torus builtin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridCoords {
    pub dims: Vec<usize>,
    pub periodic: bool,
}

impl GridCoords {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut x: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            c[axis] = x % self.dims[axis];
            x /= self.dims[axis];
        }
        c
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.dims).fold(0, |acc, (&ci, &d)| acc * d + ci)
    }

    /// Neighbour of `x` displaced by `delta` along `axis`; `None` when a
    /// non-periodic grid runs out of range.
    pub fn step(&self, x: usize, axis: usize, delta: isize) -> Option<usize> {
        let mut c = self.coords(x);
        let d = self.dims[axis] as isize;
        let moved = c[axis] as isize + delta;
        if self.periodic {
            c[axis] = moved.rem_euclid(d) as usize;
        } else if (0..d).contains(&moved) {
            c[axis] = moved as usize;
        } else {
            return None;
        }
        Some(self.index(&c))
    }
}

/// Balls of every radius around every vertex.
///
/// `order` holds, per centre, all vertices in BFS order, so `B(x, r)` is a
/// prefix of the centre's row.
#[derive(Clone, Debug)]
pub struct BallTable {
    n: usize,
    radii: usize,
    order: Vec<u32>,
    counts: Vec<u32>,
    measures: Vec<f64>,
}

impl BallTable {
    fn build(n: usize, diameter: usize, dist: &[u32], order: Vec<u32>, measure: &[f64]) -> Self {
        let radii = diameter + 1;
        let mut counts = vec![0u32; n * radii];
        let mut measures = vec![0.0; n * radii];
        for x in 0..n {
            let row = &order[x * n..(x + 1) * n];
            let mut k = 0usize;
            let mut acc = 0.0;
            for r in 0..radii {
                while k < n && dist[x * n + row[k] as usize] as usize <= r {
                    acc += measure[row[k] as usize];
                    k += 1;
                }
                counts[x * radii + r] = k as u32;
                measures[x * radii + r] = acc;
            }
        }
        BallTable {
            n,
            radii,
            order,
            counts,
            measures,
        }
    }

    /// Vertices of `B(x, r)`; radii beyond the diameter give the whole space.
    pub fn ball(&self, x: usize, r: usize) -> &[u32] {
        let r = r.min(self.radii - 1);
        let k = self.counts[x * self.radii + r] as usize;
        &self.order[x * self.n..x * self.n + k]
    }

    pub fn measure(&self, x: usize, r: usize) -> f64 {
        self.measures[x * self.radii + r.min(self.radii - 1)]
    }

    pub fn len(&self, x: usize, r: usize) -> usize {
        self.counts[x * self.radii + r.min(self.radii - 1)] as usize
    }
}

#[derive(Clone, Debug)]
pub struct Space {
    label: String,
    ids: Vec<String>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
    dist: Vec<u32>,
    diameter: usize,
    balls: BallTable,
    grid: Option<GridCoords>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DoublingResult {
    pub constant: f64,
    pub vertex: usize,
    pub radius: usize,
    /// `max_x mu(B(x,2r)) / mu(B(x,r))` for r = 1..=r_max.
    pub per_radius: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GrowthFit {
    pub sigma: f64,
    pub c: f64,
    pub residual: f64,
    pub radii: Vec<usize>,
    pub min_measures: Vec<f64>,
}

impl Space {
    /// Validates the raw graph and precomputes distances and balls.
    pub fn new(
        label: impl Into<String>,
        ids: Vec<String>,
        measure: Vec<f64>,
        edges: Vec<Edge>,
        grid: Option<GridCoords>,
        max_vertices: usize,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Parse {
                line: 0,
                msg: "graph has no vertices".into(),
            });
        }
        if n > max_vertices {
            return Err(Error::TooLarge {
                count: n,
                cap: max_vertices,
            });
        }
        assert_eq!(measure.len(), n, "one measure per vertex");
        for &m in &measure {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::NonPositive {
                    line: 0,
                    what: "measure",
                    value: m,
                });
            }
        }
        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::NonPositive {
                    line: 0,
                    what: "weight",
                    value: e.weight,
                });
            }
            if e.a == e.b || e.a >= n || e.b >= n {
                return Err(Error::InvalidArgument(format!("bad edge {} -- {}", e.a, e.b)));
            }
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for (x, row) in adj.iter_mut().enumerate() {
            row.sort_by_key(|&(y, _)| y);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateEdge {
                    line: 0,
                    a: ids[x].clone(),
                    b: ids[w[0].0].clone(),
                });
            }
        }

        let (dist, order) = all_pairs_bfs(&adj);
        let reached = (0..n).filter(|&y| dist[y] != u32::MAX).count();
        if reached != n {
            return Err(Error::Disconnected { reached, total: n });
        }
        let diameter = dist.iter().copied().max().unwrap_or(0) as usize;
        let balls = BallTable::build(n, diameter, &dist, order, &measure);
        Ok(Space {
            label: label.into(),
            ids,
            measure,
            edges,
            adj,
            dist,
            diameter,
            balls,
            grid,
        })
    }

    /// Reads the line-oriented graph format (`v <id> <measure>`, `e <a> <b> <weight>`).
    pub fn from_file(path: impl AsRef<Path>, max_vertices: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), max_vertices)
    }

    pub fn parse(text: &str, label: &str, max_vertices: usize) -> Result<Self> {
        let mut ids = Vec::new();
        let mut measure = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();

        let number = |tok: &str, line: usize, what: &'static str| -> Result<f64> {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse {what} `{tok}`"),
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositive { line, what, value: v });
            }
            Ok(v)
        };

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            match toks.as_slice() {
                ["v", id, m] => {
                    if index.contains_key(*id) {
                        return Err(Error::Parse {
                            line,
                            msg: format!("vertex `{id}` declared twice"),
                        });
                    }
                    let m = number(m, line, "measure")?;
                    index.insert(id.to_string(), ids.len());
                    ids.push(id.to_string());
                    measure.push(m);
                }
                ["e", a, b, w] => {
                    let lookup = |id: &str| {
                        index.get(id).copied().ok_or_else(|| Error::Parse {
                            line,
                            msg: format!("edge refers to unknown vertex `{id}`"),
                        })
                    };
                    let (ia, ib) = (lookup(a)?, lookup(b)?);
                    if ia == ib {
                        return Err(Error::Parse {
                            line,
                            msg: format!("self-loop at `{a}`"),
                        });
                    }
                    let w = number(w, line, "weight")?;
                    let key = (ia.min(ib), ia.max(ib));
                    if seen.insert(key, line).is_some() {
                        return Err(Error::DuplicateEdge {
                            line,
                            a: a.to_string(),
                            b: b.to_string(),
                        });
                    }
                    edges.push(Edge {
                        a: ia,
                        b: ib,
                        weight: w,
                    });
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unrecognised line `{trimmed}`"),
                    })
                }
            }
        }
        Space::new(label, ids, measure, edges, None, max_vertices)
    }

    /// Builds one of the canonical example spaces, e.g. `torus:16x16`.
    pub fn builtin(descriptor: &str, max_vertices: usize) -> Result<Self> {
        let bad = || Error::Descriptor(descriptor.to_string());
        let (kind, arg) = descriptor.split_once(':').ok_or_else(bad)?;
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let check_size = |n: usize| {
            if n > max_vertices {
                Err(Error::TooLarge {
                    count: n,
                    cap: max_vertices,
                })
            } else {
                Ok(())
            }
        };
        let (n, edges, grid) = match kind {
            "cycle" => {
                let n = int(arg)?;
                if n < 3 {
                    return Err(bad());
                }
                check_size(n)?;
                let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
                (n, edges, None)
            }
            "grid" | "torus" => {
                let dims = arg.split('x').map(int).collect::<Result<Vec<_>>>()?;
                let periodic = kind == "torus";
                let min = if periodic { 3 } else { 1 };
                if dims.is_empty() || dims.iter().any(|&d| d < min) {
                    return Err(bad());
                }
                let n = dims
                    .iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                    .ok_or_else(bad)?;
                check_size(n)?;
                let g = GridCoords { dims, periodic };
                let mut edges = Vec::new();
                for x in 0..n {
                    for axis in 0..g.dims.len() {
                        if let Some(y) = g.step(x, axis, 1) {
                            if !periodic || g.dims[axis] > 2 || x < y {
                                edges.push((x, y));
                            }
                        }
                    }
                }
                if n == 1 {
                    return Err(bad());
                }
                (n, edges, Some(g))
            }
            "tree" => {
                let depth = int(arg)?;
                if depth == 0 || depth > 24 {
                    return Err(bad());
                }
                let n = (1usize << (depth + 1)) - 1;
                check_size(n)?;
                let edges = (1..n).map(|c| ((c - 1) / 2, c)).collect();
                (n, edges, None)
            }
            "dumbbell" => {
                let (k, len) = arg.split_once(',').ok_or_else(bad)?;
                let (k, len) = (int(k)?, int(len)?);
                if k < 2 || len < 1 {
                    return Err(bad());
                }
                let n = 2 * k + len - 1;
                check_size(n)?;
                let mut edges = Vec::new();
                for base in [0, k] {
                    for i in 0..k {
                        for j in i + 1..k {
                            edges.push((base + i, base + j));
                        }
                    }
                }
                // path 0 = p_0, p_1, ..., p_len = k through vertices 2k..2k+len-1
                let mut prev = 0;
                for step in 1..len {
                    let v = 2 * k + step - 1;
                    edges.push((prev, v));
                    prev = v;
                }
                edges.push((prev, k));
                (n, edges, None)
            }
            "heisenberg" => {
                let radius = int(arg)?;
                let (n, edges) = heisenberg_ball(radius, max_vertices)?;
                (n, edges, None)
            }
            _ => return Err(bad()),
        };
        let ids = (0..n).map(|i| i.to_string()).collect();
        let edges = edges.into_iter().map(|(a, b)| Edge { a, b, weight: 1.0 }).collect();
        Space::new(descriptor, ids, vec![1.0; n], edges, grid, max_vertices)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn min_measure(&self) -> f64 {
        self.measure.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `x` with edge weights, sorted by vertex index.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn dist(&self, x: usize, y: usize) -> usize {
        self.dist[x * self.len() + y] as usize
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn balls(&self) -> &BallTable {
        &self.balls
    }

    pub fn grid(&self) -> Option<&GridCoords> {
        self.grid.as_ref()
    }

    /// `mu`-weighted integral of `f`.
    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.measure).map(|(v, m)| v * m).sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integral(f) / self.total_measure()
    }

    /// Average of `f` over `B(x, r)`.
    pub fn ball_average(&self, f: &[f64], x: usize, r: usize) -> f64 {
        let s: f64 = self
            .balls
            .ball(x, r)
            .iter()
            .map(|&y| f[y as usize] * self.measure[y as usize])
            .sum();
        s / self.balls.measure(x, r)
    }

    /// `max_{x, 1<=r<=r_max} mu(B(x,2r)) / mu(B(x,r))`, radii clamped at the diameter.
    pub fn doubling_constant(&self, r_max: usize) -> Result<DoublingResult> {
        if r_max < 1 || r_max > self.diameter.max(1) {
            return Err(Error::InvalidArgument(format!(
                "r_max = {r_max} outside [1, {}]",
                self.diameter
            )));
        }
        let mut best = (0.0, 0, 1);
        let mut per_radius = Vec::with_capacity(r_max);
        for r in 1..=r_max {
            let mut row_max = 0.0f64;
            for x in 0..self.len() {
                let ratio = self.balls.measure(x, 2 * r) / self.balls.measure(x, r);
                row_max = row_max.max(ratio);
                if ratio > best.0 {
                    best = (ratio, x, r);
                }
            }
            per_radius.push(row_max);
        }
        Ok(DoublingResult {
            constant: best.0,
            vertex: best.1,
            radius: best.2,
            per_radius,
        })
    }

    /// Least-squares fit of `log inf_x mu(B(x,r)) = sigma log(r + 1/2) + log c`.
    ///
    /// A hop ball of radius `r` covers the continuum ball of radius `r + 1/2`
    /// (a cycle gives exactly `2(r + 1/2)`), which removes the small-radius bias
    /// of a plain `log r` regression.
    pub fn growth_exponent(&self, r_lo: usize, r_hi: usize) -> Result<GrowthFit> {
        let lo = r_lo.max(1);
        let hi = r_hi.min(self.diameter);
        if hi < lo + 1 {
            return Err(Error::DegenerateFit(format!(
                "need at least two radii in [{r_lo}, {r_hi}] within diameter {}",
                self.diameter
            )));
        }
        let radii: Vec<usize> = (lo..=hi).collect();
        let min_measures: Vec<f64> = radii
            .iter()
            .map(|&r| {
                (0..self.len())
                    .map(|x| self.balls.measure(x, r))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let xs: Vec<f64> = radii.iter().map(|&r| (r as f64 + 0.5).ln()).collect();
        let ys: Vec<f64> = min_measures.iter().map(|m| m.ln()).collect();
        let (slope, intercept, residual) = least_squares(&xs, &ys);
        Ok(GrowthFit {
            sigma: slope,
            c: intercept.exp(),
            residual,
            radii,
            min_measures,
        })
    }
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, rms residual)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum();
    (a, b, (rss / n).sqrt())
}

fn all_pairs_bfs(adj: &[Vec<(usize, f64)>]) -> (Vec<u32>, Vec<u32>) {
    let n = adj.len();
    let mut dist = vec![u32::MAX; n * n];
    let mut order = vec![0u32; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        let ord = &mut order[s * n..(s + 1) * n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        let mut k = 0;
        while let Some(x) = queue.pop_front() {
            ord[k] = x as u32;
            k += 1;
            for &(y, _) in &adj[x] {
                if row[y] == u32::MAX {
                    row[y] = row[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        if s == 0 && k < n {
            // disconnected; report from the caller
            return (dist, order);
        }
    }
    (dist, order)
}

/// Word ball of radius `radius` in the discrete Heisenberg group with
/// generators `x^{+-1}, y^{+-1}`, as an induced subgraph of the Cayley graph.
///
/// Elements are triples `(a, b, c)` with product
/// `(a, b, c)(a', b', c') = (a + a', b + b', c + c' + a b')`.
fn heisenberg_ball(radius: usize, cap: usize) -> Result<(usize, Vec<(usize, usize)>)> {
    type G = (i64, i64, i64);
    let gens: [fn(G) -> G; 4] = [
        |(a, b, c)| (a + 1, b, c),
        |(a, b, c)| (a - 1, b, c),
        |(a, b, c)| (a, b + 1, c + a),
        |(a, b, c)| (a, b - 1, c - a),
    ];
    let mut index: HashMap<G, usize> = HashMap::new();
    let mut elems = vec![(0, 0, 0)];
    index.insert((0, 0, 0), 0);
    let mut frontier = vec![(0i64, 0i64, 0i64)];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &g in &frontier {
            for step in gens {
                let h = step(g);
                if let std::collections::hash_map::Entry::Vacant(slot) = index.entry(h) {
                    slot.insert(elems.len());
                    elems.push(h);
                    next.push(h);
                    if elems.len() > cap {
                        return Err(Error::TooLarge {
                            count: elems.len(),
                            cap,
                        });
                    }
                }
            }
        }
        frontier = next;
    }
    let mut edges = Vec::new();
    for (i, &g) in elems.iter().enumerate() {
        for step in gens {
            if let Some(&j) = index.get(&step(g)) {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
    }
    Ok((elems.len(), edges))
}
