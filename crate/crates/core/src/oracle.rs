//! Grid-graph discretization of the reduced space with singular-orbit
//! identifications, Dijkstra shortest paths as a brute-force distance
//! oracle, and a multi-resolution refinement that polishes the discrete
//! path by local curve shortening under the continuous metric.
//!
//! The oracle is deliberately independent of the Hamiltonian shooting
//! solver: it touches only the warp functions and graph search.

use crate::error::{Error, Result};
use crate::geodesic::ReducedPoint;
use crate::metrics::{DiagonalMetric, WarpProfile};
use std::f64::consts::{FRAC_PI_2, PI};

pub const MIN_RESOLUTION: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub n_rho: usize,
    pub n_u: usize,
    pub n_v: usize,
}

impl Resolution {
    pub fn cubic(n: usize) -> Self {
        Self { n_rho: n, n_u: n, n_v: n }
    }

    fn validate(&self) -> Result<()> {
        for n in [self.n_rho, self.n_u, self.n_v] {
            if n < MIN_RESOLUTION {
                return Err(Error::ResolutionTooSmall { got: n, min: MIN_RESOLUTION });
            }
        }
        Ok(())
    }
}

/// How a `DistanceResult` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    Shooting,
    Grid,
    Refined,
    ClosedForm,
}

impl DistanceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceMethod::Shooting => "shooting",
            DistanceMethod::Grid => "grid",
            DistanceMethod::Refined => "refined",
            DistanceMethod::ClosedForm => "closed_form",
        }
    }
}

/// A distance value with provenance, an error estimate, and optionally
/// the realized path.
#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub value: f64,
    pub method: DistanceMethod,
    pub error_estimate: f64,
    pub path: Option<Vec<ReducedPoint>>,
    pub warning: Option<String>,
}

/// Grid graph over [0, pi/2] x [0, pi] x [0, pi] with a 26-neighbor
/// stencil, reflecting walls in u and v, and the two singular orbits
/// collapsed: all (0, u, .) columns are identified per u, all
/// (last, ., v) per v. Neighbors and weights are generated on the fly
/// from per-row tables, so the graph itself stays small.
pub struct GridGraph {
    pub resolution: Resolution,
    warp: WarpProfile,
    h_rho: f64,
    h_u: f64,
    h_v: f64,
    base_interior: u32,
    base_top: u32,
    n_nodes: u32,
    /// weight[row][di + 1][|dj|][|dl|]; rows index the lower rho of the
    /// edge's midpoint for di = +1 and the node row otherwise.
    weights: Vec<[[[f64; 2]; 2]; 3]>,
    /// Wall-circle steps at rho = 0 and rho = pi/2.
    w_pole0_u: f64,
    w_pole1_v: f64,
}

/// Build the grid for a metric. Edge weights use midpoint quadrature:
/// sqrt(drho^2 + phi(mid)^2 du^2 + psi(mid)^2 dv^2).
pub fn build_grid(metric: &DiagonalMetric, resolution: Resolution) -> Result<GridGraph> {
    resolution.validate()?;
    let (nr, nu, nv) = (resolution.n_rho, resolution.n_u, resolution.n_v);
    let h_rho = FRAC_PI_2 / (nr - 1) as f64;
    let h_u = PI / (nu - 1) as f64;
    let h_v = PI / (nv - 1) as f64;

    let mut weights = vec![[[[f64::INFINITY; 2]; 2]; 3]; nr];
    for i in 0..nr {
        let rho_i = i as f64 * h_rho;
        for (slot, di) in [(0usize, -1i64), (1, 0), (2, 1)] {
            let ii = i as i64 + di;
            if ii < 0 || ii >= nr as i64 {
                continue;
            }
            let mid = rho_i + 0.5 * di as f64 * h_rho;
            let w = metric.warp.eval_extended(mid);
            let dr = di.unsigned_abs() as f64 * h_rho;
            for (adj, adl) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
                let du = adj as f64 * h_u * w.phi;
                let dv = adl as f64 * h_v * w.psi;
                weights[i][slot][adj][adl] = (dr * dr + du * du + dv * dv).sqrt();
            }
        }
    }
    let w0 = metric.warp.eval(0.0)?;
    let w1 = metric.warp.eval(FRAC_PI_2)?;

    let base_interior = nu as u32;
    let base_top = base_interior + ((nr - 2) * nu * nv) as u32;
    let n_nodes = base_top + nv as u32;
    Ok(GridGraph {
        resolution,
        warp: metric.warp.clone(),
        h_rho,
        h_u,
        h_v,
        base_interior,
        base_top,
        n_nodes,
        weights,
        w_pole0_u: w0.phi * h_u,
        w_pole1_v: w1.psi * h_v,
    })
}

impl GridGraph {
    pub fn node_count(&self) -> usize {
        self.n_nodes as usize
    }

    pub fn max_spacing(&self) -> f64 {
        self.h_rho.max(self.h_u).max(self.h_v)
    }

    #[inline]
    fn interior_id(&self, i: usize, j: usize, l: usize) -> u32 {
        debug_assert!(i >= 1 && i <= self.resolution.n_rho - 2);
        self.base_interior + (((i - 1) * self.resolution.n_u + j) * self.resolution.n_v + l) as u32
    }

    /// Coordinates of a node; hub nodes carry only one angle, the other is
    /// reported as 0 and flagged by the rho value.
    pub fn node_coords(&self, node: u32) -> ReducedPoint {
        if node < self.base_interior {
            return ReducedPoint { rho: 0.0, u: node as f64 * self.h_u, v: 0.0 };
        }
        if node >= self.base_top {
            let l = (node - self.base_top) as usize;
            return ReducedPoint { rho: FRAC_PI_2, u: 0.0, v: l as f64 * self.h_v };
        }
        let rest = (node - self.base_interior) as usize;
        let (nu, nv) = (self.resolution.n_u, self.resolution.n_v);
        let l = rest % nv;
        let j = (rest / nv) % nu;
        let i = rest / (nu * nv) + 1;
        ReducedPoint {
            rho: i as f64 * self.h_rho,
            u: j as f64 * self.h_u,
            v: l as f64 * self.h_v,
        }
    }

    #[inline]
    fn reflect(x: i64, n: usize) -> usize {
        if x < 0 {
            (-x) as usize
        } else if x >= n as i64 {
            2 * (n - 1) - x as usize
        } else {
            x as usize
        }
    }

    /// Visit the neighbors of `node` with their edge weights.
    #[inline]
    pub fn for_each_neighbor(&self, node: u32, mut f: impl FnMut(u32, f64)) {
        let (nr, nu, nv) = (
            self.resolution.n_rho,
            self.resolution.n_u,
            self.resolution.n_v,
        );
        if node < self.base_interior {
            // Hub at rho = 0 carrying u_j.
            let j = node as usize;
            if j > 0 {
                f(node - 1, self.w_pole0_u);
            }
            if j + 1 < nu {
                f(node + 1, self.w_pole0_u);
            }
            for dj in -1i64..=1 {
                let jj = Self::reflect(j as i64 + dj, nu);
                let w = self.weights[0][2][dj.unsigned_abs() as usize][0];
                for l in 0..nv {
                    f(self.interior_id(1, jj, l), w);
                }
            }
            return;
        }
        if node >= self.base_top {
            // Hub at rho = pi/2 carrying v_l.
            let l = (node - self.base_top) as usize;
            if l > 0 {
                f(node - 1, self.w_pole1_v);
            }
            if l + 1 < nv {
                f(node + 1, self.w_pole1_v);
            }
            for dl in -1i64..=1 {
                let ll = Self::reflect(l as i64 + dl, nv);
                let w = self.weights[nr - 1][0][0][dl.unsigned_abs() as usize];
                for j in 0..nu {
                    f(self.interior_id(nr - 2, j, ll), w);
                }
            }
            return;
        }

        let rest = (node - self.base_interior) as usize;
        let l = rest % nv;
        let j = (rest / nv) % nu;
        let i = rest / (nu * nv) + 1;

        for di in -1i64..=1 {
            let ii = i as i64 + di;
            let slot = (di + 1) as usize;
            if ii == 0 {
                // Neighbors collapse onto the rho = 0 hubs; the v offset is
                // free there, so only the dl = 0 weight matters.
                for dj in -1i64..=1 {
                    let jj = Self::reflect(j as i64 + dj, nu);
                    f(jj as u32, self.weights[i][slot][dj.unsigned_abs() as usize][0]);
                }
                continue;
            }
            if ii == (nr - 1) as i64 {
                for dl in -1i64..=1 {
                    let ll = Self::reflect(l as i64 + dl, nv);
                    f(
                        self.base_top + ll as u32,
                        self.weights[i][slot][0][dl.unsigned_abs() as usize],
                    );
                }
                continue;
            }
            for dj in -1i64..=1 {
                let jj = Self::reflect(j as i64 + dj, nu);
                for dl in -1i64..=1 {
                    if di == 0 && dj == 0 && dl == 0 {
                        continue;
                    }
                    let ll = Self::reflect(l as i64 + dl, nv);
                    let w = self.weights[i][slot][dj.unsigned_abs() as usize]
                        [dl.unsigned_abs() as usize];
                    f(self.interior_id(ii as usize, jj, ll), w);
                }
            }
        }
    }

    /// Snap a reduced point to the nearest grid node, returning the node
    /// and the metric displacement of the snap.
    pub fn snap(&self, p: &ReducedPoint) -> (u32, f64) {
        let (nr, nu, nv) = (
            self.resolution.n_rho,
            self.resolution.n_u,
            self.resolution.n_v,
        );
        let i = ((p.rho / self.h_rho).round() as usize).min(nr - 1);
        let j = ((p.u / self.h_u).round() as usize).min(nu - 1);
        let l = ((p.v / self.h_v).round() as usize).min(nv - 1);
        let node = if i == 0 {
            j as u32
        } else if i == nr - 1 {
            self.base_top + l as u32
        } else {
            self.interior_id(i, j, l)
        };
        let c = self.node_coords(node);
        let mid = self.warp.eval_extended(0.5 * (p.rho + c.rho));
        let dr = p.rho - c.rho;
        let du = if i == nr - 1 { 0.0 } else { p.u - c.u };
        let dv = if i == 0 { 0.0 } else { p.v - c.v };
        let disp = (dr * dr
            + mid.phi * mid.phi * du * du
            + mid.psi * mid.psi * dv * dv)
            .sqrt();
        (node, disp)
    }

    /// Dijkstra from `source`; stops early once `target` is settled when
    /// one is given. Returns distances and predecessors.
    pub fn dijkstra(&self, source: u32, target: Option<u32>) -> ShortestPaths {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![u32::MAX; n];
        let mut heap = IndexedHeap::new(n);
        dist[source as usize] = 0.0;
        heap.push(source, &dist);
        while let Some(node) = heap.pop(&dist) {
            if target == Some(node) {
                break;
            }
            let d = dist[node as usize];
            self.for_each_neighbor(node, |next, w| {
                let cand = d + w;
                if cand < dist[next as usize] {
                    dist[next as usize] = cand;
                    prev[next as usize] = node;
                    heap.push(next, &dist);
                }
            });
        }
        ShortestPaths { dist, prev }
    }

    /// Node path from `source` to `target` using the predecessor array.
    pub fn extract_path(&self, sp: &ShortestPaths, target: u32) -> Vec<ReducedPoint> {
        let mut nodes = Vec::new();
        let mut cur = target;
        while cur != u32::MAX {
            nodes.push(cur);
            cur = sp.prev[cur as usize];
        }
        nodes.reverse();
        let mut pts: Vec<ReducedPoint> = nodes.iter().map(|&n| self.node_coords(n)).collect();
        // Hub nodes have no coordinate in the collapsed angle; fill it from
        // a neighbor so polylines stay continuous for consumers.
        for idx in 0..pts.len() {
            let fill = |pts: &[ReducedPoint], idx: usize, pick_v: bool| -> f64 {
                let near = if idx + 1 < pts.len() { Some(pts[idx + 1]) } else { None };
                let near = near.or(if idx > 0 { Some(pts[idx - 1]) } else { None });
                match near {
                    Some(p) if pick_v => p.v,
                    Some(p) => p.u,
                    None => 0.0,
                }
            };
            if pts[idx].rho == 0.0 {
                pts[idx].v = fill(&pts, idx, true);
            } else if pts[idx].rho == FRAC_PI_2 {
                pts[idx].u = fill(&pts, idx, false);
            }
        }
        pts
    }

    /// Undirected edge count and an order-independent checksum of the
    /// weights, for the debug dump.
    pub fn edge_stats(&self) -> (usize, u64) {
        let mut count = 0usize;
        let mut checksum = 0u64;
        for node in 0..self.n_nodes {
            self.for_each_neighbor(node, |next, w| {
                if next > node {
                    count += 1;
                    checksum = checksum.wrapping_add(w.to_bits().rotate_left((next % 61) as u32));
                }
            });
        }
        (count, checksum)
    }

    pub fn warp(&self) -> &WarpProfile {
        &self.warp
    }
}

pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub prev: Vec<u32>,
}

/// Binary heap with positions for decrease-key, keyed by the caller's
/// distance array.
struct IndexedHeap {
    heap: Vec<u32>,
    pos: Vec<u32>,
}

const NOT_IN_HEAP: u32 = u32::MAX;
const SETTLED: u32 = u32::MAX - 1;

impl IndexedHeap {
    fn new(n: usize) -> Self {
        Self { heap: Vec::with_capacity(1024), pos: vec![NOT_IN_HEAP; n] }
    }

    fn push(&mut self, node: u32, dist: &[f64]) {
        match self.pos[node as usize] {
            SETTLED => {}
            NOT_IN_HEAP => {
                self.pos[node as usize] = self.heap.len() as u32;
                self.heap.push(node);
                self.sift_up(self.heap.len() - 1, dist);
            }
            i => {
                self.sift_up(i as usize, dist);
            }
        }
    }

    fn pop(&mut self, dist: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().unwrap();
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(0, dist);
        }
        self.pos[top as usize] = SETTLED;
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, dist: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if dist[self.heap[i] as usize] < dist[self.heap[parent] as usize] {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize, dist: &[f64]) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut smallest = i;
            if l < self.heap.len()
                && dist[self.heap[l] as usize] < dist[self.heap[smallest] as usize]
            {
                smallest = l;
            }
            if r < self.heap.len()
                && dist[self.heap[r] as usize] < dist[self.heap[smallest] as usize]
            {
                smallest = r;
            }
            if smallest == i {
                break;
            }
            self.swap(i, smallest);
            i = smallest;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a] as usize] = a as u32;
        self.pos[self.heap[b] as usize] = b as u32;
    }
}

/// Anisotropy allowance factor for the raw Dijkstra error estimate.
const STENCIL_ALLOWANCE: f64 = 2.0;

/// Raw Dijkstra distance between snapped points. The value is the exact
/// graph metric; the error estimate combines the snap displacements with
/// the stencil allowance c * h.
pub fn grid_distance(graph: &GridGraph, source: &ReducedPoint, target: &ReducedPoint) -> Result<DistanceResult> {
    let (s, snap_s) = graph.snap(source);
    let (t, snap_t) = graph.snap(target);
    let sp = graph.dijkstra(s, Some(t));
    let value = sp.dist[t as usize];
    assert!(value.is_finite(), "grid graph must be connected");
    let path = graph.extract_path(&sp, t);
    Ok(DistanceResult {
        value,
        method: DistanceMethod::Grid,
        error_estimate: snap_s + snap_t + STENCIL_ALLOWANCE * graph.max_spacing(),
        path: Some(path),
        warning: None,
    })
}

/// Simpson-rule length of one straight coordinate segment; an endpoint on
/// a singular orbit drops the collapsed angle (the jump there is free).
fn segment_length(warp: &WarpProfile, a: &ReducedPoint, b: &ReducedPoint) -> f64 {
    let mut du = b.u - a.u;
    let mut dv = b.v - a.v;
    if a.rho == 0.0 || b.rho == 0.0 {
        dv = 0.0;
    }
    if a.rho == FRAC_PI_2 || b.rho == FRAC_PI_2 {
        du = 0.0;
    }
    let dr = b.rho - a.rho;
    let f = |tau: f64| -> f64 {
        let w = warp.eval_extended(a.rho + tau * dr);
        (dr * dr + w.phi * w.phi * du * du + w.psi * w.psi * dv * dv).sqrt()
    };
    (f(0.0) + 4.0 * f(0.5) + f(1.0)) / 6.0
}

pub fn path_length(warp: &WarpProfile, path: &[ReducedPoint]) -> f64 {
    path.windows(2).map(|w| segment_length(warp, &w[0], &w[1])).sum()
}

/// Resample a polyline to `n` vertices by arc length, preserving
/// wall-contact vertices exactly.
fn resample(warp: &WarpProfile, path: &[ReducedPoint], n: usize) -> Vec<ReducedPoint> {
    if path.len() < 3 {
        return path.to_vec();
    }
    let on_wall = |p: &ReducedPoint| p.rho == 0.0 || p.rho == FRAC_PI_2;
    // Split at wall contacts; resample each piece proportionally.
    let mut pieces: Vec<Vec<ReducedPoint>> = Vec::new();
    let mut cur = vec![path[0]];
    for p in &path[1..] {
        cur.push(*p);
        if on_wall(p) {
            pieces.push(std::mem::take(&mut cur));
            cur.push(*p);
        }
    }
    if cur.len() > 1 {
        pieces.push(cur);
    }
    let total: f64 = pieces.iter().map(|p| path_length(warp, p)).sum();
    let mut out: Vec<ReducedPoint> = vec![path[0]];
    for piece in &pieces {
        let len = path_length(warp, piece);
        let m = ((n as f64 * len / total.max(1e-300)).round() as usize).max(2);
        // Cumulative lengths along the piece.
        let mut cum = vec![0.0];
        for w in piece.windows(2) {
            cum.push(cum.last().unwrap() + segment_length(warp, &w[0], &w[1]));
        }
        let piece_len = *cum.last().unwrap();
        for step in 1..=m {
            let target = piece_len * step as f64 / m as f64;
            let idx = cum.partition_point(|&c| c < target).min(piece.len() - 1).max(1);
            let (c0, c1) = (cum[idx - 1], cum[idx]);
            let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 1.0 };
            let (a, b) = (piece[idx - 1], piece[idx]);
            let interp = ReducedPoint {
                rho: a.rho + t * (b.rho - a.rho),
                u: a.u + t * (b.u - a.u),
                v: a.v + t * (b.v - a.v),
            };
            out.push(if step == m { piece[piece.len() - 1] } else { interp });
        }
    }
    out
}

/// Local curve shortening: cyclic coordinate descent over interior
/// vertices with a parabolic line search, endpoints and wall contacts
/// pinned to their constraint sets.
fn relax(warp: &WarpProfile, path: &mut [ReducedPoint], sweeps: usize) -> f64 {
    let n = path.len();
    if n < 3 {
        return path_length(warp, path);
    }
    let mut last_total = path_length(warp, path);
    // Probe scale of order one segment; vertices rarely need to move
    // further than their neighbors per sweep.
    let mut delta = (last_total / (n - 1) as f64).max(1e-6);
    for _ in 0..sweeps {
        for i in 1..n - 1 {
            let (prev, next) = (path[i - 1], path[i + 1]);
            let local = |p: ReducedPoint| -> f64 {
                segment_length(warp, &prev, &p) + segment_length(warp, &p, &next)
            };
            let mut v = path[i];
            let on_v_wall = v.rho == 0.0;
            let on_u_wall = v.rho == FRAC_PI_2;
            // rho is frozen on wall contacts to keep the path class.
            if !on_v_wall && !on_u_wall {
                v.rho = improve(|x| local(ReducedPoint { rho: x, ..v }), v.rho, delta, 0.0, FRAC_PI_2);
            }
            if !on_u_wall {
                v.u = improve(|x| local(ReducedPoint { u: x, ..v }), v.u, delta, 0.0, PI);
            }
            if !on_v_wall {
                v.v = improve(|x| local(ReducedPoint { v: x, ..v }), v.v, delta, 0.0, PI);
            }
            path[i] = v;
        }
        let total = path_length(warp, path);
        let gain = last_total - total;
        last_total = total;
        if gain < 1e-11 && delta < 1e-5 {
            break;
        }
        delta = (delta * 0.9).max(1e-7);
    }
    last_total
}

/// One parabolic/pattern step of a 1D minimization around x.
fn improve(obj: impl Fn(f64) -> f64, x: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    let xp = (x + delta).min(hi);
    let xm = (x - delta).max(lo);
    let f0 = obj(x);
    let fp = obj(xp);
    let fm = obj(xm);
    let denom = fm - 2.0 * f0 + fp;
    let mut best = (f0, x);
    for cand in [
        xp,
        xm,
        if denom.abs() > 1e-300 {
            (x + 0.5 * delta * (fm - fp) / denom).clamp(x - 2.0 * delta, x + 2.0 * delta)
        } else {
            x
        }
        .clamp(lo, hi),
    ] {
        let fc = obj(cand);
        if fc < best.0 {
            best = (fc, cand);
        }
    }
    best.1
}

/// Polish a discrete path by multilevel resampling and curve shortening;
/// returns the shortened length and the final polyline.
pub fn polish_path(warp: &WarpProfile, path: &[ReducedPoint]) -> (f64, Vec<ReducedPoint>) {
    if path.len() < 2 {
        return (0.0, path.to_vec());
    }
    let mut poly = path.to_vec();
    let mut len = path_length(warp, &poly);
    // Cascadic scheme: converge the coarse shape first (Gauss-Seidel only
    // damps smooth modes slowly at fine resolution), then refine.
    for level in [8usize, 16, 32, 64, 128, 256] {
        poly = resample(warp, &poly, level);
        let sweeps = if level <= 64 { 120 } else { 60 };
        len = relax(warp, &mut poly, sweeps);
    }
    (len, poly)
}

/// Multi-resolution refined distance: raw Dijkstra at each resolution,
/// curve-shortened at the midpoint-quadrature level, finest value
/// returned. Resolutions must be strictly increasing.
pub fn refined_distance(
    metric: &DiagonalMetric,
    p: &ReducedPoint,
    q: &ReducedPoint,
    resolutions: &[usize],
) -> Result<DistanceResult> {
    if resolutions.len() < 2 {
        return Err(Error::Param("refined_distance needs at least 2 resolutions".into()));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("resolutions must be strictly increasing".into()));
    }
    // The direct-chord seed is resolution independent; polishing it covers
    // pairs where the graph prefers a wall-touching class whose discrete
    // bias is lower but whose true length is worse.
    let chord = vec![
        *p,
        ReducedPoint {
            rho: 0.5 * (p.rho + q.rho),
            u: 0.5 * (p.u + q.u),
            v: 0.5 * (p.v + q.v),
        },
        *q,
    ];
    let (chord_len, chord_poly) = polish_path(&metric.warp, &chord);

    let mut values = Vec::new();
    let mut finest: Option<(f64, Vec<ReducedPoint>)> = None;
    for &n in resolutions {
        let graph = build_grid(metric, Resolution::cubic(n))?;
        let raw = grid_distance(&graph, p, q)?;
        // Pin the true endpoints onto the discrete path so the snap
        // displacement is absorbed by the curve shortening.
        let mut path = raw.path.unwrap();
        path.insert(0, *p);
        path.push(*q);
        let (polished, poly) = polish_path(&graph.warp, &path);
        if chord_len < polished {
            values.push(chord_len);
            finest = Some((chord_len, chord_poly.clone()));
        } else {
            values.push(polished);
            finest = Some((polished, poly));
        }
    }
    let (value, path) = finest.unwrap();
    let coarse = values[values.len() - 2];
    Ok(DistanceResult {
        value,
        method: DistanceMethod::Refined,
        error_estimate: (value - coarse).abs() + 5e-4,
        path: Some(path),
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::round_closed_form;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn rejects_small_resolution() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        assert!(build_grid(&m, Resolution::cubic(16)).is_err());
    }

    #[test]
    fn node_count_and_connectivity_17() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        let g = build_grid(&m, Resolution::cubic(17)).unwrap();
        assert!(g.node_count() <= 17 * 17 * 17);
        let sp = g.dijkstra(0, None);
        assert!(sp.dist.iter().all(|d| d.is_finite()), "graph must be connected");
    }

    #[test]
    fn pure_rho_edge_weight_is_exact() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        let g = build_grid(&m, Resolution::cubic(33)).unwrap();
        for i in 1..31 {
            assert_abs_diff_eq!(g.weights[i][2][0][0], g.h_rho, epsilon = 1e-15);
        }
    }

    #[test]
    fn pure_u_edge_weight_cheeger() {
        let m = DiagonalMetric::cheeger(3, 1, 6.0).unwrap();
        let g = build_grid(&m, Resolution::cubic(33)).unwrap();
        let i = 16; // rho = pi/4 at resolution 33
        assert_abs_diff_eq!(i as f64 * g.h_rho, FRAC_PI_4, epsilon = 1e-12);
        let expect = 0.35355339059327373 * g.h_u;
        assert_abs_diff_eq!(g.weights[i][1][1][0], expect, epsilon = 1e-12);
    }

    #[test]
    fn edge_weights_symmetric() {
        let m = DiagonalMetric::cheeger(3, 1, 2.0).unwrap();
        let g = build_grid(&m, Resolution::cubic(17)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a = rng.random_range(0..g.node_count() as u32);
            let mut edges_a: Vec<(u32, f64)> = Vec::new();
            g.for_each_neighbor(a, |n, w| edges_a.push((n, w)));
            for &(b, w) in &edges_a {
                let mut back = f64::INFINITY;
                g.for_each_neighbor(b, |n, w2| {
                    if n == a {
                        back = back.min(w2);
                    }
                });
                assert!((back - w).abs() <= 1e-14 || back < w, "asymmetric edge {a}->{b}");
            }
        }
    }

    #[test]
    fn pole_to_pole_round() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        let g = build_grid(&m, Resolution::cubic(65)).unwrap();
        let p = ReducedPoint { rho: 0.0, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho: FRAC_PI_2, u: 0.0, v: 0.0 };
        let d = grid_distance(&g, &p, &q).unwrap();
        assert_abs_diff_eq!(d.value, FRAC_PI_2, epsilon = 2e-2);
    }

    #[test]
    fn round_antipodal_on_grid() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        let g = build_grid(&m, Resolution::cubic(65)).unwrap();
        let p = ReducedPoint { rho: FRAC_PI_4, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho: FRAC_PI_4, u: PI, v: PI };
        let d = grid_distance(&g, &p, &q).unwrap();
        assert_abs_diff_eq!(d.value, PI, epsilon = 3e-2);
    }

    #[test]
    fn refined_matches_round_closed_form() {
        let m = DiagonalMetric::round(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let p = ReducedPoint {
                rho: rng.random_range(0.0..FRAC_PI_2),
                u: rng.random_range(0.0..PI),
                v: rng.random_range(0.0..PI),
            };
            let q = ReducedPoint {
                rho: rng.random_range(0.0..FRAC_PI_2),
                u: rng.random_range(0.0..PI),
                v: rng.random_range(0.0..PI),
            };
            let expect = round_closed_form(&p, &q);
            let d = refined_distance(&m, &p, &q, &[33, 65]).unwrap();
            assert!(
                (d.value - expect).abs() <= 2e-2,
                "p={p:?} q={q:?} got {} expect {expect}",
                d.value
            );
        }
    }

    #[test]
    fn triangle_inequality_graph_metric() {
        let m = DiagonalMetric::cheeger(3, 1, 2.0).unwrap();
        let g = build_grid(&m, Resolution::cubic(17)).unwrap();
        let sources = [0u32, 500, 1000, 2000, 3000];
        let sweeps: Vec<_> = sources.iter().map(|&s| g.dijkstra(s, None)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let a = rng.random_range(0..sources.len());
            let b = rng.random_range(0..sources.len());
            if a == b {
                continue;
            }
            let node = rng.random_range(0..g.node_count());
            let dab = sweeps[a].dist[sources[b] as usize];
            let dan = sweeps[a].dist[node];
            let dbn = sweeps[b].dist[node];
            assert!(dab <= dan + dbn + 1e-12);
            assert!(dan <= dab + dbn + 1e-12);
        }
    }

    #[test]
    fn lipschitz_projection_bound() {
        let m = DiagonalMetric::cheeger(3, 1, 8.0).unwrap();
        let g = build_grid(&m, Resolution::cubic(17)).unwrap();
        let src = g.snap(&ReducedPoint { rho: 0.7, u: 1.0, v: 2.0 }).0;
        let sp = g.dijkstra(src, None);
        let rho_src = g.node_coords(src).rho;
        for node in 0..g.node_count() as u32 {
            let rho = g.node_coords(node).rho;
            assert!(sp.dist[node as usize] >= (rho - rho_src).abs() - 1e-12);
        }
    }
}
