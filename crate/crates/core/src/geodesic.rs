//! Hamiltonian geodesic flow in the 3D symmetry-reduced space
//! (rho, u, v) with metric d rho^2 + phi^2 du^2 + psi^2 dv^2, and a
//! multi-start shooting solver for two-point distance.
//!
//! The angular momenta p_u = phi^2 u' and p_v = psi^2 v' are constants of
//! motion (Clairaut integrals); together with the Hamiltonian they serve
//! as built-in correctness monitors. Only (rho, u, v, p_rho) is actually
//! integrated, so p_u and p_v are conserved bit-exactly by construction.

use crate::error::{Error, Result};
use crate::metrics::{DiagonalMetric, WarpProfile};
use crate::oracle::{DistanceMethod, DistanceResult};
use std::f64::consts::{FRAC_PI_2, PI};

const TWO_PI: f64 = 2.0 * PI;

/// Momenta below this magnitude are treated as exactly zero when deciding
/// whether a trajectory may pass through a singular orbit.
const ZERO_MOMENTUM: f64 = 1e-12;

/// Hysteresis band around the walls for crossing bookkeeping.
const WALL_DEADBAND: f64 = 1e-9;

/// Point of the symmetry-reduced space. `u` and `v` are angles along great
/// circles of the two sphere factors; distance queries interpret them via
/// the gaps |u_p - u_q| and |v_p - v_q|. At rho = 0 all v represent the
/// same point, at rho = pi/2 all u do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPoint {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
}

impl ReducedPoint {
    pub fn new(rho: f64, u: f64, v: f64) -> Result<Self> {
        for (name, val, max) in [("rho", rho, FRAC_PI_2), ("u", u, PI), ("v", v, PI)] {
            if !(0.0..=max + 1e-12).contains(&val) {
                return Err(Error::Domain { name: match name {
                    "rho" => "rho",
                    "u" => "u",
                    _ => "v",
                }, value: val, min: 0.0, max });
            }
        }
        Ok(Self { rho, u, v })
    }

    pub fn on_v_wall(&self) -> bool {
        self.rho <= ZERO_MOMENTUM
    }

    pub fn on_u_wall(&self) -> bool {
        self.rho >= FRAC_PI_2 - ZERO_MOMENTUM
    }
}

/// Phase-space point of the reduced geodesic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p_rho: f64,
    pub p_u: f64,
    pub p_v: f64,
}

impl GeodesicState {
    /// Unit-speed state at `position` pointing along the coordinate
    /// velocity (d_rho, d_u, d_v).
    pub fn unit_speed(
        metric: &DiagonalMetric,
        position: (f64, f64, f64),
        velocity: (f64, f64, f64),
    ) -> Result<Self> {
        let w = metric.warp.eval(position.0)?;
        let (dr, du, dv) = velocity;
        let speed =
            (dr * dr + w.phi * w.phi * du * du + w.psi * w.psi * dv * dv).sqrt();
        if speed <= 0.0 || !speed.is_finite() {
            return Err(Error::Param("velocity must be nonzero and finite".into()));
        }
        Ok(Self {
            rho: position.0,
            u: position.1,
            v: position.2,
            p_rho: dr / speed,
            p_u: w.phi * w.phi * du / speed,
            p_v: w.psi * w.psi * dv / speed,
        })
    }

    /// H = (p_rho^2 + p_u^2/phi^2 + p_v^2/psi^2) / 2, with exact-zero
    /// momenta contributing nothing even where the warp vanishes.
    pub fn hamiltonian(&self, warp: &WarpProfile) -> f64 {
        let w = warp.eval_extended(self.rho);
        let mut h = self.p_rho * self.p_rho;
        if self.p_u != 0.0 {
            h += self.p_u * self.p_u / (w.phi * w.phi);
        }
        if self.p_v != 0.0 {
            h += self.p_v * self.p_v / (w.psi * w.psi);
        }
        0.5 * h
    }

    /// Positions reflected into the rho in [0, pi/2], u, v in [0, pi] chart.
    pub fn folded_position(&self) -> ReducedPoint {
        ReducedPoint {
            rho: fold_rho(self.rho),
            u: fold_angle(self.u),
            v: fold_angle(self.v),
        }
    }
}

/// Reflect an angle into [0, pi] (circle of circumference 2 pi folded by
/// the isometry u -> -u).
pub fn fold_angle(x: f64) -> f64 {
    let m = x.rem_euclid(TWO_PI);
    if m > PI {
        TWO_PI - m
    } else {
        m
    }
}

/// Reflect an unfolded rho into [0, pi/2].
fn fold_rho(rho: f64) -> f64 {
    let m = rho.rem_euclid(PI);
    if m > FRAC_PI_2 {
        PI - m
    } else {
        m
    }
}

/// Sign of d(fold_rho)/d(rho) at an unfolded rho.
fn fold_rho_sign(rho: f64) -> f64 {
    let m = rho.rem_euclid(PI);
    if m > FRAC_PI_2 {
        -1.0
    } else {
        1.0
    }
}

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

/// Which wall family, in the unfolded rho coordinate.
/// VWall: rho = 0 mod pi (the S^{n-k-1} factor collapses, v jumps by pi).
/// UWall: rho = pi/2 mod pi (the S^k factor collapses, u jumps by pi).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WallKind {
    VWall,
    UWall,
}

fn wall_kind(index: i64) -> WallKind {
    if index.rem_euclid(2) == 0 {
        WallKind::VWall
    } else {
        WallKind::UWall
    }
}

struct Flow<'a> {
    warp: &'a WarpProfile,
    p_u: f64,
    p_v: f64,
}

impl Flow<'_> {
    #[inline]
    fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let w = self.warp.eval_extended(y[0]);
        let mut du = 0.0;
        let mut dv = 0.0;
        let mut f = 0.0;
        if self.p_u != 0.0 {
            let phi2 = w.phi * w.phi;
            du = self.p_u / phi2;
            f += self.p_u * self.p_u * w.dphi / (phi2 * w.phi);
        }
        if self.p_v != 0.0 {
            let psi2 = w.psi * w.psi;
            dv = self.p_v / psi2;
            f += self.p_v * self.p_v * w.dpsi / (psi2 * w.psi);
        }
        [y[3], du, dv, f]
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step; returns (y_new, scaled error norm).
fn dp_step(flow: &Flow, y: &[f64; 4], h: f64, tol: f64) -> ([f64; 4], f64) {
    let mut k = [[0.0f64; 4]; 7];
    k[0] = flow.rhs(y);
    for stage in 0..6 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(stage + 1) {
            let a = DP_A[stage][j];
            if a != 0.0 {
                for d in 0..4 {
                    yi[d] += h * a * kj[d];
                }
            }
        }
        let _ = DP_C; // stage times are not needed: the flow is autonomous
        k[stage + 1] = flow.rhs(&yi);
    }
    let mut y_new = *y;
    for d in 0..4 {
        let mut acc = 0.0;
        for (j, kj) in k.iter().enumerate().take(6) {
            acc += DP_A[5][j] * kj[d];
        }
        y_new[d] += h * acc;
    }
    let mut err = 0.0f64;
    for d in 0..4 {
        let mut e = 0.0;
        for (j, kj) in k.iter().enumerate() {
            e += DP_E[j] * kj[d];
        }
        let scale = tol + tol * y[d].abs().max(y_new[d].abs());
        let r = h * e / scale;
        err += r * r;
    }
    (y_new, (err / 4.0).sqrt())
}

struct FlowRun {
    t: f64,
    y: [f64; 4],
    /// Crossings of v-walls (rho = 0 mod pi) and u-walls so far; each
    /// crossing shifts the collapsed angle by pi.
    v_jumps: i64,
    u_jumps: i64,
    hit_wall: bool,
    states: Vec<(f64, [f64; 4], i64, i64)>,
}

impl FlowRun {
    fn total_u(&self) -> f64 {
        self.y[1] + PI * self.u_jumps as f64
    }
    fn total_v(&self) -> f64 {
        self.y[2] + PI * self.v_jumps as f64
    }
}

struct FlowOpts {
    t_end: f64,
    tol: f64,
    /// Stop at the first crossing of this wall family instead of passing
    /// through (used by the pole-leg solver).
    stop_at: Option<WallKind>,
    record: bool,
}

/// Nearest wall index (multiple of pi/2) and distance to it.
fn nearest_wall(rho: f64) -> (i64, f64) {
    let idx = (rho / FRAC_PI_2).round() as i64;
    (idx, (rho - idx as f64 * FRAC_PI_2).abs())
}

fn integrate_flow(warp: &WarpProfile, y0: [f64; 4], p_u: f64, p_v: f64, opts: &FlowOpts) -> Result<FlowRun> {
    let flow = Flow { warp, p_u, p_v };
    let mut run = FlowRun {
        t: 0.0,
        y: y0,
        v_jumps: 0,
        u_jumps: 0,
        hit_wall: false,
        states: Vec::new(),
    };
    if opts.record {
        run.states.push((0.0, y0, 0, 0));
    }
    if opts.t_end <= 0.0 {
        return Ok(run);
    }

    // Last position safely away from any wall, for crossing bookkeeping.
    let mut armed_rho = {
        let (_, d) = nearest_wall(y0[0]);
        if d >= WALL_DEADBAND {
            Some(y0[0])
        } else {
            None
        }
    };

    let mut h = 0.01f64.min(opts.t_end);
    let mut steps = 0usize;
    const MAX_STEPS: usize = 2_000_000;

    while run.t < opts.t_end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NoConvergence(format!(
                "integration exceeded {MAX_STEPS} steps at t = {}",
                run.t
            )));
        }
        h = h.min(opts.t_end - run.t);
        let (y_new, err) = dp_step(&flow, &run.y, h, opts.tol);
        if !err.is_finite() || err > 1.0 {
            h *= if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 0.9)
            } else {
                0.2
            };
            if h < 1e-14 {
                return Err(Error::StepUnderflow { t: run.t, h });
            }
            continue;
        }

        // Wall bookkeeping between the last armed position and y_new.
        let (_, dist_new) = nearest_wall(y_new[0]);
        let mut crossings: Vec<WallKind> = Vec::new();
        if let Some(a) = armed_rho {
            if dist_new >= WALL_DEADBAND {
                let ia = (a / FRAC_PI_2).floor() as i64;
                let ib = (y_new[0] / FRAC_PI_2).floor() as i64;
                if ia != ib {
                    let (lo, hi, forward) = if ib > ia { (ia, ib, true) } else { (ib, ia, false) };
                    let mut walls: Vec<i64> = ((lo + 1)..=hi).collect();
                    if !forward {
                        walls.reverse();
                    }
                    for w in walls {
                        crossings.push(wall_kind(w));
                    }
                }
            }
        }

        // A crossing with nonzero momentum in the collapsing angle cannot
        // happen for a smooth warp (the centrifugal barrier repels the
        // trajectory); if the step claims one, shrink until either the
        // barrier resolves or we report the collision.
        let blocked = crossings.iter().any(|kind| match kind {
            WallKind::VWall => p_v.abs() > ZERO_MOMENTUM,
            WallKind::UWall => p_u.abs() > ZERO_MOMENTUM,
        });
        if blocked {
            h *= 0.5;
            if h < 1e-13 {
                let (idx, _) = nearest_wall(y_new[0]);
                let bad = crossings
                    .iter()
                    .find(|k| match k {
                        WallKind::VWall => p_v.abs() > ZERO_MOMENTUM,
                        WallKind::UWall => p_u.abs() > ZERO_MOMENTUM,
                    })
                    .unwrap();
                return Err(Error::SingularCollision {
                    rho: fold_rho(idx as f64 * FRAC_PI_2),
                    momentum: match bad {
                        WallKind::VWall => p_v,
                        WallKind::UWall => p_u,
                    },
                });
            }
            continue;
        }

        if let Some(stop) = opts.stop_at {
            if crossings.contains(&stop) {
                // Bisect the step down to the wall.
                let (t_hit, y_hit) = bisect_to_wall(&flow, &run.y, h, opts.tol, stop)?;
                run.t += t_hit;
                run.y = y_hit;
                run.hit_wall = true;
                if opts.record {
                    run.states.push((run.t, run.y, run.v_jumps, run.u_jumps));
                }
                return Ok(run);
            }
        }

        for kind in &crossings {
            match kind {
                WallKind::VWall => run.v_jumps += 1,
                WallKind::UWall => run.u_jumps += 1,
            }
        }
        if dist_new >= WALL_DEADBAND {
            armed_rho = Some(y_new[0]);
        }

        run.t += h;
        run.y = y_new;
        if opts.record {
            run.states.push((run.t, run.y, run.v_jumps, run.u_jumps));
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    Ok(run)
}

/// Find the first crossing of `wall` within one step of size at most `h`,
/// by bisection on the substep length.
fn bisect_to_wall(
    flow: &Flow,
    y: &[f64; 4],
    h: f64,
    tol: f64,
    wall: WallKind,
) -> Result<(f64, [f64; 4])> {
    let start_idx = (y[0] / FRAC_PI_2).floor() as i64;
    let crossed = |yy: &[f64; 4]| -> bool {
        let idx = (yy[0] / FRAC_PI_2).floor() as i64;
        if idx == start_idx {
            return false;
        }
        let (lo, hi) = if idx > start_idx { (start_idx, idx) } else { (idx, start_idx) };
        ((lo + 1)..=hi).any(|w| wall_kind(w) == wall)
    };
    let mut lo = 0.0f64;
    let mut hi = h;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (y_mid, _) = dp_step(flow, y, mid, tol);
        if crossed(&y_mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let (y_hit, _) = dp_step(flow, y, hi, tol);
    Ok((hi, y_hit))
}

// ---------------------------------------------------------------------------
// Public integration
// ---------------------------------------------------------------------------

/// Tolerance on H - 1/2 accepted at initialization.
const INIT_ENERGY_TOL: f64 = 1e-10;

/// Integrate the reduced geodesic flow to arc length `t_end`.
///
/// Returns the trajectory at the accepted step points, positions folded
/// into the rho in [0, pi/2], u, v in [0, 2 pi) chart with the momenta
/// adjusted consistently. p_u and p_v are carried exactly; crossings of a
/// singular orbit (allowed only with vanishing momentum in the collapsing
/// angle) shift the collapsed angle by pi.
pub fn integrate_geodesic(
    metric: &DiagonalMetric,
    init: &GeodesicState,
    t_end: f64,
    step_tol: f64,
) -> Result<Vec<GeodesicState>> {
    let h = init.hamiltonian(&metric.warp);
    if !h.is_finite() || (h - 0.5).abs() > INIT_ENERGY_TOL {
        return Err(Error::EnergyMismatch { h });
    }
    if t_end < 0.0 {
        return Err(Error::Param("t_end must be nonnegative".into()));
    }
    let run = integrate_flow(
        &metric.warp,
        [init.rho, init.u, init.v, init.p_rho],
        init.p_u,
        init.p_v,
        &FlowOpts { t_end, tol: step_tol, stop_at: None, record: true },
    )?;
    Ok(run
        .states
        .iter()
        .map(|(_, y, vj, uj)| GeodesicState {
            rho: fold_rho(y[0]),
            u: (y[1] + PI * *uj as f64).rem_euclid(TWO_PI),
            v: (y[2] + PI * *vj as f64).rem_euclid(TWO_PI),
            p_rho: y[3] * fold_rho_sign(y[0]),
            p_u: init.p_u,
            p_v: init.p_v,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Shooting solver
// ---------------------------------------------------------------------------

/// Options for `shoot_distance`.
#[derive(Debug, Clone)]
pub struct ShootOpts {
    /// Direction grid is `grid x grid` starts (theta x chi).
    pub grid: usize,
    /// Number of screened seeds refined by Levenberg-Marquardt.
    pub refine_top: usize,
    pub step_tol: f64,
    /// Arc-length cap for the search; the metrics in scope have diameter
    /// at most pi.
    pub t_max: f64,
    /// Polyline warm start (typically the grid-oracle path).
    pub warm_start: Option<Vec<ReducedPoint>>,
    /// Search broken minimizers through the singular orbits.
    pub pole_classes: bool,
    /// Record and return the realized path.
    pub with_path: bool,
}

impl Default for ShootOpts {
    fn default() -> Self {
        Self {
            grid: 16,
            refine_top: 12,
            step_tol: 1e-10,
            t_max: PI + 0.25,
            warm_start: None,
            pole_classes: true,
            with_path: false,
        }
    }
}

/// Internal candidate: a connecting path with its launch data.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    length: f64,
    residual: f64,
    launch: Launch,
}

#[derive(Debug, Clone, Copy)]
enum Launch {
    /// Direct geodesic from p with momenta angles (theta, chi).
    Direct { theta: f64, chi: f64 },
    /// Broken path through a wall; launch angles are kept for path assembly.
    ViaWall {
        wall: WallKind,
        alpha_p: f64,
        alpha_q: f64,
    },
    /// Radial wander through both singular orbits (closed form).
    ViaBothWalls,
}

/// Two-point distance by multi-start shooting over initial momenta,
/// minimized over the circle-target images and over broken paths through
/// the singular orbits.
pub fn shoot_distance(
    metric: &DiagonalMetric,
    p: &ReducedPoint,
    q: &ReducedPoint,
    opts: &ShootOpts,
) -> Result<DistanceResult> {
    let problem = GapProblem::new(metric, p, q)?;
    if problem.is_trivial() {
        return Ok(DistanceResult {
            value: 0.0,
            method: DistanceMethod::Shooting,
            error_estimate: 0.0,
            path: opts.with_path.then(|| vec![*p, *q]),
            warning: None,
        });
    }

    fn consider(best: &mut Option<Candidate>, c: Candidate) {
        if best.map_or(true, |b| c.length < b.length) {
            *best = Some(c);
        }
    }
    let mut best: Option<Candidate> = None;

    // Radial wander through both singular orbits: dive to one wall
    // (cost rho), cross to the other (exactly pi/2, both angles reset),
    // climb to the target. Always an admissible path.
    consider(
        &mut best,
        Candidate {
            length: PI - (problem.rho_p - problem.rho_q).abs(),
            residual: 0.0,
            launch: Launch::ViaBothWalls,
        },
    );

    for c in problem.direct_candidates(opts) {
        consider(&mut best, c);
    }
    if opts.pole_classes {
        let prune = best.map_or(PI + 0.3, |b| b.length + 0.05);
        for c in problem.wall_candidates(prune, opts) {
            consider(&mut best, c);
        }
    }

    let best = best.ok_or_else(|| {
        Error::NoConvergence("shooting found no connecting path".into())
    })?;
    debug_assert!(best.length >= (problem.rho_p - problem.rho_q).abs() - 1e-9);

    let path = if opts.with_path {
        Some(problem.assemble_path(&best, opts)?)
    } else {
        None
    };
    Ok(DistanceResult {
        value: best.length,
        method: DistanceMethod::Shooting,
        error_estimate: (2.0 * best.residual).max(1e-8),
        path,
        warning: None,
    })
}

/// The reduced two-point problem in gap form: shoot from (rho_p, 0, 0)
/// toward (rho_q, a, b) where a, b are the angle gaps.
struct GapProblem<'a> {
    metric: &'a DiagonalMetric,
    rho_p: f64,
    rho_q: f64,
    gap_u: f64,
    gap_v: f64,
    phi_p: f64,
    psi_p: f64,
    w_u: f64,
    w_v: f64,
    /// Residual dimensions in use: (u active, v active).
    mask: (bool, bool),
}

impl<'a> GapProblem<'a> {
    fn new(metric: &'a DiagonalMetric, p: &ReducedPoint, q: &ReducedPoint) -> Result<Self> {
        let p = ReducedPoint::new(p.rho, p.u, p.v)?;
        let q = ReducedPoint::new(q.rho, q.u, q.v)?;
        let mut gap_u = (p.u - q.u).abs();
        let mut gap_v = (p.v - q.v).abs();
        // A point on a singular orbit has no coordinate in the collapsed
        // angle, so the corresponding gap is zero.
        if p.on_v_wall() || q.on_v_wall() {
            gap_v = 0.0;
        }
        if p.on_u_wall() || q.on_u_wall() {
            gap_u = 0.0;
        }
        let wp = metric.warp.eval(p.rho)?;
        let wq = metric.warp.eval(q.rho)?;
        let mask = (!q.on_u_wall(), !q.on_v_wall());
        Ok(Self {
            metric,
            rho_p: p.rho,
            rho_q: q.rho,
            gap_u,
            gap_v,
            phi_p: wp.phi,
            psi_p: wp.psi,
            w_u: wq.phi.max(0.05),
            w_v: wq.psi.max(0.05),
            mask,
        })
    }

    fn is_trivial(&self) -> bool {
        (self.rho_p - self.rho_q).abs() <= 1e-15 && self.gap_u <= 1e-15 && self.gap_v <= 1e-15
    }

    fn momenta(&self, theta: f64, chi: f64) -> (f64, f64, f64) {
        let p_rho = theta.cos();
        let mut p_u = self.phi_p * theta.sin() * chi.cos();
        let mut p_v = self.psi_p * theta.sin() * chi.sin();
        if p_u.abs() < 1e-15 {
            p_u = 0.0;
        }
        if p_v.abs() < 1e-15 {
            p_v = 0.0;
        }
        (p_rho, p_u, p_v)
    }

    /// Residual of the endpoint against the target images nearest to it.
    fn residual_at(&self, total_u: f64, total_v: f64, rho: f64) -> [f64; 3] {
        let ru = if self.mask.0 {
            self.w_u * circle_gap_residual(total_u, self.gap_u)
        } else {
            0.0
        };
        let rv = if self.mask.1 {
            self.w_v * circle_gap_residual(total_v, self.gap_v)
        } else {
            0.0
        };
        [rho - self.rho_q, ru, rv]
    }

    fn endpoint_residual(&self, run: &FlowRun) -> [f64; 3] {
        self.residual_at(run.total_u(), run.total_v(), fold_rho(run.y[0]))
    }

    fn direct_candidates(&self, opts: &ShootOpts) -> Vec<Candidate> {
        let mut seeds: Vec<(f64, f64, f64, f64)> = Vec::new(); // (miss, theta, chi, t)

        // Screening over the direction grid. Offset interior values avoid
        // exact-zero momenta; the axis starts are added explicitly since
        // pure-radial and pure-orbit geodesics are common minimizers.
        let n = opts.grid.max(4);
        let mut thetas: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect();
        thetas.push(0.0);
        thetas.push(PI);
        let mut chis: Vec<f64> = (0..n)
            .map(|j| FRAC_PI_2 * (j as f64 + 0.5) / n as f64)
            .collect();
        chis.push(0.0);
        chis.push(FRAC_PI_2);

        let screen_tol = (opts.step_tol * 1e3).min(1e-6);
        for &theta in &thetas {
            for &chi in &chis {
                let (p_rho, p_u, p_v) = self.momenta(theta, chi);
                let run = match integrate_flow(
                    &self.metric.warp,
                    [self.rho_p, 0.0, 0.0, p_rho],
                    p_u,
                    p_v,
                    &FlowOpts { t_end: opts.t_max, tol: screen_tol, stop_at: None, record: true },
                ) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                let mut local_best: Option<(f64, f64)> = None;
                for (t, y, vj, uj) in &run.states {
                    let r = self.residual_at(
                        y[1] + PI * *uj as f64,
                        y[2] + PI * *vj as f64,
                        fold_rho(y[0]),
                    );
                    let miss = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                    if local_best.map_or(true, |(m, _)| miss < m) {
                        local_best = Some((miss, *t));
                    }
                }
                if let Some((miss, t)) = local_best {
                    if t > 1e-9 {
                        seeds.push((miss, theta, chi, t));
                    }
                }
            }
        }

        if let Some(path) = &opts.warm_start {
            if let Some(seed) = self.warm_seed(path) {
                seeds.push(seed);
            }
        }

        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut picked: Vec<(f64, f64, f64, f64)> = Vec::new();
        for s in seeds {
            if picked.len() >= opts.refine_top {
                break;
            }
            if picked
                .iter()
                .any(|p| (p.1 - s.1).abs() < 0.08 && (p.2 - s.2).abs() < 0.08 && (p.3 - s.3).abs() < 0.1)
            {
                continue;
            }
            picked.push(s);
        }

        picked
            .into_iter()
            .filter_map(|(_, theta, chi, t)| self.refine_direct(theta, chi, t, opts))
            .collect()
    }

    /// Seed from a polyline path: initial direction plus total length.
    fn warm_seed(&self, path: &[ReducedPoint]) -> Option<(f64, f64, f64, f64)> {
        if path.len() < 2 {
            return None;
        }
        let mut length = 0.0;
        for w in path.windows(2) {
            let mid = 0.5 * (w[0].rho + w[1].rho);
            let wv = self.metric.warp.eval_extended(mid);
            let (dr, du, dv) = (w[1].rho - w[0].rho, w[1].u - w[0].u, w[1].v - w[0].v);
            let (du, dv) = if w[0].on_v_wall() || w[1].on_v_wall() {
                (du, 0.0)
            } else if w[0].on_u_wall() || w[1].on_u_wall() {
                (0.0, dv)
            } else {
                (du, dv)
            };
            length +=
                (dr * dr + wv.phi * wv.phi * du * du + wv.psi * wv.psi * dv * dv).sqrt();
        }
        // Direction from the first segment, in gap coordinates.
        let a = &path[0];
        let b = &path[1];
        let wv = self.metric.warp.eval_extended(a.rho);
        let (dr, du, dv) = (b.rho - a.rho, (b.u - a.u).abs(), (b.v - a.v).abs());
        let speed =
            (dr * dr + wv.phi * wv.phi * du * du + wv.psi * wv.psi * dv * dv).sqrt();
        if speed <= 1e-12 {
            return None;
        }
        let p_rho = dr / speed;
        let p_u = wv.phi * wv.phi * du / speed;
        let p_v = wv.psi * wv.psi * dv / speed;
        // Invert the (theta, chi) parameterization.
        let su_phi = if self.phi_p > 1e-12 { p_u / self.phi_p } else { 0.0 };
        let sv_psi = if self.psi_p > 1e-12 { p_v / self.psi_p } else { 0.0 };
        let sin_theta = (su_phi * su_phi + sv_psi * sv_psi).sqrt().min(1.0);
        let theta = sin_theta.atan2(p_rho);
        let chi = if sin_theta > 1e-12 {
            sv_psi.atan2(su_phi)
        } else {
            0.0
        };
        Some((0.0, theta, chi, length))
    }

    /// Levenberg-Marquardt refinement of one direct-shooting seed.
    fn refine_direct(&self, theta: f64, chi: f64, t: f64, opts: &ShootOpts) -> Option<Candidate> {
        let source_on_wall = self.phi_p <= 1e-12 || self.psi_p <= 1e-12;
        let dims: usize = if source_on_wall { 2 } else { 3 };

        let eval = |x: &[f64; 3]| -> Option<[f64; 3]> {
            let (p_rho, p_u, p_v) = self.momenta(x[0], x[1]);
            if x[2] <= 0.0 || x[2] > opts.t_max + 1.0 {
                return None;
            }
            let run = integrate_flow(
                &self.metric.warp,
                [self.rho_p, 0.0, 0.0, p_rho],
                p_u,
                p_v,
                &FlowOpts { t_end: x[2], tol: opts.step_tol, stop_at: None, record: false },
            )
            .ok()?;
            Some(self.endpoint_residual(&run))
        };

        let mut x = [theta, chi, t];
        let mut r = eval(&x)?;
        let mut rn = norm3(&r);
        let mut lambda = 1e-3;
        for _ in 0..60 {
            if rn < 1e-11 {
                break;
            }
            // Jacobian by forward differences over the active parameters:
            // (theta, T) when the source sits on a wall, else (theta, chi, T).
            let hs = [1e-7, 1e-7, 1e-7];
            let mut jac = [[0.0f64; 3]; 3];
            let params: [usize; 3] = if dims == 2 { [0, 2, usize::MAX] } else { [0, 1, 2] };
            let mut ok = true;
            for (col, &pi) in params.iter().take(dims).enumerate() {
                let mut xp = x;
                xp[pi] += hs[pi];
                match eval(&xp) {
                    Some(rp) => {
                        for d in 0..3 {
                            jac[d][col] = (rp[d] - r[d]) / hs[pi];
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                return None;
            }
            // Solve (J^T J + lambda diag) delta = -J^T r for `dims` params.
            let mut improved = false;
            for _ in 0..8 {
                let delta = lm_solve(&jac, &r, dims, lambda)?;
                let mut xn = x;
                for (col, &pi) in params.iter().take(dims).enumerate() {
                    xn[pi] += delta[col];
                }
                xn[0] = xn[0].clamp(-0.5, PI + 0.5);
                if let Some(rnew) = eval(&xn) {
                    let rnn = norm3(&rnew);
                    if rnn < rn {
                        x = xn;
                        r = rnew;
                        rn = rnn;
                        lambda = (lambda * 0.35).max(1e-12);
                        improved = true;
                        break;
                    }
                }
                lambda *= 5.0;
                if lambda > 1e8 {
                    break;
                }
            }
            if !improved {
                break;
            }
        }
        if rn <= 1e-7 {
            Some(Candidate {
                length: x[2],
                residual: rn,
                launch: Launch::Direct { theta: x[0], chi: x[1] },
            })
        } else {
            None
        }
    }

    // -- broken paths through one singular orbit --------------------------

    /// Arrival map of v-frozen (resp. u-frozen) legs onto a wall: shoot 2D
    /// legs over a signed fan of launch angles and record (arc position,
    /// length, alpha) of the first wall hit.
    fn leg_arrivals(&self, from_rho: f64, wall: WallKind, opts: &ShootOpts) -> Vec<(f64, f64, f64)> {
        let n_fan = 160;
        let mut hits = Vec::new();
        for i in 0..=n_fan {
            let alpha = PI * i as f64 / n_fan as f64;
            if let Some((m, t)) = self.leg_shoot(from_rho, wall, alpha, opts) {
                hits.push((m, t, alpha));
                if m.abs() > 1e-12 {
                    // Mirror image: the leg with -alpha arrives at -m.
                    hits.push((-m, t, -alpha));
                }
            }
        }
        // A source sitting on the wall reaches it trivially.
        let on_wall = match wall {
            WallKind::VWall => from_rho <= ZERO_MOMENTUM,
            WallKind::UWall => from_rho >= FRAC_PI_2 - ZERO_MOMENTUM,
        };
        if on_wall {
            hits.push((0.0, 0.0, 0.0));
        }
        hits
    }

    /// Integrate one leg; returns (arrival angle along the wall, length).
    fn leg_shoot(&self, from_rho: f64, wall: WallKind, alpha: f64, opts: &ShootOpts) -> Option<(f64, f64)> {
        // Legs freeze the collapsing angle of `wall`: via the v-wall the
        // leg moves in (rho, u), via the u-wall in (rho, v).
        let w = self.metric.warp.eval_extended(from_rho);
        let (p_u, p_v, radius) = match wall {
            WallKind::VWall => {
                let mut pu = w.phi * alpha.sin();
                if pu.abs() < 1e-15 {
                    pu = 0.0;
                }
                (pu, 0.0, w.phi)
            }
            WallKind::UWall => {
                let mut pv = w.psi * alpha.sin();
                if pv.abs() < 1e-15 {
                    pv = 0.0;
                }
                (0.0, pv, w.psi)
            }
        };
        if radius <= 1e-12 && alpha.sin().abs() > 1e-12 {
            return None;
        }
        let run = integrate_flow(
            &self.metric.warp,
            [from_rho, 0.0, 0.0, alpha.cos()],
            p_u,
            p_v,
            &FlowOpts {
                t_end: opts.t_max,
                tol: (opts.step_tol * 1e2).min(1e-8),
                stop_at: Some(wall),
                record: false,
            },
        )
        .ok()?;
        if !run.hit_wall {
            return None;
        }
        let m = match wall {
            WallKind::VWall => run.total_u(),
            WallKind::UWall => run.total_v(),
        };
        Some((m, run.t))
    }

    /// Broken-path candidates through one singular orbit. Every evaluation
    /// is the exact length of an admissible path: two geodesic legs onto
    /// the wall plus a run along the wall circle (itself a closed
    /// geodesic) closing the residual arc, so the value never understates.
    fn wall_candidates(&self, prune_above: f64, opts: &ShootOpts) -> Vec<Candidate> {
        let mut out = Vec::new();
        for wall in [WallKind::VWall, WallKind::UWall] {
            let (gap, run_radius) = match wall {
                WallKind::VWall => (self.gap_u, self.metric.warp.eval_extended(0.0).phi),
                WallKind::UWall => (self.gap_v, self.metric.warp.eval_extended(FRAC_PI_2).psi),
            };
            let arr_p = self.leg_arrivals(self.rho_p, wall, opts);
            let arr_q = self.leg_arrivals(self.rho_q, wall, opts);
            if arr_p.is_empty() || arr_q.is_empty() {
                continue;
            }
            // Coarse composition: leg from p arrives at m_p, leg from q at
            // gap + m_q on the wall circle, the wall run closes the rest.
            let mut best: Option<(f64, f64, f64)> = None; // (total, ap, aq)
            for &(mp, tp, ap) in &arr_p {
                for &(mq, tq, aq) in &arr_q {
                    let total = tp + tq + run_radius * circle_distance(mp, gap + mq);
                    if best.map_or(true, |(bt, ..)| total < bt) {
                        best = Some((total, ap, aq));
                    }
                }
            }
            let Some((coarse, alpha_p, alpha_q)) = best else { continue };
            if coarse > prune_above {
                continue;
            }

            // Pattern search over the two launch angles.
            let eval = |ap: f64, aq: f64| -> Option<f64> {
                let (mp, tp) = self.leg_shoot(self.rho_p, wall, ap, opts)?;
                let (mq, tq) = self.leg_shoot(self.rho_q, wall, aq, opts)?;
                Some(tp + tq + run_radius * circle_distance(mp, gap + mq))
            };
            let mut cur = (alpha_p, alpha_q);
            let mut cur_val = match eval(cur.0, cur.1) {
                Some(v) => v,
                None => coarse,
            };
            let mut delta = PI / 160.0;
            for _ in 0..70 {
                let mut improved = false;
                for (du, dv) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                    let cand = (cur.0 + du * delta, cur.1 + dv * delta);
                    if let Some(v) = eval(cand.0, cand.1) {
                        if v < cur_val - 1e-14 {
                            cur = cand;
                            cur_val = v;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    delta *= 0.5;
                    if delta < 1e-8 {
                        break;
                    }
                }
            }
            out.push(Candidate {
                length: cur_val,
                residual: 1e-7,
                launch: Launch::ViaWall { wall, alpha_p: cur.0, alpha_q: cur.1 },
            });
        }
        out
    }

    /// Rebuild the realized polyline for the winning candidate.
    fn assemble_path(&self, cand: &Candidate, opts: &ShootOpts) -> Result<Vec<ReducedPoint>> {
        let fold_states = |run: &FlowRun| -> Vec<ReducedPoint> {
            run.states
                .iter()
                .map(|(_, y, vj, uj)| ReducedPoint {
                    rho: fold_rho(y[0]),
                    u: fold_angle(y[1] + PI * *uj as f64),
                    v: fold_angle(y[2] + PI * *vj as f64),
                })
                .collect()
        };
        match cand.launch {
            Launch::Direct { theta, chi } => {
                let (p_rho, p_u, p_v) = self.momenta(theta, chi);
                let run = integrate_flow(
                    &self.metric.warp,
                    [self.rho_p, 0.0, 0.0, p_rho],
                    p_u,
                    p_v,
                    &FlowOpts {
                        t_end: cand.length,
                        tol: opts.step_tol,
                        stop_at: None,
                        record: true,
                    },
                )?;
                Ok(fold_states(&run))
            }
            Launch::ViaWall { wall, alpha_p, alpha_q, .. } => {
                let leg = |rho0: f64, alpha: f64| -> Result<FlowRun> {
                    let w = self.metric.warp.eval_extended(rho0);
                    let (p_u, p_v) = match wall {
                        WallKind::VWall => (w.phi * alpha.sin(), 0.0),
                        WallKind::UWall => (0.0, w.psi * alpha.sin()),
                    };
                    integrate_flow(
                        &self.metric.warp,
                        [rho0, 0.0, 0.0, alpha.cos()],
                        p_u,
                        p_v,
                        &FlowOpts {
                            t_end: opts.t_max,
                            tol: opts.step_tol,
                            stop_at: Some(wall),
                            record: true,
                        },
                    )
                };
                let mut path = fold_states(&leg(self.rho_p, alpha_p)?);
                let mut back = fold_states(&leg(self.rho_q, alpha_q)?);
                back.reverse();
                path.extend(back);
                Ok(path)
            }
            Launch::ViaBothWalls => {
                // Radial dive, wall-to-wall radial crossing, radial climb.
                let (first, second) = if self.rho_p + (FRAC_PI_2 - self.rho_q)
                    <= (FRAC_PI_2 - self.rho_p) + self.rho_q
                {
                    (0.0, FRAC_PI_2)
                } else {
                    (FRAC_PI_2, 0.0)
                };
                Ok(vec![
                    ReducedPoint { rho: self.rho_p, u: 0.0, v: 0.0 },
                    ReducedPoint { rho: first, u: 0.0, v: 0.0 },
                    ReducedPoint { rho: second, u: self.gap_u, v: self.gap_v },
                    ReducedPoint { rho: self.rho_q, u: self.gap_u, v: self.gap_v },
                ])
            }
        }
    }
}

fn norm3(r: &[f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Solve (J^T J + lambda diag(J^T J) + eps I) delta = -J^T r restricted to
/// the leading `dims` columns.
fn lm_solve(jac: &[[f64; 3]; 3], r: &[f64; 3], dims: usize, lambda: f64) -> Option<[f64; 3]> {
    let mut a = [[0.0f64; 3]; 3];
    let mut g = [0.0f64; 3];
    for i in 0..dims {
        for j in 0..dims {
            let mut s = 0.0;
            for row in jac.iter() {
                s += row[i] * row[j];
            }
            a[i][j] = s;
        }
        let mut s = 0.0;
        for (row, rr) in jac.iter().zip(r.iter()) {
            s += row[i] * rr;
        }
        g[i] = s;
    }
    for (i, row) in a.iter_mut().enumerate().take(dims) {
        row[i] += lambda * row[i].max(1e-12) + 1e-14;
    }
    solve_small(&mut a, &mut g, dims)?;
    let mut delta = [0.0f64; 3];
    for i in 0..dims {
        delta[i] = -g[i];
    }
    Some(delta)
}

/// Gaussian elimination with partial pivoting on an n x n system, n <= 3.
fn solve_small(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * b[k];
        }
        b[col] = s / a[col][col];
    }
    Some(())
}

/// Signed circular residual of an accumulated angle against the gap class
/// {+-gap + 2 pi m}: the nearest representative wins.
fn circle_gap_residual(total: f64, gap: f64) -> f64 {
    let m = total.rem_euclid(TWO_PI);
    let mut best = f64::INFINITY;
    for cand in [gap, TWO_PI - gap, -gap, gap - TWO_PI] {
        let d = m - cand;
        let d = d - TWO_PI * (d / TWO_PI).round();
        if d.abs() < best.abs() {
            best = d;
        }
    }
    best
}

/// Distance between two positions on the 2 pi circle.
fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Closed-form distance on the round sphere in reduced coordinates
/// (spherical law of cosines). Used as an oracle for the round metric and
/// as an upper bound for every Cheeger metric.
pub fn round_closed_form(p: &ReducedPoint, q: &ReducedPoint) -> f64 {
    let gap_u = (p.u - q.u).abs();
    let gap_v = (p.v - q.v).abs();
    let c = p.rho.cos() * q.rho.cos() * gap_u.cos() + p.rho.sin() * q.rho.sin() * gap_v.cos();
    c.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{SphereShape, WarpFamily};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn round3() -> DiagonalMetric {
        DiagonalMetric::round(3, 1).unwrap()
    }

    #[test]
    fn radial_geodesic() {
        let m = round3();
        let init = GeodesicState { rho: 0.1, u: 0.0, v: 0.0, p_rho: 1.0, p_u: 0.0, p_v: 0.0 };
        let traj = integrate_geodesic(&m, &init, 0.5, 1e-10).unwrap();
        let end = traj.last().unwrap();
        assert_abs_diff_eq!(end.rho, 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(end.u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn equatorial_orbit_circle() {
        // At rho = pi/2 the psi-circle is a closed geodesic for the round
        // metric since psi'(pi/2) = 0.
        let m = round3();
        let init = GeodesicState {
            rho: FRAC_PI_2,
            u: 0.0,
            v: 0.0,
            p_rho: 0.0,
            p_u: 0.0,
            p_v: 1.0,
        };
        let traj = integrate_geodesic(&m, &init, 1.2, 1e-10).unwrap();
        let end = traj.last().unwrap();
        assert_abs_diff_eq!(end.rho, FRAC_PI_2, epsilon = 1e-9);
        assert_abs_diff_eq!(end.v, 1.2, epsilon = 1e-9);
        assert_abs_diff_eq!(end.u, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_mismatch_rejected() {
        let m = round3();
        let init = GeodesicState { rho: 0.3, u: 0.0, v: 0.0, p_rho: 2.0, p_u: 0.0, p_v: 0.0 };
        assert!(matches!(
            integrate_geodesic(&m, &init, 1.0, 1e-10),
            Err(Error::EnergyMismatch { .. })
        ));
    }

    #[test]
    fn conservation_cheeger_random_inits() {
        let m = DiagonalMetric::cheeger(3, 1, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let dir: (f64, f64, f64) = (
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let init = GeodesicState::unit_speed(&m, (FRAC_PI_4_CONST, 0.3, 0.4), dir).unwrap();
            let traj = integrate_geodesic(&m, &init, 3.0, 1e-10).unwrap();
            for s in &traj {
                assert!((s.p_u - init.p_u).abs() <= 1e-8);
                assert!((s.p_v - init.p_v).abs() <= 1e-8);
                assert!((s.hamiltonian(&m.warp) - 0.5).abs() <= 1e-8);
            }
        }
    }

    const FRAC_PI_4_CONST: f64 = std::f64::consts::FRAC_PI_4;

    #[test]
    fn time_reversal() {
        let m = DiagonalMetric::cheeger(3, 1, 2.0).unwrap();
        let init =
            GeodesicState::unit_speed(&m, (0.9, 0.2, 0.5), (-0.4, 0.8, 0.3)).unwrap();
        let traj = integrate_geodesic(&m, &init, 2.0, 1e-11).unwrap();
        let end = traj.last().unwrap();
        let back = GeodesicState {
            p_rho: -end.p_rho,
            p_u: -end.p_u,
            p_v: -end.p_v,
            ..*end
        };
        let traj2 = integrate_geodesic(&m, &back, 2.0, 1e-11).unwrap();
        let home = traj2.last().unwrap().folded_position();
        assert_abs_diff_eq!(home.rho, 0.9, epsilon = 1e-6);
        assert_abs_diff_eq!(home.u, 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(home.v, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn singular_collision_on_bad_warp() {
        // A custom warp whose psi does not vanish at 0 removes the
        // centrifugal barrier, so a trajectory with p_v != 0 reaches the
        // singular orbit and must be reported.
        let warp = WarpProfile::custom(
            Arc::new(|r: f64| r.cos() + 0.5),
            Arc::new(|_r: f64| 0.5),
            Some(Arc::new(|r: f64| -r.sin())),
            Some(Arc::new(|_r: f64| 0.0)),
        );
        let m = DiagonalMetric::new(SphereShape::new(3, 1).unwrap(), warp).unwrap();
        assert!(matches!(m.warp.family, WarpFamily::Custom { .. }));
        let w = m.warp.eval(0.4).unwrap();
        let p_v = 0.3 * w.psi * w.psi / w.psi; // modest angular momentum
        let h_rest: f64 = 1.0 - p_v * p_v / (w.psi * w.psi);
        let init = GeodesicState {
            rho: 0.4,
            u: 0.0,
            v: 0.0,
            p_rho: -h_rest.sqrt(),
            p_u: 0.0,
            p_v,
        };
        let err = integrate_geodesic(&m, &init, 2.0, 1e-10);
        assert!(
            matches!(err, Err(Error::SingularCollision { .. })),
            "expected collision, got {err:?}"
        );
    }

    #[test]
    fn shoot_pole_to_pole_round() {
        let m = round3();
        let p = ReducedPoint { rho: 0.0, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho: FRAC_PI_2, u: 0.7, v: 0.9 };
        let d = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
        assert_abs_diff_eq!(d.value, FRAC_PI_2, epsilon = 1e-8);
    }

    #[test]
    fn shoot_round_antipodal() {
        let m = round3();
        let p = ReducedPoint { rho: FRAC_PI_4_CONST, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho: FRAC_PI_4_CONST, u: PI, v: PI };
        let d = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
        assert_abs_diff_eq!(d.value, PI, epsilon = 1e-8);
    }

    #[test]
    fn shoot_matches_round_closed_form() {
        let m = round3();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..12 {
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
            let d = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
            assert!(
                (d.value - expect).abs() <= 1e-6,
                "p={p:?} q={q:?} got {} expected {expect}",
                d.value
            );
        }
    }

    #[test]
    fn shoot_symmetry() {
        let m = DiagonalMetric::cheeger(3, 1, 6.0).unwrap();
        let p = ReducedPoint { rho: 0.5, u: 0.4, v: 2.0 };
        let q = ReducedPoint { rho: 1.1, u: 2.4, v: 0.3 };
        let dpq = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
        let dqp = shoot_distance(&m, &q, &p, &ShootOpts::default()).unwrap();
        assert!((dpq.value - dqp.value).abs() <= 1e-8);
    }

    #[test]
    fn shoot_cheeger_antipodal_bounded() {
        let m = DiagonalMetric::cheeger(3, 1, 6.0).unwrap();
        let p = ReducedPoint { rho: FRAC_PI_4_CONST, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho: FRAC_PI_4_CONST, u: PI, v: PI };
        let d = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
        assert!(d.value <= FRAC_PI_2 + 1e-8, "got {}", d.value);
        assert!(d.value >= 0.5, "suspiciously small: {}", d.value);
    }

    #[test]
    fn shoot_through_pole_broken_minimizer() {
        // Pure v-gap at small rho: the minimizer dives to the singular
        // orbit where v resets for free, total 2 * rho.
        let m = DiagonalMetric::cheeger(3, 1, 2.0).unwrap();
        let rho = PI / 8.0;
        let p = ReducedPoint { rho, u: 0.0, v: 0.0 };
        let q = ReducedPoint { rho, u: 0.0, v: PI };
        let d = shoot_distance(&m, &p, &q, &ShootOpts::default()).unwrap();
        assert!(
            (d.value - 2.0 * rho).abs() <= 1e-4,
            "expected {} got {}",
            2.0 * rho,
            d.value
        );
    }
}
