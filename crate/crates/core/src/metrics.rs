//! Warp-function families for diagonal cohomogeneity-one metrics on the
//! sphere, their boundary smoothness conditions, and orbit diameters.
//!
//! A diagonal metric on S^n is determined by a pair of warp functions
//! (phi, psi) on [0, pi/2]: the metric is
//! `d rho^2 + phi(rho)^2 g_{S^k} + psi(rho)^2 g_{S^{n-k-1}}`.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

/// Sphere dimension n with the block split index k, fixing the orbit
/// structure S^k x S^{n-k-1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereShape {
    pub n: u32,
    pub k: u32,
}

impl SphereShape {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::Param(format!("n = {n} must be >= 3")));
        }
        if k < 1 || k > n - 2 {
            return Err(Error::Param(format!("k = {k} must satisfy 1 <= k <= n-2 = {}", n - 2)));
        }
        Ok(Self { n, k })
    }

    /// Ambient dimension n+1; points split as R^{k+1} + R^{n-k}.
    pub fn ambient_dim(&self) -> usize {
        self.n as usize + 1
    }

    pub fn x_block_dim(&self) -> usize {
        self.k as usize + 1
    }

    pub fn y_block_dim(&self) -> usize {
        (self.n - self.k) as usize
    }
}

pub type WarpFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Warp pair (phi, psi) on [0, pi/2].
///
/// `Round` is the unit round sphere (cos, sin). `Cheeger { s }` shrinks
/// the orbit directions; s = 0 recovers `Round`. `Custom` carries user
/// callables, with derivatives falling back to centered differences.
#[derive(Clone)]
pub enum WarpFamily {
    Round,
    Cheeger {
        s: f64,
    },
    Custom {
        phi: WarpFn,
        psi: WarpFn,
        dphi: Option<WarpFn>,
        dpsi: Option<WarpFn>,
    },
}

impl fmt::Debug for WarpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WarpFamily::Round => write!(f, "Round"),
            WarpFamily::Cheeger { s } => write!(f, "Cheeger {{ s: {s} }}"),
            WarpFamily::Custom { dphi, dpsi, .. } => f
                .debug_struct("Custom")
                .field("analytic_dphi", &dphi.is_some())
                .field("analytic_dpsi", &dpsi.is_some())
                .finish(),
        }
    }
}

/// Step for the centered-difference fallback on Custom warps.
const CUSTOM_DIFF_H: f64 = 1e-6;

/// Values of the warp pair and their first derivatives at one rho.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValues {
    pub phi: f64,
    pub psi: f64,
    pub dphi: f64,
    pub dpsi: f64,
}

#[derive(Debug, Clone)]
pub struct WarpProfile {
    pub family: WarpFamily,
}

impl WarpProfile {
    pub fn round() -> Self {
        Self { family: WarpFamily::Round }
    }

    pub fn cheeger(s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::Param(format!("Cheeger parameter s = {s} must be >= 0")));
        }
        Ok(Self { family: WarpFamily::Cheeger { s } })
    }

    pub fn custom(phi: WarpFn, psi: WarpFn, dphi: Option<WarpFn>, dpsi: Option<WarpFn>) -> Self {
        Self { family: WarpFamily::Custom { phi, psi, dphi, dpsi } }
    }

    /// Evaluate (phi, psi, phi', psi') at rho in [0, pi/2].
    pub fn eval(&self, rho: f64) -> Result<WarpValues> {
        if !(0.0..=FRAC_PI_2).contains(&rho) {
            return Err(Error::Domain { name: "rho", value: rho, min: 0.0, max: FRAC_PI_2 });
        }
        Ok(self.eval_extended(rho))
    }

    /// Evaluate on all of R via the even/odd extension about rho = 0 and
    /// rho = pi/2 (phi even about 0 and odd about pi/2, psi the reverse).
    /// Round and Cheeger formulas already have these symmetries; Custom
    /// warps are folded into [0, pi/2] explicitly.
    pub(crate) fn eval_extended(&self, rho: f64) -> WarpValues {
        match &self.family {
            WarpFamily::Round => WarpValues {
                phi: rho.cos(),
                psi: rho.sin(),
                dphi: -rho.sin(),
                dpsi: rho.cos(),
            },
            WarpFamily::Cheeger { s } => {
                let (c, sn) = (rho.cos(), rho.sin());
                let wc = 1.0 + s * c * c;
                let ws = 1.0 + s * sn * sn;
                WarpValues {
                    phi: c / wc.sqrt(),
                    psi: sn / ws.sqrt(),
                    dphi: -sn / (wc * wc.sqrt()),
                    dpsi: c / (ws * ws.sqrt()),
                }
            }
            WarpFamily::Custom { phi, psi, dphi, dpsi } => {
                let (base, phi_sign, psi_sign, d_sign) = fold_rho(rho);
                let pv = phi_sign * phi(base);
                let sv = psi_sign * psi(base);
                let dp = match dphi {
                    Some(f) => phi_sign * d_sign * f(base),
                    None => phi_sign * d_sign * centered_diff(phi, base),
                };
                let ds = match dpsi {
                    Some(f) => psi_sign * d_sign * f(base),
                    None => psi_sign * d_sign * centered_diff(psi, base),
                };
                WarpValues { phi: pv, psi: sv, dphi: dp, dpsi: ds }
            }
        }
    }
}

/// Fold rho into [0, pi/2] under reflections at 0 and pi/2, returning the
/// base point and the signs (phi, psi, derivative chain factor).
fn fold_rho(rho: f64) -> (f64, f64, f64, f64) {
    // Period 2*pi: phi and psi both repeat with period 2*pi under the
    // double reflection.
    let t = rho.rem_euclid(2.0 * PI);
    // Quadrant within one period, reflecting at pi/2, pi, 3pi/2.
    if t <= FRAC_PI_2 {
        (t, 1.0, 1.0, 1.0)
    } else if t <= PI {
        (PI - t, -1.0, 1.0, -1.0)
    } else if t <= 1.5 * PI {
        (t - PI, -1.0, -1.0, 1.0)
    } else {
        (2.0 * PI - t, 1.0, -1.0, -1.0)
    }
}

fn centered_diff(f: &WarpFn, x: f64) -> f64 {
    (f(x + CUSTOM_DIFF_H) - f(x - CUSTOM_DIFF_H)) / (2.0 * CUSTOM_DIFF_H)
}

/// Residuals of the six first-order boundary conditions for a smooth
/// closure of the doubly warped product over [0, pi/2].
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessReport {
    pub psi_at_0: f64,
    pub dpsi_at_0: f64,
    pub dphi_at_0: f64,
    pub phi_at_half_pi: f64,
    pub dphi_at_half_pi: f64,
    pub dpsi_at_half_pi: f64,
    pub tol: f64,
    pub pass: bool,
}

impl SmoothnessReport {
    pub fn max_residual(&self) -> f64 {
        self.psi_at_0
            .abs()
            .max(self.dpsi_at_0.abs())
            .max(self.dphi_at_0.abs())
            .max(self.phi_at_half_pi.abs())
            .max(self.dphi_at_half_pi.abs())
            .max(self.dpsi_at_half_pi.abs())
    }
}

/// Check psi(0)=0, psi'(0)=1, phi'(0)=0, phi(pi/2)=0, phi'(pi/2)=-1,
/// psi'(pi/2)=0 against `tol`. First-order conditions only; they catch
/// cone singularities, which is what the numerics are sensitive to.
pub fn smoothness_check(warp: &WarpProfile, tol: f64) -> Result<SmoothnessReport> {
    let at0 = warp.eval(0.0)?;
    let at1 = warp.eval(FRAC_PI_2)?;
    let report = SmoothnessReport {
        psi_at_0: at0.psi,
        dpsi_at_0: at0.dpsi - 1.0,
        dphi_at_0: at0.dphi,
        phi_at_half_pi: at1.phi,
        dphi_at_half_pi: at1.dphi + 1.0,
        dpsi_at_half_pi: at1.dpsi,
        tol,
        pass: false,
    };
    Ok(SmoothnessReport { pass: report.max_residual() <= tol, ..report })
}

/// Tolerance used when validating Round/Cheeger warps at construction.
const CONSTRUCTION_SMOOTHNESS_TOL: f64 = 1e-9;

/// A sphere shape together with a warp profile.
#[derive(Debug, Clone)]
pub struct DiagonalMetric {
    pub shape: SphereShape,
    pub warp: WarpProfile,
}

impl DiagonalMetric {
    pub fn new(shape: SphereShape, warp: WarpProfile) -> Result<Self> {
        match warp.family {
            WarpFamily::Round | WarpFamily::Cheeger { .. } => {
                let report = smoothness_check(&warp, CONSTRUCTION_SMOOTHNESS_TOL)?;
                if !report.pass {
                    return Err(Error::Param(format!(
                        "warp fails smoothness conditions (max residual {})",
                        report.max_residual()
                    )));
                }
            }
            WarpFamily::Custom { .. } => {}
        }
        Ok(Self { shape, warp })
    }

    pub fn round(n: u32, k: u32) -> Result<Self> {
        Self::new(SphereShape::new(n, k)?, WarpProfile::round())
    }

    pub fn cheeger(n: u32, k: u32, s: f64) -> Result<Self> {
        Self::new(SphereShape::new(n, k)?, WarpProfile::cheeger(s)?)
    }

    /// Cheeger parameter when this is a Cheeger (or Round = s=0) metric.
    pub fn cheeger_s(&self) -> Option<f64> {
        match self.warp.family {
            WarpFamily::Round => Some(0.0),
            WarpFamily::Cheeger { s } => Some(s),
            WarpFamily::Custom { .. } => None,
        }
    }
}

/// Intrinsic diameter pi * sqrt(phi^2 + psi^2) of the orbit
/// S^k(phi(rho)) x S^{n-k-1}(psi(rho)).
pub fn orbit_diameter(metric: &DiagonalMetric, rho: f64) -> Result<f64> {
    let w = metric.warp.eval(rho)?;
    Ok(PI * (w.phi * w.phi + w.psi * w.psi).sqrt())
}

/// Maximizer of the orbit diameter over rho, as (rho*, value).
///
/// Round and Cheeger have the closed form (pi/4, pi / sqrt(1 + s/2));
/// for s = 0 the function is constant and rho* = pi/4 is reported by
/// convention. Custom warps are maximized numerically by golden-section
/// over a scan bracket.
pub fn max_orbit_diameter(metric: &DiagonalMetric) -> Result<(f64, f64)> {
    match metric.warp.family {
        WarpFamily::Round => Ok((FRAC_PI_4, PI)),
        WarpFamily::Cheeger { s } => Ok((FRAC_PI_4, PI / (1.0 + 0.5 * s).sqrt())),
        WarpFamily::Custom { .. } => {
            let f = |rho: f64| -> f64 {
                let w = metric.warp.eval_extended(rho);
                PI * (w.phi * w.phi + w.psi * w.psi).sqrt()
            };
            // Coarse scan to bracket the global maximum, then golden section.
            let n = 2001;
            let mut best_i = 0;
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                let rho = FRAC_PI_2 * i as f64 / (n - 1) as f64;
                let v = f(rho);
                if !v.is_finite() {
                    return Err(Error::NoConvergence(format!(
                        "orbit diameter not finite at rho = {rho}"
                    )));
                }
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            let h = FRAC_PI_2 / (n - 1) as f64;
            let lo = (best_i as f64 - 1.0).max(0.0) * h;
            let hi = ((best_i + 1) as f64 * h).min(FRAC_PI_2);
            let rho_star = golden_max(&f, lo, hi, 1e-10);
            Ok((rho_star, f(rho_star)))
        }
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn round_warp_values() {
        let w = WarpProfile::round();
        let v = w.eval(PI / 3.0).unwrap();
        assert_abs_diff_eq!(v.phi, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.psi, 3f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn cheeger_warp_values() {
        let w = WarpProfile::cheeger(2.0).unwrap();
        let v = w.eval(0.0).unwrap();
        assert_abs_diff_eq!(v.phi, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.psi, 0.0, epsilon = 1e-15);

        let w = WarpProfile::cheeger(6.0).unwrap();
        let v = w.eval(FRAC_PI_4).unwrap();
        // 1 + 6 * 1/2 = 4, so phi = psi = (sqrt2/2) / 2.
        let expect = 0.5 * FRAC_PI_4.cos() * 2.0 / 2.0;
        assert_abs_diff_eq!(v.phi, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(v.psi, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(v.phi, 0.35355339059327373, epsilon = 1e-12);
    }

    #[test]
    fn warp_eval_domain_error() {
        let w = WarpProfile::round();
        assert!(w.eval(-0.1).is_err());
        assert!(w.eval(FRAC_PI_2 + 0.1).is_err());
        assert!(WarpProfile::cheeger(-1.0).is_err());
    }

    #[test]
    fn cheeger_derivatives_match_finite_differences() {
        // Analytic derivatives of the Cheeger warps vs centered differences,
        // O(h^2) with h = 1e-4 across a rho grid.
        let h = 1e-4;
        for &s in &[0.0, 0.5, 2.0, 6.0, 50.0] {
            let w = WarpProfile::cheeger(s).unwrap();
            for i in 0..=200 {
                let rho = FRAC_PI_2 * i as f64 / 200.0;
                let v = w.eval_extended(rho);
                let vp = w.eval_extended(rho + h);
                let vm = w.eval_extended(rho - h);
                let fd_phi = (vp.phi - vm.phi) / (2.0 * h);
                let fd_psi = (vp.psi - vm.psi) / (2.0 * h);
                assert!((v.dphi - fd_phi).abs() <= 1e-6, "s={s} rho={rho}");
                assert!((v.dpsi - fd_psi).abs() <= 1e-6, "s={s} rho={rho}");
            }
        }
    }

    #[test]
    fn smoothness_round_and_cheeger_pass() {
        for warp in [WarpProfile::round(), WarpProfile::cheeger(6.0).unwrap()] {
            let report = smoothness_check(&warp, 1e-12).unwrap();
            assert!(report.pass, "residual {}", report.max_residual());
        }
    }

    #[test]
    fn smoothness_bad_custom_fails() {
        let warp = WarpProfile::custom(
            Arc::new(|r: f64| r.cos()),
            Arc::new(|r: f64| 2.0 * r.sin()),
            None,
            None,
        );
        let report = smoothness_check(&warp, 1e-6).unwrap();
        assert!(!report.pass);
        assert_abs_diff_eq!(report.dpsi_at_0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn orbit_diameter_values() {
        let m = DiagonalMetric::cheeger(3, 1, 6.0).unwrap();
        assert_abs_diff_eq!(orbit_diameter(&m, FRAC_PI_4).unwrap(), FRAC_PI_2, epsilon = 1e-12);

        let round = DiagonalMetric::round(3, 1).unwrap();
        assert_abs_diff_eq!(orbit_diameter(&round, FRAC_PI_4).unwrap(), PI, epsilon = 1e-12);

        let m3 = DiagonalMetric::cheeger(4, 2, 3.0).unwrap();
        assert_abs_diff_eq!(orbit_diameter(&m3, 0.0).unwrap(), FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn max_orbit_diameter_closed_form() {
        for &(s, val) in &[(6.0, FRAC_PI_2), (0.0, PI), (198.0, PI / 10.0)] {
            let m = DiagonalMetric::cheeger(3, 1, s).unwrap();
            let (rho, v) = max_orbit_diameter(&m).unwrap();
            assert_abs_diff_eq!(rho, FRAC_PI_4, epsilon = 1e-12);
            assert_abs_diff_eq!(v, val, epsilon = 1e-12);
        }
    }

    #[test]
    fn max_orbit_diameter_numeric_custom() {
        // A Cheeger warp passed in as a Custom profile exercises the
        // numeric maximizer; it must land on rho* = pi/4.
        let s = 6.0;
        let phi = move |r: f64| r.cos() / (1.0 + s * r.cos() * r.cos()).sqrt();
        let psi = move |r: f64| r.sin() / (1.0 + s * r.sin() * r.sin()).sqrt();
        let m = DiagonalMetric::new(
            SphereShape::new(3, 1).unwrap(),
            WarpProfile::custom(Arc::new(phi), Arc::new(psi), None, None),
        )
        .unwrap();
        let (rho, v) = max_orbit_diameter(&m).unwrap();
        assert!((rho - FRAC_PI_4).abs() <= 1e-6, "rho* = {rho}");
        assert_abs_diff_eq!(v, FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn orbit_diameter_bounded_by_max_on_grid() {
        for &s in &[0.5, 1.0, 6.0, 20.0] {
            let m = DiagonalMetric::cheeger(3, 1, s).unwrap();
            let bound = PI / (1.0 + 0.5 * s).sqrt();
            for i in 0..1000 {
                let rho = FRAC_PI_2 * i as f64 / 999.0;
                let d = orbit_diameter(&m, rho).unwrap();
                assert!(d <= bound + 1e-12, "s={s} rho={rho} d={d} bound={bound}");
            }
        }
    }

    proptest! {
        #[test]
        fn warps_nonincreasing_in_s(rho in 0.0..FRAC_PI_2, s in 0.0..60.0f64, ds in 0.0..40.0f64) {
            let a = WarpProfile::cheeger(s).unwrap().eval(rho).unwrap();
            let b = WarpProfile::cheeger(s + ds).unwrap().eval(rho).unwrap();
            prop_assert!(b.phi <= a.phi + 1e-15);
            prop_assert!(b.psi <= a.psi + 1e-15);
        }

        #[test]
        fn warp_norm_at_most_one(rho in 0.0..FRAC_PI_2, s in 0.0..60.0f64) {
            let v = WarpProfile::cheeger(s).unwrap().eval(rho).unwrap();
            let norm2 = v.phi * v.phi + v.psi * v.psi;
            prop_assert!(norm2 <= 1.0 + 1e-15);
            if s > 1e-3 && rho > 1e-3 && rho < FRAC_PI_2 - 1e-3 {
                prop_assert!(norm2 < 1.0);
            }
        }
    }
}
