//! The tract `T = h^{-1}(S)` of `h(z) = a z + i b sin z` and its image
//! `W = exp(T)`, including the parametrization of the boundary of `W`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::cauchy::QuadratureConfig;
use crate::error::TractError;
use crate::C64;

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_DAMPING: f64 = 0.5;
const CONTINUATION_STEPS: usize = 64;

/// Half-strip `{Re z > alpha, |Im z| < beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl StripSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, TractError> {
        if !(beta > 0.0) || !beta.is_finite() || !alpha.is_finite() {
            return Err(TractError::BadStrip(beta));
        }
        Ok(StripSpec { alpha, beta })
    }

    /// Strict membership.
    pub fn contains(&self, z: C64) -> bool {
        z.re > self.alpha && z.im.abs() < self.beta
    }
}

/// Coefficients of `h` and the two strips defining the tract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TractSpec {
    pub linear_coeff: f64,
    pub wiggle_coeff: f64,
    pub domain_strip: StripSpec,
    pub target_strip: StripSpec,
}

impl Default for TractSpec {
    fn default() -> Self {
        TractSpec {
            linear_coeff: 5.0 * PI,
            wiggle_coeff: 2.0 * PI,
            domain_strip: StripSpec { alpha: -1.0, beta: PI / 3.0 },
            target_strip: StripSpec { alpha: 0.0, beta: PI },
        }
    }
}

/// Which arm of the boundary: `Im h = +beta` (upper, `t > 0`) or `-beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

impl TractSpec {
    pub fn new(
        linear_coeff: f64,
        wiggle_coeff: f64,
        domain_strip: StripSpec,
        target_strip: StripSpec,
    ) -> Result<Self, TractError> {
        let spec = TractSpec { linear_coeff, wiggle_coeff, domain_strip, target_strip };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TractError> {
        StripSpec::new(self.domain_strip.alpha, self.domain_strip.beta)?;
        StripSpec::new(self.target_strip.alpha, self.target_strip.beta)?;
        let margin = self.univalence_margin();
        if !(margin > 0.0) || self.wiggle_coeff < 0.0 {
            return Err(TractError::NotUnivalent { margin });
        }
        Ok(())
    }

    /// `a - b sinh(beta)`: lower bound for `Re h'` on the domain strip.
    pub fn univalence_margin(&self) -> f64 {
        self.linear_coeff - self.wiggle_coeff * self.domain_strip.beta.sinh()
    }

    pub fn h(&self, z: C64) -> C64 {
        self.linear_coeff * z + C64::i() * self.wiggle_coeff * z.sin()
    }

    pub fn h_prime(&self, z: C64) -> C64 {
        self.linear_coeff + C64::i() * self.wiggle_coeff * z.cos()
    }

    /// `h(base + eta) - h(base)` without cancellation for small `eta`.
    pub fn h_delta(&self, base: C64, eta: C64) -> C64 {
        let half = eta * 0.5;
        self.linear_coeff * eta
            + C64::i() * (2.0 * self.wiggle_coeff) * (base + half).cos() * half.sin()
    }

    /// The unique preimage of `w` in the domain strip.
    pub fn invert_h(&self, w: C64, seed: Option<C64>) -> Result<C64, TractError> {
        let z0 = seed.unwrap_or(w / self.linear_coeff);
        if let Some(z) = self.newton(w, z0) {
            if self.domain_strip.contains(z) {
                return Ok(z);
            }
        }
        // continuation along the segment from h(start) to w
        let start = if self.domain_strip.contains(z0) { z0 } else { C64::new(0.0, 0.0) };
        let w_start = self.h(start);
        let mut z = start;
        for j in 1..=CONTINUATION_STEPS {
            let wj = w_start + (w - w_start) * (j as f64 / CONTINUATION_STEPS as f64);
            match self.newton(wj, z) {
                Some(zj) => z = zj,
                None => {
                    return Err(TractError::OutsideImage {
                        w,
                        residual: (self.h(z) - wj).norm(),
                    })
                }
            }
        }
        if self.domain_strip.contains(z) {
            Ok(z)
        } else {
            Err(TractError::OutsideImage { w, residual: (self.h(z) - w).norm() })
        }
    }

    fn newton(&self, w: C64, z0: C64) -> Option<C64> {
        let tol = 1e-13 * w.norm().max(1.0);
        let mut z = z0;
        let mut r = self.h(z) - w;
        for _ in 0..NEWTON_MAX_ITER {
            if !r.norm().is_finite() {
                return None;
            }
            if r.norm() <= tol {
                return Some(self.polish(w, z, r));
            }
            let step = r / self.h_prime(z);
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let zn = z - step * lam;
                let rn = self.h(zn) - w;
                if rn.norm() < r.norm() {
                    z = zn;
                    r = rn;
                    accepted = true;
                    break;
                }
                lam *= NEWTON_DAMPING;
            }
            if !accepted {
                // stalled at rounding level
                return if r.norm() <= 10.0 * tol { Some(z) } else { None };
            }
        }
        if r.norm() <= 10.0 * tol {
            Some(z)
        } else {
            None
        }
    }

    /// A few undamped steps past the tolerance, keeping the best residual.
    fn polish(&self, w: C64, z: C64, r: C64) -> C64 {
        let (mut z, mut r) = (z, r);
        for _ in 0..3 {
            let zn = z - r / self.h_prime(z);
            let rn = self.h(zn) - w;
            if !(rn.norm() < r.norm()) {
                break;
            }
            z = zn;
            r = rn;
        }
        z
    }

    /// `z_log` in the domain strip with `h(z_log)` in the target strip (strict).
    pub fn tract_contains(&self, z_log: C64) -> bool {
        self.domain_strip.contains(z_log) && self.target_strip.contains(self.h(z_log))
    }

    /// Membership in `W = exp(T)` using the principal logarithm.
    pub fn w_contains(&self, z: C64) -> bool {
        if z.norm() <= self.domain_strip.alpha.exp() || z.arg().abs() >= self.domain_strip.beta {
            return false;
        }
        self.tract_contains(z.ln())
    }

    /// Preimage of the corner `alpha_t +- i beta_t` of the target strip.
    pub fn corner(&self, side: Side) -> Result<C64, TractError> {
        let t = self.target_strip;
        self.invert_h(C64::new(t.alpha, side.sign() * t.beta), None)
    }

    /// Radius `|exp(corner)|` at which the radial arm on `side` starts.
    pub fn corner_radius(&self, side: Side) -> Result<f64, TractError> {
        Ok(self.corner(side)?.re.exp())
    }

    fn phi_equation(&self, x: f64, phi: f64, c: f64) -> (f64, f64) {
        let (a, b) = (self.linear_coeff, self.wiggle_coeff);
        let val = a * phi + b * x.sin() * phi.cosh() - c;
        let der = a + b * x.sin() * phi.sinh();
        (val, der)
    }

    /// Angle `phi(t)` of the boundary arm at radius `|t|`: the root of
    /// `a phi + b sin(log|t|) cosh(phi) = +-beta_t` in `[-beta_d, beta_d]`,
    /// upper arm for `t > 0`.
    pub fn boundary_phi(&self, t: f64) -> Result<f64, TractError> {
        let side = if t > 0.0 { Side::Upper } else { Side::Lower };
        let corner = self.corner_radius(side)?;
        self.boundary_phi_unchecked(t, corner)
    }

    fn boundary_phi_unchecked(&self, t: f64, corner: f64) -> Result<f64, TractError> {
        if !(t.abs() >= corner * (1.0 - 1e-12)) {
            return Err(TractError::RadiusTooSmall { radius: t.abs(), corner });
        }
        let c = t.signum() * self.target_strip.beta;
        let x = t.abs().ln();
        let bd = self.domain_strip.beta;
        let (mut lo, mut hi) = (-bd, bd);
        let (flo, _) = self.phi_equation(x, lo, c);
        let (fhi, _) = self.phi_equation(x, hi, c);
        if flo > 0.0 || fhi < 0.0 {
            return Err(TractError::RadiusTooSmall { radius: t.abs(), corner });
        }
        // bisection to a small bracket, then safeguarded Newton
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if self.phi_equation(x, mid, c).0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut phi = 0.5 * (lo + hi);
        for _ in 0..8 {
            let (v, d) = self.phi_equation(x, phi, c);
            let next = phi - v / d;
            if !(next > lo - 1e-9 && next < hi + 1e-9) {
                break;
            }
            if next == phi {
                break;
            }
            phi = next;
        }
        Ok(phi)
    }

    /// Implicit derivative of [`TractSpec::boundary_phi`].
    pub fn boundary_phi_prime(&self, t: f64) -> Result<f64, TractError> {
        let phi = self.boundary_phi(t)?;
        Ok(self.phi_prime_at(t, phi))
    }

    fn phi_prime_at(&self, t: f64, phi: f64) -> f64 {
        let (a, b) = (self.linear_coeff, self.wiggle_coeff);
        let x = t.abs().ln();
        -(b * x.cos() * phi.cosh() / t) / (a + b * x.sin() * phi.sinh())
    }

    /// Residual of a boundary point: distance of `h(Log p)` from the nearest
    /// edge of the target strip, measured in the relevant coordinate.
    pub fn boundary_residual(&self, p: C64) -> f64 {
        let w = self.h(p.ln());
        let t = self.target_strip;
        let upper = (w.im - t.beta).abs();
        let lower = (w.im + t.beta).abs();
        let left = (w.re - t.alpha).abs();
        upper.min(lower).min(left)
    }

    /// Number of times the circle `|z| = r` crosses the boundary of `W`,
    /// counted on an angular grid of `n` points.
    pub fn circle_crossings(&self, r: f64, n: usize) -> usize {
        let bd = self.domain_strip.beta;
        let mut prev = None;
        let mut count = 0;
        for j in 0..=n {
            let th = -bd + 2.0 * bd * j as f64 / n as f64;
            let inside = self.w_contains(C64::from_polar(r, th));
            if let Some(p) = prev {
                if p != inside {
                    count += 1;
                }
            }
            prev = Some(inside);
        }
        count
    }
}

/// A boundary point of `W` with its parameter and derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSample {
    pub t: f64,
    pub point: C64,
    pub tangent: C64,
    /// `Re g(point)`, large negative on the arms.
    pub weight_hint: f64,
}

/// Clockwise parametrization of the boundary of `W`: the lower arm for
/// `t <= -r_lo` (traversed inward), the tip `exp(h^{-1}(alpha_t + i y))`
/// for `t` in `[-r_lo, r_up]` (bottom to top), and the upper arm for
/// `t >= r_up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCurve {
    pub spec: TractSpec,
    pub r_lo: f64,
    pub r_up: f64,
}

impl BoundaryCurve {
    pub fn new(spec: TractSpec) -> Result<Self, TractError> {
        spec.validate()?;
        Ok(BoundaryCurve {
            spec,
            r_lo: spec.corner_radius(Side::Lower)?,
            r_up: spec.corner_radius(Side::Upper)?,
        })
    }

    pub fn breakpoints(&self) -> [f64; 2] {
        [-self.r_lo, self.r_up]
    }

    fn tip_y(&self, t: f64) -> (f64, f64) {
        let beta = self.spec.target_strip.beta;
        let span = self.r_lo + self.r_up;
        (-beta + 2.0 * beta * (t + self.r_lo) / span, 2.0 * beta / span)
    }

    fn tip_log(&self, t: f64) -> Result<C64, TractError> {
        let (y, _) = self.tip_y(t);
        let w = C64::new(self.spec.target_strip.alpha, y);
        self.spec.invert_h(w, None)
    }

    fn arm_phi(&self, t: f64) -> Result<f64, TractError> {
        let corner = if t > 0.0 { self.r_up } else { self.r_lo };
        self.spec.boundary_phi_unchecked(t, corner)
    }

    /// Point and derivative at parameter `t`.
    pub fn eval(&self, t: f64) -> Result<(C64, C64), TractError> {
        if t <= -self.r_lo || t >= self.r_up {
            let phi = self.arm_phi(t)?;
            let dphi = self.spec.phi_prime_at(t, phi);
            let e = C64::from_polar(1.0, phi);
            let point = t.abs() * e;
            let tangent = t.signum() * e * C64::new(1.0, t * dphi);
            Ok((point, tangent))
        } else {
            let u = self.tip_log(t)?;
            let (_, dy) = self.tip_y(t);
            let zeta = u.exp();
            let tangent = zeta * C64::i() / self.spec.h_prime(u) * dy;
            Ok((zeta, tangent))
        }
    }

    pub fn point(&self, t: f64) -> Result<C64, TractError> {
        Ok(self.eval(t)?.0)
    }

    pub fn sample(&self, t: f64) -> Result<ContourSample, TractError> {
        let (point, tangent) = self.eval(t)?;
        let g_log = self.spec.h(point.ln());
        Ok(ContourSample {
            t,
            point,
            tangent,
            weight_hint: g_log.exp().re,
        })
    }
}

/// Samples of the truncated boundary `|t| <= config.t_truncate` with
/// consecutive points closer than `config.max_step`.
pub fn boundary_contour(
    spec: &TractSpec,
    config: &QuadratureConfig,
) -> Result<Vec<ContourSample>, TractError> {
    let curve = BoundaryCurve::new(*spec)?;
    let tmax = config.t_truncate.max(curve.r_lo.max(curve.r_up) + config.max_step);
    sample_curve(&curve, -tmax, tmax, config.max_step)
}

/// Samples on `[t0, t1]`, breakpoints included, with chord below `step`.
pub fn sample_curve(
    curve: &BoundaryCurve,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Vec<ContourSample>, TractError> {
    if !(step > 0.0) || !(t1 > t0) {
        return Err(TractError::Contour(format!("bad sampling range [{t0}, {t1}] step {step}")));
    }
    let mut knots = vec![t0];
    for b in curve.breakpoints() {
        if b > t0 && b < t1 {
            knots.push(b);
        }
    }
    knots.push(t1);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        // speed bound from a few probes; the tip speed varies slowly
        let mut speed: f64 = 0.0;
        for j in 0..=16 {
            let t = a + (b - a) * j as f64 / 16.0;
            speed = speed.max(curve.eval(t)?.1.norm());
        }
        let n = (((b - a) * speed * 1.25) / step).ceil().max(1.0) as usize;
        for j in 0..n {
            out.push(curve.sample(a + (b - a) * j as f64 / n as f64)?);
        }
    }
    out.push(curve.sample(t1)?);
    for w in out.windows(2) {
        if (w[1].point - w[0].point).norm() >= step {
            return Err(TractError::Contour(format!(
                "samples at t = {} and {} are {} apart",
                w[0].t,
                w[1].t,
                (w[1].point - w[0].point).norm()
            )));
        }
    }
    Ok(out)
}

/// One row of the boundary dump.
pub fn dump_boundary(
    spec: &TractSpec,
    tmax: f64,
    step: f64,
) -> Result<Vec<ContourSample>, TractError> {
    let curve = BoundaryCurve::new(*spec)?;
    if !(step > 0.0) || !(tmax > curve.r_lo.max(curve.r_up)) {
        return Err(TractError::Contour(format!("need step > 0 and tmax above the corner radii, got {tmax}")));
    }
    let n = (2.0 * tmax / step).ceil() as usize;
    (0..=n)
        .map(|j| curve.sample(-tmax + 2.0 * tmax * j as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn h_examples() {
        let s = TractSpec::default();
        assert_eq!(s.h(c(0., 0.)), c(0., 0.));
        let v = s.h(c(PI / 2.0, 0.0));
        assert!((v - c(5.0 * PI * PI / 2.0, 2.0 * PI)).norm() < 1e-12);
        let v = s.h(c(0.0, PI / 3.0));
        assert!((v - c(-2.0 * PI * (PI / 3.0).sinh(), 5.0 * PI * PI / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn imaginary_part_formula() {
        let s = TractSpec::default();
        for &(x, y) in &[(0.3, 0.2), (-0.7, -0.9), (4.0, 0.5)] {
            let im = s.h(c(x, y)).im;
            let expected = 5.0 * PI * y + 2.0 * PI * f64::sin(x) * f64::cosh(y);
            assert!((im - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        let s = TractSpec::default();
        assert_eq!(s.invert_h(c(0., 0.), None).unwrap(), c(0., 0.));
        let z = c(1.0, 0.2);
        let back = s.invert_h(s.h(z), None).unwrap();
        assert!((back - z).norm() < 1e-12);
        assert!(s.invert_h(c(-50.0, 0.0), None).is_err());
    }

    #[test]
    fn corner_radii() {
        let s = TractSpec::default();
        let lo = s.corner_radius(Side::Lower).unwrap();
        let up = s.corner_radius(Side::Upper).unwrap();
        assert!((lo - 0.9333).abs() < 1e-3, "{lo}");
        assert!((up - 1.0714).abs() < 1e-3, "{up}");
    }

    #[test]
    fn phi_examples() {
        let s = TractSpec::default();
        // sin(log t) = 1 on the upper arm: 5 phi + 2 cosh phi = 1
        let t = (PI / 2.0).exp();
        let phi = s.boundary_phi(t).unwrap();
        assert!(phi <= -0.2);
        assert!((5.0 * phi + 2.0 * phi.cosh() - 1.0).abs() < 1e-13);
        assert!(s.boundary_phi_prime(t).unwrap().abs() < 1e-15);
        // sin(log t) = sqrt(3)/2: scalar bisection oracle
        let t = (PI / 3.0).exp();
        let phi = s.boundary_phi(t).unwrap();
        let f = |p: f64| 5.0 * p + 3f64.sqrt() * p.cosh() - 1.0;
        let (mut lo, mut hi) = (-1.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((phi - lo).abs() < 1e-13);
        assert!(phi < 0.0 && phi.abs() < 0.2);
        let phi2 = s.boundary_phi((2.0 * PI / 3.0).exp()).unwrap();
        assert!((phi - phi2).abs() < 1e-13);
        // lower arm with sin = -1 sits above 1/5
        let t = -(3.0 * PI / 2.0).exp();
        assert!(s.boundary_phi(t).unwrap() >= 0.2);
    }

    #[test]
    fn phi_rejects_small_radius() {
        let s = TractSpec::default();
        assert!(matches!(s.boundary_phi(0.5), Err(TractError::RadiusTooSmall { .. })));
    }

    #[test]
    fn phi_prime_matches_finite_differences() {
        let s = TractSpec::default();
        for &t in &[1.3, 2.0, 7.0, -3.3, -50.0] {
            let h = 1e-5;
            let fd = (s.boundary_phi(t + h).unwrap() - s.boundary_phi(t - h).unwrap()) / (2.0 * h);
            let d = s.boundary_phi_prime(t).unwrap();
            assert!((d - fd).abs() < 1e-6, "t={t}: {d} vs {fd}");
            assert!(d.abs() <= 2.0 / t.abs());
        }
    }

    #[test]
    fn membership_examples() {
        let s = TractSpec::default();
        assert!(!s.tract_contains(c(1.0, 0.0)));
        // the real axis leaves the tract where sin x = 1/2, i.e. at pi/6
        assert!(!s.tract_contains(c(PI / 3.0, 0.0)));
        assert!((s.h(c(PI / 6.0, 0.0)).im - PI).abs() < 1e-14);
        assert!(s.tract_contains(c(PI / 6.0 - 1e-9, 0.0)));
        assert!(!s.tract_contains(c(PI / 6.0 + 1e-9, 0.0)));
        assert!(!s.tract_contains(c(0.0, 0.0)));
        assert!(s.tract_contains(c(0.1, 0.0)));
        assert!(s.w_contains(c(0.1f64.exp(), 0.0)));
        assert!(!s.w_contains(c(-1.0, 0.0)));
    }

    #[test]
    fn curve_is_continuous_at_breakpoints() {
        let curve = BoundaryCurve::new(TractSpec::default()).unwrap();
        for b in curve.breakpoints() {
            let left = curve.point(b - 1e-12).unwrap();
            let right = curve.point(b + 1e-12).unwrap();
            assert!((left - right).norm() < 1e-9);
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let curve = BoundaryCurve::new(TractSpec::default()).unwrap();
        for &t in &[-2.0, -0.5, 0.0, 0.7, 1.5, 3.0] {
            let h = 1e-6;
            let fd = (curve.point(t + h).unwrap() - curve.point(t - h).unwrap()) / (2.0 * h);
            let (_, d) = curve.eval(t).unwrap();
            assert!((d - fd).norm() < 1e-6 * d.norm().max(1.0), "t={t}");
        }
    }

    #[test]
    fn contour_samples_on_boundary() {
        let spec = TractSpec::default();
        let cfg = QuadratureConfig::default();
        let samples = boundary_contour(&spec, &cfg).unwrap();
        for s in &samples {
            assert!(spec.boundary_residual(s.point) < 1e-10, "{:?}", s);
            assert!(s.point.ln().im.abs() <= 0.75);
            if s.t <= -1.0 || s.t >= 1.1 {
                assert!(s.tangent.norm() <= 3.0);
            }
        }
    }

    #[test]
    fn start_radius_circle_crosses_twice() {
        let spec = TractSpec::default();
        assert_eq!(spec.circle_crossings(2f64.exp(), 20000), 2);
    }
}
