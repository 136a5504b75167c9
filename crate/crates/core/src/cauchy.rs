//! The entire function `f`: `f = f~` off `W` and `f = f~ + e^g` on `W`,
//! where `f~` is the Cauchy integral of `e^g` over the boundary of `W`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::CauchyError;
use crate::ext::log1p_c;
use crate::quadrature::{adaptive, truncation_for, CauchyIntegral, CauchyTract, Integral};
use crate::tract::{BoundaryCurve, TractSpec};
use crate::C64;

/// Above this `Re g` values are carried in log space.
pub const OVERFLOW_RE_G: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Target absolute error.
    pub eps: f64,
    /// Radius of the circular detour around points near the contour.
    pub kappa: f64,
    /// Maximal chord between contour samples and of quadrature panels.
    pub max_step: f64,
    /// Contour truncation `|t| <= t_truncate`; `0` selects it from the tail bound.
    pub t_truncate: f64,
    /// Start radius for the radius-parametrized arm checks.
    pub r_param: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            eps: 1e-10,
            kappa: 0.05,
            max_step: 0.025,
            t_truncate: 0.0,
            r_param: 2f64.exp(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), CauchyError> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(self.eps) || !ok(self.kappa) || !ok(self.max_step) || !ok(self.r_param) {
            return Err(CauchyError::Config("eps, kappa, max_step and r_param must be positive".into()));
        }
        if !(self.t_truncate >= 0.0) {
            return Err(CauchyError::Config("t_truncate must be non-negative".into()));
        }
        Ok(())
    }
}

/// A function value with an optional log-space representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionValue {
    /// `None` when the value overflows double precision.
    pub value: Option<C64>,
    pub log_value: Option<C64>,
    pub abs_error: f64,
}

impl FunctionValue {
    fn direct(v: C64, abs_error: f64) -> Self {
        let log_value = if v.norm() > 0.0 { Some(v.ln()) } else { None };
        FunctionValue { value: Some(v), log_value, abs_error }
    }

    fn from_log(log: C64, abs_error: f64) -> Self {
        let value = if log.re < 709.0 { Some(log.exp()) } else { None };
        FunctionValue { value, log_value: Some(log), abs_error }
    }

    /// `log |value|`.
    pub fn log_abs(&self) -> f64 {
        match (self.log_value, self.value) {
            (Some(l), _) => l.re,
            (None, Some(v)) => v.norm().ln(),
            (None, None) => f64::NAN,
        }
    }
}

/// Bounds entering the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConstants {
    /// `int_{-1}^{1} exp(Re g(gamma)) |gamma'| dt`.
    pub c1: f64,
    /// `exp(-b sinh(beta_d))`.
    pub c2: f64,
    /// Global bound on `|f~|`.
    pub c3: f64,
    pub order_bound: f64,
    pub kappa: f64,
}

impl ConstructionConstants {
    /// `(1/2 pi)(C1 + 6/C2)`.
    pub fn mass_bound(&self) -> f64 {
        (self.c1 + 6.0 / self.c2) / (2.0 * PI)
    }
}

/// The boundary of `W` with density `e^g`.
#[derive(Debug, Clone, Copy)]
pub struct WTract {
    pub curve: BoundaryCurve,
}

impl WTract {
    fn spec(&self) -> &TractSpec {
        &self.curve.spec
    }

    fn c2(&self) -> f64 {
        (-self.spec().wiggle_coeff * self.spec().domain_strip.beta.sinh()).exp()
    }

    /// Bound on `|gamma'|` along the arms.
    fn arm_speed(&self) -> f64 {
        let s = self.spec();
        1.0 + s.wiggle_coeff * s.domain_strip.beta.cosh() / s.univalence_margin()
    }
}

impl CauchyTract for WTract {
    fn eval(&self, t: f64) -> (C64, C64) {
        self.curve
            .eval(t)
            .unwrap_or((C64::new(f64::NAN, f64::NAN), C64::new(f64::NAN, f64::NAN)))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.curve.breakpoints().to_vec()
    }

    fn exponent(&self, zeta: C64) -> C64 {
        self.spec().h(zeta.ln()).exp()
    }

    fn in_domain(&self, zeta: C64) -> bool {
        let d = self.spec().domain_strip;
        zeta.norm() > d.alpha.exp() && zeta.arg().abs() < d.beta
    }

    fn contains(&self, z: C64) -> bool {
        self.spec().w_contains(z)
    }

    fn tail_mass(&self, t: f64) -> f64 {
        let s = self.spec();
        // |e^g| <= exp(-c |t|^a) on the arms, with c = C2 * (-cos beta_t)
        let c = self.c2() * -(s.target_strip.beta.cos());
        if !(c > 0.0) {
            return f64::INFINITY;
        }
        let p = s.linear_coeff;
        2.0 * self.arm_speed() * (-c * t.powf(p)).exp() / (c * p * t.powf(p - 1.0))
    }

    fn tail_distance(&self, z: C64, t: f64) -> f64 {
        let r = z.norm();
        if r < t {
            return t - r;
        }
        let up = self.curve.point(r).unwrap_or(C64::new(f64::NAN, f64::NAN));
        let lo = self.curve.point(-r).unwrap_or(C64::new(f64::NAN, f64::NAN));
        let d = 0.5 * (z - up).norm().min((z - lo).norm());
        if d.is_finite() {
            d
        } else {
            0.0
        }
    }
}

/// `W` with its tip replaced by the arc `|zeta| = r0` between the two arms.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedWTract {
    pub base: WTract,
    pub r0: f64,
    phi_lo: f64,
    phi_up: f64,
}

impl ShiftedWTract {
    pub fn new(base: WTract, r0: f64) -> Result<Self, CauchyError> {
        let s = base.spec();
        let phi_up = s.boundary_phi(r0)?;
        let phi_lo = s.boundary_phi(-r0)?;
        Ok(ShiftedWTract { base, r0, phi_lo, phi_up })
    }
}

impl CauchyTract for ShiftedWTract {
    fn eval(&self, t: f64) -> (C64, C64) {
        if t.abs() >= self.r0 {
            return self.base.eval(t);
        }
        let rate = (self.phi_up - self.phi_lo) / (2.0 * self.r0);
        let th = self.phi_lo + rate * (t + self.r0);
        let zeta = C64::from_polar(self.r0, th);
        (zeta, C64::i() * zeta * rate)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![-self.r0, self.r0]
    }
    fn exponent(&self, zeta: C64) -> C64 {
        self.base.exponent(zeta)
    }
    fn in_domain(&self, zeta: C64) -> bool {
        self.base.in_domain(zeta)
    }
    fn contains(&self, z: C64) -> bool {
        self.base.contains(z) && z.norm() > self.r0
    }
    fn tail_mass(&self, t: f64) -> f64 {
        self.base.tail_mass(t)
    }
    fn tail_distance(&self, z: C64, t: f64) -> f64 {
        self.base.tail_distance(z, t)
    }
}

/// The boundary of the half-strip `{Re z > 0, |Im z| < pi}` with density `e^{e^zeta}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolyaSzegoTract;

impl CauchyTract for PolyaSzegoTract {
    fn eval(&self, t: f64) -> (C64, C64) {
        if t <= -PI {
            (C64::new(-t - PI, -PI), C64::new(-1.0, 0.0))
        } else if t >= PI {
            (C64::new(t - PI, PI), C64::new(1.0, 0.0))
        } else {
            (C64::new(0.0, t), C64::new(0.0, 1.0))
        }
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![-PI, PI]
    }
    fn exponent(&self, zeta: C64) -> C64 {
        zeta.exp()
    }
    fn in_domain(&self, _: C64) -> bool {
        true
    }
    fn contains(&self, z: C64) -> bool {
        z.re > 0.0 && z.im.abs() < PI
    }
    fn tail_mass(&self, t: f64) -> f64 {
        let s = (t - PI).max(0.0);
        2.0 * (-s.exp()).exp() / s.exp()
    }
    fn tail_distance(&self, z: C64, t: f64) -> f64 {
        let s = t - PI;
        if z.re < s {
            s - z.re
        } else {
            (z.im - PI).abs().min((z.im + PI).abs())
        }
    }
}

/// Sup of `exp(Re G)` on the `kappa`-neighbourhood of the sampled contour,
/// and whether every sampled neighbour lies in the density's domain.
fn neighbourhood_max<T: CauchyTract>(q: &CauchyIntegral<T>, kappa: f64) -> (f64, bool) {
    let mut worst = f64::NEG_INFINITY;
    let mut in_domain = true;
    for &(_, zeta) in q.samples() {
        for j in 0..16 {
            for &r in &[kappa, 0.5 * kappa] {
                let w = zeta + C64::from_polar(r, 2.0 * PI * j as f64 / 16.0);
                if !q.tract.in_domain(w) {
                    in_domain = false;
                    continue;
                }
                worst = worst.max(q.tract.exponent(w).re);
            }
        }
    }
    (worst, in_domain)
}

/// `int |e^G| |gamma'| dt` over the truncated contour plus the tail bound.
fn total_mass<T: CauchyTract>(q: &CauchyIntegral<T>, lo: f64, hi: f64, eps: f64) -> f64 {
    let f = |t: f64| {
        let (zeta, d) = q.tract.eval(t);
        C64::new(q.tract.exponent(zeta).re.exp() * d.norm(), 0.0)
    };
    let mut knots = vec![lo];
    knots.extend(q.tract.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    knots.push(hi);
    knots.windows(2).map(|w| adaptive(&f, w[0], w[1], eps).0.re).sum()
}

fn resolve_truncation<T: CauchyTract>(tract: &T, config: &QuadratureConfig, min_t: f64) -> f64 {
    let auto = truncation_for(tract, min_t, 1e3, 0.1 * config.eps * 2.0 * PI * config.kappa);
    if config.t_truncate > 0.0 {
        config.t_truncate.max(min_t)
    } else {
        auto
    }
}

/// Evaluator for `g`, `f~`, `f` and `f'` of a tract spec.
pub struct Engine {
    spec: TractSpec,
    config: QuadratureConfig,
    quad: CauchyIntegral<WTract>,
    constants: ConstructionConstants,
}

impl Engine {
    /// Builds the panel table and checks both neighbourhood conditions on `kappa`.
    pub fn new(spec: TractSpec, config: QuadratureConfig) -> Result<Self, CauchyError> {
        config.validate()?;
        spec.validate()?;
        let curve = BoundaryCurve::new(spec)?;
        let tract = WTract { curve };
        let t = resolve_truncation(&tract, &config, curve.r_lo.max(curve.r_up) + config.max_step);
        let quad = CauchyIntegral::new(tract, t, config.max_step.min(0.5 * config.kappa), config.kappa, config.eps)?;
        let (worst, in_domain) = neighbourhood_max(&quad, config.kappa);
        if !in_domain {
            return Err(CauchyError::Config(format!(
                "kappa = {} neighbourhood of the contour leaves the sector",
                config.kappa
            )));
        }
        if worst > 3.0 {
            return Err(CauchyError::Config(format!(
                "kappa = {} neighbourhood of the contour reaches Re g = {worst:.3} > 3",
                config.kappa
            )));
        }
        let constants = compute_constants(&quad, &config);
        Ok(Engine { spec, config, quad, constants })
    }

    pub fn spec(&self) -> &TractSpec {
        &self.spec
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    pub fn constants(&self) -> &ConstructionConstants {
        &self.constants
    }

    pub fn truncation(&self) -> f64 {
        self.quad.t_max
    }

    pub fn quadrature(&self) -> &CauchyIntegral<WTract> {
        &self.quad
    }

    fn check_sector(&self, z: C64) -> Result<(), CauchyError> {
        if self.quad.tract.in_domain(z) {
            Ok(())
        } else {
            Err(CauchyError::OutsideSector { z })
        }
    }

    /// `log g(z) = h(Log z)`.
    pub fn log_g(&self, z: C64) -> Result<C64, CauchyError> {
        self.check_sector(z)?;
        Ok(self.spec.h(z.ln()))
    }

    /// `g(z) = exp(h(Log z))` on the sector.
    pub fn eval_g(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        let l = self.log_g(z)?;
        Ok(FunctionValue::from_log(l, 0.0))
    }

    /// `g'(z) = h'(Log z) g(z) / z`.
    pub fn g_prime(&self, z: C64) -> Result<C64, CauchyError> {
        let u = self.log_g(z)?;
        let lz = z.ln();
        Ok(self.spec.h_prime(lz) * u.exp() / z)
    }

    pub fn distance_to_contour(&self, z: C64) -> f64 {
        self.quad.distance(z).0
    }

    fn integral(&self, z: C64, p: i32) -> Result<Integral, CauchyError> {
        self.quad.integrate(z, p)
    }

    pub fn eval_f_tilde(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        let r = self.integral(z, 1)?;
        Ok(FunctionValue::direct(r.value, r.abs_error))
    }

    pub fn f_tilde_prime(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        let r = self.integral(z, 2)?;
        Ok(FunctionValue::direct(r.value, r.abs_error))
    }

    /// The entire function: `f~` off `W`, `f~ + e^g` on `W`.
    pub fn eval_f(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        if !self.spec.w_contains(z) {
            return self.eval_f_tilde(z);
        }
        let g = self.spec.h(z.ln()).exp();
        let c3 = self.constants.c3;
        if g.re > OVERFLOW_RE_G {
            let ratio_bound = c3 * (-g.re).exp();
            if ratio_bound < 1e-300 {
                // |f~| <= C3, so the correction is below the resolution of g
                return Ok(FunctionValue::from_log(g, f64::MIN_POSITIVE.max(2.0 * ratio_bound)));
            }
            let ft = self.integral(z, 1)?;
            let log = g + log1p_c(ft.value * (-g).exp());
            return Ok(FunctionValue::from_log(log, ft.abs_error * (-g.re).exp()));
        }
        let ft = self.integral(z, 1)?;
        let eg = g.exp();
        Ok(FunctionValue::direct(ft.value + eg, ft.abs_error + 4.0 * f64::EPSILON * eg.norm()))
    }

    pub fn eval_f_prime(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        if !self.spec.w_contains(z) {
            return self.f_tilde_prime(z);
        }
        let lz = z.ln();
        let g = self.spec.h(lz).exp();
        // log(g' e^g) = log h'(Log z) + h(Log z) - Log z + g
        let log_main = self.spec.h_prime(lz).ln() + self.spec.h(lz) - lz + g;
        let c3k = self.constants.c3 / self.config.kappa;
        if log_main.re > OVERFLOW_RE_G {
            if c3k * (-log_main.re).exp() < 1e-300 {
                return Ok(FunctionValue::from_log(log_main, f64::MIN_POSITIVE));
            }
            let ft = self.integral(z, 2)?;
            let log = log_main + log1p_c(ft.value * (-log_main).exp());
            return Ok(FunctionValue::from_log(log, ft.abs_error * (-log_main.re).exp()));
        }
        let ft = self.integral(z, 2)?;
        let main = log_main.exp();
        Ok(FunctionValue::direct(ft.value + main, ft.abs_error + 8.0 * f64::EPSILON * main.norm()))
    }

    /// `log f(z)` with its error; cheap when `Re g` dwarfs `C3`.
    pub fn log_f(&self, z: C64) -> Result<(C64, f64), CauchyError> {
        let v = self.eval_f(z)?;
        match v.log_value {
            Some(l) => {
                let scale = v.value.map(|x| x.norm()).unwrap_or(f64::INFINITY);
                let rel = if scale.is_finite() && scale > 0.0 { v.abs_error / scale } else { v.abs_error };
                Ok((l, rel))
            }
            None => Err(CauchyError::OnContour { z, dist: 0.0 }),
        }
    }

    /// Engine whose contour tip is replaced by the arc `|zeta| = r0`.
    pub fn with_contour_shift(&self, r0: f64) -> Result<CauchyIntegral<ShiftedWTract>, CauchyError> {
        let tract = ShiftedWTract::new(self.quad.tract, r0)?;
        let t = self.quad.t_max.max(r0 + self.config.max_step);
        CauchyIntegral::new(
            tract,
            t,
            self.config.max_step.min(0.5 * self.config.kappa),
            self.config.kappa,
            self.config.eps,
        )
    }
}

fn compute_constants(quad: &CauchyIntegral<WTract>, config: &QuadratureConfig) -> ConstructionConstants {
    let tract = &quad.tract;
    let spec = tract.spec();
    let c1 = total_mass(quad, -1.0, 1.0, 1e-12);
    let c2 = tract.c2();
    let m = c1 + 6.0 / c2;
    let kappa = config.kappa;
    let c3 = (m / (2.0 * PI)).max(m / (2.0 * PI * kappa) + 2.0 * PI * 3f64.exp());
    ConstructionConstants { c1, c2, c3, order_bound: spec.linear_coeff, kappa }
}

/// The construction constants for a spec and configuration.
pub fn estimate_constants(spec: &TractSpec, config: &QuadratureConfig) -> Result<ConstructionConstants, CauchyError> {
    Ok(*Engine::new(*spec, *config)?.constants())
}

/// Least-squares slope of `log log M(r)` against `log r`; zero when `log M <= 0`.
pub fn order_from_log_maxima(radii: &[f64], log_max: &[f64]) -> Result<f64, CauchyError> {
    if radii.len() < 3 || radii.len() != log_max.len() {
        return Err(CauchyError::InsufficientData(radii.len().min(log_max.len())));
    }
    if log_max.iter().all(|&m| m <= 0.0) {
        return Ok(0.0);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = log_max.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Slopes between consecutive radii.
pub fn local_order_slopes(radii: &[f64], log_max: &[f64]) -> Vec<f64> {
    radii
        .windows(2)
        .zip(log_max.windows(2))
        .map(|(r, m)| (m[1].ln() - m[0].ln()) / (r[1].ln() - r[0].ln()))
        .collect()
}

/// `max_theta log|f(r e^{i theta})|` by a grid scan and golden-section polish.
pub fn circle_log_max<F>(log_abs: F, r: f64, grid: usize) -> f64
where
    F: Fn(C64) -> Option<f64> + Sync,
{
    use rayon::prelude::*;
    let vals: Vec<(f64, f64)> = (0..grid)
        .into_par_iter()
        .map(|j| {
            let th = -PI + 2.0 * PI * j as f64 / grid as f64;
            (th, log_abs(C64::from_polar(r, th)).unwrap_or(f64::NEG_INFINITY))
        })
        .collect();
    let (best_th, mut best) = vals
        .iter()
        .copied()
        .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let step = 2.0 * PI / grid as f64;
    let f = |th: f64| log_abs(C64::from_polar(r, th)).unwrap_or(f64::NEG_INFINITY);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_th - step, best_th + step);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    for v in [fc, fd] {
        best = best.max(v);
    }
    best
}

/// Order estimate of `f` from circle maxima at `radii`.
pub fn estimate_order(engine: &Engine, radii: &[f64]) -> Result<f64, CauchyError> {
    if radii.len() < 3 {
        return Err(CauchyError::InsufficientData(radii.len()));
    }
    let maxima = circle_maxima(engine, radii);
    order_from_log_maxima(radii, &maxima)
}

/// `log M(r)` for each radius.
pub fn circle_maxima(engine: &Engine, radii: &[f64]) -> Vec<f64> {
    radii
        .iter()
        .map(|&r| circle_log_max(|z| engine.eval_f(z).ok().map(|v| v.log_abs()), r, 2048))
        .collect()
}

/// Entire function built from the classical half-strip tract with density `e^{e^z}`.
pub struct PolyaSzego {
    quad: CauchyIntegral<PolyaSzegoTract>,
    bound: f64,
}

impl PolyaSzego {
    pub fn new(config: &QuadratureConfig) -> Result<Self, CauchyError> {
        config.validate()?;
        let tract = PolyaSzegoTract;
        let t = resolve_truncation(&tract, config, PI + config.max_step);
        let quad = CauchyIntegral::new(tract, t, config.max_step.min(0.5 * config.kappa), config.kappa, config.eps)?;
        let mass = total_mass(&quad, -t, t, 1e-12) + tract.tail_mass(t);
        let (worst, _) = neighbourhood_max(&quad, config.kappa);
        let bound = mass / (2.0 * PI * config.kappa) + worst.exp();
        Ok(PolyaSzego { quad, bound })
    }

    /// Engine bound on `|f~|` over the plane minus the contour.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn f_tilde(&self, z: C64) -> Result<Integral, CauchyError> {
        self.quad.integrate(z, 1)
    }

    /// `f~` outside the strip, `f~ + e^{e^z}` inside.
    pub fn eval(&self, z: C64) -> Result<FunctionValue, CauchyError> {
        let ft = self.quad.integrate(z, 1)?;
        if !self.quad.tract.contains(z) {
            return Ok(FunctionValue::direct(ft.value, ft.abs_error));
        }
        let g = z.exp();
        if g.re > OVERFLOW_RE_G {
            let log = g + log1p_c(ft.value * (-g).exp());
            return Ok(FunctionValue::from_log(log, ft.abs_error * (-g.re).exp()));
        }
        let eg = g.exp();
        Ok(FunctionValue::direct(ft.value + eg, ft.abs_error + 4.0 * f64::EPSILON * eg.norm()))
    }
}

/// One-shot evaluation of the classical construction at `z`.
pub fn polya_szego_oracle(z: C64, config: &QuadratureConfig) -> Result<FunctionValue, CauchyError> {
    PolyaSzego::new(config)?.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> Engine {
        Engine::new(TractSpec::default(), QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn c2_closed_form() {
        let e = engine();
        let c = e.constants();
        assert!((c.c2 - (-2.0 * PI * (PI / 3.0).sinh()).exp()).abs() < 1e-18);
        assert!((c.c2 - 3.897_501_383_222_42e-4).abs() < 1e-17);
        assert!(c.c1 > 0.0 && c.c1.is_finite());
        assert!(c.c3 >= c.mass_bound());
    }

    #[test]
    fn g_examples() {
        let e = engine();
        let v = e.eval_g(C64::new(1.0, 0.0)).unwrap();
        assert!((v.value.unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(e.eval_g(C64::new(-1.0, 0.0)).is_err());
        // modulus formula
        for &(r, th) in &[(2.0, 0.3), (5.0, -0.2), (1.5, 0.9)] {
            let z = C64::from_polar(r, th);
            let m = e.eval_g(z).unwrap().log_value.unwrap().exp().norm();
            let expected = r.powf(5.0 * PI) * (-2.0 * PI * f64::ln(r).cos() * f64::sinh(th)).exp();
            assert!((m / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g_negative_on_arms() {
        let e = engine();
        let curve = BoundaryCurve::new(TractSpec::default()).unwrap();
        for &t in &[1.5, -2.0, 3.0, -7.5] {
            let g = e.eval_g(curve.point(t).unwrap()).unwrap().log_value.unwrap().exp();
            assert!(g.re < 0.0 && g.im.abs() < 1e-9 * g.re.abs(), "t={t}: {g}");
        }
    }

    #[test]
    fn far_field_decay() {
        let e = engine();
        let v = e.eval_f_tilde(C64::new(-1e6, 0.0)).unwrap().value.unwrap();
        assert!(v.norm() < 1e-4);
    }

    #[test]
    fn large_kappa_rejected() {
        let cfg = QuadratureConfig { kappa: 0.3, max_step: 0.1, ..Default::default() };
        assert!(matches!(Engine::new(TractSpec::default(), cfg), Err(CauchyError::Config(_))));
    }

    #[test]
    fn order_stub_and_errors() {
        assert_eq!(order_from_log_maxima(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(order_from_log_maxima(&[1.0, 2.0, 3.0], &[-1.0, -1.0, -1.0]).unwrap(), 0.0);
        assert!(matches!(order_from_log_maxima(&[1.0, 2.0], &[1.0, 2.0]), Err(CauchyError::InsufficientData(2))));
        // exact power growth r^3
        let r = [2.0, 4.0, 8.0, 16.0];
        let m: Vec<f64> = r.iter().map(|x: &f64| x.powi(3)).collect();
        assert!((order_from_log_maxima(&r, &m).unwrap() - 3.0).abs() < 1e-12);
    }
}
