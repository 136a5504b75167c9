//! The disjoint-type function `f0 = lambda f` and its logarithmic transform
//! `F(z) = log f0(exp z)` on the tract array `T(k) = T(0) + 2 pi i k`.
//!
//! For the default tract `max log|f|` on `|z| = e^R` is of size `e^{5 pi R}`,
//! so `lambda = exp(-L)` with `L` itself near `e^{250}`. Only `L` is stored.
//! On the tracts `Re g > L`, the Cauchy correction `log(1 + f~ e^{-g})` is
//! below `C3 exp(-L)` and `F(z) = exp(h(z - 2 pi i k)) - L` holds to
//! double precision. `F` has absolute condition number near `L`, so small
//! offsets are carried through the branches with [`ExtComplex`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::cauchy::{circle_log_max, Engine, QuadratureConfig};
use crate::config::Config;
use crate::error::{CauchyError, DynamicsError};
use crate::ext::{expm1_c, log1p_c, ExtComplex};
use crate::tract::TractSpec;
use crate::C64;

const TWO_PI: f64 = 2.0 * PI;
/// Largest `Re u` with `exp(u)` finite.
const EXP_MAX: f64 = 709.78;

/// A preperiodic sequence of tract indices `s_0 s_1 ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExternalAddress {
    pub preperiod: Vec<i64>,
    pub period: Vec<i64>,
}

impl ExternalAddress {
    pub fn new(preperiod: Vec<i64>, period: Vec<i64>) -> Result<Self, DynamicsError> {
        if period.is_empty() {
            return Err(DynamicsError::Address("the periodic part must be nonempty".into()));
        }
        Ok(ExternalAddress { preperiod, period })
    }

    /// The constant address `k k k ...`.
    pub fn constant(k: i64) -> Self {
        ExternalAddress { preperiod: Vec::new(), period: vec![k] }
    }

    /// Parses `"0,0,(1)"`: preperiod `0 0`, then `1` repeated.
    pub fn parse(s: &str) -> Result<Self, DynamicsError> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let open = s.find('(').ok_or_else(|| DynamicsError::Address(format!("no periodic part in {s:?}")))?;
        if !s.ends_with(')') || s[open + 1..s.len() - 1].contains(['(', ')']) {
            return Err(DynamicsError::Address(format!("malformed periodic part in {s:?}")));
        }
        let ints = |part: &str| -> Result<Vec<i64>, DynamicsError> {
            part.split(',')
                .filter(|x| !x.is_empty())
                .map(|x| x.parse::<i64>().map_err(|e| DynamicsError::Address(format!("{x:?}: {e}"))))
                .collect()
        };
        let pre = &s[..open];
        if !pre.is_empty() && !pre.ends_with(',') {
            return Err(DynamicsError::Address(format!("missing comma before '(' in {s:?}")));
        }
        Self::new(ints(pre)?, ints(&s[open + 1..s.len() - 1])?)
    }

    /// `s_n`.
    pub fn symbol(&self, n: usize) -> i64 {
        if n < self.preperiod.len() {
            self.preperiod[n]
        } else {
            self.period[(n - self.preperiod.len()) % self.period.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<i64> {
        (0..n).map(|j| self.symbol(j)).collect()
    }

    /// The shifted address `sigma^n(s)`.
    pub fn shift(&self, n: usize) -> Self {
        if n <= self.preperiod.len() {
            return ExternalAddress { preperiod: self.preperiod[n..].to_vec(), period: self.period.clone() };
        }
        let r = (n - self.preperiod.len()) % self.period.len();
        let mut period = self.period[r..].to_vec();
        period.extend_from_slice(&self.period[..r]);
        ExternalAddress { preperiod: Vec::new(), period }
    }

    /// `max |s_n|`.
    pub fn bound(&self) -> i64 {
        self.preperiod.iter().chain(&self.period).map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn check_bound(&self, bound: i64) -> Result<(), DynamicsError> {
        let b = self.bound();
        if b > bound {
            Err(DynamicsError::SymbolBound { k: b, bound })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for ExternalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in &self.preperiod {
            write!(f, "{k},")?;
        }
        let per: Vec<String> = self.period.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", per.join(","))
    }
}

impl FromStr for ExternalAddress {
    type Err = DynamicsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// A point in logarithmic coordinates together with the index of its tract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractIndexedPoint {
    pub z: C64,
    pub tract_index: i64,
}

impl TractIndexedPoint {
    /// Index from the horizontal strip `|Im z - 2 pi k| <= pi` containing `z`.
    pub fn new(z: C64) -> Self {
        TractIndexedPoint { z, tract_index: (z.im / TWO_PI).round() as i64 }
    }

    /// `z - 2 pi i k`, a point of `T(0)`.
    pub fn reduced(&self) -> C64 {
        self.z - C64::new(0.0, TWO_PI * self.tract_index as f64)
    }
}

/// `exp(u)` as an extended complex number; never overflows.
pub fn ext_exp(u: C64) -> ExtComplex {
    let e = (u.re / LN_2).floor();
    let frac = u.re - e * LN_2;
    ExtComplex::new(C64::from_polar(frac.exp(), u.im), e as i64)
}

/// `log(1 + r)` for an extended `r`.
fn ext_log1p(r: &ExtComplex) -> ExtComplex {
    if r.ln_abs() < (1e-4f64).ln() {
        // five terms: the remainder is below |r|^6
        let mut sum = ExtComplex::ZERO;
        let mut pow = *r;
        for k in 1..=5 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let term = pow.mul_c64(C64::new(sign / k as f64, 0.0));
            sum = sum.add(&term);
            pow = pow.mul(r);
        }
        sum
    } else {
        ExtComplex::from_c64(log1p_c(r.to_c64()))
    }
}

/// `exp(x) - 1` for an extended `x`.
fn ext_expm1(x: &ExtComplex) -> ExtComplex {
    if x.ln_abs() < (1e-4f64).ln() {
        let mut sum = ExtComplex::ZERO;
        let mut term = *x;
        for k in 1..=6 {
            sum = sum.add(&term);
            term = term.mul(x).div_c64(C64::new((k + 1) as f64, 0.0));
        }
        sum
    } else {
        ExtComplex::from_c64(expm1_c(x.to_c64()))
    }
}

/// SHA-256 digests of the calibration samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDigests {
    pub disc: String,
    pub grid: String,
}

/// A calibrated `f0 = exp(-L) f` with its verified invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointTypeModel {
    pub spec: TractSpec,
    pub quadrature: QuadratureConfig,
    pub r_log: f64,
    pub k_target: f64,
    pub symbol_bound: i64,
    /// `log lambda = -L`.
    pub log_lambda: f64,
    /// Number of doublings of `L` from `ln 2`.
    pub doublings: u32,
    /// Certified lower bound `(a - b sinh beta)(L + R)` for `|F'|` on the tracts.
    pub k_expansion: f64,
    pub log_k_expansion: f64,
    /// Smallest `log|F'|` over the verification grid.
    pub grid_min_log_f_prime: f64,
    /// Smallest `Re z` over the verification grid.
    pub grid_min_re: f64,
    pub grid_points: usize,
    /// `max log|f|` on the circle `|z| = e^R`.
    pub circle_log_max: f64,
    /// Largest `log|f0|` over the disc samples.
    pub disc_log_max: f64,
    pub disc_samples: usize,
    /// Attracting fixed point of `f0`.
    pub xi: C64,
    /// `log|f0(xi) - xi|`.
    pub fixed_point_log_residual: f64,
    /// `log|f0'(xi)|`.
    pub fixed_point_log_multiplier: f64,
    /// `log` of the bound `C3 exp(-(L + R))` on the Cauchy correction of `F`.
    pub log_correction_bound: f64,
    pub seed: u64,
    pub digests: ModelDigests,
}

/// Forward orbit with the tract indices of all points but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<C64>,
    pub indices: Vec<i64>,
}

fn digest_f64s(values: impl Iterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

struct FixedPoint {
    xi: C64,
    log_residual: f64,
    log_multiplier: f64,
}

/// Fixed-point iteration of `exp(-l) f` from the origin.
fn fixed_point(engine: &Engine, l: f64) -> Result<FixedPoint, CauchyError> {
    let f0 = |z: C64| -> Result<C64, CauchyError> {
        let (lf, _) = engine.log_f(z)?;
        let lg = lf - l;
        Ok(if lg.re < -745.0 { C64::new(0.0, 0.0) } else { lg.exp() })
    };
    let mut z = C64::new(0.0, 0.0);
    for _ in 0..500 {
        let next = f0(z)?;
        let done = (next - z).norm() <= 1e-15 * z.norm().max(1.0);
        z = next;
        if done {
            break;
        }
    }
    let (lf, _) = engine.log_f(z)?;
    let log_residual = if z == C64::new(0.0, 0.0) {
        lf.re - l
    } else {
        let r = f0(z)? - z;
        if r.norm() > 0.0 {
            r.norm().ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    let log_multiplier = engine.eval_f_prime(z)?.log_abs() - l;
    Ok(FixedPoint { xi: z, log_residual, log_multiplier })
}

/// Tract points `F^{-1}_0(w)` for `w` on a logarithmic grid of the half-plane.
fn tract_grid_targets(r: f64, n: usize) -> Vec<C64> {
    let side = ((n as f64).sqrt().ceil() as usize).max(2);
    let mut out = Vec::with_capacity(n);
    'outer: for i in 0..side {
        let x = r + 10f64.powf(-3.0 + 303.0 * i as f64 / (side - 1) as f64);
        for j in 0..side {
            if out.len() == n {
                break 'outer;
            }
            // heights from -1e300 to 1e300, symmetric in log scale
            let s = -1.0 + 2.0 * j as f64 / (side - 1) as f64;
            let y = s.signum() * (10f64.powf(-3.0 + 303.0 * s.abs()) - 1e-3);
            out.push(C64::new(x, y));
        }
    }
    out
}

impl DisjointTypeModel {
    /// `L = -log lambda`.
    pub fn l(&self) -> f64 {
        -self.log_lambda
    }

    pub fn engine(&self) -> Result<Engine, CauchyError> {
        Engine::new(self.spec, self.quadrature)
    }

    fn check_symbol(&self, k: i64) -> Result<(), DynamicsError> {
        if k.abs() > self.symbol_bound {
            Err(DynamicsError::SymbolBound { k, bound: self.symbol_bound })
        } else {
            Ok(())
        }
    }

    /// Membership of `z` (any index) in the tract array `{Re exp(h(z')) > L + R}`,
    /// up to the rounding resolution of `h`.
    pub fn in_tract(&self, z: C64) -> bool {
        let p = TractIndexedPoint::new(z);
        let zr = p.reduced();
        if !self.spec.tract_contains(zr) {
            return false;
        }
        let u = self.spec.h(zr);
        // rounding error of u, from z' and from h itself
        let du = 4.0 * f64::EPSILON * (1.0 + u.norm() + self.spec.h_prime(zr).norm() * (z.norm() + 1.0));
        let edge = PI / 2.0 - u.im.abs();
        if edge <= du {
            // Re exp(u) is not resolved in sign: accept within resolution
            return edge > -du;
        }
        let lhs = u.re + u.im.cos().ln();
        let lhs_err = du * (1.0 + u.im.tan().abs());
        let rhs = self.l().ln() + (self.r_log / self.l()).ln_1p();
        lhs + lhs_err >= rhs
    }

    /// Validated tract point for `z`.
    pub fn point(&self, z: C64) -> Result<TractIndexedPoint, DynamicsError> {
        let p = TractIndexedPoint::new(z);
        self.check_symbol(p.tract_index)?;
        if !self.in_tract(z) {
            return Err(DynamicsError::OutsideTract { z });
        }
        Ok(p)
    }

    fn validate(&self, p: &TractIndexedPoint) -> Result<C64, DynamicsError> {
        if TractIndexedPoint::new(p.z).tract_index != p.tract_index || !self.in_tract(p.z) {
            return Err(DynamicsError::OutsideTract { z: p.z });
        }
        Ok(p.reduced())
    }

    /// `F(z) = exp(h(z')) - L`.
    #[allow(non_snake_case)]
    pub fn eval_F(&self, p: &TractIndexedPoint) -> Result<C64, DynamicsError> {
        Ok(self.eval_F_with_error(p)?.0)
    }

    /// `F(z)` with a bound on its rounding error, which is of size `eps |F'| |z|`.
    #[allow(non_snake_case)]
    pub fn eval_F_with_error(&self, p: &TractIndexedPoint) -> Result<(C64, f64), DynamicsError> {
        let zr = self.validate(p)?;
        let u = self.spec.h(zr);
        if u.re > EXP_MAX {
            return Err(DynamicsError::Overflow { step: 0 });
        }
        let eu = u.exp();
        let err = 4.0 * f64::EPSILON * eu.norm() * (1.0 + u.norm() + self.spec.h_prime(zr).norm() * (p.z.norm() + 1.0));
        Ok((eu - self.l(), err))
    }

    /// `log F'(z) = log h'(z') + h(z')`.
    #[allow(non_snake_case)]
    pub fn log_F_prime(&self, p: &TractIndexedPoint) -> Result<C64, DynamicsError> {
        let zr = self.validate(p)?;
        Ok(self.spec.h_prime(zr).ln() + self.spec.h(zr))
    }

    #[allow(non_snake_case)]
    pub fn eval_F_prime(&self, p: &TractIndexedPoint) -> Result<C64, DynamicsError> {
        let lg = self.log_F_prime(p)?;
        if lg.re > EXP_MAX {
            return Err(DynamicsError::Overflow { step: 0 });
        }
        Ok(lg.exp())
    }

    /// `Log(w + L)` without losing `w` when it is small against `L`.
    fn log_target(&self, w: C64) -> C64 {
        let l = self.l();
        if w.norm() < 1e-3 * l {
            C64::new(l.ln(), 0.0) + log1p_c(w / l)
        } else {
            (w + l).ln()
        }
    }

    /// The branch `F^{-1}_k` of the inverse onto `T(k)`.
    pub fn inverse_branch(&self, w: C64, k: i64) -> Result<TractIndexedPoint, DynamicsError> {
        self.check_symbol(k)?;
        if !(w.re > 0.0) || !w.im.is_finite() || !w.re.is_finite() {
            return Err(DynamicsError::BranchInversion { w, k, reason: "Re w must be positive and finite".into() });
        }
        let target = self.log_target(w);
        let zr = self
            .spec
            .invert_h(target, None)
            .map_err(|e| DynamicsError::BranchInversion { w, k, reason: e.to_string() })?;
        Ok(TractIndexedPoint { z: zr + C64::new(0.0, TWO_PI * k as f64), tract_index: k })
    }

    /// `|h(z') - Log(w + L)|`: the inversion residual in the coordinates where
    /// it is well conditioned.
    pub fn inverse_residual(&self, w: C64, p: &TractIndexedPoint) -> f64 {
        (self.spec.h(p.reduced()) - self.log_target(w)).norm()
    }

    /// `F^{-1}_k(w + delta) - F^{-1}_k(w)` where `p = F^{-1}_k(w)`.
    pub fn inverse_offset(&self, w: C64, p: &TractIndexedPoint, delta: &ExtComplex) -> ExtComplex {
        if delta.is_zero() {
            return ExtComplex::ZERO;
        }
        let zr = p.reduced();
        let base = w + self.l();
        let d = ext_log1p(&delta.div_c64(base));
        let hp = self.spec.h_prime(zr);
        if d.ln_abs() < (1e-7f64).ln() {
            // h(z + eta) - h(z) = h' eta + h'' eta^2 / 2 + O(eta^3)
            let hpp = -C64::i() * self.spec.wiggle_coeff * zr.sin();
            let eta1 = d.div_c64(hp);
            let corr = eta1.mul(&eta1).mul_c64(hpp * 0.5);
            return d.sub(&corr).div_c64(hp);
        }
        let dc = d.to_c64();
        let mut eta = dc / hp;
        for _ in 0..60 {
            let r = self.spec.h_delta(zr, eta) - dc;
            let step = r / self.spec.h_prime(zr + eta);
            eta -= step;
            if step.norm() <= 1e-16 * eta.norm() {
                break;
            }
        }
        ExtComplex::from_c64(eta)
    }

    /// `F(z + eta) - F(z)`.
    pub fn forward_offset(&self, p: &TractIndexedPoint, eta: &ExtComplex) -> ExtComplex {
        if eta.is_zero() {
            return ExtComplex::ZERO;
        }
        let zr = p.reduced();
        let dh = if eta.ln_abs() < (1e-7f64).ln() {
            let hpp = -C64::i() * self.spec.wiggle_coeff * zr.sin();
            eta.mul_c64(self.spec.h_prime(zr)).add(&eta.mul(eta).mul_c64(hpp * 0.5))
        } else {
            ExtComplex::from_c64(self.spec.h_delta(zr, eta.to_c64()))
        };
        ext_expm1(&dh).mul(&ext_exp(self.spec.h(zr)))
    }

    /// `n` steps of `F`, checking tract membership before each step.
    pub fn orbit(&self, p: &TractIndexedPoint, n: usize) -> Result<Orbit, DynamicsError> {
        let mut points = vec![p.z];
        let mut indices = Vec::with_capacity(n);
        for step in 0..n {
            let z = points[step];
            if !self.in_tract(z) {
                return Err(DynamicsError::EscapedTract { step, z });
            }
            let q = TractIndexedPoint::new(z);
            let w = self.eval_F(&q).map_err(|e| match e {
                DynamicsError::Overflow { .. } => DynamicsError::Overflow { step },
                other => other,
            })?;
            indices.push(q.tract_index);
            points.push(w);
        }
        Ok(Orbit { points, indices })
    }

    /// `phi_n(w) = F^{-1}_{s_0} o ... o F^{-1}_{s_{n-1}}(w)` with all intermediate points.
    pub fn pullback(&self, address: &ExternalAddress, w: C64, n: usize) -> Result<PullbackChain, DynamicsError> {
        let mut points = vec![TractIndexedPoint::new(w); n + 1];
        for j in (0..n).rev() {
            points[j] = self.inverse_branch(points[j + 1].z, address.symbol(j))?;
        }
        Ok(PullbackChain { address: address.prefix(n), points })
    }

    /// `log f0(z) = log f(z) - L` with an error bound including the rounding of `g`.
    pub fn log_f0(&self, engine: &Engine, z: C64) -> Result<(C64, f64), CauchyError> {
        let (lf, err) = engine.log_f(z)?;
        let mut err = err;
        if self.spec.w_contains(z) {
            let lz = z.ln();
            let g = self.spec.h(lz).exp();
            err += 4.0 * f64::EPSILON * g.norm() * (1.0 + self.spec.h(lz).norm() + self.spec.h_prime(lz).norm() * (lz.norm() + 1.0));
        }
        Ok((lf - self.l(), err))
    }

    /// Re-runs the three calibration checks on fresh random samples.
    pub fn reverify(&self, engine: &Engine, seed: u64, disc_samples: usize, grid: usize) -> Result<Verification, DynamicsError> {
        verify_checks(self, engine, seed, disc_samples, grid)
    }
}

/// Outcome of the calibration checks for one `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub disc_log_max: f64,
    pub grid_min_log_f_prime: f64,
    pub grid_min_re: f64,
    pub disc_digest: String,
    pub grid_digest: String,
}

fn disc_samples(r_log: f64, n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = r_log.exp();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            C64::from_polar(r * u.sqrt(), TWO_PI * v - PI)
        })
        .collect()
}

fn verify_checks(model: &DisjointTypeModel, engine: &Engine, seed: u64, n_disc: usize, n_grid: usize) -> Result<Verification, DynamicsError> {
    let pts = disc_samples(model.r_log, n_disc, seed);
    let logs: Vec<f64> = pts
        .par_iter()
        .map(|&z| model.log_f0(engine, z).map(|(l, _)| l.re).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let disc_log_max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let disc_digest = digest_f64s(pts.iter().zip(&logs).flat_map(|(z, l)| [z.re, z.im, *l]));

    let targets = tract_grid_targets(model.r_log, n_grid);
    let mut grid_min = f64::INFINITY;
    let mut grid_min_re = f64::INFINITY;
    let mut grid_vals = Vec::with_capacity(3 * targets.len());
    for (i, &w) in targets.iter().enumerate() {
        let k = (i as i64 % (2 * model.symbol_bound + 1)) - model.symbol_bound;
        let p = model.inverse_branch(w, k)?;
        let lg = model.log_F_prime(&p)?;
        grid_min = grid_min.min(lg.re);
        grid_min_re = grid_min_re.min(p.z.re);
        grid_vals.extend([p.z.re, p.z.im, lg.re]);
    }
    Ok(Verification {
        disc_log_max,
        grid_min_log_f_prime: grid_min,
        grid_min_re,
        disc_digest,
        grid_digest: digest_f64s(grid_vals.into_iter()),
    })
}

/// Chooses `L = ln 2 * 2^j` for the smallest `j` passing all three checks.
pub fn calibrate(config: &Config, seed: u64) -> Result<DisjointTypeModel, DynamicsError> {
    let engine = Engine::new(config.tract, config.quadrature)?;
    calibrate_with(&engine, config, seed)
}

pub fn calibrate_with(engine: &Engine, config: &Config, seed: u64) -> Result<DisjointTypeModel, DynamicsError> {
    let dc = &config.dynamics;
    if !(dc.r_log > 0.0 && dc.k_target > 1.0) {
        return Err(DynamicsError::Calibration("r_log must be positive and k_target > 1".into()));
    }
    let spec = *engine.spec();
    let margin = spec.univalence_margin();
    let r = dc.r_log.exp();
    let circle = circle_log_max(|z| engine.log_f(z).ok().map(|(l, _)| l.re), r, 4096);
    let log_c3 = engine.constants().c3.ln();
    let mut failure = String::from("no doubling attempted");
    for j in 0..=dc.max_doublings {
        let l = LN_2 * 2f64.powi(j as i32);
        if !l.is_finite() {
            break;
        }
        if circle - l >= dc.r_log {
            failure = format!("max log|f0| on |z| = e^R is {} >= R", circle - l);
            continue;
        }
        let fp = fixed_point(engine, l)?;
        if !(fp.log_residual < (1e-12f64).ln() && fp.log_multiplier < 0.0) {
            failure = format!(
                "fixed point residual exp({}) or multiplier exp({}) too large",
                fp.log_residual, fp.log_multiplier
            );
            continue;
        }
        let k_expansion = margin * (l + dc.r_log);
        let mut model = DisjointTypeModel {
            spec,
            quadrature: *engine.config(),
            r_log: dc.r_log,
            k_target: dc.k_target,
            symbol_bound: dc.symbol_bound,
            log_lambda: -l,
            doublings: j,
            k_expansion,
            log_k_expansion: k_expansion.ln(),
            grid_min_log_f_prime: f64::NAN,
            grid_min_re: f64::NAN,
            grid_points: dc.tract_grid,
            circle_log_max: circle,
            disc_log_max: f64::NAN,
            disc_samples: dc.disc_samples,
            xi: fp.xi,
            fixed_point_log_residual: fp.log_residual,
            fixed_point_log_multiplier: fp.log_multiplier,
            log_correction_bound: log_c3 - (l + dc.r_log),
            seed,
            digests: ModelDigests { disc: String::new(), grid: String::new() },
        };
        let v = verify_checks(&model, engine, seed, dc.disc_samples, dc.tract_grid)?;
        if v.disc_log_max >= dc.r_log {
            failure = format!("disc sample with log|f0| = {} >= R", v.disc_log_max);
            continue;
        }
        if v.grid_min_log_f_prime < dc.k_target.ln() {
            failure = format!("|F'| = exp({}) below the target on the grid", v.grid_min_log_f_prime);
            continue;
        }
        if v.grid_min_log_f_prime < model.log_k_expansion * (1.0 - 1e-12) {
            return Err(DynamicsError::Calibration(format!(
                "grid value log|F'| = {} contradicts the bound log K = {}",
                v.grid_min_log_f_prime, model.log_k_expansion
            )));
        }
        model.grid_min_log_f_prime = v.grid_min_log_f_prime;
        model.grid_min_re = v.grid_min_re;
        model.disc_log_max = v.disc_log_max;
        model.digests = ModelDigests { disc: v.disc_digest, grid: v.grid_digest };
        log::info!("calibrated after {j} doublings: L = {l:e}");
        return Ok(model);
    }
    Err(DynamicsError::Calibration(failure))
}

/// The composite `phi_n` evaluated at one point, with every intermediate
/// point `points[j]` on level `j`; `points[n]` is the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackChain {
    pub address: Vec<i64>,
    pub points: Vec<TractIndexedPoint>,
}

impl PullbackChain {
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    pub fn result(&self) -> TractIndexedPoint {
        self.points[0]
    }

    /// Tract indices of levels `0..n`; equal to the address prefix by construction.
    pub fn indices(&self) -> Vec<i64> {
        self.points[..self.depth()].iter().map(|p| p.tract_index).collect()
    }

    /// Offsets on every level for a start offset `delta` on level `n`; entry `j`
    /// is `phi`-image offset on level `j`.
    pub fn pull_offset(&self, model: &DisjointTypeModel, delta: &ExtComplex) -> Vec<ExtComplex> {
        let n = self.depth();
        let mut out = vec![ExtComplex::ZERO; n + 1];
        out[n] = *delta;
        for j in (0..n).rev() {
            out[j] = model.inverse_offset(self.points[j + 1].z, &self.points[j], &out[j + 1]);
        }
        out
    }

    /// Pushes a level-0 offset forward through `F`; entry `j` is the offset on level `j`.
    pub fn push_offset(&self, model: &DisjointTypeModel, eta: &ExtComplex) -> Vec<ExtComplex> {
        let n = self.depth();
        let mut out = vec![ExtComplex::ZERO; n + 1];
        out[0] = *eta;
        for j in 0..n {
            out[j + 1] = model.forward_offset(&self.points[j], &out[j]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_parsing() {
        let a = ExternalAddress::parse("0, 0,(1)").unwrap();
        assert_eq!(a.preperiod, vec![0, 0]);
        assert_eq!(a.period, vec![1]);
        assert_eq!(a.to_string(), "0,0,(1)");
        assert_eq!(a.prefix(5), vec![0, 0, 1, 1, 1]);
        assert_eq!(ExternalAddress::parse("(2,-1)").unwrap().prefix(3), vec![2, -1, 2]);
        assert_eq!(a.shift(1).to_string(), "0,(1)");
        assert_eq!(a.shift(4).to_string(), "(1)");
        let b = ExternalAddress::parse("3,(1,2,-5)").unwrap();
        assert_eq!(b.shift(2).prefix(4), b.prefix(6)[2..].to_vec());
        assert_eq!(b.bound(), 5);
        assert!(b.check_bound(4).is_err());
        for bad in ["", "0,1", "0(1)", "(", "()", "(1)(2)", "x,(1)"] {
            assert!(ExternalAddress::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn tract_index_rounding() {
        let p = TractIndexedPoint::new(C64::new(17.0, 2.0 * TWO_PI + 0.3));
        assert_eq!(p.tract_index, 2);
        assert!((p.reduced() - C64::new(17.0, 0.3)).norm() < 1e-14);
    }

    #[test]
    fn extended_series() {
        let r = ExtComplex::new(C64::new(0.75, -0.5), -3000);
        let l = ext_log1p(&r);
        assert!((l.ln_abs() - r.ln_abs()).abs() < 1e-15);
        let m = ext_expm1(&r);
        assert!((m.ln_abs() - r.ln_abs()).abs() < 1e-15);
        let x = C64::new(3e-3, 1e-3);
        let lx = ext_log1p(&ExtComplex::from_c64(x)).to_c64();
        assert!((lx - (1.0 + x).ln()).norm() < 1e-17);
        let u = C64::new(1000.0, 0.4);
        let e = ext_exp(u);
        assert!((e.ln_abs() - 1000.0).abs() < 1e-12);
        assert!((e.mant.arg() - 0.4).abs() < 1e-15);
    }
}
