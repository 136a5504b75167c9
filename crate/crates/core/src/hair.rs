//! Hairs of `F` by inverse-branch pullback of a horizontal base ray, the
//! marker points where a hair crosses `Re z = pi/2 + pi m`, and triangle
//! certificates built from them.
//!
//! A pullback of depth one already places a point within `beta / K` (about
//! `1e-110` for the default model) of the true hair, far below double
//! resolution. Deeper pullbacks of base points with double-sized parameters
//! all land on the endpoint; offsets between nearby points are therefore
//! carried through the branches in extended precision.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::config::HairConfig;
use crate::dynamics::{DisjointTypeModel, ExternalAddress, PullbackChain, TractIndexedPoint};
use crate::error::{DynamicsError, HairError};
use crate::ext::ExtComplex;
use crate::geometry::{koebe_distortion_bound, Triangle};
use crate::C64;

const TWO_PI: f64 = 2.0 * PI;

/// Floor for `delta_obs`, frozen from an oracle run of 6-level certificates
/// (observed minimum 0.0196 over three addresses and three base points).
pub const DELTA_OBS_FLOOR: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HairSample {
    /// Base-ray parameter `t`.
    pub param: f64,
    pub point: C64,
    pub depth: usize,
    /// Distance bound to the true hair, clamped to the smallest positive double.
    pub err: f64,
    /// Natural log of the unclamped bound.
    pub log_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HairPolyline {
    pub address: ExternalAddress,
    pub x_base: f64,
    pub depth: usize,
    pub samples: Vec<HairSample>,
    pub endpoint: C64,
    pub endpoint_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerPoint {
    pub n: usize,
    pub k: usize,
    /// Global index `m = ceil(Re e / pi) + k`, so `Re point = pi/2 + pi m`.
    pub m: i64,
    pub point: C64,
    pub param: f64,
    pub err: f64,
}

impl MarkerPoint {
    /// `Im(point - 2 pi i s_n)`.
    pub fn relative_im(&self, s_n: i64) -> f64 {
        self.point.im - TWO_PI * s_n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateLevel {
    pub n: usize,
    pub w_n: C64,
    pub k_n: usize,
    pub z_a: C64,
    pub z_b: C64,
    pub ambient_degeneracy: f64,
    /// Pulled triangle translated by `-w_0` and scaled by `2^-pulled_scale_log2`.
    pub pulled_triangle: Triangle,
    pub pulled_scale_log2: i64,
    pub degeneracy: f64,
    /// Diameter of the pulled triangle; zero once it underflows.
    pub diameter: f64,
    pub log_diameter: f64,
    pub koebe_bound: f64,
    /// Whether the markers lie on the side of the hair opposite to `w_n`.
    pub side_ok: bool,
    /// Whether the ambient triangle lies in `D(w_n, 4 pi)`.
    pub in_disc: bool,
    /// Relative mismatch after pushing the pulled vertices forward again.
    pub roundtrip_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiggleCertificate {
    pub address: ExternalAddress,
    pub base_param: f64,
    pub base_point: C64,
    pub levels: Vec<CertificateLevel>,
    pub delta_obs: f64,
    /// `log(diam_n / diam_{n+1})` for consecutive levels.
    pub log_shrink: Vec<f64>,
    pub k_expansion: f64,
    pub koebe_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondiffReport {
    pub levels: usize,
    pub log_diameters: Vec<f64>,
    pub mean_log_shrink: f64,
    pub min_log_shrink: f64,
    pub max_degeneracy: f64,
    pub delta_obs: f64,
    pub statement: String,
}

/// Log-spaced parameters `0, 1e-3, ..., max_param`.
pub fn default_params(n: usize, max_param: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0];
    let hi = max_param.log10();
    for j in 1..n {
        let s = if n == 2 { 1.0 } else { (j - 1) as f64 / (n - 2) as f64 };
        out.push(10f64.powf(-3.0 + (hi + 3.0) * s));
    }
    out
}

/// `ln diam` of an extended triangle and the scaled copy.
fn scaled_triangle(v: [ExtComplex; 3]) -> Result<(Triangle, i64, f64), HairError> {
    let e = v.iter().filter(|x| !x.is_zero()).map(|x| x.exp).max().unwrap_or(0);
    let s = ExtComplex::common_scale(&v);
    let tri = Triangle::new(s[0], s[1], s[2])?;
    let log_diam = tri.diameter().ln() + e as f64 * LN_2;
    Ok((tri, e, log_diam))
}

/// Hair computations for one calibrated model.
pub struct Tracer<'a> {
    pub model: &'a DisjointTypeModel,
    pub x_base: f64,
    pub max_param: f64,
    pub iterations: usize,
}

impl<'a> Tracer<'a> {
    pub fn new(model: &'a DisjointTypeModel, cfg: &HairConfig) -> Self {
        let x_base = if cfg.x_base > 0.0 { cfg.x_base } else { 2.0 * model.r_log };
        Tracer { model, x_base, max_param: cfg.max_param, iterations: cfg.marker_iterations }
    }

    /// `X + t + 2 pi i s`.
    pub fn base_point(&self, t: f64, s: i64) -> C64 {
        C64::new(self.x_base + t, TWO_PI * s as f64)
    }

    /// `beta_d K^{-depth}`, as a natural log.
    fn log_err(&self, depth: usize) -> f64 {
        self.model.spec.domain_strip.beta.ln() - depth as f64 * self.model.k_expansion.ln()
    }

    /// Pullback chain of the base point for `t`.
    pub fn chain(&self, address: &ExternalAddress, depth: usize, t: f64) -> Result<PullbackChain, HairError> {
        if depth == 0 {
            return Err(HairError::TooFewLevels { needed: 1, got: 0 });
        }
        let b = self.base_point(t, address.symbol(depth));
        self.model.pullback(address, b, depth).map_err(|e| self.unrealized(address, e))
    }

    fn unrealized(&self, address: &ExternalAddress, e: DynamicsError) -> HairError {
        match e {
            DynamicsError::BranchInversion { .. } => HairError::Unrealized(format!("{address}: {e}")),
            other => HairError::Dynamics(other),
        }
    }

    pub fn trace_hair(&self, address: &ExternalAddress, depth: usize, params: &[f64]) -> Result<HairPolyline, HairError> {
        address.check_bound(self.model.symbol_bound)?;
        if depth == 0 {
            return Err(HairError::TooFewLevels { needed: 1, got: 0 });
        }
        let log_err = self.log_err(depth);
        let err = log_err.exp().max(f64::MIN_POSITIVE);
        let mut samples = Vec::with_capacity(params.len());
        for &t in params {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(HairError::Address(format!("base parameter {t} must be finite and non-negative")));
            }
            let p = self.chain(address, depth, t)?.result();
            samples.push(HairSample { param: t, point: p.z, depth, err, log_err });
        }
        let (endpoint, endpoint_err, _) = self.endpoint(address)?;
        Ok(HairPolyline { address: address.clone(), x_base: self.x_base, depth, samples, endpoint, endpoint_err })
    }

    /// Limit of `phi_n(X + 2 pi i s_n)`: stops once two depths agree to rounding.
    /// Returns the estimate, its error bound and the depth used.
    pub fn endpoint(&self, address: &ExternalAddress) -> Result<(C64, f64, usize), HairError> {
        let mut prev = self.chain(address, 1, 0.0)?.result().z;
        for n in 2..=64 {
            let cur = self.chain(address, n, 0.0)?.result().z;
            let diff = (cur - prev).norm();
            if diff <= 4.0 * f64::EPSILON * cur.norm() {
                let err = diff + self.log_err(n).exp() + 4.0 * f64::EPSILON * cur.norm();
                return Ok((cur, err, n));
            }
            prev = cur;
        }
        Err(HairError::Inconsistent(format!("endpoint of {address} did not converge")))
    }

    /// `phi_d(b_d) - phi_{d+1}(b_{d+1})` for `d = 1..=max_depth`, in extended precision.
    pub fn depth_differences(&self, address: &ExternalAddress, t: f64, max_depth: usize) -> Result<Vec<ExtComplex>, HairError> {
        let mut out = Vec::with_capacity(max_depth);
        for d in 1..=max_depth {
            let chain = self.chain(address, d, t)?;
            let bd = chain.points[d].z;
            let q = self
                .model
                .inverse_branch(self.base_point(t, address.symbol(d + 1)), address.symbol(d))
                .map_err(|e| self.unrealized(address, e))?;
            let offs = chain.pull_offset(self.model, &ExtComplex::from_c64(q.z - bd));
            out.push(offs[0]);
        }
        Ok(out)
    }

    /// Point on the level-`n` hair (the hair of `sigma^n s`) for parameter `t`.
    fn level_point(&self, address: &ExternalAddress, n: usize, t: f64) -> Result<TractIndexedPoint, HairError> {
        let w = self.base_point(t, address.symbol(n + 1));
        self.model.inverse_branch(w, address.symbol(n)).map_err(|e| self.unrealized(address, e))
    }

    /// Markers `k = 0..count` on the level-`n` hair.
    pub fn find_markers(&self, address: &ExternalAddress, n: usize, count: usize) -> Result<Vec<MarkerPoint>, HairError> {
        let shifted = address.shift(n);
        let (e, _, _) = self.endpoint(&shifted)?;
        let base = (e.re / PI).ceil() as i64;
        (0..count).map(|k| self.marker(address, n, base, k)).collect()
    }

    fn marker(&self, address: &ExternalAddress, n: usize, base: i64, k: usize) -> Result<MarkerPoint, HairError> {
        let m = base + k as i64;
        let x = PI / 2.0 + PI * m as f64;
        let re_at = |s: f64| -> Result<(f64, C64), HairError> {
            let t = (s.exp() - self.x_base).max(0.0);
            let p = self.level_point(address, n, t)?;
            Ok((t, p.z))
        };
        let (mut lo, mut hi) = (self.x_base.ln(), (self.x_base + self.max_param).ln());
        let (_, zlo) = re_at(lo)?;
        let (_, zhi) = re_at(hi)?;
        if !(zlo.re <= x && zhi.re >= x) {
            return Err(HairError::Refinement { level: n, x });
        }
        for _ in 0..self.iterations {
            let mid = 0.5 * (lo + hi);
            if re_at(mid)?.1.re < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t, z) = re_at(0.5 * (lo + hi))?;
        let width = (re_at(hi)?.1 - re_at(lo)?.1).norm();
        // snap the real part: the bisection bracket is below the error bound
        let point = C64::new(x, z.im);
        let err = width + (z.re - x).abs() + self.log_err(1).exp();
        Ok(MarkerPoint { n, k, m, point, param: t, err })
    }

    /// Triangle certificate on levels `0..levels` for the hair point
    /// `w_0 = phi_levels(X + w0_param + 2 pi i s_levels)`.
    pub fn build_certificate(&self, address: &ExternalAddress, w0_param: f64, levels: usize) -> Result<WiggleCertificate, HairError> {
        address.check_bound(self.model.symbol_bound)?;
        if levels < 2 {
            return Err(HairError::TooFewLevels { needed: 2, got: levels });
        }
        let chain = self.chain(address, levels, w0_param)?;
        let r = self.model.r_log;
        let koebe_limit = koebe_distortion_bound(r, 4.0 * PI)?;
        let mut out: Vec<CertificateLevel> = Vec::with_capacity(levels);
        for n in 0..levels {
            let wp = chain.points[n];
            let wn = wp.z;
            if wn.re <= 4.0 * PI {
                return Err(HairError::TooShallow { level: n, re: wn.re });
            }
            let sn = address.symbol(n);
            let im_w = wn.im - TWO_PI * sn as f64;
            let shifted = address.shift(n);
            let (e, _, _) = self.endpoint(&shifted)?;
            let base = (e.re / PI).ceil() as i64;
            // smallest k with the marker right of w_n on the opposite side
            let mut chosen: Option<(usize, MarkerPoint, bool)> = None;
            let mut fallback: Option<(usize, MarkerPoint)> = None;
            for k in 0..32 {
                let mk = match self.marker(address, n, base, k) {
                    Ok(mk) => mk,
                    Err(HairError::Refinement { .. }) => break,
                    Err(e) => return Err(e),
                };
                if mk.point.re <= wn.re {
                    continue;
                }
                if fallback.is_none() {
                    fallback = Some((k, mk));
                }
                let y = mk.relative_im(sn);
                if im_w != 0.0 && y.abs() > 0.2 && y.signum() != im_w.signum() {
                    chosen = Some((k, mk, true));
                    break;
                }
            }
            let (k_n, za, side_ok) = match (chosen, fallback) {
                (Some(c), _) => c,
                (None, Some((k, mk))) => (k, mk, false),
                (None, None) => return Err(HairError::Refinement { level: n, x: wn.re }),
            };
            let zb = self.marker(address, n, base, k_n + 1)?;
            let ambient = Triangle::new(wn, za.point, zb.point)?;
            let in_disc = ambient.vertices().iter().all(|v| (v - wn).norm() < 4.0 * PI);

            let sub = PullbackChain { address: chain.address[..n].to_vec(), points: chain.points[..=n].to_vec() };
            let da = ExtComplex::from_c64(za.point - wn);
            let db = ExtComplex::from_c64(zb.point - wn);
            let pa = sub.pull_offset(self.model, &da)[0];
            let pb = sub.pull_offset(self.model, &db)[0];
            let (tri, scale, log_diam) = scaled_triangle([ExtComplex::ZERO, pa, pb])?;
            let back_a = sub.push_offset(self.model, &pa)[n];
            let back_b = sub.push_offset(self.model, &pb)[n];
            let rel = |x: &ExtComplex, y: &ExtComplex| x.sub(y).ln_abs() - y.ln_abs();
            let roundtrip_err = rel(&back_a, &da).max(rel(&back_b, &db)).exp();
            let koebe_bound = koebe_distortion_bound(wn.re, 4.0 * PI)?;
            out.push(CertificateLevel {
                n,
                w_n: wn,
                k_n,
                z_a: za.point,
                z_b: zb.point,
                ambient_degeneracy: ambient.degeneracy(),
                pulled_triangle: tri,
                pulled_scale_log2: scale,
                degeneracy: tri.degeneracy(),
                diameter: log_diam.exp(),
                log_diameter: log_diam,
                koebe_bound,
                side_ok,
                in_disc,
                roundtrip_err,
            });
        }
        let log_shrink = out.windows(2).map(|w| w[0].log_diameter - w[1].log_diameter).collect();
        let max_deg = out.iter().map(|l| l.degeneracy).fold(0.0, f64::max);
        Ok(WiggleCertificate {
            address: address.clone(),
            base_param: w0_param,
            base_point: chain.points[0].z,
            levels: out,
            delta_obs: 1.0 - max_deg,
            log_shrink,
            k_expansion: self.model.k_expansion,
            koebe_limit,
        })
    }
}

/// Summary of a certificate; errors if the certificate breaks its invariants.
pub fn nondiff_report(cert: &WiggleCertificate) -> Result<NondiffReport, HairError> {
    let n = cert.levels.len();
    if n < 3 {
        return Err(HairError::TooFewLevels { needed: 3, got: n });
    }
    if cert.log_shrink.iter().any(|&s| !(s > 0.0)) {
        return Err(HairError::Inconsistent("diameters are not strictly decreasing".into()));
    }
    if !(cert.delta_obs > 0.0) {
        return Err(HairError::Inconsistent(format!("a pulled triangle is degenerate (delta_obs = {})", cert.delta_obs)));
    }
    if let Some(l) = cert.levels.iter().find(|l| l.koebe_bound > cert.koebe_limit) {
        return Err(HairError::Inconsistent(format!("Koebe bound {} exceeds {} at level {}", l.koebe_bound, cert.koebe_limit, l.n)));
    }
    let mean = cert.log_shrink.iter().sum::<f64>() / cert.log_shrink.len() as f64;
    let min = cert.log_shrink.iter().copied().fold(f64::INFINITY, f64::min);
    let max_degeneracy = 1.0 - cert.delta_obs;
    let statement = format!(
        "Finite-scale certificate for address {} at {} levels: pulled triangle diameters shrink by a factor of about 10^{:.1} per level \
         and every degeneracy is at most {:.6} (delta_obs = {:.6}). This is consistent with, but not a proof of, \
         non-differentiability of the hair at the base point.",
        cert.address,
        n,
        mean / std::f64::consts::LN_10,
        max_degeneracy,
        cert.delta_obs
    );
    Ok(NondiffReport {
        levels: n,
        log_diameters: cert.levels.iter().map(|l| l.log_diameter).collect(),
        mean_log_shrink: mean,
        min_log_shrink: min,
        max_degeneracy,
        delta_obs: cert.delta_obs,
        statement,
    })
}
