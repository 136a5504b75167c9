//! Cauchy integrals `(1/2 pi i) int e^{G(zeta)} / (zeta - z)^p d zeta` over a
//! parametrized contour, with Gauss-Kronrod panels, a circular detour
//! around evaluation points close to the contour, and a rigorous tail term.

use std::f64::consts::PI;

use crate::error::CauchyError;
use crate::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 40;

/// The 15 Kronrod abscissae on `[-1, 1]` in increasing order with their
/// Kronrod and (zero for non-Gauss nodes) Gauss weights.
fn rule() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    for j in 0..8 {
        let g = if j % 2 == 1 { WG[(j - 1) / 2] } else { 0.0 };
        out[j] = (-XGK[j], WGK[j], g);
        out[14 - j] = (XGK[j], WGK[j], g);
    }
    out
}

/// Kronrod and Gauss estimates of `int_a^b f`.
pub fn gauss_kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, C64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = C64::new(0.0, 0.0);
    let mut g = C64::new(0.0, 0.0);
    for (x, wk, wg) in rule() {
        let v = f(c + h * x);
        k += v * wk;
        g += v * wg;
    }
    (k * h, g * h)
}

/// Adaptive bisection until `|K - G| <= tol` on every piece.
/// Returns the Kronrod value and the summed `|K - G|`.
pub fn adaptive<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> (C64, f64) {
    adaptive_inner(f, a, b, tol, 0)
}

fn adaptive_inner<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> (C64, f64) {
    let (k, g) = gauss_kronrod(f, a, b);
    let err = (k - g).norm();
    // below this the difference is rounding noise and bisection cannot help
    let floor = 64.0 * f64::EPSILON * (k.norm() + g.norm());
    if err <= tol.max(floor) || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (1.0 + a.abs()) || !err.is_finite() {
        return (k, err);
    }
    let m = 0.5 * (a + b);
    let (k1, e1) = adaptive_inner(f, a, m, 0.5 * tol, depth + 1);
    let (k2, e2) = adaptive_inner(f, m, b, 0.5 * tol, depth + 1);
    (k1 + k2, e1 + e2)
}

/// A contour together with a holomorphic density `e^{G}`.
pub trait CauchyTract: Sync + Send {
    /// Point and derivative at parameter `t` (NaN on failure).
    fn eval(&self, t: f64) -> (C64, C64);
    /// Interior kinks of the parametrization.
    fn breakpoints(&self) -> Vec<f64>;
    /// `G(zeta)`; the density is `exp(G)`.
    fn exponent(&self, zeta: C64) -> C64;
    /// Whether `G` is holomorphic at `zeta`.
    fn in_domain(&self, zeta: C64) -> bool;
    /// Whether `z` lies in the region bounded by the contour on its right.
    fn contains(&self, z: C64) -> bool;
    /// Bound on `int_{|t| >= t_abs} |e^G| |gamma'| dt` over both ends.
    fn tail_mass(&self, t_abs: f64) -> f64;
    /// Lower bound for the distance from `z` to the contour beyond `|t| >= t_abs`.
    fn tail_distance(&self, z: C64, t_abs: f64) -> f64;
}

/// Smallest truncation parameter in `[lo, hi]` whose tail term is below `target`.
pub fn truncation_for<T: CauchyTract + ?Sized>(tract: &T, lo: f64, hi: f64, target: f64) -> f64 {
    if tract.tail_mass(lo) <= target {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if tract.tail_mass(m) <= target {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    zeta: C64,
    /// Kronrod weight times `gamma' e^G` times the half-length.
    wk: C64,
    wg: C64,
}

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    b: f64,
    nodes: [Node; 15],
}

/// Result of a Cauchy integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: C64,
    pub abs_error: f64,
    /// Estimated distance from `z` to the contour.
    pub distance: f64,
    pub deformed: bool,
}

/// Precomputed panel table for one contour.
pub struct CauchyIntegral<T: CauchyTract> {
    pub tract: T,
    pub t_min: f64,
    pub t_max: f64,
    pub kappa: f64,
    pub eps: f64,
    panels: Vec<Panel>,
    /// `(t, zeta)` of every node and panel endpoint, sorted by `t`.
    samples: Vec<(f64, C64)>,
}

impl<T: CauchyTract> CauchyIntegral<T> {
    /// Panels on `[-t_trunc, t_trunc]` with chord at most `max_chord`.
    pub fn new(tract: T, t_trunc: f64, max_chord: f64, kappa: f64, eps: f64) -> Result<Self, CauchyError> {
        if !(max_chord > 0.0 && kappa > 0.0 && eps > 0.0 && t_trunc > 0.0) {
            return Err(CauchyError::Config("step, kappa, eps and truncation must be positive".into()));
        }
        let mut knots = vec![-t_trunc];
        let mut bps = tract.breakpoints();
        bps.sort_by(f64::total_cmp);
        knots.extend(bps.into_iter().filter(|&b| b > -t_trunc && b < t_trunc));
        knots.push(t_trunc);
        let mut panels = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut speed: f64 = 0.0;
            for j in 0..=32 {
                let (_, d) = tract.eval(a + (b - a) * j as f64 / 32.0);
                speed = speed.max(d.norm());
            }
            if !speed.is_finite() {
                return Err(CauchyError::Config(format!("contour evaluation failed on [{a}, {b}]")));
            }
            let n = ((b - a) * speed * 1.2 / max_chord).ceil().max(1.0) as usize;
            for j in 0..n {
                let pa = a + (b - a) * j as f64 / n as f64;
                let pb = a + (b - a) * (j + 1) as f64 / n as f64;
                panels.push(Self::make_panel(&tract, pa, pb)?);
            }
        }
        let mut samples = Vec::with_capacity(panels.len() * 16 + 1);
        for p in &panels {
            samples.push((p.a, tract.eval(p.a).0));
            samples.extend(p.nodes.iter().map(|n| (n.t, n.zeta)));
        }
        if let Some(last) = panels.last() {
            samples.push((last.b, tract.eval(last.b).0));
        }
        Ok(CauchyIntegral {
            tract,
            t_min: -t_trunc,
            t_max: t_trunc,
            kappa,
            eps,
            panels,
            samples,
        })
    }

    fn make_panel(tract: &T, a: f64, b: f64) -> Result<Panel, CauchyError> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut nodes = [Node {
            t: 0.0,
            zeta: C64::new(0.0, 0.0),
            wk: C64::new(0.0, 0.0),
            wg: C64::new(0.0, 0.0),
        }; 15];
        for (slot, (x, wk, wg)) in nodes.iter_mut().zip(rule()) {
            let t = c + h * x;
            let (zeta, d) = tract.eval(t);
            let dens = tract.exponent(zeta).exp();
            let f = dens * d * h;
            if !(f.re.is_finite() && f.im.is_finite()) {
                return Err(CauchyError::Config(format!("density not finite at t = {t}")));
            }
            *slot = Node { t, zeta, wk: f * wk, wg: f * wg };
        }
        Ok(Panel { a, b, nodes })
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Sorted `(t, zeta)` samples of the truncated contour.
    pub fn samples(&self) -> &[(f64, C64)] {
        &self.samples
    }

    fn integrand(&self, t: f64, z: C64, p: i32) -> C64 {
        let (zeta, d) = self.tract.eval(t);
        let dens = self.tract.exponent(zeta).exp();
        dens * d / (zeta - z).powi(p)
    }

    /// Distance from `z` to the truncated contour and the closest parameter.
    pub fn distance(&self, z: C64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut idx = 0;
        for (i, &(t, zeta)) in self.samples.iter().enumerate() {
            let d = (zeta - z).norm();
            if d < best.0 {
                best = (d, t);
                idx = i;
            }
        }
        // golden-section refinement between the neighbouring samples
        let lo = self.samples[idx.saturating_sub(1)].0;
        let hi = self.samples[(idx + 1).min(self.samples.len() - 1)].0;
        let dist = |t: f64| (self.tract.eval(t).0 - z).norm();
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (dist(c), dist(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = dist(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = dist(d);
            }
        }
        let (tm, fm) = if fc < fd { (c, fc) } else { (d, fd) };
        if fm < best.0 {
            (fm, tm)
        } else {
            best
        }
    }

    /// Parameter in `[ta, tb]` where `|gamma(t) - z|` crosses `kappa`.
    fn crossing(&self, z: C64, ta: f64, tb: f64) -> f64 {
        let outside_a = (self.tract.eval(ta).0 - z).norm() >= self.kappa;
        let (mut a, mut b) = (ta, tb);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            let out = (self.tract.eval(m).0 - z).norm() >= self.kappa;
            if out == outside_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Unwrapped change of `arg(gamma(t) - z)` over `[ta, tb]`.
    fn winding(&self, z: C64, ta: f64, tb: f64, depth: usize) -> f64 {
        let za = self.tract.eval(ta).0 - z;
        let zb = self.tract.eval(tb).0 - z;
        let d = (zb / za).arg();
        if d.abs() < PI / 4.0 || depth > 60 {
            return d;
        }
        let m = 0.5 * (ta + tb);
        self.winding(z, ta, m, depth + 1) + self.winding(z, m, tb, depth + 1)
    }

    /// `(1/2 pi i) int e^G / (zeta - z)^p d zeta`, `p` in `{1, 2}`.
    pub fn integrate(&self, z: C64, p: i32) -> Result<Integral, CauchyError> {
        let (dist, t_star) = self.distance(z);
        if dist < 1e-12 {
            return Err(CauchyError::OnContour { z, dist });
        }
        let tol_panel = self.eps / (20.0 * self.panels.len() as f64);
        let mut sum = C64::new(0.0, 0.0);
        let mut err = 0.0;
        let mut deformed = false;
        let mut skip: Option<(f64, f64)> = None;

        if dist < self.kappa {
            let (r1, r2) = self.detour_range(z, t_star)?;
            if r1 > self.t_min && r2 < self.t_max {
                let w1 = self.tract.eval(r1).0 - z;
                let w2 = self.tract.eval(r2).0 - z;
                let psi1 = w1.arg();
                let psi2 = w2.arg();
                let unwrapped = self.winding(z, r1, r2, 0);
                let d0 = (psi2 - psi1).rem_euclid(2.0 * PI);
                let sweep = d0 + 2.0 * PI * ((unwrapped - d0) / (2.0 * PI)).round();
                let kappa = self.kappa;
                let f = |psi: f64| {
                    let e = C64::from_polar(kappa, psi);
                    let zeta = z + e;
                    if !self.tract.in_domain(zeta) {
                        return C64::new(f64::NAN, f64::NAN);
                    }
                    self.tract.exponent(zeta).exp() * C64::i() * e.powi(1 - p)
                };
                let pieces = ((sweep.abs() / (PI / 4.0)).ceil() as usize).max(1);
                for j in 0..pieces {
                    let a = psi1 + sweep * j as f64 / pieces as f64;
                    let b = psi1 + sweep * (j + 1) as f64 / pieces as f64;
                    let (v, e) = adaptive(&f, a, b, tol_panel);
                    sum += v;
                    err += e;
                }
                if !(sum.re.is_finite() && sum.im.is_finite()) {
                    return Err(CauchyError::Deformation {
                        z,
                        reason: "detour leaves the domain of the density".into(),
                    });
                }
                skip = Some((r1, r2));
                deformed = true;
            }
        }

        let f = |t: f64| self.integrand(t, z, p);
        for panel in &self.panels {
            let (a, b) = (panel.a, panel.b);
            if let Some((r1, r2)) = skip {
                if b <= r1 || a >= r2 {
                    // untouched panel
                } else {
                    if a < r1 {
                        let (v, e) = adaptive(&f, a, r1, tol_panel);
                        sum += v;
                        err += e;
                    }
                    if b > r2 {
                        let (v, e) = adaptive(&f, r2, b, tol_panel);
                        sum += v;
                        err += e;
                    }
                    continue;
                }
            }
            let mut k = C64::new(0.0, 0.0);
            let mut g = C64::new(0.0, 0.0);
            for n in &panel.nodes {
                let kern = (n.zeta - z).powi(-p);
                k += n.wk * kern;
                g += n.wg * kern;
            }
            let e = (k - g).norm();
            if e <= tol_panel {
                sum += k;
                err += e;
            } else {
                let m = 0.5 * (a + b);
                let (v1, e1) = adaptive(&f, a, m, 0.5 * tol_panel);
                let (v2, e2) = adaptive(&f, m, b, 0.5 * tol_panel);
                sum += v1 + v2;
                err += e1 + e2;
            }
        }

        // truncated tails
        let t_abs = self.t_max.min(-self.t_min);
        let mass = self.tract.tail_mass(t_abs);
        let dtail = self.tract.tail_distance(z, t_abs);
        let mut tail = mass / (2.0 * PI * dtail.max(self.kappa).powi(p));
        if dtail < self.kappa {
            // a detour around z would cross the density near z
            let mut worst: f64 = 0.0;
            for j in 0..32 {
                let zeta = z + C64::from_polar(self.kappa, 2.0 * PI * j as f64 / 32.0);
                if self.tract.in_domain(zeta) {
                    worst = worst.max(self.tract.exponent(zeta).re.exp());
                }
            }
            tail += worst * self.kappa.powi(1 - p);
        }

        let value = sum / (2.0 * PI * C64::i());
        Ok(Integral {
            value,
            abs_error: err / (2.0 * PI) + tail,
            distance: dist,
            deformed,
        })
    }

    /// First and last parameters where the contour enters/leaves `D(z, kappa)`.
    fn detour_range(&self, z: C64, t_star: f64) -> Result<(f64, f64), CauchyError> {
        let inside = |zeta: C64| (zeta - z).norm() < self.kappa;
        let mut first: Option<usize> = None;
        let mut last: Option<usize> = None;
        for (i, &(t, zeta)) in self.samples.iter().enumerate() {
            if inside(zeta) || (t <= t_star && i + 1 < self.samples.len() && self.samples[i + 1].0 > t_star) {
                if first.is_none() {
                    first = Some(i);
                }
                last = Some(i);
            }
        }
        let (fi, li) = match (first, last) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(CauchyError::Deformation { z, reason: "no contour sample near z".into() })
            }
        };
        // bracket: the sample before the first inside one is outside
        let t_first_in = if inside(self.samples[fi].1) { self.samples[fi].0 } else { t_star.max(self.samples[fi].0) };
        let t_last_in = if inside(self.samples[li].1) { self.samples[li].0 } else { t_star.min(self.samples[(li + 1).min(self.samples.len() - 1)].0) };
        let r1 = if fi == 0 { self.t_min } else { self.crossing(z, self.samples[fi - 1].0, t_first_in) };
        let r2 = if li + 1 >= self.samples.len() {
            self.t_max
        } else {
            let mut j = li + 1;
            while j < self.samples.len() && inside(self.samples[j].1) {
                j += 1;
            }
            if j >= self.samples.len() {
                self.t_max
            } else {
                self.crossing(z, self.samples[j].0, t_last_in)
            }
        };
        Ok((r1, r2))
    }
}
