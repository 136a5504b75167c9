//! Planar triangle geometry: the degeneracy measure, interior angles,
//! sampled distortion of univalent maps and the Koebe distortion bound.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::C64;

/// `1 - D` below this counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// A triangle with three pairwise distinct, finite vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    vertices: [C64; 3],
}

impl Triangle {
    pub fn new(z1: C64, z2: C64, z3: C64) -> Result<Self, GeometryError> {
        let vertices = [z1, z2, z3];
        if vertices.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(GeometryError::InvalidTriangle);
        }
        if z1 == z2 || z1 == z3 || z2 == z3 {
            return Err(GeometryError::InvalidTriangle);
        }
        let tri = Triangle { vertices };
        if tri.sides().iter().any(|&d| d <= 0.0) {
            return Err(GeometryError::InvalidTriangle);
        }
        Ok(tri)
    }

    pub fn vertices(&self) -> [C64; 3] {
        self.vertices
    }

    /// Side lengths `[d23, d13, d12]`, i.e. side `i` is opposite vertex `i`.
    pub fn sides(&self) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        [(b - c).norm(), (a - c).norm(), (a - b).norm()]
    }

    pub fn diameter(&self) -> f64 {
        let s = self.sides();
        s[0].max(s[1]).max(s[2])
    }

    /// Max over the three labelings of `d_jk / (d_jl + d_kl)`.
    ///
    /// Lies in `[1/2, 1]`; equals 1 exactly for collinear vertices.
    pub fn degeneracy(&self) -> f64 {
        let [d0, d1, d2] = self.sides();
        let q0 = d0 / (d1 + d2);
        let q1 = d1 / (d0 + d2);
        let q2 = d2 / (d0 + d1);
        q0.max(q1).max(q2).min(1.0)
    }

    pub fn is_collinear(&self) -> bool {
        1.0 - self.degeneracy() < COLLINEAR_TOL
    }

    /// Interior angles at the three vertices, in vertex order.
    pub fn angles(&self) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let at = |p: C64, q: C64, r: C64| {
            let u = q - p;
            let v = r - p;
            let cross = u.re * v.im - u.im * v.re;
            let dot = u.re * v.re + u.im * v.im;
            cross.abs().atan2(dot)
        };
        [at(a, b, c), at(b, c, a), at(c, a, b)]
    }

    /// Applies `f` to every vertex.
    pub fn map<F: Fn(C64) -> C64>(&self, f: F) -> Result<Self, GeometryError> {
        let [a, b, c] = self.vertices;
        Triangle::new(f(a), f(b), f(c))
    }
}

/// Degeneracy of `tri`; see [`Triangle::degeneracy`].
pub fn degeneracy(tri: &Triangle) -> f64 {
    tri.degeneracy()
}

pub fn triangle_angles(tri: &Triangle) -> [f64; 3] {
    tri.angles()
}

/// Sampled sup/inf ratio of `|f'|` over a set.
///
/// This is a sampling estimate and therefore only a lower bound on the true
/// distortion; certificates use [`koebe_distortion_bound`] wherever a
/// guarantee is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionEstimate {
    pub sup_abs_deriv: f64,
    pub inf_abs_deriv: f64,
    pub ratio: f64,
}

impl DistortionEstimate {
    pub fn from_magnitudes(mags: &[f64]) -> Result<Self, GeometryError> {
        if mags.len() < 2 {
            return Err(GeometryError::TooFewSamples(mags.len()));
        }
        let mut sup = 0.0f64;
        let mut inf = f64::INFINITY;
        for (index, &m) in mags.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(GeometryError::NonUnivalent { index });
            }
            sup = sup.max(m);
            inf = inf.min(m);
        }
        Ok(DistortionEstimate {
            sup_abs_deriv: sup,
            inf_abs_deriv: inf,
            ratio: sup / inf,
        })
    }
}

/// Sampled distortion of a map with derivative `deriv` over `samples`.
pub fn distortion_on_set<F>(deriv: F, samples: &[C64]) -> Result<DistortionEstimate, GeometryError>
where
    F: Fn(C64) -> C64,
{
    let mags: Vec<f64> = samples.iter().map(|&z| deriv(z).norm()).collect();
    DistortionEstimate::from_magnitudes(&mags)
}

/// `((r+s)/(r-s))^4`: bound on the distortion over `D(z0, s)` of any map
/// univalent on `D(z0, r)`.
pub fn koebe_distortion_bound(r: f64, s: f64) -> Result<f64, GeometryError> {
    if !(s >= 0.0) || !(s < r) {
        return Err(GeometryError::Domain { r, s });
    }
    Ok(((r + s) / (r - s)).powi(4))
}

/// True iff a univalent map of the unit disc sends `D(0, r)` onto a convex set.
pub fn convexity_radius_check(r: f64) -> bool {
    r <= std::f64::consts::SQRT_2 - 1.0
}

/// Degeneracy statistics of triangles `Δ(z1, γ(t0), z2)` at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub scale: f64,
    /// `None` when fewer than two samples fall inside the scale.
    pub min_degeneracy: Option<f64>,
    pub max_degeneracy: Option<f64>,
    pub samples: usize,
}

/// For each radius `eps` in `scales`, the min and max degeneracy over all
/// triangles `Δ(z1, curve[center], z2)` with `z1, z2` sampled within `eps`
/// of the center. For a curve with a nonzero derivative at the center the
/// minimum tends to 1 as `eps -> 0`.
///
/// Scales holding fewer than two samples are reported with `None`. At most
/// `max_per_scale` samples, evenly strided in index, are used per scale.
pub fn smooth_curve_degeneracy_profile(
    curve: &[C64],
    center: usize,
    scales: &[f64],
    max_per_scale: usize,
) -> Vec<ScaleProfile> {
    let p = curve[center];
    scales
        .iter()
        .map(|&eps| {
            let mut near: Vec<(usize, C64)> = curve
                .iter()
                .enumerate()
                .filter(|&(i, z)| i != center && (*z - p).norm() < eps && *z != p)
                .map(|(i, z)| (i, *z))
                .collect();
            let keep = max_per_scale.max(2);
            if near.len() > keep {
                // evenly strided subset so the whole scale stays represented
                let stride = near.len() as f64 / keep as f64;
                near = (0..keep).map(|j| near[(j as f64 * stride) as usize]).collect();
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for a in 0..near.len() {
                for b in (a + 1)..near.len() {
                    if let Ok(tri) = Triangle::new(near[a].1, p, near[b].1) {
                        let d = tri.degeneracy();
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                }
            }
            if near.len() < 2 || !lo.is_finite() {
                log::info!("scale {eps:e} skipped: {} samples inside", near.len());
                ScaleProfile {
                    scale: eps,
                    min_degeneracy: None,
                    max_degeneracy: None,
                    samples: near.len(),
                }
            } else {
                ScaleProfile {
                    scale: eps,
                    min_degeneracy: Some(lo),
                    max_degeneracy: Some(hi),
                    samples: near.len(),
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Brute force over all six orderings of the vertices.
    fn degeneracy_oracle(z: [C64; 3]) -> f64 {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms
            .iter()
            .map(|&[j, k, l]| {
                (z[j] - z[k]).norm() / ((z[j] - z[l]).norm() + (z[k] - z[l]).norm())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn collinear_is_one() {
        let t = Triangle::new(c(0., 0.), c(1., 0.), c(2., 0.)).unwrap();
        assert_eq!(t.degeneracy(), 1.0);
        assert!(t.is_collinear());
    }

    #[test]
    fn equilateral_is_half() {
        let t = Triangle::new(c(0., 0.), c(1., 0.), C64::from_polar(1.0, FRAC_PI_3)).unwrap();
        assert!((t.degeneracy() - 0.5).abs() < 1e-15);
        for a in t.angles() {
            assert!((a - FRAC_PI_3).abs() < 1e-12);
        }
    }

    #[test]
    fn right_isoceles_matches_oracle() {
        let z = [c(0., 0.), c(1., 0.), c(0., 1.)];
        let expected = degeneracy_oracle(z);
        assert!((expected - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let t = Triangle::new(z[0], z[1], z[2]).unwrap();
        assert!((t.degeneracy() - expected).abs() < 1e-15);
        let [a, b, cc] = t.angles();
        assert!((a - FRAC_PI_2).abs() < 1e-12);
        assert!((b - FRAC_PI_4).abs() < 1e-12);
        assert!((cc - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn near_collinear() {
        let t = Triangle::new(c(0., 0.), c(1., 0.), c(2., 1e-6)).unwrap();
        let min_angle = t.angles().into_iter().fold(PI, f64::min);
        assert!(min_angle < 1e-5);
        assert!(t.degeneracy() > 1.0 - 1e-6);
    }

    #[test]
    fn coincident_vertices_rejected() {
        assert_eq!(
            Triangle::new(c(1., 1.), c(1., 1.), c(0., 0.)),
            Err(GeometryError::InvalidTriangle)
        );
        assert!(Triangle::new(c(f64::NAN, 0.), c(1., 1.), c(0., 0.)).is_err());
    }

    #[test]
    fn distortion_examples() {
        let affine = distortion_on_set(|_| c(2.0, -1.0), &[c(0., 0.), c(1., 1.), c(3., 0.)]).unwrap();
        assert_eq!(affine.ratio, 1.0);
        let two = DistortionEstimate::from_magnitudes(&[1.0, 2.0]).unwrap();
        assert_eq!(two.ratio, 2.0);
        // z -> z^2 on the boundary of D(3, 0.5): |2z| ranges over [5, 7].
        let pts: Vec<C64> = (0..8)
            .map(|j| c(3.0, 0.0) + C64::from_polar(0.5, j as f64 * PI / 4.0))
            .collect();
        let sq = distortion_on_set(|z| 2.0 * z, &pts).unwrap();
        assert!((sq.ratio - 1.4).abs() < 1e-14);
    }

    #[test]
    fn distortion_errors() {
        assert_eq!(
            DistortionEstimate::from_magnitudes(&[1.0]),
            Err(GeometryError::TooFewSamples(1))
        );
        assert_eq!(
            DistortionEstimate::from_magnitudes(&[1.0, 0.0]),
            Err(GeometryError::NonUnivalent { index: 1 })
        );
    }

    #[test]
    fn koebe_examples() {
        assert_eq!(koebe_distortion_bound(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(koebe_distortion_bound(2.0, 1.0).unwrap(), 81.0);
        // (62.566 / 37.434)^4
        let v = koebe_distortion_bound(50.0, 4.0 * PI).unwrap();
        assert!((v - 7.803_979_260_116_64).abs() < 1e-12);
        assert!(koebe_distortion_bound(1.0, 1.0).is_err());
        assert!(koebe_distortion_bound(1.0, -0.1).is_err());
    }

    #[test]
    fn convexity_examples() {
        assert!(convexity_radius_check(0.4));
        assert!(!convexity_radius_check(0.5));
        assert!(convexity_radius_check(2.0 * PI / 50.0));
    }

    #[test]
    fn profile_on_segment_and_circle() {
        let seg: Vec<C64> = (0..401).map(|j| c(-1.0 + j as f64 / 200.0, 0.5 * (-1.0 + j as f64 / 200.0))).collect();
        for p in smooth_curve_degeneracy_profile(&seg, 200, &[0.5, 0.1, 0.02], 60) {
            assert!((1.0 - p.min_degeneracy.unwrap()).abs() < 1e-12);
        }
        // Unit circle sampled densely around angle 0.
        let n = 20001;
        let circle: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, -0.2 + 0.4 * j as f64 / (n - 1) as f64))
            .collect();
        let prof = smooth_curve_degeneracy_profile(&circle, n / 2, &[0.1, 0.01, 0.001], 40);
        let gaps: Vec<f64> = prof.iter().map(|p| 1.0 - p.min_degeneracy.unwrap()).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        // 1 - D scales like eps^2: a tenfold smaller scale gives ~100x smaller gap.
        for w in gaps.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 30.0 && ratio < 300.0, "ratio {ratio}");
        }
    }

    #[test]
    fn profile_skips_sparse_scales() {
        let pts = vec![c(0., 0.), c(1., 0.), c(2., 0.)];
        let prof = smooth_curve_degeneracy_profile(&pts, 1, &[0.5], 10);
        assert!(prof[0].min_degeneracy.is_none());
    }
}
