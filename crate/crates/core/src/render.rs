//! Escape/attraction images of `f0` with optional hair overlays.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cauchy::Engine;
use crate::config::HairConfig;
use crate::dynamics::{DisjointTypeModel, ExternalAddress};
use crate::error::HairError;
use crate::hair::{default_params, Tracer};
use crate::C64;

/// Distance to the fixed point below which an orbit counts as attracted.
pub const ATTRACTION_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderJob {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub max_iter: usize,
    pub escape_radius: f64,
    /// Window coordinates are `log z`.
    pub log_coords: bool,
    pub overlay_hairs: Vec<ExternalAddress>,
    pub overlay_samples: usize,
}

impl Default for RenderJob {
    fn default() -> Self {
        RenderJob {
            window: Window { re_min: 15.6, re_max: 17.2, im_min: -0.8, im_max: 0.8 },
            width: 320,
            height: 160,
            max_iter: 16,
            escape_radius: 1e12,
            log_coords: true,
            overlay_hairs: Vec::new(),
            overlay_samples: 400,
        }
    }
}

impl RenderJob {
    pub fn validate(&self, model: &DisjointTypeModel) -> Result<(), String> {
        let w = &self.window;
        if self.width == 0 || self.height == 0 {
            return Err("resolution must be positive".into());
        }
        if !(w.re_max > w.re_min && w.im_max > w.im_min) || ![w.re_min, w.re_max, w.im_min, w.im_max].iter().all(|x| x.is_finite()) {
            return Err("window must be a finite nonempty rectangle".into());
        }
        if !(self.escape_radius > model.r_log.exp()) || !self.escape_radius.is_finite() {
            return Err(format!("escape radius must exceed e^R = {:e}", model.r_log.exp()));
        }
        if self.max_iter == 0 {
            return Err("max_iter must be positive".into());
        }
        Ok(())
    }

    /// Window coordinate of the centre of pixel `(i, j)`; row 0 is the top.
    pub fn pixel_coord(&self, i: usize, j: usize) -> C64 {
        let w = &self.window;
        let dx = (w.re_max - w.re_min) / self.width as f64;
        let dy = (w.im_max - w.im_min) / self.height as f64;
        C64::new(w.re_min + (i as f64 + 0.5) * dx, w.im_max - (j as f64 + 0.5) * dy)
    }

    /// Pixel containing a window coordinate.
    pub fn pixel_of(&self, c: C64) -> Option<(usize, usize)> {
        let w = &self.window;
        let fx = (c.re - w.re_min) / (w.re_max - w.re_min) * self.width as f64;
        let fy = (w.im_max - c.im) / (w.im_max - w.im_min) * self.height as f64;
        if fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64 {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }

    pub fn to_plane(&self, c: C64) -> C64 {
        if self.log_coords {
            c.exp()
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelClass {
    Attracted,
    Escaped,
    Unknown,
}

impl PixelClass {
    pub fn color(&self) -> [u8; 3] {
        match self {
            PixelClass::Attracted => [24, 38, 92],
            PixelClass::Escaped => [246, 226, 170],
            PixelClass::Unknown => [196, 48, 48],
        }
    }
}

pub const OVERLAY_COLOR: [u8; 3] = [0, 0, 0];

/// Classifies the orbit of `z` under `f0`: attracted once within
/// [`ATTRACTION_RADIUS`] of `xi`, escaped once `log|f0|` provably exceeds
/// `log escape_radius`, unknown when the log-space error is too large to decide.
pub fn classify(model: &DisjointTypeModel, engine: &Engine, z: C64, job: &RenderJob) -> PixelClass {
    let log_escape = job.escape_radius.ln();
    let mut z = z;
    for _ in 0..job.max_iter {
        if (z - model.xi).norm() < ATTRACTION_RADIUS {
            return PixelClass::Attracted;
        }
        let (l, err) = match model.log_f0(engine, z) {
            Ok(v) => v,
            Err(_) => return PixelClass::Unknown,
        };
        if l.re - err > log_escape {
            return PixelClass::Escaped;
        }
        // |f0(z) - xi| <= |f0(z)| + |xi|
        if (l.re + err).exp() + model.xi.norm() < ATTRACTION_RADIUS {
            return PixelClass::Attracted;
        }
        if err > 1.0 {
            return PixelClass::Unknown;
        }
        z = l.exp();
    }
    PixelClass::Unknown
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    pub width: usize,
    pub height: usize,
    pub attracted: usize,
    pub escaped: usize,
    pub unknown: usize,
    pub overlay_points: usize,
    pub overlay_escaped: usize,
    pub overlay_unknown: usize,
    pub overlay_attracted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    /// Binary `P6` pixmap.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

pub struct Rendered {
    pub image: Image,
    pub classes: Vec<PixelClass>,
    pub stats: RenderStats,
}

pub fn render(model: &DisjointTypeModel, engine: &Engine, job: &RenderJob, hair: &HairConfig) -> Result<Rendered, HairError> {
    let classes: Vec<PixelClass> = (0..job.height)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..job.width)
                .map(|i| classify(model, engine, job.to_plane(job.pixel_coord(i, j)), job))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut stats = RenderStats { width: job.width, height: job.height, ..Default::default() };
    for c in &classes {
        match c {
            PixelClass::Attracted => stats.attracted += 1,
            PixelClass::Escaped => stats.escaped += 1,
            PixelClass::Unknown => stats.unknown += 1,
        }
    }
    let mut pixels: Vec<[u8; 3]> = classes.iter().map(|c| c.color()).collect();

    if !job.overlay_hairs.is_empty() {
        let tracer = Tracer::new(model, hair);
        let params = default_params(job.overlay_samples, hair.max_param);
        for address in &job.overlay_hairs {
            let poly = tracer.trace_hair(address, 1, &params)?;
            for s in &poly.samples {
                let c = if job.log_coords { s.point } else { s.point.exp() };
                if let Some((i, j)) = job.pixel_of(c) {
                    stats.overlay_points += 1;
                    match classify(model, engine, s.point.exp(), job) {
                        PixelClass::Attracted => stats.overlay_attracted += 1,
                        PixelClass::Escaped => stats.overlay_escaped += 1,
                        PixelClass::Unknown => stats.overlay_unknown += 1,
                    }
                    pixels[j * job.width + i] = OVERLAY_COLOR;
                }
            }
        }
    }
    Ok(Rendered { image: Image { width: job.width, height: job.height, pixels }, classes, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_mapping_roundtrip() {
        let job = RenderJob { width: 7, height: 5, ..Default::default() };
        for j in 0..5 {
            for i in 0..7 {
                assert_eq!(job.pixel_of(job.pixel_coord(i, j)), Some((i, j)));
            }
        }
        assert_eq!(job.pixel_of(C64::new(100.0, 0.0)), None);
    }

    #[test]
    fn ppm_header() {
        let img = Image { width: 2, height: 1, pixels: vec![[1, 2, 3], [4, 5, 6]] };
        let b = img.to_ppm();
        assert!(b.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&b[b.len() - 6..], &[1, 2, 3, 4, 5, 6]);
    }
}
