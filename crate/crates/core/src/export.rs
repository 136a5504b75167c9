//! Bit-stable serialization: CSV with 17 significant digits, JSON with
//! shortest round-trip floats.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::hair::HairPolyline;
use crate::tract::ContourSample;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn hair_csv(hair: &HairPolyline) -> String {
    let mut out = String::from("param,re,im,depth,err\n");
    for s in &hair.samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(s.param),
            fmt_f64(s.point.re),
            fmt_f64(s.point.im),
            s.depth,
            fmt_f64(s.err)
        ));
    }
    out
}

pub fn boundary_csv(samples: &[ContourSample]) -> String {
    let mut out = String::from("t,re,im,tangent_re,tangent_im\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.point.re),
            fmt_f64(s.point.im),
            fmt_f64(s.tangent.re),
            fmt_f64(s.tangent.im)
        ));
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents)?;
    f.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let s = to_json(value).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    write_file(path, s.as_bytes())
}

/// Checks a certificate JSON document against the schema written by
/// `WiggleCertificate`; returns the first violation.
pub fn validate_certificate_json(v: &serde_json::Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("certificate must be an object")?;
    for key in ["address", "base_param", "base_point", "levels", "delta_obs", "log_shrink", "k_expansion", "koebe_limit"] {
        if !obj.contains_key(key) {
            return Err(format!("missing field {key}"));
        }
    }
    let is_complex = |x: &serde_json::Value| x.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(|c| c.is_number()));
    if !is_complex(&obj["base_point"]) {
        return Err("base_point must be [re, im]".into());
    }
    let levels = obj["levels"].as_array().ok_or("levels must be an array")?;
    if levels.is_empty() {
        return Err("levels must be nonempty".into());
    }
    for (i, l) in levels.iter().enumerate() {
        let l = l.as_object().ok_or(format!("level {i} must be an object"))?;
        for key in ["w_n", "z_a", "z_b"] {
            if !l.get(key).is_some_and(is_complex) {
                return Err(format!("level {i}: {key} must be [re, im]"));
            }
        }
        for key in ["n", "k_n", "pulled_scale_log2"] {
            if !l.get(key).is_some_and(|x| x.is_i64() || x.is_u64()) {
                return Err(format!("level {i}: {key} must be an integer"));
            }
        }
        for key in ["ambient_degeneracy", "degeneracy", "diameter", "log_diameter", "koebe_bound", "roundtrip_err"] {
            if !l.get(key).is_some_and(|x| x.is_number()) {
                return Err(format!("level {i}: {key} must be a number"));
            }
        }
        let verts = l
            .get("pulled_triangle")
            .and_then(|t| t.get("vertices"))
            .and_then(|t| t.as_array())
            .ok_or(format!("level {i}: pulled_triangle.vertices missing"))?;
        if verts.len() != 3 || !verts.iter().all(is_complex) {
            return Err(format!("level {i}: pulled_triangle needs three complex vertices"));
        }
    }
    if obj["log_shrink"].as_array().map(|a| a.len()) != Some(levels.len() - 1) {
        return Err("log_shrink must have one entry per consecutive pair of levels".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
