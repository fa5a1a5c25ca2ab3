//! Flat `key = value` configuration files: `#` comments, duplicate and
//! unknown keys are hard errors, every value is validated on load.

use std::collections::BTreeMap;

use crate::cluster::{Anchor, ClusterConstructionSpec, ConstructionMethod};
use crate::error::{Error, Result};
use crate::field::Norm;
use crate::lattice::LatticeSpec;
use crate::models::{ModelSpec, Variogram};

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "alpha",
    "norm",
    "phi",
    "coeffs",
    "q_values",
    "q_start",
    "variogram_slope",
    "hurst",
    "delta",
    "dim_l",
    "lattice",
    "construction",
    "b",
    "tau",
    "anchor",
    "window",
];

/// Parsed model file: the model itself plus the optional lattice,
/// construction, and window choices it carries.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: ModelSpec,
    pub lattice: LatticeSpec,
    pub construction: Option<ClusterConstructionSpec>,
    pub window: Option<Vec<i64>>,
    /// Raw key-value pairs for the report's config echo.
    pub raw: BTreeMap<String, String>,
}

pub fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(format!(
                "line {}: unknown key '{}'",
                lineno + 1,
                key
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::config(format!(
                "line {}: duplicate key '{}'",
                lineno + 1,
                key
            )));
        }
    }
    Ok(map)
}

fn parse_f64(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::config(format!("bad number for '{key}': '{v}'"))),
    }
}

fn require_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    parse_f64(map, key)?.ok_or_else(|| Error::config(format!("missing key '{key}'")))
}

fn parse_f64_list(text: &str, key: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad list entry for '{key}': '{v}'")))
        })
        .collect()
}

pub fn parse_i64_list(text: &str, key: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| Error::config(format!("bad list entry for '{key}': '{v}'")))
        })
        .collect()
}

pub fn load_model_file(path: &str) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read model file '{path}': {e}")))?;
    model_from_text(&text)
}

pub fn model_from_text(text: &str) -> Result<ModelFile> {
    let map = parse_kv_text(text)?;
    let kind = map
        .get("kind")
        .ok_or_else(|| Error::config("missing key 'kind'"))?
        .as_str();
    let alpha = require_f64(&map, "alpha")?;
    let norm = match map.get("norm").map(|s| s.as_str()) {
        None | Some("abs") => Norm::Abs,
        Some("euclid") => Norm::Euclid,
        Some("max") => Norm::MaxComponent,
        Some(other) => return Err(Error::config(format!("unknown norm '{other}'"))),
    };
    let mut model = match kind {
        "ar1_tail_chain" => ModelSpec::ar1(alpha, require_f64(&map, "phi")?),
        "moving_max" => {
            let coeffs = parse_f64_list(
                map.get("coeffs")
                    .ok_or_else(|| Error::config("moving_max needs 'coeffs'"))?,
                "coeffs",
            )?;
            ModelSpec::moving_max(alpha, coeffs)
        }
        "deterministic_q" => {
            let values = parse_f64_list(
                map.get("q_values")
                    .ok_or_else(|| Error::config("deterministic_q needs 'q_values'"))?,
                "q_values",
            )?;
            let start = map
                .get("q_start")
                .map(|v| {
                    v.parse::<i64>()
                        .map_err(|_| Error::config(format!("bad q_start '{v}'")))
                })
                .transpose()?
                .unwrap_or(0);
            ModelSpec::deterministic_q(alpha, values, start)
        }
        "brown_resnick" => {
            let c = require_f64(&map, "variogram_slope")?;
            let variogram = match parse_f64(&map, "hurst")? {
                Some(h) => Variogram::Power { c, hurst: h },
                None => Variogram::Linear { c },
            };
            let dim_l = map
                .get("dim_l")
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::config(format!("bad dim_l '{v}'")))
                })
                .transpose()?
                .unwrap_or(1);
            let delta = parse_f64(&map, "delta")?.unwrap_or(1.0);
            ModelSpec::brown_resnick(alpha, variogram, dim_l, delta)
        }
        other => return Err(Error::config(format!("unknown model kind '{other}'"))),
    };
    model.norm = norm;
    model.validate()?;

    let lattice = match map.get("lattice") {
        Some(text) => {
            let lat = LatticeSpec::parse(text, model.delta())?;
            if lat.ambient_dim() != model.dim_l() {
                return Err(Error::config("lattice dimension does not match the model"));
            }
            lat
        }
        None => LatticeSpec::identity(model.dim_l(), model.delta()),
    };

    let construction = match map.get("construction") {
        Some(name) => {
            let method = ConstructionMethod::parse(name)?;
            let mut spec = ClusterConstructionSpec::new(method, lattice.clone());
            if let Some(b) = parse_f64(&map, "b")? {
                spec = spec.with_b(b);
            }
            if let Some(tau) = parse_f64(&map, "tau")? {
                spec = spec.with_tau(tau);
            }
            if let Some(anchor) = map.get("anchor") {
                spec = spec.with_anchor(Anchor::parse(anchor)?);
            }
            spec.validate(model.alpha)?;
            Some(spec)
        }
        None => {
            for leftover in ["b", "tau", "anchor"] {
                if map.contains_key(leftover) {
                    return Err(Error::config(format!(
                        "'{leftover}' requires a 'construction' key"
                    )));
                }
            }
            None
        }
    };

    let window = match map.get("window") {
        Some(text) => {
            let w = parse_i64_list(text, "window")?;
            if w.len() != model.dim_l() || w.iter().any(|&a| a < 1) {
                return Err(Error::config("window must list one positive half-width per axis"));
            }
            Some(w)
        }
        None => None,
    };

    Ok(ModelFile {
        model,
        lattice,
        construction,
        window,
        raw: map,
    })
}

/// Default window half-width when the config and flags leave it unset:
/// twice the decay radius, floored at 8 cells per axis.
pub fn default_window(model: &ModelSpec) -> Vec<i64> {
    let a = (2 * model.decay_radius()).max(8);
    vec![a; model.dim_l()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_ar1() {
        let mf = model_from_text("kind = ar1_tail_chain\nphi = 0.5\nalpha = 1.0\n").unwrap();
        assert_eq!(mf.model.kind_name(), "ar1_tail_chain");
        assert!(mf.lattice.is_identity());
        assert!(mf.construction.is_none());
    }

    #[test]
    fn rejects_phi_out_of_range() {
        assert!(model_from_text("kind = ar1_tail_chain\nphi = 1.5\nalpha = 1.0\n").is_err());
    }

    #[test]
    fn rejects_duplicate_and_unknown_keys() {
        assert!(model_from_text("alpha = 1\nalpha = 2\nkind = ar1_tail_chain\nphi = 0.5").is_err());
        assert!(model_from_text("kind = ar1_tail_chain\nphi = 0.5\nalpha = 1\nwat = 1").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a model\nkind = moving_max # inline\n\ncoeffs = 2, 1\nalpha = 1.0\n";
        let mf = model_from_text(text).unwrap();
        assert_eq!(mf.model.kind_name(), "moving_max");
    }

    #[test]
    fn parses_brown_resnick_with_lattice_and_construction() {
        let text = "kind = brown_resnick\nvariogram_slope = 10\nalpha = 1.0\n\
                    lattice = 1\nconstruction = ffd_y\nb = 2\ntau = 0.5\n\
                    anchor = first_exceedance\nwindow = 32\n";
        let mf = model_from_text(text).unwrap();
        assert_eq!(mf.model.kind_name(), "brown_resnick");
        let c = mf.construction.unwrap();
        assert_eq!(c.method, ConstructionMethod::FfdY);
        assert_eq!(c.b, 2.0);
        assert_eq!(mf.window, Some(vec![32]));
    }

    #[test]
    fn construction_params_need_construction() {
        assert!(
            model_from_text("kind = ar1_tail_chain\nphi = 0.5\nalpha = 1\nb = 2\n").is_err()
        );
    }
}
