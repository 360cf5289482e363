//! Run configuration. One JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evolution::{cfl_limit, Method, PhysParams, PicardOptions};
use crate::lattice::GridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub phys: PhysConfig,
    pub solver: SolverConfig,
    pub data: DataConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub box_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysConfig {
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub picard: PicardConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub max_m: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub seed: u64,
    pub amplitude: f64,
    pub spectral_slope: f64,
    /// Largest `|k_i|` of the excited modes.
    pub band_limit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Steps between snapshots; the final state is always written.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    /// Small data on the `8⁴` grid: `T = 0.5`, `dt = 10⁻³`.
    fn default() -> Self {
        Self {
            grid: GridConfig {
                n: 8,
                box_length: 2.0 * std::f64::consts::PI,
            },
            phys: PhysConfig { mass: 0.5 },
            solver: SolverConfig {
                method: Method::Rk4,
                dt: 1e-3,
                t_final: 0.5,
                picard: PicardConfig {
                    max_m: 30,
                    tol: 1e-10,
                },
            },
            data: DataConfig {
                seed: 7,
                amplitude: 0.01,
                spectral_slope: 2.5,
                band_limit: 1,
            },
            analysis: AnalysisConfig { s: 1.1 },
            output: OutputConfig {
                directory: PathBuf::from("mkg4d-out"),
                snapshot_every: 100,
            },
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, or the config recorded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let value = match value.get("config") {
            Some(cfg) if value.get("manifest_version").is_some() => cfg.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides, with dotted keys such as `solver.dt`.
    /// Values are parsed as JSON, falling back to a string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for (key, raw) in overrides {
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let mut slot = &mut value;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
            }
            *slot = parsed;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.grid_spec()?;
        let positive = [
            ("solver.dt", self.solver.dt),
            ("solver.picard.tol", self.solver.picard.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} = {v} must be positive"));
            }
        }
        let non_negative = [
            ("phys.mass", self.phys.mass),
            ("solver.T", self.solver.t_final),
            ("data.amplitude", self.data.amplitude),
            ("data.spectral_slope", self.data.spectral_slope),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.solver.picard.max_m == 0 {
            return fail("solver.picard.max_m must be positive".into());
        }
        if self.output.snapshot_every == 0 {
            return fail("output.snapshot_every must be positive".into());
        }
        if !(self.analysis.s > 1.0 && self.analysis.s < 2.0) {
            return fail(format!("analysis.s = {} outside (1, 2)", self.analysis.s));
        }
        if 2 * self.data.band_limit >= self.grid.n {
            return fail(format!(
                "data.band_limit = {} reaches the Nyquist band of n = {}",
                self.data.band_limit, self.grid.n
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.box_length)
    }

    pub fn phys_params(&self) -> Result<PhysParams> {
        PhysParams::new(self.phys.mass)
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            max_m: self.solver.picard.max_m,
            tol: self.solver.picard.tol,
            s: self.analysis.s,
            ..PicardOptions::default()
        }
    }

    /// Errors with a suggested step when `dt` violates the CFL guard.
    pub fn check_cfl(&self) -> Result<()> {
        let limit = cfl_limit(&self.grid_spec()?);
        if self.solver.dt > limit {
            return Err(Error::CflViolation {
                dt: self.solver.dt,
                suggested: limit,
            });
        }
        Ok(())
    }
}

/// Splits `key=value`.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(format!("override `{arg}` is not key=value"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        v["solver"]["dtt"] = serde_json::json!(0.1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn overrides_apply_dotted_keys() {
        let cfg = RunConfig::default()
            .with_overrides(&[
                ("solver.dt".into(), "0.002".into()),
                ("solver.method".into(), "picard".into()),
            ])
            .unwrap();
        assert_eq!(cfg.solver.dt, 0.002);
        assert_eq!(cfg.solver.method, Method::Picard);
        assert!(RunConfig::default()
            .with_overrides(&[("solver.nope".into(), "1".into())])
            .is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = |key: &str, val: &str| {
            RunConfig::default()
                .with_overrides(&[(key.into(), val.into())])
                .is_err()
        };
        assert!(bad("analysis.s", "1.0"));
        assert!(bad("solver.dt", "0"));
        assert!(bad("data.band_limit", "4"));
        assert!(bad("grid.n", "6"));
        assert!(bad("output.snapshot_every", "0"));
    }

    #[test]
    fn cfl_guard_suggests_a_step() {
        let cfg = RunConfig::default()
            .with_overrides(&[("solver.dt".into(), "1.0".into())])
            .unwrap();
        match cfg.check_cfl() {
            Err(Error::CflViolation { suggested, .. }) => assert!(suggested < 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_override_splits_on_first_equals() {
        assert_eq!(
            parse_override("output.directory=a=b").unwrap(),
            ("output.directory".into(), "a=b".into())
        );
        assert!(parse_override("novalue").is_err());
    }
}
