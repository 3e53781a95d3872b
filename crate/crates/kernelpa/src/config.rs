//! Run configuration shared by the command-line verbs.

use std::path::PathBuf;

use crate::error::{Error, Result};

/// Hyper-parameters and paths for a pipeline run.
///
/// Defaults follow the reference operating point: memory depth 3, maximum
/// order 3, 70 grid points, aperture 1/70 of the amplitude span, and a 10%
/// leading estimation split.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m_depth: usize,
    pub p_max: usize,
    pub grid_points: usize,
    pub aperture_fraction: f64,
    pub estimation_fraction: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m_depth: 3,
            p_max: 3,
            grid_points: 70,
            aperture_fraction: 1.0 / 70.0,
            estimation_fraction: 0.10,
            seed: 1,
            input: None,
            output: None,
            model: None,
        }
    }
}

impl RunConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        if self.p_max < 1 {
            return Err(Error::InvalidParameter(
                "p_max must be at least 1".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid_points must be at least 2, got {}",
                self.grid_points
            )));
        }
        if !(self.aperture_fraction.is_finite()
            && self.aperture_fraction > 0.0
            && self.aperture_fraction <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "aperture_fraction must be in (0, 1], got {}",
                self.aperture_fraction
            )));
        }
        if !(self.estimation_fraction.is_finite()
            && self.estimation_fraction > 0.0
            && self.estimation_fraction < 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "estimation_fraction must be in (0, 1), got {}",
                self.estimation_fraction
            )));
        }
        Ok(())
    }

    /// Applies `key = value` override lines (as read from a `--config` file)
    /// on top of the current values. Unknown or duplicated keys are
    /// rejected; `#` starts a comment.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format_at(idx + 1, "expected key=value"))?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(Error::format_at(idx + 1, format!("duplicate key '{key}'")));
            }
            match key {
                "m_depth" => self.m_depth = parse_field(idx, key, value)?,
                "p_max" => self.p_max = parse_field(idx, key, value)?,
                "grid_points" => self.grid_points = parse_field(idx, key, value)?,
                "aperture_fraction" => self.aperture_fraction = parse_field(idx, key, value)?,
                "estimation_fraction" => self.estimation_fraction = parse_field(idx, key, value)?,
                "seed" => self.seed = parse_field(idx, key, value)?,
                "input" => self.input = Some(PathBuf::from(value)),
                "output" => self.output = Some(PathBuf::from(value)),
                "model" => self.model = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::format_at(idx + 1, format!("unknown key '{other}'")));
                }
            }
            // Borrow dance: record the canonical key name, not the input slice.
            seen.push(canonical(key));
        }
        self.validate()
    }

    /// Renders the scalar fields as override lines (paths included when set).
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "m_depth = {}\np_max = {}\ngrid_points = {}\naperture_fraction = {:?}\nestimation_fraction = {:?}\nseed = {}\n",
            self.m_depth,
            self.p_max,
            self.grid_points,
            self.aperture_fraction,
            self.estimation_fraction,
            self.seed
        );
        for (key, path) in [("input", &self.input), ("output", &self.output), ("model", &self.model)] {
            if let Some(p) = path {
                out.push_str(&format!("{key} = {}\n", p.display()));
            }
        }
        out
    }
}

fn canonical(key: &str) -> &'static str {
    match key {
        "m_depth" => "m_depth",
        "p_max" => "p_max",
        "grid_points" => "grid_points",
        "aperture_fraction" => "aperture_fraction",
        "estimation_fraction" => "estimation_fraction",
        "seed" => "seed",
        "input" => "input",
        "output" => "output",
        "model" => "model",
        _ => unreachable!("caller matched the key already"),
    }
}

fn parse_field<T: std::str::FromStr>(idx: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::format_at(idx + 1, format!("bad {key}: {e}")))
}
