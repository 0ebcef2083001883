//! Marginal specifications: explicit atom lists or parametric families
//! discretized by equal-mass quantile slices.

use anyhow::{bail, Context, Result};
use motkit::measures::Measure;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalSpec {
    Explicit { atoms: Vec<f64>, weights: Vec<f64> },
    Parametric(ParametricSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricSpec {
    Uniform {
        lo: f64,
        hi: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        n_slices: Option<usize>,
    },
    Gaussian {
        mean: f64,
        std: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        n_slices: Option<usize>,
    },
    /// Already atomic; slice counts do not apply.
    TwoPoint { lo: f64, hi: f64, p_hi: f64 },
}

impl MarginalSpec {
    /// Parses either inline JSON (starting with `{`) or the contents of the
    /// file at the given path.
    pub fn parse(arg: &str) -> Result<(Self, String)> {
        let text = if arg.trim_start().starts_with('{') {
            arg.to_string()
        } else {
            std::fs::read_to_string(arg).with_context(|| format!("reading marginal spec {arg}"))?
        };
        let spec: MarginalSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing marginal spec {arg}"))?;
        Ok((spec, text))
    }

    /// Discretizes to an atomic measure; parametric families that carry no
    /// slice count use `default_slices`.
    pub fn to_measure(&self, default_slices: usize) -> Result<Measure> {
        if default_slices == 0 {
            bail!("slice count must be positive");
        }
        let measure = match self {
            MarginalSpec::Explicit { atoms, weights } => {
                Measure::new(atoms.clone(), weights.clone())?
            }
            MarginalSpec::Parametric(ParametricSpec::Uniform { lo, hi, n_slices }) => {
                Measure::uniform_slices(*lo, *hi, n_slices.unwrap_or(default_slices))?
            }
            MarginalSpec::Parametric(ParametricSpec::Gaussian { mean, std, n_slices }) => {
                Measure::gaussian_slices(*mean, *std, n_slices.unwrap_or(default_slices))?
            }
            MarginalSpec::Parametric(ParametricSpec::TwoPoint { lo, hi, p_hi }) => {
                Measure::two_point(*lo, *hi, *p_hi)?
            }
        };
        Ok(measure)
    }
}
