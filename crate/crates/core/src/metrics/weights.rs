use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear function of frequency given as `[hz, value]` breakpoints,
/// held constant beyond the first and last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Breakpoints(pub Vec<[f64; 2]>);

impl Breakpoints {
    pub fn constant(v: f64) -> Self {
        Breakpoints(vec![[0.0, v]])
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig(format!("{name}: no breakpoints")));
        }
        for w in self.0.windows(2) {
            if !(w[1][0] >= w[0][0]) {
                return Err(Error::InvalidConfig(format!(
                    "{name}: breakpoint frequencies must be non-decreasing"
                )));
            }
        }
        if self.0.iter().any(|[f, v]| !f.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name}: weights must be finite and non-negative"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, hz: f64) -> f64 {
        let pts = &self.0;
        let Some(first) = pts.first() else {
            return 0.0;
        };
        if hz <= first[0] {
            return first[1];
        }
        for w in pts.windows(2) {
            let ([f0, v0], [f1, v1]) = (w[0], w[1]);
            if hz <= f1 {
                if f1 == f0 {
                    return v1;
                }
                return v0 + (v1 - v0) * (hz - f0) / (f1 - f0);
            }
        }
        pts.last().unwrap()[1]
    }
}

/// How the coherence term enters the composite loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceTerm {
    /// `γ·(1 − C)`: minimizing the loss maximizes coherence.
    #[default]
    OneMinus,
    /// `γ·C` exactly as the summed formula reads.
    Literal,
}

/// Frequency-dependent weights of the MAE, energy and coherence terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: Breakpoints,
    pub beta: Breakpoints,
    pub gamma: Breakpoints,
    #[serde(default)]
    pub coherence_term: CoherenceTerm,
}

impl LossWeights {
    /// MAE below 1 kHz fading out by 2 kHz, energy fading in over 1–2 kHz,
    /// coherence up to 4 kHz fading out by 5 kHz.
    pub fn published() -> Self {
        LossWeights {
            alpha: Breakpoints(vec![[0.0, 1.0], [1000.0, 1.0], [2000.0, 0.0], [12000.0, 0.0]]),
            beta: Breakpoints(vec![[0.0, 0.0], [1000.0, 0.0], [2000.0, 0.01], [12000.0, 0.01]]),
            gamma: Breakpoints(vec![[0.0, 5.0], [4000.0, 5.0], [5000.0, 0.0], [12000.0, 0.0]]),
            coherence_term: CoherenceTerm::OneMinus,
        }
    }

    pub fn zeros() -> Self {
        LossWeights {
            alpha: Breakpoints::constant(0.0),
            beta: Breakpoints::constant(0.0),
            gamma: Breakpoints::constant(0.0),
            coherence_term: CoherenceTerm::OneMinus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")?;
        self.gamma.validate("gamma")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: LossWeights = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    /// `(α, β, γ)` at `hz`.
    pub fn at(&self, hz: f64) -> (f64, f64, f64) {
        (self.alpha.eval(hz), self.beta.eval(hz), self.gamma.eval(hz))
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::published()
    }
}
