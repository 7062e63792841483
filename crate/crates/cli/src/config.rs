//! Scenario configuration. All quantities are SI; angles are radians.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use devilstick::dynamics::{FullState, StickParams};
use devilstick::sim::{SectionSpec, SimConfig};
use devilstick::vhc::VhcSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Linearize, synthesize the gain and run the impulse feedback.
    Stabilize,
    /// Run under `u_c` alone.
    ContinuousOnly,
    /// Run under `u_c` alone for a phase without closed orbits.
    Aperiodic,
    /// Fixed point, linearization and epsilon sweep only.
    Linearize,
    /// Linearization plus gain synthesis.
    Gain,
}

/// Where the run starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `[hx, hy, θ, ḣx, ḣy, θ̇]` in m, rad, m/s, rad/s.
    Full([f64; 6]),
    /// Lift of `(q₂, q̇₂)` onto the constraint manifold.
    OnManifold { q2: f64, dq2: f64 },
    /// The fixed point of the orbit on the section.
    FixedPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcpmSettings {
    /// Diagonal of the state weight 𝒬 (5 entries).
    #[serde(default = "default_q")]
    pub q_weight: Vec<f64>,
    /// Input weight ℛ.
    #[serde(default = "default_r")]
    pub r_weight: f64,
    /// State perturbation for the finite differences.
    #[serde(default = "default_eps")]
    pub eps1: f64,
    /// Impulse perturbation for the finite differences, N·s.
    #[serde(default = "default_eps")]
    pub eps2: f64,
    /// Extra epsilons linearized for the stability report.
    #[serde(default = "default_sweep")]
    pub eps_sweep: Vec<f64>,
    /// Use this gain row instead of synthesizing one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    /// Apply the discrete impulse feedback.
    #[serde(default = "default_true")]
    pub feedback: bool,
}

fn default_q() -> Vec<f64> {
    vec![1.0; 5]
}
fn default_r() -> f64 {
    2.0
}
fn default_eps() -> f64 {
    1e-6
}
fn default_sweep() -> Vec<f64> {
    vec![1e-4, 1e-5, 1e-6, 1e-7]
}
fn default_true() -> bool {
    true
}

impl Default for IcpmSettings {
    fn default() -> Self {
        Self {
            q_weight: default_q(),
            r_weight: default_r(),
            eps1: default_eps(),
            eps2: default_eps(),
            eps_sweep: default_sweep(),
            gain: None,
            feedback: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub stick: StickParams,
    pub vhc: VhcSpec,
    /// Level of the integral of motion defining the target orbit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_energy: Option<f64>,
    pub section: SectionSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub icpm: IcpmSettings,
    pub initial_state: InitialState,
    /// Full turns of the orientation to simulate.
    pub rotations: u32,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.stick.validate()?;
        self.vhc.validate()?;
        SectionSpec::new(self.section.q2_star)?;
        self.sim.validate()?;
        if self.rotations == 0 {
            bail!("rotations must be at least 1");
        }
        if let Some(e) = self.orbit_energy {
            if !e.is_finite() {
                bail!("orbit_energy must be finite");
            }
        }
        let needs_orbit = matches!(self.mode, Mode::Stabilize | Mode::Linearize | Mode::Gain)
            || self.initial_state == InitialState::FixedPoint;
        if needs_orbit && self.orbit_energy.is_none() {
            bail!("mode {:?} needs orbit_energy", self.mode);
        }
        let icpm = &self.icpm;
        if icpm.q_weight.len() != 5 || icpm.q_weight.iter().any(|q| !(*q >= 0.0)) {
            bail!("icpm.q_weight must hold 5 non-negative entries");
        }
        if !(icpm.r_weight > 0.0) {
            bail!("icpm.r_weight must be positive");
        }
        if !(icpm.eps1 > 0.0 && icpm.eps2 > 0.0) || icpm.eps_sweep.iter().any(|e| !(*e > 0.0)) {
            bail!("finite-difference steps must be positive");
        }
        if let Some(k) = &icpm.gain {
            if k.len() != 5 || k.iter().any(|v| !v.is_finite()) {
                bail!("icpm.gain must hold 5 finite entries");
            }
        }
        if let InitialState::Full(s) = &self.initial_state {
            if s.iter().any(|v| !v.is_finite()) {
                bail!("initial_state must be finite");
            }
        }
        Ok(())
    }

    pub fn initial(&self, fixed_point: Option<FullState>) -> anyhow::Result<FullState> {
        Ok(match &self.initial_state {
            InitialState::Full(a) => FullState::from_array(*a),
            InitialState::OnManifold { q2, dq2 } => self.vhc.manifold_state(*q2, *dq2),
            InitialState::FixedPoint => match fixed_point {
                Some(s) => s,
                None => bail!("initial_state fixed_point needs a propeller orbit"),
            },
        })
    }
}
