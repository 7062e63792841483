//! Runs a scenario and collects everything worth checking into one JSON report.

use devilstick::icpm::{
    closed_loop_radius, fixed_point, stabilize_run, synthesize_gain, EpsilonSweep, Feedback, Icpm,
    IcpmGains, LinearizedMap, RunOutcome,
};
use devilstick::numerics::Matrix;
use devilstick::sim::{SectionState, TrajectoryLog};
use devilstick::vhc::ContactFeasibility;
use devilstick::zero_dynamics::OrbitSpec;
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ScenarioConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    /// Where the row came from: `synthesized` or `configured`.
    pub source: String,
    pub k: Vec<f64>,
    pub closed_loop_spectral_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<IcpmGains>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub consecutive_change: Vec<f64>,
    pub max_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub duration: f64,
    pub rotation_times: Vec<f64>,
    pub final_energy: f64,
    pub final_state: [f64; 6],
    /// Largest minus smallest logged value of the integral of motion.
    pub energy_spread: f64,
    pub impulses: Vec<f64>,
    pub crossing_energies: Vec<f64>,
    pub high_gain_active: Vec<usize>,
    pub last_active_crossing: Option<usize>,
    pub all_impulses_positive: bool,
    pub feasibility: ContactFeasibility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_star: Option<SectionState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearization: Option<LinearizedMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<SweepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunReport>,
}

/// A finished scenario: the report and, for simulating modes, the trajectory.
pub struct Outcome {
    pub report: Report,
    pub log: Option<TrajectoryLog>,
}

impl RunReport {
    fn from_run(run: &RunOutcome) -> Self {
        let energies = run.log.samples.iter().map(|s| s.energy);
        let (lo, hi) = energies.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e), hi.max(e))
        });
        let impulses = run.impulses();
        let active = run
            .log
            .crossings
            .iter()
            .filter(|c| c.high_gain_active)
            .map(|c| c.k);
        Self {
            duration: run.duration,
            rotation_times: run.rotation_times.clone(),
            final_energy: run.final_energy,
            final_state: run.final_state.to_array(),
            energy_spread: if hi >= lo { hi - lo } else { 0.0 },
            all_impulses_positive: impulses.iter().all(|i| *i > 0.0),
            impulses,
            crossing_energies: run.log.crossings.iter().map(|c| c.energy).collect(),
            high_gain_active: active.collect(),
            last_active_crossing: run.last_active_crossing(),
            feasibility: run.feasibility.clone(),
        }
    }
}

pub fn icpm_of(cfg: &ScenarioConfig) -> Icpm {
    Icpm {
        params: cfg.stick,
        vhc: cfg.vhc,
        section: cfg.section,
        sim: cfg.sim,
    }
}

fn orbit_fixed_point(
    cfg: &ScenarioConfig,
    icpm: &Icpm,
) -> devilstick::Result<Option<SectionState>> {
    cfg.orbit_energy
        .map(|energy| {
            fixed_point(
                &OrbitSpec {
                    energy,
                    vhc: cfg.vhc,
                },
                &icpm.section,
                &icpm.params,
            )
        })
        .transpose()
}

/// Runs `cfg` in the given mode, which may differ from `cfg.mode`.
pub fn execute(cfg: &ScenarioConfig, mode: Mode) -> anyhow::Result<Outcome> {
    let icpm = icpm_of(cfg);
    let settings = &cfg.icpm;
    let mut report = Report {
        mode,
        z_star: None,
        linearization: None,
        eps_sweep: None,
        gain: None,
        run: None,
    };

    let needs_gain = matches!(mode, Mode::Gain) || (mode == Mode::Stabilize && settings.feedback);
    let needs_linearization =
        matches!(mode, Mode::Linearize | Mode::Gain) || (needs_gain && settings.gain.is_none());

    let z_star = orbit_fixed_point(cfg, &icpm)?;
    report.z_star = z_star;

    let mut feedback = None;
    if needs_linearization || needs_gain {
        let z = z_star.ok_or_else(|| anyhow::anyhow!("mode {mode:?} needs orbit_energy"))?;
        let lin = if needs_linearization {
            info!(
                "linearizing at eps1 = {:e}, eps2 = {:e}",
                settings.eps1, settings.eps2
            );
            Some(icpm.linearize(&z, settings.eps1, settings.eps2)?)
        } else {
            None
        };
        if mode == Mode::Linearize && !settings.eps_sweep.is_empty() {
            let sweep: EpsilonSweep = icpm.epsilon_sweep(&z, &settings.eps_sweep)?;
            report.eps_sweep = Some(SweepReport {
                eps: settings.eps_sweep.clone(),
                max_change: sweep.consecutive_change.iter().copied().fold(0.0, f64::max),
                consecutive_change: sweep.consecutive_change,
            });
        }
        if needs_gain {
            let gain = match (&settings.gain, &lin) {
                (Some(k), lin) => GainReport {
                    source: "configured".into(),
                    k: k.clone(),
                    closed_loop_spectral_radius: match lin {
                        Some(l) => closed_loop_radius(&l.a, &l.b, k)?,
                        None => f64::NAN,
                    },
                    synthesis: None,
                },
                (None, Some(l)) => {
                    let q = Matrix::from_diagonal(&settings.q_weight);
                    let g = synthesize_gain(&l.a, &l.b, &q, settings.r_weight)?;
                    GainReport {
                        source: "synthesized".into(),
                        k: g.k.clone(),
                        closed_loop_spectral_radius: g.closed_loop_spectral_radius,
                        synthesis: Some(g),
                    }
                }
                (None, None) => unreachable!("a missing gain forces linearization"),
            };
            feedback = Some(Feedback {
                gain: gain.k.clone(),
                z_star: z,
            });
            report.gain = Some(gain);
        }
        report.linearization = lin;
    }

    let mut log = None;
    if matches!(
        mode,
        Mode::Stabilize | Mode::ContinuousOnly | Mode::Aperiodic
    ) {
        let fb = if mode == Mode::Stabilize {
            feedback.as_ref()
        } else {
            None
        };
        let start = cfg.initial(z_star.map(|z| z.to_full(cfg.section.q2_star)))?;
        let run = stabilize_run(start, &icpm, fb, cfg.rotations)?;
        report.run = Some(RunReport::from_run(&run));
        log = Some(run.log);
    }
    Ok(Outcome { report, log })
}
