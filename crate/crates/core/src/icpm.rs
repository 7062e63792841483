//! Impulse-controlled Poincaré map: fixed point, finite-difference
//! linearization, LQR gain synthesis and the closed-loop impulse feedback run.

use std::f64::consts::TAU;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FullState, StickParams};
use crate::numerics::{
    eigenvalues, forward_difference_column_with_base, singular_values, solve_dare, spectral_radius,
    Complex64, DareOptions, Matrix,
};
use crate::sim::{
    ContinuousLaw, CrossingEvent, SectionSpec, SimConfig, Simulator, Stop, TrajectoryLog,
};
use crate::vhc::{ContactFeasibility, VhcSpec, FORCE_FLOOR};
use crate::zero_dynamics::{
    classify_orbit, dq2_on_orbit, energy, OrbitClass, OrbitSpec, ReducedState,
};
use crate::{Error, Result};

pub use crate::sim::SectionState;

/// Rank tolerance on singular values for controllability tests.
pub const CONTROLLABILITY_TOL: f64 = 1e-8;

/// `z* = [Φ(q₂*), Φ'(q₂*) q̇₂*, q̇₂*]` for a propeller orbit.
pub fn fixed_point(
    orbit: &OrbitSpec,
    section: &SectionSpec,
    p: &StickParams,
) -> Result<SectionState> {
    match classify_orbit(orbit, p) {
        OrbitClass::Propeller => {}
        other => {
            return Err(Error::NotPropeller(format!(
                "energy {} with phase {} gives a {other:?} orbit",
                orbit.energy, orbit.vhc.phase
            )))
        }
    }
    let dq2 = dq2_on_orbit(section.q2_star, orbit, p)?;
    Ok(SectionState::from_full(
        &orbit.vhc.manifold_state(section.q2_star, dq2),
    ))
}

/// Velocity jump produced by an impulse `I` pushing at arm `r`.
pub fn apply_impulse(state: &FullState, impulse: f64, arm: f64, p: &StickParams) -> FullState {
    let (s, c) = state.theta.sin_cos();
    FullState {
        dhx: state.dhx - s / p.mass * impulse,
        dhy: state.dhy + c / p.mass * impulse,
        dtheta: state.dtheta + impulse * arm / p.inertia,
        ..*state
    }
}

/// Arm of the continuous control at `state`.
pub fn continuous_arm(state: &FullState, vhc: &VhcSpec, p: &StickParams) -> Result<f64> {
    let u = vhc.continuous_input(state, p)?;
    if u[0].abs() < FORCE_FLOOR {
        return Err(Error::DegenerateForce { force: u[0] });
    }
    Ok(u[1] / u[0])
}

/// Everything needed to evaluate the return map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Icpm {
    pub params: StickParams,
    pub vhc: VhcSpec,
    pub section: SectionSpec,
    pub sim: SimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedMap {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub r_star: f64,
    pub z_star: SectionState,
    /// `ℙ(z*, 0)`, the base point of the differences.
    pub base: SectionState,
    pub fixed_point_residual: f64,
}

impl LinearizedMap {
    pub fn b_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.b.len(), 1);
        m.set_column(0, &self.b);
        m
    }
}

/// Linearizations at several step sizes and how much they disagree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub maps: Vec<LinearizedMap>,
    /// For each consecutive pair, the largest entry change of 𝒜 relative to
    /// max|𝒜| and of ℬ relative to max|ℬ|, whichever is larger.
    pub consecutive_change: Vec<f64>,
}

impl EpsilonSweep {
    /// Largest relative change among consecutive maps whose epsilons all lie
    /// in `eps_range` (inclusive).
    pub fn max_change_within(&self, lo: f64, hi: f64) -> f64 {
        self.maps
            .windows(2)
            .zip(&self.consecutive_change)
            .filter(|(w, _)| w.iter().all(|m| m.eps1 >= lo && m.eps1 <= hi))
            .fold(0.0, |acc, (_, &c)| acc.max(c))
    }
}

fn relative_change(x: &LinearizedMap, y: &LinearizedMap) -> f64 {
    let da = (&x.a - &y.a).max_abs() / x.a.max_abs().max(f64::MIN_POSITIVE);
    let bmax =
        x.b.iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let db =
        x.b.iter()
            .zip(&y.b)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
            / bmax;
    da.max(db)
}

impl Icpm {
    pub fn continuous_law(&self) -> ContinuousLaw {
        ContinuousLaw {
            vhc: self.vhc,
            params: self.params,
        }
    }

    /// Full state on the section for `z`.
    pub fn lift(&self, z: &SectionState) -> FullState {
        z.to_full(self.section.q2_star)
    }

    /// `ℙ(z, I)`: impulse at the arm of `u_c` at `z`, then the `u_c` flow to
    /// the next crossing.
    pub fn map(&self, z: &SectionState, impulse: f64) -> Result<SectionState> {
        let mut s = self.lift(z);
        if impulse != 0.0 {
            let r = continuous_arm(&s, &self.vhc, &self.params)?;
            s = apply_impulse(&s, impulse, r, &self.params);
        }
        let mut sim = Simulator::new(s, self.params, self.vhc, self.sim)
            .without_samples()
            .starting_on(&self.section);
        sim.advance_to_section(&self.continuous_law(), &self.section)?;
        Ok(SectionState::from_full(sim.state()))
    }

    /// Forward-difference `𝒜` and `ℬ` of [`Icpm::map`] about `z*`.
    pub fn linearize(&self, z_star: &SectionState, eps1: f64, eps2: f64) -> Result<LinearizedMap> {
        let r_star = continuous_arm(&self.lift(z_star), &self.vhc, &self.params)?;
        linearize_with(|z, i| self.map(z, i), z_star, r_star, eps1, eps2)
    }

    /// Linearizes once per epsilon (used for both `ε₁` and `ε₂`).
    pub fn epsilon_sweep(&self, z_star: &SectionState, eps: &[f64]) -> Result<EpsilonSweep> {
        let maps = eps
            .iter()
            .map(|&e| self.linearize(z_star, e, e))
            .collect::<Result<Vec<_>>>()?;
        let consecutive_change = maps
            .windows(2)
            .map(|w| relative_change(&w[0], &w[1]))
            .collect();
        Ok(EpsilonSweep {
            maps,
            consecutive_change,
        })
    }
}

/// Forward differences of an arbitrary return map `(z, I) -> z'` about
/// `z*`, taken against the base value `map(z*, 0)`. The six evaluations run
/// in parallel.
pub fn linearize_with<F>(
    map: F,
    z_star: &SectionState,
    r_star: f64,
    eps1: f64,
    eps2: f64,
) -> Result<LinearizedMap>
where
    F: Fn(&SectionState, f64) -> Result<SectionState> + Sync,
{
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::InvalidParameter(
            "finite-difference steps must be positive".into(),
        ));
    }
    let base = map(z_star, 0.0)?;
    let fixed_point_residual = base.distance_inf(z_star);
    let zb = base.to_array();
    let x0 = z_star.to_array();

    let cols: Vec<Vec<f64>> = (0..6)
        .into_par_iter()
        .map(|j| {
            if j < 5 {
                let f = |z: &[f64]| -> Result<Vec<f64>> {
                    let z: [f64; 5] = z.try_into().expect("section state has five entries");
                    Ok(map(&SectionState::from_array(z), 0.0)?.to_array().to_vec())
                };
                forward_difference_column_with_base(f, &x0, &zb, j, eps1)
            } else {
                let f =
                    |i: &[f64]| -> Result<Vec<f64>> { Ok(map(z_star, i[0])?.to_array().to_vec()) };
                forward_difference_column_with_base(f, &[0.0], &zb, 0, eps2)
            }
        })
        .collect::<Result<_>>()?;

    let mut a = Matrix::zeros(5, 5);
    for (j, c) in cols[..5].iter().enumerate() {
        a.set_column(j, c);
    }
    debug!("linearized with eps1 = {eps1:e}, residual {fixed_point_residual:e}");
    Ok(LinearizedMap {
        a,
        b: cols[5].clone(),
        eps1,
        eps2,
        r_star,
        z_star: *z_star,
        base,
        fixed_point_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcpmGains {
    /// Feedback row: `I(k) = K e(k)`.
    pub k: Vec<f64>,
    pub q: Matrix,
    pub r_weight: f64,
    pub closed_loop_spectral_radius: f64,
    pub open_loop_eigenvalues: Vec<Complex64>,
    pub open_loop_spectral_radius: f64,
    pub controllability_singular_values: Vec<f64>,
    /// Smallest singular value of the controllability matrix exceeds
    /// [`CONTROLLABILITY_TOL`].
    pub controllable: bool,
    /// Smallest PBH margin over open-loop modes with |λ| ≥ 1. Infinite when
    /// the open loop is already stable.
    pub unstable_mode_margin: f64,
    pub dare_iterations: usize,
    pub dare_residual: f64,
}

/// `[B, AB, …, A^{n-1}B]` for a single input.
pub fn controllability_matrix(a: &Matrix, b: &[f64]) -> Matrix {
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    let mut col = b.to_vec();
    for j in 0..n {
        out.set_column(j, &col);
        col = a.mul_vec(&col);
    }
    out
}

/// Smallest singular value of `[λI - A, b]`. Zero exactly when the mode `λ`
/// cannot be moved by the input.
pub fn pbh_margin(a: &Matrix, b: &[f64], lambda: Complex64) -> Result<f64> {
    let n = a.rows();
    // [[Re, -Im], [Im, Re]] carries each singular value of the complex matrix twice
    let mut m = Matrix::zeros(2 * n, 2 * n + 2);
    for i in 0..n {
        for j in 0..n {
            let re = if i == j {
                lambda.re - a[(i, j)]
            } else {
                -a[(i, j)]
            };
            let im = if i == j { lambda.im } else { 0.0 };
            m[(i, j)] = re;
            m[(i, n + 1 + j)] = -im;
            m[(n + i, j)] = im;
            m[(n + i, n + 1 + j)] = re;
        }
        m[(i, n)] = b[i];
        m[(n + i, 2 * n + 1)] = b[i];
    }
    let sv = singular_values(&m)?;
    Ok(sv.last().copied().unwrap_or(0.0))
}

/// Spectral radius of `A + b k`.
pub fn closed_loop_radius(a: &Matrix, b: &[f64], k: &[f64]) -> Result<f64> {
    let n = a.rows();
    if b.len() != n || k.len() != n {
        return Err(Error::InvalidParameter(
            "gain and input sizes must match the state".into(),
        ));
    }
    let mut cl = a.clone();
    for i in 0..n {
        for j in 0..n {
            cl[(i, j)] += b[i] * k[j];
        }
    }
    Ok(spectral_radius(&cl)?)
}

/// LQR gain for the linearized map, sign-flipped so that `I = K e` and the
/// closed loop is `𝒜 + ℬK`.
///
/// Full controllability is reported but not required: with equal scalar
/// constraint gains the two error coordinates decay identically, which leaves
/// a repeated, strongly contracting mode that one input cannot separate. Only
/// modes with |λ| ≥ 1 must be reachable.
pub fn synthesize_gain(a: &Matrix, b: &[f64], q: &Matrix, r_weight: f64) -> Result<IcpmGains> {
    if !(r_weight > 0.0) {
        return Err(Error::InvalidParameter(
            "input weight must be positive".into(),
        ));
    }
    let sv = singular_values(&controllability_matrix(a, b))?;
    let controllable = sv.last().copied().unwrap_or(0.0) > CONTROLLABILITY_TOL;
    let open = eigenvalues(a)?;
    let mut unstable_mode_margin = f64::INFINITY;
    for &lambda in open.iter().filter(|z| z.norm() >= 1.0) {
        unstable_mode_margin = unstable_mode_margin.min(pbh_margin(a, b, lambda)?);
    }
    if !(unstable_mode_margin > CONTROLLABILITY_TOL) {
        return Err(Error::NotControllable {
            sigma_min: unstable_mode_margin,
        });
    }
    let mut bm = Matrix::zeros(b.len(), 1);
    bm.set_column(0, b);
    let sol = solve_dare(
        a,
        &bm,
        q,
        &Matrix::from_diagonal(&[r_weight]),
        &DareOptions::default(),
    )
    .map_err(|e| Error::NotStabilizable(e.to_string()))?;
    let k: Vec<f64> = sol.gain.row_slice(0).iter().map(|v| -v).collect();
    let radius = closed_loop_radius(a, b, &k)?;
    if radius >= 1.0 {
        return Err(Error::NotStabilizable(format!(
            "closed-loop spectral radius {radius}"
        )));
    }
    let open_radius = open.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(IcpmGains {
        k,
        q: q.clone(),
        r_weight,
        closed_loop_spectral_radius: radius,
        open_loop_eigenvalues: open,
        open_loop_spectral_radius: open_radius,
        controllability_singular_values: sv,
        controllable,
        unstable_mode_margin,
        dare_iterations: sol.iterations,
        dare_residual: sol.residual_norm,
    })
}

/// Discrete impulse feedback about a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub gain: Vec<f64>,
    pub z_star: SectionState,
}

impl Feedback {
    pub fn impulse(&self, z: &SectionState) -> f64 {
        let e = z.to_array();
        let s = self.z_star.to_array();
        self.gain
            .iter()
            .zip(e.iter().zip(s))
            .map(|(k, (a, b))| k * (a - b))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub log: TrajectoryLog,
    /// Time at which the requested number of rotations completed, s.
    pub duration: f64,
    /// Completion time of each rotation, s.
    pub rotation_times: Vec<f64>,
    pub final_state: FullState,
    pub final_energy: f64,
    pub feasibility: ContactFeasibility,
}

impl RunOutcome {
    pub fn impulses(&self) -> Vec<f64> {
        self.log.crossings.iter().map(|c| c.impulse).collect()
    }

    /// Largest crossing index with an active high-gain episode.
    pub fn last_active_crossing(&self) -> Option<usize> {
        self.log
            .crossings
            .iter()
            .filter(|c| c.high_gain_active)
            .map(|c| c.k)
            .max()
    }
}

/// Runs `rotations` full turns of the orientation under `u_c`, applying the
/// impulse feedback at every crossing when `feedback` is given.
pub fn stabilize_run(
    initial: FullState,
    icpm: &Icpm,
    feedback: Option<&Feedback>,
    rotations: u32,
) -> Result<RunOutcome> {
    if rotations == 0 {
        return Err(Error::InvalidParameter(
            "rotation count must be positive".into(),
        ));
    }
    let p = icpm.params;
    let law = icpm.continuous_law();
    let mut sim = Simulator::new(initial, p, icpm.vhc, icpm.sim).starting_on(&icpm.section);
    let theta0 = initial.theta;
    let mut rotation_times = Vec::with_capacity(rotations as usize);
    let mut next_target = theta0 + TAU;

    while rotation_times.len() < rotations as usize {
        match sim.advance(&law, Some(&icpm.section), Some(next_target))? {
            Stop::Target => {
                rotation_times.push(sim.time());
                next_target += TAU;
            }
            Stop::Section => {
                let s = *sim.state();
                let z = SectionState::from_full(&s);
                let arm = continuous_arm(&s, &icpm.vhc, &p)?;
                let impulse = feedback.map_or(0.0, |f| f.impulse(&z));
                let jump = impulse * arm / p.inertia;
                let mut event = CrossingEvent {
                    k: sim.log().crossings.len() + 1,
                    t: sim.time(),
                    theta: s.theta,
                    z,
                    energy: energy(ReducedState::new(s.theta, s.dtheta), &icpm.vhc, &p)?,
                    impulse,
                    arm,
                    dq2_jump: jump,
                    high_gain_active: false,
                    high_gain_duration: 0.0,
                    peak_high_gain_force: 0.0,
                };
                if jump.abs() > icpm.sim.high_gain.eps3 {
                    let rep = sim.high_gain_episode(arm, s.dtheta + jump)?;
                    event.high_gain_active = true;
                    event.high_gain_duration = rep.duration;
                    event.peak_high_gain_force = rep.peak_high_gain_force;
                }
                debug!(
                    "crossing {} at t = {:.4}: I = {:.3e}, E = {:.4}",
                    event.k, event.t, impulse, event.energy
                );
                sim.log_mut().crossings.push(event);
                // a crossing can coincide with a rotation mark
                while rotation_times.len() < rotations as usize && sim.state().theta >= next_target
                {
                    rotation_times.push(sim.time());
                    next_target += TAU;
                }
            }
        }
    }
    sim.record(&law);

    let feasibility = sim.feasibility().clone();
    let final_state = *sim.state();
    let final_energy = energy(
        ReducedState::new(final_state.theta, final_state.dtheta),
        &icpm.vhc,
        &p,
    )?;
    let duration = *rotation_times.last().expect("at least one rotation");
    info!("{rotations} rotations in {duration:.4} s, final E = {final_energy:.4}");
    Ok(RunOutcome {
        log: sim.into_log(),
        duration,
        rotation_times,
        final_state,
        final_energy,
        feasibility,
    })
}
