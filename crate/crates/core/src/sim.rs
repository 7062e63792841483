//! Fixed-step closed-loop integration with Poincaré-section event detection
//! and high-gain episodes that realize impulsive velocity jumps.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{state_derivative, wrap_angle, FullState, StickParams};
use crate::vhc::{manifold_sign_condition, ContactFeasibility, VhcSpec};
use crate::zero_dynamics::{energy, ReducedState};
use crate::{Error, Result};

/// Anything that maps the current state to the generalized input `[F, F·r]`.
pub trait ControlLaw {
    fn input(&self, state: &FullState) -> Result<[f64; 2]>;
}

impl<F> ControlLaw for F
where
    F: Fn(&FullState) -> Result<[f64; 2]>,
{
    fn input(&self, state: &FullState) -> Result<[f64; 2]> {
        self(state)
    }
}

/// No applied force.
#[derive(Clone, Copy, Debug, Default)]
pub struct Passive;

impl ControlLaw for Passive {
    fn input(&self, _: &FullState) -> Result<[f64; 2]> {
        Ok([0.0, 0.0])
    }
}

/// The constraint-enforcing control `u_c`.
#[derive(Clone, Copy, Debug)]
pub struct ContinuousLaw {
    pub vhc: VhcSpec,
    pub params: StickParams,
}

impl ControlLaw for ContinuousLaw {
    fn input(&self, state: &FullState) -> Result<[f64; 2]> {
        self.vhc.continuous_input(state, &self.params)
    }
}

/// `u_c + [F_hg, F_hg r_k]` with `F_hg = J (q̇₂ᵈᵉˢ - q̇₂) / (μ r_k)`.
#[derive(Clone, Copy, Debug)]
pub struct HighGainLaw {
    pub base: ContinuousLaw,
    /// Arm frozen at its value on the section, m.
    pub arm: f64,
    pub dq2_des: f64,
    pub mu: f64,
}

impl HighGainLaw {
    pub fn high_gain_force(&self, state: &FullState) -> f64 {
        self.base.params.inertia / (self.mu * self.arm) * (self.dq2_des - state.dtheta)
    }
}

impl ControlLaw for HighGainLaw {
    fn input(&self, state: &FullState) -> Result<[f64; 2]> {
        let u = self.base.input(state)?;
        let f = self.high_gain_force(state);
        Ok([u[0] + f, u[1] + f * self.arm])
    }
}

fn add_scaled(s: &FullState, k: &[f64; 6], h: f64) -> FullState {
    let a = s.to_array();
    FullState::from_array(std::array::from_fn(|i| a[i] + h * k[i]))
}

/// One classical Runge–Kutta step; the law is re-evaluated at every stage.
pub fn rk4_step<L: ControlLaw + ?Sized>(
    state: &FullState,
    law: &L,
    p: &StickParams,
    dt: f64,
) -> Result<FullState> {
    let f = |s: &FullState| -> Result<[f64; 6]> { Ok(state_derivative(s, law.input(s)?, p)) };
    let k1 = f(state)?;
    let k2 = f(&add_scaled(state, &k1, 0.5 * dt))?;
    let k3 = f(&add_scaled(state, &k2, 0.5 * dt))?;
    let k4 = f(&add_scaled(state, &k3, dt))?;
    let a = state.to_array();
    let next = FullState::from_array(std::array::from_fn(|i| {
        a[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }));
    if !next.is_finite() {
        return Err(Error::NonFiniteState { time: f64::NAN });
    }
    Ok(next)
}

/// `{ q₂ mod 2π = q2_star, q̇₂ > 0 }`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub q2_star: f64,
}

impl SectionSpec {
    pub fn new(q2_star: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&q2_star) {
            return Err(Error::InvalidParameter(format!(
                "section angle must lie in [0, 2pi), got {q2_star}"
            )));
        }
        Ok(Self { q2_star })
    }

    /// Signed angular distance to the section, wrapped to (-π, π].
    pub fn event(&self, theta: f64) -> f64 {
        wrap_angle(theta - self.q2_star)
    }

    pub fn contains(&self, state: &FullState, tol: f64) -> bool {
        self.event(state.theta).abs() <= tol && state.dtheta > 0.0
    }
}

/// State on the section: `z = [hx, hy, ḣx, ḣy, θ̇]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionState {
    pub hx: f64,
    pub hy: f64,
    pub dhx: f64,
    pub dhy: f64,
    pub dtheta: f64,
}

impl SectionState {
    pub fn from_full(s: &FullState) -> Self {
        Self {
            hx: s.hx,
            hy: s.hy,
            dhx: s.dhx,
            dhy: s.dhy,
            dtheta: s.dtheta,
        }
    }

    pub fn from_array(z: [f64; 5]) -> Self {
        Self {
            hx: z[0],
            hy: z[1],
            dhx: z[2],
            dhy: z[3],
            dtheta: z[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.hx, self.hy, self.dhx, self.dhy, self.dtheta]
    }

    pub fn to_full(&self, theta: f64) -> FullState {
        FullState {
            hx: self.hx,
            hy: self.hy,
            theta,
            dhx: self.dhx,
            dhy: self.dhy,
            dtheta: self.dtheta,
        }
    }

    pub fn distance_inf(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighGainConfig {
    /// Time constant of the velocity lag, s.
    pub mu: f64,
    /// Exit threshold on `|q̇₂ᵈᵉˢ - q̇₂|`, rad/s.
    pub eps3: f64,
    /// Simulated-time wall for one episode, s.
    pub timeout: f64,
}

impl Default for HighGainConfig {
    fn default() -> Self {
        Self {
            mu: 0.0005,
            eps3: 0.001,
            timeout: 0.1,
        }
    }
}

/// Missing fields take their defaults when deserialized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// RK4 step, s.
    pub step_size: f64,
    /// Section crossings are bisected until the time bracket is below this, s.
    /// Bisection keeps going to floating-point resolution so that crossing
    /// states depend smoothly on initial conditions.
    pub event_tolerance: f64,
    pub max_time: f64,
    /// Spacing of logged samples, s. Crossings and episode boundaries are
    /// always logged.
    pub log_interval: f64,
    pub high_gain: HighGainConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-5,
            event_tolerance: 1e-10,
            max_time: 60.0,
            log_interval: 1e-3,
            high_gain: HighGainConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_step(step_size: f64) -> Self {
        Self {
            step_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("step_size", self.step_size)?;
        positive("event_tolerance", self.event_tolerance)?;
        positive("max_time", self.max_time)?;
        positive("log_interval", self.log_interval)?;
        positive("high_gain.mu", self.high_gain.mu)?;
        positive("high_gain.eps3", self.high_gain.eps3)?;
        positive("high_gain.timeout", self.high_gain.timeout)?;
        if self.event_tolerance >= self.step_size {
            return Err(Error::InvalidParameter(
                "event_tolerance must be smaller than step_size".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: FullState,
    /// Total applied normal force, N.
    pub force: f64,
    /// Total moment divided by total force, m (NaN when the force vanishes).
    pub arm: f64,
    pub rho: [f64; 2],
    pub rho_dot: [f64; 2],
    /// Integral of motion of the reduced dynamics at (θ, θ̇).
    pub energy: f64,
}

/// What happened at one section crossing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    /// 1-based crossing index.
    pub k: usize,
    pub t: f64,
    /// Unwrapped orientation at the crossing.
    pub theta: f64,
    /// Section state immediately before any impulse.
    pub z: SectionState,
    pub energy: f64,
    /// Commanded impulse, N·s.
    pub impulse: f64,
    /// Arm on the section used for the impulse, m.
    pub arm: f64,
    /// Commanded jump `I r / J`, rad/s.
    pub dq2_jump: f64,
    pub high_gain_active: bool,
    pub high_gain_duration: f64,
    /// Largest |F_hg| during the episode, N.
    pub peak_high_gain_force: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub samples: Vec<Sample>,
    pub crossings: Vec<CrossingEvent>,
}

pub const CSV_HEADER: &str = "t,h_x,h_y,theta,dh_x,dh_y,dtheta,F,r,rho1,rho2,E,theta_wrapped";

impl TrajectoryLog {
    fn push(&mut self, s: Sample) {
        match self.samples.last() {
            Some(last) if s.t <= last.t => {}
            _ => self.samples.push(s),
        }
    }

    /// Writes the samples as CSV with [`CSV_HEADER`] columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            let st = &s.state;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                st.hx,
                st.hy,
                st.theta,
                st.dhx,
                st.dhy,
                st.dtheta,
                s.force,
                s.arm,
                s.rho[0],
                s.rho[1],
                s.energy,
                st.theta_wrapped()
            )?;
        }
        Ok(())
    }

    pub fn crossings_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.crossings)
    }
}

/// How a call to [`Simulator::advance`] stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// Crossed the section moving forward; the simulator sits on it.
    Section,
    /// Reached the terminal orientation.
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub duration: f64,
    pub start: FullState,
    pub end: FullState,
    pub dq2_des: f64,
    pub peak_high_gain_force: f64,
}

/// Stateful time-marcher for one run. Instances share nothing, so separate
/// runs can go on separate threads.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub params: StickParams,
    pub vhc: VhcSpec,
    pub cfg: SimConfig,
    state: FullState,
    time: f64,
    next_log: f64,
    last_crossing_theta: Option<f64>,
    log: TrajectoryLog,
    logging: bool,
    feasibility: ContactFeasibility,
}

/// Orientation change required before the same section can fire again.
const REARM_ANGLE: f64 = PI;

impl Simulator {
    pub fn new(initial: FullState, params: StickParams, vhc: VhcSpec, cfg: SimConfig) -> Self {
        Self {
            params,
            vhc,
            cfg,
            state: initial,
            time: 0.0,
            next_log: 0.0,
            last_crossing_theta: None,
            log: TrajectoryLog::default(),
            logging: true,
            feasibility: ContactFeasibility::new(),
        }
    }

    /// Disables sample logging (crossings are still recorded by callers).
    pub fn without_samples(mut self) -> Self {
        self.logging = false;
        self
    }

    /// Treats the initial state as lying on `section`, so that the first
    /// reported crossing is a full revolution later.
    pub fn starting_on(mut self, section: &SectionSpec) -> Self {
        if section.event(self.state.theta).abs() < 1e-6 {
            self.last_crossing_theta = Some(self.state.theta);
        }
        self
    }

    pub fn state(&self) -> &FullState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut TrajectoryLog {
        &mut self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    /// Contact checks on the applied input at every accepted step.
    pub fn feasibility(&self) -> &ContactFeasibility {
        &self.feasibility
    }

    fn observe<L: ControlLaw + ?Sized>(&mut self, law: &L) {
        let s = self.state;
        match law.input(&s) {
            Ok(u) => self.feasibility.observe_input(u, &self.params),
            Err(_) => {
                self.feasibility.samples += 1;
                self.feasibility.force_sign_constant = false;
                self.feasibility.violations += 1;
            }
        }
        if !manifold_sign_condition(s.theta, s.dtheta, &self.vhc, &self.params) {
            self.feasibility.manifold_condition_held = false;
        }
    }

    pub fn continuous_law(&self) -> ContinuousLaw {
        ContinuousLaw {
            vhc: self.vhc,
            params: self.params,
        }
    }

    /// Applies an instantaneous velocity change.
    pub fn set_state(&mut self, state: FullState) {
        self.state = state;
    }

    pub fn sample<L: ControlLaw + ?Sized>(&self, law: &L) -> Sample {
        let s = self.state;
        let u = law.input(&s).unwrap_or([f64::NAN, f64::NAN]);
        let err = self.vhc.constraint_error(&s);
        Sample {
            t: self.time,
            state: s,
            force: u[0],
            arm: u[1] / u[0],
            rho: err.rho,
            rho_dot: err.rho_dot,
            energy: energy(
                ReducedState::new(s.theta, s.dtheta),
                &self.vhc,
                &self.params,
            )
            .unwrap_or(f64::NAN),
        }
    }

    /// Logs the current state regardless of the sampling grid.
    pub fn record<L: ControlLaw + ?Sized>(&mut self, law: &L) {
        if self.logging {
            let s = self.sample(law);
            self.log.push(s);
        }
    }

    fn maybe_record<L: ControlLaw + ?Sized>(&mut self, law: &L) {
        if self.logging && self.time >= self.next_log - 1e-12 {
            self.record(law);
            while self.next_log <= self.time + 1e-12 {
                self.next_log += self.cfg.log_interval;
            }
        }
    }

    fn step_once<L: ControlLaw + ?Sized>(&self, law: &L, dt: f64) -> Result<FullState> {
        rk4_step(&self.state, law, &self.params, dt).map_err(|e| match e {
            Error::NonFiniteState { .. } => Error::NonFiniteState { time: self.time },
            e => e,
        })
    }

    /// Largest sub-step `τ ∈ [0, dt]` bracketing the zero of `g` from below.
    fn locate<L, G>(&self, law: &L, dt: f64, g: G) -> Result<(f64, FullState)>
    where
        L: ControlLaw + ?Sized,
        G: Fn(&FullState) -> f64,
    {
        let (mut lo, mut hi) = (0.0f64, dt);
        let mut hi_state = self.step_once(law, dt)?;
        loop {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= self.cfg.event_tolerance && (mid <= lo || mid >= hi) {
                break;
            }
            if mid <= lo || mid >= hi {
                break;
            }
            let s = self.step_once(law, mid)?;
            if g(&s) >= 0.0 {
                hi = mid;
                hi_state = s;
            } else {
                lo = mid;
            }
        }
        Ok((hi, hi_state))
    }

    fn section_fires(&self, section: &SectionSpec, before: &FullState, after: &FullState) -> bool {
        let g0 = section.event(before.theta);
        let g1 = section.event(after.theta);
        let armed = self
            .last_crossing_theta
            .is_none_or(|th| (after.theta - th).abs() > REARM_ANGLE);
        armed && g0 < 0.0 && g1 >= 0.0 && g1 - g0 < PI && after.dtheta > 0.0
    }

    /// Integrates under `law` until the section is crossed forward or the
    /// orientation reaches `target_theta` (whichever happens first).
    pub fn advance<L: ControlLaw + ?Sized>(
        &mut self,
        law: &L,
        section: Option<&SectionSpec>,
        target_theta: Option<f64>,
    ) -> Result<Stop> {
        if self.logging && self.log.samples.is_empty() {
            self.record(law);
            self.next_log = self.cfg.log_interval;
        }
        let dt = self.cfg.step_size;
        loop {
            if self.time > self.cfg.max_time {
                return Err(Error::NoCrossing {
                    max_time: self.cfg.max_time,
                });
            }
            let next = self.step_once(law, dt)?;

            let mut hit: Option<(f64, FullState, Stop)> = None;
            if let Some(sec) = section {
                if self.section_fires(sec, &self.state, &next) {
                    let (tau, s) = self.locate(law, dt, |s| sec.event(s.theta))?;
                    if s.dtheta > 0.0 {
                        hit = Some((tau, s, Stop::Section));
                    }
                }
            }
            if let Some(target) = target_theta {
                if self.state.theta < target && next.theta >= target {
                    let (tau, s) = self.locate(law, dt, |s| s.theta - target)?;
                    if hit.as_ref().is_none_or(|h| tau < h.0) {
                        hit = Some((tau, s, Stop::Target));
                    }
                }
            }

            match hit {
                Some((tau, s, stop)) => {
                    self.time += tau;
                    self.state = s;
                    if stop == Stop::Section {
                        self.last_crossing_theta = Some(s.theta);
                    }
                    self.record(law);
                    return Ok(stop);
                }
                None => {
                    self.time += dt;
                    self.state = next;
                    self.observe(law);
                    self.maybe_record(law);
                }
            }
        }
    }

    /// Integrates until the next forward section crossing.
    pub fn advance_to_section<L: ControlLaw + ?Sized>(
        &mut self,
        law: &L,
        section: &SectionSpec,
    ) -> Result<()> {
        self.advance(law, Some(section), None).map(|_| ())
    }

    /// Drives `q̇₂` toward `dq2_des` with the high-gain law at the frozen arm
    /// until `|q̇₂ᵈᵉˢ - q̇₂| <= ε₃`.
    pub fn high_gain_episode(&mut self, arm: f64, dq2_des: f64) -> Result<EpisodeReport> {
        let hg = self.cfg.high_gain;
        if !(arm.abs() >= crate::vhc::FORCE_FLOOR) {
            return Err(Error::DegenerateForce { force: arm });
        }
        let law = HighGainLaw {
            base: self.continuous_law(),
            arm,
            dq2_des,
            mu: hg.mu,
        };
        let start = self.state;
        let t0 = self.time;
        let mut peak = 0.0f64;
        self.record(&law);
        while (dq2_des - self.state.dtheta).abs() > hg.eps3 {
            if self.time - t0 > hg.timeout {
                return Err(Error::EpisodeTimeout {
                    timeout: hg.timeout,
                    residual: dq2_des - self.state.dtheta,
                });
            }
            peak = peak.max(law.high_gain_force(&self.state).abs());
            self.state = self.step_once(&law, self.cfg.step_size)?;
            self.time += self.cfg.step_size;
            self.observe(&law);
            self.maybe_record(&law);
        }
        self.record(&law);
        Ok(EpisodeReport {
            duration: self.time - t0,
            start,
            end: self.state,
            dq2_des,
            peak_high_gain_force: peak,
        })
    }
}

/// Takes `steps` fixed RK4 steps of size `dt`.
pub fn integrate_fixed<L: ControlLaw + ?Sized>(
    state: FullState,
    law: &L,
    p: &StickParams,
    dt: f64,
    steps: usize,
) -> Result<FullState> {
    let mut s = state;
    for i in 0..steps {
        s = rk4_step(&s, law, p, dt).map_err(|e| match e {
            Error::NonFiniteState { .. } => Error::NonFiniteState {
                time: i as f64 * dt,
            },
            e => e,
        })?;
    }
    Ok(s)
}

/// Runs `law` from `state` to the next forward crossing of `section`.
/// Returns the section state, the crossing time and the log.
pub fn integrate_to_section<L: ControlLaw + ?Sized>(
    state: FullState,
    law: &L,
    section: &SectionSpec,
    params: StickParams,
    vhc: VhcSpec,
    cfg: SimConfig,
) -> Result<(SectionState, f64, TrajectoryLog)> {
    let mut sim = Simulator::new(state, params, vhc, cfg).starting_on(section);
    sim.advance_to_section(law, section)?;
    let z = SectionState::from_full(sim.state());
    let t = sim.time();
    Ok((z, t, sim.into_log()))
}

/// Realizes a velocity jump with the high-gain law starting from `state`;
/// returns the exit state.
pub fn high_gain_episode(
    state: FullState,
    arm: f64,
    dq2_des: f64,
    params: StickParams,
    vhc: VhcSpec,
    cfg: SimConfig,
) -> Result<FullState> {
    let mut sim = Simulator::new(state, params, vhc, cfg).without_samples();
    Ok(sim.high_gain_episode(arm, dq2_des)?.end)
}

/// Period-wise summary used by reporting: time at which the orientation
/// first advanced by each full turn from `theta0`.
pub fn rotation_times(samples: &[Sample], theta0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut next = theta0 + TAU;
    for w in samples.windows(2) {
        while w[0].state.theta < next && w[1].state.theta >= next {
            let frac = (next - w[0].state.theta) / (w[1].state.theta - w[0].state.theta);
            out.push(w[0].t + frac * (w[1].t - w[0].t));
            next += TAU;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zero_dynamics::OrbitSpec;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn setup() -> (StickParams, VhcSpec) {
        (
            StickParams::reference(),
            VhcSpec::new(1.0, FRAC_PI_2).unwrap(),
        )
    }

    #[test]
    fn ballistic_step_is_exact() {
        let (p, _) = setup();
        let s = FullState::from_array([0.1, 0.2, 0.3, 1.0, 2.0, 3.0]);
        let dt = 0.01;
        let n = rk4_step(&s, &Passive, &p, dt).unwrap();
        let hy = 0.2 + 2.0 * dt - 0.5 * 9.81 * dt * dt;
        assert!((n.hy - hy).abs() < 1e-15);
        assert!((n.dhy - (2.0 - 9.81 * dt)).abs() < 1e-15);
        assert!((n.theta - (0.3 + 3.0 * dt)).abs() < 1e-15);
    }

    #[test]
    fn passive_energy_drift_per_step() {
        let (p, _) = setup();
        let mut s = FullState::from_array([0.0, 1.0, 0.4, 0.5, 3.0, 6.0]);
        let e0 = s.mechanical_energy(&p);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let n = rk4_step(&s, &Passive, &p, 1e-4).unwrap();
            worst = worst.max((n.mechanical_energy(&p) - s.mechanical_energy(&p)).abs());
            s = n;
        }
        assert!(worst <= 1e-10, "{worst}");
        assert!((s.mechanical_energy(&p) - e0).abs() <= 1e-8);
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let (p, _) = setup();
        let blowup = |_: &FullState| Ok([f64::INFINITY, 0.0]);
        let s = FullState::default();
        assert!(matches!(
            rk4_step(&s, &blowup, &p, 1e-3),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn section_event_wraps() {
        let sec = SectionSpec::new(FRAC_PI_6).unwrap();
        assert!(sec.event(FRAC_PI_6 + 4.0 * PI).abs() < 1e-12);
        assert!(sec.event(FRAC_PI_6 - 0.1) < 0.0);
        assert!(SectionSpec::new(-0.1).is_err());
        assert!(SectionSpec::new(TAU).is_err());
    }

    #[test]
    fn crossing_is_localized() {
        let (p, vhc) = setup();
        let orbit = OrbitSpec { energy: 22.19, vhc };
        let q0 = FRAC_PI_6 - 0.01;
        let dq = crate::zero_dynamics::dq2_on_orbit(q0, &orbit, &p).unwrap();
        let law = ContinuousLaw { vhc, params: p };
        let sec = SectionSpec::new(FRAC_PI_6).unwrap();
        let (z, t, _) = integrate_to_section(
            vhc.manifold_state(q0, dq),
            &law,
            &sec,
            p,
            vhc,
            SimConfig::with_step(1e-4),
        )
        .unwrap();
        assert!(t > 0.0 && t < 0.01);
        let zstar = [0.5, -0.8660, 6.7844, 3.9170, 7.8340];
        for (a, b) in z.to_array().iter().zip(zstar) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn starting_on_section_takes_full_turn() {
        let (p, vhc) = setup();
        let orbit = OrbitSpec { energy: 22.19, vhc };
        let dq = crate::zero_dynamics::dq2_on_orbit(FRAC_PI_6, &orbit, &p).unwrap();
        let law = ContinuousLaw { vhc, params: p };
        let sec = SectionSpec::new(FRAC_PI_6).unwrap();
        let mut sim = Simulator::new(
            vhc.manifold_state(FRAC_PI_6, dq),
            p,
            vhc,
            SimConfig::with_step(1e-4),
        )
        .starting_on(&sec);
        sim.advance_to_section(&law, &sec).unwrap();
        assert!((sim.state().theta - (FRAC_PI_6 + TAU)).abs() < 1e-9);
        assert!(sec.event(sim.state().theta).abs() <= 1e-9);
        assert!(sim.state().dtheta > 0.0);
    }

    #[test]
    fn episode_exits_immediately_when_converged() {
        let (p, vhc) = setup();
        let s = vhc.manifold_state(0.3, 7.0);
        let mut sim = Simulator::new(s, p, vhc, SimConfig::default());
        let rep = sim.high_gain_episode(-0.0015, 7.0).unwrap();
        assert_eq!(rep.duration, 0.0);
        assert_eq!(rep.end, s);
    }

    #[test]
    fn timestamps_increase() {
        let (p, vhc) = setup();
        let s = FullState::from_array([0.1206, -1.1608, 0.0, 7.2965, -0.8040, 9.1055]);
        let law = ContinuousLaw { vhc, params: p };
        let sec = SectionSpec::new(FRAC_PI_6).unwrap();
        let mut sim = Simulator::new(s, p, vhc, SimConfig::with_step(1e-4));
        sim.advance_to_section(&law, &sec).unwrap();
        sim.advance_to_section(&law, &sec).unwrap();
        let samples = &sim.log().samples;
        assert!(samples.len() > 100);
        assert!(samples.windows(2).all(|w| w[1].t > w[0].t));
        let mut buf = Vec::new();
        sim.log().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), samples.len() + 1);
        assert!(text.lines().nth(1).unwrap().split(',').count() == 13);
    }
}
