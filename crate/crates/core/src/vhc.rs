//! Circular virtual holonomic constraint and the feedback-linearizing
//! controller that enforces it.
//!
//! The constraint asks the center of mass to ride a circle of radius `R`
//! whose polar angle lags the stick orientation by `φ`:
//!
//! ```text
//! ρ(q) = q₁ - Φ(q₂),   Φ(q₂) = R [cos(q₂ - φ), sin(q₂ - φ)]ᵀ
//! ```
//!
//! The continuous control `u_c` solves
//! `[B - Φ' D] u_c = -A + Φ'' q̇₂² + Φ' C - k_p ρ - k_d ρ̇`
//! so that `ρ̈ = -k_p ρ - k_d ρ̇` in closed loop.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, FullState, StandardForm, StickParams};
use crate::numerics::solve_2x2;
use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// `|sin φ|` below this makes the decoupling matrix singular.
pub const SINGULAR_PHASE_TOL: f64 = 1e-9;
/// `|cos φ|` below this is treated as exactly zero (φ = ±π/2).
pub const ZERO_COT_TOL: f64 = 1e-12;
/// `|F_c|` below this leaves the moment arm undefined.
pub const FORCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VhcSpec {
    /// Circle radius R, m.
    pub radius: f64,
    /// Phase offset φ ∈ (-π, π], rad.
    pub phase: f64,
    pub kp: Mat2,
    pub kd: Mat2,
}

fn is_spd(m: &Mat2) -> bool {
    m[0][1] == m[1][0] && m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
}

impl VhcSpec {
    pub const DEFAULT_KP: f64 = 40.0;
    pub const DEFAULT_KD: f64 = 5.5;

    /// Circle of radius `radius` at phase `phase` with `k_p = 40 I`, `k_d = 5.5 I`.
    pub fn new(radius: f64, phase: f64) -> Result<Self> {
        let spec = Self {
            radius,
            phase,
            kp: [[Self::DEFAULT_KP, 0.0], [0.0, Self::DEFAULT_KP]],
            kd: [[Self::DEFAULT_KD, 0.0], [0.0, Self::DEFAULT_KD]],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_gains(mut self, kp: Mat2, kd: Mat2) -> Result<Self> {
        self.kp = kp;
        self.kd = kd;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.phase > -std::f64::consts::PI && self.phase <= std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "phase must lie in (-pi, pi], got {}",
                self.phase
            )));
        }
        self.check_nonsingular()?;
        if !is_spd(&self.kp) || !is_spd(&self.kd) {
            return Err(Error::InvalidParameter(
                "k_p and k_d must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }

    pub fn check_nonsingular(&self) -> Result<()> {
        let s = self.phase.sin();
        if s.abs() < SINGULAR_PHASE_TOL {
            return Err(Error::SingularVhc { sin_phase: s });
        }
        Ok(())
    }

    /// `cot φ`, snapped to exactly zero for φ = ±π/2.
    pub fn cot_phase(&self) -> f64 {
        let (s, c) = self.phase.sin_cos();
        if c.abs() < ZERO_COT_TOL {
            0.0
        } else {
            c / s
        }
    }

    /// True for φ = ±π/2, where the reduced dynamics is a pendulum.
    pub fn is_pendulum_phase(&self) -> bool {
        self.cot_phase() == 0.0
    }

    /// `Φ(q₂)`, `∂Φ/∂q₂`, `∂²Φ/∂q₂²`.
    pub fn phi_and_derivatives(&self, q2: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (s, c) = (q2 - self.phase).sin_cos();
        let r = self.radius;
        ([r * c, r * s], [-r * s, r * c], [-r * c, -r * s])
    }

    /// State on the constraint manifold with orientation `q2` and rate `dq2`.
    pub fn manifold_state(&self, q2: f64, dq2: f64) -> FullState {
        let (phi, dphi, _) = self.phi_and_derivatives(q2);
        FullState {
            hx: phi[0],
            hy: phi[1],
            theta: q2,
            dhx: dphi[0] * dq2,
            dhy: dphi[1] * dq2,
            dtheta: dq2,
        }
    }

    pub fn constraint_error(&self, state: &FullState) -> ConstraintError {
        let (phi, dphi, _) = self.phi_and_derivatives(state.theta);
        ConstraintError {
            rho: [state.hx - phi[0], state.hy - phi[1]],
            rho_dot: [
                state.dhx - dphi[0] * state.dtheta,
                state.dhy - dphi[1] * state.dtheta,
            ],
        }
    }

    /// `B - (∂Φ/∂q₂) D` and its determinant.
    pub fn decoupling_matrix(&self, q2: f64, p: &StickParams) -> Result<(Mat2, f64)> {
        self.check_nonsingular()?;
        let sf = StandardForm::at(q2, p);
        let (_, dphi, _) = self.phi_and_derivatives(q2);
        let mut m = sf.b;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= dphi[i] * sf.d[j];
            }
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Ok((m, det))
    }

    /// Analytic determinant `(R / (m J)) sin φ`.
    pub fn decoupling_determinant(&self, p: &StickParams) -> f64 {
        self.radius / (p.mass * p.inertia) * self.phase.sin()
    }

    /// Generalized continuous control `u_c = [F_c, F_c r_c]`.
    pub fn continuous_input(&self, state: &FullState, p: &StickParams) -> Result<[f64; 2]> {
        let (m, _) = self.decoupling_matrix(state.theta, p)?;
        let sf = StandardForm::at(state.theta, p);
        let (_, dphi, ddphi) = self.phi_and_derivatives(state.theta);
        let err = self.constraint_error(state);
        let w2 = state.dtheta * state.dtheta;
        let mut rhs = [0.0; 2];
        for i in 0..2 {
            rhs[i] = -sf.a[i] + ddphi[i] * w2 + dphi[i] * sf.c
                - (self.kp[i][0] * err.rho[0] + self.kp[i][1] * err.rho[1])
                - (self.kd[i][0] * err.rho_dot[0] + self.kd[i][1] * err.rho_dot[1]);
        }
        Ok(solve_2x2(m, rhs)?)
    }

    /// `(F_c, r_c)`; fails with `DegenerateForce` when `|F_c| < 1e-6 N`.
    pub fn continuous_control(&self, state: &FullState, p: &StickParams) -> Result<ControlInput> {
        ControlInput::from_generalized(self.continuous_input(state, p)?, FORCE_FLOOR)
    }

    /// On-manifold force `(mR / sin φ)[q̇₂² - (g/R) sin(q₂ - φ)]`.
    pub fn manifold_force(&self, q2: f64, dq2: f64, p: &StickParams) -> f64 {
        let r = self.radius;
        p.mass * r / self.phase.sin() * (dq2 * dq2 - p.gravity / r * (q2 - self.phase).sin())
    }

    /// On-manifold arm `(J / mR)[q̇₂² cos φ - (g/R) sin q₂] / [q̇₂² - (g/R) sin(q₂ - φ)]`.
    pub fn manifold_arm(&self, q2: f64, dq2: f64, p: &StickParams) -> f64 {
        let r = self.radius;
        let w2 = dq2 * dq2;
        let g_r = p.gravity / r;
        p.inertia / (p.mass * r) * (w2 * self.phase.cos() - g_r * q2.sin())
            / (w2 - g_r * (q2 - self.phase).sin())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintError {
    pub rho: [f64; 2],
    pub rho_dot: [f64; 2],
}

impl ConstraintError {
    pub fn rho_norm(&self) -> f64 {
        self.rho[0].hypot(self.rho[1])
    }

    pub fn rho_dot_norm(&self) -> f64 {
        self.rho_dot[0].hypot(self.rho_dot[1])
    }
}

/// Running check that the pushing contact stays valid: the force never
/// changes sign and the contact point stays on the stick.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactFeasibility {
    pub samples: usize,
    /// No sign change (and no degenerate force) in any observed sample.
    pub force_sign_constant: bool,
    /// Every observed arm was strictly inside (-ℓ/2, ℓ/2).
    pub arm_inside: bool,
    /// Every observed state satisfied `q̇₂² > (g/R) sin(q₂ - φ)`.
    pub manifold_condition_held: bool,
    pub force_sign: f64,
    pub min_abs_force: f64,
    pub max_abs_arm: f64,
    pub violations: usize,
}

impl ContactFeasibility {
    pub fn new() -> Self {
        Self {
            samples: 0,
            force_sign_constant: true,
            arm_inside: true,
            manifold_condition_held: true,
            force_sign: 0.0,
            min_abs_force: f64::INFINITY,
            max_abs_arm: 0.0,
            violations: 0,
        }
    }

    /// Records an applied input (`F`, `F·r`).
    pub fn observe_input(&mut self, u: [f64; 2], p: &StickParams) {
        self.samples += 1;
        let mut ok = true;
        let force = u[0];
        self.min_abs_force = self.min_abs_force.min(force.abs());
        if force.abs() < FORCE_FLOOR {
            self.force_sign_constant = false;
            ok = false;
        } else {
            let sign = force.signum();
            if self.force_sign == 0.0 {
                self.force_sign = sign;
            } else if sign != self.force_sign {
                self.force_sign_constant = false;
                ok = false;
            }
            let arm = u[1] / force;
            self.max_abs_arm = self.max_abs_arm.max(arm.abs());
            if arm.abs() >= p.half_length() {
                self.arm_inside = false;
                ok = false;
            }
        }
        if !ok {
            self.violations += 1;
        }
    }

    /// Evaluates `u_c` at `state` and records it together with the
    /// on-manifold sign condition.
    pub fn observe_state(&mut self, state: &FullState, spec: &VhcSpec, p: &StickParams) {
        if !manifold_sign_condition(state.theta, state.dtheta, spec, p) {
            self.manifold_condition_held = false;
        }
        match spec.continuous_input(state, p) {
            Ok(u) => self.observe_input(u, p),
            Err(_) => {
                self.samples += 1;
                self.force_sign_constant = false;
                self.violations += 1;
            }
        }
    }

    pub fn feasible(&self) -> bool {
        self.force_sign_constant && self.arm_inside
    }
}

/// `q̇₂² > (g/R) sin(q₂ - φ)`: on the manifold the force cannot reach zero.
pub fn manifold_sign_condition(q2: f64, dq2: f64, spec: &VhcSpec, p: &StickParams) -> bool {
    dq2 * dq2 > p.gravity / spec.radius * (q2 - spec.phase).sin()
}
