//! Reduced dynamics of the orientation on the constraint manifold.
//!
//! With the center of mass held on the circle, the orientation obeys
//!
//! ```text
//! q̈₂ = -(g sin q₂)/(R sin φ) + cot φ · q̇₂²
//! ```
//!
//! which conserves `E = ½ M(q₂) q̇₂² + P(q₂)` with `M = exp(-2 q₂ cot φ)`.
//! For φ = ±π/2 the mass is constant and the flow is a pendulum; any other
//! admissible φ has no closed orbits.

use serde::{Deserialize, Serialize};

use crate::dynamics::StickParams;
use crate::vhc::VhcSpec;
use crate::{Error, Result};

/// Tolerance for classifying an orbit as the separatrix.
pub const SEPARATRIX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub q2: f64,
    pub dq2: f64,
}

impl ReducedState {
    pub fn new(q2: f64, dq2: f64) -> Self {
        Self { q2, dq2 }
    }
}

/// Level set `E = energy` of the integral of motion on the manifold of `vhc`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub energy: f64,
    pub vhc: VhcSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Propeller,
    Oscillation,
    Separatrix,
    Aperiodic,
}

pub fn reduced_accel(s: ReducedState, vhc: &VhcSpec, p: &StickParams) -> Result<f64> {
    vhc.check_nonsingular()?;
    Ok(-p.gravity * s.q2.sin() / (vhc.radius * vhc.phase.sin()) + vhc.cot_phase() * s.dq2 * s.dq2)
}

/// `M(q₂) = exp(-2 q₂ cot φ)`
pub fn reduced_mass(q2: f64, vhc: &VhcSpec) -> Result<f64> {
    vhc.check_nonsingular()?;
    Ok((-2.0 * q2 * vhc.cot_phase()).exp())
}

/// `P(q₂) = -g M(q₂) (2 sin q₂ cot φ + cos q₂) / (R sin φ (4 cot² φ + 1))`
pub fn reduced_potential(q2: f64, vhc: &VhcSpec, p: &StickParams) -> Result<f64> {
    let m = reduced_mass(q2, vhc)?;
    let cot = vhc.cot_phase();
    let (s, c) = q2.sin_cos();
    Ok(-p.gravity * m * (2.0 * s * cot + c)
        / (vhc.radius * vhc.phase.sin() * (4.0 * cot * cot + 1.0)))
}

/// Integral of motion `E = ½ M q̇₂² + P`.
pub fn energy(s: ReducedState, vhc: &VhcSpec, p: &StickParams) -> Result<f64> {
    let m = reduced_mass(s.q2, vhc)?;
    let pot = reduced_potential(s.q2, vhc, p)?;
    Ok(0.5 * m * s.dq2 * s.dq2 + pot)
}

/// Largest value of the reduced potential for φ = ±π/2, i.e. the separatrix
/// energy `g / (R |sin φ|)`.
pub fn separatrix_energy(vhc: &VhcSpec, p: &StickParams) -> f64 {
    p.gravity / (vhc.radius * vhc.phase.sin().abs())
}

pub fn classify_orbit(spec: &OrbitSpec, p: &StickParams) -> OrbitClass {
    if !spec.vhc.is_pendulum_phase() {
        return OrbitClass::Aperiodic;
    }
    let top = separatrix_energy(&spec.vhc, p);
    if (spec.energy - top).abs() <= SEPARATRIX_TOL * top.max(1.0) {
        OrbitClass::Separatrix
    } else if spec.energy > top {
        OrbitClass::Propeller
    } else {
        OrbitClass::Oscillation
    }
}

/// Positive rate `q̇₂` on the orbit at angle `q2`.
pub fn dq2_on_orbit(q2: f64, spec: &OrbitSpec, p: &StickParams) -> Result<f64> {
    if !spec.vhc.is_pendulum_phase() {
        return Err(Error::InvalidParameter(
            "orbit rates are only defined for phase = +-pi/2".into(),
        ));
    }
    let m = reduced_mass(q2, &spec.vhc)?;
    let pot = reduced_potential(q2, &spec.vhc, p)?;
    let excess = spec.energy - pot;
    if excess < 0.0 {
        return Err(Error::BelowPotential {
            q2,
            energy: spec.energy,
            potential: pot,
        });
    }
    Ok((2.0 * excess / m).sqrt())
}
