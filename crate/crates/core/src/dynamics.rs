//! Planar rigid-body model of a stick pushed by a single normal force.
//!
//! The stick has mass `m`, length `ℓ` and central inertia `J`. A force `F`
//! acts normal to the stick at signed distance `r` from the center of mass, so
//! the generalized input is `u = [F, F·r]`:
//!
//! ```text
//! ḧx = -(sin θ / m) F
//! ḧy = -g + (cos θ / m) F
//! θ̈  = F r / J
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical constants of the stick, SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StickParams {
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// kg·m²
    pub inertia: f64,
    /// m/s²
    pub gravity: f64,
}

impl StickParams {
    pub const DEFAULT_GRAVITY: f64 = 9.81;

    pub fn new(mass: f64, length: f64, inertia: f64, gravity: f64) -> Result<Self> {
        let p = Self {
            mass,
            length,
            inertia,
            gravity,
        };
        p.validate()?;
        Ok(p)
    }

    /// m = 0.1 kg, ℓ = 0.5 m, J = 0.0021 kg·m² (mℓ²/12 rounded), g = 9.81 m/s².
    pub fn reference() -> Self {
        Self {
            mass: 0.1,
            length: 0.5,
            inertia: 0.0021,
            gravity: Self::DEFAULT_GRAVITY,
        }
    }

    /// Same stick, inertia of a uniform rod `mℓ²/12`.
    pub fn uniform_rod(mass: f64, length: f64, gravity: f64) -> Result<Self> {
        Self::new(mass, length, mass * length * length / 12.0, gravity)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("length", self.length),
            ("inertia", self.inertia),
            ("gravity", self.gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let rod = self.mass * self.length * self.length / 12.0;
        if (self.inertia - rod).abs() > 0.25 * rod {
            log::warn!(
                "inertia {} differs from uniform-rod value {rod:.6} by more than 25%",
                self.inertia
            );
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }
}

/// Configuration and velocity of the stick. `theta` is unwrapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullState {
    pub hx: f64,
    pub hy: f64,
    pub theta: f64,
    pub dhx: f64,
    pub dhy: f64,
    pub dtheta: f64,
}

impl FullState {
    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            hx: a[0],
            hy: a[1],
            theta: a[2],
            dhx: a[3],
            dhy: a[4],
            dtheta: a[5],
        }
    }

    /// `[hx, hy, θ, ḣx, ḣy, θ̇]`
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.hx,
            self.hy,
            self.theta,
            self.dhx,
            self.dhy,
            self.dtheta,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// θ wrapped to (-π, π].
    pub fn theta_wrapped(&self) -> f64 {
        wrap_angle(self.theta)
    }

    /// Kinetic plus gravitational energy `T + V`.
    pub fn mechanical_energy(&self, p: &StickParams) -> f64 {
        0.5 * p.mass * (self.dhx * self.dhx + self.dhy * self.dhy)
            + 0.5 * p.inertia * self.dtheta * self.dtheta
            + p.mass * p.gravity * self.hy
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Normal force `F` and its signed arm `r` from the center of mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub force: f64,
    pub arm: f64,
}

impl ControlInput {
    pub fn new(force: f64, arm: f64) -> Self {
        Self { force, arm }
    }

    /// Recovers `(F, r)` from `u = [F, F·r]`; fails when `|F|` is below `force_floor`.
    pub fn from_generalized(u: [f64; 2], force_floor: f64) -> Result<Self> {
        if !(u[0].abs() >= force_floor) {
            return Err(Error::DegenerateForce { force: u[0] });
        }
        Ok(Self {
            force: u[0],
            arm: u[1] / u[0],
        })
    }

    /// `u = [F, F·r]`
    pub fn generalized(&self) -> [f64; 2] {
        [self.force, self.force * self.arm]
    }

    /// True when the contact point lies strictly on the stick.
    pub fn arm_on_stick(&self, p: &StickParams) -> bool {
        self.arm.abs() < p.half_length()
    }
}

/// Accelerations `(ḧx, ḧy, θ̈)` under the generalized input `u = [F, F·r]`.
pub fn accelerations(state: &FullState, u: [f64; 2], p: &StickParams) -> [f64; 3] {
    let (s, c) = state.theta.sin_cos();
    [
        -s / p.mass * u[0],
        -p.gravity + c / p.mass * u[0],
        u[1] / p.inertia,
    ]
}

/// Control-affine split `q̈₁ = A + B u`, `q̈₂ = C + D u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandardForm {
    pub a: [f64; 2],
    pub b: [[f64; 2]; 2],
    pub c: f64,
    pub d: [f64; 2],
}

impl StandardForm {
    pub fn at(theta: f64, p: &StickParams) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            a: [0.0, -p.gravity],
            b: [[-s / p.mass, 0.0], [c / p.mass, 0.0]],
            c: 0.0,
            d: [0.0, 1.0 / p.inertia],
        }
    }

    /// `B u`
    pub fn b_times(&self, u: [f64; 2]) -> [f64; 2] {
        [
            self.b[0][0] * u[0] + self.b[0][1] * u[1],
            self.b[1][0] * u[0] + self.b[1][1] * u[1],
        ]
    }

    /// `D u`
    pub fn d_times(&self, u: [f64; 2]) -> f64 {
        self.d[0] * u[0] + self.d[1] * u[1]
    }
}

/// Time derivative of the full state.
pub fn state_derivative(state: &FullState, u: [f64; 2], p: &StickParams) -> [f64; 6] {
    let acc = accelerations(state, u, p);
    [state.dhx, state.dhy, state.dtheta, acc[0], acc[1], acc[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn free_fall() {
        let p = StickParams::reference();
        let s = FullState {
            theta: 0.7,
            ..Default::default()
        };
        assert_eq!(accelerations(&s, [0.0, 0.0], &p), [-0.0, -9.81, 0.0]);
    }

    #[test]
    fn hover_cancels_gravity() {
        let p = StickParams::reference();
        let s = FullState::default();
        let acc = accelerations(&s, [p.mass * p.gravity, 0.0], &p);
        assert_eq!(acc, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn tilted_push_against_hand_evaluation() {
        let p = StickParams::reference();
        let theta = PI / 6.0;
        let (force, arm) = (7.381, -0.001474);
        let s = FullState {
            theta,
            ..Default::default()
        };
        let acc = accelerations(&s, ControlInput::new(force, arm).generalized(), &p);
        // sin(π/6) = 1/2, cos(π/6) = √3/2
        let expect = [
            -0.5 * force / 0.1,
            -9.81 + 0.75f64.sqrt() * force / 0.1,
            force * arm / 0.0021,
        ];
        for (a, e) in acc.iter().zip(expect) {
            assert!((a - e).abs() <= 1e-12 * e.abs().max(1.0), "{a} vs {e}");
        }
        assert!((acc[0] + 36.905).abs() < 1e-9);
    }

    #[test]
    fn standard_form_special_angles() {
        let p = StickParams::reference();
        let f0 = StandardForm::at(0.0, &p);
        assert_eq!(f0.b, [[-0.0, 0.0], [10.0, 0.0]]);
        let f90 = StandardForm::at(PI / 2.0, &p);
        assert_eq!(f90.b[0], [-10.0, 0.0]);
        assert!(f90.b[1][0].abs() < 1e-15);
        assert_eq!(f0.a, [0.0, -9.81]);
        assert_eq!(f0.c, 0.0);
        assert_eq!(f0.d[0], 0.0);
        assert!((f0.d[1] - 476.190476).abs() < 1e-5);
    }

    #[test]
    fn rejects_nonpositive_params() {
        assert!(StickParams::new(0.0, 0.5, 0.002, 9.81).is_err());
        assert!(StickParams::new(0.1, 0.5, -1.0, 9.81).is_err());
        assert!(StickParams::new(0.1, f64::NAN, 0.002, 9.81).is_err());
        assert!(StickParams::uniform_rod(0.1, 0.5, 9.81).is_ok());
    }

    #[test]
    fn degenerate_force_has_no_arm() {
        assert!(matches!(
            ControlInput::from_generalized([1e-9, 1.0], 1e-6),
            Err(Error::DegenerateForce { .. })
        ));
        let c = ControlInput::from_generalized([2.0, 0.5], 1e-6).unwrap();
        assert_eq!(c.arm, 0.25);
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(16.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }

    fn finite_state() -> impl Strategy<Value = FullState> {
        prop::array::uniform6(-10.0f64..10.0).prop_map(FullState::from_array)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn standard_form_reproduces_equations_of_motion(
            s in finite_state(),
            force in -20.0f64..20.0,
            arm in -0.3f64..0.3,
        ) {
            let p = StickParams::reference();
            let u = ControlInput::new(force, arm).generalized();
            let acc = accelerations(&s, u, &p);
            let sf = StandardForm::at(s.theta, &p);
            let bu = sf.b_times(u);
            let q1 = [sf.a[0] + bu[0], sf.a[1] + bu[1]];
            let q2 = sf.c + sf.d_times(u);
            prop_assert!((q1[0] - acc[0]).abs() <= 1e-12 * acc[0].abs().max(1.0));
            prop_assert!((q1[1] - acc[1]).abs() <= 1e-12 * acc[1].abs().max(1.0));
            prop_assert!((q2 - acc[2]).abs() <= 1e-12 * acc[2].abs().max(1.0));
        }

        #[test]
        fn rotation_depends_only_on_moment(
            s in finite_state(),
            force in 0.5f64..20.0,
            arm in -0.3f64..0.3,
            k in 0.25f64..4.0,
        ) {
            let p = StickParams::reference();
            let a = accelerations(&s, ControlInput::new(force, arm).generalized(), &p);
            let b = accelerations(&s, ControlInput::new(force * k, arm / k).generalized(), &p);
            prop_assert!((a[2] - b[2]).abs() <= 1e-12 * a[2].abs().max(1.0));
        }
    }
}
