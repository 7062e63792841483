use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

use devilstick::dynamics::{FullState, StickParams};
use devilstick::icpm::{fixed_point, stabilize_run, synthesize_gain, Feedback, Icpm, SectionState};
use devilstick::numerics::Matrix;
use devilstick::sim::{SectionSpec, SimConfig};
use devilstick::vhc::VhcSpec;
use devilstick::zero_dynamics::OrbitSpec;
use proptest::prelude::*;

const PERIODIC_START: [f64; 6] = [0.1206, -1.1608, 0.0, 7.2965, -0.8040, 9.1055];

fn icpm(step: f64) -> Icpm {
    Icpm {
        params: StickParams::reference(),
        vhc: VhcSpec::new(1.0, FRAC_PI_2).unwrap(),
        section: SectionSpec::new(FRAC_PI_6).unwrap(),
        sim: SimConfig::with_step(step),
    }
}

fn z_star(m: &Icpm) -> SectionState {
    fixed_point(
        &OrbitSpec {
            energy: 22.19,
            vhc: m.vhc,
        },
        &m.section,
        &m.params,
    )
    .unwrap()
}

#[test]
fn fixed_point_residual_at_fine_step() {
    let m = icpm(1e-5);
    let z = z_star(&m);
    assert!(m.map(&z, 0.0).unwrap().distance_inf(&z) <= 1e-6);
}

#[test]
fn impulse_moves_the_map_along_b() {
    let m = icpm(1e-4);
    let z = z_star(&m);
    let lin = m.linearize(&z, 1e-6, 1e-6).unwrap();
    let i = 1e-3;
    let next = m.map(&z, i).unwrap().to_array();
    for k in 0..5 {
        let predicted = lin.base.to_array()[k] + lin.b[k] * i;
        assert!(
            (next[k] - predicted).abs() < 1e-4 * (1.0 + predicted.abs()),
            "{k}"
        );
    }
    assert!(
        lin.r_star < 0.0 && (lin.r_star + 0.001474).abs() < 1e-5,
        "{}",
        lin.r_star
    );
}

#[test]
fn finite_difference_error_shrinks_linearly() {
    let m = icpm(1e-4);
    let z = z_star(&m);
    let sweep = m.epsilon_sweep(&z, &[4e-3, 2e-3, 1e-3]).unwrap();
    let (d1, d2) = (sweep.consecutive_change[0], sweep.consecutive_change[1]);
    assert!(d2 <= 0.6 * d1, "{d1:e} -> {d2:e}");
}

#[test]
fn synthesized_gain_stabilizes_linearization() {
    let m = icpm(1e-4);
    let lin = m.linearize(&z_star(&m), 1e-6, 1e-6).unwrap();
    let g = synthesize_gain(&lin.a, &lin.b, &Matrix::identity(5), 2.0).unwrap();
    assert!(g.open_loop_spectral_radius >= 1.0 - 1e-4);
    assert!(g.closed_loop_spectral_radius < 1.0);
    assert!(g.k.iter().all(|k| *k < 0.0));
}

#[test]
fn run_on_the_orbit_needs_no_impulses() {
    let m = icpm(1e-4);
    let z = z_star(&m);
    let fb = Feedback {
        gain: vec![-0.5406, -0.3149, -0.0318, -0.1335, -0.0163],
        z_star: z,
    };
    let start = z.to_full(FRAC_PI_6);
    let run = stabilize_run(start, &m, Some(&fb), 3).unwrap();
    assert_eq!(run.log.crossings.len(), 3);
    for c in &run.log.crossings {
        assert!(c.impulse.abs() < 1e-5, "{}", c.impulse);
        assert!(!c.high_gain_active);
    }
    assert!((run.final_energy - 22.19).abs() < 1e-6);
    assert!(run.feasibility.feasible());
}

#[test]
fn periodic_run_signs_and_convergence() {
    let m = icpm(1e-5);
    let z = z_star(&m);
    let lin = m.linearize(&z, 1e-6, 1e-6).unwrap();
    let g = synthesize_gain(&lin.a, &lin.b, &Matrix::identity(5), 2.0).unwrap();
    let fb = Feedback {
        gain: g.k,
        z_star: z,
    };
    let run = stabilize_run(FullState::from_array(PERIODIC_START), &m, Some(&fb), 8).unwrap();
    assert_eq!(run.log.crossings.len(), 8);
    assert!(run.impulses().iter().all(|i| *i > 0.0));
    assert!(run.feasibility.force_sign_constant && run.feasibility.force_sign > 0.0);
    assert!(run.feasibility.arm_inside);
    let gaps: Vec<f64> = run
        .log
        .crossings
        .iter()
        .map(|c| (c.energy - 22.19).abs())
        .collect();
    for w in gaps[1..].windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
    let errors: Vec<f64> = run
        .log
        .crossings
        .iter()
        .map(|c| c.z.distance_inf(&z))
        .collect();
    assert!(errors[2..].windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    assert!((run.duration - 7.90).abs() < 0.03 * 7.90);
}

#[test]
fn feedback_disabled_settles_to_lower_orbit() {
    let m = icpm(1e-5);
    let run = stabilize_run(FullState::from_array(PERIODIC_START), &m, None, 8).unwrap();
    assert!(
        (run.final_energy - 18.4408).abs() < 0.05,
        "{}",
        run.final_energy
    );
    assert!(run
        .log
        .crossings
        .iter()
        .all(|c| c.impulse == 0.0 && !c.high_gain_active));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn small_perturbations_stay_close(d in prop::array::uniform5(-1e-4f64..1e-4)) {
        let m = icpm(1e-4);
        let z = z_star(&m);
        let mut zp = z.to_array();
        for (x, e) in zp.iter_mut().zip(d) {
            *x += e;
        }
        let next = m.map(&SectionState::from_array(zp), 0.0).unwrap();
        let size = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // ‖𝒜‖∞ is about 9.2; allow a margin for the nonlinearity
        prop_assert!(next.distance_inf(&z) <= 10.0 * size + 1e-9);
    }
}
