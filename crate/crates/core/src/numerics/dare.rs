//! Discrete algebraic Riccati equation by fixed-point iteration.

use serde::{Deserialize, Serialize};

use super::{spectral_radius, LinalgError, Lu, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DareOptions {
    /// Stop once `‖P_{k+1} - P_k‖∞ <= step_tol · max(1, ‖P_k‖∞)`.
    pub step_tol: f64,
    /// Accept the solution when the Riccati residual is below
    /// `residual_tol · max(1, ‖P‖∞)`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Iterates whose norm exceeds this are treated as divergent.
    pub divergence_bound: f64,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-12,
            residual_tol: 1e-9,
            max_iterations: 200_000,
            divergence_bound: 1e12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DareSolution {
    /// Stabilizing solution P.
    pub cost: Matrix,
    /// Feedback gain K for the convention `u = -K x`.
    pub gain: Matrix,
    pub iterations: usize,
    /// `‖P - Ric(P)‖∞` (absolute).
    pub residual_norm: f64,
    /// Spectral radius of `A - B K`.
    pub closed_loop_radius: f64,
}

struct Problem<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    q: &'a Matrix,
    r: &'a Matrix,
    at: Matrix,
    bt: Matrix,
}

impl Problem<'_> {
    /// Gain `(R + BᵀPB)⁻¹ BᵀPA`.
    fn gain(&self, p: &Matrix) -> Result<Matrix, LinalgError> {
        let btp = &self.bt * p;
        let s = self.r + &(&btp * self.b);
        let rhs = &btp * self.a;
        Lu::new(&s)?.solve_matrix(&rhs)
    }

    /// One Riccati update `AᵀPA - AᵀPB K + Q`.
    fn step(&self, p: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
        let k = self.gain(p)?;
        let atp = &self.at * p;
        let atpa = &atp * self.a;
        let atpb = &atp * self.b;
        let mut next = &(&atpa - &(&atpb * &k)) + self.q;
        next.symmetrize();
        Ok((next, k))
    }
}

/// Solves `P = AᵀPA - AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q` starting from `P₀ = Q`.
pub fn solve_dare(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    opts: &DareOptions,
) -> Result<DareSolution, LinalgError> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() || b.rows() != n || q.rows() != n || !q.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "DARE shapes: A {}x{}, B {}x{}, Q {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if r.rows() != m || !r.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "R must be {m}x{m}, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    if !q.is_symmetric(1e-12) || !r.is_symmetric(1e-12) {
        return Err(LinalgError::NotSymmetric);
    }

    let problem = Problem {
        a,
        b,
        q,
        r,
        at: a.transpose(),
        bt: b.transpose(),
    };

    let mut p = q.clone();
    let mut iterations = 0;
    loop {
        let (next, _) = problem.step(&p)?;
        iterations += 1;
        let diff = (&next - &p).norm_inf();
        let scale = next.norm_inf().max(1.0);
        if !next.is_finite() || scale > opts.divergence_bound {
            return Err(LinalgError::NotStabilizable(format!(
                "Riccati iterate diverged after {iterations} steps"
            )));
        }
        p = next;
        if diff <= opts.step_tol * scale {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(LinalgError::NotStabilizable(format!(
                "no fixed point after {iterations} iterations (last step {diff:e})"
            )));
        }
    }

    let (ric, gain) = problem.step(&p)?;
    let residual_norm = (&ric - &p).norm_inf();
    if residual_norm > opts.residual_tol * p.norm_inf().max(1.0) {
        return Err(LinalgError::NotStabilizable(format!(
            "Riccati residual {residual_norm:e} above tolerance"
        )));
    }
    let closed = a - &(b * &gain);
    let closed_loop_radius = spectral_radius(&closed)?;
    if closed_loop_radius >= 1.0 {
        return Err(LinalgError::NotStabilizable(format!(
            "closed-loop spectral radius {closed_loop_radius} >= 1"
        )));
    }
    Ok(DareSolution {
        cost: p,
        gain,
        iterations,
        residual_norm,
        closed_loop_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]]).unwrap()
    }

    #[test]
    fn scalar_golden_ratio() {
        let sol = solve_dare(
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            &DareOptions::default(),
        )
        .unwrap();
        // P² - P - 1 = 0
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.cost[(0, 0)] - golden).abs() <= 1e-12);
        assert!((sol.gain[(0, 0)] - (golden - 1.0)).abs() <= 1e-12);
        assert!(sol.residual_norm <= 1e-9);
    }

    #[test]
    fn deadbeat_plant_needs_no_gain() {
        let sol = solve_dare(
            &scalar(0.0),
            &scalar(3.0),
            &scalar(1.0),
            &scalar(1.0),
            &DareOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.cost[(0, 0)], 1.0);
        assert_eq!(sol.gain[(0, 0)], 0.0);
    }

    #[test]
    fn uncontrollable_unstable_mode_fails() {
        let a = Matrix::from_diagonal(&[2.0, 0.5]);
        let b = Matrix::column(&[0.0, 1.0]);
        let res = solve_dare(
            &a,
            &b,
            &Matrix::identity(2),
            &scalar(1.0),
            &DareOptions::default(),
        );
        assert!(
            matches!(res, Err(LinalgError::NotStabilizable(_))),
            "{res:?}"
        );
    }

    #[test]
    fn double_integrator() {
        let a = Matrix::from_rows(&[[1.0, 0.1], [0.0, 1.0]]).unwrap();
        let b = Matrix::column(&[0.005, 0.1]);
        let q = Matrix::identity(2);
        let r = scalar(0.5);
        let sol = solve_dare(&a, &b, &q, &r, &DareOptions::default()).unwrap();
        assert!(sol.closed_loop_radius < 1.0);
        assert!(sol.cost.is_symmetric(0.0));
        assert!(sol.cost[(0, 0)] > 0.0 && sol.cost[(1, 1)] > 0.0);
        assert!(sol.residual_norm <= 1e-9 * sol.cost.norm_inf());
    }
}
