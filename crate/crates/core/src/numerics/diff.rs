/// Forward-difference approximation of column `direction` of the Jacobian of
/// `f` at `x0`, given the already evaluated base value `f(x0)`.
///
/// Returns `[f(x0 + eps·e_i) - f(x0)] / eps`.
pub fn forward_difference_column_with_base<F, E>(
    f: F,
    x0: &[f64],
    base: &[f64],
    direction: usize,
    eps: f64,
) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    assert!(direction < x0.len(), "direction index out of range");
    let mut shifted = x0.to_vec();
    shifted[direction] += eps;
    let fs = f(&shifted)?;
    assert_eq!(fs.len(), base.len(), "f changed output dimension");
    Ok(fs.iter().zip(base).map(|(a, b)| (a - b) / eps).collect())
}

/// Forward-difference column `[f(x0 + eps·e_i) - f(x0)] / eps`.
pub fn forward_difference_column<F, E>(
    f: F,
    x0: &[f64],
    direction: usize,
    eps: f64,
) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    let base = f(x0)?;
    forward_difference_column_with_base(f, x0, &base, direction, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use std::convert::Infallible;

    #[test]
    fn linear_map_gives_exact_column() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 0.0], [-0.5, 0.0, 4.0], [0.0, 1.0, 1.0]]).unwrap();
        let f = |x: &[f64]| Ok::<_, Infallible>(m.mul_vec(x));
        for i in 0..3 {
            let col = forward_difference_column(f, &[0.0; 3], i, 0.5).unwrap();
            assert_eq!(col, m.column_vec(i));
        }
    }

    #[test]
    fn square_at_one() {
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![x[0] * x[0]]);
        let col = forward_difference_column(f, &[1.0], 0, 1e-4).unwrap();
        assert!((col[0] - 2.0001).abs() < 1e-10, "{}", col[0]);
    }

    #[test]
    fn error_is_first_order() {
        // exp has nonzero second derivative; truncation error ≈ eps·f''/2
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![x[0].exp()]);
        let exact = 0.3f64.exp();
        let e1 = (forward_difference_column(f, &[0.3], 0, 1e-3).unwrap()[0] - exact).abs();
        let e2 = (forward_difference_column(f, &[0.3], 0, 5e-4).unwrap()[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn errors_propagate() {
        let f = |_: &[f64]| Err::<Vec<f64>, _>("boom");
        assert_eq!(forward_difference_column(f, &[0.0], 0, 1e-3), Err("boom"));
    }
}
