use super::{LinalgError, Matrix};

/// Pivots smaller than this abort the factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    factors: Matrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;

        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs < PIVOT_FLOOR {
                return Err(LinalgError::SingularMatrix {
                    column: k,
                    pivot: pivot_abs,
                });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            factors: lu,
            perm,
            swaps,
        })
    }

    pub fn dim(&self) -> usize {
        self.factors.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.factors[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.factors[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.factors[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix, LinalgError> {
        let mut out = Matrix::zeros(self.dim(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve(&b.column_vec(j))?;
            out.set_column(j, &col);
        }
        Ok(out)
    }

    pub fn determinant(&self) -> f64 {
        let sign = if self.swaps.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        (0..self.dim()).fold(sign, |d, i| d * self.factors[(i, i)])
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Lu::new(a)?.solve(b)
}

/// Solves a 2×2 system by elimination with partial pivoting, without heap
/// allocation. Used in the integrator's inner loop.
pub fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> Result<[f64; 2], LinalgError> {
    let (p, q) = if a[1][0].abs() > a[0][0].abs() {
        (1, 0)
    } else {
        (0, 1)
    };
    let pivot = a[p][0];
    if pivot.abs() < PIVOT_FLOOR {
        return Err(LinalgError::SingularMatrix {
            column: 0,
            pivot: pivot.abs(),
        });
    }
    let factor = a[q][0] / pivot;
    let a11 = a[q][1] - factor * a[p][1];
    if a11.abs() < PIVOT_FLOOR {
        return Err(LinalgError::SingularMatrix {
            column: 1,
            pivot: a11.abs(),
        });
    }
    let x1 = (b[q] - factor * b[p]) / a11;
    let x0 = (b[p] - a[p][1] * x1) / pivot;
    Ok([x0, x1])
}

/// Determinant via LU. A pivot below [`PIVOT_FLOOR`] is reported as zero.
pub fn determinant(a: &Matrix) -> Result<f64, LinalgError> {
    match Lu::new(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(LinalgError::SingularMatrix { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}
