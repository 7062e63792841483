//! Eigenvalues of small dense real matrices.
//!
//! The matrix is reduced to upper Hessenberg form by stabilized elementary
//! similarity transforms and then deflated with the Francis double-shift QR
//! iteration. Only eigenvalues are produced.

use num_complex::Complex64;

use super::{LinalgError, Matrix};

/// Largest matrix accepted by [`eigenvalues`].
pub const MAX_DIM: usize = 8;

/// 1-based square work array so the indexing mirrors the textbook recurrences.
struct Work {
    n: usize,
    a: Vec<f64>,
}

impl Work {
    fn new(m: &Matrix) -> Self {
        let n = m.rows();
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = m[(i, j)];
            }
        }
        Self { n, a }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * (self.n + 1) + j] = v;
    }

    #[inline]
    fn sub(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * (self.n + 1) + j] -= v;
    }

    fn swap(&mut self, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) {
        let n1 = self.n + 1;
        self.a.swap(i1 * n1 + j1, i2 * n1 + j2);
    }

    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x: f64 = 0.0;
            let mut i = m;
            for j in m..=n {
                if self.get(j, m - 1).abs() > x.abs() {
                    x = self.get(j, m - 1);
                    i = j;
                }
            }
            if i != m {
                for j in m - 1..=n {
                    self.swap((i, j), (m, j));
                }
                for j in 1..=n {
                    self.swap((j, i), (j, m));
                }
            }
            if x != 0.0 {
                for i in m + 1..=n {
                    let mut y = self.get(i, m - 1);
                    if y != 0.0 {
                        y /= x;
                        self.set(i, m - 1, y);
                        for j in m..=n {
                            let v = y * self.get(m, j);
                            self.sub(i, j, v);
                        }
                        for j in 1..=n {
                            let v = y * self.get(j, i);
                            self.sub(j, m, -v);
                        }
                    }
                }
            }
        }
        for i in 1..=n {
            for j in 1..i.saturating_sub(1) {
                self.set(i, j, 0.0);
            }
        }
    }

    fn hessenberg_qr(&mut self, max_iterations: usize) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.n;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];

        let mut anorm = 0.0;
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm += self.get(i, j).abs();
            }
        }

        let mut nn = n;
        let mut t = 0.0;
        let mut total = 0usize;
        while nn >= 1 {
            let mut its = 0usize;
            loop {
                // look for a single small subdiagonal element
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.get(l - 1, l - 1).abs() + self.get(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.get(l, l - 1).abs() <= f64::EPSILON * s {
                        self.set(l, l - 1, 0.0);
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.get(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.get(nn - 1, nn - 1);
                let mut w = self.get(nn, nn - 1) * self.get(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                    break;
                }

                if total >= max_iterations {
                    return Err(LinalgError::NoConvergence { iterations: total });
                }
                if its > 0 && its.is_multiple_of(10) {
                    // exceptional shift
                    t += x;
                    for i in 1..=nn {
                        self.sub(i, i, x);
                    }
                    let s = self.get(nn, nn - 1).abs() + self.get(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                total += 1;

                // look for two consecutive small subdiagonal elements
                let (mut p, mut q, mut r);
                let mut m = nn - 2;
                loop {
                    let z = self.get(m, m);
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / self.get(m + 1, m) + self.get(m, m + 1);
                    q = self.get(m + 1, m + 1) - z - rr - ss;
                    r = self.get(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.get(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (self.get(m - 1, m - 1).abs() + z.abs() + self.get(m + 1, m + 1).abs());
                    if u <= f64::EPSILON * v {
                        break;
                    }
                    m -= 1;
                }
                for i in m + 2..=nn {
                    self.set(i, i - 2, 0.0);
                    if i != m + 2 {
                        self.set(i, i - 3, 0.0);
                    }
                }

                // double QR step on rows l..nn and columns m..nn
                let mut k = m;
                while k < nn {
                    if k != m {
                        p = self.get(k, k - 1);
                        q = self.get(k + 1, k - 1);
                        r = if k != nn - 1 {
                            self.get(k + 2, k - 1)
                        } else {
                            0.0
                        };
                        x = p.abs() + q.abs() + r.abs();
                        if x != 0.0 {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                let v = -self.get(k, k - 1);
                                self.set(k, k - 1, v);
                            }
                        } else {
                            self.set(k, k - 1, -s * x);
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        let z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            let mut pp = self.get(k, j) + q * self.get(k + 1, j);
                            if k != nn - 1 {
                                pp += r * self.get(k + 2, j);
                                self.sub(k + 2, j, pp * z);
                            }
                            self.sub(k + 1, j, pp * y);
                            self.sub(k, j, pp * x);
                        }
                        let mmin = nn.min(k + 3);
                        for i in l..=mmin {
                            let mut pp = x * self.get(i, k) + y * self.get(i, k + 1);
                            if k != nn - 1 {
                                pp += z * self.get(i, k + 2);
                                self.sub(i, k + 2, pp * r);
                            }
                            self.sub(i, k + 1, pp * q);
                            self.sub(i, k, pp);
                        }
                    }
                    k += 1;
                }
                if l >= nn - 1 {
                    break;
                }
            }
        }

        Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
    }
}

/// All eigenvalues of a square real matrix (n <= 8), with multiplicity.
///
/// Complex eigenvalues are returned as conjugate pairs. Fails with
/// `NoConvergence` after `100 n²` QR sweeps.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() > MAX_DIM {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenvalue kernel supports n <= {MAX_DIM}, got {}",
            a.rows()
        )));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    let mut w = Work::new(a);
    w.reduce_to_hessenberg();
    w.hessenberg_qr(100 * n * n)
}

pub fn spectral_radius(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::super::determinant;
    use super::*;
    use proptest::prelude::*;

    fn sorted_real(mut v: Vec<Complex64>) -> Vec<f64> {
        assert!(
            v.iter().all(|z| z.im == 0.0),
            "expected real spectrum: {v:?}"
        );
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn diagonal() {
        let a = Matrix::from_diagonal(&[2.0, -3.0]);
        assert_eq!(sorted_real(eigenvalues(&a).unwrap()), vec![-3.0, 2.0]);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let a = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap();
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn companion_of_cubic() {
        // (x-1)(x-2)(x-3) = x³ - 6x² + 11x - 6
        let a = Matrix::from_rows(&[[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let ev = sorted_real(eigenvalues(&a).unwrap());
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn one_by_one() {
        let a = Matrix::from_rows(&[[-4.5]]).unwrap();
        assert_eq!(eigenvalues(&a).unwrap(), vec![Complex64::new(-4.5, 0.0)]);
    }

    #[test]
    fn rejects_oversized() {
        assert!(eigenvalues(&Matrix::identity(9)).is_err());
    }

    fn random_square() -> impl Strategy<Value = Matrix> {
        (1usize..=8).prop_flat_map(|n| {
            prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
                let rows: Vec<Vec<f64>> = v.chunks(n).map(|c| c.to_vec()).collect();
                Matrix::from_rows(&rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn trace_and_determinant_match(a in random_square()) {
            let ev = eigenvalues(&a).unwrap();
            prop_assert_eq!(ev.len(), a.rows());
            let sum: Complex64 = ev.iter().sum();
            prop_assert!((sum.re - a.trace()).abs() <= 1e-8 * a.max_abs().max(1.0));
            prop_assert!(sum.im.abs() <= 1e-8);
            // conjugate pairs
            for z in ev.iter().filter(|z| z.im != 0.0) {
                prop_assert!(ev.iter().any(|w| (w - z.conj()).norm() <= 1e-9 * z.norm().max(1.0)));
            }
            if a.rows() <= 5 {
                let prod: Complex64 = ev.iter().product();
                let det = determinant(&a).unwrap();
                let scale = ev.iter().map(|z| z.norm().max(1.0)).product::<f64>();
                prop_assert!((prod.re - det).abs() <= 1e-8 * scale, "prod {prod} det {det}");
            }
        }
    }
}
