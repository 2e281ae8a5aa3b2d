//! Dense complex linear algebra on top of `nalgebra`.
//!
//! Every solve in this crate is Hermitian, so the condition estimate is the
//! ratio of extreme eigenvalues and the eigen decomposition doubles as the
//! factorization used for solves, inverses and square roots.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Relative asymmetry accepted for Hermitian-tagged inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest accepted eigenvalue ratio for Hermitian solves.
pub const MAX_CONDITION: f64 = 1e12;
/// Negative eigenvalues down to `-PSD_CLAMP * lambda_max` are treated as zero.
pub const PSD_CLAMP: f64 = 1e-10;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max |A - A^H|` for a square matrix.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL * max_abs(a).max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigen decomposition `A = V diag(values) V^H` with values sorted descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: RVector,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V diag(f(values)) V^H`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: RVector::zeros(0),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = RVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Ratio of extreme eigenvalues; infinite when the matrix is not positive definite.
pub fn condition_estimate(eig: &HermitianEigen) -> f64 {
    let hi = eig.max_value();
    let lo = eig.min_value();
    if lo <= 0.0 || hi <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn positive_definite_eig(a: &CMatrix) -> Result<HermitianEigen> {
    let eig = eig_hermitian(a)?;
    let cond = condition_estimate(&eig);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    Ok(eig)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "solve: A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let eig = positive_definite_eig(a)?;
    let n = eig.values.len();
    let mut projected = eig.vectors.adjoint() * b;
    for i in 0..n {
        let s = 1.0 / eig.values[i];
        for j in 0..projected.ncols() {
            projected[(i, j)] *= s;
        }
    }
    Ok(&eig.vectors * projected)
}

pub fn hermitian_inverse(a: &CMatrix) -> Result<CMatrix> {
    let eig = positive_definite_eig(a)?;
    Ok(eig.map(|v| 1.0 / v))
}

/// Hermitian square root of a PSD matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = eig_hermitian(a)?;
    let top = eig.max_value().max(0.0);
    let lo = eig.min_value();
    if lo < -PSD_CLAMP * top || (top == 0.0 && lo < 0.0) {
        return Err(Error::NotPsd(lo));
    }
    Ok(eig.map(|v| v.max(0.0).sqrt()))
}

/// Real embedding `[Re A, -Im A; Im A, Re A]`.
pub fn complex_to_real_embedding(a: &CMatrix) -> RMatrix {
    let (r, c) = a.shape();
    let mut out = RMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = a[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + c)] = -v.im;
            out[(i + r, j)] = v.im;
            out[(i + r, j + c)] = v.re;
        }
    }
    out
}

/// Stacks `[Re v; Im v]`.
pub fn complex_to_real_vector(v: &CVector) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn real_to_complex_vector(v: &RVector) -> CVector {
    let n = v.len() / 2;
    CVector::from_fn(n, |i, _| C64::new(v[i], v[i + n]))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

/// `v^H A v` for Hermitian `A` (real part).
pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    (v.adjoint() * a * v)[(0, 0)].re
}

/// Orthonormal basis of the orthogonal complement of the column span of `m`.
///
/// `m` must have full column rank; the basis has `rows - cols` columns.
pub fn orthogonal_complement(m: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(Error::RankDeficient(format!(
            "{cols} columns in dimension {rows}"
        )));
    }
    if cols == 0 {
        return Ok(identity(rows));
    }
    let gram = m.adjoint() * m;
    let gram_inv = hermitian_inverse(&gram)?;
    let projector = identity(rows) - m * gram_inv * m.adjoint();
    let eig = eig_hermitian(&hermitize(&projector))?;
    let keep = rows - cols;
    Ok(eig.vectors.columns(0, keep).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn rel_close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol * max_abs(b).max(1.0)
    }

    #[test]
    fn solve_identity_and_scalar() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 2, 3);
        let x = hermitian_solve(&identity(2), &b).unwrap();
        assert!(rel_close(&x, &b, 1e-14));

        let x = hermitian_solve(&identity(3).scale(2.0), &identity(3)).unwrap();
        assert!(rel_close(&x, &identity(3).scale(0.5), 1e-14));
    }

    #[test]
    fn solve_residual_on_random_gram_matrices() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_matrix(&mut rng, 4, 4);
            let a = m.adjoint() * &m + identity(4);
            let b = random_matrix(&mut rng, 4, 2);
            let x = hermitian_solve(&a, &b).unwrap();
            let resid = max_abs(&(&a * &x - &b));
            assert!(resid <= 1e-9 * max_abs(&a) * max_abs(&x), "residual {resid}");
        }
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let mut a = identity(2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            hermitian_solve(&a, &identity(2)),
            Err(Error::NotHermitian(_))
        ));
        let mut singular = identity(2);
        singular[(1, 1)] = C64::new(1e-14, 0.0);
        assert!(matches!(
            hermitian_solve(&singular, &identity(2)),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn eig_of_diagonal_and_rank_one() {
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(1.0, 0.0);
        d[(1, 1)] = C64::new(3.0, 0.0);
        let eig = eig_hermitian(&d).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        // eigenvector of 3 is e2 up to phase
        assert!((eig.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);

        let q = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        let eig = eig_hermitian(&(&q * q.adjoint())).unwrap();
        assert!((eig.values[0] - 2.0).abs() < 1e-12);
        assert!(eig.values[1].abs() < 1e-12 && eig.values[2].abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 5, 5);
            let a = hermitize(&(&m + m.adjoint()));
            let eig = eig_hermitian(&a).unwrap();
            assert!(eig.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
            assert!(rel_close(&eig.map(|v| v), &a, 1e-9));
            let unit = eig.vectors.adjoint() * &eig.vectors;
            assert!(max_abs(&(unit - identity(5))) <= 1e-9);
        }
    }

    #[test]
    fn psd_sqrt_cases() {
        assert!(rel_close(&psd_sqrt(&identity(3)).unwrap(), &identity(3), 1e-14));
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(4.0, 0.0);
        d[(1, 1)] = C64::new(9.0, 0.0);
        let r = psd_sqrt(&d).unwrap();
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-13 && (r[(1, 1)].re - 3.0).abs() < 1e-13);

        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 3, 4);
            let a = m.adjoint() * &m; // rank 3 in dimension 4
            let r = psd_sqrt(&a).unwrap();
            assert!(hermitian_defect(&r) <= 1e-12 * max_abs(&r));
            assert!(rel_close(&(&r * &r), &a, 1e-9));
        }

        let mut neg = identity(2);
        neg[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(psd_sqrt(&neg), Err(Error::NotPsd(_))));
    }

    #[test]
    fn embedding_cases() {
        let i = CMatrix::from_element(1, 1, C64::new(0.0, 1.0));
        let e = complex_to_real_embedding(&i);
        assert_eq!(e, RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));

        let real = CMatrix::from_fn(2, 2, |i, j| C64::new((i * 2 + j) as f64, 0.0));
        let e = complex_to_real_embedding(&real);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(e[(i, j)], real[(i, j)].re);
                assert_eq!(e[(i + 2, j + 2)], real[(i, j)].re);
                assert_eq!(e[(i, j + 2)], 0.0);
                assert_eq!(e[(i + 2, j)], 0.0);
            }
        }
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 5, 2);
        let n = orthogonal_complement(&m).unwrap();
        assert_eq!(n.shape(), (5, 3));
        assert!(max_abs(&(m.adjoint() * &n)) < 1e-12);
        assert!(max_abs(&(n.adjoint() * &n - identity(3))) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix_strategy(r: usize, c: usize) -> impl Strategy<Value = CMatrix> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c)
                .prop_map(move |v| CMatrix::from_iterator(r, c, v.into_iter().map(|(a, b)| C64::new(a, b))))
        }

        proptest! {
            #[test]
            fn embedding_is_multiplicative(a in matrix_strategy(2, 3), b in matrix_strategy(3, 2)) {
                let lhs = complex_to_real_embedding(&(&a * &b));
                let rhs = complex_to_real_embedding(&a) * complex_to_real_embedding(&b);
                prop_assert!(max_abs_real(&(lhs - rhs)) <= 1e-12);
            }

            #[test]
            fn psd_sqrt_squares_back(m in matrix_strategy(4, 4)) {
                let a = m.adjoint() * &m;
                let r = psd_sqrt(&a).unwrap();
                prop_assert!(max_abs(&(&r * &r - &a)) <= 1e-9 * max_abs(&a).max(1e-300));
            }
        }
    }
}
