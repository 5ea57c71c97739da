//! Complex matrix aliases and small helpers shared by the receiver chain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Squared Frobenius norm.
pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// One CN(0, 1) sample: independent real/imaginary parts of variance 1/2.
pub fn crandn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. CN(0, variance) entries.
pub fn crandn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> CMat {
    let scale = variance.sqrt();
    CMat::from_fn(rows, cols, |_, _| crandn(rng) * scale)
}

/// Economy-size SVD with singular values in descending order.
pub struct EconomySvd {
    /// Left singular vectors, `rows x p` with `p = min(rows, cols)`.
    pub u: CMat,
    /// Right singular vectors, `cols x p`.
    pub v: CMat,
    /// Singular values, length `p`, descending.
    pub singular_values: Vec<f64>,
}

pub fn economy_svd(m: &CMat) -> Result<EconomySvd> {
    let svd = m.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numerical(format!("SVD failed to converge on {}x{} matrix", m.nrows(), m.ncols()))
    })?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    // nalgebra returns descending singular values; keep a defensive sort.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let p = order.len();
    let mut u_sorted = CMat::zeros(u.nrows(), p);
    let mut v_sorted = CMat::zeros(v_t.ncols(), p);
    let mut s_sorted = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.row(src).adjoint());
        s_sorted.push(svd.singular_values[src]);
    }
    Ok(EconomySvd {
        u: u_sorted,
        v: v_sorted,
        singular_values: s_sorted,
    })
}

/// Solve `C x = b` for Hermitian positive definite `C` via Cholesky.
pub fn solve_hpd(c: &CMat, b: &CVec) -> Result<CVec> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("covariance matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Cholesky factorization kept around for repeated right-hand sides.
pub struct HpdSolver {
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
}

impl HpdSolver {
    pub fn new(c: CMat) -> Result<Self> {
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Solver("covariance matrix is not positive definite".into()))?;
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn svd_reconstructs_and_orders() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = crandn_matrix(10, 4, 1.0, &mut rng);
        let svd = economy_svd(&m).unwrap();
        let sigma = CMat::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(svd.singular_values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let recon = &svd.u * sigma * svd.v.adjoint();
        assert!((recon - &m).norm() < 1e-12 * m.norm().max(1.0));
        for w in svd.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn hpd_solver_matches_direct_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = crandn_matrix(8, 8, 1.0, &mut rng);
        let c = &a * a.adjoint() + CMat::identity(8, 8) * Complex64::new(0.1, 0.0);
        let b = CVec::from_fn(8, |_, _| crandn(&mut rng));
        let x = solve_hpd(&c, &b).unwrap();
        assert!((&c * &x - &b).norm() < 1e-10);
    }

    #[test]
    fn crandn_has_unit_second_moment() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean_sq: f64 = (0..n).map(|_| crandn(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.02, "E|z|^2 = {mean_sq}");
    }
}
