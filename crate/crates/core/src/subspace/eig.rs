//! Cyclic complex Jacobi eigensolver for small Hermitian matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const MAX_SWEEPS: usize = 64;
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.col(k)
    }
}

pub fn hermitian_eig(r: &CMatrix) -> Result<EigenDecomposition> {
    let n = r.rows();
    if n != r.cols() {
        return Err(Error::Shape(format!("eigendecomposition of non-square {}x{}", n, r.cols())));
    }
    if !r.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let norm = r.frobenius_norm();
    let asym = r.sub(&r.adjoint())?.frobenius_norm();
    if asym > HERMITIAN_TOL * norm.max(1.0) {
        return Err(Error::Domain(format!("matrix is not Hermitian (‖R − Rᴴ‖ = {asym:e})")));
    }

    let mut a = r.clone();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n);
    let target = (f64::EPSILON * norm).powi(2);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off <= target || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |row, k| v[(row, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Annihilates `a[p][q]` with a unitary rotation in the `(p, q)` plane.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let h = a[(p, q)];
    let habs = h.norm();
    if habs == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if habs < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = Complex64::new(0.0, 0.0);
        a[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    // Phase-align the off-diagonal entry, then apply a real Jacobi rotation.
    let phase = h / habs;
    let zeta = (aqq - app) / (2.0 * habs);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let t = if zeta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // U restricted to (p, q): [[c, s], [-s·conj(φ), c·conj(φ)]]
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;

    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * upp + akq * uqp;
        a[(k, q)] = akp * upq + akq * uqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = (b[(i, j)] + b[(j, i)].conj()) * 0.5;
            }
        }
        h
    }

    fn check(r: &CMatrix, eig: &EigenDecomposition) {
        let n = r.rows();
        let lambda = CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(eig.values[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        let recon = eig.vectors.matmul(&lambda).unwrap().matmul(&eig.vectors.adjoint()).unwrap();
        let scale = r.frobenius_norm().max(1e-300);
        assert!(recon.sub(r).unwrap().frobenius_norm() / scale < 1e-10);
        let gram = eig.vectors.adjoint().matmul(&eig.vectors).unwrap();
        assert!(gram.sub(&CMatrix::identity(n)).unwrap().frobenius_norm() < 1e-10);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity() {
        let eig = hermitian_eig(&CMatrix::identity(4)).unwrap();
        assert_eq!(eig.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal() {
        let mut r = CMatrix::zeros(2, 2);
        r[(0, 0)] = Complex64::new(1.0, 0.0);
        r[(1, 1)] = Complex64::new(3.0, 0.0);
        let eig = hermitian_eig(&r).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert_eq!(eig.vector(0)[1].norm(), 1.0);
        assert_eq!(eig.vector(1)[0].norm(), 1.0);
    }

    #[test]
    fn random_residuals() {
        for seed in 0..20 {
            let r = random_hermitian(4, seed);
            let eig = hermitian_eig(&r).unwrap();
            for k in 0..4 {
                let v = eig.vector(k);
                let rv: Vec<Complex64> = (0..4).map(|i| (0..4).map(|j| r[(i, j)] * v[j]).sum()).collect();
                let res: f64 = rv.iter().zip(&v).map(|(a, b)| (a - b * eig.values[k]).norm_sqr()).sum::<f64>().sqrt();
                assert!(res < 1e-10, "seed {seed} residual {res}");
            }
            check(&r, &eig);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut r = CMatrix::identity(3);
        r[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(hermitian_eig(&r), Err(Error::Domain(_))));
        assert!(hermitian_eig(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_and_rank_one() {
        let eig = hermitian_eig(&CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(eig.values, vec![0.0; 3]);
        let a: Vec<Complex64> = (0..32).map(|k| Complex64::from_polar(1.0, 0.37 * k as f64)).collect();
        let r = CMatrix::from_fn(32, 32, |i, j| a[i] * a[j].conj());
        let eig = hermitian_eig(&r).unwrap();
        check(&r, &eig);
        assert!((eig.values[0] - 32.0).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn reconstruction_and_orthonormality(n in 1usize..16, seed in any::<u64>()) {
            let r = random_hermitian(n, seed);
            let eig = hermitian_eig(&r).unwrap();
            check(&r, &eig);
        }
    }
}
