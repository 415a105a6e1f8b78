//! Dense and Krylov kernels shared by the Fock-space and spectral layers.
//!
//! Operators are passed as closures `&dyn Fn(&[C64]) -> Vec<C64>` so the same
//! routines serve sparse matrices, dense blocks and composed operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type LinearMap<'a> = &'a (dyn Fn(&[C64]) -> Vec<C64> + Sync);

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn scaled(x: &[C64], s: C64) -> Vec<C64> {
    x.iter().map(|v| v * s).collect()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Deterministic complex Gaussian vector.
pub fn random_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            C64::new(a, b)
        })
        .collect()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(m: DMatrix<C64>) -> Self {
        let n = m.nrows();
        // symmetrise against round-off before handing to the solver
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        // the default convergence test leaves ~1e-10 reconstruction error
        let budget = 10_000 + 200 * n;
        let eig = [1e-20, 1e-18, 1e-16]
            .iter()
            .find_map(|&eps| SymmetricEigen::try_new(h.clone(), eps, budget))
            .unwrap_or_else(|| SymmetricEigen::new(h));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        HermitianEigen { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `f(H) = V·diag(f(λ))·V^†`.
    pub fn function(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        scaled * self.vectors.adjoint()
    }

    /// `f(H)·x` without forming the matrix.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64, x: &[C64]) -> Vec<C64> {
        let coeffs = self.vectors.adjoint() * DVector::from_column_slice(x);
        let weighted = DVector::from_iterator(
            self.dim(),
            coeffs.iter().zip(self.values.iter()).map(|(c, &l)| c * f(l)),
        );
        (&self.vectors * weighted).as_slice().to_vec()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.dim() - 1]
    }
}

/// Largest singular value of a dense matrix through the Hermitian Gram matrix.
pub fn dense_spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() { m.adjoint() * m } else { m * m.adjoint() };
    HermitianEigen::new(gram).max().max(0.0).sqrt()
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t)
}

/// Extremal eigenpair of a Hermitian operator by restarted Lanczos with full
/// reorthogonalisation. `largest` selects the top of the spectrum.
pub fn lanczos_extremal(
    op: LinearMap<'_>,
    n: usize,
    largest: bool,
    seed: u64,
    tol: f64,
    max_restarts: usize,
) -> Result<(f64, Vec<C64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let krylov_dim = n.min(80);
    let mut start = random_vector(n, seed);
    let mut last_residual = f64::INFINITY;
    for _ in 0..max_restarts.max(1) {
        let s = norm(&start);
        let mut basis: Vec<Vec<C64>> = vec![scaled(&start, C64::new(1.0 / s, 0.0))];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for j in 0..krylov_dim {
            let mut w = op(&basis[j]);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // full reorthogonalisation, twice for stability
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(&mut w, -c, q);
                }
            }
            let b = norm(&w);
            if j + 1 == krylov_dim || b < 1e-14 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(scaled(&w, C64::new(1.0 / b, 0.0)));
        }
        let m = alpha.len();
        let eig = tridiagonal_eigen(&alpha, &beta[..m - 1]);
        let pick = (0..m)
            .max_by(|&a, &b| {
                let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
                if largest { x.total_cmp(&y) } else { y.total_cmp(&x) }
            })
            .unwrap();
        let theta = eig.eigenvalues[pick];
        let mut ritz = vec![zero(); n];
        for (i, q) in basis.iter().take(m).enumerate() {
            axpy(&mut ritz, C64::new(eig.eigenvectors[(i, pick)], 0.0), q);
        }
        let rn = norm(&ritz);
        ritz.iter_mut().for_each(|x| *x /= rn);
        let hr = op(&ritz);
        let mut r = hr.clone();
        axpy(&mut r, C64::new(-theta, 0.0), &ritz);
        last_residual = norm(&r);
        if last_residual <= tol * theta.abs().max(1.0) || m == n {
            return Ok((theta, ritz));
        }
        start = ritz;
    }
    Err(Error::NoConvergence {
        what: "lanczos",
        iterations: max_restarts,
        residual: last_residual,
    })
}

/// `exp(-i·t·H)·v` for Hermitian `H` by Lanczos with adaptive substeps.
pub fn expm_hermitian_apply(op: LinearMap<'_>, t: f64, v: &[C64], tol: f64) -> Result<Vec<C64>> {
    let n = v.len();
    let mut state = v.to_vec();
    let total_norm = norm(v);
    if total_norm == 0.0 || t == 0.0 {
        return Ok(state);
    }
    let max_dim = n.min(40);
    let mut remaining = t;
    let mut step = t;
    let mut guard = 0usize;
    while remaining.abs() > 0.0 {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::NoConvergence {
                what: "krylov exponential",
                iterations: guard,
                residual: f64::NAN,
            });
        }
        if step.abs() > remaining.abs() {
            step = remaining;
        }
        let beta0 = norm(&state);
        let mut basis: Vec<Vec<C64>> = vec![scaled(&state, C64::new(1.0 / beta0, 0.0))];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut accepted: Option<Vec<C64>> = None;
        for j in 0..max_dim {
            let mut w = op(&basis[j]);
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(&mut w, -c, q);
                }
            }
            let b = norm(&w);
            let m = alpha.len();
            let eig = tridiagonal_eigen(&alpha, &beta);
            // small = exp(-i step T) e1
            let small: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|c| {
                            let ph = C64::new(0.0, -step * eig.eigenvalues[c]).exp();
                            ph * eig.eigenvectors[(r, c)] * eig.eigenvectors[(0, c)]
                        })
                        .sum()
                })
                .collect();
            let breakdown = b < 1e-13 * beta0.max(1e-300);
            let err = b * small[m - 1].norm() * beta0;
            if breakdown || err <= tol * total_norm || m == n {
                let mut out = vec![zero(); n];
                for (i, q) in basis.iter().enumerate().take(m) {
                    axpy(&mut out, small[i] * beta0, q);
                }
                accepted = Some(out);
                break;
            }
            beta.push(b);
            basis.push(scaled(&w, C64::new(1.0 / b, 0.0)));
        }
        match accepted {
            Some(out) => {
                state = out;
                remaining -= step;
            }
            None => step *= 0.5,
        }
    }
    Ok(state)
}

/// Restarted GMRES for `A x = b`. Returns the solution and the attained
/// relative residual.
pub fn gmres(op: LinearMap<'_>, b: &[C64], tol: f64, restart: usize, max_restarts: usize) -> (Vec<C64>, f64) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![zero(); n];
    if bnorm == 0.0 {
        return (x, 0.0);
    }
    let mut relres = 1.0;
    for _ in 0..max_restarts.max(1) {
        let ax = op(&x);
        let r = sub(b, &ax);
        let beta = norm(&r);
        relres = beta / bnorm;
        if relres <= tol {
            break;
        }
        let m = restart.min(n).max(1);
        let mut v: Vec<Vec<C64>> = vec![scaled(&r, C64::new(1.0 / beta, 0.0))];
        let mut h = DMatrix::<C64>::zeros(m + 1, m);
        let mut cs = vec![zero(); m];
        let mut sn = vec![zero(); m];
        let mut g = vec![zero(); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = op(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                h[(i, k)] = c;
                axpy(&mut w, -c, vi);
            }
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                h[(i, k)] += c;
                axpy(&mut w, -c, vi);
            }
            let wn = norm(&w);
            h[(k + 1, k)] = C64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[(i, k)] + sn[i].conj() * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let (a, bb) = (h[(k, k)], h[(k + 1, k)]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a / den;
            sn[k] = bb / den;
            h[(k, k)] = C64::new(den, 0.0);
            h[(k + 1, k)] = zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= tol * 0.5 || wn < 1e-300 {
                break;
            }
            v.push(scaled(&w, C64::new(1.0 / wn, 0.0)));
        }
        let mut y = vec![zero(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut x, *yi, &v[i]);
        }
    }
    let r = sub(b, &op(&x));
    relres = relres.min(norm(&r) / bnorm).max(norm(&r) / bnorm);
    (x, relres)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let v = random_vector(n * n, seed);
        let m = DMatrix::from_vec(n, n, v);
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let h = random_hermitian(12, 3);
        let e = HermitianEigen::new(h.clone());
        for w in e.values.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
        let back = e.function(|l| C64::new(l, 0.0));
        assert!((back - h).norm() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_extremes() {
        let h = random_hermitian(60, 9);
        let e = HermitianEigen::new(h.clone());
        let op = |x: &[C64]| (&h * DVector::from_column_slice(x)).as_slice().to_vec();
        let (lo, _) = lanczos_extremal(&op, 60, false, 1, 1e-10, 20).unwrap();
        let (hi, _) = lanczos_extremal(&op, 60, true, 1, 1e-10, 20).unwrap();
        assert!((lo - e.min()).abs() < 1e-9);
        assert!((hi - e.max()).abs() < 1e-9);
    }

    #[test]
    fn krylov_exponential_matches_dense() {
        let h = random_hermitian(50, 4);
        let e = HermitianEigen::new(h.clone());
        let v = random_vector(50, 5);
        let op = |x: &[C64]| (&h * DVector::from_column_slice(x)).as_slice().to_vec();
        let got = expm_hermitian_apply(&op, 2.3, &v, 1e-12).unwrap();
        let want = e.apply_function(|l| C64::new(0.0, -2.3 * l).exp(), &v);
        assert!(norm(&sub(&got, &want)) < 1e-9 * norm(&v));
    }

    #[test]
    fn gmres_solves_shifted_system() {
        let h = random_hermitian(40, 8);
        let z = C64::new(0.3, 1.0);
        let a = &h - DMatrix::<C64>::identity(40, 40) * z;
        let b = random_vector(40, 2);
        let op = |x: &[C64]| (&a * DVector::from_column_slice(x)).as_slice().to_vec();
        let (x, rel) = gmres(&op, &b, 1e-12, 40, 5);
        assert!(rel < 1e-11);
        let want = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(norm(&sub(&x, want.as_slice())) < 1e-9);
    }
}
