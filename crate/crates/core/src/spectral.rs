//! Norms, resolvents, ground states and propagators.
//!
//! Operators stored as fiber blocks are handled block by block with dense
//! linear algebra. Unstructured operators go dense up to [`DENSE_LIMIT`] and
//! iterative beyond it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, HermitianEigen};
use crate::qspace::{FiberOperator, QOperator};

/// Largest dimension handled by dense factorisations.
pub const DENSE_LIMIT: usize = 1024;
/// Relative residual demanded of resolvent solves.
pub const RESOLVENT_TOL: f64 = 1e-10;
/// Tolerance of the Krylov exponential.
pub const PROPAGATE_TOL: f64 = 1e-12;

pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
    /// Diagonal blocks over consecutive index ranges, if stored that way.
    fn blocks(&self) -> Option<&[DMatrix<C64>]> {
        None
    }
    fn to_dense(&self) -> DMatrix<C64>;
}

impl LinearOp for QOperator {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.apply(x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.apply_adjoint(x)
    }
    fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }
}

impl LinearOp for FiberOperator {
    fn dim(&self) -> usize {
        FiberOperator::dim(self)
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        FiberOperator::apply(self, x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.adjoint().apply(x)
    }
    fn blocks(&self) -> Option<&[DMatrix<C64>]> {
        Some(&self.blocks)
    }
    fn to_dense(&self) -> DMatrix<C64> {
        let n = LinearOp::dim(self);
        let mut m = DMatrix::zeros(n, n);
        let mut at = 0;
        for b in &self.blocks {
            m.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
            at += b.nrows();
        }
        m
    }
}

impl LinearOp for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (self * DVector::from_column_slice(x)).as_slice().to_vec()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        (self.adjoint() * DVector::from_column_slice(x)).as_slice().to_vec()
    }
    fn blocks(&self) -> Option<&[DMatrix<C64>]> {
        Some(std::slice::from_ref(self))
    }
    fn to_dense(&self) -> DMatrix<C64> {
        self.clone()
    }
}

/// Dense blocks of an operator, materialising small unstructured ones.
fn dense_blocks<A: LinearOp + ?Sized>(a: &A) -> Option<Vec<DMatrix<C64>>> {
    match a.blocks() {
        Some(b) => Some(b.to_vec()),
        None if a.dim() <= DENSE_LIMIT => Some(vec![a.to_dense()]),
        None => None,
    }
}

fn split<'v>(x: &'v [C64], blocks: &[DMatrix<C64>]) -> Vec<&'v [C64]> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut at = 0;
    for b in blocks {
        out.push(&x[at..at + b.nrows()]);
        at += b.nrows();
    }
    out
}

/// Largest singular value.
pub fn op_norm<A: LinearOp + ?Sized>(a: &A, seed: u64) -> Result<f64> {
    match dense_blocks(a) {
        Some(blocks) => Ok(blocks.par_iter().map(linalg::dense_spectral_norm).reduce(|| 0.0, f64::max)),
        None => op_norm_lanczos(a, seed),
    }
}

/// Largest singular value by Lanczos on `A^†A`, for operators too large to
/// factor densely.
pub fn op_norm_lanczos<A: LinearOp + ?Sized>(a: &A, seed: u64) -> Result<f64> {
    let gram = |x: &[C64]| a.apply_adjoint(&a.apply(x));
    let (top, _) = linalg::lanczos_extremal(&gram, a.dim(), true, seed, 1e-11, 200)?;
    Ok(top.max(0.0).sqrt())
}

fn inverse_sqrt_shifted(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let eig = HermitianEigen::new(h.clone());
    if eig.min() < -1e-10 {
        return Err(Error::InvalidArgument(format!("H0 has negative eigenvalue {}", eig.min())));
    }
    Ok(eig.function(|l| C64::new((l.max(0.0) + 1.0).powf(-0.5), 0.0)))
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)] == C64::new(0.0, 0.0)))
}

/// `‖(H_0+1)^{-1/2}(W_1 − W_2)(H_0+1)^{-1/2}‖`.
pub fn form_difference_constant<A: LinearOp + ?Sized>(w1: &A, w2: &A, h0: &A) -> Result<f64> {
    let (b1, b2, bh) = match (dense_blocks(w1), dense_blocks(w2), dense_blocks(h0)) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::InvalidArgument("form difference needs dense-sized operators".into())),
    };
    let norms: Result<Vec<f64>> = b1
        .par_iter()
        .zip(&b2)
        .zip(&bh)
        .map(|((x, y), h)| {
            let s = if is_diagonal(h) {
                DMatrix::from_diagonal(&h.diagonal().map(|v| C64::new((v.re.max(0.0) + 1.0).powf(-0.5), 0.0)))
            } else {
                inverse_sqrt_shifted(h)?
            };
            Ok(linalg::dense_spectral_norm(&(&s * (x - y) * &s)))
        })
        .collect();
    Ok(norms?.into_iter().fold(0.0, f64::max))
}

fn shifted(b: &DMatrix<C64>, z: C64) -> DMatrix<C64> {
    b - DMatrix::<C64>::identity(b.nrows(), b.ncols()) * z
}

fn check_shift<A: LinearOp + ?Sized>(a: &A, z: C64, seed: u64) -> Result<()> {
    if z.im == 0.0 {
        let (e0, _) = ground_state(a, seed)?;
        if z.re >= e0 {
            return Err(Error::InvalidArgument(format!("real shift {} not below the spectrum (E0 = {e0})", z.re)));
        }
    }
    Ok(())
}

/// Solves `(A − z)Φ = Ψ`.
pub fn resolvent_apply<A: LinearOp + ?Sized>(a: &A, z: C64, psi: &[C64]) -> Result<Vec<C64>> {
    check_shift(a, z, 0)?;
    if let Some(blocks) = dense_blocks(a) {
        let parts = split(psi, &blocks);
        let sols: Result<Vec<Vec<C64>>> = blocks
            .par_iter()
            .zip(parts)
            .map(|(b, rhs)| {
                let m = shifted(b, z);
                let x = m
                    .clone()
                    .lu()
                    .solve(&DVector::from_column_slice(rhs))
                    .ok_or(Error::NearSingular(f64::INFINITY))?;
                let r = linalg::norm((&m * &x - DVector::from_column_slice(rhs)).as_slice());
                let bn = linalg::norm(rhs);
                if bn > 0.0 && r / bn > RESOLVENT_TOL {
                    return Err(Error::NearSingular(r / bn));
                }
                Ok(x.as_slice().to_vec())
            })
            .collect();
        return Ok(sols?.concat());
    }
    let op = |x: &[C64]| linalg::sub(&a.apply(x), &linalg::scaled(x, z));
    let (x, rel) = linalg::gmres(&op, psi, RESOLVENT_TOL * 0.5, 120, 200);
    if rel > RESOLVENT_TOL {
        return Err(Error::NearSingular(rel));
    }
    Ok(x)
}

/// `(A − z)^{-1}` blockwise, for operators held as fiber blocks.
pub fn resolvent_blocks(a: &FiberOperator, z: C64) -> Result<FiberOperator> {
    let blocks: Result<Vec<DMatrix<C64>>> = a
        .blocks
        .par_iter()
        .map(|b| shifted(b, z).try_inverse().ok_or(Error::NearSingular(f64::INFINITY)))
        .collect();
    Ok(FiberOperator::new(a.fibers.clone(), blocks?))
}

/// Smallest eigenpair of a Hermitian operator.
pub fn ground_state<A: LinearOp + ?Sized>(a: &A, seed: u64) -> Result<(f64, Vec<C64>)> {
    if let Some(blocks) = dense_blocks(a) {
        let eigs: Vec<HermitianEigen> = blocks.par_iter().map(|b| HermitianEigen::new(b.clone())).collect();
        let (best, _) = eigs
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.min().total_cmp(&y.1.min()))
            .ok_or_else(|| Error::InvalidArgument("empty operator".into()))?;
        let mut state = vec![C64::new(0.0, 0.0); a.dim()];
        let offset: usize = blocks[..best].iter().map(|b| b.nrows()).sum();
        for (i, v) in eigs[best].vectors.column(0).iter().enumerate() {
            state[offset + i] = *v;
        }
        return Ok((eigs[best].min(), state));
    }
    let op = |x: &[C64]| a.apply(x);
    linalg::lanczos_extremal(&op, a.dim(), false, seed, 1e-10, 500)
}

/// Cached spectral data for repeated `e^{-iAt}` applications.
pub struct Propagator<'a, A: LinearOp + ?Sized> {
    op: &'a A,
    eigen: Option<Vec<HermitianEigen>>,
}

impl<'a, A: LinearOp + ?Sized> Propagator<'a, A> {
    pub fn new(op: &'a A) -> Self {
        let eigen = dense_blocks(op).map(|blocks| blocks.into_par_iter().map(HermitianEigen::new).collect());
        Propagator { op, eigen }
    }

    pub fn apply(&self, t: f64, psi: &[C64]) -> Result<Vec<C64>> {
        if t == 0.0 {
            return Ok(psi.to_vec());
        }
        match &self.eigen {
            Some(eigs) => {
                let mut out = Vec::with_capacity(psi.len());
                let mut at = 0;
                for e in eigs {
                    let part = &psi[at..at + e.dim()];
                    out.extend(e.apply_function(|l| C64::new(0.0, -l * t).exp(), part));
                    at += e.dim();
                }
                Ok(out)
            }
            None => {
                let op = |x: &[C64]| self.op.apply(x);
                linalg::expm_hermitian_apply(&op, t, psi, PROPAGATE_TOL)
            }
        }
    }
}

/// `e^{-iAt}Ψ`.
pub fn propagate<A: LinearOp + ?Sized>(a: &A, t: f64, psi: &[C64]) -> Result<Vec<C64>> {
    Propagator::new(a).apply(t, psi)
}

/// Relative and additive form-bound constants of a fitted family.
#[derive(Clone, Debug, Serialize)]
pub struct FormBoundReport {
    pub a: f64,
    pub b: f64,
    /// `((Λ, Λ'), C_{Λ,Λ'})`, symmetric, zero on the diagonal.
    pub c_pairs: Vec<((f64, f64), f64)>,
}

/// Difference of resolvents at one cutoff.
#[derive(Clone, Debug, Serialize)]
pub struct ResolventRecord {
    pub z: (f64, f64),
    pub cutoff: f64,
    pub norm_diff: f64,
    pub d_lambda: f64,
}
