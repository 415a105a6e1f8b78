//! Truncated symmetric Fock space over a finite mode set.
//!
//! States are occupation vectors with total number at most `nmax`. All
//! operators are compressions to that space; identities that push weight above
//! `nmax` are only exact on states with enough headroom.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::linalg::{self, HermitianEigen};
use crate::sparse::CsrMatrix;

/// Fock dimensions up to this size use a dense exponential.
pub const DENSE_FOCK_LIMIT: usize = 1500;

#[derive(Clone, Debug)]
pub struct FockBasis {
    mode_count: usize,
    nmax: usize,
    states: Vec<Vec<u8>>,
    totals: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
}

fn push_compositions(prefix: &mut Vec<u8>, modes_left: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
    if modes_left == 1 {
        prefix.push(remaining as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first as u8);
        push_compositions(prefix, modes_left - 1, remaining - first, out);
        prefix.pop();
    }
}

impl FockBasis {
    /// Graded by total number; within a grade, lexicographically descending,
    /// so the one-particle state in mode `j` has ordinal `j + 1`.
    pub fn new(mode_count: usize, nmax: usize) -> Self {
        assert!(nmax <= u8::MAX as usize, "nmax above 255 is not supported");
        let mut states = Vec::new();
        if mode_count == 0 {
            states.push(Vec::new());
        } else {
            for total in 0..=nmax {
                push_compositions(&mut Vec::with_capacity(mode_count), mode_count, total, &mut states);
            }
        }
        let totals = states.iter().map(|s| s.iter().map(|&n| n as usize).sum()).collect();
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        FockBasis { mode_count, nmax, states, totals, index }
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn total(&self, i: usize) -> usize {
        self.totals[i]
    }

    pub fn totals(&self) -> &[usize] {
        &self.totals
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// Ordinals whose total number leaves at least `margin` quanta of room.
    pub fn headroom(&self, margin: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.totals[i] + margin <= self.nmax).collect()
    }

    /// Zeroes every amplitude outside the headroom set.
    pub fn project_headroom(&self, psi: &[C64], margin: usize) -> Vec<C64> {
        psi.iter()
            .zip(&self.totals)
            .map(|(&a, &t)| if t + margin <= self.nmax { a } else { C64::new(0.0, 0.0) })
            .collect()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// The ℓ² representative of a one-particle function: `amplitude_k = √w·f(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeFunction {
    pub amplitudes: Vec<C64>,
}

impl ModeFunction {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        ModeFunction { amplitudes }
    }

    pub fn zeros(modes: usize) -> Self {
        ModeFunction::new(vec![C64::new(0.0, 0.0); modes])
    }

    pub fn unit(modes: usize, j: usize) -> Self {
        let mut f = Self::zeros(modes);
        f.amplitudes[j] = C64::new(1.0, 0.0);
        f
    }

    /// From point samples `f(k)` and the quadrature weight `w`.
    pub fn from_samples(samples: &[C64], weight: f64) -> Self {
        let s = weight.sqrt();
        ModeFunction::new(samples.iter().map(|v| v * s).collect())
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ModeFunction) -> C64 {
        linalg::dot(&self.amplitudes, &other.amplitudes)
    }

    pub fn scale(&self, s: C64) -> ModeFunction {
        ModeFunction::new(self.amplitudes.iter().map(|a| a * s).collect())
    }

    pub fn add(&self, other: &ModeFunction) -> ModeFunction {
        ModeFunction::new(linalg::add(&self.amplitudes, &other.amplitudes))
    }

    pub fn sub(&self, other: &ModeFunction) -> ModeFunction {
        ModeFunction::new(linalg::sub(&self.amplitudes, &other.amplitudes))
    }
}

#[derive(Clone, Debug)]
pub struct FockOperator {
    pub matrix: CsrMatrix,
    pub hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: CsrMatrix, hermitian: bool) -> Self {
        FockOperator { matrix, hermitian }
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        self.matrix.apply(psi)
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator::new(self.matrix.adjoint(), self.hermitian)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// `true` when the flag agrees with the matrix to 1e-12.
    pub fn flag_consistent(&self) -> bool {
        !self.hermitian || self.matrix.hermiticity_defect() <= 1e-12
    }
}

fn check_modes(f: &ModeFunction, basis: &FockBasis) {
    assert_eq!(f.len(), basis.mode_count(), "mode function does not match the basis");
}

/// Raises mode `j` in every state; returns `(row, col, √(n_j+1))` triples.
fn raising_pattern(basis: &FockBasis, j: usize) -> Vec<(usize, usize, f64)> {
    (0..basis.len())
        .filter(|&i| basis.total(i) < basis.nmax())
        .map(|i| {
            let mut n = basis.state(i).to_vec();
            let nj = n[j] as f64;
            n[j] += 1;
            (basis.index_of(&n).expect("raised state in basis"), i, (nj + 1.0).sqrt())
        })
        .collect()
}

pub fn create(f: &ModeFunction, basis: &FockBasis) -> FockOperator {
    check_modes(f, basis);
    let triplets: Vec<(usize, usize, C64)> = (0..basis.mode_count())
        .into_par_iter()
        .filter(|&j| f.amplitudes[j] != C64::new(0.0, 0.0))
        .flat_map_iter(|j| {
            raising_pattern(basis, j)
                .into_iter()
                .map(move |(r, c, s)| (r, c, f.amplitudes[j] * s))
        })
        .collect();
    FockOperator::new(CsrMatrix::from_triplets(basis.len(), basis.len(), triplets), false)
}

/// Assembled directly from the lowering rule, not as an adjoint.
pub fn annihilate(f: &ModeFunction, basis: &FockBasis) -> FockOperator {
    check_modes(f, basis);
    let triplets: Vec<(usize, usize, C64)> = (0..basis.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let n = basis.state(i);
            (0..basis.mode_count())
                .filter(|&j| n[j] > 0 && f.amplitudes[j] != C64::new(0.0, 0.0))
                .map(|j| {
                    let mut lowered = n.to_vec();
                    lowered[j] -= 1;
                    let r = basis.index_of(&lowered).expect("lowered state in basis");
                    (r, i, f.amplitudes[j].conj() * (n[j] as f64).sqrt())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    FockOperator::new(CsrMatrix::from_triplets(basis.len(), basis.len(), triplets), false)
}

pub fn number(basis: &FockBasis) -> FockOperator {
    let diag: Vec<C64> = basis.totals().iter().map(|&t| C64::new(t as f64, 0.0)).collect();
    FockOperator::new(CsrMatrix::diagonal(&diag), true)
}

/// `φ(f) = a(f) + a*(f)`.
pub fn field_phi(f: &ModeFunction, basis: &FockBasis) -> FockOperator {
    let m = &annihilate(f, basis).matrix + &create(f, basis).matrix;
    FockOperator::new(m, true)
}

/// `π(f) = i(a*(f) − a(f)) = φ(if)`.
pub fn field_pi(f: &ModeFunction, basis: &FockBasis) -> FockOperator {
    let m = (&create(f, basis).matrix - &annihilate(f, basis).matrix).scale(C64::new(0.0, 1.0));
    FockOperator::new(m, true)
}

/// Dense `e^{iπ(f)}` from the eigendecomposition of the compressed `π(f)`.
pub fn weyl_matrix(f: &ModeFunction, basis: &FockBasis) -> DMatrix<C64> {
    if f.norm_sq() == 0.0 {
        return DMatrix::identity(basis.len(), basis.len());
    }
    let eig = HermitianEigen::new(field_pi(f, basis).to_dense());
    eig.function(|l| C64::new(0.0, l).exp())
}

pub fn weyl(f: &ModeFunction, basis: &FockBasis) -> FockOperator {
    FockOperator::new(CsrMatrix::from_dense(&weyl_matrix(f, basis), 0.0), false)
}

/// `e^{iπ(f)}ψ` by a Krylov exponential, for bases too large for `weyl`.
pub fn weyl_apply(f: &ModeFunction, basis: &FockBasis, psi: &[C64]) -> Vec<C64> {
    let pi = field_pi(f, basis).matrix.scale_re(-1.0);
    let op = |x: &[C64]| pi.apply(x);
    linalg::expm_hermitian_apply(&op, 1.0, psi, 1e-13).expect("krylov exponential of a bounded generator")
}

/// Normalised coherent vector `e^{−iπ(f)}Ω` with its truncation leakage.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub state: Vec<C64>,
    /// Poisson weight of occupations above `nmax`.
    pub leakage: f64,
}

/// `P(n > nmax)` for a Poisson law with the given mean.
pub fn poisson_tail(mean: f64, nmax: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_term = |n: usize| -> f64 { -mean + n as f64 * mean.ln() - ln_factorial(n) };
    let head: f64 = (0..=nmax).map(|n| ln_term(n).exp()).sum();
    if head < 0.5 {
        return 1.0 - head;
    }
    let mut tail = 0.0;
    let mut n = nmax + 1;
    loop {
        let t = ln_term(n).exp();
        tail += t;
        if (n as f64 > mean && t < 1e-18 * tail.max(1e-300)) || n > nmax + 10_000 {
            break;
        }
        n += 1;
    }
    tail
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn coherent(f: &ModeFunction, basis: &FockBasis) -> CoherentState {
    let minus = f.scale(C64::new(-1.0, 0.0));
    let state = if basis.len() <= DENSE_FOCK_LIMIT {
        weyl_matrix(&minus, basis).column(0).iter().copied().collect()
    } else {
        weyl_apply(&minus, basis, &basis.vacuum())
    };
    let leakage = poisson_tail(f.norm_sq(), basis.nmax());
    if leakage > 1e-6 {
        log::warn!(
            "coherent state leakage {leakage:.3e} above 1e-6 (|f|^2 = {:.3}, nmax = {})",
            f.norm_sq(),
            basis.nmax()
        );
    }
    CoherentState { state, leakage }
}
