//! Electron on a periodic lattice tensored with the truncated Fock space.
//!
//! Position-basis index: `x · F + n` with `x` the site ordinal and `n` the Fock
//! ordinal. The electron momentum is taken in the total-momentum frame,
//!
//! ```text
//! p = S^† p_lat S − P_f,    S = e^{i P_f·x},
//! ```
//!
//! where `p_lat` is the lattice Fourier multiplier and `P_f = Σ k n_k`. Each
//! Fock block of `p` is a circulant over sites. With this choice `p + P_f`
//! commutes with every translation-covariant operator, so those operators are
//! block diagonal in the fiber basis
//!
//! ```text
//! |P, n⟩ = L^{-d/2} Σ_x e^{i(P − Q(n))·x} |x, n⟩,    Q(n) = Σ_k k n_k,
//! ```
//!
//! and on a fiber `p` is the diagonal `P − Q(n)`. Commutators such as
//! `[p, a(F)] = a(kF)` are then exact with no lattice wrap-around.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, FockOperator, ModeFunction};
use crate::linalg;
use crate::model::{build_grid, window_indices, Mode, ModeGrid, ModelConfig};
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct QSpace {
    pub grid: ModeGrid,
    /// Grid indices of the modes carried by the Fock space.
    pub active: Vec<usize>,
    pub basis: FockBasis,
    sites: Vec<[i64; 3]>,
    momenta: Vec<[i64; 3]>,
    phonon: Vec<[i64; 3]>,
    roots: Vec<C64>,
}

impl QSpace {
    /// Fock space over the modes with `|k| ≤ active_cutoff`. Inactive modes are
    /// held in their vacuum, an invariant subspace of every operator built
    /// from fields supported inside the cutoff.
    pub fn new(grid: &ModeGrid, active_cutoff: f64, nmax: usize) -> Result<Self> {
        if active_cutoff > grid.lambda_grid() * (1.0 + 1e-12) {
            return Err(Error::CutoffNotRepresentable {
                cutoff: active_cutoff,
                max: grid.lambda_grid(),
            });
        }
        let mask = grid.mask(active_cutoff);
        let active: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
        let basis = FockBasis::new(active.len(), nmax);
        let d = grid.dimension;
        let l = grid.sites_per_dim;
        let sites = site_indices(d, l);
        let momenta = window_indices(d, l);
        let phonon = (0..basis.len())
            .map(|i| {
                let mut q = [0i64; 3];
                for (slot, &occ) in basis.state(i).iter().enumerate() {
                    let idx = grid.modes[active[slot]].index;
                    for j in 0..d {
                        q[j] += occ as i64 * idx[j];
                    }
                }
                q
            })
            .collect();
        let roots = (0..l)
            .map(|r| C64::from_polar(1.0, 2.0 * PI * r as f64 / l as f64))
            .collect();
        Ok(QSpace { grid: grid.clone(), active, basis, sites, momenta, phonon, roots })
    }

    /// Grid and space for a config, with active modes up to `max(lambda_list)`.
    pub fn from_config(config: &ModelConfig) -> Result<Self> {
        let grid = build_grid(config)?;
        QSpace::new(&grid, config.lambda_ref(), config.nmax)
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn fock_len(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.site_count() * self.fock_len()
    }

    pub fn index(&self, x: usize, n: usize) -> usize {
        x * self.fock_len() + n
    }

    /// Per-site measure `(ℓ/L)^d`.
    pub fn site_weight(&self) -> f64 {
        (self.grid.torus_length / self.grid.sites_per_dim as f64).powi(self.dimension() as i32)
    }

    pub fn active_mode(&self, slot: usize) -> &Mode {
        &self.grid.modes[self.active[slot]]
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn position(&self, x: usize) -> [f64; 3] {
        let a = self.grid.torus_length / self.grid.sites_per_dim as f64;
        let m = self.sites[x];
        [a * m[0] as f64, a * m[1] as f64, a * m[2] as f64]
    }

    fn dk(&self) -> f64 {
        2.0 * PI / self.grid.torus_length
    }

    fn to_k(&self, v: [i64; 3]) -> [f64; 3] {
        let dk = self.dk();
        [dk * v[0] as f64, dk * v[1] as f64, dk * v[2] as f64]
    }

    /// Number of total-momentum fibers, `L^d`.
    pub fn fiber_count(&self) -> usize {
        self.momenta.len()
    }

    pub fn total_momentum(&self, p: usize) -> [f64; 3] {
        self.to_k(self.momenta[p])
    }

    /// Ordinal of the zero total-momentum fiber.
    pub fn zero_fiber(&self) -> usize {
        self.momenta.iter().position(|m| *m == [0, 0, 0]).expect("zero in window")
    }

    pub fn phonon_momentum(&self, n: usize) -> [f64; 3] {
        self.to_k(self.phonon[n])
    }

    /// Electron momentum `P − Q(n)` of the fiber state `|P, n⟩`.
    pub fn electron_momentum(&self, p: usize, n: usize) -> [f64; 3] {
        let (a, b) = (self.momenta[p], self.phonon[n]);
        self.to_k([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }

    /// `e^{i k·x}` for the dual-lattice vector with integer index `v`.
    pub fn phase(&self, v: [i64; 3], x: usize) -> C64 {
        let m = self.sites[x];
        let dotp: i64 = (0..3).map(|j| v[j] * m[j]).sum();
        self.roots[dotp.rem_euclid(self.grid.sites_per_dim as i64) as usize]
    }

    fn fiber_phase(&self, p: usize, n: usize, x: usize) -> C64 {
        let (a, b) = (self.momenta[p], self.phonon[n]);
        self.phase([a[0] - b[0], a[1] - b[1], a[2] - b[2]], x)
    }

    /// Position amplitudes to fiber coordinates `(P, n) ↦ P·F + n`.
    pub fn to_fiber_coords(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.dim());
        let f = self.fock_len();
        let norm = (self.site_count() as f64).sqrt().recip();
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        out.par_chunks_mut(f).enumerate().for_each(|(p, chunk)| {
            for (n, slot) in chunk.iter_mut().enumerate() {
                *slot = (0..self.site_count())
                    .map(|x| self.fiber_phase(p, n, x).conj() * psi[self.index(x, n)])
                    .sum::<C64>()
                    * norm;
            }
        });
        out
    }

    pub fn from_fiber_coords(&self, phi: &[C64]) -> Vec<C64> {
        assert_eq!(phi.len(), self.dim());
        let f = self.fock_len();
        let norm = (self.site_count() as f64).sqrt().recip();
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        out.par_chunks_mut(f).enumerate().for_each(|(x, chunk)| {
            for (n, slot) in chunk.iter_mut().enumerate() {
                *slot = (0..self.fiber_count())
                    .map(|p| self.fiber_phase(p, n, x) * phi[p * f + n])
                    .sum::<C64>()
                    * norm;
            }
        });
        out
    }

    /// Fiber blocks of a position-basis operator for the requested fibers,
    /// together with the relative weight of couplings between different
    /// fibers (zero for translation-covariant operators).
    pub fn fibers(&self, op: &QOperator, which: &[usize]) -> (FiberOperator, f64) {
        let f = self.fock_len();
        let sc = self.site_count() as f64;
        let entries: Vec<(usize, usize, usize, usize, C64)> = op
            .matrix
            .iter()
            .map(|(r, c, v)| (r / f, r % f, c / f, c % f, v))
            .collect();
        let blocks: Vec<DMatrix<C64>> = which
            .par_iter()
            .map(|&p| {
                let mut m = DMatrix::zeros(f, f);
                for &(xr, nr, xc, nc, v) in &entries {
                    m[(nr, nc)] += self.fiber_phase(p, nr, xr).conj() * v * self.fiber_phase(p, nc, xc) / sc;
                }
                m
            })
            .collect();
        let total: f64 = op.matrix.iter().map(|(_, _, v)| v.norm_sqr()).sum();
        let leakage = if which.len() == self.fiber_count() && total > 0.0 {
            let kept: f64 = blocks.iter().map(|b| b.norm_squared()).sum();
            ((total - kept).max(0.0) / total).sqrt()
        } else {
            0.0
        };
        (FiberOperator::new(which.to_vec(), blocks), leakage)
    }

    pub fn all_fibers(&self) -> Vec<usize> {
        (0..self.fiber_count()).collect()
    }

    // ----- position-basis operators -----

    pub fn identity(&self) -> QOperator {
        QOperator::new(CsrMatrix::identity(self.dim()), Structure::XBlockDiagonal)
    }

    pub fn number_op(&self) -> QOperator {
        self.fock_blocks(|_| fock::number(&self.basis), Structure::XBlockDiagonal)
    }

    /// `⊕_x A_x` for Fock-space blocks `A_x`.
    pub fn fock_blocks(&self, block: impl Fn(usize) -> FockOperator + Sync, structure: Structure) -> QOperator {
        let f = self.fock_len();
        let triplets: Vec<(usize, usize, C64)> = (0..self.site_count())
            .into_par_iter()
            .flat_map_iter(|x| {
                block(x)
                    .matrix
                    .iter()
                    .map(|(r, c, v)| (x * f + r, x * f + c, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        QOperator::new(CsrMatrix::from_triplets(self.dim(), self.dim(), triplets), structure)
    }

    /// Multiplication by `g(x)` on the electron.
    pub fn position_multiplier(&self, g: impl Fn([f64; 3]) -> C64) -> QOperator {
        let f = self.fock_len();
        let diag: Vec<C64> = (0..self.dim()).map(|i| g(self.position(i / f))).collect();
        QOperator::new(CsrMatrix::diagonal(&diag), Structure::XBlockDiagonal)
    }

    /// Multiplication by `e^{ik·x}` for the dual-lattice vector with index `v`.
    pub fn plane_wave_multiplier(&self, v: [i64; 3]) -> QOperator {
        let f = self.fock_len();
        let diag: Vec<C64> = (0..self.dim()).map(|i| self.phase(v, i / f)).collect();
        QOperator::new(CsrMatrix::diagonal(&diag), Structure::XBlockDiagonal)
    }

    /// `g(p)` for a symbol `g` of the electron momentum.
    pub fn momentum_function(&self, g: impl Fn([f64; 3]) -> f64 + Sync) -> QOperator {
        let f = self.fock_len();
        let sc = self.site_count();
        // the block for Fock state n is a circulant determined by Q(n)
        let mut kernels: HashMap<[i64; 3], Vec<C64>> = HashMap::new();
        for q in &self.phonon {
            kernels.entry(*q).or_insert_with(|| {
                (0..sc)
                    .map(|dx| {
                        (0..self.fiber_count())
                            .map(|p| {
                                let m = self.momenta[p];
                                let v = [m[0] - q[0], m[1] - q[1], m[2] - q[2]];
                                self.phase(v, dx) * g(self.to_k(v))
                            })
                            .sum::<C64>()
                            / sc as f64
                    })
                    .collect()
            });
        }
        let l = self.grid.sites_per_dim as i64;
        let d = self.dimension();
        let diff_index = |a: usize, b: usize| -> usize {
            let (ma, mb) = (self.sites[a], self.sites[b]);
            let mut idx = 0usize;
            for j in 0..d {
                idx = idx * l as usize + (ma[j] - mb[j]).rem_euclid(l) as usize;
            }
            idx
        };
        let triplets: Vec<(usize, usize, C64)> = (0..f)
            .into_par_iter()
            .flat_map_iter(|n| {
                let kernel = &kernels[&self.phonon[n]];
                let mut out = Vec::with_capacity(sc * sc);
                for xr in 0..sc {
                    for xc in 0..sc {
                        let v = kernel[diff_index(xr, xc)];
                        if v.norm() > 1e-15 {
                            out.push((xr * f + n, xc * f + n, v));
                        }
                    }
                }
                out
            })
            .collect();
        QOperator::new(CsrMatrix::from_triplets(self.dim(), self.dim(), triplets), Structure::MomentumMultiplier)
    }

    pub fn momentum_op(&self, axis: usize) -> QOperator {
        self.momentum_function(move |k| k[axis])
    }

    /// `−Δ`, the multiplier `p²`.
    pub fn laplacian_op(&self) -> QOperator {
        self.momentum_function(|k| k.iter().map(|c| c * c).sum())
    }

    /// `H_0 = p² + N`.
    pub fn free_hamiltonian(&self) -> QOperator {
        let m = &self.laplacian_op().matrix + &self.number_op().matrix;
        QOperator::new(m, Structure::General)
    }

    pub fn gen_annihilate(&self, field: &FormFactorField) -> QOperator {
        self.fock_blocks(|x| fock::annihilate(&field.at(x), &self.basis), Structure::XBlockDiagonal)
    }

    pub fn gen_create(&self, field: &FormFactorField) -> QOperator {
        self.fock_blocks(|x| fock::create(&field.at(x), &self.basis), Structure::XBlockDiagonal)
    }

    /// `(φ(F), π(F))`.
    pub fn field_ops(&self, field: &FormFactorField) -> (QOperator, QOperator) {
        let a = self.gen_annihilate(field).matrix;
        let ad = self.gen_create(field).matrix;
        let phi = QOperator::new(&a + &ad, Structure::XBlockDiagonal);
        let pi = QOperator::new((&ad - &a).scale(C64::new(0.0, 1.0)), Structure::XBlockDiagonal);
        (phi, pi)
    }

    /// `Σ_j p_j a(F_j)` for a vector field given by its components.
    pub fn dot_p_annihilate(&self, components: &[FormFactorField]) -> QOperator {
        let mut acc = CsrMatrix::zeros(self.dim(), self.dim());
        for (j, comp) in components.iter().enumerate() {
            acc = &acc + &self.momentum_op(j).matrix.matmul(&self.gen_annihilate(comp).matrix);
        }
        QOperator::new(acc, Structure::General)
    }

    /// The commuted assembly `Σ_j a(F_j) p_j + a(Σ_j k_j F_j)`.
    pub fn dot_p_annihilate_commuted(&self, components: &[FormFactorField], divergence: &FormFactorField) -> QOperator {
        let mut acc = self.gen_annihilate(divergence).matrix;
        for (j, comp) in components.iter().enumerate() {
            acc = &acc + &self.gen_annihilate(comp).matrix.matmul(&self.momentum_op(j).matrix);
        }
        QOperator::new(acc, Structure::General)
    }

    // ----- fiber-basis operators -----

    /// The same Fock-space matrix on each of the given fibers.
    pub fn fiber_repeat(&self, block: &DMatrix<C64>, which: &[usize]) -> FiberOperator {
        FiberOperator::new(which.to_vec(), vec![block.clone(); which.len()])
    }

    /// `g(P − Q(n))` on each fiber.
    pub fn fiber_momentum_function(&self, g: impl Fn([f64; 3]) -> f64, which: &[usize]) -> FiberOperator {
        let blocks = which
            .iter()
            .map(|&p| {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    self.fock_len(),
                    (0..self.fock_len()).map(|n| C64::new(g(self.electron_momentum(p, n)), 0.0)),
                ))
            })
            .collect();
        FiberOperator::new(which.to_vec(), blocks)
    }

    /// Diagonal of `H_0 = (P − Q(n))² + N` on fiber `p`.
    pub fn free_diagonal(&self, p: usize) -> Vec<f64> {
        (0..self.fock_len())
            .map(|n| {
                let k = self.electron_momentum(p, n);
                k.iter().map(|c| c * c).sum::<f64>() + self.basis.total(n) as f64
            })
            .collect()
    }

    pub fn fiber_free_hamiltonian(&self, which: &[usize]) -> FiberOperator {
        let blocks = which
            .iter()
            .map(|&p| {
                let diag = self.free_diagonal(p);
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    diag.len(),
                    diag.into_iter().map(|v| C64::new(v, 0.0)),
                ))
            })
            .collect();
        FiberOperator::new(which.to_vec(), blocks)
    }

    // ----- states and constants -----

    /// Plane wave `e^{ik·x} ⊗ Ω` normalised in ℓ².
    pub fn plane_wave_state(&self, v: [i64; 3]) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); self.dim()];
        let norm = (self.site_count() as f64).sqrt().recip();
        for x in 0..self.site_count() {
            psi[self.index(x, 0)] = self.phase(v, x) * norm;
        }
        psi
    }

    /// `γ ⊗ η` for electron amplitudes `γ` and a Fock vector `η`.
    pub fn product_state(&self, gamma: &[C64], eta: &[C64]) -> Vec<C64> {
        gamma.iter().flat_map(|g| eta.iter().map(move |e| g * e)).collect()
    }

    /// Random unit vector supported on Fock states with `margin` quanta of headroom.
    pub fn random_headroom_state(&self, seed: u64, tag: &str, trial: u64, margin: usize) -> Vec<C64> {
        let mut r = rng::stream(seed, tag, trial);
        let mut psi: Vec<C64> = (0..self.dim())
            .map(|i| {
                let (a, b): (f64, f64) = (r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5);
                if self.basis.total(i % self.fock_len()) + margin <= self.basis.nmax() {
                    C64::new(a, b)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let n = linalg::norm(&psi);
        psi.iter_mut().for_each(|v| *v /= n);
        psi
    }

    /// `C_f² = sup_h Σ_k |f_k|²/(1 + (h − k)²)` with `h` over every electron
    /// momentum that occurs in the space.
    pub fn translated_annihilator_constant(&self, profile: &ModeFunction) -> f64 {
        let mut hs: Vec<[i64; 3]> = Vec::new();
        for p in &self.momenta {
            for q in &self.phonon {
                hs.push([p[0] - q[0], p[1] - q[1], p[2] - q[2]]);
            }
        }
        hs.sort_unstable();
        hs.dedup();
        hs.par_iter()
            .map(|&h| {
                let hk = self.to_k(h);
                (0..self.active_count())
                    .map(|j| {
                        let k = self.active_mode(j).k;
                        let dist2: f64 = (0..3).map(|i| (hk[i] - k[i]).powi(2)).sum();
                        profile.amplitudes[j].norm_sqr() / (1.0 + dist2)
                    })
                    .sum::<f64>()
            })
            .reduce(|| 0.0, f64::max)
            .sqrt()
    }
}

fn site_indices(dimension: usize, sites: usize) -> Vec<[i64; 3]> {
    let count = sites.pow(dimension as u32);
    (0..count)
        .map(|mut i| {
            let mut m = [0i64; 3];
            for j in (0..dimension).rev() {
                m[j] = (i % sites) as i64;
                i /= sites;
            }
            m
        })
        .collect()
}

/// An x-dependent one-particle function `F_x(k)`, stored as ℓ² amplitudes per
/// site and active mode.
#[derive(Clone, Debug)]
pub struct FormFactorField {
    pub name: String,
    pub table: Vec<Vec<C64>>,
}

impl FormFactorField {
    /// `F_x(k) = e^{-ik·x} f(k)` for mode amplitudes `f`.
    pub fn translated(space: &QSpace, name: &str, profile: &ModeFunction) -> Self {
        assert_eq!(profile.len(), space.active_count());
        let table = (0..space.site_count())
            .map(|x| {
                (0..space.active_count())
                    .map(|j| {
                        let idx = space.active_mode(j).index;
                        space.phase([-idx[0], -idx[1], -idx[2]], x) * profile.amplitudes[j]
                    })
                    .collect()
            })
            .collect();
        FormFactorField { name: name.to_string(), table }
    }

    pub fn from_fn(space: &QSpace, name: &str, f: impl Fn(usize, usize) -> C64) -> Self {
        let table = (0..space.site_count())
            .map(|x| (0..space.active_count()).map(|j| f(x, j)).collect())
            .collect();
        FormFactorField { name: name.to_string(), table }
    }

    pub fn at(&self, x: usize) -> ModeFunction {
        ModeFunction::new(self.table[x].clone())
    }

    /// `sup_x ‖F_x‖`.
    pub fn sup_norm(&self) -> f64 {
        self.table
            .iter()
            .map(|row| linalg::norm(row))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &FormFactorField) -> FormFactorField {
        FormFactorField {
            name: format!("{}-{}", self.name, other.name),
            table: self.table.iter().zip(&other.table).map(|(a, b)| linalg::sub(a, b)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    XBlockDiagonal,
    MomentumMultiplier,
    General,
}

#[derive(Clone, Debug)]
pub struct QOperator {
    pub matrix: CsrMatrix,
    pub structure: Structure,
}

impl QOperator {
    pub fn new(matrix: CsrMatrix, structure: Structure) -> Self {
        QOperator { matrix, structure }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        self.matrix.apply(psi)
    }

    pub fn adjoint(&self) -> QOperator {
        QOperator::new(self.matrix.adjoint(), self.structure)
    }

    pub fn compose(&self, other: &QOperator) -> QOperator {
        let structure = if self.structure == other.structure { self.structure } else { Structure::General };
        QOperator::new(self.matrix.matmul(&other.matrix), structure)
    }

    pub fn add(&self, other: &QOperator) -> QOperator {
        let structure = if self.structure == other.structure { self.structure } else { Structure::General };
        QOperator::new(&self.matrix + &other.matrix, structure)
    }

    pub fn sub(&self, other: &QOperator) -> QOperator {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> QOperator {
        QOperator::new(self.matrix.scale(s), self.structure)
    }

    pub fn shift(&self, s: f64) -> QOperator {
        let id = CsrMatrix::identity(self.dim()).scale_re(s);
        QOperator::new(&self.matrix + &id, self.structure)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// Checks the sparsity pattern against the structure tag.
    pub fn structure_consistent(&self, space: &QSpace) -> bool {
        let f = space.fock_len();
        match self.structure {
            Structure::XBlockDiagonal => self.matrix.iter().all(|(r, c, _)| r / f == c / f),
            Structure::MomentumMultiplier => self.matrix.iter().all(|(r, c, _)| r % f == c % f),
            Structure::General => true,
        }
    }
}

/// Block-diagonal operator in fiber coordinates. Vectors are the
/// concatenation of the listed fibers, each of length `F`.
#[derive(Clone, Debug)]
pub struct FiberOperator {
    pub fibers: Vec<usize>,
    pub blocks: Vec<DMatrix<C64>>,
}

impl FiberOperator {
    pub fn new(fibers: Vec<usize>, blocks: Vec<DMatrix<C64>>) -> Self {
        assert_eq!(fibers.len(), blocks.len());
        FiberOperator { fibers, blocks }
    }

    pub fn block_len(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let f = self.block_len();
        self.blocks
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, b)| {
                let x = nalgebra::DVector::from_column_slice(&psi[i * f..(i + 1) * f]);
                (b * x).data.as_vec().clone()
            })
            .collect()
    }

    fn zip_with(&self, other: &FiberOperator, f: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64> + Sync + Send) -> FiberOperator {
        assert_eq!(self.fibers, other.fibers, "fiber sets differ");
        let blocks = self.blocks.par_iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        FiberOperator::new(self.fibers.clone(), blocks)
    }

    fn map(&self, f: impl Fn(&DMatrix<C64>) -> DMatrix<C64> + Sync + Send) -> FiberOperator {
        FiberOperator::new(self.fibers.clone(), self.blocks.par_iter().map(f).collect())
    }

    pub fn add(&self, other: &FiberOperator) -> FiberOperator {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FiberOperator) -> FiberOperator {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn compose(&self, other: &FiberOperator) -> FiberOperator {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn adjoint(&self) -> FiberOperator {
        self.map(|a| a.adjoint())
    }

    pub fn scale(&self, s: C64) -> FiberOperator {
        self.map(|a| a * s)
    }

    pub fn shift(&self, s: f64) -> FiberOperator {
        self.map(|a| a + DMatrix::<C64>::identity(a.nrows(), a.ncols()) * C64::new(s, 0.0))
    }

    /// `A ↦ U A U^†`.
    pub fn conjugate_by(&self, u: &FiberOperator) -> FiberOperator {
        u.compose(self).compose(&u.adjoint())
    }

    pub fn max_abs_diff(&self, other: &FiberOperator) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).camax())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks.iter().map(|a| (a - a.adjoint()).camax()).fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|a| (a.adjoint() * a - DMatrix::<C64>::identity(a.nrows(), a.ncols())).camax())
            .fold(0.0, f64::max)
    }

    /// Restriction to a sub-list of the stored fibers.
    pub fn select(&self, which: &[usize]) -> FiberOperator {
        let blocks = which
            .iter()
            .map(|p| {
                let i = self.fibers.iter().position(|q| q == p).expect("fiber present");
                self.blocks[i].clone()
            })
            .collect();
        FiberOperator::new(which.to_vec(), blocks)
    }
}

/// Weighted electron-Fock state.
#[derive(Clone, Debug)]
pub struct QState {
    pub amplitudes: Vec<C64>,
    pub site_count: usize,
    pub fock_len: usize,
    pub site_weight: f64,
}

impl QState {
    pub fn new(space: &QSpace, amplitudes: Vec<C64>) -> Self {
        assert_eq!(amplitudes.len(), space.dim());
        QState {
            amplitudes,
            site_count: space.site_count(),
            fock_len: space.fock_len(),
            site_weight: space.site_weight(),
        }
    }

    /// `‖Ψ‖² = (ℓ/L)^d Σ_{x,n} |Ψ(x,n)|²`.
    pub fn norm(&self) -> f64 {
        self.site_weight.sqrt() * linalg::norm(&self.amplitudes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FormFactorSpec;

    fn space(d: usize, l: usize, active: f64, nmax: usize) -> QSpace {
        let cfg = ModelConfig {
            dimension: d,
            torus_length: 2.0 * PI,
            sites_per_dim: l,
            nmax,
            form_factor: FormFactorSpec::SmoothPower { beta: 0.125 },
            coupling: 1.0,
            k_ir: 0.5,
            lambda_list: vec![active],
            seed: 3,
        };
        QSpace::from_config(&cfg).unwrap()
    }

    fn profile(space: &QSpace, seed: u64) -> ModeFunction {
        ModeFunction::new(linalg::random_vector(space.active_count(), seed))
    }

    fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
        linalg::norm(&linalg::sub(a, b))
    }

    #[test]
    fn plane_wave_is_momentum_eigenvector() {
        let s = space(1, 8, 2.5, 2);
        let p = s.momentum_op(0);
        for n in -3..=4 {
            let psi = s.plane_wave_state([n, 0, 0]);
            let want = linalg::scaled(&psi, C64::new(n as f64, 0.0));
            assert!(diff_norm(&p.apply(&psi), &want) < 1e-12);
        }
        assert!(p.structure_consistent(&s));
        assert!(p.matrix.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn laplacian_is_sum_of_squares() {
        let s = space(2, 4, 1.6, 1);
        let lap = s.laplacian_op();
        let sum = &s.momentum_op(0).matrix.matmul(&s.momentum_op(0).matrix) + &s.momentum_op(1).matrix.matmul(&s.momentum_op(1).matrix);
        assert!(lap.matrix.max_abs_diff(&sum) < 1e-12);
    }

    #[test]
    fn fiber_transform_is_unitary_and_diagonalises_p() {
        let s = space(1, 8, 2.5, 3);
        let psi = s.random_headroom_state(1, "t", 0, 0);
        let phi = s.to_fiber_coords(&psi);
        assert!((linalg::norm(&phi) - 1.0).abs() < 1e-12);
        assert!(diff_norm(&s.from_fiber_coords(&phi), &psi) < 1e-12);
        let (fib, leak) = s.fibers(&s.free_hamiltonian(), &s.all_fibers());
        assert!(leak < 1e-12);
        assert!(fib.max_abs_diff(&s.fiber_free_hamiltonian(&s.all_fibers())) < 1e-12);
    }

    #[test]
    fn x_independent_field_is_identity_tensor() {
        let s = space(1, 4, 2.0, 2);
        let f = profile(&s, 4);
        let field = FormFactorField::from_fn(&s, "const", |_, j| f.amplitudes[j]);
        let a = s.gen_annihilate(&field);
        let block = fock::annihilate(&f, &s.basis);
        let fl = s.fock_len();
        for (r, c, v) in a.matrix.iter() {
            assert_eq!(r / fl, c / fl);
            assert_eq!(v, block.matrix.get(r % fl, c % fl));
        }
        assert_eq!(a.matrix.nnz(), s.site_count() * block.matrix.nnz());
        assert_eq!(s.gen_create(&field).matrix.max_abs_diff(&a.matrix.adjoint()), 0.0);
    }

    #[test]
    fn lieb_thomas_commutator_is_exact() {
        let s = space(1, 8, 2.5, 4);
        let g = &s.grid;
        let amp = |cut: f64| {
            ModeFunction::new(
                s.active
                    .iter()
                    .map(|&i| C64::new(if g.modes[i].abs <= cut + 1e-12 { g.weight.sqrt() * g.vsamples[i] } else { 0.0 }, 0.0))
                    .collect(),
            )
        };
        let diff = amp(2.5).sub(&amp(1.5));
        let a_field = ModeFunction::new(
            (0..s.active_count())
                .map(|j| diff.amplitudes[j] * s.active_mode(j).k[0] / s.active_mode(j).k2())
                .collect(),
        );
        let lhs = {
            let p = s.momentum_op(0).matrix;
            let a = s.gen_annihilate(&FormFactorField::translated(&s, "A", &a_field)).matrix;
            &p.matmul(&a) - &a.matmul(&p)
        };
        let rhs = s.gen_annihilate(&FormFactorField::translated(&s, "G1-G2", &diff)).matrix;
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn dot_p_assemblies_agree() {
        let s = space(2, 4, 1.6, 2);
        let b = profile(&s, 9);
        let comp = |j: usize| {
            FormFactorField::translated(
                &s,
                "kB",
                &ModeFunction::new((0..s.active_count()).map(|i| b.amplitudes[i] * s.active_mode(i).k[j]).collect()),
            )
        };
        let k2b = FormFactorField::translated(
            &s,
            "k2B",
            &ModeFunction::new((0..s.active_count()).map(|i| b.amplitudes[i] * s.active_mode(i).k2()).collect()),
        );
        let comps = vec![comp(0), comp(1)];
        let direct = s.dot_p_annihilate(&comps);
        let commuted = s.dot_p_annihilate_commuted(&comps, &k2b);
        for trial in 0..20 {
            let psi = s.random_headroom_state(5, "dotp", trial, 0);
            assert!(diff_norm(&direct.apply(&psi), &commuted.apply(&psi)) < 1e-10);
        }
        let zero = ModeFunction::zeros(s.active_count());
        let zf = FormFactorField::translated(&s, "0", &zero);
        assert_eq!(s.dot_p_annihilate(&[zf.clone(), zf]).matrix.max_abs(), 0.0);
    }

    #[test]
    fn shift_identity_on_momentum_headroom() {
        let s = space(1, 8, 1.5, 2);
        let eps = 0.3;
        let sm1 = 0.4;
        let reg = |k: [f64; 3]| {
            let a = k[0].abs().powf(sm1);
            a / (1.0 + eps * a)
        };
        let m = s.momentum_function(reg);
        for shift in [1i64, 2] {
            let e = s.plane_wave_multiplier([shift, 0, 0]);
            let shifted = s.momentum_function(|k| reg([k[0] + shift as f64, 0.0, 0.0]));
            // fiber states whose electron momentum stays in the window after the shift
            let mut phi = vec![C64::new(0.0, 0.0); s.dim()];
            for p in 0..s.fiber_count() {
                for n in 0..s.fock_len() {
                    let k = s.electron_momentum(p, n)[0] + shift as f64;
                    let pk = s.total_momentum(p)[0] + shift as f64;
                    if k.abs() < 3.0 && pk <= 4.0 {
                        phi[p * s.fock_len() + n] = C64::new(1.0 + n as f64, p as f64);
                    }
                }
            }
            let psi = s.from_fiber_coords(&phi);
            let lhs = m.apply(&e.apply(&psi));
            let rhs = e.apply(&shifted.apply(&psi));
            assert!(diff_norm(&lhs, &rhs) < 1e-10 * linalg::norm(&psi));
        }
    }

    #[test]
    fn translated_annihilator_bound_on_headroom_states() {
        let s = space(1, 8, 2.5, 3);
        let f = profile(&s, 12);
        let cf = s.translated_annihilator_constant(&f);
        let a = s.gen_annihilate(&FormFactorField::translated(&s, "F", &f));
        let root = s.momentum_function(|k| (1.0 + k[0] * k[0]).sqrt());
        let fl = s.fock_len();
        for trial in 0..50 {
            let psi = s.random_headroom_state(2, "b6", trial, 1);
            let lhs = linalg::norm(&a.apply(&psi));
            let lp = root.apply(&psi);
            let weighted: Vec<C64> = lp
                .iter()
                .enumerate()
                .map(|(i, v)| v * (s.basis.total(i % fl) as f64).sqrt())
                .collect();
            assert!(lhs <= cf * linalg::norm(&weighted) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn field_bound_per_block() {
        let s = space(1, 4, 2.0, 4);
        let f = profile(&s, 2);
        let field = FormFactorField::translated(&s, "G", &f);
        let (phi, pi) = s.field_ops(&field);
        assert!(phi.matrix.hermiticity_defect() < 1e-12);
        assert!(pi.matrix.hermiticity_defect() < 1e-12);
        let inv_root: Vec<C64> = (0..s.dim())
            .map(|i| C64::new((s.basis.total(i % s.fock_len()) as f64 + 1.0).powf(-0.5), 0.0))
            .collect();
        let m = phi.matrix.matmul(&CsrMatrix::diagonal(&inv_root)).to_dense();
        assert!(linalg::dense_spectral_norm(&m) <= 2.0 * field.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn products_have_predicted_fill() {
        let s = space(1, 4, 2.0, 2);
        let a = s.gen_annihilate(&FormFactorField::translated(&s, "F", &profile(&s, 1)));
        let p = s.momentum_op(0);
        let prod = p.compose(&a);
        // each row of a(F) touches one site; p spreads it over every site
        for r in 0..prod.dim() {
            let cols: std::collections::BTreeSet<usize> = prod.matrix.row(r).map(|(c, _)| c % s.fock_len()).collect();
            let expected: std::collections::BTreeSet<usize> =
                a.matrix.row(r).map(|(c, _)| c % s.fock_len()).collect();
            assert!(cols.is_subset(&expected) || expected.is_empty());
        }
        assert!(a.structure_consistent(&s));
        assert_eq!(prod.structure, Structure::General);
    }
}
