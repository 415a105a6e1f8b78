//! Cutoff Hamiltonians, the Gross transform and the dressed Hamiltonian.
//!
//! Everything is assembled twice: on total-momentum fibers, where each
//! translation-covariant operator is a Fock-space matrix plus the diagonal
//! electron momentum `P − Q(n)`, and in the position basis as [`QOperator`]s.
//! Experiments use the fiber form; the position form is the reference the
//! fiber form is tested against.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, ModeFunction};
use crate::linalg;
use crate::qspace::{FiberOperator, FormFactorField, QOperator, QSpace, Structure};
use crate::sparse::CsrMatrix;

const SHELL: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `G_Λ` on the active modes: `√w·v(k)·χ_Λ(k)`.
pub fn coupling_profile(space: &QSpace, cutoff: f64) -> ModeFunction {
    let g = &space.grid;
    ModeFunction::new(
        space
            .active
            .iter()
            .map(|&i| {
                if g.modes[i].abs <= cutoff * (1.0 + SHELL) {
                    c(g.weight.sqrt() * g.vsamples[i])
                } else {
                    c(0.0)
                }
            })
            .collect(),
    )
}

/// `B_Λ = −(1+k²)^{-1} G_Λ (1 − χ_K)` with its momentum moments.
#[derive(Clone, Debug)]
pub struct BField {
    pub k_ir: f64,
    pub cutoff: f64,
    pub b: ModeFunction,
    /// Components `k_j B`.
    pub kb: Vec<ModeFunction>,
    /// `k² B`.
    pub k2b: ModeFunction,
}

pub fn build_b_field(space: &QSpace, k_ir: f64, cutoff: f64) -> Result<BField> {
    if k_ir > cutoff {
        return Err(Error::InvalidArgument(format!("K = {k_ir} exceeds Λ = {cutoff}")));
    }
    let g = coupling_profile(space, cutoff);
    let modes: Vec<_> = (0..space.active_count()).map(|j| *space.active_mode(j)).collect();
    let b = ModeFunction::new(
        modes
            .iter()
            .zip(&g.amplitudes)
            .map(|(m, gk)| if m.abs <= k_ir * (1.0 + SHELL) { c(0.0) } else { -gk / (1.0 + m.k2()) })
            .collect(),
    );
    let kb = (0..space.dimension())
        .map(|j| ModeFunction::new(modes.iter().zip(&b.amplitudes).map(|(m, bk)| bk * m.k[j]).collect()))
        .collect();
    let k2b = ModeFunction::new(modes.iter().zip(&b.amplitudes).map(|(m, bk)| bk * m.k2()).collect());
    Ok(BField { k_ir, cutoff, b, kb, k2b })
}

impl BField {
    /// `max_k |(1+k²)B − (G_K − G_Λ)|`.
    pub fn identity_defect(&self, space: &QSpace) -> f64 {
        let gk = coupling_profile(space, self.k_ir);
        let gl = coupling_profile(space, self.cutoff);
        (0..space.active_count())
            .map(|j| {
                let lhs = self.b.amplitudes[j] * (1.0 + space.active_mode(j).k2());
                (lhs - (gk.amplitudes[j] - gl.amplitudes[j])).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max_k |k²B + G_Λ − (G_K − B)|`.
    pub fn core_identity_defect(&self, space: &QSpace) -> f64 {
        let gk = coupling_profile(space, self.k_ir);
        let gl = coupling_profile(space, self.cutoff);
        (0..space.active_count())
            .map(|j| {
                let lhs = self.k2b.amplitudes[j] + gl.amplitudes[j];
                let rhs = gk.amplitudes[j] - self.b.amplitudes[j];
                (lhs - rhs).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn field(&self, space: &QSpace) -> FormFactorField {
        FormFactorField::translated(space, "B", &self.b)
    }

    pub fn kb_fields(&self, space: &QSpace) -> Vec<FormFactorField> {
        self.kb.iter().map(|f| FormFactorField::translated(space, "kB", f)).collect()
    }

    pub fn k2b_field(&self, space: &QSpace) -> FormFactorField {
        FormFactorField::translated(space, "k2B", &self.k2b)
    }

    pub fn kb_norm_sq(&self) -> f64 {
        self.kb.iter().map(|f| f.norm_sq()).sum()
    }
}

/// Scalars attached to one cutoff.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffConstants {
    pub cutoff: f64,
    pub d_lambda: f64,
    pub c_k_lambda: f64,
    pub kb_norm: f64,
    pub b_sup_norm: f64,
}

/// Fiber-level assembly for a space, an infrared cutoff `K` and a list of
/// total-momentum fibers.
#[derive(Clone, Debug)]
pub struct FiberModel<'a> {
    pub space: &'a QSpace,
    pub k_ir: f64,
    pub fibers: Vec<usize>,
}

impl<'a> FiberModel<'a> {
    pub fn new(space: &'a QSpace, k_ir: f64, fibers: Vec<usize>) -> Self {
        FiberModel { space, k_ir, fibers }
    }

    pub fn all_fibers(space: &'a QSpace, k_ir: f64) -> Self {
        FiberModel::new(space, k_ir, space.all_fibers())
    }

    fn repeat(&self, block: &DMatrix<C64>) -> FiberOperator {
        self.space.fiber_repeat(block, &self.fibers)
    }

    pub fn h0(&self) -> FiberOperator {
        self.space.fiber_free_hamiltonian(&self.fibers)
    }

    /// Diagonal of `H_0 + 1` per fiber, the weight of `‖·‖_0`.
    pub fn form_weights(&self) -> Vec<f64> {
        self.fibers
            .iter()
            .flat_map(|&p| self.space.free_diagonal(p).into_iter().map(|v| v + 1.0))
            .collect()
    }

    /// `‖Ψ‖_0 = ‖(H_0+1)^{1/2}Ψ‖` in fiber coordinates.
    pub fn form_norm(&self, psi: &[C64]) -> f64 {
        psi.iter()
            .zip(self.form_weights())
            .map(|(a, w)| a.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn momentum(&self, axis: usize) -> FiberOperator {
        self.space.fiber_momentum_function(|k| k[axis], &self.fibers)
    }

    pub fn phi_g(&self, cutoff: f64) -> FiberOperator {
        self.repeat(&fock::field_phi(&coupling_profile(self.space, cutoff), &self.space.basis).to_dense())
    }

    /// `H_Λ = H_0 + φ(G_Λ)`.
    pub fn h_cutoff(&self, cutoff: f64) -> FiberOperator {
        self.h0().add(&self.phi_g(cutoff))
    }

    pub fn b_field(&self, cutoff: f64) -> Result<BField> {
        build_b_field(self.space, self.k_ir, cutoff)
    }

    /// `U_Λ = e^{iπ(B_Λ)}`; the same Fock matrix on every fiber.
    pub fn gross(&self, cutoff: f64) -> Result<FiberOperator> {
        let bf = self.b_field(cutoff)?;
        Ok(self.repeat(&fock::weyl_matrix(&bf.b, &self.space.basis)))
    }

    /// `V_{K,Λ} = −2a*(kB)·p − 2p·a(kB) + φ(kB)² + C_{K,Λ}`.
    pub fn v_dressed(&self, cutoff: f64) -> Result<FiberOperator> {
        let bf = self.b_field(cutoff)?;
        let basis = &self.space.basis;
        let constant = self.space.grid.scalar_c(self.k_ir, cutoff)?;
        let d = self.space.dimension();
        let ann: Vec<DMatrix<C64>> = bf.kb.iter().map(|f| fock::annihilate(f, basis).to_dense()).collect();
        let mut fixed = DMatrix::<C64>::identity(basis.len(), basis.len()) * c(constant);
        for j in 0..d {
            let phi = fock::field_phi(&bf.kb[j], basis).to_dense();
            fixed += &phi * &phi;
        }
        let blocks = self
            .fibers
            .par_iter()
            .map(|&p| {
                let mut m = fixed.clone();
                for (j, a) in ann.iter().enumerate() {
                    let mom: Vec<f64> = (0..basis.len()).map(|n| self.space.electron_momentum(p, n)[j]).collect();
                    let pa = scale_rows(a, &mom);
                    m -= (&pa + pa.adjoint()) * c(2.0);
                }
                m
            })
            .collect();
        Ok(FiberOperator::new(self.fibers.clone(), blocks))
    }

    /// `H'_{K,Λ} = H_K + V_{K,Λ}`.
    pub fn h_dressed(&self, cutoff: f64) -> Result<FiberOperator> {
        Ok(self.h_cutoff(self.k_ir).add(&self.v_dressed(cutoff)?))
    }

    /// `U_Λ^† H'_{K,Λ} U_Λ`.
    pub fn undressed(&self, cutoff: f64) -> Result<FiberOperator> {
        let u = self.gross(cutoff)?;
        Ok(u.adjoint().compose(&self.h_dressed(cutoff)?).compose(&u))
    }

    /// `Σ_j p_j a(k_j B)`.
    pub fn dot_p_annihilate(&self, cutoff: f64) -> Result<FiberOperator> {
        let bf = self.b_field(cutoff)?;
        let basis = &self.space.basis;
        let ann: Vec<DMatrix<C64>> = bf.kb.iter().map(|f| fock::annihilate(f, basis).to_dense()).collect();
        let blocks = self
            .fibers
            .iter()
            .map(|&p| {
                let mut m = DMatrix::zeros(basis.len(), basis.len());
                for (j, a) in ann.iter().enumerate() {
                    let mom: Vec<f64> = (0..basis.len()).map(|n| self.space.electron_momentum(p, n)[j]).collect();
                    m += scale_rows(a, &mom);
                }
                m
            })
            .collect();
        Ok(FiberOperator::new(self.fibers.clone(), blocks))
    }

    pub fn constants(&self, cutoff: f64) -> Result<CutoffConstants> {
        let grid = &self.space.grid;
        let bf = self.b_field(cutoff)?;
        Ok(CutoffConstants {
            cutoff,
            d_lambda: grid.scalar_d(cutoff),
            c_k_lambda: grid.scalar_c(self.k_ir, cutoff)?,
            kb_norm: grid.kb_norm_sq(self.k_ir, cutoff).sqrt(),
            b_sup_norm: bf.b.norm(),
        })
    }

    /// Coherent trial `|P⟩ ⊗ e^{−iπ(f)}Ω` placed on fiber slot `slot`.
    pub fn coherent_trial(&self, slot: usize, f: &ModeFunction) -> Vec<C64> {
        let fl = self.space.fock_len();
        let mut psi = vec![c(0.0); fl * self.fibers.len()];
        let coh = fock::coherent(f, &self.space.basis);
        psi[slot * fl..(slot + 1) * fl].copy_from_slice(&coh.state);
        psi
    }

    /// Weight of a fiber vector on Fock states within `margin` of `nmax`.
    pub fn edge_weight(&self, psi: &[C64], margin: usize) -> f64 {
        let fl = self.space.fock_len();
        let nmax = self.space.basis.nmax();
        psi.iter()
            .enumerate()
            .filter(|(i, _)| self.space.basis.total(i % fl) + margin > nmax)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            / linalg::norm(psi).powi(2)
    }
}

/// `diag(w) · A`.
fn scale_rows(a: &DMatrix<C64>, w: &[f64]) -> DMatrix<C64> {
    let mut out = a.clone();
    for (r, &s) in w.iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|v| *v *= s);
    }
    out
}

/// All operators of one sweep, in fiber form.
#[derive(Clone, Debug)]
pub struct HamiltonianSet {
    pub k_ir: f64,
    pub fibers: Vec<usize>,
    pub h0: FiberOperator,
    /// Entries sorted by cutoff; the same order for every list.
    pub h_lambda: Vec<(f64, FiberOperator)>,
    pub gross: Vec<(f64, FiberOperator)>,
    pub v_dressed: Vec<(f64, FiberOperator)>,
    pub h_dressed: Vec<(f64, FiberOperator)>,
    pub constants: Vec<CutoffConstants>,
}

impl HamiltonianSet {
    pub fn build(model: &FiberModel<'_>, cutoffs: &[f64]) -> Result<Self> {
        let mut sorted = cutoffs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut set = HamiltonianSet {
            k_ir: model.k_ir,
            fibers: model.fibers.clone(),
            h0: model.h0(),
            h_lambda: Vec::new(),
            gross: Vec::new(),
            v_dressed: Vec::new(),
            h_dressed: Vec::new(),
            constants: Vec::new(),
        };
        for &l in &sorted {
            set.h_lambda.push((l, model.h_cutoff(l)));
            set.gross.push((l, model.gross(l)?));
            let v = model.v_dressed(l)?;
            set.h_dressed.push((l, model.h_cutoff(model.k_ir).add(&v)));
            set.v_dressed.push((l, v));
            set.constants.push(model.constants(l)?);
        }
        Ok(set)
    }

    /// Worst Hermiticity or unitarity defect over every stored operator.
    pub fn structure_defect(&self) -> f64 {
        let herm = self
            .h_lambda
            .iter()
            .chain(&self.v_dressed)
            .chain(&self.h_dressed)
            .map(|(_, op)| op.hermiticity_defect())
            .fold(self.h0.hermiticity_defect(), f64::max);
        self.gross.iter().map(|(_, u)| u.unitarity_defect()).fold(herm, f64::max)
    }
}

/// Residuals of the three conjugation identities and of the full dressing
/// identity, maximised over trial vectors (fiber coordinates).
#[derive(Clone, Debug, Serialize)]
pub struct DressingResidual {
    pub momentum: f64,
    pub number: f64,
    pub field: f64,
    pub total: f64,
    /// Trials with more than 1e-6 of their weight within two quanta of `nmax`.
    pub flagged: usize,
}

pub fn dressing_identity_residual(model: &FiberModel<'_>, cutoff: f64, trials: &[Vec<C64>]) -> Result<DressingResidual> {
    let space = model.space;
    let bf = model.b_field(cutoff)?;
    let basis = &space.basis;
    let u = model.gross(cutoff)?;
    let ud = u.adjoint();
    let conj = |a: &FiberOperator, psi: &[C64]| u.apply(&a.apply(&ud.apply(psi)));
    let fl = space.fock_len();
    let number = model.space.fiber_momentum_function(|_| 0.0, &model.fibers).add(&FiberOperator::new(
        model.fibers.clone(),
        vec![fock::number(basis).to_dense(); model.fibers.len()],
    ));
    let phi_b = model.repeat(&fock::field_phi(&bf.b, basis).to_dense());
    let g = coupling_profile(space, cutoff);
    let phi_g = model.phi_g(cutoff);
    let shift_g = 2.0 * bf.b.inner(&g).re;
    let h_cut = model.h_cutoff(cutoff);
    let h_dressed = model.h_dressed(cutoff)?;

    let rel = |a: &[C64], b: &[C64], psi: &[C64]| linalg::norm(&linalg::sub(a, b)) / linalg::norm(psi);
    let mut out = DressingResidual { momentum: 0.0, number: 0.0, field: 0.0, total: 0.0, flagged: 0 };
    for psi in trials {
        assert_eq!(psi.len(), fl * model.fibers.len());
        if model.edge_weight(psi, 2) > 1e-6 {
            out.flagged += 1;
        }
        for j in 0..space.dimension() {
            let p = model.momentum(j);
            let phi_kb = model.repeat(&fock::field_phi(&bf.kb[j], basis).to_dense());
            let rhs = linalg::sub(&p.apply(psi), &phi_kb.apply(psi));
            out.momentum = out.momentum.max(rel(&conj(&p, psi), &rhs, psi));
        }
        let rhs_n = linalg::add(
            &linalg::add(&number.apply(psi), &phi_b.apply(psi)),
            &linalg::scaled(psi, c(bf.b.norm_sq())),
        );
        out.number = out.number.max(rel(&conj(&number, psi), &rhs_n, psi));
        let rhs_g = linalg::add(&phi_g.apply(psi), &linalg::scaled(psi, c(shift_g)));
        out.field = out.field.max(rel(&conj(&phi_g, psi), &rhs_g, psi));
        out.total = out.total.max(rel(&conj(&h_cut, psi), &h_dressed.apply(psi), psi));
    }
    Ok(out)
}

/// One total-momentum fiber with sparse Fock operators. Gross transforms are
/// applied by Krylov exponentials, so large truncations never go dense.
#[derive(Clone, Debug)]
pub struct SparseFiber<'a> {
    pub space: &'a QSpace,
    pub k_ir: f64,
    pub fiber: usize,
}

impl<'a> SparseFiber<'a> {
    pub fn new(space: &'a QSpace, k_ir: f64, fiber: usize) -> Self {
        SparseFiber { space, k_ir, fiber }
    }

    pub fn len(&self) -> usize {
        self.space.fock_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Component `axis` of `P − Q(n)`.
    pub fn momentum(&self, axis: usize) -> Vec<f64> {
        (0..self.len()).map(|n| self.space.electron_momentum(self.fiber, n)[axis]).collect()
    }

    fn diag(values: &[f64]) -> CsrMatrix {
        CsrMatrix::diagonal(&values.iter().map(|&v| c(v)).collect::<Vec<_>>())
    }

    pub fn h0(&self) -> CsrMatrix {
        Self::diag(&self.space.free_diagonal(self.fiber))
    }

    pub fn number(&self) -> CsrMatrix {
        fock::number(&self.space.basis).matrix
    }

    pub fn phi(&self, f: &ModeFunction) -> CsrMatrix {
        fock::field_phi(f, &self.space.basis).matrix
    }

    pub fn h_cutoff(&self, cutoff: f64) -> CsrMatrix {
        &self.h0() + &self.phi(&coupling_profile(self.space, cutoff))
    }

    pub fn b_field(&self, cutoff: f64) -> Result<BField> {
        build_b_field(self.space, self.k_ir, cutoff)
    }

    pub fn v_dressed(&self, cutoff: f64) -> Result<CsrMatrix> {
        let bf = self.b_field(cutoff)?;
        let basis = &self.space.basis;
        let mut acc = CsrMatrix::identity(self.len()).scale_re(self.space.grid.scalar_c(self.k_ir, cutoff)?);
        for (j, kb) in bf.kb.iter().enumerate() {
            let pa = Self::diag(&self.momentum(j)).matmul(&fock::annihilate(kb, basis).matrix);
            acc = acc.add_scaled(&pa, c(-2.0)).add_scaled(&pa.adjoint(), c(-2.0));
            let phi = self.phi(kb);
            acc = &acc + &phi.matmul(&phi);
        }
        Ok(acc)
    }

    pub fn h_dressed(&self, cutoff: f64) -> Result<CsrMatrix> {
        Ok(&self.h_cutoff(self.k_ir) + &self.v_dressed(cutoff)?)
    }

    /// `U_Λ ψ`, or `U_Λ^† ψ` when `inverse` is set.
    pub fn gross_apply(&self, cutoff: f64, psi: &[C64], inverse: bool) -> Result<Vec<C64>> {
        let b = self.b_field(cutoff)?.b;
        let b = if inverse { b.scale(c(-1.0)) } else { b };
        Ok(fock::weyl_apply(&b, &self.space.basis, psi))
    }
}

/// [`dressing_identity_residual`] on a single sparse fiber.
pub fn sparse_dressing_residual(fiber: &SparseFiber<'_>, cutoff: f64, trials: &[Vec<C64>]) -> Result<DressingResidual> {
    let space = fiber.space;
    let bf = fiber.b_field(cutoff)?;
    let conj = |a: &CsrMatrix, psi: &[C64]| -> Result<Vec<C64>> {
        let inner = fiber.gross_apply(cutoff, psi, true)?;
        fiber.gross_apply(cutoff, &a.apply(&inner), false)
    };
    let number = fiber.number();
    let phi_b = fiber.phi(&bf.b);
    let g = coupling_profile(space, cutoff);
    let phi_g = fiber.phi(&g);
    let shift_g = 2.0 * bf.b.inner(&g).re;
    let h_cut = fiber.h_cutoff(cutoff);
    let h_dressed = fiber.h_dressed(cutoff)?;
    let nmax = space.basis.nmax();

    let rel = |a: &[C64], b: &[C64], psi: &[C64]| linalg::norm(&linalg::sub(a, b)) / linalg::norm(psi);
    let mut out = DressingResidual { momentum: 0.0, number: 0.0, field: 0.0, total: 0.0, flagged: 0 };
    for psi in trials {
        assert_eq!(psi.len(), fiber.len());
        let edge: f64 = psi
            .iter()
            .enumerate()
            .filter(|(i, _)| space.basis.total(*i) + 2 > nmax)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if edge > 1e-6 * linalg::norm(psi).powi(2) {
            out.flagged += 1;
        }
        for j in 0..space.dimension() {
            let p = SparseFiber::diag(&fiber.momentum(j));
            let rhs = linalg::sub(&p.apply(psi), &fiber.phi(&bf.kb[j]).apply(psi));
            out.momentum = out.momentum.max(rel(&conj(&p, psi)?, &rhs, psi));
        }
        let rhs_n = linalg::add(&linalg::add(&number.apply(psi), &phi_b.apply(psi)), &linalg::scaled(psi, c(bf.b.norm_sq())));
        out.number = out.number.max(rel(&conj(&number, psi)?, &rhs_n, psi));
        let rhs_g = linalg::add(&phi_g.apply(psi), &linalg::scaled(psi, c(shift_g)));
        out.field = out.field.max(rel(&conj(&phi_g, psi)?, &rhs_g, psi));
        out.total = out.total.max(rel(&conj(&h_cut, psi)?, &h_dressed.apply(psi), psi));
    }
    Ok(out)
}

// ----- position-basis assembly -----

pub fn undressed_free(space: &QSpace) -> QOperator {
    space.free_hamiltonian()
}

/// `H_Λ = H_0 + φ(G_Λ)` in the position basis.
pub fn cutoff_hamiltonian(space: &QSpace, cutoff: f64) -> QOperator {
    let g = FormFactorField::translated(space, "G", &coupling_profile(space, cutoff));
    space.free_hamiltonian().add(&space.field_ops(&g).0)
}

/// Block at `x` is `e^{iπ(B_{Λ,x})}`.
pub fn gross_transform(space: &QSpace, k_ir: f64, cutoff: f64) -> Result<QOperator> {
    let field = build_b_field(space, k_ir, cutoff)?.field(space);
    Ok(space.fock_blocks(
        |x| fock::FockOperator::new(CsrMatrix::from_dense(&fock::weyl_matrix(&field.at(x), &space.basis), 0.0), false),
        Structure::XBlockDiagonal,
    ))
}

pub fn dressed_interaction(space: &QSpace, k_ir: f64, cutoff: f64) -> Result<QOperator> {
    let bf = build_b_field(space, k_ir, cutoff)?;
    let comps = bf.kb_fields(space);
    let dim = space.dim();
    let constant = space.grid.scalar_c(k_ir, cutoff)?;
    let mut acc = CsrMatrix::identity(dim).scale_re(constant);
    let pa = space.dot_p_annihilate(&comps).matrix;
    acc = acc.add_scaled(&pa, c(-2.0));
    acc = acc.add_scaled(&pa.adjoint(), c(-2.0));
    for comp in &comps {
        let phi = space.field_ops(comp).0.matrix;
        acc = &acc + &phi.matmul(&phi);
    }
    Ok(QOperator::new(acc, Structure::General))
}

pub fn dressed_hamiltonian(space: &QSpace, k_ir: f64, cutoff: f64) -> Result<QOperator> {
    Ok(cutoff_hamiltonian(space, k_ir).add(&dressed_interaction(space, k_ir, cutoff)?))
}

/// `U_{Λref}^† H'_{K,Λref} U_{Λref}`.
pub fn undressed_h(space: &QSpace, k_ir: f64, lambda_ref: f64) -> Result<QOperator> {
    let u = gross_transform(space, k_ir, lambda_ref)?;
    let h = dressed_hamiltonian(space, k_ir, lambda_ref)?;
    Ok(u.adjoint().compose(&h).compose(&u))
}

/// Smallest eigenvalue over the blocks of a Hermitian fiber operator.
pub fn fiber_min_eigenvalue(op: &FiberOperator) -> f64 {
    op.blocks
        .par_iter()
        .map(|b| linalg::HermitianEigen::new(b.clone()).min())
        .reduce(|| f64::INFINITY, f64::min)
}

/// `max_P ‖A_P‖` for a fiber operator.
pub fn fiber_norm(op: &FiberOperator) -> f64 {
    op.blocks
        .par_iter()
        .map(linalg::dense_spectral_norm)
        .reduce(|| 0.0, f64::max)
}

/// `A (H_0 + λ)^{-1}` blockwise.
pub fn right_resolvent_weight(op: &FiberOperator, model: &FiberModel<'_>, lambda: f64) -> FiberOperator {
    let blocks = op
        .blocks
        .iter()
        .zip(&model.fibers)
        .map(|(b, &p)| {
            let w: Vec<C64> = model.space.free_diagonal(p).into_iter().map(|v| c(1.0 / (v + lambda))).collect();
            b * DMatrix::from_diagonal(&DVector::from_vec(w))
        })
        .collect();
    FiberOperator::new(op.fibers.clone(), blocks)
}
