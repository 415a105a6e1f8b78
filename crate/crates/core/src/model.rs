//! Discretization of position and momentum space, the form factor, and the
//! scalar mode sums that enter the operator bounds.
//!
//! The electron lives on a periodic lattice of `L^d` sites on a torus of side
//! `ℓ`. Phonon modes are the dual lattice `(2π/ℓ)·ℤ^d` restricted to the
//! window `{-L/2+1, …, L/2}^d`, with the zero mode removed. Every continuum
//! integral `∫ … dk` is replaced by the Riemann sum `Σ_k w·…` with
//! `w = (2π/ℓ)^d`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative slack used when comparing `|k|` against a cutoff, so that modes
/// sitting exactly on a shell are classified consistently.
const SHELL_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormFactorSpec {
    /// `v(k) = |k|^{-γ}`.
    PowerLaw { gamma: f64 },
    /// `v(k) = |k|^{-(d-1)/2}`.
    Polaron,
    /// `v(k) = (1+k²)^{-β}`.
    SmoothPower { beta: f64 },
    /// Explicit samples, one per mode in grid order.
    Table { values: Vec<f64> },
}

impl FormFactorSpec {
    /// Exponent `ρ` with `|v(k)|² ~ |k|^{-ρ}` for large `|k|`.
    pub fn decay_exponent(&self, dimension: usize) -> Option<f64> {
        match self {
            FormFactorSpec::PowerLaw { gamma } => Some(2.0 * gamma),
            FormFactorSpec::Polaron => Some(dimension as f64 - 1.0),
            FormFactorSpec::SmoothPower { beta } => Some(4.0 * beta),
            FormFactorSpec::Table { .. } => None,
        }
    }

    fn eval(&self, k_abs: f64, dimension: usize) -> f64 {
        match self {
            FormFactorSpec::PowerLaw { gamma } => k_abs.powf(-gamma),
            FormFactorSpec::Polaron => k_abs.powf(-(dimension as f64 - 1.0) / 2.0),
            FormFactorSpec::SmoothPower { beta } => (1.0 + k_abs * k_abs).powf(-beta),
            FormFactorSpec::Table { .. } => unreachable!("table form factors are sampled directly"),
        }
    }

    /// `|v(r)|²` for a radial argument, without the coupling prefactor.
    fn radial_sq(&self, r: f64, dimension: usize) -> Option<f64> {
        match self {
            FormFactorSpec::Table { .. } => None,
            _ => {
                let v = self.eval(r, dimension);
                Some(v * v)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub dimension: usize,
    pub torus_length: f64,
    pub sites_per_dim: usize,
    pub nmax: usize,
    pub form_factor: FormFactorSpec,
    pub coupling: f64,
    #[serde(rename = "K")]
    pub k_ir: f64,
    pub lambda_list: Vec<f64>,
    pub seed: u64,
}

impl ModelConfig {
    /// Largest representable momentum `π·L/ℓ`.
    pub fn lambda_grid(&self) -> f64 {
        PI * self.sites_per_dim as f64 / self.torus_length
    }

    pub fn site_count(&self) -> usize {
        self.sites_per_dim.pow(self.dimension as u32)
    }

    pub fn lambda_ref(&self) -> f64 {
        *self.lambda_list.last().expect("validated config has cutoffs")
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {}", self.dimension)));
        }
        if !(self.torus_length > 0.0 && self.torus_length.is_finite()) {
            return Err(Error::Config("torus_length must be positive".into()));
        }
        if self.sites_per_dim == 0 || self.sites_per_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "sites_per_dim must be even and positive, got {}",
                self.sites_per_dim
            )));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::Config("coupling must be non-negative".into()));
        }
        if !(self.k_ir >= 0.0) {
            return Err(Error::Config("K must be non-negative".into()));
        }
        if self.lambda_list.is_empty() {
            return Err(Error::Config("lambda_list must not be empty".into()));
        }
        if self.lambda_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("lambda_list must be strictly ascending".into()));
        }
        if self.k_ir >= self.lambda_list[0] {
            return Err(Error::Config(format!(
                "K = {} must be below the smallest cutoff {}",
                self.k_ir, self.lambda_list[0]
            )));
        }
        match &self.form_factor {
            FormFactorSpec::PowerLaw { gamma } if !(*gamma > 0.0) => {
                return Err(Error::Config("power_law requires gamma > 0".into()))
            }
            FormFactorSpec::SmoothPower { beta } if !(*beta > 0.0) => {
                return Err(Error::Config("smooth_power requires beta > 0".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// One phonon mode `k = (2π/ℓ)·n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub index: [i64; 3],
    pub k: [f64; 3],
    pub abs: f64,
}

impl Mode {
    pub fn k2(&self) -> f64 {
        self.abs * self.abs
    }
}

#[derive(Clone, Debug)]
pub struct ModeGrid {
    pub dimension: usize,
    pub torus_length: f64,
    pub sites_per_dim: usize,
    pub modes: Vec<Mode>,
    /// Quadrature weight per mode, `(2π/ℓ)^d`.
    pub weight: f64,
    /// `coupling · v(k)` per mode.
    pub vsamples: Vec<f64>,
    /// Index of the mode representing `-k` (aliases pair with themselves).
    pub partner: Vec<usize>,
    pub masks: Vec<(f64, Vec<bool>)>,
    decay: Option<f64>,
    form_factor: FormFactorSpec,
    coupling: f64,
}

/// Wraps an integer momentum index into the window `{-L/2+1, …, L/2}`.
pub fn wrap_index(n: i64, sites: usize) -> i64 {
    let l = sites as i64;
    let mut m = n.rem_euclid(l);
    if m > l / 2 {
        m -= l;
    }
    m
}

/// All integer vectors of the dual window, in lexicographic order.
pub(crate) fn window_indices(dimension: usize, sites: usize) -> Vec<[i64; 3]> {
    let half = (sites / 2) as i64;
    let range: Vec<i64> = (-half + 1..=half).collect();
    let mut out = Vec::with_capacity(sites.pow(dimension as u32));
    let mut idx = [0usize; 3];
    loop {
        let mut n = [0i64; 3];
        for j in 0..dimension {
            n[j] = range[idx[j]];
        }
        out.push(n);
        let mut j = dimension;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < range.len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

pub fn build_grid(config: &ModelConfig) -> Result<ModeGrid> {
    config.validate()?;
    let max = config.lambda_grid();
    for &cutoff in &config.lambda_list {
        if cutoff > max * (1.0 + SHELL_EPS) {
            return Err(Error::CutoffNotRepresentable { cutoff, max });
        }
    }
    let d = config.dimension;
    let dk = 2.0 * PI / config.torus_length;
    let modes: Vec<Mode> = window_indices(d, config.sites_per_dim)
        .into_iter()
        .filter(|n| n.iter().any(|&c| c != 0))
        .map(|n| {
            let mut k = [0.0; 3];
            for j in 0..d {
                k[j] = dk * n[j] as f64;
            }
            let abs = k.iter().map(|c| c * c).sum::<f64>().sqrt();
            Mode { index: n, k, abs }
        })
        .collect();

    let lookup: std::collections::HashMap<[i64; 3], usize> =
        modes.iter().enumerate().map(|(i, m)| (m.index, i)).collect();
    let partner: Vec<usize> = modes
        .iter()
        .map(|m| {
            let mut neg = [0i64; 3];
            for j in 0..d {
                neg[j] = wrap_index(-m.index[j], config.sites_per_dim);
            }
            lookup[&neg]
        })
        .collect();

    let vsamples: Vec<f64> = match &config.form_factor {
        FormFactorSpec::Table { values } => {
            if values.len() != modes.len() {
                return Err(Error::Config(format!(
                    "form factor table has {} values, grid has {} modes",
                    values.len(),
                    modes.len()
                )));
            }
            for (i, &p) in partner.iter().enumerate() {
                if values[i] != values[p] {
                    return Err(Error::Config("form factor table is not even under k -> -k".into()));
                }
            }
            values.iter().map(|v| config.coupling * v).collect()
        }
        spec => {
            // Evaluate on the partner-symmetrised magnitude so evenness is exact.
            modes
                .iter()
                .map(|m| config.coupling * spec.eval(m.abs, d))
                .collect()
        }
    };

    let mut grid = ModeGrid {
        dimension: d,
        torus_length: config.torus_length,
        sites_per_dim: config.sites_per_dim,
        modes,
        weight: dk.powi(d as i32),
        vsamples,
        partner,
        masks: Vec::new(),
        decay: config.form_factor.decay_exponent(d),
        form_factor: config.form_factor.clone(),
        coupling: config.coupling,
    };
    grid.masks = config
        .lambda_list
        .iter()
        .map(|&l| (l, grid.mask(l)))
        .collect();
    Ok(grid)
}

fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!(),
    }
}

/// Verdict of the continuum regularity criterion `∫|v|²(1+k²)^{s-2}dk`.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityCriterion {
    pub s: f64,
    /// Lattice quadrature over the whole grid.
    pub grid_sum: f64,
    /// Continuum contribution of `|k| > Λ_grid` (infinite when divergent).
    pub tail_estimate: f64,
    /// Radial exponent of the integrand, `d-1-ρ+2(s-2)`.
    pub tail_exponent: f64,
    pub threshold: f64,
    pub divergent: bool,
}

impl ModeGrid {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambda_grid(&self) -> f64 {
        PI * self.sites_per_dim as f64 / self.torus_length
    }

    /// `χ_Λ(k) = [|k| ≤ Λ]`.
    pub fn mask(&self, cutoff: f64) -> Vec<bool> {
        self.modes.iter().map(|m| inside(m.abs, cutoff)).collect()
    }

    /// Mode indices with `lower < |k| ≤ upper`.
    pub fn annulus(&self, lower: f64, upper: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let a = self.modes[i].abs;
                !inside(a, lower) && inside(a, upper)
            })
            .collect()
    }

    pub fn v_sq(&self, i: usize) -> f64 {
        self.vsamples[i] * self.vsamples[i]
    }

    fn sum_where(&self, keep: impl Fn(&Mode) -> bool, f: impl Fn(usize) -> f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| keep(m))
            .map(|(i, _)| f(i))
            .sum::<f64>()
            * self.weight
            + 0.0 // empty sums are −0.0
    }

    /// `D_Λ = Σ_{|k|>Λ} w·|v(k)|²/k²`, the tail complementary to `χ_Λ`.
    pub fn scalar_d(&self, cutoff: f64) -> f64 {
        self.sum_where(|m| !inside(m.abs, cutoff), |i| self.v_sq(i) / self.modes[i].k2())
    }

    /// `C_{K,Λ} = Σ_{K<|k|≤Λ} w·|v|²((1+k²)^{-2} - 2(1+k²)^{-1})`.
    pub fn scalar_c(&self, k_ir: f64, cutoff: f64) -> Result<f64> {
        if k_ir > cutoff {
            return Err(Error::InvalidArgument(format!("K = {k_ir} exceeds Λ = {cutoff}")));
        }
        Ok(self.sum_where(
            |m| !inside(m.abs, k_ir) && inside(m.abs, cutoff),
            |i| {
                let t = 1.0 / (1.0 + self.modes[i].k2());
                self.v_sq(i) * (t * t - 2.0 * t)
            },
        ))
    }

    /// `‖B_Λ‖² = Σ_{K<|k|≤Λ} w·|v|²(1+k²)^{-2}`.
    pub fn b_norm_sq(&self, k_ir: f64, cutoff: f64) -> f64 {
        self.sum_where(
            |m| !inside(m.abs, k_ir) && inside(m.abs, cutoff),
            |i| self.v_sq(i) / (1.0 + self.modes[i].k2()).powi(2),
        )
    }

    /// `‖kB_Λ‖² = Σ_{K<|k|≤Λ} w·k²|v|²(1+k²)^{-2}`.
    pub fn kb_norm_sq(&self, k_ir: f64, cutoff: f64) -> f64 {
        self.sum_where(
            |m| !inside(m.abs, k_ir) && inside(m.abs, cutoff),
            |i| self.modes[i].k2() * self.v_sq(i) / (1.0 + self.modes[i].k2()).powi(2),
        )
    }

    /// `Σ_k w·|v|²/(1+k²)`, finite for every admissible form factor.
    pub fn v2_integral(&self) -> f64 {
        self.sum_where(|_| true, |i| self.v_sq(i) / (1.0 + self.modes[i].k2()))
    }

    /// Lattice analogue of `sup_q ∫_{|k|≥K} |v|²/(1+(q-k)²) dk`, with `q`
    /// ranging over the dual lattice refined by `refine` inside the window.
    pub fn v3_supremum(&self, k_ir: f64, refine: usize) -> f64 {
        let tail: Vec<usize> = (0..self.len()).filter(|&i| !inside(self.modes[i].abs, k_ir)).collect();
        if tail.is_empty() {
            return 0.0;
        }
        let refine = refine.max(1);
        let dq = 2.0 * PI / self.torus_length / refine as f64;
        let half = (self.sites_per_dim / 2 * refine) as i64;
        let span: Vec<i64> = (-half..=half).collect();
        let d = self.dimension;
        let mut best = 0.0f64;
        let mut idx = [0usize; 3];
        loop {
            let mut q = [0.0; 3];
            for j in 0..d {
                q[j] = dq * span[idx[j]] as f64;
            }
            let val: f64 = tail
                .iter()
                .map(|&i| {
                    let m = &self.modes[i];
                    let dist2: f64 = (0..d).map(|j| (q[j] - m.k[j]).powi(2)).sum();
                    self.v_sq(i) / (1.0 + dist2)
                })
                .sum::<f64>()
                * self.weight;
            best = best.max(val);
            let mut j = d;
            loop {
                if j == 0 {
                    return best;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < span.len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// Continuum radial tail `∫_{|k|>R} |v|²·|k|^{extra} dk` using the
    /// asymptotic power law of the form factor. Returns `None` for tabulated
    /// form factors and `Some(∞)` for divergent tails.
    pub fn radial_tail(&self, radius: f64, extra_power: f64) -> Option<f64> {
        let rho = self.decay?;
        let exponent = self.dimension as f64 - 1.0 - rho + extra_power;
        if exponent >= -1.0 {
            return Some(f64::INFINITY);
        }
        let c2 = self.coupling * self.coupling;
        let leading = self.form_factor.radial_sq(radius, self.dimension)? * radius.powf(rho);
        Some(c2 * leading * unit_sphere_area(self.dimension) * radius.powf(exponent + 1.0) / (-exponent - 1.0))
    }

    /// `D_K` with the lattice sum restricted to the ball `|k| ≤ Λ_grid` and
    /// the continuum tail beyond it added analytically.
    pub fn scalar_d_with_tail(&self, cutoff: f64) -> Option<f64> {
        let r = self.lambda_grid();
        let inner = self.sum_where(
            |m| !inside(m.abs, cutoff) && inside(m.abs, r),
            |i| self.v_sq(i) / self.modes[i].k2(),
        );
        Some(inner + self.radial_tail(r.max(cutoff), -2.0)?)
    }

    pub fn regularity_criterion(&self, s: f64) -> Result<RegularityCriterion> {
        if !(1.0..=2.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("s = {s} outside [1, 2]")));
        }
        let grid_sum = self.sum_where(|_| true, |i| self.v_sq(i) * (1.0 + self.modes[i].k2()).powf(s - 2.0));
        let d = self.dimension as f64;
        let (tail_exponent, threshold) = match self.decay {
            Some(rho) => (d - 1.0 - rho + 2.0 * (s - 2.0), (rho - d + 4.0) / 2.0),
            None => (f64::NAN, f64::NAN),
        };
        let tail_estimate = self.radial_tail(self.lambda_grid(), 2.0 * (s - 2.0)).unwrap_or(f64::NAN);
        Ok(RegularityCriterion {
            s,
            grid_sum,
            tail_estimate,
            tail_exponent,
            threshold,
            divergent: tail_exponent >= -1.0,
        })
    }
}

fn inside(abs: f64, cutoff: f64) -> bool {
    abs <= cutoff * (1.0 + SHELL_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg(d: usize, l: usize, ell: f64, ff: FormFactorSpec, lambdas: Vec<f64>) -> ModelConfig {
        ModelConfig {
            dimension: d,
            torus_length: ell,
            sites_per_dim: l,
            nmax: 2,
            form_factor: ff,
            coupling: 1.0,
            k_ir: 0.5,
            lambda_list: lambdas,
            seed: 7,
        }
    }

    #[test]
    fn one_dimensional_window_drops_zero_and_negative_alias() {
        let g = build_grid(&cfg(1, 4, 2.0 * PI, FormFactorSpec::Polaron, vec![1.0])).unwrap();
        let ks: Vec<f64> = g.modes.iter().map(|m| m.k[0]).collect();
        assert_eq!(ks, vec![-1.0, 1.0, 2.0]);
        assert_eq!(g.weight, 1.0);
        // the alias pairs with itself
        assert_eq!(g.partner, vec![1, 0, 2]);
    }

    #[test]
    fn mask_on_integer_grid() {
        let g = build_grid(&cfg(1, 8, 2.0 * PI, FormFactorSpec::Polaron, vec![2.5])).unwrap();
        let selected: Vec<f64> = g
            .modes
            .iter()
            .zip(&g.masks[0].1)
            .filter(|(_, &m)| m)
            .map(|(m, _)| m.k[0])
            .collect();
        assert_eq!(selected, vec![-2.0, -1.0, 1.0, 2.0]);
    }

    #[test]
    fn two_dimensional_count_matches_enumeration() {
        let g = build_grid(&cfg(2, 4, 2.0 * PI, FormFactorSpec::Polaron, vec![1.0])).unwrap();
        // brute force: all pairs of residues mod 4 except (0,0)
        let mut count = 0;
        for a in 0..4 {
            for b in 0..4 {
                if (a, b) != (0, 0) {
                    count += 1;
                }
            }
        }
        assert_eq!(g.len(), count);
        assert_eq!(count, 15);
    }

    #[test]
    fn rejects_unrepresentable_cutoff() {
        let err = build_grid(&cfg(1, 4, 2.0 * PI, FormFactorSpec::Polaron, vec![3.0])).unwrap_err();
        assert!(matches!(err, Error::CutoffNotRepresentable { .. }));
        assert!(err.to_string().contains("cutoff not representable"));
    }

    #[test]
    fn validation_errors() {
        let mut c = cfg(1, 5, 2.0 * PI, FormFactorSpec::Polaron, vec![1.0]);
        assert!(c.validate().is_err());
        c.sites_per_dim = 4;
        c.lambda_list = vec![1.5, 1.0];
        assert!(c.validate().is_err());
        c.lambda_list = vec![0.4];
        assert!(c.validate().is_err());
    }

    #[test]
    fn evenness_of_samples() {
        let g = build_grid(&cfg(2, 6, 3.0, FormFactorSpec::PowerLaw { gamma: 0.7 }, vec![1.0])).unwrap();
        for (i, &p) in g.partner.iter().enumerate() {
            assert_eq!(g.v_sq(i), g.v_sq(p));
        }
    }

    #[test]
    fn d_vanishes_beyond_grid_and_is_flat_between_shells() {
        let g = build_grid(&cfg(1, 8, 2.0 * PI, FormFactorSpec::SmoothPower { beta: 0.125 }, vec![4.0])).unwrap();
        assert_eq!(g.scalar_d(4.5), 0.0);
        assert_eq!(g.scalar_d(2.1), g.scalar_d(2.9));
        assert!(g.scalar_d(1.5) > g.scalar_d(2.5));
    }

    #[test]
    fn c_is_zero_on_empty_annulus_and_quadratic_in_coupling() {
        let mut c = cfg(1, 8, 2.0 * PI, FormFactorSpec::SmoothPower { beta: 0.125 }, vec![3.5]);
        let g = build_grid(&c).unwrap();
        assert_eq!(g.scalar_c(2.0, 2.0).unwrap(), 0.0);
        assert!(g.scalar_c(3.0, 2.0).is_err());
        let base = g.scalar_c(0.5, 3.5).unwrap();
        assert!(base < 0.0);
        c.coupling = 2.0;
        let g2 = build_grid(&c).unwrap();
        approx::assert_relative_eq!(g2.scalar_c(0.5, 3.5).unwrap(), 4.0 * base, max_relative = 1e-14);
    }

    #[test]
    fn v3_supremum_monotone_and_empty() {
        let g = build_grid(&cfg(2, 8, 2.0 * PI, FormFactorSpec::Polaron, vec![3.0])).unwrap();
        let vals: Vec<f64> = [0.5, 1.5, 2.5, 3.5].iter().map(|&k| g.v3_supremum(k, 2)).collect();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let g1 = build_grid(&cfg(1, 8, 2.0 * PI, FormFactorSpec::Polaron, vec![3.0])).unwrap();
        assert_eq!(g1.v3_supremum(4.5, 2), 0.0);
    }

    #[test]
    fn regularity_thresholds() {
        let g2 = build_grid(&cfg(2, 8, 2.0 * PI, FormFactorSpec::Polaron, vec![3.0])).unwrap();
        for (s, div) in [(1.0, false), (1.25, false), (1.5, true), (1.75, true)] {
            assert_eq!(g2.regularity_criterion(s).unwrap().divergent, div, "d=2 s={s}");
        }
        let g3 = build_grid(&cfg(3, 4, 2.0 * PI, FormFactorSpec::Polaron, vec![1.5])).unwrap();
        assert_eq!(g3.regularity_criterion(1.5).unwrap().threshold, 1.5);
        let g1 = build_grid(&cfg(1, 8, 2.0 * PI, FormFactorSpec::SmoothPower { beta: 0.125 }, vec![3.0])).unwrap();
        let r = g1.regularity_criterion(1.5).unwrap();
        assert_eq!(r.threshold, 1.75);
        assert!(!r.divergent && r.tail_estimate.is_finite());
        assert!(g1.regularity_criterion(1.75).unwrap().divergent);
        assert!(g1.regularity_criterion(2.5).is_err());
    }
}
