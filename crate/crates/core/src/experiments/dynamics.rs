//! Propagator differences between cutoffs, with a constant derived from a
//! uniform form bound, plus group-law and norm checks.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::Result;
use crate::hamiltonians::FiberModel;
use crate::linalg;
use crate::model::ModelConfig;
use crate::qspace::{FiberOperator, QSpace};
use crate::spectral::Propagator;

use super::{best_form_constant, num, trial_profile, ExperimentReport, Record, RunOptions};

/// Relative form bound used for the rate constant.
pub const FORM_A: f64 = 0.5;
pub const COHERENT_TRIALS: usize = 3;
pub const RANDOM_TRIALS: usize = 3;

pub fn exp_dynamics(config: &ModelConfig, options: &RunOptions) -> Result<ExperimentReport> {
    let space = QSpace::from_config(config)?;
    let model = FiberModel::all_fibers(&space, config.k_ir);
    let lams = config.lambda_list.clone();
    let d: Vec<f64> = lams.iter().map(|&l| space.grid.scalar_d(l)).collect();
    let mut times: Vec<f64> = options.t_list.iter().map(|t| t.abs()).chain([0.0]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut report = ExperimentReport::new("dynamics", config, options);

    let h0 = model.h0();
    let ops: Vec<FiberOperator> = lams.par_iter().map(|&l| model.h_cutoff(l)).collect();
    let phis: Vec<FiberOperator> = lams.par_iter().map(|&l| model.phi_g(l)).collect();

    // With ±φ(G_Λ) ≤ aH_0 + b for every cutoff, energy conservation gives
    // ‖e^{-iH_Λ s}Ψ‖_0² ≤ M‖Ψ‖_0². The Duhamel pairing contributes 2 and the
    // field difference 2·|ΔD|^{1/2}, so C = 4M.
    let b = phis.par_iter().map(|p| best_form_constant(&h0, p, FORM_A)).reduce(|| 0.0, f64::max);
    let m = (1.0 + FORM_A + 2.0 * b) / (1.0 - FORM_A) + 1.0;
    let c_rate = 4.0 * m;
    report.set("form_a", FORM_A);
    report.set("form_b", b);
    report.set("rate_C", c_rate);

    let props: Vec<Propagator<'_, FiberOperator>> = ops.iter().map(Propagator::new).collect();
    let mut trials: Vec<Vec<C64>> = (0..COHERENT_TRIALS)
        .map(|t| {
            let f = trial_profile(&space, config.seed, "dynamics/coherent", t as u64, 0.25);
            let mut psi = model.coherent_trial(t % model.fibers.len(), &f);
            let n = linalg::norm(&psi);
            psi.iter_mut().for_each(|v| *v /= n);
            psi
        })
        .collect();
    trials.extend((0..RANDOM_TRIALS).map(|t| space.random_headroom_state(config.seed, "dynamics/random", t as u64, 2)));

    let per_trial: Vec<Result<(Vec<Record>, f64)>> = trials
        .par_iter()
        .enumerate()
        .map(|(k, psi)| {
            let mut records = Vec::new();
            let mut kappa = 0.0f64;
            let form_sq = model.form_norm(psi).powi(2);
            let norm = linalg::norm(psi);
            let evolved: Vec<Vec<Vec<C64>>> = props
                .iter()
                .map(|p| times.iter().map(|&t| p.apply(t, psi)).collect::<Result<_>>())
                .collect::<Result<_>>()?;
            for i in 0..lams.len() {
                for j in i + 1..lams.len() {
                    let scale = (d[i] - d[j]).abs().sqrt() * form_sq;
                    for (ti, &t) in times.iter().enumerate() {
                        let diff = linalg::norm(&linalg::sub(&evolved[i][ti], &evolved[j][ti])).powi(2);
                        if t > 0.0 && scale > 0.0 {
                            kappa = kappa.max(diff / (t * scale));
                        }
                        records.push(Record::at_most(
                            format!("rate/t={}/L1={}/L2={}/trial={k}", num(t), num(lams[i]), num(lams[j])),
                            diff,
                            c_rate * t * scale,
                            1e-12,
                        ));
                    }
                }
                for (ti, &t) in times.iter().enumerate() {
                    let drift = (linalg::norm(&evolved[i][ti]) - norm).abs();
                    records.push(Record::at_most(
                        format!("unitarity/L={}/t={}/trial={k}", num(lams[i]), num(t)),
                        drift,
                        1e-9,
                        0.0,
                    ));
                }
                for w in times.windows(2) {
                    let (s, t) = (w[0], w[1]);
                    let stepped = props[i].apply(s, &props[i].apply(t, psi)?)?;
                    let direct = props[i].apply(s + t, psi)?;
                    records.push(Record::at_most(
                        format!("group/L={}/s={}/t={}/trial={k}", num(lams[i]), num(s), num(t)),
                        linalg::norm(&linalg::sub(&stepped, &direct)),
                        1e-8,
                        0.0,
                    ));
                }
            }
            Ok((records, kappa))
        })
        .collect();
    let mut kappa_max = 0.0f64;
    for r in per_trial {
        let (records, kappa) = r?;
        report.extend(records);
        kappa_max = kappa_max.max(kappa);
    }
    report.set("fitted_kappa_max", kappa_max);
    report.note("rate bound: C·|t|·|D_Λ2 − D_Λ1|^{1/2}·‖Ψ‖_0² with C = 4((1+a+2b)/(1−a) + 1) from ±φ(G_Λ) ≤ aH_0 + b");
    Ok(report.finish())
}
