//! Resolvent differences against the reference cutoff, for the cutoff and
//! dressed families, and the Gross-transform ingredient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonians::{fiber_min_eigenvalue, FiberModel};
use crate::model::ModelConfig;
use crate::qspace::{FiberOperator, QSpace};
use crate::spectral::{op_norm, resolvent_blocks, ResolventRecord};

use super::{form_weight_inverse, num, ExperimentReport, Record, RunOptions};

pub fn exp_resolvent_rate(config: &ModelConfig, options: &RunOptions) -> Result<ExperimentReport> {
    let z = options.z();
    let space = QSpace::from_config(config)?;
    let model = FiberModel::all_fibers(&space, config.k_ir);
    let lams = config.lambda_list.clone();
    let n = lams.len();
    let d: Vec<f64> = lams.iter().map(|&l| space.grid.scalar_d(l)).collect();
    let mut report = ExperimentReport::new("resolvent_rate", config, options);
    let mut rows = Vec::new();

    let undressed: Vec<FiberOperator> = lams.par_iter().map(|&l| model.h_cutoff(l)).collect();
    let dressed: Vec<FiberOperator> = lams.par_iter().map(|&l| model.h_dressed(l)).collect::<Result<_>>()?;
    for (family, ops) in [("undressed", &undressed), ("dressed", &dressed)] {
        if z.im == 0.0 {
            let floor = ops.iter().map(fiber_min_eigenvalue).fold(f64::INFINITY, f64::min);
            if z.re >= floor {
                return Err(Error::InvalidArgument(format!(
                    "real shift {} not below the {family} spectrum ({floor})",
                    z.re
                )));
            }
        }
        let resolvents: Vec<FiberOperator> = ops.par_iter().map(|h| resolvent_blocks(h, z)).collect::<Result<_>>()?;
        let reference = &resolvents[n - 1];
        let diffs: Vec<f64> = resolvents
            .par_iter()
            .map(|r| op_norm(&r.sub(reference), 0))
            .collect::<Result<_>>()?;
        let fitted = if d[0] > 0.0 { diffs[0] / d[0].sqrt() } else { 0.0 };
        report.set(&format!("{family}/fitted_C"), fitted);
        for i in 0..n {
            let key = num(lams[i]);
            report.push(Record::at_most(format!("{family}/rate/L={key}"), diffs[i], 2.0 * fitted * d[i].sqrt(), 1e-12));
            if i > 0 {
                report.push(Record::at_most(format!("{family}/monotone/L={key}"), diffs[i], diffs[i - 1], 1e-12));
            }
            if family == "undressed" {
                rows.push(ResolventRecord { z: options.z, cutoff: lams[i], norm_diff: diffs[i], d_lambda: d[i] });
            }
        }
    }

    // ‖(U_Λ − U_ref)(H_0+1)^{-1/2}‖ ≤ 2‖B_Λ − B_ref‖ + |Im⟨B_Λ, B_ref⟩|.
    let weight = form_weight_inverse(&space, &model.fibers);
    let gross: Vec<FiberOperator> = lams.par_iter().map(|&l| model.gross(l)).collect::<Result<_>>()?;
    let b_ref = model.b_field(lams[n - 1])?.b;
    for i in 0..n {
        let b = model.b_field(lams[i])?.b;
        let measured = op_norm(&gross[i].sub(&gross[n - 1]).compose(&weight), 0)?;
        let bound = 2.0 * b.sub(&b_ref).norm() + b.inner(&b_ref).im.abs();
        report.push(Record::at_most(format!("gross/L={}", num(lams[i])), measured, bound, 1e-10));
    }
    report.details = serde_json::to_value(&rows)?;
    report.note("rate bound: 2·C·√D_Λ with C fitted at the smallest cutoff");
    report.note("gross bound: 2‖B_Λ − B_ref‖ + |Im⟨B_Λ, B_ref⟩|");
    Ok(report.finish())
}
