//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use grosslab::config::load_config;
use grosslab::experiments::{
    exp_coherent_core, exp_dressing, exp_dynamics, exp_form_bound, exp_regularity, exp_resolvent_rate, ExperimentReport,
    RunOptions, DEAD_BAND,
};
use grosslab::fock::{self, FockBasis, ModeFunction};
use grosslab::linalg::{self, dense_spectral_norm, random_vector};
use grosslab::model::{build_grid, FormFactorSpec, ModelConfig};
use grosslab::qspace::{FormFactorField, QSpace};
use grosslab::rng::derive_seed;
use grosslab::sparse::CsrMatrix;

type Outcome = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn config(name: &str) -> ModelConfig {
    load_config(&config_path(name)).expect("bundled config parses")
}

fn random_function(modes: usize, tag: &str, trial: u64, scale: f64) -> ModeFunction {
    let v = random_vector(modes, derive_seed(2024, tag, trial));
    ModeFunction::new(v.into_iter().map(|a| a * scale).collect())
}

fn commutator(x: &CsrMatrix, y: &CsrMatrix) -> CsrMatrix {
    &x.matmul(y) - &y.matmul(x)
}

fn residual(m: &CsrMatrix, psi: &[C64], want: &[C64]) -> f64 {
    linalg::norm(&linalg::sub(&m.apply(psi), want))
}

/// Every record of `report` under `prefix` passes; `min` records must exist.
fn all_pass(report: &ExperimentReport, prefix: &str, min: usize) -> Outcome {
    let records: Vec<_> = report.records_with_prefix(prefix).collect();
    if records.len() < min {
        return Err(format!("{}: only {} `{prefix}` records", report.name, records.len()));
    }
    let failed: Vec<_> = records.iter().filter(|r| !r.pass).map(|r| r.sweep_key.clone()).collect();
    let worst = records.iter().filter(|r| r.ratio.is_finite()).map(|r| r.ratio).fold(0.0, f64::max);
    if failed.is_empty() {
        Ok(format!("{} `{prefix}` records, worst ratio {worst:.3e}", records.len()))
    } else {
        Err(format!("{} of {} `{prefix}` records fail, first {}", failed.len(), records.len(), failed[0]))
    }
}

fn combine(parts: Vec<Outcome>) -> Outcome {
    let mut ok = Vec::new();
    for p in parts {
        ok.push(p?);
    }
    Ok(ok.join("; "))
}

fn ccr_suite() -> Outcome {
    let b = FockBasis::new(4, 6);
    let n = fock::number(&b).matrix;
    let mut worst = 0.0f64;
    for t in 0..20 {
        let f = random_function(4, "ccr/f", t, 0.8);
        let g = random_function(4, "ccr/g", t, 0.8);
        let (af, ag) = (fock::annihilate(&f, &b).matrix, fock::annihilate(&g, &b).matrix);
        let (cf, cg) = (fock::create(&f, &b).matrix, fock::create(&g, &b).matrix);
        let (phif, phig) = (fock::field_phi(&f, &b).matrix, fock::field_phi(&g, &b).matrix);
        let pig = fock::field_pi(&g, &b).matrix;
        worst = worst.max(af.max_abs_diff(&cf.adjoint()));
        worst = worst.max(phif.hermiticity_defect()).max(pig.hermiticity_defect());
        let fg = f.inner(&g);
        let psi = b.project_headroom(&random_vector(b.len(), derive_seed(2024, "ccr/psi", t)), 2);
        let scaled = |s: C64| linalg::scaled(&psi, s);
        let zero = vec![C64::new(0.0, 0.0); psi.len()];
        worst = worst
            .max(residual(&commutator(&af, &cg), &psi, &scaled(fg)))
            .max(residual(&commutator(&af, &ag), &psi, &zero))
            .max(residual(&commutator(&cf, &cg), &psi, &zero))
            .max(residual(&commutator(&phif, &phig), &psi, &scaled(C64::new(0.0, 2.0 * fg.im))))
            .max(residual(&commutator(&phif, &pig), &psi, &scaled(C64::new(0.0, 2.0 * fg.re))))
            .max(residual(&commutator(&n, &cf), &psi, &cf.apply(&psi)))
            .max(residual(&commutator(&af, &n), &psi, &af.apply(&psi)));
        let phi = random_vector(b.len(), derive_seed(2024, "ccr/phi", t));
        let lhs = linalg::dot(&phi, &cf.apply(&psi));
        let rhs = linalg::dot(&af.apply(&phi), &psi);
        worst = worst.max((lhs - rhs).norm());
    }
    // Translated fields on the product space.
    let s = QSpace::from_config(&config("desk.cfg")).map_err(|e| e.to_string())?;
    let f = random_function(s.active_count(), "ccr/field", 0, 0.5);
    let field = FormFactorField::translated(&s, "F", &f);
    let a = s.gen_annihilate(&field).matrix;
    worst = worst.max(s.gen_create(&field).matrix.max_abs_diff(&a.adjoint()));
    if worst <= 1e-12 {
        Ok(format!("20 trials, max residual {worst:.2e}"))
    } else {
        Err(format!("max residual {worst:.2e} > 1e-12"))
    }
}

fn weighted_cols(m: &DMatrix<C64>, b: &FockBasis, keep: &[usize], power: f64) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), keep.len(), |r, j| m[(r, keep[j])] * (b.total(keep[j]) as f64 + 1.0).powf(power))
}

fn creation_constants() -> Outcome {
    const TRIALS: u64 = 50;
    let mut worst = [0.0f64; 4];

    // ‖a(f)Ψ‖ ≤ ‖f‖‖N^{1/2}Ψ‖ and ‖a*(f)Ψ‖ ≤ ‖f‖‖(N+1)^{1/2}Ψ‖.
    let b = FockBasis::new(4, 6);
    for t in 0..TRIALS {
        let f = random_function(4, "number/f", t, 1.3);
        let psi = random_vector(b.len(), derive_seed(2024, "number/psi", t));
        let root = |shift: f64| -> f64 {
            let v: Vec<C64> = psi.iter().zip(b.totals()).map(|(a, &n)| a * (n as f64 + shift).sqrt()).collect();
            linalg::norm(&v)
        };
        worst[0] = worst[0].max(linalg::norm(&fock::annihilate(&f, &b).apply(&psi)) / (f.norm() * root(0.0)));
        worst[0] = worst[0].max(linalg::norm(&fock::create(&f, &b).apply(&psi)) / (f.norm() * root(1.0)));
    }

    // ‖φ(f)²(N+1)^{-1}‖ ≤ 4√2‖f‖² and ‖a#(f)a#(g)(N+1)^{-1}‖ ≤ √2‖f‖‖g‖.
    let b = FockBasis::new(3, 6);
    let all: Vec<usize> = (0..b.len()).collect();
    for t in 0..TRIALS {
        let f = random_function(3, "square/f", t, 1.0);
        let g = random_function(3, "square/g", t, 1.0);
        let phi = fock::field_phi(&f, &b).to_dense();
        let sq = weighted_cols(&(&phi * &phi), &b, &all, -1.0);
        worst[1] = worst[1].max(dense_spectral_norm(&sq) / (4.0 * 2f64.sqrt() * f.norm_sq()));
        let ops_f = [fock::annihilate(&f, &b).to_dense(), fock::create(&f, &b).to_dense()];
        let ops_g = [fock::annihilate(&g, &b).to_dense(), fock::create(&g, &b).to_dense()];
        for x in &ops_f {
            for y in &ops_g {
                let m = weighted_cols(&(x * y), &b, &all, -1.0);
                worst[1] = worst[1].max(dense_spectral_norm(&m) / (2f64.sqrt() * f.norm() * g.norm()));
            }
        }
    }

    // ‖(W(f) − W(g))(N+1)^{-1/2}‖ ≤ 2‖f − g‖ + |Im⟨f,g⟩| on columns away from the truncation edge.
    let b = FockBasis::new(2, 24);
    let keep = b.headroom(12);
    for t in 0..TRIALS {
        let f = random_function(2, "weyl/f", t, 0.6);
        let g = random_function(2, "weyl/g", t, 0.6);
        let diff = fock::weyl_matrix(&f, &b) - fock::weyl_matrix(&g, &b);
        let lhs = dense_spectral_norm(&weighted_cols(&diff, &b, &keep, -0.5));
        worst[2] = worst[2].max(lhs / (2.0 * f.sub(&g).norm() + f.inner(&g).im.abs()));
    }

    // ‖a(F)Ψ‖ ≤ C_f‖N^{1/2}(1−Δ)^{1/2}Ψ‖ for the translated profile.
    let s = QSpace::from_config(&config("desk.cfg")).map_err(|e| e.to_string())?;
    let root = s.momentum_function(|k| (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt());
    let fl = s.fock_len();
    for t in 0..TRIALS {
        let f = random_function(s.active_count(), "translated/f", t, 1.0);
        let cf = s.translated_annihilator_constant(&f);
        let a = s.gen_annihilate(&FormFactorField::translated(&s, "F", &f));
        let psi = s.random_headroom_state(2024, "translated/psi", t, 1);
        let lp = root.apply(&psi);
        let weighted: Vec<C64> =
            lp.iter().enumerate().map(|(i, v)| v * (s.basis.total(i % fl) as f64).sqrt()).collect();
        worst[3] = worst[3].max(linalg::norm(&a.apply(&psi)) / (cf * linalg::norm(&weighted)));
    }

    let line = format!(
        "{TRIALS} trials each, worst ratios: number bound {:.3}, squared field {:.3}, Weyl difference {:.3}, translated annihilator {:.3}",
        worst[0], worst[1], worst[2], worst[3]
    );
    if worst.iter().all(|&w| w <= 1.0 + 1e-12) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn pairing() -> Outcome {
    let report = exp_form_bound(&config("desk.cfg"), &RunOptions::default()).map_err(|e| e.to_string())?;
    let line = all_pass(&report, "pairing/", 100)?;
    let unit = report.summary.get("form_difference/max_ratio_to_unit_constant").copied().unwrap_or(f64::NAN);
    Ok(format!(
        "{line}; sandwiched worst case reaches {unit:.3}×|ΔD|^(1/2), within the proven factor 2"
    ))
}

fn commutator_identity() -> Outcome {
    let mut worst = 0.0f64;
    for (d, l, nmax, lo, hi) in [(1usize, 8usize, 4usize, 1.5, 2.5), (2, 4, 2, 1.0, 1.5)] {
        let cfg = ModelConfig {
            dimension: d,
            torus_length: 2.0 * PI,
            sites_per_dim: l,
            nmax,
            form_factor: FormFactorSpec::Polaron,
            coupling: 1.0,
            k_ir: 0.5,
            lambda_list: vec![lo, hi],
            seed: 1,
        };
        let s = QSpace::from_config(&cfg).map_err(|e| e.to_string())?;
        let g = &s.grid;
        let amp = |cut: f64| -> Vec<C64> {
            s.active
                .iter()
                .map(|&i| C64::new(if g.modes[i].abs <= cut + 1e-12 { g.weight.sqrt() * g.vsamples[i] } else { 0.0 }, 0.0))
                .collect()
        };
        let diff = ModeFunction::new(linalg::sub(&amp(hi), &amp(lo)));
        let mut lhs = CsrMatrix::zeros(s.dim(), s.dim());
        for axis in 0..d {
            let a_axis = ModeFunction::new(
                (0..s.active_count())
                    .map(|j| diff.amplitudes[j] * s.active_mode(j).k[axis] / s.active_mode(j).k2())
                    .collect(),
            );
            let p = s.momentum_op(axis).matrix;
            let a = s.gen_annihilate(&FormFactorField::translated(&s, "A", &a_axis)).matrix;
            lhs = &lhs + &commutator(&p, &a);
        }
        let rhs = s.gen_annihilate(&FormFactorField::translated(&s, "G1-G2", &diff)).matrix;
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    if worst <= 1e-10 {
        Ok(format!("d=1 and d=2, max entry deviation {worst:.2e}"))
    } else {
        Err(format!("max entry deviation {worst:.2e} > 1e-10"))
    }
}

fn dressing() -> Outcome {
    let report = exp_dressing(&config("dressing.cfg"), &RunOptions::default()).map_err(|e| e.to_string())?;
    combine(vec![all_pass(&report, "residual/k_eq_lambda/", 1), all_pass(&report, "residual/", 4)])
}

fn resolvent() -> Outcome {
    let report = exp_resolvent_rate(&config("desk.cfg"), &RunOptions::default()).map_err(|e| e.to_string())?;
    combine(vec![
        all_pass(&report, "undressed/monotone/", 1),
        all_pass(&report, "undressed/rate/", 1),
        all_pass(&report, "dressed/monotone/", 1),
        all_pass(&report, "dressed/rate/", 1),
    ])
}

fn dynamics() -> Outcome {
    let report = exp_dynamics(&config("desk.cfg"), &RunOptions::default()).map_err(|e| e.to_string())?;
    let c = report.summary.get("rate_C").copied().unwrap_or(f64::NAN);
    let line = combine(vec![
        all_pass(&report, "rate/", 1),
        all_pass(&report, "group/", 1),
        all_pass(&report, "unitarity/", 1),
    ])?;
    Ok(format!("C = {c:.3}; {line}"))
}

fn regularity() -> Outcome {
    let options = RunOptions { s_list: vec![1.0, 1.25, 1.5, 1.75], ..RunOptions::default() };
    let mut lines = Vec::new();
    for (name, divergent) in [("polaron2d.cfg", [false, false, true, true]), ("smooth1d.cfg", [false, false, false, true])] {
        let cfg = config(name);
        let report = exp_regularity(&cfg, &options).map_err(|e| e.to_string())?;
        let grid = build_grid(&cfg).map_err(|e| e.to_string())?;
        let mut sigmas = Vec::new();
        for (&s, &want) in options.s_list.iter().zip(&divergent) {
            let key = format!("classify/s={}", grosslab::experiments::num(s));
            let r = report.record(&key).ok_or(format!("{name}: missing {key}"))?;
            let got = r.measured > -DEAD_BAND;
            let oracle = grid.regularity_criterion(s).map_err(|e| e.to_string())?.divergent;
            if got != want || oracle != want {
                return Err(format!("{name} s={s}: σ = {:.3}, expected divergent = {want}", r.measured));
            }
            sigmas.push(format!("{s}:{:+.3}", r.measured));
        }
        lines.push(format!("{name} σ {}", sigmas.join(" ")));
    }
    Ok(lines.join("; "))
}

fn coherent() -> Outcome {
    let report = exp_coherent_core(&config("coherent.cfg"), &RunOptions::default()).map_err(|e| e.to_string())?;
    combine(vec![
        all_pass(&report, "residual/", 1),
        all_pass(&report, "halving/", 1),
        all_pass(&report, "mode_identity/", 1),
    ])
}

fn scalar_integrals() -> Outcome {
    // d = 3, v = |k|^{-1}, k-spacing 0.2 out to |k| = 6.4.
    let cfg = ModelConfig {
        dimension: 3,
        torus_length: 10.0 * PI,
        sites_per_dim: 64,
        nmax: 1,
        form_factor: FormFactorSpec::Polaron,
        coupling: 1.0,
        k_ir: 1.0,
        lambda_list: vec![5.0],
        seed: 0,
    };
    let grid = build_grid(&cfg).map_err(|e| e.to_string())?;
    let (k, l) = (1.0f64, 5.0f64);
    let sphere = 4.0 * PI;
    let c_anti = |r: f64| r / (2.0 * (1.0 + r * r)) - 1.5 * r.atan();
    let kb_anti = |r: f64| r.atan() / 2.0 - r / (2.0 * (1.0 + r * r));
    let checks = [
        ("D_K−D_Λ", grid.scalar_d(k) - grid.scalar_d(l), sphere * (1.0 / k - 1.0 / l)),
        ("D_K with tail", grid.scalar_d_with_tail(k).unwrap_or(f64::NAN), sphere / k),
        ("C_{K,Λ}", grid.scalar_c(k, l).map_err(|e| e.to_string())?, sphere * (c_anti(l) - c_anti(k))),
        ("‖kB‖²", grid.kb_norm_sq(k, l), sphere * (kb_anti(l) - kb_anti(k))),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, quad, exact) in checks {
        let rel = (quad - exact).abs() / exact.abs();
        ok &= rel <= 0.02;
        parts.push(format!("{name} {quad:.4} vs {exact:.4} ({:.2}%)", 100.0 * rel));
    }
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("grosslab-acceptance-{}", std::process::id()));
    let exps = "form_bound,resolvent_rate";
    let mut outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "4")] {
        let out = tmp.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_grosslab"))
            .args(["run", "--config"])
            .arg(config_path("desk.cfg"))
            .args(["--exp", exps, "--out"])
            .arg(&out)
            .env("GROSSLAB_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run {run} exited with {}", status.status));
        }
        outputs.push(out);
    }
    let mut compared = 0;
    for name in ["form_bound.json", "resolvent_rate.json", "form_bound.csv", "resolvent_rate.csv"] {
        let a = std::fs::read(outputs[0].join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outputs[1].join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
        compared += a.len();
    }
    let _ = std::fs::remove_dir_all(&tmp);
    Ok(format!("{compared} bytes identical across 1- and 4-thread runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("CCR and adjointness", ccr_suite),
        ("creation/annihilation constants", creation_constants),
        ("cutoff-difference pairing", pairing),
        ("momentum-field commutator", commutator_identity),
        ("dressing identity", dressing),
        ("resolvent rate", resolvent),
        ("dynamics rate", dynamics),
        ("regularity dichotomy", regularity),
        ("coherent-core action", coherent),
        ("scalar integrals", scalar_integrals),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
