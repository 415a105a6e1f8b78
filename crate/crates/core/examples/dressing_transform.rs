//! Gross transform, dressed interaction and the dressing identity.

use std::path::Path;

use grosslab::config::load_config;
use grosslab::hamiltonians::{dressing_identity_residual, fiber_min_eigenvalue, FiberModel};
use grosslab::qspace::QSpace;
use grosslab::rng;
use rand::Rng;

fn main() -> grosslab::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/desk.cfg");
    let config = load_config(&path)?;
    let space = QSpace::from_config(&config)?;
    let model = FiberModel::all_fibers(&space, config.k_ir);

    let mut r = rng::stream(config.seed, "example/dressing", 0);
    let profile = grosslab::fock::ModeFunction::new(
        (0..space.active_count()).map(|_| num_complex::Complex64::new(r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2))).collect(),
    );
    let trial = model.coherent_trial(space.zero_fiber(), &profile);

    for &cutoff in &config.lambda_list {
        let c = model.constants(cutoff)?;
        let u = model.gross(cutoff)?;
        let res = dressing_identity_residual(&model, cutoff, &[trial.clone()])?;
        println!(
            "Λ {cutoff}: D {:.4}, C {:.4}, ‖kB‖ {:.4}, unitarity {:.1e}, residual {:.2e}, min H' {:.4}",
            c.d_lambda,
            c.c_k_lambda,
            c.kb_norm,
            u.unitarity_defect(),
            res.total,
            fiber_min_eigenvalue(&model.h_dressed(cutoff)?)
        );
    }
    Ok(())
}
