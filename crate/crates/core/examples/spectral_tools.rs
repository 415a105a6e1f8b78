//! Norms, resolvents, ground states and propagation.

use std::path::Path;

use num_complex::Complex64 as C64;

use grosslab::config::load_config;
use grosslab::hamiltonians::FiberModel;
use grosslab::linalg;
use grosslab::qspace::QSpace;
use grosslab::spectral::{form_difference_constant, ground_state, op_norm, resolvent_apply, Propagator};

fn main() -> grosslab::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/desk.cfg");
    let config = load_config(&path)?;
    let space = QSpace::from_config(&config)?;
    let model = FiberModel::all_fibers(&space, config.k_ir);
    let (lo, hi) = (config.lambda_list[0], *config.lambda_list.last().unwrap());
    let (h_lo, h_hi) = (model.h_cutoff(lo), model.h_cutoff(hi));

    let (e0, _) = ground_state(&h_hi, config.seed)?;
    println!("ground energy at Λ = {hi}: {e0:.6}");
    println!("‖H_Λ‖ = {:.4}", op_norm(&h_hi, config.seed)?);

    let z = C64::new(0.0, 1.0);
    let psi = linalg::random_vector(h_hi.dim(), 5);
    let diff = linalg::sub(&resolvent_apply(&h_hi, z, &psi)?, &resolvent_apply(&h_lo, z, &psi)?);
    println!("‖(R_hi(i) − R_lo(i))Ψ‖ = {:.4e}", linalg::norm(&diff));

    let c = form_difference_constant(&model.phi_g(lo), &model.phi_g(hi), &model.h0())?;
    let root = (space.grid.scalar_d(lo) - space.grid.scalar_d(hi)).sqrt();
    println!("sandwiched cutoff difference {c:.4}, |ΔD|^(1/2) {root:.4}");

    let prop = Propagator::new(&h_hi);
    let later = prop.apply(1.0, &psi)?;
    let back = prop.apply(-1.0, &later)?;
    println!("‖e^(iH)e^(-iH)Ψ − Ψ‖ = {:.1e}", linalg::norm(&linalg::sub(&back, &psi)));
    Ok(())
}
