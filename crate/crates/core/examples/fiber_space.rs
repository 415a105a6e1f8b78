//! Electron ⊗ phonon space and its total-momentum fibers.

use std::path::Path;

use grosslab::config::load_config;
use grosslab::hamiltonians::{fiber_min_eigenvalue, FiberModel};
use grosslab::linalg;
use grosslab::qspace::QSpace;

fn main() -> grosslab::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/desk.cfg");
    let config = load_config(&path)?;
    let space = QSpace::from_config(&config)?;
    println!(
        "{} sites × {} Fock states = {} ({} active modes)",
        space.site_count(),
        space.fock_len(),
        space.dim(),
        space.active_count()
    );

    // The Fourier change to fiber coordinates is unitary.
    let psi = space.random_headroom_state(config.seed, "example", 0, 0);
    let phi = space.to_fiber_coords(&psi);
    println!("round trip error {:.1e}", linalg::norm(&linalg::sub(&space.from_fiber_coords(&phi), &psi)));

    // H_Λ is block diagonal; its blocks come from the position-basis operator.
    let model = FiberModel::all_fibers(&space, config.k_ir);
    let cutoff = config.lambda_list[0];
    let h = grosslab::hamiltonians::cutoff_hamiltonian(&space, cutoff);
    let (blocks, leak) = space.fibers(&h, &space.all_fibers());
    println!("off-fiber leak {leak:.1e}, block defect {:.1e}", blocks.max_abs_diff(&model.h_cutoff(cutoff)));
    for p in 0..space.fiber_count() {
        let one = model.h_cutoff(cutoff).select(&[p]);
        println!("P = {:+.0}: lowest eigenvalue {:.6}", space.total_momentum(p)[0], fiber_min_eigenvalue(&one));
    }
    Ok(())
}
