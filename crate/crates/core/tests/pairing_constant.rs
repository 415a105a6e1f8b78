//! The sandwiched cutoff difference can exceed `|D_Λ1 − D_Λ2|^{1/2}`; the
//! pairing argument only gives twice that.

use std::path::PathBuf;

use grosslab::config::load_config;
use grosslab::hamiltonians::FiberModel;
use grosslab::qspace::QSpace;
use grosslab::spectral::form_difference_constant;

fn desk() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/desk.cfg")
}

#[test]
fn unit_constant_fails_but_two_holds() {
    let config = load_config(&desk()).unwrap();
    let space = QSpace::from_config(&config).unwrap();
    let model = FiberModel::all_fibers(&space, config.k_ir);
    let h0 = model.h0();
    let lams = &config.lambda_list;
    let mut worst = 0.0f64;
    for i in 0..lams.len() {
        for j in i + 1..lams.len() {
            let c = form_difference_constant(&model.phi_g(lams[i]), &model.phi_g(lams[j]), &h0).unwrap();
            let root = (space.grid.scalar_d(lams[i]) - space.grid.scalar_d(lams[j])).abs().sqrt();
            let ratio = c / root;
            assert!(ratio <= 2.0, "ratio {ratio} above the proven constant");
            worst = worst.max(ratio);
        }
    }
    assert!(worst > 1.0, "expected a counterexample to constant 1, worst ratio {worst}");
}
