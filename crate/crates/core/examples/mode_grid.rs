//! Lattice mode grid and the scalar sums D_Λ, C_{K,Λ}, ‖kB_Λ‖².

use std::f64::consts::PI;

use grosslab::model::{build_grid, FormFactorSpec, ModelConfig};

fn main() -> grosslab::error::Result<()> {
    let config = ModelConfig {
        dimension: 3,
        torus_length: 10.0 * PI,
        sites_per_dim: 32,
        nmax: 1,
        form_factor: FormFactorSpec::Polaron,
        coupling: 1.0,
        k_ir: 1.0,
        lambda_list: vec![2.0, 3.0],
        seed: 0,
    };
    let grid = build_grid(&config)?;
    println!("{} modes, spacing weight {:.4e}, Λ_grid {:.3}", grid.len(), grid.weight, grid.lambda_grid());
    println!("{:>6} {:>10} {:>10} {:>10}", "Λ", "D_Λ", "C_{K,Λ}", "‖kB‖²");
    for cutoff in [1.0, 1.5, 2.0, 2.5, 3.0] {
        println!(
            "{cutoff:>6.2} {:>10.5} {:>10.5} {:>10.5}",
            grid.scalar_d(cutoff),
            grid.scalar_c(config.k_ir, cutoff)?,
            grid.kb_norm_sq(config.k_ir, cutoff)
        );
    }
    // continuum value of D_K for v = |k|^{-1} in three dimensions is 4π/K
    println!("D_1 with tail {:.5}, 4π = {:.5}", grid.scalar_d_with_tail(1.0).unwrap_or(f64::NAN), 4.0 * PI);
    for s in [1.0, 1.25, 1.5, 1.75] {
        let c = grid.regularity_criterion(s)?;
        println!("s = {s}: threshold {:.3}, divergent {}", c.threshold, c.divergent);
    }
    Ok(())
}
