//! Weyl operators and coherent states.

use num_complex::Complex64 as C64;

use grosslab::fock::{coherent, number, poisson_tail, weyl_apply, FockBasis, ModeFunction};
use grosslab::linalg;

fn main() {
    let f = ModeFunction::new(vec![C64::new(0.7, 0.0), C64::new(0.0, -0.4)]);
    for nmax in [4, 8, 16] {
        let basis = FockBasis::new(2, nmax);
        let state = coherent(&f, &basis);
        let mean = linalg::dot(&state.state, &number(&basis).apply(&state.state)).re;
        println!(
            "nmax {nmax:>2}: dim {:>3}, ⟨N⟩ = {mean:.6} (‖f‖² = {:.6}), leakage {:.2e}",
            basis.len(),
            f.norm_sq(),
            state.leakage
        );
    }
    println!("Poisson tail P(n > 8) at mean 0.65: {:.2e}", poisson_tail(0.65, 8));

    // Weyl operators are unitary; W(f)W(−f)Ψ returns Ψ.
    let basis = FockBasis::new(2, 12);
    let psi = basis.project_headroom(&linalg::random_vector(basis.len(), 3), 6);
    let there = weyl_apply(&f, &basis, &psi);
    let back = weyl_apply(&f.scale(C64::new(-1.0, 0.0)), &basis, &there);
    println!("‖W(f)Ψ‖ − ‖Ψ‖ = {:.1e}", linalg::norm(&there) - linalg::norm(&psi));
    println!("‖W(−f)W(f)Ψ − Ψ‖ = {:.1e}", linalg::norm(&linalg::sub(&back, &psi)));
}
