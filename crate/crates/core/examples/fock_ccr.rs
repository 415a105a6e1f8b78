//! Truncated Fock space: creation, annihilation and the canonical commutator.

use num_complex::Complex64 as C64;

use grosslab::fock::{annihilate, binomial, create, field_phi, number, FockBasis, ModeFunction};
use grosslab::linalg;

fn main() {
    let basis = FockBasis::new(3, 5);
    println!("3 modes, nmax 5: {} states (C(8,5) = {})", basis.len(), binomial(8, 5));

    let f = ModeFunction::new(vec![C64::new(0.5, 0.1), C64::new(-0.2, 0.3), C64::new(0.0, 0.4)]);
    let g = ModeFunction::new(vec![C64::new(0.1, 0.0), C64::new(0.6, -0.2), C64::new(0.3, 0.3)]);
    let a = annihilate(&f, &basis).matrix;
    let ad = create(&g, &basis).matrix;
    let comm = &a.matmul(&ad) - &ad.matmul(&a);

    // Away from the top grade, [a(f), a*(g)] acts as ⟨f,g⟩.
    let psi = basis.project_headroom(&linalg::random_vector(basis.len(), 1), 1);
    let want = linalg::scaled(&psi, f.inner(&g));
    println!("‖([a(f),a*(g)] − ⟨f,g⟩)Ψ‖ = {:.2e}", linalg::norm(&linalg::sub(&comm.apply(&psi), &want)));

    // At the top grade the truncation shows up.
    let full = linalg::random_vector(basis.len(), 2);
    let want = linalg::scaled(&full, f.inner(&g));
    println!("same on an unrestricted state: {:.2e}", linalg::norm(&linalg::sub(&comm.apply(&full), &want)));

    let n = number(&basis);
    let phi = field_phi(&f, &basis);
    println!("⟨Ψ,NΨ⟩ = {:.4}", linalg::dot(&psi, &n.apply(&psi)).re);
    println!("φ(f) hermiticity defect {:.1e}", phi.matrix.hermiticity_defect());
}
