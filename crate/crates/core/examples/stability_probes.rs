//! Which conclusions survive small coupling deformations?
//!
//! Two probes with opposite outcomes:
//!
//! * The excitation (trivial-kernel) conclusion is structurally stable:
//!   random deformations with size at or below a quarter of the excitation
//!   margin never destroy it — the survival table reads 1.0 there.
//! * Partial kernel coverage is structurally unstable: rotating the kernel
//!   by an arbitrarily small angle mixes it into the untouched coordinates
//!   and the coverage flips to \"reaches everything\".
//!
//! Run with: cargo run --example stability_probes

use nalgebra::DVector;
use netrecon::gram::{analyze, compute_gram, RankTolerance};
use netrecon::group::ZERO_TOL_REL;
use netrecon::model::{simulate, GlvParameters, InputSignal, InteractionMatrix, RegressorFamily};
use netrecon::perturb::{
    flip_table, probe_orbit_instability, probe_pe_stability, survival_table, DeformationKind,
};

fn main() -> netrecon::Result<()> {
    // --- survival of the excitation conclusion ---------------------------
    let a = InteractionMatrix::from_rows(&[vec![-1.0, -0.5], vec![-0.5, -1.0]])?;
    let params = GlvParameters::from_slice(&[1.5, 1.5])?;
    let reg = RegressorFamily::glv(2);
    let drive = InputSignal::Composite(vec![
        params.input(),
        InputSignal::Sinusoid {
            amplitude: DVector::from_column_slice(&[0.3, 0.25]),
            frequency: DVector::from_column_slice(&[1.3, 2.1]),
            phase: DVector::from_column_slice(&[0.3, 1.1]),
        },
    ]);
    let driven = simulate(&a, &reg, &drive, &DVector::from_column_slice(&[1.0, 1.0]), 20.0, 1e-3)?;

    let tol = RankTolerance::default();
    let margin = analyze(&compute_gram(&driven, &reg, 0)?, tol).margin();
    println!("excitation margin of node 0: {margin:.3e}");

    let deltas = [0.0, margin / 8.0, margin / 4.0, 10.0 * margin];
    let rows = probe_pe_stability(
        &driven,
        &reg,
        0,
        tol,
        DeformationKind::AdditiveSmooth,
        &deltas,
        100,
        42,
    )?;
    println!("\nexcitation survival under random additive deformations:");
    print!("{}", survival_table(&rows));

    // --- instability of partial kernel coverage --------------------------
    // A linear cascade observed along a single decaying mode: node 1's Gram
    // kernel is its own coordinate axis, which touches no off-diagonal
    // coordinate — adjacency conclusions look decidable...
    let cascade = InteractionMatrix::from_rows(&[vec![-0.5, 0.3], vec![0.0, -1.0]])?;
    let lin = RegressorFamily::linear(2);
    let resting = simulate(
        &cascade,
        &lin,
        &InputSignal::Zero,
        &DVector::from_column_slice(&[1.0, 0.0]),
        5.0,
        1e-3,
    )?;
    let gram = compute_gram(&resting, &lin, 1)?;

    // ...but the conclusion does not survive arbitrarily small rotations of
    // the kernel: the coverage flips at every positive deformation size.
    let rows = probe_orbit_instability(&gram, tol, ZERO_TOL_REL, &[0.0, 1e-6, 1e-4, 1e-2])?;
    println!("\nkernel-coverage flips under rotations (node 1):");
    print!("{}", flip_table(&rows));
    Ok(())
}
