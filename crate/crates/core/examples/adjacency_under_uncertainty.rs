//! Reconstructing who-interacts-with-whom when the coupling functions
//! themselves are uncertain.
//!
//! Even with perfectly exciting data, declaring the couplings \"known only
//! up to linear reparameterization\" dissolves edge weights and signs: the
//! uncertainty group can rescale any coordinate. What survives is the
//! off-diagonal support — edge presence/absence — and this example shows
//! the per-edge verdicts on excited and on rank-deficient data.
//!
//! Run with: cargo run --example adjacency_under_uncertainty

use nalgebra::DVector;
use netrecon::gram::compute_gram;
use netrecon::model::{
    simulate, GlvParameters, InputSignal, InteractionMatrix, RegressorFamily,
};
use netrecon::reconstruct::{reconstruct_adjacency_under_uncertainty, Settings};

fn main() -> netrecon::Result<()> {
    // Node 0 interacts with itself and node 1, but not node 2.
    let a = InteractionMatrix::from_rows(&[
        vec![-1.0, -0.4, 0.0],
        vec![-0.3, -1.0, -0.2],
        vec![0.0, -0.3, -1.0],
    ])?;
    let params = GlvParameters::from_slice(&[1.4, 1.5, 1.3])?;
    let reg = RegressorFamily::glv(3);
    let settings = Settings::default();

    // Excited data: every edge of every node is decidable.
    let drive = InputSignal::Composite(vec![
        params.input(),
        InputSignal::Sinusoid {
            amplitude: DVector::from_column_slice(&[0.25, 0.3, 0.2]),
            frequency: DVector::from_column_slice(&[1.3, 2.1, 3.4]),
            phase: DVector::from_column_slice(&[0.3, 1.1, 2.0]),
        },
    ]);
    let x0 = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
    let traj = simulate(&a, &reg, &drive, &x0, 20.0, 1e-3)?;

    println!("edge verdicts under coupling uncertainty (excited data):");
    for node in 0..3 {
        let gram = compute_gram(&traj, &reg, node)?;
        let verdict = reconstruct_adjacency_under_uncertainty(&gram, &settings)?;
        println!(
            "node {node}: statuses {:?}  decidable coordinates {:?}",
            verdict.statuses, verdict.identifiable
        );
    }

    // Resting data: the kernel sweeps every off-diagonal coordinate and
    // nothing about the edges can be decided.
    let resting = simulate(&a, &reg, &params.input(), &x0, 5.0, 1e-3)?;
    println!("\nedge verdicts on resting (rank-1) data:");
    for node in 0..3 {
        let gram = compute_gram(&resting, &reg, node)?;
        let verdict = reconstruct_adjacency_under_uncertainty(&gram, &settings)?;
        println!(
            "node {node}: statuses {:?}  decidable coordinates {:?}",
            verdict.statuses, verdict.identifiable
        );
    }
    Ok(())
}
