//! End-to-end sign-pattern recovery WITHOUT excitation.
//!
//! The data is a two-species community resting at its steady state, so
//! every node's Gram matrix is rank deficient and the edge weights are
//! unrecoverable. But under a sign-box prior — every interaction is either
//! zero (magnitude <= epsilon) or bounded away from zero (magnitude in
//! [a_min, a_max]) — the solution fiber meets exactly one sign box per
//! node, and the full sign pattern is recovered uniquely.
//!
//! Run with: cargo run --example sign_pattern_recovery

use nalgebra::DVector;
use netrecon::geometry::{sign_boxes, PriorSet, SignBounds};
use netrecon::gram::compute_gram;
use netrecon::model::{simulate, GlvParameters, InteractionMatrix, RegressorFamily};
use netrecon::reconstruct::{reconstruct_property, PropertyKind, Settings, VerdictStatus};

fn main() -> netrecon::Result<()> {
    // True community: signs [[-, -], [+, -]], magnitudes within [0.5, 0.55].
    let a = InteractionMatrix::from_rows(&[vec![-0.52, -0.5], vec![0.51, -0.54]])?;
    let params = GlvParameters::from_slice(&[2.52, 1.65])?;
    let reg = RegressorFamily::glv(2);

    // The steady state is (1, 4); starting there keeps the system at rest.
    let x0 = DVector::from_column_slice(&[1.0, 4.0]);
    let traj = simulate(&a, &reg, &params.input(), &x0, 10.0, 1e-2)?;

    let bounds = SignBounds::new(0.01, 0.5, 0.55)?;
    let prior = PriorSet::Boxes(sign_boxes(2, &bounds)?);
    let settings = Settings::default();

    println!("reconstructing the sign pattern from resting (rank-1) data:");
    for node in 0..2 {
        let gram = compute_gram(&traj, &reg, node)?;
        let verdict = reconstruct_property(&gram, &prior, PropertyKind::Sign, &settings)?;
        println!(
            "node {node}: status {:?}  pieces checked {}  value {:?}",
            verdict.status, verdict.pieces_checked, verdict.value
        );
        assert_eq!(verdict.status, VerdictStatus::Unique);
    }

    // The same data WITHOUT the prior: identity is hopeless.
    let unconstrained = PriorSet::Unconstrained;
    let gram = compute_gram(&traj, &reg, 0)?;
    let verdict =
        reconstruct_property(&gram, &unconstrained, PropertyKind::Identity, &settings)?;
    println!(
        "\nwithout the prior, identity on node 0: {:?} ({} witnesses)",
        verdict.status,
        verdict.witnesses.len()
    );
    assert_eq!(verdict.status, VerdictStatus::Ambiguous);
    Ok(())
}
