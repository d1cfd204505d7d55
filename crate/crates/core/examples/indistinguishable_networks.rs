//! Two different networks, one trajectory.
//!
//! From a community matrix with a positive steady state, construct a second
//! matrix whose rows differ (including in sign) yet whose dynamics produce
//! a numerically identical trajectory from the same initial state. No
//! reconstruction method — whatever its cleverness — can tell the two
//! networks apart from that data.
//!
//! Run with: cargo run --example indistinguishable_networks

use netrecon::gram::compute_gram;
use netrecon::geometry::PriorSet;
use netrecon::model::{simulate, GlvParameters, InteractionMatrix, RegressorFamily};
use netrecon::perturb::{indistinguishable_pair, sup_distance};
use netrecon::reconstruct::{
    property_of, reconstruct_property, PropertyKind, Settings, VerdictStatus,
};

fn main() -> netrecon::Result<()> {
    let a = InteractionMatrix::from_rows(&[vec![-1.0, -0.5], vec![-0.5, -1.0]])?;
    let params = GlvParameters::from_slice(&[1.5, 1.5])?;

    let pair = indistinguishable_pair(&a, &params, 2024)?;
    println!("original:    {:?}", pair.original.as_matrix().as_slice());
    println!("alternative: {:?}", pair.alternative.as_matrix().as_slice());
    println!("shared steady state: {:?}", pair.steady_state.as_slice());

    let zero_tol = netrecon::group::ZERO_TOL_REL;
    println!(
        "sign patterns differ: {}",
        property_of(&pair.original, PropertyKind::Sign, zero_tol)
            != property_of(&pair.alternative, PropertyKind::Sign, zero_tol)
    );

    // Both systems, same initial state, ten time units.
    let reg = RegressorFamily::glv(2);
    let t1 = simulate(&pair.original, &reg, &params.input(), &pair.steady_state, 10.0, 1e-2)?;
    let t2 = simulate(
        &pair.alternative,
        &reg,
        &params.input(),
        &pair.steady_state,
        10.0,
        1e-2,
    )?;
    let dist = sup_distance(&t1, &t2)?;
    println!("trajectory sup-distance over [0, 10]: {dist:.3e}");

    // Reconstruction on the shared data, told the truth — that the row is
    // one of the two candidates — must answer \"ambiguous\".
    let settings = Settings::default();
    for node in 0..2 {
        let gram = compute_gram(&t1, &reg, node)?;
        let prior = PriorSet::Discrete(vec![
            pair.original.row(node),
            pair.alternative.row(node),
        ]);
        let verdict = reconstruct_property(&gram, &prior, PropertyKind::Sign, &settings)?;
        print!("node {node}: {:?}", verdict.status);
        if verdict.status == VerdictStatus::Ambiguous {
            print!("  ({} witnesses)", verdict.witnesses.len());
        }
        println!();
    }
    Ok(())
}
