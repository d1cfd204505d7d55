//! Simulate a five-species community with product couplings and write the
//! trajectory in the delimited format the other tools consume.
//!
//! Run with: cargo run --example simulate_food_web

use netrecon::model::{simulate, GlvParameters, InteractionMatrix, RegressorFamily};
use nalgebra::DVector;

fn main() -> netrecon::Result<()> {
    // A competitive community: self-limitation on the diagonal, weak
    // competition between neighbors, mixed intrinsic growth rates.
    let a = InteractionMatrix::from_rows(&[
        vec![-1.0, -0.2, 0.0, -0.1, 0.0],
        vec![-0.2, -1.0, -0.2, 0.0, -0.1],
        vec![0.0, -0.2, -1.0, -0.2, 0.0],
        vec![-0.1, 0.0, -0.2, -1.0, -0.2],
        vec![0.0, -0.1, 0.0, -0.2, -1.0],
    ])?;
    let params = GlvParameters::from_slice(&[0.0, -0.5, 0.5, -0.5, 0.0])?;
    let reg = RegressorFamily::glv(5);
    let x0 = DVector::from_column_slice(&[0.895349, 0.72093, 0.255814, 1.82558, 1.82558]);

    let traj = simulate(&a, &reg, &params.input(), &x0, 10.0, 1e-3)?;

    println!(
        "simulated {} samples over t in [{:.1}, {:.1}] (step {:.0e})",
        traj.len(),
        traj.span().0,
        traj.span().1,
        traj.step()
    );
    let last = traj.state(traj.len() - 1);
    println!("final abundances: {:?}", last.as_slice());

    let path = std::env::temp_dir().join("food_web_trajectory.csv");
    traj.write_path(&path)?;
    println!("trajectory written to {}", path.display());
    Ok(())
}
