//! Coupling uncertainty acts on each interconnection row through a group of
//! linear reparameterizations. Properties constant on group orbits (the
//! off-diagonal support, hence connectivity and degree) survive that
//! uncertainty; everything else (edge signs and weights) can be changed by
//! moving along an orbit, so it is unrecoverable even from perfect data.
//!
//! Run with: cargo run --example orbit_invariants

use nalgebra::DVector;
use netrecon::group::{orbit_label, same_orbit, sign_flip_witness, GroupElement, ZERO_TOL_REL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netrecon::Result<()> {
    let node = 0usize;
    let v = DVector::from_column_slice(&[-1.2, 0.0, 0.7, -0.3]);
    let label = orbit_label(node, &v, ZERO_TOL_REL);
    println!("row for node {node}: {:?}", v.as_slice());
    println!(
        "orbit invariant: off-diagonal support {:?}, self coordinate nonzero: {}",
        label.support(),
        label.self_nonzero()
    );

    // Random group elements move the row but never its invariant label.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("\nrandom orbit excursions:");
    for k in 0..3 {
        let g = GroupElement::random(v.len(), node, &mut rng);
        let moved = g.apply(&v);
        let same = same_orbit(node, &v, &moved, ZERO_TOL_REL);
        println!(
            "  g{k}: moved row {:?}  same orbit: {same}",
            moved
                .iter()
                .map(|x| (x * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
        assert!(same);
        assert_eq!(
            orbit_label(node, &moved, ZERO_TOL_REL).support(),
            label.support()
        );
    }

    // Signs are NOT orbit invariants: for any row with off-diagonal support
    // there is a group element flipping a sign while staying consistent
    // with the exact same data.
    match sign_flip_witness(node, &v, ZERO_TOL_REL) {
        Some(g) => {
            let flipped = g.apply(&v);
            println!(
                "\nsign-flip witness: {:?} -> {:?}",
                v.as_slice(),
                flipped
                    .iter()
                    .map(|x| (x * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>()
            );
            println!(
                "same orbit: {}",
                same_orbit(node, &v, &flipped, ZERO_TOL_REL)
            );
        }
        None => println!("\nno off-diagonal support: every sign is trivially stable"),
    }

    // Even a row whose only nonzero coordinate is the self-loop is not
    // safe: the group can flip that coordinate too. Only the zero row has
    // nothing to flip.
    let isolated = DVector::from_column_slice(&[-0.8, 0.0, 0.0, 0.0]);
    let g = sign_flip_witness(node, &isolated, ZERO_TOL_REL).expect("self-loop flips");
    println!(
        "isolated row {:?} still flips: {:?}",
        isolated.as_slice(),
        g.apply(&isolated).as_slice()
    );
    let zero = DVector::zeros(4);
    assert!(sign_flip_witness(node, &zero, ZERO_TOL_REL).is_none());
    println!("only the zero row admits no sign-flip witness");
    Ok(())
}
