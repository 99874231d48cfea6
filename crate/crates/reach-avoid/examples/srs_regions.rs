//! Safe-reachable-set geometry: how capture frontiers carve the domain,
//! and how the set collapses to classical constructions in special cases.
//!
//! Run with `cargo run --release --example srs_regions`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use reach_avoid::geometry::{build_srs, ConvexRegion};
use reach_avoid::Vector;

fn main() -> anyhow::Result<()> {
    let domain =
        ConvexRegion::bounding_box(&Vector::new2(-5.0, -5.0), &Vector::new2(5.0, 5.0))?;
    let defender = Vector::new2(2.0, 1.0);
    let attacker = Vector::new2(-1.0, -2.0);

    // A general frontier: faster defender with a nonzero capture radius.
    let srs = build_srs(&[defender], &attacker, &[1.5], &[0.8], &domain)?;
    println!("general SRS (gamma 1.5, radius 0.8):");
    for probe in [
        Vector::new2(-1.0, -2.0),
        Vector::new2(-4.0, -4.0),
        Vector::new2(1.0, 0.5),
        Vector::new2(2.0, 1.0),
    ] {
        println!(
            "  {:>18} inside: {}",
            format!("{probe:?}"),
            srs.contains(&probe, 0.0)?
        );
    }

    // Equal speeds, zero radius: the set is exactly the attacker's side of
    // the perpendicular bisector (its Voronoi cell).
    let voronoi = build_srs(&[defender], &attacker, &[1.0], &[0.0], &domain)?;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut agree = 0;
    let total = 20_000;
    for _ in 0..total {
        let q = Vector::new2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let inside = voronoi.contains(&q, 0.0)?;
        let bisector = q.distance(&attacker) <= q.distance(&defender);
        if inside == bisector {
            agree += 1;
        }
    }
    println!("\nVoronoi reduction (gamma 1, radius 0): {agree}/{total} sampled points agree");

    // Faster defender, zero radius: the set is the Apollonius disk.
    let gamma = 2.0f64;
    let apollonius = build_srs(&[defender], &attacker, &[gamma], &[0.0], &domain)?;
    let g2 = gamma * gamma;
    let center = (attacker * g2 - defender) * (1.0 / (g2 - 1.0));
    let radius = gamma * (attacker - defender).norm() / (g2 - 1.0);
    let mut agree = 0;
    let mut band = 0;
    for _ in 0..total {
        let q = Vector::new2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let margin = q.distance(&center) - radius;
        if margin.abs() <= 1e-9 {
            band += 1;
            continue;
        }
        if apollonius.contains(&q, 0.0)? == (margin < 0.0) {
            agree += 1;
        }
    }
    println!(
        "Apollonius reduction (gamma 2, radius 0): {agree}/{} agree (center {center:?}, radius {radius:.3})",
        total - band
    );

    // Adding defenders only shrinks the set.
    let second = Vector::new2(-3.0, 2.0);
    let bigger_team = build_srs(
        &[defender, second],
        &attacker,
        &[1.5, 1.2],
        &[0.8, 0.4],
        &domain,
    )?;
    let mut shrunk = true;
    for _ in 0..total {
        let q = Vector::new2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if bigger_team.contains(&q, 0.0)? && !srs.contains(&q, 0.0)? {
            shrunk = false;
        }
    }
    println!("monotone shrinkage with a second defender: {shrunk}");
    Ok(())
}
