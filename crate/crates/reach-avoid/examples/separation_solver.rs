//! The two convex programs behind coordination: region-to-region squared
//! distance with Lagrange multipliers, and point projection for the
//! recovery mode.
//!
//! Run with `cargo run --release --example separation_solver`.

use reach_avoid::geometry::{build_srs, ConvexRegion};
use reach_avoid::solver::{
    kkt_residual, solve_min_distance, solve_projection, CheckCounter, KktProblem,
};
use reach_avoid::Vector;

fn main() -> anyhow::Result<()> {
    let domain =
        ConvexRegion::bounding_box(&Vector::new2(-5.0, -5.0), &Vector::new2(5.0, 5.0))?;
    let mut counter = CheckCounter::new();

    // Defender above, attacker below: the frontier is the horizontal
    // bisector, and the closest approach to the disk target is analytic.
    let srs = build_srs(
        &[Vector::new2(0.0, 2.0)],
        &Vector::new2(0.0, -2.0),
        &[1.0],
        &[0.0],
        &domain,
    )?;
    let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
    let result = solve_min_distance(&srs, &target, &mut counter)?;
    println!("separation program:");
    println!("  value      {:.9} (analytic 4)", result.value);
    println!("  waypoint   {:?} (analytic [0, 0])", result.primal_q);
    println!("  target pt  {:?} (analytic [0, 2])", result.primal_qtilde.unwrap());
    println!("  active set {:?}", result.active_set);
    let frontier_idx = srs.atoms().len() - 1;
    println!(
        "  multipliers: frontier {:.6} (analytic 0.5), target ball {:.6} (analytic 2)",
        result.multipliers[frontier_idx],
        result.multipliers[srs.atoms().len()]
    );
    let residual = kkt_residual(
        &result,
        &KktProblem::MinDistance {
            region_a: &srs,
            region_b: &target,
        },
    )?;
    println!("  KKT residual {residual:.3e}");

    // Recovery program: the attacker projects onto the overlap of its
    // safe-reachable set and the target.
    let attacker = Vector::new2(3.8, 3.8);
    let overlap_srs = build_srs(&[Vector::new2(-4.0, -4.0)], &attacker, &[1.0], &[0.3], &domain)?;
    let near_target = ConvexRegion::ball(Vector::new2(2.0, 2.0), 1.5);
    let overlap = overlap_srs.intersect(&near_target)?;
    let projection = solve_projection(&attacker, &overlap, &mut counter)?;
    println!("\nrecovery program:");
    println!("  squared distance {:.9}", projection.value);
    println!("  recovery waypoint {:?}", projection.primal_q);

    // A point target exercises the degenerate-region path: the region
    // collapses to its center during presolve.
    let point_target = ConvexRegion::ball(Vector::new2(4.0, 0.0), 0.0);
    let apollonius = build_srs(
        &[Vector::new2(3.0, 0.0)],
        &Vector::new2(0.0, 0.0),
        &[2.0],
        &[0.0],
        &domain,
    )?;
    let result = solve_min_distance(&apollonius, &point_target, &mut counter)?;
    println!("\npoint-target program:");
    println!("  value    {:.9} (analytic 9)", result.value);
    println!("  waypoint {:?} (analytic [1, 0])", result.primal_q);

    println!("\ncheck counter: {} (projections do not count)", counter.count());
    Ok(())
}
