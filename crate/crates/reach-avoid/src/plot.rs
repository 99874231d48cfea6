//! SVG plots of safe-reachable-set geometry.
//!
//! 2D scenarios render domain, target, capture disks, the safe-reachable
//! set boundary (sampled by ray marching from the attacker position), and
//! the separation waypoint. 3D scenarios emit a boundary point cloud as
//! CSV instead.

use std::fs;
use std::path::Path;

use crate::allocation::Coalition;
use crate::coordination::single_attack_solve;
use crate::engine::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::solver::CheckCounter;
use crate::vec::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotArtifact {
    Svg,
    PointCloudCsv,
    /// The safe-reachable set was empty; an annotated placeholder was
    /// written.
    EmptyRegionSvg,
}

/// March a ray from `origin` along `direction` until the region boundary
/// and return the crossing point, or the cap point when the region extends
/// past `reach` (cannot happen for bounded regions with `reach` beyond
/// their envelope).
fn march_ray(region: &ConvexRegion, origin: &Vector, direction: &Vector, reach: f64) -> Vector {
    let inside = |t: f64| -> bool {
        let q = *origin + *direction * t;
        region.contains(&q, 0.0).unwrap_or(false)
    };
    if !inside(0.0) {
        return *origin;
    }
    let mut lo = 0.0;
    let mut hi = reach;
    if inside(hi) {
        return *origin + *direction * hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    *origin + *direction * (0.5 * (lo + hi))
}

/// Boundary polyline of a region by ray marching from an interior point.
pub fn region_boundary_2d(region: &ConvexRegion, interior: &Vector, rays: usize) -> Vec<Vector> {
    let mut points = Vec::with_capacity(rays + 1);
    for k in 0..=rays {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (rays as f64);
        let direction = Vector::new2(theta.cos(), theta.sin());
        points.push(march_ray(region, interior, &direction, 64.0));
    }
    points
}

fn boundary_points_3d(region: &ConvexRegion, interior: &Vector, rays: usize) -> Vec<Vector> {
    // Fibonacci sphere directions.
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut points = Vec::with_capacity(rays);
    for k in 0..rays {
        let y = 1.0 - 2.0 * (k as f64 + 0.5) / (rays as f64);
        let r = (1.0 - y * y).sqrt();
        let theta = golden * k as f64;
        let direction = Vector::new3(r * theta.cos(), y, r * theta.sin());
        points.push(march_ray(region, interior, &direction, 64.0));
    }
    points
}

fn polyline(points: &[Vector], style: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|p| format!("{:.4},{:.4}", p[0], -p[1]))
        .collect();
    format!(
        "  <polyline points=\"{}\" style=\"{style}\"/>\n",
        coords.join(" ")
    )
}

/// Render the safe-reachable set of one attacker against a defender
/// coalition. Returns which artifact kind was written.
pub fn emit_srs_plot(
    config: &ScenarioConfig,
    attacker_id: usize,
    coalition: &Coalition,
    path: &Path,
) -> Result<PlotArtifact> {
    if attacker_id >= config.attackers.len() {
        return Err(Error::invalid(format!("no attacker {attacker_id}")));
    }
    let state = crate::engine::JointState::initial(config).allocation_state(config);
    let view = state.view(coalition, attacker_id)?;
    let srs = view.srs(&config.domain)?;
    let attacker = view.attacker_position;

    if config.dimension == 3 {
        if !srs.contains(&attacker, 1e-9)? {
            return Err(Error::invalid(
                "attacker position is outside its own safe-reachable set",
            ));
        }
        let points = boundary_points_3d(&srs, &attacker, 1024);
        let mut csv = String::from("x,y,z\n");
        for p in points {
            csv.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
        }
        fs::write(path, csv)?;
        return Ok(PlotArtifact::PointCloudCsv);
    }

    let mut svg = String::new();
    svg.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-6 -6 12 12\" width=\"720\" height=\"720\">\n",
    );
    svg.push_str("  <rect x=\"-6\" y=\"-6\" width=\"12\" height=\"12\" fill=\"white\"/>\n");

    let domain_boundary = region_boundary_2d(&config.domain, &Vector::zeros(2), 256);
    svg.push_str(&polyline(
        &domain_boundary,
        "fill:none;stroke:black;stroke-width:0.04",
    ));

    // Target outline, marched from its own anchor (projection of the
    // origin onto the target).
    let mut scratch = CheckCounter::new();
    let target_anchor =
        crate::solver::solve_projection(&Vector::zeros(2), &config.target, &mut scratch)?;
    let target_boundary = region_boundary_2d(&config.target, &target_anchor.primal_q, 256);
    svg.push_str(&polyline(
        &target_boundary,
        "fill:none;stroke:green;stroke-width:0.04",
    ));

    for (k, &id) in view.defender_ids.iter().enumerate() {
        let p = view.defender_positions[k];
        svg.push_str(&format!(
            "  <circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"{:.4}\" fill=\"rgba(0,0,255,0.25)\" stroke=\"blue\" stroke-width=\"0.03\"/>\n",
            p[0], -p[1], view.radii[k].max(0.05)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.4}\" y=\"{:.4}\" font-size=\"0.3\">d{id}</text>\n",
            p[0] + 0.1,
            -p[1] - 0.1
        ));
    }

    if !srs.contains(&attacker, 1e-9)? {
        svg.push_str(&format!(
            "  <text x=\"-5.5\" y=\"0\" font-size=\"0.5\" fill=\"red\">safe-reachable set empty for attacker {attacker_id}</text>\n",
        ));
        svg.push_str("</svg>\n");
        fs::write(path, svg)?;
        return Ok(PlotArtifact::EmptyRegionSvg);
    }

    let boundary = region_boundary_2d(&srs, &attacker, 512);
    svg.push_str(&polyline(
        &boundary,
        "fill:rgba(255,0,0,0.15);stroke:red;stroke-width:0.04",
    ));
    svg.push_str(&format!(
        "  <circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"0.08\" fill=\"red\"/>\n",
        attacker[0], -attacker[1]
    ));

    let mut counter = CheckCounter::new();
    let solution = single_attack_solve(&view, &config.domain, &config.target, &mut counter)?;
    if let Some(waypoint) = solution.waypoint() {
        svg.push_str(&format!(
            "  <path d=\"M {x0:.4} {y0:.4} L {x1:.4} {y1:.4} M {x0:.4} {y1:.4} L {x1:.4} {y0:.4}\" stroke=\"purple\" stroke-width=\"0.04\"/>\n",
            x0 = waypoint[0] - 0.12,
            y0 = -waypoint[1] - 0.12,
            x1 = waypoint[0] + 0.12,
            y1 = -waypoint[1] + 0.12,
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(PlotArtifact::Svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AttackerSpec, DefenderSpec};

    fn plot_config(defenders: Vec<DefenderSpec>, attacker: Vector) -> ScenarioConfig {
        ScenarioConfig {
            dimension: 2,
            domain: ConvexRegion::bounding_box(&Vector::new2(-5.0, -5.0), &Vector::new2(5.0, 5.0))
                .unwrap(),
            target: ConvexRegion::ball(Vector::new2(0.0, 4.0), 0.8),
            defenders,
            attackers: vec![AttackerSpec {
                position: attacker,
                max_speed: 1.0,
            }],
            dt: 0.01,
            allocation_period: 0.1,
            t_max: 10.0,
            rng_seed: 0,
        }
    }

    /// The two-defender showcase: unequal speed ratios and capture radii.
    /// Capture disks never intersect the safe-reachable set.
    #[test]
    fn showcase_plot_excludes_capture_disks() {
        let config = plot_config(
            vec![
                DefenderSpec {
                    position: Vector::new2(-2.0, 1.0),
                    max_speed: 1.0,
                    capture_radius: 2.0,
                },
                DefenderSpec {
                    position: Vector::new2(2.5, -1.0),
                    max_speed: 2.0,
                    capture_radius: 0.5,
                },
            ],
            Vector::new2(0.0, -3.0),
        );
        let coalition = Coalition::new([0, 1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("srs.svg");
        let artifact = emit_srs_plot(&config, 0, &coalition, &path).unwrap();
        assert_eq!(artifact, PlotArtifact::Svg);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("<svg"));

        // Sampled points inside each capture disk stay outside the SRS.
        let state = crate::engine::JointState::initial(&config).allocation_state(&config);
        let view = state.view(&coalition, 0).unwrap();
        let srs = view.srs(&config.domain).unwrap();
        for k in 0..2 {
            let center = view.defender_positions[k];
            let radius = view.radii[k];
            for step in 0..50 {
                let theta = step as f64 * 0.125;
                let p = center + Vector::new2(theta.cos(), theta.sin()) * (radius * 0.9);
                if config.domain.contains(&p, 0.0).unwrap() {
                    assert!(!srs.contains(&p, 0.0).unwrap(), "{p:?} invades the SRS");
                }
            }
        }
    }

    /// With matched speeds and no capture radius the marched boundary must
    /// agree with the perpendicular bisector wherever it is interior to the
    /// domain.
    #[test]
    fn boundary_matches_bisector_for_equal_speeds() {
        let defender = Vector::new2(1.5, 2.0);
        let attacker = Vector::new2(-1.0, -2.0);
        let config = plot_config(
            vec![DefenderSpec {
                position: defender,
                max_speed: 1.0,
                capture_radius: 0.0,
            }],
            attacker,
        );
        let state = crate::engine::JointState::initial(&config).allocation_state(&config);
        let view = state.view(&Coalition::new([0]).unwrap(), 0).unwrap();
        let srs = view.srs(&config.domain).unwrap();
        for p in region_boundary_2d(&srs, &attacker, 128) {
            let on_box = p.as_slice().iter().any(|c| (c.abs() - 5.0).abs() < 1e-6);
            if !on_box {
                let bisector_residual = p.distance(&attacker) - p.distance(&defender);
                assert!(
                    bisector_residual.abs() < 1e-6,
                    "boundary point {p:?} off the bisector by {bisector_residual}"
                );
            }
        }
    }

    #[test]
    fn encircled_attacker_yields_annotated_empty_plot() {
        // An attacker strictly inside a capture disk has no safe-reachable
        // set at all; the plot degrades to an annotation. (Such a state can
        // only arise mid-game, never from a validated clean start.)
        let config = plot_config(
            vec![DefenderSpec {
                position: Vector::new2(0.0, 0.5),
                max_speed: 1.5,
                capture_radius: 2.0,
            }],
            Vector::new2(0.0, 1.0),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.svg");
        let artifact = emit_srs_plot(&config, 0, &Coalition::new([0]).unwrap(), &path).unwrap();
        assert_eq!(artifact, PlotArtifact::EmptyRegionSvg);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("empty"));
    }

    #[test]
    fn three_dimensional_input_emits_point_cloud() {
        let config = ScenarioConfig {
            dimension: 3,
            domain: ConvexRegion::bounding_box(
                &Vector::new3(-5.0, -5.0, -5.0),
                &Vector::new3(5.0, 5.0, 5.0),
            )
            .unwrap(),
            target: ConvexRegion::ball(Vector::new3(0.0, 0.0, 4.0), 0.5),
            defenders: vec![DefenderSpec {
                position: Vector::new3(0.0, 0.0, 1.0),
                max_speed: 1.2,
                capture_radius: 0.5,
            }],
            attackers: vec![AttackerSpec {
                position: Vector::new3(0.0, 0.0, -3.0),
                max_speed: 1.0,
            }],
            dt: 0.01,
            allocation_period: 0.1,
            t_max: 10.0,
            rng_seed: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("srs.csv");
        let artifact =
            emit_srs_plot(&config, 0, &Coalition::new([0]).unwrap(), &path).unwrap();
        assert_eq!(artifact, PlotArtifact::PointCloudCsv);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,z"));
        assert!(text.lines().count() > 500);
    }
}
