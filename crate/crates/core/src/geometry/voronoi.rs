//! Voronoi tessellation of player locations, clipped to the field.
//!
//! With at most 22 generator sites, each cell is computed directly as the
//! intersection of the field rectangle with the perpendicular-bisector
//! half-planes against every other site. Correctness is defined by a grid
//! nearest-neighbor rasterization oracle in the tests, not by the
//! construction algorithm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DriveDirection, FIELD_LENGTH, FIELD_WIDTH};
use crate::ingest::{Frame, PlayerId, TeamSide};

use super::adjust_x;

pub type Point = (f64, f64);
/// Convex polygon, counter-clockwise, no closing repeat of the first vertex.
pub type Polygon = Vec<Point>;

/// Which players generate the tessellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoronoiVariant {
    AllPlayers,
    BcAndDefense,
}

/// Features of the ball-carrier's clipped Voronoi cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoronoiFeatures {
    /// x_adj of the cell perimeter point nearest the target endzone.
    pub close_adj: f64,
    /// x_adj of the cell perimeter point farthest from the target endzone.
    pub far_adj: f64,
    /// Cell area in square yards.
    pub area: f64,
    /// Area of the cell on the endzone side of the carrier.
    pub area_in_front: f64,
    /// All-players variant only: true when every cell edge not on the field
    /// boundary is shared with a teammate's cell.
    pub bubble: Option<bool>,
    /// Coincident generators were perturbed before tessellating.
    pub perturbed: bool,
}

#[derive(Debug, Error)]
pub enum VoronoiError {
    #[error("carrier `{0}` not present in frame")]
    CarrierMissing(String),
    #[error("need at least 2 distinct generator points, got {0}")]
    TooFewGenerators(usize),
}

/// One tessellation generator.
#[derive(Debug, Clone)]
pub struct Site {
    pub pos: Point,
    pub player_id: PlayerId,
    /// Offense player other than the carrier.
    pub teammate: bool,
}

fn field_rect() -> Polygon {
    vec![
        (0.0, 0.0),
        (FIELD_LENGTH, 0.0),
        (FIELD_LENGTH, FIELD_WIDTH),
        (0.0, FIELD_WIDTH),
    ]
}

/// Clip `poly` to the half-plane of points `p` with `dot(p - origin, n) <= bound`.
fn clip_half_plane(poly: &Polygon, n: Point, origin: Point, bound: f64) -> Polygon {
    let value = |p: Point| (p.0 - origin.0) * n.0 + (p.1 - origin.1) * n.1;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let va = value(a) - bound;
        let vb = value(b) - bound;
        if va <= 0.0 {
            out.push(a);
        }
        if (va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0) {
            let t = va / (va - vb);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

/// The clipped Voronoi cell of `sites[idx]`.
fn cell_polygon(sites: &[Point], idx: usize) -> Polygon {
    let c = sites[idx];
    let mut poly = field_rect();
    for (j, &s) in sites.iter().enumerate() {
        if j == idx || poly.is_empty() {
            continue;
        }
        // Perpendicular bisector: keep the side nearer the cell's own site.
        let n = (s.0 - c.0, s.1 - c.1);
        let mid = ((s.0 + c.0) / 2.0, (s.1 + c.1) / 2.0);
        poly = clip_half_plane(&poly, n, mid, 0.0);
    }
    poly
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &Polygon) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % poly.len()];
        twice += x1 * y2 - x2 * y1;
    }
    twice.abs() / 2.0
}

/// All clipped cells for a set of generator points, in input order.
/// Coincident generators are perturbed deterministically first.
pub fn voronoi_cells(points: &[Point]) -> Vec<Polygon> {
    let (points, _) = perturb_coincident(points.to_vec());
    (0..points.len()).map(|i| cell_polygon(&points, i)).collect()
}

/// Displace coincident generators by 1e-6 yd so the tessellation is defined.
/// Points are processed in input order (callers order by player id), so the
/// result is deterministic. Returns the points and whether any moved.
fn perturb_coincident(mut points: Vec<Point>) -> (Vec<Point>, bool) {
    const EPS: f64 = 1e-9;
    const STEP: f64 = 1e-6;
    const GOLDEN_ANGLE: f64 = 2.399963229728653;
    let mut perturbed = false;
    for i in 0..points.len() {
        let mut k = 0u32;
        while points[..i]
            .iter()
            .any(|p| (p.0 - points[i].0).abs() < EPS && (p.1 - points[i].1).abs() < EPS)
        {
            k += 1;
            perturbed = true;
            let angle = GOLDEN_ANGLE * k as f64;
            let (dx, dy) = (STEP * k as f64 * angle.cos(), STEP * k as f64 * angle.sin());
            points[i] = (
                (points[i].0 + dx).clamp(0.0, FIELD_LENGTH),
                (points[i].1 + dy).clamp(0.0, FIELD_WIDTH),
            );
        }
        let _ = k;
    }
    (points, perturbed)
}

/// Sites for a tessellation variant, ordered by player id within
/// carrier-first ordering so perturbation is input-order independent.
fn collect_sites(
    frame: &Frame,
    carrier_id: &PlayerId,
    variant: VoronoiVariant,
) -> Result<(Vec<Site>, usize), VoronoiError> {
    let mut sites: Vec<Site> = frame
        .players
        .iter()
        .filter(|p| match variant {
            VoronoiVariant::AllPlayers => true,
            VoronoiVariant::BcAndDefense => {
                p.team_side == TeamSide::Defense || &p.player_id == carrier_id
            }
        })
        .map(|p| Site {
            pos: (p.x, p.y),
            player_id: p.player_id.clone(),
            teammate: p.team_side == TeamSide::Offense && &p.player_id != carrier_id,
        })
        .collect();
    sites.sort_by(|a, b| a.player_id.cmp(&b.player_id));
    let carrier_idx = sites
        .iter()
        .position(|s| &s.player_id == carrier_id)
        .ok_or_else(|| VoronoiError::CarrierMissing(carrier_id.to_string()))?;
    if sites.len() < 2 {
        return Err(VoronoiError::TooFewGenerators(sites.len()));
    }
    Ok((sites, carrier_idx))
}

/// Voronoi features of the carrier's cell for one frame.
pub fn voronoi_features(
    frame: &Frame,
    carrier_id: &PlayerId,
    variant: VoronoiVariant,
    drive: DriveDirection,
) -> Result<VoronoiFeatures, VoronoiError> {
    let (sites, carrier_idx) = collect_sites(frame, carrier_id, variant)?;
    Ok(features_from_sites(&sites, carrier_idx, variant, drive))
}

/// Core feature computation on explicit sites; `sites` must contain at least
/// two entries and the carrier.
pub fn features_from_sites(
    sites: &[Site],
    carrier_idx: usize,
    variant: VoronoiVariant,
    drive: DriveDirection,
) -> VoronoiFeatures {
    let raw_points: Vec<Point> = sites.iter().map(|s| s.pos).collect();
    let (points, perturbed) = perturb_coincident(raw_points);
    let cell = cell_polygon(&points, carrier_idx);
    let area = polygon_area(&cell);

    let carrier_pos = points[carrier_idx];
    // Half-plane on the endzone side of the carrier's x. In adjusted terms
    // this is x_adj < bc_x_adj (clamped x_adj makes the whole endzone count
    // as "in front" unless the carrier is already inside it).
    let bc_x_adj = adjust_x(carrier_pos.0, drive);
    let area_in_front = if bc_x_adj == 0.0 {
        0.0
    } else {
        // Keep points with dot(p - carrier, n) <= 0: n points away from the
        // endzone, so the kept side is beyond the carrier toward it.
        let n = match drive {
            DriveDirection::TowardHighX => (-1.0, 0.0),
            DriveDirection::TowardLowX => (1.0, 0.0),
        };
        polygon_area(&clip_half_plane(&cell, n, carrier_pos, 0.0))
    };

    let (min_x, max_x) = cell.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    // Linear objective over a convex polygon: extremes are at vertices.
    let (close_adj, far_adj) = match drive {
        DriveDirection::TowardHighX => (adjust_x(max_x, drive), adjust_x(min_x, drive)),
        DriveDirection::TowardLowX => (adjust_x(min_x, drive), adjust_x(max_x, drive)),
    };

    let bubble = match variant {
        VoronoiVariant::AllPlayers => Some(cell_is_bubble(&cell, &points, sites, carrier_idx)),
        VoronoiVariant::BcAndDefense => None,
    };

    VoronoiFeatures {
        close_adj,
        far_adj,
        area,
        area_in_front,
        bubble,
        perturbed,
    }
}

/// True when every cell edge not on the field boundary is shared with a
/// teammate's cell. Each interior edge lies on the bisector with its
/// neighboring site: the edge midpoint is equidistant from the carrier and
/// that neighbor.
fn cell_is_bubble(cell: &Polygon, points: &[Point], sites: &[Site], carrier_idx: usize) -> bool {
    const BOUNDARY_EPS: f64 = 1e-7;
    const DIST_EPS: f64 = 1e-6;
    if cell.len() < 3 {
        return false;
    }
    let c = points[carrier_idx];
    for i in 0..cell.len() {
        let a = cell[i];
        let b = cell[(i + 1) % cell.len()];
        let edge_len2 = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
        if edge_len2 < 1e-18 {
            continue;
        }
        let m = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        let on_boundary = m.0.abs() < BOUNDARY_EPS
            || (m.0 - FIELD_LENGTH).abs() < BOUNDARY_EPS
            || m.1.abs() < BOUNDARY_EPS
            || (m.1 - FIELD_WIDTH).abs() < BOUNDARY_EPS;
        if on_boundary {
            continue;
        }
        let d_carrier = ((m.0 - c.0).powi(2) + (m.1 - c.1).powi(2)).sqrt();
        let mut shared_with_teammate = false;
        let mut shared_with_opponent = false;
        for (j, p) in points.iter().enumerate() {
            if j == carrier_idx {
                continue;
            }
            let d = ((m.0 - p.0).powi(2) + (m.1 - p.1).powi(2)).sqrt();
            if (d - d_carrier).abs() < DIST_EPS {
                if sites[j].teammate {
                    shared_with_teammate = true;
                } else {
                    shared_with_opponent = true;
                }
            }
        }
        if shared_with_opponent || !shared_with_teammate {
            return false;
        }
    }
    true
}

/// GeoJSON-style export of every cell in a frame, for external visualization.
pub fn cells_geojson(
    frame: &Frame,
    carrier_id: &PlayerId,
    variant: VoronoiVariant,
) -> Result<serde_json::Value, VoronoiError> {
    let (sites, carrier_idx) = collect_sites(frame, carrier_id, variant)?;
    let (points, _) = perturb_coincident(sites.iter().map(|s| s.pos).collect());
    let features: Vec<serde_json::Value> = (0..points.len())
        .map(|i| {
            let mut ring: Vec<[f64; 2]> = cell_polygon(&points, i)
                .iter()
                .map(|p| [p.0, p.1])
                .collect();
            if let Some(first) = ring.first().copied() {
                ring.push(first);
            }
            serde_json::json!({
                "type": "Feature",
                "properties": {
                    "player_id": sites[i].player_id.as_str(),
                    "carrier": i == carrier_idx,
                    "teammate": sites[i].teammate,
                },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [ring],
                },
            })
        })
        .collect();
    Ok(serde_json::json!({
        "type": "FeatureCollection",
        "frame_id": frame.frame_id,
        "features": features,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn site(id: &str, x: f64, y: f64, teammate: bool) -> Site {
        Site {
            pos: (x, y),
            player_id: PlayerId(id.into()),
            teammate,
        }
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| (rng.gen_range(0.0..FIELD_LENGTH), rng.gen_range(0.0..FIELD_WIDTH)))
            .collect()
    }

    /// Grid nearest-neighbor rasterization of cell area and area in front.
    fn raster_oracle(
        points: &[Point],
        idx: usize,
        drive: DriveDirection,
        step: f64,
    ) -> (f64, f64) {
        let carrier = points[idx];
        let nx = (FIELD_LENGTH / step).round() as usize;
        let ny = (FIELD_WIDTH / step).round() as usize;
        let mut area = 0.0;
        let mut in_front = 0.0;
        let cell_area = step * step;
        for ix in 0..nx {
            let x = (ix as f64 + 0.5) * step;
            for iy in 0..ny {
                let y = (iy as f64 + 0.5) * step;
                let mut best = usize::MAX;
                let mut best_d = f64::MAX;
                for (j, p) in points.iter().enumerate() {
                    let d = (x - p.0).powi(2) + (y - p.1).powi(2);
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                if best == idx {
                    area += cell_area;
                    let front = match drive {
                        DriveDirection::TowardHighX => x > carrier.0,
                        DriveDirection::TowardLowX => x < carrier.0,
                    };
                    if front && adjust_x(carrier.0, drive) > 0.0 {
                        in_front += cell_area;
                    }
                }
            }
        }
        (area, in_front)
    }

    #[test]
    fn two_site_bisector_example() {
        let sites = vec![
            site("bc", 30.0, 26.65, false),
            site("d1", 90.0, 26.65, false),
        ];
        let f = features_from_sites(&sites, 0, VoronoiVariant::BcAndDefense, DriveDirection::TowardLowX);
        assert!((f.area - 3198.0).abs() < 1e-9);
        assert!((f.area_in_front - 1599.0).abs() < 1e-9);
        assert_eq!(f.close_adj, 0.0);
        assert!((f.far_adj - 50.0).abs() < 1e-12);
        assert!(f.bubble.is_none());
        assert!(!f.perturbed);
    }

    #[test]
    fn cell_containing_endzone_has_zero_close_adj() {
        // Everyone else collapsed far behind the carrier.
        let mut sites = vec![site("bc", 20.0, 26.0, false)];
        for i in 0..11 {
            sites.push(site(&format!("d{i:02}"), 100.0, 10.0 + 3.0 * i as f64, false));
        }
        let f = features_from_sites(&sites, 0, VoronoiVariant::BcAndDefense, DriveDirection::TowardLowX);
        assert_eq!(f.close_adj, 0.0);
        assert!(f.area > 0.0);
    }

    #[test]
    fn duplicate_generators_are_perturbed_deterministically() {
        let sites = vec![
            site("a", 50.0, 26.0, false),
            site("b", 50.0, 26.0, true),
            site("c", 80.0, 26.0, false),
        ];
        let f1 = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardLowX);
        let f2 = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardLowX);
        assert!(f1.perturbed);
        assert_eq!(f1, f2);
        assert!(f1.area.is_finite() && f1.area > 0.0);
    }

    #[test]
    fn areas_sum_to_field_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let points = random_points(&mut rng, 22);
            let total: f64 = voronoi_cells(&points).iter().map(polygon_area).sum();
            let field = FIELD_LENGTH * FIELD_WIDTH;
            assert!(
                (total - field).abs() / field < 1e-6,
                "cells must tile the field: {total}"
            );
        }
    }

    #[test]
    fn features_invariant_to_generator_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points = random_points(&mut rng, 22);
        let mut sites: Vec<Site> = points
            .iter()
            .enumerate()
            .map(|(i, p)| site(&format!("p{i:02}"), p.0, p.1, i > 10))
            .collect();
        let f1 = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardHighX);
        // Same sites, reversed order; carrier moves to the end.
        sites.reverse();
        let f2 = features_from_sites(
            &sites,
            sites.len() - 1,
            VoronoiVariant::AllPlayers,
            DriveDirection::TowardHighX,
        );
        assert!((f1.area - f2.area).abs() < 1e-9);
        assert!((f1.area_in_front - f2.area_in_front).abs() < 1e-9);
        assert_eq!(f1.close_adj, f2.close_adj);
        assert_eq!(f1.far_adj, f2.far_adj);
        assert_eq!(f1.bubble, f2.bubble);
    }

    #[test]
    fn translation_shifts_extremes_and_keeps_interior_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tested = 0;
        'outer: for _ in 0..50 {
            let points: Vec<Point> = (0..22)
                .map(|_| (rng.gen_range(30.0..90.0), rng.gen_range(15.0..40.0)))
                .collect();
            let v = (3.0, 2.0);
            let moved: Vec<Point> = points.iter().map(|p| (p.0 + v.0, p.1 + v.1)).collect();
            // Pick the site whose cell stays interior before and after.
            for idx in 0..points.len() {
                let interior = |cell: &Polygon| {
                    cell.iter().all(|p| {
                        p.0 > 1e-6
                            && p.0 < FIELD_LENGTH - 1e-6
                            && p.1 > 1e-6
                            && p.1 < FIELD_WIDTH - 1e-6
                    })
                };
                let c1 = cell_polygon(&points, idx);
                let c2 = cell_polygon(&moved, idx);
                if !interior(&c1) || !interior(&c2) {
                    continue;
                }
                let a1 = polygon_area(&c1);
                let a2 = polygon_area(&c2);
                assert!((a1 - a2).abs() < 1e-6);
                let max_x1 = c1.iter().fold(f64::MIN, |m, p| m.max(p.0));
                let max_x2 = c2.iter().fold(f64::MIN, |m, p| m.max(p.0));
                assert!((max_x2 - max_x1 - v.0).abs() < 1e-6);
                tested += 1;
                if tested > 10 {
                    break 'outer;
                }
            }
        }
        assert!(tested > 0, "no interior cells found");
    }

    #[test]
    fn matches_rasterization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let points = random_points(&mut rng, 22);
            let sites: Vec<Site> = points
                .iter()
                .enumerate()
                .map(|(i, p)| site(&format!("p{i:02}"), p.0, p.1, false))
                .collect();
            let f = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardLowX);
            let (area, in_front) = raster_oracle(&points, 0, DriveDirection::TowardLowX, 0.1);
            assert!((f.area - area).abs() / f.area.max(1.0) < 0.01, "{} vs {area}", f.area);
            assert!(
                (f.area_in_front - in_front).abs() / f.area.max(1.0) < 0.01,
                "{} vs {in_front}",
                f.area_in_front
            );
        }
    }

    #[test]
    fn bubble_requires_teammates_on_all_interior_edges() {
        // Carrier enclosed by 4 teammates in a diamond: every interior edge
        // of the carrier's cell is shared with a teammate.
        let mut sites = vec![
            site("bc", 60.0, 26.0, false),
            site("o1", 52.0, 26.0, true),
            site("o2", 68.0, 26.0, true),
            site("o3", 60.0, 18.0, true),
            site("o4", 60.0, 34.0, true),
        ];
        for i in 0..6 {
            sites.push(site(&format!("d{i}"), 95.0, 5.0 + 8.0 * i as f64, false));
        }
        let f = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardLowX);
        assert_eq!(f.bubble, Some(true));

        // Replace one teammate with a defender: bubble breaks.
        sites[1].teammate = false;
        let f = features_from_sites(&sites, 0, VoronoiVariant::AllPlayers, DriveDirection::TowardLowX);
        assert_eq!(f.bubble, Some(false));
    }
}
