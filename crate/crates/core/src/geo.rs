//! Planar geometry for spatial apportionment: polygon areas and exact
//! intersection areas, Voronoi cells clipped to a study zone, areal
//! interpolation of census population and mobile penetration rates.
//!
//! Coordinates are projected meters. Polygons are simple rings without holes,
//! stored counter-clockwise with the closing vertex implicit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Zone;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm2(self) -> f64 {
        self.dot(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a ring; a repeated closing vertex is dropped and the ring is
    /// reoriented counter-clockwise.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 distinct vertices"));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("polygon has non-finite coordinates"));
        }
        let mut poly = Self { vertices };
        if poly.signed_area() < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .expect("rectangle with distinct corners")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn scaled(&self, k: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x * k, p.y * k))
                .collect(),
        }
    }

    /// No two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let e: Vec<(Point, Point)> = self.edges().collect();
        let n = e.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // Adjacent edges may only share their common vertex.
                    let (a, b) = e[i];
                    let (c, d) = e[j];
                    let ab = b.sub(a);
                    let cd = d.sub(c);
                    if ab.cross(cd) == 0.0 && ab.dot(cd) < 0.0 {
                        return false;
                    }
                    continue;
                }
                if segments_touch(e[i].0, e[i].1, e[j].0, e[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd containment; boundary points are unspecified.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Clips this polygon to the half-plane `n·x <= c`. Returns `None` when
    /// nothing remains. Non-convex subjects may yield zero-width bridges; the
    /// area stays exact.
    fn clip_halfplane(&self, n: Point, c: f64) -> Option<Polygon> {
        let mut out = Vec::with_capacity(self.vertices.len() + 2);
        for (a, b) in self.edges() {
            let da = n.dot(a) - c;
            let db = n.dot(b) - c;
            if da <= 0.0 {
                out.push(a);
            }
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                out.push(a.lerp(b, da / (da - db)));
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        if out.len() < 3 {
            return None;
        }
        let poly = Polygon { vertices: out };
        (poly.area() > 0.0).then_some(poly)
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Parameters along `a→b` where it meets segment `c→d` (crossings, touches and
/// collinear-overlap endpoints).
fn split_params(a: Point, b: Point, c: Point, d: Point, eps: f64, out: &mut Vec<f64>) {
    let r = b.sub(a);
    let s = d.sub(c);
    let denom = r.cross(s);
    let qp = c.sub(a);
    let rr = r.norm2();
    if denom.abs() <= eps * r.norm2().sqrt() * s.norm2().sqrt() {
        // parallel; only collinear overlaps matter
        if qp.cross(r).abs() <= eps * rr.sqrt() * qp.norm2().sqrt().max(1.0) {
            for p in [c, d] {
                let t = p.sub(a).dot(r) / rr;
                if t > 0.0 && t < 1.0 {
                    out.push(t);
                }
            }
        }
        return;
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (-1e-12..=1.0 + 1e-12).contains(&u) && t > 0.0 && t < 1.0 {
        out.push(t);
    }
}

enum Side {
    Inside,
    Outside,
    /// On the boundary, along an edge with the given direction.
    Boundary(Point),
}

fn classify(poly: &Polygon, p: Point, eps: f64) -> Side {
    for (a, b) in poly.edges() {
        let ab = b.sub(a);
        let len2 = ab.norm2();
        let t = p.sub(a).dot(ab) / len2;
        if (-1e-12..=1.0 + 1e-12).contains(&t) {
            let dist = (p.sub(a).cross(ab)).abs() / len2.sqrt();
            if dist <= eps {
                return Side::Boundary(ab);
            }
        }
    }
    if poly.contains(p) {
        Side::Inside
    } else {
        Side::Outside
    }
}

/// Twice the signed area contributed by the parts of `a`'s boundary lying
/// inside `b`. Shared boundary stretches count only when `keep_shared` is set
/// and both rings traverse them in the same direction.
fn boundary_inside(a: &Polygon, b: &Polygon, keep_shared: bool, eps: f64) -> f64 {
    let mut total = 0.0;
    let mut ts = Vec::new();
    for (s, e) in a.edges() {
        ts.clear();
        ts.push(0.0);
        ts.push(1.0);
        for (c, d) in b.edges() {
            split_params(s, e, c, d, 1e-12, &mut ts);
        }
        ts.sort_by(|x, y| x.total_cmp(y));
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        for w in ts.windows(2) {
            let p0 = s.lerp(e, w[0]);
            let p1 = s.lerp(e, w[1]);
            let mid = s.lerp(e, 0.5 * (w[0] + w[1]));
            let take = match classify(b, mid, eps) {
                Side::Inside => true,
                Side::Outside => false,
                Side::Boundary(dir) => keep_shared && dir.dot(e.sub(s)) > 0.0,
            };
            if take {
                total += p0.cross(p1);
            }
        }
    }
    total
}

/// Exact area of `p ∩ q` for simple polygons, by integrating over the
/// boundary of the intersection.
pub fn intersection_area(p: &Polygon, q: &Polygon) -> f64 {
    let (plo, phi) = p.bbox();
    let (qlo, qhi) = q.bbox();
    if plo.x >= qhi.x || qlo.x >= phi.x || plo.y >= qhi.y || qlo.y >= phi.y {
        return 0.0;
    }
    let diag = (phi.x.max(qhi.x) - plo.x.min(qlo.x)).hypot(phi.y.max(qhi.y) - plo.y.min(qlo.y));
    let eps = diag * 1e-12;
    let twice = boundary_inside(p, q, true, eps) + boundary_inside(q, p, false, eps);
    (0.5 * twice).max(0.0)
}

/// Local tangent-plane projection of lat/lon degrees to meters about an origin.
/// Adequate for intra-city extents.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LocalProjection {
    pub lat0: f64,
    pub lon0: f64,
}

impl LocalProjection {
    const EARTH_RADIUS_M: f64 = 6_371_008.8;

    pub fn project(&self, lat: f64, lon: f64) -> Point {
        let k = self.lat0.to_radians().cos();
        Point::new(
            Self::EARTH_RADIUS_M * (lon - self.lon0).to_radians() * k,
            Self::EARTH_RADIUS_M * (lat - self.lat0).to_radians(),
        )
    }
}

/// A tower's coverage area. `polygon` is `None` when the tower's Voronoi
/// region misses the clip zone.
#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiCell {
    pub tower_id: String,
    pub site: Point,
    pub polygon: Option<Polygon>,
    pub user_count: u64,
}

impl VoronoiCell {
    pub fn area(&self) -> f64 {
        self.polygon.as_ref().map_or(0.0, Polygon::area)
    }
}

#[derive(Clone, Debug)]
pub struct VoronoiPartition {
    pub cells: Vec<VoronoiCell>,
    /// Tower ids dropped because another tower sits at the same point.
    pub duplicates: Vec<String>,
}

impl VoronoiPartition {
    /// Sets `user_count` from a tower → users map; unknown towers get 0.
    pub fn with_user_counts(mut self, counts: &HashMap<String, u64>) -> Self {
        for c in &mut self.cells {
            c.user_count = counts.get(&c.tower_id).copied().unwrap_or(0);
        }
        self
    }
}

/// Nearest-site tessellation of `clip`. Each cell is the clip polygon cut by
/// the perpendicular bisectors against every other site.
pub fn voronoi_partition(sites: &[(String, Point)], clip: &Zone) -> Result<VoronoiPartition> {
    if sites.is_empty() {
        return Err(Error::invalid("voronoi partition needs at least one site"));
    }
    let mut kept: Vec<(String, Point)> = Vec::with_capacity(sites.len());
    let mut duplicates = Vec::new();
    for (id, p) in sites {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::invalid(format!("site {id} has non-finite coordinates")));
        }
        if kept.iter().any(|(_, q)| q == p) {
            duplicates.push(id.clone());
        } else {
            kept.push((id.clone(), *p));
        }
    }
    let cells = kept
        .iter()
        .enumerate()
        .map(|(i, (id, si))| {
            let mut poly = Some(clip.polygon.clone());
            for (j, (_, sj)) in kept.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some(cur) = poly.as_ref() else { break };
                // |x - si|^2 <= |x - sj|^2  <=>  (sj - si)·x <= (|sj|^2 - |si|^2)/2
                let n = sj.sub(*si);
                let c = 0.5 * (sj.norm2() - si.norm2());
                poly = cur.clip_halfplane(n, c);
            }
            VoronoiCell {
                tower_id: id.clone(),
                site: *si,
                polygon: poly,
                user_count: 0,
            }
        })
        .collect();
    Ok(VoronoiPartition { cells, duplicates })
}

/// `P_d = Σ_τ A(d ∩ τ) · P_τ / A_τ` for every target zone, in target order.
pub fn areal_interpolate(targets: &[Zone], sources: &[Zone]) -> Result<Vec<(String, f64)>> {
    let mut src = Vec::with_capacity(sources.len());
    for s in sources {
        let pop = s.population.ok_or_else(|| {
            Error::invalid(format!("source zone {} has no population", s.zone_id))
        })?;
        let area = s.polygon.area();
        if !(area > 0.0) {
            return Err(Error::invalid(format!("source zone {} has zero area", s.zone_id)));
        }
        src.push((s, pop, area));
    }
    let mut out = Vec::with_capacity(targets.len());
    for t in targets {
        if !(t.polygon.area() > 0.0) {
            return Err(Error::invalid(format!("target zone {} has zero area", t.zone_id)));
        }
        let p: f64 = src
            .iter()
            .map(|(s, pop, area)| intersection_area(&t.polygon, &s.polygon) * pop / area)
            .sum();
        out.push((t.zone_id.clone(), p));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Penetration {
    pub rates: Vec<(String, f64)>,
    /// Districts with missing or zero population.
    pub skipped: Vec<String>,
}

/// `σ_d = (1/P_d) Σ_v A(d ∩ v) · T_v / A_v`.
pub fn penetration_rate(
    districts: &[Zone],
    cells: &[VoronoiCell],
    populations: &HashMap<String, f64>,
) -> Penetration {
    let mut out = Penetration::default();
    for d in districts {
        let pop = populations.get(&d.zone_id).copied().unwrap_or(0.0);
        if !(pop > 0.0) {
            out.skipped.push(d.zone_id.clone());
            continue;
        }
        let users: f64 = cells
            .iter()
            .filter_map(|c| c.polygon.as_ref().map(|p| (p, c.user_count)))
            .map(|(p, t)| intersection_area(&d.polygon, p) * t as f64 / p.area())
            .sum();
        out.rates.push((d.zone_id.clone(), users / pop));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_overlap(a: [f64; 4], b: [f64; 4]) -> f64 {
        let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
        let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
        w * h
    }

    #[test]
    fn area_and_orientation() {
        let p = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 2.0),
            Point::new(3.0, 2.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(p.area(), 6.0);
        assert!(p.signed_area() > 0.0);
        assert_eq!(p.vertices().len(), 4);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let p = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(!p.is_simple());
        assert!(Polygon::rect(0.0, 0.0, 1.0, 1.0).is_simple());
    }

    #[test]
    fn rectangle_intersections_match_direct_overlap() {
        let cases = [
            ([0.0, 0.0, 2.0, 2.0], [1.0, 1.0, 3.0, 3.0]),
            ([0.0, 0.0, 2.0, 2.0], [0.0, 0.0, 2.0, 2.0]),
            ([0.0, 0.0, 2.0, 2.0], [2.0, 0.0, 4.0, 2.0]),
            ([0.0, 0.0, 4.0, 1.0], [1.0, -1.0, 2.0, 3.0]),
            ([0.0, 0.0, 4.0, 4.0], [1.0, 1.0, 2.0, 2.0]),
            ([0.0, 0.0, 2.0, 2.0], [0.0, 1.0, 2.0, 5.0]),
            ([0.0, 0.0, 1.0, 1.0], [5.0, 5.0, 6.0, 6.0]),
        ];
        for (a, b) in cases {
            let pa = Polygon::rect(a[0], a[1], a[2], a[3]);
            let pb = Polygon::rect(b[0], b[1], b[2], b[3]);
            let want = rect_overlap(a, b);
            assert!((intersection_area(&pa, &pb) - want).abs() < 1e-12, "{a:?} {b:?}");
            assert!((intersection_area(&pb, &pa) - want).abs() < 1e-12, "{b:?} {a:?}");
        }
    }

    #[test]
    fn concave_intersection() {
        // L-shape: 2x2 square minus its top-right unit square (area 3).
        let l = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        assert_eq!(l.area(), 3.0);
        let r = Polygon::rect(0.5, 0.5, 2.5, 2.5);
        // overlap: [0.5,2]x[0.5,1] (1.5*0.5) + [0.5,1]x[1,2] (0.5*1)
        assert!((intersection_area(&l, &r) - 1.25).abs() < 1e-12);
        assert!((intersection_area(&r, &l) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn triangle_in_square() {
        let t = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        // the hypotenuse x+y=2 passes through (1,1) only
        assert!((intersection_area(&t, &sq) - 1.0).abs() < 1e-12);
        let sq2 = Polygon::rect(0.5, 0.5, 1.5, 1.5);
        // square minus the corner triangle above x+y=2 (area 0.5)
        assert!((intersection_area(&t, &sq2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_is_local_meters() {
        let p = LocalProjection {
            lat0: 0.0,
            lon0: 0.0,
        };
        let q = p.project(1.0, 0.0);
        assert!((q.y - 111_195.0).abs() < 10.0);
        assert_eq!(p.project(0.0, 0.0), Point::new(0.0, 0.0));
    }
}
