//! Discrete geometry of the square lattice: vertices, primal and dual
//! edges, directions, hyperplane bands, segments and cones.
//!
//! Tilted hyperplanes are discretized as unit-width bands: the band of
//! slice `t` is `{x : tL <= <x, w> < tL + 1}`. A nearest-neighbour step moves
//! `<x, w>` by at most one, so every lattice path crossing the hyperplane
//! visits the band. For axis directions the band is exactly one column or
//! one row.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is not in the band of slice {t}")]
    NotInBand { x: i32, y: i32, t: i64 },
    #[error("direction vector must be finite and non-zero")]
    DegenerateDirection,
    #[error("slab thickness must be positive")]
    ZeroThickness,
}

/// A vertex of Z^2 (or of the dual lattice, when paired with [`Lattice::Dual`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i32,
    pub y: i32,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        LatticePoint { x, y }
    }

    pub fn as_vec(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }

    /// The four nearest neighbours, in the order right, up, left, down.
    pub fn neighbours(self) -> [LatticePoint; 4] {
        [
            LatticePoint::new(self.x + 1, self.y),
            LatticePoint::new(self.x, self.y + 1),
            LatticePoint::new(self.x - 1, self.y),
            LatticePoint::new(self.x, self.y - 1),
        ]
    }

    pub fn linf_norm(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lattice {
    Primal,
    /// Shifted by (1/2, 1/2): dual vertex `(i, j)` sits at `(i + 1/2, j + 1/2)`.
    Dual,
}

/// An edge, identified by its lower-left endpoint and orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub endpoint: LatticePoint,
    pub orientation: Orientation,
    pub lattice: Lattice,
}

impl EdgeId {
    pub const fn horizontal(x: i32, y: i32) -> Self {
        EdgeId {
            endpoint: LatticePoint::new(x, y),
            orientation: Orientation::Horizontal,
            lattice: Lattice::Primal,
        }
    }

    pub const fn vertical(x: i32, y: i32) -> Self {
        EdgeId {
            endpoint: LatticePoint::new(x, y),
            orientation: Orientation::Vertical,
            lattice: Lattice::Primal,
        }
    }

    /// Edge between two adjacent vertices, in either order.
    pub fn between(a: LatticePoint, b: LatticePoint) -> Option<EdgeId> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (hi.x - lo.x, hi.y - lo.y) {
            (1, 0) => Some(EdgeId::horizontal(lo.x, lo.y)),
            (0, 1) => Some(EdgeId::vertical(lo.x, lo.y)),
            _ => None,
        }
    }

    pub fn endpoints(self) -> (LatticePoint, LatticePoint) {
        let a = self.endpoint;
        let b = match self.orientation {
            Orientation::Horizontal => LatticePoint::new(a.x + 1, a.y),
            Orientation::Vertical => LatticePoint::new(a.x, a.y + 1),
        };
        (a, b)
    }

    /// Real-plane coordinates of the endpoints, accounting for the dual shift.
    pub fn embedded_endpoints(self) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.endpoints();
        let shift = match self.lattice {
            Lattice::Primal => 0.0,
            Lattice::Dual => 0.5,
        };
        (
            [a.x as f64 + shift, a.y as f64 + shift],
            [b.x as f64 + shift, b.y as f64 + shift],
        )
    }

    pub fn midpoint(self) -> [f64; 2] {
        let (a, b) = self.embedded_endpoints();
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }
}

/// The unique edge of the other lattice crossing `e`. Involutive.
pub fn dual_edge(e: EdgeId) -> EdgeId {
    let LatticePoint { x, y } = e.endpoint;
    let (endpoint, orientation) = match (e.lattice, e.orientation) {
        (Lattice::Primal, Orientation::Horizontal) => ((x, y - 1), Orientation::Vertical),
        (Lattice::Primal, Orientation::Vertical) => ((x - 1, y), Orientation::Horizontal),
        (Lattice::Dual, Orientation::Horizontal) => ((x + 1, y), Orientation::Vertical),
        (Lattice::Dual, Orientation::Vertical) => ((x, y + 1), Orientation::Horizontal),
    };
    EdgeId {
        endpoint: LatticePoint::new(endpoint.0, endpoint.1),
        orientation,
        lattice: match e.lattice {
            Lattice::Primal => Lattice::Dual,
            Lattice::Dual => Lattice::Primal,
        },
    }
}

/// Closest vertex of Z^2 to `v`; ties go to the top-left candidate
/// (smallest x, then largest y).
pub fn round_to_lattice(v: [f64; 2]) -> LatticePoint {
    debug_assert!(v[0].is_finite() && v[1].is_finite());
    let (fx, fy) = (v[0].floor(), v[1].floor());
    let mut best: Option<(f64, LatticePoint)> = None;
    for dx in [0.0, 1.0] {
        for dy in [0.0, 1.0] {
            let (cx, cy) = (fx + dx, fy + dy);
            let d2 = (v[0] - cx).powi(2) + (v[1] - cy).powi(2);
            let cand = LatticePoint::new(cx as i32, cy as i32);
            best = match best {
                None => Some((d2, cand)),
                Some((bd, bp)) => {
                    let better = d2 < bd
                        || (d2 == bd && (cand.x < bp.x || (cand.x == bp.x && cand.y > bp.y)));
                    if better {
                        Some((d2, cand))
                    } else {
                        Some((bd, bp))
                    }
                }
            };
        }
    }
    best.expect("four candidates").1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    PlusX,
    PlusY,
    MinusX,
    MinusY,
}

/// A unit direction `w` with its positive rotation `w_perp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Direction {
    w: [f64; 2],
    perp: [f64; 2],
    #[serde(skip)]
    axis: Option<AxisTag>,
}

// serde needs the private enum to be Copy + PartialEq only.
#[derive(Clone, Copy, Debug, PartialEq)]
struct AxisTag(Axis);

impl TryFrom<[f64; 2]> for Direction {
    type Error = GeometryError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Direction::new(v)
    }
}

impl From<Direction> for [f64; 2] {
    fn from(d: Direction) -> Self {
        d.w
    }
}

impl Direction {
    pub fn new(v: [f64; 2]) -> Result<Direction, GeometryError> {
        let norm = v[0].hypot(v[1]);
        if !norm.is_finite() || norm == 0.0 {
            return Err(GeometryError::DegenerateDirection);
        }
        let w = [v[0] / norm, v[1] / norm];
        let axis = match (v[0] == 0.0, v[1] == 0.0) {
            (false, true) if v[0] > 0.0 => Some(Axis::PlusX),
            (false, true) => Some(Axis::MinusX),
            (true, false) if v[1] > 0.0 => Some(Axis::PlusY),
            (true, false) => Some(Axis::MinusY),
            _ => None,
        };
        let w = match axis {
            Some(Axis::PlusX) => [1.0, 0.0],
            Some(Axis::MinusX) => [-1.0, 0.0],
            Some(Axis::PlusY) => [0.0, 1.0],
            Some(Axis::MinusY) => [0.0, -1.0],
            None => w,
        };
        Ok(Direction {
            w,
            perp: [-w[1], w[0]],
            axis: axis.map(AxisTag),
        })
    }

    /// Direction at angle `theta` (radians) from the positive x axis.
    /// Multiples of pi/2 snap to the exact axis vectors.
    pub fn from_angle(theta: f64) -> Direction {
        let quarter = theta / std::f64::consts::FRAC_PI_2;
        if (quarter - quarter.round()).abs() < 1e-12 {
            let k = (quarter.round() as i64).rem_euclid(4);
            let v = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]][k as usize];
            return Direction::new(v).expect("axis vector");
        }
        Direction::new([theta.cos(), theta.sin()]).expect("unit vector")
    }

    pub fn e1() -> Direction {
        Direction::from_angle(0.0)
    }

    pub fn e2() -> Direction {
        Direction::from_angle(std::f64::consts::FRAC_PI_2)
    }

    pub fn w(&self) -> [f64; 2] {
        self.w
    }

    pub fn perp(&self) -> [f64; 2] {
        self.perp
    }

    pub fn angle(&self) -> f64 {
        self.w[1].atan2(self.w[0])
    }

    pub fn is_axis(&self) -> bool {
        self.axis.is_some()
    }

    /// `<p, w>`; exact for axis directions.
    #[inline]
    pub fn along(&self, p: LatticePoint) -> f64 {
        match self.axis {
            Some(AxisTag(Axis::PlusX)) => p.x as f64,
            Some(AxisTag(Axis::MinusX)) => -(p.x as f64),
            Some(AxisTag(Axis::PlusY)) => p.y as f64,
            Some(AxisTag(Axis::MinusY)) => -(p.y as f64),
            None => p.x as f64 * self.w[0] + p.y as f64 * self.w[1],
        }
    }

    /// `<p, w_perp>`; exact for axis directions.
    #[inline]
    pub fn across(&self, p: LatticePoint) -> f64 {
        match self.axis {
            Some(AxisTag(Axis::PlusX)) => p.y as f64,
            Some(AxisTag(Axis::MinusX)) => -(p.y as f64),
            Some(AxisTag(Axis::PlusY)) => -(p.x as f64),
            Some(AxisTag(Axis::MinusY)) => p.x as f64,
            None => p.x as f64 * self.perp[0] + p.y as f64 * self.perp[1],
        }
    }

    /// Mirror image under the reflection `y -> -y`.
    pub fn reflect_x_axis(&self) -> Direction {
        Direction::new([self.w[0], -self.w[1]]).expect("unit vector")
    }

    /// Mirror image under the reflection across the diagonal `x = y`.
    pub fn reflect_diagonal(&self) -> Direction {
        Direction::new([self.w[1], self.w[0]]).expect("unit vector")
    }
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Index of the slab band containing a point: the unique `t` with
/// `tL <= <p, w> < tL + 1`, or `None` when `p` lies strictly between bands.
pub fn band_index(dir: &Direction, thickness: u32, p: LatticePoint) -> Option<i64> {
    let s = dir.along(p);
    let l = thickness as f64;
    let t = (s / l).floor();
    if s - t * l < 1.0 {
        Some(t as i64)
    } else {
        None
    }
}

/// The smallest `t` such that `p` lies in the discretized half-space
/// `H_{<=t} = {x : <x, w> < tL + 1}`.
#[inline]
pub fn slab_of(dir: &Direction, thickness: u32, p: LatticePoint) -> i64 {
    let s = dir.along(p);
    let l = thickness as f64;
    // <p,w> < tL + 1  <=>  t > (s - 1)/L
    let t = ((s - 1.0) / l).floor() + 1.0;
    t as i64
}

/// One slice of the exploration: band `t` of thickness `thickness` along `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub direction: Direction,
    pub thickness: u32,
    pub t: i64,
}

impl SliceSpec {
    pub fn new(direction: Direction, thickness: u32, t: i64) -> Result<SliceSpec, GeometryError> {
        if thickness == 0 {
            return Err(GeometryError::ZeroThickness);
        }
        Ok(SliceSpec {
            direction,
            thickness,
            t,
        })
    }

    pub fn band_contains(&self, p: LatticePoint) -> bool {
        band_index(&self.direction, self.thickness, p) == Some(self.t)
    }

    /// Half-space membership `<p, w> < tL + 1`.
    pub fn halfspace_contains(&self, p: LatticePoint) -> bool {
        slab_of(&self.direction, self.thickness, p) <= self.t
    }
}

/// All vertices of `Lambda_radius` lying in the band of `spec`. An empty
/// result means the box is too small to meet the band.
pub fn halfspace_band_vertices(spec: &SliceSpec, radius: i32) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    for x in -radius..=radius {
        for y in -radius..=radius {
            let p = LatticePoint::new(x, y);
            if spec.band_contains(p) {
                out.push(p);
            }
        }
    }
    out
}

/// Segment index `k = floor(<p, w_perp> / L)` of a band vertex.
pub fn segment_of(p: LatticePoint, spec: &SliceSpec) -> Result<i64, GeometryError> {
    if !spec.band_contains(p) {
        return Err(GeometryError::NotInBand {
            x: p.x,
            y: p.y,
            t: spec.t,
        });
    }
    Ok(segment_index(&spec.direction, spec.thickness, p))
}

#[inline]
pub(crate) fn segment_index(dir: &Direction, thickness: u32, p: LatticePoint) -> i64 {
    (dir.across(p) / thickness as f64).floor() as i64
}

/// Cone `{z : |<z - apex, w_perp>| <= alpha <z - apex, w>}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub alpha: f64,
    pub apex: [f64; 2],
    pub direction: Direction,
}

impl ConeSpec {
    pub fn contains(&self, z: [f64; 2]) -> bool {
        let d = [z[0] - self.apex[0], z[1] - self.apex[1]];
        dot(d, self.direction.perp()).abs() <= self.alpha * dot(d, self.direction.w())
    }
}

pub fn cone_contains(cone: &ConeSpec, z: [f64; 2]) -> bool {
    cone.contains(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_lattice([5.0, 0.0]), LatticePoint::new(5, 0));
        assert_eq!(round_to_lattice([0.5, 0.0]), LatticePoint::new(0, 0));
        assert_eq!(round_to_lattice([0.5, 0.5]), LatticePoint::new(0, 1));
        assert_eq!(round_to_lattice([-0.5, -0.5]), LatticePoint::new(-1, 0));
    }

    #[test]
    fn axis_bands() {
        let spec = SliceSpec::new(Direction::e1(), 4, 1).unwrap();
        let band = halfspace_band_vertices(&spec, 8);
        assert_eq!(band.len(), 17);
        assert!(band.iter().all(|p| p.x == 4));
        assert_eq!(band.first().unwrap().y, -8);

        let spec = SliceSpec::new(Direction::e2(), 3, 0).unwrap();
        let band = halfspace_band_vertices(&spec, 4);
        assert_eq!(band.len(), 9);
        assert!(band.iter().all(|p| p.y == 0));
    }

    #[test]
    fn diagonal_band_matches_enumeration() {
        let s2 = std::f64::consts::SQRT_2;
        let spec = SliceSpec::new(Direction::new([1.0, 1.0]).unwrap(), 4, 1).unwrap();
        let got = halfspace_band_vertices(&spec, 10);
        let mut want = Vec::new();
        for x in -10..=10 {
            for y in -10..=10 {
                let s = (x + y) as f64 / s2;
                if (4.0..5.0).contains(&s) {
                    want.push(LatticePoint::new(x, y));
                }
            }
        }
        assert_eq!(got, want);
        assert!(!got.is_empty());
    }

    #[test]
    fn band_missing_the_box_is_empty() {
        let spec = SliceSpec::new(Direction::e1(), 4, 5).unwrap();
        assert!(halfspace_band_vertices(&spec, 8).is_empty());
    }

    #[test]
    fn segment_examples() {
        let spec = SliceSpec::new(Direction::e1(), 4, 1).unwrap();
        assert_eq!(segment_of(LatticePoint::new(4, 0), &spec), Ok(0));
        assert_eq!(segment_of(LatticePoint::new(4, -1), &spec), Ok(-1));
        assert_eq!(segment_of(LatticePoint::new(4, 7), &spec), Ok(1));
        assert!(matches!(
            segment_of(LatticePoint::new(3, 0), &spec),
            Err(GeometryError::NotInBand { .. })
        ));
    }

    #[test]
    fn cone_examples() {
        let cone = ConeSpec {
            alpha: 4.0,
            apex: [0.0, 0.0],
            direction: Direction::e1(),
        };
        assert!(cone_contains(&cone, [1.0, 4.0]));
        assert!(!cone_contains(&cone, [1.0, 4.01]));
        assert!(!cone_contains(&cone, [-1.0, 0.0]));
    }

    #[test]
    fn dual_edge_examples() {
        let h = EdgeId::horizontal(0, 0);
        let d = dual_edge(h);
        assert_eq!(d.orientation, Orientation::Vertical);
        assert_eq!(d.lattice, Lattice::Dual);
        // the dual edge crosses the primal one at its midpoint
        assert_eq!(d.midpoint(), h.midpoint());
        assert_eq!(dual_edge(d), h);

        let v = EdgeId::vertical(2, 3);
        let dv = dual_edge(v);
        assert_eq!(dv.orientation, Orientation::Horizontal);
        assert_eq!(dv.midpoint(), v.midpoint());
        assert_eq!(dual_edge(dv), v);
    }

    #[test]
    fn direction_frame() {
        let d = Direction::from_angle(0.3);
        let (w, n) = (d.w(), d.perp());
        assert!((dot(w, w) - 1.0).abs() < 1e-12);
        assert!(dot(w, n).abs() < 1e-12);
        // positive rotation
        assert!((w[0] * n[1] - w[1] * n[0] - 1.0).abs() < 1e-12);
        assert_eq!(Direction::e1().perp(), [0.0, 1.0]);
    }

    #[test]
    fn slab_of_axis() {
        let d = Direction::e1();
        assert_eq!(slab_of(&d, 4, LatticePoint::new(0, 3)), 0);
        assert_eq!(slab_of(&d, 4, LatticePoint::new(4, 0)), 1);
        assert_eq!(slab_of(&d, 4, LatticePoint::new(5, 0)), 2);
        assert_eq!(slab_of(&d, 4, LatticePoint::new(-3, 0)), 0);
        assert_eq!(slab_of(&d, 4, LatticePoint::new(-4, 0)), -1);
    }

    proptest! {
        #[test]
        fn rounding_minimizes_distance(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let r = round_to_lattice([x, y]);
            let d = |p: LatticePoint| (x - p.x as f64).powi(2) + (y - p.y as f64).powi(2);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let c = LatticePoint::new(r.x + dx, r.y + dy);
                    prop_assert!(d(r) <= d(c));
                }
            }
        }

        #[test]
        fn segments_tile_each_band(theta in 0.0f64..6.283, l in 1u32..6, t in -3i64..4) {
            let dir = Direction::from_angle(theta);
            let spec = SliceSpec::new(dir, l, t).unwrap();
            for p in halfspace_band_vertices(&spec, 20) {
                let k = segment_of(p, &spec).unwrap();
                let s = dir.across(p);
                prop_assert!(s >= (k * l as i64) as f64 && s < ((k + 1) * l as i64) as f64);
                prop_assert_eq!(band_index(&dir, l, p), Some(t));
                prop_assert_eq!(slab_of(&dir, l, p), t);
            }
        }

        #[test]
        fn cone_monotone_in_alpha(a in 0.01f64..10.0, extra in 0.0f64..10.0,
                                  x in -20.0f64..20.0, y in -20.0f64..20.0, theta in 0.0f64..6.283) {
            let dir = Direction::from_angle(theta);
            let small = ConeSpec { alpha: a, apex: [0.5, -0.25], direction: dir };
            let big = ConeSpec { alpha: a + extra, ..small };
            if small.contains([x, y]) {
                prop_assert!(big.contains([x, y]));
            }
        }

        #[test]
        fn dual_edge_is_involutive(x in -100i32..100, y in -100i32..100, h in any::<bool>()) {
            let e = if h { EdgeId::horizontal(x, y) } else { EdgeId::vertical(x, y) };
            prop_assert_eq!(dual_edge(dual_edge(e)), e);
            prop_assert_eq!(dual_edge(e).midpoint(), e.midpoint());
        }
    }
}
