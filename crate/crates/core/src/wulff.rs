//! Direction-resolved drift, the map `w -> v(w)`, the two correlation-length
//! norms and the shapes they bound.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explore::ExplorationTrace;
use crate::geometry::Direction;
use crate::observables::LengthEstimate;

#[derive(Debug, Error, PartialEq)]
pub enum WulffError {
    #[error("need at least {needed} traces alive at slice {t}, found {found}")]
    TooFewTraces { needed: usize, found: usize, t: i64 },
    #[error("angle map is not increasing between grid points {0} and {1}")]
    NotMonotone(usize, usize),
    #[error("grid must hold 4k directions ordered by angle starting at e1")]
    BadGrid,
}

/// Drift per slice and spread of the lateral coordinate, in units of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub mu: f64,
    pub mu_stderr: f64,
    pub sigma: f64,
    pub sigma_stderr: f64,
    pub traces: usize,
}

/// Drift from the lateral displacement between pre-renewal times inside
/// `[lo, hi]`. Each trace contributes the increment `D` of `X / L` from its
/// first to its last pre-renewal in the window and the elapsed slices `T`;
/// `mu = sum D / sum T` and `sigma^2 = sum (D - mu T)^2 / sum T`.
pub fn drift_from_traces<'a, I: IntoIterator<Item = &'a ExplorationTrace>>(
    traces: I,
    lo: i64,
    hi: i64,
) -> Result<DriftEstimate, WulffError> {
    let mut inc = Vec::new();
    for tr in traces {
        let mut inside = tr.pre_renewals.iter().filter(|&&s| s >= lo && s <= hi);
        let (Some(&a), Some(&b)) = (inside.next(), inside.next_back()) else {
            continue;
        };
        if let (Some(Some(xa)), Some(Some(xb))) = (tr.x.get(a as usize), tr.x.get(b as usize)) {
            inc.push(((xb - xa) / tr.thickness as f64, (b - a) as f64));
        }
    }
    if inc.len() < 10 {
        return Err(WulffError::TooFewTraces {
            needed: 10,
            found: inc.len(),
            t: hi,
        });
    }
    let n = inc.len() as f64;
    let st: f64 = inc.iter().map(|c| c.1).sum();
    let mu = inc.iter().map(|c| c.0).sum::<f64>() / st;
    let e2: Vec<f64> = inc.iter().map(|(d, t)| (d - mu * t).powi(2)).collect();
    let s2 = e2.iter().sum::<f64>() / st;
    // Ratio-estimator variances, treating traces as independent clusters.
    let u: Vec<f64> = e2.iter().zip(&inc).map(|(e, c)| e - s2 * c.1).collect();
    let var_s2 = u.iter().map(|x| x * x).sum::<f64>() / (st * st) * n / (n - 1.0);
    let sigma = s2.sqrt();
    Ok(DriftEstimate {
        mu,
        mu_stderr: (e2.iter().sum::<f64>() * n / (n - 1.0)).sqrt() / st,
        sigma,
        sigma_stderr: var_s2.sqrt() / (2.0 * sigma),
        traces: inc.len(),
    })
}

/// Everything measured along one normal direction `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionProfile {
    pub w: Direction,
    /// Half-space survival length in slabs of `slab` lattice units.
    pub zeta: LengthEstimate,
    pub slab: f64,
    pub drift: DriftEstimate,
    pub v_of_w: Direction,
    pub xi_star: f64,
    pub xi_star_stderr: f64,
    /// `xi(v(w)) = xi*(w) / <v(w), w>`.
    pub xi_along_v: f64,
    pub xi_along_v_stderr: f64,
}

impl DirectionProfile {
    pub fn new(w: Direction, zeta: LengthEstimate, slab: f64, drift: DriftEstimate) -> DirectionProfile {
        let (wv, pv) = (w.w(), w.perp());
        let mu = drift.mu;
        let v_of_w = Direction::new([wv[0] + mu * pv[0], wv[1] + mu * pv[1]]).expect("non-zero");
        let xi_star = zeta.value * slab;
        let xi_star_stderr = zeta.stderr * slab;
        let stretch = (1.0 + mu * mu).sqrt();
        let xi_along_v = xi_star * stretch;
        let xi_along_v_stderr = ((stretch * xi_star_stderr).powi(2)
            + (xi_star * mu / stretch * drift.mu_stderr).powi(2))
        .sqrt();
        DirectionProfile {
            w,
            zeta,
            slab,
            drift,
            v_of_w,
            xi_star,
            xi_star_stderr,
            xi_along_v,
            xi_along_v_stderr,
        }
    }

    pub fn theta_w(&self) -> f64 {
        self.w.angle()
    }

    pub fn theta_v(&self) -> f64 {
        self.v_of_w.angle()
    }

    /// Same profile under a map of the plane that sends `w` to `w2`;
    /// `flip` for orientation-reversing maps, which negate the drift.
    fn mapped(&self, w2: Direction, flip: bool) -> DirectionProfile {
        let mut drift = self.drift;
        if flip {
            drift.mu = -drift.mu;
        }
        DirectionProfile::new(w2, self.zeta.clone(), self.slab, drift)
    }
}

/// Angles `j pi / (2 per_quadrant)` for `j = 0..=per_quadrant`, covering one
/// closed quadrant.
pub fn quadrant_grid(per_quadrant: usize) -> Vec<Direction> {
    (0..=per_quadrant)
        .map(|j| Direction::from_angle(j as f64 * FRAC_PI_2 / per_quadrant as f64))
        .collect()
}

/// Symmetry check and symmetrization of profiles measured on a closed
/// quadrant grid (from `quadrant_grid`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Symmetrized {
    /// Profiles on the full circle, `4 * per_quadrant` directions by angle.
    pub profiles: Vec<DirectionProfile>,
    /// Largest `|xi*(theta) - xi*(pi/2 - theta)| / joint stderr`.
    pub max_xi_star_asymmetry: f64,
    /// Largest `|mu(theta) + mu(pi/2 - theta)| / joint stderr`.
    pub max_mu_asymmetry: f64,
}

/// Average each profile with its mirror image across the diagonal and across
/// the axes, then extend by quarter turns.
pub fn symmetrize(quadrant: &[DirectionProfile]) -> Result<Symmetrized, WulffError> {
    let k = quadrant.len().checked_sub(1).ok_or(WulffError::BadGrid)?;
    if k == 0 {
        return Err(WulffError::BadGrid);
    }
    let mut max_xi: f64 = 0.0;
    let mut max_mu: f64 = 0.0;
    let mut sym = Vec::with_capacity(k);
    for j in 0..k {
        let a = &quadrant[j];
        let b = &quadrant[k - j];
        let se_xi = a.xi_star_stderr.hypot(b.xi_star_stderr);
        let se_mu = a.drift.mu_stderr.hypot(b.drift.mu_stderr);
        if j != k - j {
            max_xi = max_xi.max((a.xi_star - b.xi_star).abs() / se_xi);
        }
        max_mu = max_mu.max((a.drift.mu + b.drift.mu).abs() / se_mu);
        let zeta = LengthEstimate {
            value: 0.5 * (a.zeta.value + b.zeta.value),
            stderr: 0.5 * a.zeta.stderr.hypot(b.zeta.stderr),
            ..a.zeta.clone()
        };
        let mut mu = 0.5 * (a.drift.mu - b.drift.mu);
        if j == 0 {
            // e1 is also fixed by y -> -y, which negates the drift.
            mu = 0.0;
        }
        let drift = DriftEstimate {
            mu,
            mu_stderr: 0.5 * se_mu,
            sigma: 0.5 * (a.drift.sigma + b.drift.sigma),
            sigma_stderr: 0.5 * a.drift.sigma_stderr.hypot(b.drift.sigma_stderr),
            traces: a.drift.traces + b.drift.traces,
        };
        sym.push(DirectionProfile::new(a.w, zeta, a.slab, drift));
    }
    let mut profiles = Vec::with_capacity(4 * k);
    for q in 0..4 {
        for p in &sym {
            let w2 = Direction::from_angle(p.theta_w() + q as f64 * FRAC_PI_2);
            profiles.push(p.mapped(w2, false));
        }
    }
    Ok(Symmetrized {
        profiles,
        max_xi_star_asymmetry: max_xi,
        max_mu_asymmetry: max_mu,
    })
}

fn unwrap_angles(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut shift = 0.0;
    for (i, &x) in a.iter().enumerate() {
        if i > 0 {
            let prev = a[i - 1] + shift;
            while x + shift < prev - PI {
                shift += 2.0 * PI;
            }
            while x + shift > prev + PI {
                shift -= 2.0 * PI;
            }
        }
        out.push(x + shift);
    }
    out
}

/// Unwrapped `arg v(w)` along the grid and whether it strictly increases.
pub fn angle_map(profiles: &[DirectionProfile]) -> (Vec<f64>, bool) {
    let phi = unwrap_angles(&profiles.iter().map(|p| p.theta_v()).collect::<Vec<_>>());
    let ok = phi.windows(2).all(|w| w[1] > w[0]);
    (phi, ok)
}

/// Inverse of `w -> v(w)` by linear interpolation of the angle map on a
/// full-circle grid.
pub fn w_of_v(v: &Direction, profiles: &[DirectionProfile]) -> Result<Direction, WulffError> {
    let (phi, _) = angle_map(profiles);
    let theta = unwrap_angles(&profiles.iter().map(|p| p.theta_w()).collect::<Vec<_>>());
    let n = phi.len();
    for i in 0..n {
        if phi[(i + 1) % n] + if i + 1 == n { 2.0 * PI } else { 0.0 } <= phi[i] {
            return Err(WulffError::NotMonotone(i, (i + 1) % n));
        }
    }
    let mut a = v.angle();
    while a < phi[0] {
        a += 2.0 * PI;
    }
    while a >= phi[0] + 2.0 * PI {
        a -= 2.0 * PI;
    }
    for i in 0..n {
        let (p0, p1) = (phi[i], if i + 1 == n { phi[0] + 2.0 * PI } else { phi[i + 1] });
        let (t0, t1) = (theta[i], if i + 1 == n { theta[0] + 2.0 * PI } else { theta[i + 1] });
        if a >= p0 && a <= p1 {
            let s = (a - p0) / (p1 - p0);
            return Ok(Direction::from_angle(t0 + s * (t1 - t0)));
        }
    }
    Err(WulffError::BadGrid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeApprox {
    pub p: f64,
    pub q: f64,
    /// Boundary of the unit ball of `x -> |x| / xi(x/|x|)`: points `xi(v) v`.
    #[serde(rename = "U")]
    pub u: Vec<[f64; 2]>,
    /// Boundary points `xi*(w) w`.
    #[serde(rename = "W")]
    pub w: Vec<[f64; 2]>,
}

pub fn build_shapes(profiles: &[DirectionProfile], p: f64, q: f64) -> ShapeApprox {
    ShapeApprox {
        p,
        q,
        u: profiles
            .iter()
            .map(|pr| {
                let v = pr.v_of_w.w();
                [pr.xi_along_v * v[0], pr.xi_along_v * v[1]]
            })
            .collect(),
        w: profiles
            .iter()
            .map(|pr| {
                let w = pr.w.w();
                [pr.xi_star * w[0], pr.xi_star * w[1]]
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Largest `(xi(v_i) <v_i, w_j> - xi*(w_j)) / joint stderr` over
    /// pairs `i != j` with `<v_i, w_j> > 0`.
    pub max_violation_sigma: f64,
    pub worst_pair: (usize, usize),
    /// For each `w_j`: angle between `v(w_j)` and the maximizer over `v` of
    /// `xi(v) <v, w_j>` (refined by a parabola through the top three).
    pub argmax_angle_error: Vec<f64>,
    /// Largest relative gap between `xi(v_i)` and
    /// `min_j xi*(w_j) / <v_i, w_j>`.
    pub support_reconstruction: f64,
}

/// Compare `xi(v) <v, w> <= xi*(w)` over all grid pairs. With
/// `v = v(w_i)`, the left side is `xi*(w_i) (cos d + mu_i sin d)` where
/// `d = theta_j - theta_i`.
pub fn duality_check(profiles: &[DirectionProfile]) -> DualityReport {
    let n = profiles.len();
    let mut max_violation_sigma = f64::NEG_INFINITY;
    let mut worst_pair = (0, 0);
    let mut argmax_angle_error = Vec::with_capacity(n);
    let mut support_reconstruction: f64 = 0.0;
    let lhs = |i: usize, j: usize| -> (f64, f64) {
        let a = &profiles[i];
        let d = profiles[j].theta_w() - a.theta_w();
        let mu = a.drift.mu;
        let f = d.cos() + mu * d.sin();
        let se = ((f * a.xi_star_stderr).powi(2) + (a.xi_star * d.sin() * a.drift.mu_stderr).powi(2)).sqrt();
        (a.xi_star * f, se)
    };
    for j in 0..n {
        let wj = profiles[j].w.w();
        let mut vals = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            let c = crate::geometry::dot(profiles[i].v_of_w.w(), wj);
            if c <= 0.0 {
                continue;
            }
            let (l, se) = lhs(i, j);
            vals[i] = l;
            if i != j {
                let joint = se.hypot(profiles[j].xi_star_stderr);
                let z = (l - profiles[j].xi_star) / joint;
                if z > max_violation_sigma {
                    max_violation_sigma = z;
                    worst_pair = (i, j);
                }
            }
        }
        let best = (0..n)
            .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
            .expect("non-empty grid");
        let ang = |i: usize| profiles[i % n].theta_v();
        let (a0, a1, a2) = (ang(best + n - 1), ang(best), ang(best + 1));
        let (f0, f1, f2) = (vals[(best + n - 1) % n], vals[best], vals[(best + 1) % n]);
        // Angles relative to the middle point to avoid wrap-around.
        let rel = |a: f64| {
            let mut d = a - a1;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            d
        };
        let (x0, x2) = (rel(a0), rel(a2));
        let peak = if f0.is_finite() && f2.is_finite() {
            // Vertex of the parabola through (x0,f0), (0,f1), (x2,f2).
            let num = x0 * x0 * (f1 - f2) - x2 * x2 * (f1 - f0);
            let den = x0 * (f1 - f2) - x2 * (f1 - f0);
            if den.abs() > 0.0 {
                (0.5 * num / den).clamp(x0, x2)
            } else {
                0.0
            }
        } else {
            0.0
        };
        argmax_angle_error.push(rel(a1 + peak - profiles[j].theta_v() + a1).abs());
    }
    for i in 0..n {
        let vi = profiles[i].v_of_w.w();
        let rec = (0..n)
            .filter_map(|j| {
                let c = crate::geometry::dot(vi, profiles[j].w.w());
                (c > 0.0).then(|| profiles[j].xi_star / c)
            })
            .fold(f64::INFINITY, f64::min);
        support_reconstruction = support_reconstruction.max((rec / profiles[i].xi_along_v - 1.0).abs());
    }
    DualityReport {
        max_violation_sigma,
        worst_pair,
        argmax_angle_error,
        support_reconstruction,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Cross product of consecutive edges at each boundary point.
    pub turn: Vec<f64>,
    /// `turn / stderr`.
    pub z: Vec<f64>,
    /// Points where the turn is not significantly positive.
    pub facets: Vec<usize>,
    pub positive_fraction: f64,
}

/// Turning test on a closed polygon given in counter-clockwise order by
/// radii `r_k` along unit vectors `u_k` with radial errors `se_k`. A point is
/// flagged when its turn is below `z_min` standard errors.
pub fn convexity_check(points: &[[f64; 2]], se: &[f64], z_min: f64) -> ConvexityReport {
    let n = points.len();
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
    };
    let mut turn = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut facets = Vec::new();
    for k in 0..n {
        let (ia, ic) = ((k + n - 1) % n, (k + 1) % n);
        let (a, b, c) = (points[ia], points[k], points[ic]);
        let t = cross(a, b, c);
        // Propagate radial errors by finite differences along each radius.
        let mut var = 0.0;
        for (idx, which) in [(ia, 0), (k, 1), (ic, 2)] {
            let p = points[idx];
            let r = p[0].hypot(p[1]);
            if r == 0.0 {
                continue;
            }
            let h = 1e-6 * r;
            let bump = |q: [f64; 2]| [q[0] * (1.0 + h / r), q[1] * (1.0 + h / r)];
            let t2 = match which {
                0 => cross(bump(a), b, c),
                1 => cross(a, bump(b), c),
                _ => cross(a, b, bump(c)),
            };
            var += ((t2 - t) / h * se[idx]).powi(2);
        }
        let zk = if var > 0.0 { t / var.sqrt() } else if t > 0.0 { f64::INFINITY } else { 0.0 };
        if zk < z_min {
            facets.push(k);
        }
        turn.push(t);
        z.push(zk);
    }
    let positive_fraction = z.iter().filter(|&&v| v >= z_min).count() as f64 / n.max(1) as f64;
    ConvexityReport {
        turn,
        z,
        facets,
        positive_fraction,
    }
}

/// One row of `wulff.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffRow {
    pub run_id: String,
    pub theta_w: f64,
    pub zeta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub theta_v: f64,
    pub xi_star: f64,
    pub xi: f64,
    pub zeta_stderr: f64,
    pub mu_stderr: f64,
    pub sigma_stderr: f64,
    pub xi_star_stderr: f64,
    pub xi_stderr: f64,
}

impl WulffRow {
    pub fn new(run_id: &str, p: &DirectionProfile) -> WulffRow {
        WulffRow {
            run_id: run_id.to_string(),
            theta_w: p.theta_w(),
            zeta: p.zeta.value,
            mu: p.drift.mu,
            sigma: p.drift.sigma,
            theta_v: p.theta_v(),
            xi_star: p.xi_star,
            xi: p.xi_along_v,
            zeta_stderr: p.zeta.stderr,
            mu_stderr: p.drift.mu_stderr,
            sigma_stderr: p.drift.sigma_stderr,
            xi_star_stderr: p.xi_star_stderr,
            xi_stderr: p.xi_along_v_stderr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(theta: f64, xi_star: f64, mu: f64) -> DirectionProfile {
        DirectionProfile::new(
            Direction::from_angle(theta),
            LengthEstimate {
                value: xi_star,
                stderr: 1e-4,
                window: (0.0, 0.0),
                method: "synthetic".into(),
                censored: false,
            },
            1.0,
            DriftEstimate {
                mu,
                mu_stderr: 1e-4,
                sigma: 1.0,
                sigma_stderr: 1e-3,
                traces: 1000,
            },
        )
    }

    /// Support function of an ellipse with semi-axes a, b and the matching
    /// drift `h'/h`.
    fn ellipse(theta: f64, a: f64, b: f64) -> (f64, f64) {
        let h = ((a * theta.cos()).powi(2) + (b * theta.sin()).powi(2)).sqrt();
        let dh = (b * b - a * a) * theta.sin() * theta.cos() / h;
        (h, dh / h)
    }

    #[test]
    fn ellipse_is_self_consistent() {
        let n = 64;
        let profiles: Vec<_> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (h, mu) = ellipse(t, 2.0, 1.5);
                profile(t, h, mu)
            })
            .collect();
        let rep = duality_check(&profiles);
        assert!(rep.max_violation_sigma < 0.0, "{rep:?}");
        assert!(rep.argmax_angle_error.iter().all(|&e| e < 0.02));
        assert!(angle_map(&profiles).1);
        let shapes = build_shapes(&profiles, 0.0, 1.0);
        // U boundary points lie on the dual ellipse x^2/a^2 + y^2/b^2 = 1.
        for p in &shapes.u {
            let r = (p[0] / 2.0).powi(2) + (p[1] / 1.5).powi(2);
            assert!((r - 1.0).abs() < 1e-12, "{r}");
        }
        let v = Direction::from_angle(0.3);
        let w = w_of_v(&v, &profiles).unwrap();
        let back = profile(w.angle(), ellipse(w.angle(), 2.0, 1.5).0, ellipse(w.angle(), 2.0, 1.5).1);
        assert!((back.theta_v() - 0.3).abs() < 2.0 * PI / n as f64);
    }

    #[test]
    fn wrong_drift_violates_duality() {
        let n = 32;
        let profiles: Vec<_> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (h, mu) = ellipse(t, 2.0, 1.0);
                profile(t, h, -mu)
            })
            .collect();
        assert!(duality_check(&profiles).max_violation_sigma > 10.0);
    }

    #[test]
    fn circle_and_square() {
        let n = 32;
        let circle: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let rep = convexity_check(&circle, &vec![1e-6; n], 3.0);
        assert!(rep.facets.is_empty());
        assert_eq!(rep.positive_fraction, 1.0);
        let square: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let s = 1.0 / t.cos().abs().max(t.sin().abs());
                [s * t.cos(), s * t.sin()]
            })
            .collect();
        let rep = convexity_check(&square, &vec![1e-6; n], 3.0);
        assert_eq!(rep.facets.len(), n - 4);
    }

    #[test]
    fn symmetrization_extends_quadrant() {
        let q: Vec<_> = quadrant_grid(4)
            .iter()
            .map(|w| {
                let (h, mu) = ellipse(w.angle(), 2.0, 2.0);
                profile(w.angle(), h, mu)
            })
            .collect();
        let s = symmetrize(&q).unwrap();
        assert_eq!(s.profiles.len(), 16);
        assert!(s.max_xi_star_asymmetry < 1e-9);
        assert!((s.profiles[4].theta_w() - FRAC_PI_2).abs() < 1e-12);
    }
}
