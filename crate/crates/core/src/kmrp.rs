//! Killed renewal processes: exact renewal sequences, the survival rate,
//! exponential tilting and simulation.
//!
//! A step law has interior atoms `(tau, dx, prob)` of total mass
//! `1 - kappa`; with probability `kappa` a step is killed instead. A killed
//! step dies at once: the process is alive at its renewal time and dead one
//! unit later.

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream;
use crate::stats::{ks_distance, ks_p_value, normal_cdf, normal_pdf, variance, NeumaierSum};

#[derive(Debug, Error, PartialEq)]
pub enum KmrpError {
    #[error("invalid step law: {0}")]
    InvalidLaw(String),
    #[error("step law is periodic: gcd of step lengths is {0}")]
    Periodic(u32),
    #[error("no root of A(z) = 1 below {0}: no mass gap")]
    NoMassGap(f64),
    #[error("declared tail rate {rate} violated at n = {n}: P[tau > n] = {tail}")]
    TailViolation { rate: f64, n: u32, tail: f64 },
    #[error("only {0} trajectories in the pinning bin, need 100")]
    BinTooThin(usize),
}

/// One atom of a step law: step length, displacement and probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, f64, f64)", into = "(u32, f64, f64)")]
pub struct Atom {
    pub tau: u32,
    pub x: f64,
    pub prob: f64,
}

impl From<(u32, f64, f64)> for Atom {
    fn from((tau, x, prob): (u32, f64, f64)) -> Atom {
        Atom { tau, x, prob }
    }
}

impl From<Atom> for (u32, f64, f64) {
    fn from(a: Atom) -> Self {
        (a.tau, a.x, a.prob)
    }
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLaw {
    pub kappa: f64,
    /// Law of the first step; its deficit `1 - sigma_1` is the probability of
    /// dying before the first renewal.
    pub initial: Vec<Atom>,
    pub interior: Vec<Atom>,
    /// Declared exponential tail rate `c` with `P[tau > n] <= e^{-cn}`.
    #[serde(default)]
    pub tail_rate: Option<f64>,
    /// Displacements are multiples of this spacing.
    #[serde(default = "unit")]
    pub x_lattice: f64,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl StepLaw {
    /// `tau = 1`, `dx = 0` with probability `1 - kappa`; certain first step.
    pub fn geometric(kappa: f64) -> StepLaw {
        StepLaw {
            kappa,
            initial: vec![Atom { tau: 1, x: 0.0, prob: 1.0 }],
            interior: vec![Atom { tau: 1, x: 0.0, prob: 1.0 - kappa }],
            tail_rate: None,
            x_lattice: 1.0,
        }
    }

    /// Interior law from step-length weights `a_tau` (no displacement).
    pub fn from_lengths(a: &[(u32, f64)]) -> StepLaw {
        let mass: f64 = a.iter().map(|t| t.1).sum();
        StepLaw {
            kappa: 1.0 - mass,
            initial: vec![Atom { tau: 1, x: 0.0, prob: 1.0 }],
            interior: a.iter().map(|&(tau, prob)| Atom { tau, x: 0.0, prob }).collect(),
            tail_rate: None,
            x_lattice: 1.0,
        }
    }

    pub fn from_json(s: &str) -> Result<StepLaw, KmrpError> {
        let law: StepLaw = serde_json::from_str(s).map_err(|e| KmrpError::InvalidLaw(e.to_string()))?;
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<(), KmrpError> {
        let bad = |m: &str| Err(KmrpError::InvalidLaw(m.to_string()));
        if !(0.0..1.0).contains(&self.kappa) {
            return bad("kappa must lie in [0, 1)");
        }
        if self.interior.is_empty() {
            return bad("empty interior law");
        }
        for a in self.interior.iter().chain(&self.initial) {
            if a.tau == 0 {
                return bad("step lengths must be at least 1");
            }
            if !(a.prob >= 0.0) || !a.x.is_finite() {
                return bad("negative or non-finite atom");
            }
        }
        let mass = self.interior_mass();
        if (mass + self.kappa - 1.0).abs() > 1e-12 {
            return Err(KmrpError::InvalidLaw(format!(
                "interior mass {mass} + kappa {} != 1",
                self.kappa
            )));
        }
        let s1 = self.sigma1();
        if !(s1 > 0.0 && s1 <= 1.0 + 1e-12) {
            return bad("initial survival mass must lie in (0, 1]");
        }
        if let Some(c) = self.tail_rate {
            let a = self.lengths();
            let mut tail = self.interior_mass();
            for (n, &an) in a.iter().enumerate() {
                tail -= an;
                if tail > (-c * n as f64).exp() * (1.0 + 1e-12) + 1e-15 {
                    return Err(KmrpError::TailViolation { rate: c, n: n as u32, tail });
                }
            }
        }
        Ok(())
    }

    pub fn interior_mass(&self) -> f64 {
        let mut s = NeumaierSum::new();
        self.interior.iter().for_each(|a| s.add(a.prob));
        s.value()
    }

    pub fn sigma1(&self) -> f64 {
        self.initial.iter().map(|a| a.prob).sum()
    }

    pub fn max_tau(&self) -> u32 {
        self.interior.iter().map(|a| a.tau).max().unwrap_or(0)
    }

    /// `a_tau`: interior mass at each step length, indexed from 0.
    pub fn lengths(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.max_tau() as usize + 1];
        for at in &self.interior {
            a[at.tau as usize] += at.prob;
        }
        a
    }

    /// gcd of the step lengths carrying positive mass.
    pub fn period(&self) -> u32 {
        self.interior
            .iter()
            .filter(|a| a.prob > 0.0)
            .fold(0, |g, a| gcd(g, a.tau))
    }

    /// Radius of convergence of `A(z)`: infinite without a declared tail.
    pub fn radius(&self) -> f64 {
        self.tail_rate.map_or(f64::INFINITY, f64::exp)
    }

    /// `A(z) = sum_tau a_tau z^tau`.
    pub fn gen(&self, z: f64) -> f64 {
        let mut s = NeumaierSum::new();
        for a in &self.interior {
            s.add(a.prob * z.powi(a.tau as i32));
        }
        s.value()
    }

    /// `A'(z)`, term by term.
    pub fn gen_prime(&self, z: f64) -> f64 {
        let mut s = NeumaierSum::new();
        for a in &self.interior {
            s.add(a.prob * a.tau as f64 * z.powi(a.tau as i32 - 1));
        }
        s.value()
    }

    /// Interior law reweighted by `r^tau` and normalized to mass 1, with no
    /// killing.
    pub fn reweighted(&self, r: f64) -> StepLaw {
        let w: Vec<f64> = self.interior.iter().map(|a| a.prob * r.powi(a.tau as i32)).collect();
        let mut z = NeumaierSum::new();
        w.iter().for_each(|&x| z.add(x));
        let z = z.value();
        StepLaw {
            kappa: 0.0,
            initial: self.initial.clone(),
            interior: self
                .interior
                .iter()
                .zip(&w)
                .map(|(a, &wi)| Atom { prob: wi / z, ..*a })
                .collect(),
            tail_rate: self.tail_rate.map(|c| c - r.ln()),
            x_lattice: self.x_lattice,
        }
    }

    /// Moments of the interior law conditioned on not being killed.
    pub fn drift(&self) -> Drift {
        let m = self.interior_mass();
        let et: f64 = self.interior.iter().map(|a| a.prob * a.tau as f64).sum::<f64>() / m;
        let ex: f64 = self.interior.iter().map(|a| a.prob * a.x).sum::<f64>() / m;
        let mu = ex / et;
        let v: f64 = self
            .interior
            .iter()
            .map(|a| a.prob * (a.x - mu * a.tau as f64).powi(2))
            .sum::<f64>()
            / m;
        Drift {
            mean_tau: et,
            mean_x: ex,
            mu,
            sigma: (v / et).sqrt(),
        }
    }
}

/// Per-step means and the per-unit-time drift and spread
/// `mu = E[dx]/E[tau]`, `sigma^2 = Var(dx - mu tau)/E[tau]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub mean_tau: f64,
    pub mean_x: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Exact renewal sequences for a process started at a renewal at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalSequences {
    /// Interior mass at each step length.
    pub a: Vec<f64>,
    /// Alive at elapsed time `n` after a renewal without another renewal.
    pub c: Vec<f64>,
    /// Renewal at time `n`.
    pub p: Vec<f64>,
    /// Alive at time `n`.
    pub s: Vec<f64>,
}

/// `p_n = sum_{k=1..n} a_k p_{n-k} + 1_{n=0}` and
/// `s_n = sum_{k=1..n} p_k c_{n-k} + c_n`, with compensated sums.
pub fn convolve_renewal(law: &StepLaw, n_max: usize) -> RenewalSequences {
    let mut a = law.lengths();
    a.resize(a.len().max(n_max + 1), 0.0);
    a.truncate(n_max + 1);
    let mut c = vec![0.0; n_max + 1];
    c[0] = 1.0;
    // c_m = P[tau > m, not killed] for m >= 1.
    let mut tail = law.interior_mass();
    for m in 1..=n_max {
        tail -= a[m];
        c[m] = tail.max(0.0);
    }
    let nz: Vec<usize> = (1..a.len()).filter(|&k| a[k] > 0.0).collect();
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    for n in 1..=n_max {
        let mut s = NeumaierSum::new();
        for &k in &nz {
            if k > n {
                break;
            }
            s.add(a[k] * p[n - k]);
        }
        p[n] = s.value();
    }
    let mut s = vec![0.0; n_max + 1];
    for n in 0..=n_max {
        let mut acc = NeumaierSum::new();
        for k in 1..=n {
            acc.add(p[k] * c[n - k]);
        }
        acc.add(c[n]);
        s[n] = acc.value();
    }
    RenewalSequences { a, c, p, s }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSolution {
    pub r_p: f64,
    pub zeta: f64,
    /// `1 / (R_p A'(R_p))`, the limit of `p_n R_p^n`.
    pub amplitude: f64,
    /// `R_a - R_p`; `None` when `A` is entire.
    pub mass_gap_margin: Option<f64>,
}

/// Root of `A(z) = 1` above 1, by bisection and then Newton steps.
pub fn solve_rate(law: &StepLaw) -> Result<RateSolution, KmrpError> {
    law.validate()?;
    let d = law.period();
    if d != 1 {
        return Err(KmrpError::Periodic(d));
    }
    if law.kappa == 0.0 {
        return Err(KmrpError::InvalidLaw("kappa = 0: survival does not decay".into()));
    }
    let r_a = law.radius();
    let mut lo = 1.0 + 1e-9;
    let mut hi = if r_a.is_finite() {
        let hi = r_a - 1e-9;
        if law.gen(hi) <= 1.0 {
            return Err(KmrpError::NoMassGap(r_a));
        }
        hi
    } else {
        let mut hi = 2.0;
        while law.gen(hi) <= 1.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(KmrpError::NoMassGap(hi));
            }
        }
        hi
    };
    if law.gen(lo) >= 1.0 {
        return Err(KmrpError::InvalidLaw("A(1) >= 1".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if law.gen(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / lo < 1e-10 {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = (law.gen(z) - 1.0) / law.gen_prime(z);
        let next = (z - step).clamp(lo, hi);
        let done = (next - z).abs() <= 1e-15 * z;
        z = next;
        if done {
            break;
        }
    }
    let amplitude = 1.0 / (z * law.gen_prime(z));
    Ok(RateSolution {
        r_p: z,
        zeta: 1.0 / z.ln(),
        amplitude,
        mass_gap_margin: r_a.is_finite().then(|| r_a - z),
    })
}

/// `|p_n R_p^n / amplitude - 1|` from the exact convolution.
pub fn asymptotic_check(law: &StepLaw, sol: &RateSolution, n: usize) -> f64 {
    let seq = convolve_renewal(law, n);
    let lp = seq.p[n].ln() + n as f64 * sol.r_p.ln();
    (lp.exp() / sol.amplitude - 1.0).abs()
}

/// The law conditioned to survive forever: interior atoms weighted by
/// `R_p^tau`, no killing.
pub fn tilted_law(law: &StepLaw) -> Result<(StepLaw, RateSolution, Drift), KmrpError> {
    let sol = solve_rate(law)?;
    let t = law.reweighted(sol.r_p);
    let d = t.drift();
    Ok((t, sol, d))
}

/// A simulated path; `x[t]` is `None` once dead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmrpPath {
    pub x: Vec<Option<f64>>,
    pub y: Vec<u8>,
    pub renewals: Vec<u64>,
}

/// Fast sampler of steps; index `atoms.len()` is the killing outcome.
struct StepSampler {
    atoms: Vec<Atom>,
    alias: WeightedAliasIndex<f64>,
}

impl StepSampler {
    fn new(atoms: &[Atom], kill: f64) -> StepSampler {
        let mut w: Vec<f64> = atoms.iter().map(|a| a.prob).collect();
        w.push(kill.max(0.0));
        StepSampler {
            atoms: atoms.to_vec(),
            alias: WeightedAliasIndex::new(w).expect("step law has positive mass"),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Option<Atom> {
        self.atoms.get(self.alias.sample(rng)).copied()
    }
}

/// Simulate up to time `n`: the first step from the initial law (killed
/// with `1 - sigma_1`), then interior steps. Between renewals `X` is the
/// linear interpolation of its values at the two renewal times.
pub fn simulate(law: &StepLaw, n: usize, seed: u64) -> KmrpPath {
    let mut rng = stream(seed, 0);
    let first = StepSampler::new(&law.initial, 1.0 - law.sigma1());
    let inner = StepSampler::new(&law.interior, law.kappa);
    simulate_with(&first, &inner, n, &mut rng)
}

fn simulate_with<R: Rng>(first: &StepSampler, inner: &StepSampler, n: usize, rng: &mut R) -> KmrpPath {
    let mut x = vec![None; n + 1];
    let mut y = vec![0u8; n + 1];
    let mut renewals = vec![0u64];
    x[0] = Some(0.0);
    y[0] = 1;
    let mut t = 0usize;
    let mut pos = 0.0;
    let mut sampler = first;
    while t < n {
        match sampler.draw(rng) {
            None => break,
            Some(a) => {
                let tau = a.tau as usize;
                for k in 1..=tau.min(n - t) {
                    x[t + k] = Some(pos + a.x * k as f64 / tau as f64);
                }
                t += tau;
                pos += a.x;
                if t <= n {
                    y[t] = 1;
                    renewals.push(t as u64);
                }
            }
        }
        sampler = inner;
    }
    KmrpPath { x, y, renewals }
}

/// Local limit comparison for the time-`n` position of a non-killed chain
/// started at a renewal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub trials: usize,
    pub mu: f64,
    pub sigma: f64,
    pub ks: f64,
    pub ks_p_value: f64,
    /// `max_k |sigma sqrt(n) P[bin k] / h - phi(z_k)|` over lattice bins.
    pub local_sup: f64,
    /// `(z_k, empirical density, Gaussian density)` per bin.
    pub histogram: Vec<(f64, f64, f64)>,
}

fn chain_positions(law: &StepLaw, times: &[usize], trials: usize, seed: u64) -> Vec<Vec<f64>> {
    const CHUNK: usize = 1000;
    let inner = StepSampler::new(&law.interior, law.kappa);
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, c as u64);
            let m = CHUNK.min(trials - c * CHUNK);
            let inner = &inner;
            (0..m)
                .map(move |_| {
                    // Positions at each requested time (linear interpolation).
                    let mut out = Vec::with_capacity(times.len());
                    let mut next = 0;
                    let (mut t, mut pos) = (0usize, 0.0f64);
                    while next < times.len() {
                        let a = inner.draw(&mut rng).expect("chain has no killing");
                        let tau = a.tau as usize;
                        while next < times.len() && times[next] <= t + tau {
                            let k = times[next] - t;
                            out.push(pos + a.x * k as f64 / tau as f64);
                            next += 1;
                        }
                        t += tau;
                        pos += a.x;
                    }
                    out
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Simulate the chain with the interior law (which must have no killing)
/// to time `n` and compare `(X_n - n mu)/(sigma sqrt n)` with the standard
/// Gaussian.
pub fn local_clt_check(law: &StepLaw, n: usize, trials: usize, seed: u64) -> Result<CltReport, KmrpError> {
    if law.kappa != 0.0 {
        return Err(KmrpError::InvalidLaw("local CLT needs a law without killing".into()));
    }
    let d = law.drift();
    let scale = d.sigma * (n as f64).sqrt();
    let xs: Vec<f64> = chain_positions(law, &[n], trials, seed)
        .into_iter()
        .map(|v| v[0])
        .collect();
    let mut z: Vec<f64> = xs.iter().map(|&x| (x - n as f64 * d.mu) / scale).collect();
    let ks = ks_distance(&mut z, normal_cdf);
    // Lattice bins of width h centred on multiples of h.
    let h = law.x_lattice;
    let mut bins = std::collections::BTreeMap::<i64, u64>::new();
    for &x in &xs {
        *bins.entry(((x - n as f64 * d.mu) / h).round() as i64).or_default() += 1;
    }
    let mut local_sup = 0.0f64;
    let histogram: Vec<(f64, f64, f64)> = bins
        .iter()
        .map(|(&k, &c)| {
            let zk = k as f64 * h / scale;
            let emp = c as f64 / trials as f64 * scale / h;
            let g = normal_pdf(zk);
            local_sup = local_sup.max((emp - g).abs());
            (zk, emp, g)
        })
        .collect();
    Ok(CltReport {
        n,
        trials,
        mu: d.mu,
        sigma: d.sigma,
        ks,
        ks_p_value: ks_p_value(ks, trials),
        local_sup,
        histogram,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub n: usize,
    pub ts: Vec<f64>,
    /// Variance of `X_{nt}` among paths with `X_n` near `n mu`.
    pub pinned: Vec<f64>,
    /// Variance of `X_{nt}` over all paths.
    pub free: Vec<f64>,
    pub sigma: f64,
    pub pinned_count: usize,
    /// `max_t |pinned / (sigma^2 n t (1-t)) - 1|`.
    pub max_rel_dev: f64,
}

/// Variance profile of the chain pinned at `X_n ~ n mu` (within a tenth of
/// the standard deviation) at `t = 0.1, ..., 0.9`, plus the free profile.
pub fn bridge_statistics(law: &StepLaw, n: usize, trials: usize, seed: u64) -> Result<BridgeReport, KmrpError> {
    if law.kappa != 0.0 {
        return Err(KmrpError::InvalidLaw("bridge statistics need a law without killing".into()));
    }
    let d = law.drift();
    let ts: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let mut times: Vec<usize> = ts.iter().map(|t| (t * n as f64).round() as usize).collect();
    times.push(n);
    let paths = chain_positions(law, &times, trials, seed);
    let half_width = 0.1 * d.sigma * (n as f64).sqrt();
    let centre = n as f64 * d.mu;
    let pinned_paths: Vec<&Vec<f64>> = paths
        .iter()
        .filter(|v| (v[ts.len()] - centre).abs() <= half_width)
        .collect();
    if pinned_paths.len() < 100 {
        return Err(KmrpError::BinTooThin(pinned_paths.len()));
    }
    let mut pinned = Vec::new();
    let mut free = Vec::new();
    let mut max_rel_dev = 0.0f64;
    for (i, &t) in ts.iter().enumerate() {
        let col: Vec<f64> = pinned_paths.iter().map(|v| v[i]).collect();
        let vp = variance(&col);
        let all: Vec<f64> = paths.iter().map(|v| v[i]).collect();
        free.push(variance(&all));
        pinned.push(vp);
        let predicted = d.sigma * d.sigma * n as f64 * t * (1.0 - t);
        max_rel_dev = max_rel_dev.max((vp / predicted - 1.0).abs());
    }
    Ok(BridgeReport {
        n,
        ts,
        pinned,
        free,
        sigma: d.sigma,
        pinned_count: pinned_paths.len(),
        max_rel_dev,
    })
}

/// Row of `rates.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub run_id: String,
    pub label: String,
    pub r_p: f64,
    pub zeta: f64,
    pub amplitude: f64,
    pub mass_gap_margin: Option<f64>,
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl RateRow {
    pub fn new(run_id: &str, label: &str, law: &StepLaw, sol: &RateSolution, tilted: &Drift) -> RateRow {
        RateRow {
            run_id: run_id.to_string(),
            label: label.to_string(),
            r_p: sol.r_p,
            zeta: sol.zeta,
            amplitude: sol.amplitude,
            mass_gap_margin: sol.mass_gap_margin,
            kappa: law.kappa,
            mu: tilted.mu,
            sigma: tilted.sigma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_renewal() {
        let law = StepLaw::geometric(0.5);
        let seq = convolve_renewal(&law, 20);
        for n in 0..=20 {
            assert_eq!(seq.p[n], 0.5f64.powi(n as i32));
        }
        let sol = solve_rate(&law).unwrap();
        assert!((sol.r_p - 2.0).abs() < 1e-13);
        assert!((sol.zeta - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((sol.amplitude - 1.0).abs() < 1e-12);
        assert!(asymptotic_check(&law, &sol, 50) < 1e-12);
    }

    #[test]
    fn hand_recursion() {
        let law = StepLaw::from_lengths(&[(1, 0.3), (2, 0.3)]);
        let seq = convolve_renewal(&law, 5);
        assert!((seq.p[2] - 0.39).abs() < 1e-15);
    }

    #[test]
    fn periodic_law_rejected() {
        let law = StepLaw::from_lengths(&[(2, 0.6)]);
        assert_eq!(solve_rate(&law), Err(KmrpError::Periodic(2)));
    }

    #[test]
    fn json_roundtrip() {
        let law = StepLaw::from_lengths(&[(1, 0.25), (2, 0.25)]);
        let s = serde_json::to_string(&law).unwrap();
        assert!(s.contains("\"interior\":[[1,0.0,0.25],[2,0.0,0.25]]"));
        assert_eq!(StepLaw::from_json(&s).unwrap(), law);
    }

    #[test]
    fn deterministic_survival() {
        let mut law = StepLaw::geometric(0.5);
        law.initial = vec![Atom { tau: 3, x: 0.0, prob: 0.8 }];
        let trials = 100_000;
        let n = 6;
        let alive = (0..trials)
            .filter(|&i| simulate(&law, n, i as u64).x[n].is_some())
            .count();
        let expect = 0.8 * 0.5f64.powi(n as i32 - 3);
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((alive as f64 / trials as f64 - expect).abs() < 4.0 * se);
    }
}
