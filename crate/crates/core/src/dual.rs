//! Correlation functions through stirring duality.
//!
//! In the stirring process each labelled particle attempts every
//! nearest-neighbour move at rate `eps^-2`; an attempt onto another
//! particle exchanges the two labels instead of being suppressed. Started
//! from `k` distinct sites `x`, the time-`t` positions `Y` satisfy
//!
//! ```text
//! E[prod_i eta(x^i, t)] = E[prod_i eta(Y^i, 0)] = E[prod_i p(Y^i)]
//! ```
//!
//! where `p` is the Bernoulli parameter field of the product initial law.
//! The Monte-Carlo estimator averages `prod_i p(Y^i)` over stirring paths;
//! the exact oracle propagates the law of `Y` on ordered tuples by
//! uniformization.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initcond::DensityProfile;
use crate::rng::{open_unit, replica_rng};
use crate::stats::SummaryStats;
use crate::torus::{Sign, TorusGeometry};

/// Largest ordered-tuple state space the exact oracle will build.
pub const EXACT_STATE_LIMIT: usize = 100_000;

/// Poisson tail mass left out of the uniformization series.
const TRUNCATION_TAIL: f64 = 1e-12;

/// Paths per parallel work unit of the estimator; each unit owns an RNG stream.
const PATHS_PER_CHUNK: usize = 4096;

/// Labelled dual particles.
#[derive(Debug, Clone, PartialEq)]
pub struct StirringState {
    positions: Vec<usize>,
    time: f64,
}

impl StirringState {
    pub fn new(geom: &TorusGeometry, positions: &[usize]) -> Result<Self> {
        check_points(geom, positions)?;
        Ok(Self {
            positions: positions.to_vec(),
            time: 0.0,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Moves particle `i` along `(axis, sign)`, swapping labels on contact.
    pub fn apply_move(&mut self, geom: &TorusGeometry, i: usize, axis: usize, sign: Sign) {
        let x = self.positions[i];
        let y = geom.shift(x, axis, sign);
        if let Some(j) = self.positions.iter().position(|&p| p == y) {
            self.positions[j] = x;
        }
        self.positions[i] = y;
    }

    fn rate(&self, geom: &TorusGeometry) -> f64 {
        let side = geom.side() as f64;
        (self.positions.len() * 2 * geom.dim()) as f64 * side * side
    }
}

fn check_points(geom: &TorusGeometry, points: &[usize]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::usage("at least one dual point is required"));
    }
    for (i, &p) in points.iter().enumerate() {
        if p >= geom.site_count() {
            return Err(Error::usage(format!("site {p} outside the torus")));
        }
        if points[..i].contains(&p) {
            return Err(Error::DuplicatePoints);
        }
    }
    Ok(())
}

/// Waits `Exp(k 2d L^2)` and applies one uniform move.
pub fn stirring_step<R: Rng + ?Sized>(state: &mut StirringState, geom: &TorusGeometry, rng: &mut R) {
    state.time -= open_unit(rng).ln() / state.rate(geom);
    let i = rng.random_range(0..state.positions.len());
    let dir = rng.random_range(0..2 * geom.dim());
    let sign = if dir % 2 == 0 { Sign::Plus } else { Sign::Minus };
    state.apply_move(geom, i, dir / 2, sign);
}

/// Positions at time `t` of a stirring path started from `points`.
fn stirred_positions<R: Rng + ?Sized>(geom: &TorusGeometry, points: &[usize], t: f64, rng: &mut R) -> Vec<usize> {
    let mut s = StirringState {
        positions: points.to_vec(),
        time: 0.0,
    };
    let rate = s.rate(geom);
    let moves = 2 * geom.dim();
    loop {
        s.time -= open_unit(rng).ln() / rate;
        if s.time > t {
            return s.positions;
        }
        let i = rng.random_range(0..points.len());
        let dir = rng.random_range(0..moves);
        let sign = if dir % 2 == 0 { Sign::Plus } else { Sign::Minus };
        s.apply_move(geom, i, dir / 2, sign);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KPointEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// Monte-Carlo estimate of `E[prod_i eta(x^i, t)]` from `paths` stirring paths.
///
/// `parameters` is the Bernoulli field of the initial law. Work is split into
/// fixed chunks, each with its own stream of `seed`, so the result does not
/// depend on the thread count.
pub fn estimate_kpoint(
    points: &[usize],
    t: f64,
    parameters: &[f64],
    geom: &TorusGeometry,
    paths: usize,
    seed: u64,
) -> Result<KPointEstimate> {
    check_points(geom, points)?;
    if !(t >= 0.0) {
        return Err(Error::usage(format!("time {t} must be nonnegative")));
    }
    if paths < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: paths });
    }
    let chunks = paths.div_ceil(PATHS_PER_CHUNK);
    let partial: Vec<SummaryStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replica_rng(seed, c as u64);
            let count = PATHS_PER_CHUNK.min(paths - c * PATHS_PER_CHUNK);
            let mut s = SummaryStats::new();
            for _ in 0..count {
                let y = stirred_positions(geom, points, t, &mut rng);
                s.push(y.iter().map(|&site| parameters[site]).product());
            }
            s
        })
        .collect();
    let total = partial.iter().fold(SummaryStats::new(), |acc, s| acc.merge(s));
    Ok(KPointEstimate {
        estimate: total.mean(),
        stderr: total.stderr(),
        paths,
    })
}

/// Law of the labelled stirring positions at a fixed time, on ordered tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleDistribution {
    k: usize,
    sites: usize,
    probs: Vec<f64>,
}

impl TupleDistribution {
    pub fn k(&self) -> usize {
        self.k
    }

    fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &s| acc * self.sites + s)
    }

    fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = idx % self.sites;
            idx /= self.sites;
        }
    }

    /// Probability of the ordered tuple.
    pub fn prob(&self, tuple: &[usize]) -> f64 {
        self.probs[self.index(tuple)]
    }

    /// `(tuple, probability)` for every tuple with positive mass.
    pub fn support(&self) -> Vec<(Vec<usize>, f64)> {
        let mut buf = vec![0; self.k];
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| {
                self.decode(i, &mut buf);
                (buf.clone(), p)
            })
            .collect()
    }

    /// `sum_y P(Y = y) prod_i f(y^i)`.
    pub fn contract(&self, field: &[f64]) -> f64 {
        let mut buf = vec![0; self.k];
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.decode(i, &mut buf);
            acc += p * buf.iter().map(|&s| field[s]).product::<f64>();
        }
        acc
    }
}

/// Number of ordered tuples of `k` distinct sites out of `sites`.
fn ordered_tuples(sites: usize, k: usize) -> u128 {
    (0..k).map(|i| sites.saturating_sub(i) as u128).product()
}

/// Exact law of the stirring positions at time `t` by uniformization.
///
/// With total rate `lambda = k 2d L^2` every attempt changes the labelled
/// tuple, so `P_t = sum_m Pois(m; lambda t) K^m` for the one-move kernel
/// `K`. The series is cut once the Poisson tail is below `1e-12`.
pub fn transition_distribution(points: &[usize], t: f64, geom: &TorusGeometry) -> Result<TupleDistribution> {
    check_points(geom, points)?;
    let k = points.len();
    let sites = geom.site_count();
    let states = ordered_tuples(sites, k);
    if k > 2 || states > EXACT_STATE_LIMIT as u128 {
        return Err(Error::StateSpaceTooLarge {
            k,
            states,
            limit: EXACT_STATE_LIMIT,
        });
    }
    if !(t >= 0.0) {
        return Err(Error::usage(format!("time {t} must be nonnegative")));
    }
    let dense = sites.pow(k as u32);
    let mut dist = TupleDistribution {
        k,
        sites,
        probs: vec![0.0; dense],
    };
    let start = dist.index(points);
    let moves = k * 2 * geom.dim();
    let side = geom.side() as f64;
    let lambda = moves as f64 * side * side * t;
    if lambda == 0.0 {
        dist.probs[start] = 1.0;
        return Ok(dist);
    }
    // one-step kernel as a successor table
    let valid: Vec<usize> = (0..dense)
        .filter(|&i| {
            let mut b = vec![0; k];
            dist.decode(i, &mut b);
            (1..k).all(|j| !b[..j].contains(&b[j]))
        })
        .collect();
    let mut succ = vec![0usize; dense * moves];
    let mut buf = vec![0; k];
    for &i in &valid {
        dist.decode(i, &mut buf);
        let mut m = 0;
        for p in 0..k {
            for axis in 0..geom.dim() {
                for sign in Sign::BOTH {
                    let mut s = StirringState {
                        positions: buf.clone(),
                        time: 0.0,
                    };
                    s.apply_move(geom, p, axis, sign);
                    succ[i * moves + m] = dist.index(&s.positions);
                    m += 1;
                }
            }
        }
    }
    let inv_moves = 1.0 / moves as f64;
    let mut current = vec![0.0; dense];
    current[start] = 1.0;
    let mut next = vec![0.0; dense];
    let mut log_w = -lambda;
    let mut m: u64 = 0;
    loop {
        let w = log_w.exp();
        for &i in &valid {
            dist.probs[i] += w * current[i];
        }
        // P(N > m) <= w_{m+1} / (1 - lambda/(m+2)) once m + 2 > lambda
        let log_next = log_w + lambda.ln() - ((m + 1) as f64).ln();
        let ratio = lambda / (m + 2) as f64;
        if ratio < 1.0 && log_next.exp() / (1.0 - ratio) < TRUNCATION_TAIL {
            break;
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for &i in &valid {
            let p = current[i];
            if p == 0.0 {
                continue;
            }
            let share = p * inv_moves;
            for &j in &succ[i * moves..(i + 1) * moves] {
                next[j] += share;
            }
        }
        std::mem::swap(&mut current, &mut next);
        log_w = log_next;
        m += 1;
    }
    Ok(dist)
}

/// `E[prod_i eta(x^i, t)]` in closed form for `k <= 2`.
pub fn exact_kpoint(points: &[usize], t: f64, parameters: &[f64], geom: &TorusGeometry) -> Result<f64> {
    Ok(transition_distribution(points, t, geom)?.contract(parameters))
}

/// Convenience wrapper computing the parameter field from `(rho_0, n)`.
pub fn exact_kpoint_for_profile(
    points: &[usize],
    t: f64,
    rho0: &DensityProfile,
    n: usize,
    geom: &TorusGeometry,
) -> Result<f64> {
    let params = rho0.parameter_field(n, geom)?;
    exact_kpoint(points, t, &params, geom)
}
