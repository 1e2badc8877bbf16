//! Monte-Carlo simulation of the non-Markovian graph walker and least-squares
//! / minimax fits of target waiting-time laws by mixtures of power laws.
//!
//! A walker waits `n Δτ` with `n ~ ψ_α(n) = d_α n^{-(1+α)}`, then jumps
//! `i → j` with probability `K W_ij / d_i` or stays with probability `1 - K`,
//! where `K = Δτ^α d_α |Γ(-α)|`. As `Δτ → 0` the occupancy law solves
//! `D^α P = (A - I) P` with `A = W D^{-1}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DragonError, Result};
use crate::fracfn::{abs_gamma_neg, waiting_normalizer, waiting_prob, zeta_tail, AlphaOrder};
use crate::graphdyn::GraphSpec;
use crate::linalg::ridge_lstsq;

/// Largest tail mass the waiting-time table may discard unless the table
/// already covers the whole horizon.
pub const TAIL_MASS_LIMIT: f64 = 1e-4;
/// Cap on the waiting-time table length.
pub const MAX_TABLE: u64 = 10_000_000;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(DragonError::Config(msg.into()))
}

/// Inverse-CDF sampler for `ψ_α` truncated at `n_max`, with the tail mass
/// beyond `n_max` placed on `n_max`.
#[derive(Debug, Clone)]
pub struct WaitingSampler {
    alpha: AlphaOrder,
    normalizer: f64,
    /// `cdf[k] = P(n <= k + 1)` for `k + 1 < n_max`.
    cdf: Vec<f64>,
    n_max: u64,
}

impl WaitingSampler {
    pub fn new(alpha: AlphaOrder, n_max: u64) -> Result<Self> {
        if n_max == 0 {
            return config_err("waiting-time cap must be at least 1");
        }
        if n_max > MAX_TABLE {
            return config_err(format!(
                "waiting-time cap {n_max} exceeds the table limit {MAX_TABLE}"
            ));
        }
        let normalizer = waiting_normalizer(alpha);
        let mut cdf = Vec::with_capacity(n_max as usize - 1);
        let mut acc = 0.0;
        for n in 1..n_max {
            acc += waiting_prob(alpha, normalizer, n);
            cdf.push(acc);
        }
        Ok(Self {
            alpha,
            normalizer,
            cdf,
            n_max,
        })
    }

    pub fn alpha(&self) -> AlphaOrder {
        self.alpha
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// Mass `Σ_{n > n_max} ψ_α(n)` moved onto `n_max`.
    pub fn tail_mass(&self) -> f64 {
        tail_mass(self.alpha, self.normalizer, self.n_max)
    }

    /// `E[min(n, n_max)]` under the lumped law.
    pub fn truncated_mean(&self) -> f64 {
        let mut mean = 0.0;
        let mut below = 0.0;
        for n in 1..self.n_max {
            let p = waiting_prob(self.alpha, self.normalizer, n);
            mean += n as f64 * p;
            below += p;
        }
        mean + self.n_max as f64 * (1.0 - below)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < self.cdf.len() {
            k as u64 + 1
        } else {
            self.n_max
        }
    }
}

fn tail_mass(alpha: AlphaOrder, normalizer: f64, n_max: u64) -> f64 {
    normalizer * zeta_tail(1.0 + alpha.value(), n_max).expect("1 + alpha > 1")
}

/// Draws one waiting time (in units of `Δτ`).
pub fn sample_waiting<R: Rng + ?Sized>(sampler: &WaitingSampler, rng: &mut R) -> u64 {
    sampler.sample(rng)
}

/// Walker parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub graph: GraphSpec,
    pub alpha: AlphaOrder,
    pub delta_tau: f64,
    pub t_end: f64,
    pub n_walkers: usize,
    pub seed: u64,
    /// Initial distribution over nodes.
    pub start: Vec<f64>,
    /// Waiting-time table length; defaults to one quantum past the horizon.
    pub n_max: Option<u64>,
}

impl WalkConfig {
    /// Number of whole quanta inside `[0, T]`.
    pub fn horizon_ticks(&self) -> u64 {
        (self.t_end / self.delta_tau * (1.0 + 1e-12)).floor() as u64
    }

    /// Jump probability `K = Δτ^α d_α Γ(1 - α) / α`.
    pub fn jump_probability(&self) -> Result<f64> {
        let a = self.alpha.value();
        if a >= 1.0 {
            return config_err("walker order must lie strictly below 1");
        }
        Ok(self.delta_tau.powf(a) * waiting_normalizer(self.alpha) * abs_gamma_neg(a)?)
    }

    pub fn effective_n_max(&self) -> u64 {
        self.n_max.unwrap_or_else(|| self.horizon_ticks() + 1)
    }

    /// Checks the configuration and returns `K`.
    pub fn validate(&self) -> Result<f64> {
        if !(self.delta_tau > 0.0) || !self.delta_tau.is_finite() {
            return config_err(format!(
                "time quantum must be positive, got {}",
                self.delta_tau
            ));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return config_err(format!("horizon must be non-negative, got {}", self.t_end));
        }
        if self.n_walkers == 0 {
            return config_err("need at least one walker");
        }
        let n = self.graph.node_count();
        if self.start.len() != n {
            return config_err(format!(
                "start distribution has {} entries for {n} nodes",
                self.start.len()
            ));
        }
        if self.start.iter().any(|p| !(*p >= 0.0)) {
            return config_err("start distribution must be non-negative");
        }
        let total: f64 = self.start.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config_err(format!("start distribution sums to {total}, not 1"));
        }
        if let Some(i) = self.graph.degrees().iter().position(|d| !(*d > 0.0)) {
            return config_err(format!("node {i} is isolated"));
        }
        let k = self.jump_probability()?;
        if k > 1.0 {
            return config_err(format!(
                "jump probability K = {k:.4} exceeds 1; use a smaller time quantum"
            ));
        }
        let n_max = self.effective_n_max();
        let covers_horizon = n_max > self.horizon_ticks();
        if !covers_horizon {
            let tail = tail_mass(self.alpha, waiting_normalizer(self.alpha), n_max);
            if tail >= TAIL_MASS_LIMIT {
                return config_err(format!(
                    "waiting-time cap {n_max} drops tail mass {tail:.2e} >= {TAIL_MASS_LIMIT:e} \
                     and does not cover the horizon of {} quanta",
                    self.horizon_ticks()
                ));
            }
        }
        Ok(k)
    }
}

/// Empirical occupancy at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkResult {
    pub occupancy: Vec<f64>,
    pub n_jumps: u64,
    /// Mean of the waiting times that ended inside the horizon, in time units.
    pub mean_wait: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    jumps: u64,
    waits: u64,
    wait_ticks: u128,
}

/// Runs `n_walkers` independent walkers.
///
/// Walker `w` draws from its own generator seeded with `seed ^ w` and starts
/// at the node holding the `(w + ½)/n_walkers` quantile of the start
/// distribution. Per-walker results are merged by integer summation, so the
/// result does not depend on how walkers are spread over threads.
pub fn simulate(config: &WalkConfig) -> Result<WalkResult> {
    let k = config.validate()?;
    let sampler = WaitingSampler::new(config.alpha, config.effective_n_max())?;
    let n = config.graph.node_count();
    let degrees = config.graph.degrees();
    let jump_cdf: Vec<Vec<(usize, f64)>> = config
        .graph
        .adjacency()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut acc = 0.0;
            row.into_iter()
                .map(|(j, w)| {
                    acc += w / degrees[i];
                    (j, acc)
                })
                .collect()
        })
        .collect();
    let start_cdf: Vec<f64> = config
        .start
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let horizon = config.horizon_ticks();
    let walkers = config.n_walkers;

    let run_walker = |w: usize| -> (usize, Tally) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ w as u64);
        let q = (w as f64 + 0.5) / walkers as f64;
        let mut node = start_cdf.partition_point(|&c| c <= q).min(n - 1);
        // skip zero-mass nodes reached through rounding at the top end
        while config.start[node] == 0.0 && node > 0 {
            node -= 1;
        }
        let mut tally = Tally::default();
        let mut clock = 0_u64;
        loop {
            let wait = sampler.sample(&mut rng);
            clock += wait;
            if clock > horizon {
                break;
            }
            tally.waits += 1;
            tally.wait_ticks += wait as u128;
            if rng.gen::<f64>() < k {
                let u: f64 = rng.gen();
                let row = &jump_cdf[node];
                let idx = row.partition_point(|&(_, c)| c <= u).min(row.len() - 1);
                node = row[idx].0;
                tally.jumps += 1;
            }
        }
        (node, tally)
    };

    let (counts, tally) = (0..walkers)
        .into_par_iter()
        .fold(
            || (vec![0_u64; n], Tally::default()),
            |(mut counts, mut acc), w| {
                let (node, t) = run_walker(w);
                counts[node] += 1;
                acc.jumps += t.jumps;
                acc.waits += t.waits;
                acc.wait_ticks += t.wait_ticks;
                (counts, acc)
            },
        )
        .reduce(
            || (vec![0_u64; n], Tally::default()),
            |(mut c1, mut t1), (c2, t2)| {
                c1.iter_mut().zip(&c2).for_each(|(a, b)| *a += b);
                t1.jumps += t2.jumps;
                t1.waits += t2.waits;
                t1.wait_ticks += t2.wait_ticks;
                (c1, t1)
            },
        );

    let occupancy = counts.iter().map(|&c| c as f64 / walkers as f64).collect();
    let mean_wait = if tally.waits == 0 {
        0.0
    } else {
        tally.wait_ticks as f64 / tally.waits as f64 * config.delta_tau
    };
    Ok(WalkResult {
        occupancy,
        n_jumps: tally.jumps,
        mean_wait,
    })
}

/// Norm minimized by [`fit_waiting_span`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitNorm {
    Sup,
    L2,
}

/// Mixture weights approximating a target sequence by `Σ_m w_m ψ_{α_m}(n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanFit {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub sup_error: f64,
    pub l2_error: f64,
}

/// Ridge used for the least-squares solves of the span fit.
pub const SPAN_RIDGE: f64 = 1e-10;
const LAWSON_ITERS: usize = 2_000;

/// Fits `f(1..=N)` (`target[n-1] = f(n)`) by a combination of power-law
/// waiting laws `ψ_{α_m}`.
///
/// `L2` solves the ridge least-squares problem. `Sup` runs Lawson's
/// iteratively reweighted least squares toward the minimax solution and
/// returns the iterate with the smallest uniform error.
pub fn fit_waiting_span(target: &[f64], alphas: &[f64], norm: FitNorm) -> Result<SpanFit> {
    if alphas.is_empty() {
        return Err(DragonError::Input("order grid is empty".into()));
    }
    let orders = alphas
        .iter()
        .map(|&a| AlphaOrder::new(a))
        .collect::<Result<Vec<_>>>()?;
    if alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DragonError::Input(
            "order grid must be strictly increasing (duplicates make the design rank-deficient)"
                .into(),
        ));
    }
    let rows = target.len();
    if rows < 2 * alphas.len() {
        return Err(DragonError::Input(format!(
            "need at least {} target points for {} orders, got {rows}",
            2 * alphas.len(),
            alphas.len()
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(DragonError::Input("target must be finite".into()));
    }
    let design = DMatrix::from_fn(rows, alphas.len(), |r, c| {
        let a = orders[c];
        waiting_prob(a, waiting_normalizer(a), r as u64 + 1)
    });
    let b = DVector::from_column_slice(target);
    let errors = |w: &DVector<f64>| -> (DVector<f64>, f64, f64) {
        let r = &design * w - &b;
        let sup = r.amax();
        let l2 = r.norm();
        (r, sup, l2)
    };

    let mut weights = ridge_lstsq(&design, &b, SPAN_RIDGE)?;
    if norm == FitNorm::Sup {
        let (r, mut best_sup, _) = errors(&weights);
        if best_sup > 0.0 {
            let mut u = vec![1.0 / rows as f64; rows];
            let mut resid = r;
            for _ in 0..LAWSON_ITERS {
                let total: f64 = u
                    .iter()
                    .zip(resid.iter())
                    .map(|(ui, ri)| ui * ri.abs())
                    .sum();
                if !(total > 0.0) {
                    break;
                }
                for (ui, ri) in u.iter_mut().zip(resid.iter()) {
                    *ui *= ri.abs() / total;
                }
                let scale: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
                let wd = DMatrix::from_fn(rows, alphas.len(), |r, c| design[(r, c)] * scale[r]);
                let wb = DVector::from_fn(rows, |r, _| b[r] * scale[r]);
                let Ok(cand) = ridge_lstsq(&wd, &wb, SPAN_RIDGE * 1e-6) else {
                    break;
                };
                let (r, sup, _) = errors(&cand);
                resid = r;
                if sup < best_sup {
                    best_sup = sup;
                    weights = cand;
                }
            }
        }
    }
    let (_, sup_error, l2_error) = errors(&weights);
    Ok(SpanFit {
        alphas: alphas.to_vec(),
        weights: weights.iter().copied().collect(),
        sup_error,
        l2_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: f64) -> AlphaOrder {
        AlphaOrder::new(v).unwrap()
    }

    fn two_node(t_end: f64, walkers: usize) -> WalkConfig {
        WalkConfig {
            graph: GraphSpec::new(2, vec![(0, 1, 1.0)]).unwrap(),
            alpha: a(0.5),
            delta_tau: 0.01,
            t_end,
            n_walkers: walkers,
            seed: 7,
            start: vec![1.0, 0.0],
            n_max: None,
        }
    }

    #[test]
    fn samples_are_positive_and_capped() {
        let s = WaitingSampler::new(a(0.5), 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let n = s.sample(&mut rng);
            assert!((1..=100).contains(&n));
        }
    }

    #[test]
    fn zero_horizon_keeps_start() {
        let mut c = two_node(0.0, 1000);
        c.start = vec![0.25, 0.75];
        let r = simulate(&c).unwrap();
        assert_eq!(r.occupancy, vec![0.25, 0.75]);
        assert_eq!(r.n_jumps, 0);
    }

    #[test]
    fn oversized_quantum_rejected() {
        let mut c = two_node(1.0, 10);
        c.delta_tau = 100.0;
        assert!(matches!(simulate(&c), Err(DragonError::Config(_))));
    }

    #[test]
    fn short_cap_rejected() {
        let mut c = two_node(1.0, 10);
        c.n_max = Some(10);
        assert!(matches!(c.validate(), Err(DragonError::Config(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = two_node(1.0, 10);
        c.start = vec![0.5, 0.4];
        assert!(c.validate().is_err());
        let mut c = two_node(1.0, 0);
        assert!(c.validate().is_err());
        c.n_walkers = 1;
        c.alpha = a(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn occupancy_is_distribution() {
        let r = simulate(&two_node(1.0, 2_000)).unwrap();
        assert!(r.occupancy.iter().all(|p| *p >= 0.0));
        assert!((r.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.mean_wait > 0.0);
    }

    #[test]
    fn seeds_are_reproducible() {
        let c = two_node(1.0, 3_000);
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        let mut d = c.clone();
        d.seed = 8;
        assert_ne!(simulate(&c).unwrap(), simulate(&d).unwrap());
    }

    #[test]
    fn span_fit_errors() {
        let t = vec![0.1; 20];
        assert!(fit_waiting_span(&t, &[0.5, 0.5], FitNorm::L2).is_err());
        assert!(fit_waiting_span(&t, &[0.7, 0.5], FitNorm::L2).is_err());
        assert!(fit_waiting_span(&t[..3], &[0.3, 0.5], FitNorm::L2).is_err());
        assert!(fit_waiting_span(&t, &[], FitNorm::L2).is_err());
    }

    #[test]
    fn span_fit_zero_target() {
        let fit = fit_waiting_span(&[0.0; 30], &[0.2, 0.4, 0.6], FitNorm::Sup).unwrap();
        assert!(fit.weights.iter().all(|w| *w == 0.0));
        assert_eq!(fit.sup_error, 0.0);
    }
}
