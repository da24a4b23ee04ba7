//! Closed-form detection model and baseline saturation arithmetic.
//!
//! The exact-arithmetic helpers ([`pr_skip`], [`pr_reveal_after_n`],
//! [`baseline_saturation`]) only need ring operations and work with rational
//! types as well as floats. [`pr_reveal`] evaluates binomial terms in log
//! space and needs a [`Scalar`].

use num_traits::Num;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::scalar::Scalar;
use crate::SimRng;

/// Inputs of the detection model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionParams<T> {
    /// Claimed digests per validating message.
    pub alpha: u32,
    pub pr_check: T,
    /// Benign receivers of the validating message.
    pub n_neighbors: u64,
    /// Distinct reports needed to reveal.
    pub votes_needed: u64,
    /// Validating messages sent, for the cumulative reveal probability.
    pub n_messages: u32,
}

impl<T: Scalar> DetectionParams<T> {
    pub fn new(alpha: u32, pr_check: T, n_neighbors: u64, votes_needed: u64) -> Self {
        DetectionParams {
            alpha,
            pr_check,
            n_neighbors,
            votes_needed,
            n_messages: 1,
        }
    }
}

/// Probability that a receiver checks none of `alpha` claimed digests.
pub fn pr_skip<T: Num + Clone>(pr_check: T, alpha: u32) -> T {
    num_traits::pow(T::one() - pr_check, alpha as usize)
}

/// Probability that at least `n` messages reveal, given a single-message probability.
pub fn pr_reveal_after_n<T: Num + Clone>(pr_reveal_single: T, n: u32) -> T {
    T::one() - num_traits::pow(T::one() - pr_reveal_single, n as usize)
}

/// Largest neighbor count whose beacons one verifier can keep up with: 1/(τ·γ).
pub fn baseline_saturation<T: Num + Clone>(tau: T, gamma: T) -> T {
    T::one() / (tau * gamma)
}

fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s = terms
        .iter()
        .fold(T::zero(), |acc, &t| acc + (t - max).exp());
    max + s.ln()
}

/// Probability that at least `votes_needed` of `n_neighbors` receivers detect
/// a false claim (each independently checks at least one of `alpha` digests).
///
/// `votes_needed == 0` gives 1 and `votes_needed > n_neighbors` gives 0.
pub fn pr_reveal<T: Scalar>(params: &DetectionParams<T>) -> T {
    let n = params.n_neighbors;
    let v = params.votes_needed;
    if v == 0 {
        return T::one();
    }
    if v > n {
        return T::zero();
    }
    let c = params.pr_check;
    if c <= T::zero() || params.alpha == 0 {
        return T::zero();
    }
    if c >= T::one() {
        return T::one();
    }
    // skip = (1-c)^α and detect = 1 - skip, both without cancellation
    let alpha = T::from_u32(params.alpha).unwrap();
    let ln_skip = alpha * (-c).ln_1p();
    let detect = -ln_skip.exp_m1();
    let ln_detect = detect.ln();

    let nf = T::from_u64(n).unwrap();
    let mean = nf * detect;
    let vf = T::from_u64(v).unwrap();

    // Log of C(n,i)·skip^(n-i)·detect^i for a range of i, C built incrementally.
    let term = |i: u64, ln_choose: T| {
        let fi = T::from_u64(i).unwrap();
        ln_choose + (nf - fi) * ln_skip + fi * ln_detect
    };
    let ln_choose_step = |ln_choose: T, i: u64| {
        // C(n,i) from C(n,i-1)
        ln_choose + T::from_u64(n - i + 1).unwrap().ln() - T::from_u64(i).unwrap().ln()
    };

    let mut ln_choose = T::zero();
    if vf > mean {
        // upper tail is the small side: sum i = v..=n directly
        for i in 1..v {
            ln_choose = ln_choose_step(ln_choose, i);
        }
        let mut terms = Vec::with_capacity((n - v + 1) as usize);
        for i in v..=n {
            if i > 0 {
                ln_choose = ln_choose_step(ln_choose, i);
            }
            terms.push(term(i, ln_choose));
        }
        log_sum_exp(&terms).exp().min(T::one()).max(T::zero())
    } else {
        let mut terms = Vec::with_capacity(v as usize);
        for i in 0..v {
            if i > 0 {
                ln_choose = ln_choose_step(ln_choose, i);
            }
            terms.push(term(i, ln_choose));
        }
        (T::one() - log_sum_exp(&terms).exp())
            .min(T::one())
            .max(T::zero())
    }
}

/// Monte Carlo estimate with a 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub successes: u64,
    pub trials: u64,
    pub estimate: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        const Z: f64 = 1.959_963_984_540_054;
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z * Z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        let cast = |x: f64| T::from_f64(x).unwrap();
        Estimate {
            successes,
            trials,
            estimate: cast(p),
            lower: if successes == 0 {
                T::zero()
            } else {
                cast((center - half).max(0.0))
            },
            upper: if successes == trials {
                T::one()
            } else {
                cast((center + half).min(1.0))
            },
        }
    }

    pub fn contains(&self, p: T) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// One simulated claim: each receiver flips `alpha` check coins and detects on
/// any success; the claim is revealed when detectors reach `votes_needed`.
fn reveal_trial<T: Scalar, R: Rng + ?Sized>(params: &DetectionParams<T>, rng: &mut R) -> bool {
    let p = params.pr_check.to_f64().unwrap().clamp(0.0, 1.0);
    let mut detectors = 0u64;
    for _ in 0..params.n_neighbors {
        let mut hit = false;
        for _ in 0..params.alpha {
            hit |= rng.random_bool(p);
        }
        if hit {
            detectors += 1;
        }
    }
    detectors >= params.votes_needed
}

pub fn monte_carlo_reveal<T: Scalar, R: Rng + ?Sized>(
    params: &DetectionParams<T>,
    trials: u64,
    rng: &mut R,
) -> Estimate<T> {
    assert!(trials >= 1, "at least one trial");
    let successes = (0..trials).filter(|_| reveal_trial(params, rng)).count() as u64;
    Estimate::from_counts(successes, trials)
}

const SHARD_TRIALS: u64 = 10_000;

/// Parallel variant. Trials are split into fixed-size shards, each with its
/// own stream of a seed-derived generator, so the result depends only on
/// `seed` and not on the number of worker threads.
pub fn monte_carlo_reveal_seeded<T: Scalar>(
    params: &DetectionParams<T>,
    trials: u64,
    seed: u64,
) -> Estimate<T> {
    assert!(trials >= 1, "at least one trial");
    let shards = trials.div_ceil(SHARD_TRIALS);
    let successes: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = SimRng::seed_from_u64(seed);
            rng.set_stream(s);
            let n = SHARD_TRIALS.min(trials - s * SHARD_TRIALS);
            (0..n).filter(|_| reveal_trial(params, &mut rng)).count() as u64
        })
        .sum();
    Estimate::from_counts(successes, trials)
}
