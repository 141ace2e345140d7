//! Monte-Carlo SINR oracle.
//!
//! Each fading draw `H_n = |h_n|^2 P_n` is sampled directly as an exponential
//! with mean `P_n`. Samples are produced in fixed-size chunks; chunk `c` uses
//! a generator seeded from `(seed, c)`, so the output depends only on
//! `(link, seed, n_samples)` and never on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::analytic::{check_rate_grid, LinkProfile};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;

/// Samples per independently seeded chunk.
pub const CHUNK_SAMPLES: usize = 1 << 14;

/// Stand-in for an infinite SINR (no interference and no noise).
pub const INFINITE_SINR: f64 = f64::MAX;

/// Generator type behind every seeded stream in the crate.
pub type StreamRng = Xoshiro256PlusPlus;

/// Generator for chunk `chunk` of the sample stream keyed by `seed`.
pub fn chunk_rng(seed: u64, chunk: usize) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, chunk as u64))
}

/// One joint fading realisation of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSample {
    pub serving_draws: Vec<f64>,
    pub interferer_draws: Vec<f64>,
}

impl FadingSample {
    pub fn draw<R: Rng + ?Sized>(link: &LinkProfile, rng: &mut R) -> Self {
        let mut exp = |p: &f64| p * rng.sample::<f64, _>(Exp1);
        FadingSample {
            serving_draws: link.serving().as_slice().iter().map(&mut exp).collect(),
            interferer_draws: link.interferers().as_slice().iter().map(&mut exp).collect(),
        }
    }

    pub fn sinr(&self, noise_power: f64) -> f64 {
        sinr(
            self.serving_draws.iter().sum(),
            self.interferer_draws.iter().sum(),
            noise_power,
        )
    }
}

#[inline]
fn sinr(signal: f64, interference: f64, noise_power: f64) -> f64 {
    let denom = interference + noise_power;
    if denom == 0.0 {
        INFINITE_SINR
    } else {
        (signal / denom).min(INFINITE_SINR)
    }
}

/// `n_samples` independent SINR realisations of `link`.
pub fn sample_sinr(link: &LinkProfile, seed: u64, n_samples: usize) -> Vec<f64> {
    let serving = link.serving().as_slice();
    let interferers = link.interferers().as_slice();
    let noise = link.noise_power();
    let mut out = vec![0.0; n_samples];
    out.par_chunks_mut(CHUNK_SAMPLES)
        .enumerate()
        .for_each(|(chunk, slots)| {
            let mut rng = chunk_rng(seed, chunk);
            for slot in slots {
                let mut s = 0.0;
                for &p in serving {
                    s += p * rng.sample::<f64, _>(Exp1);
                }
                let mut i = 0.0;
                for &p in interferers {
                    i += p * rng.sample::<f64, _>(Exp1);
                }
                *slot = sinr(s, i, noise);
            }
        });
    out
}

/// SINR samples for the nested serving sets made of the `K` strongest powers,
/// `K = 1..=min(n_max, len)`, with every other power interfering.
///
/// All sets share the same fading draws. `powers_desc` must be sorted in
/// descending order. Returns one sample vector per `K`.
pub fn sample_nested_sinr(
    powers_desc: &[f64],
    n_max: usize,
    noise_power: f64,
    seed: u64,
    n_samples: usize,
) -> Vec<Vec<f64>> {
    let k_max = n_max.min(powers_desc.len());
    if k_max == 0 {
        return Vec::new();
    }
    let (head, tail) = powers_desc.split_at(k_max);
    let mut flat = vec![0.0; n_samples * k_max];
    flat.par_chunks_mut(CHUNK_SAMPLES * k_max)
        .enumerate()
        .for_each(|(chunk, rows)| {
            let mut rng = chunk_rng(seed, chunk);
            let mut draws = vec![0.0; k_max];
            for row in rows.chunks_exact_mut(k_max) {
                for (d, &p) in draws.iter_mut().zip(head) {
                    *d = p * rng.sample::<f64, _>(Exp1);
                }
                let mut interference = 0.0;
                for &p in tail {
                    interference += p * rng.sample::<f64, _>(Exp1);
                }
                // Walk K downward: server K+1 joins the interference.
                let mut signal: f64 = draws.iter().sum();
                for k in (0..k_max).rev() {
                    row[k] = sinr(signal, interference, noise_power);
                    signal -= draws[k];
                    interference += draws[k];
                }
            }
        });
    (0..k_max)
        .map(|k| flat.iter().skip(k).step_by(k_max).copied().collect())
        .collect()
}

/// Fraction of samples at or below `threshold`.
pub fn empirical_outage(samples: &[f64], threshold: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let hits = samples.iter().filter(|&&g| g <= threshold).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Capacity `log2(1 + gamma)` of an SINR sample.
pub fn capacity(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// Fraction of samples with `log2(1 + gamma) <= R` at each rate of a
/// non-decreasing grid.
pub fn empirical_capacity_cdf(samples: &[f64], rate_grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_rate_grid(rate_grid)?;
    let cdf = EmpiricalCdf::from_samples(samples.iter().map(|&g| capacity(g)).collect());
    Ok(rate_grid
        .iter()
        .map(|&r| cdf.fraction_at_or_below(r))
        .collect())
}

/// Empirical distribution function of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted_values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_unstable_by(|a, b| a.total_cmp(b));
        EmpiricalCdf {
            sorted_values: samples,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// `#{v <= x} / n`; 0 for an empty set.
    pub fn fraction_at_or_below(&self, x: f64) -> f64 {
        if self.sorted_values.is_empty() {
            return 0.0;
        }
        let count = self.sorted_values.partition_point(|&v| v <= x);
        count as f64 / self.sorted_values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(s: &[f64], i: &[f64], noise: f64) -> LinkProfile {
        LinkProfile::from_slices(s, i, noise).unwrap()
    }

    #[test]
    fn counting_examples() {
        assert_eq!(empirical_outage(&[0.5, 1.5], 1.0).unwrap(), 0.5);
        assert_eq!(empirical_outage(&[INFINITE_SINR; 4], 1e9).unwrap(), 0.0);
        assert_eq!(empirical_outage(&[], 1.0), Err(Error::EmptySamples));
        assert_eq!(
            empirical_capacity_cdf(&[1.0], &[0.5, 1.0, 1.5]).unwrap(),
            vec![0.0, 1.0, 1.0]
        );
        assert_eq!(
            empirical_capacity_cdf(&[0.3, 2.0], &[0.0]).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn interference_free_gives_sentinel() {
        let s = sample_sinr(&link(&[1.0], &[], 0.0), 1, 10);
        assert!(s.iter().all(|&g| g == INFINITE_SINR));
        assert_eq!(capacity(INFINITE_SINR), 1024.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let l = link(&[1.0, 0.4], &[0.3, 0.1], 0.05);
        let a = sample_sinr(&l, 99, 40_000);
        let b = sample_sinr(&l, 99, 40_000);
        let c = sample_sinr(&l, 100, 40_000);
        assert_eq!(a, b);
        assert_ne!(a, c);
        // A prefix is the same stream regardless of the total count.
        let short = sample_sinr(&l, 99, 20_000);
        assert_eq!(&a[..20_000], &short[..]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let l = link(&[1.0, 0.4], &[0.3, 0.1], 0.0);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| sample_nested_sinr(&[1.0, 0.4, 0.3, 0.1], 3, 0.0, 5, 50_000));
        let b = four.install(|| sample_nested_sinr(&[1.0, 0.4, 0.3, 0.1], 3, 0.0, 5, 50_000));
        assert_eq!(a, b);
        let c = one.install(|| sample_sinr(&l, 5, 50_000));
        let d = four.install(|| sample_sinr(&l, 5, 50_000));
        assert_eq!(c, d);
    }

    #[test]
    fn nested_sets_are_pathwise_ordered() {
        let sets = sample_nested_sinr(&[1.0, 0.7, 0.2, 0.1, 0.05], 4, 0.01, 3, 10_000);
        assert_eq!(sets.len(), 4);
        for k in 1..4 {
            for (a, b) in sets[k - 1].iter().zip(&sets[k]) {
                assert!(b >= a);
            }
        }
    }

    #[test]
    fn noise_only_mean() {
        let s = sample_sinr(&link(&[1.0], &[], 1.0), 17, 1_000_000);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn exponential_marginals() {
        let l = link(&[2.0, 0.5], &[0.1], 0.0);
        let mut rng = chunk_rng(7, 0);
        let n = 200_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let f = FadingSample::draw(&l, &mut rng);
            assert!(f
                .serving_draws
                .iter()
                .chain(&f.interferer_draws)
                .all(|&d| d >= 0.0));
            sums[0] += f.serving_draws[0];
            sums[1] += f.serving_draws[1];
            sums[2] += f.interferer_draws[0];
        }
        for (sum, p) in sums.iter().zip([2.0, 0.5, 0.1]) {
            let mean = sum / n as f64;
            // exponential standard deviation equals its mean
            let se = p / (n as f64).sqrt();
            assert!((mean - p).abs() < 3.0 * se, "mean {mean} vs {p}");
        }
    }

    #[test]
    fn empirical_cdf_limits() {
        let cdf = EmpiricalCdf::from_samples(vec![3.0, 1.0, 2.0]);
        assert_eq!(cdf.sorted_values(), &[1.0, 2.0, 3.0]);
        assert_eq!(cdf.fraction_at_or_below(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf.fraction_at_or_below(f64::INFINITY), 1.0);
        assert_eq!(cdf.fraction_at_or_below(2.0), 2.0 / 3.0);
    }
}
