//! Closed-form outage machinery for a distributed MISO link in Rayleigh fading.
//!
//! Every received power `H_n = |h_n|^2 P_n` is exponential with mean `P_n`.
//! The sum over a cooperating set of distinct means is hypoexponential, with
//! CCDF
//!
//! ```text
//! P(sum H_n > x) = sum_n exp(-x / P_n) / prod_{j != n} (1 - P_j / P_n)
//! ```
//!
//! and conditioning on the interferer draws gives the outage probability
//!
//! ```text
//! P_out(g) = 1 - sum_n exp(-g s2 / P_n) prod_{j != n} P_n / (P_n - P_j)
//!                                         prod_{k}      P_n / (P_k g + P_n)
//! ```
//!
//! The alternating signs of the partial-fraction weights make the sum lose
//! precision when serving powers cluster. [`OutageModel`] evaluates each term
//! as log-magnitude plus sign, sums with compensation, and falls back to a
//! seeded Monte-Carlo estimate when the cancellation ratio gets too large.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{self, EmpiricalCdf};
use crate::numeric::{CompensatedSum, DoubleDouble, FloatHasher};

/// Default minimum pairwise relative gap between serving powers.
pub const MIN_RELATIVE_GAP: f64 = 1e-6;
/// Default limit on `max |term| / |result|` before the oracle takes over.
pub const CANCELLATION_LIMIT: f64 = 1e12;
/// Default sample count for the Monte-Carlo fallback.
pub const FALLBACK_SAMPLES: usize = 1_000_000;
/// Largest success term above which the sum is redone in double-double.
const PRECISE_TRIGGER: f64 = 64.0;

/// Renormalisation point for running products of interferer factors.
const PRODUCT_RESCALE: f64 = 1e250;

/// Ordered list of average received powers in a linear unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerSet(Vec<f64>);

impl PowerSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidPower { index, value });
            }
        }
        Ok(PowerSet(values))
    }

    pub fn empty() -> Self {
        PowerSet(Vec::new())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every power multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PowerSet::new(self.0.iter().map(|p| p * factor).collect())
    }

    /// Smallest `|P_i - P_j| / max(P_i, P_j)` over all pairs, or `None` for
    /// fewer than two powers.
    pub fn min_relative_gap(&self) -> Option<f64> {
        min_relative_gap(&self.0)
    }
}

impl TryFrom<Vec<f64>> for PowerSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        PowerSet::new(values)
    }
}

impl From<PowerSet> for Vec<f64> {
    fn from(set: PowerSet) -> Self {
        set.0
    }
}

/// Serving set, interferers and noise: an outage query without its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkProfile {
    serving: PowerSet,
    interferers: PowerSet,
    noise_power: f64,
}

impl LinkProfile {
    pub fn new(serving: PowerSet, interferers: PowerSet, noise_power: f64) -> Result<Self> {
        if serving.is_empty() {
            return Err(Error::EmptyServingSet);
        }
        if !(noise_power.is_finite() && noise_power >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise power",
                value: noise_power,
            });
        }
        Ok(LinkProfile {
            serving,
            interferers,
            noise_power,
        })
    }

    pub fn from_slices(serving: &[f64], interferers: &[f64], noise_power: f64) -> Result<Self> {
        LinkProfile::new(
            PowerSet::new(serving.to_vec())?,
            PowerSet::new(interferers.to_vec())?,
            noise_power,
        )
    }

    /// Splits powers sorted in descending order into the `k` strongest
    /// servers and the remaining interferers.
    pub fn top_k(powers_desc: &[f64], k: usize, noise_power: f64) -> Result<Self> {
        let k = k.min(powers_desc.len());
        LinkProfile::from_slices(&powers_desc[..k], &powers_desc[k..], noise_power)
    }

    pub fn serving(&self) -> &PowerSet {
        &self.serving
    }

    pub fn interferers(&self) -> &PowerSet {
        &self.interferers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// True when neither interference nor noise is present, so the SINR is
    /// infinite and the outage is zero at every finite threshold.
    pub fn is_interference_free(&self) -> bool {
        self.interferers.is_empty() && self.noise_power == 0.0
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<OutageQuery> {
        OutageQuery::new(self.clone(), threshold)
    }

    /// Seed for the oracle fallback, derived from the link content only so
    /// that every threshold evaluated on one link shares the same draws.
    pub fn content_seed(&self) -> u64 {
        let mut h = FloatHasher::new(0x636f_6d70_5f6f_7574);
        h.write_u64(self.serving.len() as u64);
        for &p in self.serving.as_slice() {
            h.write_f64(p);
        }
        h.write_u64(self.interferers.len() as u64);
        for &p in self.interferers.as_slice() {
            h.write_f64(p);
        }
        h.write_f64(self.noise_power);
        h.finish()
    }
}

/// A link together with the SINR threshold `gamma_th` (linear).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageQuery {
    pub link: LinkProfile,
    threshold: f64,
}

impl OutageQuery {
    pub fn new(link: LinkProfile, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(OutageQuery { link, threshold })
    }

    pub fn from_slices(
        serving: &[f64],
        interferers: &[f64],
        noise_power: f64,
        threshold: f64,
    ) -> Result<Self> {
        OutageQuery::new(
            LinkProfile::from_slices(serving, interferers, noise_power)?,
            threshold,
        )
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Numerical-conditioning policy for the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Conditioning {
    /// Minimum pairwise relative gap between serving powers.
    pub min_relative_gap: f64,
    /// Perturb near-equal powers instead of failing.
    pub perturb: bool,
    /// Cancellation ratio above which the closed form is not trusted.
    pub cancellation_limit: f64,
    /// Allow the Monte-Carlo oracle to replace an untrusted closed form.
    pub allow_fallback: bool,
    pub fallback_samples: usize,
}

impl Default for Conditioning {
    fn default() -> Self {
        Conditioning {
            min_relative_gap: MIN_RELATIVE_GAP,
            perturb: true,
            cancellation_limit: CANCELLATION_LIMIT,
            allow_fallback: true,
            fallback_samples: FALLBACK_SAMPLES,
        }
    }
}

/// What the conditioning policy did to produce a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    /// Smallest pairwise relative gap between the serving powers actually
    /// used; 1 for a single server.
    pub min_relative_gap: f64,
    pub perturbed: bool,
    pub fell_back_to_oracle: bool,
    /// `max |term| / max(|S|, |1 - S|)` for the success sum `S`; 0 when the
    /// closed form was short-circuited.
    pub cancellation_ratio: f64,
}

/// A probability together with its conditioning report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub probability: f64,
    pub report: ConditioningReport,
}

/// A link prepared for repeated outage evaluation at varying thresholds.
///
/// Separation of near-equal powers and the partial-fraction weights are
/// computed once. The oracle fallback is sampled lazily, at most once per
/// model, so a fallback curve is itself a valid (empirical) CDF.
#[derive(Debug)]
pub struct OutageModel {
    link: LinkProfile,
    conditioning: Conditioning,
    serving: Vec<f64>,
    /// `|prod_{j != n} P_n / (P_n - P_j)|` per server; may overflow to
    /// infinity, in which case `weight_log` is used.
    weight_abs: Vec<f64>,
    weight_log: Vec<f64>,
    weight_sign: Vec<f64>,
    weight_dd: Vec<DoubleDouble>,
    min_gap: f64,
    perturbed: bool,
    fallback: OnceLock<EmpiricalCdf>,
}

struct TermSum {
    total: f64,
    max_abs: f64,
}

impl OutageModel {
    pub fn new(link: &LinkProfile, conditioning: &Conditioning) -> Result<Self> {
        let (serving, perturbed) = separate_powers(link.serving.as_slice(), conditioning)?;
        let n = serving.len();
        let mut weight_abs = Vec::with_capacity(n);
        let mut weight_log = Vec::with_capacity(n);
        let mut weight_sign = Vec::with_capacity(n);
        let mut weight_dd = Vec::with_capacity(n);
        for (i, &pn) in serving.iter().enumerate() {
            let mut w = DoubleDouble::ONE;
            let mut prod = 1.0;
            let mut log_mag = 0.0;
            let mut sign = 1.0;
            for (j, &pj) in serving.iter().enumerate() {
                if i == j {
                    continue;
                }
                // exact for close powers (Sterbenz)
                let d = pn - pj;
                if d < 0.0 {
                    sign = -sign;
                }
                let ratio = pn / d.abs();
                w = w.mul_f64(pn).div(DoubleDouble::diff(pn, pj));
                prod *= ratio;
                log_mag += ratio.ln();
            }
            weight_abs.push(prod);
            weight_log.push(log_mag);
            weight_sign.push(sign);
            weight_dd.push(w);
        }
        let min_gap = min_relative_gap(&serving).unwrap_or(1.0);
        Ok(OutageModel {
            link: link.clone(),
            conditioning: *conditioning,
            serving,
            weight_abs,
            weight_log,
            weight_sign,
            weight_dd,
            min_gap,
            perturbed,
            fallback: OnceLock::new(),
        })
    }

    pub fn link(&self) -> &LinkProfile {
        &self.link
    }

    /// Serving powers after the separation policy.
    pub fn effective_serving(&self) -> &[f64] {
        &self.serving
    }

    fn report(&self, fell_back: bool, ratio: f64) -> ConditioningReport {
        ConditioningReport {
            min_relative_gap: self.min_gap,
            perturbed: self.perturbed,
            fell_back_to_oracle: fell_back,
            cancellation_ratio: ratio,
        }
    }

    /// Signed partial-fraction weights `prod_{j != n} P_n / (P_n - P_j)`;
    /// they sum to one.
    pub fn partial_fraction_weights(&self) -> Vec<f64> {
        (0..self.serving.len())
            .map(|n| self.weight_sign[n] * self.weight_magnitude(n, 0.0))
            .collect()
    }

    /// `|w_n| exp(log_factor)` without overflowing when `|w_n|` alone does.
    #[inline]
    fn weight_magnitude(&self, n: usize, log_factor: f64) -> f64 {
        let w = self.weight_abs[n];
        if w.is_finite() && w > 0.0 {
            w * log_factor.exp()
        } else {
            (self.weight_log[n] + log_factor).exp()
        }
    }

    /// Sum of the success terms `exp(-x / P_n) w_n prod_k P_n / (P_k g + P_n)`.
    fn success_terms(&self, noise_term: f64, threshold: f64) -> TermSum {
        let mut acc = CompensatedSum::new();
        let mut max_abs: f64 = 0.0;
        let interferers = self.link.interferers.as_slice();
        for (n, &pn) in self.serving.iter().enumerate() {
            let mut log_factor = -noise_term / pn;
            let mut prod = 1.0;
            if threshold > 0.0 {
                let ratio = threshold / pn;
                for &pk in interferers {
                    prod *= 1.0 + ratio * pk;
                    if prod > PRODUCT_RESCALE {
                        log_factor -= prod.ln();
                        prod = 1.0;
                    }
                }
            }
            let term = self.weight_sign[n] * self.weight_magnitude(n, log_factor) / prod;
            max_abs = max_abs.max(term.abs());
            acc.add(term);
        }
        TermSum {
            total: acc.total(),
            max_abs,
        }
    }

    /// Success terms and their weighted log-slopes: the sum of the terms, and
    /// `sum_n term_n s_n` with `s_n = sigma^2 / P_n + sum_k P_k / (P_n + g P_k)`,
    /// which is the SINR density at `threshold`.
    fn success_and_density(&self, threshold: f64) -> (TermSum, f64) {
        let noise = self.link.noise_power;
        let mut acc = CompensatedSum::new();
        let mut acc_density = CompensatedSum::new();
        let mut max_abs: f64 = 0.0;
        for (n, &pn) in self.serving.iter().enumerate() {
            let mut log_factor = -threshold * noise / pn;
            let mut prod = 1.0;
            let mut slope = noise / pn;
            let ratio = threshold / pn;
            for &pk in self.link.interferers.as_slice() {
                let f = 1.0 + ratio * pk;
                prod *= f;
                slope += pk / (pn * f);
                if prod > PRODUCT_RESCALE {
                    log_factor -= prod.ln();
                    prod = 1.0;
                }
            }
            let term = self.weight_sign[n] * self.weight_magnitude(n, log_factor) / prod;
            max_abs = max_abs.max(term.abs());
            acc.add(term);
            acc_density.add(term * slope);
        }
        let sums = TermSum {
            total: acc.total(),
            max_abs,
        };
        (sums, acc_density.total())
    }

    /// Outage and, if asked, density, with every sum in double-double
    /// arithmetic.
    fn precise(&self, threshold: f64, with_density: bool) -> (f64, f64) {
        const RESCALE: f64 = 1.0e180;
        let gamma = DoubleDouble::new(threshold);
        let noise_term = gamma.mul_f64(self.link.noise_power);
        let mut acc = DoubleDouble::ZERO;
        let mut acc_density = DoubleDouble::ZERO;
        for (n, &pn) in self.serving.iter().enumerate() {
            let p = DoubleDouble::new(pn);
            let ratio = gamma.div(p);
            let mut prod = DoubleDouble::ONE;
            let mut slope = DoubleDouble::new(self.link.noise_power).div(p);
            let mut rescales = 0;
            for &pk in self.link.interferers.as_slice() {
                let f = DoubleDouble::ONE.add(ratio.mul_f64(pk));
                prod = prod.mul(f);
                if with_density {
                    slope = slope.add(DoubleDouble::new(pk).div(f.mul_f64(pn)));
                }
                if prod.hi > RESCALE {
                    prod = prod.scale(1.0 / RESCALE);
                    rescales += 1;
                }
            }
            let mut term = self.weight_dd[n]
                .mul(noise_term.div(p).neg().exp())
                .div(prod);
            for _ in 0..rescales {
                term = term.scale(1.0 / RESCALE);
            }
            acc = acc.add(term);
            if with_density {
                acc_density = acc_density.add(term.mul(slope));
            }
        }
        (DoubleDouble::ONE.sub(acc).to_f64(), acc_density.to_f64())
    }

    /// SINR density `d P_out / d threshold`, or `None` where the closed form
    /// is too ill-conditioned to be trusted (the outage would fall back).
    pub fn density(&self, threshold: f64) -> Result<Option<f64>> {
        check_threshold(threshold)?;
        if self.link.is_interference_free() || threshold == f64::INFINITY {
            return Ok(Some(0.0));
        }
        let (terms, density) = self.success_and_density(threshold);
        let outage = 1.0 - terms.total;
        let ratio = terms.max_abs / outage.abs().max((1.0 - outage).abs());
        if !ratio.is_finite() || ratio > self.conditioning.cancellation_limit {
            return Ok(None);
        }
        let density = if terms.max_abs > PRECISE_TRIGGER {
            self.precise(threshold, true).1
        } else {
            density
        };
        Ok(density.is_finite().then_some(density.max(0.0)))
    }

    /// Outage probability `P(SINR <= threshold)`.
    pub fn evaluate(&self, threshold: f64) -> Result<OutageEstimate> {
        check_threshold(threshold)?;
        if self.link.is_interference_free() {
            return Ok(OutageEstimate {
                probability: 0.0,
                report: self.report(false, 0.0),
            });
        }
        if threshold == 0.0 {
            return Ok(OutageEstimate {
                probability: 0.0,
                report: self.report(false, 0.0),
            });
        }
        if threshold == f64::INFINITY {
            return Ok(OutageEstimate {
                probability: 1.0,
                report: self.report(false, 0.0),
            });
        }
        let noise_term = threshold * self.link.noise_power;
        let terms = self.success_terms(noise_term, threshold);
        let mut outage = 1.0 - terms.total;
        let ratio = terms.max_abs / outage.abs().max((1.0 - outage).abs());
        if terms.max_abs > PRECISE_TRIGGER && ratio <= self.conditioning.cancellation_limit {
            let (precise, _) = self.precise(threshold, false);
            if precise.is_finite() {
                outage = precise;
            }
        }
        if !outage.is_finite() || !ratio.is_finite() || ratio > self.conditioning.cancellation_limit
        {
            if !self.conditioning.allow_fallback {
                return Err(Error::IllConditioned { ratio });
            }
            let probability = self.fallback_cdf().fraction_at_or_below(threshold);
            return Ok(OutageEstimate {
                probability,
                report: self.report(true, ratio),
            });
        }
        Ok(OutageEstimate {
            probability: outage.clamp(0.0, 1.0),
            report: self.report(false, ratio),
        })
    }

    fn fallback_cdf(&self) -> &EmpiricalCdf {
        self.fallback.get_or_init(|| {
            let seed = self.link.content_seed();
            log::debug!(
                "closed form ill-conditioned; sampling {} SINR draws with seed {seed:#x}",
                self.conditioning.fallback_samples
            );
            EmpiricalCdf::from_samples(montecarlo::sample_sinr(
                &self.link,
                seed,
                self.conditioning.fallback_samples.max(1),
            ))
        })
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidParameter {
            name: "SINR threshold",
            value: threshold,
        });
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

fn min_relative_gap(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // For positive values the closest pair in ratio is adjacent once sorted.
    sorted
        .windows(2)
        .map(|w| relative_gap(w[0], w[1]))
        .reduce(f64::min)
}

/// Applies the separation policy: powers are visited from strongest to
/// weakest and any power within `min_relative_gap` of an already accepted one
/// is pulled down by factors `1 - k * min_relative_gap`, `k = 1, 2, ...`.
///
/// Returns the powers in their original order and whether anything moved.
pub fn separate_powers(values: &[f64], conditioning: &Conditioning) -> Result<(Vec<f64>, bool)> {
    let min_gap = conditioning.min_relative_gap;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut out = values.to_vec();
    let mut accepted: Vec<f64> = Vec::with_capacity(values.len());
    let mut perturbed = false;
    for &idx in &order {
        let original = values[idx];
        let mut candidate = original;
        let mut k = 0u32;
        while let Some(&clash) = accepted
            .iter()
            .find(|&&a| relative_gap(candidate, a) < min_gap)
        {
            if !conditioning.perturb {
                return Err(Error::DegeneratePowers {
                    first: clash,
                    second: candidate,
                    gap: relative_gap(candidate, clash),
                    min_gap,
                });
            }
            k += 1;
            candidate = original * (1.0 - f64::from(k) * min_gap);
            perturbed = true;
        }
        accepted.push(candidate);
        out[idx] = candidate;
    }
    Ok((out, perturbed))
}

/// Outage probability with the default conditioning policy.
pub fn outage_probability(query: &OutageQuery) -> Result<f64> {
    Ok(evaluate_outage(query, &Conditioning::default())?.probability)
}

/// Outage probability and its conditioning report.
pub fn evaluate_outage(query: &OutageQuery, conditioning: &Conditioning) -> Result<OutageEstimate> {
    OutageModel::new(&query.link, conditioning)?.evaluate(query.threshold)
}

/// Outage of a single-server link:
/// `1 - exp(-g s2 / P_1) prod_k P_1 / (P_1 + g P_k)`.
pub fn siso_outage(
    serving_power: f64,
    interferers: &PowerSet,
    noise_power: f64,
    threshold: f64,
) -> Result<f64> {
    if !(serving_power.is_finite() && serving_power > 0.0) {
        return Err(Error::InvalidPower {
            index: 0,
            value: serving_power,
        });
    }
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise power",
            value: noise_power,
        });
    }
    check_threshold(threshold)?;
    let mut success = (-threshold * noise_power / serving_power).exp();
    for &pk in interferers.as_slice() {
        success *= serving_power / (serving_power + threshold * pk);
    }
    if success.is_nan() {
        // inf * 0 at an infinite threshold
        success = 0.0;
    }
    Ok((1.0 - success).clamp(0.0, 1.0))
}

/// `P(sum_n H_n > x)` for independent exponentials with means `powers`.
pub fn gen_chi2_ccdf(powers: &PowerSet, x: f64) -> Result<f64> {
    Ok(gen_chi2_ccdf_with(powers, x, &Conditioning::default())?.probability)
}

pub fn gen_chi2_ccdf_with(
    powers: &PowerSet,
    x: f64,
    conditioning: &Conditioning,
) -> Result<OutageEstimate> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter {
            name: "CCDF argument",
            value: x,
        });
    }
    // P(sum H > x) is the success probability of a link with noise power x,
    // no interferers and unit threshold.
    let link = LinkProfile::new(powers.clone(), PowerSet::empty(), x)?;
    let est = OutageModel::new(&link, conditioning)?.evaluate(1.0)?;
    Ok(OutageEstimate {
        probability: 1.0 - est.probability,
        report: est.report,
    })
}

/// Density of `sum_n H_n` at `x`:
/// `sum_n exp(-x / P_n) / (P_n prod_{j != n} (1 - P_j / P_n))`.
pub fn gen_chi2_pdf(powers: &PowerSet, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter {
            name: "pdf argument",
            value: x,
        });
    }
    let link = LinkProfile::new(powers.clone(), PowerSet::empty(), 0.0)?;
    let model = OutageModel::new(&link, &Conditioning::default())?;
    let acc: CompensatedSum = model
        .serving
        .iter()
        .enumerate()
        .map(|(n, &pn)| model.weight_sign[n] * model.weight_magnitude(n, -x / pn) / pn)
        .collect();
    Ok(acc.total().max(0.0))
}

/// `2^rate - 1`, accurate for small rates.
pub fn threshold_for_rate(rate: f64) -> f64 {
    (rate * std::f64::consts::LN_2).exp_m1()
}

/// Outage at `gamma = 2^R - 1` for every rate on a non-decreasing grid.
pub fn capacity_cdf(link: &LinkProfile, rate_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(
        capacity_cdf_with(link, rate_grid, &Conditioning::default())?
            .into_iter()
            .map(|e| e.probability)
            .collect(),
    )
}

pub fn capacity_cdf_with(
    link: &LinkProfile,
    rate_grid: &[f64],
    conditioning: &Conditioning,
) -> Result<Vec<OutageEstimate>> {
    check_rate_grid(rate_grid)?;
    let model = OutageModel::new(link, conditioning)?;
    rate_grid
        .iter()
        .map(|&r| model.evaluate(threshold_for_rate(r)))
        .collect()
}

pub(crate) fn check_rate_grid(rate_grid: &[f64]) -> Result<()> {
    for (index, &r) in rate_grid.iter().enumerate() {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidParameter {
                name: "rate",
                value: r,
            });
        }
        if index > 0 && r < rate_grid[index - 1] {
            return Err(Error::UnsortedGrid { index });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(s: &[f64], i: &[f64], noise: f64, g: f64) -> OutageQuery {
        OutageQuery::from_slices(s, i, noise, g).unwrap()
    }

    #[test]
    fn single_term_ccdf_is_exponential() {
        let p = PowerSet::new(vec![2.5]).unwrap();
        for x in [0.0, 0.3, 1.0, 7.0] {
            let v = gen_chi2_ccdf(&p, x).unwrap();
            assert!((v - (-x / 2.5f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn ccdf_at_zero_is_one() {
        let p = PowerSet::new(vec![1.0, 3.0, 0.2, 0.7]).unwrap();
        assert_eq!(gen_chi2_ccdf(&p, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ccdf_two_powers() {
        let p = PowerSet::new(vec![1.0, 2.0]).unwrap();
        let expected = -(-1.0f64).exp() + 2.0 * (-0.5f64).exp();
        assert!((gen_chi2_ccdf(&p, 1.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.845182).abs() < 1e-6);
    }

    #[test]
    fn siso_hand_value() {
        let p = outage_probability(&query(&[1.0], &[0.5], 0.0, 1.0)).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        let i = PowerSet::new(vec![0.9, 1.1]).unwrap();
        let s = siso_outage(1.0, &i, 0.0, 1.0).unwrap();
        assert!((s - (1.0 - 1.0 / (1.9 * 2.1))).abs() < 1e-15);
        assert!((s - 0.74937).abs() < 1e-5);
    }

    #[test]
    fn miso_hand_value() {
        let p = outage_probability(&query(&[1.0, 2.0], &[0.5], 0.0, 1.0)).unwrap();
        assert!((p - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn zero_threshold_and_interference_free() {
        assert_eq!(
            outage_probability(&query(&[1.0, 2.0], &[0.5, 3.0], 0.1, 0.0)).unwrap(),
            0.0
        );
        assert_eq!(
            outage_probability(&query(&[1.0], &[], 0.0, 1e9)).unwrap(),
            0.0
        );
        let empty = PowerSet::empty();
        assert_eq!(siso_outage(1.0, &empty, 0.0, 1e9).unwrap(), 0.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(
            PowerSet::new(vec![1.0, 0.0]),
            Err(Error::InvalidPower { index: 1, .. })
        ));
        assert!(matches!(
            PowerSet::new(vec![f64::NAN]),
            Err(Error::InvalidPower { .. })
        ));
        assert_eq!(
            LinkProfile::from_slices(&[], &[1.0], 0.0),
            Err(Error::EmptyServingSet)
        );
        assert!(LinkProfile::from_slices(&[1.0], &[], -1.0).is_err());
        assert!(OutageQuery::from_slices(&[1.0], &[], 0.0, -0.5).is_err());
        assert!(capacity_cdf(
            &LinkProfile::from_slices(&[1.0], &[0.2], 0.0).unwrap(),
            &[1.0, 0.5]
        )
        .is_err());
    }

    #[test]
    fn duplicates_error_without_perturbation() {
        let cond = Conditioning {
            perturb: false,
            ..Conditioning::default()
        };
        let q = query(&[1.0, 1.0], &[0.5], 0.0, 1.0);
        assert!(matches!(
            evaluate_outage(&q, &cond),
            Err(Error::DegeneratePowers { .. })
        ));
    }

    #[test]
    fn duplicates_are_separated_downward() {
        let cond = Conditioning::default();
        let (out, moved) = separate_powers(&[1.0, 1.0, 1.0, 0.5], &cond).unwrap();
        assert!(moved);
        assert_eq!(out[0], 1.0);
        assert!(out[1] < 1.0 && out[2] < out[1]);
        assert_eq!(out[3], 0.5);
        assert!(min_relative_gap(&out).unwrap() >= MIN_RELATIVE_GAP * (1.0 - 1e-9));

        let est = evaluate_outage(&query(&[1.0, 1.0], &[0.5], 0.0, 1.0), &cond).unwrap();
        assert!(est.report.perturbed);
        assert!(!est.report.fell_back_to_oracle);
        // Gamma(2, 1) against Exp(mean 0.5): P(S <= H) = E[exp(-S / 0.5)] = (1/3)^2.
        assert!((est.probability - 1.0 / 9.0).abs() < 1e-4);
    }

    #[test]
    fn clustered_servers_fall_back() {
        let cond = Conditioning {
            fallback_samples: 20_000,
            ..Conditioning::default()
        };
        let s: Vec<f64> = (0..6).map(|i| 1.0 - 1e-5 * i as f64).collect();
        let est = evaluate_outage(&query(&s, &[0.5, 0.2], 0.0, 2.0), &cond).unwrap();
        assert!(est.report.fell_back_to_oracle);
        assert!((0.0..=1.0).contains(&est.probability));

        let strict = Conditioning {
            allow_fallback: false,
            ..cond
        };
        assert!(matches!(
            evaluate_outage(&query(&s, &[0.5, 0.2], 0.0, 2.0), &strict),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn large_weights_keep_full_accuracy() {
        // weights up to 4e4; reference from a 60-digit evaluation of the same sum
        let s = [
            0.3680642802031569,
            0.17548681788345355,
            0.4268445914930737,
            0.3345787069104985,
            0.16785970821613597,
            0.35421504459276104,
            0.43561177548369273,
            0.04373375541452974,
        ];
        let i = [
            0.16739045495747734,
            0.19799754005180592,
            0.305585961676821,
            0.018034239137936624,
            0.02074936818699571,
            0.7071977486832226,
            0.04198985504006991,
            0.4585010477743916,
            0.8508263049156812,
            0.01122349450974062,
        ];
        let g = 0.16806265449815957;
        let reference = 0.0040500144061668365;
        for c in [1.0, 658.7694096613426, 1e-12] {
            let scale = |v: &[f64]| v.iter().map(|p| p * c).collect::<Vec<_>>();
            let p = outage_probability(&query(&scale(&s), &scale(&i), 0.0, g)).unwrap();
            assert!((p - reference).abs() < 1e-15, "scale {c}: {p}");
        }
    }

    #[test]
    fn density_matches_derivative() {
        let cond = Conditioning::default();
        // SISO: P = 1 - 1 / (1 + g/2), P' = 0.5 / (1 + g/2)^2
        let m = OutageModel::new(
            &LinkProfile::from_slices(&[1.0], &[0.5], 0.0).unwrap(),
            &cond,
        )
        .unwrap();
        assert!((m.density(1.0).unwrap().unwrap() - 0.5 / 2.25).abs() < 1e-15);
        let cases: [(&[f64], &[f64], f64); 3] = [
            (&[1.0, 2.0], &[0.5], 0.0),
            (&[0.9, 0.5, 0.2], &[0.4, 0.1, 0.05], 0.3),
            (&[1.0, 0.999, 0.998], &[0.2], 0.0),
        ];
        for (s, i, noise) in cases {
            let m =
                OutageModel::new(&LinkProfile::from_slices(s, i, noise).unwrap(), &cond).unwrap();
            for g in [0.05, 0.7, 3.0] {
                let h = g * 1e-5;
                let fd = (m.evaluate(g + h).unwrap().probability
                    - m.evaluate(g - h).unwrap().probability)
                    / (2.0 * h);
                let d = m.density(g).unwrap().unwrap();
                assert!(
                    (d - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
                    "{s:?} g {g}: {d} vs {fd}"
                );
            }
        }
        let free =
            OutageModel::new(&LinkProfile::from_slices(&[1.0], &[], 0.0).unwrap(), &cond).unwrap();
        assert_eq!(free.density(2.0).unwrap(), Some(0.0));
    }

    #[test]
    fn pdf_integrates_to_ccdf() {
        let p = PowerSet::new(vec![1.0, 2.0, 0.3]).unwrap();
        // trapezoid on [0, 40]
        let n = 200_000;
        let h = 40.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * gen_chi2_pdf(&p, i as f64 * h).unwrap();
        }
        assert!((acc * h - 1.0).abs() < 1e-6);
        assert!(gen_chi2_pdf(&p, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn capacity_cdf_matches_threshold_map() {
        let link = LinkProfile::from_slices(&[1.0, 2.0], &[0.5], 0.0).unwrap();
        let cdf = capacity_cdf(&link, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf[0], 0.0);
        assert!((cdf[1] - 1.0 / 15.0).abs() < 1e-14);
        assert!(cdf[2] >= cdf[1]);
    }

    #[test]
    fn power_set_serde_validates() {
        let p: PowerSet = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(p.as_slice(), &[1.0, 2.0]);
        assert!(serde_json::from_str::<PowerSet>("[1.0, -2.0]").is_err());
    }
}
