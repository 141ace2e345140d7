//! Rate and cooperating-set optimisation on top of the closed form.
//!
//! * goodput `G = max_g log2(1 + g) (1 - P_out(g))`,
//! * capacity at a fixed outage `log2(1 + g_o) (1 - p_o)` with `P_out(g_o) = p_o`,
//! * best set `N* = argmax_K G(N_K) / K` over the nested top-`K` sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Conditioning, LinkProfile, OutageModel};
use crate::error::{Error, Result};
use crate::numeric::log_space;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Search interval and resolution for the SINR threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBounds {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Points of the coarse log-spaced grid.
    pub grid_points: usize,
    /// Relative bracket width at which golden-section refinement stops; used
    /// only where the closed-form slope is unavailable.
    pub rel_tol: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            gamma_lo: 1e-4,
            gamma_hi: 1e6,
            grid_points: 256,
            rel_tol: 1e-6,
        }
    }
}

impl SearchBounds {
    fn validate(&self) -> Result<()> {
        let ok = self.gamma_lo.is_finite()
            && self.gamma_hi.is_finite()
            && self.gamma_lo > 0.0
            && self.gamma_hi > self.gamma_lo;
        if !ok {
            return Err(Error::InvalidBounds {
                lo: self.gamma_lo,
                hi: self.gamma_hi,
            });
        }
        if self.grid_points < 2 || self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "search resolution",
                value: self.grid_points as f64,
            });
        }
        Ok(())
    }
}

/// Maximiser of the goodput objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptimum {
    pub gamma_star: f64,
    /// `log2(1 + gamma_star)` in bit/s/Hz.
    pub rate_star: f64,
    pub goodput: f64,
    pub outage_at_optimum: f64,
    /// Outage is identically zero; the optimum was pinned to `gamma_hi`.
    pub saturated: bool,
    pub fell_back_to_oracle: bool,
}

/// Solution of `P_out(gamma_o) = p_o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedOutage {
    pub gamma_o: f64,
    /// `log2(1 + gamma_o) (1 - p_o)`.
    pub capacity: f64,
    pub outage_at_gamma_o: f64,
    pub fell_back_to_oracle: bool,
}

fn rate_of(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

struct Objective<'a> {
    model: &'a OutageModel,
    fell_back: bool,
}

impl Objective<'_> {
    /// Goodput and outage at `gamma = exp(t)`.
    fn at_log(&mut self, t: f64) -> Result<(f64, f64)> {
        self.at(t.exp())
    }

    fn at(&mut self, gamma: f64) -> Result<(f64, f64)> {
        let est = self.model.evaluate(gamma)?;
        self.fell_back |= est.report.fell_back_to_oracle;
        Ok((rate_of(gamma) * (1.0 - est.probability), est.probability))
    }
}

/// Width in `log(gamma)` at which derivative bisection stops.
const SLOPE_TOL: f64 = 1e-13;

/// `d G / d log(gamma)` up to the positive factor `gamma`, or `None` when the
/// closed form is not differentiable there (oracle fallback).
fn goodput_slope(model: &OutageModel, t: f64) -> Result<Option<f64>> {
    let gamma = t.exp();
    let est = model.evaluate(gamma)?;
    if est.report.fell_back_to_oracle {
        return Ok(None);
    }
    Ok(model.density(gamma)?.map(|density| {
        (1.0 - est.probability) / ((1.0 + gamma) * std::f64::consts::LN_2)
            - rate_of(gamma) * density
    }))
}

/// Root of the goodput slope in `[a, b]` when it changes sign from rising to
/// falling there.
fn slope_root(model: &OutageModel, mut a: f64, mut b: f64) -> Result<Option<f64>> {
    match (goodput_slope(model, a)?, goodput_slope(model, b)?) {
        (Some(da), Some(db)) if da > 0.0 && db < 0.0 => {}
        _ => return Ok(None),
    }
    while b - a > SLOPE_TOL * a.abs().max(1.0) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        match goodput_slope(model, m)? {
            Some(d) if d > 0.0 => a = m,
            Some(_) => b = m,
            None => return Ok(None),
        }
    }
    Ok(Some(0.5 * (a + b)))
}

fn golden_section(obj: &mut Objective, mut a: f64, mut b: f64, rel_tol: f64) -> Result<f64> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = obj.at_log(c)?.0;
    let mut fd = obj.at_log(d)?.0;
    while b - a > rel_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = obj.at_log(c)?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = obj.at_log(d)?.0;
        }
    }
    Ok(0.5 * (a + b))
}

/// Goodput maximisation over `[gamma_lo, gamma_hi]`.
pub fn maximize_goodput(
    link: &LinkProfile,
    bounds: &SearchBounds,
    conditioning: &Conditioning,
) -> Result<RateOptimum> {
    let model = OutageModel::new(link, conditioning)?;
    maximize_goodput_model(&model, bounds)
}

/// [`maximize_goodput`] on an already prepared model.
pub fn maximize_goodput_model(model: &OutageModel, bounds: &SearchBounds) -> Result<RateOptimum> {
    bounds.validate()?;
    if model.link().is_interference_free() {
        let rate = rate_of(bounds.gamma_hi);
        return Ok(RateOptimum {
            gamma_star: bounds.gamma_hi,
            rate_star: rate,
            goodput: rate,
            outage_at_optimum: 0.0,
            saturated: true,
            fell_back_to_oracle: false,
        });
    }
    let mut obj = Objective {
        model,
        fell_back: false,
    };

    let grid = log_space(bounds.gamma_lo, bounds.gamma_hi, bounds.grid_points);
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    for (i, &g) in grid.iter().enumerate() {
        let (value, outage) = obj.at(g)?;
        if value > best.0 {
            best = (value, i, outage);
        }
    }
    let (grid_value, best_idx, grid_outage) = best;

    // Refine in log(gamma) between the grid neighbours: bisection on the sign
    // of the derivative when the density is available, else golden section.
    let a = grid[best_idx.saturating_sub(1)].ln();
    let b = grid[(best_idx + 1).min(grid.len() - 1)].ln();
    let t_star = match slope_root(model, a, b)? {
        Some(t) => t,
        None => golden_section(&mut obj, a, b, bounds.rel_tol)?,
    };
    let (refined, refined_outage) = obj.at_log(t_star)?;

    let (gamma_star, goodput, outage) = if refined >= grid_value {
        (t_star.exp(), refined, refined_outage)
    } else {
        (grid[best_idx], grid_value, grid_outage)
    };
    if goodput <= 0.0 {
        return Err(Error::ZeroObjective {
            lo: bounds.gamma_lo,
            hi: bounds.gamma_hi,
        });
    }
    let rate_star = rate_of(gamma_star);
    Ok(RateOptimum {
        gamma_star,
        rate_star,
        goodput: rate_star * (1.0 - outage),
        outage_at_optimum: outage,
        saturated: false,
        fell_back_to_oracle: obj.fell_back,
    })
}

/// Finds `gamma_o` in `(0, gamma_cap]` with `|P_out(gamma_o) - p_o| <= 1e-6`
/// by bisection on the non-decreasing outage curve.
pub fn capacity_at_fixed_outage(
    link: &LinkProfile,
    target: f64,
    gamma_cap: f64,
    conditioning: &Conditioning,
) -> Result<FixedOutage> {
    let model = OutageModel::new(link, conditioning)?;
    capacity_at_fixed_outage_model(&model, target, gamma_cap)
}

/// Residual the bisection aims for; well inside the 1e-6 contract.
const ROOT_RESIDUAL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 400;

pub fn capacity_at_fixed_outage_model(
    model: &OutageModel,
    target: f64,
    gamma_cap: f64,
) -> Result<FixedOutage> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter {
            name: "outage target",
            value: target,
        });
    }
    if !(gamma_cap.is_finite() && gamma_cap > 0.0) {
        return Err(Error::InvalidBounds {
            lo: 0.0,
            hi: gamma_cap,
        });
    }
    let mut fell_back = false;
    let mut eval = |g: f64| -> Result<f64> {
        let est = model.evaluate(g)?;
        fell_back |= est.report.fell_back_to_oracle;
        Ok(est.probability)
    };

    let at_cap = eval(gamma_cap)?;
    if at_cap < target {
        return Err(Error::NoSolution {
            target,
            cap: gamma_cap,
            reached: at_cap,
        });
    }
    // P_out(0) = 0 < target <= P_out(cap)
    let (mut lo, mut hi) = (0.0f64, gamma_cap);
    let (mut p_lo, mut p_hi) = (0.0f64, at_cap);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = eval(mid)?;
        if p < target {
            lo = mid;
            p_lo = p;
        } else {
            hi = mid;
            p_hi = p;
        }
        if (p - target).abs() <= ROOT_RESIDUAL {
            break;
        }
    }
    let (gamma_o, outage) = if (p_lo - target).abs() < (p_hi - target).abs() && lo > 0.0 {
        (lo, p_lo)
    } else {
        (hi, p_hi)
    };
    Ok(FixedOutage {
        gamma_o,
        capacity: rate_of(gamma_o) * (1.0 - target),
        outage_at_gamma_o: outage,
        fell_back_to_oracle: fell_back,
    })
}

/// Score used to rank cooperating sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum Criterion {
    /// Maximum goodput over the transmission rate.
    Goodput,
    /// Capacity with outage at the given outage probability.
    FixedOutage(f64),
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Goodput => write!(f, "goodput"),
            Criterion::FixedOutage(p) => write!(f, "{p}"),
        }
    }
}

/// Evaluation of one nested candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub size: usize,
    /// Goodput (or capacity with outage) of the set, before division by size.
    pub goodput: f64,
    /// `goodput / size` in bit/s/Hz/BS.
    pub spectral_efficiency: f64,
    /// Optimal threshold (goodput) or `gamma_o` (fixed outage).
    pub gamma: f64,
    pub outage: f64,
    /// `gamma` was pinned to the search cap: zero outage (goodput) or the
    /// target not reached below the cap (fixed outage).
    pub saturated: bool,
    pub fell_back_to_oracle: bool,
}

/// The chosen cooperating set and the scores of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSelection {
    pub chosen_set: Vec<u32>,
    pub set_size: usize,
    pub per_bs_spectral_efficiency: f64,
    pub per_candidate_scores: Vec<CandidateScore>,
}

impl SetSelection {
    pub fn chosen(&self) -> &CandidateScore {
        &self.per_candidate_scores[self.set_size - 1]
    }

    pub fn any_fallback(&self) -> bool {
        self.per_candidate_scores
            .iter()
            .any(|c| c.fell_back_to_oracle)
    }
}

/// Everything the optimisers need besides the link itself.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub search: SearchBounds,
    pub conditioning: Conditioning,
}

/// Scores one link under a criterion.
pub fn score_link(
    link: &LinkProfile,
    criterion: Criterion,
    settings: &OptimizerSettings,
) -> Result<CandidateScore> {
    let model = OutageModel::new(link, &settings.conditioning)?;
    let size = link.serving().len();
    let (goodput, gamma, outage, saturated, fell_back) = match criterion {
        Criterion::Goodput => {
            let opt = maximize_goodput_model(&model, &settings.search)?;
            (
                opt.goodput,
                opt.gamma_star,
                opt.outage_at_optimum,
                opt.saturated,
                opt.fell_back_to_oracle,
            )
        }
        Criterion::FixedOutage(target) => {
            let cap = settings.search.gamma_hi;
            match capacity_at_fixed_outage_model(&model, target, cap) {
                Ok(fo) => (
                    fo.capacity,
                    fo.gamma_o,
                    fo.outage_at_gamma_o,
                    false,
                    fo.fell_back_to_oracle,
                ),
                // Target still out of reach at the cap: score the cap itself,
                // a lower bound on the true capacity, and flag it.
                Err(Error::NoSolution { reached, .. }) => {
                    let fell_back = model.evaluate(cap)?.report.fell_back_to_oracle;
                    (rate_of(cap) * (1.0 - target), cap, reached, true, fell_back)
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok(CandidateScore {
        size,
        goodput,
        spectral_efficiency: goodput / size as f64,
        gamma,
        outage,
        saturated,
        fell_back_to_oracle: fell_back,
    })
}

/// Relative margin a larger set must win by to displace a smaller one.
const TIE_TOLERANCE: f64 = 1e-12;

/// Picks the nested set of the `K` strongest stations maximising per-BS
/// spectral efficiency, `K = 1..=n_max`. Every station outside the set
/// interferes. `candidates` holds `(station id, power)` sorted by descending
/// power.
pub fn select_best_set(
    candidates: &[(u32, f64)],
    noise_power: f64,
    n_max: usize,
    criterion: Criterion,
    settings: &OptimizerSettings,
) -> Result<SetSelection> {
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: 0.0,
        });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyServingSet);
    }
    let powers: Vec<f64> = candidates.iter().map(|&(_, p)| p).collect();
    if let Some(i) = powers.windows(2).position(|w| w[0] < w[1]) {
        return Err(Error::UnsortedGrid { index: i + 1 });
    }
    let k_max = n_max.min(powers.len());
    let scores = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            score_link(
                &LinkProfile::top_k(&powers, k, noise_power)?,
                criterion,
                settings,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let incumbent = scores[best].spectral_efficiency;
        if s.spectral_efficiency > incumbent + TIE_TOLERANCE * incumbent.abs() {
            best = i;
        }
    }
    let set_size = best + 1;
    Ok(SetSelection {
        chosen_set: candidates[..set_size].iter().map(|&(id, _)| id).collect(),
        set_size,
        per_bs_spectral_efficiency: scores[best].spectral_efficiency,
        per_candidate_scores: scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(s: &[f64], i: &[f64]) -> LinkProfile {
        LinkProfile::from_slices(s, i, 0.0).unwrap()
    }

    /// Dense log-grid brute force over the default bounds.
    fn brute_force(f: impl Fn(f64) -> f64, points: usize) -> (f64, f64) {
        log_space(1e-4, 1e6, points)
            .into_iter()
            .map(|g| (f(g), g))
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |a, b| if b.0 > a.0 { b } else { a },
            )
    }

    #[test]
    fn siso_goodput_matches_brute_force() {
        // P_out(g) = 1 - 1 / (1 + 0.5 g)
        let (g_bf, arg_bf) = brute_force(|g| rate_of(g) / (1.0 + 0.5 * g), 100_000);
        let opt = maximize_goodput(
            &link(&[1.0], &[0.5]),
            &SearchBounds::default(),
            &Conditioning::default(),
        )
        .unwrap();
        assert!(opt.goodput >= g_bf * (1.0 - 1e-4));
        assert!(opt.goodput <= g_bf * (1.0 + 1e-6));
        assert!((opt.gamma_star / arg_bf - 1.0).abs() < 1e-2);
        assert!((opt.goodput - opt.rate_star * (1.0 - opt.outage_at_optimum)).abs() < 1e-12);
        assert!(!opt.saturated);
    }

    #[test]
    fn miso_goodput_matches_brute_force() {
        // Single interferer, no noise: P_out = E[exp(-S / (g P_k))] = prod_n 1 / (1 + P_n / (g P_k)).
        let success = |g: f64| 1.0 - 1.0 / ((1.0 + 1.0 / (0.5 * g)) * (1.0 + 2.0 / (0.5 * g)));
        let (g_bf, _) = brute_force(|g| rate_of(g) * success(g), 100_000);
        let opt = maximize_goodput(
            &link(&[1.0, 2.0], &[0.5]),
            &SearchBounds::default(),
            &Conditioning::default(),
        )
        .unwrap();
        assert!((opt.goodput / g_bf - 1.0).abs() < 1e-4);
    }

    #[test]
    fn interference_free_saturates() {
        let b = SearchBounds::default();
        let opt = maximize_goodput(&link(&[1.0], &[]), &b, &Conditioning::default()).unwrap();
        assert!(opt.saturated);
        assert_eq!(opt.gamma_star, b.gamma_hi);
        assert_eq!(opt.outage_at_optimum, 0.0);
    }

    #[test]
    fn bad_bounds_rejected() {
        let b = SearchBounds {
            gamma_lo: 1.0,
            gamma_hi: 0.5,
            ..SearchBounds::default()
        };
        assert!(matches!(
            maximize_goodput(&link(&[1.0], &[0.5]), &b, &Conditioning::default()),
            Err(Error::InvalidBounds { .. })
        ));
    }

    #[test]
    fn zero_objective_reported() {
        // Overwhelming noise: outage is 1 to machine precision everywhere.
        let l = LinkProfile::from_slices(&[1e-300], &[1.0], 1e10).unwrap();
        assert!(matches!(
            maximize_goodput(&l, &SearchBounds::default(), &Conditioning::default()),
            Err(Error::ZeroObjective { .. })
        ));
    }

    #[test]
    fn fixed_outage_examples() {
        let c = Conditioning::default();
        let fo = capacity_at_fixed_outage(&link(&[1.0], &[0.5]), 1.0 / 3.0, 1e6, &c).unwrap();
        assert!((fo.gamma_o - 1.0).abs() < 1e-6);
        assert!((fo.capacity - 2.0 / 3.0).abs() < 1e-6);

        let fo = capacity_at_fixed_outage(&link(&[1.0, 2.0], &[0.5]), 1.0 / 15.0, 1e6, &c).unwrap();
        assert!((fo.gamma_o - 1.0).abs() < 1e-6);
        assert!((fo.capacity - 14.0 / 15.0).abs() < 1e-6);
        assert!((fo.outage_at_gamma_o - 1.0 / 15.0).abs() <= 1e-6);

        assert!(matches!(
            capacity_at_fixed_outage(&link(&[1.0], &[]), 1e-9, 1e6, &c),
            Err(Error::NoSolution { .. })
        ));
        assert!(capacity_at_fixed_outage(&link(&[1.0], &[0.5]), 1.0, 1e6, &c).is_err());
    }

    #[test]
    fn single_candidate_is_forced() {
        let sel = select_best_set(
            &[(4, 1.0), (7, 0.1)],
            0.0,
            1,
            Criterion::Goodput,
            &OptimizerSettings::default(),
        )
        .unwrap();
        assert_eq!(sel.chosen_set, vec![4]);
        assert_eq!(sel.set_size, 1);
        assert_eq!(
            sel.per_bs_spectral_efficiency,
            sel.per_candidate_scores[0].goodput
        );
    }

    #[test]
    fn unreachable_target_saturates_in_selection() {
        // {1} vs {1e-9}: P_out(1e6) = 1e-3/(1 + 1e-3), below 0.1
        let sel = select_best_set(
            &[(0, 1.0), (1, 1e-9)],
            0.0,
            1,
            Criterion::FixedOutage(0.1),
            &OptimizerSettings::default(),
        )
        .unwrap();
        let c = sel.chosen();
        assert!(c.saturated);
        assert_eq!(c.gamma, 1e6);
        assert!((c.goodput - rate_of(1e6) * 0.9).abs() < 1e-12);
        assert!((c.outage - 1e-3 / 1.001).abs() < 1e-12);
    }

    #[test]
    fn unsorted_candidates_rejected() {
        let r = select_best_set(
            &[(0, 0.1), (1, 1.0)],
            0.0,
            2,
            Criterion::Goodput,
            &OptimizerSettings::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn criterion_serde_and_display() {
        let c: Criterion = serde_json::from_str(r#"{"kind":"fixed_outage","target":0.1}"#).unwrap();
        assert_eq!(c, Criterion::FixedOutage(0.1));
        assert_eq!(Criterion::Goodput.to_string(), "goodput");
        assert_eq!(c.to_string(), "0.1");
    }
}
