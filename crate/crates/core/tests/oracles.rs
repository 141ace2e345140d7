//! Closed forms against independently derived references.

use comp_outage::montecarlo::{empirical_outage, sample_sinr};
use comp_outage::numeric::log_space;
use comp_outage::optimize::OptimizerSettings;
use comp_outage::{
    capacity_at_fixed_outage, gen_chi2_ccdf, maximize_goodput, outage_probability, select_best_set,
    Conditioning, Criterion, LinkProfile, OutageQuery, PowerSet, SearchBounds,
};

fn query(s: &[f64], i: &[f64], noise: f64, g: f64) -> OutageQuery {
    OutageQuery::from_slices(s, i, noise, g).unwrap()
}

#[test]
fn ccdf_two_powers_vs_sampled_sum() {
    // noise-only link with threshold 1: P(H1 + H2 > 1) = 1 - P_out
    let link = LinkProfile::from_slices(&[1.0, 2.0], &[], 1.0).unwrap();
    let n = 2_000_000;
    let sampled = 1.0 - empirical_outage(&sample_sinr(&link, 42, n), 1.0).unwrap();
    let closed = gen_chi2_ccdf(&PowerSet::new(vec![1.0, 2.0]).unwrap(), 1.0).unwrap();
    let se = (closed * (1.0 - closed) / n as f64).sqrt();
    assert!((sampled - closed).abs() < 4.0 * se, "{sampled} vs {closed}");
}

/// One interferer, no noise: `P(sum H_n <= g H_k) = prod_n 1 / (1 + P_n / (g P_k))`
/// from the Laplace transform of the serving sum at `1 / (g P_k)`.
fn single_interferer_oracle(serving: &[f64], pk: f64, g: f64) -> f64 {
    serving
        .iter()
        .map(|&pn| 1.0 / (1.0 + pn / (g * pk)))
        .product()
}

#[test]
fn single_interferer_laplace_oracle() {
    let sets: [&[f64]; 4] = [
        &[1.0],
        &[1.0, 2.0],
        &[0.7, 0.3, 0.05],
        &[1.0, 0.8, 0.55, 0.4, 0.21, 0.1, 0.03, 0.011],
    ];
    for s in sets {
        for pk in [0.01, 0.5, 3.0] {
            for g in log_space(1e-3, 1e3, 13) {
                let closed = outage_probability(&query(s, &[pk], 0.0, g)).unwrap();
                let oracle = single_interferer_oracle(s, pk, g);
                assert!(
                    (closed - oracle).abs() < 1e-12,
                    "{s:?} {pk} {g}: {closed} vs {oracle}"
                );
            }
        }
    }
}

/// Two servers, one interferer, noise: integrates the serving CDF over the
/// interferer's exponential law after the substitution `u = exp(-I / Q)`.
fn two_server_quadrature(p1: f64, p2: f64, q: f64, noise: f64, g: f64) -> f64 {
    let cdf = |s: f64| 1.0 - (p1 * (-s / p1).exp() - p2 * (-s / p2).exp()) / (p1 - p2);
    let n = 200_000;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            cdf(g * (-q * u.ln() + noise))
        })
        .sum::<f64>()
        * h
}

#[test]
fn two_servers_with_noise_vs_quadrature() {
    for (p1, p2, q, noise) in [
        (1.0, 0.4, 0.3, 0.0),
        (1.0, 0.4, 0.3, 0.2),
        (0.05, 0.9, 2.0, 1.0),
    ] {
        for g in [0.1, 1.0, 4.0] {
            let closed = outage_probability(&query(&[p1, p2], &[q], noise, g)).unwrap();
            let quad = two_server_quadrature(p1, p2, q, noise, g);
            assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
        }
    }
}

#[test]
fn outage_vs_monte_carlo() {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[1.0, 2.0], &[0.5], 0.0),
        (&[0.9, 0.5, 0.2], &[0.4, 0.1, 0.1, 0.05], 0.01),
        (&[1.0], &[0.3, 0.2], 0.1),
    ];
    let n = 1_000_000;
    for (i, (s, interf, noise)) in cases.into_iter().enumerate() {
        let link = LinkProfile::from_slices(s, interf, noise).unwrap();
        let samples = sample_sinr(&link, 1000 + i as u64, n);
        for g in [0.25, 1.0, 3.0] {
            let p = outage_probability(&query(s, interf, noise, g)).unwrap();
            let mc = empirical_outage(&samples, g).unwrap();
            let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-4;
            assert!((p - mc).abs() <= tol, "case {i} g {g}: {p} vs {mc}");
        }
    }
}

#[test]
fn goodput_brute_force_examples() {
    let bounds = SearchBounds::default();
    let grid = log_space(bounds.gamma_lo, bounds.gamma_hi, 100_000);
    for (s, i) in [(&[1.0][..], &[0.5][..]), (&[1.0, 2.0][..], &[0.5][..])] {
        let link = LinkProfile::from_slices(s, i, 0.0).unwrap();
        let opt = maximize_goodput(&link, &bounds, &Conditioning::default()).unwrap();
        let brute = grid
            .iter()
            .map(|&g| g.ln_1p() / 2f64.ln() * (1.0 - single_interferer_oracle(s, i[0], g)))
            .fold(0.0, f64::max);
        assert!((opt.goodput - brute).abs() / brute < 1e-4);
    }
}

#[test]
fn fixed_outage_examples() {
    let cond = Conditioning::default();
    let l = LinkProfile::from_slices(&[1.0], &[0.5], 0.0).unwrap();
    let fo = capacity_at_fixed_outage(&l, 1.0 / 3.0, 1e6, &cond).unwrap();
    assert!((fo.gamma_o - 1.0).abs() < 1e-5);
    assert!((fo.capacity - 2.0 / 3.0).abs() < 1e-5);
    let l = LinkProfile::from_slices(&[1.0, 2.0], &[0.5], 0.0).unwrap();
    let fo = capacity_at_fixed_outage(&l, 1.0 / 15.0, 1e6, &cond).unwrap();
    assert!((fo.gamma_o - 1.0).abs() < 1e-5);
    assert!((fo.capacity - 14.0 / 15.0).abs() < 1e-5);
}

/// Per-K goodput by brute force on the single-interferer oracle.
#[test]
fn set_selection_vs_per_k_brute_force() {
    let grid = log_space(1e-4, 1e6, 20_000);
    let settings = OptimizerSettings::default();
    for powers in [[1.0, 0.9, 0.01], [1.0, 0.05, 0.04]] {
        let candidates: Vec<(u32, f64)> = powers
            .iter()
            .copied()
            .enumerate()
            .map(|(i, p)| (i as u32, p))
            .collect();
        let sel = select_best_set(&candidates, 0.0, 2, Criterion::Goodput, &settings).unwrap();
        let per_bs: Vec<f64> = (1..=2)
            .map(|k| {
                let serving = &powers[..k];
                let pk = powers[k..].iter().sum::<f64>();
                // with several interferers use the closed form; with one the oracle
                let best = grid
                    .iter()
                    .map(|&g| {
                        let out = if powers.len() - k == 1 {
                            single_interferer_oracle(serving, pk, g)
                        } else {
                            outage_probability(&query(serving, &powers[k..], 0.0, g)).unwrap()
                        };
                        g.ln_1p() / 2f64.ln() * (1.0 - out)
                    })
                    .fold(0.0, f64::max);
                best / k as f64
            })
            .collect();
        let expected = if per_bs[1] > per_bs[0] { 2 } else { 1 };
        assert_eq!(sel.set_size, expected, "{powers:?}: {per_bs:?}");
        for (score, bf) in sel.per_candidate_scores.iter().zip(&per_bs) {
            assert!((score.spectral_efficiency - bf).abs() / bf < 1e-3);
        }
    }
}
