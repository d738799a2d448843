use nongauss_timetag::jacobi::JacobiHistogram;
use nongauss_timetag::source_sim::CASCADE_SPLIT;
use nongauss_timetag::*;

fn cfg() -> AnalysisConfig {
    AnalysisConfig::default()
}

fn coherent(n_pulses: u64, mean: f64, seed: u64) -> SourceConfig {
    SourceConfig { n_pulses, emit_prob: 0.0, leak_prob: mean, leak_width_ps: 300.0, seed, ..Default::default() }
}

#[test]
fn poissonian_delayed_pairs_match_q_squared() {
    // Leakage-only light is Poissonian; q is the per-channel click probability.
    let src = coherent(2_000_000, 0.3, 11);
    let s = simulate(&src).unwrap();
    let c = count_coincidences(&s, &cfg()).unwrap();
    let q = 0.3 / 3.0;
    let want = 3.0 * q * q * c.n_shots as f64;
    for lag in [1i64, -1, 17, 500, -500, 999] {
        let got = c.pair(lag) as f64;
        assert!((got - want).abs() < 4.0 * want.sqrt(), "lag {lag}: {got} vs {want}");
    }
    let g2 = estimate_g2(&c, &cfg()).unwrap();
    assert!((g2.g2 - 1.0).abs() < 4.0 * g2.sigma, "{g2:?}");
}

#[test]
fn no_multiphoton_no_coincidences() {
    let src = SourceConfig { n_pulses: 1_000_000, emit_prob: 1.0, ..Default::default() };
    let c = count_coincidences(&simulate(&src).unwrap(), &cfg()).unwrap();
    assert_eq!(c.pair(0), 0);
    assert_eq!(c.triple_same, 0);
    assert_eq!(estimate_g2(&c, &cfg()).unwrap().g2, 0.0);
    assert!(estimate_g3(&c, &cfg()).unwrap().is_upper_limit);
}

#[test]
fn recovers_configured_g2() {
    let p2 = SourceConfig::two_photon_prob_for_g2(0.1, 0.05);
    let src = SourceConfig { n_pulses: 10_000_000, emit_prob: 0.1, two_photon_prob: p2, seed: 5, ..Default::default() };
    let c = count_coincidences(&simulate(&src).unwrap(), &cfg()).unwrap();
    let e = estimate_g2(&c, &cfg()).unwrap();
    assert!((e.g2 - 0.05).abs() < 3.0 * e.sigma, "{e:?}");
}

#[test]
fn attenuation_leaves_correlations_unchanged() {
    let src = SourceConfig {
        n_pulses: 4_000_000,
        emit_prob: 0.3,
        two_photon_prob: 0.02,
        three_photon_prob: 0.004,
        seed: 9,
        ..Default::default()
    };
    let s = simulate(&src).unwrap();
    let base = count_coincidences(&s, &cfg()).unwrap();
    let (g2, g3) = (estimate_g2(&base, &cfg()).unwrap(), estimate_g3(&base, &cfg()).unwrap());
    for (eta, seed) in [(0.5, 1), (0.2, 2)] {
        let c = count_coincidences(&s.thin(eta, seed).unwrap(), &cfg()).unwrap();
        let (t2, t3) = (estimate_g2(&c, &cfg()).unwrap(), estimate_g3(&c, &cfg()).unwrap());
        let s2 = (g2.sigma.powi(2) + t2.sigma.powi(2)).sqrt();
        let s3 = (g3.sigma_or_upper.powi(2) + t3.sigma_or_upper.powi(2)).sqrt();
        assert!((t2.g2 - g2.g2).abs() < 3.0 * s2, "eta {eta}: {t2:?} vs {g2:?}");
        assert!((t3.g3 - g3.g3).abs() < 3.0 * s3, "eta {eta}: {t3:?} vs {g3:?}");
    }
}

#[test]
fn channel_relabeling_keeps_pooled_counts() {
    let src = SourceConfig {
        n_pulses: 300_000,
        emit_prob: 0.4,
        two_photon_prob: 0.05,
        three_photon_prob: 0.02,
        split: CASCADE_SPLIT,
        ..Default::default()
    };
    let s = simulate(&src).unwrap();
    let a = count_coincidences(&s, &cfg()).unwrap();
    for perm in [[1, 2, 0], [2, 0, 1], [0, 2, 1]] {
        let b = count_coincidences(&s.relabel(perm).unwrap(), &cfg()).unwrap();
        assert_eq!(a.triple_same, b.triple_same);
        assert_eq!(a.triple_separate, b.triple_separate);
        assert_eq!(a.pair(0), b.pair(0));
        assert_eq!(a.pair(500) + a.pair(-500), b.pair(500) + b.pair(-500));
    }
}

#[test]
fn chunked_counting_matches_single_pass() {
    let src = SourceConfig { n_pulses: 500_000, emit_prob: 0.5, two_photon_prob: 0.1, three_photon_prob: 0.05, ..Default::default() };
    let s = simulate(&src).unwrap();
    let one = count_coincidences_serial(&s, &cfg()).unwrap();
    for k in [2, 3, 16, 257] {
        assert_eq!(count_coincidences_chunked(&s, &cfg(), k).unwrap(), one);
    }
}

fn ridge_fraction(h: &JacobiHistogram) -> f64 {
    // Polar cells whose sector touches 0°, 120° or 240°, away from the origin.
    let s = h.binning.sectors;
    let third = s / 3;
    let (mut on, mut all) = (0u64, 0u64);
    for ring in 3..h.n_rings {
        for sector in 0..s {
            let c = h.polar[ring * s + sector];
            all += c;
            let k = sector % third;
            if k == 0 || k == third - 1 {
                on += c;
            }
        }
    }
    on as f64 / all.max(1) as f64
}

#[test]
fn leakage_draws_ridges() {
    let bins = JacobiBinning::default();
    let leaky = SourceConfig { n_pulses: 4_000_000, emit_prob: 0.5, jitter_ps: 0.0, ..SourceConfig::leakage_preset() };
    let h = jacobi_histogram(&leakage_scenario(&leaky).unwrap(), &cfg(), TripleSelection::SamePulse, bins).unwrap();
    let clean = SourceConfig { leak_prob: 0.0, three_photon_prob: 0.01, two_photon_prob: 0.02, ..leaky.clone() };
    let g = jacobi_histogram(&simulate(&clean).unwrap(), &cfg(), TripleSelection::SamePulse, bins).unwrap();
    assert!(h.total > 200 && g.total > 200, "{} {}", h.total, g.total);
    let (rl, rc) = (ridge_fraction(&h), ridge_fraction(&g));
    assert!(rl > 0.8 && rc < 0.35, "leaky {rl}, clean {rc}");
}

#[test]
fn separate_pulse_histogram_is_threefold_symmetric() {
    let src = SourceConfig { n_pulses: 3_000_000, emit_prob: 0.6, lifetime_ps: 500.0, ..Default::default() };
    let h = jacobi_histogram(&simulate(&src).unwrap(), &cfg(), TripleSelection::Separate, JacobiBinning::default()).unwrap();
    assert!(h.total > 10_000, "{}", h.total);
    assert!(h.max_rotation_z(30) < 4.5, "{}", h.max_rotation_z(30));
}

#[test]
fn jitter_broadens_separate_pulse_histogram() {
    let centre = |jitter_ps: f64| {
        let src = SourceConfig { jitter_ps, ..coherent(1_000_000, 0.6, 3) };
        let src = SourceConfig { leak_width_ps: 10.0, ..src };
        let h = jacobi_histogram(&simulate(&src).unwrap(), &cfg(), TripleSelection::Separate, JacobiBinning::default()).unwrap();
        let m = h.n_bins / 2;
        h.count_at(m, m) as f64 / h.total as f64
    };
    assert!(centre(0.0) > 2.0 * centre(200.0));
}
