//! Monte-Carlo click streams from a pulsed quantum-dot-like source.
//!
//! Per pulse: 0 to 3 source photons with exponential delays, a Poisson
//! number of laser-leakage photons with narrow Gaussian delays, independent
//! routing to three detectors and Gaussian detector jitter. Every routed
//! photon produces a click (no dead time), so cross-channel coincidence
//! ratios estimate the Glauber correlations of the total photon number
//! exactly.

use nongauss_core::gaussian_model::{multimode_moments, MomentTriple};
use nongauss_core::CorrelationPoint64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TimetagError};
use crate::stream::{ClickRecord, ClickStream};

/// Pulses per independently seeded block.
pub const BLOCK_PULSES: u64 = 1 << 16;

pub const CASCADE_SPLIT: [f64; 3] = [0.5, 0.25, 0.25];
pub const EVEN_SPLIT: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub n_pulses: u64,
    pub period_ps: u64,
    pub emit_prob: f64,
    pub two_photon_prob: f64,
    pub three_photon_prob: f64,
    pub lifetime_ps: f64,
    /// Mean leakage photons per pulse.
    pub leak_prob: f64,
    pub leak_width_ps: f64,
    pub jitter_ps: f64,
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000,
            period_ps: 12_150,
            emit_prob: 0.1,
            two_photon_prob: 0.0,
            three_photon_prob: 0.0,
            lifetime_ps: 300.0,
            leak_prob: 0.0,
            leak_width_ps: 50.0,
            jitter_ps: 30.0,
            split: EVEN_SPLIT,
            seed: 1,
        }
    }
}

impl SourceConfig {
    /// Strong laser leakage next to a slow emitter.
    pub fn leakage_preset() -> Self {
        Self { leak_prob: 0.05, leak_width_ps: 50.0, lifetime_ps: 1_000.0, ..Self::default() }
    }

    /// Two-photon probability giving intrinsic `g2` for a source without
    /// three-photon events or leakage.
    pub fn two_photon_prob_for_g2(emit_prob: f64, g2: f64) -> f64 {
        // g2 = 2 p2 / (p1 + 2 p2)²; smaller root of the quadratic in p2.
        if g2 <= 0.0 {
            return 0.0;
        }
        let a = 4.0 * g2;
        let b = 4.0 * g2 * emit_prob - 2.0;
        let c = g2 * emit_prob * emit_prob;
        (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TimetagError::Config(m));
        let p = [self.emit_prob, self.two_photon_prob, self.three_photon_prob];
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) || p.iter().sum::<f64>() > 1.0 + 1e-12 {
            return bad(format!("photon-number probabilities {p:?} must lie in [0, 1] and sum to <= 1"));
        }
        if !(self.lifetime_ps > 0.0 && self.lifetime_ps.is_finite()) {
            return bad(format!("lifetime_ps {} must be > 0", self.lifetime_ps));
        }
        for (name, v) in [("leak_prob", self.leak_prob), ("leak_width_ps", self.leak_width_ps), ("jitter_ps", self.jitter_ps)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be >= 0"));
            }
        }
        if self.split.iter().any(|&s| !(0.0..=1.0).contains(&s)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad(format!("split {:?} must be probabilities summing to 1", self.split));
        }
        if self.period_ps == 0 {
            return bad("period_ps must be > 0".into());
        }
        Ok(())
    }

    /// Factorial moments of the photon number per pulse before routing.
    pub fn intrinsic_moments(&self) -> MomentTriple<f64> {
        let (p1, p2, p3) = (self.emit_prob, self.two_photon_prob, self.three_photon_prob);
        let dot = MomentTriple { g1: p1 + 2.0 * p2 + 3.0 * p3, g2u: 2.0 * p2 + 6.0 * p3, g3u: 6.0 * p3 };
        let mu = self.leak_prob;
        let leak = MomentTriple { g1: mu, g2u: mu * mu, g3u: mu * mu * mu };
        multimode_moments(&[dot, leak]).expect("two modes")
    }

    pub fn intrinsic_correlations(&self) -> Result<CorrelationPoint64> {
        self.intrinsic_moments()
            .correlations()
            .map_err(|e| TimetagError::Config(e.to_string()))
    }

    /// Expected clicks per pulse on each channel.
    pub fn expected_singles_per_pulse(&self) -> [f64; 3] {
        let g1 = self.intrinsic_moments().g1;
        self.split.map(|s| s * g1)
    }
}

fn block(cfg: &SourceConfig, b: u64) -> Vec<ClickRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(b);
    let exp = Exp::new(1.0 / cfg.lifetime_ps).expect("lifetime validated");
    let leak = (cfg.leak_prob > 0.0).then(|| Poisson::new(cfg.leak_prob).expect("leak validated"));
    let leak_shape = Normal::new(0.0, cfg.leak_width_ps).expect("width validated");
    let jitter = Normal::new(0.0, cfg.jitter_ps).expect("jitter validated");
    let (p1, p2, p3) = (cfg.emit_prob, cfg.two_photon_prob, cfg.three_photon_prob);
    let (c1, c2) = (cfg.split[0], cfg.split[0] + cfg.split[1]);

    let first = b * BLOCK_PULSES;
    let last = (first + BLOCK_PULSES).min(cfg.n_pulses);
    let mut out = Vec::new();
    for pulse in first..last {
        let u: f64 = rng.random();
        let dots = if u < p1 {
            1
        } else if u < p1 + p2 {
            2
        } else if u < p1 + p2 + p3 {
            3
        } else {
            0
        };
        let leaks = leak.as_ref().map_or(0, |d| d.sample(&mut rng) as u32);
        let center = (pulse * cfg.period_ps) as f64;
        for k in 0..dots + leaks {
            let delay = if k < dots { exp.sample(&mut rng) } else { leak_shape.sample(&mut rng) };
            let r: f64 = rng.random();
            let channel = if r < c1 {
                0
            } else if r < c2 {
                1
            } else {
                2
            };
            let t = center + delay + jitter.sample(&mut rng);
            out.push(ClickRecord::new(channel, t.max(0.0).round() as u64));
        }
    }
    out
}

/// Deterministic for a fixed seed, independent of the thread count.
pub fn simulate(cfg: &SourceConfig) -> Result<ClickStream> {
    cfg.validate()?;
    let blocks = cfg.n_pulses.div_ceil(BLOCK_PULSES);
    let parts: Vec<Vec<ClickRecord>> = (0..blocks).into_par_iter().map(|b| block(cfg, b)).collect();
    let mut records: Vec<ClickRecord> = parts.into_iter().flatten().collect();
    // Delays can carry a click past the start of the next block.
    records.par_sort_unstable();
    ClickStream::from_records(records)
}

/// [`simulate`] with leakage required.
pub fn leakage_scenario(cfg: &SourceConfig) -> Result<ClickStream> {
    if !(cfg.leak_prob > 0.0) {
        return Err(TimetagError::Config("leakage scenario needs leak_prob > 0".into()));
    }
    simulate(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_emitted() {
        let cfg = SourceConfig { emit_prob: 0.0, leak_prob: 0.0, n_pulses: 10_000, ..Default::default() };
        assert!(simulate(&cfg).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SourceConfig { n_pulses: 200_000, two_photon_prob: 0.01, leak_prob: 0.01, ..Default::default() };
        let a = simulate(&cfg).unwrap();
        assert_eq!(a, simulate(&cfg).unwrap());
        assert_ne!(a, simulate(&SourceConfig { seed: 2, ..cfg }).unwrap());
    }

    #[test]
    fn validation() {
        assert!(SourceConfig::default().validate().is_ok());
        assert!(SourceConfig { split: [0.5, 0.5, 0.1], ..Default::default() }.validate().is_err());
        assert!(SourceConfig { emit_prob: 0.9, two_photon_prob: 0.2, ..Default::default() }.validate().is_err());
        assert!(SourceConfig { lifetime_ps: 0.0, ..Default::default() }.validate().is_err());
        assert!(leakage_scenario(&SourceConfig::default()).is_err());
    }

    #[test]
    fn intrinsic_moments_match_categorical() {
        let cfg = SourceConfig { emit_prob: 0.1, two_photon_prob: 0.01, three_photon_prob: 0.001, ..Default::default() };
        let m = cfg.intrinsic_moments();
        assert!((m.g1 - 0.123).abs() < 1e-15 && (m.g2u - 0.026).abs() < 1e-15 && (m.g3u - 0.006).abs() < 1e-15);
        let coh = SourceConfig { emit_prob: 0.0, leak_prob: 0.2, ..Default::default() };
        let c = coh.intrinsic_correlations().unwrap();
        assert!((c.g2 - 1.0).abs() < 1e-12 && (c.g3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_photon_inversion() {
        let p2 = SourceConfig::two_photon_prob_for_g2(0.1, 0.05);
        let cfg = SourceConfig { emit_prob: 0.1, two_photon_prob: p2, ..Default::default() };
        assert!((cfg.intrinsic_correlations().unwrap().g2 - 0.05).abs() < 1e-12);
        assert!((p2 - 0.05 * 0.01 / 2.0).abs() / p2 < 0.05);
    }

    #[test]
    fn singles_budget() {
        let cfg = SourceConfig { n_pulses: 500_000, split: CASCADE_SPLIT, leak_prob: 0.02, ..Default::default() };
        let s = simulate(&cfg).unwrap().singles();
        for (ch, want) in cfg.expected_singles_per_pulse().iter().enumerate() {
            let mu = want * cfg.n_pulses as f64;
            assert!((s[ch] as f64 - mu).abs() < 4.0 * mu.sqrt(), "channel {ch}: {} vs {mu}", s[ch]);
        }
    }
}
