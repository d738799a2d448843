//! Two- and three-fold coincidence counting on pulse-assigned clicks.
//!
//! Every click is assigned to the nearest pulse center. Pairs and triples
//! are counted once, when their last click (in stream order) arrives, so a
//! stream cut into chunks and counted with a warm-up overlap gives exactly the
//! single-pass counts.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TimetagError};
use crate::stream::{ClickRecord, ClickStream};

/// One-sided confidence level of the zero-count upper limit.
pub const DEFAULT_UPPER_LIMIT_CL: f64 = 0.6827;

/// Pair-lag triple patterns: the odd channel and its pulse relative to the
/// other two.
pub const PAIRLAG_PATTERNS: [&str; 6] = ["ch0+1", "ch0-1", "ch1+1", "ch1-1", "ch2+1", "ch2-1"];

/// Channel orderings of separate-pulse triples, earliest pulse first.
pub const SEPARATE_ORDERINGS: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

const PARALLEL_MIN_CLICKS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub period_ps: u64,
    pub window_ps: u64,
    pub norm_delay_pulses: u64,
    pub max_pulse_lag: u64,
    pub upper_limit_cl: f64,
    /// Overrides `last pulse + 1`.
    pub n_shots: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            period_ps: 12_150,
            window_ps: 3_200,
            norm_delay_pulses: 500,
            max_pulse_lag: 1_000,
            upper_limit_cl: DEFAULT_UPPER_LIMIT_CL,
            n_shots: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TimetagError::Config(m));
        if self.period_ps == 0 {
            return bad("period_ps must be > 0".into());
        }
        if self.window_ps >= self.period_ps {
            return bad(format!("window_ps {} must be < period_ps {}", self.window_ps, self.period_ps));
        }
        if self.norm_delay_pulses == 0 {
            return bad("norm_delay_pulses must be > 0".into());
        }
        if self.max_pulse_lag < 2 * self.norm_delay_pulses {
            return bad(format!(
                "max_pulse_lag {} must cover two normalization delays ({})",
                self.max_pulse_lag,
                2 * self.norm_delay_pulses
            ));
        }
        if !(self.upper_limit_cl > 0.0 && self.upper_limit_cl < 1.0) {
            return bad(format!("upper_limit_cl {} outside (0, 1)", self.upper_limit_cl));
        }
        Ok(())
    }

    /// Pulse index and signed offset from the pulse center.
    #[inline]
    pub fn assign(&self, t_ps: u64) -> (u64, i64) {
        let half = self.period_ps / 2;
        let p = (t_ps + half) / self.period_ps;
        (p, t_ps as i64 - (p * self.period_ps) as i64)
    }

    #[inline]
    pub fn in_window(&self, offset_ps: i64) -> bool {
        2 * offset_ps.unsigned_abs() <= self.window_ps
    }

    /// Upper limit on a Poisson mean after observing zero events.
    pub fn zero_count_limit(&self) -> f64 {
        -(1.0 - self.upper_limit_cl).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceSet {
    pub max_pulse_lag: u64,
    /// Pooled cross-channel pairs by pulse lag (higher channel minus lower),
    /// index `lag + max_pulse_lag`.
    pub pair_hist: Vec<u64>,
    pub triple_same: u64,
    /// Indexed like [`PAIRLAG_PATTERNS`].
    pub triple_pairlag: [u64; 6],
    /// All six orderings pooled.
    pub triple_separate: u64,
    /// Indexed like [`SEPARATE_ORDERINGS`].
    pub triple_separate_by_ordering: [u64; 6],
    /// Orderings pooled in `triple_separate`; the normalization per
    /// ordering is `triple_separate / separate_orderings`.
    pub separate_orderings: u64,
    pub singles: [u64; 3],
    pub n_shots: u64,
}

impl CoincidenceSet {
    pub fn empty(max_pulse_lag: u64) -> Self {
        Self {
            max_pulse_lag,
            pair_hist: vec![0; 2 * max_pulse_lag as usize + 1],
            triple_same: 0,
            triple_pairlag: [0; 6],
            triple_separate: 0,
            triple_separate_by_ordering: [0; 6],
            separate_orderings: SEPARATE_ORDERINGS.len() as u64,
            singles: [0; 3],
            n_shots: 0,
        }
    }

    /// A set holding only the counts the estimators read, with a single
    /// normalization ordering.
    pub fn from_counts(cfg: &AnalysisConfig, pair_zero: u64, pair_norm: u64, triple_same: u64, triple_separate: u64) -> Self {
        let mut c = Self::empty(cfg.max_pulse_lag);
        let m = cfg.max_pulse_lag as i64;
        c.pair_hist[m as usize] = pair_zero;
        c.pair_hist[(m + cfg.norm_delay_pulses as i64) as usize] = pair_norm;
        c.triple_same = triple_same;
        c.triple_separate = triple_separate;
        c.separate_orderings = 1;
        c
    }

    pub fn pair(&self, lag: i64) -> u64 {
        let i = lag + self.max_pulse_lag as i64;
        if i < 0 {
            return 0;
        }
        self.pair_hist.get(i as usize).copied().unwrap_or(0)
    }

    pub fn total_singles(&self) -> u64 {
        self.singles.iter().sum()
    }

    /// Expected separate-pulse triples per ordering.
    pub fn triple_norm(&self) -> f64 {
        self.triple_separate as f64 / self.separate_orderings.max(1) as f64
    }

    fn merge(&mut self, o: &Self) {
        debug_assert_eq!(self.max_pulse_lag, o.max_pulse_lag);
        for (a, b) in self.pair_hist.iter_mut().zip(&o.pair_hist) {
            *a += b;
        }
        self.triple_same += o.triple_same;
        for i in 0..6 {
            self.triple_pairlag[i] += o.triple_pairlag[i];
            self.triple_separate_by_ordering[i] += o.triple_separate_by_ordering[i];
        }
        self.triple_separate += o.triple_separate;
        for i in 0..3 {
            self.singles[i] += o.singles[i];
        }
    }
}

// Per-channel click counts keyed by pulse, for the last `mask + 1` pulses.
struct PulseRing {
    mask: u64,
    slots: Vec<(u64, u64)>,
}

impl PulseRing {
    fn new(span: u64) -> Self {
        let size = (span + 1).next_power_of_two();
        Self { mask: size - 1, slots: vec![(u64::MAX, 0); size as usize] }
    }

    #[inline]
    fn get(&self, p: u64) -> u64 {
        let s = self.slots[(p & self.mask) as usize];
        if s.0 == p {
            s.1
        } else {
            0
        }
    }

    #[inline]
    fn add(&mut self, p: u64) {
        let s = &mut self.slots[(p & self.mask) as usize];
        if s.0 != p {
            *s = (p, 0);
        }
        s.1 += 1;
    }
}

struct Counter {
    max_lag: u64,
    d: u64,
    rings: [PulseRing; 3],
    recent: [VecDeque<u64>; 3],
    set: CoincidenceSet,
}

const OTHERS: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

fn separate_index(order: [usize; 3]) -> usize {
    let o = [order[0] as u8, order[1] as u8, order[2] as u8];
    SEPARATE_ORDERINGS.iter().position(|x| *x == o).expect("permutation")
}

impl Counter {
    fn new(cfg: &AnalysisConfig) -> Self {
        let d = cfg.norm_delay_pulses;
        Self {
            max_lag: cfg.max_pulse_lag,
            d,
            rings: [PulseRing::new(2 * d), PulseRing::new(2 * d), PulseRing::new(2 * d)],
            recent: Default::default(),
            set: CoincidenceSet::empty(cfg.max_pulse_lag),
        }
    }

    #[inline]
    fn process(&mut self, ch: usize, p: u64, owned: bool) {
        let oldest = p.saturating_sub(self.max_lag);
        for q in self.recent.iter_mut() {
            while q.front().is_some_and(|&f| f < oldest) {
                q.pop_front();
            }
        }
        if owned {
            self.count(ch, p);
        }
        self.rings[ch].add(p);
        self.recent[ch].push_back(p);
    }

    fn count(&mut self, ch: usize, p: u64) {
        let set = &mut self.set;
        set.singles[ch] += 1;
        let m = self.max_lag as i64;
        for &b in &OTHERS[ch] {
            for &q in &self.recent[b] {
                let lag = if ch > b { (p - q) as i64 } else { q as i64 - p as i64 };
                set.pair_hist[(lag + m) as usize] += 1;
            }
        }

        let [b, c] = OTHERS[ch];
        let (rb, rc) = (&self.rings[b], &self.rings[c]);
        set.triple_same += rb.get(p) * rc.get(p);
        if p >= 1 {
            // This click is last, so it sits at the latest pulse p.
            for (qb, qc) in [(p, p - 1), (p - 1, p), (p - 1, p - 1)] {
                let k = rb.get(qb) * rc.get(qc);
                if k == 0 {
                    continue;
                }
                let pulses = {
                    let mut x = [0u64; 3];
                    x[ch] = p;
                    x[b] = qb;
                    x[c] = qc;
                    x
                };
                let odd = (0..3)
                    .find(|&i| pulses[(i + 1) % 3] == pulses[(i + 2) % 3])
                    .expect("two of three pulses agree");
                let plus = pulses[odd] > pulses[(odd + 1) % 3];
                set.triple_pairlag[2 * odd + usize::from(!plus)] += k;
            }
        }
        let d = self.d;
        if p >= 2 * d {
            for (qb, qc, order) in [(p - d, p - 2 * d, [c, b, ch]), (p - 2 * d, p - d, [b, c, ch])] {
                let k = rb.get(qb) * rc.get(qc);
                if k > 0 {
                    set.triple_separate += k;
                    set.triple_separate_by_ordering[separate_index(order)] += k;
                }
            }
        }
    }
}

fn n_shots(records: &[ClickRecord], cfg: &AnalysisConfig) -> u64 {
    cfg.n_shots
        .unwrap_or_else(|| records.last().map_or(0, |r| cfg.assign(r.t_ps).0 + 1))
}

/// Counts clicks `owned` with everything from `warm` on as history.
fn count_range(records: &[ClickRecord], warm: usize, owned: std::ops::Range<usize>, cfg: &AnalysisConfig) -> CoincidenceSet {
    let mut ctr = Counter::new(cfg);
    for (i, r) in records[warm..owned.end].iter().enumerate() {
        let (p, off) = cfg.assign(r.t_ps);
        if cfg.in_window(off) {
            ctr.process(r.channel as usize, p, warm + i >= owned.start);
        }
    }
    ctr.set
}

/// Single pass over the whole stream.
pub fn count_coincidences_serial(s: &ClickStream, cfg: &AnalysisConfig) -> Result<CoincidenceSet> {
    cfg.validate()?;
    let r = s.records();
    let mut set = count_range(r, 0, 0..r.len(), cfg);
    set.n_shots = n_shots(r, cfg);
    Ok(set)
}

/// Counts `chunks` contiguous pieces independently (in parallel) and merges.
/// Each piece warms up on the preceding `max_pulse_lag` pulses.
pub fn count_coincidences_chunked(s: &ClickStream, cfg: &AnalysisConfig, chunks: usize) -> Result<CoincidenceSet> {
    cfg.validate()?;
    let r = s.records();
    let n = r.len();
    let chunks = chunks.clamp(1, n.max(1));
    let bounds: Vec<usize> = (0..=chunks).map(|i| i * n / chunks).collect();
    let parts: Vec<CoincidenceSet> = bounds
        .par_windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let warm = if start == 0 {
                0
            } else {
                let first = cfg.assign(r[start].t_ps).0;
                let oldest = first.saturating_sub(cfg.max_pulse_lag);
                r[..start].partition_point(|x| cfg.assign(x.t_ps).0 < oldest)
            };
            count_range(r, warm, start..end, cfg)
        })
        .collect();
    let mut set = CoincidenceSet::empty(cfg.max_pulse_lag);
    for p in &parts {
        set.merge(p);
    }
    set.n_shots = n_shots(r, cfg);
    Ok(set)
}

/// Counts all pairs and triples; large streams are split across threads.
pub fn count_coincidences(s: &ClickStream, cfg: &AnalysisConfig) -> Result<CoincidenceSet> {
    let threads = rayon::current_num_threads();
    if s.len() < PARALLEL_MIN_CLICKS || threads < 2 {
        count_coincidences_serial(s, cfg)
    } else {
        count_coincidences_chunked(s, cfg, 4 * threads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G3Estimate {
    pub g3: f64,
    pub sigma_or_upper: f64,
    pub is_upper_limit: bool,
}

/// `pair_hist[0] / pair_hist[norm_delay]` with independent Poisson errors.
pub fn estimate_g2(c: &CoincidenceSet, cfg: &AnalysisConfig) -> Result<G2Estimate> {
    let den = c.pair(cfg.norm_delay_pulses as i64);
    if den == 0 {
        return Err(TimetagError::NoNormalization("pair histogram is empty at the normalization delay"));
    }
    let num = c.pair(0);
    let (num, den) = (num as f64, den as f64);
    if num == 0.0 {
        return Ok(G2Estimate { g2: 0.0, sigma: cfg.zero_count_limit() / den });
    }
    let g2 = num / den;
    Ok(G2Estimate { g2, sigma: g2 * (1.0 / num + 1.0 / den).sqrt() })
}

/// Same-pulse triples over separate-pulse triples per ordering; an upper
/// limit when no same-pulse triple was seen.
pub fn estimate_g3(c: &CoincidenceSet, cfg: &AnalysisConfig) -> Result<G3Estimate> {
    if c.triple_separate == 0 {
        return Err(TimetagError::NoNormalization("no separate-pulse triples"));
    }
    let norm = c.triple_norm();
    if c.triple_same == 0 {
        return Ok(G3Estimate { g3: 0.0, sigma_or_upper: cfg.zero_count_limit() / norm, is_upper_limit: true });
    }
    let same = c.triple_same as f64;
    let g3 = same / norm;
    Ok(G3Estimate {
        g3,
        sigma_or_upper: g3 * (1.0 / same + 1.0 / c.triple_separate as f64).sqrt(),
        is_upper_limit: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(v: &[(u8, u64)]) -> ClickStream {
        ClickStream::from_records(v.iter().map(|&(c, t)| ClickRecord::new(c, t)).collect()).unwrap()
    }

    fn small_cfg() -> AnalysisConfig {
        AnalysisConfig { norm_delay_pulses: 5, max_pulse_lag: 10, ..Default::default() }
    }

    #[test]
    fn pulse_assignment() {
        let cfg = AnalysisConfig::default();
        assert_eq!(cfg.assign(0), (0, 0));
        assert_eq!(cfg.assign(6_074), (0, 6_074));
        assert_eq!(cfg.assign(6_075), (1, -6_075));
        assert_eq!(cfg.assign(12_150 * 7 + 100), (7, 100));
        assert!(cfg.in_window(1_600) && cfg.in_window(-1_600) && !cfg.in_window(1_601));
    }

    #[test]
    fn config_validation() {
        assert!(AnalysisConfig::default().validate().is_ok());
        assert!(AnalysisConfig { window_ps: 12_150, ..Default::default() }.validate().is_err());
        assert!(AnalysisConfig { max_pulse_lag: 999, ..Default::default() }.validate().is_err());
        assert!(AnalysisConfig { norm_delay_pulses: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn same_pulse_pair_and_triple() {
        let cfg = AnalysisConfig::default();
        let t = 12_150 * 40;
        let c = count_coincidences(&stream(&[(0, t), (1, t + 100)]), &cfg).unwrap();
        assert_eq!(c.pair(0), 1);
        let c = count_coincidences(&stream(&[(0, t), (1, t + 100), (2, t + 200)]), &cfg).unwrap();
        assert_eq!(c.triple_same, 1);
        assert_eq!(c.pair(0), 3);
        assert_eq!(c.singles, [1, 1, 1]);
        assert_eq!(c.n_shots, 41);
    }

    #[test]
    fn outside_window_is_ignored() {
        let cfg = AnalysisConfig::default();
        let c = count_coincidences(&stream(&[(0, 12_150 * 3 + 2_000), (1, 12_150 * 3)]), &cfg).unwrap();
        assert_eq!(c.pair(0), 0);
        assert_eq!(c.singles, [0, 1, 0]);
    }

    #[test]
    fn lag_sign_and_patterns() {
        let cfg = small_cfg();
        let tp = |p: u64| p * cfg.period_ps;
        // ch1 one pulse after ch0: lag +1.
        let c = count_coincidences(&stream(&[(0, tp(20)), (1, tp(21))]), &cfg).unwrap();
        assert_eq!((c.pair(1), c.pair(-1)), (1, 0));
        // ch0 and ch1 at p, ch2 at p+1.
        let c = count_coincidences(&stream(&[(0, tp(20)), (1, tp(20)), (2, tp(21))]), &cfg).unwrap();
        assert_eq!(c.triple_pairlag, [0, 0, 0, 0, 1, 0]);
        // ch0 at p, ch1 and ch2 at p+1: ch0 is one pulse early.
        let c = count_coincidences(&stream(&[(0, tp(20)), (1, tp(21)), (2, tp(21))]), &cfg).unwrap();
        assert_eq!(c.triple_pairlag, [0, 1, 0, 0, 0, 0]);
        // Separate pulses 20, 25, 30 with ch2, ch0, ch1.
        let c = count_coincidences(&stream(&[(2, tp(20)), (0, tp(25)), (1, tp(30))]), &cfg).unwrap();
        assert_eq!(c.triple_separate, 1);
        assert_eq!(c.triple_separate_by_ordering[separate_index([2, 0, 1])], 1);
    }

    #[test]
    fn chunked_equals_serial_on_dense_stream() {
        let cfg = small_cfg();
        let mut v = Vec::new();
        let mut x: u64 = 12345;
        for p in 0..3_000u64 {
            for ch in 0..3u8 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if (x >> 33).is_multiple_of(3) {
                    let jitter = (x >> 40) % 2_000;
                    v.push((ch, p * cfg.period_ps + jitter));
                }
            }
        }
        let s = stream(&v);
        let serial = count_coincidences_serial(&s, &cfg).unwrap();
        for k in [1, 2, 7, 64, 1000] {
            assert_eq!(count_coincidences_chunked(&s, &cfg, k).unwrap(), serial, "chunks = {k}");
        }
        assert!(serial.triple_same > 0 && serial.triple_separate > 0);
    }

    #[test]
    fn g2_examples() {
        let cfg = AnalysisConfig::default();
        let e = estimate_g2(&CoincidenceSet::from_counts(&cfg, 19_600, 5_870_000, 0, 1), &cfg).unwrap();
        assert!((e.g2 - 0.003_339).abs() < 1e-5, "{e:?}");
        let e = estimate_g2(&CoincidenceSet::from_counts(&cfg, 0, 1000, 0, 1), &cfg).unwrap();
        assert_eq!(e.g2, 0.0);
        assert!((e.sigma - 1.1478 / 1000.0).abs() < 1e-6);
        let e = estimate_g2(&CoincidenceSet::from_counts(&cfg, 1000, 1000, 0, 1), &cfg).unwrap();
        assert_eq!(e.g2, 1.0);
        assert!((e.sigma - (2.0f64 / 1000.0).sqrt()).abs() < 1e-15);
        let e = estimate_g2(&CoincidenceSet::from_counts(&cfg, 5, 0, 0, 1), &cfg).unwrap_err();
        assert!(matches!(e, TimetagError::NoNormalization(_)));
    }

    #[test]
    fn g3_examples() {
        let cfg = AnalysisConfig::default();
        let e = estimate_g3(&CoincidenceSet::from_counts(&cfg, 0, 1, 0, 6_800), &cfg).unwrap();
        assert!(e.is_upper_limit && (e.sigma_or_upper / 1.7e-4 - 1.0).abs() < 0.02, "{e:?}");
        let e = estimate_g3(&CoincidenceSet::from_counts(&cfg, 0, 1, 1000, 1000), &cfg).unwrap();
        assert_eq!(e.g3, 1.0);
        let e = estimate_g3(&CoincidenceSet::from_counts(&cfg, 0, 1, 100, 10_000), &cfg).unwrap();
        assert!((e.g3 - 0.01).abs() < 1e-15);
        assert!((e.sigma_or_upper - 0.01 * (0.01f64 + 1e-4).sqrt()).abs() < 1e-15);
        assert!(estimate_g3(&CoincidenceSet::from_counts(&cfg, 0, 1, 3, 0), &cfg).is_err());
    }

    #[test]
    fn counted_sets_divide_by_six_orderings() {
        let mut c = CoincidenceSet::empty(10);
        c.triple_same = 10;
        c.triple_separate = 600;
        let cfg = small_cfg();
        assert!((estimate_g3(&c, &cfg).unwrap().g3 - 0.1).abs() < 1e-15);
    }
}
