//! Log-domain Poisson hypothesis test against the Gaussian boundary.
//!
//! Probabilities are natural logs throughout. The sums reach 1e-113000 and
//! below, so nothing here ever leaves the log domain for longer than one
//! locally normalized tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::CERTIFIED_G2_LIMIT;
use crate::error::{domain, Result};

/// Terms smaller than the running sum by this many nats are dropped.
pub const TRUNCATION_NATS: f64 = 60.0 * std::f64::consts::LN_10;

/// Grid resolution in `sqrt(g2)` for the boundary search.
pub const BOUNDARY_GRID: usize = 200;

/// Golden-section stopping width in `g2`.
pub const BOUNDARY_G2_TOL: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// ln n! - (n + 1/2) ln n + n - ln sqrt(2 pi), n = 0..15.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_1,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Error of Stirling's approximation to ln n!.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return STIRLERR_TABLE[n as usize];
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        return (S0 - S1 / nn) / nf;
    }
    if n > 80 {
        return (S0 - (S1 - S2 / nn) / nn) / nf;
    }
    if n > 35 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
}

/// Deviance term `x ln(x/m) + m - x`, accurate when `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let s1 = s + ej / (2.0 * j + 1.0);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    (nf + 0.5) * nf.ln() - nf + LN_SQRT_2PI + stirlerr(n)
}

/// `ln Pois(k | lambda)`; `-inf` for impossible outcomes.
pub fn ln_pois(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return -lambda;
    }
    let kf = k as f64;
    -stirlerr(k) - bd0(kf, lambda) - 0.5 * (std::f64::consts::TAU * kf).ln()
}

/// Expected 2- and 3-photon event counts under a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonPair {
    pub lambda2: f64,
    pub lambda3: f64,
}

impl PoissonPair {
    pub fn new(lambda2: f64, lambda3: f64) -> Result<Self> {
        if !(lambda2 >= 0.0 && lambda3 >= 0.0 && lambda2.is_finite() && lambda3.is_finite()) {
            return Err(domain(format!("rates must be finite and >= 0, got ({lambda2}, {lambda3})")));
        }
        Ok(Self { lambda2, lambda3 })
    }
}

/// How a `(g2, g3)` hypothesis turns into expected counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CountModel {
    /// From total singles and shot count: `g2 N1²/N`, `g3 N1³/N²`.
    Singles { n1: f64, n_shots: f64 },
    /// From measured normalization peaks: `g2 * pair_norm`, `g3 * triple_norm`.
    Normalization { pair_norm: f64, triple_norm: f64 },
}

impl CountModel {
    pub fn expected(&self, g2: f64, g3: f64) -> Result<PoissonPair> {
        match *self {
            CountModel::Singles { n1, n_shots } => expected_counts(g2, g3, n1, n_shots),
            CountModel::Normalization { pair_norm, triple_norm } => {
                if !(g2 >= 0.0 && g3 >= 0.0 && pair_norm >= 0.0 && triple_norm >= 0.0) {
                    return Err(domain("normalization counts and correlations must be >= 0"));
                }
                PoissonPair::new(g2 * pair_norm, g3 * triple_norm)
            }
        }
    }
}

/// `lambda2 = g2 N1² / N`, `lambda3 = g3 N1³ / N²`.
pub fn expected_counts(g2: f64, g3: f64, n1: f64, n_shots: f64) -> Result<PoissonPair> {
    if !(g2 >= 0.0 && g3 >= 0.0 && n1 >= 0.0) {
        return Err(domain(format!("g2, g3, n1 must be >= 0, got ({g2}, {g3}, {n1})")));
    }
    if !(n_shots > 0.0) {
        return Err(domain(format!("n_shots must be > 0, got {n_shots}")));
    }
    let rate = n1 / n_shots;
    PoissonPair::new(g2 * n1 * rate, g3 * n1 * rate * rate)
}

/// `ln Pois(n2 | lambda2) + ln Pois(n3 | lambda3)`.
pub fn log_joint_prob(n2: u64, n3: u64, pp: PoissonPair) -> f64 {
    ln_pois(n2, pp.lambda2) + ln_pois(n3, pp.lambda3)
}

/// Tolerance for treating two joint log-probabilities as tied.
pub fn tie_tolerance(lm: f64) -> f64 {
    1e-10 * lm.abs().max(1.0)
}

fn mode(lambda: f64) -> u64 {
    lambda.floor() as u64
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Sums `Pois(k | lambda)` for `k = start, start+1, ...` (`up`) or
/// `k = start, start-1, ..., 0`, moving away from the mode. Stops once a
/// term plus `offset` drops `TRUNCATION_NATS` below `floor`.
fn tail_sum(start: u64, lambda: f64, up: bool, offset: f64, floor: f64) -> f64 {
    let head = ln_pois(start, lambda);
    if head == f64::NEG_INFINITY || head + offset < floor - TRUNCATION_NATS {
        return f64::NEG_INFINITY;
    }
    // Terms relative to the head stay within [1e-60, 1], so the ratio
    // recurrence is safe in the linear domain.
    let cut = (floor - TRUNCATION_NATS - offset - head).max(-700.0).exp();
    let mut acc = 1.0;
    let mut t = 1.0;
    let mut k = start as f64;
    if up {
        loop {
            k += 1.0;
            t *= lambda / k;
            if t < cut {
                break;
            }
            acc += t;
        }
    } else {
        while k > 0.0 {
            t *= k / lambda;
            k -= 1.0;
            if t < cut {
                break;
            }
            acc += t;
        }
    }
    head + acc.ln()
}

/// Smallest `k` in `[lo, hi]` with `pred(k)`, for `pred` monotone
/// false-then-true and `pred(hi)` true (`hi = None`: unbounded). Gallops out
/// from `hint`, which is where consecutive columns keep their thresholds.
fn first_true(lo: u64, hi: Option<u64>, hint: u64, pred: impl Fn(u64) -> bool) -> u64 {
    let top = hi.unwrap_or(u64::MAX);
    let h = hint.clamp(lo, top);
    let (mut f, mut t);
    let mut step = 1u64;
    if pred(h) {
        t = h;
        loop {
            if t == lo {
                return lo;
            }
            let c = t.saturating_sub(step).max(lo);
            if pred(c) {
                t = c;
                step = step.saturating_mul(2);
            } else {
                f = c;
                break;
            }
        }
    } else {
        f = h;
        loop {
            let c = f.saturating_add(step).min(top);
            if c == top && hi.is_some() {
                t = c;
                break;
            }
            if pred(c) {
                t = c;
                break;
            }
            f = c;
            step = step.saturating_mul(2);
        }
    }
    while t - f > 1 {
        let c = f + (t - f) / 2;
        if pred(c) {
            t = c;
        } else {
            f = c;
        }
    }
    t
}

/// Threshold positions carried from one column to the next.
#[derive(Clone, Copy)]
struct Cursor {
    lower: u64,
    upper: u64,
}

// Sum over k of Pois(k | lambda) for which ln Pois(k | lambda) <= tau.
fn column(lambda: f64, tau: f64, offset: f64, floor: f64, cur: &mut Cursor) -> f64 {
    let m = mode(lambda);
    if ln_pois(m, lambda) <= tau {
        // The whole column qualifies (flat top within tolerance).
        return 0.0;
    }
    // Lower side: ln p increases on [0, m]; take the last k with ln p <= tau.
    let above = first_true(0, Some(m), cur.lower, |k| ln_pois(k, lambda) > tau);
    let lower = if above == 0 {
        f64::NEG_INFINITY
    } else {
        cur.lower = above;
        tail_sum(above - 1, lambda, false, offset, floor)
    };
    // Upper side: first k > m with ln p <= tau.
    let b = first_true(m + 1, None, cur.upper, |k| ln_pois(k, lambda) <= tau);
    cur.upper = b;
    log_add(lower, tail_sum(b, lambda, true, offset, floor))
}

/// Natural log of the probability, under `pp`, of all outcomes `(n2, n3)`
/// at most as probable as the observation.
pub fn ln_p_tilde(n2_m: u64, n3_m: u64, pp: PoissonPair) -> f64 {
    let lm = log_joint_prob(n2_m, n3_m, pp);
    if lm == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let thr = lm + tie_tolerance(lm);
    let m2 = mode(pp.lambda2);
    let lp2_max = ln_pois(m2, pp.lambda2);
    let m3 = mode(pp.lambda3);

    let mut sum = f64::NEG_INFINITY;
    let visit = |k3: u64, sum: &mut f64, cur: &mut Cursor| -> bool {
        let l3 = ln_pois(k3, pp.lambda3);
        let floor = sum.max(lm);
        // Column terms never exceed min(l3 + lp2_max, thr); the remaining
        // columns in this direction are smaller still.
        if l3 == f64::NEG_INFINITY || l3 + lp2_max < floor - TRUNCATION_NATS {
            return false;
        }
        let col = column(pp.lambda2, thr - l3, l3, floor, cur);
        *sum = log_add(*sum, l3 + col);
        true
    };
    let mut start = Cursor { lower: n2_m.min(m2), upper: n2_m.max(m2 + 1) };
    visit(m3, &mut sum, &mut start);
    let mut cur = start;
    let mut k = m3 + 1;
    while visit(k, &mut sum, &mut cur) {
        k += 1;
    }
    let mut cur = start;
    let mut k = m3;
    while k > 0 {
        k -= 1;
        if !visit(k, &mut sum, &mut cur) {
            break;
        }
    }
    sum.min(0.0)
}

/// Base-10 log of p-tilde.
pub fn p_tilde(n2_m: u64, n3_m: u64, pp: PoissonPair) -> f64 {
    ln_p_tilde(n2_m, n3_m, pp) / std::f64::consts::LN_10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueResult {
    pub log10_p: f64,
    pub argmax_g2: f64,
    pub argmax_g3: f64,
}

fn boundary_point(u: f64) -> (f64, f64) {
    let g3 = 2.0 - 3.0 * u;
    (u * u, g3 * g3)
}

/// Maximizes p-tilde along the Gaussian boundary `g3 = (2 - 3 sqrt g2)²`.
pub fn max_p_over_boundary(n2_m: u64, n3_m: u64, n1: f64, n_shots: f64) -> Result<PValueResult> {
    max_p_over_boundary_with(n2_m, n3_m, CountModel::Singles { n1, n_shots })
}

pub fn max_p_over_boundary_with(n2_m: u64, n3_m: u64, model: CountModel) -> Result<PValueResult> {
    // Validate once so the search itself cannot fail.
    model.expected(0.0, 0.0)?;
    let u_max = CERTIFIED_G2_LIMIT.sqrt();
    let eval = |u: f64| -> f64 {
        let (g2, g3) = boundary_point(u);
        match model.expected(g2, g3) {
            Ok(pp) => p_tilde(n2_m, n3_m, pp),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let step = u_max / (BOUNDARY_GRID - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..BOUNDARY_GRID)
        .into_par_iter()
        .map(|i| {
            let u = (i as f64 * step).min(u_max);
            (u, eval(u))
        })
        .collect();
    let (mut best_u, mut best) = grid[0];
    for &(u, v) in &grid[1..] {
        if v > best {
            best_u = u;
            best = v;
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = (best_u - step).max(0.0);
    let mut b = (best_u + step).min(u_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    // g2 = u², so the g2 width of [a, b] is (b - a)(b + a).
    while (b - a) * (b + a) > BOUNDARY_G2_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    for (u, v) in [(c, fc), (d, fd)] {
        if v > best {
            best_u = u;
            best = v;
        }
    }
    let (g2, g3) = boundary_point(best_u);
    Ok(PValueResult { log10_p: best.min(0.0), argmax_g2: g2, argmax_g3: g3 })
}
