//! Jacobi projection of three-click events.
//!
//! For detection times `(t1, t2, t3)` on channels 0, 1, 2 the map
//! `j1 = (2t1 - t2 - t3)/√6`, `j2 = (t2 - t3)/√2` drops the common delay. A
//! cyclic relabeling of the channels is a 120° rotation in this plane.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::coincidence::AnalysisConfig;
use crate::error::{Result, TimetagError};
use crate::stream::ClickStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiPoint {
    pub j1: f64,
    pub j2: f64,
}

pub fn jacobi(t1_ns: f64, t2_ns: f64, t3_ns: f64) -> JacobiPoint {
    JacobiPoint {
        j1: (2.0 * t1_ns - t2_ns - t3_ns) / 6f64.sqrt(),
        j2: (t2_ns - t3_ns) / std::f64::consts::SQRT_2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleSelection {
    SamePulse,
    PairLag,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobiBinning {
    /// Cartesian bin width and polar ring width.
    pub bin_ns: f64,
    /// Half-width of the Cartesian grid and outer radius of the polar grid.
    pub extent_ns: f64,
    /// Angular sectors; a multiple of 3 so 120° maps sector onto sector.
    pub sectors: usize,
}

impl Default for JacobiBinning {
    fn default() -> Self {
        Self { bin_ns: 0.1, extent_ns: 3.0, sectors: 36 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiHistogram {
    pub binning: JacobiBinning,
    /// Bins per axis; odd, with the origin in the central bin.
    pub n_bins: usize,
    /// Row-major `[i1 * n_bins + i2]`.
    pub counts: Vec<u64>,
    pub n_rings: usize,
    /// `[ring * sectors + sector]`, sector 0 starting on the +j1 axis.
    pub polar: Vec<u64>,
    pub total: u64,
    /// Points outside the Cartesian grid.
    pub overflow: u64,
}

impl JacobiHistogram {
    pub fn new(binning: JacobiBinning) -> Result<Self> {
        if !(binning.bin_ns > 0.0 && binning.extent_ns > 0.0) {
            return Err(TimetagError::Config("jacobi bin width and extent must be > 0".into()));
        }
        if binning.sectors == 0 || !binning.sectors.is_multiple_of(3) {
            return Err(TimetagError::Config(format!("sector count {} is not a multiple of 3", binning.sectors)));
        }
        let half = (binning.extent_ns / binning.bin_ns).ceil() as usize;
        let n_bins = 2 * half + 1;
        let n_rings = half.max(1);
        Ok(Self {
            binning,
            n_bins,
            counts: vec![0; n_bins * n_bins],
            n_rings,
            polar: vec![0; n_rings * binning.sectors],
            total: 0,
            overflow: 0,
        })
    }

    pub fn add(&mut self, p: JacobiPoint) {
        self.total += 1;
        let w = self.binning.bin_ns;
        let half = (self.n_bins / 2) as f64;
        let i1 = (p.j1 / w).round() + half;
        let i2 = (p.j2 / w).round() + half;
        let n = self.n_bins as f64;
        if (0.0..n).contains(&i1) && (0.0..n).contains(&i2) {
            self.counts[i1 as usize * self.n_bins + i2 as usize] += 1;
        } else {
            self.overflow += 1;
        }
        let r = p.j1.hypot(p.j2);
        let ring = (r / w).floor();
        if ring < self.n_rings as f64 {
            let s = self.binning.sectors;
            let ang = p.j2.atan2(p.j1).rem_euclid(std::f64::consts::TAU);
            let sector = ((ang / std::f64::consts::TAU * s as f64) as usize).min(s - 1);
            self.polar[ring as usize * s + sector] += 1;
        }
    }

    pub fn count_at(&self, i1: usize, i2: usize) -> u64 {
        self.counts[i1 * self.n_bins + i2]
    }

    /// Centre of Cartesian bin `i` in ns.
    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 - (self.n_bins / 2) as f64) * self.binning.bin_ns
    }

    /// Polar cells related by 120° rotations, grouped in threes.
    pub fn rotation_triplets(&self) -> Vec<[u64; 3]> {
        let s = self.binning.sectors;
        let third = s / 3;
        let mut out = Vec::with_capacity(self.n_rings * third);
        for ring in 0..self.n_rings {
            let row = &self.polar[ring * s..(ring + 1) * s];
            for k in 0..third {
                out.push([row[k], row[k + third], row[k + 2 * third]]);
            }
        }
        out
    }

    /// Largest deviation of a triplet member from the triplet mean, in units
    /// of its multinomial standard deviation. Triplets with fewer than
    /// `min_total` counts are skipped.
    pub fn max_rotation_z(&self, min_total: u64) -> f64 {
        let mut worst: f64 = 0.0;
        for t in self.rotation_triplets() {
            let n: u64 = t.iter().sum();
            if n < min_total || n == 0 {
                continue;
            }
            let mean = n as f64 / 3.0;
            let sd = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
            for &c in &t {
                worst = worst.max((c as f64 - mean).abs() / sd);
            }
        }
        worst
    }
}

/// Histogram of the Jacobi points of every selected triple, built from the
/// intra-pulse offsets of the three clicks.
pub fn jacobi_histogram(
    s: &ClickStream,
    cfg: &AnalysisConfig,
    selection: TripleSelection,
    binning: JacobiBinning,
) -> Result<JacobiHistogram> {
    cfg.validate()?;
    let mut h = JacobiHistogram::new(binning)?;
    let d = cfg.norm_delay_pulses;
    let span = match selection {
        TripleSelection::SamePulse => 0,
        TripleSelection::PairLag => 1,
        TripleSelection::Separate => 2 * d,
    };
    let mut recent: [VecDeque<(u64, i64)>; 3] = Default::default();
    let others = [[1usize, 2], [0, 2], [0, 1]];
    let mut hits = Vec::new();
    for r in s.records() {
        let (p, off) = cfg.assign(r.t_ps);
        if !cfg.in_window(off) {
            continue;
        }
        let oldest = p.saturating_sub(span);
        for q in recent.iter_mut() {
            while q.front().is_some_and(|&(f, _)| f < oldest) {
                q.pop_front();
            }
        }
        let ch = r.channel as usize;
        let [b, c] = others[ch];
        let wanted: &[(u64, u64)] = match selection {
            TripleSelection::SamePulse => &[(0, 0)],
            TripleSelection::PairLag => &[(0, 1), (1, 0), (1, 1)],
            TripleSelection::Separate => &[(d, 2 * d), (2 * d, d)],
        };
        for &(db, dc) in wanted {
            if db > p || dc > p {
                continue;
            }
            let (qb, qc) = (p - db, p - dc);
            for &(pb, ob) in at_pulse(&recent[b], qb) {
                for &(_, oc) in at_pulse(&recent[c], qc) {
                    debug_assert_eq!(pb, qb);
                    let mut t = [0i64; 3];
                    t[ch] = off;
                    t[b] = ob;
                    t[c] = oc;
                    hits.push(t);
                }
            }
        }
        for t in hits.drain(..) {
            h.add(jacobi(t[0] as f64 * 1e-3, t[1] as f64 * 1e-3, t[2] as f64 * 1e-3));
        }
        recent[ch].push_back((p, off));
    }
    Ok(h)
}

fn at_pulse(q: &VecDeque<(u64, i64)>, p: u64) -> impl Iterator<Item = &(u64, i64)> {
    let start = q.partition_point(|&(x, _)| x < p);
    q.range(start..).take_while(move |&&(x, _)| x == p)
}
