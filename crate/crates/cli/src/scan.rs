//! Parameter scans over pure Gaussian states and the companion curves.

use std::io::Write;

use nongauss_core::bounds::{g2_min, g2u_min_gaussian, lower_boundary_g3, tangent_at, upper_boundary_g3, LINEAR_BOUNDS, CERTIFIED_G2_LIMIT};
use nongauss_core::gaussian_model::{correlations, moments, GaussianParams};
use serde::Serialize;

use crate::config::ScanGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub curve: &'static str,
    pub g2: f64,
    pub g3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinCurvePoint {
    /// Mean photon number `G1`.
    pub g1: f64,
    /// Minimal Gaussian `G2`.
    pub g2u_min: f64,
    pub g2_min: f64,
}

pub fn scan_row(alpha: f64, r: f64, theta: f64) -> nongauss_core::Result<ScanRow> {
    let p = GaussianParams::canonical(alpha, r, theta)?;
    let m = moments(&p);
    let c = correlations(&m)?;
    Ok(ScanRow { alpha, r, theta, g1: m.g1, g2: c.g2, g3: c.g3 })
}

/// Every grid point, alpha slowest and theta fastest.
pub fn scan_rows(grid: &ScanGrid) -> impl Iterator<Item = nongauss_core::Result<ScanRow>> + '_ {
    (0..grid.alpha_n).flat_map(move |i| {
        (0..grid.r_n).flat_map(move |j| (0..grid.theta_n).map(move |k| scan_row(grid.alpha(i), grid.r(j), grid.theta(k))))
    })
}

// Touch points of the sampled tangent family.
const TANGENT_TOUCH: [(&str, f64); 3] = [("tangent_1/36", 1.0 / 36.0), ("tangent_1/9", 1.0 / 9.0), ("tangent_1/4", 0.25)];

/// Lower and upper boundary, the four fixed linear bounds and a few tangents,
/// in long format on `g2 ∈ [0, 4/9]`.
pub fn boundary_curves(points: usize) -> nongauss_core::Result<Vec<CurvePoint>> {
    let gs: Vec<f64> = (0..points).map(|i| CERTIFIED_G2_LIMIT * i as f64 / (points - 1) as f64).collect();
    let mut out = Vec::with_capacity(gs.len() * (2 + LINEAR_BOUNDS.len() + TANGENT_TOUCH.len()));
    for &g2 in &gs {
        out.push(CurvePoint { curve: "lower", g2, g3: lower_boundary_g3(g2)? });
    }
    for &g2 in &gs {
        out.push(CurvePoint { curve: "upper", g2, g3: upper_boundary_g3(g2)? });
    }
    for b in LINEAR_BOUNDS.iter() {
        for &g2 in &gs {
            out.push(CurvePoint { curve: b.id, g2, g3: b.chi1 - b.chi2 * g2 });
        }
    }
    for (name, touch) in TANGENT_TOUCH {
        let t = tangent_at(touch)?;
        for &g2 in &gs {
            out.push(CurvePoint { curve: name, g2, g3: t.g3_at(g2) });
        }
    }
    Ok(out)
}

/// Minimal Gaussian `G2` against `G1` up to `g1_max`.
pub fn min_curve(g1_max: f64, points: usize) -> nongauss_core::Result<Vec<MinCurvePoint>> {
    (1..=points)
        .map(|i| {
            let n = g1_max * i as f64 / points as f64;
            Ok(MinCurvePoint { g1: n, g2u_min: g2u_min_gaussian(n)?, g2_min: g2_min(n)? })
        })
        .collect()
}

/// Largest mean photon number on the grid, `alpha_max² + sinh² r_max`.
pub fn grid_g1_max(grid: &ScanGrid) -> f64 {
    grid.alpha_max * grid.alpha_max + grid.r_max.sinh().powi(2)
}

pub fn write_rows<W: Write, S: Serialize>(out: W, rows: impl IntoIterator<Item = S>) -> anyhow::Result<u64> {
    let mut w = csv::Writer::from_writer(out);
    let mut n = 0;
    for r in rows {
        w.serialize(r)?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}
