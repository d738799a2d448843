//! Self-check suite: closed forms against the Fock oracle plus the
//! structural properties of the boundary, grouped so a failure points at one
//! area.

use serde::Serialize;

use crate::bounds::{
    criterion, joint_cumulant_g3, lower_boundary_g3, mean_photon_criterion, quartic_residual, quartic_x,
    tangent_at, upper_boundary_g3, g2_min, CERTIFIED_G2_LIMIT, LINEAR_BOUNDS,
};
use crate::error::Result;
use crate::fock_oracle::{auto_dim, build_displaced_squeezed, oracle_moments, oracle_multimode_moments, FockVector};
use crate::gaussian_model::{
    correlations, first_order_expectations, mixture_moments, moments, multimode_moments, GaussianParams,
    MixtureSpec, MomentTriple,
};

pub type MomentsFn = fn(&GaussianParams<f64>) -> MomentTriple<f64>;

#[derive(Debug, Clone, Serialize)]
pub struct GroupResult {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub groups: Vec<GroupResult>,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Closed-form moments under test.
    pub moments: MomentsFn,
    /// Fixed Fock dimension; `None` picks one per point.
    pub oracle_dim: Option<usize>,
    /// Points per axis of the containment grid.
    pub containment_grid: usize,
    pub mixture_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            moments: moments::<f64>,
            oracle_dim: None,
            containment_grid: 60,
            mixture_samples: 2000,
        }
    }
}

/// Closed-form moments with the sign of the `Re(⟨aa⟩⟨a†⟩²)` term flipped.
pub fn moments_with_g3_sign_error(p: &GaussianParams<f64>) -> MomentTriple<f64> {
    let f = first_order_expectations(p);
    let good = moments(p);
    let cross = (f.mean_aa * f.mean_a.conj() * f.mean_a.conj()).re;
    MomentTriple { g3u: good.g3u + 24.0 * f.mean_a.norm_sqr() * cross, ..good }
}

// Low-discrepancy points in [0,1)^d without pulling in an RNG.
fn weyl(i: usize, d: usize) -> f64 {
    const A: [f64; 6] = [
        0.618_033_988_749_894_9,
        0.414_213_562_373_095_1,
        0.732_050_807_568_877_2,
        0.236_067_977_499_789_7,
        0.645_751_311_064_590_6,
        0.316_624_790_355_399_9,
    ];
    ((i as f64 + 1.0) * A[d % A.len()] + d as f64 * 0.1).fract()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn group(name: &'static str, checked: usize, max_deviation: f64, tolerance: f64) -> GroupResult {
    GroupResult { name, passed: max_deviation <= tolerance, checked, max_deviation, tolerance }
}

/// Wick closed form against the number-basis state on
/// `alpha <= 1.5`, `r <= 1.2`, four angles.
pub fn wick_oracle_group(f: MomentsFn, oracle_dim: Option<usize>) -> Result<GroupResult> {
    let thetas = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 4.0];
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for ia in 1..=25 {
        let a = 1.5 * ia as f64 / 25.0;
        for ir in 0..=20 {
            let r = 1.2 * ir as f64 / 20.0;
            for &th in &thetas {
                let p = GaussianParams::canonical(a, r, th)?;
                let dim = oracle_dim.unwrap_or_else(|| auto_dim(&p));
                let o = oracle_moments(&build_displaced_squeezed(&p, dim)?);
                let c = f(&p);
                worst = worst.max(rel(c.g1, o.g1)).max(rel(c.g2u, o.g2u)).max(rel(c.g3u, o.g3u));
                n += 1;
            }
        }
    }
    Ok(group("wick_consistency", n, worst, 1e-9))
}

pub fn boundary_anchor_group() -> Result<GroupResult> {
    let dev = lower_boundary_g3(CERTIFIED_G2_LIMIT)?
        .abs()
        .max((lower_boundary_g3(0.0f64)? - 4.0).abs())
        .max((upper_boundary_g3(0.0f64)? - 4.0).abs());
    Ok(group("boundary_anchors", 3, dev, 0.0))
}

/// Pure states stay between the two boundary branches. The deviation is the
/// largest excursion outside the band.
pub fn containment_group(f: MomentsFn, per_axis: usize) -> Result<GroupResult> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for ia in 1..=per_axis {
        let a = ia as f64 / per_axis as f64;
        for ir in 0..per_axis {
            let r = ir as f64 / (per_axis - 1).max(1) as f64;
            for it in 0..7 {
                let th = std::f64::consts::PI * it as f64 / 6.0;
                let c = correlations(&f(&GaussianParams::canonical(a, r, th)?))?;
                let lo = lower_boundary_g3(c.g2)?;
                let hi = upper_boundary_g3(c.g2)?;
                worst = worst.max(lo - c.g3).max(c.g3 - hi);
                n += 1;
            }
        }
    }
    Ok(group("pure_containment", n, worst.max(0.0), 1e-12))
}

/// Mixtures of up to three pure states with `g2 < 4/9` respect the criterion.
///
/// Antibunched pure states need `alpha <= 0.5`, `r ~ alpha²` and `theta ~ 0`,
/// so three draws in four scatter components around such a point; the rest
/// are drawn from the whole parameter box.
pub fn mixture_group(samples: usize) -> Result<GroupResult> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut i = 0;
    while n < samples && i < samples * 200 {
        let k = 1 + i % 3;
        let local = i % 4 != 3;
        let b = i * 3;
        let (a0, c0, t0) = (0.05 + 0.45 * weyl(b, 4), 0.2 + weyl(b, 5), 0.6 * (weyl(b, 0) - 0.5));
        let mut parts = Vec::with_capacity(k);
        let mut wsum = 0.0;
        for j in 0..k {
            let s = b + j;
            let w = 0.05 + weyl(s, 0);
            let p = if local {
                let a = a0 * (1.0 + 0.5 * (weyl(s, 1) - 0.5));
                let r = c0 * a * a * (1.0 + 0.5 * (weyl(s, 2) - 0.5));
                GaussianParams::canonical(a, r, t0 + 0.4 * (weyl(s, 3) - 0.5))?
            } else {
                GaussianParams::canonical(1.5 * weyl(s, 1), 1.2 * weyl(s, 2), std::f64::consts::TAU * weyl(s, 3))?
            };
            wsum += w;
            parts.push((w, p));
        }
        i += 1;
        for part in parts.iter_mut() {
            part.0 /= wsum;
        }
        let m = mixture_moments(&MixtureSpec::new(parts)?);
        if m.g1 < 1e-6 {
            continue;
        }
        let c = correlations(&m)?;
        if c.g2 >= CERTIFIED_G2_LIMIT {
            continue;
        }
        worst = worst.max(2.0 - (c.g3.sqrt() + 3.0 * c.g2.sqrt()));
        n += 1;
    }
    let mut g = group("mixture_theorem", n, worst.max(0.0), 1e-10);
    // Too few antibunched mixtures is a failed check, not a pass.
    g.passed &= n == samples;
    Ok(g)
}

pub fn multimode_group(f: MomentsFn, oracle_dim: Option<usize>) -> Result<GroupResult> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for modes in 2..=3 {
        for s in 0..20 {
            let ps: Vec<GaussianParams<f64>> = (0..modes)
                .map(|j| {
                    let i = s * 3 + j;
                    GaussianParams::canonical(weyl(i, 4), 0.6 * weyl(i, 5), std::f64::consts::TAU * weyl(i, 0))
                })
                .collect::<Result<_>>()?;
            let closed = multimode_moments(&ps.iter().map(f).collect::<Vec<_>>())?;
            let states: Vec<FockVector<f64>> = ps
                .iter()
                .map(|p| build_displaced_squeezed(p, oracle_dim.unwrap_or_else(|| auto_dim(p))))
                .collect::<Result<_>>()?;
            let o = oracle_multimode_moments(&states)?;
            worst = worst.max(rel(closed.g1, o.g1)).max(rel(closed.g2u, o.g2u)).max(rel(closed.g3u, o.g3u));
            n += 1;
        }
    }
    // All-coherent composition is Poissonian.
    let coh: Vec<_> = [0.3, 0.7, 1.1].iter().map(|&a| f(&GaussianParams::coherent(a).unwrap())).collect();
    let c = correlations(&multimode_moments(&coh)?)?;
    worst = worst.max((c.g2 - 1.0).abs()).max((c.g3 - 1.0).abs());
    Ok(group("multimode_closure", n + 1, worst, 1e-9))
}

/// Tangent family and the fixed linear bounds never cut below the curve.
pub fn tangent_group() -> Result<GroupResult> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let grid = 4001;
    for k in 1..40 {
        let t = tangent_at(CERTIFIED_G2_LIMIT * k as f64 / 40.0)?;
        // Touches at the contact point, never above the curve elsewhere.
        let mut dev = (lower_boundary_g3(t.touch_g2)? - t.g3_at(t.touch_g2)).abs();
        for i in 0..grid {
            let g = CERTIFIED_G2_LIMIT * i as f64 / (grid - 1) as f64;
            dev = dev.max(t.g3_at(g) - lower_boundary_g3(g)?);
        }
        worst = worst.max(dev);
        n += 1;
    }
    for b in LINEAR_BOUNDS.iter() {
        for i in 0..grid {
            let g = CERTIFIED_G2_LIMIT * i as f64 / (grid - 1) as f64;
            let line = b.chi1 - b.chi2 * g;
            worst = worst.max(line - lower_boundary_g3(g)?);
        }
        n += 1;
    }
    Ok(group("tangent_family", n, worst.max(0.0), 1e-9))
}

pub fn quartic_group() -> Result<GroupResult> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut prev = 0.0;
    for i in 0..=1000 {
        let nbar = 0.1 * i as f64;
        worst = worst.max(quartic_residual(quartic_x(nbar)?, nbar).abs());
        if nbar >= 1.0 {
            let g = g2_min(nbar)?;
            if g + 1e-12 < prev {
                worst = worst.max(prev - g);
            }
            prev = g;
        }
        n += 1;
    }
    for k in 1..=50u32 {
        let nb = k as f64;
        if !mean_photon_criterion(nb, (nb - 1.0) / nb)? {
            worst = f64::INFINITY;
        }
        n += 1;
    }
    Ok(group("quartic_criterion", n, worst, 1e-10))
}

/// Criterion value and cumulant of a coherent state as a smoke check.
pub fn coherent_group(f: MomentsFn) -> Result<GroupResult> {
    let c = correlations(&f(&GaussianParams::coherent(0.8)?))?;
    let v = criterion(&c);
    let dev = (v.criterion_value - 4.0).abs().max(joint_cumulant_g3(&c).abs());
    Ok(group("coherent_closure", 1, dev, 1e-12))
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let groups = vec![
        boundary_anchor_group()?,
        wick_oracle_group(opts.moments, opts.oracle_dim)?,
        containment_group(opts.moments, opts.containment_grid)?,
        mixture_group(opts.mixture_samples)?,
        multimode_group(opts.moments, opts.oracle_dim)?,
        tangent_group()?,
        quartic_group()?,
        coherent_group(opts.moments)?,
    ];
    Ok(VerifyReport { passed: groups.iter().all(|g| g.passed), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn default_run_is_green() {
        let r = run(&VerifyOptions { containment_grid: 20, mixture_samples: 300, ..Default::default() }).unwrap();
        for g in &r.groups {
            assert!(g.passed, "{g:?}");
        }
    }

    #[test]
    fn sign_error_trips_wick_group() {
        let g = wick_oracle_group(moments_with_g3_sign_error, None).unwrap();
        assert!(!g.passed);
    }

    #[test]
    fn tiny_dimension_is_a_truncation_error() {
        let e = wick_oracle_group(moments::<f64>, Some(8)).unwrap_err();
        assert!(matches!(e, Error::Truncation { dim: 8, .. }), "{e:?}");
    }
}
