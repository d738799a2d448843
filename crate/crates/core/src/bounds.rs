//! Boundary curves of Gaussian states in the `(g⁽²⁾, g⁽³⁾)` plane, the
//! non-Gaussianity criterion `√g⁽³⁾ + 3√g⁽²⁾ < 2`, its linear tangent
//! relaxations, and the mean-photon-number criterion.

use crate::error::{domain, Result};
use crate::gaussian_model::CorrelationPoint;
use crate::scalar::Scalar;

/// `g⁽²⁾` where the lower boundary reaches zero.
pub const CERTIFIED_G2_LIMIT: f64 = 4.0 / 9.0;

/// Threshold of the criterion value `√g⁽³⁾ + 3√g⁽²⁾`.
pub const CRITERION_THRESHOLD: f64 = 2.0;

fn check_g2<T: Scalar>(g2: T) -> Result<()> {
    if g2 < T::zero() || !g2.is_finite() {
        return Err(domain(format!("g2 = {g2} must be finite and >= 0")));
    }
    Ok(())
}

/// `(2 − 3√g⁽²⁾)²`. Bounds Gaussian pure states from below for `g⁽²⁾ ≤ 4/9`.
pub fn lower_boundary_g3<T: Scalar>(g2: T) -> Result<T> {
    check_g2(g2)?;
    let d = T::lit(2.0) - T::lit(3.0) * g2.sqrt();
    Ok(d * d)
}

/// `(2 + 3√g⁽²⁾)²`.
pub fn upper_boundary_g3<T: Scalar>(g2: T) -> Result<T> {
    check_g2(g2)?;
    let d = T::lit(2.0) + T::lit(3.0) * g2.sqrt();
    Ok(d * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict<T> {
    /// `√g⁽³⁾ + 3√g⁽²⁾`.
    pub criterion_value: T,
    /// `criterion_value < 2`.
    pub non_gaussian: bool,
    /// `(2 − value) / σ_value` when the point carries errors.
    pub sigma_distance: Option<T>,
}

/// Evaluates the certification criterion.
///
/// The uncertainty of the criterion value is propagated to first order.
/// A vanishing `g⁽³⁾` (or `g⁽²⁾`) has no usable derivative; its sigma is
/// then read as a one-sided upper limit `u` and contributes `√u`, the amount
/// the square root could grow within one sigma.
pub fn criterion<T: Scalar>(c: &CorrelationPoint<T>) -> Verdict<T> {
    let g2 = c.g2.max(T::zero());
    let g3 = c.g3.max(T::zero());
    let three = T::lit(3.0);
    let value = g3.sqrt() + three * g2.sqrt();

    let term = |g: T, sigma: T, weight: T| {
        if g > T::zero() {
            weight * sigma / (T::lit(2.0) * g.sqrt())
        } else {
            weight * sigma.sqrt()
        }
    };
    let sigma_distance = match (c.g2_sigma, c.g3_sigma) {
        (None, None) => None,
        (s2, s3) => {
            let t2 = s2.map_or(T::zero(), |s| term(g2, s, three));
            let t3 = s3.map_or(T::zero(), |s| term(g3, s, T::one()));
            let sigma = (t2 * t2 + t3 * t3).sqrt();
            (sigma > T::zero()).then(|| (T::lit(CRITERION_THRESHOLD) - value) / sigma)
        }
    };
    Verdict {
        criterion_value: value,
        non_gaussian: value < T::lit(CRITERION_THRESHOLD),
        sigma_distance,
    }
}

/// Left-hand side of the pure-state inequality after squaring, divided by
/// `16 sinh⁴ r`, as a polynomial in `α`, `sinh r`, `cosh r`.
///
/// Every negative monomial is dominated by the positive one before it since
/// `cosh r ≥ sinh r`, so the value is nonnegative.
pub fn pure_state_polynomial<T: Scalar>(alpha: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(domain(format!("pure-state polynomial needs r > 0, got {r}")));
    }
    if alpha < T::zero() {
        return Err(domain(format!("alpha = {alpha} < 0")));
    }
    let l = T::lit;
    let (s, c) = (r.sinh(), r.cosh());
    let a2 = alpha * alpha;
    let (a4, a6) = (a2 * a2, a2 * a2 * a2);
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5, s6) = (s2 * s2, s2 * s3, s3 * s3);
    let s8 = s4 * s4;
    let c2 = c * c;
    Ok(l(36.0) * a6 * c2 - l(36.0) * a6 * c * s + l(12.0) * a6 * s2
        + l(54.0) * a4 * c2 * s2
        - l(48.0) * a4 * c * s3
        + l(21.0) * a4 * s4
        + l(36.0) * a2 * c2 * s4
        - l(18.0) * a2 * c * s5
        + l(12.0) * a2 * s6
        + l(9.0) * c2 * s6
        + l(2.0) * s8)
}

/// The line `g⁽³⁾ = χ₁ − χ₂ g⁽²⁾` tangent to the lower boundary at `touch_g2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentLine<T> {
    pub chi1: T,
    pub chi2: T,
    pub touch_g2: T,
}

impl<T: Scalar> TangentLine<T> {
    pub fn g3_at(&self, g2: T) -> T {
        self.chi1 - self.chi2 * g2
    }

    pub fn slope(&self) -> T {
        -self.chi2
    }

    /// True when the point lies strictly below the line.
    pub fn certifies(&self, c: &CorrelationPoint<T>) -> bool {
        c.g3 + self.chi2 * c.g2 < self.chi1
    }
}

/// Tangent of the lower boundary at `g2 ∈ (0, 4/9]`.
///
/// Slope `k = −3(2 − 3√g)/√g`, `χ₂ = −k` and intercept `χ₁ = 4 − 6√g`.
/// The slope never exceeds 0 on this interval, so `χ₂ ≥ −3` holds and the
/// `θ = 0` minimization underlying the bound applies.
pub fn tangent_at<T: Scalar>(g2: T) -> Result<TangentLine<T>> {
    if !(g2 > T::zero() && g2 <= T::lit(CERTIFIED_G2_LIMIT)) {
        return Err(domain(format!("tangent point g2 = {g2} outside (0, 4/9]")));
    }
    let l = T::lit;
    let sq = g2.sqrt();
    let k = -l(3.0) * (l(2.0) - l(3.0) * sq) / sq;
    Ok(TangentLine {
        chi1: l(4.0) - l(6.0) * sq,
        chi2: -k,
        touch_g2: g2,
    })
}

/// One of the four simple linear relaxations `g⁽³⁾ + χ₂ g⁽²⁾ < χ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBound {
    pub id: &'static str,
    pub chi2: f64,
    pub chi1: f64,
}

pub const LINEAR_BOUNDS: [LinearBound; 4] = [
    LinearBound { id: "g3+g2<2/5", chi2: 1.0, chi1: 0.4 },
    LinearBound { id: "g3+3g2<1", chi2: 3.0, chi1: 1.0 },
    LinearBound { id: "g3+9g2<2", chi2: 9.0, chi1: 2.0 },
    LinearBound { id: "g3+28g2<3", chi2: 28.0, chi1: 3.0 },
];

impl LinearBound {
    pub fn satisfied_by<T: Scalar>(&self, c: &CorrelationPoint<T>) -> bool {
        c.g3 + T::lit(self.chi2) * c.g2 < T::lit(self.chi1)
    }
}

/// Evaluates the four linear bounds; any `true` certifies non-Gaussianity.
pub fn linear_bounds_check<T: Scalar>(c: &CorrelationPoint<T>) -> Vec<(&'static str, bool)> {
    LINEAR_BOUNDS.iter().map(|b| (b.id, b.satisfied_by(c))).collect()
}

/// Connected part `g⁽³⁾ − 3g⁽²⁾ + 2`; negative only for non-Gaussian pure states.
pub fn joint_cumulant_g3<T: Scalar>(c: &CorrelationPoint<T>) -> T {
    c.g3 - T::lit(3.0) * c.g2 + T::lit(2.0)
}

/// `1 + x⁴ − (4n + 2)x`.
pub fn quartic_residual<T: Scalar>(x: T, n: T) -> T {
    let b = T::lit(4.0) * n + T::lit(2.0);
    T::one() + x.powi(4) - b * x
}

fn quartic_closed_form<T: Scalar>(n: T) -> T {
    let l = T::lit;
    let b = l(4.0) * n + l(2.0);
    let b2 = b * b;
    let c = (l(3.0).sqrt() * (l(27.0) * b2 * b2 - l(256.0)).sqrt() + l(9.0) * b2).cbrt();
    let q = c / l(18.0).cbrt() + l(4.0) * l(2.0 / 3.0).cbrt() / c;
    let sq = q.sqrt();
    l(0.5) * sq + l(0.5) * ((l(8.0) * n + l(4.0)) / sq - q).sqrt()
}

/// Bisection for the root of `1 + x⁴ − (4n + 2)x` on `[1, (4n+3)^{1/3} + 1]`.
pub(crate) fn quartic_bracketed<T: Scalar>(n: T) -> T {
    let l = T::lit;
    let mut lo = T::one();
    let mut hi = (l(4.0) * n + l(3.0)).cbrt() + T::one();
    // f(lo) <= 0 <= f(hi) for n >= 0.
    for _ in 0..200 {
        let mid = l(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if quartic_residual(mid, n) <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if quartic_residual(hi, n).abs() < quartic_residual(lo, n).abs() {
        hi
    } else {
        lo
    }
}

/// Root `x = e^{2r} ≥ 1` of `1 + x⁴ − (4n + 2)x = 0` locating the Gaussian
/// state of minimal `⟨a†a†aa⟩` at fixed `⟨a†a⟩ = n`.
///
/// Evaluated by radicals; falls back to bisection when the closed form loses
/// precision.
pub fn quartic_x<T: Scalar>(n: T) -> Result<T> {
    if n < T::zero() || !n.is_finite() {
        return Err(domain(format!("mean photon number n = {n} must be finite and >= 0")));
    }
    let x = quartic_closed_form(n);
    let b = T::lit(4.0) * n + T::lit(2.0);
    let scale = T::one() + b * x.abs();
    let ok = x.is_finite()
        && x >= T::one() - T::lit(64.0) * T::epsilon()
        && quartic_residual(x, n).abs() <= T::lit(64.0) * T::epsilon() * scale;
    Ok(if ok { x.max(T::one()) } else { quartic_bracketed(n) })
}

/// Minimum of `⟨a†a†aa⟩` over Gaussian pure states with `⟨a†a⟩ = n`.
pub fn g2u_min_gaussian<T: Scalar>(n: T) -> Result<T> {
    let x = quartic_x(n)?;
    let l = T::lit;
    let x2 = x * x;
    let num = x2 * x2 + x2 * (l(8.0) * n * n - l(8.0) * n - l(4.0)) + x * (l(8.0) * n + l(4.0)) - T::one();
    Ok((num / (l(8.0) * x2)).max(T::zero()))
}

/// Minimal Gaussian `g⁽²⁾` at mean photon number `n > 0`.
pub fn g2_min<T: Scalar>(n: T) -> Result<T> {
    if !(n > T::zero()) {
        return Err(domain(format!("g2_min needs n > 0, got {n}")));
    }
    Ok(g2u_min_gaussian(n)? / (n * n))
}

/// True when `g2` lies below every Gaussian state with mean photon number `n`.
pub fn mean_photon_criterion<T: Scalar>(n: T, g2: T) -> Result<bool> {
    if !(n > T::zero()) {
        return Err(domain(format!("mean photon criterion needs n > 0, got {n}")));
    }
    check_g2(g2)?;
    Ok(g2 < g2_min(n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_model::{correlations, moments, GaussianParams};
    use proptest::prelude::*;

    fn pt(g2: f64, g3: f64) -> CorrelationPoint<f64> {
        CorrelationPoint::new(g2, g3)
    }

    #[test]
    fn boundary_anchors() {
        assert_eq!(lower_boundary_g3(0.0).unwrap(), 4.0);
        assert_eq!(lower_boundary_g3(4.0 / 9.0).unwrap(), 0.0);
        assert_eq!(lower_boundary_g3(1.0).unwrap(), 1.0);
        assert_eq!(upper_boundary_g3(0.0).unwrap(), 4.0);
        assert_eq!(upper_boundary_g3(1.0).unwrap(), 25.0);
        assert_eq!(upper_boundary_g3(4.0 / 9.0).unwrap(), 16.0);
        assert!(lower_boundary_g3(-0.1).is_err());
        assert!(upper_boundary_g3(-0.1).is_err());
    }

    #[test]
    fn criterion_examples() {
        let v = criterion(&pt(0.00334, 0.0));
        assert!((v.criterion_value - 0.173_378).abs() < 1e-5 && v.non_gaussian);
        assert!(v.sigma_distance.is_none());

        let v = criterion(&pt(1.0, 1.0));
        assert_eq!((v.criterion_value, v.non_gaussian), (4.0, false));

        let v = criterion(&pt(0.759_514_664_737_612, 0.132_768_313_020_514_7));
        assert!((v.criterion_value - 2.978_878).abs() < 1e-5 && !v.non_gaussian);
    }

    #[test]
    fn criterion_sigma_with_upper_limit() {
        // g2 = 0.00334(4), g3 = 0 with one-sigma upper limit 1.7e-4.
        let v = criterion(&pt(0.00334, 0.0).with_sigmas(4e-5, 1.7e-4));
        let sigma = (2.0 - v.criterion_value) / v.sigma_distance.unwrap();
        assert!((sigma - 0.013).abs() < 5e-4, "sigma = {sigma}");
        assert!(v.sigma_distance.unwrap() > 100.0);
    }

    #[test]
    fn criterion_sigma_regular_propagation() {
        let (g2, g3, s2, s3) = (0.1, 0.2, 0.01, 0.02);
        let v = criterion(&pt(g2, g3).with_sigmas(s2, s3));
        let h = 1e-7;
        let f = |a: f64, b: f64| b.sqrt() + 3.0 * a.sqrt();
        let d2 = (f(g2 + h, g3) - f(g2 - h, g3)) / (2.0 * h);
        let d3 = (f(g2, g3 + h) - f(g2, g3 - h)) / (2.0 * h);
        let sigma = ((d2 * s2).powi(2) + (d3 * s3).powi(2)).sqrt();
        let expect = (2.0 - f(g2, g3)) / sigma;
        assert!((v.sigma_distance.unwrap() - expect).abs() < 1e-6 * expect.abs());
    }

    #[test]
    fn pure_state_polynomial_examples() {
        let r: f64 = 0.5;
        let (s, c) = (r.sinh(), r.cosh());
        let v = pure_state_polynomial(0.0, r).unwrap();
        assert!((v - (9.0 * c * c * s.powi(6) + 2.0 * s.powi(8))).abs() < 1e-15);
        assert!(pure_state_polynomial(1.0, 1.0).unwrap() > 0.0);
        assert!(pure_state_polynomial(0.2, 0.01).unwrap() > 0.0);
        assert!(pure_state_polynomial(1.0, 0.0).is_err());
    }

    /// The polynomial as the squared pure-state inequality in moment form.
    fn squared_inequality(alpha: f64, r: f64) -> f64 {
        let m = moments(&GaussianParams::canonical(alpha, r, 0.0).unwrap());
        let (g1, g2, g3) = (m.g1, m.g2u, m.g3u);
        let rhs = 9.0 * g2 * g1 + 4.0 * g1.powi(3) - g3;
        (144.0 * g2 * g1.powi(4) - rhs * rhs) / (16.0 * r.sinh().powi(4))
    }

    #[test]
    fn pure_state_polynomial_matches_moment_form() {
        for (a, r) in [(0.3, 0.2), (1.0, 1.0), (2.0, 0.5), (0.1, 1.5), (0.0, 0.7)] {
            let p = pure_state_polynomial(a, r).unwrap();
            let q = squared_inequality(a, r);
            assert!((p - q).abs() <= 1e-9 * p.abs(), "a={a} r={r}: {p} vs {q}");
        }
    }

    #[test]
    fn tangent_examples() {
        let t = tangent_at(1.0f64 / 9.0).unwrap();
        assert!((t.chi2 - 9.0).abs() < 1e-12 && (t.chi1 - 2.0).abs() < 1e-12);
        let t = tangent_at(4.0f64 / 9.0).unwrap();
        assert!(t.chi2.abs() < 1e-12 && t.chi1.abs() < 1e-12);
        let t = tangent_at(1.0f64 / 36.0).unwrap();
        assert!((t.slope() + 27.0).abs() < 1e-12);
        assert!((t.chi1 - 3.0).abs() < 1e-12);
        assert!(tangent_at(0.0).is_err() && tangent_at(0.5).is_err());
    }

    /// Minimum of `lower − line` over a fine grid on [0, 4/9] and its location.
    fn min_gap(chi1: f64, chi2: f64) -> (f64, f64) {
        let n = 400_000;
        (0..=n)
            .map(|i| {
                let g = CERTIFIED_G2_LIMIT * i as f64 / n as f64;
                (lower_boundary_g3(g).unwrap() - (chi1 - chi2 * g), g)
            })
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
    }

    #[test]
    fn tangent_lines_touch_the_curve() {
        for g0 in [0.01, 1.0 / 36.0, 0.1, 0.2, 0.3, 0.4] {
            let t = tangent_at(g0).unwrap();
            let (gap, at) = min_gap(t.chi1, t.chi2);
            assert!(gap.abs() < 1e-9 && gap > -1e-12, "g0={g0} gap={gap}");
            assert!((at - g0).abs() < 1e-5, "g0={g0} argmin={at}");
        }
    }

    #[test]
    fn linear_bound_examples() {
        assert!(linear_bounds_check(&pt(0.00334, 0.0)).iter().all(|(_, s)| *s));
        assert!(linear_bounds_check(&pt(1.0, 1.0)).iter().all(|(_, s)| !*s));
        let r = linear_bounds_check(&pt(0.1, 0.5));
        assert_eq!(
            r,
            vec![("g3+g2<2/5", false), ("g3+3g2<1", true), ("g3+9g2<2", true), ("g3+28g2<3", false)]
        );
    }

    #[test]
    fn linear_bounds_never_cut_into_gaussian_region() {
        for b in LINEAR_BOUNDS {
            let (gap, _) = min_gap(b.chi1, b.chi2);
            assert!(gap >= -1e-12, "{} crosses the boundary: {gap}", b.id);
        }
    }

    #[test]
    fn joint_cumulant_examples() {
        assert_eq!(joint_cumulant_g3(&pt(1.0, 1.0)), 0.0);
        assert!((joint_cumulant_g3(&pt(0.00334, 0.0)) - 1.98998).abs() < 1e-12);
        assert!((joint_cumulant_g3(&pt(0.9, 0.3)) + 0.4).abs() < 1e-12);
    }

    /// Bisection to machine precision, independent of the closed form.
    fn bisect_root(n: f64) -> f64 {
        let f = |x: f64| 1.0 + x.powi(4) - (4.0 * n + 2.0) * x;
        let (mut lo, mut hi) = (1.0, 2.0 + n.max(1.0));
        while hi - lo > 1e-15 * hi {
            let m = 0.5 * (lo + hi);
            if f(m) <= 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quartic_examples() {
        assert!((quartic_x(0.0f64).unwrap() - 1.0).abs() < 1e-12);
        let x1 = quartic_x(1.0f64).unwrap();
        assert!((x1 - 1.757_772_018_247_256).abs() < 1e-12, "{x1}");
        assert!((x1 - bisect_root(1.0)).abs() < 1e-12);
        assert!((quartic_x(10.0).unwrap() - bisect_root(10.0)).abs() < 1e-10);
        assert!(quartic_x(-1.0).is_err());
    }

    #[test]
    fn quartic_fallback_agrees_with_closed_form() {
        for n in [0.0f64, 0.3, 1.0, 7.0, 100.0] {
            let a = quartic_bracketed(n);
            let b = quartic_closed_form(n);
            assert!((a - b).abs() < 1e-12 * b, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn quartic_residual_on_grid() {
        for i in 0..=1000 {
            let n = 0.1 * i as f64;
            let x = quartic_x(n).unwrap();
            assert!(x >= 1.0);
            assert!(quartic_residual(x, n).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn g2u_min_examples() {
        assert!(g2u_min_gaussian(0.0f64).unwrap().abs() < 1e-15);
        let g = g2_min(1.0f64).unwrap();
        assert!(g > 0.0 && g < 1.0);
        assert!((g - 0.699_117_109_897_136_6).abs() < 1e-12);
        let mut prev = 0.0;
        for n in [1.0, 10.0, 100.0, 1000.0, 1e4] {
            let g = g2_min(n).unwrap();
            assert!(g < 1.0 && g > prev);
            prev = g;
        }
        assert!(1.0 - prev < 1e-3);
    }

    #[test]
    fn g2u_min_matches_dense_minimization() {
        // At fixed G1 = n the family is α² = n − sinh²r, θ = 0.
        for n in [0.05f64, 0.5, 1.0, 3.0, 10.0] {
            let rmax = n.sqrt().asinh();
            let best = (0..=200_000)
                .map(|i| {
                    let r = rmax * i as f64 / 200_000.0;
                    let a2 = (n - r.sinh().powi(2)).max(0.0);
                    moments(&GaussianParams::canonical(a2.sqrt(), r, 0.0).unwrap()).g2u
                })
                .fold(f64::INFINITY, f64::min);
            let closed = g2u_min_gaussian(n).unwrap();
            assert!(closed <= best + 1e-12 * best.max(1.0));
            assert!((best - closed) < 1e-8 * best.max(1.0), "n={n}: {closed} vs {best}");
        }
    }

    #[test]
    fn mean_photon_criterion_examples() {
        assert!(mean_photon_criterion(1.0, 0.0).unwrap());
        assert!(!mean_photon_criterion(1.0, 1.0).unwrap());
        for k in 2..=50 {
            let n = k as f64;
            assert!(mean_photon_criterion(n, (n - 1.0) / n).unwrap(), "Fock |{k}>");
        }
        assert!(mean_photon_criterion(0.0, 0.5).is_err());
    }

    #[test]
    fn g2u_min_is_convex() {
        let h = 0.01;
        for i in 1..2000 {
            let n = h * i as f64;
            let d2 = g2u_min_gaussian(n + h).unwrap() - 2.0 * g2u_min_gaussian(n).unwrap()
                + g2u_min_gaussian(n - h).unwrap();
            assert!(d2 >= -1e-9, "n={n}: {d2}");
        }
    }

    proptest! {
        #[test]
        fn pure_states_respect_both_boundaries(a in 0.001f64..3.0, r in 0.0f64..2.0, th in 0.0f64..6.3) {
            let c = correlations(&moments(&GaussianParams::canonical(a, r, th).unwrap())).unwrap();
            prop_assert!(c.g3 >= lower_boundary_g3(c.g2).unwrap() - 1e-12 * c.g3.max(1.0));
            prop_assert!(c.g3 <= upper_boundary_g3(c.g2).unwrap() + 1e-12 * c.g3.max(1.0));
        }

        #[test]
        fn polynomial_nonnegative(a in 0.0f64..3.0, r in 1e-4f64..3.0) {
            prop_assert!(pure_state_polynomial(a, r).unwrap() >= 0.0);
        }

        #[test]
        fn tangent_chi2_admissible(g in 1e-6f64..(4.0 / 9.0)) {
            prop_assert!(tangent_at(g).unwrap().chi2 >= -3.0);
        }
    }

    #[test]
    fn polynomial_nonnegative_on_grid() {
        for i in 0..200 {
            let a = 3.0 * i as f64 / 199.0;
            for j in 1..=200 {
                let r = 3.0 * j as f64 / 200.0;
                assert!(pure_state_polynomial(a, r).unwrap() >= 0.0, "a={a} r={r}");
            }
        }
    }
}
