//! Closed-form moments and correlation functions of displaced squeezed states
//! and of their statistical mixtures.
//!
//! A Gaussian pure state is `D(α) S(ξ) |0⟩` with `α = |α| e^{iφ}` and
//! `ξ = r e^{iθ}`. Its normally ordered moments follow from the first and
//! second order expectation values through the Wick expansion, and they depend
//! on the phases only through the relative angle `θ − 2φ`.

use num_complex::Complex;

use crate::error::{domain, invalid, Error, Result};
use crate::scalar::{wrap_angle, Scalar};

/// Parameters of a displaced squeezed state, stored in canonical form.
///
/// The displacement phase is folded into the squeezing angle on
/// construction, so `phi()` is always zero and `theta()` holds the relative
/// angle `θ − 2φ` reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams<T> {
    alpha_mag: T,
    r: T,
    theta: T,
}

impl<T: Scalar> GaussianParams<T> {
    pub fn new(alpha_mag: T, phi: T, r: T, theta: T) -> Result<Self> {
        if !(alpha_mag.is_finite() && phi.is_finite() && r.is_finite() && theta.is_finite()) {
            return Err(invalid("non-finite Gaussian parameter"));
        }
        if alpha_mag < T::zero() {
            return Err(invalid(format!("alpha_mag = {alpha_mag} < 0")));
        }
        if r < T::zero() {
            return Err(invalid(format!("r = {r} < 0")));
        }
        let two = T::lit(2.0);
        Ok(Self {
            alpha_mag,
            r,
            theta: wrap_angle(theta - two * phi),
        })
    }

    /// Canonical parameters with `φ = 0`.
    pub fn canonical(alpha_mag: T, r: T, theta: T) -> Result<Self> {
        Self::new(alpha_mag, T::zero(), r, theta)
    }

    pub fn vacuum() -> Self {
        Self {
            alpha_mag: T::zero(),
            r: T::zero(),
            theta: T::zero(),
        }
    }

    pub fn coherent(alpha_mag: T) -> Result<Self> {
        Self::canonical(alpha_mag, T::zero(), T::zero())
    }

    pub fn squeezed_vacuum(r: T, theta: T) -> Result<Self> {
        Self::canonical(T::zero(), r, theta)
    }

    pub fn alpha_mag(&self) -> T {
        self.alpha_mag
    }

    /// Always zero after canonicalization.
    pub fn phi(&self) -> T {
        T::zero()
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// Squeezing angle relative to twice the displacement phase.
    pub fn theta(&self) -> T {
        self.theta
    }

    /// Complex displacement `α` (real after canonicalization).
    pub fn alpha(&self) -> Complex<T> {
        Complex::new(self.alpha_mag, T::zero())
    }

    /// Complex squeezing parameter `ξ = r e^{iθ}`.
    pub fn xi(&self) -> Complex<T> {
        Complex::from_polar(self.r, self.theta)
    }
}

/// Un-normalized moments `G⁽ⁿ⁾ = ⟨(a†)ⁿ aⁿ⟩` for `n = 1, 2, 3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentTriple<T> {
    pub g1: T,
    pub g2u: T,
    pub g3u: T,
}

impl<T: Scalar> MomentTriple<T> {
    pub fn new(g1: T, g2u: T, g3u: T) -> Result<Self> {
        for (name, v) in [("g1", g1), ("g2u", g2u), ("g3u", g3u)] {
            if !v.is_finite() || v < T::zero() {
                return Err(invalid(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        Ok(Self { g1, g2u, g3u })
    }

    pub fn zero() -> Self {
        Self {
            g1: T::zero(),
            g2u: T::zero(),
            g3u: T::zero(),
        }
    }

    /// Component-wise `Σ wᵢ mᵢ`.
    pub fn weighted_sum<I>(parts: I) -> Self
    where
        I: IntoIterator<Item = (T, MomentTriple<T>)>,
    {
        parts.into_iter().fold(Self::zero(), |acc, (w, m)| Self {
            g1: acc.g1 + w * m.g1,
            g2u: acc.g2u + w * m.g2u,
            g3u: acc.g3u + w * m.g3u,
        })
    }

    pub fn correlations(&self) -> Result<CorrelationPoint<T>> {
        correlations(self)
    }
}

/// Normalized correlation pair `(g⁽²⁾, g⁽³⁾)` with optional 1σ errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPoint<T> {
    pub g2: T,
    pub g3: T,
    pub g2_sigma: Option<T>,
    pub g3_sigma: Option<T>,
}

impl<T: Scalar> CorrelationPoint<T> {
    pub fn new(g2: T, g3: T) -> Self {
        Self {
            g2,
            g3,
            g2_sigma: None,
            g3_sigma: None,
        }
    }

    pub fn with_sigmas(mut self, g2_sigma: T, g3_sigma: T) -> Self {
        self.g2_sigma = Some(g2_sigma);
        self.g3_sigma = Some(g3_sigma);
        self
    }
}

/// Statistical mixture `Σ pᵢ |ξᵢ, αᵢ⟩⟨ξᵢ, αᵢ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec<T> {
    components: Vec<(T, GaussianParams<T>)>,
}

impl<T: Scalar> MixtureSpec<T> {
    pub fn new(components: Vec<(T, GaussianParams<T>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        let mut total = T::zero();
        for (w, _) in &components {
            if !(*w > T::zero() && *w <= T::one()) {
                return Err(invalid(format!("mixture weight {w} outside (0, 1]")));
            }
            total += *w;
        }
        if (total - T::one()).abs() > T::abs_tol() {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn pure(p: GaussianParams<T>) -> Self {
        Self {
            components: vec![(T::one(), p)],
        }
    }

    /// Flattens `Σ qⱼ (Σ pⱼᵢ ρⱼᵢ)` into a single mixture.
    pub fn nest(parts: &[(T, MixtureSpec<T>)]) -> Result<Self> {
        let flat = parts
            .iter()
            .flat_map(|(q, mix)| mix.components.iter().map(move |(p, g)| (*q * *p, *g)))
            .collect();
        Self::new(flat)
    }

    pub fn components(&self) -> &[(T, GaussianParams<T>)] {
        &self.components
    }
}

/// First-order expectation values `⟨a⟩`, `⟨aa⟩` and `⟨a†a⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder<T> {
    pub mean_a: Complex<T>,
    pub mean_aa: Complex<T>,
    pub mean_n: T,
}

pub fn first_order_expectations<T: Scalar>(p: &GaussianParams<T>) -> FirstOrder<T> {
    let alpha = p.alpha();
    let (s, c) = (p.r.sinh(), p.r.cosh());
    let squeeze = Complex::from_polar(c * s, p.theta);
    FirstOrder {
        mean_a: alpha,
        mean_aa: alpha * alpha - squeeze,
        mean_n: alpha.norm_sqr() + s * s,
    }
}

/// Wick-expanded moments from the first-order expectation values.
pub fn moments_from_first_order<T: Scalar>(f: &FirstOrder<T>) -> MomentTriple<T> {
    let n = f.mean_n;
    let aa2 = f.mean_aa.norm_sqr();
    let a2 = f.mean_a.norm_sqr();
    let lit = T::lit;
    let g2u = lit(2.0) * n * n + aa2 - lit(2.0) * a2 * a2;
    // ⟨aa⟩⟨a†⟩² keeps the cross term invariant under a global phase.
    let cross = (f.mean_aa * f.mean_a.conj() * f.mean_a.conj()).re;
    let g3u = lit(6.0) * n * n * n + lit(9.0) * aa2 * n + lit(16.0) * a2 * a2 * a2
        - lit(18.0) * a2 * a2 * n
        - lit(12.0) * a2 * cross;
    // Mathematically nonnegative; clamp rounding residue.
    MomentTriple {
        g1: n.max(T::zero()),
        g2u: g2u.max(T::zero()),
        g3u: g3u.max(T::zero()),
    }
}

pub fn moments<T: Scalar>(p: &GaussianParams<T>) -> MomentTriple<T> {
    moments_from_first_order(&first_order_expectations(p))
}

pub fn correlations<T: Scalar>(m: &MomentTriple<T>) -> Result<CorrelationPoint<T>> {
    if m.g1 <= T::zero() {
        return Err(Error::ZeroIntensity);
    }
    let g1sq = m.g1 * m.g1;
    Ok(CorrelationPoint::new(m.g2u / g1sq, m.g3u / (g1sq * m.g1)))
}

pub fn mixture_moments<T: Scalar>(mix: &MixtureSpec<T>) -> MomentTriple<T> {
    MomentTriple::weighted_sum(mix.components.iter().map(|(w, p)| (*w, moments(p))))
}

/// Moments of the total photon number of independent modes.
///
/// `G1 = Σ G1ᵢ`, `G2 = Σ G2ᵢ + 2 Σ_{i<j} G1ᵢG1ⱼ` and
/// `G3 = Σ G3ᵢ + 3 Σ_{i<j} (G2ᵢG1ⱼ + G1ᵢG2ⱼ) + 6 Σ_{i<j<k} G1ᵢG1ⱼG1ₖ`.
pub fn multimode_moments<T: Scalar>(per_mode: &[MomentTriple<T>]) -> Result<MomentTriple<T>> {
    if per_mode.is_empty() {
        return Err(invalid("multimode composition needs at least one mode"));
    }
    let lit = T::lit;
    let mut g1 = T::zero();
    let mut g2 = T::zero();
    let mut g3 = T::zero();
    for (i, mi) in per_mode.iter().enumerate() {
        g1 += mi.g1;
        g2 += mi.g2u;
        g3 += mi.g3u;
        for (j, mj) in per_mode.iter().enumerate().skip(i + 1) {
            g2 += lit(2.0) * mi.g1 * mj.g1;
            g3 += lit(3.0) * (mi.g2u * mj.g1 + mi.g1 * mj.g2u);
            for mk in &per_mode[j + 1..] {
                g3 += lit(6.0) * mi.g1 * mj.g1 * mk.g1;
            }
        }
    }
    Ok(MomentTriple {
        g1,
        g2u: g2,
        g3u: g3,
    })
}

/// Second-order Taylor expansion in `r` of `(g⁽²⁾, g⁽³⁾)` at `θ = 0`.
pub fn taylor_g2_g3<T: Scalar>(alpha: T, r: T) -> Result<(T, T)> {
    if !(alpha > T::zero()) {
        return Err(domain(format!("taylor expansion needs alpha > 0, got {alpha}")));
    }
    if r < T::zero() {
        return Err(domain(format!("r = {r} < 0")));
    }
    let lit = T::lit;
    let a2 = alpha * alpha;
    let a4 = a2 * a2;
    let g2 = T::one() - lit(2.0) * r / a2 + (T::one() + lit(2.0) * a2) * r * r / a4;
    let g3 = T::one() - lit(6.0) * r / a2 + lit(3.0) * (lit(3.0) + lit(2.0) * a2) * r * r / a4;
    Ok((g2, g3))
}

/// The two `α²` solving the truncated expansion of `g⁽²⁾` for given `(g⁽²⁾, r)`.
///
/// Returns `(α²₊, α²₋)`. Feeding `α²₋` back into the `g⁽³⁾` expansion and
/// letting `r → 0` traces the lower boundary.
pub fn alpha2_boundary<T: Scalar>(g2: T, r: T) -> Result<(T, T)> {
    let denom = g2 - T::one();
    if denom == T::zero() {
        return Err(domain("alpha² boundary is singular at g2 = 1"));
    }
    let disc = g2 * r * r - T::lit(2.0) * r * r * r + r * r * r * r;
    if disc < T::zero() || !disc.is_finite() {
        return Err(domain(format!("negative discriminant {disc} for g2 = {g2}, r = {r}")));
    }
    let root = disc.sqrt();
    let base = r * r - r;
    Ok(((base + root) / denom, (base - root) / denom))
}
