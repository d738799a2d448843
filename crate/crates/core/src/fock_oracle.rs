//! Brute-force moments in a truncated Fock space.
//!
//! States are built amplitude by amplitude from a three-term recurrence and
//! moments are read off the photon-number distribution. Nothing here uses
//! the Wick expansion, which makes it an independent check of
//! [`crate::gaussian_model`].

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::gaussian_model::{GaussianParams, MomentTriple};
use crate::scalar::Scalar;

/// Default truncation budget for the norm deficit and the last amplitude.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// State vector in the number basis `|0⟩ … |N−1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> FockVector<T> {
    /// Wraps amplitudes without any normalization check.
    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(invalid("Fock vector needs dim >= 2"));
        }
        Ok(Self { amplitudes })
    }

    pub fn number_state(n: usize, dim: usize) -> Result<Self> {
        if dim < 2 || n >= dim {
            return Err(invalid(format!("number state |{n}> does not fit in dim {dim}")));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); dim];
        amplitudes[n] = Complex::new(T::one(), T::zero());
        Ok(Self { amplitudes })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::number_state(0, dim)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }
}

/// Incoherent mixture of pure Fock vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMixture<T> {
    terms: Vec<(T, FockVector<T>)>,
}

impl<T: Scalar> DensityMixture<T> {
    pub fn new(terms: Vec<(T, FockVector<T>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("density mixture needs at least one term"));
        }
        let total = terms.iter().fold(T::zero(), |acc, (w, _)| acc + *w);
        if terms.iter().any(|(w, _)| *w < T::zero()) || (total - T::one()).abs() > T::abs_tol() {
            return Err(invalid(format!("mixture weights must be >= 0 and sum to 1, got {total}")));
        }
        Ok(Self { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms.iter().map(|(_, v)| v.dim()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> &[(T, FockVector<T>)] {
        &self.terms
    }
}

/// Anything with a photon-number distribution.
pub trait PhotonStatistics<T> {
    fn photon_distribution(&self) -> Vec<T>;
}

impl<T: Scalar> PhotonStatistics<T> for FockVector<T> {
    fn photon_distribution(&self) -> Vec<T> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

impl<T: Scalar> PhotonStatistics<T> for DensityMixture<T> {
    fn photon_distribution(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (w, v) in &self.terms {
            for (o, c) in out.iter_mut().zip(v.amplitudes()) {
                *o += *w * c.norm_sqr();
            }
        }
        out
    }
}

/// Truncation dimension that keeps the third factorial moment's tail far
/// below double-precision resolution for the given parameters.
pub fn auto_dim<T: Scalar>(p: &GaussianParams<T>) -> usize {
    let a = p.alpha_mag().to_f64_lossy();
    let r = p.r().to_f64_lossy();
    let mean = a * a + r.sinh().powi(2);
    let mut dim = (8.0 * mean + 30.0).ceil() + (10.0 * a * r.exp()).ceil();
    let t = r.tanh();
    if t > 0.0 {
        // P(n) decays like tanh(r)^n; ask for tanh^N · N³ / (1 − tanh) < 1e-16.
        let mut n_sq: f64 = 64.0;
        for _ in 0..8 {
            n_sq = (37.0 + 3.0 * n_sq.ln() - (1.0 - t).ln()) / -t.ln();
        }
        dim += n_sq.ceil();
    }
    dim as usize
}

/// Builds `D(α) S(ξ)|0⟩` in dimension `dim` with the default tail budget.
pub fn build_displaced_squeezed<T: Scalar>(p: &GaussianParams<T>, dim: usize) -> Result<FockVector<T>> {
    build_with_budget(p, dim, T::lit(DEFAULT_TAIL_TOL.max(T::ABS_TOL)))
}

/// Builds `D(α) S(ξ)|0⟩` at [`auto_dim`].
pub fn build_auto<T: Scalar>(p: &GaussianParams<T>) -> Result<FockVector<T>> {
    build_displaced_squeezed(p, auto_dim(p))
}

/// Builds `D(α) S(ξ)|0⟩` from the eigenvalue equation
/// `(a cosh r + a† e^{iθ} sinh r)|ψ⟩ = γ|ψ⟩`, `γ = α cosh r + α* e^{iθ} sinh r`,
/// whose number-basis form is the recurrence
/// `√(n+1) cosh r · c_{n+1} = γ c_n − e^{iθ} sinh r √n · c_{n−1}`
/// seeded by `c₀ = exp(−|α|²/2 − α*² e^{iθ} tanh r / 2) / √cosh r`.
pub fn build_with_budget<T: Scalar>(p: &GaussianParams<T>, dim: usize, tail_tol: T) -> Result<FockVector<T>> {
    if dim < 2 {
        return Err(invalid(format!("dim = {dim} < 2")));
    }
    let half = T::lit(0.5);
    let alpha = p.alpha();
    let (s, c) = (p.r().sinh(), p.r().cosh());
    let phase = Complex::from_polar(T::one(), p.theta());
    let gamma = alpha * c + alpha.conj() * phase * s;
    let c0 = (Complex::from(-(alpha.norm_sqr() * half)) - alpha.conj() * alpha.conj() * phase * (p.r().tanh() * half)).exp()
        / c.sqrt();

    let mut amps = Vec::with_capacity(dim);
    amps.push(c0);
    for n in 0..dim - 1 {
        let nf = T::from_usize(n).expect("usize fits scalar");
        let prev = if n == 0 { Complex::new(T::zero(), T::zero()) } else { amps[n - 1] };
        let next = (amps[n] * gamma - prev * phase * (s * nf.sqrt())) / (c * (nf + T::one()).sqrt());
        amps.push(next);
    }
    let v = FockVector { amplitudes: amps };
    let deficit = T::one() - v.norm_sqr();
    let last = v.amplitudes[dim - 1].norm_sqr();
    let tail = deficit.max(last);
    if !(tail < tail_tol) || !tail.is_finite() {
        return Err(Error::Truncation {
            dim,
            tail: tail.to_f64_lossy(),
            budget: tail_tol.to_f64_lossy(),
        });
    }
    Ok(v)
}

/// Falling-factorial moments of a photon-number distribution.
pub fn factorial_moments<T: Scalar>(dist: &[T]) -> MomentTriple<T> {
    let mut m = MomentTriple::zero();
    for (n, &p) in dist.iter().enumerate() {
        let nf = T::from_usize(n).expect("usize fits scalar");
        let f1 = nf * p;
        let f2 = f1 * (nf - T::one());
        let f3 = f2 * (nf - T::lit(2.0));
        m.g1 += f1;
        m.g2u += f2;
        m.g3u += f3;
    }
    m
}

/// `G⁽ⁿ⁾ = Σₖ k(k−1)…(k−n+1) |cₖ|²` for a pure or mixed state.
pub fn oracle_moments<T: Scalar, S: PhotonStatistics<T> + ?Sized>(state: &S) -> MomentTriple<T> {
    factorial_moments(&state.photon_distribution())
}

/// Discrete convolution of two photon-number distributions.
pub fn convolve<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Moments of `n_tot = Σ a†ᵢaᵢ` for a product state of independent modes.
pub fn oracle_multimode_moments<T: Scalar, S: PhotonStatistics<T>>(states: &[S]) -> Result<MomentTriple<T>> {
    let mut iter = states.iter();
    let first = iter
        .next()
        .ok_or_else(|| invalid("multimode oracle needs at least one mode"))?
        .photon_distribution();
    let total = iter.fold(first, |acc, s| convolve(&acc, &s.photon_distribution()));
    Ok(factorial_moments(&total))
}
