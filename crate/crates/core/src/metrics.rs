//! Exact reconstruction-quality metrics for enumerable systems.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::gates::{BasisAssignment, GateRegistry, RotationPlan};
use crate::rbm::log_sum_exp;
use crate::spin::HilbertSpace;
use crate::state::{check_model_width, Wavefunction};

const NORM_TOLERANCE: f64 = 1e-10;

/// A normalized wavefunction over `2^n` configurations in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    num_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl TargetState {
    /// Requires `Σ|a|² = 1` within `1e-10`.
    pub fn new(num_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_len("target amplitudes", 1usize << num_sites, amplitudes.len())?;
        let norm: f64 = amplitudes.iter().map(Complex64::norm_sqr).sum();
        if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Unnormalized(norm));
        }
        Ok(Self {
            num_sites,
            amplitudes,
        })
    }

    /// Rescales to unit norm. Also returns the squared norm found.
    pub fn normalize(num_sites: usize, mut amplitudes: Vec<Complex64>) -> Result<(Self, f64)> {
        check_len("target amplitudes", 1usize << num_sites, amplitudes.len())?;
        let norm: f64 = amplitudes.iter().map(Complex64::norm_sqr).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Unnormalized(norm));
        }
        let s = norm.sqrt().recip();
        amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok((
            Self {
                num_sites,
                amplitudes,
            },
            norm,
        ))
    }

    pub fn from_real(num_sites: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            num_sites,
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(Complex64::norm_sqr).collect()
    }

    /// Born distribution after rotating into `basis`.
    pub fn rotated_probabilities(
        &self,
        registry: &GateRegistry,
        basis: &BasisAssignment,
    ) -> Result<Vec<f64>> {
        check_len("basis sites", self.num_sites, basis.len())?;
        let plan = RotationPlan::new(registry, basis)?;
        Ok(plan
            .apply_dense(&self.amplitudes)?
            .iter()
            .map(Complex64::norm_sqr)
            .collect())
    }
}

fn check_space(model: &Wavefunction, target: &TargetState, space: &HilbertSpace) -> Result<()> {
    check_model_width(model, target.num_sites)?;
    check_len("Hilbert space sites", target.num_sites, space.num_sites())
}

/// `|⟨Ψ|ψ⟩|²` with the model amplitude normalized.
pub fn fidelity(model: &Wavefunction, target: &TargetState, space: &HilbertSpace) -> Result<f64> {
    check_space(model, target, space)?;
    let psi = model.normalized_amplitudes(space)?;
    let overlap: Complex64 = target
        .amplitudes
        .iter()
        .zip(&psi)
        .map(|(t, m)| t.conj() * m)
        .sum();
    Ok(overlap.norm_sqr())
}

/// `Σ P log(P/q)`; zero-probability terms of `p` contribute nothing, and a
/// zero in `q` where `p > 0` yields `+∞`.
pub fn kl_between(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            if qi <= 0.0 {
                f64::INFINITY
            } else {
                pi * (pi.ln() - qi.ln())
            }
        })
        .sum()
}

/// Reference-basis KL divergence `KL(|Ψ|² ‖ |ψ|²/Z)`.
pub fn kl_divergence(
    model: &Wavefunction,
    target: &TargetState,
    space: &HilbertSpace,
) -> Result<f64> {
    check_space(model, target, space)?;
    let log_q: Vec<f64> = space
        .iter()
        .map(|s| 2.0 * model.log_psi_unchecked(s).re)
        .collect();
    let log_z = log_sum_exp(log_q.iter().copied());
    Ok(target
        .amplitudes
        .iter()
        .zip(&log_q)
        .map(|(a, lq)| (a.norm_sqr(), lq - log_z))
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, lq)| p * (p.ln() - lq))
        .sum())
}

/// Normalized model distribution in each basis.
pub fn rotated_model_distributions(
    model: &Wavefunction,
    registry: &GateRegistry,
    bases: &[BasisAssignment],
    space: &HilbertSpace,
) -> Result<Vec<Vec<f64>>> {
    check_model_width(model, space.num_sites())?;
    let psi = model.normalized_amplitudes(space)?;
    bases
        .iter()
        .map(|b| {
            check_len("basis sites", space.num_sites(), b.len())?;
            let plan = RotationPlan::new(registry, b)?;
            Ok(plan
                .apply_dense(&psi)?
                .iter()
                .map(Complex64::norm_sqr)
                .collect())
        })
        .collect()
}

/// Sum over bases of the KL divergence between the rotated target and the
/// rotated, normalized model distribution.
pub fn kl_multibasis(
    model: &Wavefunction,
    registry: &GateRegistry,
    target: &TargetState,
    bases: &[BasisAssignment],
    space: &HilbertSpace,
) -> Result<f64> {
    if bases.is_empty() {
        return Err(Error::invalid("at least one basis is required"));
    }
    check_space(model, target, space)?;
    let model_dists = rotated_model_distributions(model, registry, bases, space)?;
    let mut total = 0.0;
    for (basis, q) in bases.iter().zip(&model_dists) {
        let p = target.rotated_probabilities(registry, basis)?;
        total += kl_between(&p, q);
    }
    Ok(total)
}
