//! Wavefunctions represented by RBMs.
//!
//! Amplitudes are unnormalized: `|ψ(σ)|² = exp(-E_λ(σ))`, so the squared norm
//! is the amplitude RBM's partition function. Phases drop the `-ln Z_μ`
//! constant, which only contributes a global phase.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gates::{BasisAssignment, GateRegistry, RotationPlan};
use crate::rbm::{log_sum_exp, RbmParameters};
use crate::spin::{write_index_bits, HilbertSpace};

/// `ψ(σ) = sqrt(p_λ(σ))`, one RBM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveWavefunction {
    pub rbm: RbmParameters,
}

impl PositiveWavefunction {
    pub fn new(rbm: RbmParameters) -> Self {
        Self { rbm }
    }

    /// Unnormalized amplitude `exp(-E_eff(σ)/2)`.
    pub fn psi(&self, sigma: &[u8]) -> Result<f64> {
        Ok((-0.5 * self.rbm.effective_energy(sigma)?).exp())
    }
}

/// `ψ(σ) = sqrt(p_λ(σ)) · exp(i φ_μ(σ)/2)` with `φ_μ = -E_eff^μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexWavefunction {
    pub amplitude: RbmParameters,
    pub phase: RbmParameters,
}

impl ComplexWavefunction {
    pub fn new(amplitude: RbmParameters, phase: RbmParameters) -> Result<Self> {
        check_len(
            "phase RBM visible units",
            amplitude.n_visible(),
            phase.n_visible(),
        )?;
        Ok(Self { amplitude, phase })
    }

    /// Phase `φ_μ(σ)` in radians, up to a global constant.
    pub fn phase(&self, sigma: &[u8]) -> Result<f64> {
        Ok(-self.phase.effective_energy(sigma)?)
    }

    pub fn psi(&self, sigma: &[u8]) -> Result<Complex64> {
        let modulus = (-0.5 * self.amplitude.effective_energy(sigma)?).exp();
        let half_phase = 0.5 * self.phase(sigma)?;
        Ok(Complex64::new(
            modulus * half_phase.cos(),
            modulus * half_phase.sin(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Wavefunction {
    Positive(PositiveWavefunction),
    Complex(ComplexWavefunction),
}

impl From<PositiveWavefunction> for Wavefunction {
    fn from(m: PositiveWavefunction) -> Self {
        Wavefunction::Positive(m)
    }
}

impl From<ComplexWavefunction> for Wavefunction {
    fn from(m: ComplexWavefunction) -> Self {
        Wavefunction::Complex(m)
    }
}

impl Wavefunction {
    pub fn kind(&self) -> &'static str {
        match self {
            Wavefunction::Positive(_) => "positive",
            Wavefunction::Complex(_) => "complex",
        }
    }

    pub fn n_visible(&self) -> usize {
        self.amplitude().n_visible()
    }

    /// The RBM whose marginal is `|ψ|²`.
    pub fn amplitude(&self) -> &RbmParameters {
        match self {
            Wavefunction::Positive(m) => &m.rbm,
            Wavefunction::Complex(m) => &m.amplitude,
        }
    }

    pub fn amplitude_mut(&mut self) -> &mut RbmParameters {
        match self {
            Wavefunction::Positive(m) => &mut m.rbm,
            Wavefunction::Complex(m) => &mut m.amplitude,
        }
    }

    pub fn phase_rbm(&self) -> Option<&RbmParameters> {
        match self {
            Wavefunction::Positive(_) => None,
            Wavefunction::Complex(m) => Some(&m.phase),
        }
    }

    pub fn phase_rbm_mut(&mut self) -> Option<&mut RbmParameters> {
        match self {
            Wavefunction::Positive(_) => None,
            Wavefunction::Complex(m) => Some(&mut m.phase),
        }
    }

    /// `ln ψ(σ)`: real part `-E_λ/2`, imaginary part `φ_μ/2`.
    pub fn log_psi(&self, sigma: &[u8]) -> Result<Complex64> {
        check_len("configuration", self.n_visible(), sigma.len())?;
        Ok(self.log_psi_unchecked(sigma))
    }

    #[inline]
    pub(crate) fn log_psi_unchecked(&self, sigma: &[u8]) -> Complex64 {
        match self {
            Wavefunction::Positive(m) => {
                Complex64::new(-0.5 * m.rbm.effective_energy_unchecked(sigma), 0.0)
            }
            Wavefunction::Complex(m) => Complex64::new(
                -0.5 * m.amplitude.effective_energy_unchecked(sigma),
                -0.5 * m.phase.effective_energy_unchecked(sigma),
            ),
        }
    }

    /// Unnormalized amplitude.
    pub fn psi(&self, sigma: &[u8]) -> Result<Complex64> {
        Ok(self.log_psi(sigma)?.exp())
    }

    /// `ln Σ_σ |ψ(σ)|²`.
    pub fn log_norm_squared(&self) -> Result<f64> {
        self.amplitude().log_partition()
    }

    /// Normalized amplitudes over `space`, in canonical order.
    pub fn normalized_amplitudes(&self, space: &HilbertSpace) -> Result<Vec<Complex64>> {
        check_len("Hilbert space sites", self.n_visible(), space.num_sites())?;
        let logs: Vec<Complex64> = space.iter().map(|s| self.log_psi_unchecked(s)).collect();
        let half_log_norm = 0.5 * log_sum_exp(logs.iter().map(|l| 2.0 * l.re));
        Ok(logs
            .into_iter()
            .map(|l| (l - half_log_norm).exp())
            .collect())
    }

    /// Amplitude in a rotated basis, `Σ_σ U(σ_b, σ) ψ(σ)`.
    pub fn rotated_psi(
        &self,
        registry: &GateRegistry,
        basis: &BasisAssignment,
        sigma_b: &[u8],
    ) -> Result<Complex64> {
        let plan = RotationPlan::new(registry, basis)?;
        self.rotated_psi_with_plan(&plan, sigma_b)
    }

    pub fn rotated_psi_with_plan(&self, plan: &RotationPlan, sigma_b: &[u8]) -> Result<Complex64> {
        let sum = self.rotated_sum(plan, sigma_b)?;
        Ok(sum.value * sum.scale.exp())
    }

    /// Unnormalized probability of `σ_b` in the rotated basis.
    pub fn rotated_prob(
        &self,
        registry: &GateRegistry,
        basis: &BasisAssignment,
        sigma_b: &[u8],
    ) -> Result<f64> {
        Ok(self.rotated_psi(registry, basis, sigma_b)?.norm_sqr())
    }

    /// Terms of the rotated sum, scaled by `exp(-scale)` for stability.
    pub(crate) fn rotated_sum(&self, plan: &RotationPlan, sigma_b: &[u8]) -> Result<RotatedSum> {
        check_len("basis sites", self.n_visible(), plan.num_sites())?;
        check_len("configuration", self.n_visible(), sigma_b.len())?;
        let sites = plan.rotated_sites();
        let r = sites.len();
        let mut configs = Vec::with_capacity(sigma_b.len() << r);
        let mut coefs = Vec::with_capacity(1 << r);
        let mut logs = Vec::with_capacity(1 << r);
        let mut bits = vec![0u8; r];
        let mut sigma = sigma_b.to_vec();
        for assignment in 0..1usize << r {
            write_index_bits(assignment, &mut bits);
            let mut coef = Complex64::new(1.0, 0.0);
            for ((&site, gate), &bit) in sites.iter().zip(plan.gates()).zip(&bits) {
                sigma[site] = bit;
                coef *= gate[sigma_b[site] as usize][bit as usize];
            }
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            configs.extend_from_slice(&sigma);
            coefs.push(coef);
            logs.push(self.log_psi_unchecked(&sigma));
        }
        let scale = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let terms: Vec<Complex64> = coefs
            .iter()
            .zip(&logs)
            .map(|(c, l)| c * (l - scale).exp())
            .collect();
        let value = terms.iter().sum();
        Ok(RotatedSum {
            width: sigma_b.len(),
            configs,
            terms,
            value,
            scale,
        })
    }
}

/// `Σ_k terms[k] · exp(scale)` equals the rotated amplitude.
#[derive(Debug, Clone)]
pub(crate) struct RotatedSum {
    width: usize,
    configs: Vec<u8>,
    pub(crate) terms: Vec<Complex64>,
    pub(crate) value: Complex64,
    pub(crate) scale: f64,
}

impl RotatedSum {
    pub(crate) fn config(&self, k: usize) -> &[u8] {
        &self.configs[k * self.width..(k + 1) * self.width]
    }

    pub(crate) fn len(&self) -> usize {
        self.terms.len()
    }
}

/// Rejects models whose width differs from `n`.
pub(crate) fn check_model_width(model: &Wavefunction, n: usize) -> Result<()> {
    if model.n_visible() != n {
        return Err(Error::dims("model visible units", n, model.n_visible()));
    }
    Ok(())
}
