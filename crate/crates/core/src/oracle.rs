//! Ground truth for validation: exact diagonalization of the open Ising chain
//! in a transverse field, Born-rule sampling, random states, rotated
//! measurement synthesis and exact observables.
//!
//! Inside the Hamiltonian the stored bit `σ` maps to the spin `s = 2σ − 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gates::{BasisAssignment, GateRegistry, RotationPlan};
use crate::metrics::TargetState;
use crate::observables::Region;
use crate::spin::SampleBatch;
use crate::training::TrainingDataset;

/// Largest chain handled by the dense eigensolver.
pub const MAX_DENSE_SITES: usize = 14;

/// Open transverse-field Ising chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfimSpec {
    pub num_sites: usize,
    pub coupling: f64,
    pub field: f64,
}

impl TfimSpec {
    pub fn new(num_sites: usize, coupling: f64, field: f64) -> Result<Self> {
        if num_sites < 2 {
            return Err(Error::invalid("the Ising chain needs at least two sites"));
        }
        if !(coupling.is_finite() && field.is_finite()) {
            return Err(Error::invalid("coupling and field must be finite"));
        }
        Ok(Self {
            num_sites,
            coupling,
            field,
        })
    }

    fn diagonal(&self, index: usize) -> f64 {
        let n = self.num_sites;
        let bonds: f64 = (0..n - 1)
            .map(|i| {
                let a = (index >> (n - 1 - i)) & 1;
                let b = (index >> (n - 2 - i)) & 1;
                if a == b {
                    1.0
                } else {
                    -1.0
                }
            })
            .sum();
        -self.coupling * bonds
    }

    /// `H|Ψ⟩` without forming the matrix.
    pub fn apply(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.num_sites;
        check_len("state vector", 1usize << n, psi.len())?;
        Ok((0..psi.len())
            .map(|i| {
                let mut acc = psi[i] * self.diagonal(i);
                for j in 0..n {
                    acc -= psi[i ^ (1 << (n - 1 - j))] * self.field;
                }
                acc
            })
            .collect())
    }
}

/// Dense real-symmetric Hamiltonian in canonical order.
pub fn tfim_hamiltonian(spec: &TfimSpec) -> Result<DMatrix<f64>> {
    let n = spec.num_sites;
    if n > MAX_DENSE_SITES {
        return Err(Error::Intractable {
            n,
            limit: MAX_DENSE_SITES,
        });
    }
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = spec.diagonal(i);
        for j in 0..n {
            h[(i, i ^ (1 << (n - 1 - j)))] -= spec.field;
        }
    }
    Ok(h)
}

/// Lowest eigenpair, with the largest-magnitude amplitude made positive.
///
/// Without a transverse field the Hamiltonian is diagonal and its ground
/// space can be degenerate; the first minimizing configuration in canonical
/// order is returned.
pub fn tfim_ground_state(spec: &TfimSpec) -> Result<(f64, TargetState)> {
    if spec.field == 0.0 && spec.num_sites <= MAX_DENSE_SITES {
        let dim = 1usize << spec.num_sites;
        let (k, energy) = (0..dim)
            .map(|i| (i, spec.diagonal(i)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("non-empty spectrum");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        return Ok((energy, TargetState::new(spec.num_sites, amps)?));
    }
    let h = tfim_hamiltonian(spec)?;
    let eig = SymmetricEigen::new(h);
    let (k, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .expect("non-empty eigenvector");
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = pivot.signum() / norm;
    v.iter_mut().for_each(|x| *x *= sign);
    let (state, _) = TargetState::normalize(
        spec.num_sites,
        v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
    )?;
    Ok((energy, state))
}

fn born_sample_probs<R: Rng + ?Sized>(
    probs: &[f64],
    num_sites: usize,
    n_samples: usize,
    rng: &mut R,
) -> SampleBatch {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    let mut out = SampleBatch::with_capacity(num_sites, n_samples);
    let mut row = vec![0u8; num_sites];
    for _ in 0..n_samples {
        let u = rng.random::<f64>() * acc;
        let index = cdf.partition_point(|&c| c <= u).min(last);
        crate::spin::write_index_bits(index, &mut row);
        out.push_unchecked(&row);
    }
    out
}

/// Independent draws from `|Ψ(σ)|²` by inverse CDF.
pub fn born_sample<R: Rng + ?Sized>(
    state: &TargetState,
    n_samples: usize,
    rng: &mut R,
) -> Result<SampleBatch> {
    let probs = state.probabilities();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Unnormalized(total));
    }
    Ok(born_sample_probs(&probs, state.num_sites(), n_samples, rng))
}

/// Amplitudes `Φ e^{iθ}` with `Φ ~ U(0,1)` then normalized and `θ ~ U(0, 2π)`.
pub fn random_complex_state<R: Rng + ?Sized>(
    num_qubits: usize,
    rng: &mut R,
) -> Result<TargetState> {
    if num_qubits == 0 || num_qubits > MAX_DENSE_SITES {
        return Err(Error::invalid(format!(
            "random states support 1..={MAX_DENSE_SITES} qubits, got {num_qubits}"
        )));
    }
    let amps: Vec<Complex64> = (0..1usize << num_qubits)
        .map(|_| {
            let modulus: f64 = rng.random();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(modulus, theta)
        })
        .collect();
    Ok(TargetState::normalize(num_qubits, amps)?.0)
}

/// `samples_per_basis` shots of the rotated state in every basis, in the
/// order the bases are given.
pub fn rotated_measurement_dataset<R: Rng + ?Sized>(
    state: &TargetState,
    registry: &GateRegistry,
    bases: &[BasisAssignment],
    samples_per_basis: usize,
    rng: &mut R,
) -> Result<TrainingDataset> {
    let n = state.num_sites();
    let mut samples = SampleBatch::with_capacity(n, bases.len() * samples_per_basis);
    let mut labels = Vec::with_capacity(bases.len() * samples_per_basis);
    for basis in bases {
        check_len("basis sites", n, basis.len())?;
        let plan = RotationPlan::new(registry, basis)?;
        let probs: Vec<f64> = plan
            .apply_dense(state.amplitudes())?
            .iter()
            .map(Complex64::norm_sqr)
            .collect();
        let shots = born_sample_probs(&probs, n, samples_per_basis, rng);
        for row in shots.iter() {
            samples.push_unchecked(row);
            labels.push(basis.clone());
        }
    }
    TrainingDataset::new(samples, Some(labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactObservable {
    /// `(1/N) Σ_j ⟨σ^z_j⟩`.
    SigmaZ,
    /// `⟨|(1/N) Σ_j σ^z_j|⟩`.
    AbsSigmaZ,
    /// `(1/N) Σ_j ⟨σ^x_j⟩`.
    SigmaX,
    Energy(TfimSpec),
}

/// Exact expectation value in a normalized state.
pub fn exact_observable(state: &TargetState, kind: ExactObservable) -> Result<f64> {
    let n = state.num_sites();
    let amps = state.amplitudes();
    let magnetization = |i: usize| (2.0 * i.count_ones() as f64 - n as f64) / n as f64;
    Ok(match kind {
        ExactObservable::SigmaZ => amps
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * magnetization(i))
            .sum(),
        ExactObservable::AbsSigmaZ => amps
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * magnetization(i).abs())
            .sum(),
        ExactObservable::SigmaX => {
            let mut total = 0.0;
            for j in 0..n {
                let mask = 1usize << (n - 1 - j);
                total += amps
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.conj() * amps[i ^ mask]).re)
                    .sum::<f64>();
            }
            total / n as f64
        }
        ExactObservable::Energy(spec) => {
            check_len("chain length", n, spec.num_sites)?;
            let h_psi = spec.apply(amps)?;
            amps.iter()
                .zip(&h_psi)
                .map(|(a, b)| (a.conj() * b).re)
                .sum()
        }
    })
}

/// `Tr ρ_A²` from the reduced density matrix of a pure state.
pub fn exact_swap_expectation(state: &TargetState, region: &Region) -> Result<f64> {
    let n = state.num_sites();
    if region.sites().last().is_some_and(|&i| i >= n) {
        return Err(Error::InvalidRegion(
            "region exceeds the number of sites".into(),
        ));
    }
    if region.len() > MAX_DENSE_SITES {
        return Err(Error::Intractable {
            n: region.len(),
            limit: MAX_DENSE_SITES,
        });
    }
    let rest = region.complement(n);
    let (da, db) = (1usize << region.len(), 1usize << rest.len());
    let mut m = vec![Complex64::new(0.0, 0.0); da * db];
    let bit = |i: usize, site: usize| (i >> (n - 1 - site)) & 1;
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let a = region
            .sites()
            .iter()
            .fold(0, |acc, &s| (acc << 1) | bit(i, s));
        let b = rest
            .sites()
            .iter()
            .fold(0, |acc, &s| (acc << 1) | bit(i, s));
        m[a * db + b] = *amp;
    }
    let mut purity = 0.0;
    for a in 0..da {
        for a2 in 0..da {
            let rho: Complex64 = (0..db).map(|b| m[a * db + b] * m[a2 * db + b].conj()).sum();
            purity += rho.norm_sqr();
        }
    }
    Ok(purity)
}

/// `S₂ = −ln Tr ρ_A²`.
pub fn exact_renyi_s2(state: &TargetState, region: &Region) -> Result<f64> {
    Ok(-exact_swap_expectation(state, region)?.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::default_gate_registry;
    use crate::rng::seeded;

    #[test]
    fn two_site_ground_energy() {
        let (e, _) = tfim_ground_state(&TfimSpec::new(2, 1.0, 1.0).unwrap()).unwrap();
        assert!((e + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn classical_limit() {
        let spec = TfimSpec::new(5, 1.0, 0.0).unwrap();
        let (e, state) = tfim_ground_state(&spec).unwrap();
        assert!((e + 4.0).abs() < 1e-12);
        let p = state.probabilities();
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn hamiltonian_is_symmetric_and_matches_apply() {
        let spec = TfimSpec::new(4, 0.7, 1.3).unwrap();
        let h = tfim_hamiltonian(&spec).unwrap();
        assert_eq!(h, h.transpose());
        let v: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 0.5)).collect();
        let hv = spec.apply(&v).unwrap();
        for i in 0..16 {
            let dense: Complex64 = (0..16).map(|j| v[j] * h[(i, j)]).sum();
            assert!((dense - hv[i]).norm() < 1e-12);
        }
        assert!(TfimSpec::new(1, 1.0, 1.0).is_err());
        assert!(tfim_hamiltonian(&TfimSpec::new(15, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn born_sample_of_basis_state() {
        let state = TargetState::from_real(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = born_sample(&state, 100, &mut seeded(1)).unwrap();
        assert!(s.iter().all(|r| r == [0, 0]));
    }

    #[test]
    fn born_sample_of_uniform_state() {
        let state = TargetState::from_real(2, &[0.5; 4]).unwrap();
        let s = born_sample(&state, 100_000, &mut seeded(2)).unwrap();
        let mut counts = [0usize; 4];
        for r in s.iter() {
            counts[crate::spin::config_index(r)] += 1;
        }
        for c in counts {
            let f = c as f64 / 1e5;
            assert!((0.24..=0.26).contains(&f), "{f}");
        }
    }

    #[test]
    fn random_state_is_normalized_and_reproducible() {
        let a = random_complex_state(3, &mut seeded(3)).unwrap();
        let b = random_complex_state(3, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.probabilities().iter().sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_measurement_of_zero_state() {
        let state = TargetState::from_real(1, &[1.0, 0.0]).unwrap();
        let bases = vec!["X".parse().unwrap()];
        let d = rotated_measurement_dataset(
            &state,
            &default_gate_registry(),
            &bases,
            10_000,
            &mut seeded(4),
        )
        .unwrap();
        let ones = d.samples().iter().filter(|r| r[0] == 1).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() < 0.01);
        assert_eq!(d.bases().unwrap().len(), 10_000);
    }

    #[test]
    fn exact_observables_two_sites() {
        let spec = TfimSpec::new(2, 1.0, 1.0).unwrap();
        let (e, state) = tfim_ground_state(&spec).unwrap();
        let sx = exact_observable(&state, ExactObservable::SigmaX).unwrap();
        assert!((sx - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!(
            exact_observable(&state, ExactObservable::SigmaZ)
                .unwrap()
                .abs()
                < 1e-10
        );
        let energy = exact_observable(&state, ExactObservable::Energy(spec)).unwrap();
        assert!(((energy - e) / e).abs() < 1e-12);
        let s2 = exact_renyi_s2(&state, &Region::new(vec![0], 2).unwrap()).unwrap();
        assert!((s2 + 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn renyi_of_simple_states() {
        let product = TargetState::from_real(3, &[0.0, 0.0, 0.6, 0.8, 0.0, 0.0, 0.0, 0.0]).unwrap();
        for sites in [vec![0], vec![1], vec![0, 2]] {
            let r = Region::new(sites, 3).unwrap();
            assert!(exact_renyi_s2(&product, &r).unwrap().abs() < 1e-12);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = TargetState::from_real(2, &[h, 0.0, 0.0, h]).unwrap();
        let s2 = exact_renyi_s2(&bell, &Region::new(vec![0], 2).unwrap()).unwrap();
        assert!((s2 - 2f64.ln()).abs() < 1e-12);
    }
}
