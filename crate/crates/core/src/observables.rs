//! Monte Carlo estimators over samples drawn from a model.
//!
//! Off-diagonal observables use local estimators built from amplitude
//! ratios, so normalization never enters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spin::SampleBatch;
use crate::state::Wavefunction;

/// Mean, unbiased variance and standard error of per-sample values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub num_samples: usize,
}

pub fn statistics(values: &[f64]) -> Result<ObservableEstimate> {
    if values.is_empty() {
        return Err(Error::invalid("cannot take statistics of an empty list"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(ObservableEstimate {
        mean,
        variance,
        std_error: (variance / n as f64).sqrt(),
        num_samples: n,
    })
}

fn nonempty(samples: &SampleBatch) -> Result<()> {
    if samples.is_empty() {
        Err(Error::invalid("empty sample batch"))
    } else {
        Ok(())
    }
}

fn magnetization(sample: &[u8]) -> f64 {
    let up = sample.iter().filter(|&&s| s != 0).count() as f64;
    (2.0 * up - sample.len() as f64) / sample.len() as f64
}

/// Per-sample `(1/N) Σ_j (2σ_j − 1)`.
pub fn sigma_z_magnetization(samples: &SampleBatch) -> Result<ObservableEstimate> {
    nonempty(samples)?;
    let values: Vec<f64> = samples.iter().map(magnetization).collect();
    statistics(&values)
}

/// Per-sample `|(1/N) Σ_j (2σ_j − 1)|`.
pub fn abs_sigma_z_magnetization(samples: &SampleBatch) -> Result<ObservableEstimate> {
    nonempty(samples)?;
    let values: Vec<f64> = samples.iter().map(|s| magnetization(s).abs()).collect();
    statistics(&values)
}

/// `ψ(σ with site j flipped) / ψ(σ)`.
pub fn local_estimator_sigma_x(model: &Wavefunction, sigma: &[u8], j: usize) -> Result<Complex64> {
    check_len("configuration", model.n_visible(), sigma.len())?;
    if j >= sigma.len() {
        return Err(Error::invalid(format!(
            "site {j} out of range for {} sites",
            sigma.len()
        )));
    }
    let mut flipped = sigma.to_vec();
    Ok(flip_ratio(
        model,
        &mut flipped,
        model.log_psi_unchecked(sigma),
        j,
    ))
}

#[inline]
fn flip_ratio(model: &Wavefunction, sigma: &mut [u8], log_psi: Complex64, j: usize) -> Complex64 {
    sigma[j] ^= 1;
    let r = (model.log_psi_unchecked(sigma) - log_psi).exp();
    sigma[j] ^= 1;
    r
}

fn sigma_x_sum(model: &Wavefunction, sigma: &[u8]) -> f64 {
    let log_psi = model.log_psi_unchecked(sigma);
    let mut buf = sigma.to_vec();
    (0..sigma.len())
        .map(|j| flip_ratio(model, &mut buf, log_psi, j).re)
        .sum()
}

fn check_batch(model: &Wavefunction, samples: &SampleBatch) -> Result<()> {
    nonempty(samples)?;
    check_len("sample width", model.n_visible(), samples.width())
}

/// Per-sample `(1/N) Σ_j Re[ψ(σ^{(j)})/ψ(σ)]`.
pub fn sigma_x_magnetization(
    model: &Wavefunction,
    samples: &SampleBatch,
) -> Result<ObservableEstimate> {
    check_batch(model, samples)?;
    let n = samples.width() as f64;
    let values: Vec<f64> = samples.iter().map(|s| sigma_x_sum(model, s) / n).collect();
    statistics(&values)
}

fn ising_bond_energy(sigma: &[u8]) -> f64 {
    sigma
        .windows(2)
        .map(|w| if w[0] == w[1] { 1.0 } else { -1.0 })
        .sum()
}

/// Local energy of the open-chain transverse-field Ising Hamiltonian
/// `−J Σ σ^z_i σ^z_{i+1} − h Σ σ^x_j`.
pub fn tfim_local_energy(
    model: &Wavefunction,
    sigma: &[u8],
    coupling: f64,
    field: f64,
) -> Result<f64> {
    check_len("configuration", model.n_visible(), sigma.len())?;
    if sigma.len() < 2 {
        return Err(Error::invalid("the Ising chain needs at least two sites"));
    }
    Ok(-coupling * ising_bond_energy(sigma) - field * sigma_x_sum(model, sigma))
}

pub fn tfim_energy(
    model: &Wavefunction,
    samples: &SampleBatch,
    coupling: f64,
    field: f64,
) -> Result<ObservableEstimate> {
    check_batch(model, samples)?;
    let values: Vec<f64> = samples
        .iter()
        .map(|s| tfim_local_energy(model, s, coupling, field))
        .collect::<Result<_>>()?;
    statistics(&values)
}

/// Sorted, duplicate-free site indices of a subsystem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region(Vec<usize>);

impl Region {
    pub fn new(mut sites: Vec<usize>, num_sites: usize) -> Result<Self> {
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidRegion(format!(
                "duplicate site index {}",
                w[0]
            )));
        }
        if let Some(&last) = sites.last() {
            if last >= num_sites {
                return Err(Error::InvalidRegion(format!(
                    "site {last} out of range for {num_sites} sites"
                )));
            }
        }
        Ok(Self(sites))
    }

    /// Parses a comma-separated index list such as `0,1,2`.
    pub fn parse(spec: &str, num_sites: usize) -> Result<Self> {
        let trimmed = spec.trim();
        if trimmed.is_empty() {
            return Self::new(Vec::new(), num_sites);
        }
        let sites = trimmed
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidRegion(format!("bad site index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites, num_sites)
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self, num_sites: usize) -> Region {
        Region((0..num_sites).filter(|i| !self.0.contains(i)).collect())
    }
}

/// Exchanges the region's sites between two configurations.
pub fn swap_regions(s1: &[u8], s2: &[u8], region: &Region) -> Result<(Vec<u8>, Vec<u8>)> {
    check_len("replica width", s1.len(), s2.len())?;
    if region.sites().last().is_some_and(|&i| i >= s1.len()) {
        return Err(Error::InvalidRegion(
            "region exceeds configuration width".into(),
        ));
    }
    let (mut a, mut b) = (s1.to_vec(), s2.to_vec());
    for &i in region.sites() {
        std::mem::swap(&mut a[i], &mut b[i]);
    }
    Ok((a, b))
}

/// Swap-operator local values over replica pairs formed by halving the batch.
///
/// Pair `i` is `(row i, row ⌊n/2⌋ + i)`; a trailing odd row is unused.
pub fn swap_local_estimator(
    model: &Wavefunction,
    samples: &SampleBatch,
    region: &Region,
) -> Result<Vec<f64>> {
    check_len("sample width", model.n_visible(), samples.width())?;
    if samples.len() < 2 {
        return Err(Error::invalid(
            "the swap estimator needs at least two samples",
        ));
    }
    let half = samples.len() / 2;
    (0..half)
        .map(|i| swap_pair_value(model, samples.row(i), samples.row(half + i), region))
        .collect()
}

/// `Re[(ψ(s1')ψ(s2'))* / (ψ(s1)ψ(s2))*]` for one replica pair.
pub fn swap_pair_value(model: &Wavefunction, s1: &[u8], s2: &[u8], region: &Region) -> Result<f64> {
    let (a, b) = swap_regions(s1, s2, region)?;
    let ket = model.log_psi(s1)? + model.log_psi(s2)?;
    let bra = model.log_psi(&a)? + model.log_psi(&b)?;
    Ok((bra - ket).conj().exp().re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenyiEstimate {
    /// Statistics of the swap local values.
    pub swap: ObservableEstimate,
    pub s2: f64,
    /// First-order propagated error, `std_error / mean`.
    pub s2_error: f64,
}

/// Second Rényi entropy `S₂ = −ln⟨Swap_A⟩`.
pub fn renyi_s2(
    model: &Wavefunction,
    samples: &SampleBatch,
    region: &Region,
) -> Result<RenyiEstimate> {
    let values = swap_local_estimator(model, samples, region)?;
    let swap = statistics(&values)?;
    if swap.mean.is_nan() || swap.mean <= 0.0 {
        return Err(Error::EstimatorCollapsed(swap.mean));
    }
    Ok(RenyiEstimate {
        swap,
        s2: -swap.mean.ln(),
        s2_error: swap.std_error / swap.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::RbmParameters;
    use crate::state::PositiveWavefunction;

    fn zero_model(n: usize) -> Wavefunction {
        PositiveWavefunction::new(RbmParameters::zeros(n, 2).unwrap()).into()
    }

    #[test]
    fn statistics_examples() {
        let s = statistics(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.std_error), (1.0, 0.0, 0.0));
        let s = statistics(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.std_error), (1.0, 2.0, 1.0));
        assert!(statistics(&[]).is_err());
    }

    #[test]
    fn magnetization_examples() {
        let ones = SampleBatch::from_flat(3, vec![1; 6]).unwrap();
        let zeros = SampleBatch::from_flat(3, vec![0; 6]).unwrap();
        assert_eq!(sigma_z_magnetization(&ones).unwrap().mean, 1.0);
        assert_eq!(sigma_z_magnetization(&zeros).unwrap().mean, -1.0);
        assert_eq!(abs_sigma_z_magnetization(&ones).unwrap().mean, 1.0);
        let alt = SampleBatch::from_flat(4, vec![0, 1, 0, 1, 1, 0, 1, 0]).unwrap();
        assert_eq!(abs_sigma_z_magnetization(&alt).unwrap().mean, 0.0);
        assert!(sigma_z_magnetization(&SampleBatch::new(3)).is_err());
    }

    #[test]
    fn sigma_x_of_zero_model_is_one() {
        let m = zero_model(4);
        let s = SampleBatch::from_flat(4, vec![1, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        let est = sigma_x_magnetization(&m, &s).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.variance, 0.0);
        assert_eq!(
            local_estimator_sigma_x(&m, &[1, 0, 0, 1], 2).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        assert!(local_estimator_sigma_x(&m, &[1, 0, 0, 1], 4).is_err());
    }

    #[test]
    fn tfim_local_energy_examples() {
        let m = zero_model(4);
        let e = tfim_local_energy(&m, &[1, 1, 1, 1], 1.0, 0.0).unwrap();
        assert_eq!(e, -3.0);
        assert!(tfim_local_energy(&zero_model(1), &[1], 1.0, 1.0).is_err());
    }

    #[test]
    fn swap_examples() {
        let r = Region::new(vec![0, 1], 4).unwrap();
        let (a, b) = swap_regions(&[0, 1, 1, 0], &[1, 0, 0, 1], &r).unwrap();
        assert_eq!(a, vec![1, 0, 1, 0]);
        assert_eq!(b, vec![0, 1, 0, 1]);
        let empty = Region::new(vec![], 4).unwrap();
        assert_eq!(
            swap_regions(&[0, 1, 1, 0], &[1, 0, 0, 1], &empty)
                .unwrap()
                .0,
            vec![0, 1, 1, 0]
        );
        let full = Region::new(vec![3, 2, 1, 0], 4).unwrap();
        let (a, b) = swap_regions(&[0, 1, 1, 0], &[1, 0, 0, 1], &full).unwrap();
        assert_eq!((a, b), (vec![1, 0, 0, 1], vec![0, 1, 1, 0]));
    }

    #[test]
    fn region_validation() {
        assert!(matches!(
            Region::parse("0,0", 4),
            Err(Error::InvalidRegion(_))
        ));
        assert!(Region::parse("0,4", 4).is_err());
        assert!(Region::parse("a", 4).is_err());
        assert_eq!(Region::parse("2, 0,1", 4).unwrap().sites(), &[0, 1, 2]);
        assert_eq!(
            Region::parse("1", 3).unwrap().complement(3).sites(),
            &[0, 2]
        );
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let m = zero_model(4);
        let s = SampleBatch::from_flat(4, vec![1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1])
            .unwrap();
        let r = Region::new(vec![0, 2], 4).unwrap();
        assert!(swap_local_estimator(&m, &s, &r)
            .unwrap()
            .iter()
            .all(|&v| v == 1.0));
        let est = renyi_s2(&m, &s, &r).unwrap();
        assert_eq!(est.s2, 0.0);
        let one = SampleBatch::from_flat(4, vec![1, 0, 0, 1]).unwrap();
        assert!(swap_local_estimator(&m, &one, &r).is_err());
    }
}
