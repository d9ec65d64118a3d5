#![allow(dead_code)]

use nqst_core::rng::{self, StreamRng};
use nqst_core::{
    BasisAssignment, Complex64, ComplexWavefunction, HilbertSpace, PositiveWavefunction,
    RbmParameters, Wavefunction,
};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    rng::seeded(seed)
}

/// Parameters drawn uniformly from `[-scale, scale]`.
pub fn uniform_rbm(n_v: usize, n_h: usize, scale: f64, rng: &mut impl Rng) -> RbmParameters {
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..scale)).collect() };
    let w = draw(n_v * n_h);
    let b = draw(n_v);
    let c = draw(n_h);
    RbmParameters::new(n_v, n_h, w, b, c).unwrap()
}

pub fn positive(params: RbmParameters) -> Wavefunction {
    PositiveWavefunction::new(params).into()
}

pub fn complex(amplitude: RbmParameters, phase: RbmParameters) -> Wavefunction {
    ComplexWavefunction::new(amplitude, phase).unwrap().into()
}

pub fn random_complex_model(
    n_v: usize,
    n_h: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Wavefunction {
    let a = uniform_rbm(n_v, n_h, scale, rng);
    let p = uniform_rbm(n_v, n_h, scale, rng);
    complex(a, p)
}

/// Bits of `index` over `n` sites, site 0 first, computed independently of the
/// crate's own helpers.
pub fn bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|j| ((index >> (n - 1 - j)) & 1) as u8).collect()
}

/// Unnormalized amplitudes in canonical order via direct psi calls.
pub fn dense_psi(model: &Wavefunction) -> Vec<Complex64> {
    let n = model.n_visible();
    (0..1usize << n)
        .map(|i| model.psi(&bits(i, n)).unwrap())
        .collect()
}

/// Normalized Born probabilities of the model by brute force over `(v, h)`.
pub fn joint_marginal(params: &RbmParameters) -> Vec<f64> {
    let (n_v, n_h) = (params.n_visible(), params.n_hidden());
    let mut p: Vec<f64> = (0..1usize << n_v)
        .map(|i| {
            let v = bits(i, n_v);
            (0..1usize << n_h)
                .map(|j| (-params.energy(&v, &bits(j, n_h)).unwrap()).exp())
                .sum()
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

pub fn normalized_probs(model: &Wavefunction) -> Vec<f64> {
    let psi = dense_psi(model);
    let z: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    psi.iter().map(|a| a.norm_sqr() / z).collect()
}

pub fn space(n: usize) -> HilbertSpace {
    HilbertSpace::new(n).unwrap()
}

pub fn basis(s: &str) -> BasisAssignment {
    s.parse().unwrap()
}

/// The five two-qubit measurement bases.
pub fn five_bases() -> Vec<BasisAssignment> {
    ["Z Z", "X Z", "Z X", "Y Z", "Z Y"]
        .iter()
        .map(|s| basis(s))
        .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson chi-square p-value of observed counts against probabilities,
/// pooling cells with expected count below 5.
pub fn chi_square_p_value(counts: &[usize], probs: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
            continue;
        }
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-300);
        cells += 1;
    }
    assert!(cells >= 2, "chi-square test needs at least two cells");
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

pub fn counts(samples: &nqst_core::SampleBatch) -> Vec<usize> {
    let mut c = vec![0usize; 1 << samples.width()];
    for row in samples.iter() {
        c[row.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)] += 1;
    }
    c
}
