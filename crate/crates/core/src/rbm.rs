//! Restricted Boltzmann machine with binary visible and hidden layers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::spin::{HilbertSpace, SampleBatch, SpinConfiguration, DEFAULT_ENUMERATION_LIMIT};

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln Σ exp(x_i)` with max-shift stabilization.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Weights `W` (`n_h × n_v`, row-major), visible bias `b` and hidden bias `c`.
///
/// The same shape doubles as a gradient container; see [`crate::training`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RbmParametersRepr")]
pub struct RbmParameters {
    n_visible: usize,
    n_hidden: usize,
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

#[derive(Deserialize)]
struct RbmParametersRepr {
    n_visible: usize,
    n_hidden: usize,
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl TryFrom<RbmParametersRepr> for RbmParameters {
    type Error = Error;
    fn try_from(r: RbmParametersRepr) -> Result<Self> {
        Self::new(
            r.n_visible,
            r.n_hidden,
            r.weights,
            r.visible_bias,
            r.hidden_bias,
        )
    }
}

impl RbmParameters {
    pub fn new(
        n_visible: usize,
        n_hidden: usize,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::invalid(
                "an RBM needs at least one visible and one hidden unit",
            ));
        }
        check_len("weights", n_visible * n_hidden, weights.len())?;
        check_len("visible bias", n_visible, visible_bias.len())?;
        check_len("hidden bias", n_hidden, hidden_bias.len())?;
        let params = Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias,
            hidden_bias,
        };
        if !params.is_finite() {
            return Err(Error::invalid("RBM parameters must be finite"));
        }
        Ok(params)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Result<Self> {
        Self::new(
            n_visible,
            n_hidden,
            vec![0.0; n_visible * n_hidden],
            vec![0.0; n_visible],
            vec![0.0; n_hidden],
        )
    }

    /// Gaussian weights with standard deviation `1/sqrt(n_v n_h)`, zero biases.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(n_visible, n_hidden)?;
        let std = 1.0 / ((n_visible * n_hidden) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive standard deviation");
        for w in &mut params.weights {
            *w = normal.sample(rng);
        }
        Ok(params)
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn weight(&self, hidden: usize, visible: usize) -> f64 {
        self.weights[hidden * self.n_visible + visible]
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_visible == other.n_visible && self.n_hidden == other.n_hidden
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Number of scalar parameters: weights, then visible bias, then hidden bias.
    pub fn num_params(&self) -> usize {
        self.weights.len() + self.n_visible + self.n_hidden
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .copied()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .chain(self.visible_bias.iter_mut())
            .chain(self.hidden_bias.iter_mut())
    }

    pub fn param(&self, k: usize) -> f64 {
        let nw = self.weights.len();
        if k < nw {
            self.weights[k]
        } else if k < nw + self.n_visible {
            self.visible_bias[k - nw]
        } else {
            self.hidden_bias[k - nw - self.n_visible]
        }
    }

    pub fn set_param(&mut self, k: usize, value: f64) {
        let nw = self.weights.len();
        if k < nw {
            self.weights[k] = value;
        } else if k < nw + self.n_visible {
            self.visible_bias[k - nw] = value;
        } else {
            self.hidden_bias[k - nw - self.n_visible] = value;
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n_hidden, self.n_visible, other.n_hidden, other.n_visible
            )));
        }
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.iter_mut() {
            *a *= alpha;
        }
    }

    fn check_visible(&self, v: &[u8]) -> Result<()> {
        check_len("visible configuration", self.n_visible, v.len())
    }

    fn check_hidden(&self, h: &[u8]) -> Result<()> {
        check_len("hidden configuration", self.n_hidden, h.len())
    }

    /// `c_i + Σ_j W_ij v_j`, written into `out`.
    #[inline]
    pub(crate) fn hidden_activations_into(&self, v: &[u8], out: &mut [f64]) {
        for ((row, &c), slot) in self
            .weights
            .chunks_exact(self.n_visible)
            .zip(&self.hidden_bias)
            .zip(out.iter_mut())
        {
            let mut a = c;
            for (&w, &vj) in row.iter().zip(v) {
                if vj != 0 {
                    a += w;
                }
            }
            *slot = a;
        }
    }

    /// `b_j + Σ_i W_ij h_i`, written into `out`.
    #[inline]
    pub(crate) fn visible_activations_into(&self, h: &[u8], out: &mut [f64]) {
        out.copy_from_slice(&self.visible_bias);
        for (row, &hi) in self.weights.chunks_exact(self.n_visible).zip(h) {
            if hi != 0 {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += w;
                }
            }
        }
    }

    /// Joint energy `E(v, h)`.
    pub fn energy(&self, v: &[u8], h: &[u8]) -> Result<f64> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let mut e = 0.0;
        for (&b, &vj) in self.visible_bias.iter().zip(v) {
            e -= b * vj as f64;
        }
        for (i, (&c, &hi)) in self.hidden_bias.iter().zip(h).enumerate() {
            if hi == 0 {
                continue;
            }
            e -= c;
            let row = &self.weights[i * self.n_visible..(i + 1) * self.n_visible];
            for (&w, &vj) in row.iter().zip(v) {
                e -= w * vj as f64;
            }
        }
        Ok(e)
    }

    /// Energy with the hidden layer traced out.
    pub fn effective_energy(&self, v: &[u8]) -> Result<f64> {
        self.check_visible(v)?;
        Ok(self.effective_energy_unchecked(v))
    }

    #[inline]
    pub(crate) fn effective_energy_unchecked(&self, v: &[u8]) -> f64 {
        let mut e = 0.0;
        for (&b, &vj) in self.visible_bias.iter().zip(v) {
            if vj != 0 {
                e -= b;
            }
        }
        for (row, &c) in self
            .weights
            .chunks_exact(self.n_visible)
            .zip(&self.hidden_bias)
        {
            let mut a = c;
            for (&w, &vj) in row.iter().zip(v) {
                if vj != 0 {
                    a += w;
                }
            }
            e -= softplus(a);
        }
        e
    }

    /// `ln Z` by enumerating every visible configuration.
    pub fn log_partition(&self) -> Result<f64> {
        self.log_partition_with_limit(DEFAULT_ENUMERATION_LIMIT)
    }

    pub fn log_partition_with_limit(&self, limit: usize) -> Result<f64> {
        let space = HilbertSpace::with_limit(self.n_visible, limit)?;
        Ok(self.log_partition_over(&space))
    }

    pub(crate) fn log_partition_over(&self, space: &HilbertSpace) -> f64 {
        let neg: Vec<f64> = space
            .iter()
            .map(|v| -self.effective_energy_unchecked(v))
            .collect();
        log_sum_exp(neg.iter().copied())
    }

    /// `p(h_i = 1 | v)` for every hidden unit.
    pub fn conditional_hidden_probs(&self, v: &[u8]) -> Result<Vec<f64>> {
        self.check_visible(v)?;
        let mut out = vec![0.0; self.n_hidden];
        self.hidden_activations_into(v, &mut out);
        out.iter_mut().for_each(|a| *a = logistic(*a));
        Ok(out)
    }

    /// `p(v_j = 1 | h)` for every visible unit.
    pub fn conditional_visible_probs(&self, h: &[u8]) -> Result<Vec<f64>> {
        self.check_hidden(h)?;
        let mut out = vec![0.0; self.n_visible];
        self.visible_activations_into(h, &mut out);
        out.iter_mut().for_each(|a| *a = logistic(*a));
        Ok(out)
    }

    /// One sweep `v -> h ~ p(h|v) -> v' ~ p(v|h)`.
    pub fn block_gibbs_step<R: Rng + ?Sized>(
        &self,
        v: &[u8],
        rng: &mut R,
    ) -> Result<SpinConfiguration> {
        self.check_visible(v)?;
        let mut chain = GibbsChain::new(self);
        chain.visible.copy_from_slice(v);
        chain.step(self, rng);
        SpinConfiguration::new(chain.visible)
    }

    /// Runs `num_samples` independent chains for `k` block-Gibbs sweeps and
    /// returns their final visible states.
    ///
    /// Chains start uniformly at random unless `initial` supplies one start
    /// per chain. Chain `i` draws from its own stream, keyed by a single word
    /// taken from `rng`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        num_samples: usize,
        k: usize,
        rng: &mut R,
        initial: Option<&SampleBatch>,
    ) -> Result<SampleBatch> {
        if num_samples == 0 {
            return Err(Error::invalid("num_samples must be at least 1"));
        }
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if let Some(init) = initial {
            check_len("initial batch rows", num_samples, init.len())?;
            check_len("initial batch width", self.n_visible, init.width())?;
        }
        let key: u64 = rng.random();
        let chains: Vec<Vec<u8>> = (0..num_samples)
            .into_par_iter()
            .map(|i| {
                let mut chain_rng = rng::stream(key, i as u64);
                let mut chain = GibbsChain::new(self);
                match initial {
                    Some(init) => chain.visible.copy_from_slice(init.row(i)),
                    None => chain.randomize(&mut chain_rng),
                }
                for _ in 0..k {
                    chain.step(self, &mut chain_rng);
                }
                chain.visible
            })
            .collect();
        let mut out = SampleBatch::with_capacity(self.n_visible, num_samples);
        for v in &chains {
            out.push_unchecked(v);
        }
        Ok(out)
    }
}

/// Reusable buffers for a single block-Gibbs chain.
#[derive(Debug, Clone)]
pub(crate) struct GibbsChain {
    pub(crate) visible: Vec<u8>,
    hidden: Vec<u8>,
    hidden_act: Vec<f64>,
    visible_act: Vec<f64>,
}

impl GibbsChain {
    pub(crate) fn new(params: &RbmParameters) -> Self {
        Self {
            visible: vec![0; params.n_visible],
            hidden: vec![0; params.n_hidden],
            hidden_act: vec![0.0; params.n_hidden],
            visible_act: vec![0.0; params.n_visible],
        }
    }

    pub(crate) fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in &mut self.visible {
            *v = rng.random_bool(0.5) as u8;
        }
    }

    #[inline]
    pub(crate) fn step<R: Rng + ?Sized>(&mut self, params: &RbmParameters, rng: &mut R) {
        params.hidden_activations_into(&self.visible, &mut self.hidden_act);
        for (h, &a) in self.hidden.iter_mut().zip(&self.hidden_act) {
            *h = (rng.random::<f64>() < logistic(a)) as u8;
        }
        params.visible_activations_into(&self.hidden, &mut self.visible_act);
        for (v, &a) in self.visible.iter_mut().zip(&self.visible_act) {
            *v = (rng.random::<f64>() < logistic(a)) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::spin::write_index_bits;

    fn small() -> RbmParameters {
        RbmParameters::new(2, 1, vec![1.0, 2.0], vec![0.5, 0.0], vec![-1.0]).unwrap()
    }

    fn random_params(n_v: usize, n_h: usize, seed: u64, scale: f64) -> RbmParameters {
        let mut r = seeded(seed);
        let mut p = RbmParameters::zeros(n_v, n_h).unwrap();
        for x in p.iter_mut() {
            *x = scale * (r.random::<f64>() * 2.0 - 1.0);
        }
        p
    }

    #[test]
    fn energy_examples() {
        let z = RbmParameters::zeros(3, 2).unwrap();
        assert_eq!(z.energy(&[1, 0, 1], &[1, 1]).unwrap(), 0.0);
        assert_eq!(small().energy(&[1, 1], &[1]).unwrap(), -2.5);
        assert!(small().energy(&[1], &[1]).is_err());
        assert!(small().energy(&[1, 1], &[1, 0]).is_err());
    }

    #[test]
    fn energy_matches_termwise_loop() {
        let p = random_params(4, 3, 11, 1.5);
        for vi in 0..16 {
            for hi in 0..8 {
                let mut v = [0u8; 4];
                let mut h = [0u8; 3];
                write_index_bits(vi, &mut v);
                write_index_bits(hi, &mut h);
                let mut e = 0.0;
                for (j, &vj) in v.iter().enumerate() {
                    e -= p.visible_bias()[j] * vj as f64;
                }
                for (i, &hi) in h.iter().enumerate() {
                    e -= p.hidden_bias()[i] * hi as f64;
                    for (j, &vj) in v.iter().enumerate() {
                        e -= hi as f64 * p.weight(i, j) * vj as f64;
                    }
                }
                let got = p.energy(&v, &h).unwrap();
                assert!((got - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn effective_energy_examples() {
        let z = RbmParameters::zeros(3, 2).unwrap();
        let e = z.effective_energy(&[0, 1, 1]).unwrap();
        assert!((e + 2.0 * 2f64.ln()).abs() < 1e-15);
        let big = RbmParameters::new(1, 1, vec![0.0], vec![0.0], vec![1000.0]).unwrap();
        let e = big.effective_energy(&[0]).unwrap();
        assert!(e.is_finite());
        assert!((e + 1000.0).abs() < 1e-9);
        let neg = RbmParameters::new(1, 1, vec![0.0], vec![0.0], vec![-700.0]).unwrap();
        assert!(neg.effective_energy(&[1]).unwrap().is_finite());
    }

    #[test]
    fn effective_energy_traces_hidden_units() {
        for (n_v, n_h, seed) in [(3, 4, 1), (5, 8, 2), (2, 10, 3)] {
            let p = random_params(n_v, n_h, seed, 1.0);
            for vi in 0..1usize << n_v {
                let mut v = vec![0u8; n_v];
                write_index_bits(vi, &mut v);
                let mut sum = 0.0;
                for hi in 0..1usize << n_h {
                    let mut h = vec![0u8; n_h];
                    write_index_bits(hi, &mut h);
                    sum += (-p.energy(&v, &h).unwrap()).exp();
                }
                let direct = (-p.effective_energy(&v).unwrap()).exp();
                assert!(((direct - sum) / sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_partition_examples() {
        let z = RbmParameters::zeros(2, 2).unwrap();
        assert!((z.log_partition().unwrap() - 16f64.ln()).abs() < 1e-12);
        let wide = RbmParameters::zeros(21, 1).unwrap();
        assert!(matches!(
            wide.log_partition(),
            Err(Error::Intractable { .. })
        ));
    }

    #[test]
    fn log_partition_matches_joint_sum() {
        for (n_v, n_h, seed) in [(3, 3, 5), (6, 6, 6), (4, 2, 7)] {
            let p = random_params(n_v, n_h, seed, 1.0);
            let mut total = 0.0;
            for vi in 0..1usize << n_v {
                for hi in 0..1usize << n_h {
                    let mut v = vec![0u8; n_v];
                    let mut h = vec![0u8; n_h];
                    write_index_bits(vi, &mut v);
                    write_index_bits(hi, &mut h);
                    total += (-p.energy(&v, &h).unwrap()).exp();
                }
            }
            let got = p.log_partition().unwrap();
            assert!(((got - total.ln()) / total.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_examples() {
        let z = RbmParameters::zeros(3, 2).unwrap();
        assert_eq!(
            z.conditional_hidden_probs(&[1, 0, 1]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(z.conditional_visible_probs(&[1, 0]).unwrap(), vec![0.5; 3]);
        let p = RbmParameters::new(2, 1, vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0]).unwrap();
        let q = p.conditional_hidden_probs(&[1, 1]).unwrap()[0];
        assert!((q - 0.8807970779778823).abs() < 1e-12);
    }

    #[test]
    fn conditionals_are_transposes() {
        let p = random_params(3, 2, 9, 1.0);
        let mut wt = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                wt[j * 2 + i] = p.weight(i, j);
            }
        }
        let t = RbmParameters::new(
            2,
            3,
            wt,
            p.hidden_bias().to_vec(),
            p.visible_bias().to_vec(),
        )
        .unwrap();
        for hi in 0..4 {
            let mut h = [0u8; 2];
            write_index_bits(hi, &mut h);
            assert_eq!(
                p.conditional_visible_probs(&h).unwrap(),
                t.conditional_hidden_probs(&h).unwrap()
            );
        }
    }

    #[test]
    fn sample_contracts() {
        let p = RbmParameters::zeros(4, 2).unwrap();
        let mut r = seeded(1);
        assert!(p.sample(0, 1, &mut r, None).is_err());
        assert!(p.sample(1, 0, &mut r, None).is_err());
        let s = p.sample(1000, 3, &mut r, None).unwrap();
        assert_eq!(s.len(), 1000);
        assert_eq!(s.width(), 4);
        let a = p.sample(50, 3, &mut seeded(4), None).unwrap();
        let b = p.sample(50, 3, &mut seeded(4), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_params_sample_uniformly() {
        let p = RbmParameters::zeros(5, 3).unwrap();
        let s = p.sample(100_000, 1, &mut seeded(2), None).unwrap();
        for j in 0..5 {
            let mean = s.iter().map(|r| r[j] as f64).sum::<f64>() / s.len() as f64;
            assert!((0.49..=0.51).contains(&mean), "site {j} mean {mean}");
        }
    }

    #[test]
    fn gibbs_step_is_deterministic_under_seed() {
        let p = random_params(4, 3, 3, 1.0);
        let run = |seed| {
            let mut r = seeded(seed);
            let mut v = SpinConfiguration::new(vec![1, 0, 1, 0]).unwrap();
            let mut traj = Vec::new();
            for _ in 0..50 {
                v = p.block_gibbs_step(&v, &mut r).unwrap();
                traj.push(v.clone());
            }
            traj
        };
        assert_eq!(run(8), run(8));
        assert!(p.block_gibbs_step(&[1, 0], &mut seeded(0)).is_err());
    }
}
