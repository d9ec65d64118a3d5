//! Gradient estimators and the stochastic-gradient training loops.
//!
//! Gradients are of the KL objective, so descending them moves the model
//! towards the data. For a positive model the per-batch estimate is
//! `⟨∇E_eff⟩_data − ⟨∇E_eff⟩_model`, with the model term from CD-k chains.
//! For a complex model the data term of a sample measured in basis `b` is the
//! gradient of `−ln|ψ_b(σ_b)|²`, evaluated through the rotated sum; the model
//! term is unchanged because the rotation is unitary and the phase RBM does
//! not enter the norm.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gates::{BasisAssignment, GateRegistry, RotationPlan};
use crate::metrics::{self, kl_between, TargetState};
use crate::rbm::{log_sum_exp, logistic, GibbsChain, RbmParameters};
use crate::rng;
use crate::spin::{config_index, HilbertSpace, SampleBatch};
use crate::state::{ComplexWavefunction, Wavefunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub pos_batch_size: usize,
    pub neg_batch_size: usize,
    pub learning_rate: f64,
    /// Block-Gibbs sweeps in the negative phase.
    pub k: usize,
    pub seed: u64,
    pub log_every: usize,
}

impl TrainingConfig {
    /// Hyperparameters used for the single-basis TFIM reconstruction.
    pub fn positive_defaults() -> Self {
        Self {
            epochs: 500,
            pos_batch_size: 100,
            neg_batch_size: 100,
            learning_rate: 0.01,
            k: 5,
            seed: 0,
            log_every: 10,
        }
    }

    /// Hyperparameters used for the two-qubit complex reconstruction.
    pub fn complex_defaults() -> Self {
        Self {
            epochs: 100,
            pos_batch_size: 10,
            neg_batch_size: 10,
            learning_rate: 0.05,
            k: 5,
            seed: 0,
            log_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("pos_batch_size", self.pos_batch_size),
            ("neg_batch_size", self.neg_batch_size),
            ("k", self.k),
            ("log_every", self.log_every),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive and finite"));
        }
        Ok(())
    }
}

/// Gradients for the amplitude RBM and, for complex models, the phase RBM.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub amplitude: RbmParameters,
    pub phase: Option<RbmParameters>,
}

impl GradientSet {
    pub fn zeros_like(model: &Wavefunction) -> Self {
        let zeros = |p: &RbmParameters| {
            RbmParameters::zeros(p.n_visible(), p.n_hidden()).expect("shape of a valid RBM")
        };
        Self {
            amplitude: zeros(model.amplitude()),
            phase: model.phase_rbm().map(zeros),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.amplitude.is_finite() && self.phase.as_ref().is_none_or(RbmParameters::is_finite)
    }
}

/// Measurement records, optionally tagged with the basis of each shot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    samples: SampleBatch,
    bases: Option<Vec<BasisAssignment>>,
}

impl TrainingDataset {
    pub fn new(samples: SampleBatch, bases: Option<Vec<BasisAssignment>>) -> Result<Self> {
        if let Some(bases) = &bases {
            check_len("per-sample bases", samples.len(), bases.len())?;
            for b in bases {
                check_len("basis sites", samples.width(), b.len())?;
            }
        }
        Ok(Self { samples, bases })
    }

    pub fn reference(samples: SampleBatch) -> Self {
        Self {
            samples,
            bases: None,
        }
    }

    pub fn samples(&self) -> &SampleBatch {
        &self.samples
    }

    pub fn bases(&self) -> Option<&[BasisAssignment]> {
        self.bases.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Basis of sample `i`; the reference basis when none was recorded.
    pub fn basis(&self, i: usize) -> BasisAssignment {
        match &self.bases {
            Some(b) => b[i].clone(),
            None => BasisAssignment::reference(self.samples.width()),
        }
    }

    /// Distinct bases in order of first appearance.
    pub fn distinct_bases(&self) -> Vec<BasisAssignment> {
        match &self.bases {
            None => vec![BasisAssignment::reference(self.samples.width())],
            Some(bases) => {
                let mut seen = Vec::new();
                for b in bases {
                    if !seen.contains(b) {
                        seen.push(b.clone());
                    }
                }
                seen
            }
        }
    }
}

/// Adds `weight · ∇E_eff(v)` into `out`. `act` holds `n_h` scratch entries.
#[inline]
fn accumulate_energy_gradient(
    params: &RbmParameters,
    v: &[u8],
    weight: f64,
    act: &mut [f64],
    out: &mut RbmParameters,
) {
    let n_v = params.n_visible();
    params.hidden_activations_into(v, act);
    for (b, &vj) in out.visible_bias_mut().iter_mut().zip(v) {
        if vj != 0 {
            *b -= weight;
        }
    }
    for a in act.iter_mut() {
        *a = weight * logistic(*a);
    }
    for (c, &s) in out.hidden_bias_mut().iter_mut().zip(act.iter()) {
        *c -= s;
    }
    for (row, &s) in out.weights_mut().chunks_exact_mut(n_v).zip(act.iter()) {
        for (w, &vj) in row.iter_mut().zip(v) {
            if vj != 0 {
                *w -= s;
            }
        }
    }
}

/// `∂E_eff/∂θ` at `v` for every parameter θ.
pub fn effective_energy_gradient(params: &RbmParameters, v: &[u8]) -> Result<RbmParameters> {
    check_len("visible configuration", params.n_visible(), v.len())?;
    let mut out = RbmParameters::zeros(params.n_visible(), params.n_hidden())?;
    let mut act = vec![0.0; params.n_hidden()];
    accumulate_energy_gradient(params, v, 1.0, &mut act, &mut out);
    Ok(out)
}

/// Normalized histogram of `samples` over the canonical configuration order.
pub fn empirical_distribution(samples: &SampleBatch, space: &HilbertSpace) -> Result<Vec<f64>> {
    check_len("sample width", space.num_sites(), samples.width())?;
    if samples.is_empty() {
        return Err(Error::invalid("empty sample batch"));
    }
    let mut counts = vec![0.0; space.dimension()];
    for s in samples.iter() {
        counts[config_index(s)] += 1.0;
    }
    let n = samples.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(counts)
}

fn check_distribution(space: &HilbertSpace, dist: &[f64]) -> Result<()> {
    check_len("distribution length", space.dimension(), dist.len())?;
    let total: f64 = dist.iter().sum();
    if dist.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "not a probability distribution (sum {total})"
        )));
    }
    Ok(())
}

/// Model distribution `p_λ` over `space`.
fn model_distribution(params: &RbmParameters, space: &HilbertSpace) -> Vec<f64> {
    let neg: Vec<f64> = space
        .iter()
        .map(|v| -params.effective_energy_unchecked(v))
        .collect();
    let log_z = log_sum_exp(neg.iter().copied());
    neg.into_iter().map(|x| (x - log_z).exp()).collect()
}

/// Adds `scale · ⟨∇E_eff⟩_{p_λ}` into `out`, by enumeration.
fn accumulate_model_expectation(
    params: &RbmParameters,
    space: &HilbertSpace,
    scale: f64,
    out: &mut RbmParameters,
) {
    let mut act = vec![0.0; params.n_hidden()];
    for (v, p) in space.iter().zip(model_distribution(params, space)) {
        accumulate_energy_gradient(params, v, scale * p, &mut act, out);
    }
}

/// `KL(P_data ‖ p_λ)` for a distribution over `space`.
pub fn kl_objective_positive(
    params: &RbmParameters,
    data: &[f64],
    space: &HilbertSpace,
) -> Result<f64> {
    check_len("Hilbert space sites", params.n_visible(), space.num_sites())?;
    check_distribution(space, data)?;
    Ok(kl_between(data, &model_distribution(params, space)))
}

/// Exact gradient of `KL(P_data ‖ p_λ)`: `⟨∇E_eff⟩_data − ⟨∇E_eff⟩_model`.
pub fn exact_kl_gradient_positive(
    params: &RbmParameters,
    data: &[f64],
    space: &HilbertSpace,
) -> Result<GradientSet> {
    check_len("Hilbert space sites", params.n_visible(), space.num_sites())?;
    check_distribution(space, data)?;
    let mut out = RbmParameters::zeros(params.n_visible(), params.n_hidden())?;
    let mut act = vec![0.0; params.n_hidden()];
    for (v, &p) in space.iter().zip(data) {
        if p > 0.0 {
            accumulate_energy_gradient(params, v, p, &mut act, &mut out);
        }
    }
    accumulate_model_expectation(params, space, -1.0, &mut out);
    Ok(GradientSet {
        amplitude: out,
        phase: None,
    })
}

/// Scratch buffers reused across CD updates.
struct CdWorkspace {
    act: Vec<f64>,
    chain: GibbsChain,
}

impl CdWorkspace {
    fn new(params: &RbmParameters) -> Self {
        Self {
            act: vec![0.0; params.n_hidden()],
            chain: GibbsChain::new(params),
        }
    }
}

/// Subtracts the CD-k model term from `out`.
///
/// Negative chain `m` starts from positive row `m mod |pos|`: the positive
/// batch truncated, or cycled when the negative batch is larger.
fn accumulate_negative_phase<R: Rng + ?Sized>(
    params: &RbmParameters,
    pos_rows: &[&[u8]],
    neg_batch_size: usize,
    k: usize,
    rng: &mut R,
    ws: &mut CdWorkspace,
    out: &mut RbmParameters,
) {
    let weight = -1.0 / neg_batch_size as f64;
    for m in 0..neg_batch_size {
        ws.chain
            .visible
            .copy_from_slice(pos_rows[m % pos_rows.len()]);
        for _ in 0..k {
            ws.chain.step(params, rng);
        }
        accumulate_energy_gradient(params, &ws.chain.visible, weight, &mut ws.act, out);
    }
}

fn cd_gradient_rows<R: Rng + ?Sized>(
    params: &RbmParameters,
    pos_rows: &[&[u8]],
    neg_batch_size: usize,
    k: usize,
    rng: &mut R,
    ws: &mut CdWorkspace,
    out: &mut RbmParameters,
) {
    out.scale(0.0);
    let weight = 1.0 / pos_rows.len() as f64;
    for v in pos_rows {
        accumulate_energy_gradient(params, v, weight, &mut ws.act, out);
    }
    accumulate_negative_phase(params, pos_rows, neg_batch_size, k, rng, ws, out);
}

/// Contrastive-divergence estimate of the KL gradient for one batch.
pub fn cd_gradient_positive<R: Rng + ?Sized>(
    params: &RbmParameters,
    pos_batch: &SampleBatch,
    neg_batch_size: usize,
    k: usize,
    rng: &mut R,
) -> Result<GradientSet> {
    if pos_batch.is_empty() {
        return Err(Error::invalid("positive batch is empty"));
    }
    if neg_batch_size == 0 || k == 0 {
        return Err(Error::invalid("neg_batch_size and k must be at least 1"));
    }
    check_len("sample width", params.n_visible(), pos_batch.width())?;
    let rows: Vec<&[u8]> = pos_batch.iter().collect();
    let mut out = RbmParameters::zeros(params.n_visible(), params.n_hidden())?;
    let mut ws = CdWorkspace::new(params);
    cd_gradient_rows(params, &rows, neg_batch_size, k, rng, &mut ws, &mut out);
    Ok(GradientSet {
        amplitude: out,
        phase: None,
    })
}

/// Adds `weight · ∇(−ln|ψ_b(σ_b)|²)` for both RBMs.
#[allow(clippy::too_many_arguments)]
fn accumulate_rotated_data_term(
    model: &ComplexWavefunction,
    plan: &RotationPlan,
    sigma_b: &[u8],
    weight: f64,
    act_amp: &mut [f64],
    act_phase: &mut [f64],
    amp_out: &mut RbmParameters,
    phase_out: &mut RbmParameters,
    wrapped: &Wavefunction,
) -> Result<()> {
    if plan.is_identity() {
        accumulate_energy_gradient(&model.amplitude, sigma_b, weight, act_amp, amp_out);
        return Ok(());
    }
    let sum = wrapped.rotated_sum(plan, sigma_b)?;
    if sum.value.norm_sqr() == 0.0 {
        return Err(Error::invalid(format!(
            "rotated amplitude of {sigma_b:?} vanishes; its log-likelihood gradient is unbounded"
        )));
    }
    for kk in 0..sum.len() {
        let omega: Complex64 = sum.terms[kk] / sum.value;
        let config = sum.config(kk);
        accumulate_energy_gradient(
            &model.amplitude,
            config,
            weight * omega.re,
            act_amp,
            amp_out,
        );
        accumulate_energy_gradient(
            &model.phase,
            config,
            -weight * omega.im,
            act_phase,
            phase_out,
        );
    }
    Ok(())
}

/// Builds one [`RotationPlan`] per distinct basis and maps each sample to it.
#[derive(Debug, Clone)]
pub struct PlanIndex {
    plans: Vec<RotationPlan>,
    sample_plan: Vec<usize>,
}

impl PlanIndex {
    pub fn new(registry: &GateRegistry, bases: &[BasisAssignment]) -> Result<Self> {
        let mut lookup: HashMap<&BasisAssignment, usize> = HashMap::new();
        let mut plans = Vec::new();
        let mut sample_plan = Vec::with_capacity(bases.len());
        for b in bases {
            let idx = match lookup.get(b) {
                Some(&i) => i,
                None => {
                    plans.push(RotationPlan::new(registry, b)?);
                    lookup.insert(b, plans.len() - 1);
                    plans.len() - 1
                }
            };
            sample_plan.push(idx);
        }
        Ok(Self { plans, sample_plan })
    }

    pub fn plan_for(&self, sample: usize) -> &RotationPlan {
        &self.plans[self.sample_plan[sample]]
    }
}

struct ComplexWorkspace {
    cd: CdWorkspace,
    act_phase: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn multibasis_gradient_rows<R: Rng + ?Sized>(
    model: &ComplexWavefunction,
    wrapped: &Wavefunction,
    rows: &[&[u8]],
    plans: &[&RotationPlan],
    neg_batch_size: usize,
    k: usize,
    rng: &mut R,
    ws: &mut ComplexWorkspace,
    grads: &mut GradientSet,
) -> Result<()> {
    let phase_out = grads.phase.as_mut().expect("complex gradient set");
    grads.amplitude.scale(0.0);
    phase_out.scale(0.0);
    let weight = 1.0 / rows.len() as f64;
    for (v, plan) in rows.iter().zip(plans) {
        accumulate_rotated_data_term(
            model,
            plan,
            v,
            weight,
            &mut ws.cd.act,
            &mut ws.act_phase,
            &mut grads.amplitude,
            phase_out,
            wrapped,
        )?;
    }
    accumulate_negative_phase(
        &model.amplitude,
        rows,
        neg_batch_size,
        k,
        rng,
        &mut ws.cd,
        &mut grads.amplitude,
    );
    Ok(())
}

/// Stochastic gradient of the summed per-basis KL divergences for one batch.
///
/// `bases[i]` is the measurement basis of `batch` row `i`.
pub fn multibasis_gradient_complex<R: Rng + ?Sized>(
    model: &ComplexWavefunction,
    registry: &GateRegistry,
    batch: &SampleBatch,
    bases: &[Option<BasisAssignment>],
    neg_batch_size: usize,
    k: usize,
    rng: &mut R,
) -> Result<GradientSet> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    if neg_batch_size == 0 || k == 0 {
        return Err(Error::invalid("neg_batch_size and k must be at least 1"));
    }
    check_len("sample width", model.amplitude.n_visible(), batch.width())?;
    check_len("per-sample bases", batch.len(), bases.len())?;
    let resolved: Vec<BasisAssignment> = bases
        .iter()
        .enumerate()
        .map(|(i, b)| b.clone().ok_or(Error::MissingBasis(i)))
        .collect::<Result<_>>()?;
    let index = PlanIndex::new(registry, &resolved)?;
    let rows: Vec<&[u8]> = batch.iter().collect();
    let plans: Vec<&RotationPlan> = (0..rows.len()).map(|i| index.plan_for(i)).collect();
    let wrapped = Wavefunction::Complex(model.clone());
    let mut grads = GradientSet::zeros_like(&wrapped);
    let mut ws = ComplexWorkspace {
        cd: CdWorkspace::new(&model.amplitude),
        act_phase: vec![0.0; model.phase.n_hidden()],
    };
    multibasis_gradient_rows(
        model,
        &wrapped,
        &rows,
        &plans,
        neg_batch_size,
        k,
        rng,
        &mut ws,
        &mut grads,
    )?;
    Ok(grads)
}

/// Per-basis reference distributions for the multi-basis objective.
#[derive(Debug, Clone, Copy)]
pub enum BasisReference<'a> {
    /// Rotated Born distributions of a known state.
    Target(&'a TargetState),
    /// Empirical frequencies of the shots recorded in each basis.
    Dataset(&'a TrainingDataset),
}

impl BasisReference<'_> {
    pub fn distributions(
        &self,
        registry: &GateRegistry,
        bases: &[BasisAssignment],
        space: &HilbertSpace,
    ) -> Result<Vec<Vec<f64>>> {
        match self {
            BasisReference::Target(t) => bases
                .iter()
                .map(|b| t.rotated_probabilities(registry, b))
                .collect(),
            BasisReference::Dataset(d) => bases
                .iter()
                .map(|b| {
                    let rows: Vec<usize> = (0..d.len()).filter(|&i| &d.basis(i) == b).collect();
                    if rows.is_empty() {
                        return Err(Error::invalid(format!("no samples measured in basis {b}")));
                    }
                    empirical_distribution(&d.samples().select(&rows), space)
                })
                .collect(),
        }
    }
}

/// `Σ_b KL(P_b ‖ q_b)` with `q_b` the normalized rotated model distribution.
pub fn multibasis_objective(
    model: &Wavefunction,
    registry: &GateRegistry,
    reference: BasisReference<'_>,
    bases: &[BasisAssignment],
    space: &HilbertSpace,
) -> Result<f64> {
    let targets = reference.distributions(registry, bases, space)?;
    let models = metrics::rotated_model_distributions(model, registry, bases, space)?;
    Ok(targets
        .iter()
        .zip(&models)
        .map(|(p, q)| kl_between(p, q))
        .sum())
}

/// Exact gradient of [`multibasis_objective`] by enumeration.
pub fn exact_multibasis_gradient(
    model: &ComplexWavefunction,
    registry: &GateRegistry,
    reference: BasisReference<'_>,
    bases: &[BasisAssignment],
    space: &HilbertSpace,
) -> Result<GradientSet> {
    check_len(
        "Hilbert space sites",
        model.amplitude.n_visible(),
        space.num_sites(),
    )?;
    let targets = reference.distributions(registry, bases, space)?;
    let wrapped = Wavefunction::Complex(model.clone());
    let mut grads = GradientSet::zeros_like(&wrapped);
    let phase_out = grads.phase.as_mut().expect("complex gradient set");
    let mut act_amp = vec![0.0; model.amplitude.n_hidden()];
    let mut act_phase = vec![0.0; model.phase.n_hidden()];
    for (basis, dist) in bases.iter().zip(&targets) {
        let plan = RotationPlan::new(registry, basis)?;
        for (sigma_b, &p) in space.iter().zip(dist) {
            if p > 0.0 {
                accumulate_rotated_data_term(
                    model,
                    &plan,
                    sigma_b,
                    p,
                    &mut act_amp,
                    &mut act_phase,
                    &mut grads.amplitude,
                    phase_out,
                    &wrapped,
                )?;
            }
        }
    }
    accumulate_model_expectation(
        &model.amplitude,
        space,
        -(bases.len() as f64),
        &mut grads.amplitude,
    );
    Ok(grads)
}

/// `params ← params − learning_rate · grads`.
pub fn sgd_step(
    params: &mut RbmParameters,
    grads: &RbmParameters,
    learning_rate: f64,
) -> Result<()> {
    params.add_scaled(-learning_rate, grads)
}

/// Applies [`sgd_step`] to every RBM of `model`.
pub fn apply_gradients(
    model: &mut Wavefunction,
    grads: &GradientSet,
    learning_rate: f64,
) -> Result<()> {
    sgd_step(model.amplitude_mut(), &grads.amplitude, learning_rate)?;
    match (model.phase_rbm_mut(), &grads.phase) {
        (Some(phase), Some(g)) => sgd_step(phase, g, learning_rate),
        (None, None) => Ok(()),
        _ => Err(Error::invalid("gradient set does not match the model kind")),
    }
}

/// Hook invoked by the training loops.
pub trait Callback {
    fn on_epoch_end(&mut self, epoch: usize, model: &Wavefunction) -> Result<()>;
}

pub type MetricFn = Arc<dyn Fn(&Wavefunction) -> Result<f64> + Send + Sync>;

/// Metric values recorded at selected epochs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricHistory {
    pub epochs: Vec<usize>,
    pub names: Vec<String>,
    /// `values[m][t]` is metric `names[m]` at `epochs[t]`.
    pub values: Vec<Vec<f64>>,
}

impl MetricHistory {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// `epoch,<name>,...` with lower-cased metric names as column headers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch");
        for n in &self.names {
            out.push(',');
            out.push_str(&n.to_lowercase());
        }
        out.push('\n');
        for (t, epoch) in self.epochs.iter().enumerate() {
            out.push_str(&epoch.to_string());
            for v in &self.values {
                out.push_str(&format!(",{:.17e}", v[t]));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates named metrics every `period` epochs.
pub struct MetricEvaluator {
    period: usize,
    metrics: Vec<(String, MetricFn)>,
    history: MetricHistory,
    verbose: bool,
}

impl MetricEvaluator {
    pub fn new(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("metric period must be at least 1"));
        }
        Ok(Self {
            period,
            metrics: Vec::new(),
            history: MetricHistory::default(),
            verbose: false,
        })
    }

    pub fn with_metric(mut self, name: &str, f: MetricFn) -> Self {
        self.metrics.push((name.to_string(), f));
        self.history.names.push(name.to_string());
        self.history.values.push(Vec::new());
        self
    }

    pub fn verbose(mut self, verbose: bool) -> Self {
        self.verbose = verbose;
        self
    }

    pub fn history(&self) -> &MetricHistory {
        &self.history
    }

    pub fn into_history(self) -> MetricHistory {
        self.history
    }

    /// The line printed in verbose mode for the latest record.
    pub fn progress_line(&self) -> Option<String> {
        let t = self.history.epochs.len().checked_sub(1)?;
        let mut line = format!("epoch {}", self.history.epochs[t]);
        for (name, values) in self.history.names.iter().zip(&self.history.values) {
            line.push_str(&format!("  {name} = {:.6}", values[t]));
        }
        Some(line)
    }
}

impl Callback for MetricEvaluator {
    fn on_epoch_end(&mut self, epoch: usize, model: &Wavefunction) -> Result<()> {
        if !epoch.is_multiple_of(self.period) {
            return Ok(());
        }
        let values: Vec<f64> = self
            .metrics
            .iter()
            .map(|(_, f)| f(model))
            .collect::<Result<_>>()?;
        self.history.epochs.push(epoch);
        for (slot, v) in self.history.values.iter_mut().zip(values) {
            slot.push(v);
        }
        if self.verbose {
            if let Some(line) = self.progress_line() {
                eprintln!("{line}");
            }
        }
        Ok(())
    }
}

/// Fidelity and KL against a known state; multi-basis KL when `bases` is
/// given. Metric names are `Fidelity` and `KL`.
pub fn metric_callback(
    period: usize,
    target: TargetState,
    space: HilbertSpace,
    bases: Option<(GateRegistry, Vec<BasisAssignment>)>,
) -> Result<MetricEvaluator> {
    let target = Arc::new(target);
    let space = Arc::new(space);
    let (t1, s1) = (target.clone(), space.clone());
    let fid: MetricFn = Arc::new(move |m| metrics::fidelity(m, &t1, &s1));
    let kl: MetricFn = match bases {
        None => Arc::new(move |m| metrics::kl_divergence(m, &target, &space)),
        Some((registry, bases)) => {
            Arc::new(move |m| metrics::kl_multibasis(m, &registry, &target, &bases, &space))
        }
    };
    Ok(MetricEvaluator::new(period)?
        .with_metric("Fidelity", fid)
        .with_metric("KL", kl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitSummary {
    pub epochs: usize,
    pub updates_per_epoch: usize,
    pub total_updates: usize,
}

fn check_fit_inputs(
    model: &Wavefunction,
    dataset: &TrainingDataset,
    config: &TrainingConfig,
) -> Result<()> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    check_len("sample width", model.n_visible(), dataset.samples().width())
}

fn run_callbacks(
    epoch: usize,
    config: &TrainingConfig,
    model: &Wavefunction,
    callbacks: &mut [&mut dyn Callback],
) -> Result<()> {
    if epoch.is_multiple_of(config.log_every) {
        for cb in callbacks.iter_mut() {
            cb.on_epoch_end(epoch, model)?;
        }
    }
    Ok(())
}

/// Trains a positive model with CD-k on reference-basis data.
///
/// Each epoch shuffles the dataset with a stream derived from the seed and
/// epoch, then takes one SGD step per positive batch.
pub fn fit_positive(
    model: &mut Wavefunction,
    dataset: &TrainingDataset,
    config: &TrainingConfig,
    callbacks: &mut [&mut dyn Callback],
) -> Result<FitSummary> {
    check_fit_inputs(model, dataset, config)?;
    if model.phase_rbm().is_some() {
        return Err(Error::invalid("fit_positive needs a positive model"));
    }
    let n = dataset.len();
    let updates_per_epoch = n.div_ceil(config.pos_batch_size);
    let mut sampler = rng::seeded(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = GradientSet::zeros_like(model);
    let mut ws = CdWorkspace::new(model.amplitude());
    let mut rows: Vec<&[u8]> = Vec::with_capacity(config.pos_batch_size);
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        for chunk in order.chunks(config.pos_batch_size) {
            rows.clear();
            rows.extend(chunk.iter().map(|&i| dataset.samples().row(i)));
            cd_gradient_rows(
                model.amplitude(),
                &rows,
                config.neg_batch_size,
                config.k,
                &mut sampler,
                &mut ws,
                &mut grads.amplitude,
            );
            sgd_step(
                model.amplitude_mut(),
                &grads.amplitude,
                config.learning_rate,
            )?;
        }
        run_callbacks(epoch, config, model, callbacks)?;
    }
    Ok(FitSummary {
        epochs: config.epochs,
        updates_per_epoch,
        total_updates: updates_per_epoch * config.epochs,
    })
}

/// Trains a complex model on shots tagged with their measurement bases.
pub fn fit_complex(
    model: &mut Wavefunction,
    dataset: &TrainingDataset,
    registry: &GateRegistry,
    config: &TrainingConfig,
    callbacks: &mut [&mut dyn Callback],
) -> Result<FitSummary> {
    check_fit_inputs(model, dataset, config)?;
    if model.phase_rbm().is_none() {
        return Err(Error::invalid("fit_complex needs a complex model"));
    }
    let bases = dataset.bases().ok_or(Error::MissingBasis(0))?;
    let index = PlanIndex::new(registry, bases)?;
    let n = dataset.len();
    let updates_per_epoch = n.div_ceil(config.pos_batch_size);
    let mut sampler = rng::seeded(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = GradientSet::zeros_like(model);
    let mut ws = {
        let phase = model.phase_rbm().expect("complex model");
        ComplexWorkspace {
            cd: CdWorkspace::new(model.amplitude()),
            act_phase: vec![0.0; phase.n_hidden()],
        }
    };
    let mut rows: Vec<&[u8]> = Vec::with_capacity(config.pos_batch_size);
    let mut plans: Vec<&RotationPlan> = Vec::with_capacity(config.pos_batch_size);
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        for chunk in order.chunks(config.pos_batch_size) {
            rows.clear();
            plans.clear();
            for &i in chunk {
                rows.push(dataset.samples().row(i));
                plans.push(index.plan_for(i));
            }
            {
                let Wavefunction::Complex(inner) = &*model else {
                    unreachable!("checked above")
                };
                multibasis_gradient_rows(
                    inner,
                    model,
                    &rows,
                    &plans,
                    config.neg_batch_size,
                    config.k,
                    &mut sampler,
                    &mut ws,
                    &mut grads,
                )?;
            }
            apply_gradients(model, &grads, config.learning_rate)?;
        }
        run_callbacks(epoch, config, model, callbacks)?;
    }
    Ok(FitSummary {
        epochs: config.epochs,
        updates_per_epoch,
        total_updates: updates_per_epoch * config.epochs,
    })
}

/// Fresh model with weights drawn per the initialization convention.
pub fn init_positive(n_visible: usize, n_hidden: usize, seed: u64) -> Result<Wavefunction> {
    let mut r = rng::stream(seed, u64::MAX);
    Ok(Wavefunction::Positive(
        crate::state::PositiveWavefunction::new(RbmParameters::random(
            n_visible, n_hidden, &mut r,
        )?),
    ))
}

pub fn init_complex(n_visible: usize, n_hidden: usize, seed: u64) -> Result<Wavefunction> {
    let mut r = rng::stream(seed, u64::MAX);
    let amplitude = RbmParameters::random(n_visible, n_hidden, &mut r)?;
    let phase = RbmParameters::random(n_visible, n_hidden, &mut r)?;
    Ok(Wavefunction::Complex(ComplexWavefunction::new(
        amplitude, phase,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::default_gate_registry;
    use crate::state::PositiveWavefunction;

    fn positive(n_v: usize, n_h: usize, seed: u64) -> Wavefunction {
        init_positive(n_v, n_h, seed).unwrap()
    }

    #[test]
    fn energy_gradient_examples() {
        let p = RbmParameters::zeros(2, 3).unwrap();
        let g = effective_energy_gradient(&p, &[1, 0]).unwrap();
        assert_eq!(g.visible_bias(), &[-1.0, 0.0]);
        assert_eq!(g.hidden_bias(), &[-0.5, -0.5, -0.5]);
        for i in 0..3 {
            assert_eq!(g.weight(i, 0), -0.5);
            assert_eq!(g.weight(i, 1), 0.0);
        }
        assert!(effective_energy_gradient(&p, &[1]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::positive_defaults().validate().is_ok());
        let mut c = TrainingConfig::positive_defaults();
        c.k = 0;
        assert!(c.validate().is_err());
        c = TrainingConfig::complex_defaults();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sgd_step_rules() {
        let model = positive(3, 2, 1);
        let p = model.amplitude().clone();
        let mut q = p.clone();
        sgd_step(&mut q, &RbmParameters::zeros(3, 2).unwrap(), 0.5).unwrap();
        assert_eq!(p, q);
        sgd_step(&mut q, &p, 1.0).unwrap();
        assert!(q.iter().all(|x| x == 0.0));
        let g = positive(3, 2, 2).amplitude().clone();
        let (mut a, mut b) = (p.clone(), p.clone());
        sgd_step(&mut a, &g, 0.1).unwrap();
        sgd_step(&mut b, &g, 0.05).unwrap();
        sgd_step(&mut b, &g, 0.05).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(sgd_step(&mut a, &RbmParameters::zeros(2, 2).unwrap(), 0.1).is_err());
    }

    #[test]
    fn uniform_data_is_stationary_for_zero_model() {
        let p = RbmParameters::zeros(3, 2).unwrap();
        let space = HilbertSpace::new(3).unwrap();
        let g = exact_kl_gradient_positive(&p, &[0.125; 8], &space).unwrap();
        assert!(g.amplitude.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn cd_gradient_is_deterministic() {
        let p = positive(4, 3, 3).amplitude().clone();
        let batch = SampleBatch::from_flat(4, vec![1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 0]).unwrap();
        let a = cd_gradient_positive(&p, &batch, 5, 2, &mut rng::seeded(9)).unwrap();
        let b = cd_gradient_positive(&p, &batch, 5, 2, &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
        assert!(cd_gradient_positive(&p, &SampleBatch::new(4), 5, 2, &mut rng::seeded(9)).is_err());
    }

    #[test]
    fn epoch_zero_leaves_model_untouched() {
        let mut model = positive(3, 2, 4);
        let before = model.clone();
        let data = TrainingDataset::reference(SampleBatch::from_flat(3, vec![1, 0, 1]).unwrap());
        let mut cfg = TrainingConfig::positive_defaults();
        cfg.epochs = 0;
        let mut cb = metric_callback(
            1,
            TargetState::from_real(3, &[(1.0f64 / 8.0).sqrt(); 8]).unwrap(),
            HilbertSpace::new(3).unwrap(),
            None,
        )
        .unwrap();
        let s = fit_positive(&mut model, &data, &cfg, &mut [&mut cb]).unwrap();
        assert_eq!(model, before);
        assert_eq!(s.total_updates, 0);
        assert!(cb.history().is_empty());
    }

    #[test]
    fn updates_per_epoch_is_ceiling() {
        let mut model = positive(2, 2, 5);
        let samples = SampleBatch::from_flat(2, vec![1; 2 * 1000]).unwrap();
        let data = TrainingDataset::reference(samples);
        let mut cfg = TrainingConfig::positive_defaults();
        cfg.epochs = 1;
        assert_eq!(
            fit_positive(&mut model, &data, &cfg, &mut [])
                .unwrap()
                .updates_per_epoch,
            10
        );
        cfg.pos_batch_size = 300;
        assert_eq!(
            fit_positive(&mut model, &data, &cfg, &mut [])
                .unwrap()
                .updates_per_epoch,
            4
        );
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let mut model = positive(3, 2, 6);
        let cfg = TrainingConfig::positive_defaults();
        let empty = TrainingDataset::reference(SampleBatch::new(3));
        assert!(fit_positive(&mut model, &empty, &cfg, &mut []).is_err());
        let narrow = TrainingDataset::reference(SampleBatch::from_flat(2, vec![0, 1]).unwrap());
        assert!(fit_positive(&mut model, &narrow, &cfg, &mut []).is_err());
        let data = TrainingDataset::reference(SampleBatch::from_flat(3, vec![0, 1, 1]).unwrap());
        assert!(fit_complex(&mut model, &data, &default_gate_registry(), &cfg, &mut []).is_err());
        let mut cmodel = init_complex(3, 2, 1).unwrap();
        assert!(matches!(
            fit_complex(&mut cmodel, &data, &default_gate_registry(), &cfg, &mut []),
            Err(Error::MissingBasis(_))
        ));
    }

    #[test]
    fn metric_evaluator_period_and_csv() {
        let mut ev = MetricEvaluator::new(10)
            .unwrap()
            .with_metric("Fidelity", Arc::new(|_| Ok(0.5)))
            .with_metric("KL", Arc::new(|_| Ok(0.25)));
        let model = positive(2, 1, 7);
        for e in 1..=500 {
            ev.on_epoch_end(e, &model).unwrap();
        }
        assert_eq!(ev.history().len(), 50);
        assert_eq!(ev.history().epochs[0], 10);
        let line = ev.progress_line().unwrap();
        assert!(line.starts_with("epoch 500"));
        assert!(line.contains("Fidelity = 0.500000") && line.contains("KL = 0.250000"));
        let csv = ev.history().to_csv();
        assert!(csv.starts_with("epoch,fidelity,kl\n10,"));
        assert!(MetricEvaluator::new(0).is_err());
    }

    #[test]
    fn reference_only_complex_gradient_has_no_phase_signal() {
        let model = init_complex(3, 2, 8).unwrap();
        let Wavefunction::Complex(inner) = &model else {
            unreachable!()
        };
        let batch = SampleBatch::from_flat(3, vec![1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0]).unwrap();
        let bases = vec![Some(BasisAssignment::reference(3)); 4];
        let reg = default_gate_registry();
        let g = multibasis_gradient_complex(inner, &reg, &batch, &bases, 4, 3, &mut rng::seeded(1))
            .unwrap();
        assert!(g.phase.as_ref().unwrap().iter().all(|x| x == 0.0));
        let pos =
            cd_gradient_positive(&inner.amplitude, &batch, 4, 3, &mut rng::seeded(1)).unwrap();
        assert_eq!(g.amplitude, pos.amplitude);
        let missing = vec![None; 4];
        assert!(matches!(
            multibasis_gradient_complex(inner, &reg, &batch, &missing, 4, 3, &mut rng::seeded(1)),
            Err(Error::MissingBasis(0))
        ));
    }

    #[test]
    fn positive_model_rejected_by_apply_with_phase() {
        let mut model: Wavefunction =
            PositiveWavefunction::new(RbmParameters::zeros(2, 1).unwrap()).into();
        let g = GradientSet::zeros_like(&init_complex(2, 1, 0).unwrap());
        assert!(apply_gradients(&mut model, &g, 0.1).is_err());
    }
}
