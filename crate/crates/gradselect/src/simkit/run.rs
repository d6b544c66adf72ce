//! The online fine-tuning loop: pool draw, factor capture, projection,
//! preconditioned target, strategy dispatch, weighted update, moment
//! tracking, metrics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::{
    project_sample, val_aggregate, ProjectedSample, ProjectionKind, ProjectionSpec, SampleGradient,
};
use crate::linalg::Mat;
use crate::optstate::{
    adam_update, linearized_preconditioner_damped, precondition_target, sgd_apply, AdamState,
    Preconditioner, ProjectedMoment,
};
use crate::rng::{mix_seed, stream, sub_rng};
use crate::selector::{run_strategy, SelectionContext, SelectionOutcome, Strategy};
use crate::simkit::corpus::{gen_corpus, CorpusSpec, Quality};
use crate::simkit::model::{evaluate, LinearStackModel, LossKind, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub lr_max: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear warmup steps before the linear decay toward lr_min.
    pub warmup_steps: usize,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Adam,
            lr_max: 0.05,
            lr_min: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 8,
        }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(Error::Config(
                "need 0 <= lr_min <= lr_max, lr_max > 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must be in [0, 1)".into()));
        }
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }

    /// Linear warmup to lr_max, then linear decay to lr_min at `total`.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        if self.warmup_steps > 0 && step <= self.warmup_steps {
            return self.lr_max * step as f64 / self.warmup_steps as f64;
        }
        if total <= self.warmup_steps + 1 {
            return self.lr_max;
        }
        let frac = (step - self.warmup_steps) as f64 / (total - self.warmup_steps) as f64;
        self.lr_max + (self.lr_min - self.lr_max) * frac.min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    /// Activation-side sketch dimension (clamped per layer to d1).
    pub k1: usize,
    /// Gradient-side sketch dimension (clamped per layer to d2).
    pub k2: usize,
    pub distribution: ProjectionKind,
    /// Bypass sketching entirely.
    pub identity: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        // Factor dims of the default model are at most 32, so the default
        // keeps exact factors; sketching pays off on wider models.
        ProjectionConfig {
            k1: 32,
            k2: 32,
            distribution: ProjectionKind::Rademacher,
            identity: true,
        }
    }
}

/// Pool sizing and stopping rules for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSchedule {
    /// Selected batch size per step.
    pub b_tr: usize,
    /// Oversampling factor: the candidate pool holds alpha·b_tr samples.
    pub alpha: usize,
    /// Validation batch sizing unit; alpha·b_val samples form the target.
    pub b_val: usize,
    /// Hard step cap.
    pub steps: usize,
    /// Fraction of the corpus that may be consumed by training.
    pub budget_fraction: f64,
}

impl Default for PoolSchedule {
    fn default() -> Self {
        PoolSchedule {
            b_tr: 8,
            alpha: 4,
            b_val: 8,
            steps: 400,
            budget_fraction: 0.05,
        }
    }
}

impl PoolSchedule {
    pub fn pool_size(&self) -> usize {
        self.alpha * self.b_tr
    }

    pub fn val_batch_size(&self) -> usize {
        self.alpha * self.b_val
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_tr == 0 || self.b_val == 0 || self.steps == 0 {
            return Err(Error::Config(
                "pool sizes and steps must be positive".into(),
            ));
        }
        if self.alpha < 1 {
            return Err(Error::Config(
                "oversampling factor alpha must be >= 1".into(),
            ));
        }
        if !(0.0 < self.budget_fraction && self.budget_fraction <= 1.0) {
            return Err(Error::Config("budget_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Which gradient feeds the projected second-moment update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    /// The weighted gradient that was actually applied.
    WeightedBatch,
    /// The unweighted mean over the whole candidate pool.
    PoolMean,
    /// Elementwise root-mean-square over the pool's per-sample gradients.
    /// Squaring before the batch reduction keeps coordinates that are large
    /// per sample but cancel in the batch sum visible to the second moment.
    #[default]
    PoolRms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSettings {
    /// Ridge coefficient relative to the mean Gram diagonal.
    pub lambda_rel: f64,
    /// Subtract preconditioned candidates from the greedy residual.
    pub precondition_residual_updates: bool,
    pub moment_source: MomentSource,
    /// Sample the validation batch once and reuse it every step.
    pub fixed_val_set: bool,
    /// Moment updates observed before the preconditioner replaces the
    /// identity. A second-moment EMA over one or two batches is rank
    /// deficient and its inverse square root amplifies whichever
    /// coordinates those batches happened to miss.
    pub precondition_warmup_steps: u64,
    /// Rescale the preconditioner to unit mean before applying it. Selection
    /// argmaxes are invariant to the global scale, and keeping the target at
    /// gradient scale keeps the solved weights (and therefore the applied
    /// update and the moment feedback) at batch-gradient scale.
    pub normalize_preconditioner: bool,
    /// Damping added to the preconditioner denominator as a fraction of the
    /// mean root second moment, bounding how hard low-variance coordinates
    /// can be amplified.
    pub preconditioner_damping: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings {
            lambda_rel: 1e-3,
            precondition_residual_updates: false,
            moment_source: MomentSource::default(),
            fixed_val_set: false,
            precondition_warmup_steps: 3,
            normalize_preconditioner: true,
            preconditioner_damping: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub loss: LossKind,
    pub nonlinearity: Nonlinearity,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: vec![16],
            loss: LossKind::SoftmaxCe,
            nonlinearity: Nonlinearity::Tanh,
        }
    }
}

/// Full simulator configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusSpec,
    pub model: ModelSpec,
    pub optimizer: OptimizerSpec,
    pub projection: ProjectionConfig,
    pub pool: PoolSchedule,
    pub selection: SelectionSettings,
    pub eval_interval: usize,
    /// Fix the corpus across runs instead of deriving it from the master
    /// seed, so seed sweeps vary only initialization and sampling (the way
    /// training-seed ensembles on a real dataset do).
    pub fixed_corpus_seed: Option<u64>,
    /// Fix the model initialization across runs; combined with a fixed
    /// corpus, seed sweeps then isolate selection- and sampling-driven
    /// variance.
    pub fixed_model_seed: Option<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.optimizer.validate()?;
        self.pool.validate()?;
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be positive".into()));
        }
        if self.pool.pool_size() > self.corpus.n {
            return Err(Error::Config(format!(
                "pool of {} exceeds corpus size {}",
                self.pool.pool_size(),
                self.corpus.n
            )));
        }
        if self.pool.val_batch_size() > self.corpus.target_size {
            return Err(Error::Config(format!(
                "validation batch of {} exceeds target set size {}",
                self.pool.val_batch_size(),
                self.corpus.target_size
            )));
        }
        match (self.model.loss, self.corpus.label) {
            (LossKind::SoftmaxCe, crate::simkit::corpus::LabelKind::Classes)
            | (LossKind::SquaredError, crate::simkit::corpus::LabelKind::Regression) => Ok(()),
            _ => Err(Error::Config(
                "model loss kind does not match corpus label kind".into(),
            )),
        }
    }

    pub fn model_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.corpus.d0];
        dims.extend(&self.model.hidden);
        dims.push(self.corpus.classes);
        dims
    }
}

/// One evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub target_loss: f64,
    pub eval_accuracy: f64,
    /// Cumulative clean fraction among trained samples.
    pub selected_clean_fraction: f64,
    /// Matching-objective value of the latest selection.
    pub objective_value: f64,
    /// Entropy of the latest normalized weight vector.
    pub weights_entropy: f64,
    /// Consumed training samples over corpus size.
    pub cumulative_data_fraction: f64,
    /// Empty, or "exhausted" when the stream ran dry.
    pub flag: String,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "step,target_loss,eval_accuracy,\
selected_clean_fraction,objective_value,weights_entropy,cumulative_data_fraction,flag";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.target_loss,
            self.eval_accuracy,
            self.selected_clean_fraction,
            self.objective_value,
            self.weights_entropy,
            self.cumulative_data_fraction,
            self.flag
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::Format(format!(
                "metrics row has {} fields, expected 8",
                parts.len()
            )));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Format(format!("bad float {s:?}: {e}")))
        };
        Ok(MetricsRow {
            step: parts[0]
                .parse()
                .map_err(|e| Error::Format(format!("bad step {:?}: {e}", parts[0])))?,
            target_loss: f(parts[1])?,
            eval_accuracy: f(parts[2])?,
            selected_clean_fraction: f(parts[3])?,
            objective_value: f(parts[4])?,
            weights_entropy: f(parts[5])?,
            cumulative_data_fraction: f(parts[6])?,
            flag: parts[7].to_string(),
        })
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    /// A negative weight was applied at least once (unbounded variant).
    pub negative_weights_applied: bool,
    pub steps_executed: usize,
    pub samples_consumed: usize,
}

fn entropy_of(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().map(|w| w.abs()).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &w in weights {
        let p = w.abs() / total;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Draw `count` distinct elements from `pool` by a partial Fisher-Yates
/// shuffle, mutating the pool's order.
fn draw_without_replacement(pool: &mut [usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(count <= pool.len());
    for i in 0..count {
        let j = i + rng.random_range(0..pool.len() - i);
        pool.swap(i, j);
    }
    pool[..count].to_vec()
}

fn normalize_to_unit_mean(d: &mut Preconditioner) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in &d.per_layer {
        sum += m.as_slice().iter().sum::<f64>();
        count += m.as_slice().len();
    }
    let mean = sum / count.max(1) as f64;
    if mean > 0.0 && mean.is_finite() {
        for m in d.per_layer.iter_mut() {
            for v in m.as_mut_slice() {
                *v /= mean;
            }
        }
    }
}

/// Weighted sum of projected factor outer products, the projected-space
/// image of the applied batch gradient.
fn projected_batch_gradient(
    shapes: &[(usize, usize)],
    samples: &[ProjectedSample],
    weights: &[(usize, f64)],
) -> Vec<Mat> {
    let mut acc: Vec<Mat> = shapes.iter().map(|&(k1, k2)| Mat::zeros(k1, k2)).collect();
    for &(pos, w) in weights {
        for (a, pair) in acc.iter_mut().zip(&samples[pos].layers) {
            a.add_scaled(&pair.factor_outer(), w);
        }
    }
    acc
}

/// Elementwise √(meanᵢ Fᵢ²) over the pool; squaring this inside the moment
/// recurrence yields the mean per-sample squared gradient.
fn pool_rms_gradient(shapes: &[(usize, usize)], samples: &[ProjectedSample]) -> Vec<Mat> {
    let mut acc: Vec<Mat> = shapes.iter().map(|&(k1, k2)| Mat::zeros(k1, k2)).collect();
    for s in samples {
        for (a, pair) in acc.iter_mut().zip(&s.layers) {
            let outer = pair.factor_outer();
            for (av, ov) in a.as_mut_slice().iter_mut().zip(outer.as_slice()) {
                *av += ov * ov;
            }
        }
    }
    let n = samples.len().max(1) as f64;
    for a in acc.iter_mut() {
        for v in a.as_mut_slice() {
            *v = (*v / n).sqrt();
        }
    }
    acc
}

/// Run the online loop for one (config, strategy, seed) triple.
pub fn run_online(cfg: &RunConfig, strategy: Strategy, master_seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let corpus_seed = cfg
        .fixed_corpus_seed
        .unwrap_or_else(|| mix_seed(master_seed, stream::CORPUS));
    let corpus = gen_corpus(corpus_seed, &cfg.corpus)?;
    let model_seed = cfg.fixed_model_seed.unwrap_or(master_seed);
    let mut model_rng = sub_rng(model_seed, stream::MODEL_INIT);
    let mut model = LinearStackModel::new_random(
        &cfg.model_dims(),
        cfg.model.loss,
        cfg.model.nonlinearity,
        &mut model_rng,
    )?;
    let layer_shapes = model.projection_shapes();
    let spec = if cfg.projection.identity {
        ProjectionSpec::identity(&layer_shapes)
    } else {
        ProjectionSpec::new(
            mix_seed(master_seed, stream::PROJECTION),
            cfg.projection.distribution,
            &layer_shapes,
            cfg.projection.k1,
            cfg.projection.k2,
        )?
    };
    let proj_shapes: Vec<(usize, usize)> = spec.projected_shapes();

    let opt = cfg.optimizer;
    let mut adam = AdamState::new(model.param_count(), opt.beta1, opt.beta2, opt.eps)?;
    let mut pm = ProjectedMoment::new(&proj_shapes, opt.beta2, opt.eps)?;

    let mut pool_rng = sub_rng(master_seed, stream::POOL_ORDER);
    let mut val_rng = sub_rng(master_seed, stream::VAL_SAMPLING);
    let mut strat_rng = sub_rng(master_seed, stream::STRATEGY);

    let pool_size = cfg.pool.pool_size();
    let val_size = cfg.pool.val_batch_size();
    let budget_samples = (cfg.pool.budget_fraction * cfg.corpus.n as f64).floor() as usize;

    let mut available: Vec<usize> = (0..cfg.corpus.n).collect();
    let fixed_val: Option<Vec<usize>> = if cfg.selection.fixed_val_set {
        let mut idx: Vec<usize> = (0..corpus.target_set.len()).collect();
        Some(draw_without_replacement(&mut idx, val_size, &mut val_rng))
    } else {
        None
    };

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut consumed = 0usize;
    let mut consumed_clean = 0usize;
    let mut negative_weights_applied = false;
    let mut last_outcome: Option<SelectionOutcome> = None;
    let mut steps_executed = 0usize;
    let mut exhausted = false;

    let emit = |model: &LinearStackModel,
                step: usize,
                consumed: usize,
                consumed_clean: usize,
                outcome: &Option<SelectionOutcome>,
                flag: &str|
     -> Result<MetricsRow> {
        let eval = evaluate(model, &corpus.target_set)?;
        let (objective, entropy) = match outcome {
            Some(o) => (o.objective, entropy_of(&o.weights)),
            None => (f64::NAN, 0.0),
        };
        Ok(MetricsRow {
            step,
            target_loss: eval.loss,
            eval_accuracy: eval.accuracy,
            selected_clean_fraction: if consumed > 0 {
                consumed_clean as f64 / consumed as f64
            } else {
                0.0
            },
            objective_value: objective,
            weights_entropy: entropy,
            cumulative_data_fraction: consumed as f64 / cfg.corpus.n as f64,
            flag: flag.to_string(),
        })
    };

    for step in 1..=cfg.pool.steps {
        if consumed + cfg.pool.b_tr > budget_samples {
            break;
        }
        if available.len() < pool_size {
            exhausted = true;
            break;
        }

        let pool_ids = draw_without_replacement(&mut available, pool_size, &mut pool_rng);
        let val_ids: Vec<usize> = match &fixed_val {
            Some(ids) => ids.clone(),
            None => {
                let mut idx: Vec<usize> = (0..corpus.target_set.len()).collect();
                draw_without_replacement(&mut idx, val_size, &mut val_rng)
            }
        };

        let mut pool_grads: Vec<SampleGradient> = Vec::with_capacity(pool_size);
        for &id in &pool_ids {
            pool_grads.push(model.per_sample_backward(&corpus.train[id])?.0);
        }
        let mut val_proj: Vec<ProjectedSample> = Vec::with_capacity(val_size);
        for &vid in &val_ids {
            let (grad, _) = model.per_sample_backward(&corpus.target_set[vid])?;
            val_proj.push(project_sample(&grad, &spec)?);
        }
        let pool_proj: Vec<ProjectedSample> = pool_grads
            .iter()
            .map(|g| project_sample(g, &spec))
            .collect::<Result<_>>()?;

        // Summed validation target: the folded aggregate itself. Keeping the
        // sum (rather than the batch mean) leaves each greedy subtraction a
        // small perturbation of the residual, so multi-pick filtering stays
        // target-driven.
        let raw_target = val_aggregate(&val_proj)?;

        // SGD updates are not preconditioned. For Adam the preconditioner
        // only enters once the moment EMA has seen enough batches; until
        // then the identity (argmax-equivalent to any uniform scaling)
        // stands in.
        let precond = match opt.kind {
            OptimizerKind::Adam if pm.t >= cfg.selection.precondition_warmup_steps.max(1) => {
                let mut d = linearized_preconditioner_damped(
                    &pm,
                    opt.beta1,
                    cfg.selection.preconditioner_damping,
                )?;
                if cfg.selection.normalize_preconditioner {
                    normalize_to_unit_mean(&mut d);
                }
                Some(d)
            }
            _ => None,
        };
        let identity_d = Preconditioner::identity(&proj_shapes);
        let d = precond.as_ref().unwrap_or(&identity_d);
        let precond_agg = precondition_target(&raw_target, d)?;

        let ctx = SelectionContext {
            candidates: &pool_proj,
            raw_target: &raw_target,
            precond_target: &precond_agg,
            budget: cfg.pool.b_tr,
            lambda_rel: cfg.selection.lambda_rel,
            residual_preconditioner: if cfg.selection.precondition_residual_updates {
                Some(d)
            } else {
                None
            },
        };
        let outcome = run_strategy(strategy, &ctx, &mut strat_rng)?;
        if outcome.has_negative_weight() {
            negative_weights_applied = true;
        }

        // True weighted parameter gradient from the unprojected factors.
        let trained: Vec<(usize, f64)> = outcome.trained().collect();
        let mut param_grad: Vec<Mat> = model
            .weights
            .iter()
            .map(|w| Mat::zeros(w.rows(), w.cols()))
            .collect();
        for &(pos, w) in &trained {
            for (acc, pair) in param_grad.iter_mut().zip(&pool_grads[pos].layers) {
                acc.add_scaled(&pair.factor_outer(), w);
            }
        }

        let lr = opt.lr_at(step, cfg.pool.steps);
        let deltas = match opt.kind {
            OptimizerKind::Sgd => {
                let flat = LinearStackModel::flatten(&param_grad);
                model.unflatten(&sgd_apply(&flat, lr)?)?
            }
            OptimizerKind::Adam => {
                let flat = LinearStackModel::flatten(&param_grad);
                model.unflatten(&adam_update(&mut adam, &flat, lr)?)?
            }
        };
        model.apply_delta(&deltas)?;

        if opt.kind == OptimizerKind::Adam {
            let moment_grad = match cfg.selection.moment_source {
                MomentSource::WeightedBatch => {
                    projected_batch_gradient(&proj_shapes, &pool_proj, &trained)
                }
                MomentSource::PoolMean => {
                    let uniform: Vec<(usize, f64)> = (0..pool_proj.len())
                        .map(|i| (i, 1.0 / pool_proj.len() as f64))
                        .collect();
                    projected_batch_gradient(&proj_shapes, &pool_proj, &uniform)
                }
                MomentSource::PoolRms => pool_rms_gradient(&proj_shapes, &pool_proj),
            };
            pm.update(&moment_grad)?;
        }

        // Consume trained samples; everything else returns to the stream.
        let trained_positions: Vec<usize> = trained.iter().map(|&(pos, _)| pos).collect();
        for &pos in &trained_positions {
            let id = pool_ids[pos];
            consumed += 1;
            if corpus.train[id].quality == Quality::Clean {
                consumed_clean += 1;
            }
        }
        {
            let drop_ids: Vec<usize> = trained_positions.iter().map(|&pos| pool_ids[pos]).collect();
            available.retain(|id| !drop_ids.contains(id));
        }

        steps_executed = step;
        last_outcome = Some(outcome);
        if step % cfg.eval_interval == 0 {
            rows.push(emit(
                &model,
                step,
                consumed,
                consumed_clean,
                &last_outcome,
                "",
            )?);
        }
    }

    // Always close with a final row; flag it when the stream ran dry.
    let final_flag = if exhausted { "exhausted" } else { "" };
    let needs_final = rows.last().is_none_or(|r| r.step != steps_executed) || exhausted;
    if needs_final {
        rows.push(emit(
            &model,
            steps_executed,
            consumed,
            consumed_clean,
            &last_outcome,
            final_flag,
        )?);
    }

    Ok(RunResult {
        rows,
        negative_weights_applied,
        steps_executed,
        samples_consumed: consumed,
    })
}
