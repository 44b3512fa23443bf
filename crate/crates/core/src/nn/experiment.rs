//! Synthetic rotation-regression experiment: every head is trained on the
//! same stream of Wahba instances and scored on a fixed held-out set.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::head::{head_forward, HeadOutput, RepresentationHead};
use super::loss::{loss_eval, LossKind, RotationTarget};
use super::net::DenseNet;
use crate::bingham::quantile;
use crate::error::{Error, Result};
use crate::rng::{log_uniform, role, seeded, stream_id, StreamRng};
use crate::so3::d_ang_deg;
use crate::wahba::{sample_synthetic, Correspondences, SyntheticConfig};

/// A fixed learning rate or a log-uniform range sampled once per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LrSpec {
    Fixed(f64),
    LogUniform([f64; 2]),
}

/// Heads to train: a name, `"all"`, or a list of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HeadSelection {
    One(String),
    Many(Vec<String>),
}

impl HeadSelection {
    pub fn resolve(&self) -> Result<Vec<RepresentationHead>> {
        let names: Vec<&str> = match self {
            HeadSelection::One(s) if s.eq_ignore_ascii_case("all") => {
                return Ok(RepresentationHead::ALL.to_vec());
            }
            HeadSelection::One(s) => vec![s.as_str()],
            HeadSelection::Many(v) => v.iter().map(String::as_str).collect(),
        };
        let mut heads: Vec<RepresentationHead> = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
        heads.sort();
        heads.dedup();
        if heads.is_empty() {
            return Err(Error::InvalidConfig("no heads selected".into()));
        }
        Ok(heads)
    }
}

/// How a correspondence set is presented to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputEncoding {
    /// Raw `(u₁, v₁, u₂, v₂, …)`, 6 values per pair.
    Pairs,
    /// Per-pair outer products `v̂ᵢ ûᵢᵀ` of the unit bearings (column-major),
    /// 9 values per pair; zero vectors stay zero.
    Outer,
    /// Mean of the per-pair outer products, 9 values regardless of the
    /// number of pairs.
    #[default]
    Pooled,
}

impl InputEncoding {
    pub fn dim(self, matches: usize) -> usize {
        match self {
            InputEncoding::Pairs => 6 * matches,
            InputEncoding::Outer => 9 * matches,
            InputEncoding::Pooled => 9,
        }
    }

    pub fn encode(self, c: &Correspondences) -> Vec<f64> {
        match self {
            InputEncoding::Pairs => flatten_pairs(c),
            InputEncoding::Outer => c
                .pairs()
                .iter()
                .flat_map(|p| {
                    let unit = |x: &nalgebra::Vector3<f64>| {
                        let n = x.norm();
                        if n > 0.0 {
                            x / n
                        } else {
                            *x
                        }
                    };
                    let m = unit(&p.v) * unit(&p.u).transpose();
                    m.as_slice().to_vec()
                })
                .collect(),
            InputEncoding::Pooled => {
                let outer = InputEncoding::Outer.encode(c);
                let n = c.len().max(1) as f64;
                (0..9).map(|k| outer.iter().skip(k).step_by(9).sum::<f64>() / n).collect()
            }
        }
    }
}

fn default_lr() -> LrSpec {
    LrSpec::LogUniform([1e-4, 1e-3])
}
fn default_epochs() -> usize {
    50
}
fn default_batch_rotations() -> usize {
    100
}
fn default_matches() -> usize {
    10
}
fn default_phi_max_deg() -> f64 {
    180.0
}
fn default_sigma() -> f64 {
    0.01
}
fn default_head() -> HeadSelection {
    HeadSelection::One("all".into())
}
fn default_hidden() -> Vec<usize> {
    vec![128, 128]
}
fn default_trials() -> usize {
    10
}
fn default_batches_per_epoch() -> usize {
    5
}
fn default_test_size() -> usize {
    500
}

/// Training configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lr")]
    pub lr: LrSpec,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_rotations")]
    pub batch_rotations: usize,
    #[serde(default = "default_matches")]
    pub matches_per_rotation: usize,
    #[serde(default = "default_phi_max_deg")]
    pub phi_max_deg: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_head")]
    pub head: HeadSelection,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_batches_per_epoch")]
    pub batches_per_epoch: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default)]
    pub input: InputEncoding,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lr: default_lr(),
            epochs: default_epochs(),
            batch_rotations: default_batch_rotations(),
            matches_per_rotation: default_matches(),
            phi_max_deg: default_phi_max_deg(),
            sigma: default_sigma(),
            head: default_head(),
            loss: LossKind::default(),
            hidden_widths: default_hidden(),
            trials: default_trials(),
            batches_per_epoch: default_batches_per_epoch(),
            test_size: default_test_size(),
            input: InputEncoding::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self.lr {
            LrSpec::Fixed(lr) if !(lr >= 0.0 && lr.is_finite()) => return bad(format!("lr {lr} must be non-negative")),
            LrSpec::LogUniform([lo, hi]) if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                return bad(format!("lr range [{lo}, {hi}] must satisfy 0 < lo ≤ hi"))
            }
            _ => {}
        }
        if !(self.phi_max_deg > 0.0 && self.phi_max_deg <= 180.0) {
            return bad(format!("phi_max_deg {} outside (0, 180]", self.phi_max_deg));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {} must be non-negative", self.sigma));
        }
        for (name, v) in [
            ("batch_rotations", self.batch_rotations),
            ("matches_per_rotation", self.matches_per_rotation),
            ("trials", self.trials),
            ("batches_per_epoch", self.batches_per_epoch),
            ("test_size", self.test_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        self.head.resolve()?;
        Ok(())
    }

    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            num_matches: self.matches_per_rotation,
            sigma: self.sigma,
            phi_max: self.phi_max_deg.to_radians(),
            seed: self.seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input.dim(self.matches_per_rotation)
    }

    /// Learning rate of `trial`, shared by all heads in that trial.
    pub fn trial_lr(&self, trial: u32) -> f64 {
        match self.lr {
            LrSpec::Fixed(lr) => lr,
            LrSpec::LogUniform([lo, hi]) => {
                let mut rng = seeded(self.seed, stream_id(trial, role::LEARNING_RATE, 0));
                log_uniform(&mut rng, lo, hi)
            }
        }
    }
}

/// Flattens correspondences into a network input `(u₁, v₁, u₂, v₂, …)`.
pub fn flatten_pairs(c: &Correspondences) -> Vec<f64> {
    c.pairs()
        .iter()
        .flat_map(|p| p.u.iter().chain(p.v.iter()).copied().collect::<Vec<_>>())
        .collect()
}

/// A batch of network inputs (one column per sample) with their targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub targets: Vec<RotationTarget>,
}

impl Batch {
    pub fn from_samples(samples: &[(RotationTarget, Correspondences)], encoding: InputEncoding) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput("empty batch"))?;
        let dim = encoding.dim(first.1.len());
        let mut inputs = DMatrix::zeros(dim, samples.len());
        for (j, (_, c)) in samples.iter().enumerate() {
            let flat = encoding.encode(c);
            if flat.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: flat.len() });
            }
            inputs.column_mut(j).copy_from_slice(&flat);
        }
        Ok(Self {
            inputs,
            targets: samples.iter().map(|(t, _)| *t).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn sample_instances(cfg: &SyntheticConfig, n: usize, rng: &mut StreamRng) -> Result<Vec<(RotationTarget, Correspondences)>> {
    (0..n)
        .map(|_| {
            let (rot, c) = sample_synthetic(cfg, rng)?;
            Ok((RotationTarget::from_rot(rot), c))
        })
        .collect()
}

pub fn sample_batch(cfg: &SyntheticConfig, n: usize, encoding: InputEncoding, rng: &mut StreamRng) -> Result<Batch> {
    Batch::from_samples(&sample_instances(cfg, n, rng)?, encoding)
}

/// A trained regressor together with the data model it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub head: RepresentationHead,
    pub net: DenseNet,
    pub matches_per_rotation: usize,
    pub sigma: f64,
    pub phi_max_deg: f64,
    pub seed: u64,
    pub trial: u32,
    pub lr: f64,
    #[serde(default)]
    pub input: InputEncoding,
}

/// Per-sample prediction: raw head input and the head's output (or the
/// reason it has none).
pub struct Prediction {
    pub raw: Vec<f64>,
    pub output: Result<HeadOutput>,
}

impl TrainedModel {
    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            num_matches: self.matches_per_rotation,
            sigma: self.sigma,
            phi_max: self.phi_max_deg.to_radians(),
            seed: self.seed,
        }
    }

    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        let out = self.net.forward(inputs)?.output;
        Ok(out
            .column_iter()
            .map(|c| {
                let raw = c.as_slice().to_vec();
                let output = head_forward(self.head, &raw);
                Prediction { raw, output }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// `{mean, 10th, 50th, 90th}` percentile summary of angular errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
}

pub fn summarize(errors: &[f64]) -> Option<ErrorSummary> {
    if errors.is_empty() {
        return None;
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Some(ErrorSummary {
        mean,
        p10: quantile(errors, 0.1).ok()?,
        median: quantile(errors, 0.5).ok()?,
        p90: quantile(errors, 0.9).ok()?,
    })
}

/// One learning-curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial: u32,
    pub seed: u64,
    pub lr: f64,
    pub epoch: usize,
    pub split: Split,
    pub head: RepresentationHead,
    pub summary: ErrorSummary,
    /// Samples without a unique solution (SymA eigengap below tolerance).
    pub degenerate: usize,
}

/// Everything produced by one `(trial, head)` run.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: u32,
    pub head: RepresentationHead,
    pub lr: f64,
    pub rows: Vec<CurveRow>,
    pub final_test_errors: Vec<f64>,
    pub degenerate_train: usize,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted by `(trial, head, split, epoch)`.
    pub rows: Vec<CurveRow>,
    /// Sorted by `(trial, head)`.
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentResult {
    pub fn outcome(&self, trial: u32, head: RepresentationHead) -> Option<&TrialOutcome> {
        self.outcomes.iter().find(|o| o.trial == trial && o.head == head)
    }
}

/// Angular errors (degrees) on a batch and the number of degenerate samples.
pub fn evaluate(net: &DenseNet, head: RepresentationHead, batch: &Batch) -> Result<(Vec<f64>, usize)> {
    let out = net.forward(&batch.inputs)?.output;
    let mut errors = Vec::with_capacity(batch.len());
    let mut degenerate = 0;
    for (col, target) in out.column_iter().zip(&batch.targets) {
        match head_forward(head, col.as_slice()) {
            Ok(o) => errors.push(d_ang_deg(&o.rot, &target.rot)),
            Err(Error::DegenerateEigenspace { .. } | Error::DegenerateSixD(_) | Error::NearZeroNorm(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((errors, degenerate))
}

/// Statistics of one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub mean_loss: f64,
    pub errors: Vec<f64>,
    pub degenerate: usize,
}

/// Mean-over-batch loss and its gradient with respect to every parameter.
/// Degenerate samples contribute zero gradient and are counted.
pub fn loss_and_grads(net: &DenseNet, head: RepresentationHead, loss: LossKind, batch: &Batch) -> Result<(StepStats, super::net::NetGrads)> {
    let cache = net.forward(&batch.inputs)?;
    let n = batch.len() as f64;
    let mut grad_out = DMatrix::zeros(cache.output.nrows(), cache.output.ncols());
    let mut stats = StepStats { mean_loss: 0.0, errors: Vec::with_capacity(batch.len()), degenerate: 0 };
    for (j, target) in batch.targets.iter().enumerate() {
        let raw = cache.output.column(j);
        let out = match head_forward(head, raw.as_slice()) {
            Ok(o) => o,
            Err(Error::DegenerateEigenspace { .. } | Error::DegenerateSixD(_) | Error::NearZeroNorm(_)) => {
                stats.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (l, upstream) = loss_eval(loss, &out.rot, &out.quat, target);
        stats.mean_loss += l / n;
        stats.errors.push(d_ang_deg(&out.rot, &target.rot));
        let g = match out.backward(&upstream) {
            Ok(g) => g,
            Err(Error::DegenerateEigenspace { .. }) => {
                stats.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (k, v) in g.iter().enumerate() {
            grad_out[(k, j)] = v / n;
        }
    }
    let grads = net.backward(&cache, &grad_out)?;
    Ok((stats, grads))
}

pub fn train_step(net: &mut DenseNet, adam: &mut AdamState, head: RepresentationHead, loss: LossKind, batch: &Batch) -> Result<StepStats> {
    let (stats, grads) = loss_and_grads(net, head, loss, batch)?;
    adam.adam_step(&mut net.params_mut(), &grads.as_slices())?;
    Ok(stats)
}

/// Trains one head for one trial.
///
/// Streams: the network is initialized from `(trial, INIT, 0)` so all heads
/// share hidden-layer weights; training batches come from `(trial,
/// TRAIN_DATA, 0)` so all heads see the same data; the test set comes from
/// `(trial, TEST_DATA, 0)`.
pub fn run_trial(cfg: &TrainConfig, trial: u32, head: RepresentationHead) -> Result<TrialOutcome> {
    let synth = cfg.synthetic();
    let lr = cfg.trial_lr(trial);
    let mut init_rng = seeded(cfg.seed, stream_id(trial, role::INIT, 0));
    let mut net = DenseNet::new_seeded(cfg.input_dim(), &cfg.hidden_widths, head.raw_dim(), &mut init_rng)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(lr));
    let mut train_rng = seeded(cfg.seed, stream_id(trial, role::TRAIN_DATA, 0));
    let mut test_rng = seeded(cfg.seed, stream_id(trial, role::TEST_DATA, 0));
    let test = sample_batch(&synth, cfg.test_size, cfg.input, &mut test_rng)?;

    let row = |epoch: usize, split: Split, errors: &[f64], degenerate: usize| {
        let summary = summarize(errors).unwrap_or(ErrorSummary {
            mean: f64::NAN,
            p10: f64::NAN,
            median: f64::NAN,
            p90: f64::NAN,
        });
        CurveRow { trial, seed: cfg.seed, lr, epoch, split, head, summary, degenerate }
    };

    let mut rows = Vec::with_capacity(2 * cfg.epochs + 1);
    let (mut test_errors, deg) = evaluate(&net, head, &test)?;
    rows.push(row(0, Split::Test, &test_errors, deg));

    let mut degenerate_train = 0;
    for epoch in 1..=cfg.epochs {
        let mut epoch_errors = Vec::with_capacity(cfg.batches_per_epoch * cfg.batch_rotations);
        let mut epoch_degenerate = 0;
        for _ in 0..cfg.batches_per_epoch {
            let batch = sample_batch(&synth, cfg.batch_rotations, cfg.input, &mut train_rng)?;
            let stats = train_step(&mut net, &mut adam, head, cfg.loss, &batch)?;
            epoch_errors.extend(stats.errors);
            epoch_degenerate += stats.degenerate;
        }
        degenerate_train += epoch_degenerate;
        rows.push(row(epoch, Split::Train, &epoch_errors, epoch_degenerate));
        let (errs, deg) = evaluate(&net, head, &test)?;
        rows.push(row(epoch, Split::Test, &errs, deg));
        test_errors = errs;
    }

    Ok(TrialOutcome {
        trial,
        head,
        lr,
        rows,
        final_test_errors: test_errors,
        degenerate_train,
        model: TrainedModel {
            head,
            net,
            matches_per_rotation: cfg.matches_per_rotation,
            sigma: cfg.sigma,
            phi_max_deg: cfg.phi_max_deg,
            seed: cfg.seed,
            trial,
            lr,
            input: cfg.input,
        },
    })
}

/// Runs every `(trial, head)` pair; pairs are independent and run in parallel.
pub fn train_experiment(cfg: &TrainConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let heads = cfg.head.resolve()?;
    let jobs: Vec<(u32, RepresentationHead)> = (0..cfg.trials as u32)
        .flat_map(|t| heads.iter().map(move |h| (t, *h)))
        .collect();
    let mut outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(t, h)| run_trial(cfg, t, h))
        .collect::<Result<_>>()?;
    outcomes.sort_by_key(|o| (o.trial, o.head));
    let mut rows: Vec<CurveRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    rows.sort_by_key(|r| (r.trial, r.head, r.split, r.epoch));
    Ok(ExperimentResult { rows, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_rotations: 16,
            matches_per_rotation: 4,
            hidden_widths: vec![16],
            trials: 2,
            batches_per_epoch: 2,
            test_size: 32,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"seed": 3, "head": "A", "lr": 0.001}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.lr, LrSpec::Fixed(0.001));
        assert_eq!(cfg.head.resolve().unwrap(), vec![RepresentationHead::SymA]);
        assert_eq!(cfg.hidden_widths, vec![128, 128]);
        let cfg: TrainConfig = serde_json::from_str(r#"{"lr": [0.0001, 0.001], "head": ["quat", "6d"], "loss": "quat"}"#).unwrap();
        assert_eq!(cfg.head.resolve().unwrap(), vec![RepresentationHead::UnitQuat, RepresentationHead::SixD]);
        assert_eq!(cfg.loss, LossKind::Quat);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
        let bad = TrainConfig { phi_max_deg: 200.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { head: HeadSelection::One("euler".into()), ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flatten_layout() {
        let mut rng = seeded(1, 0);
        let synth = SyntheticConfig { num_matches: 3, sigma: 0.0, phi_max: 1.0, seed: 0 };
        let (_, c) = sample_synthetic(&synth, &mut rng).unwrap();
        let flat = flatten_pairs(&c);
        assert_eq!(flat.len(), 18);
        assert_eq!(flat[6..9], *c.pairs()[1].u.as_slice());
        assert_eq!(flat[9..12], *c.pairs()[1].v.as_slice());
    }

    #[test]
    fn zero_learning_rate_is_flat() {
        let cfg = TrainConfig { lr: LrSpec::Fixed(0.0), ..small_cfg() };
        let res = train_experiment(&cfg).unwrap();
        for o in &res.outcomes {
            let tests: Vec<_> = o.rows.iter().filter(|r| r.split == Split::Test).collect();
            assert!(tests.windows(2).all(|w| w[0].summary == w[1].summary));
        }
    }

    #[test]
    fn zero_epochs_gives_baseline_only() {
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let res = train_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), cfg.trials * 3);
        assert!(res.rows.iter().all(|r| r.epoch == 0 && r.split == Split::Test));
    }

    #[test]
    fn deterministic() {
        let cfg = small_cfg();
        let a = train_experiment(&cfg).unwrap();
        let b = train_experiment(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.model, y.model);
        }
    }

    #[test]
    fn percentiles_ordered() {
        let res = train_experiment(&small_cfg()).unwrap();
        for r in &res.rows {
            let s = r.summary;
            assert!(s.p10 <= s.median && s.median <= s.p90);
        }
    }
}
