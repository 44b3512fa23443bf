//! Out-of-distribution rejection for trained SymA regressors via
//! dispersion thresholding.

use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::experiment::{Batch, TrainedModel};
use super::head::RepresentationHead;
use super::loss::RotationTarget;
use crate::bingham::{dt_classify, quantile, DtDecision};
use crate::error::{Error, Result};
use crate::rng::{gaussian3, role, seeded, stream_id, StreamRng};
use crate::so3::d_ang_deg;
use crate::wahba::{sample_synthetic, Correspondences, Pair};

/// Extra observation noise of a `Noise` corruption, as a multiple of σ.
pub const NOISE_INFLATION: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    #[default]
    None,
    /// Adds noise with 100× the nominal standard deviation to every `vᵢ`.
    Noise,
    /// Permutes the `vᵢ`, breaking the correspondences.
    Shuffle,
    /// Zeroes both vectors of a random half of the pairs.
    Zero,
}

impl Corruption {
    pub fn name(self) -> &'static str {
        match self {
            Corruption::None => "none",
            Corruption::Noise => "noise",
            Corruption::Shuffle => "shuffle",
            Corruption::Zero => "zero",
        }
    }
}

impl FromStr for Corruption {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "noise" => Ok(Self::Noise),
            "shuffle" => Ok(Self::Shuffle),
            "zero" => Ok(Self::Zero),
            other => Err(Error::InvalidConfig(format!("unknown corruption `{other}`"))),
        }
    }
}

pub fn corrupt(c: &Correspondences, kind: Corruption, sigma: f64, rng: &mut StreamRng) -> Result<Correspondences> {
    let mut pairs: Vec<Pair> = c.pairs().to_vec();
    match kind {
        Corruption::None => {}
        Corruption::Noise => {
            let s = NOISE_INFLATION * sigma;
            for p in &mut pairs {
                p.v += gaussian3(rng) * s;
            }
        }
        Corruption::Shuffle => {
            let mut vs: Vec<_> = pairs.iter().map(|p| p.v).collect();
            vs.shuffle(rng);
            for (p, v) in pairs.iter_mut().zip(vs) {
                p.v = v;
            }
        }
        Corruption::Zero => {
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.shuffle(rng);
            for &i in &idx[..pairs.len() / 2] {
                pairs[i].u.fill(0.0);
                pairs[i].v.fill(0.0);
            }
        }
    }
    Correspondences::new(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtSettings {
    pub corruption: Corruption,
    /// Quantile of clean traces used as threshold; `1.0` disables rejection.
    pub quantile: f64,
    pub calibration_size: usize,
    pub test_size: usize,
    /// Fraction of the test set that is corrupted.
    pub corrupt_fraction: f64,
}

impl Default for DtSettings {
    fn default() -> Self {
        Self {
            corruption: Corruption::Noise,
            quantile: 0.75,
            calibration_size: 1000,
            test_size: 1000,
            corrupt_fraction: 0.5,
        }
    }
}

/// Per-sample DT outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtSample {
    pub trace: f64,
    pub kept: bool,
    pub corrupted: bool,
    /// `None` when the prediction is degenerate.
    pub error_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtReport {
    pub threshold: f64,
    pub samples: Vec<DtSample>,
    /// Percentage of test samples kept.
    pub kept_pct: f64,
    pub mean_error_all: f64,
    pub mean_error_kept: f64,
    /// Percentage of rejected samples that are corrupted; `None` when nothing
    /// is rejected.
    pub precision: Option<f64>,
    pub mean_trace_clean: f64,
    pub mean_trace_corrupted: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn traces_and_errors(model: &TrainedModel, batch: &Batch) -> Result<Vec<(f64, Option<f64>)>> {
    let preds = model.predict(&batch.inputs)?;
    preds
        .iter()
        .zip(&batch.targets)
        .map(|(p, t)| {
            let trace = super::head::raw_dispersion_trace(&p.raw)?.0;
            let err = p.output.as_ref().ok().map(|o| d_ang_deg(&o.rot, &t.rot));
            Ok((trace, err))
        })
        .collect()
}

/// Calibrates a threshold on clean inputs from the model's training
/// distribution, then scores a test set in which a fraction is corrupted.
///
/// Streams: calibration `(trial, CALIBRATION, 0)`, test data `(trial,
/// TEST_DATA, 1)`, corruption `(trial, CORRUPTION, 0)`.
pub fn dt_evaluate(model: &TrainedModel, settings: &DtSettings) -> Result<DtReport> {
    if model.head != RepresentationHead::SymA {
        return Err(Error::InvalidConfig(format!(
            "dispersion thresholding needs an `A` head, got `{}`",
            model.head
        )));
    }
    if !(settings.quantile > 0.0 && settings.quantile <= 1.0) {
        return Err(Error::InvalidConfig(format!("DT quantile {} outside (0, 1]", settings.quantile)));
    }
    if !(0.0..=1.0).contains(&settings.corrupt_fraction) {
        return Err(Error::InvalidConfig("corrupt fraction outside [0, 1]".into()));
    }
    if settings.calibration_size == 0 || settings.test_size == 0 {
        return Err(Error::EmptyInput("DT calibration and test sets must be non-empty"));
    }
    let synth = model.synthetic();
    let trial = model.trial;

    let mut cal_rng = seeded(model.seed, stream_id(trial, role::CALIBRATION, 0));
    let cal = super::experiment::sample_batch(&synth, settings.calibration_size, model.input, &mut cal_rng)?;
    let cal_traces: Vec<f64> = traces_and_errors(model, &cal)?.into_iter().map(|(t, _)| t).collect();
    let threshold = if settings.quantile >= 1.0 {
        f64::INFINITY
    } else {
        quantile(&cal_traces, settings.quantile)?
    };

    let mut test_rng = seeded(model.seed, stream_id(trial, role::TEST_DATA, 1));
    let mut corrupt_rng = seeded(model.seed, stream_id(trial, role::CORRUPTION, 0));
    let n_corrupt = if settings.corruption == Corruption::None {
        0
    } else {
        (settings.corrupt_fraction * settings.test_size as f64).round() as usize
    };
    let mut samples = Vec::with_capacity(settings.test_size);
    let mut flags = Vec::with_capacity(settings.test_size);
    for i in 0..settings.test_size {
        let (rot, c) = sample_synthetic(&synth, &mut test_rng)?;
        let corrupted = i < n_corrupt;
        let c = if corrupted { corrupt(&c, settings.corruption, model.sigma, &mut corrupt_rng)? } else { c };
        samples.push((RotationTarget::from_rot(rot), c));
        flags.push(corrupted);
    }
    let batch = Batch::from_samples(&samples, model.input)?;
    let scored = traces_and_errors(model, &batch)?;

    let samples: Vec<DtSample> = scored
        .iter()
        .zip(&flags)
        .map(|(&(trace, error_deg), &corrupted)| DtSample {
            trace,
            // a degenerate prediction has no rotation to keep
            kept: error_deg.is_some() && dt_classify(crate::bingham::DispersionTrace(trace), threshold) == DtDecision::Keep,
            corrupted,
            error_deg,
        })
        .collect();

    let kept = samples.iter().filter(|s| s.kept).count();
    let rejected: Vec<&DtSample> = samples.iter().filter(|s| !s.kept).collect();
    let precision = if rejected.is_empty() {
        None
    } else {
        Some(100.0 * rejected.iter().filter(|s| s.corrupted).count() as f64 / rejected.len() as f64)
    };
    Ok(DtReport {
        threshold,
        kept_pct: 100.0 * kept as f64 / samples.len() as f64,
        mean_error_all: mean(samples.iter().filter_map(|s| s.error_deg)),
        mean_error_kept: mean(samples.iter().filter(|s| s.kept).filter_map(|s| s.error_deg)),
        precision,
        mean_trace_clean: mean(samples.iter().filter(|s| !s.corrupted).map(|s| s.trace)),
        mean_trace_corrupted: mean(samples.iter().filter(|s| s.corrupted).map(|s| s.trace)),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::experiment::{run_trial, LrSpec, TrainConfig};
    use crate::nn::experiment::HeadSelection;
    use crate::wahba::SyntheticConfig;

    fn tiny_model() -> TrainedModel {
        let cfg = TrainConfig {
            epochs: 2,
            batch_rotations: 16,
            matches_per_rotation: 4,
            hidden_widths: vec![16],
            trials: 1,
            batches_per_epoch: 2,
            test_size: 16,
            lr: LrSpec::Fixed(1e-3),
            head: HeadSelection::One("A".into()),
            ..TrainConfig::default()
        };
        run_trial(&cfg, 0, RepresentationHead::SymA).unwrap().model
    }

    #[test]
    fn corruptions_change_what_they_should() {
        let mut rng = seeded(5, 0);
        let synth = SyntheticConfig { num_matches: 8, sigma: 0.01, phi_max: 1.0, seed: 0 };
        let (_, c) = sample_synthetic(&synth, &mut rng).unwrap();
        assert_eq!(corrupt(&c, Corruption::None, 0.01, &mut rng).unwrap(), c);
        let n = corrupt(&c, Corruption::Noise, 0.01, &mut rng).unwrap();
        assert!(n.pairs().iter().zip(c.pairs()).all(|(a, b)| a.u == b.u && a.v != b.v));
        let s = corrupt(&c, Corruption::Shuffle, 0.01, &mut rng).unwrap();
        let mut a: Vec<_> = s.pairs().iter().map(|p| p.v.x).collect();
        let mut b: Vec<_> = c.pairs().iter().map(|p| p.v.x).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        let z = corrupt(&c, Corruption::Zero, 0.01, &mut rng).unwrap();
        assert_eq!(z.pairs().iter().filter(|p| p.u.norm() == 0.0 && p.v.norm() == 0.0).count(), 4);
    }

    #[test]
    fn full_quantile_keeps_everything() {
        let model = tiny_model();
        let settings = DtSettings { quantile: 1.0, calibration_size: 50, test_size: 50, ..DtSettings::default() };
        let r = dt_evaluate(&model, &settings).unwrap();
        let degenerate = r.samples.iter().filter(|s| s.error_deg.is_none()).count();
        if degenerate == 0 {
            assert_eq!(r.kept_pct, 100.0);
            assert_eq!(r.precision, None);
            assert_eq!(r.mean_error_all, r.mean_error_kept);
        }
    }

    #[test]
    fn kept_fraction_tracks_quantile_without_corruption() {
        let model = tiny_model();
        let settings = DtSettings {
            corruption: Corruption::None,
            quantile: 0.5,
            calibration_size: 400,
            test_size: 400,
            ..DtSettings::default()
        };
        let r = dt_evaluate(&model, &settings).unwrap();
        assert!((r.kept_pct - 50.0).abs() < 15.0, "kept {}", r.kept_pct);
        assert!(r.samples.iter().all(|s| !s.corrupted));
    }

    #[test]
    fn rejects_other_heads_and_bad_quantiles() {
        let mut model = tiny_model();
        assert!(dt_evaluate(&model, &DtSettings { quantile: 0.0, ..DtSettings::default() }).is_err());
        model.head = RepresentationHead::UnitQuat;
        assert!(dt_evaluate(&model, &DtSettings::default()).is_err());
    }
}
