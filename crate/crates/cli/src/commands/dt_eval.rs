use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use so3sym::nn::{dt_evaluate, Corruption, DtSettings, TrainedModel};

use crate::io::{write_dt_samples, DtRowContext};
use crate::{Globals, Status};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Trained model JSON written by `train` (must use the `A` head).
    model: PathBuf,
    /// none | noise | shuffle | zero
    #[arg(long, default_value = "noise")]
    corruption: Corruption,
    /// Training-trace quantile(s) used as threshold; repeatable.
    #[arg(long = "q", default_values_t = vec![0.75])]
    quantiles: Vec<f64>,
    /// Clean samples used to calibrate the threshold.
    #[arg(long, default_value_t = 1000)]
    calibration: usize,
    /// Size of the mixed test set.
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    /// Fraction of the test set that is corrupted.
    #[arg(long, default_value_t = 0.5)]
    corrupt_fraction: f64,
}

pub fn run(globals: &Globals, args: Args) -> Result<Status> {
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?;
    let mut model: TrainedModel =
        serde_json::from_str(&text).with_context(|| format!("{}: not a trained model", args.model.display()))?;
    if let Some(seed) = globals.seed {
        model.seed = seed;
    }
    if model.head != so3sym::nn::RepresentationHead::SymA {
        bail!("dispersion thresholding needs a model trained with the `A` head, got `{}`", model.head);
    }
    if args.quantiles.is_empty() {
        bail!("at least one --q is required");
    }
    println!(
        "model {} (head {}, trial {}, φmax {}°), corruption {}, {} test samples",
        args.model.display(),
        model.head,
        model.trial,
        model.phi_max_deg,
        args.corruption.name(),
        args.test_size
    );
    println!(
        "{:>6} {:>10} {:>16} {:>16} {:>14} {:>14} {:>14}",
        "q", "kept (%)", "mean err (deg)", "kept err (deg)", "precision (%)", "trace clean", "trace corrupt"
    );
    for &q in &args.quantiles {
        let settings = DtSettings {
            corruption: args.corruption,
            quantile: q,
            calibration_size: args.calibration,
            test_size: args.test_size,
            corrupt_fraction: args.corrupt_fraction,
        };
        let r = dt_evaluate(&model, &settings)?;
        let precision = r.precision.map_or_else(|| "—".to_string(), |p| format!("{p:.1}"));
        println!(
            "{q:>6} {:>10.1} {:>16.3} {:>16.3} {precision:>14} {:>14.4} {:>14.4}",
            r.kept_pct, r.mean_error_all, r.mean_error_kept, r.mean_trace_clean, r.mean_trace_corrupted
        );
        if let Some(dir) = &globals.out {
            std::fs::create_dir_all(dir)?;
            let ctx = DtRowContext {
                trial: model.trial,
                seed: model.seed,
                lr: model.lr,
                head: model.head.name(),
                corruption: args.corruption.name(),
                quantile: q,
            };
            write_dt_samples(&dir.join(format!("dt_{}_q{q}.csv", args.corruption.name())), &ctx, &r.samples)?;
        }
    }
    Ok(Status::Ok)
}
