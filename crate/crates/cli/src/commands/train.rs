use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use so3sym::bingham::quantile;
use so3sym::nn::{summarize, train_experiment, CurveRow, RepresentationHead, Split, TrainConfig};

use super::{out_dir, write_text};
use crate::svg::{percentile_bands, Series};
use crate::{io, Globals, Status};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Training configuration (JSON).
    config: PathBuf,
    /// Worker threads for running trials in parallel (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Skip writing trained models.
    #[arg(long)]
    no_models: bool,
}

pub fn load_config(path: &PathBuf) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cfg: TrainConfig = serde_json::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))?;
    Ok(cfg)
}

fn median_of(values: &[f64]) -> f64 {
    quantile(values, 0.5).unwrap_or(f64::NAN)
}

/// Per-epoch median across trials of each percentile, for one head and split.
fn series(rows: &[CurveRow], head: RepresentationHead, split: Split) -> Series {
    let mut by_epoch: BTreeMap<usize, Vec<&CurveRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.head == head && r.split == split) {
        by_epoch.entry(r.epoch).or_default().push(r);
    }
    let points = by_epoch
        .into_iter()
        .map(|(e, rs)| {
            let pick = |f: fn(&CurveRow) -> f64| median_of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            (e as f64, pick(|r| r.summary.p10), pick(|r| r.summary.median), pick(|r| r.summary.p90))
        })
        .collect();
    Series { label: head.name().to_string(), points }
}

pub fn run(globals: &Globals, args: Args) -> Result<Status> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let heads = cfg.head.resolve()?;
    let dir = out_dir(&globals.out, "out")?;

    let res = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()?
            .install(|| train_experiment(&cfg))?,
        None => train_experiment(&cfg)?,
    };

    io::write_results(&dir.join("results.csv"), &res.rows)?;
    for split in [Split::Test, Split::Train] {
        let s: Vec<Series> = heads.iter().map(|h| series(&res.rows, *h, split)).collect();
        if s.iter().all(|x| x.points.is_empty()) {
            continue;
        }
        let title = format!("{} error, φmax = {}°, {} loss", split.name(), cfg.phi_max_deg, format!("{:?}", cfg.loss).to_lowercase());
        write_text(&dir.join(format!("curves_{}.svg", split.name())), &percentile_bands(&title, "angular error (deg)", &s))?;
    }
    if !args.no_models {
        let models = dir.join("models");
        std::fs::create_dir_all(&models)?;
        for o in &res.outcomes {
            let path = models.join(format!("trial{}_{}.json", o.trial, o.head.name()));
            write_text(&path, &serde_json::to_string(&o.model)?)?;
        }
    }

    println!("{} trial(s), {} epoch(s), φmax = {}°, seed {}", cfg.trials, cfg.epochs, cfg.phi_max_deg, cfg.seed);
    println!("{:<6} {:>14} {:>14} {:>12}", "head", "median (deg)", "p90 (deg)", "degenerate");
    for h in &heads {
        let outs: Vec<_> = res.outcomes.iter().filter(|o| o.head == *h).collect();
        let sums: Vec<_> = outs.iter().filter_map(|o| summarize(&o.final_test_errors)).collect();
        let med = median_of(&sums.iter().map(|s| s.median).collect::<Vec<_>>());
        let p90 = median_of(&sums.iter().map(|s| s.p90).collect::<Vec<_>>());
        let degenerate: usize = outs.iter().map(|o| o.degenerate_train).sum();
        println!("{:<6} {med:>14.3} {p90:>14.3} {degenerate:>12}", h.name());
    }
    println!("wrote {}", dir.display());
    Ok(Status::Ok)
}
