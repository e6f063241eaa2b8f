//! `gridcast` command line: scenario generation, training, evaluation,
//! variant comparison, and attention export.
//!
//! Exit codes: 0 success, 2 usage/config/data error, 3 numeric failure.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridcast_core::checkpoint::{
    apply_params, load_checkpoint, save_checkpoint, CheckpointMeta,
};
use gridcast_core::compare::{run_comparison, write_aggregate_csv, write_runs_csv, Variant};
use gridcast_core::config::RunConfig;
use gridcast_core::data::{
    load_scenario, prepare_with_scaler, prepare_dataset, save_scenario, CityScenario,
    PreparedDataset,
};
use gridcast_core::error::Error;
use gridcast_core::export::{attention_geojson, attention_rows, write_attention_csv};
use gridcast_core::graph::ViewKind;
use gridcast_core::model::{build_graphs, AcmvModel, FusionKind, TrainReport};
use gridcast_core::synth::generate_city;

use manifest::Manifest;

#[derive(Parser)]
#[command(
    name = "gridcast",
    version,
    about = "Multi-view graph forecaster for gridded population series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario bundle.
    Synth {
        /// TOML run config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for all generator randomness (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the scenario bundle.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a scenario and write the best checkpoint.
    Train {
        /// Scenario bundle directory (from `synth` or hand-authored).
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for init and shuffling (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Model variant: acmv, mv-avg, gru, dist, poi, transport, or a
        /// `+`-joined pair.
        #[arg(long, default_value = "acmv")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a scenario's test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score several variants across seeds.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma list of variant names, or a preset: `baselines`, `graphs`.
        #[arg(long)]
        variants: String,
        /// Comma list of seeds.
        #[arg(long)]
        seeds: String,
        /// Worker threads (0 = one per CPU).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-region fusion weights over test-split intervals.
    ExportAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// First target time index (defaults to the test split start).
        #[arg(long)]
        from: Option<usize>,
        /// Last target time index, inclusive (defaults to the last target).
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> gridcast_core::Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => cmd_synth(config, seed, &out),
        Command::Train {
            scenario,
            config,
            seed,
            variant,
            out,
        } => cmd_train(&scenario, config, seed, &variant, &out),
        Command::Evaluate {
            checkpoint,
            scenario,
            out,
        } => cmd_evaluate(&checkpoint, &scenario, &out),
        Command::Compare {
            scenario,
            config,
            variants,
            seeds,
            jobs,
            out,
        } => cmd_compare(&scenario, config, &variants, &seeds, jobs, &out),
        Command::ExportAttention {
            checkpoint,
            scenario,
            from,
            to,
            out,
        } => cmd_export_attention(&checkpoint, &scenario, from, to, &out),
    }
}

fn load_config(path: &Option<PathBuf>) -> gridcast_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_synth(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: &Path,
) -> gridcast_core::Result<()> {
    let cfg = load_config(&config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let scenario = generate_city(&cfg.synth, seed)?;
    save_scenario(&scenario, out)?;

    let mut manifest = Manifest::new("synth");
    manifest.config_path = config.map(|p| p.display().to_string());
    manifest.seed = Some(seed);
    for name in ["meta.toml", "series.csv", "contexts.csv", "poi.csv", "transport.csv"] {
        manifest.add_output(&out.join(name))?;
    }
    manifest.write(out)?;
    println!(
        "wrote scenario: {} regions, {} frames, seed {seed} -> {}",
        scenario.node_count(),
        scenario.len(),
        out.display()
    );
    Ok(())
}

fn write_epochs_csv(path: &Path, report: &TrainReport) -> gridcast_core::Result<()> {
    let mut text = String::from("epoch,train_loss,val_mae,val_rmse,val_wape,best\n");
    for e in &report.epochs {
        let best = if Some(e.epoch) == report.best_epoch { 1 } else { 0 };
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_mae, e.val_rmse, e.val_wape, best
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

fn cmd_train(
    scenario_dir: &Path,
    config: Option<PathBuf>,
    seed: Option<u64>,
    variant: &str,
    out: &Path,
) -> gridcast_core::Result<()> {
    let cfg = load_config(&config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let scenario = load_scenario(scenario_dir)?;
    let prepared = prepare_dataset(&scenario, cfg.model.window, cfg.split)?;

    let parsed = Variant::parse(variant)?;
    let (mut model, views, fusion) = match &parsed {
        Variant::TemporalGru => (
            AcmvModel::temporal_only(&cfg.model, scenario.node_count(), seed)?,
            Vec::new(),
            FusionKind::Average,
        ),
        Variant::Model { views, fusion } => {
            let graphs = build_graphs(&scenario, &cfg.graphs)?;
            (
                AcmvModel::new(&cfg.model, &graphs, views, *fusion, seed)?,
                views.clone(),
                *fusion,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "variant '{}' is not trainable; pick a model variant",
                other.name()
            )))
        }
    };

    let report = model.train(
        &prepared.train,
        &prepared.val,
        &prepared.scaler,
        &cfg.train,
        seed,
    )?;

    fs::create_dir_all(out)?;
    let epochs_path = out.join("epochs.csv");
    write_epochs_csv(&epochs_path, &report)?;

    let ckpt_path = out.join("model.ckpt");
    let meta = CheckpointMeta {
        node_count: scenario.node_count(),
        views: views.iter().map(|v| v.name().to_string()).collect(),
        fusion,
        model: cfg.model.clone(),
        graph: cfg.graphs,
        split: cfg.split,
        scaler: prepared.scaler,
        seed,
    };
    save_checkpoint(&ckpt_path, &meta, model.store())?;

    let mut manifest = Manifest::new("train");
    manifest.config_path = config.map(|p| p.display().to_string());
    manifest.seed = Some(seed);
    manifest.add_input_dir(scenario_dir)?;
    manifest.add_output(&epochs_path)?;
    manifest.add_output(&ckpt_path)?;
    manifest.wall_time_s = Some(report.wall_time_s);
    manifest.write(out)?;

    let best = report.best_epoch.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
    let last = report.epochs.last();
    println!(
        "trained {variant}: {} epochs, best epoch {best}, val MAE {:.3} -> {}",
        report.epochs.len(),
        last.map(|e| e.val_mae).unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

/// Rebuilds the model a checkpoint describes and loads its parameters.
fn restore_model(
    meta: &CheckpointMeta,
    params: &[(String, gridcast_core::ndarray::Array2<f64>)],
    scenario: &CityScenario,
) -> gridcast_core::Result<(AcmvModel, PreparedDataset)> {
    if meta.node_count != scenario.node_count() {
        return Err(Error::Config(format!(
            "checkpoint was trained on {} regions, scenario has {}",
            meta.node_count,
            scenario.node_count()
        )));
    }
    let mut model = if meta.views.is_empty() {
        AcmvModel::temporal_only(&meta.model, scenario.node_count(), meta.seed)?
    } else {
        let views = meta
            .views
            .iter()
            .map(|v| ViewKind::parse(v))
            .collect::<gridcast_core::Result<Vec<_>>>()?;
        let graphs = build_graphs(scenario, &meta.graph)?;
        AcmvModel::new(&meta.model, &graphs, &views, meta.fusion, meta.seed)?
    };
    apply_params(model.store_mut(), params)?;
    let prepared = prepare_with_scaler(scenario, meta.model.window, meta.split, meta.scaler)?;
    Ok((model, prepared))
}

fn cmd_evaluate(
    checkpoint: &Path,
    scenario_dir: &Path,
    out: &Path,
) -> gridcast_core::Result<()> {
    let (meta, params) = load_checkpoint(checkpoint)?;
    let scenario = load_scenario(scenario_dir)?;
    let (model, prepared) = restore_model(&meta, &params, &scenario)?;

    let result =
        gridcast_core::model::evaluate_model(&model, &prepared.test, &prepared.scaler)?;

    fs::create_dir_all(out)?;
    let metrics_path = out.join("metrics.csv");
    let mut text = String::from("scope,n,mae,rmse,wape\n");
    text.push_str(&format!(
        "aggregate,,{},{},{}\n",
        result.mae, result.rmse, result.wape
    ));
    for (n, mae) in result.per_region_mae.iter().enumerate() {
        text.push_str(&format!("region,{n},{mae},,\n"));
    }
    fs::write(&metrics_path, text)?;

    let mut manifest = Manifest::new("evaluate");
    manifest.add_input(checkpoint)?;
    manifest.add_input_dir(scenario_dir)?;
    manifest.add_output(&metrics_path)?;
    manifest.write(out)?;

    println!(
        "test split: MAE {:.3}, RMSE {:.3}, WAPE {:.3}% -> {}",
        result.mae,
        result.rmse,
        result.wape,
        metrics_path.display()
    );
    Ok(())
}

fn cmd_compare(
    scenario_dir: &Path,
    config: Option<PathBuf>,
    variants: &str,
    seeds: &str,
    jobs: usize,
    out: &Path,
) -> gridcast_core::Result<()> {
    let cfg = load_config(&config)?;
    let scenario = load_scenario(scenario_dir)?;

    let variant_list: Vec<Variant> = match Variant::preset(variants) {
        Some(list) => list,
        None => variants
            .split(',')
            .map(|s| Variant::parse(s.trim()))
            .collect::<gridcast_core::Result<Vec<_>>>()?,
    };
    let seed_list: Vec<u64> = seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed '{s}'")))
        })
        .collect::<gridcast_core::Result<Vec<_>>>()?;

    let cmp = run_comparison(&scenario, &variant_list, &seed_list, &cfg, jobs)?;

    fs::create_dir_all(out)?;
    let runs_path = out.join("runs.csv");
    let mut buf = Vec::new();
    write_runs_csv(&cmp.runs, &mut buf)?;
    fs::write(&runs_path, buf)?;
    let agg_path = out.join("aggregate.csv");
    let mut buf = Vec::new();
    write_aggregate_csv(&cmp.aggregates, &mut buf)?;
    fs::write(&agg_path, buf)?;

    let mut manifest = Manifest::new("compare");
    manifest.config_path = config.map(|p| p.display().to_string());
    manifest.seeds = Some(seed_list.clone());
    manifest.add_input_dir(scenario_dir)?;
    manifest.add_output(&runs_path)?;
    manifest.add_output(&agg_path)?;
    manifest.write(out)?;

    for row in &cmp.aggregates {
        println!(
            "{:<16} runs={} MAE {:.3} (±{:.3}) RMSE {:.3} WAPE {:.3}%",
            row.variant, row.runs, row.mean_mae, row.std_mae, row.mean_rmse, row.mean_wape
        );
    }
    let failures: Vec<&gridcast_core::compare::RunRecord> =
        cmp.runs.iter().filter(|r| r.outcome.is_err()).collect();
    for f in &failures {
        eprintln!(
            "run failed: {} seed {}: {}",
            f.variant,
            f.seed,
            f.outcome.as_ref().unwrap_err()
        );
    }
    if cmp.aggregates.is_empty() {
        return Err(Error::Numeric("every comparison run failed".into()));
    }
    Ok(())
}

fn cmd_export_attention(
    checkpoint: &Path,
    scenario_dir: &Path,
    from: Option<usize>,
    to: Option<usize>,
    out: &Path,
) -> gridcast_core::Result<()> {
    let (meta, params) = load_checkpoint(checkpoint)?;
    let scenario = load_scenario(scenario_dir)?;
    let (model, prepared) = restore_model(&meta, &params, &scenario)?;

    let targets: Vec<usize> = prepared
        .test
        .iter()
        .map(|w| w.target.time_index)
        .collect();
    let (lo, hi) = (
        *targets.first().expect("nonempty test split"),
        *targets.last().expect("nonempty test split"),
    );
    let from = from.unwrap_or(lo);
    let to = to.unwrap_or(hi);
    if from < lo || to > hi || from > to {
        return Err(Error::Config(format!(
            "requested range [{from}, {to}] outside test-split targets [{lo}, {hi}]"
        )));
    }

    let mut rows = Vec::new();
    for window in &prepared.test {
        let t = window.target.time_index;
        if t < from || t > to {
            continue;
        }
        let (_, weights) = model.predict(window, &prepared.scaler)?;
        rows.extend(attention_rows(t, &weights));
    }

    fs::create_dir_all(out)?;
    let csv_path = out.join("attention.csv");
    let mut buf = Vec::new();
    write_attention_csv(&rows, &mut buf)?;
    fs::write(&csv_path, buf)?;
    let gj_path = out.join("attention.geojson");
    let gj = attention_geojson(&scenario.grid, &rows);
    fs::write(&gj_path, serde_json::to_string_pretty(&gj).unwrap())?;

    let mut manifest = Manifest::new("export-attention");
    manifest.add_input(checkpoint)?;
    manifest.add_input_dir(scenario_dir)?;
    manifest.add_output(&csv_path)?;
    manifest.add_output(&gj_path)?;
    manifest.write(out)?;

    println!(
        "exported {} weight rows over targets [{from}, {to}] -> {}",
        rows.len(),
        out.display()
    );
    Ok(())
}
