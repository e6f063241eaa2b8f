//! Variant-by-seed comparison runner mirroring the baseline and
//! graph-ablation tables.

use ndarray::Array2;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{prepare_dataset, CityScenario, PreparedDataset};
use crate::error::{Error, Result};
use crate::graph::ViewKind;
use crate::metrics::{evaluate, persistence, EvalResult, HaKey, HistoricalAverage};
use crate::model::{
    build_graphs, evaluate_model, AcmvModel, FusionKind, GraphBundle, TrainReport,
};

/// One comparable forecasting method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    /// Historical average by (day type, hour).
    Ha,
    /// Last observed frame.
    Persistence,
    /// GRU over raw frames plus context, no graphs.
    TemporalGru,
    /// Graph model over a view subset with the given fusion.
    Model {
        views: Vec<ViewKind>,
        fusion: FusionKind,
    },
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::Ha => "ha".into(),
            Variant::Persistence => "persistence".into(),
            Variant::TemporalGru => "gru".into(),
            Variant::Model { views, fusion } => {
                if views.len() == 3 {
                    match fusion {
                        FusionKind::Average => "mv-avg".into(),
                        FusionKind::Attention => "acmv".into(),
                    }
                } else {
                    views
                        .iter()
                        .map(|v| v.name())
                        .collect::<Vec<_>>()
                        .join("+")
                }
            }
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        let v = match s {
            "ha" => Variant::Ha,
            "persistence" => Variant::Persistence,
            "gru" => Variant::TemporalGru,
            "mv-avg" => Variant::Model {
                views: ViewKind::ALL.to_vec(),
                fusion: FusionKind::Average,
            },
            "acmv" => Variant::Model {
                views: ViewKind::ALL.to_vec(),
                fusion: FusionKind::Attention,
            },
            other => {
                let views = other
                    .split('+')
                    .map(ViewKind::parse)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|_| {
                        Error::Config(format!(
                            "unknown variant '{other}'; valid: {}",
                            Self::valid_names().join(", ")
                        ))
                    })?;
                Variant::Model {
                    views,
                    fusion: FusionKind::Attention,
                }
            }
        };
        Ok(v)
    }

    pub fn valid_names() -> Vec<&'static str> {
        vec![
            "ha",
            "persistence",
            "gru",
            "dist",
            "poi",
            "transport",
            "dist+poi",
            "dist+transport",
            "poi+transport",
            "mv-avg",
            "acmv",
        ]
    }

    /// Named variant sets: `baselines` mirrors the method-comparison
    /// table, `graphs` the per-graph ablation table.
    pub fn preset(name: &str) -> Option<Vec<Variant>> {
        let names: &[&str] = match name {
            "baselines" => &["ha", "persistence", "gru", "mv-avg", "acmv"],
            "graphs" => &[
                "dist",
                "poi",
                "transport",
                "dist+poi",
                "dist+transport",
                "poi+transport",
                "acmv",
            ],
            _ => return None,
        };
        Some(names.iter().map(|n| Variant::parse(n).unwrap()).collect())
    }

}

/// Metrics of one (variant, seed) run; failures carry the error text.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub variant: String,
    pub seed: u64,
    pub outcome: std::result::Result<EvalResult, String>,
}

/// Per-variant mean and standard deviation over successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: String,
    pub runs: usize,
    pub mean_mae: f64,
    pub std_mae: f64,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub mean_wape: f64,
    pub std_wape: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Historical-average baseline on the test split; the key statistics are
/// fitted on the training segment's frames only.
pub fn evaluate_ha(scenario: &CityScenario, prepared: &PreparedDataset) -> Result<EvalResult> {
    let train_frames = &scenario.series[..prepared.train_frame_count];
    let ha = HistoricalAverage::fit(train_frames, &scenario.contexts)?;
    let n = ha.node_count();
    let mut pred = Array2::zeros((prepared.raw_test.len(), n));
    let mut truth = Array2::zeros((prepared.raw_test.len(), n));
    for (i, w) in prepared.raw_test.iter().enumerate() {
        let p = ha.predict(HaKey::of(w.target_context()))?;
        pred.row_mut(i).assign(&p);
        truth.row_mut(i).assign(&w.target.values);
    }
    evaluate(&pred, &truth)
}

/// Persistence baseline on the test split.
pub fn evaluate_persistence(prepared: &PreparedDataset) -> Result<EvalResult> {
    let first = prepared
        .raw_test
        .first()
        .ok_or_else(|| Error::EmptyDataset("empty test split".into()))?;
    let n = first.target.values.len();
    let mut pred = Array2::zeros((prepared.raw_test.len(), n));
    let mut truth = Array2::zeros((prepared.raw_test.len(), n));
    for (i, w) in prepared.raw_test.iter().enumerate() {
        pred.row_mut(i).assign(&persistence(w)?);
        truth.row_mut(i).assign(&w.target.values);
    }
    evaluate(&pred, &truth)
}

/// Trains one neural variant end to end and scores it on the test split.
/// Returns the trained model for callers that keep going (attention
/// export, ablation probes).
pub fn train_and_evaluate(
    variant: &Variant,
    scenario: &CityScenario,
    graphs: Option<&GraphBundle>,
    prepared: &PreparedDataset,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(EvalResult, AcmvModel, TrainReport)> {
    let mut model = match variant {
        Variant::TemporalGru => {
            AcmvModel::temporal_only(&cfg.model, scenario.node_count(), seed)?
        }
        Variant::Model { views, fusion } => {
            let graphs = graphs.ok_or_else(|| {
                Error::State("graph bundle required for graph variants".into())
            })?;
            AcmvModel::new(&cfg.model, graphs, views, *fusion, seed)?
        }
        _ => {
            return Err(Error::Config(format!(
                "variant {} is not a trainable model",
                variant.name()
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
    let result = evaluate_model(&model, &prepared.test, &prepared.scaler)?;
    Ok((result, model, report))
}

/// Runs every (variant, seed) pair, in parallel across `jobs` workers,
/// and aggregates per-variant statistics. Individual run failures are
/// recorded without aborting the others.
pub fn run_comparison(
    scenario: &CityScenario,
    variants: &[Variant],
    seeds: &[u64],
    cfg: &RunConfig,
    jobs: usize,
) -> Result<Comparison> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "comparison needs at least one variant and one seed".into(),
        ));
    }
    let prepared = prepare_dataset(scenario, cfg.model.window, cfg.split)?;
    let needs_graphs = variants
        .iter()
        .any(|v| matches!(v, Variant::Model { .. }));
    let graphs = if needs_graphs {
        Some(build_graphs(scenario, &cfg.graphs)?)
    } else {
        None
    };

    let tasks: Vec<(usize, u64)> = variants
        .iter()
        .enumerate()
        .flat_map(|(vi, _)| seeds.iter().map(move |&s| (vi, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::State(format!("cannot build worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(vi, seed)| {
                let variant = &variants[vi];
                let outcome = match variant {
                    Variant::Ha => evaluate_ha(scenario, &prepared),
                    Variant::Persistence => evaluate_persistence(&prepared),
                    _ => train_and_evaluate(
                        variant,
                        scenario,
                        graphs.as_ref(),
                        &prepared,
                        cfg,
                        seed,
                    )
                    .map(|(r, _, _)| r),
                };
                RunRecord {
                    variant: variant.name(),
                    seed,
                    outcome: outcome.map_err(|e| e.to_string()),
                }
            })
            .collect()
    });

    let mut aggregates = Vec::new();
    for variant in variants {
        let name = variant.name();
        let values: Vec<&EvalResult> = runs
            .iter()
            .filter(|r| r.variant == name)
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        if values.is_empty() {
            continue;
        }
        let stats = |f: fn(&EvalResult) -> f64| {
            let xs: Vec<f64> = values.iter().map(|r| f(r)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
            (mean, var.sqrt())
        };
        let (mean_mae, std_mae) = stats(|r| r.mae);
        let (mean_rmse, std_rmse) = stats(|r| r.rmse);
        let (mean_wape, std_wape) = stats(|r| r.wape);
        aggregates.push(AggregateRow {
            variant: name,
            runs: values.len(),
            mean_mae,
            std_mae,
            mean_rmse,
            std_rmse,
            mean_wape,
            std_wape,
        });
    }
    Ok(Comparison { runs, aggregates })
}

/// Serializes per-run rows as `variant,seed,mae,rmse,wape` (failed runs
/// carry the error in place of numbers).
pub fn write_runs_csv<W: std::io::Write>(runs: &[RunRecord], mut out: W) -> Result<()> {
    writeln!(out, "variant,seed,mae,rmse,wape,error")?;
    for r in runs {
        match &r.outcome {
            Ok(m) => writeln!(
                out,
                "{},{},{},{},{},",
                r.variant, r.seed, m.mae, m.rmse, m.wape
            )?,
            Err(e) => writeln!(
                out,
                "{},{},,,,{}",
                r.variant,
                r.seed,
                e.replace([',', '\n'], ";")
            )?,
        }
    }
    Ok(())
}

/// Serializes aggregate rows with mean and std per metric.
pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "variant,runs,mean_mae,std_mae,mean_rmse,std_rmse,mean_wape,std_wape"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.variant,
            r.runs,
            r.mean_mae,
            r.std_mae,
            r.mean_rmse,
            r.std_rmse,
            r.mean_wape,
            r.std_wape
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_city, GenConfig};

    #[test]
    fn variant_names_round_trip() {
        for name in Variant::valid_names() {
            let v = Variant::parse(name).unwrap();
            assert_eq!(v.name(), name);
        }
        assert!(Variant::parse("bogus").is_err());
        let err = Variant::parse("bogus").unwrap_err().to_string();
        assert!(err.contains("acmv"));
    }

    #[test]
    fn presets_cover_tables() {
        assert_eq!(Variant::preset("baselines").unwrap().len(), 5);
        assert_eq!(Variant::preset("graphs").unwrap().len(), 7);
        assert!(Variant::preset("junk").is_none());
    }

    fn tiny_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.synth.days = 4;
        cfg.model.window = 4;
        cfg.model.gru_hidden = 4;
        cfg.model.gcn_features = vec![2];
        cfg.model.embedding = crate::fusion::EmbeddingDims {
            hour: 2,
            weather: 2,
            holiday: 1,
        };
        cfg.train.epochs = 1;
        cfg.train.batch_size = 16;
        cfg
    }

    #[test]
    fn deterministic_baselines_have_zero_std() {
        let cfg = tiny_cfg();
        let scenario = generate_city(&cfg.synth, 3).unwrap();
        let cmp = run_comparison(
            &scenario,
            &[Variant::Ha, Variant::Persistence],
            &[1, 2, 3],
            &cfg,
            1,
        )
        .unwrap();
        assert_eq!(cmp.runs.len(), 6);
        assert_eq!(cmp.aggregates.len(), 2);
        for agg in &cmp.aggregates {
            assert_eq!(agg.runs, 3);
            assert_eq!(agg.std_mae, 0.0);
            assert_eq!(agg.std_rmse, 0.0);
        }
        // row order matches declaration order
        assert_eq!(cmp.runs[0].variant, "ha");
        assert_eq!(cmp.runs[3].variant, "persistence");
        assert_eq!(cmp.aggregates[0].variant, "ha");
    }

    #[test]
    fn single_variant_single_seed() {
        let cfg = tiny_cfg();
        let scenario = generate_city(&cfg.synth, 4).unwrap();
        let cmp = run_comparison(&scenario, &[Variant::Ha], &[7], &cfg, 1).unwrap();
        assert_eq!(cmp.runs.len(), 1);
        assert!(cmp.runs[0].outcome.is_ok());
        let mut buf = Vec::new();
        write_runs_csv(&cmp.runs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("variant,seed,mae,rmse,wape,error\nha,7,"));
    }

    #[test]
    fn trains_a_tiny_model_variant() {
        let cfg = tiny_cfg();
        let scenario = generate_city(&cfg.synth, 5).unwrap();
        let cmp = run_comparison(
            &scenario,
            &[Variant::parse("dist").unwrap(), Variant::TemporalGru],
            &[1],
            &cfg,
            2,
        )
        .unwrap();
        assert_eq!(cmp.runs.len(), 2);
        for r in &cmp.runs {
            assert!(r.outcome.is_ok(), "{:?}", r.outcome);
        }
    }
}
