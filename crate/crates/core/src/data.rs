//! Robust scaling, chronological splits, and scenario (de)serialization.

use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{ContextRecord, Weather};
use crate::graph::TransportProfile;
use crate::grid::{make_windows, GridSpec, PopulationFrame, SeriesWindow};
use crate::synth::GenConfig;

/// Robust affine scaler `x^ = (x - Q1) / (Q3 - Q1)` with quartiles fitted
/// on training values only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub q1: f64,
    pub q3: f64,
}

/// Percentile by linear interpolation over the sorted values:
/// rank `p * (n - 1)` split into floor index and fractional part.
fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

impl Scaler {
    /// Fits the 25th/75th percentiles of `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::EmptyDataset(
                "scaler needs at least two values".into(),
            ));
        }
        let mut sorted: Vec<f64> = values.to_vec();
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("scaler input contains non-finite values".into()));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = percentile_linear(&sorted, 0.25);
        let q3 = percentile_linear(&sorted, 0.75);
        if !(q3 > q1) {
            return Err(Error::DegenerateScale);
        }
        Ok(Self { q1, q3 })
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.q1) / (self.q3 - self.q1)
    }

    pub fn unscale(&self, y: f64) -> f64 {
        self.q1 + y * (self.q3 - self.q1)
    }

    pub fn scale_array(&self, xs: &Array1<f64>) -> Array1<f64> {
        xs.mapv(|x| self.scale(x))
    }

    pub fn unscale_array(&self, ys: &Array1<f64>) -> Array1<f64> {
        ys.mapv(|y| self.unscale(y))
    }
}

/// Train/validation/test fractions over the window list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        if self.train <= 0.0 || self.val <= 0.0 || self.test <= 0.0 {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if ((self.train + self.val + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {}",
                self.train + self.val + self.test
            )));
        }
        Ok(())
    }
}

/// Contiguous, ordered, target-disjoint split of a window list.
pub fn chronological_split<T: Clone>(
    windows: &[T],
    fractions: SplitFractions,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    fractions.validate()?;
    let w = windows.len();
    let n_train = (fractions.train * w as f64).floor() as usize;
    let n_val = (fractions.val * w as f64).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= w {
        return Err(Error::EmptyDataset(format!(
            "{w} windows cannot be split {:?}",
            fractions
        )));
    }
    Ok((
        windows[..n_train].to_vec(),
        windows[n_train..n_train + n_val].to_vec(),
        windows[n_train + n_val..].to_vec(),
    ))
}

/// A complete synthetic (or externally loaded) city dataset.
#[derive(Debug, Clone)]
pub struct CityScenario {
    pub grid: GridSpec,
    /// `N x |C|` facility counts per region and category.
    pub poi_counts: ndarray::Array2<u32>,
    /// One binary line-membership profile per region.
    pub transport_profiles: Vec<TransportProfile>,
    pub series: Vec<PopulationFrame>,
    pub contexts: Vec<ContextRecord>,
    pub seed: u64,
    /// Generator settings when produced by [`crate::synth::generate_city`].
    pub generator: Option<GenConfig>,
}

impl CityScenario {
    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    pub fn category_count(&self) -> usize {
        self.poi_counts.ncols()
    }

    pub fn line_count(&self) -> usize {
        self.transport_profiles
            .first()
            .map(|p| p.lines.len())
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Regions overlapping at least one transit line.
    pub fn station_regions(&self) -> Vec<usize> {
        self.transport_profiles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.lines.iter().any(|&b| b))
            .map(|(n, _)| n)
            .collect()
    }
}

/// Scaled and raw window splits plus the scaler that links them.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub scaler: Scaler,
    pub train: Vec<SeriesWindow>,
    pub val: Vec<SeriesWindow>,
    pub test: Vec<SeriesWindow>,
    pub raw_train: Vec<SeriesWindow>,
    pub raw_val: Vec<SeriesWindow>,
    pub raw_test: Vec<SeriesWindow>,
    /// Number of leading frames feeding the train split (inputs and
    /// targets); the scaler is fitted on exactly these.
    pub train_frame_count: usize,
}

/// Splits windows chronologically and fits the scaler on the training
/// segment only: the scaler never sees validation or test frames.
pub fn prepare_dataset(
    scenario: &CityScenario,
    window_len: usize,
    fractions: SplitFractions,
) -> Result<PreparedDataset> {
    let raw_windows = make_windows(&scenario.series, &scenario.contexts, window_len)?;
    let (raw_train, _, _) = chronological_split(&raw_windows, fractions)?;

    // frames covered by train windows: inputs [0, n_train + L - 1] and
    // targets up to n_train + L - 1
    let train_frame_count = raw_train.len() + window_len;
    let train_values: Vec<f64> = scenario.series[..train_frame_count]
        .iter()
        .flat_map(|f| f.values.iter().copied())
        .collect();
    let scaler = Scaler::fit(&train_values)?;
    prepare_with_scaler(scenario, window_len, fractions, scaler)
}

/// Like [`prepare_dataset`] but with an already-fitted scaler, e.g. the
/// one stored in a checkpoint.
pub fn prepare_with_scaler(
    scenario: &CityScenario,
    window_len: usize,
    fractions: SplitFractions,
    scaler: Scaler,
) -> Result<PreparedDataset> {
    let raw_windows = make_windows(&scenario.series, &scenario.contexts, window_len)?;
    let (raw_train, raw_val, raw_test) = chronological_split(&raw_windows, fractions)?;
    let train_frame_count = raw_train.len() + window_len;

    let scaled_series: Vec<PopulationFrame> = scenario
        .series
        .iter()
        .map(|f| PopulationFrame {
            values: scaler.scale_array(&f.values),
            time_index: f.time_index,
        })
        .collect();
    let scaled_windows = make_windows(&scaled_series, &scenario.contexts, window_len)?;
    let (train, val, test) = chronological_split(&scaled_windows, fractions)?;

    Ok(PreparedDataset {
        scaler,
        train,
        val,
        test,
        raw_train,
        raw_val,
        raw_test,
        train_frame_count,
    })
}

const META_FILE: &str = "meta.toml";
const SERIES_FILE: &str = "series.csv";
const CONTEXTS_FILE: &str = "contexts.csv";
const POI_FILE: &str = "poi.csv";
const TRANSPORT_FILE: &str = "transport.csv";

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioMeta {
    rows: usize,
    cols: usize,
    cell_size_m: f64,
    categories: usize,
    lines: usize,
    t_len: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<GenConfig>,
}

/// Writes a scenario bundle: meta.toml plus the four CSV files.
pub fn save_scenario(scenario: &CityScenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = ScenarioMeta {
        rows: scenario.grid.rows(),
        cols: scenario.grid.cols(),
        cell_size_m: scenario.grid.cell_size_m(),
        categories: scenario.category_count(),
        lines: scenario.line_count(),
        t_len: scenario.len(),
        seed: scenario.seed,
        generator: scenario.generator.clone(),
    };
    let meta_text = toml::to_string_pretty(&meta)
        .map_err(|e| Error::State(format!("meta serialization failed: {e}")))?;
    fs::write(dir.join(META_FILE), meta_text)?;

    let mut series = String::from("t,n,value\n");
    for frame in &scenario.series {
        for (n, v) in frame.values.iter().enumerate() {
            series.push_str(&format!("{},{},{}\n", frame.time_index, n, v));
        }
    }
    fs::write(dir.join(SERIES_FILE), series)?;

    let mut contexts = String::from("t,hour,weather,holiday\n");
    for (t, c) in scenario.contexts.iter().enumerate() {
        contexts.push_str(&format!(
            "{},{},{},{}\n",
            t,
            c.hour(),
            c.weather,
            u8::from(c.holiday)
        ));
    }
    fs::write(dir.join(CONTEXTS_FILE), contexts)?;

    let mut poi = String::from("n,category,count\n");
    for (n, row) in scenario.poi_counts.rows().into_iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count > 0 {
                poi.push_str(&format!("{n},{c},{count}\n"));
            }
        }
    }
    fs::write(dir.join(POI_FILE), poi)?;

    let mut transport = String::from("n,line,flag\n");
    for (n, p) in scenario.transport_profiles.iter().enumerate() {
        for (m, &flag) in p.lines.iter().enumerate() {
            if flag {
                transport.push_str(&format!("{n},{m},1\n"));
            }
        }
    }
    fs::write(dir.join(TRANSPORT_FILE), transport)?;
    Ok(())
}

struct CsvTable {
    path: String,
    headers: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv(path: &Path, expected_headers: &[&str]) -> Result<CsvTable> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: format!("cannot read file: {e}"),
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 1,
        msg: "missing header row".into(),
    })?;
    let headers: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    for want in expected_headers {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Parse {
                path: display,
                line: 1,
                msg: format!("missing column '{want}'"),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != headers.len() {
            return Err(Error::Parse {
                path: display,
                line: idx + 1,
                msg: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    fields.len()
                ),
            });
        }
        rows.push((idx + 1, fields));
    }
    Ok(CsvTable {
        path: display,
        headers,
        rows,
    })
}

impl CsvTable {
    fn col(&self, name: &str) -> usize {
        self.headers.iter().position(|h| h == name).expect("validated")
    }

    fn parse_field<T: std::str::FromStr>(&self, line: usize, value: &str, col: &str) -> Result<T> {
        value.parse::<T>().map_err(|_| Error::Parse {
            path: self.path.clone(),
            line,
            msg: format!("cannot parse '{value}' in column '{col}'"),
        })
    }
}

/// Reads a scenario bundle written by [`save_scenario`] (or authored by
/// hand in the same schema).
pub fn load_scenario(dir: &Path) -> Result<CityScenario> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::Parse {
        path: meta_path.display().to_string(),
        line: 0,
        msg: format!("cannot read file: {e}"),
    })?;
    let meta: ScenarioMeta = toml::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let grid = GridSpec::new(meta.rows, meta.cols, meta.cell_size_m)?;
    let n = grid.node_count();

    // series
    let table = read_csv(&dir.join(SERIES_FILE), &["t", "n", "value"])?;
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no data rows",
            table.path
        )));
    }
    let (tc, nc, vc) = (table.col("t"), table.col("n"), table.col("value"));
    let mut values = vec![vec![f64::NAN; n]; meta.t_len];
    for (line, fields) in &table.rows {
        let t: usize = table.parse_field(*line, &fields[tc], "t")?;
        let region: usize = table.parse_field(*line, &fields[nc], "n")?;
        let v: f64 = table.parse_field(*line, &fields[vc], "value")?;
        if t >= meta.t_len {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: *line,
                msg: format!("time index {t} outside declared length {}", meta.t_len),
            });
        }
        if region >= n {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: *line,
                msg: format!("region {region} outside grid with {n} nodes"),
            });
        }
        values[t][region] = v;
    }
    let mut series = Vec::with_capacity(meta.t_len);
    for (t, row) in values.into_iter().enumerate() {
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: 0,
                msg: format!("time index {t} is missing values for some regions"),
            });
        }
        series.push(PopulationFrame {
            values: Array1::from_vec(row),
            time_index: t,
        });
    }

    // contexts
    let table = read_csv(&dir.join(CONTEXTS_FILE), &["t", "hour", "weather", "holiday"])?;
    let (tc, hc, wc, dc) = (
        table.col("t"),
        table.col("hour"),
        table.col("weather"),
        table.col("holiday"),
    );
    let mut contexts: Vec<Option<ContextRecord>> = vec![None; meta.t_len];
    for (line, fields) in &table.rows {
        let t: usize = table.parse_field(*line, &fields[tc], "t")?;
        let hour: u8 = table.parse_field(*line, &fields[hc], "hour")?;
        let weather = Weather::parse(&fields[wc]).map_err(|e| Error::Parse {
            path: table.path.clone(),
            line: *line,
            msg: e.to_string(),
        })?;
        let holiday: u8 = table.parse_field(*line, &fields[dc], "holiday")?;
        if t >= meta.t_len {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: *line,
                msg: format!("time index {t} outside declared length {}", meta.t_len),
            });
        }
        let record = ContextRecord::new(hour, weather, holiday != 0).map_err(|e| Error::Parse {
            path: table.path.clone(),
            line: *line,
            msg: e.to_string(),
        })?;
        contexts[t] = Some(record);
    }
    let contexts: Vec<ContextRecord> = contexts
        .into_iter()
        .enumerate()
        .map(|(t, c)| {
            c.ok_or_else(|| Error::Parse {
                path: dir.join(CONTEXTS_FILE).display().to_string(),
                line: 0,
                msg: format!("missing context record for time index {t}"),
            })
        })
        .collect::<Result<_>>()?;

    // poi counts (sparse: absent rows mean zero)
    let table = read_csv(&dir.join(POI_FILE), &["n", "category", "count"])?;
    let (nc, cc, kc) = (table.col("n"), table.col("category"), table.col("count"));
    let mut poi_counts = ndarray::Array2::<u32>::zeros((n, meta.categories));
    for (line, fields) in &table.rows {
        let region: usize = table.parse_field(*line, &fields[nc], "n")?;
        let cat: usize = table.parse_field(*line, &fields[cc], "category")?;
        let count: u32 = table.parse_field(*line, &fields[kc], "count")?;
        if region >= n || cat >= meta.categories {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: *line,
                msg: format!(
                    "(n={region}, category={cat}) outside {}x{}",
                    n, meta.categories
                ),
            });
        }
        poi_counts[[region, cat]] = count;
    }

    // transport flags (sparse)
    let table = read_csv(&dir.join(TRANSPORT_FILE), &["n", "line", "flag"])?;
    let (nc, lc, fc) = (table.col("n"), table.col("line"), table.col("flag"));
    let mut transport_profiles = vec![
        TransportProfile {
            lines: vec![false; meta.lines],
        };
        n
    ];
    for (line, fields) in &table.rows {
        let region: usize = table.parse_field(*line, &fields[nc], "n")?;
        let m: usize = table.parse_field(*line, &fields[lc], "line")?;
        let flag: u8 = table.parse_field(*line, &fields[fc], "flag")?;
        if region >= n || m >= meta.lines {
            return Err(Error::Parse {
                path: table.path.clone(),
                line: *line,
                msg: format!("(n={region}, line={m}) outside {}x{}", n, meta.lines),
            });
        }
        transport_profiles[region].lines[m] = flag != 0;
    }

    Ok(CityScenario {
        grid,
        poi_counts,
        transport_profiles,
        series,
        contexts,
        seed: meta.seed,
        generator: meta.generator,
    })
}
