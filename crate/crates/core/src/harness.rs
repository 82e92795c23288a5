//! Experiment sweeps over selection methods, sensor counts, seeds and noise
//! truncation ranks, plus plot-ready report files.
//!
//! A [`Trial`] holds everything derived from one seed: training and evaluation
//! data, the POD, the noise model and the eligible candidates. Sweeps run every
//! requested `(method, p)` on each trial and collect one [`SweepRecord`] each.
//!
//! Selection is timed on its own; POD, noise-model construction and estimation
//! are outside the selection clock.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datasets::{
    self, format_value, gen_random_dataset, gen_smooth_grid_dataset, inverse_sqrt_spectrum, rect_hole_mask,
    scatter_to_grid, MaskedGrid, RandomSpecConfig, SmoothGridConfig,
};
use crate::error::{Result, SensingError};
use crate::estimators::{lse_batch, map_estimate_batch, objective_logdet, reconstruction_error, MeasurementSetup};
use crate::noise::NoiseModel;
use crate::pod::{compute_pod, PodBasis, SnapshotMatrix, TruncationConfig};
use crate::selectors::{
    exclude_low_rms, select_bdg_fast, select_bdg_naive, select_brute_force, select_dg, select_random, CandidateSet,
    DEFAULT_EXCLUSION_FACTOR,
};

/// Selector and estimator combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DG-LSE")]
    DgLse,
    #[serde(rename = "DG-BE")]
    DgBe,
    #[serde(rename = "BDG-LSE")]
    BdgLse,
    #[serde(rename = "BDG-BE")]
    BdgBe,
    #[serde(rename = "RANDOM-BE")]
    RandomBe,
    #[serde(rename = "BRUTE-BE")]
    BruteBe,
    /// Reference greedy selector without incremental updates; same sensors as BDG-BE.
    #[serde(rename = "BDG-NAIVE-BE")]
    BdgNaiveBe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Dg,
    Bdg,
    BdgNaive,
    Random,
    Brute,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::DgLse,
        Method::DgBe,
        Method::BdgLse,
        Method::BdgBe,
        Method::RandomBe,
        Method::BruteBe,
        Method::BdgNaiveBe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DgLse => "DG-LSE",
            Method::DgBe => "DG-BE",
            Method::BdgLse => "BDG-LSE",
            Method::BdgBe => "BDG-BE",
            Method::RandomBe => "RANDOM-BE",
            Method::BruteBe => "BRUTE-BE",
            Method::BdgNaiveBe => "BDG-NAIVE-BE",
        }
    }

    pub fn selector(self) -> Selector {
        match self {
            Method::DgLse | Method::DgBe => Selector::Dg,
            Method::BdgLse | Method::BdgBe => Selector::Bdg,
            Method::BdgNaiveBe => Selector::BdgNaive,
            Method::RandomBe => Selector::Random,
            Method::BruteBe => Selector::Brute,
        }
    }

    pub fn bayesian(self) -> bool {
        !matches!(self, Method::DgLse | Method::BdgLse)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SensingError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                SensingError::InvalidConfig(format!("unknown method {s:?}; known: {}", known.join(", ")))
            })
    }
}

/// Where the snapshot matrix comes from. Generated datasets are reseeded per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// `n x m` matrix with singular values `1/√k`.
    Random { n: usize, m: usize },
    /// Smooth cosine modes on a `width x height` grid with an optional
    /// rectangular hole `[x0, y0, w, h]` and `1/√k` singular values.
    SmoothGrid {
        width: usize,
        height: usize,
        m: usize,
        hole: Option<[usize; 4]>,
    },
    /// Binary (`.bin`) or CSV matrix file.
    Matrix { path: PathBuf },
    /// Gridded values (stacked file or directory) and mask.
    MaskedGrid { values: PathBuf, mask: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self, seed: u64) -> Result<(SnapshotMatrix, Option<MaskedGrid>)> {
        match self {
            DatasetSpec::Random { n, m } => {
                Ok((gen_random_dataset(&RandomSpecConfig::inverse_sqrt(*n, *m, seed))?, None))
            }
            DatasetSpec::SmoothGrid { width, height, m, hole } => {
                let mask = match hole {
                    Some([x0, y0, w, h]) => rect_hole_mask(*width, *height, *x0, *y0, *w, *h),
                    None => vec![true; width * height],
                };
                let cfg = SmoothGridConfig {
                    width: *width,
                    height: *height,
                    mask,
                    m: *m,
                    spectrum: inverse_sqrt_spectrum(*m),
                    seed,
                };
                let (x, grid) = gen_smooth_grid_dataset(&cfg)?;
                Ok((x, Some(grid)))
            }
            DatasetSpec::Matrix { path } => Ok((datasets::read_matrix(path)?, None)),
            DatasetSpec::MaskedGrid { values, mask } => {
                let (x, grid) = datasets::load_masked_grid(values, mask)?;
                Ok((x, Some(grid)))
            }
        }
    }
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let bad = || SensingError::InvalidConfig(format!("expected AxB, got {s:?}"));
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

/// `random:NxM`, `grid:WxH:M[:X0,Y0,W,H]`, `file:PATH` or `masked:VALUES,MASK`.
impl FromStr for DatasetSpec {
    type Err = SensingError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| SensingError::InvalidConfig(format!("dataset {s:?} lacks a kind prefix")))?;
        match kind {
            "random" => {
                let (n, m) = parse_dims(rest)?;
                Ok(DatasetSpec::Random { n, m })
            }
            "grid" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(SensingError::InvalidConfig(format!(
                        "grid dataset {s:?}: expected WxH:M[:X0,Y0,W,H]"
                    )));
                }
                let (width, height) = parse_dims(parts[0])?;
                let m = parts[1]
                    .parse()
                    .map_err(|_| SensingError::InvalidConfig(format!("grid dataset {s:?}: bad snapshot count")))?;
                let hole = match parts.get(2) {
                    None => None,
                    Some(h) => {
                        let v = parse_usize_list(h)?;
                        let arr: [usize; 4] = v
                            .try_into()
                            .map_err(|_| SensingError::InvalidConfig(format!("grid hole {h:?}: need 4 values")))?;
                        Some(arr)
                    }
                };
                Ok(DatasetSpec::SmoothGrid { width, height, m, hole })
            }
            "file" => Ok(DatasetSpec::Matrix { path: rest.into() }),
            "masked" => {
                let (values, mask) = rest
                    .split_once(',')
                    .ok_or_else(|| SensingError::InvalidConfig(format!("masked dataset {s:?}: need VALUES,MASK")))?;
                Ok(DatasetSpec::MaskedGrid {
                    values: values.into(),
                    mask: mask.into(),
                })
            }
            _ => Err(SensingError::InvalidConfig(format!("unknown dataset kind {kind:?}"))),
        }
    }
}

/// Comma-separated values and inclusive ranges `a-b`, e.g. `1-5,8,10`.
pub fn parse_list(s: &str) -> Result<Vec<u64>> {
    let bad = |part: &str| SensingError::InvalidConfig(format!("bad list item {part:?} in {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    Ok(out)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    Ok(parse_list(s)?.into_iter().map(|v| v as usize).collect())
}

/// `full` (no truncation) or a rank.
pub fn parse_r2(s: &str) -> Result<Option<usize>> {
    match s.trim() {
        "full" => Ok(None),
        v => v
            .parse()
            .map(Some)
            .map_err(|_| SensingError::InvalidConfig(format!("r2 {s:?} is neither 'full' nor an integer"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub r1: usize,
    /// Tail rank of the noise cross-covariance; `None` keeps the whole tail.
    pub r2: Option<usize>,
    /// Ranks compared by [`run_r2_sweep`].
    pub r2_values: Vec<Option<usize>>,
    pub p_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub exclusion_factor: f64,
    /// Subtract the training mean before the POD.
    pub centering: bool,
    /// Fraction of snapshots used for training; the rest are reconstructed.
    pub split: Option<f64>,
    /// Timed repetitions after one discarded warm-up run.
    pub timing_reps: usize,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, r1: usize, p_values: Vec<usize>, methods: Vec<Method>) -> Self {
        ExperimentConfig {
            dataset,
            r1,
            r2: None,
            r2_values: Vec::new(),
            p_values,
            methods,
            seeds: vec![0],
            exclusion_factor: DEFAULT_EXCLUSION_FACTOR,
            centering: false,
            split: None,
            timing_reps: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(SensingError::InvalidConfig(msg));
        if self.r1 == 0 {
            return invalid("r1 must be positive".into());
        }
        if self.p_values.is_empty() || self.p_values[0] == 0 {
            return invalid(format!("p values {:?} must be positive", self.p_values));
        }
        if self.p_values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid(format!("p values {:?} must be strictly ascending", self.p_values));
        }
        if self.methods.is_empty() {
            return invalid("no methods requested".into());
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return invalid("duplicate methods".into());
        }
        if self.seeds.is_empty() {
            return invalid("no seeds requested".into());
        }
        if !(0.0..1.0).contains(&self.exclusion_factor) {
            return invalid(format!("exclusion factor {} outside [0, 1)", self.exclusion_factor));
        }
        if let Some(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return invalid(format!("split fraction {f} outside (0, 1)"));
            }
        }
        if self.timing_reps == 0 {
            return invalid("timing_reps must be positive".into());
        }
        Ok(())
    }

    fn max_p(&self) -> usize {
        *self.p_values.last().expect("validated non-empty")
    }
}

/// Data, POD, noise model and candidates derived from one seed.
#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    /// Training snapshots, centered when requested.
    pub train: SnapshotMatrix,
    /// Snapshots to reconstruct, as loaded.
    pub eval: SnapshotMatrix,
    /// Training mean added back to reconstructions.
    pub mean: Option<DVector<f64>>,
    pub basis: PodBasis,
    pub noise: NoiseModel,
    pub candidates: CandidateSet,
    pub grid: Option<MaskedGrid>,
}

impl Trial {
    pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
        cfg.validate()?;
        let (x, grid) = cfg.dataset.load(seed)?;
        Trial::from_data(cfg, seed, x, grid)
    }

    pub fn from_data(cfg: &ExperimentConfig, seed: u64, x: SnapshotMatrix, grid: Option<MaskedGrid>) -> Result<Trial> {
        let (train, eval) = match cfg.split {
            None => (x.clone(), x),
            Some(f) => {
                if x.m() < 2 {
                    return Err(SensingError::InvalidConfig("split needs at least two snapshots".into()));
                }
                let count = ((f * x.m() as f64).round() as usize).clamp(1, x.m() - 1);
                x.split_columns(count)?
            }
        };
        let (train, mean) = if cfg.centering {
            let (centered, mean) = train.centered();
            (centered, Some(mean))
        } else {
            (train, None)
        };
        let basis = compute_pod(&train)?;
        let noise = build_noise(&basis, cfg.r1, cfg.r2)?;
        let candidates = exclude_low_rms(&train, cfg.exclusion_factor, cfg.max_p())?;
        Ok(Trial {
            seed,
            train,
            eval,
            mean,
            basis,
            noise,
            candidates,
            grid,
        })
    }

    /// Rebuilds the noise model with another tail rank.
    pub fn set_r2(&mut self, r2: Option<usize>) -> Result<()> {
        self.noise = build_noise(&self.basis, self.noise.r1, r2)?;
        Ok(())
    }

    pub fn r2(&self) -> usize {
        self.noise.r2
    }

    /// Sensor indices chosen by `method`, in selection order.
    pub fn select(&self, method: Method, p: usize) -> Result<Vec<usize>> {
        let r1 = self.noise.r1;
        match method.selector() {
            Selector::Dg => select_dg(&self.basis, r1, p, &self.candidates),
            Selector::Bdg => Ok(select_bdg_fast(&self.basis, &self.noise, p, &self.candidates)?.indices),
            Selector::BdgNaive => Ok(select_bdg_naive(&self.basis, &self.noise, p, &self.candidates)?.indices),
            Selector::Random => select_random(p, self.seed, &self.candidates),
            Selector::Brute => Ok(select_brute_force(&self.basis, &self.noise, p, &self.candidates)?.indices),
        }
    }

    /// Reconstruction of every evaluation snapshot from the given sensors.
    pub fn reconstruct(&self, method: Method, sensors: &[usize]) -> Result<DMatrix<f64>> {
        let mut y = DMatrix::zeros(sensors.len(), self.eval.m());
        for (row, &i) in sensors.iter().enumerate() {
            if i >= self.eval.n() {
                return Err(SensingError::IndexOutOfRange {
                    index: i,
                    len: self.eval.n(),
                });
            }
            let mut values = self.eval.values().row(i).into_owned();
            if let Some(mean) = &self.mean {
                values.add_scalar_mut(-mean[i]);
            }
            y.set_row(row, &values);
        }
        let z = if method.bayesian() {
            map_estimate_batch(&MeasurementSetup::from_sensors(&self.basis, &self.noise, sensors)?, &y)?
        } else {
            let modes = self.basis.modes(self.noise.r1);
            let c = DMatrix::from_fn(sensors.len(), self.noise.r1, |a, b| modes[(sensors[a], b)]);
            lse_batch(&c, &y)?
        };
        let mut x_hat = self.basis.modes(self.noise.r1) * z;
        if let Some(mean) = &self.mean {
            for mut col in x_hat.column_iter_mut() {
                col += mean;
            }
        }
        Ok(x_hat)
    }

    /// `log det(CᵀR⁻¹C + Q⁻¹)` of a sensor set, `None` when `R` is singular.
    pub fn objective(&self, sensors: &[usize]) -> Option<f64> {
        MeasurementSetup::from_sensors(&self.basis, &self.noise, sensors)
            .and_then(|s| objective_logdet(&s))
            .ok()
            .filter(|v| v.is_finite())
    }

    fn run(&self, method: Method, p: usize, timed_reps: usize) -> Result<SweepRecord> {
        let mut sensors = Vec::new();
        let mut times = Vec::with_capacity(timed_reps);
        let runs = if timed_reps > 1 { timed_reps + 1 } else { 1 };
        for rep in 0..runs {
            let start = Instant::now();
            sensors = self.select(method, p)?;
            let elapsed = start.elapsed().as_secs_f64();
            if runs == 1 || rep > 0 {
                times.push(elapsed);
            }
        }
        let start = Instant::now();
        let x_hat = self.reconstruct(method, &sensors)?;
        let estimate_seconds = start.elapsed().as_secs_f64();
        let error = reconstruction_error(&self.eval, &x_hat)?;
        Ok(SweepRecord {
            method,
            p,
            seed: self.seed,
            r2: self.r2(),
            error,
            mean_error: error / self.eval.m() as f64,
            objective: self.objective(&sensors),
            select_seconds: median(&mut times),
            estimate_seconds,
            excluded: self.candidates.excluded_count(),
            sensors,
        })
    }
}

fn build_noise(basis: &PodBasis, r1: usize, r2: Option<usize>) -> Result<NoiseModel> {
    let cfg = match r2 {
        None => TruncationConfig::full_tail(r1, basis.q())?,
        Some(r2) => TruncationConfig::new(r1, r2, basis.q())?,
    };
    NoiseModel::build(basis, cfg)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    pub p: usize,
    pub seed: u64,
    pub r2: usize,
    /// Sum over evaluation snapshots of the relative reconstruction error.
    pub error: f64,
    /// `error` divided by the number of evaluation snapshots.
    pub mean_error: f64,
    pub objective: Option<f64>,
    pub select_seconds: f64,
    pub estimate_seconds: f64,
    /// Points removed by the low-RMS exclusion.
    pub excluded: usize,
    pub sensors: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Error,
    Timing,
    R2,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub config: ExperimentConfig,
    /// Sorted by method, r2, p and seed.
    pub records: Vec<SweepRecord>,
    #[serde(skip)]
    pub grid: Option<MaskedGrid>,
}

impl SweepReport {
    fn new(
        kind: SweepKind,
        config: &ExperimentConfig,
        mut records: Vec<SweepRecord>,
        grid: Option<MaskedGrid>,
    ) -> Self {
        records.sort_by_key(|r| (r.method, r.r2, r.p, r.seed));
        SweepReport {
            kind,
            config: config.clone(),
            records,
            grid,
        }
    }

    /// Mean over seeds of `error` for each `p`, for one method and tail rank.
    pub fn mean_curve(&self, method: Method, r2: Option<usize>) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in self
            .records
            .iter()
            .filter(|r| r.method == method && r2.is_none_or(|v| v == r.r2))
        {
            let e = acc.entry(r.p).or_default();
            e.0 += r.error;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(p, (sum, count))| (p, sum / count as f64))
            .collect()
    }

    /// Median over seeds of the selection time for each `p`.
    pub fn time_curve(&self, method: Method, r2: Option<usize>) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in self
            .records
            .iter()
            .filter(|r| r.method == method && r2.is_none_or(|v| v == r.r2))
        {
            acc.entry(r.p).or_default().push(r.select_seconds);
        }
        acc.into_iter().map(|(p, mut t)| (p, median(&mut t))).collect()
    }

    fn r2_values(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.records.iter().map(|r| r.r2).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn with_context(method: Method, p: usize, seed: u64) -> impl FnOnce(SensingError) -> SensingError {
    move |source| SensingError::Run {
        method: method.name().to_string(),
        p,
        seed,
        source: Box::new(source),
    }
}

fn sweep(cfg: &ExperimentConfig, kind: SweepKind, r2_values: &[Option<usize>], reps: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut grid = None;
    for &seed in &cfg.seeds {
        let mut trial = Trial::prepare(cfg, seed)?;
        for &r2 in r2_values {
            trial.set_r2(r2)?;
            for &method in &cfg.methods {
                for &p in &cfg.p_values {
                    records.push(trial.run(method, p, reps).map_err(with_context(method, p, seed))?);
                }
            }
        }
        grid = grid.or(trial.grid);
    }
    Ok(SweepReport::new(kind, cfg, records, grid))
}

/// Reconstruction error of every method for every `p` and seed.
pub fn run_error_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    sweep(cfg, SweepKind::Error, &[cfg.r2], 1)
}

/// As [`run_error_sweep`], with selection timed as the median of
/// `timing_reps` runs after a discarded warm-up.
pub fn run_timing_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    if cfg.timing_reps < 3 {
        return Err(SensingError::InvalidConfig(format!(
            "timing needs at least 3 repetitions, got {}",
            cfg.timing_reps
        )));
    }
    sweep(cfg, SweepKind::Timing, &[cfg.r2], cfg.timing_reps)
}

/// Error and selection time for every tail rank in `cfg.r2_values`.
pub fn run_r2_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    if cfg.r2_values.is_empty() {
        return Err(SensingError::InvalidConfig("no r2 values to sweep".into()));
    }
    sweep(cfg, SweepKind::R2, &cfg.r2_values, cfg.timing_reps.max(1))
}

// ---------------------------------------------------------------------------
// Report files

pub const RECORDS_HEADER: &str =
    "method,r2,p,seed,error,mean_error,objective,select_seconds,estimate_seconds,excluded,sensors";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| SensingError::io(path, e))?,
    ))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = create(path)?;
    for line in lines {
        writeln!(out, "{line}").map_err(|e| SensingError::io(path, e))?;
    }
    out.flush().map_err(|e| SensingError::io(path, e))
}

fn record_line(r: &SweepRecord) -> String {
    let sensors: Vec<String> = r.sensors.iter().map(|i| i.to_string()).collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.method,
        r.r2,
        r.p,
        r.seed,
        format_value(r.error),
        format_value(r.mean_error),
        r.objective.map(format_value).unwrap_or_default(),
        format_value(r.select_seconds),
        format_value(r.estimate_seconds),
        r.excluded,
        sensors.join(" ")
    )
}

/// Writes the report under `out_dir`:
///
/// * `records.csv`: one row per record, header [`RECORDS_HEADER`]; sensors are
///   space separated in selection order;
/// * `curves/<method>.dat` (`<method>_r2-<r2>.dat` when several tail ranks are
///   present): whitespace columns `p mean_error median_select_seconds`;
/// * `sensors/<method>_p<k>.csv`: `seed,r2,order,index` rows, and with a grid
///   `sensors/<method>_p<k>_seed<s>_r2-<r2>_grid.csv` marking sensors with 1,
///   other active cells with 0 and inactive cells with NaN;
/// * `manifest.json`: sweep kind, resolved configuration, crate version, and
///   the per-seed exclusion counts.
pub fn emit_report(report: &SweepReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    for dir in [out.to_path_buf(), out.join("curves"), out.join("sensors")] {
        fs::create_dir_all(&dir).map_err(|e| SensingError::io(&dir, e))?;
    }

    write_lines(
        &out.join("records.csv"),
        std::iter::once(RECORDS_HEADER.to_string()).chain(report.records.iter().map(record_line)),
    )?;

    let r2_values = report.r2_values();
    let mut methods: Vec<Method> = report.records.iter().map(|r| r.method).collect();
    methods.dedup();
    for &method in &methods {
        for &r2 in &r2_values {
            let name = if r2_values.len() > 1 {
                format!("{method}_r2-{r2}.dat")
            } else {
                format!("{method}.dat")
            };
            let errors = report.mean_curve(method, Some(r2));
            let times = report.time_curve(method, Some(r2));
            let lines = std::iter::once("# p mean_error median_select_seconds".to_string()).chain(
                errors
                    .iter()
                    .zip(&times)
                    .map(|((p, e), (_, t))| format!("{p} {} {}", format_value(*e), format_value(*t))),
            );
            write_lines(&out.join("curves").join(name), lines)?;
        }
    }

    let mut by_file: BTreeMap<(Method, usize), Vec<&SweepRecord>> = BTreeMap::new();
    for r in &report.records {
        by_file.entry((r.method, r.p)).or_default().push(r);
    }
    for ((method, p), records) in by_file {
        let lines = std::iter::once("seed,r2,order,index".to_string()).chain(records.iter().flat_map(|r| {
            r.sensors
                .iter()
                .enumerate()
                .map(move |(k, i)| format!("{},{},{},{}", r.seed, r.r2, k + 1, i))
        }));
        write_lines(&out.join("sensors").join(format!("{method}_p{p}.csv")), lines)?;
        if let Some(grid) = &report.grid {
            for r in records {
                let mut marks = DVector::zeros(grid.n());
                for &i in &r.sensors {
                    marks[i] = 1.0;
                }
                let path = out
                    .join("sensors")
                    .join(format!("{method}_p{p}_seed{}_r2-{}_grid.csv", r.seed, r.r2));
                datasets::write_grid_csv(&path, grid, &scatter_to_grid(grid, &marks)?)?;
            }
        }
    }

    let mut excluded: BTreeMap<u64, usize> = BTreeMap::new();
    for r in &report.records {
        excluded.insert(r.seed, r.excluded);
    }
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": report.kind,
        "config": report.config,
        "records": report.records.len(),
        "excluded_points_per_seed": excluded,
        "grid": report.grid.as_ref().map(|g| serde_json::json!({
            "width": g.width, "height": g.height, "active": g.n()
        })),
    });
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SensingError::InvalidInput(format!("manifest serialization: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| SensingError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(methods: Vec<Method>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(DatasetSpec::Random { n: 40, m: 20 }, 3, vec![2, 4, 6], methods);
        cfg.seeds = vec![1, 2];
        cfg
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("DG-XYZ".parse::<Method>().is_err());
    }

    #[test]
    fn dataset_specs_parse() {
        assert_eq!(
            "random:100x50".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::Random { n: 100, m: 50 }
        );
        assert_eq!(
            "grid:20x10:30:2,3,4,5".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::SmoothGrid {
                width: 20,
                height: 10,
                m: 30,
                hole: Some([2, 3, 4, 5])
            }
        );
        assert!(matches!(
            "masked:a.csv,b.csv".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::MaskedGrid { .. }
        ));
        assert!("bogus:1".parse::<DatasetSpec>().is_err());
        assert!("random:100".parse::<DatasetSpec>().is_err());
    }

    #[test]
    fn lists_and_ranks_parse() {
        assert_eq!(parse_usize_list("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_list("5").unwrap(), vec![5]);
        assert!(parse_list("1,x").is_err());
        assert_eq!(parse_r2("full").unwrap(), None);
        assert_eq!(parse_r2("40").unwrap(), Some(40));
        assert!(parse_r2("most").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = small_config(vec![Method::DgLse]);
        assert!(cfg.validate().is_ok());
        cfg.p_values = vec![0, 1];
        assert!(matches!(cfg.validate(), Err(SensingError::InvalidConfig(_))));
        cfg.p_values = vec![3, 2];
        assert!(cfg.validate().is_err());
        cfg.p_values = vec![1];
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
        cfg.methods = vec![Method::DgLse, Method::DgLse];
        assert!(cfg.validate().is_err());
        cfg.methods = vec![Method::DgLse];
        cfg.split = Some(1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn r2_beyond_tail_is_rejected() {
        let mut cfg = small_config(vec![Method::BdgBe]);
        cfg.r2_values = vec![Some(17), Some(18)];
        assert!(matches!(run_r2_sweep(&cfg), Err(SensingError::InvalidConfig(_))));
    }

    #[test]
    fn one_record_per_combination() {
        let report = run_error_sweep(&small_config(vec![Method::DgLse, Method::BdgBe])).unwrap();
        assert_eq!(report.records.len(), 2 * 3 * 2);
        for r in &report.records {
            assert_eq!(r.sensors.len(), r.p);
            assert!(r.error.is_finite() && r.error >= 0.0);
            assert!((r.mean_error - r.error / 20.0).abs() < 1e-15);
        }
        assert_eq!(report.records[0].method, Method::DgLse);
    }

    #[test]
    fn greedy_bayesian_selectors_agree() {
        let cfg = small_config(vec![Method::BdgBe, Method::BdgNaiveBe]);
        let report = run_error_sweep(&cfg).unwrap();
        let (fast, naive): (Vec<_>, Vec<_>) = report.records.iter().partition(|r| r.method == Method::BdgBe);
        for (a, b) in fast.iter().zip(&naive) {
            assert_eq!(a.sensors, b.sensors);
            assert_eq!(a.error, b.error);
        }
    }

    #[test]
    fn split_and_centering_reconstruct_held_out_data() {
        let mut cfg = small_config(vec![Method::DgLse, Method::BdgBe]);
        cfg.split = Some(0.75);
        cfg.centering = true;
        let trial = Trial::prepare(&cfg, 3).unwrap();
        assert_eq!((trial.train.m(), trial.eval.m()), (15, 5));
        let row_means = trial.train.values().column_mean();
        assert!(row_means.amax() < 1e-14);
        let report = run_error_sweep(&cfg).unwrap();
        assert!(report.records.iter().all(|r| r.error.is_finite()));
    }

    #[test]
    fn pure_mode_snapshot_is_recovered_by_least_squares() {
        // The training snapshot is sigma_1 u_1 with no tail, so y = C z exactly.
        let u = DVector::from_fn(12, |i, _| ((i as f64) * 0.7 + 0.3).sin());
        let x = SnapshotMatrix::new(DMatrix::from_column_slice(12, 1, (u * 3.0).as_slice())).unwrap();
        let cfg = ExperimentConfig::new(DatasetSpec::Random { n: 12, m: 1 }, 1, vec![1, 2], vec![Method::DgLse]);
        let trial = Trial::from_data(&cfg, 0, x, None).unwrap();
        for p in [1, 2] {
            let record = trial.run(Method::DgLse, p, 1).unwrap();
            assert!(record.error < 1e-14, "p = {p}: {}", record.error);
        }
        // With zero noise the Bayesian estimate has no finite covariance to work with.
        let err = trial.run(Method::BdgBe, 1, 1).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Numerical);
    }

    #[test]
    fn emitted_records_are_deterministic_apart_from_timings() {
        let cfg = small_config(vec![Method::DgLse, Method::BdgBe]);
        let dir = tempfile::tempdir().unwrap();
        let mask_timings = |path: PathBuf| -> Vec<String> {
            fs::read_to_string(path)
                .unwrap()
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f[7] = "";
                    f[8] = "";
                    f.join(",")
                })
                .collect()
        };
        emit_report(&run_error_sweep(&cfg).unwrap(), dir.path().join("a")).unwrap();
        emit_report(&run_error_sweep(&cfg).unwrap(), dir.path().join("b")).unwrap();
        let a = mask_timings(dir.path().join("a/records.csv"));
        assert_eq!(a, mask_timings(dir.path().join("b/records.csv")));
        assert_eq!(a.len(), 1 + 12);
        assert_eq!(a[0].split(',').count(), RECORDS_HEADER.split(',').count());
        assert!(dir.path().join("a/curves/DG-LSE.dat").exists());
        assert!(dir.path().join("a/sensors/BDG-BE_p4.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config"]["r1"], 3);
    }

    #[test]
    fn empty_report_has_header_only() {
        let cfg = small_config(vec![Method::DgLse]);
        let report = SweepReport::new(SweepKind::Error, &cfg, Vec::new(), None);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        assert_eq!(
            fs::read_to_string(dir.path().join("records.csv")).unwrap(),
            format!("{RECORDS_HEADER}\n")
        );
    }

    #[test]
    fn grid_sensor_maps_are_written() {
        let mut cfg = ExperimentConfig::new(
            DatasetSpec::SmoothGrid {
                width: 10,
                height: 6,
                m: 12,
                hole: Some([2, 1, 3, 2]),
            },
            3,
            vec![4],
            vec![Method::BdgBe],
        );
        cfg.seeds = vec![5];
        let report = run_error_sweep(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        let grid_file = dir
            .path()
            .join(format!("sensors/BDG-BE_p4_seed5_r2-{}_grid.csv", 12 - 3));
        let text = fs::read_to_string(grid_file).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.matches("NaN").count(), 6);
        assert_eq!(text.matches("1.0000000000000000e0").count(), 4);
    }

    #[test]
    fn errors_carry_run_context() {
        let cfg = small_config(vec![Method::BruteBe]);
        let err = run_error_sweep(&cfg).unwrap_err();
        match err {
            SensingError::Run { method, p, seed, .. } => {
                assert_eq!((method.as_str(), seed), ("BRUTE-BE", 1));
                assert!(p >= 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
