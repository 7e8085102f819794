//! Monte Carlo harness over random grid systems: per-trial nerve statistics,
//! growth-rate fits, and connectivity phase tables.
//!
//! Trials are deterministic functions of `(seed, trial_index)`: each trial
//! derives its own counter-based generator stream, so runs are reproducible
//! bit for bit and independent of scheduling order.

use anyhow::{bail, Result};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fractal_nerve_core::homology::{betti, cross_edge_basis};
use fractal_nerve_core::ifs::{sample_level_sets, GridIfs, Tail};
use fractal_nerve_core::nerve::{
    build_nerve, components, disconnection_certificate, NerveError, NerveOptions, UnknownPolicy,
};

fn default_budget() -> u64 {
    5_000_000
}

fn default_resample_cap() -> usize {
    10_000
}

/// Configuration of one experiment batch; consumed as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: Vec<u32>,
    pub r: usize,
    pub kmax: usize,
    pub trials: usize,
    pub seed: u64,
    /// Number of sampled levels; the sequence repeats periodically beyond.
    /// Defaults to `max(kmax, 12)`.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Resample the whole level sequence until the no-corner condition
    /// holds (planar systems only).
    #[serde(default)]
    pub require_no_corner: bool,
    #[serde(default = "default_budget")]
    pub cell_budget: u64,
    #[serde(default = "default_resample_cap")]
    pub resample_cap: usize,
    /// Record per-axis component projection spans at the deepest stage.
    #[serde(default)]
    pub record_spans: bool,
    /// Cap on the simplex dimension of built nerves; `None` builds the full
    /// nerve (up to `2^d - 1`). Connectivity-only experiments are much
    /// faster with `Some(1)`, at the cost of exact `betti1`.
    #[serde(default)]
    pub maxdim: Option<usize>,
}

impl TrialConfig {
    pub fn new(n: Vec<u32>, r: usize, kmax: usize, trials: usize, seed: u64) -> TrialConfig {
        TrialConfig {
            n,
            r,
            kmax,
            trials,
            seed,
            horizon: None,
            require_no_corner: false,
            cell_budget: default_budget(),
            resample_cap: default_resample_cap(),
            record_spans: false,
            maxdim: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.kmax.max(12))
    }

    fn validate(&self) -> Result<()> {
        let total: usize = self.n.iter().map(|&v| v as usize).product();
        if self.r == 0 || self.r >= total {
            bail!("r={} out of range 1..={}", self.r, total - 1);
        }
        if self.kmax < 2 {
            bail!("kmax must be at least 2");
        }
        if self.horizon() < self.kmax - 1 {
            bail!("horizon {} shorter than kmax-1", self.horizon());
        }
        Ok(())
    }
}

/// Per-stage statistics of one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: usize,
    pub connected: bool,
    pub components: usize,
    /// Exact `rank H_1(N_{1,k})` when the built complex is the honest nerve
    /// (a graph after the no-corner cap, or dimension 1 anyway).
    pub betti1: Option<usize>,
    pub cross_edges: usize,
    /// Per axis: number of levels `t <= k-1` with a cut normal to the axis.
    pub cut_counts: Vec<usize>,
    pub certificate: f64,
    /// Largest component projection span per axis, only at the deepest stage
    /// when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_spans: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub resamples: usize,
    pub no_corner: bool,
    /// Per axis: number of levels within the horizon with a cut normal to
    /// the axis.
    pub cuts_by_horizon: Vec<usize>,
    /// Whether a full line in each axis direction persists (core-line
    /// witness from level 1).
    pub core_line: Vec<bool>,
    pub stages: Vec<StageRecord>,
    /// Set when the cell budget truncated the stage list.
    pub truncated: bool,
}

/// Samples the trial's system: `horizon` uniform draws from `𝒫_r(I)`, tail
/// repeating periodically, optionally conditioned on the no-corner event by
/// resampling.
pub fn sample_system(config: &TrialConfig, trial: usize) -> Result<(GridIfs, usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64 + 1);
    let horizon = config.horizon();
    let mut resamples = 0usize;
    loop {
        let levels = sample_level_sets(&config.n, config.r, horizon, &mut rng)?;
        let ifs = GridIfs::from_digit_ids(config.n.clone(), levels, Tail::Periodic(horizon))?;
        let no_corner = ifs.no_corner_check();
        if !config.require_no_corner || no_corner {
            return Ok((ifs, resamples, no_corner));
        }
        resamples += 1;
        if resamples >= config.resample_cap {
            return Ok((ifs, resamples, false));
        }
    }
}

/// Runs one trial: builds `N_{1,k}` for `k = 2..=kmax` and records the
/// connectivity, homology, cut, and certificate statistics.
pub fn run_trial(config: &TrialConfig, trial: usize) -> Result<TrialRecord> {
    config.validate()?;
    let (ifs, resamples, no_corner) = sample_system(config, trial)?;
    let d = ifs.dim();
    let horizon = config.horizon();

    let cuts_by_horizon: Vec<usize> = (0..d)
        .map(|axis| {
            (1..=horizon)
                .filter(|&t| ifs.detect_cut_at(t, axis).is_some())
                .count()
        })
        .collect();
    let core_line: Vec<bool> = (0..d)
        .map(|axis| ifs.core_line_witness(1, axis).is_some())
        .collect();

    let options = NerveOptions {
        maxdim: config.maxdim,
        unknown_policy: UnknownPolicy::Outer,
        cell_budget: config.cell_budget,
        auto_no_corner_cap: true,
    };

    let mut stages = Vec::with_capacity(config.kmax - 1);
    let mut truncated = false;
    let mut prev_components = 0usize;
    for k in 2..=config.kmax {
        let nerve = match build_nerve(&ifs, 1, k, &options) {
            Ok(n) => n,
            Err(NerveError::BudgetExceeded { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let parts = components(&nerve);
        // Exact H1 needs the 2-skeleton, unless its absence is proved (the
        // no-corner cap) or geometric (d = 1); and the reduction must stay
        // tractable: a graph, or small enough for Smith normal form.
        let h1_complete = nerve.maxdim_built >= 2 || nerve.no_corner_capped || d == 1;
        let tractable = nerve.dim() <= 1 || nerve.vertex_count() <= 20_000;
        let betti1 = if h1_complete && tractable {
            let report = betti(&nerve);
            debug_assert_eq!(report.betti0(), parts.count);
            Some(report.betti1())
        } else {
            None
        };
        // Components never merge as k grows (the component maps are onto).
        debug_assert!(parts.count >= prev_components);
        prev_components = parts.count;

        let cross_edges = if k >= 3 {
            cross_edge_basis(&nerve).len()
        } else {
            0
        };
        let cut_counts: Vec<usize> = (0..d)
            .map(|axis| {
                (1..k)
                    .filter(|&t| ifs.detect_cut_at(t, axis).is_some())
                    .count()
            })
            .collect();
        let certificate = disconnection_certificate(&ifs, k, &parts)
            .to_f64()
            .unwrap_or(f64::NAN);
        let max_spans = if config.record_spans && k == config.kmax {
            Some(component_max_spans(&ifs, &nerve, &parts))
        } else {
            None
        };
        stages.push(StageRecord {
            k,
            connected: parts.is_connected(),
            components: parts.count,
            betti1,
            cross_edges,
            cut_counts,
            certificate,
            max_spans,
        });
    }

    Ok(TrialRecord {
        trial,
        resamples,
        no_corner,
        cuts_by_horizon,
        core_line,
        stages,
        truncated,
    })
}

fn component_max_spans(
    ifs: &GridIfs,
    nerve: &fractal_nerve_core::nerve::SimplicialComplex,
    parts: &fractal_nerve_core::nerve::ComponentPartition,
) -> Vec<f64> {
    let d = ifs.dim();
    let depth = nerve.k - nerve.j;
    let scale = ifs.cell_scale(depth).unwrap();
    let mut lo = vec![vec![i64::MAX; parts.count]; d];
    let mut hi = vec![vec![i64::MIN; parts.count]; d];
    for v in 0..nerve.vertex_count() as u32 {
        let corner = nerve.grid_corner(v);
        let c = parts.comp[v as usize] as usize;
        for a in 0..d {
            lo[a][c] = lo[a][c].min(corner[a]);
            hi[a][c] = hi[a][c].max(corner[a] + 1);
        }
    }
    (0..d)
        .map(|a| {
            (0..parts.count)
                .map(|c| (hi[a][c] - lo[a][c]) as f64 / scale[a] as f64)
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// Runs all trials of the batch in parallel; the output order is by trial
/// index regardless of scheduling.
pub fn run_trials(config: &TrialConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

/// Which per-stage quantity the growth fit regresses (log scale against k).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitQuantity {
    /// `log rank H_1(N_{1,k})`.
    RankH1,
    /// `log |rank H_1 - rank H_0|`, the quantity driven by the recursion when
    /// components proliferate.
    RankDiffAbs,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub mean_slope: f64,
    pub stderr: f64,
    pub per_trial: Vec<Option<f64>>,
    pub excluded_zero_stages: usize,
    pub window: (usize, usize),
}

/// Least-squares slope of the log quantity per trial, averaged over trials.
/// Stages where the quantity vanishes are excluded (and counted).
pub fn growth_rate_fit(
    records: &[TrialRecord],
    window: (usize, usize),
    quantity: FitQuantity,
) -> Option<GrowthFit> {
    let mut per_trial = Vec::with_capacity(records.len());
    let mut excluded = 0usize;
    for record in records {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for stage in &record.stages {
            if stage.k < window.0 || stage.k > window.1 {
                continue;
            }
            let value = match quantity {
                FitQuantity::RankH1 => stage.betti1.map(|b| b as f64),
                FitQuantity::RankDiffAbs => stage
                    .betti1
                    .map(|b| (b as f64 - stage.components as f64).abs()),
            };
            match value {
                Some(v) if v > 0.0 => points.push((stage.k as f64, v.ln())),
                Some(_) => excluded += 1,
                None => {}
            }
        }
        per_trial.push(ols_slope(&points));
    }
    let slopes: Vec<f64> = per_trial.iter().filter_map(|s| *s).collect();
    if slopes.is_empty() {
        return None;
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let var = if slopes.len() > 1 {
        slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64
    } else {
        0.0
    };
    Some(GrowthFit {
        mean_slope: mean,
        stderr: (var / slopes.len() as f64).sqrt(),
        per_trial,
        excluded_zero_stages: excluded,
        window,
    })
}

fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// One row of the connectivity phase table.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseRow {
    pub r: usize,
    pub trials: usize,
    pub connected_fraction: f64,
    /// Fraction of trials with at least one cut on every axis within the
    /// horizon.
    pub all_axis_cut_fraction: f64,
    pub mean_final_certificate: f64,
    /// Fraction of trials whose final certificate is strictly below the
    /// stage-2 value.
    pub certificate_decreased_fraction: f64,
    /// Per axis: fraction of trials with a persistent full line in that
    /// direction.
    pub core_line_fraction: Vec<f64>,
    /// Per axis: mean over trials of the largest component projection span
    /// at the deepest stage (present when spans were recorded).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_max_span: Option<Vec<f64>>,
}

/// Runs a batch per removal count and aggregates the phase statistics.
pub fn connectivity_phase_table(base: &TrialConfig, r_values: &[usize]) -> Result<Vec<PhaseRow>> {
    let mut rows = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut config = base.clone();
        config.r = r;
        let records = run_trials(&config)?;
        rows.push(phase_row(&config, &records));
    }
    Ok(rows)
}

pub fn phase_row(config: &TrialConfig, records: &[TrialRecord]) -> PhaseRow {
    let d = config.n.len();
    let trials = records.len();
    let connected = records
        .iter()
        .filter(|t| t.stages.last().map(|s| s.connected).unwrap_or(false))
        .count();
    let all_axis = records
        .iter()
        .filter(|t| t.cuts_by_horizon.iter().all(|&c| c > 0))
        .count();
    let mean_cert = records
        .iter()
        .filter_map(|t| t.stages.last().map(|s| s.certificate))
        .sum::<f64>()
        / trials.max(1) as f64;
    let decreased = records
        .iter()
        .filter(|t| {
            let first = t.stages.first().map(|s| s.certificate);
            let last = t.stages.last().map(|s| s.certificate);
            matches!((first, last), (Some(f), Some(l)) if l < f)
        })
        .count();
    let core_line_fraction: Vec<f64> = (0..d)
        .map(|a| records.iter().filter(|t| t.core_line[a]).count() as f64 / trials.max(1) as f64)
        .collect();
    let mean_max_span = if config.record_spans {
        let mut acc = vec![0.0f64; d];
        let mut n = 0usize;
        for t in records {
            if let Some(spans) = t.stages.last().and_then(|s| s.max_spans.as_ref()) {
                for a in 0..d {
                    acc[a] += spans[a];
                }
                n += 1;
            }
        }
        if n > 0 {
            Some(acc.into_iter().map(|v| v / n as f64).collect())
        } else {
            None
        }
    } else {
        None
    };
    PhaseRow {
        r: config.r,
        trials,
        connected_fraction: connected as f64 / trials.max(1) as f64,
        all_axis_cut_fraction: all_axis as f64 / trials.max(1) as f64,
        mean_final_certificate: mean_cert,
        certificate_decreased_fraction: decreased as f64 / trials.max(1) as f64,
        core_line_fraction,
        mean_max_span,
    }
}

/// CSV rows: `trial,k,connected,components,betti1,cross_edges,cut_axis1,…,
/// cut_axisd,certificate`; one row per trial per stage, header always
/// present.
pub fn records_csv(d: usize, records: &[TrialRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "trial".to_string(),
        "k".to_string(),
        "connected".to_string(),
        "components".to_string(),
        "betti1".to_string(),
        "cross_edges".to_string(),
    ];
    for a in 0..d {
        header.push(format!("cut_axis{}", a + 1));
    }
    header.push("certificate".to_string());
    writer.write_record(&header)?;
    for t in records {
        for s in &t.stages {
            let mut row = vec![
                t.trial.to_string(),
                s.k.to_string(),
                (s.connected as u8).to_string(),
                s.components.to_string(),
                s.betti1.map(|b| b.to_string()).unwrap_or_default(),
                s.cross_edges.to_string(),
            ];
            for a in 0..d {
                row.push(s.cut_counts[a].to_string());
            }
            row.push(format!("{}", s.certificate));
            writer.write_record(&row)?;
        }
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// JSON summary of a batch: the config, per-stage aggregates, and cut
/// statistics.
pub fn summary_json(config: &TrialConfig, records: &[TrialRecord]) -> serde_json::Value {
    let d = config.n.len();
    let per_k: Vec<serde_json::Value> = (2..=config.kmax)
        .map(|k| {
            let stages: Vec<&StageRecord> = records
                .iter()
                .filter_map(|t| t.stages.iter().find(|s| s.k == k))
                .collect();
            let n = stages.len().max(1) as f64;
            serde_json::json!({
                "k": k,
                "trials": stages.len(),
                "connected_fraction": stages.iter().filter(|s| s.connected).count() as f64 / n,
                "mean_components": stages.iter().map(|s| s.components as f64).sum::<f64>() / n,
                "mean_betti1": stages
                    .iter()
                    .filter_map(|s| s.betti1.map(|b| b as f64))
                    .sum::<f64>()
                    / stages.iter().filter(|s| s.betti1.is_some()).count().max(1) as f64,
                "mean_certificate": stages.iter().map(|s| s.certificate).sum::<f64>() / n,
            })
        })
        .collect();
    let all_axis = records
        .iter()
        .filter(|t| t.cuts_by_horizon.iter().all(|&c| c > 0))
        .count();
    serde_json::json!({
        "config": config,
        "trials": records.len(),
        "truncated_trials": records.iter().filter(|t| t.truncated).count(),
        "all_axis_cut_trials": all_axis,
        "axes": d,
        "per_k": per_k,
    })
}
