//! Monte-Carlo experiment drivers: seeded, order-independent replicate
//! execution with CSV output and slope diagnostics.

use std::path::PathBuf;
use std::time::Instant;

use mopup_core::linalg::{self, Matrix};
use mopup_core::mopup::{self, rank_grid};
use mopup_core::oracles;
use mopup_core::spiked::{self, MatrixModelParams, MatrixSampleSet};
use mopup_core::{baselines, ApOptions, NoiseSpec, ScoreDist};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    ScaleP1,
    ScaleR,
    ScaleN,
    RankBic,
    CompareMpca,
    VerifyBounds,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::ScaleP1 => "scale_p1",
            Study::ScaleR => "scale_R",
            Study::ScaleN => "scale_n",
            Study::RankBic => "rank_bic",
            Study::CompareMpca => "compare_mpca",
            Study::VerifyBounds => "verify_bounds",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "scale_p1" => Some(Study::ScaleP1),
            "scale_R" | "scale_r" => Some(Study::ScaleR),
            "scale_n" => Some(Study::ScaleN),
            "rank_bic" => Some(Study::RankBic),
            "compare_mpca" => Some(Study::CompareMpca),
            "verify_bounds" => Some(Study::VerifyBounds),
            _ => None,
        }
    }
}

/// TOML experiment description; every field except `study` has a
/// study-specific default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    pub p1: Option<usize>,
    pub p2: Option<usize>,
    pub r1: Option<usize>,
    pub r2: Option<usize>,
    pub n: Option<usize>,
    /// Noise family: none | uniform | gaussian | student_t3.
    pub noise: Option<String>,
    /// Noise level R when the sweep is not over R itself.
    pub noise_scale: Option<f64>,
    /// Score distribution: uniform | gaussian.
    pub score_dist: Option<String>,
    pub sweep: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub base_seed: Option<u64>,
    /// AP iteration budget t0 (default 10).
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub deterministic: Option<bool>,
    /// Rank grid bounds for rank_bic (default 2..9).
    pub grid_min: Option<usize>,
    pub grid_max: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for Study {
    fn default() -> Self {
        Study::ScaleN
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub study: Study,
    pub p1: usize,
    pub p2: usize,
    pub r1: usize,
    pub r2: usize,
    pub n: usize,
    pub noise_family: String,
    pub noise_scale: f64,
    pub score_dist: ScoreDist,
    pub sweep: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub opts: ApOptions,
    pub grid_min: usize,
    pub grid_max: usize,
    pub output: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn noise_spec(family: &str, scale: f64) -> Result<NoiseSpec, CliError> {
    match family {
        "none" => Ok(NoiseSpec::none()),
        "uniform" => Ok(NoiseSpec::uniform(scale)),
        "gaussian" => Ok(NoiseSpec::gaussian(scale)),
        "student_t3" => Ok(NoiseSpec::student_t3(scale)),
        other => Err(config_err(format!("unknown noise family '{other}'"))),
    }
}

pub fn score_dist(name: &str) -> Result<ScoreDist, CliError> {
    match name {
        "uniform" => Ok(ScoreDist::UniformPm1),
        "gaussian" => Ok(ScoreDist::GaussianStd),
        other => Err(config_err(format!("unknown score distribution '{other}'"))),
    }
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let study = self.study;
        // Defaults: n = 256 for the p1 and R panels, the standard desk-scale
        // geometry (p1, p2) = (40, 30) with ranks (5, 7), t0 = 10 iterations.
        let (dp1, dr1, dr2, dn, dscale, dreps) = match study {
            Study::ScaleP1 => (40, 5, 7, 256, 0.1, 10),
            Study::ScaleR => (40, 5, 7, 256, 0.1, 10),
            Study::ScaleN => (40, 5, 7, 256, 0.1, 10),
            Study::RankBic => (30, 3, 4, 5, 0.05, 20),
            Study::CompareMpca => (30, 3, 4, 20, 0.1, 10),
            Study::VerifyBounds => (20, 3, 4, 1, 0.1, 50),
        };
        let default_sweep: Vec<f64> = match study {
            Study::ScaleP1 => vec![10.0, 20.0, 40.0, 80.0, 160.0],
            Study::ScaleR => vec![0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            Study::ScaleN => (2u32..=12).map(|i| f64::from(2u32.pow(i))).collect(),
            Study::RankBic => vec![0.05, 0.1, 0.2],
            Study::CompareMpca => vec![0.0, 0.05, 0.1, 0.2],
            Study::VerifyBounds => vec![5.0, 10.0, 20.0, 30.0],
        };
        let sweep = self.sweep.clone().unwrap_or(default_sweep);
        if sweep.is_empty() {
            return Err(config_err("sweep must be non-empty"));
        }
        let replicates = self.replicates.unwrap_or(dreps);
        if replicates < 1 {
            return Err(config_err("replicates must be at least 1"));
        }
        let cfg = ResolvedConfig {
            study,
            p1: self.p1.unwrap_or(dp1),
            p2: self.p2.unwrap_or(30),
            r1: self.r1.unwrap_or(dr1),
            r2: self.r2.unwrap_or(dr2),
            n: self.n.unwrap_or(dn),
            noise_family: self.noise.clone().unwrap_or_else(|| "gaussian".into()),
            noise_scale: self.noise_scale.unwrap_or(dscale),
            score_dist: score_dist(self.score_dist.as_deref().unwrap_or("uniform"))?,
            sweep,
            replicates,
            base_seed: self.base_seed.unwrap_or(17),
            opts: ApOptions {
                max_iter: self.max_iter.unwrap_or(10),
                tol: self.tol.unwrap_or(1e-8),
                deterministic: self.deterministic.unwrap_or(false),
                ..Default::default()
            },
            grid_min: self.grid_min.unwrap_or(2),
            grid_max: self.grid_max.unwrap_or(9),
            output: self.output.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ResolvedConfig {
    fn validate(&self) -> Result<(), CliError> {
        noise_spec(&self.noise_family, self.noise_scale)?;
        if self.study == Study::VerifyBounds {
            for &v in &self.sweep {
                if v < 2.0 {
                    return Err(config_err("verify_bounds sweep dimensions must be >= 2"));
                }
            }
            return Ok(());
        }
        let check = |p1: usize, p2: usize| -> Result<(), CliError> {
            if self.r1 + self.r2 >= p1.min(p2) {
                return Err(config_err(format!(
                    "r1 + r2 = {} must be below min(p1, p2) = {} for identifiability",
                    self.r1 + self.r2,
                    p1.min(p2)
                )));
            }
            Ok(())
        };
        match self.study {
            Study::ScaleP1 => {
                for &v in &self.sweep {
                    if v < 2.0 || v.fract() != 0.0 {
                        return Err(config_err("scale_p1 sweep values must be integers >= 2"));
                    }
                    check(v as usize, self.p2)?;
                }
            }
            Study::ScaleN => {
                for &v in &self.sweep {
                    if v < 2.0 || v.fract() != 0.0 {
                        return Err(config_err("scale_n sweep values must be integers >= 2"));
                    }
                }
                check(self.p1, self.p2)?;
            }
            Study::ScaleR | Study::CompareMpca => {
                for &v in &self.sweep {
                    if v < 0.0 {
                        return Err(config_err("noise sweep values must be non-negative"));
                    }
                }
                check(self.p1, self.p2)?;
            }
            Study::RankBic => {
                if self.grid_min < 1 || self.grid_max < self.grid_min {
                    return Err(config_err("rank grid bounds must satisfy 1 <= min <= max"));
                }
                if self.grid_max >= self.p1.min(self.p2) {
                    return Err(config_err("rank grid maximum must be below min(p1, p2)"));
                }
            }
            Study::VerifyBounds => unreachable!(),
        }
        Ok(())
    }

    pub fn extra_columns(&self) -> &'static [&'static str] {
        match self.study {
            Study::ScaleP1 | Study::ScaleR | Study::ScaleN => &[],
            Study::RankBic => &["r1_hat", "r2_hat", "dr1", "dr2"],
            Study::CompareMpca => &["err_mpca", "err_hosvd"],
            Study::VerifyBounds => &["rhs_spec", "lhs_frob", "rhs_frob", "violations"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub sweep: f64,
    pub replicate: usize,
    pub seed: u64,
    pub err_max: f64,
    pub err_u: f64,
    pub err_v: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub extras: Vec<f64>,
}

/// splitmix64 finalizer; replicate seeds derive from (base_seed, sweep
/// index, replicate index) so execution order never matters.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn job_seed(base: u64, sweep_idx: usize, replicate: usize) -> u64 {
    mix(mix(mix(base).wrapping_add(sweep_idx as u64)).wrapping_add(replicate as u64))
}

fn fit_errors(
    set: &MatrixSampleSet,
    fit: &mopup_core::FitResult,
) -> Result<(f64, f64, f64), CliError> {
    let truth = set
        .truth()
        .ok_or_else(|| config_err("generated set lost its ground truth"))?;
    let eu = linalg::sin_theta(&truth.params.u_loading, &fit.u_hat)?;
    let ev = linalg::sin_theta(&truth.params.v_loading, &fit.v_hat)?;
    Ok((eu.max(ev), eu, ev))
}

fn generate(cfg: &ResolvedConfig, p1: usize, noise: NoiseSpec, n: usize, seed: u64)
    -> Result<MatrixSampleSet, CliError> {
    let params = MatrixModelParams::random(
        p1,
        cfg.p2,
        cfg.r1,
        cfg.r2,
        cfg.score_dist,
        noise,
        mix(seed ^ 0xA5A5),
    )?;
    Ok(spiked::sample_matrix_set(&params, n, mix(seed ^ 0x5A5A))?)
}

fn run_job(cfg: &ResolvedConfig, sweep_idx: usize, replicate: usize)
    -> Result<ExperimentRecord, CliError> {
    let sweep = cfg.sweep[sweep_idx];
    let seed = job_seed(cfg.base_seed, sweep_idx, replicate);
    let start = Instant::now();
    let mut record = ExperimentRecord {
        sweep,
        replicate,
        seed,
        err_max: 0.0,
        err_u: 0.0,
        err_v: 0.0,
        iterations: 0,
        wall_ms: 0.0,
        extras: Vec::new(),
    };
    match cfg.study {
        Study::ScaleP1 | Study::ScaleR | Study::ScaleN => {
            let (p1, scale, n) = match cfg.study {
                Study::ScaleP1 => (sweep as usize, cfg.noise_scale, cfg.n),
                Study::ScaleR => (cfg.p1, sweep, cfg.n),
                Study::ScaleN => (cfg.p1, cfg.noise_scale, sweep as usize),
                _ => unreachable!(),
            };
            let noise = noise_spec(&cfg.noise_family, scale)?;
            let set = generate(cfg, p1, noise, n, seed)?;
            let init = mopup::asc_init(&set, cfg.r1, cfg.r2)?;
            let fit = mopup::ap_fit(&set, cfg.r1, cfg.r2, init, &cfg.opts)?;
            (record.err_max, record.err_u, record.err_v) = fit_errors(&set, &fit)?;
            record.iterations = fit.iterations_run;
        }
        Study::RankBic => {
            let noise = noise_spec(&cfg.noise_family, sweep)?;
            let set = generate(cfg, cfg.p1, noise, cfg.n, seed)?;
            let grid = rank_grid(cfg.grid_min..=cfg.grid_max, cfg.grid_min..=cfg.grid_max);
            let sel = mopup::select_rank(&set, &grid, &cfg.opts)?;
            let fit = mopup::fit(&set, cfg.r1, cfg.r2, &cfg.opts)?;
            (record.err_max, record.err_u, record.err_v) = fit_errors(&set, &fit)?;
            record.iterations = fit.iterations_run;
            record.extras = vec![
                sel.chosen.0 as f64,
                sel.chosen.1 as f64,
                (sel.chosen.0 as f64 - cfg.r1 as f64).abs(),
                (sel.chosen.1 as f64 - cfg.r2 as f64).abs(),
            ];
        }
        Study::CompareMpca => {
            let noise = noise_spec(&cfg.noise_family, sweep)?;
            let set = generate(cfg, cfg.p1, noise, cfg.n, seed)?;
            let fit = mopup::fit(&set, cfg.r1, cfg.r2, &cfg.opts)?;
            (record.err_max, record.err_u, record.err_v) = fit_errors(&set, &fit)?;
            record.iterations = fit.iterations_run;
            let mpca = baselines::mpca_fit(&set, cfg.r1, cfg.r2, &cfg.opts)?;
            let (em, _, _) = fit_errors(&set, &mpca)?;
            let (hu, hv) = baselines::hosvd_matrix_init(&set, cfg.r1, cfg.r2)?;
            let truth = set.truth().expect("generated set keeps its truth");
            let eh = linalg::sin_theta(&truth.params.u_loading, &hu)?
                .max(linalg::sin_theta(&truth.params.v_loading, &hv)?);
            record.extras = vec![em, eh];
        }
        Study::VerifyBounds => {
            let p = sweep as usize;
            let r = (p / 4).max(1);
            let mut rng = spiked::stream_rng(seed, &[7]);
            let g = spiked::gaussian_matrix(p, p, &mut rng);
            let x = (&g + &g.transpose()) * 0.5;
            let e = spiked::gaussian_matrix(p, p, &mut rng);
            let z: Matrix = (&e + &e.transpose()) * (0.05 / p as f64);
            let rep = oracles::check_perturbation_bound(&x, &z, r)?;
            let violations = [rep.spectral, rep.frobenius]
                .iter()
                .filter(|b| b.applicable && !b.satisfied)
                .count();
            record.err_max = rep.spectral.lhs.min(1.0);
            record.err_u = record.err_max;
            record.err_v = record.err_max;
            record.extras = vec![
                rep.spectral.rhs,
                rep.frobenius.lhs,
                rep.frobenius.rhs,
                violations as f64,
            ];
        }
    }
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(record)
}

pub fn run_study(cfg: &ResolvedConfig) -> Result<Vec<ExperimentRecord>, CliError> {
    let jobs: Vec<(usize, usize)> = (0..cfg.sweep.len())
        .flat_map(|s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    #[cfg(feature = "parallel")]
    let records: Result<Vec<_>, CliError> = jobs
        .par_iter()
        .map(|&(s, r)| run_job(cfg, s, r))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<_>, CliError> =
        jobs.iter().map(|&(s, r)| run_job(cfg, s, r)).collect();
    records
}

pub fn records_to_csv(cfg: &ResolvedConfig, records: &[ExperimentRecord]) -> String {
    let mut header = vec![
        "study", "sweep", "replicate", "seed", "err_max", "err_u", "err_v", "iterations",
        "wall_ms",
    ];
    header.extend(cfg.extra_columns());
    let mut out = crate::io::csv_line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    out.push('\n');
    for rec in records {
        let mut fields = vec![
            cfg.study.name().to_string(),
            rec.sweep.to_string(),
            rec.replicate.to_string(),
            rec.seed.to_string(),
            rec.err_max.to_string(),
            rec.err_u.to_string(),
            rec.err_v.to_string(),
            rec.iterations.to_string(),
            rec.wall_ms.to_string(),
        ];
        fields.extend(rec.extras.iter().map(|v| v.to_string()));
        out.push_str(&crate::io::csv_line(&fields));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SummaryRow {
    pub sweep: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Per-sweep-value mean and standard deviation of err_max, in sweep order.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut sweeps: Vec<f64> = Vec::new();
    for rec in records {
        if !sweeps.contains(&rec.sweep) {
            sweeps.push(rec.sweep);
        }
    }
    sweeps
        .into_iter()
        .map(|s| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.sweep == s)
                .map(|r| r.err_max)
                .collect();
            let count = vals.len();
            let mean = vals.iter().sum::<f64>() / count as f64;
            let var = if count > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            SummaryRow {
                sweep: s,
                mean,
                std: var.sqrt(),
                count,
            }
        })
        .collect()
}

/// Least-squares slope of log(mean) against log(sweep) over rows with
/// positive sweep and mean; None with fewer than two usable rows.
pub fn loglog_slope(rows: &[SummaryRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sweep > 0.0 && r.mean > 0.0)
        .map(|r| (r.sweep.ln(), r.mean.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
