use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mopup_core::linalg::{self, Matrix};
use mopup_core::mopup::{self, rank_grid};
use mopup_core::oracles;
use mopup_core::spiked::{self, MatrixModelParams, TensorModelParams};
use mopup_core::{baselines, tensor_fit, ApOptions, Subspace, UpdateOrder};
use mopup_cli::experiment::{self, ExperimentConfig, Study};
use mopup_cli::{io, CliError};

#[derive(Parser)]
#[command(name = "mopup", version, about = "Mode-wise principal subspace pursuit")]
struct Cli {
    /// Base seed for anything randomized.
    #[arg(long, global = true, default_value_t = 17)]
    seed: u64,
    /// Worker-pool size (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bit-reproducible reductions regardless of thread count.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitKind {
    Asc,
    Hosvd,
    Random,
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderKind {
    /// Both updates read the previous iterate.
    Paper,
    /// The second update reads the refreshed first mode.
    GaussSeidel,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a sample set from the spiked model and write it out.
    Generate(GenerateArgs),
    /// Fit mode-wise subspaces to a matrix sample set.
    Fit(FitArgs),
    /// Fit mode-wise subspaces to an order-d tensor sample set.
    FitTensor(FitTensorArgs),
    /// BIC rank selection over a rank grid.
    Rank(RankArgs),
    /// Fit, then write the denoised sample set.
    Denoise(DenoiseArgs),
    /// Run a Monte-Carlo study from a TOML config and emit CSV.
    Bench(BenchArgs),
    /// Run the theory-verification oracle suites.
    Verify(VerifyArgs),
    /// Compare the fit against MPCA and HOSVD baselines on one data set.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 40)]
    p1: usize,
    #[arg(long, default_value_t = 30)]
    p2: usize,
    #[arg(long, default_value_t = 5)]
    r1: usize,
    #[arg(long, default_value_t = 7)]
    r2: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// none | uniform | gaussian | student_t3
    #[arg(long, default_value = "gaussian")]
    noise: String,
    #[arg(long, default_value_t = 0.1)]
    noise_scale: f64,
    /// uniform | gaussian
    #[arg(long, default_value = "uniform")]
    score_dist: String,
    /// Tensor dimensions (e.g. 8,8,8); overrides --p1/--p2 and emits TST1.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Tensor mode ranks matching --dims.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
}

#[derive(Args)]
struct FitArgs {
    /// Input sample set (MST1).
    input: PathBuf,
    /// Target ranks r1,r2.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    #[arg(long, value_enum, default_value_t = InitKind::Asc)]
    init: InitKind,
    /// Loadings file (MSB1) for --init file.
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = OrderKind::Paper)]
    update_order: OrderKind,
}

#[derive(Args)]
struct FitTensorArgs {
    /// Input sample set (TST1).
    input: PathBuf,
    /// Target ranks, one per mode.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct RankArgs {
    /// Input sample set (MST1).
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    grid_min: usize,
    #[arg(long, default_value_t = 9)]
    grid_max: usize,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Input sample set (MST1).
    input: PathBuf,
    /// Target ranks r1,r2.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML experiment config; omit to use --study defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// scale_p1 | scale_R | scale_n | rank_bic | compare_mpca | verify_bounds
    #[arg(long)]
    study: Option<String>,
    /// Print per-sweep mean/std and slope diagnostics to stderr.
    #[arg(long, default_value_t = true)]
    summary: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// all | bounds | minimizer | intersection
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Input sample set (MST1).
    input: PathBuf,
    /// Target ranks r1,r2.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn rank_pair(rank: &[usize]) -> Result<(usize, usize), CliError> {
    match rank {
        [r1, r2] => Ok((*r1, *r2)),
        _ => Err(config_err("--rank expects exactly two values r1,r2")),
    }
}

fn run_generate(cli: &Cli, args: &GenerateArgs) -> Result<(), CliError> {
    let score = experiment::score_dist(&args.score_dist)?;
    let noise = experiment::noise_spec(&args.noise, args.noise_scale)?;
    if let Some(dims) = &args.dims {
        let ranks = args
            .ranks
            .clone()
            .ok_or_else(|| config_err("--dims requires matching --ranks"))?;
        let params = TensorModelParams::random(dims, &ranks, score, noise, cli.seed)?;
        let set = spiked::sample_tensor_set(&params, args.n, cli.seed.wrapping_add(1))?;
        return emit(&cli.out, &io::tensor_set_string(&set));
    }
    let params = MatrixModelParams::random(
        args.p1,
        args.p2,
        args.r1,
        args.r2,
        score,
        noise,
        cli.seed,
    )?;
    let set = spiked::sample_matrix_set(&params, args.n, cli.seed.wrapping_add(1))?;
    emit(&cli.out, &io::matrix_set_string(&set))
}

fn run_fit(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let set = io::read_matrix_set(&args.input)?;
    let (r1, r2) = rank_pair(&args.rank)?;
    let opts = ApOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        update_order: match args.update_order {
            OrderKind::Paper => UpdateOrder::PaperJacobi,
            OrderKind::GaussSeidel => UpdateOrder::GaussSeidel,
        },
        deterministic: cli.deterministic,
        ..Default::default()
    };
    let init = match args.init {
        InitKind::Asc => mopup::asc_init(&set, r1, r2)?,
        InitKind::Hosvd => baselines::hosvd_matrix_init(&set, r1, r2)?,
        InitKind::Random => (
            spiked::random_subspace(set.p1(), r1, cli.seed)?,
            spiked::random_subspace(set.p2(), r2, cli.seed.wrapping_add(1))?,
        ),
        InitKind::File => {
            let path = args
                .init_file
                .as_ref()
                .ok_or_else(|| config_err("--init file requires --init-file"))?;
            let loadings = io::read_loadings(path)?;
            match loadings.as_slice() {
                [u, v] => (Subspace::new(u.clone())?, Subspace::new(v.clone())?),
                _ => return Err(config_err("init file must hold exactly two modes")),
            }
        }
    };
    let fit = mopup::ap_fit(&set, r1, r2, init, &opts)?;
    let objective = mopup::objective(&set, &fit.u_hat, &fit.v_hat)?;
    eprintln!(
        "fit: rank ({r1}, {r2}), {} iterations, converged = {}, objective = {objective:.6e}",
        fit.iterations_run, fit.converged
    );
    if cli.out.is_some() {
        emit(
            &cli.out,
            &io::loadings_string(&[fit.u_hat.basis(), fit.v_hat.basis()]),
        )?;
    }
    Ok(())
}

fn run_fit_tensor(cli: &Cli, args: &FitTensorArgs) -> Result<(), CliError> {
    let set = io::read_tensor_set(&args.input)?;
    if args.rank.len() != set.dims().len() {
        return Err(config_err(format!(
            "--rank expects {} values for an order-{} set",
            set.dims().len(),
            set.dims().len()
        )));
    }
    let opts = ApOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        deterministic: cli.deterministic,
        ..Default::default()
    };
    let init = tensor_fit::hosvd_init(&set, &args.rank)?;
    let fit = tensor_fit::ap_fit_tensor(&set, &args.rank, init, &opts)?;
    eprintln!(
        "fit-tensor: ranks {:?}, {} iterations, converged = {}",
        args.rank, fit.iterations_run, fit.converged
    );
    if cli.out.is_some() {
        let bases: Vec<&Matrix> = fit.loadings.iter().map(|u| u.basis()).collect();
        emit(&cli.out, &io::loadings_string(&bases))?;
    }
    Ok(())
}

fn run_rank(cli: &Cli, args: &RankArgs) -> Result<(), CliError> {
    let set = io::read_matrix_set(&args.input)?;
    let grid = rank_grid(args.grid_min..=args.grid_max, args.grid_min..=args.grid_max);
    let opts = ApOptions {
        max_iter: args.max_iter,
        deterministic: cli.deterministic,
        ..Default::default()
    };
    let sel = mopup::select_rank(&set, &grid, &opts)?;
    let mut csv = String::from("r1,r2,loss,bic\n");
    for ((&(r1, r2), &loss), &bic) in sel.grid.iter().zip(&sel.losses).zip(&sel.bic_scores) {
        csv.push_str(&format!("{r1},{r2},{loss},{bic}\n"));
    }
    eprintln!("rank: chosen ({}, {})", sel.chosen.0, sel.chosen.1);
    emit(&cli.out, &csv)
}

fn run_denoise(cli: &Cli, args: &DenoiseArgs) -> Result<(), CliError> {
    let set = io::read_matrix_set(&args.input)?;
    let (r1, r2) = rank_pair(&args.rank)?;
    let opts = ApOptions {
        max_iter: args.max_iter,
        deterministic: cli.deterministic,
        ..Default::default()
    };
    let fit = mopup::fit(&set, r1, r2, &opts)?;
    let denoised = mopup::denoise(&set, &fit.u_hat, &fit.v_hat)?;
    let out_set = mopup_core::MatrixSampleSet::new(denoised)?;
    emit(&cli.out, &io::matrix_set_string(&out_set))
}

fn run_bench(cli: &Cli, args: &BenchArgs) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = match (&args.config, &args.study) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| config_err(format!("bad config: {e}")))?
        }
        (None, Some(name)) => {
            let study = Study::from_name(name)
                .ok_or_else(|| config_err(format!("unknown study '{name}'")))?;
            ExperimentConfig {
                study,
                ..Default::default()
            }
        }
        (None, None) => return Err(config_err("bench needs --config or --study")),
    };
    if cfg.base_seed.is_none() {
        cfg.base_seed = Some(cli.seed);
    }
    if cli.deterministic {
        cfg.deterministic = Some(true);
    }
    let resolved = cfg.resolve()?;
    let records = experiment::run_study(&resolved)?;
    let csv = experiment::records_to_csv(&resolved, &records);
    if args.summary {
        let rows = experiment::summarize(&records);
        for row in &rows {
            eprintln!(
                "sweep {:>10}: mean err {:.4e}, std {:.4e} ({} reps)",
                row.sweep, row.mean, row.std, row.count
            );
        }
        if matches!(resolved.study, Study::ScaleP1 | Study::ScaleR | Study::ScaleN) {
            if let Some(slope) = experiment::loglog_slope(&rows) {
                eprintln!("log-log slope: {slope:.4}");
            }
        }
    }
    let target = cli.out.clone().or_else(|| resolved.output.clone());
    emit(&target, &csv)
}

fn run_verify(cli: &Cli, args: &VerifyArgs) -> Result<bool, CliError> {
    let mut all_ok = true;
    let run_bounds = matches!(args.suite.as_str(), "all" | "bounds");
    let run_min = matches!(args.suite.as_str(), "all" | "minimizer");
    let run_int = matches!(args.suite.as_str(), "all" | "intersection");
    if !(run_bounds || run_min || run_int) {
        return Err(config_err(format!("unknown suite '{}'", args.suite)));
    }

    if run_bounds {
        let mut violations = 0usize;
        let mut applicable = 0usize;
        for t in 0..args.trials {
            let seed = cli.seed.wrapping_add(t as u64);
            let p = 5 + (seed % 26) as usize;
            let r = 1 + (seed / 26 % (p as u64 - 1)) as usize / 3;
            let mut rng = spiked::stream_rng(seed, &[11]);
            let g = spiked::gaussian_matrix(p, p, &mut rng);
            let x = (&g + &g.transpose()) * 0.5;
            let e = spiked::gaussian_matrix(p, p, &mut rng);
            let z = (&e + &e.transpose()) * (0.05 / p as f64);
            let rep = oracles::check_perturbation_bound(&x, &z, r.min(p - 1))?;
            for b in [rep.spectral, rep.frobenius] {
                if b.applicable {
                    applicable += 1;
                    if !b.satisfied {
                        violations += 1;
                    }
                }
            }
        }
        let ok = violations == 0;
        all_ok &= ok;
        println!(
            "bounds: {} ({applicable} applicable checks, {violations} violations)",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    if run_min {
        let mut worst = f64::INFINITY;
        for t in 0..args.trials.min(50) {
            let seed = cli.seed.wrapping_add(1000 + t as u64);
            let params = MatrixModelParams::random(
                12,
                10,
                3,
                2,
                mopup_core::ScoreDist::GaussianStd,
                mopup_core::NoiseSpec::gaussian(0.1),
                seed,
            )?;
            let set = spiked::sample_matrix_set(&params, 8, seed.wrapping_add(1))?;
            let v = spiked::random_subspace(10, 2, seed.wrapping_add(2))?;
            let rep = oracles::check_prop1_minimizer(&set, &v, 3, 50, seed.wrapping_add(3))?;
            worst = worst.min(rep.worst_margin);
        }
        let ok = worst >= -1e-10;
        all_ok &= ok;
        println!(
            "minimizer: {} (worst margin {worst:.3e})",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    if run_int {
        let mut worst = 0.0f64;
        for t in 0..args.trials.min(50) {
            let seed = cli.seed.wrapping_add(2000 + t as u64);
            let params = MatrixModelParams::random(
                12,
                12,
                2,
                2,
                mopup_core::ScoreDist::GaussianStd,
                mopup_core::NoiseSpec::none(),
                seed,
            )?;
            let set = spiked::sample_matrix_set(&params, 5, seed.wrapping_add(1))?;
            let (u_hat, _) = mopup::asc_init(&set, 2, 2)?;
            let span = oracles::common_column_space(&set, 1e-9)?
                .ok_or_else(|| config_err("noiseless fixture lost its common span"))?;
            worst = worst.max(linalg::sin_theta(&span, &u_hat)?);
        }
        let ok = worst <= 1e-8;
        all_ok &= ok;
        println!(
            "intersection: {} (worst sin-theta {worst:.3e})",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(all_ok)
}

fn run_compare(cli: &Cli, args: &CompareArgs) -> Result<(), CliError> {
    let set = io::read_matrix_set(&args.input)?;
    let (r1, r2) = rank_pair(&args.rank)?;
    let opts = ApOptions {
        max_iter: args.max_iter,
        deterministic: cli.deterministic,
        ..Default::default()
    };
    let mopup_fit = mopup::fit(&set, r1, r2, &opts)?;
    let mpca_fit = baselines::mpca_fit(&set, r1, r2, &opts)?;
    let (hu, hv) = baselines::hosvd_matrix_init(&set, r1, r2)?;
    let mut csv = String::from("method,objective,iterations\n");
    for (name, u, v, iters) in [
        ("mopup", &mopup_fit.u_hat, &mopup_fit.v_hat, mopup_fit.iterations_run),
        ("mpca", &mpca_fit.u_hat, &mpca_fit.v_hat, mpca_fit.iterations_run),
        ("hosvd", &hu, &hv, 0),
    ] {
        let obj = mopup::objective(&set, u, v)?;
        csv.push_str(&format!("{name},{obj},{iters}\n"));
    }
    emit(&cli.out, &csv)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(t) = cli.threads {
        // A second invocation in-process would fail; that is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.cmd {
        Cmd::Generate(a) => run_generate(cli, a).map(|()| true),
        Cmd::Fit(a) => run_fit(cli, a).map(|()| true),
        Cmd::FitTensor(a) => run_fit_tensor(cli, a).map(|()| true),
        Cmd::Rank(a) => run_rank(cli, a).map(|()| true),
        Cmd::Denoise(a) => run_denoise(cli, a).map(|()| true),
        Cmd::Bench(a) => run_bench(cli, a).map(|()| true),
        Cmd::Verify(a) => run_verify(cli, a),
        Cmd::Compare(a) => run_compare(cli, a).map(|()| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        // A verify suite that ran but found violations.
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("mopup: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
