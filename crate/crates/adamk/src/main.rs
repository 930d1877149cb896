//! Experiment CLI. Exit codes: 0 success, 1 config error, 2 data/io error,
//! 3 numerical divergence. A train run that diverges still writes its trace
//! before exiting 3; a sweep exits 0 as long as the sweep itself ran, with
//! per-variant failures recorded in the summary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adamk::data::{load_idx, make_mini_mnist, synthetic_digits, write_idx_pair, Dataset};
use adamk::error::{Error, Result};
use adamk::harness::{
    estimate_for_config, estimation_stream, run_single, run_sweep, ExperimentConfig, Trace,
};
use adamk::lipschitz::{derive_step_size, runtime_threshold, StepSizeInputs};
use adamk::numerics::RngStream;
use adamk::verify::{
    check_theorem_bound, lemma1_check, lipschitz_convergence_probe, load_instances,
    random_instance, BoundParams,
};

#[derive(Parser)]
#[command(name = "adamk", version, about = "Adam with a derived constant step size: \
experiment runner and claim verifier")]
struct Cli {
    /// Worker threads for parallel estimation/sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a config file.
    Train(RunArgs),
    /// Run every [[sweep]] variant of a config and rank the outcomes.
    Sweep(RunArgs),
    /// Print the Lipschitz estimate a derived-rate run of this config would use.
    EstimateLipschitz(RunArgs),
    /// Print the constant step size for given loss gap, K estimate, and horizon.
    DeriveLr(DeriveArgs),
    /// Build the balanced 5500/1000 miniature dataset as IDX files.
    MakeMiniMnist(MakeArgs),
    /// Check the theory: bound satisfaction, descent inequality, estimator convergence.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        Ok(config)
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DeriveArgs {
    /// Loss at the initial weights, L(w0).
    #[arg(long)]
    loss0: f64,
    /// Estimated or certified Lipschitz constant.
    #[arg(long)]
    k_hat: f64,
    /// Step horizon T.
    #[arg(long)]
    t: u64,
    /// Loss at the minimizer (default 0, the practical simplification).
    #[arg(long, default_value_t = 0.0)]
    loss_min: f64,
    /// Theorem delta^2 = gamma^2/rho^2; omitted in the practical form.
    #[arg(long)]
    delta_sq: Option<f64>,
    /// Also print the step count needed to certify this accuracy.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct MakeArgs {
    /// Generate from the synthetic digit corpus instead of source IDX files.
    #[arg(long, conflicts_with_all = ["train_images", "train_labels", "test_images", "test_labels"])]
    synthetic: bool,
    /// Source training images (IDX, .gz ok).
    #[arg(long, requires_all = ["train_labels", "test_images", "test_labels"])]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Selection seed (and corpus seed in --synthetic mode).
    #[arg(long, default_value_t = 1_000_003)]
    seed: u64,
    /// Directory for the four output IDX files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Check a finished trace against the gradient-norm guarantee.
    Bound {
        /// Trace CSV written by `train`.
        #[arg(long)]
        trace: PathBuf,
        /// Bound parameters (TOML: k, gamma, rho, delta_loss, t, epsilon).
        #[arg(long)]
        params: PathBuf,
    },
    /// Check the descent inner-product inequality on explicit or random instances.
    Lemma1 {
        /// Instances file (TOML, [[instances]] tables).
        #[arg(long, conflicts_with_all = ["random", "seed"])]
        instances: Option<PathBuf>,
        /// Number of random hypothesis-satisfying instances to generate.
        #[arg(long)]
        random: Option<usize>,
        /// Seed for --random.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate K on growing sample counts and compare to the certified sup.
    LipschitzProbe {
        /// Experiment config naming the problem and sampler.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sample counts, strictly increasing.
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100, 1000, 10_000])]
        ns: Vec<usize>,
    },
}

fn main() -> ExitCode {
    // usage mistakes are config errors (exit 1) per the documented table;
    // clap's default of 2 is reserved for data errors here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Train(args) => train(&args.load()?),
        Cmd::Sweep(args) => sweep(&args.load()?),
        Cmd::EstimateLipschitz(args) => estimate(&args.load()?),
        Cmd::DeriveLr(args) => derive_lr(&args),
        Cmd::MakeMiniMnist(args) => make_mini(&args),
        Cmd::Verify(cmd) => verify(cmd),
    }
}

fn train(config: &ExperimentConfig) -> Result<u8> {
    let out = run_single(config)?;
    let trace = &out.trace;
    println!(
        "run {}: problem={} schedule={} mode={} epochs={}",
        out.name,
        trace.header.problem,
        trace.header.schedule,
        trace.header.mode,
        trace.header.epochs
    );
    if let (Some(alpha), Some(k_hat)) = (trace.header.derived_alpha, trace.header.k_hat) {
        println!("derived alpha = {alpha} (K_hat = {k_hat})");
    }
    println!(
        "start: loss = {}, grad_norm = {}",
        trace.header.loss0, trace.header.grad_norm0
    );
    if let Some(row) = trace.final_row() {
        let val = match (row.val_loss, row.val_acc) {
            (Some(l), Some(a)) => format!(", val_loss = {l}, val_acc = {a}"),
            _ => String::new(),
        };
        println!(
            "final (epoch {}): loss = {}, grad_norm = {}{val}",
            row.epoch, row.train_loss, row.grad_norm
        );
    }
    if let Some(path) = &out.trace_path {
        println!("trace: {}", path.display());
    }
    if let Some(epoch) = trace.diverged_at {
        eprintln!("run diverged at epoch {epoch}; partial trace kept");
        return Ok(3);
    }
    Ok(0)
}

fn sweep(config: &ExperimentConfig) -> Result<u8> {
    let outcome = run_sweep(config)?;
    print!("{}", outcome.summary.render());
    if let Some(path) = &outcome.summary_path {
        println!("summary: {}", path.display());
    }
    Ok(0)
}

fn estimate(config: &ExperimentConfig) -> Result<u8> {
    let problem = config.build_problem()?;
    let est = estimate_for_config(config, &problem)?;
    println!("K_hat = {}", est.k_hat);
    println!(
        "samples = {} valid, {} skipped (requested {})",
        est.per_sample_norms.len(),
        est.skipped,
        est.n_samples
    );
    println!("sampler = {}", est.sampler);
    println!("seed = {}", est.seed);
    Ok(0)
}

fn derive_lr(args: &DeriveArgs) -> Result<u8> {
    let alpha = derive_step_size(&StepSizeInputs {
        loss_at_init: args.loss0,
        loss_at_min: args.loss_min,
        k_hat: args.k_hat,
        horizon_t: args.t,
        delta_sq: args.delta_sq,
    })?;
    println!("alpha = {alpha}");
    if let Some(epsilon) = args.epsilon {
        let t = runtime_threshold(
            epsilon,
            args.k_hat,
            args.delta_sq.unwrap_or(1.0),
            args.loss0 - args.loss_min,
        )?;
        println!("steps for grad norm <= {epsilon}: T = {t}");
    }
    Ok(0)
}

fn make_mini(args: &MakeArgs) -> Result<u8> {
    let (train, test): (Dataset, Dataset) = if args.synthetic {
        // oversized corpus so the balanced selection below does real work
        synthetic_digits(700, 150, args.seed)?
    } else {
        match (&args.train_images, &args.train_labels, &args.test_images, &args.test_labels) {
            (Some(ti), Some(tl), Some(vi), Some(vl)) => {
                (load_idx(ti, tl)?, load_idx(vi, vl)?)
            }
            _ => {
                return Err(Error::config(
                    "pass --synthetic or all four of --train-images --train-labels \
                     --test-images --test-labels",
                ))
            }
        }
    };
    let mut rng = RngStream::new(args.seed);
    let (mini_train, mini_test) = make_mini_mnist(&train, &test, &mut rng)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let paths = [
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", &mini_train),
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", &mini_test),
    ];
    for (images, labels, ds) in paths {
        let ip = args.out.join(images);
        let lp = args.out.join(labels);
        write_idx_pair(ds, &ip, &lp)?;
        println!("wrote {} ({} examples)", ip.display(), ds.n());
        println!("wrote {}", lp.display());
    }
    Ok(0)
}

fn verify(cmd: VerifyCmd) -> Result<u8> {
    match cmd {
        VerifyCmd::Bound { trace, params } => {
            let trace = Trace::load(&trace)?;
            let params = BoundParams::load(&params)?;
            let report = check_theorem_bound(&trace, &params)?;
            print!("{}", report.render());
            Ok(0)
        }
        VerifyCmd::Lemma1 {
            instances,
            random,
            seed,
        } => {
            let list = match (instances, random) {
                (Some(path), None) => load_instances(&path)?,
                (None, Some(n)) => {
                    if n == 0 {
                        return Err(Error::config("--random needs at least 1 instance"));
                    }
                    let mut rng = RngStream::new(seed);
                    (0..n)
                        .map(|i| {
                            let beta2 = if i % 2 == 0 { 0.9 } else { 0.999 };
                            random_instance(&mut rng, beta2)
                        })
                        .collect()
                }
                _ => {
                    return Err(Error::config(
                        "pass exactly one of --instances PATH or --random N",
                    ))
                }
            };
            let mut held = 0usize;
            for (i, inst) in list.iter().enumerate() {
                let report = lemma1_check(inst)
                    .map_err(|e| Error::config(format!("instance {i}: {e}")))?;
                if report.holds {
                    held += 1;
                } else {
                    print!("instance {i} FAILED\n{}", report.render());
                }
            }
            println!("descent inequality held on {held}/{} instances", list.len());
            Ok(0)
        }
        VerifyCmd::LipschitzProbe { config, seed, ns } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let problem = config.build_problem()?;
            let sampler = config.weight_sampler(&problem)?;
            let rng = estimation_stream(config.seed);
            let report = lipschitz_convergence_probe(&problem, &sampler, &ns, &rng)?;
            print!("{}", report.render());
            Ok(0)
        }
    }
}
