//! Command-line front end: dataset generation, MPS ingestion, training,
//! evaluation, benchmarking, and the generalization-gap probe.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use lproj::bench::{
    default_k_schedule, gap_probe, run_benchmark, write_csv, write_gap_csv, BenchConfig,
    Method,
};
use lproj::datagen::{gen_maxflow, gen_mincostflow, gen_packing, perturb_objective_netlib, GenConfig};
use lproj::learn::{final_projection, learn_colrand, learn_pca, learn_sga, SgaConfig, SgaInit, TrainingSet};
use lproj::lp::{solve_lp, SolveStatus, SolverConfig};
use lproj::mpsio::{
    parse_mps, read_instances, read_manifest, read_matrix, write_dataset, write_matrix,
};
use lproj::polyproj::ProjectionConfig;
use lproj::reform::{find_interior_point, remove_equalities};

#[derive(Parser)]
#[command(name = "lproj", about = "Learn projection matrices for fast LP solving", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Packing,
    Maxflow,
    Mincostflow,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainKind {
    Pca,
    Sga,
    Colrand,
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    count: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_level: f64,
    /// Independent noise per parameter entry instead of one shared factor.
    #[arg(long)]
    per_entry_noise: bool,
    /// Packing only: random constraint rows.
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Packing only: variables.
    #[arg(long, default_value_t = 500)]
    n: usize,
}

#[derive(Args)]
struct IngestArgs {
    file: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    count: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_level: f64,
    #[arg(long, default_value_t = 0.02)]
    outlier_fraction: f64,
    #[arg(long, default_value_t = 10.0)]
    outlier_scale: f64,
}

#[derive(Args)]
struct TrainArgs {
    kind: TrainKind,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// SGA only: passes over the training set.
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// SGA only: gradient step size.
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// SGA only: start from a random Gaussian matrix instead of PCA.
    #[arg(long)]
    random_init: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated: full,colrand,pca,sga
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated k values; defaults to the n/100 schedule.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated split seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160")]
    grid: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Parse an MPS file and build a perturbed-objective dataset.
    IngestMps(IngestArgs),
    /// Learn a projection matrix from a dataset's training split.
    Train(TrainArgs),
    /// Evaluate a saved projection matrix on a dataset's test split.
    Eval(EvalArgs),
    /// Run the full benchmark and write CSV rows.
    Bench(BenchArgs),
    /// Empirical generalization-gap probe over training-set sizes.
    Gap(GapArgs),
}

fn run(cli: Cli) -> lproj::Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::IngestMps(args) => cmd_ingest(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gap(args) => cmd_gap(args),
    }
}

fn cmd_gen(args: GenArgs) -> lproj::Result<()> {
    let cfg = GenConfig {
        seed: args.seed,
        count: args.count,
        noise_level: args.noise_level,
        per_entry_noise: args.per_entry_noise,
        ..GenConfig::default()
    };
    let ds = match args.kind {
        GenKind::Packing => gen_packing(args.m, args.n, &cfg),
        GenKind::Maxflow => gen_maxflow(&cfg)?,
        GenKind::Mincostflow => gen_mincostflow(&cfg)?,
    };
    let manifest = write_dataset(&args.out, &ds.name, &ds.train, &ds.test, ds.identical_a)?;
    println!(
        "wrote dataset '{}' ({} train / {} test, n = {}, m = {}) to {}",
        manifest.name,
        manifest.train_ids.len(),
        manifest.test_ids.len(),
        manifest.n,
        manifest.m,
        args.out.display()
    );
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> lproj::Result<()> {
    let text = std::fs::read_to_string(&args.file)?;
    let general = parse_mps(&text)?;
    let x0 = find_interior_point(&general)?;
    let cfg = GenConfig {
        seed: args.seed,
        count: args.count,
        noise_level: args.noise_level,
        outlier_fraction: args.outlier_fraction,
        outlier_scale: args.outlier_scale,
        ..GenConfig::default()
    };
    let mut instances = Vec::with_capacity(cfg.count);
    for idx in 0..cfg.count {
        let perturbed = perturb_objective_netlib(&general, &cfg, idx);
        let reform = remove_equalities(&perturbed, &x0)?;
        let mut inst = reform.instance;
        inst.id = format!("{}-{idx:04}", general.id);
        instances.push(inst);
    }
    let train_count = instances.len() * 2 / 3;
    let test = instances.split_off(train_count);
    // only the objective moves across instances
    let manifest = write_dataset(&args.out, &general.id, &instances, &test, true)?;
    println!(
        "ingested '{}' into {} instances (n = {}, m = {}) at {}",
        general.id,
        manifest.train_ids.len() + manifest.test_ids.len(),
        manifest.n,
        manifest.m,
        args.out.display()
    );
    Ok(())
}

fn load_training_set(dir: &PathBuf) -> lproj::Result<TrainingSet> {
    let manifest = read_manifest(dir)?;
    let train = read_instances(dir, &manifest, &manifest.train_ids)?;
    Ok(TrainingSet::new(train, manifest.identical_a))
}

fn cmd_train(args: TrainArgs) -> lproj::Result<()> {
    let solver = SolverConfig::default();
    let projection = ProjectionConfig::default();
    let pm = match args.kind {
        TrainKind::Colrand => {
            let manifest = read_manifest(&args.dataset)?;
            learn_colrand(manifest.n, args.k, args.seed)
        }
        TrainKind::Pca => {
            let mut ts = load_training_set(&args.dataset)?;
            ts.ensure_solutions(&solver)?;
            let pm = learn_pca(&ts, args.k)?;
            final_projection(&pm, &ts, &projection)?
        }
        TrainKind::Sga => {
            let mut ts = load_training_set(&args.dataset)?;
            ts.ensure_solutions(&solver)?;
            let cfg = SgaConfig {
                learning_rate: args.learning_rate,
                epochs: args.epochs,
                seed: args.seed,
                init: if args.random_init {
                    SgaInit::RandomGaussian
                } else {
                    SgaInit::FromPca
                },
                ..SgaConfig::default()
            };
            let pm = learn_sga(&ts, args.k, &cfg)?;
            final_projection(&pm, &ts, &projection)?
        }
    };
    std::fs::write(&args.out, write_matrix(&pm)?)?;
    println!(
        "wrote {} matrix ({} x {}) to {}",
        pm.method_tag.as_str(),
        pm.n(),
        pm.k,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> lproj::Result<()> {
    let manifest = read_manifest(&args.dataset)?;
    let test = read_instances(&args.dataset, &manifest, &manifest.test_ids)?;
    let pm = read_matrix(&std::fs::read_to_string(&args.matrix)?)?;
    let solver = SolverConfig::default();
    let mut records = Vec::new();
    for inst in &test {
        let full = solve_lp(inst, &solver)?;
        if full.status != SolveStatus::Optimal {
            return Err(lproj::Error::NumericalFailure(format!(
                "full solve of '{}' returned {:?}",
                inst.id, full.status
            )));
        }
        records.push(lproj::bench::evaluate_record(
            &manifest.name,
            inst,
            &pm,
            full.objective.unwrap(),
            None,
            &solver,
        )?);
    }
    write_csv(&records, &args.out)?;
    let mean_ratio = records.iter().filter_map(|r| r.ratio).sum::<f64>()
        / records.iter().filter(|r| r.ratio.is_some()).count().max(1) as f64;
    println!(
        "evaluated {} instances, mean ratio {:.4}, wrote {}",
        records.len(),
        mean_ratio,
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> lproj::Result<()> {
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<lproj::Result<_>>()?;
    if methods.is_empty() {
        return Err(lproj::Error::ConfigError("no methods given".into()));
    }
    let cfg = BenchConfig {
        k_schedule: args.k.clone(),
        sga: SgaConfig { seed: args.seed, ..SgaConfig::default() },
        ..BenchConfig::default()
    };
    let records = run_benchmark(&args.dataset, &methods, &cfg)?;
    write_csv(&records, &args.out)?;
    let manifest = read_manifest(&args.dataset)?;
    let schedule = if args.k.is_empty() {
        default_k_schedule(manifest.n)
    } else {
        args.k
    };
    println!(
        "benchmarked {:?} over k = {:?}: {} rows -> {}",
        args.methods,
        schedule,
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_gap(args: GapArgs) -> lproj::Result<()> {
    let method = Method::parse(&args.method)?;
    let cfg = BenchConfig::default();
    let records = gap_probe(&args.dataset, method, args.k, &args.seeds, &args.grid, &cfg)?;
    write_gap_csv(&records, &args.out)?;
    println!("wrote {} gap rows to {}", records.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
