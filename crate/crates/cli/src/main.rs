use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use theta_framework::experiments::{
    self, geometric_sweep, ScatterParams, StreamOrder, StreamSpec,
};
use theta_framework::goodness::{self, ProjectionReport, SuiteRow};
use theta_framework::io::{read_sketch_file, read_stream_file, write_sketch_file};
use theta_framework::oracles::alpha_level_distribution;
use theta_framework::{
    sketch_stream, theta_a_not_b, theta_intersect, theta_union, Error, HashSeed, Predicate,
    SamplerConfig, SamplerKind, ThetaSketch,
};

#[derive(Parser)]
#[command(name = "theta", version, about = "Theta sketches: build, combine, estimate, experiment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, combine and query sketch files.
    #[command(subcommand)]
    Sketch(SketchCmd),
    /// Monte Carlo experiments; CSV on stdout.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Shape checks of threshold rules.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Exact distributions.
    #[command(subcommand)]
    Dist(DistCmd),
}

#[derive(Subcommand)]
enum SketchCmd {
    /// Sketch a newline-delimited identifier file.
    Build {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_parser = parse_seed)]
        seed: u64,
        /// Keep identifiers so subpopulations can be estimated.
        #[arg(long)]
        ids: bool,
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Union of sketches built with the same seed.
    Union {
        #[arg(required = true)]
        sketches: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Intersection of sketches built with the same seed.
    Intersect {
        #[arg(required = true)]
        sketches: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Identifiers of the first sketch's stream missing from the second's.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Print the distinct count estimate.
    Estimate {
        sketch: PathBuf,
        /// `all`, `set:FILE` (one identifier per line) or `prefix:STR`.
        #[arg(long, default_value = "all")]
        pred: String,
    },
}

#[derive(Args, Clone)]
struct SamplerArgs {
    /// Threshold rule.
    #[arg(long, value_parser = parse_kind)]
    tcf: SamplerKind,
    #[arg(long)]
    k: usize,
    /// Level ratio for adaptive sampling.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Rate cap for pkmv, rate for fixed.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig::new(self.tcf, self.k, HashSeed(seed))
            .with_beta(self.beta)
            .with_p(self.p)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Disjoint,
    Overlapping,
    Permutations,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Relative RMSE along a sweep of stream lengths.
    Accuracy {
        /// Comma-separated threshold rules.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind, required = true)]
        tcf: Vec<SamplerKind>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Explicit stream lengths, ascending.
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep")]
        n: Vec<usize>,
        /// `MIN,MAX,PER_OCTAVE`: geometric sweep.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        sweep: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_parser = parse_seed, default_value = "1")]
        seed: u64,
    },
    /// Variance of the union estimate against the concatenated stream.
    Comparative {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_enum, default_value = "disjoint")]
        layout: LayoutArg,
        /// Stream sizes; for permutations only the first is used.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Identifiers shared by all streams (overlapping layout).
        #[arg(long, default_value_t = 0)]
        shared: usize,
        /// Number of streams (permutations layout).
        #[arg(long, default_value_t = 2)]
        copies: usize,
        /// Shuffle every stream afresh in each trial.
        #[arg(long)]
        shuffle: bool,
        #[arg(long, default_value = "all")]
        pred: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_parser = parse_seed, default_value = "1")]
        seed: u64,
    },
    /// Covariance of two per-item estimates.
    Covariance {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long)]
        n: usize,
        /// Two distinct stream positions `L1,L2`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        positions: Vec<usize>,
        #[arg(long, default_value_t = 10000)]
        trials: usize,
        #[arg(long, value_parser = parse_seed, default_value = "1")]
        seed: u64,
    },
    /// Union against concatenation errors of the Alpha rule on random pairs.
    Scatter {
        #[arg(long, default_value_t = 128)]
        k: usize,
        /// `MIN,MAX` stream sizes.
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "201,5429")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        sims: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_parser = parse_seed, default_value = "1")]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Univariate and bivariate grid checks on random or given instances.
    Goodness {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_parser = parse_seed, default_value = "1")]
        seed: u64,
        #[arg(long, default_value_t = goodness::DEFAULT_GRID)]
        grid: usize,
        /// Longest random stream, free positions included.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        /// Fixed hashes of an explicit instance instead of a random one.
        #[arg(long, value_delimiter = ',')]
        fixed: Vec<f64>,
        /// Free positions of the explicit instance (one or two).
        #[arg(long, value_delimiter = ',', requires = "fixed")]
        free: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum DistCmd {
    /// Level distribution and moments of the Alpha sampler after `k + u`
    /// distinct identifiers.
    Alpha {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        u: usize,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| format!("`{s}` is not a decimal or 0x-prefixed hex seed"))
}

fn parse_kind(s: &str) -> Result<SamplerKind, String> {
    s.parse()
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(msg) => Failure::Usage(msg),
            Error::WrongKind { .. } => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::from(e))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn parse_predicate(spec: &str) -> CliResult<Predicate> {
    if spec == "all" {
        Ok(Predicate::All)
    } else if let Some(path) = spec.strip_prefix("set:") {
        Ok(Predicate::member_set(read_stream_file(Path::new(path))?))
    } else if let Some(prefix) = spec.strip_prefix("prefix:") {
        Ok(Predicate::prefix(prefix))
    } else {
        usage(format!("predicate must be all, set:FILE or prefix:STR, got `{spec}`"))
    }
}

fn read_all(paths: &[PathBuf]) -> CliResult<Vec<ThetaSketch>> {
    Ok(paths
        .iter()
        .map(|p| read_sketch_file(p))
        .collect::<Result<_, _>>()?)
}

fn run_sketch(cmd: SketchCmd) -> CliResult {
    match cmd {
        SketchCmd::Build {
            sampler,
            seed,
            ids,
            input,
            output,
        } => {
            let stream = read_stream_file(&input)?;
            let sk = sketch_stream(sampler.config(seed).with_ids(ids), &stream)?;
            write_sketch_file(&output, &sk)?;
        }
        SketchCmd::Union { sketches, output } => {
            write_sketch_file(&output, &theta_union(&read_all(&sketches)?)?)?;
        }
        SketchCmd::Intersect { sketches, output } => {
            write_sketch_file(&output, &theta_intersect(&read_all(&sketches)?)?)?;
        }
        SketchCmd::Diff { a, b, output } => {
            let (a, b) = (read_sketch_file(&a)?, read_sketch_file(&b)?);
            write_sketch_file(&output, &theta_a_not_b(&a, &b)?)?;
        }
        SketchCmd::Estimate { sketch, pred } => {
            let predicate = parse_predicate(&pred)?;
            let sk = read_sketch_file(&sketch)?;
            println!("{}", sk.estimate_subpopulation(&predicate)?);
        }
    }
    Ok(())
}

fn run_experiment(cmd: ExperimentCmd) -> CliResult {
    let out = io::stdout().lock();
    match cmd {
        ExperimentCmd::Accuracy {
            tcf,
            k,
            beta,
            p,
            n,
            sweep,
            trials,
            seed,
        } => {
            let n_sweep = match (n.is_empty(), sweep.as_slice()) {
                (false, _) => n,
                (true, &[lo, hi, per_octave]) => geometric_sweep(lo, hi, per_octave)?,
                (true, _) => return usage("give --n or --sweep MIN,MAX,PER_OCTAVE"),
            };
            let configs: Vec<SamplerConfig> = tcf
                .iter()
                .map(|&kind| {
                    SamplerConfig::new(kind, k, HashSeed(seed))
                        .with_beta(beta)
                        .with_p(p)
                })
                .collect();
            let rows = experiments::run_accuracy_profile(&configs, &n_sweep, trials)?;
            experiments::write_accuracy_csv(out, &rows)?;
        }
        ExperimentCmd::Comparative {
            sampler,
            layout,
            sizes,
            shared,
            copies,
            shuffle,
            pred,
            trials,
            seed,
        } => {
            let predicate = parse_predicate(&pred)?;
            let spec = match layout {
                LayoutArg::Disjoint => StreamSpec::disjoint(sizes),
                LayoutArg::Overlapping => StreamSpec::overlapping(sizes, shared),
                LayoutArg::Permutations => StreamSpec::permutations(sizes[0], copies),
            };
            let order = if shuffle || matches!(layout, LayoutArg::Permutations) {
                StreamOrder::Shuffled
            } else {
                StreamOrder::Sorted
            };
            let cfg = sampler.config(seed).with_ids(!predicate.is_all());
            let rec = experiments::run_comparative_variance(
                &cfg,
                &spec.with_order(order),
                &predicate,
                trials,
            )?;
            experiments::write_comparative_csv(out, &[rec])?;
        }
        ExperimentCmd::Covariance {
            sampler,
            n,
            positions,
            trials,
            seed,
        } => {
            let &[l1, l2] = positions.as_slice() else {
                return usage("--positions takes exactly two values");
            };
            let rec =
                experiments::run_per_item_covariance(&sampler.config(seed), n, (l1, l2), trials)?;
            experiments::write_covariance_csv(out, &[rec])?;
        }
        ExperimentCmd::Scatter {
            k,
            sizes,
            sims,
            pairs,
            trials,
            seed,
        } => {
            let &[lo, hi] = sizes.as_slice() else {
                return usage("--sizes takes MIN,MAX");
            };
            let params = ScatterParams {
                size_range: (lo, hi),
                similarities: sims,
                k,
                trials_per_pair: trials,
                pairs,
                seed: HashSeed(seed),
            };
            let rows = experiments::run_overlap_scatter(&params)?;
            experiments::write_scatter_csv(out, &rows)?;
        }
    }
    Ok(())
}

fn describe(report: &ProjectionReport) -> String {
    match &report.counterexample {
        None => "-".into(),
        Some(c) => {
            let at = match c.y {
                Some(y) => format!("x={} y={}", c.x, y),
                None => format!("x={}", c.x),
            };
            format!("{at} theta={} breaks {:?}", c.theta, c.subcondition)
        }
    }
}

fn print_rows(mut out: impl Write, check: &str, rows: &[SuiteRow]) -> io::Result<()> {
    for r in rows {
        let free: Vec<String> = r.free.iter().map(ToString::to_string).collect();
        writeln!(
            out,
            "{check:<9} {:<6} {:<3} {:<3} {:<6} {:<5} {:<22} {}",
            r.seed,
            r.k,
            r.n,
            free.join(","),
            if r.report.satisfied { "pass" } else { "FAIL" },
            r.report.fixed_threshold.map_or("-".into(), |f| f.to_string()),
            describe(&r.report),
        )?;
    }
    Ok(())
}

fn run_check(cmd: CheckCmd) -> CliResult {
    let CheckCmd::Goodness {
        sampler,
        seed,
        grid,
        max_len,
        fixed,
        free,
    } = cmd;
    if grid < 100 {
        return usage("--grid must be at least 100");
    }
    let cfg = sampler.config(seed);
    cfg.validate()?;
    let tcf = cfg.tcf();
    let k = cfg.k;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<9} {:<6} {:<3} {:<3} {:<6} {:<5} {:<22} counterexample",
        "check", "seed", "k", "n", "free", "ok", "F"
    )?;
    if fixed.is_empty() {
        let one = goodness::one_goodness_instances(&tcf, k, seed, max_len, grid);
        print_rows(&mut out, "1-good", &one)?;
        if max_len >= 2 {
            let two = goodness::two_goodness_instance(&tcf, k, seed, max_len, grid);
            print_rows(&mut out, "2-good", &[two])?;
        }
        return Ok(());
    }
    let mut sorted = fixed.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] >= w[1]) || sorted.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
        return usage("--fixed hashes must be distinct and inside (0, 1)");
    }
    let n = fixed.len() + free.len();
    let report = match free.as_slice() {
        [l] if *l <= fixed.len() => goodness::check_one_goodness(&tcf, k, &fixed, *l, grid),
        [l1, l2] if l1 < l2 && *l2 < n => {
            goodness::check_two_goodness(&tcf, k, &fixed, (*l1, *l2), grid)
        }
        _ => return usage("--free takes one position, or two increasing positions, in range"),
    };
    let row = SuiteRow {
        seed,
        k,
        n,
        free,
        report,
    };
    let label = if row.free.len() == 1 { "1-good" } else { "2-good" };
    print_rows(&mut out, label, &[row])?;
    Ok(())
}

fn run_dist(cmd: DistCmd) -> CliResult {
    let DistCmd::Alpha { k, u } = cmd;
    let dist = alpha_level_distribution(k, u)?;
    experiments::write_alpha_distribution_csv(io::stdout().lock(), &dist)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sketch(cmd) => run_sketch(cmd),
        Command::Experiment(cmd) => run_experiment(cmd),
        Command::Check(cmd) => run_check(cmd),
        Command::Dist(cmd) => run_dist(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // The reader went away, as with `theta ... | head`.
        Err(Failure::Data(Error::Io { path: None, source }))
            if source.kind() == io::ErrorKind::BrokenPipe =>
        {
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("theta: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("theta: {e}");
            ExitCode::from(3)
        }
    }
}
