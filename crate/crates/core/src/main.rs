use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rankmc::baselines::rank_centrality;
use rankmc::harness::{
    run_scan, select_cr, stability, write_scan_csv, Algorithm, Randomization, ScanAxis, ScanConfig, StabilityConfig,
    DEFAULT_DELTA_W_MIN,
};
use rankmc::ingest::{aggregate_matches, read_matches_csv, Aggregated, DateWindow, MatchRecord, PointScheme};
use rankmc::lrmc::{rank_lrmc, LrmcConfig};
use rankmc::mcmle::{rank_mcmle, McmleConfig};
use rankmc::metrics::{prediction_score, RankingResult};
use rankmc::ratio::{estimate_rmax, truncate_observations};
use rankmc::report::RankingReport;
use rankmc::RankError;

#[derive(Parser)]
#[command(name = "rankmc", version, about = "Pairwise-comparison ranking by rank-1 matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte-Carlo scan on synthetic BTL data and write the results table.
    Simulate(SimulateArgs),
    /// Rank the teams of a match log.
    Rank(RankArgs),
    /// Estimate the ratio between the strongest and weakest item of a match log.
    EstimateRmax(EstimateArgs),
    /// Compare two rankings at predicting the outcomes of a match log.
    ScorePredictions(ScoreArgs),
    /// Measure how much a ranking moves when part of the pairs is hidden.
    Stability(StabilityArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    L,
    Pobs,
    Rmax,
    N,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Mcmle,
    Lrmc,
    RankCentrality,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Mcmle => Algorithm::Mcmle,
            AlgoArg::Lrmc => Algorithm::Lrmc,
            AlgoArg::RankCentrality => Algorithm::RankCentrality,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RandomizationArg {
    Affine,
    RangePreserving,
    Literal,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 8.0)]
    rmax: f64,
    #[arg(long, default_value_t = 0.5)]
    pobs: f64,
    /// Comparisons per pair, or `inf` for exact win probabilities.
    #[arg(long = "L", default_value = "10", value_parser = parse_l)]
    l: Comparisons,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "l")]
    scan_axis: AxisArg,
    /// Comma-separated axis values; a default grid is used when omitted.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mcmle,lrmc")]
    algos: Vec<AlgoArg>,
    /// Estimate the score ratio instead of handing the true one to the solvers.
    #[arg(long)]
    rmax_unknown: bool,
    /// Relaxation constant; the standard schedule is used when omitted.
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA_W_MIN)]
    delta_w: f64,
    #[arg(long, value_enum, default_value = "affine")]
    randomization: RandomizationArg,
    /// Fill the mean_seconds column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Match log with header `date,side_a,side_b,outcome`.
    #[arg(long)]
    matches: PathBuf,
    /// football, weather or custom:WIN,TIE,LOSE
    #[arg(long, default_value = "football", value_parser = parse_scheme)]
    scheme: PointScheme,
    /// First day included (YYYY-MM-DD).
    #[arg(long)]
    window_start: Option<NaiveDate>,
    /// First day excluded (YYYY-MM-DD).
    #[arg(long)]
    window_end: Option<NaiveDate>,
}

impl DataArgs {
    fn window(&self) -> DateWindow {
        DateWindow {
            start: self.window_start,
            end: self.window_end,
        }
    }

    fn load(&self) -> Result<Aggregated, Failure> {
        let records = read_records(&self.matches)?;
        let agg = aggregate_matches(&records, self.scheme, self.window())?;
        for w in &agg.warnings {
            eprintln!("warning: {w}");
        }
        Ok(agg)
    }
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "mcmle")]
    algo: AlgoArg,
    /// Known score ratio; estimated from the data when omitted.
    #[arg(long)]
    rmax: Option<f64>,
    /// Relaxation constant; the standard schedule is used when omitted.
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA_W_MIN)]
    delta_w: f64,
    /// Recorded in the output diagnostics.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA_W_MIN)]
    delta_w: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    ranking_a: PathBuf,
    #[arg(long)]
    ranking_b: PathBuf,
    /// Matches to predict.
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    window_start: Option<NaiveDate>,
    #[arg(long)]
    window_end: Option<NaiveDate>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Probability that a pair stays visible in each repetition.
    #[arg(long, default_value_t = 0.5)]
    pobs: f64,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA_W_MIN)]
    delta_w: f64,
}

/// Comparisons per pair; `None` is the exact limit.
#[derive(Clone, Copy)]
struct Comparisons(Option<u32>);

fn parse_l(s: &str) -> Result<Comparisons, String> {
    match s {
        "inf" | "infinity" => Ok(Comparisons(None)),
        _ => s.parse::<u32>().map(|l| Comparisons(Some(l))).map_err(|e| e.to_string()),
    }
}

fn parse_scheme(s: &str) -> Result<PointScheme, String> {
    s.parse().map_err(|e: RankError| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
    Solver(String),
}

impl From<RankError> for Failure {
    fn from(e: RankError) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn read_records(path: &Path) -> Result<Vec<MatchRecord>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    read_matches_csv(BufReader::new(file)).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Share of item pairs that were observed.
fn edge_density(agg: &Aggregated) -> f64 {
    let n = agg.names.len() as f64;
    (agg.e.len() as f64 / (n * (n - 1.0) / 2.0)).min(1.0)
}

/// Median number of matches per observed pair, used for the relaxation schedule.
fn typical_count(agg: &Aggregated) -> u32 {
    let mut c: Vec<u32> = agg.e.pairs().iter().map(|&(i, j)| agg.counts.get(i, j)).collect();
    c.sort_unstable();
    c.get(c.len() / 2).copied().unwrap_or(1)
}

fn rank_aggregated(
    agg: &Aggregated,
    algo: AlgoArg,
    rmax: Option<f64>,
    cr: Option<f64>,
    delta_w: f64,
) -> Result<RankingResult, Failure> {
    let p_obs = edge_density(agg);
    let c_r = cr.unwrap_or_else(|| select_cr(p_obs, typical_count(agg)));
    Ok(match algo {
        AlgoArg::Mcmle => {
            let mut cfg = McmleConfig::new(c_r, delta_w, delta_w / (20.0 * agg.names.len() as f64), p_obs)?;
            cfg.r_max = rmax;
            rank_mcmle(&agg.y, &agg.e, &agg.counts, &cfg)?
        }
        AlgoArg::Lrmc => {
            let r = match rmax {
                Some(r) => r,
                None => estimate_rmax(&agg.y, &agg.e, delta_w)?,
            };
            let y = truncate_observations(&agg.y, &agg.e, r, c_r)?;
            rank_lrmc(&y, &agg.e, &LrmcConfig::new(r, delta_w, p_obs)?)?
        }
        AlgoArg::RankCentrality => rank_centrality(&agg.y, &agg.e)?.into_ranking()?,
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let v = &a.values;
    let axis = match a.scan_axis {
        AxisArg::L => ScanAxis::L(if v.is_empty() {
            vec![5, 10, 20, 40]
        } else {
            v.iter().map(|&x| x as u32).collect()
        }),
        AxisArg::Pobs => ScanAxis::PObs(if v.is_empty() { vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0] } else { v.clone() }),
        AxisArg::Rmax => ScanAxis::RMax(if v.is_empty() { vec![2.0, 4.0, 8.0, 16.0] } else { v.clone() }),
        AxisArg::N => ScanAxis::N(if v.is_empty() {
            vec![25, 50, 100, 200]
        } else {
            v.iter().map(|&x| x as usize).collect()
        }),
    };
    let mut algorithms: Vec<Algorithm> = a.algos.iter().map(|&x| x.into()).collect();
    algorithms.dedup();
    let cfg = ScanConfig {
        n_items: a.n,
        r_max: a.rmax,
        p_obs: a.pobs,
        l: a.l.0,
        trials: a.trials,
        seed: a.seed,
        algorithms,
        delta_w_min: a.delta_w,
        rmax_known: !a.rmax_unknown,
        c_r: a.cr,
        force_consistency: None,
        randomization: match a.randomization {
            RandomizationArg::Affine => Randomization::Affine,
            RandomizationArg::RangePreserving => Randomization::RangePreserving,
            RandomizationArg::Literal => Randomization::Literal,
        },
        timing: a.timing,
        ..ScanConfig::new(axis)
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let records = run_scan(&cfg)?;
    let mut buf = Vec::new();
    write_scan_csv(&records, &mut buf).map_err(|e| Failure::Data(e.to_string()))?;
    write_output(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn cmd_rank(a: RankArgs) -> Result<(), Failure> {
    let agg = a.data.load()?;
    let result = rank_aggregated(&agg, a.algo, a.rmax, a.cr, a.delta_w)?;
    let mut report = RankingReport::new(Algorithm::from(a.algo).name(), &agg.names, &result, a.seed);
    report.warnings = agg.warnings.clone();
    write_output(a.out.as_deref(), &(report.to_json() + "\n"))
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let agg = a.data.load()?;
    println!("{}", estimate_rmax(&agg.y, &agg.e, a.delta_w)?);
    Ok(())
}

fn read_report(path: &Path) -> Result<RankingReport, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    RankingReport::from_json(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn cmd_score(a: ScoreArgs) -> Result<(), Failure> {
    let ra = read_report(&a.ranking_a)?.ordering();
    let rb = read_report(&a.ranking_b)?.ordering();
    let window = DateWindow {
        start: a.window_start,
        end: a.window_end,
    };
    let matches: Vec<_> = read_records(&a.matches)?
        .iter()
        .filter(|r| window.contains(r.date))
        .map(MatchRecord::as_result)
        .collect();
    let (sa, sb) = prediction_score(&ra, &rb, &matches)?;
    let out = json!({ "matches": matches.len(), "score_a": sa, "score_b": sb });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_stability(a: StabilityArgs) -> Result<(), Failure> {
    let agg = a.data.load()?;
    let c_r = a.cr.unwrap_or_else(|| select_cr(a.pobs, typical_count(&agg)));
    let mut solver = McmleConfig::new(c_r, a.delta_w, a.delta_w / (20.0 * agg.names.len() as f64), a.pobs)?;
    solver.r_max = a.rmax;
    let cfg = StabilityConfig {
        p_obs: a.pobs,
        iterations: a.iterations,
        seed: a.seed,
        solver,
    };
    let rep = stability(&agg.y, &agg.e, &agg.counts, &cfg)?;
    let out = json!({
        "iterations": a.iterations,
        "failures": rep.failures,
        "rank_rmse": rep.rmse,
        "q95_item_error": rep.q95_item_error,
        "rmse_per_iteration": rep.rmse_per_iteration,
        "baseline": RankingReport::new("mcmle", &agg.names, &rep.baseline, Some(a.seed)).ordering(),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Rank(a) => cmd_rank(a),
        Command::EstimateRmax(a) => cmd_estimate(a),
        Command::ScorePredictions(a) => cmd_score(a),
        Command::Stability(a) => cmd_stability(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
