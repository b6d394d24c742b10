use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tagtrend::convergence::{find_converge_start, to_weeks_before_submission, SeriesMeta};
use tagtrend::mktrend::mk_test;
use tagtrend::pipeline::{self, Config, RunReport, Settings, Thresholds};
use tagtrend::rulemine::write_rules_csv;
use tagtrend::stationarity::{find_stationarity_start, LagOrder};
use tagtrend::synthbench::{generate, power_study, SynthKind, SynthSpec};
use tagtrend::tagstream::{parse_comments, parse_seed_rows, TransactionUnit, WeekClock};
use tagtrend::Week;

/// Weekly tag association rules and their convergence and stationarity onsets.
#[derive(Parser)]
#[command(name = "tagtrend", version)]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a comments CSV and print ingest statistics as JSON.
    Ingest(IngestArgs),
    /// Mine weekly rules for each proposal and write rules CSV.
    Mine(MineArgs),
    /// Mann-Kendall trend test on one series.
    Mk(SeriesArgs),
    /// Convergence onset of one series.
    Converge(ConvergeArgs),
    /// Stationarity onset of one series via the ADF scan.
    Stationarity(StationarityArgs),
    /// Full pipeline from a TOML config.
    Run(RunArgs),
    /// Generate a synthetic series as `week,support` CSV.
    Synth(SynthArgs),
    /// Detection power of the convergence detector on synthetic series.
    Power(PowerArgs),
    /// Re-render a report.json as canonical JSON or per-pair CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Comments CSV.
    #[arg(long)]
    comments: PathBuf,
    /// Monday starting week 0 (default: Monday on or before the first comment).
    #[arg(long)]
    epoch_date: Option<NaiveDate>,
    /// Keep only comments on these boards (comma-separated).
    #[arg(long, value_delimiter = ',')]
    notes_boards: Option<Vec<String>>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Seeds CSV (proposal_id, submission_date, seed_tag).
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value_t = 0.001)]
    min_support: f64,
    #[arg(long, default_value_t = 0.001)]
    min_confidence: f64,
    #[arg(long, value_enum, default_value_t = Unit::Comment)]
    transaction_unit: Unit,
    /// Only this proposal.
    #[arg(long)]
    proposal: Option<String>,
    /// Write `<dir>/<proposal>/rules.csv`; required with several proposals.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Drop rules touching these tags (comma-separated).
    #[arg(long, value_delimiter = ',')]
    exclude_tags: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Comment,
    DiscussionWeek,
}

impl From<Unit> for TransactionUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Comment => TransactionUnit::Comment,
            Unit::DiscussionWeek => TransactionUnit::DiscussionWeek,
        }
    }
}

#[derive(Args)]
struct SeriesArgs {
    /// Series CSV with a header; `-` reads stdin.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Value column (default: `support`, else `value`, else the last column).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct Placement {
    /// Week of the first observation; with --submission-week, places onsets.
    #[arg(long, requires = "submission_week")]
    first_week: Option<Week>,
    #[arg(long, requires = "first_week")]
    submission_week: Option<Week>,
}

impl Placement {
    fn meta(&self) -> Option<SeriesMeta> {
        Some(SeriesMeta {
            first_week: self.first_week?,
            submission_week: self.submission_week?,
        })
    }
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    placement: Placement,
}

#[derive(Args)]
struct StationarityArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    placement: Placement,
    /// `auto` or a fixed lag order.
    #[arg(long, default_value = "auto")]
    lags: LagOrder,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured exclusion list (comma-separated).
    #[arg(long, value_delimiter = ',')]
    exclude_tags: Option<Vec<String>>,
    /// Skip per-series plot and diagnostic CSVs.
    #[arg(long)]
    no_plot_data: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "two-phase-variance")]
    kind: SynthKind,
    #[arg(long, default_value_t = 150)]
    length: usize,
    #[arg(long)]
    change_point: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0.9)]
    decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 150)]
    length: usize,
    #[arg(long, default_value_t = 60)]
    change_point: usize,
    #[arg(long, default_value_t = 0.9)]
    decay: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Keep only the summary rates and moments.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `run`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause
            .downcast_ref::<io::Error>()
            .map(|e| e.kind())
            .or_else(|| {
                cause
                    .downcast_ref::<serde_json::Error>()
                    .and_then(|e| e.io_error_kind())
            })
            .or_else(|| match cause.downcast_ref::<csv::Error>().map(|e| e.kind()) {
                Some(csv::ErrorKind::Io(e)) => Some(e.kind()),
                _ => None,
            })
            == Some(io::ErrorKind::BrokenPipe)
    })
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Mine(a) => mine(a),
        Command::Mk(a) => mk(a),
        Command::Converge(a) => converge(a),
        Command::Stationarity(a) => stationarity(a),
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Power(a) => power(a),
        Command::Report(a) => report(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

#[derive(Serialize)]
struct IngestSummary {
    epoch_date: Option<NaiveDate>,
    #[serde(flatten)]
    stats: pipeline::IngestStats,
    n_discussions: usize,
    n_distinct_tags: usize,
    first_week: Option<Week>,
    last_week: Option<Week>,
}

fn settings_for(input: &InputArgs) -> Settings {
    Settings {
        epoch_date: input.epoch_date,
        notes_boards: input.notes_boards.clone(),
        ..Settings::default()
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let batch = parse_comments(open(&a.input.comments)?)?;
    let scope = pipeline::scope(&batch.comments, &[], batch.errors, &settings_for(&a.input))?;
    let clock = scope.clock.or_else(|| WeekClock::for_comments(&scope.comments));
    let weeks: Vec<Week> = match &clock {
        Some(c) => scope.comments.iter().map(|x| c.week_of(x.posted_at)).collect(),
        None => Vec::new(),
    };
    print_json(&IngestSummary {
        epoch_date: clock.map(|c| c.epoch()),
        n_discussions: scope
            .comments
            .iter()
            .map(|c| &c.discussion_id)
            .collect::<BTreeSet<_>>()
            .len(),
        n_distinct_tags: scope
            .comments
            .iter()
            .flat_map(|c| &c.tags)
            .collect::<BTreeSet<_>>()
            .len(),
        first_week: weeks.iter().min().copied(),
        last_week: weeks.iter().max().copied(),
        stats: scope.ingest,
    })
}

fn mine(a: MineArgs) -> Result<()> {
    let batch = parse_comments(open(&a.input.comments)?)?;
    let seeds = parse_seed_rows(open(&a.seeds)?)?;
    let settings = Settings {
        thresholds: Thresholds {
            min_support: a.min_support,
            min_confidence: a.min_confidence,
        },
        transaction_unit: a.transaction_unit.into(),
        exclude_tags: a.exclude_tags.clone(),
        ..settings_for(&a.input)
    };
    let mut scope = pipeline::scope(&batch.comments, &seeds, batch.errors, &settings)?;
    if let Some(id) = &a.proposal {
        scope.seed_sets.retain(|s| &s.proposal_id == id);
        if scope.seed_sets.is_empty() {
            bail!("no proposal {id:?} in {}", a.seeds.display());
        }
    }
    let mined = pipeline::mine_scope(&scope, &settings)?;
    match (&a.out_dir, mined.as_slice()) {
        (Some(dir), _) => {
            for (id, rules) in &mined {
                let pdir = dir.join(id);
                fs::create_dir_all(&pdir)?;
                write_rules_csv(rules, File::create(pdir.join("rules.csv"))?)?;
                log::info!("{id}: {} rule rows", rules.len());
            }
        }
        (None, [(_, rules)]) => write_rules_csv(rules, io::stdout().lock())?,
        (None, []) => log::warn!("no proposals to mine"),
        (None, _) => bail!("{} proposals found; pass --proposal or --out-dir", mined.len()),
    }
    Ok(())
}

fn read_series(args: &SeriesArgs) -> Result<Vec<f64>> {
    let mut text = String::new();
    if args.input.as_os_str() == "-" {
        io::stdin().read_to_string(&mut text)?;
    } else {
        open(&args.input)?.read_to_string(&mut text)?;
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = match &args.column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column {name:?}"))?,
        None => headers
            .iter()
            .position(|h| h == "support")
            .or_else(|| headers.iter().position(|h| h == "value"))
            .unwrap_or(headers.len().saturating_sub(1)),
    };
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let r = r?;
            let field = r.get(column).unwrap_or("").trim();
            field
                .parse::<f64>()
                .with_context(|| format!("row {}: {field:?} is not a number", i + 2))
        })
        .collect()
}

fn mk(a: SeriesArgs) -> Result<()> {
    print_json(&mk_test(&read_series(&a)?, a.alpha)?)
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let mut r = find_converge_start(&read_series(&a.series)?, a.series.alpha)?;
    if let Some(meta) = a.placement.meta() {
        r = to_weeks_before_submission(&r, meta)?;
    }
    print_json(&r)
}

fn stationarity(a: StationarityArgs) -> Result<()> {
    let mut scan = find_stationarity_start(&read_series(&a.series)?, a.series.alpha, a.lags)?;
    if let Some(meta) = a.placement.meta() {
        scan = scan.placed(meta.first_week, meta.submission_week)?;
    }
    print_json(&scan)
}

fn run(a: RunArgs) -> Result<()> {
    let mut config = Config::load(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    if let Some(tags) = a.exclude_tags {
        config.settings.exclude_tags = tags;
    }
    if a.no_plot_data {
        config.emit_plot_data = false;
    }
    let output = pipeline::run(&config)?;
    for w in &output.report.warnings {
        log::warn!("{w}");
    }
    eprintln!("wrote {}", config.output_dir.join("report.json").display());
    print_json(&output.report.summary)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        change_point: a.change_point,
        noise_scale: a.noise_scale,
        decay: a.decay,
        seed: a.seed,
        ..SynthSpec::new(a.kind, a.length)
    };
    let series = generate(&spec)?;
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["week", "support"])?;
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([series.week_at(i).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn power(a: PowerArgs) -> Result<()> {
    let planted = SynthSpec {
        change_point: Some(a.change_point),
        decay: a.decay,
        noise_scale: a.noise_scale,
        seed: a.seed,
        ..SynthSpec::new(SynthKind::TwoPhaseVariance, a.length)
    };
    let null = SynthSpec {
        noise_scale: a.noise_scale,
        seed: a.seed,
        ..SynthSpec::new(SynthKind::IidNoise, a.length)
    };
    let mut report = power_study(a.trials, &planted, &null, a.alpha)?;
    if a.summary {
        report.onset_errors.clear();
    }
    print_json(&report)
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let report: RunReport = serde_json::from_str(&text).context("not a run report")?;
    match a.format {
        Format::Json => println!("{}", report.canonical_json()?),
        Format::Csv => pipeline::write_pairs_csv(&report, io::stdout().lock())?,
    }
    Ok(())
}
