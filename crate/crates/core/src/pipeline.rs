//! End-to-end runs: ingest, mine, per-pair convergence and stationarity,
//! aggregate reports and plot data.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::{
    find_converge_start, to_weeks_before_submission, ConvergenceResult, SeriesMeta, MIN_SERIES_LEN,
};
use crate::rulemine::{mine_timeline, series_for_pairs, write_rules_csv, Rule, RuleSnapshot, SupportSeries};
use crate::stationarity::{find_stationarity_start, LagOrder, StationarityScan};
use crate::synthbench::median;
use crate::tagstream::{
    build_timeline, filter_notes_boards, group_seeds, normalize_tag, parse_comments, parse_seed_rows, seed_discussions,
    Comment, RowError, SeedRow, SeedTagSet, TransactionUnit, WeekClock,
};
use crate::{Error, Result, Week};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_support: 0.001,
            min_confidence: 0.001,
        }
    }
}

/// Knobs shared by every proposal of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub epoch_date: Option<NaiveDate>,
    /// Board ids of Notes boards; `None` keeps every board.
    pub notes_boards: Option<Vec<String>>,
    pub transaction_unit: TransactionUnit,
    pub thresholds: Thresholds,
    pub alpha: f64,
    pub lags: LagOrder,
    /// Rules touching any of these tags are dropped before analysis.
    pub exclude_tags: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            epoch_date: None,
            notes_boards: None,
            transaction_unit: TransactionUnit::Comment,
            thresholds: Thresholds::default(),
            alpha: 0.05,
            lags: LagOrder::Auto,
            exclude_tags: Vec::new(),
        }
    }
}

/// Run configuration, read from TOML.
///
/// ```toml
/// comments = "comments.csv"
/// seeds = "seeds.csv"
/// output_dir = "out"
/// epoch_date = "2016-10-03"
/// notes_boards = ["notes"]
/// transaction_unit = "comment"
/// alpha = 0.05
/// lags = "auto"
///
/// [thresholds]
/// min_support = 0.001
/// min_confidence = 0.001
/// ```
///
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub comments: PathBuf,
    pub seeds: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub emit_plot_data: bool,
    #[serde(flatten)]
    pub settings: Settings,
}

fn yes() -> bool {
    true
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for path in [&mut cfg.comments, &mut cfg.seeds, &mut cfg.output_dir] {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Sample standard deviation (n − 1); absent below two onsets.
    pub sd: Option<f64>,
}

impl OnsetStats {
    pub fn from_weeks(weeks: &[i64]) -> Self {
        let v: Vec<f64> = weeks.iter().map(|&w| w as f64).collect();
        let n = v.len();
        let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
        let sd = match (mean, n) {
            (Some(m), n) if n >= 2 => Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()),
            _ => None,
        };
        Self {
            count: n,
            mean,
            median: median(&v),
            sd,
        }
    }
}

/// Compact convergence outcome of one pair, as stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConvergence {
    pub converged: bool,
    pub start_index: Option<usize>,
    pub start_week: Option<Week>,
    pub weeks_before_submission: Option<i64>,
    pub too_short: bool,
    pub from_first_observation: bool,
}

impl From<&ConvergenceResult> for PairConvergence {
    fn from(r: &ConvergenceResult) -> Self {
        Self {
            converged: r.converged,
            start_index: r.start_index,
            start_week: r.start_week,
            weeks_before_submission: r.weeks_before_submission,
            too_short: r.too_short,
            from_first_observation: r.from_first_observation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStationarity {
    pub stationary: bool,
    pub start_offset: Option<usize>,
    pub start_week: Option<Week>,
    pub weeks_before_submission: Option<i64>,
    pub degenerate: bool,
    pub offsets_tested: usize,
}

impl From<&StationarityScan> for PairStationarity {
    fn from(s: &StationarityScan) -> Self {
        Self {
            stationary: s.stationary,
            start_offset: s.start_offset,
            start_week: s.start_week,
            weeks_before_submission: s.weeks_before_submission,
            degenerate: s.degenerate,
            offsets_tested: s.per_offset_results.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub rule: Rule,
    pub first_week: Week,
    pub n_weeks: usize,
    pub convergence: Option<PairConvergence>,
    pub stationarity: Option<PairStationarity>,
    pub errors: Vec<String>,
}

/// Full per-series analysis, before it is compacted into a [`PairResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAnalysis {
    pub convergence: std::result::Result<ConvergenceResult, String>,
    pub stationarity: std::result::Result<StationarityScan, String>,
}

impl SeriesAnalysis {
    pub fn pair_result(&self, series: &SupportSeries) -> PairResult {
        let mut errors = Vec::new();
        let convergence = match &self.convergence {
            Ok(c) => Some(PairConvergence::from(c)),
            Err(e) => {
                errors.push(format!("convergence: {e}"));
                None
            }
        };
        let stationarity = match &self.stationarity {
            Ok(s) => Some(PairStationarity::from(s)),
            Err(e) => {
                errors.push(format!("stationarity: {e}"));
                None
            }
        };
        PairResult {
            rule: series.rule.clone(),
            first_week: series.first_week,
            n_weeks: series.len(),
            convergence,
            stationarity,
            errors,
        }
    }
}

/// Runs both onset detectors on one series and places them on the week axis.
pub fn analyze_series(series: &SupportSeries, alpha: f64, lags: LagOrder) -> SeriesAnalysis {
    let meta = SeriesMeta {
        first_week: series.first_week,
        submission_week: series.submission_week,
    };
    let convergence = find_converge_start(&series.values, alpha)
        .and_then(|r| to_weeks_before_submission(&r, meta))
        .map_err(|e| e.to_string());
    let stationarity = find_stationarity_start(&series.values, alpha, lags)
        .and_then(|s| s.placed(series.first_week, series.submission_week))
        .map_err(|e| e.to_string());
    SeriesAnalysis {
        convergence,
        stationarity,
    }
}

/// Rates and onset moments over a set of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_pairs: usize,
    /// Pairs long enough for the convergence scan.
    pub n_analyzable: usize,
    pub n_too_short: usize,
    pub n_converged: usize,
    pub n_converged_at_first_observation: usize,
    pub convergence_rate: Option<f64>,
    pub convergence_onset: OnsetStats,
    /// Pairs for which at least one suffix was ADF-tested.
    pub n_stationarity_tested: usize,
    pub n_stationary: usize,
    pub n_stationarity_degenerate: usize,
    pub stationary_rate: Option<f64>,
    pub stationarity_onset: OnsetStats,
    pub n_pair_errors: usize,
}

impl AggregateStats {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a PairResult>) -> Self {
        let pairs: Vec<&PairResult> = pairs.into_iter().collect();
        let convs: Vec<&PairConvergence> = pairs.iter().filter_map(|p| p.convergence.as_ref()).collect();
        let stats: Vec<&PairStationarity> = pairs.iter().filter_map(|p| p.stationarity.as_ref()).collect();

        let n_analyzable = convs.iter().filter(|c| !c.too_short).count();
        let n_too_short = convs.iter().filter(|c| c.too_short).count();
        let conv_weeks: Vec<i64> = convs.iter().filter_map(|c| c.weeks_before_submission).collect();
        let n_converged = convs.iter().filter(|c| c.converged).count();

        let tested: Vec<&&PairStationarity> = stats.iter().filter(|s| s.offsets_tested > 0).collect();
        let n_stationary = tested.iter().filter(|s| s.stationary).count();
        let stat_weeks: Vec<i64> = tested.iter().filter_map(|s| s.weeks_before_submission).collect();

        Self {
            n_pairs: pairs.len(),
            n_analyzable,
            n_too_short,
            n_converged,
            n_converged_at_first_observation: convs.iter().filter(|c| c.from_first_observation).count(),
            convergence_rate: (n_analyzable > 0).then(|| n_converged as f64 / n_analyzable as f64),
            convergence_onset: OnsetStats::from_weeks(&conv_weeks),
            n_stationarity_tested: tested.len(),
            n_stationary,
            n_stationarity_degenerate: tested.iter().filter(|s| s.degenerate).count(),
            stationary_rate: (!tested.is_empty()).then(|| n_stationary as f64 / tested.len() as f64),
            stationarity_onset: OnsetStats::from_weeks(&stat_weeks),
            n_pair_errors: pairs.iter().filter(|p| !p.errors.is_empty()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalReport {
    pub proposal_id: String,
    pub submission_week: Week,
    pub week_origin: Option<Week>,
    pub n_discussions: usize,
    pub n_source_comments: usize,
    pub n_transactions: usize,
    /// Set when the proposal could not be analyzed at all.
    pub error: Option<String>,
    #[serde(flatten)]
    pub stats: AggregateStats,
    pub pair_results: Vec<PairResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub n_proposals: usize,
    pub n_failed_proposals: usize,
    #[serde(flatten)]
    pub stats: AggregateStats,
}

/// Cross-proposal rates and moments.
pub fn aggregate(reports: &[ProposalReport]) -> GlobalSummary {
    GlobalSummary {
        n_proposals: reports.len(),
        n_failed_proposals: reports.iter().filter(|r| r.error.is_some()).count(),
        stats: AggregateStats::from_pairs(reports.iter().flat_map(|r| r.pair_results.iter())),
    }
}

/// Everything produced for one proposal.
#[derive(Debug, Clone)]
pub struct ProposalOutput {
    pub report: ProposalReport,
    pub rules: Vec<RuleSnapshot>,
    pub series: Vec<SupportSeries>,
    pub analyses: Vec<SeriesAnalysis>,
}

fn excluded_tags(settings: &Settings) -> BTreeSet<String> {
    settings
        .exclude_tags
        .iter()
        .filter_map(|t| normalize_tag(t).ok())
        .collect()
}

pub fn analyze_proposal(
    comments: &[Comment],
    seed_set: &SeedTagSet,
    clock: &WeekClock,
    settings: &Settings,
) -> ProposalOutput {
    let discussions = seed_discussions(comments, seed_set);
    let mut report = ProposalReport {
        proposal_id: seed_set.proposal_id.clone(),
        submission_week: seed_set.submission_week,
        week_origin: None,
        n_discussions: discussions.len(),
        n_source_comments: 0,
        n_transactions: 0,
        error: None,
        stats: AggregateStats::from_pairs([]),
        pair_results: Vec::new(),
    };
    let fail = |mut report: ProposalReport, e: Error| {
        report.error = Some(e.to_string());
        ProposalOutput {
            report,
            rules: Vec::new(),
            series: Vec::new(),
            analyses: Vec::new(),
        }
    };
    let timeline = match build_timeline(
        &seed_set.proposal_id,
        comments,
        &discussions,
        seed_set.submission_week,
        clock,
        settings.transaction_unit,
    ) {
        Ok(t) => t,
        Err(e) => return fail(report, e),
    };
    report.week_origin = Some(timeline.week_origin);
    report.n_source_comments = timeline.n_source_comments;
    report.n_transactions = timeline.transactions().len();

    let Thresholds {
        min_support,
        min_confidence,
    } = settings.thresholds;
    let excluded = excluded_tags(settings);
    let series: Vec<SupportSeries> = match series_for_pairs(&timeline, min_support, min_confidence) {
        Ok(s) => s
            .into_iter()
            .filter(|s| !excluded.iter().any(|t| s.rule.involves(t)))
            .collect(),
        Err(e) => return fail(report, e),
    };
    let rules: Vec<RuleSnapshot> = match mine_timeline(&timeline, min_support, min_confidence) {
        Ok(r) => r
            .into_iter()
            .filter(|r| !excluded.iter().any(|t| r.rule.involves(t)))
            .collect(),
        Err(e) => return fail(report, e),
    };

    let analyses: Vec<SeriesAnalysis> = series
        .par_iter()
        .map(|s| analyze_series(s, settings.alpha, settings.lags))
        .collect();
    report.pair_results = series.iter().zip(&analyses).map(|(s, a)| a.pair_result(s)).collect();
    report.stats = AggregateStats::from_pairs(&report.pair_results);
    ProposalOutput {
        report,
        rules,
        series,
        analyses,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub n_comments: usize,
    pub n_tagless_comments: usize,
    pub n_after_board_filter: usize,
    pub row_errors: Vec<RowError>,
}

/// The canonical report plus the wall-clock time it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub generated_at: DateTime<Utc>,
    pub epoch_date: Option<NaiveDate>,
    pub ingest: IngestStats,
    pub summary: GlobalSummary,
    pub proposals: Vec<ProposalReport>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct CanonicalView<'a> {
    epoch_date: &'a Option<NaiveDate>,
    ingest: &'a IngestStats,
    summary: &'a GlobalSummary,
    proposals: &'a [ProposalReport],
    warnings: &'a [String],
}

impl RunReport {
    /// Pretty JSON without `generated_at`; identical inputs give identical bytes.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CanonicalView {
            epoch_date: &self.epoch_date,
            ingest: &self.ingest,
            summary: &self.summary,
            proposals: &self.proposals,
            warnings: &self.warnings,
        })?)
    }
}

/// Result of an in-memory run: the report and the per-proposal artifacts.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub proposals: Vec<ProposalOutput>,
}

/// Comments and proposals a run operates on, after board filtering and
/// seed grouping.
#[derive(Debug, Clone)]
pub struct Scope {
    pub comments: Vec<Comment>,
    /// `None` only when there are neither comments nor seeds.
    pub clock: Option<WeekClock>,
    pub seed_sets: Vec<SeedTagSet>,
    pub ingest: IngestStats,
    pub warnings: Vec<String>,
}

pub fn scope(
    comments: &[Comment],
    seed_rows: &[SeedRow],
    row_errors: Vec<RowError>,
    settings: &Settings,
) -> Result<Scope> {
    let mut warnings = Vec::new();
    let mut ingest = IngestStats {
        n_comments: comments.len(),
        n_tagless_comments: comments.iter().filter(|c| c.tags.is_empty()).count(),
        n_after_board_filter: comments.len(),
        row_errors,
    };
    if !ingest.row_errors.is_empty() {
        warnings.push(format!(
            "{} comment rows skipped for bad timestamps",
            ingest.row_errors.len()
        ));
    }
    let comments = match &settings.notes_boards {
        Some(boards) => {
            let boards: BTreeSet<String> = boards.iter().cloned().collect();
            let filtered = filter_notes_boards(comments, &boards);
            if filtered.is_empty() {
                warnings.push("no comments on the configured Notes boards".to_string());
            }
            filtered
        }
        None => comments.to_vec(),
    };
    ingest.n_after_board_filter = comments.len();

    let clock = match settings.epoch_date {
        Some(d) => Some(WeekClock::new(d)),
        None => WeekClock::for_comments(&comments).or_else(|| {
            seed_rows
                .iter()
                .map(|s| s.submission)
                .min()
                .map(WeekClock::monday_on_or_before)
        }),
    };
    let seed_sets = match &clock {
        Some(clock) => group_seeds(seed_rows, clock)?,
        None => Vec::new(),
    };
    if seed_sets.is_empty() {
        log::warn!("no seed tags given; nothing to analyze");
        warnings.push("no seed tags given; nothing to analyze".to_string());
    }
    Ok(Scope {
        comments,
        clock,
        seed_sets,
        ingest,
        warnings,
    })
}

/// Weekly rules of every proposal in scope, in proposal order.
pub fn mine_scope(scope: &Scope, settings: &Settings) -> Result<Vec<(String, Vec<RuleSnapshot>)>> {
    let Some(clock) = &scope.clock else {
        return Ok(Vec::new());
    };
    let excluded = excluded_tags(settings);
    scope
        .seed_sets
        .iter()
        .map(|s| {
            let discussions = seed_discussions(&scope.comments, s);
            let timeline = build_timeline(
                &s.proposal_id,
                &scope.comments,
                &discussions,
                s.submission_week,
                clock,
                settings.transaction_unit,
            )?;
            let rules = mine_timeline(
                &timeline,
                settings.thresholds.min_support,
                settings.thresholds.min_confidence,
            )?
            .into_iter()
            .filter(|r| !excluded.iter().any(|t| r.rule.involves(t)))
            .collect();
            Ok((s.proposal_id.clone(), rules))
        })
        .collect()
}

/// Runs every proposal over already-parsed inputs.
pub fn run_on(
    comments: &[Comment],
    seed_rows: &[SeedRow],
    row_errors: Vec<RowError>,
    settings: &Settings,
) -> Result<RunOutput> {
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {}",
            settings.alpha
        )));
    }
    let Scope {
        comments,
        clock,
        seed_sets,
        ingest,
        mut warnings,
    } = scope(comments, seed_rows, row_errors, settings)?;
    let outputs: Vec<ProposalOutput> = match &clock {
        Some(clock) => seed_sets
            .par_iter()
            .map(|s| analyze_proposal(&comments, s, clock, settings))
            .collect(),
        None => Vec::new(),
    };
    for out in &outputs {
        if let Some(e) = &out.report.error {
            warnings.push(format!("proposal {}: {e}", out.report.proposal_id));
        }
    }
    let reports: Vec<ProposalReport> = outputs.iter().map(|o| o.report.clone()).collect();
    let report = RunReport {
        generated_at: Utc::now(),
        epoch_date: clock.map(|c| c.epoch()),
        ingest,
        summary: aggregate(&reports),
        proposals: reports,
        warnings,
    };
    Ok(RunOutput {
        report,
        proposals: outputs,
    })
}

/// Reads the configured inputs, runs every proposal and writes the outputs.
///
/// Layout under `output_dir`:
/// `report.json`, and per proposal `<id>/rules.csv` plus, with plot data
/// enabled, `<id>/series/<n>_<lhs>_<rhs>.{support,suffix,adf}.csv`.
pub fn run(config: &Config) -> Result<RunOutput> {
    let batch = parse_comments(fs::File::open(&config.comments)?)?;
    let seed_rows = parse_seed_rows(fs::File::open(&config.seeds)?)?;
    let output = run_on(&batch.comments, &seed_rows, batch.errors, &config.settings)?;
    write_outputs(&output, &config.output_dir, config.emit_plot_data)?;
    Ok(output)
}

pub fn write_outputs(output: &RunOutput, dir: &Path, plot_data: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&output.report)?)?;
    for p in &output.proposals {
        let pdir = dir.join(file_stem(&p.report.proposal_id));
        fs::create_dir_all(&pdir)?;
        write_rules_csv(&p.rules, fs::File::create(pdir.join("rules.csv"))?)?;
        if plot_data {
            let sdir = pdir.join("series");
            fs::create_dir_all(&sdir)?;
            for (i, (series, analysis)) in p.series.iter().zip(&p.analyses).enumerate() {
                emit_plot_data(
                    &sdir,
                    &format!("{:04}_{}", i + 1, rule_stem(&series.rule)),
                    series,
                    analysis,
                )?;
            }
        }
    }
    Ok(())
}

fn file_stem(raw: &str) -> String {
    let s: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".to_string()
    } else {
        s
    }
}

fn rule_stem(rule: &Rule) -> String {
    let lhs = rule
        .lhs
        .as_deref()
        .map_or("empty".to_string(), |t| file_stem(t.trim_start_matches('#')));
    format!("{lhs}_{}", file_stem(rule.rhs.trim_start_matches('#')))
}

/// Rows of the support plot: `kind,week,value` with `kind` one of
/// `support`, `convergence_onset`, `stationarity_onset`.
pub fn plot_rows(series: &SupportSeries, analysis: &SeriesAnalysis) -> Vec<(&'static str, Week, f64)> {
    let mut rows: Vec<(&'static str, Week, f64)> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| ("support", series.week_at(i), v))
        .collect();
    let value_at = |week: Week| series.values[(week - series.first_week) as usize];
    if let Ok(Some(week)) = analysis.convergence.as_ref().map(|c| c.start_week) {
        rows.push(("convergence_onset", week, value_at(week)));
    }
    if let Ok(Some(week)) = analysis.stationarity.as_ref().map(|s| s.start_week) {
        rows.push(("stationarity_onset", week, value_at(week)));
    }
    rows
}

/// Writes `<stem>.support.csv`, `<stem>.suffix.csv` (suffix variances, one
/// per start week) and `<stem>.adf.csv` (per-offset ADF diagnostics).
pub fn emit_plot_data(dir: &Path, stem: &str, series: &SupportSeries, analysis: &SeriesAnalysis) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.support.csv")))?;
    w.write_record(["kind", "week", "value"])?;
    for (kind, week, value) in plot_rows(series, analysis) {
        w.write_record([kind.to_string(), week.to_string(), value.to_string()])?;
    }
    w.flush()?;

    if let Ok(conv) = &analysis.convergence {
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.suffix.csv")))?;
        w.write_record(["week", "suffix_variance"])?;
        for (i, v) in conv.suffix_stats.iter().enumerate() {
            w.write_record([series.week_at(i).to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    if let Ok(scan) = &analysis.stationarity {
        write_adf_diagnostics(
            scan,
            series.first_week,
            fs::File::create(dir.join(format!("{stem}.adf.csv")))?,
        )?;
    }
    Ok(())
}

/// Per-offset ADF diagnostics:
/// `offset,week,n_used,lags,tau_stat,critical_value,reject,degenerate,error`.
pub fn write_adf_diagnostics<W: Write>(scan: &StationarityScan, first_week: Week, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "offset",
        "week",
        "n_used",
        "lags",
        "tau_stat",
        "critical_value",
        "reject",
        "degenerate",
        "error",
    ])?;
    for o in &scan.per_offset_results {
        let week = (first_week + o.offset as Week - 1).to_string();
        let row = match &o.result {
            Some(r) => [
                o.offset.to_string(),
                week,
                r.n_used.to_string(),
                r.lags.to_string(),
                r.tau_stat.map(|t| t.to_string()).unwrap_or_default(),
                r.critical_value.to_string(),
                r.reject_unit_root.to_string(),
                r.degenerate.to_string(),
                String::new(),
            ],
            None => [
                o.offset.to_string(),
                week,
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".to_string(),
                "false".to_string(),
                o.error.clone().unwrap_or_default(),
            ],
        };
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per pair across proposals, for `report --format csv`.
pub fn write_pairs_csv<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "proposal_id",
        "LHS",
        "RHS",
        "first_week",
        "n_weeks",
        "converged",
        "convergence_start_week",
        "convergence_weeks_before_submission",
        "stationary",
        "stationarity_start_week",
        "stationarity_weeks_before_submission",
        "errors",
    ])?;
    let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in &report.proposals {
        for pair in &p.pair_results {
            let conv = pair.convergence.as_ref();
            let stat = pair.stationarity.as_ref();
            w.write_record([
                p.proposal_id.clone(),
                pair.rule.lhs_label(),
                pair.rule.rhs_label(),
                pair.first_week.to_string(),
                pair.n_weeks.to_string(),
                conv.is_some_and(|c| c.converged).to_string(),
                opt(conv.and_then(|c| c.start_week)),
                opt(conv.and_then(|c| c.weeks_before_submission)),
                stat.is_some_and(|s| s.stationary).to_string(),
                opt(stat.and_then(|s| s.start_week)),
                opt(stat.and_then(|s| s.weeks_before_submission)),
                pair.errors.join("; "),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Smallest series the convergence scan analyzes (shorter ones count as
/// too short, outside the convergence-rate denominator).
pub const MIN_ANALYZABLE_WEEKS: usize = MIN_SERIES_LEN;
