//! Comment ingest, hashtag normalization and cumulative weekly transaction
//! timelines.
//!
//! One comment's tag set is one transaction (or, with
//! [`TransactionUnit::DiscussionWeek`], the union of a discussion's tags within
//! one week). Snapshots are cumulative: the snapshot for week `w` holds every
//! transaction posted in weeks `<= w`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::ops::RangeInclusive;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Week};

const SECONDS_PER_WEEK: i64 = 7 * 24 * 60 * 60;
const TRAILING_PUNCT: [char; 6] = ['.', ',', ';', ':', '!', '?'];

/// One volunteer post with its normalized hashtags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub board_id: String,
    pub discussion_id: String,
    pub user: String,
    pub posted_at: DateTime<Utc>,
    pub tags: BTreeSet<String>,
}

/// A row that parsed as CSV but could not become a [`Comment`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub comment_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CommentBatch {
    pub comments: Vec<Comment>,
    pub errors: Vec<RowError>,
}

/// Lowercases a `#`-prefixed token and strips trailing `.,;:!?`.
///
/// ```
/// use tagtrend::tagstream::normalize_tag;
/// assert_eq!(normalize_tag("#Helix,").unwrap(), "#helix");
/// assert!(normalize_tag("helix").is_err());
/// ```
pub fn normalize_tag(raw: &str) -> Result<String> {
    let token = raw.trim();
    if !token.starts_with('#') {
        return Err(Error::NotATag(raw.to_string()));
    }
    let lowered = token.to_lowercase();
    let stripped = lowered.trim_end_matches(TRAILING_PUNCT);
    if stripped.len() <= 1 {
        return Err(Error::NotATag(raw.to_string()));
    }
    Ok(stripped.to_string())
}

/// Every whitespace-delimited `#token` in a free-text body, normalized.
pub fn extract_tags(body: &str) -> BTreeSet<String> {
    body.split_whitespace()
        .filter(|tok| tok.starts_with('#'))
        .filter_map(|tok| normalize_tag(tok).ok())
        .collect()
}

// A pre-split tags column may hold bare names; they get the '#' prefix.
fn split_tag_column(field: &str) -> BTreeSet<String> {
    field
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';' || c == '|')
        .filter(|tok| !tok.is_empty())
        .filter_map(|tok| {
            if tok.starts_with('#') {
                normalize_tag(tok).ok()
            } else {
                normalize_tag(&format!("#{tok}")).ok()
            }
        })
        .collect()
}

/// Parses an ISO-8601 timestamp; naive forms are taken as UTC and a bare date
/// as midnight.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in NAIVE {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_time(NaiveTime::MIN).and_utc())
}

struct Columns {
    comment_id: usize,
    board_id: usize,
    discussion_id: usize,
    user: usize,
    posted_at: usize,
    tags: Option<usize>,
    body: Option<usize>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn required(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Reads the comments CSV.
///
/// Required columns: `comment_id, board_id, discussion_id, user, posted_at`
/// plus either `tags` (pre-split) or `body` (free text to scan for hashtags).
/// Structural CSV problems are fatal; an unparseable timestamp only produces a
/// [`RowError`].
pub fn parse_comments<R: Read>(source: R) -> Result<CommentBatch> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = Columns {
        comment_id: required(&headers, "comment_id")?,
        board_id: required(&headers, "board_id")?,
        discussion_id: required(&headers, "discussion_id")?,
        user: required(&headers, "user")?,
        posted_at: required(&headers, "posted_at")?,
        tags: column(&headers, "tags"),
        body: column(&headers, "body"),
    };
    if cols.tags.is_none() && cols.body.is_none() {
        return Err(Error::MissingColumn("body".to_string()));
    }

    let mut batch = CommentBatch::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let comment_id = field(cols.comment_id);
        let raw_ts = field(cols.posted_at);
        let Some(posted_at) = parse_timestamp(&raw_ts) else {
            batch.errors.push(RowError {
                line,
                comment_id,
                message: format!("unparseable timestamp {raw_ts:?}"),
            });
            continue;
        };
        let tags = match (cols.tags, cols.body) {
            (Some(i), _) => split_tag_column(record.get(i).unwrap_or("")),
            (None, Some(i)) => extract_tags(record.get(i).unwrap_or("")),
            (None, None) => unreachable!(),
        };
        batch.comments.push(Comment {
            comment_id,
            board_id: field(cols.board_id),
            discussion_id: field(cols.discussion_id),
            user: field(cols.user),
            posted_at,
            tags,
        });
    }
    Ok(batch)
}

/// Maps timestamps onto whole weeks since an epoch date (midnight UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekClock {
    epoch: NaiveDate,
}

impl WeekClock {
    pub fn new(epoch: NaiveDate) -> Self {
        Self { epoch }
    }

    /// Clock whose epoch is the Monday on or before `ts`.
    pub fn monday_on_or_before(ts: DateTime<Utc>) -> Self {
        let date = ts.date_naive();
        let back = date.weekday().num_days_from_monday() as u64;
        Self::new(date - chrono::Days::new(back))
    }

    /// Default clock for a dataset: the Monday on or before its earliest comment.
    pub fn for_comments(comments: &[Comment]) -> Option<Self> {
        comments
            .iter()
            .map(|c| c.posted_at)
            .min()
            .map(Self::monday_on_or_before)
    }

    pub fn epoch(&self) -> NaiveDate {
        self.epoch
    }

    pub fn week_of(&self, ts: DateTime<Utc>) -> Week {
        let origin = self.epoch.and_time(NaiveTime::MIN).and_utc();
        (ts - origin).num_seconds().div_euclid(SECONDS_PER_WEEK)
    }

    /// First instant of week `week`.
    pub fn week_start(&self, week: Week) -> DateTime<Utc> {
        self.epoch.and_time(NaiveTime::MIN).and_utc() + chrono::Duration::weeks(week)
    }
}

/// Seed tags of one glitch-class proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTagSet {
    pub proposal_id: String,
    pub submission_week: Week,
    pub seeds: BTreeSet<String>,
}

impl SeedTagSet {
    pub fn new<I, S>(proposal_id: impl Into<String>, submission_week: Week, seeds: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let seeds = seeds
            .into_iter()
            .map(|s| normalize_tag(s.as_ref()))
            .collect::<Result<BTreeSet<_>>>()?;
        let proposal_id = proposal_id.into();
        if seeds.is_empty() {
            return Err(Error::Config(format!("proposal {proposal_id} has no seed tags")));
        }
        Ok(Self {
            proposal_id,
            submission_week,
            seeds,
        })
    }
}

/// One raw row of the seed-tags CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRow {
    pub proposal_id: String,
    pub submission: DateTime<Utc>,
    pub seed_tag: String,
}

/// Reads `proposal_id, submission_date, seed_tag` rows. Any bad row is fatal:
/// the seed file defines which proposals exist.
pub fn parse_seed_rows<R: Read>(source: R) -> Result<Vec<SeedRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers()?.clone();
    let pid = required(&headers, "proposal_id")?;
    let date = required(&headers, "submission_date")?;
    let tag = required(&headers, "seed_tag")?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_date = record.get(date).unwrap_or("");
        let submission = parse_timestamp(raw_date).ok_or_else(|| Error::Csv {
            line,
            message: format!("unparseable submission_date {raw_date:?}"),
        })?;
        let raw_tag = record.get(tag).unwrap_or("").trim();
        let seed_tag = if raw_tag.starts_with('#') {
            normalize_tag(raw_tag)
        } else {
            normalize_tag(&format!("#{raw_tag}"))
        }
        .map_err(|e| Error::Csv {
            line,
            message: e.to_string(),
        })?;
        rows.push(SeedRow {
            proposal_id: record.get(pid).unwrap_or("").trim().to_string(),
            submission,
            seed_tag,
        });
    }
    Ok(rows)
}

/// Groups seed rows per proposal (ordered by proposal id).
pub fn group_seeds(rows: &[SeedRow], clock: &WeekClock) -> Result<Vec<SeedTagSet>> {
    let mut grouped: BTreeMap<&str, (DateTime<Utc>, Vec<&str>)> = BTreeMap::new();
    for row in rows {
        let entry = grouped
            .entry(row.proposal_id.as_str())
            .or_insert((row.submission, Vec::new()));
        if clock.week_of(entry.0) != clock.week_of(row.submission) {
            return Err(Error::Config(format!(
                "proposal {} has conflicting submission dates",
                row.proposal_id
            )));
        }
        entry.1.push(row.seed_tag.as_str());
    }
    grouped
        .into_iter()
        .map(|(pid, (submitted, tags))| SeedTagSet::new(pid, clock.week_of(submitted), tags))
        .collect()
}

/// Keeps the comments posted on Notes boards, in input order.
pub fn filter_notes_boards(comments: &[Comment], notes_board_ids: &BTreeSet<String>) -> Vec<Comment> {
    let kept: Vec<Comment> = comments
        .iter()
        .filter(|c| notes_board_ids.contains(&c.board_id))
        .cloned()
        .collect();
    if kept.is_empty() {
        log::warn!(
            "no comments left after Notes-board filtering ({} board ids configured)",
            notes_board_ids.len()
        );
    }
    kept
}

/// Discussions in which any comment carries one of the proposal's seed tags.
pub fn seed_discussions(comments: &[Comment], seed_set: &SeedTagSet) -> BTreeSet<String> {
    comments
        .iter()
        .filter(|c| c.tags.iter().any(|t| seed_set.seeds.contains(t)))
        .map(|c| c.discussion_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransactionUnit {
    /// Each tag-bearing comment is a transaction.
    #[default]
    Comment,
    /// All tags of one discussion within one week form a transaction.
    DiscussionWeek,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub source_comment: String,
    pub week: Week,
    pub items: BTreeSet<String>,
}

/// Cumulative weekly snapshots of one proposal's transactions.
///
/// Transactions are stored once, ordered by week; the snapshot for week `w`
/// is the prefix of transactions posted no later than `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionTimeline {
    pub proposal_id: String,
    pub week_origin: Week,
    pub submission_week: Week,
    transactions: Vec<Transaction>,
    // cumulative transaction count at the end of each week, origin first
    ends: Vec<usize>,
    /// Comments in the selected discussions and window, tagless ones included.
    pub n_source_comments: usize,
    pub n_tagless_comments: usize,
}

impl TransactionTimeline {
    pub fn weeks(&self) -> RangeInclusive<Week> {
        self.week_origin..=self.submission_week
    }

    pub fn n_weeks(&self) -> usize {
        self.ends.len()
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    /// All transactions posted in weeks `<= week`; `None` outside the timeline.
    pub fn snapshot(&self, week: Week) -> Option<&[Transaction]> {
        if !self.weeks().contains(&week) {
            return None;
        }
        let end = self.ends[(week - self.week_origin) as usize];
        Some(&self.transactions[..end])
    }

    pub fn snapshots(&self) -> impl Iterator<Item = (Week, &[Transaction])> + '_ {
        self.weeks()
            .zip(self.ends.iter())
            .map(move |(w, &end)| (w, &self.transactions[..end]))
    }

    /// Transactions first appearing in `week`.
    pub fn new_in_week(&self, week: Week) -> &[Transaction] {
        if !self.weeks().contains(&week) {
            return &[];
        }
        let idx = (week - self.week_origin) as usize;
        let start = if idx == 0 { 0 } else { self.ends[idx - 1] };
        &self.transactions[start..self.ends[idx]]
    }
}

/// Builds the cumulative timeline of one proposal.
///
/// Comments outside `discussion_ids`, tagless comments and comments posted
/// after `submission_week` are left out. Snapshots run from the week of the
/// earliest included comment through `submission_week`.
pub fn build_timeline(
    proposal_id: &str,
    comments: &[Comment],
    discussion_ids: &BTreeSet<String>,
    submission_week: Week,
    clock: &WeekClock,
    unit: TransactionUnit,
) -> Result<TransactionTimeline> {
    let in_scope: Vec<(Week, &Comment)> = comments
        .iter()
        .filter(|c| discussion_ids.contains(&c.discussion_id))
        .map(|c| (clock.week_of(c.posted_at), c))
        .filter(|(w, _)| *w <= submission_week)
        .collect();
    let n_source_comments = in_scope.len();
    let tagged: Vec<(Week, &Comment)> = in_scope.into_iter().filter(|(_, c)| !c.tags.is_empty()).collect();
    let n_tagless_comments = n_source_comments - tagged.len();

    let mut transactions: Vec<Transaction> = match unit {
        TransactionUnit::Comment => tagged
            .iter()
            .map(|(w, c)| Transaction {
                source_comment: c.comment_id.clone(),
                week: *w,
                items: c.tags.clone(),
            })
            .collect(),
        TransactionUnit::DiscussionWeek => {
            let mut slot: BTreeMap<(&str, Week), usize> = BTreeMap::new();
            let mut merged: Vec<Transaction> = Vec::new();
            for (w, c) in &tagged {
                match slot.get(&(c.discussion_id.as_str(), *w)) {
                    Some(&i) => merged[i].items.extend(c.tags.iter().cloned()),
                    None => {
                        slot.insert((c.discussion_id.as_str(), *w), merged.len());
                        merged.push(Transaction {
                            source_comment: c.comment_id.clone(),
                            week: *w,
                            items: c.tags.clone(),
                        });
                    }
                }
            }
            merged
        }
    };
    if transactions.is_empty() {
        return Err(Error::EmptyTimeline);
    }
    transactions.sort_by_key(|t| t.week);

    let week_origin = transactions[0].week;
    let mut ends = Vec::with_capacity((submission_week - week_origin + 1) as usize);
    let mut cursor = 0;
    for week in week_origin..=submission_week {
        while cursor < transactions.len() && transactions[cursor].week <= week {
            cursor += 1;
        }
        ends.push(cursor);
    }

    Ok(TransactionTimeline {
        proposal_id: proposal_id.to_string(),
        week_origin,
        submission_week,
        transactions,
        ends,
        n_source_comments,
        n_tagless_comments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn ts(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    fn comment(id: &str, board: &str, disc: &str, at: DateTime<Utc>, tags: &[&str]) -> Comment {
        Comment {
            comment_id: id.into(),
            board_id: board.into(),
            discussion_id: disc.into(),
            user: "u".into(),
            posted_at: at,
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn normalizes_examples() {
        assert_eq!(normalize_tag("#Helix,").unwrap(), "#helix");
        assert_eq!(normalize_tag("#1800Ripple").unwrap(), "#1800ripple");
        assert_eq!(normalize_tag("#POWERLIN").unwrap(), "#powerlin");
        assert_eq!(normalize_tag("#a.b?!").unwrap(), "#a.b");
        assert!(matches!(normalize_tag("Helix"), Err(Error::NotATag(_))));
        assert!(normalize_tag("#?").is_err());
    }

    #[test]
    fn body_extraction() {
        let tags = extract_tags("looks like #Helix to me, maybe #PossibleNewGlitch");
        let want: BTreeSet<String> = ["#helix", "#possiblenewglitch"].iter().map(|s| s.to_string()).collect();
        assert_eq!(tags, want);
        assert!(extract_tags("no tags here").is_empty());
        assert_eq!(extract_tags("#A #a #A.").len(), 1);
    }

    #[test]
    fn parses_three_rows_in_order() {
        let csv = "comment_id,board_id,discussion_id,user,posted_at,body\n\
                   c1,b1,d1,alice,2020-01-06T10:00:00Z,\"looks like #Helix to me, maybe #PossibleNewGlitch\"\n\
                   c2,b1,d1,bob,2020-01-07 11:00:00,nothing to see\n\
                   c3,b2,d2,carol,2020-01-08,#Blip!\n";
        let batch = parse_comments(csv.as_bytes()).unwrap();
        assert!(batch.errors.is_empty());
        let ids: Vec<_> = batch.comments.iter().map(|c| c.comment_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c2", "c3"]);
        assert_eq!(batch.comments[0].tags.len(), 2);
        assert!(batch.comments[1].tags.is_empty());
        assert!(batch.comments[2].tags.contains("#blip"));
    }

    #[test]
    fn tags_column_wins_over_body() {
        let csv = "comment_id,board_id,discussion_id,user,posted_at,body,tags\n\
                   c1,b1,d1,alice,2020-01-06T10:00:00Z,#ignored,helix;#Blip\n";
        let batch = parse_comments(csv.as_bytes()).unwrap();
        let tags: Vec<_> = batch.comments[0].tags.iter().cloned().collect();
        assert_eq!(tags, ["#blip", "#helix"]);
    }

    #[test]
    fn bad_timestamp_is_a_row_error() {
        let csv = "comment_id,board_id,discussion_id,user,posted_at,body\n\
                   c1,b1,d1,alice,yesterday,#a\n\
                   c2,b1,d1,alice,2020-01-06,#a\n";
        let batch = parse_comments(csv.as_bytes()).unwrap();
        assert_eq!(batch.comments.len(), 1);
        assert_eq!(batch.errors.len(), 1);
        assert_eq!(batch.errors[0].comment_id, "c1");
        assert_eq!(batch.errors[0].line, 2);
    }

    #[test]
    fn malformed_csv_is_fatal_with_line() {
        let csv = "comment_id,board_id,discussion_id,user,posted_at,body\n\
                   c1,b1,d1,alice,2020-01-06,#a\n\
                   c2,b1,d1\n";
        match parse_comments(csv.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected CSV error, got {other:?}"),
        }
        let missing = "comment_id,board_id,user,posted_at,body\n";
        assert!(matches!(
            parse_comments(missing.as_bytes()),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn notes_filter() {
        let cs: Vec<Comment> = (0..5)
            .map(|i| {
                comment(
                    &format!("c{i}"),
                    if i % 2 == 0 && i < 4 { "notes" } else { "chat" },
                    "d",
                    ts(2020, 1, 6),
                    &["#a"],
                )
            })
            .collect();
        let notes: BTreeSet<String> = ["notes".to_string()].into();
        let kept = filter_notes_boards(&cs, &notes);
        assert_eq!(
            kept.iter().map(|c| c.comment_id.as_str()).collect::<Vec<_>>(),
            ["c0", "c2"]
        );
        assert!(filter_notes_boards(&cs, &BTreeSet::new()).is_empty());
        let all: BTreeSet<String> = ["notes".to_string(), "chat".to_string()].into();
        assert_eq!(filter_notes_boards(&cs, &all), cs);
    }

    #[test]
    fn seed_discussion_selection() {
        let cs = vec![
            comment("c1", "b", "d1", ts(2020, 1, 6), &["#helix", "#blip"]),
            comment("c2", "b", "d2", ts(2020, 1, 6), &["#blip"]),
            comment("c3", "b", "d1", ts(2020, 1, 6), &["#koi"]),
        ];
        let seeds = SeedTagSet::new("p", 0, ["#helix"]).unwrap();
        assert_eq!(seed_discussions(&cs, &seeds), ["d1".to_string()].into());
        let none = SeedTagSet::new("p", 0, ["#nothing"]).unwrap();
        assert!(seed_discussions(&cs, &none).is_empty());
        let both = SeedTagSet::new("p", 0, ["#helix", "#koi"]).unwrap();
        assert_eq!(seed_discussions(&cs, &both).len(), 1);
        assert!(SeedTagSet::new("p", 0, Vec::<&str>::new()).is_err());
    }

    #[test]
    fn week_clock_defaults_to_monday() {
        // 2020-01-08 is a Wednesday.
        let clock = WeekClock::monday_on_or_before(ts(2020, 1, 8));
        assert_eq!(clock.epoch(), NaiveDate::from_ymd_opt(2020, 1, 6).unwrap());
        assert_eq!(clock.week_of(ts(2020, 1, 12)), 0);
        assert_eq!(clock.week_of(Utc.with_ymd_and_hms(2020, 1, 13, 0, 0, 0).unwrap()), 1);
        assert_eq!(clock.week_of(ts(2020, 1, 5)), -1);
        assert_eq!(clock.week_start(1), Utc.with_ymd_and_hms(2020, 1, 13, 0, 0, 0).unwrap());
    }

    fn weekly_fixture() -> (Vec<Comment>, WeekClock) {
        let clock = WeekClock::new(NaiveDate::from_ymd_opt(2019, 1, 7).unwrap());
        let at = |week: i64| clock.week_start(week) + chrono::Duration::hours(30);
        let cs = vec![
            comment("a", "b", "d1", at(10), &["#x", "#y"]),
            comment("b", "b", "d1", at(10), &["#x"]),
            comment("t", "b", "d1", at(10), &[]),
            comment("c", "b", "d2", at(11), &["#y"]),
            comment("late", "b", "d1", at(13), &["#x"]),
            comment("other", "b", "d9", at(10), &["#x"]),
        ];
        (cs, clock)
    }

    #[test]
    fn cumulative_timeline() {
        let (cs, clock) = weekly_fixture();
        let discs: BTreeSet<String> = ["d1".into(), "d2".into()].into();
        let tl = build_timeline("p", &cs, &discs, 12, &clock, TransactionUnit::Comment).unwrap();
        let sizes: Vec<(Week, usize)> = tl.snapshots().map(|(w, s)| (w, s.len())).collect();
        assert_eq!(sizes, [(10, 2), (11, 3), (12, 3)]);
        assert_eq!(tl.n_source_comments, 4);
        assert_eq!(tl.n_tagless_comments, 1);
        assert!(tl.snapshot(13).is_none());
        assert_eq!(tl.new_in_week(11).len(), 1);
    }

    #[test]
    fn single_week_padded_to_submission() {
        let (cs, clock) = weekly_fixture();
        let discs: BTreeSet<String> = ["d9".into()].into();
        let tl = build_timeline("p", &cs, &discs, 14, &clock, TransactionUnit::Comment).unwrap();
        let sizes: Vec<usize> = tl.snapshots().map(|(_, s)| s.len()).collect();
        assert_eq!(sizes, [1, 1, 1, 1, 1]);
    }

    #[test]
    fn discussion_week_unit_merges() {
        let (cs, clock) = weekly_fixture();
        let discs: BTreeSet<String> = ["d1".into(), "d2".into()].into();
        let tl = build_timeline("p", &cs, &discs, 13, &clock, TransactionUnit::DiscussionWeek).unwrap();
        assert_eq!(tl.transactions().len(), 3);
        assert_eq!(tl.transactions()[0].items.len(), 2);
        assert_eq!(tl.transactions()[0].source_comment, "a");
    }

    #[test]
    fn empty_timeline_is_an_error() {
        let (cs, clock) = weekly_fixture();
        let discs: BTreeSet<String> = ["nope".into()].into();
        assert!(matches!(
            build_timeline("p", &cs, &discs, 12, &clock, TransactionUnit::Comment),
            Err(Error::EmptyTimeline)
        ));
    }

    #[test]
    fn seeds_group_by_proposal() {
        let csv = "proposal_id,submission_date,seed_tag\n\
                   p2,2020-03-02,#Koi\n\
                   p1,2020-02-03,helix\n\
                   p1,2020-02-03,#Blip\n";
        let rows = parse_seed_rows(csv.as_bytes()).unwrap();
        let clock = WeekClock::new(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap());
        let sets = group_seeds(&rows, &clock).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].proposal_id, "p1");
        assert_eq!(sets[0].submission_week, 4);
        assert_eq!(sets[0].seeds.len(), 2);
        let bad = "proposal_id,submission_date,seed_tag\np1,2020-02-03,#a\np1,2021-02-03,#b\n";
        let rows = parse_seed_rows(bad.as_bytes()).unwrap();
        assert!(group_seeds(&rows, &clock).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(body in "[A-Za-z0-9_.,;:!?-]{1,16}") {
            let raw = format!("#{body}");
            if let Ok(once) = normalize_tag(&raw) {
                prop_assert_eq!(normalize_tag(&once).unwrap(), once);
            }
        }

        #[test]
        fn snapshots_grow_and_partition(weeks in proptest::collection::vec((0i64..20, 0usize..3), 1..40)) {
            let clock = WeekClock::new(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap());
            let cs: Vec<Comment> = weeks
                .iter()
                .enumerate()
                .map(|(i, (w, k))| {
                    let tags: Vec<String> = (0..*k).map(|j| format!("#t{j}")).collect();
                    let refs: Vec<&str> = tags.iter().map(|s| s.as_str()).collect();
                    comment(&format!("c{i}"), "b", "d", clock.week_start(*w), &refs)
                })
                .collect();
            let discs: BTreeSet<String> = ["d".into()].into();
            match build_timeline("p", &cs, &discs, 25, &clock, TransactionUnit::Comment) {
                Err(Error::EmptyTimeline) => prop_assert!(cs.iter().all(|c| c.tags.is_empty())),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
                Ok(tl) => {
                    let sizes: Vec<usize> = tl.snapshots().map(|(_, s)| s.len()).collect();
                    prop_assert!(sizes.windows(2).all(|p| p[0] <= p[1]));
                    prop_assert_eq!(*sizes.last().unwrap(), cs.iter().filter(|c| !c.tags.is_empty()).count());
                    for c in cs.iter().filter(|c| !c.tags.is_empty()) {
                        let w = clock.week_of(c.posted_at);
                        for (sw, snap) in tl.snapshots() {
                            let hits = snap.iter().filter(|t| t.source_comment == c.comment_id).count();
                            prop_assert_eq!(hits, usize::from(sw >= w));
                        }
                    }
                }
            }
        }
    }
}
