//! Pairwise association rules over transaction snapshots.
//!
//! Rules have at most one antecedent tag and exactly one consequent tag.
//! `{ } -> {#t}` (empty antecedent) is emitted for every frequent single tag.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::tagstream::{Transaction, TransactionTimeline};
use crate::{Error, Result, Week};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub lhs: Option<String>,
    pub rhs: String,
}

impl Rule {
    pub fn new(lhs: Option<&str>, rhs: &str) -> Result<Self> {
        if lhs == Some(rhs) {
            return Err(Error::Config(format!("rule {rhs} -> {rhs} has overlapping sides")));
        }
        Ok(Self {
            lhs: lhs.map(str::to_string),
            rhs: rhs.to_string(),
        })
    }

    pub fn lhs_label(&self) -> String {
        match &self.lhs {
            Some(tag) => format!("{{{tag}}}"),
            None => "{ }".to_string(),
        }
    }

    pub fn rhs_label(&self) -> String {
        format!("{{{}}}", self.rhs)
    }

    pub fn involves(&self, tag: &str) -> bool {
        self.rhs == tag || self.lhs.as_deref() == Some(tag)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs_label(), self.rhs_label())
    }
}

/// One rule measured on one weekly snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSnapshot {
    pub rule: Rule,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
    /// Transactions containing `lhs ∪ rhs`.
    pub count: u64,
    pub week: Week,
}

/// Weekly support of one rule from its first qualifying week through the
/// submission week. `values[i]` belongs to week `first_week + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSeries {
    pub proposal_id: String,
    pub rule: Rule,
    pub first_week: Week,
    pub submission_week: Week,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

impl SupportSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn week_at(&self, offset: usize) -> Week {
        self.first_week + offset as Week
    }
}

fn count_containing(itemset: &[&str], transactions: &[Transaction]) -> usize {
    transactions
        .iter()
        .filter(|t| itemset.iter().all(|item| t.items.contains(*item)))
        .count()
}

/// Fraction of transactions containing every item of `itemset`.
pub fn support(itemset: &[&str], transactions: &[Transaction]) -> Result<f64> {
    if transactions.is_empty() {
        return Err(Error::UndefinedSupport);
    }
    Ok(count_containing(itemset, transactions) as f64 / transactions.len() as f64)
}

pub fn confidence(rule: &Rule, transactions: &[Transaction]) -> Result<f64> {
    let lhs: Vec<&str> = rule.lhs.as_deref().into_iter().collect();
    let lhs_support = support(&lhs, transactions)?;
    if lhs_support == 0.0 {
        return Err(Error::UndefinedConfidence);
    }
    let mut both = lhs.clone();
    both.push(&rule.rhs);
    Ok(support(&both, transactions)? / lhs_support)
}

pub fn lift(rule: &Rule, transactions: &[Transaction]) -> Result<f64> {
    let rhs_support = support(&[&rule.rhs], transactions)?;
    if rhs_support == 0.0 {
        return Err(Error::UndefinedLift);
    }
    Ok(confidence(rule, transactions)? / rhs_support)
}

fn check_thresholds(min_support: f64, min_confidence: f64) -> Result<()> {
    for (name, v) in [("min_support", min_support), ("min_confidence", min_confidence)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    Ok(())
}

// Incremental single/pair counts with interned tags.
#[derive(Debug, Default)]
struct CoOccurrence {
    ids: HashMap<String, u32>,
    names: Vec<String>,
    singles: Vec<u64>,
    pairs: HashMap<(u32, u32), u64>,
    total: u64,
}

type RuleKey = (Option<u32>, u32);

struct Measure {
    count: u64,
    support: f64,
    confidence: f64,
    lift: f64,
}

impl CoOccurrence {
    fn intern(&mut self, tag: &str) -> u32 {
        if let Some(&id) = self.ids.get(tag) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(tag.to_string(), id);
        self.names.push(tag.to_string());
        self.singles.push(0);
        id
    }

    fn add(&mut self, transaction: &Transaction) {
        self.total += 1;
        let ids: Vec<u32> = transaction.items.iter().map(|t| self.intern(t)).collect();
        for (i, &a) in ids.iter().enumerate() {
            self.singles[a as usize] += 1;
            for &b in &ids[i + 1..] {
                *self.pairs.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
    }

    // Every rule whose itemset occurs at least once.
    fn candidates(&self) -> impl Iterator<Item = RuleKey> + '_ {
        let singles = (0..self.names.len() as u32)
            .filter(|&i| self.singles[i as usize] > 0)
            .map(|i| (None, i));
        let pairs = self.pairs.keys().flat_map(|&(a, b)| [(Some(a), b), (Some(b), a)]);
        singles.chain(pairs)
    }

    fn measure(&self, (lhs, rhs): RuleKey) -> Measure {
        let n = self.total as f64;
        let rhs_count = self.singles[rhs as usize];
        let (count, lhs_count) = match lhs {
            None => (rhs_count, self.total),
            Some(a) => (
                self.pairs.get(&(a.min(rhs), a.max(rhs))).copied().unwrap_or(0),
                self.singles[a as usize],
            ),
        };
        let support = count as f64 / n;
        let confidence = count as f64 / lhs_count as f64;
        let lift = confidence / (rhs_count as f64 / n);
        Measure {
            count,
            support,
            confidence,
            lift,
        }
    }

    fn rule(&self, (lhs, rhs): RuleKey) -> Rule {
        Rule {
            lhs: lhs.map(|a| self.names[a as usize].clone()),
            rhs: self.names[rhs as usize].clone(),
        }
    }

    fn qualifying(&self, week: Week, min_support: f64, min_confidence: f64) -> Vec<RuleSnapshot> {
        let mut out: Vec<RuleSnapshot> = self
            .candidates()
            .filter_map(|key| {
                let m = self.measure(key);
                (m.support >= min_support && m.confidence >= min_confidence).then(|| RuleSnapshot {
                    rule: self.rule(key),
                    support: m.support,
                    confidence: m.confidence,
                    lift: m.lift,
                    count: m.count,
                    week,
                })
            })
            .collect();
        out.sort_by(|a, b| a.rule.cmp(&b.rule));
        out
    }
}

/// All rules (`|lhs| <= 1`, `|rhs| = 1`) clearing both thresholds on one
/// snapshot, ordered by antecedent then consequent. A rule must occur at least
/// once to be mined.
pub fn mine_week(
    transactions: &[Transaction],
    week: Week,
    min_support: f64,
    min_confidence: f64,
) -> Result<Vec<RuleSnapshot>> {
    check_thresholds(min_support, min_confidence)?;
    let mut co = CoOccurrence::default();
    for t in transactions {
        co.add(t);
    }
    if co.total == 0 {
        return Ok(Vec::new());
    }
    Ok(co.qualifying(week, min_support, min_confidence))
}

/// [`mine_week`] applied to every snapshot of a timeline, week by week.
///
/// Counts are updated incrementally, so this costs one pass over the
/// transactions plus the per-week rule emission.
pub fn mine_timeline(
    timeline: &TransactionTimeline,
    min_support: f64,
    min_confidence: f64,
) -> Result<Vec<RuleSnapshot>> {
    check_thresholds(min_support, min_confidence)?;
    let mut co = CoOccurrence::default();
    let mut rows = Vec::new();
    for week in timeline.weeks() {
        for t in timeline.new_in_week(week) {
            co.add(t);
        }
        if co.total > 0 {
            rows.extend(co.qualifying(week, min_support, min_confidence));
        }
    }
    Ok(rows)
}

/// One support series per rule that clears the thresholds in at least one
/// week.
///
/// A series starts at the rule's first qualifying week and runs through the
/// submission week; later weeks record the true support even when it drops
/// below the thresholds.
pub fn series_for_pairs(
    timeline: &TransactionTimeline,
    min_support: f64,
    min_confidence: f64,
) -> Result<Vec<SupportSeries>> {
    check_thresholds(min_support, min_confidence)?;
    let mut co = CoOccurrence::default();
    let mut open: BTreeMap<RuleKey, (Week, Vec<f64>, Vec<u64>)> = BTreeMap::new();
    for week in timeline.weeks() {
        for t in timeline.new_in_week(week) {
            co.add(t);
        }
        if co.total == 0 {
            continue;
        }
        let keys: Vec<RuleKey> = co.candidates().collect();
        for key in keys {
            let m = co.measure(key);
            match open.get_mut(&key) {
                Some((_, values, counts)) => {
                    values.push(m.support);
                    counts.push(m.count);
                }
                None if m.support >= min_support && m.confidence >= min_confidence => {
                    open.insert(key, (week, vec![m.support], vec![m.count]));
                }
                None => {}
            }
        }
    }
    let mut series: Vec<SupportSeries> = open
        .into_iter()
        .map(|(key, (first_week, values, counts))| SupportSeries {
            proposal_id: timeline.proposal_id.clone(),
            rule: co.rule(key),
            first_week,
            submission_week: timeline.submission_week,
            values,
            counts,
        })
        .collect();
    series.sort_by(|a, b| a.rule.cmp(&b.rule));
    Ok(series)
}

/// Rounds to four decimals, the precision of the rules table.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Writes the rules table with header `index,LHS,RHS,support,confidence,count,week`.
pub fn write_rules_csv<W: Write>(rows: &[RuleSnapshot], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "LHS", "RHS", "support", "confidence", "count", "week"])?;
    for (i, row) in rows.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            row.rule.lhs_label(),
            row.rule.rhs_label(),
            round4(row.support).to_string(),
            round4(row.confidence).to_string(),
            row.count.to_string(),
            row.week.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
