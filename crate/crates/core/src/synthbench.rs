//! Synthetic support-like series with planted structure, a power study for
//! the convergence detector, a synthetic comment corpus for end-to-end runs,
//! and brute-force oracles.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, whose output stream is fixed across platforms.

use std::io::Write;

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::find_converge_start;
use crate::rulemine::{Rule, SupportSeries};
use crate::tagstream::{Comment, SeedRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    IidNoise,
    RandomWalk,
    DampedOscillation,
    TwoPhaseVariance,
    CumulativeSupport,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "iid-noise" => SynthKind::IidNoise,
            "random-walk" => SynthKind::RandomWalk,
            "damped-oscillation" => SynthKind::DampedOscillation,
            "two-phase-variance" => SynthKind::TwoPhaseVariance,
            "cumulative-support" => SynthKind::CumulativeSupport,
            other => return Err(Error::Config(format!("unknown series kind {other:?}"))),
        })
    }
}

/// Generator parameters. `t` below is the 0-based position in the series.
///
/// * `iid-noise`: `level + noise_scale·ε_t`
/// * `random-walk`: `level + noise_scale·Σ_{s≤t} ε_s`
/// * `damped-oscillation`: `level + noise_scale·decay^t·(−1)^t` (no randomness)
/// * `two-phase-variance`: `level + ε_t·σ_t`, `σ_t = noise_scale` before
///   `change_point` and `noise_scale·decay^(t−change_point)` from it on
/// * `cumulative-support`: `count / T_t` with `T_0 = initial_total` and
///   `T_t = T_{t−1} + Poisson(mean_increment)`, clamped to `[0, 1]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub length: usize,
    pub change_point: Option<usize>,
    pub noise_scale: f64,
    pub decay: f64,
    pub seed: u64,
    pub level: f64,
    pub count: u64,
    pub initial_total: u64,
    pub mean_increment: f64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, length: usize) -> Self {
        Self {
            kind,
            length,
            change_point: None,
            noise_scale: 1.0,
            decay: 0.9,
            seed: 0,
            level: 0.5,
            count: 1,
            initial_total: 100,
            mean_increment: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.length == 0 {
            return fail("length must be positive".into());
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return fail(format!("noise_scale must be positive, got {}", self.noise_scale));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return fail(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        if !self.level.is_finite() {
            return fail("level must be finite".into());
        }
        if let Some(cp) = self.change_point {
            if cp >= self.length {
                return fail(format!("change_point {cp} must be below length {}", self.length));
            }
        }
        match self.kind {
            SynthKind::TwoPhaseVariance if self.change_point.is_none() => {
                fail("two-phase-variance needs a change_point".into())
            }
            SynthKind::CumulativeSupport
                if self.initial_total == 0 || self.mean_increment.is_nan() || self.mean_increment < 0.0 =>
            {
                fail("cumulative-support needs initial_total > 0 and mean_increment >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

fn kind_label(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::IidNoise => "iid-noise",
        SynthKind::RandomWalk => "random-walk",
        SynthKind::DampedOscillation => "damped-oscillation",
        SynthKind::TwoPhaseVariance => "two-phase-variance",
        SynthKind::CumulativeSupport => "cumulative-support",
    }
}

/// Generates one series, placed at weeks `0..length`.
pub fn generate(spec: &SynthSpec) -> Result<SupportSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.length;
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let values: Vec<f64> = match spec.kind {
        SynthKind::IidNoise => (0..n)
            .map(|_| spec.level + spec.noise_scale * normal(&mut rng))
            .collect(),
        SynthKind::RandomWalk => {
            let mut acc = 0.0;
            (0..n)
                .map(|_| {
                    acc += spec.noise_scale * normal(&mut rng);
                    spec.level + acc
                })
                .collect()
        }
        SynthKind::DampedOscillation => (0..n)
            .map(|t| {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                spec.level + spec.noise_scale * spec.decay.powi(t as i32) * sign
            })
            .collect(),
        SynthKind::TwoPhaseVariance => {
            let cp = spec.change_point.unwrap_or(n);
            (0..n)
                .map(|t| {
                    let sigma = if t < cp {
                        spec.noise_scale
                    } else {
                        spec.noise_scale * spec.decay.powi((t - cp) as i32)
                    };
                    spec.level + normal(&mut rng) * sigma
                })
                .collect()
        }
        SynthKind::CumulativeSupport => {
            let increments = poisson(spec.mean_increment)?;
            let mut total = spec.initial_total as f64;
            (0..n)
                .map(|t| {
                    if t > 0 {
                        total += sample_poisson(&increments, &mut rng);
                    }
                    (spec.count as f64 / total).clamp(0.0, 1.0)
                })
                .collect()
        }
    };
    Ok(SupportSeries {
        proposal_id: "synthetic".to_string(),
        rule: Rule {
            lhs: None,
            rhs: format!("#{}", kind_label(spec.kind)),
        },
        first_week: 0,
        submission_week: n as i64 - 1,
        counts: vec![spec.count; n],
        values,
    })
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::Config(format!("bad Poisson mean {mean}: {e}")))
}

fn sample_poisson(dist: &Option<Poisson<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    dist.as_ref().map_or(0.0, |d| d.sample(rng))
}

/// Detection statistics of the convergence detector on planted vs null series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub n_trials: usize,
    pub alpha: f64,
    pub planted: SynthSpec,
    pub null: SynthSpec,
    pub detections: usize,
    pub detection_rate: f64,
    pub null_flags: usize,
    pub null_rate: f64,
    /// `(start_index − 1) − change_point` for each planted detection.
    pub onset_errors: Vec<i64>,
    pub median_onset_error: Option<f64>,
    pub mean_onset_error: Option<f64>,
}

/// Runs the detector on `n_trials` seeds of each spec (trial `i` uses
/// `spec.seed + i`).
pub fn power_study(n_trials: usize, planted: &SynthSpec, null: &SynthSpec, alpha: f64) -> Result<PowerReport> {
    if n_trials < 50 {
        return Err(Error::Config(format!(
            "power study needs at least 50 trials, got {n_trials}"
        )));
    }
    planted.validate()?;
    null.validate()?;
    let run = |spec: &SynthSpec| -> Result<Vec<Option<usize>>> {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|i| {
                let trial = SynthSpec {
                    seed: spec.seed.wrapping_add(i),
                    ..spec.clone()
                };
                let series = generate(&trial)?;
                Ok(find_converge_start(&series.values, alpha)?.start_index)
            })
            .collect()
    };
    let planted_hits = run(planted)?;
    let null_hits = run(null)?;

    let detections = planted_hits.iter().flatten().count();
    let null_flags = null_hits.iter().flatten().count();
    let onset_errors: Vec<i64> = match planted.change_point {
        Some(cp) => planted_hits
            .iter()
            .flatten()
            .map(|&i| (i as i64 - 1) - cp as i64)
            .collect(),
        None => Vec::new(),
    };
    let as_f64: Vec<f64> = onset_errors.iter().map(|&e| e as f64).collect();
    Ok(PowerReport {
        n_trials,
        alpha,
        planted: planted.clone(),
        null: null.clone(),
        detections,
        detection_rate: detections as f64 / n_trials as f64,
        null_flags,
        null_rate: null_flags as f64 / n_trials as f64,
        median_onset_error: median(&as_f64),
        mean_onset_error: (!as_f64.is_empty()).then(|| as_f64.iter().sum::<f64>() / as_f64.len() as f64),
        onset_errors,
    })
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Shape of a synthetic comment corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_proposals: usize,
    /// Distinct tags per proposal, the first being its seed tag.
    pub tags_per_proposal: usize,
    pub weeks: usize,
    pub discussions_per_proposal: usize,
    pub mean_comments_per_week: f64,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_proposals: 3,
            tags_per_proposal: 4,
            weeks: 60,
            discussions_per_proposal: 12,
            mean_comments_per_week: 6.0,
            start: NaiveDate::from_ymd_opt(2016, 10, 3).expect("valid date"),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub comments: Vec<Comment>,
    pub seeds: Vec<SeedRow>,
}

/// Builds a multi-proposal comment corpus. Each proposal owns its tags and
/// discussions; tag usage probabilities drift over the first part of the
/// window and then settle, so pair supports move and then stabilize.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<SynthCorpus> {
    if spec.n_proposals == 0 || spec.tags_per_proposal < 2 || spec.weeks == 0 || spec.discussions_per_proposal == 0 {
        return Err(Error::Config(
            "corpus needs proposals, >= 2 tags, weeks and discussions".into(),
        ));
    }
    let per_week = poisson(spec.mean_comments_per_week)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let origin = spec.start.and_time(NaiveTime::MIN).and_utc();
    let mut comments = Vec::new();
    let mut seeds = Vec::new();
    let mut next_id = 0u64;
    for p in 0..spec.n_proposals {
        let tag = |j: usize| format!("#p{p:02}tag{j}");
        let settle = spec.weeks as f64 * rng.random_range(0.2..0.7);
        let final_rates: Vec<f64> = (0..spec.tags_per_proposal)
            .map(|_| rng.random_range(0.15..0.6))
            .collect();
        for week in 0..spec.weeks {
            let progress = (week as f64 / settle).min(1.0);
            let n_comments = sample_poisson(&per_week, &mut rng) as usize;
            for _ in 0..n_comments {
                let offset = Duration::seconds(rng.random_range(0..7 * 24 * 3600));
                let mut tags = Vec::new();
                if rng.random_bool(0.9) {
                    if rng.random_bool(0.6) {
                        tags.push(tag(0));
                    }
                    for (j, rate) in final_rates.iter().enumerate().skip(1) {
                        let jitter = (1.0 - progress) * rng.random_range(-0.15..0.15);
                        if rng.random_bool((rate + jitter).clamp(0.01, 0.95)) {
                            tags.push(tag(j));
                        }
                    }
                }
                comments.push(Comment {
                    comment_id: format!("c{next_id:07}"),
                    board_id: if rng.random_bool(0.9) {
                        "notes".into()
                    } else {
                        "chat".into()
                    },
                    discussion_id: format!("p{p:02}d{:03}", rng.random_range(0..spec.discussions_per_proposal)),
                    user: format!("u{:04}", rng.random_range(0..500)),
                    posted_at: origin + Duration::weeks(week as i64) + offset,
                    tags: tags.into_iter().collect(),
                });
                next_id += 1;
            }
        }
        seeds.push(SeedRow {
            proposal_id: format!("P{p:02}"),
            submission: origin + Duration::weeks(spec.weeks as i64 - 1) + Duration::hours(12),
            seed_tag: tag(0),
        });
    }
    comments.sort_by(|a, b| a.posted_at.cmp(&b.posted_at).then(a.comment_id.cmp(&b.comment_id)));
    Ok(SynthCorpus { comments, seeds })
}

/// Writes comments in the ingest schema, tags pre-split in a `tags` column.
pub fn write_comments_csv<W: Write>(comments: &[Comment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["comment_id", "board_id", "discussion_id", "user", "posted_at", "tags"])?;
    for c in comments {
        let tags: Vec<&str> = c.tags.iter().map(String::as_str).collect();
        w.write_record([
            c.comment_id.as_str(),
            c.board_id.as_str(),
            c.discussion_id.as_str(),
            c.user.as_str(),
            &c.posted_at.to_rfc3339(),
            &tags.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_seeds_csv<W: Write>(seeds: &[SeedRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["proposal_id", "submission_date", "seed_tag"])?;
    for s in seeds {
        w.write_record([s.proposal_id.as_str(), &s.submission.to_rfc3339(), s.seed_tag.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Literal transcriptions of the definitions, independent of the optimized
/// paths in [`crate::mktrend`], [`crate::convergence`] and [`crate::rulemine`].
pub mod oracle {
    use crate::tagstream::Transaction;
    use std::collections::BTreeSet;

    /// `Σ_{k<j} sgn(x_j − x_k)` as a double loop.
    pub fn brute_mk_s(series: &[f64]) -> i64 {
        let mut s = 0;
        for k in 0..series.len() {
            for j in k + 1..series.len() {
                let d = series[j] - series[k];
                if d > 0.0 {
                    s += 1;
                } else if d < 0.0 {
                    s -= 1;
                }
            }
        }
        s
    }

    /// Two-pass sample variance of every suffix `series[i..]`, `i = 0..n−1`.
    pub fn brute_suffix_var(series: &[f64]) -> Vec<f64> {
        (0..series.len().saturating_sub(1))
            .map(|i| {
                let slice = &series[i..];
                let mean = slice.iter().sum::<f64>() / slice.len() as f64;
                slice.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (slice.len() - 1) as f64
            })
            .collect()
    }

    /// Every rule `lhs -> rhs` (lhs empty or a single tag) over the tag
    /// universe that occurs at least once and clears both thresholds, as
    /// `(lhs, rhs, count)` sorted by lhs then rhs.
    pub fn brute_rules(
        transactions: &[Transaction],
        min_support: f64,
        min_confidence: f64,
    ) -> Vec<(Option<String>, String, u64)> {
        let universe: BTreeSet<&String> = transactions.iter().flat_map(|t| t.items.iter()).collect();
        let n = transactions.len() as f64;
        let mut lhs_options: Vec<Option<&String>> = vec![None];
        lhs_options.extend(universe.iter().map(|t| Some(*t)));
        let mut out = Vec::new();
        for lhs in &lhs_options {
            for rhs in &universe {
                if lhs == &Some(*rhs) {
                    continue;
                }
                let has_lhs = |t: &&Transaction| lhs.is_none_or(|a| t.items.contains(a));
                let lhs_count = transactions.iter().filter(has_lhs).count();
                let count = transactions
                    .iter()
                    .filter(has_lhs)
                    .filter(|t| t.items.contains(*rhs))
                    .count();
                if count == 0 {
                    continue;
                }
                let support = count as f64 / n;
                let confidence = count as f64 / lhs_count as f64;
                if support >= min_support && confidence >= min_confidence {
                    out.push((lhs.cloned(), (*rhs).clone(), count as u64));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;

    #[test]
    fn seeded_determinism() {
        for kind in [
            SynthKind::IidNoise,
            SynthKind::RandomWalk,
            SynthKind::TwoPhaseVariance,
            SynthKind::CumulativeSupport,
        ] {
            let spec = SynthSpec {
                change_point: Some(20),
                seed: 42,
                ..SynthSpec::new(kind, 50)
            };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            let other = SynthSpec {
                seed: 43,
                ..spec.clone()
            };
            if kind != SynthKind::DampedOscillation {
                assert_ne!(generate(&spec).unwrap().values, generate(&other).unwrap().values);
            }
        }
    }

    #[test]
    fn cumulative_support_is_nonincreasing() {
        let spec = SynthSpec {
            seed: 9,
            ..SynthSpec::new(SynthKind::CumulativeSupport, 200)
        };
        let v = generate(&spec).unwrap().values;
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
        assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(v[0], 0.01);
    }

    #[test]
    fn damped_oscillation_shape() {
        let spec = SynthSpec {
            level: 1.0,
            decay: 0.5,
            ..SynthSpec::new(SynthKind::DampedOscillation, 4)
        };
        assert_eq!(generate(&spec).unwrap().values, vec![2.0, 0.5, 1.25, 0.875]);
    }

    #[test]
    fn two_phase_variance_drops_after_change() {
        let spec = SynthSpec {
            change_point: Some(100),
            decay: 0.5,
            seed: 3,
            ..SynthSpec::new(SynthKind::TwoPhaseVariance, 140)
        };
        let v = generate(&spec).unwrap().values;
        let spread = |s: &[f64]| s.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
        assert!(spread(&v[..100]) > 1.0);
        assert!(spread(&v[110..]) < 0.01);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SynthSpec::new(SynthKind::TwoPhaseVariance, 10);
        assert!(generate(&base).is_err());
        assert!(generate(&SynthSpec {
            change_point: Some(10),
            ..base.clone()
        })
        .is_err());
        assert!(generate(&SynthSpec {
            noise_scale: 0.0,
            ..SynthSpec::new(SynthKind::IidNoise, 5)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            decay: 1.5,
            ..SynthSpec::new(SynthKind::IidNoise, 5)
        })
        .is_err());
        assert!(generate(&SynthSpec::new(SynthKind::IidNoise, 0)).is_err());
        assert!("white".parse::<SynthKind>().is_err());
    }

    #[test]
    fn power_study_rejects_few_trials() {
        let s = SynthSpec::new(SynthKind::IidNoise, 30);
        assert!(power_study(0, &s, &s, 0.05).is_err());
        assert!(power_study(49, &s, &s, 0.05).is_err());
    }

    #[test]
    fn power_study_is_deterministic() {
        let planted = SynthSpec {
            change_point: Some(20),
            seed: 100,
            ..SynthSpec::new(SynthKind::TwoPhaseVariance, 50)
        };
        let null = SynthSpec {
            seed: 900,
            ..SynthSpec::new(SynthKind::IidNoise, 50)
        };
        let a = power_study(50, &planted, &null, 0.05).unwrap();
        assert_eq!(a, power_study(50, &planted, &null, 0.05).unwrap());
        assert_eq!(a.onset_errors.len(), a.detections);
        assert!((0.0..=1.0).contains(&a.detection_rate) && (0.0..=1.0).contains(&a.null_rate));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(brute_mk_s(&[1.0, 2.0, 3.0]), 3);
        assert_eq!(brute_suffix_var(&[0.0, 2.0]), vec![2.0]);
        assert!(brute_suffix_var(&[1.0]).is_empty());
    }

    #[test]
    fn corpus_round_trips_through_csv() {
        let corpus = synth_corpus(&CorpusSpec {
            weeks: 10,
            ..CorpusSpec::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_comments_csv(&corpus.comments, &mut buf).unwrap();
        let parsed = crate::tagstream::parse_comments(buf.as_slice()).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.comments, corpus.comments);
        let mut buf = Vec::new();
        write_seeds_csv(&corpus.seeds, &mut buf).unwrap();
        assert_eq!(crate::tagstream::parse_seed_rows(buf.as_slice()).unwrap(), corpus.seeds);
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 3.0]), Some(2.0));
    }
}
