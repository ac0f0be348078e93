//! Example- and primitive-repetition training schedules.
//!
//! A schedule is an addition order over example ids plus a list of phases;
//! each phase activates a prefix of that order, so active sets only grow.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::Lexicon;
use crate::corpus::Dataset;
use crate::seed;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("primitive repetition needs a lexicon")]
    MissingLexicon,
    #[error("the initial phase would activate no examples")]
    EmptyInitialSet,
    #[error("step {step} outside [0, {total_steps})")]
    StepOutOfRange { step: u64, total_steps: u64 },
    #[error("invalid schedule parameters: {0}")]
    InvalidParams(String),
    #[error("schedule line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    None,
    Example,
    Primitive,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::None => "none",
            ScheduleKind::Example => "example",
            ScheduleKind::Primitive => "primitive",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ScheduleKind::None),
            "example" => Ok(ScheduleKind::Example),
            "primitive" => Ok(ScheduleKind::Primitive),
            other => Err(format!("unknown schedule kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumParams {
    pub init_frac: f64,
    pub hold_frac: f64,
    pub full_frac: f64,
    pub total_steps: u64,
    pub granularity_steps: u64,
}

impl CurriculumParams {
    pub fn new(total_steps: u64) -> Self {
        CurriculumParams {
            init_frac: 0.2,
            hold_frac: 0.2,
            full_frac: 0.8,
            total_steps,
            granularity_steps: 500,
        }
    }

    fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: &str| Err(CurriculumError::InvalidParams(m.to_string()));
        if !(self.init_frac > 0.0 && self.init_frac < 1.0) {
            return bad("init_frac must lie in (0, 1)");
        }
        if !(self.hold_frac >= 0.0 && self.hold_frac < self.full_frac && self.full_frac <= 1.0) {
            return bad("need 0 <= hold_frac < full_frac <= 1");
        }
        if self.total_steps == 0 || self.granularity_steps == 0 {
            return bad("total_steps and granularity_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub start: u64,
    pub end: u64,
    /// Length of the prefix of the addition order active in this phase.
    pub active_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_steps: u64,
    order: Vec<String>,
    phases: Vec<Phase>,
}

impl Schedule {
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Every id in the order it becomes active.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// Ids active at `step`.
    pub fn active_set(&self, step: u64) -> Result<&[String], CurriculumError> {
        if step >= self.total_steps {
            return Err(CurriculumError::StepOutOfRange {
                step,
                total_steps: self.total_steps,
            });
        }
        let i = self.phases.partition_point(|p| p.end <= step);
        Ok(&self.order[..self.phases[i].active_len])
    }

    /// One line per phase: `{"start","end","add_ids"}`, where `add_ids` lists the
    /// ids first activated in that phase. The first line also carries `kind`.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        let mut prev = 0;
        for (i, p) in self.phases.iter().enumerate() {
            let line = PhaseLine {
                start: p.start,
                end: p.end,
                add_ids: self.order[prev..p.active_len].to_vec(),
                kind: (i == 0).then_some(self.kind),
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
            prev = p.active_len;
        }
        writer.flush()
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, CurriculumError> {
        let mut kind = ScheduleKind::None;
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut phases: Vec<Phase> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| CurriculumError::Format { line: i + 1, message };
            let p: PhaseLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let expected_start = phases.last().map_or(0, |q| q.end);
            if p.start != expected_start || p.end <= p.start {
                return Err(bad(format!("phase [{}, {}) does not continue at {expected_start}", p.start, p.end)));
            }
            if let Some(k) = p.kind {
                kind = k;
            }
            for id in p.add_ids {
                if !seen.insert(id.clone()) {
                    return Err(bad(format!("id {id:?} added twice")));
                }
                order.push(id);
            }
            phases.push(Phase {
                start: p.start,
                end: p.end,
                active_len: order.len(),
            });
        }
        let Some(last) = phases.last() else {
            return Err(CurriculumError::Format {
                line: 0,
                message: "schedule has no phases".into(),
            });
        };
        Ok(Schedule {
            kind,
            total_steps: last.end,
            order,
            phases,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CurriculumError> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PhaseLine {
    start: u64,
    end: u64,
    add_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<ScheduleKind>,
}

/// Build a repetition schedule over `dataset`.
///
/// Steps `[0, hold)` train on an initial subset: `round(init_frac*N)` uniformly
/// chosen examples, or for the primitive kind every example whose lexicon
/// primitives all lie in a uniformly chosen `round(init_frac*P)` primitives.
/// From `hold` to `full` the active count grows linearly, updated at every
/// `granularity_steps` boundary; from `full` on the whole dataset is active.
pub fn build_repetition_schedule(
    dataset: &Dataset,
    kind: ScheduleKind,
    lexicon: Option<&Lexicon>,
    params: &CurriculumParams,
    seed: u64,
) -> Result<Schedule, CurriculumError> {
    params.validate()?;
    let n = dataset.len();
    let total = params.total_steps;
    let mut rng = seed::rng(seed);
    let (order, initial) = match kind {
        ScheduleKind::None => {
            let order: Vec<String> = dataset.ids().map(str::to_string).collect();
            return Ok(Schedule {
                kind,
                total_steps: total,
                phases: vec![Phase {
                    start: 0,
                    end: total,
                    active_len: order.len(),
                }],
                order,
            });
        }
        ScheduleKind::Example => {
            let mut order: Vec<String> = dataset.ids().map(str::to_string).collect();
            order.shuffle(&mut rng);
            let initial = (params.init_frac * n as f64).round() as usize;
            (order, initial)
        }
        ScheduleKind::Primitive => {
            let lexicon = lexicon.ok_or(CurriculumError::MissingLexicon)?;
            let sources: Vec<&str> = lexicon.sources().collect();
            let take = (params.init_frac * sources.len() as f64).round() as usize;
            let chosen: BTreeSet<&str> = index::sample(&mut rng, sources.len(), take)
                .into_iter()
                .map(|i| sources[i])
                .collect();
            let (mut first, mut rest): (Vec<String>, Vec<String>) = (Vec::new(), Vec::new());
            for ex in dataset {
                if lexicon.present_in(&ex.input).iter().all(|p| chosen.contains(p)) {
                    first.push(ex.id.clone());
                } else {
                    rest.push(ex.id.clone());
                }
            }
            first.shuffle(&mut rng);
            rest.shuffle(&mut rng);
            let initial = first.len();
            first.extend(rest);
            (first, initial)
        }
    };
    if initial == 0 {
        return Err(CurriculumError::EmptyInitialSet);
    }

    // The last step always sees the whole dataset, even when full_frac is 1.
    let full = ((params.full_frac * total as f64).round() as u64).min(total - 1);
    let hold = ((params.hold_frac * total as f64).round() as u64).min(full);
    let mut cuts: Vec<(u64, usize)> = vec![(0, initial)];
    let mut b = hold;
    while b < full {
        let grown = (n - initial) as u128 * (b - hold) as u128 / (full - hold) as u128;
        cuts.push((b, initial + grown as usize));
        b += params.granularity_steps;
    }
    cuts.push((full, n));

    let mut phases: Vec<Phase> = Vec::new();
    for (i, &(start, active_len)) in cuts.iter().enumerate() {
        let end = cuts.get(i + 1).map_or(total, |c| c.0);
        if end <= start {
            continue;
        }
        match phases.last_mut() {
            Some(last) if last.active_len == active_len => last.end = end,
            _ => phases.push(Phase { start, end, active_len }),
        }
    }
    Ok(Schedule {
        kind,
        total_steps: total,
        order,
        phases,
    })
}
