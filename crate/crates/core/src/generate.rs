//! SCAN* dataset sampling and the standard splits built on it.
//!
//! Sampling draws a conjunct count uniformly from the range that can hit the
//! length window, then each phrase production uniformly (verb, shape,
//! repetition), then each conjunction uniformly. Draws outside the window or
//! already seen (when deduplicating) are rejected. Every candidate slot has
//! its own seed derived from the GenSpec seed, so output does not depend on the
//! number of worker threads.

use std::collections::{HashMap, HashSet};

use log::warn;
use rand::seq::{IndexedRandom, index};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Example};
use crate::grammar::{Command, Conjunction, Direction, Grammar, GrammarError, Modifier, Phrase, Verb};
use crate::seed::{self, Rng};

/// Fraction of the train side carved out as dev when no explicit size is given.
pub const DEFAULT_DEV_RATIO: f64 = 0.05;

const BATCH: usize = 4096;
const MIN_ATTEMPTS: usize = 10_000;
const ATTEMPTS_PER_EXAMPLE: usize = 20;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("could not reach {requested} examples within the constraints (got {produced} after {attempts} attempts)")]
    ExhaustedSpace {
        requested: usize,
        produced: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Constraints for one sampled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub target_size: usize,
    /// Exclusive lower bound on input length in tokens.
    pub min_len: usize,
    /// Inclusive upper bound on input length in tokens.
    pub max_len: usize,
    pub max_unique_primitives_per_example: Option<usize>,
    /// Upper bound on phrases per command.
    pub max_conjuncts: Option<usize>,
    pub seed: u64,
    pub dedupe: bool,
}

impl GenSpec {
    pub fn new(target_size: usize, min_len: usize, max_len: usize, seed: u64) -> Self {
        GenSpec {
            target_size,
            min_len,
            max_len,
            max_unique_primitives_per_example: None,
            max_conjuncts: None,
            seed,
            dedupe: true,
        }
    }

    pub fn validate(&self, grammar: &Grammar) -> Result<(), GenError> {
        if self.target_size == 0 {
            return Err(GenError::InvalidSpec("target_size must be at least 1".into()));
        }
        if self.min_len >= self.max_len {
            return Err(GenError::InvalidSpec(format!(
                "length window ({}, {}] is empty",
                self.min_len, self.max_len
            )));
        }
        if let Some(cap) = self.max_unique_primitives_per_example {
            if cap == 0 || cap > grammar.primitive_count() {
                return Err(GenError::InvalidSpec(format!(
                    "per-example primitive cap {cap} must be in 1..={}",
                    grammar.primitive_count()
                )));
            }
        }
        if self.max_conjuncts == Some(0) {
            return Err(GenError::InvalidSpec("max_conjuncts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

struct Sampler<'g> {
    grammar: &'g Grammar,
    pool: Vec<usize>,
    required: Option<usize>,
    cap: Option<usize>,
    min_len: usize,
    max_len: usize,
    min_phrases: usize,
    max_phrases: usize,
    reps: Vec<Option<u32>>,
    joins: Vec<Conjunction>,
    primitive_shapes: Vec<Shape>,
    turn_shapes: Vec<Shape>,
}

type Shape = (Option<Modifier>, Option<Direction>);

impl<'g> Sampler<'g> {
    fn new(grammar: &'g Grammar, spec: &GenSpec, pool: Vec<usize>, required: Option<usize>) -> Result<Self, GenError> {
        spec.validate(grammar)?;
        let config = grammar.config();
        let mut joins = config.conjunctions.clone();
        joins.sort();
        joins.dedup();
        let mut reps: Vec<Option<u32>> = vec![None];
        reps.extend(grammar.repetition_counts().into_iter().map(Some));

        let longest_phrase = 1 + if config.modifiers.is_empty() { 1 } else { 2 } + (reps.len() > 1) as usize;
        let mut max_phrases = (spec.max_len + 1) / 2;
        if let Some(m) = spec.max_conjuncts {
            max_phrases = max_phrases.min(m);
        }
        if let Some(m) = config.max_conjunctions {
            max_phrases = max_phrases.min(m + 1);
        }
        if joins.is_empty() {
            max_phrases = max_phrases.min(1);
        }
        // Smallest phrase count whose longest serialization exceeds min_len.
        let min_phrases = (spec.min_len + 1) / (longest_phrase + 1) + 1;
        Ok(Sampler {
            grammar,
            pool,
            required,
            cap: spec.max_unique_primitives_per_example,
            min_len: spec.min_len,
            max_len: spec.max_len,
            min_phrases,
            max_phrases,
            reps,
            joins,
            primitive_shapes: grammar.shapes(Verb::Primitive(0)),
            turn_shapes: grammar.shapes(Verb::Turn),
        })
    }

    fn feasible(&self) -> bool {
        self.min_phrases <= self.max_phrases && (!self.pool.is_empty() || self.required.is_some())
    }

    fn draw(&self, rng: &mut Rng) -> Command {
        let n = rng.random_range(self.min_phrases..=self.max_phrases);
        let mut verbs: Vec<Verb> = match (self.cap, self.required) {
            (Some(cap), req) => {
                let take = cap.saturating_sub(req.is_some() as usize).min(self.pool.len());
                let mut chosen: Vec<Verb> = index::sample(rng, self.pool.len(), take)
                    .into_iter()
                    .map(|i| Verb::Primitive(self.pool[i]))
                    .collect();
                chosen.extend(req.map(Verb::Primitive));
                chosen
            }
            (None, req) => {
                let mut all: Vec<Verb> = self.pool.iter().map(|&i| Verb::Primitive(i)).collect();
                if let Some(r) = req {
                    if !self.pool.contains(&r) {
                        all.push(Verb::Primitive(r));
                    }
                }
                all
            }
        };
        if self.grammar.config().allow_turn_verb {
            verbs.push(Verb::Turn);
        }
        let mut phrases: Vec<Phrase> = (0..n).map(|_| self.draw_phrase(*verbs.choose(rng).unwrap(), rng)).collect();
        if let Some(req) = self.required {
            let at = rng.random_range(0..n);
            phrases[at].verb = Verb::Primitive(req);
        }
        let joins: Vec<Conjunction> = (1..n).map(|_| *self.joins.choose(rng).unwrap()).collect();
        Command::from_parts(&phrases, &joins)
    }

    fn draw_phrase(&self, verb: Verb, rng: &mut Rng) -> Phrase {
        let shapes = match verb {
            Verb::Primitive(_) => &self.primitive_shapes,
            Verb::Turn => &self.turn_shapes,
        };
        let (modifier, direction) = *shapes.choose(rng).unwrap();
        Phrase {
            verb,
            modifier,
            direction,
            repetition: *self.reps.choose(rng).unwrap(),
        }
    }

    fn in_window(&self, cmd: &Command) -> bool {
        let len = cmd.token_len();
        len > self.min_len && len <= self.max_len
    }
}

fn attempt_budget(target: usize) -> usize {
    MIN_ATTEMPTS.max(target.saturating_mul(ATTEMPTS_PER_EXAMPLE))
}

/// Core sampling loop shared by all generators. `accept` may veto a drawn command.
fn sample_examples<F>(sampler: &Sampler<'_>, spec: &GenSpec, accept: F) -> Result<Dataset, GenError>
where
    F: Fn(&Command) -> bool + Sync,
{
    if !sampler.feasible() {
        return Err(GenError::ExhaustedSpace {
            requested: spec.target_size,
            produced: 0,
            attempts: 0,
        });
    }
    let grammar = sampler.grammar;
    let budget = attempt_budget(spec.target_size);
    let mut seen: HashSet<String> = HashSet::new();
    let mut examples = Vec::with_capacity(spec.target_size);
    let mut attempts = 0usize;
    while examples.len() < spec.target_size && attempts < budget {
        let end = (attempts + BATCH).min(budget);
        let batch: Vec<Option<(Vec<String>, Vec<String>)>> = (attempts..end)
            .into_par_iter()
            .map(|slot| {
                let mut rng = seed::rng(seed::derive(spec.seed, slot as u64));
                let cmd = sampler.draw(&mut rng);
                if !sampler.in_window(&cmd) || !accept(&cmd) {
                    return None;
                }
                let input = grammar.serialize(&cmd).expect("sampled commands are valid");
                let output = grammar.interpret(&cmd).expect("sampled commands are valid");
                Some((input, output))
            })
            .collect();
        attempts = end;
        for (input, output) in batch.into_iter().flatten() {
            if examples.len() == spec.target_size {
                break;
            }
            if spec.dedupe && !seen.insert(input.join(" ")) {
                continue;
            }
            examples.push(Example::new(examples.len().to_string(), input, output));
        }
    }
    if examples.len() < spec.target_size {
        return Err(GenError::ExhaustedSpace {
            requested: spec.target_size,
            produced: examples.len(),
            attempts,
        });
    }
    Ok(Dataset::new(examples).expect("generated ids are unique"))
}

/// Sample a dataset of `spec.target_size` commands over all grammar primitives.
pub fn generate_dataset(grammar: &Grammar, spec: &GenSpec) -> Result<Dataset, GenError> {
    let pool: Vec<usize> = (0..grammar.primitive_count()).collect();
    let sampler = Sampler::new(grammar, spec, pool, None)?;
    sample_examples(&sampler, spec, |_| true)
}

/// Like [`generate_dataset`] but restricted to a subset of primitive indices.
pub fn generate_with_primitives(grammar: &Grammar, spec: &GenSpec, primitives: &[usize]) -> Result<Dataset, GenError> {
    if let Some(&bad) = primitives.iter().find(|&&i| i >= grammar.primitive_count()) {
        return Err(GenError::InvalidSpec(format!("primitive index {bad} out of range")));
    }
    let sampler = Sampler::new(grammar, spec, primitives.to_vec(), None)?;
    sample_examples(&sampler, spec, |_| true)
}

/// Split off `dev_count` uniformly chosen examples, preserving order on both sides.
pub fn carve_dev(dataset: Dataset, dev_count: usize, seed: u64) -> (Dataset, Dataset) {
    let n = dataset.len();
    let dev_count = dev_count.min(n);
    let mut rng = seed::rng(seed);
    let picked: HashSet<usize> = index::sample(&mut rng, n, dev_count).into_iter().collect();
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (i, ex) in dataset.into_examples().into_iter().enumerate() {
        if picked.contains(&i) {
            dev.push(ex);
        } else {
            train.push(ex);
        }
    }
    (
        Dataset::new(train).expect("subset of a valid dataset"),
        Dataset::new(dev).expect("subset of a valid dataset"),
    )
}

/// Length split: train/dev inputs in (0, L], test inputs in (L, 2L].
pub fn make_length_split(grammar: &Grammar, max_len: usize, sizes: SplitSizes, seed: u64) -> Result<SplitResult, GenError> {
    if max_len == 0 {
        return Err(GenError::ExhaustedSpace {
            requested: sizes.train + sizes.dev,
            produced: 0,
            attempts: 0,
        });
    }
    let train_spec = GenSpec::new(sizes.train + sizes.dev, 0, max_len, seed::derive(seed, 0));
    let train_side = generate_dataset(grammar, &train_spec)?;
    let test_spec = GenSpec::new(sizes.test, max_len, 2 * max_len, seed::derive(seed, 1));
    let test = generate_dataset(grammar, &test_spec)?;
    let (train, dev) = carve_dev(train_side, sizes.dev, seed::derive(seed, 2));
    Ok(SplitResult {
        train: train.renumbered("train-"),
        dev: dev.renumbered("dev-"),
        test: test.renumbered("test-"),
    })
}

/// Primitive holdout ("Jump"-style) split.
///
/// The train side (`spec.target_size` examples) never uses `held_out` except
/// for the bare single-verb command; [`DEFAULT_DEV_RATIO`] of the rest is
/// carved out as dev. Every test example uses `held_out` compositionally.
pub fn make_primitive_holdout_split(
    grammar: &Grammar,
    spec: &GenSpec,
    held_out: &str,
    test_size: usize,
) -> Result<SplitResult, GenError> {
    spec.validate(grammar)?;
    let held = grammar
        .primitive_index(held_out)
        .ok_or_else(|| GrammarError::UnknownPrimitive(held_out.to_string()))?;
    if test_size == 0 {
        return Err(GenError::InvalidSpec("test_size must be at least 1".into()));
    }
    let bare_cmd = Command::single(Phrase::bare(held));
    let bare = Example::new(
        "bare",
        grammar.serialize(&bare_cmd)?,
        grammar.interpret(&bare_cmd)?,
    );

    let others: Vec<usize> = (0..grammar.primitive_count()).filter(|&i| i != held).collect();
    let rest = spec.target_size - 1;
    let (train_rest, dev) = if rest == 0 {
        (Dataset::empty(), Dataset::empty())
    } else if others.is_empty() {
        return Err(GenError::ExhaustedSpace {
            requested: spec.target_size,
            produced: 1,
            attempts: 0,
        });
    } else {
        let mut train_spec = spec.clone();
        train_spec.target_size = rest;
        train_spec.seed = seed::derive(spec.seed, 0);
        if let Some(cap) = train_spec.max_unique_primitives_per_example {
            train_spec.max_unique_primitives_per_example = Some(cap.min(others.len()));
        }
        let sampler = Sampler::new(grammar, &train_spec, others, None)?;
        let side = sample_examples(&sampler, &train_spec, |_| true)?;
        let dev_count = (rest as f64 * DEFAULT_DEV_RATIO).round() as usize;
        carve_dev(side, dev_count, seed::derive(spec.seed, 2))
    };

    let mut test_spec = spec.clone();
    test_spec.target_size = test_size;
    test_spec.seed = seed::derive(spec.seed, 1);
    let pool: Vec<usize> = (0..grammar.primitive_count()).filter(|&i| i != held).collect();
    let sampler = Sampler::new(grammar, &test_spec, pool, Some(held))?;
    let test = sample_examples(&sampler, &test_spec, |cmd| *cmd != bare_cmd)?;

    let mut train = vec![bare];
    train.extend(train_rest.renumbered("train-").into_examples());
    Ok(SplitResult {
        train: Dataset::new(train).expect("unique ids"),
        dev: dev.renumbered("dev-"),
        test: test.renumbered("test-"),
    })
}

fn contains_run<S: AsRef<str>>(tokens: &[String], pattern: &[S]) -> bool {
    pattern.len() <= tokens.len()
        && tokens
            .windows(pattern.len())
            .any(|w| w.iter().zip(pattern).all(|(a, b)| a == b.as_ref()))
}

/// Pattern holdout ("Around Right"-style) split: every example whose input
/// contains `pattern` contiguously goes to test. The remainder is divided into
/// train and dev with `dev_ratio` of its distinct pairs, evenly strided, in dev.
pub fn make_pattern_holdout_split<S: AsRef<str>>(
    dataset: &Dataset,
    pattern: &[S],
    dev_ratio: f64,
) -> Result<SplitResult, GenError> {
    if pattern.is_empty() {
        return Err(GenError::InvalidSpec("pattern must not be empty".into()));
    }
    if !(0.0..1.0).contains(&dev_ratio) {
        return Err(GenError::InvalidSpec(format!("dev ratio {dev_ratio} must be in [0, 1)")));
    }
    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut pair_to_dev: HashMap<(&[String], &[String]), bool> = HashMap::new();
    for ex in dataset {
        if contains_run(&ex.input, pattern) {
            test.push(ex.clone());
            continue;
        }
        let next = pair_to_dev.len();
        let to_dev = *pair_to_dev
            .entry((ex.input.as_slice(), ex.output.as_slice()))
            .or_insert_with(|| ((next + 1) as f64 * dev_ratio).floor() > (next as f64 * dev_ratio).floor());
        if to_dev {
            dev.push(ex.clone());
        } else {
            train.push(ex.clone());
        }
    }
    if test.is_empty() {
        let shown: Vec<&str> = pattern.iter().map(AsRef::as_ref).collect();
        warn!("pattern {:?} matched no input; test partition is empty", shown.join(" "));
    }
    Ok(SplitResult {
        train: Dataset::new(train).expect("subset"),
        dev: Dataset::new(dev).expect("subset"),
        test: Dataset::new(test).expect("subset"),
    })
}

/// Half-length truncation: each input keeps, greedily left to right, the
/// phrases that fit within `floor(len / 2)` tokens. A kept phrase is joined
/// to the previous kept one by the conjunction that preceded it in the
/// original. Outputs are re-interpreted; examples with nothing kept are dropped.
pub fn truncate_half(dataset: &Dataset, grammar: &Grammar) -> Result<Dataset, GrammarError> {
    let mut out = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let cmd = grammar.parse(&ex.input)?;
        let budget = ex.input.len() / 2;
        let (phrases, joins) = cmd.to_parts();
        let mut kept: Vec<Phrase> = Vec::new();
        let mut kept_joins: Vec<Conjunction> = Vec::new();
        let mut used = 0usize;
        for (i, p) in phrases.iter().enumerate() {
            let cost = p.len() + (!kept.is_empty()) as usize;
            if used + cost > budget {
                continue;
            }
            if !kept.is_empty() {
                kept_joins.push(joins[i - 1]);
            }
            kept.push(*p);
            used += cost;
        }
        if kept.is_empty() {
            continue;
        }
        let short = Command::from_parts(&kept, &kept_joins);
        let mut truncated = ex.clone();
        truncated.input = grammar.serialize(&short)?;
        truncated.output = grammar.interpret(&short)?;
        out.push(truncated);
    }
    Ok(Dataset::new(out).expect("ids carried over from a valid dataset"))
}
