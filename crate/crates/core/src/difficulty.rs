//! Example difficulty: complexity, prototype (k-means) and learning-based scores,
//! plus quantile subsets and mixtures built from them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::Lexicon;
use crate::corpus::{CorpusError, Dataset};
use crate::seed;

pub const DEFAULT_CLUSTERS: usize = 100;
pub const DEFAULT_INITS: usize = 10;
pub const DEFAULT_WINDOW: usize = 10;
const MAX_ITERATIONS: usize = 300;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DifficultyError {
    #[error("unique_primitives scoring needs a lexicon")]
    MissingLexicon,
    #[error("only {distinct} distinct points for k = {k} clusters")]
    DegenerateInput { distinct: usize, k: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent correctness logs: {0}")]
    InconsistentLogs(String),
    #[error("requested {requested} examples but only {available} are available")]
    InsufficientExamples { requested: usize, available: usize },
    #[error("no score for example {0:?}")]
    MissingScore(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A difficulty value per example id.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyScores {
    pub metric_name: String,
    pub scores: BTreeMap<String, f64>,
}

impl DifficultyScores {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `id<TAB>score` rows in id order. Scores use the shortest round-trip form.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (id, s) in &self.scores {
            writeln!(writer, "{id}\t{s}")?;
        }
        writer.flush()
    }

    pub fn read_tsv<R: BufRead>(reader: R, metric_name: &str) -> Result<Self, DifficultyError> {
        let mut scores = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: &str| DifficultyError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let (id, value) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>score"))?;
            let value: f64 = value.trim().parse().map_err(|_| bad("score is not a number"))?;
            if !value.is_finite() || value < 0.0 {
                return Err(bad("score must be finite and non-negative"));
            }
            if scores.insert(id.to_string(), value).is_some() {
                return Err(bad("duplicate id"));
            }
        }
        Ok(DifficultyScores {
            metric_name: metric_name.to_string(),
            scores,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DifficultyError> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scores");
        Self::read_tsv(std::io::BufReader::new(std::fs::File::open(path)?), name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityKind {
    InputLength,
    UniquePrimitives,
}

impl fmt::Display for ComplexityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplexityKind::InputLength => "input_length",
            ComplexityKind::UniquePrimitives => "unique_primitives",
        })
    }
}

impl FromStr for ComplexityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input_length" | "input-length" | "length" => Ok(ComplexityKind::InputLength),
            "unique_primitives" | "unique-primitives" | "primitives" => Ok(ComplexityKind::UniquePrimitives),
            other => Err(format!("unknown complexity kind {other:?}")),
        }
    }
}

pub fn score_complexity(
    dataset: &Dataset,
    kind: ComplexityKind,
    lexicon: Option<&Lexicon>,
) -> Result<DifficultyScores, DifficultyError> {
    let scores = match kind {
        ComplexityKind::InputLength => dataset.iter().map(|e| (e.id.clone(), e.input.len() as f64)).collect(),
        ComplexityKind::UniquePrimitives => {
            let lexicon = lexicon.ok_or(DifficultyError::MissingLexicon)?;
            dataset
                .iter()
                .map(|e| (e.id.clone(), lexicon.present_in(&e.input).len() as f64))
                .collect()
        }
    };
    Ok(DifficultyScores {
        metric_name: kind.to_string(),
        scores,
    })
}

/// Fixed-dimension real vectors keyed by example id (or by token).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, DifficultyError> {
        if ids.len() != vectors.len() {
            return Err(DifficultyError::InvalidArgument("one vector per id required".into()));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut seen = HashSet::new();
        let mut data = Vec::with_capacity(ids.len() * dim);
        for (id, v) in ids.iter().zip(&vectors) {
            if v.len() != dim {
                return Err(DifficultyError::InvalidArgument(format!(
                    "vector for {id:?} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DifficultyError::InvalidArgument(format!("vector for {id:?} is not finite")));
            }
            if !seen.insert(id.as_str()) {
                return Err(DifficultyError::InvalidArgument(format!("duplicate id {id:?}")));
            }
            data.extend_from_slice(v);
        }
        Ok(EmbeddingTable { ids, dim, data })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }

    /// Rows as `id<TAB>x1<TAB>...<TAB>xd`. Any whitespace is accepted as a separator on read.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, DifficultyError> {
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(id) = fields.next() else { continue };
            let v: Result<Vec<f64>, _> = fields.map(str::parse).collect();
            let v = v.map_err(|_| DifficultyError::Format {
                line: i + 1,
                message: "embedding entries must be numbers".into(),
            })?;
            if let Some(first) = vectors.first().map(Vec::len) {
                if v.len() != first {
                    return Err(DifficultyError::Format {
                        line: i + 1,
                        message: format!("dimension {} differs from {first}", v.len()),
                    });
                }
            }
            ids.push(id.to_string());
            vectors.push(v);
        }
        Self::new(ids, vectors)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (i, id) in self.ids.iter().enumerate() {
            write!(writer, "{id}")?;
            for x in self.row(i) {
                write!(writer, "\t{x}")?;
            }
            writeln!(writer)?;
        }
        writer.flush()
    }

    pub fn load(path: &Path) -> Result<Self, DifficultyError> {
        Self::read_tsv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Fallback embedding: L2-normalized token-count vectors of each input over the
/// sorted source vocabulary. A stand-in for a pretrained sentence encoder.
pub fn bag_of_tokens_embedding(dataset: &Dataset) -> EmbeddingTable {
    let vocab: HashMap<&str, usize> = dataset.source_vocab().into_iter().enumerate().map(|(i, t)| (t, i)).collect();
    let dim = vocab.len();
    let mut ids = Vec::with_capacity(dataset.len());
    let mut data = Vec::with_capacity(dataset.len() * dim);
    for ex in dataset {
        let mut v = vec![0.0; dim];
        for t in &ex.input {
            v[vocab[t.as_str()]] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        ids.push(ex.id.clone());
        data.extend(v);
    }
    EmbeddingTable { ids, dim, data }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Outcome of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Rows of a table as a dense point set.
struct Points<'a> {
    table: &'a EmbeddingTable,
    order: Vec<usize>,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.order.len()
    }

    fn at(&self, i: usize) -> &[f64] {
        self.table.row(self.order[i])
    }

    fn nearest(&self, i: usize, centroids: &[Vec<f64>]) -> (usize, f64) {
        let p = self.at(i);
        let mut best = (0, f64::INFINITY);
        for (c, center) in centroids.iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    fn seed_centroids(&self, k: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut centroids = vec![self.at(rng.random_range(0..n)).to_vec()];
        let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(self.at(i), &centroids[0])).collect();
        while centroids.len() < k {
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if w > 0.0 && r < w {
                        pick = i;
                        break;
                    }
                    r -= w;
                }
                while d2[pick] == 0.0 {
                    pick -= 1;
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let c = self.at(pick).to_vec();
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(sq_dist(self.at(i), &c));
            }
            centroids.push(c);
        }
        centroids
    }

    /// Cluster means; an empty cluster takes over the point farthest from its centroid.
    fn update(&self, k: usize, assignment: &mut [usize]) -> Vec<Vec<f64>> {
        let dim = self.table.dim();
        loop {
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (i, &c) in assignment.iter().enumerate() {
                counts[c] += 1;
                sums[c].iter_mut().zip(self.at(i)).for_each(|(s, x)| *s += x);
            }
            for (s, &n) in sums.iter_mut().zip(&counts) {
                if n > 0 {
                    s.iter_mut().for_each(|x| *x /= n as f64);
                }
            }
            let Some(empty) = counts.iter().position(|&n| n == 0) else {
                return sums;
            };
            let far = (0..self.len())
                .filter(|&i| counts[assignment[i]] > 1)
                .map(|i| (i, sq_dist(self.at(i), &sums[assignment[i]])))
                .fold((usize::MAX, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            assignment[far.0] = empty;
        }
    }

    fn lloyd(&self, k: usize, seed: u64) -> Clustering {
        let mut rng = seed::rng(seed);
        let mut centroids = self.seed_centroids(k, &mut rng);
        let mut assignment: Vec<usize> = (0..self.len()).map(|i| self.nearest(i, &centroids).0).collect();
        let mut previous = f64::INFINITY;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            centroids = self.update(k, &mut assignment);
            let mut inertia = 0.0;
            let mut changed = false;
            for (i, a) in assignment.iter_mut().enumerate() {
                let (c, d) = self.nearest(i, &centroids);
                changed |= c != *a;
                *a = c;
                inertia += d;
            }
            let converged = !changed || (previous - inertia).abs() <= TOLERANCE * previous.max(f64::MIN_POSITIVE);
            previous = inertia;
            if converged {
                break;
            }
        }
        centroids = self.update(k, &mut assignment);
        let inertia = assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| sq_dist(self.at(i), &centroids[c]))
            .sum();
        Clustering {
            centroids,
            assignment,
            inertia,
            iterations,
        }
    }
}

/// Run k-means `n_init` times and keep the lowest-inertia run (ties: lowest init index).
///
/// Points are processed in id order, so the result does not depend on the
/// order of rows in `embeddings`. The returned assignment is indexed like
/// `embeddings`.
pub fn kmeans(embeddings: &EmbeddingTable, k: usize, n_init: usize, seed: u64) -> Result<Clustering, DifficultyError> {
    if k == 0 || n_init == 0 {
        return Err(DifficultyError::InvalidArgument("k and n_init must be positive".into()));
    }
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.sort_by(|&a, &b| embeddings.ids[a].cmp(&embeddings.ids[b]));
    let distinct: BTreeSet<Vec<u64>> = (0..embeddings.len())
        .map(|i| embeddings.row(i).iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(DifficultyError::DegenerateInput {
            distinct: distinct.len(),
            k,
        });
    }
    let points = Points {
        table: embeddings,
        order,
    };
    let runs: Vec<Clustering> = (0..n_init)
        .into_par_iter()
        .map(|init| points.lloyd(k, seed::derive(seed, init as u64)))
        .collect();
    let mut best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("n_init >= 1");
    let mut assignment = vec![0; embeddings.len()];
    for (sorted, &row) in points.order.iter().enumerate() {
        assignment[row] = best.assignment[sorted];
    }
    best.assignment = assignment;
    Ok(best)
}

/// Prototype difficulty: L2 distance from each point to its k-means centroid.
pub fn score_prototype(
    embeddings: &EmbeddingTable,
    k: usize,
    n_init: usize,
    seed: u64,
) -> Result<DifficultyScores, DifficultyError> {
    let clustering = kmeans(embeddings, k, n_init, seed)?;
    let scores = embeddings
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let c = &clustering.centroids[clustering.assignment[i]];
            (id.clone(), sq_dist(embeddings.row(i), c).sqrt())
        })
        .collect();
    Ok(DifficultyScores {
        metric_name: "prototype".to_string(),
        scores,
    })
}

/// Training-set correctness of one run, recorded at every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrectnessLog {
    pub checkpoint_step_interval: u64,
    pub records: BTreeMap<u64, BTreeSet<String>>,
    pub total_steps: u64,
    pub seed_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogHeader {
    seed_id: String,
    checkpoint_step_interval: u64,
    total_steps: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRecord {
    step: u64,
    correct_ids: Vec<String>,
}

impl CorrectnessLog {
    pub fn validate(&self) -> Result<(), DifficultyError> {
        let bad = |m: String| Err(DifficultyError::InconsistentLogs(format!("{}: {m}", self.seed_id)));
        if self.checkpoint_step_interval == 0 {
            return bad("checkpoint interval must be positive".into());
        }
        for &step in self.records.keys() {
            if step % self.checkpoint_step_interval != 0 || step > self.total_steps {
                return bad(format!("step {step} is not a checkpoint"));
            }
        }
        Ok(())
    }

    /// JSONL: an optional header line `{"seed_id","checkpoint_step_interval","total_steps"}`
    /// followed by `{"step","correct_ids"}` records. Without a header, `defaults`
    /// supplies the interval and total step count.
    pub fn read_jsonl<R: BufRead>(reader: R, defaults: Option<(u64, u64)>, seed_id: &str) -> Result<Self, DifficultyError> {
        let mut log = CorrectnessLog {
            seed_id: seed_id.to_string(),
            ..Default::default()
        };
        let mut header = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| DifficultyError::Format {
                line: i + 1,
                message: e.to_string(),
            };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(bad)?;
            if value.get("step").is_some() {
                let rec: LogRecord = serde_json::from_value(value).map_err(bad)?;
                log.records.entry(rec.step).or_default().extend(rec.correct_ids);
            } else {
                let h: LogHeader = serde_json::from_value(value).map_err(bad)?;
                log.seed_id = h.seed_id;
                log.checkpoint_step_interval = h.checkpoint_step_interval;
                log.total_steps = h.total_steps;
                header = true;
            }
        }
        if !header {
            let (interval, total) = defaults.ok_or_else(|| {
                DifficultyError::InconsistentLogs(format!("{seed_id}: no header and no interval/total steps given"))
            })?;
            log.checkpoint_step_interval = interval;
            log.total_steps = total;
        }
        log.validate()?;
        Ok(log)
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        let header = LogHeader {
            seed_id: self.seed_id.clone(),
            checkpoint_step_interval: self.checkpoint_step_interval,
            total_steps: self.total_steps,
        };
        serde_json::to_writer(&mut writer, &header)?;
        writer.write_all(b"\n")?;
        for (&step, ids) in &self.records {
            let rec = LogRecord {
                step,
                correct_ids: ids.iter().cloned().collect(),
            };
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }

    pub fn load(path: &Path, defaults: Option<(u64, u64)>) -> Result<Self, DifficultyError> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?), defaults, name)
    }
}

/// Learning-based difficulty: the earliest checkpoint `s` from which an example
/// is correct at `window` consecutive checkpoints `s, s+d, ..., s+(window-1)d`,
/// averaged over runs. Missing checkpoints count as incorrect; an example that
/// never qualifies scores `total_steps`.
pub fn score_learning(dataset: &Dataset, logs: &[CorrectnessLog], window: usize) -> Result<DifficultyScores, DifficultyError> {
    let Some(first) = logs.first() else {
        return Err(DifficultyError::InconsistentLogs("no logs given".into()));
    };
    if window == 0 {
        return Err(DifficultyError::InvalidArgument("window must be positive".into()));
    }
    let (interval, total) = (first.checkpoint_step_interval, first.total_steps);
    let index: HashMap<&str, usize> = dataset.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let mut sums = vec![0.0; dataset.len()];
    for log in logs {
        log.validate()?;
        if log.checkpoint_step_interval != interval || log.total_steps != total {
            return Err(DifficultyError::InconsistentLogs(format!(
                "{} uses interval {} over {} steps, expected {interval} over {total}",
                log.seed_id, log.checkpoint_step_interval, log.total_steps
            )));
        }
        let mut run = vec![0usize; dataset.len()];
        let mut found: Vec<Option<u64>> = vec![None; dataset.len()];
        let empty = BTreeSet::new();
        for checkpoint in 0..=total / interval {
            let step = checkpoint * interval;
            let correct = log.records.get(&step).unwrap_or(&empty);
            let mut hit = vec![false; dataset.len()];
            for id in correct {
                let &i = index.get(id.as_str()).ok_or_else(|| {
                    DifficultyError::InconsistentLogs(format!("{}: unknown example id {id:?}", log.seed_id))
                })?;
                hit[i] = true;
            }
            for i in 0..dataset.len() {
                run[i] = if hit[i] { run[i] + 1 } else { 0 };
                if found[i].is_none() && run[i] == window {
                    found[i] = Some(step - (window as u64 - 1) * interval);
                }
            }
        }
        for (s, f) in sums.iter_mut().zip(found) {
            *s += f.unwrap_or(total) as f64;
        }
    }
    let scores = dataset
        .iter()
        .zip(sums)
        .map(|(e, s)| (e.id.clone(), s / logs.len() as f64))
        .collect();
    Ok(DifficultyScores {
        metric_name: "learning".to_string(),
        scores,
    })
}

/// Examples sorted by ascending score (ties by id), sliced at `[floor(lo*N), floor(hi*N))`.
pub fn select_quantile(dataset: &Dataset, scores: &DifficultyScores, lo: f64, hi: f64) -> Result<Dataset, DifficultyError> {
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return Err(DifficultyError::InvalidArgument(format!("need 0 <= lo < hi <= 1, got [{lo}, {hi})")));
    }
    let mut ranked = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let s = scores.get(&ex.id).ok_or_else(|| DifficultyError::MissingScore(ex.id.clone()))?;
        ranked.push((s, ex));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let n = ranked.len() as f64;
    let (start, end) = ((lo * n).floor() as usize, (hi * n).floor() as usize);
    Ok(Dataset::new(ranked[start..end].iter().map(|(_, e)| (*e).clone()).collect())?)
}

/// Uniform sample of `round(ratio*target_size)` examples from `a` and the rest
/// from `b`, each side kept in its original order, `a` first.
pub fn mix_subsets(a: &Dataset, b: &Dataset, ratio: f64, target_size: usize, seed: u64) -> Result<Dataset, DifficultyError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(DifficultyError::InvalidArgument(format!("ratio {ratio} outside [0, 1]")));
    }
    let from_a = (ratio * target_size as f64).round() as usize;
    let from_b = target_size - from_a;
    for (want, have) in [(from_a, a.len()), (from_b, b.len())] {
        if want > have {
            return Err(DifficultyError::InsufficientExamples {
                requested: want,
                available: have,
            });
        }
    }
    let mut rng = seed::rng(seed);
    let mut pick = |d: &Dataset, amount: usize| {
        let mut idx = index::sample(&mut rng, d.len(), amount).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| d.examples()[i].clone()).collect::<Vec<_>>()
    };
    let mut examples = pick(a, from_a);
    examples.extend(pick(b, from_b));
    Ok(Dataset::new(examples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;

    fn ds(inputs: &[&str]) -> Dataset {
        Dataset::new(
            inputs
                .iter()
                .enumerate()
                .map(|(i, x)| Example::from_text(format!("e{i}"), x, "X"))
                .collect(),
        )
        .unwrap()
    }

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::new(rows.iter().map(|r| r.0.to_string()).collect(), rows.iter().map(|r| r.1.to_vec()).collect())
            .unwrap()
    }

    #[test]
    fn complexity_scores() {
        let d = ds(&["walk and run", "walk and walk twice"]);
        let s = score_complexity(&d, ComplexityKind::InputLength, None).unwrap();
        assert_eq!(s.get("e0"), Some(3.0));
        let lex = Lexicon::new([("walk", "I_WALK")]).unwrap();
        let s = score_complexity(&d, ComplexityKind::UniquePrimitives, Some(&lex)).unwrap();
        assert_eq!(s.get("e1"), Some(1.0));
        let s = score_complexity(&d, ComplexityKind::UniquePrimitives, Some(&Lexicon::default())).unwrap();
        assert!(s.scores.values().all(|&v| v == 0.0));
        assert!(matches!(
            score_complexity(&d, ComplexityKind::UniquePrimitives, None),
            Err(DifficultyError::MissingLexicon)
        ));
    }

    #[test]
    fn prototype_two_blobs() {
        let t = table(&[
            ("a", &[0.0, 0.0]),
            ("b", &[0.2, 0.0]),
            ("c", &[0.1, 0.0]),
            ("d", &[10.0, 10.0]),
            ("e", &[11.0, 10.0]),
        ]);
        let s = score_prototype(&t, 2, 5, 3).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(s.get("a").unwrap(), 0.1));
        assert!(close(s.get("c").unwrap(), 0.0));
        assert!(close(s.get("e").unwrap(), 0.5));
    }

    #[test]
    fn prototype_degenerate_input() {
        let t = table(&[("a", &[1.0]), ("b", &[1.0]), ("c", &[1.0])]);
        assert!(matches!(score_prototype(&t, 2, 1, 0), Err(DifficultyError::DegenerateInput { distinct: 1, k: 2 })));
        assert_eq!(score_prototype(&t, 1, 1, 0).unwrap().get("b"), Some(0.0));
    }

    #[test]
    fn selected_run_has_lowest_inertia() {
        let d = ds(&["a b", "a c", "b c d", "d e", "e f a", "f", "a a b", "c c", "d f", "b e"]);
        let t = bag_of_tokens_embedding(&d);
        let best = kmeans(&t, 3, 6, 17).unwrap();
        let mut order: Vec<usize> = (0..t.len()).collect();
        order.sort_by(|&a, &b| t.ids()[a].cmp(&t.ids()[b]));
        let points = Points { table: &t, order };
        for init in 0..6 {
            assert!(best.inertia <= points.lloyd(3, seed::derive(17, init)).inertia);
        }
    }

    #[test]
    fn fallback_embedding_is_unit_norm() {
        let d = ds(&["walk walk run", "jump"]);
        let t = bag_of_tokens_embedding(&d);
        assert_eq!(t.dim(), 3);
        for i in 0..t.len() {
            assert!((t.row(i).iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.get("e1").unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn embedding_tsv_round_trip() {
        let t = table(&[("a", &[0.5, -1.0]), ("b", &[2.0, 3.25])]);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::read_tsv(buf.as_slice()).unwrap(), t);
        assert!(EmbeddingTable::read_tsv("a 1 2\nb 1\n".as_bytes()).is_err());
    }

    fn log(records: &[(u64, &[&str])], total: u64) -> CorrectnessLog {
        CorrectnessLog {
            checkpoint_step_interval: 500,
            records: records
                .iter()
                .map(|(s, ids)| (*s, ids.iter().map(|x| x.to_string()).collect()))
                .collect(),
            total_steps: total,
            seed_id: "s".into(),
        }
    }

    /// Direct scan of the definition, written separately from the scorer.
    fn first_window(correct_steps: &[u64], total: u64, window: u64) -> u64 {
        (0..=total)
            .step_by(500)
            .find(|&s| (0..window).all(|j| correct_steps.contains(&(s + j * 500))))
            .unwrap_or(total)
    }

    #[test]
    fn learning_scores() {
        let d = ds(&["a", "b"]);
        let steps: Vec<u64> = (3000..=50_000).step_by(500).collect();
        let records: Vec<(u64, &[&str])> = steps.iter().map(|&s| (s, &["e0"][..])).collect();
        let mut l = log(&records, 50_000);
        l.records.entry(1000).or_default().insert("e0".into());
        let s = score_learning(&d, &[l.clone()], 10).unwrap();
        assert_eq!(s.get("e0"), Some(3000.0));
        assert_eq!(s.get("e0"), Some(first_window(&steps, 50_000, 10) as f64));
        assert_eq!(s.get("e1"), Some(50_000.0));

        let early: Vec<(u64, &[&str])> = (1000..=50_000).step_by(500).map(|s| (s, &["e0"][..])).collect();
        let l2 = log(&early, 50_000);
        let s = score_learning(&d, &[l2, log(&[(2000, &["e1"]), (2500, &["e0"])], 50_000)], 1).unwrap();
        assert_eq!(s.get("e0"), Some((1000.0 + 2500.0) / 2.0));
        assert_eq!(s.get("e1"), Some((50_000.0 + 2000.0) / 2.0));
    }

    #[test]
    fn learning_rejects_inconsistent_logs() {
        let d = ds(&["a"]);
        assert!(score_learning(&d, &[], 10).is_err());
        let a = log(&[], 50_000);
        let b = log(&[], 40_000);
        assert!(matches!(score_learning(&d, &[a.clone(), b], 1), Err(DifficultyError::InconsistentLogs(_))));
        assert!(score_learning(&d, &[log(&[(750, &["e0"])], 50_000)], 1).is_err());
        assert!(score_learning(&d, &[log(&[(500, &["zz"])], 50_000)], 1).is_err());
    }

    #[test]
    fn correctness_log_jsonl() {
        let l = log(&[(500, &["b", "a"]), (1000, &[])], 2000);
        let mut buf = Vec::new();
        l.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains(r#"{"step":500,"correct_ids":["a","b"]}"#));
        assert_eq!(CorrectnessLog::read_jsonl(buf.as_slice(), None, "x").unwrap(), l);
        let bare = "{\"step\":500,\"correct_ids\":[\"a\"]}\n";
        assert!(CorrectnessLog::read_jsonl(bare.as_bytes(), None, "x").is_err());
        let l = CorrectnessLog::read_jsonl(bare.as_bytes(), Some((500, 1000)), "x").unwrap();
        assert_eq!(l.total_steps, 1000);
    }

    #[test]
    fn quantiles() {
        let d = ds(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let scores = DifficultyScores {
            metric_name: "m".into(),
            scores: (0..8).map(|i| (format!("e{i}"), (8 - i) as f64)).collect(),
        };
        let q = select_quantile(&d, &scores, 0.0, 0.25).unwrap();
        assert_eq!(q.ids().collect::<Vec<_>>(), ["e7", "e6"]);
        assert_eq!(select_quantile(&d, &scores, 0.0, 1.0).unwrap().len(), 8);
        assert!(select_quantile(&d, &scores, 0.5, 0.5).is_err());
    }

    #[test]
    fn mixing() {
        let a = ds(&["a", "b", "c", "d"]);
        let b = Dataset::new((0..4).map(|i| Example::from_text(format!("f{i}"), "x", "X")).collect()).unwrap();
        let m = mix_subsets(&a, &b, 0.5, 4, 1).unwrap();
        assert_eq!(m.iter().filter(|e| e.id.starts_with('e')).count(), 2);
        assert_eq!(m, mix_subsets(&a, &b, 0.5, 4, 1).unwrap());
        assert!(mix_subsets(&a, &b, 1.0, 4, 1).unwrap().iter().all(|e| e.id.starts_with('e')));
        assert!(matches!(mix_subsets(&a, &b, 0.5, 10, 1), Err(DifficultyError::InsufficientExamples { .. })));
    }

    #[test]
    fn scores_tsv_round_trip() {
        let s = DifficultyScores {
            metric_name: "m".into(),
            scores: [("a".to_string(), 0.1), ("b".to_string(), 3.0)].into(),
        };
        let mut buf = Vec::new();
        s.write_tsv(&mut buf).unwrap();
        assert_eq!(buf, b"a\t0.1\nb\t3\n");
        assert_eq!(DifficultyScores::read_tsv(buf.as_slice(), "m").unwrap(), s);
    }
}
