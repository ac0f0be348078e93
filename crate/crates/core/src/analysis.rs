//! Dataset diagnostics and embedding PCA.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::augment::Lexicon;
use crate::corpus::Dataset;
use crate::difficulty::EmbeddingTable;
use crate::generate::SplitResult;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("embedding matrix has no variance to project")]
    DegenerateMatrix,
    #[error("token {0:?} is not in the embedding matrix")]
    UnknownToken(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StatsReport {
    pub size: usize,
    pub distinct_pairs: usize,
    /// Occurrence count of an (input, output) pair -> number of distinct pairs with that count.
    pub recurrence_histogram: BTreeMap<usize, usize>,
    pub input_length_histogram: BTreeMap<usize, usize>,
    pub output_length_histogram: BTreeMap<usize, usize>,
    /// Examples containing each primitive (or a digit-suffixed mutation of it).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primitive_frequency: Option<BTreeMap<String, usize>>,
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
}

/// The lexicon source a token instantiates: itself, or its base after stripping a digit suffix.
fn primitive_base<'a>(lexicon: &Lexicon, token: &'a str) -> Option<&'a str> {
    if lexicon.contains_source(token) {
        return Some(token);
    }
    let base = token.trim_end_matches(|c: char| c.is_ascii_digit());
    (base.len() < token.len() && lexicon.contains_source(base)).then_some(base)
}

pub fn dataset_stats(dataset: &Dataset, lexicon: Option<&Lexicon>) -> StatsReport {
    let mut pairs: HashMap<(&[String], &[String]), usize> = HashMap::new();
    let mut report = StatsReport {
        size: dataset.len(),
        source_vocab_size: dataset.source_vocab().len(),
        target_vocab_size: dataset.target_vocab().len(),
        ..Default::default()
    };
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for ex in dataset {
        *pairs.entry((&ex.input, &ex.output)).or_default() += 1;
        *report.input_length_histogram.entry(ex.input.len()).or_default() += 1;
        *report.output_length_histogram.entry(ex.output.len()).or_default() += 1;
        if let Some(lex) = lexicon {
            let mut seen: Vec<&str> = ex.input.iter().map(String::as_str).filter(|t| primitive_base(lex, t).is_some()).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *freq.entry(t.to_string()).or_default() += 1;
            }
        }
    }
    report.distinct_pairs = pairs.len();
    for count in pairs.values() {
        *report.recurrence_histogram.entry(*count).or_default() += 1;
    }
    report.primitive_frequency = lexicon.map(|_| freq);
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapViolation {
    pub input: String,
    pub output: String,
    pub partitions: Vec<String>,
}

/// Every (input, output) pair present in more than one partition.
pub fn split_overlap_check(split: &SplitResult) -> Vec<OverlapViolation> {
    let mut seen: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        for ex in part {
            let parts = seen.entry((ex.input_text(), ex.output_text())).or_default();
            if parts.last().map(String::as_str) != Some(name) {
                parts.push(name.to_string());
            }
        }
    }
    seen.into_iter()
        .filter(|(_, parts)| parts.len() > 1)
        .map(|((input, output), partitions)| OverlapViolation {
            input,
            output,
            partitions,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub token: String,
    pub pc1: f64,
    pub pc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// The two leading unit-norm principal directions.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub projections: Vec<Projection>,
    /// Population standard deviation of the pc1 projections.
    pub pc1_dispersion: f64,
}

/// PCA over all rows of `matrix` (mean-centered, covariance normalized by
/// `n - 1`), projecting the requested tokens onto the first two components.
/// Each component's largest-magnitude entry is made positive.
pub fn pca_project<S: AsRef<str>>(matrix: &EmbeddingTable, tokens: &[S]) -> Result<Pca, AnalysisError> {
    let rows: Vec<usize> = tokens
        .iter()
        .map(|t| matrix.position(t.as_ref()).ok_or_else(|| AnalysisError::UnknownToken(t.as_ref().to_string())))
        .collect::<Result<_, _>>()?;
    let (n, d) = (matrix.len(), matrix.dim());
    if n < 2 || d < 2 {
        return Err(AnalysisError::DegenerateMatrix);
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        mean.iter_mut().zip(matrix.row(i)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| matrix.row(i)[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    if cov.trace() <= 0.0 {
        return Err(AnalysisError::DegenerateMatrix);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |k: usize| -> Vec<f64> {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let dot = |i: usize, c: &[f64]| centered.row(i).iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let projections: Vec<Projection> = tokens
        .iter()
        .zip(&rows)
        .map(|(t, &i)| Projection {
            token: t.as_ref().to_string(),
            pc1: dot(i, &components[0]),
            pc2: dot(i, &components[1]),
        })
        .collect();
    let pc1: Vec<f64> = projections.iter().map(|p| p.pc1).collect();
    Ok(Pca {
        mean,
        explained_variance: [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)],
        components,
        pc1_dispersion: dispersion(&pc1),
        projections,
    })
}

/// Population standard deviation; zero for fewer than one value.
pub fn dispersion(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub token: String,
    pub example_count: usize,
    pub total_occurrences: usize,
    /// Input-side occurrences per 1000 examples.
    pub rate_per_1000: f64,
}

pub fn frequency_report(dataset: &Dataset, token: &str) -> FrequencyReport {
    let mut example_count = 0;
    let mut total_occurrences = 0;
    for ex in dataset {
        let c = ex.input.iter().filter(|t| *t == token).count();
        example_count += (c > 0) as usize;
        total_occurrences += c;
    }
    let rate_per_1000 = if dataset.is_empty() {
        0.0
    } else {
        total_occurrences as f64 * 1000.0 / dataset.len() as f64
    };
    FrequencyReport {
        token: token.to_string(),
        example_count,
        total_occurrences,
        rate_per_1000,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;

    fn ds(pairs: &[(&str, &str)]) -> Dataset {
        Dataset::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, (x, y))| Example::from_text(i.to_string(), x, y))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn recurrence_histogram() {
        let d = ds(&[("walk", "W"), ("walk", "W"), ("run", "R"), ("look", "L")]);
        let s = dataset_stats(&d, None);
        assert_eq!(s.recurrence_histogram, BTreeMap::from([(1, 2), (2, 1)]));
        assert_eq!(s.distinct_pairs, 3);
        assert_eq!(s.recurrence_histogram.iter().map(|(k, v)| k * v).sum::<usize>(), d.len());
        assert!(s.primitive_frequency.is_none());
        assert_eq!(dataset_stats(&Dataset::empty(), None), StatsReport::default());
    }

    #[test]
    fn primitive_frequency_includes_mutations() {
        let d = ds(&[("walk twice", "W W"), ("walk3 and walk3", "W3 W3"), ("run", "R")]);
        let lex = Lexicon::new([("walk", "W"), ("run", "R")]).unwrap();
        let f = dataset_stats(&d, Some(&lex)).primitive_frequency.unwrap();
        assert_eq!(f, BTreeMap::from([("run".into(), 1), ("walk".into(), 1), ("walk3".into(), 1)]));
    }

    #[test]
    fn overlap_is_cross_partition_only() {
        let train = ds(&[("walk", "W"), ("walk", "W")]);
        let dev = Dataset::new(vec![Example::from_text("d", "run", "R")]).unwrap();
        let test = Dataset::new(vec![Example::from_text("t", "look", "L")]).unwrap();
        let mut split = SplitResult { train, dev, test };
        assert!(split_overlap_check(&split).is_empty());
        split.test = Dataset::new(vec![Example::from_text("t", "walk", "W")]).unwrap();
        let v = split_overlap_check(&split);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].partitions, ["train", "test"]);
    }

    #[test]
    fn pca_single_axis() {
        let t = EmbeddingTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let p = pca_project(&t, &["a", "b", "c"]).unwrap();
        assert_eq!(p.components[0], [1.0, 0.0]);
        let pc1: Vec<f64> = p.projections.iter().map(|x| x.pc1).collect();
        assert_eq!(pc1, [1.0, -1.0, 0.0]);
        assert!(matches!(pca_project(&t, &["zz"]), Err(AnalysisError::UnknownToken(_))));
        let flat = EmbeddingTable::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(pca_project(&flat, &["a"]), Err(AnalysisError::DegenerateMatrix)));
    }

    #[test]
    fn dispersion_matches_population_std() {
        // pc1 values of the four verbs after 20x augmentation.
        let values = [0.41, 0.49, 0.45, 0.75];
        assert!((dispersion(&values) - 0.13292).abs() < 1e-4);
        assert!((dispersion(&[-0.84, 0.02, 0.75, 0.20]) - 0.57105).abs() < 1e-4);
        assert_eq!(dispersion(&[]), 0.0);
    }

    #[test]
    fn frequency() {
        let d = ds(&[("walk", "W"), ("walk run", "W R")]);
        let f = frequency_report(&d, "walk");
        assert_eq!((f.example_count, f.total_occurrences, f.rate_per_1000), (2, 2, 1000.0));
        assert_eq!(frequency_report(&d, "jump").total_occurrences, 0);
        let one = ds(&[("walk and walk", "W W")]);
        let f = frequency_report(&one, "walk");
        assert_eq!((f.example_count, f.total_occurrences), (1, 2));
    }
}
