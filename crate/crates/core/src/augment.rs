//! Lexicon induction and the primitive-level augmentations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Dataset, Example, META_ORIGIN, ORIGIN_AUGMENTED, ORIGIN_ORIGINAL};
use crate::grammar::GrammarConfig;
use crate::seed;

/// Meta key recording which AugZero copy an example belongs to.
pub const META_COPY_INDEX: &str = "copy_index";
/// Meta key linking an augmented example back to its original.
pub const META_SOURCE_ID: &str = "source_id";

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target size {target} is smaller than the {originals} original examples")]
    TargetTooSmall { target: usize, originals: usize },
    #[error("target size {target} exceeds the dataset size {total}")]
    TargetTooLarge { target: usize, total: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("lexicon line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One-to-one map from source tokens to target tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn new<I, S, T>(pairs: I) -> Result<Self, AugmentError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut entries = BTreeMap::new();
        let mut targets = HashSet::new();
        for (s, t) in pairs {
            let (s, t) = (s.into(), t.into());
            if !targets.insert(t.clone()) {
                return Err(AugmentError::InvalidLexicon(format!("target {t:?} mapped twice")));
            }
            if entries.insert(s.clone(), t).is_some() {
                return Err(AugmentError::InvalidLexicon(format!("source {s:?} mapped twice")));
            }
        }
        Ok(Lexicon { entries })
    }

    /// The primitive pairs of a grammar.
    pub fn from_grammar(config: &GrammarConfig) -> Self {
        Lexicon::new(config.primitives.iter().cloned()).expect("grammar primitives are one-to-one")
    }

    pub fn get(&self, source: &str) -> Option<&str> {
        self.entries.get(source).map(String::as_str)
    }

    pub fn contains_source(&self, source: &str) -> bool {
        self.entries.contains_key(source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(s, t)| (s.as_str(), t.as_str()))
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Lexicon sources occurring in `tokens`, in first-occurrence order.
    pub fn present_in<'a>(&'a self, tokens: &'a [String]) -> Vec<&'a str> {
        let mut seen = Vec::new();
        for t in tokens {
            if let Some((s, _)) = self.entries.get_key_value(t) {
                if !seen.contains(&s.as_str()) {
                    seen.push(s.as_str());
                }
            }
        }
        seen
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, AugmentError> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty() || f.contains(char::is_whitespace)) {
                return Err(AugmentError::Format {
                    line: i + 1,
                    message: "expected source<TAB>target".into(),
                });
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        Lexicon::new(pairs)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for (s, t) in self.iter() {
            writeln!(writer, "{s}\t{t}")?;
        }
        writer.flush()
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let file = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(file))
    }
}

/// A group of tokens that all satisfy sufficiency and necessity with each
/// other, and therefore cannot be paired unambiguously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconInduction {
    pub lexicon: Lexicon,
    pub exclusions: Vec<Exclusion>,
}

impl LexiconInduction {
    pub fn write_exclusions_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for ex in &self.exclusions {
            serde_json::to_writer(&mut writer, ex)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }
}

/// Pair every source token `v` with a target token `w` such that, over the
/// whole dataset, `v` in the input holds exactly when `w` in the output holds.
///
/// Both conditions together mean the set of examples containing `v` equals
/// the set containing `w`, so tokens are grouped by that example set. A group
/// holding one source and one target yields a pair; a larger group is
/// ambiguous and reported as an exclusion.
pub fn induce_lexicon(dataset: &Dataset) -> LexiconInduction {
    fn occurrences<'a>(sides: impl Iterator<Item = &'a [String]>) -> HashMap<&'a str, Vec<u32>> {
        let mut map: HashMap<&str, Vec<u32>> = HashMap::new();
        for (i, tokens) in sides.enumerate() {
            for t in tokens {
                let rows = map.entry(t.as_str()).or_default();
                if rows.last() != Some(&(i as u32)) {
                    rows.push(i as u32);
                }
            }
        }
        map
    }
    let sources = occurrences(dataset.iter().map(|e| e.input.as_slice()));
    let targets = occurrences(dataset.iter().map(|e| e.output.as_slice()));

    let mut groups: HashMap<&[u32], (Vec<&str>, Vec<&str>)> = HashMap::new();
    for (tok, rows) in &sources {
        groups.entry(rows.as_slice()).or_default().0.push(tok);
    }
    for (tok, rows) in &targets {
        if let Some(group) = groups.get_mut(rows.as_slice()) {
            group.1.push(tok);
        }
    }

    let mut pairs = Vec::new();
    let mut exclusions = Vec::new();
    for (_, (mut src, mut tgt)) in groups {
        if tgt.is_empty() {
            continue;
        }
        if src.len() == 1 && tgt.len() == 1 {
            pairs.push((src[0].to_string(), tgt[0].to_string()));
        } else {
            src.sort_unstable();
            tgt.sort_unstable();
            exclusions.push(Exclusion {
                sources: src.iter().map(|s| s.to_string()).collect(),
                targets: tgt.iter().map(|s| s.to_string()).collect(),
                reason: "ambiguous".to_string(),
            });
        }
    }
    exclusions.sort_by(|a, b| a.sources.cmp(&b.sources));
    LexiconInduction {
        lexicon: Lexicon::new(pairs).expect("example sets are distinct per group"),
        exclusions,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationResult {
    pub dataset: Dataset,
    /// `(id, produced)` for originals that yielded fewer than `k - 1` new examples.
    pub underfilled: Vec<(String, usize)>,
}

/// Token form of a mutated primitive: the bare token for form 0, else a digit suffix.
pub fn mutated_form(token: &str, form: usize) -> String {
    if form == 0 {
        token.to_string()
    } else {
        format!("{token}{form}")
    }
}

/// Primitive mutation ("Kx" augmentation).
///
/// Each original is kept and followed by up to `k - 1` distinct new examples.
/// In a new example every lexicon primitive present takes one of `k` forms
/// (the original token or suffixes `1..k`), applied consistently to every
/// source occurrence and to every occurrence of its target. Assignments are
/// drawn uniformly without replacement among those that change at least one
/// primitive; when that space cannot be enumerated, draws fall back to
/// rejection sampling capped at `2k` attempts.
pub fn mutate_primitives(dataset: &Dataset, lexicon: &Lexicon, k: usize, seed: u64) -> Result<MutationResult, AugmentError> {
    if k < 2 {
        return Err(AugmentError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if lexicon.is_empty() {
        return Err(AugmentError::InvalidArgument("lexicon is empty".into()));
    }
    let wanted = k - 1;
    let per_example: Vec<(Vec<Example>, usize)> = dataset
        .examples()
        .par_iter()
        .map(|ex| {
            let present = lexicon.present_in(&ex.input);
            let mut original = ex.clone();
            original
                .meta
                .entry(META_ORIGIN.to_string())
                .or_insert_with(|| ORIGIN_ORIGINAL.to_string());
            if present.is_empty() {
                return (vec![original], 0);
            }
            let mut rng = seed::rng(seed::derive_str(seed, &ex.id));
            let assignments = draw_assignments(&mut rng, present.len(), k, wanted);
            let produced = assignments.len();
            let mut out = Vec::with_capacity(produced + 1);
            out.push(original);
            for (j, forms) in assignments.iter().enumerate() {
                out.push(apply_mutation(ex, lexicon, &present, forms, j + 1));
            }
            (out, produced)
        })
        .collect();

    let mut examples = Vec::with_capacity(dataset.len() * k);
    let mut underfilled = Vec::new();
    for (ex, (group, produced)) in dataset.iter().zip(per_example) {
        if produced < wanted {
            underfilled.push((ex.id.clone(), produced));
        }
        examples.extend(group);
    }
    Ok(MutationResult {
        dataset: Dataset::new(examples)?,
        underfilled,
    })
}

/// Up to `wanted` distinct non-identity assignments of forms `0..k` to `m` primitives.
fn draw_assignments(rng: &mut seed::Rng, m: usize, k: usize, wanted: usize) -> Vec<Vec<usize>> {
    let space = (k as u64).checked_pow(m as u32).and_then(|s| usize::try_from(s).ok());
    match space {
        Some(space) => {
            let amount = wanted.min(space - 1);
            index::sample(rng, space - 1, amount)
                .into_iter()
                .map(|j| {
                    let mut code = j + 1;
                    (0..m)
                        .map(|_| {
                            let digit = code % k;
                            code /= k;
                            digit
                        })
                        .collect()
                })
                .collect()
        }
        None => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for _ in 0..2 * k {
                if out.len() == wanted {
                    break;
                }
                let forms: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
                if forms.iter().all(|&f| f == 0) || !seen.insert(forms.clone()) {
                    continue;
                }
                out.push(forms);
            }
            out
        }
    }
}

fn apply_mutation(ex: &Example, lexicon: &Lexicon, present: &[&str], forms: &[usize], n: usize) -> Example {
    let source_form: HashMap<&str, usize> = present.iter().copied().zip(forms.iter().copied()).collect();
    let target_form: HashMap<&str, usize> = present
        .iter()
        .zip(forms)
        .map(|(s, &f)| (lexicon.get(s).expect("present sources are in the lexicon"), f))
        .collect();
    let rewrite = |tokens: &[String], table: &HashMap<&str, usize>| -> Vec<String> {
        tokens
            .iter()
            .map(|t| match table.get(t.as_str()) {
                Some(&f) => mutated_form(t, f),
                None => t.clone(),
            })
            .collect()
    };
    let mut meta = ex.meta.clone();
    meta.insert(META_ORIGIN.to_string(), ORIGIN_AUGMENTED.to_string());
    meta.insert(META_SOURCE_ID.to_string(), ex.id.clone());
    Example {
        id: format!("{}~m{n}", ex.id),
        input: rewrite(&ex.input, &source_form),
        output: rewrite(&ex.output, &target_form),
        meta,
    }
}

/// Token form used by AugZero copy `copy` (copies are numbered from 1; copy 1 is the original).
pub fn aug_zero_token(token: &str, copy: usize) -> String {
    if copy == 1 {
        token.to_string()
    } else {
        format!("{token}#{copy}")
    }
}

/// AugZero: append `k - 1` copies of the dataset, copy `i` rewriting every
/// source and target token `t` to `t#i`.
pub fn aug_zero(dataset: &Dataset, k: usize) -> Result<Dataset, AugmentError> {
    if k == 0 {
        return Err(AugmentError::InvalidArgument("k must be at least 1".into()));
    }
    let mut examples = Vec::with_capacity(dataset.len() * k);
    examples.extend(dataset.iter().cloned());
    for copy in 2..=k {
        for ex in dataset {
            let mut meta = ex.meta.clone();
            meta.insert(META_COPY_INDEX.to_string(), copy.to_string());
            examples.push(Example {
                id: aug_zero_token(&ex.id, copy),
                input: ex.input.iter().map(|t| aug_zero_token(t, copy)).collect(),
                output: ex.output.iter().map(|t| aug_zero_token(t, copy)).collect(),
                meta,
            });
        }
    }
    Ok(Dataset::new(examples)?)
}

/// Undo [`aug_zero`] for one example: strip the `#i` suffixes and the copy-index meta.
pub fn strip_aug_zero(ex: &Example) -> Example {
    let Some(copy) = ex.meta.get(META_COPY_INDEX) else {
        return ex.clone();
    };
    let suffix = format!("#{copy}");
    let strip = |t: &String| t.strip_suffix(&suffix).unwrap_or(t).to_string();
    let mut meta = ex.meta.clone();
    meta.remove(META_COPY_INDEX);
    Example {
        id: strip(&ex.id),
        input: ex.input.iter().map(strip).collect(),
        output: ex.output.iter().map(strip).collect(),
        meta,
    }
}

/// Keep every original and a uniform subsample of the augmented examples so
/// the result has `target_total` examples. Order is preserved.
pub fn downsample_augmented(dataset: &Dataset, target_total: usize, seed: u64) -> Result<Dataset, AugmentError> {
    let augmented: Vec<usize> = dataset
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_augmented())
        .map(|(i, _)| i)
        .collect();
    let originals = dataset.len() - augmented.len();
    if target_total < originals {
        return Err(AugmentError::TargetTooSmall {
            target: target_total,
            originals,
        });
    }
    if target_total > dataset.len() {
        return Err(AugmentError::TargetTooLarge {
            target: target_total,
            total: dataset.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let keep: HashSet<usize> = index::sample(&mut rng, augmented.len(), target_total - originals)
        .into_iter()
        .map(|j| augmented[j])
        .collect();
    let examples = dataset
        .iter()
        .enumerate()
        .filter(|(i, e)| !e.is_augmented() || keep.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    Ok(Dataset::new(examples)?)
}

#[cfg(test)]
mod tests {
    use super::*;

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

    /// Direct evaluation of the two quantified conditions for one token pair.
    fn suff_and_ness(d: &Dataset, v: &str, w: &str) -> bool {
        let suff = d.iter().all(|e| !e.input.iter().any(|t| t == v) || e.output.iter().any(|t| t == w));
        let ness = d.iter().all(|e| !e.output.iter().any(|t| t == w) || e.input.iter().any(|t| t == v));
        suff && ness
    }

    #[test]
    fn induces_primitives_and_skips_function_words() {
        let d = ds(&[("walk", "I_WALK"), ("walk twice", "I_WALK I_WALK"), ("jump", "I_JUMP")]);
        let lex = induce_lexicon(&d).lexicon;
        assert_eq!(lex, Lexicon::new([("walk", "I_WALK"), ("jump", "I_JUMP")]).unwrap());
        assert!(!suff_and_ness(&d, "twice", "I_WALK"));
    }

    #[test]
    fn single_example_pairs() {
        let d = ds(&[("walk", "I_WALK")]);
        assert_eq!(induce_lexicon(&d).lexicon.get("walk"), Some("I_WALK"));

        let d = ds(&[("walk left", "I_TURN_LEFT I_WALK")]);
        let ind = induce_lexicon(&d);
        assert!(ind.lexicon.is_empty());
        assert_eq!(ind.exclusions.len(), 1);
        assert_eq!(ind.exclusions[0].sources, ["left", "walk"]);
        for (v, w) in [("walk", "I_WALK"), ("left", "I_WALK"), ("walk", "I_TURN_LEFT")] {
            assert!(suff_and_ness(&d, v, w));
        }
    }

    #[test]
    fn no_qualifying_pair_gives_empty_lexicon() {
        let d = ds(&[("a", "X"), ("b", "X")]);
        assert!(induce_lexicon(&d).lexicon.is_empty());
    }

    #[test]
    fn lexicon_must_be_one_to_one() {
        assert!(Lexicon::new([("a", "X"), ("b", "X")]).is_err());
        assert!(Lexicon::new([("a", "X"), ("a", "Y")]).is_err());
        let lex = Lexicon::read_tsv("walk\tI_WALK\njump\tI_JUMP\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        lex.write_tsv(&mut buf).unwrap();
        assert_eq!(buf, b"jump\tI_JUMP\nwalk\tI_WALK\n");
        assert!(Lexicon::read_tsv("walk I_WALK\n".as_bytes()).is_err());
    }

    #[test]
    fn mutation_k2_single_primitive() {
        let d = ds(&[("walk twice", "I_WALK I_WALK")]);
        let lex = Lexicon::new([("walk", "I_WALK")]).unwrap();
        let r = mutate_primitives(&d, &lex, 2, 0).unwrap();
        assert_eq!(r.dataset.len(), 2);
        let aug = &r.dataset.examples()[1];
        assert_eq!(aug.input_text(), "walk1 twice");
        assert_eq!(aug.output_text(), "I_WALK1 I_WALK1");
        assert!(aug.is_augmented());
        assert_eq!(aug.meta[META_SOURCE_ID], "0");
        assert!(r.underfilled.is_empty());
    }

    #[test]
    fn mutation_fills_exactly_and_skips_lexicon_free_examples() {
        let d = ds(&[("walk left", "I_TURN_LEFT I_WALK"), ("and", "X"), ("walk after jump", "I_JUMP I_WALK")]);
        let lex = Lexicon::new([("walk", "I_WALK"), ("jump", "I_JUMP")]).unwrap();
        let r = mutate_primitives(&d, &lex, 20, 5).unwrap();
        assert_eq!(r.dataset.len(), 20 + 1 + 20);
        assert_eq!(r.underfilled, vec![("1".to_string(), 0)]);
        let inputs: HashSet<String> = r.dataset.iter().map(Example::input_text).collect();
        assert_eq!(inputs.len(), r.dataset.len());
        assert_eq!(mutate_primitives(&d, &lex, 20, 5).unwrap(), r);
        assert!(mutate_primitives(&d, &lex, 1, 5).is_err());
        assert!(mutate_primitives(&d, &Lexicon::default(), 3, 5).is_err());
    }

    #[test]
    fn mutation_rejection_path_for_huge_spaces() {
        let mut rng = seed::rng(1);
        let forms = draw_assignments(&mut rng, 40, 200, 199);
        assert_eq!(forms.len(), 199);
        assert!(forms.iter().all(|f| f.len() == 40 && f.iter().any(|&x| x != 0)));
    }

    #[test]
    fn aug_zero_copies() {
        let d = ds(&[("walk left", "LTURN I_WALK")]);
        let z = aug_zero(&d, 2).unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z.examples()[1].input_text(), "walk#2 left#2");
        assert_eq!(z.examples()[1].output_text(), "LTURN#2 I_WALK#2");
        assert_eq!(z.examples()[1].meta[META_COPY_INDEX], "2");
        assert_eq!(strip_aug_zero(&z.examples()[1]), d.examples()[0]);
        assert_eq!(aug_zero(&d, 1).unwrap(), d);
        assert!(aug_zero(&d, 0).is_err());
    }

    #[test]
    fn downsampling() {
        let d = ds(&[("walk", "I_WALK"), ("run", "I_RUN")]);
        let lex = Lexicon::new([("walk", "I_WALK"), ("run", "I_RUN")]).unwrap();
        let x20 = mutate_primitives(&d, &lex, 20, 1).unwrap().dataset;
        assert_eq!(x20.len(), 40);
        let x2 = downsample_augmented(&x20, 4, 9).unwrap();
        assert_eq!(x2.len(), 4);
        assert_eq!(x2.iter().filter(|e| !e.is_augmented()).count(), 2);
        assert_eq!(downsample_augmented(&x20, 40, 9).unwrap(), x20);
        assert!(matches!(downsample_augmented(&x20, 1, 9), Err(AugmentError::TargetTooSmall { .. })));
        assert!(matches!(downsample_augmented(&x20, 41, 9), Err(AugmentError::TargetTooLarge { .. })));
    }
}
