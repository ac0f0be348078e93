use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;

use datakit::augment::{aug_zero, induce_lexicon, mutate_primitives, strip_aug_zero, Lexicon};
use datakit::corpus::{read_dataset, to_jsonl_bytes, Dataset, Example, Format};
use datakit::curriculum::{build_repetition_schedule, CurriculumParams, ScheduleKind};
use datakit::difficulty::{mix_subsets, score_learning, score_prototype, select_quantile, CorrectnessLog, DifficultyScores, EmbeddingTable};
use datakit::generate::{generate_dataset, GenSpec};
use datakit::{Grammar, GrammarConfig};

fn small_grammar() -> Grammar {
    Grammar::new(GrammarConfig::scan_star_with(6)).unwrap()
}

/// Datasets over a tiny vocabulary so that tokens collide often.
fn toy_dataset() -> impl Strategy<Value = Dataset> {
    let side = |prefix: &'static str| prop::collection::vec(0..5u8, 1..5).prop_map(move |v| v.iter().map(|i| format!("{prefix}{i}")).collect::<Vec<_>>());
    prop::collection::vec((side("s"), side("T")), 1..12).prop_map(|rows| {
        Dataset::new(
            rows.into_iter()
                .enumerate()
                .map(|(i, (x, y))| Example::new(i.to_string(), x, y))
                .collect(),
        )
        .unwrap()
    })
}

fn scores_for(d: &Dataset, values: &[u8]) -> DifficultyScores {
    DifficultyScores {
        metric_name: "p".into(),
        scores: d.ids().zip(values.iter().cycle()).map(|(id, &v)| (id.to_string(), v as f64)).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_commands_round_trip(seed in any::<u64>(), max_len in 2usize..40) {
        let g = small_grammar();
        let d = generate_dataset(&g, &GenSpec::new(20, 0, max_len, seed)).unwrap();
        for ex in &d {
            let cmd = g.parse(&ex.input).unwrap();
            prop_assert_eq!(g.serialize(&cmd).unwrap(), ex.input.clone());
            prop_assert_eq!(g.interpret(&cmd).unwrap(), ex.output.clone());
            prop_assert!(ex.input.len() <= max_len);
        }
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        let g = small_grammar();
        let spec = GenSpec::new(30, 0, 20, seed);
        prop_assert_eq!(generate_dataset(&g, &spec).unwrap(), generate_dataset(&g, &spec).unwrap());
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical(d in toy_dataset()) {
        let bytes = to_jsonl_bytes(&d);
        let back = read_dataset(bytes.as_slice(), Format::Jsonl).unwrap();
        prop_assert_eq!(to_jsonl_bytes(&back), bytes);
        prop_assert_eq!(back, d);
    }

    #[test]
    fn induced_lexicon_matches_brute_force(d in toy_dataset()) {
        let holds = |v: &str, w: &str| d.iter().all(|e| {
            let hv = e.input.iter().any(|t| t == v);
            let hw = e.output.iter().any(|t| t == w);
            hv == hw
        });
        let mut brute: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for v in d.source_vocab() {
            for w in d.target_vocab() {
                if holds(v, w) {
                    brute.entry(v).or_default().push(w);
                }
            }
        }
        let ind = induce_lexicon(&d);
        for (v, ws) in &brute {
            let partners_of_w = |w: &str| d.source_vocab().into_iter().filter(|s| holds(s, w)).count();
            let unique = ws.len() == 1 && partners_of_w(ws[0]) == 1;
            prop_assert_eq!(ind.lexicon.get(v), unique.then_some(ws[0]));
        }
        for (v, w) in ind.lexicon.iter() {
            prop_assert!(holds(v, w));
        }
    }

    #[test]
    fn aug_zero_strips_back(d in toy_dataset(), k in 1usize..6) {
        let z = aug_zero(&d, k).unwrap();
        prop_assert_eq!(z.len(), k * d.len());
        for (i, ex) in z.iter().enumerate() {
            prop_assert_eq!(&strip_aug_zero(ex), &d.examples()[i % d.len()]);
        }
    }

    #[test]
    fn mutation_is_bounded_and_consistent(seed in any::<u64>(), k in 2usize..8) {
        let g = small_grammar();
        let d = generate_dataset(&g, &GenSpec::new(15, 0, 12, seed)).unwrap();
        let lex = Lexicon::from_grammar(g.config());
        let r = mutate_primitives(&d, &lex, k, seed).unwrap();
        prop_assert!(r.dataset.len() <= k * d.len());
        let inputs: HashSet<String> = r.dataset.iter().map(Example::input_text).collect();
        prop_assert_eq!(inputs.len(), r.dataset.len());
        let strip = |t: &String| t.trim_end_matches(|c: char| c.is_ascii_digit()).to_string();
        for ex in r.dataset.iter().filter(|e| e.is_augmented()) {
            let orig = d.get(&ex.meta["source_id"]).unwrap();
            prop_assert_eq!(ex.input.iter().map(strip).collect::<Vec<_>>(), orig.input.clone());
            prop_assert_eq!(ex.output.iter().map(strip).collect::<Vec<_>>(), orig.output.clone());
        }
    }

    #[test]
    fn quartiles_partition(d in toy_dataset(), values in prop::collection::vec(0u8..4, 1..12)) {
        let scores = scores_for(&d, &values);
        let mut seen = Vec::new();
        for (lo, hi) in [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)] {
            seen.extend(select_quantile(&d, &scores, lo, hi).unwrap().ids().map(str::to_string));
        }
        let all: BTreeSet<String> = d.ids().map(str::to_string).collect();
        prop_assert_eq!(seen.len(), d.len());
        prop_assert_eq!(seen.into_iter().collect::<BTreeSet<_>>(), all);
    }

    #[test]
    fn mix_takes_requested_shares(seed in any::<u64>(), ratio in 0.0f64..=1.0, size in 0usize..10) {
        let a = Dataset::new((0..10).map(|i| Example::from_text(format!("a{i}"), "x", "X")).collect()).unwrap();
        let b = Dataset::new((0..10).map(|i| Example::from_text(format!("b{i}"), "x", "X")).collect()).unwrap();
        let m = mix_subsets(&a, &b, ratio, size, seed).unwrap();
        let from_a = m.ids().filter(|id| id.starts_with('a')).count();
        prop_assert_eq!(m.len(), size);
        prop_assert_eq!(from_a, (ratio * size as f64).round() as usize);
    }

    #[test]
    fn schedules_grow_monotonically(n in 5usize..200, total in 1u64..20_000, seed in any::<u64>(), gran in 1u64..2000) {
        let d = Dataset::new((0..n).map(|i| Example::from_text(i.to_string(), "walk", "W")).collect()).unwrap();
        let params = CurriculumParams { granularity_steps: gran, ..CurriculumParams::new(total) };
        let s = build_repetition_schedule(&d, ScheduleKind::Example, None, &params, seed).unwrap();
        let mut prev = 0;
        let mut cover = 0;
        for p in s.phases() {
            prop_assert_eq!(p.start, cover);
            prop_assert!(p.active_len >= prev);
            prev = p.active_len;
            cover = p.end;
        }
        prop_assert_eq!(cover, total);
        prop_assert_eq!(s.active_set(total - 1).unwrap().len(), n);
        prop_assert_eq!(s.active_set(0).unwrap().len(), ((n as f64) * 0.2).round() as usize);
    }

    #[test]
    fn prototype_ignores_row_order(rows in prop::collection::vec(prop::collection::vec(-5i8..5, 3), 4..30), seed in any::<u64>(), rot in 0usize..30) {
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("p{i:02}")).collect();
        let vecs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
        let distinct: HashSet<&Vec<i8>> = rows.iter().collect();
        let k = distinct.len().min(3);
        let t = EmbeddingTable::new(ids.clone(), vecs.clone()).unwrap();
        let mut ids2 = ids.clone();
        let mut vecs2 = vecs.clone();
        ids2.rotate_left(rot % ids.len());
        vecs2.rotate_left(rot % ids.len());
        ids2.reverse();
        vecs2.reverse();
        let t2 = EmbeddingTable::new(ids2, vecs2).unwrap();
        prop_assert_eq!(score_prototype(&t, k, 3, seed).unwrap(), score_prototype(&t2, k, 3, seed).unwrap());
    }

    #[test]
    fn later_records_never_lower_qualified_scores(
        hits in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 20),
        extra in prop::collection::vec(any::<bool>(), 3),
    ) {
        let d = Dataset::new((0..3).map(|i| Example::from_text(format!("e{i}"), "x", "X")).collect()).unwrap();
        let mut log = CorrectnessLog {
            checkpoint_step_interval: 100,
            records: BTreeMap::new(),
            total_steps: 2500,
            seed_id: "s".into(),
        };
        for (c, row) in hits.iter().enumerate() {
            let ids = row.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| format!("e{i}")).collect();
            log.records.insert(c as u64 * 100, ids);
        }
        let before = score_learning(&d, &[log.clone()], 3).unwrap();
        // Checkpoints after the last recorded step gain records.
        for step in [2000u64, 2100, 2200] {
            let ids = extra.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| format!("e{i}"));
            log.records.entry(step).or_default().extend(ids);
        }
        let after = score_learning(&d, &[log], 3).unwrap();
        for id in d.ids() {
            let b = before.get(id).unwrap();
            if b < 2500.0 {
                prop_assert!(after.get(id).unwrap() >= b);
            }
        }
    }
}
