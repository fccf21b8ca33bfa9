use std::collections::BTreeSet;
use std::io::Cursor;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scelmo::analysis::oov_stats;
use scelmo::corpus::{deduplicate, parse_corpus, split_corpus, Corpus, SplitTag};
use scelmo::detector::{input_width, real_bug_report};
use scelmo::embeddings::{build_vocabulary, name_sequences, train_fasttext, EmbeddingTable, SgnsConfig, UNK};
use scelmo::extraction::{CodeInstance, ExtractConfig, Label, OperandType, Pattern, Slot, BIN_OP};
use scelmo::lm::{collapse, CollapseWeights, LayerStates, LmConfig, LmModel, LM_UNK};
use scelmo::mutation::{build_dataset, mutate_operator, operator_pool, swap_arguments};
use scelmo::neural::ops::{dropout, softmax, softmax_xent};
use scelmo::neural::CharCnnConfig;
use scelmo::pipeline::extract_corpus;
use scelmo::provider::{FeatureProvider, NoContextProvider, ScelmoProvider, SlotVector};

fn synth(n: usize, seed: u64) -> Corpus {
    let files = minijs::synth::generate(n, seed);
    parse_corpus(Cursor::new(minijs::export_jsonl(files.iter().map(|(p, s)| (p.as_str(), s.as_str()))))).unwrap()
}

fn tiny_lm() -> Arc<LmModel> {
    static LM: OnceLock<Arc<LmModel>> = OnceLock::new();
    LM.get_or_init(|| {
        let config = LmConfig {
            layers: 2,
            hidden: 5,
            seq_len: 30,
            char: CharCnnConfig { char_dim: 3, widths: vec![1, 2], filters: vec![3, 3], max_chars: 8 },
            ..LmConfig::default()
        };
        let vocab = [LM_UNK, "a", "b", "(", ")", "<"].iter().map(|s| s.to_string()).collect();
        Arc::new(LmModel::new(config, vocab).unwrap())
    })
    .clone()
}

fn fasttext() -> &'static EmbeddingTable {
    static T: OnceLock<EmbeddingTable> = OnceLock::new();
    T.get_or_init(|| {
        let c = split_corpus(synth(10, 3), 0.7, 1, false).unwrap();
        let vocab = build_vocabulary(&c, 100).unwrap();
        let cfg = SgnsConfig { dim: 8, epochs: 1, ..SgnsConfig::default() };
        train_fasttext(&name_sequences(&c, SplitTag::Train), &vocab, &cfg).unwrap()
    })
}

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_]{0,6}"
}

fn slot(name: String, pos: usize) -> Slot {
    Slot { name, missing: false, position: Some(pos), operand_type: OperandType::Identifier }
}

prop_compose! {
    fn call_instance()(names in proptest::collection::vec(name(), 4), file_id in 0u32..20) -> CodeInstance {
        CodeInstance {
            pattern: Pattern::SwappedArgs,
            file_id,
            split: SplitTag::Train,
            slots: names.into_iter().enumerate().map(|(i, n)| slot(n, 2 * i)).collect(),
            range: (0, 8),
            label: Label::Correct,
            overrides: vec![],
        }
    }
}

const OPS: [&str; 6] = ["+", "-", "<", "===", "&&", "instanceof"];

prop_compose! {
    fn binop_instance(pattern: Pattern)(l in name(), r in name(), op in 0..OPS.len(), file_id in 0u32..5, at in 0usize..50)
        -> CodeInstance {
        CodeInstance {
            pattern,
            file_id,
            split: SplitTag::Train,
            slots: vec![slot(l, at), slot(OPS[op].to_string(), at + 1), slot(r, at + 2)],
            range: (at, at + 3),
            label: Label::Correct,
            overrides: vec![],
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dedup_is_idempotent_and_split_partitions(n in 2usize..12, seed in 0u64..1000, frac in 0.05f64..0.95, by_project: bool) {
        let once = deduplicate(synth(n, seed));
        let twice = deduplicate(once.clone());
        prop_assert_eq!(&once, &twice);
        let paths: BTreeSet<String> = once.files.iter().map(|f| f.path.clone()).collect();
        let Ok(split) = split_corpus(once, frac, seed, by_project) else {
            // fewer than two files or projects left
            prop_assume!(false);
            unreachable!()
        };
        prop_assert!(split.files.iter().all(|f| matches!(f.split, SplitTag::Train | SplitTag::Valid)));
        let after: BTreeSet<String> = split.files.iter().map(|f| f.path.clone()).collect();
        prop_assert_eq!(paths, after);
    }

    #[test]
    fn extraction_is_deterministic_with_nonempty_elements(n in 1usize..6, seed in 0u64..1000) {
        let c = synth(n, seed);
        for p in Pattern::ALL {
            let (a, _) = extract_corpus(&c, p, &ExtractConfig::default(), seed);
            let (b, _) = extract_corpus(&c, p, &ExtractConfig::default(), seed);
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            for i in &a {
                prop_assert_eq!(i.slots.len(), p.arity());
                prop_assert!(i.slots.iter().all(|s| s.missing || !s.name.is_empty()));
            }
        }
    }

    #[test]
    fn swap_is_an_involution(inst in call_instance()) {
        let once = swap_arguments(&inst).unwrap();
        prop_assert_eq!(once.label, Label::Buggy);
        prop_assert_eq!(swap_arguments(&once).unwrap(), inst);
    }

    #[test]
    fn mutated_operator_always_differs(inst in binop_instance(Pattern::WrongOperator), seed: u64) {
        let pool: Vec<String> = OPS.iter().map(|s| s.to_string()).collect();
        let m = mutate_operator(&inst, &pool, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_ne!(&m.slots[BIN_OP].name, &inst.slots[BIN_OP].name);
        prop_assert!(pool.contains(&m.slots[BIN_OP].name));
    }

    #[test]
    fn datasets_are_balanced(
        ops in proptest::collection::vec(binop_instance(Pattern::WrongOperator), 2..40),
        operands in proptest::collection::vec(binop_instance(Pattern::WrongOperand), 1..40),
        calls in proptest::collection::vec(call_instance(), 1..40),
        seed: u64,
    ) {
        for inst in [ops, operands, calls] {
            let pool = operator_pool(&inst);
            if pool.len() < 2 && inst[0].pattern == Pattern::WrongOperator {
                continue;
            }
            let (data, stats) = build_dataset(&inst, &pool, seed).unwrap();
            let buggy = data.iter().filter(|i| i.label == Label::Buggy).count();
            prop_assert_eq!(buggy * 2, data.len());
            prop_assert_eq!(stats.correct + stats.skipped, inst.len());
        }
    }

    #[test]
    fn fasttext_embeds_any_nonempty_string(word in "\\PC{1,12}") {
        let t = fasttext();
        let v = t.embed(Some(&word));
        prop_assert!(v.iter().all(|x| x.is_finite()));
        if !t.vocab.contains(&word) && v.iter().any(|x| *x != 0.0) {
            prop_assert_ne!(v, t.matrix.row(UNK).to_vec());
        }
    }

    #[test]
    fn softmax_and_cross_entropy(logits in proptest::collection::vec(-30.0f64..30.0, 1..40), k in 1usize..200, c in -5.0f64..5.0) {
        let s: f64 = softmax(&logits).iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        let (loss, _) = softmax_xent(&vec![c; k], k / 2);
        prop_assert!((loss - (k as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn dropout_identities(x in proptest::collection::vec(-3.0f64..3.0, 0..30), rate in 0.0f64..0.9, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(&dropout(&x, 0.0, true, &mut rng).0, &x);
        prop_assert_eq!(&dropout(&x, rate, false, &mut rng).0, &x);
    }

    #[test]
    fn collapse_is_linear(
        a in proptest::collection::vec(-2.0f64..2.0, 12),
        b in proptest::collection::vec(-2.0f64..2.0, 12),
        scores in proptest::collection::vec(-2.0f64..2.0, 3),
        gamma in 0.1f64..3.0,
    ) {
        let stack = |v: &[f64]| LayerStates { layers: v.chunks(4).map(<[f64]>::to_vec).collect() };
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let w = CollapseWeights::from_scores(&scores, gamma);
        let (ea, eb, es) = (collapse(&stack(&a), &w).unwrap(), collapse(&stack(&b), &w).unwrap(), collapse(&stack(&sum), &w).unwrap());
        for k in 0..4 {
            prop_assert!((es[k] - ea[k] - eb[k]).abs() <= 1e-12);
        }
        let unit = collapse(&stack(&a), &CollapseWeights { gamma: 1.0, ..w.clone() }).unwrap();
        prop_assert!(ea.iter().zip(&unit).all(|(x, u)| *x == gamma * u));
    }

    #[test]
    fn layer_states_shape_and_oov(tokens in proptest::collection::vec("[a-z()<]{1,5}", 1..25)) {
        let lm = tiny_lm();
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let states = lm.layer_states(&refs);
        prop_assert_eq!(states.len(), tokens.len());
        for s in &states {
            prop_assert_eq!(s.layers.len(), 3);
            prop_assert!(s.layers.iter().all(|l| l.len() == 10 && l.iter().all(|x| x.is_finite())));
        }
        for (k, t) in refs.iter().enumerate() {
            prop_assert_eq!(&states[k].layers[0], &lm.input_state(t));
        }
    }

    #[test]
    fn providers_share_arity_and_no_context_is_context_free(inst in binop_instance(Pattern::WrongOperator), other_at in 0usize..50) {
        let lm = tiny_lm();
        let w = CollapseWeights::equal(2);
        let nc = NoContextProvider { lm: lm.clone(), weights: w.clone() };
        let sc = ScelmoProvider::new(lm, w);
        let tokens: Vec<String> = (0..60).map(|i| ["a", "b", "(", ")", "<"][i % 5].to_string()).collect();
        let src = tokens.join(" ");
        let mut corpus = synth(1, 0);
        corpus.files[0] = scelmo::corpus::FileRecord::from_exported(&minijs::export_source("t.js", &src), 0).unwrap();
        let mut inst = inst;
        inst.file_id = 0;
        let mut moved = inst.clone();
        for (i, s) in moved.slots.iter_mut().enumerate() {
            s.position = Some(other_at + i);
        }
        let (a, b) = (nc.features(&inst, &corpus).unwrap(), nc.features(&moved, &corpus).unwrap());
        prop_assert_eq!(&a, &b);
        let s = sc.features(&inst, &corpus).unwrap();
        prop_assert_eq!(s.slots.len(), a.slots.len());
        prop_assert_eq!(s.dim, a.dim);
        prop_assert_eq!(input_width(inst.pattern, s.dim), s.width());
        prop_assert!(s.slots.iter().all(|v| matches!(v, SlotVector::Vector(x) if x.iter().all(|f| f.is_finite()))));
    }

    #[test]
    fn raising_the_threshold_never_raises_recall_or_fpr(
        pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..50),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let (a, b) = (real_bug_report(&pairs, lo, 0).unwrap(), real_bug_report(&pairs, hi, 0).unwrap());
        prop_assert!(b.recall <= a.recall && b.fpr <= a.fpr);
        for r in [a, b] {
            prop_assert!((0.0..=1.0).contains(&r.recall) && (0.0..=1.0).contains(&r.fpr));
            prop_assert_eq!(r.positives, pairs.len());
        }
    }

    #[test]
    fn oov_stats_add_over_disjoint_corpora(n in 2usize..8, seed in 0u64..500, v_max in 5usize..200) {
        let c = split_corpus(synth(n, seed), 0.5, seed, false).unwrap();
        let vocab = build_vocabulary(&c, v_max).unwrap_or_else(|_| scelmo::embeddings::Vocabulary::from_entries(vec![]));
        let mut all = extract_corpus(&c, Pattern::SwappedArgs, &ExtractConfig::default(), seed).0;
        all.extend(extract_corpus(&c, Pattern::WrongOperand, &ExtractConfig::default(), seed).0);
        let cut = n as u32 / 2;
        let (left, right): (Vec<_>, Vec<_>) = all.iter().cloned().partition(|i| i.file_id < cut);
        let mut merged = oov_stats(&left, &vocab);
        merged.merge(&oov_stats(&right, &vocab));
        let whole = oov_stats(&all, &vocab);
        for s in [SplitTag::Train, SplitTag::Valid] {
            prop_assert_eq!(merged.split(s), whole.split(s));
            let st = whole.split(s);
            prop_assert!((0..10).all(|r| (0.0..=100.0).contains(&st.call_pct(r))));
            prop_assert!((0..7).all(|r| (0.0..=100.0).contains(&st.binop_pct(r))));
            prop_assert!(st.calls.rows[9] <= st.calls.rows[5] && st.calls.rows[5] <= st.calls.rows[3]);
        }
    }
}
