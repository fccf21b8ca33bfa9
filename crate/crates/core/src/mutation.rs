//! Bug seeding: one buggy counterpart per correct instance.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SplitTag;
use crate::error::{Error, Result};
use crate::extraction::{
    CodeInstance, Label, OperandType, Pattern, TokenOverride, BIN_LEFT, BIN_OP, BIN_RIGHT, CALL_ARG1, CALL_ARG2,
};

/// One candidate replacement operand, taken from its first occurrence in
/// the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolOperand {
    pub name: String,
    pub position: Option<usize>,
    pub operand_type: OperandType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub original: CodeInstance,
    pub mutated: CodeInstance,
    pub kind: Pattern,
    /// Index into the file's operand pool, for operand replacements.
    pub replacement_source: Option<usize>,
}

fn flip(label: Label) -> Label {
    match label {
        Label::Correct => Label::Buggy,
        Label::Buggy => Label::Correct,
    }
}

/// Exchanges both argument slots (names, positions and types). Applying it
/// twice gives back the original instance.
pub fn swap_arguments(inst: &CodeInstance) -> Result<CodeInstance> {
    if inst.pattern != Pattern::SwappedArgs {
        return Err(Error::InvalidArgument(format!("cannot swap arguments of a {} instance", inst.pattern.as_str())));
    }
    let mut out = inst.clone();
    out.slots.swap(CALL_ARG1, CALL_ARG2);
    out.label = flip(inst.label);
    Ok(out)
}

/// Sorted set of operators found in `instances`.
pub fn operator_pool<'a>(instances: impl IntoIterator<Item = &'a CodeInstance>) -> Vec<String> {
    instances
        .into_iter()
        .filter(|i| !i.pattern.is_call())
        .map(|i| i.slots[BIN_OP].name.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Replaces the operator with one drawn uniformly from the rest of the pool.
/// The operator token is overridden in the file's token stream so that
/// contextual providers see the mutated operator.
pub fn mutate_operator<R: Rng + ?Sized>(inst: &CodeInstance, op_pool: &[String], rng: &mut R) -> Result<CodeInstance> {
    let orig = &inst.slots[BIN_OP].name;
    let alternatives: Vec<&String> = op_pool.iter().filter(|o| *o != orig).collect::<BTreeSet<_>>().into_iter().collect();
    let Some(new_op) = alternatives.choose(rng) else {
        return Err(Error::NoAlternativeOperator(orig.clone()));
    };
    let mut out = inst.clone();
    out.slots[BIN_OP].name = (*new_op).clone();
    if let Some(position) = inst.slots[BIN_OP].position {
        out.overrides.retain(|o| o.position != position);
        out.overrides.push(TokenOverride { position, text: (*new_op).clone() });
    }
    out.label = Label::Buggy;
    Ok(out)
}

/// Distinct operand names of the given instances (one file's binary
/// expressions), each with its first occurrence.
pub fn operand_pool<'a>(file_instances: impl IntoIterator<Item = &'a CodeInstance>) -> Vec<PoolOperand> {
    let mut seen = BTreeSet::new();
    let mut pool = Vec::new();
    for inst in file_instances {
        if inst.pattern.is_call() {
            continue;
        }
        for slot in [&inst.slots[BIN_LEFT], &inst.slots[BIN_RIGHT]] {
            if seen.insert(slot.name.clone()) {
                pool.push(PoolOperand { name: slot.name.clone(), position: slot.position, operand_type: slot.operand_type });
            }
        }
    }
    pool
}

/// Replaces the left or right operand (fair coin) with another operand of
/// the same file. Returns `None` when the pool holds nothing different from
/// the chosen operand.
pub fn mutate_operand<R: Rng + ?Sized>(
    inst: &CodeInstance,
    file_pool: &[PoolOperand],
    rng: &mut R,
) -> Option<(CodeInstance, usize)> {
    let slot = if rng.gen_bool(0.5) { BIN_LEFT } else { BIN_RIGHT };
    let current = &inst.slots[slot].name;
    let candidates: Vec<usize> = (0..file_pool.len()).filter(|&i| &file_pool[i].name != current).collect();
    let &source = candidates.choose(rng)?;
    let repl = &file_pool[source];
    let mut out = inst.clone();
    out.slots[slot].name = repl.name.clone();
    out.slots[slot].position = repl.position;
    out.slots[slot].operand_type = repl.operand_type;
    out.label = Label::Buggy;
    Some((out, source))
}

/// Mutates one correct instance according to its pattern.
pub fn mutate<R: Rng + ?Sized>(
    inst: &CodeInstance,
    op_pool: &[String],
    file_pool: &[PoolOperand],
    rng: &mut R,
) -> Result<Option<MutationRecord>> {
    let (mutated, replacement_source) = match inst.pattern {
        Pattern::SwappedArgs => (swap_arguments(inst)?, None),
        Pattern::WrongOperator => (mutate_operator(inst, op_pool, rng)?, None),
        Pattern::WrongOperand => match mutate_operand(inst, file_pool, rng) {
            Some((m, src)) => (m, Some(src)),
            None => return Ok(None),
        },
    };
    Ok(Some(MutationRecord { original: inst.clone(), mutated, kind: inst.pattern, replacement_source }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub correct: usize,
    pub buggy: usize,
    pub skipped: usize,
}

fn file_stream(seed: u64, split: SplitTag, file_id: u32) -> ChaCha8Rng {
    // each split gets its own stream family
    let salt = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(split.code() + 1);
    ChaCha8Rng::seed_from_u64(seed ^ salt ^ ((file_id as u64) << 20))
}

/// Pairs each correct instance with one mutation and shuffles the result.
/// Instances are mutated file by file with independent seeded streams.
/// Wrong-operand instances without a usable replacement are dropped
/// together with their would-be mutant.
pub fn build_dataset(instances: &[CodeInstance], op_pool: &[String], seed: u64) -> Result<(Vec<CodeInstance>, DatasetStats)> {
    if let Some(bad) = instances.iter().find(|i| i.label != Label::Correct) {
        return Err(Error::InvalidArgument(format!("instance in file {} is already labelled buggy", bad.file_id)));
    }
    let mut by_file: BTreeMap<(u64, u32), Vec<&CodeInstance>> = BTreeMap::new();
    for inst in instances {
        by_file.entry((inst.split.code(), inst.file_id)).or_default().push(inst);
    }
    let mut out = Vec::with_capacity(instances.len() * 2);
    let mut stats = DatasetStats::default();
    for group in by_file.values() {
        let mut rng = file_stream(seed, group[0].split, group[0].file_id);
        let pool = operand_pool(group.iter().copied());
        for inst in group {
            match mutate(inst, op_pool, &pool, &mut rng)? {
                Some(rec) => {
                    out.push(rec.original);
                    out.push(rec.mutated);
                    stats.correct += 1;
                    stats.buggy += 1;
                }
                None => stats.skipped += 1,
            }
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Slot;

    fn slot(name: &str, pos: usize) -> Slot {
        Slot { name: name.into(), missing: false, position: Some(pos), operand_type: OperandType::Identifier }
    }

    fn call(a: &str, b: &str) -> CodeInstance {
        CodeInstance {
            pattern: Pattern::SwappedArgs,
            file_id: 0,
            split: SplitTag::Train,
            slots: vec![Slot::missing(), slot("f", 0), slot(a, 2), slot(b, 4)],
            range: (0, 10),
            label: Label::Correct,
            overrides: vec![],
        }
    }

    fn binop(pattern: Pattern, file_id: u32, l: &str, op: &str, r: &str, at: usize) -> CodeInstance {
        CodeInstance {
            pattern,
            file_id,
            split: SplitTag::Train,
            slots: vec![slot(l, at), slot(op, at + 1), slot(r, at + 2)],
            range: (0, 5),
            label: Label::Correct,
            overrides: vec![],
        }
    }

    #[test]
    fn swap_exchanges_arguments() {
        let m = swap_arguments(&call("delay", "function")).unwrap();
        assert_eq!(m.elements(), vec![None, Some("f"), Some("function"), Some("delay")]);
        assert_eq!(m.slots[CALL_ARG1].position, Some(4));
        assert_eq!(m.label, Label::Buggy);
        assert_eq!(swap_arguments(&m).unwrap(), call("delay", "function"));
    }

    #[test]
    fn swap_of_equal_arguments_keeps_elements() {
        let orig = call("x", "x");
        let m = swap_arguments(&orig).unwrap();
        assert_eq!(m.elements(), orig.elements());
        assert_eq!(m.slots[CALL_ARG1].position, Some(4));
    }

    #[test]
    fn two_operator_pool_is_forced() {
        let inst = binop(Pattern::WrongOperator, 0, "a", "+", "b", 0);
        let pool = vec!["+".to_string(), "-".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = mutate_operator(&inst, &pool, &mut rng).unwrap();
            assert_eq!(m.slots[BIN_OP].name, "-");
            assert_eq!(m.overrides, vec![TokenOverride { position: 1, text: "-".into() }]);
        }
    }

    #[test]
    fn singleton_pool_has_no_alternative() {
        let inst = binop(Pattern::WrongOperator, 0, "a", "+", "b", 0);
        let err = mutate_operator(&inst, &["+".to_string()], &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::NoAlternativeOperator(_)));
    }

    #[test]
    fn or_can_become_and() {
        let inst = binop(Pattern::WrongOperator, 0, "a", "||", "b", 0);
        let pool: Vec<String> = ["&&", "||", "+", "=="].iter().map(|s| s.to_string()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..50).any(|_| mutate_operator(&inst, &pool, &mut rng).unwrap().slots[BIN_OP].name == "&&"));
    }

    #[test]
    fn operand_replacement_comes_from_pool_source() {
        let insts = vec![
            binop(Pattern::WrongOperand, 0, "index", "<", "length", 0),
            binop(Pattern::WrongOperand, 0, "matrix", "===", "null", 10),
        ];
        let pool = operand_pool(&insts);
        assert_eq!(pool.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["index", "length", "matrix", "null"]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut saw_matrix = false;
        for _ in 0..200 {
            let (m, src) = mutate_operand(&insts[0], &pool, &mut rng).unwrap();
            assert_ne!(m.elements(), insts[0].elements());
            let changed = if m.slots[BIN_LEFT] != insts[0].slots[BIN_LEFT] { BIN_LEFT } else { BIN_RIGHT };
            assert_eq!(m.slots[changed].name, pool[src].name);
            assert_eq!(m.slots[changed].position, pool[src].position);
            saw_matrix |= changed == BIN_RIGHT && m.slots[changed].name == "matrix";
        }
        assert!(saw_matrix);
    }

    #[test]
    fn pool_with_only_current_operand_skips() {
        let inst = binop(Pattern::WrongOperand, 0, "a", "<", "a", 0);
        let pool = operand_pool([&inst]);
        assert!(mutate_operand(&inst, &pool, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn dataset_is_balanced() {
        let insts: Vec<CodeInstance> = (0..100).map(|i| call(&format!("a{i}"), "b")).collect();
        let (ds, stats) = build_dataset(&insts, &[], 1).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.iter().filter(|i| i.label == Label::Buggy).count(), 100);
        assert_eq!(stats, DatasetStats { correct: 100, buggy: 100, skipped: 0 });
        assert!(build_dataset(&[], &[], 1).unwrap().0.is_empty());
    }

    #[test]
    fn skipped_operand_instances_drop_both_members() {
        let insts = vec![
            binop(Pattern::WrongOperand, 0, "a", "<", "a", 0),
            binop(Pattern::WrongOperand, 1, "x", "<", "y", 0),
        ];
        let (ds, stats) = build_dataset(&insts, &[], 4).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn buggy_input_is_rejected() {
        let mut inst = call("a", "b");
        inst.label = Label::Buggy;
        assert!(build_dataset(&[inst], &[], 0).is_err());
    }
}
