//! Name heuristic and extraction of candidate instances (two-argument calls
//! and binary expressions) together with their feature-token positions.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ast::AstNode;
use crate::corpus::{format_number, FileRecord, SplitTag};
use crate::error::{Error, Result};

pub const INSTANCES_FORMAT: &str = "scelmo-instances";
pub const INSTANCES_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    SwappedArgs,
    WrongOperator,
    WrongOperand,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::SwappedArgs, Pattern::WrongOperator, Pattern::WrongOperand];

    pub fn is_call(self) -> bool {
        self == Pattern::SwappedArgs
    }

    /// Slot names in feature order.
    pub fn slot_names(self) -> &'static [&'static str] {
        if self.is_call() {
            &["base", "callee", "arg1", "arg2"]
        } else {
            &["left", "op", "right"]
        }
    }

    pub fn arity(self) -> usize {
        self.slot_names().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::SwappedArgs => "swapped_args",
            Pattern::WrongOperator => "wrong_operator",
            Pattern::WrongOperand => "wrong_operand",
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "swapped_args" => Ok(Pattern::SwappedArgs),
            "wrong_operator" => Ok(Pattern::WrongOperator),
            "wrong_operand" => Ok(Pattern::WrongOperand),
            _ => Err(Error::InvalidArgument(format!("unknown pattern {s:?}"))),
        }
    }
}

pub const CALL_BASE: usize = 0;
pub const CALL_CALLEE: usize = 1;
pub const CALL_ARG1: usize = 2;
pub const CALL_ARG2: usize = 3;
pub const BIN_LEFT: usize = 0;
pub const BIN_OP: usize = 1;
pub const BIN_RIGHT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperandType {
    Identifier,
    Literal,
    This,
    #[default]
    Unknown,
}

impl OperandType {
    pub fn of(node: &AstNode) -> OperandType {
        match node.node_type.as_str() {
            "Identifier" => OperandType::Identifier,
            "Literal" => OperandType::Literal,
            "ThisExpression" => OperandType::This,
            _ => OperandType::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Buggy,
}

/// One named element of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Extracted name; the empty placeholder when `missing`.
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
    /// Index of the slot's feature token in the file.
    pub position: Option<usize>,
    #[serde(default)]
    pub operand_type: OperandType,
}

impl Slot {
    fn named(name: String, position: Option<usize>, operand_type: OperandType) -> Slot {
        Slot { name, missing: false, position, operand_type }
    }

    pub fn missing() -> Slot {
        Slot { name: String::new(), missing: true, position: None, operand_type: OperandType::Unknown }
    }
}

/// Token text replacement applied to the file's token stream when this
/// instance is fed to a contextual model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOverride {
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeInstance {
    pub pattern: Pattern,
    pub file_id: u32,
    #[serde(default)]
    pub split: SplitTag,
    /// Slots in the pattern's fixed order (see [`Pattern::slot_names`]).
    pub slots: Vec<Slot>,
    /// Source range of the whole expression.
    pub range: (usize, usize),
    pub label: Label,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<TokenOverride>,
}

impl CodeInstance {
    /// Element names, `None` for missing elements.
    pub fn elements(&self) -> Vec<Option<&str>> {
        self.slots.iter().map(|s| if s.missing { None } else { Some(s.name.as_str()) }).collect()
    }

    pub fn slot(&self, i: usize) -> &Slot {
        &self.slots[i]
    }
}

/// How the oversized-element threshold is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub max_elem_len: usize,
    pub unit: LengthUnit,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { max_elem_len: 1000, unit: LengthUnit::Chars }
    }
}

impl ExtractConfig {
    fn too_long(&self, node: &AstNode) -> bool {
        let len = match self.unit {
            LengthUnit::Chars => node.source_len(),
            LengthUnit::Tokens => node.span.map(|s| s.end - s.start),
        };
        len.is_some_and(|l| l > self.max_elem_len)
    }
}

fn literal_name(node: &AstNode) -> Option<String> {
    let raw = node.attr_str("raw");
    match node.attrs.get("value") {
        Some(Value::String(s)) if s.is_empty() => Some(raw.unwrap_or("\"\"").to_string()),
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => n.as_f64().map(format_number),
        Some(Value::Bool(b)) => Some(b.to_string()),
        Some(Value::Null) | None => match raw {
            Some(r) if r != "null" => Some(r.to_string()),
            _ => Some("null".to_string()),
        },
        // regex and other structured literal values
        Some(_) => raw.map(str::to_string),
    }
}

fn choose<R: Rng + ?Sized>(rng: &mut R, mut options: Vec<String>) -> Option<String> {
    match options.len() {
        0 => None,
        1 => options.pop(),
        n => Some(options.swap_remove(rng.gen_range(0..n))),
    }
}

fn name_of_pair<R: Rng + ?Sized>(a: Option<&AstNode>, b: Option<&AstNode>, rng: &mut R) -> Option<String> {
    let na = a.and_then(|n| name_of(n, rng));
    let nb = b.and_then(|n| name_of(n, rng));
    match (na, nb) {
        (None, r) => r,
        (l, None) => l,
        (Some(l), Some(r)) => Some(if rng.gen_bool(0.5) { l } else { r }),
    }
}

/// Extracts the representative name of an expression node.
///
/// Rules with several candidate names (properties, binary/logical/
/// assignment expressions, arrays, conditionals) evaluate every candidate
/// and then pick one uniformly with `rng`. Node types without a rule yield
/// `None`.
pub fn name_of<R: Rng + ?Sized>(node: &AstNode, rng: &mut R) -> Option<String> {
    match node.node_type.as_str() {
        "Identifier" => node.attr_str("name").map(str::to_string),
        "Literal" => literal_name(node),
        "ThisExpression" => Some("this".to_string()),
        "UpdateExpression" | "UnaryExpression" => node.child("argument").and_then(|a| name_of(a, rng)),
        "MemberExpression" => {
            if node.attr_bool("computed") {
                node.child("object").and_then(|o| name_of(o, rng))
            } else {
                node.child("property").and_then(|p| name_of(p, rng))
            }
        }
        "CallExpression" | "NewExpression" => node.child("callee").and_then(|c| name_of(c, rng)),
        // Read as name(n.key) / name(n.value).
        "Property" => {
            let value = node.child("value").and_then(|v| name_of(v, rng));
            let key = node.child("key").and_then(|k| name_of(k, rng));
            match (key, value) {
                (None, v) => v,
                (Some(k), None) => Some(k),
                (Some(k), Some(v)) => Some(if rng.gen_bool(0.5) { v } else { k }),
            }
        }
        "BinaryExpression" | "LogicalExpression" | "AssignmentExpression" => {
            name_of_pair(node.child("left"), node.child("right"), rng)
        }
        "ArrayExpression" => {
            let names: Vec<String> = node
                .list("elements")
                .unwrap_or(&[])
                .iter()
                .flatten()
                .filter_map(|e| name_of(e, rng))
                .collect();
            choose(rng, names)
        }
        "ConditionalExpression" => {
            let names: Vec<String> = ["test", "consequent", "alternate"]
                .iter()
                .filter_map(|k| node.child(k))
                .filter_map(|n| name_of(n, rng))
                .collect();
            choose(rng, names)
        }
        "FunctionExpression" => Some("function".to_string()),
        "ObjectExpression" => Some("{".to_string()),
        _ => None,
    }
}

/// Per-file random stream: the global seed xor the file id.
pub fn file_rng(seed: u64, file_id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ file_id as u64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub instances: usize,
    pub skipped_long: usize,
    pub skipped_unnamed: usize,
}

impl std::ops::AddAssign for ExtractStats {
    fn add_assign(&mut self, o: Self) {
        self.instances += o.instances;
        self.skipped_long += o.skipped_long;
        self.skipped_unnamed += o.skipped_unnamed;
    }
}

fn file_ast(file: &FileRecord) -> Option<AstNode> {
    file.ast.as_ref().and_then(|a| AstNode::from_estree(a, &file.tokens))
}

/// One instance per call or `new` expression with exactly two arguments.
pub fn extract_call_instances<R: Rng + ?Sized>(
    file: &FileRecord,
    config: &ExtractConfig,
    rng: &mut R,
) -> (Vec<CodeInstance>, ExtractStats) {
    let mut out = Vec::new();
    let mut stats = ExtractStats::default();
    let Some(ast) = file_ast(file) else { return (out, stats) };
    let mut calls = Vec::new();
    ast.walk(&mut |n| {
        if n.is("CallExpression") || n.is("NewExpression") {
            if let Some(args) = n.list("arguments") {
                if args.len() == 2 && args.iter().all(Option::is_some) {
                    calls.push(n);
                }
            }
        }
    });
    for call in calls {
        let Some(callee) = call.child("callee") else { continue };
        let args = call.list("arguments").unwrap();
        let (arg1, arg2) = (args[0].as_ref().unwrap(), args[1].as_ref().unwrap());
        let (base_node, name_node) = if callee.is("MemberExpression") {
            (callee.child("object"), callee.child("property"))
        } else {
            (None, Some(callee))
        };
        let Some(name_node) = name_node else { continue };

        let mut parts: Vec<&AstNode> = vec![callee, arg1, arg2];
        parts.extend(base_node);
        if parts.iter().any(|p| config.too_long(p)) {
            stats.skipped_long += 1;
            continue;
        }

        let base = base_node.and_then(|b| name_of(b, rng).map(|name| (name, b)));
        let callee_name = name_of(name_node, rng);
        let arg1_name = name_of(arg1, rng);
        let arg2_name = name_of(arg2, rng);
        let (Some(callee_name), Some(arg1_name), Some(arg2_name)) = (callee_name, arg1_name, arg2_name) else {
            stats.skipped_unnamed += 1;
            continue;
        };
        let base_slot = match base {
            Some((name, node)) => Slot::named(name, node.first_token(), OperandType::of(node)),
            None => Slot::missing(),
        };
        out.push(CodeInstance {
            pattern: Pattern::SwappedArgs,
            file_id: file.file_id,
            split: file.split,
            slots: vec![
                base_slot,
                Slot::named(callee_name, name_node.first_token(), OperandType::Unknown),
                Slot::named(arg1_name, arg1.first_token(), OperandType::of(arg1)),
                Slot::named(arg2_name, arg2.first_token(), OperandType::of(arg2)),
            ],
            range: call.range.unwrap_or((0, 0)),
            label: Label::Correct,
            overrides: Vec::new(),
        });
        stats.instances += 1;
    }
    (out, stats)
}

/// One instance per binary expression. Instances are tagged with
/// `pattern`, which must be one of the two binary-expression patterns.
pub fn extract_binop_instances<R: Rng + ?Sized>(
    file: &FileRecord,
    pattern: Pattern,
    config: &ExtractConfig,
    rng: &mut R,
) -> (Vec<CodeInstance>, ExtractStats) {
    debug_assert!(!pattern.is_call());
    let mut out = Vec::new();
    let mut stats = ExtractStats::default();
    let Some(ast) = file_ast(file) else { return (out, stats) };
    let mut binops = Vec::new();
    ast.walk(&mut |n| {
        if n.is("BinaryExpression") {
            binops.push(n);
        }
    });
    for bin in binops {
        let (Some(left), Some(right), Some(op)) = (bin.child("left"), bin.child("right"), bin.attr_str("operator"))
        else {
            continue;
        };
        if config.too_long(left) || config.too_long(right) {
            stats.skipped_long += 1;
            continue;
        }
        let (Some(left_name), Some(right_name)) = (name_of(left, rng), name_of(right, rng)) else {
            stats.skipped_unnamed += 1;
            continue;
        };
        out.push(CodeInstance {
            pattern,
            file_id: file.file_id,
            split: file.split,
            slots: vec![
                Slot::named(left_name, left.first_token(), OperandType::of(left)),
                Slot::named(op.to_string(), operator_position(file, left, right, op), OperandType::Unknown),
                Slot::named(right_name, right.first_token(), OperandType::of(right)),
            ],
            range: bin.range.unwrap_or((0, 0)),
            label: Label::Correct,
            overrides: Vec::new(),
        });
        stats.instances += 1;
    }
    (out, stats)
}

fn operator_position(file: &FileRecord, left: &AstNode, right: &AstNode, op: &str) -> Option<usize> {
    let (l, r) = (left.span?, right.span?);
    (l.end..r.start.min(file.tokens.len())).find(|&i| file.tokens[i].text == op)
}

/// Extracts the instances of `pattern` from one file, with the file's own
/// seeded random stream.
pub fn extract_file(file: &FileRecord, pattern: Pattern, config: &ExtractConfig, seed: u64) -> (Vec<CodeInstance>, ExtractStats) {
    let mut rng = file_rng(seed, file.file_id);
    if pattern.is_call() {
        extract_call_instances(file, config, &mut rng)
    } else {
        extract_binop_instances(file, pattern, config, &mut rng)
    }
}

/// Feature-token positions of an instance in slot order, validated against
/// the file. A missing base yields `None`.
pub fn feature_token_positions(instance: &CodeInstance, file: &FileRecord) -> Result<Vec<Option<usize>>> {
    instance
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| match s.position {
            Some(p) if p >= file.tokens.len() => Err(Error::CorruptInstance(format!(
                "slot {} position {p} outside file of {} tokens",
                instance.pattern.slot_names()[i],
                file.tokens.len()
            ))),
            Some(p) => Ok(Some(p)),
            None if s.missing => Ok(None),
            None => Err(Error::CorruptInstance(format!(
                "slot {} has no position",
                instance.pattern.slot_names()[i]
            ))),
        })
        .collect()
}

/// Writes instances as JSONL preceded by a header line.
pub fn write_instances(path: &Path, config: Value, instances: &[CodeInstance]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = serde_json::json!({
        "format": INSTANCES_FORMAT,
        "version": INSTANCES_VERSION,
        "count": instances.len(),
        "config": config,
    });
    writeln!(w, "{header}")?;
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances(path: &Path) -> Result<(Value, Vec<CodeInstance>)> {
    let reader = std::io::BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header: Value = match lines.next() {
        Some(l) => serde_json::from_str(&l?)?,
        None => return Err(Error::Format(format!("{}: empty instance file", path.display()))),
    };
    if header["format"] != INSTANCES_FORMAT {
        return Err(Error::Format(format!("{}: not an instance file", path.display())));
    }
    if header["version"] != INSTANCES_VERSION {
        return Err(Error::Format(format!("{}: unsupported version {}", path.display(), header["version"])));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(src: &str) -> FileRecord {
        FileRecord::from_exported(&minijs::export_source("t.js", src), 0).unwrap()
    }

    fn first_expr(src: &str) -> (FileRecord, AstNode) {
        let f = file(src);
        let ast = file_ast(&f).unwrap();
        let stmt = ast.list("body").unwrap()[0].clone().unwrap();
        let expr = stmt.child("expression").cloned().unwrap_or(stmt);
        (f, expr)
    }

    fn name(src: &str) -> Option<String> {
        name_of(&first_expr(src).1, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn simple_rules() {
        assert_eq!(name("delay;").as_deref(), Some("delay"));
        assert_eq!(name("this;").as_deref(), Some("this"));
        assert_eq!(name("matrix.length;").as_deref(), Some("length"));
        assert_eq!(name("base[p];").as_deref(), Some("base"));
        assert_eq!(name("(function() {});").as_deref(), Some("function"));
        assert_eq!(name("({a: 1});").as_deref(), Some("{"));
        assert_eq!(name("i++;").as_deref(), Some("i"));
        assert_eq!(name("!ready;").as_deref(), Some("ready"));
        assert_eq!(name("new Car(1, 2);").as_deref(), Some("Car"));
        assert_eq!(name("a.b.f(x);").as_deref(), Some("f"));
    }

    #[test]
    fn binary_choice_covers_both_branches() {
        let (_, expr) = first_expr("a + f(b);");
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let n = name_of(&expr, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(n == "a" || n == "f", "{n}");
            seen.insert(n);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn unknown_node_types_have_no_name() {
        let (_, expr) = first_expr("(a, b);");
        assert_eq!(expr.node_type, "SequenceExpression");
        assert_eq!(name_of(&expr, &mut ChaCha8Rng::seed_from_u64(0)), None);
    }

    #[test]
    fn listing_one_call() {
        let f = file("var delay = 1000;\nsetTimeout(delay, function() {\n  logMessage(msgValue);\n});\n");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].elements(), vec![None, Some("setTimeout"), Some("delay"), Some("function")]);
        assert_eq!(inst[0].label, Label::Correct);
    }

    #[test]
    fn base_object_is_user_agent() {
        let f = file("window.navigator.userAgent.indexOf(\"Chrome\", 0);");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst[0].elements(), vec![Some("userAgent"), Some("indexOf"), Some("Chrome"), Some("0")]);
        assert_eq!(inst[0].slots[CALL_ARG1].operand_type, OperandType::Literal);
    }

    #[test]
    fn complex_first_argument_is_kept() {
        let f = file("doComputation(x + find_min(components), callback);");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        // the inner one-argument call is not an instance
        assert_eq!(inst.len(), 1);
        let arg1 = inst[0].slots[CALL_ARG1].name.as_str();
        assert!(arg1 == "x" || arg1 == "find_min");
    }

    #[test]
    fn new_expression_with_two_arguments_is_a_call_instance() {
        let f = file("factory.test(simulator, new Car('Eagle', 'Talon TSi'));");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].elements(), vec![Some("factory"), Some("test"), Some("simulator"), Some("Car")]);
        assert_eq!(inst[1].elements(), vec![None, Some("Car"), Some("Eagle"), Some("Talon TSi")]);
    }

    #[test]
    fn binop_elements_and_types() {
        let f = file("if (index < matrix) { x = promises === null; }");
        let (inst, _) =
            extract_binop_instances(&f, Pattern::WrongOperand, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].elements(), vec![Some("index"), Some("<"), Some("matrix")]);
        assert_eq!(inst[0].slots[BIN_LEFT].operand_type, OperandType::Identifier);
        assert_eq!(inst[0].slots[BIN_RIGHT].operand_type, OperandType::Identifier);
        assert_eq!(inst[1].slots[BIN_RIGHT].operand_type, OperandType::Literal);
        assert_eq!(inst[1].slots[BIN_RIGHT].name, "null");
    }

    #[test]
    fn logical_expressions_are_not_binop_instances() {
        let f = file("x = a && b;");
        let (inst, _) =
            extract_binop_instances(&f, Pattern::WrongOperator, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(inst.is_empty());
    }

    #[test]
    fn oversized_operand_threshold_boundary() {
        let config = ExtractConfig::default();
        let exact = "a".repeat(1000);
        let over = "a".repeat(1001);
        let f = file(&format!("x = {exact} + b; y = {over} + b;"));
        let (inst, stats) = extract_binop_instances(&f, Pattern::WrongOperand, &config, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].slots[BIN_LEFT].name, exact);
        assert_eq!(stats.skipped_long, 1);
    }

    #[test]
    fn token_unit_threshold() {
        let config = ExtractConfig { max_elem_len: 3, unit: LengthUnit::Tokens };
        let f = file("x = a.b.c + d; y = a.b + d;");
        let (inst, _) = extract_binop_instances(&f, Pattern::WrongOperand, &config, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].slots[BIN_LEFT].name, "b");
    }

    fn texts_at(f: &FileRecord, inst: &CodeInstance) -> Vec<Option<String>> {
        feature_token_positions(inst, f)
            .unwrap()
            .into_iter()
            .map(|p| p.map(|p| f.tokens[p].text.clone()))
            .collect()
    }

    #[test]
    fn call_feature_positions() {
        let f = file("a.f(x+1, y);");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let expect: Vec<Option<String>> = ["a", "f", "x", "y"].iter().map(|s| Some(s.to_string())).collect();
        assert_eq!(texts_at(&f, &inst[0]), expect);
    }

    #[test]
    fn binop_feature_positions() {
        let f = file("i < n;");
        let (inst, _) =
            extract_binop_instances(&f, Pattern::WrongOperator, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let expect: Vec<Option<String>> = ["i", "<", "n"].iter().map(|s| Some(s.to_string())).collect();
        assert_eq!(texts_at(&f, &inst[0]), expect);
    }

    #[test]
    fn parenthesized_left_operand_position() {
        let f = file("z = (a + b) * c;");
        let (inst, _) =
            extract_binop_instances(&f, Pattern::WrongOperator, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let outer = inst.iter().find(|i| i.slots[BIN_OP].name == "*").unwrap();
        let texts = texts_at(&f, outer);
        assert_eq!(texts[0].as_deref(), Some("a"));
        assert_eq!(texts[1].as_deref(), Some("*"));
    }

    #[test]
    fn missing_base_position_is_absent() {
        let f = file("f(x, y);");
        let (inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let texts = texts_at(&f, &inst[0]);
        assert_eq!(texts[0], None);
        assert_eq!(texts[1..].iter().map(|t| t.clone().unwrap()).collect::<Vec<_>>(), ["f", "x", "y"]);
        assert!(inst[0].slots[CALL_BASE].missing);
        assert_eq!(inst[0].slots[CALL_BASE].name, "");
    }

    #[test]
    fn out_of_range_position_is_corrupt() {
        let f = file("f(x, y);");
        let (mut inst, _) = extract_call_instances(&f, &ExtractConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        inst[0].slots[CALL_ARG2].position = Some(99);
        assert!(matches!(feature_token_positions(&inst[0], &f), Err(Error::CorruptInstance(_))));
    }

    #[test]
    fn file_without_calls_or_binops_yields_nothing() {
        let f = file("var x = 1;");
        assert!(extract_file(&f, Pattern::SwappedArgs, &ExtractConfig::default(), 7).0.is_empty());
        assert!(extract_file(&f, Pattern::WrongOperand, &ExtractConfig::default(), 7).0.is_empty());
    }

    #[test]
    fn extraction_is_reproducible() {
        let f = file("x = (a + b) * [c, d, e][0] + (p ? q : r);\nf(a || b, [x, y]);");
        for pattern in Pattern::ALL {
            let a = serde_json::to_string(&extract_file(&f, pattern, &ExtractConfig::default(), 11).0).unwrap();
            let b = serde_json::to_string(&extract_file(&f, pattern, &ExtractConfig::default(), 11).0).unwrap();
            assert_eq!(a, b);
        }
    }
}
