//! Seeded generator of small JavaScript projects.
//!
//! Files are built from statement templates in which the binary operator is
//! strongly tied to its surroundings (loop bounds use `<`, null checks use
//! `===`, string building uses `+`, ...), and two-argument calls follow
//! recognisable API shapes. Names are drawn from role-specific pools with a
//! per-project prefix, so some identifiers are rare or project-local.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREFIXES: &[&str] = &[
    "user", "item", "node", "page", "file", "task", "order", "event", "row", "cell", "job", "post",
    "tag", "book", "song", "city",
];

const PROJECT_WORDS: &[&str] = &[
    "alpha", "bravo", "delta", "gamma", "kappa", "omega", "sigma", "zeta", "lumen", "vapor",
    "quark", "ember",
];

struct Names {
    project: &'static str,
}

impl Names {
    fn pick(&self, rng: &mut ChaCha8Rng, suffixes: &[&str]) -> String {
        let prefix = PREFIXES.choose(rng).unwrap();
        let suffix = suffixes.choose(rng).unwrap();
        // Occasionally use a project-local spelling.
        if rng.gen_bool(0.15) {
            let mut p = self.project.to_string();
            p.push_str(&capitalize(prefix));
            p.push_str(suffix);
            p
        } else {
            format!("{prefix}{suffix}")
        }
    }
    fn array(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["List", "s", "Items", "Array", "Queue"])
    }
    fn count(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["Count", "Total", "Num", "Size", "Length"])
    }
    fn object(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["Node", "Data", "Info", "Config", "Entry", "Record"])
    }
    fn value(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["Value", "Name", "Id", "Key", "Label", "Text"])
    }
    fn handler(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["Handler", "Callback", "Listener", "Fn", "Done"])
    }
    fn number(&self, rng: &mut ChaCha8Rng) -> String {
        self.pick(rng, &["Width", "Height", "Price", "Score", "Weight", "Rate"])
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

const WORDS: &[&str] = &["Hello", "Error", "Loading", "Done", "Total", "Result", "Missing"];
const EVENTS: &[&str] = &["click", "change", "submit", "keydown", "load"];

fn statement(rng: &mut ChaCha8Rng, n: &Names, indent: &str) -> String {
    let i = indent;
    match rng.gen_range(0..22) {
        0 => {
            let arr = n.array(rng);
            let acc = n.count(rng);
            format!("{i}for (var i = 0; i < {arr}.length; i++) {{\n{i}  {acc} = {acc} + {arr}[i];\n{i}}}\n")
        }
        1 => {
            let obj = n.object(rng);
            let val = n.value(rng);
            format!("{i}if ({obj} === null) {{\n{i}  return {val};\n{i}}}\n")
        }
        2 => {
            let obj = n.object(rng);
            let key = n.value(rng);
            let val = n.value(rng);
            format!("{i}if ({obj} !== undefined) {{\n{i}  {obj}.set({key}, {val});\n{i}}}\n")
        }
        3 => {
            let cnt = n.count(rng);
            let arr = n.array(rng);
            let obj = n.object(rng);
            format!("{i}if ({cnt} > 0 && {arr}.length > 0) {{\n{i}  {arr}.push({obj});\n{i}}}\n")
        }
        4 => {
            let a = n.number(rng);
            let b = n.number(rng);
            let c = n.number(rng);
            format!("{i}var {c} = {a} * {b};\n")
        }
        5 => {
            let w = WORDS.choose(rng).unwrap();
            let v = n.value(rng);
            let m = n.value(rng);
            format!("{i}var {m} = \"{w} \" + {v};\n")
        }
        6 => {
            let idx = n.count(rng);
            let lim = n.count(rng);
            format!("{i}if ({idx} >= {lim}) {{\n{i}  {idx} = {lim} - 1;\n{i}}}\n")
        }
        7 => {
            let c = n.count(rng);
            let e = n.count(rng);
            format!("{i}if ({c} % 2 === 0) {{\n{i}  {e} = {e} + 1;\n{i}}}\n")
        }
        8 => {
            let cb = n.handler(rng);
            let delay = ["delay", "timeout", "interval", "wait"].choose(rng).unwrap();
            format!("{i}setTimeout({cb}, {delay});\n")
        }
        9 => {
            let a = n.number(rng);
            let b = n.number(rng);
            let c = n.number(rng);
            format!("{i}{c} = Math.max({a}, {b});\n")
        }
        10 => {
            let el = ["element", "button", "form", "input", "panel"].choose(rng).unwrap();
            let ev = EVENTS.choose(rng).unwrap();
            let h = n.handler(rng);
            format!("{i}{el}.addEventListener(\"{ev}\", {h});\n")
        }
        11 => {
            let cb = n.handler(rng);
            let err = ["err", "error", "e"].choose(rng).unwrap();
            let res = n.object(rng);
            format!("{i}if (typeof {cb} === \"function\") {{\n{i}  {cb}({err}, {res});\n{i}}}\n")
        }
        12 => {
            let err = ["err", "error", "e"].choose(rng).unwrap();
            format!("{i}if ({err} instanceof Error) {{\n{i}  throw {err};\n{i}}}\n")
        }
        13 => {
            let part = n.number(rng);
            let total = n.count(rng);
            let r = n.number(rng);
            format!("{i}var {r} = {part} / {total};\n")
        }
        14 => {
            let lo = ["lo", "low", "left", "start"].choose(rng).unwrap();
            let hi = ["hi", "high", "right", "end"].choose(rng).unwrap();
            let arr = n.array(rng);
            format!(
                "{i}while ({lo} <= {hi}) {{\n{i}  var mid = ({lo} + {hi}) / 2;\n{i}  {lo} = mid + 1;\n{i}}}\n{i}{arr}.splice({lo}, {hi});\n"
            )
        }
        15 => {
            let s = n.value(rng);
            let sub = n.value(rng);
            format!("{i}if ({s}.indexOf({sub}, 0) !== -1) {{\n{i}  {s} = {s}.slice(0, {sub}.length);\n{i}}}\n")
        }
        16 => {
            let arr = n.array(rng);
            let cnt = n.count(rng);
            format!("{i}var {cnt} = {arr}.length - 1;\n")
        }
        17 => {
            let t = n.object(rng);
            let s = n.object(rng);
            format!("{i}{t} = Object.assign({t}, {s});\n")
        }
        18 => {
            let m = n.object(rng);
            let k = n.value(rng);
            let v = n.value(rng);
            format!("{i}if ({m}.has({k})) {{\n{i}  {v} = {m}.get({k});\n{i}}}\n")
        }
        19 => {
            let a = n.value(rng);
            let b = n.value(rng);
            format!("{i}if ({a} == {b} || {a} != null) {{\n{i}  {a} = {b};\n{i}}}\n")
        }
        20 => {
            let arr = n.array(rng);
            let obj = n.object(rng);
            let cnt = n.count(rng);
            format!("{i}{arr}.forEach(function({obj}) {{\n{i}  {cnt} += {obj}.size * 2;\n{i}}});\n")
        }
        _ => {
            let x = n.number(rng);
            let y = n.number(rng);
            let lim = n.count(rng);
            format!("{i}if ({x} < {lim} && {y} < {lim}) {{\n{i}  {x} = {x} + {y};\n{i}}}\n")
        }
    }
}

fn function(rng: &mut ChaCha8Rng, n: &Names) -> String {
    let name = format!(
        "{}{}",
        ["update", "compute", "render", "load", "handle", "process", "check"].choose(rng).unwrap(),
        capitalize(PREFIXES.choose(rng).unwrap())
    );
    let p1 = n.object(rng);
    let p2 = n.count(rng);
    let mut body = String::new();
    for _ in 0..rng.gen_range(3..7) {
        body.push_str(&statement(rng, n, "  "));
    }
    let ret = n.object(rng);
    format!("function {name}({p1}, {p2}) {{\n{body}  return {ret};\n}}\n\n")
}

/// Generates `n_files` `(path, source)` pairs spread over several projects
/// (`projNN/fileMM.js`), deterministically from `seed`.
pub fn generate(n_files: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_projects = n_files.div_ceil(10).max(1);
    (0..n_files)
        .map(|k| {
            let project = k % n_projects;
            let names = Names { project: PROJECT_WORDS[project % PROJECT_WORDS.len()] };
            let mut src = String::new();
            for _ in 0..rng.gen_range(2..5) {
                src.push_str(&function(&mut rng, &names));
            }
            (format!("proj{project:02}/file{k:03}.js"), src)
        })
        .collect()
}
