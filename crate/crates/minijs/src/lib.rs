//! A deliberately small JavaScript front end used to build test fixtures.
//!
//! It tokenizes and parses a JavaScript subset (declarations, control flow,
//! functions, calls, member/new/binary/logical/assignment/update/unary/
//! conditional expressions, array and object literals) and renders each file
//! in the exporter's JSONL schema: `{path, tokens, ast, parse_ok}`, with
//! esprima token types and `range` offsets on every AST node. Comments are
//! dropped. Offsets are byte offsets; fixtures are ASCII.

pub mod lexer;
pub mod parser;
pub mod synth;

use serde_json::{json, Value};

pub use lexer::{tokenize, Token, TokenType};
pub use parser::parse_program;

/// Renders one source file as an exporter record.
pub fn export_source(path: &str, src: &str) -> Value {
    let (tokens, lex_err) = tokenize(src);
    let ast = match lex_err {
        Some(_) => None,
        None => parse_program(&tokens, src.len()).ok(),
    };
    let tokens: Vec<Value> = tokens
        .iter()
        .map(|t| json!({"kind": t.ty.as_str(), "text": t.text, "start": t.start, "end": t.end}))
        .collect();
    let parse_ok = ast.is_some();
    json!({
        "path": path,
        "tokens": tokens,
        "ast": ast.unwrap_or(Value::Null),
        "parse_ok": parse_ok,
    })
}

/// Renders many files as JSONL, in the given order.
pub fn export_jsonl<'a>(files: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = String::new();
    for (path, src) in files {
        out.push_str(&export_source(path, src).to_string());
        out.push('\n');
    }
    out
}
