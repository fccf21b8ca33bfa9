//! Generic ESTree tree with token-index spans.
//!
//! Any object carrying a string `type` becomes a node. Object-valued fields
//! become named child slots, arrays of nodes become list slots (holes are
//! kept as `None`), and scalar fields are kept as attributes. Source ranges
//! are read from esprima-style `range: [start, end]` or acorn-style
//! `start`/`end`, and mapped onto the file's tokens.

use serde_json::{Map, Value};

use crate::corpus::Token;

/// Half-open token index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Child {
    Node(AstNode),
    List(Vec<Option<AstNode>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstNode {
    pub node_type: String,
    pub span: Option<TokenSpan>,
    /// Source offsets `[start, end)`.
    pub range: Option<(usize, usize)>,
    pub attrs: Map<String, Value>,
    pub children: Vec<(String, Child)>,
}

impl AstNode {
    /// Builds the tree for `root` against the file's `tokens`. Returns `None`
    /// when `root` is not a typed node.
    pub fn from_estree(root: &Value, tokens: &[Token]) -> Option<AstNode> {
        let starts: Vec<usize> = tokens.iter().map(|t| t.start).collect();
        build(root, &starts)
    }

    pub fn is(&self, ty: &str) -> bool {
        self.node_type == ty
    }

    pub fn child(&self, name: &str) -> Option<&AstNode> {
        self.children.iter().find_map(|(k, c)| match c {
            Child::Node(n) if k == name => Some(n),
            _ => None,
        })
    }

    pub fn list(&self, name: &str) -> Option<&[Option<AstNode>]> {
        self.children.iter().find_map(|(k, c)| match c {
            Child::List(l) if k == name => Some(l.as_slice()),
            _ => None,
        })
    }

    pub fn attr_str(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).and_then(Value::as_str)
    }

    pub fn attr_bool(&self, name: &str) -> bool {
        self.attrs.get(name).and_then(Value::as_bool).unwrap_or(false)
    }

    /// Length of the node's source text, when its range is known.
    pub fn source_len(&self) -> Option<usize> {
        self.range.map(|(s, e)| e.saturating_sub(s))
    }

    pub fn first_token(&self) -> Option<usize> {
        self.span.filter(|s| s.end > s.start).map(|s| s.start)
    }

    /// Preorder traversal in source order of child slots.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for (_, c) in &self.children {
            match c {
                Child::Node(n) => n.walk(f),
                Child::List(l) => {
                    for n in l.iter().flatten() {
                        n.walk(f);
                    }
                }
            }
        }
    }
}

fn range_of(obj: &Map<String, Value>) -> Option<(usize, usize)> {
    if let Some(Value::Array(r)) = obj.get("range") {
        if let (Some(s), Some(e)) = (r.first().and_then(Value::as_u64), r.get(1).and_then(Value::as_u64)) {
            return Some((s as usize, e as usize));
        }
    }
    match (obj.get("start").and_then(Value::as_u64), obj.get("end").and_then(Value::as_u64)) {
        (Some(s), Some(e)) => Some((s as usize, e as usize)),
        _ => None,
    }
}

fn child_start(c: &Child) -> usize {
    match c {
        Child::Node(n) => n.range.map_or(usize::MAX, |r| r.0),
        Child::List(l) => l.iter().flatten().find_map(|n| n.range).map_or(usize::MAX, |r| r.0),
    }
}

fn build(v: &Value, starts: &[usize]) -> Option<AstNode> {
    let obj = v.as_object()?;
    let node_type = obj.get("type")?.as_str()?.to_string();
    let mut attrs = Map::new();
    let mut children = Vec::new();
    for (k, val) in obj {
        match k.as_str() {
            "type" | "range" | "loc" | "start" | "end" => continue,
            _ => {}
        }
        match val {
            Value::Object(_) => match build(val, starts) {
                Some(n) => children.push((k.clone(), Child::Node(n))),
                // e.g. a regex literal's `regex: {pattern, flags}`
                None => {
                    attrs.insert(k.clone(), val.clone());
                }
            },
            Value::Array(items) if items.iter().any(|i| i.get("type").is_some()) => {
                let list = items.iter().map(|i| build(i, starts)).collect();
                children.push((k.clone(), Child::List(list)));
            }
            Value::Array(items) if items.is_empty() => {
                children.push((k.clone(), Child::List(Vec::new())));
            }
            _ => {
                attrs.insert(k.clone(), val.clone());
            }
        }
    }
    // JSON objects carry no field order we can rely on; visit children in
    // source order.
    children.sort_by_key(|(_, c)| child_start(c));
    let range = range_of(obj);
    let span = range.map(|(s, e)| TokenSpan {
        start: starts.partition_point(|&t| t < s),
        end: starts.partition_point(|&t| t < e),
    });
    Some(AstNode { node_type, span, range, attrs, children })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FileRecord;

    fn parse(src: &str) -> (FileRecord, AstNode) {
        let rec = FileRecord::from_exported(&minijs::export_source("t.js", src), 0).unwrap();
        let ast = AstNode::from_estree(rec.ast.as_ref().unwrap(), &rec.tokens).unwrap();
        (rec, ast)
    }

    #[test]
    fn spans_map_to_tokens() {
        let (rec, ast) = parse("a.f(x + 1, y);");
        let mut call = None;
        ast.walk(&mut |n| {
            if n.is("CallExpression") {
                call = Some(n.clone());
            }
        });
        let call = call.unwrap();
        assert_eq!(call.span, Some(TokenSpan { start: 0, end: 10 }));
        let args = call.list("arguments").unwrap();
        let first = args[0].as_ref().unwrap();
        assert_eq!(rec.tokens[first.first_token().unwrap()].text, "x");
    }

    #[test]
    fn child_spans_nest_in_parent_spans() {
        let (_, ast) = parse("function f(a) { if (a.b[c] === null) { return g(a, [1, 2]); } }");
        fn check(n: &AstNode) {
            for (_, c) in &n.children {
                let kids: Vec<&AstNode> = match c {
                    Child::Node(k) => vec![k],
                    Child::List(l) => l.iter().flatten().collect(),
                };
                for k in kids {
                    if let (Some(p), Some(s)) = (n.span, k.span) {
                        assert!(p.contains(&s), "{} !⊇ {}", n.node_type, k.node_type);
                    }
                    check(k);
                }
            }
        }
        check(&ast);
    }

    #[test]
    fn acorn_style_offsets_are_accepted() {
        let v = serde_json::json!({"type": "Identifier", "name": "x", "start": 4, "end": 5});
        let tokens = vec![
            Token { kind: crate::corpus::TokenKind::Keyword, text: "var".into(), index: 0, start: 0, end: 3 },
            Token { kind: crate::corpus::TokenKind::Identifier, text: "x".into(), index: 1, start: 4, end: 5 },
        ];
        let n = AstNode::from_estree(&v, &tokens).unwrap();
        assert_eq!(n.span, Some(TokenSpan { start: 1, end: 2 }));
        assert_eq!(n.attr_str("name"), Some("x"));
    }
}
