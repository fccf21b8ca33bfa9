//! Recursive-descent parser for a JavaScript subset, producing ESTree JSON
//! with esprima-style `range: [start, end]` offsets. Parenthesized
//! expressions keep the range of the inner expression, as esprima does.

use serde_json::{json, Map, Value};

use crate::lexer::{Token, TokenType};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_program(tokens: &[Token], src_len: usize) -> PResult<Value> {
    let mut p = Parser { toks: tokens, pos: 0, src_len };
    let mut body = Vec::new();
    while !p.at_end() {
        body.push(p.statement()?);
    }
    Ok(node("Program", 0, src_len, [("body", Value::Array(body)), ("sourceType", json!("script"))]))
}

fn node<const N: usize>(ty: &str, start: usize, end: usize, fields: [(&str, Value); N]) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), json!(ty));
    for (k, v) in fields {
        m.insert(k.into(), v);
    }
    m.insert("range".into(), json!([start, end]));
    Value::Object(m)
}

fn range_of(v: &Value) -> (usize, usize) {
    let r = &v["range"];
    (r[0].as_u64().unwrap_or(0) as usize, r[1].as_u64().unwrap_or(0) as usize)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    src_len: usize,
}

const ASSIGN_OPS: &[&str] =
    &["=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=", ">>>=", "&=", "|=", "^="];

fn binary_precedence(op: &str, allow_in: bool) -> Option<u8> {
    Some(match op {
        "??" => 1,
        "||" => 2,
        "&&" => 3,
        "|" => 4,
        "^" => 5,
        "&" => 6,
        "==" | "!=" | "===" | "!==" => 7,
        "<" | ">" | "<=" | ">=" | "instanceof" => 8,
        "in" if allow_in => 8,
        "<<" | ">>" | ">>>" => 9,
        "+" | "-" => 10,
        "*" | "/" | "%" => 11,
        "**" => 12,
        _ => return None,
    })
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_text(&self) -> &'a str {
        self.toks.get(self.pos).map(|t| t.text.as_str()).unwrap_or("")
    }

    fn is_punct(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.ty == TokenType::Punctuator && t.text == text)
    }

    fn is_keyword(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.ty == TokenType::Keyword && t.text == text)
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let offset = self.peek().map(|t| t.start).unwrap_or(self.src_len);
        Err(ParseError { offset, message: message.into() })
    }

    fn next(&mut self) -> PResult<&'a Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn expect(&mut self, text: &str) -> PResult<&'a Token> {
        match self.peek() {
            Some(t) if t.text == text && matches!(t.ty, TokenType::Punctuator | TokenType::Keyword) => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => self.err(format!("expected {text:?}, found {:?}", t.text)),
            None => self.err(format!("expected {text:?}, found end of input")),
        }
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos - 1].end
    }

    fn consume_semicolon(&mut self) {
        if self.is_punct(";") {
            self.pos += 1;
        }
    }

    fn statement(&mut self) -> PResult<Value> {
        let start = match self.peek() {
            Some(t) => t.start,
            None => return self.err("expected statement"),
        };
        if self.is_punct("{") {
            return self.block();
        }
        if self.is_punct(";") {
            self.pos += 1;
            return Ok(node("EmptyStatement", start, self.prev_end(), []));
        }
        let tok = self.peek().unwrap();
        if tok.ty == TokenType::Keyword {
            match tok.text.as_str() {
                "var" | "let" | "const" => {
                    let decl = self.var_declaration(true)?;
                    self.consume_semicolon();
                    let (s, _) = range_of(&decl);
                    let mut decl = decl;
                    decl["range"] = json!([s, self.prev_end()]);
                    return Ok(decl);
                }
                "function" => {
                    self.pos += 1;
                    let id = self.identifier()?;
                    let (params, body) = self.function_rest()?;
                    return Ok(node(
                        "FunctionDeclaration",
                        start,
                        self.prev_end(),
                        [("id", id), ("params", params), ("body", body), ("generator", json!(false)), ("async", json!(false))],
                    ));
                }
                "if" => {
                    self.pos += 1;
                    self.expect("(")?;
                    let test = self.expression(true)?;
                    self.expect(")")?;
                    let consequent = self.statement()?;
                    let alternate = if self.is_keyword("else") {
                        self.pos += 1;
                        self.statement()?
                    } else {
                        Value::Null
                    };
                    return Ok(node(
                        "IfStatement",
                        start,
                        self.prev_end(),
                        [("test", test), ("consequent", consequent), ("alternate", alternate)],
                    ));
                }
                "for" => return self.for_statement(start),
                "while" => {
                    self.pos += 1;
                    self.expect("(")?;
                    let test = self.expression(true)?;
                    self.expect(")")?;
                    let body = self.statement()?;
                    return Ok(node("WhileStatement", start, self.prev_end(), [("test", test), ("body", body)]));
                }
                "do" => {
                    self.pos += 1;
                    let body = self.statement()?;
                    if !self.is_keyword("while") {
                        return self.err("expected while");
                    }
                    self.pos += 1;
                    self.expect("(")?;
                    let test = self.expression(true)?;
                    self.expect(")")?;
                    self.consume_semicolon();
                    return Ok(node("DoWhileStatement", start, self.prev_end(), [("body", body), ("test", test)]));
                }
                "return" | "throw" => {
                    self.pos += 1;
                    let kind = tok.text.as_str();
                    let argument = if self.is_punct(";") || self.is_punct("}") || self.at_end() {
                        Value::Null
                    } else {
                        self.expression(true)?
                    };
                    if kind == "throw" && argument.is_null() {
                        return self.err("throw requires an argument");
                    }
                    self.consume_semicolon();
                    let ty = if kind == "return" { "ReturnStatement" } else { "ThrowStatement" };
                    return Ok(node(ty, start, self.prev_end(), [("argument", argument)]));
                }
                "break" | "continue" => {
                    self.pos += 1;
                    self.consume_semicolon();
                    let ty = if tok.text == "break" { "BreakStatement" } else { "ContinueStatement" };
                    return Ok(node(ty, start, self.prev_end(), [("label", Value::Null)]));
                }
                _ => {}
            }
        }
        let expression = self.expression(true)?;
        self.consume_semicolon();
        Ok(node("ExpressionStatement", start, self.prev_end(), [("expression", expression)]))
    }

    fn block(&mut self) -> PResult<Value> {
        let start = self.expect("{")?.start;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.at_end() {
                return self.err("unterminated block");
            }
            body.push(self.statement()?);
        }
        self.pos += 1;
        Ok(node("BlockStatement", start, self.prev_end(), [("body", Value::Array(body))]))
    }

    fn var_declaration(&mut self, allow_in: bool) -> PResult<Value> {
        let kw = self.next()?;
        let mut declarations = Vec::new();
        loop {
            let id = self.identifier()?;
            let (s, mut e) = range_of(&id);
            let init = if self.is_punct("=") {
                self.pos += 1;
                let init = self.assignment(allow_in)?;
                e = range_of(&init).1;
                init
            } else {
                Value::Null
            };
            declarations.push(node("VariableDeclarator", s, e, [("id", id), ("init", init)]));
            if self.is_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(node(
            "VariableDeclaration",
            kw.start,
            self.prev_end(),
            [("declarations", Value::Array(declarations)), ("kind", json!(kw.text))],
        ))
    }

    fn for_statement(&mut self, start: usize) -> PResult<Value> {
        self.pos += 1;
        self.expect("(")?;
        let init = if self.is_punct(";") {
            Value::Null
        } else if self.is_keyword("var") || self.is_keyword("let") || self.is_keyword("const") {
            self.var_declaration(false)?
        } else {
            self.expression(false)?
        };
        self.expect(";")?;
        let test = if self.is_punct(";") { Value::Null } else { self.expression(true)? };
        self.expect(";")?;
        let update = if self.is_punct(")") { Value::Null } else { self.expression(true)? };
        self.expect(")")?;
        let body = self.statement()?;
        Ok(node(
            "ForStatement",
            start,
            self.prev_end(),
            [("init", init), ("test", test), ("update", update), ("body", body)],
        ))
    }

    fn function_rest(&mut self) -> PResult<(Value, Value)> {
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.is_punct(")") {
            params.push(self.identifier()?);
            if self.is_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(")")?;
        let body = self.block()?;
        Ok((Value::Array(params), body))
    }

    fn identifier(&mut self) -> PResult<Value> {
        match self.peek() {
            Some(t) if t.ty == TokenType::Identifier => {
                self.pos += 1;
                Ok(node("Identifier", t.start, t.end, [("name", json!(t.text))]))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expression(&mut self, allow_in: bool) -> PResult<Value> {
        let first = self.assignment(allow_in)?;
        if !self.is_punct(",") {
            return Ok(first);
        }
        let start = range_of(&first).0;
        let mut exprs = vec![first];
        while self.is_punct(",") {
            self.pos += 1;
            exprs.push(self.assignment(allow_in)?);
        }
        let end = range_of(exprs.last().unwrap()).1;
        Ok(node("SequenceExpression", start, end, [("expressions", Value::Array(exprs))]))
    }

    fn assignment(&mut self, allow_in: bool) -> PResult<Value> {
        let left = self.conditional(allow_in)?;
        let op = self.peek_text();
        if self.peek().is_some_and(|t| t.ty == TokenType::Punctuator) && ASSIGN_OPS.contains(&op) {
            if !matches!(left["type"].as_str(), Some("Identifier" | "MemberExpression")) {
                return self.err("invalid assignment target");
            }
            self.pos += 1;
            let right = self.assignment(allow_in)?;
            let (s, _) = range_of(&left);
            let (_, e) = range_of(&right);
            return Ok(node(
                "AssignmentExpression",
                s,
                e,
                [("operator", json!(op)), ("left", left), ("right", right)],
            ));
        }
        Ok(left)
    }

    fn conditional(&mut self, allow_in: bool) -> PResult<Value> {
        let test = self.binary(0, allow_in)?;
        if !self.is_punct("?") {
            return Ok(test);
        }
        self.pos += 1;
        let consequent = self.assignment(true)?;
        self.expect(":")?;
        let alternate = self.assignment(allow_in)?;
        let (s, _) = range_of(&test);
        let (_, e) = range_of(&alternate);
        Ok(node(
            "ConditionalExpression",
            s,
            e,
            [("test", test), ("consequent", consequent), ("alternate", alternate)],
        ))
    }

    fn binary(&mut self, min_prec: u8, allow_in: bool) -> PResult<Value> {
        let mut left = self.unary()?;
        loop {
            let Some(tok) = self.peek() else { break };
            if !matches!(tok.ty, TokenType::Punctuator | TokenType::Keyword) {
                break;
            }
            let op = tok.text.as_str();
            let Some(prec) = binary_precedence(op, allow_in) else { break };
            if prec <= min_prec {
                break;
            }
            self.pos += 1;
            // `**` is right-associative.
            let right = if op == "**" { self.binary(prec - 1, allow_in)? } else { self.binary(prec, allow_in)? };
            let ty = if matches!(op, "||" | "&&" | "??") { "LogicalExpression" } else { "BinaryExpression" };
            let (s, _) = range_of(&left);
            let (_, e) = range_of(&right);
            left = node(ty, s, e, [("operator", json!(op)), ("left", left), ("right", right)]);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<Value> {
        let Some(tok) = self.peek() else { return self.err("expected expression") };
        let op = tok.text.as_str();
        let is_unary = match tok.ty {
            TokenType::Punctuator => matches!(op, "!" | "-" | "+" | "~"),
            TokenType::Keyword => matches!(op, "typeof" | "void" | "delete"),
            _ => false,
        };
        if is_unary {
            self.pos += 1;
            let argument = self.unary()?;
            let (_, e) = range_of(&argument);
            return Ok(node(
                "UnaryExpression",
                tok.start,
                e,
                [("operator", json!(op)), ("argument", argument), ("prefix", json!(true))],
            ));
        }
        if tok.ty == TokenType::Punctuator && (op == "++" || op == "--") {
            self.pos += 1;
            let argument = self.unary()?;
            let (_, e) = range_of(&argument);
            return Ok(node(
                "UpdateExpression",
                tok.start,
                e,
                [("operator", json!(op)), ("argument", argument), ("prefix", json!(true))],
            ));
        }
        let expr = self.call_member()?;
        if let Some(t) = self.peek() {
            if t.ty == TokenType::Punctuator && (t.text == "++" || t.text == "--") {
                self.pos += 1;
                let (s, _) = range_of(&expr);
                return Ok(node(
                    "UpdateExpression",
                    s,
                    t.end,
                    [("operator", json!(t.text)), ("argument", expr), ("prefix", json!(false))],
                ));
            }
        }
        Ok(expr)
    }

    fn arguments(&mut self) -> PResult<Vec<Value>> {
        self.expect("(")?;
        let mut args = Vec::new();
        while !self.is_punct(")") {
            args.push(self.assignment(true)?);
            if self.is_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn call_member(&mut self) -> PResult<Value> {
        let mut expr = if self.is_keyword("new") {
            let start = self.next()?.start;
            let callee = self.member_only()?;
            let args = if self.is_punct("(") { self.arguments()? } else { Vec::new() };
            node("NewExpression", start, self.prev_end(), [("callee", callee), ("arguments", Value::Array(args))])
        } else {
            self.primary()?
        };
        loop {
            let (s, _) = range_of(&expr);
            if self.is_punct(".") {
                self.pos += 1;
                let property = self.property_name()?;
                expr = node(
                    "MemberExpression",
                    s,
                    self.prev_end(),
                    [("computed", json!(false)), ("object", expr), ("property", property)],
                );
            } else if self.is_punct("[") {
                self.pos += 1;
                let property = self.expression(true)?;
                self.expect("]")?;
                expr = node(
                    "MemberExpression",
                    s,
                    self.prev_end(),
                    [("computed", json!(true)), ("object", expr), ("property", property)],
                );
            } else if self.is_punct("(") {
                let args = self.arguments()?;
                expr = node("CallExpression", s, self.prev_end(), [("callee", expr), ("arguments", Value::Array(args))]);
            } else {
                break;
            }
        }
        Ok(expr)
    }

    /// Callee of a `new` expression: member accesses without calls.
    fn member_only(&mut self) -> PResult<Value> {
        let mut expr = self.primary()?;
        loop {
            let (s, _) = range_of(&expr);
            if self.is_punct(".") {
                self.pos += 1;
                let property = self.property_name()?;
                expr = node(
                    "MemberExpression",
                    s,
                    self.prev_end(),
                    [("computed", json!(false)), ("object", expr), ("property", property)],
                );
            } else if self.is_punct("[") {
                self.pos += 1;
                let property = self.expression(true)?;
                self.expect("]")?;
                expr = node(
                    "MemberExpression",
                    s,
                    self.prev_end(),
                    [("computed", json!(true)), ("object", expr), ("property", property)],
                );
            } else {
                break;
            }
        }
        Ok(expr)
    }

    /// Identifier-like names after `.`; keywords are allowed as property names.
    fn property_name(&mut self) -> PResult<Value> {
        match self.peek() {
            Some(t) if matches!(t.ty, TokenType::Identifier | TokenType::Keyword | TokenType::Boolean | TokenType::Null) => {
                self.pos += 1;
                Ok(node("Identifier", t.start, t.end, [("name", json!(t.text))]))
            }
            _ => self.err("expected property name"),
        }
    }

    fn primary(&mut self) -> PResult<Value> {
        let Some(tok) = self.peek() else { return self.err("expected expression") };
        match tok.ty {
            TokenType::Identifier => self.identifier(),
            TokenType::Numeric | TokenType::String | TokenType::Boolean | TokenType::Null => {
                self.pos += 1;
                Ok(literal(tok))
            }
            TokenType::Keyword if tok.text == "this" => {
                self.pos += 1;
                Ok(node("ThisExpression", tok.start, tok.end, []))
            }
            TokenType::Keyword if tok.text == "function" => {
                self.pos += 1;
                let id = if self.peek().is_some_and(|t| t.ty == TokenType::Identifier) {
                    self.identifier()?
                } else {
                    Value::Null
                };
                let (params, body) = self.function_rest()?;
                Ok(node(
                    "FunctionExpression",
                    tok.start,
                    self.prev_end(),
                    [("id", id), ("params", params), ("body", body), ("generator", json!(false)), ("async", json!(false))],
                ))
            }
            TokenType::Punctuator if tok.text == "(" => {
                self.pos += 1;
                let inner = self.expression(true)?;
                self.expect(")")?;
                Ok(inner)
            }
            TokenType::Punctuator if tok.text == "[" => {
                self.pos += 1;
                let mut elements = Vec::new();
                while !self.is_punct("]") {
                    if self.is_punct(",") {
                        self.pos += 1;
                        elements.push(Value::Null);
                        continue;
                    }
                    elements.push(self.assignment(true)?);
                    if self.is_punct(",") {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.expect("]")?;
                Ok(node("ArrayExpression", tok.start, self.prev_end(), [("elements", Value::Array(elements))]))
            }
            TokenType::Punctuator if tok.text == "{" => self.object(),
            _ => self.err(format!("unexpected token {:?}", tok.text)),
        }
    }

    fn object(&mut self) -> PResult<Value> {
        let start = self.expect("{")?.start;
        let mut properties = Vec::new();
        while !self.is_punct("}") {
            let key_tok = self.next()?;
            let key = match key_tok.ty {
                TokenType::Identifier | TokenType::Keyword | TokenType::Boolean | TokenType::Null => {
                    node("Identifier", key_tok.start, key_tok.end, [("name", json!(key_tok.text))])
                }
                TokenType::String | TokenType::Numeric => literal(key_tok),
                _ => return self.err("expected property key"),
            };
            let (value, shorthand) = if self.is_punct(":") {
                self.pos += 1;
                (self.assignment(true)?, false)
            } else if key_tok.ty == TokenType::Identifier {
                (key.clone(), true)
            } else {
                return self.err("expected ':'");
            };
            let (_, e) = range_of(&value);
            properties.push(node(
                "Property",
                key_tok.start,
                e,
                [
                    ("key", key),
                    ("computed", json!(false)),
                    ("value", value),
                    ("kind", json!("init")),
                    ("method", json!(false)),
                    ("shorthand", json!(shorthand)),
                ],
            ));
            if self.is_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect("}")?;
        Ok(node("ObjectExpression", start, self.prev_end(), [("properties", Value::Array(properties))]))
    }
}

fn literal(tok: &Token) -> Value {
    let value = match tok.ty {
        TokenType::Numeric => {
            let n = if let Some(hex) = tok.text.strip_prefix("0x").or_else(|| tok.text.strip_prefix("0X")) {
                i64::from_str_radix(hex, 16).map(|v| v as f64).unwrap_or(f64::NAN)
            } else {
                tok.text.parse::<f64>().unwrap_or(f64::NAN)
            };
            if n.fract() == 0.0 && n.abs() < 9.0e15 {
                json!(n as i64)
            } else {
                json!(n)
            }
        }
        TokenType::String => json!(unquote(&tok.text)),
        TokenType::Boolean => json!(tok.text == "true"),
        _ => Value::Null,
    };
    node("Literal", tok.start, tok.end, [("value", value), ("raw", json!(tok.text))])
}

fn unquote(raw: &str) -> String {
    let inner = &raw[1..raw.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}
