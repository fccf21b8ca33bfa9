//! Tokenizer for the supported JavaScript subset. Token type names follow
//! esprima (`Identifier`, `Keyword`, `Punctuator`, `Numeric`, `String`,
//! `Boolean`, `Null`).

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenType {
    Identifier,
    Keyword,
    Punctuator,
    Numeric,
    String,
    Boolean,
    Null,
}

impl TokenType {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenType::Identifier => "Identifier",
            TokenType::Keyword => "Keyword",
            TokenType::Punctuator => "Punctuator",
            TokenType::Numeric => "Numeric",
            TokenType::String => "String",
            TokenType::Boolean => "Boolean",
            TokenType::Null => "Null",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub ty: TokenType,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

const KEYWORDS: &[&str] = &[
    "break", "case", "catch", "class", "const", "continue", "debugger", "default", "delete", "do",
    "else", "export", "extends", "finally", "for", "function", "if", "import", "in", "instanceof",
    "let", "new", "return", "super", "switch", "this", "throw", "try", "typeof", "var", "void",
    "while", "with",
];

// Longest first so a greedy scan picks the right operator.
const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "=>", "==", "!=", "<=", ">=", "&&",
    "||", "??", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**",
    "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^",
    "!", "~", "?", ":", "=", ".",
];

/// Tokenizes `src`. On a lexical error, returns the tokens scanned so far
/// together with the error.
pub fn tokenize(src: &str) -> (Vec<Token>, Option<LexError>) {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(off) => i = i + 2 + off + 2,
                None => {
                    return (
                        tokens,
                        Some(LexError { offset: i, message: "unterminated comment".into() }),
                    )
                }
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
            {
                i += 1;
            }
            let word = &src[start..i];
            let ty = match word {
                "true" | "false" => TokenType::Boolean,
                "null" => TokenType::Null,
                w if KEYWORDS.contains(&w) => TokenType::Keyword,
                _ => TokenType::Identifier,
            };
            tokens.push(Token { ty, text: word.to_string(), start, end: i });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            if c == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X')) {
                i += 2;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            tokens.push(Token { ty: TokenType::Numeric, text: src[start..i].to_string(), start, end: i });
            continue;
        }
        if c == b'"' || c == b'\'' {
            i += 1;
            let mut closed = false;
            while i < bytes.len() {
                match bytes[i] {
                    b'\\' => i += 2,
                    b'\n' => break,
                    q if q == c => {
                        i += 1;
                        closed = true;
                        break;
                    }
                    _ => i += 1,
                }
            }
            if !closed {
                return (tokens, Some(LexError { offset: start, message: "unterminated string".into() }));
            }
            tokens.push(Token { ty: TokenType::String, text: src[start..i].to_string(), start, end: i });
            continue;
        }
        match PUNCTUATORS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                i += p.len();
                tokens.push(Token { ty: TokenType::Punctuator, text: p.to_string(), start, end: i });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return (
                    tokens,
                    Some(LexError { offset: i, message: format!("unexpected character {ch:?}") }),
                );
            }
        }
    }
    (tokens, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_decl_has_five_tokens() {
        let (toks, err) = tokenize("var x = 1;");
        assert!(err.is_none());
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["var", "x", "=", "1", ";"]);
        assert_eq!(toks[0].ty, TokenType::Keyword);
        assert_eq!(toks[3].ty, TokenType::Numeric);
    }

    #[test]
    fn longest_punctuator_wins() {
        let (toks, _) = tokenize("a !== b >>>= c");
        assert_eq!(toks[1].text, "!==");
        assert_eq!(toks[3].text, ">>>=");
    }

    #[test]
    fn comments_are_dropped() {
        let (toks, err) = tokenize("// hi\na /* x */ + b");
        assert!(err.is_none());
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[0].start, 6);
    }

    #[test]
    fn unterminated_string_reports_error() {
        let (toks, err) = tokenize("f('abc");
        assert_eq!(toks.len(), 2);
        assert!(err.is_some());
    }
}
