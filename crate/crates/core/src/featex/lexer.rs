//! Total lexers for the Arduino (C/C++-like) and SCL dialects.
//!
//! Neither lexer ever fails: bytes that start no known token become
//! single-character `Punct` tokens, unterminated comments and strings run to
//! the end of input.

use serde::{Deserialize, Serialize};

use crate::corpus::Dialect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    CommentText,
    IncludeTarget,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line on which the token starts.
    pub line: usize,
}

pub type TokenStream = Vec<Token>;

const C_KEYWORDS: &[&str] = &[
    "alignas", "alignof", "auto", "bool", "boolean", "break", "byte", "case", "catch", "char",
    "class", "const", "constexpr", "continue", "default", "delete", "do", "double", "else",
    "enum", "explicit", "extern", "false", "float", "for", "friend", "goto", "if", "inline",
    "int", "long", "namespace", "new", "nullptr", "operator", "private", "protected", "public",
    "register", "return", "short", "signed", "sizeof", "static", "struct", "switch", "template",
    "this", "throw", "true", "try", "typedef", "typename", "union", "unsigned", "using",
    "virtual", "void", "volatile", "while", "word",
];

// SCL keywords are case-insensitive; stored upper-case.
const SCL_KEYWORDS: &[&str] = &[
    "AND", "ANY", "ARRAY", "AT", "BEGIN", "BOOL", "BY", "BYTE", "CASE", "CHAR", "CONST",
    "CONSTANT", "DATE", "DINT", "DO", "DT", "DWORD", "ELSE", "ELSIF", "END_CASE", "END_CONST",
    "END_FOR", "END_FUNCTION", "END_FUNCTION_BLOCK", "END_IF", "END_PROGRAM", "END_REPEAT",
    "END_STRUCT", "END_TYPE", "END_VAR", "END_WHILE", "EXIT", "FALSE", "FOR", "FUNCTION",
    "FUNCTION_BLOCK", "IF", "INT", "LINT", "LREAL", "LWORD", "MOD", "NOT", "OF", "OR",
    "POINTER", "PROGRAM", "REAL", "REF", "REPEAT", "RETURN", "SINT", "STRING", "STRUCT", "THEN",
    "TIME", "TO", "TOD", "TRUE", "TYPE", "UDINT", "UINT", "ULINT", "UNTIL", "USINT", "VAR",
    "VAR_CONSTANT", "VAR_GLOBAL", "VAR_INPUT", "VAR_IN_OUT", "VAR_OUTPUT", "VAR_TEMP", "WHILE",
    "WORD", "WSTRING", "XOR",
];

pub fn is_keyword(word: &str, dialect: Dialect) -> bool {
    match dialect {
        Dialect::Arduino => C_KEYWORDS.binary_search(&word).is_ok(),
        Dialect::Scl => SCL_KEYWORDS.binary_search(&word.to_ascii_uppercase().as_str()).is_ok(),
    }
}

pub fn lex_source(text: &str, dialect: Dialect) -> TokenStream {
    Lexer::new(text, dialect).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    dialect: Dialect,
    out: TokenStream,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Lexer {
    fn new(src: &str, dialect: Dialect) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            dialect,
            out: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn push(&mut self, kind: TokenKind, text: String, line: usize) {
        self.out.push(Token { kind, text, line });
    }

    fn run(mut self) -> TokenStream {
        while let Some(c) = self.peek(0) {
            let line = self.line;
            if c.is_whitespace() {
                self.bump();
            } else if self.starts_with("//") {
                self.pos += 2;
                let body = self.take_while(|c| c != '\n');
                self.push(TokenKind::CommentText, body, line);
            } else if self.starts_with("/*") {
                self.pos += 2;
                let body = self.take_until("*/");
                self.push(TokenKind::CommentText, body, line);
            } else if self.dialect == Dialect::Scl && self.starts_with("(*") {
                self.pos += 2;
                let body = self.take_until("*)");
                self.push(TokenKind::CommentText, body, line);
            } else if self.dialect == Dialect::Arduino && c == '#' {
                self.directive(line);
            } else if c == '"' || c == '\'' {
                self.string(c, line);
            } else if c.is_ascii_digit() {
                self.number(line);
            } else if is_ident_start(c) {
                let word = self.take_while(is_ident_continue);
                let kind = if is_keyword(&word, self.dialect) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, word, line);
            } else {
                self.bump();
                self.push(TokenKind::Punct, c.to_string(), line);
            }
        }
        self.out
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    /// Consumes up to and including `end`; returns the text before it.
    fn take_until(&mut self, end: &str) -> String {
        let mut s = String::new();
        while self.peek(0).is_some() {
            if self.starts_with(end) {
                for _ in 0..end.chars().count() {
                    self.bump();
                }
                return s;
            }
            s.push(self.bump().expect("peeked"));
        }
        s
    }

    fn directive(&mut self, line: usize) {
        self.bump(); // '#'
        self.push(TokenKind::Punct, "#".into(), line);
        self.take_while(|c| c == ' ' || c == '\t');
        if !self.starts_with("include") {
            return;
        }
        let word = self.take_while(is_ident_continue);
        if word != "include" {
            self.push(TokenKind::Identifier, word, line);
            return;
        }
        self.push(TokenKind::Keyword, word, line);
        self.take_while(|c| c == ' ' || c == '\t');
        let close = match self.peek(0) {
            Some('<') => '>',
            Some('"') => '"',
            _ => return,
        };
        self.bump();
        let target = self.take_while(|c| c != close && c != '\n');
        if self.peek(0) == Some(close) {
            self.bump();
        }
        self.push(TokenKind::IncludeTarget, target, line);
    }

    fn string(&mut self, quote: char, line: usize) {
        self.bump();
        // C escapes with '\', SCL escapes with '$'.
        let escape = match self.dialect {
            Dialect::Arduino => '\\',
            Dialect::Scl => '$',
        };
        let mut body = String::new();
        while let Some(c) = self.peek(0) {
            if c == quote {
                self.bump();
                break;
            }
            if c == '\n' && self.dialect == Dialect::Arduino {
                break;
            }
            self.bump();
            body.push(c);
            if c == escape {
                if let Some(next) = self.bump() {
                    body.push(next);
                }
            }
        }
        self.push(TokenKind::StringLiteral, body, line);
    }

    fn number(&mut self, line: usize) {
        let mut text = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        // SCL based/typed literals such as 16#FF or 2#1010.
        if self.dialect == Dialect::Scl && self.peek(0) == Some('#') {
            if self.peek(1).is_some_and(|c| c.is_ascii_alphanumeric()) {
                self.bump();
                text.push('#');
                text.push_str(&self.take_while(|c| c.is_ascii_alphanumeric() || c == '_'));
            }
        }
        self.push(TokenKind::Number, text, line);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds(tokens: &[Token], kind: TokenKind) -> Vec<&str> {
        tokens.iter().filter(|t| t.kind == kind).map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn keyword_tables_are_sorted_for_binary_search() {
        assert!(C_KEYWORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(SCL_KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn include_directive_yields_target() {
        let toks = lex_source("#include <Servo.h>", Dialect::Arduino);
        assert_eq!(kinds(&toks, TokenKind::IncludeTarget), ["Servo.h"]);
        let toks = lex_source("#include \"config.h\"\n#define X 3", Dialect::Arduino);
        assert_eq!(kinds(&toks, TokenKind::IncludeTarget), ["config.h"]);
        assert_eq!(kinds(&toks, TokenKind::Identifier), ["define", "X"]);
    }

    #[test]
    fn scl_block_comment_keeps_body_without_delimiters() {
        let toks = lex_source("(* FAMILY: SIGPRO *)", Dialect::Scl);
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::CommentText);
        assert_eq!(toks[0].text, " FAMILY: SIGPRO ");
    }

    #[test]
    fn arduino_setup_body() {
        let toks = lex_source("void setup() { pinMode(13, OUTPUT); }", Dialect::Arduino);
        let idents = kinds(&toks, TokenKind::Identifier);
        assert!(idents.contains(&"setup") && idents.contains(&"pinMode") && idents.contains(&"OUTPUT"));
        assert_eq!(kinds(&toks, TokenKind::Number), ["13"]);
        assert_eq!(kinds(&toks, TokenKind::Keyword), ["void"]);
    }

    #[test]
    fn comments_strings_and_lines() {
        let src = "int a = 1; // set a\n/* multi\nline */ Serial.print(\"hi \\\" there\");\nchar c = 'x';";
        let toks = lex_source(src, Dialect::Arduino);
        assert_eq!(kinds(&toks, TokenKind::CommentText), [" set a", " multi\nline "]);
        assert_eq!(kinds(&toks, TokenKind::StringLiteral), ["hi \\\" there", "x"]);
        let print = toks.iter().find(|t| t.text == "print").unwrap();
        assert_eq!(print.line, 3);
    }

    #[test]
    fn scl_tokens() {
        let src = "FUNCTION_BLOCK ramp // slope\nVAR_INPUT x : REAL; END_VAR\nIF x > 16#FF THEN y := 'a$'b'; END_IF;";
        let toks = lex_source(src, Dialect::Scl);
        assert_eq!(kinds(&toks, TokenKind::CommentText), [" slope"]);
        assert_eq!(kinds(&toks, TokenKind::Number), ["16#FF"]);
        assert_eq!(kinds(&toks, TokenKind::StringLiteral), ["a$'b"]);
        assert!(kinds(&toks, TokenKind::Keyword).contains(&"END_IF"));
        assert_eq!(kinds(&toks, TokenKind::Identifier), ["ramp", "x", "x", "y"]);
    }

    #[test]
    fn unterminated_constructs_run_to_end() {
        let toks = lex_source("/* open", Dialect::Arduino);
        assert_eq!(toks[0].text, " open");
        let toks = lex_source("(* open", Dialect::Scl);
        assert_eq!(toks[0].text, " open");
        let toks = lex_source("\"open", Dialect::Arduino);
        assert_eq!(toks[0].kind, TokenKind::StringLiteral);
    }

    #[test]
    fn unknown_bytes_become_punct() {
        let toks = lex_source("a € b", Dialect::Arduino);
        assert_eq!(toks[1].kind, TokenKind::Punct);
        assert_eq!(toks[1].text, "€");
    }

    proptest! {
        #[test]
        fn lexing_is_total_and_lines_nondecreasing(src in "\\PC{0,200}", scl in any::<bool>()) {
            let dialect = if scl { Dialect::Scl } else { Dialect::Arduino };
            let toks = lex_source(&src, dialect);
            prop_assert!(toks.windows(2).all(|w| w[0].line <= w[1].line));
        }

        /// Every identifier in code that contains no comments, strings or
        /// directives survives lexing, in order.
        #[test]
        fn identifiers_are_preserved(
            words in prop::collection::vec("[a-zA-Z_][a-zA-Z0-9_]{0,8}", 1..20),
            seps in prop::collection::vec(prop::sample::select(vec![" ", "(", ")", ";", "\n", ", ", " + "]), 20),
        ) {
            let mut src = String::new();
            for (i, w) in words.iter().enumerate() {
                src.push_str(w);
                src.push_str(seps[i % seps.len()]);
            }
            let toks = lex_source(&src, Dialect::Arduino);
            let got: Vec<&str> = toks
                .iter()
                .filter(|t| matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword))
                .map(|t| t.text.as_str())
                .collect();
            let want: Vec<&str> = words.iter().map(String::as_str).collect();
            prop_assert_eq!(got, want);
        }
    }
}
