use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Digits, optional fraction and exponent, kept as text.
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Arrow,
    Slash,
    Eq,
    Amp,
    Pipe,
    Bang,
    Percent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Arrow => "->",
            Tok::Slash => "/",
            Tok::Eq => "=",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Bang => "!",
            Tok::Percent => "%",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// No whitespace or comment between this token and the previous one.
    pub glued: bool,
}

pub fn lex(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lx = Lexer { text, pos: 0, line: 1, col: 1, tokens: Vec::new(), diags: Vec::new(), glued: false };
    lx.run();
    (lx.tokens, lx.diags)
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
    glued: bool,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.text[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span { offset: self.pos, len: 0, line: self.line, column: self.col }
    }

    fn push(&mut self, tok: Tok, start: Span) {
        let span = Span { len: self.pos - start.offset, ..start };
        self.tokens.push(Token { tok, span, glued: self.glued });
        self.glued = true;
    }

    fn run(&mut self) {
        while let Some(c) = self.peek() {
            let start = self.here();
            if c.is_whitespace() {
                self.bump();
                self.glued = false;
                continue;
            }
            if c == '/' && self.peek2() == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                self.glued = false;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let s = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word = self.text[s..self.pos].to_string();
                self.push(Tok::Ident(word), start);
                continue;
            }
            let digit_next = matches!(self.peek2(), Some(d) if d.is_ascii_digit());
            if c.is_ascii_digit() || ((c == '.' || c == '-') && digit_next) {
                self.number(start);
                continue;
            }
            self.bump();
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                ',' => Tok::Comma,
                '/' => Tok::Slash,
                '=' => Tok::Eq,
                '&' => Tok::Amp,
                '|' => Tok::Pipe,
                '!' => Tok::Bang,
                '%' => Tok::Percent,
                '-' if self.peek() == Some('>') => {
                    self.bump();
                    Tok::Arrow
                }
                other => {
                    let span = Span { len: self.pos - start.offset, ..start };
                    self.diags
                        .push(Diagnostic::error(format!("unexpected character `{}`", other.escape_debug()), span));
                    self.glued = false;
                    continue;
                }
            };
            self.push(tok, start);
        }
        let end = self.here();
        self.tokens.push(Token { tok: Tok::Eof, span: end, glued: false });
    }

    fn number(&mut self, start: Span) {
        let s = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        let digits = |lx: &mut Self| {
            while matches!(lx.peek(), Some(c) if c.is_ascii_digit()) {
                lx.bump();
            }
        };
        digits(self);
        if self.peek() == Some('.') && matches!(self.peek2(), Some(d) if d.is_ascii_digit()) {
            self.bump();
            digits(self);
        }
        // Exponent only when digits follow, so `5e-10` is one number while
        // `2s` keeps its unit.
        if matches!(self.peek(), Some('e' | 'E')) {
            let rest = &self.text[self.pos + 1..];
            let sign = rest.starts_with(['+', '-']) as usize;
            if rest[sign..].starts_with(|c: char| c.is_ascii_digit()) {
                self.bump();
                if sign == 1 {
                    self.bump();
                }
                digits(self);
            }
        }
        let text = self.text[s..self.pos].to_string();
        self.push(Tok::Number(text), start);
    }
}
