//! Firmware header emission (`dataArray.h`) and its inverse.
//!
//! Emitted layout, LF line endings, trailing newline:
//!
//! ```text
//! // Auto-generated: Sim2Real movement sequence
//! #ifndef DATA_ARRAY_H
//! #define DATA_ARRAY_H
//! const int DATA_ARRAY_FORMAT = 1;
//! const int DATA_ARRAY_LEN = 4;
//! const int data_array[4] = {0, 0, 4, 0};
//! #endif
//! ```
//!
//! An empty payload keeps the array declaration compilable:
//! `DATA_ARRAY_LEN = 0` with `data_array[1] = {0}`.

use std::fmt::Write as _;

use thiserror::Error;

pub const BANNER: &str = "// Auto-generated: Sim2Real movement sequence";
const GUARD: &str = "DATA_ARRAY_H";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeaderError {
    #[error("IllegalCodeForFormat: value {code} at index {index} is outside 0-{max} for format {format}")]
    IllegalCodeForFormat {
        index: usize,
        code: i64,
        max: u8,
        format: u8,
    },
    #[error("MalformedHeader at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
}

/// Payload interpretation, stored in the header as `DATA_ARRAY_FORMAT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeaderFormat {
    /// Grid actions 0-3.
    RawActions = 0,
    /// Gait commands 0-5.
    Commands = 1,
}

impl HeaderFormat {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: i64) -> Option<Self> {
        match tag {
            0 => Some(HeaderFormat::RawActions),
            1 => Some(HeaderFormat::Commands),
            _ => None,
        }
    }

    pub fn max_code(self) -> u8 {
        match self {
            HeaderFormat::RawActions => 3,
            HeaderFormat::Commands => 5,
        }
    }

    fn check(self, payload: impl IntoIterator<Item = i64>) -> Result<(), HeaderError> {
        for (index, code) in payload.into_iter().enumerate() {
            if !(0..=self.max_code() as i64).contains(&code) {
                return Err(HeaderError::IllegalCodeForFormat {
                    index,
                    code,
                    max: self.max_code(),
                    format: self.tag(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderArtifact {
    pub format: HeaderFormat,
    pub payload: Vec<u8>,
    pub text: String,
}

impl HeaderArtifact {
    pub fn new(format: HeaderFormat, payload: Vec<u8>) -> Result<Self, HeaderError> {
        let text = emit_header(&payload, format)?;
        Ok(HeaderArtifact {
            format,
            payload,
            text,
        })
    }
}

pub fn emit_header(payload: &[u8], format: HeaderFormat) -> Result<String, HeaderError> {
    format.check(payload.iter().map(|&c| c as i64))?;
    let mut out = String::new();
    let _ = writeln!(out, "{BANNER}");
    let _ = writeln!(out, "#ifndef {GUARD}");
    let _ = writeln!(out, "#define {GUARD}");
    let _ = writeln!(out, "const int DATA_ARRAY_FORMAT = {};", format.tag());
    let _ = writeln!(out, "const int DATA_ARRAY_LEN = {};", payload.len());
    if payload.is_empty() {
        let _ = writeln!(out, "const int data_array[1] = {{0}};");
    } else {
        let values: Vec<String> = payload.iter().map(u8::to_string).collect();
        let _ = writeln!(
            out,
            "const int data_array[{}] = {{{}}};",
            payload.len(),
            values.join(", ")
        );
    }
    let _ = writeln!(out, "#endif");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Comment(&'a str),
    Directive(&'a str),
    Ident(&'a str),
    Int(i64),
    Punct(char),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, reason: impl Into<String>) -> HeaderError {
        HeaderError::MalformedHeader {
            offset,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let rest = &self.src[self.pos..];
        let end = rest.find(|c: char| !f(c)).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    /// Next token with its starting byte offset, or `None` at end of input.
    fn next(&mut self) -> Result<Option<(usize, Tok<'a>)>, HeaderError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.src[self.pos..].chars().next() else {
            return Ok(None);
        };
        let is_ident = |c: char| c.is_ascii_alphanumeric() || c == '_';
        let tok = if self.src[self.pos..].starts_with("//") {
            Tok::Comment(self.take_while(|c| c != '\n'))
        } else if c == '#' {
            self.pos += 1;
            let name = self.take_while(is_ident);
            Tok::Directive(name)
        } else if c.is_ascii_digit() || c == '-' {
            self.pos += c.len_utf8();
            self.take_while(|c| c.is_ascii_digit());
            let text = &self.src[start..self.pos];
            Tok::Int(
                text.parse()
                    .map_err(|_| self.err(start, format!("bad integer literal {text:?}")))?,
            )
        } else if c.is_ascii_alphabetic() || c == '_' {
            Tok::Ident(self.take_while(is_ident))
        } else if "=;[]{},".contains(c) {
            self.pos += 1;
            Tok::Punct(c)
        } else {
            return Err(self.err(start, format!("unexpected character {c:?}")));
        };
        Ok(Some((start, tok)))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Tok<'a>), HeaderError> {
        let end = self.lex.src.len();
        self.lex.next()?.ok_or_else(|| {
            self.lex
                .err(end, format!("unexpected end of input, expected {what}"))
        })
    }

    fn expect(&mut self, want: Tok<'_>) -> Result<usize, HeaderError> {
        let (at, got) = self.next(&format!("{want:?}"))?;
        if got != want {
            return Err(self
                .lex
                .err(at, format!("expected {want:?}, found {got:?}")));
        }
        Ok(at)
    }

    fn int(&mut self, what: &str) -> Result<(usize, i64), HeaderError> {
        match self.next(what)? {
            (at, Tok::Int(v)) => Ok((at, v)),
            (at, other) => Err(self
                .lex
                .err(at, format!("expected {what}, found {other:?}"))),
        }
    }

    fn declaration(&mut self, name: &str) -> Result<(usize, i64), HeaderError> {
        self.expect(Tok::Ident("const"))?;
        self.expect(Tok::Ident("int"))?;
        self.expect(Tok::Ident(name))?;
        self.expect(Tok::Punct('='))?;
        let v = self.int(name)?;
        self.expect(Tok::Punct(';'))?;
        Ok(v)
    }
}

/// Parses text in the emitted grammar. Any amount of whitespace may separate
/// tokens; nothing else may differ.
pub fn parse_header(text: &str) -> Result<(HeaderFormat, Vec<u8>), HeaderError> {
    let mut p = Parser {
        lex: Lexer { src: text, pos: 0 },
    };
    let (at, banner) = p.next("banner comment")?;
    match banner {
        Tok::Comment(c) if c.split_whitespace().eq(BANNER.split_whitespace()) => {}
        other => {
            return Err(p
                .lex
                .err(at, format!("expected banner comment, found {other:?}")))
        }
    }
    p.expect(Tok::Directive("ifndef"))?;
    p.expect(Tok::Ident(GUARD))?;
    p.expect(Tok::Directive("define"))?;
    p.expect(Tok::Ident(GUARD))?;

    let (fmt_at, tag) = p.declaration("DATA_ARRAY_FORMAT")?;
    let format = HeaderFormat::from_tag(tag)
        .ok_or_else(|| p.lex.err(fmt_at, format!("unknown format tag {tag}")))?;
    let (len_at, len) = p.declaration("DATA_ARRAY_LEN")?;
    if len < 0 {
        return Err(p.lex.err(len_at, "negative DATA_ARRAY_LEN"));
    }

    p.expect(Tok::Ident("const"))?;
    p.expect(Tok::Ident("int"))?;
    p.expect(Tok::Ident("data_array"))?;
    p.expect(Tok::Punct('['))?;
    let (dim_at, dim) = p.int("array dimension")?;
    let want_dim = len.max(1);
    if dim != want_dim {
        return Err(p.lex.err(
            dim_at,
            format!("array dimension {dim} does not match DATA_ARRAY_LEN {len}"),
        ));
    }
    p.expect(Tok::Punct(']'))?;
    p.expect(Tok::Punct('='))?;
    let open_at = p.expect(Tok::Punct('{'))?;

    let mut values = Vec::new();
    loop {
        let (at, tok) = p.next("array element or '}'")?;
        match tok {
            Tok::Punct('}') if values.is_empty() => break,
            Tok::Int(v) => values.push(v),
            other => return Err(p.lex.err(at, format!("expected integer, found {other:?}"))),
        }
        let (at, tok) = p.next("',' or '}'")?;
        match tok {
            Tok::Punct(',') => {}
            Tok::Punct('}') => break,
            other => {
                return Err(p
                    .lex
                    .err(at, format!("expected ',' or '}}', found {other:?}")))
            }
        }
    }
    p.expect(Tok::Punct(';'))?;
    p.expect(Tok::Directive("endif"))?;
    if let Some((at, tok)) = p.lex.next()? {
        return Err(p.lex.err(at, format!("trailing token {tok:?}")));
    }

    let payload = if len == 0 {
        if values != [0] {
            return Err(p
                .lex
                .err(open_at, "empty program must use the initializer {0}"));
        }
        Vec::new()
    } else {
        if values.len() as i64 != len {
            return Err(p.lex.err(
                open_at,
                format!(
                    "DATA_ARRAY_LEN is {len} but {} literals follow",
                    values.len()
                ),
            ));
        }
        values
    };
    format.check(payload.iter().copied())?;
    Ok((format, payload.into_iter().map(|v| v as u8).collect()))
}
