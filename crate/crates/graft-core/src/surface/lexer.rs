//! Hand-rolled lexer for the traversal DSL. Line comments start with `//`.

use crate::error::{Error, Result, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    // keywords
    KwAbstract,
    KwAlias,
    KwArgs,
    KwBlock,
    KwBool,
    KwCast,
    KwDelete,
    KwElse,
    KwFalse,
    KwFlags,
    KwFloat,
    KwFuse,
    KwGroup,
    KwIf,
    KwInput,
    KwInt,
    KwMain,
    KwNew,
    KwNode,
    KwOn,
    KwOverride,
    KwPart,
    KwPure,
    KwReturn,
    KwSelfcall,
    KwString,
    KwStub,
    KwThis,
    KwTraversal,
    KwTree,
    KwTrue,
    KwVirtual,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Colon,
    ColonColon,
    Arrow,
    Dot,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("float `{v}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwAbstract => "abstract",
            Tok::KwAlias => "alias",
            Tok::KwArgs => "args",
            Tok::KwBlock => "block",
            Tok::KwBool => "bool",
            Tok::KwCast => "cast",
            Tok::KwDelete => "delete",
            Tok::KwElse => "else",
            Tok::KwFalse => "false",
            Tok::KwFlags => "flags",
            Tok::KwFloat => "float",
            Tok::KwFuse => "fuse",
            Tok::KwGroup => "group",
            Tok::KwIf => "if",
            Tok::KwInput => "input",
            Tok::KwInt => "int",
            Tok::KwMain => "main",
            Tok::KwNew => "new",
            Tok::KwNode => "node",
            Tok::KwOn => "on",
            Tok::KwOverride => "override",
            Tok::KwPart => "part",
            Tok::KwPure => "pure",
            Tok::KwReturn => "return",
            Tok::KwSelfcall => "selfcall",
            Tok::KwString => "string",
            Tok::KwStub => "stub",
            Tok::KwThis => "this",
            Tok::KwTraversal => "traversal",
            Tok::KwTree => "tree",
            Tok::KwTrue => "true",
            Tok::KwVirtual => "virtual",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::ColonColon => "::",
            Tok::Arrow => "->",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::Eq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Eof => "<eof>",
            _ => unreachable!(),
        }
    }
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "abstract" => Tok::KwAbstract,
        "alias" => Tok::KwAlias,
        "args" => Tok::KwArgs,
        "block" => Tok::KwBlock,
        "bool" => Tok::KwBool,
        "cast" => Tok::KwCast,
        "delete" => Tok::KwDelete,
        "else" => Tok::KwElse,
        "false" => Tok::KwFalse,
        "flags" => Tok::KwFlags,
        "float" => Tok::KwFloat,
        "fuse" => Tok::KwFuse,
        "group" => Tok::KwGroup,
        "if" => Tok::KwIf,
        "input" => Tok::KwInput,
        "int" => Tok::KwInt,
        "main" => Tok::KwMain,
        "new" => Tok::KwNew,
        "node" => Tok::KwNode,
        "on" => Tok::KwOn,
        "override" => Tok::KwOverride,
        "part" => Tok::KwPart,
        "pure" => Tok::KwPure,
        "return" => Tok::KwReturn,
        "selfcall" => Tok::KwSelfcall,
        "string" => Tok::KwString,
        "stub" => Tok::KwStub,
        "this" => Tok::KwThis,
        "traversal" => Tok::KwTraversal,
        "tree" => Tok::KwTree,
        "true" => Tok::KwTrue,
        "virtual" => Tok::KwVirtual,
        _ => return None,
    })
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Lexed>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '/' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = keyword(&word).unwrap_or(Tok::Ident(word));
            out.push(Lexed { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            if c == '0' && i + 1 < chars.len() && chars[i + 1] == 'b' {
                bump!();
                bump!();
                let dstart = i;
                while i < chars.len() && (chars[i] == '0' || chars[i] == '1') {
                    bump!();
                }
                if i == dstart {
                    return Err(Error::Syntax {
                        span,
                        expected: "binary digits".into(),
                        found: "`0b`".into(),
                    });
                }
                let digits: String = chars[dstart..i].iter().collect();
                let v = i64::from_str_radix(&digits, 2).map_err(|_| Error::Syntax {
                    span,
                    expected: "binary literal".into(),
                    found: digits.clone(),
                })?;
                out.push(Lexed {
                    tok: Tok::Int(v),
                    span,
                });
                continue;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| Error::Syntax {
                    span,
                    expected: "float literal".into(),
                    found: text.clone(),
                })?)
            } else {
                Tok::Int(text.parse().map_err(|_| Error::Syntax {
                    span,
                    expected: "integer literal".into(),
                    found: text.clone(),
                })?)
            };
            out.push(Lexed { tok, span });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(Error::Syntax {
                        span,
                        expected: "closing `\"`".into(),
                        found: "end of input".into(),
                    });
                }
                let ch = chars[i];
                if ch == '"' {
                    bump!();
                    break;
                }
                if ch == '\\' {
                    bump!();
                    if i >= chars.len() {
                        return Err(Error::Syntax {
                            span,
                            expected: "escape character".into(),
                            found: "end of input".into(),
                        });
                    }
                    let esc = chars[i];
                    bump!();
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        '\\' => '\\',
                        '"' => '"',
                        other => {
                            return Err(Error::Syntax {
                                span,
                                expected: "valid escape".into(),
                                found: format!("`\\{other}`"),
                            })
                        }
                    });
                    continue;
                }
                s.push(ch);
                bump!();
            }
            out.push(Lexed {
                tok: Tok::Str(s),
                span,
            });
            continue;
        }
        // punctuation
        let two = if i + 1 < chars.len() {
            Some((chars[i], chars[i + 1]))
        } else {
            None
        };
        let tok2 = match two {
            Some(('-', '>')) => Some(Tok::Arrow),
            Some((':', ':')) => Some(Tok::ColonColon),
            Some(('=', '=')) => Some(Tok::Eq),
            Some(('!', '=')) => Some(Tok::Ne),
            Some(('<', '=')) => Some(Tok::Le),
            Some(('>', '=')) => Some(Tok::Ge),
            Some(('&', '&')) => Some(Tok::AndAnd),
            Some(('|', '|')) => Some(Tok::OrOr),
            _ => None,
        };
        if let Some(tok) = tok2 {
            bump!();
            bump!();
            out.push(Lexed { tok, span });
            continue;
        }
        let tok1 = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '=' => Tok::Assign,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '!' => Tok::Bang,
            other => {
                return Err(Error::Syntax {
                    span,
                    expected: "token".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        bump!();
        out.push(Lexed { tok: tok1, span });
    }
    out.push(Lexed {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_basic_tokens() {
        let toks = lex("node A { int x; } // trailing\n0b11 1.5 \"a\\nb\"").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|l| &l.tok).collect();
        assert!(matches!(kinds[0], Tok::KwNode));
        assert!(matches!(kinds[1], Tok::Ident(s) if s == "A"));
        assert!(matches!(kinds[6], Tok::RBrace));
        assert!(matches!(kinds[7], Tok::Int(3)));
        assert!(matches!(kinds[8], Tok::Float(v) if *v == 1.5));
        assert!(matches!(kinds[9], Tok::Str(s) if s == "a\nb"));
    }

    #[test]
    fn tracks_positions() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!(toks[0].span, Span::new(1, 1));
        assert_eq!(toks[1].span, Span::new(2, 3));
    }
}
