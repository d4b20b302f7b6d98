use super::diagnostic::{Diagnostic, Location};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Raw numeric literal, converted to a rational by the parser.
    Num(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(s) => format!("number {s}"),
            Tok::Str(_) => "string".to_string(),
            Tok::LBrace => "'{'".to_string(),
            Tok::RBrace => "'}'".to_string(),
            Tok::LBracket => "'['".to_string(),
            Tok::RBracket => "']'".to_string(),
            Tok::Comma => "','".to_string(),
            Tok::Colon => "':'".to_string(),
            Tok::Arrow => "'->'".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Location,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

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
        let loc = Location { line, column: col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = simple {
            bump!();
            tokens.push(Token { tok, loc });
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                bump!();
                bump!();
                tokens.push(Token { tok: Tok::Arrow, loc });
                continue;
            }
            return Err(Diagnostic::error("syntax", "unexpected '-' (negative times are not allowed)").at(loc));
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '.' | '/' | '_')) {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            tokens.push(Token {
                tok: Tok::Num(text),
                loc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            tokens.push(Token {
                tok: Tok::Ident(text),
                loc,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut text = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(Diagnostic::error("syntax", "unterminated string").at(loc));
                };
                match ch {
                    '"' => {
                        bump!();
                        break;
                    }
                    '\n' => {
                        return Err(Diagnostic::error("syntax", "unterminated string").at(loc));
                    }
                    '\\' => {
                        bump!();
                        let escaped = match chars.get(i) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => {
                                return Err(Diagnostic::error("syntax", "invalid escape in string")
                                    .at(Location { line, column: col }));
                            }
                        };
                        text.push(escaped);
                        bump!();
                    }
                    other => {
                        text.push(other);
                        bump!();
                    }
                }
            }
            tokens.push(Token {
                tok: Tok::Str(text),
                loc,
            });
            continue;
        }
        return Err(Diagnostic::error("syntax", format!("unexpected character '{c}'")).at(loc));
    }
    tokens.push(Token {
        tok: Tok::Eof,
        loc: Location { line, column: col },
    });
    Ok(tokens)
}

/// Quotes a string for the DSL, escaping what the lexer unescapes.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}
