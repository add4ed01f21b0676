//! Lisp-style reader shared by the domain, problem and instance-constraint
//! parsers.
//!
//! Comments run from `;` to the end of the line. Commas are treated as
//! whitespace so that call-style forms such as `grid(tile, up)` tokenize
//! cleanly; whether a list was written directly after an atom (no blank in
//! between) is recorded in [`SExpr::List::glued`].

use std::fmt;

use thiserror::Error;

/// 1-based line/column of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("{pos}: unexpected character {ch:?}")]
    BadChar { pos: Pos, ch: char },
    #[error("{pos}: unbalanced ')'")]
    UnbalancedClose { pos: Pos },
    #[error("{pos}: unterminated list")]
    Unterminated { pos: Pos },
    #[error("empty input")]
    Empty,
    #[error("{pos}: trailing input after top-level form")]
    Trailing { pos: Pos },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom {
        text: String,
        pos: Pos,
    },
    List {
        items: Vec<SExpr>,
        pos: Pos,
        /// The opening parenthesis immediately followed an atom.
        glued: bool,
    },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    /// Head atom of a list, lowercased (keywords are case-insensitive).
    pub fn head_keyword(&self) -> Option<String> {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(SExpr::as_atom)
            .map(str::to_ascii_lowercase)
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom { text, .. } => f.write_str(text),
            SExpr::List { items, .. } => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open { glued: bool },
    Close,
    Atom(String),
}

fn is_atom_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "-_?:.=<>+*/!@$%&^~".contains(c)
}

fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>, LexError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    let mut prev_atom = false;
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            prev_atom = false;
        } else if c.is_whitespace() || c == ',' {
            chars.next();
            col += 1;
            prev_atom = false;
        } else if c == ';' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                col += 1;
            }
            prev_atom = false;
        } else if c == '(' {
            chars.next();
            col += 1;
            out.push((Token::Open { glued: prev_atom }, pos));
            prev_atom = false;
        } else if c == ')' {
            chars.next();
            col += 1;
            out.push((Token::Close, pos));
            prev_atom = false;
        } else if is_atom_char(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !is_atom_char(c) {
                    break;
                }
                s.push(c);
                chars.next();
                col += 1;
            }
            out.push((Token::Atom(s), pos));
            prev_atom = true;
        } else {
            return Err(LexError::BadChar { pos, ch: c });
        }
    }
    Ok(out)
}

/// Reads every top-level form in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>, LexError> {
    let tokens = tokenize(text)?;
    // Stack of open lists: (items, pos, glued).
    let mut stack: Vec<(Vec<SExpr>, Pos, bool)> = Vec::new();
    let mut top = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Token::Open { glued } => stack.push((Vec::new(), pos, glued)),
            Token::Close => {
                let (items, lpos, glued) =
                    stack.pop().ok_or(LexError::UnbalancedClose { pos })?;
                let list = SExpr::List {
                    items,
                    pos: lpos,
                    glued,
                };
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Atom(text) => {
                let atom = SExpr::Atom { text, pos };
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
        }
    }
    if let Some((_, pos, _)) = stack.pop() {
        return Err(LexError::Unterminated { pos });
    }
    Ok(top)
}

/// Reads exactly one top-level form.
pub fn parse_one(text: &str) -> Result<SExpr, LexError> {
    let mut forms = parse_all(text)?.into_iter();
    let first = forms.next().ok_or(LexError::Empty)?;
    if let Some(extra) = forms.next() {
        return Err(LexError::Trailing { pos: extra.pos() });
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_positions() {
        let e = parse_one("; header\n(a (b c) ; trailing\n d)").unwrap();
        assert_eq!(e.to_string(), "(a (b c) d)");
        assert_eq!(e.pos(), Pos { line: 2, col: 1 });
        let items = e.as_list().unwrap();
        assert_eq!(items[2].pos(), Pos { line: 3, col: 2 });
    }

    #[test]
    fn glued_lists_and_commas() {
        let e = parse_one("(init( grid(tile, up) ))").unwrap();
        let items = e.as_list().unwrap();
        assert!(matches!(items[1], SExpr::List { glued: true, .. }));
        let inner = items[1].as_list().unwrap();
        assert!(matches!(inner[1], SExpr::List { glued: true, .. }));
        assert_eq!(inner[1].to_string(), "(tile up)");
        let spaced = parse_one("(init (x))").unwrap();
        assert!(matches!(spaced.as_list().unwrap()[1], SExpr::List { glued: false, .. }));
    }

    #[test]
    fn lexical_errors_report_position() {
        assert_eq!(
            parse_one("(a\n  #b)"),
            Err(LexError::BadChar {
                pos: Pos { line: 2, col: 3 },
                ch: '#'
            })
        );
        assert!(matches!(parse_one("(a (b)"), Err(LexError::Unterminated { .. })));
        assert!(matches!(parse_one("a)"), Err(LexError::UnbalancedClose { .. })));
        assert!(matches!(parse_one("(a) (b)"), Err(LexError::Trailing { .. })));
        assert_eq!(parse_one("  ; nothing"), Err(LexError::Empty));
    }
}
