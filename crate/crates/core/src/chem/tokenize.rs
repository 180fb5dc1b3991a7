use super::ChemError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Atom,
    Bond,
    BranchOpen,
    BranchClose,
    RingBond(u32),
    Dot,
    /// `(*)`: an open branch position.
    BranchPlaceholder,
    /// Bare `*`: an open linker position between two scaffold atoms.
    LinkerPlaceholder,
    /// `{F|Cl}`: an open position restricted to the listed tokens.
    ChoicePlaceholder(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn is_atom(&self) -> bool {
        self.kind == TokenKind::Atom
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::BranchPlaceholder | TokenKind::LinkerPlaceholder | TokenKind::ChoicePlaceholder(_)
        )
    }

    pub(crate) fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token {
            kind,
            text: text.into(),
        }
    }

    /// Classifies a token from its text alone (as used by generation vocabularies).
    pub fn from_text(text: &str) -> Option<Token> {
        let stream = tokenize(text).ok()?;
        if stream.tokens.len() == 1 {
            stream.tokens.into_iter().next()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            f.write_str(&t.text)?;
        }
        Ok(())
    }
}

/// Splits a SMILES string into tokens. Lossless: the token texts concatenate
/// back to the input.
pub fn tokenize(text: &str) -> Result<TokenStream, ChemError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b'(' if bytes[i..].starts_with(b"(*)") => {
                i += 3;
                TokenKind::BranchPlaceholder
            }
            b'(' => {
                i += 1;
                TokenKind::BranchOpen
            }
            b')' => {
                i += 1;
                TokenKind::BranchClose
            }
            b'*' => {
                i += 1;
                TokenKind::LinkerPlaceholder
            }
            b'{' => {
                let end = bytes[i..]
                    .iter()
                    .position(|&b| b == b'}')
                    .ok_or(ChemError::UnterminatedBracket(i))?;
                let inner = &text[i + 1..i + end];
                let options: Vec<String> = inner.split('|').filter(|s| !s.is_empty()).map(str::to_string).collect();
                if options.is_empty() {
                    return Err(ChemError::InvalidSyntax {
                        pos: i,
                        msg: "empty choice placeholder",
                    });
                }
                i += end + 1;
                TokenKind::ChoicePlaceholder(options)
            }
            b'[' => {
                let end = bytes[i..]
                    .iter()
                    .position(|&b| b == b']')
                    .ok_or(ChemError::UnterminatedBracket(i))?;
                if bytes[i + 1..i + end].contains(&b'[') {
                    return Err(ChemError::UnterminatedBracket(i));
                }
                i += end + 1;
                TokenKind::Atom
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                TokenKind::Atom
            }
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                TokenKind::Atom
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                i += 1;
                TokenKind::Atom
            }
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                i += 1;
                TokenKind::Bond
            }
            b'.' => {
                i += 1;
                TokenKind::Dot
            }
            b'0'..=b'9' => {
                i += 1;
                TokenKind::RingBond((c - b'0') as u32)
            }
            b'%' => {
                let digits = bytes.get(i + 1..i + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                match digits {
                    Some(d) => {
                        i += 3;
                        TokenKind::RingBond(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                    }
                    None => {
                        return Err(ChemError::InvalidSyntax {
                            pos: i,
                            msg: "`%` must be followed by two digits",
                        })
                    }
                }
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ChemError::InvalidCharacter(ch, i));
            }
        };
        tokens.push(Token::new(kind, &text[start..i]));
    }
    Ok(TokenStream { tokens })
}
