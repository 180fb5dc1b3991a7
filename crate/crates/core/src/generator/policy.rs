use super::GeneratorError;
use crate::chem::{tokenize, Token, TokenKind};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

pub const GO: &str = "<go>";
pub const END: &str = "<end>";
pub const UNKNOWN: &str = "<unk>";
pub const PLACEHOLDER: &str = "(*)";

pub const GO_ID: u32 = 0;
pub const END_ID: u32 = 1;
pub const UNKNOWN_ID: u32 = 2;
pub const PLACEHOLDER_ID: u32 = 3;
const N_SPECIAL: usize = 4;

/// Grammar class of a vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Atom,
    Bond,
    Open,
    Close,
    Ring(u32),
    Dot,
    End,
    /// Never predicted: start, unknown, placeholder.
    Reserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenVocab {
    tokens: Vec<String>,
    classes: Vec<TokenClass>,
    index: HashMap<String, u32>,
}

impl TokenVocab {
    /// Special tokens first, then `tokens` in the given order.
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut vocab = TokenVocab {
            tokens: Vec::new(),
            classes: Vec::new(),
            index: HashMap::new(),
        };
        for t in [GO, END, UNKNOWN, PLACEHOLDER] {
            vocab.push(t.to_string());
        }
        for t in tokens {
            if !vocab.index.contains_key(&t) {
                vocab.push(t);
            }
        }
        vocab
    }

    fn push(&mut self, text: String) {
        let class = match text.as_str() {
            END => TokenClass::End,
            GO | UNKNOWN | PLACEHOLDER => TokenClass::Reserved,
            _ => match Token::from_text(&text).map(|t| t.kind) {
                Some(TokenKind::Atom) => TokenClass::Atom,
                Some(TokenKind::Bond) => TokenClass::Bond,
                Some(TokenKind::BranchOpen) => TokenClass::Open,
                Some(TokenKind::BranchClose) => TokenClass::Close,
                Some(TokenKind::RingBond(d)) => TokenClass::Ring(d),
                Some(TokenKind::Dot) => TokenClass::Dot,
                _ => TokenClass::Reserved,
            },
        };
        self.index.insert(text.clone(), self.tokens.len() as u32);
        self.tokens.push(text);
        self.classes.push(class);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, text: &str) -> u32 {
        self.index.get(text).copied().unwrap_or(UNKNOWN_ID)
    }

    pub fn text(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn class(&self, id: u32) -> TokenClass {
        self.classes[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Whether the policy can emit `id`.
    pub fn is_predictable(&self, id: u32) -> bool {
        self.classes[id as usize] != TokenClass::Reserved
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct ContextCounts {
    total: f64,
    next: BTreeMap<u32, f64>,
}

/// Interpolated n-gram model over SMILES tokens. Each order-k estimate mixes
/// the context's own counts with the order-(k-1) estimate using Witten-Bell
/// weights (for whole counts); the chain bottoms out at an add-one unigram over every
/// predictable token, so all of them keep nonzero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPolicy {
    pub order: usize,
    pub vocab: TokenVocab,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

pub const DEFAULT_ORDER: usize = 6;

fn tokenize_corpus(corpus: &[String]) -> Result<Vec<Vec<String>>, GeneratorError> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            tokenize(s)
                .map(|ts| ts.tokens.into_iter().map(|t| t.text).collect())
                .map_err(|e| GeneratorError::InvalidCorpusEntry(i, e.to_string()))
        })
        .collect()
}

pub fn train_policy(corpus: &[String], order: usize) -> Result<GenerationPolicy, GeneratorError> {
    if corpus.is_empty() {
        return Err(GeneratorError::EmptyCorpus);
    }
    if order == 0 {
        return Err(GeneratorError::InvalidOrder);
    }
    let sequences = tokenize_corpus(corpus)?;
    let texts: BTreeSet<&String> = sequences.iter().flatten().collect();
    let mut policy = GenerationPolicy {
        order,
        vocab: TokenVocab::new(texts.into_iter().cloned()),
        counts: HashMap::new(),
    };
    for seq in &sequences {
        policy.add_sequence(seq, 1.0);
    }
    Ok(policy)
}

impl GenerationPolicy {
    fn add_sequence(&mut self, tokens: &[String], weight: f64) {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(GO_ID);
        ids.extend(tokens.iter().map(|t| self.vocab.id(t)));
        ids.push(END_ID);
        for i in 1..ids.len() {
            let next = ids[i];
            if !self.vocab.is_predictable(next) {
                continue;
            }
            for k in 0..=self.order.min(i) {
                let entry = self.counts.entry(ids[i - k..i].to_vec()).or_default();
                entry.total += weight;
                *entry.next.entry(next).or_default() += weight;
            }
        }
    }

    /// New policy with `sequences` added at `weight` on top of these counts.
    /// Tokens outside the vocabulary are treated as unknown.
    pub fn with_added(&self, sequences: &[Vec<String>], weight: f64) -> GenerationPolicy {
        let mut out = self.clone();
        for seq in sequences {
            out.add_sequence(seq, weight);
        }
        out
    }

    /// Conditional distribution over the whole vocabulary given the token
    /// history (most recent last; should start with [`GO_ID`]).
    pub fn distribution(&self, history: &[u32]) -> Vec<f64> {
        let n = self.vocab.len();
        let support: Vec<u32> = (0..n as u32).filter(|&t| self.vocab.is_predictable(t)).collect();
        let mut p = vec![0.0; n];
        let empty = ContextCounts::default();
        let unigram = self.counts.get(&[][..]).unwrap_or(&empty);
        let denom = unigram.total + support.len() as f64;
        for &t in &support {
            p[t as usize] = (unigram.next.get(&t).copied().unwrap_or(0.0) + 1.0) / denom;
        }
        for k in 1..=self.order.min(history.len()) {
            let Some(c) = self.counts.get(&history[history.len() - k..]) else {
                break;
            };
            // Witten-Bell type count; each type contributes at most 1 and the
            // floor of 1 keeps fractional-weight contexts continuous in weight
            let types = c.next.values().map(|&x| x.min(1.0)).sum::<f64>().max(1.0);
            let scale = types / (c.total + types);
            for v in p.iter_mut() {
                *v *= scale;
            }
            for (&t, &count) in &c.next {
                p[t as usize] += count / (c.total + types);
            }
        }
        p
    }

    /// Versioned text layout: header, order, vocabulary (one token per line),
    /// then one line per context: space-separated context ids, the context
    /// total, and `id:count` pairs, separated by tabs.
    pub fn to_text(&self) -> String {
        let mut s = String::from("lacuna-policy 1\n");
        let _ = writeln!(s, "order {}", self.order);
        let _ = writeln!(s, "vocab {}", self.vocab.len() - N_SPECIAL);
        for t in &self.vocab.tokens[N_SPECIAL..] {
            let _ = writeln!(s, "{t}");
        }
        let mut keys: Vec<&Vec<u32>> = self.counts.keys().collect();
        keys.sort();
        let _ = writeln!(s, "contexts {}", keys.len());
        for key in keys {
            let ctx: Vec<String> = key.iter().map(|x| x.to_string()).collect();
            let next: Vec<String> = self.counts[key].next.iter().map(|(t, c)| format!("{t}:{c}")).collect();
            let _ = writeln!(s, "{}\t{}\t{}", ctx.join(" "), self.counts[key].total, next.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GeneratorError> {
        let bad = |what: &str| GeneratorError::MalformedPolicy(what.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("lacuna-policy 1") {
            return Err(bad("header"));
        }
        let field = |line: Option<&str>, name: &str| -> Result<usize, GeneratorError> {
            line.and_then(|l| l.strip_prefix(name))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(name))
        };
        let order = field(lines.next(), "order ")?;
        let n_vocab = field(lines.next(), "vocab ")?;
        let mut tokens = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            tokens.push(lines.next().ok_or_else(|| bad("vocab"))?.to_string());
        }
        let vocab = TokenVocab::new(tokens);
        let n_ctx = field(lines.next(), "contexts ")?;
        let mut counts = HashMap::with_capacity(n_ctx);
        for _ in 0..n_ctx {
            let line = lines.next().ok_or_else(|| bad("contexts"))?;
            let mut parts = line.split('\t');
            let (Some(ctx), Some(total), Some(next), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("context line"));
            };
            let key: Vec<u32> = ctx
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("context id")))
                .collect::<Result<_, _>>()?;
            let mut entry = ContextCounts {
                total: total.parse().map_err(|_| bad("total"))?,
                next: BTreeMap::new(),
            };
            for pair in next.split_whitespace() {
                let (t, c) = pair.split_once(':').ok_or_else(|| bad("count"))?;
                let t: u32 = t.parse().map_err(|_| bad("count id"))?;
                let c: f64 = c.parse().map_err(|_| bad("count value"))?;
                if t as usize >= vocab.len() {
                    return Err(bad("count id"));
                }
                entry.next.insert(t, c);
            }
            counts.insert(key, entry);
        }
        Ok(GenerationPolicy { order, vocab, counts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn end_is_most_likely_after_cc() {
        let p = train_policy(&corpus(&["CC"]), 2).unwrap();
        let c = p.vocab.id("C");
        let dist = p.distribution(&[GO_ID, c, c]);
        let best = (0..dist.len()).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
        assert_eq!(best as u32, END_ID);
    }

    #[test]
    fn distributions_normalize() {
        let p = train_policy(&corpus(&["CC(=O)O", "c1ccccc1[S+](C)C", "CCN"]), 4).unwrap();
        let histories: Vec<Vec<u32>> = vec![
            vec![GO_ID],
            vec![GO_ID, p.vocab.id("C")],
            vec![GO_ID, p.vocab.id("c"), p.vocab.id("1"), p.vocab.id("c")],
            vec![GO_ID, UNKNOWN_ID, p.vocab.id("(")],
        ];
        for h in histories {
            let d = p.distribution(&h);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for t in 0..d.len() as u32 {
                assert_eq!(d[t as usize] > 0.0, p.vocab.is_predictable(t));
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_serializable() {
        let data = corpus(&["CC(F)C", "C[S+](C)C", "c1ccccc1"]);
        let a = train_policy(&data, 3).unwrap();
        let b = train_policy(&data, 3).unwrap();
        assert_eq!(a, b);
        let text = a.to_text();
        assert_eq!(text, b.to_text());
        let back = GenerationPolicy::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        let h = [GO_ID, a.vocab.id("C")];
        assert_eq!(back.distribution(&h), a.distribution(&h));
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(train_policy(&[], 3), Err(GeneratorError::EmptyCorpus));
    }
}
