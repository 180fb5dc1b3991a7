use super::policy::{GenerationPolicy, TokenClass, END_ID, GO_ID};
use super::postprocess::{postprocess, validate_candidate};
use super::GeneratorError;
use crate::chem::{tokenize, Token, TokenKind};
use crate::hash::derive_seed;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub max_len: usize,
    pub temperature: f64,
    pub seed: u64,
    /// Whole-sample retries before giving up.
    pub max_attempts: usize,
    /// Tokens a single open position may add.
    pub fragment_budget: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_len: 120,
            temperature: 1.0,
            seed: 0,
            max_attempts: 20,
            fragment_budget: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpenKind {
    Branch,
    Linker,
    Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenPosition {
    pub kind: OpenKind,
    /// Token offset in the placeholder scaffold.
    pub location: usize,
    /// Only for [`OpenKind::Choice`].
    pub allowed: Vec<String>,
}

pub fn open_positions(tokens: &[Token]) -> Vec<OpenPosition> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(location, t)| {
            let (kind, allowed) = match &t.kind {
                TokenKind::BranchPlaceholder => (OpenKind::Branch, Vec::new()),
                TokenKind::LinkerPlaceholder => (OpenKind::Linker, Vec::new()),
                TokenKind::ChoicePlaceholder(a) => (OpenKind::Choice, a.clone()),
                _ => return None,
            };
            Some(OpenPosition {
                kind,
                location,
                allowed,
            })
        })
        .collect()
}

/// A constrained sample with the token spans each open position produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSample {
    pub smiles: String,
    pub tokens: Vec<String>,
    /// One span per open position, in scaffold order. Branch spans include
    /// their parentheses.
    pub fragments: Vec<Range<usize>>,
}

impl ConstrainedSample {
    /// Output tokens with every fragment span deleted.
    pub fn without_fragments(&self) -> Vec<String> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.fragments.iter().any(|r| r.contains(i)))
            .map(|(_, t)| t.clone())
            .collect()
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], temperature: f64, rng: &mut R) -> Option<usize> {
    if temperature <= 1e-6 {
        let mut best: Option<usize> = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 && best.is_none_or(|b| w > weights[b]) {
                best = Some(i);
            }
        }
        return best;
    }
    let tempered: Vec<f64> = if temperature == 1.0 {
        weights.to_vec()
    } else {
        weights
            .iter()
            .map(|&w| if w > 0.0 { w.powf(1.0 / temperature) } else { 0.0 })
            .collect()
    };
    WeightedIndex::new(&tempered).ok().map(|d| d.sample(rng))
}

/// One token from `P(· | history)` with temperature applied.
pub fn draw_next<R: Rng + ?Sized>(
    policy: &GenerationPolicy,
    history: &[u32],
    temperature: f64,
    rng: &mut R,
) -> Option<u32> {
    draw(&policy.distribution(history), temperature, rng).map(|i| i as u32)
}

pub fn sample_unconstrained(policy: &GenerationPolicy, config: &SamplerConfig) -> Result<String, GeneratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = vec![GO_ID];
    let mut out: Vec<String> = Vec::new();
    loop {
        if out.len() >= config.max_len {
            return Err(GeneratorError::MaxLengthExceeded);
        }
        let dist = policy.distribution(&history);
        let t = draw(&dist, config.temperature, &mut rng).ok_or(GeneratorError::Unrepairable)? as u32;
        if t == END_ID {
            break;
        }
        out.push(policy.vocab.text(t).to_string());
        history.push(t);
    }
    postprocess(&out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Last {
    Start,
    Atom,
    Bond,
    Ring,
    Open,
    Close,
}

#[derive(Clone)]
struct Fragment {
    depth: usize,
    own_rings: Vec<(u32, usize)>,
    last: Last,
    atoms: usize,
    /// An aromatic atom was emitted with no fragment ring open; only a ring
    /// opening may follow.
    needs_ring: bool,
}

impl Fragment {
    fn advance(&mut self, class: TokenClass, text: &str) {
        match class {
            TokenClass::Atom => {
                self.atoms += 1;
                self.last = Last::Atom;
                self.needs_ring = self.own_rings.is_empty() && is_aromatic_atom(text);
            }
            TokenClass::Bond => self.last = Last::Bond,
            TokenClass::Ring(d) => {
                match self.own_rings.iter().position(|(x, _)| *x == d) {
                    Some(pos) => {
                        self.own_rings.remove(pos);
                    }
                    None => self.own_rings.push((d, self.atoms)),
                }
                self.last = Last::Ring;
                self.needs_ring = false;
            }
            TokenClass::Open => {
                self.depth += 1;
                self.last = Last::Open;
            }
            TokenClass::Close => {
                self.depth = self.depth.saturating_sub(1);
                self.last = Last::Close;
            }
            _ => unreachable!("masked token classes"),
        }
    }

    /// Lower bound on the steps still needed, counting the final stop or close.
    fn min_finish(&self) -> usize {
        if self.needs_ring {
            // opening digit, two atoms, closing digit
            return 4 + self.depth + 1;
        }
        let ring_atoms = self
            .own_rings
            .iter()
            .map(|&(_, at)| (at + 2).saturating_sub(self.atoms))
            .max()
            .unwrap_or(0);
        let dangling = usize::from(self.atoms == 0 || matches!(self.last, Last::Bond | Last::Open));
        ring_atoms.max(dangling) + self.own_rings.len() + self.depth + 1
    }
}

fn is_aromatic_atom(text: &str) -> bool {
    text.trim_start_matches('[')
        .trim_start_matches(|c: char| c.is_ascii_digit())
        .starts_with(|c: char| c.is_ascii_lowercase())
}

struct Builder<'a> {
    policy: &'a GenerationPolicy,
    config: &'a SamplerConfig,
    history: Vec<u32>,
    out: Vec<String>,
    open_rings: BTreeSet<u32>,
}

enum FragmentKind {
    Branch,
    /// Stops before the given next scaffold token.
    Linker(Option<String>),
}

impl Builder<'_> {
    fn push(&mut self, text: &str) {
        self.history.push(self.policy.vocab.id(text));
        self.out.push(text.to_string());
    }

    fn allowed(&self, f: &Fragment, id: u32, kind: &FragmentKind) -> bool {
        let class = self.policy.vocab.class(id);
        if f.needs_ring {
            return matches!(class, TokenClass::Ring(d)
                if !self.open_rings.contains(&d) && !f.own_rings.iter().any(|(x, _)| *x == d));
        }
        match class {
            TokenClass::Atom => true,
            TokenClass::Bond => match f.last {
                Last::Start => !self.out.is_empty(),
                Last::Atom | Last::Ring | Last::Open | Last::Close => true,
                Last::Bond => false,
            },
            TokenClass::Ring(d) => {
                if !matches!(f.last, Last::Atom | Last::Ring) {
                    return false;
                }
                match f.own_rings.iter().find(|(x, _)| *x == d) {
                    Some(&(_, at)) => f.atoms >= at + 2,
                    None => !self.open_rings.contains(&d),
                }
            }
            TokenClass::Open => matches!(f.last, Last::Atom | Last::Ring | Last::Close),
            TokenClass::Close => {
                if !matches!(f.last, Last::Atom | Last::Ring | Last::Close) {
                    return false;
                }
                f.depth > 0 || (matches!(kind, FragmentKind::Branch) && f.own_rings.is_empty() && f.atoms > 0)
            }
            TokenClass::Dot | TokenClass::End | TokenClass::Reserved => false,
        }
    }

    fn fragment(&mut self, kind: FragmentKind, rng: &mut ChaCha8Rng) -> Result<(), GeneratorError> {
        let mut f = Fragment {
            depth: 0,
            own_rings: Vec::new(),
            last: Last::Start,
            atoms: 0,
            needs_ring: false,
        };
        if matches!(kind, FragmentKind::Branch) {
            self.push("(");
            f.last = Last::Open;
        }
        let vocab = &self.policy.vocab;
        let n = vocab.len();
        for step in 0..=self.config.fragment_budget {
            let remaining = self.config.fragment_budget - step;
            let dist = self.policy.distribution(&self.history);
            let mut weights: Vec<f64> = (0..n as u32)
                .map(|id| {
                    if !self.allowed(&f, id, &kind) {
                        return 0.0;
                    }
                    let class = vocab.class(id);
                    let closes_fragment = class == TokenClass::Close && f.depth == 0;
                    if !closes_fragment {
                        let mut next = f.clone();
                        next.advance(class, vocab.text(id));
                        // the fragment must stay finishable within the budget
                        if next.min_finish() > remaining {
                            return 0.0;
                        }
                    }
                    dist[id as usize]
                })
                .collect();
            if let FragmentKind::Linker(next) = &kind {
                let can_stop = f.depth == 0
                    && !f.needs_ring
                    && f.own_rings.is_empty()
                    && f.atoms > 0
                    && matches!(f.last, Last::Atom | Last::Ring | Last::Close);
                let joins_atom = next.as_deref().and_then(Token::from_text).is_some_and(|t| t.is_atom());
                // a model that would end the string here considers the
                // fragment complete
                let stop = match next {
                    _ if !can_stop => 0.0,
                    None => dist[END_ID as usize],
                    // any atom may bond to the joining atom
                    Some(_) if joins_atom => {
                        dist[END_ID as usize]
                            + (0..n as u32)
                                .filter(|&id| vocab.class(id) == TokenClass::Atom)
                                .map(|id| dist[id as usize])
                                .sum::<f64>()
                    }
                    Some(t) if vocab.is_predictable(vocab.id(t)) => dist[END_ID as usize] + dist[vocab.id(t) as usize],
                    Some(_) => dist[END_ID as usize],
                };
                weights.push(stop);
            }
            let Some(choice) = draw(&weights, self.config.temperature, rng) else {
                return Err(GeneratorError::FragmentBudgetExceeded);
            };
            if choice == n {
                return Ok(());
            }
            let id = choice as u32;
            let class = vocab.class(id);
            let text = vocab.text(id).to_string();
            self.push(&text);
            if class == TokenClass::Close && f.depth == 0 {
                return Ok(());
            }
            if let TokenClass::Ring(d) = class {
                if f.own_rings.iter().any(|(x, _)| *x == d) {
                    self.open_rings.remove(&d);
                } else {
                    self.open_rings.insert(d);
                }
            }
            f.advance(class, &text);
        }
        Err(GeneratorError::FragmentBudgetExceeded)
    }
}

fn build_once(
    policy: &GenerationPolicy,
    tokens: &[Token],
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ConstrainedSample, GeneratorError> {
    let mut b = Builder {
        policy,
        config,
        history: vec![GO_ID],
        out: Vec::new(),
        open_rings: BTreeSet::new(),
    };
    let mut fragments = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let start = b.out.len();
        match &tok.kind {
            TokenKind::BranchPlaceholder => {
                b.fragment(FragmentKind::Branch, rng)?;
                fragments.push(start..b.out.len());
            }
            TokenKind::LinkerPlaceholder => {
                let next = tokens.get(i + 1).map(|t| t.text.clone());
                b.fragment(FragmentKind::Linker(next), rng)?;
                fragments.push(start..b.out.len());
            }
            TokenKind::ChoicePlaceholder(allowed) => {
                let dist = policy.distribution(&b.history);
                let mut weights: Vec<f64> = allowed
                    .iter()
                    .map(|t| {
                        let id = policy.vocab.id(t);
                        if policy.vocab.is_predictable(id) {
                            dist[id as usize]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if weights.iter().all(|&w| w == 0.0) {
                    weights = vec![1.0; allowed.len()];
                }
                let k = draw(&weights, config.temperature, rng).ok_or(GeneratorError::FragmentBudgetExceeded)?;
                b.push(&allowed[k]);
                fragments.push(start..b.out.len());
            }
            TokenKind::RingBond(d) => {
                if !b.open_rings.remove(d) {
                    b.open_rings.insert(*d);
                }
                b.push(&tok.text);
            }
            _ => b.push(&tok.text),
        }
        if b.out.len() > config.max_len {
            return Err(GeneratorError::MaxLengthExceeded);
        }
    }
    Ok(ConstrainedSample {
        smiles: b.out.concat(),
        tokens: b.out,
        fragments,
    })
}

/// Follows the scaffold verbatim and samples only at its open positions.
/// Every accepted output parses and contains the scaffold token sequence.
pub fn sample_scaffold_constrained(
    policy: &GenerationPolicy,
    scaffold: &str,
    config: &SamplerConfig,
) -> Result<ConstrainedSample, GeneratorError> {
    let tokens = tokenize(scaffold)?.tokens;
    if open_positions(&tokens).is_empty() {
        return Ok(ConstrainedSample {
            smiles: scaffold.to_string(),
            tokens: tokens.into_iter().map(|t| t.text).collect(),
            fragments: Vec::new(),
        });
    }
    let mut last = GeneratorError::UnparseableResult;
    for attempt in 0..config.max_attempts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, attempt as u64));
        match build_once(policy, &tokens, config, &mut rng) {
            Ok(sample) => {
                if validate_candidate(&sample.smiles).is_ok() {
                    return Ok(sample);
                }
                last = GeneratorError::UnparseableResult;
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// `n` samples with per-sample seeds derived from `config.seed`; scaffold `i % len`
/// drives sample `i`. An empty scaffold list samples unconstrained.
pub fn sample_batch(
    policy: &GenerationPolicy,
    scaffolds: &[String],
    n: usize,
    config: &SamplerConfig,
) -> Vec<Result<String, GeneratorError>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let cfg = SamplerConfig {
                seed: derive_seed(config.seed, i as u64),
                ..config.clone()
            };
            if scaffolds.is_empty() {
                sample_unconstrained(policy, &cfg)
            } else {
                sample_scaffold_constrained(policy, &scaffolds[i % scaffolds.len()], &cfg).map(|s| s.smiles)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, strip_placeholders};
    use crate::generator::train_policy;

    fn policy(items: &[&str], order: usize) -> GenerationPolicy {
        train_policy(&items.iter().map(|s| s.to_string()).collect::<Vec<_>>(), order).unwrap()
    }

    #[test]
    fn unconstrained_alphabet() {
        let p = policy(&["CC", "CCC"], 2);
        for seed in 0..50 {
            let cfg = SamplerConfig {
                seed,
                ..Default::default()
            };
            if let Ok(s) = sample_unconstrained(&p, &cfg) {
                assert!(!s.is_empty() && s.chars().all(|c| c == 'C'), "{s}");
                parse_smiles(&s).unwrap();
            }
        }
        let cfg = SamplerConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(sample_unconstrained(&p, &cfg), sample_unconstrained(&p, &cfg));
    }

    #[test]
    fn greedy_is_reproducible() {
        let p = policy(&["CCO", "CCO", "CCN"], 3);
        let a = sample_unconstrained(
            &p,
            &SamplerConfig {
                temperature: 0.0,
                seed: 1,
                ..Default::default()
            },
        );
        let b = sample_unconstrained(
            &p,
            &SamplerConfig {
                temperature: 0.0,
                seed: 2,
                ..Default::default()
            },
        );
        assert_eq!(a, b);
        assert_eq!(a.unwrap(), "CCO");
    }

    #[test]
    fn branch_containment() {
        let p = policy(
            &["Cc1ccccc1", "c1ccc(C)cc1", "c1ccc(-c2ccccc2)cc1", "CCc1ccc(CC)cc1"],
            4,
        );
        let scaffold = "c1cc(*)ccc1";
        let bare = strip_placeholders(&tokenize(scaffold).unwrap().tokens);
        for seed in 0..100 {
            let cfg = SamplerConfig {
                seed,
                ..Default::default()
            };
            let s = sample_scaffold_constrained(&p, scaffold, &cfg).unwrap();
            assert!(
                s.smiles.starts_with("c1cc(") && s.smiles.ends_with(")ccc1"),
                "{}",
                s.smiles
            );
            assert_eq!(s.without_fragments().concat(), bare);
            parse_smiles(&s.smiles).unwrap();
        }
    }

    #[test]
    fn choice_and_linker() {
        let p = policy(&["Fc1ccccc1", "Clc1ccccc1", "c1ccccc1CCc1ccccc1", "C1CC1"], 4);
        for seed in 0..50 {
            let cfg = SamplerConfig {
                seed,
                ..Default::default()
            };
            let s = sample_scaffold_constrained(&p, "{F|Cl}c1ccccc1", &cfg).unwrap();
            assert!(s.smiles == "Fc1ccccc1" || s.smiles == "Clc1ccccc1", "{}", s.smiles);
            let l = sample_scaffold_constrained(&p, "c1ccccc1*c1ccccc1", &cfg).unwrap();
            assert_eq!(l.without_fragments().concat(), "c1ccccc1c1ccccc1");
            parse_smiles(&l.smiles).unwrap();
        }
    }

    #[test]
    fn no_placeholders_is_identity() {
        let p = policy(&["CC"], 2);
        let s = sample_scaffold_constrained(&p, "c1ccccc1", &SamplerConfig::default()).unwrap();
        assert_eq!(s.smiles, "c1ccccc1");
        assert!(s.fragments.is_empty());
    }
}
