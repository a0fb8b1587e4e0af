//! Brute-force derivation oracle for the strip grammar.
//!
//! Expands the context-free productions breadth-first over sentential forms
//! and collects every terminal role string of bounded length. Verdicts are
//! then plain set lookups, with no state machine involved.

use std::collections::{BTreeSet, VecDeque};

use pecs_core::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Symbol {
    T(Role),
    S,
    NounPhrase,
    Adjectives,
    OptionalPlace,
}

fn productions(nt: Symbol) -> Vec<Vec<Symbol>> {
    use Role::*;
    use Symbol::*;
    match nt {
        S => vec![
            vec![T(Starter), T(Verb), NounPhrase],
            vec![T(Starter), T(Verb), T(Action)],
        ],
        NounPhrase => vec![vec![Adjectives, T(Noun), OptionalPlace]],
        Adjectives => vec![vec![], vec![T(Adjective), Adjectives]],
        OptionalPlace => vec![vec![], vec![T(Preposition), NounPhrase]],
        T(_) => unreachable!(),
    }
}

fn min_len(form: &[Symbol]) -> usize {
    form.iter()
        .map(|s| match s {
            Symbol::T(_) => 1,
            Symbol::S => 3,
            Symbol::NounPhrase => 1,
            Symbol::Adjectives | Symbol::OptionalPlace => 0,
        })
        .sum()
}

/// Oracle verdict: `Invalid` carries the first position that no sentence
/// within the length bound can continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Incomplete,
    Invalid(usize),
}

pub struct GrammarOracle {
    max_len: usize,
    sentences: BTreeSet<Vec<Role>>,
    prefixes: BTreeSet<Vec<Role>>,
}

impl GrammarOracle {
    pub fn new(max_len: usize) -> GrammarOracle {
        let mut sentences = BTreeSet::new();
        let mut queue = VecDeque::from([vec![Symbol::S]]);
        let mut seen = BTreeSet::new();
        while let Some(form) = queue.pop_front() {
            if min_len(&form) > max_len || !seen.insert(form.clone()) {
                continue;
            }
            match form.iter().position(|s| !matches!(s, Symbol::T(_))) {
                None => {
                    sentences.insert(
                        form.iter()
                            .map(|s| match s {
                                Symbol::T(r) => *r,
                                _ => unreachable!(),
                            })
                            .collect::<Vec<_>>(),
                    );
                }
                Some(i) => {
                    for rhs in productions(form[i]) {
                        let mut next = form[..i].to_vec();
                        next.extend(rhs);
                        next.extend_from_slice(&form[i + 1..]);
                        queue.push_back(next);
                    }
                }
            }
        }
        let mut prefixes = BTreeSet::new();
        for s in &sentences {
            for k in 0..=s.len() {
                prefixes.insert(s[..k].to_vec());
            }
        }
        GrammarOracle {
            max_len,
            sentences,
            prefixes,
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn sentences(&self) -> &BTreeSet<Vec<Role>> {
        &self.sentences
    }

    pub fn verdict(&self, roles: &[Role]) -> Verdict {
        if self.sentences.contains(roles) {
            return Verdict::Valid;
        }
        if self.prefixes.contains(roles) {
            return Verdict::Incomplete;
        }
        let first_bad = (1..=roles.len())
            .find(|&k| !self.prefixes.contains(&roles[..k]))
            .expect("a sequence outside the prefix set has a first bad position");
        Verdict::Invalid(first_bad - 1)
    }

    /// True when `roles` can still become a sentence (or already is one).
    pub fn extendable(&self, roles: &[Role]) -> bool {
        self.prefixes.contains(roles)
    }
}
