//! Straight-line programs: binary rules plus a top-level sequence.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// A binary SLP. Symbols below `num_terminals` are terminals; rule `i`
/// defines nonterminal `num_terminals + i` and may only reference symbols
/// below that value.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Grammar {
    pub num_terminals: u32,
    pub rules: Vec<(u32, u32)>,
    pub top: Vec<u32>,
}

impl Grammar {
    pub fn new(num_terminals: u32) -> Self {
        Grammar { num_terminals, rules: Vec::new(), top: Vec::new() }
    }

    /// Number of rules.
    pub fn r(&self) -> usize {
        self.rules.len()
    }

    /// Length of the top-level sequence.
    pub fn c(&self) -> usize {
        self.top.len()
    }

    pub fn num_symbols(&self) -> u64 {
        self.num_terminals as u64 + self.rules.len() as u64
    }

    #[inline]
    pub fn is_terminal(&self, sym: u32) -> bool {
        sym < self.num_terminals
    }

    #[inline]
    pub fn rule(&self, sym: u32) -> (u32, u32) {
        self.rules[(sym - self.num_terminals) as usize]
    }

    /// Appends a rule and returns the nonterminal it defines.
    pub fn push_rule(&mut self, left: u32, right: u32) -> u32 {
        let sym = self.num_terminals + self.rules.len() as u32;
        self.rules.push((left, right));
        sym
    }

    /// Checks that every reference points at a terminal or an earlier rule.
    pub fn validate(&self) -> Result<()> {
        let limit = self.num_symbols();
        if limit > u32::MAX as u64 {
            return Err(Error::invalid("grammar has more symbols than fit in 32 bits"));
        }
        for (i, &(a, b)) in self.rules.iter().enumerate() {
            let own = self.num_terminals as u64 + i as u64;
            if a as u64 >= own || b as u64 >= own {
                return Err(Error::invalid(format!("rule {own} -> ({a}, {b}) references an undefined symbol")));
            }
        }
        if let Some(&s) = self.top.iter().find(|&&s| s as u64 >= limit) {
            return Err(Error::invalid(format!("top sequence references undefined symbol {s}")));
        }
        Ok(())
    }

    fn check_symbol(&self, sym: u32) -> Result<()> {
        if (sym as u64) < self.num_symbols() {
            Ok(())
        } else {
            Err(Error::invalid(format!("symbol {sym} is not defined in the grammar")))
        }
    }

    /// Expansion length of every symbol, terminals first.
    pub fn expansion_lengths(&self) -> Vec<u64> {
        let mut lens = vec![1u64; self.num_symbols() as usize];
        let nt = self.num_terminals as usize;
        for (i, &(a, b)) in self.rules.iter().enumerate() {
            lens[nt + i] = lens[a as usize].saturating_add(lens[b as usize]);
        }
        lens
    }

    /// Length of the full expansion of the top sequence.
    pub fn expanded_len(&self) -> u64 {
        let lens = self.expansion_lengths();
        self.top.iter().map(|&s| lens[s as usize]).fold(0u64, u64::saturating_add)
    }

    pub fn expand_symbol(&self, sym: u32) -> Result<Vec<u32>> {
        self.check_symbol(sym)?;
        let mut out = Vec::new();
        self.walk(sym, &mut |t| out.push(t));
        Ok(out)
    }

    pub fn expand(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.expanded_len().min(1 << 28) as usize);
        for &s in &self.top {
            self.walk(s, &mut |t| out.push(t));
        }
        out
    }

    /// Expands into bytes; fails if a terminal does not fit in a byte.
    pub fn expand_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.expanded_len().min(1 << 30) as usize);
        self.expand_to(&mut out).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(out)
    }

    /// Streams the byte expansion of the top sequence to `out`, using memory
    /// proportional to the grammar depth rather than the output length.
    pub fn expand_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        if self.num_terminals > 256 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "grammar terminals do not fit in a byte"));
        }
        let mut buf = Vec::with_capacity(1 << 16);
        for &s in &self.top {
            let mut failed = None;
            self.walk(s, &mut |t| {
                buf.push(t as u8);
                if buf.len() == buf.capacity() && failed.is_none() {
                    if let Err(e) = out.write_all(&buf) {
                        failed = Some(e);
                    }
                    buf.clear();
                }
            });
            if let Some(e) = failed {
                return Err(e);
            }
        }
        out.write_all(&buf)
    }

    fn walk(&self, sym: u32, emit: &mut impl FnMut(u32)) {
        let mut stack = vec![sym];
        while let Some(s) = stack.pop() {
            if self.is_terminal(s) {
                emit(s);
            } else {
                let (a, b) = self.rule(s);
                stack.push(b);
                stack.push(a);
            }
        }
    }

    /// Renumbers rules in postorder of their first visit in a left-to-right
    /// traversal of the top sequence and drops rules that are never reached.
    pub fn canonicalize(&self) -> Grammar {
        let nt = self.num_terminals;
        let mut new_id = vec![u32::MAX; self.rules.len()];
        let mut out = Grammar::new(nt);
        // (symbol, children_done)
        let mut stack: Vec<(u32, bool)> = Vec::new();
        for &root in &self.top {
            stack.push((root, false));
            while let Some((s, done)) = stack.pop() {
                if s < nt {
                    continue;
                }
                let idx = (s - nt) as usize;
                if done {
                    let (a, b) = self.rules[idx];
                    let map = |x: u32| if x < nt { x } else { new_id[(x - nt) as usize] };
                    let (a, b) = (map(a), map(b));
                    new_id[idx] = out.push_rule(a, b);
                } else if new_id[idx] == u32::MAX {
                    // mark as in progress so shared children are visited once
                    new_id[idx] = u32::MAX - 1;
                    let (a, b) = self.rules[idx];
                    stack.push((s, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
            }
        }
        out.top = self.top.iter().map(|&s| if s < nt { s } else { new_id[(s - nt) as usize] }).collect();
        out
    }

    /// Number of distinct nonterminals reachable from the top sequence.
    pub fn reachable_rules(&self) -> usize {
        let nt = self.num_terminals;
        let mut seen = vec![false; self.rules.len()];
        let mut stack: Vec<u32> = self.top.iter().copied().filter(|&s| s >= nt).collect();
        let mut count = 0;
        while let Some(s) = stack.pop() {
            let idx = (s - nt) as usize;
            if seen[idx] {
                continue;
            }
            seen[idx] = true;
            count += 1;
            let (a, b) = self.rules[idx];
            stack.extend([a, b].into_iter().filter(|&x| x >= nt));
        }
        count
    }

    /// Folds the top sequence into balanced binary rules so that the grammar
    /// has a single start symbol, as in the strict SLP model.
    pub fn binarize_top(&self) -> Grammar {
        let mut g = self.clone();
        if g.top.len() > 1 {
            let root = balanced_rules(&mut g, &self.top);
            g.top = vec![root];
        }
        g
    }
}

/// Adds balanced binary rules over `symbols` (nonempty) and returns the
/// root. The left half takes the extra symbol on odd lengths.
pub(crate) fn balanced_rules(g: &mut Grammar, symbols: &[u32]) -> u32 {
    debug_assert!(!symbols.is_empty());
    if symbols.len() == 1 {
        return symbols[0];
    }
    let mid = symbols.len().div_ceil(2);
    let left = balanced_rules(g, &symbols[..mid]);
    let right = balanced_rules(g, &symbols[mid..]);
    g.push_rule(left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_grammar() -> Grammar {
        Grammar { num_terminals: 256, rules: vec![(97, 98)], top: vec![256, 256] }
    }

    #[test]
    fn expands_terminal_and_rule() {
        let g = ab_grammar();
        assert_eq!(g.expand_symbol(97).unwrap(), vec![97]);
        assert_eq!(g.expand(), vec![97, 98, 97, 98]);
        assert_eq!(g.expand_bytes().unwrap(), b"abab");
        assert_eq!(g.expanded_len(), 4);
        assert!(g.expand_symbol(257).is_err());
    }

    #[test]
    fn validation_catches_forward_references() {
        let g = Grammar { num_terminals: 2, rules: vec![(0, 3), (0, 1)], top: vec![2] };
        assert!(g.validate().is_err());
        let g = Grammar { num_terminals: 2, rules: vec![(0, 1)], top: vec![3] };
        assert!(g.validate().is_err());
        assert!(ab_grammar().validate().is_ok());
    }

    #[test]
    fn canonical_form_drops_unreachable_rules() {
        let g = Grammar { num_terminals: 2, rules: vec![(0, 0), (1, 1), (3, 2)], top: vec![4, 1] };
        let c = g.canonicalize();
        assert_eq!(c.expand(), g.expand());
        assert_eq!(c.rules, vec![(1, 1), (0, 0), (2, 3)]);
        assert_eq!(c.top, vec![4, 1]);

        let dead = Grammar { num_terminals: 2, rules: vec![(0, 1), (1, 0)], top: vec![3] };
        assert_eq!(dead.canonicalize().r(), 1);
        assert_eq!(dead.reachable_rules(), 1);
    }

    #[test]
    fn balanced_binarization_shape() {
        let mut g = Grammar::new(256);
        let root = balanced_rules(&mut g, &[97, 98, 99]);
        assert_eq!(g.rules, vec![(97, 98), (256, 99)]);
        assert_eq!(root, 257);
        let b = Grammar { num_terminals: 4, rules: vec![], top: vec![0, 1, 2, 3, 0] }.binarize_top();
        assert_eq!(b.top.len(), 1);
        assert_eq!(b.r(), 4);
        assert_eq!(b.expand(), vec![0, 1, 2, 3, 0]);
    }

    #[test]
    fn streamed_expansion_matches() {
        let mut g = Grammar::new(256);
        let mut s = g.push_rule(b'x' as u32, b'y' as u32);
        for _ in 0..18 {
            s = g.push_rule(s, s);
        }
        g.top = vec![s, b'z' as u32];
        let mut out = Vec::new();
        g.expand_to(&mut out).unwrap();
        assert_eq!(out.len(), (2 << 18) + 1);
        assert_eq!(out, g.expand().iter().map(|&t| t as u8).collect::<Vec<_>>());
    }
}
