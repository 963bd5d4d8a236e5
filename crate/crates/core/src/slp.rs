//! Grammar surgery that turns an SLP for the separator-delimited dictionary
//! string into one nonterminal per dictionary block, and then grafts the
//! grammar of the block-ID parse on top of those block symbols.

use crate::ctph::Dictionary;
use crate::error::{Error, Result};
use crate::grammar::{balanced_rules, Grammar};
use crate::symbol::Symbol;

/// Symbols whose expansions, concatenated, spell the dictionary string
/// without its separators.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RootList {
    pub symbols: Vec<u32>,
}

/// One symbol per dictionary block (`X_i`) plus the rules that were added to
/// binarize multi-symbol sublists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockRuleSet {
    pub block_symbols: Vec<u32>,
    /// Index of the first binarization rule in the block grammar.
    pub first_new_rule: usize,
    pub new_rules: usize,
}

/// Number of nodes labelled with each symbol in the derivation tree of the
/// top sequence. Indexed by symbol; terminals included.
pub fn occurrence_counts(g: &Grammar) -> Vec<u64> {
    let nt = g.num_terminals as usize;
    let mut count = vec![0u64; g.num_symbols() as usize];
    for &s in &g.top {
        count[s as usize] += 1;
    }
    // rule i only references symbols below nt + i, so heads are final
    // before their bodies are credited
    for i in (0..g.rules.len()).rev() {
        let c = count[nt + i];
        if c == 0 {
            continue;
        }
        let (a, b) = g.rules[i];
        count[a as usize] += c;
        count[b as usize] += c;
    }
    count
}

/// Removes every nonterminal occurring once in the derivation tree (which
/// includes every nonterminal whose expansion holds a separator) and every
/// separator, and lists the roots of the maximal surviving subtrees.
///
/// `grammar` must generate the dictionary string built with separators
/// `base_terminals + i`. The pruned grammar has `base_terminals` terminals.
pub fn prune_and_reroot<T: Symbol>(
    grammar: &Grammar,
    dict: &Dictionary<T>,
    base_terminals: u32,
) -> Result<(Grammar, RootList)> {
    let nt = grammar.num_terminals;
    if (nt as usize) < base_terminals as usize + dict.len() {
        return Err(Error::consistency(format!(
            "grammar has {nt} terminals but the dictionary needs {} plus {} separators",
            base_terminals,
            dict.len()
        )));
    }
    check_generates_dictionary(grammar, dict, base_terminals)?;

    let count = occurrence_counts(grammar);
    let mut new_id = vec![u32::MAX; grammar.rules.len()];
    let mut pruned = Grammar::new(base_terminals);
    for (i, &(a, b)) in grammar.rules.iter().enumerate() {
        if count[nt as usize + i] < 2 {
            continue;
        }
        let map = |x: u32| -> Option<u32> {
            if x < base_terminals {
                Some(x)
            } else if x < nt {
                None
            } else {
                Some(new_id[(x - nt) as usize]).filter(|&id| id != u32::MAX)
            }
        };
        let (Some(a), Some(b)) = (map(a), map(b)) else {
            return Err(Error::consistency(format!(
                "surviving rule {} references a pruned symbol or separator",
                nt as usize + i
            )));
        };
        new_id[i] = pruned.push_rule(a, b);
    }

    let mut roots = Vec::new();
    let mut stack = Vec::new();
    for &s in &grammar.top {
        stack.push(s);
        while let Some(x) = stack.pop() {
            if x < base_terminals {
                roots.push(x);
            } else if x < nt {
                // separator
            } else if count[x as usize] >= 2 {
                roots.push(new_id[(x - nt) as usize]);
            } else {
                let (a, b) = grammar.rule(x);
                stack.push(b);
                stack.push(a);
            }
        }
    }
    Ok((pruned, RootList { symbols: roots }))
}

fn check_generates_dictionary<T: Symbol>(grammar: &Grammar, dict: &Dictionary<T>, base: u32) -> Result<()> {
    let mut expected = dict
        .iter()
        .enumerate()
        .flat_map(|(i, block)| block.iter().map(|s| s.value()).chain(std::iter::once(base + i as u32)));
    let mut pos = 0usize;
    let mut stack = Vec::new();
    for &s in &grammar.top {
        stack.push(s);
        while let Some(x) = stack.pop() {
            if grammar.is_terminal(x) {
                if expected.next() != Some(x) {
                    return Err(Error::consistency(format!(
                        "grammar expansion differs from the dictionary string at position {pos}"
                    )));
                }
                pos += 1;
            } else {
                let (a, b) = grammar.rule(x);
                stack.push(b);
                stack.push(a);
            }
        }
    }
    if expected.next().is_some() {
        return Err(Error::consistency(format!("grammar expansion ends early at position {pos}")));
    }
    Ok(())
}

/// Splits the root list at block boundaries: sublist `i` expands to block `i`.
pub fn split_sublists<T: Symbol>(roots: &RootList, grammar: &Grammar, dict: &Dictionary<T>) -> Result<Vec<Vec<u32>>> {
    let lens = grammar.expansion_lengths();
    let mut out = Vec::with_capacity(dict.len());
    let mut it = roots.symbols.iter().copied().peekable();
    for i in 0..dict.len() {
        let want = dict.block(i).len() as u64;
        let mut have = 0u64;
        let mut sub = Vec::new();
        while have < want {
            let Some(s) = it.next() else {
                return Err(Error::consistency(format!("root list ends inside block {i}")));
            };
            have += lens[s as usize];
            sub.push(s);
        }
        if have != want {
            return Err(Error::consistency(format!(
                "root list straddles the end of block {i} ({have} symbols for a block of {want})"
            )));
        }
        out.push(sub);
    }
    if it.peek().is_some() {
        return Err(Error::consistency("root list is longer than the dictionary"));
    }
    Ok(out)
}

/// Gives every block a single symbol: a one-symbol sublist is used as is,
/// longer sublists get a balanced tree of new rules.
pub fn make_block_rules(sublists: &[Vec<u32>], grammar: &mut Grammar) -> Result<BlockRuleSet> {
    let first_new_rule = grammar.r();
    let mut block_symbols = Vec::with_capacity(sublists.len());
    for (i, sub) in sublists.iter().enumerate() {
        if sub.is_empty() {
            return Err(Error::invalid(format!("sublist {i} is empty")));
        }
        block_symbols.push(balanced_rules(grammar, sub));
    }
    Ok(BlockRuleSet { block_symbols, first_new_rule, new_rules: grammar.r() - first_new_rule })
}

/// Replaces every block-ID terminal of `parse_grammar` by its block symbol
/// and appends the result to `block_grammar`. The combined grammar is
/// returned in canonical form.
pub fn combine(parse_grammar: &Grammar, block_rules: &BlockRuleSet, block_grammar: &Grammar) -> Result<Grammar> {
    let b = block_rules.block_symbols.len() as u32;
    let pt = parse_grammar.num_terminals;
    let offset = block_grammar.num_symbols() as u32;
    let map = |x: u32| -> Result<u32> {
        if x < pt {
            if x >= b {
                return Err(Error::invalid(format!("block ID {x} is out of range (b = {b})")));
            }
            Ok(block_rules.block_symbols[x as usize])
        } else {
            Ok(x - pt + offset)
        }
    };
    let mut g = block_grammar.clone();
    for &(x, y) in &parse_grammar.rules {
        g.rules.push((map(x)?, map(y)?));
    }
    g.top = parse_grammar.top.iter().map(|&x| map(x)).collect::<Result<_>>()?;
    Ok(g.canonicalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctph::build_dictionary_string;
    use crate::repair::repair_build;
    use proptest::prelude::*;

    fn dict(blocks: &[&[u8]]) -> Dictionary<u8> {
        Dictionary::from_blocks(blocks).unwrap()
    }

    #[test]
    fn counts_on_small_tree() {
        let g = Grammar { num_terminals: 256, rules: vec![(97, 98)], top: vec![256, 256] };
        let c = occurrence_counts(&g);
        assert_eq!((c[256], c[97], c[98], c[99]), (2, 2, 2, 0));
    }

    // Materializes the derivation tree node by node.
    fn brute_counts(g: &Grammar) -> Vec<u64> {
        let mut c = vec![0u64; g.num_symbols() as usize];
        let mut stack: Vec<u32> = g.top.clone();
        while let Some(s) = stack.pop() {
            c[s as usize] += 1;
            if !g.is_terminal(s) {
                let (a, b) = g.rule(s);
                stack.push(a);
                stack.push(b);
            }
        }
        c
    }

    #[test]
    fn prune_without_rules_drops_separators() {
        let d = dict(&[b"ab", b"ba"]);
        let g = Grammar { num_terminals: 258, rules: vec![], top: vec![97, 98, 256, 98, 97, 257] };
        let (pruned, roots) = prune_and_reroot(&g, &d, 256).unwrap();
        assert_eq!(pruned.r(), 0);
        assert_eq!(roots.symbols, vec![97, 98, 98, 97]);
        let subs = split_sublists(&roots, &pruned, &d).unwrap();
        assert_eq!(subs, vec![vec![97, 98], vec![98, 97]]);
    }

    #[test]
    fn prune_keeps_repeated_rule() {
        let d = dict(&[b"abab"]);
        let g = Grammar { num_terminals: 257, rules: vec![(97, 98)], top: vec![257, 257, 256] };
        let (mut pruned, roots) = prune_and_reroot(&g, &d, 256).unwrap();
        assert_eq!(pruned.rules, vec![(97, 98)]);
        assert_eq!(roots.symbols, vec![256, 256]);
        let subs = split_sublists(&roots, &pruned, &d).unwrap();
        assert_eq!(subs, vec![vec![256, 256]]);
        let set = make_block_rules(&subs, &mut pruned).unwrap();
        assert_eq!(set.new_rules, 1);
        assert_eq!(pruned.rules[1], (256, 256));
        assert_eq!(pruned.expand_symbol(set.block_symbols[0]).unwrap(), b"abab".map(u32::from));
    }

    #[test]
    fn prune_rejects_wrong_grammar() {
        let d = dict(&[b"ab"]);
        let g = Grammar { num_terminals: 257, rules: vec![], top: vec![97, 97, 256] };
        assert!(matches!(prune_and_reroot(&g, &d, 256), Err(Error::Consistency(_))));
    }

    #[test]
    fn split_detects_misalignment() {
        let d = dict(&[b"a", b"bc"]);
        let g = Grammar { num_terminals: 256, rules: vec![(97, 98)], top: vec![] };
        let roots = RootList { symbols: vec![256, 99] };
        assert!(matches!(split_sublists(&roots, &g, &d), Err(Error::Consistency(_))));
        let single = dict(&[b"z"]);
        let roots = RootList { symbols: vec![122] };
        assert_eq!(split_sublists(&roots, &Grammar::new(256), &single).unwrap(), vec![vec![122]]);
    }

    #[test]
    fn block_rules_are_balanced() {
        let mut g = Grammar::new(256);
        let set = make_block_rules(&[vec![97, 98, 99], vec![100]], &mut g).unwrap();
        assert_eq!(g.rules, vec![(97, 98), (256, 99)]);
        assert_eq!(set.block_symbols, vec![257, 100]);
        assert_eq!(set.new_rules, 2);
    }

    #[test]
    fn combine_single_block() {
        let mut g = Grammar::new(256);
        let set = make_block_rules(&[vec![b'q' as u32]], &mut g).unwrap();
        let p = Grammar { num_terminals: 1, rules: vec![], top: vec![0] };
        let out = combine(&p, &set, &g).unwrap();
        assert_eq!(out.top, vec![b'q' as u32]);
        assert_eq!(out.r(), 0);
    }

    #[test]
    fn combine_substitutes_block_symbols() {
        let mut g = Grammar::new(256);
        let set = make_block_rules(&[vec![97, 98], vec![99, 100]], &mut g).unwrap();
        let p = Grammar { num_terminals: 2, rules: vec![(0, 1)], top: vec![2, 2] };
        let out = combine(&p, &set, &g).unwrap();
        assert_eq!(out.expand_bytes().unwrap(), b"abcdabcd");
        // B -> (X0, X1) with X0, X1 the block rules
        assert_eq!(out.rules, vec![(97, 98), (99, 100), (256, 257)]);
        assert_eq!(out.top, vec![258, 258]);

        let bad = Grammar { num_terminals: 3, rules: vec![], top: vec![2] };
        assert!(matches!(combine(&bad, &set, &g), Err(Error::InvalidArgument(_))));
    }

    fn surgery(blocks: &[Vec<u8>]) -> (Dictionary<u8>, Grammar, Grammar, BlockRuleSet) {
        let d = Dictionary::from_blocks(blocks).unwrap();
        let dstr = build_dictionary_string(&d, 256);
        let slp = repair_build(&dstr, 256 + d.len() as u32).unwrap().binarize_top();
        let (mut pruned, roots) = prune_and_reroot(&slp, &d, 256).unwrap();
        let subs = split_sublists(&roots, &pruned, &d).unwrap();
        let set = make_block_rules(&subs, &mut pruned).unwrap();
        (d, slp, pruned, set)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn counts_match_tree(seq in proptest::collection::vec(0u32..3, 1..200)) {
            let g = repair_build(&seq, 3).unwrap().binarize_top();
            prop_assert_eq!(occurrence_counts(&g), brute_counts(&g));
        }

        #[test]
        fn surgery_invariants(blocks in proptest::collection::hash_set(proptest::collection::vec(0u8..3, 1..12), 1..12)) {
            let blocks: Vec<Vec<u8>> = blocks.into_iter().collect();
            let (d, slp, pruned, set) = surgery(&blocks);
            for (i, &x) in set.block_symbols.iter().enumerate() {
                let exp: Vec<u8> = pruned.expand_symbol(x).unwrap().into_iter().map(|t| t as u8).collect();
                prop_assert_eq!(exp.as_slice(), d.block(i));
            }
            prop_assert!(pruned.r() <= slp.r() + 1);
            prop_assert!(pruned.validate().is_ok());
        }
    }
}
