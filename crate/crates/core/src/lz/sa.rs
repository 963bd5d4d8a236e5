//! Suffix array (SA-IS), LCP array and the longest-previous-factor queries
//! used by the parsers on long inputs.

use super::{lz77_phrase, ParseList, Phrase};
use crate::symbol::Symbol;

const NIL: u32 = u32::MAX;

/// Suffix array of `s` over the alphabet `0..=upper`.
pub fn suffix_array(s: &[u32], upper: u32) -> Vec<u32> {
    assert!(s.len() < NIL as usize, "input too long for 32-bit suffix array");
    sa_is(s, upper as usize)
}

fn sa_is(s: &[u32], upper: usize) -> Vec<u32> {
    let n = s.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0],
        2 => return if s[0] < s[1] { vec![0, 1] } else { vec![1, 0] },
        _ => {}
    }
    let mut sa = vec![NIL; n];
    let mut ls = vec![false; n];
    for i in (0..n - 1).rev() {
        ls[i] = if s[i] == s[i + 1] { ls[i + 1] } else { s[i] < s[i + 1] };
    }
    // bucket starts: sum_l for L-type, sum_s for S-type
    let mut sum_l = vec![0u32; upper + 1];
    let mut sum_s = vec![0u32; upper + 1];
    for i in 0..n {
        if !ls[i] {
            sum_s[s[i] as usize] += 1;
        } else {
            sum_l[s[i] as usize + 1] += 1;
        }
    }
    for i in 0..=upper {
        sum_s[i] += sum_l[i];
        if i < upper {
            sum_l[i + 1] += sum_s[i];
        }
    }

    let induce = |sa: &mut Vec<u32>, lms: &[u32]| {
        sa.fill(NIL);
        let mut buf = sum_s.clone();
        for &d in lms {
            let c = s[d as usize] as usize;
            sa[buf[c] as usize] = d;
            buf[c] += 1;
        }
        buf.copy_from_slice(&sum_l);
        let c = s[n - 1] as usize;
        sa[buf[c] as usize] = (n - 1) as u32;
        buf[c] += 1;
        for i in 0..n {
            let v = sa[i];
            if v != NIL && v >= 1 && !ls[v as usize - 1] {
                let c = s[v as usize - 1] as usize;
                sa[buf[c] as usize] = v - 1;
                buf[c] += 1;
            }
        }
        buf.copy_from_slice(&sum_l);
        for i in (0..n).rev() {
            let v = sa[i];
            if v != NIL && v >= 1 && ls[v as usize - 1] {
                let c = s[v as usize - 1] as usize + 1;
                buf[c] -= 1;
                sa[buf[c] as usize] = v - 1;
            }
        }
    };

    let mut lms_map = vec![NIL; n + 1];
    let mut lms = Vec::new();
    for i in 1..n {
        if !ls[i - 1] && ls[i] {
            lms_map[i] = lms.len() as u32;
            lms.push(i as u32);
        }
    }
    let m = lms.len();
    induce(&mut sa, &lms);

    if m > 0 {
        let mut sorted_lms: Vec<u32> = sa.iter().copied().filter(|&v| v != NIL && lms_map[v as usize] != NIL).collect();
        let mut rec_s = vec![0u32; m];
        let mut rec_upper = 0u32;
        rec_s[lms_map[sorted_lms[0] as usize] as usize] = 0;
        for i in 1..m {
            let mut l = sorted_lms[i - 1] as usize;
            let mut r = sorted_lms[i] as usize;
            let end_l = lms.get(lms_map[l] as usize + 1).map_or(n, |&e| e as usize);
            let end_r = lms.get(lms_map[r] as usize + 1).map_or(n, |&e| e as usize);
            let mut same = true;
            if end_l - l != end_r - r {
                same = false;
            } else {
                while l < end_l && s[l] == s[r] {
                    l += 1;
                    r += 1;
                }
                if l == n || s[l] != s[r] {
                    same = false;
                }
            }
            if !same {
                rec_upper += 1;
            }
            rec_s[lms_map[sorted_lms[i] as usize] as usize] = rec_upper;
        }
        let rec_sa = sa_is(&rec_s, rec_upper as usize);
        for (slot, &r) in sorted_lms.iter_mut().zip(&rec_sa) {
            *slot = lms[r as usize];
        }
        induce(&mut sa, &sorted_lms);
    }
    sa
}

/// Kasai's algorithm: `lcp[r]` is the longest common prefix of the suffixes
/// ranked `r - 1` and `r`; `lcp[0] = 0`.
pub fn lcp_array(s: &[u32], sa: &[u32]) -> Vec<u32> {
    let n = s.len();
    let mut rank = vec![0u32; n];
    for (r, &p) in sa.iter().enumerate() {
        rank[p as usize] = r as u32;
    }
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for i in 0..n {
        let r = rank[i] as usize;
        if r == 0 {
            h = 0;
            continue;
        }
        let j = sa[r - 1] as usize;
        while i + h < n && j + h < n && s[i + h] == s[j + h] {
            h += 1;
        }
        lcp[r] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}

/// Minimum segment tree with "first value below x" searches.
struct MinTree {
    size: usize,
    tree: Vec<u32>,
}

impl MinTree {
    fn new(values: &[u32]) -> Self {
        let size = values.len().next_power_of_two().max(1);
        let mut tree = vec![u32::MAX; 2 * size];
        tree[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i].min(tree[2 * i + 1]);
        }
        MinTree { size, tree }
    }

    /// Minimum over `lo..hi`.
    fn min(&self, lo: usize, hi: usize) -> u32 {
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        let mut m = u32::MAX;
        while l < r {
            if l & 1 == 1 {
                m = m.min(self.tree[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                m = m.min(self.tree[r]);
            }
            l >>= 1;
            r >>= 1;
        }
        m
    }

    /// Largest index below `end` holding a value below `x`.
    fn last_below(&self, end: usize, x: u32) -> Option<usize> {
        self.last_below_in(1, 0, self.size, end, x)
    }

    fn last_below_in(&self, node: usize, nl: usize, nr: usize, end: usize, x: u32) -> Option<usize> {
        if nl >= end || self.tree[node] >= x {
            return None;
        }
        if nr - nl == 1 {
            return Some(nl);
        }
        let mid = (nl + nr) / 2;
        self.last_below_in(2 * node + 1, mid, nr, end, x).or_else(|| self.last_below_in(2 * node, nl, mid, end, x))
    }

    /// Smallest index at or above `start` holding a value below `x`.
    fn first_below(&self, start: usize, x: u32) -> Option<usize> {
        self.first_below_in(1, 0, self.size, start, x)
    }

    fn first_below_in(&self, node: usize, nl: usize, nr: usize, start: usize, x: u32) -> Option<usize> {
        if nr <= start || self.tree[node] >= x {
            return None;
        }
        if nr - nl == 1 {
            return Some(nl);
        }
        let mid = (nl + nr) / 2;
        self.first_below_in(2 * node, nl, mid, start, x)
            .or_else(|| self.first_below_in(2 * node + 1, mid, nr, start, x))
    }
}

/// Answers longest-previous-factor queries with leftmost sources.
pub struct FactorIndex {
    n: usize,
    rank: Vec<u32>,
    sa: MinTree,
    lcp: MinTree,
}

impl FactorIndex {
    pub fn new<T: Symbol>(s: &[T]) -> Self {
        let text: Vec<u32> = s.iter().map(|c| c.value()).collect();
        let upper = text.iter().copied().max().unwrap_or(0);
        let sa = suffix_array(&text, upper);
        let lcp = lcp_array(&text, &sa);
        drop(text);
        let mut rank = vec![0u32; sa.len()];
        for (r, &p) in sa.iter().enumerate() {
            rank[p as usize] = r as u32;
        }
        FactorIndex { n: sa.len(), rank, sa: MinTree::new(&sa), lcp: MinTree::new(&lcp) }
    }

    /// Length of the longest prefix of suffix `i` (0-based) that starts
    /// earlier, and the leftmost such start.
    pub fn longest_previous_factor(&self, i: usize) -> (usize, usize) {
        let r = self.rank[i] as usize;
        let i32 = i as u32;
        let mut len = 0u32;
        if let Some(left) = self.sa.last_below(r, i32) {
            len = len.max(self.lcp.min(left + 1, r + 1));
        }
        if let Some(right) = self.sa.first_below(r + 1, i32) {
            if right < self.n {
                len = len.max(self.lcp.min(r + 1, right + 1));
            }
        }
        if len == 0 {
            return (0, 0);
        }
        let lo = self.lcp.last_below(r + 1, len).unwrap_or(0);
        let hi = self.lcp.first_below(r + 1, len).unwrap_or(self.n).min(self.n);
        (len as usize, self.sa.min(lo, hi) as usize)
    }
}

pub fn lzss_parse_indexed<T: Symbol>(s: &[T]) -> ParseList {
    let index = FactorIndex::new(s);
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let (len, src) = index.longest_previous_factor(i);
        phrases.push(if len == 0 {
            Phrase::literal(i as u64 + 1, s[i].value())
        } else {
            Phrase::copy(i as u64 + 1, len as u64, src as u64 + 1)
        });
        i += len.max(1);
    }
    ParseList { phrases, target_length: s.len() as u64 }
}

pub fn lz77_parse_indexed<T: Symbol>(s: &[T]) -> ParseList {
    let index = FactorIndex::new(s);
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let (len, src) = index.longest_previous_factor(i);
        let ph = lz77_phrase(s, i, len, src);
        i += ph.len as usize;
        phrases.push(ph);
    }
    ParseList { phrases, target_length: s.len() as u64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_sa(s: &[u32]) -> Vec<u32> {
        let mut sa: Vec<u32> = (0..s.len() as u32).collect();
        sa.sort_by(|&a, &b| s[a as usize..].cmp(&s[b as usize..]));
        sa
    }

    #[test]
    fn banana() {
        let s: Vec<u32> = b"banana".iter().map(|&c| c as u32).collect();
        assert_eq!(suffix_array(&s, 255), vec![5, 3, 1, 0, 4, 2]);
        assert_eq!(lcp_array(&s, &[5, 3, 1, 0, 4, 2]), vec![0, 1, 3, 0, 0, 2]);
    }

    #[test]
    fn unary_and_periodic() {
        for s in [vec![0u32; 100], (0..100).map(|i| i % 3).collect::<Vec<_>>()] {
            assert_eq!(suffix_array(&s, 2), naive_sa(&s));
        }
    }

    #[test]
    fn indexed_parsers_agree_on_long_runs() {
        let s = vec![5u8; 3000];
        assert_eq!(lzss_parse_indexed(&s), super::super::brute_lzss(&s));
        assert_eq!(lz77_parse_indexed(&s), super::super::brute_lz77(&s));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn sa_matches_naive(s in proptest::collection::vec(0u32..5, 0..400)) {
            let sa = suffix_array(&s, 4);
            prop_assert_eq!(&sa, &naive_sa(&s));
            let lcp = lcp_array(&s, &sa);
            for r in 1..sa.len() {
                let (a, b) = (&s[sa[r - 1] as usize..], &s[sa[r] as usize..]);
                let h = a.iter().zip(b).take_while(|(x, y)| x == y).count();
                prop_assert_eq!(lcp[r] as usize, h);
            }
        }

        #[test]
        fn indexed_parsers_match_brute_force(s in proptest::collection::vec(0u32..3, 0..400)) {
            prop_assert_eq!(lzss_parse_indexed(&s), super::super::brute_lzss(&s));
            prop_assert_eq!(lz77_parse_indexed(&s), super::super::brute_lz77(&s));
        }

        #[test]
        fn wide_alphabet_parsers_match(s in proptest::collection::vec(0u32..2000, 0..200)) {
            prop_assert_eq!(lzss_parse_indexed(&s), super::super::brute_lzss(&s));
        }
    }
}
