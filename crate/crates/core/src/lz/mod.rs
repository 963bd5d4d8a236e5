//! LZSS and LZ77 parsers, and the LZSS-like parse derived from an Rsync
//! parse by mapping parses of the dictionary string and of the block-ID
//! sequence back onto the input.
//!
//! Positions in phrases are 1-based. Among equally long sources the
//! leftmost one is reported.

mod rparse;
pub mod sa;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub use rparse::{rparse, rparse_from_parts, RparseTrace};

/// Inputs up to this length are parsed by direct comparison; longer ones go
/// through a suffix array.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhraseKind {
    /// A symbol that has not occurred before.
    Literal(u32),
    /// A copy of the `len` symbols starting at `src`.
    Copy { src: u64 },
    /// A copy of `len - 1` symbols starting at `src`, followed by `ch`.
    CopyLiteral { src: u64, ch: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phrase {
    pub pos: u64,
    pub len: u64,
    pub kind: PhraseKind,
}

impl Phrase {
    pub fn literal(pos: u64, ch: u32) -> Self {
        Phrase { pos, len: 1, kind: PhraseKind::Literal(ch) }
    }

    pub fn copy(pos: u64, len: u64, src: u64) -> Self {
        Phrase { pos, len, kind: PhraseKind::Copy { src } }
    }

    pub fn end(&self) -> u64 {
        self.pos + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseList {
    pub phrases: Vec<Phrase>,
    pub target_length: u64,
}

impl ParseList {
    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Checks that the phrases are consecutive and cover `1..=target_length`.
    pub fn check_coverage(&self) -> Result<()> {
        let mut next = 1u64;
        for (k, ph) in self.phrases.iter().enumerate() {
            if ph.pos != next || ph.len == 0 {
                return Err(Error::invalid(format!(
                    "phrase {k} starts at {} with length {} but position {next} is next",
                    ph.pos, ph.len
                )));
            }
            next = ph.end();
        }
        if next != self.target_length + 1 {
            return Err(Error::invalid(format!("phrases cover {} of {} positions", next - 1, self.target_length)));
        }
        Ok(())
    }
}

/// Length and leftmost start (0-based) of the longest prefix of `s[i..]`
/// that also starts before `i`. Overlap with `s[i..]` is allowed.
fn longest_previous_factor<T: Symbol>(s: &[T], i: usize) -> (usize, usize) {
    let mut best = (0, 0);
    let rest = &s[i..];
    for src in 0..i {
        let m = s[src..].iter().zip(rest).take_while(|(a, b)| a == b).count();
        if m > best.0 {
            best = (m, src);
        }
    }
    best
}

fn brute_lzss<T: Symbol>(s: &[T]) -> ParseList {
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let (len, src) = longest_previous_factor(s, i);
        phrases.push(if len == 0 {
            Phrase::literal(i as u64 + 1, s[i].value())
        } else {
            Phrase::copy(i as u64 + 1, len as u64, src as u64 + 1)
        });
        i += len.max(1);
    }
    ParseList { phrases, target_length: s.len() as u64 }
}

fn brute_lz77<T: Symbol>(s: &[T]) -> ParseList {
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let (len, src) = longest_previous_factor(s, i);
        phrases.push(lz77_phrase(s, i, len, src));
        i += phrases.last().unwrap().len as usize;
    }
    ParseList { phrases, target_length: s.len() as u64 }
}

/// Copies at most up to the second-to-last symbol so that every phrase ends
/// with an explicit symbol.
fn lz77_phrase<T: Symbol>(s: &[T], i: usize, lpf: usize, src: usize) -> Phrase {
    let copy = lpf.min(s.len() - i - 1);
    if copy == 0 {
        return Phrase::literal(i as u64 + 1, s[i].value());
    }
    Phrase {
        pos: i as u64 + 1,
        len: copy as u64 + 1,
        kind: PhraseKind::CopyLiteral { src: src as u64 + 1, ch: s[i + copy].value() },
    }
}

/// Greedy parse into first-occurrence literals and maximal copies of
/// earlier text.
pub fn lzss_parse<T: Symbol>(s: &[T]) -> ParseList {
    if s.len() <= BRUTE_FORCE_LIMIT {
        brute_lzss(s)
    } else {
        sa::lzss_parse_indexed(s)
    }
}

/// Classic LZ77: longest earlier-occurring prefix plus one explicit symbol.
/// The number of phrases is `z`.
pub fn lz77_parse<T: Symbol>(s: &[T]) -> ParseList {
    if s.len() <= BRUTE_FORCE_LIMIT {
        brute_lz77(s)
    } else {
        sa::lz77_parse_indexed(s)
    }
}

/// True iff every literal is the first occurrence of its symbol and every
/// copy matches an earlier-starting source.
pub fn validate_lzss_like<T: Symbol>(s: &[T], parse: &ParseList) -> Result<bool> {
    if parse.target_length != s.len() as u64 {
        return Err(Error::invalid(format!(
            "parse is for length {} but the string has length {}",
            parse.target_length,
            s.len()
        )));
    }
    parse.check_coverage()?;
    let mut seen = FxHashSet::default();
    for ph in &parse.phrases {
        let at = (ph.pos - 1) as usize;
        let len = ph.len as usize;
        match ph.kind {
            PhraseKind::Literal(ch) => {
                if ch != s[at].value() || seen.contains(&ch) {
                    return Ok(false);
                }
            }
            PhraseKind::Copy { src } => {
                if src == 0 || src >= ph.pos {
                    return Ok(false);
                }
                let from = (src - 1) as usize;
                if (0..len).any(|k| s[from + k] != s[at + k]) {
                    return Ok(false);
                }
            }
            PhraseKind::CopyLiteral { .. } => return Ok(false),
        }
        seen.extend(s[at..at + len].iter().map(|c| c.value()));
    }
    Ok(true)
}

/// Rebuilds the string a parse describes. Copies may overlap their target.
pub fn decode(parse: &ParseList) -> Result<Vec<u32>> {
    parse.check_coverage()?;
    let mut out: Vec<u32> = Vec::with_capacity(parse.target_length as usize);
    for ph in &parse.phrases {
        let (src, copy_len, tail) = match ph.kind {
            PhraseKind::Literal(ch) => (0, 0, Some(ch)),
            PhraseKind::Copy { src } => (src, ph.len, None),
            PhraseKind::CopyLiteral { src, ch } => (src, ph.len - 1, Some(ch)),
        };
        if copy_len > 0 {
            if src == 0 || src >= ph.pos {
                return Err(Error::invalid(format!(
                    "phrase at {} copies from {src}, which does not precede it",
                    ph.pos
                )));
            }
            let from = (src - 1) as usize;
            for k in 0..copy_len as usize {
                let c = out[from + k];
                out.push(c);
            }
        }
        out.extend(tail);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds(p: &ParseList) -> Vec<(u64, u64)> {
        p.phrases.iter().map(|ph| (ph.pos, ph.len)).collect()
    }

    #[test]
    fn lzss_abab() {
        let p = lzss_parse(b"abab");
        assert_eq!(kinds(&p), vec![(1, 1), (2, 1), (3, 2)]);
        assert_eq!(p.phrases[2].kind, PhraseKind::Copy { src: 1 });
    }

    #[test]
    fn lzss_overlapping_source() {
        let p = lzss_parse(b"aaaa");
        assert_eq!(p.phrases, vec![Phrase::literal(1, 97), Phrase::copy(2, 3, 1)]);
    }

    #[test]
    fn lz77_aaaa() {
        let p = lz77_parse(b"aaaa");
        assert_eq!(
            p.phrases,
            vec![Phrase::literal(1, 97), Phrase { pos: 2, len: 3, kind: PhraseKind::CopyLiteral { src: 1, ch: 97 } },]
        );
        assert_eq!(decode(&p).unwrap(), vec![97; 4]);
    }

    #[test]
    fn distinct_symbols_are_all_literals() {
        let s: Vec<u32> = (0..50).collect();
        assert_eq!(lzss_parse(&s).len(), 50);
        assert_eq!(lz77_parse(&s).len(), 50);
        assert!(lzss_parse::<u8>(&[]).is_empty());
    }

    #[test]
    fn leftmost_source_wins() {
        // "ab" occurs at 1 and 3 before position 5
        let p = lzss_parse(b"ababab");
        assert_eq!(p.phrases[2], Phrase::copy(3, 4, 1));
        let p = lzss_parse(b"xabyabzab");
        assert_eq!(p.phrases.last().unwrap().kind, PhraseKind::Copy { src: 2 });
    }

    #[test]
    fn validation_catches_bad_copies() {
        let s = b"abcabc";
        let mut p = lzss_parse(s);
        assert!(validate_lzss_like(s, &p).unwrap());
        p.phrases[3].kind = PhraseKind::Copy { src: 2 };
        assert!(!validate_lzss_like(s, &p).unwrap());
        p.phrases[3].kind = PhraseKind::Copy { src: 4 };
        assert!(!validate_lzss_like(s, &p).unwrap());
        let repeated_literal =
            ParseList { phrases: vec![Phrase::literal(1, 97), Phrase::literal(2, 97)], target_length: 2 };
        assert!(!validate_lzss_like(b"aa", &repeated_literal).unwrap());
    }

    #[test]
    fn validation_rejects_gaps() {
        let gap = ParseList { phrases: vec![Phrase::literal(1, 97), Phrase::literal(3, 98)], target_length: 3 };
        assert!(matches!(validate_lzss_like(b"aab", &gap), Err(Error::InvalidArgument(_))));
        let short = ParseList { phrases: vec![Phrase::literal(1, 97)], target_length: 2 };
        assert!(matches!(validate_lzss_like(b"ab", &short), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn parses_decode_and_relate(s in proptest::collection::vec(0u8..4, 0..300)) {
            let lzss = lzss_parse(&s);
            let lz77 = lz77_parse(&s);
            let expect: Vec<u32> = s.iter().map(|&c| c as u32).collect();
            prop_assert!(validate_lzss_like(&s, &lzss).unwrap());
            prop_assert_eq!(decode(&lzss).unwrap(), expect.clone());
            prop_assert_eq!(decode(&lz77).unwrap(), expect);
            prop_assert!(lz77.len() <= lzss.len());
            prop_assert!(lzss.len() <= 2 * lz77.len());
        }
    }
}
