use super::{lzss_parse, ParseList, Phrase, PhraseKind};
use crate::ctph::{build_dictionary_string, ctph_parse, CtphConfig, Dictionary, RsyncParse};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Result of mapping the dictionary and block-ID parses onto the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RparseTrace {
    pub parse: ParseList,
    pub b: usize,
    pub dictionary_phrases: usize,
    pub block_phrases: usize,
    /// Separator literals and first block occurrences that were dropped.
    pub discarded: usize,
}

/// LZSS-like parse of `s` obtained through its Rsync parse.
pub fn rparse<T: Symbol>(s: &[T], config: &CtphConfig) -> Result<ParseList> {
    let (dict, parse) = ctph_parse(s, config);
    Ok(rparse_from_parts(s, &dict, &parse)?.parse)
}

/// Same as [`rparse`] for an already computed Rsync parse of `s`.
pub fn rparse_from_parts<T: Symbol>(s: &[T], dict: &Dictionary<T>, parse: &RsyncParse) -> Result<RparseTrace> {
    if parse.input_len() != s.len() as u64 {
        return Err(Error::invalid("Rsync parse does not belong to this input"));
    }
    let b = dict.len();
    let base = s.iter().map(|c| c.value()).max().map_or(0, |m| m + 1);
    let d = build_dictionary_string(dict, base);

    // 0-based start of each block in D and of its first occurrence in S
    let mut d_start = Vec::with_capacity(b + 1);
    let mut at = 0u64;
    for block in dict.iter() {
        d_start.push(at);
        at += block.len() as u64 + 1;
    }
    d_start.push(at);
    let mut first_occ = vec![u64::MAX; b];
    for (k, &id) in parse.ids.iter().enumerate() {
        let slot = first_occ
            .get_mut(id as usize)
            .ok_or_else(|| Error::consistency(format!("block ID {id} is not in the dictionary")))?;
        if *slot == u64::MAX {
            *slot = parse.span(k).start;
        }
    }
    let block_of = |pos: u64| d_start.partition_point(|&st| st <= pos) - 1;

    let mut out = Vec::new();
    let mut discarded = 0;
    let d_parse = lzss_parse(&d);
    for ph in &d_parse.phrases {
        let p0 = ph.pos - 1;
        let blk = block_of(p0);
        let offset = p0 - d_start[blk];
        let block_len = dict.block(blk).len() as u64;
        match ph.kind {
            PhraseKind::Literal(ch) => {
                if ch >= base {
                    discarded += 1;
                    continue;
                }
                out.push(Phrase::literal(first_occ[blk] + offset + 1, ch));
            }
            PhraseKind::Copy { src } => {
                let s0 = src - 1;
                let src_blk = block_of(s0);
                let src_offset = s0 - d_start[src_blk];
                if offset + ph.len > block_len || src_offset + ph.len > dict.block(src_blk).len() as u64 {
                    return Err(Error::consistency(format!("dictionary phrase at {} crosses a separator", ph.pos)));
                }
                out.push(Phrase::copy(first_occ[blk] + offset + 1, ph.len, first_occ[src_blk] + src_offset + 1));
            }
            PhraseKind::CopyLiteral { .. } => unreachable!("LZSS produces no mismatch phrases"),
        }
    }

    let p_parse = lzss_parse(&parse.ids);
    for ph in &p_parse.phrases {
        match ph.kind {
            PhraseKind::Literal(_) => discarded += 1,
            PhraseKind::Copy { src } => {
                let first = (ph.pos - 1) as usize;
                let last = first + ph.len as usize - 1;
                let start = parse.span(first).start;
                let len = parse.span(last).end - start;
                out.push(Phrase::copy(start + 1, len, parse.span((src - 1) as usize).start + 1));
            }
            PhraseKind::CopyLiteral { .. } => unreachable!("LZSS produces no mismatch phrases"),
        }
    }

    out.sort_unstable_by_key(|ph| ph.pos);
    let mapped = ParseList { phrases: out, target_length: s.len() as u64 };
    mapped.check_coverage().map_err(|e| Error::consistency(format!("mapped phrases do not tile the input: {e}")))?;
    Ok(RparseTrace { parse: mapped, b, dictionary_phrases: d_parse.len(), block_phrases: p_parse.len(), discarded })
}
