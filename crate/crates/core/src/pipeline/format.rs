//! Container layout and the bit-packed grammar payload.
//!
//! The payload has three sections:
//!
//! 1. topology, two bits per rule: walking the grammar depth first from the
//!    top sequence, each rule is expanded at its first visit and each of
//!    its two children gets a bit, 1 if the child is a rule visited for the
//!    first time (and is expanded next), 0 otherwise;
//! 2. the top sequence, one code per symbol;
//! 3. one code for every 0 bit of the topology, in visiting order.
//!
//! A code below `num_terminals` is a terminal; `num_terminals + k` is the
//! rule with preorder rank `k`. In the top sequence, the code of the next
//! unassigned rank introduces a new rule whose subtree follows in the
//! topology section. Grammars without rules store only the top sequence,
//! with codes of `ceil(log2 num_terminals)` bits.

use std::io::{Read, Write};

use crate::bitio::{ceil_log2, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::grammar::Grammar;

pub const MAGIC: [u8; 12] = *b"RPAIRSLP\0\r\n\x1a";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 108;

/// The grammar has no rules; the payload is the bare top sequence.
pub const FLAG_NO_RULES: u32 = 1;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Header {
    pub window: u32,
    pub threshold: u64,
    pub hash_base: u64,
    pub hash_modulus: u64,
    pub num_terminals: u32,
    pub b: u64,
    pub recursion_depth: u32,
    pub r: u64,
    pub c: u64,
    pub input_len: u64,
    pub payload_bits: u64,
    pub flags: u32,
    pub code_width: u32,
    /// xxh64 of the input, seed 0.
    pub checksum: u64,
}

impl Header {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        let mut at = 0;
        let mut put = |bytes: &[u8]| {
            out[at..at + bytes.len()].copy_from_slice(bytes);
            at += bytes.len();
        };
        put(&MAGIC);
        put(&FORMAT_VERSION.to_le_bytes());
        put(&self.window.to_le_bytes());
        put(&self.threshold.to_le_bytes());
        put(&self.hash_base.to_le_bytes());
        put(&self.hash_modulus.to_le_bytes());
        put(&self.num_terminals.to_le_bytes());
        put(&self.b.to_le_bytes());
        put(&self.recursion_depth.to_le_bytes());
        put(&self.r.to_le_bytes());
        put(&self.c.to_le_bytes());
        put(&self.input_len.to_le_bytes());
        put(&self.payload_bits.to_le_bytes());
        put(&self.flags.to_le_bytes());
        put(&self.code_width.to_le_bytes());
        put(&self.checksum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("header needs {HEADER_LEN} bytes, got {}", bytes.len())));
        }
        if bytes[..12] != MAGIC {
            return Err(Error::Format("bad magic number".into()));
        }
        let mut at = 12;
        let mut take = |n: usize| {
            let s = &bytes[at..at + n];
            at += n;
            s
        };
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(4));
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        Ok(Header {
            window: u32_at(take(4)),
            threshold: u64_at(take(8)),
            hash_base: u64_at(take(8)),
            hash_modulus: u64_at(take(8)),
            num_terminals: u32_at(take(4)),
            b: u64_at(take(8)),
            recursion_depth: u32_at(take(4)),
            r: u64_at(take(8)),
            c: u64_at(take(8)),
            input_len: u64_at(take(8)),
            payload_bits: u64_at(take(8)),
            flags: u32_at(take(4)),
            code_width: u32_at(take(4)),
            checksum: u64_at(take(8)),
        })
    }

    pub fn payload_bytes(&self) -> u64 {
        self.payload_bits.div_ceil(8)
    }
}

/// Size in bits that the fixed-width accounting charges for a grammar with
/// `r` rules and a top sequence of length `c`: two topology bits per rule
/// plus `r + c` symbols of `ceil(log2 r)` bits (at least 1). Without rules,
/// `c` terminals of `ceil(log2 num_terminals)` bits.
pub fn accounted_bits(r: u64, c: u64, num_terminals: u32) -> u64 {
    if r == 0 {
        c * ceil_log2(num_terminals as u64) as u64
    } else {
        2 * r + (r + c) * ceil_log2(r).max(1) as u64
    }
}

/// Code width used for a grammar with `r` rules.
pub fn code_width(r: u64, num_terminals: u32) -> u32 {
    if r == 0 {
        ceil_log2(num_terminals as u64)
    } else {
        ceil_log2(num_terminals as u64 + r).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGrammar {
    pub payload: Vec<u8>,
    pub payload_bits: u64,
    pub code_width: u32,
    pub flags: u32,
    /// Rules whose first visit is in the top sequence.
    pub top_rules: u64,
}

/// Packs a grammar whose rules are all reachable from the top sequence.
pub fn encode_grammar(g: &Grammar) -> Result<EncodedGrammar> {
    g.validate()?;
    let sigma = g.num_terminals;
    let r = g.r();
    let width = code_width(r as u64, sigma);
    let mut w = BitWriter::new();
    if r == 0 {
        for &s in &g.top {
            w.write_bits(s as u64, width);
        }
        return Ok(EncodedGrammar {
            payload_bits: w.bit_len(),
            payload: w.into_bytes(),
            code_width: width,
            flags: FLAG_NO_RULES,
            top_rules: 0,
        });
    }

    let mut rank = vec![NONE; r];
    let mut next_rank = 0u32;
    let mut topology = Vec::with_capacity(2 * r);
    let mut tops = Vec::with_capacity(g.c());
    let mut leaves = Vec::with_capacity(r);
    let mut top_rules = 0;
    let mut stack: Vec<(u32, u8)> = Vec::new();
    for &s in &g.top {
        if s < sigma {
            tops.push(s);
            continue;
        }
        let idx = (s - sigma) as usize;
        if rank[idx] != NONE {
            tops.push(sigma + rank[idx]);
            continue;
        }
        tops.push(sigma + next_rank);
        top_rules += 1;
        rank[idx] = next_rank;
        next_rank += 1;
        stack.push((s, 0));
        while let Some(&mut (sym, ref mut k)) = stack.last_mut() {
            if *k == 2 {
                stack.pop();
                continue;
            }
            let (a, b) = g.rule(sym);
            let child = if *k == 0 { a } else { b };
            *k += 1;
            if child >= sigma && rank[(child - sigma) as usize] == NONE {
                topology.push(true);
                rank[(child - sigma) as usize] = next_rank;
                next_rank += 1;
                stack.push((child, 0));
            } else {
                topology.push(false);
                leaves.push(if child < sigma { child } else { sigma + rank[(child - sigma) as usize] });
            }
        }
    }
    if next_rank as usize != r {
        return Err(Error::invalid(format!(
            "{} of {r} rules are unreachable from the top sequence",
            r - next_rank as usize
        )));
    }
    for bit in topology {
        w.write_bit(bit);
    }
    for code in tops.into_iter().chain(leaves) {
        w.write_bits(code as u64, width);
    }
    Ok(EncodedGrammar { payload_bits: w.bit_len(), payload: w.into_bytes(), code_width: width, flags: 0, top_rules })
}

/// Inverse of [`encode_grammar`]. Rules come back in postorder of their
/// first visit, i.e. the canonical order.
pub fn decode_grammar(payload: &[u8], h: &Header) -> Result<Grammar> {
    let sigma = h.num_terminals;
    let corrupt = |bit_offset: u64, reason: &str| Error::Corrupt { bit_offset, reason: reason.to_string() };
    let width = code_width(h.r, sigma);
    if h.code_width != width {
        return Err(Error::Format(format!("code width {} does not match {width}", h.code_width)));
    }
    if (h.flags & FLAG_NO_RULES != 0) != (h.r == 0) {
        return Err(Error::Format("rule-count flag disagrees with the rule count".into()));
    }
    if sigma as u64 + h.r >= NONE as u64 {
        return Err(Error::Format("too many symbols for 32-bit identifiers".into()));
    }
    let w = width as u64;
    let consistent = if h.r == 0 {
        h.payload_bits == h.c.saturating_mul(w)
    } else {
        let min_bits = h.r.saturating_mul(2).saturating_add(h.r.saturating_add(h.c).saturating_mul(w));
        let max_bits = min_bits.saturating_add(h.r.min(h.c).saturating_mul(w));
        (min_bits..=max_bits).contains(&h.payload_bits)
    };
    if !consistent {
        return Err(Error::Format(format!(
            "payload of {} bits is inconsistent with r = {} and c = {}",
            h.payload_bits, h.r, h.c
        )));
    }
    let mut g = Grammar::new(sigma);
    if h.r == 0 {
        let mut rd = BitReader::new(payload, h.payload_bits)?;
        for _ in 0..h.c {
            let at = rd.position();
            let code = rd.read_bits(width)?;
            if code >= sigma as u64 {
                return Err(corrupt(at, "terminal code out of range"));
            }
            g.top.push(code as u32);
        }
        return Ok(g);
    }

    let r = h.r as usize;
    let mut topo = BitReader::new(payload, h.payload_bits)?;
    let mut tops = topo.clone();
    tops.seek(2 * h.r);
    let mut leaves = topo.clone();
    leaves.seek(2 * h.r + h.c * w);

    g.rules.reserve(r);
    g.top.reserve(h.c as usize);
    let mut sym_of_rank = vec![NONE; r];
    let mut next_rank = 0u32;
    // (rank, left child once known)
    let mut stack: Vec<(u32, u32)> = Vec::new();
    let resolve = |code: u64, at: u64, sym_of_rank: &[u32]| -> Result<u32> {
        if code < sigma as u64 {
            return Ok(code as u32);
        }
        let k = code - sigma as u64;
        match sym_of_rank.get(k as usize) {
            Some(&s) if s != NONE => Ok(s),
            _ => Err(corrupt(at, "reference to an undefined rule")),
        }
    };
    for _ in 0..h.c {
        let at = tops.position();
        let code = tops.read_bits(width)?;
        if code != sigma as u64 + next_rank as u64 {
            g.top.push(resolve(code, at, &sym_of_rank)?);
            continue;
        }
        if next_rank as usize >= r {
            return Err(corrupt(at, "more rules than the header declares"));
        }
        stack.push((next_rank, NONE));
        next_rank += 1;
        let root = loop {
            let at = topo.position();
            if at >= 2 * h.r {
                return Err(corrupt(at, "topology section overrun"));
            }
            let child = if topo.read_bit()? {
                if next_rank as usize >= r {
                    return Err(corrupt(at, "more rules than the header declares"));
                }
                stack.push((next_rank, NONE));
                next_rank += 1;
                continue;
            } else {
                let at = leaves.position();
                let code = leaves.read_bits(width)?;
                resolve(code, at, &sym_of_rank)?
            };
            // hand the finished child to its parent, completing rules upward
            let mut child = child;
            let done = loop {
                let frame = stack.last_mut().expect("stack holds the current rule");
                if frame.1 == NONE {
                    frame.1 = child;
                    break None;
                }
                let (rank, left) = *frame;
                stack.pop();
                let sym = g.push_rule(left, child);
                sym_of_rank[rank as usize] = sym;
                if stack.is_empty() {
                    break Some(sym);
                }
                child = sym;
            };
            if let Some(sym) = done {
                break sym;
            }
        };
        g.top.push(root);
    }
    if next_rank as usize != r || topo.position() != 2 * h.r || leaves.position() != h.payload_bits {
        return Err(corrupt(topo.position(), "payload sections do not match the header"));
    }
    Ok(g)
}

/// A header plus its byte-padded payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedArtifact {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl CompressedArtifact {
    pub fn accounted_bits(&self) -> u64 {
        accounted_bits(self.header.r, self.header.c, self.header.num_terminals)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.header.to_bytes()).map_err(|e| Error::io(0, e))?;
        out.write_all(&self.payload).map_err(|e| Error::io(HEADER_LEN as u64, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Header::from_bytes(bytes)?;
        let body = &bytes[HEADER_LEN..];
        let need = header.payload_bytes();
        if (body.len() as u64) < need {
            return Err(Error::Corrupt {
                bit_offset: body.len() as u64 * 8,
                reason: format!("payload truncated: {} of {need} bytes present", body.len()),
            });
        }
        if body.len() as u64 > need {
            return Err(Error::Format(format!("{} trailing bytes after the payload", body.len() as u64 - need)));
        }
        Ok(CompressedArtifact { header, payload: body.to_vec() })
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::io(bytes.len() as u64, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn grammar(&self) -> Result<Grammar> {
        decode_grammar(&self.payload, &self.header)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repair::repair_build;
    use proptest::prelude::*;

    fn header_for(g: &Grammar, e: &EncodedGrammar) -> Header {
        Header {
            num_terminals: g.num_terminals,
            r: g.r() as u64,
            c: g.c() as u64,
            payload_bits: e.payload_bits,
            flags: e.flags,
            code_width: e.code_width,
            ..Header::default()
        }
    }

    fn roundtrip(g: &Grammar) -> Grammar {
        let e = encode_grammar(g).unwrap();
        decode_grammar(&e.payload, &header_for(g, &e)).unwrap()
    }

    #[test]
    fn accounting_examples() {
        assert_eq!(accounted_bits(1, 2, 256), 5);
        assert_eq!(accounted_bits(0, 3, 256), 24);
        assert_eq!(accounted_bits(4, 6, 256), 8 + 10 * 2);
        assert_eq!(accounted_bits(5, 1, 256), 10 + 6 * 3);
    }

    #[test]
    fn rule_free_grammar() {
        let g = Grammar { num_terminals: 256, rules: vec![], top: vec![1, 255, 0] };
        let e = encode_grammar(&g).unwrap();
        assert_eq!(e.payload_bits, 24);
        assert_eq!(e.payload, vec![1, 255, 0]);
        assert_eq!(roundtrip(&g), g);
    }

    #[test]
    fn single_rule_layout() {
        let g = Grammar { num_terminals: 256, rules: vec![(97, 98)], top: vec![256, 256] };
        let e = encode_grammar(&g).unwrap();
        // topology 00, tops [new, ref 0], leaves a b; 9-bit codes
        assert_eq!(e.payload_bits, 2 + 4 * 9);
        assert_eq!(e.top_rules, 1);
        assert_eq!(roundtrip(&g), g);
    }

    #[test]
    fn empty_grammar() {
        let g = Grammar::new(256);
        let e = encode_grammar(&g).unwrap();
        assert_eq!(e.payload_bits, 0);
        assert_eq!(roundtrip(&g), g);
    }

    #[test]
    fn unreachable_rules_are_rejected() {
        let g = Grammar { num_terminals: 2, rules: vec![(0, 1), (1, 1)], top: vec![2] };
        assert!(matches!(encode_grammar(&g), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn header_roundtrip_and_magic() {
        let h = Header { window: 64, threshold: 64, r: 9, c: 3, checksum: 0xdead_beef, ..Header::default() };
        let bytes = h.to_bytes();
        assert_eq!(Header::from_bytes(&bytes).unwrap(), h);
        let mut bad = bytes;
        bad[0] ^= 1;
        assert!(matches!(Header::from_bytes(&bad), Err(Error::Format(_))));
        let mut future = h.to_bytes();
        future[12] = 2;
        assert!(matches!(Header::from_bytes(&future), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_reports_bit_offset() {
        let g = repair_build(b"abcabcabcabc", 256).unwrap().canonicalize();
        let e = encode_grammar(&g).unwrap();
        let art = CompressedArtifact { header: header_for(&g, &e), payload: e.payload };
        let mut bytes = art.to_bytes();
        bytes.pop();
        let err = CompressedArtifact::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Corrupt { bit_offset, .. } if bit_offset == (art.payload.len() as u64 - 1) * 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn repair_grammars_roundtrip(s in proptest::collection::vec(0u8..4, 0..300)) {
            let g = repair_build(&s, 256).unwrap().canonicalize();
            let e = encode_grammar(&g).unwrap();
            let back = decode_grammar(&e.payload, &header_for(&g, &e)).unwrap();
            prop_assert_eq!(&back, &g);
            let r = g.r() as u64;
            let w = code_width(r, 256) as u64;
            let expected = if r == 0 { g.c() as u64 * 8 } else { 2 * r + (r + g.c() as u64 + e.top_rules) * w };
            prop_assert_eq!(e.payload_bits, expected);
        }

        #[test]
        fn corrupted_payload_never_panics(s in proptest::collection::vec(0u8..4, 1..200), flip in any::<proptest::sample::Index>()) {
            let g = repair_build(&s, 256).unwrap().canonicalize();
            let e = encode_grammar(&g).unwrap();
            let h = header_for(&g, &e);
            let mut payload = e.payload.clone();
            let bit = flip.index(e.payload_bits as usize);
            payload[bit / 8] ^= 0x80 >> (bit % 8);
            if let Ok(back) = decode_grammar(&payload, &h) {
                prop_assert!(back.validate().is_ok());
            }
        }
    }
}
