//! Property suite over a corpus: roundtrips, the phrase-count bounds
//! relating the Rsync-derived parse to LZSS and LZ77, the block-count bound
//! and the grammar-surgery invariants.

use std::sync::Mutex;

use crate::corpus::CorpusKind;
use crate::ctph::CtphConfig;
use crate::error::Result;
use crate::lz::{lz77_parse, lzss_parse, rparse, validate_lzss_like, ParseList, Phrase, PhraseKind};
use crate::pipeline::{compress_stages, decompress, CompressOptions};
use crate::repair::RePair;

/// One input with the options to compress it under.
#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub label: String,
    pub data: Vec<u8>,
    pub options: CompressOptions,
}

/// The Rsync-derived parser under test; replaceable to check that the
/// suite catches a bad one.
pub type RparseFn = dyn Fn(&[u8], &CtphConfig) -> Result<ParseList> + Sync;

pub const PROPERTIES: [&str; 8] =
    ["roundtrip", "rparse-valid", "rparse<=5*lzss", "lzss<=2*z", "z<=lzss", "b<=2z+2", "growth<=+1", "block-expansion"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub passed: u64,
    pub failed: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub cases: usize,
    pub tallies: [Tally; PROPERTIES.len()],
    /// `label: property` for every failure.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.tallies.iter().all(|t| t.failed == 0)
    }

    fn merge(&mut self, other: VerifyReport) {
        self.cases += other.cases;
        for (a, b) in self.tallies.iter_mut().zip(other.tallies) {
            a.passed += b.passed;
            a.failed += b.failed;
            a.skipped += b.skipped;
        }
        self.failures.extend(other.failures);
    }

    fn record(&mut self, label: &str, prop: usize, outcome: Option<bool>) {
        let t = &mut self.tallies[prop];
        match outcome {
            None => t.skipped += 1,
            Some(true) => t.passed += 1,
            Some(false) => {
                t.failed += 1;
                self.failures.push(format!("{label}: {}", PROPERTIES[prop]));
            }
        }
    }
}

/// A corpus mixing random, unary and mutated-copy inputs across window
/// sizes, thresholds and recursion depths.
pub fn default_corpus(seed: u64) -> Vec<VerifyCase> {
    let kinds = [
        CorpusKind::RandomBytes { len: 0 },
        CorpusKind::RandomBytes { len: 37 },
        CorpusKind::RandomBytes { len: 20_000 },
        CorpusKind::Unary { len: 5_000, byte: b'a' },
        CorpusKind::MutatedCopies { seed_len: 3_000, copies: 20, rate: 0.001 },
        CorpusKind::MutatedCopies { seed_len: 777, copies: 40, rate: 0.01 },
    ];
    let mut cases = Vec::new();
    for (k, kind) in kinds.iter().enumerate() {
        for &w in &[4usize, 16, 64] {
            for &p in &[1u64, 4, 64] {
                let depth = ((k + w + p as usize) % 3) as u32;
                cases.push(VerifyCase {
                    label: format!("{} w={w} p={p} depth={depth}", kind.label()),
                    data: kind.generate(seed.wrapping_add(k as u64)),
                    options: CompressOptions {
                        ctph: CtphConfig::new(w, p).expect("valid corpus parameters"),
                        recurse_depth: depth,
                        recursion_threshold: 64,
                        ..CompressOptions::default()
                    },
                });
            }
        }
    }
    cases
}

fn check_case(case: &VerifyCase, oracle_cap: u64, rparse_impl: &RparseFn) -> Result<VerifyReport> {
    let mut rep = VerifyReport { cases: 1, ..VerifyReport::default() };
    let s = &case.data;
    let opts = &case.options;
    let label = case.label.as_str();

    let (art, stages) = compress_stages(s, opts, &RePair)?;
    rep.record(label, 0, Some(decompress(&art).ok().as_deref() == Some(&s[..])));

    let in_range = s.len() as u64 <= oracle_cap;
    let oracles = in_range.then(|| -> Result<_> {
        let rp = rparse_impl(s, &opts.ctph)?;
        Ok((rp, lzss_parse(s).len(), lz77_parse(s).len()))
    });
    match oracles.transpose()? {
        Some((rp, lzss, z)) => {
            rep.record(label, 1, Some(validate_lzss_like(s, &rp).unwrap_or(false)));
            rep.record(label, 2, Some(rp.len() <= 5 * lzss));
            rep.record(label, 3, Some(lzss <= 2 * z));
            rep.record(label, 4, Some(z <= lzss));
            rep.record(label, 5, Some(stages.dict.len() <= 2 * z + 2));
        }
        None => {
            for prop in 1..=5 {
                rep.record(label, prop, None);
            }
        }
    }

    let trace = stages.trace();
    rep.record(label, 6, Some(trace.block_grammar_rules <= trace.dictionary_rules + 1));
    let blocks_ok = stages.block_rules.block_symbols.iter().enumerate().all(|(i, &x)| {
        stages
            .block_grammar
            .expand_symbol(x)
            .is_ok_and(|e| e.iter().map(|&t| t as u8).eq(stages.dict.block(i).iter().copied()))
    });
    rep.record(label, 7, Some(blocks_ok));
    Ok(rep)
}

/// Runs every property on every case, spreading cases over `threads`.
pub fn run_suite(
    cases: &[VerifyCase],
    oracle_cap: u64,
    threads: usize,
    rparse_impl: &RparseFn,
) -> Result<VerifyReport> {
    let total = Mutex::new(VerifyReport::default());
    let next = Mutex::new(0usize);
    let first_error = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    *n += 1;
                    *n - 1
                };
                let Some(case) = cases.get(i) else { break };
                match check_case(case, oracle_cap, rparse_impl) {
                    Ok(rep) => total.lock().unwrap().merge(rep),
                    Err(e) => {
                        first_error.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let mut rep = total.into_inner().unwrap();
    rep.failures.sort();
    Ok(rep)
}

/// The real Rsync-derived parser.
pub fn reference_rparse(s: &[u8], cfg: &CtphConfig) -> Result<ParseList> {
    rparse(s, cfg)
}

/// A deliberately wasteful variant that cuts every copy into single
/// symbols. Its output is still a valid LZSS-like parse.
pub fn faulty_rparse(s: &[u8], cfg: &CtphConfig) -> Result<ParseList> {
    let good = rparse(s, cfg)?;
    let mut phrases = Vec::with_capacity(s.len());
    for ph in good.phrases {
        match ph.kind {
            PhraseKind::Copy { src } => {
                phrases.extend((0..ph.len).map(|k| Phrase::copy(ph.pos + k, 1, src + k)));
            }
            _ => phrases.push(ph),
        }
    }
    Ok(ParseList { phrases, target_length: good.target_length })
}
