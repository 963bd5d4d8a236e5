//! End-to-end compression: Rsync parse, grammars for the dictionary string
//! and the block-ID parse, grammar surgery, combination and packing.

mod format;
mod stats;

use std::hash::Hasher;
use std::io::{self, Read, Write};

use twox_hash::XxHash64;

use crate::ctph::{build_dictionary_string, ctph_parse, ctph_parse_stream, CtphConfig, Dictionary, RsyncParse};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::repair::{RePair, SlpBuilder};
use crate::slp::{combine, make_block_rules, prune_and_reroot, split_sublists, BlockRuleSet};
use crate::symbol::Symbol;

pub use format::{
    accounted_bits, code_width, decode_grammar, encode_grammar, CompressedArtifact, EncodedGrammar, Header,
    FLAG_NO_RULES, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use stats::{peak_memory_bytes, stats, StatsReport};

pub const DEFAULT_RECURSE_DEPTH: u32 = 1;
pub const DEFAULT_RECURSION_THRESHOLD: usize = 1 << 22;
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 20;

const BYTE_TERMINALS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressOptions {
    pub ctph: CtphConfig,
    /// How many times the block-ID parse may itself be compressed with
    /// this pipeline instead of a direct grammar build.
    pub recurse_depth: u32,
    /// Parses longer than this are recursed on while depth remains.
    pub recursion_threshold: usize,
    /// Read size for streamed input.
    pub chunk_size: usize,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            ctph: CtphConfig::default(),
            recurse_depth: DEFAULT_RECURSE_DEPTH,
            recursion_threshold: DEFAULT_RECURSION_THRESHOLD,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

/// Every intermediate result of one pipeline level.
#[derive(Debug, Clone)]
pub struct Stages<T> {
    pub dict: Dictionary<T>,
    pub parse: RsyncParse,
    /// Single-start SLP for the dictionary string.
    pub dictionary_grammar: Grammar,
    /// Pruned dictionary grammar plus one symbol per block.
    pub block_grammar: Grammar,
    pub block_rules: BlockRuleSet,
    /// Grammar for the block-ID sequence, over terminals `0..b`.
    pub parse_grammar: Grammar,
    /// Combined grammar, canonical.
    pub grammar: Grammar,
    /// Recursion levels used below this one.
    pub recursion_depth: u32,
}

/// Counters describing one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RpairTrace {
    pub input_len: u64,
    pub b: usize,
    pub parse_len: usize,
    pub dictionary_len: usize,
    /// Rules of the single-start SLP for the dictionary string.
    pub dictionary_rules: usize,
    /// Rules after pruning and adding block rules.
    pub block_grammar_rules: usize,
    pub block_rules_added: usize,
    pub recursion_depth: u32,
}

impl<T: Symbol> Stages<T> {
    pub fn trace(&self) -> RpairTrace {
        RpairTrace {
            input_len: self.parse.input_len(),
            b: self.dict.len(),
            parse_len: self.parse.len(),
            dictionary_len: self.dict.total_length(),
            dictionary_rules: self.dictionary_grammar.r(),
            block_grammar_rules: self.block_grammar.r(),
            block_rules_added: self.block_rules.new_rules,
            recursion_depth: self.recursion_depth,
        }
    }
}

/// Runs the grammar-building steps on an existing Rsync parse. Symbols of
/// the input must lie below `num_terminals`.
pub fn rpair_stages<T: Symbol>(
    dict: Dictionary<T>,
    parse: RsyncParse,
    num_terminals: u32,
    opts: &CompressOptions,
    builder: &dyn SlpBuilder,
    depth_left: u32,
) -> Result<Stages<T>> {
    let b = u32::try_from(dict.len()).map_err(|_| Error::invalid("too many distinct blocks"))?;
    let separators_end =
        num_terminals.checked_add(b).ok_or_else(|| Error::invalid("alphabet plus separators exceed 32 bits"))?;
    let d = build_dictionary_string(&dict, num_terminals);
    let dictionary_grammar = builder.build(&d, separators_end)?.binarize_top();
    drop(d);
    let (mut block_grammar, roots) = prune_and_reroot(&dictionary_grammar, &dict, num_terminals)?;
    let sublists = split_sublists(&roots, &block_grammar, &dict)?;
    drop(roots);
    let block_rules = make_block_rules(&sublists, &mut block_grammar)?;
    drop(sublists);

    let (parse_grammar, recursion_depth) = if depth_left > 0 && parse.len() > opts.recursion_threshold {
        let (sub_dict, sub_parse) = ctph_parse(&parse.ids, &opts.ctph);
        let sub = rpair_stages(sub_dict, sub_parse, b, opts, builder, depth_left - 1)?;
        (sub.grammar, sub.recursion_depth + 1)
    } else {
        (builder.build(&parse.ids, b)?, 0)
    };
    let grammar = combine(&parse_grammar, &block_rules, &block_grammar)?;
    Ok(Stages { dict, parse, dictionary_grammar, block_grammar, block_rules, parse_grammar, grammar, recursion_depth })
}

/// Grammar for `input` built with the given SLP builder.
pub fn rpair_grammar<T: Symbol>(
    input: &[T],
    num_terminals: u32,
    opts: &CompressOptions,
    builder: &dyn SlpBuilder,
) -> Result<(Grammar, RpairTrace)> {
    let (dict, parse) = ctph_parse(input, &opts.ctph);
    let stages = rpair_stages(dict, parse, num_terminals, opts, builder, opts.recurse_depth)?;
    let trace = stages.trace();
    Ok((stages.grammar, trace))
}

fn checksum(input: &[u8]) -> u64 {
    XxHash64::oneshot(0, input)
}

fn artifact(
    grammar: &Grammar,
    trace: &RpairTrace,
    opts: &CompressOptions,
    checksum: u64,
) -> Result<CompressedArtifact> {
    let enc = encode_grammar(grammar)?;
    let header = Header {
        window: opts.ctph.window() as u32,
        threshold: opts.ctph.threshold(),
        hash_base: opts.ctph.hash_base(),
        hash_modulus: opts.ctph.hash_modulus(),
        num_terminals: grammar.num_terminals,
        b: trace.b as u64,
        recursion_depth: trace.recursion_depth,
        r: grammar.r() as u64,
        c: grammar.c() as u64,
        input_len: trace.input_len,
        payload_bits: enc.payload_bits,
        flags: enc.flags,
        code_width: enc.code_width,
        checksum,
    };
    Ok(CompressedArtifact { header, payload: enc.payload })
}

pub fn compress(input: &[u8], opts: &CompressOptions) -> Result<CompressedArtifact> {
    Ok(compress_with(input, opts, &RePair)?.0)
}

pub fn compress_with(
    input: &[u8],
    opts: &CompressOptions,
    builder: &dyn SlpBuilder,
) -> Result<(CompressedArtifact, RpairTrace)> {
    if opts.ctph.window() > u32::MAX as usize {
        return Err(Error::invalid("window does not fit the header"));
    }
    let (grammar, trace) = rpair_grammar(input, BYTE_TERMINALS, opts, builder)?;
    Ok((artifact(&grammar, &trace, opts, checksum(input))?, trace))
}

/// Compresses `input` and keeps every intermediate stage alongside the
/// artifact.
pub fn compress_stages(
    input: &[u8],
    opts: &CompressOptions,
    builder: &dyn SlpBuilder,
) -> Result<(CompressedArtifact, Stages<u8>)> {
    if opts.ctph.window() > u32::MAX as usize {
        return Err(Error::invalid("window does not fit the header"));
    }
    let (dict, parse) = ctph_parse(input, &opts.ctph);
    let stages = rpair_stages(dict, parse, BYTE_TERMINALS, opts, builder, opts.recurse_depth)?;
    let art = artifact(&stages.grammar, &stages.trace(), opts, checksum(input))?;
    Ok((art, stages))
}

struct HashingReader<R> {
    inner: R,
    hasher: XxHash64,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.write(&buf[..n]);
        Ok(n)
    }
}

/// Compresses a byte stream; only the Rsync dictionary and parse are held
/// in memory, never the whole input.
pub fn compress_stream<R: Read>(reader: R, opts: &CompressOptions) -> Result<(CompressedArtifact, RpairTrace)> {
    let mut hashing = HashingReader { inner: reader, hasher: XxHash64::with_seed(0) };
    let (dict, parse) = ctph_parse_stream(&mut hashing, &opts.ctph, opts.chunk_size)?;
    let stages = rpair_stages(dict, parse, BYTE_TERMINALS, opts, &RePair, opts.recurse_depth)?;
    let trace = stages.trace();
    let art = artifact(&stages.grammar, &trace, opts, hashing.hasher.finish())?;
    Ok((art, trace))
}

struct HashingWriter<W> {
    inner: W,
    hasher: XxHash64,
    written: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.write(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Streams the decompressed bytes to `out` and checks them against the
/// stored length and checksum. Returns the number of bytes written.
pub fn decompress_to<W: Write>(art: &CompressedArtifact, out: W) -> Result<u64> {
    let h = &art.header;
    if h.num_terminals != BYTE_TERMINALS {
        return Err(Error::Format(format!("{} terminals cannot be decoded to bytes", h.num_terminals)));
    }
    let grammar = art.grammar()?;
    if grammar.expanded_len() != h.input_len {
        return Err(Error::Corrupt {
            bit_offset: 0,
            reason: format!("grammar expands to {} bytes, header says {}", grammar.expanded_len(), h.input_len),
        });
    }
    let mut sink = HashingWriter { inner: out, hasher: XxHash64::with_seed(0), written: 0 };
    grammar.expand_to(&mut sink).map_err(|e| Error::io(sink.written, e))?;
    sink.flush().map_err(|e| Error::io(sink.written, e))?;
    if sink.hasher.finish() != h.checksum {
        return Err(Error::Corrupt { bit_offset: 0, reason: "checksum mismatch in decompressed output".into() });
    }
    Ok(sink.written)
}

pub fn decompress(art: &CompressedArtifact) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(art.header.input_len.min(1 << 30) as usize);
    decompress_to(art, &mut out)?;
    Ok(out)
}
