//! Context-triggered piecewise hashing.
//!
//! A polynomial rolling hash slides over the input with a window of `w`
//! symbols. Once the current block holds at least `w` symbols, the block is
//! closed at the last symbol of any window whose hash is divisible by `p`.
//! The next block starts right after, with an empty window, so no block
//! (other than the final one) is shorter than `w`. Distinct blocks form the
//! dictionary; the sequence of block IDs is the parse.

use std::hash::{Hash, Hasher};
use std::io::{self, Read, Write};
use std::ops::Range;

use rustc_hash::{FxHashMap, FxHasher};

use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub const DEFAULT_WINDOW: usize = 64;
pub const DEFAULT_THRESHOLD: u64 = 64;
pub const DEFAULT_HASH_BASE: u64 = 256;
pub const DEFAULT_HASH_MODULUS: u64 = 1_000_000_007;

const NO_BLOCK: u32 = u32::MAX;

/// Parameters of the block parser. Construct through [`CtphConfig::new`] or
/// [`CtphConfig::with_hash`], which validate every field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtphConfig {
    window: usize,
    threshold: u64,
    hash_base: u64,
    hash_modulus: u64,
}

impl Default for CtphConfig {
    fn default() -> Self {
        CtphConfig {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            hash_base: DEFAULT_HASH_BASE,
            hash_modulus: DEFAULT_HASH_MODULUS,
        }
    }
}

impl CtphConfig {
    pub fn new(window: usize, threshold: u64) -> Result<Self> {
        Self::with_hash(window, threshold, DEFAULT_HASH_BASE, DEFAULT_HASH_MODULUS)
    }

    pub fn with_hash(window: usize, threshold: u64, hash_base: u64, hash_modulus: u64) -> Result<Self> {
        if window < 2 {
            return Err(Error::invalid(format!("window size must be at least 2, got {window}")));
        }
        if window > u32::MAX as usize {
            return Err(Error::invalid(format!("window size {window} is too large")));
        }
        if threshold < 1 {
            return Err(Error::invalid("threshold must be at least 1"));
        }
        if hash_modulus >= 1 << 63 || !is_prime(hash_modulus) {
            return Err(Error::invalid(format!("hash modulus must be a prime below 2^63, got {hash_modulus}")));
        }
        if hash_base == 0 || hash_base >= hash_modulus {
            return Err(Error::invalid(format!("hash base must lie in [1, modulus), got {hash_base}")));
        }
        Ok(CtphConfig { window, threshold, hash_base, hash_modulus })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn hash_base(&self) -> u64 {
        self.hash_base
    }

    pub fn hash_modulus(&self) -> u64 {
        self.hash_modulus
    }

    /// `hash_base^(w-1) mod hash_modulus`, the weight of the outgoing symbol.
    fn leading_weight(&self) -> u64 {
        let mut acc = 1u64;
        for _ in 1..self.window {
            acc = mul_mod(acc, self.hash_base, self.hash_modulus);
        }
        acc
    }
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Polynomial hash of a full window: `sum(window[k] * base^(w-1-k)) mod modulus`.
pub fn window_hash<T: Symbol>(window: &[T], config: &CtphConfig) -> Result<u64> {
    if window.len() != config.window {
        return Err(Error::invalid(format!("window has length {}, expected {}", window.len(), config.window)));
    }
    Ok(horner(window, config))
}

fn horner<T: Symbol>(window: &[T], config: &CtphConfig) -> u64 {
    let m = config.hash_modulus;
    window.iter().fold(0u64, |h, &s| ((h as u128 * config.hash_base as u128 + s.value() as u128) % m as u128) as u64)
}

/// Rolling form of [`window_hash`]: constant-time slide by one symbol.
#[derive(Debug, Clone)]
pub struct RollingHash {
    value: u64,
    base: u64,
    modulus: u64,
    leading_weight: u64,
}

impl RollingHash {
    pub fn new<T: Symbol>(window: &[T], config: &CtphConfig) -> Result<Self> {
        let value = window_hash(window, config)?;
        Ok(RollingHash {
            value,
            base: config.hash_base,
            modulus: config.hash_modulus,
            leading_weight: config.leading_weight(),
        })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Drops `outgoing` from the front of the window and appends `incoming`.
    #[inline]
    pub fn roll(&mut self, outgoing: u32, incoming: u32) {
        let m = self.modulus as u128;
        let out = (outgoing as u128 * self.leading_weight as u128) % m;
        let h = (self.value as u128 + m - out) % m;
        self.value = ((h * self.base as u128 + incoming as u128) % m) as u64;
    }
}

/// The distinct blocks of a parse in order of first appearance, stored
/// back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary<T> {
    data: Vec<T>,
    ends: Vec<usize>,
}

impl<T> Default for Dictionary<T> {
    fn default() -> Self {
        Dictionary { data: Vec::new(), ends: Vec::new() }
    }
}

impl<T: Symbol> Dictionary<T> {
    /// Builds a dictionary from explicit blocks. Fails on duplicates or
    /// empty blocks.
    pub fn from_blocks<B: AsRef<[T]>>(blocks: &[B]) -> Result<Self> {
        let mut dict = Dictionary::default();
        let mut seen = FxHashMap::default();
        for (i, b) in blocks.iter().enumerate() {
            let b = b.as_ref();
            if b.is_empty() {
                return Err(Error::invalid(format!("block {i} is empty")));
            }
            if let Some(j) = seen.insert(b.to_vec(), i) {
                return Err(Error::invalid(format!("blocks {j} and {i} are equal")));
            }
            dict.push(b);
        }
        Ok(dict)
    }

    fn push(&mut self, block: &[T]) {
        self.data.extend_from_slice(block);
        self.ends.push(self.data.len());
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn block(&self, i: usize) -> &[T] {
        &self.data[self.block_range(i)]
    }

    /// Range of block `i` inside the concatenation of all blocks.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        start..self.ends[i]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.len()).map(move |i| self.block(i))
    }

    /// Sum of block lengths.
    pub fn total_length(&self) -> usize {
        self.data.len()
    }

    pub fn footprint_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>() + self.ends.len() * std::mem::size_of::<usize>()
    }
}

/// Block-ID sequence of a parse together with the start of every block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RsyncParse {
    pub ids: Vec<u32>,
    starts: Vec<u64>,
    input_len: u64,
}

impl RsyncParse {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn input_len(&self) -> u64 {
        self.input_len
    }

    /// Start and end (exclusive) of the `k`th block in the input.
    pub fn span(&self, k: usize) -> Range<u64> {
        let end = self.starts.get(k + 1).copied().unwrap_or(self.input_len);
        self.starts[k]..end
    }

    pub fn boundaries(&self) -> impl Iterator<Item = Range<u64>> + '_ {
        (0..self.len()).map(move |k| self.span(k))
    }

    pub fn footprint_bytes(&self) -> usize {
        self.ids.len() * std::mem::size_of::<u32>() + self.starts.len() * std::mem::size_of::<u64>()
    }

    /// Writes one `id start length` line per block.
    pub fn write_report<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, span) in self.boundaries().enumerate() {
            writeln!(out, "{} {} {}", self.ids[k], span.start, span.end - span.start)?;
        }
        Ok(())
    }
}

/// Incremental block parser. Feeding the input in any number of pieces
/// yields the same result as feeding it at once.
#[derive(Debug)]
pub struct CtphParser<T> {
    config: CtphConfig,
    leading_weight: u64,
    current: Vec<T>,
    hash: u64,
    block_start: u64,
    dict: Dictionary<T>,
    parse: RsyncParse,
    index: FxHashMap<u64, u32>,
    // next block id sharing the same fingerprint
    chain: Vec<u32>,
}

impl<T: Symbol> CtphParser<T> {
    pub fn new(config: CtphConfig) -> Self {
        CtphParser {
            leading_weight: config.leading_weight(),
            config,
            current: Vec::new(),
            hash: 0,
            block_start: 0,
            dict: Dictionary::default(),
            parse: RsyncParse::default(),
            index: FxHashMap::default(),
            chain: Vec::new(),
        }
    }

    pub fn feed(&mut self, input: &[T]) {
        let w = self.config.window;
        let m = self.config.hash_modulus as u128;
        let base = self.config.hash_base as u128;
        let p = self.config.threshold;
        for &sym in input {
            self.current.push(sym);
            let n = self.current.len();
            if n < w {
                continue;
            }
            if n == w {
                self.hash = horner(&self.current, &self.config);
            } else {
                let outgoing = self.current[n - 1 - w].value() as u128;
                let out = outgoing * self.leading_weight as u128 % m;
                let h = (self.hash as u128 + m - out) % m;
                self.hash = ((h * base + sym.value() as u128) % m) as u64;
            }
            if self.hash.is_multiple_of(p) {
                self.close_block();
            }
        }
    }

    fn close_block(&mut self) {
        let block = &self.current;
        let fingerprint = {
            let mut h = FxHasher::default();
            block.hash(&mut h);
            h.finish()
        };
        let mut id = self.index.get(&fingerprint).copied().unwrap_or(NO_BLOCK);
        while id != NO_BLOCK && self.dict.block(id as usize) != block.as_slice() {
            id = self.chain[id as usize];
        }
        if id == NO_BLOCK {
            id = self.dict.len() as u32;
            let prev = self.index.insert(fingerprint, id).unwrap_or(NO_BLOCK);
            self.chain.push(prev);
            self.dict.push(block);
        }
        self.parse.ids.push(id);
        self.parse.starts.push(self.block_start);
        self.block_start += block.len() as u64;
        self.current.clear();
    }

    /// Flushes the final block and returns the dictionary and parse.
    pub fn finish(mut self) -> (Dictionary<T>, RsyncParse) {
        if !self.current.is_empty() {
            self.close_block();
        }
        self.parse.input_len = self.block_start;
        (self.dict, self.parse)
    }
}

pub fn ctph_parse<T: Symbol>(input: &[T], config: &CtphConfig) -> (Dictionary<T>, RsyncParse) {
    let mut parser = CtphParser::new(*config);
    parser.feed(input);
    parser.finish()
}

/// Parses a byte stream read in pieces of `chunk_size` bytes.
pub fn ctph_parse_stream<R: Read>(
    mut reader: R,
    config: &CtphConfig,
    chunk_size: usize,
) -> Result<(Dictionary<u8>, RsyncParse)> {
    if chunk_size < config.window {
        return Err(Error::invalid(format!(
            "chunk size {chunk_size} is smaller than the window size {}",
            config.window
        )));
    }
    let mut parser = CtphParser::new(*config);
    let mut buf = vec![0u8; chunk_size];
    let mut offset = 0u64;
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(Error::io(offset, e)),
        };
        parser.feed(&buf[..n]);
        offset += n as u64;
    }
    Ok(parser.finish())
}

/// Concatenates the blocks, each followed by its own separator symbol
/// `num_terminals + i`.
pub fn build_dictionary_string<T: Symbol>(dict: &Dictionary<T>, num_terminals: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(dict.total_length() + dict.len());
    for (i, block) in dict.iter().enumerate() {
        out.extend(block.iter().map(|s| s.value()));
        out.push(num_terminals + i as u32);
    }
    out
}
