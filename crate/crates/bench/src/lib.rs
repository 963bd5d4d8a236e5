//! Shared inputs for the benchmarks.

use rpair::corpus::CorpusKind;

/// A repetitive input of about `len` bytes: 50 copies of a random seed with
/// a 0.1% per-byte mutation rate.
pub fn repetitive(len: usize) -> Vec<u8> {
    CorpusKind::MutatedCopies { seed_len: (len / 50).max(1), copies: 50, rate: 1e-3 }.generate(42)
}
