//! Deterministic test inputs: random bytes, unary strings and collections
//! of point-mutated copies of a random seed string.

use std::io::{self, Read};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorpusKind {
    RandomBytes {
        len: usize,
    },
    Unary {
        len: usize,
        byte: u8,
    },
    /// `copies` copies of a random `seed_len`-byte string; each byte of
    /// every copy but the first is replaced with probability `rate`.
    MutatedCopies {
        seed_len: usize,
        copies: usize,
        rate: f64,
    },
}

impl CorpusKind {
    pub fn len(&self) -> usize {
        match *self {
            CorpusKind::RandomBytes { len } | CorpusKind::Unary { len, .. } => len,
            CorpusKind::MutatedCopies { seed_len, copies, .. } => seed_len * copies,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generate(&self, seed: u64) -> Vec<u8> {
        match *self {
            CorpusKind::RandomBytes { len } => random_bytes(len, seed),
            CorpusKind::Unary { len, byte } => vec![byte; len],
            CorpusKind::MutatedCopies { seed_len, copies, rate } => {
                let mut out = Vec::with_capacity(seed_len * copies);
                MutatedCopies::new(seed_len, copies, rate, seed)
                    .read_to_end(&mut out)
                    .expect("in-memory generation cannot fail");
                out
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            CorpusKind::RandomBytes { len } => format!("random-{len}"),
            CorpusKind::Unary { len, byte } => format!("unary-{byte}-{len}"),
            CorpusKind::MutatedCopies { seed_len, copies, rate } => format!("mutated-{seed_len}x{copies}@{rate}"),
        }
    }
}

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut out = vec![0u8; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut out);
    out
}

/// Lazily generated mutated-copies collection.
#[derive(Debug, Clone)]
pub struct MutatedCopies {
    seed_text: Vec<u8>,
    copies: usize,
    rate: f64,
    rng: ChaCha8Rng,
    copy: usize,
    offset: usize,
    /// Offset of the next mutation within the current copy.
    next_mutation: usize,
}

impl MutatedCopies {
    pub fn new(seed_len: usize, copies: usize, rate: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&rate), "mutation rate must lie in [0, 1)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seed_text = vec![0u8; seed_len];
        rng.fill_bytes(&mut seed_text);
        MutatedCopies { seed_text, copies, rate, rng, copy: 0, offset: 0, next_mutation: usize::MAX }
    }

    pub fn total_len(&self) -> u64 {
        self.seed_text.len() as u64 * self.copies as u64
    }

    /// Geometric gap to the next mutated position.
    fn gap(&mut self) -> usize {
        if self.rate == 0.0 {
            return usize::MAX;
        }
        let u: f64 = self.rng.gen();
        let g = ((1.0 - u).ln() / (1.0 - self.rate).ln()).floor();
        if g >= usize::MAX as f64 {
            usize::MAX
        } else {
            g as usize
        }
    }
}

impl Read for MutatedCopies {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.seed_text.len();
        let mut written = 0;
        while written < buf.len() && self.copy < self.copies && n > 0 {
            if self.offset == n {
                self.copy += 1;
                self.offset = 0;
                self.next_mutation = if self.copy < self.copies { self.gap() } else { usize::MAX };
                continue;
            }
            let take = (n - self.offset).min(buf.len() - written);
            let dst = &mut buf[written..written + take];
            dst.copy_from_slice(&self.seed_text[self.offset..self.offset + take]);
            // the first copy is the unmodified seed
            if self.copy > 0 {
                while self.next_mutation < self.offset + take {
                    let at = self.next_mutation - self.offset;
                    let delta: u8 = self.rng.gen_range(1..=255);
                    dst[at] = dst[at].wrapping_add(delta);
                    self.next_mutation = self.next_mutation.saturating_add(1).saturating_add(self.gap());
                }
            }
            self.offset += take;
            written += take;
        }
        Ok(written)
    }
}
