//! RePair: replace the most frequent adjacent pair by a fresh nonterminal
//! until no pair occurs twice.
//!
//! The sequence lives in a fixed array. Replaced positions become holes;
//! a run of holes stores the first live position after it in its first
//! cell and the last live position before it in its last cell, reusing the
//! occurrence-link slots. Every live position whose pair is counted is
//! threaded into a doubly linked list of that pair's occurrences, kept in
//! position order so that the list head is the leftmost occurrence.
//!
//! Pairs of equal symbols are counted without overlap: inside a run of `x`
//! only the pairs starting at even offsets from the run start are counted.
//!
//! Among the most frequent pairs the one with the leftmost occurrence wins;
//! remaining ties go to the smaller `(left, right)`.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::symbol::Symbol;

const NONE: u32 = u32::MAX;
const UNLISTED: u32 = u32::MAX - 1;
const HOLE: u32 = u32::MAX;

/// Anything that builds an SLP for an integer sequence.
pub trait SlpBuilder: Sync {
    fn build(&self, seq: &[u32], num_terminals: u32) -> Result<Grammar>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RePair;

impl SlpBuilder for RePair {
    fn build(&self, seq: &[u32], num_terminals: u32) -> Result<Grammar> {
        repair_build(seq, num_terminals)
    }
}

#[inline]
fn key(a: u32, b: u32) -> u64 {
    (a as u64) << 32 | b as u64
}

#[derive(Debug, Clone, Copy)]
struct PairRecord {
    freq: u32,
    head: u32,
    tail: u32,
    // frequency and head under which the pair sits in the queue; 0 = absent
    queued_freq: u32,
    queued_head: u32,
    dirty: bool,
}

impl PairRecord {
    fn new() -> Self {
        PairRecord { freq: 0, head: NONE, tail: NONE, queued_freq: 0, queued_head: NONE, dirty: false }
    }
}

type QueueKey = (Reverse<u32>, u32, u32, u32);

struct RePairState {
    sym: Vec<u32>,
    prev: Vec<u32>,
    next: Vec<u32>,
    pairs: FxHashMap<u64, PairRecord>,
    queue: BTreeSet<QueueKey>,
    dirty: Vec<u64>,
}

impl RePairState {
    fn len(&self) -> u32 {
        self.sym.len() as u32
    }

    #[inline]
    fn next_live(&self, i: u32) -> u32 {
        let j = i + 1;
        if j < self.len() && self.sym[j as usize] == HOLE {
            self.next[j as usize]
        } else {
            j
        }
    }

    #[inline]
    fn prev_live(&self, i: u32) -> u32 {
        if i == 0 {
            return NONE;
        }
        let j = i - 1;
        if self.sym[j as usize] == HOLE {
            self.prev[j as usize]
        } else {
            j
        }
    }

    #[inline]
    fn is_listed(&self, i: u32) -> bool {
        self.prev[i as usize] != UNLISTED
    }

    fn touch(&mut self, k: u64) -> &mut PairRecord {
        let rec = self.pairs.entry(k).or_insert_with(PairRecord::new);
        if !rec.dirty {
            rec.dirty = true;
            self.dirty.push(k);
        }
        rec
    }

    /// Appends position `i` to the occurrence list of the pair starting there.
    fn register(&mut self, i: u32) {
        let j = self.next_live(i);
        let k = key(self.sym[i as usize], self.sym[j as usize]);
        let rec = self.touch(k);
        let tail = rec.tail;
        rec.freq += 1;
        rec.tail = i;
        if tail == NONE {
            rec.head = i;
        }
        self.prev[i as usize] = tail;
        self.next[i as usize] = NONE;
        if tail != NONE {
            self.next[tail as usize] = i;
        }
    }

    /// Registers the pair at `i` unless it overlaps a counted equal pair on its left.
    fn register_respecting_runs(&mut self, i: u32) {
        let j = self.next_live(i);
        let (x, y) = (self.sym[i as usize], self.sym[j as usize]);
        if x == y {
            let h = self.prev_live(i);
            if h != NONE && self.sym[h as usize] == x && self.is_listed(h) {
                return;
            }
        }
        self.register(i);
    }

    fn unregister(&mut self, i: u32) {
        if !self.is_listed(i) {
            return;
        }
        let j = self.next_live(i);
        let k = key(self.sym[i as usize], self.sym[j as usize]);
        let (p, n) = (self.prev[i as usize], self.next[i as usize]);
        if p != NONE {
            self.next[p as usize] = n;
        }
        if n != NONE {
            self.prev[n as usize] = p;
        }
        let rec = self.touch(k);
        rec.freq -= 1;
        if p == NONE {
            rec.head = n;
        }
        if n == NONE {
            rec.tail = p;
        }
        self.prev[i as usize] = UNLISTED;
    }

    /// Moves the list node of position `from` to position `to`, which must
    /// start the same pair and lie between `from` and its list successor.
    fn relabel(&mut self, from: u32, to: u32) {
        let k = key(self.sym[from as usize], self.sym[self.next_live(from) as usize]);
        let (p, n) = (self.prev[from as usize], self.next[from as usize]);
        self.prev[to as usize] = p;
        self.next[to as usize] = n;
        if p != NONE {
            self.next[p as usize] = to;
        }
        if n != NONE {
            self.prev[n as usize] = to;
        }
        let rec = self.touch(k);
        if p == NONE {
            rec.head = to;
        }
        if n == NONE {
            rec.tail = to;
        }
        self.prev[from as usize] = UNLISTED;
    }

    /// The run of `b` starting at `j` loses its first element: every counted
    /// pair in the run shifts one position to the right.
    fn shift_run(&mut self, j: u32) {
        let b = self.sym[j as usize];
        let mut cur = j;
        loop {
            let mid = self.next_live(cur);
            let after = self.next_live(mid);
            if after < self.len() && self.sym[after as usize] == b {
                self.relabel(cur, mid);
                let beyond = self.next_live(after);
                if beyond < self.len() && self.sym[beyond as usize] == b {
                    cur = after;
                    continue;
                }
            } else {
                self.unregister(cur);
            }
            break;
        }
    }

    fn make_hole(&mut self, j: u32) {
        let n = self.len();
        let start =
            if j > 0 && self.sym[(j - 1) as usize] == HOLE { self.prev[(j - 1) as usize].wrapping_add(1) } else { j };
        let end = if j + 1 < n && self.sym[(j + 1) as usize] == HOLE { self.next[(j + 1) as usize] - 1 } else { j };
        self.sym[j as usize] = HOLE;
        self.next[start as usize] = end + 1;
        self.prev[end as usize] = if start == 0 { NONE } else { start - 1 };
    }

    fn flush_dirty(&mut self) {
        let dirty = std::mem::take(&mut self.dirty);
        for k in dirty {
            let (a, b) = ((k >> 32) as u32, k as u32);
            let Some(rec) = self.pairs.get_mut(&k) else { continue };
            rec.dirty = false;
            if rec.queued_freq > 0 {
                self.queue.remove(&(Reverse(rec.queued_freq), rec.queued_head, a, b));
                rec.queued_freq = 0;
            }
            if rec.freq == 0 {
                self.pairs.remove(&k);
            } else if rec.freq >= 2 {
                rec.queued_freq = rec.freq;
                rec.queued_head = rec.head;
                self.queue.insert((Reverse(rec.freq), rec.head, a, b));
            }
        }
    }

    fn replace_all(&mut self, a: u32, b: u32, x: u32) {
        let n = self.len();
        let k = key(a, b);
        loop {
            let i = match self.pairs.get(&k) {
                Some(rec) if rec.head != NONE => rec.head,
                _ => break,
            };
            let j = self.next_live(i);
            debug_assert!(self.sym[i as usize] == a && self.sym[j as usize] == b);
            self.unregister(i);
            let p = self.prev_live(i);
            let q = self.next_live(j);
            if p != NONE {
                self.unregister(p);
            }
            if q < n {
                if a != b && self.sym[q as usize] == b && self.is_listed(j) {
                    self.shift_run(j);
                } else {
                    self.unregister(j);
                }
            }
            self.sym[i as usize] = x;
            self.make_hole(j);
            if p != NONE {
                self.register_respecting_runs(p);
            }
            if q < n {
                self.register(i);
            }
        }
    }
}

/// Builds a RePair grammar for `seq` over the alphabet `0..num_terminals`.
pub fn repair_build<T: Symbol>(seq: &[T], num_terminals: u32) -> Result<Grammar> {
    if let Some(&s) = seq.iter().find(|s| s.value() >= num_terminals) {
        return Err(Error::invalid(format!(
            "symbol {} is outside the alphabet of {num_terminals} terminals",
            s.value()
        )));
    }
    // keep every position and every symbol clear of the sentinels
    if seq.len() as u64 >= (UNLISTED - 1) as u64 || num_terminals as u64 + seq.len() as u64 >= UNLISTED as u64 {
        return Err(Error::invalid(format!("sequence of length {} is too long", seq.len())));
    }
    let n = seq.len();
    let mut st = RePairState {
        sym: seq.iter().map(|s| s.value()).collect(),
        prev: vec![UNLISTED; n],
        next: vec![NONE; n],
        pairs: FxHashMap::default(),
        queue: BTreeSet::new(),
        dirty: Vec::new(),
    };
    for i in 0..n.saturating_sub(1) as u32 {
        st.register_respecting_runs(i);
    }
    st.flush_dirty();

    let mut grammar = Grammar::new(num_terminals);
    while let Some(&(Reverse(freq), _, a, b)) = st.queue.first() {
        debug_assert!(freq >= 2);
        let rec = st.pairs.get_mut(&key(a, b)).expect("queued pair has a record");
        st.queue.pop_first();
        rec.queued_freq = 0;
        let x = grammar.push_rule(a, b);
        st.replace_all(a, b, x);
        st.flush_dirty();
    }
    grammar.top = st.sym.iter().copied().filter(|&s| s != HOLE).collect();
    Ok(grammar)
}

/// Straightforward quadratic RePair with the same counting and tie-breaking
/// rules, used to cross-check the linked implementation.
#[cfg(test)]
pub(crate) fn repair_reference(seq: &[u32], num_terminals: u32) -> Grammar {
    use std::collections::HashMap;
    let mut g = Grammar::new(num_terminals);
    let mut cur = seq.to_vec();
    loop {
        // (count, first position); a maximal run of x contributes floor(len/2) to (x, x)
        let mut run_counts: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        let mut i = 0;
        while i + 1 < cur.len() {
            let p = (cur[i], cur[i + 1]);
            if p.0 == p.1 {
                let start = i;
                let mut end = i;
                while end + 1 < cur.len() && cur[end + 1] == p.0 {
                    end += 1;
                }
                let e = run_counts.entry(p).or_insert((0, start));
                e.0 += (end - start).div_ceil(2) as u32;
                i = end;
            } else {
                let e = run_counts.entry(p).or_insert((0, i));
                e.0 += 1;
                i += 1;
            }
        }
        let best = run_counts
            .iter()
            .filter(|(_, &(c, _))| c >= 2)
            .min_by_key(|(&(a, b), &(c, first))| (Reverse(c), first, a, b));
        let Some((&(a, b), _)) = best else { break };
        let x = g.push_rule(a, b);
        let mut next = Vec::with_capacity(cur.len());
        let mut i = 0;
        while i < cur.len() {
            if i + 1 < cur.len() && cur[i] == a && cur[i + 1] == b {
                next.push(x);
                i += 2;
            } else {
                next.push(cur[i]);
                i += 1;
            }
        }
        cur = next;
    }
    g.top = cur;
    g
}
