use std::fmt::Debug;
use std::hash::Hash;

/// An element of a sequence that can be parsed and compressed.
///
/// Raw input is bytes; parses of parses (block-ID sequences) are `u32`.
pub trait Symbol: Copy + Eq + Ord + Hash + Debug + Send + Sync + 'static {
    fn value(self) -> u32;
}

impl Symbol for u8 {
    #[inline]
    fn value(self) -> u32 {
        self as u32
    }
}

impl Symbol for u32 {
    #[inline]
    fn value(self) -> u32 {
        self
    }
}
