pub mod bitio;
pub mod corpus;
pub mod ctph;
pub mod error;
pub mod grammar;
pub mod lz;
pub mod pipeline;
pub mod repair;
pub mod slp;
pub mod symbol;
pub mod verify;

pub use ctph::{ctph_parse, ctph_parse_stream, CtphConfig, Dictionary, RsyncParse};
pub use error::{Error, Result};
pub use grammar::Grammar;
pub use lz::{lz77_parse, lzss_parse, rparse, validate_lzss_like, ParseList, Phrase, PhraseKind};
pub use pipeline::{
    compress, compress_stages, compress_stream, decompress, decompress_to, CompressOptions, CompressedArtifact, Stages,
    StatsReport,
};
pub use repair::{repair_build, RePair, SlpBuilder};
pub use symbol::Symbol;
