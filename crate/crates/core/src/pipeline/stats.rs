use std::io::{self, Write};
use std::time::Instant;

use super::{compress_with, CompressOptions, RpairTrace};
use crate::ctph::ctph_parse;
use crate::error::Result;
use crate::lz::{lz77_parse, lzss_parse, rparse_from_parts};
use crate::repair::RePair;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub input_length: u64,
    pub b: u64,
    pub r: u64,
    pub c: u64,
    /// Size under the fixed-width accounting.
    pub accounted_bits: u64,
    /// Size of the decodable payload actually written.
    pub payload_bits: u64,
    /// `accounted_bits / 8 / input_length`.
    pub ratio: f64,
    /// `payload_bits / 8 / input_length`.
    pub payload_ratio: f64,
    pub recursion_depth: u32,
    /// LZ77 phrase count; the parse oracles only run up to the oracle cap.
    pub z: Option<u64>,
    pub lzss_phrases: Option<u64>,
    pub rparse_phrases: Option<u64>,
    /// `r / z`.
    pub alpha_proxy: Option<f64>,
    /// Wall-clock compression time.
    pub seconds: f64,
    /// Peak resident set size of the process.
    pub peak_memory_bytes: Option<u64>,
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

struct Oracles {
    z: u64,
    lzss: u64,
    rparse: u64,
}

fn run_oracles(input: &[u8], opts: &CompressOptions) -> Result<Oracles> {
    let (dict, parse) = ctph_parse(input, &opts.ctph);
    let rp = rparse_from_parts(input, &dict, &parse)?;
    Ok(Oracles {
        z: lz77_parse(input).len() as u64,
        lzss: lzss_parse(input).len() as u64,
        rparse: rp.parse.len() as u64,
    })
}

fn ratio(bits: u64, len: u64) -> f64 {
    if len == 0 {
        0.0
    } else {
        bits as f64 / 8.0 / len as f64
    }
}

/// Compresses `input` and, when it is at most `oracle_cap` bytes long,
/// runs the exact parsers alongside.
pub fn stats(input: &[u8], opts: &CompressOptions, oracle_cap: u64) -> Result<StatsReport> {
    let run_oracles_now = input.len() as u64 <= oracle_cap;
    let (compressed, oracles) = std::thread::scope(|scope| {
        let oracle_job = run_oracles_now.then(|| scope.spawn(|| run_oracles(input, opts)));
        let start = Instant::now();
        let compressed = compress_with(input, opts, &RePair).map(|(art, trace)| (art, trace, start.elapsed()));
        let oracles = oracle_job.map(|job| job.join().expect("oracle thread panicked")).transpose();
        (compressed, oracles)
    });
    let (art, trace, elapsed) = compressed?;
    let oracles = oracles?;
    let RpairTrace { input_len, b, recursion_depth, .. } = trace;
    let h = &art.header;
    let accounted = art.accounted_bits();
    Ok(StatsReport {
        input_length: input_len,
        b: b as u64,
        r: h.r,
        c: h.c,
        accounted_bits: accounted,
        payload_bits: h.payload_bits,
        ratio: ratio(accounted, input_len),
        payload_ratio: ratio(h.payload_bits, input_len),
        recursion_depth,
        z: oracles.as_ref().map(|o| o.z),
        lzss_phrases: oracles.as_ref().map(|o| o.lzss),
        rparse_phrases: oracles.as_ref().map(|o| o.rparse),
        alpha_proxy: oracles.as_ref().map(|o| if o.z == 0 { 0.0 } else { h.r as f64 / o.z as f64 }),
        seconds: elapsed.as_secs_f64(),
        peak_memory_bytes: peak_memory_bytes(),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl StatsReport {
    /// Seconds per input gigabyte (10^9 bytes).
    pub fn seconds_per_gb(&self) -> f64 {
        if self.input_length == 0 {
            0.0
        } else {
            self.seconds / (self.input_length as f64 / 1e9)
        }
    }

    /// Peak memory in megabytes (10^6 bytes) per input gigabyte.
    pub fn megabytes_per_gb(&self) -> Option<f64> {
        if self.input_length == 0 {
            return Some(0.0);
        }
        self.peak_memory_bytes.map(|m| (m as f64 / 1e6) / (self.input_length as f64 / 1e9))
    }

    /// Column names matching [`StatsReport::table_row`].
    pub fn table_header() -> String {
        format!(
            "{:<24} {:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>9} {:>10} {:>10}",
            "input", "length", "b", "z", "r", "c", "rparse", "lzss", "alpha", "ratio%", "s/GB", "MB/GB"
        )
    }

    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{:<24} {:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>9.4} {:>10.2} {:>10}",
            name,
            self.input_length,
            self.b,
            opt(self.z),
            self.r,
            self.c,
            opt(self.rparse_phrases),
            opt(self.lzss_phrases),
            opt(self.alpha_proxy.map(|a| format!("{a:.3}"))),
            self.ratio * 100.0,
            self.seconds_per_gb(),
            opt(self.megabytes_per_gb().map(|m| format!("{m:.1}"))),
        )
    }

    /// `(key, value)` pairs in a fixed order; absent oracle values are `na`.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let na = |v: Option<String>| v.unwrap_or_else(|| "na".into());
        vec![
            ("input_length", self.input_length.to_string()),
            ("b", self.b.to_string()),
            ("z", na(self.z.map(|v| v.to_string()))),
            ("r", self.r.to_string()),
            ("c", self.c.to_string()),
            ("accounted_bits", self.accounted_bits.to_string()),
            ("payload_bits", self.payload_bits.to_string()),
            ("ratio", format!("{:.9}", self.ratio)),
            ("payload_ratio", format!("{:.9}", self.payload_ratio)),
            ("rparse_phrases", na(self.rparse_phrases.map(|v| v.to_string()))),
            ("lzss_phrases", na(self.lzss_phrases.map(|v| v.to_string()))),
            ("alpha_proxy", na(self.alpha_proxy.map(|v| format!("{v:.6}")))),
            ("recursion_depth", self.recursion_depth.to_string()),
            ("seconds", format!("{:.6}", self.seconds)),
            ("seconds_per_gb", format!("{:.3}", self.seconds_per_gb())),
            ("peak_memory_bytes", na(self.peak_memory_bytes.map(|v| v.to_string()))),
        ]
    }

    /// One tab-separated `key=value` record.
    pub fn write_kv<W: Write>(&self, name: &str, mut out: W) -> io::Result<()> {
        let clean: String = name.chars().map(|ch| if ch == '\t' || ch == '\n' { ' ' } else { ch }).collect();
        write!(out, "input={clean}")?;
        for (k, v) in self.fields() {
            write!(out, "\t{k}={v}")?;
        }
        writeln!(out)
    }
}
