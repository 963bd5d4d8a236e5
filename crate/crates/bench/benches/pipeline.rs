use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rpair::ctph::{ctph_parse, CtphConfig};
use rpair::lz::{lz77_parse, lzss_parse, rparse};
use rpair::pipeline::{compress, decompress, CompressOptions};
use rpair::repair::repair_build;
use rpair_bench::repetitive;

const SIZES: [usize; 2] = [1 << 20, 8 << 20];

fn bench_ctph(c: &mut Criterion) {
    let mut group = c.benchmark_group("ctph_parse");
    let cfg = CtphConfig::default();
    for len in SIZES {
        let s = repetitive(len);
        group.throughput(Throughput::Bytes(s.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &s, |b, s| b.iter(|| ctph_parse(black_box(s), &cfg)));
    }
    group.finish();
}

fn bench_repair(c: &mut Criterion) {
    let mut group = c.benchmark_group("repair_build");
    group.sample_size(10);
    let seq: Vec<u32> = repetitive(1 << 20).into_iter().map(u32::from).collect();
    group.throughput(Throughput::Elements(seq.len() as u64));
    group.bench_function("1MiB", |b| b.iter(|| repair_build(black_box(&seq), 256).unwrap()));
    group.finish();
}

fn bench_compress(c: &mut Criterion) {
    let mut group = c.benchmark_group("compress");
    group.sample_size(10);
    let opts = CompressOptions::default();
    for len in SIZES {
        let s = repetitive(len);
        group.throughput(Throughput::Bytes(s.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &s, |b, s| {
            b.iter(|| compress(black_box(s), &opts).unwrap())
        });
        let art = compress(&s, &opts).unwrap();
        group.bench_with_input(BenchmarkId::new("decompress", len), &art, |b, art| {
            b.iter(|| decompress(black_box(art)).unwrap())
        });
    }
    group.finish();
}

fn bench_lz(c: &mut Criterion) {
    let mut group = c.benchmark_group("lz");
    group.sample_size(10);
    let s = repetitive(1 << 20);
    let cfg = CtphConfig::default();
    group.throughput(Throughput::Bytes(s.len() as u64));
    group.bench_function("lzss", |b| b.iter(|| lzss_parse(black_box(&s))));
    group.bench_function("lz77", |b| b.iter(|| lz77_parse(black_box(&s))));
    group.bench_function("rparse", |b| b.iter(|| rparse(black_box(&s), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_ctph, bench_repair, bench_compress, bench_lz);
criterion_main!(benches);
