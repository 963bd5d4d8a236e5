use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use rpair::pipeline::CompressedArtifact;

fn rpair() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rpair"));
    for var in
        ["RPAIR_WINDOW", "RPAIR_THRESHOLD", "RPAIR_RECURSE_DEPTH", "RPAIR_ORACLE_CAP", "RPAIR_FORMAT", "RPAIR_SEED"]
    {
        cmd.env_remove(var);
    }
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn ok(cmd: &mut Command) -> Output {
    let out = run(cmd);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gen_mutated(path: &Path, seed: u64) {
    ok(rpair()
        .args(["gen-corpus", "mutated", "--seed-len", "5000", "--copies", "12", "--rate", "0.002", "--seed"])
        .arg(seed.to_string())
        .arg("-o")
        .arg(path));
}

fn kv_fields(line: &str) -> Vec<(String, String)> {
    line.trim_end()
        .split('\t')
        .map(|f| {
            let (k, v) = f.split_once('=').expect("key=value");
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn kv_get<'a>(fields: &'a [(String, String)], key: &str) -> &'a str {
    &fields.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1
}

#[test]
fn file_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.bin");
    gen_mutated(&input, 1);
    let original = fs::read(&input).unwrap();
    ok(rpair().arg("compress").arg(&input).arg("-q"));
    let packed = dir.path().join("data.bin.rpair");
    assert!(packed.exists());
    fs::remove_file(&input).unwrap();
    ok(rpair().arg("decompress").arg(&packed));
    assert_eq!(fs::read(&input).unwrap(), original);
}

#[test]
fn parameters_are_recorded_in_header() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    gen_mutated(&input, 2);
    let out = dir.path().join("in.rp");
    ok(rpair().arg("compress").arg(&input).args(["-w", "32", "-p", "16", "-q", "-o"]).arg(&out));
    let art = CompressedArtifact::from_bytes(&fs::read(&out).unwrap()).unwrap();
    assert_eq!((art.header.window, art.header.threshold), (32, 16));

    let env_out = dir.path().join("env.rp");
    ok(rpair().env("RPAIR_WINDOW", "24").arg("compress").arg(&input).arg("-q").arg("-o").arg(&env_out));
    let art = CompressedArtifact::from_bytes(&fs::read(&env_out).unwrap()).unwrap();
    assert_eq!((art.header.window, art.header.threshold), (24, 64));
}

#[test]
fn standard_streams_roundtrip() {
    let data: Vec<u8> = b"to be or not to be, that is the question; ".repeat(500);
    let mut child = rpair().args(["compress", "-q"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(&data).unwrap();
    let packed = child.wait_with_output().unwrap();
    assert!(packed.status.success());
    assert!(packed.stdout.len() < data.len());

    let mut child = rpair().args(["decompress", "-"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(&packed.stdout).unwrap();
    let restored = child.wait_with_output().unwrap();
    assert!(restored.status.success());
    assert_eq!(restored.stdout, data);
}

#[test]
fn unreadable_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(rpair().arg("compress").arg(dir.path().join("missing")));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot open"));
}

#[test]
fn invalid_flags_are_usage_errors() {
    for args in [&["compress", "-w", "1"][..], &["compress", "-p", "0"], &["compress", "-o", "x", "-c"]] {
        let out = run(rpair().args(args));
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failed_decompression_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    gen_mutated(&input, 3);
    let packed = dir.path().join("in.rpair");
    ok(rpair().arg("compress").arg(&input).arg("-q"));
    let bytes = fs::read(&packed).unwrap();
    fs::write(&packed, &bytes[..bytes.len() - 3]).unwrap();

    let target = dir.path().join("restored");
    let out = run(rpair().arg("decompress").arg(&packed).arg("-o").arg(&target));
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
    let leftovers = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2);
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    gen_mutated(&input, 4);
    ok(rpair().arg("compress").arg(&input).arg("-q"));
    let out = run(rpair().arg("compress").arg(&input).arg("-q"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("already exists"));
    ok(rpair().arg("compress").arg(&input).args(["-q", "-f"]));
}

#[test]
fn stats_text_and_kv_agree_with_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    gen_mutated(&input, 5);
    let kv = ok(rpair().arg("stats").arg(&input).args(["-w", "16", "-p", "8", "--format", "kv"]));
    let kv = String::from_utf8(kv.stdout).unwrap();
    let fields = kv_fields(kv.lines().next().unwrap());

    let text = ok(rpair().arg("stats").arg(&input).args(["-w", "16", "-p", "8"]));
    let text = String::from_utf8(text.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let row: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    for key in ["b", "z", "r", "c"] {
        assert_eq!(col(key), kv_get(&fields, key), "{key}");
    }
    assert_eq!(col("length"), kv_get(&fields, "input_length"));
    assert_eq!(col("rparse"), kv_get(&fields, "rparse_phrases"));
    assert_eq!(col("lzss"), kv_get(&fields, "lzss_phrases"));
    let kv_ratio: f64 = kv_get(&fields, "ratio").parse().unwrap();
    assert_eq!(col("ratio%"), format!("{:.4}", kv_ratio * 100.0));

    let packed = dir.path().join("in.rpair");
    ok(rpair().arg("compress").arg(&input).args(["-w", "16", "-p", "8", "-q"]));
    let art = CompressedArtifact::from_bytes(&fs::read(&packed).unwrap()).unwrap();
    let ratio = art.accounted_bits() as f64 / 8.0 / art.header.input_len as f64;
    assert!((ratio - kv_ratio).abs() < 1e-9);
}

#[test]
fn verify_exit_codes() {
    let out = ok(rpair().args(["verify", "--threads", "2"]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all properties hold"));

    let out = run(rpair().args(["verify", "--parser", "faulty"]));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAILED"));

    let out = ok(rpair().args(["verify", "--cases", "0"]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty corpus"));
}

#[test]
fn verify_accepts_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    gen_mutated(&input, 6);
    let out = ok(rpair().arg("verify").arg(&input).args(["-w", "8", "-p", "4"]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 cases: all properties hold"));
}

#[test]
fn corpus_generation_is_deterministic() {
    let gen = |seed: &str| ok(rpair().args(["gen-corpus", "random", "--len", "1000", "--seed", seed])).stdout;
    assert_eq!(gen("7"), gen("7"));
    assert_ne!(gen("7"), gen("8"));
    assert_eq!(gen("7").len(), 1000);
    let unary = ok(rpair().args(["gen-corpus", "unary", "--len", "5", "--byte", "120"])).stdout;
    assert_eq!(unary, b"xxxxx");
    let bad = run(rpair().args(["gen-corpus", "mutated", "--seed-len", "5", "--copies", "2", "--rate", "1.5"]));
    assert_eq!(bad.status.code(), Some(2));
}
