use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hamming_embed::io::{self as formats, Payload};
use hamming_embed::{BinaryCode, CodeIndex, EmbeddingSet, RecordMeta};

fn hembed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hembed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch hembed")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hembed(dir, args);
    assert!(
        out.status.success(),
        "hembed {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = hembed(dir, args);
    assert!(!out.status.success(), "hembed {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn value<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{out}"))
}

fn write_codes(path: &Path, bits: &[&str], ids: Option<&[&str]>, labels: Option<&[&str]>) {
    let codes: Vec<BinaryCode> = bits.iter().map(|b| BinaryCode::from_bit_str(b).unwrap()).collect();
    let owned = |v: Option<&[&str]>| v.map(|v| v.iter().map(|s| s.to_string()).collect());
    let meta = RecordMeta::new(codes.len(), owned(ids), owned(labels)).unwrap();
    let nbits = bits.first().map_or(4, |b| b.len());
    formats::write_codes(path, &CodeIndex::new(nbits, codes, meta).unwrap()).unwrap();
}

fn write_embeddings(path: &Path, rows: &[Vec<f64>], ids: &[&str]) {
    let set = EmbeddingSet::from_rows(rows)
        .unwrap()
        .with_meta(RecordMeta::new(rows.len(), Some(ids.iter().map(|s| s.to_string()).collect()), None).unwrap())
        .unwrap();
    formats::write_embeddings(path, &set).unwrap();
}

#[test]
fn train_reports_and_encode_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "3",
            "gen-synthetic",
            "planted",
            "--n",
            "128",
            "--out",
            "data.hve",
        ],
    );
    let out = hembed(
        d,
        &[
            "--porcelain",
            "--seed",
            "7",
            "train",
            "-i",
            "data.hve",
            "-b",
            "8",
            "-o",
            "m.hvm",
            "--lr",
            "1e-3",
            "--max-epochs",
            "30",
        ],
    );
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().filter(|l| l.starts_with("epoch ")).count(), 30);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(value(&stdout, "epochs"), "30");
    assert_eq!(value(&stdout, "stop"), "max_epochs");
    let trained: f64 = value(&stdout, "final_loss").parse().unwrap();

    let enc = ok(
        d,
        &[
            "--porcelain",
            "encode",
            "-m",
            "m.hvm",
            "-i",
            "data.hve",
            "-o",
            "c.hvc",
            "--report-loss",
        ],
    );
    let encoded: f64 = value(&enc, "mean_loss").parse().unwrap();
    assert!((trained - encoded).abs() <= 1e-9, "{trained} vs {encoded}");
    let codes = formats::read_codes(&d.join("c.hvc")).unwrap();
    assert_eq!((codes.len(), codes.nbits()), (128, 8));
}

#[test]
fn planted_set_trains_below_five_percent_with_128_bits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = ok(d, &["--porcelain", "gen-synthetic", "planted", "--out", "data.hve"]);
    let norm: f64 = value(&gen, "mean_sq_norm").parse().unwrap();
    let out = ok(
        d,
        &[
            "--porcelain",
            "--quiet",
            "--seed",
            "7",
            "train",
            "-i",
            "data.hve",
            "--bits",
            "128",
            "-o",
            "m.hvm",
            "--lr",
            "1e-3",
            "--max-epochs",
            "100",
        ],
    );
    let loss: f64 = value(&out, "final_loss").parse().unwrap();
    assert!(loss < 0.05 * norm, "loss {loss}, mean squared norm {norm}");
}

#[test]
fn quiet_suppresses_progress() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-synthetic", "planted", "--n", "16", "--out", "data.hve"]);
    let out = hembed(
        d,
        &[
            "--quiet",
            "train",
            "-i",
            "data.hve",
            "-b",
            "4",
            "-o",
            "m.hvm",
            "--max-epochs",
            "3",
        ],
    );
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
}

#[test]
fn train_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-synthetic", "planted", "--n", "16", "--out", "data.hve"]);
    fails(d, &["train", "-i", "data.hve", "-b", "0", "-o", "m.hvm"]);
    fs::write(d.join("junk.hve"), b"HVE2garbage").unwrap();
    let err = fails(d, &["train", "-i", "junk.hve", "-b", "4", "-o", "m.hvm"]);
    assert!(err.contains("error"), "{err}");
    assert!(!d.join("m.hvm").exists());
    fails(d, &["train", "-i", "missing.hve", "-b", "4", "-o", "m.hvm"]);
}

#[test]
fn encode_checks_dimensions_and_handles_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-synthetic", "planted", "--n", "16", "--out", "data.hve"]);
    ok(
        d,
        &[
            "--quiet",
            "train",
            "-i",
            "data.hve",
            "-b",
            "4",
            "-o",
            "m.hvm",
            "--max-epochs",
            "2",
        ],
    );
    ok(
        d,
        &[
            "gen-synthetic",
            "gaussian",
            "--dim",
            "5",
            "--n",
            "3",
            "--out",
            "other.hve",
        ],
    );
    let err = fails(d, &["encode", "-m", "m.hvm", "-i", "other.hve", "-o", "c.hvc"]);
    assert!(err.contains("32") && err.contains('5'), "{err}");
    assert!(!d.join("c.hvc").exists());

    ok(d, &["gen-synthetic", "planted", "--n", "0", "--out", "empty.hve"]);
    ok(d, &["encode", "-m", "m.hvm", "-i", "empty.hve", "-o", "empty.hvc"]);
    let codes = formats::read_codes(&d.join("empty.hvc")).unwrap();
    assert_eq!((codes.len(), codes.nbits()), (0, 4));

    ok(d, &["encode", "-m", "m.hvm", "-i", "data.hve", "-o", "a.hvc"]);
    ok(d, &["encode", "-m", "m.hvm", "-i", "data.hve", "-o", "b.hvc"]);
    assert_eq!(fs::read(d.join("a.hvc")).unwrap(), fs::read(d.join("b.hvc")).unwrap());
}

#[test]
fn encode_copies_ids_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-synthetic",
            "planted",
            "--dim",
            "2",
            "--n",
            "16",
            "--out",
            "data.hve",
        ],
    );
    ok(
        d,
        &[
            "--quiet",
            "train",
            "-i",
            "data.hve",
            "-b",
            "2",
            "-o",
            "m.hvm",
            "--max-epochs",
            "2",
        ],
    );
    let set = EmbeddingSet::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.0]])
        .unwrap()
        .with_meta(
            RecordMeta::new(
                2,
                Some(vec!["p".into(), "q".into()]),
                Some(vec!["x".into(), "y".into()]),
            )
            .unwrap(),
        )
        .unwrap();
    formats::write_embeddings(&d.join("named.hve"), &set).unwrap();
    ok(d, &["encode", "-m", "m.hvm", "-i", "named.hve", "-o", "named.hvc"]);
    let codes = formats::read_codes(&d.join("named.hvc")).unwrap();
    assert_eq!(codes.meta(), set.meta());
}

#[test]
fn baseline_writes_codes_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.csv"), "# three rows\n1, 10\n2, 30\n3, 20\n").unwrap();
    let out = ok(d, &["--porcelain", "baseline", "-i", "x.csv", "-o", "b.hvc"]);
    assert_eq!(value(&out, "bits"), "2");
    let codes = formats::read_codes(&d.join("b.hvc")).unwrap();
    let rendered: Vec<String> = codes.codes().iter().map(|c| c.to_string()).collect();
    assert_eq!(rendered, ["00", "11", "11"]);
    assert_eq!(fs::read_to_string(d.join("b.hvc.thresholds")).unwrap(), "2\n20\n");

    fs::write(d.join("flat.csv"), "4,4,4\n4,4,4\n").unwrap();
    ok(
        d,
        &["baseline", "-i", "flat.csv", "-o", "flat.hvc", "--thresholds", "t.txt"],
    );
    let flat = formats::read_codes(&d.join("flat.hvc")).unwrap();
    assert!(flat.codes().iter().all(|c| c.to_string() == "111"));
    assert_eq!(fs::read_to_string(d.join("t.txt")).unwrap().lines().count(), 3);
}

#[test]
fn search_ranks_by_distance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_codes(&d.join("c.hvc"), &["000", "111", "100"], Some(&["a", "b", "c"]), None);
    assert_eq!(
        ok(d, &["search", "-c", "c.hvc", "--query-bits", "000", "-k", "2"]),
        "1\ta\t0\n2\tc\t1\n"
    );
    assert_eq!(
        ok(d, &["search", "-c", "c.hvc", "--query-id", "b", "-k", "10"]),
        "1\tb\t0\n2\tc\t2\n3\ta\t3\n"
    );
    // Bit 0 is the low bit of the first byte.
    assert_eq!(
        ok(d, &["search", "-c", "c.hvc", "--query-hex", "01", "-k", "1"]),
        "1\tc\t0\n"
    );
    let err = fails(d, &["search", "-c", "c.hvc", "--query-id", "zzz"]);
    assert!(err.contains("zzz"));
    fails(d, &["search", "-c", "c.hvc", "--query-bits", "0000"]);
    fails(d, &["search", "-c", "c.hvc", "--query-bits", "000", "-k", "0"]);
    fails(d, &["search", "-c", "c.hvc"]);
}

#[test]
fn eval_sim_correlates_pair_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows = vec![vec![1.0, 0.0], vec![1.0, 0.2], vec![0.0, 1.0], vec![-1.0, 0.1]];
    write_embeddings(&d.join("e.hve"), &rows, &["a", "b", "c", "d"]);
    let cos = |i: usize, j: usize| {
        let dot = rows[i][0] * rows[j][0] + rows[i][1] * rows[j][1];
        let n = |r: &Vec<f64>| (r[0] * r[0] + r[1] * r[1]).sqrt();
        dot / (n(&rows[i]) * n(&rows[j]))
    };
    let names = ["a", "b", "c", "d"];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)];
    let mut forward = String::from("# self-consistent scores\n");
    let mut reversed = String::new();
    for &(i, j) in &pairs {
        forward.push_str(&format!("{}\t{}\t{}\n", names[i], names[j], cos(i, j)));
        reversed.push_str(&format!("{}\t{}\t{}\n", names[i], names[j], -cos(i, j)));
    }
    fs::write(d.join("fwd.tsv"), forward).unwrap();
    fs::write(d.join("rev.tsv"), reversed).unwrap();
    let fwd = ok(
        d,
        &[
            "--porcelain",
            "eval-sim",
            "-i",
            "e.hve",
            "-p",
            "fwd.tsv",
            "--metric",
            "cosine",
        ],
    );
    assert_eq!(value(&fwd, "spearman").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&fwd, "pairs"), "5");
    let rev = ok(
        d,
        &[
            "--porcelain",
            "eval-sim",
            "-i",
            "e.hve",
            "-p",
            "rev.tsv",
            "--metric",
            "cosine",
        ],
    );
    assert_eq!(value(&rev, "spearman").parse::<f64>().unwrap(), -1.0);

    // Ground truth counts agreeing bits, so it falls exactly as the raw
    // distance rises; negating distances turns that into +1.
    write_codes(
        &d.join("c.hvc"),
        &["0000", "1000", "1100", "1111"],
        Some(&["a", "b", "c", "d"]),
        None,
    );
    fs::write(d.join("h.tsv"), "a\tb\t3\na\tc\t2\na\td\t0\nb\td\t1\nc\tc\t4\n").unwrap();
    let ham = ok(
        d,
        &[
            "--porcelain",
            "eval-sim",
            "-i",
            "c.hvc",
            "-p",
            "h.tsv",
            "--metric",
            "hamming",
        ],
    );
    assert_eq!(value(&ham, "spearman").parse::<f64>().unwrap(), 1.0);
    fs::write(d.join("dist.tsv"), "a\tb\t1\na\tc\t2\na\td\t4\nb\td\t3\nc\tc\t0\n").unwrap();
    let dist = ok(
        d,
        &[
            "--porcelain",
            "eval-sim",
            "-i",
            "c.hvc",
            "-p",
            "dist.tsv",
            "--metric",
            "hamming",
        ],
    );
    assert_eq!(value(&dist, "spearman").parse::<f64>().unwrap(), -1.0);

    fails(d, &["eval-sim", "-i", "c.hvc", "-p", "h.tsv", "--metric", "cosine"]);
    fails(d, &["eval-sim", "-i", "e.hve", "-p", "fwd.tsv", "--metric", "hamming"]);
    fs::write(d.join("bad.tsv"), "a\tnobody\t1\n").unwrap();
    let err = fails(d, &["eval-sim", "-i", "e.hve", "-p", "bad.tsv", "--metric", "cosine"]);
    assert!(err.contains("nobody"), "{err}");
}

#[test]
fn eval_knn_reports_error_and_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bits = ["0000", "0001", "1110", "1111"];
    let labels = ["x", "x", "y", "y"];
    write_codes(&d.join("t.hvc"), &bits, None, Some(&labels));
    let out = ok(
        d,
        &[
            "--porcelain",
            "eval-knn",
            "--train",
            "t.hvc",
            "--test",
            "t.hvc",
            "-k",
            "1",
        ],
    );
    assert_eq!(value(&out, "error").parse::<f64>().unwrap(), 0.0);
    assert!(out.contains("confusion=x\tx\t2"));

    write_codes(&d.join("one.hvc"), &["1010"], None, Some(&["solo"]));
    let out = ok(d, &["--porcelain", "eval-knn", "--train", "one.hvc", "--test", "t.hvc"]);
    assert_eq!(value(&out, "error").parse::<f64>().unwrap(), 1.0);
    assert!(out.contains("confusion=x\tsolo\t2") && out.contains("confusion=y\tsolo\t2"));

    write_codes(&d.join("bare.hvc"), &bits, None, None);
    let err = fails(d, &["eval-knn", "--train", "bare.hvc", "--test", "t.hvc"]);
    assert!(err.contains("label"), "{err}");
}

#[test]
fn correlation_reports_percent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("dup.csv"), "1,1,5\n2,2,5\n4,4,5\n").unwrap();
    let out = ok(d, &["--porcelain", "correlation", "-i", "dup.csv"]);
    assert_eq!(value(&out, "constant_dims"), "1");

    fs::write(d.join("same.csv"), "1,1\n2,2\n4,4\n").unwrap();
    let out = ok(d, &["--porcelain", "correlation", "-i", "same.csv"]);
    let pct: f64 = value(&out, "avg_abs_correlation_percent").parse().unwrap();
    assert!((pct - 100.0).abs() < 1e-9, "{pct}");

    ok(
        d,
        &[
            "--seed",
            "4",
            "gen-synthetic",
            "gaussian",
            "--dim",
            "16",
            "--n",
            "100000",
            "--out",
            "iid.hve",
        ],
    );
    let out = ok(d, &["--porcelain", "correlation", "-i", "iid.hve"]);
    let pct: f64 = value(&out, "avg_abs_correlation_percent").parse().unwrap();
    assert!((6.25..7.0).contains(&pct), "{pct}");
}

#[test]
fn memreport_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        ok(d, &["memreport", "10000000", "700", "512"]),
        "28 GB → 640 MB (43.75:1)\n"
    );
    assert_eq!(ok(d, &["memreport", "1", "1", "8"]), "4 B → 1 B (4:1)\n");
    let out = ok(d, &["--porcelain", "memreport", "10000000", "4096", "512"]);
    assert_eq!(value(&out, "ratio"), "256");
    assert_eq!(value(&out, "ratio_fraction"), "256/1");
    fails(d, &["memreport", "0", "700", "512"]);
}

#[test]
fn export_bitmap_renders_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_codes(
        &d.join("c.hvc"),
        &["1010", "0000", "1111"],
        None,
        Some(&["p", "q", "p"]),
    );
    ok(d, &["export-bitmap", "-c", "c.hvc", "-o", "all.pbm"]);
    assert_eq!(
        fs::read_to_string(d.join("all.pbm")).unwrap(),
        "P1\n4 3\n1 0 1 0\n0 0 0 0\n1 1 1 1\n"
    );
    ok(d, &["export-bitmap", "-c", "c.hvc", "-o", "p.pbm", "--label", "p"]);
    assert_eq!(
        fs::read_to_string(d.join("p.pbm")).unwrap(),
        "P1\n4 2\n1 0 1 0\n1 1 1 1\n"
    );
    ok(d, &["export-bitmap", "-c", "c.hvc", "-o", "none.pbm", "--label", "r"]);
    assert_eq!(fs::read_to_string(d.join("none.pbm")).unwrap(), "P1\n4 0\n");

    write_codes(&d.join("bare.hvc"), &["1010"], None, None);
    fails(d, &["export-bitmap", "-c", "bare.hvc", "-o", "x.pbm", "--label", "p"]);
}

#[test]
fn export_bitmap_sampling_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "1",
            "gen-synthetic",
            "clusters",
            "--bits",
            "16",
            "--out",
            "tr.hvc",
            "--test-out",
            "te.hvc",
        ],
    );
    for name in ["a.pbm", "b.pbm"] {
        ok(
            d,
            &[
                "--seed",
                "5",
                "export-bitmap",
                "-c",
                "tr.hvc",
                "-o",
                name,
                "--sample",
                "20",
            ],
        );
    }
    let a = fs::read_to_string(d.join("a.pbm")).unwrap();
    assert_eq!(a, fs::read_to_string(d.join("b.pbm")).unwrap());
    assert!(a.starts_with("P1\n16 20\n"));
    ok(
        d,
        &[
            "--seed",
            "6",
            "export-bitmap",
            "-c",
            "tr.hvc",
            "-o",
            "c.pbm",
            "--sample",
            "20",
        ],
    );
    assert_ne!(a, fs::read_to_string(d.join("c.pbm")).unwrap());
}

#[test]
fn import_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.csv"), "0.5,-1\n2,0.25\n").unwrap();
    let out = ok(d, &["--porcelain", "import-csv", "-i", "x.csv", "-o", "x.hve"]);
    assert_eq!(value(&out, "records"), "2");
    let Payload::Embeddings(set) = formats::read_payload(&d.join("x.hve")).unwrap() else {
        panic!("expected embeddings");
    };
    assert_eq!(set.as_slice(), &[0.5, -1.0, 2.0, 0.25]);
    fs::write(d.join("bad.csv"), "1,2\n3\n").unwrap();
    fails(d, &["import-csv", "-i", "bad.csv", "-o", "bad.hve"]);
    assert!(!d.join("bad.hve").exists());
}

#[test]
fn generators_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (seed, name) in [("9", "a.hve"), ("9", "b.hve"), ("10", "c.hve")] {
        ok(
            d,
            &["--seed", seed, "gen-synthetic", "factors", "--n", "50", "--out", name],
        );
    }
    let read = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.hve"), read("b.hve"));
    assert_ne!(read("a.hve"), read("c.hve"));
}
