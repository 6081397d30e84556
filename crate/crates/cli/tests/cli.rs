//! End-to-end tests of the rsqrt-lut binary: exit codes, output shapes,
//! determinism.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsqrt-lut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code present")
}

#[test]
fn verify_bits_defaults() {
    let out = run(&["verify-bits"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("addr_bits=11: t2=1593 t3=627"), "{text}");
    assert!(text.contains("addr_bits=12: t2=3186 t3=1254"), "{text}");
}

#[test]
fn verify_bits_accepts_matching_expectations() {
    let out = run(&[
        "verify-bits",
        "--addr-bits",
        "11,12",
        "--expect-t2",
        "1593,3186",
        "--expect-t3",
        "627,1254",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn verify_bits_mismatch_is_domain_error() {
    let out = run(&[
        "verify-bits",
        "--addr-bits",
        "11",
        "--expect-t2",
        "1000",
        "--expect-t3",
        "627",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
}

#[test]
fn sweep_emits_ordered_rows_and_is_deterministic() {
    let args = [
        "sweep",
        "--kind",
        "alt",
        "--addr-bits",
        "12,14,16",
        "--interp",
        "2,4,8,16,32,64",
        "--samples",
        "300",
    ];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 19, "header plus 18 rows:\n{text}");
    assert!(lines[0].starts_with("kind,addr_bits,"));
    assert!(lines[1].starts_with("alt,12,25,2,300,42,30,"));
    assert!(lines[6].starts_with("alt,12,25,64,"));
    assert!(lines[7].starts_with("alt,14,25,2,"));
    assert!(lines[18].starts_with("alt,16,25,64,"));
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout, "sweep output not reproducible");
}

#[test]
fn eval_power_of_four_converges_in_one() {
    let out = run(&["eval", "--x", "4.0", "--kind", "mlt", "--addr-bits", "11"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("converged after 1"), "{}", stdout(&out));
}

#[test]
fn eval_bit_pattern_input() {
    let out = run(&["eval", "--x", "0x40800000", "--kind", "mlt", "--addr-bits", "11"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("bits 0x40800000"));
}

#[test]
fn eval_negative_is_domain_error() {
    let out = run(&["eval", "--x", "-1.0", "--kind", "mlt", "--addr-bits", "11"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative"));
}

#[test]
fn eval_corrupt_table_file_is_file_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tbl");
    std::fs::write(&path, b"not a table at all").unwrap();
    let out = run(&["eval", "--x", "1.5", "--table-file", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["sweep", "--bogus"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn missing_table_args_is_usage_error() {
    let out = run(&["eval", "--x", "1.5"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn help_exits_zero() {
    for args in [&["--help"][..], &["gen", "--help"][..], &["report", "--help"][..]] {
        let out = run(args);
        assert_eq!(code(&out), 0, "help for {args:?}");
    }
}

#[test]
fn gen_then_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mlt11.tbl");
    let gen = run(&[
        "gen",
        "--kind",
        "mlt",
        "--addr-bits",
        "11",
        "--compress",
        "--out-file",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0, "stderr: {}", String::from_utf8_lossy(&gen.stderr));
    let out = run(&["eval", "--x", "2.0", "--table-file", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("converged after"), "{}", stdout(&out));
}

#[test]
fn gen_csv_dump_shape() {
    let out = run(&["gen", "--kind", "alt", "--addr-bits", "8", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("address,value_hex,value_dec\n"), "{text}");
    assert_eq!(text.lines().count(), 257);
}

#[test]
fn report_renders_acceptability() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let sweep = run(&[
        "sweep",
        "--kind",
        "alt",
        "--addr-bits",
        "12",
        "--interp",
        "2,4",
        "--samples",
        "400",
        "--out-file",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&sweep), 0);
    let out = run(&["report", "--csv", path.to_str().unwrap(), "--layout", "table2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("Error after 2nd iteration"), "{text}");
    assert!(text.contains("| Acceptable |"), "{text}");
    let t3 = run(&["report", "--csv", path.to_str().unwrap(), "--layout", "table3"]);
    assert_eq!(code(&t3), 0);
    assert!(stdout(&t3).contains("12-bit alt"));
}

#[test]
fn report_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.csv");
    std::fs::write(&path, "this,is,not\na,sweep,file\n").unwrap();
    let out = run(&["report", "--csv", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
