use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silverforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn frame_prints_all_matrices() {
    let o = run(&["frame", "--a", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for i in 1..=4 {
        assert!(text.contains(&format!("# F{i}\n")));
    }
}

#[test]
fn ser_requires_seed() {
    let o = run(&["ser", "--nt", "2", "--nr", "2", "--snr-db", "10", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn capacity_requires_seed() {
    let o = run(&["capacity", "--nt", "2", "--nr", "1", "--snr-db", "0", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_antenna_count_is_config_error() {
    let o = run(&["ser", "--nt", "3", "--nr", "2", "--snr-db", "10", "--trials", "10", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ser_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("ser{i}.csv"))).collect();
    for p in &paths {
        let o = run(&[
            "ser", "--nt", "2", "--nr", "2", "--snr-db", "8,12", "--trials", "100", "--seed", "42", "--output",
            p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(&paths[0]).unwrap();
    assert_eq!(a, fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# silverforge v1\nsnr_db,symbol_errors,symbols_sent,ser\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn ser_zero_trials_is_header_only() {
    let o = run(&["ser", "--nt", "2", "--nr", "2", "--snr-db", "10", "--trials", "0", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "# silverforge v1\nsnr_db,symbol_errors,symbols_sent,ser\n");
}

#[test]
fn timing_adds_column() {
    let o = run(&["ser", "--nt", "2", "--nr", "2", "--snr-db", "10", "--trials", "20", "--seed", "1", "--timing"]);
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",wall_time"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "nt = 4\nnr = 2\nM = 4\nsnr_db = [6.0]\ntrials = 20\nseed = 5\n").unwrap();
    let o = run(&["ser", "--config", cfg.to_str().unwrap(), "--snr-db", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(2).unwrap().to_string();
    // 20 trials of 8 complex symbols
    assert!(row.starts_with("9,") && row.contains(",160,"), "{row}");

    fs::write(&cfg, "nt = 4\nbogus = 1\n").unwrap();
    let o = run(&["ser", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn capacity_csv_columns() {
    let o = run(&[
        "capacity", "--nt", "2", "--nr", "2", "--code", "silver", "--snr-db", "0,10", "--trials", "200", "--seed", "9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# silverforge v1"));
    assert_eq!(lines.next(), Some("snr_db,capacity,cap_stderr,mi,mi_stderr"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        // lossless code: identical per realization, hence in mean
        assert!((f[1] - f[3]).abs() < 1e-9);
    }
}

#[test]
fn decode_selftest_marks_capped_brute_force() {
    let o = run(&["decode-selftest", "--nt", "4", "--nr", "4", "--trials", "3", "--seed", "2", "--snr", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1), Some("trial,metric_bf,metric_sd,metric_cond,nodes_sd,nodes_cond"));
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(1) == Some("NA")));
}

#[test]
fn verify_passes_and_rejects_corrupted_weights() {
    let o = run(&["verify", "--nt", "8", "--nr", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("code.txt");
    let o = run(&["silver", "--nt", "4", "--nr", "2", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify", "--weights", path.to_str().unwrap(), "--nr", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // flip the sign of one entry of the second weight
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let header = lines.iter().enumerate().filter(|(_, l)| l.as_str() == "4 4").nth(1).unwrap().0;
    let row = &mut lines[header + 1];
    let mut toks: Vec<String> = row.split_whitespace().map(str::to_string).collect();
    let idx = toks.iter().position(|t| t != "0+0j").unwrap();
    toks[idx] = if toks[idx].starts_with('-') { toks[idx][1..].to_string() } else { format!("-{}", toks[idx]) };
    *row = toks.join(" ");
    fs::write(&path, lines.join("\n")).unwrap();
    let o = run(&["verify", "--weights", path.to_str().unwrap(), "--nr", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL layer 1 four-group conditions"));
}

#[test]
fn verify_rejects_unparseable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.txt");
    fs::write(&path, "2 2\n1 2\n").unwrap();
    let o = run(&["verify", "--weights", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_and_silver_emit_parseable_text() {
    let o = run(&["build", "--nt", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("8 8\n").count(), 16);
    let o = run(&["silver", "--nt", "2", "--nr", "2"]);
    let text = stdout(&o);
    assert!(text.contains("# information lossless: yes"));
    assert!(text.contains("layer 2: 5 6 7 8"));
}

#[test]
fn mindet_reports_sweep_and_rejects_empty_constellation() {
    let o = run(&["mindet", "--nt", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("phase_deg,min_det"));
    assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 7);
    let o = run(&["mindet", "--nt", "2", "-M", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
