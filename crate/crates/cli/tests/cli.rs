use std::cell::Cell;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::rc::Rc;

use mdq_cli::{emit_csv, exit, run_experiment, ExperimentKind, ExperimentSpec, Field};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn mdq(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdq"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn mdq")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_owned()).collect()
}

#[test]
fn f1_game_table_matches_closed_form() {
    let f1 = config("f1.json");
    let o = mdq(
        &["game", "--config", f1.to_str().unwrap(), "--x-grid", "0,0.1,0.25,0.5"],
        &[],
    );
    let text = stdout(&o);
    assert!(text.starts_with("# generated at unix time "));
    let v: Vec<f64> = column(&text, "V").iter().map(|s| s.parse().unwrap()).collect();
    let expected = [0.0, 0.0053965, 0.0416667, 0.1666667];
    for (a, b) in v.iter().zip(expected) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
    assert!(column(&text, "beta0").iter().all(|b| b.parse::<f64>().unwrap() == 0.25));
    assert!(column(&text, "finite").iter().all(|f| f == "true"));
}

#[test]
fn experiment_flag_matches_subcommand() {
    let f1 = config("f1.json");
    let f1 = f1.to_str().unwrap();
    let a = mdq(&["game", "--config", f1, "--include-timestamp", "false"], &[]);
    let b = mdq(
        &["--config", f1, "--experiment", "game-table", "--include-timestamp", "false"],
        &[],
    );
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(column(&stdout(&a), "x").len(), 21);
}

#[test]
fn infinite_game_reports_not_finite() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("f1.json")).unwrap();
    let path = dir.path().join("drift.json");
    std::fs::write(&path, text.replace("\"tilde_mu\": 1.0", "\"tilde_mu\": 0.1")).unwrap();
    let p = path.to_str().unwrap();
    let o = mdq(&["game", "--config", p, "--x-grid", "0.5"], &[]);
    let table = stdout(&o);
    assert_eq!(column(&table, "V"), ["inf"]);
    assert_eq!(column(&table, "finite"), ["false"]);
    // no finite horizon to default to
    let o = mdq(&["--config", p, "--experiment", "convergence", "--n-grid", "10"], &[]);
    assert_eq!(o.status.code(), Some(exit::NUMERIC));
}

#[test]
fn exit_codes() {
    let f1 = config("f1.json");
    let f1 = f1.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"classes": [{"lambda": "fast"}], "x0": [0]}"#).unwrap();
    let subcritical = dir.path().join("sub.json");
    let text = std::fs::read_to_string(config("f1.json")).unwrap();
    std::fs::write(&subcritical, text.replace("\"lambda\": 1.0", "\"lambda\": 0.9")).unwrap();

    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["--config", bad.to_str().unwrap(), "--experiment", "game-table"], exit::CONFIG),
        (vec!["--config", subcritical.to_str().unwrap(), "--experiment", "game-table"], exit::CONFIG),
        (vec!["--config", "/no/such/file.json", "--experiment", "game-table"], exit::CONFIG),
        (vec!["--config", f1, "--experiment", "convergence"], exit::CONFIG),
        (vec!["--config", f1, "--experiment", "nonsense"], exit::CONFIG),
        (vec!["--config", f1, "--experiment", "simulate", "--n-grid", "10", "--policy", "fifo"], exit::CONFIG),
        (vec!["--config", f1, "--experiment", "saddle-check", "--x-grid", "0.3"], exit::NUMERIC),
        (vec!["--config", f1, "--experiment", "game-table", "--x-grid", "0.1"], exit::SUCCESS),
    ];
    for (args, code) in cases {
        let o = mdq(&args, &[]);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = mdq(&["--config", f1, "--experiment", "game-table"], &[("MDQ_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(exit::CONFIG));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"classes": [{"lambda": "fast"}], "x0": [0]}"#).unwrap();
    let o = mdq(&["--config", bad.to_str().unwrap(), "--experiment", "game-table"], &[]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("classes[0].lambda"), "{err}");
}

#[test]
fn output_is_deterministic_across_runs_and_thread_counts() {
    let f2 = config("f2.json");
    let f2 = f2.to_str().unwrap();
    let sim = [
        "--config", f2, "--experiment", "simulate", "--n-grid", "50,200", "--replications", "16",
        "--horizon", "2", "--policy", "ao,static-priority", "--include-timestamp", "false",
    ];
    let a = stdout(&mdq(&sim, &[]));
    let b = stdout(&mdq(&sim, &[("MDQ_THREADS", "1")]));
    assert_eq!(a, b);
    assert_eq!(column(&a, "n").len(), 2 * 2 * 16);

    let cmp = [
        "--config", f2, "--experiment", "policy-compare", "--n-grid", "100", "--replications", "64",
        "--horizon", "2", "--include-timestamp", "false",
    ];
    let a = stdout(&mdq(&cmp, &[]));
    let b = stdout(&mdq(&cmp, &[("MDQ_THREADS", "3")]));
    assert_eq!(a, b);
    assert_eq!(column(&a, "policy"), ["ao", "static-priority", "full-buffer-reject-only"]);

    // with the timestamp, only the comment line may differ
    let with_ts: Vec<&str> = cmp[..cmp.len() - 2].to_vec();
    let c = stdout(&mdq(&with_ts, &[]));
    let (comment, body) = c.split_once('\n').unwrap();
    assert!(comment.starts_with("# "));
    assert_eq!(body, a);
}

#[test]
fn convergence_rows_carry_reference_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let mut spec = ExperimentSpec::new(config("f1.json"), ExperimentKind::Convergence);
    spec.n_grid = vec![10, 100];
    spec.replications = 32;
    spec.include_timestamp = false;
    spec.out = Some(out.clone());
    run_experiment(&spec).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("n,b_n,policy,T,M,value,ess,heavy_tail,V_ref\n"));
    assert_eq!(column(&text, "n"), ["10", "100"]);
    for v in column(&text, "V_ref") {
        assert!((v.parse::<f64>().unwrap() - 0.0053965).abs() < 1e-6);
    }
    for b in column(&text, "b_n") {
        assert!(b.parse::<f64>().unwrap() > 1.0);
    }
}

#[test]
fn simulate_writes_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.csv");
    let mut spec = ExperimentSpec::new(config("f2.json"), ExperimentKind::Simulate);
    spec.n_grid = vec![30];
    spec.replications = 3;
    spec.horizon = Some(1.0);
    spec.out = Some(dir.path().join("sim.csv"));
    spec.event_log = Some(log.clone());
    run_experiment(&spec).unwrap();
    let events = std::fs::read_to_string(&log).unwrap();
    assert!(events.starts_with("time,kind,class,x_1,x_2\n"));
    let sim = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let arrivals: u64 = column(&sim, "arrivals")[0].parse().unwrap();
    // rejected arrivals are logged under their rejection kind
    let logged = events
        .lines()
        .filter(|l| [",arrival,", "_rejection,"].iter().any(|k| l.contains(k)))
        .count() as u64;
    assert_eq!(arrivals, logged);
}

#[test]
fn saddle_check_agrees_with_value() {
    let mut spec = ExperimentSpec::new(config("f1.json"), ExperimentKind::SaddleCheck);
    spec.replications = 20;
    spec.x_grid = vec![0.05, 0.1, 0.2];
    let dir = tempfile::tempdir().unwrap();
    spec.out = Some(dir.path().join("saddle.csv"));
    run_experiment(&spec).unwrap();
    let text = std::fs::read_to_string(spec.out.unwrap()).unwrap();
    assert_eq!(column(&text, "within_tol"), ["true", "true", "true"]);
    assert_eq!(column(&text, "candidates"), ["23", "23", "23"]);
}

#[test]
fn empty_row_set_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let file = std::fs::File::create(&path).unwrap();
    emit_csv(file, None, &["a", "b"], std::iter::empty()).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
}

#[test]
fn row_round_trips_exactly() {
    let values = [
        0.1,
        1.0 / 3.0,
        -2.0f64.powi(-1074),
        std::f64::consts::PI * 1e300,
        0.0053965001287408368,
    ];
    let row: Vec<Field> = values
        .iter()
        .map(|&v| Field::Float(v))
        .chain([Field::Int(u64::MAX), Field::from("ao"), Field::Bool(true)])
        .collect();
    let out = emit_csv(Vec::new(), None, &["a", "b", "c", "d", "e", "f", "g", "h"], [Ok(row)]).unwrap();
    let mut r = csv::Reader::from_reader(out.as_slice());
    let rec = r.records().next().unwrap().unwrap();
    for (k, &v) in values.iter().enumerate() {
        assert_eq!(rec[k].parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
    assert_eq!(rec[5].parse::<u64>().unwrap(), u64::MAX);
    assert_eq!(&rec[6], "ao");
    assert_eq!(&rec[7], "true");
}

/// Counts bytes and reports how many had reached it.
struct Meter(Rc<Cell<usize>>);

impl Write for Meter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.set(self.0.get() + buf.len());
        Ok(buf.len())
    }
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[test]
fn million_rows_stream() {
    const ROWS: usize = 1_000_000;
    let written = Rc::new(Cell::new(0));
    let seen = written.clone();
    let mut flushed_before_end = 0;
    let rows = (0..ROWS).map(|k| {
        if k == ROWS - 1 {
            flushed_before_end = seen.get();
        }
        Ok(vec![Field::Int(k as u64), Field::Float(k as f64 * 0.5)])
    });
    emit_csv(Meter(written.clone()), None, &["k", "v"], rows).unwrap();
    let total = written.get();
    // Everything but a bounded tail reached the sink before the last row
    // was produced.
    assert!(total > 20 * ROWS);
    assert!(total - flushed_before_end < 64 * 1024, "{total} vs {flushed_before_end}");
}
