use std::path::Path;
use std::process::{Command, Output};

fn aoicache(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoicache")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_reports_and_echoes_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = aoicache(dir.path(), &["run", "--preset=tiny", "--lambda=2", "--output.dir=out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# effective config\n"));
    assert!(text.contains("economics.lambda = 2\n"));
    assert!(text.contains("preset = tiny\n"));
    for f in ["run.csv", "run_periods.csv", "runlog.csv", "run_meta.txt"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    assert!(summary.starts_with("strategy;param;period;utility;hit_rate;avg_aoi;occupancy\n"));

    let b = aoicache(dir.path(), &["bound", "out/runlog.csv"]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert!(stdout(&b).starts_with("alpha="));
}

#[test]
fn config_file_is_layered_under_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.conf"), "preset = tiny\neconomics.phi = 12\nclock.b = 5\n").unwrap();
    let o = aoicache(dir.path(), &["run", "-c", "exp.conf", "--clock.b=6", "--strategy.name=fifo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("economics.phi = 12\n"));
    assert!(text.contains("clock.b = 6\n"));
    assert!(text.contains("\nfifo "));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["run", "--preset=tiny", "--bogus=1"], "unknown key `bogus`"),
        (
            &["run", "--preset=tiny", "--workload.source=ingested", "--workload.catalog_file=c.csv", "--workload.trace_file=missing.csv"],
            "missing.csv",
        ),
        (&["compare", "--preset=tiny", "--compare.strategies=fifo,fifo"], "duplicate strategy"),
        (&["sweep", "--preset=tiny", "--sweep.axis=lambda"], "sweep.values"),
        (&["run", "--preset=huge"], "unknown preset"),
        (&["run", "--preset=tiny", "--jobs=many"], "--jobs"),
        (&["run", "--preset=tiny", "--economics.lambda=abc"], "economics.lambda"),
    ];
    for (args, needle) in cases {
        let o = aoicache(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(aoicache(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn failing_plugin_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = aoicache(
        dir.path(),
        &["run", "--preset=tiny", "--strategy.predictor=plugin", "--strategy.plugin_command=exec /nonexistent/predictor"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn compare_and_sweep_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset=tiny", "--compare.strategies=dtoca,fifo,random"];
    let a = aoicache(dir.path(), &[&["compare", "--output.dir=a", "--sequential"], &args[..]].concat());
    let b = aoicache(dir.path(), &[&["compare", "--output.dir=b", "--jobs=3"], &args[..]].concat());
    assert!(a.status.success() && b.status.success(), "{}{}", stderr(&a), stderr(&b));
    for f in ["compare.csv", "compare_periods.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let rows = std::fs::read_to_string(dir.path().join("a/compare.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);

    let s = aoicache(dir.path(), &["sweep", "--preset=tiny", "--sweep.axis=lambda", "--sweep.values=0.5,2", "--compare.strategies=fifo", "--output.dir=s"]);
    assert!(s.status.success(), "{}", stderr(&s));
    let rows = std::fs::read_to_string(dir.path().join("s/sweep_lambda.csv")).unwrap();
    let params: Vec<_> = rows.lines().skip(1).map(|l| l.split(';').nth(1).unwrap().to_string()).collect();
    assert_eq!(params, ["0.5", "2"]);
}

#[test]
fn generated_workload_survives_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let g = aoicache(dir.path(), &["gen-workload", "--preset=tiny", "--output.dir=g"]);
    assert!(g.status.success(), "{}", stderr(&g));
    let i = aoicache(
        dir.path(),
        &["ingest", "--preset=tiny", "--workload.catalog_file=g/catalog.csv", "--workload.trace_file=g/trace.csv", "--output.dir=i"],
    );
    assert!(i.status.success(), "{}", stderr(&i));
    assert!(stdout(&i).contains("contents=3000 "));
    for f in ["catalog.csv", "trace.csv"] {
        let x = std::fs::read(dir.path().join("g").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("i").join(f)).unwrap();
        assert!(x == y, "{f} differs after ingest");
    }
}
