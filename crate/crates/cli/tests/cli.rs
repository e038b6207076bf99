use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csc_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csc-sim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = csc_sim(args);
    assert!(
        out.status.success(),
        "csc-sim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"communities": 2, "members_per_community": 6, "days": 7, "pool_size": 20,
            "uptake_levels": [0.0, 0.5], "seed": 11}"#,
    )
    .unwrap();
    path
}

#[test]
fn single_community_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let community = dir.path().join("c0");
    ok(&["gen-community", "--config", p(&cfg), "--index", "0", "--uptake", "0.5", "--out", p(&community)]);
    let meters = community.join("meters.csv");
    let tariffs = community.join("tariffs.json");
    assert!(fs::read_to_string(&meters).unwrap().starts_with("member_id,timestamp,import_kwh,export_kwh"));

    let alloc = dir.path().join("alloc.csv");
    ok(&["allocate", "--meters", p(&meters), "--tariffs", p(&tariffs), "--mechanism", "auction", "--out", p(&alloc)]);
    let header = fs::read_to_string(&alloc).unwrap();
    assert!(header.starts_with("timestamp,member_id,role,allocated_kwh,price_eur_per_kwh,flags"));

    let bills = dir.path().join("bills.csv");
    ok(&[
        "bill", "--meters", p(&meters), "--tariffs", p(&tariffs), "--allocations", p(&alloc),
        "--out", p(&bills), "--scenario", "c0000-u0.50", "--mechanism", "auction",
    ]);
    let bill_rows: Vec<String> = fs::read_to_string(&bills).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(bill_rows.len(), 1 + 2 * 6);
    assert!(bill_rows[1..].iter().any(|r| r.contains(",none,")));

    let fairness = dir.path().join("fairness.csv");
    ok(&["fairness", "--bills", p(&bills), "--meters", p(&meters), "--out", p(&fairness)]);
    let text = fs::read_to_string(&fairness).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "community_id,uptake,mechanism,jain,min_max,merit_index,social_welfare,weighted_utility"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["c0000", "0.50", "auction"]);
    let jain: f64 = row[3].parse().unwrap();
    assert!(jain > 0.0 && jain <= 1.0);
}

#[test]
fn simulate_writes_hashed_directory_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let first = ok(&["simulate", "--config", p(&cfg), "--out", p(&out), "--jobs", "2"]);
    let run_dir = Path::new(first.trim());
    assert_eq!(run_dir.parent().unwrap(), out);
    assert_eq!(run_dir.file_name().unwrap().len(), 16);
    for f in ["bills.csv", "fairness.csv", "summary.csv", "manifest.json"] {
        assert!(run_dir.join(f).is_file(), "{f} missing");
    }
    let fairness = fs::read_to_string(run_dir.join("fairness.csv")).unwrap();
    // 2 communities x 2 uptakes x 4 mechanisms
    assert_eq!(fairness.lines().count(), 1 + 16);

    let again = ok(&["simulate", "--config", p(&cfg), "--out", p(&out), "--resume", "--sequential"]);
    assert_eq!(first, again);
    assert_eq!(fairness, fs::read_to_string(run_dir.join("fairness.csv")).unwrap());

    let reseeded = ok(&["simulate", "--config", p(&cfg), "--out", p(&out), "--seed", "12"]);
    assert_ne!(first, reseeded);
}

#[test]
fn invalid_meters_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let community = dir.path().join("c1");
    ok(&["gen-community", "--config", p(&cfg), "--index", "1", "--uptake", "0.0", "--out", p(&community)]);
    let meters = community.join("meters.csv");
    let text = fs::read_to_string(&meters).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(2, 3);
    fs::write(&meters, lines.join("\n")).unwrap();

    let out = csc_sim(&[
        "allocate", "--meters", p(&meters), "--tariffs", p(&community.join("tariffs.json")),
        "--mechanism", "prorata", "--out", p(&dir.path().join("a.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not increase"));
}
