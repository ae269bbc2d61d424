mod common;

use common::*;

const CONFIG: &str = "\
# end-to-end run
mobile = mobile.csv
reference = reference.csv
method = ked
umax = 7200
fractions = 0.5, 0.9
methods = ok,ked,idw
k = 25
x_min = -1000
x_max = 1000
y_min = -1000
y_max = 1000
cell = 500
t_start = 2024-06-01T06:00:00Z
t_end = 2024-06-01T08:00:00Z
t_step = 3600
";

fn manifest(f: &Fixture, dir: &str) -> Vec<Vec<String>> {
    rows(&f.read(&format!("{dir}/manifest.csv")))
}

#[test]
fn rerun_gives_identical_digests() {
    let f = Fixture::new(3.0, 1.0);
    f.write("run.cfg", CONFIG);
    ok(&f.run(&["pipeline", "--config", "run.cfg", "--out-dir", "a"]));
    ok(&f.run(&["pipeline", "--config", "run.cfg", "--out-dir", "b"]));
    let a = manifest(&f, "a");
    assert_eq!(a, manifest(&f, "b"));
    let stages: Vec<&str> = a.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        stages,
        [
            "ingest",
            "calibrate",
            "calibrate",
            "variogram",
            "fit",
            "crossval",
            "map",
            "map",
            "map",
            "map"
        ]
    );
    for row in &a {
        assert_eq!(row[2].len(), 64);
        assert!(f.path(&format!("a/{}", row[1])).is_file());
    }
    assert!(f.read("a/manifest.csv").lines().next().unwrap().ends_with("seed=7"));

    // a different seed only changes seeded artifacts
    ok(&f.run(&["pipeline", "--config", "run.cfg", "--out-dir", "c", "--seed", "8"]));
    let c = manifest(&f, "c");
    assert_eq!(a[0], c[0]);
    assert_ne!(a[5], c[5]);
}

#[test]
fn flags_and_overrides_take_precedence() {
    let f = Fixture::new(3.0, 1.0);
    f.write("run.cfg", &format!("{CONFIG}out_dir = from_config\n"));
    ok(&f.run(&[
        "pipeline",
        "--config",
        "run.cfg",
        "--out-dir",
        "from_flag",
        "--set",
        "crossval=false",
        "--set",
        "x_min=",
        "--set",
        "x_max=",
        "--set",
        "y_min=",
        "--set",
        "y_max=",
        "--set",
        "cell=",
        "--set",
        "t_start=",
        "--set",
        "t_end=",
        "--set",
        "t_step=",
    ]));
    assert!(!f.path("from_config").exists());
    let stages: Vec<String> = manifest(&f, "from_flag").into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(stages, ["ingest", "calibrate", "calibrate", "variogram", "fit"]);
}

#[test]
fn ked_without_reference_names_the_field() {
    let f = Fixture::new(3.0, 1.0);
    let out = f.run(&[
        "pipeline",
        "--mobile",
        "mobile.csv",
        "--out-dir",
        "o",
        "--method",
        "ked",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`reference`"), "{}", stderr(&out));

    let out = f.run(&[
        "pipeline",
        "--mobile",
        "mobile.csv",
        "--reference",
        "gone.csv",
        "--out-dir",
        "o",
        "--method",
        "ked",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`reference`"), "{}", stderr(&out));
    assert!(!f.path("o").exists());
}

#[test]
fn ordinary_kriging_needs_no_reference() {
    let f = Fixture::new(3.0, 1.0);
    ok(&f.run(&[
        "pipeline",
        "--mobile",
        "mobile.csv",
        "--out-dir",
        "o",
        "--method",
        "ok",
        "--set",
        "fractions=0.5",
        "--set",
        "umax=7200",
    ]));
    let rows = manifest(&f, "o");
    assert!(rows.iter().all(|r| r[0] != "calibrate"));
    let cv = common::rows(&f.read("o/crossval.csv"));
    let methods: Vec<&str> = cv.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["ok", "idw"]);
}

#[test]
fn config_errors() {
    let f = Fixture::new(0.0, 0.0);
    f.write("bad.cfg", "mobile = mobile.csv\nout_dir = o\nsmoothing = 3\n");
    let out = f.run(&["pipeline", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("smoothing"));

    let out = f.run(&[
        "pipeline",
        "--mobile",
        "mobile.csv",
        "--out-dir",
        "o",
        "--set",
        "seed=abc",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`seed`"));

    let out = f.run(&[
        "pipeline",
        "--mobile",
        "mobile.csv",
        "--out-dir",
        "o",
        "--set",
        "cell=10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("map grid"));

    let out = f.run(&["pipeline", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`mobile`"));
}

#[test]
fn stage_errors_name_the_stage() {
    let f = Fixture::new(0.0, 0.0);
    let out = f.run(&[
        "pipeline",
        "--mobile",
        "reference.csv",
        "--out-dir",
        "o",
        "--method",
        "ok",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stage ingest"), "{}", stderr(&out));
}
