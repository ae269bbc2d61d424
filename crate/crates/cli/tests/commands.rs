mod common;

use common::*;

fn ingest_and_calibrate(f: &Fixture) {
    ok(&f.run(&[
        "ingest",
        "--mobile",
        "mobile.csv",
        "--reference",
        "reference.csv",
        "--out",
        "norm.csv",
    ]));
    ok(&f.run(&[
        "calibrate",
        "--data",
        "norm.csv",
        "--reference",
        "reference.csv",
        "--out",
        "coef.csv",
        "--apply",
        "cal.csv",
    ]));
}

#[test]
fn ingest_writes_normalized_table() {
    let f = Fixture::new(3.0, 1.0);
    ok(&f.run(&[
        "ingest",
        "--mobile",
        "mobile.csv",
        "--origin",
        "47.37,8.54",
        "--out",
        "norm.csv",
    ]));
    let text = f.read("norm.csv");
    assert!(text.starts_with("# stkrige "), "{text}");
    assert!(text.lines().next().unwrap().ends_with("seed=none"));
    assert_eq!(header(&text), "sensor_id,t_seconds,x_m,y_m,value_ugm3");
    let rows = rows(&text);
    assert_eq!(rows.len(), 240);
    assert_eq!(rows[0][1], T0.to_string());
    // coordinates are local meters around the origin
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap().abs() < 5000.0));
}

#[test]
fn calibration_recovers_sensor_lines() {
    let f = Fixture::new(0.0, 0.0);
    ingest_and_calibrate(&f);
    let coef = f.read("coef.csv");
    assert_eq!(header(&coef), "sensor_id,a,h,n_pairs,residual_rms");
    let rows = rows(&coef);
    assert_eq!(rows.len(), 4);
    for (s, row) in rows.iter().enumerate() {
        let (a, h) = sensor_bias(s);
        assert_eq!(row[0], format!("tram{s}"));
        assert!((row[1].parse::<f64>().unwrap() - a).abs() < 1e-6, "{row:?}");
        assert!((row[2].parse::<f64>().unwrap() - h).abs() < 1e-6, "{row:?}");
        assert_eq!(row[3], "60");
    }
    for row in common::rows(&f.read("cal.csv")) {
        let t: u64 = row[1].parse().unwrap();
        let v: f64 = row[4].parse().unwrap();
        assert!((v - reference_value(t)).abs() < 1e-6);
    }
}

#[test]
fn variogram_and_fit_report_time_unit() {
    let f = Fixture::new(3.0, 1.0);
    ingest_and_calibrate(&f);
    ok(&f.run(&[
        "variogram",
        "--data",
        "cal.csv",
        "--kind",
        "station",
        "--reference",
        "reference.csv",
        "--hmax",
        "3000",
        "--umax",
        "7200",
        "--nh",
        "10",
        "--nu",
        "8",
        "--out",
        "emp.csv",
    ]));
    let emp = f.read("emp.csv");
    assert_eq!(header(&emp), "h_lo,h_hi,u_lo,u_hi,h_mean,u_mean,gamma,n_pairs");
    assert_eq!(rows(&emp).len(), 80);

    ok(&f.run(&["fit", "--emp", "emp.csv", "--time-unit", "seconds", "--out", "s.json"]));
    ok(&f.run(&["fit", "--emp", "emp.csv", "--time-unit", "hours", "--out", "h.json"]));
    let s: serde_json::Value = serde_json::from_str(&f.read("s.json")).unwrap();
    let h: serde_json::Value = serde_json::from_str(&f.read("h.json")).unwrap();
    for key in ["family", "sill", "nugget", "range", "K", "objective"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["time_unit"], "seconds");
    assert_eq!(h["time_unit"], "hours");
    assert_eq!(s["sill"], h["sill"]);
    let ks = s["K"].as_f64().unwrap();
    let kh = h["K"].as_f64().unwrap();
    assert!((kh - 3600.0 * ks).abs() <= 1e-9 * kh.abs());

    // a station-residual variogram without the station file is a usage error
    let out = f.run(&["variogram", "--data", "cal.csv", "--kind", "station", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

fn targets(f: &Fixture, n: usize) {
    let mut text = String::from("x,y,t\n");
    for i in 0..n {
        let x = 2000.0 * jitter(i as u64 * 3);
        let y = 2000.0 * jitter(i as u64 * 3 + 1);
        text += &format!("{x},{y},{}\n", 600 * (i % 20));
    }
    f.write("points.csv", &text);
}

#[test]
fn simulation_is_seeded() {
    let f = Fixture::new(0.0, 0.0);
    f.model("model.json");
    targets(&f, 120);
    for (out, seed) in [("a.csv", "3"), ("b.csv", "3"), ("c.csv", "4")] {
        ok(&f.run(&[
            "simulate",
            "--model",
            "model.json",
            "--points",
            "points.csv",
            "--seed",
            seed,
            "--out",
            out,
        ]));
    }
    assert_eq!(f.read("a.csv"), f.read("b.csv"));
    assert_ne!(rows(&f.read("a.csv")), rows(&f.read("c.csv")));
    assert!(f.read("a.csv").lines().next().unwrap().ends_with("seed=3"));
    assert_eq!(rows(&f.read("a.csv")).len(), 120);
}

#[test]
fn single_cell_map_matches_predict() {
    let f = Fixture::new(0.0, 0.0);
    f.model("model.json");
    targets(&f, 150);
    ok(&f.run(&[
        "simulate",
        "--model",
        "model.json",
        "--points",
        "points.csv",
        "--mean",
        "40",
        "--out",
        "sim.csv",
    ]));
    f.write("target.csv", "x,y,t\n150,-250,3000\n");
    for method in ["ok", "idw"] {
        let pred = format!("{method}.csv");
        let dir = format!("{method}_map");
        let common = [
            "--data",
            "sim.csv",
            "--model",
            "model.json",
            "--method",
            method,
            "--C",
            "2",
        ];
        let mut args = vec!["predict"];
        args.extend(common);
        args.extend(["--targets", "target.csv", "--out", &pred]);
        ok(&f.run(&args));
        let mut args = vec!["map"];
        args.extend(common);
        args.extend([
            "--x-min",
            "100",
            "--x-max",
            "200",
            "--y-min",
            "-300",
            "--y-max",
            "-200",
            "--cell",
            "100",
            "--t-start",
            "3000",
            "--t-end",
            "3000",
            "--t-step",
            "60",
            "--out-dir",
            &dir,
        ]);
        ok(&f.run(&args));
        let p = &rows(&f.read(&pred))[0];
        assert_eq!(header(&f.read(&pred)), "x,y,t,value,variance,n_neighbors");
        let cell = rows(&f.read(&format!("{dir}/slice_0000.csv")));
        assert_eq!(cell.len(), 1);
        assert_eq!((cell[0][0].as_str(), cell[0][1].as_str()), ("150", "-250"));
        assert_eq!(cell[0][2], p[3], "{method}");
        assert_eq!(cell[0][3], p[4], "{method}");
    }
}

#[test]
fn predict_records_tuned_idw_constant() {
    let f = Fixture::new(3.0, 1.0);
    ok(&f.run(&["ingest", "--mobile", "mobile.csv", "--out", "norm.csv"]));
    f.write("target.csv", "x,y,t\n0,0,2024-06-01T07:00:00Z\n");
    ok(&f.run(&[
        "predict",
        "--data",
        "norm.csv",
        "--method",
        "idw",
        "--tune-C",
        "--targets",
        "target.csv",
        "--out",
        "p.csv",
    ]));
    let text = f.read("p.csv");
    assert!(text.lines().any(|l| l.starts_with("# idw C=")), "{text}");
    let row = &rows(&text)[0];
    assert_eq!(row[2], (T0 + 7200).to_string());
    assert!(row[4].is_empty(), "IDW has no variance");
    // kriging without a model is a usage error
    let out = f.run(&[
        "predict",
        "--data",
        "norm.csv",
        "--method",
        "ok",
        "--targets",
        "target.csv",
        "--out",
        "q.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hourly_map_from_five_to_twenty_two() {
    let f = Fixture::new(3.0, 1.0);
    ingest_and_calibrate(&f);
    f.model("model.json");
    ok(&f.run(&[
        "map",
        "--data",
        "cal.csv",
        "--model",
        "model.json",
        "--method",
        "ked",
        "--reference",
        "reference.csv",
        "--k",
        "20",
        "--x-min",
        "-2000",
        "--x-max",
        "2000",
        "--y-min",
        "-2000",
        "--y-max",
        "2000",
        "--cell",
        "1000",
        "--t-start",
        "2024-06-01T05:00:00Z",
        "--t-end",
        "2024-06-01T22:00:00Z",
        "--t-step",
        "3600",
        "--out-dir",
        "maps",
    ]));
    let manifest = f.read("maps/manifest.csv");
    assert_eq!(header(&manifest), "slice,t_seconds,file,n_cells,n_absent");
    let rows = rows(&manifest);
    assert_eq!(rows.len(), 18);
    assert_eq!(rows[17][1], (T0 + 17 * 3600).to_string());
    for row in &rows {
        assert_eq!(row[3], "16");
        assert!(f.path(&format!("maps/{}", row[2])).is_file());
    }
}

#[test]
fn empty_data_gives_absent_cells() {
    let f = Fixture::new(0.0, 0.0);
    f.model("model.json");
    f.write("empty.csv", "sensor_id,t_seconds,x_m,y_m,value_ugm3\n");
    let out = f.run(&[
        "map",
        "--data",
        "empty.csv",
        "--model",
        "model.json",
        "--method",
        "ok",
        "--radius",
        "500",
        "--x-min",
        "0",
        "--x-max",
        "1000",
        "--y-min",
        "0",
        "--y-max",
        "1000",
        "--cell",
        "250",
        "--t-start",
        "0",
        "--t-end",
        "3600",
        "--t-step",
        "1800",
        "--out-dir",
        "maps",
    ]);
    ok(&out);
    assert!(stderr(&out).contains("WARN"));
    for slice in 0..3 {
        let cells = rows(&f.read(&format!("maps/slice_{slice:04}.csv")));
        assert_eq!(cells.len(), 16);
        assert!(cells.iter().all(|c| c[2].is_empty() && c[3].is_empty()));
    }
}

#[test]
fn oversized_grid_is_rejected() {
    let f = Fixture::new(0.0, 0.0);
    f.model("model.json");
    f.write("empty.csv", "sensor_id,t_seconds,x_m,y_m,value_ugm3\n");
    let out = f.run(&[
        "map",
        "--data",
        "empty.csv",
        "--model",
        "model.json",
        "--method",
        "ok",
        "--x-min",
        "0",
        "--x-max",
        "1000",
        "--y-min",
        "0",
        "--y-max",
        "1000",
        "--cell",
        "10",
        "--t-start",
        "0",
        "--t-end",
        "0",
        "--t-step",
        "1",
        "--cell-cap",
        "9999",
        "--out-dir",
        "maps",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cap"));
}

#[test]
fn crossval_report_has_one_row_per_method_and_fraction() {
    let f = Fixture::new(3.0, 1.0);
    ingest_and_calibrate(&f);
    ok(&f.run(&[
        "crossval",
        "--data",
        "cal.csv",
        "--reference",
        "reference.csv",
        "--methods",
        "ok,ked,idw",
        "--fractions",
        "0.5,0.9",
        "--umax",
        "7200",
        "--seed",
        "5",
        "--out",
        "cv.csv",
    ]));
    let text = f.read("cv.csv");
    assert!(text.lines().next().unwrap().ends_with("seed=5"));
    assert_eq!(header(&text), "method,scenario,fraction,bias,rmse,corr,n_cells_skipped");
    let rows = rows(&text);
    assert_eq!(rows.len(), 6);
    let methods: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["ok", "ked", "idw", "ok", "ked", "idw"]);
    assert!(rows
        .iter()
        .all(|r| r[1] == "random" && r[4].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn exit_codes() {
    let f = Fixture::new(0.0, 0.0);
    assert_eq!(f.run(&["--help"]).status.code(), Some(0));
    assert_eq!(f.run(&["--version"]).status.code(), Some(0));
    assert_eq!(f.run(&["predict", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        f.run(&["crossval", "--data", "x.csv", "--fractions", "2", "--out", "y"])
            .status
            .code(),
        Some(1)
    );
    let out = f.run(&["ingest", "--mobile", "missing.csv", "--out", "n.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: "));
    // a reference file is not a mobile file
    assert_eq!(
        f.run(&["ingest", "--mobile", "reference.csv", "--out", "n.csv"])
            .status
            .code(),
        Some(2)
    );
    f.write(
        "bad.json",
        r#"{"family":"spherical","sill":-1,"nugget":0,"range":1,"K":1}"#,
    );
    f.write("t.csv", "x,y,t\n0,0,0\n");
    let out = f.run(&["simulate", "--model", "bad.json", "--points", "t.csv", "--out", "s.csv"]);
    assert_ne!(out.status.code(), Some(0));
}
