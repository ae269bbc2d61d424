#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const T0: u64 = 1_717_218_000; // 2024-06-01T05:00:00Z

pub fn iso(t: u64) -> String {
    let s = t - T0 + 5 * 3600;
    format!("2024-06-01T{:02}:{:02}:{:02}Z", s / 3600, (s / 60) % 60, s % 60)
}

pub fn reference_value(t: u64) -> f64 {
    50.0 + 10.0 * ((t - T0) as f64 / 5000.0).sin()
}

/// Deterministic noise in [-0.5, 0.5).
pub fn jitter(i: u64) -> f64 {
    (i.wrapping_mul(2_654_435_761) % 1000) as f64 / 1000.0 - 0.5
}

/// (additive, multiplicative) bias per sensor.
pub fn sensor_bias(s: usize) -> (f64, f64) {
    (2.0 * s as f64 - 3.0, 0.8 + 0.1 * s as f64)
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// Four sensors sampling every 600 s for ten hours, the reference on the
    /// same instants. `amp` scales a smooth spatial pattern on top of the
    /// reference and `noise` a deterministic perturbation.
    pub fn new(amp: f64, noise: f64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut reference = String::from("timestamp_iso8601,value_ugm3\n");
        for i in 0..=60 {
            let t = T0 + i * 600;
            reference += &format!("{},{}\n", iso(t), reference_value(t));
        }
        let mut mobile = String::from("sensor_id,timestamp_iso8601,lat,lon,value,unit\n");
        for s in 0..4 {
            let (a, h) = sensor_bias(s);
            for i in 0..60u64 {
                let t = T0 + i * 600;
                let phase = i as f64 / 9.0 + s as f64 * 1.7;
                let lat = 47.37 + 0.02 * phase.sin();
                let lon = 8.54 + 0.03 * (phase * 0.8).cos();
                let truth = reference_value(t) + amp * (phase.sin() * 2.0).cos() + noise * jitter(i * 4 + s as u64);
                mobile += &format!("tram{s},{},{lat},{lon},{},ugm3\n", iso(t), a + h * truth);
            }
        }
        let f = Fixture { dir };
        std::fs::write(f.path("reference.csv"), reference).unwrap();
        std::fs::write(f.path("mobile.csv"), mobile).unwrap();
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    pub fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    pub fn write(&self, name: &str, text: &str) {
        std::fs::write(self.path(name), text).unwrap();
    }

    /// A spherical model file with K in m/s.
    pub fn model(&self, name: &str) {
        self.write(
            name,
            r#"{"family":"spherical","sill":4.0,"nugget":0.5,"range":3000.0,"K":0.5,"time_unit":"seconds"}"#,
        );
    }

    /// Runs the binary inside the fixture directory.
    pub fn run(&self, args: &[&str]) -> Output {
        run_in(self.dir.path(), args)
    }
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stkrige"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[track_caller]
pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Data rows of a table: comment lines and the header row removed.
pub fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

pub fn header(text: &str) -> &str {
    text.lines().find(|l| !l.starts_with('#')).unwrap()
}
