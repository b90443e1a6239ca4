use std::fs;

use serde_json::Value;
use timelens::envelope::{centroid, energy, fwhm};
use timelens::harness::{execute, read_envelope_csv, simulate, simulation_artifacts, Command};
use timelens::scenario::parse_scenario;

const TIMEBIN: &str = "\
[input]
kind = time-bin
tau = 5 ps
delta_t = 15 ps
[topology]
kind = telescope
magnification = 20
max_dispersion = 1000 ps^2
pump_fwhm = 2.5 ps
";

fn value(v: &Value) -> f64 {
    v["value"].as_f64().expect("numeric field with unit")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn report_values_rederive_from_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let summary = execute(&Command::Simulate, TIMEBIN, Some(dir.path()), None).unwrap();
    assert!(summary.files.iter().all(|p| p.exists()));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for stage in report["stages"].as_array().unwrap() {
        let file = stage["file"].as_str().unwrap();
        let env = read_envelope_csv(&fs::read_to_string(dir.path().join(file)).unwrap()).unwrap();
        let m = &stage["metrics"];
        assert!(close(energy(&env), value(&m["energy"])), "{file} energy");
        assert!(close(fwhm(&env).unwrap(), value(&m["fwhm"])), "{file} fwhm");
        assert!(close(centroid(&env).unwrap(), value(&m["centroid"])), "{file} centroid");
    }
    let c = read_envelope_csv(&fs::read_to_string(dir.path().join("interference_constructive.csv")).unwrap()).unwrap();
    let vis = &report["visibility"];
    let (lo, hi) = (value(&vis["window_start"]), value(&vis["window_end"]));
    let g = *c.grid();
    let e: f64 = c
        .samples()
        .iter()
        .enumerate()
        .filter(|(k, _)| (lo..=hi).contains(&g.time(*k)))
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * g.dt();
    assert!((e - value(&vis["energy_constructive"])).abs() <= 1e-9 * e);
}

#[test]
fn every_report_number_carries_a_unit() {
    fn walk(v: &Value, path: &str) {
        match v {
            Value::Number(_) => panic!("bare number at {path}"),
            Value::Object(map) if map.contains_key("value") => {
                assert!(map["unit"].is_string(), "{path}");
                assert!(map["value"].is_number(), "{path}");
            }
            Value::Object(map) => map.iter().for_each(|(k, x)| walk(x, &format!("{path}.{k}"))),
            Value::Array(xs) => xs.iter().enumerate().for_each(|(i, x)| walk(x, &format!("{path}[{i}]"))),
            _ => {}
        }
    }
    let s = parse_scenario(&format!(
        "{TIMEBIN}[design]\nconfiguration = telescope\nt_i = 20 ps\nbandwidth = 1 rad/ps\nmagnification = 20\n"
    ))
    .unwrap();
    let sim = simulate(&s).unwrap();
    let arts = simulation_artifacts(&s, &sim).unwrap();
    let report: Value = serde_json::from_str(&arts.iter().find(|a| a.name == "report.json").unwrap().contents).unwrap();
    assert!(report.get("design").is_some());
    walk(&report, "");
}

#[test]
fn in_process_runs_are_identical() {
    let s = parse_scenario(TIMEBIN).unwrap();
    let a = simulation_artifacts(&s, &simulate(&s).unwrap()).unwrap();
    let b = simulation_artifacts(&s, &simulate(&s).unwrap()).unwrap();
    assert_eq!(a, b);
}
