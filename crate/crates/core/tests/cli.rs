use std::path::Path;
use std::process::Command;

fn dynfleet(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dynfleet"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = dynfleet(dir, &["--seed", "3", "synth", "--stations", "4", "--hours", "48"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net = dir.join("network.json");
    let trips = dir.join("trips.csv");
    let (net, trips) = (net.to_str().unwrap(), trips.to_str().unwrap());

    assert!(dynfleet(dir, &["ingest", "--network", net, "--trips", trips]).status.success());
    let hours = std::fs::read_to_string(dir.join("hours.csv")).unwrap();
    assert_eq!(hours.lines().count(), 49);

    assert!(dynfleet(dir, &["routes", "--network", net]).status.success());
    let routes: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("routes.json")).unwrap()).unwrap();
    assert_eq!(routes.as_array().unwrap().len(), 11);

    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"families": ["normal", "neg_weibull"], "sigmas": [0, 1], "gammas": [20, 40],
            "alphas": [0, 0.2, 0.4], "n_hours": 3, "sizing_hours": 10}"#,
    )
    .unwrap();
    let config = config.to_str().unwrap();
    assert!(dynfleet(dir, &["--config", config, "fleet-size", "--network", net, "--trips", trips]).status.success());
    let sizes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fleet_sizes.json")).unwrap()).unwrap();
    assert_eq!(sizes.as_object().unwrap().len(), 2);

    let out = dynfleet(dir, &["--config", config, "--jobs", "2", "run", "--network", net, "--trips", trips]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2 * 3);
    assert!(dir.join("metadata.json").exists());

    let res = dir.join("results.csv");
    let out = dynfleet(dir, &["report", "--results", res.to_str().unwrap(), "--kind", "table_c,table_vi"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("table_c.csv").exists() && dir.join("table_vi.csv").exists());
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dynfleet(tmp.path(), &["routes", "--network", "/nonexistent/network.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dynfleet(tmp.path(), &["--jobs", "0", "synth"]);
    assert_eq!(out.status.code(), Some(2));
}
