use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn xccy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xccy")).args(args).env_remove("XCCY_THREADS").output().expect("binary runs")
}

fn run_in(dir: &Path, cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, config.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    xccy(&args)
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_config_simulates() {
    let out = TempDir::new().unwrap();
    let o = run_in(out.path(), "simulate", &fixture("minimal.toml"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&out.path().join("simulation.csv"));
    assert!(!rows.is_empty());
    assert!(out.path().join("manifest.json").exists());
}

#[test]
fn unknown_field_is_a_config_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(fixture("minimal.toml")).unwrap().replace("seed = 1", "seed = 1\nsed = 2");
    let cfg = write_config(&dir, "bad.toml", &text);
    let o = run_in(dir.path(), "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));
}

#[test]
fn wrong_type_and_dangling_reference_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let base = std::fs::read_to_string(fixture("minimal.toml")).unwrap();
    let cfg = write_config(&dir, "a.toml", &base.replace("paths = 3", "paths = \"three\""));
    let o = run_in(dir.path(), "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths"), "{}", stderr(&o));
    let text = format!("{base}\n[[checks.martingale]]\nkind = \"fx\"\ncurrency = \"GBP\"\n");
    let cfg = write_config(&dir, "b.toml", &text);
    let o = run_in(dir.path(), "verify", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checks.martingale[0].currency") && stderr(&o).contains("GBP"), "{}", stderr(&o));
    let o = run_in(dir.path(), "simulate", &dir.path().join("missing.toml"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn golden_fixture_is_byte_identical() {
    let out = TempDir::new().unwrap();
    let o = run_in(out.path(), "simulate", &fixture("golden.toml"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let got = std::fs::read(out.path().join("simulation.csv")).unwrap();
    let want = std::fs::read(fixture("golden_simulation.csv")).unwrap();
    assert!(got == want, "simulation.csv differs from the committed fixture");
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = fixture("reference.toml");
    let args = ["--paths", "2000", "--threads", "1"];
    assert_eq!(run_in(a.path(), "verify", &cfg, &args).status.code(), Some(0));
    let args = ["--paths", "2000", "--threads", "3"];
    assert_eq!(run_in(b.path(), "verify", &cfg, &args).status.code(), Some(0));
    for f in ["verify.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_output_and_is_recorded() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_in(a.path(), "simulate", &fixture("minimal.toml"), &[]);
    run_in(b.path(), "simulate", &fixture("minimal.toml"), &["--seed", "99"]);
    let sa = std::fs::read(a.path().join("simulation.csv")).unwrap();
    let sb = std::fs::read(b.path().join("simulation.csv")).unwrap();
    assert_ne!(sa, sb);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);
    let digest = m["files"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest, xccy_cli::output::sha256_hex(&sb));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    for x in [0.1, 1.0 / 3.0, -2.5e-17, 123456.789, 0.0] {
        let s = xccy_cli::output::num(x);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{s}");
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

/// Deterministic two-currency market with the given basis and vols.
fn flat_market(curve_vol: f64, basis: f64) -> String {
    format!(
        r#"
[market.driver]
dim = 3

[[market.currencies]]
name = "USD"
curve = {{ flat = 0.03 }}
vol = [{{ kind = "constant", loading = [{curve_vol}, 0.0, 0.0] }}]

[[market.currencies]]
name = "EUR"
curve = {{ flat = 0.02 }}
vol = [{{ kind = "constant", loading = [{s3}, {curve_vol}, 0.0] }}]

[[market.basis]]
currency = "EUR"
curve = {{ flat = {basis} }}

[[market.fx]]
currency = "EUR"
spot = 1.1
vol = [0.0, 0.0, 0.0]
"#,
        s3 = 0.3 * curve_vol
    )
}

fn price_rows(text: &str, extra: &[&str]) -> Vec<Vec<String>> {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "price.toml", text);
    let o = run_in(dir.path(), "price", &cfg, extra);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    read_csv(&dir.path().join("pricing.csv"))
}

fn f(x: &str) -> f64 {
    x.parse().unwrap()
}

#[test]
fn fixed_vs_fixed_swap_matches_discounting_oracle() {
    let text = flat_market(0.0, -0.002)
        + r#"
[simulation]
horizon = 2.0
dt = 0.25
paths = 8
seed = 3

[[instruments.swap]]
id = "fxd-fxd"
collateral = "USD"
direction = 1.0
[instruments.swap.domestic]
currency = "USD"
start = 0.0
end = 2.0
period = 0.5
notional = 100.0
spread = 0.03
[instruments.swap.foreign]
currency = "EUR"
schedule = [0.0, 1.0, 2.0]
notional = 90.0
spread = 0.025

[[instruments.zcb]]
id = "ois-2y"
case = "k0k0"
maturity = 2.0
"#;
    let rows = price_rows(&text, &[]);
    assert_eq!(rows[0][0], "ois-2y");
    assert!((f(&rows[0][2]) - (-0.06f64).exp()).abs() < 1e-15);
    // USD collateral: USD flows discount at 3%, EUR flows at 2% + 0.2% basis.
    let usd = |t: f64| (-0.03 * t).exp();
    let eur = |t: f64| (-0.022 * t).exp();
    let dom = 100.0 * (usd(2.0) - 1.0 + (1..=4).map(|i| 0.5 * 0.03 * usd(0.5 * i as f64)).sum::<f64>());
    let fgn = 90.0 * (eur(2.0) - 1.0 + 0.025 * (eur(1.0) + eur(2.0)));
    let oracle = dom - 1.1 * fgn;
    let r = &rows[1];
    assert_eq!(r[0], "fxd-fxd");
    assert!((f(&r[2]) - oracle).abs() <= 1e-12 * oracle.abs(), "{} vs {oracle}", r[2]);
    assert!((f(&r[4]) - dom).abs() <= 1e-12 * dom.abs());
    assert!((f(&r[5]) - fgn).abs() <= 1e-12 * fgn.abs());
    assert_eq!(f(&r[3]), 0.0);
}

#[test]
fn fair_spread_on_cip_neutral_market_is_zero_within_three_se() {
    let text = flat_market(0.01, 0.0)
        + r#"
[simulation]
horizon = 3.0
dt = 0.020833333333333332
paths = 4000
seed = 17

[[instruments.swap]]
id = "ccs"
collateral = "USD"
route = "monte_carlo"
fair_spread = "foreign"
[instruments.swap.domestic]
currency = "USD"
start = 0.0
end = 3.0
period = 0.25
notional = 1.1
index = "compounded"
[instruments.swap.foreign]
currency = "EUR"
start = 0.0
end = 3.0
period = 0.25
notional = 1.0
index = "compounded"
"#;
    let rows = price_rows(&text, &[]);
    let fs = rows.iter().find(|r| r[0] == "ccs:fair_spread").unwrap();
    let (s, se) = (f(&fs[2]), f(&fs[3]));
    assert!(se > 0.0 && s.abs() <= 3.0 * se, "spread {s} se {se}");
}

fn zero_vol_reference() -> String {
    let text = std::fs::read_to_string(fixture("reference.toml")).unwrap();
    let mut out = String::new();
    for line in text.lines() {
        // Zero every volatility loading and the FX vol.
        if line.starts_with("vol = ") {
            let zeroed: String = line
                .split(',')
                .map(|p| {
                    let mut p = p.to_string();
                    for c in ["0.010", "0.002", "0.008", "0.003", "0.02", "-0.01", "0.08"] {
                        p = p.replacen(c, "0.0", 1);
                    }
                    p
                })
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&zeroed);
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

#[test]
fn zero_vol_market_verifies_with_z_zero() {
    let dir = TempDir::new().unwrap();
    let text = zero_vol_reference();
    assert!(!text.contains("0.08"));
    let cfg = write_config(&dir, "zero.toml", &text);
    let o = run_in(dir.path(), "verify", &cfg, &["--paths", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("verify.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| f(&r[5]) == 0.0 && r[6] == "true"));
}

#[test]
fn reference_market_verifies() {
    let out = TempDir::new().unwrap();
    let o = run_in(out.path(), "verify", &fixture("reference.toml"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stderr(&o), String::from_utf8_lossy(&o.stdout));
}

#[test]
fn corrupted_drift_fails_verification() {
    let out = TempDir::new().unwrap();
    let o = run_in(out.path(), "verify", &fixture("reference.toml"), &["--drift-scale", "30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let rows = read_csv(&out.path().join("verify.csv"));
    assert!(rows.iter().any(|r| f(&r[5]).abs() > 5.0));
}

#[test]
fn drift_scale_flag_is_hidden_from_help() {
    let o = xccy(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8_lossy(&o.stdout);
    assert!(help.contains("--threads") && !help.contains("drift-scale"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let out = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_xccy"))
        .args(["simulate", fixture("golden.toml").to_str().unwrap(), "--out-dir", out.path().to_str().unwrap()])
        .env("XCCY_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.path().join("simulation.csv")).unwrap(), std::fs::read(fixture("golden_simulation.csv")).unwrap());
    let bad = Command::new(env!("CARGO_BIN_EXE_xccy"))
        .args(["simulate", fixture("golden.toml").to_str().unwrap(), "--out-dir", out.path().to_str().unwrap()])
        .env("XCCY_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn resetting_swap_needs_the_monte_carlo_route() {
    let text = flat_market(0.0, -0.002)
        + r#"
[simulation]
horizon = 1.0
dt = 0.25
paths = 4
seed = 3

[[instruments.swap]]
id = "mtm"
collateral = "USD"
[instruments.swap.domestic]
currency = "USD"
schedule = [0.0, 0.5, 1.0]
notional = 1.1
reset = true
[instruments.swap.foreign]
currency = "EUR"
schedule = [0.0, 0.5, 1.0]
notional = 1.0
"#;
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "mtm.toml", &text);
    let o = run_in(dir.path(), "price", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("instruments.swap[0]"), "{}", stderr(&o));
    let cfg = write_config(&dir, "mtm2.toml", &text.replace("collateral = \"USD\"", "collateral = \"USD\"\nroute = \"monte_carlo\""));
    let o = run_in(dir.path(), "price", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn index_checks_observe_their_period_start_and_fixing() {
    let dir = TempDir::new().unwrap();
    // Only the fixing-to-payment window is observed; the period start 1.25
    // and the fixing 1.5 are left out on purpose.
    let text = std::fs::read_to_string(fixture("reference.toml")).unwrap().replace("observe = [0.5, 1.0, 1.25, 1.5, 1.75]", "observe = [1.75]");
    assert!(text.contains("observe = [1.75]"));
    let cfg = write_config(&dir, "sparse.toml", &text);
    let o = run_in(dir.path(), "verify", &cfg, &["--paths", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("verify.csv"));
    assert!(rows.iter().any(|r| r[0].starts_with("index_forward") && f(&r[1]) == 1.25));
}
