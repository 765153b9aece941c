use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use rblab::generate::generate_original;
use rblab::io::{certificate_from_json, read_instance, write_instance};
use rblab::satenc::{dpll_sat, read_dimacs};
use rblab::solver::{enumerate_oracle, solve};
use rblab::{Mode, RBParams};

fn rblab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rblab"))
        .args(args)
        .current_dir(dir)
        .env_remove("RBLAB_NODE_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const MODEL: [&str; 4] = ["--n", "--alpha", "--k", "--p"];

#[test]
fn help_mentions_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let global = ["--config", "--jobs", "--format", "--help"];
    let per_command: &[(&str, &[&str])] = &[
        ("gen", &["--r", "--seed", "--variant", "--out"]),
        ("solve", &["--in", "--mode", "--out"]),
        ("count", &["--in", "--out"]),
        ("flip", &["--in", "--direction", "--u", "--out", "--cert"]),
        ("near-miss", &["--in", "--u", "--count"]),
        ("sweep", &["--r-values", "--from", "--to", "--steps", "--trials", "--seed", "--out"]),
        ("flip-exp", &["--direction", "--trials", "--seed", "--out"]),
        ("coverage-exp", &["--r", "--trials", "--seed", "--out"]),
        ("moments", &["--r", "--ideal", "--quantity", "--out"]),
        ("check-params", &["--out"]),
        ("encode", &["--in", "--out", "--clause-budget"]),
    ];
    let top = stdout(&rblab(dir.path(), &["--help"]));
    for (name, flags) in per_command {
        assert!(top.contains(name), "top-level help lacks {name}");
        let out = rblab(dir.path(), &[name, "--help"]);
        assert_eq!(code(&out), 0);
        let help = stdout(&out);
        let model = !matches!(*name, "solve" | "count" | "flip" | "near-miss" | "encode");
        let expected = flags.iter().chain(&global).chain(if model { &MODEL[..] } else { &[] });
        for flag in expected {
            assert!(
                help.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
                    .any(|w| w == *flag || w.starts_with(&format!("{flag}="))),
                "{name} --help does not mention {flag}:\n{help}"
            );
        }
    }
}

#[test]
fn gen_writes_a_valid_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = rblab(dir.path(), &["gen", "--n", "8", "--alpha", "1", "--k", "2", "--p", "0.5", "--r", "1.4427", "--seed", "7", "--out", "i.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 1);
    let inst = read_instance(&dir.path().join("i.json")).unwrap();
    assert_eq!((inst.params().d(), inst.params().m(), inst.params().t()), (8, 24, 32));
    let expected = generate_original(&RBParams::derive(8, 1.0, 2, 0.5, 1.4427, 7).unwrap()).unwrap();
    assert_eq!(inst, expected);
}

#[test]
fn count_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..8u64 {
        let params = RBParams::derive(6, 1.0, 2, 0.5, 1.2, seed).unwrap();
        let inst = generate_original(&params).unwrap();
        write_instance(&dir.path().join("i.json"), &inst).unwrap();
        let expected = enumerate_oracle(inst.csp()).unwrap().count.unwrap();
        for args in [&["solve", "--in", "i.json", "--mode", "count"][..], &["count", "--in", "i.json"][..]] {
            let out = rblab(dir.path(), args);
            assert_eq!(code(&out), 0);
            let line = stdout(&out);
            let count: u128 = line
                .split_whitespace()
                .find_map(|w| w.strip_prefix("count="))
                .unwrap()
                .parse()
                .unwrap();
            assert_eq!(count, expected, "seed {seed}: {line}");
        }
    }
}

#[test]
fn check_params_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let ok = rblab(dir.path(), &["check-params", "--n", "100", "--alpha", "3", "--k", "3", "--p", "0.5"]);
    assert_eq!(code(&ok), 0);
    let text = stdout(&ok);
    let rows: Vec<&str> = text.lines().filter(|l| l.split_whitespace().next().is_some_and(|w| w.parse::<u8>().is_ok())).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.contains("pass")));

    let bad = rblab(dir.path(), &["check-params", "--n", "100", "--alpha", "2", "--k", "3", "--p", "0.5"]);
    assert_eq!(code(&bad), 3);
    let failing: Vec<String> = stdout(&bad)
        .lines()
        .filter(|l| l.contains("FAIL"))
        .map(|l| l.split_whitespace().next().unwrap().to_owned())
        .collect();
    assert_eq!(failing, ["5"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rblab(dir.path(), &["gen", "--n", "8"])), 64);
    assert_eq!(code(&rblab(dir.path(), &["frobnicate"])), 64);
    assert_eq!(code(&rblab(dir.path(), &["solve", "--in", "missing.json"])), 64);
    let domain = rblab(dir.path(), &["gen", "--n", "8", "--alpha", "1", "--k", "2", "--p", "1.5", "--r", "1", "--out", "x.json"]);
    assert_eq!(code(&domain), 1);
    assert!(!dir.path().join("x.json").exists());

    rblab(dir.path(), &["gen", "--n", "8", "--alpha", "1", "--k", "2", "--p", "0.5", "--r", "1", "--out", "i.json"]);
    let budget = Command::new(env!("CARGO_BIN_EXE_rblab"))
        .args(["count", "--in", "i.json"])
        .current_dir(dir.path())
        .env("RBLAB_NODE_BUDGET", "5")
        .output()
        .unwrap();
    assert_eq!(code(&budget), 2);
    let tiny = rblab(dir.path(), &["encode", "--in", "i.json", "--out", "f.cnf", "--clause-budget", "10"]);
    assert_eq!(code(&tiny), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "n = 8\nalpha = 1\nk = 2\np = 0.5\nr = 1.0\nseed = 7\n").unwrap();
    let from_config = rblab(dir.path(), &["--config", "run.toml", "gen", "--r", "1.4427", "--out", "a.json"]);
    assert_eq!(code(&from_config), 0, "{}", String::from_utf8_lossy(&from_config.stderr));
    rblab(dir.path(), &["gen", "--n", "8", "--alpha", "1", "--k", "2", "--p", "0.5", "--r", "1.4427", "--seed", "7", "--out", "b.json"]);
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());

    fs::write(dir.path().join("bad.toml"), "n = 8\nradius = 2\n").unwrap();
    let bad = rblab(dir.path(), &["gen", "--config", "bad.toml", "--out", "c.json"]);
    assert_eq!(code(&bad), 64);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("radius"));
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |jobs: &str, out: &str, format: &str| {
        let o = rblab(
            dir.path(),
            &["--jobs", jobs, "--format", format, "sweep", "--n", "6", "--alpha", "1", "--k", "2", "--p", "0.5", "--steps", "4", "--trials", "30", "--seed", "3", "--out", out],
        );
        assert_eq!(code(&o), 0);
        stdout(&o)
    };
    let a = sweep("1", "a.json", "json");
    let b = sweep("3", "b.json", "json");
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
    sweep("2", "c.csv", "csv");
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(csv.starts_with("r,n,d,trials,sat_count,pr_sat"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("c.summary.json").exists());

    let flips = |out: &str| {
        let o = rblab(
            dir.path(),
            &["flip-exp", "--n", "8", "--alpha", "1", "--k", "2", "--p", "0.5", "--direction", "unsat-to-sat", "--trials", "3", "--seed", "5", "--out", out],
        );
        assert_eq!(code(&o), 0);
        stdout(&o)
    };
    assert_eq!(flips("f1.json"), flips("f2.json"));
    assert_eq!(fs::read(dir.path().join("f1.json")).unwrap(), fs::read(dir.path().join("f2.json")).unwrap());
}

#[test]
fn flip_writes_a_replayable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let seed = (0..500u64)
        .find(|&s| {
            let inst = generate_original(&RBParams::derive(8, 1.0, 2, 0.5, 1.4427, s).unwrap()).unwrap();
            solve(inst.csp(), Mode::CountAll).unwrap().count == Some(1)
        })
        .expect("a unique-solution instance among 500 seeds");
    let seed = seed.to_string();
    rblab(dir.path(), &["gen", "--n", "8", "--alpha", "1", "--k", "2", "--p", "0.5", "--r", "1.4427", "--seed", &seed, "--out", "i.json"]);
    let out = rblab(dir.path(), &["flip", "--in", "i.json", "--direction", "sat-to-unsat", "--out", "j.json", "--cert", "c.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let before = read_instance(&dir.path().join("i.json")).unwrap();
    let after = read_instance(&dir.path().join("j.json")).unwrap();
    let text = fs::read_to_string(dir.path().join("c.json")).unwrap();
    let cert = certificate_from_json(&text, before.params().m(), 8, 8).unwrap();
    assert_eq!(&cert.verify(before.csp()).unwrap(), after.csp());
    assert!(!after.csp().is_solution(&cert.witness));

}

#[test]
fn encode_round_trips_through_dimacs() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5u64 {
        let inst = generate_original(&RBParams::derive(5, 0.9, 2, 0.5, 1.3, seed).unwrap()).unwrap();
        write_instance(&dir.path().join("i.json"), &inst).unwrap();
        let out = rblab(dir.path(), &["encode", "--in", "i.json", "--out", "f.cnf"]);
        assert_eq!(code(&out), 0);
        let file = fs::File::open(dir.path().join("f.cnf")).unwrap();
        let cnf = read_dimacs(BufReader::new(file)).unwrap();
        let sat = solve(inst.csp(), Mode::Decide).unwrap().is_sat();
        assert_eq!(dpll_sat(&cnf).unwrap().is_sat(), sat, "seed {seed}");
    }
}

#[test]
fn moments_quantity_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["moments", "--n", "12", "--alpha", "1", "--k", "2", "--p", "0.5", "--r", "1.4427", "--ideal"];
    let e_x: f64 = stdout(&rblab(dir.path(), &[&args[..], &["--quantity", "e_x"]].concat())).trim().parse().unwrap();
    // ideal point: E[X] = d^n (1-p)^m with real-valued d = 12 and m = r n ln d
    let m = 1.4427 * 12.0 * 12f64.ln();
    assert!((e_x - (12.0 * 12f64.ln() + m * 0.5f64.ln()).exp()).abs() < 1e-9 * e_x);
    let unknown = rblab(dir.path(), &[&args[..], &["--quantity", "nonsense"]].concat());
    assert_eq!(code(&unknown), 64);
}
