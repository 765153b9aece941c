use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rblab::feasibility;
use rblab::flip::{flip_sat_to_unsat, flip_unsat_to_sat};
use rblab::generate::{generate_original, generate_symmetric};
use rblab::harness::{self, HarnessConfig, ModelSetup};
use rblab::io::{assignment_to_json, certificate_to_json, read_instance, write_instance};
use rblab::moments::{PairLaw, ModelPoint as Point};
use rblab::satenc;
use rblab::solver::{count_near_misses, find_near_miss_with, solve_with};
use rblab::{Error, Instance, Mode, MomentReport, RBParams, SolveResult, SolverConfig, Status, Variant};
use serde::Serialize;
use serde_json::json;

use crate::{Cli, Command, DirectionArg, Failure, Format, Model, SolveMode, VariantArg};

type Outcome = Result<String, Failure>;

impl Model {
    fn setup(&self) -> Result<ModelSetup, Error> {
        ModelSetup::new(self.n, self.alpha, self.k, self.p)
    }
}

fn check_input(flag: &str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag} {}: no such file", path.display())))
    }
}

fn check_output(flag: &str, path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        return Err(Failure::Usage(format!("--{flag} {}: is a directory", path.display())));
    }
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if parent.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag} {}: directory {} does not exist", path.display(), parent.display())))
    }
}

fn check_optional_output(flag: &str, path: &Option<PathBuf>) -> Result<(), Failure> {
    path.as_deref().map_or(Ok(()), |p| check_output(flag, p))
}

/// Every path flag, checked before anything is computed.
fn validate_paths(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen { out, .. } => check_output("out", out),
        Command::Solve { input, out, .. } | Command::Count { input, out } => {
            check_input("in", input)?;
            check_optional_output("out", out)
        }
        Command::Flip { input, out, cert, .. } => {
            check_input("in", input)?;
            check_output("out", out)?;
            check_output("cert", cert)
        }
        Command::NearMiss { input, .. } => check_input("in", input),
        Command::Encode { input, out, .. } => {
            check_input("in", input)?;
            check_output("out", out)
        }
        Command::Sweep { out, .. }
        | Command::FlipExp { out, .. }
        | Command::CoverageExp { out, .. }
        | Command::Moments { out, .. }
        | Command::CheckParams { out, .. } => check_optional_output("out", out),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text)?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Writes `records` in the chosen format. CSV goes to `out` with the
/// summary in a `.summary.json` file beside it; JSON holds both.
fn write_records<T: Serialize, S: Serialize>(out: &Path, format: Format, records: &[T], summary: &S) -> Result<(), Error> {
    match format {
        Format::Csv => {
            let mut sink = BufWriter::new(File::create(out)?);
            harness::write_csv(&mut sink, records)?;
            sink.flush()?;
            write_text(&out.with_extension("summary.json"), &pretty(summary))
        }
        Format::Json => write_text(out, &pretty(&json!({ "summary": summary, "records": records }))),
    }
}

fn solver_config() -> Result<SolverConfig, Error> {
    SolverConfig::from_env()
}

fn harness_config(cli: &Cli) -> Result<HarnessConfig, Error> {
    Ok(HarnessConfig { jobs: cli.jobs as usize, solver: solver_config()?, ..HarnessConfig::default() })
}

#[derive(Serialize)]
struct SolveRow {
    status: &'static str,
    count: Option<String>,
    witness: Option<String>,
    nodes_expanded: u64,
}

#[derive(Serialize)]
struct ConditionRow<'a> {
    condition: u8,
    expression: &'a str,
    value: f64,
    pass: bool,
    slack: f64,
}

#[derive(Serialize)]
struct QuantityRow {
    quantity: String,
    value: String,
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Sat => "sat",
        Status::Unsat => "unsat",
    }
}

fn result_json(res: &SolveResult) -> serde_json::Value {
    json!({
        "status": status_name(res.status),
        "count": res.count.map(|c| c.to_string()),
        "witness": res.witness.as_ref().map(assignment_to_json),
        "nodes_expanded": res.nodes_expanded,
    })
}

fn result_line(res: &SolveResult) -> String {
    let mut line = status_name(res.status).to_owned();
    if let Some(c) = res.count {
        line += &format!(" count={c}");
    }
    if let Some(w) = &res.witness {
        line += &format!(" witness={}", assignment_to_json(w));
    }
    line + &format!(" nodes={}", res.nodes_expanded)
}

fn solve_file(input: &Path, mode: Mode, out: &Option<PathBuf>, format: Format) -> Outcome {
    let inst = read_instance(input)?;
    let res = solve_with(inst.csp(), mode, &solver_config()?)?;
    if let Some(out) = out {
        let body = match format {
            Format::Json => pretty(&result_json(&res)),
            Format::Csv => {
                let row = SolveRow {
                    status: status_name(res.status),
                    count: res.count.map(|c| c.to_string()),
                    witness: res.witness.as_ref().map(|w| w.values().iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(" ")),
                    nodes_expanded: res.nodes_expanded,
                };
                let mut buf = Vec::new();
                harness::write_csv(&mut buf, &[row])?;
                String::from_utf8(buf).expect("csv is utf-8")
            }
        };
        write_text(out, &body)?;
    }
    Ok(result_line(&res))
}

fn flip(input: &Path, direction: DirectionArg, u: Option<usize>, out: &Path, cert_path: &Path) -> Outcome {
    let inst = read_instance(input)?;
    let config = solver_config()?;
    let (after, cert) = match direction {
        DirectionArg::SatToUnsat => {
            if u.is_some() {
                return Err(Failure::Usage("--u applies to unsat-to-sat only".into()));
            }
            let res = solve_with(inst.csp(), Mode::CheckUnique, &config)?;
            let Some(solution) = res.witness else {
                return Err(Error::FlipPreconditionViolated("the instance is unsatisfiable".into()).into());
            };
            if res.count != Some(1) {
                return Err(Error::FlipPreconditionViolated("the instance has more than one solution".into()).into());
            }
            flip_sat_to_unsat(&inst, &solution)?
        }
        DirectionArg::UnsatToSat => {
            if solve_with(inst.csp(), Mode::Decide, &config)?.is_sat() {
                return Err(Error::FlipPreconditionViolated("the instance is satisfiable".into()).into());
            }
            repair(&inst, u, &config)?
        }
    };
    let post = solve_with(after.csp(), Mode::Decide, &config)?;
    write_instance(out, &after)?;
    write_text(cert_path, &(certificate_to_json(&cert) + "\n"))?;
    Ok(format!(
        "flip u={} a=({},{}) b=({},{}) after={}",
        cert.u + 1,
        cert.a[0] + 1,
        cert.a[1] + 1,
        cert.b[0] + 1,
        cert.b[1] + 1,
        if post.is_sat() { "sat" } else { "unsat" }
    ))
}

/// Near-miss repair at `u` (1-based), or at the first constraint that admits one.
fn repair(inst: &Instance, u: Option<usize>, config: &SolverConfig) -> Result<(Instance, rblab::FlipCertificate), Failure> {
    let m = inst.constraints().len();
    let candidates: Vec<usize> = match u {
        Some(0) => return Err(Failure::Usage("--u is 1-based".into())),
        Some(u) if u > m => return Err(Error::Domain { param: "u".into(), reason: format!("{u} outside 1..={m}") }.into()),
        Some(u) => vec![u - 1],
        None => (0..m).collect(),
    };
    for u in candidates {
        let Some(nm) = find_near_miss_with(inst.csp(), u, config)? else { continue };
        match flip_unsat_to_sat(inst, u, &nm) {
            Ok(done) => return Ok(done),
            Err(Error::NoFlipPairFound) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::NoFlipPairFound.into())
}

fn near_miss(input: &Path, u: usize, count: bool) -> Outcome {
    let inst = read_instance(input)?;
    let m = inst.constraints().len();
    if u == 0 || u > m {
        return Err(Error::Domain { param: "u".into(), reason: format!("{u} outside 1..={m}") }.into());
    }
    let config = solver_config()?;
    if count {
        return Ok(format!("near-misses u={u} count={}", count_near_misses(inst.csp(), u - 1, &config)?));
    }
    Ok(match find_near_miss_with(inst.csp(), u - 1, &config)? {
        Some(a) => format!("near-miss u={u} found={}", assignment_to_json(&a)),
        None => format!("near-miss u={u} none"),
    })
}

fn sweep(cli: &Cli, model: &Model, r_values: &Option<Vec<f64>>, range: (f64, f64, usize), trials: u64, seed: u64, out: &Option<PathBuf>) -> Outcome {
    let setup = model.setup()?;
    let r_cr = rblab::moments::r_critical(model.p)?;
    let rs = match r_values {
        Some(rs) => rs.clone(),
        None => harness::linspace(range.0 * r_cr, range.1 * r_cr, range.2),
    };
    let records = harness::sweep(&setup, &rs, trials, seed, &harness_config(cli)?)?;
    let crossing = harness::crossing(&records, 0.5);
    let violated = setup.violated_conditions();
    let summary = json!({
        "setup": setup,
        "seed": seed,
        "trials": trials,
        "r_critical": r_cr,
        "crossing_r": crossing,
        "violated_conditions": violated,
    });
    if let Some(out) = out {
        write_records(out, cli.format, &records, &summary)?;
    }
    Ok(format!(
        "sweep points={} crossing_r={} r_critical={r_cr} violated=[{violated}]",
        records.len(),
        crossing.map_or("none".to_owned(), |c| c.to_string())
    ))
}

fn flip_exp(cli: &Cli, model: &Model, direction: DirectionArg, trials: usize, seed: u64, out: &Option<PathBuf>) -> Outcome {
    let setup = model.setup()?;
    let cfg = harness_config(cli)?;
    let (report, _) = match direction {
        DirectionArg::SatToUnsat => harness::flip_experiment_sat_to_unsat(&setup, trials, seed, &cfg)?,
        DirectionArg::UnsatToSat => harness::flip_experiment_unsat_to_sat(&setup, trials, seed, &cfg)?,
    };
    let summary = json!({ "setup": setup, "seed": seed, "direction": direction_name(direction) });
    if let Some(out) = out {
        write_records(out, cli.format, std::slice::from_ref(&report), &summary)?;
    }
    let outcome = match direction {
        DirectionArg::SatToUnsat => format!("unsat_after={}", report.unsat_after_flip.unwrap_or(0)),
        DirectionArg::UnsatToSat => format!("sat_after={}", report.sat_after_flip.unwrap_or(0)),
    };
    Ok(format!(
        "flip-exp {} flips={} killed={} {outcome} preserved={} attempted={}",
        direction_name(direction),
        report.flip_found,
        report.kill_confirmed,
        report.parameters_preserved,
        report.attempted
    ))
}

fn direction_name(d: DirectionArg) -> &'static str {
    match d {
        DirectionArg::SatToUnsat => "sat_to_unsat",
        DirectionArg::UnsatToSat => "unsat_to_sat",
    }
}

fn coverage(cli: &Cli, model: &Model, r: f64, trials: usize, seed: u64, out: &Option<PathBuf>) -> Outcome {
    let setup = model.setup()?;
    let report = harness::coverage_experiment(&setup, r, trials, seed, &harness_config(cli)?)?;
    let summary = json!({ "setup": setup, "seed": seed });
    if let Some(out) = out {
        write_records(out, cli.format, std::slice::from_ref(&report), &summary)?;
    }
    Ok(format!(
        "coverage-exp unsat={} fully_covered={} fraction={} union_bound={}",
        report.unsat_instances, report.fully_covered, report.covered_fraction, report.union_bound
    ))
}

fn moments(cli: &Cli, model: &Model, r: f64, ideal: bool, quantity: &Option<String>, out: &Option<PathBuf>) -> Outcome {
    let report = if ideal {
        MomentReport::compute(&Point::ideal(model.n, model.alpha, model.k, model.p, r), PairLaw::Independent)?
    } else {
        MomentReport::for_params(&RBParams::derive(model.n, model.alpha, model.k, model.p, r, 0)?)?
    };
    if let Some(out) = out {
        match cli.format {
            Format::Json => write_text(out, &pretty(&report))?,
            Format::Csv => {
                let mut sink = BufWriter::new(File::create(out).map_err(Error::from)?);
                harness::write_csv(&mut sink, &quantity_rows(&report))?;
                sink.flush().map_err(Error::from)?;
            }
        }
    }
    match quantity {
        Some(name) => report
            .quantity(name)
            .map(|v| v.to_string())
            .ok_or_else(|| Failure::Usage(format!("--quantity {name}: no such quantity"))),
        None => Ok(serde_json::to_string(&report).expect("report serializes")),
    }
}

/// The report as `(dotted name, value)` rows; lists are space separated.
fn quantity_rows(report: &MomentReport) -> Vec<QuantityRow> {
    fn walk(prefix: &str, v: &serde_json::Value, rows: &mut Vec<QuantityRow>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, rows);
                }
            }
            serde_json::Value::Array(items) => {
                let value = items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
                rows.push(QuantityRow { quantity: prefix.to_owned(), value });
            }
            other => rows.push(QuantityRow { quantity: prefix.to_owned(), value: other.to_string() }),
        }
    }
    let mut rows = Vec::new();
    walk("", &serde_json::to_value(report).expect("report serializes"), &mut rows);
    rows
}

fn check_params(cli: &Cli, model: &Model, out: &Option<PathBuf>) -> Outcome {
    let report = feasibility::check(model.n, model.alpha, model.k, model.p)?;
    if let Some(out) = out {
        match cli.format {
            Format::Json => write_text(out, &pretty(&report))?,
            Format::Csv => {
                let rows: Vec<_> = report
                    .conditions
                    .iter()
                    .map(|c| ConditionRow { condition: c.id, expression: &c.expression, value: c.value, pass: c.pass, slack: c.slack })
                    .collect();
                let mut sink = BufWriter::new(File::create(out).map_err(Error::from)?);
                harness::write_csv(&mut sink, &rows)?;
                sink.flush().map_err(Error::from)?;
            }
        }
    }
    let mut table = format!("{:<10} {:>14} {:<8} {:>14}\n", "condition", "value", "verdict", "slack");
    for c in &report.conditions {
        table += &format!(
            "{:<10} {:>14.6} {:<8} {:>14.6}\n",
            c.id,
            c.value,
            if c.pass { "pass" } else { "FAIL" },
            c.slack
        );
    }
    if report.pass {
        table += "feasible";
        Ok(table)
    } else {
        let failed: Vec<String> = report.failed().iter().map(u8::to_string).collect();
        table += &format!("infeasible: conditions {}", failed.join(" "));
        Err(Failure::Infeasible(table))
    }
}

fn encode(input: &Path, out: &Path, clause_budget: u64) -> Outcome {
    let inst = read_instance(input)?;
    let cnf = satenc::encode(inst.csp(), clause_budget)?;
    let mut sink = BufWriter::new(File::create(out).map_err(Error::from)?);
    satenc::write_dimacs(&cnf, &mut sink)?;
    sink.flush().map_err(Error::from)?;
    Ok(format!("encode vars={} clauses={} -> {}", cnf.num_vars, cnf.clauses.len(), out.display()))
}

pub fn run(cli: &Cli) -> Outcome {
    validate_paths(&cli.command)?;
    match &cli.command {
        Command::Gen { model, r, seed, variant, out } => {
            let params = RBParams::derive(model.n, model.alpha, model.k, model.p, *r, *seed)?;
            let inst = match variant {
                VariantArg::Original => generate_original(&params)?,
                VariantArg::Symmetric => generate_symmetric(&params)?.1,
            };
            write_instance(out, &inst)?;
            let variant = match inst.variant() {
                Variant::Original => "original",
                Variant::Symmetric => "symmetric",
            };
            Ok(format!(
                "gen n={} d={} k={} m={} t={} variant={variant} -> {}",
                params.n(),
                params.d(),
                params.k(),
                params.m(),
                params.t(),
                out.display()
            ))
        }
        Command::Solve { input, mode, out } => {
            let mode = match mode {
                SolveMode::Decide => Mode::Decide,
                SolveMode::Count => Mode::CountAll,
                SolveMode::Unique => Mode::CheckUnique,
            };
            solve_file(input, mode, out, cli.format)
        }
        Command::Count { input, out } => solve_file(input, Mode::CountAll, out, cli.format),
        Command::Flip { input, direction, u, out, cert } => flip(input, *direction, *u, out, cert),
        Command::NearMiss { input, u, count } => near_miss(input, *u, *count),
        Command::Sweep { model, r_values, from, to, steps, trials, seed, out } => {
            sweep(cli, model, r_values, (*from, *to, *steps), *trials, *seed, out)
        }
        Command::FlipExp { model, direction, trials, seed, out } => flip_exp(cli, model, *direction, *trials, *seed, out),
        Command::CoverageExp { model, r, trials, seed, out } => coverage(cli, model, *r, *trials, *seed, out),
        Command::Moments { model, r, ideal, quantity, out } => moments(cli, model, *r, *ideal, quantity, out),
        Command::CheckParams { model, out } => check_params(cli, model, out),
        Command::Encode { input, out, clause_budget } => encode(input, out, *clause_budget),
    }
}
