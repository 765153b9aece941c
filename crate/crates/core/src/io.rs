//! JSON files for instances and flip certificates. Variables, values and
//! constraint indices are 1-based on disk and 0-based in memory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csp::{Assignment, Constraint, Instance, Value, Variant};
use crate::error::{Error, Result};
use crate::flip::{Direction, FlipCertificate};
use crate::params::RBParams;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    alpha: f64,
    k: usize,
    p: f64,
    r: f64,
    seed: u64,
    d: u32,
    m: usize,
    variant: Variant,
    constraints: Vec<ConstraintFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    scope: Vec<u64>,
    permitted: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    u: u64,
    a: [u64; 2],
    b: [u64; 2],
    direction: Direction,
    witness: Vec<u64>,
}

fn load_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Load { location: location.into(), message: message.into() }
}

fn syntax_err(e: serde_json::Error) -> Error {
    load_err(format!("line {}, column {}", e.line(), e.column()), e.to_string())
}

/// Converts a 1-based index to 0-based, checking `1..=limit`.
fn zero_based(v: u64, limit: u64, location: impl FnOnce() -> String, what: &str) -> Result<u64> {
    if v == 0 || v > limit {
        return Err(load_err(location(), format!("{what} {v} outside 1..={limit}")));
    }
    Ok(v - 1)
}

fn relocate(e: Error, prefix: &str) -> Error {
    match e {
        Error::Domain { param, reason } => load_err(format!("{prefix}{param}"), reason),
        other => other,
    }
}

pub fn instance_to_json(instance: &Instance) -> String {
    let p = instance.params();
    let file = InstanceFile {
        n: p.n(),
        alpha: p.alpha(),
        k: p.k(),
        p: p.p(),
        r: p.r(),
        seed: p.seed(),
        d: p.d(),
        m: p.m(),
        variant: instance.variant(),
        constraints: instance
            .constraints()
            .iter()
            .map(|c| ConstraintFile {
                scope: c.scope().iter().map(|&x| x as u64 + 1).collect(),
                permitted: c
                    .tuples()
                    .map(|t| t.into_iter().map(|v| u64::from(v) + 1).collect())
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

/// Parses and fully validates an instance: the parameters must reproduce
/// `d` and `m`, every scope and tuple must be in range, and permitted-set
/// sizes must match the variant.
pub fn instance_from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(syntax_err)?;
    let params = RBParams::derive(file.n, file.alpha, file.k, file.p, file.r, file.seed)
        .map_err(|e| relocate(e, ""))?;
    if params.d() != file.d {
        return Err(load_err("d", format!("parameters give d = {}, file says {}", params.d(), file.d)));
    }
    if params.m() != file.m {
        return Err(load_err("m", format!("parameters give m = {}, file says {}", params.m(), file.m)));
    }
    if file.constraints.len() != file.m {
        return Err(load_err(
            "constraints",
            format!("expected m = {} constraints, got {}", file.m, file.constraints.len()),
        ));
    }
    let (n, d, k) = (file.n as u64, u64::from(file.d), file.k);
    let mut constraints = Vec::with_capacity(file.m);
    for (i, c) in file.constraints.iter().enumerate() {
        if c.scope.len() != k {
            return Err(load_err(format!("constraints[{i}].scope"), format!("arity {} differs from k = {k}", c.scope.len())));
        }
        let scope = c
            .scope
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                zero_based(x, n, || format!("constraints[{i}].scope[{j}]"), "variable").map(|x| x as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tuples = Vec::with_capacity(c.permitted.len());
        for (j, t) in c.permitted.iter().enumerate() {
            if t.len() != k {
                return Err(load_err(format!("constraints[{i}].permitted[{j}]"), format!("tuple has arity {}, expected {k}", t.len())));
            }
            let tuple = t
                .iter()
                .map(|&v| {
                    zero_based(v, d, || format!("constraints[{i}].permitted[{j}]"), "value").map(|v| v as Value)
                })
                .collect::<Result<Vec<_>>>()?;
            tuples.push(tuple);
        }
        let prefix = format!("constraints[{i}].");
        constraints.push(Constraint::new(scope, file.d, tuples).map_err(|e| relocate(e, &prefix))?);
    }
    Instance::from_parts(params, file.variant, constraints).map_err(|e| relocate(e, ""))
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<()> {
    fs::write(path, instance_to_json(instance) + "\n")?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| load_err(path.display().to_string(), e.to_string()))?;
    instance_from_json(&text).map_err(|e| match e {
        Error::Load { location, message } => load_err(format!("{}: {location}", path.display()), message),
        other => other,
    })
}

pub fn certificate_to_json(cert: &FlipCertificate) -> String {
    let one = |t: [Value; 2]| [u64::from(t[0]) + 1, u64::from(t[1]) + 1];
    let file = CertificateFile {
        u: cert.u as u64 + 1,
        a: one(cert.a),
        b: one(cert.b),
        direction: cert.direction,
        witness: cert.witness.values().iter().map(|&v| u64::from(v) + 1).collect(),
    };
    serde_json::to_string_pretty(&file).expect("certificate serializes")
}

/// Parses a certificate for an instance with `m` constraints, `n`
/// variables and domain size `d`. Range checks only; replay with
/// [`FlipCertificate::verify`].
pub fn certificate_from_json(text: &str, m: usize, n: usize, d: u32) -> Result<FlipCertificate> {
    let file: CertificateFile = serde_json::from_str(text).map_err(syntax_err)?;
    let u = zero_based(file.u, m as u64, || "u".into(), "constraint")? as usize;
    let pair = |t: [u64; 2], name: &str| -> Result<[Value; 2]> {
        let first = zero_based(t[0], u64::from(d), || format!("{name}[0]"), "value")?;
        let second = zero_based(t[1], u64::from(d), || format!("{name}[1]"), "value")?;
        Ok([first as Value, second as Value])
    };
    let a = pair(file.a, "a")?;
    let b = pair(file.b, "b")?;
    if file.witness.len() != n {
        return Err(load_err("witness", format!("has {} values, expected n = {n}", file.witness.len())));
    }
    let values = file
        .witness
        .iter()
        .enumerate()
        .map(|(j, &v)| zero_based(v, u64::from(d), || format!("witness[{j}]"), "value").map(|v| v as Value))
        .collect::<Result<Vec<_>>>()?;
    let witness = Assignment::new(values, d)?;
    Ok(FlipCertificate { u, a, b, direction: file.direction, witness })
}

/// 1-based rendering of an assignment as a JSON array.
pub fn assignment_to_json(a: &Assignment) -> serde_json::Value {
    a.values().iter().map(|&v| u64::from(v) + 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_original, generate_symmetric};

    fn params() -> RBParams {
        RBParams::derive(4, 1.0, 2, 0.5, 1.4427, 7).unwrap()
    }

    #[test]
    fn round_trip() {
        let inst = generate_original(&params()).unwrap();
        let text = instance_to_json(&inst);
        assert_eq!(instance_from_json(&text).unwrap(), inst);
        let (_, sym) = generate_symmetric(&params()).unwrap();
        assert_eq!(instance_from_json(&instance_to_json(&sym)).unwrap(), sym);
    }

    #[test]
    fn canonical_layout() {
        let text = instance_to_json(&generate_original(&params()).unwrap());
        let keys = ["\"n\"", "\"alpha\"", "\"k\"", "\"p\"", "\"r\"", "\"seed\"", "\"d\"", "\"m\"", "\"variant\"", "\"constraints\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("\"original\""));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for c in v["constraints"].as_array().unwrap() {
            for x in c["scope"].as_array().unwrap() {
                assert!((1..=4).contains(&x.as_u64().unwrap()));
            }
        }
    }

    fn tampered(f: impl FnOnce(&mut serde_json::Value)) -> Error {
        let text = instance_to_json(&generate_original(&params()).unwrap());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        f(&mut v);
        instance_from_json(&v.to_string()).unwrap_err()
    }

    fn location(e: Error) -> String {
        match e {
            Error::Load { location, .. } => location,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagnostics() {
        assert_eq!(location(tampered(|v| v["constraints"][2]["scope"][1] = 0.into())), "constraints[2].scope[1]");
        assert_eq!(location(tampered(|v| v["constraints"][0]["permitted"][3][0] = 5.into())), "constraints[0].permitted[3]");
        assert_eq!(location(tampered(|v| v["m"] = 9.into())), "m");
        assert_eq!(location(tampered(|v| v["d"] = 5.into())), "d");
        assert_eq!(location(tampered(|v| v["p"] = 1.5.into())), "p");
        assert_eq!(
            location(tampered(|v| v["constraints"][1]["scope"] = serde_json::json!([2, 2]))),
            "constraints[1].scope"
        );
        let dup = tampered(|v| {
            let first = v["constraints"][4]["permitted"][0].clone();
            v["constraints"][4]["permitted"][1] = first;
        });
        assert_eq!(location(dup), "constraints[4].permitted");
        let short = tampered(|v| {
            v["constraints"][5]["permitted"].as_array_mut().unwrap().pop();
        });
        assert_eq!(location(short), "constraints[5].permitted");
        assert!(location(tampered(|v| v["extra"] = 1.into())).starts_with("line 1"));
        let syntax = instance_from_json("{\n  \"n\": 4,\n  oops\n}").unwrap_err();
        assert!(location(syntax).starts_with("line 3"));
    }

    #[test]
    fn certificate_round_trip() {
        let cert = FlipCertificate {
            u: 3,
            a: [0, 2],
            b: [1, 0],
            direction: Direction::SatToUnsat,
            witness: Assignment::new(vec![0, 2, 3, 1], 4).unwrap(),
        };
        let text = certificate_to_json(&cert);
        assert!(text.contains("\"sat_to_unsat\""));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["u"], 4);
        assert_eq!(v["a"], serde_json::json!([1, 3]));
        assert_eq!(certificate_from_json(&text, 8, 4, 4).unwrap(), cert);
        assert!(certificate_from_json(&text, 3, 4, 4).is_err());
        assert!(certificate_from_json(&text, 8, 5, 4).is_err());
        assert!(certificate_from_json(&text, 8, 4, 2).is_err());
    }
}
