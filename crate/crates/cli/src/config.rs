//! `--config` files: a flat TOML table whose keys are flag names of the
//! chosen subcommand. The entries become flags placed before the ones on
//! the command line, and since every flag overrides itself, the command
//! line wins.

use std::fs;

use clap::Command;

#[derive(Debug)]
pub struct ConfigError(pub String);

/// Removes `--config PATH` (or `--config=PATH`) from `argv`.
fn take_config_path(argv: &mut Vec<String>) -> Result<Option<String>, ConfigError> {
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--" {
            break;
        }
        if let Some(p) = argv[i].strip_prefix("--config=") {
            let p = p.to_owned();
            argv.remove(i);
            return Ok(Some(p));
        }
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                return Err(ConfigError("--config needs a file path".into()));
            }
            let p = argv.remove(i + 1);
            argv.remove(i);
            return Ok(Some(p));
        }
        i += 1;
    }
    Ok(None)
}

fn render(key: &str, value: &toml::Value) -> Result<Option<String>, ConfigError> {
    Ok(Some(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(_) => return Ok(None),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| render(key, v).map(|s| s.unwrap_or_default()))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(ConfigError(format!("config key '{key}': nested tables are not supported"))),
    }))
}

/// Expands `--config` into ordinary flags for the subcommand in `argv`.
pub fn expand(cmd: &Command, mut argv: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = take_config_path(&mut argv)? else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError(format!("cannot read config {path}: {e}")))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError(format!("config {path}: {}", e.message())))?;

    let mut cmd = cmd.clone();
    cmd.build();
    let Some(pos) = argv.iter().skip(1).position(|a| cmd.find_subcommand(a).is_some()).map(|p| p + 1) else {
        return Err(ConfigError("--config needs a subcommand".into()));
    };
    let sub = cmd.find_subcommand(&argv[pos]).expect("found above");
    let known = |key: &str| {
        sub.get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key) && a.get_long() != Some("config"))
    };

    let mut injected = Vec::new();
    for (key, value) in &table {
        let arg = known(key).ok_or_else(|| {
            ConfigError(format!("config {path}: unknown key '{key}' for '{}'", sub.get_name()))
        })?;
        let takes_value = arg.get_num_args().is_some_and(|n| n.takes_values());
        match (value, takes_value) {
            (toml::Value::Boolean(true), false) => injected.push(format!("--{key}")),
            (toml::Value::Boolean(false), false) => {}
            (toml::Value::Boolean(_), true) | (_, false) => {
                return Err(ConfigError(format!("config {path}: key '{key}' has the wrong type")));
            }
            (v, true) => {
                injected.push(format!("--{key}"));
                injected.push(render(key, v)?.unwrap_or_default());
            }
        }
    }
    argv.splice(pos + 1..pos + 1, injected);
    Ok(argv)
}
