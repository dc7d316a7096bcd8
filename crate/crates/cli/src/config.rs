//! `--config FILE`: TOML `key = value` pairs spliced in as flags. A flag
//! given on the command line always wins over the file.

use std::path::Path;

use toml::Value;

pub const SUBCOMMANDS: [&str; 7] = [
    "analytic",
    "enumerate",
    "mixture",
    "simulate",
    "sweep",
    "verify",
    "replay",
];

/// Global options that take a value, and so may separate argv[0] from the
/// subcommand.
const VALUED_GLOBALS: [&str; 5] = ["--config", "--workers", "--output", "-o", "--manifest"];

/// Index of the subcommand token.
fn subcommand_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if SUBCOMMANDS.contains(&a) {
            return Some(i);
        }
        i += if VALUED_GLOBALS.contains(&a) { 2 } else { 1 };
    }
    None
}

/// Value of `--config`, in either `--config F` or `--config=F` form.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn flag_name(key: &str) -> String {
    match key {
        "C" => "c".into(),
        "D" => "d".into(),
        "design" => "regime".into(),
        k => k.to_lowercase().replace('_', "-"),
    }
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Array(items) => Ok(items
            .iter()
            .map(scalar)
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        other => Err(format!("unsupported value {other}")),
    }
}

fn has_flag(args: &[String], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter().any(|a| a == flag || a.starts_with(&eq))
}

/// Long flags a subcommand takes, and those any subcommand takes.
pub struct Accepted {
    pub here: Vec<String>,
    pub anywhere: Vec<String>,
}

impl Accepted {
    fn check(&self, key: &str, flag: &str) -> Result<bool, String> {
        let name = &flag[2..];
        if self.here.iter().any(|f| f == name) {
            Ok(true)
        } else if self.anywhere.iter().any(|f| f == name) {
            Ok(false)
        } else {
            Err(format!(
                "config key {key} is not an option of any subcommand"
            ))
        }
    }
}

/// Flags from the config table, skipping any the user already passed and
/// any the subcommand does not take.
pub fn config_flags(
    table: &toml::Table,
    user: &[String],
    accepted: &Accepted,
) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut py: [Option<String>; 4] = Default::default();
    for (key, value) in table {
        if let Some(j) = key
            .strip_prefix("py")
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&j| j < 4)
        {
            py[j] = Some(scalar(value).map_err(|e| format!("config key {key}: {e}"))?);
            continue;
        }
        let flag = format!("--{}", flag_name(key));
        if !accepted.check(key, &flag)? || has_flag(user, &flag) {
            continue;
        }
        match value {
            Value::Boolean(true) => out.push(flag),
            Value::Boolean(false) => {}
            v => {
                out.push(flag);
                out.push(scalar(v).map_err(|e| format!("config key {key}: {e}"))?);
            }
        }
    }
    if py.iter().any(Option::is_some) && accepted.check("py0", "--py")? && !has_flag(user, "--py") {
        let parts: Vec<String> = py
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.clone()
                    .ok_or_else(|| format!("config sets some of py0..py3 but not py{j}"))
            })
            .collect::<Result<_, _>>()?;
        out.push("--py".into());
        out.push(parts.join(","));
    }
    Ok(out)
}

/// `args` with the config file's flags inserted after the subcommand.
pub fn expand(
    args: Vec<String>,
    accepted: impl Fn(&str) -> Accepted,
) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("cannot read config {path}: {e}"))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| format!("config {path}: {e}"))?;
    let Some(at) = subcommand_index(&args) else {
        return Ok(args);
    };
    let extra = config_flags(&table, &args[at + 1..], &accepted(&args[at]))?;
    let mut out = args[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// `args` without the options that only steer where output goes or how
/// fast it is produced; these never change an artifact's bytes.
pub fn strip_run_options(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if VALUED_GLOBALS.contains(&a.as_str()) {
            it.next();
            continue;
        }
        if VALUED_GLOBALS
            .iter()
            .any(|g| a.starts_with(&format!("{g}=")))
        {
            continue;
        }
        out.push(a.clone());
    }
    out
}
