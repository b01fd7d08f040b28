//! TOML experiment configuration.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! a table named after the subcommand holds its own flags; `[symbols.NAME]`
//! defines trigonometric symbols by Fourier coefficient:
//!
//! ```toml
//! matrix = [2, 1, 1, 1]
//! seed = 7
//!
//! [qe]
//! dims = [100, 200, 400]
//! symbol = "bump"
//!
//! [symbols.bump]
//! terms = [[1, 0, 0.5, 0.0], [-1, 0, 0.5, 0.0], [0, 1, 0.25, 0.0], [0, -1, 0.25, 0.0]]
//! real = true
//! ```
//!
//! Flags given on the command line or through the environment win over the file.

use crate::error::CliError;
use catlab::quantization::TorusSymbol;
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;
use toml::{Table, Value};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolTable {
    terms: Vec<[f64; 4]>,
    #[serde(default)]
    real: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Config {
    pub symbols: BTreeMap<String, TorusSymbol>,
    table: Table,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::usage("BAD_CONFIG", e.to_string()))?;
        let mut symbols = BTreeMap::new();
        if let Some(raw) = table.remove("symbols") {
            let raw: BTreeMap<String, SymbolTable> =
                raw.try_into().map_err(|e: toml::de::Error| CliError::usage("BAD_CONFIG", format!("symbols: {e}")))?;
            for (name, def) in raw {
                symbols.insert(name.clone(), build_symbol(&name, def)?);
            }
        }
        Ok(Config { symbols, table })
    }

    /// Extra `--flag value` arguments for every key the command line left unset.
    pub fn arguments(&self, root: &Command, sub: &str, matches: &ArgMatches) -> Result<Vec<OsString>, CliError> {
        let sub_cmd = root.find_subcommand(sub).expect("parsed subcommand exists");
        let sub_matches = matches.subcommand_matches(sub).expect("parsed subcommand has matches");
        let lookup = |key: &str| {
            let long = key.replace('_', "-");
            sub_cmd
                .get_arguments()
                .chain(root.get_arguments())
                .find(|a| a.get_long() == Some(long.as_str()))
                .map(|a| (a.get_id().to_string(), long))
        };
        let mut out = Vec::new();
        let mut push = |key: &str, value: &Value, strict: bool| -> Result<(), CliError> {
            let Some((id, long)) = lookup(key) else {
                return if strict {
                    Err(CliError::usage("UNKNOWN_CONFIG_KEY", format!("[{sub}] has no option {key:?}")))
                } else {
                    Ok(())
                };
            };
            if key == "config" {
                return Err(CliError::usage("UNKNOWN_CONFIG_KEY", "config files cannot nest"));
            }
            let explicit = matches!(
                sub_matches.value_source(&id).or_else(|| matches.value_source(&id)),
                Some(ValueSource::CommandLine) | Some(ValueSource::EnvVariable)
            );
            if !explicit {
                out.push(OsString::from(format!("--{long}")));
                out.push(OsString::from(render(key, value)?));
            }
            Ok(())
        };
        for (key, value) in &self.table {
            match value {
                Value::Table(t) => {
                    if key == sub {
                        for (k, v) in t {
                            push(k, v, true)?;
                        }
                    } else if root.find_subcommand(key).is_none() {
                        return Err(CliError::usage("UNKNOWN_CONFIG_KEY", format!("unknown table [{key}]")));
                    }
                }
                _ => push(key, value, false)?,
            }
        }
        Ok(out)
    }
}

fn render(key: &str, value: &Value) -> Result<String, CliError> {
    let scalar = |v: &Value| match v {
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(format!("{f:?}")),
        Value::String(s) => Ok(s.clone()),
        _ => Err(CliError::usage("BAD_CONFIG", format!("{key}: expected a number, string or array of them"))),
    };
    match value {
        Value::Array(items) => Ok(items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(",")),
        v => scalar(v),
    }
}

fn build_symbol(name: &str, def: SymbolTable) -> Result<TorusSymbol, CliError> {
    if def.terms.is_empty() {
        return Err(CliError::usage("BAD_CONFIG", format!("symbol {name} has no terms")));
    }
    let mut terms = Vec::with_capacity(def.terms.len());
    for [k1, k2, re, im] in def.terms {
        if k1.fract() != 0.0 || k2.fract() != 0.0 || !re.is_finite() || !im.is_finite() {
            return Err(CliError::usage("BAD_CONFIG", format!("symbol {name}: frequencies must be integers")));
        }
        terms.push(((k1 as i64, k2 as i64), Complex64::new(re, im)));
    }
    let s = TorusSymbol::from_terms(terms);
    if def.real {
        s.declare_real().map_err(|e| CliError::usage("BAD_CONFIG", format!("symbol {name}: {e}")))
    } else {
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::Cli;
    use clap::CommandFactory;

    fn inject(text: &str, argv: &[&str]) -> Result<Vec<String>, CliError> {
        let cfg = Config::parse(text)?;
        let root = Cli::command();
        let matches = root.clone().try_get_matches_from(argv).unwrap();
        let sub = matches.subcommand_name().unwrap().to_string();
        Ok(cfg.arguments(&root, &sub, &matches)?.into_iter().map(|s| s.into_string().unwrap()).collect())
    }

    #[test]
    fn file_values_fill_unset_flags() {
        let text = "matrix = [3, 2, 1, 1]\nseed = 4\n[qe]\ndims = [10, 20]\n";
        let args = inject(text, &["catlab", "qe", "-N", "30"]).unwrap();
        assert_eq!(args, vec!["--matrix", "3,2,1,1"]);
        let args = inject(text, &["catlab", "egorov"]).unwrap();
        assert_eq!(args, vec!["--matrix", "3,2,1,1", "--seed", "4"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(inject("[qe]\nbogus = 1\n", &["catlab", "qe"]).unwrap_err().code(), "UNKNOWN_CONFIG_KEY");
        assert_eq!(inject("[nothing]\nx = 1\n", &["catlab", "qe"]).unwrap_err().code(), "UNKNOWN_CONFIG_KEY");
        assert_eq!(inject("x = [", &["catlab", "qe"]).unwrap_err().code(), "BAD_CONFIG");
    }

    #[test]
    fn symbol_tables() {
        let cfg = Config::parse("[symbols.s]\nterms = [[1, 0, 0.5, 0.0], [-1, 0, 0.5, 0.0]]\nreal = true\n").unwrap();
        assert_eq!(cfg.symbols["s"], TorusSymbol::cos_x());
        assert!(Config::parse("[symbols.s]\nterms = [[1, 0, 1.0, 0.0]]\nreal = true\n").is_err());
        assert!(Config::parse("[symbols.s]\nterms = [[0.5, 0, 1.0, 0.0]]\n").is_err());
    }
}
