//! Per-command key tables, config-file parsing and flag merging.
//!
//! Every setting is a `key=value` pair. Values come from the key table
//! defaults, then the optional config file, then command-line flags.

use std::collections::HashSet;
use std::fmt::Display;
use std::str::FromStr;

use crate::CliError;

/// One recognised setting.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    /// Empty means unset.
    pub default: &'static str,
    pub help: &'static str,
    /// Boolean switch on the command line (`--name` with no value).
    pub switch: bool,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        switch: false,
    }
}

const fn switch(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: "false",
        help,
        switch: true,
    }
}

const FORMAT: Key = key("format", "csv", "Output format: csv | json");
const OUTPUT: Key = key("output", "-", "Output file, '-' for standard output");
const ALPHA: Key = key("alpha", "2", "Real part of the coherent amplitude α");
const ALPHA_IM: Key = key("alpha-im", "0", "Imaginary part of α");
const GT: Key = key(
    "gt",
    "heuristic",
    "Probe interaction time: heuristic | optimize | <value>",
);
const NMAX: Key = key("nmax", "auto", "Fock cutoff: auto | <integer>");
const TAIL_TOLERANCE: Key = key(
    "tail-tolerance",
    "1e-8",
    "Relative probability allowed on the top three Fock levels",
);
const VARIANT: Key = key(
    "variant",
    "psi-plus",
    "Bell pair: psi-plus | psi-minus | phi-minus | phi-plus | all",
);
const THETA: Key = key("theta", "", "Input Bloch polar angle θ (ζ = cos θ/2)");
const PHI: Key = key("phi", "", "Input Bloch azimuth φ (ξ = e^{iφ} sin θ/2)");
const ZETA_RE: Key = key("zeta-re", "", "Input amplitude on |b⟩, real part");
const ZETA_IM: Key = key("zeta-im", "", "Input amplitude on |b⟩, imaginary part");
const XI_RE: Key = key("xi-re", "", "Input amplitude on |c⟩, real part");
const XI_IM: Key = key("xi-im", "", "Input amplitude on |c⟩, imaginary part");
const RANDOM_INPUT: Key = switch(
    "random-input",
    "Draw a uniform random input qubit from the seed",
);
const SEED: Key = key("seed", "0", "Seed for random input and sampling");

pub const EPR_KEYS: &[Key] = &[
    VARIANT,
    ALPHA,
    ALPHA_IM,
    GT,
    NMAX,
    TAIL_TOLERANCE,
    FORMAT,
    OUTPUT,
];

pub const TELEPORT_KEYS: &[Key] = &[
    ALPHA,
    ALPHA_IM,
    GT,
    NMAX,
    TAIL_TOLERANCE,
    THETA,
    PHI,
    ZETA_RE,
    ZETA_IM,
    XI_RE,
    XI_IM,
    RANDOM_INPUT,
    key("mode", "enumerate", "enumerate | sample"),
    SEED,
    FORMAT,
    OUTPUT,
];

pub const SWEEP_KEYS: &[Key] = &[
    key("variable", "alpha", "Swept parameter: alpha | gt"),
    key("start", "", "First grid value"),
    key("stop", "", "Last grid value"),
    key("steps", "", "Number of grid points (>= 2)"),
    VARIANT,
    ALPHA,
    ALPHA_IM,
    GT,
    NMAX,
    TAIL_TOLERANCE,
    key("jobs", "0", "Worker threads, 0 for one per core"),
    FORMAT,
    OUTPUT,
];

pub const BELL_CHECK_KEYS: &[Key] = &[FORMAT, OUTPUT];

pub const COMPARE_KEYS: &[Key] = &[
    ALPHA,
    ALPHA_IM,
    NMAX,
    TAIL_TOLERANCE,
    THETA,
    PHI,
    ZETA_RE,
    ZETA_IM,
    XI_RE,
    XI_IM,
    RANDOM_INPUT,
    SEED,
    FORMAT,
    OUTPUT,
];

/// Parses the config-file grammar: one `key = value` per line, blank lines
/// and lines starting with `#` ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key=value, got '{line}'",
                lineno + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Usage(format!(
                "config line {}: empty key",
                lineno + 1
            )));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key '{k}'",
                lineno + 1
            )));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Merged settings for one command, in key-table order.
#[derive(Clone, Debug)]
pub struct Settings {
    command: &'static str,
    values: Vec<(&'static str, String)>,
    explicit: HashSet<&'static str>,
}

impl Settings {
    pub fn resolve(
        command: &'static str,
        keys: &[Key],
        file: &[(String, String)],
        flags: &[(&'static str, String)],
    ) -> Result<Self, CliError> {
        let mut values: Vec<(&'static str, String)> = keys
            .iter()
            .map(|k| (k.name, k.default.to_string()))
            .collect();
        let mut explicit = HashSet::new();
        for (k, v) in file {
            let Some(slot) = values.iter_mut().find(|(name, _)| *name == k.as_str()) else {
                return Err(CliError::Usage(format!(
                    "config key '{k}' is not used by '{command}'"
                )));
            };
            slot.1 = v.clone();
            explicit.insert(slot.0);
        }
        for (k, v) in flags {
            let slot = values
                .iter_mut()
                .find(|(name, _)| name == k)
                .expect("flags are generated from the key table");
            slot.1 = v.clone();
            explicit.insert(slot.0);
        }
        Ok(Self {
            command,
            values,
            explicit,
        })
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    pub fn entries(&self) -> &[(&'static str, String)] {
        &self.values
    }

    pub fn raw(&self, name: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("unknown setting {name}"))
    }

    /// True when the value came from the config file or a flag.
    pub fn is_explicit(&self, name: &str) -> bool {
        self.explicit.contains(name)
    }

    pub fn is_set(&self, name: &str) -> bool {
        !self.raw(name).is_empty()
    }

    pub fn parse<T>(&self, name: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(name);
        if raw.is_empty() {
            return Err(CliError::Usage(format!("'{name}' is required")));
        }
        raw.parse()
            .map_err(|e| CliError::Usage(format!("invalid value '{raw}' for '{name}': {e}")))
    }

    pub fn float(&self, name: &str) -> Result<f64, CliError> {
        let v: f64 = self.parse(name)?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("'{name}' must be finite")));
        }
        Ok(v)
    }

    pub fn float_or(&self, name: &str, fallback: f64) -> Result<f64, CliError> {
        if self.is_set(name) {
            self.float(name)
        } else {
            Ok(fallback)
        }
    }

    pub fn flag(&self, name: &str) -> Result<bool, CliError> {
        match self.raw(name) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!(
                "invalid boolean '{other}' for '{name}'"
            ))),
        }
    }

    pub fn choice<'a>(&self, name: &str, allowed: &[&'a str]) -> Result<&'a str, CliError> {
        let raw = self.raw(name);
        allowed.iter().copied().find(|a| *a == raw).ok_or_else(|| {
            CliError::Usage(format!(
                "invalid value '{raw}' for '{name}' (expected one of {})",
                allowed.join(", ")
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_grammar() {
        let text =
            "# comment\n\n alpha = 1.5\nnmax=auto\n  # indented comment\nvariant = phi-plus \n";
        let kv = parse_config_text(text).unwrap();
        assert_eq!(
            kv,
            vec![
                ("alpha".to_string(), "1.5".to_string()),
                ("nmax".to_string(), "auto".to_string()),
                ("variant".to_string(), "phi-plus".to_string()),
            ]
        );
        assert!(parse_config_text("alpha 2").is_err());
        assert!(parse_config_text("=2").is_err());
        assert!(parse_config_text("alpha=1\nalpha=2").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = vec![
            ("alpha".to_string(), "1".to_string()),
            ("gt".to_string(), "0.3".to_string()),
        ];
        let flags = vec![("alpha", "3".to_string())];
        let s = Settings::resolve("epr", EPR_KEYS, &file, &flags).unwrap();
        assert_eq!(s.raw("alpha"), "3");
        assert_eq!(s.raw("gt"), "0.3");
        assert_eq!(s.raw("nmax"), "auto");
        assert!(s.is_explicit("gt"));
        assert!(!s.is_explicit("nmax"));
    }

    #[test]
    fn unknown_file_key_is_usage_error() {
        let file = vec![("seed".to_string(), "1".to_string())];
        assert!(matches!(
            Settings::resolve("epr", EPR_KEYS, &file, &[]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn typed_getters() {
        let flags = vec![("alpha", "inf".to_string()), ("nmax", "x".to_string())];
        let s = Settings::resolve("epr", EPR_KEYS, &[], &flags).unwrap();
        assert!(s.float("alpha").is_err());
        assert!(s.parse::<usize>("nmax").is_err());
        assert_eq!(s.choice("format", &["csv", "json"]).unwrap(), "csv");
    }
}
