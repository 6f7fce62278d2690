//! Parsing of policy, singularity and model-parameter arguments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lindblad_resign::synthesis::{Sign, SignPolicy, SingularityMode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("bad --policy '{0}': expected nonneg, nonpos, alternating or file:<path>")]
    BadPolicy(String),
    #[error("policy file {path}: {message}")]
    PolicyFile { path: String, message: String },
    #[error("bad --singularity '{0}': expected error or cap:<gamma_max>")]
    BadSingularity(String),
    #[error("bad --param '{0}': expected key=value with a numeric value")]
    BadParam(String),
}

/// A sign policy as requested on the command line; `Alternating` needs
/// the trajectory dimension before it can become a concrete
/// [`SignPolicy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyArg {
    AllNonnegative,
    AllNonpositive,
    Alternating,
    PerRound(Vec<Sign>),
}

impl PolicyArg {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "nonneg" => Ok(PolicyArg::AllNonnegative),
            "nonpos" => Ok(PolicyArg::AllNonpositive),
            "alternating" => Ok(PolicyArg::Alternating),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(PolicyArg::PerRound(read_sign_file(Path::new(path))?)),
                None => Err(ConfigError::BadPolicy(other.to_string())),
            },
        }
    }

    /// Concrete policy for a `dim`-dimensional problem.
    pub fn resolve(&self, dim: usize) -> SignPolicy {
        match self {
            PolicyArg::AllNonnegative => SignPolicy::AllNonnegative,
            PolicyArg::AllNonpositive => SignPolicy::AllNonpositive,
            PolicyArg::Alternating => SignPolicy::PerRound(
                (0..dim.saturating_sub(1))
                    .map(|round| {
                        if round % 2 == 0 {
                            Sign::NonNegative
                        } else {
                            Sign::NonPositive
                        }
                    })
                    .collect(),
            ),
            PolicyArg::PerRound(signs) => SignPolicy::PerRound(signs.clone()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PolicyArg::AllNonnegative => "nonneg".to_string(),
            PolicyArg::AllNonpositive => "nonpos".to_string(),
            PolicyArg::Alternating => "alternating".to_string(),
            PolicyArg::PerRound(signs) => {
                let body: String = signs
                    .iter()
                    .map(|s| match s {
                        Sign::NonNegative => '+',
                        Sign::NonPositive => '-',
                    })
                    .collect();
                format!("per-round:{body}")
            }
        }
    }
}

/// One sign per line: `+`/`nonneg` or `-`/`nonpos`; blank lines and
/// `#` comments ignored.
fn read_sign_file(path: &Path) -> Result<Vec<Sign>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::PolicyFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut signs = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        let sign = match token {
            "+" | "nonneg" | "nonnegative" => Sign::NonNegative,
            "-" | "nonpos" | "nonpositive" => Sign::NonPositive,
            other => {
                return Err(ConfigError::PolicyFile {
                    path: path.display().to_string(),
                    message: format!("line {}: unknown sign '{other}'", number + 1),
                })
            }
        };
        signs.push(sign);
    }
    if signs.is_empty() {
        return Err(ConfigError::PolicyFile {
            path: path.display().to_string(),
            message: "no signs found".to_string(),
        });
    }
    Ok(signs)
}

pub fn parse_singularity(text: &str) -> Result<SingularityMode, ConfigError> {
    match text {
        "error" => Ok(SingularityMode::Error),
        other => match other.strip_prefix("cap:") {
            Some(value) => value
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0)
                .map(SingularityMode::Cap)
                .ok_or_else(|| ConfigError::BadSingularity(other.to_string())),
            None => Err(ConfigError::BadSingularity(other.to_string())),
        },
    }
}

pub fn describe_singularity(mode: SingularityMode) -> String {
    match mode {
        SingularityMode::Error => "error".to_string(),
        SingularityMode::Cap(cap) => format!("cap:{cap}"),
    }
}

/// Collect repeated `--param key=value` arguments into a map.
pub fn parse_params(params: &[String]) -> Result<BTreeMap<String, f64>, ConfigError> {
    let mut map = BTreeMap::new();
    for raw in params {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| ConfigError::BadParam(raw.clone()))?;
        let value: f64 = value
            .parse()
            .map_err(|_| ConfigError::BadParam(raw.clone()))?;
        map.insert(key.to_string(), value);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_keywords_parse() {
        assert_eq!(
            PolicyArg::parse("nonneg").unwrap(),
            PolicyArg::AllNonnegative
        );
        assert_eq!(
            PolicyArg::parse("nonpos").unwrap(),
            PolicyArg::AllNonpositive
        );
        assert_eq!(
            PolicyArg::parse("alternating").unwrap(),
            PolicyArg::Alternating
        );
        assert!(PolicyArg::parse("sometimes").is_err());
    }

    #[test]
    fn alternating_resolves_to_d_minus_one_rounds() {
        let policy = PolicyArg::Alternating.resolve(4);
        assert_eq!(
            policy,
            SignPolicy::PerRound(vec![
                Sign::NonNegative,
                Sign::NonPositive,
                Sign::NonNegative
            ])
        );
    }

    #[test]
    fn singularity_modes_parse() {
        assert_eq!(parse_singularity("error").unwrap(), SingularityMode::Error);
        assert_eq!(
            parse_singularity("cap:50").unwrap(),
            SingularityMode::Cap(50.0)
        );
        assert!(parse_singularity("cap:-1").is_err());
        assert!(parse_singularity("clamp").is_err());
    }

    #[test]
    fn params_parse_into_map() {
        let map = parse_params(&["omega=2.0".to_string(), "rho11_0=0.5".to_string()]).unwrap();
        assert_eq!(map["omega"], 2.0);
        assert_eq!(map["rho11_0"], 0.5);
        assert!(parse_params(&["omega".to_string()]).is_err());
    }
}
