use std::fs;
use std::path::PathBuf;

use binorbit_core::digits::{DigitPrefix, DigitStream, DEFAULT_GUARD};
use binorbit_core::orbit::{Exponent, OrbitConfig, Schedule, DEFAULT_BIT_BUDGET, DEFAULT_EPS_BITS};
use binorbit_core::streamspec::{parse_spec, validate_spec, StreamSpec};

use crate::error::CliError;

/// Everything one run needs, validated.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec_text: String,
    pub spec: StreamSpec,
    pub p: Exponent,
    pub n_max: u64,
    /// `epsilon = 2^-eps_bits`.
    pub eps_bits: u32,
    pub schedule: Schedule,
    pub out: Option<PathBuf>,
    pub guard: Option<u64>,
    pub bit_budget: u64,
    pub exact_periodic: bool,
}

impl RunConfig {
    pub fn new(spec_text: &str, p: Exponent, n_max: u64) -> Result<Self, CliError> {
        if n_max == 0 {
            return Err(CliError::Usage("--n-max must be at least 1".into()));
        }
        Ok(RunConfig {
            spec_text: spec_text.to_string(),
            spec: parse_spec(spec_text)?,
            p,
            n_max,
            eps_bits: DEFAULT_EPS_BITS,
            schedule: Schedule::Log,
            out: None,
            guard: None,
            bit_budget: DEFAULT_BIT_BUDGET,
            exact_periodic: true,
        })
    }

    pub fn orbit_config(&self) -> OrbitConfig {
        OrbitConfig {
            p: self.p,
            eps_bits: self.eps_bits,
            bit_budget: self.bit_budget,
            exact_periodic: self.exact_periodic,
        }
    }

    pub fn epsilon_text(&self) -> String {
        epsilon_text(self.eps_bits)
    }

    pub fn open_stream(&self) -> Result<DigitStream, CliError> {
        open_stream(&self.spec, self.guard)
    }
}

pub fn epsilon_text(bits: u32) -> String {
    format!("2^-{bits}")
}

/// Parses `2^-k` into `k`.
pub fn parse_epsilon(text: &str) -> Result<u32, CliError> {
    let bad = || CliError::Usage(format!("epsilon must look like 2^-k with k >= 1, got {text:?}"));
    let k = text.trim().strip_prefix("2^-").ok_or_else(bad)?;
    match k.parse::<u32>() {
        Ok(k) if (1..=4096).contains(&k) => Ok(k),
        _ => Err(bad()),
    }
}

pub fn parse_exponent(text: &str) -> Result<Exponent, CliError> {
    text.trim().parse::<Exponent>().map_err(|e| CliError::Usage(format!("bad exponent {text:?}: {e}")))
}

/// Comma-separated exponents, e.g. `1,2,3/2`.
pub fn parse_p_list(text: &str) -> Result<Vec<Exponent>, CliError> {
    let list: Vec<Exponent> =
        text.split(',').filter(|s| !s.trim().is_empty()).map(parse_exponent).collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::Usage("--p-list is empty".into()));
    }
    Ok(list)
}

pub fn parse_schedule(text: &str) -> Result<Schedule, CliError> {
    text.parse().map_err(|_| CliError::Usage(format!("schedule must be log, blocks or all, got {text:?}")))
}

/// Builds a digit stream, reading `digits:file=` sources from disk.
pub fn open_stream(spec: &StreamSpec, guard: Option<u64>) -> Result<DigitStream, CliError> {
    let guard = guard.unwrap_or(DEFAULT_GUARD);
    match spec {
        StreamSpec::RawDigits { path } => {
            if let Some(issue) = validate_spec(spec).issues.first() {
                return Err(CliError::Usage(issue.message.clone()));
            }
            let path = PathBuf::from(path);
            let text = fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let digits = DigitPrefix::from_ascii(&text)?;
            Ok(DigitStream::from_raw(spec.clone(), digits, guard))
        }
        _ => Ok(DigitStream::with_guard(spec.clone(), guard)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_notation() {
        assert_eq!(parse_epsilon("2^-40").unwrap(), 40);
        assert_eq!(parse_epsilon(" 2^-1 ").unwrap(), 1);
        assert!(parse_epsilon("1e-12").is_err());
        assert!(parse_epsilon("2^-0").is_err());
        assert_eq!(epsilon_text(30), "2^-30");
    }

    #[test]
    fn p_lists() {
        let ps = parse_p_list("1, 2,3/2").unwrap();
        assert_eq!(ps, vec![Exponent::integer(1), Exponent::integer(2), Exponent::new(3, 2).unwrap()]);
        assert!(parse_p_list("").is_err());
        assert!(parse_p_list("0").is_err());
    }

    #[test]
    fn run_config_rejects_zero_n() {
        assert!(RunConfig::new("champernowne", Exponent::integer(2), 0).is_err());
        let c = RunConfig::new("rational:2/6", Exponent::integer(2), 10).unwrap();
        assert_eq!(c.spec, StreamSpec::rational(1, 3));
        assert_eq!(c.epsilon_text(), "2^-40");
    }
}
