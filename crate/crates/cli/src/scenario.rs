//! Scenario files.
//!
//! A scenario is a TOML document with tables `[firm1]`, `[firm2]`,
//! `[market]`, exactly one of `[cds]` or `[ftd]`, and an optional
//! `[numerics]`. See `tests/fixtures/reference.toml` for a complete example.

use serde::Deserialize;
use wedge_credit::mc::McConfig;
use wedge_credit::model::{CdsContract, FirmParams, FtdContract, MarketParams, Scenario};
use wedge_credit::pricing::PricingSpec;
use wedge_credit::quadrature::QuadSpec;
use wedge_credit::singlename::FeeConvention;
use wedge_credit::specfun::SeriesTolerances;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    firm1: RawFirm,
    firm2: RawFirm,
    market: RawMarket,
    cds: Option<RawCds>,
    ftd: Option<RawFtd>,
    #[serde(default)]
    numerics: RawNumerics,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFirm {
    #[serde(default = "one")]
    v0: f64,
    k_barrier: Option<f64>,
    log_distance: Option<f64>,
    sigma: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    payout: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    r: f64,
    rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCds {
    #[serde(default = "one")]
    notional: f64,
    recovery_underlying: f64,
    recovery_counterparty: f64,
    spread: f64,
    maturity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFtd {
    #[serde(default = "one")]
    notional: f64,
    recovery: f64,
    maturity: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    mu_cutoff_sigmas: Option<f64>,
    max_subdivisions: Option<usize>,
    term_tol: Option<f64>,
    max_terms: Option<usize>,
    n_paths: Option<usize>,
    steps_per_year: Option<usize>,
    seed: Option<u64>,
    bridge_correction: Option<bool>,
    fee_approx: Option<FeeConvention>,
}

/// The contract a scenario prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contract {
    Cds(CdsContract),
    Ftd(FtdContract),
}

impl Contract {
    pub fn maturity(&self) -> f64 {
        match self {
            Contract::Cds(c) => c.maturity,
            Contract::Ftd(c) => c.maturity,
        }
    }
}

/// A parsed and validated scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub contract: Contract,
    pub pricing: PricingSpec,
    pub mc: McConfig,
}

/// Line of `field` inside `[table]`, 1-based.
fn locate(source: &str, table: &str, field: &str) -> Option<usize> {
    let header = format!("[{table}]");
    let mut inside = false;
    for (i, line) in source.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            inside = trimmed.split('#').next().map(str::trim) == Some(header.as_str());
            continue;
        }
        if inside {
            let key = trimmed.split('=').next().unwrap_or("").trim();
            if key == field {
                return Some(i + 1);
            }
        }
    }
    source
        .lines()
        .position(|l| l.trim().starts_with(&header))
        .map(|i| i + 1)
}

/// Byte offset of `word` in `text` where it is not part of a longer identifier.
fn find_word(text: &str, word: &str) -> Option<usize> {
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '_';
    text.match_indices(word).map(|(i, _)| i).find(|&i| {
        let before = text[..i].chars().next_back().is_none_or(|c| !ident(c));
        let after = text[i + word.len()..].chars().next().is_none_or(|c| !ident(c));
        before && after
    })
}

struct Checker<'a> {
    path: &'a str,
    source: &'a str,
}

impl Checker<'_> {
    /// Runs a library validation and, on failure, points at the first field
    /// of `table` the message mentions.
    fn check(&self, table: &str, fields: &[&str], result: wedge_credit::Result<()>) -> Result<(), CliError> {
        let Err(e) = result else {
            return Ok(());
        };
        let msg = e.to_string();
        let field = fields
            .iter()
            .filter_map(|f| find_word(&msg, f).map(|pos| (pos, *f)))
            .min()
            .map(|(_, f)| f)
            .unwrap_or(fields[0]);
        let line = locate(self.source, table, field).unwrap_or(1);
        Err(CliError::Invalid(format!(
            "{}:{line}: [{table}] {field}: {msg}",
            self.path
        )))
    }

    fn invalid(&self, table: &str, field: &str, msg: &str) -> CliError {
        let line = locate(self.source, table, field).unwrap_or(1);
        CliError::Invalid(format!("{}:{line}: [{table}] {field}: {msg}", self.path))
    }
}

fn firm(raw: &RawFirm, table: &str, ck: &Checker) -> Result<FirmParams, CliError> {
    let k_barrier = match (raw.k_barrier, raw.log_distance) {
        (Some(k), None) => k,
        (None, Some(d)) => raw.v0 * (-d).exp(),
        _ => {
            return Err(ck.invalid(
                table,
                "k_barrier",
                &format!("{table}: give exactly one of k_barrier or log_distance"),
            ))
        }
    };
    let f = FirmParams {
        v0: raw.v0,
        k_barrier,
        gamma: raw.gamma,
        sigma: raw.sigma,
        payout: raw.payout,
    };
    let barrier_key = if raw.k_barrier.is_some() {
        "k_barrier"
    } else {
        "log_distance"
    };
    ck.check(
        table,
        &["v0", barrier_key, "sigma", "gamma", "payout"],
        f.validate(table),
    )?;
    Ok(f)
}

/// Parses `source` (read from `path`, used in diagnostics).
pub fn parse(path: &str, source: &str) -> Result<ScenarioFile, CliError> {
    let raw: RawFile = toml::from_str(source).map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].lines().count().max(1))
            .unwrap_or(1);
        CliError::Invalid(format!("{path}:{line}: {}", e.message()))
    })?;
    let ck = Checker { path, source };
    let firm1 = firm(&raw.firm1, "firm1", &ck)?;
    let firm2 = firm(&raw.firm2, "firm2", &ck)?;
    let market = MarketParams {
        r: raw.market.r,
        rho: raw.market.rho,
    };
    ck.check("market", &["rho", "r"], market.validate())?;
    let scenario = Scenario { firm1, firm2, market };
    ck.check("firm1", &["log_distance", "k_barrier"], scenario.wedge().map(|_| ()))?;

    let contract = match (&raw.cds, &raw.ftd) {
        (Some(c), None) => {
            let c = CdsContract {
                notional: c.notional,
                recovery_underlying: c.recovery_underlying,
                recovery_counterparty: c.recovery_counterparty,
                spread: c.spread,
                maturity: c.maturity,
            };
            ck.check(
                "cds",
                &[
                    "notional",
                    "maturity",
                    "recovery_underlying",
                    "recovery_counterparty",
                    "spread",
                ],
                c.validate(),
            )?;
            Contract::Cds(c)
        }
        (None, Some(f)) => {
            let f = FtdContract {
                notional: f.notional,
                recovery: f.recovery,
                maturity: f.maturity,
            };
            ck.check("ftd", &["notional", "maturity", "recovery"], f.validate())?;
            Contract::Ftd(f)
        }
        _ => {
            return Err(CliError::Invalid(format!(
                "{path}: the scenario needs exactly one of [cds] or [ftd]"
            )))
        }
    };

    let n = &raw.numerics;
    let qd = QuadSpec::default();
    let quad = QuadSpec {
        rel_tol: n.rel_tol.unwrap_or(qd.rel_tol),
        abs_tol: n.abs_tol.unwrap_or(qd.abs_tol),
        mu_cutoff_sigmas: n.mu_cutoff_sigmas.unwrap_or(qd.mu_cutoff_sigmas),
        max_subdivisions: n.max_subdivisions.unwrap_or(qd.max_subdivisions),
    };
    ck.check(
        "numerics",
        &["rel_tol", "abs_tol", "mu_cutoff_sigmas", "max_subdivisions"],
        quad.validate(),
    )?;
    let sd = SeriesTolerances::default();
    let series = SeriesTolerances {
        term_tol: n.term_tol.unwrap_or(sd.term_tol),
        max_terms: n.max_terms.unwrap_or(sd.max_terms),
    };
    ck.check("numerics", &["term_tol", "max_terms"], series.validate())?;
    let md = McConfig::default();
    let mc = McConfig {
        n_paths: n.n_paths.unwrap_or(md.n_paths),
        steps_per_year: n.steps_per_year.unwrap_or(md.steps_per_year),
        seed: n.seed.unwrap_or(md.seed),
        bridge_correction: n.bridge_correction.unwrap_or(md.bridge_correction),
    };
    ck.check("numerics", &["n_paths", "steps_per_year"], mc.validate())?;
    Ok(ScenarioFile {
        scenario,
        contract,
        pricing: PricingSpec {
            quad,
            series,
            fees: n.fee_approx.unwrap_or_default(),
            ..PricingSpec::default()
        },
        mc,
    })
}

/// Reads and parses a scenario file.
pub fn load(path: &str) -> Result<ScenarioFile, CliError> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{path}: {e}")))?;
    parse(path, &source)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[firm1]
log_distance = 0.8
sigma = 0.2

[firm2]
v0 = 2.0
k_barrier = 0.6
sigma = 0.3

[market]
r = 0.05
rho = 0.4

[cds]
recovery_underlying = 0.4
recovery_counterparty = 0.4
spread = 0.02
maturity = 5.0
"#;

    #[test]
    fn parses_defaults() {
        let s = parse("s.toml", GOOD).unwrap();
        assert!((s.scenario.firm1.log_distance() - 0.8).abs() < 1e-15);
        assert_eq!(s.mc, McConfig::default());
        assert!(matches!(s.contract, Contract::Cds(_)));
    }

    #[test]
    fn diagnostics_name_line_and_firm() {
        let bad = GOOD.replace("k_barrier = 0.6", "k_barrier = 2.5");
        let CliError::Invalid(msg) = parse("s.toml", &bad).unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("s.toml:7: [firm2] v0:"), "{msg}");
        assert!(msg.contains("firm2: v0 (2) must exceed k_barrier (2.5)"), "{msg}");
        let bad = GOOD.replace("rho = 0.4", "rho = 1.0");
        let CliError::Invalid(msg) = parse("s.toml", &bad).unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("s.toml:13: [market] rho"), "{msg}");
    }

    #[test]
    fn rejects_structural_problems() {
        let both = format!("{GOOD}\n[ftd]\nrecovery = 0.4\nmaturity = 5.0\n");
        assert!(parse("s.toml", &both).is_err());
        let typo = GOOD.replace("sigma = 0.2", "sigma = 0.2\nsigmaa = 1.0");
        let CliError::Invalid(msg) = parse("s.toml", &typo).unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("sigmaa"), "{msg}");
    }
}
