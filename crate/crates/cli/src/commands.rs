use wedge_credit::jointlaw::{
    hitting_density_horizontal, hitting_density_slanted, normalization_check, survival_density, WedgeDensityParams,
};
use wedge_credit::mc::{mc_hitting_histogram, mc_legs, Boundary, McEstimate};
use wedge_credit::model::{CdsContract, FtdContract};
use wedge_credit::pricing::{cds_fair_value, cds_par_spread, fee_annuity, ftd_default_leg, ftd_fair_spread, LegValue};
use wedge_credit::quadrature::rect_average;

use crate::report::{Format, Report};
use crate::scenario::{Contract, ScenarioFile};
use crate::CliError;

fn leg(report: &mut Report, name: &str, leg: &LegValue) {
    report.num(format!("{name}.value"), leg.value);
    report.num(format!("{name}.error_estimate"), leg.error_estimate);
    if leg.breakdown.len() > 1 {
        for (part, v) in &leg.breakdown {
            report.num(format!("{name}.{part}"), *v);
        }
    }
}

fn geometry(report: &mut Report, sf: &ScenarioFile) -> Result<(), CliError> {
    let w = sf.scenario.wedge()?;
    report
        .num("wedge.r0", w.r0)
        .num("wedge.theta0", w.theta0)
        .num("wedge.angle", w.wedge_angle)
        .num("wedge.phi1", w.phi1)
        .num("wedge.phi2", w.phi2);
    Ok(())
}

fn cds_contract(sf: &ScenarioFile) -> Result<CdsContract, CliError> {
    match sf.contract {
        Contract::Cds(c) => Ok(c),
        Contract::Ftd(_) => Err(CliError::Invalid(
            "the scenario defines [ftd]; price-cds needs [cds]".into(),
        )),
    }
}

fn ftd_contract(sf: &ScenarioFile) -> Result<FtdContract, CliError> {
    match sf.contract {
        Contract::Ftd(c) => Ok(c),
        Contract::Cds(_) => Err(CliError::Invalid(
            "the scenario defines [cds]; price-ftd needs [ftd]".into(),
        )),
    }
}

pub fn price_cds(sf: &ScenarioFile) -> Result<Report, CliError> {
    let c = cds_contract(sf)?;
    let s = &sf.scenario;
    let v = cds_fair_value(&s.firm1, &s.firm2, &s.market, &c, &sf.pricing)?;
    let par = cds_par_spread(&s.firm1, &s.firm2, &s.market, &c, &sf.pricing)?;
    let mut r = Report::default();
    r.text("verb", "price-cds");
    geometry(&mut r, sf)?;
    leg(&mut r, "standard_leg", &v.standard);
    leg(&mut r, "counterparty_leg", &v.counterparty);
    leg(&mut r, "fee_leg", &v.fee);
    r.num("fair_value.value", v.value)
        .num("fair_value.error_estimate", v.error_estimate)
        .num("par_spread.value", par.spread)
        .num(
            "par_spread.error_estimate",
            par.valuation.error_estimate / par.valuation.fee.value.max(1e-300) * par.spread,
        )
        .num("par_spread.residual", par.residual);
    Ok(r)
}

pub fn price_ftd(sf: &ScenarioFile) -> Result<Report, CliError> {
    let c = ftd_contract(sf)?;
    let s = &sf.scenario;
    let q = ftd_fair_spread(&s.firm1, &s.firm2, &s.market, &c, &sf.pricing)?;
    let mut r = Report::default();
    r.text("verb", "price-ftd");
    geometry(&mut r, sf)?;
    leg(&mut r, "default_leg", &q.default_leg);
    leg(&mut r, "fee_annuity", &q.annuity);
    r.num("fair_spread.value", q.spread)
        .num("fair_spread.error_estimate", q.error_estimate);
    Ok(r)
}

/// Inclusive evenly spaced grid from `start:end:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("grid '{spec}' must look like start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !(start > 0.0) || !(end >= start) {
        return Err(CliError::Invalid(format!(
            "grid '{spec}' needs 0 < start <= end and count >= 1"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect())
}

/// Densities on a `(t, coord)` grid, t-major. The survival density is taken
/// on the ray through the starting point.
pub fn density(sf: &ScenarioFile, ts: &[f64], coords: &[f64], format: Format) -> Result<String, CliError> {
    let p = WedgeDensityParams::with_tol(sf.scenario.wedge()?, sf.pricing.series);
    let mut out = String::new();
    if format == Format::Text {
        out.push_str("t,coord,f_horizontal,f_slanted,f_survival\n");
    }
    for &t in ts {
        for &x in coords {
            let fh = hitting_density_horizontal(t, x, &p)?;
            let fs = hitting_density_slanted(t, x, &p)?;
            let fv = survival_density(x, p.wedge.theta0, t, &p)?;
            match format {
                Format::Text => out.push_str(&format!("{t},{x},{fh:e},{fs:e},{fv:e}\n")),
                Format::Json => out.push_str(&format!(
                    "{}\n",
                    serde_json::json!({"t": t, "coord": x, "f_horizontal": fh, "f_slanted": fs, "f_survival": fv})
                )),
            }
        }
    }
    Ok(out)
}

const Z_LIMIT: f64 = 3.0;

/// Records one closed-form vs MC comparison; returns whether it is flagged.
fn compare(r: &mut Report, name: &str, closed: f64, closed_err: f64, mc: &McEstimate) -> bool {
    let se = (mc.std_error * mc.std_error + closed_err * closed_err).sqrt();
    let z = if closed == mc.mean {
        0.0
    } else {
        (closed - mc.mean) / se
    };
    let flagged = !(z.abs() <= Z_LIMIT);
    r.num(format!("{name}.closed_form"), closed)
        .num(format!("{name}.mc_mean"), mc.mean)
        .num(format!("{name}.mc_std_error"), mc.std_error)
        .num(format!("{name}.z"), z)
        .text(format!("{name}.status"), if flagged { "FLAGGED" } else { "ok" });
    flagged
}

/// Closed-form vs Monte Carlo report and the number of flagged checks.
/// `corrupt_angle` scales the wedge angle used by the closed-form joint law
/// (a hook for testing the failure path).
pub fn validate(sf: &ScenarioFile, corrupt_angle: Option<f64>) -> Result<(Report, u64), CliError> {
    let s = &sf.scenario;
    let (f1, f2, mkt) = (&s.firm1, &s.firm2, &s.market);
    let maturity = sf.contract.maturity();
    let mut wedge = s.wedge()?;
    if let Some(k) = corrupt_angle {
        wedge.wedge_angle *= k;
    }
    let p = WedgeDensityParams::with_tol(wedge, sf.pricing.series);

    let mut r = Report::default();
    r.text("verb", "validate")
        .int("seed", sf.mc.seed)
        .int("n_paths", sf.mc.n_paths as u64)
        .int("steps_per_year", sf.mc.steps_per_year as u64)
        .flag("bridge_correction", sf.mc.bridge_correction);
    let mut flagged = 0u64;

    let cds = match sf.contract {
        Contract::Cds(c) => c,
        Contract::Ftd(f) => CdsContract {
            notional: f.notional,
            recovery_underlying: f.recovery,
            recovery_counterparty: 1.0,
            spread: 0.0,
            maturity,
        },
    };
    let legs = mc_legs(f1, f2, mkt, &cds, &sf.mc, sf.pricing.fees)?;
    match sf.contract {
        Contract::Cds(c) => {
            let v = cds_fair_value(f1, f2, mkt, &c, &sf.pricing)?;
            flagged += compare(
                &mut r,
                "standard_leg",
                v.standard.value,
                v.standard.error_estimate,
                &legs.standard_leg(&c),
            ) as u64;
            flagged += compare(
                &mut r,
                "counterparty_leg",
                v.counterparty.value,
                v.counterparty.error_estimate,
                &legs.counterparty_leg(&c),
            ) as u64;
            flagged += compare(&mut r, "fee_leg", v.fee.value, v.fee.error_estimate, &legs.fee_leg(&c)) as u64;
            flagged += compare(&mut r, "fair_value", v.value, v.error_estimate, &legs.cds_value(&c)) as u64;
        }
        Contract::Ftd(f) => {
            let d = ftd_default_leg(f1, f2, mkt, &f, &sf.pricing)?;
            let a = fee_annuity(f1, f2, mkt, f.notional, f.maturity, &sf.pricing)?;
            let q = ftd_fair_spread(f1, f2, mkt, &f, &sf.pricing)?;
            let mc_annuity = McEstimate {
                mean: legs.annuity().mean * f.notional,
                std_error: legs.annuity().std_error * f.notional,
                ..legs.annuity()
            };
            flagged += compare(&mut r, "ftd_default_leg", d.value, d.error_estimate, &legs.ftd_leg(&f)) as u64;
            flagged += compare(&mut r, "fee_annuity", a.value, a.error_estimate, &mc_annuity) as u64;
            flagged += compare(&mut r, "ftd_spread", q.spread, q.error_estimate, &legs.ftd_spread(&f)) as u64;
        }
    }

    let part = normalization_check(maturity, &p, &sf.pricing.quad)?;
    flagged += compare(
        &mut r,
        "p_firm1_first",
        part.firm1_first.value,
        part.firm1_first.error,
        &legs.firm1_first(),
    ) as u64;
    flagged += compare(
        &mut r,
        "p_firm2_first",
        part.firm2_first.value,
        part.firm2_first.error,
        &legs.firm2_first(),
    ) as u64;
    flagged += compare(
        &mut r,
        "p_survival",
        part.survival.value,
        part.survival.error,
        &legs.survival(),
    ) as u64;
    r.num("partition.sum", part.sum());

    let bins = 8;
    let t_edges: Vec<f64> = (0..=bins).map(|i| maturity * i as f64 / bins as f64).collect();
    let reach = wedge.r0 + wedge.drift_norm_sq().sqrt() * maturity + 4.0 * maturity.sqrt();
    let x_edges: Vec<f64> = (0..=bins).map(|i| reach * i as f64 / bins as f64).collect();
    for (boundary, name) in [
        (Boundary::Horizontal, "histogram_horizontal"),
        (Boundary::Slanted, "histogram_slanted"),
    ] {
        let h = mc_hitting_histogram(boundary, f1, f2, mkt, maturity, &t_edges, &x_edges, &sf.mc)?;
        let (mut tested, mut outside) = (0u64, 0u64);
        for i in 0..bins {
            for j in 0..bins {
                if h.counts[i][j] < 50 {
                    continue;
                }
                let avg = rect_average(
                    |t, x| match boundary {
                        Boundary::Horizontal => hitting_density_horizontal(t, x, &p),
                        Boundary::Slanted => hitting_density_slanted(t, x, &p),
                    },
                    (t_edges[i], t_edges[i + 1]),
                    (x_edges[j], x_edges[j + 1]),
                )?;
                tested += 1;
                if (avg - h.density[i][j]).abs() > Z_LIMIT * h.std_error[i][j] {
                    outside += 1;
                }
            }
        }
        // Allow the 5% of bins that may fall outside by chance.
        let bad = tested == 0 || outside as f64 > 0.05 * tested as f64;
        r.int(format!("{name}.bins_tested"), tested)
            .int(format!("{name}.bins_outside_3se"), outside)
            .text(format!("{name}.status"), if bad { "FLAGGED" } else { "ok" });
        flagged += bad as u64;
    }
    r.int("flagged", flagged)
        .text("status", if flagged == 0 { "pass" } else { "fail" });
    Ok((r, flagged))
}
