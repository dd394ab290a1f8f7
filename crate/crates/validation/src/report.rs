//! Plot-ready CSV outputs.

use std::io::Write;

use serde::Serialize;

use crate::buckling::EnvelopeResult;
use crate::error::Result;
use crate::michell::MichellResult;

#[derive(Serialize)]
struct EnvelopeRow {
    n: usize,
    s_over_sstar: f64,
    f_measured: f64,
    f_analytic: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    n: usize,
    avg_error: f64,
    phi0: f64,
    s_star: f64,
}

/// One row per envelope sample: `n,s_over_sstar,f_measured,f_analytic`.
pub fn write_envelope_csv<W: Write>(results: &[EnvelopeResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        for s in &r.samples {
            out.serialize(EnvelopeRow {
                n: r.n,
                s_over_sstar: s.s_over_sstar,
                f_measured: s.f_measured,
                f_analytic: s.f_analytic,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per discretization: `n,avg_error,phi0,s_star`.
pub fn write_buckling_summary_csv<W: Write>(results: &[EnvelopeResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(SummaryRow {
            n: r.n,
            avg_error: r.avg_error,
            phi0: r.phi0,
            s_star: r.s_star,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// `beta_over_alpha,theta_measured,theta_analytic,deviation_pct`.
pub fn write_michell_csv<W: Write>(results: &[MichellResult], w: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        beta_over_alpha: f64,
        theta_measured: f64,
        theta_analytic: f64,
        deviation_pct: f64,
    }
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(Row {
            beta_over_alpha: r.beta_over_alpha,
            theta_measured: r.theta_c_measured,
            theta_analytic: r.theta_c_analytic,
            deviation_pct: r.deviation_pct,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// True if the values strictly decrease.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}
