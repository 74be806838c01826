use std::io::Write;

use batchps_core::asymptotics::{busy_tail, m_tail, mtilde_tail, omega_tail, residual_busy_tail, residual_vs_full_ratio};
use batchps_core::{ModelParams, SpectralConstants};

use super::analytic_hq;
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{sci, Manifest};

/// Name/value table of the model constants and tail-law parameters.
pub fn table(p: &ModelParams, s: &Settings) -> Result<Vec<(&'static str, f64)>> {
    let c = SpectralConstants::new(p);
    let hq = analytic_hq(p, s)?;
    let omega = omega_tail(p, hq.value).map_err(|e| CliError::config(e.to_string()))?;
    Ok(vec![
        ("rho", p.rho()),
        ("rho_star", p.rho_star()),
        ("q", p.q()),
        ("mean_batch", p.mean_batch()),
        ("busy_mean", p.busy_mean()),
        ("jobs_mean", p.jobs_mean()),
        ("sigma_plus", c.sigma_plus),
        ("sigma_minus", c.sigma_minus),
        ("zeta_minus", c.zeta_minus),
        ("zeta_plus", c.zeta_plus),
        ("t_q", c.t_q),
        ("s_q", c.s_q),
        ("l_q", c.l_q),
        ("u_star", c.u_star),
        ("hq_ratio", c.hq_ratio()),
        ("r_q", c.r_q),
        ("kappa_q", c.kappa_q),
        ("k_q", c.k_q),
        ("h_q", hq.value),
        ("h_q_partial", hq.partial),
        ("h_q_remainder", hq.remainder),
        ("residual_vs_full_ratio", residual_vs_full_ratio(p)),
        ("busy_tail_prefactor", busy_tail(p).prefactor),
        ("residual_busy_tail_prefactor", residual_busy_tail(p).prefactor),
        ("m_tail_prefactor", m_tail(p).prefactor),
        ("mtilde_tail_prefactor", mtilde_tail(p).prefactor),
        ("j_tail_prefactor", c.k_q),
        ("omega_tail_prefactor", omega.prefactor),
    ])
}

/// Print the table; with `--out`, also write `constants.csv`.
pub fn run(s: &Settings, write_csv: bool, stdout: &mut dyn Write) -> Result<()> {
    let p = s.params()?;
    let rows = table(&p, s)?;
    for (name, v) in &rows {
        writeln!(stdout, "{name:<30} {}", sci(*v)).map_err(|e| CliError::io("<stdout>", e))?;
    }
    if write_csv {
        let dir = s.create_out_dir()?;
        Manifest::default().write_csv(
            dir,
            "constants.csv",
            &["name", "value"],
            rows.iter().map(|(n, v)| vec![n.to_string(), sci(*v)]),
        )?;
    }
    Ok(())
}
