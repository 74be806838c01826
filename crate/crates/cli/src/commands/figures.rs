//! Figure data: `J` laws for the light and heavy pairs (figures 3 and 4)
//! and `Ω` tails for the same pairs (figures 5 and 6).

use std::collections::BTreeMap;
use std::io::Write;

use batchps_core::asymptotics::{j_tail, omega_tail};
use batchps_core::series::j_pmf;
use batchps_core::{DiscretePmf, EmpiricalSummary, ModelParams, TailAsymptote, FIGURE_PAIRS};
use serde::Serialize;

use super::simulate::{omega_grid, simulate};
use super::{hq_for, HqReport, ParamsReport};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{sci, Manifest};

pub const J_HEADER: [&str; 6] = ["j", "sim_i_b", "sim_j", "sim_j_se", "exact_j", "approx_j"];
pub const OMEGA_HEADER: [&str; 4] = ["x", "ccdf_omega", "ccdf_omega_hat", "approx_omega"];

/// `(q, ρ*)` behind a figure.
pub fn figure_pair(figure: u8) -> (f64, f64) {
    match figure {
        3 | 5 => FIGURE_PAIRS[0],
        4 | 6 => FIGURE_PAIRS[1],
        _ => unreachable!("figures are validated at config time"),
    }
}

pub fn j_rows(sum: &EmpiricalSummary, exact: &DiscretePmf, law: &TailAsymptote) -> Vec<Vec<String>> {
    let top = sum.j.max_value().max(sum.i_b.max_value());
    (1..=top)
        .map(|j| {
            let f = sum.j.freq(j);
            vec![
                j.to_string(),
                sci(sum.i_b.freq(j)),
                sci(f),
                sci(sum.j.binomial_se(f)),
                sci(exact.prob(j)),
                sci(law.eval(j as f64)),
            ]
        })
        .collect()
}

pub fn omega_rows(sum: &EmpiricalSummary, law: &TailAsymptote) -> Vec<Vec<String>> {
    omega_grid(sum)
        .into_iter()
        .map(|x| vec![sci(x), sci(sum.ccdf_omega(x)), sci(sum.ccdf_omega_hat(x)), sci(law.eval(x))])
        .collect()
}

#[derive(Debug, Serialize)]
struct FigureEntry {
    figure: u8,
    file: String,
    params: ParamsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_q: Option<HqReport>,
}

#[derive(Debug, Serialize)]
struct FiguresSummary {
    seed: u64,
    replications: u64,
    figures: Vec<FigureEntry>,
    files: BTreeMap<String, String>,
}

pub fn run(s: &Settings, stdout: &mut dyn Write) -> Result<()> {
    if s.params.is_some() {
        return Err(CliError::config(
            "figures use fixed parameter pairs; drop --rho/--rho-star/--q (use simulate for other pairs)",
        ));
    }
    let dir = s.create_out_dir()?.to_path_buf();
    let mut manifest = Manifest::default();
    let mut entries = Vec::new();
    let mut figures = s.figures.clone();
    figures.sort_unstable();
    figures.dedup();

    for pair in FIGURE_PAIRS {
        let wanted: Vec<u8> = figures.iter().copied().filter(|&f| figure_pair(f) == pair).collect();
        if wanted.is_empty() {
            continue;
        }
        let (q, rho_star) = pair;
        let p = ModelParams::from_load(rho_star, q)?;
        let sim = simulate(p, s, 0)?;
        for f in wanted {
            let (file, h_q) = if f <= 4 {
                let exact = j_pmf(&p, &s.truncation(&p))?;
                let file = format!("fig{f}_j.csv");
                manifest.write_csv(&dir, &file, &J_HEADER, j_rows(&sim.summary, &exact, &j_tail(&p)))?;
                (file, None)
            } else {
                let hq = hq_for(&p, s, &sim.summary.j)?;
                let law = omega_tail(&p, hq.value).map_err(|e| CliError::config(e.to_string()))?;
                let file = format!("fig{f}_omega.csv");
                manifest.write_csv(&dir, &file, &OMEGA_HEADER, omega_rows(&sim.summary, &law))?;
                (file, Some(hq))
            };
            writeln!(stdout, "figure {f}: {file} (q = {q}, rho* = {rho_star})")
                .map_err(|e| CliError::io("<stdout>", e))?;
            entries.push(FigureEntry {
                figure: f,
                file,
                params: (&p).into(),
                h_q,
            });
        }
    }
    let summary = FiguresSummary {
        seed: s.seed,
        replications: s.replications,
        figures: entries,
        files: manifest.files.clone(),
    };
    Manifest::default().write_json(&dir, "figures.json", &summary)?;
    Ok(())
}
