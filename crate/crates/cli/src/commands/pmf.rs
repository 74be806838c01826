use std::io::Write;

use batchps_core::asymptotics::{j_tail, m_tail, mtilde_tail};
use batchps_core::series::{j_conditional_pmf, j_pmf, m_pmf, mtilde_pmf_composition, mtilde_pmf_corollary};
use batchps_core::{DiscretePmf, TailAsymptote};
use serde::Serialize;

use super::ParamsReport;
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{sci, sci_opt, Manifest};

pub const PMF_HEADER: [&str; 4] = ["index", "value", "asymptote", "ratio"];

/// Rows `index,value,asymptote,ratio`; the last two are empty without a law.
pub fn pmf_rows<'a>(pmf: &'a DiscretePmf, law: Option<&'a TailAsymptote>) -> impl Iterator<Item = Vec<String>> + 'a {
    pmf.iter().map(move |(k, v)| {
        let a = law.map(|l| l.eval(k as f64));
        let ratio = a.filter(|&a| a > 0.0).map(|a| v / a);
        vec![k.to_string(), sci(v), sci_opt(a), sci_opt(ratio)]
    })
}

#[derive(Debug, Serialize)]
struct PmfSummary {
    params: ParamsReport,
    m_max: usize,
    k_max: usize,
    b_max: usize,
    tail_bound: f64,
    tail_mass: std::collections::BTreeMap<String, f64>,
    /// Largest termwise gap between the two `M̃` routes.
    route_max_abs_diff: f64,
    identity_residual: f64,
    closed_by_identity: bool,
    conditional: (u64, u64),
    files: std::collections::BTreeMap<String, String>,
}

pub fn run(s: &Settings, stdout: &mut dyn Write) -> Result<()> {
    let p = s.params()?;
    let trunc = s.truncation(&p);
    let dir = s.create_out_dir()?.to_path_buf();
    let mut manifest = Manifest::default();

    let m = m_pmf(&p, trunc.m_max, trunc.tail_bound)?;
    let cor = mtilde_pmf_corollary(&p, trunc.m_max, trunc.tail_bound)?;
    let comp = mtilde_pmf_composition(&p, trunc.m_max, trunc.tail_bound)?;
    let j = j_pmf(&p, &trunc)?;
    let cond = j_conditional_pmf(s.b, s.m).map_err(|e| CliError::config(e.to_string()))?;

    let (ml, mtl, jl) = (m_tail(&p), mtilde_tail(&p), j_tail(&p));
    manifest.write_csv(&dir, "m.csv", &PMF_HEADER, pmf_rows(&m, Some(&ml)))?;
    manifest.write_csv(&dir, "mtilde_corollary3.csv", &PMF_HEADER, pmf_rows(&cor.pmf, Some(&mtl)))?;
    manifest.write_csv(&dir, "mtilde_composition.csv", &PMF_HEADER, pmf_rows(&comp, Some(&mtl)))?;
    let mut route_max = 0.0f64;
    let routes: Vec<Vec<String>> = cor
        .pmf
        .iter()
        .map(|(k, a)| {
            let b = comp.prob(k);
            route_max = route_max.max((a - b).abs());
            vec![k.to_string(), sci(a), sci(b), sci((a - b).abs())]
        })
        .collect();
    manifest.write_csv(
        &dir,
        "mtilde_routes.csv",
        &["index", "corollary3", "composition", "abs_diff"],
        routes,
    )?;
    manifest.write_csv(&dir, "j.csv", &PMF_HEADER, pmf_rows(&j, Some(&jl)))?;
    let cond_name = format!("j_given_b{}_m{}.csv", s.b, s.m);
    manifest.write_csv(&dir, &cond_name, &PMF_HEADER, pmf_rows(&cond, None))?;

    let summary = PmfSummary {
        params: (&p).into(),
        m_max: trunc.m_max,
        k_max: trunc.k_max,
        b_max: trunc.b_max,
        tail_bound: trunc.tail_bound,
        tail_mass: [&m, &cor.pmf, &comp, &j, &cond]
            .iter()
            .map(|d| (d.label.clone(), d.tail_mass))
            .collect(),
        route_max_abs_diff: route_max,
        identity_residual: cor.identity_residual,
        closed_by_identity: cor.closed_by_identity,
        conditional: (s.b, s.m),
        files: manifest.files.clone(),
    };
    Manifest::default().write_json(&dir, "pmf_summary.json", &summary)?;

    let w = |e| CliError::io("<stdout>", e);
    writeln!(stdout, "truncation m_max={} k_max={} b_max={} tail_bound={}", trunc.m_max, trunc.k_max, trunc.b_max, sci(trunc.tail_bound)).map_err(w)?;
    for (label, mass) in &summary.tail_mass {
        writeln!(stdout, "tail_mass {label:<24} {}", sci(*mass)).map_err(w)?;
    }
    writeln!(stdout, "mtilde routes max |diff| {}", sci(route_max)).map_err(w)?;
    writeln!(stdout, "identity residual {}", sci(cor.identity_residual)).map_err(w)?;
    writeln!(stdout, "wrote {} files to {}", manifest.files.len() + 1, dir.display()).map_err(w)?;
    Ok(())
}
