use batchps_core::asymptotics::{busy_tail, j_tail, m_tail, mtilde_tail, residual_busy_tail, residual_vs_full_ratio};
use batchps_core::series::{j_conditional_pmf, m_pmf, mtilde_pmf_composition, mtilde_pmf_corollary};
use batchps_core::{ModelParams, SpectralConstants};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.01f64..0.99, 0.01f64..0.99).prop_map(|(rho_star, q)| ModelParams::from_load(rho_star, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn transforms_are_normalized(p in params()) {
        let one = [
            p.busy_lt(0.0).unwrap(),
            p.residual_busy_lt(0.0).unwrap(),
            p.interdeparture_lt(0.0).unwrap(),
            p.jobs_pgf(1.0).unwrap(),
            p.residual_jobs_pgf(1.0).unwrap(),
            p.phi_pgf(1.0).unwrap(),
        ];
        for v in one {
            prop_assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn singularities_are_ordered(p in params()) {
        let c = SpectralConstants::new(&p);
        prop_assert!(c.sigma_minus < c.sigma_plus && c.sigma_plus < 0.0);
        prop_assert!(1.0 < c.zeta_minus && c.zeta_minus < c.zeta_plus);
        prop_assert!(c.u_star_gap > 0.0 && c.u_star < c.zeta_minus);
        prop_assert!(c.hq_ratio() < 1.0);
        prop_assert!(c.r_q * (p.rho() + p.q()) < 1.0);
        prop_assert!(c.k_q > 0.0 && c.kappa_q > 0.0);
        prop_assert!(c.s_q < 0.0 && c.l_q < 0.0);
        prop_assert!(residual_vs_full_ratio(&p) > 1.0);
    }

    #[test]
    fn tail_rates_are_bit_identical(p in params()) {
        let c = SpectralConstants::new(&p);
        prop_assert_eq!(busy_tail(&p).rate, c.sigma_plus);
        prop_assert_eq!(residual_busy_tail(&p).rate, c.sigma_plus);
        for law in [m_tail(&p), mtilde_tail(&p), j_tail(&p)] {
            prop_assert_eq!(law.rate, 1.0 / c.zeta_minus);
            prop_assert!(law.prefactor > 0.0);
        }
    }

    #[test]
    fn transforms_decrease(p in params(), s in 0.0f64..5.0, ds in 0.01f64..1.0) {
        prop_assert!(p.busy_lt(s + ds).unwrap() < p.busy_lt(s).unwrap());
        prop_assert!(p.residual_busy_lt(s + ds).unwrap() < p.residual_busy_lt(s).unwrap());
        prop_assert!(p.interdeparture_lt(s + ds).unwrap() < p.interdeparture_lt(s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn mtilde_routes_agree(p in params()) {
        let a = mtilde_pmf_corollary(&p, 200, f64::INFINITY).unwrap();
        let b = mtilde_pmf_composition(&p, 200, f64::INFINITY).unwrap();
        prop_assert!(a.identity_residual.abs() < 1e-10);
        for m in 1..=200 {
            prop_assert!((a.pmf.prob(m) - b.prob(m)).abs() <= 1e-10, "m = {}", m);
            prop_assert!((0.0..=1.0).contains(&b.prob(m)));
        }
    }

    #[test]
    fn conditional_j_sums_to_one(b in 1u64..60, extra in 0u64..3000) {
        let m = b + extra;
        let pmf = j_conditional_pmf(b, m).unwrap();
        prop_assert!(pmf.tail_mass.abs() < 1e-12);
        let mean = b as f64 * (m as f64 + 1.0) / (b as f64 + 1.0);
        prop_assert!((pmf.mean() - mean).abs() < 1e-10 * mean);
    }
}

#[test]
fn m_moment_matches_derivative() {
    for (q, rho_star) in batchps_core::FIGURE_PAIRS {
        let p = ModelParams::from_load(rho_star, q).unwrap();
        let t = batchps_core::Truncation::adaptive(&p, 1e-10);
        let m = m_pmf(&p, t.m_max, 1e-10).unwrap();
        // the neglected mass sits beyond m_max
        let bound = m.tail_mass.abs() * 10.0 * t.m_max as f64;
        assert!((m.mean() - p.jobs_mean()).abs() < 1e-6 + bound, "q = {q}");
    }
}
