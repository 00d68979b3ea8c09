mod common;

use proptest::prelude::*;

use common::*;
use riskdesign::contract::agent_objective;
use riskdesign::diagnostics::{check_c3, check_mlr, CheckStatus};
use riskdesign::model::*;
use riskdesign::risk::RiskMeasure;
use riskdesign::transport::{project_simplex, w1, w1_dual};

const TOL: f64 = 1e-9;

fn measure() -> impl Strategy<Value = RiskMeasure> {
    prop_oneof![
        Just(RiskMeasure::Expectation),
        (0.01f64..=1.0).prop_map(|kappa| RiskMeasure::SemiDeviation { kappa }),
        (0.01f64..=1.0).prop_map(|alpha| RiskMeasure::AverageValueAtRisk { alpha }),
    ]
}

fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|mut v| {
        let s: f64 = v.iter().sum();
        if s == 0.0 {
            v[0] = 1.0;
            return v;
        }
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Random costs and probabilities of a shared random length.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
            probs(n),
        )
    })
}

fn simplex_pair_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| (simplex(n), simplex(n), simplex(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn monotone(rho in measure(), (z, bump, p) in instance()) {
        let bigger: Vec<f64> = z.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
        prop_assert!(rho.evaluate(&z, &p).unwrap() <= rho.evaluate(&bigger, &p).unwrap() + TOL);
    }

    #[test]
    fn convex(rho in measure(), (z1, z2, p) in instance(), l in 0.0f64..=1.0) {
        let mix: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        let lhs = rho.evaluate(&mix, &p).unwrap();
        let rhs = l * rho.evaluate(&z1, &p).unwrap() + (1.0 - l) * rho.evaluate(&z2, &p).unwrap();
        prop_assert!(lhs <= rhs + TOL);
    }

    #[test]
    fn translation_equivariant(rho in measure(), (z, _, p) in instance(), a in -5.0f64..5.0) {
        let shifted: Vec<f64> = z.iter().map(|v| v + a).collect();
        let d = rho.evaluate(&shifted, &p).unwrap() - rho.evaluate(&z, &p).unwrap() - a;
        prop_assert!(d.abs() <= TOL);
    }

    #[test]
    fn positively_homogeneous(rho in measure(), (z, _, p) in instance(), t in 0.0f64..5.0) {
        let scaled: Vec<f64> = z.iter().map(|v| v * t).collect();
        let d = rho.evaluate(&scaled, &p).unwrap() - t * rho.evaluate(&z, &p).unwrap();
        prop_assert!(d.abs() <= TOL);
    }

    #[test]
    fn envelope_attains_value(rho in measure(), (z, _, p) in instance()) {
        let zeta = rho.envelope_density(&z, &p).unwrap().weights;
        let ez: f64 = zeta.iter().zip(&z).zip(&p).map(|((a, b), c)| a * b * c).sum();
        prop_assert!((ez - rho.evaluate(&z, &p).unwrap()).abs() <= TOL);
        prop_assert!((oracle_risk(&rho, &z, &p) - rho.evaluate(&z, &p).unwrap()).abs() <= TOL);
    }

    #[test]
    fn unique_maximizer_matches_lp(rho in measure(), (z, _, p) in instance()) {
        let closed = rho.envelope_density(&z, &p).unwrap();
        prop_assume!(!closed.tie);
        let lp = rho.envelope_lp_oracle(&z, &p).unwrap();
        prop_assert!((lp.objective - rho.evaluate(&z, &p).unwrap()).abs() <= 1e-8);
        for (a, b) in closed.weights.iter().zip(&lp.density.weights) {
            prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", closed.weights, lp.density.weights);
        }
    }

    #[test]
    fn w1_is_a_metric((a, b, c) in simplex_pair_triple()) {
        let (a, b, c) = (dist(&a), dist(&b), dist(&c));
        let ab = w1(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(w1(&a, &a).unwrap() == 0.0);
        prop_assert!((ab - w1(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(w1(&a, &c).unwrap() <= ab + w1(&b, &c).unwrap() + 1e-12);
        prop_assert!((ab - oracle_w1(a.weights(), b.weights())).abs() <= 1e-12);
    }

    #[test]
    fn w1_dual_feasible_and_tight((a, b, _) in simplex_pair_triple()) {
        let (a, b) = (dist(&a), dist(&b));
        let d = w1_dual(&a, &b).unwrap();
        let n = d.b.len();
        prop_assert_eq!(d.b[n - 1], 0.0);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((d.b[i] - d.b[j]).abs() <= (i as f64 - j as f64).abs());
            }
        }
        prop_assert!((d.value - w1(&a, &b).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn projection_lands_on_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let p = project_simplex(&v).unwrap();
        let s: f64 = p.weights().iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!(p.weights().iter().all(|x| *x >= 0.0));
        let again = project_simplex(p.weights()).unwrap();
        for (x, y) in again.weights().iter().zip(p.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agent_cost_falls_with_coverage(
        frac in prop::collection::vec(0.0f64..=1.0, 3),
        extra in prop::collection::vec(0.0f64..=1.0, 3),
        mu2 in 0.0f64..=1.0,
        x in prop::sample::select(vec![0.0, 1.0]),
    ) {
        let sc = moral_hazard();
        let grid = sc.model().grid();
        let w: Vec<f64> = frac.iter().zip(GRID).map(|(f, xi)| f * xi).collect();
        let more: Vec<f64> = w.iter().zip(&extra).zip(GRID).map(|((w, e), xi)| w + e * (xi - w)).collect();
        let mu = dist(&[1.0 - mu2, mu2]);
        let base = agent_objective(&sc, &mu, &Contract::tabular(grid, w).unwrap(), x).unwrap();
        let covered = agent_objective(&sc, &mu, &Contract::tabular(grid, more).unwrap(), x).unwrap();
        prop_assert!(covered <= base + TOL);
    }

    #[test]
    fn mlr_reduces_c3_for_semideviation(
        p_low in probs(3),
        ratio in prop::collection::vec(0.2f64..5.0, 3),
        kappas in prop::collection::vec(0.01f64..=1.0, 1..4),
        raw_mu in prop::collection::vec(0.01f64..1.0, 3),
        frac in prop::collection::vec(0.0f64..=1.0, 3),
        x in 0.0f64..=1.0,
        alpha in 0.0f64..5.0,
        beta in 0.01f64..5.0,
    ) {
        // p_high / p_low increasing in the loss keeps (∂P/∂x)/P increasing
        let mut r = ratio.clone();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let high: Vec<f64> = p_low.iter().zip(&r).map(|(p, q)| p * q).collect();
        let s: f64 = high.iter().sum();
        let high: Vec<f64> = high.iter().map(|v| v / s).collect();
        let grid = OutcomeGrid::new(GRID.to_vec()).unwrap();
        let model = OutcomeModel::linear(grid.clone(), p_low.clone(), high).unwrap();
        prop_assume!(check_mlr(&model, x).unwrap());
        let n = kappas.len();
        let types = TypeSpace::new(kappas.iter().map(|k| RiskMeasure::SemiDeviation { kappa: *k }).collect()).unwrap();
        let mu_w: Vec<f64> = raw_mu[..n].to_vec();
        let total: f64 = mu_w.iter().sum();
        let mu = dist(&mu_w.iter().map(|v| v / total).collect::<Vec<_>>());
        let sc = Scenario::new(
            model,
            types,
            mu.clone(),
            DisutilitySpec::new(LossShape::Quadratic, 1.0, InvestmentCost::Linear).unwrap(),
            3.0,
            1.0,
            ActionSet::Interval { lo: 0.0, hi: 1.0 },
        )
        .unwrap();
        let w: Vec<f64> = frac.iter().zip(GRID).map(|(f, xi)| f * xi).collect();
        let c = Contract::tabular(&grid, w).unwrap();
        let report = check_c3(&sc, &mu, &c, x, alpha, beta).unwrap();
        prop_assert_ne!(report.status, CheckStatus::Fail, "{:?}", report);
    }
}
