use std::sync::Arc;

use super::*;
use crate::acquisition::{ei_cf_mc, FnOuter};
use crate::gp::KernelHyperparams;
use crate::problems::langermann;

/// `h(x) = x − (0.3, 0.6)`, `g(y) = −‖y‖²`; maximum 0 at `(0.3, 0.6)`.
fn bowl() -> CompositeProblem {
    CompositeProblem::new(
        "bowl",
        BoxDomain::cube(2, 0.0, 1.0).unwrap(),
        2,
        Arc::new(|x: &[f64]| vec![x[0] - 0.3, x[1] - 0.6]),
        Arc::new(FnOuter::with_grad(
            2,
            |y: &[f64]| -(y[0] * y[0] + y[1] * y[1]),
            |y: &[f64]| vec![-2.0 * y[0], -2.0 * y[1]],
        )),
    )
    .with_optimum(0.0, Some(vec![0.3, 0.6]))
}

/// One-dimensional problem with `g` the identity.
fn wave() -> CompositeProblem {
    CompositeProblem::new(
        "wave",
        BoxDomain::cube(1, 0.0, 1.0).unwrap(),
        1,
        Arc::new(|x: &[f64]| vec![(6.0 * x[0]).sin() + 0.5 * x[0]]),
        Arc::new(Linear::identity()),
    )
    .with_optimum(1.0, None)
}

fn quick() -> BoConfig {
    BoConfig {
        ensemble_size: 2,
        sga: SgaConfig {
            restarts: 3,
            steps_per_restart: 30,
            grad_samples_per_step: 32,
            final_ranking_samples: 512,
            ..SgaConfig::default()
        },
        recommend_samples: 256,
        ei_restarts: 3,
        ..BoConfig::default()
    }
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        assert_eq!(m.to_string(), m.name());
        assert_eq!(m.is_composite(), m.name().ends_with("_cf"));
        assert_eq!(
            m.model_kind() == ModelKind::MultiOutputOnH,
            m.is_composite()
        );
    }
    assert!("nosuch".parse::<Method>().is_err());
}

#[test]
fn initial_design_size_and_replay() {
    let cube4 = BoxDomain::cube(4, 0.0, 1.0).unwrap();
    assert_eq!(initial_design(&cube4, &mut NoiseStream::new(1)).len(), 10);
    let lang = langermann();
    let design = initial_design(&lang.domain, &mut NoiseStream::new(2));
    assert_eq!(design.len(), 6);
    assert!(design.iter().all(|x| lang.domain.contains(x)));
    for i in 0..design.len() {
        for j in 0..i {
            assert!(max_abs_diff(&design[i], &design[j]) > DUPLICATE_TOLERANCE);
        }
    }
    assert_eq!(design, initial_design(&lang.domain, &mut NoiseStream::new(2)));
}

#[test]
fn random_step_grows_state_by_one() {
    let p = bowl();
    let cfg = quick();
    for method in [Method::Random, Method::RandomCf] {
        let design = initial_design(&p.domain, &mut NoiseStream::new(3));
        let mut state = BoState::new(&p, method, &design, 3, &cfg).unwrap();
        assert_eq!(state.h_evaluations, 6);
        bo_step(&mut state, &p, &cfg).unwrap();
        assert_eq!(state.xs.len(), 7);
        assert_eq!(state.fs.len(), 7);
        assert_eq!(state.h_evaluations, 7);
        assert_eq!(state.iteration(), 1);
        assert_eq!(state.model().num_train(), 7);
        assert_eq!(state.model().ensemble_size(), 2);
    }
}

#[test]
fn classical_methods_never_see_h() {
    let p = bowl();
    let cfg = quick();
    let design = initial_design(&p.domain, &mut NoiseStream::new(4));
    for method in Method::ALL {
        let mut state = BoState::new(&p, method, &design, 4, &cfg).unwrap();
        bo_step(&mut state, &p, &cfg).unwrap();
        if method.is_composite() {
            assert_eq!(state.hs.len(), state.xs.len());
            assert_eq!(state.model().output_dim(), 2);
        } else {
            assert!(state.hs.is_empty());
            assert_eq!(state.model().output_dim(), 1);
        }
        for (x, f) in state.xs.iter().zip(&state.fs) {
            assert_eq!(*f, p.f(x));
        }
    }
}

#[test]
fn classical_ei_matches_closed_form_and_monte_carlo() {
    let p = wave();
    let cfg = quick();
    let design = initial_design(&p.domain, &mut NoiseStream::new(5));
    let state = BoState::new(&p, Method::Ei, &design, 5, &cfg).unwrap();
    let model = state.model();
    let f_star = state.incumbent.f_star;
    let draws = NoiseStream::new(6).normal_draws(1 << 14, 1);
    for i in 0..=50 {
        let x = [i as f64 / 50.0];
        let ei = expected_improvement(model, f_star, &x);
        let mut by_hand = 0.0;
        let mut mc = 0.0;
        let mut se2 = 0.0;
        for e in 0..model.ensemble_size() {
            let (mu, var) = model.mean_and_variance(&x, e);
            by_hand += ei_closed_form(mu[0] - f_star, var[0].sqrt());
            let est = ei_cf_mc(&model.posterior(&x, e), &Linear::identity(), f_star, &draws).unwrap();
            mc += est.value;
            se2 += est.std_error * est.std_error;
        }
        let k = model.ensemble_size() as f64;
        assert!((ei - by_hand / k).abs() <= 1e-15 * (1.0 + ei));
        // far tails hold no draws, hence the absolute slack
        assert!((ei - mc / k).abs() <= 4.0 * se2.sqrt() / k + 1e-6, "x={x:?} ei={ei} mc={} se={}", mc / k, se2.sqrt() / k);
    }
}

#[test]
fn proposals_avoid_evaluated_points() {
    let p = bowl();
    let cfg = quick();
    let design = initial_design(&p.domain, &mut NoiseStream::new(7));
    for method in Method::ALL {
        let state = BoState::new(&p, method, &design, 7, &cfg).unwrap();
        let x = propose(&state, &p, &cfg).unwrap();
        assert!(p.domain.contains(&x));
        assert!(state.xs.iter().all(|e| max_abs_diff(e, &x) > MIN_SEPARATION));
    }
}

#[test]
fn recommendation_with_evaluated_optimum() {
    let p = bowl();
    let cfg = quick();
    let mut design = initial_design(&p.domain, &mut NoiseStream::new(8));
    design.push(vec![0.3, 0.6]);
    for method in [Method::EiCf, Method::Ei] {
        let state = BoState::new(&p, method, &design, 8, &cfg).unwrap();
        let rec = recommend(&state, &p, &cfg).unwrap();
        let regret = p.regret(&rec).unwrap();
        let others = design[..design.len() - 1]
            .iter()
            .map(|x| p.regret(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(regret <= others, "{method}: {regret} vs {others}");
        assert!(regret < 1e-3, "{method}: {regret}");
    }
}

#[test]
fn linear_outer_recommendations_agree_with_plain_model() {
    let p = wave();
    let cfg = BoConfig {
        recommend_samples: 4096,
        ..quick()
    };
    let design = initial_design(&p.domain, &mut NoiseStream::new(9));
    let mut cf = BoState::new(&p, Method::RandomCf, &design, 9, &cfg).unwrap();
    let mut plain = BoState::new(&p, Method::Random, &design, 9, &cfg).unwrap();
    let hyp = vec![vec![KernelHyperparams::new(0.2, 1.0, vec![0.25])]];
    let hs: Vec<Vec<f64>> = design.iter().map(|x| p.h(x)).collect();
    let model = MultiOutputGPModel::with_hyperparams(1, design.clone(), hs, hyp).unwrap();
    cf.model = model.clone();
    plain.model = model;
    let a = recommend(&cf, &p, &cfg).unwrap();
    let b = recommend(&plain, &p, &cfg).unwrap();
    // the Monte Carlo mean adds σ(x)·mean(Z), which moves the argmax slightly
    assert!((a[0] - b[0]).abs() <= 1e-2, "{a:?} vs {b:?}");
}

#[test]
fn run_trace_invariants() {
    let p = bowl();
    let cfg = quick();
    for method in Method::ALL {
        let trace = run(&p, method, 4, 10, &cfg).unwrap();
        assert_eq!(trace.records.len(), 5);
        assert_eq!(trace.h_evaluations, 6 + 4);
        assert_eq!(trace.initial_design.len(), 6);
        assert!(trace.records[0].x.is_none());
        for (i, r) in trace.records.iter().enumerate() {
            assert_eq!(r.iteration, i);
            assert!(r.regret >= -1e-9);
            assert_eq!(r.regret, 0.0 - p.f(&r.x_rec));
            if i > 0 {
                assert!(r.incumbent_f >= trace.records[i - 1].incumbent_f);
                let x = r.x.as_ref().unwrap();
                assert_eq!(r.f, Some(p.f(x)));
                assert_eq!(r.h.is_some(), method.is_composite());
            }
        }
        assert_eq!(trace.final_hyperparams.len(), 2);
    }
}

#[test]
fn zero_budget_gives_one_recommendation() {
    let trace = run(&bowl(), Method::EiCf, 0, 11, &quick()).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.h_evaluations, 6);
}

#[test]
fn methods_share_the_initial_design() {
    let p = bowl();
    let cfg = quick();
    let a = run(&p, Method::EiCf, 1, 12, &cfg).unwrap();
    let b = run(&p, Method::Random, 1, 12, &cfg).unwrap();
    let c = run(&p, Method::Random, 1, 13, &cfg).unwrap();
    assert_eq!(a.initial_design, b.initial_design);
    assert_ne!(a.initial_design, c.initial_design);
}

#[test]
fn runs_replay_exactly() {
    let p = bowl();
    let cfg = quick();
    for method in [Method::EiCf, Method::PiCf, Method::Ei, Method::Pi] {
        let mut a = run(&p, method, 3, 14, &cfg).unwrap();
        let mut b = run(&p, method, 3, 14, &cfg).unwrap();
        for r in a.records.iter_mut().chain(b.records.iter_mut()) {
            r.wall_ms = 0.0;
        }
        assert_eq!(a, b);
    }
}

#[test]
fn missing_optimum_is_reported() {
    let p = CompositeProblem::new(
        "bare",
        BoxDomain::cube(1, 0.0, 1.0).unwrap(),
        1,
        Arc::new(|x: &[f64]| x.to_vec()),
        Arc::new(Linear::identity()),
    );
    assert_eq!(run(&p, Method::Random, 1, 0, &quick()).unwrap_err(), Error::MissingOptimum);
}
