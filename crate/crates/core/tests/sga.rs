use bocf::acqopt::{maximize_ei_cf, SgaConfig, MIN_SEPARATION};
use bocf::acquisition::{ei_cf_mc, FnOuter, Incumbent, OuterFunction};
use bocf::domain::max_abs_diff;
use bocf::gp::{FitMode, HyperPriors, MultiOutputGPModel};
use bocf::noise::NoiseStream;
use bocf::BoxDomain;

fn target_outer() -> FnOuter<impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> Vec<f64>> {
    FnOuter::with_grad(
        2,
        |y: &[f64]| -(y[0] - 0.8).powi(2) - (y[1] - 0.1).powi(2),
        |y: &[f64]| vec![-2.0 * (y[0] - 0.8), -2.0 * (y[1] - 0.1)],
    )
}

fn fitted_2d() -> (BoxDomain, MultiOutputGPModel, Incumbent) {
    let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    let mut rng = NoiseStream::new(21);
    let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
    let hs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| vec![(3.0 * x[0]).sin() * x[1], (x[0] - x[1]).cos() - 0.5])
        .collect();
    let g = target_outer();
    let fs: Vec<f64> = hs.iter().map(|h| g.eval(h)).collect();
    let incumbent = Incumbent::from_history(&xs, &fs).unwrap();
    let priors = HyperPriors::weakly_informative(&dom, &hs);
    let model = MultiOutputGPModel::fit(xs, hs, FitMode::Map, &priors).unwrap();
    (dom, model, incumbent)
}

fn config(seed: u64) -> SgaConfig {
    SgaConfig {
        seed,
        ..SgaConfig::default()
    }
}

#[test]
fn beats_random_search_on_the_same_model() {
    let (dom, model, incumbent) = fitted_2d();
    let g = target_outer();
    let judge = NoiseStream::new(404).normal_draws(1 << 14, 2);
    let score = |x: &[f64]| ei_cf_mc(&model.posterior(x, 0), &g, incumbent.f_star, &judge).unwrap();
    let mut rng = NoiseStream::new(5);
    let best_probe = (0..1000)
        .map(|_| score(&rng.uniform_in(&dom)))
        .max_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .unwrap();
    assert!(best_probe.value > 0.0);
    let wins = (0..100)
        .filter(|seed| {
            let x = maximize_ei_cf(&model, &g, &incumbent, &dom, &config(*seed)).unwrap();
            let s = score(&x);
            let se = (s.std_error.powi(2) + best_probe.std_error.powi(2)).sqrt();
            s.value >= best_probe.value - 3.0 * se
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn result_is_feasible_and_away_from_data() {
    let (dom, model, incumbent) = fitted_2d();
    for seed in 0..4 {
        let x = maximize_ei_cf(&model, &target_outer(), &incumbent, &dom, &config(seed)).unwrap();
        assert!(dom.contains(&x));
        assert!(model.train_x().iter().all(|t| max_abs_diff(t, &x) > MIN_SEPARATION));
    }
}

#[test]
fn seeded_replay() {
    let (dom, model, incumbent) = fitted_2d();
    let g = target_outer();
    let a = maximize_ei_cf(&model, &g, &incumbent, &dom, &config(9)).unwrap();
    let b = maximize_ei_cf(&model, &g, &incumbent, &dom, &config(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn usually_lands_between_sign_changes_for_squared_outer() {
    // h crosses zero between the first two and the last two observations.
    // The narrow peaks there are only found when some restart starts nearby,
    // which ten restarts miss roughly one time in ten.
    let dom = BoxDomain::new(vec![-5.0], vec![5.0]).unwrap();
    let xs = vec![vec![-2.0], vec![-1.0], vec![2.5], vec![3.5]];
    let hs = vec![vec![-1.0], vec![1.2], vec![1.0], vec![-0.6]];
    let fs: Vec<f64> = hs.iter().map(|h| -h[0] * h[0]).collect();
    let incumbent = Incumbent::from_history(&xs, &fs).unwrap();
    let priors = HyperPriors::weakly_informative(&dom, &hs);
    let model = MultiOutputGPModel::fit(xs, hs, FitMode::Map, &priors).unwrap();
    let g = FnOuter::with_grad(1, |y: &[f64]| -y[0] * y[0], |y: &[f64]| vec![-2.0 * y[0]]);
    let inside = (0..50)
        .map(|seed| maximize_ei_cf(&model, &g, &incumbent, &dom, &config(seed)).unwrap()[0])
        .filter(|x| (-2.0..=-1.0).contains(x) || (2.5..=3.5).contains(x))
        .count();
    assert!(inside >= 40, "{inside}/50");
}

#[test]
fn invalid_settings_are_rejected() {
    let (dom, model, incumbent) = fitted_2d();
    let g = target_outer();
    for bad in [
        SgaConfig { restarts: 0, ..config(0) },
        SgaConfig { step_decay: 0.5, ..config(0) },
        SgaConfig { step_size: 0.0, ..config(0) },
        SgaConfig { final_ranking_samples: 0, ..config(0) },
    ] {
        assert!(maximize_ei_cf(&model, &g, &incumbent, &dom, &bad).is_err());
    }
}
