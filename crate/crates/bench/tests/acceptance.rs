//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Runs the scaled benchmark experiments, so it takes several minutes on a
//! single core.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bocf::acquisition::{ei_cf_mc, ei_cf_value_and_grad, ei_closed_form, FnOuter, Linear};
use bocf::bo::{self, BoConfig, Method};
use bocf::gp::{FitMode, GaussianPosterior, HyperPriors, KernelHyperparams, MultiOutputGPModel};
use bocf::noise::NoiseStream;
use bocf::problems::{self, ENV_TRUTH};
use bocf::BoxDomain;
use bocf_bench::runner::run_bench;
use bocf_bench::BenchConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn bench_config(problem: &str, methods: Vec<Method>, reps: usize, budget: usize, seed: u64, out: &Path) -> BenchConfig {
    BenchConfig {
        problems: vec![problem.into()],
        methods,
        replications: reps,
        budget,
        master_seed: seed,
        bo: BoConfig::default(),
        out_dir: out.to_path_buf(),
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        timing: false,
    }
}

/// `log10_regret[replication][iteration]` read back from a per-run CSV.
fn read_log_regrets(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut by_rep: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.unwrap();
        let rep: usize = row[2].parse().unwrap();
        by_rep.entry(rep).or_default().push(row[7].parse().unwrap());
    }
    by_rep.into_values().collect()
}

fn median_curve(runs: &[Vec<f64>]) -> Vec<f64> {
    (0..runs[0].len()).map(|t| median(runs.iter().map(|r| r[t]).collect())).collect()
}

fn oracle_equivalence() -> Verdict {
    let mut rng = NoiseStream::new(2024);
    let mut agree = 0;
    for case in 0..50 {
        let m = 1 + (rng.uniform() * 4.0) as usize;
        let mu: Vec<f64> = (0..m).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let var: Vec<f64> = (0..m).map(|_| 0.01 + 2.0 * rng.uniform()).collect();
        let w: Vec<f64> = (0..m).map(|_| 3.0 * rng.uniform() - 1.5).collect();
        let f_star = 4.0 * rng.uniform() - 2.0;
        let post = GaussianPosterior::diagonal(mu.clone(), &var);
        let draws = NoiseStream::new(10_000 + case).normal_draws(1 << 16, m);
        let est = ei_cf_mc(&post, &Linear::new(w.clone()), f_star, &draws).unwrap();
        let delta: f64 = w.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>() - f_star;
        let sigma = w.iter().zip(&var).map(|(a, v)| a * a * v).sum::<f64>().sqrt();
        if (est.value - ei_closed_form(delta, sigma)).abs() <= 3.0 * est.std_error {
            agree += 1;
        }
    }
    verdict(agree >= 48, format!("{agree}/50 within 3 standard errors (need >= 48)"))
}

fn gradient_unbiasedness() -> Verdict {
    let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    let mut rng = NoiseStream::new(31);
    let xs: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
    let hs: Vec<Vec<f64>> = xs.iter().map(|x| vec![(3.0 * x[0]).sin() + x[1], x[0] * x[1]]).collect();
    let model = MultiOutputGPModel::fit(xs, hs.clone(), FitMode::Map, &HyperPriors::weakly_informative(&dom, &hs))
        .unwrap();
    let target = [0.8, 0.5];
    let g = FnOuter::with_grad(
        2,
        move |y: &[f64]| -(y[0] - target[0]).powi(2) - (y[1] - target[1]).powi(2),
        move |y: &[f64]| vec![-2.0 * (y[0] - target[0]), -2.0 * (y[1] - target[1])],
    );
    let f_star = hs
        .iter()
        .map(|h| -(h[0] - target[0]).powi(2) - (h[1] - target[1]).powi(2))
        .fold(f64::NEG_INFINITY, f64::max);
    let fixed = NoiseStream::new(77).normal_draws(4096, 2);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut tried = 0;
    while checked < 10 && tried < 1000 {
        tried += 1;
        let x = vec![0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()];
        let Ok(post) = model.posterior_with_gradients(&x, 0) else {
            continue;
        };
        let (_, grad) = ei_cf_value_and_grad(&post, &g, f_star, &fixed).unwrap();
        let fd: Vec<f64> = (0..2)
            .map(|k| {
                let mut up = x.clone();
                up[k] += step;
                let mut down = x.clone();
                down[k] -= step;
                let vu = ei_cf_mc(&model.posterior(&up, 0), &g, f_star, &fixed).unwrap().value;
                let vd = ei_cf_mc(&model.posterior(&down, 0), &g, f_star, &fixed).unwrap().value;
                (vu - vd) / (2.0 * step)
            })
            .collect();
        // non-degenerate: both partial derivatives are clearly away from zero
        if fd.iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        for k in 0..2 {
            worst = worst.max((grad[k] - fd[k]).abs() / fd[k].abs());
        }
        checked += 1;
    }
    verdict(
        checked == 10 && worst <= 2e-2,
        format!("{checked} points, worst relative error {worst:.2e} (need <= 2e-2)"),
    )
}

fn gp_correctness() -> Verdict {
    let dom = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    let mut rng = NoiseStream::new(8);
    let xs: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
    let hs: Vec<Vec<f64>> = xs.iter().map(|x| vec![(3.0 * x[0]).sin() + x[1], x[0] * x[1] - 0.5]).collect();

    let fitted = MultiOutputGPModel::fit(
        xs.clone(),
        hs.clone(),
        FitMode::Ensemble { count: 10, seed: 3 },
        &HyperPriors::weakly_informative(&dom, &hs),
    )
    .unwrap();
    let mut mean_err: f64 = 0.0;
    let mut var_ok = true;
    for e in 0..fitted.ensemble_size() {
        let hyp = &fitted.hyperparams()[e];
        for (x, h) in xs.iter().zip(&hs) {
            let p = fitted.posterior(x, e);
            for j in 0..2 {
                mean_err = mean_err.max((p.mean[j] - h[j]).abs());
                var_ok &= p.cov[(j, j)] <= 10.0 * hyp[j].jitter;
            }
        }
    }

    let set = vec![
        KernelHyperparams::new(0.0, 1.3, vec![0.3, 0.5]),
        KernelHyperparams::new(0.2, 0.4, vec![0.6, 0.2]),
    ];
    let probes: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
    let model = |n: usize| {
        MultiOutputGPModel::with_hyperparams(2, xs[..n].to_vec(), hs[..n].to_vec(), vec![set.clone()]).unwrap()
    };
    let mut min_eig = f64::INFINITY;
    for n in 1..10 {
        let (a, b) = (model(n), model(n + 1));
        for x in &probes {
            let diff = &a.posterior(x, 0).cov - &b.posterior(x, 0).cov;
            min_eig = min_eig.min(diff.symmetric_eigenvalues().min());
        }
    }

    let full = model(10);
    let step = 1e-5;
    let mut worst_deriv: f64 = 0.0;
    let mut checked = 0;
    while checked < 20 {
        let x = vec![0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()];
        let Ok(p) = full.posterior_with_gradients(&x, 0) else {
            continue;
        };
        let (dm, dc) = (p.d_mean.as_ref().unwrap(), p.d_chol.as_ref().unwrap());
        for k in 0..2 {
            let mut up = x.clone();
            up[k] += step;
            let mut down = x.clone();
            down[k] -= step;
            let (pu, pd) = (full.posterior(&up, 0), full.posterior(&down, 0));
            for j in 0..2 {
                let fd_mean = (pu.mean[j] - pd.mean[j]) / (2.0 * step);
                let fd_chol = (pu.chol[(j, j)] - pd.chol[(j, j)]) / (2.0 * step);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-6);
                worst_deriv = worst_deriv.max(rel(dm[(j, k)], fd_mean)).max(rel(dc[k][(j, j)], fd_chol));
            }
        }
        checked += 1;
    }

    let pass = mean_err <= 1e-6 && var_ok && min_eig >= -1e-10 && worst_deriv <= 1e-4;
    verdict(
        pass,
        format!(
            "interpolation error {mean_err:.1e}, variance bound {}, min eigenvalue of covariance drop {min_eig:.1e}, \
             worst derivative error {worst_deriv:.1e}",
            if var_ok { "held" } else { "violated" }
        ),
    )
}

fn sign_change_example() -> Verdict {
    let dom = BoxDomain::new(vec![-5.0], vec![5.0]).unwrap();
    let g = FnOuter::with_grad(1, |y: &[f64]| -y[0] * y[0], |y: &[f64]| vec![-2.0 * y[0]]);
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let mut rng = NoiseStream::new(seed);
        let xs: Vec<Vec<f64>> =
            [-2.0, -1.0, 2.5, 3.5].iter().map(|x| vec![x + 0.1 * (2.0 * rng.uniform() - 1.0)]).collect();
        let hs: Vec<Vec<f64>> =
            [-1.0, 1.2, 1.0, -0.6].iter().map(|h| vec![h * (0.8 + 0.4 * rng.uniform())]).collect();
        let fs: Vec<Vec<f64>> = hs.iter().map(|h| vec![-h[0] * h[0]]).collect();
        let h_model =
            MultiOutputGPModel::fit(xs.clone(), hs.clone(), FitMode::Map, &HyperPriors::weakly_informative(&dom, &hs))
                .unwrap();
        let f_model =
            MultiOutputGPModel::fit(xs.clone(), fs.clone(), FitMode::Map, &HyperPriors::weakly_informative(&dom, &fs))
                .unwrap();
        let f_star = fs.iter().map(|f| f[0]).fold(f64::NEG_INFINITY, f64::max);
        let draws = NoiseStream::new(100 + seed).normal_draws(4096, 1);
        let (mut cf, mut ei) = ((f64::NEG_INFINITY, 0.0), (f64::NEG_INFINITY, 0.0));
        for i in 0..=1000 {
            let x = -5.0 + 10.0 * i as f64 / 1000.0;
            let v = ei_cf_mc(&h_model.posterior(&[x], 0), &g, f_star, &draws).unwrap().value;
            if v > cf.0 {
                cf = (v, x);
            }
            let (mu, var) = f_model.mean_and_variance(&[x], 0);
            let e = ei_closed_form(mu[0] - f_star, var[0].sqrt());
            if e > ei.0 {
                ei = (e, x);
            }
        }
        let bracketed = |x: f64| (xs[0][0] <= x && x <= xs[1][0]) || (xs[2][0] <= x && x <= xs[3][0]);
        if bracketed(cf.1) && !bracketed(ei.1) {
            good += 1;
        } else {
            notes.push(format!("seed {seed}: ei_cf at {:.3}, ei at {:.3}", cf.1, ei.1));
        }
    }
    verdict(good == 10, format!("{good}/10 instances separate as expected {}", notes.join("; ")))
}

fn rosenbrock_headline(dir: &Path) -> Verdict {
    let methods = vec![Method::EiCf, Method::Ei, Method::Random];
    let out = run_bench(&bench_config("rosenbrock5", methods, 10, 40, 1, dir)).unwrap();
    let curve = |name: &str| {
        let path = out.regret_files.iter().find(|p| p.ends_with(name)).unwrap();
        median_curve(&read_log_regrets(path))
    };
    let (cf, ei, random) = (
        curve("rosenbrock5__ei_cf.csv"),
        curve("rosenbrock5__ei.csv"),
        curve("rosenbrock5__random.csv"),
    );
    let (cf_final, ei_final) = (cf[40], ei[40]);
    let reached = cf.iter().position(|v| *v <= ei_final);
    let pass = cf_final <= ei_final - 1.0 && reached.is_some_and(|t| t <= 20);
    verdict(
        pass,
        format!(
            "median final log10 regret: ei_cf {cf_final:.2}, ei {ei_final:.2}, random {:.2}; \
             ei_cf reaches ei's final median after {} evaluations (need <= 20)",
            random[40],
            reached.map_or("never".to_string(), |t| t.to_string())
        ),
    )
}

fn environmental_sanity(dir: &Path) -> Verdict {
    let p = problems::environmental();
    let at_truth = p.f(&ENV_TRUTH);
    let out = run_bench(&bench_config("environmental", vec![Method::EiCf], 5, 30, 1, dir)).unwrap();
    let finals: Vec<f64> = out.runs.iter().map(|r| r.final_regret).collect();
    let med = median(finals.clone());
    let listed: Vec<String> = finals.iter().map(|r| format!("{r:.1e}")).collect();
    verdict(
        at_truth == 0.0 && med <= 1e-2,
        format!("f(truth) = {at_truth:e}; median final regret {med:.2e} over [{}] (need <= 1e-2)", listed.join(", ")),
    )
}

fn consistency() -> Verdict {
    let mut normalized = Vec::new();
    for seed in 0..10u64 {
        let p = problems::gp_sample_1d(seed);
        let f_max = p.f_max_true.unwrap();
        let f_min = (0..=10_000).map(|i| p.f(&[i as f64 / 10_000.0])).fold(f64::INFINITY, f64::min);
        // 4 initial points plus 56 iterations make 60 evaluations
        let trace = bo::run(&p, Method::EiCf, 56, seed, &BoConfig::default()).unwrap();
        normalized.push(trace.final_record().regret / (f_max - f_min));
    }
    let med = median(normalized.clone());
    verdict(med <= 1e-3, format!("median normalized regret {med:.2e} (need <= 1e-3)"))
}

fn determinism(a: &Path, b: &Path) -> Verdict {
    let cfg = |out: &Path, jobs: usize| BenchConfig {
        problems: vec!["rosenbrock5".into(), "environmental".into()],
        methods: Method::ALL.to_vec(),
        replications: 2,
        budget: 2,
        master_seed: 11,
        bo: BoConfig::default(),
        out_dir: out.to_path_buf(),
        jobs,
        timing: false,
    };
    let first = run_bench(&cfg(a, 1)).unwrap();
    run_bench(&cfg(b, 2)).unwrap();
    let mut files: Vec<_> = first.regret_files.clone();
    files.push(first.aggregate_file.clone());
    files.push(first.manifest_file.clone());
    let differing: Vec<String> = files
        .iter()
        .filter_map(|p| {
            let name = p.file_name().unwrap();
            (fs::read(p).unwrap() != fs::read(b.join(name)).unwrap()).then(|| name.to_string_lossy().into_owned())
        })
        .collect();
    verdict(
        differing.is_empty(),
        format!("{} files compared, differing: {differing:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let sub = |name: &str| dir.path().join(name);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("linear outer function matches closed-form EI", Box::new(oracle_equivalence)),
        ("gradient estimator matches CRN finite differences", Box::new(gradient_unbiasedness)),
        ("GP interpolation, covariance ordering, derivatives", Box::new(gp_correctness)),
        ("1-d sign-change example", Box::new(sign_change_example)),
        ("Rosenbrock scaled headline experiment", Box::new(move || rosenbrock_headline(&sub("rosenbrock")))),
        ("environmental model sanity", Box::new(move || environmental_sanity(&sub("environmental")))),
        ("1-d consistency smoke test", Box::new(consistency)),
        ("bench reruns are byte-identical", Box::new(move || determinism(&sub("det_a"), &sub("det_b")))),
    ];
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (name, check) in &criteria {
        let started = Instant::now();
        let v = check();
        let took: Duration = started.elapsed();
        failed += usize::from(!v.pass);
        let mut out = stdout.lock();
        writeln!(
            out,
            "{} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
