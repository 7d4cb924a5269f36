use super::*;
use crate::rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Poisson};

fn gaussian_columns(n: usize, q: usize, r: &mut rng::Rng) -> Vec<Vec<f64>> {
    let nd = Normal::new(0.0, 1.0).unwrap();
    (0..q).map(|_| (0..n).map(|_| nd.sample(r)).collect()).collect()
}

/// Random instance whose response follows the family with a sparse signal.
fn instance(family: GlmFamily, n: usize, q: usize, seed: u64) -> DesignProblem {
    let mut r = rng::from_seed(seed);
    let x = gaussian_columns(n, q, &mut r);
    let beta: Vec<f64> = (0..q).map(|j| if j < 3 { 0.5 } else { 0.0 }).collect();
    let lin: Vec<f64> = (0..n)
        .map(|i| (0..q).map(|j| x[j][i] * beta[j]).sum::<f64>())
        .collect();
    let y = lin
        .iter()
        .map(|&l| match family {
            GlmFamily::Gaussian => l + Normal::new(0.0, 1.0).unwrap().sample(&mut r),
            GlmFamily::Binomial => (r.random::<f64>() < crate::model::logistic(l)) as u8 as f64,
            GlmFamily::Poisson => Poisson::new((0.3 * l).exp()).unwrap().sample(&mut r),
            GlmFamily::Exponential => Exp::new((0.3 * l).exp()).unwrap().sample(&mut r),
            GlmFamily::Multinomial { classes } => {
                let eta: Vec<f64> = (0..classes).map(|k| if k == 0 { l } else { 0.0 }).collect();
                let p = crate::model::softmax(&eta);
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut c = classes - 1;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        c = k;
                        break;
                    }
                }
                c as f64
            }
        })
        .collect();
    DesignProblem::new(x, y, family).unwrap()
}

const FAMILIES: [GlmFamily; 5] = [
    GlmFamily::Gaussian,
    GlmFamily::Binomial,
    GlmFamily::Multinomial { classes: 3 },
    GlmFamily::Poisson,
    GlmFamily::Exponential,
];

#[test]
fn lambda_max_orthogonal_response_is_zero() {
    let x = vec![vec![1.0, -1.0, 1.0, -1.0]];
    let y = vec![1.0, 1.0, -1.0, -1.0];
    let p = DesignProblem::new(x, y, GlmFamily::Gaussian).unwrap();
    assert!(lambda_max(&p).unwrap().abs() < 1e-15);
}

#[test]
fn lambda_max_single_standardized_column() {
    let mut r = rng::from_seed(4);
    let mut x = gaussian_columns(50, 1, &mut r);
    let m = x[0].iter().sum::<f64>() / 50.0;
    let sd = (x[0].iter().map(|v| (v - m).powi(2)).sum::<f64>() / 50.0).sqrt();
    x[0].iter_mut().for_each(|v| *v = (*v - m) / sd);
    let y: Vec<f64> = x[0].iter().map(|v| 2.0 * v + 0.3).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - 0.3).collect();
    let expect = x[0].iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>().abs() / 50.0;
    let p = DesignProblem::new(x, y, GlmFamily::Gaussian).unwrap();
    let lm = lambda_max(&p).unwrap();
    assert!((lm - expect).abs() < 1e-12);
    let just_below = fit_single(&p, lm * 0.999, &SolverOptions::default()).unwrap();
    assert_eq!(just_below.nonzero, 1);
    let at = fit_single(&p, lm, &SolverOptions::default()).unwrap();
    assert_eq!(at.nonzero, 0);
}

#[test]
fn binomial_lambda_max_shrinks_with_n() {
    let mut vals = Vec::new();
    for n in [100, 10_000] {
        let mut r = rng::from_seed(n as u64);
        let x = gaussian_columns(n, 3, &mut r);
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        vals.push(lambda_max(&DesignProblem::new(x, y, GlmFamily::Binomial).unwrap()).unwrap());
    }
    assert!(vals[1] < vals[0] && vals[1] < 0.03, "{vals:?}");
}

#[test]
fn above_lambda_max_is_exactly_zero() {
    for (i, fam) in FAMILIES.iter().enumerate() {
        let p = instance(*fam, 120, 6, i as u64);
        let lm = lambda_max(&p).unwrap();
        let pt = fit_single(&p, 2.0 * lm, &SolverOptions::default()).unwrap();
        assert_eq!(pt.nonzero, 0, "{fam:?}");
        assert!(kkt_check(&p, 2.0 * lm, &pt.coefficients) < 1e-10);
        assert!(kkt_check(&p, lm, &pt.coefficients) < 1e-10);
    }
}

fn ols(p: &DesignProblem) -> (f64, Vec<f64>) {
    let n = p.n();
    let q = p.q();
    let a = DMatrix::from_fn(n, q + 1, |i, j| if j == 0 { 1.0 } else { p.x[j - 1][i] });
    let y = DVector::from_vec(p.y.clone());
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).unwrap();
    (sol[0], sol.iter().skip(1).copied().collect())
}

#[test]
fn gaussian_zero_penalty_matches_ols() {
    let p = instance(GlmFamily::Gaussian, 200, 8, 9);
    let pt = fit_single(&p, 0.0, &SolverOptions::default()).unwrap();
    let (b0, b) = ols(&p);
    assert!((pt.coefficients.intercept[0] - b0).abs() < 1e-6);
    for j in 0..8 {
        assert!((pt.coefficients.beta[0][j] - b[j]).abs() < 1e-6);
    }
    assert!(kkt_check(&p, 0.0, &pt.coefficients) < 1e-8);
}

#[test]
fn binomial_path_is_kkt_certified() {
    let p = instance(GlmFamily::Binomial, 50, 5, 12);
    let lm = lambda_max(&p).unwrap();
    let path = fit_lasso_path(&p, &default_lambda_grid(lm, 50, 5), &SolverOptions::default())
        .unwrap();
    for pt in &path.points {
        assert!(pt.converged);
        assert!(kkt_check(&p, pt.lambda, &pt.coefficients) <= 1e-6, "{}", pt.lambda);
    }
}

#[test]
fn perturbed_optimum_violates_kkt() {
    let p = instance(GlmFamily::Gaussian, 100, 4, 2);
    let lm = lambda_max(&p).unwrap();
    let pt = fit_single(&p, 0.2 * lm, &SolverOptions::default()).unwrap();
    let mut c = pt.coefficients.clone();
    assert!(kkt_check(&p, 0.2 * lm, &c) < 1e-6);
    c.beta[0][0] += 0.1;
    assert!(kkt_check(&p, 0.2 * lm, &c) > 1e-3);
}

#[test]
fn gradients_match_finite_differences() {
    for (s, fam) in FAMILIES.iter().enumerate() {
        let p = instance(*fam, 40, 4, 100 + s as u64);
        let mut r = rng::from_seed(s as u64);
        let k = fam.responses();
        let mut c = Coefficients::zeros(k, 4);
        for kk in 0..k {
            c.intercept[kk] = if *fam == GlmFamily::Exponential { -1.5 } else { 0.1 };
            for j in 0..4 {
                c.beta[kk][j] = r.random_range(-0.1..0.1);
            }
        }
        let g = loss_gradient(&p, &c);
        let h = 1e-6;
        for kk in 0..k {
            for j in 0..=4 {
                let mut up = c.clone();
                let mut dn = c.clone();
                let an = if j == 4 {
                    up.intercept[kk] += h;
                    dn.intercept[kk] -= h;
                    g.intercept[kk]
                } else {
                    up.beta[kk][j] += h;
                    dn.beta[kk][j] -= h;
                    g.beta[kk][j]
                };
                let fd = (loss(&p, &up) - loss(&p, &dn)) / (2.0 * h);
                let rel = (an - fd).abs() / fd.abs().max(1e-3);
                assert!(rel <= 1e-5, "{fam:?} {kk} {j}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn warm_start_matches_cold_fit() {
    for (s, fam) in FAMILIES.iter().enumerate() {
        let p = instance(*fam, 150, 6, 40 + s as u64);
        let lm = lambda_max(&p).unwrap();
        let grid = default_lambda_grid(lm, 150, 6);
        let path = fit_lasso_path(&p, &grid[..40], &SolverOptions::default()).unwrap();
        let target = path.points.last().unwrap();
        let cold = fit_single(&p, target.lambda, &SolverOptions::default()).unwrap();
        for (a, b) in target
            .coefficients
            .beta
            .iter()
            .flatten()
            .zip(cold.coefficients.beta.iter().flatten())
        {
            assert!((a - b).abs() < 1e-5, "{fam:?}: {a} vs {b}");
        }
    }
}

#[test]
fn multinomial_class_permutation_equivariance() {
    let p = instance(GlmFamily::Multinomial { classes: 3 }, 150, 4, 77);
    let perm = [2usize, 0, 1];
    let mut q = p.clone();
    q.y = p.y.iter().map(|&v| perm[v as usize] as f64).collect();
    let lm = lambda_max(&p).unwrap();
    assert!((lm - lambda_max(&q).unwrap()).abs() < 1e-12);
    let a = fit_single(&p, 0.1 * lm, &SolverOptions::default()).unwrap();
    let b = fit_single(&q, 0.1 * lm, &SolverOptions::default()).unwrap();
    for k in 0..3 {
        for j in 0..4 {
            let d = a.coefficients.beta[k][j] - b.coefficients.beta[perm[k]][j];
            assert!(d.abs() < 1e-5, "{k} {j}: {d}");
        }
    }
}

#[test]
fn objective_monotone_and_converged() {
    for (s, fam) in FAMILIES.iter().enumerate() {
        let p = instance(*fam, 100, 5, 60 + s as u64);
        let lm = lambda_max(&p).unwrap();
        let path =
            fit_lasso_path(&p, &default_lambda_grid(lm, 100, 5), &SolverOptions::default())
                .unwrap();
        assert!(path.points.iter().all(|pt| pt.monotone && pt.converged), "{fam:?}");
    }
}

#[test]
fn cv_is_deterministic_and_finds_strong_signal() {
    let mut r = rng::from_seed(5);
    let n = 500;
    let x = gaussian_columns(n, 10, &mut r);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<f64> = (0..n).map(|i| 5.0 * x[3][i] + nd.sample(&mut r)).collect();
    let p = DesignProblem::new(x, y, GlmFamily::Gaussian).unwrap();
    let a = cv_select(&p, &CvOptions::new(1)).unwrap();
    let b = cv_select(&p, &CvOptions::new(1)).unwrap();
    assert_eq!(a, b);
    assert!(a.path.points[a.index].coefficients.beta[0][3] != 0.0);
    let mut par = CvOptions::new(1);
    par.jobs = 3;
    assert_eq!(cv_select(&p, &par).unwrap(), a);
}

#[test]
fn cv_reports_missing_levels() {
    let x = vec![(0..20).map(|i| i as f64).collect()];
    let mut y = vec![0.0; 20];
    y[0] = 1.0;
    let p = DesignProblem::new(x, y, GlmFamily::Binomial).unwrap();
    assert!(matches!(
        cv_select(&p, &CvOptions::new(0)),
        Err(crate::Error::CvInfeasible { .. })
    ));
}

#[test]
fn ebic_prefers_null_on_noise() {
    let mut r = rng::from_seed(8);
    let x = gaussian_columns(200, 50, &mut r);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<f64> = (0..200).map(|_| nd.sample(&mut r)).collect();
    let p = DesignProblem::new(x, y, GlmFamily::Gaussian).unwrap();
    let lm = lambda_max(&p).unwrap();
    let path =
        fit_lasso_path(&p, &default_lambda_grid(lm, 200, 50), &SolverOptions::default()).unwrap();
    let sel = ebic_select(&p, &path, DEFAULT_EBIC_GAMMA).unwrap();
    assert_eq!(path.points[sel.index].nonzero, 0);
    // gamma = 0 is plain BIC
    let bic = ebic_select(&p, &path, 0.0).unwrap();
    let n = 200f64;
    for (pt, s) in path.points.iter().zip(&bic.scores) {
        let rss: f64 = {
            let eta = pt.coefficients.linear_predictors(&p.x, 200);
            p.y.iter().zip(&eta[0]).map(|(a, b)| (a - b).powi(2)).sum()
        };
        let expect = n * (rss / n).ln() + pt.nonzero as f64 * n.ln();
        assert!((s - expect).abs() < 1e-9);
    }
}

#[test]
fn constant_columns_are_held_at_zero() {
    let mut r = rng::from_seed(3);
    let mut x = gaussian_columns(60, 2, &mut r);
    x.push(vec![2.0; 60]);
    let y: Vec<f64> = x[0].iter().map(|v| v * 2.0).collect();
    let p = DesignProblem::new(x, y, GlmFamily::Gaussian).unwrap();
    let pt = fit_single(&p, 0.01, &SolverOptions::default()).unwrap();
    assert_eq!(pt.coefficients.beta[0][2], 0.0);
    assert!(kkt_check(&p, 0.01, &pt.coefficients) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn path_points_are_kkt_certified(seed in any::<u64>(), fam in 0usize..5) {
        let p = instance(FAMILIES[fam], 80, 6, seed);
        let lm = lambda_max(&p).unwrap();
        let path = fit_lasso_path(&p, &default_lambda_grid(lm, 80, 6), &SolverOptions::default()).unwrap();
        for pt in &path.points {
            prop_assert!(kkt_check(&p, pt.lambda, &pt.coefficients) <= 1e-6);
        }
    }
}
