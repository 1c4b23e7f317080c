//! Independent-oracle checks: closed forms validated against brute-force
//! root finders and dense grid searches.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::Rng;

use cernn_core::losses::path_at_condition_number;
use cernn_core::rng::substream;
use cernn_core::shrinkage::{
    cernn_eigenvalue, cnr_eigenvalues, lambda_max_bound, CernnParams, Method,
};

/// Bisection on the increasing quadratic
/// `lambda*alpha*e^2 + n*e - n*d - lambda*(1-alpha)`.
fn bisection_root(d: f64, n: f64, lambda: f64, alpha: f64) -> f64 {
    let f = |e: f64| lambda * alpha * e * e + n * e - n * d - lambda * (1.0 - alpha);
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn eigenvalue_map_matches_bisection_over_wide_ranges() {
    let mut rng = substream(101, 0);
    for _ in 0..2000 {
        let d = 10f64.powf(rng.random_range(-4.0..4.0));
        let lambda = 10f64.powf(rng.random_range(-6.0..6.0));
        let alpha = rng.random_range(0.01..0.99);
        let n = 10f64.powf(rng.random_range(0.0..5.0));
        let params = CernnParams::new(n, lambda, alpha).unwrap();
        let e = cernn_eigenvalue(d, &params).unwrap();
        let oracle = bisection_root(d, n, lambda, alpha);
        assert_relative_eq!(e, oracle, max_relative = 1e-10);
    }
}

#[test]
fn lambda_max_satisfies_deviation_inequality_with_equality() {
    let mut rng = substream(103, 0);
    for _ in 0..200 {
        let p = rng.random_range(1usize..8);
        let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..40.0)).collect();
        let n = rng.random_range(2.0..500.0);
        let alpha = rng.random_range(0.05..0.95);
        let eps = 10f64.powf(rng.random_range(-3.0..-1.0));
        let bound = lambda_max_bound(&d, n, alpha, eps).unwrap();
        if bound == 0.0 {
            continue;
        }
        let mode = ((1.0 - alpha) / alpha).sqrt();
        let worst = d
            .iter()
            .map(|&di| (mode * n * di / (2.0 * (1.0 - alpha)) - n / (2.0 * alpha)).abs())
            .fold(0.0, f64::max);
        // At the returned bound the inequality holds with equality; below it
        // the deviation cap is violated.
        assert_relative_eq!(worst / bound, eps * mode, max_relative = 1e-10);
        assert!(worst / (0.5 * bound) > eps * mode);
    }
}

#[test]
fn cnr_golden_section_matches_grid_oracle_on_random_spectra() {
    let mut rng = substream(107, 0);
    for case in 0..30 {
        let p = rng.random_range(2usize..10);
        let mut d: Vec<f64> = (0..p)
            .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
            .collect();
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let spread = d[0] / d[p - 1];
        if spread <= 1.0 + 1e-9 {
            continue;
        }
        let kappa = rng.random_range(1.0..spread);
        let (_, tau_star) = cnr_eigenvalues(&d, kappa).unwrap();
        let h = |tau: f64| -> f64 {
            d.iter()
                .map(|&di| {
                    let e = di.clamp(tau, kappa * tau);
                    e.ln() + di / e
                })
                .sum()
        };
        let lo = (d[p - 1] / kappa).ln();
        let hi = d[0].ln();
        let points = 100_000;
        let mut best = f64::INFINITY;
        for i in 0..=points {
            let tau = (lo + (hi - lo) * i as f64 / points as f64).exp();
            best = best.min(h(tau));
        }
        assert!(
            h(tau_star) <= best + 1e-9 * (1.0 + best.abs()),
            "case {case}: golden section missed the grid optimum"
        );
    }
}

#[test]
fn matched_paths_shrink_extremes_harder_than_linear() {
    let d = [13.29, 5.73, 1.51, 0.55, 0.44];
    let points = path_at_condition_number(&d, &[25.0, 10.0, 5.0, 2.0]).unwrap();
    for kappa in [25.0, 10.0, 5.0, 2.0] {
        let at = |method: Method| {
            points
                .iter()
                .find(|pt| pt.kappa == kappa && pt.method == method)
                .expect("path point present")
        };
        let cernn = at(Method::Cernn);
        let linear = at(Method::Linear);
        let cnr = at(Method::Cnr);
        assert!(
            cernn.eigenvalues[0] <= linear.eigenvalues[0],
            "kappa {kappa}: cernn top {} vs linear top {}",
            cernn.eigenvalues[0],
            linear.eigenvalues[0]
        );
        assert!(
            cernn.eigenvalues[4] <= linear.eigenvalues[4],
            "kappa {kappa}: cernn bottom {} vs linear bottom {}",
            cernn.eigenvalues[4],
            linear.eigenvalues[4]
        );
        // The clamp treats the extremes even more aggressively than the
        // smooth map.
        assert!(cnr.eigenvalues[0] <= cernn.eigenvalues[0] + 1e-9);
        for pt in [cernn, linear, cnr] {
            assert_relative_eq!(
                pt.eigenvalues[0] / pt.eigenvalues[4],
                kappa,
                max_relative = 1e-6
            );
        }
    }
}

#[test]
fn matched_path_endpoints_recover_sample_and_mode() {
    let d = [6.0, 3.0, 1.0];
    let spread = 6.0;
    let at_spread = path_at_condition_number(&d, &[spread]).unwrap();
    for pt in &at_spread {
        assert_eq!(pt.eigenvalues, d.to_vec());
    }
    let sigma = 10.0 / 3.0;
    let near_one = path_at_condition_number(&d, &[1.0 + 1e-7]).unwrap();
    for pt in &near_one {
        for &e in &pt.eigenvalues {
            assert_abs_diff_eq!(e, sigma, epsilon = 1e-3);
        }
    }
}
