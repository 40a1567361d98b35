//! Invariant battery behind `gwgauss selfcheck`: quick randomized checks of
//! the library's structural identities. Prints one line per check.

use gwgauss::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_gaussian(rng: &mut ChaCha12Rng, dim: usize) -> GaussianMeasure {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.5..1.5));
    let cov = SymmetricMatrix::new(&a * a.transpose()).expect("finite");
    let mean = DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
    GaussianMeasure::new(mean, cov).expect("valid measure")
}

fn check(name: &str, ok: bool, detail: String, failures: &mut Vec<String>) {
    if ok {
        println!("ok {name}");
    } else {
        println!("FAIL {name}: {detail}");
        failures.push(format!("{name}: {detail}"));
    }
}

pub fn run(seed: u64) -> std::result::Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut failures = Vec::new();

    // Eigendecomposition round trip.
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let dim = rng.random_range(1..=8);
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-5.0..5.0));
        let s = SymmetricMatrix::new(m).expect("finite");
        let dec = sorted_eig(&s);
        let err = (dec.reconstruct().as_matrix() - s.as_matrix()).norm()
            / s.as_matrix().norm().max(1e-12);
        worst = worst.max(err);
    }
    check(
        "eigen round trip (200 matrices)",
        worst < 1e-9,
        format!("worst relative error {worst:.3e}"),
        &mut failures,
    );

    // Sandwich and gap cap.
    let mut ok = true;
    let mut detail = String::new();
    for _ in 0..200 {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let g0 = random_gaussian(&mut rng, m);
        let g1 = random_gaussian(&mut rng, n);
        let b = bounds(&g0, &g1);
        let scale = b.upper.max(1.0);
        if b.lower < -1e-9 * scale
            || b.lower > b.upper + 1e-9 * scale
            || b.gap > b.gap_cap + 1e-9 * scale
        {
            ok = false;
            detail = format!("lower {}, upper {}, gap {}, cap {}", b.lower, b.upper, b.gap, b.gap_cap);
            break;
        }
    }
    check("sandwich and gap cap (200 pairs)", ok, detail, &mut failures);

    // One-dimensional exactness.
    let mut ok = true;
    let mut detail = String::new();
    for _ in 0..50 {
        let s0 = rng.random_range(0.05..5.0);
        let s1 = rng.random_range(0.05..5.0);
        let g0 = GaussianMeasure::centered_diagonal(&[s0]).expect("valid");
        let g1 = GaussianMeasure::centered_diagonal(&[s1]).expect("valid");
        let expected = 12.0 * (s0 - s1) * (s0 - s1);
        let b = bounds(&g0, &g1);
        let tol = 1e-9 * expected.max(1.0);
        if b.exact.is_none()
            || (b.lower - expected).abs() > tol
            || (b.upper - expected).abs() > tol
        {
            ok = false;
            detail = format!("variances ({s0}, {s1}): bounds {b:?} vs {expected}");
            break;
        }
    }
    check("one-dimensional exact value (50 pairs)", ok, detail, &mut failures);

    // Optimal-map pushforward.
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(n..=5);
        let g0 = random_gaussian(&mut rng, m);
        let g1 = random_gaussian(&mut rng, n);
        if psd_classify(g1.covariance(), DEFAULT_PSD_TOL) != PsdClass::PositiveDefinite {
            continue;
        }
        if let Ok(map) = ggw_map(&g0, &g1, None) {
            let pushed = push_forward(&g0, &map).expect("dims match");
            let scale = g1.covariance().frobenius_norm().max(1.0);
            let err = ((pushed.covariance().as_matrix() - g1.covariance().as_matrix()).norm()
                + (pushed.mean() - g1.mean()).norm())
                / scale;
            worst = worst.max(err);
        }
    }
    check(
        "optimal-map pushforward (50 pairs)",
        worst < 1e-8,
        format!("worst relative error {worst:.3e}"),
        &mut failures,
    );

    // Quadratic Wasserstein map pushforward.
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let dim = rng.random_range(1..=5);
        let g0 = random_gaussian(&mut rng, dim);
        let g1 = random_gaussian(&mut rng, dim);
        if psd_classify(g0.covariance(), DEFAULT_PSD_TOL) != PsdClass::PositiveDefinite {
            continue;
        }
        let (_, map) = w2_squared(&g0, &g1).expect("equal dims");
        if let Some(map) = map {
            let pushed = push_forward(&g0, &map).expect("dims match");
            let scale = g1.covariance().frobenius_norm().max(1.0);
            let err = (pushed.covariance().as_matrix() - g1.covariance().as_matrix()).norm() / scale;
            worst = worst.max(err);
        }
    }
    check(
        "quadratic Wasserstein map pushforward (50 pairs)",
        worst < 1e-8,
        format!("worst relative error {worst:.3e}"),
        &mut failures,
    );

    // Decomposition identity on centered clouds.
    let mut worst = 0.0_f64;
    for trial in 0..20 {
        let k0 = rng.random_range(3..=9);
        let k1 = rng.random_range(3..=9);
        let x = PointCloud::uniform(DMatrix::from_fn(k0, 2, |_, _| rng.random_range(-2.0..2.0)))
            .expect("valid")
            .centered();
        let y = PointCloud::uniform(DMatrix::from_fn(k1, 1, |_, _| rng.random_range(-2.0..2.0)))
            .expect("valid")
            .centered();
        let plan = random_plan(x.weights(), y.weights(), seed.wrapping_add(trial))
            .expect("valid plan");
        let a = gw_objective(&x, &y, &plan).expect("valid");
        let b = gw_objective_decomposed(&x, &y, &plan).expect("centered");
        let c = gw_objective_reference(&x, &y, &plan).expect("small");
        let scale = a.abs().max(1.0);
        worst = worst.max(((a - b).abs() / scale).max((a - c).abs() / scale));
    }
    check(
        "objective decomposition identity (20 instances)",
        worst < 1e-8,
        format!("worst relative spread {worst:.3e}"),
        &mut failures,
    );

    // Entropic solver against the exhaustive oracle.
    let x = PointCloud::uniform(DMatrix::from_fn(6, 2, |_, _| rng.random_range(-2.0..2.0)))
        .expect("valid");
    let y = PointCloud::uniform(DMatrix::from_fn(6, 1, |_, _| rng.random_range(-2.0..2.0)))
        .expect("valid");
    let exact = brute_force_gw(&x, &y).expect("k = 6");
    let approx = entropic_gw_solve(&x, &y, &EntropicGwParams::new(0.05)).expect("solves");
    check(
        "entropic objective at least the exhaustive optimum",
        approx.objective >= exact.objective - 1e-6,
        format!("entropic {} vs exact {}", approx.objective, exact.objective),
        &mut failures,
    );

    if failures.is_empty() {
        println!("selfcheck passed ({} checks)", 7);
        Ok(())
    } else {
        Err(failures.join("; "))
    }
}
