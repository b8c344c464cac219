use outcoupler::analysis::{
    default_slope_bounds, fit_rabi_calibration, fit_saturating_exponential, power_law_exponent, saturating_exponential,
    FIT_STARTS,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sweep() -> Vec<f64> {
    outcoupler::protocols::log_sweep(50.0, 5000.0, 20)
}

fn model(x: &[f64], a: f64, x0: f64, r: f64) -> Vec<f64> {
    x.iter().map(|&x| saturating_exponential(x, a, x0, r).max(0.0)).collect()
}

#[test]
fn noiseless_round_trip_is_exact() {
    // start above x₀ so the clamp at zero never bites
    let x: Vec<f64> = (0..20).map(|i| 120.0 + 250.0 * i as f64).collect();
    let y = model(&x, 0.5, 100.0, 600.0);
    let f = fit_saturating_exponential(&x, &y, None).unwrap();
    assert!(f.converged, "{:?}", f.diagnostics);
    for (got, want) in [(f.a, 0.5), (f.x0, 100.0), (f.r, 600.0)] {
        assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
    }
    assert!(f.residual_norm < 1e-10);
    assert!(f.start < FIT_STARTS);
}

#[test]
fn r_survives_two_percent_noise_over_a_hundred_seeds() {
    // 60 points to 10 r: the sampling spread of r is then about 1.8%
    let x: Vec<f64> = (1..=60).map(|i| 100.0 * i as f64).collect();
    let clean = model(&x, 0.5, 100.0, 600.0);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = clean.iter().map(|v| v * (1.0 + noise.sample(&mut rng))).collect();
        let f = fit_saturating_exponential(&x, &y, None).unwrap();
        assert!(f.converged, "seed {seed}");
        worst = worst.max((f.r / 600.0 - 1.0).abs());
    }
    assert!(worst < 0.05, "worst relative r error {worst}");
}

#[test]
fn fit_is_scale_equivariant() {
    let x = sweep();
    let y: Vec<f64> = x.iter().map(|&x| 0.13 * (1.0 - (-(x - 80.0) / 400.0).exp()).max(0.0) + 1e-3 * (x / 700.0).sin()).collect();
    let f = fit_saturating_exponential(&x, &y, None).unwrap();
    let c = 2.0 * std::f64::consts::PI;
    let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
    let g = fit_saturating_exponential(&xs, &y, None).unwrap();
    assert!((g.x0 / (c * f.x0) - 1.0).abs() < 1e-10, "{} {}", g.x0, c * f.x0);
    assert!((g.r / (c * f.r) - 1.0).abs() < 1e-10);
    assert!((g.a / f.a - 1.0).abs() < 1e-10);
}

#[test]
fn residuals_are_orthogonal_to_the_model_gradient() {
    let x = sweep();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.003).unwrap();
    let y: Vec<f64> = model(&x, 0.3, 60.0, 900.0).iter().map(|v| v + noise.sample(&mut rng)).collect();
    let f = fit_saturating_exponential(&x, &y, None).unwrap();
    let (a, x0, r) = (f.a, f.x0, f.r);
    let mut g = [0.0; 3];
    for (&xi, &ri) in x.iter().zip(&f.residuals) {
        let e = (-(xi - x0) / r).exp();
        let grad = [1.0 - e, -a * e / r, -a * e * (xi - x0) / (r * r)];
        for k in 0..3 {
            // scale each gradient to the parameter so the check is unit-free
            g[k] += ri * grad[k] * [a, r, r][k];
        }
    }
    let scale = f.residual_norm * (x.len() as f64).sqrt() * a;
    for (k, v) in g.iter().enumerate() {
        assert!(v.abs() < 1e-6 * scale.max(1e-300), "component {k}: {v:e} (scale {scale:e})");
    }
    let se = f.stderr();
    assert!(se.iter().all(|s| s.is_finite() && *s > 0.0));
}

#[test]
fn too_few_points_is_an_error() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!(fit_saturating_exponential(&x, &[0.0, 0.1, 0.2, 0.2], None).is_err());
}

#[test]
fn power_law_recovers_exact_exponents() {
    let x = sweep();
    for (k, want) in [(2, 2.0), (1, 1.0)] {
        let y: Vec<f64> = x.iter().map(|w| 1e-7 * w.powi(k)).collect();
        let plateau = 1e3;
        let p = power_law_exponent(&x, &y, 3e-3, plateau).unwrap();
        assert!((p.exponent - want).abs() < 1e-10, "{}", p.exponent);
        assert_eq!(p.n_points, x.len());
    }
    let err = power_law_exponent(&x, &vec![0.5; x.len()], 3e-3, 1.0).unwrap_err();
    assert!(err.to_string().contains("weak-regime"), "{err}");
}

fn damped_rabi(omega: f64) -> f64 {
    // stand-in for the solver: a dephased two-level pulse of 100 µs
    let t = 100e-6;
    let d = 0.4 * omega;
    let eff = (omega * omega + d * d).sqrt();
    omega * omega / (eff * eff) * (0.5 * eff * t).sin().powi(2)
}

fn calibration_data(drives: &[f64], slope: f64) -> Vec<(f64, f64)> {
    drives.iter().map(|&d| (d, damped_rabi(2.0 * std::f64::consts::PI * slope * d))).collect()
}

#[test]
fn calibration_slope_is_recovered_and_scales_with_the_drive() {
    let drives: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
    let truth = 2700.0;
    let pts = calibration_data(&drives, truth);
    let bounds = default_slope_bounds(100e-6, 3.0);
    let m = fit_rabi_calibration(&pts, bounds, |w| Ok(damped_rabi(w))).unwrap();
    assert!((m.slope / truth - 1.0).abs() < 1e-6, "{}", m.slope);
    assert!(m.goodness < 1e-6);

    let c = 4.0;
    let scaled: Vec<(f64, f64)> = pts.iter().map(|&(d, f)| (d * c, f)).collect();
    let ms = fit_rabi_calibration(&scaled, default_slope_bounds(100e-6, 3.0 * c), |w| Ok(damped_rabi(w))).unwrap();
    assert!((ms.slope * c / m.slope - 1.0).abs() < 1e-6);
}

#[test]
fn calibration_converges_on_monotone_partial_data() {
    // every drive below the first maximum
    let truth = 900.0;
    let drives: Vec<f64> = (1..=6).map(|i| 0.8 * i as f64).collect();
    let pts = calibration_data(&drives, truth);
    assert!(pts.windows(2).all(|w| w[1].1 > w[0].1));
    let m = fit_rabi_calibration(&pts, default_slope_bounds(100e-6, 4.8), |w| Ok(damped_rabi(w))).unwrap();
    assert!((m.slope / truth - 1.0).abs() < 0.01, "{}", m.slope);
}

#[test]
fn calibration_rejects_degenerate_data() {
    let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 0.0)).collect();
    assert!(fit_rabi_calibration(&pts, (1.0, 10.0), |_| Ok(0.0)).is_err());
    assert!(fit_rabi_calibration(&pts[..3], (1.0, 10.0), |_| Ok(0.0)).is_err());
}
