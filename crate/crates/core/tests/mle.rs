use fracboot::arfima::{mle_fit, simulate_arfima, ArfimaParams, MleOptions};
use fracboot::rng::Stream;

#[test]
fn long_ar1_path_recovers_parameters() {
    // Fisher information at (d, φ) = (0, 0.6) puts both standard deviations
    // near 0.018-0.019 at T = 20000; the band is three of them. The search
    // box is narrowed around the truth and the grid coarsened to keep the
    // O(T²) likelihood affordable.
    let y = simulate_arfima(&ArfimaParams::gaussian(0.0, 0.6).unwrap(), 20_000, &Stream::new(17)).unwrap();
    let options =
        MleOptions { grid_step: 0.05, d_bounds: (-0.15, 0.15), phi_bounds: (0.4, 0.8), ..MleOptions::default() };
    let fit = mle_fit(&y, &options).unwrap();
    assert!(fit.d.abs() < 3.0 * 0.018, "d = {}", fit.d);
    assert!((fit.phi - 0.6).abs() < 3.0 * 0.019, "phi = {}", fit.phi);
    assert!(fit.loglik >= fit.grid_loglik);
}

#[test]
fn mle_bias_on_short_ar1_series() {
    // Mean MLE bias of d at T = 500, (d, φ) = (0, 0.3); the reference value
    // is -0.0240 and the band is three Monte Carlo standard errors.
    let params = ArfimaParams::gaussian(0.0, 0.3).unwrap();
    let options = MleOptions { grid_step: 0.1, ..MleOptions::default() };
    let r = 200;
    let estimates: Vec<f64> = (0..r)
        .map(|i| mle_fit(&simulate_arfima(&params, 500, &Stream::new(1000 + i)).unwrap(), &options).unwrap().d)
        .collect();
    let mean = estimates.iter().sum::<f64>() / r as f64;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt();
    let se = sd / (r as f64).sqrt();
    assert!((mean - -0.0240).abs() <= 3.0 * se, "mean bias {mean}, se {se}");
}
