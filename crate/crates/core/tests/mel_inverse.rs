use frn::dsp::{build_mel_filterbank, MelConfig};
use nalgebra::{DMatrix, DVector};

fn smooth_spectra(n_bins: usize) -> Vec<(&'static str, Vec<f64>)> {
    let f = |k: usize| 24_000.0 * k as f64 / n_bins as f64;
    vec![
        ("flat", vec![1.0; n_bins]),
        (
            "exp-decay",
            (0..n_bins).map(|k| 0.2 + (-f(k) / 6_000.0).exp()).collect(),
        ),
        (
            "lowpass",
            (0..n_bins)
                .map(|k| 1.0 / (1.0 + (f(k) / 3_000.0).powi(2)))
                .collect(),
        ),
        ("tilt", (0..n_bins).map(|k| 2.0 - f(k) / 24_000.0).collect()),
        (
            "formant",
            (0..n_bins)
                .map(|k| 0.3 + (-((f(k) - 1_500.0) / 2_000.0).powi(2)).exp())
                .collect(),
        ),
    ]
}

#[test]
fn pseudo_inverse_reconstructs_smooth_spectra() {
    let fb = build_mel_filterbank(&MelConfig::default()).unwrap();
    let m = DMatrix::from_row_slice(fb.n_mels, fb.n_bins, &fb.weights);
    let pinv = m.clone().pseudo_inverse(1e-10).unwrap();
    for (name, spec) in smooth_spectra(fb.n_bins) {
        let x = DVector::from_vec(spec);
        let mut mel = vec![0.0; fb.n_mels];
        fb.apply(x.as_slice(), &mut mel);
        let direct = &m * &x;
        assert!((direct - DVector::from_vec(mel.clone())).norm() < 1e-9);
        let back = &pinv * DVector::from_vec(mel);
        let rel = (&back - &x).norm() / x.norm();
        assert!(rel < 0.2, "{name}: relative error {rel:.3}");
    }
}
