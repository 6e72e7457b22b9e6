use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{CaosError, Result};
use crate::tone::{fft_processing_gain_db, ToneAnalyzer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FftGainMeasurement {
    pub n: usize,
    pub trials: usize,
    /// (A²/2)/σ² of the time samples, dB.
    pub input_snr_db: f64,
    /// A² over the mean squared error of the complex bin estimate, dB.
    pub output_snr_db: f64,
    pub gain_db: f64,
    pub predicted_db: f64,
}

/// Monte Carlo FFT gain: a bin-centred cosine of random phase in unit
/// white Gaussian noise, read from its FFT bin.
pub fn fft_gain_monte_carlo(n: usize, trials: usize, amplitude: f64, seed: u64) -> Result<FftGainMeasurement> {
    if n < 8 || trials == 0 {
        return Err(CaosError::Domain("need n >= 8 and at least one trial".into()));
    }
    if !(amplitude > 0.0) {
        return Err(CaosError::Domain("amplitude must be > 0".into()));
    }
    let bin = n / 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut analyzer = ToneAnalyzer::new();
    let mut samples = vec![0.0; n];
    let mut err2 = 0.0;
    for _ in 0..trials {
        let phase = rng.gen::<f64>() * 2.0 * PI;
        for (i, s) in samples.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *s = amplitude * (2.0 * PI * (bin * i) as f64 / n as f64 + phase).cos() + z;
        }
        let x = analyzer.spectrum(&samples)[bin];
        err2 += (x - Complex64::from_polar(amplitude, phase)).norm_sqr();
    }
    let input = 10.0 * (amplitude * amplitude / 2.0).log10();
    let output = 10.0 * (amplitude * amplitude / (err2 / trials as f64)).log10();
    Ok(FftGainMeasurement {
        n,
        trials,
        input_snr_db: input,
        output_snr_db: output,
        gain_db: output - input,
        predicted_db: fft_processing_gain_db(n),
    })
}
