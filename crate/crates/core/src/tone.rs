//! FFT tone extraction and noise-floor estimation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CaosError, Result};

/// Scale from the median of Rayleigh-distributed noise-bin magnitudes to
/// a mean-equivalent floor.
pub const NOISE_FLOOR_SCALE: f64 = 1.4826 / 1.253_314_137_315_500_3;

/// FFT gain 10·log10(N/2) of an N-point transform, dB.
pub fn fft_processing_gain_db(n_samples: usize) -> f64 {
    10.0 * (n_samples as f64 / 2.0).log10()
}

/// Nearest bin to `f_c`, ties to even.
pub fn tone_bin(f_c: f64, f_s: f64, n: usize) -> usize {
    (f_c * n as f64 / f_s).round_ties_even() as usize
}

/// Magnitude of the FFT bin nearest `f_c`, scaled by 2/N so a bin-centred
/// cosine of amplitude A reads A.
pub fn fft_tone_amplitude(samples: &[f64], f_c: f64, f_s: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(CaosError::Domain(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(f_s > 0.0) || !(f_c > 0.0 && f_c < f_s / 2.0) {
        return Err(CaosError::Domain(format!(
            "tone at {f_c} Hz is outside (0, {}) Hz",
            f_s / 2.0
        )));
    }
    let mut analyzer = ToneAnalyzer::new();
    let spectrum = analyzer.spectrum(samples);
    Ok(spectrum[tone_bin(f_c, f_s, samples.len())].norm())
}

/// Forward FFTs with plans cached per length.
pub struct ToneAnalyzer {
    planner: FftPlanner<f64>,
    plans: HashMap<usize, Arc<dyn Fft<f64>>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Default for ToneAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl ToneAnalyzer {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            buffer: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Full complex spectrum scaled by 2/N. The returned slice is reused by
    /// the next call.
    pub fn spectrum(&mut self, samples: &[f64]) -> &[Complex64] {
        let n = samples.len();
        let planner = &mut self.planner;
        let fft = self
            .plans
            .entry(n)
            .or_insert_with(|| planner.plan_fft_forward(n))
            .clone();
        self.buffer.clear();
        self.buffer.extend(samples.iter().map(|&x| Complex64::new(x, 0.0)));
        let need = fft.get_inplace_scratch_len();
        if self.scratch.len() < need {
            self.scratch.resize(need, Complex64::default());
        }
        fft.process_with_scratch(&mut self.buffer, &mut self.scratch[..need]);
        let scale = 2.0 / n as f64;
        for x in &mut self.buffer {
            *x *= scale;
        }
        &self.buffer
    }
}

/// Bins of an `n`-point transform that carry DC, Nyquist, or the carrier
/// and its odd harmonics (folded, ±1 bin).
pub fn excluded_bins(n: usize, f_c: f64, f_s: f64) -> Vec<bool> {
    let half = n / 2;
    let mut skip = vec![false; half + 1];
    skip[0] = true;
    if n % 2 == 0 {
        skip[half] = true;
    }
    for j in (1..=31).step_by(2) {
        let mut f = (j as f64 * f_c) % f_s;
        if f > f_s / 2.0 {
            f = f_s - f;
        }
        let b = (f * n as f64 / f_s).round() as isize;
        for d in -1..=1 {
            let idx = b + d;
            if idx >= 0 && (idx as usize) <= half {
                skip[idx as usize] = true;
            }
        }
    }
    skip
}

/// Median of `values`; `None` when empty.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mid = values.len() / 2;
    values.sort_by(|a, b| a.total_cmp(b));
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Collect the magnitudes of the non-excluded positive-frequency bins.
pub fn noise_bin_magnitudes(spectrum: &[Complex64], skip: &[bool], into: &mut Vec<f64>) {
    into.extend(
        spectrum
            .iter()
            .zip(skip)
            .filter(|(_, &s)| !s)
            .map(|(x, _)| x.norm_sqr().sqrt()),
    );
}

/// Mean-equivalent floor from a pool of noise-bin magnitudes.
pub fn noise_floor_from_magnitudes(mags: &mut [f64]) -> f64 {
    median(mags).unwrap_or(0.0) * NOISE_FLOOR_SCALE
}

/// 2/N-scaled DFT coefficient of a 0/1 carrier pattern at `bin`.
pub fn reference_coefficient(pattern: impl Iterator<Item = bool>, n: usize, bin: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, on) in pattern.enumerate() {
        if on {
            // reduce the phase index exactly before converting to an angle
            let idx = ((i as u128 * bin as u128) % n as u128) as f64;
            let theta = -2.0 * PI * idx / n as f64;
            acc += Complex64::new(theta.cos(), theta.sin());
        }
    }
    acc * (2.0 / n as f64)
}

/// Component of `x` along the direction of `reference`.
pub fn in_phase(x: Complex64, reference: Complex64) -> f64 {
    (x * reference.conj()).re / reference.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(n: usize, bin: usize, amp: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * bin as f64 * i as f64 / n as f64 + phase).cos())
            .collect()
    }

    #[test]
    fn bin_centred_cosine_reads_its_amplitude() {
        for &(n, bin) in &[(8usize, 1usize), (64, 5), (1000, 37), (1024, 100), (131072, 1040)] {
            let f_s = 1000.0;
            let f_c = bin as f64 * f_s / n as f64;
            let a = fft_tone_amplitude(&cosine(n, bin, 1.0, 0.3), f_c, f_s).unwrap();
            assert!((a - 1.0).abs() < 1e-9, "n={n} a={a}");
        }
    }

    #[test]
    fn paper_carrier_bin() {
        assert_eq!(tone_bin(520.0, 65535.0, 131_072), 1040);
        assert_eq!(tone_bin(520.0, 4096.0, 8192), 1040);
    }

    #[test]
    fn ties_round_to_even() {
        // 2.5 -> 2, 3.5 -> 4
        assert_eq!(tone_bin(2.5, 100.0, 100), 2);
        assert_eq!(tone_bin(3.5, 100.0, 100), 4);
    }

    #[test]
    fn zeros_give_zero() {
        assert_eq!(fft_tone_amplitude(&[0.0; 256], 10.0, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_tones() {
        assert!(fft_tone_amplitude(&[0.0; 16], 60.0, 100.0).is_err());
        assert!(fft_tone_amplitude(&[0.0; 16], 0.0, 100.0).is_err());
        assert!(fft_tone_amplitude(&[0.0], 10.0, 100.0).is_err());
    }

    #[test]
    fn gain_values() {
        assert!((fft_processing_gain_db(131_072) - 48.164_799_306_236_99).abs() < 1e-9);
        assert_eq!(fft_processing_gain_db(2), 0.0);
        assert!((fft_processing_gain_db(1024) - 27.092_699_609_758_3).abs() < 1e-9);
    }

    #[test]
    fn reference_of_square_wave_is_near_two_over_pi() {
        let n = 8192;
        let pattern = (0..n).map(|i| ((i as f64) * 520.0 / 4096.0).fract() < 0.5);
        let c = reference_coefficient(pattern, n, 1040);
        assert!((c.norm() - 2.0 / PI).abs() < 0.01, "{}", c.norm());
    }

    #[test]
    fn in_phase_projection() {
        let r = Complex64::new(0.0, 2.0);
        assert!((in_phase(Complex64::new(3.0, 1.5), r) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn harmonic_exclusion() {
        let skip = excluded_bins(64, 10.0, 64.0);
        assert!(skip[0] && skip[32]);
        assert!(skip[9] && skip[10] && skip[11]);
        assert!(skip[30]); // 3rd harmonic
        assert!(!skip[20]);
    }
}
