//! Recovery of per-pixel power from a detector sample stream.
//!
//! Decoding runs in two steps. First each bit (or slot) is reduced to one
//! number: the sample mean in CDMA mode, the carrier's FFT bin in the FM
//! modes. The FM bin is read as its in-phase component against the known
//! sampled square-wave carrier and divided by that carrier's fundamental
//! (≈ 2/π), so every mode reports the detector level while the pixel is
//! lit. Second, in the code-division modes the per-bit values are
//! correlated with the bipolar Walsh rows.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;

use crate::codebook::Codebook;
use crate::detector::SampleStream;
use crate::error::{CaosError, Result};
use crate::mode::{Mode, ModeConfig};
use crate::tone::{self, ToneAnalyzer};

#[derive(Clone, Debug, PartialEq)]
pub struct BinEstimate {
    pub power: f64,
    /// Amplitude SNR against the estimated noise floor, `>= 0`.
    pub snr: f64,
    pub center_nm: Option<f64>,
    /// Cleared by normalization when the reference is too weak.
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredSpectrum {
    pub bins: Vec<BinEstimate>,
}

impl RecoveredSpectrum {
    pub fn from_parts(powers: &[f64], snrs: &[f64]) -> Self {
        Self {
            bins: powers
                .iter()
                .zip(snrs)
                .map(|(&power, &snr)| BinEstimate {
                    power,
                    snr,
                    center_nm: None,
                    valid: true,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.power).collect()
    }

    pub fn snrs(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.snr).collect()
    }

    /// Multiply every power estimate by `factor`; SNR is unchanged.
    pub fn scaled(mut self, factor: f64) -> Self {
        for b in &mut self.bins {
            b.power *= factor;
        }
        self
    }

    pub fn with_centers(mut self, centers: &[f64]) -> Result<Self> {
        if centers.len() != self.bins.len() {
            return Err(CaosError::Shape {
                expected: self.bins.len(),
                actual: centers.len(),
            });
        }
        for (b, &c) in self.bins.iter_mut().zip(centers) {
            b.center_nm = Some(c);
        }
        Ok(self)
    }

    /// Index of the largest valid estimate.
    pub fn peak_index(&self) -> Option<usize> {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.valid && b.power.is_finite())
            .max_by(|a, b| a.1.power.total_cmp(&b.1.power))
            .map(|(i, _)| i)
    }
}

/// Correlate unipolar-coded bit measurements with the bipolar rows:
/// `a_i = (2/W) Σ_k h[row_i][k] · m_k`.
pub fn decode_cdma(measurements: &[f64], codebook: &Codebook, assigned_rows: &[usize]) -> Result<Vec<f64>> {
    let w = codebook.order();
    if measurements.len() != w {
        return Err(CaosError::Shape {
            expected: w,
            actual: measurements.len(),
        });
    }
    assigned_rows
        .iter()
        .map(|&r| {
            if r == 0 || r >= w {
                return Err(CaosError::Config(format!("row {r} outside 1..{}", w - 1)));
            }
            let dot: f64 = codebook
                .row(r)
                .iter()
                .zip(measurements)
                .map(|(&h, &m)| h as f64 * m)
                .sum();
            Ok(2.0 / w as f64 * dot)
        })
        .collect()
}

fn snr(amplitude: f64, floor: f64) -> f64 {
    if amplitude <= 0.0 {
        0.0
    } else if floor > 0.0 {
        amplitude / floor
    } else {
        f64::INFINITY
    }
}

/// Carrier state at `local` samples into a unit; matches
/// [`ModulationPlan::carrier_on`](crate::plan::ModulationPlan::carrier_on).
fn carrier_on(local: usize, f_c: f64, f_s: f64) -> bool {
    (local as f64 * f_c / f_s).fract() < 0.5
}

/// Decode a sample stream produced under `config`. Powers come back in
/// stream units (volts) at the lit level of each pixel.
pub fn decode_stream(stream: &SampleStream, config: &ModeConfig, codebook: &Codebook) -> Result<RecoveredSpectrum> {
    config.validate()?;
    if (stream.sample_rate - config.sample_rate).abs() > 1e-9 * config.sample_rate {
        return Err(CaosError::Config(format!(
            "stream sampled at {} Hz but the mode expects {} Hz",
            stream.sample_rate, config.sample_rate
        )));
    }
    if config.mode.is_multiplexed() && codebook.order() != config.code_length {
        return Err(CaosError::Config(format!(
            "codebook order {} does not match code_length {}",
            codebook.order(),
            config.code_length
        )));
    }
    let pixel_count = match config.mode {
        Mode::Cdma | Mode::FmCdma => config.assigned_rows.len(),
        Mode::FmTdma => {
            let per_slot = config.sample_rate * config.slot_duration.unwrap_or(f64::NAN);
            ((stream.samples.len() as f64 / per_slot).round() as usize).max(1)
        }
    };
    let expected = config.total_samples(pixel_count);
    if stream.samples.len() != expected {
        return Err(CaosError::Framing(format!(
            "stream has {} samples, the acquisition needs {expected}",
            stream.samples.len()
        )));
    }
    let bounds = config.unit_boundaries(config.units(pixel_count));
    match config.mode {
        Mode::Cdma => decode_baseband(stream, config, codebook, &bounds),
        Mode::FmCdma | Mode::FmTdma => decode_carrier(stream, config, codebook, &bounds),
    }
}

fn decode_baseband(
    stream: &SampleStream,
    config: &ModeConfig,
    codebook: &Codebook,
    bounds: &[usize],
) -> Result<RecoveredSpectrum> {
    let w = config.code_length;
    let mut means = Vec::with_capacity(w);
    let mut residuals = Vec::with_capacity(stream.samples.len());
    let mut inv_len_sum = 0.0;
    for k in 0..w {
        let bit = &stream.samples[bounds[k]..bounds[k + 1]];
        let mean = bit.iter().sum::<f64>() / bit.len() as f64;
        residuals.extend(bit.iter().map(|x| (x - mean).abs()));
        inv_len_sum += 1.0 / bit.len() as f64;
        means.push(mean);
    }
    let powers = decode_cdma(&means, codebook, &config.assigned_rows)?;
    // robust per-sample sigma from the within-bit scatter
    let sigma = 1.4826 * select_median(&mut residuals);
    let floor = 2.0 / w as f64 * sigma * inv_len_sum.sqrt();
    let snrs: Vec<f64> = powers.iter().map(|&p| snr(p, floor)).collect();
    Ok(RecoveredSpectrum::from_parts(&powers, &snrs))
}

fn decode_carrier(
    stream: &SampleStream,
    config: &ModeConfig,
    codebook: &Codebook,
    bounds: &[usize],
) -> Result<RecoveredSpectrum> {
    let f_c = config.carrier.expect("validated carrier");
    let f_s = config.sample_rate;
    if !config.carrier_is_bin_centered() {
        log::warn!(
            "carrier {f_c} Hz is not centred on an FFT bin of {} samples; expect leakage",
            config.samples_per_unit
        );
    }
    let mut analyzer = ToneAnalyzer::new();
    // per block length: (bin, carrier reference, excluded bins)
    let mut refs: HashMap<usize, (usize, Complex64, Vec<bool>)> = HashMap::new();
    let units = bounds.len() - 1;
    let mut levels = Vec::with_capacity(units);
    let mut tones = Vec::with_capacity(units);
    let mut floors = Vec::with_capacity(units);
    let mut ref_norm_sum = 0.0;
    let mut pooled = Vec::new();
    let pool = config.mode == Mode::FmCdma;
    for k in 0..units {
        let block = &stream.samples[bounds[k]..bounds[k + 1]];
        let n = block.len();
        let (bin, reference, skip) = refs
            .entry(n)
            .or_insert_with(|| {
                let bin = tone::tone_bin(f_c, f_s, n);
                let pattern = (0..n).map(|i| carrier_on(i, f_c, f_s));
                (
                    bin,
                    tone::reference_coefficient(pattern, n, bin),
                    tone::excluded_bins(n, f_c, f_s),
                )
            })
            .clone();
        let spectrum = analyzer.spectrum(block);
        let along = tone::in_phase(spectrum[bin], reference);
        levels.push(along / reference.norm());
        tones.push(along);
        ref_norm_sum += reference.norm();
        if pool {
            tone::noise_bin_magnitudes(&spectrum[..=n / 2], &skip, &mut pooled);
        } else {
            let mut mags = Vec::with_capacity(n / 2);
            tone::noise_bin_magnitudes(&spectrum[..=n / 2], &skip, &mut mags);
            floors.push(select_median(&mut mags) * tone::NOISE_FLOOR_SCALE);
        }
    }
    match config.mode {
        Mode::FmCdma => {
            let w = config.code_length;
            let powers = decode_cdma(&levels, codebook, &config.assigned_rows)?;
            let bit_floor = select_median(&mut pooled) * tone::NOISE_FLOOR_SCALE;
            let mean_ref = ref_norm_sum / units as f64;
            let floor = 2.0 * bit_floor / (mean_ref * (w as f64).sqrt());
            let snrs: Vec<f64> = powers.iter().map(|&p| snr(p, floor)).collect();
            Ok(RecoveredSpectrum::from_parts(&powers, &snrs))
        }
        _ => {
            let snrs: Vec<f64> = tones.iter().zip(&floors).map(|(&t, &f)| snr(t, f)).collect();
            Ok(RecoveredSpectrum::from_parts(&levels, &snrs))
        }
    }
}

/// Median by selection; reorders `values`. Zero when empty.
fn select_median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let (_, hi, _) = values.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}
