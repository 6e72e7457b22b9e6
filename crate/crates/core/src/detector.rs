//! Point photodetector, amplifier and ADC.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decode::decode_stream;
use crate::error::{CaosError, Result};
use crate::grating::PixelLayout;
use crate::mode::{Mode, ModeConfig};
use crate::plan::{build_plan, ModulationPlan};

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// A/W.
    pub responsivity: f64,
    /// V/A.
    pub transimpedance_gain: f64,
    /// White output noise density, V/√Hz.
    pub noise_floor: f64,
    /// V.
    #[serde(default)]
    pub dark_offset: f64,
    #[serde(default)]
    pub shot_noise_enabled: bool,
    /// Output clips at ± this voltage.
    pub saturation_voltage: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.responsivity)
            || !finite_nonneg(self.transimpedance_gain)
            || !finite_nonneg(self.noise_floor)
        {
            return Err(CaosError::Config(
                "responsivity, gain and noise floor must be finite and >= 0".into(),
            ));
        }
        if !self.dark_offset.is_finite() {
            return Err(CaosError::Config("dark_offset must be finite".into()));
        }
        if !(self.saturation_voltage > 0.0) || !self.saturation_voltage.is_finite() {
            return Err(CaosError::Config("saturation_voltage must be > 0".into()));
        }
        Ok(())
    }

    /// Volts per watt of optical power.
    pub fn volts_per_watt(&self) -> f64 {
        self.responsivity * self.transimpedance_gain
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub sample_rate: f64,
    #[serde(default = "default_bits")]
    pub bits: u32,
    /// Samples are confined to ± this voltage.
    pub full_scale: f64,
    /// Round to the ADC grid. Off gives an ideal, unquantised converter.
    #[serde(default = "yes")]
    pub quantize: bool,
}

fn default_bits() -> u32 {
    16
}

fn yes() -> bool {
    true
}

/// `x.round_ties_even()` without the libm call on baseline x86-64.
fn round_half_even(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    if x.abs() < 2_251_799_813_685_248.0 {
        (x + SHIFT) - SHIFT
    } else {
        x.round_ties_even()
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bits < 1 || self.bits > 52 {
            return Err(CaosError::Config(format!("ADC bits must be in 1..=52, got {}", self.bits)));
        }
        if !(self.full_scale > 0.0) || !self.full_scale.is_finite() {
            return Err(CaosError::Config("ADC full_scale must be > 0".into()));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(CaosError::Config("ADC sample_rate must be > 0".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.full_scale / (1u64 << self.bits) as f64
    }

    fn convert(&self, v: f64) -> f64 {
        if self.quantize {
            let step = self.step();
            (round_half_even(v / step) * step).clamp(-self.full_scale, self.full_scale)
        } else {
            v.clamp(-self.full_scale, self.full_scale)
        }
    }
}

/// Digitised detector output.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStream {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl SampleStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with header `time_s,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["time_s", "value"])?;
        for (n, v) in self.samples.iter().enumerate() {
            wtr.write_record([(n as f64 / self.sample_rate).to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read the CSV form; the sample rate comes from the first time step.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| CaosError::Parse("short CSV record".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CaosError::Parse(e.to_string()))
            };
            times.push(field(0)?);
            samples.push(field(1)?);
        }
        if times.len() < 2 {
            return Err(CaosError::Parse(
                "need at least two samples to recover the sample rate".into(),
            ));
        }
        let sample_rate = 1.0 / (times[1] - times[0]);
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(CaosError::Parse("time column is not increasing".into()));
        }
        Ok(Self { sample_rate, samples })
    }

    /// Raw little-endian layout: `f64` sample rate, `u64` sample count,
    /// then the samples as `f64`.
    pub fn write_raw<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.sample_rate.to_le_bytes())?;
        out.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for v in &self.samples {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let sample_rate = f64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let len = u64::from_le_bytes(word) as usize;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(CaosError::Framing(format!(
                "header announces {len} samples but {} bytes follow",
                bytes.len()
            )));
        }
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { sample_rate, samples })
    }
}

/// Simulate the detector chain for one acquisition.
///
/// Each sample is `P(t)·R·G + offset + noise`, clipped to the saturation
/// voltage and converted by the ADC. `P(t)` is the summed power of the
/// pixels the plan has lit. Noise is white Gaussian with standard
/// deviation `noise_floor · sqrt(f_s / 2)`; optional shot noise draws the
/// photoelectron count per sample from a Poisson law.
pub fn detect(plan: &ModulationPlan, bin_powers: &[f64], det: &DetectorConfig, adc: &AdcConfig) -> Result<SampleStream> {
    det.validate()?;
    adc.validate()?;
    if (adc.sample_rate - plan.sample_rate()).abs() > 1e-9 * plan.sample_rate() {
        return Err(CaosError::Config(format!(
            "ADC runs at {} Hz but the plan is timed for {} Hz",
            adc.sample_rate,
            plan.sample_rate()
        )));
    }
    if bin_powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(CaosError::Domain("bin powers must be finite and >= 0".into()));
    }
    let levels = plan.unit_levels(bin_powers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(det.rng_seed);
    let sigma = det.noise_floor * (adc.sample_rate / 2.0).sqrt();
    let electrons_per_amp_sample = 1.0 / (ELEMENTARY_CHARGE * adc.sample_rate);
    let mut samples = Vec::with_capacity(plan.total_samples());
    let mut carrier: Vec<bool> = Vec::new();
    for (k, &level) in levels.iter().enumerate() {
        let range = plan.unit_range(k);
        if carrier.len() != range.len() {
            carrier = (0..range.len()).map(|i| plan.carrier_on(i)).collect();
        }
        let lit_current = level * det.responsivity;
        let lit_volts = lit_current * det.transimpedance_gain + det.dark_offset;
        for &on in &carrier {
            let mut v = if !on {
                det.dark_offset
            } else if det.shot_noise_enabled && lit_current > 0.0 {
                let mean = lit_current * electrons_per_amp_sample;
                let count: f64 = Poisson::new(mean)
                    .map_err(|e| CaosError::Domain(e.to_string()))?
                    .sample(&mut rng);
                count / electrons_per_amp_sample * det.transimpedance_gain + det.dark_offset
            } else {
                lit_volts
            };
            if sigma > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                v += sigma * z;
            }
            let v = v.clamp(-det.saturation_voltage, det.saturation_voltage);
            samples.push(adc.convert(v));
        }
    }
    Ok(SampleStream {
        sample_rate: adc.sample_rate,
        samples,
    })
}

/// Mean decoded SNR of a single lit FM-TDMA pixel at `power`, over
/// `trials` seeds derived from the detector seed.
pub fn single_pixel_snr(
    det: &DetectorConfig,
    adc: &AdcConfig,
    power: f64,
    mode: &ModeConfig,
    trials: usize,
) -> Result<f64> {
    let layout = PixelLayout {
        pixel_count: 1,
        pixel_width: 1,
        pixel_height: 1,
        start_column: 0,
    };
    // FM-TDMA never reads the codebook
    let unused = crate::codebook::sylvester_codebook(2)?;
    let plan = build_plan(mode, &layout, &unused)?;
    let mut total = 0.0;
    for t in 0..trials {
        let trial_det = DetectorConfig {
            rng_seed: crate::seeds::derive(det.rng_seed, 0, t as u64),
            ..det.clone()
        };
        let stream = detect(&plan, &[power], &trial_det, adc)?;
        total += decode_stream(&stream, mode, &unused)?.bins[0].snr;
    }
    Ok(total / trials as f64)
}

/// Find the noise density at which an FM-TDMA pixel receiving
/// `target_power` decodes with mean SNR `target_snr`.
///
/// Bisection in log space. Every probe reuses the same trial seeds, so the
/// Monte Carlo SNR is a smooth, decreasing function of the noise floor.
pub fn calibrate_noise_floor(
    det: &DetectorConfig,
    adc: &AdcConfig,
    target_power: f64,
    target_snr: f64,
    mode: &ModeConfig,
    trials: usize,
) -> Result<f64> {
    if mode.mode != Mode::FmTdma {
        return Err(CaosError::Config(
            "noise calibration runs on an FM-TDMA mode".into(),
        ));
    }
    if trials == 0 {
        return Err(CaosError::Config("calibration needs at least one trial".into()));
    }
    if !(target_power > 0.0) {
        return Err(CaosError::Domain("target power must be > 0".into()));
    }
    if !target_snr.is_finite() || !(target_snr > 0.0) {
        return Err(CaosError::Calibration(format!(
            "target SNR {target_snr} cannot be bracketed"
        )));
    }
    // first guess from the square-wave fundamental and the floor estimator
    let tone = 2.0 / std::f64::consts::PI * target_power * det.volts_per_watt();
    let t_d = mode.slot_duration.unwrap_or(1.0);
    let guess = tone * t_d.sqrt() / (1.39 * target_snr);
    if !(guess > 0.0) || !guess.is_finite() {
        return Err(CaosError::Calibration("detector has zero gain".into()));
    }
    let probe = |floor: f64| -> Result<f64> {
        let d = DetectorConfig {
            noise_floor: floor,
            ..det.clone()
        };
        single_pixel_snr(&d, adc, target_power, mode, trials)
    };
    let (mut lo, mut hi) = (guess / 30.0, guess * 30.0);
    let (snr_lo, snr_hi) = (probe(lo)?, probe(hi)?);
    if !(snr_lo >= target_snr && snr_hi <= target_snr) {
        return Err(CaosError::Calibration(format!(
            "SNR {snr_hi:.3}..{snr_lo:.3} over noise floors {lo:.3e}..{hi:.3e} does not bracket {target_snr}"
        )));
    }
    while hi / lo > 1.0 + 1e-4 {
        let mid = (lo * hi).sqrt();
        if probe(mid)? >= target_snr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::sylvester_codebook;

    fn quiet() -> DetectorConfig {
        DetectorConfig {
            responsivity: 0.5,
            transimpedance_gain: 1e6,
            noise_floor: 0.0,
            dark_offset: 0.0,
            shot_noise_enabled: false,
            saturation_voltage: 10.0,
            rng_seed: 7,
        }
    }

    fn ideal_adc(f_s: f64) -> AdcConfig {
        AdcConfig {
            sample_rate: f_s,
            bits: 16,
            full_scale: 10.0,
            quantize: false,
        }
    }

    /// Row 1 of H_2 lights the pixel during the first of two bits.
    fn half_lit_plan() -> ModulationPlan {
        let cfg = ModeConfig::cdma(2, 100.0, 1000.0, vec![1]).unwrap();
        let layout = PixelLayout {
            pixel_count: 1,
            pixel_width: 1,
            pixel_height: 1,
            start_column: 0,
        };
        build_plan(&cfg, &layout, &sylvester_codebook(2).unwrap()).unwrap()
    }

    #[test]
    fn fast_rounding_matches_std() {
        for x in [0.5, 1.5, 2.5, -0.5, -1.5, 3.49, -3.51, 1e15 + 0.5, 7e300, 0.0, -0.0] {
            assert_eq!(round_half_even(x), x.round_ties_even(), "{x}");
        }
    }

    #[test]
    fn dark_and_quiet_is_zero() {
        let plan = half_lit_plan();
        let s = detect(&plan, &[0.0], &quiet(), &ideal_adc(1000.0)).unwrap();
        assert!(s.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_chain() {
        let plan = half_lit_plan();
        let s = detect(&plan, &[1e-9], &quiet(), &ideal_adc(1000.0)).unwrap();
        // row 1 of H_2 is (+, -): lit for the first 10 samples
        for v in &s.samples[..10] {
            assert!((v - 0.5e-3).abs() < 1e-15);
        }
        assert!(s.samples[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturation_clips() {
        let plan = half_lit_plan();
        let det = DetectorConfig {
            saturation_voltage: 1.0,
            ..quiet()
        };
        let s = detect(&plan, &[1.0], &det, &ideal_adc(1000.0)).unwrap();
        assert_eq!(s.samples[0], 1.0);
    }

    #[test]
    fn quantizer_error_bounded() {
        let plan = half_lit_plan();
        let adc = AdcConfig {
            quantize: true,
            bits: 8,
            ..ideal_adc(1000.0)
        };
        let det = DetectorConfig {
            noise_floor: 1e-2,
            ..quiet()
        };
        let exact = detect(&plan, &[3.3e-6], &det, &ideal_adc(1000.0)).unwrap();
        let quant = detect(&plan, &[3.3e-6], &det, &adc).unwrap();
        for (a, b) in exact.samples.iter().zip(&quant.samples) {
            assert!((a - b).abs() <= adc.step() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let plan = half_lit_plan();
        let det = DetectorConfig {
            noise_floor: 1e-3,
            shot_noise_enabled: true,
            ..quiet()
        };
        let a = detect(&plan, &[1e-9], &det, &ideal_adc(1000.0)).unwrap();
        let b = detect(&plan, &[1e-9], &det, &ideal_adc(1000.0)).unwrap();
        assert_eq!(a, b);
        let other = DetectorConfig { rng_seed: 8, ..det };
        assert_ne!(a, detect(&plan, &[1e-9], &other, &ideal_adc(1000.0)).unwrap());
    }

    #[test]
    fn shape_and_rate_mismatch() {
        let plan = half_lit_plan();
        assert!(matches!(
            detect(&plan, &[1.0, 2.0], &quiet(), &ideal_adc(1000.0)).unwrap_err(),
            CaosError::Shape { .. }
        ));
        assert!(matches!(
            detect(&plan, &[1.0], &quiet(), &ideal_adc(999.0)).unwrap_err(),
            CaosError::Config(_)
        ));
    }

    #[test]
    fn stream_io_round_trip() {
        let s = SampleStream {
            sample_rate: 4.0,
            samples: vec![0.25, -1.5, 3.0],
        };
        let mut raw = Vec::new();
        s.write_raw(&mut raw).unwrap();
        assert_eq!(raw.len(), 16 + 24);
        assert_eq!(SampleStream::read_raw(&raw[..]).unwrap(), s);
        assert!(SampleStream::read_raw(&raw[..raw.len() - 8]).is_err());
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8_lossy(&csv).starts_with("time_s,value\n0,0.25\n0.25,-1.5\n"));
        assert_eq!(SampleStream::read_csv(&csv[..]).unwrap(), s);
    }

    #[test]
    fn unreachable_snr_fails_calibration() {
        let mode = ModeConfig::fm_tdma(52.0, 256.0, 1.0).unwrap();
        let adc = AdcConfig {
            sample_rate: 256.0,
            ..ideal_adc(256.0)
        };
        let err = calibrate_noise_floor(&quiet(), &adc, 1e-9, f64::INFINITY, &mode, 10).unwrap_err();
        assert!(matches!(err, CaosError::Calibration(_)));
        let cdma = ModeConfig::cdma(2, 1.0, 256.0, vec![1]).unwrap();
        assert!(calibrate_noise_floor(&quiet(), &adc, 1e-9, 1.2, &cdma, 10).is_err());
    }
}
