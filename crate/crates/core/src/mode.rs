//! Acquisition timing and coding parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CaosError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// All pixels modulated at once by unipolar Walsh bit sequences.
    Cdma,
    /// As `Cdma`, but every "1" bit carries a square-wave carrier.
    FmCdma,
    /// One pixel per time slot, carrying the carrier.
    FmTdma,
}

impl Mode {
    pub fn is_multiplexed(self) -> bool {
        matches!(self, Mode::Cdma | Mode::FmCdma)
    }

    pub fn has_carrier(self) -> bool {
        matches!(self, Mode::FmCdma | Mode::FmTdma)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cdma => "cdma",
            Mode::FmCdma => "fm-cdma",
            Mode::FmTdma => "fm-tdma",
        })
    }
}

/// Validated timing of one acquisition.
///
/// A *unit* is a code bit in the CDMA modes and a time slot in FM-TDMA.
/// Unit `k` starts at sample `round(k · unit_duration · sample_rate)`, so
/// every boundary sits on an integer sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    pub mode: Mode,
    /// Code bit rate f_B in Hz. CDMA modes only.
    pub bit_rate: Option<f64>,
    /// Square-wave carrier f_c in Hz. FM modes only.
    pub carrier: Option<f64>,
    /// f_c / f_B. FM-CDMA only.
    pub carrier_ratio: Option<u32>,
    pub sample_rate: f64,
    /// Nominal samples per bit or slot.
    pub samples_per_unit: usize,
    /// Slot length T_D in seconds. FM-TDMA only.
    pub slot_duration: Option<f64>,
    /// Walsh code length W. CDMA modes only.
    pub code_length: usize,
    /// Codebook row of each pixel. CDMA modes only.
    pub assigned_rows: Vec<usize>,
}

fn round_even(x: f64) -> f64 {
    x.round_ties_even()
}

impl ModeConfig {
    pub fn cdma(code_length: usize, bit_rate: f64, sample_rate: f64, assigned_rows: Vec<usize>) -> Result<Self> {
        let cfg = Self {
            mode: Mode::Cdma,
            bit_rate: Some(bit_rate),
            carrier: None,
            carrier_ratio: None,
            sample_rate,
            samples_per_unit: round_even(sample_rate / bit_rate).max(0.0) as usize,
            slot_duration: None,
            code_length,
            assigned_rows,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fm_cdma(
        code_length: usize,
        bit_rate: f64,
        carrier_ratio: u32,
        sample_rate: f64,
        assigned_rows: Vec<usize>,
    ) -> Result<Self> {
        let cfg = Self {
            mode: Mode::FmCdma,
            bit_rate: Some(bit_rate),
            carrier: Some(bit_rate * carrier_ratio as f64),
            carrier_ratio: Some(carrier_ratio),
            sample_rate,
            samples_per_unit: round_even(sample_rate / bit_rate).max(0.0) as usize,
            slot_duration: None,
            code_length,
            assigned_rows,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fm_tdma(carrier: f64, sample_rate: f64, slot_duration: f64) -> Result<Self> {
        let cfg = Self {
            mode: Mode::FmTdma,
            bit_rate: None,
            carrier: Some(carrier),
            carrier_ratio: None,
            sample_rate,
            samples_per_unit: round_even(sample_rate * slot_duration).max(0.0) as usize,
            slot_duration: Some(slot_duration),
            code_length: 0,
            assigned_rows: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rows `1..=pixels`, the default assignment.
    pub fn sequential_rows(pixels: usize) -> Vec<usize> {
        (1..=pixels).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CaosError::Config(msg));
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return bad(format!("sample_rate must be > 0, got {}", self.sample_rate));
        }
        match self.mode {
            Mode::Cdma | Mode::FmCdma => {
                let Some(f_b) = self.bit_rate.filter(|f| *f > 0.0 && f.is_finite()) else {
                    return bad(format!("{} needs a positive bit_rate", self.mode));
                };
                if self.code_length < 2 || !self.code_length.is_power_of_two() {
                    return bad(format!(
                        "code_length must be a power of two >= 2, got {}",
                        self.code_length
                    ));
                }
                let n = round_even(self.sample_rate / f_b);
                if n < 1.0 || self.samples_per_unit as f64 != n {
                    return bad(format!(
                        "samples_per_unit must equal round(sample_rate / bit_rate) = {n}, got {}",
                        self.samples_per_unit
                    ));
                }
                if self.assigned_rows.is_empty() {
                    return bad("assigned_rows is empty".into());
                }
                let mut seen = vec![false; self.code_length];
                for &r in &self.assigned_rows {
                    if r == 0 || r >= self.code_length {
                        return bad(format!(
                            "assigned row {r} outside 1..{}",
                            self.code_length - 1
                        ));
                    }
                    if std::mem::replace(&mut seen[r], true) {
                        return bad(format!("codebook row {r} assigned twice"));
                    }
                }
                if self.mode == Mode::FmCdma {
                    let (Some(f_c), Some(p)) = (self.carrier, self.carrier_ratio) else {
                        return bad("fm-cdma needs carrier and carrier_ratio".into());
                    };
                    if p < 1 {
                        return bad("carrier_ratio must be >= 1".into());
                    }
                    let expect = f_b * p as f64;
                    if (f_c - expect).abs() > 1e-9 * expect {
                        return bad(format!(
                            "carrier {f_c} Hz must equal bit_rate x carrier_ratio = {expect} Hz"
                        ));
                    }
                    self.check_carrier(f_c)?;
                }
            }
            Mode::FmTdma => {
                let Some(t_d) = self.slot_duration.filter(|t| *t > 0.0 && t.is_finite()) else {
                    return bad("fm-tdma needs a positive slot_duration".into());
                };
                let n = round_even(self.sample_rate * t_d);
                if n < 1.0 || self.samples_per_unit as f64 != n {
                    return bad(format!(
                        "samples_per_unit must equal round(sample_rate x slot_duration) = {n}, got {}",
                        self.samples_per_unit
                    ));
                }
                let Some(f_c) = self.carrier else {
                    return bad("fm-tdma needs a carrier".into());
                };
                self.check_carrier(f_c)?;
            }
        }
        Ok(())
    }

    fn check_carrier(&self, f_c: f64) -> Result<()> {
        if !(f_c > 0.0 && f_c < self.sample_rate / 2.0) {
            return Err(CaosError::Config(format!(
                "carrier {f_c} Hz must lie in (0, {}) Hz",
                self.sample_rate / 2.0
            )));
        }
        if round_even(f_c * self.samples_per_unit as f64 / self.sample_rate) < 1.0 {
            return Err(CaosError::Config(format!(
                "carrier {f_c} Hz is below the first FFT bin for {} samples",
                self.samples_per_unit
            )));
        }
        Ok(())
    }

    /// Bit time 1/f_B or slot time T_D.
    pub fn unit_duration(&self) -> f64 {
        match self.mode {
            Mode::Cdma | Mode::FmCdma => 1.0 / self.bit_rate.unwrap_or(f64::NAN),
            Mode::FmTdma => self.slot_duration.unwrap_or(f64::NAN),
        }
    }

    /// Number of bits (W) or slots (pixel count).
    pub fn units(&self, pixel_count: usize) -> usize {
        if self.mode.is_multiplexed() {
            self.code_length
        } else {
            pixel_count
        }
    }

    /// `units + 1` sample indices delimiting each bit or slot.
    pub fn unit_boundaries(&self, units: usize) -> Vec<usize> {
        (0..=units).map(|k| self.boundary(k)).collect()
    }

    fn boundary(&self, k: usize) -> usize {
        let exact = match self.mode {
            Mode::Cdma | Mode::FmCdma => k as f64 * self.sample_rate / self.bit_rate.unwrap_or(f64::NAN),
            Mode::FmTdma => k as f64 * self.sample_rate * self.slot_duration.unwrap_or(f64::NAN),
        };
        round_even(exact) as usize
    }

    /// Total samples in an acquisition of `pixel_count` pixels.
    pub fn total_samples(&self, pixel_count: usize) -> usize {
        self.boundary(self.units(pixel_count))
    }

    /// FFT bin holding the carrier for a block of `len` samples.
    pub fn carrier_bin(&self, len: usize) -> Option<usize> {
        self.carrier
            .map(|f_c| round_even(f_c * len as f64 / self.sample_rate) as usize)
    }

    /// True when the carrier falls exactly on an FFT bin of a nominal unit.
    pub fn carrier_is_bin_centered(&self) -> bool {
        match self.carrier {
            Some(f_c) => {
                let k = f_c * self.samples_per_unit as f64 / self.sample_rate;
                (k - k.round()).abs() < 1e-9
            }
            None => true,
        }
    }
}

/// Duration of one full spectral acquisition: W/f_B for the code-division
/// modes, pixel_count × T_D for FM-TDMA.
pub fn encoding_time(config: &ModeConfig, pixel_count: usize) -> f64 {
    match config.mode {
        Mode::Cdma | Mode::FmCdma => config.code_length as f64 / config.bit_rate.unwrap_or(f64::NAN),
        Mode::FmTdma => pixel_count as f64 * config.slot_duration.unwrap_or(f64::NAN),
    }
}
