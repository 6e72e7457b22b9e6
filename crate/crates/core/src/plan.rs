//! Micromirror on/off schedules for each acquisition mode.

use std::io::Write;

use serde::Serialize;

use crate::codebook::Codebook;
use crate::error::{CaosError, Result};
use crate::grating::PixelLayout;
use crate::mode::{encoding_time, Mode, ModeConfig};

/// On/off state of every pixel over a whole acquisition, on the ADC sample
/// clock.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationPlan {
    mode: Mode,
    pixel_count: usize,
    sample_rate: f64,
    carrier: Option<f64>,
    unit_duration: f64,
    boundaries: Vec<usize>,
    /// Unipolar code bits, one row per pixel. Empty for FM-TDMA.
    codes: Vec<Vec<u8>>,
    duration: f64,
}

/// Sidecar describing the frame timing of an exported schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleTiming {
    pub mode: Mode,
    pub pixel_count: usize,
    pub units: usize,
    pub unit_duration_s: f64,
    pub frames_per_unit: usize,
    pub frame_duration_s: f64,
    pub total_frames: usize,
    pub total_duration_s: f64,
    pub sample_rate_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
}

/// Assign codes (or slots) to the pixels of `layout`.
pub fn build_plan(config: &ModeConfig, layout: &PixelLayout, codebook: &Codebook) -> Result<ModulationPlan> {
    config.validate()?;
    let m = layout.pixel_count;
    let codes = if config.mode.is_multiplexed() {
        let w = codebook.order();
        if w != config.code_length {
            return Err(CaosError::Config(format!(
                "codebook order {w} does not match code_length {}",
                config.code_length
            )));
        }
        if m > w - 1 {
            return Err(CaosError::Capacity(format!(
                "{m} pixels need more than the {} usable codes of a length-{w} codebook",
                w - 1
            )));
        }
        if config.assigned_rows.len() != m {
            return Err(CaosError::Config(format!(
                "{} assigned rows for {m} pixels",
                config.assigned_rows.len()
            )));
        }
        config
            .assigned_rows
            .iter()
            .map(|&r| codebook.unipolar_row(r))
            .collect()
    } else {
        if m == 0 {
            return Err(CaosError::Config("layout has no pixels".into()));
        }
        Vec::new()
    };
    let units = config.units(m);
    Ok(ModulationPlan {
        mode: config.mode,
        pixel_count: m,
        sample_rate: config.sample_rate,
        carrier: config.carrier.filter(|_| config.mode.has_carrier()),
        unit_duration: config.unit_duration(),
        boundaries: config.unit_boundaries(units),
        codes,
        duration: encoding_time(config, m),
    })
}

impl ModulationPlan {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Encoding time T_E in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn units(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Sample range of bit or slot `k`.
    pub fn unit_range(&self, k: usize) -> std::ops::Range<usize> {
        self.boundaries[k]..self.boundaries[k + 1]
    }

    pub fn total_samples(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    /// Whether pixel `i` participates in bit/slot `k` at all.
    pub fn unit_active(&self, i: usize, k: usize) -> bool {
        match self.mode {
            Mode::Cdma | Mode::FmCdma => self.codes[i][k] == 1,
            Mode::FmTdma => i == k,
        }
    }

    /// Carrier half-cycle state at `local` samples into a unit. Always on
    /// without a carrier.
    pub fn carrier_on(&self, local: usize) -> bool {
        match self.carrier {
            Some(f_c) => (local as f64 * f_c / self.sample_rate).fract() < 0.5,
            None => true,
        }
    }

    /// Mirror state of pixel `i` at absolute sample `n`.
    pub fn pixel_state(&self, i: usize, n: usize) -> bool {
        let k = self.boundaries.partition_point(|&b| b <= n) - 1;
        k < self.units() && self.unit_active(i, k) && self.carrier_on(n - self.boundaries[k])
    }

    /// Optical power reaching the detector while the carrier is high, for
    /// each unit.
    pub fn unit_levels(&self, powers: &[f64]) -> Result<Vec<f64>> {
        if powers.len() != self.pixel_count {
            return Err(CaosError::Shape {
                expected: self.pixel_count,
                actual: powers.len(),
            });
        }
        Ok((0..self.units())
            .map(|k| match self.mode {
                Mode::Cdma | Mode::FmCdma => powers
                    .iter()
                    .zip(&self.codes)
                    .filter(|(_, c)| c[k] == 1)
                    .map(|(p, _)| p)
                    .sum(),
                Mode::FmTdma => powers[k],
            })
            .collect())
    }

    pub fn schedule_timing(&self) -> ScheduleTiming {
        let frames_per_unit = match self.carrier {
            Some(f_c) => (2.0 * f_c * self.unit_duration - 1e-9).ceil().max(1.0) as usize,
            None => 1,
        };
        let frame_duration_s = match self.carrier {
            Some(f_c) => 0.5 / f_c,
            None => self.unit_duration,
        };
        ScheduleTiming {
            mode: self.mode,
            pixel_count: self.pixel_count,
            units: self.units(),
            unit_duration_s: self.unit_duration,
            frames_per_unit,
            frame_duration_s,
            total_frames: frames_per_unit * self.units(),
            total_duration_s: self.duration,
            sample_rate_hz: self.sample_rate,
            carrier_hz: self.carrier,
        }
    }

    /// Binary frame schedule: one line per mirror frame, one `0`/`1` column
    /// per pixel, headed `p0,p1,...`. In the carrier modes a frame is half a
    /// carrier period and the last frame of a unit may be cut short; see
    /// [`schedule_timing`](Self::schedule_timing).
    pub fn write_schedule<W: Write>(&self, mut out: W) -> Result<()> {
        let timing = self.schedule_timing();
        let header: Vec<String> = (0..self.pixel_count).map(|i| format!("p{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::with_capacity(2 * self.pixel_count);
        for k in 0..self.units() {
            for frame in 0..timing.frames_per_unit {
                line.clear();
                for i in 0..self.pixel_count {
                    if i > 0 {
                        line.push(',');
                    }
                    let on = self.unit_active(i, k) && frame % 2 == 0;
                    line.push(if on { '1' } else { '0' });
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn timing_toml(&self) -> String {
        toml::to_string(&self.schedule_timing()).expect("timing serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::sylvester_codebook;

    fn layout(m: usize) -> PixelLayout {
        PixelLayout {
            pixel_count: m,
            pixel_width: 1,
            pixel_height: 1,
            start_column: 0,
        }
    }

    #[test]
    fn cdma_states_follow_unipolar_codes() {
        let h = sylvester_codebook(4).unwrap();
        let cfg = ModeConfig::cdma(4, 1000.0, 8000.0, vec![1, 2, 3]).unwrap();
        let plan = build_plan(&cfg, &layout(3), &h).unwrap();
        assert_eq!(plan.total_samples(), 32);
        for i in 0..3 {
            let bits = h.unipolar_row(i + 1);
            for n in 0..32 {
                assert_eq!(plan.pixel_state(i, n), bits[n / 8] == 1);
            }
        }
        let levels = plan.unit_levels(&[2.0, 0.0, 1.0]).unwrap();
        assert_eq!(levels, vec![3.0, 0.0, 2.0, 1.0]);
    }

    #[test]
    fn durations() {
        let h = sylvester_codebook(128).unwrap();
        let rows = ModeConfig::sequential_rows(102);
        let cdma = ModeConfig::cdma(128, 1000.0, 65535.0, rows.clone()).unwrap();
        let plan = build_plan(&cdma, &PixelLayout::default(), &h).unwrap();
        assert!((plan.duration() - 0.128).abs() < 1e-15);
        let fm = ModeConfig::fm_cdma(128, 0.5, 1040, 4096.0, rows.clone()).unwrap();
        let plan = build_plan(&fm, &PixelLayout::default(), &h).unwrap();
        assert_eq!(plan.duration(), 256.0);
        let fast = ModeConfig::fm_cdma(128, 25_000.0 / 1040.0, 1040, 1.0e6, rows).unwrap();
        let plan = build_plan(&fast, &PixelLayout::default(), &h).unwrap();
        assert!((plan.duration() - 5.33).abs() < 0.01);
    }

    #[test]
    fn capacity_is_enforced() {
        let h = sylvester_codebook(128).unwrap();
        let cfg = ModeConfig {
            assigned_rows: (1..=127).collect(),
            ..ModeConfig::cdma(128, 1000.0, 65535.0, vec![1]).unwrap()
        };
        assert!(build_plan(&cfg, &layout(127), &h).is_ok());
        let err = build_plan(&cfg, &layout(128), &h).unwrap_err();
        assert!(matches!(err, CaosError::Capacity(_)));
        let small = sylvester_codebook(64).unwrap();
        assert!(matches!(
            build_plan(&cfg, &layout(127), &small).unwrap_err(),
            CaosError::Config(_)
        ));
    }

    #[test]
    fn fm_tdma_one_pixel_per_slot() {
        let cfg = ModeConfig::fm_tdma(520.0, 4096.0, 0.25).unwrap();
        let h = sylvester_codebook(2).unwrap();
        let plan = build_plan(&cfg, &layout(3), &h).unwrap();
        assert_eq!(plan.units(), 3);
        assert_eq!(plan.total_samples(), 3 * 1024);
        for n in 0..plan.total_samples() {
            let on: Vec<bool> = (0..3).map(|i| plan.pixel_state(i, n)).collect();
            assert!(on.iter().filter(|&&s| s).count() <= 1);
            let slot = n / 1024;
            for (i, &s) in on.iter().enumerate() {
                if i != slot {
                    assert!(!s);
                }
            }
        }
        // 50% duty within a slot
        let high = (0..1024).filter(|&n| plan.pixel_state(0, n)).count();
        assert!((high as f64 / 1024.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn schedule_export() {
        let h = sylvester_codebook(4).unwrap();
        let cfg = ModeConfig::fm_cdma(4, 1.0, 2, 64.0, vec![1, 3]).unwrap();
        let plan = build_plan(&cfg, &layout(2), &h).unwrap();
        let t = plan.schedule_timing();
        assert_eq!(t.frames_per_unit, 4);
        assert_eq!(t.total_frames, 16);
        let mut buf = Vec::new();
        plan.write_schedule(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p0,p1");
        assert_eq!(lines.len(), 17);
        // bit 0: both codes are 1, carrier toggles
        assert_eq!(&lines[1..5], &["1,1", "0,0", "1,1", "0,0"]);
        // bit 1: row 1 -> 0, row 3 -> 0
        assert_eq!(&lines[5..9], &["0,0"; 4]);
        assert!(plan.timing_toml().contains("frames_per_unit = 4"));
    }
}
