//! Result files. Everything is rendered in memory and then written
//! through a temporary file in the target directory, so a file is either
//! absent or complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{DrSweepResult, Simulation, SystemResponse};
use crate::error::{CaosError, Result};

use super::Experiment;

/// Write `bytes` to `dir/name` via temp-file-and-rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| CaosError::Io(e.error))?;
    Ok(path)
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CaosError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct ResponseRow {
    pixel: usize,
    center_nm: Option<f64>,
    amplitude_w: f64,
    usable: bool,
}

/// `pixel,center_nm,amplitude_w,usable`
pub fn response_csv(response: &SystemResponse) -> Result<String> {
    to_csv((0..response.len()).map(|i| ResponseRow {
        pixel: i,
        center_nm: response.centers()[i],
        amplitude_w: response.amplitudes()[i],
        usable: response.usable(i),
    }))
}

#[derive(Serialize)]
struct SpectrumRow {
    pixel: usize,
    center_nm: Option<f64>,
    true_power_w: f64,
    recovered_power_w: f64,
    normalized: f64,
    snr: f64,
    valid: bool,
}

/// `pixel,center_nm,true_power_w,recovered_power_w,normalized,snr,valid`
pub fn spectrum_csv(sim: &Simulation) -> Result<String> {
    to_csv(
        sim.recovered
            .bins
            .iter()
            .zip(&sim.normalized.bins)
            .zip(&sim.truth)
            .enumerate()
            .map(|(i, ((r, n), &t))| SpectrumRow {
                pixel: i,
                center_nm: r.center_nm,
                true_power_w: t,
                recovered_power_w: r.power,
                normalized: n.power,
                snr: r.snr,
                valid: n.valid,
            }),
    )
}

#[derive(Serialize)]
struct SweepRow {
    od: f64,
    attenuation: f64,
    recovered_amplitude_w: f64,
    snr: f64,
    snr_sem: f64,
    peak_pixel: usize,
    passed: bool,
}

/// `od,attenuation,recovered_amplitude_w,snr,snr_sem,peak_pixel,passed`
pub fn linearity_csv(result: &DrSweepResult) -> Result<String> {
    to_csv(result.points.iter().map(|p| SweepRow {
        od: p.od,
        attenuation: 10f64.powf(-p.od),
        recovered_amplitude_w: p.amplitude,
        snr: p.snr,
        snr_sem: p.snr_sem,
        peak_pixel: p.peak_pixel,
        passed: p.passed,
    }))
}

/// Structured run report written as `summary.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub pixels: usize,
    pub sample_rate_hz: f64,
    pub samples_per_unit: usize,
    pub encoding_time_s: f64,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_od_passed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_pass_snr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
}

impl Summary {
    pub fn for_experiment(exp: &Experiment) -> Self {
        let cfg = exp.config();
        Self {
            name: cfg.name.clone(),
            mode: exp.mode_config().mode.to_string(),
            pixels: exp.pixel_count(),
            sample_rate_hz: cfg.adc.sample_rate,
            samples_per_unit: exp.mode_config().samples_per_unit,
            encoding_time_s: exp.plan().duration(),
            master_seed: cfg.sweep.master_seed,
            ..Self::default()
        }
    }

    pub fn with_simulation(mut self, sim: &Simulation) -> Self {
        self.peak_nm = sim
            .normalized
            .peak_index()
            .and_then(|i| sim.normalized.bins[i].center_nm);
        self.fwhm_nm = sim.fwhm_nm;
        self
    }

    pub fn with_sweep(mut self, sweep: &DrSweepResult, trials: usize) -> Self {
        self.dr_db = Some(sweep.dr_db);
        self.max_od_passed = sweep.max_od_passed;
        self.last_pass_snr = sweep.last_pass().map(|p| p.snr);
        self.trials = Some(trials);
        self.slope = sweep.linearity.map(|f| f.slope);
        self.correlation = sweep.linearity.map(|f| f.correlation);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn response_header() {
        let csv = response_csv(&SystemResponse::new(vec![1.0, 0.0])).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("pixel,center_nm,amplitude_w,usable"));
        assert_eq!(lines.next(), Some("0,,1.0,true"));
        assert_eq!(lines.next(), Some("1,,0.0,false"));
    }
}
