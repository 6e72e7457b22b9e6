use std::path::{Path, PathBuf};

use caos_core::analysis::{dr_sweep, measure_system_response, simulate as run_simulation};
use caos_core::experiment::output::{linearity_csv, response_csv, spectrum_csv, write_atomic, Summary};
use caos_core::experiment::{groups, Experiment, ExperimentConfig};
use caos_core::{calibrate_noise_floor, sylvester_codebook, CaosError, Result};

pub struct Run {
    pub config: String,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub full_scale: bool,
    pub trials: Option<usize>,
}

impl Run {
    fn load(&self) -> Result<(Experiment, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if self.full_scale {
            cfg = cfg.at_full_scale()?;
        }
        if let Some(seed) = self.seed {
            cfg.sweep.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.sweep.trials = trials;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok((Experiment::new(cfg)?, out))
    }
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn codebook(order: usize, out: &Path) -> Result<()> {
    let h = sylvester_codebook(order)?;
    if !h.is_orthogonal() {
        return Err(CaosError::Calibration(format!("order-{order} codebook is not orthogonal")));
    }
    println!("orthogonality: H·Hᵀ = {order}·I holds");
    report(&write_atomic(out, &format!("walsh_{order}.csv"), h.to_csv().as_bytes())?);
    Ok(())
}

pub fn simulate(run: &Run) -> Result<()> {
    let (exp, out) = run.load()?;
    let sim = run_simulation(&exp)?;
    let spectrum = spectrum_csv(&sim)?;
    let summary = Summary::for_experiment(&exp).with_simulation(&sim).to_toml();
    report(&write_atomic(&out, &exp.config().output.spectrum_file, spectrum.as_bytes())?);
    report(&write_atomic(&out, "summary.toml", summary.as_bytes())?);
    Ok(())
}

pub fn sweep_dr(run: &Run) -> Result<()> {
    let (exp, out) = run.load()?;
    let s = &exp.config().sweep;
    let result = dr_sweep(&exp, &s.od_values()?, s.snr_threshold, s.trials, s.master_seed, s.peak_tolerance)?;
    let summary = Summary::for_experiment(&exp).with_sweep(&result, s.trials).to_toml();
    report(&write_atomic(&out, "fig5_linearity.csv", linearity_csv(&result)?.as_bytes())?);
    report(&write_atomic(&out, "summary.toml", summary.as_bytes())?);
    println!("dr_db = {}", result.dr_db);
    Ok(())
}

pub fn calibrate_noise(run: &Run, target_power: f64, target_snr: f64) -> Result<()> {
    let (exp, out) = run.load()?;
    let cfg = exp.config();
    let trials = run.trials.unwrap_or(1000);
    let det = caos_core::DetectorConfig {
        rng_seed: exp.seed(groups::CALIBRATION, 0),
        ..cfg.detector.clone()
    };
    let eta = calibrate_noise_floor(&det, &cfg.adc, target_power, target_snr, exp.mode_config(), trials)?;
    let text = format!(
        "noise_floor = {eta}\ntarget_power_w = {target_power}\ntarget_snr = {target_snr}\ntrials = {trials}\n"
    );
    report(&write_atomic(&out, "calibration.toml", text.as_bytes())?);
    println!("noise_floor = {eta}");
    Ok(())
}

pub fn response(run: &Run) -> Result<()> {
    let (exp, out) = run.load()?;
    let resp = measure_system_response(&exp, exp.seed(groups::RESPONSE, 0))?;
    report(&write_atomic(&out, "fig2_response.csv", response_csv(&resp)?.as_bytes())?);
    let summary = Summary::for_experiment(&exp).to_toml();
    report(&write_atomic(&out, "summary.toml", summary.as_bytes())?);
    Ok(())
}
