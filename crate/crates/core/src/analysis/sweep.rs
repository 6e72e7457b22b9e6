use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CaosError, Result};
use crate::experiment::{groups, Experiment};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub od: f64,
    /// Trial-mean recovered power of the target pixel, W.
    pub amplitude: f64,
    /// Trial-mean SNR of the target pixel.
    pub snr: f64,
    /// Standard error of `snr`.
    pub snr_sem: f64,
    /// Peak of the trial-averaged spectrum.
    pub peak_pixel: usize,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DrSweepResult {
    pub points: Vec<SweepPoint>,
    /// Brightest pixel of the unattenuated scene.
    pub target_pixel: usize,
    pub max_od_passed: Option<f64>,
    /// 20 · max_od_passed; zero when nothing passes.
    pub dr_db: f64,
    /// log10(amplitude) against −OD over the passing points.
    pub linearity: Option<LinearFit>,
}

impl DrSweepResult {
    /// The last passing point.
    pub fn last_pass(&self) -> Option<&SweepPoint> {
        self.points.iter().rev().find(|p| p.passed)
    }
}

/// Least-squares line with Pearson correlation. `None` for fewer than two
/// points or a degenerate x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let correlation = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        correlation,
    })
}

/// Attenuate the configured sample by each OD in turn and measure the
/// target pixel over `trials` noisy acquisitions.
///
/// A point passes when the mean SNR reaches `snr_threshold` and the peak
/// of the trial-averaged spectrum lies within `peak_tolerance` pixels of
/// the true peak. Trial seeds come from `master_seed`, group
/// `SWEEP_GROUP + index`, so points can run in any order.
pub fn dr_sweep(
    exp: &Experiment,
    ods: &[f64],
    snr_threshold: f64,
    trials: usize,
    master_seed: u64,
    peak_tolerance: usize,
) -> Result<DrSweepResult> {
    if ods.is_empty() {
        return Err(CaosError::Config("empty OD sweep".into()));
    }
    if ods.windows(2).any(|w| w[1] <= w[0]) || ods.iter().any(|od| !(*od >= 0.0)) {
        return Err(CaosError::Config("OD values must be >= 0 and strictly increasing".into()));
    }
    if !(snr_threshold > 0.0) {
        return Err(CaosError::Config("snr_threshold must be > 0".into()));
    }
    if trials == 0 {
        return Err(CaosError::Config("sweep needs at least one trial".into()));
    }
    let base = exp.bin_powers(&exp.sample_scene(0.0)?)?;
    let target = argmax(&base).ok_or_else(|| CaosError::Measurement("scene is dark".into()))?;
    let points = ods
        .par_iter()
        .enumerate()
        .map(|(j, &od)| {
            let truth = exp.bin_powers(&exp.sample_scene(od)?)?;
            let mut mean = vec![0.0; truth.len()];
            let (mut s1, mut s2) = (0.0, 0.0);
            for t in 0..trials {
                let seed = crate::seeds::derive(master_seed, groups::SWEEP_GROUP + j as u64, t as u64);
                let rec = exp.acquire(&truth, seed)?;
                for (m, b) in mean.iter_mut().zip(&rec.bins) {
                    *m += b.power;
                }
                let snr = rec.bins[target].snr;
                s1 += snr;
                s2 += snr * snr;
            }
            let k = trials as f64;
            for m in &mut mean {
                *m /= k;
            }
            let snr = s1 / k;
            let var = if trials > 1 { (s2 - k * snr * snr).max(0.0) / (k - 1.0) } else { 0.0 };
            let peak_pixel = argmax(&mean).unwrap_or(0);
            let peak_ok = peak_pixel.abs_diff(target) <= peak_tolerance;
            Ok(SweepPoint {
                od,
                amplitude: mean[target],
                snr,
                snr_sem: (var / k).sqrt(),
                peak_pixel,
                passed: peak_ok && snr >= snr_threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_od_passed = points.iter().rev().find(|p| p.passed).map(|p| p.od);
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.passed && p.amplitude > 0.0)
        .map(|p| (-p.od, p.amplitude.log10()))
        .unzip();
    Ok(DrSweepResult {
        points,
        target_pixel: target,
        max_od_passed,
        dr_db: 20.0 * max_od_passed.unwrap_or(0.0),
        linearity: linear_fit(&x, &y),
    })
}

fn argmax(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}
