use crate::decode::RecoveredSpectrum;
use crate::error::{CaosError, Result};
use crate::experiment::Experiment;

/// Fraction of the largest reference amplitude below which a pixel is not
/// normalized.
pub const GUARD_FRACTION: f64 = 0.01;

/// Per-pixel reference amplitudes from an acquisition without a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemResponse {
    amplitudes: Vec<f64>,
    centers: Vec<Option<f64>>,
    guard: f64,
}

impl SystemResponse {
    pub fn new(amplitudes: Vec<f64>) -> Self {
        let n = amplitudes.len();
        Self::with_centers(amplitudes, vec![None; n])
    }

    fn with_centers(amplitudes: Vec<f64>, centers: Vec<Option<f64>>) -> Self {
        let max = amplitudes
            .iter()
            .copied()
            .filter(|a| a.is_finite())
            .fold(0.0, f64::max);
        Self {
            amplitudes,
            centers,
            guard: GUARD_FRACTION * max,
        }
    }

    pub fn from_spectrum(spectrum: &RecoveredSpectrum) -> Self {
        Self::with_centers(
            spectrum.powers(),
            spectrum.bins.iter().map(|b| b.center_nm).collect(),
        )
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn centers(&self) -> &[Option<f64>] {
        &self.centers
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Whether pixel `i` can be normalized.
    pub fn usable(&self, i: usize) -> bool {
        self.amplitudes[i] > self.guard
    }
}

/// Acquire the bare source through the full pipeline.
pub fn measure_system_response(exp: &Experiment, seed: u64) -> Result<SystemResponse> {
    let powers = exp.reference_powers()?;
    Ok(SystemResponse::from_spectrum(&exp.acquire(&powers, seed)?))
}

/// Divide each pixel by its reference. Pixels whose reference does not
/// exceed the guard are marked invalid and set to zero.
pub fn normalize(recovered: &RecoveredSpectrum, response: &SystemResponse) -> Result<RecoveredSpectrum> {
    if recovered.len() != response.len() {
        return Err(CaosError::Shape {
            expected: response.len(),
            actual: recovered.len(),
        });
    }
    let mut out = recovered.clone();
    for (i, b) in out.bins.iter_mut().enumerate() {
        if response.usable(i) {
            b.power /= response.amplitudes[i];
        } else {
            b.power = 0.0;
            b.valid = false;
        }
    }
    Ok(out)
}
