use crate::decode::RecoveredSpectrum;
use crate::error::{CaosError, Result};

/// Full width at half maximum of the global peak, in nm.
///
/// Each half-maximum crossing is interpolated linearly between the two
/// pixels that straddle it. Invalid pixels stop the search.
pub fn measure_fwhm(spectrum: &RecoveredSpectrum) -> Result<f64> {
    let fail = |msg: &str| Err(CaosError::Measurement(msg.into()));
    let centers: Option<Vec<f64>> = spectrum.bins.iter().map(|b| b.center_nm).collect();
    let Some(x) = centers else {
        return fail("spectrum has no pixel wavelengths");
    };
    let Some(peak) = spectrum.peak_index() else {
        return fail("spectrum has no valid pixels");
    };
    let y: Vec<f64> = spectrum.bins.iter().map(|b| b.power).collect();
    let top = y[peak];
    if !(top > 0.0) {
        return fail("spectrum has no positive peak");
    }
    let half = 0.5 * top;
    let usable = |i: usize| spectrum.bins[i].valid;
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);

    let mut left = None;
    let mut i = peak;
    while i > 0 && usable(i - 1) {
        if y[i - 1] < half {
            left = Some(cross(i - 1, i));
            break;
        }
        i -= 1;
    }
    let mut right = None;
    let mut i = peak;
    while i + 1 < y.len() && usable(i + 1) {
        if y[i + 1] < half {
            right = Some(cross(i, i + 1));
            break;
        }
        i += 1;
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => fail("half-maximum crossing falls outside the spectrum"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(x: &[f64], y: &[f64]) -> RecoveredSpectrum {
        RecoveredSpectrum::from_parts(y, &vec![1.0; y.len()])
            .with_centers(x)
            .unwrap()
    }

    #[test]
    fn triangle_is_exact() {
        // triangle of half-width 10 centred at 50: FWHM 10
        let x: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| (1.0 - (v - 50.0).abs() / 10.0).max(0.0)).collect();
        assert!((measure_fwhm(&spectrum(&x, &y)).unwrap() - 10.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|&v| 3.0 * (1.0 - (v - 20.0).abs() / 7.0).max(0.0)).collect();
        assert!((measure_fwhm(&spectrum(&x, &y)).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn edge_peak_fails() {
        let x = [0.0, 1.0, 2.0];
        assert!(measure_fwhm(&spectrum(&x, &[1.0, 0.9, 0.1])).is_err());
        assert!(measure_fwhm(&spectrum(&x, &[0.0, 0.0, 0.0])).is_err());
        let bare = RecoveredSpectrum::from_parts(&[0.0, 1.0, 0.0], &[1.0; 3]);
        assert!(measure_fwhm(&bare).is_err());
    }
}
