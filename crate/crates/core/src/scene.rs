//! Light sources and optical test samples.
//!
//! A [`SpectralScene`] is a sampled spectral power density in W/nm. Test
//! samples are modelled by [`FilterModel`], which multiplies the density by
//! a transmission curve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CaosError, Result};

/// Second radiation constant hc/k in m·K.
const SECOND_RADIATION_CONSTANT: f64 = 1.438_776_877e-2;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Sampled spectral power density.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScene {
    wavelengths: Vec<f64>,
    density: Vec<f64>,
}

impl SpectralScene {
    pub fn new(wavelengths: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(CaosError::Domain(format!(
                "a scene needs at least 2 wavelength samples, got {}",
                wavelengths.len()
            )));
        }
        if wavelengths.len() != density.len() {
            return Err(CaosError::Shape {
                expected: wavelengths.len(),
                actual: density.len(),
            });
        }
        if wavelengths.iter().any(|w| !w.is_finite())
            || wavelengths.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CaosError::Domain(
                "wavelengths must be finite and strictly increasing".into(),
            ));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(CaosError::Domain(
                "spectral density must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            wavelengths,
            density,
        })
    }

    /// Uniform density over a uniform grid.
    pub fn flat(lambda_min: f64, lambda_max: f64, grid_step: f64, density: f64) -> Result<Self> {
        let grid = uniform_grid(lambda_min, lambda_max, grid_step)?;
        let n = grid.len();
        Self::new(grid, vec![density; n])
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn lambda_min(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }

    /// Linearly interpolated density; zero outside the sampled range.
    pub fn density_at(&self, lambda: f64) -> f64 {
        let w = &self.wavelengths;
        if lambda < w[0] || lambda > w[w.len() - 1] {
            return 0.0;
        }
        let j = w.partition_point(|&x| x <= lambda).clamp(1, w.len() - 1);
        let t = (lambda - w[j - 1]) / (w[j] - w[j - 1]);
        self.density[j - 1] + t * (self.density[j] - self.density[j - 1])
    }

    /// Integral of the piecewise-linear density over `[a, b]`, in watts.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.lambda_min());
        let hi = b.min(self.lambda_max());
        if hi <= lo {
            return 0.0;
        }
        let w = &self.wavelengths;
        let first = w.partition_point(|&x| x <= lo);
        let last = w.partition_point(|&x| x < hi);
        let mut sum = 0.0;
        let mut x0 = lo;
        let mut y0 = self.density_at(lo);
        for j in first..last {
            let (x1, y1) = (w[j], self.density[j]);
            sum += 0.5 * (y0 + y1) * (x1 - x0);
            x0 = x1;
            y0 = y1;
        }
        sum + 0.5 * (y0 + self.density_at(hi)) * (hi - x0)
    }

    /// Total power over the whole sampled band.
    pub fn total_power(&self) -> f64 {
        self.integrate(self.lambda_min(), self.lambda_max())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.wavelengths.clone(),
            self.density.iter().map(|d| d * factor).collect(),
        )
    }

    /// Convolve the density with a unit-area Gaussian of the given FWHM.
    ///
    /// Kernel weights are renormalised over the sampled band so a flat
    /// spectrum stays flat up to its edges. A zero FWHM returns the scene
    /// unchanged.
    pub fn blurred(&self, fwhm_nm: f64) -> Result<Self> {
        if !(fwhm_nm >= 0.0) || !fwhm_nm.is_finite() {
            return Err(CaosError::Domain(format!(
                "blur FWHM must be finite and >= 0, got {fwhm_nm}"
            )));
        }
        if fwhm_nm == 0.0 {
            return Ok(self.clone());
        }
        let sigma = fwhm_nm / FWHM_PER_SIGMA;
        let reach = 5.0 * sigma;
        let w = &self.wavelengths;
        let n = w.len();
        // trapezoid quadrature weights
        let quad: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { w[i] - w[i - 1] } else { 0.0 };
                let right = if i + 1 < n { w[i + 1] - w[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        let out = w
            .iter()
            .map(|&center| {
                let lo = w.partition_point(|&x| x < center - reach);
                let hi = w.partition_point(|&x| x <= center + reach);
                let (mut acc, mut norm) = (0.0, 0.0);
                for i in lo..hi {
                    let z = (w[i] - center) / sigma;
                    let k = (-0.5 * z * z).exp() * quad[i];
                    acc += k * self.density[i];
                    norm += k;
                }
                if norm > 0.0 {
                    acc / norm
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(w.clone(), out)
    }

    /// Two-column CSV: `wavelength_nm,density_w_per_nm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["wavelength_nm", "density_w_per_nm"])?;
        for (l, d) in self.wavelengths.iter().zip(&self.density) {
            wtr.write_record([l.to_string(), d.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Grid from `lambda_min` to `lambda_max` inclusive with the given step.
/// The final interval is shortened when the span is not a whole number of
/// steps.
pub fn uniform_grid(lambda_min: f64, lambda_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda_min < lambda_max) {
        return Err(CaosError::Domain(format!(
            "need lambda_min < lambda_max, got {lambda_min}..{lambda_max}"
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(CaosError::Domain(format!("grid step must be > 0, got {step}")));
    }
    let span = (lambda_max - lambda_min) / step;
    let whole = span.round();
    let intervals = if (span - whole).abs() < 1e-9 * span.max(1.0) {
        whole as usize
    } else {
        span.ceil() as usize
    };
    let intervals = intervals.max(1);
    let mut grid: Vec<f64> = (0..intervals)
        .map(|k| lambda_min + k as f64 * step)
        .collect();
    grid.push(lambda_max);
    Ok(grid)
}

/// Planck spectral radiance shape, arbitrary scale.
fn planck_shape(lambda_nm: f64, temperature: f64) -> f64 {
    let lambda_m = lambda_nm * 1e-9;
    let x = SECOND_RADIATION_CONSTANT / (lambda_m * temperature);
    1.0 / (lambda_m.powi(5) * x.exp_m1())
}

/// Blackbody spectrum over `[lambda_min, lambda_max]`, scaled so the
/// integrated power equals `total_power`.
pub fn blackbody_scene(
    temperature: f64,
    lambda_min: f64,
    lambda_max: f64,
    grid_step: f64,
    total_power: f64,
) -> Result<SpectralScene> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(CaosError::Domain(format!(
            "temperature must be > 0 K, got {temperature}"
        )));
    }
    if !(total_power > 0.0) || !total_power.is_finite() {
        return Err(CaosError::Domain(format!(
            "total power must be > 0 W, got {total_power}"
        )));
    }
    if !(lambda_min > 0.0) {
        return Err(CaosError::Domain(format!(
            "lambda_min must be > 0 nm, got {lambda_min}"
        )));
    }
    let grid = uniform_grid(lambda_min, lambda_max, grid_step)?;
    let shape: Vec<f64> = grid.iter().map(|&l| planck_shape(l, temperature)).collect();
    let raw = SpectralScene::new(grid, shape)?;
    let norm = raw.total_power();
    raw.scaled(total_power / norm)
}

/// Optical test sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterModel {
    /// Gaussian passband.
    Bandpass {
        center_nm: f64,
        fwhm_nm: f64,
        #[serde(default = "unit")]
        peak: f64,
    },
    /// Zero below `cut_nm`, then a shape-preserving cubic through `anchors`
    /// given as `(nm, transmission)` pairs.
    Highpass { cut_nm: f64, anchors: Vec<(f64, f64)> },
    NeutralDensity { od: f64 },
}

fn unit() -> f64 {
    1.0
}

impl FilterModel {
    pub fn bandpass(center_nm: f64, fwhm_nm: f64) -> Self {
        FilterModel::Bandpass {
            center_nm,
            fwhm_nm,
            peak: 1.0,
        }
    }

    pub fn neutral_density(od: f64) -> Self {
        FilterModel::NeutralDensity { od }
    }

    /// Red dichroic high-pass: dark at 552.8 nm, then a rippled rising edge.
    /// Seen through the default blur and 102-pixel layout, its maxima land
    /// in the pixels holding 607.1 nm and 631 nm.
    pub fn red_highpass() -> Self {
        FilterModel::Highpass {
            cut_nm: 552.8,
            anchors: vec![
                (552.8, 0.0),
                (565.0, 0.02),
                (583.0, 0.12),
                (599.0, 0.6),
                (610.0, 1.0),
                (620.0, 0.35),
                (630.5, 0.92),
                (642.0, 0.45),
                (660.0, 0.8),
                (690.0, 0.85),
                (715.0, 0.85),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterModel::Bandpass {
                center_nm,
                fwhm_nm,
                peak,
            } => {
                if !center_nm.is_finite() || !(*fwhm_nm > 0.0) || !fwhm_nm.is_finite() {
                    return Err(CaosError::Domain(
                        "bandpass needs a finite center and a positive FWHM".into(),
                    ));
                }
                if !(0.0..=1.0).contains(peak) {
                    return Err(CaosError::Domain(format!(
                        "bandpass peak transmission must be in [0, 1], got {peak}"
                    )));
                }
            }
            FilterModel::Highpass { cut_nm, anchors } => {
                if !cut_nm.is_finite() {
                    return Err(CaosError::Domain("high-pass cut must be finite".into()));
                }
                if anchors.is_empty() {
                    return Err(CaosError::Domain("high-pass needs anchor points".into()));
                }
                if anchors.windows(2).any(|p| p[1].0 <= p[0].0) {
                    return Err(CaosError::Domain(
                        "high-pass anchors must have strictly increasing wavelengths".into(),
                    ));
                }
                if anchors.iter().any(|(l, t)| !l.is_finite() || !(0.0..=1.0).contains(t)) {
                    return Err(CaosError::Domain(
                        "high-pass anchor transmissions must be in [0, 1]".into(),
                    ));
                }
                if anchors[0].0 < *cut_nm {
                    return Err(CaosError::Domain(
                        "high-pass anchors must not lie below the cut".into(),
                    ));
                }
            }
            FilterModel::NeutralDensity { od } => {
                if !(*od >= 0.0) || !od.is_finite() {
                    return Err(CaosError::Domain(format!(
                        "optical density must be finite and >= 0, got {od}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Power transmission at `lambda` nm, in `[0, 1]`.
    pub fn transmission(&self, lambda: f64) -> f64 {
        match self {
            FilterModel::Bandpass {
                center_nm,
                fwhm_nm,
                peak,
            } => {
                let sigma = fwhm_nm / FWHM_PER_SIGMA;
                let z = (lambda - center_nm) / sigma;
                peak * (-0.5 * z * z).exp()
            }
            FilterModel::Highpass { cut_nm, anchors } => {
                if lambda < *cut_nm {
                    return 0.0;
                }
                let mut knots: Vec<(f64, f64)> = Vec::with_capacity(anchors.len() + 1);
                if anchors[0].0 > *cut_nm {
                    knots.push((*cut_nm, 0.0));
                }
                knots.extend_from_slice(anchors);
                pchip(&knots, lambda).clamp(0.0, 1.0)
            }
            FilterModel::NeutralDensity { od } => 10f64.powf(-od),
        }
    }
}

/// Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson). Holds
/// the end values outside the knot range.
fn pchip(knots: &[(f64, f64)], x: f64) -> f64 {
    let n = knots.len();
    if n == 1 || x <= knots[0].0 {
        return knots[0].1;
    }
    if x >= knots[n - 1].0 {
        return knots[n - 1].1;
    }
    let h: Vec<f64> = knots.windows(2).map(|k| k[1].0 - k[0].0).collect();
    let delta: Vec<f64> = knots
        .windows(2)
        .zip(&h)
        .map(|(k, h)| (k[1].1 - k[0].1) / h)
        .collect();
    let slope = |k: usize| -> f64 {
        if n == 2 {
            return delta[0];
        }
        if k == 0 {
            return end_slope(h[0], h[1], delta[0], delta[1]);
        }
        if k == n - 1 {
            return end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            return 0.0;
        }
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        (w1 + w2) / (w1 / d0 + w2 / d1)
    };
    let k = knots.partition_point(|p| p.0 <= x) - 1;
    let t = (x - knots[k].0) / h[k];
    let (y0, y1) = (knots[k].1, knots[k + 1].1);
    let (m0, m1) = (slope(k) * h[k], slope(k + 1) * h[k]);
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * m1
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Multiply the scene pointwise by the filter transmission.
pub fn apply_filter(scene: &SpectralScene, filter: &FilterModel) -> Result<SpectralScene> {
    filter.validate()?;
    let density = scene
        .wavelengths
        .iter()
        .zip(&scene.density)
        .map(|(&l, &d)| d * filter.transmission(l))
        .collect();
    SpectralScene::new(scene.wavelengths.clone(), density)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> SpectralScene {
        SpectralScene::flat(369.0, 715.0, 0.1, 1.0).unwrap()
    }

    #[test]
    fn blackbody_rises_across_visible_band() {
        let s = blackbody_scene(2850.0, 369.0, 715.0, 0.1, 1.0).unwrap();
        assert!(s.density().windows(2).all(|d| d[1] > d[0]));
        // independent check of the shape: Wien peak is far past 715 nm
        assert!(2.897_771_955e6 / 2850.0 > 715.0);
    }

    #[test]
    fn blackbody_is_normalised() {
        let s = blackbody_scene(2850.0, 369.0, 715.0, 0.1, 1.0).unwrap();
        assert!((s.total_power() - 1.0).abs() < 1e-6);
        let s = blackbody_scene(2850.0, 369.0, 715.0, 0.37, 2.5e-6).unwrap();
        assert!((s.total_power() / 2.5e-6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_point_grid() {
        let s = blackbody_scene(2850.0, 500.0, 500.1, 0.1, 1.0).unwrap();
        assert_eq!(s.wavelengths().len(), 2);
        assert!(s.density().iter().all(|d| d.is_finite() && *d >= 0.0));
    }

    #[test]
    fn blackbody_rejects_bad_inputs() {
        assert!(blackbody_scene(0.0, 369.0, 715.0, 0.1, 1.0).is_err());
        assert!(blackbody_scene(2850.0, 715.0, 369.0, 0.1, 1.0).is_err());
        assert!(blackbody_scene(2850.0, 369.0, 715.0, 0.0, 1.0).is_err());
        assert!(blackbody_scene(2850.0, 369.0, 715.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn scene_invariants() {
        assert!(SpectralScene::new(vec![1.0], vec![1.0]).is_err());
        assert!(SpectralScene::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralScene::new(vec![1.0, 2.0], vec![1.0, -1.0]).is_err());
        assert!(SpectralScene::new(vec![1.0, 2.0], vec![1.0, f64::NAN]).is_err());
        assert!(SpectralScene::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn nd_scales_uniformly() {
        let s = blackbody_scene(2850.0, 369.0, 715.0, 0.1, 1.0).unwrap();
        let f = apply_filter(&s, &FilterModel::neutral_density(2.5)).unwrap();
        for (a, b) in s.density().iter().zip(f.density()) {
            assert!((b / a - 3.162_277_660_168_379e-3).abs() < 1e-15);
        }
        let same = apply_filter(&s, &FilterModel::neutral_density(0.0)).unwrap();
        assert_eq!(same, s);
        assert!(apply_filter(&s, &FilterModel::neutral_density(-0.1)).is_err());
    }

    #[test]
    fn bandpass_half_max_at_fwhm() {
        let f = FilterModel::bandpass(620.0, 10.0);
        assert!((f.transmission(620.0) - 1.0).abs() < 1e-15);
        assert!((f.transmission(615.0) - 0.5).abs() < 1e-12);
        assert!((f.transmission(625.0) - 0.5).abs() < 1e-12);
        let s = apply_filter(&flat(), &f).unwrap();
        assert!((s.density_at(615.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn red_highpass_anchors() {
        let f = FilterModel::red_highpass();
        f.validate().unwrap();
        assert_eq!(f.transmission(500.0), 0.0);
        assert_eq!(f.transmission(552.7), 0.0);
        assert!(f.transmission(552.8) < 1e-12);
        let t = |l: f64| f.transmission(l);
        for peak in [610.0, 630.5] {
            assert!(t(peak) > t(peak - 0.5) && t(peak) > t(peak + 0.5), "{peak}");
        }
        assert!((t(610.0) - 1.0).abs() < 1e-12);
        // rising envelope below the first maximum
        let mut l = 552.8;
        while l < 609.9 {
            assert!(t(l + 0.1) >= t(l));
            l += 0.1;
        }
    }

    #[test]
    fn integrate_partitions() {
        let s = blackbody_scene(2850.0, 369.0, 715.0, 0.1, 1.0).unwrap();
        let parts: f64 = (0..10)
            .map(|k| {
                let a = 369.0 + 34.6 * k as f64;
                s.integrate(a, a + 34.6)
            })
            .sum();
        assert!((parts - s.total_power()).abs() < 1e-12);
        assert!((flat().integrate(400.0, 403.39) - 3.39).abs() < 1e-9);
    }

    #[test]
    fn blur_keeps_flat_flat_and_shifts_nothing() {
        let b = flat().blurred(12.9).unwrap();
        assert!(b.density().iter().all(|d| (d - 1.0).abs() < 1e-12));
        let g = apply_filter(&flat(), &FilterModel::bandpass(540.0, 10.0)).unwrap();
        let gb = g.blurred(12.9).unwrap();
        let half = gb.density_at(540.0) / 2.0;
        // convolution of Gaussians: FWHM adds in quadrature
        let expect = (10.0f64.powi(2) + 12.9f64.powi(2)).sqrt() / 2.0;
        assert!((gb.density_at(540.0 + expect) - half).abs() / half < 1e-3);
    }

    #[test]
    fn csv_export_has_header() {
        let s = SpectralScene::new(vec![400.0, 401.0], vec![0.5, 0.25]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "wavelength_nm,density_w_per_nm\n400,0.5\n401,0.25\n");
    }
}
