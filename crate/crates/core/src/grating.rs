//! Grating dispersion onto the micromirror array and grouping of mirror
//! columns into spectral pixels.

use serde::{Deserialize, Serialize};

use crate::error::{CaosError, Result};
use crate::scene::SpectralScene;

/// Linear wavelength-to-column mapping of the grating and focus lens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GratingMap {
    /// Groove frequency, lines/mm.
    pub groove_frequency: f64,
    /// Focal length of the lens imaging the spectrum onto the array, mm.
    pub focus_focal_length: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Mirror columns available to the spectrum.
    pub dmd_columns: usize,
    /// Mirror pitch, µm.
    pub micromirror_pitch: f64,
    /// Grating incidence angle, degrees. Informational.
    #[serde(default)]
    pub incidence_angle: f64,
    /// Spread of the spectral line beyond the paraxial width, >= 1.
    #[serde(default = "one")]
    pub stretch_factor: f64,
    /// Angular dispersion, nm/mrad. Informational.
    #[serde(default)]
    pub dispersion: f64,
    /// Telescope and relay focal lengths (mm). Informational.
    #[serde(default)]
    pub telescope_focal_lengths: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for GratingMap {
    fn default() -> Self {
        Self {
            groove_frequency: 600.0,
            focus_focal_length: 60.0,
            lambda_min: 369.0,
            lambda_max: 715.0,
            dmd_columns: 1020,
            micromirror_pitch: 13.68,
            incidence_angle: 6.0,
            stretch_factor: 14.0 / 12.456,
            dispersion: 1.62,
            telescope_focal_lengths: vec![50.0, 60.0, 38.1],
        }
    }
}

impl GratingMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min < self.lambda_max) || !self.lambda_min.is_finite() || !self.lambda_max.is_finite() {
            return Err(CaosError::Domain(format!(
                "grating band needs lambda_min < lambda_max, got {}..{}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.dmd_columns == 0 {
            return Err(CaosError::Domain("dmd_columns must be >= 1".into()));
        }
        if !(self.stretch_factor >= 1.0) || !self.stretch_factor.is_finite() {
            return Err(CaosError::Domain(format!(
                "stretch_factor must be >= 1, got {}",
                self.stretch_factor
            )));
        }
        if !(self.groove_frequency > 0.0 && self.focus_focal_length > 0.0 && self.micromirror_pitch > 0.0) {
            return Err(CaosError::Domain(
                "groove frequency, focal length and mirror pitch must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }

    /// Columns covered by the spread spectrum, capped by the array width.
    /// May be fractional.
    pub fn used_columns(&self) -> f64 {
        let spread_um = paraxial_width(self) * self.stretch_factor * 1e3;
        (spread_um / self.micromirror_pitch).min(self.dmd_columns as f64)
    }

    pub fn nm_per_column(&self) -> f64 {
        self.bandwidth() / self.used_columns()
    }

    /// Fractional column coordinate of `lambda`; column `c` spans
    /// `[c, c + 1)`, so `lambda_max` lands on the far edge of the last used
    /// column.
    pub fn wavelength_to_column(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= self.lambda_min && lambda <= self.lambda_max) {
            return Err(CaosError::OutOfRange(format!(
                "{lambda} nm is outside {}..{} nm",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok((lambda - self.lambda_min) / self.nm_per_column())
    }

    /// Inverse of [`wavelength_to_column`](Self::wavelength_to_column).
    /// Columns past the used width extrapolate linearly.
    pub fn column_to_wavelength(&self, column: f64) -> f64 {
        self.lambda_min + column * self.nm_per_column()
    }
}

/// Small-angle width of the dispersed band at the array, mm:
/// groove frequency × bandwidth × focal length.
pub fn paraxial_width(map: &GratingMap) -> f64 {
    // lines/mm · nm · mm, with nm -> mm
    map.groove_frequency * map.bandwidth() * 1e-6 * map.focus_focal_length
}

/// Grouping of mirror columns into spectral pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelLayout {
    pub pixel_count: usize,
    /// Mirror columns per pixel.
    pub pixel_width: usize,
    /// Mirror rows per pixel. Informational.
    #[serde(default = "default_height")]
    pub pixel_height: usize,
    #[serde(default)]
    pub start_column: usize,
}

fn default_height() -> usize {
    300
}

impl Default for PixelLayout {
    fn default() -> Self {
        Self {
            pixel_count: 102,
            pixel_width: 10,
            pixel_height: 300,
            start_column: 0,
        }
    }
}

impl PixelLayout {
    pub fn validate(&self, map: &GratingMap) -> Result<()> {
        if self.pixel_count == 0 || self.pixel_width == 0 {
            return Err(CaosError::Domain(
                "pixel_count and pixel_width must be >= 1".into(),
            ));
        }
        let end = self.start_column + self.pixel_count * self.pixel_width;
        if end > map.dmd_columns {
            return Err(CaosError::OutOfRange(format!(
                "layout ends at column {end} but the array has {} columns",
                map.dmd_columns
            )));
        }
        Ok(())
    }

    /// Wavelength span `[lo, hi)` of pixel `i`.
    pub fn pixel_span(&self, map: &GratingMap, i: usize) -> (f64, f64) {
        let c0 = (self.start_column + i * self.pixel_width) as f64;
        let c1 = c0 + self.pixel_width as f64;
        (map.column_to_wavelength(c0), map.column_to_wavelength(c1))
    }

    pub fn centers(&self, map: &GratingMap) -> Vec<f64> {
        (0..self.pixel_count)
            .map(|i| {
                let (lo, hi) = self.pixel_span(map, i);
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Index of the pixel whose span contains `lambda`.
    pub fn pixel_containing(&self, map: &GratingMap, lambda: f64) -> Option<usize> {
        (0..self.pixel_count).find(|&i| {
            let (lo, hi) = self.pixel_span(map, i);
            lambda >= lo && lambda < hi
        })
    }
}

/// Optical power (W) reaching each pixel after instrument blur.
pub fn bin_powers(
    scene: &SpectralScene,
    map: &GratingMap,
    layout: &PixelLayout,
    blur_fwhm: f64,
) -> Result<Vec<f64>> {
    map.validate()?;
    layout.validate(map)?;
    let blurred = scene.blurred(blur_fwhm)?;
    Ok((0..layout.pixel_count)
        .map(|i| {
            let (lo, hi) = layout.pixel_span(map, i);
            blurred.integrate(lo, hi)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paraxial_width_matches_design_expression() {
        let map = GratingMap::default();
        assert!((paraxial_width(&map) - 12.456).abs() < 1e-9);
        let empty = GratingMap {
            lambda_max: map.lambda_min,
            ..map.clone()
        };
        assert_eq!(paraxial_width(&empty), 0.0);
        assert!((paraxial_width(&map) * map.stretch_factor - 14.0).abs() < 1e-12);
    }

    #[test]
    fn default_map_uses_1020_columns() {
        let map = GratingMap::default();
        assert_eq!(map.used_columns(), 1020.0);
        assert!((map.nm_per_column() - 346.0 / 1020.0).abs() < 1e-15);
        assert_eq!(map.wavelength_to_column(369.0).unwrap(), 0.0);
        assert!((map.wavelength_to_column(715.0).unwrap() - 1020.0).abs() < 1e-9);
        assert!(map.wavelength_to_column(368.9).is_err());
        assert!(map.wavelength_to_column(715.1).is_err());
    }

    #[test]
    fn narrow_array_limits_used_width() {
        let map = GratingMap {
            stretch_factor: 1.0,
            dmd_columns: 2000,
            ..GratingMap::default()
        };
        // 12.456 mm / 13.68 µm
        assert!((map.used_columns() - 12_456.0 / 13.68).abs() < 1e-9);
    }

    #[test]
    fn flat_scene_bins() {
        let map = GratingMap::default();
        let layout = PixelLayout::default();
        let scene = SpectralScene::flat(369.0, 715.0, 0.1, 1.0).unwrap();
        let bins = bin_powers(&scene, &map, &layout, 0.0).unwrap();
        assert_eq!(bins.len(), 102);
        // 10 columns of 346/1020 nm each at 1 W/nm
        for b in &bins {
            assert!((b - 3460.0 / 1020.0).abs() < 1e-9, "{b}");
        }
        let total: f64 = bins.iter().sum();
        assert!((total / scene.total_power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn layout_must_fit() {
        let map = GratingMap::default();
        let layout = PixelLayout {
            pixel_count: 103,
            ..PixelLayout::default()
        };
        assert!(layout.validate(&map).is_err());
        let shifted = PixelLayout {
            start_column: 1,
            ..PixelLayout::default()
        };
        assert!(shifted.validate(&map).is_err());
    }

    #[test]
    fn pixel_lookup() {
        let map = GratingMap::default();
        let layout = PixelLayout::default();
        assert_eq!(layout.pixel_containing(&map, 369.0), Some(0));
        assert_eq!(layout.pixel_containing(&map, 607.1), Some(70));
        assert_eq!(layout.pixel_containing(&map, 800.0), None);
    }

    proptest! {
        #[test]
        fn column_mapping_round_trips(lambda in 369.0f64..=715.0) {
            let map = GratingMap::default();
            let c = map.wavelength_to_column(lambda).unwrap();
            prop_assert!((map.column_to_wavelength(c) - lambda).abs() < 1e-9);
        }
    }
}
