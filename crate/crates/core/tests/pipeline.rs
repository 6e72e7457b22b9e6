use caos_core::analysis::{dr_sweep, measure_system_response, normalize, simulate};
use caos_core::experiment::{Experiment, ExperimentConfig};
use caos_core::{
    apply_filter, build_plan, decode_stream, detect, sylvester_codebook, AdcConfig, DetectorConfig, FilterModel,
    ModeConfig, PixelLayout, SampleStream, SpectralScene,
};
use proptest::prelude::*;

fn noiseless(name: &str) -> Experiment {
    let mut cfg = ExperimentConfig::load(name).unwrap();
    cfg.detector.noise_floor = 0.0;
    cfg.adc.quantize = false;
    Experiment::new(cfg).unwrap()
}

fn one_pixel() -> PixelLayout {
    PixelLayout {
        pixel_count: 1,
        pixel_width: 1,
        pixel_height: 1,
        start_column: 0,
    }
}

#[test]
fn modes_agree_without_noise() {
    let powers: Vec<Vec<f64>> = ["cdma_dr", "fig4_fmcdma"]
        .iter()
        .map(|n| {
            let exp = noiseless(n);
            let truth = exp.bin_powers(&exp.sample_scene(0.0).unwrap()).unwrap();
            exp.acquire(&truth, 0).unwrap().powers()
        })
        .collect();
    let peak = powers[0].iter().cloned().fold(0.0, f64::max);
    for (a, b) in powers[0].iter().zip(&powers[1]) {
        assert!((a - b).abs() < 1e-9 * peak);
    }
}

#[test]
fn white_noise_variance_matches_density() {
    let cfg = ModeConfig::cdma(2, 1.0, 20_000.0, vec![1]).unwrap();
    let plan = build_plan(&cfg, &one_pixel(), &sylvester_codebook(2).unwrap()).unwrap();
    let det = DetectorConfig {
        responsivity: 1.0,
        transimpedance_gain: 1.0,
        noise_floor: 1e-4,
        dark_offset: 0.0,
        shot_noise_enabled: false,
        saturation_voltage: 10.0,
        rng_seed: 3,
    };
    let adc = AdcConfig {
        sample_rate: 20_000.0,
        bits: 16,
        full_scale: 10.0,
        quantize: false,
    };
    let s = detect(&plan, &[0.0], &det, &adc).unwrap();
    let n = s.samples.len() as f64;
    let mean = s.samples.iter().sum::<f64>() / n;
    let var = s.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected = 1e-8 * 20_000.0 / 2.0;
    assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
}

#[test]
fn shot_noise_variance_is_poisson() {
    let cfg = ModeConfig::cdma(2, 1.0, 10_000.0, vec![1]).unwrap();
    let plan = build_plan(&cfg, &one_pixel(), &sylvester_codebook(2).unwrap()).unwrap();
    // 1e-15 W at 1 A/W is ~0.62 electrons per sample at 10 kHz
    let det = DetectorConfig {
        responsivity: 1.0,
        transimpedance_gain: 1.0 / (1.602_176_634e-19 * 10_000.0),
        noise_floor: 0.0,
        dark_offset: 0.0,
        shot_noise_enabled: true,
        saturation_voltage: 1e3,
        rng_seed: 9,
    };
    let adc = AdcConfig {
        sample_rate: 10_000.0,
        bits: 16,
        full_scale: 1e3,
        quantize: false,
    };
    let s = detect(&plan, &[1e-15], &det, &adc).unwrap();
    let lit = &s.samples[..5000];
    let mean = lit.iter().sum::<f64>() / 5000.0;
    let var = lit.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4999.0;
    assert!((var / mean - 1.0).abs() < 0.1, "mean {mean} var {var}");
}

#[test]
fn same_seed_same_stream() {
    let exp = Experiment::new(ExperimentConfig::load("fig5_fmtdma").unwrap()).unwrap();
    let truth = exp.bin_powers(&exp.sample_scene(3.0).unwrap()).unwrap();
    assert_eq!(exp.record(&truth, 11).unwrap(), exp.record(&truth, 11).unwrap());
    assert_ne!(exp.record(&truth, 11).unwrap(), exp.record(&truth, 12).unwrap());
}

#[test]
fn stream_files_round_trip() {
    let exp = Experiment::new(ExperimentConfig::load("cdma_dr").unwrap()).unwrap();
    let truth = exp.reference_powers().unwrap();
    let stream = exp.record(&truth, 1).unwrap();
    let mut raw = Vec::new();
    stream.write_raw(&mut raw).unwrap();
    assert_eq!(SampleStream::read_raw(raw.as_slice()).unwrap(), stream);
    let mut text = Vec::new();
    stream.write_csv(&mut text).unwrap();
    let back = SampleStream::read_csv(text.as_slice()).unwrap();
    let a = decode_stream(&back, exp.mode_config(), exp.codebook()).unwrap();
    let b = decode_stream(&stream, exp.mode_config(), exp.codebook()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flat_source_gives_flat_response() {
    let mut cfg = ExperimentConfig::load("fig2_response").unwrap();
    cfg.scene.source = caos_core::experiment::SourceModel::Flat {
        lambda_min_nm: 369.0,
        lambda_max_nm: 715.0,
        grid_step_nm: 0.1,
        density_w_per_nm: 5e-8,
    };
    cfg.optics.blur_fwhm_nm = 0.0;
    let exp = Experiment::new(cfg).unwrap();
    let r = measure_system_response(&exp, 5).unwrap();
    let a = r.amplitudes();
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    assert!(sd / mean < 0.01, "cv {}", sd / mean);
}

#[test]
fn self_normalized_response_is_one() {
    let exp = Experiment::new(ExperimentConfig::load("fig2_response").unwrap()).unwrap();
    let r = measure_system_response(&exp, 5).unwrap();
    let spectrum = exp.acquire(&exp.reference_powers().unwrap(), 5).unwrap();
    let n = normalize(&spectrum, &r).unwrap();
    for b in n.bins.iter().filter(|b| b.valid) {
        assert!((b.power - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fig4_geometry() {
    let exp = Experiment::new(ExperimentConfig::load("fig4_fmcdma").unwrap()).unwrap();
    let cfg = exp.config();
    assert_eq!(cfg.scene.od, 2.5);
    assert_eq!(exp.mode_config().carrier, Some(520.0));
    assert_eq!(exp.mode_config().carrier_bin(exp.mode_config().samples_per_unit), Some(1040));
    let truth = exp.bin_powers(&exp.sample_scene(0.0).unwrap()).unwrap();
    let got = exp.acquire(&truth, 2).unwrap();
    let peak = got.peak_index().unwrap();
    let nm = got.bins[peak].center_nm.unwrap();
    assert!((nm - 620.0).abs() < 5.0, "peak at {nm} nm");
    let sim = simulate(&exp).unwrap();
    assert_eq!(sim.truth.len(), exp.pixel_count());
}

#[test]
fn single_od_sweep_is_zero_db() {
    let exp = Experiment::new(ExperimentConfig::load("cdma_dr").unwrap()).unwrap();
    let r = dr_sweep(&exp, &[0.0], 1.2, 4, 1, 1).unwrap();
    assert_eq!(r.max_od_passed, Some(0.0));
    assert_eq!(r.dr_db, 0.0);
    assert!(dr_sweep(&exp, &[], 1.2, 4, 1, 1).is_err());
}

#[test]
fn snr_does_not_rise_with_od() {
    let exp = Experiment::new(ExperimentConfig::load("cdma_dr").unwrap()).unwrap();
    let ods: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
    let r = dr_sweep(&exp, &ods, 1.2, 20, 8, 1).unwrap();
    for w in r.points.windows(2) {
        let sigma = (w[0].snr_sem.powi(2) + w[1].snr_sem.powi(2)).sqrt();
        assert!(w[1].snr <= w[0].snr + 3.0 * sigma, "{:?}", w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nd_filters_compose(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let s = SpectralScene::flat(400.0, 700.0, 1.0, 2.0).unwrap();
        let ab = apply_filter(&apply_filter(&s, &FilterModel::neutral_density(a)).unwrap(),
                              &FilterModel::neutral_density(b)).unwrap();
        let c = apply_filter(&s, &FilterModel::neutral_density(a + b)).unwrap();
        for (x, y) in ab.density().iter().zip(c.density()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn binning_conserves_band_power(step in 0.05f64..1.0, level in 1e-9f64..1.0) {
        let exp = noiseless("fig2_response");
        let map = &exp.config().optics.grating;
        let scene = SpectralScene::flat(map.lambda_min, map.lambda_max, step, level).unwrap();
        let mut cfg = exp.config().clone();
        cfg.optics.blur_fwhm_nm = 0.0;
        let bins = Experiment::new(cfg).unwrap().bin_powers(&scene).unwrap();
        let total: f64 = bins.iter().sum();
        prop_assert!((total - scene.total_power()).abs() < 1e-9 * scene.total_power());
    }

    #[test]
    fn noiseless_decoding_is_linear(k in 1e-3f64..1.0, seed in 0u64..1000) {
        let exp = noiseless("cdma_dr");
        let truth = exp.reference_powers().unwrap();
        let scaled: Vec<f64> = truth.iter().map(|p| p * k).collect();
        let a = exp.acquire(&truth, seed).unwrap().powers();
        let b = exp.acquire(&scaled, seed).unwrap().powers();
        let peak = b.iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * k - y).abs() <= 1e-9 * peak);
        }
    }
}
