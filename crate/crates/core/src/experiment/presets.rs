//! Bundled experiment configurations.

pub const NAMES: &[&str] = &[
    "fig2_response",
    "fig3_cdma_highpass",
    "fig4_fmcdma",
    "cdma_dr",
    "fig5_fmtdma",
    "fmtdma_silicon",
];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2_response" => include_str!("../../presets/fig2_response.toml"),
        "fig3_cdma_highpass" => include_str!("../../presets/fig3_cdma_highpass.toml"),
        "fig4_fmcdma" => include_str!("../../presets/fig4_fmcdma.toml"),
        "cdma_dr" => include_str!("../../presets/cdma_dr.toml"),
        "fig5_fmtdma" => include_str!("../../presets/fig5_fmtdma.toml"),
        "fmtdma_silicon" => include_str!("../../presets/fmtdma_silicon.toml"),
        _ => return None,
    })
}
