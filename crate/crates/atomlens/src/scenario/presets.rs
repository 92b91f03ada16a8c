//! Built-in scenario configs, compiled into the binary so `--preset` works
//! without any files on disk. Each one is a plain config file under
//! `presets/`; they double as syntax examples for writing your own.

const PRESETS: &[(&str, &str)] = &[
    (
        "uniform_scan_0p2uk",
        include_str!("../../presets/uniform_scan_0p2uk.cfg"),
    ),
    (
        "uniform_scan_0p6uk",
        include_str!("../../presets/uniform_scan_0p6uk.cfg"),
    ),
    (
        "rabi_scan_w050um",
        include_str!("../../presets/rabi_scan_w050um.cfg"),
    ),
    (
        "rabi_scan_w125um",
        include_str!("../../presets/rabi_scan_w125um.cfg"),
    ),
    (
        "rabi_scan_w200um",
        include_str!("../../presets/rabi_scan_w200um.cfg"),
    ),
    (
        "drop_snapshot_190nk",
        include_str!("../../presets/drop_snapshot_190nk.cfg"),
    ),
    (
        "drop_snapshot_370nk",
        include_str!("../../presets/drop_snapshot_370nk.cfg"),
    ),
    ("drop_fwhm_scan", include_str!("../../presets/drop_fwhm_scan.cfg")),
    (
        "drop_temperature_scan",
        include_str!("../../presets/drop_temperature_scan.cfg"),
    ),
    ("lens_law", include_str!("../../presets/lens_law.cfg")),
    (
        "gravity_lens_law",
        include_str!("../../presets/gravity_lens_law.cfg"),
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_config, Severity};

    #[test]
    fn every_preset_validates_clean() {
        for name in preset_names() {
            let text = preset_text(name).unwrap();
            let (cfg, diags) = load_config(text);
            assert!(
                cfg.is_some(),
                "preset {name} failed to load: {:?}",
                diags
                    .iter()
                    .filter(|d| d.severity == Severity::Error)
                    .collect::<Vec<_>>()
            );
            assert!(
                diags.is_empty(),
                "preset {name} has diagnostics: {diags:?}"
            );
        }
    }

    #[test]
    fn lookup_misses_return_none() {
        assert!(preset_text("no_such_preset").is_none());
        assert_eq!(preset_names().len(), PRESETS.len());
    }
}
