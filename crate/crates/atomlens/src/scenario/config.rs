//! Scenario config files: a flat INI-style format (sections, `key = value`,
//! `#` comment lines) parsed into a fully validated [`ScenarioConfig`].
//!
//! Parsing never panics on user input. Problems come back as
//! [`Diagnostic`]s carrying line numbers; any error-severity diagnostic
//! means no config is produced. Warnings flag suspicious but runnable
//! setups, like a beam too deep for the impulse approximation.

use crate::units::{depth_from_rabi, AtomSpecies, GaussianBeam, G_ACCEL};
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding, tied to a config line when one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.line {
            Some(n) => write!(f, "{tag}: line {n}: {}", self.message),
            None => write!(f, "{tag}: {}", self.message),
        }
    }
}

/// What a scenario computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Collimation vs object distance at constant axial speed.
    UniformScan,
    /// Collimation vs Rabi frequency (beam power scan).
    RabiScan,
    /// One dropped cloud imaged at a fixed time after the beam.
    DropSnapshot,
    /// Image width vs flight time for a dropped cloud.
    DropFwhmScan,
    /// Collimation of a dropped cloud vs its temperature.
    DropTemperatureScan,
    /// Paraxial ray fan through the beam vs the thin-lens equation.
    LensLawCheck,
    /// Dropped test ray vs the predicted refocusing height.
    GravityLensLawCheck,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::UniformScan => "uniform_scan",
            ScenarioKind::RabiScan => "rabi_scan",
            ScenarioKind::DropSnapshot => "drop_snapshot",
            ScenarioKind::DropFwhmScan => "drop_fwhm_scan",
            ScenarioKind::DropTemperatureScan => "drop_temperature_scan",
            ScenarioKind::LensLawCheck => "lens_law_check",
            ScenarioKind::GravityLensLawCheck => "gravity_lens_law_check",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform_scan" => ScenarioKind::UniformScan,
            "rabi_scan" => ScenarioKind::RabiScan,
            "drop_snapshot" => ScenarioKind::DropSnapshot,
            "drop_fwhm_scan" => ScenarioKind::DropFwhmScan,
            "drop_temperature_scan" => ScenarioKind::DropTemperatureScan,
            "lens_law_check" => ScenarioKind::LensLawCheck,
            "gravity_lens_law_check" => ScenarioKind::GravityLensLawCheck,
            _ => return None,
        })
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether sweeps carry a Monte Carlo ensemble along with the analytics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    Off,
    Kickmap,
    Traced,
}

impl McMode {
    pub fn name(&self) -> &'static str {
        match self {
            McMode::Off => "off",
            McMode::Kickmap => "kickmap",
            McMode::Traced => "traced",
        }
    }
}

impl fmt::Display for McMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    ObjectDistance,
    RabiFrequency,
    FlightTime,
    Temperature,
    DropHeight,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::ObjectDistance => "object_distance",
            SweepVariable::RabiFrequency => "rabi_frequency",
            SweepVariable::FlightTime => "flight_time",
            SweepVariable::Temperature => "temperature",
            SweepVariable::DropHeight => "drop_height",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub log_scale: bool,
}

impl Sweep {
    /// The sweep grid, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                let frac = i as f64 / (n - 1) as f64;
                if self.log_scale {
                    (self.min.ln() + (self.max / self.min).ln() * frac).exp()
                } else {
                    self.min + (self.max - self.min) * frac
                }
            })
            .collect()
    }
}

/// How the beam depth was specified (kept so power sweeps know the drive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamDrive {
    Depth(f64),
    Rabi { rabi: f64, detuning: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSettings {
    pub temperature: f64,
    pub initial_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGeometry {
    pub axial_speed: f64,
    pub object_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityGeometry {
    pub drop_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imaging {
    /// Time after the beam at which the cloud is imaged (None when swept).
    pub flight_time: Option<f64>,
    pub bins: usize,
    pub half_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayFan {
    pub count: usize,
    /// Largest arrival offset as a fraction of the waist.
    pub max_offset_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOverrides {
    pub dt_scale: f64,
    pub cutoff_radii: Option<f64>,
    pub max_time: Option<f64>,
}

impl Default for IntegratorOverrides {
    fn default() -> Self {
        IntegratorOverrides {
            dt_scale: 1.0,
            cutoff_radii: None,
            max_time: None,
        }
    }
}

/// A fully validated scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub particles: usize,
    pub mc_mode: McMode,
    pub species: AtomSpecies,
    pub beam: GaussianBeam,
    pub drive: BeamDrive,
    pub cloud: Option<CloudSettings>,
    pub sweep: Option<Sweep>,
    pub uniform: Option<UniformGeometry>,
    pub gravity: Option<GravityGeometry>,
    pub imaging: Option<Imaging>,
    pub integrator: IntegratorOverrides,
    pub rays: RayFan,
    pub output: Option<String>,
}

struct RawEntry {
    key: String,
    value: String,
    line: usize,
}

struct RawSection {
    name: String,
    line: usize,
    entries: Vec<RawEntry>,
}

fn parse_raw(text: &str) -> (Vec<RawSection>, Vec<Diagnostic>) {
    let mut sections: Vec<RawSection> = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            match inner.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => {
                    let name = name.trim().to_string();
                    if sections.iter().any(|s| s.name == name) {
                        diags.push(Diagnostic {
                            severity: Severity::Error,
                            line: Some(line),
                            message: format!("duplicate section [{name}]"),
                        });
                    } else {
                        sections.push(RawSection {
                            name,
                            line,
                            entries: Vec::new(),
                        });
                    }
                }
                _ => diags.push(Diagnostic {
                    severity: Severity::Error,
                    line: Some(line),
                    message: format!("malformed section header '{trimmed}'"),
                }),
            }
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            diags.push(Diagnostic {
                severity: Severity::Error,
                line: Some(line),
                message: format!("expected 'key = value' or a section header, got '{trimmed}'"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            diags.push(Diagnostic {
                severity: Severity::Error,
                line: Some(line),
                message: "empty key or value".to_string(),
            });
            continue;
        }
        match sections.last_mut() {
            Some(section) => {
                if section.entries.iter().any(|e| e.key == key) {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        line: Some(line),
                        message: format!("duplicate key '{key}' in [{}]", section.name),
                    });
                } else {
                    section.entries.push(RawEntry { key, value, line });
                }
            }
            None => diags.push(Diagnostic {
                severity: Severity::Error,
                line: Some(line),
                message: format!("key '{key}' appears before any [section]"),
            }),
        }
    }
    (sections, diags)
}

const KNOWN_SECTIONS: &[&str] = &[
    "scenario",
    "species",
    "beam",
    "cloud",
    "sweep",
    "uniform",
    "gravity",
    "imaging",
    "integrator",
    "rays",
    "output",
];

/// Bookkeeping over the raw sections: takes keys, remembers what was used,
/// accumulates diagnostics.
struct Analyzer {
    sections: Vec<RawSection>,
    consumed: HashSet<(usize, usize)>,
    diags: Vec<Diagnostic>,
}

impl Analyzer {
    fn error(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Error,
            line,
            message: message.into(),
        });
    }

    fn warn(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Warning,
            line,
            message: message.into(),
        });
    }

    fn section_index(&self, name: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.name == name)
    }

    fn has_section(&self, name: &str) -> bool {
        self.section_index(name).is_some()
    }

    fn section_line(&self, name: &str) -> Option<usize> {
        self.section_index(name).map(|i| self.sections[i].line)
    }

    /// Raw string for `[section] key`, marking it consumed.
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let si = self.section_index(section)?;
        let ei = self.sections[si].entries.iter().position(|e| e.key == key)?;
        self.consumed.insert((si, ei));
        let e = &self.sections[si].entries[ei];
        Some((e.value.clone(), e.line))
    }

    fn take_f64(&mut self, section: &str, key: &str) -> Option<(f64, usize)> {
        let (value, line) = self.take(section, key)?;
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some((v, line)),
            _ => {
                self.error(
                    Some(line),
                    format!("{section}.{key}: '{value}' is not a finite number"),
                );
                None
            }
        }
    }

    fn take_usize(&mut self, section: &str, key: &str) -> Option<(usize, usize)> {
        let (value, line) = self.take(section, key)?;
        match value.parse::<usize>() {
            Ok(v) => Some((v, line)),
            Err(_) => {
                self.error(
                    Some(line),
                    format!("{section}.{key}: '{value}' is not a non-negative integer"),
                );
                None
            }
        }
    }

    fn take_u64(&mut self, section: &str, key: &str) -> Option<(u64, usize)> {
        let (value, line) = self.take(section, key)?;
        match value.parse::<u64>() {
            Ok(v) => Some((v, line)),
            Err(_) => {
                self.error(
                    Some(line),
                    format!("{section}.{key}: '{value}' is not a non-negative integer"),
                );
                None
            }
        }
    }

    /// A required f64 with a predicate; pushes an error when missing or out
    /// of range and returns None.
    fn require_f64(
        &mut self,
        section: &str,
        key: &str,
        check: impl Fn(f64) -> bool,
        expect: &str,
    ) -> Option<f64> {
        match self.take_f64(section, key) {
            Some((v, line)) => {
                if check(v) {
                    Some(v)
                } else {
                    self.error(Some(line), format!("{section}.{key}: {expect}, got {v:e}"));
                    None
                }
            }
            None => {
                if self.has_section(section)
                    && !self
                        .diags
                        .iter()
                        .any(|d| d.message.starts_with(&format!("{section}.{key}:")))
                {
                    let line = self.section_line(section);
                    self.error(line, format!("missing required key {section}.{key}"));
                }
                None
            }
        }
    }

    fn optional_f64(
        &mut self,
        section: &str,
        key: &str,
        check: impl Fn(f64) -> bool,
        expect: &str,
    ) -> Option<f64> {
        let (v, line) = self.take_f64(section, key)?;
        if check(v) {
            Some(v)
        } else {
            self.error(Some(line), format!("{section}.{key}: {expect}, got {v:e}"));
            None
        }
    }

    /// After analysis: warn about anything present but never consumed.
    fn sweep_unused(&mut self) {
        let mut leftovers = Vec::new();
        for (si, section) in self.sections.iter().enumerate() {
            if !KNOWN_SECTIONS.contains(&section.name.as_str()) {
                leftovers.push((
                    section.line,
                    format!("unknown section [{}]", section.name),
                ));
                continue;
            }
            for (ei, entry) in section.entries.iter().enumerate() {
                if !self.consumed.contains(&(si, ei)) {
                    leftovers.push((
                        entry.line,
                        format!(
                            "key '{}' in [{}] is not used by this scenario",
                            entry.key, section.name
                        ),
                    ));
                }
            }
        }
        for (line, message) in leftovers {
            self.warn(Some(line), message);
        }
    }
}

/// Parse and validate a config file. Returns the config (when there are no
/// errors) together with every diagnostic found, warnings included.
pub fn load_config(text: &str) -> (Option<ScenarioConfig>, Vec<Diagnostic>) {
    let (sections, parse_diags) = parse_raw(text);
    if parse_diags
        .iter()
        .any(|d| d.severity == Severity::Error)
    {
        return (None, parse_diags);
    }
    let mut a = Analyzer {
        sections,
        consumed: HashSet::new(),
        diags: parse_diags,
    };

    // [scenario]
    if !a.has_section("scenario") {
        a.error(None, "missing [scenario] section");
        return (None, a.diags);
    }
    let kind = match a.take("scenario", "kind") {
        Some((value, line)) => match ScenarioKind::parse(&value) {
            Some(k) => Some(k),
            None => {
                a.error(
                    Some(line),
                    format!(
                        "unknown scenario kind '{value}' (known: uniform_scan, rabi_scan, \
                         drop_snapshot, drop_fwhm_scan, drop_temperature_scan, lens_law_check, \
                         gravity_lens_law_check)"
                    ),
                );
                None
            }
        },
        None => {
            let line = a.section_line("scenario");
            a.error(line, "missing required key scenario.kind");
            None
        }
    };
    let seed = a.take_u64("scenario", "seed").map_or(0, |(v, _)| v);
    let particles = match a.take_usize("scenario", "particles") {
        Some((v, line)) => {
            if v < 2 {
                a.error(Some(line), "scenario.particles: need at least 2");
            }
            v
        }
        None => 10_000,
    };
    let mc_mode_explicit = match a.take("scenario", "mc_mode") {
        Some((value, line)) => match value.as_str() {
            "off" => Some(McMode::Off),
            "kickmap" => Some(McMode::Kickmap),
            "traced" => Some(McMode::Traced),
            other => {
                a.error(
                    Some(line),
                    format!("scenario.mc_mode: '{other}' is not off, kickmap or traced"),
                );
                None
            }
        },
        None => None,
    };

    // [species]: defaults to 87Rb; a name plus explicit overrides is fine.
    let species = {
        let mut base = AtomSpecies::rb87();
        if a.has_section("species") {
            if let Some((name, line)) = a.take("species", "name") {
                if name != "rb87" {
                    a.error(
                        Some(line),
                        format!("species.name: unknown species '{name}' (known: rb87)"),
                    );
                }
            }
            let mass = a
                .optional_f64("species", "mass_kg", |v| v > 0.0, "must be positive")
                .unwrap_or(base.mass());
            let linewidth = a
                .optional_f64("species", "linewidth_rad_s", |v| v >= 0.0, "must be non-negative")
                .unwrap_or(base.linewidth());
            let freq = a
                .optional_f64(
                    "species",
                    "transition_freq_rad_s",
                    |v| v > 0.0,
                    "must be positive",
                )
                .unwrap_or(base.transition_freq());
            match AtomSpecies::new(mass, linewidth, freq) {
                Ok(s) => base = s,
                Err(e) => {
                    let line = a.section_line("species");
                    a.error(line, format!("invalid species: {e}"));
                }
            }
        }
        base
    };

    // [beam]
    let mut drive = None;
    let mut beam = None;
    if a.has_section("beam") {
        let waist = a.require_f64("beam", "waist_m", |v| v > 0.0, "must be positive");
        let depth_j = a.optional_f64("beam", "depth_j", |_| true, "");
        let rabi = a.optional_f64("beam", "rabi_rad_s", |v| v > 0.0, "must be positive");
        let detuning = a.optional_f64("beam", "detuning_rad_s", |v| v != 0.0, "must be nonzero");
        let center_y = a
            .optional_f64("beam", "center_y_m", |_| true, "")
            .unwrap_or(0.0);
        let center_z = a
            .optional_f64("beam", "center_z_m", |_| true, "")
            .unwrap_or(0.0);
        let beam_line = a.section_line("beam");
        let depth = match (depth_j, rabi, detuning) {
            (Some(d), None, None) => {
                drive = Some(BeamDrive::Depth(d));
                Some(d)
            }
            (None, Some(r), Some(det)) => match depth_from_rabi(&species, r, det) {
                Ok(d) => {
                    drive = Some(BeamDrive::Rabi {
                        rabi: r,
                        detuning: det,
                    });
                    Some(d)
                }
                Err(e) => {
                    a.error(beam_line, format!("beam drive: {e}"));
                    None
                }
            },
            (Some(_), _, _) => {
                a.error(
                    beam_line,
                    "give either beam.depth_j or beam.rabi_rad_s + beam.detuning_rad_s, not both",
                );
                None
            }
            (None, r, d) => {
                if r.is_some() != d.is_some() {
                    a.error(
                        beam_line,
                        "beam.rabi_rad_s and beam.detuning_rad_s must be given together",
                    );
                } else {
                    a.error(
                        beam_line,
                        "beam needs a drive: depth_j, or rabi_rad_s + detuning_rad_s",
                    );
                }
                None
            }
        };
        if let (Some(w), Some(d)) = (waist, depth) {
            match GaussianBeam::new(d, w, center_y, center_z) {
                Ok(b) => beam = Some(b),
                Err(e) => a.error(beam_line, format!("invalid beam: {e}")),
            }
        }
    } else {
        a.error(None, "missing [beam] section");
    }

    // [cloud]
    let cloud = if a.has_section("cloud") {
        let temperature =
            a.require_f64("cloud", "temperature_k", |v| v > 0.0, "must be positive");
        let initial_radius = a
            .optional_f64("cloud", "initial_radius_m", |v| v >= 0.0, "must be non-negative")
            .unwrap_or(0.0);
        temperature.map(|temperature| CloudSettings {
            temperature,
            initial_radius,
        })
    } else {
        None
    };

    // [sweep]
    let sweep = if a.has_section("sweep") {
        let variable = match a.take("sweep", "variable") {
            Some((value, line)) => {
                let known = [
                    SweepVariable::ObjectDistance,
                    SweepVariable::RabiFrequency,
                    SweepVariable::FlightTime,
                    SweepVariable::Temperature,
                    SweepVariable::DropHeight,
                ];
                match known.iter().find(|v| v.name() == value) {
                    Some(&v) => Some(v),
                    None => {
                        a.error(
                            Some(line),
                            format!(
                                "sweep.variable: unknown variable '{value}' (known: \
                                 object_distance, rabi_frequency, flight_time, temperature, \
                                 drop_height)"
                            ),
                        );
                        None
                    }
                }
            }
            None => {
                let line = a.section_line("sweep");
                a.error(line, "missing required key sweep.variable");
                None
            }
        };
        let min = a.require_f64("sweep", "min", |_| true, "");
        let max = a.require_f64("sweep", "max", |_| true, "");
        let steps = match a.take_usize("sweep", "steps") {
            Some((v, line)) => {
                if v < 2 {
                    a.error(Some(line), "sweep.steps: need at least 2");
                    None
                } else {
                    Some(v)
                }
            }
            None => {
                let line = a.section_line("sweep");
                a.error(line, "missing required key sweep.steps");
                None
            }
        };
        let log_scale = match a.take("sweep", "scale") {
            Some((value, line)) => match value.as_str() {
                "linear" => Some(false),
                "log" => Some(true),
                other => {
                    a.error(
                        Some(line),
                        format!("sweep.scale: '{other}' is not linear or log"),
                    );
                    None
                }
            },
            None => Some(false),
        };
        match (variable, min, max, steps, log_scale) {
            (Some(variable), Some(min), Some(max), Some(steps), Some(log_scale)) => {
                let line = a.section_line("sweep");
                if min > max {
                    a.error(line, format!("sweep: min {min:e} exceeds max {max:e}"));
                    None
                } else if log_scale && min <= 0.0 {
                    a.error(line, "sweep: log scale needs a positive min");
                    None
                } else {
                    Some(Sweep {
                        variable,
                        min,
                        max,
                        steps,
                        log_scale,
                    })
                }
            }
            _ => None,
        }
    } else {
        None
    };

    // [uniform]
    let uniform = if a.has_section("uniform") {
        let axial_speed =
            a.require_f64("uniform", "axial_speed_m_s", |v| v > 0.0, "must be positive");
        let object_distance =
            a.optional_f64("uniform", "object_distance_m", |v| v > 0.0, "must be positive");
        axial_speed.map(|axial_speed| UniformGeometry {
            axial_speed,
            object_distance,
        })
    } else {
        None
    };

    // [gravity]: height directly or via the fall time.
    let gravity = if a.has_section("gravity") {
        let height = a.optional_f64("gravity", "drop_height_m", |v| v > 0.0, "must be positive");
        let fall_time =
            a.optional_f64("gravity", "release_fall_time_s", |v| v > 0.0, "must be positive");
        let line = a.section_line("gravity");
        match (height, fall_time) {
            (Some(_), Some(_)) => {
                a.error(
                    line,
                    "give either gravity.drop_height_m or gravity.release_fall_time_s, not both",
                );
                None
            }
            (Some(h), None) => Some(GravityGeometry { drop_height: h }),
            (None, Some(t)) => Some(GravityGeometry {
                drop_height: 0.5 * G_ACCEL * t * t,
            }),
            (None, None) => {
                a.error(
                    line,
                    "gravity needs drop_height_m or release_fall_time_s",
                );
                None
            }
        }
    } else {
        None
    };

    // [imaging]
    let imaging = if a.has_section("imaging") {
        let flight_time =
            a.optional_f64("imaging", "flight_time_s", |v| v > 0.0, "must be positive");
        let bins = match a.take_usize("imaging", "bins") {
            Some((v, line)) => {
                if v < 8 {
                    a.error(Some(line), "imaging.bins: need at least 8");
                    None
                } else {
                    Some(v)
                }
            }
            None => Some(801),
        };
        let half_range =
            a.require_f64("imaging", "half_range_m", |v| v > 0.0, "must be positive");
        match (bins, half_range) {
            (Some(bins), Some(half_range)) => Some(Imaging {
                flight_time,
                bins,
                half_range,
            }),
            _ => None,
        }
    } else {
        None
    };

    // [integrator]
    let mut integrator = IntegratorOverrides::default();
    if a.has_section("integrator") {
        if let Some(v) = a.optional_f64("integrator", "dt_scale", |v| v > 0.0, "must be positive")
        {
            integrator.dt_scale = v;
        }
        integrator.cutoff_radii =
            a.optional_f64("integrator", "cutoff_radii", |v| v >= 1.0, "must be at least 1");
        integrator.max_time =
            a.optional_f64("integrator", "max_time_s", |v| v > 0.0, "must be positive");
    }

    // [rays]
    let mut rays = RayFan {
        count: 20,
        max_offset_frac: 0.05,
    };
    if a.has_section("rays") {
        if let Some((v, line)) = a.take_usize("rays", "count") {
            if v < 2 {
                a.error(Some(line), "rays.count: need at least 2");
            } else {
                rays.count = v;
            }
        }
        if let Some(v) = a.optional_f64(
            "rays",
            "max_offset_frac",
            |v| v > 0.0 && v <= 1.0,
            "must be in (0, 1]",
        ) {
            rays.max_offset_frac = v;
        }
    }

    // [output]
    let output = a.take("output", "path").map(|(v, _)| v);

    // Cross-section requirements per kind.
    if let Some(kind) = kind {
        let need = |a: &mut Analyzer, present: bool, what: &str| {
            if !present {
                a.error(None, format!("{} requires {what}", kind.name()));
            }
        };
        let need_sweep_var = |a: &mut Analyzer, sweep: &Option<Sweep>, var: SweepVariable| {
            match sweep {
                Some(s) if s.variable != var => {
                    let line = a.section_line("sweep");
                    a.error(
                        line,
                        format!("{} sweeps {}, not {}", kind.name(), var, s.variable),
                    );
                }
                _ => {}
            }
        };
        match kind {
            ScenarioKind::UniformScan => {
                need(&mut a, uniform.is_some(), "[uniform] with axial_speed_m_s");
                need(&mut a, cloud.is_some(), "[cloud]");
                need(&mut a, sweep.is_some(), "[sweep] over object_distance");
                need_sweep_var(&mut a, &sweep, SweepVariable::ObjectDistance);
            }
            ScenarioKind::RabiScan => {
                need(&mut a, cloud.is_some(), "[cloud]");
                need(&mut a, sweep.is_some(), "[sweep] over rabi_frequency");
                need_sweep_var(&mut a, &sweep, SweepVariable::RabiFrequency);
                if uniform.is_some() == gravity.is_some() {
                    a.error(
                        None,
                        format!("{} needs exactly one of [uniform] or [gravity]", kind.name()),
                    );
                }
                if !matches!(drive, Some(BeamDrive::Rabi { .. })) && beam.is_some() {
                    a.error(
                        None,
                        "rabi_scan sweeps the drive, so the beam must be specified by \
                         rabi_rad_s + detuning_rad_s, not depth_j",
                    );
                }
            }
            ScenarioKind::DropSnapshot => {
                need(&mut a, gravity.is_some(), "[gravity]");
                need(&mut a, cloud.is_some(), "[cloud]");
                need(&mut a, imaging.is_some(), "[imaging]");
                if let Some(img) = &imaging {
                    if img.flight_time.is_none() {
                        let line = a.section_line("imaging");
                        a.error(line, "drop_snapshot requires imaging.flight_time_s");
                    }
                }
                if sweep.is_some() {
                    let line = a.section_line("sweep");
                    a.error(line, "drop_snapshot takes no [sweep]");
                }
            }
            ScenarioKind::DropFwhmScan => {
                need(&mut a, gravity.is_some(), "[gravity]");
                need(&mut a, cloud.is_some(), "[cloud]");
                need(&mut a, imaging.is_some(), "[imaging]");
                need(&mut a, sweep.is_some(), "[sweep] over flight_time");
                need_sweep_var(&mut a, &sweep, SweepVariable::FlightTime);
            }
            ScenarioKind::DropTemperatureScan => {
                need(&mut a, gravity.is_some(), "[gravity]");
                need(&mut a, cloud.is_some(), "[cloud]");
                need(&mut a, sweep.is_some(), "[sweep] over temperature");
                need_sweep_var(&mut a, &sweep, SweepVariable::Temperature);
                if let Some(s) = &sweep {
                    if s.variable == SweepVariable::Temperature && s.min <= 0.0 {
                        let line = a.section_line("sweep");
                        a.error(line, "temperature sweep needs a positive min");
                    }
                }
            }
            ScenarioKind::LensLawCheck => {
                need(&mut a, uniform.is_some(), "[uniform] with axial_speed_m_s");
                need_sweep_var(&mut a, &sweep, SweepVariable::ObjectDistance);
                if sweep.is_none()
                    && uniform.as_ref().is_some_and(|u| u.object_distance.is_none())
                {
                    a.error(
                        None,
                        "lens_law_check needs uniform.object_distance_m or a [sweep] over \
                         object_distance",
                    );
                }
                if sweep.as_ref().is_some_and(|s| {
                    s.variable == SweepVariable::ObjectDistance && s.min <= 0.0
                }) {
                    let line = a.section_line("sweep");
                    a.error(line, "object distance sweep needs a positive min");
                }
            }
            ScenarioKind::GravityLensLawCheck => {
                need_sweep_var(&mut a, &sweep, SweepVariable::DropHeight);
                if sweep.is_none() && gravity.is_none() {
                    a.error(
                        None,
                        "gravity_lens_law_check needs [gravity] or a [sweep] over drop_height",
                    );
                }
                if sweep.as_ref().is_some_and(|s| {
                    s.variable == SweepVariable::DropHeight && s.min <= 0.0
                }) {
                    let line = a.section_line("sweep");
                    a.error(line, "drop height sweep needs a positive min");
                }
            }
        }

        // Sweeping object distances or rabi frequencies through zero or
        // negative values is caught here for the kinds that read them.
        if let (ScenarioKind::UniformScan, Some(s)) = (kind, &sweep) {
            if s.min <= 0.0 {
                let line = a.section_line("sweep");
                a.error(line, "object distance sweep needs a positive min");
            }
        }
        if let (ScenarioKind::RabiScan, Some(s)) = (kind, &sweep) {
            if s.min <= 0.0 {
                let line = a.section_line("sweep");
                a.error(line, "rabi frequency sweep needs a positive min");
            }
        }
        if let (ScenarioKind::DropFwhmScan, Some(s)) = (kind, &sweep) {
            if s.min <= 0.0 {
                let line = a.section_line("sweep");
                a.error(line, "flight time sweep needs a positive min");
            }
        }

        let mc_mode = mc_mode_explicit.unwrap_or(match kind {
            ScenarioKind::RabiScan => McMode::Off,
            _ => McMode::Kickmap,
        });
        match kind {
            ScenarioKind::DropSnapshot | ScenarioKind::DropFwhmScan => {
                if mc_mode == McMode::Off {
                    a.error(
                        None,
                        format!("{} is a Monte Carlo scenario; mc_mode off makes no sense", kind.name()),
                    );
                }
            }
            ScenarioKind::LensLawCheck | ScenarioKind::GravityLensLawCheck => {
                if mc_mode_explicit.is_some() {
                    a.warn(
                        None,
                        format!("{} traces deterministic rays; mc_mode has no effect", kind.name()),
                    );
                }
            }
            _ => {}
        }

        // Physics regime warnings: these run fine but the thin-lens numbers
        // will not mean much.
        if let Some(b) = &beam {
            if b.depth() > 0.0 {
                a.warn(
                    None,
                    "beam depth is positive (repulsive): the lens diverges instead of focusing",
                );
            }
            let kinetic = match (&uniform, &gravity) {
                (Some(u), _) => Some(0.5 * species.mass() * u.axial_speed * u.axial_speed),
                (None, Some(g)) => Some(species.mass() * G_ACCEL * g.drop_height),
                (None, None) => None,
            };
            if let Some(e0) = kinetic {
                let depth = b.depth().abs();
                if depth > 0.0 && e0 < 10.0 * depth {
                    a.warn(
                        None,
                        format!(
                            "kinetic energy at the beam is only {:.1} times the well depth; \
                             the impulse (thin lens) picture degrades below ~10",
                            e0 / depth
                        ),
                    );
                }
            }
        }

        a.sweep_unused();

        let has_errors = a.diags.iter().any(|d| d.severity == Severity::Error);
        if !has_errors {
            let config = ScenarioConfig {
                kind,
                seed,
                particles,
                mc_mode,
                species,
                beam: beam.expect("validated above"),
                drive: drive.expect("validated above"),
                cloud,
                sweep,
                uniform,
                gravity,
                imaging,
                integrator,
                rays,
                output,
            };
            return (Some(config), a.diags);
        }
    } else {
        a.sweep_unused();
    }
    (None, a.diags)
}
