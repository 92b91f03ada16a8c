//! Turns a validated [`ScenarioConfig`] into CSV rows plus a short summary.
//!
//! Every scenario writes one header line and `{:.16e}` floats, so reruns of
//! the same config diff clean. Monte Carlo columns are left empty when the
//! scenario runs analytics only.

use super::config::{
    BeamDrive, CloudSettings, Imaging, IntegratorOverrides, McMode, ScenarioConfig, ScenarioKind,
};
use crate::collimation::{CollimationError, CollimationInput, LensGeometry};
use crate::ensemble::{
    advance_to, decompose_velocities, density_profile, evolve_kickmap, evolve_traced,
    fit_bigaussian, free_expand, fwhm_from_sigma, imaging_width_rms, mean_position, rms_and_se,
    rms_position, sample_cloud, Axis, Ensemble, EnsembleError,
};
use crate::fit::{BiGaussianFit, FitError};
use crate::thinlens::{self, LensError};
use crate::tracer::{trace, transverse_crossing, IntegratorParams, TracerError};
use crate::units::{
    depth_from_rabi, rms_thermal_velocity, AtomSpecies, CloudSpec, GaussianBeam, PhaseSpacePoint,
    UnitsError, G_ACCEL,
};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Units(#[from] UnitsError),
    #[error(transparent)]
    Lens(#[from] LensError),
    #[error(transparent)]
    Collimation(#[from] CollimationError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Tracer(#[from] TracerError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// What a run produced besides the CSV itself.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ScenarioKind,
    /// Data rows written (header not counted).
    pub rows: usize,
    /// Headline numbers as (name, value) pairs, in output order.
    pub notes: Vec<(String, String)>,
}

impl RunSummary {
    fn new(kind: ScenarioKind) -> Self {
        RunSummary {
            kind,
            rows: 0,
            notes: Vec::new(),
        }
    }

    fn note(&mut self, name: &str, value: String) {
        self.notes.push((name.to_string(), value));
    }
}

/// Comment header identifying the build and the run parameters; callers
/// prepend it to the CSV so result files are self-describing.
pub fn write_metadata(config: &ScenarioConfig, out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "# atomlens {} ({})",
        env!("CARGO_PKG_VERSION"),
        env!("ATOMLENS_BUILD")
    )?;
    writeln!(out, "# kind = {}", config.kind)?;
    writeln!(out, "# seed = {}", config.seed)?;
    writeln!(out, "# particles = {}", config.particles)?;
    writeln!(out, "# mc_mode = {}", config.mc_mode)?;
    writeln!(out, "# beam_depth_j = {:.16e}", config.beam.depth())?;
    writeln!(out, "# beam_waist_m = {:.16e}", config.beam.waist())?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn approach_time(geometry: LensGeometry) -> f64 {
    match geometry {
        LensGeometry::Uniform {
            object_distance,
            axial_speed,
        } => object_distance / axial_speed,
        LensGeometry::Gravity { drop_height } => (2.0 * drop_height / G_ACCEL).sqrt(),
    }
}

fn beam_speed(geometry: LensGeometry) -> f64 {
    match geometry {
        LensGeometry::Uniform { axial_speed, .. } => axial_speed,
        LensGeometry::Gravity { drop_height } => (2.0 * G_ACCEL * drop_height).sqrt(),
    }
}

fn uses_gravity(geometry: LensGeometry) -> bool {
    matches!(geometry, LensGeometry::Gravity { .. })
}

/// Integrator parameters from the defaults plus any config overrides.
fn build_params(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    v_z0: f64,
    overrides: &IntegratorOverrides,
) -> Result<IntegratorParams, TracerError> {
    let mut p = IntegratorParams::default_for(species, beam, v_z0)?;
    if overrides.dt_scale != 1.0 {
        p = p.with_dt_scale(overrides.dt_scale)?;
    }
    if let Some(c) = overrides.cutoff_radii {
        p = p.with_cutoff(c)?;
    }
    if let Some(t) = overrides.max_time {
        p = IntegratorParams::new(p.dt(), p.cutoff_radii(), t)?;
    }
    Ok(p)
}

fn vy_stats(ens: &Ensemble) -> Result<(f64, f64), EnsembleError> {
    let v: Vec<f64> = ens.particles().iter().map(|p| p.vy).collect();
    rms_and_se(&v)
}

fn vz_stats(ens: &Ensemble) -> Result<(f64, f64), EnsembleError> {
    let v: Vec<f64> = ens.particles().iter().map(|p| p.vz).collect();
    rms_and_se(&v)
}

/// Draw the cloud at its release point, aimed at the beam center.
fn sample_at_release(
    cloud: &CloudSettings,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    geometry: LensGeometry,
    count: usize,
    seed: u64,
) -> Result<Ensemble, UnitsError> {
    let (center, velocity) = match geometry {
        LensGeometry::Uniform {
            object_distance,
            axial_speed,
        } => (
            [0.0, beam.center_y(), beam.center_z() - object_distance],
            [0.0, 0.0, axial_speed],
        ),
        LensGeometry::Gravity { drop_height } => (
            [0.0, beam.center_y(), beam.center_z() - drop_height],
            [0.0, 0.0, 0.0],
        ),
    };
    let spec = CloudSpec::new(
        cloud.temperature,
        cloud.initial_radius,
        center,
        velocity,
        count,
    )?;
    Ok(sample_cloud(&spec, species, seed))
}

struct TransitOutcome {
    ens: Ensemble,
    trapped: usize,
    timed_out: usize,
}

/// Sample, approach and cross the beam with the configured fidelity. The
/// returned ensemble is the post-beam cloud: kicked at the common arrival
/// time for the kick map, or at each particle's own exit time when traced.
fn transit(
    cloud: &CloudSettings,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    geometry: LensGeometry,
    mc_mode: McMode,
    count: usize,
    seed: u64,
    overrides: &IntegratorOverrides,
) -> Result<TransitOutcome, RunError> {
    let gravity = uses_gravity(geometry);
    let released = sample_at_release(cloud, beam, species, geometry, count, seed)?;
    match mc_mode {
        McMode::Off => unreachable!("callers only run transits when Monte Carlo is on"),
        McMode::Kickmap => {
            let at_beam = free_expand(&released, approach_time(geometry), gravity);
            let kicked = evolve_kickmap(&at_beam, beam, species, geometry);
            Ok(TransitOutcome {
                ens: kicked,
                trapped: 0,
                timed_out: 0,
            })
        }
        McMode::Traced => {
            let params = build_params(species, beam, beam_speed(geometry), overrides)?;
            // Ballistic flight is exact, so integrate only from 8 waists out.
            let entry = 8.0 * beam.waist();
            let t_pre = match geometry {
                LensGeometry::Uniform {
                    object_distance,
                    axial_speed,
                } if object_distance > entry => (object_distance - entry) / axial_speed,
                LensGeometry::Gravity { drop_height } if drop_height > entry => {
                    (2.0 * (drop_height - entry) / G_ACCEL).sqrt()
                }
                _ => 0.0,
            };
            let staged = free_expand(&released, t_pre, gravity);
            let (ens, summary) = evolve_traced(&staged, beam, species, gravity, &params);
            Ok(TransitOutcome {
                ens,
                trapped: summary.trapped,
                timed_out: summary.timed_out,
            })
        }
    }
}

/// Histogram the cloud's transverse positions about their mean and fit the
/// two-Gaussian model.
fn profile_and_fit(
    ens: &Ensemble,
    imaging: &Imaging,
) -> Result<(u64, BiGaussianFit), RunError> {
    let center = mean_position(ens, Axis::Y);
    let profile = density_profile(
        ens,
        Axis::Y,
        imaging.bins,
        (center - imaging.half_range, center + imaging.half_range),
    )?;
    let fit = fit_bigaussian(&profile)?;
    Ok((profile.out_of_range, fit))
}

/// Run a scenario, writing its CSV to `out`.
pub fn run(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    match config.kind {
        ScenarioKind::UniformScan => run_uniform_scan(config, out),
        ScenarioKind::RabiScan => run_rabi_scan(config, out),
        ScenarioKind::DropSnapshot => run_drop_snapshot(config, out),
        ScenarioKind::DropFwhmScan => run_drop_fwhm_scan(config, out),
        ScenarioKind::DropTemperatureScan => run_drop_temperature_scan(config, out),
        ScenarioKind::LensLawCheck => run_lens_law_check(config, out),
        ScenarioKind::GravityLensLawCheck => run_gravity_lens_law_check(config, out),
    }
}

fn run_uniform_scan(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let cloud = config.cloud.expect("validated");
    let uniform = config.uniform.expect("validated");
    let sweep = config.sweep.expect("validated");
    writeln!(
        out,
        "object_distance_m,lo_over_f,vy_rms_analytic_m_s,vz_rms_analytic_m_s,\
         vy_rms_mc_m_s,vy_rms_mc_se_m_s,vz_rms_mc_m_s,vz_rms_mc_se_m_s"
    )?;
    let mut best: Option<(f64, f64)> = None;
    let mut focal_length = f64::INFINITY;
    let mut trapped = 0;
    let mut timed_out = 0;
    for l_o in sweep.values() {
        let geometry = LensGeometry::Uniform {
            object_distance: l_o,
            axial_speed: uniform.axial_speed,
        };
        let pred = CollimationInput {
            species: config.species,
            beam: config.beam,
            temperature: cloud.temperature,
            geometry,
        }
        .predict()?;
        focal_length = pred.focal_length;
        let (vy_mc, vy_se, vz_mc, vz_se) = if config.mc_mode == McMode::Off {
            (None, None, None, None)
        } else {
            let outcome = transit(
                &cloud,
                &config.beam,
                &config.species,
                geometry,
                config.mc_mode,
                config.particles,
                config.seed,
                &config.integrator,
            )?;
            trapped += outcome.trapped;
            timed_out += outcome.timed_out;
            let (vy, vy_se) = vy_stats(&outcome.ens)?;
            let (vz, vz_se) = vz_stats(&outcome.ens)?;
            (Some(vy), Some(vy_se), Some(vz), Some(vz_se))
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(l_o),
            num(pred.lo_over_f),
            num(pred.vy_rms),
            num(pred.vz_rms),
            opt_num(vy_mc),
            opt_num(vy_se),
            opt_num(vz_mc),
            opt_num(vz_se)
        )?;
        summary.rows += 1;
        if best.map_or(true, |(v, _)| pred.vy_rms < v) {
            best = Some((pred.vy_rms, l_o));
        }
    }
    summary.note("focal_length_m", format!("{focal_length:.6e}"));
    if let Some((vy, l_o)) = best {
        summary.note("min_vy_rms_analytic_m_s", format!("{vy:.6e}"));
        summary.note("min_at_object_distance_m", format!("{l_o:.6e}"));
    }
    if config.mc_mode == McMode::Traced {
        summary.note("trapped", trapped.to_string());
        summary.note("timed_out", timed_out.to_string());
    }
    Ok(summary)
}

fn run_rabi_scan(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let cloud = config.cloud.expect("validated");
    let sweep = config.sweep.expect("validated");
    let BeamDrive::Rabi { detuning, .. } = config.drive else {
        unreachable!("validation requires a rabi drive for this scenario");
    };
    let geometry = match (config.uniform, config.gravity) {
        (Some(u), None) => LensGeometry::Uniform {
            // A rabi scan holds the geometry fixed, so the distance is
            // mandatory here even though the section leaves it optional.
            object_distance: u
                .object_distance
                .unwrap_or_else(|| 2.0 * config.beam.waist() * 100.0),
            axial_speed: u.axial_speed,
        },
        (None, Some(g)) => LensGeometry::Gravity {
            drop_height: g.drop_height,
        },
        _ => unreachable!("validation requires exactly one geometry"),
    };
    let sigma_v = rms_thermal_velocity(&config.species, cloud.temperature)?;
    writeln!(
        out,
        "rabi_rad_s,depth_j,focal_length_m,lo_over_f,vy_rms_analytic_m_s,vy_ratio_analytic,\
         vy_rms_mc_m_s,vy_rms_mc_se_m_s"
    )?;
    let mut best: Option<(f64, f64)> = None;
    for rabi in sweep.values() {
        let depth = depth_from_rabi(&config.species, rabi, detuning)?;
        let beam = GaussianBeam::new(
            depth,
            config.beam.waist(),
            config.beam.center_y(),
            config.beam.center_z(),
        )?;
        let pred = CollimationInput {
            species: config.species,
            beam,
            temperature: cloud.temperature,
            geometry,
        }
        .predict()?;
        let ratio = pred.vy_rms / sigma_v;
        let (vy_mc, vy_se) = if config.mc_mode == McMode::Off {
            (None, None)
        } else {
            let outcome = transit(
                &cloud,
                &beam,
                &config.species,
                geometry,
                config.mc_mode,
                config.particles,
                config.seed,
                &config.integrator,
            )?;
            let (vy, se) = vy_stats(&outcome.ens)?;
            (Some(vy), Some(se))
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(rabi),
            num(depth),
            num(pred.focal_length),
            num(pred.lo_over_f),
            num(pred.vy_rms),
            num(ratio),
            opt_num(vy_mc),
            opt_num(vy_se)
        )?;
        summary.rows += 1;
        if best.map_or(true, |(r, _)| ratio < r) {
            best = Some((ratio, rabi));
        }
    }
    if let Some((ratio, rabi)) = best {
        summary.note("min_vy_ratio_analytic", format!("{ratio:.6e}"));
        summary.note("min_at_rabi_rad_s", format!("{rabi:.6e}"));
    }
    Ok(summary)
}

fn run_drop_snapshot(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let cloud = config.cloud.expect("validated");
    let gravity = config.gravity.expect("validated");
    let imaging = config.imaging.expect("validated");
    let t_f = imaging.flight_time.expect("validated");
    let geometry = LensGeometry::Gravity {
        drop_height: gravity.drop_height,
    };
    let t_o = approach_time(geometry);
    let outcome = transit(
        &cloud,
        &config.beam,
        &config.species,
        geometry,
        config.mc_mode,
        config.particles,
        config.seed,
        &config.integrator,
    )?;
    let snap = advance_to(&outcome.ens, t_o + t_f, true);
    let (out_of_range, fit) = profile_and_fit(&snap, &imaging)?;
    // Re-profile for the rows themselves (cheap next to the transit).
    let center = mean_position(&snap, Axis::Y);
    let profile = density_profile(
        &snap,
        Axis::Y,
        imaging.bins,
        (center - imaging.half_range, center + imaging.half_range),
    )?;
    writeln!(out, "bin_center_m,count,fit_total,fit_narrow,fit_wide")?;
    let gauss = |a: f64, s: f64, x: f64| {
        let d = x - fit.center;
        a * (-d * d / (2.0 * s * s)).exp()
    };
    for (x, &c) in profile.bin_centers().iter().zip(&profile.counts) {
        let narrow = gauss(fit.amp_narrow, fit.sigma_narrow, *x);
        let wide = gauss(fit.amp_wide, fit.sigma_wide, *x);
        writeln!(
            out,
            "{},{},{},{},{}",
            num(*x),
            c,
            num(narrow + wide),
            num(narrow),
            num(wide)
        )?;
        summary.rows += 1;
    }
    summary.note("sigma_narrow_m", format!("{:.6e}", fit.sigma_narrow));
    summary.note("sigma_wide_m", format!("{:.6e}", fit.sigma_wide));
    summary.note("fit_converged", fit.converged.to_string());
    summary.note("fit_residual_norm", format!("{:.3e}", fit.residual_norm));
    summary.note("out_of_range", out_of_range.to_string());
    match thinlens::gravity_lens(&config.species, &config.beam, gravity.drop_height) {
        Ok(sol) => {
            summary.note("t_i_s", format!("{:.6e}", sol.t_i));
            match decompose_velocities(&fit, t_o, sol.t_i, t_f, snap.len()) {
                Ok(dec) => {
                    summary.note("v_f_rms_m_s", format!("{:.6e}", dec.v_f_rms));
                    summary.note("v_unf_rms_m_s", format!("{:.6e}", dec.v_unf_rms));
                    summary.note(
                        "focused_fraction",
                        format!("{:.4}", dec.n_f / (dec.n_f + dec.n_unf)),
                    );
                    summary.note("v_total_rms_m_s", format!("{:.6e}", dec.v_total_rms));
                }
                Err(e) => summary.note("velocity_decomposition", format!("failed: {e}")),
            }
        }
        Err(e) => summary.note("velocity_decomposition", format!("no image: {e}")),
    }
    if config.mc_mode == McMode::Traced {
        summary.note("trapped", outcome.trapped.to_string());
        summary.note("timed_out", outcome.timed_out.to_string());
    }
    Ok(summary)
}

fn run_drop_fwhm_scan(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let cloud = config.cloud.expect("validated");
    let gravity = config.gravity.expect("validated");
    let imaging = config.imaging.expect("validated");
    let sweep = config.sweep.expect("validated");
    let geometry = LensGeometry::Gravity {
        drop_height: gravity.drop_height,
    };
    let t_o = approach_time(geometry);
    let sigma_v = rms_thermal_velocity(&config.species, cloud.temperature)?;
    let sol = thinlens::gravity_lens(&config.species, &config.beam, gravity.drop_height)?;
    // One transit; only the post-beam flight differs between rows.
    let outcome = transit(
        &cloud,
        &config.beam,
        &config.species,
        geometry,
        config.mc_mode,
        config.particles,
        config.seed,
        &config.integrator,
    )?;
    writeln!(
        out,
        "flight_time_s,fwhm_ideal_m,fwhm_narrow_m,sigma_narrow_m,sigma_wide_m,rms_width_m"
    )?;
    let mut best: Option<(f64, f64)> = None;
    for t_f in sweep.values() {
        let snap = advance_to(&outcome.ens, t_o + t_f, true);
        let (_, fit) = profile_and_fit(&snap, &imaging)?;
        let fwhm_ideal = fwhm_from_sigma(imaging_width_rms(t_o, sol.t_i, sigma_v, t_f));
        let fwhm_narrow = fwhm_from_sigma(fit.sigma_narrow);
        let rms_width = rms_position(&snap, Axis::Y)?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(t_f),
            num(fwhm_ideal),
            num(fwhm_narrow),
            num(fit.sigma_narrow),
            num(fit.sigma_wide),
            num(rms_width)
        )?;
        summary.rows += 1;
        if best.map_or(true, |(f, _)| fwhm_narrow < f) {
            best = Some((fwhm_narrow, t_f));
        }
    }
    summary.note("t_i_s", format!("{:.6e}", sol.t_i));
    if let Some((fwhm, t_f)) = best {
        summary.note("min_fwhm_narrow_m", format!("{fwhm:.6e}"));
        summary.note("min_at_flight_time_s", format!("{t_f:.6e}"));
    }
    if config.mc_mode == McMode::Traced {
        summary.note("trapped", outcome.trapped.to_string());
        summary.note("timed_out", outcome.timed_out.to_string());
    }
    Ok(summary)
}

fn run_drop_temperature_scan(
    config: &ScenarioConfig,
    out: &mut dyn Write,
) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let cloud = config.cloud.expect("validated");
    let gravity = config.gravity.expect("validated");
    let sweep = config.sweep.expect("validated");
    let geometry = LensGeometry::Gravity {
        drop_height: gravity.drop_height,
    };
    writeln!(
        out,
        "temperature_k,beta,vy_rms_analytic_m_s,vy_ratio_analytic,delta_vg_m_s,\
         vy_rms_mc_m_s,vy_rms_mc_se_m_s"
    )?;
    let mut best: Option<(f64, f64)> = None;
    let mut trapped = 0;
    let mut timed_out = 0;
    for temperature in sweep.values() {
        let pred = CollimationInput {
            species: config.species,
            beam: config.beam,
            temperature,
            geometry,
        }
        .predict()?;
        let sigma_v = rms_thermal_velocity(&config.species, temperature)?;
        let ratio = pred.vy_rms / sigma_v;
        let (vy_mc, vy_se) = if config.mc_mode == McMode::Off {
            (None, None)
        } else {
            let cold = CloudSettings {
                temperature,
                initial_radius: cloud.initial_radius,
            };
            let outcome = transit(
                &cold,
                &config.beam,
                &config.species,
                geometry,
                config.mc_mode,
                config.particles,
                config.seed,
                &config.integrator,
            )?;
            trapped += outcome.trapped;
            timed_out += outcome.timed_out;
            let (vy, se) = vy_stats(&outcome.ens)?;
            (Some(vy), Some(se))
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(temperature),
            num(pred.alpha_or_beta),
            num(pred.vy_rms),
            num(ratio),
            num(pred.velocity_scale),
            opt_num(vy_mc),
            opt_num(vy_se)
        )?;
        summary.rows += 1;
        if best.map_or(true, |(r, _)| ratio < r) {
            best = Some((ratio, temperature));
        }
    }
    if let Some((ratio, t)) = best {
        summary.note("min_vy_ratio_analytic", format!("{ratio:.6e}"));
        summary.note("min_at_temperature_k", format!("{t:.6e}"));
    }
    if config.mc_mode == McMode::Traced {
        summary.note("trapped", trapped.to_string());
        summary.note("timed_out", timed_out.to_string());
    }
    Ok(summary)
}

fn run_lens_law_check(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let uniform = config.uniform.expect("validated");
    let v = uniform.axial_speed;
    let w = config.beam.waist();
    let cy = config.beam.center_y();
    let cz = config.beam.center_z();
    let energy = 0.5 * config.species.mass() * v * v;
    let f = thinlens::focal_length(energy, &config.beam)?;
    let object_distances = match &config.sweep {
        Some(s) => s.values(),
        None => vec![uniform.object_distance.expect("validated")],
    };
    writeln!(
        out,
        "object_distance_m,ray,launch_angle_rad,arrival_offset_m,z_cross_m,\
         image_distance_thin_m,lens_residual_rel"
    )?;
    let mut worst: Option<f64> = None;
    let mut residual_sum = 0.0;
    let mut residual_count = 0usize;
    for l_o in object_distances {
        let l_i_thin = match thinlens::image_distance(l_o, f) {
            Ok(x) => Some(x),
            Err(LensError::ImageAtInfinity) => None,
            Err(e) => return Err(e.into()),
        };
        // Follow the ray well past the expected image before declaring the
        // transit over, and give the clock room for the whole flight.
        let follow = l_i_thin.filter(|x| *x > 0.0).unwrap_or(4.0 * l_o.max(f));
        let mut params = build_params(&config.species, &config.beam, v, &config.integrator)?;
        if config.integrator.cutoff_radii.is_none() {
            params = params.with_cutoff((1.3 * follow / w).max(6.0))?;
        }
        let span = (l_o.min(8.0 * w) + 1.5 * follow) / v;
        if config.integrator.max_time.is_none() && params.max_time() < span {
            params = IntegratorParams::new(params.dt(), params.cutoff_radii(), 2.0 * span)?;
        }
        for k in 1..=config.rays.count {
            let offset = config.rays.max_offset_frac * w * k as f64 / config.rays.count as f64;
            let angle = offset / l_o;
            let entry = 8.0 * w;
            let start = if l_o > entry {
                PhaseSpacePoint::new(
                    0.0,
                    cy + angle * (l_o - entry),
                    cz - entry,
                    0.0,
                    angle * v,
                    v,
                    (l_o - entry) / v,
                )
            } else {
                PhaseSpacePoint::new(0.0, cy, cz - l_o, 0.0, angle * v, v, 0.0)
            };
            let traj = trace(start, &config.beam, &config.species, false, &params);
            let crossing = transverse_crossing(&traj, cy);
            let (z_cross, residual) = match crossing {
                Some(c) => {
                    let l_i_measured = c.z_cross - cz;
                    let r = ((1.0 / l_o + 1.0 / l_i_measured - 1.0 / f) * f).abs();
                    residual_sum += r;
                    residual_count += 1;
                    if worst.map_or(true, |x| r > x) {
                        worst = Some(r);
                    }
                    (Some(l_i_measured), Some(r))
                }
                None => (None, None),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                num(l_o),
                k,
                num(angle),
                num(offset),
                opt_num(z_cross),
                opt_num(l_i_thin),
                opt_num(residual)
            )?;
            summary.rows += 1;
        }
    }
    summary.note("focal_length_m", format!("{f:.6e}"));
    if let Some(worst) = worst {
        summary.note("max_lens_residual_rel", format!("{worst:.6e}"));
        summary.note(
            "mean_lens_residual_rel",
            format!("{:.6e}", residual_sum / residual_count as f64),
        );
    } else {
        summary.note("max_lens_residual_rel", "no crossings found".to_string());
    }
    Ok(summary)
}

fn run_gravity_lens_law_check(
    config: &ScenarioConfig,
    out: &mut dyn Write,
) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::new(config.kind);
    let w = config.beam.waist();
    let cy = config.beam.center_y();
    let cz = config.beam.center_z();
    let heights = match &config.sweep {
        Some(s) => s.values(),
        None => vec![config.gravity.expect("validated").drop_height],
    };
    writeln!(
        out,
        "drop_height_m,ray,launch_vy_m_s,focal_length_m,t_i_s,h_i_predicted_m,\
         h_i_measured_m,t_cross_s,rel_error"
    )?;
    let mut worst: Option<f64> = None;
    for h in heights {
        let t_o = (2.0 * h / G_ACCEL).sqrt();
        let (f_val, t_i, h_i_pred) =
            match thinlens::gravity_lens(&config.species, &config.beam, h) {
                Ok(sol) => (Some(sol.focal_length), Some(sol.t_i), Some(sol.h_i)),
                Err(LensError::NoRecrossing { .. }) | Err(LensError::ImageAtInfinity) => {
                    // Still worth tracing: the ray just never comes back.
                    (
                        Some(focal_length_at(&config.species, &config.beam, h)),
                        None,
                        None,
                    )
                }
                Err(e) => return Err(e.into()),
            };
        let follow = h_i_pred.unwrap_or(4.0 * h);
        let v_beam = (2.0 * G_ACCEL * h).sqrt();
        let mut params = build_params(&config.species, &config.beam, v_beam, &config.integrator)?;
        if config.integrator.cutoff_radii.is_none() {
            params = params.with_cutoff((1.3 * follow / w).max(6.0))?;
        }
        let span = 2.5 * (2.0 * (h + follow) / G_ACCEL).sqrt();
        if config.integrator.max_time.is_none() && params.max_time() < span {
            params = IntegratorParams::new(params.dt(), params.cutoff_radii(), span)?;
        }
        for k in 1..=config.rays.count {
            let vy0 = config.rays.max_offset_frac * w / t_o * k as f64 / config.rays.count as f64;
            let entry = 8.0 * w;
            let start = if h > entry {
                let t_pre = (2.0 * (h - entry) / G_ACCEL).sqrt();
                PhaseSpacePoint::new(
                    0.0,
                    cy + vy0 * t_pre,
                    cz - entry,
                    0.0,
                    vy0,
                    G_ACCEL * t_pre,
                    t_pre,
                )
            } else {
                PhaseSpacePoint::new(0.0, cy, cz - h, 0.0, vy0, 0.0, 0.0)
            };
            let traj = trace(start, &config.beam, &config.species, true, &params);
            let crossing = transverse_crossing(&traj, cy);
            let (h_i_meas, t_cross, rel) = match crossing {
                Some(c) => {
                    let meas = c.z_cross - cz;
                    let rel = h_i_pred.map(|p| (meas - p).abs() / p);
                    if let Some(r) = rel {
                        if worst.map_or(true, |x| r > x) {
                            worst = Some(r);
                        }
                    }
                    (Some(meas), Some(c.t_cross), rel)
                }
                None => (None, None, None),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                num(h),
                k,
                num(vy0),
                opt_num(f_val),
                opt_num(t_i),
                opt_num(h_i_pred),
                opt_num(h_i_meas),
                opt_num(t_cross),
                opt_num(rel)
            )?;
            summary.rows += 1;
        }
    }
    if let Some(worst) = worst {
        summary.note("max_rel_error", format!("{worst:.6e}"));
    }
    Ok(summary)
}

/// f = m g H w / (sqrt(pi) |U0|), valid whether or not the image exists.
fn focal_length_at(species: &AtomSpecies, beam: &GaussianBeam, drop_height: f64) -> f64 {
    species.mass() * G_ACCEL * drop_height * beam.waist()
        / (std::f64::consts::PI.sqrt() * beam.depth().abs())
}
