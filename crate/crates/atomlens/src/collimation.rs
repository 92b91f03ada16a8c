//! Closed-form velocity statistics of a thermal cloud after one lens
//! transit, in the kick-map picture: every atom flies straight to the beam,
//! receives the impulse kick for its arrival offset, and flies on.
//!
//! Averaging the kicked velocity over the release Maxwell-Boltzmann
//! distribution gives Gaussian moments of the form <v^2 exp(-a v^2)> and
//! <v^4 exp(-a v^2)>, which have elementary closed forms; everything here
//! reduces to powers of (1 + alpha) and (1 + 2 alpha).

use crate::units::{rms_thermal_velocity, AtomSpecies, GaussianBeam, G_ACCEL};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum CollimationError {
    #[error("temperature must be positive, got {0:e} K")]
    NonPositiveTemperature(f64),
    #[error("object distance must be positive, got {0:e} m")]
    NonPositiveObjectDistance(f64),
    #[error("axial speed must be positive, got {0:e} m/s")]
    NonPositiveAxialSpeed(f64),
    #[error("drop height must be positive, got {0:e} m")]
    NonPositiveDropHeight(f64),
}

/// How the cloud reaches the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LensGeometry {
    /// Launched horizontally: constant axial speed, object distance along
    /// the flight axis.
    Uniform { object_distance: f64, axial_speed: f64 },
    /// Released from rest and dropped onto the beam from `drop_height`.
    Gravity { drop_height: f64 },
}

/// One lens-transit prediction for a thermal cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollimationPrediction {
    /// RMS transverse velocity after the kick, m/s.
    pub vy_rms: f64,
    /// RMS axial velocity about its mean after the kick, m/s.
    pub vz_rms: f64,
    /// Squared ratio of cloud size at the beam to beam waist. This single
    /// number captures how much of the cloud samples the nonlinear wings.
    pub alpha_or_beta: f64,
    /// 1/e radius of the cloud when it reaches the beam, m.
    pub cloud_size_at_beam: f64,
    /// Transverse velocity that puts an atom one waist off axis at arrival,
    /// m/s. Kicks are linear only for release velocities well below this.
    pub velocity_scale: f64,
    /// Thin-lens focal length, m. Signed: negative for a repulsive beam
    /// (diverging lens), infinite for zero depth.
    pub focal_length: f64,
    /// Object distance over focal length, the lens strength ratio. Zero for
    /// zero depth, negative for a repulsive beam.
    pub lo_over_f: f64,
}

/// Transverse velocity after the kick for release velocity `v_y0`, lens
/// strength ratio `lo_over_f` and arrival velocity scale `velocity_scale`:
///
///   vy' = v_y0 (1 - (L_o/f) exp(-v_y0^2 / scale^2)).
///
/// The Gaussian factor is the kick falling off in the beam wings; the atoms
/// it matters for are exactly the ones a matched lens cannot collimate.
pub fn deflected_vy_gravity(v_y0: f64, lo_over_f: f64, velocity_scale: f64) -> f64 {
    let u = v_y0 / velocity_scale;
    v_y0 * (1.0 - lo_over_f * (-u * u).exp())
}

/// [`deflected_vy_gravity`] with the ratio spelled as object distance over
/// focal length. The kick map is identical for both geometries once the
/// effective distances are in.
pub fn deflected_vy_uniform(v_y0: f64, l_o: f64, f: f64, velocity_scale: f64) -> f64 {
    debug_assert!(l_o > 0.0 && f != 0.0 && velocity_scale > 0.0);
    deflected_vy_gravity(v_y0, l_o / f, velocity_scale)
}

/// Axial velocity change accompanying the transverse kick, to leading order
/// in the deflection:
///
///   dvz = (v_y0^2 / (2 v_z0)) * (L_o/f) * ((L_o/f) exp(-v_y0^2/scale^2) - 2).
pub fn delta_vz_single(v_y0: f64, v_z0: f64, l_o: f64, f: f64, velocity_scale: f64) -> f64 {
    debug_assert!(v_z0 > 0.0 && velocity_scale > 0.0);
    let r = l_o / f;
    let u = v_y0 / velocity_scale;
    v_y0 * v_y0 / (2.0 * v_z0) * r * (r * (-u * u).exp() - 2.0)
}

/// Thermal averages that both RMS outputs are built from, for one value of
/// the wing parameter alpha = (cloud size at beam / waist)^2.
struct KickMoments {
    /// <vy'^2> / sigma_v^2
    q_transverse: f64,
    /// <dvz> * 2 v_z / sigma_v^2
    dvz_mean_scaled: f64,
    /// <dvz^2> * 4 v_z^2 / sigma_v^4
    dvz_sq_scaled: f64,
}

fn kick_moments(r: f64, alpha: f64) -> KickMoments {
    let p1 = (1.0 + alpha).powf(-1.5);
    let p2 = (1.0 + 2.0 * alpha).powf(-1.5);
    let p1h = p1 / (1.0 + alpha);
    let p2h = p2 / (1.0 + 2.0 * alpha);
    KickMoments {
        q_transverse: (1.0 - 2.0 * r * p1 + r * r * p2).max(0.0),
        dvz_mean_scaled: r * (r * p1 - 2.0),
        dvz_sq_scaled: 3.0 * r * r * (r * r * p2h - 4.0 * r * p1h + 4.0),
    }
}

fn rms_pair(
    species: &AtomSpecies,
    temperature: f64,
    r: f64,
    alpha: f64,
    v_at_beam: f64,
) -> (f64, f64) {
    let sigma_v = rms_thermal_velocity(species, temperature).expect("validated");
    let m = kick_moments(r, alpha);
    let vy_rms = sigma_v * m.q_transverse.sqrt();
    let s2 = sigma_v * sigma_v;
    let mean = s2 / (2.0 * v_at_beam) * m.dvz_mean_scaled;
    let mean_sq = s2 * s2 / (4.0 * v_at_beam * v_at_beam) * m.dvz_sq_scaled;
    // The axial spread is the thermal one plus the kick's own variance; the
    // two are independent because the kick depends only on vy at release.
    let vz_rms = (s2 + (mean_sq - mean * mean).max(0.0)).sqrt();
    (vy_rms, vz_rms)
}

/// Signed focal length for axial kinetic energy `energy`; +inf for a beam
/// of zero depth, negative for a repulsive one.
fn signed_focal_length(energy: f64, beam: &GaussianBeam) -> f64 {
    if beam.depth() == 0.0 {
        f64::INFINITY
    } else {
        -energy * beam.waist() / (PI.sqrt() * beam.depth())
    }
}

/// Full prediction for a cloud launched at `axial_speed` from `object_distance`
/// before the beam.
pub fn transverse_rms_uniform(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    temperature: f64,
    object_distance: f64,
    axial_speed: f64,
) -> Result<CollimationPrediction, CollimationError> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(CollimationError::NonPositiveTemperature(temperature));
    }
    if !(object_distance > 0.0) || !object_distance.is_finite() {
        return Err(CollimationError::NonPositiveObjectDistance(object_distance));
    }
    if !(axial_speed > 0.0) || !axial_speed.is_finite() {
        return Err(CollimationError::NonPositiveAxialSpeed(axial_speed));
    }
    let sigma_v = rms_thermal_velocity(species, temperature).expect("validated");
    let energy = 0.5 * species.mass() * axial_speed * axial_speed;
    let focal_length = signed_focal_length(energy, beam);
    let r = if focal_length.is_infinite() {
        0.0
    } else {
        object_distance / focal_length
    };
    let velocity_scale = beam.waist() * axial_speed / object_distance;
    let cloud_size_at_beam = std::f64::consts::SQRT_2 * sigma_v * object_distance / axial_speed;
    let alpha = (cloud_size_at_beam / beam.waist()).powi(2);
    let (vy_rms, vz_rms) = rms_pair(species, temperature, r, alpha, axial_speed);
    Ok(CollimationPrediction {
        vy_rms,
        vz_rms,
        alpha_or_beta: alpha,
        cloud_size_at_beam,
        velocity_scale,
        focal_length,
        lo_over_f: r,
    })
}

/// Full prediction for a cloud released from rest `drop_height` above the
/// beam. Free fall doubles the effective object distance: the cloud expands
/// at its release spread for the whole fall but converges at the faster
/// beam-plane speed.
pub fn transverse_rms_gravity(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    temperature: f64,
    drop_height: f64,
) -> Result<CollimationPrediction, CollimationError> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(CollimationError::NonPositiveTemperature(temperature));
    }
    if !(drop_height > 0.0) || !drop_height.is_finite() {
        return Err(CollimationError::NonPositiveDropHeight(drop_height));
    }
    let sigma_v = rms_thermal_velocity(species, temperature).expect("validated");
    let t_o = (2.0 * drop_height / G_ACCEL).sqrt();
    let v_at_beam = G_ACCEL * t_o;
    let energy = 0.5 * species.mass() * v_at_beam * v_at_beam;
    let focal_length = signed_focal_length(energy, beam);
    let r = if focal_length.is_infinite() {
        0.0
    } else {
        2.0 * drop_height / focal_length
    };
    let velocity_scale = beam.waist() / t_o;
    let cloud_size_at_beam = std::f64::consts::SQRT_2 * sigma_v * t_o;
    let beta = (cloud_size_at_beam / beam.waist()).powi(2);
    let (vy_rms, vz_rms) = rms_pair(species, temperature, r, beta, v_at_beam);
    Ok(CollimationPrediction {
        vy_rms,
        vz_rms,
        alpha_or_beta: beta,
        cloud_size_at_beam,
        velocity_scale,
        focal_length,
        lo_over_f: r,
    })
}

/// Just the axial RMS of [`transverse_rms_uniform`].
pub fn vertical_rms_uniform(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    temperature: f64,
    object_distance: f64,
    axial_speed: f64,
) -> Result<f64, CollimationError> {
    transverse_rms_uniform(species, beam, temperature, object_distance, axial_speed)
        .map(|p| p.vz_rms)
}

/// Just the axial RMS of [`transverse_rms_gravity`].
pub fn vertical_rms_gravity(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    temperature: f64,
    drop_height: f64,
) -> Result<f64, CollimationError> {
    transverse_rms_gravity(species, beam, temperature, drop_height).map(|p| p.vz_rms)
}

/// A prediction request bundling the cloud, the beam and the approach
/// geometry.
#[derive(Debug, Clone, Copy)]
pub struct CollimationInput {
    pub species: AtomSpecies,
    pub beam: GaussianBeam,
    pub temperature: f64,
    pub geometry: LensGeometry,
}

impl CollimationInput {
    pub fn predict(&self) -> Result<CollimationPrediction, CollimationError> {
        match self.geometry {
            LensGeometry::Uniform {
                object_distance,
                axial_speed,
            } => transverse_rms_uniform(
                &self.species,
                &self.beam,
                self.temperature,
                object_distance,
                axial_speed,
            ),
            LensGeometry::Gravity { drop_height } => transverse_rms_gravity(
                &self.species,
                &self.beam,
                self.temperature,
                drop_height,
            ),
        }
    }

    pub fn vertical_rms(&self) -> Result<f64, CollimationError> {
        self.predict().map(|p| p.vz_rms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case() -> (AtomSpecies, GaussianBeam) {
        (
            AtomSpecies::rb87(),
            GaussianBeam::centered(-2e-28, 30e-6).unwrap(),
        )
    }

    #[test]
    fn zero_depth_leaves_the_cloud_untouched() {
        let rb = AtomSpecies::rb87();
        let flat = GaussianBeam::centered(0.0, 30e-6).unwrap();
        let p = transverse_rms_uniform(&rb, &flat, 0.2e-6, 3e-3, 0.3).unwrap();
        let sigma = rms_thermal_velocity(&rb, 0.2e-6).unwrap();
        assert_eq!(p.vy_rms, sigma);
        assert_eq!(p.vz_rms, sigma);
        assert_eq!(p.lo_over_f, 0.0);
        assert!(p.focal_length.is_infinite());
    }

    #[test]
    fn repulsive_beam_broadens() {
        let rb = AtomSpecies::rb87();
        let blue = GaussianBeam::centered(2e-28, 30e-6).unwrap();
        let p = transverse_rms_uniform(&rb, &blue, 0.2e-6, 3e-3, 0.3).unwrap();
        let sigma = rms_thermal_velocity(&rb, 0.2e-6).unwrap();
        assert!(p.vy_rms > sigma);
        assert!(p.lo_over_f < 0.0);
        assert!(p.focal_length < 0.0);
    }

    #[test]
    fn cold_paraxial_limit_is_the_linear_lens() {
        // At vanishing alpha the kick is linear and vy_rms = sigma |1 - R|.
        // alpha ~ 3e-6 at this temperature, so allow its O(alpha) residue.
        let (rb, beam) = case();
        let t = 1e-12;
        let f = 5.495_959_383_666_503e-4;
        for scale in [0.5, 1.0, 2.0] {
            let l_o = scale * f;
            let p = transverse_rms_uniform(&rb, &beam, t, l_o, 0.3).unwrap();
            let sigma = rms_thermal_velocity(&rb, t).unwrap();
            let expect = sigma * (1.0 - p.lo_over_f).abs();
            assert!((p.vy_rms - expect).abs() <= 5e-5 * sigma);
            assert!((p.lo_over_f - scale).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn minimum_sits_at_the_wing_corrected_ratio() {
        // At fixed alpha, d<vy'^2>/dR = 0 at R* = ((1+2a)/(1+a))^(3/2) with
        // residual spread 1 - (1+2a)^(3/2)/(1+a)^3: the wings keep perfect
        // collimation out of reach at any finite temperature.
        for alpha in [0.1, 0.5, 2.0] {
            let q = |r: f64| kick_moments(r, alpha).q_transverse;
            let r_star = ((1.0 + 2.0 * alpha) / (1.0 + alpha)).powf(1.5);
            let q_min = 1.0 - (1.0 + 2.0 * alpha).powf(1.5) / (1.0 + alpha).powi(3);
            assert!((q(r_star) - q_min).abs() < 1e-14);
            assert!(q_min > 0.0);
            assert!(q(r_star) < q(r_star * 1.05));
            assert!(q(r_star) < q(r_star * 0.95));
        }
    }

    #[test]
    fn kick_map_functions_agree_with_each_other() {
        let v = 3.1e-3;
        let got = deflected_vy_uniform(v, 2e-3, 1e-3, 5e-3);
        let want = deflected_vy_gravity(v, 2.0, 5e-3);
        assert_eq!(got, want);
        // Strong lens reverses a slow atom (overfocusing).
        assert!(deflected_vy_gravity(1e-4, 2.0, 1.0) < 0.0);
        // No kick at zero transverse velocity.
        assert_eq!(deflected_vy_gravity(0.0, 2.0, 1.0), 0.0);
        assert_eq!(delta_vz_single(0.0, 0.3, 2e-3, 1e-3, 5e-3), 0.0);
    }

    #[test]
    fn gravity_and_uniform_agree_when_matched() {
        // A gravity drop maps exactly onto the uniform problem with
        // L_o = 2H and the beam-plane speed: 2H / v_beam equals the fall
        // time, so the wing parameter and velocity scale carry over too.
        let (rb, beam) = case();
        let h = 2e-3;
        let g = transverse_rms_gravity(&rb, &beam, 0.3e-6, h).unwrap();
        let v_beam = (2.0 * G_ACCEL * h).sqrt();
        let u = transverse_rms_uniform(&rb, &beam, 0.3e-6, 2.0 * h, v_beam).unwrap();
        assert!((g.lo_over_f - u.lo_over_f).abs() < 1e-12 * u.lo_over_f);
        assert!((g.focal_length - u.focal_length).abs() < 1e-12 * u.focal_length);
        assert!((g.alpha_or_beta - u.alpha_or_beta).abs() < 1e-12 * u.alpha_or_beta);
        assert!((g.vy_rms - u.vy_rms).abs() < 1e-12 * u.vy_rms);
    }

    #[test]
    fn rejects_unphysical_inputs() {
        let (rb, beam) = case();
        assert!(matches!(
            transverse_rms_uniform(&rb, &beam, 0.0, 1e-3, 0.3),
            Err(CollimationError::NonPositiveTemperature(_))
        ));
        assert!(transverse_rms_uniform(&rb, &beam, 1e-6, 0.0, 0.3).is_err());
        assert!(transverse_rms_uniform(&rb, &beam, 1e-6, 1e-3, 0.0).is_err());
        assert!(matches!(
            transverse_rms_gravity(&rb, &beam, 1e-6, -1e-3),
            Err(CollimationError::NonPositiveDropHeight(_))
        ));
    }
}
