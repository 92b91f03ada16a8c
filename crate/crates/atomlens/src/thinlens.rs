//! The impulse-approximation lens: transverse kick, focal length, and
//! object-image relations for uniform motion and for free fall.

use crate::units::{AtomSpecies, GaussianBeam, G_ACCEL};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum LensError {
    #[error("axial speed must be positive, got {0:e} m/s")]
    NonPositiveAxialSpeed(f64),
    #[error("kinetic energy must be positive, got {0:e} J")]
    NonPositiveEnergy(f64),
    #[error("zero beam depth forms no lens")]
    NoLens,
    #[error("object distance must be positive, got {0:e} m")]
    NonPositiveObjectDistance(f64),
    #[error("focal length must be positive, got {0:e} m")]
    NonPositiveFocalLength(f64),
    #[error("object at the focal distance: output is collimated, image at infinity")]
    ImageAtInfinity,
    #[error("drop height must be positive, got {0:e} m")]
    NonPositiveDropHeight(f64),
    #[error(
        "lens too weak to refocus a dropped cloud: focal length {focal_length:e} m \
         exceeds twice the drop height {drop_height:e} m"
    )]
    NoRecrossing { focal_length: f64, drop_height: f64 },
}

/// Transverse velocity kick from one beam transit in the impulse
/// approximation: the transverse force integrated along the undeflected
/// straight path at offset `h` from the beam axis,
///
///   dvy = 2 sqrt(pi) h U0 exp(-h^2/w^2) / (m w v_z0).
///
/// The sign is kept: an attractive beam (U0 < 0) kicks atoms at h > 0 toward
/// the axis (negative result), which is what makes red detuning focus.
pub fn impulse_delta_vy(
    beam: &GaussianBeam,
    species: &AtomSpecies,
    h: f64,
    v_z0: f64,
) -> Result<f64, LensError> {
    if !(v_z0 > 0.0) {
        return Err(LensError::NonPositiveAxialSpeed(v_z0));
    }
    let w = beam.waist();
    Ok(2.0 * PI.sqrt() * h * beam.depth() * (-h * h / (w * w)).exp()
        / (species.mass() * w * v_z0))
}

/// Small-angle deflection |dvy| / v_z0 of a beam transit at offset `h`.
pub fn deflection_angle(
    beam: &GaussianBeam,
    species: &AtomSpecies,
    h: f64,
    v_z0: f64,
) -> Result<f64, LensError> {
    Ok(impulse_delta_vy(beam, species, h, v_z0)?.abs() / v_z0)
}

/// The kick and the angle it subtends, bundled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionResult {
    /// Signed transverse velocity change, m/s.
    pub delta_vy: f64,
    /// |delta_vy| / v_z0, rad.
    pub deflection_angle: f64,
}

pub fn deflection(
    beam: &GaussianBeam,
    species: &AtomSpecies,
    h: f64,
    v_z0: f64,
) -> Result<DeflectionResult, LensError> {
    let delta_vy = impulse_delta_vy(beam, species, h, v_z0)?;
    Ok(DeflectionResult {
        delta_vy,
        deflection_angle: delta_vy.abs() / v_z0,
    })
}

/// Focal length of the beam acting as a thin cylindrical lens on atoms of
/// axial kinetic energy `kinetic_energy`:
///
///   f = E0 w / (sqrt(pi) |U0|).
///
/// Paraxial atoms (h << w) all cross the axis there because the kick is
/// linear in h near the axis. A zero-depth beam forms no lens and is
/// reported as such rather than as an infinite number.
pub fn focal_length(kinetic_energy: f64, beam: &GaussianBeam) -> Result<f64, LensError> {
    if !(kinetic_energy > 0.0) {
        return Err(LensError::NonPositiveEnergy(kinetic_energy));
    }
    if beam.depth() == 0.0 {
        return Err(LensError::NoLens);
    }
    Ok(kinetic_energy * beam.waist() / (PI.sqrt() * beam.depth().abs()))
}

/// Signed image distance from the thin-lens equation 1/f = 1/L_o + 1/L_i.
///
/// A negative result is a virtual image (object inside the focal distance),
/// returned as data rather than an error so callers can plot the full
/// hyperbola. An object exactly at the focal distance collimates the output
/// and is reported as [`LensError::ImageAtInfinity`].
pub fn image_distance(l_o: f64, f: f64) -> Result<f64, LensError> {
    if !(l_o > 0.0) {
        return Err(LensError::NonPositiveObjectDistance(l_o));
    }
    if !(f > 0.0) {
        return Err(LensError::NonPositiveFocalLength(f));
    }
    if l_o == f {
        return Err(LensError::ImageAtInfinity);
    }
    Ok(1.0 / (1.0 / f - 1.0 / l_o))
}

/// A consistent (f, L_o, L_i) triple; the lens equation holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSolution {
    pub focal_length: f64,
    pub object_distance: f64,
    /// Signed; negative = virtual image.
    pub image_distance: f64,
}

pub fn solve_lens(f: f64, l_o: f64) -> Result<LensSolution, LensError> {
    Ok(LensSolution {
        focal_length: f,
        object_distance: l_o,
        image_distance: image_distance(l_o, f)?,
    })
}

/// Object-image solution for a cloud dropped from `drop_height` above the
/// beam and kicked impulsively at the beam plane.
///
/// Free fall makes the effective object distance 2H rather than H: the cloud
/// keeps expanding at its release velocity spread while the convergence
/// after the kick happens at the larger beam-plane speed, and the two effects
/// combine into the usual lens equation with L_og = 2H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityLensSolution {
    /// f = m g H w / (sqrt(pi) |U0|), m.
    pub focal_length: f64,
    /// Release height above the beam center, m.
    pub drop_height: f64,
    /// Fall time to the beam center, s.
    pub t_o: f64,
    /// Time from the beam to the axis re-crossing, s.
    pub t_i: f64,
    /// Falling distance from the beam to the re-crossing, m.
    pub h_i: f64,
    /// Effective object distance 2H, m.
    pub l_og: f64,
    /// Effective image distance, m.
    pub l_ig: f64,
}

pub fn gravity_lens(
    species: &AtomSpecies,
    beam: &GaussianBeam,
    drop_height: f64,
) -> Result<GravityLensSolution, LensError> {
    if !(drop_height > 0.0) {
        return Err(LensError::NonPositiveDropHeight(drop_height));
    }
    if beam.depth() == 0.0 {
        return Err(LensError::NoLens);
    }
    let h = drop_height;
    let f = species.mass() * G_ACCEL * h * beam.waist() / (PI.sqrt() * beam.depth().abs());
    if f == 2.0 * h {
        return Err(LensError::ImageAtInfinity);
    }
    if f > 2.0 * h {
        return Err(LensError::NoRecrossing {
            focal_length: f,
            drop_height: h,
        });
    }
    let t_o = (2.0 * h / G_ACCEL).sqrt();
    // The kicked paraxial ray reverses at rate (v_z0/f - 1/t_o) per unit
    // transverse offset; solving for the re-crossing gives t_i below, and the
    // corresponding fall distance follows from plain kinematics.
    let t_i = t_o * f / (2.0 * h - f);
    let l_ig = 2.0 * h * f / (2.0 * h - f);
    let h_i = l_ig * (1.0 + f / (4.0 * h - 2.0 * f));
    Ok(GravityLensSolution {
        focal_length: f,
        drop_height: h,
        t_o,
        t_i,
        h_i,
        l_og: 2.0 * h,
        l_ig,
    })
}

/// The ratio L_og / f = 2 sqrt(pi) |U0| / (m g w) of a dropped cloud.
///
/// Both the effective object distance and the focal length grow linearly
/// with the drop height, so their ratio, which controls the collimation
/// regime, is set by the beam alone.
pub fn gravity_strength_ratio(species: &AtomSpecies, beam: &GaussianBeam) -> f64 {
    2.0 * PI.sqrt() * beam.depth().abs() / (species.mass() * G_ACCEL * beam.waist())
}
