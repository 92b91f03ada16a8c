//! The dipole potential of the beam and its exact gradient force.

use crate::units::GaussianBeam;

/// Potential energy of an atom at transverse position (y, z):
/// U = depth * exp(-r^2 / waist^2) with r the distance to the beam center.
///
/// The Gaussian underflows gracefully to zero far from the beam; no cutoff is
/// applied at this level.
pub fn potential_energy(beam: &GaussianBeam, y: f64, z: f64) -> f64 {
    let dy = y - beam.center_y();
    let dz = z - beam.center_z();
    let w2 = beam.waist() * beam.waist();
    beam.depth() * (-(dy * dy + dz * dz) / w2).exp()
}

/// Force (F_y, F_z) = -grad U on an atom at (y, z). F_x vanishes because the
/// beam is uniform along its propagation axis.
///
/// F_q = 2 (q - q_c) depth / waist^2 * exp(-r^2 / waist^2): for negative
/// depth the force points toward the beam center (attractive).
pub fn force(beam: &GaussianBeam, y: f64, z: f64) -> (f64, f64) {
    let dy = y - beam.center_y();
    let dz = z - beam.center_z();
    let w2 = beam.waist() * beam.waist();
    let common = 2.0 * beam.depth() / w2 * (-(dy * dy + dz * dz) / w2).exp();
    (common * dy, common * dz)
}
