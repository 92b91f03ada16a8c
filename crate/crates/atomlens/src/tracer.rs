//! Exact single-particle trajectories through the beam by explicit
//! integration, the ground truth the impulse approximation is judged
//! against.
//!
//! Classic fixed-step fourth-order Runge-Kutta on the transverse plane
//! (y, z, vy, vz). Motion along the beam axis x is force-free and handled
//! exactly. Fixed stepping keeps runs reproducible bit for bit, which the
//! ensemble layer relies on; the default step is small enough that the
//! energy drift over a transit sits near the round-off floor.

use crate::potential::{force, potential_energy};
use crate::units::{AtomSpecies, GaussianBeam, PhaseSpacePoint, G_ACCEL};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TracerError {
    #[error("time step must be positive and finite, got {0:e} s")]
    NonPositiveTimeStep(f64),
    #[error("cutoff radius must be positive and finite, got {0:e} waists")]
    NonPositiveCutoff(f64),
    #[error("maximum integration time must be positive and finite, got {0:e} s")]
    NonPositiveMaxTime(f64),
    #[error("no velocity scale: both the axial speed and the beam depth are zero")]
    NoVelocityScale,
}

/// Fixed-step integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    dt: f64,
    cutoff_radii: f64,
    max_time: f64,
}

impl IntegratorParams {
    pub fn new(dt: f64, cutoff_radii: f64, max_time: f64) -> Result<Self, TracerError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(TracerError::NonPositiveTimeStep(dt));
        }
        if !(cutoff_radii > 0.0) || !cutoff_radii.is_finite() {
            return Err(TracerError::NonPositiveCutoff(cutoff_radii));
        }
        if !(max_time > 0.0) || !max_time.is_finite() {
            return Err(TracerError::NonPositiveMaxTime(max_time));
        }
        Ok(IntegratorParams {
            dt,
            cutoff_radii,
            max_time,
        })
    }

    /// Steps sized to the faster of the axial approach and the speed an atom
    /// picks up falling to the bottom of the well: 200 steps per waist
    /// crossing, transit declared over 6 waists out, and a generous overall
    /// time cap so only genuinely stuck atoms hit it.
    pub fn default_for(
        species: &AtomSpecies,
        beam: &GaussianBeam,
        v_z0: f64,
    ) -> Result<Self, TracerError> {
        let v_well = (2.0 * beam.depth().abs() / species.mass()).sqrt();
        let v_ref = v_z0.abs().max(v_well);
        if !(v_ref > 0.0) || !v_ref.is_finite() {
            return Err(TracerError::NoVelocityScale);
        }
        IntegratorParams::new(
            beam.waist() / (200.0 * v_ref),
            6.0,
            1000.0 * beam.waist() / v_ref,
        )
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cutoff_radii(&self) -> f64 {
        self.cutoff_radii
    }

    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    /// A copy with the time step scaled by `factor` (for convergence checks).
    pub fn with_dt_scale(&self, factor: f64) -> Result<Self, TracerError> {
        IntegratorParams::new(self.dt * factor, self.cutoff_radii, self.max_time)
    }

    /// A copy with a different transit cutoff (to follow a ray past the
    /// focus instead of stopping at the edge of the beam).
    pub fn with_cutoff(&self, cutoff_radii: f64) -> Result<Self, TracerError> {
        IntegratorParams::new(self.dt, cutoff_radii, self.max_time)
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    /// Left the cutoff radius moving away from the beam: the transit is over.
    TransitComplete,
    /// Ran out the time cap.
    MaxTime,
    /// Ran out the time cap while bound in the well (negative total energy,
    /// no gravity to ever pull it out).
    Trapped,
}

/// A recorded trajectory: the start state plus one point per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<PhaseSpacePoint>,
    pub terminal_reason: TerminalReason,
}

impl Trajectory {
    pub fn final_point(&self) -> PhaseSpacePoint {
        *self.points.last().expect("a trajectory records its start")
    }

    /// Plain CSV, one row per recorded point, full float precision.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,x,y,z,vx,vy,vz")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.t, p.x, p.y, p.z, p.vx, p.vy, p.vz
            )?;
        }
        Ok(())
    }
}

/// Transverse state advanced one RK4 step of size dt.
fn rk4_step(
    beam: &GaussianBeam,
    inv_mass: f64,
    g: f64,
    s: [f64; 4],
    dt: f64,
) -> [f64; 4] {
    let deriv = |s: [f64; 4]| -> [f64; 4] {
        let (fy, fz) = force(beam, s[0], s[1]);
        [s[2], s[3], fy * inv_mass, fz * inv_mass + g]
    };
    let add = |a: [f64; 4], b: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    let k1 = deriv(s);
    let k2 = deriv(add(s, k1, 0.5 * dt));
    let k3 = deriv(add(s, k2, 0.5 * dt));
    let k4 = deriv(add(s, k3, dt));
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn integrate(
    start: PhaseSpacePoint,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    gravity: bool,
    params: &IntegratorParams,
    mut record: impl FnMut(PhaseSpacePoint),
) -> (PhaseSpacePoint, TerminalReason) {
    assert!(start.is_finite(), "trace requires a finite start state");
    let dt = params.dt;
    let g = if gravity { G_ACCEL } else { 0.0 };
    let inv_mass = 1.0 / species.mass();
    let cutoff_sq = (params.cutoff_radii * beam.waist()).powi(2);
    let n_max = (params.max_time / dt).ceil() as u64;

    record(start);
    let mut s = [start.y, start.z, start.vy, start.vz];
    let mut current = start;
    for i in 1..=n_max {
        s = rk4_step(beam, inv_mass, g, s, dt);
        // x and t never feed back into the force, so they are reconstructed
        // exactly instead of integrated.
        let elapsed = i as f64 * dt;
        current = PhaseSpacePoint {
            x: start.x + start.vx * elapsed,
            y: s[0],
            z: s[1],
            vx: start.vx,
            vy: s[2],
            vz: s[3],
            t: start.t + elapsed,
        };
        record(current);
        let dy = s[0] - beam.center_y();
        let dz = s[1] - beam.center_z();
        if dy * dy + dz * dz > cutoff_sq && dy * s[2] + dz * s[3] > 0.0 {
            return (current, TerminalReason::TransitComplete);
        }
    }
    let kinetic = 0.5 * species.mass() * (current.vy * current.vy + current.vz * current.vz);
    let reason = if !gravity && kinetic + potential_energy(beam, current.y, current.z) < 0.0 {
        TerminalReason::Trapped
    } else {
        TerminalReason::MaxTime
    };
    (current, reason)
}

/// Integrate a particle through the beam, recording every step.
pub fn trace(
    start: PhaseSpacePoint,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    gravity: bool,
    params: &IntegratorParams,
) -> Trajectory {
    let mut points = Vec::with_capacity(1024);
    let (_, terminal_reason) = integrate(start, beam, species, gravity, params, |p| {
        points.push(p)
    });
    Trajectory {
        points,
        terminal_reason,
    }
}

/// [`trace`] without storing the path; what the Monte Carlo layer runs per
/// particle.
pub fn trace_final(
    start: PhaseSpacePoint,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    gravity: bool,
    params: &IntegratorParams,
) -> (PhaseSpacePoint, TerminalReason) {
    integrate(start, beam, species, gravity, params, |_| {})
}

/// Where a trajectory crossed the transverse plane y = `axis_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisCrossing {
    /// Axial position of the crossing, m.
    pub z_cross: f64,
    /// Time of the crossing, s.
    pub t_cross: f64,
}

/// First strict sign change of y - `axis_y` along the trajectory, located by
/// linear interpolation between the bracketing recorded points. `None` when
/// the trajectory never crosses (it stayed on one side, or started and
/// stayed on the plane itself).
pub fn transverse_crossing(traj: &Trajectory, axis_y: f64) -> Option<AxisCrossing> {
    traj.points.windows(2).find_map(|w| {
        let d0 = w[0].y - axis_y;
        let d1 = w[1].y - axis_y;
        if d0 * d1 < 0.0 {
            let s = d0 / (d0 - d1);
            Some(AxisCrossing {
                z_cross: w[0].z + s * (w[1].z - w[0].z),
                t_cross: w[0].t + s * (w[1].t - w[0].t),
            })
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (AtomSpecies, GaussianBeam, IntegratorParams) {
        let rb = AtomSpecies::rb87();
        let beam = GaussianBeam::centered(-2e-28, 30e-6).unwrap();
        let params = IntegratorParams::default_for(&rb, &beam, 0.3).unwrap();
        (rb, beam, params)
    }

    fn launch(y: f64, z: f64, vz: f64) -> PhaseSpacePoint {
        PhaseSpacePoint::new(0.0, y, z, 0.0, 0.0, vz, 0.0)
    }

    #[test]
    fn params_validation() {
        assert!(IntegratorParams::new(0.0, 6.0, 1.0).is_err());
        assert!(IntegratorParams::new(1e-7, -1.0, 1.0).is_err());
        assert!(IntegratorParams::new(1e-7, 6.0, f64::INFINITY).is_err());
        let rb = AtomSpecies::rb87();
        let flat = GaussianBeam::centered(0.0, 30e-6).unwrap();
        assert!(matches!(
            IntegratorParams::default_for(&rb, &flat, 0.0),
            Err(TracerError::NoVelocityScale)
        ));
        // A deep beam supplies a velocity scale even for a dropped cloud.
        let beam = GaussianBeam::centered(-2e-28, 30e-6).unwrap();
        assert!(IntegratorParams::default_for(&rb, &beam, 0.0).is_ok());
    }

    #[test]
    fn on_axis_atom_flies_straight_through() {
        let (rb, beam, params) = setup();
        let traj = trace(launch(0.0, -8.0 * 30e-6, 0.3), &beam, &rb, false, &params);
        assert_eq!(traj.terminal_reason, TerminalReason::TransitComplete);
        let end = traj.final_point();
        assert_eq!(end.y, 0.0);
        assert_eq!(end.vy, 0.0);
        // The axial well accelerates then decelerates symmetrically.
        assert!((end.vz - 0.3).abs() < 1e-12);
        assert!(end.z > 6.0 * 30e-6);
    }

    #[test]
    fn x_and_t_are_reconstructed_exactly() {
        let (rb, beam, params) = setup();
        let mut start = launch(3e-6, -8.0 * 30e-6, 0.3);
        start.vx = 0.05;
        let traj = trace(start, &beam, &rb, false, &params);
        for (i, p) in traj.points.iter().enumerate() {
            let elapsed = i as f64 * params.dt();
            assert_eq!(p.t, elapsed);
            assert_eq!(p.x, 0.05 * elapsed);
            assert_eq!(p.vx, 0.05);
        }
    }

    #[test]
    fn zero_depth_reduces_to_free_flight() {
        let rb = AtomSpecies::rb87();
        let flat = GaussianBeam::centered(0.0, 30e-6).unwrap();
        let params = IntegratorParams::default_for(&rb, &flat, 0.3).unwrap();
        let start = PhaseSpacePoint::new(0.0, 2e-6, -2e-4, 0.0, 1e-3, 0.3, 0.0);
        let (end, reason) = trace_final(start, &flat, &rb, false, &params);
        assert_eq!(reason, TerminalReason::TransitComplete);
        let dt_total = end.t;
        let y_expect = 2e-6 + 1e-3 * dt_total;
        let z_expect = -2e-4 + 0.3 * dt_total;
        assert!((end.y - y_expect).abs() < 1e-12 * y_expect.abs());
        assert!((end.z - z_expect).abs() < 1e-12 * z_expect.abs());
        assert_eq!(end.vy, 1e-3);
        assert_eq!(end.vz, 0.3);
    }

    #[test]
    fn mirror_symmetry_in_the_transverse_offset() {
        let (rb, beam, params) = setup();
        let up = trace(launch(4e-6, -8.0 * 30e-6, 0.3), &beam, &rb, false, &params);
        let down = trace(launch(-4e-6, -8.0 * 30e-6, 0.3), &beam, &rb, false, &params);
        assert_eq!(up.points.len(), down.points.len());
        let a = up.final_point();
        let b = down.final_point();
        assert_eq!(a.y, -b.y);
        assert_eq!(a.vy, -b.vy);
        assert_eq!(a.z, b.z);
        assert_eq!(a.vz, b.vz);
    }

    #[test]
    fn energy_is_conserved_through_a_transit() {
        let (rb, beam, params) = setup();
        let start = launch(15e-6, -8.0 * 30e-6, 0.3);
        let energy = |p: &PhaseSpacePoint| {
            0.5 * rb.mass() * (p.vy * p.vy + p.vz * p.vz) + potential_energy(&beam, p.y, p.z)
        };
        let traj = trace(start, &beam, &rb, false, &params);
        let e0 = energy(&traj.points[0]);
        let drift = traj
            .points
            .iter()
            .map(|p| (energy(p) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift / e0.abs() < 1e-10, "relative drift {:.2e}", drift / e0.abs());
    }

    #[test]
    fn slow_atom_in_a_deep_well_reports_trapped() {
        let rb = AtomSpecies::rb87();
        let beam = GaussianBeam::centered(-2e-28, 30e-6).unwrap();
        // Give it far too little kinetic energy to climb out, and a short
        // time cap so the test does not grind through a long orbit.
        let well_speed = (2.0 * 2e-28 / rb.mass()).sqrt();
        let params = IntegratorParams::new(30e-6 / (200.0 * well_speed), 6.0, 2e-4).unwrap();
        let start = launch(5e-6, 0.0, 0.01 * well_speed);
        let (_, reason) = trace_final(start, &beam, &rb, false, &params);
        assert_eq!(reason, TerminalReason::Trapped);
        // The same cap with gravity on is plain timeout: gravity can always
        // eventually spill the atom out of the well.
        let (_, reason) = trace_final(start, &beam, &rb, true, &params);
        assert_eq!(reason, TerminalReason::MaxTime);
    }

    #[test]
    fn crossing_detection_interpolates() {
        // A synthetic two-point trajectory crossing y = 0 halfway.
        let mk = |y: f64, z: f64, t: f64| PhaseSpacePoint::new(0.0, y, z, 0.0, -1.0, 1.0, t);
        let traj = Trajectory {
            points: vec![mk(1e-6, 0.0, 0.0), mk(-1e-6, 2e-6, 1e-6)],
            terminal_reason: TerminalReason::TransitComplete,
        };
        let c = transverse_crossing(&traj, 0.0).unwrap();
        assert!((c.z_cross - 1e-6).abs() < 1e-20);
        assert!((c.t_cross - 0.5e-6).abs() < 1e-20);
        // No crossing when the path stays on one side.
        let flat = Trajectory {
            points: vec![mk(1e-6, 0.0, 0.0), mk(2e-6, 2e-6, 1e-6)],
            terminal_reason: TerminalReason::TransitComplete,
        };
        assert!(transverse_crossing(&flat, 0.0).is_none());
    }

    #[test]
    fn deflection_approaches_the_impulse_kick_for_fast_atoms() {
        // At 90x the well depth in kinetic energy the transit is fast and
        // the impulse approximation is good to a couple of percent.
        let rb = AtomSpecies::rb87();
        let beam = GaussianBeam::centered(-2e-28, 30e-6).unwrap();
        let v = 0.5;
        let params = IntegratorParams::default_for(&rb, &beam, v).unwrap();
        let h = 15e-6;
        let (end, _) = trace_final(launch(h, -8.0 * 30e-6, v), &beam, &rb, false, &params);
        let kick = crate::thinlens::impulse_delta_vy(&beam, &rb, h, v).unwrap();
        assert!(
            (end.vy - kick).abs() < 0.025 * kick.abs(),
            "traced {:.6e} impulse {:.6e}",
            end.vy,
            kick
        );
    }

    #[test]
    fn csv_round_trip_shape() {
        let (rb, beam, params) = setup();
        let short = params.with_dt_scale(1.0).unwrap();
        let traj = trace(launch(3e-6, -8.0 * 30e-6, 0.3), &beam, &rb, false, &short);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,z,vx,vy,vz"));
        assert_eq!(lines.count(), traj.points.len());
        assert!(text.ends_with('\n'));
    }
}
