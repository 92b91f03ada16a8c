use approx::assert_relative_eq;
use atomlens::potential::potential_energy;
use atomlens::thinlens::{focal_length, gravity_lens, impulse_delta_vy};
use atomlens::tracer::{trace, trace_final, transverse_crossing, IntegratorParams, TerminalReason};
use atomlens::units::{AtomSpecies, GaussianBeam, PhaseSpacePoint, G_ACCEL};

fn rb() -> AtomSpecies {
    AtomSpecies::rb87()
}

fn fig_beam() -> GaussianBeam {
    GaussianBeam::centered(-2e-28, 30e-6).unwrap()
}

#[test]
fn default_step_follows_the_transit_scale() {
    let rb = rb();
    let beam = fig_beam();
    // faster of the axial speed and the well escape speed sets the step
    let params = IntegratorParams::default_for(&rb, &beam, 0.3).unwrap();
    assert_relative_eq!(params.dt(), 30e-6 / (200.0 * 0.3), max_relative = 1e-12);
    let escape = (2.0 * 2e-28 / rb.mass()).sqrt();
    let slow = IntegratorParams::default_for(&rb, &beam, 0.01).unwrap();
    assert_relative_eq!(slow.dt(), 30e-6 / (200.0 * escape), max_relative = 1e-12);
}

#[test]
fn energy_is_conserved_with_gravity_on() {
    let rb = rb();
    let beam = GaussianBeam::centered(-2.77e-29, 35e-6).unwrap();
    // drop from 3.1 mm: by the beam the atom moves at a quarter m/s
    let h = 3.1e-3;
    let v_beam = (2.0 * G_ACCEL * h).sqrt();
    let dt = beam.waist() / (100.0 * v_beam);
    let params = IntegratorParams::new(dt, 6.0, 0.1).unwrap();
    let start = PhaseSpacePoint::new(0.0, 6e-6, -(8.0 * beam.waist()), 0.0, 1e-3, 0.0, 0.0);
    // pre-fall to the trace window is part of the trace here, so the energy
    // budget includes the full fall; +z is the fall direction, so the
    // conserved sum is kinetic + dipole - m g z
    let grav_start = PhaseSpacePoint::new(
        0.0,
        start.y,
        start.z,
        0.0,
        start.vy,
        (2.0 * G_ACCEL * (h - 8.0 * beam.waist())).sqrt(),
        0.0,
    );
    let traj = trace(grav_start, &beam, &rb, true, &params);
    assert_eq!(traj.terminal_reason, TerminalReason::TransitComplete);
    let energy = |p: &PhaseSpacePoint| {
        0.5 * rb.mass() * (p.vx * p.vx + p.vy * p.vy + p.vz * p.vz)
            + potential_energy(&beam, p.y, p.z)
            - rb.mass() * G_ACCEL * p.z
    };
    let e0 = energy(&traj.points[0]);
    let worst = traj
        .points
        .iter()
        .map(|p| ((energy(p) - e0) / e0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "relative energy drift {worst:.2e}");
}

#[test]
fn halving_the_step_barely_moves_the_exit_velocity() {
    let rb = rb();
    let beam = fig_beam();
    let params = IntegratorParams::default_for(&rb, &beam, 0.3).unwrap();
    let fine = params.with_dt_scale(0.5).unwrap();
    let start = PhaseSpacePoint::new(0.0, 12e-6, -8.0 * 30e-6, 0.0, 0.0, 0.3, 0.0);
    let (coarse_end, _) = trace_final(start, &beam, &rb, false, &params);
    let (fine_end, _) = trace_final(start, &beam, &rb, false, &fine);
    let rel = ((coarse_end.vy - fine_end.vy) / fine_end.vy).abs();
    assert!(rel < 1e-9, "step sensitivity {rel:.2e}");
}

// a traced paraxial ray through the two-focal-length conjugate. The impulse
// focal length is exact only for an instantaneous kick; at 0.3 m/s the
// kinetic energy is 32 well depths and the transit takes long enough that
// the measured image sits a frozen 6.8% beyond the thin-lens conjugate.
// At three times the speed (292 well depths) the image lands on it.
#[test]
fn traced_conjugate_versus_thin_lens() {
    let rb = rb();
    let beam = fig_beam();
    for (v, want_li_over_f, tol) in [(0.3, 2.135, 5e-3), (0.9, 2.0, 0.02)] {
        let energy = 0.5 * rb.mass() * v * v;
        let f = focal_length(energy, &beam).unwrap();
        let l_o = 2.0 * f;
        let theta = 0.02 * beam.waist() / l_o;
        let params = IntegratorParams::default_for(&rb, &beam, v)
            .unwrap()
            .with_cutoff(1.4 * 2.5 * f / beam.waist())
            .unwrap();
        let start = PhaseSpacePoint::new(0.0, 0.0, -l_o, 0.0, theta * v, v, 0.0);
        let traj = trace(start, &beam, &rb, false, &params);
        let crossing = transverse_crossing(&traj, 0.0).expect("ray must re-cross the axis");
        let li = crossing.z_cross;
        assert_relative_eq!(li / f, want_li_over_f, max_relative = tol);
    }
}

// how far the impulse formula drifts from the integrated kick as the atom
// slows down: frozen deficits at 30 well depths of kinetic energy
#[test]
fn impulse_error_at_thirty_well_depths() {
    let rb = rb();
    let beam = fig_beam();
    let v = (2.0 * 30.0 * 2e-28 / rb.mass()).sqrt();
    let params = IntegratorParams::default_for(&rb, &beam, v).unwrap();
    // positive means the traced kick is weaker in magnitude. Near the axis
    // the atom slides inward mid-transit where the force is weaker; launched
    // at the waist it slides toward the force maximum at w/sqrt(2) instead
    // and picks up slightly more than the frozen-path estimate.
    for (h_frac, want_rel) in [(0.1, 0.0334), (0.5, 0.0183), (1.0, -0.0042)] {
        let h = h_frac * beam.waist();
        let start = PhaseSpacePoint::new(0.0, h, -8.0 * 30e-6, 0.0, 0.0, v, 0.0);
        let (end, _) = trace_final(start, &beam, &rb, false, &params);
        let kick = impulse_delta_vy(&beam, &rb, h, v).unwrap();
        let rel = (end.vy - kick) / kick.abs();
        println!("h = {h_frac} w: traced {:.6e} impulse {kick:.6e} rel {rel:.4}", end.vy);
        assert!(
            (rel - want_rel).abs() < 2e-3,
            "frozen deficit moved: h = {h_frac} w, measured {rel:.4}, expected {want_rel}"
        );
    }
}

// drop a single slow atom through the beam and compare where it re-crosses
// the release axis with the analytic image height
#[test]
fn traced_drop_recrosses_near_the_predicted_image() {
    let rb = rb();
    let beam = GaussianBeam::centered(-2.77e-29, 35e-6).unwrap();
    let h = 3.1e-3;
    let sol = gravity_lens(&rb, &beam, h).unwrap();
    let t_pre = (2.0 * (h - 8.0 * beam.waist()) / G_ACCEL).sqrt();
    let vy0 = 0.02 * beam.waist() / sol.t_o;
    let start = PhaseSpacePoint::new(
        0.0,
        vy0 * t_pre,
        -(8.0 * beam.waist()),
        0.0,
        vy0,
        G_ACCEL * t_pre,
        t_pre,
    );
    let params = IntegratorParams::default_for(&rb, &beam, G_ACCEL * sol.t_o)
        .unwrap()
        .with_cutoff(1.3 * sol.h_i / beam.waist())
        .unwrap();
    let traj = trace(start, &beam, &rb, true, &params);
    let crossing = transverse_crossing(&traj, 0.0).expect("kicked atom re-crosses");
    // both the crossing z and the image height count down from the beam plane
    let rel = (crossing.z_cross - sol.h_i) / sol.h_i;
    println!("traced re-cross {:.6e} predicted {:.6e} rel {rel:.4}", crossing.z_cross, sol.h_i);
    assert!(rel.abs() < 0.03, "image-height error {rel:.4}");
}
