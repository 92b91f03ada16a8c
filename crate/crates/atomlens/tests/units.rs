use approx::assert_relative_eq;
use atomlens::units::{
    depth_from_rabi, rms_thermal_velocity, AtomSpecies, CloudSpec, GaussianBeam, UnitsError,
};
use proptest::prelude::*;

#[test]
fn thermal_velocity_matches_hand_values() {
    let rb = AtomSpecies::rb87();
    // sqrt(k_B T / m) for a few temperatures used throughout the figures
    assert_relative_eq!(
        rms_thermal_velocity(&rb, 2e-7).unwrap(),
        4.374206686764827e-3,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        rms_thermal_velocity(&rb, 6e-7).unwrap(),
        7.5763482242842016e-3,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        rms_thermal_velocity(&rb, 7.1e-8).unwrap(),
        2.606234423297535e-3,
        max_relative = 1e-12
    );
    assert_eq!(rms_thermal_velocity(&rb, 0.0).unwrap(), 0.0);
    assert!(rms_thermal_velocity(&rb, -1e-9).is_err());
}

#[test]
fn far_detuned_rabi_drive_gives_expected_depth() {
    let rb = AtomSpecies::rb87();
    // 30 MHz Rabi frequency, -50 GHz detuning: a few-zW trap depth, red therefore negative
    let rabi = 2.0 * std::f64::consts::PI * 30e6;
    let det = -2.0 * std::f64::consts::PI * 50e9;
    let depth = depth_from_rabi(&rb, rabi, det).unwrap();
    assert_relative_eq!(depth, -2.981731554699179e-30, max_relative = 1e-12);
    // blue detuning repels
    assert!(depth_from_rabi(&rb, rabi, -det).unwrap() > 0.0);
}

#[test]
fn resonant_drive_is_rejected() {
    let rb = AtomSpecies::rb87();
    match depth_from_rabi(&rb, 1e8, 0.0) {
        Err(UnitsError::ZeroDetuning) => {}
        other => panic!("expected resonant-drive rejection, got {other:?}"),
    }
}

#[test]
fn beam_and_cloud_constructors_accept_physical_inputs() {
    let beam = GaussianBeam::new(-2e-28, 30e-6, 1e-6, -2e-6).unwrap();
    assert_eq!(beam.depth(), -2e-28);
    assert_eq!(beam.waist(), 30e-6);
    assert_eq!(beam.center_y(), 1e-6);
    assert_eq!(beam.center_z(), -2e-6);
    let cloud = CloudSpec::new(2e-7, 1e-7, [0.0; 3], [0.0, 0.0, 0.3], 100).unwrap();
    assert_eq!(cloud.count(), 100);
    // zero-temperature point source is a legal degenerate cloud
    assert!(CloudSpec::new(0.0, 0.0, [0.0; 3], [0.0; 3], 1).is_ok());
}

proptest! {
    // doubling the temperature multiplies the thermal speed by sqrt(2)
    #[test]
    fn thermal_velocity_scales_as_sqrt_t(t in 1e-9f64..1e-3) {
        let rb = AtomSpecies::rb87();
        let a = rms_thermal_velocity(&rb, t).unwrap();
        let b = rms_thermal_velocity(&rb, 2.0 * t).unwrap();
        prop_assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    // the light shift is quadratic in the field amplitude and carries the detuning sign
    #[test]
    fn depth_is_even_in_rabi_and_odd_in_detuning(
        rabi in 1e6f64..1e10,
        det in 1e9f64..1e13,
    ) {
        let bare = AtomSpecies::new(1.443160648e-25, 0.0, 2.414191334e15).unwrap();
        let d = depth_from_rabi(&bare, rabi, det).unwrap();
        prop_assert!((depth_from_rabi(&bare, -rabi, det).unwrap() - d).abs() <= 1e-15 * d.abs());
        prop_assert!((depth_from_rabi(&bare, rabi, -det).unwrap() + d).abs() <= 1e-15 * d.abs());
    }

    #[test]
    fn ballistic_advance_is_exact(
        y in -1e-3f64..1e-3,
        vy in -1.0f64..1.0,
        dt in 0.0f64..1e-2,
    ) {
        use atomlens::units::PhaseSpacePoint;
        let p = PhaseSpacePoint::new(0.0, y, 0.0, 0.0, vy, 0.0, 0.0);
        let q = p.advanced(dt, 0.0);
        prop_assert_eq!(q.y, y + vy * dt);
        prop_assert_eq!(q.t, dt);
    }
}
