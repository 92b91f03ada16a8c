//! Base physical types shared by every module: constants, species, beam,
//! particle states and cloud specifications.

use thiserror::Error;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact by SI definition).
pub const K_B: f64 = 1.380_649e-23;
/// Standard gravitational acceleration, m/s^2 (exact conventional value).
pub const G_ACCEL: f64 = 9.806_65;

/// The fundamental constants bundled as a value, for code that wants to pass
/// them around explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Gravitational acceleration, m/s^2.
    pub g_accel: f64,
}

impl PhysicalConstants {
    /// The SI values used throughout the crate.
    pub const SI: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        k_b: K_B,
        g_accel: G_ACCEL,
    };
}

/// Validation failures for the base types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitsError {
    #[error("atomic mass must be positive, got {0:e} kg")]
    NonPositiveMass(f64),
    #[error("natural linewidth must be non-negative, got {0:e} rad/s")]
    NegativeLinewidth(f64),
    #[error("transition frequency must be positive, got {0:e} rad/s")]
    NonPositiveTransitionFrequency(f64),
    #[error("beam waist must be positive, got {0:e} m")]
    NonPositiveWaist(f64),
    #[error("beam depth must be finite, got {0} J")]
    NonFiniteDepth(f64),
    #[error("beam center must be finite")]
    NonFiniteBeamCenter,
    #[error("temperature must be non-negative, got {0:e} K")]
    NegativeTemperature(f64),
    #[error("on resonance (zero detuning) the far-detuned dipole potential is undefined")]
    ZeroDetuning,
    #[error("cloud radius must be non-negative, got {0:e} m")]
    NegativeCloudRadius(f64),
    #[error("cloud must contain at least one particle")]
    EmptyCloud,
    #[error("cloud center position and velocity must be finite")]
    NonFiniteCloudCenter,
}

/// An atomic species reduced to the three numbers the dipole lens needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies {
    mass: f64,
    linewidth: f64,
    transition_freq: f64,
}

impl AtomSpecies {
    /// A species from its mass (kg), natural linewidth (rad/s) and transition
    /// angular frequency (rad/s).
    pub fn new(mass: f64, linewidth: f64, transition_freq: f64) -> Result<Self, UnitsError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(UnitsError::NonPositiveMass(mass));
        }
        if !(linewidth >= 0.0) || !linewidth.is_finite() {
            return Err(UnitsError::NegativeLinewidth(linewidth));
        }
        if !(transition_freq > 0.0) || !transition_freq.is_finite() {
            return Err(UnitsError::NonPositiveTransitionFrequency(transition_freq));
        }
        Ok(AtomSpecies {
            mass,
            linewidth,
            transition_freq,
        })
    }

    /// Rubidium-87 on the D2 cycling transition (780 nm), the workhorse of
    /// cold-atom experiments.
    pub fn rb87() -> Self {
        AtomSpecies {
            mass: 1.443_160_648e-25,
            // 2 pi x 6.0666 MHz
            linewidth: 3.811_757_2e7,
            // 2 pi x 384.2304844685 THz
            transition_freq: 2.414_191_334e15,
        }
    }

    /// Atomic mass, kg.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Natural linewidth of the transition, rad/s.
    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    /// Transition angular frequency, rad/s.
    pub fn transition_freq(&self) -> f64 {
        self.transition_freq
    }
}

/// A far-detuned Gaussian beam reduced to the dipole potential it creates.
///
/// The beam propagates along x. Its Rayleigh length dwarfs the cloud, so the
/// potential depends only on the transverse coordinates (y, z):
/// U(y, z) = depth * exp(-((y - center_y)^2 + (z - center_z)^2) / waist^2).
/// `depth` is the potential at the beam center, signed: negative for red
/// detuning (attractive, focusing), positive for blue (repulsive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    depth: f64,
    waist: f64,
    center_y: f64,
    center_z: f64,
}

impl GaussianBeam {
    /// A beam from its center depth (J), 1/e^2-intensity waist (m) and center
    /// coordinates (m).
    pub fn new(depth: f64, waist: f64, center_y: f64, center_z: f64) -> Result<Self, UnitsError> {
        if !depth.is_finite() {
            return Err(UnitsError::NonFiniteDepth(depth));
        }
        if !(waist > 0.0) || !waist.is_finite() {
            return Err(UnitsError::NonPositiveWaist(waist));
        }
        if !center_y.is_finite() || !center_z.is_finite() {
            return Err(UnitsError::NonFiniteBeamCenter);
        }
        Ok(GaussianBeam {
            depth,
            waist,
            center_y,
            center_z,
        })
    }

    /// A beam centered at the coordinate origin.
    pub fn centered(depth: f64, waist: f64) -> Result<Self, UnitsError> {
        GaussianBeam::new(depth, waist, 0.0, 0.0)
    }

    /// Center potential, J (signed; negative = attractive).
    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Beam waist, m.
    pub fn waist(&self) -> f64 {
        self.waist
    }

    /// Transverse center coordinate along y, m.
    pub fn center_y(&self) -> f64 {
        self.center_y
    }

    /// Transverse center coordinate along z, m.
    pub fn center_z(&self) -> f64 {
        self.center_z
    }
}

/// A single particle state: position, velocity and the time it was recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub t: f64,
}

impl PhaseSpacePoint {
    /// A state at position (x, y, z), velocity (vx, vy, vz) and time t.
    pub fn new(x: f64, y: f64, z: f64, vx: f64, vy: f64, vz: f64, t: f64) -> Self {
        PhaseSpacePoint {
            x,
            y,
            z,
            vx,
            vy,
            vz,
            t,
        }
    }

    /// True when every coordinate is finite.
    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.vx.is_finite()
            && self.vy.is_finite()
            && self.vz.is_finite()
            && self.t.is_finite()
    }

    /// The state after ballistic flight over `dt`, with constant acceleration
    /// `g` along +z (pass 0.0 for force-free flight).
    pub fn advanced(&self, dt: f64, g: f64) -> Self {
        PhaseSpacePoint {
            x: self.x + self.vx * dt,
            y: self.y + self.vy * dt,
            z: self.z + self.vz * dt + 0.5 * g * dt * dt,
            vx: self.vx,
            vy: self.vy,
            vz: self.vz + g * dt,
            t: self.t + dt,
        }
    }
}

/// Statistical description of an initial cloud: an isotropic Gaussian ball in
/// position (per-axis standard deviation `initial_radius`) and a thermal
/// velocity distribution at `temperature`, centered on a drifting center.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSpec {
    temperature: f64,
    initial_radius: f64,
    center_position: [f64; 3],
    center_velocity: [f64; 3],
    count: usize,
}

impl CloudSpec {
    pub fn new(
        temperature: f64,
        initial_radius: f64,
        center_position: [f64; 3],
        center_velocity: [f64; 3],
        count: usize,
    ) -> Result<Self, UnitsError> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(UnitsError::NegativeTemperature(temperature));
        }
        if !(initial_radius >= 0.0) || !initial_radius.is_finite() {
            return Err(UnitsError::NegativeCloudRadius(initial_radius));
        }
        if count < 1 {
            return Err(UnitsError::EmptyCloud);
        }
        let finite =
            |v: &[f64; 3]| v.iter().all(|c| c.is_finite());
        if !finite(&center_position) || !finite(&center_velocity) {
            return Err(UnitsError::NonFiniteCloudCenter);
        }
        Ok(CloudSpec {
            temperature,
            initial_radius,
            center_position,
            center_velocity,
            count,
        })
    }

    /// Cloud temperature, K.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Per-axis position standard deviation at release, m.
    pub fn initial_radius(&self) -> f64 {
        self.initial_radius
    }

    /// Center of mass position at release, m.
    pub fn center_position(&self) -> [f64; 3] {
        self.center_position
    }

    /// Center of mass velocity at release, m/s.
    pub fn center_velocity(&self) -> [f64; 3] {
        self.center_velocity
    }

    /// Number of particles.
    pub fn count(&self) -> usize {
        self.count
    }
}

/// Per-axis RMS thermal velocity sqrt(k_B T / m) of a cloud at temperature
/// `temperature`.
pub fn rms_thermal_velocity(species: &AtomSpecies, temperature: f64) -> Result<f64, UnitsError> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(UnitsError::NegativeTemperature(temperature));
    }
    Ok((K_B * temperature / species.mass()).sqrt())
}

/// Dipole potential depth at the beam center for a two-level atom driven at
/// Rabi frequency `rabi` (rad/s) with detuning `detuning` (rad/s) from
/// resonance.
///
/// U0 = hbar rabi^2 detuning / (4 (detuning^2 + linewidth^2/4)). Red detuning
/// (negative) gives a negative, attractive depth; for |detuning| >> linewidth
/// this reduces to the familiar hbar rabi^2 / (4 detuning).
pub fn depth_from_rabi(species: &AtomSpecies, rabi: f64, detuning: f64) -> Result<f64, UnitsError> {
    if detuning == 0.0 {
        return Err(UnitsError::ZeroDetuning);
    }
    let gamma = species.linewidth();
    Ok(HBAR * rabi * rabi * detuning / (4.0 * (detuning * detuning + gamma * gamma / 4.0)))
}
