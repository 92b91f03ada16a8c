//! Monte Carlo clouds: thermal sampling, transport through the lens (traced
//! or kick-map), and the statistics read off the result.
//!
//! Reproducibility contract: a run is a pure function of (cloud spec, seed).
//! Every particle owns an independent counter-derived RNG stream, particles
//! are processed in index order regardless of the thread count, and all
//! reductions are fixed-order pairwise sums, so results are identical bit
//! for bit no matter how the work is scheduled.

use crate::collimation::{deflected_vy_gravity, delta_vz_single, LensGeometry};
use crate::fit::{fit_two_gaussians, BiGaussianFit, FitError};
use crate::tracer::{trace_final, IntegratorParams, TerminalReason};
use crate::units::{rms_thermal_velocity, AtomSpecies, CloudSpec, GaussianBeam, PhaseSpacePoint, G_ACCEL};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EnsembleError {
    #[error("statistic needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("histogram range must be a finite non-empty interval")]
    DegenerateRange,
    #[error("histogram needs at least 8 bins, got {0}")]
    TooFewBins(usize),
    #[error("flight time coincides with the image time: focused width is undefined")]
    SingularImageTime,
    #[error("decomposition times must be positive and finite")]
    InvalidTimes,
    #[error("fit has a non-positive amplitude or width; cannot split populations")]
    DegenerateFit,
}

/// A coordinate axis of the simulation frame (x along the light, z along
/// the atoms' mean motion, y the kick direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn position(self, p: &PhaseSpacePoint) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
            Axis::Z => p.z,
        }
    }

    fn velocity(self, p: &PhaseSpacePoint) -> f64 {
        match self {
            Axis::X => p.vx,
            Axis::Y => p.vy,
            Axis::Z => p.vz,
        }
    }
}

/// A sampled cloud: particle states plus the (spec, seed) pair that fully
/// determines them.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    particles: Vec<PhaseSpacePoint>,
    seed: u64,
    spec: CloudSpec,
}

impl Ensemble {
    /// Assemble an ensemble directly from particle states (for tests and
    /// synthetic inputs; simulation code goes through [`sample_cloud`]).
    pub fn from_parts(particles: Vec<PhaseSpacePoint>, seed: u64, spec: CloudSpec) -> Self {
        assert!(!particles.is_empty(), "an ensemble holds at least one particle");
        Ensemble {
            particles,
            seed,
            spec,
        }
    }

    pub fn particles(&self) -> &[PhaseSpacePoint] {
        &self.particles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &CloudSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function, the standard 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit stream key for particle `index` under `master`: consecutive
/// indices land far apart in SplitMix64's sequence, so streams never
/// overlap and adding particles never reshuffles existing ones.
fn stream_seed(master: u64, index: u64) -> [u8; 32] {
    let mut state = master.wrapping_add((index + 1).wrapping_mul(GOLDEN_GAMMA));
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// Standard normal draws by Box-Muller over a counter-based stream. The
/// uniform for the log lives in (0, 1] so the transform never sees zero.
struct GaussianSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    fn for_particle(master: u64, index: u64) -> Self {
        GaussianSampler {
            rng: ChaCha8Rng::from_seed(stream_seed(master, index)),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Draw a thermal cloud at t = 0: isotropic Gaussian ball of the spec's
/// radius around its center position, Maxwell-Boltzmann velocities around
/// its center velocity.
pub fn sample_cloud(spec: &CloudSpec, species: &AtomSpecies, seed: u64) -> Ensemble {
    let sigma_v = rms_thermal_velocity(species, spec.temperature()).expect("spec validated");
    let sigma_r = spec.initial_radius();
    let [cx, cy, cz] = spec.center_position();
    let [cvx, cvy, cvz] = spec.center_velocity();
    let particles: Vec<PhaseSpacePoint> = (0..spec.count() as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = GaussianSampler::for_particle(seed, i);
            PhaseSpacePoint {
                x: cx + sigma_r * g.next(),
                y: cy + sigma_r * g.next(),
                z: cz + sigma_r * g.next(),
                vx: cvx + sigma_v * g.next(),
                vy: cvy + sigma_v * g.next(),
                vz: cvz + sigma_v * g.next(),
                t: 0.0,
            }
        })
        .collect();
    Ensemble {
        particles,
        seed,
        spec: spec.clone(),
    }
}

/// How many traced particles did not finish a clean transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransitSummary {
    pub trapped: usize,
    pub timed_out: usize,
}

/// Run every particle through the integrator. Particles end at their own
/// transit-completion times; use [`advance_to`] to bring the cloud back to
/// a common clock before taking statistics.
pub fn evolve_traced(
    ens: &Ensemble,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    gravity: bool,
    params: &IntegratorParams,
) -> (Ensemble, TransitSummary) {
    let results: Vec<(PhaseSpacePoint, TerminalReason)> = ens
        .particles
        .par_iter()
        .map(|&p| trace_final(p, beam, species, gravity, params))
        .collect();
    let mut summary = TransitSummary::default();
    let particles = results
        .into_iter()
        .map(|(p, reason)| {
            match reason {
                TerminalReason::Trapped => summary.trapped += 1,
                TerminalReason::MaxTime => summary.timed_out += 1,
                TerminalReason::TransitComplete => {}
            }
            p
        })
        .collect();
    (
        Ensemble {
            particles,
            seed: ens.seed,
            spec: ens.spec.clone(),
        },
        summary,
    )
}

/// Apply the impulse kick map in place of a traced transit: each particle's
/// transverse velocity is scaled by (1 - R exp(-vy^2/scale^2)) and its axial
/// velocity picks up the matching second-order change. Positions and clocks
/// stay untouched; the map is meant to be applied when the cloud center
/// reaches the beam.
pub fn evolve_kickmap(
    ens: &Ensemble,
    beam: &GaussianBeam,
    species: &AtomSpecies,
    geometry: LensGeometry,
) -> Ensemble {
    // Reduce either geometry to (strength ratio, velocity scale, beam-plane
    // speed, effective object distance).
    let (l_o, v_beam) = match geometry {
        LensGeometry::Uniform {
            object_distance,
            axial_speed,
        } => (object_distance, axial_speed),
        LensGeometry::Gravity { drop_height } => {
            (2.0 * drop_height, (2.0 * G_ACCEL * drop_height).sqrt())
        }
    };
    assert!(l_o > 0.0 && v_beam > 0.0, "kick map needs a real approach");
    let energy = 0.5 * species.mass() * v_beam * v_beam;
    let focal_length = if beam.depth() == 0.0 {
        f64::INFINITY
    } else {
        -energy * beam.waist() / (PI.sqrt() * beam.depth())
    };
    let r = if focal_length.is_infinite() {
        0.0
    } else {
        l_o / focal_length
    };
    let scale = beam.waist() * v_beam / l_o;
    let particles = ens
        .particles
        .iter()
        .map(|&p| {
            let mut q = p;
            q.vy = deflected_vy_gravity(p.vy, r, scale);
            q.vz = p.vz + delta_vz_single(p.vy, v_beam, l_o, focal_length, scale);
            q
        })
        .collect();
    Ensemble {
        particles,
        seed: ens.seed,
        spec: ens.spec.clone(),
    }
}

/// Ballistic flight of the whole cloud over `dt` (with gravity along +z
/// when asked). Exact, no integration involved.
pub fn free_expand(ens: &Ensemble, dt: f64, gravity: bool) -> Ensemble {
    let g = if gravity { G_ACCEL } else { 0.0 };
    Ensemble {
        particles: ens.particles.iter().map(|p| p.advanced(dt, g)).collect(),
        seed: ens.seed,
        spec: ens.spec.clone(),
    }
}

/// Ballistically synchronize every particle to the common clock `t_target`.
/// Needed after a traced transit, where each particle finishes at its own
/// time. Particles already past `t_target` are flown backwards, which is
/// exact for ballistic motion.
pub fn advance_to(ens: &Ensemble, t_target: f64, gravity: bool) -> Ensemble {
    assert!(t_target.is_finite());
    let g = if gravity { G_ACCEL } else { 0.0 };
    Ensemble {
        particles: ens
            .particles
            .iter()
            .map(|p| p.advanced(t_target - p.t, g))
            .collect(),
        seed: ens.seed,
        spec: ens.spec.clone(),
    }
}

/// Fixed-order pairwise sum: deterministic and far more accurate than a
/// running sum over large ensembles.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// RMS about the mean and its standard error, from the sampling variance of
/// a variance: se(rms) = sqrt((m4 - m2^2) / (4 m2 N)) with central moments.
pub fn rms_and_se(values: &[f64]) -> Result<(f64, f64), EnsembleError> {
    let n = values.len();
    if n < 2 {
        return Err(EnsembleError::TooFewParticles(n));
    }
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let devs2: Vec<f64> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let m2 = pairwise_sum(&devs2) / nf;
    let devs4: Vec<f64> = devs2.iter().map(|&d| d * d).collect();
    let m4 = pairwise_sum(&devs4) / nf;
    let rms = m2.sqrt();
    let se = if m2 > 0.0 {
        ((m4 - m2 * m2).max(0.0) / (4.0 * m2 * nf)).sqrt()
    } else {
        0.0
    };
    Ok((rms, se))
}

/// RMS spread of one velocity component about the cloud mean.
pub fn rms_velocity(ens: &Ensemble, axis: Axis) -> Result<f64, EnsembleError> {
    let values: Vec<f64> = ens.particles.iter().map(|p| axis.velocity(p)).collect();
    rms_and_se(&values).map(|(rms, _)| rms)
}

/// RMS spread of one position component about the cloud mean.
pub fn rms_position(ens: &Ensemble, axis: Axis) -> Result<f64, EnsembleError> {
    let values: Vec<f64> = ens.particles.iter().map(|p| axis.position(p)).collect();
    rms_and_se(&values).map(|(rms, _)| rms)
}

/// Mean of one position component (pairwise, deterministic).
pub fn mean_position(ens: &Ensemble, axis: Axis) -> f64 {
    let values: Vec<f64> = ens.particles.iter().map(|p| axis.position(p)).collect();
    pairwise_sum(&values) / values.len() as f64
}

/// A histogram of one position component.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub axis: Axis,
    /// bins + 1 edges, uniform spacing.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Particles outside [first, last] edge.
    pub out_of_range: u64,
}

impl DensityProfile {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

/// Histogram `axis` positions into `bins` uniform bins over `range`
/// (inclusive at the top edge, like every sane histogram of a closed
/// interval).
pub fn density_profile(
    ens: &Ensemble,
    axis: Axis,
    bins: usize,
    range: (f64, f64),
) -> Result<DensityProfile, EnsembleError> {
    if bins < 8 {
        return Err(EnsembleError::TooFewBins(bins));
    }
    let (lo, hi) = range;
    if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
        return Err(EnsembleError::DegenerateRange);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut out_of_range = 0u64;
    for p in &ens.particles {
        let v = axis.position(p);
        if v < lo || v > hi {
            out_of_range += 1;
            continue;
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let bin_edges = (0..=bins)
        .map(|i| lo + i as f64 * width)
        .collect();
    Ok(DensityProfile {
        axis,
        bin_edges,
        counts,
        out_of_range,
    })
}

/// Fit the two-Gaussian model to a histogram (bin centers vs counts).
pub fn fit_bigaussian(profile: &DensityProfile) -> Result<BiGaussianFit, FitError> {
    let xs = profile.bin_centers();
    let ys: Vec<f64> = profile.counts.iter().map(|&c| c as f64).collect();
    fit_two_gaussians(&xs, &ys)
}

/// The two velocity populations implied by a fitted snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityDecomposition {
    /// RMS velocity of the focused (narrow) population, m/s.
    pub v_f_rms: f64,
    /// RMS velocity of the unfocused (wide) population, m/s.
    pub v_unf_rms: f64,
    /// Particle counts in each population, split by fitted Gaussian area.
    pub n_f: f64,
    pub n_unf: f64,
    /// Population-weighted quadrature total, m/s.
    pub v_total_rms: f64,
}

/// Convert a fitted snapshot taken `t_f` after the beam into the velocity
/// spreads of its two populations.
///
/// The narrow component converges to a point at the image time t_i and then
/// reexpands, so its width reads sigma_n = v_f |t_f - t_i|; the wide
/// component never focused and has been expanding since release,
/// sigma_w = v_unf (t_o + t_f). Populations split by Gaussian area.
pub fn decompose_velocities(
    fit: &BiGaussianFit,
    t_o: f64,
    t_i: f64,
    t_f: f64,
    n_total: usize,
) -> Result<VelocityDecomposition, EnsembleError> {
    let times_ok = |t: f64| t.is_finite() && t > 0.0;
    if !times_ok(t_o) || !times_ok(t_i) || !times_ok(t_f) {
        return Err(EnsembleError::InvalidTimes);
    }
    if t_f == t_i {
        return Err(EnsembleError::SingularImageTime);
    }
    if !(fit.amp_narrow > 0.0)
        || !(fit.amp_wide > 0.0)
        || !(fit.sigma_narrow > 0.0)
        || !(fit.sigma_wide > 0.0)
    {
        return Err(EnsembleError::DegenerateFit);
    }
    let v_f_rms = fit.sigma_narrow / (t_f - t_i).abs();
    let v_unf_rms = fit.sigma_wide / (t_f + t_o);
    let area_f = fit.amp_narrow * fit.sigma_narrow * (2.0 * PI).sqrt();
    let area_unf = fit.amp_wide * fit.sigma_wide * (2.0 * PI).sqrt();
    let total = area_f + area_unf;
    let n_f = n_total as f64 * area_f / total;
    let n_unf = n_total as f64 * area_unf / total;
    let v_total_rms =
        ((n_f * v_f_rms * v_f_rms + n_unf * v_unf_rms * v_unf_rms) / (n_f + n_unf)).sqrt();
    Ok(VelocityDecomposition {
        v_f_rms,
        v_unf_rms,
        n_f,
        n_unf,
        v_total_rms,
    })
}

/// Transverse RMS size of an ideally lensed cloud `t_f` after the beam:
/// zero at the image time, reexpanding linearly on both sides with the
/// demagnified velocity spread (t_o/t_i) v0.
pub fn imaging_width_rms(t_o: f64, t_i: f64, v0: f64, t_f: f64) -> f64 {
    (t_o / t_i) * v0 * (t_f - t_i).abs()
}

/// Full width at half maximum of a Gaussian of standard deviation `sigma`.
pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * sigma
}

/// Write particle states as CSV: one row per particle, full precision.
pub fn write_snapshot_csv<W: Write>(ens: &Ensemble, out: &mut W) -> io::Result<()> {
    writeln!(out, "id,x,y,z,vx,vy,vz")?;
    for (i, p) in ens.particles.iter().enumerate() {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            i, p.x, p.y, p.z, p.vx, p.vy, p.vz
        )?;
    }
    Ok(())
}
