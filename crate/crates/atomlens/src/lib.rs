//! Atom optics of a far-detuned Gaussian laser beam.
//!
//! A cold atomic cloud crossing a far red-detuned Gaussian beam sees an
//! attractive dipole potential. Because the deflection grows with the
//! transverse offset, the beam acts on the cloud as a thin cylindrical lens:
//! depending on launch geometry it focuses, images, or collimates the cloud.
//!
//! The crate provides both sides of that picture:
//!
//! * analytic machinery: the dipole potential and its exact gradient force
//!   ([`potential`]), the impulse-approximation lens with focal length and
//!   object-image relations for uniform motion and for free fall
//!   ([`thinlens`]), and closed-form RMS-velocity predictions for thermal
//!   clouds ([`collimation`]);
//! * numerical machinery: a fixed-step Runge-Kutta tracer that serves as
//!   ground truth for every closed form ([`tracer`]), and deterministic
//!   parallel Monte Carlo cloud simulation with density profiles, bi-Gaussian
//!   fits and velocity decompositions ([`ensemble`]);
//! * a config-driven scenario layer that wires the two together into sweep
//!   experiments emitting CSV tables ([`scenario`]).
//!
//! All quantities are SI unless a name says otherwise.

pub mod collimation;
pub mod ensemble;
pub mod fit;
pub mod potential;
pub mod quadrature;
pub mod scenario;
pub mod thinlens;
pub mod tracer;
pub mod units;
