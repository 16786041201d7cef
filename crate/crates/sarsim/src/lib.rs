//! Physics-driven SAR scene simulation of trihedral corner reflectors and
//! aspect-angles-invariant physical adversarial attack optimization against
//! pluggable image classifiers.
//!
//! The crate is organized along the processing chain:
//!
//! - [`geometry`]: frames, aspect transforms, platform track, polygon clipping
//! - [`scattering`]: PO/GO fifteen-path trihedral backscatter model
//! - [`imaging`]: chirp, echo synthesis, quadrature demodulation, RDA focusing
//! - [`data`]: MSTAR ingestion, synthetic scenes, azimuth subset sampling
//! - [`bbox`]: composite-image bounding boxes and per-sample localization
//! - [`classify`]: target-model interface, reference classifier, fooling rates
//! - [`attack`]: reflector parameterization, adversarial composition, losses
//! - [`optimize`]: bounded differential evolution and particle swarm

pub mod attack;
pub mod bbox;
pub mod classify;
pub mod data;
pub mod geometry;
pub mod imaging;
pub mod optimize;
pub mod pipeline;
pub mod scattering;
