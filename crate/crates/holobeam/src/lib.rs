//! Two-timescale beamforming for downlink multi-user holographic MIMO surfaces.
//!
//! A holographic MIMO surface (HMIMOS) is a leaky-wave aperture of densely
//! packed amplitude-controlled radiation elements excited by a small number of
//! waveguide feeds. This crate simulates a downlink system in which one such
//! surface at the base station serves several single-surface users, and
//! implements the joint optimization of
//!
//! - the long-term amplitude beampatterns at both ends (optimized over
//!   statistical channel state with a constrained stochastic successive convex
//!   approximation loop), and
//! - the short-term digital precoder at the feeds (a per-slot transmit power
//!   minimization under per-user spectral-efficiency constraints, solved as a
//!   second-order cone program).
//!
//! Modules:
//! - [`geometry`]: panel layout, feed/element phase coupling, holographic
//!   amplitude patterns.
//! - [`channel`]: Saleh-Valenzuela statistical model, steering vectors,
//!   seeded channel sampling.
//! - [`system`]: SINR, spectral efficiency and transmit power for any
//!   (beampattern, precoder, channel) tuple.
//! - [`socp`]: a dense second-order cone program solver (homogeneous
//!   self-dual interior point).
//! - [`precoder`]: the per-slot power-minimizing precoder and a zero-forcing
//!   reference.
//! - [`cssca`]: the long-term stochastic successive convex approximation
//!   optimizer.
//! - [`quant`]: mu-law quantization of beampatterns and precoders.
//! - [`baselines`]: comparison schemes sharing one metrics interface.
//! - [`harness`]: experiment configuration, drivers and CSV/JSON reporting.
//!
//! The `holobeam` binary exposes the experiment drivers as subcommands; the
//! crate's `examples/` directory demonstrates each capability on its own.

pub mod channel;
pub mod precoder;
pub mod socp;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod system;

pub use channel::{ChannelRealization, Scenario, StatisticalCsi};
pub use precoder::ShortTermInstance;
pub use socp::{SocpProblem, SocpSolution, SolveStatus};
pub use geometry::{FeedLayout, PhaseCoupling, SurfacePanel};
pub use system::{BeampatternState, Precoder, QosSpec};
