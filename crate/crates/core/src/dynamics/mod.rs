//! Pulsed two-level dynamics under classical dephasing noise.
//!
//! The rotating-frame Hamiltonian is
//! `H/h = (delta/2) sigma_z + (rabi/2)(cos(phi) sigma_x + sin(phi) sigma_y)`
//! with all frequencies in MHz and times in ns. Sequences are built from
//! drive and delay elements ([`sequence`]), evolved trajectory-by-trajectory
//! through a stochastic detuning process ([`noise`], [`engine`]) and checked
//! against closed-form Gaussian coherence envelopes ([`analytic`]).
//!
//! The readout convention follows optically detected magnetic resonance:
//! trajectories start in the dark state `|up>` and the signal is the bright
//! state population (more generally `(1 - <sigma_axis>)/2`), so an ideal
//! half-turn drive reads 1 and the standard templates decay from 1
//! toward 1/2.
//!
//! # Shipped noise defaults
//!
//! [`NoiseModel::calibrated_default`] carries an Ornstein-Uhlenbeck bath
//! plus longitudinal relaxation tuned for the dilute-cerium demos: free
//! induction fits to a 39 ns Gaussian decay time and the two-pulse echo to
//! 194 ns with a Gaussian-like stretch exponent. Each value comes from a
//! one-dimensional bisection against this crate's own fitter on the
//! analytic envelopes: sigma against the free-induction time (which it
//! dominates), then the correlation time against the echo time, then T1
//! against the echo stretch exponent, iterated to joint convergence. An
//! Ornstein-Uhlenbeck bath alone cannot meet all three targets: the
//! echo-to-free-induction ratio 194/39 forces a correlation time near
//! 690 ns whose echo envelope has stretch exponent about 2.9, so the
//! relaxation channel is what brings the exponent back to Gaussian range.

pub mod analytic;
pub mod engine;
pub mod noise;
pub mod sequence;
pub mod state;

pub use analytic::{analytic_coherence, CoherenceSequence};
pub use engine::{default_substeps, propagate_element, run_sequence};
pub use noise::{NoiseKind, NoiseModel};
pub use sequence::{
    cpmg, fid, hahn, rabi, wahuha, wahuha_tau, ElementDuration, ElementKind, PulseElement,
    PulseSequence, SequenceElement, SweepKind, TemplateParams, PHASE_MINUS_X, PHASE_MINUS_Y,
    PHASE_X, PHASE_Y,
};
pub use state::{axis_rotation, constant_unitary, ReadoutAxis, SpinState};
