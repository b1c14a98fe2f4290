//! Monte Carlo propagation of pulse sequences through stochastic detuning.
//!
//! Each trajectory draws its own detuning process and is integrated with
//! piecewise-constant sub-steps: the process is sampled at sub-step
//! midpoints and the exact constant-Hamiltonian propagator applied across
//! each sub-step, with longitudinal relaxation split symmetrically around
//! the unitary. Trajectory RNG streams are derived from the seed and the
//! trajectory index alone, so results are bit-identical for a fixed seed
//! regardless of thread count, and sweep points share common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::MHZ_NS_CYCLES;
use crate::dynamics::noise::{DetuningProcess, NoiseKind, NoiseModel};
use crate::dynamics::sequence::{ElementKind, PulseElement, PulseSequence, SweepKind};
use crate::dynamics::state::{axis_rotation, constant_unitary, SpinState};
use crate::signal::{Signal, SignalMeta};
use crate::{Error, Result};

/// Integrates one element. `noise_at` maps element-local midpoint times to
/// the noise detuning; the element's static offset is added here. The T1
/// channel is applied in half steps on either side of each unitary, which
/// composes to plain per-step damping between sub-steps but halves the
/// splitting error against the drive.
fn step_element(
    state: &mut SpinState,
    elem: &PulseElement,
    n: usize,
    t1_ns: Option<f64>,
    mut noise_at: impl FnMut(f64) -> f64,
) {
    if elem.duration_ns == 0.0 {
        return;
    }
    let dt = elem.duration_ns / n as f64;
    let (omega, phase) = match elem.kind {
        ElementKind::Drive { rabi_mhz, phase_rad } => (rabi_mhz, phase_rad),
        ElementKind::Delay => (0.0, 0.0),
    };
    // 1 - e^(-dt/(2 T1)), computed without cancellation
    let gamma_half = t1_ns.map(|t1| -(-dt / (2.0 * t1)).exp_m1());
    for k in 0..n {
        let delta = noise_at((k as f64 + 0.5) * dt) + elem.detuning_offset_mhz;
        if let Some(g) = gamma_half {
            state.amplitude_damp(g);
        }
        state.apply_unitary(&constant_unitary(delta, omega, phase, dt));
        if let Some(g) = gamma_half {
            state.amplitude_damp(g);
        }
    }
}

fn check_element(elem: &PulseElement) -> Result<()> {
    if !(elem.duration_ns.is_finite() && elem.duration_ns >= 0.0) {
        return Err(Error::invalid("element duration must be non-negative"));
    }
    if !elem.detuning_offset_mhz.is_finite() {
        return Err(Error::invalid("detuning offset must be finite"));
    }
    if let ElementKind::Drive { rabi_mhz, phase_rad } = elem.kind {
        if !(rabi_mhz.is_finite() && rabi_mhz >= 0.0) {
            return Err(Error::invalid("drive Rabi frequency must be non-negative"));
        }
        if !phase_rad.is_finite() {
            return Err(Error::invalid("drive phase must be finite"));
        }
    }
    Ok(())
}

/// Evolves a state through one element under a given detuning trajectory
/// (element-local time in ns, value in MHz, sampled at sub-step midpoints).
/// The element's own static offset is added on top of the trajectory.
pub fn propagate_element(
    state: &SpinState,
    elem: &PulseElement,
    detuning_mhz: impl Fn(f64) -> f64,
    n_substeps: usize,
    t1_ns: Option<f64>,
) -> Result<SpinState> {
    if n_substeps == 0 {
        return Err(Error::invalid("sub-step count must be positive"));
    }
    check_element(elem)?;
    if let Some(t1) = t1_ns {
        if !(t1 > 0.0) {
            return Err(Error::invalid("T1 must be positive"));
        }
    }
    let mut out = *state;
    step_element(&mut out, elem, n_substeps, t1_ns, detuning_mhz);
    Ok(out)
}

/// Sub-step count for integrating `elem` under `noise`.
///
/// Fluctuating noise must be resolved on both scales, so the step is
/// min(duration/16, tau_c/20). A constant Hamiltonian needs only one exact
/// step unless relaxation acts during a drive, where operator splitting
/// requires refinement.
pub fn default_substeps(elem: &PulseElement, noise: &NoiseModel) -> usize {
    if elem.duration_ns == 0.0 {
        return 1;
    }
    match noise.kind {
        NoiseKind::OrnsteinUhlenbeck { tau_c_ns, .. } => {
            let fine = (20.0 * elem.duration_ns / tau_c_ns).ceil();
            (fine as usize).max(16)
        }
        _ => {
            if noise.t1_ns.is_some() && matches!(elem.kind, ElementKind::Drive { .. }) {
                16
            } else {
                1
            }
        }
    }
}

/// Runs a swept sequence as a trajectory average.
///
/// Grid entries are swept durations in ns for duration sweeps and 1-based
/// repetition counts otherwise; the output x axis is wall-clock time in
/// both cases. Every trajectory starts from the optically prepared dark
/// state and contributes one readout value per sweep point.
pub fn run_sequence(
    seq: &PulseSequence,
    noise: &NoiseModel,
    sweep_grid: &[f64],
    n_trajectories: usize,
    rng_seed: u64,
) -> Result<Signal> {
    seq.validate()?;
    noise.validate()?;
    if sweep_grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    if n_trajectories == 0 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    for pair in sweep_grid.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::invalid("sweep grid must be strictly increasing"));
        }
    }
    let xs: Vec<f64> = match seq.sweep {
        SweepKind::Duration => sweep_grid.to_vec(),
        SweepKind::Repetition => {
            let block = seq.block_duration_ns()?;
            if !(block > 0.0) {
                return Err(Error::invalid("repeated block has zero duration"));
            }
            sweep_grid.iter().map(|&count| count * block).collect()
        }
    };
    // Without stochastic noise every trajectory is identical.
    let n_traj = if noise.is_stochastic() { n_trajectories } else { 1 };
    let ys = sweep_grid
        .par_iter()
        .map(|&setting| -> Result<f64> {
            let elements = seq.realize(setting)?;
            let mut sum = 0.0;
            for traj in 0..n_traj {
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                rng.set_stream(traj as u64);
                let mut process = DetuningProcess::init(&noise.kind, &mut rng);
                let mut state = SpinState::up();
                let mut now = 0.0;
                let mut last_sample = 0.0;
                for el in &elements {
                    if seq.ideal_pulses {
                        if let ElementKind::Drive { rabi_mhz, phase_rad } = el.kind {
                            let angle = 2.0
                                * std::f64::consts::PI
                                * rabi_mhz
                                * el.duration_ns
                                * MHZ_NS_CYCLES;
                            state.apply_unitary(&axis_rotation(angle, phase_rad));
                            continue;
                        }
                    }
                    if el.duration_ns == 0.0 {
                        continue;
                    }
                    let n = default_substeps(el, noise);
                    let start = now;
                    step_element(&mut state, el, n, noise.t1_ns, |t_local| {
                        let t = start + t_local;
                        process.advance(t - last_sample, &mut rng);
                        last_sample = t;
                        process.value()
                    });
                    now += el.duration_ns;
                }
                sum += state.readout(seq.readout_axis);
            }
            Ok(sum / n_traj as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Signal::new(xs, ys, SignalMeta::new("time_ns", "signal"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::analytic::{analytic_coherence, CoherenceSequence};
    use crate::dynamics::sequence::{self, ElementDuration, SequenceElement, TemplateParams};
    use crate::dynamics::state::ReadoutAxis;
    use crate::linspace;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn ideal(rabi_mhz: f64) -> TemplateParams {
        TemplateParams {
            rabi_mhz,
            detuning_mhz: 0.0,
            ideal_pulses: true,
        }
    }

    fn delay(duration_ns: f64, detuning_offset_mhz: f64) -> PulseElement {
        PulseElement {
            kind: ElementKind::Delay,
            duration_ns,
            detuning_offset_mhz,
        }
    }

    #[test]
    fn resonant_nutation_matches_the_rabi_formula() {
        let seq = sequence::rabi(TemplateParams::new(10.0)).unwrap();
        let grid = linspace(0.0, 200.0, 41);
        let sig = run_sequence(&seq, &NoiseModel::none(), &grid, 1, 1).unwrap();
        for (t, y) in sig.x().iter().zip(sig.y()) {
            let expect = (std::f64::consts::PI * 10.0 * t * 1e-3).sin().powi(2);
            assert_relative_eq!(*y, expect, epsilon = 1e-12);
        }
        // full contrast: the grid contains exact half and full turns
        assert_relative_eq!(sig.y()[10], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sig.y()[20], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn free_induction_fringes_at_the_detuning_frequency() {
        let mut params = ideal(10.0);
        params.detuning_mhz = 7.3;
        let seq = sequence::fid(params).unwrap();
        let grid = linspace(0.0, 300.0, 61);
        let sig = run_sequence(&seq, &NoiseModel::none(), &grid, 5, 42).unwrap();
        for (t, y) in sig.x().iter().zip(sig.y()) {
            let phi = 2.0 * std::f64::consts::PI * 7.3 * t * 1e-3;
            assert_relative_eq!(*y, 0.5 * (1.0 + phi.cos()), epsilon = 1e-12);
        }
        // zero delay leaves two back-to-back ninety pulses: a net half turn
        assert_relative_eq!(sig.y()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn real_pulses_approach_the_ideal_limit() {
        let mut real = TemplateParams::new(5000.0);
        real.detuning_mhz = 5.0;
        let mut idl = real;
        idl.ideal_pulses = true;
        let grid = linspace(10.0, 210.0, 11);
        let a = run_sequence(
            &sequence::hahn(real).unwrap(),
            &NoiseModel::none(),
            &grid,
            1,
            1,
        )
        .unwrap();
        let b = run_sequence(
            &sequence::hahn(idl).unwrap(),
            &NoiseModel::none(),
            &grid,
            1,
            1,
        )
        .unwrap();
        for (ya, yb) in a.y().iter().zip(b.y()) {
            assert_relative_eq!(*yb, 1.0, epsilon = 1e-12);
            assert!((ya - yb).abs() < 1e-3, "real {} ideal {}", ya, yb);
        }
    }

    #[test]
    fn delays_leave_the_dark_state_alone() {
        let up = SpinState::up();
        let el = delay(120.0, 9.0);
        let out = propagate_element(&up, &el, |t| (0.05 * t).sin() * 3.0, 32, None).unwrap();
        assert_relative_eq!(out.population_up(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.purity(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_detuning_advances_coherence_phase() {
        let s = SpinState::from_bloch(1.0, 0.0, 0.0).unwrap();
        let el = delay(41.0, 0.0);
        let coarse = propagate_element(&s, &el, |_| 7.0, 1, None).unwrap();
        let fine = propagate_element(&s, &el, |_| 7.0, 64, None).unwrap();
        let phi = 2.0 * std::f64::consts::PI * 7.0 * 41.0 * 1e-3;
        let (x, y, _) = coarse.bloch();
        assert_relative_eq!(x, phi.cos(), epsilon = 1e-12);
        assert_relative_eq!(y, phi.sin(), epsilon = 1e-12);
        // sub-step count is irrelevant for a constant Hamiltonian
        assert!((coarse.density() - fine.density()).norm() < 1e-12);
    }

    #[test]
    fn substep_policy_resolves_fluctuating_noise() {
        let ou = NoiseModel::ornstein_uhlenbeck(5.0, 100.0).unwrap();
        assert_eq!(default_substeps(&delay(10.0, 0.0), &ou), 16);
        assert_eq!(default_substeps(&delay(1000.0, 0.0), &ou), 200);
        let qs = NoiseModel::quasi_static(5.0).unwrap();
        assert_eq!(default_substeps(&delay(1000.0, 0.0), &qs), 1);
        let qs_t1 = qs.with_t1(200.0).unwrap();
        assert_eq!(default_substeps(&delay(1000.0, 0.0), &qs_t1), 1);
        let drive = PulseElement {
            kind: ElementKind::Drive {
                rabi_mhz: 10.0,
                phase_rad: 0.0,
            },
            duration_ns: 25.0,
            detuning_offset_mhz: 0.0,
        };
        assert_eq!(default_substeps(&drive, &qs_t1), 16);
    }

    #[test]
    fn propagation_rejects_bad_input() {
        let s = SpinState::up();
        assert!(propagate_element(&s, &delay(10.0, 0.0), |_| 0.0, 0, None).is_err());
        assert!(propagate_element(&s, &delay(-1.0, 0.0), |_| 0.0, 4, None).is_err());
        assert!(propagate_element(&s, &delay(10.0, 0.0), |_| 0.0, 4, Some(0.0)).is_err());
    }

    #[test]
    fn quasi_static_fid_agrees_with_the_closed_form() {
        let noise = NoiseModel::quasi_static(5.77).unwrap();
        let seq = sequence::fid(ideal(10.0)).unwrap();
        let grid = linspace(0.0, 120.0, 13);
        let n_traj = 2000;
        let sig = run_sequence(&seq, &noise, &grid, n_traj, 7).unwrap();
        for (t, y) in sig.x().iter().zip(sig.y()) {
            let w = analytic_coherence(&noise, CoherenceSequence::Fid, *t).unwrap();
            let expect = 0.5 * (1.0 + w);
            // per-trajectory readout variance for Gaussian-phase averaging
            let var = (0.5 * (1.0 + w.powi(4)) - w * w) / 4.0;
            let se = (var / n_traj as f64).sqrt();
            assert!(
                (y - expect).abs() <= 3.0 * se + 1e-12,
                "t={} y={} expect={} se={}",
                t,
                y,
                expect,
                se
            );
        }
    }

    #[test]
    fn quasi_static_echo_is_exactly_refocused() {
        let noise = NoiseModel::quasi_static(8.0).unwrap();
        let seq = sequence::hahn(ideal(10.0)).unwrap();
        let grid = linspace(20.0, 400.0, 8);
        let sig = run_sequence(&seq, &noise, &grid, 50, 3).unwrap();
        for y in sig.y() {
            assert_relative_eq!(*y, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn slow_ou_noise_reproduces_the_quasi_static_envelope() {
        let ou = NoiseModel::ornstein_uhlenbeck(5.77, 1e8).unwrap();
        let qs = NoiseModel::quasi_static(5.77).unwrap();
        let seq = sequence::fid(ideal(10.0)).unwrap();
        let grid = linspace(10.0, 110.0, 6);
        let n_traj = 2000;
        let sig = run_sequence(&seq, &ou, &grid, n_traj, 11).unwrap();
        for (t, y) in sig.x().iter().zip(sig.y()) {
            let w = analytic_coherence(&qs, CoherenceSequence::Fid, *t).unwrap();
            let var = (0.5 * (1.0 + w.powi(4)) - w * w) / 4.0;
            let se = (var / n_traj as f64).sqrt();
            assert!(
                (y - 0.5 * (1.0 + w)).abs() <= 3.0 * se + 1e-12,
                "t={} y={}",
                t,
                y
            );
        }
    }

    #[test]
    fn relaxation_halves_the_coherence_rate() {
        let noise = NoiseModel::none().with_t1(137.0).unwrap();
        let mut params = ideal(10.0);
        params.detuning_mhz = 0.0;
        let seq = sequence::fid(params).unwrap();
        let grid = linspace(0.0, 400.0, 21);
        let sig = run_sequence(&seq, &noise, &grid, 1, 1).unwrap();
        for (t, y) in sig.x().iter().zip(sig.y()) {
            assert_relative_eq!(*y, 0.5 * (1.0 + (-t / 274.0).exp()), epsilon = 1e-12);
        }
    }

    #[test]
    fn readout_axis_swaps_the_final_pulse() {
        // ninety-x then delay, read along y: same signal as the full
        // two-pulse sequence read along z
        let mut params = ideal(10.0);
        params.detuning_mhz = 4.0;
        let full = sequence::fid(params).unwrap();
        let short = PulseSequence {
            elements: vec![
                full.elements[0],
                SequenceElement {
                    kind: ElementKind::Delay,
                    duration: ElementDuration::Swept { scale: 1.0 },
                    detuning_offset_mhz: 4.0,
                },
            ],
            sweep: SweepKind::Duration,
            readout_axis: ReadoutAxis::Y,
            ideal_pulses: true,
        };
        let grid = linspace(0.0, 200.0, 21);
        let a = run_sequence(&full, &NoiseModel::none(), &grid, 1, 1).unwrap();
        let b = run_sequence(&short, &NoiseModel::none(), &grid, 1, 1).unwrap();
        for (ya, yb) in a.y().iter().zip(b.y()) {
            assert_relative_eq!(*ya, *yb, epsilon = 1e-12);
        }
    }

    #[test]
    fn repetition_sweeps_map_counts_to_cycle_time() {
        let seq = sequence::wahuha(10.0, ideal(10.0)).unwrap();
        let grid: Vec<f64> = (1..=5).map(|k| k as f64).collect();
        let sig = run_sequence(&seq, &NoiseModel::none(), &grid, 1, 1).unwrap();
        for (k, x) in sig.x().iter().enumerate() {
            assert_relative_eq!(*x, 60.0 * (k + 1) as f64, epsilon = 1e-12);
        }
        // four-pulse cycles leave no net rotation, so prep and readout
        // compose to a half turn
        for y in sig.y() {
            assert_relative_eq!(*y, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical_and_distinct_seeds_differ() {
        let noise = NoiseModel::ornstein_uhlenbeck(5.0, 200.0).unwrap();
        let seq = sequence::hahn(ideal(10.0)).unwrap();
        let grid = linspace(10.0, 200.0, 5);
        let a = run_sequence(&seq, &noise, &grid, 40, 99).unwrap();
        let b = run_sequence(&seq, &noise, &grid, 40, 99).unwrap();
        assert_eq!(a.y(), b.y());
        let c = run_sequence(&seq, &noise, &grid, 40, 100).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn grid_and_trajectory_validation() {
        let seq = sequence::fid(ideal(10.0)).unwrap();
        let noise = NoiseModel::none();
        assert!(run_sequence(&seq, &noise, &[], 1, 1).is_err());
        assert!(run_sequence(&seq, &noise, &[10.0, 10.0], 1, 1).is_err());
        assert!(run_sequence(&seq, &noise, &[10.0, 5.0], 1, 1).is_err());
        assert!(run_sequence(&seq, &noise, &[1.0, 2.0], 0, 1).is_err());
    }

    /// Fixed-step fourth-order Runge-Kutta integration of the
    /// Schroedinger equation through a resolved element train, sharing no
    /// code with the engine's propagators.
    fn rk4_reference(
        elements: &[PulseElement],
        detuning: impl Fn(f64) -> f64,
        dt: f64,
    ) -> SpinState {
        let mut psi = nalgebra::Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let mut offset = 0.0;
        for el in elements {
            let (omega, phase) = match el.kind {
                ElementKind::Drive { rabi_mhz, phase_rad } => (rabi_mhz, phase_rad),
                ElementKind::Delay => (0.0, 0.0),
            };
            let deriv = |t: f64, p: &nalgebra::Vector2<Complex64>| {
                let delta = detuning(t) + el.detuning_offset_mhz;
                let i = Complex64::new(0.0, 1.0);
                let wx = Complex64::new(omega * phase.cos(), 0.0);
                let wy = Complex64::new(omega * phase.sin(), 0.0);
                let h00 = Complex64::new(0.5 * delta, 0.0);
                let h01 = 0.5 * (wx - i * wy);
                let scale = -i * Complex64::new(2.0 * std::f64::consts::PI * 1e-3, 0.0);
                nalgebra::Vector2::new(
                    scale * (h00 * p[0] + h01 * p[1]),
                    scale * (h01.conj() * p[0] - h00 * p[1]),
                )
            };
            let steps = (el.duration_ns / dt).ceil().max(1.0) as usize;
            let h = el.duration_ns / steps as f64;
            for k in 0..steps {
                let t = offset + k as f64 * h;
                let k1 = deriv(t, &psi);
                let k2 = deriv(t + 0.5 * h, &(psi + k1 * Complex64::new(0.5 * h, 0.0)));
                let k3 = deriv(t + 0.5 * h, &(psi + k2 * Complex64::new(0.5 * h, 0.0)));
                let k4 = deriv(t + h, &(psi + k3 * Complex64::new(h, 0.0)));
                psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                    * Complex64::new(h / 6.0, 0.0);
            }
            offset += el.duration_ns;
        }
        psi /= Complex64::new(psi.norm(), 0.0);
        SpinState::from_bloch(
            2.0 * (psi[0].conj() * psi[1]).re,
            2.0 * (psi[0].conj() * psi[1]).im,
            psi[0].norm_sqr() - psi[1].norm_sqr(),
        )
        .unwrap()
    }

    #[test]
    fn line_narrowing_sequence_matches_a_brute_force_integrator() {
        // smooth deterministic detuning, real pulses
        let detuning = |t: f64| 3.17 * (2.0 * std::f64::consts::PI * 0.011 * t * 1.0).sin() + 1.3;
        let seq = sequence::wahuha_tau(2, TemplateParams::new(20.0)).unwrap();
        let elements = seq.realize(12.0).unwrap();

        let mut state = SpinState::up();
        let mut offset = 0.0;
        for el in &elements {
            let n = (el.duration_ns * 8.0).ceil().max(1.0) as usize;
            let start = offset;
            state = propagate_element(&state, el, |t| detuning(start + t), n, None).unwrap();
            offset += el.duration_ns;
        }

        let reference = rk4_reference(&elements, detuning, 0.01);
        let (ax, ay, az) = state.bloch();
        let (bx, by, bz) = reference.bloch();
        assert!(
            (ax - bx).abs() < 1e-4 && (ay - by).abs() < 1e-4 && (az - bz).abs() < 1e-4,
            "engine ({}, {}, {}) vs reference ({}, {}, {})",
            ax,
            ay,
            az,
            bx,
            by,
            bz
        );
        // the sequence does not refocus classical detuning noise
        assert!((state.readout(ReadoutAxis::Z) - 1.0).abs() > 1e-3);
    }
}
