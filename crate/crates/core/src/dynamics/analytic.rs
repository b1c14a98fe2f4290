//! Closed-form coherence envelopes for Gaussian dephasing noise.
//!
//! These are the oracles the Monte Carlo engine is validated against. For
//! Gaussian noise the coherence is exp(-Var(phi)/2) with phi the accumulated
//! toggled phase, and for the Ornstein-Uhlenbeck process the variance over
//! any train of equidistant half-turn pulses has an exact expression in
//! terms of per-segment integrals of the exponential correlation function.

use crate::constants::MHZ_NS_CYCLES;
use crate::dynamics::noise::{NoiseKind, NoiseModel};
use crate::{Error, Result};

/// Sequence families with a closed-form envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceSequence {
    Fid,
    Hahn,
    /// Echo train with this many half-turn pulses.
    Cpmg(usize),
}

/// Coherence envelope `W(t)` in [0, 1] at total free-evolution time `t_ns`,
/// assuming instantaneous pulses. The measured signal is `(1 + W)/2` for
/// the standard templates. Includes the `exp(-t/(2 T1))` factor when the
/// model carries longitudinal relaxation.
pub fn analytic_coherence(
    noise: &NoiseModel,
    seq: CoherenceSequence,
    t_ns: f64,
) -> Result<f64> {
    noise.validate()?;
    if !(t_ns.is_finite() && t_ns >= 0.0) {
        return Err(Error::invalid("evolution time must be non-negative"));
    }
    let n_pi = match seq {
        CoherenceSequence::Fid => 0,
        CoherenceSequence::Hahn => 1,
        CoherenceSequence::Cpmg(0) => {
            return Err(Error::invalid("echo train needs at least one pulse"))
        }
        CoherenceSequence::Cpmg(n) => n,
    };
    let dephasing = match noise.kind {
        NoiseKind::None => {
            return Err(Error::invalid(
                "no closed form without a stochastic noise kind",
            ))
        }
        NoiseKind::QuasiStaticGaussian { sigma_mhz } => {
            let sa = angular(sigma_mhz);
            if n_pi == 0 {
                // Gaussian average of cos(phi), phi = sa * t per trajectory.
                (-0.5 * sa * sa * t_ns * t_ns).exp()
            } else {
                // A static detuning accumulates equal and opposite phase on
                // the two sides of every half-turn pulse.
                1.0
            }
        }
        NoiseKind::OrnsteinUhlenbeck { sigma_mhz, tau_c_ns } => {
            let sa = angular(sigma_mhz);
            (-0.5 * sa * sa * phase_variance(n_pi, t_ns, tau_c_ns)).exp()
        }
    };
    let longitudinal = match noise.t1_ns {
        Some(t1) => (-t_ns / (2.0 * t1)).exp(),
        None => 1.0,
    };
    Ok(dephasing * longitudinal)
}

fn angular(sigma_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * sigma_mhz * MHZ_NS_CYCLES
}

/// Segment lengths and toggling signs for an `n_pi`-pulse train of total
/// free evolution `t`: outer segments t/2n, interior segments t/n, sign
/// flipping at each pulse.
fn segments(n_pi: usize, t_ns: f64) -> Vec<(f64, f64)> {
    if n_pi == 0 {
        return vec![(t_ns, 1.0)];
    }
    let half = t_ns / (2 * n_pi) as f64;
    let full = t_ns / n_pi as f64;
    let mut out = Vec::with_capacity(n_pi + 1);
    out.push((half, 1.0));
    for k in 1..n_pi {
        out.push((full, if k % 2 == 0 { 1.0 } else { -1.0 }));
    }
    out.push((half, if n_pi % 2 == 0 { 1.0 } else { -1.0 }));
    out
}

/// Variance of the toggled phase for a unit-variance OU process with
/// correlation time `tau`, in units where sigma_angular = 1.
///
/// For segments i <= j with lengths L_i, L_j and gap g between them:
///   same segment:  2 tau L - 2 tau^2 (1 - e^(-L/tau))
///   distinct:      tau^2 (1 - e^(-L_i/tau)) (1 - e^(-L_j/tau)) e^(-g/tau)
/// both obtained by integrating e^(-|u-v|/tau) over the segment pair.
fn phase_variance(n_pi: usize, t_ns: f64, tau: f64) -> f64 {
    let segs = segments(n_pi, t_ns);
    let mut var = 0.0;
    let mut start_i = 0.0;
    for (i, &(li, si)) in segs.iter().enumerate() {
        var += si * si * 2.0 * tau * tau * omue(li / tau);
        let mut start_j = start_i + li;
        for &(lj, sj) in &segs[i + 1..] {
            let gap = start_j - (start_i + li);
            var += 2.0
                * si
                * sj
                * tau
                * tau
                * em1(li / tau)
                * em1(lj / tau)
                * (-gap / tau).exp();
            start_j += lj;
        }
        start_i += li;
    }
    var
}

/// `1 - e^(-u)` without cancellation.
fn em1(u: f64) -> f64 {
    -(-u).exp_m1()
}

/// `u - 1 + e^(-u)` without cancellation; this is u^2/2 + O(u^3).
fn omue(u: f64) -> f64 {
    if u < 1e-4 {
        u * u / 2.0 * (1.0 - u / 3.0 + u * u / 12.0)
    } else {
        u - em1(u)
    }
}
