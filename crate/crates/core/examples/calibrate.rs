//! Calibration of the shipped dephasing defaults.
//!
//! Finds the Ornstein-Uhlenbeck amplitude, correlation time and longitudinal
//! lifetime that reproduce the film targets through the same fits the
//! acceptance checks use: a Gaussian fit of the free-induction signal giving
//! T2* = 39 ns, a Gaussian fit of the echo signal giving T2 = 194 ns, and a
//! stretched-exponential echo fit giving exponent 2. One-dimensional
//! bisections (sigma -> T2*, tau_c -> T2, T1 -> stretch) are iterated until
//! the triple stops moving. Run with:
//!
//! ```text
//! cargo run --release -p cespin --example calibrate
//! ```

use cespin::dynamics::{analytic_coherence, CoherenceSequence, NoiseModel};
use cespin::fitting::{fit_xy, ModelKind};
use cespin::linspace;

const FID_TARGET_NS: f64 = 39.0;
const ECHO_TARGET_NS: f64 = 194.0;
const STRETCH_TARGET: f64 = 2.0;

fn fid_signal(noise: &NoiseModel, t: &[f64]) -> Vec<f64> {
    t.iter()
        .map(|&ti| 0.5 * (1.0 + analytic_coherence(noise, CoherenceSequence::Fid, ti).unwrap()))
        .collect()
}

fn echo_signal(noise: &NoiseModel, t: &[f64]) -> Vec<f64> {
    t.iter()
        .map(|&ti| 0.5 * (1.0 + analytic_coherence(noise, CoherenceSequence::Hahn, ti).unwrap()))
        .collect()
}

fn fid_tau(sigma: f64, tau_c: f64, t1: f64) -> f64 {
    let noise = NoiseModel::ornstein_uhlenbeck(sigma, tau_c)
        .unwrap()
        .with_t1(t1)
        .unwrap();
    let t = linspace(0.0, 120.0, 30);
    let y = fid_signal(&noise, &t);
    fit_xy(&t, &y, None, ModelKind::GaussianDecay, None)
        .unwrap()
        .model
        .tau_ns()
}

fn echo_fit(sigma: f64, tau_c: f64, t1: f64, kind: ModelKind) -> Vec<f64> {
    let noise = NoiseModel::ornstein_uhlenbeck(sigma, tau_c)
        .unwrap()
        .with_t1(t1)
        .unwrap();
    let t = linspace(0.0, 500.0, 26);
    let y = echo_signal(&noise, &t);
    fit_xy(&t, &y, None, kind, None).unwrap().model.params().to_vec()
}

fn echo_tau(sigma: f64, tau_c: f64, t1: f64) -> f64 {
    echo_fit(sigma, tau_c, t1, ModelKind::GaussianDecay)[2]
}

fn echo_stretch(sigma: f64, tau_c: f64, t1: f64) -> f64 {
    echo_fit(sigma, tau_c, t1, ModelKind::StretchedExp)[3]
}

/// Bisects `f(x) = target` for `f` monotone on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    let increasing = f(hi) > f(lo);
    assert!(
        (f(lo) - target) * (f(hi) - target) < 0.0,
        "target {} not bracketed by [{}, {}] -> [{}, {}]",
        target,
        lo,
        hi,
        f(lo),
        f(hi)
    );
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let high_side = (f(mid) > target) == increasing;
        if high_side {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let mut sigma = 5.77;
    let mut tau_c = 1000.0;
    let mut t1 = 300.0;

    for round in 1..=12 {
        sigma = bisect(2.0, 12.0, FID_TARGET_NS, |s| fid_tau(s, tau_c, t1));
        tau_c = bisect(250.0, 50_000.0, ECHO_TARGET_NS, |tc| echo_tau(sigma, tc, t1));
        t1 = bisect(60.0, 20_000.0, STRETCH_TARGET, |t| echo_stretch(sigma, tau_c, t));
        println!(
            "round {:2}: sigma = {:.6} MHz, tau_c = {:.4} ns, t1 = {:.4} ns",
            round, sigma, tau_c, t1
        );
    }

    println!();
    println!("calibrated: sigma = {:.6} MHz, tau_c = {:.3} ns, t1 = {:.3} ns", sigma, tau_c, t1);
    println!("fid gaussian tau  = {:.4} ns (target {})", fid_tau(sigma, tau_c, t1), FID_TARGET_NS);
    println!("echo gaussian tau = {:.4} ns (target {})", echo_tau(sigma, tau_c, t1), ECHO_TARGET_NS);
    println!("echo stretch      = {:.4}    (target {})", echo_stretch(sigma, tau_c, t1), STRETCH_TARGET);

    // multipulse decay times under the calibrated triple
    let noise = NoiseModel::ornstein_uhlenbeck(sigma, tau_c)
        .unwrap()
        .with_t1(t1)
        .unwrap();
    for n_pi in [1usize, 2, 4, 8] {
        let t = linspace(0.0, 900.0, 46);
        let y: Vec<f64> = t
            .iter()
            .map(|&ti| {
                0.5 * (1.0
                    + analytic_coherence(&noise, CoherenceSequence::Cpmg(n_pi), ti).unwrap())
            })
            .collect();
        let tau = fit_xy(&t, &y, None, ModelKind::GaussianDecay, None)
            .unwrap()
            .model
            .tau_ns();
        println!("train of {} refocusing pulses: 1/e time = {:.2} ns", n_pi, tau);
    }
}
