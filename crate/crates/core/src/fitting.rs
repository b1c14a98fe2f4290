//! Nonlinear least-squares fitting of decay and oscillation models.
//!
//! The minimizer is a damped Gauss-Newton iteration with Marquardt scaling:
//! steps solve `(J'J + lambda diag(J'J)) step = J' r` and the damping grows
//! until a step no longer increases the residual, so accepted residual
//! norms are non-increasing by construction. Jacobians are analytic.
//!
//! Times are ns and frequencies MHz, matching the rest of the crate, so the
//! oscillatory model advances its phase by `2 pi f t 1e-3`.

use nalgebra::{DMatrix, DVector};

use crate::constants::MHZ_NS_CYCLES;
use crate::signal::Signal;
use crate::{Error, Result};

/// Model families for coherence decays and driven oscillations.
///
/// Parameter layout (in order):
/// - `ExpCosine`: amplitude, offset, tau_ns, freq_mhz, phase_rad
/// - `GaussianDecay` / `ExpDecay`: amplitude, offset, tau_ns
/// - `StretchedExp`: amplitude, offset, tau_ns, stretch
///
/// `tau_ns` is the 1/e time of the envelope in every family, so decay times
/// read off different fits are directly comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    ExpCosine,
    GaussianDecay,
    ExpDecay,
    StretchedExp,
}

/// Lower bound of the stretch exponent.
pub const STRETCH_MIN: f64 = 0.5;
/// Upper bound of the stretch exponent.
pub const STRETCH_MAX: f64 = 4.0;

impl ModelKind {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::ExpCosine => &["amplitude", "offset", "tau_ns", "freq_mhz", "phase_rad"],
            ModelKind::GaussianDecay | ModelKind::ExpDecay => &["amplitude", "offset", "tau_ns"],
            ModelKind::StretchedExp => &["amplitude", "offset", "tau_ns", "stretch"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.parameter_names().len()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ExpCosine => "exp_cosine",
            ModelKind::GaussianDecay => "gaussian_decay",
            ModelKind::ExpDecay => "exp_decay",
            ModelKind::StretchedExp => "stretched_exp",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exp_cosine" => Ok(ModelKind::ExpCosine),
            "gaussian_decay" => Ok(ModelKind::GaussianDecay),
            "exp_decay" => Ok(ModelKind::ExpDecay),
            "stretched_exp" => Ok(ModelKind::StretchedExp),
            other => Err(Error::invalid(format!("unknown model kind '{}'", other))),
        }
    }
}

/// A model family with concrete parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayModel {
    pub kind: ModelKind,
    params: Vec<f64>,
}

impl DecayModel {
    pub fn new(kind: ModelKind, params: Vec<f64>) -> Result<Self> {
        if params.len() != kind.n_params() {
            return Err(Error::invalid(format!(
                "{} takes {} parameters, got {}",
                kind.name(),
                kind.n_params(),
                params.len()
            )));
        }
        let model = DecayModel { kind, params };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.tau_ns() <= 0.0 {
            return Err(Error::invalid("decay time must be positive"));
        }
        if self.kind == ModelKind::StretchedExp {
            let p = self.params[3];
            if !(STRETCH_MIN..=STRETCH_MAX).contains(&p) {
                return Err(Error::invalid(format!(
                    "stretch exponent must lie in [{}, {}]",
                    STRETCH_MIN, STRETCH_MAX
                )));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn amplitude(&self) -> f64 {
        self.params[0]
    }

    pub fn offset(&self) -> f64 {
        self.params[1]
    }

    /// 1/e time of the envelope.
    pub fn tau_ns(&self) -> f64 {
        self.params[2]
    }

    pub fn freq_mhz(&self) -> Option<f64> {
        (self.kind == ModelKind::ExpCosine).then(|| self.params[3])
    }

    pub fn phase_rad(&self) -> Option<f64> {
        (self.kind == ModelKind::ExpCosine).then(|| self.params[4])
    }

    pub fn stretch(&self) -> Option<f64> {
        (self.kind == ModelKind::StretchedExp).then(|| self.params[3])
    }

    /// Model value at `t_ns >= 0`.
    pub fn eval(&self, t_ns: f64) -> f64 {
        eval_raw(self.kind, &self.params, t_ns)
    }

    /// Analytic partial derivatives with respect to each parameter.
    pub fn gradient(&self, t_ns: f64) -> Vec<f64> {
        gradient_raw(self.kind, &self.params, t_ns)
    }
}

/// Free-function form of [`DecayModel::eval`].
pub fn eval_model(model: &DecayModel, t_ns: f64) -> f64 {
    model.eval(t_ns)
}

fn eval_raw(kind: ModelKind, p: &[f64], t: f64) -> f64 {
    match kind {
        ModelKind::ExpCosine => {
            let (a, c, tau, f, phi) = (p[0], p[1], p[2], p[3], p[4]);
            c + a * (-t / tau).exp()
                * (2.0 * std::f64::consts::PI * f * t * MHZ_NS_CYCLES + phi).cos()
        }
        ModelKind::GaussianDecay => p[1] + p[0] * (-(t / p[2]) * (t / p[2])).exp(),
        ModelKind::ExpDecay => p[1] + p[0] * (-t / p[2]).exp(),
        ModelKind::StretchedExp => p[1] + p[0] * (-(t / p[2]).powf(p[3])).exp(),
    }
}

fn gradient_raw(kind: ModelKind, p: &[f64], t: f64) -> Vec<f64> {
    match kind {
        ModelKind::ExpCosine => {
            let (a, _c, tau, f, phi) = (p[0], p[1], p[2], p[3], p[4]);
            let e = (-t / tau).exp();
            let arg = 2.0 * std::f64::consts::PI * f * t * MHZ_NS_CYCLES + phi;
            let (s, c_) = arg.sin_cos();
            vec![
                e * c_,
                1.0,
                a * e * c_ * t / (tau * tau),
                -a * e * s * 2.0 * std::f64::consts::PI * t * MHZ_NS_CYCLES,
                -a * e * s,
            ]
        }
        ModelKind::GaussianDecay => {
            let (a, _c, tau) = (p[0], p[1], p[2]);
            let u = t / tau;
            let g = (-u * u).exp();
            vec![g, 1.0, a * g * 2.0 * t * t / (tau * tau * tau)]
        }
        ModelKind::ExpDecay => {
            let (a, _c, tau) = (p[0], p[1], p[2]);
            let e = (-t / tau).exp();
            vec![e, 1.0, a * e * t / (tau * tau)]
        }
        ModelKind::StretchedExp => {
            let (a, _c, tau, q) = (p[0], p[1], p[2], p[3]);
            let u = t / tau;
            let s = u.powf(q);
            let g = (-s).exp();
            // s ln(u) -> 0 as t -> 0 for q > 0
            let dlog = if s == 0.0 { 0.0 } else { s * u.ln() };
            vec![g, 1.0, a * g * q * s / tau, -a * g * dlog]
        }
    }
}

/// Jacobian of the model over a time grid; row per point, column per
/// parameter in declaration order.
pub fn jacobian(model: &DecayModel, t_grid: &[f64]) -> DMatrix<f64> {
    let k = model.kind.n_params();
    let mut j = DMatrix::zeros(t_grid.len(), k);
    for (i, &t) in t_grid.iter().enumerate() {
        let g = model.gradient(t);
        for (col, val) in g.into_iter().enumerate() {
            j[(i, col)] = val;
        }
    }
    j
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: DecayModel,
    /// Parameter covariance estimate `s^2 (J'J)^-1` with `s^2` the reduced
    /// chi-square; symmetric positive-semidefinite.
    pub covariance: DMatrix<f64>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    /// One-sigma uncertainties, the square roots of the covariance diagonal.
    pub fn uncertainties(&self) -> Vec<f64> {
        self.covariance
            .diagonal()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }
}

/// Fits `signal` with unit weights. `initial_guess` overrides the automatic
/// starting point; it must have the model's parameter count.
pub fn fit(signal: &Signal, kind: ModelKind, initial_guess: Option<&[f64]>) -> Result<FitResult> {
    fit_xy(signal.x(), signal.y(), None, kind, initial_guess)
}

/// Fits with per-point weights multiplying the squared residuals.
pub fn fit_weighted(
    signal: &Signal,
    weights: &[f64],
    kind: ModelKind,
    initial_guess: Option<&[f64]>,
) -> Result<FitResult> {
    fit_xy(signal.x(), signal.y(), Some(weights), kind, initial_guess)
}

/// Workhorse fit on raw arrays. `x` must be non-negative and strictly
/// increasing with at least `2 + n_params` points.
pub fn fit_xy(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    kind: ModelKind,
    initial_guess: Option<&[f64]>,
) -> Result<FitResult> {
    let k = kind.n_params();
    if x.len() != y.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if x.len() < k + 2 {
        return Err(Error::invalid(format!(
            "{} needs at least {} points, got {}",
            kind.name(),
            k + 2,
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("times must be finite and non-negative"));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    let sqrt_w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != x.len() {
                return Err(Error::invalid("weight length differs from data length"));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("weights must be non-negative"));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
        None => vec![1.0; x.len()],
    };

    let mut params = match initial_guess {
        Some(g) => {
            if g.len() != k {
                return Err(Error::invalid(format!(
                    "initial guess needs {} parameters",
                    k
                )));
            }
            DecayModel::new(kind, g.to_vec())?.params
        }
        None => auto_guess(kind, x, y),
    };

    let residual_vec = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(y)
                .zip(&sqrt_w)
                .map(|((&t, &yi), &sw)| sw * (yi - eval_raw(kind, p, t))),
        )
    };

    let mut residual = residual_vec(&params);
    let mut ssr = residual.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    // A residual at the machine noise floor of non-constant data is an exact
    // interpolation: that counts as converged even when a flat-envelope
    // direction (an undamped cosine's decay time) leaves the normal
    // equations rank-deficient. Constant data stays excluded so degenerate
    // inputs keep reporting failure.
    let data_ssr: f64 = y.iter().zip(&sqrt_w).map(|(yi, sw)| (sw * yi) * (sw * yi)).sum();
    let y_spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let interpolating = |ssr: f64| y_spread > 0.0 && ssr <= data_ssr * 1e-24;
    let mut converged_exact = interpolating(ssr);

    for _ in 0..300 {
        if converged_exact {
            break;
        }
        iterations += 1;
        // weighted Jacobian at the current point
        let mut j = DMatrix::zeros(x.len(), k);
        for (i, &t) in x.iter().enumerate() {
            let g = gradient_raw(kind, &params, t);
            for (col, val) in g.into_iter().enumerate() {
                j[(i, col)] = sqrt_w[i] * val;
            }
        }
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &residual;

        let mut stepped = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for d in 0..k {
                // Marquardt scaling keeps the damping meaningful across
                // parameters of very different magnitudes.
                let scale = jtj[(d, d)];
                damped[(d, d)] = scale + lambda * scale.max(1e-300);
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => {
                    lambda *= 5.0;
                    continue;
                }
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(p, s)| p + s)
                .collect();
            if !trial_is_admissible(kind, &trial) {
                lambda *= 5.0;
                continue;
            }
            let trial_residual = residual_vec(&trial);
            let trial_ssr = trial_residual.norm_squared();
            if trial_ssr <= ssr {
                let rel_step = params
                    .iter()
                    .zip(step.iter())
                    .map(|(p, s)| s.abs() / p.abs().max(1e-30))
                    .fold(0.0f64, f64::max);
                let rel_drop = (ssr - trial_ssr) / ssr.max(1e-300);
                params = trial;
                residual = trial_residual;
                ssr = trial_ssr;
                lambda = (lambda / 5.0).max(1e-14);
                stepped = true;
                if rel_step < 1e-8 || rel_drop < 1e-10 {
                    converged = true;
                }
                if interpolating(ssr) {
                    converged_exact = true;
                }
                break;
            }
            lambda *= 5.0;
        }
        if converged || !stepped {
            break;
        }
    }

    let model = DecayModel {
        kind,
        params: params.clone(),
    };
    let (covariance, identifiable) = covariance_estimate(kind, &params, x, &sqrt_w, ssr);
    Ok(FitResult {
        model,
        covariance,
        residual_norm: ssr.sqrt(),
        // a minimum with rank-deficient normal equations leaves parameters
        // undetermined (e.g. the decay time of a zero-amplitude component),
        // unless the fit interpolates the data exactly
        converged: (converged && identifiable) || converged_exact,
        iterations,
    })
}

fn trial_is_admissible(kind: ModelKind, p: &[f64]) -> bool {
    if p.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if p[2] <= 0.0 {
        return false;
    }
    if kind == ModelKind::StretchedExp && !(STRETCH_MIN..=STRETCH_MAX).contains(&p[3]) {
        return false;
    }
    true
}

fn covariance_estimate(
    kind: ModelKind,
    params: &[f64],
    x: &[f64],
    sqrt_w: &[f64],
    ssr: f64,
) -> (DMatrix<f64>, bool) {
    let k = kind.n_params();
    let mut j = DMatrix::zeros(x.len(), k);
    for (i, &t) in x.iter().enumerate() {
        let g = gradient_raw(kind, params, t);
        for (col, val) in g.into_iter().enumerate() {
            j[(i, col)] = sqrt_w[i] * val;
        }
    }
    let jtj = j.transpose() * &j;
    let dof = x.len().saturating_sub(k).max(1) as f64;
    let s2 = ssr / dof;
    let eig = jtj.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let min_eig = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    if max_eig <= 0.0 || min_eig <= max_eig * 1e-12 {
        return (DMatrix::zeros(k, k), false);
    }
    // invert through the eigendecomposition so the result is symmetric
    // positive-definite by construction
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| s2 / v));
    let cov = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    ((&cov + cov.transpose()) * 0.5, true)
}

/// Starting point from the data: amplitude and offset from the data range,
/// frequency from the dominant discrete-spectrum peak, decay time from the
/// first 1/e crossing of the envelope.
fn auto_guess(kind: ModelKind, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let span = (x[n - 1] - x[0]).max(1e-9);
    match kind {
        ModelKind::ExpCosine => {
            let c = y.iter().sum::<f64>() / n as f64;
            let (min, max) = y
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let a = 0.5 * (max - min);
            let (freq, phase) = dominant_frequency(x, y, c);
            vec![a, c, span / 2.0, freq, phase]
        }
        _ => {
            // offset from the tail, where a decay has settled
            let tail = n.div_ceil(10).max(1);
            let c = y[n - tail..].iter().sum::<f64>() / tail as f64;
            let a = y[0] - c;
            let target = a.abs() / std::f64::consts::E;
            let tau = x
                .iter()
                .zip(y)
                .find(|(_, &yi)| (yi - c).abs() <= target)
                .map(|(&t, _)| t)
                .filter(|&t| t > 0.0)
                .unwrap_or(span / 2.0);
            let mut g = vec![if a == 0.0 { 1e-12 } else { a }, c, tau];
            if kind == ModelKind::StretchedExp {
                g.push(2.0);
            }
            g
        }
    }
}

/// Peak of the discrete spectrum of `y - c` on a (near-)uniform grid,
/// returning (frequency in MHz, phase in radians).
fn dominant_frequency(x: &[f64], y: &[f64], c: f64) -> (f64, f64) {
    let n = x.len();
    let dt = (x[n - 1] - x[0]) / (n - 1) as f64;
    let mut best = (0.0, 0.0, 0.0);
    for k in 1..=n / 2 {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &yi) in y.iter().enumerate() {
            let (s, co) = (omega * i as f64).sin_cos();
            re += (yi - c) * co;
            im -= (yi - c) * s;
        }
        let power = re * re + im * im;
        if power > best.0 {
            // frequency in MHz for t in ns
            let freq = k as f64 / (n as f64 * dt) / MHZ_NS_CYCLES;
            best = (power, freq, im.atan2(re));
        }
    }
    (best.1, best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        crate::linspace(0.0, t_max, n)
    }

    #[test]
    fn model_values_at_reference_points() {
        let g = DecayModel::new(ModelKind::GaussianDecay, vec![1.0, 0.0, 194.0]).unwrap();
        assert_relative_eq!(g.eval(194.0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(g.eval(0.0), 1.0, epsilon = 1e-15);

        let e = DecayModel::new(
            ModelKind::ExpCosine,
            vec![0.4, 0.5, 150.0, 10.0, 0.0],
        )
        .unwrap();
        assert_relative_eq!(e.eval(0.0), 0.9, epsilon = 1e-15);
        // half an oscillation period of a 10 MHz cosine is 50 ns
        assert_relative_eq!(
            e.eval(50.0),
            0.5 - 0.4 * (-50.0f64 / 150.0).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn special_cases_of_the_stretched_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = rng.random_range(0.1..2.0);
            let c = rng.random_range(-1.0..1.0);
            let tau = rng.random_range(10.0..500.0);
            let t = rng.random_range(0.0..800.0);
            let gauss = DecayModel::new(ModelKind::GaussianDecay, vec![a, c, tau]).unwrap();
            let s2 = DecayModel::new(ModelKind::StretchedExp, vec![a, c, tau, 2.0]).unwrap();
            assert_relative_eq!(gauss.eval(t), s2.eval(t), epsilon = 1e-12);
            let exp = DecayModel::new(ModelKind::ExpDecay, vec![a, c, tau]).unwrap();
            let s1 = DecayModel::new(ModelKind::StretchedExp, vec![a, c, tau, 1.0]).unwrap();
            assert_relative_eq!(exp.eval(t), s1.eval(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let models = [
            DecayModel::new(ModelKind::ExpCosine, vec![0.45, 0.5, 120.0, 12.0, 0.7]).unwrap(),
            DecayModel::new(ModelKind::GaussianDecay, vec![0.8, 0.1, 200.0]).unwrap(),
            DecayModel::new(ModelKind::ExpDecay, vec![-0.6, 0.9, 80.0]).unwrap(),
            DecayModel::new(ModelKind::StretchedExp, vec![0.7, 0.2, 150.0, 1.7]).unwrap(),
        ];
        for model in &models {
            for _ in 0..20 {
                let t = rng.random_range(0.1..600.0);
                let grad = model.gradient(t);
                for (idx, g) in grad.iter().enumerate() {
                    let h = 1e-5 * model.params()[idx].abs().max(1e-3);
                    let mut hi = model.params().to_vec();
                    let mut lo = hi.clone();
                    hi[idx] += h;
                    lo[idx] -= h;
                    let fd = (eval_raw(model.kind, &hi, t) - eval_raw(model.kind, &lo, t))
                        / (2.0 * h);
                    let scale = g.abs().max(fd.abs()).max(1e-8);
                    assert!(
                        (g - fd).abs() / scale < 1e-6,
                        "{} param {} at t={}: {} vs {}",
                        model.kind.name(),
                        idx,
                        t,
                        g,
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_matrix_matches_gradients() {
        let model = DecayModel::new(ModelKind::GaussianDecay, vec![0.5, 0.5, 194.0]).unwrap();
        let t = grid(9, 400.0);
        let j = jacobian(&model, &t);
        assert_eq!(j.nrows(), 9);
        assert_eq!(j.ncols(), 3);
        for (i, &ti) in t.iter().enumerate() {
            let g = model.gradient(ti);
            for col in 0..3 {
                assert_relative_eq!(j[(i, col)], g[col], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn noiseless_oscillation_is_recovered_from_auto_guess() {
        let truth =
            DecayModel::new(ModelKind::ExpCosine, vec![0.5, 0.5, 150.0, 10.0, 0.4]).unwrap();
        let x = grid(120, 600.0);
        let y: Vec<f64> = x.iter().map(|&t| truth.eval(t)).collect();
        let fitres = fit_xy(&x, &y, None, ModelKind::ExpCosine, None).unwrap();
        assert!(fitres.converged);
        for (got, want) in fitres.model.params().iter().zip(truth.params()) {
            assert!(
                ((got - want) / want).abs() < 1e-6,
                "{} vs {}",
                got,
                want
            );
        }
    }

    #[test]
    fn noisy_gaussian_decay_time_within_three_percent() {
        let truth = DecayModel::new(ModelKind::GaussianDecay, vec![0.5, 0.5, 194.0]).unwrap();
        let x = grid(50, 500.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| truth.eval(t) + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fitres = fit_xy(&x, &y, None, ModelKind::GaussianDecay, None).unwrap();
        assert!(fitres.converged);
        assert!(
            (fitres.model.tau_ns() - 194.0).abs() / 194.0 < 0.03,
            "tau {}",
            fitres.model.tau_ns()
        );
        // covariance is symmetric positive-semidefinite
        let cov = &fitres.covariance;
        assert_eq!(cov.clone(), cov.transpose());
        let eig = cov.clone().symmetric_eigen();
        for v in eig.eigenvalues.iter() {
            assert!(*v >= -1e-12);
        }
        let sigmas = fitres.uncertainties();
        assert!(sigmas.iter().all(|s| *s > 0.0 && s.is_finite()));
    }

    #[test]
    fn scaling_data_scales_only_the_linear_parameters() {
        let truth = DecayModel::new(ModelKind::StretchedExp, vec![0.5, 0.5, 194.0, 2.0]).unwrap();
        let x = grid(60, 500.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| truth.eval(t) + 0.005 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let scaled: Vec<f64> = y.iter().map(|v| 4.0 * v).collect();
        let a = fit_xy(&x, &y, None, ModelKind::StretchedExp, None).unwrap();
        let b = fit_xy(&x, &scaled, None, ModelKind::StretchedExp, None).unwrap();
        // powers of two scale exactly in floating point
        assert_eq!(b.model.amplitude(), 4.0 * a.model.amplitude());
        assert_eq!(b.model.offset(), 4.0 * a.model.offset());
        assert_eq!(b.model.tau_ns(), a.model.tau_ns());
        assert_eq!(b.model.stretch(), a.model.stretch());
    }

    #[test]
    fn constant_data_reports_non_convergence() {
        let x = grid(30, 300.0);
        let y = vec![0.7; 30];
        let fitres = fit_xy(&x, &y, None, ModelKind::GaussianDecay, None).unwrap();
        assert!(!fitres.converged);
    }

    #[test]
    fn an_undamped_cosine_converges_with_exact_frequency() {
        // no decay on the window: the decay time is unidentifiable, but the
        // interpolating fit still converges and pins the frequency
        let x = grid(121, 300.0);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| 0.5 - 0.5 * (2.0 * PI * 10.0 * t * 1e-3).cos())
            .collect();
        let fitres = fit_xy(&x, &y, None, ModelKind::ExpCosine, None).unwrap();
        assert!(fitres.converged);
        assert_relative_eq!(fitres.model.freq_mhz().unwrap(), 10.0, epsilon = 1e-8);
        assert!(fitres.residual_norm < 1e-10);
    }

    #[test]
    fn insufficient_points_are_an_input_error() {
        let x = grid(4, 100.0);
        let y = vec![1.0, 0.9, 0.8, 0.7];
        assert!(fit_xy(&x, &y, None, ModelKind::GaussianDecay, None).is_err());
        assert!(fit_xy(&x[..3], &y[..3], None, ModelKind::GaussianDecay, None).is_err());
    }

    #[test]
    fn accepted_iterations_never_worsen_the_residual() {
        // final residual cannot exceed the starting residual of the guess
        let truth = DecayModel::new(ModelKind::ExpDecay, vec![0.9, 0.05, 60.0]).unwrap();
        let x = grid(40, 300.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| truth.eval(t) + 0.02 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let guess = vec![0.5, 0.0, 150.0];
        let start_ssr: f64 = x
            .iter()
            .zip(&y)
            .map(|(&t, &yi)| {
                let d = yi - eval_raw(ModelKind::ExpDecay, &guess, t);
                d * d
            })
            .sum();
        let fitres = fit_xy(&x, &y, None, ModelKind::ExpDecay, Some(&guess)).unwrap();
        assert!(fitres.residual_norm <= start_ssr.sqrt() + 1e-12);
        assert!(fitres.converged);
    }

    #[test]
    fn weights_silence_outliers() {
        let truth = DecayModel::new(ModelKind::ExpDecay, vec![1.0, 0.0, 100.0]).unwrap();
        let x = grid(30, 400.0);
        let mut y: Vec<f64> = x.iter().map(|&t| truth.eval(t)).collect();
        y[7] = 5.0;
        let mut w = vec![1.0; 30];
        w[7] = 0.0;
        let biased = fit_xy(&x, &y, None, ModelKind::ExpDecay, None).unwrap();
        let clean = fit_xy(&x, &y, Some(&w), ModelKind::ExpDecay, None).unwrap();
        assert!((clean.model.tau_ns() - 100.0).abs() < 1e-6);
        assert!((biased.model.tau_ns() - 100.0).abs() > 1.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let x = grid(10, 100.0);
        let y = vec![0.0; 10];
        assert!(fit_xy(&x, &y[..9], None, ModelKind::ExpDecay, None).is_err());
        assert!(fit_xy(&x, &y, Some(&[1.0; 9]), ModelKind::ExpDecay, None).is_err());
        assert!(fit_xy(&x, &y, None, ModelKind::ExpDecay, Some(&[1.0, 0.0])).is_err());
        let mut neg = x.clone();
        neg[0] = -1.0;
        assert!(fit_xy(&neg, &y, None, ModelKind::ExpDecay, None).is_err());
        assert!(DecayModel::new(ModelKind::StretchedExp, vec![1.0, 0.0, 10.0, 5.0]).is_err());
        assert!(DecayModel::new(ModelKind::ExpDecay, vec![1.0, 0.0, -10.0]).is_err());
        assert!(ModelKind::from_name("lorentzian").is_err());
        assert_eq!(
            ModelKind::from_name("gaussian_decay").unwrap(),
            ModelKind::GaussianDecay
        );
    }

    #[test]
    fn quasi_static_free_induction_has_gaussian_character() {
        // the analytic envelope is exactly a Gaussian in disguise
        let sigma_angular = 2.0 * std::f64::consts::PI * 5.77e-3;
        let x = grid(60, 120.0);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| 0.5 * (1.0 + (-0.5 * sigma_angular * sigma_angular * t * t).exp()))
            .collect();
        let fitres = fit_xy(&x, &y, None, ModelKind::StretchedExp, None).unwrap();
        assert!(fitres.converged);
        let p = fitres.model.stretch().unwrap();
        assert!((1.8..=2.2).contains(&p), "stretch {}", p);
        assert_relative_eq!(
            fitres.model.tau_ns(),
            std::f64::consts::SQRT_2 / sigma_angular,
            max_relative = 1e-6
        );
    }
}
