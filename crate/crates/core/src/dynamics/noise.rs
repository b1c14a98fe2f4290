//! Stochastic detuning models for the Monte Carlo engine.
//!
//! Both noise kinds are Gaussian processes over the detuning in MHz. The
//! quasi-static model draws one value per trajectory; the
//! Ornstein-Uhlenbeck model has stationary standard deviation `sigma_mhz`
//! and exponential correlation time `tau_c_ns`, so it interpolates between
//! the quasi-static limit (tau_c much longer than the sequence) and
//! motionally narrowed noise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// The detuning process driving dephasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    QuasiStaticGaussian { sigma_mhz: f64 },
    OrnsteinUhlenbeck { sigma_mhz: f64, tau_c_ns: f64 },
}

/// Dephasing noise plus optional longitudinal relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Longitudinal relaxation time; `None` means no relaxation.
    pub t1_ns: Option<f64>,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            t1_ns: None,
        }
    }

    pub fn quasi_static(sigma_mhz: f64) -> Result<Self> {
        let model = NoiseModel {
            kind: NoiseKind::QuasiStaticGaussian { sigma_mhz },
            t1_ns: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn ornstein_uhlenbeck(sigma_mhz: f64, tau_c_ns: f64) -> Result<Self> {
        let model = NoiseModel {
            kind: NoiseKind::OrnsteinUhlenbeck { sigma_mhz, tau_c_ns },
            t1_ns: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Adds longitudinal relaxation; an infinite time means none.
    pub fn with_t1(mut self, t1_ns: f64) -> Result<Self> {
        if !(t1_ns > 0.0) {
            return Err(Error::invalid("T1 must be positive"));
        }
        self.t1_ns = if t1_ns.is_finite() { Some(t1_ns) } else { None };
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::None => {}
            NoiseKind::QuasiStaticGaussian { sigma_mhz } => {
                if !(sigma_mhz.is_finite() && sigma_mhz >= 0.0) {
                    return Err(Error::invalid("noise sigma must be non-negative"));
                }
            }
            NoiseKind::OrnsteinUhlenbeck { sigma_mhz, tau_c_ns } => {
                if !(sigma_mhz.is_finite() && sigma_mhz >= 0.0) {
                    return Err(Error::invalid("noise sigma must be non-negative"));
                }
                if !(tau_c_ns.is_finite() && tau_c_ns > 0.0) {
                    return Err(Error::invalid("correlation time must be positive"));
                }
            }
        }
        if let Some(t1) = self.t1_ns {
            if !(t1.is_finite() && t1 > 0.0) {
                return Err(Error::invalid("T1 must be positive"));
            }
        }
        Ok(())
    }

    /// Whether trajectories differ from one another.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self.kind, NoiseKind::None)
    }

    /// Shipped defaults for the cerium electron-spin bath, chosen by the
    /// calibration described in the crate docs: sigma is bisected until the
    /// free-induction fit returns a 39 ns decay time, the correlation time
    /// and T1 until the two-pulse-echo fit returns 194 ns with a Gaussian-
    /// like stretch exponent.
    pub fn calibrated_default() -> Self {
        NoiseModel {
            kind: NoiseKind::OrnsteinUhlenbeck {
                sigma_mhz: DEFAULT_SIGMA_MHZ,
                tau_c_ns: DEFAULT_TAU_C_NS,
            },
            t1_ns: Some(DEFAULT_T1_NS),
        }
    }
}

/// Calibrated rms detuning of the default bath (`examples/calibrate.rs`).
pub const DEFAULT_SIGMA_MHZ: f64 = 5.54885;
/// Calibrated correlation time of the default bath.
pub const DEFAULT_TAU_C_NS: f64 = 1258.56;
/// Calibrated longitudinal relaxation of the default bath.
pub const DEFAULT_T1_NS: f64 = 206.366;

/// One trajectory's detuning process, stepped by the engine.
#[derive(Debug, Clone, Copy)]
pub(crate) enum DetuningProcess {
    Static(f64),
    Ou { x: f64, sigma: f64, tau: f64 },
}

impl DetuningProcess {
    /// Draws the initial (stationary) value.
    pub fn init<R: Rng + ?Sized>(kind: &NoiseKind, rng: &mut R) -> Self {
        match *kind {
            NoiseKind::None => DetuningProcess::Static(0.0),
            NoiseKind::QuasiStaticGaussian { sigma_mhz } => {
                let g: f64 = rng.sample(StandardNormal);
                DetuningProcess::Static(sigma_mhz * g)
            }
            NoiseKind::OrnsteinUhlenbeck { sigma_mhz, tau_c_ns } => {
                let g: f64 = rng.sample(StandardNormal);
                DetuningProcess::Ou {
                    x: sigma_mhz * g,
                    sigma: sigma_mhz,
                    tau: tau_c_ns,
                }
            }
        }
    }

    /// Advances the process by `dt_ns` using the exact conditional law
    /// `x' = x e^(-dt/tau) + sigma sqrt(1 - e^(-2 dt/tau)) xi`, so any step
    /// size preserves the stationary distribution.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt_ns: f64, rng: &mut R) {
        if let DetuningProcess::Ou { x, sigma, tau } = self {
            let decay = (-dt_ns / *tau).exp();
            let g: f64 = rng.sample(StandardNormal);
            *x = *x * decay + *sigma * (1.0 - decay * decay).sqrt() * g;
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            DetuningProcess::Static(x) => *x,
            DetuningProcess::Ou { x, .. } => *x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(NoiseModel::quasi_static(-1.0).is_err());
        assert!(NoiseModel::quasi_static(f64::NAN).is_err());
        assert!(NoiseModel::ornstein_uhlenbeck(1.0, 0.0).is_err());
        assert!(NoiseModel::ornstein_uhlenbeck(1.0, -5.0).is_err());
        assert!(NoiseModel::none().with_t1(0.0).is_err());
        assert!(NoiseModel::none().with_t1(-1.0).is_err());
        assert!(NoiseModel::quasi_static(0.0).is_ok());
    }

    #[test]
    fn infinite_t1_means_no_relaxation() {
        let m = NoiseModel::none().with_t1(f64::INFINITY).unwrap();
        assert_eq!(m.t1_ns, None);
        let m = NoiseModel::none().with_t1(100.0).unwrap();
        assert_eq!(m.t1_ns, Some(100.0));
    }

    #[test]
    fn ou_path_is_stationary_with_correct_statistics() {
        let sigma = 3.0;
        let tau = 50.0;
        let dt = 10.0;
        let kind = NoiseKind::OrnsteinUhlenbeck {
            sigma_mhz: sigma,
            tau_c_ns: tau,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = DetuningProcess::init(&kind, &mut rng);
        let n = 200_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(p.value());
            p.advance(dt, &mut rng);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let lag1 = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!(mean.abs() < 0.05, "mean {}", mean);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "var {}", var);
        let expected_rho = (-dt / tau).exp();
        assert!(
            (lag1 / var - expected_rho).abs() < 0.02,
            "autocorrelation {} vs {}",
            lag1 / var,
            expected_rho
        );
    }

    #[test]
    fn huge_steps_keep_the_stationary_variance() {
        let kind = NoiseKind::OrnsteinUhlenbeck {
            sigma_mhz: 2.0,
            tau_c_ns: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = DetuningProcess::init(&kind, &mut rng);
        let mut sum2 = 0.0;
        let n = 100_000;
        for _ in 0..n {
            p.advance(500.0, &mut rng);
            sum2 += p.value() * p.value();
        }
        let var = sum2 / n as f64;
        assert!((var / 4.0 - 1.0).abs() < 0.02, "var {}", var);
    }

    #[test]
    fn quasi_static_draw_is_frozen_within_a_trajectory() {
        let kind = NoiseKind::QuasiStaticGaussian { sigma_mhz: 4.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = DetuningProcess::init(&kind, &mut rng);
        let first = p.value();
        for _ in 0..10 {
            p.advance(100.0, &mut rng);
            assert_eq!(p.value(), first);
        }

        // across trajectories the draws have the right spread
        let mut sum2 = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let p = DetuningProcess::init(&kind, &mut rng);
            sum2 += p.value() * p.value();
        }
        assert!((sum2 / n as f64 / 16.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn same_seed_gives_the_same_path() {
        let kind = NoiseKind::OrnsteinUhlenbeck {
            sigma_mhz: 1.0,
            tau_c_ns: 30.0,
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut p = DetuningProcess::init(&kind, &mut rng);
            let mut path = Vec::new();
            for _ in 0..50 {
                p.advance(3.0, &mut rng);
                path.push(p.value());
            }
            path
        };
        assert_eq!(run(), run());
    }
}
