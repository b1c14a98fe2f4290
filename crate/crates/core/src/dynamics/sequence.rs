//! Pulse-sequence descriptions and the standard coherence-measurement
//! templates.
//!
//! A sequence is an ordered list of drive and delay elements. Durations are
//! either fixed or tied to a single swept value; `realize` pins the sweep to
//! one setting and returns concrete elements the engine can integrate. With
//! `ideal_pulses` set, the engine replaces every drive element by an
//! instantaneous rotation of the same total angle, which is the limit the
//! closed-form coherence oracles assume.

use crate::dynamics::state::ReadoutAxis;
use crate::{Error, Result};

/// What happens during one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementKind {
    /// Resonant drive of the stated Rabi frequency and phase.
    Drive { rabi_mhz: f64, phase_rad: f64 },
    /// Free evolution.
    Delay,
}

/// How long an element lasts.
///
/// Under a duration sweep, `Swept { scale }` means `scale` times the swept
/// value. Under a repetition sweep the swept elements mark the repeated
/// block and `scale` is the element's duration in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementDuration {
    Fixed(f64),
    Swept { scale: f64 },
}

/// One element of a sweepable sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceElement {
    pub kind: ElementKind,
    pub duration: ElementDuration,
    /// Static detuning added to whatever the noise process produces.
    pub detuning_offset_mhz: f64,
}

/// An element with its duration resolved to a concrete length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseElement {
    pub kind: ElementKind,
    pub duration_ns: f64,
    pub detuning_offset_mhz: f64,
}

/// What the single swept parameter is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Swept durations scale with the sweep value (ns).
    Duration,
    /// The block of swept elements repeats; the sweep value is the 1-based
    /// repetition count.
    Repetition,
}

/// A sweepable pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<SequenceElement>,
    pub sweep: SweepKind,
    pub readout_axis: ReadoutAxis,
    /// Replace finite drive segments by instantaneous rotations.
    pub ideal_pulses: bool,
}

impl PulseSequence {
    /// Checks element parameters and that exactly one sweep is expressible:
    /// at least one element must reference the swept value.
    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("sequence has no elements"));
        }
        for el in &self.elements {
            let dur_ok = match el.duration {
                ElementDuration::Fixed(t) => t.is_finite() && t >= 0.0,
                ElementDuration::Swept { scale } => scale.is_finite() && scale > 0.0,
            };
            if !dur_ok {
                return Err(Error::invalid("element duration must be non-negative"));
            }
            if !el.detuning_offset_mhz.is_finite() {
                return Err(Error::invalid("detuning offset must be finite"));
            }
            if let ElementKind::Drive { rabi_mhz, phase_rad } = el.kind {
                if !(rabi_mhz.is_finite() && rabi_mhz >= 0.0) {
                    return Err(Error::invalid("drive Rabi frequency must be non-negative"));
                }
                if !phase_rad.is_finite() {
                    return Err(Error::invalid("drive phase must be finite"));
                }
            }
        }
        if !self
            .elements
            .iter()
            .any(|el| matches!(el.duration, ElementDuration::Swept { .. }))
        {
            return Err(Error::invalid("sequence has no swept element"));
        }
        Ok(())
    }

    fn swept_span(&self) -> (usize, usize) {
        let first = self
            .elements
            .iter()
            .position(|el| matches!(el.duration, ElementDuration::Swept { .. }))
            .expect("validated sequence has a swept element");
        let last = self
            .elements
            .iter()
            .rposition(|el| matches!(el.duration, ElementDuration::Swept { .. }))
            .expect("validated sequence has a swept element");
        (first, last)
    }

    /// Resolves the sequence at one sweep setting: the swept duration in ns
    /// for duration sweeps, the repetition count for repetition sweeps.
    pub fn realize(&self, setting: f64) -> Result<Vec<PulseElement>> {
        self.validate()?;
        match self.sweep {
            SweepKind::Duration => {
                if !(setting.is_finite() && setting >= 0.0) {
                    return Err(Error::invalid("swept duration must be non-negative"));
                }
                Ok(self
                    .elements
                    .iter()
                    .map(|el| PulseElement {
                        kind: el.kind,
                        duration_ns: match el.duration {
                            ElementDuration::Fixed(t) => t,
                            ElementDuration::Swept { scale } => scale * setting,
                        },
                        detuning_offset_mhz: el.detuning_offset_mhz,
                    })
                    .collect())
            }
            SweepKind::Repetition => {
                let reps = setting.round();
                if !(reps.is_finite() && reps >= 1.0 && (setting - reps).abs() < 1e-9) {
                    return Err(Error::invalid("repetition setting must be a positive count"));
                }
                let (first, last) = self.swept_span();
                let fix = |el: &SequenceElement| PulseElement {
                    kind: el.kind,
                    duration_ns: match el.duration {
                        ElementDuration::Fixed(t) => t,
                        ElementDuration::Swept { scale } => scale,
                    },
                    detuning_offset_mhz: el.detuning_offset_mhz,
                };
                let mut out: Vec<PulseElement> = self.elements[..first].iter().map(fix).collect();
                for _ in 0..reps as usize {
                    out.extend(self.elements[first..=last].iter().map(fix));
                }
                out.extend(self.elements[last + 1..].iter().map(fix));
                Ok(out)
            }
        }
    }

    /// Wall-clock time of one repeated block, which maps repetition counts
    /// onto the time axis. Drive elements count as zero under ideal pulses.
    pub fn block_duration_ns(&self) -> Result<f64> {
        self.validate()?;
        if self.sweep != SweepKind::Repetition {
            return Err(Error::invalid("block duration applies to repetition sweeps"));
        }
        let (first, last) = self.swept_span();
        Ok(self.elements[first..=last]
            .iter()
            .map(|el| {
                if self.ideal_pulses && matches!(el.kind, ElementKind::Drive { .. }) {
                    return 0.0;
                }
                match el.duration {
                    ElementDuration::Fixed(t) => t,
                    ElementDuration::Swept { scale } => scale,
                }
            })
            .sum())
    }

    /// Total wall-clock duration at one setting, honoring `ideal_pulses`.
    pub fn total_duration_ns(&self, setting: f64) -> Result<f64> {
        Ok(self
            .realize(setting)?
            .iter()
            .map(|el| {
                if self.ideal_pulses && matches!(el.kind, ElementKind::Drive { .. }) {
                    0.0
                } else {
                    el.duration_ns
                }
            })
            .sum())
    }

    /// Serializes to ordered key = value pairs for a text config block.
    pub fn to_block(&self) -> Vec<(String, String)> {
        let axis = match self.readout_axis {
            ReadoutAxis::X => "x",
            ReadoutAxis::Y => "y",
            ReadoutAxis::Z => "z",
        };
        let sweep = match self.sweep {
            SweepKind::Duration => "duration",
            SweepKind::Repetition => "repetitions",
        };
        let mut out = vec![
            ("readout_axis".to_string(), axis.to_string()),
            ("ideal_pulses".to_string(), self.ideal_pulses.to_string()),
            ("sweep".to_string(), sweep.to_string()),
        ];
        for (i, el) in self.elements.iter().enumerate() {
            let dur = match el.duration {
                ElementDuration::Fixed(t) => format!("duration_ns={}", t),
                ElementDuration::Swept { scale } => format!("duration_ns=swept*{}", scale),
            };
            let body = match el.kind {
                ElementKind::Drive { rabi_mhz, phase_rad } => format!(
                    "drive {} rabi_mhz={} phase_rad={} detuning_mhz={}",
                    dur, rabi_mhz, phase_rad, el.detuning_offset_mhz
                ),
                ElementKind::Delay => {
                    format!("delay {} detuning_mhz={}", dur, el.detuning_offset_mhz)
                }
            };
            out.push((format!("element_{}", i + 1), body));
        }
        out
    }

    /// Parses the block format emitted by `to_block`. Unknown keys are
    /// rejected so config typos cannot silently change an experiment.
    pub fn from_block(pairs: &[(String, String)]) -> Result<Self> {
        let mut readout_axis = None;
        let mut ideal_pulses = None;
        let mut sweep = None;
        let mut elements: Vec<(usize, SequenceElement)> = Vec::new();
        for (key, value) in pairs {
            match key.as_str() {
                "readout_axis" => {
                    readout_axis = Some(match value.as_str() {
                        "x" => ReadoutAxis::X,
                        "y" => ReadoutAxis::Y,
                        "z" => ReadoutAxis::Z,
                        other => {
                            return Err(Error::config(format!(
                                "readout_axis must be x, y, or z, got '{}'",
                                other
                            )))
                        }
                    });
                }
                "ideal_pulses" => {
                    ideal_pulses = Some(value.parse::<bool>().map_err(|_| {
                        Error::config(format!("ideal_pulses must be true or false, got '{}'", value))
                    })?);
                }
                "sweep" => {
                    sweep = Some(match value.as_str() {
                        "duration" => SweepKind::Duration,
                        "repetitions" => SweepKind::Repetition,
                        other => {
                            return Err(Error::config(format!(
                                "sweep must be duration or repetitions, got '{}'",
                                other
                            )))
                        }
                    });
                }
                k if k.starts_with("element_") => {
                    let idx: usize = k["element_".len()..].parse().map_err(|_| {
                        Error::config(format!("bad element index in key '{}'", k))
                    })?;
                    elements.push((idx, parse_element(value)?));
                }
                other => {
                    return Err(Error::config(format!(
                        "unknown sequence key '{}'",
                        other
                    )))
                }
            }
        }
        elements.sort_by_key(|(i, _)| *i);
        for (pos, (idx, _)) in elements.iter().enumerate() {
            if *idx != pos + 1 {
                return Err(Error::config(format!(
                    "sequence elements must be numbered 1..{} without gaps",
                    elements.len()
                )));
            }
        }
        let seq = PulseSequence {
            elements: elements.into_iter().map(|(_, el)| el).collect(),
            sweep: sweep.ok_or_else(|| Error::config("sequence block missing 'sweep'"))?,
            readout_axis: readout_axis
                .ok_or_else(|| Error::config("sequence block missing 'readout_axis'"))?,
            ideal_pulses: ideal_pulses.unwrap_or(false),
        };
        seq.validate()?;
        Ok(seq)
    }
}

fn parse_element(line: &str) -> Result<SequenceElement> {
    let mut tokens = line.split_whitespace();
    let kind_word = tokens
        .next()
        .ok_or_else(|| Error::config("empty element line"))?;
    let mut duration = None;
    let mut rabi = None;
    let mut phase = None;
    let mut detuning = 0.0;
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::config(format!("element field '{}' is not key=value", tok)))?;
        match k {
            "duration_ns" => {
                duration = Some(if v == "swept" {
                    ElementDuration::Swept { scale: 1.0 }
                } else if let Some(scale) = v.strip_prefix("swept*") {
                    ElementDuration::Swept {
                        scale: parse_num(scale)?,
                    }
                } else {
                    ElementDuration::Fixed(parse_num(v)?)
                });
            }
            "rabi_mhz" => rabi = Some(parse_num(v)?),
            "phase_rad" => phase = Some(parse_num(v)?),
            "detuning_mhz" => detuning = parse_num(v)?,
            other => {
                return Err(Error::config(format!("unknown element field '{}'", other)))
            }
        }
    }
    let duration =
        duration.ok_or_else(|| Error::config("element is missing duration_ns"))?;
    let kind = match kind_word {
        "drive" => ElementKind::Drive {
            rabi_mhz: rabi.ok_or_else(|| Error::config("drive element needs rabi_mhz"))?,
            phase_rad: phase.unwrap_or(0.0),
        },
        "delay" => {
            if rabi.is_some() || phase.is_some() {
                return Err(Error::config("delay elements take no drive fields"));
            }
            ElementKind::Delay
        }
        other => {
            return Err(Error::config(format!(
                "element kind must be drive or delay, got '{}'",
                other
            )))
        }
    };
    Ok(SequenceElement {
        kind,
        duration,
        detuning_offset_mhz: detuning,
    })
}

fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::config(format!("bad number '{}'", s)))?;
    if !v.is_finite() {
        return Err(Error::config(format!("number '{}' is not finite", s)));
    }
    Ok(v)
}

/// Common knobs for the sequence templates.
#[derive(Debug, Clone, Copy)]
pub struct TemplateParams {
    /// Drive strength; sets every pulse duration (a half turn takes
    /// `500/rabi_mhz` ns).
    pub rabi_mhz: f64,
    /// Static detuning applied to every element.
    pub detuning_mhz: f64,
    pub ideal_pulses: bool,
}

impl TemplateParams {
    pub fn new(rabi_mhz: f64) -> Self {
        TemplateParams {
            rabi_mhz,
            detuning_mhz: 0.0,
            ideal_pulses: false,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.rabi_mhz.is_finite() && self.rabi_mhz > 0.0) {
            return Err(Error::invalid("template Rabi frequency must be positive"));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(Error::invalid("template detuning must be finite"));
        }
        Ok(())
    }

    /// Drive segment lasting long enough for `angle_rad` of rotation.
    fn pulse(&self, angle_rad: f64, phase_rad: f64) -> SequenceElement {
        // angle = 2 pi * rabi * t * 1e-3  =>  t = angle * 1e3 / (2 pi rabi)
        let duration_ns = angle_rad * 1e3 / (2.0 * std::f64::consts::PI * self.rabi_mhz);
        SequenceElement {
            kind: ElementKind::Drive {
                rabi_mhz: self.rabi_mhz,
                phase_rad,
            },
            duration: ElementDuration::Fixed(duration_ns),
            detuning_offset_mhz: self.detuning_mhz,
        }
    }

    fn p90(&self, phase_rad: f64) -> SequenceElement {
        self.pulse(std::f64::consts::FRAC_PI_2, phase_rad)
    }

    fn p180(&self, phase_rad: f64) -> SequenceElement {
        self.pulse(std::f64::consts::PI, phase_rad)
    }

    fn swept_delay(&self, scale: f64) -> SequenceElement {
        SequenceElement {
            kind: ElementKind::Delay,
            duration: ElementDuration::Swept { scale },
            detuning_offset_mhz: self.detuning_mhz,
        }
    }
}

pub const PHASE_X: f64 = 0.0;
pub const PHASE_Y: f64 = std::f64::consts::FRAC_PI_2;
pub const PHASE_MINUS_X: f64 = std::f64::consts::PI;
pub const PHASE_MINUS_Y: f64 = 3.0 * std::f64::consts::FRAC_PI_2;

/// Rabi nutation: one resonant drive of swept length, read out along z.
pub fn rabi(params: TemplateParams) -> Result<PulseSequence> {
    params.check()?;
    Ok(PulseSequence {
        elements: vec![SequenceElement {
            kind: ElementKind::Drive {
                rabi_mhz: params.rabi_mhz,
                phase_rad: PHASE_X,
            },
            duration: ElementDuration::Swept { scale: 1.0 },
            detuning_offset_mhz: params.detuning_mhz,
        }],
        sweep: SweepKind::Duration,
        readout_axis: ReadoutAxis::Z,
        ideal_pulses: params.ideal_pulses,
    })
}

/// Free induction decay: 90x, swept delay, 90x. The sweep value is the free
/// evolution time; with detuning d and no noise the ideal signal is
/// `(1 + cos(2 pi d t)) / 2`.
pub fn fid(params: TemplateParams) -> Result<PulseSequence> {
    params.check()?;
    Ok(PulseSequence {
        elements: vec![
            params.p90(PHASE_X),
            params.swept_delay(1.0),
            params.p90(PHASE_X),
        ],
        sweep: SweepKind::Duration,
        readout_axis: ReadoutAxis::Z,
        ideal_pulses: params.ideal_pulses,
    })
}

/// Two-pulse echo: 90x, tau, 180y, tau, 90x. The sweep value is the total
/// free-evolution time 2 tau, so echo decays share a time axis with `fid`
/// and `cpmg`.
pub fn hahn(params: TemplateParams) -> Result<PulseSequence> {
    cpmg(1, params)
}

/// Echo train with `n_pi` equidistant half-turn pulses; the sweep value is
/// the total free-evolution time.
pub fn cpmg(n_pi: usize, params: TemplateParams) -> Result<PulseSequence> {
    params.check()?;
    if n_pi == 0 {
        return Err(Error::invalid("echo train needs at least one half-turn pulse"));
    }
    let half = 0.5 / n_pi as f64;
    let mut elements = vec![params.p90(PHASE_X)];
    for _ in 0..n_pi {
        elements.push(params.swept_delay(half));
        elements.push(params.p180(PHASE_Y));
        elements.push(params.swept_delay(half));
    }
    elements.push(params.p90(PHASE_X));
    Ok(PulseSequence {
        elements,
        sweep: SweepKind::Duration,
        readout_axis: ReadoutAxis::Z,
        ideal_pulses: params.ideal_pulses,
    })
}

/// One four-pulse line-narrowing cycle with base delay `tau`:
/// (tau, 90 -x, tau, 90 y, 2 tau, 90 -y, tau, 90 x, tau).
///
/// Over a cycle the toggled z axis spends equal thirds along x, y, and z,
/// which cancels like-spin secular dipolar coupling to first order while
/// merely scaling a static detuning.
fn wahuha_cycle(tau_ns: f64, params: &TemplateParams, swept: bool) -> Vec<SequenceElement> {
    let delay = |scale: f64| {
        if swept {
            params.swept_delay(scale)
        } else {
            // Fixed-count cycles under a repetition sweep still mark their
            // delays swept: that is how the repeated block is identified,
            // with the scale holding the literal duration.
            params.swept_delay(scale * tau_ns)
        }
    };
    vec![
        delay(1.0),
        params.p90(PHASE_MINUS_X),
        delay(1.0),
        params.p90(PHASE_Y),
        delay(2.0),
        params.p90(PHASE_MINUS_Y),
        delay(1.0),
        params.p90(PHASE_X),
        delay(1.0),
    ]
}

/// Line-narrowing sequence swept over cycle count: 90x preparation, the
/// four-pulse cycle repeated, 90x readout. Sweep settings are 1-based cycle
/// counts; the engine maps them to total cycle time.
pub fn wahuha(tau_ns: f64, params: TemplateParams) -> Result<PulseSequence> {
    params.check()?;
    if !(tau_ns.is_finite() && tau_ns > 0.0) {
        return Err(Error::invalid("cycle delay must be positive"));
    }
    let mut elements = vec![params.p90(PHASE_X)];
    elements.extend(wahuha_cycle(tau_ns, &params, false));
    elements.push(params.p90(PHASE_X));
    Ok(PulseSequence {
        elements,
        sweep: SweepKind::Repetition,
        readout_axis: ReadoutAxis::Z,
        ideal_pulses: params.ideal_pulses,
    })
}

/// Line-narrowing sequence with a fixed cycle count, swept over the base
/// delay tau instead.
pub fn wahuha_tau(cycles: usize, params: TemplateParams) -> Result<PulseSequence> {
    params.check()?;
    if cycles == 0 {
        return Err(Error::invalid("need at least one cycle"));
    }
    let mut elements = vec![params.p90(PHASE_X)];
    for _ in 0..cycles {
        // Pulses are fixed; only the delays stretch with tau.
        elements.extend(wahuha_cycle(1.0, &params, true));
    }
    elements.push(params.p90(PHASE_X));
    Ok(PulseSequence {
        elements,
        sweep: SweepKind::Duration,
        readout_axis: ReadoutAxis::Z,
        ideal_pulses: params.ideal_pulses,
    })
}
