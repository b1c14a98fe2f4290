//! The six batch commands. Each reads exactly one config section, writes a
//! provenance-headed output, and prints a short machine-parsable summary to
//! standard output.

use std::fs;
use std::path::Path;

use cespin::cluster::{
    cluster_dd_signal, cluster_dd_signal_exact, demo_five_spin, sample_cluster, ClusterSpec,
};
use cespin::crystal::{FieldSpec, GTensor};
use cespin::dynamics::{
    analytic_coherence, cpmg, fid, hahn, rabi, run_sequence, wahuha, CoherenceSequence,
    NoiseModel, PulseSequence, SweepKind, TemplateParams,
};
use cespin::fitting::{fit_xy, FitResult, ModelKind};
use cespin::pumping::{pump_train, steady_state_polarization, PumpModel};
use cespin::signal::{read_signal_csv, write_table};
use cespin::spectrum::{odmr_spectrum, transition_frequencies, zeeman_sweep, LineShape, LineShapeKind};
use cespin::{linspace, Error, Result};

use crate::config::{RunConfig, SectionView};

/// Commands whose physics consumes randomness; only these accept a seed
/// (and it is then mandatory) and run worker threads.
pub fn uses_seed(command: &str) -> bool {
    matches!(command, "simulate" | "cluster")
}

/// Applies flag overrides, runs the named command and returns its stdout
/// summary. CSV/text outputs go to `out`.
pub fn run(
    command: &str,
    cfg: &mut RunConfig,
    out: Option<&Path>,
    seed_flag: Option<u64>,
    threads_flag: Option<usize>,
) -> Result<String> {
    if !uses_seed(command) {
        if seed_flag.is_some() {
            return Err(Error::invalid(format!(
                "the {command} command is deterministic and takes no seed"
            )));
        }
        if threads_flag.is_some() {
            return Err(Error::invalid(format!(
                "the {command} command runs single-threaded and takes no thread count"
            )));
        }
    }
    if let Some(seed) = seed_flag {
        cfg.set(command, "seed", &seed.to_string())?;
    }
    if let Some(threads) = threads_flag {
        cfg.set(command, "threads", &threads.to_string())?;
    }
    let section = cfg.sole_section(command)?;
    if uses_seed(command) {
        configure_threads(&section)?;
    }
    // the resolved config, echoed verbatim into every output header
    let provenance: Vec<String> = cfg.to_text().lines().map(str::to_string).collect();
    match command {
        "spectrum" => cmd_spectrum(&section, out, &provenance),
        "zeeman" => cmd_zeeman(&section, out, &provenance),
        "pump" => cmd_pump(&section, out, &provenance),
        "simulate" => cmd_simulate(&section, out, &provenance),
        "cluster" => cmd_cluster(&section, out, &provenance),
        "fit" => cmd_fit(&section, out, &provenance),
        other => Err(Error::invalid(format!("unknown command {other}"))),
    }
}

fn configure_threads(sec: &SectionView) -> Result<()> {
    let Some(n) = sec.usize_opt("threads")? else {
        return Ok(());
    };
    if n == 0 {
        return Err(Error::config("threads must be at least 1"));
    }
    // later runs in the same process keep the first pool; the thread count
    // only tunes throughput, never results
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn out_path<'a>(out: Option<&'a Path>, command: &str) -> Result<&'a Path> {
    out.ok_or_else(|| Error::invalid(format!("the {command} command needs --out for its CSV")))
}

fn write_csv_table(
    path: &Path,
    provenance: &[String],
    names: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    let mut buf = Vec::new();
    write_table(&mut buf, provenance, names, columns)?;
    fs::write(path, buf)?;
    Ok(())
}

fn grid_from(sec: &SectionView, min_key: &str, max_key: &str) -> Result<Vec<f64>> {
    let min = sec.f64_req(min_key)?;
    let max = sec.f64_req(max_key)?;
    let points = sec.usize_req("grid_points")?;
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::config(format!(
            "{min_key} and {max_key} must be finite"
        )));
    }
    // a single-point grid evaluates one spot (min and max coincide)
    if points == 1 {
        if max != min {
            return Err(Error::config(format!(
                "grid_points = 1 needs {max_key} = {min_key}"
            )));
        }
        return Ok(vec![min]);
    }
    if points < 2 {
        return Err(Error::config("grid_points must be at least 1"));
    }
    if max <= min {
        return Err(Error::config(format!(
            "{max_key} must exceed {min_key} (got {min} .. {max})"
        )));
    }
    Ok(linspace(min, max, points))
}

fn cmd_spectrum(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let field = FieldSpec::new(sec.f64_req("field_gauss")?, sec.vector3_req("direction")?)?;
    let kind = match sec.str_req("lineshape")? {
        "lorentzian" => LineShapeKind::Lorentzian,
        "gaussian" => LineShapeKind::Gaussian,
        other => {
            return Err(Error::config(format!(
                "lineshape must be lorentzian or gaussian, got {other:?}"
            )))
        }
    };
    let shape = LineShape::new(kind, sec.f64_req("fwhm_mhz")?)?;
    let grid = grid_from(sec, "grid_min_mhz", "grid_max_mhz")?;
    sec.finish()?;

    let g = GTensor::default();
    let mut signal = odmr_spectrum(&field, &g, &shape, &grid)?;
    signal.meta.comments = provenance.to_vec();
    let mut buf = Vec::new();
    signal.write_csv(&mut buf)?;
    fs::write(out_path(out, "spectrum")?, buf)?;

    // distinct transition frequencies with their degeneracies
    let mut freqs: Vec<f64> = transition_frequencies(&field, &g)
        .iter()
        .map(|l| l.frequency_mhz)
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut text = String::new();
    let mut i = 0;
    while i < freqs.len() {
        let mut j = i + 1;
        while j < freqs.len() && (freqs[j] - freqs[i]).abs() < 1e-6 {
            j += 1;
        }
        text.push_str(&format!(
            "line {:.6} MHz multiplicity {}\n",
            freqs[i],
            j - i
        ));
        i = j;
    }
    Ok(text)
}

fn cmd_zeeman(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let direction = sec.vector3_req("direction")?;
    let grid = grid_from(sec, "grid_min_gauss", "grid_max_gauss")?;
    sec.finish()?;

    let b_last = *grid.last().unwrap();
    if b_last <= 0.0 {
        return Err(Error::config("grid_max_gauss must be positive"));
    }
    // per-site frequency columns; a single-point grid evaluates the lines at
    // one field, where the spectrum command must agree
    let (names, columns): (Vec<String>, Vec<Vec<f64>>) = if grid.len() == 1 {
        let field = FieldSpec::new(b_last, direction)?;
        let lines = transition_frequencies(&field, &GTensor::default());
        (
            lines
                .iter()
                .map(|l| format!("site{}_mhz", l.site_id))
                .collect(),
            lines.iter().map(|l| vec![l.frequency_mhz]).collect(),
        )
    } else {
        let curves = zeeman_sweep(direction, &GTensor::default(), &grid)?;
        (
            curves.iter().map(|c| c.meta.y_label.clone()).collect(),
            curves.iter().map(|c| c.y().to_vec()).collect(),
        )
    };
    let all_names: Vec<&str> = std::iter::once("field_gauss")
        .chain(names.iter().map(String::as_str))
        .collect();
    let all_columns: Vec<&[f64]> = std::iter::once(grid.as_slice())
        .chain(columns.iter().map(Vec::as_slice))
        .collect();
    write_csv_table(out_path(out, "zeeman")?, provenance, &all_names, &all_columns)?;

    let mut text = String::new();
    for (i, col) in columns.iter().enumerate() {
        let f = *col.last().unwrap();
        text.push_str(&format!("site {} slope {:.6} MHz/G\n", i + 1, f / b_last));
    }
    Ok(text)
}

fn cmd_pump(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let model = match sec.str_req("model")? {
        "ideal" => PumpModel::ideal(
            sec.f64_req("branching_ratio")?,
            sec.f64_req("excitation_prob")?,
        )?,
        "nonideal" => PumpModel::demo_nonideal(),
        "custom" => PumpModel::new(
            sec.f64_req("branching_ratio")?,
            sec.f64_req("excitation_prob")?,
            sec.f64_req("sigma_plus_fraction")?,
            sec.f64_req("initial_polarization")?,
        )?,
        other => {
            return Err(Error::config(format!(
                "model must be ideal, nonideal or custom, got {other:?}"
            )))
        }
    };
    let pulses = sec.usize_req("pulses")?;
    sec.finish()?;

    let traj = pump_train(&model, pulses)?;
    let index: Vec<f64> = (1..=traj.len()).map(|i| i as f64).collect();
    let polarization: Vec<f64> = traj
        .p_up
        .iter()
        .zip(&traj.p_down)
        .map(|(u, d)| u - d)
        .collect();
    write_csv_table(
        out_path(out, "pump")?,
        provenance,
        &["pulse", "fluorescence", "polarization"],
        &[&index, &traj.normalized_fluorescence(), &polarization],
    )?;

    Ok(format!(
        "steady state polarization {:.6}\nfinal polarization {:.6}\n",
        steady_state_polarization(&model),
        traj.final_polarization(),
    ))
}

/// Sequence selection shared by `simulate` and `cluster`. The sweep grid is
/// a duration grid for duration-swept templates and 1..=cycles for the
/// repetition-swept line-narrowing template. The returned oracle tag marks
/// curves with a closed-form envelope (instantaneous on-resonance pulses).
fn read_sequence(
    sec: &SectionView,
    allow_detuning: bool,
) -> Result<(PulseSequence, Vec<f64>, Option<CoherenceSequence>)> {
    let params = TemplateParams {
        rabi_mhz: sec.f64_req("rabi_mhz")?,
        detuning_mhz: if allow_detuning {
            sec.f64_or("detuning_mhz", 0.0)?
        } else {
            0.0
        },
        ideal_pulses: sec.bool_req("ideal_pulses")?,
    };
    let exact = params.ideal_pulses && params.detuning_mhz == 0.0;
    let (seq, oracle) = match sec.str_req("sequence")? {
        "fid" => (fid(params)?, exact.then_some(CoherenceSequence::Fid)),
        "rabi" => (rabi(params)?, None),
        "hahn" => (hahn(params)?, exact.then_some(CoherenceSequence::Hahn)),
        "cpmg" => {
            let n_pi = sec.usize_req("n_pi")?;
            (
                cpmg(n_pi, params)?,
                exact.then_some(CoherenceSequence::Cpmg(n_pi)),
            )
        }
        "wahuha" => (wahuha(sec.f64_req("cycle_tau_ns")?, params)?, None),
        other => {
            return Err(Error::config(format!(
                "sequence must be fid, rabi, hahn, cpmg or wahuha, got {other:?}"
            )))
        }
    };
    let grid = match seq.sweep {
        SweepKind::Duration => grid_from(sec, "grid_min_ns", "grid_max_ns")?,
        SweepKind::Repetition => {
            let cycles = sec.usize_req("cycles")?;
            if cycles < 2 {
                return Err(Error::config("cycles must be at least 2"));
            }
            (1..=cycles).map(|c| c as f64).collect()
        }
    };
    Ok((seq, grid, oracle))
}

fn read_noise(sec: &SectionView) -> Result<NoiseModel> {
    let mut noise = match sec.str_req("noise")? {
        "none" => NoiseModel::none(),
        "quasi_static" => NoiseModel::quasi_static(sec.f64_req("sigma_mhz")?)?,
        "ou" => NoiseModel::ornstein_uhlenbeck(
            sec.f64_req("sigma_mhz")?,
            sec.f64_req("tau_c_ns")?,
        )?,
        other => {
            return Err(Error::config(format!(
                "noise must be none, quasi_static or ou, got {other:?}"
            )))
        }
    };
    if let Some(t1) = sec.f64_opt("t1_ns")? {
        noise = noise.with_t1(t1)?;
    }
    Ok(noise)
}

fn cmd_simulate(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let (seq, grid, oracle) = read_sequence(sec, true)?;
    let noise = read_noise(sec)?;
    let trajectories = sec.usize_req("trajectories")?;
    let seed = sec.u64_req("seed")?;
    sec.finish()?;

    let signal = run_sequence(&seq, &noise, &grid, trajectories, seed)?;
    // signal values are (1 + W)/2 wherever the closed form W exists
    let analytic: Option<Vec<f64>> = match oracle {
        Some(kind) if noise.is_stochastic() => Some(
            signal
                .x()
                .iter()
                .map(|&t| analytic_coherence(&noise, kind, t).map(|w| 0.5 * (1.0 + w)))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let mut names = vec!["time_ns", "signal"];
    let mut columns: Vec<&[f64]> = vec![signal.x(), signal.y()];
    if let Some(a) = &analytic {
        names.push("analytic");
        columns.push(a);
    }
    write_csv_table(out_path(out, "simulate")?, provenance, &names, &columns)?;

    Ok(format!(
        "points {} trajectories {} seed {} analytic {}\n",
        signal.len(),
        trajectories,
        seed,
        if analytic.is_some() { "yes" } else { "no" },
    ))
}

fn cmd_cluster(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let seed = sec.u64_req("seed")?;
    let spec = match sec.str_req("source")? {
        "demo" => demo_five_spin(),
        "file" => {
            let path = sec.str_req("spec_file")?;
            let text = fs::read_to_string(path)?;
            ClusterSpec::from_text(&text)?
        }
        "sample" => {
            let field = FieldSpec::new(
                sec.f64_req("field_gauss")?,
                sec.vector3_req("direction")?,
            )?;
            let sampled = sample_cluster(
                sec.f64_req("concentration")?,
                sec.usize_req("n_spins")?,
                seed,
                &field,
                &GTensor::default(),
            )?;
            match sec.f64_opt("rescale_max_coupling_mhz")? {
                Some(target) => sampled.scaled(target / sampled.max_coupling_mhz())?,
                None => sampled,
            }
        }
        other => {
            return Err(Error::config(format!(
                "source must be demo, sample or file, got {other:?}"
            )))
        }
    };
    let (seq, grid, _) = read_sequence(sec, false)?;
    // `sampled` draws `configs` random bath states; `exact` sums every bath
    // basis state, so it takes no configs key and ignores the seed unless
    // the geometry itself was sampled
    let (mut signal, configs_label) = match sec.str_opt("bath").unwrap_or("sampled") {
        "sampled" => {
            let configs = sec.usize_req("configs")?;
            let signal = cluster_dd_signal(&spec, &seq, &grid, configs, seed)?;
            (signal, configs.to_string())
        }
        "exact" => (cluster_dd_signal_exact(&spec, &seq, &grid)?, "exact".to_string()),
        other => {
            return Err(Error::config(format!(
                "bath must be sampled or exact, got {other:?}"
            )))
        }
    };
    sec.finish()?;
    signal.meta.comments = provenance.to_vec();
    let mut buf = Vec::new();
    signal.write_csv(&mut buf)?;
    fs::write(out_path(out, "cluster")?, buf)?;

    Ok(format!(
        "spins {} max_coupling_mhz {} configs {} seed {}\n",
        spec.n_spins(),
        spec.max_coupling_mhz(),
        configs_label,
        seed,
    ))
}

fn cmd_fit(sec: &SectionView, out: Option<&Path>, provenance: &[String]) -> Result<String> {
    let path = sec.str_req("input_csv")?;
    let kind = ModelKind::from_name(sec.str_req("model")?)?;
    let guess = sec.floats_opt("guess")?;
    sec.finish()?;

    let file = fs::File::open(path)?;
    let (signal, weights) = read_signal_csv(std::io::BufReader::new(file))?;
    let result = fit_xy(
        signal.x(),
        signal.y(),
        weights.as_deref(),
        kind,
        guess.as_deref(),
    )?;

    let text = fit_report(&result, signal.len(), provenance);
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    if !result.converged {
        // the caller still gets the full report on stdout before exit 2
        print!("{text}");
        return Err(Error::NonConvergence(format!(
            "fit of {} did not converge after {} iterations",
            result.model.kind.name(),
            result.iterations
        )));
    }
    Ok(text)
}

fn fit_report(result: &FitResult, points: usize, provenance: &[String]) -> String {
    let mut text = String::new();
    for line in provenance {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(&format!("model {}\n", result.model.kind.name()));
    text.push_str(&format!("converged {}\n", result.converged));
    text.push_str(&format!("iterations {}\n", result.iterations));
    text.push_str(&format!("points {points}\n"));
    text.push_str(&format!("residual_norm {}\n", result.residual_norm));
    let sigmas = result.uncertainties();
    for ((name, value), sigma) in result
        .model
        .kind
        .parameter_names()
        .iter()
        .zip(result.model.params())
        .zip(&sigmas)
    {
        text.push_str(&format!("{name} {value} +- {sigma}\n"));
    }
    text
}

/// Parses the `# `-stripped comment lines of an output file back into the
/// config that produced it.
pub fn provenance_of(comments: &[String]) -> Result<RunConfig> {
    RunConfig::parse(&comments.join("\n"))
}
