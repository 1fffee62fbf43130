use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use koopinv::collect::collect_record;
use koopinv::eval::{
    decay_experiment_csv, decay_fit_csv, derive_seed, evaluation_record, hidden_state_decay, normalized_error,
    predict_record, regime_record, sweep_derivatives, sweep_history, table2_csv, table3_csv, train_pool,
    ExperimentData,
};
use koopinv::learner::{build_dataset, MlpModel};
use koopinv::lti::{self, normal_form, StateSpace, DEFAULT_TOL};
use koopinv::signals::{evaluation_suite, filter_chain, FilteredTrajectory, Nominal};
use koopinv::trajectory::{write_atomic, Signal, Trajectory};
use nalgebra::DVector;

use crate::config::RunConfig;
use crate::{mode_spec, CliError, DecayArgs, InvertArgs, OperatorArgs, ReproduceArgs, SimulateArgs, TrainArgs, Which};

/// Seed path tag for the `train` command's pool.
const TRAIN_TAG: u64 = 0x7472_6169;

/// Input of the `simulate` command.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    Excitation,
    /// Unit step at `t = 1 s`.
    Step,
    Zero,
    Nominal(usize),
    File(PathBuf),
}

impl InputSource {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "excitation" => Ok(Self::Excitation),
            "step" => Ok(Self::Step),
            "zero" => Ok(Self::Zero),
            _ => {
                if let Some(k) = text.strip_prefix("nominal:") {
                    let k: usize = k.parse().map_err(|_| CliError::Input(format!("bad trajectory index in '{text}'")))?;
                    check_index(k)?;
                    Ok(Self::Nominal(k))
                } else if Path::new(text).is_file() {
                    Ok(Self::File(PathBuf::from(text)))
                } else {
                    Err(CliError::Input(format!(
                        "unknown input '{text}' (expected excitation, step, zero, nominal:K or a CSV file)"
                    )))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Excitation => "excitation".into(),
            Self::Step => "step".into(),
            Self::Zero => "zero".into(),
            Self::Nominal(k) => format!("nominal:{k}"),
            Self::File(p) => p.display().to_string(),
        }
    }
}

fn check_index(k: usize) -> Result<(), CliError> {
    if (1..=10).contains(&k) {
        Ok(())
    } else {
        Err(CliError::Input(format!("trajectory index {k} is outside 1..=10")))
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Metadata lines shared by every output file.
pub fn base_meta(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![("system", cfg.system.clone()), ("base_rate", cfg.base_rate.to_string()), ("master_seed", cfg.seed.to_string())]
}

/// Record of `simulate`: channels `u, y, dy, ddy, d3y, d4y`.
pub fn simulate_record(cfg: &RunConfig, sys: &StateSpace, input: &InputSource, duration: Option<f64>) -> Result<Trajectory, CliError> {
    let dt = cfg.base_dt();
    let record = match input {
        InputSource::Excitation => {
            let spec = cfg.excitation()?;
            collect_record(sys, &spec, dt, duration.unwrap_or_else(|| spec.duration()))?
        }
        InputSource::Step => collect_record(sys, &|t: f64| if t >= 1.0 { 1.0 } else { 0.0 }, dt, duration.unwrap_or(5.0))?,
        InputSource::Zero => collect_record(sys, &|_: f64| 0.0, dt, duration.unwrap_or(5.0))?,
        InputSource::Nominal(k) => collect_record(sys, &Nominal(*k), dt, duration.unwrap_or(10.0))?,
        InputSource::File(path) => {
            let traj = Trajectory::read_csv(path)?;
            let name = if traj.channels().iter().any(|c| c == "u") { "u" } else { traj.channels()[0].as_str() };
            let signal = traj.signal(name)?;
            let span = traj.t_end();
            collect_record(sys, &move |t: f64| signal.value(t), dt, duration.unwrap_or(span))?
        }
    };
    Ok(record)
}

pub fn simulate_cmd_meta(cfg: &RunConfig, input: &InputSource) -> Vec<(&'static str, String)> {
    let mut meta = base_meta(cfg);
    meta.push(("input", input.label()));
    meta
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let input = InputSource::parse(&args.input)?;
    if let Some(d) = args.duration {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CliError::Input(format!("duration must be positive, got {d}")));
        }
    }
    let record = simulate_record(cfg, &sys, &input, args.duration)?;
    write_text(&out_path(cfg, "simulate.csv"), &record.to_csv_string(&simulate_cmd_meta(cfg, &input)))
}

pub fn experiment_data(cfg: &RunConfig) -> Result<ExperimentData, CliError> {
    Ok(ExperimentData::new(cfg.system()?, &cfg.excitation()?, cfg.base_dt(), cfg.cutoff)?)
}

pub fn collect(cfg: &RunConfig, args: &OperatorArgs) -> Result<(), CliError> {
    let spec = args.spec();
    cfg.check_spec(&spec)?;
    let data = experiment_data(cfg)?;
    let record = regime_record(&data, args.regime, cfg.snr(), cfg.seed)?;
    let ds = build_dataset(&record, &spec)?;
    eprintln!("{} rows, {} features", ds.len(), ds.width());
    write_text(&out_path(cfg, "dataset.csv"), &ds.to_csv_string())
}

/// Seeds of the `train` pool, one per hidden width.
pub fn train_seeds(master: u64, hidden: &[usize]) -> Vec<u64> {
    hidden.iter().map(|&n| derive_seed(master, &[TRAIN_TAG, n as u64])).collect()
}

pub fn train(cfg: &RunConfig, args: &TrainArgs) -> Result<(), CliError> {
    let spec = args.operator.spec();
    cfg.check_spec(&spec)?;
    let hidden = if args.hidden.is_empty() { cfg.hidden.clone() } else { args.hidden.clone() };
    if hidden.contains(&0) {
        return Err(CliError::Input("hidden widths must be positive".into()));
    }
    let data = experiment_data(cfg)?;
    let regime = args.operator.regime;
    let record = regime_record(&data, regime, cfg.snr(), cfg.seed)?;
    let seeds = train_seeds(cfg.seed, &hidden);
    let pool = train_pool(&record, &data.evaluation, &spec, &hidden, &seeds, cfg.train_config(regime), cfg.jobs)?;
    let report = pool.report()?;
    let best = pool.select_best().ok_or_else(|| CliError::Numerical("empty pool".into()))?;
    let mut csv = String::new();
    for (k, v) in base_meta(cfg) {
        let _ = writeln!(csv, "# {k}={v}");
    }
    let _ = writeln!(csv, "# operator={}", spec.operator_label());
    let _ = writeln!(csv, "# regime={}", regime.label());
    csv.push_str("N,e_u_pct,e_bar_u_pct\n");
    for w in &report.widths {
        let _ = writeln!(csv, "{},{:.6},{:.6}", w.hidden, w.mean, w.max);
    }
    write_text(&out_path(cfg, "train_report.csv"), &csv)?;
    let path = out_path(cfg, "model.json");
    best.model.save(&path)?;
    eprintln!("wrote {}", path.display());
    println!(
        "{} {}: best N={} e_u={:.4}% e_bar_u={:.4}%",
        spec.operator_label(),
        regime.label(),
        report.best_hidden,
        report.e_u,
        report.e_bar_u
    );
    Ok(())
}

/// Desired trajectory for `invert`: a built-in index or a file's first channel through the filter chain.
pub fn desired_trajectory(cfg: &RunConfig, args: &InvertArgs) -> Result<FilteredTrajectory, CliError> {
    match (args.trajectory, &args.trajectory_file) {
        (Some(k), None) => {
            check_index(k)?;
            let mut suite = evaluation_suite(cfg.base_dt(), cfg.cutoff)?;
            Ok(suite.swap_remove(k - 1))
        }
        (None, Some(path)) => {
            let traj = Trajectory::read_csv(path)?;
            if (traj.dt() - cfg.base_dt()).abs() > 1e-9 {
                return Err(CliError::Input(format!(
                    "{} is sampled at {} s, the base period is {} s",
                    path.display(),
                    traj.dt(),
                    cfg.base_dt()
                )));
            }
            Ok(filter_chain(&traj, cfg.cutoff)?)
        }
        _ => Err(CliError::Input("invert needs --trajectory K or --trajectory-file".into())),
    }
}

/// Result of `invert`.
#[derive(Clone, Debug)]
pub struct Inversion {
    /// Channels `u_hat, u_d, y_d, y`.
    pub trajectory: Trajectory,
    /// Normalized inverse-input error against the ideal inverse, percent.
    pub input_error: f64,
    /// Normalized tracking error of the plant driven by `u_hat`, percent.
    pub tracking_error: f64,
}

pub fn invert_trajectory(
    sys: &StateSpace,
    model: Option<&MlpModel>,
    desired: &FilteredTrajectory,
) -> Result<Inversion, CliError> {
    let nf = normal_form(sys, DEFAULT_TOL)?;
    let record = evaluation_record(&nf, desired)?;
    let u_d = record.channel("u")?;
    let u_hat = match model {
        Some(m) => {
            let (spec, _) = m.spec.ok_or_else(|| CliError::Compatibility("model file carries no feature spec".into()))?;
            predict_record(m, &spec, &record)?.channel("u_hat")?
        }
        None => u_d.clone(),
    };
    let input_error = normalized_error(&u_hat, &u_d)?;
    let u_traj = Trajectory::from_channel(record.dt(), record.t0(), "u_hat", &u_hat)?;
    let duration = record.t_end() - record.t0();
    let x0 = DVector::zeros(sys.order());
    let y = lti::simulate_from(sys, &u_traj.signal("u_hat")?, &x0, record.t0(), record.dt(), duration)?.channel("y")?;
    let y_d = record.channel("y")?;
    let tracking_error = normalized_error(&y, &y_d)?;
    let trajectory = u_traj.with_channel("u_d", &u_d)?.with_channel("y_d", &y_d)?.with_channel("y", &y)?;
    Ok(Inversion { trajectory, input_error, tracking_error })
}

pub fn invert(cfg: &RunConfig, args: &InvertArgs) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let model = match (&args.model, args.analytic) {
        (Some(path), false) => {
            let model = MlpModel::load(path)
                .map_err(|e| CliError::Input(format!("cannot load model {}: {e}", path.display())))?;
            let (trained, _) =
                model.spec.ok_or_else(|| CliError::Compatibility("model file carries no feature spec".into()))?;
            let requested = mode_spec(
                args.mode.unwrap_or(trained.mode.into()),
                args.window.unwrap_or(trained.window),
                args.dt.unwrap_or(trained.tap_dt),
                args.order.unwrap_or(trained.order),
            );
            model.check_spec(&requested, cfg.base_dt())?;
            Some(model)
        }
        (None, true) => None,
        _ => return Err(CliError::Input("invert needs exactly one of --model FILE or --analytic".into())),
    };
    let desired = desired_trajectory(cfg, args)?;
    let result = invert_trajectory(&sys, model.as_ref(), &desired)?;
    let mut meta = base_meta(cfg);
    meta.push(("mode", if model.is_some() { "model".into() } else { "analytic".into() }));
    meta.push(("input_error_pct", format!("{:.6}", result.input_error)));
    meta.push(("tracking_error_pct", format!("{:.6}", result.tracking_error)));
    write_text(&out_path(cfg, "invert.csv"), &result.trajectory.to_csv_string(&meta))?;
    println!("input error {:.6}% tracking error {:.6}%", result.input_error, result.tracking_error);
    Ok(())
}

pub fn reproduce(cfg: &RunConfig, args: &ReproduceArgs) -> Result<(), CliError> {
    for &dt in &args.dt {
        cfg.check_spec(&koopinv::FeatureSpec::history_derivatives(dt, dt, 0))?;
    }
    let data = experiment_data(cfg)?;
    let meta = vec![("system", cfg.system.clone()), ("base_rate", cfg.base_rate.to_string())];
    match args.which {
        Which::Table2 | Which::DecayFit => {
            let dts = (!args.dt.is_empty()).then(|| args.dt.clone());
            let result = sweep_history(&data, &cfg.history_sweep(dts), cfg.seed, cfg.jobs)?;
            for cell in &result.cells {
                if let Err(msg) = &cell.outcome {
                    eprintln!("cell T={} dt={} failed: {msg}", cell.window, cell.tap_dt);
                }
            }
            write_text(&out_path(cfg, "table2.csv"), &table2_csv(&result, &meta))?;
            if args.which == Which::DecayFit {
                write_text(&out_path(cfg, "decay_fit.csv"), &decay_fit_csv(&result, &meta))?;
            }
            if result.completed() == 0 {
                return Err(CliError::Numerical("no sweep cell completed".into()));
            }
        }
        Which::Table3 => {
            let tap_dt = args.dt.first().copied().unwrap_or(0.05);
            let spec = koopinv::FeatureSpec::history_derivatives(args.window, tap_dt, 0);
            cfg.check_spec(&spec)?;
            let sweep_cfg = cfg.derivative_sweep(args.window, tap_dt, args.regime.map(|r| vec![r]));
            let sweep = sweep_derivatives(&data, &sweep_cfg, cfg.seed, cfg.jobs)?;
            for row in &sweep.rows {
                if let Err(msg) = &row.outcome {
                    eprintln!("{} {} failed: {msg}", row.operator, row.regime.label());
                }
            }
            write_text(&out_path(cfg, "table3.csv"), &table3_csv(&sweep, &meta))?;
            if sweep.rows.iter().all(|r| r.outcome.is_err()) {
                return Err(CliError::Numerical("no sweep cell completed".into()));
            }
        }
    }
    Ok(())
}

pub fn decay(cfg: &RunConfig, args: &DecayArgs) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let nf = normal_form(&sys, DEFAULT_TOL)?;
    let excitation = cfg.excitation()?;
    let x0 = DVector::zeros(sys.order());
    let y = lti::simulate(&sys, &excitation, &x0, cfg.base_dt(), excitation.duration())?.select(&["y"])?;
    let windows = if args.windows.is_empty() { cfg.windows.clone() } else { args.windows.clone() };
    let exp = hidden_state_decay(&nf, &y, &windows)?;
    write_text(&out_path(cfg, "decay.csv"), &decay_experiment_csv(&exp, &base_meta(cfg)))?;
    println!(
        "fitted rate {:.4}, bound rate {:.4}, within bound: {}",
        exp.fit.alpha,
        exp.bound.alpha1,
        exp.within_bound()
    );
    Ok(())
}
