//! The named experiments. Each returns its artifacts and a JSON summary
//! that goes into the manifest.

use chi2atom::czgate::{run_cz, sweep_g, GateConfig};
use chi2atom::dynamics::*;
use chi2atom::envelope::Envelope;
use chi2atom::fock::*;
use chi2atom::ode::uniform_grid;
use chi2atom::scattering::*;
use chi2atom::storage::*;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;
use crate::output::{Artifact, Cell, Table};

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

/// Run the configured experiment; the config must already be validated.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let context = serde_json::to_string(&cfg.experiment.params_json()).unwrap_or_default();
    let num = |module: &'static str| {
        let context = context.clone();
        move |e: chi2atom::Error| CliError::from_core(module, context.clone(), e)
    };
    match &cfg.experiment {
        Experiment::Levels(p) => levels(p, num("fock")),
        Experiment::Spectroscopy(p) => spectroscopy(p, num("dynamics")),
        Experiment::Rabi(p) => rabi(p, num("dynamics")),
        Experiment::Scatter2(p) => scatter2(cfg, p, num("scattering")),
        Experiment::Store(p) => store(cfg, p, num("storage")),
        Experiment::Retrieve(p) => retrieve(cfg, p, num("storage")),
        Experiment::Cz(g) => cz(g, num("czgate")),
        Experiment::Sweep(p) => sweep(p, &context),
    }
}

fn dominant(v: &nalgebra::DVector<num_complex::Complex64>) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i)
}

fn levels(p: &LevelsParams, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let basis = build_basis(&p.atom, p.n_max).map_err(&num)?;
    let mut h = build_hamiltonian(&p.atom, &basis).map_err(&num)?;
    if p.with_loss {
        h = effective_hamiltonian(&h, &basis, &p.atom.modes).map_err(&num)?;
    }
    let mut table = Table::new(["block", "index", "re", "im", "dominant"]);
    let mut splitting = Vec::new();
    for n in 0..=p.n_max {
        let levels = match eigenlevels(&h, &basis, n) {
            Ok(l) => l,
            Err(chi2atom::Error::EmptyBlock(_)) => continue,
            Err(e) => return Err(num(e)),
        };
        for (k, (lam, v)) in levels.iter().enumerate() {
            table.push(vec![
                n.into(),
                k.into(),
                lam.re.into(),
                lam.im.into(),
                basis.state_label(dominant(v)).into(),
            ]);
        }
        splitting.push(json!({
            "block": n,
            "states": levels.len(),
            "splitting": levels[levels.len() - 1].0.re - levels[0].0.re,
        }));
    }
    Ok(Outcome {
        artifacts: vec![Artifact::Table("levels".into(), table)],
        summary: json!({ "basis_size": basis.len(), "blocks": splitting }),
    })
}

fn label_index(basis: &FockBasis, key: &str, label: &Option<String>, default: &[(ModeLabel, usize)]) -> Result<Option<usize>, CliError> {
    match label {
        Some(l) => (0..basis.len())
            .find(|&i| basis.state_label(i) == *l)
            .map(Some)
            .ok_or_else(|| CliError::config(key, format!("no basis state labelled `{l}`"))),
        None => Ok(basis.index_with(default).ok()),
    }
}

fn spectroscopy(p: &SpectroscopyParams, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let basis = build_basis(&p.atom, p.n_max).map_err(&num)?;
    let monitor = label_index(&basis, "params.monitor", &p.monitor, &[(p.mode, 2)])?;
    let det = uniform_grid(p.detuning.start, p.detuning.stop, p.detuning.points);
    let rates = atom_rates(&p.atom);
    let pops: Vec<Vec<f64>> = det
        .par_iter()
        .map(|&detuning| {
            let drive = DriveSpec {
                mode: p.mode,
                amplitude: p.amplitude,
                detuning,
            };
            let h = driven_hamiltonian(&p.atom, &basis, &drive)?;
            Ok(steady_state(&h, &basis, &rates)?.populations())
        })
        .collect::<chi2atom::Result<_>>()
        .map_err(&num)?;
    let mut columns = vec!["detuning".to_string()];
    columns.extend((0..basis.len()).map(|i| format!("p_{}", basis.state_label(i))));
    let mut table = Table::new(columns);
    for (d, row) in det.iter().zip(&pops) {
        let mut r: Vec<Cell> = vec![(*d).into()];
        r.extend(row.iter().map(|&x| Cell::Num(x)));
        table.push(r);
    }
    let summary = match monitor {
        Some(m) => {
            let y: Vec<f64> = pops.iter().map(|r| r[m]).collect();
            let peaks = find_peaks(&det, &y);
            let centre = det
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| y[i])
                .unwrap_or(f64::NAN);
            let smallest = peaks.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            json!({
                "monitor": basis.state_label(m),
                "peaks": peaks.iter().map(|(x, y)| json!({ "detuning": x, "population": y })).collect::<Vec<_>>(),
                "population_at_zero_detuning": centre,
                "suppression": if peaks.is_empty() { Value::Null } else { json!(smallest / centre) },
            })
        }
        None => json!({ "monitor": Value::Null }),
    };
    Ok(Outcome {
        artifacts: vec![Artifact::Table("spectrum".into(), table)],
        summary,
    })
}

fn trajectory_table(tr: &Trajectory) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(tr.labels.iter().map(|l| format!("p_{l}")));
    let pure = match &tr.snapshots {
        Snapshots::Pure(s) => Some(s),
        Snapshots::Mixed(_) => None,
    };
    if pure.is_some() {
        for l in &tr.labels {
            columns.push(format!("re_{l}"));
            columns.push(format!("im_{l}"));
        }
    }
    let mut table = Table::new(columns);
    for (k, t) in tr.times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(*t).into()];
        row.extend(tr.populations[k].iter().map(|&x| Cell::Num(x)));
        if let Some(states) = pure {
            for a in states[k].amplitudes.iter() {
                row.push(a.re.into());
                row.push(a.im.into());
            }
        }
        table.push(row);
    }
    table
}

fn rabi(p: &RabiParams, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let basis = build_basis(&p.atom, p.n_max).map_err(&num)?;
    let monitor = label_index(&basis, "params.monitor", &p.monitor, &[(p.mode, 1)])?;
    let times = uniform_grid(0.0, p.t_end, p.points);
    let tr = match p.method {
        Method::NoJump => driven_no_jump(&p.atom, &basis, p.mode, p.amplitude, &times, p.tolerance),
        Method::Lindblad => {
            let drive = DriveSpec {
                mode: p.mode,
                amplitude: p.amplitude,
                detuning: 0.0,
            };
            driven_hamiltonian(&p.atom, &basis, &drive).and_then(|h| {
                evolve_lindblad(
                    &h,
                    &basis,
                    &atom_rates(&p.atom),
                    &DensityMatrix::pure(&basis.vacuum(), 0.0),
                    &times,
                    p.tolerance,
                )
            })
        }
    }
    .map_err(&num)?;
    let summary = match monitor {
        Some(m) => {
            let y: Vec<f64> = tr.populations.iter().map(|r| r[m]).collect();
            json!({
                "monitor": basis.state_label(m),
                "period": oscillation_period(&times, &y),
                "max_population": y.iter().copied().fold(0.0, f64::max),
            })
        }
        None => json!({ "monitor": Value::Null }),
    };
    Ok(Outcome {
        artifacts: vec![Artifact::Table("trajectory".into(), trajectory_table(&tr))],
        summary,
    })
}

fn scatter2(cfg: &ExperimentConfig, p: &Scatter2Params, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let input = match &p.input {
        SpectrumSource::Gaussian {
            center,
            sigma,
            half_width,
            points,
        } => JointSpectrum::gaussian(*center, *sigma, *half_width, *points).map_err(&num)?,
        SpectrumSource::File { path } => cfg.read_spectrum("params.input.path", path)?,
    };
    let out = scatter_joint_spectrum(&input, &p.cavity).map_err(&num)?;
    let shg = shg_efficiency(&input, &p.cavity).map_err(&num)?;
    let tail = bound_tail_probability(&input, &p.cavity).map_err(&num)?;
    let mut beta = Table::new(["energy", "re", "im", "abs2"]);
    for (e, b) in shg.energies.iter().zip(&shg.beta) {
        beta.push(vec![(*e).into(), b.re.into(), b.im.into(), b.norm_sqr().into()]);
    }
    let mut summary = json!({
        "input_norm": input.norm_sqr(),
        "input_schmidt_number": input.schmidt_number(),
        "output_norm": out.norm_sqr(),
        "output_schmidt_number": out.schmidt_number(),
        "bound_tail_probability": tail,
        "shg_efficiency": shg.eta,
        "sh_probability": shg.sh_probability,
    });
    let mut artifacts = vec![
        Artifact::Spectrum("input_jsa".into(), input.clone()),
        Artifact::Spectrum("output_jsa".into(), out.clone()),
        Artifact::Table("shg".into(), beta),
    ];
    if let Some(grid) = &p.oracle {
        let oracle = time_domain_oracle(&input, &p.cavity, grid, p.tolerance).map_err(&num)?;
        summary["oracle"] = json!({
            "l2_distance": out.distance(&oracle.spectrum).map_err(&num)?,
            "shg_efficiency": oracle.eta,
            "two_photon_probability": oracle.two_photon_probability,
        });
        artifacts.push(Artifact::Spectrum("oracle_jsa".into(), oracle.spectrum));
    }
    Ok(Outcome { artifacts, summary })
}

fn pulse(cfg: &ExperimentConfig, key: &str, src: &PulseSource, num: &impl Fn(chi2atom::Error) -> CliError) -> Result<Envelope, CliError> {
    match src {
        PulseSource::TruncatedGaussian { start, duration, points } => Envelope::truncated_gaussian(*start, *duration, *points).map_err(num),
        PulseSource::File { path } => cfg.read_envelope(&format!("{key}.path"), path),
    }
}

fn store(cfg: &ExperimentConfig, p: &StoreParams, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let input = pulse(cfg, "params.input", &p.input, &num)?;
    let drive = match &p.drive {
        DriveSource::Optimal => optimal_storage_drive(&input, p.antenna.kappa_d(), p.antenna.omega_cap()).map_err(&num)?,
        DriveSource::File { path } => cfg.read_envelope("params.drive.path", path)?,
    };
    let r = simulate_storage(&input, &drive, &p.antenna, p.tolerance).map_err(&num)?;
    let summary = json!({
        "eta_s": r.eta_s,
        "efficiency_bound": p.antenna.efficiency_bound(),
        "input_energy": input.energy(),
        "drive_energy": drive_energy(&drive),
        "leaked": r.output.energy(),
        "loss": r.loss,
        "balance_defect": r.balance_defect(input.energy()),
        "warnings": r.warnings,
    });
    Ok(Outcome {
        artifacts: vec![
            Artifact::Envelope("input".into(), input),
            Artifact::Envelope("drive".into(), drive),
            Artifact::Envelope("leak".into(), r.output),
        ],
        summary,
    })
}

fn retrieve(cfg: &ExperimentConfig, p: &RetrieveParams, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let target = match &p.target {
        Some(t) => Some(pulse(cfg, "params.target", t, &num)?),
        None => None,
    };
    let drive = match (&p.drive, &target) {
        (DriveSource::Optimal, Some(t)) => optimal_retrieval_drive(t, p.antenna.kappa_d(), p.antenna.omega_cap()).map_err(&num)?,
        (DriveSource::Optimal, None) => return Err(CliError::config("params.target", "required for the optimal drive")),
        (DriveSource::File { path }, _) => cfg.read_envelope("params.drive.path", path)?,
    };
    let r = simulate_retrieval(&drive, &p.antenna, p.tolerance).map_err(&num)?;
    let mut summary = json!({
        "eta_r": r.eta_r,
        "efficiency_bound": p.antenna.efficiency_bound(),
        "drive_energy": drive_energy(&drive),
        "loss": r.loss,
        "balance_defect": r.balance_defect(1.0),
        "warnings": r.warnings,
    });
    if p.antenna.kappa_b == 0.0 {
        summary["eta_r_closed_form"] = json!(retrieval_efficiency_closed_form(drive_energy(&drive), &p.antenna));
    }
    let mut artifacts = vec![
        Artifact::Envelope("drive".into(), drive),
        Artifact::Envelope("output".into(), r.output.clone()),
    ];
    if let Some(t) = target {
        if t.check_same_grid(&r.output).is_ok() && r.output.energy() > 0.0 {
            summary["shape_fidelity"] = json!(t.overlap(&r.output).map_err(&num)?.norm_sqr() / (t.energy() * r.output.energy()));
        }
        artifacts.insert(0, Artifact::Envelope("target".into(), t));
    }
    Ok(Outcome { artifacts, summary })
}

fn cz(g: &GateConfig, num: impl Fn(chi2atom::Error) -> CliError) -> Result<Outcome, CliError> {
    let r = run_cz(g).map_err(&num)?;
    let mut fid = Table::new(["input", "F_raw", "F_ps", "P_detect"]);
    for k in 0..r.table.inputs.len() {
        fid.push(vec![
            r.table.inputs[k].clone().into(),
            r.table.f_raw[k].into(),
            r.table.f_ps[k].into(),
            r.table.p_detect[k].into(),
        ]);
    }
    let summary = json!({
        "g": r.g,
        "phi_cond": r.phi_cond,
        "eta_s": r.eta_s,
        "eta_r": r.eta_r,
        "round_trip": r.round_trip,
        "F_raw": r.f_raw,
        "F_ps": r.f_ps,
        "P_ps": r.p_ps,
        "F_raw_config": r.f_raw_config,
        "F_ps_config": r.f_ps_config,
        "balance_defect": r.balance_defect,
    });
    let mut report = summary.clone();
    report["files"] = json!({
        "control_in": "control_in",
        "target_in": "target_in",
        "b_out0": "b_out0",
        "b_out1": "b_out1",
        "a_out": "a_out",
        "fidelity": "fidelity",
    });
    Ok(Outcome {
        artifacts: vec![
            Artifact::Envelope("control_in".into(), r.control_in),
            Artifact::Envelope("target_in".into(), r.target_in),
            Artifact::Envelope("b_out0".into(), r.b_out0),
            Artifact::Envelope("b_out1".into(), r.b_out1),
            Artifact::Envelope("a_out".into(), r.a_out),
            Artifact::Table("fidelity".into(), fid),
            Artifact::Json("report".into(), report),
        ],
        summary,
    })
}

fn sweep(p: &SweepParams, context: &str) -> Result<Outcome, CliError> {
    let mut rows = sweep_g(&p.gate, &p.g_values()).map_err(|e| CliError::from_core("czgate", context, e))?;
    rows.sort_by(|a, b| a.g.total_cmp(&b.g));
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({ "g": r.g, "error": e })))
        .collect();
    if failures.len() == rows.len() {
        let first = rows[0].error.clone().unwrap_or_default();
        return Err(CliError::Numerical {
            module: "czgate",
            context: context.to_string(),
            source: chi2atom::Error::NonConvergence {
                what: "every sweep point".into(),
                reason: first,
            },
        });
    }
    let mut table = Table::new(["g", "F_raw", "F_ps", "P_ps", "phi_cond"]);
    for r in &rows {
        table.push(vec![r.g.into(), r.f_raw.into(), r.f_ps.into(), r.p_ps.into(), r.phi_cond.into()]);
    }
    let crossing = rows.iter().find(|r| r.f_ps >= 0.99).map(|r| r.g);
    let monotone = rows.windows(2).all(|w| w[1].f_ps >= w[0].f_ps);
    Ok(Outcome {
        artifacts: vec![Artifact::Table("sweep".into(), table)],
        summary: json!({
            "points": rows.len(),
            "failures": failures,
            "F_ps_monotone": monotone,
            "first_g_with_F_ps_above_0.99": crossing,
        }),
    })
}
