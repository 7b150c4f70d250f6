use std::f64::consts::PI;
use std::path::Path;

use speedwitness_core::klmc::{self, SamplingPlan};
use speedwitness_core::qsim::{self, Boundary, CollectiveHamiltonian, StateVector};
use speedwitness_core::sep::{self, BoundModel, OptimizerSettings};
use speedwitness_core::witness::{self, DepthVerdict};

use crate::config::{parse_grid, RunConfig};
use crate::error::{usage, CliError, CliResult};
use crate::records::parse_records;
use crate::report::{KlFit, KlRow, KlSummary, Metadata, OracleRow, Payload, ReportDocument, WitnessRow};

fn boundary(cfg: &RunConfig) -> CliResult<Boundary> {
    match cfg.raw("boundary").unwrap_or("periodic") {
        "periodic" => Ok(Boundary::Periodic),
        "open" => Ok(Boundary::Open),
        other => usage(format!("unknown boundary `{other}` (periodic|open)")),
    }
}

fn direction(cfg: &RunConfig) -> CliResult<[f64; 3]> {
    match cfg.raw("direction").unwrap_or("z") {
        "x" => Ok(qsim::DIR_X),
        "y" => Ok(qsim::DIR_Y),
        "z" => Ok(qsim::DIR_Z),
        other => usage(format!("unknown direction `{other}` (x|y|z)")),
    }
}

fn bool_key(cfg: &RunConfig, key: &str) -> CliResult<bool> {
    match cfg.raw(key) {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some(other) => usage(format!("config key `{key}` = `{other}`: expected true or false")),
    }
}

/// Rows of comma-separated numbers.
fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .map(|(i, l)| {
            l.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        CliError::Parse {
                            path: path.to_path_buf(),
                            line: i + 1,
                            msg: format!("`{}` is not a number", x.trim()),
                        }
                    })
                })
                .collect()
        })
        .collect()
}

pub fn cmd_bounds(cfg: &RunConfig) -> CliResult<ReportDocument> {
    let grid = parse_grid(cfg.raw("eps_grid").unwrap_or("0:2:0.01"))?;
    let model = match cfg.raw("model").unwrap_or("ising") {
        "ising" => BoundModel::Ising { boundary: boundary(cfg)? },
        "lmg" => BoundModel::Lmg,
        "custom" => {
            let path = cfg
                .path("coupling_file")
                .ok_or_else(|| CliError::Usage("model `custom` requires `coupling_file`".into()))?;
            let rows = read_matrix(&path)?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return usage(format!("coupling matrix in {} is not square", path.display()));
            }
            BoundModel::Custom {
                coupling: rows.into_iter().flatten().collect(),
            }
        }
        other => return usage(format!("unknown model `{other}` (ising|lmg|custom)")),
    };
    let n = match (&model, cfg.get::<usize>("n")?) {
        (BoundModel::Custom { coupling }, Some(n)) if n * n != coupling.len() => {
            return usage(format!("n = {n} does not match the coupling matrix"))
        }
        (BoundModel::Custom { coupling }, _) => (coupling.len() as f64).sqrt().round() as usize,
        (_, n) => n.unwrap_or(8),
    };
    let alpha = cfg.get_list::<f64>("alpha")?;
    let check = if bool_key(cfg, "cross_check")? {
        Some(OptimizerSettings {
            seed: cfg.get_or("seed", OptimizerSettings::default().seed)?,
            ..OptimizerSettings::default()
        })
    } else {
        None
    };
    let curve = sep::bound_curve(&model, &grid, n, alpha.as_deref(), check.as_ref())?;
    if let Some(ub) = curve
        .upper_bounds
        .iter()
        .zip(&curve.values)
        .position(|(u, v)| u.is_some_and(|u| *v > u * (1.0 + 1e-9) + 1e-12))
    {
        return Err(CliError::Internal(format!(
            "separable value exceeds the termwise bound at ε = {}",
            curve.epsilons[ub]
        )));
    }
    Ok(ReportDocument {
        metadata: Metadata::new(cfg, Vec::new()),
        payload: Payload::Bounds(curve),
    })
}

fn verdict_note(v: &DepthVerdict) -> String {
    let mut note = if v.depth_point < 2 {
        "no entanglement certified".to_string()
    } else if v.genuine {
        format!("genuine {}-partite entanglement", v.n_qubits)
    } else {
        format!("{}-partite entanglement", v.depth_point)
    };
    if v.straddles_bound {
        note.push_str(&format!(
            "; one-sigma interval spans depth {} to {}",
            v.depth_conservative, v.depth_optimistic
        ));
    }
    if v.lower_bound {
        note.push_str("; moments speed is a lower bound");
    }
    note
}

pub fn cmd_witness(cfg: &RunConfig) -> CliResult<ReportDocument> {
    let path = cfg
        .path("records")
        .ok_or_else(|| CliError::Usage("`witness` requires a records file".into()))?;
    let set = parse_records(&path)?;
    let rows = set
        .records
        .iter()
        .map(|r| {
            let verdict = witness::witness_record(&r.record).map_err(|e| CliError::Parse {
                path: path.clone(),
                line: r.line,
                msg: e.to_string(),
            })?;
            Ok(WitnessRow {
                line: r.line,
                n_qubits: r.record.n_qubits,
                kind: r.record.kind(),
                note: verdict_note(&verdict),
                verdict,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ReportDocument {
        metadata: Metadata::new(cfg, set.warnings),
        payload: Payload::Witness(rows),
    })
}

pub fn cmd_simulate_kl(cfg: &RunConfig) -> CliResult<ReportDocument> {
    let v: f64 = cfg.get_or("visibility", 0.787)?;
    let n: usize = cfg.get_or("n", 8)?;
    if n < 1 {
        return usage("n must be ≥ 1");
    }
    let theta0: f64 = cfg.get_or("theta0", PI / (2.0 * n as f64))?;
    let ms = cfg.get_list::<u64>("m")?.unwrap_or_else(|| vec![300, 1000, 3000]);
    let trials: usize = cfg.get_or("trials", 10_000)?;
    let seed: u64 = cfg.get_or("seed", 0)?;
    let scale = 2.0 * n as f64 / PI;
    let dthetas = match (cfg.get_list::<f64>("dtheta")?, cfg.get_list::<f64>("dtheta_scaled")?) {
        (Some(_), Some(_)) => return usage("give either `dtheta` or `dtheta_scaled`, not both"),
        (Some(d), None) => d,
        (None, Some(s)) => s.into_iter().map(|x| x / scale).collect(),
        (None, None) => vec![0.4 / scale],
    };

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut warnings = Vec::new();
    for (i, &m) in ms.iter().enumerate() {
        let plan = SamplingPlan::new(m, trials, seed.wrapping_add(i as u64), theta0, dthetas.clone())?;
        let set = klmc::simulate_parity_experiment(&plan, v, n)?;
        for p in &set.points {
            rows.push(KlRow {
                m,
                dtheta: p.dtheta,
                dtheta_scaled: p.dtheta * scale,
                true_dkl: p.true_dkl,
                mean_est: p.mean,
                bias_pred: p.bias_pred,
                bias_emp: p.bias_emp,
                bias_cv: p.bias_cv,
                var_pred: p.var_pred,
                var_emp: p.variance,
                kept: p.estimates.len(),
                discard_count: p.discards,
            });
        }
        if dthetas.len() >= 3 {
            match klmc::fit_speed_from_kl(&klmc::fit_points(&set, true), theta0) {
                Ok(speed) => fits.push(KlFit { m, speed }),
                Err(e) => warnings.push(format!("fit at m = {m}: {e}")),
            }
        }
    }
    Ok(ReportDocument {
        metadata: Metadata::new(cfg, warnings),
        payload: Payload::SimulateKl(KlSummary {
            visibility: v,
            n_qubits: n,
            theta0,
            trials,
            seed,
            rng: klmc::RNG_ALGORITHM.into(),
            rows,
            fits,
        }),
    })
}

fn read_blochs(path: &Path) -> CliResult<Vec<[f64; 3]>> {
    let rows = read_matrix(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [x, y, z] => Ok([*x, *y, *z]),
            _ => usage(format!("{}: row {} needs 3 components", path.display(), i + 1)),
        })
        .collect()
}

pub fn cmd_oracle(cfg: &RunConfig) -> CliResult<ReportDocument> {
    let state_name = cfg.raw("state").unwrap_or("ghz").to_string();
    let dir = direction(cfg)?;
    let bd = boundary(cfg)?;
    let mut blochs = None;
    let psi: StateVector = match state_name.as_str() {
        "ghz" => qsim::build_ghz(cfg.get_or("n", 8)?)?,
        "chi" => qsim::build_chi(cfg.get_or("n", 8)?)?,
        "product" => {
            let path = cfg
                .path("bloch_file")
                .ok_or_else(|| CliError::Usage("state `product` requires `bloch_file`".into()))?;
            let b = read_blochs(&path)?;
            if let Some(n) = cfg.get::<usize>("n")? {
                if n != b.len() {
                    return usage(format!("n = {n} but {} Bloch vectors given", b.len()));
                }
            }
            let b: Vec<[f64; 3]> = b
                .into_iter()
                .map(qsim::unit_vector)
                .collect::<speedwitness_core::Result<_>>()?;
            let psi = qsim::build_product_state(&b)?;
            blochs = Some(b);
            psi
        }
        other => return usage(format!("unknown state `{other}` (ghz|chi|product)")),
    };
    let n = psi.n_qubits();
    let ham_name = cfg.raw("hamiltonian").unwrap_or("h0").to_string();
    let h = match ham_name.as_str() {
        "h0" => CollectiveHamiltonian::linear(n, dir)?,
        "ising-h1" => CollectiveHamiltonian::ising_h1(n, dir, bd)?,
        "ising" => CollectiveHamiltonian::ising(vec![1.0; n], cfg.get_or("epsilon", 1.0)?, dir, bd)?,
        "lmg" => CollectiveHamiltonian::lmg(vec![1.0; n], cfg.get_or("epsilon", 1.0)?, dir)?,
        other => return usage(format!("unknown hamiltonian `{other}` (h0|ising-h1|ising|lmg)")),
    };
    let speed = qsim::quantum_speed_pure(&h, &psi)?;
    let nf = n as f64;
    let along_z = dir == qsim::DIR_Z;
    let periodic = bd == Boundary::Periodic;
    let analytic = match (state_name.as_str(), ham_name.as_str()) {
        ("ghz", "h0") if along_z => Some(nf * nf),
        ("ghz", "ising-h1") if along_z => Some(0.0),
        ("chi", "ising-h1") if along_z && periodic => Some(nf * nf / 4.0 - nf + 1.0),
        ("product", _) => {
            let b = blochs.as_ref().expect("set for product states");
            let sm: Vec<f64> = b.iter().map(|v| qsim::dot3(*v, h.dir_m())).collect();
            let sn: Vec<f64> = b.iter().map(|v| qsim::dot3(*v, h.dir_n())).collect();
            Some(sep::product_speed_terms(&h, &sm, &sn)?.total(h.epsilon()))
        }
        _ => None,
    };
    Ok(ReportDocument {
        metadata: Metadata::new(cfg, Vec::new()),
        payload: Payload::Oracle(vec![OracleRow {
            state: state_name,
            hamiltonian: ham_name,
            n_qubits: n,
            epsilon: h.epsilon(),
            quantum_speed: speed,
            analytic,
            diff: analytic.map(|a| speed - a),
        }]),
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<ReportDocument> {
    match cfg.command.as_str() {
        "bounds" => cmd_bounds(cfg),
        "witness" => cmd_witness(cfg),
        "simulate-kl" => cmd_simulate_kl(cfg),
        "oracle" => cmd_oracle(cfg),
        other => usage(format!("unknown command `{other}`")),
    }
}
