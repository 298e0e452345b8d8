use std::path::{Path, PathBuf};

use coupling_lab::coupling::CoupledState;
use coupling_lab::estimators::{
    cesaro_estimate, density_series, drift_bound, drift_bound_exact, indicator_mismatch_rate,
    run_coupled, CoupledProcess, Process, Recording,
};
use coupling_lab::lattice::{density_in_ball, Cylinder, Density};
use coupling_lab::Error;
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::config::{ConfigError, Experiment};
use crate::output::{num, write_json, write_lines, Table};

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

pub fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn f(d: Density) -> f64 {
    *d.numer() as f64 / *d.denom() as f64
}

fn output_paths(exp: &Experiment, command: &str) -> (PathBuf, PathBuf) {
    let out = &exp.config.output;
    (
        out.csv
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{command}.csv"))),
        out.json
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{command}.json"))),
    )
}

fn seeds(exp: &Experiment) -> Value {
    json!({
        "base": exp.plan.seed,
        "rule": "replica i draws from ChaCha8 seeded with the base seed on stream i; a second sampler uses stream 2^32 + i",
        "replicas": exp.plan.replicas,
    })
}

fn write(table: &Table, csv: &Path, summary: &Value, json_path: &Path) -> Result<(), Failure> {
    table.write(csv).map_err(|e| io_failure(csv, e))?;
    write_json(json_path, summary).map_err(|e| io_failure(json_path, e))?;
    println!(
        "wrote {} rows to {} and a summary to {}",
        table.rows.len(),
        csv.display(),
        json_path.display()
    );
    Ok(())
}

fn cylinder_text(c: &Cylinder) -> String {
    c.base()
        .iter()
        .map(|(p, v)| {
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            format!("{}:{v}", coords.join(" "))
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn couple(exp: &Experiment) -> Result<(), Failure> {
    let (kind, distance, shift_bound) = exp.coupling()?;
    let rule = exp.dynamics.rule().cloned().ok_or_else(|| {
        Failure::Validation(format!(
            "model.name: {:?} has no particle rule to couple",
            exp.dynamics.name()
        ))
    })?;
    let y = exp.y.clone().ok_or_else(|| {
        Failure::Validation("initial.y: missing; couple needs both components".into())
    })?;
    let process = CoupledProcess::new(rule, kind, distance, exp.x.clone(), y)
        .map_err(|e| Failure::Validation(format!("coupling: {e}")))?;
    let rec = Recording {
        discrepancy_radius: exp.config.record.discrepancy_radius,
        shift_bound,
        density_radii: exp.config.record.density_radii.clone(),
        cylinders: exp.cylinders.clone(),
    };
    let run = run_coupled(&process, &exp.plan, &rec, exp.z).map_err(runtime)?;
    let mismatch = exp
        .cylinders
        .iter()
        .map(|c| indicator_mismatch_rate(&process, c, shift_bound, &exp.plan, exp.z))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;

    let mut header: Vec<String> = [
        "t",
        "discrepancy_mean",
        "discrepancy_median",
        "discrepancy_ci",
        "shifted_discrepancy_mean",
        "shifted_discrepancy_median",
        "shifted_discrepancy_ci",
        "unpaired_fraction_mean",
        "unpaired_fraction_median",
        "unpaired_fraction_ci",
        "paired_mean",
    ]
    .map(String::from)
    .to_vec();
    for n in &rec.density_radii {
        header.push(format!("density_n{n}_mean"));
    }
    for k in 0..exp.cylinders.len() {
        header.extend([
            format!("mismatch_c{k}"),
            format!("mismatch_c{k}_ci"),
            format!("mismatch_c{k}_shift"),
        ]);
    }
    let mut table = Table::new(header);
    table.comment(format!(
        "coupled run: model {}, {kind:?} coupling, L = {distance}, shift bound {shift_bound}",
        exp.dynamics.name()
    ));
    table.comment(format!(
        "{} replicas, horizon {}, seed {}",
        exp.plan.replicas, exp.plan.horizon, exp.plan.seed
    ));
    table.comment("discrepancy_*: fraction of ball sites where the components differ (mean, median, z-standard-error radius)");
    table.comment("shifted_discrepancy_*: the same minimized over shifts of the second component up to the shift bound");
    table.comment("unpaired_fraction_*: unpaired particles of both components over all particles; paired_mean: mean pair count");
    table.comment(
        "density_n<n>_mean: mean particle density of the first component in the ball of radius n",
    );
    for (k, c) in exp.cylinders.iter().enumerate() {
        table.comment(format!(
            "mismatch_c{k}: estimated P(1_A(x) != 1_A(shifted y)) for A = [{}], minimized over shifts; _shift is the minimizer",
            cylinder_text(c)
        ));
    }
    let r = run.replicas.len() as f64;
    for t in 0..=exp.plan.horizon {
        let mut row = vec![
            t.to_string(),
            num(run.discrepancy.mean[t]),
            num(run.discrepancy.median[t]),
            num(run.discrepancy.ci[t]),
            num(run.shifted_discrepancy.mean[t]),
            num(run.shifted_discrepancy.median[t]),
            num(run.shifted_discrepancy.ci[t]),
            num(run.unpaired_fraction.mean[t]),
            num(run.unpaired_fraction.median[t]),
            num(run.unpaired_fraction.ci[t]),
            num(run.replicas.iter().map(|s| s.paired[t] as f64).sum::<f64>() / r),
        ];
        for k in 0..rec.density_radii.len() {
            row.push(num(run
                .replicas
                .iter()
                .map(|s| s.densities[k][t])
                .sum::<f64>()
                / r));
        }
        for (series, offsets) in &mismatch {
            let shift: Vec<String> = offsets[series.best[t]]
                .iter()
                .map(|v| v.to_string())
                .collect();
            row.extend([num(series.rate[t]), num(series.ci[t]), shift.join(" ")]);
        }
        table.rows.push(row);
    }

    let last = exp.plan.horizon;
    let summary = json!({
        "command": "couple",
        "config": exp.config,
        "seeds": seeds(exp),
        "rows": table.rows.len(),
        "final": {
            "t": last,
            "discrepancy_mean": run.discrepancy.mean[last],
            "shifted_discrepancy_mean": run.shifted_discrepancy.mean[last],
            "shifted_discrepancy_median": run.shifted_discrepancy.median[last],
            "unpaired_fraction_mean": run.unpaired_fraction.mean[last],
            "unpaired_fraction_median": run.unpaired_fraction.median[last],
            "mismatch": mismatch.iter().map(|(s, _)| s.rate[last]).collect::<Vec<_>>(),
        },
    });
    let (csv, json_path) = output_paths(exp, "couple");
    write(&table, &csv, &summary, &json_path)?;

    if let Some(trace) = &exp.config.output.trace {
        if !kind.uses_pairing() {
            return Err(Failure::Validation(
                "output.trace: only pairing couplings emit events".into(),
            ));
        }
        let lines = trace_replica(&process, exp).map_err(runtime)?;
        write_lines(trace, &lines).map_err(|e| io_failure(trace, e))?;
    }
    Ok(())
}

/// Pairing events of replica 0 as JSON lines.
fn trace_replica(process: &CoupledProcess, exp: &Experiment) -> coupling_lab::Result<Vec<String>> {
    let mut rng = exp.plan.rng(0, 0);
    let mut st: CoupledState = process.initial(&mut rng)?;
    st.enable_trace();
    let mut lines = Vec::new();
    for _ in 0..exp.plan.horizon {
        process.step(&mut st, &mut rng)?;
        for e in st.take_events() {
            lines.push(serde_json::to_string(&e).expect("events serialize"));
        }
    }
    Ok(lines)
}

pub fn density(exp: &Experiment) -> Result<(), Failure> {
    let radii = exp.config.record.density_radii.clone();
    let v = exp.dynamics.max_velocity();
    let (dim, alphabet) = (exp.lattice.dim(), exp.alphabet.size());
    let bounds = radii
        .iter()
        .map(|&n| {
            Ok((
                drift_bound(n, v, dim, alphabet)?,
                drift_bound_exact(n, v, dim, alphabet)?,
            ))
        })
        .collect::<coupling_lab::Result<Vec<(f64, BigRational)>>>()
        .map_err(|e| Failure::Validation(format!("record.density_radii: {e}")))?;
    let series = exp
        .plan
        .run(0, |_, rng| {
            let x0 = exp.x.sample(rng)?;
            density_series(&exp.dynamics, &x0, &radii, exp.plan.horizon, rng)
        })
        .map_err(runtime)?;

    let mut header = vec!["t".to_string(), "full_mean".to_string()];
    for n in &radii {
        header.extend([
            format!("rho_n{n}_mean"),
            format!("step_n{n}_max"),
            format!("bound_n{n}"),
        ]);
    }
    let mut table = Table::new(header);
    table.comment(format!(
        "density series: model {}, {} replicas, horizon {}, seed {}",
        exp.dynamics.name(),
        exp.plan.replicas,
        exp.plan.horizon,
        exp.plan.seed
    ));
    table.comment("full_mean: particle density over the whole lattice, averaged over replicas");
    table.comment("rho_n<n>_mean: density in the ball of radius n; step_n<n>_max: largest |rho(t) - rho(t-1)| over replicas");
    table.comment(format!("bound_n<n>: drift bound 2|A| max(1 - (1 - 2V/(2n+1))^d, (1 + 2V/(2n+1))^d - 1) with V = {v}, d = {dim}, |A| = {alphabet}"));
    let r = series.len() as f64;
    let mut violations = Vec::new();
    for t in 0..=exp.plan.horizon {
        let mut row = vec![
            t.to_string(),
            num(series.iter().map(|s| f(s.full[t])).sum::<f64>() / r),
        ];
        for (k, &n) in radii.iter().enumerate() {
            let mean = series.iter().map(|s| f(s.by_radius[k][t])).sum::<f64>() / r;
            let step = if t == 0 {
                Density::from_integer(0)
            } else {
                series
                    .iter()
                    .map(|s| {
                        let d = s.by_radius[k][t] - s.by_radius[k][t - 1];
                        if d < Density::from_integer(0) {
                            -d
                        } else {
                            d
                        }
                    })
                    .max()
                    .expect("at least one replica")
            };
            let exact_step = BigRational::new((*step.numer()).into(), (*step.denom()).into());
            if exp.dynamics.is_conservative() && exact_step > bounds[k].1 {
                violations.push(format!("t = {t}, n = {n}"));
            }
            row.extend([num(mean), num(f(step)), num(bounds[k].0)]);
        }
        table.rows.push(row);
    }
    let summary = json!({
        "command": "density",
        "config": exp.config,
        "seeds": seeds(exp),
        "rows": table.rows.len(),
        "drift_bounds": radii.iter().zip(&bounds).map(|(n, b)| json!({"n": n, "bound": b.0, "exact": b.1.to_string()})).collect::<Vec<_>>(),
        "conservative": exp.dynamics.is_conservative(),
        "bound_violations": violations,
    });
    let (csv, json_path) = output_paths(exp, "density");
    write(&table, &csv, &summary, &json_path)?;
    if !violations.is_empty() {
        return Err(Failure::Runtime(format!(
            "drift bound exceeded at {}",
            violations.join("; ")
        )));
    }
    Ok(())
}

pub fn cesaro(exp: &Experiment) -> Result<(), Failure> {
    let n = exp
        .config
        .record
        .averaging
        .unwrap_or(exp.plan.horizon.max(1));
    let cylinders = if exp.cylinders.is_empty() {
        vec![Cylinder::at_origin(exp.lattice.dim(), 1)]
    } else {
        exp.cylinders.clone()
    };
    let m =
        cesaro_estimate(&exp.dynamics, &exp.x, n, &cylinders, &exp.plan, exp.z).map_err(runtime)?;
    let mut table = Table::new(
        ["cylinder", "estimate", "ci", "lower", "upper"]
            .map(String::from)
            .to_vec(),
    );
    table.comment(format!(
        "Cesaro averages (1/N) sum_(t<N) P(x^t in A) with N = {n}: model {}, {} replicas, seed {}",
        exp.dynamics.name(),
        exp.plan.replicas,
        exp.plan.seed
    ));
    table.comment(format!(
        "ci = {} sqrt(p (1 - p) / R); lower and upper clip to [0, 1]",
        exp.z
    ));
    for (k, cyl) in cylinders.iter().enumerate() {
        let (p, c) = (m.estimates[k], m.ci[k]);
        table.rows.push(vec![
            cylinder_text(cyl),
            num(p),
            num(c),
            num((p - c).max(0.0)),
            num((p + c).min(1.0)),
        ]);
    }
    let summary = json!({
        "command": "cesaro",
        "config": exp.config,
        "seeds": seeds(exp),
        "averaging": n,
        "measure": m,
    });
    let (csv, json_path) = output_paths(exp, "cesaro");
    write(&table, &csv, &summary, &json_path)
}

pub fn simulate(exp: &Experiment) -> Result<(), Failure> {
    let radii = exp.config.record.density_radii.clone();
    let mut rng = exp.plan.rng(0, 0);
    let mut x = exp.x.sample(&mut rng).map_err(runtime)?;
    let mut header = vec!["t".to_string(), "particles".to_string()];
    header.extend(radii.iter().map(|n| format!("density_n{n}")));
    header.push("configuration".to_string());
    let mut table = Table::new(header);
    table.comment(format!(
        "single trajectory (replica 0): model {}, horizon {}, seed {}",
        exp.dynamics.name(),
        exp.plan.horizon,
        exp.plan.seed
    ));
    table.comment("configuration: site values in index order, one base-36 digit per site");
    for t in 0..=exp.plan.horizon {
        if t > 0 {
            x = exp.dynamics.advance(&x, &mut rng).map_err(runtime)?;
        }
        let mut row = vec![t.to_string(), x.particle_count().to_string()];
        for &n in &radii {
            row.push(num(f(density_in_ball(&x, n).map_err(runtime)?)));
        }
        row.push(x.to_line());
        table.rows.push(row);
    }
    let summary = json!({
        "command": "simulate",
        "config": exp.config,
        "seeds": seeds(exp),
        "rows": table.rows.len(),
        "final_particles": x.particle_count(),
    });
    let (csv, json_path) = output_paths(exp, "simulate");
    write(&table, &csv, &summary, &json_path)
}
