use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use coupling_lab::exact::{
    coupling_inequality_verify, invariant_measures, parse_chain, parse_kernel,
    splice_marginal_check, CouplingKernel, Scalar,
};
use coupling_lab::Error;
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::commands::Failure;
use crate::output::write_json;

pub struct ExactArgs {
    pub chain: PathBuf,
    pub kernel: Option<PathBuf>,
    pub x: usize,
    pub y: usize,
    pub horizon: usize,
    pub exact: bool,
    pub splice: bool,
    pub path_cap: usize,
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn input(path: &Path, e: Error) -> Failure {
    match e {
        Error::InvariantViolation(_) => Failure::Runtime(e.to_string()),
        _ => Failure::Validation(format!("{}: {e}", path.display())),
    }
}

fn scalar<S: Scalar + Display>(v: &S, exact: bool) -> Value {
    if exact {
        json!({ "value": v.to_f64(), "exact": v.to_string() })
    } else {
        json!(v.to_f64())
    }
}

pub fn run(args: &ExactArgs) -> Result<(), Failure> {
    if args.exact {
        run_with::<BigRational>(args)
    } else {
        run_with::<f64>(args)
    }
}

fn run_with<S: Scalar + Display>(args: &ExactArgs) -> Result<(), Failure> {
    let chain = parse_chain::<S>(&read(&args.chain)?).map_err(|e| input(&args.chain, e))?;
    let n = chain.size();
    for (name, s) in [("--x", args.x), ("--y", args.y)] {
        if s >= n {
            return Err(Failure::Validation(format!(
                "{name}: state {s} is outside 0..{n}"
            )));
        }
    }
    let kernel = match &args.kernel {
        Some(p) => parse_kernel::<S>(&read(p)?).map_err(|e| input(p, e))?,
        None => CouplingKernel::independent_glued(&chain),
    };
    let kernel_path = args.kernel.clone().unwrap_or_default();
    let report = coupling_inequality_verify(&chain, &kernel, args.x, args.y, args.horizon)
        .map_err(|e| input(&kernel_path, e))?;
    let verdict = if report.holds() {
        "inequality holds"
    } else {
        "inequality violated"
    };

    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "t": r.t,
                "tv": scalar(&r.tv, args.exact),
                "survival": scalar(&r.survival, args.exact),
                "holds": r.holds,
            })
        })
        .collect();
    let invariant = match invariant_measures(&chain) {
        Ok(ms) => json!(ms
            .iter()
            .map(|m| m
                .probs()
                .iter()
                .map(|p| scalar(p, args.exact))
                .collect::<Vec<_>>())
            .collect::<Vec<_>>()),
        Err(e) => json!(e.to_string()),
    };
    let mut summary = json!({
        "command": "exact",
        "chain": args.chain,
        "kernel": args.kernel.as_ref().map(|p| json!(p)).unwrap_or(json!("independent, glued on the diagonal")),
        "arithmetic": if args.exact { "rational" } else { "f64" },
        "states": n,
        "x": args.x,
        "y": args.y,
        "horizon": args.horizon,
        "rows": rows,
        "survival_gap": scalar(&report.survival_gap, args.exact),
        "violations": report.violations(),
        "invariant_measures": invariant,
        "verdict": verdict,
    });
    let mut splice_ok = true;
    if args.splice {
        let s = splice_marginal_check(&chain, &kernel, args.x, args.y, args.horizon, args.path_cap)
            .map_err(|e| match e {
                Error::Precondition(_) => Failure::Validation(format!("--path-cap: {e}")),
                e => input(&kernel_path, e),
            })?;
        splice_ok = s.holds();
        summary["splice"] = json!({
            "paths": s.paths,
            "l1_errors": s.l1_errors.iter().map(|v| scalar(v, args.exact)).collect::<Vec<_>>(),
            "max_error": scalar(&s.max_error(), args.exact),
            "verdict": if splice_ok { "splice preserves the law" } else { "splice changes the law" },
        });
    }

    match &args.out {
        Some(p) => write_json(p, &summary)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?,
        None => println!("{}", serde_json::to_string_pretty(&summary).expect("json")),
    }
    eprintln!("{verdict} over {} steps", args.horizon);
    if !report.holds() {
        return Err(Failure::Runtime(format!(
            "{verdict} at t = {:?}",
            report.violations()
        )));
    }
    if !splice_ok {
        return Err(Failure::Runtime("splice changes the law".into()));
    }
    Ok(())
}
