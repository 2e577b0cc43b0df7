use std::path::Path;

use poisson_approx::bounds::{FreeParams, GFunction, TheoremId};
use poisson_approx::families::{generate, generate_vector, FamilyKind};
use poisson_approx::harness::{
    default_family, evaluate_instance, geometric_grid, run_family, sandwich_record,
    sandwich_sweep, Table,
};
use poisson_approx::simulator::{
    count_check, independence_check, verify_sandwich_exact, verify_sandwich_mc, MarkSampler,
    Region, DEFAULT_GRID_POINTS,
};
use poisson_approx::{BoundContext, LawOptions, ModelFile, RareEventModel};
use serde_json::{json, Value};

use crate::output::{emit, json, render_table, Format};
use crate::{BoundArgs, CliError, Common, ComputeArgs, SimulateArgs, SweepArgs, VerifyArgs};

fn input(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{field}: {msg}"))
}

fn params(bound: &BoundArgs, reps: usize, seed: u64) -> Result<(TheoremId, FreeParams), CliError> {
    let theorem: TheoremId = bound
        .theorem
        .parse()
        .map_err(|e| input("--theorem", e))?;
    let g = bound
        .g
        .as_deref()
        .map(GFunction::by_name)
        .transpose()
        .map_err(|e| input("--g", e))?;
    for (name, v) in [("--tau", bound.tau), ("--gamma", bound.gamma), ("--kappa", bound.kappa)] {
        if v.is_some_and(|x| !x.is_finite()) {
            return Err(input(name, "must be finite"));
        }
    }
    Ok((
        theorem,
        FreeParams {
            tau: bound.tau,
            gamma: bound.gamma,
            kappa: bound.kappa,
            g,
            mc_reps: reps,
            seed,
        },
    ))
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    ModelFile::load(path).map_err(|e| input("--model", e))
}

fn lattice_model(file: &ModelFile) -> Result<RareEventModel, CliError> {
    file.to_model().map(|m| m.0).map_err(|e| input("--model", e))
}

fn write(text: String, common: &Common) -> Result<(), CliError> {
    emit(&text, common.out.as_deref()).map_err(CliError::Input)
}

fn write_table(table: &Table, common: &Common, default: Format) -> Result<(), CliError> {
    let text = render_table(table, common.format.unwrap_or(default)).map_err(CliError::Input)?;
    write(text, common)
}

pub fn compute(a: ComputeArgs) -> Result<(), CliError> {
    let (theorem, params) = params(&a.bound, a.reps, a.common.seed)?;
    let model = lattice_model(&load_model(&a.model)?)?;
    let result = evaluate_instance(0, &model, theorem, &params, LawOptions::default())?;
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let value = serde_json::to_value(&result.evaluation).expect("plain data");
            write(json(&value), &a.common)
        }
        Format::Csv => write_table(
            &Table::from_records(vec![result.record(None)]),
            &a.common,
            Format::Csv,
        ),
    }
}

pub fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let (theorem, params) = params(&a.bound, a.reps, a.common.seed)?;
    if a.families == 0 {
        return Err(input("--families", "must be at least 1"));
    }
    let family = match a.family.as_deref() {
        Some(name) => name.parse::<FamilyKind>().map_err(|e| input("--family", e))?,
        None => default_family(theorem),
    };
    let run = run_family(
        family,
        theorem,
        a.families,
        a.common.seed,
        &params,
        LawOptions::default(),
    )?;
    write_table(&run.table(), &a.common, Format::Csv)
}

fn parse_region(field: &str, text: &str) -> Result<Region, CliError> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in text.split(',') {
        let (l, h) = axis
            .split_once(':')
            .ok_or_else(|| input(field, format!("`{axis}` is not lo:hi")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| input(field, format!("`{s}` is not a number")))
        };
        lo.push(parse(l)?);
        hi.push(parse(h)?);
    }
    Region::new(lo, hi).map_err(|e| input(field, e))
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    if a.reps < 2 {
        return Err(input("--reps", "must be at least 2"));
    }
    let seed = a.common.seed;
    let file = a.model.as_deref().map(load_model).transpose()?;
    let sampler: MarkSampler = match &file {
        Some(f) => f.to_sampler().map_err(|e| input("--model", e))?,
        None => generate_vector(a.dim, seed, 0).map_err(|e| input("--dim", e))?,
    };

    let mut report = serde_json::Map::new();
    report.insert("dim".into(), json!(sampler.dim()));
    report.insert("components".into(), json!(sampler.len()));
    report.insert("seed".into(), json!(seed));
    report.insert("reps".into(), json!(a.reps));

    let lattice = match &file {
        Some(f) if f.dim == 1 => Some(lattice_model(f)?),
        _ => None,
    };
    if let Some(model) = lattice {
        let ctx = BoundContext::new(model, LawOptions::default())?;
        let exact = verify_sandwich_exact(&ctx, a.lambda, a.tau)?;
        report.insert("sandwich".into(), json!(exact));
        if a.mc {
            let mc = verify_sandwich_mc(&sampler, a.lambda, a.tau, a.reps, seed, DEFAULT_GRID_POINTS)?;
            report.insert("sandwich_mc".into(), json!(mc));
        }
    } else {
        let mc = verify_sandwich_mc(&sampler, a.lambda, a.tau, a.reps, seed, DEFAULT_GRID_POINTS)?;
        report.insert("sandwich".into(), json!(mc));
    }
    report.insert("counts".into(), json!(count_check(&sampler, a.reps, seed)?));
    if let (Some(ra), Some(rb)) = (&a.region_a, &a.region_b) {
        let (ra, rb) = (parse_region("--region-a", ra)?, parse_region("--region-b", rb)?);
        let ind = independence_check(&sampler, &ra, &rb, a.reps, seed)?;
        report.insert("independence".into(), json!(ind));
    }
    let value = Value::Object(report);
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => write(json(&value), &a.common),
        Format::Csv => Err(input("--format", "simulate reports are JSON only")),
    }
}

pub fn sweep(a: SweepArgs) -> Result<(), CliError> {
    if !(a.lambda > 0.0 && a.factor > 1.0 && a.points > 0) {
        return Err(input("--lambda/--factor/--points", "need lambda > 0, factor > 1, points > 0"));
    }
    let lambdas = geometric_grid(a.lambda, a.factor, a.points);
    let models: Vec<(u64, RareEventModel)> = match &a.model {
        Some(path) => vec![(0, lattice_model(&load_model(path)?)?)],
        None => (0..a.families as u64)
            .map(|id| (id, generate(FamilyKind::Degenerate, a.common.seed, id)))
            .collect(),
    };
    let mut records = Vec::new();
    for (id, model) in models {
        let ctx = BoundContext::new(model, LawOptions::default())?;
        for rep in sandwich_sweep(&ctx, &lambdas, a.tau)? {
            let mut r = sandwich_record(id, &rep);
            r.push(("error_budget".into(), json!(ctx.laws.error_budget)));
            records.push(r);
        }
    }
    write_table(&Table::from_records(records), &a.common, Format::Csv)
}
