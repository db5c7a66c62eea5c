use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::Value;

use weakval::entanglement::{
    evaluate_witness, linear_grid, ppt_threshold_scan, threshold_scan, werner_witness_setting_spin,
    witness_report, Family, SpinVariant, WitnessSetting,
};
use weakval::hilbert::{eig_hermitian, random_hermitian_with, random_observable, random_pure, rng_from_seed, LoadedObject, StateFile};
use weakval::moments::{measurement_count, nth_moment_direct, nth_moment_recursive_pre, weak_value_pre, PreSelection};
use weakval::oracle::ExactOracle;
use weakval::product::{product_weak_value_direct, product_weak_value_local, LocalPostSelection};
use weakval::robustness::{noisy_postselection_shift, observable_perturbation_report, trace_norm};
use weakval::tomography::{
    chebyshev_observable, reconstruct_bipartite_mixed, reconstruct_bipartite_pure, reconstruct_mixed_single,
    reconstruct_pure_alt, reconstruct_pure_moments, OperatorSet, ProductOperatorSet, ReconstructionReport,
};
use weakval::{DensityOperator, Observable, PureState, Tolerances};

use crate::output::{render, Cell, Section};
use crate::{Cli, Command, Common, Failure, FamilyArgs, Inputs};

pub type Outcome = Result<(String, Option<Failure>), Failure>;

pub fn tolerances(common: &Common) -> Result<Tolerances, Failure> {
    let mut tol = Tolerances::default();
    if let Some(t) = common.tol {
        tol.oracle = t;
    }
    tol.validate()?;
    Ok(tol)
}

pub fn run(cli: &Cli) -> Outcome {
    let tol = tolerances(&cli.common)?;
    let seed = cli.common.seed;
    let (sections, failure) = match &cli.command {
        Command::WeakValue(inputs) => weak_value_cmd(inputs, &tol)?,
        Command::Moment { inputs, n } => moment_cmd(inputs, *n, &tol)?,
        Command::Product(inputs) => product_cmd(inputs, &tol)?,
        Command::TomoPure { hidden, ops, inputs } => (tomo_pure(hidden, ops, inputs, seed, &tol)?, None),
        Command::TomoMixed { hidden, ops } => (tomo_mixed(hidden, ops, &tol)?, None),
        Command::TomoBipartite { hidden, ops } => (tomo_bipartite(hidden, ops, &tol)?, None),
        Command::Entangle { family, params, variant, inputs } => {
            (entangle(family.as_deref(), params, variant.as_deref(), inputs, &tol)?, None)
        }
        Command::Scan { family, grid } => (scan(family, grid, &tol)?, None),
        Command::Robust { inputs, noise, eps } => (robust(inputs, *noise, *eps, seed, &tol)?, None),
        Command::Demo { suite } => (crate::demo::run(suite, seed, &tol)?, None),
    };
    Ok((render(&sections, cli.common.format), failure))
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn load(path: &Path, tol: &Tolerances) -> Result<LoadedObject, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    let file = StateFile::parse(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    file.load(tol).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| validation(format!("--{flag} is required")))
}

pub fn load_pre(path: &Path, tol: &Tolerances) -> Result<PreSelection, Failure> {
    match load(path, tol)? {
        LoadedObject::Pure(s) => Ok(PreSelection::Pure(s)),
        LoadedObject::Mixed(r) => Ok(PreSelection::Mixed(r)),
        LoadedObject::Observable(_) => Err(validation(format!("{}: expected a state, found an observable", path.display()))),
    }
}

fn load_pure(path: &Path, tol: &Tolerances) -> Result<PureState, Failure> {
    match load(path, tol)? {
        LoadedObject::Pure(s) => Ok(s),
        _ => Err(validation(format!("{}: expected a pure state", path.display()))),
    }
}

fn load_observable(path: &Path, tol: &Tolerances) -> Result<Observable, Failure> {
    match load(path, tol)? {
        LoadedObject::Observable(a) => Ok(a),
        _ => Err(validation(format!("{}: expected an observable", path.display()))),
    }
}

fn single_post(inputs: &Inputs, tol: &Tolerances) -> Result<PureState, Failure> {
    match inputs.post.as_slice() {
        [p] => load_pure(p, tol),
        _ => Err(validation("exactly one --post is required")),
    }
}

fn product_post(inputs: &Inputs, tol: &Tolerances) -> Result<LocalPostSelection, Failure> {
    match inputs.post.as_slice() {
        [a, b] => Ok(LocalPostSelection::new(load_pure(a, tol)?, load_pure(b, tol)?)),
        _ => Err(validation("give --post twice: side A, then side B")),
    }
}

/// Adds both values and their distance; returns a failure if they disagree beyond `tol.oracle`.
fn compare(sec: &mut Section, name: &str, value: Complex64, direct: Complex64, tol: &Tolerances) -> Option<Failure> {
    let diff = (value - direct).norm();
    sec.put(&format!("{name}_direct"), direct).put("abs_diff", diff);
    let limit = tol.oracle * direct.norm().max(1.0);
    (diff > limit).then(|| Failure::Numerical(format!("check failed: |diff| = {diff:e} exceeds {limit:e}")))
}

type Checked = (Vec<Section>, Option<Failure>);

fn weak_value_cmd(inputs: &Inputs, tol: &Tolerances) -> Result<Checked, Failure> {
    let pre = load_pre(required(&inputs.pre, "pre")?, tol)?;
    let post = single_post(inputs, tol)?;
    let a = load_observable(required(&inputs.observable, "observable")?, tol)?;
    let value = weak_value_pre(&a, &pre, &post, tol)?;
    let mut sec = Section::record("weak value");
    sec.put("weak_value", value).put("postselection_probability", pre.probability(&post));
    let mut failure = None;
    if inputs.check {
        let rho = pre.to_density();
        let pi = post.projector();
        let direct = (&pi * a.matrix() * rho.matrix()).trace() / (&pi * rho.matrix()).trace();
        failure = compare(&mut sec, "weak_value", value, direct, tol);
    }
    Ok((vec![sec], failure))
}

fn moment_cmd(inputs: &Inputs, n: u32, tol: &Tolerances) -> Result<Checked, Failure> {
    let pre = load_pre(required(&inputs.pre, "pre")?, tol)?;
    let post = single_post(inputs, tol)?;
    let a = load_observable(required(&inputs.observable, "observable")?, tol)?;
    let value = nth_moment_recursive_pre(&a, &pre, &post, n, tol)?;
    let mut sec = Section::record("moment weak value");
    sec.put("n", n as usize).put("moment_recursive", value);
    if matches!(pre, PreSelection::Pure(_)) {
        sec.put("setups", measurement_count(n) as usize);
    }
    let mut failure = None;
    if inputs.check {
        let direct = nth_moment_direct(&a, &pre, &post, n, tol)?;
        failure = compare(&mut sec, "moment", value, direct, tol);
    }
    Ok((vec![sec], failure))
}

fn product_cmd(inputs: &Inputs, tol: &Tolerances) -> Result<Checked, Failure> {
    let pre = load_pre(required(&inputs.pre, "pre")?, tol)?;
    let post = product_post(inputs, tol)?;
    let a = load_observable(required(&inputs.observable, "observable")?, tol)?;
    let b = load_observable(required(&inputs.observable_b, "observable-b")?, tol)?;
    let value = product_weak_value_local(&a, &b, &pre, &post, tol)?;
    let mut sec = Section::record("product weak value");
    sec.put("product_weak_value_local", value)
        .put("postselection_probability", pre.probability(&post.joint()));
    let mut failure = None;
    if inputs.check {
        let direct = product_weak_value_direct(&a, &b, &pre, &post, tol)?;
        failure = compare(&mut sec, "product_weak_value", value, direct, tol);
    }
    Ok((vec![sec], failure))
}

pub fn report_section(title: &str, report: &ReconstructionReport) -> Section {
    let mut sec = Section::record(title);
    if let Value::Object(map) = report.to_json() {
        for (k, v) in map {
            match v {
                Value::Object(inner) => {
                    for (ik, iv) in inner {
                        sec.put(&format!("{k}.{ik}"), Cell::Raw(iv));
                    }
                }
                other => {
                    sec.put(&k, Cell::Raw(other));
                }
            }
        }
    }
    sec
}

/// Default moment observable: Chebyshev nodes in a seeded random eigenbasis.
pub fn default_moment_observable(d: usize, seed: u64) -> Result<Observable, Failure> {
    let basis = eig_hermitian(&random_observable(d, seed)?).vectors;
    Ok(chebyshev_observable(d, &basis)?)
}

fn tomo_pure(hidden: &Path, ops: &str, inputs: &Inputs, seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let state = load_pure(hidden, tol)?;
    let d = state.dim();
    let oracle = ExactOracle::new(state.clone(), *tol);
    let report = match ops {
        "moments" => {
            let a = match &inputs.observable {
                Some(p) => load_observable(p, tol)?,
                None => default_moment_observable(d, seed)?,
            };
            let b = match inputs.post.as_slice() {
                [] => random_pure(d, seed.wrapping_add(1))?,
                _ => single_post(inputs, tol)?,
            };
            reconstruct_pure_moments(&oracle, d, &a, &b, tol)?
        }
        "basis-transfer" | "default" => reconstruct_pure_alt(&oracle, d, &OperatorSet::basis_transfer(d)?, 0, tol)?,
        "cyclic" => reconstruct_pure_alt(&oracle, d, &OperatorSet::cyclic_traceless(d)?, 0, tol)?,
        other => return Err(validation(format!("unknown --ops `{other}` (moments, basis-transfer, cyclic)"))),
    };
    Ok(vec![report_section("reconstruction", &report.compare_with(&state.into()))])
}

fn hidden_density(path: &Path, tol: &Tolerances) -> Result<PreSelection, Failure> {
    load_pre(path, tol)
}

fn tomo_mixed(hidden: &Path, ops: &str, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let pre = hidden_density(hidden, tol)?;
    let rho = pre.to_density();
    let d = rho.dim();
    let set = match ops {
        "default" | "cyclic" => OperatorSet::cyclic(d)?,
        other => return Err(validation(format!("unknown --ops `{other}` (cyclic)"))),
    };
    let oracle = ExactOracle::new(rho.clone(), *tol);
    let report = reconstruct_mixed_single(&oracle, d, &set, tol)?;
    Ok(vec![report_section("reconstruction", &report.compare_with(&PreSelection::Mixed(rho)))])
}

fn tomo_bipartite(hidden: &Path, ops: &str, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let pre = hidden_density(hidden, tol)?;
    let (m, n) = pre.bipartite_dims().ok_or_else(|| validation("hidden state needs dims [m, n]"))?;
    let oracle = ExactOracle::new(pre.clone(), *tol);
    let report = match (&pre, ops) {
        (PreSelection::Pure(_), "default") => reconstruct_bipartite_pure(&oracle, m, n, &ProductOperatorSet::default_pure(m, n)?, tol)?,
        (PreSelection::Pure(_), "cyclic") => reconstruct_bipartite_pure(&oracle, m, n, &ProductOperatorSet::cyclic_traceless(m, n)?, tol)?,
        (PreSelection::Mixed(_), "default" | "cyclic") => {
            reconstruct_bipartite_mixed(&oracle, m, n, &ProductOperatorSet::cyclic(m, n)?, tol)?
        }
        (_, other) => return Err(validation(format!("unknown --ops `{other}` (default, cyclic)"))),
    };
    Ok(vec![report_section("reconstruction", &report.compare_with(&pre))])
}

pub fn family_setting(family: &Family, variant: Option<&str>) -> Result<(WitnessSetting, String), Failure> {
    match (family, variant) {
        (Family::QuditWerner { .. }, Some(v)) => {
            let w = werner_witness_setting_spin(v.parse::<SpinVariant>()?)?;
            if w.setting.dims().0 != family.local_dim() {
                return Err(validation(format!("variant {v} does not fit d = {}", family.local_dim())));
            }
            Ok((w.setting, v.to_string()))
        }
        (_, Some(v)) => Err(validation(format!("--variant {v} applies to qudit-werner only"))),
        (f, None) => Ok((f.default_setting()?, setting_label(f))),
    }
}

/// Short description of a family's default setting.
pub fn setting_label(f: &Family) -> String {
    match f {
        Family::Werner2 | Family::QuditWerner { d: 2 } => "sx,sx |10>".into(),
        Family::TwoBell | Family::NoisyPure { .. } => "sx,sx |11>".into(),
        Family::PureMixture { .. } => "sx,sx |01>".into(),
        Family::FourBell { dominant } if *dominant < 2 => "sx,sx |00>".into(),
        Family::FourBell { .. } => "sx,sx |01>".into(),
        Family::QuditWerner { d: 3 } => "spin1_ladder".into(),
        Family::QuditWerner { .. } => "spin32_ladder".into(),
        Family::Isotropic { .. } => "X+X^dag |00>".into(),
    }
}

fn entangle(
    family: Option<&str>,
    params: &[f64],
    variant: Option<&str>,
    inputs: &Inputs,
    tol: &Tolerances,
) -> Result<Vec<Section>, Failure> {
    let mut sec = Section::record("witness");
    if let Some(name) = family {
        let (&p, fixed) = params.split_last().ok_or_else(|| validation("--params must end with the weight p"))?;
        let fam = Family::parse(name, fixed)?;
        let (setting, label) = family_setting(&fam, variant)?;
        let r = witness_report(&fam, fixed, p, &setting, tol)?;
        sec.put("family", r.family.as_str())
            .put("params", Cell::Raw(serde_json::json!(params)))
            .put("setting", label)
            .put("lhs", r.lhs)
            .put("rhs", r.rhs)
            .put("margin", r.margin)
            .put("violated", r.violated)
            .put("ppt_min_eigenvalue", r.ppt_min_eigenvalue);
        return Ok(vec![sec]);
    }
    let rho = match load_pre(required(&inputs.pre, "pre or --family")?, tol)? {
        PreSelection::Pure(s) => {
            let dims = s.bipartite_dims().ok_or_else(|| validation("state needs dims [m, n]"))?;
            s.to_density().with_bipartite(dims.0, dims.1)?
        }
        PreSelection::Mixed(r) => r,
    };
    let a = load_observable(required(&inputs.observable, "observable")?, tol)?;
    let b = load_observable(required(&inputs.observable_b, "observable-b")?, tol)?;
    let setting = WitnessSetting::new(&a, &b, product_post(inputs, tol)?)?;
    let r = evaluate_witness(&rho, &setting, tol)?;
    sec.put("family", "file")
        .put("setting", "files")
        .put("lhs", r.lhs)
        .put("rhs", r.rhs)
        .put("margin", r.margin)
        .put("violated", r.violated)
        .put("ppt_min_eigenvalue", weakval::hilbert::ppt_min_eigenvalue(&rho)?);
    Ok(vec![sec])
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || validation(format!("--grid `{spec}` is not lo:hi:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(linear_grid(lo, hi, steps)?)
}

fn scan(args: &FamilyArgs, grid: &str, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let fam = Family::parse(&args.family, &args.params)?;
    let (setting, label) = family_setting(&fam, args.variant.as_deref())?;
    let grid = parse_grid(grid)?;
    let detected = threshold_scan(|p| fam.state(p), &setting, &grid, tol)?;
    let ppt = ppt_threshold_scan(|p| fam.state(p), &grid, tol).ok();
    let mut sec = Section::record("threshold scan");
    sec.put("family", fam.name())
        .put("params", Cell::Raw(serde_json::json!(args.params)))
        .put("setting", label)
        .put("detected_threshold", detected)
        .put("ppt_threshold", ppt)
        .put("expected_threshold", fam.expected_threshold());
    Ok(vec![sec])
}

fn robust(inputs: &Inputs, noise: f64, eps: f64, seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(validation(format!("--noise {noise} must be a nonnegative number")));
    }
    let rho = load_pre(required(&inputs.pre, "pre")?, tol)?.to_density();
    let a = load_observable(required(&inputs.observable, "observable")?, tol)?;
    let phi = single_post(inputs, tol)?;
    let d = a.dim();
    let h = random_hermitian_with(&mut rng_from_seed(seed), d);
    let scale = noise / trace_norm(&h)?;
    let a_e = Observable::new(a.matrix() + h.scale(scale))?;
    let report = observable_perturbation_report(&rho, &a, &a_e, &phi, tol)?;
    let mut sec = Section::record("observable error");
    sec.put("delta", report.delta)
        .put("m", report.m)
        .put("bound", report.bound)
        .put("actual", report.actual)
        .put("satisfied", report.satisfied.map_or(Cell::Text("unavailable".into()), Cell::Bool));
    let sigma = DensityOperator::maximally_mixed(d)?;
    let shift = noisy_postselection_shift(&rho, &a, &phi, &sigma, eps, tol)?;
    let mut noisy = Section::record("noisy post-selection");
    noisy
        .put("eps", eps)
        .put("first_order", shift.first_order)
        .put("exact", shift.exact)
        .put("remainder", (shift.exact - shift.first_order).norm());
    Ok(vec![sec, noisy])
}
