//! Deterministic reproduction tables. Output depends only on the seed.

use num_complex::Complex64;

use weakval::entanglement::{
    linear_grid, ppt_threshold_scan, threshold_scan, werner_witness_setting_spin, Family, SpinVariant, WitnessSetting,
};
use weakval::hilbert::{random_density, random_hermitian_with, random_observable, random_pure, rng_from_seed};
use weakval::moments::{nth_moment_direct, nth_moment_recursive_pre, relative_error, PreSelection};
use weakval::oracle::ExactOracle;
use weakval::product::{product_weak_value_direct, product_weak_value_local, LocalPostSelection};
use weakval::robustness::{noisy_postselection_shift, observable_perturbation_report, trace_norm};
use weakval::tomography::{
    reconstruct_bipartite_mixed, reconstruct_bipartite_pure, reconstruct_mixed_single, reconstruct_pure_alt,
    reconstruct_pure_moments, OperatorSet, ProductOperatorSet, ReconstructionReport,
};
use weakval::{DensityOperator, Observable, Tolerances};

use crate::commands::{default_moment_observable, setting_label};
use crate::output::{Cell, Section};
use crate::Failure;

const SUITES: [&str; 6] = ["entanglement", "moments", "product", "tomography", "robustness", "spin"];

pub fn run(suite: &str, seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    match suite {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run(s, seed, tol)?);
            }
            Ok(out)
        }
        "entanglement" => entanglement(tol),
        "moments" => moments(seed, tol),
        "product" => product(seed, tol),
        "tomography" => tomography(seed, tol),
        "robustness" => robustness(seed, tol),
        "spin" => spin(tol),
        other => Err(Failure::Validation(format!("unknown suite `{other}` (all, {})", SUITES.join(", ")))),
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn entanglement(tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let full = linear_grid(0.0, 1.0, 41)?;
    let upper = linear_grid(0.5, 1.0, 21)?;
    // the two-Bell margin is quadratic in the distance to the threshold
    let tight = Tolerances { oracle: 1e-13, ..*tol };
    let mut cases: Vec<(Family, String, &[f64], Tolerances)> = vec![
        (Family::Werner2, "-".into(), &full, *tol),
        (Family::TwoBell, "-".into(), &upper, tight),
        (Family::NoisyPure { a: c(0.6), b: c(0.8) }, "a=0.6 b=0.8".into(), &full, *tol),
        (
            Family::PureMixture { first: (c(0.6), c(0.8)), second: (c(0.8), c(-0.6)) },
            "(0.6,0.8) (0.8,-0.6)".into(),
            &full,
            *tol,
        ),
    ];
    for dominant in 0..4 {
        cases.push((Family::FourBell { dominant }, format!("dominant={}", dominant + 1), &full, *tol));
    }
    for d in 2..=4 {
        cases.push((Family::QuditWerner { d }, format!("d={d}"), &full, *tol));
    }
    for d in 2..=4 {
        cases.push((Family::Isotropic { d }, format!("d={d}"), &full, *tol));
    }

    let mut sec = Section::table("entanglement thresholds", &["family", "params", "setting", "expected", "detected", "ppt"]);
    for (fam, params, grid, t) in cases {
        let setting = fam.default_setting()?;
        let detected = threshold_scan(|p| fam.state(p), &setting, grid, &t)?;
        let ppt = ppt_threshold_scan(|p| fam.state(p), grid, tol).ok();
        sec.row(vec![
            fam.name().into(),
            params.into(),
            setting_label(&fam).into(),
            fam.expected_threshold().into(),
            detected.into(),
            ppt.into(),
        ]);
    }
    Ok(vec![sec])
}

fn moments(seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let mut sec = Section::table("moment weak values", &["d", "pre", "n", "recursive", "direct", "rel_error"]);
    for (k, d) in [2usize, 3, 5].into_iter().enumerate() {
        let s = seed.wrapping_add(10 * k as u64);
        let a = random_observable(d, s)?;
        let phi = random_pure(d, s + 1)?;
        let pres: [(&str, PreSelection); 2] =
            [("pure", random_pure(d, s + 2)?.into()), ("mixed", random_density(d, d, s + 3)?.into())];
        for (label, pre) in &pres {
            for n in 1..=4 {
                let rec = nth_moment_recursive_pre(&a, pre, &phi, n, tol)?;
                let direct = nth_moment_direct(&a, pre, &phi, n, tol)?;
                sec.row(vec![
                    d.into(),
                    (*label).into(),
                    (n as usize).into(),
                    rec.into(),
                    direct.into(),
                    relative_error(rec, direct).into(),
                ]);
            }
        }
    }
    Ok(vec![sec])
}

fn product(seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let mut sec = Section::table("product weak values", &["dims", "pre", "local", "direct", "rel_error"]);
    for (k, (m, n)) in [(2usize, 2usize), (2, 3), (3, 3)].into_iter().enumerate() {
        let s = seed.wrapping_add(100 + 10 * k as u64);
        let a = random_observable(m, s)?;
        let b = random_observable(n, s + 1)?;
        let post = LocalPostSelection::new(random_pure(m, s + 2)?, random_pure(n, s + 3)?);
        let pres: [(&str, PreSelection); 2] = [
            ("pure", random_pure(m * n, s + 4)?.with_bipartite(m, n)?.into()),
            ("mixed", random_density(m * n, 2, s + 5)?.with_bipartite(m, n)?.into()),
        ];
        for (label, pre) in &pres {
            let local = product_weak_value_local(&a, &b, pre, &post, tol)?;
            let direct = product_weak_value_direct(&a, &b, pre, &post, tol)?;
            sec.row(vec![
                format!("{m}x{n}").into(),
                (*label).into(),
                local.into(),
                direct.into(),
                relative_error(local, direct).into(),
            ]);
        }
    }
    Ok(vec![sec])
}

fn tomo_row(sec: &mut Section, dims: String, r: &ReconstructionReport) {
    sec.row(vec![
        r.scheme.into(),
        dims.into(),
        r.fidelity_vs_hidden.into(),
        r.trace_distance_vs_hidden.into(),
        r.oracle_queries.into(),
        r.fallbacks_taken.into(),
        r.design_determinant.into(),
    ]);
}

fn tomography(seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let mut sec = Section::table(
        "tomography",
        &["scheme", "dims", "fidelity", "trace_distance", "queries", "fallbacks", "det"],
    );
    for d in [2usize, 3, 4] {
        let s = seed.wrapping_add(200 + d as u64);
        let hidden = random_pure(d, s)?;
        let oracle = ExactOracle::new(hidden.clone(), *tol);
        let a = default_moment_observable(d, s + 1)?;
        let b = random_pure(d, s + 2)?;
        let r = reconstruct_pure_moments(&oracle, d, &a, &b, tol)?.compare_with(&hidden.clone().into());
        tomo_row(&mut sec, d.to_string(), &r);
        let r = reconstruct_pure_alt(&oracle, d, &OperatorSet::cyclic_traceless(d)?, 0, tol)?.compare_with(&hidden.into());
        tomo_row(&mut sec, d.to_string(), &r);
        let rho = random_density(d, d, s + 3)?;
        let oracle = ExactOracle::new(rho.clone(), *tol);
        let r = reconstruct_mixed_single(&oracle, d, &OperatorSet::cyclic(d)?, tol)?.compare_with(&rho.into());
        tomo_row(&mut sec, d.to_string(), &r);
    }
    for (m, n) in [(2usize, 2usize), (2, 3)] {
        let s = seed.wrapping_add(300 + (m * n) as u64);
        let hidden = random_pure(m * n, s)?.with_bipartite(m, n)?;
        let oracle = ExactOracle::new(hidden.clone(), *tol);
        let r = reconstruct_bipartite_pure(&oracle, m, n, &ProductOperatorSet::default_pure(m, n)?, tol)?
            .compare_with(&hidden.into());
        tomo_row(&mut sec, format!("{m}x{n}"), &r);
        let rho = random_density(m * n, 2, s + 1)?.with_bipartite(m, n)?;
        let oracle = ExactOracle::new(rho.clone(), *tol);
        let r = reconstruct_bipartite_mixed(&oracle, m, n, &ProductOperatorSet::cyclic(m, n)?, tol)?
            .compare_with(&rho.into());
        tomo_row(&mut sec, format!("{m}x{n}"), &r);
    }
    Ok(vec![sec])
}

fn robustness(seed: u64, tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let d = 3;
    let s = seed.wrapping_add(400);
    let rho = random_density(d, d, s)?;
    let a = random_observable(d, s + 1)?;
    let phi = random_pure(d, s + 2)?;
    let h = random_hermitian_with(&mut rng_from_seed(s + 3), d);
    let unit = h.scale(1.0 / trace_norm(&h)?);

    let mut bound = Section::table("observable error", &["delta", "bound", "actual", "satisfied"]);
    for delta in [1e-1, 1e-2, 1e-3] {
        let a_e = Observable::new(a.matrix() + unit.scale(delta))?;
        let r = observable_perturbation_report(&rho, &a, &a_e, &phi, tol)?;
        bound.row(vec![r.delta.into(), r.bound.into(), r.actual.into(), r.satisfied.map_or(Cell::Missing, Cell::Bool)]);
    }

    let sigma = DensityOperator::maximally_mixed(d)?;
    let mut noisy = Section::table("noisy post-selection", &["eps", "first_order", "exact", "remainder"]);
    for eps in [1e-2, 1e-3, 1e-4] {
        let r = noisy_postselection_shift(&rho, &a, &phi, &sigma, eps, tol)?;
        noisy.row(vec![eps.into(), r.first_order.into(), r.exact.into(), (r.exact - r.first_order).norm().into()]);
    }
    Ok(vec![bound, noisy])
}

fn spin(tol: &Tolerances) -> Result<Vec<Section>, Failure> {
    let mut sec = Section::table("spin settings", &["variant", "d", "expected", "detected"]);
    let grid = linear_grid(0.0, 1.0, 41)?;
    for (name, variant) in
        [("spin1_ladder", SpinVariant::Spin1Ladder), ("spin1_sx", SpinVariant::Spin1Sx), ("spin32_ladder", SpinVariant::Spin32Ladder)]
    {
        let w = werner_witness_setting_spin(variant)?;
        let setting: &WitnessSetting = &w.setting;
        let d = setting.dims().0;
        let fam = Family::QuditWerner { d };
        let detected = threshold_scan(|p| fam.state(p), setting, &grid, tol).ok();
        sec.row(vec![name.into(), d.into(), fam.expected_threshold().into(), detected.into()]);
    }
    Ok(vec![sec])
}
