//! Acceptance checks, one PASS/FAIL line each. Exits non-zero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use pipest_core::diagnose::{excitation_diagnostics, relative_error, ErrorReport, RelError};
use pipest_core::estimators::{
    mask_system, solve_brute_force, solve_least_squares, solve_levenberg_marquardt, solve_total_least_squares,
    EstimationError, EstimationMode, EstimationResult, GridSpec, LmOptions, LsOptions, ParamScope, TlsOptions,
};
use pipest_core::model::{build_system, regressor_block, InertialParams, KinematicSample, SymmetricInertia, Wrench};
use pipest_core::signal::{
    differentiate_kinematics, prepare_samples, sav_gol_filter, trim_ends, NoiseSpec, RawSample, Recording, SavGolSpec,
    CONTROLLER_POSE_STEP,
};
use pipest_core::synth::{make_scenario, ScenarioKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Samples = Vec<(KinematicSample, Wrench)>;
type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn group_errors(r: &EstimationResult, truth: &InertialParams) -> Vec<f64> {
    let e = ErrorReport::for_result(r, truth);
    [e.mass, e.com, e.inertia].into_iter().flatten().map(|e| e.value().unwrap_or(f64::INFINITY)).collect()
}

fn max_error(r: &EstimationResult, truth: &InertialParams) -> f64 {
    group_errors(r, truth).into_iter().fold(0.0, f64::max)
}

fn clean_samples(kind: ScenarioKind, seed: u64) -> (Samples, InertialParams) {
    let sc = make_scenario(kind, kind.default_truth(), seed);
    let run = sc.realize().unwrap();
    (run.kinematics.into_iter().zip(run.clean_wrenches).collect(), sc.truth)
}

// Criterion 1 -----------------------------------------------------------

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Payload force and torque in sensor axes, component by component.
fn scalar_wrench(m: f64, c: [f64; 3], i: [f64; 6], k: &KinematicSample) -> [f64; 6] {
    let a = [k.lin_acc.x + k.gravity.x, k.lin_acc.y + k.gravity.y, k.lin_acc.z + k.gravity.z];
    let w = [k.ang_vel.x, k.ang_vel.y, k.ang_vel.z];
    let dw = [k.ang_acc.x, k.ang_acc.y, k.ang_acc.z];
    let h = [m * c[0], m * c[1], m * c[2]];
    let inertia = [[i[0], i[1], i[2]], [i[1], i[3], i[4]], [i[2], i[4], i[5]]];
    let mul = |v: [f64; 3]| -> [f64; 3] { std::array::from_fn(|r| (0..3).map(|j| inertia[r][j] * v[j]).sum()) };
    let dwh = cross(dw, h);
    let wwh = cross(w, cross(w, h));
    let wiw = cross(w, mul(w));
    let idw = mul(dw);
    let ha = cross(h, a);
    let mut out = [0.0; 6];
    for r in 0..3 {
        out[r] = m * a[r] + dwh[r] + wwh[r];
        out[r + 3] = idw[r] + wiw[r] + ha[r];
    }
    out
}

fn random_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

fn criterion_1() -> Check {
    let (worst, elapsed) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let p = InertialParams::new(
                rng.random_range(0.05..5.0),
                random_vec(&mut rng, 0.2),
                SymmetricInertia::from_vech(std::array::from_fn(|_| rng.random_range(-0.05..0.05))),
            );
            let gravity = Rotation3::new(random_vec(&mut rng, 3.0)) * Vector3::new(0.0, 0.0, -9.80665);
            let k = KinematicSample {
                t: 0.0,
                lin_vel: random_vec(&mut rng, 1.0),
                ang_vel: random_vec(&mut rng, 3.0),
                lin_acc: random_vec(&mut rng, 5.0),
                ang_acc: random_vec(&mut rng, 10.0),
                gravity,
            };
            let expected = scalar_wrench(p.mass, p.com.into(), p.inertia.vech(), &k);
            let got = regressor_block(&k) * p.to_phi().0;
            let scale = expected.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
            let dev = got.iter().zip(&expected).fold(0.0_f64, |d, (g, e)| d.max((g - e).abs()));
            worst = worst.max(dev / scale);
        }
        worst
    });
    ensure(worst < 1e-12, format!("max relative deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("max relative deviation {worst:.2e} in {elapsed:.2?}"))
}

// Criterion 2 -----------------------------------------------------------

fn criterion_2() -> Check {
    let (samples, truth) = clean_samples(ScenarioKind::Predefined, 7);
    ensure(samples.len() == 20000, format!("{} samples", samples.len()))?;
    let (ls, t_ls) = timed(|| {
        let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
        solve_least_squares(&sys, &LsOptions::default()).unwrap()
    });
    let (lm, t_lm) =
        timed(|| solve_levenberg_marquardt(&samples, &EstimationMode::full(), &LmOptions::default()).unwrap());
    let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
    ensure(sys.rows() == 120000, format!("{} rows", sys.rows()))?;
    let tls = solve_total_least_squares(&sys, &TlsOptions::default()).unwrap();
    let errors = [max_error(&ls, &truth), max_error(&lm, &truth), max_error(&tls, &truth)];
    for (name, e) in ["LS", "LM", "TLS"].iter().zip(errors) {
        ensure(e < 1e-8, format!("{name} max group error {e:e}"))?;
    }
    ensure(t_ls < Duration::from_secs(5), format!("LS took {t_ls:?}"))?;
    ensure(t_lm < Duration::from_secs(5), format!("LM took {t_lm:?}"))?;
    Ok(format!(
        "max errors LS {:.1e} LM {:.1e} TLS {:.1e}; LS {t_ls:.2?}, LM {t_lm:.2?}",
        errors[0], errors[1], errors[2]
    ))
}

// Criterion 3 -----------------------------------------------------------

/// Bounds of the published mass errors on validation data.
const M_VAL_RANGE: (f64, f64) = (0.00065, 0.00397);

fn criterion_3() -> Check {
    let kind = ScenarioKind::Predefined;
    let truth = kind.default_truth();
    let run = make_scenario(kind, truth, 7).with_noise(NoiseSpec::pose(CONTROLLER_POSE_STEP)).realize().unwrap();
    let samples = prepare_samples(&run.recording, &SavGolSpec { order: 3, window: 11, passes: 1 }, 0.1).unwrap();
    let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
    let r = solve_least_squares(&sys, &LsOptions::default()).unwrap();
    let e = group_errors(&r, &truth);
    let (em, ec, ei) = (e[0], e[1], e[2]);
    ensure(em < 0.01, format!("e_m {em:e}"))?;
    ensure(
        em > M_VAL_RANGE.0 / 10.0 && em < M_VAL_RANGE.1 * 10.0,
        format!("e_m {em:e} outside a decade of the published range"),
    )?;
    ensure(em < ec && em < ei, format!("ordering violated: e_m {em:e} e_c {ec:e} e_I {ei:e}"))?;
    Ok(format!("e_m {em:.2e} < e_c {ec:.2e}, e_I {ei:.2e}"))
}

// Criterion 4 -----------------------------------------------------------

fn criterion_4() -> Check {
    let kind = ScenarioKind::Predefined;
    let truth = kind.default_truth();
    let inertia_error = |noise: NoiseSpec| {
        let run = make_scenario(kind, truth, 7).with_noise(noise).realize().unwrap();
        let samples = prepare_samples(&run.recording, &SavGolSpec::default(), 0.1).unwrap();
        let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
        let r = solve_least_squares(&sys, &LsOptions::default()).unwrap();
        group_errors(&r, &truth)[2]
    };
    let clean = inertia_error(NoiseSpec::none());
    let noisy = inertia_error(NoiseSpec::wrench(0.1, 0.01));
    let ratio = noisy / clean;
    ensure(ratio > 10.0, format!("inertia error ratio {ratio:.2} (clean {clean:e}, noisy {noisy:e})"))?;
    Ok(format!("e_I clean {clean:.2e}, noisy {noisy:.2e}, ratio {ratio:.1e}"))
}

// Criterion 5 -----------------------------------------------------------

fn static_samples(n: usize) -> Samples {
    let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 0.5);
    let truth = ScenarioKind::Predefined.default_truth();
    let samples: Vec<RawSample> = (0..n)
        .map(|k| {
            RawSample::new(
                k as f64 / 1000.0,
                Vector3::new(0.4, 0.0, 0.4),
                *q.quaternion(),
                Wrench::new(Vector3::zeros(), Vector3::zeros()),
            )
        })
        .collect();
    let rec = Recording::new(1000.0, samples).unwrap();
    let kin = differentiate_kinematics(&rec, &SavGolSpec::default()).unwrap();
    kin.into_iter().map(|k| (k, pipest_core::model::newton_euler_wrench(&truth, &k))).collect()
}

fn criterion_5() -> Check {
    let d = excitation_diagnostics(&build_system(&static_samples(2000)).unwrap());
    ensure(d.rank < 10, format!("static rank {}", d.rank))?;
    ensure(d.inertia_unidentifiable, "static inertia block not flagged")?;
    let diag = |kind: ScenarioKind| {
        let run = make_scenario(kind, kind.default_truth(), 7).realize().unwrap();
        excitation_diagnostics(
            &build_system(&prepare_samples(&run.recording, &SavGolSpec::default(), 0.1).unwrap()).unwrap(),
        )
    };
    let (pre, pick) = (diag(ScenarioKind::Predefined), diag(ScenarioKind::PickPlaceLike));
    ensure(
        pick.inertia_condition > pre.inertia_condition,
        format!("inertia condition pick-place {:e} vs predefined {:e}", pick.inertia_condition, pre.inertia_condition),
    )?;
    Ok(format!(
        "static rank {}; inertia condition pick-place {:.2e} > predefined {:.2e}",
        d.rank, pick.inertia_condition, pre.inertia_condition
    ))
}

// Criterion 6 -----------------------------------------------------------

fn criterion_6() -> Check {
    let mut worst = 0.0_f64;
    for (kind, seed) in
        [(ScenarioKind::Predefined, 7), (ScenarioKind::PickPlaceLike, 3), (ScenarioKind::FreeMotionLike, 5)]
    {
        let (samples, _) = clean_samples(kind, seed);
        let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
        let ls = solve_least_squares(&sys, &LsOptions::default()).unwrap().params.to_phi().0;
        for opts in [TlsOptions::default(), TlsOptions::exact()] {
            let tls = solve_total_least_squares(&sys, &opts).unwrap().params.to_phi().0;
            worst = worst.max((tls - ls).amax());
        }
    }
    ensure(worst < 1e-6, format!("max component difference {worst:e}"))?;
    let (samples, _) = clean_samples(ScenarioKind::Predefined, 7);
    let sys = mask_system(&build_system(&samples).unwrap(), &EstimationMode::full()).unwrap();
    let strided = solve_total_least_squares(&sys, &TlsOptions { stride: 10, ..TlsOptions::default() }).unwrap();
    let full = solve_total_least_squares(&sys, &TlsOptions::exact()).unwrap();
    ensure(full.rows_used == 10 * strided.rows_used, format!("rows {} vs {}", full.rows_used, strided.rows_used))?;
    Ok(format!("max component difference {worst:.1e}; rows {} -> {}", full.rows_used, strided.rows_used))
}

// Criterion 7 -----------------------------------------------------------

fn criterion_7() -> Check {
    let (samples, truth) = clean_samples(ScenarioKind::Predefined, 7);
    ensure(samples.len() == 20000, format!("{} samples", samples.len()))?;
    // Off-center grid so that the truth falls between grid points.
    let mut center = truth;
    center.mass *= 1.0123;
    let grid = GridSpec { points: Some(101), relative_span: 0.2, center: Some(center), ..GridSpec::default() };
    let (r, t_mass) = timed(|| solve_brute_force(&samples, &EstimationMode::mass_only(truth), &grid).unwrap());
    let step = 2.0 * 0.2 * center.mass / 100.0;
    let nearest = (0..101)
        .map(|i| center.mass + (i as f64 - 50.0) * step)
        .min_by(|a, b| (a - truth.mass).abs().total_cmp(&(b - truth.mass).abs()))
        .unwrap();
    ensure((r.params.mass - nearest).abs() < 1e-12, format!("mass {} vs nearest {nearest}", r.params.mass))?;
    ensure(t_mass < Duration::from_secs(1), format!("mass-only took {t_mass:?}"))?;

    let (mc, t_mc) =
        timed(|| solve_brute_force(&samples, &EstimationMode::mass_com(truth), &GridSpec::default()).unwrap());
    ensure(t_mc < Duration::from_secs(300), format!("mass-com took {t_mc:?}"))?;
    ensure(max_error(&mc, &truth) < 1e-12, "mass-com grid centered on truth missed it")?;

    let rejected = matches!(
        solve_brute_force(&samples, &EstimationMode::full(), &GridSpec::default()),
        Err(EstimationError::UnsupportedMode(ParamScope::FullPip))
    );
    ensure(rejected, "full scope accepted")?;
    Ok(format!(
        "mass-only {t_mass:.2?} ({} points), mass-com {t_mc:.2?} ({} points), full rejected",
        r.iterations, mc.iterations
    ))
}

// Criterion 8 -----------------------------------------------------------

fn criterion_8() -> Check {
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
        let h = rng.random_range(0.001..0.5);
        let s: Vec<f64> = (0..200)
            .map(|k| {
                let x = k as f64 * h;
                c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x
            })
            .collect();
        let f = sav_gol_filter(&s, 3, 11).unwrap();
        let scale = s.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for k in 5..195 {
            worst = worst.max((f[k] - s[k]).abs() / scale);
        }
    }
    ensure(worst < 1e-10, format!("cubic reproduction deviation {worst:e}"))?;

    let kin = static_samples(500);
    let motion = kin.iter().fold(0.0_f64, |m, (k, _)| {
        m.max(k.lin_vel.amax()).max(k.ang_vel.amax()).max(k.lin_acc.amax()).max(k.ang_acc.amax())
    });
    ensure(motion < 1e-9, format!("constant pose kinematics {motion:e}"))?;

    let data: Vec<usize> = (0..20000).collect();
    let kept = trim_ends(&data, 0.1).unwrap().len();
    ensure(kept == 16000, format!("trim kept {kept}"))?;
    Ok(format!("cubic deviation {worst:.1e}, static kinematics {motion:.1e}, trim 20000 -> {kept}"))
}

// Criterion 9 -----------------------------------------------------------

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let m = rng.random_range(0.01..10.0);
        let v = random_vec(&mut rng, 1.0);
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let i = a * a.transpose();
        ensure(relative_error(&m, &m).unwrap() == 0.0, "e(m, m) != 0")?;
        ensure(relative_error(&v, &v).unwrap() == 0.0, "e(c, c) != 0")?;
        ensure(relative_error(&i, &i).unwrap() == 0.0, "e(I, I) != 0")?;
        ensure(relative_error(&(2.0 * m), &m).unwrap() == 1.0, "e(2m, m) != 1")?;
        ensure(relative_error(&(2.0 * v), &v).unwrap() == 1.0, "e(2c, c) != 1")?;
        ensure(relative_error(&(2.0 * i), &i).unwrap() == 1.0, "e(2I, I) != 1")?;

        let r = Rotation3::new(random_vec(&mut rng, 3.0)).into_inner();
        let ve = v + random_vec(&mut rng, 0.3);
        let ie = i + Matrix3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        let rot = |x: Matrix3<f64>| r * x * r.transpose();
        worst = worst.max((relative_error(&(r * ve), &(r * v)).unwrap() - relative_error(&ve, &v).unwrap()).abs());
        worst = worst.max((relative_error(&rot(ie), &rot(i)).unwrap() - relative_error(&ie, &i).unwrap()).abs());
    }
    ensure(worst < 1e-12, format!("rotation changes errors by {worst:e}"))?;
    let zero = relative_error(&Vector3::zeros(), &Vector3::<f64>::zeros()).is_err();
    ensure(zero, "zero truth accepted")?;
    ensure(RelError::Undefined.value().is_none(), "undefined has a value")?;
    Ok(format!("identity 0, doubling 1, rotation deviation {worst:.1e}"))
}

// Criterion 10 ----------------------------------------------------------

fn pipest(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_pipest")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
}

fn cli_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let steps: [&[&str]; 8] = [
        &[
            "simulate",
            "--kind",
            "free",
            "--duration",
            "3",
            "--seed",
            "11",
            "--noise",
            "--out",
            "rec.csv",
            "--truth-out",
            "gt.json",
        ],
        &["simulate", "--kind", "free", "--duration", "3", "--seed", "11", "--clean-wrench", "--out", "clean.csv"],
        &["validate", "--input", "rec.csv", "--gt", "gt.json", "--out", "val.csv"],
        &["diagnose", "--input", "rec.csv", "--out", "diag.json"],
        &["estimate", "--input", "rec.csv", "--method", "ls", "--gt", "gt.json", "--no-runtime", "--out", "ls.json"],
        &[
            "estimate",
            "--input",
            "val.csv",
            "--method",
            "lm",
            "--mode",
            "mass-com",
            "--gt",
            "gt.json",
            "--data-kind",
            "validation",
            "--no-runtime",
            "--out",
            "lm.json",
        ],
        &[
            "compare",
            "ls.json",
            "lm.json",
            "--no-runtime",
            "--out",
            "cmp.json",
            "--text",
            "cmp.txt",
            "--emit-plot-data",
            "plots",
        ],
        &[
            "compare",
            "--sweep",
            "--kind",
            "free",
            "--duration",
            "2",
            "--seed",
            "4",
            "--methods",
            "ls,tls",
            "--no-runtime",
            "--out",
            "sweep.json",
        ],
    ];
    for args in steps {
        pipest(dir, args)?;
    }
    let mut files = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("plots")] {
        let mut entries: Vec<_> = std::fs::read_dir(&sub).map_err(|e| e.to_string())?.flatten().collect();
        entries.sort_by_key(|e| e.file_name());
        for e in entries.into_iter().filter(|e| e.path().is_file()) {
            files.push((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()));
        }
    }
    Ok(files)
}

fn criterion_10() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cli_outputs(a.path())?;
    let second = cli_outputs(b.path())?;
    ensure(first.len() == second.len(), "different file sets")?;
    for ((na, da), (nb, db)) in first.iter().zip(&second) {
        ensure(na == nb, format!("{na} vs {nb}"))?;
        ensure(da == db, format!("{na} differs between runs"))?;
    }
    Ok(format!("{} output files byte-identical", first.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", criterion_1),
        ("clean round trip", criterion_2),
        ("validation-data magnitude", criterion_3),
        ("noise degradation", criterion_4),
        ("identifiability", criterion_5),
        ("TLS/LS agreement", criterion_6),
        ("brute force", criterion_7),
        ("signal properties", criterion_8),
        ("metric properties", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
