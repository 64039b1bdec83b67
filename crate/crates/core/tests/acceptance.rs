//! Acceptance checks, one test per criterion.
//!
//! Each test prints a single `criterion NN: PASS/FAIL` line (visible with
//! `--nocapture`) and asserts the criterion at its stated tolerance and
//! runtime budget. Monte Carlo thresholds are pilot-calibrated fixtures:
//! the generating seeds are recorded here and the runs are deterministic,
//! so the measured counts are exactly reproducible.
//!
//! The tests share a lock so that runtime budgets are measured without
//! contention; the lock tolerates poisoning so one failed criterion does
//! not silence the rest.
//!
//! Criterion 10's type-1 survival clause fails by design of the fixture,
//! not by implementation defect: with birth rate 3 and certain fertility
//! the per-edge rate 3/2 sits below the one-dimensional contact-process
//! critical point (about 1.65 per edge), so type 1 is itself subcritical
//! and no seed choice reaches the required survivor count. The test
//! reports the measured counts and fails honestly; README.md carries the
//! full analysis.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::Rng;

use sterilecp::branching::{GwSpec, ProgenyStats, PROGENY_CAP};
use sterilecp::coupling::{run_coupled, verify_table_closure};
use sterilecp::experiments::{
    measure_decay, run_competition, single_type_grid, sweep_phase, CompetitionSpec, DecaySpec,
    SweepSpec,
};
use sterilecp::lattice::{InitSpec, SiteState, Torus};
use sterilecp::meanfield::{
    charpoly4, integrate, numeric_eigenvalues4, SingleTypeField, TwoTypeField,
};
use sterilecp::percolation::{count_self_avoiding_paths, sample_block_sterile_arrows};
use sterilecp::sim::{run_auto, run_gillespie, run_graphical, ModelParams, SimOptions};
use sterilecp::stats::ks_two_sample;
use sterilecp::stream::{stream_rng, EXPERIMENT_STREAM, INIT_STREAM};

static GATE: Mutex<()> = Mutex::new(());

fn lock() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02}: {verdict} - {detail}");
}

fn budget(id: u32, elapsed: Duration, cap: Duration) {
    assert!(
        elapsed <= cap,
        "criterion {id:02} took {elapsed:.1?}, budget {cap:.1?}"
    );
}

fn sparse() -> SimOptions {
    SimOptions { sample_interval: f64::MAX, ..SimOptions::default() }
}

#[test]
fn acceptance_01_mean_field_fixed_point() {
    let _guard = lock();
    let t0 = Instant::now();
    let field = SingleTypeField::new(4.0, 0.5).unwrap();
    let run = integrate(|u| field.rhs(u), [0.1, 0.1], 100.0, 1e-3, 100_000).unwrap();
    let u = run.terminal();
    let err = (u[0] - 0.25).abs().max((u[1] - 0.25).abs());
    let elapsed = t0.elapsed();
    let pass = err < 1e-6;
    report(
        1,
        pass,
        &format!("terminal ({:.9}, {:.9}), max error {err:.2e} < 1e-6, {elapsed:.1?}", u[0], u[1]),
    );
    assert!(pass, "fixed-point error {err}");
    budget(1, elapsed, Duration::from_secs(1));
}

#[test]
fn acceptance_02_spectrum_closed_forms() {
    let _guard = lock();
    let t0 = Instant::now();
    let mut rng = stream_rng(2024, EXPERIMENT_STREAM);
    let mut max_eig_err = 0.0f64;
    let mut max_coef_err = 0.0f64;

    // Numeric eigenvalues at Q1. The closed form always contains the
    // pair {-1, -1}; the draws keep the other two eigenvalues separated
    // from -1 and from each other so the sorted comparison is stable.
    for _ in 0..50 {
        let (l1, p1, l2, p2) = loop {
            let l1: f64 = rng.gen_range(1.5..6.0);
            let p1: f64 = rng.gen_range(0.3..1.0);
            let l2: f64 = rng.gen_range(0.1..6.0);
            let p2: f64 = rng.gen_range(0.05..1.0);
            let l1p = l1 * p1;
            let e3 = 1.0 - l1p;
            let e4 = l2 * p2 / l1p - 1.0;
            if l1p > 1.05
                && (l1p - 2.0).abs() > 0.05
                && l2 * p2 > 0.2
                && (e3 - e4).abs() > 0.05
            {
                break (l1, p1, l2, p2);
            }
        };
        let field = TwoTypeField::new(ModelParams::new(l1, p1, l2, p2).unwrap()).unwrap();
        let q1 = field.fixed_points().q1.expect("Q1 exists when lambda1 p1 > 1");
        let mut expected = field.spectrum_q1_closed().unwrap();
        expected.sort_by(f64::total_cmp);
        let mut numeric = numeric_eigenvalues4(field.jacobian(q1));
        numeric.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (n, e) in numeric.iter().zip(expected) {
            max_eig_err = max_eig_err.max((n.re - e).abs()).max(n.im.abs());
        }
    }

    // Characteristic polynomial on the coexistence segment: draws with
    // lambda1 p1 = lambda2 p2 > 1, evaluated at a random interior theta.
    // The segment exists only at exact equality of the products, so p2 is
    // drawn from dyadic rationals, making l2 = l1 p1 / p2 exact in
    // floating point.
    for _ in 0..50 {
        let (l1, p1) = loop {
            let l1: f64 = rng.gen_range(1.5..6.0);
            let p1: f64 = rng.gen_range(0.3..1.0);
            if l1 * p1 > 1.05 {
                break (l1, p1);
            }
        };
        let p2 = [0.5, 0.25, 0.125][rng.gen_range(0..3usize)];
        let l2 = l1 * p1 / p2;
        let theta: f64 = rng.gen_range(0.1..0.9);
        let field = TwoTypeField::new(ModelParams::new(l1, p1, l2, p2).unwrap()).unwrap();
        let point = field.p_theta(theta).unwrap();
        let numeric = charpoly4(field.jacobian(point));
        let closed = field.charpoly_ptheta_closed().unwrap();
        for (n, e) in numeric.iter().zip(closed) {
            max_coef_err = max_coef_err.max((n - e).abs());
        }
    }

    let elapsed = t0.elapsed();
    let pass = max_eig_err < 1e-8 && max_coef_err < 1e-8;
    report(
        2,
        pass,
        &format!(
            "50 Q1 draws max eigenvalue error {max_eig_err:.2e}, 50 segment draws max charpoly coefficient error {max_coef_err:.2e}, both < 1e-8, {elapsed:.1?}"
        ),
    );
    assert!(pass);
    budget(2, elapsed, Duration::from_secs(5));
}

#[test]
fn acceptance_03_invariant_subspace() {
    let _guard = lock();
    let cases = [(5.0, 0.8, 3.0, 0.6), (2.0, 0.5, 2.0, 0.5), (8.0, 0.3, 1.5, 0.9)];
    let mut max_res = 0.0f64;
    for (l1, p1, l2, p2) in cases {
        let field = TwoTypeField::new(ModelParams::new(l1, p1, l2, p2).unwrap()).unwrap();
        // Start on the subspace q_i u_{+i} = p_i u_{-i}.
        let u0 = [0.15, (1.0 - p1) / p1 * 0.15, 0.1, (1.0 - p2) / p2 * 0.1];
        assert!(u0.iter().sum::<f64>() < 1.0, "initial state must lie in the simplex");
        let run = integrate(|u| field.rhs(u), u0, 100.0, 1e-3, 100).unwrap();
        for state in &run.states {
            max_res = max_res.max(field.gamma2_residual(*state));
        }
    }
    let pass = max_res < 1e-8;
    report(
        3,
        pass,
        &format!("3 trajectories over 100 time units, max residual {max_res:.2e} < 1e-8"),
    );
    assert!(pass);
}

#[test]
fn acceptance_04_dulac_sign() {
    let _guard = lock();
    let mut checked = 0u64;
    let mut max_div = f64::NEG_INFINITY;
    for (lambda, p) in [(4.0, 0.5), (1.2, 0.9), (20.0, 0.05)] {
        let field = SingleTypeField::new(lambda, p).unwrap();
        for i in 1..=100 {
            let u1 = i as f64 / 101.0;
            for j in 1..=100 {
                let u2 = (1.0 - u1) * j as f64 / 101.0;
                let div = field.dulac_divergence([u1, u2]).unwrap();
                assert!(div < 0.0, "divergence {div} at ({u1}, {u2}), lambda={lambda}, p={p}");
                max_div = max_div.max(div);
                checked += 1;
            }
        }
    }
    report(
        4,
        true,
        &format!("{checked} interior grid points over 3 parameter sets, all divergences < 0 (max {max_div:.3})"),
    );
}

#[test]
fn acceptance_05_coupling_closure() {
    let _guard = lock();
    let t0 = Instant::now();
    let cases = verify_table_closure();
    let escapes = cases.iter().filter(|c| !c.admissible).count();
    assert_eq!(cases.len(), 75);

    let init = Torus::new(&[100], SiteState::Fertile1).unwrap();
    let run = run_coupled(2.0, 0.5, &init, &init, 4000.0, 77, f64::MAX, Some(1_000_000))
        .expect("domination violation would surface as an error here");
    let elapsed = t0.elapsed();
    let pass = escapes == 0 && run.events_processed == 1_000_000;
    report(
        5,
        pass,
        &format!(
            "75 table cases with {escapes} escapes; coupled run processed {} events with {} admissibility checks and zero violations, {elapsed:.1?}",
            run.events_processed, run.checks
        ),
    );
    assert!(pass);
    budget(5, elapsed, Duration::from_secs(30));
}

#[test]
fn acceptance_06_branching_identities() {
    let _guard = lock();
    let t0 = Instant::now();
    let mut rng = stream_rng(606, EXPERIMENT_STREAM);

    // Mean of Y against 4dp, within three standard errors.
    let mut y_detail = String::new();
    let mut y_pass = true;
    for (d, p) in [(1usize, 0.2), (2, 0.1)] {
        let spec = GwSpec::new(d, p).unwrap();
        let n = 100_000u64;
        let samples: Vec<f64> = (0..n).map(|_| spec.sample_y(&mut rng) as f64).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let target = spec.mean_offspring();
        let z = (mean - target).abs() / se;
        y_pass &= z <= 3.0;
        y_detail.push_str(&format!("Y mean {mean:.4} vs {target} ({z:.2} se) at (d={d}, p={p}); "));
    }

    // Finite-difference derivative of the progeny pgf at 1.
    let spec = GwSpec::new(1, 0.125).unwrap();
    let h = 1e-5;
    let gx1 = (spec.pgf_x(1.0 + h).unwrap() - spec.pgf_x(1.0 - h).unwrap()) / (2.0 * h);
    let gx_pass = (gx1 - 2.0).abs() < 1e-4;

    // Empirical progeny tail against the closed bound at every n <= 50.
    let spec = GwSpec::new(1, 0.2).unwrap();
    let stats = ProgenyStats::collect(&spec, 100_000, PROGENY_CAP, &mut rng);
    let (s1, c1) = spec.find_s1().unwrap();
    let mut tail_pass = true;
    let mut worst_margin = f64::INFINITY;
    for n in 0..=50u64 {
        let bound = c1 * s1.powf(-(n as f64));
        let tail = stats.empirical_tail(n);
        tail_pass &= tail <= bound;
        worst_margin = worst_margin.min(bound - tail);
    }

    let elapsed = t0.elapsed();
    let pass = y_pass && gx_pass && tail_pass;
    report(
        6,
        pass,
        &format!(
            "{y_detail}finite-difference G_X'(1) = {gx1:.6} vs 2 within 1e-4: {gx_pass}; tail below C1 s1^-n for all n <= 50 (tightest margin {worst_margin:.2e}), {elapsed:.1?}"
        ),
    );
    assert!(pass);
    budget(6, elapsed, Duration::from_secs(60));
}

#[test]
fn acceptance_07_simulator_equivalence() {
    let _guard = lock();
    let t0 = Instant::now();
    let params = ModelParams::single_type(2.0, 0.5).unwrap();
    let init = Torus::new(&[20], SiteState::Fertile1).unwrap();
    let terminal = |runner: fn(&ModelParams, &Torus, f64, u64, &SimOptions) -> sterilecp::Result<sterilecp::sim::Trajectory>,
                    base: u64|
     -> Vec<f64> {
        (0..10_000u64)
            .map(|rep| {
                let traj = runner(&params, &init, 5.0, base + rep, &sparse()).unwrap();
                traj.terminal_occupancy().occupied() as f64
            })
            .collect()
    };
    let graphical = terminal(run_graphical, 0);
    let gillespie = terminal(run_gillespie, 50_000);
    let ks = ks_two_sample(&graphical, &gillespie, 0.01).unwrap();
    let elapsed = t0.elapsed();
    let pass = !ks.reject;
    report(
        7,
        pass,
        &format!(
            "KS statistic {:.4} vs threshold {:.4} at alpha 0.01 over 10^4 + 10^4 terminal counts, {elapsed:.1?}",
            ks.statistic, ks.threshold
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_08_subcritical_regime() {
    let _guard = lock();
    let t0 = Instant::now();
    let sides = vec![201usize];
    let mut latest = 0.0f64;
    for lambda in [10.0, 100.0, f64::INFINITY] {
        let params = ModelParams::single_type(lambda, 0.2).unwrap();
        for rep in 0..20u64 {
            let seed = 5000 + rep;
            let mut rng = stream_rng(seed, INIT_STREAM);
            let init =
                InitSpec::SingleFertile1AtCenter.materialize(&sides, &mut rng).unwrap();
            let traj = run_auto(&params, &init, 200.0, seed, &sparse()).unwrap();
            let ext = traj.fertile_extinction[0]
                .unwrap_or_else(|| panic!("replica {rep} at lambda {lambda} survived to 200"));
            latest = latest.max(ext);
        }
    }

    let decay = measure_decay(&DecaySpec {
        lambda: 10.0,
        p: 0.2,
        d: 1,
        n_max: 8,
        replicas: 10_000,
        seed_base: 8800,
    })
    .unwrap();
    let spatial = decay.radius_fit.as_ref().expect("spatial fit");
    let spacetime = decay.escape_fit.as_ref().expect("escape fit");
    let elapsed = t0.elapsed();
    let pass = spatial.slope_negative_at_99() && spacetime.slope_negative_at_99();
    report(
        8,
        pass,
        &format!(
            "60/60 replicas extinct (latest at t = {latest:.2}); spatial tail slope {:.3} and space-time slope {:.3} negative at 99% over 10^4 replicas, {elapsed:.1?}",
            spatial.slope, spacetime.slope
        ),
    );
    assert!(pass);
    budget(8, elapsed, Duration::from_secs(300));
}

#[test]
fn acceptance_09_supercritical_fixture() {
    let _guard = lock();
    let t0 = Instant::now();
    let spec = SweepSpec {
        grid: single_type_grid(&[8.0], &[0.98]).unwrap(),
        sides: vec![500],
        init: InitSpec::SingleFertile1AtCenter,
        horizon: 1000.0,
        replicas: 20,
        seed_base: 4000,
    };
    let cell = sweep_phase(&spec).unwrap().remove(0);
    let elapsed = t0.elapsed();
    let pass = cell.survivors[0] >= 16;
    report(
        9,
        pass,
        &format!(
            "survival {}/{} at seed base 4000 (fixture requires >= 16), {elapsed:.1?}",
            cell.survivors[0], cell.replicas
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_10_competition_fixture() {
    let _guard = lock();
    let t0 = Instant::now();
    let mut outcomes = Vec::new();
    for (lambda2, seed_base) in [(50.0, 2000u64), (f64::INFINITY, 2100)] {
        let spec = CompetitionSpec {
            params: ModelParams::new(3.0, 1.0, lambda2, 0.2).unwrap(),
            sides: vec![500],
            init: InitSpec::Product([0.25, 0.0, 0.25, 0.0]),
            horizon: 500.0,
            replicas: 20,
            seed_base,
            sample_interval: f64::MAX,
            lambda_c_proxy: 3.3,
        };
        outcomes.push((lambda2, run_competition(&spec).unwrap()));
    }
    let elapsed = t0.elapsed();
    let type2_pass = outcomes.iter().all(|(_, o)| o.type2_extinct >= 18);
    let type1_pass = outcomes.iter().all(|(_, o)| o.type1_alive >= 14);
    let counts: Vec<String> = outcomes
        .iter()
        .map(|(l2, o)| {
            format!(
                "lambda2 = {l2}: type-2 extinct {}/20, type-1 alive {}/20",
                o.type2_extinct, o.type1_alive
            )
        })
        .collect();
    report(
        10,
        type2_pass && type1_pass,
        &format!(
            "{}; requires type-2 extinct >= 18 ({}) and type-1 alive >= 14 ({}), {elapsed:.1?}",
            counts.join("; "),
            if type2_pass { "met" } else { "missed" },
            if type1_pass { "met" } else { "missed" },
        ),
    );
    budget(10, elapsed, Duration::from_secs(600));
    assert!(type2_pass, "type-2 extinction clause failed: {counts:?}");
    // This clause cannot be met: at birth rate 3 with certain fertility
    // the type-1 per-edge rate is 3/2, below the one-dimensional contact
    // process critical point of about 1.65 per edge, so type 1 dies out
    // on its own regardless of the competitor. Pure type-1 pilots at
    // three disjoint seed bases survive in at most 3/20 replicas, and 14
    // successes out of 20 at that rate have probability around 5e-9.
    // The measured counts above are the honest fixture output; see
    // README.md for the full analysis.
    assert!(
        type1_pass,
        "type-1 survival clause is unattainable at these parameters: {counts:?}"
    );
}

#[test]
fn acceptance_11_path_counts() {
    let _guard = lock();
    let golden_d1: [u64; 10] = [3, 7, 17, 41, 99, 239, 577, 1393, 3363, 8119];
    let golden_d2: [u64; 10] = [5, 21, 89, 369, 1541, 6405, 26673, 110921, 461549, 1919765];
    for (d, golden) in [(1usize, golden_d1), (2, golden_d2)] {
        for (i, expected) in golden.iter().enumerate() {
            let n = i as u64 + 1;
            let count = count_self_avoiding_paths(d, n).unwrap();
            assert_eq!(count, *expected, "d={d}, n={n}");
            let cap = ((2 * d + 1) as u64).pow(n as u32);
            assert!(count <= cap, "d={d}, n={n}: {count} > {cap}");
        }
    }
    report(
        11,
        true,
        "exact counts match golden values and stay within (2d+1)^n for d <= 2, n <= 10",
    );
}

#[test]
fn acceptance_12_perturbation_probability() {
    let _guard = lock();
    let mc = sample_block_sterile_arrows(2.0, 0.999, 5, 1, 10_000, 1212).unwrap();
    let q = (-1.55f64).exp();
    let sigma = (q * (1.0 - q) / 10_000.0).sqrt();
    let z = (mc.zero_fraction - q).abs() / sigma;
    let pass = z <= 3.0;
    report(
        12,
        pass,
        &format!(
            "zero-arrow fraction {:.4} vs e^-1.55 = {q:.4} over 10^4 blocks ({z:.2} sigma)",
            mc.zero_fraction
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_13_determinism() {
    let _guard = lock();
    let bin = env!("CARGO_BIN_EXE_sterilecp");
    let root = std::env::temp_dir().join(format!("sterilecp-acc13-{}", std::process::id()));
    std::fs::create_dir_all(&root).unwrap();
    let sweep_cfg = root.join("sweep.cfg");
    std::fs::write(
        &sweep_cfg,
        "lambdas = 2,4\nps = 0.5,1\nsides = 30\nhorizon = 5\nreplicas = 3\nlambda_c = 3.3\nseed = 9\n",
    )
    .unwrap();
    let sim_cfg = root.join("sim.cfg");
    std::fs::write(&sim_cfg, "lambda1 = 4\np1 = 0.9\nsides = 40\nhorizon = 10\nseed = 3\n")
        .unwrap();

    let run = |sub: &str, cfg: &std::path::Path, out: &std::path::Path| {
        let status = Command::new(bin)
            .args(["--config".as_ref(), cfg.as_os_str(), "--out".as_ref(), out.as_os_str()])
            .arg(sub)
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{sub} failed: {status:?}");
    };
    let hash_file = |path: &std::path::Path| -> u64 {
        let bytes = std::fs::read(path).unwrap();
        let mut h = DefaultHasher::new();
        bytes.hash(&mut h);
        h.finish()
    };

    let mut detail = Vec::new();
    for (sub, cfg, files) in [
        ("sweep", &sweep_cfg, &["sweep.csv", "reference_curves.csv"][..]),
        ("simulate", &sim_cfg, &["run.ndjson"][..]),
    ] {
        let a = root.join(format!("{sub}-a"));
        let b = root.join(format!("{sub}-b"));
        run(sub, cfg, &a);
        run(sub, cfg, &b);
        for file in files {
            let (ha, hb) = (hash_file(&a.join(file)), hash_file(&b.join(file)));
            assert_eq!(ha, hb, "{sub}/{file} differs between identical runs");
            detail.push(format!("{file} {ha:016x}"));
        }
    }
    std::fs::remove_dir_all(&root).ok();
    report(
        13,
        true,
        &format!("re-runs byte-identical by hash: {}", detail.join(", ")),
    );
}
