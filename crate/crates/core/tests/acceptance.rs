//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use percoflow::capacities::{hash_words, unit_interval, CapacityField, CapacityLaw};
use percoflow::cli::{run, ExperimentConfig};
use percoflow::cylinder::{tau, unit_base};
use percoflow::deviations::{cutset_from_samples, run_phi, sample_meshes, PhiExperiment};
use percoflow::geometry::{unit_cube_domain, UnitVector};
use percoflow::maxflow::{edge_capacities, verify_stream};
use percoflow::nu::{
    check_weak_triangle, direction_grid, estimate_nu, NuEstimate, NuPlan, NuTable,
};
use percoflow::oracle::{check_instance, random_instance, selftest};
use percoflow::stats::slope;
use percoflow::surface::{phi_omega_search, CutFamily};

const SEED: u64 = 20_240_601;

fn report(k: u32, pass: bool, detail: String) {
    println!(
        "criterion {k}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn bernoulli(p: f64) -> CapacityLaw {
    CapacityLaw::Bernoulli { p, a: 1.0 }
}

#[test]
fn criterion_1_duality_exactness() {
    let start = Instant::now();
    let r = selftest(500, SEED);
    let secs = start.elapsed().as_secs_f64();
    let pass = r.passed() && secs < 10.0;
    report(
        1,
        pass,
        format!(
            "{} instances, {} failures, {secs:.2} s",
            r.instances,
            r.failures.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_stream_validity() {
    let mut failures = 0;
    // Half on oracle-sized instances, half on the unit square with random
    // laws and meshes.
    for i in 0..500u64 {
        let inst = random_instance(hash_words(SEED, &[2, i]));
        if !check_instance(&inst).stream_valid {
            failures += 1;
        }
    }
    let laws = [
        bernoulli(0.6),
        bernoulli(0.3),
        CapacityLaw::UniformInt { lo: 0, hi: 5 },
        CapacityLaw::Exponential { rate: 1.0 },
        CapacityLaw::TwoPoint {
            p: 0.5,
            a: 2.0,
            b: 0.25,
        },
    ];
    let domain = unit_cube_domain(2);
    for i in 0..500u64 {
        let h = hash_words(SEED, &[3, i]);
        let law = laws[(unit_interval(h) * laws.len() as f64) as usize % laws.len()];
        let n = 2 + (h % 11) as u32;
        let exp = PhiExperiment::new(&domain, n).unwrap();
        let run = exp.run(&law, h).unwrap();
        let flow = run.flow.expect("nondegenerate square");
        let caps = edge_capacities(exp.graph(), &CapacityField::new(law, h));
        if !verify_stream(
            &flow.stream,
            exp.graph(),
            exp.sources(),
            exp.sinks(),
            &caps,
            flow.value,
        ) {
            failures += 1;
        }
    }
    report(2, failures == 0, format!("1000 runs, {failures} failures"));
    assert_eq!(failures, 0);
}

#[test]
fn criterion_3_deterministic_lattice_values() {
    let start = Instant::now();
    let field = CapacityField::new(CapacityLaw::Constant { a: 1.0 }, SEED);
    let base = unit_base(&UnitVector::axis(2, 0)).unwrap();
    let domain = unit_cube_domain(2);
    let mut bad = Vec::new();
    for n in [2u32, 4, 8, 16] {
        let t = tau(base.clone(), 0.5, n, &field).unwrap();
        let phi = run_phi(&domain, &CapacityLaw::Constant { a: 1.0 }, n, SEED)
            .unwrap()
            .phi;
        if t != f64::from(n + 1) || phi != f64::from(n + 1) {
            bad.push((n, t, phi));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs < 5.0;
    report(3, pass, format!("mismatches {bad:?}, {secs:.2} s"));
    assert!(pass);
}

fn mesh_summary(e: &NuEstimate) -> String {
    e.meshes
        .iter()
        .map(|m| format!("n={} {:.4}±{:.4}", m.n, m.mean, m.stderr))
        .collect::<Vec<_>>()
        .join(", ")
}

/// No consecutive increase beyond two combined standard errors, and the
/// last mean below the first.
fn decreases_beyond_noise(e: &NuEstimate) -> bool {
    let m = &e.meshes;
    m.windows(2)
        .all(|w| w[1].mean <= w[0].mean + 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt())
        && m.last().unwrap().mean < m[0].mean
}

/// Last two means agree within two combined standard errors and the last
/// one sits above `floor` by two standard errors.
fn stabilizes_above(e: &NuEstimate, floor: f64) -> bool {
    let m = &e.meshes;
    let (a, b) = (&m[m.len() - 2], &m[m.len() - 1]);
    (b.mean - a.mean).abs() <= 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
        && b.mean - 2.0 * b.stderr > floor
}

#[test]
fn criterion_4_nu_degeneracy_direction() {
    let start = Instant::now();
    let e1 = UnitVector::axis(2, 0);
    let plan = NuPlan::new(vec![4, 8, 12, 16], 200, SEED);
    let low = estimate_nu(&e1, &bernoulli(0.1), &plan).unwrap();
    let high = estimate_nu(&e1, &bernoulli(0.6), &plan).unwrap();
    let degenerate = decreases_beyond_noise(&low) && low.meshes.last().unwrap().mean < 0.02;
    let positive = stabilizes_above(&high, 0.3);
    let secs = start.elapsed().as_secs_f64();
    let pass = degenerate && positive && secs < 600.0;
    report(
        4,
        pass,
        format!(
            "bernoulli(0.1): {} [{}]; bernoulli(0.6): {} [{}]; {secs:.1} s",
            if degenerate { "ok" } else { "not ok" },
            mesh_summary(&low),
            if positive { "ok" } else { "not ok" },
            mesh_summary(&high),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_weak_triangle_suite() {
    let plan = NuPlan::new(vec![16], 200, SEED);
    let table = NuTable::estimate(&direction_grid(2), &bernoulli(0.6), &plan).unwrap();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    let mut i = 0u64;
    while checked < 100 {
        let u: Vec<f64> = (0..6)
            .map(|k| unit_interval(hash_words(SEED, &[5, i, k])))
            .collect();
        i += 1;
        let (a, b, c) = ([u[0], u[1]], [u[2], u[3]], [u[4], u[5]]);
        let Ok(r) = check_weak_triangle(&table, &a, &b, &c) else {
            continue;
        };
        checked += 1;
        worst = worst.max((r.lhs - r.rhs) / r.margin);
        if r.violated {
            violations += 1;
        }
    }
    report(
        5,
        violations == 0,
        format!("100 triangles, {violations} violations, worst (lhs-rhs)/margin {worst:.3}"),
    );
    assert_eq!(violations, 0);
}

struct RateRun {
    dir: tempfile::TempDir,
    config: ExperimentConfig,
    nu_hat: f64,
    stdout: String,
    secs: f64,
}

fn rate_config(out: PathBuf, nu_table: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        command: Some("rate".into()),
        domain: Some("square".into()),
        law: Some(bernoulli(0.6)),
        meshes: Some(vec![4, 6, 8, 10, 12, 14]),
        replicas: Some(100_000),
        seed: Some(SEED),
        out: Some(out),
        lambda_factor: Some(0.5),
        nu_table: Some(nu_table),
        ..Default::default()
    }
}

/// The rate command of criterion 6, run once and shared with criterion 9.
fn rate_run() -> &'static RateRun {
    static RUN: OnceLock<RateRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let e1 = UnitVector::axis(2, 0);
        let est = estimate_nu(
            &e1,
            &bernoulli(0.6),
            &NuPlan::new(vec![4, 8, 16], 200, SEED),
        )
        .unwrap();
        let nu_hat = est.nu_hat;
        let table = dir.path().join("nu_e1.json");
        std::fs::write(&table, NuTable::new(vec![est]).unwrap().to_json()).unwrap();
        let config = rate_config(dir.path().join("run1"), table);
        let start = Instant::now();
        let mut stdout = Vec::new();
        run("rate", &config, &mut stdout).unwrap();
        RateRun {
            dir,
            config,
            nu_hat,
            stdout: String::from_utf8(stdout).unwrap(),
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_6_surface_order_decay() {
    let r = rate_run();
    let summary: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let v = &summary["verdict"];
    let pass = v["all_positive"] == true && v["monotone_beyond_noise"] == true;
    let csv = std::fs::read_to_string(r.dir.path().join("run1/rate.csv")).unwrap();
    let rates: Vec<String> = csv
        .lines()
        .skip(2)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("n={} hits={} r={}", f[0], f[2], f[6])
        })
        .collect();
    report(
        6,
        pass,
        format!(
            "nu_hat(e1)={:.4}, lambda={:.4}, {}; verdict {}; {:.1} s",
            r.nu_hat,
            summary["lambda"].as_f64().unwrap(),
            rates.join(", "),
            v,
            r.secs
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_cutset_concentration() {
    let law = bernoulli(0.6);
    let samples = sample_meshes(&unit_cube_domain(2), &law, &[6, 10, 14], 100_000, SEED).unwrap();
    let q = cutset_from_samples(&samples, &[]);
    let q99: Vec<f64> = q.points.iter().map(|p| p.q99).collect();
    let bracket = q99.iter().all(|&x| (1.0..=8.0).contains(&x));
    let beta = 2.0 * q99[0];
    let stats = cutset_from_samples(&samples, &[beta]);
    let tails: Vec<f64> = stats.points.iter().map(|p| p.tails[0]).collect();
    let pass = bracket && stats.tails_shrink;
    report(
        7,
        pass,
        format!("q99 {q99:?} for n = 6, 10, 14; tail at beta={beta:.3}: {tails:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_phi_omega_consistency() {
    let n = 16u32;
    let constant = CapacityLaw::Constant { a: 1.0 };
    let plan = NuPlan::new(vec![n], 30, SEED);
    let table = NuTable::estimate(&direction_grid(2), &constant, &plan).unwrap();
    let domain = unit_cube_domain(2);
    let result = phi_omega_search(&domain, &table, &CutFamily::grid(2, 19)).unwrap();
    // Trend of φ_n/n over the meshes of criterion 3, extrapolated in 1/n.
    let meshes = [2u32, 4, 8, 16];
    let xs: Vec<f64> = meshes.iter().map(|&m| 1.0 / f64::from(m)).collect();
    let ys: Vec<f64> = meshes
        .iter()
        .map(|&m| run_phi(&domain, &constant, m, SEED).unwrap().phi / f64::from(m))
        .collect();
    let (b, _) = slope(&xs, &ys);
    let limit = ys.iter().sum::<f64>() / 4.0 - b * xs.iter().sum::<f64>() / 4.0;
    let tol = 2.0 / f64::from(n);
    let hat = result.phi_omega_hat;
    let e1 = table.lookup(&[1.0, 0.0]).unwrap().value;
    let pass = (hat - e1).abs() < 1e-12 && (hat - 1.0).abs() <= tol && (hat - limit).abs() <= tol;
    report(
        8,
        pass,
        format!("phi_omega_hat={hat:.4}, nu_hat(e1)={e1:.4}, trend limit {limit:.4}, tol {tol}"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_reproducibility() {
    let first = rate_run();
    let mut config = first.config.clone();
    config.out = Some(first.dir.path().join("run2"));
    run("rate", &config, &mut Vec::new()).unwrap();
    let a = std::fs::read(first.dir.path().join("run1/rate.csv")).unwrap();
    let b = std::fs::read(first.dir.path().join("run2/rate.csv")).unwrap();
    let pass = a == b;
    report(
        9,
        pass,
        format!("rate.csv {} bytes, identical: {pass}", a.len()),
    );
    assert!(pass);
}
