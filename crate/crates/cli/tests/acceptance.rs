//! Acceptance checks for the whole pipeline. Prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use beamrss::channel::{path_peak_amplitude, sweep_rss, NoiseSpec, RssGrid, SweepOptions};
use beamrss::codebook::{AngleGrid, ArrayPose, BeamCodebook, SynthConfig};
use beamrss::estimators::{estimate_ls1d, estimate_ls2d, ls2d_surface, Method};
use beamrss::evaluation::{run_eval_with_jobs, EvalRecord};
use beamrss::geometry::circular_error;
use beamrss::raytrace::{trace, MultipathComponent, Room, Wall};
use beamrss::scenario::Scenario;
use beamrss::sequences::{zadoff_chu, PayloadConfig};
use beamrss::Point2;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn zc_properties() -> Outcome {
    const K: u64 = 384;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut roots = Vec::new();
    while roots.len() < 20 {
        let u = rng.random_range(1..K);
        if gcd(u, K) == 1 && !roots.contains(&u) {
            roots.push(u);
        }
    }
    let mut worst_modulus = 0.0f64;
    let mut worst_corr = 0.0f64;
    for &u in &roots {
        let x = zadoff_chu(K, u, 0).expect("coprime root");
        let s = x.samples();
        for z in s {
            worst_modulus = worst_modulus.max((z.norm() - 1.0).abs());
        }
        let k = s.len();
        for lag in 1..k {
            let c: Complex64 = (0..k).map(|n| s[n] * s[(n + lag) % k].conj()).sum();
            worst_corr = worst_corr.max(c.norm());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_modulus <= 1e-12 && worst_corr < 1e-9 * K as f64 && within(elapsed, 5.0),
        format!(
            "max ||z|-1| = {worst_modulus:.1e}, max |R(lag)| = {worst_corr:.1e}, {elapsed:.2?}"
        ),
    )
}

fn random_point(rng: &mut ChaCha8Rng, room: &Room, margin: f64) -> Point2 {
    Point2::new(
        rng.random_range(room.x_min + margin..room.x_max - margin),
        rng.random_range(room.y_min + margin..room.y_max - margin),
    )
}

/// Point on `wall` minimizing `|tx - p| + |p - rx|` among `n` evenly spaced
/// candidates.
fn brute_force_specular(room: &Room, tx: Point2, rx: Point2, wall: Wall, n: usize) -> Point2 {
    let candidate = |i: usize| {
        let s = i as f64 / (n - 1) as f64;
        match wall {
            Wall::Left => Point2::new(room.x_min, room.y_min + s * (room.y_max - room.y_min)),
            Wall::Right => Point2::new(room.x_max, room.y_min + s * (room.y_max - room.y_min)),
            Wall::Bottom => Point2::new(room.x_min + s * (room.x_max - room.x_min), room.y_min),
            Wall::Top => Point2::new(room.x_min + s * (room.x_max - room.x_min), room.y_max),
        }
    };
    (0..n)
        .map(candidate)
        .min_by(|a, b| {
            let la = tx.distance(*a) + a.distance(rx);
            let lb = tx.distance(*b) + b.distance(rx);
            la.total_cmp(&lb)
        })
        .unwrap()
}

fn raytrace_oracle() -> Outcome {
    let start = Instant::now();
    let room = Room::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_point = 0.0f64;
    let mut first_order = 0;
    let mut reciprocity_failures = 0;
    for trial in 0..50 {
        let tx = random_point(&mut rng, &room, 0.05);
        let rx = random_point(&mut rng, &room, 0.05);
        let forward = trace(&room, tx, rx, 2, trial).expect("valid placement");
        let backward = trace(&room, rx, tx, 2, trial).expect("valid placement");
        for m in forward.iter().filter(|m| m.order == 1) {
            first_order += 1;
            let expected = brute_force_specular(&room, tx, rx, m.walls[0], 100_000);
            worst_point = worst_point.max(m.reflection_points[0].distance(expected));
        }
        if forward.len() != backward.len() {
            reciprocity_failures += 1;
            continue;
        }
        for m in &forward {
            let reversed: Vec<Wall> = m.walls.iter().rev().copied().collect();
            let twin: Option<&MultipathComponent> = backward.iter().find(|b| b.walls == reversed);
            let exact = twin.is_some_and(|b| {
                b.aod_deg == m.aoa_deg && b.aoa_deg == m.aod_deg && b.delay_s == m.delay_s
            });
            if !exact {
                reciprocity_failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        first_order == 200
            && worst_point <= 1e-3
            && reciprocity_failures == 0
            && within(elapsed, 30.0),
        format!(
            "{first_order} first-order paths, max point offset {worst_point:.1e} m, \
             {reciprocity_failures} reciprocity mismatches, {elapsed:.2?}"
        ),
    )
}

fn random_codebook(rng: &mut ChaCha8Rng, beams: usize, grid: AngleGrid) -> BeamCodebook {
    let power = Array2::from_shape_fn((beams, grid.len), |_| rng.random_range(0.01..1.0));
    BeamCodebook::from_power(&power, grid).expect("positive patterns")
}

/// Least-squares residual `sum (RSS - alpha b_r b_t)^2` evaluated term by term
/// at its minimizing alpha. The residual is quadratic in alpha, so the normal
/// equation gives the minimizer exactly.
fn min_residual(rss: &Array2<f64>, b_tx: &[f64], b_rx: &[f64]) -> f64 {
    let residual = |alpha: f64| {
        let mut sum = 0.0;
        for t in 0..rss.nrows() {
            for r in 0..rss.ncols() {
                let e = rss[[t, r]] - alpha * b_rx[r] * b_tx[t];
                sum += e * e;
            }
        }
        sum
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..rss.nrows() {
        for r in 0..rss.ncols() {
            let p = b_rx[r] * b_tx[t];
            num += rss[[t, r]] * p;
            den += p * p;
        }
    }
    let alpha = num / den;
    let best = residual(alpha);
    // a stationary point of a convex quadratic: any neighbour is no better
    debug_assert!([0.999, 1.001].iter().all(|s| residual(alpha * s) >= best));
    best
}

fn derivation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = AngleGrid::new(-30.0, 1.5, 41).unwrap();
    let mut argmax_mismatches = 0;
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let cb_tx = random_codebook(&mut rng, 8, grid);
        let cb_rx = random_codebook(&mut rng, 8, grid);
        let rss = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..1.0));
        let g = RssGrid::complete(rss.clone(), 1).unwrap();
        let surface = ls2d_surface(&g, &cb_tx, &cb_rx).unwrap();
        let total: f64 = rss.iter().map(|v| v * v).sum();
        let p_tx = cb_tx.power_matrix();
        let p_rx = cb_rx.power_matrix();
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..grid.len {
            let b_rx: Vec<f64> = p_rx.column(i).to_vec();
            for j in 0..grid.len {
                let b_tx: Vec<f64> = p_tx.column(j).to_vec();
                let r = min_residual(&rss, &b_tx, &b_rx);
                if r < best.2 {
                    best = (i, j, r);
                }
                worst_rel = worst_rel.max((surface.values[[i, j]] + r - total).abs() / total);
            }
        }
        if surface.argmax() != (best.0, best.1) {
            argmax_mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        argmax_mismatches == 0 && worst_rel <= 1e-9 && within(elapsed, 10.0),
        format!("{argmax_mismatches}/100 argmax mismatches, max |f + R - sum RSS^2| / sum RSS^2 = {worst_rel:.1e}, {elapsed:.2?}"),
    )
}

struct Shared {
    payload: beamrss::ComplexSequence,
    cb: BeamCodebook,
    room: Room,
}

impl Shared {
    fn new() -> Self {
        Self {
            payload: PayloadConfig::default().generate().unwrap(),
            cb: SynthConfig::default().build().unwrap(),
            room: Room::default(),
        }
    }

    fn sweep(
        &self,
        paths: &[MultipathComponent],
        tx_pose: &ArrayPose,
        rx_pose: &ArrayPose,
        noise: NoiseSpec,
        seed: u64,
    ) -> RssGrid {
        sweep_rss(
            &self.payload,
            paths,
            &self.cb,
            tx_pose,
            &self.cb,
            rx_pose,
            &noise,
            seed,
            &SweepOptions::default(),
            1,
        )
        .unwrap()
    }
}

fn tx_pose(p: Point2) -> ArrayPose {
    ArrayPose {
        position: p,
        boresight_deg: 180.0,
    }
}

fn scale_invariance(shared: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let receivers = ArrayPose::default_receivers();
    let mut mismatches = 0;
    for trial in 0..20 {
        let tx = Point2::new(rng.random_range(1.0..5.5), rng.random_range(-2.0..2.0));
        let rx = receivers[trial % 4];
        let paths = trace(&shared.room, tx, rx.position, 2, trial as u64).unwrap();
        let grid = shared.sweep(
            &paths,
            &tx_pose(tx),
            &rx,
            NoiseSpec::SnrDb(20.0),
            trial as u64,
        );
        let angles = |g: &RssGrid| {
            let (a, _) = estimate_ls2d(g, &shared.cb, &shared.cb).unwrap();
            let (b, _) = estimate_ls1d(g, &shared.cb, &shared.cb).unwrap();
            (a.aoa_deg, a.aod_deg, b.aoa_deg, b.aod_deg)
        };
        let reference = angles(&grid);
        for c in [1e-6, 1.0, 1e6] {
            if angles(&grid.scaled(c).unwrap()) != reference {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches}/60 scaled grids changed an LS2D or LS1D angle"),
    )
}

fn los_identifiability() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let room = Room::default();
    let rx1 = ArrayPose::default_receivers()[0];
    let mut tx_positions = Vec::new();
    while tx_positions.len() < 100 {
        let p = random_point(&mut rng, &room, 0.05);
        let angle = (p.y - rx1.position.y)
            .atan2(p.x - rx1.position.x)
            .to_degrees();
        if angle.abs() <= 40.0 && p.distance(rx1.position) > 0.3 {
            tx_positions.push(p);
        }
    }
    let scenario = Scenario {
        tx_positions,
        rx_poses: vec![rx1],
        noise: NoiseSpec::Off,
        dropout: 0.0,
        max_order: 0,
        seeds: vec![0],
        ..Scenario::default()
    };
    let records = run_eval_with_jobs(&scenario, 1, None).unwrap();
    let ls2d: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| r.method == Method::Ls2d)
        .collect();
    let hits = ls2d
        .iter()
        .filter(|r| r.aoa_err <= 0.5 && r.aod_err <= 0.5)
        .count();
    let worst = ls2d
        .iter()
        .map(|r| r.aoa_err.max(r.aod_err))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        ls2d.len() == 100 && hits == 100 && within(elapsed, 120.0),
        format!(
            "{hits}/{} within 0.5 deg, worst {worst:.3} deg, {elapsed:.2?}",
            ls2d.len()
        ),
    )
}

fn nlos_capability(shared: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rx3 = ArrayPose::default_receivers()[2];
    let mut hits = 0;
    let mut errors = Vec::new();
    for trial in 0..100u64 {
        let tx = Point2::new(rng.random_range(2.0..3.5), rng.random_range(-1.2..1.2));
        let pose = tx_pose(tx);
        let paths: Vec<MultipathComponent> = trace(&shared.room, tx, rx3.position, 2, trial)
            .unwrap()
            .into_iter()
            .filter(|m| !m.is_los())
            .collect();
        let reflection = paths
            .iter()
            .filter(|m| m.order == 1)
            .map(|m| {
                (
                    path_peak_amplitude(m, &shared.cb, &pose, &shared.cb, &rx3),
                    m,
                )
            })
            .filter(|(s, _)| *s > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let Some((_, reflection)) = reflection else {
            errors.push(f64::NAN);
            continue;
        };
        let grid = shared.sweep(&paths, &pose, &rx3, NoiseSpec::SnrDb(20.0), 1000 + trial);
        let (est, _) = estimate_ls2d(&grid, &shared.cb, &shared.cb).unwrap();
        let err = circular_error(est.aoa_deg, rx3.global_to_local(reflection.aoa_deg));
        if err <= 5.0 {
            hits += 1;
        }
        errors.push(err);
    }
    errors.retain(|e| e.is_finite());
    errors.sort_by(f64::total_cmp);
    let median = errors.get(errors.len() / 2).copied().unwrap_or(f64::NAN);
    outcome(
        hits >= 90,
        format!("{hits}/100 trials within 5 deg of the strongest first-order reflection, median error {median:.2} deg"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ls2d_vs_ls1d() -> Outcome {
    let start = Instant::now();
    let scenario = Scenario {
        noise: NoiseSpec::SnrDb(20.0),
        ..Scenario::default()
    };
    let records = run_eval_with_jobs(&scenario, 1, None).unwrap();
    let elapsed = start.elapsed();
    let errors = |m: Method| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.aoa_err)
            .collect()
    };
    let ls2d = errors(Method::Ls2d);
    let ls1d = errors(Method::Ls1d);
    let under_10 = records
        .iter()
        .filter(|r| r.method == Method::Ls2d && r.aoa_err < 10.0 && r.aod_err < 10.0)
        .count() as f64
        / ls2d.len() as f64;
    let (m2, m1) = (median(ls2d.clone()), median(ls1d.clone()));
    outcome(
        ls2d.len() == 320 && m2 < m1 && under_10 > 0.5 && within(elapsed, 600.0),
        format!(
            "{} records, median AoA error LS2D {m2:.3} vs LS1D {m1:.3} deg, LS2D < 10 deg in {:.1}%, \
             {elapsed:.2?} single-threaded",
            records.len(),
            100.0 * under_10
        ),
    )
}

fn geometry_cross_check() -> Outcome {
    let s = Scenario::default();
    let rx1 = s.rx_poses[0];
    let paths = trace(&s.room, s.tx_positions[4], rx1.position, 0, 0).unwrap();
    let aoa = rx1.global_to_local(paths[0].aoa_deg);
    outcome(
        (aoa + 15.6).abs() <= 0.1,
        format!("p5 LoS AoA at RX1 = {aoa:.3} deg"),
    )
}

fn eval_cli(out: &Path, jobs: &str) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_beamrss"))
        .args(["eval", "--seed", "0", "--jobs", jobs, "--out"])
        .arg(out)
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("eval --jobs {jobs} exited with {status}"));
    }
    Ok(start.elapsed())
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("jobs1"), dir.path().join("jobs8"));
    let timings = eval_cli(&a, "1").and_then(|t1| eval_cli(&b, "8").map(|t8| (t1, t8)));
    let (t1, t8) = match timings {
        Ok(t) => t,
        Err(e) => return outcome(false, e),
    };
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    outcome(
        !fa.is_empty() && fa == fb,
        format!(
            "{} CSV files byte-identical: {}, --jobs 1 {t1:.2?} / --jobs 8 {t8:.2?} on {cpus} CPU(s)",
            fa.len(),
            fa == fb
        ),
    )
}

fn main() -> ExitCode {
    let shared = Shared::new();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        (
            "Zadoff-Chu unit modulus and ideal autocorrelation",
            Box::new(zc_properties),
        ),
        (
            "ray tracer vs brute-force specular search, reciprocity",
            Box::new(raytrace_oracle),
        ),
        (
            "LS2D objective equals least-squares residual minimization",
            Box::new(derivation_oracle),
        ),
        (
            "LS2D and LS1D scale invariance",
            Box::new(|| scale_invariance(&shared)),
        ),
        (
            "noiseless LoS identifiability at RX1",
            Box::new(los_identifiability),
        ),
        (
            "NLoS reflection recovery at RX3",
            Box::new(|| nlos_capability(&shared)),
        ),
        (
            "LS2D beats LS1D on the default evaluation",
            Box::new(ls2d_vs_ls1d),
        ),
        ("p5 LoS AoA at RX1", Box::new(geometry_cross_check)),
        ("eval determinism across --jobs", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {verdict} | {name} | {}",
            i + 1,
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
