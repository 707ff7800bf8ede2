//! Batch evaluation over every transmitter position, receiver and seed.
//!
//! Each `(position, seed)` cell traces the room once per receiver, sweeps the
//! RSS grid, runs all estimators and compares them with the ground truth: the
//! path with the most power at its best-aligned beam pair among those inside
//! both codebook spans. Errors are circular differences in the array-local
//! frames.
//!
//! Seeds per stage are derived from `(scenario seed, position, receiver)`, so
//! records do not depend on how cells are spread over threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{path_peak_amplitude, sweep_rss, RssGrid};
use crate::codebook::{ArrayPose, BeamCodebook};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Method};
use crate::geometry::circular_error;
use crate::raytrace::{trace_at, MultipathComponent};
use crate::scenario::Scenario;
use crate::seeds;
use crate::sequences::ComplexSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 1-based transmitter position (p1..).
    pub position: usize,
    /// 1-based receiver id (RX1..).
    pub receiver: usize,
    pub method: Method,
    pub seed: u64,
    pub aoa_est: f64,
    pub aod_est: f64,
    pub aoa_true: f64,
    pub aod_true: f64,
    pub aoa_err: f64,
    pub aod_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleKind {
    Aoa,
    Aod,
}

impl AngleKind {
    pub fn name(self) -> &'static str {
        match self {
            AngleKind::Aoa => "aoa",
            AngleKind::Aod => "aod",
        }
    }
}

impl EvalRecord {
    pub fn error(&self, kind: AngleKind) -> f64 {
        match kind {
            AngleKind::Aoa => self.aoa_err,
            AngleKind::Aod => self.aod_err,
        }
    }
}

/// Local `(aoa, aod)` of the strongest path inside both codebook spans, with
/// its index into `mpcs`.
pub fn ground_truth(
    mpcs: &[MultipathComponent],
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
) -> Option<(f64, f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, m) in mpcs.iter().enumerate() {
        let strength = path_peak_amplitude(m, cb_tx, tx_pose, cb_rx, rx_pose);
        if strength > 0.0 && best.is_none_or(|(s, _)| strength > s) {
            best = Some((strength, i));
        }
    }
    best.map(|(_, i)| {
        (
            rx_pose.global_to_local(mpcs[i].aoa_deg),
            tx_pose.global_to_local(mpcs[i].aod_deg),
            i,
        )
    })
}

/// Everything needed to simulate one link of a scenario.
pub struct Link<'a> {
    pub paths: Vec<MultipathComponent>,
    pub tx_pose: ArrayPose,
    pub rx_pose: ArrayPose,
    pub cb_tx: &'a BeamCodebook,
    pub cb_rx: &'a BeamCodebook,
}

/// Evaluation context shared by all cells.
pub struct Evaluator {
    scenario: Scenario,
    payload: ComplexSequence,
    cb_tx: BeamCodebook,
    cb_rx: BeamCodebook,
}

impl Evaluator {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let payload = scenario.payload.generate()?;
        let (cb_tx, cb_rx) = scenario.codebooks()?;
        Ok(Self {
            scenario,
            payload,
            cb_tx,
            cb_rx,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn codebooks(&self) -> (&BeamCodebook, &BeamCodebook) {
        (&self.cb_tx, &self.cb_rx)
    }

    /// Trace the paths between position `p` and receiver `i` (both 0-based).
    pub fn link(&self, p: usize, i: usize, seed: u64) -> Result<Link<'_>> {
        let s = &self.scenario;
        let rx_pose = s.rx_poses[i];
        let tx_pose = s.tx_pose(p);
        let trace_seed = seeds::derive(seed, &[seeds::STAGE_TRACE, p as u64, i as u64]);
        let paths = trace_at(
            &s.room,
            tx_pose.position,
            rx_pose.position,
            s.max_order,
            trace_seed,
            s.carrier_hz,
        )?;
        Ok(Link {
            paths,
            tx_pose,
            rx_pose,
            cb_tx: &self.cb_tx,
            cb_rx: &self.cb_rx,
        })
    }

    /// Sweep the RSS grid of a traced link.
    pub fn sweep(&self, link: &Link<'_>, p: usize, i: usize, seed: u64) -> Result<RssGrid> {
        let s = &self.scenario;
        sweep_rss(
            &self.payload,
            &link.paths,
            link.cb_tx,
            &link.tx_pose,
            link.cb_rx,
            &link.rx_pose,
            &s.noise,
            seeds::derive(seed, &[seeds::STAGE_SWEEP, p as u64, i as u64]),
            &s.sweep_options(),
            i + 1,
        )
    }

    /// Simulate the RSS grid for position `p` and receiver `i` (both 0-based).
    pub fn simulate(
        &self,
        p: usize,
        i: usize,
        seed: u64,
    ) -> Result<(RssGrid, Vec<MultipathComponent>)> {
        let link = self.link(p, i, seed)?;
        let grid = self.sweep(&link, p, i, seed)?;
        Ok((grid, link.paths))
    }

    fn cell(&self, p: usize, seed: u64) -> Result<Vec<EvalRecord>> {
        let mut out = Vec::with_capacity(self.scenario.rx_poses.len() * Method::ALL.len());
        for i in 0..self.scenario.rx_poses.len() {
            let context = |e: Error| Error::Context {
                position: p + 1,
                receiver: i + 1,
                source: Box::new(e),
            };
            let link = self.link(p, i, seed).map_err(context)?;
            let (aoa_true, aod_true, _) = ground_truth(
                &link.paths,
                link.cb_tx,
                &link.tx_pose,
                link.cb_rx,
                &link.rx_pose,
            )
            .ok_or(Error::NoGroundTruth {
                position: p + 1,
                receiver: i + 1,
            })?;
            let grid = self.sweep(&link, p, i, seed).map_err(context)?;
            for method in Method::ALL {
                let est = estimate(method, &grid, &self.cb_tx, &self.cb_rx).map_err(context)?;
                out.push(EvalRecord {
                    position: p + 1,
                    receiver: i + 1,
                    method,
                    seed,
                    aoa_est: est.aoa_deg,
                    aod_est: est.aod_deg,
                    aoa_true,
                    aod_true,
                    aoa_err: circular_error(est.aoa_deg, aoa_true),
                    aod_err: circular_error(est.aod_deg, aod_true),
                });
            }
        }
        Ok(out)
    }

    /// Evaluate every cell on the current rayon pool. `progress` receives the
    /// number of finished cells and the total.
    pub fn run(&self, progress: Option<&(dyn Fn(usize, usize) + Sync)>) -> Result<Vec<EvalRecord>> {
        let s = &self.scenario;
        let cells: Vec<(usize, u64)> = (0..s.tx_positions.len())
            .flat_map(|p| s.seeds.iter().map(move |&seed| (p, seed)))
            .collect();
        let total = cells.len();
        let done = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<Result<Vec<EvalRecord>>> = cells
            .par_iter()
            .map(|&(p, seed)| {
                let r = self.cell(p, seed);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if let Some(cb) = progress {
                    cb(n, total);
                }
                r
            })
            .collect();
        let mut records = Vec::with_capacity(total * s.rx_poses.len() * Method::ALL.len());
        for r in results {
            records.extend(r?);
        }
        sort_records(&mut records);
        Ok(records)
    }
}

/// Order by position, receiver, seed, then method.
pub fn sort_records(records: &mut [EvalRecord]) {
    records.sort_by(|a, b| {
        (a.position, a.receiver, a.seed, a.method).cmp(&(b.position, b.receiver, b.seed, b.method))
    });
}

/// Evaluate a scenario on the current rayon pool.
pub fn run_eval(scenario: &Scenario) -> Result<Vec<EvalRecord>> {
    Evaluator::new(scenario.clone())?.run(None)
}

/// Evaluate a scenario on a dedicated pool of `jobs` threads.
pub fn run_eval_with_jobs(
    scenario: &Scenario,
    jobs: usize,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<Vec<EvalRecord>> {
    let evaluator = Evaluator::new(scenario.clone())?;
    thread_pool(jobs)?.install(|| evaluator.run(progress))
}

/// A dedicated rayon pool with `jobs` workers (at least one).
pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_deg: f64,
    pub fraction: f64,
}

/// Empirical CDF of one angle's errors for `method`, restricted to one
/// receiver when given. One point per distinct error value.
pub fn error_cdf(
    records: &[EvalRecord],
    method: Method,
    receiver: Option<usize>,
    kind: AngleKind,
) -> Result<Vec<CdfPoint>> {
    let mut errors: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && receiver.is_none_or(|id| r.receiver == id))
        .map(|r| r.error(kind))
        .collect();
    if errors.is_empty() {
        return Err(Error::invalid("records", "selection is empty"));
    }
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &e) in errors.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.error_deg == e => last.fraction = fraction,
            _ => out.push(CdfPoint {
                error_deg: e,
                fraction,
            }),
        }
    }
    Ok(out)
}

/// CDF value at `x` (fraction of errors `<= x`).
pub fn cdf_at(cdf: &[CdfPoint], x: f64) -> f64 {
    cdf.iter()
        .take_while(|p| p.error_deg <= x)
        .last()
        .map_or(0.0, |p| p.fraction)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub aoa_median: f64,
    pub aoa_p90: f64,
    pub aod_median: f64,
    pub aod_p90: f64,
}

impl ErrorStats {
    fn of<'a>(records: impl Iterator<Item = &'a EvalRecord>) -> Option<Self> {
        let (mut aoa, mut aod): (Vec<f64>, Vec<f64>) =
            records.map(|r| (r.aoa_err, r.aod_err)).unzip();
        if aoa.is_empty() {
            return None;
        }
        aoa.sort_by(f64::total_cmp);
        aod.sort_by(f64::total_cmp);
        Some(Self {
            count: aoa.len(),
            aoa_median: quantile(&aoa, 0.5),
            aoa_p90: quantile(&aoa, 0.9),
            aod_median: quantile(&aod, 0.5),
            aod_p90: quantile(&aod, 0.9),
        })
    }
}

/// Median and 90th-percentile errors keyed by method, then by receiver
/// (`"rx1"`.. and `"all"`).
pub type Summary = BTreeMap<String, BTreeMap<String, ErrorStats>>;

fn receivers(records: &[EvalRecord]) -> Vec<usize> {
    let mut ids: Vec<usize> = records.iter().map(|r| r.receiver).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

pub fn summarize(records: &[EvalRecord]) -> Summary {
    let mut summary = Summary::new();
    for method in Method::ALL {
        let of_method = || records.iter().filter(move |r| r.method == method);
        let Some(all) = ErrorStats::of(of_method()) else {
            continue;
        };
        let mut per_rx = BTreeMap::new();
        per_rx.insert("all".to_string(), all);
        for id in receivers(records) {
            if let Some(stats) = ErrorStats::of(of_method().filter(|r| r.receiver == id)) {
                per_rx.insert(format!("rx{id}"), stats);
            }
        }
        summary.insert(method.name().to_string(), per_rx);
    }
    summary
}

pub const RECORDS_HEADER: &str =
    "position,receiver,method,seed,aoa_est_deg,aod_est_deg,aoa_true_deg,aod_true_deg,aoa_err_deg,aod_err_deg";

pub fn records_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.position,
            r.receiver,
            r.method,
            r.seed,
            r.aoa_est,
            r.aod_est,
            r.aoa_true,
            r.aod_true,
            r.aoa_err,
            r.aod_err
        );
    }
    out
}

pub fn cdf_csv(cdf: &[CdfPoint]) -> String {
    let mut out = String::from("error_deg,fraction\n");
    for p in cdf {
        let _ = writeln!(out, "{},{}", p.error_deg, p.fraction);
    }
    out
}

/// Write `eval_records.csv`, `summary.json` and
/// `cdf_<method>_<rx|all>_<aoa|aod>.csv` into `dir`.
pub fn write_outputs(records: &[EvalRecord], dir: &Path) -> Result<()> {
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path, e))
    };
    write("eval_records.csv", records_csv(records))?;
    write(
        "summary.json",
        serde_json::to_string_pretty(&summarize(records))? + "\n",
    )?;
    let mut selections: Vec<(String, Option<usize>)> = vec![("all".into(), None)];
    selections.extend(
        receivers(records)
            .into_iter()
            .map(|id| (format!("rx{id}"), Some(id))),
    );
    for method in Method::ALL {
        for (label, receiver) in &selections {
            for kind in [AngleKind::Aoa, AngleKind::Aod] {
                let Ok(cdf) = error_cdf(records, method, *receiver, kind) else {
                    continue;
                };
                write(
                    &format!("cdf_{}_{}_{}.csv", method, label, kind.name()),
                    cdf_csv(&cdf),
                )?;
            }
        }
    }
    Ok(())
}
