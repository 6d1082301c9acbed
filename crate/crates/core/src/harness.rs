//! Run orchestration and AODV/EAODV comparison with on-disk outputs.
//!
//! Layout under an output directory:
//! `<out>/<protocol>/<seed>/trace.txt`, `<out>/<protocol>/<seed>/metrics.csv`
//! and, for comparisons, `<out>/comparison.csv`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{Conservation, IntervalMetrics, MetricsError, MetricsReport};
use crate::sim::{SimError, SimOutput, SimStats, Simulation};
use crate::time::{SimDuration, SimTime};
use crate::{FlowId, PacketPriority, Protocol, Scenario};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("conservation violated ({protocol}, seed {seed}): {detail}")]
    ConservationViolation { protocol: Protocol, seed: u64, detail: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("compare needs at least one seed")]
    NoSeeds,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub protocol: Protocol,
    pub seed: u64,
    pub dir: PathBuf,
    pub trace_sha256: String,
    pub trace_records: usize,
    pub conservation: Conservation,
    pub metrics: MetricsReport,
    pub route_latency: BTreeMap<FlowId, SimDuration>,
    pub stats: SimStats,
}

impl RunSummary {
    pub fn trace_path(&self) -> PathBuf {
        self.dir.join("trace.txt")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
}

pub fn run_dir(out_dir: &Path, protocol: Protocol, seed: u64) -> PathBuf {
    out_dir.join(protocol.token()).join(seed.to_string())
}

/// Runs one scenario and writes its trace and metrics.
pub fn run(sc: &Scenario, out_dir: &Path) -> Result<RunSummary, HarnessError> {
    let out = Simulation::new(sc.clone())?.run();
    let dir = run_dir(out_dir, sc.protocol, sc.seed);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_outputs(sc, &out, &dir)?;
    if !out.conservation.holds() {
        return Err(HarnessError::ConservationViolation {
            protocol: sc.protocol,
            seed: sc.seed,
            detail: format!("{:?}", out.conservation),
        });
    }
    tracing::info!(
        protocol = %sc.protocol,
        seed = sc.seed,
        records = out.records.len(),
        events = out.stats.events,
        "run finished"
    );
    Ok(RunSummary {
        protocol: sc.protocol,
        seed: sc.seed,
        dir,
        trace_sha256: out.trace_sha256,
        trace_records: out.records.len(),
        conservation: out.conservation,
        metrics: out.metrics,
        route_latency: out.route_latency,
        stats: out.stats,
    })
}

fn write_outputs(sc: &Scenario, out: &SimOutput, dir: &Path) -> Result<(), HarnessError> {
    let trace_path = dir.join("trace.txt");
    let mut w = BufWriter::new(File::create(&trace_path).map_err(io_err(&trace_path))?);
    for r in &out.records {
        writeln!(w, "{r}").map_err(io_err(&trace_path))?;
    }
    w.flush().map_err(io_err(&trace_path))?;

    let metrics_path = dir.join("metrics.csv");
    let f = File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    out.metrics.emit_csv(BufWriter::new(f), sc.absent_ratio)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    ThroughputPps,
    Loss,
    DeliveryRatio,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::ThroughputPps, Metric::Loss, Metric::DeliveryRatio];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ThroughputPps => "throughput_pps",
            Metric::Loss => "loss",
            Metric::DeliveryRatio => "delivery_ratio",
        }
    }

    pub fn value(self, m: &IntervalMetrics) -> Option<f64> {
        match self {
            Metric::ThroughputPps => Some(m.throughput_pps),
            Metric::Loss => Some(m.loss_count() as f64),
            Metric::DeliveryRatio => m.delivery_ratio,
        }
    }

    /// Whether a larger value is the better outcome.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Loss)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two samples.
    pub stddev: f64,
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(SampleStats { n, mean, stddev })
    }
}

/// One metric of one interval, aggregated over seeds for the realtime class.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub start: SimTime,
    pub end: SimTime,
    pub metric: Metric,
    pub aodv: Option<SampleStats>,
    pub eaodv: Option<SampleStats>,
    pub eaodv_wins: usize,
    pub aodv_wins: usize,
    pub ties: usize,
}

impl ComparisonRow {
    pub fn delta_mean(&self) -> Option<f64> {
        Some(self.eaodv?.mean - self.aodv?.mean)
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    /// Per seed: the AODV run then the EAODV run.
    pub runs: Vec<(RunSummary, RunSummary)>,
    pub rows: Vec<ComparisonRow>,
    pub csv_path: PathBuf,
}

impl ComparisonReport {
    pub fn row(&self, start: SimTime, metric: Metric) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.start == start && r.metric == metric)
    }
}

/// Runs every seed under both protocols. The scenario's own protocol and
/// seed fields are overridden.
pub fn compare(sc: &Scenario, seeds: &[u64], out_dir: &Path) -> Result<ComparisonReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    let jobs: Vec<(u64, Protocol)> = seeds.iter().flat_map(|&s| Protocol::BOTH.map(|p| (s, p))).collect();
    let mut done = jobs
        .par_iter()
        .map(|&(seed, p)| run(&sc.clone().with_seed(seed).with_protocol(p), out_dir))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    let mut runs = Vec::with_capacity(seeds.len());
    while let (Some(a), Some(e)) = (done.next(), done.next()) {
        runs.push((a, e));
    }

    let rows = aggregate(&runs);
    tracing::debug!(seeds = seeds.len(), rows = rows.len(), "comparison aggregated");
    let csv_path = out_dir.join("comparison.csv");
    write_comparison(&rows, &csv_path)?;
    Ok(ComparisonReport { seeds: seeds.to_vec(), runs, rows, csv_path })
}

fn aggregate(runs: &[(RunSummary, RunSummary)]) -> Vec<ComparisonRow> {
    let series = |r: &RunSummary| r.metrics.series(PacketPriority::Realtime).cloned().collect::<Vec<_>>();
    let per_seed: Vec<_> = runs.iter().map(|(a, e)| (series(a), series(e))).collect();
    let Some((first, _)) = per_seed.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (k, iv) in first.iter().enumerate() {
        for metric in Metric::ALL {
            let (mut av, mut ev) = (Vec::new(), Vec::new());
            let (mut eaodv_wins, mut aodv_wins, mut ties) = (0, 0, 0);
            for (a, e) in &per_seed {
                let x = metric.value(&a[k]);
                let y = metric.value(&e[k]);
                av.extend(x);
                ev.extend(y);
                if let (Some(x), Some(y)) = (x, y) {
                    let better = if metric.higher_is_better() { y.partial_cmp(&x) } else { x.partial_cmp(&y) };
                    match better {
                        Some(std::cmp::Ordering::Greater) => eaodv_wins += 1,
                        Some(std::cmp::Ordering::Less) => aodv_wins += 1,
                        _ => ties += 1,
                    }
                }
            }
            rows.push(ComparisonRow {
                start: iv.start,
                end: iv.end,
                metric,
                aodv: SampleStats::of(&av),
                eaodv: SampleStats::of(&ev),
                eaodv_wins,
                aodv_wins,
                ties,
            });
        }
    }
    rows
}

fn write_comparison(rows: &[ComparisonRow], path: &Path) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let wrap = |e: csv::Error| HarnessError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record([
        "interval_start",
        "interval_end",
        "metric",
        "aodv_mean",
        "aodv_stddev",
        "eaodv_mean",
        "eaodv_stddev",
        "delta_mean",
        "eaodv_wins",
        "aodv_wins",
        "ties",
    ])
    .map_err(wrap)?;
    let num = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.6}"));
    for r in rows {
        w.write_record([
            r.start.to_string(),
            r.end.to_string(),
            r.metric.name().to_string(),
            num(r.aodv.map(|s| s.mean)),
            num(r.aodv.map(|s| s.stddev)),
            num(r.eaodv.map(|s| s.mean)),
            num(r.eaodv.map(|s| s.stddev)),
            num(r.delta_mean()),
            r.eaodv_wins.to_string(),
            r.aodv_wins.to_string(),
            r.ties.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}
