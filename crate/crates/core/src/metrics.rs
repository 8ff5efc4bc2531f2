//! Run counters, derived metrics, aggregation over seeds, and CSV output.
//!
//! Per-run CSV columns, in order: `seed, router, generated, delivered,
//! relayed, aborted, ttl_dropped, buffer_evicted, extinct, still_buffered,
//! delivery_rate, avg_latency, overhead_ratio, avg_buffer_time`. Undefined
//! metrics are written as empty fields. Aggregate rows start with any label
//! columns followed by `runs` and a `<metric>_mean, <metric>_std` pair for
//! every numeric column of the per-run table.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SimError};

pub const RUN_COLUMNS: [&str; 14] = [
    "seed",
    "router",
    "generated",
    "delivered",
    "relayed",
    "aborted",
    "ttl_dropped",
    "buffer_evicted",
    "extinct",
    "still_buffered",
    "delivery_rate",
    "avg_latency",
    "overhead_ratio",
    "avg_buffer_time",
];

/// Names of the aggregated metrics, in column order.
pub const METRIC_NAMES: [&str; 12] = [
    "generated",
    "delivered",
    "relayed",
    "aborted",
    "ttl_dropped",
    "buffer_evicted",
    "extinct",
    "still_buffered",
    "delivery_rate",
    "avg_latency",
    "overhead_ratio",
    "avg_buffer_time",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub seed: u64,
    pub router: String,
    pub generated: u64,
    pub delivered: u64,
    /// Completed transfers of any kind, deliveries included.
    pub relayed: u64,
    pub aborted: u64,
    /// Messages that expired undelivered.
    pub ttl_dropped: u64,
    /// Copies removed to make room in a buffer.
    pub buffer_evicted: u64,
    /// Messages whose last copy was evicted before delivery or expiry.
    pub extinct: u64,
    pub still_buffered: u64,
    pub delivery_rate: Option<f64>,
    pub avg_latency: Option<f64>,
    pub overhead_ratio: Option<f64>,
    pub avg_buffer_time: Option<f64>,
}

impl MetricsReport {
    /// Values of [`METRIC_NAMES`] in order.
    pub fn metric_values(&self) -> [Option<f64>; 12] {
        [
            Some(self.generated as f64),
            Some(self.delivered as f64),
            Some(self.relayed as f64),
            Some(self.aborted as f64),
            Some(self.ttl_dropped as f64),
            Some(self.buffer_evicted as f64),
            Some(self.extinct as f64),
            Some(self.still_buffered as f64),
            self.delivery_rate,
            self.avg_latency,
            self.overhead_ratio,
            self.avg_buffer_time,
        ]
    }

    /// Every generated message ends in exactly one outcome.
    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.ttl_dropped + self.extinct + self.still_buffered
    }

    fn csv_record(&self) -> Vec<String> {
        let mut rec = vec![self.seed.to_string(), self.router.clone()];
        rec.extend(self.metric_values().iter().map(|v| fmt_opt(*v)));
        rec
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn delivery_rate(delivered: u64, generated: u64) -> Option<f64> {
    (generated > 0).then(|| delivered as f64 / generated as f64)
}

/// Mean delay over `(created_at, delivered_at)` pairs.
pub fn avg_latency(deliveries: &[(f64, f64)]) -> Option<f64> {
    (!deliveries.is_empty()).then(|| {
        deliveries.iter().map(|(c, d)| d - c).sum::<f64>() / deliveries.len() as f64
    })
}

pub fn overhead_ratio(relayed: u64, delivered: u64) -> Option<f64> {
    (delivered > 0).then(|| (relayed as f64 - delivered as f64) / delivered as f64)
}

/// Mean residency over `(admitted_at, removed_at)` copy records.
pub fn buffer_time_stats(custody: &[(f64, f64)]) -> Option<f64> {
    (!custody.is_empty())
        .then(|| custody.iter().map(|(a, r)| r - a).sum::<f64>() / custody.len() as f64)
}

/// Event sink filled by one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collector {
    pub generated: u64,
    pub delivered: u64,
    pub relayed: u64,
    pub aborted: u64,
    pub ttl_dropped: u64,
    pub buffer_evicted: u64,
    pub extinct: u64,
    pub still_buffered: u64,
    latency_sum: f64,
    residency_sum: f64,
    residency_count: u64,
}

impl Collector {
    pub fn on_delivered(&mut self, created_at: f64, at: f64) {
        self.delivered += 1;
        self.latency_sum += at - created_at;
    }

    pub fn on_copy_removed(&mut self, admitted_at: f64, at: f64) {
        self.residency_sum += at - admitted_at;
        self.residency_count += 1;
    }

    pub fn finish(&self, seed: u64, router: &str) -> MetricsReport {
        MetricsReport {
            seed,
            router: router.to_string(),
            generated: self.generated,
            delivered: self.delivered,
            relayed: self.relayed,
            aborted: self.aborted,
            ttl_dropped: self.ttl_dropped,
            buffer_evicted: self.buffer_evicted,
            extinct: self.extinct,
            still_buffered: self.still_buffered,
            delivery_rate: delivery_rate(self.delivered, self.generated),
            avg_latency: (self.delivered > 0).then(|| self.latency_sum / self.delivered as f64),
            overhead_ratio: overhead_ratio(self.relayed, self.delivered),
            avg_buffer_time: (self.residency_count > 0)
                .then(|| self.residency_sum / self.residency_count as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

/// Mean and sample deviation of the defined values, independent of order.
pub fn summarize(values: impl IntoIterator<Item = Option<f64>>) -> Option<Summary> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(Summary { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    /// One entry per [`METRIC_NAMES`] element.
    pub metrics: Vec<Option<Summary>>,
}

impl Aggregate {
    pub fn from_reports(reports: &[MetricsReport]) -> Self {
        let metrics = (0..METRIC_NAMES.len())
            .map(|k| summarize(reports.iter().map(|r| r.metric_values()[k])))
            .collect();
        Aggregate {
            runs: reports.len(),
            metrics,
        }
    }

    pub fn get(&self, name: &str) -> Option<Summary> {
        let k = METRIC_NAMES.iter().position(|m| *m == name)?;
        self.metrics[k]
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.get(name).map(|s| s.mean)
    }

    fn csv_record(&self) -> Vec<String> {
        let mut rec = vec![self.runs.to_string()];
        for m in &self.metrics {
            rec.push(fmt_opt(m.map(|s| s.mean)));
            rec.push(fmt_opt(m.map(|s| s.std)));
        }
        rec
    }
}

pub fn aggregate_header(labels: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    h.push("runs".into());
    for m in METRIC_NAMES {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_std"));
    }
    h
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_records<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn runs_csv_bytes(reports: &[MetricsReport]) -> Vec<u8> {
    let header: Vec<String> = RUN_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows: Vec<_> = reports.iter().map(|r| r.csv_record()).collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &header, &rows).expect("in-memory csv");
    buf
}

/// Rows are `(label values, aggregate)`; labels line up with `labels`.
pub fn aggregate_csv_bytes(labels: &[&str], rows: &[(Vec<String>, Aggregate)]) -> Vec<u8> {
    let recs: Vec<Vec<String>> = rows
        .iter()
        .map(|(l, a)| {
            let mut r = l.clone();
            r.extend(a.csv_record());
            r
        })
        .collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &aggregate_header(labels), &recs).expect("in-memory csv");
    buf
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

/// Writes `runs.csv` and `aggregate.csv` into `dir`, creating it if needed.
pub fn write_reports(dir: &Path, reports: &[MetricsReport], labels: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(&dir.join("runs.csv"), &runs_csv_bytes(reports))?;
    let names: Vec<&str> = labels.iter().map(|(k, _)| *k).collect();
    let values: Vec<String> = labels.iter().map(|(_, v)| v.clone()).collect();
    let agg = Aggregate::from_reports(reports);
    write_file(
        &dir.join("aggregate.csv"),
        &aggregate_csv_bytes(&names, &[(values, agg)]),
    )
}
