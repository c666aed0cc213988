//! Run reports as human text and as flat `key=value` lines.

use std::fmt::Write;
use std::time::Duration;

use propsim::engine::{PHASE_REDUCE, PHASE_SUMS, PHASE_VECTORS};

use crate::exec::RunSummary;
use crate::spec::RunSpec;

#[derive(Clone, Debug)]
pub struct PerfReport {
    pub num_way: usize,
    pub n_f: usize,
    pub n_v: usize,
    pub n_p: usize,
    pub grid: String,
    pub metric_count: usize,
    /// Unique elementwise comparisons: `n_f` per computed tuple.
    pub comparisons: u64,
    pub elapsed: Duration,
    /// Executed scalar operations, if counters are on.
    pub ops: Option<u64>,
    /// Slowest rank's time in each phase.
    pub load: Duration,
    pub compute: Duration,
    pub output: Duration,
    pub summary: RunSummary,
}

fn phase_name(p: u32) -> String {
    match p {
        PHASE_VECTORS => "vectors".into(),
        PHASE_SUMS => "sums".into(),
        PHASE_REDUCE => "reduce".into(),
        other => format!("phase{other}"),
    }
}

impl PerfReport {
    pub fn new(spec: &RunSpec, summary: &RunSummary) -> Self {
        let c = &spec.config;
        let max = |f: fn(&crate::exec::RankTimes) -> Duration| {
            summary.ranks.iter().map(f).max().unwrap_or_default()
        };
        PerfReport {
            num_way: c.arity.k(),
            n_f: c.n_f,
            n_v: c.n_v,
            n_p: c.grid.n_p(),
            grid: c.grid.to_string(),
            metric_count: summary.metric_count,
            comparisons: c.n_f as u64 * summary.metric_count as u64,
            elapsed: summary.elapsed,
            ops: spec.counters.then_some(summary.ops.total()),
            load: max(|t| t.load),
            compute: max(|t| t.compute),
            output: max(|t| t.output),
            summary: summary.clone(),
        }
    }

    fn rate(&self, n: u64) -> f64 {
        let s = self.elapsed.as_secs_f64();
        if s > 0.0 {
            n as f64 / s
        } else {
            0.0
        }
    }

    pub fn comparisons_per_sec(&self) -> f64 {
        self.rate(self.comparisons)
    }

    pub fn ops_per_sec(&self) -> Option<f64> {
        self.ops.map(|o| self.rate(o))
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("num_way", self.num_way.to_string());
        kv("num_field", self.n_f.to_string());
        kv("num_vector", self.n_v.to_string());
        kv("num_proc", self.n_p.to_string());
        kv("checksum", self.summary.checksum.to_string());
        kv("metric_count", self.metric_count.to_string());
        kv("comparisons", self.comparisons.to_string());
        kv("elapsed_secs", format!("{:.6}", self.elapsed.as_secs_f64()));
        kv("comparisons_per_sec", format!("{:.6e}", self.comparisons_per_sec()));
        if let (Some(o), Some(r)) = (self.ops, self.ops_per_sec()) {
            kv("ops", o.to_string());
            kv("ops_adds", self.summary.ops.adds.to_string());
            kv("ops_mins", self.summary.ops.mins.to_string());
            kv("ops_muls", self.summary.ops.muls.to_string());
            kv("ops_per_sec", format!("{r:.6e}"));
        }
        kv("load_secs", format!("{:.6}", self.load.as_secs_f64()));
        kv("compute_secs", format!("{:.6}", self.compute.as_secs_f64()));
        kv("output_secs", format!("{:.6}", self.output.as_secs_f64()));
        for (p, t) in &self.summary.traffic.phases {
            let n = phase_name(*p);
            kv(&format!("traffic_{n}_messages"), t.messages.to_string());
            kv(&format!("traffic_{n}_bytes"), t.bytes.to_string());
            kv(&format!("traffic_{n}_elements"), t.elements.to_string());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}-way run, {} vectors x {} fields on {} ranks ({})", self.num_way, self.n_v, self.n_f, self.n_p, self.grid);
        let _ = writeln!(s, "checksum     {}", self.summary.checksum);
        let _ = writeln!(s, "metrics      {}", self.metric_count);
        let _ = writeln!(
            s,
            "elapsed      {:.3} s (load {:.3}, compute {:.3}, output {:.3})",
            self.elapsed.as_secs_f64(),
            self.load.as_secs_f64(),
            self.compute.as_secs_f64(),
            self.output.as_secs_f64()
        );
        let _ = writeln!(s, "comparisons  {} ({:.3e}/s)", self.comparisons, self.comparisons_per_sec());
        if let (Some(o), Some(r)) = (self.ops, self.ops_per_sec()) {
            let _ = writeln!(s, "operations   {o} ({r:.3e}/s)");
        }
        for (p, t) in &self.summary.traffic.phases {
            let _ = writeln!(
                s,
                "traffic      {:<8} {} messages, {} bytes, {} elements",
                phase_name(*p),
                t.messages,
                t.bytes,
                t.elements
            );
        }
        s
    }
}
