//! Run description shared by the `run`, `verify`, `index` and `worker`
//! subcommands, and its `key=value` manifest form.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, ValueEnum};
use propsim::engine::DelaySpec;
use propsim::io::{IndexConfig, Manifest, MetricOutputSpec, OutputMode, VectorFileSpec};
use propsim::run::{RunConfig, VectorSource};
use propsim::verify::{SyntheticKind, SyntheticSpec};
use propsim::{Arity, DecompGrid, Error, Kernel, Precision, Result, Tile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricKind {
    Czekanowski,
    /// Czekanowski on 0/1 data, computed with AND + popcount.
    Sorenson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransportKind {
    /// One thread per rank, in-memory channels.
    Threads,
    /// One process per rank, Unix sockets.
    Processes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Synthetic(SyntheticSpec),
    File(PathBuf),
}

/// Flags describing a run.
#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[arg(long = "num-way", default_value_t = 2)]
    pub num_way: usize,
    #[arg(long = "num-field")]
    pub num_field: usize,
    #[arg(long = "num-vector")]
    pub num_vector: usize,
    #[arg(long, default_value_t = 1)]
    pub npf: usize,
    #[arg(long, default_value_t = 1)]
    pub npv: usize,
    #[arg(long, default_value_t = 1)]
    pub npr: usize,
    #[arg(long = "num-stage", default_value_t = 1)]
    pub num_stage: usize,
    /// Stages to compute (3-way); comma separated. Default: all.
    #[arg(long = "stage", value_delimiter = ',')]
    pub stage: Vec<usize>,
    #[arg(long, default_value = "double")]
    pub precision: Precision,
    #[arg(long, value_enum, default_value = "czekanowski")]
    pub metric: MetricKind,
    #[arg(long, value_enum, default_value = "threads")]
    pub transport: TransportKind,
    /// Raw little-endian vector file, one vector after another.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// random-exact or analytic.
    #[arg(long)]
    pub synthetic: Option<SyntheticKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random-exact values lie in [0, 2^bits).
    #[arg(long, default_value_t = 11)]
    pub bits: u32,
    #[arg(long = "output-dir")]
    pub output_dir: Option<PathBuf>,
    #[arg(long = "output-mode", default_value = "byte")]
    pub output_mode: OutputMode,
    #[arg(long, value_enum, default_value = "on")]
    pub counters: Switch,
    /// Output tile edge of the blocked kernel.
    #[arg(long, default_value_t = 64)]
    pub tile: usize,
    #[arg(long = "timeout-secs", default_value_t = 30.0)]
    pub timeout_secs: f64,
    /// Inject random send delays of up to this many microseconds.
    #[arg(long = "delay-max-us")]
    pub delay_max_us: Option<u64>,
    #[arg(long = "delay-seed", default_value_t = 0)]
    pub delay_seed: u64,
}

/// A fully resolved run.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub config: RunConfig,
    pub precision: Precision,
    pub metric: MetricKind,
    pub tile: usize,
    pub transport: TransportKind,
    pub input: InputSpec,
    pub counters: bool,
}

impl RunArgs {
    pub fn to_spec(&self) -> Result<RunSpec> {
        let arity = Arity::from_k(self.num_way)?;
        let grid = DecompGrid::new(self.npf, self.npv, self.npr, self.num_stage)?;
        let input = match (&self.input, self.synthetic) {
            (Some(p), None) => InputSpec::File(p.clone()),
            (None, Some(kind)) => InputSpec::Synthetic(SyntheticSpec {
                kind,
                seed: self.seed,
                n_f: self.num_field,
                n_v: self.num_vector,
                precision: self.precision,
                bits: if kind == SyntheticKind::Analytic { 2 } else { self.bits },
            }),
            (None, None) => return Err(Error::Config("give --input or --synthetic".into())),
            (Some(_), Some(_)) => return Err(Error::Config("--input and --synthetic are exclusive".into())),
        };
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config("--timeout-secs must be positive".into()));
        }
        let mut config = RunConfig::new(arity, self.num_field, self.num_vector, grid);
        config.stages = (!self.stage.is_empty()).then(|| self.stage.clone());
        config.engine.timeout = Duration::from_secs_f64(self.timeout_secs);
        config.engine.delay = self.delay_max_us.map(|us| DelaySpec {
            seed: self.delay_seed,
            max: Duration::from_micros(us),
        });
        config.output = self
            .output_dir
            .as_ref()
            .map(|d| MetricOutputSpec::new(d, self.output_mode));
        config.keep_records = false;
        let spec = RunSpec {
            config,
            precision: self.precision,
            metric: self.metric,
            tile: self.tile,
            transport: self.transport,
            input,
            counters: self.counters == Switch::On,
        };
        spec.finish()
    }
}

fn parse<T: std::str::FromStr>(m: &Manifest, key: &str) -> Result<T> {
    let v = m.require(key)?;
    v.parse()
        .map_err(|_| Error::Config(format!("manifest entry {key}={v} is malformed")))
}

fn enum_value<E: ValueEnum>(m: &Manifest, key: &str) -> Result<E> {
    let v = m.require(key)?;
    E::from_str(v, false).map_err(|_| Error::Config(format!("manifest entry {key}={v} is malformed")))
}

fn enum_name<E: ValueEnum>(e: &E) -> String {
    e.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

impl RunSpec {
    /// Applies the metric to the kernel choice and validates.
    fn finish(mut self) -> Result<Self> {
        self.config.kernel = match self.metric {
            MetricKind::Sorenson => Kernel::BitPacked,
            MetricKind::Czekanowski => Kernel::Blocked(Tile::new(self.tile, self.tile)?),
        };
        if let InputSpec::Synthetic(s) = &self.input {
            s.validate()?;
        }
        self.config.validate()?;
        Ok(self)
    }

    /// The same run without writing outputs.
    pub fn as_read_only(&self) -> RunSpec {
        let mut s = self.clone();
        s.config.output = None;
        s
    }

    pub fn arity(&self) -> Arity {
        self.config.arity
    }

    pub fn source(&self) -> Result<VectorSource> {
        Ok(match &self.input {
            InputSpec::Synthetic(s) => VectorSource::Synthetic(s.generator()?),
            InputSpec::File(p) => VectorSource::File(VectorFileSpec::new(
                p,
                self.config.n_f,
                self.config.n_v,
                self.precision,
            )),
        })
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            arity: self.config.arity,
            n_v: self.config.n_v,
            grid: self.config.grid,
            stages: self.config.stages.as_ref().map(|_| self.config.stage_list()),
        }
    }

    /// Every setting needed to repeat the run exactly.
    pub fn to_manifest(&self) -> Manifest {
        let c = &self.config;
        let mut m = Manifest::default();
        m.set("num_way", c.arity.k())
            .set("num_field", c.n_f)
            .set("num_vector", c.n_v)
            .set("npf", c.grid.n_pf)
            .set("npv", c.grid.n_pv)
            .set("npr", c.grid.n_pr)
            .set("num_stage", c.grid.n_st)
            .set("precision", self.precision)
            .set("metric", enum_name(&self.metric))
            .set("tile", self.tile)
            .set("transport", enum_name(&self.transport))
            .set("counters", if self.counters { "on" } else { "off" })
            .set("timeout_ms", c.engine.timeout.as_millis());
        if let Some(st) = &c.stages {
            let s: Vec<String> = st.iter().map(ToString::to_string).collect();
            m.set("stages", s.join(","));
        }
        if let Some(d) = c.engine.delay {
            m.set("delay_seed", d.seed).set("delay_max_us", d.max.as_micros());
        }
        match &self.input {
            InputSpec::Synthetic(s) => {
                m.set("synthetic", s.kind).set("seed", s.seed).set("bits", s.bits);
            }
            InputSpec::File(p) => {
                m.set("input", absolute(p).display());
            }
        }
        if let Some(o) = &c.output {
            m.set("output_dir", absolute(&o.dir).display()).set("output_mode", o.mode);
        }
        m
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let arity = Arity::from_k(parse(m, "num_way")?)?;
        let (n_f, n_v): (usize, usize) = (parse(m, "num_field")?, parse(m, "num_vector")?);
        let grid = DecompGrid::new(parse(m, "npf")?, parse(m, "npv")?, parse(m, "npr")?, parse(m, "num_stage")?)?;
        let precision: Precision = parse(m, "precision")?;
        let mut config = RunConfig::new(arity, n_f, n_v, grid);
        if let Some(st) = m.get("stages") {
            let v: std::result::Result<Vec<usize>, _> = st.split(',').map(str::parse).collect();
            config.stages = Some(v.map_err(|_| Error::Config(format!("manifest entry stages={st} is malformed")))?);
        }
        config.engine.timeout = Duration::from_millis(parse(m, "timeout_ms")?);
        if m.get("delay_max_us").is_some() {
            config.engine.delay = Some(DelaySpec {
                seed: parse(m, "delay_seed")?,
                max: Duration::from_micros(parse(m, "delay_max_us")?),
            });
        }
        if let Some(d) = m.get("output_dir") {
            config.output = Some(MetricOutputSpec::new(d, parse(m, "output_mode")?));
        }
        config.keep_records = false;
        let input = match m.get("input") {
            Some(p) => InputSpec::File(PathBuf::from(p)),
            None => {
                let kind: SyntheticKind = parse(m, "synthetic")?;
                InputSpec::Synthetic(SyntheticSpec {
                    kind,
                    seed: parse(m, "seed")?,
                    n_f,
                    n_v,
                    precision,
                    bits: parse(m, "bits")?,
                })
            }
        };
        let spec = RunSpec {
            config,
            precision,
            metric: enum_value(m, "metric")?,
            tile: parse(m, "tile")?,
            transport: enum_value(m, "transport")?,
            input,
            counters: enum_value::<Switch>(m, "counters")? == Switch::On,
        };
        spec.finish()
    }
}

/// Manifests are read from anywhere, so paths in them must not depend on the cwd.
fn absolute(p: &std::path::Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}
