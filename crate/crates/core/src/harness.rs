//! Monte Carlo driver: seeded topology batches, paired scheme evaluation and
//! per-cell statistics.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result, SimError};
use crate::mac::{
    evaluate_concurrent, run_nonconcurrent, table2_configs, ConcurrentRun, McsPolicy, RxStrategy, SchemeConfig,
    SchemeKind, SchemeResult, TxStrategy,
};
use crate::metrics::McsTable;
use crate::rf::{generate_channels, generate_topology, splitmix64, ChannelSet, SimParams};

pub const DEFAULT_TOPOLOGIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub schemes: Vec<SchemeConfig>,
    pub k_values: Vec<usize>,
    pub n_topologies: usize,
    pub base_seed: u64,
    pub params: SimParams,
    pub mcs_table: McsTable,
    /// Keep per-topology sum throughputs in every cell.
    pub keep_samples: bool,
}

impl Scenario {
    pub fn new(name: impl Into<String>, schemes: Vec<SchemeConfig>) -> Self {
        Self {
            name: name.into(),
            schemes,
            k_values: (1..=8).collect(),
            n_topologies: DEFAULT_TOPOLOGIES,
            base_seed: 0,
            params: SimParams::default(),
            mcs_table: McsTable::default(),
            keep_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_topologies == 0 {
            return Err(SimError::Config("topology count must be at least 1".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(SimError::Config("link counts must be non-empty and positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(SimError::Config("scenario has no schemes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.schemes {
            if !seen.insert(s.name.as_str()) {
                return Err(SimError::Config(format!("duplicate scheme name `{}`", s.name)));
            }
            if s.name.contains(',') || s.name.contains('"') || s.name.contains('\n') {
                return Err(SimError::Config(format!("scheme name `{}` is not CSV-safe", s.name)));
            }
            s.validate(&self.mcs_table)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub mean_mbps: f64,
    /// Sample standard deviation; zero for a single topology.
    pub std_mbps: f64,
    pub n: usize,
    /// Per-topology sum throughput in topology order, when retained.
    pub samples: Option<Vec<f64>>,
}

impl CellStats {
    pub fn from_samples(samples: &[f64], keep: bool) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean_mbps: mean,
            std_mbps: std,
            n,
            samples: keep.then(|| samples.to_vec()),
        }
    }

    pub fn std_error(&self) -> f64 {
        self.std_mbps / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: String,
    /// Scheme names in scenario order.
    pub schemes: Vec<String>,
    pub k_values: Vec<usize>,
    pub cells: BTreeMap<(String, usize), CellStats>,
}

impl SweepResult {
    pub fn cell(&self, scheme: &str, k: usize) -> Option<&CellStats> {
        self.cells.get(&(scheme.to_string(), k))
    }

    pub fn mean(&self, scheme: &str, k: usize) -> Option<f64> {
        self.cell(scheme, k).map(|c| c.mean_mbps)
    }

    /// Mean sum throughput against K for one scheme.
    pub fn curve(&self, scheme: &str) -> Vec<(usize, f64)> {
        self.k_values
            .iter()
            .filter_map(|&k| self.mean(scheme, k).map(|m| (k, m)))
            .collect()
    }

    /// CSV with header `scheme,k,mean_mbps,std_mbps,n`, rows in scenario
    /// scheme order then ascending K.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,k,mean_mbps,std_mbps,n\n");
        for s in &self.schemes {
            for &k in &self.k_values {
                if let Some(c) = self.cell(s, k) {
                    writeln!(out, "{s},{k},{:.6},{:.6},{}", c.mean_mbps, c.std_mbps, c.n).expect("string write");
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Seed for topology `t` at link count `k`.
pub fn child_seed(base_seed: u64, k: usize, t: usize) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ k as u64);
    splitmix64(h ^ t as u64)
}

/// One topology and its channels, drawn from the cell seed.
pub fn realize(k: usize, seed: u64, params: &SimParams) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = generate_topology(k, params, &mut rng)?;
    generate_channels(&topology, params, &mut rng)
}

/// Evaluates every scheme on one realization. Concurrent schemes that differ
/// only in MCS policy or backoff share their beam computation.
pub fn evaluate_schemes(
    schemes: &[SchemeConfig],
    channels: &ChannelSet,
    params: &SimParams,
    table: &McsTable,
) -> Result<Vec<SchemeResult>> {
    let mut runs: HashMap<(TxStrategy, RxStrategy, u64), ConcurrentRun> = HashMap::new();
    let mut out = Vec::with_capacity(schemes.len());
    for cfg in schemes {
        cfg.validate(table)?;
        let result = match cfg.kind {
            SchemeKind::Concurrent => {
                let sigma = cfg.est_noise_var(params);
                let key = (cfg.tx, cfg.rx, sigma.to_bits());
                let run = match runs.entry(key) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(evaluate_concurrent(cfg.tx, cfg.rx, sigma, channels, params)?),
                };
                run.outcome(cfg.mcs, cfg.backoff_db, table, params)?
            }
            SchemeKind::NonConcurrent => run_nonconcurrent(cfg, channels, params, table)?,
        };
        out.push(result);
    }
    Ok(out)
}

/// Runs the full (K, topology) grid. Cells are evaluated in parallel and
/// reduced in grid order, so the result does not depend on scheduling.
pub fn run_scenario(s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    let grid: Vec<(usize, usize)> = s
        .k_values
        .iter()
        .flat_map(|&k| (0..s.n_topologies).map(move |t| (k, t)))
        .collect();
    let sums: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(k, t)| -> Result<Vec<f64>> {
            let channels = realize(k, child_seed(s.base_seed, k, t), &s.params)?;
            let results = evaluate_schemes(&s.schemes, &channels, &s.params, &s.mcs_table)?;
            Ok(results.iter().map(|r| r.sum_throughput_mbps).collect())
        })
        .collect::<Result<_>>()?;

    let mut cells = BTreeMap::new();
    for (ki, &k) in s.k_values.iter().enumerate() {
        let rows = &sums[ki * s.n_topologies..(ki + 1) * s.n_topologies];
        for (si, scheme) in s.schemes.iter().enumerate() {
            let samples: Vec<f64> = rows.iter().map(|r| r[si]).collect();
            cells.insert(
                (scheme.name.clone(), k),
                CellStats::from_samples(&samples, s.keep_samples),
            );
        }
    }
    Ok(SweepResult {
        scenario: s.name.clone(),
        schemes: s.schemes.iter().map(|c| c.name.clone()).collect(),
        k_values: s.k_values.clone(),
        cells,
    })
}

fn rx_label(rx: RxStrategy) -> &'static str {
    match rx {
        RxStrategy::Zf => "zf",
        RxStrategy::Mmse => "mmse",
        RxStrategy::UniversalMmse => "ummse",
    }
}

fn mcs_label(m: McsPolicy) -> String {
    match m {
        McsPolicy::Fixed(i) => format!("mcs{i}"),
        McsPolicy::Adaptive => "adaptive".into(),
    }
}

/// Estimation-noise levels swept in the CSI-error figure, as multiples of the
/// background noise.
pub const FIG2_NOISE_RATIOS: [f64; 6] = [0.0, 0.001, 0.01, 0.1, 0.5, 1.0];

pub fn fig1() -> Scenario {
    let mut schemes = Vec::new();
    for m in [0, 5] {
        for rx in [RxStrategy::Zf, RxStrategy::Mmse, RxStrategy::UniversalMmse] {
            let name = format!("{}-{}", rx_label(rx), mcs_label(McsPolicy::Fixed(m)));
            schemes.push(SchemeConfig::concurrent(
                name,
                TxStrategy::Beamnull,
                rx,
                McsPolicy::Fixed(m),
                0.0,
            ));
        }
    }
    Scenario::new("fig1", schemes)
}

pub fn fig2() -> Scenario {
    let mut schemes = Vec::new();
    for m in [0, 5] {
        for r in FIG2_NOISE_RATIOS {
            let name = format!("zf-mcs{m}-est{r}");
            schemes.push(SchemeConfig::concurrent(
                name,
                TxStrategy::Beamnull,
                RxStrategy::Zf,
                McsPolicy::Fixed(m),
                r,
            ));
        }
    }
    Scenario::new("fig2", schemes)
}

pub fn fig3() -> Scenario {
    let schemes = [McsPolicy::Fixed(0), McsPolicy::Fixed(5), McsPolicy::Adaptive]
        .into_iter()
        .map(|m| {
            SchemeConfig::concurrent(
                format!("zf-{}", mcs_label(m)),
                TxStrategy::Beamnull,
                RxStrategy::Zf,
                m,
                0.0,
            )
        })
        .collect();
    Scenario::new("fig3", schemes)
}

pub fn fig4() -> Scenario {
    let mut schemes = Vec::new();
    for m in [McsPolicy::Fixed(0), McsPolicy::Adaptive] {
        for (tx, rx, label) in [
            (TxStrategy::Beamnull, RxStrategy::Zf, "beamnull-zf"),
            (TxStrategy::Beamnull, RxStrategy::Mmse, "beamnull-mmse"),
            (TxStrategy::Beamform, RxStrategy::Mmse, "beamform-mmse"),
        ] {
            schemes.push(SchemeConfig::concurrent(
                format!("{label}-{}", mcs_label(m)),
                tx,
                rx,
                m,
                0.0,
            ));
        }
    }
    Scenario::new("fig4", schemes)
}

pub fn fig5() -> Scenario {
    Scenario::new("fig5", table2_configs())
}

pub fn figure_scenarios() -> Vec<Scenario> {
    vec![fig1(), fig2(), fig3(), fig4(), fig5()]
}

/// Looks up a figure scenario by name (`fig1`..`fig5`).
pub fn figure_scenario(name: &str) -> Result<Scenario> {
    figure_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| invalid(format!("unknown scenario `{name}`")))
}
