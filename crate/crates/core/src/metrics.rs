//! Post-processing SNR, effective-SNR compression across subcarriers, the MCS
//! table and link adaptation.

use serde::{Deserialize, Serialize};

use crate::beamforming::EffectiveChannel;
use crate::error::{invalid, Result, SimError};
use crate::linalg::{inner, CVec};
use crate::rf::SimParams;

/// Weight of the per-subcarrier SNR variance in the effective SNR.
pub const EFFECTIVE_SNR_ALPHA: f64 = 0.125;

/// Linear SNRs are floored here before conversion to dB so that a null
/// receive vector maps to a very poor, but finite, effective SNR.
pub const PPSNR_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: usize,
    pub modulation: String,
    pub bits_per_symbol: u32,
    /// Code rate as `(numerator, denominator)`.
    pub code_rate: (u32, u32),
    /// Minimum effective post-processing SNR for 10% PER.
    pub threshold_db: f64,
}

impl McsEntry {
    pub fn code_rate(&self) -> f64 {
        self.code_rate.0 as f64 / self.code_rate.1 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

#[derive(Deserialize)]
struct McsTableFile {
    mcs: Vec<McsRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct McsRow {
    modulation: String,
    code_rate: String,
    threshold_db: f64,
}

impl Default for McsTable {
    /// The eight 802.11a/g-style schemes with their 10%-PER thresholds.
    fn default() -> Self {
        let rows = [
            ("BPSK", 1, (1, 2), 1.4),
            ("QPSK", 2, (1, 2), 4.4),
            ("QPSK", 2, (3, 4), 6.5),
            ("16QAM", 4, (1, 2), 8.6),
            ("16QAM", 4, (3, 4), 12.0),
            ("64QAM", 6, (2, 3), 15.8),
            ("64QAM", 6, (3, 4), 17.2),
            ("64QAM", 6, (5, 6), 18.8),
        ];
        let entries = rows
            .iter()
            .enumerate()
            .map(|(index, &(m, bits, rate, thr))| McsEntry {
                index,
                modulation: m.to_string(),
                bits_per_symbol: bits,
                code_rate: rate,
                threshold_db: thr,
            })
            .collect();
        Self { entries }
    }
}

fn bits_for(modulation: &str) -> Option<u32> {
    match modulation.to_ascii_uppercase().as_str() {
        "BPSK" => Some(1),
        "QPSK" => Some(2),
        "8PSK" => Some(3),
        "16QAM" => Some(4),
        "64QAM" => Some(6),
        "256QAM" => Some(8),
        _ => None,
    }
}

fn parse_rate(s: &str) -> Option<(u32, u32)> {
    let (n, d) = s.split_once('/')?;
    let n: u32 = n.trim().parse().ok()?;
    let d: u32 = d.trim().parse().ok()?;
    (n > 0 && d > 0 && n <= d).then_some((n, d))
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SimError::Config("MCS table is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index != i {
                return Err(SimError::Config(format!("MCS entry {i} has index {}", e.index)));
            }
        }
        if entries.windows(2).any(|w| w[1].threshold_db <= w[0].threshold_db) {
            return Err(SimError::Config("MCS thresholds must be strictly increasing".into()));
        }
        Ok(Self { entries })
    }

    /// Parses a table from TOML:
    ///
    /// ```toml
    /// [[mcs]]
    /// modulation = "BPSK"
    /// code_rate = "1/2"
    /// threshold_db = 1.4
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: McsTableFile = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.mcs.len());
        for (index, row) in file.mcs.into_iter().enumerate() {
            let bits = bits_for(&row.modulation)
                .ok_or_else(|| SimError::Config(format!("mcs[{index}].modulation: unknown `{}`", row.modulation)))?;
            let code_rate = parse_rate(&row.code_rate)
                .ok_or_else(|| SimError::Config(format!("mcs[{index}].code_rate: bad rate `{}`", row.code_rate)))?;
            entries.push(McsEntry {
                index,
                modulation: row.modulation,
                bits_per_symbol: bits,
                code_rate,
                threshold_db: row.threshold_db,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&McsEntry> {
        self.entries.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-subcarrier and effective post-processing SNR of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct PpsnrProfile {
    pub per_subcarrier_db: Vec<f64>,
    pub effective_db: f64,
    pub alpha: f64,
    pub backoff_db: f64,
}

impl PpsnrProfile {
    pub fn from_linear(per_subcarrier: &[f64], alpha: f64, backoff_db: f64) -> Result<Self> {
        let per_subcarrier_db: Vec<f64> = per_subcarrier.iter().map(|&g| to_db(g)).collect();
        let effective_db = effective_ppsnr(&per_subcarrier_db, alpha, backoff_db)?;
        Ok(Self {
            per_subcarrier_db,
            effective_db,
            alpha,
            backoff_db,
        })
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.max(PPSNR_FLOOR).log10()
}

/// SINR after receive combining with `w_r`:
/// `|w^H h|^2 / (sum_q |w^H h_q|^2 + noise_var)`.
pub fn ppsnr(
    w_r: &CVec,
    h_desired: &EffectiveChannel,
    interferers: &[EffectiveChannel],
    noise_var: f64,
) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    let signal = inner(w_r, h_desired).norm_sqr();
    let interference: f64 = interferers.iter().map(|h| inner(w_r, h).norm_sqr()).sum();
    Ok(signal / (interference + noise_var))
}

/// `mean(db) - alpha * var(db) - backoff_db`, population variance.
pub fn effective_ppsnr(per_subcarrier_db: &[f64], alpha: f64, backoff_db: f64) -> Result<f64> {
    if per_subcarrier_db.is_empty() {
        return Err(invalid("effective SNR needs at least one subcarrier"));
    }
    let n = per_subcarrier_db.len() as f64;
    let mean = per_subcarrier_db.iter().sum::<f64>() / n;
    let var = per_subcarrier_db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(mean - alpha * var - backoff_db)
}

/// Highest MCS whose threshold is met (inclusive); `None` below the lowest.
pub fn select_mcs(effective_db: f64, table: &McsTable) -> Option<usize> {
    table
        .entries()
        .iter()
        .rev()
        .find(|e| e.threshold_db <= effective_db)
        .map(|e| e.index)
}

/// PHY rate of an MCS in Mbps with every subcarrier carrying data:
/// `bits * rate * W / (1 + guard)`.
pub fn mcs_rate(entry: &McsEntry, params: &SimParams) -> f64 {
    entry.bits_per_symbol as f64 * entry.code_rate() * params.bandwidth_hz / (1.0 + params.guard_fraction) / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub chosen_mcs: Option<usize>,
    pub viable: bool,
    pub throughput_mbps: f64,
}

impl LinkOutcome {
    pub fn dead() -> Self {
        Self {
            chosen_mcs: None,
            viable: false,
            throughput_mbps: 0.0,
        }
    }
}

/// A link is viable when an MCS was selected and the true effective SNR
/// reaches that MCS's threshold.
pub fn judge_link(
    selected_mcs: Option<usize>,
    true_effective_db: f64,
    table: &McsTable,
    params: &SimParams,
) -> LinkOutcome {
    let Some(entry) = selected_mcs.and_then(|i| table.get(i)) else {
        return LinkOutcome {
            chosen_mcs: selected_mcs,
            viable: false,
            throughput_mbps: 0.0,
        };
    };
    let viable = true_effective_db >= entry.threshold_db;
    LinkOutcome {
        chosen_mcs: selected_mcs,
        viable,
        throughput_mbps: if viable { mcs_rate(entry, params) } else { 0.0 },
    }
}
