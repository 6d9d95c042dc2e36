//! Sequential channel access and per-link outcomes for each MAC configuration.
//!
//! Concurrent schemes admit links one at a time in access order. Link `Q`
//! picks a TX vector that is silent at the receivers of links `1..Q-1`, then
//! derives its RX vector from the (possibly noisy) channels it can estimate.
//! Once every link is fixed, the true post-processing SNR decides viability.
//!
//! The non-concurrent scheme serves one link at a time with SVD eigen-streams
//! and reports the time-shared (mean) throughput.

use serde::{Deserialize, Serialize};

use crate::beamforming::{
    candidate_basis, effective_channel, intf_column, mmse_covariance, rx_mmse, rx_ummse, rx_zf, stream_ppsnr,
    svd_link_vectors, tx_beamform, tx_beamnull, BeamSolution, EffectiveChannel,
};
use crate::error::{invalid, Result, SimError};
use crate::linalg::{CMat, CVec};
use crate::metrics::{
    effective_ppsnr, judge_link, ppsnr, select_mcs, to_db, LinkOutcome, McsTable, PpsnrProfile, EFFECTIVE_SNR_ALPHA,
};
use crate::rf::{noisy_channel_matrix, noisy_effective_channel, noisy_intf_column, ChannelSet, NoiseSite, SimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStrategy {
    Beamnull,
    Beamform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RxStrategy {
    #[serde(rename = "zf")]
    Zf,
    #[serde(rename = "mmse")]
    Mmse,
    #[serde(rename = "ummse")]
    UniversalMmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum McsPolicy {
    Fixed(usize),
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Concurrent,
    NonConcurrent,
}

/// One MAC configuration. `tx` and `rx` are ignored by the non-concurrent
/// scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub name: String,
    pub kind: SchemeKind,
    pub tx: TxStrategy,
    pub rx: RxStrategy,
    pub mcs: McsPolicy,
    /// Channel-estimation noise variance as a multiple of the per-subcarrier
    /// background noise.
    pub est_noise_ratio: f64,
    pub backoff_db: f64,
}

impl SchemeConfig {
    pub fn concurrent(
        name: impl Into<String>,
        tx: TxStrategy,
        rx: RxStrategy,
        mcs: McsPolicy,
        est_noise_ratio: f64,
    ) -> Self {
        Self {
            name: name.into(),
            kind: SchemeKind::Concurrent,
            tx,
            rx,
            mcs,
            est_noise_ratio,
            backoff_db: 0.0,
        }
    }

    pub fn non_concurrent(name: impl Into<String>, mcs: McsPolicy, est_noise_ratio: f64) -> Self {
        Self {
            name: name.into(),
            kind: SchemeKind::NonConcurrent,
            tx: TxStrategy::Beamnull,
            rx: RxStrategy::Zf,
            mcs,
            est_noise_ratio,
            backoff_db: 0.0,
        }
    }

    pub fn with_backoff(mut self, backoff_db: f64) -> Self {
        self.backoff_db = backoff_db;
        self
    }

    /// Absolute estimation-noise variance in mW.
    pub fn est_noise_var(&self, params: &SimParams) -> f64 {
        self.est_noise_ratio * params.noise_var_mw
    }

    pub fn validate(&self, table: &McsTable) -> Result<()> {
        if let McsPolicy::Fixed(m) = self.mcs {
            if m >= table.len() {
                return Err(SimError::Config(format!(
                    "scheme `{}`: fixed MCS {m} not in table",
                    self.name
                )));
            }
        }
        if !(self.est_noise_ratio >= 0.0 && self.est_noise_ratio.is_finite()) {
            return Err(SimError::Config(format!(
                "scheme `{}`: estimation noise must be non-negative, got {}",
                self.name, self.est_noise_ratio
            )));
        }
        if !self.backoff_db.is_finite() {
            return Err(SimError::Config(format!(
                "scheme `{}`: backoff must be finite",
                self.name
            )));
        }
        Ok(())
    }
}

/// The four MAC schemes compared side by side, all with estimation noise at
/// 0.1 of the background noise.
pub fn table2_configs() -> Vec<SchemeConfig> {
    use RxStrategy::*;
    use TxStrategy::*;
    vec![
        SchemeConfig::concurrent("baseline", Beamnull, Zf, McsPolicy::Fixed(0), 0.1),
        SchemeConfig::concurrent("enhanced", Beamform, Mmse, McsPolicy::Adaptive, 0.1),
        SchemeConfig::concurrent("enhanced-ummse", Beamform, UniversalMmse, McsPolicy::Adaptive, 0.1),
        SchemeConfig::non_concurrent("non-concurrent", McsPolicy::Adaptive, 0.1),
    ]
}

/// True and estimated effective SNR of one link, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSnr {
    pub true_db: f64,
    pub estimated_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub per_link: Vec<LinkOutcome>,
    pub sum_throughput_mbps: f64,
    /// Spatial streams per link (always 1 for concurrent schemes).
    pub streams: Vec<usize>,
    pub link_snr: Vec<LinkSnr>,
    /// Final TX/RX vectors; `None` for the non-concurrent scheme.
    pub beams: Option<BeamSolution>,
}

/// Beams and SNR profiles of one concurrent configuration, before any MCS
/// decision. Several MCS policies can share one evaluation.
#[derive(Debug, Clone)]
pub struct ConcurrentRun {
    pub beams: BeamSolution,
    pub true_profiles: Vec<PpsnrProfile>,
    /// Per link, per subcarrier estimated PPSNR in dB.
    pub estimated_db: Vec<Vec<f64>>,
}

fn check_dims(channels: &ChannelSet, params: &SimParams) -> Result<()> {
    params.validate()?;
    if channels.n_antennas() != params.n_antennas || channels.n_subcarriers() != params.n_subcarriers {
        return Err(invalid("channel set does not match the simulation parameters"));
    }
    Ok(())
}

/// Per-subcarrier access state for one concurrent evaluation.
struct Access<'a> {
    channels: &'a ChannelSet,
    params: &'a SimParams,
    sigma_c2: f64,
    subcarrier: usize,
}

impl Access<'_> {
    fn true_effective(&self, rx: usize, tx: usize, w_t: &CVec) -> Result<EffectiveChannel> {
        let i = self.subcarrier;
        effective_channel(
            self.channels.channel(rx, tx, i),
            self.channels.gain(rx, tx),
            self.params,
            w_t,
        )
    }

    fn estimated_effective(&self, rx: usize, tx: usize, w_t: &CVec) -> Result<EffectiveChannel> {
        let h = self.true_effective(rx, tx, w_t)?;
        if self.sigma_c2 == 0.0 {
            return Ok(h);
        }
        let mut rng = self
            .channels
            .estimation_rng(NoiseSite::RxEffective, rx, tx, self.subcarrier);
        Ok(noisy_effective_channel(&h, self.sigma_c2, &mut rng).into())
    }

    fn estimated_intf_column(&self, rx: usize, tx: usize, w_r: &CVec) -> Result<CVec> {
        let i = self.subcarrier;
        let c = intf_column(
            self.channels.channel(rx, tx, i),
            self.channels.gain(rx, tx),
            self.params,
            w_r,
        )?;
        let mut rng = self.channels.estimation_rng(NoiseSite::TxInterference, rx, tx, i);
        Ok(noisy_intf_column(&c, self.sigma_c2, &mut rng))
    }

    fn estimated_link_matrix(&self, link: usize) -> CMat {
        let i = self.subcarrier;
        let h = self.channels.channel(link, link, i);
        if self.sigma_c2 == 0.0 {
            return h.clone();
        }
        let scale = self.params.subcarrier_scale(self.channels.gain(link, link));
        let mut rng = self.channels.estimation_rng(NoiseSite::LinkMatrix, link, link, i);
        noisy_channel_matrix(h, scale, self.sigma_c2, &mut rng)
    }
}

/// Computes TX/RX vectors and SNR profiles for a concurrent configuration.
///
/// The universal-MMSE receiver needs every transmitter fixed first, so during
/// access each link provisionally uses the MMSE receiver (which later links
/// null against) and switches to the universal-MMSE vector afterwards.
#[allow(clippy::needless_range_loop)]
pub fn evaluate_concurrent(
    tx: TxStrategy,
    rx: RxStrategy,
    sigma_c2: f64,
    channels: &ChannelSet,
    params: &SimParams,
) -> Result<ConcurrentRun> {
    check_dims(channels, params)?;
    if !(sigma_c2 >= 0.0) {
        return Err(invalid("estimation noise variance must be non-negative"));
    }
    let k = channels.n_links();
    let na = params.n_antennas;
    let nc = params.n_subcarriers;
    let noise = params.noise_var_mw;

    let mut tx_vectors = vec![Vec::with_capacity(nc); k];
    let mut rx_vectors = vec![Vec::with_capacity(nc); k];
    let mut true_lin = vec![vec![0.0; nc]; k];
    let mut est_db = vec![vec![0.0; nc]; k];

    for i in 0..nc {
        let acc = Access {
            channels,
            params,
            sigma_c2,
            subcarrier: i,
        };
        let mut wt: Vec<CVec> = Vec::with_capacity(k);
        let mut wr: Vec<CVec> = Vec::with_capacity(k);
        // est[q][p]: receiver q's estimate of transmitter p's effective channel.
        let mut est: Vec<Vec<Option<EffectiveChannel>>> = vec![vec![None; k]; k];

        for q in 0..k {
            let cols = (0..q)
                .map(|p| acc.estimated_intf_column(p, q, &wr[p]))
                .collect::<Result<Vec<_>>>()?;
            for p in 0..q {
                est[q][p] = Some(acc.estimated_effective(q, p, &wt[p])?);
            }
            let prior: Vec<EffectiveChannel> = (0..q).map(|p| est[q][p].clone().expect("filled")).collect();

            let w_t = if tx == TxStrategy::Beamform && q < na {
                let basis = candidate_basis(&cols, na)?;
                let c = mmse_covariance(&prior, na, noise)?;
                let h_est = acc.estimated_link_matrix(q);
                tx_beamform(&basis, &h_est, channels.gain(q, q), params, &c)?
            } else {
                tx_beamnull(&cols, na)
            };
            let desired = acc.estimated_effective(q, q, &w_t)?;
            wt.push(w_t);

            let w_r = match rx {
                RxStrategy::Zf => {
                    let mut b = Vec::with_capacity(q + 1);
                    b.push(desired.clone().into_inner());
                    b.extend(prior.iter().rev().map(|e| (**e).clone()));
                    rx_zf(&CMat::from_columns(&b))?
                }
                RxStrategy::Mmse | RxStrategy::UniversalMmse => rx_mmse(&desired, &prior, noise)?,
            };
            est[q][q] = Some(desired);
            wr.push(w_r);
        }

        if rx == RxStrategy::UniversalMmse {
            for q in 0..k {
                for p in (q + 1)..k {
                    est[q][p] = Some(acc.estimated_effective(q, p, &wt[p])?);
                }
                let others: Vec<EffectiveChannel> = (0..k)
                    .filter(|&p| p != q)
                    .map(|p| est[q][p].clone().expect("filled"))
                    .collect();
                wr[q] = rx_ummse(est[q][q].as_ref().expect("filled"), &others, noise)?;
            }
        }

        for q in 0..k {
            let truth = (0..k)
                .map(|p| acc.true_effective(q, p, &wt[p]))
                .collect::<Result<Vec<_>>>()?;
            let others: Vec<EffectiveChannel> = truth
                .iter()
                .enumerate()
                .filter(|(p, _)| *p != q)
                .map(|(_, h)| h.clone())
                .collect();
            true_lin[q][i] = ppsnr(&wr[q], &truth[q], &others, noise)?;

            // The receiver only accounts for transmitters it knows about.
            let known: Vec<EffectiveChannel> = match rx {
                RxStrategy::UniversalMmse => (0..k)
                    .filter(|&p| p != q)
                    .map(|p| est[q][p].clone().expect("filled"))
                    .collect(),
                _ => (0..q).map(|p| est[q][p].clone().expect("filled")).collect(),
            };
            let estimated = ppsnr(&wr[q], est[q][q].as_ref().expect("filled"), &known, noise)?;
            est_db[q][i] = to_db(estimated);
        }

        for (q, (t, r)) in wt.into_iter().zip(wr).enumerate() {
            tx_vectors[q].push(t);
            rx_vectors[q].push(r);
        }
    }

    let true_profiles = true_lin
        .iter()
        .map(|g| PpsnrProfile::from_linear(g, EFFECTIVE_SNR_ALPHA, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcurrentRun {
        beams: BeamSolution { tx_vectors, rx_vectors },
        true_profiles,
        estimated_db: est_db,
    })
}

impl ConcurrentRun {
    /// Applies an MCS policy. Adaptive selection uses the estimated effective
    /// SNR minus `backoff_db`; viability always uses the true one.
    pub fn outcome(
        &self,
        policy: McsPolicy,
        backoff_db: f64,
        table: &McsTable,
        params: &SimParams,
    ) -> Result<SchemeResult> {
        let k = self.true_profiles.len();
        let mut per_link = Vec::with_capacity(k);
        let mut link_snr = Vec::with_capacity(k);
        for q in 0..k {
            let true_db = self.true_profiles[q].effective_db;
            let estimated_db = effective_ppsnr(&self.estimated_db[q], EFFECTIVE_SNR_ALPHA, 0.0)?;
            let selected = match policy {
                McsPolicy::Fixed(m) => {
                    if m >= table.len() {
                        return Err(invalid(format!("fixed MCS {m} not in table")));
                    }
                    Some(m)
                }
                McsPolicy::Adaptive => select_mcs(estimated_db - backoff_db, table),
            };
            per_link.push(judge_link(selected, true_db, table, params));
            link_snr.push(LinkSnr { true_db, estimated_db });
        }
        let sum_throughput_mbps = per_link.iter().map(|o| o.throughput_mbps).sum();
        Ok(SchemeResult {
            per_link,
            sum_throughput_mbps,
            streams: vec![1; k],
            link_snr,
            beams: Some(self.beams.clone()),
        })
    }
}

pub fn run_concurrent(
    cfg: &SchemeConfig,
    channels: &ChannelSet,
    params: &SimParams,
    table: &McsTable,
) -> Result<SchemeResult> {
    if cfg.kind != SchemeKind::Concurrent {
        return Err(invalid(format!("scheme `{}` is not concurrent", cfg.name)));
    }
    cfg.validate(table)?;
    evaluate_concurrent(cfg.tx, cfg.rx, cfg.est_noise_var(params), channels, params)?.outcome(
        cfg.mcs,
        cfg.backoff_db,
        table,
        params,
    )
}

/// Outcome of one link under the non-concurrent MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamChoice {
    pub n_streams: usize,
    pub streams: Vec<LinkOutcome>,
    pub link_snr: LinkSnr,
}

/// Serves `link` alone with 1..=N_A SVD streams and keeps the stream count
/// whose estimated throughput is highest (fewest streams on ties).
pub fn single_link_streams(
    link: usize,
    cfg: &SchemeConfig,
    channels: &ChannelSet,
    params: &SimParams,
    table: &McsTable,
) -> Result<StreamChoice> {
    let na = params.n_antennas;
    let nc = params.n_subcarriers;
    let noise = params.noise_var_mw;
    let sigma_c2 = cfg.est_noise_var(params);
    let gain = channels.gain(link, link);

    // [S-1][stream][subcarrier]
    let mut true_lin: Vec<Vec<Vec<f64>>> = (1..=na).map(|s| vec![vec![0.0; nc]; s]).collect();
    let mut est_lin = true_lin.clone();
    for i in 0..nc {
        let acc = Access {
            channels,
            params,
            sigma_c2,
            subcarrier: i,
        };
        let h = channels.channel(link, link, i);
        let h_est = acc.estimated_link_matrix(link);
        for s in 1..=na {
            let sv = svd_link_vectors(&h_est, gain, params, s)?;
            for (j, g) in stream_ppsnr(h, &sv, noise).into_iter().enumerate() {
                true_lin[s - 1][j][i] = g;
            }
            for (j, g) in stream_ppsnr(&h_est, &sv, noise).into_iter().enumerate() {
                est_lin[s - 1][j][i] = g;
            }
        }
    }

    let mut best: Option<(f64, StreamChoice)> = None;
    for s in 1..=na {
        let mut expected = 0.0;
        let mut outcomes = Vec::with_capacity(s);
        let mut first_snr = None;
        for j in 0..s {
            let true_db = PpsnrProfile::from_linear(&true_lin[s - 1][j], EFFECTIVE_SNR_ALPHA, 0.0)?.effective_db;
            let estimated_db = PpsnrProfile::from_linear(&est_lin[s - 1][j], EFFECTIVE_SNR_ALPHA, 0.0)?.effective_db;
            let selected = match cfg.mcs {
                McsPolicy::Fixed(m) => Some(m),
                McsPolicy::Adaptive => select_mcs(estimated_db - cfg.backoff_db, table),
            };
            expected += judge_link(selected, estimated_db - cfg.backoff_db, table, params).throughput_mbps;
            outcomes.push(judge_link(selected, true_db, table, params));
            first_snr.get_or_insert(LinkSnr { true_db, estimated_db });
        }
        let choice = StreamChoice {
            n_streams: s,
            streams: outcomes,
            link_snr: first_snr.expect("s >= 1"),
        };
        if best.as_ref().is_none_or(|(b, _)| expected > *b) {
            best = Some((expected, choice));
        }
    }
    Ok(best.expect("at least one antenna").1)
}

pub fn run_nonconcurrent(
    cfg: &SchemeConfig,
    channels: &ChannelSet,
    params: &SimParams,
    table: &McsTable,
) -> Result<SchemeResult> {
    if cfg.kind != SchemeKind::NonConcurrent {
        return Err(invalid(format!("scheme `{}` is not non-concurrent", cfg.name)));
    }
    cfg.validate(table)?;
    check_dims(channels, params)?;
    let k = channels.n_links();
    let mut per_link = Vec::with_capacity(k);
    let mut streams = Vec::with_capacity(k);
    let mut link_snr = Vec::with_capacity(k);
    for link in 0..k {
        let choice = single_link_streams(link, cfg, channels, params, table)?;
        let throughput: f64 = choice.streams.iter().map(|o| o.throughput_mbps).sum();
        per_link.push(LinkOutcome {
            chosen_mcs: choice.streams[0].chosen_mcs,
            viable: throughput > 0.0,
            throughput_mbps: throughput,
        });
        streams.push(choice.n_streams);
        link_snr.push(choice.link_snr);
    }
    let sum_throughput_mbps = per_link.iter().map(|o| o.throughput_mbps).sum::<f64>() / k as f64;
    Ok(SchemeResult {
        per_link,
        sum_throughput_mbps,
        streams,
        link_snr,
        beams: None,
    })
}

/// Dispatches on [`SchemeConfig::kind`].
pub fn run_scheme(
    cfg: &SchemeConfig,
    channels: &ChannelSet,
    params: &SimParams,
    table: &McsTable,
) -> Result<SchemeResult> {
    match cfg.kind {
        SchemeKind::Concurrent => run_concurrent(cfg, channels, params, table),
        SchemeKind::NonConcurrent => run_nonconcurrent(cfg, channels, params, table),
    }
}

/// Largest scaled leakage `|w_rq^H H w_tQ| / ||H||_F` from a link into the
/// receivers of the links that accessed before it.
pub fn max_nulling_residual(beams: &BeamSolution, channels: &ChannelSet) -> f64 {
    let k = channels.n_links();
    let mut worst: f64 = 0.0;
    for i in 0..channels.n_subcarriers() {
        for q in 1..k {
            for p in 0..q {
                let h = channels.channel(p, q, i);
                let leak = crate::linalg::inner(beams.rx(p, i), &(h * beams.tx(q, i))).norm() / h.norm();
                worst = worst.max(leak);
            }
        }
    }
    worst
}
