//! Per-subcarrier beam computations: effective channels, TX beamnulling and
//! subspace-constrained TX beamforming, ZF / MMSE / universal-MMSE receive
//! vectors, and SVD eigen-streams for single-link MIMO.
//!
//! Every function works on one subcarrier. Channel matrices are unscaled
//! (unit-variance fading); path loss and power enter through `gain` and
//! [`SimParams::subcarrier_scale`].

use std::ops::Deref;

use crate::error::{invalid, Result, SimError};
use crate::linalg::{self, basis_vector, c64, hermitian_defect, hermitian_eigen, normalize, CMat, CVec};
use crate::rf::SimParams;

const UNIT_NORM_TOL: f64 = 1e-6;

/// Received-signal vector `sqrt(P_T G / N_C) H w_t` of one transmitter at one
/// receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel(CVec);

impl EffectiveChannel {
    pub fn into_inner(self) -> CVec {
        self.0
    }
}

impl From<CVec> for EffectiveChannel {
    fn from(v: CVec) -> Self {
        Self(v)
    }
}

impl Deref for EffectiveChannel {
    type Target = CVec;
    fn deref(&self) -> &CVec {
        &self.0
    }
}

/// Per-link, per-subcarrier unit TX and RX vectors: `tx[link][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    pub tx_vectors: Vec<Vec<CVec>>,
    pub rx_vectors: Vec<Vec<CVec>>,
}

impl BeamSolution {
    pub fn tx(&self, link: usize, subcarrier: usize) -> &CVec {
        &self.tx_vectors[link][subcarrier]
    }

    pub fn rx(&self, link: usize, subcarrier: usize) -> &CVec {
        &self.rx_vectors[link][subcarrier]
    }
}

/// Orthonormal TX candidates that keep a new link silent at the receivers
/// that accessed the channel before it, with the interference energy each
/// candidate direction carries (non-increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBasis {
    pub columns: CMat,
    pub eigen_values: Vec<f64>,
}

/// SVD eigen-streams of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamVectors {
    pub tx_matrix: CMat,
    pub rx_matrix: CMat,
    pub singular_values: Vec<f64>,
    /// Per-stream receive power scale `P_T G / (N_C S)` (equal power split).
    pub stream_scale: f64,
}

impl StreamVectors {
    pub fn n_streams(&self) -> usize {
        self.singular_values.len()
    }
}

fn check_unit(v: &CVec, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(invalid(format!("{what} must have unit norm, got {n}")));
    }
    Ok(())
}

pub fn effective_channel(h: &CMat, gain: f64, params: &SimParams, w_t: &CVec) -> Result<EffectiveChannel> {
    check_unit(w_t, "TX vector")?;
    let s = params.subcarrier_scale(gain).sqrt();
    Ok(EffectiveChannel((h * w_t) * c64(s, 0.0)))
}

/// Column of the interference matrix seen by a new transmitter:
/// `{sqrt(P_T G / N_C) w_r^H H}^H`, where `w_r` is an existing receiver's vector.
pub fn intf_column(h: &CMat, gain: f64, params: &SimParams, w_r: &CVec) -> Result<CVec> {
    check_unit(w_r, "RX vector")?;
    let s = params.subcarrier_scale(gain).sqrt();
    Ok((h.adjoint() * w_r) * c64(s, 0.0))
}

fn interference_gram(intf_columns: &[CVec], n_antennas: usize) -> CMat {
    let mut g = CMat::zeros(n_antennas, n_antennas);
    for c in intf_columns {
        g += c * c.adjoint();
    }
    g
}

/// Relative width of the smallest-eigenvalue cluster in [`tx_beamnull`].
const NULL_CLUSTER_TOL: f64 = 1e-9;

/// TX beamnulling: an eigenvector of `H_intf H_intf^H` with the smallest
/// eigenvalue. With no earlier links the first antenna alone is used.
///
/// While fewer than `N_A - 1` links came earlier the smallest eigenvalue is
/// repeated. The vector is then the projection of the lowest-index antenna
/// axis onto that eigenspace, so it varies continuously with the channels.
pub fn tx_beamnull(intf_columns: &[CVec], n_antennas: usize) -> CVec {
    if intf_columns.is_empty() {
        return basis_vector(n_antennas, 0);
    }
    let eig = hermitian_eigen(&interference_gram(intf_columns, n_antennas));
    let lmin = eig.values[n_antennas - 1];
    let tol = NULL_CLUSTER_TOL * eig.values[0].max(f64::MIN_POSITIVE);
    let first = eig
        .values
        .iter()
        .position(|&l| l - lmin <= tol)
        .unwrap_or(n_antennas - 1);
    let space = eig.vectors.columns(first, n_antennas - first);
    if space.ncols() > 1 {
        for a in 0..n_antennas {
            let proj: CVec = space * space.row(a).adjoint();
            if proj.norm() > 1e-3 {
                return normalize(&proj).expect("nonzero projection");
            }
        }
    }
    eig.vectors.column(n_antennas - 1).into_owned()
}

/// The `N_A - Q + 1` least-interfering eigen-directions, where `Q - 1` is the
/// number of interference columns. Only defined while `Q <= N_A`.
pub fn candidate_basis(intf_columns: &[CVec], n_antennas: usize) -> Result<CandidateBasis> {
    let prior = intf_columns.len();
    if prior >= n_antennas {
        return Err(SimError::Unsupported(format!(
            "TX beamforming needs fewer than {n_antennas} earlier links, got {prior}"
        )));
    }
    if prior == 0 {
        return Ok(CandidateBasis {
            columns: CMat::identity(n_antennas, n_antennas),
            eigen_values: vec![0.0; n_antennas],
        });
    }
    let eig = hermitian_eigen(&interference_gram(intf_columns, n_antennas));
    let keep = n_antennas - prior;
    Ok(CandidateBasis {
        columns: eig.vectors.columns(prior, keep).into_owned(),
        eigen_values: eig.values[prior..].to_vec(),
    })
}

fn check_covariance(c_mmse: &CMat, n: usize) -> Result<nalgebra::Cholesky<crate::Complex64, nalgebra::Dyn>> {
    if c_mmse.shape() != (n, n) {
        return Err(invalid(format!("covariance must be {n} x {n}")));
    }
    if hermitian_defect(c_mmse) > 1e-9 {
        return Err(invalid("covariance is not Hermitian"));
    }
    c_mmse
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("covariance is singular or not positive definite"))
}

/// The SINR a unit TX vector `w_t` achieves at an MMSE receiver with
/// interference-plus-noise covariance `c_mmse`:
/// `(P_T G / N_C) (H w)^H C^{-1} (H w)`.
pub fn beamform_objective(h: &CMat, gain: f64, params: &SimParams, c_mmse: &CMat, w_t: &CVec) -> Result<f64> {
    let chol = check_covariance(c_mmse, h.nrows())?;
    let hw = h * w_t;
    let x = chol.solve(&hw);
    Ok(params.subcarrier_scale(gain) * linalg::inner(&hw, &x).re)
}

/// TX beamforming inside the candidate subspace: the combination `D`
/// maximizing the objective of [`beamform_objective`] is the dominant
/// eigenvector of `(H U)^H C^{-1} (H U)`; returns `U D`.
pub fn tx_beamform(
    basis: &CandidateBasis,
    h_desired: &CMat,
    gain: f64,
    params: &SimParams,
    c_mmse: &CMat,
) -> Result<CVec> {
    if basis.columns.ncols() == 0 {
        return Err(invalid("candidate basis is empty"));
    }
    let chol = check_covariance(c_mmse, h_desired.nrows())?;
    let hu = h_desired * &basis.columns;
    let x = chol.solve(&hu);
    let m = (hu.adjoint() * x) * c64(params.subcarrier_scale(gain), 0.0);
    let eig = hermitian_eigen(&m);
    let d: CVec = eig.vectors.column(0).into_owned();
    normalize(&(&basis.columns * d)).ok_or_else(|| SimError::Degenerate("beamforming vector vanished".into()))
}

/// Zero-forcing receiver `N{B (B^H B)^+ e_1}`. Column 0 of `b` is the desired
/// effective channel, the rest are the interferers to null.
pub fn rx_zf(b: &CMat) -> Result<CVec> {
    if b.ncols() == 0 || b.iter().all(|z| *z == c64(0.0, 0.0)) {
        return Err(SimError::Degenerate("ZF input matrix is empty or zero".into()));
    }
    let gram = b.adjoint() * b;
    let pinv = linalg::pinv_hermitian(&gram);
    let v = b * pinv.column(0);
    normalize(&v).ok_or_else(|| SimError::Degenerate("ZF receiver vanished".into()))
}

/// `sum_q h_q h_q^H + noise_var I`.
pub fn mmse_covariance(interferers: &[EffectiveChannel], n_antennas: usize, noise_var: f64) -> Result<CMat> {
    if !(noise_var > 0.0) {
        return Err(invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    let mut c = CMat::identity(n_antennas, n_antennas) * c64(noise_var, 0.0);
    for h in interferers {
        c += &h.0 * h.0.adjoint();
    }
    Ok(c)
}

fn mmse_vector(h_desired: &EffectiveChannel, interferers: &[EffectiveChannel], noise_var: f64) -> Result<CVec> {
    let c = mmse_covariance(interferers, h_desired.len(), noise_var)?;
    let chol = c
        .cholesky()
        .ok_or_else(|| invalid("MMSE covariance is not positive definite"))?;
    let x = chol.solve(&h_desired.0);
    normalize(&x).ok_or_else(|| SimError::Degenerate("desired channel is zero".into()))
}

/// MMSE receiver against the interferers that accessed the channel earlier.
pub fn rx_mmse(h_desired: &EffectiveChannel, interferers: &[EffectiveChannel], noise_var: f64) -> Result<CVec> {
    mmse_vector(h_desired, interferers, noise_var)
}

/// Universal MMSE: identical to [`rx_mmse`] but `all_other` holds every
/// concurrent transmitter, including those that accessed later.
pub fn rx_ummse(h_desired: &EffectiveChannel, all_other: &[EffectiveChannel], noise_var: f64) -> Result<CVec> {
    mmse_vector(h_desired, all_other, noise_var)
}

/// First `n_streams` SVD eigen-modes of `h` with equal power split.
pub fn svd_link_vectors(h: &CMat, gain: f64, params: &SimParams, n_streams: usize) -> Result<StreamVectors> {
    let max = h.nrows().min(h.ncols());
    if n_streams == 0 || n_streams > max {
        return Err(invalid(format!("stream count must be in 1..={max}, got {n_streams}")));
    }
    let svd = linalg::svd(h);
    Ok(StreamVectors {
        tx_matrix: svd.v.columns(0, n_streams).into_owned(),
        rx_matrix: svd.u.columns(0, n_streams).into_owned(),
        singular_values: svd.singular_values[..n_streams].to_vec(),
        stream_scale: params.subcarrier_scale(gain) / n_streams as f64,
    })
}

/// Post-processing SNR of every stream: stream `s` sees the other selected
/// streams of the same link as interference.
pub fn stream_ppsnr(h: &CMat, streams: &StreamVectors, noise_var: f64) -> Vec<f64> {
    let n = streams.n_streams();
    // cross[(s, t)] = u_s^H H v_t
    let cross = streams.rx_matrix.adjoint() * h * &streams.tx_matrix;
    (0..n)
        .map(|s| {
            let signal = cross[(s, s)].norm_sqr();
            let leak: f64 = (0..n).filter(|&t| t != s).map(|t| cross[(s, t)].norm_sqr()).sum();
            streams.stream_scale * signal / (streams.stream_scale * leak + noise_var)
        })
        .collect()
}
