//! Radio environment: node placement, path loss, per-subcarrier Rayleigh
//! MIMO channels and channel-estimation noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{c64, CMat, CVec};
use crate::Complex64;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Physical-layer and deployment constants shared by every module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub guard_fraction: f64,
    /// Total transmit power per node.
    pub tx_power_mw: f64,
    /// Background noise power per subcarrier.
    pub noise_var_mw: f64,
    pub pathloss_exponent: f64,
    pub ref_distance_m: f64,
    pub wavelength_m: f64,
    /// Width and height of the deployment rectangle.
    pub area_m: (f64, f64),
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            n_subcarriers: 64,
            bandwidth_hz: 20e6,
            guard_fraction: 0.25,
            tx_power_mw: dbm_to_mw(25.0),
            noise_var_mw: dbm_to_mw(-113.0),
            pathloss_exponent: 3.0,
            ref_distance_m: 1.0,
            wavelength_m: 0.125,
            area_m: (200.0, 200.0),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(invalid("n_antennas must be at least 1"));
        }
        if self.n_subcarriers == 0 {
            return Err(invalid("n_subcarriers must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.guard_fraction) {
            return Err(invalid("guard_fraction must lie in [0, 1)"));
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_mw", self.tx_power_mw),
            ("noise_var_mw", self.noise_var_mw),
            ("pathloss_exponent", self.pathloss_exponent),
            ("ref_distance_m", self.ref_distance_m),
            ("wavelength_m", self.wavelength_m),
            ("area width", self.area_m.0),
            ("area height", self.area_m.1),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Received power scale `P_T * gain / N_C` of one subcarrier.
    pub fn subcarrier_scale(&self, gain: f64) -> f64 {
        self.tx_power_mw * gain / self.n_subcarriers as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub tx: Point,
    pub rx: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub links: Vec<LinkGeometry>,
    /// Zero-based link indices in channel-access order.
    pub access_order: Vec<usize>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Places `k` TX/RX pairs uniformly at random in the deployment rectangle.
/// Access order is the generation order.
pub fn generate_topology<R: Rng + ?Sized>(k: usize, params: &SimParams, rng: &mut R) -> Result<Topology> {
    if k == 0 {
        return Err(invalid("link count must be at least 1"));
    }
    let (w, h) = params.area_m;
    let point = |rng: &mut R| Point {
        x: rng.random::<f64>() * w,
        y: rng.random::<f64>() * h,
    };
    let links = (0..k)
        .map(|_| {
            let tx = point(rng);
            let rx = point(rng);
            LinkGeometry { tx, rx }
        })
        .collect();
    Ok(Topology {
        links,
        access_order: (0..k).collect(),
    })
}

/// Simplified path-loss model `(lambda / (4 pi d0))^2 (d0 / d)^gamma`, with
/// distances below `d0` clamped to `d0`.
pub fn path_loss(distance_m: f64, params: &SimParams) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(invalid(format!("distance must be positive, got {distance_m}")));
    }
    let d0 = params.ref_distance_m;
    let d = distance_m.max(d0);
    let k = params.wavelength_m / (4.0 * std::f64::consts::PI * d0);
    Ok(k * k * (d0 / d).powf(params.pathloss_exponent))
}

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_cn_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| sample_cn(rng))
}

pub fn sample_cn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // Row-major draw order, independent of nalgebra's storage layout.
    let mut m = CMat::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = sample_cn(rng);
        }
    }
    m
}

/// Which estimation procedure a noise realization belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseSite {
    /// Receiver-side estimate of an effective channel `H^Rec`.
    RxEffective,
    /// Transmitter-side estimate of an interference column of `H_intf`.
    TxInterference,
    /// Full MIMO matrix of a link, as seen by its own transmitter.
    LinkMatrix,
}

impl NoiseSite {
    fn tag(self) -> u64 {
        match self {
            NoiseSite::RxEffective => 1,
            NoiseSite::TxInterference => 2,
            NoiseSite::LinkMatrix => 3,
        }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// True channels of one topology realization.
///
/// Channels are indexed by `(rx_link, tx_link)`: the matrix from the
/// transmitter of `tx_link` to the receiver of `rx_link`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    n_links: usize,
    n_antennas: usize,
    n_subcarriers: usize,
    channels: Vec<CMat>,
    gains: Vec<f64>,
    noise_seed: u64,
}

impl ChannelSet {
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn channel(&self, rx: usize, tx: usize, subcarrier: usize) -> &CMat {
        &self.channels[(rx * self.n_links + tx) * self.n_subcarriers + subcarrier]
    }

    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.gains[rx * self.n_links + tx]
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Dedicated random stream for one estimated quantity. Every
    /// `(site, rx, tx, subcarrier)` gets its own independent stream, so a
    /// realization does not depend on evaluation order or on which other
    /// quantities a scheme happens to estimate.
    pub fn estimation_rng(&self, site: NoiseSite, rx: usize, tx: usize, subcarrier: usize) -> ChaCha8Rng {
        let mut h = splitmix64(self.noise_seed ^ site.tag());
        h = splitmix64(h ^ rx as u64);
        h = splitmix64(h ^ tx as u64);
        h = splitmix64(h ^ subcarrier as u64);
        ChaCha8Rng::seed_from_u64(h)
    }

    /// Builds a set from explicit matrices. `channels[rx][tx][subcarrier]`.
    pub fn from_parts(channels: Vec<Vec<Vec<CMat>>>, gains: Vec<Vec<f64>>, noise_seed: u64) -> Result<Self> {
        let n_links = channels.len();
        if n_links == 0 || gains.len() != n_links {
            return Err(invalid("channel and gain tables must be non-empty and square"));
        }
        let n_subcarriers = channels[0].first().map_or(0, Vec::len);
        let n_antennas = channels[0].first().and_then(|v| v.first()).map_or(0, |m| m.nrows());
        if n_subcarriers == 0 || n_antennas == 0 {
            return Err(invalid("empty channel stack"));
        }
        let mut flat = Vec::with_capacity(n_links * n_links * n_subcarriers);
        for row in &channels {
            if row.len() != n_links {
                return Err(invalid("channel table must be K x K"));
            }
            for stack in row {
                if stack.len() != n_subcarriers {
                    return Err(invalid("every pair needs the same number of subcarriers"));
                }
                for m in stack {
                    if m.shape() != (n_antennas, n_antennas) || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
                    {
                        return Err(invalid("channel matrices must be finite N_A x N_A"));
                    }
                    flat.push(m.clone());
                }
            }
        }
        let mut flat_gains = Vec::with_capacity(n_links * n_links);
        for row in &gains {
            if row.len() != n_links {
                return Err(invalid("gain table must be K x K"));
            }
            for &g in row {
                if !(g > 0.0 && g <= 1.0) {
                    return Err(invalid(format!("path-loss gain {g} outside (0, 1]")));
                }
                flat_gains.push(g);
            }
        }
        Ok(Self {
            n_links,
            n_antennas,
            n_subcarriers,
            channels: flat,
            gains: flat_gains,
            noise_seed,
        })
    }
}

/// Draws every directed-pair channel of `topology` (K^2 pairs, each a stack of
/// N_C matrices of i.i.d. CN(0, 1) entries) and the matching path-loss gains.
/// The estimation-noise seed is drawn from `rng` after the channels.
pub fn generate_channels<R: Rng + ?Sized>(topology: &Topology, params: &SimParams, rng: &mut R) -> Result<ChannelSet> {
    params.validate()?;
    let k = topology.len();
    if k == 0 {
        return Err(invalid("topology has no links"));
    }
    let (na, nc) = (params.n_antennas, params.n_subcarriers);
    let mut channels = Vec::with_capacity(k * k * nc);
    let mut gains = Vec::with_capacity(k * k);
    for rx in 0..k {
        for tx in 0..k {
            let d = topology.links[tx].tx.distance(&topology.links[rx].rx);
            // Co-located nodes fall under the d0 clamp.
            gains.push(path_loss(d.max(f64::MIN_POSITIVE), params)?);
            for _ in 0..nc {
                channels.push(sample_cn_matrix(na, na, rng));
            }
        }
    }
    let noise_seed = rng.next_u64();
    Ok(ChannelSet {
        n_links: k,
        n_antennas: na,
        n_subcarriers: nc,
        channels,
        gains,
        noise_seed,
    })
}

/// Receiver-side noisy estimate of an effective channel:
/// `h_rec + sqrt(sigma_c2) z`, `z ~ CN(0, I)`. Zero variance returns the input
/// without consuming randomness.
pub fn noisy_effective_channel<R: Rng + ?Sized>(h_rec: &CVec, sigma_c2: f64, rng: &mut R) -> CVec {
    perturb(h_rec, sigma_c2, rng)
}

/// Transmitter-side noisy estimate of one interference column; same noise
/// model as [`noisy_effective_channel`] with an independent draw.
pub fn noisy_intf_column<R: Rng + ?Sized>(column: &CVec, sigma_c2: f64, rng: &mut R) -> CVec {
    perturb(column, sigma_c2, rng)
}

fn perturb<R: Rng + ?Sized>(v: &CVec, sigma_c2: f64, rng: &mut R) -> CVec {
    debug_assert!(sigma_c2 >= 0.0, "estimation noise variance must be non-negative");
    if sigma_c2 <= 0.0 {
        return v.clone();
    }
    let sd = sigma_c2.sqrt();
    let mut out = v.clone();
    for z in out.iter_mut() {
        *z += sample_cn(rng) * sd;
    }
    out
}

/// Noisy estimate of a full channel matrix expressed in the same unscaled
/// units as `h`. The absolute estimate is `sqrt(scale) h + sqrt(sigma_c2) Z`;
/// dividing by `sqrt(scale)` keeps the caller's path-loss bookkeeping intact.
pub fn noisy_channel_matrix<R: Rng + ?Sized>(h: &CMat, scale: f64, sigma_c2: f64, rng: &mut R) -> CMat {
    debug_assert!(sigma_c2 >= 0.0);
    if sigma_c2 <= 0.0 {
        return h.clone();
    }
    let sd = (sigma_c2 / scale).sqrt();
    h + sample_cn_matrix(h.nrows(), h.ncols(), rng) * c64(sd, 0.0)
}
