//! OFDM transmit/receive chain.
//!
//! Payload values ride the subcarriers directly as analog I/Q pairs (no
//! digital constellation): pairs of reals become one complex symbol, the
//! inverse of the mapping runs at the receiver. The burst starts with two
//! identical full-band training symbols used for least-squares channel
//! estimation on the clean path; the corrupted path skips estimation and
//! only renormalizes received power.
//!
//! The SNR convention is Es = 1: noise variance is 10^(-snr/10) per time
//! sample, and because both transforms are orthonormal that is also the
//! per-subcarrier noise variance, so "15 dB" means 15 dB on every data
//! subcarrier. Unused guard bins make the raw time-domain signal power
//! 52/64 of that reference; this is deliberate.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::channel::{
    self, profile_for, ChannelError, ChannelRealization, Scenario, ScenarioProfile,
};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("payload is empty")]
    EmptyPayload,
    #[error("scale gain must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("grid holds {got} symbols but {expected} are required for the payload")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("burst truncated: {samples} samples is less than preamble plus one symbol")]
    TruncatedBurst { samples: usize },
    #[error("scenario `{scenario}` is {actual}; use {wanted}")]
    WrongHopKind { scenario: &'static str, actual: &'static str, wanted: &'static str },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// OFDM numerology: 64 subcarriers at 10 MHz with a 16-sample cyclic prefix,
/// 48 data + 4 pilot subcarriers (IEEE 802.11p layout).
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub nfft: usize,
    pub cp_len: usize,
    /// Data subcarrier bins in mapping order.
    pub data_subcarriers: Vec<usize>,
    /// Pilot bins; values in `pilot_values`, constant across symbols.
    pub pilot_subcarriers: Vec<usize>,
    pub pilot_values: Vec<Complex64>,
    /// The known training symbol: +-1 on every bin, so LS never divides by zero.
    pub preamble_freq: Vec<Complex64>,
    /// Number of identical training symbols at the head of each burst.
    pub n_preamble: usize,
    pub sample_period_ns: f64,
}

impl OfdmConfig {
    /// The 802.11p-style numerology used throughout: pilots at bins
    /// {7, 21, 43, 57}, data on the remaining occupied bins -26..26.
    pub fn ieee80211p() -> Self {
        let nfft = 64;
        let pilot_subcarriers = vec![7, 21, 43, 57];
        let pilot_values = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let occupied = (1..=26).chain(38..64);
        let data_subcarriers: Vec<usize> =
            occupied.filter(|k| !pilot_subcarriers.contains(k)).collect();

        // Fixed Rademacher training sequence; any full-band +-1 pattern works,
        // this one is frozen for reproducibility.
        let mut state = 0x243f_6a88_85a3_08d3u64;
        let preamble_freq = (0..nfft)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                if state & (1 << 32) != 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            })
            .collect();

        let cfg = OfdmConfig {
            nfft,
            cp_len: 16,
            data_subcarriers,
            pilot_subcarriers,
            pilot_values,
            preamble_freq,
            n_preamble: 2,
            sample_period_ns: channel::SAMPLE_PERIOD_NS,
        };
        debug_assert!(cfg.validate().is_ok());
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.data_subcarriers.len() != 48 || self.pilot_subcarriers.len() != 4 {
            return Err("expected 48 data and 4 pilot subcarriers".into());
        }
        if self.pilot_values.len() != self.pilot_subcarriers.len() {
            return Err("pilot value count mismatch".into());
        }
        if self.preamble_freq.len() != self.nfft {
            return Err("preamble must cover all bins".into());
        }
        for &k in self.data_subcarriers.iter().chain(&self.pilot_subcarriers) {
            if k >= self.nfft {
                return Err(format!("subcarrier {k} out of range"));
            }
        }
        if self.data_subcarriers.iter().any(|k| self.pilot_subcarriers.contains(k)) {
            return Err("data and pilot sets overlap".into());
        }
        if self.preamble_freq.iter().any(|p| (p.norm_sqr() - 1.0).abs() > 1e-12) {
            return Err("preamble bins must have unit power".into());
        }
        Ok(())
    }

    /// Samples per OFDM symbol including cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.nfft + self.cp_len
    }

    /// Payload values carried per OFDM symbol (two reals per complex symbol).
    pub fn values_per_symbol(&self) -> usize {
        2 * self.data_subcarriers.len()
    }
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig::ieee80211p()
    }
}

/// Affine value <-> symbol mapping: symbols = (value - offset) * gain, plus an
/// optional clamp applied to reconstructions (images clamp to [0,1],
/// spectrograms do not clamp).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueScale {
    pub offset: f64,
    pub gain: f64,
    pub clamp: Option<(f64, f64)>,
}

impl ValueScale {
    /// Mapping for [0,1] image pixels: zero-mean symbols in [-1,1], clamped
    /// reconstruction.
    pub fn image() -> Self {
        ValueScale { offset: 0.5, gain: 2.0, clamp: Some((0.0, 1.0)) }
    }

    /// Standardization by dataset statistics; reconstruction left unclamped.
    pub fn standardized(mean: f64, std: f64) -> Self {
        ValueScale { offset: mean, gain: 1.0 / std.max(1e-12), clamp: None }
    }

    fn apply_clamp(&self, values: &mut [f64]) {
        if let Some((lo, hi)) = self.clamp {
            for v in values {
                *v = v.clamp(lo, hi);
            }
        }
    }
}

/// One payload packed onto the data subcarriers: `n_symbols` rows of 48
/// complex values, normalized to unit mean power.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadFrame {
    /// Row-major n_symbols x 48 grid.
    pub grid: Vec<Complex64>,
    pub n_symbols: usize,
    /// Original real-value count before padding.
    pub n_values: usize,
    /// Zero padding appended to fill the last symbol, in value count.
    pub pad_count: usize,
    /// Power normalization applied on top of the affine gain; 1.0 when the
    /// grid was all zeros and normalization was skipped.
    pub norm_gain: f64,
}

/// Map payload values onto a frame: affine map, pairwise packing
/// (even index -> real part, odd -> imaginary), zero padding, then power
/// normalization to E[|symbol|^2] = 1 over the grid.
pub fn serialize_payload(
    values: &[f64],
    cfg: &OfdmConfig,
    scale: &ValueScale,
) -> Result<PayloadFrame, PhyError> {
    if values.is_empty() {
        return Err(PhyError::EmptyPayload);
    }
    if !(scale.gain > 0.0) || !scale.gain.is_finite() {
        return Err(PhyError::InvalidGain(scale.gain));
    }
    let per_sym = cfg.values_per_symbol();
    let n_symbols = values.len().div_ceil(per_sym);
    let padded = n_symbols * per_sym;
    let pad_count = padded - values.len();

    let at = |i: usize| -> f64 {
        if i < values.len() {
            (values[i] - scale.offset) * scale.gain
        } else {
            0.0
        }
    };
    let mut grid: Vec<Complex64> =
        (0..padded / 2).map(|p| Complex64::new(at(2 * p), at(2 * p + 1))).collect();

    let mean_power: f64 = grid.iter().map(|s| s.norm_sqr()).sum::<f64>() / grid.len() as f64;
    let norm_gain = if mean_power > 0.0 { 1.0 / mean_power.sqrt() } else { 1.0 };
    if norm_gain != 1.0 {
        for s in &mut grid {
            *s *= norm_gain;
        }
    }
    Ok(PayloadFrame { grid, n_symbols, n_values: values.len(), pad_count, norm_gain })
}

/// Invert [`serialize_payload`] on a received grid: unpack complex pairs,
/// drop padding, undo the affine map. Exact round trip on an undistorted grid.
pub fn deserialize_payload(
    grid: &[Complex64],
    cfg: &OfdmConfig,
    scale: &ValueScale,
    norm_gain: f64,
    n_values: usize,
) -> Result<Vec<f64>, PhyError> {
    let per_sym = cfg.values_per_symbol();
    let expected = n_values.div_ceil(per_sym);
    let got = grid.len() / cfg.data_subcarriers.len();
    if got != expected || grid.len() % cfg.data_subcarriers.len() != 0 {
        return Err(PhyError::DimensionMismatch { expected, got });
    }
    let inv = 1.0 / (scale.gain * norm_gain);
    Ok((0..n_values)
        .map(|i| {
            let c = grid[i / 2];
            let raw = if i % 2 == 0 { c.re } else { c.im };
            scale.offset + raw * inv
        })
        .collect())
}

/// Frame -> time-domain burst: two training symbols, then one OFDM symbol per
/// grid row (data + pilots on their bins, zeros elsewhere, orthonormal IDFT,
/// cyclic prefix prepended). Burst length is (2 + n_symbols) * 80 samples.
pub fn ofdm_modulate(frame: &PayloadFrame, cfg: &OfdmConfig) -> Vec<Complex64> {
    let ifft = FftPlanner::new().plan_fft_inverse(cfg.nfft);
    let inv_scale = 1.0 / (cfg.nfft as f64).sqrt();
    let mut out = Vec::with_capacity((cfg.n_preamble + frame.n_symbols) * cfg.symbol_len());
    let mut freq = vec![Complex64::new(0.0, 0.0); cfg.nfft];

    let push_symbol = |freq: &mut Vec<Complex64>, out: &mut Vec<Complex64>| {
        ifft.process(freq);
        for s in freq.iter_mut() {
            *s *= inv_scale;
        }
        out.extend_from_slice(&freq[cfg.nfft - cfg.cp_len..]);
        out.extend_from_slice(freq);
    };

    for _ in 0..cfg.n_preamble {
        freq.copy_from_slice(&cfg.preamble_freq);
        push_symbol(&mut freq, &mut out);
    }
    for row in frame.grid.chunks(cfg.data_subcarriers.len()) {
        freq.iter_mut().for_each(|f| *f = Complex64::new(0.0, 0.0));
        for (&bin, &sym) in cfg.data_subcarriers.iter().zip(row) {
            freq[bin] = sym;
        }
        for (&bin, &val) in cfg.pilot_subcarriers.iter().zip(&cfg.pilot_values) {
            freq[bin] = val;
        }
        push_symbol(&mut freq, &mut out);
    }
    out
}

/// Received preamble spectra and data grid recovered from a burst.
#[derive(Debug, Clone)]
pub struct DemodOutput {
    /// Full-band spectra of the received training symbols.
    pub preamble_rx: Vec<Vec<Complex64>>,
    /// Row-major n_symbols x 48 received data grid.
    pub data_grid: Vec<Complex64>,
    pub n_symbols: usize,
}

/// Time-domain burst -> spectra: drop the prefix of each 80-sample block,
/// orthonormal DFT, split off the training symbols. Any convolution tail
/// shorter than a block is discarded.
pub fn ofdm_demodulate(samples: &[Complex64], cfg: &OfdmConfig) -> Result<DemodOutput, PhyError> {
    let block = cfg.symbol_len();
    let n_blocks = samples.len() / block;
    if n_blocks < cfg.n_preamble + 1 {
        return Err(PhyError::TruncatedBurst { samples: samples.len() });
    }
    let fft = FftPlanner::new().plan_fft_forward(cfg.nfft);
    let scale = 1.0 / (cfg.nfft as f64).sqrt();
    let n_symbols = n_blocks - cfg.n_preamble;
    let mut preamble_rx = Vec::with_capacity(cfg.n_preamble);
    let mut data_grid = Vec::with_capacity(n_symbols * cfg.data_subcarriers.len());
    let mut freq = vec![Complex64::new(0.0, 0.0); cfg.nfft];

    for b in 0..n_blocks {
        let start = b * block + cfg.cp_len;
        freq.copy_from_slice(&samples[start..start + cfg.nfft]);
        fft.process(&mut freq);
        for f in freq.iter_mut() {
            *f *= scale;
        }
        if b < cfg.n_preamble {
            preamble_rx.push(freq.clone());
        } else {
            data_grid.extend(cfg.data_subcarriers.iter().map(|&bin| freq[bin]));
        }
    }
    Ok(DemodOutput { preamble_rx, data_grid, n_symbols })
}

/// Least-squares channel estimate from the received training symbols:
/// H[k] = mean(Y_i[k]) / X_p[k]. Averaging the two symbols halves the noise
/// variance; the training symbol has no zero bins, so the division is safe.
pub fn ls_estimate(preamble_rx: &[Vec<Complex64>], cfg: &OfdmConfig) -> Vec<Complex64> {
    assert!(!preamble_rx.is_empty());
    let n = preamble_rx.len() as f64;
    (0..cfg.nfft)
        .map(|k| {
            let sum: Complex64 = preamble_rx.iter().map(|y| y[k]).sum();
            sum / (n * cfg.preamble_freq[k])
        })
        .collect()
}

/// Threshold below which a subcarrier estimate counts as a deep fade.
pub const DEEP_FADE_EPS: f64 = 1e-6;

/// Zero-forcing equalization of the data grid in place. Subcarriers whose
/// estimate magnitude is below [`DEEP_FADE_EPS`] are zeroed instead of
/// divided; the return value counts them.
pub fn equalize(data_grid: &mut [Complex64], h_hat: &[Complex64], cfg: &OfdmConfig) -> usize {
    let n_data = cfg.data_subcarriers.len();
    let mut deep_fades = 0usize;
    for (j, &bin) in cfg.data_subcarriers.iter().enumerate() {
        let h = h_hat[bin];
        if h.norm() < DEEP_FADE_EPS {
            deep_fades += 1;
            for row in data_grid.chunks_mut(n_data) {
                row[j] = Complex64::new(0.0, 0.0);
            }
        } else {
            let inv = h.finv();
            for row in data_grid.chunks_mut(n_data) {
                row[j] *= inv;
            }
        }
    }
    deep_fades
}

/// The corrupted reception path: no estimation, just a global rescale of the
/// received grid to unit mean power so the classifier sees shape distortion
/// rather than an arbitrary channel gain.
pub fn normalize_rms(data_grid: &mut [Complex64]) {
    let mean_power: f64 =
        data_grid.iter().map(|s| s.norm_sqr()).sum::<f64>() / data_grid.len().max(1) as f64;
    if mean_power > 0.0 {
        let inv = 1.0 / mean_power.sqrt();
        for s in data_grid {
            *s *= inv;
        }
    }
}

/// How the receiver reconstructs the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceptionMode {
    /// LS estimate from the training symbols, then zero-forcing equalization.
    Clean,
    /// No channel estimation; power-normalized direct reconstruction.
    Corrupted,
}

impl ReceptionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReceptionMode::Clean => "clean",
            ReceptionMode::Corrupted => "corrupted",
        }
    }
}

impl std::str::FromStr for ReceptionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(ReceptionMode::Clean),
            "corrupted" => Ok(ReceptionMode::Corrupted),
            other => Err(format!("unknown reception mode `{other}`")),
        }
    }
}

/// Per-hop record kept alongside a reconstruction.
#[derive(Debug, Clone)]
pub struct HopRecord {
    pub scenario: &'static str,
    pub realization: ChannelRealization,
    pub deep_fades: usize,
}

/// Trace of every hop a payload traversed, in transmit order.
#[derive(Debug, Clone, Default)]
pub struct TxTrace {
    pub hops: Vec<HopRecord>,
}

/// One hop through a fixed channel realization: serialize, modulate, convolve,
/// add noise, demodulate, reconstruct per `mode`, deserialize, clamp.
///
/// This is the composition point for the multi-hop path and the hook tests use
/// to force specific channels.
pub fn transmit_through(
    values: &[f64],
    real: &ChannelRealization,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    noise_rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, HopRecord), PhyError> {
    let frame = serialize_payload(values, cfg, scale)?;
    let tx = ofdm_modulate(&frame, cfg);
    let faded = channel::apply(real, &tx);
    let rx = channel::awgn(&faded, snr_db, noise_rng);
    let mut demod = ofdm_demodulate(&rx, cfg)?;

    let deep_fades = match mode {
        ReceptionMode::Clean => {
            let h_hat = ls_estimate(&demod.preamble_rx, cfg);
            equalize(&mut demod.data_grid, &h_hat, cfg)
        }
        ReceptionMode::Corrupted => {
            normalize_rms(&mut demod.data_grid);
            0
        }
    };
    let mut out = deserialize_payload(&demod.data_grid, cfg, scale, frame.norm_gain, values.len())?;
    scale.apply_clamp(&mut out);
    Ok((out, HopRecord { scenario: real.scenario, realization: real.clone(), deep_fades }))
}

/// Single-hop transmission through a freshly drawn channel for `scenario`.
/// Channel and noise streams derive from `seed` independently, so clean and
/// corrupted receptions of the same seed see identical link conditions.
pub fn transmit_traced(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<(Vec<f64>, TxTrace), PhyError> {
    let ScenarioProfile::SingleHop(profile) = profile_for(scenario) else {
        return Err(PhyError::WrongHopKind {
            scenario: scenario.as_str(),
            actual: "multi-hop",
            wanted: "transmit_multihop",
        });
    };
    let real = profile.realize(seed::derive(tx_seed, &[0]))?;
    let mut noise_rng = seed::rng_from(seed::derive(tx_seed, &[1]));
    let (out, hop) = transmit_through(values, &real, mode, snr_db, scale, cfg, &mut noise_rng)?;
    Ok((out, TxTrace { hops: vec![hop] }))
}

/// See [`transmit_traced`].
pub fn transmit(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<Vec<f64>, PhyError> {
    transmit_traced(values, scenario, mode, snr_db, scale, cfg, tx_seed).map(|(v, _)| v)
}

/// Decode-and-forward relay: the payload crosses the V2V hop first, the
/// intermediate reconstruction is re-serialized and sent over the mmWave hop
/// to the base station. Both hops run at the same SNR and reception mode.
pub fn transmit_multihop_traced(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<(Vec<f64>, TxTrace), PhyError> {
    let ScenarioProfile::MultiHop(mh) = profile_for(scenario) else {
        return Err(PhyError::WrongHopKind {
            scenario: scenario.as_str(),
            actual: "single-hop",
            wanted: "transmit",
        });
    };
    let mut trace = TxTrace::default();

    let v2v = mh.v2v.realize(seed::derive(tx_seed, &[0]))?;
    let mut rng1 = seed::rng_from(seed::derive(tx_seed, &[1]));
    let (mid, hop1) = transmit_through(values, &v2v, mode, snr_db, scale, cfg, &mut rng1)?;
    trace.hops.push(hop1);

    let mmw = mh.mmwave.realize(seed::derive(tx_seed, &[2]))?;
    let mut rng2 = seed::rng_from(seed::derive(tx_seed, &[3]));
    let (out, hop2) = transmit_through(&mid, &mmw, mode, snr_db, scale, cfg, &mut rng2)?;
    trace.hops.push(hop2);

    Ok((out, trace))
}

/// See [`transmit_multihop_traced`].
pub fn transmit_multihop(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<Vec<f64>, PhyError> {
    transmit_multihop_traced(values, scenario, mode, snr_db, scale, cfg, tx_seed).map(|(v, _)| v)
}

/// Dispatch on the scenario kind: single-hop scenarios go through
/// [`transmit`], multi-hop ones through [`transmit_multihop`].
pub fn send(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<Vec<f64>, PhyError> {
    if scenario.is_multihop() {
        transmit_multihop(values, scenario, mode, snr_db, scale, cfg, tx_seed)
    } else {
        transmit(values, scenario, mode, snr_db, scale, cfg, tx_seed)
    }
}

/// Traced variant of [`send`].
pub fn send_traced(
    values: &[f64],
    scenario: Scenario,
    mode: ReceptionMode,
    snr_db: f64,
    scale: &ValueScale,
    cfg: &OfdmConfig,
    tx_seed: u64,
) -> Result<(Vec<f64>, TxTrace), PhyError> {
    if scenario.is_multihop() {
        transmit_multihop_traced(values, scenario, mode, snr_db, scale, cfg, tx_seed)
    } else {
        transmit_traced(values, scenario, mode, snr_db, scale, cfg, tx_seed)
    }
}
