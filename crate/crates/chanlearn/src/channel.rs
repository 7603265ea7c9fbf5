//! Tapped-delay-line channel models for the mmWave and V2V scenarios.
//!
//! Each scenario maps to a fixed delay/power profile (plus a Rician K-factor
//! on the first tap for LoS links). A realization draws complex tap gains at
//! the 100 ns system sample period; payload transmissions redraw the channel
//! per payload (block fading) and add AWGN at a configured SNR.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::seed;

/// System sample period in nanoseconds (10 MHz bandwidth, 802.11p numerology).
pub const SAMPLE_PERIOD_NS: f64 = 100.0;

/// Maximum tap span in samples; equals the OFDM cyclic prefix length, so any
/// valid realization is fully absorbed by the prefix.
pub const MAX_TAP_SAMPLES: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("tap delay {delay_ns} ns quantizes to sample {sample}, beyond the {MAX_TAP_SAMPLES}-sample cyclic prefix")]
    DelayExceedsCyclicPrefix { delay_ns: f64, sample: usize },
    #[error("invalid tap profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("unknown scenario name `{0}`")]
    UnknownScenario(String),
}

/// The eleven channel scenarios: one mmWave link, five V2V delay profiles,
/// and the five decode-and-forward mmWave-V2V multi-hop combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    MmWave,
    V2vRuralLos,
    V2vUrbanLos,
    V2vUrbanNlos,
    V2vHighwayLos,
    V2vHighwayNlos,
    MmWaveV2vRuralLos,
    MmWaveV2vUrbanLos,
    MmWaveV2vUrbanNlos,
    MmWaveV2vHighwayLos,
    MmWaveV2vHighwayNlos,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::MmWave,
        Scenario::V2vRuralLos,
        Scenario::V2vUrbanLos,
        Scenario::V2vUrbanNlos,
        Scenario::V2vHighwayLos,
        Scenario::V2vHighwayNlos,
        Scenario::MmWaveV2vRuralLos,
        Scenario::MmWaveV2vUrbanLos,
        Scenario::MmWaveV2vUrbanNlos,
        Scenario::MmWaveV2vHighwayLos,
        Scenario::MmWaveV2vHighwayNlos,
    ];

    /// Stable string used in config files, report rows, and dataset footers.
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::MmWave => "mmwave",
            Scenario::V2vRuralLos => "v2v-rural-los",
            Scenario::V2vUrbanLos => "v2v-urban-los",
            Scenario::V2vUrbanNlos => "v2v-urban-nlos",
            Scenario::V2vHighwayLos => "v2v-highway-los",
            Scenario::V2vHighwayNlos => "v2v-highway-nlos",
            Scenario::MmWaveV2vRuralLos => "mmwave-v2v-rural-los",
            Scenario::MmWaveV2vUrbanLos => "mmwave-v2v-urban-los",
            Scenario::MmWaveV2vUrbanNlos => "mmwave-v2v-urban-nlos",
            Scenario::MmWaveV2vHighwayLos => "mmwave-v2v-highway-los",
            Scenario::MmWaveV2vHighwayNlos => "mmwave-v2v-highway-nlos",
        }
    }

    pub fn is_multihop(self) -> bool {
        matches!(
            self,
            Scenario::MmWaveV2vRuralLos
                | Scenario::MmWaveV2vUrbanLos
                | Scenario::MmWaveV2vUrbanNlos
                | Scenario::MmWaveV2vHighwayLos
                | Scenario::MmWaveV2vHighwayNlos
        )
    }

    /// Numeric id, stable across versions; used in dataset provenance records.
    pub fn id(self) -> u8 {
        Scenario::ALL.iter().position(|&s| s == self).unwrap() as u8
    }

    pub fn from_id(id: u8) -> Option<Scenario> {
        Scenario::ALL.get(id as usize).copied()
    }

    /// The delay profile(s) behind this scenario. Multi-hop scenarios expand
    /// to their constituent single-hop profiles.
    pub fn profile(self) -> ScenarioProfile {
        profile_for(self)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .iter()
            .copied()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| ChannelError::UnknownScenario(s.to_string()))
    }
}

/// A tapped-delay-line profile: mean tap powers at fixed delays, with an
/// optional Rician K-factor applied to the first (LoS) tap.
#[derive(Debug, Clone, PartialEq)]
pub struct TapProfile {
    /// Scenario label, e.g. `"v2v-rural-los"`.
    pub name: &'static str,
    /// Tap delays in nanoseconds; strictly increasing, first entry 0.
    pub tap_delays_ns: Vec<f64>,
    /// Mean tap powers in dB relative to the strongest tap.
    pub tap_powers_db: Vec<f64>,
    /// Rician K-factor in dB for the first tap; `None` for nLoS profiles.
    pub rician_k_db: Option<f64>,
}

fn profile(
    name: &'static str,
    delays: &[f64],
    powers: &[f64],
    k_db: Option<f64>,
) -> TapProfile {
    TapProfile {
        name,
        tap_delays_ns: delays.to_vec(),
        tap_powers_db: powers.to_vec(),
        rician_k_db: k_db,
    }
}

/// mmWave link profile: short delay spread, strong LoS.
pub fn mmwave_profile() -> TapProfile {
    profile("mmwave", &[0.0, 100.0, 200.0], &[0.0, -13.0, -16.0], Some(10.0))
}

fn v2v_profile(kind: Scenario) -> TapProfile {
    match kind {
        Scenario::V2vRuralLos => profile(
            "v2v-rural-los",
            &[0.0, 100.0, 200.0],
            &[0.0, -14.0, -17.0],
            Some(10.0),
        ),
        Scenario::V2vUrbanLos => profile(
            "v2v-urban-los",
            &[0.0, 100.0, 200.0, 300.0],
            &[0.0, -8.0, -10.0, -15.0],
            Some(7.0),
        ),
        Scenario::V2vUrbanNlos => profile(
            "v2v-urban-nlos",
            &[0.0, 100.0, 200.0, 300.0, 400.0, 500.0],
            &[0.0, -3.0, -4.0, -8.0, -10.0, -12.0],
            None,
        ),
        Scenario::V2vHighwayLos => profile(
            "v2v-highway-los",
            &[0.0, 100.0, 200.0, 500.0],
            &[0.0, -10.0, -15.0, -20.0],
            Some(10.0),
        ),
        Scenario::V2vHighwayNlos => profile(
            "v2v-highway-nlos",
            &[0.0, 100.0, 200.0, 300.0, 500.0, 700.0],
            &[0.0, -2.0, -5.0, -7.0, -10.0, -15.0],
            None,
        ),
        _ => unreachable!("not a V2V scenario"),
    }
}

/// The two hops of a decode-and-forward scenario.
///
/// Transmit order is vehicle → vehicle → base station: the V2V hop runs
/// first, the mmWave hop carries the (possibly corrupted) reconstruction on
/// to the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHopProfile {
    pub v2v: TapProfile,
    pub mmwave: TapProfile,
}

/// Either a single delay profile or the ordered pair behind a multi-hop id.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioProfile {
    SingleHop(TapProfile),
    MultiHop(MultiHopProfile),
}

/// Deterministic scenario → profile mapping. No randomness is involved; the
/// draw happens in [`TapProfile::realize`].
pub fn profile_for(scenario: Scenario) -> ScenarioProfile {
    match scenario {
        Scenario::MmWave => ScenarioProfile::SingleHop(mmwave_profile()),
        Scenario::V2vRuralLos
        | Scenario::V2vUrbanLos
        | Scenario::V2vUrbanNlos
        | Scenario::V2vHighwayLos
        | Scenario::V2vHighwayNlos => ScenarioProfile::SingleHop(v2v_profile(scenario)),
        Scenario::MmWaveV2vRuralLos => multihop(Scenario::V2vRuralLos),
        Scenario::MmWaveV2vUrbanLos => multihop(Scenario::V2vUrbanLos),
        Scenario::MmWaveV2vUrbanNlos => multihop(Scenario::V2vUrbanNlos),
        Scenario::MmWaveV2vHighwayLos => multihop(Scenario::V2vHighwayLos),
        Scenario::MmWaveV2vHighwayNlos => multihop(Scenario::V2vHighwayNlos),
    }
}

fn multihop(v2v: Scenario) -> ScenarioProfile {
    ScenarioProfile::MultiHop(MultiHopProfile {
        v2v: v2v_profile(v2v),
        mmwave: mmwave_profile(),
    })
}

impl TapProfile {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let fail = |reason: &str| {
            Err(ChannelError::InvalidProfile {
                name: self.name.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.tap_delays_ns.is_empty() {
            return fail("no taps");
        }
        if self.tap_delays_ns.len() != self.tap_powers_db.len() {
            return fail("delay/power length mismatch");
        }
        if self.tap_delays_ns[0] != 0.0 {
            return fail("first delay must be 0");
        }
        if self.tap_delays_ns.windows(2).any(|w| w[1] <= w[0]) {
            return fail("delays must be strictly increasing");
        }
        Ok(())
    }

    /// Linear tap powers normalized to sum to 1, so realizations have unit
    /// expected energy.
    pub fn normalized_linear_powers(&self) -> Vec<f64> {
        let linear: Vec<f64> = self.tap_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        linear.into_iter().map(|p| p / total).collect()
    }

    /// Draw one channel realization. Delays quantize to the nearest 100 ns
    /// sample; each tap is sqrt(power) times a unit-variance complex Gaussian,
    /// except that a Rician K-factor replaces part of the first tap with a
    /// deterministic specular component (the receiver is phase-referenced to
    /// the line-of-sight ray, so the specular phase is 0 and only the diffuse
    /// part is random). Same seed, same realization, bit for bit.
    pub fn realize(&self, rng_seed: u64) -> Result<ChannelRealization, ChannelError> {
        self.validate()?;
        let mut rng = seed::rng_from(rng_seed);
        self.realize_with(&mut rng, rng_seed)
    }

    /// Like [`TapProfile::realize`] but drawing from a caller-owned stream;
    /// `seed_trace` only labels the realization.
    pub fn realize_with(
        &self,
        rng: &mut ChaCha8Rng,
        seed_trace: u64,
    ) -> Result<ChannelRealization, ChannelError> {
        let powers = self.normalized_linear_powers();
        let mut sample_idx = Vec::with_capacity(powers.len());
        for &delay in &self.tap_delays_ns {
            let sample = (delay / SAMPLE_PERIOD_NS).round() as usize;
            if sample >= MAX_TAP_SAMPLES {
                return Err(ChannelError::DelayExceedsCyclicPrefix { delay_ns: delay, sample });
            }
            sample_idx.push(sample);
        }
        let len = sample_idx.last().unwrap() + 1;
        let mut taps = vec![Complex64::new(0.0, 0.0); len];
        for (i, (&at, &p)) in sample_idx.iter().zip(&powers).enumerate() {
            let amp = p.sqrt();
            let gain = match (i, self.rician_k_db) {
                (0, Some(k_db)) => {
                    let k = 10f64.powf(k_db / 10.0);
                    let los = Complex64::new((k / (k + 1.0)).sqrt(), 0.0);
                    los + complex_gaussian(rng) * (1.0 / (k + 1.0)).sqrt()
                }
                _ => complex_gaussian(rng),
            };
            taps[at] = gain * amp;
        }
        Ok(ChannelRealization { taps, scenario: self.name, seed_trace })
    }
}

/// Unit-variance circularly symmetric complex Gaussian: E[|g|^2] = 1.
fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// One sampled channel: complex taps at the 100 ns sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Dense tap vector; zeros where the profile has no path.
    pub taps: Vec<Complex64>,
    /// Label of the profile this was drawn from.
    pub scenario: &'static str,
    /// The RNG seed that produced this draw.
    pub seed_trace: u64,
}

impl ChannelRealization {
    /// A deterministic identity channel (single unit tap). Used to force a
    /// distortion-free link in tests and demos.
    pub fn identity() -> Self {
        ChannelRealization {
            taps: vec![Complex64::new(1.0, 0.0)],
            scenario: "identity",
            seed_trace: 0,
        }
    }

    /// Tap energy sum |h[t]|^2; 1 in expectation for profile draws.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }
}

/// Frequency response H[k] = sum_t h[t] exp(-j 2 pi k t / nfft) for
/// k = 0..nfft. Requires nfft >= tap count.
pub fn frequency_response(real: &ChannelRealization, nfft: usize) -> Vec<Complex64> {
    assert!(nfft >= real.taps.len(), "nfft {} < tap count {}", nfft, real.taps.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    buf[..real.taps.len()].copy_from_slice(&real.taps);
    rustfft::FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    buf
}

/// Linear convolution of `signal` with the channel taps; output length is
/// `signal.len() + taps.len() - 1`.
pub fn apply(real: &ChannelRealization, signal: &[Complex64]) -> Vec<Complex64> {
    assert!(!signal.is_empty(), "empty signal");
    let mut out = vec![Complex64::new(0.0, 0.0); signal.len() + real.taps.len() - 1];
    for (t, &tap) in real.taps.iter().enumerate() {
        if tap == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, &s) in out[t..t + signal.len()].iter_mut().zip(signal) {
            *o += tap * s;
        }
    }
    out
}

/// Add complex AWGN with per-sample variance sigma^2 = 10^(-snr_db/10),
/// i.e. SNR measured against unit symbol power.
pub fn awgn(signal: &[Complex64], snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    assert!(!signal.is_empty(), "empty signal");
    let sigma = 10f64.powf(-snr_db / 20.0);
    signal
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re, im) * (sigma * FRAC_1_SQRT_2)
        })
        .collect()
}

/// Noise variance implied by an SNR in dB; exposed for analytic checks.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
