//! Monte Carlo generator of time-tagged clicks for the two-pair storage
//! experiment.
//!
//! Each pump pulse creates a Poisson number of pairs at uniformly random
//! times inside the square pulse. Idlers go straight to their detectors.
//! Signals are either stored (re-emitted one storage time later),
//! transmitted (no delay) or lost. Detectors apply efficiency, Gaussian
//! jitter and non-paralyzable dead time.
//!
//! Randomness comes from ChaCha8 with one stream per block of
//! [`BLOCK_PULSES`] pulses, so blocks can be generated in parallel and the
//! output does not depend on the thread count. Dead time is applied in a
//! single pass over the merged, time-sorted arrivals.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{BellState, DensityMatrix, Outcome};
use crate::witness::{self, SettingsPair};

/// Pulses per RNG stream.
pub const BLOCK_PULSES: u64 = 1 << 16;

/// Jitter samples beyond this many sigmas are redrawn.
pub const JITTER_TRUNCATION: f64 = 5.0;

/// Stored two-fold rate the default pair rate is calibrated to, in Hz.
pub const TARGET_STORED_TWOFOLD_HZ: f64 = 200.0;

const PS_PER_NS: f64 = 1e3;
const PS_PER_S: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

fn config_err(field: &str, message: impl Into<String>) -> SimulationError {
    SimulationError::Config { field: field.to_string(), message: message.into() }
}

/// One of the four single-photon detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    #[serde(rename = "s+")]
    SignalPlus,
    #[serde(rename = "s-")]
    SignalMinus,
    #[serde(rename = "i+")]
    IdlerPlus,
    #[serde(rename = "i-")]
    IdlerMinus,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::SignalPlus, Detector::SignalMinus, Detector::IdlerPlus, Detector::IdlerMinus];

    pub fn signal(port: Outcome) -> Self {
        match port {
            Outcome::Plus => Detector::SignalPlus,
            Outcome::Minus => Detector::SignalMinus,
        }
    }

    pub fn idler(port: Outcome) -> Self {
        match port {
            Outcome::Plus => Detector::IdlerPlus,
            Outcome::Minus => Detector::IdlerMinus,
        }
    }

    pub fn is_signal(self) -> bool {
        matches!(self, Detector::SignalPlus | Detector::SignalMinus)
    }

    pub fn port(self) -> Outcome {
        match self {
            Detector::SignalPlus | Detector::IdlerPlus => Outcome::Plus,
            Detector::SignalMinus | Detector::IdlerMinus => Outcome::Minus,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Detector::SignalPlus => "s+",
            Detector::SignalMinus => "s-",
            Detector::IdlerPlus => "i+",
            Detector::IdlerMinus => "i-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Detector::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

/// Which way a signal photon went. Simulation truth; not visible to a real
/// time tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTag {
    Stored,
    Transmitted,
}

impl PathTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PathTag::Stored => "stored",
            PathTag::Transmitted => "transmitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dead_time_ns: f64,
    pub jitter_sigma_ps: f64,
}

impl DetectorSpec {
    /// Free-running silicon APD used on the signal side.
    pub fn signal_apd() -> Self {
        Self { efficiency: 0.40, dead_time_ns: 1000.0, jitter_sigma_ps: 400.0 }
    }

    /// Superconducting nanowire used on the idler side.
    pub fn idler_snspd() -> Self {
        Self { efficiency: 0.75, dead_time_ns: 100.0, jitter_sigma_ps: 300.0 }
    }

    pub fn ideal() -> Self {
        Self { efficiency: 1.0, dead_time_ns: 0.0, jitter_sigma_ps: 0.0 }
    }

    fn dead_time_ps(&self) -> i64 {
        (self.dead_time_ns * PS_PER_NS).round() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSet {
    pub signal_plus: DetectorSpec,
    pub signal_minus: DetectorSpec,
    pub idler_plus: DetectorSpec,
    pub idler_minus: DetectorSpec,
}

impl Default for DetectorSet {
    fn default() -> Self {
        Self {
            signal_plus: DetectorSpec::signal_apd(),
            signal_minus: DetectorSpec::signal_apd(),
            idler_plus: DetectorSpec::idler_snspd(),
            idler_minus: DetectorSpec::idler_snspd(),
        }
    }
}

impl DetectorSet {
    pub fn get(&self, d: Detector) -> &DetectorSpec {
        match d {
            Detector::SignalPlus => &self.signal_plus,
            Detector::SignalMinus => &self.signal_minus,
            Detector::IdlerPlus => &self.idler_plus,
            Detector::IdlerMinus => &self.idler_minus,
        }
    }

    pub fn all_ideal() -> Self {
        let d = DetectorSpec::ideal();
        Self { signal_plus: d, signal_minus: d, idler_plus: d, idler_minus: d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub pump_rep_rate_hz: f64,
    pub pulse_width_ns: f64,
    pub mean_pairs_per_pulse: f64,
    pub visibility: f64,
    /// Bell state the Werner pairs are built on.
    pub bell_state: BellState,
    /// Only used downstream as the scale of the minimum pair separation.
    pub coherence_time_ns: f64,
    pub memory_efficiency: f64,
    pub transmission_prob: f64,
    pub storage_time_ns: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
    pub detectors: DetectorSet,
    pub settings: SettingsPair,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut c = Self {
            pump_rep_rate_hz: 1e7,
            pulse_width_ns: 50.0,
            mean_pairs_per_pulse: 0.0,
            visibility: 0.912,
            bell_state: BellState::PsiPlus,
            coherence_time_ns: 1.9,
            memory_efficiency: 0.07,
            transmission_prob: 0.108,
            storage_time_ns: 50.0,
            duration_s: 1.0,
            rng_seed: 1,
            detectors: DetectorSet::default(),
            settings: SettingsPair::default(),
        };
        c.mean_pairs_per_pulse = calibrate_mean_pairs(&c, TARGET_STORED_TWOFOLD_HZ);
        c
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimulationError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, SimulationError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(config_err(name, format!("{v} is not a probability in [0, 1]")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(config_err(name, format!("{v} must be finite and non-negative")))
            }
        };
        if !(self.pump_rep_rate_hz.is_finite() && self.pump_rep_rate_hz > 0.0) {
            return Err(config_err("pump_rep_rate_hz", "must be positive"));
        }
        nonneg("pulse_width_ns", self.pulse_width_ns)?;
        nonneg("mean_pairs_per_pulse", self.mean_pairs_per_pulse)?;
        prob("visibility", self.visibility)?;
        nonneg("coherence_time_ns", self.coherence_time_ns)?;
        prob("memory_efficiency", self.memory_efficiency)?;
        prob("transmission_prob", self.transmission_prob)?;
        if self.memory_efficiency + self.transmission_prob > 1.0 + 1e-12 {
            return Err(config_err(
                "transmission_prob",
                format!(
                    "memory_efficiency + transmission_prob = {} exceeds 1",
                    self.memory_efficiency + self.transmission_prob
                ),
            ));
        }
        nonneg("storage_time_ns", self.storage_time_ns)?;
        nonneg("duration_s", self.duration_s)?;
        for d in Detector::ALL {
            let spec = self.detectors.get(d);
            let name = format!("detectors.{}", detector_field(d));
            prob(&format!("{name}.efficiency"), spec.efficiency)?;
            nonneg(&format!("{name}.dead_time_ns"), spec.dead_time_ns)?;
            nonneg(&format!("{name}.jitter_sigma_ps"), spec.jitter_sigma_ps)?;
        }
        let period_ns = 1e9 / self.pump_rep_rate_hz;
        if self.pulse_width_ns > period_ns {
            return Err(config_err(
                "pulse_width_ns",
                format!("{} ns exceeds the repetition period {period_ns} ns", self.pulse_width_ns),
            ));
        }
        let mut warnings = Vec::new();
        if self.pulse_width_ns > self.storage_time_ns {
            warnings.push(format!(
                "pulse_width_ns ({}) exceeds storage_time_ns ({}); pairs from one pulse may not overlap in the memory",
                self.pulse_width_ns, self.storage_time_ns
            ));
        }
        if !self.settings.is_default() {
            warnings.push("non-standard measurement settings".to_string());
        }
        Ok(warnings)
    }

    pub fn period_ps(&self) -> f64 {
        PS_PER_S / self.pump_rep_rate_hz
    }

    pub fn total_pulses(&self) -> u64 {
        (self.duration_s * self.pump_rep_rate_hz).round() as u64
    }

    pub fn pair_state(&self) -> DensityMatrix {
        crate::qstate::werner_state_of(self.bell_state, self.visibility).expect("visibility validated")
    }

    pub fn pulse_start_ps(&self, pulse_index: u64) -> i64 {
        (pulse_index as f64 * self.period_ps()).round() as i64
    }

    /// Setting pair active at a pulse: four equal consecutive segments in
    /// the order `00, 01, 10, 11`.
    pub fn setting_for_pulse(&self, pulse_index: u64) -> (u8, u8) {
        let total = self.total_pulses().max(1);
        let segment = ((pulse_index as u128 * 4) / total as u128).min(3) as u8;
        (segment / 2, segment % 2)
    }

    pub fn segments(&self) -> Vec<Segment> {
        let total = self.total_pulses();
        (0..4u64)
            .map(|s| {
                let first = s * total / 4;
                let end = (s + 1) * total / 4;
                Segment {
                    x: (s / 2) as u8,
                    y: (s % 2) as u8,
                    first_pulse: first,
                    end_pulse: end,
                    start_ps: self.pulse_start_ps(first),
                    end_ps: self.pulse_start_ps(end),
                }
            })
            .collect()
    }
}

fn detector_field(d: Detector) -> &'static str {
    match d {
        Detector::SignalPlus => "signal_plus",
        Detector::SignalMinus => "signal_minus",
        Detector::IdlerPlus => "idler_plus",
        Detector::IdlerMinus => "idler_minus",
    }
}

/// Expected stored two-fold rate (stored signal click in coincidence with
/// its idler), to first order in the pair number.
pub fn expected_stored_twofold_rate(config: &ExperimentConfig) -> f64 {
    let d = &config.detectors;
    let eta_s = 0.5 * (d.signal_plus.efficiency + d.signal_minus.efficiency);
    let eta_i = 0.5 * (d.idler_plus.efficiency + d.idler_minus.efficiency);
    config.pump_rep_rate_hz * config.mean_pairs_per_pulse * config.memory_efficiency * eta_s * eta_i
}

/// Mean pair number giving `target_hz` stored two-folds at first order.
pub fn calibrate_mean_pairs(config: &ExperimentConfig, target_hz: f64) -> f64 {
    let mut unit = config.clone();
    unit.mean_pairs_per_pulse = 1.0;
    let per_pair = expected_stored_twofold_rate(&unit);
    if per_pair > 0.0 {
        target_hz / per_pair
    } else {
        0.0
    }
}

/// A click as written to the event file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub time_ps: i64,
    pub detector: Detector,
    pub pulse_index: u64,
    pub setting_x: u8,
    pub setting_y: u8,
    pub path_tag: Option<PathTag>,
}

/// The pulses during which one setting pair was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub x: u8,
    pub y: u8,
    pub first_pulse: u64,
    pub end_pulse: u64,
    pub start_ps: i64,
    pub end_ps: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub config: ExperimentConfig,
    pub events: Vec<DetectionEvent>,
    pub segments: Vec<Segment>,
}

/// One pair: its creation time in ps after the start of its pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEmission {
    pub creation_offset_ps: f64,
}

fn emissions<R: Rng>(count: u64, config: &ExperimentConfig, rng: &mut R) -> Vec<PairEmission> {
    let width = config.pulse_width_ns * PS_PER_NS;
    (0..count)
        .map(|_| PairEmission { creation_offset_ps: rng.random::<f64>() * width })
        .collect()
}

/// Pairs created by one pulse. Every pair is in `config.pair_state()`.
pub fn generate_pairs<R: Rng>(config: &ExperimentConfig, _pulse_index: u64, rng: &mut R) -> Vec<PairEmission> {
    if config.mean_pairs_per_pulse <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(config.mean_pairs_per_pulse).expect("positive mean").sample(rng) as u64;
    emissions(n, config, rng)
}

/// Samples `(a, b)` with probability `Tr[(P_a(v_x) ⊗ P_b(w_y)) ρ]`.
pub fn measure_pair<R: Rng>(
    state: &DensityMatrix,
    x: usize,
    y: usize,
    settings: &SettingsPair,
    rng: &mut R,
) -> (Outcome, Outcome) {
    OutcomeSampler::new(state, settings).sample(x, y, rng)
}

/// Precomputed joint outcome distributions for the four setting pairs.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    cumulative: [[f64; 4]; 4],
}

const OUTCOME_ORDER: [(Outcome, Outcome); 4] = [
    (Outcome::Plus, Outcome::Plus),
    (Outcome::Plus, Outcome::Minus),
    (Outcome::Minus, Outcome::Plus),
    (Outcome::Minus, Outcome::Minus),
];

impl OutcomeSampler {
    pub fn new(state: &DensityMatrix, settings: &SettingsPair) -> Self {
        let mut cumulative = [[0.0; 4]; 4];
        for (xy, row) in cumulative.iter_mut().enumerate() {
            let p = witness::pair_probabilities(state, settings, xy / 2, xy % 2);
            let flat = [p[0][0], p[0][1], p[1][0], p[1][1]];
            let total: f64 = flat.iter().sum();
            debug_assert!((total - 1.0).abs() < 1e-12);
            let mut acc = 0.0;
            for (k, q) in flat.iter().enumerate() {
                acc += q.max(0.0) / total;
                row[k] = acc;
            }
            row[3] = 1.0;
        }
        Self { cumulative }
    }

    pub fn probabilities(&self, x: usize, y: usize) -> [f64; 4] {
        let c = self.cumulative[2 * x + y];
        [c[0], c[1] - c[0], c[2] - c[1], c[3] - c[2]]
    }

    pub fn sample<R: Rng>(&self, x: usize, y: usize, rng: &mut R) -> (Outcome, Outcome) {
        let u: f64 = rng.random();
        let row = &self.cumulative[2 * x + y];
        let k = row.iter().position(|&c| u < c).unwrap_or(3);
        OUTCOME_ORDER[k]
    }
}

/// Sends a signal photon created at `creation_ps` into the memory. Returns
/// the path and the time it leaves towards the analyzer, or `None` if lost.
pub fn route_signal<R: Rng>(creation_ps: f64, config: &ExperimentConfig, rng: &mut R) -> Option<(PathTag, f64)> {
    let u: f64 = rng.random();
    if u < config.memory_efficiency {
        Some((PathTag::Stored, creation_ps + config.storage_time_ns * PS_PER_NS))
    } else if u < config.memory_efficiency + config.transmission_prob {
        Some((PathTag::Transmitted, creation_ps))
    } else {
        None
    }
}

/// Efficiency and jitter of one detector. Returns the click time in ps.
pub fn detector_response<R: Rng>(arrival_ps: f64, spec: &DetectorSpec, rng: &mut R) -> Option<f64> {
    if rng.random::<f64>() >= spec.efficiency {
        return None;
    }
    Some(arrival_ps + truncated_jitter(spec.jitter_sigma_ps, rng))
}

fn truncated_jitter<R: Rng>(sigma: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    loop {
        let j: f64 = normal.sample(rng);
        if j.abs() <= JITTER_TRUNCATION * sigma {
            return j;
        }
    }
}

/// Last accepted click per detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelState {
    last_click_ps: Option<i64>,
}

impl ChannelState {
    /// Non-paralyzable dead time: a click is accepted if it is at least
    /// `dead_time_ps` after the previous accepted click. Only accepted clicks
    /// restart the dead time.
    pub fn accept(&mut self, time_ps: i64, dead_time_ps: i64) -> bool {
        match self.last_click_ps {
            Some(last) if time_ps - last < dead_time_ps => false,
            _ => {
                self.last_click_ps = Some(time_ps);
                true
            }
        }
    }
}

/// Full detector model for one photon: efficiency, jitter, dead time.
/// Arrivals on a channel must be presented in time order.
pub fn detect<R: Rng>(
    arrival_ps: f64,
    channel: Detector,
    config: &ExperimentConfig,
    state: &mut ChannelState,
    rng: &mut R,
) -> Option<i64> {
    let spec = config.detectors.get(channel);
    let t = detector_response(arrival_ps, spec, rng)?.round() as i64;
    state.accept(t, spec.dead_time_ps()).then_some(t)
}

fn zero_truncated_poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    // Inversion on P(n | n ≥ 1).
    let p0 = (-mean).exp();
    let u: f64 = rng.random::<f64>() * (1.0 - p0);
    let mut k = 1u64;
    let mut pk = p0 * mean;
    let mut acc = pk;
    while u > acc && k < 1000 {
        k += 1;
        pk *= mean / k as f64;
        acc += pk;
    }
    k
}

struct Context {
    config: ExperimentConfig,
    sampler: OutcomeSampler,
    margin_ps: i64,
    dead_time_ps: [i64; 4],
    total_pulses: u64,
}

/// Detector clicks of one block of pulses before dead time, sorted by time.
fn generate_block(ctx: &Context, block: u64) -> Vec<DetectionEvent> {
    let c = &ctx.config;
    let first = block * BLOCK_PULSES;
    let end = (first + BLOCK_PULSES).min(ctx.total_pulses);
    let mut out = Vec::new();
    if c.mean_pairs_per_pulse <= 0.0 || first >= end {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.rng_seed);
    rng.set_stream(block);
    let nonempty = -(-c.mean_pairs_per_pulse).exp_m1();
    let gaps = Geometric::new(nonempty).expect("probability in (0, 1]");
    let mut pulse = first;
    loop {
        let gap = gaps.sample(&mut rng);
        pulse = pulse.saturating_add(gap);
        if pulse >= end {
            break;
        }
        let n = zero_truncated_poisson(c.mean_pairs_per_pulse, &mut rng);
        let start = c.pulse_start_ps(pulse);
        let (x, y) = c.setting_for_pulse(pulse);
        for pair in emissions(n, c, &mut rng) {
            let (a, b) = ctx.sampler.sample(x as usize, y as usize, &mut rng);
            let t = pair.creation_offset_ps;
            let idler = Detector::idler(b);
            if let Some(click) = detector_response(t, c.detectors.get(idler), &mut rng) {
                out.push(DetectionEvent {
                    time_ps: start + click.round() as i64,
                    detector: idler,
                    pulse_index: pulse,
                    setting_x: x,
                    setting_y: y,
                    path_tag: None,
                });
            }
            if let Some((path, leave)) = route_signal(t, c, &mut rng) {
                let signal = Detector::signal(a);
                if let Some(click) = detector_response(leave, c.detectors.get(signal), &mut rng) {
                    out.push(DetectionEvent {
                        time_ps: start + click.round() as i64,
                        detector: signal,
                        pulse_index: pulse,
                        setting_x: x,
                        setting_y: y,
                        path_tag: Some(path),
                    });
                }
            }
        }
        pulse += 1;
    }
    out.sort_by_key(event_order);
    out
}

fn event_order(e: &DetectionEvent) -> (i64, Detector, u64) {
    (e.time_ps, e.detector, e.pulse_index)
}

/// Produces the event stream in time-ordered chunks without holding the
/// whole run in memory.
pub struct EventGenerator {
    ctx: Context,
    next_block: u64,
    total_blocks: u64,
    pending: Vec<DetectionEvent>,
    channels: [ChannelState; 4],
    batch: u64,
}

impl EventGenerator {
    pub fn new(config: &ExperimentConfig) -> Result<Self, SimulationError> {
        config.validate()?;
        let max_jitter = Detector::ALL
            .iter()
            .map(|&d| config.detectors.get(d).jitter_sigma_ps)
            .fold(0.0, f64::max);
        let total_pulses = config.total_pulses();
        let ctx = Context {
            config: config.clone(),
            sampler: OutcomeSampler::new(&config.pair_state(), &config.settings),
            margin_ps: (JITTER_TRUNCATION * max_jitter).ceil() as i64 + 1,
            dead_time_ps: Detector::ALL.map(|d| config.detectors.get(d).dead_time_ps()),
            total_pulses,
        };
        Ok(Self {
            ctx,
            next_block: 0,
            total_blocks: total_pulses.div_ceil(BLOCK_PULSES),
            pending: Vec::new(),
            channels: [ChannelState::default(); 4],
            batch: (rayon::current_num_threads() as u64 * 4).max(1),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.ctx.config
    }

    fn apply_dead_time(&mut self, events: impl IntoIterator<Item = DetectionEvent>) -> Vec<DetectionEvent> {
        events
            .into_iter()
            .filter(|e| {
                let k = e.detector.index();
                self.channels[k].accept(e.time_ps, self.ctx.dead_time_ps[k])
            })
            .collect()
    }
}

impl Iterator for EventGenerator {
    type Item = Vec<DetectionEvent>;

    fn next(&mut self) -> Option<Vec<DetectionEvent>> {
        if self.next_block >= self.total_blocks {
            if self.pending.is_empty() {
                return None;
            }
            let rest = std::mem::take(&mut self.pending);
            return Some(self.apply_dead_time(rest));
        }
        let stop = (self.next_block + self.batch).min(self.total_blocks);
        let ctx = &self.ctx;
        let blocks: Vec<Vec<DetectionEvent>> =
            (self.next_block..stop).into_par_iter().map(|b| generate_block(ctx, b)).collect();
        self.next_block = stop;
        for b in blocks {
            self.pending.extend(b);
        }
        self.pending.sort_by_key(event_order);
        let horizon = if stop >= self.total_blocks {
            i64::MAX
        } else {
            self.ctx.config.pulse_start_ps(stop * BLOCK_PULSES) - self.ctx.margin_ps
        };
        let split = self.pending.partition_point(|e| e.time_ps < horizon);
        let ready: Vec<DetectionEvent> = self.pending.drain(..split).collect();
        Some(self.apply_dead_time(ready))
    }
}

/// Runs the whole simulation in memory.
pub fn run(config: &ExperimentConfig) -> Result<EventStream, SimulationError> {
    let events = EventGenerator::new(config)?.flatten().collect();
    Ok(EventStream { config: config.clone(), events, segments: config.segments() })
}

pub const EVENT_CSV_HEADER: &str = "time_ps,detector,pulse_index,setting_x,setting_y,path_tag";

pub fn write_event<W: Write>(w: &mut W, e: &DetectionEvent) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{}",
        e.time_ps,
        e.detector.as_str(),
        e.pulse_index,
        e.setting_x,
        e.setting_y,
        e.path_tag.map_or("", PathTag::as_str)
    )
}

pub fn write_events_csv<'a, W: Write>(
    mut w: W,
    events: impl IntoIterator<Item = &'a DetectionEvent>,
) -> std::io::Result<()> {
    writeln!(w, "{EVENT_CSV_HEADER}")?;
    for e in events {
        write_event(&mut w, e)?;
    }
    w.flush()
}

fn parse_event(line: &str, line_no: usize) -> Result<DetectionEvent, SimulationError> {
    let err = |message: String| SimulationError::Parse { line: line_no, message };
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 6 {
        return Err(err(format!("expected 6 fields, found {}", f.len())));
    }
    let setting = |s: &str, name: &str| match s.trim() {
        "0" => Ok(0u8),
        "1" => Ok(1u8),
        other => Err(err(format!("{name} must be 0 or 1, found `{other}`"))),
    };
    Ok(DetectionEvent {
        time_ps: f[0].trim().parse().map_err(|_| err(format!("bad time_ps `{}`", f[0])))?,
        detector: Detector::parse(f[1].trim()).ok_or_else(|| err(format!("unknown detector `{}`", f[1])))?,
        pulse_index: f[2].trim().parse().map_err(|_| err(format!("bad pulse_index `{}`", f[2])))?,
        setting_x: setting(f[3], "setting_x")?,
        setting_y: setting(f[4], "setting_y")?,
        path_tag: match f[5].trim() {
            "" => None,
            "stored" => Some(PathTag::Stored),
            "transmitted" => Some(PathTag::Transmitted),
            other => return Err(err(format!("unknown path_tag `{other}`"))),
        },
    })
}

/// Streams events from CSV, checking the header and time order.
pub struct EventReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    last_time: Option<i64>,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(reader: R) -> Result<Self, SimulationError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != EVENT_CSV_HEADER {
            return Err(SimulationError::Parse {
                line: 1,
                message: format!("expected header `{EVENT_CSV_HEADER}`"),
            });
        }
        Ok(Self { lines, line_no: 1, last_time: None })
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<DetectionEvent, SimulationError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let event = parse_event(&line, self.line_no);
            if let Ok(e) = &event {
                if self.last_time.is_some_and(|t| e.time_ps < t) {
                    return Some(Err(SimulationError::Parse {
                        line: self.line_no,
                        message: "events are not sorted by time".into(),
                    }));
                }
                self.last_time = Some(e.time_ps);
            }
            return Some(event);
        }
    }
}

pub fn read_events_csv<R: BufRead>(reader: R) -> Result<Vec<DetectionEvent>, SimulationError> {
    EventReader::new(reader)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig { mean_pairs_per_pulse: 0.05, duration_s: 0.002, ..ExperimentConfig::default() }
    }

    #[test]
    fn default_config_is_calibrated() {
        let c = ExperimentConfig::default();
        assert!(c.validate().unwrap().is_empty());
        assert!((expected_stored_twofold_rate(&c) - 200.0).abs() < 1e-9);
        assert!((c.mean_pairs_per_pulse - 200.0 / (1e7 * 0.07 * 0.4 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let c = small_config();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let err = ExperimentConfig::from_toml("memory_efficiency = 1.5").unwrap_err();
        assert!(err.to_string().contains("memory_efficiency"));
        let err = ExperimentConfig::from_toml("memory_efficiency = 0.6\ntransmission_prob = 0.6").unwrap_err();
        assert!(err.to_string().contains("transmission_prob"));
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[settings]\nalice = [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]").is_err());
    }

    #[test]
    fn zero_mean_is_always_empty() {
        let c = ExperimentConfig { mean_pairs_per_pulse: 0.0, ..ExperimentConfig::default() };
        let mut r = rng();
        assert!((0..1000).all(|k| generate_pairs(&c, k, &mut r).is_empty()));
    }

    #[test]
    fn pair_count_is_poisson() {
        let c = ExperimentConfig { mean_pairs_per_pulse: 0.3, ..ExperimentConfig::default() };
        let mut r = rng();
        let n = 1_000_000;
        let total: usize = (0..n).map(|k| generate_pairs(&c, k, &mut r).len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 0.3).abs() < 3.0 * (0.3 / n as f64).sqrt());
    }

    #[test]
    fn zero_truncated_sampler_matches_conditional_mean() {
        let mut r = rng();
        let mu: f64 = 0.8;
        let n = 200_000;
        let mean = (0..n).map(|_| zero_truncated_poisson(mu, &mut r) as f64).sum::<f64>() / n as f64;
        let expected = mu / (1.0 - (-mu).exp());
        assert!((mean - expected).abs() < 0.01);
    }

    #[test]
    fn two_pair_delay_is_triangular() {
        let c = ExperimentConfig::default();
        let mut r = rng();
        let mut bins = [0u64; 5];
        for _ in 0..100_000 {
            let p = emissions(2, &c, &mut r);
            let d = (p[0].creation_offset_ps - p[1].creation_offset_ps).abs();
            bins[(d / 10_000.0) as usize] += 1;
        }
        // density ∝ (50 - δt): bin k holds (9 - 2k)/25 of the mass
        for (k, &b) in bins.iter().enumerate() {
            let expected = 100_000.0 * (9.0 - 2.0 * k as f64) / 25.0;
            assert!((b as f64 - expected).abs() < 5.0 * expected.sqrt(), "bin {k}: {b} vs {expected}");
        }
    }

    #[test]
    fn bell_pair_correlator() {
        let c = ExperimentConfig::default();
        let state = crate::qstate::werner_state_of(BellState::PsiPlus, 1.0).unwrap();
        let sampler = OutcomeSampler::new(&state, &c.settings);
        let p = sampler.probabilities(0, 0);
        assert!((p[0] - (1.0 + FRAC_1_SQRT_2) / 4.0).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut r = rng();
        let n = 1_000_000;
        let e: f64 = (0..n)
            .map(|_| {
                let (a, b) = sampler.sample(0, 0, &mut r);
                a.sign() * b.sign()
            })
            .sum::<f64>()
            / n as f64;
        let se = ((1.0 - 0.5) / n as f64).sqrt();
        assert!((e - FRAC_1_SQRT_2).abs() < 3.0 * se);
    }

    #[test]
    fn maximally_mixed_outcomes_are_uniform() {
        let c = ExperimentConfig::default();
        let mixed = crate::qstate::werner_state_of(BellState::PsiPlus, 0.0).unwrap();
        let p = OutcomeSampler::new(&mixed, &c.settings).probabilities(1, 1);
        assert!(p.iter().all(|q| (q - 0.25).abs() < 1e-12));
        let mut r = rng();
        let _ = measure_pair(&mixed, 1, 0, &c.settings, &mut r);
    }

    #[test]
    fn sampled_chsh_matches_visibility() {
        let c = ExperimentConfig::default();
        let sampler = OutcomeSampler::new(&c.pair_state(), &c.settings);
        let mut r = rng();
        let n = 200_000;
        let mut s = 0.0;
        for xy in 0..4 {
            let e: f64 = (0..n)
                .map(|_| {
                    let (a, b) = sampler.sample(xy / 2, xy % 2, &mut r);
                    a.sign() * b.sign()
                })
                .sum::<f64>()
                / n as f64;
            s += witness::SIGNS[xy] * e;
        }
        assert!((s - 2.579).abs() < 0.02, "{s}");
    }

    #[test]
    fn routing_probabilities() {
        let mut r = rng();
        let always = ExperimentConfig { memory_efficiency: 1.0, transmission_prob: 0.0, ..ExperimentConfig::default() };
        assert_eq!(route_signal(10.0, &always, &mut r), Some((PathTag::Stored, 50_010.0)));
        let never = ExperimentConfig { memory_efficiency: 0.0, transmission_prob: 0.0, ..ExperimentConfig::default() };
        assert!((0..1000).all(|_| route_signal(0.0, &never, &mut r).is_none()));
        let c = ExperimentConfig::default();
        let n = 1_000_000;
        let stored = (0..n).filter(|_| matches!(route_signal(0.0, &c, &mut r), Some((PathTag::Stored, _)))).count();
        let f = stored as f64 / n as f64;
        assert!((f - 0.07).abs() < 3.0 * (0.07 * 0.93 / n as f64).sqrt());
    }

    #[test]
    fn dead_time_behaviour() {
        let mut c = ExperimentConfig::default();
        c.detectors.signal_plus = DetectorSpec { efficiency: 1.0, dead_time_ns: 1000.0, jitter_sigma_ps: 0.0 };
        c.detectors.signal_minus = c.detectors.signal_plus;
        let mut r = rng();
        let mut plus = ChannelState::default();
        let mut minus = ChannelState::default();
        assert_eq!(detect(0.0, Detector::SignalPlus, &c, &mut plus, &mut r), Some(0));
        assert_eq!(detect(10_000.0, Detector::SignalPlus, &c, &mut plus, &mut r), None);
        assert_eq!(detect(10_000.0, Detector::SignalMinus, &c, &mut minus, &mut r), Some(10_000));
        // non-paralyzable: the suppressed arrival did not extend the dead time
        assert_eq!(detect(1_000_000.0, Detector::SignalPlus, &c, &mut plus, &mut r), Some(1_000_000));
        c.detectors.idler_plus.efficiency = 0.0;
        let mut s = ChannelState::default();
        assert!((0..100).all(|k| detect(k as f64 * 1e7, Detector::IdlerPlus, &c, &mut s, &mut r).is_none()));
    }

    #[test]
    fn empty_duration_gives_empty_stream() {
        let c = ExperimentConfig { duration_s: 0.0, ..ExperimentConfig::default() };
        let s = run(&c).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn run_is_deterministic_and_respects_dead_time() {
        let c = small_config();
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
        assert!(!a.events.is_empty());
        assert!(a.events.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
        let mut last = [None::<i64>; 4];
        for e in &a.events {
            let k = e.detector.index();
            if let Some(prev) = last[k] {
                let dt = (c.detectors.get(e.detector).dead_time_ns * 1e3) as i64;
                assert!(e.time_ps - prev >= dt);
            }
            last[k] = Some(e.time_ps);
        }
        // every event lies in exactly the segment of its pulse
        for e in &a.events {
            let seg: Vec<_> = a
                .segments
                .iter()
                .filter(|s| (s.first_pulse..s.end_pulse).contains(&e.pulse_index))
                .collect();
            assert_eq!(seg.len(), 1);
            assert_eq!((seg[0].x, seg[0].y), (e.setting_x, e.setting_y));
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = small_config();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&c).unwrap());
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&c).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn jitter_free_storage_delay_is_exact() {
        let mut c = small_config();
        c.detectors = DetectorSet::all_ideal();
        c.transmission_prob = 0.0;
        c.memory_efficiency = 1.0;
        c.mean_pairs_per_pulse = 0.01;
        let s = run(&c).unwrap();
        let mut idlers = std::collections::HashMap::new();
        for e in s.events.iter().filter(|e| !e.detector.is_signal()) {
            idlers.entry(e.pulse_index).or_insert(Vec::new()).push(e.time_ps);
        }
        let mut checked = 0;
        for e in s.events.iter().filter(|e| e.detector.is_signal()) {
            let ids = &idlers[&e.pulse_index];
            if ids.len() == 1 {
                assert_eq!(e.time_ps - ids[0], 50_000);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn csv_round_trip() {
        let s = run(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &s.events).unwrap();
        let back = read_events_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s.events);
        let bad = format!("{EVENT_CSV_HEADER}\n1,s+,0,0,0,stored\n2,x+,0,0,0,\n");
        match read_events_csv(bad.as_bytes()) {
            Err(SimulationError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let unsorted = format!("{EVENT_CSV_HEADER}\n5,s+,0,0,0,stored\n2,i+,0,0,0,\n");
        assert!(read_events_csv(unsorted.as_bytes()).is_err());
    }
}
