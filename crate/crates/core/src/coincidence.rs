//! Reduction of time-tagged clicks to two-fold histograms and four-fold
//! events.
//!
//! The analyzer sees only what a time tagger would record: click times,
//! detector ports and the setting schedule. Simulation path tags are never
//! read here; they are only used by tests to score the classifier.
//!
//! A four-fold starts from two idler clicks on opposite ports. Every way of
//! attaching one `s+` and one `s-` click to the two idlers is tried, and a
//! leg is accepted if its signal-idler offset is close to zero (transmitted)
//! or to the storage time (stored). A four-fold is kept only when exactly
//! one attachment works.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::Outcome;
use crate::simulate::{DetectionEvent, Detector};
use crate::witness::CountTable;

const PS_PER_NS: f64 = 1e3;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("event at {time_ps} ps arrives before the previous event at {previous_ps} ps")]
    OutOfOrder { time_ps: i64, previous_ps: i64 },
    #[error("invalid analysis setting `{field}`: {message}")]
    Config { field: &'static str, message: String },
}

/// Fixed-width histogram with left-closed, right-open bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ps: i64,
    pub origin_ps: i64,
    pub counts: Vec<u64>,
    pub label: String,
}

impl Histogram {
    /// Bins `[origin, origin + width), ...` covering `[origin, end)`.
    pub fn spanning(origin_ps: i64, end_ps: i64, bin_width_ps: i64, label: impl Into<String>) -> Self {
        assert!(bin_width_ps > 0, "bin width must be positive");
        let n = ((end_ps - origin_ps).max(0) as u64).div_ceil(bin_width_ps as u64) as usize;
        Self { bin_width_ps, origin_ps, counts: vec![0; n], label: label.into() }
    }

    pub fn bin_of(&self, value_ps: i64) -> Option<usize> {
        if value_ps < self.origin_ps {
            return None;
        }
        let k = ((value_ps - self.origin_ps) / self.bin_width_ps) as usize;
        (k < self.counts.len()).then_some(k)
    }

    /// Adds a value; returns false if it falls outside every bin.
    pub fn add(&mut self, value_ps: i64) -> bool {
        match self.bin_of(value_ps) {
            Some(k) => {
                self.counts[k] += 1;
                true
            }
            None => false,
        }
    }

    pub fn bin_start(&self, k: usize) -> i64 {
        self.origin_ps + k as i64 * self.bin_width_ps
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum of the bins whose start lies in `[lo, hi)`.
    pub fn sum_between(&self, lo_ps: i64, hi_ps: i64) -> u64 {
        (0..self.counts.len())
            .filter(|&k| (lo_ps..hi_ps).contains(&self.bin_start(k)))
            .map(|k| self.counts[k])
            .sum()
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Index of the fullest bin in `[lo, hi)`; first one wins ties.
    pub fn peak_between(&self, lo_ps: i64, hi_ps: i64) -> Option<usize> {
        (0..self.counts.len())
            .filter(|&k| (lo_ps..hi_ps).contains(&self.bin_start(k)) && self.counts[k] > 0)
            .max_by(|&i, &j| self.counts[i].cmp(&self.counts[j]).then(j.cmp(&i)))
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(
            (self.bin_width_ps, self.origin_ps, self.counts.len()),
            (other.bin_width_ps, other.origin_ps, other.counts.len()),
            "histogram layouts differ"
        );
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_ps,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.bin_start(k), c));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Counts fall with the bin index up to Poisson noise and the
    /// least-squares slope is negative.
    pub fn is_decreasing_envelope(&self) -> bool {
        let c: Vec<f64> = self.counts.iter().map(|&x| x as f64).collect();
        if c.len() < 2 {
            return true;
        }
        let noisy_steps_ok = c.windows(2).all(|w| w[1] <= w[0] + 2.0 * (w[0] + w[1]).sqrt());
        let n = c.len() as f64;
        let mean_k = (n - 1.0) / 2.0;
        let mean_c = c.iter().sum::<f64>() / n;
        let slope: f64 = c.iter().enumerate().map(|(k, v)| (k as f64 - mean_k) * (v - mean_c)).sum();
        noisy_steps_ok && slope < 0.0
    }
}

/// Which way each signal went, earlier pair first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathClass {
    StoredStored,
    StoredTransmitted,
    TransmittedStored,
    TransmittedTransmitted,
}

impl PathClass {
    pub const ALL: [PathClass; 4] = [
        PathClass::StoredStored,
        PathClass::StoredTransmitted,
        PathClass::TransmittedStored,
        PathClass::TransmittedTransmitted,
    ];

    pub fn from_legs(first_stored: bool, second_stored: bool) -> Self {
        match (first_stored, second_stored) {
            (true, true) => PathClass::StoredStored,
            (true, false) => PathClass::StoredTransmitted,
            (false, true) => PathClass::TransmittedStored,
            (false, false) => PathClass::TransmittedTransmitted,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PathClass::StoredStored => "stored_stored",
            PathClass::StoredTransmitted => "stored_transmitted",
            PathClass::TransmittedStored => "transmitted_stored",
            PathClass::TransmittedTransmitted => "transmitted_transmitted",
        }
    }
}

/// Labels one signal-idler offset as stored (`Some(true)`), transmitted
/// (`Some(false)`) or neither.
pub fn classify_leg(offset_ps: i64, storage_ps: i64, window_ps: i64) -> Option<bool> {
    let half = window_ps / 2;
    let transmitted = offset_ps.abs() <= half;
    let stored = (offset_ps - storage_ps).abs() <= half;
    match (stored, transmitted) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

/// Two detected pairs with complementary patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourFold {
    /// Signal clicks, earlier pair first.
    pub signals: [DetectionEvent; 2],
    /// Idler clicks, earlier pair first.
    pub idlers: [DetectionEvent; 2],
    /// Pattern of the earlier pair; the later pair has `(-a, -b)`.
    pub a: Outcome,
    pub b: Outcome,
    pub delay_ps: i64,
    pub class: PathClass,
    pub x: u8,
    pub y: u8,
}

impl FourFold {
    /// `(a, b, ā, b̄)` read from the detector ports.
    pub fn pattern(&self) -> [Outcome; 4] {
        [self.signals[0].detector.port(), self.idlers[0].detector.port(), self.signals[1].detector.port(), self.idlers[1].detector.port()]
    }

    pub fn leg_offsets(&self) -> [i64; 2] {
        [self.signals[0].time_ps - self.idlers[0].time_ps, self.signals[1].time_ps - self.idlers[1].time_ps]
    }

    pub fn delay_ns(&self) -> f64 {
        self.delay_ps as f64 / PS_PER_NS
    }
}

/// Re-derives the class of a four-fold from its leg offsets.
pub fn classify_fourfold(f: &FourFold, storage_ps: i64, window_ps: i64) -> Option<PathClass> {
    let [o1, o2] = f.leg_offsets();
    Some(PathClass::from_legs(classify_leg(o1, storage_ps, window_ps)?, classify_leg(o2, storage_ps, window_ps)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Full width of the signal-idler acceptance for four-folds.
    pub fourfold_window_ns: f64,
    /// Full width of the two-fold rate window around each peak.
    pub twofold_window_ns: f64,
    pub min_delay_ns: f64,
    pub max_delay_ns: f64,
    /// Four-folds up to this pair delay are kept for the extended histogram.
    pub extended_max_delay_ns: f64,
    pub storage_time_ns: f64,
    pub twofold_span_start_ns: f64,
    pub twofold_span_end_ns: f64,
    pub twofold_bin_ns: f64,
    pub delay_bin_ns: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fourfold_window_ns: 5.0,
            twofold_window_ns: 4.0,
            min_delay_ns: 5.0,
            max_delay_ns: 50.0,
            extended_max_delay_ns: 100.0,
            storage_time_ns: 50.0,
            twofold_span_start_ns: -25.0,
            twofold_span_end_ns: 75.0,
            twofold_bin_ns: 0.5,
            delay_bin_ns: 5.0,
        }
    }
}

fn ps(ns: f64) -> i64 {
    (ns * PS_PER_NS).round() as i64
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(AnalysisError::Config { field, message: format!("{v} must be positive") })
            }
        };
        positive("fourfold_window_ns", self.fourfold_window_ns)?;
        positive("twofold_window_ns", self.twofold_window_ns)?;
        positive("twofold_bin_ns", self.twofold_bin_ns)?;
        positive("delay_bin_ns", self.delay_bin_ns)?;
        if !(self.min_delay_ns >= 0.0 && self.min_delay_ns <= self.max_delay_ns) {
            return Err(AnalysisError::Config {
                field: "min_delay_ns",
                message: format!("need 0 <= min_delay_ns ({}) <= max_delay_ns ({})", self.min_delay_ns, self.max_delay_ns),
            });
        }
        if self.extended_max_delay_ns < self.max_delay_ns {
            return Err(AnalysisError::Config {
                field: "extended_max_delay_ns",
                message: "must not be below max_delay_ns".into(),
            });
        }
        if !(self.storage_time_ns.is_finite() && self.storage_time_ns >= 0.0) {
            return Err(AnalysisError::Config { field: "storage_time_ns", message: "must be non-negative".into() });
        }
        if self.twofold_span_end_ns <= self.twofold_span_start_ns {
            return Err(AnalysisError::Config { field: "twofold_span_end_ns", message: "span is empty".into() });
        }
        Ok(())
    }

    /// Whether `delay_ps` lies in the certification range `[min, max]`.
    pub fn in_certification_range(&self, delay_ps: i64) -> bool {
        (ps(self.min_delay_ns)..=ps(self.max_delay_ns)).contains(&delay_ps)
    }
}

/// Events that could not be turned into a four-fold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// More than one consistent signal-idler assignment.
    pub dropped_ambiguous: u64,
    /// Signal clicks on both ports but no consistent assignment.
    pub unclassifiable: u64,
}

/// Everything the streaming analyzer extracts from one pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub config: AnalysisConfig,
    pub event_count: u64,
    pub first_time_ps: Option<i64>,
    pub last_time_ps: Option<i64>,
    /// `t_signal - t_idler` over all signal and idler detectors.
    pub twofold: Histogram,
    /// Two-folds within the two-fold window around zero delay.
    pub transmitted_twofolds: u64,
    /// Two-folds within the two-fold window around the storage time.
    pub stored_twofolds: u64,
    /// All four-folds up to the extended maximum delay.
    pub fourfolds: Vec<FourFold>,
    pub diagnostics: Diagnostics,
}

impl Analysis {
    pub fn span_s(&self) -> f64 {
        match (self.first_time_ps, self.last_time_ps) {
            (Some(a), Some(b)) => (b - a) as f64 / 1e12,
            _ => 0.0,
        }
    }

    /// Four-folds inside `[min_delay, max_delay]`.
    pub fn certification_fourfolds(&self) -> Vec<FourFold> {
        self.fourfolds.iter().filter(|f| self.config.in_certification_range(f.delay_ps)).copied().collect()
    }

    pub fn count_table(&self, class: PathClass) -> CountTable {
        count_table(&self.certification_fourfolds(), class)
    }

    pub fn delay_histogram(&self, class: PathClass) -> Histogram {
        let fs: Vec<FourFold> = self.fourfolds.iter().filter(|f| f.class == class).copied().collect();
        fourfold_delay_histogram(&fs, self.config.delay_bin_ns, self.config.extended_max_delay_ns)
    }

    /// Stored-stored delays over `[min_delay, max_delay)` in delay bins
    /// anchored at the lower cut.
    pub fn capacity_histogram(&self) -> Histogram {
        let c = &self.config;
        let mut h = Histogram::spanning(ps(c.min_delay_ns), ps(c.max_delay_ns), ps(c.delay_bin_ns), "pair_delay_stored");
        for f in self.fourfolds.iter().filter(|f| f.class == PathClass::StoredStored) {
            h.add(f.delay_ps);
        }
        h
    }
}

#[derive(Debug, Clone, Copy)]
struct PendingPair {
    first: DetectionEvent,
    second: DetectionEvent,
}

/// Single forward pass over a time-ordered event stream.
#[derive(Debug)]
pub struct Analyzer {
    config: AnalysisConfig,
    window_ps: i64,
    storage_ps: i64,
    extended_ps: i64,
    span: (i64, i64),
    twofold_half_ps: i64,
    signals: VecDeque<DetectionEvent>,
    idlers: VecDeque<DetectionEvent>,
    pending: VecDeque<PendingPair>,
    twofold: Histogram,
    transmitted_twofolds: u64,
    stored_twofolds: u64,
    fourfolds: Vec<FourFold>,
    diagnostics: Diagnostics,
    event_count: u64,
    first_time: Option<i64>,
    last_time: Option<i64>,
}

impl Analyzer {
    pub fn new(config: AnalysisConfig) -> Result<Self, AnalysisError> {
        config.validate()?;
        let span = (ps(config.twofold_span_start_ns), ps(config.twofold_span_end_ns));
        Ok(Self {
            window_ps: ps(config.fourfold_window_ns),
            storage_ps: ps(config.storage_time_ns),
            extended_ps: ps(config.extended_max_delay_ns),
            twofold_half_ps: ps(config.twofold_window_ns) / 2,
            twofold: Histogram::spanning(span.0, span.1, ps(config.twofold_bin_ns), "signal_minus_idler"),
            span,
            config,
            signals: VecDeque::new(),
            idlers: VecDeque::new(),
            pending: VecDeque::new(),
            transmitted_twofolds: 0,
            stored_twofolds: 0,
            fourfolds: Vec::new(),
            diagnostics: Diagnostics::default(),
            event_count: 0,
            first_time: None,
            last_time: None,
        })
    }

    fn record_twofold(&mut self, delay: i64) {
        if delay >= self.span.0 && delay < self.span.1 {
            self.twofold.add(delay);
        }
        if delay.abs() <= self.twofold_half_ps {
            self.transmitted_twofolds += 1;
        }
        if (delay - self.storage_ps).abs() <= self.twofold_half_ps {
            self.stored_twofolds += 1;
        }
    }

    pub fn push(&mut self, e: DetectionEvent) -> Result<(), AnalysisError> {
        let t = e.time_ps;
        if let Some(prev) = self.last_time {
            if t < prev {
                return Err(AnalysisError::OutOfOrder { time_ps: t, previous_ps: prev });
            }
        }
        self.first_time.get_or_insert(t);
        self.last_time = Some(t);
        self.event_count += 1;

        while self.pending.front().is_some_and(|p| p.second.time_ps + self.storage_ps + self.window_ps / 2 < t) {
            let p = self.pending.pop_front().expect("checked");
            self.resolve(p);
        }
        self.prune(t);

        if e.detector.is_signal() {
            let delays: Vec<i64> = self.idlers.iter().map(|i| t - i.time_ps).collect();
            for d in delays {
                self.record_twofold(d);
            }
            self.signals.push_back(e);
        } else {
            let delays: Vec<i64> = self.signals.iter().map(|s| s.time_ps - t).collect();
            for d in delays {
                self.record_twofold(d);
            }
            for first in self.idlers.iter() {
                let dt = t - first.time_ps;
                if first.detector != e.detector && dt > 0 && dt <= self.extended_ps {
                    self.pending.push_back(PendingPair { first: *first, second: e });
                }
            }
            self.idlers.push_back(e);
        }
        Ok(())
    }

    fn prune(&mut self, t: i64) {
        let idler_keep = t - self.extended_ps.max(self.span.1).max(-self.span.0);
        while self.idlers.front().is_some_and(|i| i.time_ps < idler_keep) {
            self.idlers.pop_front();
        }
        let mut signal_keep = t - self.span.1.max(-self.span.0);
        if let Some(p) = self.pending.front() {
            // pending pairs are ordered by their later idler, not the earlier one
            let earliest = self.pending.iter().map(|p| p.first.time_ps).min().unwrap_or(p.first.time_ps);
            signal_keep = signal_keep.min(earliest - self.window_ps);
        }
        while self.signals.front().is_some_and(|s| s.time_ps < signal_keep) {
            self.signals.pop_front();
        }
    }

    fn resolve(&mut self, p: PendingPair) {
        let half = self.window_ps / 2;
        let lo = p.first.time_ps - half;
        let hi = p.second.time_ps + self.storage_ps + half;
        let candidates = |port: Outcome| -> Vec<DetectionEvent> {
            self.signals
                .iter()
                .filter(|s| s.detector == Detector::signal(port) && (lo..=hi).contains(&s.time_ps))
                .copied()
                .collect()
        };
        let plus = candidates(Outcome::Plus);
        let minus = candidates(Outcome::Minus);
        if plus.is_empty() || minus.is_empty() {
            return;
        }
        let mut found: Option<FourFold> = None;
        let mut valid = 0u32;
        for sp in &plus {
            for sm in &minus {
                for (s1, s2) in [(sp, sm), (sm, sp)] {
                    let leg1 = classify_leg(s1.time_ps - p.first.time_ps, self.storage_ps, self.window_ps);
                    let leg2 = classify_leg(s2.time_ps - p.second.time_ps, self.storage_ps, self.window_ps);
                    if let (Some(l1), Some(l2)) = (leg1, leg2) {
                        valid += 1;
                        found = Some(FourFold {
                            signals: [*s1, *s2],
                            idlers: [p.first, p.second],
                            a: s1.detector.port(),
                            b: p.first.detector.port(),
                            delay_ps: p.second.time_ps - p.first.time_ps,
                            class: PathClass::from_legs(l1, l2),
                            x: p.first.setting_x,
                            y: p.first.setting_y,
                        });
                    }
                }
            }
        }
        match valid {
            0 => self.diagnostics.unclassifiable += 1,
            1 => {
                let f = found.expect("one valid assignment");
                debug_assert_eq!(f.pattern(), [f.a, f.b, f.a.flip(), f.b.flip()]);
                self.fourfolds.push(f);
            }
            _ => self.diagnostics.dropped_ambiguous += 1,
        }
    }

    pub fn finish(mut self) -> Analysis {
        while let Some(p) = self.pending.pop_front() {
            self.resolve(p);
        }
        Analysis {
            config: self.config,
            event_count: self.event_count,
            first_time_ps: self.first_time,
            last_time_ps: self.last_time,
            twofold: self.twofold,
            transmitted_twofolds: self.transmitted_twofolds,
            stored_twofolds: self.stored_twofolds,
            fourfolds: self.fourfolds,
            diagnostics: self.diagnostics,
        }
    }
}

/// Runs the analyzer over an in-memory stream.
pub fn analyze(events: &[DetectionEvent], config: AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let mut an = Analyzer::new(config)?;
    for e in events {
        an.push(*e)?;
    }
    Ok(an.finish())
}

/// `t_signal - t_idler` for one signal and one idler channel over
/// `[span_start, span_end)`.
pub fn twofold_histogram(
    events: &[DetectionEvent],
    signal: Detector,
    idler: Detector,
    bin_width_ns: f64,
    span_ns: (f64, f64),
) -> Histogram {
    let (lo, hi) = (ps(span_ns.0), ps(span_ns.1));
    let mut h = Histogram::spanning(lo, hi, ps(bin_width_ns), format!("{}-{}", signal.as_str(), idler.as_str()));
    let idlers: Vec<i64> = events.iter().filter(|e| e.detector == idler).map(|e| e.time_ps).collect();
    for s in events.iter().filter(|e| e.detector == signal) {
        let start = idlers.partition_point(|&t| t <= s.time_ps - hi);
        for &ti in idlers[start..].iter().take_while(|&&ti| ti <= s.time_ps - lo) {
            h.add(s.time_ps - ti);
        }
    }
    h
}

/// Four-folds with pair delay in `[min_delay, max_delay]` under the given
/// window; the other settings are defaults.
pub fn extract_fourfolds(
    events: &[DetectionEvent],
    window_ns: f64,
    min_delay_ns: f64,
    max_delay_ns: f64,
) -> Result<(Vec<FourFold>, Diagnostics), AnalysisError> {
    let config = AnalysisConfig {
        fourfold_window_ns: window_ns,
        min_delay_ns,
        max_delay_ns,
        extended_max_delay_ns: max_delay_ns.max(AnalysisConfig::default().extended_max_delay_ns),
        ..AnalysisConfig::default()
    };
    let a = analyze(events, config)?;
    Ok((a.certification_fourfolds(), a.diagnostics))
}

/// Pair delays in bins of `bin_width_ns` from zero up to `max_delay_ns`.
pub fn fourfold_delay_histogram(fourfolds: &[FourFold], bin_width_ns: f64, max_delay_ns: f64) -> Histogram {
    let mut h = Histogram::spanning(0, ps(max_delay_ns) + 1, ps(bin_width_ns), "pair_delay");
    for f in fourfolds {
        h.add(f.delay_ps);
    }
    h
}

/// Occupied delay divisions plus one, or zero for an empty histogram.
pub fn mode_capacity(h: &Histogram) -> usize {
    match h.occupied_bins() {
        0 => 0,
        n => n + 1,
    }
}

pub fn count_table(fourfolds: &[FourFold], class: PathClass) -> CountTable {
    let mut t = CountTable::new();
    for f in fourfolds.iter().filter(|f| f.class == class) {
        t.increment(f.x as usize, f.y as usize, f.a, f.b);
    }
    t
}
