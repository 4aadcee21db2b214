//! Transactions, per-account behavioral profiles and featurization.
//!
//! A raw [`Transaction`] carries the amount, time, location and device of a
//! transfer. [`BehaviorTracker`] walks a time-ordered stream, derives each
//! transaction's [`BehaviorVector`] from the sender's history *before* that
//! transaction, then folds the transaction into the sender's
//! [`UserProfile`]. [`featurize`] maps an annotated transaction onto the
//! fixed 7-component [`FeatureVector`] consumed by the risk engine.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MS_PER_HOUR: u64 = 3_600_000;
pub const MS_PER_DAY: u64 = 24 * MS_PER_HOUR;

/// Pseudonymous account identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub String);

impl AccountId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// Location of a transaction: a region code plus optional coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geo {
    pub region: u16,
    pub coords: Option<LatLon>,
}

impl Geo {
    pub fn region(region: u16) -> Self {
        Geo { region, coords: None }
    }

    pub fn at(region: u16, lat: f64, lon: f64) -> Self {
        Geo { region, coords: Some(LatLon { lat, lon }) }
    }
}

/// Great-circle distance in kilometres (haversine, mean Earth radius).
pub fn great_circle_km(a: LatLon, b: LatLon) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0088;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Behavioral attributes of a transaction relative to its sender's history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorVector {
    /// Sender transactions per hour over the rolling window, this one included.
    pub tx_rate: f64,
    /// (amount - mean) / stddev of the sender's previous amounts; 0 without spread.
    pub amount_zscore: f64,
    /// Share of the sender's recent transactions made on this transaction's device.
    pub device_consistency: f64,
    /// Location change faster than the plausibility speed.
    pub geo_jump: bool,
    /// Hours since the sender's previous transaction; 0 for a first transaction.
    pub dormancy_gap: f64,
}

impl Default for BehaviorVector {
    fn default() -> Self {
        BehaviorVector {
            tx_rate: 0.0,
            amount_zscore: 0.0,
            device_consistency: 1.0,
            geo_jump: false,
            dormancy_gap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: u64,
    pub sender: AccountId,
    pub receiver: AccountId,
    pub amount: f64,
    /// Virtual milliseconds since the simulation epoch.
    pub timestamp: u64,
    pub geo: Geo,
    pub device: u32,
    pub behavior: BehaviorVector,
    /// Ground truth: `Some(true)` for fraud.
    pub label: Option<bool>,
}

impl Transaction {
    pub fn validate(&self) -> Result<()> {
        if !self.amount.is_finite() {
            return Err(Error::NonFinite("amount"));
        }
        if self.amount < 0.0 {
            return Err(Error::config(format!("transaction {}: negative amount", self.tx_id)));
        }
        if self.sender == self.receiver {
            return Err(Error::config(format!(
                "transaction {}: sender equals receiver ({})",
                self.tx_id, self.sender
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    /// Rolling window for `tx_rate`.
    pub window_ms: u64,
    /// Number of most recent devices remembered per account.
    pub device_window: usize,
    /// Location changes faster than this are implausible.
    pub plausible_speed_kmh: f64,
    /// Without coordinates, a region change within this span counts as a jump.
    pub region_hop_ms: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            window_ms: MS_PER_HOUR,
            device_window: 20,
            plausible_speed_kmh: 900.0,
            region_hop_ms: MS_PER_HOUR,
        }
    }
}

/// Running history of one account.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub account: AccountId,
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations (Welford's M2).
    m2: f64,
    pub last_timestamp: Option<u64>,
    pub last_geo: Option<Geo>,
    pub modal_device: Option<u32>,
    recent_times: VecDeque<u64>,
    recent_devices: VecDeque<u32>,
}

impl UserProfile {
    pub fn new(account: AccountId) -> Self {
        UserProfile {
            account,
            count: 0,
            mean: 0.0,
            m2: 0.0,
            last_timestamp: None,
            last_geo: None,
            modal_device: None,
            recent_times: VecDeque::new(),
            recent_devices: VecDeque::new(),
        }
    }

    /// Population variance of the amounts seen so far.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn recent_times(&self) -> impl Iterator<Item = u64> + '_ {
        self.recent_times.iter().copied()
    }

    /// Folds `tx` into the running moments and windows.
    pub fn update(&mut self, tx: &Transaction, cfg: &ProfileConfig) -> Result<()> {
        if let Some(last) = self.last_timestamp {
            if tx.timestamp < last {
                return Err(Error::Ordering { tx_id: tx.tx_id, timestamp: tx.timestamp, last });
            }
        }
        if !tx.amount.is_finite() {
            return Err(Error::NonFinite("amount"));
        }

        self.count += 1;
        let delta = tx.amount - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (tx.amount - self.mean);

        self.last_timestamp = Some(tx.timestamp);
        self.last_geo = Some(tx.geo);

        self.recent_times.push_back(tx.timestamp);
        while self.recent_times.front().is_some_and(|&t| !in_window(t, tx.timestamp, cfg)) {
            self.recent_times.pop_front();
        }

        self.recent_devices.push_back(tx.device);
        while self.recent_devices.len() > cfg.device_window.max(1) {
            self.recent_devices.pop_front();
        }
        self.modal_device = modal(&self.recent_devices);
        Ok(())
    }

    /// Behavior of `tx` given this (pre-`tx`) history.
    pub fn derive_behavior(&self, tx: &Transaction, cfg: &ProfileConfig) -> BehaviorVector {
        let Some(last) = self.last_timestamp else {
            return BehaviorVector {
                tx_rate: 1.0 / window_hours(cfg),
                ..BehaviorVector::default()
            };
        };
        let elapsed_ms = tx.timestamp.saturating_sub(last);

        let recent = self.recent_times.iter().filter(|&&t| in_window(t, tx.timestamp, cfg)).count();
        let tx_rate = (recent + 1) as f64 / window_hours(cfg);

        let var = self.variance();
        let amount_zscore = if var > 0.0 { (tx.amount - self.mean) / var.sqrt() } else { 0.0 };

        let device_consistency = if self.recent_devices.is_empty() {
            1.0
        } else {
            let same = self.recent_devices.iter().filter(|&&d| d == tx.device).count();
            same as f64 / self.recent_devices.len() as f64
        };

        let geo_jump = self.last_geo.is_some_and(|prev| implausible_move(prev, tx.geo, elapsed_ms, cfg));

        BehaviorVector {
            tx_rate,
            amount_zscore,
            device_consistency,
            geo_jump,
            dormancy_gap: elapsed_ms as f64 / MS_PER_HOUR as f64,
        }
    }
}

fn in_window(t: u64, now: u64, cfg: &ProfileConfig) -> bool {
    t.saturating_add(cfg.window_ms) > now
}

fn window_hours(cfg: &ProfileConfig) -> f64 {
    (cfg.window_ms.max(1)) as f64 / MS_PER_HOUR as f64
}

fn modal(devices: &VecDeque<u32>) -> Option<u32> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &d in devices {
        *counts.entry(d).or_default() += 1;
    }
    // Ties go to the smallest id so the result never depends on map order.
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(d, _)| d)
}

fn implausible_move(prev: Geo, cur: Geo, elapsed_ms: u64, cfg: &ProfileConfig) -> bool {
    match (prev.coords, cur.coords) {
        (Some(a), Some(b)) => {
            let km = great_circle_km(a, b);
            if km <= 0.0 {
                return false;
            }
            if elapsed_ms == 0 {
                return true;
            }
            let hours = elapsed_ms as f64 / MS_PER_HOUR as f64;
            km / hours > cfg.plausible_speed_kmh
        }
        _ => prev.region != cur.region && elapsed_ms < cfg.region_hop_ms,
    }
}

/// Per-account profiles for a single time-ordered stream.
#[derive(Debug, Clone, Default)]
pub struct BehaviorTracker {
    cfg: ProfileConfig,
    profiles: HashMap<AccountId, UserProfile>,
}

impl BehaviorTracker {
    pub fn new(cfg: ProfileConfig) -> Self {
        BehaviorTracker { cfg, profiles: HashMap::new() }
    }

    pub fn profile(&self, account: &AccountId) -> Option<&UserProfile> {
        self.profiles.get(account)
    }

    /// Fills `tx.behavior` from the sender's history, then records `tx`.
    pub fn observe(&mut self, tx: &mut Transaction) -> Result<()> {
        let profile = self
            .profiles
            .entry(tx.sender.clone())
            .or_insert_with(|| UserProfile::new(tx.sender.clone()));
        if let Some(last) = profile.last_timestamp {
            if tx.timestamp < last {
                return Err(Error::Ordering { tx_id: tx.tx_id, timestamp: tx.timestamp, last });
            }
        }
        tx.behavior = profile.derive_behavior(tx, &self.cfg);
        profile.update(tx, &self.cfg)
    }

    pub fn annotate(&mut self, stream: &mut [Transaction]) -> Result<()> {
        stream.iter_mut().try_for_each(|tx| self.observe(tx))
    }
}

/// Number of components in a [`FeatureVector`].
pub const FEATURE_DIM: usize = 7;
/// Versioned description of the feature layout, recorded in run manifests.
pub const FEATURE_LAYOUT: &str =
    "fv1:amount_norm,hour_night,tx_rate_sq,abs_zscore_sq,device_consistency,geo_jump,dormancy_sq";

pub mod idx {
    pub const AMOUNT: usize = 0;
    pub const HOUR: usize = 1;
    pub const RATE: usize = 2;
    pub const ZSCORE: usize = 3;
    pub const DEVICE: usize = 4;
    pub const GEO: usize = 5;
    pub const DORMANCY: usize = 6;
}

/// Normalized feature vector; every component lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Amounts at or above the cap normalize to 1.
    pub amount_cap: f64,
    pub zscore_steepness: f64,
    /// Hour of day (fractional) at which the time-of-day component peaks.
    pub night_center_h: f64,
    pub rate_midpoint: f64,
    pub rate_steepness: f64,
    pub dormancy_midpoint_h: f64,
    pub dormancy_steepness: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            amount_cap: crate::datagen::GeneratorParams::default().legit_amount_cap(),
            zscore_steepness: 0.25,
            night_center_h: 3.0,
            rate_midpoint: 3.0,
            rate_steepness: 1.5,
            dormancy_midpoint_h: 72.0,
            dormancy_steepness: 0.1,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.amount_cap,
            self.zscore_steepness,
            self.night_center_h,
            self.rate_midpoint,
            self.rate_steepness,
            self.dormancy_midpoint_h,
            self.dormancy_steepness,
        ];
        if all.iter().any(|v| !v.is_finite()) || self.amount_cap <= 0.0 {
            return Err(Error::config("feature config values must be finite and amount_cap > 0"));
        }
        Ok(())
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps an annotated transaction to its normalized feature vector.
pub fn featurize(tx: &Transaction, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let b = &tx.behavior;
    let checks: [(&'static str, f64); 5] = [
        ("amount", tx.amount),
        ("tx_rate", b.tx_rate),
        ("amount_zscore", b.amount_zscore),
        ("device_consistency", b.device_consistency),
        ("dormancy_gap", b.dormancy_gap),
    ];
    for (name, v) in checks {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }

    let mut f = [0.0; FEATURE_DIM];
    f[idx::AMOUNT] = (tx.amount / cfg.amount_cap).clamp(0.0, 1.0);
    // Circular encoding: 1 at `night_center_h`, 0 twelve hours away.
    let hour = (tx.timestamp % MS_PER_DAY) as f64 / MS_PER_HOUR as f64;
    f[idx::HOUR] = 0.5 * (1.0 + (std::f64::consts::TAU * (hour - cfg.night_center_h) / 24.0).cos());
    f[idx::RATE] = logistic(cfg.rate_steepness * (b.tx_rate - cfg.rate_midpoint));
    f[idx::ZSCORE] = logistic(cfg.zscore_steepness * b.amount_zscore.abs());
    f[idx::DEVICE] = b.device_consistency.clamp(0.0, 1.0);
    f[idx::GEO] = if b.geo_jump { 1.0 } else { 0.0 };
    f[idx::DORMANCY] = logistic(cfg.dormancy_steepness * (b.dormancy_gap - cfg.dormancy_midpoint_h));
    Ok(FeatureVector(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(id: u64, amount: f64, ts: u64) -> Transaction {
        Transaction {
            tx_id: id,
            sender: "alice".into(),
            receiver: "bob".into(),
            amount,
            timestamp: ts,
            geo: Geo::at(1, 52.52, 13.40),
            device: 7,
            behavior: BehaviorVector::default(),
            label: None,
        }
    }

    #[test]
    fn single_observation_moments() {
        let cfg = ProfileConfig::default();
        let mut p = UserProfile::new("alice".into());
        p.update(&tx(1, 100.0, 0), &cfg).unwrap();
        assert_eq!(p.count, 1);
        assert_eq!(p.mean, 100.0);
        assert_eq!(p.variance(), 0.0);
        p.update(&tx(2, 300.0, 10), &cfg).unwrap();
        assert_eq!(p.mean, 200.0);
        assert_eq!(p.variance(), 10_000.0);
    }

    #[test]
    fn out_of_order_is_rejected() {
        let cfg = ProfileConfig::default();
        let mut p = UserProfile::new("alice".into());
        p.update(&tx(1, 1.0, 5_000), &cfg).unwrap();
        let err = p.update(&tx(2, 1.0, 4_999), &cfg).unwrap_err();
        assert!(matches!(err, Error::Ordering { tx_id: 2, .. }));
        assert_eq!(p.count, 1);
    }

    #[test]
    fn first_transaction_defaults() {
        let cfg = ProfileConfig::default();
        let p = UserProfile::new("alice".into());
        let b = p.derive_behavior(&tx(1, 50.0, 1_000), &cfg);
        assert_eq!(b.amount_zscore, 0.0);
        assert!(!b.geo_jump);
        assert_eq!(b.dormancy_gap, 0.0);
        assert_eq!(b.device_consistency, 1.0);
    }

    #[test]
    fn same_place_an_hour_later() {
        let cfg = ProfileConfig::default();
        let mut p = UserProfile::new("alice".into());
        p.update(&tx(1, 50.0, 0), &cfg).unwrap();
        let b = p.derive_behavior(&tx(2, 50.0, MS_PER_HOUR), &cfg);
        assert!(!b.geo_jump);
        assert_eq!(b.dormancy_gap, 1.0);
    }

    #[test]
    fn five_hundred_km_in_a_minute_is_a_jump() {
        let cfg = ProfileConfig { plausible_speed_kmh: 300.0, ..ProfileConfig::default() };
        let mut p = UserProfile::new("alice".into());
        let mut first = tx(1, 50.0, 0);
        first.geo = Geo::at(1, 0.0, 0.0);
        p.update(&first, &cfg).unwrap();
        // 500 km due north along a meridian.
        let deg = 500.0 / 6371.0088_f64 * 180.0 / std::f64::consts::PI;
        let mut second = tx(2, 50.0, 60_000);
        second.geo = Geo::at(2, deg, 0.0);
        assert!((great_circle_km(first.geo.coords.unwrap(), second.geo.coords.unwrap()) - 500.0).abs() < 1e-6);
        assert!(p.derive_behavior(&second, &cfg).geo_jump);
        // The same move over two hours is 250 km/h: plausible.
        second.timestamp = 2 * MS_PER_HOUR;
        assert!(!p.derive_behavior(&second, &cfg).geo_jump);
    }

    #[test]
    fn region_fallback_without_coordinates() {
        let cfg = ProfileConfig::default();
        let mut p = UserProfile::new("alice".into());
        let mut a = tx(1, 5.0, 0);
        a.geo = Geo::region(3);
        p.update(&a, &cfg).unwrap();
        let mut b = tx(2, 5.0, 60_000);
        b.geo = Geo::region(4);
        assert!(p.derive_behavior(&b, &cfg).geo_jump);
        b.timestamp = 2 * MS_PER_HOUR;
        assert!(!p.derive_behavior(&b, &cfg).geo_jump);
    }

    #[test]
    fn tx_rate_counts_window_and_current() {
        let cfg = ProfileConfig::default();
        let mut tracker = BehaviorTracker::new(cfg);
        let mut stream: Vec<_> = (0..4).map(|i| tx(i, 10.0, 10 * MS_PER_HOUR + i * 60_000)).collect();
        tracker.annotate(&mut stream).unwrap();
        let rates: Vec<f64> = stream.iter().map(|t| t.behavior.tx_rate).collect();
        assert_eq!(rates, vec![1.0, 2.0, 3.0, 4.0]);
        let mut later = tx(9, 10.0, 12 * MS_PER_HOUR);
        tracker.observe(&mut later).unwrap();
        assert_eq!(later.behavior.tx_rate, 1.0);
    }

    #[test]
    fn device_consistency_tracks_this_device() {
        let cfg = ProfileConfig::default();
        let mut tracker = BehaviorTracker::new(cfg);
        let mut stream: Vec<_> = (0..3).map(|i| tx(i, 10.0, i * 1000)).collect();
        tracker.annotate(&mut stream).unwrap();
        let mut foreign = tx(3, 10.0, 5000);
        foreign.device = 99;
        tracker.observe(&mut foreign).unwrap();
        assert_eq!(foreign.behavior.device_consistency, 0.0);
        assert_eq!(tracker.profile(&"alice".into()).unwrap().modal_device, Some(7));
        let mut usual = tx(4, 10.0, 6000);
        tracker.observe(&mut usual).unwrap();
        assert_eq!(usual.behavior.device_consistency, 0.75);
    }

    #[test]
    fn featurize_bounds_and_midpoint() {
        let cfg = FeatureConfig { amount_cap: 1000.0, ..FeatureConfig::default() };
        let mut t = tx(1, 0.0, 0);
        assert_eq!(featurize(&t, &cfg).unwrap().0[idx::AMOUNT], 0.0);
        t.amount = 1000.0;
        assert_eq!(featurize(&t, &cfg).unwrap().0[idx::AMOUNT], 1.0);
        t.amount = 5000.0;
        assert_eq!(featurize(&t, &cfg).unwrap().0[idx::AMOUNT], 1.0);
        t.behavior.amount_zscore = 0.0;
        assert_eq!(featurize(&t, &cfg).unwrap().0[idx::ZSCORE], 0.5);
    }

    #[test]
    fn featurize_rejects_non_finite() {
        let cfg = FeatureConfig::default();
        let mut t = tx(1, 10.0, 0);
        t.behavior.tx_rate = f64::NAN;
        assert!(matches!(featurize(&t, &cfg), Err(Error::NonFinite("tx_rate"))));
        t.behavior.tx_rate = 1.0;
        t.amount = f64::INFINITY;
        assert!(matches!(featurize(&t, &cfg), Err(Error::NonFinite("amount"))));
    }

    #[test]
    fn time_of_day_is_circular() {
        let cfg = FeatureConfig::default();
        let at = |ms| featurize(&tx(1, 1.0, ms), &cfg).unwrap().0[idx::HOUR];
        assert_eq!(at(3 * MS_PER_HOUR), 1.0);
        assert!(at(15 * MS_PER_HOUR) < 1e-15);
        assert_eq!(at(6 * MS_PER_HOUR), at(MS_PER_DAY + 6 * MS_PER_HOUR));
        assert!((at(6 * MS_PER_HOUR) - at(0)).abs() < 1e-12);
    }
}
