//! Seeded synthetic transaction streams with planted, labeled fraud.
//!
//! Legitimate traffic comes from a fixed population of accounts, each with
//! a lognormal amount distribution, a home location, a primary device and
//! an activity weight. Arrivals follow a diurnal non-homogeneous Poisson
//! process (thinning). Fraud is planted as incidents anchored on a victim's
//! legitimate transaction, one of five patterns per [`PatternMix`].
//!
//! The fraud count is exactly `round(n_tx * fraud_rate)`.

mod csv_io;
mod regions;

pub use csv_io::{load_csv, write_csv, write_csv_file, SchemaMap};
pub use regions::{Region, REGIONS};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::tx::{
    featurize, idx, AccountId, BehaviorTracker, FeatureConfig, Geo, ProfileConfig, Transaction,
    MS_PER_DAY, MS_PER_HOUR,
};

pub const GENERATOR_VERSION: &str = concat!("anfb-datagen/", env!("CARGO_PKG_VERSION"));

/// Standard normal 0.999 quantile.
const Z_0999: f64 = 3.090_232_306_167_813;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioName {
    S1,
    S2,
    S3,
    #[serde(rename = "custom")]
    Custom,
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(ScenarioName::S1),
            "S2" => Ok(ScenarioName::S2),
            "S3" => Ok(ScenarioName::S3),
            "CUSTOM" => Ok(ScenarioName::Custom),
            _ => Err(Error::config(format!("unknown scenario `{s}` (expected S1, S2, S3 or custom)"))),
        }
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioName::S1 => "S1",
            ScenarioName::S2 => "S2",
            ScenarioName::S3 => "S3",
            ScenarioName::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudPattern {
    ValueOutlier,
    MicroBurst,
    OffHours,
    GeoJump,
    MultiStepChain,
}

impl FraudPattern {
    pub const ALL: [FraudPattern; 5] = [
        FraudPattern::ValueOutlier,
        FraudPattern::MicroBurst,
        FraudPattern::OffHours,
        FraudPattern::GeoJump,
        FraudPattern::MultiStepChain,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternMix {
    pub value_outlier: f64,
    pub micro_burst: f64,
    pub off_hours: f64,
    pub geo_jump: f64,
    pub multi_step_chain: f64,
}

impl PatternMix {
    pub fn weights(&self) -> [f64; 5] {
        [self.value_outlier, self.micro_burst, self.off_hours, self.geo_jump, self.multi_step_chain]
    }

    pub fn weight(&self, p: FraudPattern) -> f64 {
        match p {
            FraudPattern::ValueOutlier => self.value_outlier,
            FraudPattern::MicroBurst => self.micro_burst,
            FraudPattern::OffHours => self.off_hours,
            FraudPattern::GeoJump => self.geo_jump,
            FraudPattern::MultiStepChain => self.multi_step_chain,
        }
    }

    /// Everyday fraud: no layering chains.
    pub fn baseline() -> Self {
        PatternMix { value_outlier: 0.3, micro_burst: 0.25, off_hours: 0.2, geo_jump: 0.25, multi_step_chain: 0.0 }
    }

    /// Stress mix with multi-step cross-border chains.
    pub fn stress() -> Self {
        PatternMix { value_outlier: 0.2, micro_burst: 0.2, off_hours: 0.15, geo_jump: 0.2, multi_step_chain: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n_tx: usize,
    pub fraud_rate: f64,
    pub n_users: usize,
    /// Mean inter-arrival time in virtual ms.
    pub arrival_ms: f64,
    pub pattern_mix: PatternMix,
    pub seed: u64,
}

impl ScenarioSpec {
    pub const PRESET_N_TX: usize = 50_000;

    pub fn preset(name: ScenarioName, seed: u64) -> Self {
        let (fraud_rate, pattern_mix) = match name {
            ScenarioName::S1 => (0.001, PatternMix::baseline()),
            ScenarioName::S2 => (0.01, PatternMix::baseline()),
            ScenarioName::S3 => (0.05, PatternMix::stress()),
            ScenarioName::Custom => (0.01, PatternMix::baseline()),
        };
        ScenarioSpec {
            name,
            n_tx: Self::PRESET_N_TX,
            fraud_rate,
            n_users: 1000,
            arrival_ms: 10_000.0,
            pattern_mix,
            seed,
        }
    }

    pub fn with_n_tx(mut self, n_tx: usize) -> Self {
        self.n_tx = n_tx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::config("n_tx must be at least 1"));
        }
        if self.n_users == 0 {
            return Err(Error::config("n_users must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.fraud_rate) {
            return Err(Error::config(format!("fraud_rate {} outside [0, 1]", self.fraud_rate)));
        }
        if !(self.arrival_ms.is_finite() && self.arrival_ms > 0.0) {
            return Err(Error::config("arrival_ms must be positive"));
        }
        let w = self.pattern_mix.weights();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("pattern_mix weights must be non-negative with a positive sum"));
        }
        Ok(())
    }

    pub fn fraud_count(&self) -> usize {
        ((self.n_tx as f64 * self.fraud_rate).round() as usize).min(self.n_tx)
    }
}

/// Concrete generative parameters. Recorded verbatim in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// Population log-mean of amounts.
    pub amount_log_mean: f64,
    /// Spread of per-account log-means.
    pub account_log_mean_sd: f64,
    /// Per-transaction log-amount spread around the account's log-mean.
    pub amount_log_sd: f64,
    pub activity_log_sd: f64,
    pub secondary_device_prob: f64,
    pub merchant_share: f64,
    pub n_merchants: usize,
    /// Time of day of the first arrival.
    pub start_ms: u64,
    /// Relative arrival intensity per hour of day.
    pub diurnal: [f64; 24],
    pub min_victim_history: u64,
    pub mule_fraction: f64,
    pub burst_len: (usize, usize),
    pub burst_gap_ms: (u64, u64),
    pub burst_amount: (f64, f64),
    pub outlier_account_factor: (f64, f64),
    pub outlier_cap_fraction: (f64, f64),
    pub off_hours_h: (u64, u64),
    pub off_hours_factor: (f64, f64),
    pub geo_jump_delay_ms: (u64, u64),
    pub geo_jump_min_km: f64,
    pub chain_len: (usize, usize),
    pub chain_gap_ms: (u64, u64),
    pub chain_cap_fraction: (f64, f64),
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            amount_log_mean: 50f64.ln(),
            account_log_mean_sd: 0.8,
            amount_log_sd: 0.5,
            activity_log_sd: 0.6,
            secondary_device_prob: 0.02,
            merchant_share: 0.6,
            n_merchants: 300,
            start_ms: 8 * MS_PER_HOUR,
            diurnal: [
                0.15, 0.1, 0.08, 0.08, 0.1, 0.2, 0.45, 0.8, 1.2, 1.4, 1.45, 1.5, 1.55, 1.5, 1.45, 1.45,
                1.5, 1.55, 1.6, 1.5, 1.3, 1.1, 0.8, 0.45,
            ],
            min_victim_history: 2,
            mule_fraction: 0.02,
            burst_len: (4, 8),
            burst_gap_ms: (10_000, 90_000),
            burst_amount: (0.5, 5.0),
            outlier_account_factor: (8.0, 25.0),
            outlier_cap_fraction: (0.5, 1.5),
            off_hours_h: (1, 5),
            off_hours_factor: (3.0, 8.0),
            geo_jump_delay_ms: (60_000, 1_800_000),
            geo_jump_min_km: 3000.0,
            chain_len: (3, 5),
            chain_gap_ms: (60_000, 600_000),
            chain_cap_fraction: (0.6, 1.5),
        }
    }
}

impl GeneratorParams {
    /// 99.9th percentile of legitimate amounts (the default feature cap).
    ///
    /// Log-amounts are a normal mixture with normal means, hence normal with
    /// the summed variance.
    pub fn legit_amount_cap(&self) -> f64 {
        let sd = (self.account_log_mean_sd.powi(2) + self.amount_log_sd.powi(2)).sqrt();
        (self.amount_log_mean + Z_0999 * sd).exp()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amount_log_mean.is_finite()
            && self.account_log_mean_sd >= 0.0
            && self.amount_log_sd >= 0.0
            && self.activity_log_sd >= 0.0
            && (0.0..=1.0).contains(&self.secondary_device_prob)
            && (0.0..=1.0).contains(&self.merchant_share)
            && self.n_merchants > 0
            && self.diurnal.iter().all(|w| w.is_finite() && *w >= 0.0)
            && self.diurnal.iter().sum::<f64>() > 0.0
            && self.burst_len.0 >= 1
            && self.burst_len.0 <= self.burst_len.1
            && self.chain_len.0 >= 2
            && self.chain_len.0 <= self.chain_len.1
            && self.off_hours_h.0 < self.off_hours_h.1
            && self.off_hours_h.1 <= 24;
        if ok {
            Ok(())
        } else {
            Err(Error::config("invalid generator parameters"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub source: String,
    pub spec: Option<ScenarioSpec>,
    pub params: Option<GeneratorParams>,
    pub generator_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub transactions: Vec<Transaction>,
    pub manifest: StreamManifest,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn fraud_count(&self) -> usize {
        self.transactions.iter().filter(|t| t.label == Some(true)).count()
    }
}

struct Account {
    id: AccountId,
    log_mean: f64,
    home: Geo,
    primary_device: u32,
    secondary_device: u32,
}

struct Pending {
    time: u64,
    sender: usize,
    receiver: AccountId,
    amount: f64,
    device: u32,
    geo: Geo,
    fraud: bool,
}

const ATTACKER_DEVICE_BASE: u32 = 1_000_000_000;
const MULE_DEVICE_BASE: u32 = 2_000_000_000;

pub fn generate(spec: &ScenarioSpec) -> Result<LabeledStream> {
    generate_with(spec, &GeneratorParams::default(), &ProfileConfig::default())
}

pub fn generate_with(spec: &ScenarioSpec, params: &GeneratorParams, profile: &ProfileConfig) -> Result<LabeledStream> {
    spec.validate()?;
    params.validate()?;
    let mut rng = rng::stream(spec.seed, rng::STREAM_DATAGEN);

    let region_weights = WeightedIndex::new(REGIONS.iter().map(|r| r.weight)).expect("static weights");
    let log_mean = Normal::new(params.amount_log_mean, params.account_log_mean_sd).map_err(cfg_err)?;
    let activity = LogNormal::new(0.0, params.activity_log_sd).map_err(cfg_err)?;

    let mut accounts = Vec::with_capacity(spec.n_users);
    let mut activity_w = Vec::with_capacity(spec.n_users);
    for i in 0..spec.n_users {
        let region = region_weights.sample(&mut rng);
        let home = jittered(&REGIONS[region], region as u16, 0.3, &mut rng);
        accounts.push(Account {
            id: AccountId(format!("c-{i:06}")),
            log_mean: log_mean.sample(&mut rng),
            home,
            primary_device: 2 * i as u32 + 1,
            secondary_device: 2 * i as u32 + 2,
        });
        activity_w.push(activity.sample(&mut rng));
    }
    let n_mules = ((spec.n_users as f64 * params.mule_fraction).ceil() as usize).max(5);
    let mules: Vec<(AccountId, u32)> = (0..n_mules)
        .map(|k| (AccountId(format!("c-{:06}", spec.n_users + k)), MULE_DEVICE_BASE + k as u32))
        .collect();
    let merchant = |k: usize| AccountId(format!("m-{k:05}"));

    let n_fraud = spec.fraud_count();
    let n_legit = spec.n_tx - n_fraud;

    // Legitimate arrivals.
    let max_w = params.diurnal.iter().cloned().fold(0.0, f64::max);
    let mean_w = params.diurnal.iter().sum::<f64>() / 24.0;
    let candidate_gap = Exp::new(max_w / (mean_w * spec.arrival_ms)).map_err(cfg_err)?;
    let sender_dist = WeightedIndex::new(&activity_w).map_err(cfg_err)?;
    let amount_noise = Normal::new(0.0, params.amount_log_sd).map_err(cfg_err)?;

    let mut pending: Vec<Pending> = Vec::with_capacity(spec.n_tx);
    let mut history: Vec<u64> = Vec::with_capacity(n_legit);
    let mut seen = vec![0u64; spec.n_users];
    let mut clock = params.start_ms as f64;
    for _ in 0..n_legit {
        loop {
            clock += candidate_gap.sample(&mut rng);
            let hour = ((clock as u64) % MS_PER_DAY / MS_PER_HOUR) as usize;
            if rng.random::<f64>() * max_w < params.diurnal[hour] {
                break;
            }
        }
        let s = sender_dist.sample(&mut rng);
        let receiver = if spec.n_users < 2 || rng.random::<f64>() < params.merchant_share {
            merchant(rng.random_range(0..params.n_merchants))
        } else {
            let mut r = rng.random_range(0..spec.n_users - 1);
            if r >= s {
                r += 1;
            }
            accounts[r].id.clone()
        };
        let acct = &accounts[s];
        let amount = cents((acct.log_mean + amount_noise.sample(&mut rng)).exp());
        let device = if rng.random::<f64>() < params.secondary_device_prob {
            acct.secondary_device
        } else {
            acct.primary_device
        };
        history.push(seen[s]);
        seen[s] += 1;
        pending.push(Pending { time: clock as u64, sender: s, receiver, amount, device, geo: acct.home, fraud: false });
    }
    let span_end = pending.last().map_or(params.start_ms, |p| p.time);

    // Fraud incidents.
    let cap = params.legit_amount_cap();
    let mix = WeightedIndex::new(spec.pattern_mix.weights()).map_err(cfg_err)?;
    let mut used_victims = vec![false; spec.n_users];
    let mut mule_pending: Vec<(usize, Pending)> = Vec::new();
    let mut emitted = 0usize;
    let mut incident = 0u32;
    while emitted < n_fraud {
        let pattern = FraudPattern::ALL[mix.sample(&mut rng)];
        let remaining = n_fraud - emitted;
        let (victim, anchor) = pick_victim(&pending[..n_legit], &history, &mut used_victims, params, span_end, spec.n_users, &mut rng);
        used_victims[victim] = true;
        let acct = &accounts[victim];
        let acct_mean = (acct.log_mean + params.amount_log_sd.powi(2) / 2.0).exp();
        let attacker_device = ATTACKER_DEVICE_BASE + incident;
        incident += 1;
        let mule = |rng: &mut SimRng| mules[rng.random_range(0..mules.len())].0.clone();

        match pattern {
            FraudPattern::ValueOutlier => {
                let by_account = acct_mean * uniform(&mut rng, params.outlier_account_factor);
                let by_cap = cap * uniform(&mut rng, params.outlier_cap_fraction);
                pending.push(Pending {
                    time: anchor + rng.random_range(60_000..=MS_PER_HOUR),
                    sender: victim,
                    receiver: mule(&mut rng),
                    amount: cents(by_account.max(by_cap)),
                    device: acct.primary_device,
                    geo: acct.home,
                    fraud: true,
                });
                emitted += 1;
            }
            FraudPattern::MicroBurst => {
                let len = rng.random_range(params.burst_len.0..=params.burst_len.1).min(remaining);
                let mut t = anchor + rng.random_range(params.burst_gap_ms.0..=params.burst_gap_ms.1);
                for _ in 0..len {
                    pending.push(Pending {
                        time: t,
                        sender: victim,
                        receiver: merchant(rng.random_range(0..params.n_merchants)),
                        amount: cents(uniform(&mut rng, params.burst_amount)),
                        device: attacker_device,
                        geo: acct.home,
                        fraud: true,
                    });
                    t += rng.random_range(params.burst_gap_ms.0..=params.burst_gap_ms.1);
                }
                emitted += len;
            }
            FraudPattern::OffHours => {
                let day = anchor / MS_PER_DAY + 1;
                let t = day * MS_PER_DAY
                    + rng.random_range(params.off_hours_h.0 * MS_PER_HOUR..params.off_hours_h.1 * MS_PER_HOUR);
                pending.push(Pending {
                    time: t,
                    sender: victim,
                    receiver: mule(&mut rng),
                    amount: cents(acct_mean * uniform(&mut rng, params.off_hours_factor)),
                    device: attacker_device,
                    geo: acct.home,
                    fraud: true,
                });
                emitted += 1;
            }
            FraudPattern::GeoJump => {
                let region = far_region(acct.home, params.geo_jump_min_km, &mut rng);
                pending.push(Pending {
                    time: anchor + rng.random_range(params.geo_jump_delay_ms.0..=params.geo_jump_delay_ms.1),
                    sender: victim,
                    receiver: mule(&mut rng),
                    amount: cents(acct_mean * rng.random_range(1.0..4.0)),
                    device: attacker_device,
                    geo: centroid(region),
                    fraud: true,
                });
                emitted += 1;
            }
            FraudPattern::MultiStepChain => {
                let len = rng.random_range(params.chain_len.0..=params.chain_len.1).min(remaining).min(mules.len());
                let mut amount = cap * uniform(&mut rng, params.chain_cap_fraction);
                let mut t = anchor + rng.random_range(params.chain_gap_ms.0..=params.chain_gap_ms.1);
                let mut region = far_region(acct.home, params.geo_jump_min_km, &mut rng);
                let mut hop_mules: Vec<usize> = Vec::with_capacity(len);
                while hop_mules.len() < len {
                    let m = rng.random_range(0..mules.len());
                    if !hop_mules.contains(&m) {
                        hop_mules.push(m);
                    }
                }
                // First hop drains the victim; later hops are mule-to-mule.
                pending.push(Pending {
                    time: t,
                    sender: victim,
                    receiver: mules[hop_mules[0]].0.clone(),
                    amount: cents(amount),
                    device: attacker_device,
                    geo: centroid(region),
                    fraud: true,
                });
                for hop in 1..len {
                    t += rng.random_range(params.chain_gap_ms.0..=params.chain_gap_ms.1);
                    amount *= 1.0 - rng.random_range(0.01..0.03);
                    region = other_region(region, &mut rng);
                    let from = hop_mules[hop - 1];
                    let to = hop_mules[hop];
                    mule_pending.push((
                        from,
                        Pending {
                            time: t,
                            sender: usize::MAX,
                            receiver: mules[to].0.clone(),
                            amount: cents(amount),
                            device: mules[from].1,
                            geo: centroid(region),
                            fraud: true,
                        },
                    ));
                }
                emitted += len;
            }
        }
    }

    // Order by time, then by creation order; force strictly increasing times.
    let mut all: Vec<(Option<usize>, Pending)> = pending.into_iter().map(|p| (None, p)).collect();
    all.extend(mule_pending.into_iter().map(|(m, p)| (Some(m), p)));
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by_key(|&i| (all[i].1.time, i));

    let mut transactions = Vec::with_capacity(all.len());
    let mut last_time: Option<u64> = None;
    for (k, &i) in order.iter().enumerate() {
        let (mule_idx, p) = &all[i];
        let time = match last_time {
            Some(prev) if p.time <= prev => prev + 1,
            _ => p.time,
        };
        last_time = Some(time);
        let sender = match mule_idx {
            Some(m) => mules[*m].0.clone(),
            None => accounts[p.sender].id.clone(),
        };
        transactions.push(Transaction {
            tx_id: k as u64 + 1,
            sender,
            receiver: p.receiver.clone(),
            amount: p.amount,
            timestamp: time,
            geo: p.geo,
            device: p.device,
            behavior: Default::default(),
            label: Some(p.fraud),
        });
    }
    BehaviorTracker::new(*profile).annotate(&mut transactions)?;

    Ok(LabeledStream {
        transactions,
        manifest: StreamManifest {
            source: "synthetic".into(),
            spec: Some(spec.clone()),
            params: Some(params.clone()),
            generator_version: GENERATOR_VERSION.into(),
        },
    })
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::config(format!("generator distribution: {e}"))
}

fn cents(x: f64) -> f64 {
    ((x * 100.0).round() / 100.0).max(0.01)
}

fn uniform(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn jittered(region: &Region, code: u16, deg: f64, rng: &mut SimRng) -> Geo {
    Geo::at(code, region.lat + rng.random_range(-deg..deg), region.lon + rng.random_range(-deg..deg))
}

fn centroid(region: usize) -> Geo {
    Geo::at(region as u16, REGIONS[region].lat, REGIONS[region].lon)
}

fn far_region(home: Geo, min_km: f64, rng: &mut SimRng) -> usize {
    let here = home.coords.expect("generated homes carry coordinates");
    let far: Vec<usize> = (0..REGIONS.len())
        .filter(|&r| crate::tx::great_circle_km(here, REGIONS[r].coords()) >= min_km)
        .collect();
    if far.is_empty() {
        other_region(home.region as usize, rng)
    } else {
        far[rng.random_range(0..far.len())]
    }
}

fn other_region(current: usize, rng: &mut SimRng) -> usize {
    let r = rng.random_range(0..REGIONS.len() - 1);
    if r >= current {
        r + 1
    } else {
        r
    }
}

/// Picks a victim account with enough history and the time of the
/// legitimate transaction the incident is anchored on.
fn pick_victim(
    legit: &[Pending],
    history: &[u64],
    used: &mut [bool],
    params: &GeneratorParams,
    span_end: u64,
    n_users: usize,
    rng: &mut SimRng,
) -> (usize, u64) {
    if legit.is_empty() {
        let v = rng.random_range(0..n_users);
        return (v, params.start_ms + rng.random_range(0..=span_end.saturating_sub(params.start_ms)));
    }
    let mut fallback = None;
    for attempt in 0..128 {
        let j = rng.random_range(0..legit.len());
        let p = &legit[j];
        if history[j] + 1 >= params.min_victim_history && (!used[p.sender] || attempt >= 64) {
            return (p.sender, p.time);
        }
        fallback.get_or_insert((p.sender, p.time));
    }
    fallback.expect("at least one attempt")
}

/// Per-dimension thresholds beyond which a transaction counts as deviant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationThresholds {
    pub amount_norm_min: f64,
    pub abs_zscore_min: f64,
    pub tx_rate_min: f64,
    pub device_consistency_max: f64,
    /// Hours of day `[start, end)` considered off-hours.
    pub off_hours: (u64, u64),
}

impl Default for DeviationThresholds {
    fn default() -> Self {
        DeviationThresholds {
            amount_norm_min: 0.5,
            abs_zscore_min: 3.0,
            tx_rate_min: 3.0,
            device_consistency_max: 0.34,
            off_hours: (1, 5),
        }
    }
}

impl DeviationThresholds {
    pub fn is_deviant(&self, tx: &Transaction, features: &FeatureConfig) -> Result<bool> {
        let fv = featurize(tx, features)?;
        let b = &tx.behavior;
        let hour = tx.timestamp % MS_PER_DAY / MS_PER_HOUR;
        Ok(fv.0[idx::AMOUNT] >= self.amount_norm_min
            || b.amount_zscore.abs() >= self.abs_zscore_min
            || b.tx_rate >= self.tx_rate_min
            || b.device_consistency <= self.device_consistency_max
            || b.geo_jump
            || (self.off_hours.0..self.off_hours.1).contains(&hour))
    }
}

/// Ids of planted fraud transactions that deviate in no feature dimension.
pub fn self_test(stream: &LabeledStream, features: &FeatureConfig, thresholds: &DeviationThresholds) -> Result<Vec<u64>> {
    let mut bad = Vec::new();
    for tx in stream.transactions.iter().filter(|t| t.label == Some(true)) {
        if !thresholds.is_deviant(tx, features)? {
            bad.push(tx.tx_id);
        }
    }
    Ok(bad)
}
