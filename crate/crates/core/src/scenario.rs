//! Random network layouts: APs and users placed uniformly in a square,
//! per-pair mean SNR from a log-distance path-loss map, and per-user QoS
//! drawn from eMBB or uRLLC ranges.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amc::db_to_linear;
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::{QosRequirement, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Embb,
    Urllc,
}

impl TrafficClass {
    pub fn label(self) -> &'static str {
        match self {
            TrafficClass::Embb => "embb",
            TrafficClass::Urllc => "urllc",
        }
    }
}

/// Closed sampling ranges for one traffic class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosRanges {
    /// Bits/second.
    pub arrival_rate: (f64, f64),
    /// Seconds.
    pub total_delay_budget: (f64, f64),
    pub lvp_threshold: (f64, f64),
}

impl QosRanges {
    pub fn embb() -> Self {
        Self {
            arrival_rate: (10e6, 20e6),
            total_delay_budget: (10e-3, 16e-3),
            lvp_threshold: (1e-4, 1e-3),
        }
    }

    pub fn urllc() -> Self {
        Self {
            arrival_rate: (1e6, 5e6),
            total_delay_budget: (3e-3, 9e-3),
            lvp_threshold: (1e-6, 1e-5),
        }
    }

    pub fn contains(&self, q: &QosRequirement) -> bool {
        let within = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        within(self.arrival_rate, q.arrival_rate)
            && within(self.total_delay_budget, q.total_delay_budget)
            && within(self.lvp_threshold, q.lvp_threshold)
    }

    fn sample<R: Rng>(&self, rng: &mut R, decode_bler_threshold: f64) -> QosRequirement {
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        QosRequirement {
            arrival_rate: draw(self.arrival_rate),
            total_delay_budget: draw(self.total_delay_budget),
            lvp_threshold: draw(self.lvp_threshold),
            decode_bler_threshold,
        }
    }
}

/// Log-distance path loss `128.1 + 37.6 log10(d / 1 km)` dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Propagation {
    pub tx_power_dbm: f64,
    /// Noise power over the signal bandwidth, dBm.
    pub noise_dbm: f64,
    /// Distances are clamped to at least this, meters.
    pub min_distance_m: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            tx_power_dbm: 30.0,
            noise_dbm: -92.0,
            min_distance_m: 10.0,
        }
    }
}

impl Propagation {
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d_km = distance_m.max(self.min_distance_m) / 1000.0;
        128.1 + 37.6 * d_km.log10()
    }

    pub fn mean_snr_db(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm - self.path_loss_db(distance_m) - self.noise_dbm
    }
}

/// Inputs to [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub aps: usize,
    pub users: usize,
    /// Side of the square deployment area, meters.
    pub area_m: f64,
    /// Share of users drawn as eMBB; the rest are uRLLC.
    pub embb_fraction: f64,
    pub decode_bler_threshold: f64,
    pub seed: u64,
    pub propagation: Propagation,
    pub embb: QosRanges,
    pub urllc: QosRanges,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            aps: 20,
            users: 40,
            area_m: 500.0,
            embb_fraction: 0.5,
            decode_bler_threshold: 1e-3,
            seed: 1,
            propagation: Propagation::default(),
            embb: QosRanges::embb(),
            urllc: QosRanges::urllc(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApSite {
    pub id: usize,
    /// Meters.
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSite {
    pub id: usize,
    /// Meters.
    pub position: [f64; 2],
    pub qos: QosRequirement,
    pub class: TrafficClass,
}

/// A complete network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub aps: Vec<ApSite>,
    pub users: Vec<UserSite>,
    /// `γ̄[m][n]`, linear.
    pub mean_snr: Vec<Vec<f64>>,
    pub params: SystemParams,
    pub table: McsTable,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.aps.len(), self.users.len());
        if m == 0 || n < m {
            return Err(Error::param("scenario", format!("needs N >= M >= 1, got M={m}, N={n}")));
        }
        if self.mean_snr.len() != m || self.mean_snr.iter().any(|row| row.len() != n) {
            return Err(Error::param("mean_snr", "must be an M x N matrix"));
        }
        if self.mean_snr.iter().flatten().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::param("mean_snr", "entries must be positive and finite"));
        }
        let finite = |p: &[f64; 2]| p.iter().all(|c| c.is_finite());
        if !self.aps.iter().all(|a| finite(&a.position)) || !self.users.iter().all(|u| finite(&u.position)) {
            return Err(Error::param("position", "must be finite"));
        }
        self.params.validate()?;
        self.users.iter().try_for_each(|u| u.qos.validate(&self.params))
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws a scenario; the seed fixes everything.
pub fn generate_scenario(spec: &ScenarioSpec, params: SystemParams, table: McsTable) -> Result<Scenario> {
    if spec.aps == 0 || spec.users < spec.aps {
        return Err(Error::param(
            "scenario",
            format!("needs N >= M >= 1, got M={}, N={}", spec.aps, spec.users),
        ));
    }
    if !(spec.area_m > 0.0 && spec.area_m.is_finite()) {
        return Err(Error::param("area_m", "must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.embb_fraction) {
        return Err(Error::param("embb_fraction", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let place = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..spec.area_m), rng.random_range(0.0..spec.area_m)];
    let aps: Vec<ApSite> = (0..spec.aps)
        .map(|id| ApSite {
            id,
            position: place(&mut rng),
        })
        .collect();
    let n_embb = (spec.users as f64 * spec.embb_fraction).round() as usize;
    let mut classes: Vec<TrafficClass> = (0..spec.users)
        .map(|i| {
            if i < n_embb {
                TrafficClass::Embb
            } else {
                TrafficClass::Urllc
            }
        })
        .collect();
    classes.shuffle(&mut rng);
    let users: Vec<UserSite> = classes
        .into_iter()
        .enumerate()
        .map(|(id, class)| {
            let position = place(&mut rng);
            let ranges = match class {
                TrafficClass::Embb => &spec.embb,
                TrafficClass::Urllc => &spec.urllc,
            };
            UserSite {
                id,
                position,
                qos: ranges.sample(&mut rng, spec.decode_bler_threshold),
                class,
            }
        })
        .collect();
    let mean_snr = aps
        .iter()
        .map(|a| {
            users
                .iter()
                .map(|u| db_to_linear(spec.propagation.mean_snr_db(distance(a.position, u.position))))
                .collect()
        })
        .collect();
    let scenario = Scenario {
        aps,
        users,
        mean_snr,
        params,
        table,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make(spec: &ScenarioSpec) -> Scenario {
        generate_scenario(spec, SystemParams::default(), McsTable::nr_256qam()).unwrap()
    }

    #[test]
    fn path_loss_reference_points() {
        let p = Propagation::default();
        assert!((p.path_loss_db(1000.0) - 128.1).abs() < 1e-12);
        assert!((p.path_loss_db(100.0) - 90.5).abs() < 1e-12);
        assert_eq!(p.path_loss_db(1.0), p.path_loss_db(10.0));
        assert!((p.mean_snr_db(1000.0) - (30.0 - 128.1 + 92.0)).abs() < 1e-12);
    }

    #[test]
    fn single_pair() {
        let s = make(&ScenarioSpec {
            aps: 1,
            users: 1,
            ..ScenarioSpec::default()
        });
        let d = distance(s.aps[0].position, s.users[0].position);
        let expect = db_to_linear(Propagation::default().mean_snr_db(d));
        assert_eq!(s.mean_snr, vec![vec![expect]]);
    }

    #[test]
    fn seeded_and_in_range() {
        let spec = ScenarioSpec::default();
        let a = make(&spec);
        assert_eq!(a, make(&spec));
        assert_ne!(
            a,
            make(&ScenarioSpec {
                seed: 2,
                ..spec.clone()
            })
        );
        let embb = a.users.iter().filter(|u| u.class == TrafficClass::Embb).count();
        assert_eq!((embb, a.users.len() - embb), (20, 20));
        for u in &a.users {
            let r = if u.class == TrafficClass::Embb {
                spec.embb
            } else {
                spec.urllc
            };
            assert!(r.contains(&u.qos));
        }
    }

    #[test]
    fn rejects_bad_counts() {
        let p = SystemParams::default;
        let t = McsTable::nr_256qam;
        assert!(generate_scenario(
            &ScenarioSpec {
                aps: 0,
                ..Default::default()
            },
            p(),
            t()
        )
        .is_err());
        assert!(generate_scenario(
            &ScenarioSpec {
                aps: 5,
                users: 4,
                ..Default::default()
            },
            p(),
            t()
        )
        .is_err());
        assert!(generate_scenario(
            &ScenarioSpec {
                area_m: 0.0,
                ..Default::default()
            },
            p(),
            t()
        )
        .is_err());
    }
}
