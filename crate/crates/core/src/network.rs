//! Synthetic small-cell deployments and the received power profiles they
//! induce at user positions.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::chunk_rng;

/// Axis-aligned rectangle anchored at the origin, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width_m: f64,
    pub height_m: f64,
}

impl Area {
    pub fn new(width_m: f64, height_m: f64) -> Result<Self> {
        for (name, v) in [("area width", width_m), ("area height", height_m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        Ok(Area { width_m, height_m })
    }

    pub fn square_km(&self) -> f64 {
        self.width_m * self.height_m / 1e6
    }

    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }

    pub fn center(&self) -> Position {
        Position {
            x: 0.5 * self.width_m,
            y: 0.5 * self.height_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    pub position: Position,
    pub tx_power_w: f64,
}

/// How the number of stations follows from density and area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Exactly `ceil(density * area)` stations.
    #[default]
    Exact,
    /// Poisson-distributed count with mean `density * area`.
    Poisson,
}

/// A set of base stations uniformly scattered over an area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub area: Area,
    pub density_per_km2: f64,
    pub count_mode: CountMode,
    pub seed: u64,
    pub base_stations: Vec<BaseStation>,
}

/// Station count for a density and area; the small slack keeps products like
/// `100 * 0.01` from rounding up to 2.
pub fn station_count(density_per_km2: f64, area: &Area) -> usize {
    (density_per_km2 * area.square_km() - 1e-9).ceil().max(0.0) as usize
}

pub fn generate_deployment(
    density_per_km2: f64,
    area: Area,
    seed: u64,
    count_mode: CountMode,
    tx_power_w: f64,
) -> Result<Deployment> {
    if !(density_per_km2.is_finite() && density_per_km2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "density",
            value: density_per_km2,
        });
    }
    if !(tx_power_w.is_finite() && tx_power_w > 0.0) {
        return Err(Error::InvalidParameter {
            name: "transmit power",
            value: tx_power_w,
        });
    }
    let area = Area::new(area.width_m, area.height_m)?;
    let mut rng = chunk_rng(seed, 0);
    let count = match count_mode {
        CountMode::Exact => station_count(density_per_km2, &area),
        CountMode::Poisson => {
            let mean = density_per_km2 * area.square_km();
            Poisson::new(mean)
                .map_err(|_| Error::InvalidParameter {
                    name: "Poisson mean",
                    value: mean,
                })?
                .sample(&mut rng) as usize
        }
    };
    let base_stations = (0..count)
        .map(|i| BaseStation {
            id: i as u32,
            position: Position {
                x: rng.random::<f64>() * area.width_m,
                y: rng.random::<f64>() * area.height_m,
            },
            tx_power_w,
        })
        .collect();
    Ok(Deployment {
        area,
        density_per_km2,
        count_mode,
        seed,
        base_stations,
    })
}

/// Log-distance path loss with log-normal shadowing:
/// `g_dB(d) = -(intercept + slope * log10(d) + shadowing)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    pub pathloss_intercept_db: f64,
    /// Loss per decade of distance.
    pub pathloss_slope_db: f64,
    pub shadowing_stddev_db: f64,
    pub min_distance_m: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            pathloss_intercept_db: 34.53,
            pathloss_slope_db: 38.0,
            shadowing_stddev_db: 8.0,
            min_distance_m: 1.0,
        }
    }
}

/// Path gain in dB and whether the distance was clamped to the minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub db: f64,
    pub clamped: bool,
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("path-loss intercept", self.pathloss_intercept_db),
            ("path-loss slope", self.pathloss_slope_db),
            ("shadowing stddev", self.shadowing_stddev_db),
            ("minimum distance", self.min_distance_m),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if self.min_distance_m == 0.0 {
            return Err(Error::InvalidParameter {
                name: "minimum distance",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn path_gain_db(&self, distance_m: f64, shadowing_db: f64) -> PathGain {
        let clamped = distance_m < self.min_distance_m;
        let d = distance_m.max(self.min_distance_m);
        PathGain {
            db: -(self.pathloss_intercept_db + self.pathloss_slope_db * d.log10() + shadowing_db),
            clamped,
        }
    }
}

/// One entry of a received power profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceivedPower {
    pub bs_id: u32,
    /// Average received power `P_n = p_n g_n`, linear.
    pub power: f64,
}

/// Average received powers from every station at one user position, sorted
/// from strongest to weakest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedPowerProfile {
    pub user_position: Position,
    pub entries: Vec<ReceivedPower>,
    /// Number of links whose distance was clamped to the minimum.
    pub clamped_links: usize,
}

impl ReceivedPowerProfile {
    pub fn powers(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.power).collect()
    }

    pub fn candidates(&self) -> Vec<(u32, f64)> {
        self.entries.iter().map(|e| (e.bs_id, e.power)).collect()
    }

    pub fn strongest(&self) -> Option<&ReceivedPower> {
        self.entries.first()
    }
}

/// Profile with one independent shadowing draw per link, seeded by `seed`.
pub fn compute_profile(
    deployment: &Deployment,
    params: &PropagationParams,
    user_position: Position,
    seed: u64,
) -> Result<ReceivedPowerProfile> {
    params.validate()?;
    let mut rng = chunk_rng(seed, 0);
    let shadowing: Vec<f64> = if params.shadowing_stddev_db > 0.0 {
        let normal =
            Normal::new(0.0, params.shadowing_stddev_db).map_err(|_| Error::InvalidParameter {
                name: "shadowing stddev",
                value: params.shadowing_stddev_db,
            })?;
        (0..deployment.base_stations.len())
            .map(|_| normal.sample(&mut rng))
            .collect()
    } else {
        vec![0.0; deployment.base_stations.len()]
    };
    compute_profile_with_shadowing(deployment, params, user_position, &shadowing)
}

/// Profile with caller-supplied shadowing per station (in deployment order).
pub fn compute_profile_with_shadowing(
    deployment: &Deployment,
    params: &PropagationParams,
    user_position: Position,
    shadowing_db: &[f64],
) -> Result<ReceivedPowerProfile> {
    params.validate()?;
    if shadowing_db.len() != deployment.base_stations.len() {
        return Err(Error::InvalidParameter {
            name: "shadowing draw count",
            value: shadowing_db.len() as f64,
        });
    }
    if !deployment.area.contains(user_position) {
        return Err(Error::InvalidParameter {
            name: "user position",
            value: user_position.x,
        });
    }
    let mut clamped_links = 0;
    let mut entries = Vec::with_capacity(shadowing_db.len());
    for (bs, &delta) in deployment.base_stations.iter().zip(shadowing_db) {
        let gain = params.path_gain_db(bs.position.distance(&user_position), delta);
        clamped_links += usize::from(gain.clamped);
        let power = bs.tx_power_w * 10f64.powf(gain.db / 10.0);
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidPower {
                index: bs.id as usize,
                value: power,
            });
        }
        entries.push(ReceivedPower {
            bs_id: bs.id,
            power,
        });
    }
    entries.sort_by(|a, b| b.power.total_cmp(&a.power).then(a.bs_id.cmp(&b.bs_id)));
    Ok(ReceivedPowerProfile {
        user_position,
        entries,
        clamped_links,
    })
}

/// Square region of side `side_m` centred in `area`, where users are placed
/// so that every user sees interferers on all sides.
pub fn central_region(area: &Area, side_m: f64) -> (Position, Position) {
    let c = area.center();
    let hw = 0.5 * side_m.min(area.width_m);
    let hh = 0.5 * side_m.min(area.height_m);
    (
        Position {
            x: c.x - hw,
            y: c.y - hh,
        },
        Position {
            x: c.x + hw,
            y: c.y + hh,
        },
    )
}

/// `count` user positions uniform over the central region.
pub fn sample_user_positions(area: &Area, side_m: f64, count: usize, seed: u64) -> Vec<Position> {
    let (lo, hi) = central_region(area, side_m);
    let mut rng = chunk_rng(seed, 0);
    (0..count)
        .map(|_| Position {
            x: lo.x + rng.random::<f64>() * (hi.x - lo.x),
            y: lo.y + rng.random::<f64>() * (hi.y - lo.y),
        })
        .collect()
}
