//! Seeded scenario generation and the scenario document format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use hvac_core::model::{AhuParams, BuildingModel, Edge, ExogenousSeries, ModelError, ZoneParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot build a connected graph of {n_zones} zones with maximum degree {max_degree}")]
    DegreeUnsatisfiable { n_zones: usize, max_degree: usize },
    #[error("scenario needs at least one zone")]
    NoZones,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("failed to parse scenario document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to write scenario document: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Generator parameters. Defaults reproduce the desk-scale experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub horizon: usize,
    /// Step length [s].
    pub dt: f64,
    pub max_degree: usize,
    /// Random extra-edge attempts per zone after the spanning tree.
    pub extra_edge_rate: f64,
    pub r_coupling: f64,
    pub r_out: f64,
    pub capacitance: f64,
    pub kappa_f: f64,
    pub eta: f64,
    pub d_r: f64,
    pub c_p: f64,
    pub m_min: f64,
    pub m_max: f64,
    /// AHU cap per zone [kg/s]; the building cap is this times the zone count.
    pub m_total_per_zone: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_supply: f64,
    /// Uniform range of internal heat gains [kW].
    pub load_range: (f64, f64),
    /// Uniform range of initial zone temperatures [°C].
    pub init_range: (f64, f64),
    /// Fixed initial temperatures, overriding the random draw.
    pub initial_temps: Option<Vec<f64>>,
    /// Hour of day at stage 0.
    pub start_hour: f64,
    /// Per-stage price series replacing the default tariff.
    pub price: Option<Vec<f64>>,
    /// Per-stage outdoor temperature replacing the default profile.
    pub t_out: Option<Vec<f64>>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            horizon: 48,
            dt: 1800.0,
            max_degree: 4,
            extra_edge_rate: 1.0,
            r_coupling: 14.0,
            r_out: 50.0,
            capacitance: 1375.0,
            kappa_f: 0.08,
            eta: 1.0,
            d_r: 0.8,
            c_p: 1.012,
            m_min: 0.0,
            m_max: 0.5,
            m_total_per_zone: 0.4,
            t_min: 24.0,
            t_max: 26.0,
            t_supply: 15.0,
            load_range: (0.0, 1.0),
            init_range: (26.0, 28.0),
            initial_temps: None,
            start_hour: 0.0,
            price: None,
            t_out: None,
        }
    }
}

/// Time-of-use tariff [currency/kWh] at hour of day `h`: off-peak overnight,
/// a morning step up, an afternoon peak, and evening steps down.
pub fn default_price(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    match h {
        h if h < 7.0 => 0.12,
        h if h < 11.0 => 0.18,
        h if h < 17.0 => 0.26,
        h if h < 21.0 => 0.18,
        _ => 0.12,
    }
}

/// Outdoor temperature [°C] at hour of day `h`: 30 °C mean, ±4 °C swing,
/// peaking at 15:00.
pub fn default_outdoor_temp(hour: f64) -> f64 {
    30.0 + 4.0 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin()
}

/// Generated or loaded instance with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub generator: GeneratorParams,
    pub building: BuildingModel,
    pub exogenous: ExogenousSeries,
}

impl Scenario {
    pub fn n_zones(&self) -> usize {
        self.building.n_zones()
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.exogenous.validate(&s.building)?;
        Ok(s)
    }

    /// Same scenario over a shorter horizon starting at stage 0.
    pub fn truncated(&self, horizon: usize) -> Result<Self, ScenarioError> {
        let mut s = self.clone();
        s.building = self.building.with_horizon(horizon)?;
        s.exogenous = self.exogenous.window(0, horizon)?;
        s.generator.horizon = horizon;
        Ok(s)
    }
}

/// Random connected graph with every degree at most `max_degree`: a spanning
/// tree by uniform attachment to earlier zones (rejecting full ones), then
/// random extra edges between zones that still have capacity.
pub fn random_topology(
    n: usize,
    max_degree: usize,
    extra_edge_rate: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::NoZones);
    }
    if (n > 1 && max_degree == 0) || (n > 2 && max_degree < 2) {
        return Err(ScenarioError::DegreeUnsatisfiable { n_zones: n, max_degree });
    }
    let mut degree = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        let parent = loop {
            let p = rng.random_range(0..k);
            if degree[p] < max_degree {
                break p;
            }
        };
        degree[parent] += 1;
        degree[k] += 1;
        edges.push((parent, k));
    }
    let attempts = (extra_edge_rate * n as f64).round() as usize;
    if n > 2 {
        for _ in 0..attempts {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (a, b) = (a.min(b), a.max(b));
            if a == b || degree[a] >= max_degree || degree[b] >= max_degree || edges.contains(&(a, b)) {
                continue;
            }
            degree[a] += 1;
            degree[b] += 1;
            edges.push((a, b));
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

pub fn generate_scenario(n_zones: usize, seed: u64, params: &GeneratorParams) -> Result<Scenario, ScenarioError> {
    if n_zones == 0 {
        return Err(ScenarioError::NoZones);
    }
    let h = params.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_topology(n_zones, params.max_degree, params.extra_edge_rate, &mut rng)?;
    let init: Vec<f64> = match &params.initial_temps {
        Some(v) if v.len() == n_zones => v.clone(),
        Some(v) => {
            return Err(ScenarioError::Invalid(format!(
                "{} initial temperatures given for {n_zones} zones",
                v.len()
            )))
        }
        None => (0..n_zones)
            .map(|_| rng.random_range(params.init_range.0..=params.init_range.1))
            .collect(),
    };
    let (q_lo, q_hi) = params.load_range;
    let q_load: Vec<Vec<f64>> = (0..n_zones)
        .map(|_| (0..h).map(|_| q_lo + (q_hi - q_lo) * rng.random::<f64>()).collect())
        .collect();
    let hours: Vec<f64> = (0..h).map(|t| params.start_hour + t as f64 * params.dt / 3600.0).collect();
    let series = |given: &Option<Vec<f64>>, f: fn(f64) -> f64, name: &str| -> Result<Vec<f64>, ScenarioError> {
        match given {
            Some(v) if v.len() == h => Ok(v.clone()),
            Some(v) => Err(ScenarioError::Invalid(format!("{name} has {} entries, horizon is {h}", v.len()))),
            None => Ok(hours.iter().map(|&x| f(x)).collect()),
        }
    };
    let price = series(&params.price, default_price, "price")?;
    let t_out = series(&params.t_out, default_outdoor_temp, "t_out")?;
    let zones = init
        .iter()
        .map(|&t_init| ZoneParams {
            capacitance: params.capacitance,
            r_out: params.r_out,
            t_min: params.t_min,
            t_max: params.t_max,
            m_min: params.m_min,
            m_max: params.m_max,
            t_init,
        })
        .collect();
    let ahu = AhuParams {
        d_r: params.d_r,
        eta: params.eta,
        kappa_f: params.kappa_f,
        m_total_max: params.m_total_per_zone * n_zones as f64,
        c_p: params.c_p,
    };
    let coupling = edges
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            resistance: params.r_coupling,
        })
        .collect();
    let building = BuildingModel::new(zones, coupling, ahu, params.dt, h)?;
    let exogenous = ExogenousSeries {
        t_out,
        q_load,
        price,
        t_supply: vec![params.t_supply; h],
    };
    exogenous.validate(&building)?;
    Ok(Scenario {
        seed,
        generator: params.clone(),
        building,
        exogenous,
    })
}
