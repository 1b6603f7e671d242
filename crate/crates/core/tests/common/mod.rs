#![allow(dead_code)]

use hvac_core::model::{AhuParams, Edge, ZoneParams};
use hvac_core::{Building, Exogenous};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn zone(t_init: f64) -> ZoneParams {
    ZoneParams {
        capacitance: 1375.0,
        r_out: 50.0,
        t_min: 24.0,
        t_max: 26.0,
        m_min: 0.0,
        m_max: 0.5,
        t_init,
    }
}

pub fn ahu(cap: f64) -> AhuParams {
    AhuParams {
        d_r: 0.8,
        eta: 1.0,
        kappa_f: 0.08,
        m_total_max: cap,
        c_p: 1.012,
    }
}

pub fn tou(hour: f64) -> f64 {
    match hour {
        h if h < 7.0 => 0.12,
        h if h < 11.0 => 0.18,
        h if h < 17.0 => 0.26,
        h if h < 21.0 => 0.18,
        _ => 0.12,
    }
}

/// Chain-plus-random-chords building with uniform loads, seeded.
pub fn random_instance(n: usize, h: usize, seed: u64) -> (Building, Exogenous) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zones = (0..n).map(|_| zone(rng.random_range(26.0..28.0))).collect();
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for i in 1..n {
        edges.push(Edge {
            a: i - 1,
            b: i,
            resistance: 14.0,
        });
        degree[i - 1] += 1;
        degree[i] += 1;
    }
    for _ in 0..n {
        if n < 3 {
            break;
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if b > a + 1 && degree[a] < 4 && degree[b] < 4 && !edges.iter().any(|e| e.a == a && e.b == b) {
            edges.push(Edge {
                a,
                b,
                resistance: 14.0,
            });
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    let start = rng.random_range(8.0..16.0);
    let hours: Vec<f64> = (0..h).map(|t| start + 0.5 * t as f64).collect();
    let model = Building::new(zones, edges, ahu(0.4 * n as f64), 1800.0, h).unwrap();
    let exo = Exogenous {
        t_out: hours
            .iter()
            .map(|hr| 30.0 + 4.0 * (2.0 * std::f64::consts::PI * (hr - 9.0) / 24.0).sin())
            .collect(),
        q_load: (0..n)
            .map(|_| (0..h).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect(),
        price: hours.iter().map(|&hr| tou(hr)).collect(),
        t_supply: vec![15.0; h],
    };
    (model, exo)
}
