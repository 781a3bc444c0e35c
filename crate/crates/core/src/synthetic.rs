//! Seeded synthetic radio maps for smoke tests and offline reproduction.
//!
//! Fingerprints come from a log-distance path-loss model with per-floor
//! slab attenuation, an extra exterior-wall loss between buildings, and
//! log-normal shadowing. Readings weaker than the detection threshold are
//! reported as not detected, as a phone scan would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{RadioMap, NOT_DETECTED};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub buildings: u32,
    pub floors: u32,
    pub n_aps: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Building footprint, metres.
    pub width: f64,
    pub depth: f64,
    /// Gap between neighbouring buildings, metres.
    pub spacing: f64,
    pub floor_height: f64,
    /// RSS at 1 m, dBm.
    pub tx_power: f64,
    pub path_loss_exponent: f64,
    /// Attenuation per floor slab crossed, dB.
    pub floor_loss: f64,
    /// Attenuation for leaving one building and entering another, dB.
    pub wall_loss: f64,
    /// Shadowing standard deviation, dB.
    pub shadowing: f64,
    /// Weakest reported reading, dBm.
    pub detection_threshold: f64,
    /// Probability that a detectable AP is missing from a scan.
    pub miss_rate: f64,
}

impl Default for SyntheticConfig {
    /// 3 buildings x 4 floors, 100 APs, 2000 reference fingerprints.
    fn default() -> Self {
        Self {
            buildings: 3,
            floors: 4,
            n_aps: 100,
            train_size: 2000,
            test_size: 500,
            width: 60.0,
            depth: 40.0,
            spacing: 30.0,
            floor_height: 3.5,
            tx_power: -35.0,
            path_loss_exponent: 3.0,
            floor_loss: 12.0,
            wall_loss: 15.0,
            shadowing: 6.0,
            detection_threshold: -100.0,
            miss_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct AccessPoint {
    building: u32,
    pos: [f64; 3],
}

/// Name under which the default synthetic dataset is exposed.
pub const SYNTHETIC_NAME: &str = "SYNTH";

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.buildings == 0 || self.floors == 0 || self.n_aps == 0 {
            return Err(Error::Config(
                "synthetic map needs at least one building, floor and AP".into(),
            ));
        }
        if !(self.shadowing.is_finite() && self.shadowing >= 0.0)
            || !(0.0..1.0).contains(&self.miss_rate)
        {
            return Err(Error::Config("invalid synthetic noise parameters".into()));
        }
        Ok(())
    }

    fn origin(&self, building: u32) -> f64 {
        building as f64 * (self.width + self.spacing)
    }

    fn random_point(&self, rng: &mut impl Rng, building: u32, z: f64) -> [f64; 3] {
        [
            self.origin(building) + rng.random::<f64>() * self.width,
            rng.random::<f64>() * self.depth,
            z,
        ]
    }

    /// Generates `(train, test)` maps. The AP layout is shared; reference
    /// and query positions are drawn independently.
    pub fn generate(&self, seed: u64) -> Result<(RadioMap, RadioMap)> {
        self.validate()?;
        let mut layout_rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = self.buildings as usize * self.floors as usize;
        let aps: Vec<AccessPoint> = (0..self.n_aps)
            .map(|i| {
                // Contiguous column blocks per (building, floor) cell, as
                // when APs are enumerated while surveying one site at a time.
                let cell = i * cells / self.n_aps;
                let building = (cell / self.floors as usize) as u32;
                let floor = (cell % self.floors as usize) as u32;
                let z = floor as f64 * self.floor_height + 2.5;
                AccessPoint {
                    building,
                    pos: self.random_point(&mut layout_rng, building, z),
                }
            })
            .collect();

        let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
        train_rng.set_stream(1);
        let mut test_rng = ChaCha8Rng::seed_from_u64(seed);
        test_rng.set_stream(2);
        let train = self.sample(&aps, self.train_size, &mut train_rng, "SYNTH-train")?;
        let test = self.sample(&aps, self.test_size, &mut test_rng, "SYNTH-test")?;
        Ok((train, test))
    }

    fn sample(
        &self,
        aps: &[AccessPoint],
        count: usize,
        rng: &mut ChaCha8Rng,
        name: &str,
    ) -> Result<RadioMap> {
        let noise = Normal::new(0.0, self.shadowing).map_err(|e| Error::Config(e.to_string()))?;
        let mut rss = Vec::with_capacity(count * aps.len());
        let mut buildings = Vec::with_capacity(count);
        let mut floors = Vec::with_capacity(count);
        for _ in 0..count {
            let building = rng.random_range(0..self.buildings);
            let floor = rng.random_range(0..self.floors);
            let z = floor as f64 * self.floor_height + 1.2;
            let p = self.random_point(rng, building, z);
            for ap in aps {
                let d = ((p[0] - ap.pos[0]).powi(2)
                    + (p[1] - ap.pos[1]).powi(2)
                    + (p[2] - ap.pos[2]).powi(2))
                .sqrt()
                .max(1.0);
                let ap_floor = ((ap.pos[2] - 2.5) / self.floor_height).round();
                let slabs = (ap_floor - floor as f64).abs();
                let walls = if ap.building == building { 0.0 } else { 1.0 };
                let mut v = self.tx_power
                    - 10.0 * self.path_loss_exponent * d.log10()
                    - self.floor_loss * slabs
                    - self.wall_loss * walls
                    + noise.sample(rng);
                let missed = rng.random::<f64>() < self.miss_rate;
                v = v.round().min(-1.0);
                rss.push(if missed || v < self.detection_threshold {
                    NOT_DETECTED
                } else {
                    v
                });
            }
            buildings.push(building);
            floors.push(floor);
        }
        let rss = DenseMatrix::new(count, aps.len(), rss)?;
        let building = (self.buildings > 1).then_some(buildings);
        RadioMap::new(name, rss, building, floors)
    }
}
