//! Network geometry, large-scale fading and block-fading channel draws.
//!
//! APs and served UEs are placed uniformly over a `D x D` km square. OCL
//! interferers either share the square (`InSquare`) or fall in the surrounding
//! frame between the cluster square and the concentric `2D x 2D` square
//! (`SurroundingRing`), which models interferers served by neighboring
//! clusters. Large-scale coefficients follow the 3GPP Urban Microcell model
//! `beta[dB] = -30.5 - 36.7 log10(d / 1m) + shadow`, with log-normal shadow
//! fading, and small-scale fading is uncorrelated Rayleigh, constant over one
//! coherence block.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{crandn, CMat};
use crate::rng::{self, derive_rng};
use crate::{Error, Result};

/// Reference distance of the pathloss model; distances are clamped to it.
pub const MIN_DISTANCE_KM: f64 = 1.0e-3;

/// Where OCL interferers are placed relative to the cluster square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OclPlacement {
    /// Uniform over the cluster square itself.
    InSquare,
    /// Uniform over the frame `[2D x 2D] \ [D x D]` around the cluster.
    SurroundingRing,
}

/// Static description of one cluster and its interference environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of APs (`L`).
    pub ap_count: usize,
    /// Antennas per AP (`N`).
    pub antennas_per_ap: usize,
    /// Served single-antenna UEs (`K`).
    pub ue_count: usize,
    /// Out-of-cluster interferers (`M`).
    pub ocl_count: usize,
    /// Cluster square side length in km (`D`).
    pub side_km: f64,
    /// Pathloss at the 1 m reference distance, dB.
    pub pathloss_offset_db: f64,
    /// Pathloss slope in dB per decade of distance.
    pub pathloss_exponent_coeff: f64,
    /// Shadow fading standard deviation, dB.
    pub shadow_std_db: f64,
    pub ocl_placement: OclPlacement,
    /// OCL transmit power in W. Folded into the effective large-scale
    /// coefficients, so `beta_ocl` describes pathloss times transmit power.
    pub ocl_power_w: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            ap_count: 32,
            antennas_per_ap: 4,
            ue_count: 8,
            ocl_count: 4,
            side_km: 1.0,
            pathloss_offset_db: -30.5,
            pathloss_exponent_coeff: 36.7,
            shadow_std_db: 4.0,
            ocl_placement: OclPlacement::SurroundingRing,
            ocl_power_w: 1.0,
        }
    }
}

impl NetworkConfig {
    /// Total receive antennas `N * L`.
    pub fn total_antennas(&self) -> usize {
        self.ap_count * self.antennas_per_ap
    }

    pub fn validate(&self) -> Result<()> {
        if self.ap_count < 1 || self.antennas_per_ap < 1 || self.ue_count < 1 || self.ocl_count < 1
        {
            return Err(Error::Config(
                "ap_count, antennas_per_ap, ue_count and ocl_count must all be >= 1".into(),
            ));
        }
        if !(self.side_km > 0.0) {
            return Err(Error::Config("side_km must be positive".into()));
        }
        if self.shadow_std_db < 0.0 {
            return Err(Error::Config("shadow_std_db must be non-negative".into()));
        }
        if !(self.ocl_power_w > 0.0) {
            return Err(Error::Config("ocl_power_w must be positive".into()));
        }
        Ok(())
    }
}

/// Geometry, large-scale coefficients and channels for one coherence block.
///
/// `channel_ue` stacks the per-AP blocks vertically: rows `l*N .. (l+1)*N`
/// belong to AP `l`. Column `k` holds UE `k`'s channel to every AP antenna.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub ocl_positions: Vec<[f64; 2]>,
    /// Large-scale coefficients AP x UE, linear scale.
    pub beta_ue: Vec<Vec<f64>>,
    /// Large-scale coefficients AP x interferer, linear scale.
    pub beta_ocl: Vec<Vec<f64>>,
    /// Serving channel matrix `H`, `N*L x K`.
    pub channel_ue: CMat,
    /// Interference channel matrix `G`, `N*L x M`.
    pub channel_ocl: CMat,
    pub antennas_per_ap: usize,
}

/// 3GPP UMi pathloss with an externally drawn shadow term, in dB.
///
/// Distances below the 1 m reference are clamped to it.
pub fn pathloss_db(d_km: f64, config: &NetworkConfig, shadow_db: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d_km} km")));
    }
    let d_m = d_km.max(MIN_DISTANCE_KM) * 1000.0;
    Ok(config.pathloss_offset_db - config.pathloss_exponent_coeff * d_m.log10() + shadow_db)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn uniform_in_square<R: Rng + ?Sized>(side: f64, rng: &mut R) -> [f64; 2] {
    [rng.random_range(0.0..side), rng.random_range(0.0..side)]
}

/// Rejection-sample a point in the `[2D x 2D] \ [D x D]` concentric frame.
fn uniform_in_ring<R: Rng + ?Sized>(side: f64, rng: &mut R) -> [f64; 2] {
    loop {
        let x = rng.random_range(-0.5 * side..1.5 * side);
        let y = rng.random_range(-0.5 * side..1.5 * side);
        let inside = (0.0..=side).contains(&x) && (0.0..=side).contains(&y);
        if !inside {
            return [x, y];
        }
    }
}

/// Draw AP, UE and interferer positions. Betas and channels are left empty.
pub fn place_nodes(config: &NetworkConfig, seed: u64) -> Result<NetworkScenario> {
    config.validate()?;
    let mut rng = derive_rng(seed, &[rng::label::GEOMETRY]);
    let side = config.side_km;
    let ap_positions = (0..config.ap_count)
        .map(|_| uniform_in_square(side, &mut rng))
        .collect();
    let ue_positions = (0..config.ue_count)
        .map(|_| uniform_in_square(side, &mut rng))
        .collect();
    let ocl_positions = (0..config.ocl_count)
        .map(|_| match config.ocl_placement {
            OclPlacement::InSquare => uniform_in_square(side, &mut rng),
            OclPlacement::SurroundingRing => uniform_in_ring(side, &mut rng),
        })
        .collect();
    Ok(NetworkScenario {
        ap_positions,
        ue_positions,
        ocl_positions,
        beta_ue: Vec::new(),
        beta_ocl: Vec::new(),
        channel_ue: CMat::zeros(0, 0),
        channel_ocl: CMat::zeros(0, 0),
        antennas_per_ap: config.antennas_per_ap,
    })
}

impl NetworkScenario {
    /// Fill the large-scale coefficient tables with fresh shadowing draws.
    pub fn fill_large_scale(&mut self, config: &NetworkConfig, seed: u64) -> Result<()> {
        let mut rng = derive_rng(seed, &[rng::label::SHADOWING]);
        let shadow = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            z * config.shadow_std_db
        };
        let beta_for = |nodes: &[[f64; 2]], rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vec<Vec<f64>>> {
            self.ap_positions
                .iter()
                .map(|&ap| {
                    nodes
                        .iter()
                        .map(|&node| {
                            let db = pathloss_db(
                                distance(ap, node).max(MIN_DISTANCE_KM),
                                config,
                                shadow(rng),
                            )?;
                            Ok(10f64.powf(db / 10.0))
                        })
                        .collect()
                })
                .collect()
        };
        self.beta_ue = beta_for(&self.ue_positions, &mut rng)?;
        self.beta_ocl = beta_for(&self.ocl_positions, &mut rng)?;
        if config.ocl_power_w != 1.0 {
            for row in &mut self.beta_ocl {
                for beta in row.iter_mut() {
                    *beta *= config.ocl_power_w;
                }
            }
        }
        Ok(())
    }

    /// Draw one block-fading realization of `H` and `G`.
    ///
    /// Entry `(l*N + n, k)` is `sqrt(beta[l][k]) * CN(0,1)`, i.i.d. across
    /// antennas, APs and nodes.
    pub fn draw_channels(&mut self, config: &NetworkConfig, seed: u64) -> Result<()> {
        if self.beta_ue.is_empty() {
            return Err(Error::Config(
                "large-scale coefficients must be filled before drawing channels".into(),
            ));
        }
        let mut rng = derive_rng(seed, &[rng::label::CHANNEL]);
        let n = config.antennas_per_ap;
        let nl = config.total_antennas();
        let mut draw = |betas: &[Vec<f64>], cols: usize| -> CMat {
            let mut m = CMat::zeros(nl, cols);
            for (l, row) in betas.iter().enumerate() {
                for (k, &beta) in row.iter().enumerate() {
                    let scale = beta.sqrt();
                    for a in 0..n {
                        m[(l * n + a, k)] = crandn(&mut rng) * scale;
                    }
                }
            }
            m
        };
        self.channel_ue = draw(&self.beta_ue, config.ue_count);
        self.channel_ocl = draw(&self.beta_ocl, config.ocl_count);
        Ok(())
    }

    /// Full scenario: placement, large-scale fading and one channel draw.
    pub fn generate(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let mut scenario = place_nodes(config, seed)?;
        scenario.fill_large_scale(config, seed)?;
        scenario.draw_channels(config, seed)?;
        Ok(scenario)
    }

    pub fn total_antennas(&self) -> usize {
        self.ap_positions.len() * self.antennas_per_ap
    }

    /// Serialize to the JSON fixture format (complex entries interleaved re/im).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScenarioFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

fn cmat_to_interleaved(m: &CMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len() * 2);
    for col in m.column_iter() {
        for z in col.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn cmat_from_interleaved(rows: usize, cols: usize, data: &[f64]) -> Result<CMat> {
    if data.len() != rows * cols * 2 {
        return Err(Error::Dimension(format!(
            "expected {} interleaved values for a {rows}x{cols} matrix, got {}",
            rows * cols * 2,
            data.len()
        )));
    }
    let mut m = CMat::zeros(rows, cols);
    let mut it = data.chunks_exact(2);
    for c in 0..cols {
        for r in 0..rows {
            let pair = it.next().unwrap();
            m[(r, c)] = Complex64::new(pair[0], pair[1]);
        }
    }
    Ok(m)
}

/// On-disk scenario representation for regression fixtures.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    ap_positions: Vec<[f64; 2]>,
    ue_positions: Vec<[f64; 2]>,
    ocl_positions: Vec<[f64; 2]>,
    beta_ue: Vec<Vec<f64>>,
    beta_ocl: Vec<Vec<f64>>,
    antennas_per_ap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel_ue: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel_ocl: Option<Vec<f64>>,
}

impl From<&NetworkScenario> for ScenarioFile {
    fn from(s: &NetworkScenario) -> Self {
        let has_channels = s.channel_ue.len() > 0;
        Self {
            ap_positions: s.ap_positions.clone(),
            ue_positions: s.ue_positions.clone(),
            ocl_positions: s.ocl_positions.clone(),
            beta_ue: s.beta_ue.clone(),
            beta_ocl: s.beta_ocl.clone(),
            antennas_per_ap: s.antennas_per_ap,
            channel_ue: has_channels.then(|| cmat_to_interleaved(&s.channel_ue)),
            channel_ocl: has_channels.then(|| cmat_to_interleaved(&s.channel_ocl)),
        }
    }
}

impl TryFrom<ScenarioFile> for NetworkScenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let nl = f.ap_positions.len() * f.antennas_per_ap;
        let (channel_ue, channel_ocl) = match (&f.channel_ue, &f.channel_ocl) {
            (Some(h), Some(g)) => (
                cmat_from_interleaved(nl, f.ue_positions.len(), h)?,
                cmat_from_interleaved(nl, f.ocl_positions.len(), g)?,
            ),
            _ => (CMat::zeros(0, 0), CMat::zeros(0, 0)),
        };
        Ok(Self {
            ap_positions: f.ap_positions,
            ue_positions: f.ue_positions,
            ocl_positions: f.ocl_positions,
            beta_ue: f.beta_ue,
            beta_ocl: f.beta_ocl,
            channel_ue,
            channel_ocl,
            antennas_per_ap: f.antennas_per_ap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> NetworkConfig {
        NetworkConfig {
            ap_count: 4,
            antennas_per_ap: 2,
            ue_count: 3,
            ocl_count: 2,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn placement_stays_in_square() {
        let cfg = small_config();
        let s = place_nodes(&cfg, 11).unwrap();
        for p in s.ue_positions.iter().chain(&s.ap_positions) {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = small_config();
        let a = place_nodes(&cfg, 7).unwrap();
        let b = place_nodes(&cfg, 7).unwrap();
        assert_eq!(a.ue_positions, b.ue_positions);
        assert_eq!(a.ap_positions, b.ap_positions);
        assert_eq!(a.ocl_positions, b.ocl_positions);
    }

    #[test]
    fn ring_points_avoid_inner_square() {
        let cfg = NetworkConfig {
            ocl_count: 200,
            ocl_placement: OclPlacement::SurroundingRing,
            ..small_config()
        };
        let s = place_nodes(&cfg, 3).unwrap();
        for p in &s.ocl_positions {
            let in_outer = (-0.5..=1.5).contains(&p[0]) && (-0.5..=1.5).contains(&p[1]);
            let in_inner = (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]);
            assert!(in_outer && !in_inner, "point {p:?} outside the frame");
        }
    }

    #[test]
    fn ring_matches_rejection_oracle_by_region() {
        // Compare occupancy of the four frame edge strips against an
        // independent rejection sampler.
        let cfg = NetworkConfig {
            ocl_count: 20_000,
            ocl_placement: OclPlacement::SurroundingRing,
            ..small_config()
        };
        let s = place_nodes(&cfg, 5).unwrap();
        let region = |p: &[f64; 2]| -> usize {
            match (p[0] < 0.0, p[0] > 1.0, p[1] < 0.0, p[1] > 1.0) {
                (true, _, _, _) => 0,
                (_, true, _, _) => 1,
                (_, _, true, _) => 2,
                _ => 3,
            }
        };
        let mut counts = [0usize; 4];
        for p in &s.ocl_positions {
            counts[region(p)] += 1;
        }
        // Oracle: rejection sampling with a separate RNG.
        let mut rng = crate::rng::derive_rng(999, &[1]);
        let mut oracle = [0usize; 4];
        for _ in 0..20_000 {
            let p = uniform_in_ring(1.0, &mut rng);
            oracle[region(&p)] += 1;
        }
        for i in 0..4 {
            let a = counts[i] as f64 / 20_000.0;
            let b = oracle[i] as f64 / 20_000.0;
            assert!((a - b).abs() < 0.02, "region {i}: {a} vs oracle {b}");
        }
    }

    #[test]
    fn pathloss_reference_points() {
        let cfg = NetworkConfig::default();
        assert!((pathloss_db(0.001, &cfg, 0.0).unwrap() - (-30.5)).abs() < 1e-12);
        assert!((pathloss_db(0.010, &cfg, 0.0).unwrap() - (-67.2)).abs() < 1e-12);
        // -30.5 - 36.7*2 + 4 = -99.9
        assert!((pathloss_db(0.100, &cfg, 4.0).unwrap() - (-99.9)).abs() < 1e-9);
    }

    #[test]
    fn pathloss_rejects_nonpositive_distance() {
        let cfg = NetworkConfig::default();
        assert!(pathloss_db(0.0, &cfg, 0.0).is_err());
        assert!(pathloss_db(-1.0, &cfg, 0.0).is_err());
    }

    #[test]
    fn pathloss_is_strictly_decreasing() {
        let cfg = NetworkConfig::default();
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let d = 0.001 + 0.01 * i as f64;
            let v = pathloss_db(d, &cfg, 0.0).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn channel_draws_are_deterministic_and_scaled() {
        let cfg = small_config();
        let a = NetworkScenario::generate(&cfg, 21).unwrap();
        let b = NetworkScenario::generate(&cfg, 21).unwrap();
        assert_eq!(a.channel_ue, b.channel_ue);
        assert_eq!(a.channel_ocl, b.channel_ocl);
    }

    #[test]
    fn channel_moment_matches_beta() {
        // Monte Carlo second-moment check on a single AP block.
        let cfg = NetworkConfig {
            ap_count: 1,
            antennas_per_ap: 1,
            ue_count: 1,
            ocl_count: 1,
            ..NetworkConfig::default()
        };
        let mut scenario = place_nodes(&cfg, 2).unwrap();
        scenario.beta_ue = vec![vec![3.7e-9]];
        scenario.beta_ocl = vec![vec![1.0e-10]];
        let trials = 100_000;
        let mut acc = 0.0;
        for t in 0..trials {
            scenario.draw_channels(&cfg, 1000 + t).unwrap();
            acc += scenario.channel_ue[(0, 0)].norm_sqr();
        }
        let mean = acc / trials as f64;
        let rel = (mean - 3.7e-9).abs() / 3.7e-9;
        assert!(rel < 0.03, "relative moment error {rel}");
    }

    #[test]
    fn zero_beta_gives_zero_column() {
        let cfg = small_config();
        let mut s = place_nodes(&cfg, 2).unwrap();
        s.fill_large_scale(&cfg, 2).unwrap();
        for row in s.beta_ue.iter_mut() {
            row[0] = 0.0;
        }
        s.draw_channels(&cfg, 2).unwrap();
        assert!(s.channel_ue.column(0).iter().all(|z| z.norm_sqr() == 0.0));
    }

    #[test]
    fn scenario_json_round_trip() {
        let cfg = small_config();
        let s = NetworkScenario::generate(&cfg, 77).unwrap();
        let text = s.to_json().unwrap();
        let back = NetworkScenario::from_json(&text).unwrap();
        assert_eq!(s.ue_positions, back.ue_positions);
        assert_eq!(s.beta_ue, back.beta_ue);
        assert_eq!(s.channel_ue, back.channel_ue);
        assert_eq!(s.channel_ocl, back.channel_ocl);
    }
}
