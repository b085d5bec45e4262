//! Closed-form FMCW beat-signal synthesis for point and distributed targets
//! seen by a MIMO linear array, and the multistatic-to-monostatic phase
//! correction.
//!
//! Everything is expressed in the wavenumber domain: a chirp sweeping
//! `f0 .. f0 + B` is sampled at `n_k` uniformly spaced wavenumbers
//! `k = 2πf/c`, and a point scatterer with reflectivity `σ` contributes
//! `σ / (R_T R_R) · exp(j k (R_T + R_R))` to the pair `(tx, rx)`. The residual
//! video phase term is not modelled.
//!
//! Coordinates: the array lies along `y` at `x = 0` in the plane `z = z_plane`.
//! Targets sit in front of it at `z > z_plane`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Propagation speed, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirp and sampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    /// Start frequency, Hz.
    pub f0: f64,
    /// Chirp slope, Hz/s.
    pub slope: f64,
    /// Chirp duration, s.
    pub duration: f64,
    /// Swept bandwidth, Hz. Always `slope * duration`.
    pub bandwidth: f64,
    /// Wavenumber samples per chirp.
    pub n_k: usize,
}

impl Default for RadarConfig {
    /// 77 GHz start, 4 GHz over 40 µs, 256 wavenumber samples.
    fn default() -> Self {
        Self::new(77e9, 4e9 / 40e-6, 40e-6, 256).expect("default radar config is valid")
    }
}

impl RadarConfig {
    pub fn new(f0: f64, slope: f64, duration: f64, n_k: usize) -> Result<Self> {
        let cfg = Self {
            f0,
            slope,
            duration,
            bandwidth: slope * duration,
            n_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config from start frequency and bandwidth, keeping the default 40 µs chirp.
    pub fn with_bandwidth(f0: f64, bandwidth: f64, n_k: usize) -> Result<Self> {
        let duration = 40e-6;
        Self::new(f0, bandwidth / duration, duration, n_k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::Config(format!(
                "start frequency must be positive, got {}",
                self.f0
            )));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        let implied = self.slope * self.duration;
        if ((implied - self.bandwidth) / self.bandwidth).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "bandwidth {} disagrees with slope x duration = {}",
                self.bandwidth, implied
            )));
        }
        if self.n_k < 2 {
            return Err(Error::Config(format!(
                "need at least 2 wavenumber samples, got {}",
                self.n_k
            )));
        }
        Ok(())
    }

    /// Carrier wavelength at the start frequency, m.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0
    }

    /// Nominal range resolution `c / (2B)`, m.
    pub fn range_bin_spacing(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// First wavenumber and uniform step of the sampling grid, rad/m.
    pub fn wavenumber_start_step(&self) -> (f64, f64) {
        let two_pi_over_c = 2.0 * std::f64::consts::PI / SPEED_OF_LIGHT;
        (
            two_pi_over_c * self.f0,
            two_pi_over_c * self.bandwidth / (self.n_k - 1) as f64,
        )
    }

    /// Wavenumber at the middle of the sweep, rad/m.
    pub fn center_wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.f0 + 0.5 * self.bandwidth) / SPEED_OF_LIGHT
    }
}

/// Wavenumber samples `k_i = 2π(f0 + i·B/(n_k−1))/c`.
pub fn wavenumber_grid(config: &RadarConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let step = config.bandwidth / (config.n_k - 1) as f64;
    let scale = 2.0 * std::f64::consts::PI / SPEED_OF_LIGHT;
    Ok((0..config.n_k).map(|i| scale * (config.f0 + i as f64 * step)).collect())
}

/// One transmitter/receiver pair of a linear array along `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPair {
    pub tx_y: f64,
    pub rx_y: f64,
    pub z_plane: f64,
}

impl AntennaPair {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.tx_y + self.rx_y)
    }

    pub fn separation(&self) -> f64 {
        (self.tx_y - self.rx_y).abs()
    }

    /// Transmit and receive path lengths to a target.
    pub fn ranges(&self, target: &PointTarget) -> (f64, f64) {
        let dz = target.z - self.z_plane;
        let base = target.x * target.x + dz * dz;
        let dt = target.y - self.tx_y;
        let dr = target.y - self.rx_y;
        ((base + dt * dt).sqrt(), (base + dr * dr).sqrt())
    }
}

/// Physical transmitter and receiver positions of a linear MIMO array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub tx_y: Vec<f64>,
    pub rx_y: Vec<f64>,
    /// Offset of the array plane along `z`, m.
    pub z_plane: f64,
}

impl ArrayGeometry {
    /// Two transmitters and four receivers whose pair midpoints form eight
    /// virtual elements at `λ/4` spacing, centred on `y = 0`.
    pub fn default_for(config: &RadarConfig) -> Self {
        let d = config.wavelength() / 4.0;
        Self {
            tx_y: vec![-4.0 * d, 4.0 * d],
            rx_y: vec![-3.0 * d, -d, d, 3.0 * d],
            z_plane: 0.0,
        }
    }

    /// Pairs in transmitter-major order; this is the channel order of every [`BeatCube`].
    pub fn pairs(&self) -> Vec<AntennaPair> {
        self.tx_y
            .iter()
            .flat_map(|&tx_y| {
                self.rx_y.iter().map(move |&rx_y| AntennaPair {
                    tx_y,
                    rx_y,
                    z_plane: self.z_plane,
                })
            })
            .collect()
    }

    /// Virtual monostatic element positions, one per pair.
    pub fn virtual_y(&self) -> Vec<f64> {
        self.pairs().iter().map(AntennaPair::midpoint).collect()
    }

    pub fn n_channels(&self) -> usize {
        self.tx_y.len() * self.rx_y.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_y.is_empty() || self.rx_y.is_empty() {
            return Err(Error::Config(
                "array needs at least one transmitter and one receiver".into(),
            ));
        }
        if self.tx_y.iter().chain(&self.rx_y).any(|v| !v.is_finite()) || !self.z_plane.is_finite() {
            return Err(Error::Config("array element positions must be finite".into()));
        }
        Ok(())
    }
}

/// An ideal stationary point reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTarget {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub sigma: f64,
}

impl PointTarget {
    pub fn new(x: f64, y: f64, z: f64, sigma: f64) -> Self {
        Self { x, y, z, sigma }
    }

    fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::Geometry(format!("non-finite target position {:?}", self)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Geometry(format!(
                "reflectivity must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Discretised reflectivity distribution of a scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetCloud {
    pub points: Vec<PointTarget>,
}

impl TargetCloud {
    pub fn new(points: Vec<PointTarget>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shifts every point laterally.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| PointTarget::new(p.x + dx, p.y + dy, p.z, p.sigma))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| PointTarget::new(p.x, p.y, p.z, p.sigma * factor))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: &TargetCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// What a beat-cube row was measured by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMeta {
    Bistatic { tx_y: f64, rx_y: f64 },
    Virtual { y: f64 },
}

impl ChannelMeta {
    /// Element position used for imaging and angle processing: the pair
    /// midpoint, or the virtual element itself.
    pub fn position(&self) -> f64 {
        match *self {
            ChannelMeta::Bistatic { tx_y, rx_y } => 0.5 * (tx_y + rx_y),
            ChannelMeta::Virtual { y } => y,
        }
    }
}

/// Complex beat samples, row-major `[channel][wavenumber]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatCube {
    data: Vec<Complex64>,
    channels: Vec<ChannelMeta>,
    k_grid: Vec<f64>,
    z_plane: f64,
    mono_corrected: bool,
}

impl BeatCube {
    pub fn new(
        data: Vec<Complex64>,
        channels: Vec<ChannelMeta>,
        k_grid: Vec<f64>,
        z_plane: f64,
        mono_corrected: bool,
    ) -> Result<Self> {
        if data.len() != channels.len() * k_grid.len() {
            return Err(Error::Shape(format!(
                "beat cube holds {} samples but {} channels x {} wavenumbers were declared",
                data.len(),
                channels.len(),
                k_grid.len()
            )));
        }
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("beat cube sample".into()));
        }
        Ok(Self {
            data,
            channels,
            k_grid,
            z_plane,
            mono_corrected,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_k(&self) -> usize {
        self.k_grid.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.n_k();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channels(&self) -> &[ChannelMeta] {
        &self.channels
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn z_plane(&self) -> f64 {
        self.z_plane
    }

    pub fn is_mono_corrected(&self) -> bool {
        self.mono_corrected
    }

    /// Elementwise sum of two cubes measured on the same channels and grid.
    pub fn add(&self, other: &BeatCube) -> Result<BeatCube> {
        if self.channels != other.channels || self.k_grid != other.k_grid {
            return Err(Error::Shape("cannot add beat cubes with different layouts".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        BeatCube::new(
            data,
            self.channels.clone(),
            self.k_grid.clone(),
            self.z_plane,
            self.mono_corrected,
        )
    }
}

/// Additive circularly-symmetric complex white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Expected `|n|^2` per beat sample.
    pub power: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { power: 0.0, seed: 0 };
}

/// Beat signal of one point target for one transceiver pair.
pub fn simulate_point_echo(pair: &AntennaPair, target: &PointTarget, k_grid: &[f64]) -> Result<Vec<Complex64>> {
    target.validate()?;
    let (rt, rr) = pair.ranges(target);
    if rt <= 1e-12 || rr <= 1e-12 {
        return Err(Error::Geometry(format!(
            "target at ({}, {}, {}) coincides with an antenna element",
            target.x, target.y, target.z
        )));
    }
    let amp = target.sigma / (rt * rr);
    let path = rt + rr;
    Ok(k_grid.iter().map(|&k| Complex64::from_polar(amp, k * path)).collect())
}

/// Adds `amp · exp(j (k0 + iΔk) path)` for `i = 0..out.len()` into `out`.
///
/// Uses a rotating phasor, re-anchored every 32 samples to bound drift.
fn accumulate_echo(out: &mut [Complex64], k0: f64, dk: f64, path: f64, amp: f64) {
    const ANCHOR: usize = 32;
    let step = Complex64::from_polar(1.0, dk * path);
    for (block, chunk) in out.chunks_mut(ANCHOR).enumerate() {
        let k_start = k0 + (block * ANCHOR) as f64 * dk;
        let mut phasor = Complex64::from_polar(amp, k_start * path);
        for v in chunk {
            *v += phasor;
            phasor *= step;
        }
    }
}

/// Coherent superposition of every point in `cloud` for every array pair,
/// plus optional white noise. The returned cube is not yet mono-corrected.
pub fn simulate_scene(
    cloud: &TargetCloud,
    geometry: &ArrayGeometry,
    config: &RadarConfig,
    noise: &NoiseSpec,
) -> Result<BeatCube> {
    if cloud.is_empty() {
        return Err(Error::Geometry("cannot simulate an empty target cloud".into()));
    }
    geometry.validate()?;
    let k_grid = wavenumber_grid(config)?;
    let (k0, dk) = config.wavenumber_start_step();
    let n_k = config.n_k;
    let pairs = geometry.pairs();
    let mut data = vec![Complex64::new(0.0, 0.0); pairs.len() * n_k];

    for p in &cloud.points {
        p.validate()?;
    }
    for (pair, row) in pairs.iter().zip(data.chunks_mut(n_k)) {
        for target in &cloud.points {
            let (rt, rr) = pair.ranges(target);
            if rt <= 1e-12 || rr <= 1e-12 {
                return Err(Error::Geometry(format!(
                    "target at ({}, {}, {}) coincides with an antenna element",
                    target.x, target.y, target.z
                )));
            }
            if target.sigma == 0.0 {
                continue;
            }
            accumulate_echo(row, k0, dk, rt + rr, target.sigma / (rt * rr));
        }
    }

    if noise.power > 0.0 {
        let std = (noise.power / 2.0).sqrt();
        let normal = Normal::new(0.0, std).map_err(|e| Error::Config(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for v in data.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    } else if noise.power < 0.0 || !noise.power.is_finite() {
        return Err(Error::Config(format!("noise power must be >= 0, got {}", noise.power)));
    }

    let channels = pairs
        .iter()
        .map(|p| ChannelMeta::Bistatic {
            tx_y: p.tx_y,
            rx_y: p.rx_y,
        })
        .collect();
    BeatCube::new(data, channels, k_grid, geometry.z_plane, false)
}

/// Applies the per-pair phase adjustment `exp(−j k d_y² / (4 z0_ref))` and
/// relabels every channel with its virtual midpoint.
pub fn multistatic_to_monostatic(cube: &BeatCube, z0_ref: f64) -> Result<BeatCube> {
    if !(z0_ref.is_finite() && z0_ref > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference distance must be positive, got {z0_ref}"
        )));
    }
    if cube.mono_corrected {
        return Err(Error::Pipeline("beat cube is already mono-corrected".into()));
    }
    let n_k = cube.n_k();
    let mut data = cube.data.clone();
    let mut channels = Vec::with_capacity(cube.channels.len());
    for (meta, row) in cube.channels.iter().zip(data.chunks_mut(n_k)) {
        let (y, d_y) = match *meta {
            ChannelMeta::Bistatic { tx_y, rx_y } => (0.5 * (tx_y + rx_y), tx_y - rx_y),
            ChannelMeta::Virtual { y } => (y, 0.0),
        };
        if d_y != 0.0 {
            let coeff = d_y * d_y / (4.0 * z0_ref);
            for (v, &k) in row.iter_mut().zip(&cube.k_grid) {
                *v *= Complex64::from_polar(1.0, -k * coeff);
            }
        }
        channels.push(ChannelMeta::Virtual { y });
    }
    BeatCube::new(data, channels, cube.k_grid.clone(), cube.z_plane, true)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn target() -> impl Strategy<Value = PointTarget> {
        (-0.2f64..0.2, -0.2f64..0.2, 0.2f64..1.5, 0.0f64..5.0).prop_map(|(x, y, z, s)| PointTarget::new(x, y, z, s))
    }

    fn max_abs(v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn grid_increases_and_spans_the_band(f0 in 1e9f64..100e9, bw in 1e6f64..8e9, n_k in 2usize..512) {
            let cfg = RadarConfig::with_bandwidth(f0, bw, n_k).unwrap();
            let k = wavenumber_grid(&cfg).unwrap();
            prop_assert_eq!(k.len(), n_k);
            prop_assert!(k.windows(2).all(|w| w[1] > w[0]));
            let two_pi_over_c = 2.0 * std::f64::consts::PI / SPEED_OF_LIGHT;
            prop_assert!((k[0] - two_pi_over_c * f0).abs() <= 1e-12 * k[0]);
            prop_assert!((k[n_k - 1] - two_pi_over_c * (f0 + bw)).abs() <= 1e-9 * k[n_k - 1]);
        }

        #[test]
        fn virtual_elements_are_exact_midpoints(
            tx in prop::collection::vec(-0.05f64..0.05, 1..4),
            rx in prop::collection::vec(-0.05f64..0.05, 1..5),
        ) {
            let geom = ArrayGeometry { tx_y: tx.clone(), rx_y: rx.clone(), z_plane: 0.0 };
            let v = geom.virtual_y();
            prop_assert_eq!(v.len(), tx.len() * rx.len());
            let mut i = 0;
            for t in &tx {
                for r in &rx {
                    prop_assert_eq!(v[i], (t + r) / 2.0);
                    i += 1;
                }
            }
        }

        #[test]
        fn superposition_is_linear(a in prop::collection::vec(target(), 1..4), b in prop::collection::vec(target(), 1..4)) {
            let cfg = RadarConfig::with_bandwidth(77e9, 4e9, 64).unwrap();
            let geom = ArrayGeometry::default_for(&cfg);
            let sa = simulate_scene(&TargetCloud::new(a.clone()), &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let sb = simulate_scene(&TargetCloud::new(b.clone()), &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let mut both = TargetCloud::new(a);
            both.extend(&TargetCloud::new(b));
            let sab = simulate_scene(&both, &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let sum = sa.add(&sb).unwrap();
            let scale = max_abs(sab.data()).max(1e-300);
            for (x, y) in sab.data().iter().zip(sum.data()) {
                prop_assert!((x - y).norm() <= 1e-9 * scale);
            }
            prop_assert!(sab.data().iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        }

        #[test]
        fn reflectivity_scales_the_echo(t in target(), factor in 0.0f64..10.0) {
            let cfg = RadarConfig::with_bandwidth(77e9, 4e9, 64).unwrap();
            let geom = ArrayGeometry::default_for(&cfg);
            let cloud = TargetCloud::new(vec![t]);
            let base = simulate_scene(&cloud, &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let scaled = simulate_scene(&cloud.scaled(factor), &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let scale = max_abs(base.data()) * factor.max(1.0);
            for (x, y) in scaled.data().iter().zip(base.data()) {
                prop_assert!((x - y * factor).norm() <= 1e-12 * scale.max(1e-300));
            }
        }

        #[test]
        fn correction_changes_phase_only(t in target(), z0 in 0.1f64..2.0) {
            let cfg = RadarConfig::with_bandwidth(77e9, 4e9, 64).unwrap();
            let geom = ArrayGeometry::default_for(&cfg);
            let raw = simulate_scene(&TargetCloud::new(vec![t]), &geom, &cfg, &NoiseSpec::NONE).unwrap();
            let mono = multistatic_to_monostatic(&raw, z0).unwrap();
            for (m, r) in mono.data().iter().zip(raw.data()) {
                prop_assert!((m.norm() - r.norm()).abs() <= 1e-12 * r.norm().max(1e-300));
            }
            let ys: Vec<f64> = mono.channels().iter().map(ChannelMeta::position).collect();
            prop_assert_eq!(ys, geom.virtual_y());
        }
    }

    /// Phase of the ideal monostatic echo from each virtual element.
    fn ideal_phase(t: &PointTarget, y: f64, k: f64) -> f64 {
        2.0 * k * (t.x * t.x + (t.y - y).powi(2) + t.z * t.z).sqrt()
    }

    fn wrapped(p: f64) -> f64 {
        (p + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
    }

    #[test]
    fn correction_at_the_reference_distance_is_ten_times_better() {
        let cfg = RadarConfig::default();
        let geom = ArrayGeometry::default_for(&cfg);
        let z0 = 0.4;
        let t = PointTarget::new(0.0, 0.0, z0, 1.0);
        let raw = simulate_scene(&TargetCloud::new(vec![t]), &geom, &cfg, &NoiseSpec::NONE).unwrap();
        let mono = multistatic_to_monostatic(&raw, z0).unwrap();
        let (mut before, mut after) = (0.0f64, 0.0f64);
        for (c, pair) in geom.pairs().iter().enumerate() {
            for (i, &k) in raw.k_grid().iter().enumerate() {
                let ideal = ideal_phase(&t, pair.midpoint(), k);
                before = before.max(wrapped(raw.channel(c)[i].arg() - ideal).abs());
                after = after.max(wrapped(mono.channel(c)[i].arg() - ideal).abs());
            }
        }
        assert!(before >= 10.0 * after, "before {before} after {after}");
    }
}
