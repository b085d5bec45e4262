//! Parametric gesture scenes and dataset synthesis.
//!
//! Each gesture is a point cloud: a flat hand outline (palm), the same
//! outline turned edge-on (perpendicular), or a fist with a raised thumb
//! (thumbs-up). Human captures get weak, jittered reflectivity and the
//! subject's torso in the background; sterile captures are the clean outline
//! at high reflectivity, mounted on a tripod.
//!
//! Per-sample seeds are `splitmix64(master_seed ^ splitmix64(index))`, where
//! `index` enumerates samples class-major, then variant (human before
//! sterile), then sample number. Every sample depends only on its own seed,
//! so generation order never changes the result.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::radar::{
    multistatic_to_monostatic, simulate_scene, ArrayGeometry, BeatCube, NoiseSpec, PointTarget, RadarConfig,
    TargetCloud,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureClass {
    Palm,
    Perpendicular,
    ThumbsUp,
}

impl GestureClass {
    pub const ALL: [GestureClass; 3] = [GestureClass::Palm, GestureClass::Perpendicular, GestureClass::ThumbsUp];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Format(format!("gesture label {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Palm => "palm",
            GestureClass::Perpendicular => "perpendicular",
            GestureClass::ThumbsUp => "thumbs-up",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantKind {
    Human,
    Sterile,
}

impl VariantKind {
    pub fn code(self) -> u8 {
        match self {
            VariantKind::Human => 0,
            VariantKind::Sterile => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(VariantKind::Human),
            1 => Ok(VariantKind::Sterile),
            other => Err(Error::Format(format!("unknown variant code {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Human => "human",
            VariantKind::Sterile => "sterile",
        }
    }
}

/// Size and surface properties of one hand (or one cutout).
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParams {
    /// Wrist-to-fingertip length, m.
    pub hand_scale: f64,
    /// Hand width as a fraction of `hand_scale`.
    pub aspect: f64,
    pub thumb_length: f64,
    /// Scatterers per square metre of hand surface.
    pub point_density: f64,
    pub base_reflectivity: f64,
    /// Standard deviation of per-point position jitter for human captures, m.
    pub jitter_std: f64,
    pub seed: u64,
}

impl Default for SubjectParams {
    /// A mid-sized adult hand.
    fn default() -> Self {
        Self {
            hand_scale: 0.19,
            aspect: 0.5,
            thumb_length: 0.06,
            point_density: 6000.0,
            base_reflectivity: 1.0,
            jitter_std: 0.003,
            seed: 77,
        }
    }
}

impl SubjectParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.13..=0.25).contains(&self.hand_scale) {
            return Err(Error::Config(format!(
                "hand scale {} outside [0.13, 0.25] m",
                self.hand_scale
            )));
        }
        if !(self.aspect > 0.0 && self.aspect <= 1.0) {
            return Err(Error::Config(format!("hand aspect {} outside (0, 1]", self.aspect)));
        }
        if !(self.thumb_length > 0.0 && self.point_density > 0.0 && self.base_reflectivity > 0.0) {
            return Err(Error::Config(
                "thumb length, point density and reflectivity must be positive".into(),
            ));
        }
        if !(self.jitter_std >= 0.0) {
            return Err(Error::Config("jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Draws a plausible adult hand.
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            hand_scale: rng.random_range(0.15..0.22),
            aspect: rng.random_range(0.42..0.56),
            thumb_length: rng.random_range(0.05..0.07),
            point_density: 6000.0,
            base_reflectivity: 1.0,
            jitter_std: rng.random_range(0.002..0.005),
            seed: rng.random(),
        }
    }
}

/// How a capture differs between a real hand and an aluminium cutout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantSpec {
    pub kind: VariantKind,
    /// Multiplier on every hand scatterer's reflectivity.
    pub reflectivity_gain: f64,
    /// Half-width of the uniform per-point reflectivity factor `U[1 − j, 1 + j]`.
    pub reflectivity_jitter: f64,
    /// Adds the subject's torso behind the hand.
    pub torso: bool,
    /// Adds a tripod column under the hand.
    pub tripod: bool,
    /// Receiver noise power per beat sample.
    pub noise_power: f64,
}

impl VariantSpec {
    pub fn human() -> Self {
        Self {
            kind: VariantKind::Human,
            reflectivity_gain: 1.0,
            reflectivity_jitter: 0.6,
            torso: true,
            tripod: false,
            noise_power: 400.0,
        }
    }

    pub fn sterile() -> Self {
        Self {
            kind: VariantKind::Sterile,
            reflectivity_gain: 10.0,
            reflectivity_jitter: 0.0,
            torso: false,
            tripod: true,
            noise_power: 400.0,
        }
    }

    pub fn noise_free(mut self) -> Self {
        self.noise_power = 0.0;
        self
    }
}

/// Region swept by the scanner and where the subject sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanAperture {
    pub width: f64,
    pub height: f64,
    /// Allowed hand distance from the array, m.
    pub hand_range: (f64, f64),
    /// Torso distance from the array, m.
    pub torso_range: f64,
}

impl Default for ScanAperture {
    fn default() -> Self {
        Self {
            width: 0.25,
            height: 0.25,
            hand_range: (0.25, 0.55),
            torso_range: 1.0,
        }
    }
}

impl ScanAperture {
    pub fn validate(&self) -> Result<()> {
        let (near, far) = self.hand_range;
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Config("scan aperture must have positive extent".into()));
        }
        if !(near > 0.0 && near < far && far < self.torso_range) {
            return Err(Error::Config(format!(
                "hand range {near}..{far} must lie inside (0, {})",
                self.torso_range
            )));
        }
        Ok(())
    }
}

/// Torso disk radius, m.
const TORSO_RADIUS: f64 = 0.2;
/// Torso scatterer grid spacing, m.
const TORSO_SPACING: f64 = 0.03;
/// Torso reflectivity relative to the hand's base reflectivity.
const TORSO_GAIN: f64 = 3.0;
/// Tripod column scatterer spacing, m.
const TRIPOD_SPACING: f64 = 0.015;
/// Tripod reflectivity relative to the hand's base reflectivity.
const TRIPOD_GAIN: f64 = 6.0;

/// Points of a flat hand outline in its own `(u, v)` plane: `u` across the
/// hand (thumb side negative), `v` along it (fingers positive). Centred on the
/// palm.
fn hand_outline(subject: &SubjectParams) -> Vec<(f64, f64)> {
    let step = 1.0 / subject.point_density.sqrt();
    let width = subject.hand_scale * subject.aspect;
    let palm_len = 0.55 * subject.hand_scale;
    let finger_len = subject.hand_scale - palm_len;
    let mut pts = Vec::new();

    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        let n = ((hi - lo) / step).floor().max(0.0) as usize + 1;
        let pad = 0.5 * ((hi - lo) - (n - 1) as f64 * step);
        (0..n).map(|i| lo + pad + i as f64 * step).collect()
    };

    let v_palm_lo = -0.5 * palm_len;
    let v_palm_hi = 0.5 * palm_len;
    for &v in &grid(v_palm_lo, v_palm_hi) {
        for &u in &grid(-0.5 * width, 0.5 * width) {
            pts.push((u, v));
        }
    }
    let finger_w = 0.7 * width / 4.0;
    let lengths = [0.85, 1.0, 0.95, 0.75];
    for (f, &rel) in lengths.iter().enumerate() {
        let centre = -0.5 * width + (f as f64 + 0.5) * width / 4.0;
        for &v in &grid(v_palm_hi + step, v_palm_hi + rel * finger_len) {
            for &u in &grid(centre - 0.5 * finger_w, centre + 0.5 * finger_w) {
                pts.push((u, v));
            }
        }
    }
    // Thumb: two rows leaving the palm edge at 45 degrees.
    let (dir_u, dir_v) = (-(0.5f64).sqrt(), (0.5f64).sqrt());
    let root = (-0.5 * width, v_palm_lo + 0.3 * palm_len);
    for &t in &grid(step, subject.thumb_length) {
        for off in [-0.5 * step, 0.5 * step] {
            pts.push((root.0 + t * dir_u - off * dir_v, root.1 + t * dir_v + off * dir_u));
        }
    }
    pts
}

/// Fist ellipsoid surface (Fibonacci lattice) plus a vertical thumb, in hand-centred coordinates.
fn thumbs_up_geometry(subject: &SubjectParams) -> Vec<(f64, f64, f64)> {
    let width = subject.hand_scale * subject.aspect;
    let (a, b, c) = (0.5 * width, 0.25 * subject.hand_scale, 0.035);
    // Knud Thomsen approximation of the ellipsoid surface area.
    let p = 1.6075;
    let area = 4.0 * PI * (((a * b).powf(p) + (a * c).powf(p) + (b * c).powf(p)) / 3.0).powf(1.0 / p);
    let n = (area * subject.point_density).round().max(8.0) as usize;
    let golden = PI * (3.0 - 5.0f64.sqrt());
    let mut pts: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let theta = golden * i as f64;
            (a * r * theta.cos(), b * y, c * r * theta.sin())
        })
        .collect();
    let step = 1.0 / subject.point_density.sqrt();
    let rows = (subject.thumb_length / step).floor() as usize;
    for i in 1..=rows {
        let y = b + i as f64 * step;
        for du in [-0.5 * step, 0.5 * step] {
            pts.push((-0.25 * width + du, y, -0.5 * c));
        }
    }
    pts
}

fn class_salt(class: GestureClass) -> u64 {
    0xA24B_AED4_963E_E407u64.wrapping_mul(class.index() as u64 + 1)
}

/// Builds the scatterer cloud for one gesture capture with the hand centred at `hand_center`.
pub fn make_gesture_cloud(
    class: GestureClass,
    subject: &SubjectParams,
    variant: &VariantSpec,
    aperture: &ScanAperture,
    hand_center: (f64, f64, f64),
) -> Result<TargetCloud> {
    subject.validate()?;
    aperture.validate()?;
    let (cx, cy, cz) = hand_center;
    let (near, far) = aperture.hand_range;
    if !(cz >= near && cz <= far) {
        return Err(Error::Geometry(format!(
            "hand centre distance {cz} m outside {near}..{far} m"
        )));
    }

    let base: Vec<(f64, f64, f64)> = match class {
        GestureClass::Palm => hand_outline(subject).into_iter().map(|(u, v)| (u, v, 0.0)).collect(),
        // Rotated about the vertical axis: thumb side points away from the array.
        GestureClass::Perpendicular => hand_outline(subject).into_iter().map(|(u, v)| (0.0, v, -u)).collect(),
        GestureClass::ThumbsUp => thumbs_up_geometry(subject),
    };

    let human = variant.kind == VariantKind::Human;
    let mut rng = ChaCha8Rng::seed_from_u64(subject.seed ^ class_salt(class));
    let jitter = Normal::new(0.0, subject.jitter_std).map_err(|e| Error::Config(e.to_string()))?;
    let hand_sigma = subject.base_reflectivity * variant.reflectivity_gain;
    let rj = variant.reflectivity_jitter.clamp(0.0, 1.0);

    let mut points = Vec::with_capacity(base.len() + 200);
    for (x, y, z) in base {
        let (mut px, mut py, mut pz) = (cx + x, cy + y, cz + z);
        let mut sigma = hand_sigma;
        if human {
            px += jitter.sample(&mut rng);
            py += jitter.sample(&mut rng);
            pz += jitter.sample(&mut rng);
            if rj > 0.0 {
                sigma *= rng.random_range(1.0 - rj..=1.0 + rj);
            }
        }
        points.push(PointTarget::new(px, py, pz, sigma));
    }

    if variant.torso {
        let torso_sigma = TORSO_GAIN * subject.base_reflectivity;
        let n = (TORSO_RADIUS / TORSO_SPACING).floor() as i64;
        let torso_y = cy - 0.15;
        for i in -n..=n {
            for j in -n..=n {
                let (dx, dy) = (i as f64 * TORSO_SPACING, j as f64 * TORSO_SPACING);
                if dx * dx + dy * dy <= TORSO_RADIUS * TORSO_RADIUS {
                    points.push(PointTarget::new(
                        dx + jitter.sample(&mut rng),
                        torso_y + dy + jitter.sample(&mut rng),
                        aperture.torso_range + jitter.sample(&mut rng),
                        torso_sigma,
                    ));
                }
            }
        }
    }
    if variant.tripod {
        // Metal column two scatterers wide, independent of the hand's reflectivity gain.
        let top = cy - 0.3 * subject.hand_scale - 0.02;
        let mut y = top;
        while y > cy - 0.45 {
            for dx in [-0.01, 0.01] {
                points.push(PointTarget::new(
                    cx + dx,
                    y,
                    cz + 0.01,
                    TRIPOD_GAIN * subject.base_reflectivity,
                ));
            }
            y -= TRIPOD_SPACING;
        }
    }
    Ok(TargetCloud::new(points))
}

/// `n` scanner positions drawn uniformly over the aperture square, centred on the origin.
pub fn scan_positions(aperture: &ScanAperture, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hw, hh) = (0.5 * aperture.width, 0.5 * aperture.height);
    (0..n)
        .map(|_| (rng.random_range(-hw..=hw), rng.random_range(-hh..=hh)))
        .collect()
}

/// Regular `nx × ny` raster over the aperture, row-major in `y`.
pub fn scan_raster(aperture: &ScanAperture, nx: usize, ny: usize) -> Vec<(f64, f64)> {
    let axis = |n: usize, extent: f64| -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| -0.5 * extent + extent * i as f64 / (n - 1) as f64)
            .collect()
    };
    let xs = axis(nx, aperture.width);
    let ys = axis(ny, aperture.height);
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` under `master_seed`.
pub fn sample_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub samples_per_class_human: usize,
    pub samples_per_class_sterile: usize,
    pub human_subjects: Vec<SubjectParams>,
    pub sterile_subjects: Vec<SubjectParams>,
    pub human: VariantSpec,
    pub sterile: VariantSpec,
    pub aperture: ScanAperture,
    pub radar: RadarConfig,
    pub geometry: ArrayGeometry,
    /// Reference distance of the multistatic-to-monostatic correction, m.
    pub z0_ref: f64,
    /// Half-width of the uniform lateral wander of the hand centre, m.
    pub hand_wander: f64,
    /// Recording sessions per class and variant. A session fixes the subject
    /// and hand placement; captures within it differ in scanner position,
    /// noise and (for humans) small pose changes.
    pub sessions_per_class: usize,
    pub master_seed: u64,
}

impl DatasetSpec {
    /// Desk-scale defaults: 1 000 human and 1 000 sterile captures per class,
    /// eight subjects and eight cutouts.
    pub fn desk(master_seed: u64) -> Self {
        Self::with_counts(master_seed, 1000, 1000)
    }

    pub fn with_counts(master_seed: u64, human: usize, sterile: usize) -> Self {
        let radar = RadarConfig::default();
        let geometry = ArrayGeometry::default_for(&radar);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ 0x5EED_0F_5B1EC7));
        let human_subjects: Vec<SubjectParams> = (0..8).map(|_| SubjectParams::random(&mut rng)).collect();
        // Cutouts are traced from the participants' hands.
        let sterile_subjects = Vec::clone(&human_subjects);
        Self {
            samples_per_class_human: human,
            samples_per_class_sterile: sterile,
            human_subjects,
            sterile_subjects,
            human: VariantSpec::human(),
            sterile: VariantSpec::sterile(),
            aperture: ScanAperture::default(),
            radar,
            geometry,
            z0_ref: 0.4,
            hand_wander: 0.03,
            sessions_per_class: 8,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class_human == 0 || self.samples_per_class_sterile == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.sessions_per_class == 0 {
            return Err(Error::Config("need at least one session per class".into()));
        }
        if self.human_subjects.is_empty() || self.sterile_subjects.is_empty() {
            return Err(Error::Config("need at least one human subject and one cutout".into()));
        }
        if self.human.kind != VariantKind::Human || self.sterile.kind != VariantKind::Sterile {
            return Err(Error::Config("variant specs are swapped".into()));
        }
        if !(self.sterile.reflectivity_gain > self.human.reflectivity_gain) {
            return Err(Error::Config(
                "sterile reflectivity gain must exceed the human gain".into(),
            ));
        }
        if self.sterile.noise_power > self.human.noise_power {
            return Err(Error::Config(
                "sterile noise power must not exceed the human noise power".into(),
            ));
        }
        for s in self.human_subjects.iter().chain(&self.sterile_subjects) {
            s.validate()?;
        }
        self.aperture.validate()?;
        self.radar.validate()?;
        self.geometry.validate()
    }

    pub fn samples_per_class(&self) -> usize {
        self.samples_per_class_human + self.samples_per_class_sterile
    }

    pub fn total_samples(&self) -> usize {
        GestureClass::COUNT * self.samples_per_class()
    }

    /// Class, variant and seed of sample `index`.
    pub fn sample_key(&self, index: usize) -> Result<SampleKey> {
        if index >= self.total_samples() {
            return Err(Error::InvalidArgument(format!("sample index {index} out of range")));
        }
        let per_class = self.samples_per_class();
        let class = GestureClass::from_index(index / per_class)?;
        let within = index % per_class;
        let variant = if within < self.samples_per_class_human {
            VariantKind::Human
        } else {
            VariantKind::Sterile
        };
        Ok(SampleKey {
            index,
            class,
            variant,
            seed: sample_seed(self.master_seed, index as u64),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleKey {
    pub index: usize,
    pub class: GestureClass,
    pub variant: VariantKind,
    pub seed: u64,
}

/// One simulated capture before preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub key: SampleKey,
    pub scan_position: (f64, f64),
    pub hand_center: (f64, f64, f64),
    pub cube: BeatCube,
}

/// Realises sample `index` of `spec`.
pub fn synth_sample(spec: &DatasetSpec, index: usize) -> Result<RawSample> {
    let key = spec.sample_key(index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    let (subjects, variant) = match key.variant {
        VariantKind::Human => (&spec.human_subjects, &spec.human),
        VariantKind::Sterile => (&spec.sterile_subjects, &spec.sterile),
    };
    let within = key.index % spec.samples_per_class()
        - if key.variant == VariantKind::Human {
            0
        } else {
            spec.samples_per_class_human
        };
    let session = within % spec.sessions_per_class;
    // Placement depends on the session only: every gesture of a session is
    // held at the same spot.
    let session_tag = session as u64;
    let mut session_rng = ChaCha8Rng::seed_from_u64(sample_seed(spec.master_seed ^ 0x5E55_1014, session_tag));
    let mut subject = subjects[session % subjects.len()].clone();
    let (near, far) = spec.aperture.hand_range;
    let w = spec.hand_wander;
    let hand_center = (
        if w > 0.0 { session_rng.random_range(-w..=w) } else { 0.0 },
        if w > 0.0 { session_rng.random_range(-w..=w) } else { 0.0 },
        session_rng.random_range(near..=far),
    );
    subject.seed = rng.random();
    let (hw, hh) = (0.5 * spec.aperture.width, 0.5 * spec.aperture.height);
    let scan = (rng.random_range(-hw..=hw), rng.random_range(-hh..=hh));
    let noise = NoiseSpec {
        power: variant.noise_power,
        seed: rng.random(),
    };
    let cloud =
        make_gesture_cloud(key.class, &subject, variant, &spec.aperture, hand_center)?.translated(-scan.0, -scan.1);
    let cube = simulate_scene(&cloud, &spec.geometry, &spec.radar, &noise)?;
    let cube = multistatic_to_monostatic(&cube, spec.z0_ref)?;
    Ok(RawSample {
        key,
        scan_position: scan,
        hand_center,
        cube,
    })
}

/// Generates every sample of `spec`, class-major.
pub fn synth_dataset(spec: &DatasetSpec, exec: Execution) -> Result<Vec<RawSample>> {
    spec.validate()?;
    exec.try_map_range(spec.total_samples(), |i| synth_sample(spec, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sterile capture with the cutout alone, no tripod.
    fn cutout() -> VariantSpec {
        VariantSpec {
            tripod: false,
            ..VariantSpec::sterile()
        }
    }

    fn subject() -> SubjectParams {
        SubjectParams::default()
    }

    fn extent(cloud: &TargetCloud, f: impl Fn(&PointTarget) -> f64) -> f64 {
        let vals: Vec<f64> = cloud.points.iter().map(f).collect();
        vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min)
    }

    #[test]
    fn sterile_palm_is_planar() {
        let cloud = make_gesture_cloud(
            GestureClass::Palm,
            &subject(),
            &cutout(),
            &ScanAperture::default(),
            (0.0, 0.0, 0.4),
        )
        .unwrap();
        assert!(cloud.len() > 50);
        assert!(cloud.points.iter().all(|p| (p.z - 0.4).abs() <= 1e-3));
    }

    #[test]
    fn sterile_perpendicular_is_edge_on() {
        let cloud = make_gesture_cloud(
            GestureClass::Perpendicular,
            &subject(),
            &cutout(),
            &ScanAperture::default(),
            (0.0, 0.0, 0.4),
        )
        .unwrap();
        let (dx, dy) = (extent(&cloud, |p| p.x), extent(&cloud, |p| p.y));
        assert!(dy >= 5.0 * dx, "x extent {dx}, y extent {dy}");
    }

    #[test]
    fn thumbs_up_has_thumb_above_fist() {
        let cloud = make_gesture_cloud(
            GestureClass::ThumbsUp,
            &subject(),
            &cutout(),
            &ScanAperture::default(),
            (0.0, 0.0, 0.4),
        )
        .unwrap();
        let top = cloud.points.iter().map(|p| p.y).fold(f64::MIN, f64::max);
        assert!(top > 0.25 * 0.19 + 0.04);
        assert!(extent(&cloud, |p| p.z) < 0.08);
    }

    #[test]
    fn clouds_are_deterministic() {
        for class in GestureClass::ALL {
            let a = make_gesture_cloud(
                class,
                &subject(),
                &VariantSpec::human(),
                &ScanAperture::default(),
                (0.01, 0.0, 0.3),
            )
            .unwrap();
            let b = make_gesture_cloud(
                class,
                &subject(),
                &VariantSpec::human(),
                &ScanAperture::default(),
                (0.01, 0.0, 0.3),
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn hand_outside_range_is_rejected() {
        for z in [0.2, 0.6] {
            let r = make_gesture_cloud(
                GestureClass::Palm,
                &subject(),
                &cutout(),
                &ScanAperture::default(),
                (0.0, 0.0, z),
            );
            assert!(r.is_err());
        }
    }

    #[test]
    fn human_without_jitter_reduces_to_scaled_sterile_geometry() {
        let mut s = subject();
        s.jitter_std = 0.0;
        let mut human = VariantSpec::human();
        human.torso = false;
        human.reflectivity_jitter = 0.0;
        for class in GestureClass::ALL {
            let h = make_gesture_cloud(class, &s, &human, &ScanAperture::default(), (0.0, 0.02, 0.45)).unwrap();
            let st = make_gesture_cloud(class, &s, &cutout(), &ScanAperture::default(), (0.0, 0.02, 0.45)).unwrap();
            let st = TargetCloud::new(st.points[..h.len()].to_vec());
            for (a, b) in h.points.iter().zip(&st.points) {
                assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
                assert!((b.sigma / a.sigma - 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn human_captures_see_the_torso_and_cutouts_the_tripod() {
        let at = |v: &VariantSpec| {
            make_gesture_cloud(
                GestureClass::Palm,
                &subject(),
                v,
                &ScanAperture::default(),
                (0.0, 0.0, 0.3),
            )
            .unwrap()
        };
        let far = |c: &TargetCloud| c.points.iter().filter(|p| (p.z - 1.0).abs() < 0.05).count();
        let tripod = |c: &TargetCloud| c.points.iter().filter(|p| p.y < -0.1 && p.z < 0.5).count();
        let (h, s) = (at(&VariantSpec::human()), at(&VariantSpec::sterile()));
        assert!(far(&h) > 100);
        assert_eq!(tripod(&h), 0);
        assert_eq!(far(&s), 0);
        assert!(tripod(&s) >= 10);
        assert!(s
            .points
            .iter()
            .filter(|p| p.y < -0.1)
            .all(|p| (p.sigma - TRIPOD_GAIN * subject().base_reflectivity).abs() < 1e-12));
    }

    #[test]
    fn scan_positions_bounds_determinism_and_mean() {
        let ap = ScanAperture::default();
        let p = scan_positions(&ap, 4, 3);
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|&(x, y)| x.abs() <= 0.125 && y.abs() <= 0.125));
        assert_eq!(scan_positions(&ap, 4, 3), p);
        let many = scan_positions(&ap, 10_000, 11);
        let (mx, my) = many.iter().fold((0.0, 0.0), |a, &(x, y)| (a.0 + x, a.1 + y));
        assert!((mx / 1e4_f64).abs() < 0.01 && (my / 1e4_f64).abs() < 0.01);
    }

    #[test]
    fn raster_covers_aperture() {
        let r = scan_raster(&ScanAperture::default(), 3, 2);
        assert_eq!(
            r,
            vec![
                (-0.125, -0.125),
                (0.0, -0.125),
                (0.125, -0.125),
                (-0.125, 0.125),
                (0.0, 0.125),
                (0.125, 0.125)
            ]
        );
    }

    #[test]
    fn small_dataset_is_balanced_and_reproducible() {
        let spec = DatasetSpec::with_counts(5, 10, 10);
        let a = synth_dataset(&spec, Execution::Parallel).unwrap();
        assert_eq!(a.len(), 60);
        for class in GestureClass::ALL {
            assert_eq!(a.iter().filter(|s| s.key.class == class).count(), 20);
            assert_eq!(
                a.iter()
                    .filter(|s| s.key.class == class && s.key.variant == VariantKind::Sterile)
                    .count(),
                10
            );
        }
        assert!(a.iter().all(|s| s.cube.is_mono_corrected()));
        let b = synth_dataset(&spec, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = DatasetSpec::with_counts(1, 0, 10);
        assert!(spec.validate().is_err());
        spec = DatasetSpec::with_counts(1, 10, 10);
        spec.sterile.reflectivity_gain = 0.5;
        assert!(spec.validate().is_err());
        spec = DatasetSpec::with_counts(1, 10, 10);
        spec.sterile_subjects.clear();
        assert!(spec.validate().is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn random_subjects_are_valid(seed in any::<u64>()) {
            let s = SubjectParams::random(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(s.validate().is_ok());
            prop_assert!((0.13..=0.25).contains(&s.hand_scale) && s.point_density > 0.0 && s.jitter_std >= 0.0);
        }

        #[test]
        fn clouds_are_finite_and_non_negative(
            class in 0usize..3,
            sterile in any::<bool>(),
            seed in any::<u64>(),
            x in -0.1f64..0.1,
            y in -0.1f64..0.1,
            z in 0.25f64..0.55,
        ) {
            let subject = SubjectParams::random(&mut ChaCha8Rng::seed_from_u64(seed));
            let variant = if sterile { VariantSpec::sterile() } else { VariantSpec::human() };
            let cloud = make_gesture_cloud(GestureClass::ALL[class], &subject, &variant, &ScanAperture::default(), (x, y, z)).unwrap();
            prop_assert!(!cloud.is_empty());
            for p in &cloud.points {
                prop_assert!(p.sigma >= 0.0);
                prop_assert!(p.x.is_finite() && p.y.is_finite() && p.z.is_finite());
            }
        }

        #[test]
        fn default_variants_keep_their_ordering(gain in 1.0f64..50.0) {
            let mut spec = DatasetSpec::with_counts(1, 1, 1);
            spec.sterile.reflectivity_gain = gain;
            prop_assert_eq!(spec.validate().is_ok(), gain > spec.human.reflectivity_gain);
        }
    }
}
