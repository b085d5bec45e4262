//! Preprocessing chain from a mono-corrected [`BeatCube`] to a network-ready
//! real image: range FFT, optional zero-padded angle FFT, range crop,
//! complex normalisation, real/imaginary layering.
//!
//! Matrices here are stored lane-major: one row per channel (or angle bin),
//! one column per range bin. [`to_image`] transposes to the `[range][lane]`
//! orientation the network consumes.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::radar::{BeatCube, SPEED_OF_LIGHT};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT, `X[m] = Σ x[n] exp(−j2πmn/N)`.
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// Direct `O(n²)` evaluation of the forward DFT.
pub fn dft_oracle(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let step = -2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, step * ((m * i) % n) as f64))
                .sum()
        })
        .collect()
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> ComplexMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        ComplexMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Magnitude of every entry.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }
}

/// Per-channel range spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    /// `[channel][range bin]`.
    pub data: ComplexMatrix,
    /// Nominal spacing `c/(2B)` between range bins, m.
    pub bin_spacing: f64,
    /// Index of the first bin relative to the uncropped profile.
    pub first_bin: usize,
    /// Virtual element position of each channel, m.
    pub channel_y: Vec<f64>,
}

/// Range spectra after the spatial FFT across channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAngleProfile {
    /// `[angle bin][range bin]`, broadside at row `angle_bins / 2`.
    pub data: ComplexMatrix,
    pub bin_spacing: f64,
    pub first_bin: usize,
}

/// Profiles whose columns are range bins and can therefore be cropped.
pub trait RangeAxis: Sized {
    fn matrix(&self) -> &ComplexMatrix;
    fn first_bin(&self) -> usize;
    fn with_window(&self, data: ComplexMatrix, first_bin: usize) -> Self;
}

impl RangeAxis for RangeProfile {
    fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }
    fn first_bin(&self) -> usize {
        self.first_bin
    }
    fn with_window(&self, data: ComplexMatrix, first_bin: usize) -> Self {
        Self {
            data,
            bin_spacing: self.bin_spacing,
            first_bin,
            channel_y: self.channel_y.clone(),
        }
    }
}

impl RangeAxis for RangeAngleProfile {
    fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }
    fn first_bin(&self) -> usize {
        self.first_bin
    }
    fn with_window(&self, data: ComplexMatrix, first_bin: usize) -> Self {
        Self {
            data,
            bin_spacing: self.bin_spacing,
            first_bin,
        }
    }
}

/// FFT along the wavenumber axis of every channel, no padding or window.
pub fn range_fft(cube: &BeatCube) -> Result<RangeProfile> {
    if !cube.is_mono_corrected() {
        return Err(Error::Pipeline("range FFT requires a mono-corrected beat cube".into()));
    }
    let k = cube.k_grid();
    let n_k = cube.n_k();
    let bin_spacing = if n_k >= 2 {
        // c/(2B) with B recovered from the wavenumber span.
        let bandwidth = (k[n_k - 1] - k[0]) * SPEED_OF_LIGHT / (2.0 * std::f64::consts::PI);
        SPEED_OF_LIGHT / (2.0 * bandwidth)
    } else {
        return Err(Error::Shape("range FFT needs at least two wavenumber samples".into()));
    };
    let mut data = cube.data().to_vec();
    for row in data.chunks_mut(n_k) {
        fft_in_place(row);
    }
    Ok(RangeProfile {
        data: ComplexMatrix::new(cube.n_channels(), n_k, data)?,
        bin_spacing,
        first_bin: 0,
        channel_y: cube.channels().iter().map(|c| c.position()).collect(),
    })
}

/// Checks that element positions are strictly ascending with uniform spacing.
fn check_uniform(ys: &[f64]) -> Result<()> {
    if ys.len() < 2 {
        return Ok(());
    }
    let d = ys[1] - ys[0];
    if d <= 0.0 {
        return Err(Error::Geometry("virtual elements must be in ascending order".into()));
    }
    for w in ys.windows(2) {
        if ((w[1] - w[0]) - d).abs() > 1e-6 * d {
            return Err(Error::Geometry(
                "angle FFT needs uniformly spaced virtual elements".into(),
            ));
        }
    }
    Ok(())
}

/// Zero-pads each range bin's channel column to `angle_bins`, transforms it
/// and rotates the spectrum so broadside lands on bin `angle_bins / 2`.
pub fn angle_fft(profile: &RangeProfile, angle_bins: usize) -> Result<RangeAngleProfile> {
    let n_ch = profile.data.rows;
    if angle_bins < n_ch {
        return Err(Error::InvalidArgument(format!(
            "angle FFT size {angle_bins} is smaller than the {n_ch} channels"
        )));
    }
    check_uniform(&profile.channel_y)?;
    let n_r = profile.data.cols;
    let mut out = ComplexMatrix::zeros(angle_bins, n_r);
    let mut column = vec![Complex64::new(0.0, 0.0); angle_bins];
    let half = angle_bins / 2;
    for r in 0..n_r {
        column.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for c in 0..n_ch {
            column[c] = profile.data.get(c, r);
        }
        fft_in_place(&mut column);
        for (m, v) in column.iter().enumerate() {
            let shifted = (m + half) % angle_bins;
            out.data[shifted * n_r + r] = *v;
        }
    }
    Ok(RangeAngleProfile {
        data: out,
        bin_spacing: profile.bin_spacing,
        first_bin: profile.first_bin,
    })
}

/// Keeps `n_bins` contiguous range bins starting at `start_bin`.
pub fn crop_range<P: RangeAxis>(profile: &P, start_bin: usize, n_bins: usize) -> Result<P> {
    let m = profile.matrix();
    if n_bins == 0 || start_bin + n_bins > m.cols {
        return Err(Error::InvalidArgument(format!(
            "range window {start_bin}..{} exceeds the {} available bins",
            start_bin + n_bins,
            m.cols
        )));
    }
    let mut data = Vec::with_capacity(m.rows * n_bins);
    for r in 0..m.rows {
        data.extend_from_slice(&m.row(r)[start_bin..start_bin + n_bins]);
    }
    Ok(profile.with_window(
        ComplexMatrix::new(m.rows, n_bins, data)?,
        profile.first_bin() + start_bin,
    ))
}

/// Subtracts the complex mean and divides by the population standard
/// deviation `sqrt(mean |x − μ|²)`.
pub fn normalize(image: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = image.data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "normalisation needs at least two samples".into(),
        ));
    }
    let mean = image.data.iter().sum::<Complex64>() / n as f64;
    let var = image.data.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n as f64;
    if !var.is_finite() {
        return Err(Error::NonFinite("image variance".into()));
    }
    if var <= 0.0 {
        return Err(Error::InvalidArgument("cannot normalise a constant image".into()));
    }
    let inv_std = 1.0 / var.sqrt();
    Ok(ComplexMatrix {
        rows: image.rows,
        cols: image.cols,
        data: image.data.iter().map(|v| (v - mean) * inv_std).collect(),
    })
}

/// Real-valued `H × W × 2` image, row-major with the layer index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl LayeredImage {
    pub const LAYERS: usize = 2;

    pub fn get(&self, h: usize, w: usize, layer: usize) -> f64 {
        self.data[(h * self.width + w) * Self::LAYERS + layer]
    }

    /// Reassembles the complex image the layers were split from.
    pub fn recompose(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.height,
            cols: self.width,
            data: self.data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
        }
    }
}

/// Layer 0 = real part, layer 1 = imaginary part.
pub fn layer_real_imag(image: &ComplexMatrix) -> LayeredImage {
    LayeredImage {
        height: image.rows,
        width: image.cols,
        data: image.data.iter().flat_map(|v| [v.re, v.im]).collect(),
    }
}

/// Which analysis feeds the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcessingMode {
    Range,
    RangeAngle,
}

impl ProcessingMode {
    pub const ALL: [ProcessingMode; 2] = [ProcessingMode::Range, ProcessingMode::RangeAngle];

    pub fn code(self) -> u8 {
        match self {
            ProcessingMode::Range => 0,
            ProcessingMode::RangeAngle => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ProcessingMode::Range),
            1 => Ok(ProcessingMode::RangeAngle),
            other => Err(Error::Format(format!("unknown processing mode code {other}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProcessingMode::Range => "range",
            ProcessingMode::RangeAngle => "range-angle",
        }
    }
}

impl fmt::Display for ProcessingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcessingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range" => Ok(ProcessingMode::Range),
            "range-angle" | "range_angle" => Ok(ProcessingMode::RangeAngle),
            other => Err(Error::Config(format!(
                "unknown mode '{other}', expected range or range-angle"
            ))),
        }
    }
}

/// Knobs of the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    pub start_bin: usize,
    pub range_bins: usize,
    pub angle_bins: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            start_bin: 6,
            range_bins: 64,
            angle_bins: 16,
        }
    }
}

impl PreprocessParams {
    /// `(height, width)` of the image produced for `mode` from `channels` virtual elements.
    pub fn image_shape(&self, mode: ProcessingMode, channels: usize) -> (usize, usize) {
        match mode {
            ProcessingMode::Range => (self.range_bins, channels),
            ProcessingMode::RangeAngle => (self.range_bins, self.angle_bins),
        }
    }
}

/// Transposes a lane-major profile into the `[range][lane]` image orientation.
pub fn to_image<P: RangeAxis>(profile: &P) -> ComplexMatrix {
    profile.matrix().transpose()
}

/// Full chain from mono-corrected cube to the layered `H × W × 2` image.
pub fn preprocess(cube: &BeatCube, mode: ProcessingMode, params: &PreprocessParams) -> Result<LayeredImage> {
    let profile = range_fft(cube)?;
    let image = match mode {
        ProcessingMode::Range => to_image(&crop_range(&profile, params.start_bin, params.range_bins)?),
        ProcessingMode::RangeAngle => {
            let ra = angle_fft(&profile, params.angle_bins)?;
            to_image(&crop_range(&ra, params.start_bin, params.range_bins)?)
        }
    };
    Ok(layer_real_imag(&normalize(&image)?))
}

/// Number of local maxima in `mag` at or above `rel_threshold` times the global maximum.
pub fn count_peaks(mag: &[f64], rel_threshold: f64) -> usize {
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let floor = rel_threshold * max;
    let n = mag.len();
    (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { mag[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { mag[i + 1] };
            mag[i] >= floor && mag[i] > left && mag[i] >= right
        })
        .count()
}

/// Index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{
        multistatic_to_monostatic, simulate_scene, ArrayGeometry, ChannelMeta, NoiseSpec, PointTarget, RadarConfig,
        TargetCloud,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    fn mono_cube(targets: &[PointTarget]) -> BeatCube {
        let cfg = RadarConfig::default();
        let geom = ArrayGeometry::default_for(&cfg);
        let cube = simulate_scene(&TargetCloud::new(targets.to_vec()), &geom, &cfg, &NoiseSpec::NONE).unwrap();
        multistatic_to_monostatic(&cube, 0.4).unwrap()
    }

    #[test]
    fn oracle_impulse_dc_and_tone() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        assert!(close(&dft_oracle(&[one, zero, zero, zero]), &[one; 4], 1e-12));
        assert!(close(&dft_oracle(&[one; 4]), &[c(4.0, 0.0), zero, zero, zero], 1e-12));
        let tone: Vec<_> = (0..8)
            .map(|n| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * n as f64 / 8.0))
            .collect();
        let mut expect = vec![zero; 8];
        expect[3] = c(8.0, 0.0);
        assert!(close(&dft_oracle(&tone), &expect, 1e-12));
    }

    #[test]
    fn fft_matches_oracle_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [8usize, 16, 64, 256] {
            let x: Vec<_> = (0..n)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut fast = x.clone();
            fft_in_place(&mut fast);
            let slow = dft_oracle(&x);
            let scale = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).norm() / scale < 1e-6));
            let e_time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let e_freq: f64 = fast.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
            assert!(((e_time - e_freq) / e_time).abs() < 1e-9);
        }
    }

    #[test]
    fn range_fft_requires_mono_correction() {
        let cfg = RadarConfig::default();
        let geom = ArrayGeometry::default_for(&cfg);
        let cube = simulate_scene(
            &TargetCloud::new(vec![PointTarget::new(0.0, 0.0, 0.4, 1.0)]),
            &geom,
            &cfg,
            &NoiseSpec::NONE,
        )
        .unwrap();
        assert!(matches!(range_fft(&cube), Err(Error::Pipeline(_))));
    }

    #[test]
    fn all_zero_cube_gives_zero_profile() {
        let cube = BeatCube::new(
            vec![c(0.0, 0.0); 8 * 16],
            (0..8).map(|i| ChannelMeta::Virtual { y: i as f64 * 1e-3 }).collect(),
            (0..16).map(|i| 1600.0 + i as f64).collect(),
            0.0,
            true,
        )
        .unwrap();
        let p = range_fft(&cube).unwrap();
        assert!(p.data.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn point_target_lands_on_expected_bin_and_crop_shifts_it() {
        let p = range_fft(&mono_cube(&[PointTarget::new(0.0, 0.0, 0.4, 1.0)])).unwrap();
        assert!((p.bin_spacing - 0.0375).abs() < 1e-4);
        let peak = argmax(&p.data.row(3).iter().map(|v| v.norm()).collect::<Vec<_>>());
        assert_eq!(peak, 11);
        let cropped = crop_range(&p, 6, 64).unwrap();
        let peak = argmax(&cropped.data.row(3).iter().map(|v| v.norm()).collect::<Vec<_>>());
        assert_eq!(peak, 5);
        assert_eq!(cropped.first_bin, 6);
    }

    #[test]
    fn crop_bounds() {
        let p = range_fft(&mono_cube(&[PointTarget::new(0.0, 0.0, 0.4, 1.0)])).unwrap();
        assert_eq!(crop_range(&p, 0, 256).unwrap(), p);
        assert!(crop_range(&p, 250, 64).is_err());
        assert!(crop_range(&p, 0, 0).is_err());
    }

    #[test]
    fn broadside_maps_to_center_bin() {
        let p = range_fft(&mono_cube(&[PointTarget::new(0.0, 0.0, 0.5, 1.0)])).unwrap();
        let ra = angle_fft(&p, 16).unwrap();
        let range_bin = argmax(&p.data.row(0).iter().map(|v| v.norm()).collect::<Vec<_>>());
        let column: Vec<f64> = (0..16).map(|a| ra.data.get(a, range_bin).norm()).collect();
        assert_eq!(argmax(&column), 8);
    }

    #[test]
    fn unpadded_angle_fft_is_shifted_channel_fft() {
        let p = range_fft(&mono_cube(&[PointTarget::new(0.0, 0.03, 0.5, 1.0)])).unwrap();
        let ra = angle_fft(&p, 8).unwrap();
        for r in [0usize, 13, 100] {
            let col: Vec<_> = (0..8).map(|ch| p.data.get(ch, r)).collect();
            let spec = dft_oracle(&col);
            for m in 0..8 {
                assert!((ra.data.get((m + 4) % 8, r) - spec[m]).norm() < 1e-9 * (1.0 + spec[m].norm()));
            }
        }
    }

    #[test]
    fn symmetric_targets_give_symmetric_peaks() {
        let p = range_fft(&mono_cube(&[
            PointTarget::new(0.0, 0.12, 0.5, 1.0),
            PointTarget::new(0.0, -0.12, 0.5, 1.0),
        ]))
        .unwrap();
        let ra = angle_fft(&p, 16).unwrap();
        let total: Vec<f64> = (0..16)
            .map(|a| (0..p.data.cols).map(|r| ra.data.get(a, r).norm_sqr()).sum())
            .collect();
        for off in 1..8 {
            let (lo, hi) = (total[8 - off], total[8 + off]);
            assert!((lo - hi).abs() <= 1e-6 * lo.max(hi), "offset {off}: {lo} vs {hi}");
        }
    }

    #[test]
    fn angle_fft_rejects_small_size_and_irregular_arrays() {
        let p = range_fft(&mono_cube(&[PointTarget::new(0.0, 0.0, 0.5, 1.0)])).unwrap();
        assert!(angle_fft(&p, 4).is_err());
        let mut bad = p.clone();
        bad.channel_y[3] += 1e-4;
        assert!(matches!(angle_fft(&bad, 16), Err(Error::Geometry(_))));
    }

    #[test]
    fn normalize_examples() {
        let m = ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(close(&normalize(&m).unwrap().data, &m.data, 1e-15));
        let flat = ComplexMatrix::new(1, 2, vec![c(2.0, 2.0); 2]).unwrap();
        assert!(normalize(&flat).is_err());
        assert!(normalize(&ComplexMatrix::new(1, 1, vec![c(1.0, 0.0)]).unwrap()).is_err());
    }

    #[test]
    fn layering_examples() {
        let m = ComplexMatrix::new(1, 1, vec![c(3.0, 4.0)]).unwrap();
        let l = layer_real_imag(&m);
        assert_eq!(l.data, vec![3.0, 4.0]);
        assert_eq!(l.recompose(), m);
        let real = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(0.5, 0.0)]).unwrap();
        let l = layer_real_imag(&real);
        assert!((0..2).all(|h| (0..2).all(|w| l.get(h, w, 1) == 0.0)));
    }

    #[test]
    fn preprocess_shapes() {
        let cube = mono_cube(&[
            PointTarget::new(0.01, 0.02, 0.4, 1.0),
            PointTarget::new(0.0, 0.0, 1.0, 3.0),
        ]);
        let params = PreprocessParams::default();
        let r = preprocess(&cube, ProcessingMode::Range, &params).unwrap();
        assert_eq!((r.height, r.width, r.data.len()), (64, 8, 64 * 8 * 2));
        let ra = preprocess(&cube, ProcessingMode::RangeAngle, &params).unwrap();
        assert_eq!((ra.height, ra.width, ra.data.len()), (64, 16, 64 * 16 * 2));
    }

    #[test]
    fn peak_counting_ignores_sidelobes() {
        assert_eq!(count_peaks(&[0.1, 0.2, 1.0, 0.2, 0.21, 0.1], 0.5), 1);
        assert_eq!(count_peaks(&[0.1, 1.0, 0.2, 0.9, 0.1], 0.5), 2);
        assert_eq!(count_peaks(&[0.0; 4], 0.5), 0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("range".parse::<ProcessingMode>().unwrap(), ProcessingMode::Range);
        assert_eq!(
            "range-angle".parse::<ProcessingMode>().unwrap(),
            ProcessingMode::RangeAngle
        );
        assert!("doppler".parse::<ProcessingMode>().is_err());
        assert_eq!(ProcessingMode::from_code(1).unwrap(), ProcessingMode::RangeAngle);
        assert!(ProcessingMode::from_code(7).is_err());
    }
}
