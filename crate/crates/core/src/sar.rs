//! Matched-filter back-projection over a full two-dimensional scan.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::radar::{
    multistatic_to_monostatic, simulate_scene, ArrayGeometry, BeatCube, NoiseSpec, RadarConfig, TargetCloud,
};
use crate::scene::sample_seed;

/// Mono-corrected captures taken with the array translated to each scan position.
#[derive(Debug, Clone)]
pub struct ApertureScan {
    positions: Vec<(f64, f64)>,
    cubes: Vec<BeatCube>,
    z_plane: f64,
}

impl ApertureScan {
    pub fn new(positions: Vec<(f64, f64)>, cubes: Vec<BeatCube>) -> Result<Self> {
        if positions.is_empty() || cubes.is_empty() {
            return Err(Error::InvalidArgument("aperture scan is empty".into()));
        }
        if positions.len() != cubes.len() {
            return Err(Error::Shape(format!(
                "{} scan positions but {} cubes",
                positions.len(),
                cubes.len()
            )));
        }
        let first = &cubes[0];
        for (i, c) in cubes.iter().enumerate() {
            if !c.is_mono_corrected() {
                return Err(Error::Pipeline(format!(
                    "cube at scan position {i} is not mono-corrected"
                )));
            }
            if c.k_grid() != first.k_grid() || c.n_channels() != first.n_channels() || c.z_plane() != first.z_plane() {
                return Err(Error::Shape(format!(
                    "cube at scan position {i} uses a different radar setup"
                )));
            }
        }
        let distinct = |f: fn(&(f64, f64)) -> f64| {
            let mut v: Vec<f64> = positions.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        if distinct(|p| p.0) < 2 || distinct(|p| p.1) < 2 {
            return Err(Error::Geometry(
                "a 2-D scan needs at least two positions along each axis".into(),
            ));
        }
        let z_plane = first.z_plane();
        Ok(Self {
            positions,
            cubes,
            z_plane,
        })
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn cubes(&self) -> &[BeatCube] {
        &self.cubes
    }

    pub fn z_plane(&self) -> f64 {
        self.z_plane
    }

    /// Pointwise sum of two scans over the same positions.
    pub fn add(&self, other: &ApertureScan) -> Result<ApertureScan> {
        if self.positions != other.positions {
            return Err(Error::Shape("scans were taken at different positions".into()));
        }
        let cubes = self
            .cubes
            .iter()
            .zip(&other.cubes)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        ApertureScan::new(self.positions.clone(), cubes)
    }
}

/// Simulates `cloud` from every scan position. The scene is shifted by the
/// negated position so the array stays at the origin of each capture.
#[allow(clippy::too_many_arguments)]
pub fn simulate_aperture_scan(
    cloud: &TargetCloud,
    geometry: &ArrayGeometry,
    config: &RadarConfig,
    noise_power: f64,
    noise_seed: u64,
    z0_ref: f64,
    positions: &[(f64, f64)],
    exec: Execution,
) -> Result<ApertureScan> {
    let cubes = exec.try_map_range(positions.len(), |i| {
        let (x, y) = positions[i];
        let noise = NoiseSpec {
            power: noise_power,
            seed: sample_seed(noise_seed, i as u64),
        };
        let cube = simulate_scene(&cloud.translated(-x, -y), geometry, config, &noise)?;
        multistatic_to_monostatic(&cube, z0_ref)
    })?;
    ApertureScan::new(positions.to_vec(), cubes)
}

/// Pixel-centre raster for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl ImageGrid {
    pub fn centered(half_width: f64, half_height: f64, nx: usize, ny: usize) -> Self {
        Self {
            x_range: (-half_width, half_width),
            y_range: (-half_height, half_height),
            nx,
            ny,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidArgument(
                "image grid needs at least 2 pixels per axis".into(),
            ));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidArgument(
                "image grid bounds must be finite and increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * ix as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * iy as f64 / (self.ny - 1) as f64
    }

    pub fn pixel_pitch(&self) -> (f64, f64) {
        (
            (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64,
            (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64,
        )
    }

    /// Nearest pixel to a physical point, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let (px, py) = self.pixel_pitch();
        let ix = ((x - self.x_range.0) / px).round().clamp(0.0, (self.nx - 1) as f64);
        let iy = ((y - self.y_range.0) / py).round().clamp(0.0, (self.ny - 1) as f64);
        (ix as usize, iy as usize)
    }
}

/// Reconstructed magnitude image, normalised to a peak of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SarImage {
    /// `[nx × ny]`, `x` major.
    pub pixels: Vec<f64>,
    pub grid: ImageGrid,
    pub z_slice: f64,
    /// Peak magnitude before normalisation.
    pub raw_peak: f64,
}

impl SarImage {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.pixels[ix * self.grid.ny + iy]
    }

    /// `(x_min, x_max, y_min, y_max)` of the pixel centres.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.grid.x_range.0,
            self.grid.x_range.1,
            self.grid.y_range.0,
            self.grid.y_range.1,
        )
    }

    pub fn peak_pixel(&self) -> (usize, usize) {
        let i = crate::dsp::argmax(&self.pixels);
        (i / self.grid.ny, i % self.grid.ny)
    }

    pub fn peak_position(&self) -> (f64, f64) {
        let (ix, iy) = self.peak_pixel();
        (self.grid.x(ix), self.grid.y(iy))
    }
}

/// Complex back-projection sum at every pixel, `x` major.
pub fn backproject_complex(
    scan: &ApertureScan,
    grid: &ImageGrid,
    z_slice: f64,
    exec: Execution,
) -> Result<Vec<Complex64>> {
    grid.validate()?;
    if !z_slice.is_finite() {
        return Err(Error::InvalidArgument("z slice must be finite".into()));
    }
    let k = scan.cubes[0].k_grid();
    let n_k = k.len();
    let k0 = k[0];
    let dk = (k[n_k - 1] - k0) / (n_k - 1) as f64;

    // Element positions and their signals, flattened in a fixed order.
    let mut elements = Vec::new();
    let mut signals: Vec<&[Complex64]> = Vec::new();
    for (&(px, py), cube) in scan.positions.iter().zip(&scan.cubes) {
        for (c, meta) in cube.channels().iter().enumerate() {
            elements.push((px, py + meta.position()));
            signals.push(cube.channel(c));
        }
    }
    let dz2 = (z_slice - scan.z_plane).powi(2);

    let pixels = exec.map_range(grid.nx * grid.ny, |p| {
        let (x, y) = (grid.x(p / grid.ny), grid.y(p % grid.ny));
        let mut acc = Complex64::new(0.0, 0.0);
        for (&(ex, ey), s) in elements.iter().zip(&signals) {
            let r = ((x - ex).powi(2) + (y - ey).powi(2) + dz2).sqrt();
            // Σ s_i e^{-j2k_i r} = e^{-j2k_0 r} Σ s_i w^i with w = e^{-j2Δk r}.
            let w = Complex64::from_polar(1.0, -2.0 * dk * r);
            let mut h = Complex64::new(0.0, 0.0);
            for &v in s.iter().rev() {
                h = h * w + v;
            }
            acc += h * Complex64::from_polar(1.0, -2.0 * k0 * r);
        }
        acc
    });
    Ok(pixels)
}

/// Magnitude back-projection image at depth `z_slice`, normalised to peak 1.
pub fn backproject(scan: &ApertureScan, grid: &ImageGrid, z_slice: f64, exec: Execution) -> Result<SarImage> {
    let complex = backproject_complex(scan, grid, z_slice, exec)?;
    let mut pixels: Vec<f64> = complex.iter().map(|c| c.norm()).collect();
    if let Some(bad) = pixels.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("SAR pixel {bad}")));
    }
    let raw_peak = pixels.iter().copied().fold(0.0, f64::max);
    if raw_peak > 0.0 {
        pixels.iter_mut().for_each(|v| *v /= raw_peak);
    }
    Ok(SarImage {
        pixels,
        grid: *grid,
        z_slice,
        raw_peak,
    })
}

/// Axis-aligned physical region expected to contain the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMask {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl TargetMask {
    pub fn around(x: f64, y: f64, half: f64) -> Self {
        Self {
            x_range: (x - half, x + half),
            y_range: (y - half, y + half),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_range.0 && x <= self.x_range.1 && y >= self.y_range.0 && y <= self.y_range.1
    }
}

/// Peak inside the mask over the RMS of every pixel outside it.
pub fn image_snr(image: &SarImage, mask: &TargetMask) -> Result<f64> {
    let g = &image.grid;
    let inside_extent = mask.x_range.0 > g.x_range.0
        && mask.x_range.1 < g.x_range.1
        && mask.y_range.0 > g.y_range.0
        && mask.y_range.1 < g.y_range.1;
    if !inside_extent {
        return Err(Error::InvalidArgument(
            "target mask must lie strictly inside the image".into(),
        ));
    }
    let mut peak = f64::NEG_INFINITY;
    let mut inside = 0usize;
    let mut sq = 0.0;
    let mut outside = 0usize;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            let v = image.get(ix, iy);
            if mask.contains(g.x(ix), g.y(iy)) {
                peak = peak.max(v);
                inside += 1;
            } else {
                sq += v * v;
                outside += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::InvalidArgument("target mask covers no pixels".into()));
    }
    if outside == 0 {
        return Err(Error::InvalidArgument("target mask covers the whole image".into()));
    }
    let rms = (sq / outside as f64).sqrt();
    if rms == 0.0 && peak == 0.0 {
        return Err(Error::NonFinite("SNR of an all-zero image is undefined".into()));
    }
    Ok(peak / rms)
}

/// Writes a 16-bit binary PGM (top row = largest `y`) and a `.extent.txt` sidecar.
/// Returns the sidecar path.
pub fn write_pgm(image: &SarImage, path: &Path) -> Result<PathBuf> {
    let g = &image.grid;
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    write!(w, "P5\n{} {}\n65535\n", g.nx, g.ny).map_err(io)?;
    let mut bytes = Vec::with_capacity(2 * g.nx * g.ny);
    for iy in (0..g.ny).rev() {
        for ix in 0..g.nx {
            let v = (image.get(ix, iy).clamp(0.0, 1.0) * 65535.0).round() as u16;
            bytes.extend_from_slice(&v.to_be_bytes());
        }
    }
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)?;

    let sidecar = path.with_extension("extent.txt");
    let (x0, x1, y0, y1) = image.extent();
    let text = format!(
        "x_min = {x0}\nx_max = {x1}\ny_min = {y0}\ny_max = {y1}\nz_slice = {}\nnx = {}\nny = {}\nraw_peak = {}\n",
        image.z_slice, g.nx, g.ny, image.raw_peak
    );
    std::fs::write(&sidecar, text).map_err(|e| Error::io(format!("writing {}", sidecar.display()), e))?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::PointTarget;
    use crate::scene::{scan_raster, ScanAperture};

    const Z0: f64 = 0.4;

    fn setup() -> (RadarConfig, ArrayGeometry, Vec<(f64, f64)>) {
        let cfg = RadarConfig::with_bandwidth(77e9, 4e9, 64).unwrap();
        let geom = ArrayGeometry::default_for(&cfg);
        let positions = scan_raster(&ScanAperture::default(), 32, 32);
        (cfg, geom, positions)
    }

    fn scan_of(points: Vec<PointTarget>, noise: f64) -> ApertureScan {
        let (cfg, geom, pos) = setup();
        simulate_aperture_scan(
            &TargetCloud::new(points),
            &geom,
            &cfg,
            noise,
            5,
            Z0,
            &pos,
            Execution::default(),
        )
        .unwrap()
    }

    fn grid() -> ImageGrid {
        ImageGrid::centered(0.1, 0.1, 32, 32)
    }

    #[test]
    fn single_point_peaks_at_its_position() {
        let (x0, y0) = (0.031, -0.047);
        let img = backproject(
            &scan_of(vec![PointTarget::new(x0, y0, Z0, 1.0)], 0.0),
            &grid(),
            Z0,
            Execution::default(),
        )
        .unwrap();
        let (ix, iy) = img.peak_pixel();
        let (tx, ty) = img.grid.nearest(x0, y0);
        assert!(
            ix.abs_diff(tx) <= 1 && iy.abs_diff(ty) <= 1,
            "peak {:?} vs {:?}",
            (ix, iy),
            (tx, ty)
        );
        assert!((img.pixels.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
        assert!(img.pixels.iter().all(|&v| v >= 0.0));
        let snr = image_snr(&img, &TargetMask::around(x0, y0, 0.01)).unwrap();
        assert!(snr > 10.0, "snr {snr}");
    }

    #[test]
    fn zero_scan_gives_zero_image() {
        let img = backproject(
            &scan_of(vec![PointTarget::new(0.0, 0.0, Z0, 0.0)], 0.0),
            &grid(),
            Z0,
            Execution::default(),
        )
        .unwrap();
        assert!(img.pixels.iter().all(|&v| v == 0.0));
        assert_eq!(img.raw_peak, 0.0);
    }

    #[test]
    fn equal_targets_give_equal_peaks() {
        let a = (-0.05, 0.0);
        let b = (0.05, 0.0);
        let img = backproject(
            &scan_of(
                vec![PointTarget::new(a.0, a.1, Z0, 1.0), PointTarget::new(b.0, b.1, Z0, 1.0)],
                0.0,
            ),
            &grid(),
            Z0,
            Execution::default(),
        )
        .unwrap();
        let local_peak = |(x, y): (f64, f64)| {
            let (cx, cy) = img.grid.nearest(x, y);
            let mut m: f64 = 0.0;
            for ix in cx.saturating_sub(1)..=(cx + 1).min(31) {
                for iy in cy.saturating_sub(1)..=(cy + 1).min(31) {
                    m = m.max(img.get(ix, iy));
                }
            }
            m
        };
        let (pa, pb) = (local_peak(a), local_peak(b));
        assert!((pa - pb).abs() <= 0.1 * pa.max(pb), "{pa} vs {pb}");
        assert!(pa.min(pb) > 0.9);
    }

    #[test]
    fn translation_moves_the_peak() {
        // Fine local grid: pitch below the cross-range resolution, edges
        // short of the first x grating lobe of the 32-step scan.
        let g = ImageGrid::centered(0.03, 0.03, 24, 24);
        let (px, py) = g.pixel_pitch();
        let base = (-0.01, 0.005);
        let shifted = (base.0 + 3.0 * px, base.1 - 2.0 * py);
        let peak = |p: (f64, f64)| {
            backproject(
                &scan_of(vec![PointTarget::new(p.0, p.1, Z0, 1.0)], 0.0),
                &g,
                Z0,
                Execution::default(),
            )
            .unwrap()
            .peak_position()
        };
        let (a, b) = (peak(base), peak(shifted));
        assert!(((b.0 - a.0) - (shifted.0 - base.0)).abs() <= px + 1e-9);
        assert!(((b.1 - a.1) - (shifted.1 - base.1)).abs() <= py + 1e-9);
    }

    #[test]
    fn complex_sum_is_linear_in_the_scans() {
        let g = ImageGrid::centered(0.05, 0.05, 8, 8);
        let s1 = scan_of(vec![PointTarget::new(0.01, 0.0, Z0, 1.0)], 0.0);
        let s2 = scan_of(vec![PointTarget::new(-0.02, 0.03, Z0 + 0.02, 0.7)], 0.0);
        let c1 = backproject_complex(&s1, &g, Z0, Execution::Sequential).unwrap();
        let c2 = backproject_complex(&s2, &g, Z0, Execution::Sequential).unwrap();
        let both = backproject(&s1.add(&s2).unwrap(), &g, Z0, Execution::Sequential).unwrap();
        for (i, v) in both.pixels.iter().enumerate() {
            let expect = (c1[i] + c2[i]).norm() / both.raw_peak;
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn reflectivity_scales_raw_peak() {
        let g = ImageGrid::centered(0.03, 0.03, 8, 8);
        let img = |sigma| {
            backproject(
                &scan_of(vec![PointTarget::new(0.0, 0.0, Z0, sigma)], 0.0),
                &g,
                Z0,
                Execution::default(),
            )
            .unwrap()
        };
        let (a, b) = (img(1.0), img(3.5));
        assert!((b.raw_peak / a.raw_peak - 3.5).abs() < 0.035);
        for (x, y) in a.pixels.iter().zip(&b.pixels) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let g = ImageGrid::centered(0.05, 0.05, 10, 10);
        let s = scan_of(vec![PointTarget::new(0.01, 0.02, Z0, 1.0)], 50.0);
        let a = backproject(&s, &g, Z0, Execution::Sequential).unwrap();
        let b = backproject(&s, &g, Z0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_image_has_unit_snr() {
        let img = SarImage {
            pixels: vec![0.5; 100],
            grid: ImageGrid::centered(1.0, 1.0, 10, 10),
            z_slice: Z0,
            raw_peak: 0.5,
        };
        let snr = image_snr(&img, &TargetMask::around(0.0, 0.0, 0.3)).unwrap();
        assert!((snr - 1.0).abs() < 1e-12);
        // Between pixel centres: covers nothing.
        assert!(image_snr(&img, &TargetMask::around(0.1, 0.1, 0.01)).is_err());
        assert!(image_snr(&img, &TargetMask::around(0.0, 0.0, 1.5)).is_err());
    }

    #[test]
    fn degenerate_scans_are_rejected() {
        assert!(ApertureScan::new(vec![], vec![]).is_err());
        let (cfg, geom, _) = setup();
        let line: Vec<(f64, f64)> = (0..4).map(|i| (i as f64 * 0.01, 0.0)).collect();
        let cloud = TargetCloud::new(vec![PointTarget::new(0.0, 0.0, Z0, 1.0)]);
        assert!(simulate_aperture_scan(&cloud, &geom, &cfg, 0.0, 0, Z0, &line, Execution::default()).is_err());
        let raw = simulate_scene(&cloud, &geom, &cfg, &NoiseSpec::NONE).unwrap();
        let grid_pos = vec![(0.0, 0.0), (0.01, 0.01)];
        assert!(ApertureScan::new(grid_pos, vec![raw.clone(), raw]).is_err());
    }

    #[test]
    fn pgm_round_trip_header() {
        let img = backproject(
            &scan_of(vec![PointTarget::new(0.0, 0.0, Z0, 1.0)], 0.0),
            &ImageGrid::centered(0.05, 0.05, 6, 4),
            Z0,
            Execution::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let sidecar = write_pgm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n6 4\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 2 * 24);
        let text = std::fs::read_to_string(sidecar).unwrap();
        assert!(text.contains("x_min = -0.05") && text.contains("ny = 4"));
    }
}
