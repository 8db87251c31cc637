//! Magnetic anomaly maps.
//!
//! A [`MagneticMap`] is a uniform grid of anomaly values in nT over local
//! east/north meters (flat earth). Values are stored row-major with the
//! north-most row first, the same order as the text grid format:
//!
//! ```text
//! ncols 3
//! nrows 2
//! origin_east 0
//! origin_north 0
//! cellsize 100
//! 4 5 6
//! 1 2 3
//! ```
//!
//! Here node `(east=0, north=0)` holds 1 and node `(east=200, north=100)` holds 6.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gaussian-bump factors below this are treated as exactly zero.
const BUMP_CUTOFF: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("query ({east:.3}, {north:.3}) lies outside the map extent")]
    OutOfBounds { east: f64, north: f64 },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid synthetic map spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticMap {
    origin_east: f64,
    origin_north: f64,
    cell_size: f64,
    n_cols: usize,
    n_rows: usize,
    values: Vec<f64>,
}

impl MagneticMap {
    /// Builds a map from north-first row-major values.
    pub fn new(
        origin_east: f64,
        origin_north: f64,
        cell_size: f64,
        n_cols: usize,
        n_rows: usize,
        values: Vec<f64>,
    ) -> Result<Self, MapError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(MapError::InvalidMap(format!("cell size {cell_size} must be positive")));
        }
        if n_cols < 2 || n_rows < 2 {
            return Err(MapError::InvalidMap(format!(
                "grid must be at least 2x2, got {n_cols}x{n_rows}"
            )));
        }
        if !origin_east.is_finite() || !origin_north.is_finite() {
            return Err(MapError::InvalidMap("origin must be finite".into()));
        }
        if values.len() != n_cols * n_rows {
            return Err(MapError::InvalidMap(format!(
                "{} values for a {n_cols}x{n_rows} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MapError::InvalidMap(format!("value {i} is not finite")));
        }
        Ok(Self {
            origin_east,
            origin_north,
            cell_size,
            n_cols,
            n_rows,
            values,
        })
    }

    /// A map holding the same value everywhere.
    pub fn constant(
        origin_east: f64,
        origin_north: f64,
        cell_size: f64,
        n_cols: usize,
        n_rows: usize,
        value: f64,
    ) -> Result<Self, MapError> {
        Self::new(
            origin_east,
            origin_north,
            cell_size,
            n_cols,
            n_rows,
            vec![value; n_cols * n_rows],
        )
    }

    /// Baseline plus a sum of Gaussian bumps, evaluated at every node.
    ///
    /// Each bump is evaluated as a separable product; factors below 1e-15
    /// (beyond about 8.3 sigma) are skipped.
    pub fn from_bumps(
        origin_east: f64,
        origin_north: f64,
        cell_size: f64,
        n_cols: usize,
        n_rows: usize,
        baseline: f64,
        bumps: &[GaussianBump],
    ) -> Result<Self, MapError> {
        let mut map = Self::constant(origin_east, origin_north, cell_size, n_cols, n_rows, baseline)?;
        let mut east_factor = vec![0.0; n_cols];
        let mut north_factor = vec![0.0; n_rows];
        for bump in bumps {
            if !(bump.sigma > 0.0) || !bump.amplitude.is_finite() {
                return Err(MapError::InvalidSpec(format!("bad bump {bump:?}")));
            }
            let inv = 1.0 / (2.0 * bump.sigma * bump.sigma);
            for (c, f) in east_factor.iter_mut().enumerate() {
                let d = map.node_east(c) - bump.east;
                *f = (-d * d * inv).exp();
            }
            for (r, f) in north_factor.iter_mut().enumerate() {
                let d = map.node_north(r) - bump.north;
                *f = (-d * d * inv).exp();
            }
            let Some((c0, c1)) = active_span(&east_factor) else { continue };
            let Some((r0, r1)) = active_span(&north_factor) else { continue };
            for r in r0..=r1 {
                let fr = bump.amplitude * north_factor[r];
                let row = map.storage_row(r);
                let slice = &mut map.values[row * n_cols..(row + 1) * n_cols];
                for c in c0..=c1 {
                    slice[c] += fr * east_factor[c];
                }
            }
        }
        Ok(map)
    }

    pub fn origin_east(&self) -> f64 {
        self.origin_east
    }

    pub fn origin_north(&self) -> f64 {
        self.origin_north
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Row-major values, north-most row first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_east(&self) -> f64 {
        self.origin_east + (self.n_cols - 1) as f64 * self.cell_size
    }

    pub fn max_north(&self) -> f64 {
        self.origin_north + (self.n_rows - 1) as f64 * self.cell_size
    }

    pub fn contains(&self, east: f64, north: f64) -> bool {
        east >= self.origin_east
            && east <= self.max_east()
            && north >= self.origin_north
            && north <= self.max_north()
    }

    /// East coordinate of grid column `col`.
    pub fn node_east(&self, col: usize) -> f64 {
        self.origin_east + col as f64 * self.cell_size
    }

    /// North coordinate of the node `row_from_south` rows above the origin.
    pub fn node_north(&self, row_from_south: usize) -> f64 {
        self.origin_north + row_from_south as f64 * self.cell_size
    }

    /// Value at column `col`, `row_from_south` rows above the origin.
    pub fn node_value(&self, col: usize, row_from_south: usize) -> f64 {
        self.values[self.storage_row(row_from_south) * self.n_cols + col]
    }

    #[inline]
    fn storage_row(&self, row_from_south: usize) -> usize {
        self.n_rows - 1 - row_from_south
    }

    /// Bilinear interpolation of the four nodes around `(east, north)`.
    pub fn sample(&self, east: f64, north: f64) -> Result<f64, MapError> {
        self.try_sample(east, north)
            .ok_or(MapError::OutOfBounds { east, north })
    }

    /// Like [`sample`](Self::sample), `None` outside the extent.
    #[inline]
    pub fn try_sample(&self, east: f64, north: f64) -> Option<f64> {
        let fx = (east - self.origin_east) / self.cell_size;
        let fy = (north - self.origin_north) / self.cell_size;
        let max_x = (self.n_cols - 1) as f64;
        let max_y = (self.n_rows - 1) as f64;
        // NaN fails both comparisons and lands here too.
        if !(fx >= 0.0 && fx <= max_x && fy >= 0.0 && fy <= max_y) {
            return None;
        }
        let i = (fx as usize).min(self.n_cols - 2);
        let j = (fy as usize).min(self.n_rows - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let lower = (self.n_rows - 1 - j) * self.n_cols + i;
        let upper = lower - self.n_cols;
        let v00 = self.values[lower];
        let v10 = self.values[lower + 1];
        let v01 = self.values[upper];
        let v11 = self.values[upper + 1];
        let south = (1.0 - tx) * v00 + tx * v10;
        let north_edge = (1.0 - tx) * v01 + tx * v11;
        Some((1.0 - ty) * south + ty * north_edge)
    }

    /// Gaussian low-pass of the value matrix; `smoothing_sigma` in meters.
    ///
    /// Uses a normalized, separable kernel with symmetric (half-sample)
    /// boundary extension, so constants are preserved and the value variance
    /// never increases.
    pub fn degrade_resolution(&self, smoothing_sigma: f64) -> Result<Self, MapError> {
        if !(smoothing_sigma >= 0.0) || !smoothing_sigma.is_finite() {
            return Err(MapError::InvalidMap(format!(
                "smoothing sigma {smoothing_sigma} must be non-negative"
            )));
        }
        if smoothing_sigma == 0.0 {
            return Ok(self.clone());
        }
        let kernel = gaussian_kernel(smoothing_sigma / self.cell_size);
        let (nc, nr) = (self.n_cols, self.n_rows);
        let mut tmp = vec![0.0; self.values.len()];
        for r in 0..nr {
            let src = &self.values[r * nc..(r + 1) * nc];
            convolve_symmetric(src, &kernel, &mut tmp[r * nc..(r + 1) * nc]);
        }
        let mut out = vec![0.0; self.values.len()];
        let mut column = vec![0.0; nr];
        let mut smoothed = vec![0.0; nr];
        for c in 0..nc {
            for r in 0..nr {
                column[r] = tmp[r * nc + c];
            }
            convolve_symmetric(&column, &kernel, &mut smoothed);
            for r in 0..nr {
                out[r * nc + c] = smoothed[r];
            }
        }
        Self::new(self.origin_east, self.origin_north, self.cell_size, nc, nr, out)
    }

    pub fn load_grid(path: impl AsRef<Path>) -> Result<Self, MapError> {
        Self::parse_grid(&fs::read_to_string(path)?)
    }

    pub fn save_grid(&self, path: impl AsRef<Path>) -> Result<(), MapError> {
        fs::write(path, self.to_grid_string())?;
        Ok(())
    }

    pub fn to_grid_string(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 12 + 128);
        let _ = writeln!(s, "ncols {}", self.n_cols);
        let _ = writeln!(s, "nrows {}", self.n_rows);
        let _ = writeln!(s, "origin_east {}", self.origin_east);
        let _ = writeln!(s, "origin_north {}", self.origin_north);
        let _ = writeln!(s, "cellsize {}", self.cell_size);
        for row in self.values.chunks(self.n_cols) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                // `Display` for f64 is the shortest string that round-trips.
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_grid(text: &str) -> Result<Self, MapError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut header = |key: &str| -> Result<(usize, String), MapError> {
            let (line, content) = lines.next().ok_or(MapError::Parse {
                line: 0,
                message: format!("missing header `{key}`"),
            })?;
            let mut parts = content.split_whitespace();
            let found = parts.next().unwrap_or_default();
            if !found.eq_ignore_ascii_case(key) {
                return Err(MapError::Parse {
                    line,
                    message: format!("expected header `{key}`, found `{found}`"),
                });
            }
            let value = parts.next().ok_or(MapError::Parse {
                line,
                message: format!("header `{key}` has no value"),
            })?;
            if parts.next().is_some() {
                return Err(MapError::Parse {
                    line,
                    message: format!("trailing tokens after `{key}`"),
                });
            }
            Ok((line, value.to_string()))
        };

        let parse_usize = |(line, v): (usize, String), key: &str| {
            v.parse::<usize>().map_err(|e| MapError::Parse {
                line,
                message: format!("`{key}` value `{v}`: {e}"),
            })
        };
        let parse_f64 = |(line, v): (usize, String), key: &str| {
            v.parse::<f64>().map_err(|e| MapError::Parse {
                line,
                message: format!("`{key}` value `{v}`: {e}"),
            })
        };

        let n_cols = parse_usize(header("ncols")?, "ncols")?;
        let n_rows = parse_usize(header("nrows")?, "nrows")?;
        let origin_east = parse_f64(header("origin_east")?, "origin_east")?;
        let origin_north = parse_f64(header("origin_north")?, "origin_north")?;
        let cell_size = parse_f64(header("cellsize")?, "cellsize")?;

        let mut values = Vec::with_capacity(n_cols.saturating_mul(n_rows));
        let mut rows_seen = 0;
        let mut last_line = 5;
        for (line, content) in lines {
            last_line = line;
            if rows_seen == n_rows {
                return Err(MapError::DimensionMismatch {
                    line,
                    expected: n_rows,
                    found: rows_seen + 1,
                });
            }
            let before = values.len();
            for (field, tok) in content.split_whitespace().enumerate() {
                let v = tok.parse::<f64>().map_err(|e| MapError::Parse {
                    line,
                    message: format!("field {}: `{tok}`: {e}", field + 1),
                })?;
                values.push(v);
            }
            let found = values.len() - before;
            if found != n_cols {
                return Err(MapError::DimensionMismatch {
                    line,
                    expected: n_cols,
                    found,
                });
            }
            rows_seen += 1;
        }
        if rows_seen != n_rows {
            return Err(MapError::DimensionMismatch {
                line: last_line,
                expected: n_rows,
                found: rows_seen,
            });
        }
        Self::new(origin_east, origin_north, cell_size, n_cols, n_rows, values)
    }
}

fn active_span(factors: &[f64]) -> Option<(usize, usize)> {
    let first = factors.iter().position(|&f| f >= BUMP_CUTOFF)?;
    let last = factors.iter().rposition(|&f| f >= BUMP_CUTOFF)?;
    Some((first, last))
}

/// Normalized 1-D Gaussian kernel with radius `ceil(4 sigma)` samples.
fn gaussian_kernel(sigma_cells: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_cells).ceil().max(1.0) as usize;
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d * inv).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Convolution with the signal extended periodically-symmetric
/// (`... c b a | a b c | c b a ...`).
fn convolve_symmetric(src: &[f64], kernel: &[f64], dst: &mut [f64]) {
    let n = src.len() as isize;
    let radius = (kernel.len() / 2) as isize;
    let period = 2 * n;
    for (i, out) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (t, w) in kernel.iter().enumerate() {
            let mut m = (i as isize + t as isize - radius).rem_euclid(period);
            if m >= n {
                m = period - 1 - m;
            }
            acc += w * src[m as usize];
        }
        *out = acc;
    }
}

/// One isotropic Gaussian anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub east: f64,
    pub north: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

impl GaussianBump {
    pub fn eval(&self, east: f64, north: f64) -> f64 {
        let de = east - self.east;
        let dn = north - self.north;
        self.amplitude * (-(de * de + dn * dn) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Recipe for a reproducible synthetic anomaly field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMapSpec {
    pub seed: u64,
    #[serde(default)]
    pub origin_east: f64,
    #[serde(default)]
    pub origin_north: f64,
    /// (east, north) size in meters.
    pub extent: (f64, f64),
    pub cell_size: f64,
    pub baseline: f64,
    pub bump_count: usize,
    pub bump_amplitude_range: (f64, f64),
    pub bump_sigma_range: (f64, f64),
}

impl SyntheticMapSpec {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: String| Err(MapError::InvalidSpec(m));
        if !(self.extent.0 > 0.0 && self.extent.1 > 0.0) || !self.extent.0.is_finite() || !self.extent.1.is_finite() {
            return bad(format!("extent {:?} must be positive", self.extent));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return bad(format!("cell size {} must be positive", self.cell_size));
        }
        if self.extent.0 < self.cell_size || self.extent.1 < self.cell_size {
            return bad("extent must span at least one cell".into());
        }
        let (a0, a1) = self.bump_amplitude_range;
        if !a0.is_finite() || !a1.is_finite() || a0 > a1 {
            return bad(format!("amplitude range {:?}", self.bump_amplitude_range));
        }
        let (s0, s1) = self.bump_sigma_range;
        if !(s0 > 0.0) || !s1.is_finite() || s0 > s1 {
            return bad(format!("sigma range {:?}", self.bump_sigma_range));
        }
        if !self.baseline.is_finite() {
            return bad("baseline must be finite".into());
        }
        Ok(())
    }

    pub fn n_cols(&self) -> usize {
        (self.extent.0 / self.cell_size).floor() as usize + 1
    }

    pub fn n_rows(&self) -> usize {
        (self.extent.1 / self.cell_size).floor() as usize + 1
    }

    /// The bumps this spec produces, drawn in a fixed order from `seed`.
    pub fn draw_bumps(&self) -> Vec<GaussianBump> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (a0, a1) = self.bump_amplitude_range;
        let (s0, s1) = self.bump_sigma_range;
        (0..self.bump_count)
            .map(|_| GaussianBump {
                east: self.origin_east + rng.random::<f64>() * self.extent.0,
                north: self.origin_north + rng.random::<f64>() * self.extent.1,
                amplitude: a0 + rng.random::<f64>() * (a1 - a0),
                sigma: s0 + rng.random::<f64>() * (s1 - s0),
            })
            .collect()
    }

    pub fn generate(&self) -> Result<MagneticMap, MapError> {
        self.validate()?;
        MagneticMap::from_bumps(
            self.origin_east,
            self.origin_north,
            self.cell_size,
            self.n_cols(),
            self.n_rows(),
            self.baseline,
            &self.draw_bumps(),
        )
    }
}

/// Free-function form of [`SyntheticMapSpec::generate`].
pub fn generate_synthetic(spec: &SyntheticMapSpec) -> Result<MagneticMap, MapError> {
    spec.generate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_cell(v: [f64; 4]) -> MagneticMap {
        // north-first: [nw, ne, sw, se]
        MagneticMap::new(0.0, 0.0, 1.0, 2, 2, v.to_vec()).unwrap()
    }

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn constant_map_samples_constant() {
        let m = MagneticMap::constant(-50.0, 20.0, 10.0, 5, 4, 50.0).unwrap();
        for &(e, n) in &[(-50.0, 20.0), (-13.7, 41.2), (-10.0, 50.0), (-10.0, 20.0)] {
            assert_eq!(m.sample(e, n).unwrap(), 50.0);
        }
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let m = unit_cell([20.0, 30.0, 0.0, 10.0]);
        assert_eq!(m.sample(0.5, 0.5).unwrap(), 15.0);
    }

    #[test]
    fn node_query_is_exact() {
        let mut v = vec![0.0; 12];
        v[5] = 42.5;
        let m = MagneticMap::new(100.0, 200.0, 25.0, 4, 3, v).unwrap();
        // storage index 5 = second row from the top (row 1 from south), col 1
        assert_eq!(m.node_value(1, 1), 42.5);
        assert_eq!(m.sample(125.0, 225.0).unwrap(), 42.5);
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let m = unit_cell([0.0; 4]);
        assert!(matches!(m.sample(1.01, 0.5), Err(MapError::OutOfBounds { .. })));
        assert!(matches!(m.sample(0.5, -1e-9), Err(MapError::OutOfBounds { .. })));
        assert!(m.try_sample(f64::NAN, 0.5).is_none());
        assert!(m.sample(1.0, 1.0).is_ok());
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(MagneticMap::new(0.0, 0.0, 0.0, 2, 2, vec![0.0; 4]).is_err());
        assert!(MagneticMap::new(0.0, 0.0, 1.0, 1, 2, vec![0.0; 2]).is_err());
        assert!(MagneticMap::new(0.0, 0.0, 1.0, 2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(MagneticMap::new(0.0, 0.0, 1.0, 2, 2, vec![0.0; 3]).is_err());
    }

    fn spec(bumps: usize, seed: u64) -> SyntheticMapSpec {
        SyntheticMapSpec {
            seed,
            origin_east: 0.0,
            origin_north: 0.0,
            extent: (5000.0, 3000.0),
            cell_size: 50.0,
            baseline: 100.0,
            bump_count: bumps,
            bump_amplitude_range: (-200.0, 200.0),
            bump_sigma_range: (150.0, 600.0),
        }
    }

    #[test]
    fn zero_bumps_is_constant_baseline() {
        let m = spec(0, 1).generate().unwrap();
        assert!(m.values().iter().all(|&v| v == 100.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = spec(40, 9).generate().unwrap();
        let b = spec(40, 9).generate().unwrap();
        assert_eq!(a.values(), b.values());
        let c = spec(40, 10).generate().unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn bump_center_value_matches_direct_sum() {
        let bump = GaussianBump {
            east: 1000.0,
            north: 600.0,
            amplitude: 137.25,
            sigma: 220.0,
        };
        let m = MagneticMap::from_bumps(0.0, 0.0, 50.0, 61, 41, 12.0, &[bump]).unwrap();
        // direct expression: baseline + A * exp(0)
        let direct = 12.0 + 137.25 * (-(0.0f64) / (2.0 * 220.0 * 220.0)).exp();
        assert!((m.node_value(20, 12) - direct).abs() < 1e-9);
        // and off-center nodes follow the closed form
        for &(c, r) in &[(0, 0), (25, 14), (60, 40), (17, 5)] {
            let e = m.node_east(c);
            let n = m.node_north(r);
            assert!((m.node_value(c, r) - (12.0 + bump.eval(e, n))).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = spec(1, 0);
        s.cell_size = 0.0;
        assert!(matches!(s.generate(), Err(MapError::InvalidSpec(_))));
        let mut s = spec(1, 0);
        s.extent.0 = -1.0;
        assert!(matches!(s.generate(), Err(MapError::InvalidSpec(_))));
        let mut s = spec(1, 0);
        s.bump_sigma_range = (0.0, 10.0);
        assert!(matches!(s.generate(), Err(MapError::InvalidSpec(_))));
    }

    #[test]
    fn zero_smoothing_is_identity() {
        let m = spec(20, 3).generate().unwrap();
        assert_eq!(m.degrade_resolution(0.0).unwrap(), m);
    }

    #[test]
    fn smoothing_constant_is_identity() {
        let m = MagneticMap::constant(0.0, 0.0, 10.0, 30, 20, -73.5).unwrap();
        let s = m.degrade_resolution(35.0).unwrap();
        for v in s.values() {
            assert!((v + 73.5).abs() < 1e-12);
        }
    }

    /// Straightforward 2-D convolution, clamping nothing: the source is
    /// extended by explicit mirroring into a padded buffer first.
    fn oracle_smooth(m: &MagneticMap, sigma_cells: f64) -> Vec<f64> {
        let (nc, nr) = (m.n_cols() as isize, m.n_rows() as isize);
        let radius = (4.0 * sigma_cells).ceil() as isize;
        let mirror = |i: isize, n: isize| -> usize {
            let p = 2 * n;
            let mut k = ((i % p) + p) % p;
            if k >= n {
                k = p - 1 - k;
            }
            k as usize
        };
        let w = |d: isize| (-(d * d) as f64 / (2.0 * sigma_cells * sigma_cells)).exp();
        let norm: f64 = (-radius..=radius).map(w).sum();
        let mut out = vec![0.0; (nc * nr) as usize];
        for r in 0..nr {
            for c in 0..nc {
                let mut acc = 0.0;
                for dr in -radius..=radius {
                    for dc in -radius..=radius {
                        let rr = mirror(r + dr, nr);
                        let cc = mirror(c + dc, nc);
                        acc += w(dr) * w(dc) * m.values()[rr * nc as usize + cc];
                    }
                }
                out[(r * nc + c) as usize] = acc / (norm * norm);
            }
        }
        out
    }

    #[test]
    fn single_bump_smoothing_reduces_variance() {
        let bump = GaussianBump {
            east: 200.0,
            north: 150.0,
            amplitude: 80.0,
            sigma: 30.0,
        };
        let m = MagneticMap::from_bumps(0.0, 0.0, 10.0, 41, 31, 0.0, &[bump]).unwrap();
        let s = m.degrade_resolution(20.0).unwrap();
        let oracle = oracle_smooth(&m, 2.0);
        for (a, b) in s.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(variance(&oracle) < variance(m.values()));
        assert!(variance(s.values()) < variance(m.values()));
    }

    #[test]
    fn two_by_two_grid_transcribes_in_order() {
        let text = "ncols 2\nnrows 2\norigin_east 10\norigin_north 20\ncellsize 5\n1 2\n3 4\n";
        let m = MagneticMap::parse_grid(text).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.sample(10.0, 25.0).unwrap(), 1.0);
        assert_eq!(m.sample(15.0, 20.0).unwrap(), 4.0);
    }

    #[test]
    fn short_rows_are_dimension_mismatch() {
        let text = "ncols 4\nnrows 2\norigin_east 0\norigin_north 0\ncellsize 1\n1 2 3\n4 5 6\n";
        match MagneticMap::parse_grid(text) {
            Err(MapError::DimensionMismatch { line, expected, found }) => {
                assert_eq!((line, expected, found), (6, 4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "ncols 2\nnrows 3\norigin_east 0\norigin_north 0\ncellsize 1\n1 2\n4 5\n";
        assert!(matches!(
            MagneticMap::parse_grid(text),
            Err(MapError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let text = "ncols 2\nnrows 2\norigin_east 0\norigin_north 0\ncellsize 1\n1 2\n3 x\n";
        match MagneticMap::parse_grid(text) {
            Err(MapError::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("field 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "nrows 2\n";
        assert!(matches!(MagneticMap::parse_grid(text), Err(MapError::Parse { line: 1, .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let m = spec(25, 77).generate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.grd");
        m.save_grid(&path).unwrap();
        assert_eq!(MagneticMap::load_grid(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn interpolation_within_corner_bounds(
            vals in proptest::collection::vec(-1e3f64..1e3, 12),
            fx in 0.0f64..=1.0, fy in 0.0f64..=1.0, ci in 0usize..3, cj in 0usize..2,
        ) {
            let m = MagneticMap::new(-7.0, 3.0, 2.5, 4, 3, vals).unwrap();
            let e = m.node_east(ci) + fx * 2.5;
            let n = m.node_north(cj) + fy * 2.5;
            let s = m.sample(e, n).unwrap();
            let corners = [
                m.node_value(ci, cj), m.node_value(ci + 1, cj),
                m.node_value(ci, cj + 1), m.node_value(ci + 1, cj + 1),
            ];
            let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
        }

        #[test]
        fn node_samples_are_exact(vals in proptest::collection::vec(-1e3f64..1e3, 20)) {
            let m = MagneticMap::new(0.0, 0.0, 4.0, 5, 4, vals).unwrap();
            for c in 0..5 {
                for r in 0..4 {
                    let s = m.sample(m.node_east(c), m.node_north(r)).unwrap();
                    prop_assert_eq!(s, m.node_value(c, r));
                }
            }
        }

        #[test]
        fn smoothing_never_increases_variance(
            vals in proptest::collection::vec(-500f64..500.0, 48), sigma in 0.0f64..40.0,
        ) {
            let m = MagneticMap::new(0.0, 0.0, 5.0, 8, 6, vals).unwrap();
            let s = m.degrade_resolution(sigma).unwrap();
            prop_assert!(variance(s.values()) <= variance(m.values()) + 1e-12);
        }
    }
}
