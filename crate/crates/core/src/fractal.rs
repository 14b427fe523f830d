//! Attraction-basin sweeps over a window of complex initial volatilities.
//!
//! Window coordinates are in vols (1 vol = 1%). Each pixel is converted to a
//! decimal volatility, scaled to total volatility `σ̂ = σ√T` and handed to the
//! solver. Pixels are independent, so the sweep runs data-parallel on the
//! current rayon pool and collects in raster order; the grid is identical
//! under any worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::pricing::{bs_price, normalized_price, NormalizedProblem, OptionSpec};
use crate::solver::{newton_step_raw, SolveOutcome, Solver, SolverConfig, Status};

/// Residual every census representative must reach.
pub const CENSUS_RESIDUAL: f64 = 1e-8;
/// Default census clustering radius, in decimal total volatility.
pub const DEFAULT_CLUSTER_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("window bounds must be finite with min < max, got re [{0}, {1}], im [{2}, {3}]")]
    Bounds(f64, f64, f64, f64),
    #[error("window must be at least 1x1 pixels")]
    Empty,
}

/// Rectangular region of the volatility plane, in vols, sampled on a closed
/// grid (endpoints included). Row 0 is the top edge (largest imaginary part).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn new(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, WindowError> {
        let finite = [re_min, re_max, im_min, im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || re_min >= re_max || im_min >= im_max {
            return Err(WindowError::Bounds(re_min, re_max, im_min, im_max));
        }
        if width == 0 || height == 0 {
            return Err(WindowError::Empty);
        }
        Ok(Window {
            re_min,
            re_max,
            im_min,
            im_max,
            width,
            height,
        })
    }

    pub fn square(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        n: usize,
    ) -> Result<Self, WindowError> {
        Self::new(re_min, re_max, im_min, im_max, n, n)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel `(i, j)` in vols: column `i` from the left, row `j` from the top.
    ///
    /// Computed as a weighted mean of the two edges so that a window symmetric
    /// about the real axis produces exactly negated imaginary parts in
    /// mirrored rows.
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            lerp(self.re_min, self.re_max, i, self.width),
            lerp(self.im_max, self.im_min, j, self.height),
        )
    }

    /// Same window with the imaginary range negated.
    pub fn conjugate(&self) -> Window {
        Window {
            im_min: -self.im_max,
            im_max: -self.im_min,
            ..*self
        }
    }
}

fn lerp(start: f64, end: f64, k: usize, n: usize) -> f64 {
    if n == 1 {
        return start.min(end);
    }
    let last = (n - 1) as f64;
    let k = k as f64;
    (start * (last - k) + end * k) / last
}

/// Vol-unit pixel coordinate to the solver's total-volatility coordinate.
pub fn vol_to_total(point_vols: Complex64, maturity: f64) -> Complex64 {
    point_vols / 100.0 * maturity.sqrt()
}

/// Per-pixel outcomes of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationGrid {
    pub window: Window,
    pub problem: NormalizedProblem,
    pub config: SolverConfig,
    /// Row-major from the top-left pixel.
    pub cells: Vec<SolveOutcome>,
}

impl ClassificationGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SolveOutcome {
        &self.cells[j * self.window.width + i]
    }

    /// Number of cells per status: (real, complex, failed).
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for c in &self.cells {
            match c.status {
                Status::ConvergedReal => out.0 += 1,
                Status::ConvergedComplex => out.1 += 1,
                Status::Failed(_) => out.2 += 1,
            }
        }
        out
    }
}

/// Solves from every pixel of `window`.
pub fn sweep(window: &Window, solver: &Solver) -> ClassificationGrid {
    let maturity = solver.problem().maturity;
    let width = window.width;
    let cells = (0..window.len())
        .into_par_iter()
        .map(|k| solver.solve(vol_to_total(window.point(k % width, k / width), maturity)))
        .collect();
    ClassificationGrid {
        window: *window,
        problem: *solver.problem(),
        config: *solver.config(),
        cells,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

/// Colour endpoints. Converged cells shade from dark (1 step) to light
/// (`L` steps); failed cells are `black`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Palette {
    pub blue_dark: Rgb,
    pub blue_light: Rgb,
    pub red_dark: Rgb,
    pub red_light: Rgb,
    pub black: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            blue_dark: Rgb(0, 0, 96),
            blue_light: Rgb(160, 200, 255),
            red_dark: Rgb(96, 0, 0),
            red_light: Rgb(255, 180, 160),
            black: Rgb(0, 0, 0),
        }
    }
}

impl Palette {
    pub fn color(&self, status: Status, steps: u32, max_iterations: u32) -> Rgb {
        match status {
            Status::ConvergedReal => shade(self.blue_dark, self.blue_light, steps, max_iterations),
            Status::ConvergedComplex => shade(self.red_dark, self.red_light, steps, max_iterations),
            Status::Failed(_) => self.black,
        }
    }
}

/// `dark + (n−1)/(L−1)·(light − dark)` per channel, rounded half up, in
/// integer arithmetic.
fn shade(dark: Rgb, light: Rgb, steps: u32, max_iterations: u32) -> Rgb {
    if max_iterations <= 1 {
        return dark;
    }
    let den = i64::from(max_iterations - 1);
    let n = i64::from(steps.clamp(1, max_iterations) - 1);
    let channel = |d: u8, l: u8| -> u8 {
        let num = n * (i64::from(l) - i64::from(d));
        let offset = (2 * num + den).div_euclid(2 * den);
        (i64::from(d) + offset).clamp(0, 255) as u8
    };
    Rgb(
        channel(dark.0, light.0),
        channel(dark.1, light.1),
        channel(dark.2, light.2),
    )
}

/// 8-bit RGB raster, row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn pixel(&self, i: usize, j: usize) -> Rgb {
        self.pixels[j * self.width + i]
    }

    /// Binary PPM: `P6\n<width> <height>\n255\n` followed by RGB bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + 3 * self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        for p in &self.pixels {
            out.extend_from_slice(&[p.0, p.1, p.2]);
        }
        out
    }

    /// Rows in reverse order.
    pub fn flipped_vertically(&self) -> Image {
        let pixels = self
            .pixels
            .chunks(self.width)
            .rev()
            .flat_map(|row| row.iter().copied())
            .collect();
        Image {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

pub fn render(grid: &ClassificationGrid, palette: &Palette, max_iterations: u32) -> Image {
    let pixels = grid
        .cells
        .iter()
        .map(|c| palette.color(c.status, c.steps, max_iterations))
        .collect();
    Image {
        width: grid.window.width,
        height: grid.window.height,
        pixels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusEntry {
    /// Root in decimal total volatility.
    pub root: Complex64,
    pub residual: f64,
    pub basin_pixels: usize,
}

/// Distinct roots reached from the grid, with basin sizes.
///
/// Converged cells are clustered greedily in raster order: a root joins the
/// first representative within `cluster_radius`, otherwise it starts a new
/// cluster. Each representative is then re-checked against
/// [`CENSUS_RESIDUAL`], with up to a few raw Newton polishing steps; clusters
/// that cannot reach it are left out. Sorted by descending basin size, ties
/// by real then imaginary part.
///
/// Roots accumulate at the origin, so close to it distinct roots can lie
/// within `cluster_radius` of each other; those merge, and which one
/// represents the cluster depends on scan order.
pub fn root_census(grid: &ClassificationGrid, cluster_radius: f64) -> Vec<CensusEntry> {
    let mut reps: Vec<(Complex64, usize)> = Vec::new();
    for root in grid
        .cells
        .iter()
        .filter(|c| c.status.is_converged())
        .filter_map(|c| c.root)
    {
        match reps
            .iter_mut()
            .find(|(r, _)| (*r - root).norm() <= cluster_radius)
        {
            Some((_, count)) => *count += 1,
            None => reps.push((root, 1)),
        }
    }
    let problem = &grid.problem;
    let mut entries: Vec<CensusEntry> = reps
        .into_iter()
        .filter_map(|(root, basin_pixels)| {
            let (root, residual) = polish(root, problem)?;
            Some(CensusEntry {
                root,
                residual,
                basin_pixels,
            })
        })
        .collect();
    entries.sort_by(|a, b| {
        b.basin_pixels
            .cmp(&a.basin_pixels)
            .then_with(|| a.root.re.total_cmp(&b.root.re))
            .then_with(|| a.root.im.total_cmp(&b.root.im))
    });
    entries
}

fn residual(root: Complex64, problem: &NormalizedProblem) -> Option<f64> {
    let r = (normalized_price(root, problem).ok()? - problem.target).norm();
    r.is_finite().then_some(r)
}

fn polish(mut root: Complex64, problem: &NormalizedProblem) -> Option<(Complex64, f64)> {
    for _ in 0..8 {
        let r = residual(root, problem)?;
        if r <= CENSUS_RESIDUAL {
            return Some((root, r));
        }
        root = newton_step_raw(root, problem).ok()?;
    }
    let r = residual(root, problem)?;
    (r <= CENSUS_RESIDUAL).then_some((root, r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    /// `|f(σ)|`.
    PriceModulus,
    /// `|f(σ) − V|`.
    ErrorModulus { target_price: f64 },
}

/// Real-valued grid over a window, row-major from the top-left. Cells where
/// the price overflows or the volatility is zero hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub window: Window,
    pub values: Vec<f64>,
}

impl SurfaceGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.window.width + i]
    }
}

/// Modulus of the discounted price, or of the calibration error, over the
/// window. Pixels are volatilities `σ` (not total volatilities).
pub fn surface(window: &Window, spec: &OptionSpec, kind: SurfaceKind) -> SurfaceGrid {
    let width = window.width;
    let values = (0..window.len())
        .into_par_iter()
        .map(|k| {
            let sigma = window.point(k % width, k / width) / 100.0;
            let v = match bs_price(sigma, spec) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            let m = match kind {
                SurfaceKind::PriceModulus => v.norm(),
                SurfaceKind::ErrorModulus { target_price } => (v - target_price).norm(),
            };
            if m.is_finite() {
                m
            } else {
                f64::INFINITY
            }
        })
        .collect();
    SurfaceGrid {
        window: *window,
        values,
    }
}

/// One CSV row per pixel row, top row first; 17 significant digits, `inf`
/// for the overflow sentinel.
pub fn surface_csv(grid: &SurfaceGrid) -> String {
    let mut out = String::new();
    for row in grid.values.chunks(grid.window.width) {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Header `re,im,residual,basin_pixels`; roots in decimal total volatility.
pub fn census_csv(entries: &[CensusEntry]) -> String {
    let mut out = String::from("re,im,residual,basin_pixels\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_value(e.root.re),
            format_value(e.root.im),
            format_value(e.residual),
            e.basin_pixels
        ));
    }
    out
}

pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}
