//! Gaze fixations to per-frame fixation density maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::FixationEvent;
use crate::raster::{gaussian_kernel, Grid, MAP_SIZE};

#[derive(Debug, Error, PartialEq)]
pub enum FixationError {
    #[error("screen geometry must be positive: {0}")]
    InvalidGeometry(String),
    #[error("no participants for {video_id} frame {frame_index}")]
    NoParticipants { video_id: String, frame_index: usize },
    #[error("fixation ({x}, {y}) outside {width}x{height} video")]
    OutOfBoundsFixation { x: usize, y: usize, width: usize, height: usize },
    #[error("no pixel reaches threshold {threshold}")]
    AllBelowThreshold { threshold: f64 },
}

/// Viewing setup used to convert one degree of visual angle into pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    /// Viewer distance in inches.
    pub distance_in: f64,
    pub screen_h_in: f64,
    /// Vertical resolution in pixels.
    pub screen_res_y: f64,
    #[serde(default = "one_degree")]
    pub visual_angle_deg: f64,
}

fn one_degree() -> f64 {
    1.0
}

impl Default for ScreenGeometry {
    /// The eye-tracking setup of the collected gaze data.
    fn default() -> Self {
        Self { distance_in: 13.77, screen_h_in: 23.5, screen_res_y: 768.0, visual_angle_deg: 1.0 }
    }
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<(), FixationError> {
        let fields = [
            ("distance_in", self.distance_in),
            ("screen_h_in", self.screen_h_in),
            ("screen_res_y", self.screen_res_y),
            ("visual_angle_deg", self.visual_angle_deg),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FixationError::InvalidGeometry(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

/// `2 d tan(theta / 2) * y / h`: the screen extent of the visual angle in
/// inches, times pixels per inch.
pub fn pixels_per_degree(geom: &ScreenGeometry) -> f64 {
    2.0 * geom.distance_in * (geom.visual_angle_deg.to_radians() / 2.0).tan() * geom.screen_res_y / geom.screen_h_in
}

/// Gaussian sigma whose FWHM spans one PPD.
pub fn blur_sigma(geom: &ScreenGeometry) -> f64 {
    pixels_per_degree(geom) / 2.355
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub video_id: String,
    pub frame_index: usize,
    pub grid: Grid,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryFixationMap {
    pub video_id: String,
    pub frame_index: usize,
    pub rows: usize,
    pub cols: usize,
    pub mask: Vec<bool>,
}

impl BinaryFixationMap {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn as_grid(&self) -> Grid {
        Grid::new(self.rows, self.cols, self.mask.iter().map(|&m| f64::from(u8::from(m))).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Weight each fixation pixel by its duration instead of marking presence.
    pub weight_by_duration: bool,
    pub output_size: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { weight_by_duration: false, output_size: MAP_SIZE }
    }
}

/// One participant's fixation matrix at video resolution: 1 (or summed
/// duration) at every fixated pixel.
pub fn fixation_matrix(
    events: &[FixationEvent],
    width: usize,
    height: usize,
    weight_by_duration: bool,
) -> Result<Grid, FixationError> {
    let mut g = Grid::zeros(height, width);
    for e in events {
        if e.x_px >= width || e.y_px >= height {
            return Err(FixationError::OutOfBoundsFixation { x: e.x_px, y: e.y_px, width, height });
        }
        if weight_by_duration {
            g.set(e.y_px, e.x_px, g.get(e.y_px, e.x_px) + e.duration_ms);
        } else {
            g.set(e.y_px, e.x_px, 1.0);
        }
    }
    Ok(g)
}

/// Separable Gaussian blur with zero padding; only nonzero pixels are splatted
/// so sparse fixation matrices stay cheap at full video resolution.
pub fn blur(matrix: &Grid, sigma: f64) -> Grid {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (rows, cols) = matrix.dims();
    let mut out = Grid::zeros(rows, cols);
    let values = out.values_mut();
    for y in 0..rows {
        for x in 0..cols {
            let w = matrix.get(y, x);
            if w == 0.0 {
                continue;
            }
            for (dy, ky) in (-r..=r).zip(&k) {
                let yy = y as isize + dy;
                if yy < 0 || yy >= rows as isize {
                    continue;
                }
                let row = &mut values[yy as usize * cols..(yy as usize + 1) * cols];
                for (dx, kx) in (-r..=r).zip(&k) {
                    let xx = x as isize + dx;
                    if xx >= 0 && xx < cols as isize {
                        row[xx as usize] += w * ky * kx;
                    }
                }
            }
        }
    }
    out
}

/// Blurred participant matrices averaged across participants, at video
/// resolution and before resizing or normalization.
pub fn mean_blurred_fixations(
    participants: &BTreeMap<String, Vec<FixationEvent>>,
    width: usize,
    height: usize,
    sigma: f64,
    weight_by_duration: bool,
) -> Result<Grid, FixationError> {
    let mut acc = Grid::zeros(height, width);
    for events in participants.values() {
        let blurred = blur(&fixation_matrix(events, width, height, weight_by_duration)?, sigma);
        for (a, b) in acc.values_mut().iter_mut().zip(blurred.values()) {
            *a += b;
        }
    }
    let n = participants.len() as f64;
    Ok(acc.map(|v| v / n))
}

/// Fixation density map of one frame: blur each participant's fixations,
/// average, resize to `output_size` square, min-max normalize.
pub fn build_density_map(
    video_id: &str,
    frame_index: usize,
    participants: &BTreeMap<String, Vec<FixationEvent>>,
    video_dims: (usize, usize),
    geom: &ScreenGeometry,
    opts: &DensityOptions,
) -> Result<SaliencyMap, FixationError> {
    geom.validate()?;
    if participants.is_empty() {
        return Err(FixationError::NoParticipants { video_id: video_id.to_string(), frame_index });
    }
    let (width, height) = video_dims;
    let mean = mean_blurred_fixations(participants, width, height, blur_sigma(geom), opts.weight_by_duration)?;
    let grid = mean.resize_bilinear(opts.output_size, opts.output_size).min_max_normalized();
    Ok(SaliencyMap { video_id: video_id.to_string(), frame_index, grid, normalized: true })
}

/// Pixels at or above `threshold`.
pub fn binarize(map: &SaliencyMap, threshold: f64) -> Result<BinaryFixationMap, FixationError> {
    let mask: Vec<bool> = map.grid.values().iter().map(|&v| v >= threshold).collect();
    if !mask.iter().any(|&m| m) {
        return Err(FixationError::AllBelowThreshold { threshold });
    }
    Ok(BinaryFixationMap {
        video_id: map.video_id.clone(),
        frame_index: map.frame_index,
        rows: map.grid.rows(),
        cols: map.grid.cols(),
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(p: &str, x: usize, y: usize) -> FixationEvent {
        FixationEvent {
            participant_id: p.into(),
            video_id: "v".into(),
            frame_index: 0,
            x_px: x,
            y_px: y,
            duration_ms: 200.0,
        }
    }

    fn one(p: &str, events: Vec<FixationEvent>) -> BTreeMap<String, Vec<FixationEvent>> {
        BTreeMap::from([(p.to_string(), events)])
    }

    #[test]
    fn ppd_and_sigma_for_the_recording_setup() {
        let g = ScreenGeometry::default();
        assert!((pixels_per_degree(&g) - 7.854).abs() < 0.01, "{}", pixels_per_degree(&g));
        assert!((blur_sigma(&g) - 3.335).abs() < 0.01);
        let doubled = ScreenGeometry { screen_res_y: 1536.0, ..g };
        assert!((pixels_per_degree(&doubled) - 2.0 * pixels_per_degree(&g)).abs() < 1e-12);
        let tiny = ScreenGeometry { visual_angle_deg: 1e-12, ..g };
        assert!(pixels_per_degree(&tiny) < 1e-9);
        let far = ScreenGeometry { distance_in: 2.0 * g.distance_in, ..g };
        assert!((blur_sigma(&far) - 2.0 * blur_sigma(&g)).abs() < 1e-12);
    }

    #[test]
    fn sigma_one_when_ppd_is_fwhm_constant() {
        // choose y so PPD = 2.355
        let g = ScreenGeometry::default();
        let y = 2.355 / pixels_per_degree(&g) * g.screen_res_y;
        assert!((blur_sigma(&ScreenGeometry { screen_res_y: y, ..g }) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_geometry_rejected() {
        let g = ScreenGeometry { distance_in: 0.0, ..ScreenGeometry::default() };
        assert!(matches!(g.validate(), Err(FixationError::InvalidGeometry(_))));
    }

    #[test]
    fn blur_conserves_mass_for_interior_fixations() {
        let events = vec![ev("p", 30, 40), ev("p", 70, 20), ev("p", 50, 50)];
        let m = fixation_matrix(&events, 100, 80, false).unwrap();
        let b = blur(&m, 3.335);
        assert!((b.sum() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_center_fixation_peaks_at_center() {
        let geom = ScreenGeometry::default();
        let map = build_density_map("v", 0, &one("p", vec![ev("p", 512, 384)]), (1024, 768), &geom, &DensityOptions::default()).unwrap();
        let (r, c) = map.grid.argmax();
        assert!((r as f64 - 111.5).abs() <= 1.0 && (c as f64 - 111.5).abs() <= 1.0, "{r},{c}");
        assert_eq!(map.grid.max(), 1.0);
        for k in 0..4 {
            assert!(map.grid.get(r, c + k) >= map.grid.get(r, c + k + 1));
            assert!(map.grid.get(r + k, c) >= map.grid.get(r + k + 1, c));
        }
    }

    #[test]
    fn duplicate_participants_do_not_change_the_map() {
        let geom = ScreenGeometry::default();
        let events = vec![ev("p", 100, 100), ev("p", 300, 200)];
        let mut two = one("a", events.clone());
        two.insert("b".into(), events.clone());
        let opts = DensityOptions::default();
        let a = build_density_map("v", 0, &one("a", events), (400, 300), &geom, &opts).unwrap();
        let b = build_density_map("v", 0, &two, (400, 300), &geom, &opts).unwrap();
        for (x, y) in a.grid.values().iter().zip(b.grid.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_points_match_dense_gaussian_sum() {
        let sigma = 1.5;
        let pts = [(10usize, 12usize), (30, 25)];
        let events: Vec<_> = pts.iter().map(|&(x, y)| ev("p", x, y)).collect();
        let b = blur(&fixation_matrix(&events, 40, 36, false).unwrap(), sigma);
        // dense oracle: truncated normalized 2-D gaussian summed over points
        let r = (3.0f64 * sigma).ceil() as i64;
        let norm: f64 = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).sum();
        for y in 0..36i64 {
            for x in 0..40i64 {
                let mut want = 0.0;
                for &(px, py) in &pts {
                    let (dx, dy) = (x - px as i64, y - py as i64);
                    if dx.abs() <= r && dy.abs() <= r {
                        want += (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / (norm * norm);
                    }
                }
                assert!((b.get(y as usize, x as usize) - want).abs() < 1e-12);
            }
        }
        assert!(b.get(12, 10) > b.get(12, 11) && b.get(12, 10) > b.get(13, 10));
        assert!(b.get(25, 30) > b.get(25, 29) && b.get(25, 30) > b.get(24, 30));
    }

    #[test]
    fn out_of_bounds_and_no_participants() {
        let geom = ScreenGeometry::default();
        let opts = DensityOptions::default();
        let err = build_density_map("v", 0, &one("p", vec![ev("p", 400, 10)]), (400, 300), &geom, &opts).unwrap_err();
        assert!(matches!(err, FixationError::OutOfBoundsFixation { .. }));
        let err = build_density_map("v", 3, &BTreeMap::new(), (400, 300), &geom, &opts).unwrap_err();
        assert_eq!(err, FixationError::NoParticipants { video_id: "v".into(), frame_index: 3 });
    }

    #[test]
    fn binarize_cases() {
        let zero = SaliencyMap { video_id: "v".into(), frame_index: 0, grid: Grid::zeros(4, 4), normalized: true };
        assert!(matches!(binarize(&zero, 0.5), Err(FixationError::AllBelowThreshold { .. })));
        let g = Grid::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 15.0);
        let m = binarize(&SaliencyMap { grid: g.clone(), ..zero }, 0.5).unwrap();
        assert!(m.mask[15]);
        let oracle: Vec<bool> = g.values().iter().map(|&v| v >= 0.5).collect();
        assert_eq!(m.mask, oracle);
    }

    proptest! {
        #[test]
        fn participant_order_is_irrelevant(points in prop::collection::vec((0usize..50, 0usize..40), 1..6)) {
            let geom = ScreenGeometry::default();
            let opts = DensityOptions::default();
            let mut fwd = BTreeMap::new();
            let mut rev = BTreeMap::new();
            let n = points.len();
            for (i, &(x, y)) in points.iter().enumerate() {
                fwd.insert(format!("p{i}"), vec![ev("p", x, y)]);
                rev.insert(format!("p{}", n - 1 - i), vec![ev("p", x, y)]);
            }
            let a = build_density_map("v", 0, &fwd, (50, 40), &geom, &opts).unwrap();
            let b = build_density_map("v", 0, &rev, (50, 40), &geom, &opts).unwrap();
            for (x, y) in a.grid.values().iter().zip(b.grid.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
