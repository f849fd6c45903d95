//! Multi-view token geometry.
//!
//! A scene is rendered from a ring of virtual pinhole cameras into sparse RGB-D
//! images, each image is cut into square patches, every patch with depth is
//! lifted back into the scene frame, and the lifted patches are pooled on a voxel
//! grid. The per-patch feature comes from a [`FeatureReducer`]; the default is
//! the mean patch color.
//!
//! Camera frame: x to the right, y down the image, z along the view direction.
//! Pixel `(u, v)` covers `[u, u + 1) x [v, v + 1)` in continuous image
//! coordinates and the principal point sits at `(width / 2, height / 2)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::Scene;

/// Ring radius as a multiple of the scene's bounding-sphere radius.
pub const RING_RADIUS_FACTOR: f64 = 2.5;
/// Camera elevation above the centroid plane.
pub const RING_ELEVATION: f64 = FRAC_PI_4;
/// Extra field of view beyond the bounding sphere's silhouette.
const FOV_MARGIN: f64 = 1.1;

pub const DEFAULT_VIEWS: usize = 4;
pub const DEFAULT_RESOLUTION: usize = 224;
pub const DEFAULT_PATCH_SIZE: usize = 14;
pub const DEFAULT_SPLAT_PX: usize = 3;
/// Default voxel edge is the bounding-box diagonal divided by this.
pub const DEFAULT_VOXEL_DIVISOR: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCamera {
    pub position: Vector3<f64>,
    pub look_at: Vector3<f64>,
    pub up: Vector3<f64>,
    pub focal_px: f64,
    pub width_px: usize,
    pub height_px: usize,
}

impl VirtualCamera {
    pub fn new(
        position: Vector3<f64>,
        look_at: Vector3<f64>,
        up: Vector3<f64>,
        focal_px: f64,
        width_px: usize,
        height_px: usize,
    ) -> Result<Self> {
        let forward = look_at - position;
        if forward.norm() == 0.0 {
            return Err(Error::Validation("camera position equals look_at".into()));
        }
        if up.norm() == 0.0 || forward.angle(&up).min(PI - forward.angle(&up)) <= 1e-6 {
            return Err(Error::Validation("camera up vector is parallel to the view direction".into()));
        }
        if !(focal_px > 0.0) || width_px == 0 || height_px == 0 {
            return Err(Error::Validation("camera intrinsics must be positive".into()));
        }
        Ok(VirtualCamera {
            position,
            look_at,
            up,
            focal_px,
            width_px,
            height_px,
        })
    }

    /// Unit `(right, down, forward)` axes of the camera frame in scene coordinates.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        let down = forward.cross(&right);
        (right, down, forward)
    }

    pub fn view_direction(&self) -> Vector3<f64> {
        (self.look_at - self.position).normalize()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    /// Continuous image coordinates and camera depth of a scene point, or `None`
    /// when the point is not in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let (right, down, forward) = self.basis();
        let rel = p - self.position;
        let z = rel.dot(&forward);
        if z <= 0.0 {
            return None;
        }
        let (cx, cy) = self.principal_point();
        let u = self.focal_px * rel.dot(&right) / z + cx;
        let v = self.focal_px * rel.dot(&down) / z + cy;
        Some((u, v, z))
    }

    /// Inverse of [`project`](Self::project) at a given camera depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let (right, down, forward) = self.basis();
        let (cx, cy) = self.principal_point();
        let x = (u - cx) / self.focal_px * depth;
        let y = (v - cy) / self.focal_px * depth;
        self.position + right * x + down * y + forward * depth
    }
}

/// Places `n_views` cameras on an elevated ring around the scene, at the
/// default resolution.
pub fn make_virtual_cameras(scene: &Scene, n_views: usize) -> Result<Vec<VirtualCamera>> {
    make_virtual_cameras_with(scene, n_views, DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)
}

pub fn make_virtual_cameras_with(
    scene: &Scene,
    n_views: usize,
    width_px: usize,
    height_px: usize,
) -> Result<Vec<VirtualCamera>> {
    if !(2..=8).contains(&n_views) {
        return Err(Error::Validation(format!("n_views must be in [2, 8], got {n_views}")));
    }
    let radius = scene.bounding_radius();
    if radius <= 0.0 {
        return Err(Error::DegenerateScene("bounding-sphere radius is zero".into()));
    }
    let centroid = scene.centroid();
    let distance = RING_RADIUS_FACTOR * radius;
    let half_fov = (1.0 / RING_RADIUS_FACTOR).asin() * FOV_MARGIN;
    let focal_px = (width_px.min(height_px) as f64 / 2.0) / half_fov.tan();
    let (se, ce) = RING_ELEVATION.sin_cos();

    (0..n_views)
        .map(|k| {
            let azimuth = 2.0 * PI * k as f64 / n_views as f64;
            let (sa, ca) = azimuth.sin_cos();
            let offset = Vector3::new(ce * ca, ce * sa, se) * distance;
            VirtualCamera::new(
                centroid + offset,
                centroid,
                Vector3::z(),
                focal_px,
                width_px,
                height_px,
            )
        })
        .collect()
}

/// Sparse RGB-D frame, row-major. Depth 0 marks pixels no point reached.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl RgbdImage {
    pub fn empty(width: usize, height: usize) -> Self {
        RgbdImage {
            width,
            height,
            rgb: vec![[0.0; 3]; width * height],
            depth: vec![0.0; width * height],
        }
    }

    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[self.index(u, v)]
    }

    pub fn rgb_at(&self, u: usize, v: usize) -> [f64; 3] {
        self.rgb[self.index(u, v)]
    }
}

/// Renders the scene as square point splats with a z-buffer.
///
/// Each point covers a `splat_px x splat_px` block centered on the pixel it
/// projects into; the nearest point wins and on equal depth the earlier point
/// is kept.
pub fn render_view(scene: &Scene, camera: &VirtualCamera, splat_px: usize) -> Result<RgbdImage> {
    if splat_px == 0 || splat_px % 2 == 0 {
        return Err(Error::Dimension(format!("splat_px must be odd, got {splat_px}")));
    }
    let (w, h) = (camera.width_px, camera.height_px);
    let mut image = RgbdImage::empty(w, h);
    let half = (splat_px / 2) as i64;

    for (p, color) in scene.points().iter().zip(scene.colors()) {
        let Some((u, v, z)) = camera.project(p) else {
            continue;
        };
        let (uf, vf) = (u.floor(), v.floor());
        // reject before casting so far-off projections cannot saturate
        let reach = half as f64;
        if uf < -reach || vf < -reach || uf >= w as f64 + reach || vf >= h as f64 + reach {
            continue;
        }
        let (pu, pv) = (uf as i64, vf as i64);
        for dv in -half..=half {
            let y = pv + dv;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for du in -half..=half {
                let x = pu + du;
                if x < 0 || x >= w as i64 {
                    continue;
                }
                let idx = y as usize * w + x as usize;
                let current = image.depth[idx];
                if current == 0.0 || z < current {
                    image.depth[idx] = z;
                    image.rgb[idx] = *color;
                }
            }
        }
    }
    Ok(image)
}

/// Turns the colors of a patch's hit pixels into a feature vector.
///
/// Learned encoders can stand in here; the geometry does not depend on the
/// feature content.
pub trait FeatureReducer: Sync {
    fn dim(&self) -> usize;
    /// `pixels` holds only pixels with nonzero depth and may be empty.
    fn reduce(&self, pixels: &[[f64; 3]]) -> Vec<f64>;
}

/// Mean RGB over the patch's hit pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanRgb;

impl FeatureReducer for MeanRgb {
    fn dim(&self) -> usize {
        3
    }

    fn reduce(&self, pixels: &[[f64; 3]]) -> Vec<f64> {
        if pixels.is_empty() {
            return vec![0.0; 3];
        }
        let mut acc = [0.0; 3];
        for px in pixels {
            for (a, c) in acc.iter_mut().zip(px) {
                *a += c;
            }
        }
        acc.iter().map(|a| a / pixels.len() as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub feature: Vec<f64>,
    /// Median of the nonzero depths, 0 when the patch is empty.
    pub depth: f64,
    /// Patch center in continuous image coordinates.
    pub center: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    /// Row-major.
    pub patches: Vec<Patch>,
}

impl PatchGrid {
    pub fn get(&self, row: usize, col: usize) -> &Patch {
        &self.patches[row * self.cols + col]
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn patchify(image: &RgbdImage, patch_size: usize) -> Result<PatchGrid> {
    patchify_with(image, patch_size, &MeanRgb)
}

pub fn patchify_with(
    image: &RgbdImage,
    patch_size: usize,
    reducer: &dyn FeatureReducer,
) -> Result<PatchGrid> {
    if patch_size == 0 || image.width % patch_size != 0 || image.height % patch_size != 0 {
        return Err(Error::Dimension(format!(
            "{}x{} image is not divisible into {patch_size}-pixel patches",
            image.width, image.height
        )));
    }
    let rows = image.height / patch_size;
    let cols = image.width / patch_size;
    let mut patches = Vec::with_capacity(rows * cols);
    let mut depths = Vec::with_capacity(patch_size * patch_size);
    let mut colors = Vec::with_capacity(patch_size * patch_size);

    for row in 0..rows {
        for col in 0..cols {
            depths.clear();
            colors.clear();
            for v in row * patch_size..(row + 1) * patch_size {
                for u in col * patch_size..(col + 1) * patch_size {
                    let d = image.depth_at(u, v);
                    if d > 0.0 {
                        depths.push(d);
                        colors.push(image.rgb_at(u, v));
                    }
                }
            }
            let half = patch_size as f64 / 2.0;
            patches.push(Patch {
                feature: reducer.reduce(&colors),
                depth: median(&mut depths),
                center: (
                    (col * patch_size) as f64 + half,
                    (row * patch_size) as f64 + half,
                ),
            });
        }
    }
    Ok(PatchGrid {
        rows,
        cols,
        patch_size,
        patches,
    })
}

/// A feature anchored at a scene-frame position.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualToken {
    pub position: Vector3<f64>,
    pub feature: Vec<f64>,
    pub view_id: usize,
    pub valid: bool,
    /// Number of raw patch tokens merged into this one.
    pub count: usize,
}

#[derive(Serialize)]
struct TokenLine<'a> {
    view_id: usize,
    position: [f64; 3],
    feature: &'a [f64],
    valid: bool,
}

impl VisualToken {
    /// One JSON object with `view_id`, `position`, `feature`, `valid`.
    pub fn to_json_line(&self) -> String {
        let line = TokenLine {
            view_id: self.view_id,
            position: [self.position.x, self.position.y, self.position.z],
            feature: &self.feature,
            valid: self.valid,
        };
        serde_json::to_string(&line).expect("token serialization is infallible")
    }
}

/// Lifts every patch with depth into the scene frame through `camera`.
/// Empty patches come back as invalid tokens at the origin.
pub fn back_project(grid: &PatchGrid, camera: &VirtualCamera) -> Vec<VisualToken> {
    grid.patches
        .iter()
        .map(|patch| {
            if patch.depth > 0.0 {
                VisualToken {
                    position: camera.unproject(patch.center.0, patch.center.1, patch.depth),
                    feature: patch.feature.clone(),
                    view_id: 0,
                    valid: true,
                    count: 1,
                }
            } else {
                VisualToken {
                    position: Vector3::zeros(),
                    feature: patch.feature.clone(),
                    view_id: 0,
                    valid: false,
                    count: 0,
                }
            }
        })
        .collect()
}

fn voxel_index(p: &Vector3<f64>, voxel_size: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// Merges valid tokens sharing a voxel into their mean, ordered by voxel index.
///
/// The merged token keeps the smallest contributing view id and the summed
/// count. Invalid tokens are dropped.
pub fn voxel_pool(tokens: &[VisualToken], voxel_size: f64) -> Result<Vec<VisualToken>> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::Validation(format!("voxel_size must be positive, got {voxel_size}")));
    }
    struct Acc {
        position: Vector3<f64>,
        feature: Vec<f64>,
        count: usize,
        view_id: usize,
    }
    let mut voxels: BTreeMap<(i64, i64, i64), Acc> = BTreeMap::new();
    for t in tokens.iter().filter(|t| t.valid) {
        let w = t.count.max(1);
        let acc = voxels.entry(voxel_index(&t.position, voxel_size)).or_insert_with(|| Acc {
            position: Vector3::zeros(),
            feature: vec![0.0; t.feature.len()],
            count: 0,
            view_id: t.view_id,
        });
        if acc.feature.len() != t.feature.len() {
            return Err(Error::Dimension(format!(
                "token features of length {} and {} in one voxel",
                acc.feature.len(),
                t.feature.len()
            )));
        }
        acc.position += t.position * w as f64;
        for (a, f) in acc.feature.iter_mut().zip(&t.feature) {
            *a += f * w as f64;
        }
        acc.count += w;
        acc.view_id = acc.view_id.min(t.view_id);
    }
    Ok(voxels
        .into_values()
        .map(|acc| {
            let n = acc.count as f64;
            VisualToken {
                position: acc.position / n,
                feature: acc.feature.into_iter().map(|f| f / n).collect(),
                view_id: acc.view_id,
                valid: true,
                count: acc.count,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewConfig {
    pub n_views: usize,
    pub width_px: usize,
    pub height_px: usize,
    pub patch_size: usize,
    /// `None` picks the bounding-box diagonal / 32.
    pub voxel_size: Option<f64>,
    pub splat_px: usize,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            n_views: DEFAULT_VIEWS,
            width_px: DEFAULT_RESOLUTION,
            height_px: DEFAULT_RESOLUTION,
            patch_size: DEFAULT_PATCH_SIZE,
            voxel_size: None,
            splat_px: DEFAULT_SPLAT_PX,
        }
    }
}

impl ViewConfig {
    pub fn resolve_voxel_size(&self, scene: &Scene) -> f64 {
        self.voxel_size
            .unwrap_or_else(|| scene.bounding_box_diagonal() / DEFAULT_VOXEL_DIVISOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenOutput {
    pub tokens: Vec<VisualToken>,
    /// Valid (nonempty) patches per view, before pooling.
    pub valid_patches_per_view: Vec<usize>,
    pub voxel_size: f64,
}

pub fn scene_to_tokens(scene: &Scene, config: &ViewConfig) -> Result<Vec<VisualToken>> {
    Ok(scene_to_tokens_with(scene, config, &MeanRgb)?.tokens)
}

/// Cameras, rendering, patches, lifting and pooling in one pass. Views are
/// processed in parallel and concatenated in view order before pooling.
pub fn scene_to_tokens_with(
    scene: &Scene,
    config: &ViewConfig,
    reducer: &dyn FeatureReducer,
) -> Result<TokenOutput> {
    let voxel_size = config.resolve_voxel_size(scene);
    let cameras = make_virtual_cameras_with(scene, config.n_views, config.width_px, config.height_px)?;
    let per_view = cameras
        .par_iter()
        .enumerate()
        .map(|(view_id, camera)| {
            let image = render_view(scene, camera, config.splat_px)?;
            let grid = patchify_with(&image, config.patch_size, reducer)?;
            let mut tokens = back_project(&grid, camera);
            for t in &mut tokens {
                t.view_id = view_id;
            }
            Ok(tokens)
        })
        .collect::<Result<Vec<_>>>()?;

    let valid_patches_per_view = per_view
        .iter()
        .map(|ts| ts.iter().filter(|t| t.valid).count())
        .collect();
    let all: Vec<VisualToken> = per_view.into_iter().flatten().collect();
    Ok(TokenOutput {
        tokens: voxel_pool(&all, voxel_size)?,
        valid_patches_per_view,
        voxel_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_camera(size: usize) -> VirtualCamera {
        VirtualCamera::new(
            Vector3::new(0.0, 0.0, -5.0),
            Vector3::zeros(),
            Vector3::y(),
            10.0,
            size,
            size,
        )
        .unwrap()
    }

    fn cube_scene() -> Scene {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push(Vector3::new(i as f64, j as f64, k as f64) * 0.1);
                }
            }
        }
        Scene::from_points(pts).unwrap()
    }

    #[test]
    fn four_cameras_at_quarter_azimuths() {
        let scene = cube_scene();
        let cams = make_virtual_cameras(&scene, 4).unwrap();
        let c = scene.centroid();
        let expected = [0.0f64, 90.0, 180.0, 270.0];
        for (cam, deg) in cams.iter().zip(expected) {
            let d = cam.position - c;
            let az = d.y.atan2(d.x).to_degrees().rem_euclid(360.0);
            assert!((az - deg).abs() < 1e-9, "azimuth {az} != {deg}");
            let elev = (d.z / d.norm()).asin();
            assert!((elev - FRAC_PI_4).abs() < 1e-12);
            assert!((d.norm() - 2.5 * scene.bounding_radius()).abs() < 1e-12);
            assert_eq!(cam.look_at, c);
        }
    }

    #[test]
    fn two_cameras_are_antipodal() {
        let scene = cube_scene();
        let cams = make_virtual_cameras(&scene, 2).unwrap();
        let c = scene.centroid();
        let lift = 2.5 * scene.bounding_radius() * FRAC_PI_4.sin();
        let axis_point = c + Vector3::new(0.0, 0.0, lift);
        let sum = cams[0].position + cams[1].position;
        assert!((sum - axis_point * 2.0).norm() < 1e-12);
    }

    #[test]
    fn single_point_scene_is_degenerate() {
        let scene = Scene::from_points(vec![Vector3::new(0.3, 0.1, 0.0)]).unwrap();
        assert!(matches!(make_virtual_cameras(&scene, 4), Err(Error::DegenerateScene(_))));
    }

    #[test]
    fn view_count_bounds() {
        let scene = cube_scene();
        assert!(make_virtual_cameras(&scene, 1).is_err());
        assert!(make_virtual_cameras(&scene, 9).is_err());
    }

    #[test]
    fn axis_point_lands_on_principal_pixel() {
        let cam = axis_camera(5);
        let scene = Scene::new(vec![Vector3::new(0.0, 0.0, 2.0)], vec![[1.0, 0.0, 0.0]]).unwrap();
        let img = render_view(&scene, &cam, 1).unwrap();
        // principal point (2.5, 2.5) falls in pixel (2, 2)
        assert_eq!(img.depth_at(2, 2), 7.0);
        assert_eq!(img.rgb_at(2, 2), [1.0, 0.0, 0.0]);
        assert_eq!(img.depth.iter().filter(|d| **d > 0.0).count(), 1);
    }

    #[test]
    fn z_buffer_keeps_nearer_point() {
        let cam = axis_camera(5);
        let scene = Scene::new(
            vec![Vector3::new(0.0, 0.0, -3.0), Vector3::new(0.0, 0.0, -4.0)],
            vec![[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let img = render_view(&scene, &cam, 1).unwrap();
        assert_eq!(img.depth_at(2, 2), 1.0);
        assert_eq!(img.rgb_at(2, 2), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn splat_covers_block_and_even_splat_is_rejected() {
        let cam = axis_camera(5);
        let scene = Scene::from_points(vec![Vector3::zeros()]).unwrap();
        let img = render_view(&scene, &cam, 3).unwrap();
        assert_eq!(img.depth.iter().filter(|d| **d > 0.0).count(), 9);
        assert!(render_view(&scene, &cam, 2).is_err());
    }

    #[test]
    fn points_behind_camera_are_skipped() {
        let cam = axis_camera(5);
        let scene = Scene::from_points(vec![Vector3::new(0.0, 0.0, -6.0)]).unwrap();
        let img = render_view(&scene, &cam, 1).unwrap();
        assert!(img.depth.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn uniform_image_patches() {
        let mut img = RgbdImage::empty(28, 28);
        img.depth.iter_mut().for_each(|d| *d = 1.0);
        img.rgb.iter_mut().for_each(|c| *c = [0.2, 0.4, 0.6]);
        let grid = patchify(&img, 14).unwrap();
        assert_eq!((grid.rows, grid.cols), (2, 2));
        for p in &grid.patches {
            assert_eq!(p.depth, 1.0);
            for (f, e) in p.feature.iter().zip([0.2, 0.4, 0.6]) {
                assert!((f - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patch_depth_is_median_of_hits() {
        let mut img = RgbdImage::empty(2, 2);
        img.depth = vec![0.0, 0.0, 2.0, 4.0];
        img.rgb = vec![[1.0; 3], [1.0; 3], [0.2; 3], [0.4; 3]];
        let grid = patchify(&img, 2).unwrap();
        assert_eq!(grid.patches[0].depth, 3.0);
        assert!((grid.patches[0].feature[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn grid_dimensions() {
        let img = RgbdImage::empty(224, 224);
        let grid = patchify(&img, 14).unwrap();
        assert_eq!((grid.rows, grid.cols), (16, 16));
        assert!(matches!(patchify(&img, 15), Err(Error::Dimension(_))));
    }

    #[test]
    fn principal_patch_lifts_along_view_direction() {
        let cam = axis_camera(3);
        let mut img = RgbdImage::empty(3, 3);
        let idx = img.index(1, 1);
        img.depth[idx] = 2.5;
        let grid = patchify(&img, 1).unwrap();
        let tokens = back_project(&grid, &cam);
        let center = &tokens[4];
        assert!(center.valid);
        let expected = cam.position + cam.view_direction() * 2.5;
        assert!((center.position - expected).norm() < 1e-12);
        assert!(!tokens[0].valid);
    }

    fn token(p: [f64; 3], f: f64) -> VisualToken {
        VisualToken {
            position: Vector3::from(p),
            feature: vec![f],
            view_id: 0,
            valid: true,
            count: 1,
        }
    }

    #[test]
    fn pooling_one_voxel() {
        let ts = vec![token([0.1, 0.1, 0.1], 1.0), token([0.3, 0.2, 0.1], 3.0)];
        let out = voxel_pool(&ts, 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].position - Vector3::new(0.2, 0.15, 0.1)).norm() < 1e-15);
        assert_eq!(out[0].feature, vec![2.0]);
        assert_eq!(out[0].count, 2);
    }

    #[test]
    fn pooling_distinct_voxels_and_drops_invalid() {
        let mut bad = token([0.1, 0.0, 0.0], 9.0);
        bad.valid = false;
        let ts = vec![token([0.1, 0.0, 0.0], 1.0), token([0.9, 0.0, 0.0], 2.0), bad];
        let out = voxel_pool(&ts, 0.5).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].feature, vec![1.0]);
        assert!(voxel_pool(&ts, 0.0).is_err());
    }

    #[test]
    fn token_json_line_fields() {
        let t = token([1.0, 2.0, 3.0], 0.5);
        assert_eq!(
            t.to_json_line(),
            r#"{"view_id":0,"position":[1.0,2.0,3.0],"feature":[0.5],"valid":true}"#
        );
    }
}
