use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A colored point cloud. Colors are RGB with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    points: Vec<Vector3<f64>>,
    colors: Vec<[f64; 3]>,
}

impl Scene {
    pub fn new(points: Vec<Vector3<f64>>, colors: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("scene has no points".into()));
        }
        if points.len() != colors.len() {
            return Err(Error::Validation(format!(
                "{} points but {} colors",
                points.len(),
                colors.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Validation(format!("point #{i} has a non-finite coordinate")));
        }
        if let Some(i) = colors
            .iter()
            .position(|c| !c.iter().all(|ch| (0.0..=1.0).contains(ch)))
        {
            return Err(Error::Validation(format!("color #{i} has a channel outside [0, 1]")));
        }
        Ok(Scene { points, colors })
    }

    /// Builds a scene with every point colored mid-gray.
    pub fn from_points(points: Vec<Vector3<f64>>) -> Result<Self> {
        let colors = vec![[0.5; 3]; points.len()];
        Scene::new(points, colors)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// Radius of the centroid-centered sphere enclosing every point.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.points
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }
}
