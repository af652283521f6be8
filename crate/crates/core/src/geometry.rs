//! Random deployment of access points and users in a square area, with
//! wrap-around (toroidal) distances so the area has no boundary effects.
//!
//! Wrapping the square onto a torus is equivalent, for pairwise distances, to
//! tiling the plane with eight twin copies of the area around the original,
//! and avoids materializing the copies.

use crate::error::{Result, SimError};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// AP and UE positions on a square of the given side length (meters).
#[derive(Debug, Clone)]
pub struct Deployment {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub side: f64,
}

impl Deployment {
    /// Draws a uniform random deployment of `num_aps` access points and
    /// `num_ues` users. APs are drawn first, then UEs, so a fixed RNG stream
    /// reproduces the same deployment.
    pub fn generate(num_aps: usize, num_ues: usize, side: f64, rng: &mut impl Rng) -> Result<Self> {
        let ap_positions = place_uniform(num_aps, side, rng)?;
        let ue_positions = place_uniform(num_ues, side, rng)?;
        Ok(Self {
            ap_positions,
            ue_positions,
            side,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }
}

/// Draws `count` i.i.d. points with both coordinates uniform on `[0, side)`.
pub fn place_uniform(count: usize, side: f64, rng: &mut impl Rng) -> Result<Vec<Point>> {
    if count == 0 {
        return Err(SimError::invalid("point count must be positive"));
    }
    if side <= 0.0 || !side.is_finite() {
        return Err(SimError::invalid(format!(
            "area side must be positive and finite, got {side}"
        )));
    }
    Ok((0..count)
        .map(|_| {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            Point::new(x, y)
        })
        .collect())
}

/// Euclidean distance on the torus obtained by wrapping the square of the
/// given side: each axis difference is reduced to `min(|d|, side - |d|)`.
pub fn torus_distance(p: Point, q: Point, side: f64) -> Result<f64> {
    if side <= 0.0 || !side.is_finite() {
        return Err(SimError::invalid(format!(
            "area side must be positive and finite, got {side}"
        )));
    }
    for pt in [p, q] {
        if !(0.0..side).contains(&pt.x) || !(0.0..side).contains(&pt.y) {
            return Err(SimError::invalid(format!(
                "point ({}, {}) lies outside [0, {side})^2",
                pt.x, pt.y
            )));
        }
    }
    let dx = wrap_axis((p.x - q.x).abs(), side);
    let dy = wrap_axis((p.y - q.y).abs(), side);
    Ok((dx * dx + dy * dy).sqrt())
}

fn wrap_axis(delta: f64, side: f64) -> f64 {
    delta.min(side - delta)
}
