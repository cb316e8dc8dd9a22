//! Procedural spoke layouts used as reference designs.
//!
//! Layouts live on the same polar segment grid as the optimizer (columns
//! along the sector angle, rows outward from the hub). Hub and rim rows are
//! always solid.

use rand::Rng;

use crate::topo::SegmentSetup;

#[derive(Debug, Clone, PartialEq)]
pub struct SpokeStyle {
    /// Spokes per segment (1 or 2).
    pub spokes: usize,
    /// Spoke width at the hub as a fraction of the spoke pitch.
    pub hub_width: f64,
    /// Rim width over hub width.
    pub taper: f64,
    /// Angular drift of the spoke centre from hub to rim, in sector widths.
    pub twist: f64,
    /// Radial position (0 hub, 1 rim) where each spoke forks in two; 1 means no fork.
    pub fork_at: f64,
    /// Half-angle of a fork at the rim, in spoke pitches.
    pub fork_spread: f64,
}

impl Default for SpokeStyle {
    fn default() -> Self {
        Self { spokes: 1, hub_width: 0.4, taper: 0.7, twist: 0.0, fork_at: 1.0, fork_spread: 0.0 }
    }
}

impl SpokeStyle {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let forked = rng.random_bool(0.4);
        Self {
            spokes: if rng.random_bool(0.35) { 2 } else { 1 },
            hub_width: rng.random_range(0.25..0.55),
            taper: rng.random_range(0.5..1.2),
            twist: if rng.random_bool(0.3) { rng.random_range(-0.2..0.2) } else { 0.0 },
            fork_at: if forked { rng.random_range(0.35..0.7) } else { 1.0 },
            fork_spread: if forked { rng.random_range(0.12..0.25) } else { 0.0 },
        }
    }

    /// Binary densities in segment order (`row * nx + column`).
    pub fn rasterize(&self, setup: &SegmentSetup) -> Vec<f64> {
        let (nx, ny) = (setup.nx, setup.ny);
        let spokes = self.spokes.max(1) as f64;
        let pitch = 1.0 / spokes;
        let mut out = vec![0.0; nx * ny];
        for i in 0..ny {
            let hub_or_rim = i < setup.hub_rows || i >= ny - setup.rim_rows.min(ny);
            let u = (i as f64 + 0.5) / ny as f64;
            let half = 0.5 * pitch * self.hub_width * (1.0 + (self.taper - 1.0) * u);
            for k in 0..nx {
                let v = (k as f64 + 0.5) / nx as f64;
                let solid = hub_or_rim
                    || (0..self.spokes.max(1)).any(|j| {
                        let c = (j as f64 + 0.5) * pitch + self.twist * u;
                        if u > self.fork_at {
                            let s = self.fork_spread * pitch * (u - self.fork_at) / (1.0 - self.fork_at);
                            let w = half * 0.6;
                            periodic_distance(v, c - s) <= w || periodic_distance(v, c + s) <= w
                        } else {
                            periodic_distance(v, c) <= half
                        }
                    });
                out[i * nx + k] = if solid { 1.0 } else { 0.0 };
            }
        }
        out
    }
}

fn periodic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}
