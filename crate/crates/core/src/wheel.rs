//! Parametric rim template and the mapping between millimetres and raster pixels.
//!
//! Frame convention: the wheel axis is the z axis, the camera looks down +z
//! from z = 0, so depth equals z and smaller depth means nearer the camera.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid rim template: {0}")]
pub struct TemplateError(pub String);

/// Radial depth of the front spoke surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpokeDepthProfile {
    /// Constant `hub_depth` inside the centre disc, then linear up to
    /// `rim_depth` at the inner barrel radius.
    Linear { hub_depth: f64, rim_depth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RimTemplate {
    pub rim_diameter: f64,
    pub rim_width: f64,
    pub offset: f64,
    pub pcd: f64,
    pub hub_bore: f64,
    pub disc_diameter: f64,
    pub n_bolts: usize,
    pub bolt_hole_diameter: f64,
    pub spoke_depth_profile: SpokeDepthProfile,
    /// Radial wall thickness of the rim barrel.
    pub barrel_thickness: f64,
    /// Axial thickness of spokes outside the centre disc.
    pub spoke_thickness: f64,
    /// Radial height of the tyre-retaining flanges above the barrel.
    pub flange_height: f64,
}

impl Default for RimTemplate {
    /// 19 x 8.5 inch wheel, ET45, 5 x 114.3 bolt pattern.
    fn default() -> Self {
        Self {
            rim_diameter: 482.6,
            rim_width: 216.0,
            offset: 45.0,
            pcd: 114.3,
            hub_bore: 66.0,
            disc_diameter: 156.2,
            n_bolts: 5,
            bolt_hole_diameter: 15.0,
            spoke_depth_profile: SpokeDepthProfile::Linear { hub_depth: 30.0, rim_depth: 50.0 },
            barrel_thickness: 14.0,
            spoke_thickness: 30.0,
            flange_height: 6.0,
        }
    }
}

impl RimTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        let bad = |m: &str| Err(TemplateError(m.to_string()));
        let dims = [
            self.rim_diameter,
            self.rim_width,
            self.offset,
            self.pcd,
            self.hub_bore,
            self.disc_diameter,
            self.bolt_hole_diameter,
            self.barrel_thickness,
            self.spoke_thickness,
        ];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("all dimensions must be positive");
        }
        if !(self.flange_height.is_finite() && self.flange_height >= 0.0) {
            return bad("flange height must be non-negative");
        }
        if !(self.hub_bore < self.disc_diameter && self.disc_diameter < self.rim_diameter) {
            return bad("require hub_bore < disc_diameter < rim_diameter");
        }
        if !(self.pcd > self.hub_bore && self.pcd < self.disc_diameter) {
            return bad("pitch circle must lie between hub bore and centre disc");
        }
        if self.pcd - self.bolt_hole_diameter <= self.hub_bore
            || self.pcd + self.bolt_hole_diameter >= self.disc_diameter
        {
            return bad("bolt holes must fit between hub bore and disc edge");
        }
        if self.n_bolts == 0 {
            return bad("need at least one bolt");
        }
        if self.barrel_inner_radius() <= self.disc_radius() {
            return bad("barrel wall leaves no room for spokes");
        }
        let SpokeDepthProfile::Linear { hub_depth, rim_depth } = self.spoke_depth_profile;
        if !(hub_depth >= 0.0 && rim_depth >= hub_depth) {
            return bad("depth profile must be non-negative and non-decreasing");
        }
        if rim_depth > self.rim_width + self.offset {
            return bad("rim face depth exceeds rim_width + offset");
        }
        if self.mounting_face_depth() <= hub_depth {
            return bad("mounting face lies in front of the hub face");
        }
        Ok(())
    }

    pub fn rim_radius(&self) -> f64 {
        self.rim_diameter / 2.0
    }

    pub fn barrel_inner_radius(&self) -> f64 {
        self.rim_radius() - self.barrel_thickness
    }

    pub fn disc_radius(&self) -> f64 {
        self.disc_diameter / 2.0
    }

    pub fn bore_radius(&self) -> f64 {
        self.hub_bore / 2.0
    }

    pub fn hub_face_depth(&self) -> f64 {
        let SpokeDepthProfile::Linear { hub_depth, .. } = self.spoke_depth_profile;
        hub_depth
    }

    /// Depth of the front edge of the rim barrel.
    pub fn rim_face_depth(&self) -> f64 {
        let SpokeDepthProfile::Linear { rim_depth, .. } = self.spoke_depth_profile;
        rim_depth
    }

    /// Depth of the hub mounting face (rear face of the centre disc):
    /// rim centreline shifted toward the camera by the offset.
    pub fn mounting_face_depth(&self) -> f64 {
        self.rim_face_depth() + self.rim_width / 2.0 - self.offset
    }

    /// Front-surface depth of solid material at radius `r` (mm).
    pub fn spoke_depth(&self, r: f64) -> f64 {
        let SpokeDepthProfile::Linear { hub_depth, rim_depth } = self.spoke_depth_profile;
        let (r0, r1) = (self.disc_radius(), self.barrel_inner_radius());
        if r <= r0 {
            hub_depth
        } else if r >= r1 {
            rim_depth
        } else {
            hub_depth + (rim_depth - hub_depth) * (r - r0) / (r1 - r0)
        }
    }

    /// Bolt hole centres on the pitch circle; the first bolt sits on +x.
    pub fn bolt_centres(&self) -> Vec<(f64, f64)> {
        let r = self.pcd / 2.0;
        (0..self.n_bolts)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / self.n_bolts as f64;
                (r * a.cos(), r * a.sin())
            })
            .collect()
    }

    pub fn in_bolt_hole(&self, x: f64, y: f64) -> bool {
        let rr = (self.bolt_hole_diameter / 2.0).powi(2);
        self.bolt_centres().iter().any(|(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) <= rr)
    }
}

/// Square raster covering the wheel face, centred on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelLayout {
    pub raster_size: usize,
    pub mm_per_pixel: f64,
}

impl WheelLayout {
    /// Margin (mm) left around the rim on each side of the raster.
    pub const MARGIN_MM: f64 = 10.0;

    pub fn for_template(template: &RimTemplate, raster_size: usize) -> Self {
        Self { raster_size, mm_per_pixel: (template.rim_diameter + 2.0 * Self::MARGIN_MM) / raster_size as f64 }
    }

    /// Millimetre coordinates of a pixel centre (x right, y up).
    pub fn pixel_to_mm(&self, px: usize, py: usize) -> (f64, f64) {
        let h = self.raster_size as f64 / 2.0;
        ((px as f64 + 0.5 - h) * self.mm_per_pixel, (h - py as f64 - 0.5) * self.mm_per_pixel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_template_is_valid() {
        let t = RimTemplate::default();
        t.validate().unwrap();
        assert_eq!(t.mounting_face_depth(), 113.0);
        assert_eq!(t.spoke_depth(0.0), 30.0);
        assert_eq!(t.spoke_depth(t.rim_radius()), 50.0);
    }

    #[test]
    fn depth_profile_is_monotone() {
        let t = RimTemplate::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=300 {
            let d = t.spoke_depth(i as f64);
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn rejects_inconsistent_diameters() {
        let t = RimTemplate { disc_diameter: 500.0, ..RimTemplate::default() };
        assert!(t.validate().is_err());
        let t = RimTemplate { pcd: 60.0, ..RimTemplate::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn pixel_centres_are_symmetric() {
        let l = WheelLayout::for_template(&RimTemplate::default(), 512);
        let (x0, y0) = l.pixel_to_mm(0, 0);
        let (x1, y1) = l.pixel_to_mm(511, 511);
        assert_eq!(x0, -x1);
        assert_eq!(y0, -y1);
    }
}
