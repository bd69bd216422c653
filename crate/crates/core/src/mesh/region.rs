use std::str::FromStr;

use super::Vec3;

/// Element-centroid filter used by quality reports.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Sphere { center: Vec3, radius: f64 },
    /// Points within `width` of the circle of radius `ring_radius` around the
    /// z axis at height `height`.
    Ring {
        ring_radius: f64,
        height: f64,
        width: f64,
    },
}

impl Region {
    pub fn contains(&self, x: &Vec3) -> bool {
        match *self {
            Region::Sphere { center, radius } => (x - center).norm() <= radius,
            Region::Ring {
                ring_radius,
                height,
                width,
            } => {
                let r = x.x.hypot(x.y);
                (r - ring_radius).hypot(x.z - height) <= width
            }
        }
    }
}

impl FromStr for Region {
    type Err = String;

    /// `sphere:cx,cy,cz,r` or `ring:r_ring,z,width`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| format!("region '{s}' must look like kind:v1,v2,..."))?;
        let vals: Vec<f64> = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("region '{s}': {e}"))?;
        match (kind, vals.as_slice()) {
            ("sphere", &[cx, cy, cz, r]) => Ok(Region::Sphere {
                center: Vec3::new(cx, cy, cz),
                radius: r,
            }),
            ("ring", &[rr, z, w]) => Ok(Region::Ring {
                ring_radius: rr,
                height: z,
                width: w,
            }),
            _ => Err(format!(
                "region '{s}': expected sphere:cx,cy,cz,r or ring:r_ring,z,width"
            )),
        }
    }
}
