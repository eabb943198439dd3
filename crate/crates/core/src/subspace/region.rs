use serde::{Deserialize, Serialize};

use super::{angle_grid, music_angle_spectrum, spatial_covariance};
use crate::error::Result;
use crate::linalg::CMatrix;
use crate::signal::ArrayConfig;

pub const REGION_BOUNDARY_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `[-boundary, boundary]`
    Small,
    Large,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Small => "small",
            Region::Large => "large",
        })
    }
}

/// Closed interval on the small side: exactly ±boundary is small.
pub fn region_for_angle(aoa_deg: f64, boundary_deg: f64) -> Region {
    if aoa_deg.abs() <= boundary_deg {
        Region::Small
    } else {
        Region::Large
    }
}

/// Routing decision together with the MUSIC angle it was based on.
pub fn region_decide_with_angle(csi: &CMatrix, array: &ArrayConfig, boundary_deg: f64) -> Result<(Region, f64)> {
    let cov = spatial_covariance(csi)?;
    let aoa = music_angle_spectrum(&cov, 1, &angle_grid(-60.0, 60.0, 0.1), array)?.peak.parameter;
    Ok((region_for_angle(aoa, boundary_deg), aoa))
}

/// Routes a CSI sample by its uncalibrated single-source MUSIC angle.
pub fn region_decide(csi: &CMatrix, array: &ArrayConfig, boundary_deg: f64) -> Result<Region> {
    region_decide_with_angle(csi, array, boundary_deg).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{steering_matrix, OfdmConfig};

    #[test]
    fn decisions() {
        let array = ArrayConfig::default();
        let ofdm = OfdmConfig::default();
        let at = |deg: f64| region_decide(&steering_matrix(deg, 10e-9, &array, &ofdm), &array, 45.0).unwrap();
        assert_eq!(at(0.0), Region::Small);
        assert_eq!(at(50.0), Region::Large);
        assert_eq!(at(-50.0), Region::Large);
        assert_eq!(region_for_angle(45.0, 45.0), Region::Small);
        assert_eq!(region_for_angle(-45.0, 45.0), Region::Small);
        assert_eq!(region_for_angle(45.0001, 45.0), Region::Large);
    }
}
