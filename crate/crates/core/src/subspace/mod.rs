//! Model-driven estimation: covariance, Hermitian eigendecomposition, MUSIC
//! pseudospectra and the angular-region decision.

mod covariance;
mod eig;
mod music;
mod region;

pub use covariance::{spatial_covariance, CovarianceMatrix};
pub use eig::{hermitian_eig, EigenDecomposition};
pub use music::{
    angle_grid, default_delay_grid, delay_grid, delay_music_spectrum, joint_music_2d,
    music_angle_spectrum, JointMusicConfig, JointSpectrum, Peak, Pseudospectrum,
};
pub use region::{region_decide, region_decide_with_angle, region_for_angle, Region, REGION_BOUNDARY_DEG};
