//! Ideal inverse inputs for the filtered evaluation trajectories.

use crate::error::Result;
use crate::inverse::{exact_inverse_series, hidden_state_full};
use crate::lti::NormalForm;
use crate::signals::FilteredTrajectory;
use crate::trajectory::Trajectory;

/// Exact inverse input along one filtered trajectory, with the hidden state
/// integrated over the full history from rest. Channel `u`.
pub fn ideal_inverse(nf: &NormalForm, traj: &FilteredTrajectory) -> Result<Trajectory> {
    let d = &traj.derivatives;
    let eta = hidden_state_full(nf, d)?;
    let u = exact_inverse_series(nf, d, &eta)?;
    Trajectory::from_channel(d.dt(), d.t0(), "u", &u)
}

pub fn ideal_inverse_suite(nf: &NormalForm, trajectories: &[FilteredTrajectory]) -> Result<Vec<Trajectory>> {
    trajectories.iter().map(|t| ideal_inverse(nf, t)).collect()
}

/// Derivative channels of a filtered trajectory with its ideal input
/// prepended as `u`, laid out like a collected record.
pub fn evaluation_record(nf: &NormalForm, traj: &FilteredTrajectory) -> Result<Trajectory> {
    let u = ideal_inverse(nf, traj)?;
    let mut rec = u;
    for name in traj.derivatives.channels() {
        rec = rec.with_channel(name, &traj.derivatives.channel(name)?)?;
    }
    Ok(rec)
}
