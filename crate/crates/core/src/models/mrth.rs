use log::warn;

use crate::rng::RngStream;

/// Outcome of one random-walk Metropolis–Rosenbluth–Teller–Hastings move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrthStep {
    pub state: f64,
    pub accepted: bool,
    /// The log-density was NaN at the proposal; the move was rejected.
    pub nan_rejected: bool,
}

/// Log acceptance ratio test shared by the single and coupled kernels.
/// Returns `(accept, nan)`; a tie `log u == ratio` accepts.
#[inline]
pub(crate) fn mrth_accept(log_u: f64, log_target_current: f64, log_target_proposal: f64) -> (bool, bool) {
    if log_target_proposal.is_nan() {
        return (false, true);
    }
    (log_u <= log_target_proposal - log_target_current, false)
}

/// Normal random-walk proposal with standard deviation `proposal_sd`,
/// accepted with probability min(1, exp(logdensity(x*) - logdensity(x))).
pub fn mrth_step<F>(logdensity: F, proposal_sd: f64, x: f64, rng: &mut RngStream) -> MrthStep
where
    F: Fn(f64) -> f64,
{
    let proposal = x + proposal_sd * rng.std_normal();
    let log_u = rng.uniform_pos().ln();
    let (accepted, nan_rejected) = mrth_accept(log_u, logdensity(x), logdensity(proposal));
    if nan_rejected {
        warn!("log-density is NaN at proposal {proposal}; rejecting");
    }
    MrthStep {
        state: if accepted { proposal } else { x },
        accepted,
        nan_rejected,
    }
}
