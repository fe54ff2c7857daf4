//! Curvilinear vehicle models and fixed-step RK4 integration, forward and
//! time-reversed.
//!
//! Both shipped models are linear, so RK4 reproduces their closed-form
//! solutions up to rounding. The ego model additionally refuses to reverse:
//! when braking would drive the speed negative, the step is split at the
//! stopping instant and the vehicle holds still afterwards.

use serde::{Deserialize, Serialize};

use crate::geometry::{Lane, Pose2D};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integration parameters: horizon {horizon}, step {dt}")]
    InvalidStep { horizon: f64, dt: f64 },
}

/// Longitudinal ego state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub s: f64,
    pub v: f64,
}

impl EgoState {
    pub fn new(s: f64, v: f64) -> Self {
        Self { s, v }
    }
}

impl From<EgoState> for [f64; 2] {
    fn from(x: EgoState) -> Self {
        [x.s, x.v]
    }
}

impl From<[f64; 2]> for EgoState {
    fn from(x: [f64; 2]) -> Self {
        Self { s: x[0], v: x[1] }
    }
}

/// Constant acceleration over a particle horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoControl {
    pub a: f64,
}

/// Position of a non-ego agent on its lane. Negative `s` is upstream of the
/// mapped segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherState {
    pub s: f64,
    pub lane_id: String,
}

/// Constant speed of a non-ego agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtherControl {
    pub v: f64,
}

/// A vehicle model in the curvilinear frame of one lane.
pub trait Dynamics<const N: usize> {
    type Control: Copy;

    /// Vector field `ẋ = f(t, x, u)`.
    fn flow(&self, t: f64, x: &[f64; N], u: &Self::Control) -> [f64; N];

    /// Time until the vector field switches regime, e.g. a braking vehicle
    /// reaching standstill. Integration steps are split there.
    fn regime_switch(&self, _x: &[f64; N], _u: &Self::Control) -> Option<f64> {
        None
    }

    /// Snaps the state onto the constraint reached at a regime switch.
    fn settle(&self, _x: &mut [f64; N]) {}

    /// Arc length of the state along the bound lane.
    fn arc_length(&self, x: &[f64; N]) -> f64;

    fn lane(&self) -> &Lane;

    fn pose(&self, x: &[f64; N]) -> Pose2D {
        self.lane().extrapolated_pose(self.arc_length(x))
    }
}

/// Double integrator `s̈ = a` with speed clamped at zero.
#[derive(Debug, Clone, Copy)]
pub struct EgoModel<'a> {
    lane: &'a Lane,
}

impl<'a> EgoModel<'a> {
    pub fn new(lane: &'a Lane) -> Self {
        Self { lane }
    }
}

impl Dynamics<2> for EgoModel<'_> {
    type Control = EgoControl;

    fn flow(&self, _t: f64, x: &[f64; 2], u: &EgoControl) -> [f64; 2] {
        if x[1] <= 0.0 && u.a <= 0.0 {
            [0.0, 0.0]
        } else {
            [x[1], u.a]
        }
    }

    fn regime_switch(&self, x: &[f64; 2], u: &EgoControl) -> Option<f64> {
        (x[1] > 0.0 && u.a < 0.0).then(|| -x[1] / u.a)
    }

    fn settle(&self, x: &mut [f64; 2]) {
        x[1] = 0.0;
    }

    fn arc_length(&self, x: &[f64; 2]) -> f64 {
        x[0]
    }

    fn lane(&self) -> &Lane {
        self.lane
    }
}

/// Constant-speed lane follower `ṡ = v`.
#[derive(Debug, Clone, Copy)]
pub struct OtherModel<'a> {
    lane: &'a Lane,
}

impl<'a> OtherModel<'a> {
    pub fn new(lane: &'a Lane) -> Self {
        Self { lane }
    }
}

impl Dynamics<1> for OtherModel<'_> {
    type Control = OtherControl;

    fn flow(&self, _t: f64, _x: &[f64; 1], u: &OtherControl) -> [f64; 1] {
        [u.v]
    }

    fn arc_length(&self, x: &[f64; 1]) -> f64 {
        x[0]
    }

    fn lane(&self) -> &Lane {
        self.lane
    }
}

/// Negated vector field of the wrapped model, `ż = −f(t, z, u)`.
struct Reversed<'m, M>(&'m M);

impl<const N: usize, M: Dynamics<N>> Dynamics<N> for Reversed<'_, M> {
    type Control = M::Control;

    fn flow(&self, t: f64, x: &[f64; N], u: &Self::Control) -> [f64; N] {
        self.0.flow(t, x, u).map(|d| -d)
    }

    fn arc_length(&self, x: &[f64; N]) -> f64 {
        self.0.arc_length(x)
    }

    fn lane(&self) -> &Lane {
        self.0.lane()
    }
}

/// Sampled solution on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub poses: Vec<Pose2D>,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> &[f64; N] {
        &self.states[0]
    }

    pub fn end(&self) -> &[f64; N] {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

fn axpy<const N: usize>(x: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    std::array::from_fn(|i| x[i] + h * k[i])
}

fn rk4_step<const N: usize, M: Dynamics<N>>(
    model: &M,
    t: f64,
    x: &[f64; N],
    u: &M::Control,
    h: f64,
) -> [f64; N] {
    let k1 = model.flow(t, x, u);
    let k2 = model.flow(t + 0.5 * h, &axpy(x, &k1, 0.5 * h), u);
    let k3 = model.flow(t + 0.5 * h, &axpy(x, &k2, 0.5 * h), u);
    let k4 = model.flow(t + h, &axpy(x, &k3, h), u);
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// One step of length `h`, split at regime switches.
fn advance<const N: usize, M: Dynamics<N>>(
    model: &M,
    t: f64,
    x: &[f64; N],
    u: &M::Control,
    h: f64,
) -> [f64; N] {
    let mut x = *x;
    let mut t = t;
    let mut remaining = h;
    // each switch changes regime, so a handful of splits always suffices
    for _ in 0..4 {
        match model.regime_switch(&x, u) {
            // a switch landing on the step end within rounding still splits,
            // otherwise the last RK4 stage sees the wrong regime
            Some(ts) if ts < remaining + 1e-9 * remaining.max(1.0) => {
                let ts = ts.min(remaining);
                x = rk4_step(model, t, &x, u, ts);
                model.settle(&mut x);
                t += ts;
                remaining -= ts;
                if remaining <= 0.0 {
                    return x;
                }
            }
            _ => break,
        }
    }
    rk4_step(model, t, &x, u, remaining)
}

/// Sample times `k·dt` below `horizon`, then `horizon` itself.
fn sample_times(horizon: f64, dt: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(horizon >= 0.0 && horizon.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep { horizon, dt });
    }
    let mut times = vec![0.0];
    let mut k = 1usize;
    loop {
        let t = k as f64 * dt;
        if t >= horizon - 1e-12 * horizon.max(1.0) {
            break;
        }
        times.push(t);
        k += 1;
    }
    if horizon > 0.0 {
        times.push(horizon);
    }
    Ok(times)
}

fn check_finite<const N: usize>(x: &[f64; N], t: f64) -> Result<(), DynamicsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFiniteState { t })
    }
}

fn integrate<const N: usize, M: Dynamics<N>>(
    model: &M,
    x0: [f64; N],
    u: M::Control,
    horizon: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<[f64; N]>), DynamicsError> {
    let times = sample_times(horizon, dt)?;
    check_finite(&x0, 0.0)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(x0);
    for w in times.windows(2) {
        let next = advance(model, w[0], states.last().unwrap(), &u, w[1] - w[0]);
        check_finite(&next, w[1])?;
        states.push(next);
    }
    Ok((times, states))
}

/// Solves the initial value problem from `x0` over `[0, horizon]`.
pub fn integrate_forward<const N: usize, M: Dynamics<N>>(
    model: &M,
    x0: [f64; N],
    u: M::Control,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory<N>, DynamicsError> {
    let (times, states) = integrate(model, x0, u, horizon, dt)?;
    let poses = states.iter().map(|x| model.pose(x)).collect();
    Ok(Trajectory {
        times,
        states,
        poses,
    })
}

/// Solves the final value problem `x(horizon) = x_final` by integrating the
/// negated field forward, then flips the samples so the result runs from
/// `x(0)` to `x_final`.
pub fn integrate_reverse<const N: usize, M: Dynamics<N>>(
    model: &M,
    x_final: [f64; N],
    u: M::Control,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory<N>, DynamicsError> {
    let (rev_times, mut states) = integrate(&Reversed(model), x_final, u, horizon, dt)?;
    states.reverse();
    let times = rev_times.iter().rev().map(|tau| horizon - tau).collect();
    let poses = states.iter().map(|x| model.pose(x)).collect();
    Ok(Trajectory {
        times,
        states,
        poses,
    })
}

/// Forward endpoint only, without recording samples.
pub fn propagate<const N: usize, M: Dynamics<N>>(
    model: &M,
    x0: [f64; N],
    u: M::Control,
    horizon: f64,
    dt: f64,
) -> Result<[f64; N], DynamicsError> {
    if !(horizon >= 0.0 && horizon.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep { horizon, dt });
    }
    check_finite(&x0, 0.0)?;
    let mut x = x0;
    let mut t = 0.0;
    let mut k = 1usize;
    while t < horizon {
        let next_t = (k as f64 * dt).min(horizon);
        let next_t = if horizon - next_t <= 1e-12 * horizon.max(1.0) {
            horizon
        } else {
            next_t
        };
        x = advance(model, t, &x, &u, next_t - t);
        check_finite(&x, next_t)?;
        t = next_t;
        k += 1;
    }
    Ok(x)
}
