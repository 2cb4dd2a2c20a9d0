//! Unicycle dynamics, ground-truth map understanding, trajectory text,
//! condition export and a lane-following planner.

mod condition;
mod extract;
mod plan;

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, shortest_arc};
use crate::scene::{VehicleAction, VehicleState};

pub use condition::{assemble_condition, ConditionArrays, ConditionBundle, ConditionConfig};
pub use extract::{
    describe_trajectory, extract_map_understanding_gt, GlobalUnderstanding, MapUnderstandingConfig, NavLane,
    NavigationReasoning,
};
pub use plan::{lane_follow_plan, nav_benchmark, BenchmarkCase, BenchmarkResult, PlannerConfig};

/// States at a fixed timestep spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeq {
    pub states: Vec<VehicleState>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSeq {
    pub actions: Vec<VehicleAction>,
    pub dt: f64,
}

/// One explicit Euler step. Position advances with the pre-update speed and
/// yaw; speed is clamped at zero.
pub fn step_unicycle(s: &VehicleState, a: &VehicleAction, dt: f64) -> VehicleState {
    let (sin, cos) = s.yaw.sin_cos();
    VehicleState {
        position: crate::geom::Vec2::new(s.position.x + s.speed * cos * dt, s.position.y + s.speed * sin * dt),
        speed: (s.speed + a.accel * dt).max(0.0),
        yaw: normalize_angle(s.yaw + a.yaw_rate * dt),
    }
}

pub fn rollout(s0: &VehicleState, actions: &ActionSeq) -> StateSeq {
    let mut states = Vec::with_capacity(actions.actions.len() + 1);
    states.push(*s0);
    let mut s = *s0;
    for a in &actions.actions {
        s = step_unicycle(&s, a, actions.dt);
        states.push(s);
    }
    StateSeq { states, dt: actions.dt }
}

/// Actions that reproduce the speeds and yaws of `traj` under
/// [`step_unicycle`]. Actions are not clipped to any bounds.
pub fn inverse_dynamics(traj: &StateSeq) -> Result<ActionSeq> {
    if traj.states.len() < 2 {
        return Err(Error::DegenerateInput("inverse dynamics needs at least 2 states".into()));
    }
    if traj.dt.is_nan() || traj.dt <= 0.0 {
        return Err(Error::DegenerateInput(format!("dt must be positive, got {}", traj.dt)));
    }
    let actions = traj
        .states
        .windows(2)
        .map(|w| VehicleAction {
            accel: (w[1].speed - w[0].speed) / traj.dt,
            yaw_rate: shortest_arc(w[0].yaw, w[1].yaw) / traj.dt,
        })
        .collect();
    Ok(ActionSeq { actions, dt: traj.dt })
}
