//! Planar robot kinematics and obstacle handling.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_rad;

/// Floor-plane vector, mm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(a: f64) -> Self {
        Vec2::new(a.cos(), a.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// True position, world frame.
    pub position: Vec2,
    /// Radians, world frame. Heading is taken as exactly known.
    pub heading: f64,
    /// What localization reports; all motion decisions use this.
    pub believed_position: Vec2,
}

impl RobotState {
    pub fn at(position: Vec2, heading: f64) -> Self {
        RobotState { position, heading, believed_position: position }
    }
}

/// Unicycle controller limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    pub speed_mm_s: f64,
    pub turn_rate_deg_s: f64,
    /// Translation is suppressed while the remaining heading error exceeds this.
    pub turn_gate_deg: f64,
    pub arrive_tolerance_mm: f64,
    pub dt_s: f64,
    pub max_steps: usize,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            speed_mm_s: 500.0,
            turn_rate_deg_s: 90.0,
            turn_gate_deg: 30.0,
            arrive_tolerance_mm: 1e-3,
            dt_s: 0.1,
            max_steps: 3000,
        }
    }
}

/// One control step toward `goal`: turn toward it at the capped rate, then
/// translate along the new heading if the remaining heading error is within
/// the gate. Steering uses the believed position; the same displacement is
/// applied to the true position.
pub fn robot_step(state: &RobotState, goal: Vec2, params: &RobotParams, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0);
    let to_goal = goal - state.believed_position;
    let dist = to_goal.norm();
    if dist <= params.arrive_tolerance_mm {
        return *state;
    }
    let error = wrap_rad(to_goal.angle() - state.heading);
    let max_turn = params.turn_rate_deg_s.to_radians() * dt;
    let turn = error.clamp(-max_turn, max_turn);
    let heading = wrap_rad(state.heading + turn);
    let advance = if (error - turn).abs() > params.turn_gate_deg.to_radians() {
        0.0
    } else {
        (params.speed_mm_s * dt).min(dist)
    };
    let step = Vec2::from_angle(heading) * advance;
    RobotState {
        position: state.position + step,
        heading,
        believed_position: state.believed_position + step,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    Disc { center: Vec2, radius_mm: f64 },
    /// Axis-aligned rectangle.
    Rect { min: Vec2, max: Vec2 },
}

impl Obstacle {
    /// Distance along the ray `origin + t * dir` (unit `dir`) at which it
    /// enters this obstacle grown by `inflate`, if it does for `t >= 0`.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2, inflate: f64) -> Option<f64> {
        match *self {
            Obstacle::Disc { center, radius_mm } => {
                let r = radius_mm + inflate;
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.dot(oc) - r * r;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
            Obstacle::Rect { min, max } => {
                let (lo, hi) = (min - Vec2::new(inflate, inflate), max + Vec2::new(inflate, inflate));
                let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
                for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
                    if d.abs() < 1e-15 {
                        if o < l || o > h {
                            return None;
                        }
                    } else {
                        let (a, b) = ((l - o) / d, (h - o) / d);
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                (t0 <= t1).then_some(t0)
            }
        }
    }

    /// Signed clearance from `p` to the obstacle boundary (negative inside).
    pub fn clearance(&self, p: Vec2) -> f64 {
        match *self {
            Obstacle::Disc { center, radius_mm } => p.distance(center) - radius_mm,
            Obstacle::Rect { min, max } => {
                let dx = (min.x - p.x).max(p.x - max.x);
                let dy = (min.y - p.y).max(p.y - max.y);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    dx.max(0.0).hypot(dy.max(0.0))
                }
            }
        }
    }
}

/// How far the robot may advance along `dir` from `origin`: its swept
/// corridor of half-width `robot_radius` must stay `standoff` short of every
/// obstacle it would run into. Obstacles beside the corridor do not count.
pub fn free_travel(obstacles: &[Obstacle], origin: Vec2, dir: Vec2, robot_radius: f64, standoff: f64) -> f64 {
    obstacles
        .iter()
        .filter_map(|o| o.ray_entry(origin, dir, robot_radius))
        .map(|t| t - standoff)
        .fold(f64::INFINITY, f64::min)
}

/// [`robot_step`] followed by an obstacle check on the true position. The
/// translation is clipped so the robot stops at the standoff; the returned
/// flag is true when it was blocked.
pub fn guarded_step(
    state: &RobotState,
    goal: Vec2,
    params: &RobotParams,
    obstacles: &[Obstacle],
    robot_radius: f64,
    standoff: f64,
) -> (RobotState, bool) {
    let next = robot_step(state, goal, params, params.dt_s);
    let moved = next.position - state.position;
    let want = moved.norm();
    if want == 0.0 {
        return (next, false);
    }
    let dir = moved * (1.0 / want);
    let allowed = free_travel(obstacles, state.position, dir, robot_radius, standoff).max(0.0);
    if allowed >= want {
        return (next, false);
    }
    let step = dir * allowed;
    (
        RobotState {
            position: state.position + step,
            heading: next.heading,
            believed_position: state.believed_position + step,
        },
        true,
    )
}
