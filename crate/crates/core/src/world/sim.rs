//! Deterministic kinematic simulator.
//!
//! Action layout is shared across embodiments (leading dimensions):
//! `[arm_dx, arm_dy, grip, articulation, base_vx, base_vy, turn]`.
//! Each channel is a command in `[-1, 1]` scaled by a per-channel rate.
//! Fixed embodiments simply have no base channels (`FixedA` keeps one spare
//! auxiliary channel that the simulator ignores).

use serde::{Deserialize, Serialize};

use super::scene::{cell_center, dist, Embodiment, ReceptacleKind, Scene};
use crate::{Error, Result};

pub const MAX_BASE_SPEED: f64 = 0.40;
pub const MAX_TURN: f64 = 0.30;
pub const MAX_ARM_SPEED: f64 = 0.35;
pub const GRIP_RATE: f64 = 0.50;
pub const ARTIC_RATE: f64 = 0.34;
/// Gripper closes on an object within this range of the arm tip.
pub const GRAB_RADIUS: f64 = 0.55;
/// Articulation commands act when the tip is near the drawer handle.
pub const HANDLE_RADIUS: f64 = 0.70;
/// A released object within this range of a receptacle center goes inside.
pub const PLACE_RADIUS: f64 = 0.80;
pub const GRIP_CLOSE_THRESH: f64 = 0.6;
pub const GRIP_OPEN_THRESH: f64 = 0.4;
pub const DRAWER_OPEN_THRESH: f64 = 0.7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimState {
    pub base: (f64, f64),
    pub heading: f64,
    /// Arm tip offset relative to the base, bounded by the embodiment reach.
    pub arm: (f64, f64),
    /// Gripper aperture in [0, 1]; 1 = closed.
    pub grip: f64,
    pub holding: Option<usize>,
    pub obj_pos: Vec<(f64, f64)>,
    pub obj_container: Vec<Option<ReceptacleKind>>,
    pub obj_was_held: Vec<bool>,
    /// Distance to the basket center at release time, if released over it.
    pub basket_release_dist: Vec<Option<f64>>,
    pub first_held: Option<usize>,
    pub drawer_open: f64,
    pub drawer_was_open: bool,
    pub step: usize,
}

impl SimState {
    pub fn new(scene: &Scene) -> Self {
        let n = scene.objects.len();
        SimState {
            base: scene.agent_start,
            heading: scene.heading_start,
            arm: (0.0, 0.0),
            grip: 0.0,
            holding: None,
            obj_pos: scene.objects.iter().map(|o| o.pos).collect(),
            obj_container: vec![None; n],
            obj_was_held: vec![false; n],
            basket_release_dist: vec![None; n],
            first_held: None,
            drawer_open: scene.drawer_initial_open,
            drawer_was_open: scene.drawer_initial_open >= DRAWER_OPEN_THRESH,
            step: 0,
        }
    }

    pub fn tip(&self) -> (f64, f64) {
        (self.base.0 + self.arm.0, self.base.1 + self.arm.1)
    }

    /// Proprioceptive reading in [-1, 1] per dimension, matching the native
    /// action dimension of the embodiment:
    /// `[arm_x/reach, arm_y/reach, grip*2-1, drawer*2-1, base_x, base_y, heading]`
    /// with base coordinates scaled to the grid and heading to pi.
    pub fn proprio(&self, scene: &Scene) -> Vec<f64> {
        let reach = scene.embodiment.reach();
        let half = scene.w as f64 / 2.0;
        let holding = if self.holding.is_some() { 1.0 } else { -1.0 };
        let full = [
            (self.arm.0 / reach).clamp(-1.0, 1.0),
            (self.arm.1 / reach).clamp(-1.0, 1.0),
            (self.grip * 2.0 - 1.0).clamp(-1.0, 1.0),
            (self.drawer_open * 2.0 - 1.0).clamp(-1.0, 1.0),
            ((self.base.0 - half) / half).clamp(-1.0, 1.0),
            ((self.base.1 - half) / half).clamp(-1.0, 1.0),
        ];
        // One slot of the native action width is spent on the holding flag
        // (replacing heading, which the overhead view already shows) so the
        // proprio vector fits the shared padded action width.
        let d = scene.embodiment.action_dim();
        let mut v: Vec<f64> = full[..d - 1].to_vec();
        v.push(holding);
        v
    }

    fn nearest_free_object(&self, at: (f64, f64)) -> Option<usize> {
        let mut best = None;
        let mut best_d = GRAB_RADIUS;
        for (i, &p) in self.obj_pos.iter().enumerate() {
            if self.obj_container[i].is_some() {
                continue;
            }
            let d = dist(p, at);
            if d <= best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }

    /// Advance one step. `action` must have the embodiment's native length.
    pub fn step(&mut self, scene: &Scene, action: &[f64]) -> Result<()> {
        let d = scene.embodiment.action_dim();
        if action.len() != d {
            return Err(Error::DimMismatch {
                context: "sim action",
                expected: d,
                got: action.len(),
            });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sim action"));
        }
        let get = |i: usize| action.get(i).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        let (adx, ady, grip_cmd, artic) = (get(0), get(1), get(2), get(3));
        let (vx, vy, turn) = if scene.embodiment == Embodiment::Mobile {
            (get(4), get(5), get(6))
        } else {
            (0.0, 0.0, 0.0)
        };

        // Base motion (world frame, holonomic), clamped to the walkable area.
        let w = scene.w as f64;
        self.base.0 = (self.base.0 + vx * MAX_BASE_SPEED).clamp(0.6, w - 0.6);
        self.base.1 = (self.base.1 + vy * MAX_BASE_SPEED).clamp(0.6, w - 0.6);
        self.heading += turn * MAX_TURN;
        while self.heading >= std::f64::consts::PI {
            self.heading -= 2.0 * std::f64::consts::PI;
        }
        while self.heading < -std::f64::consts::PI {
            self.heading += 2.0 * std::f64::consts::PI;
        }

        // Arm motion within the reach disk.
        let reach = scene.embodiment.reach();
        let mut ax = self.arm.0 + adx * MAX_ARM_SPEED;
        let mut ay = self.arm.1 + ady * MAX_ARM_SPEED;
        let norm = (ax * ax + ay * ay).sqrt();
        if norm > reach {
            ax *= reach / norm;
            ay *= reach / norm;
        }
        self.arm = (ax, ay);

        // Held object follows the tip.
        if let Some(i) = self.holding {
            self.obj_pos[i] = self.tip();
        }

        // Gripper events on threshold crossings.
        let prev_grip = self.grip;
        self.grip = (self.grip + grip_cmd * GRIP_RATE).clamp(0.0, 1.0);
        if self.holding.is_none()
            && prev_grip < GRIP_CLOSE_THRESH
            && self.grip >= GRIP_CLOSE_THRESH
        {
            if let Some(i) = self.nearest_free_object(self.tip()) {
                self.holding = Some(i);
                self.obj_was_held[i] = true;
                if self.first_held.is_none() {
                    self.first_held = Some(i);
                }
                self.obj_pos[i] = self.tip();
            }
        } else if self.holding.is_some()
            && prev_grip > GRIP_OPEN_THRESH
            && self.grip <= GRIP_OPEN_THRESH
        {
            let i = self.holding.take().unwrap();
            self.obj_pos[i] = self.tip();
            self.settle_release(scene, i);
        }

        // Articulation moves the drawer when the tip is at the handle.
        if artic.abs() > 1e-9 {
            if let Some(handle) = scene.drawer_handle() {
                if dist(self.tip(), handle) <= HANDLE_RADIUS {
                    self.drawer_open = (self.drawer_open + artic * ARTIC_RATE).clamp(0.0, 1.0);
                    if self.drawer_open >= DRAWER_OPEN_THRESH {
                        self.drawer_was_open = true;
                    }
                }
            }
        }

        self.step += 1;
        Ok(())
    }

    fn settle_release(&mut self, scene: &Scene, i: usize) {
        let p = self.obj_pos[i];
        let sink = scene.sink.map(cell_center);
        let basket = scene.basket.map(cell_center);
        let drawer = scene.drawer.map(cell_center);
        if let Some(c) = sink {
            if dist(p, c) <= PLACE_RADIUS {
                self.obj_container[i] = Some(ReceptacleKind::Sink);
                self.obj_pos[i] = c;
                return;
            }
        }
        if let Some(c) = drawer {
            if dist(p, c) <= PLACE_RADIUS && self.drawer_open >= DRAWER_OPEN_THRESH {
                self.obj_container[i] = Some(ReceptacleKind::Drawer);
                self.obj_pos[i] = c;
                return;
            }
        }
        if let Some(c) = basket {
            let d = dist(p, c);
            if d <= PLACE_RADIUS {
                self.obj_container[i] = Some(ReceptacleKind::Basket);
                self.basket_release_dist[i] = Some(d);
                self.obj_pos[i] = c;
            }
        }
        // Bed is an open surface, not a container: objects stay where
        // released and remain visible/retrievable.
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scene::{generate_lab_scene, generate_scene};

    fn drive_to(state: &mut SimState, scene: &Scene, target: (f64, f64)) {
        for _ in 0..400 {
            let dx = target.0 - state.base.0;
            let dy = target.1 - state.base.1;
            if (dx * dx + dy * dy).sqrt() < 0.1 {
                break;
            }
            let a = [
                0.0,
                0.0,
                0.0,
                0.0,
                (dx / MAX_BASE_SPEED).clamp(-1.0, 1.0),
                (dy / MAX_BASE_SPEED).clamp(-1.0, 1.0),
                0.0,
            ];
            state.step(scene, &a).unwrap();
        }
    }

    fn reach_arm(state: &mut SimState, scene: &Scene, target: (f64, f64)) {
        for _ in 0..100 {
            let dx = target.0 - state.tip().0;
            let dy = target.1 - state.tip().1;
            if (dx * dx + dy * dy).sqrt() < 0.05 {
                break;
            }
            let a = [
                (dx / MAX_ARM_SPEED).clamp(-1.0, 1.0),
                (dy / MAX_ARM_SPEED).clamp(-1.0, 1.0),
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
            ];
            state.step(scene, &a).unwrap();
        }
    }

    #[test]
    fn pick_and_place_into_sink() {
        let scene = generate_scene(7, 0, Embodiment::Mobile);
        let mut st = SimState::new(&scene);
        let obj = 0;
        let opos = st.obj_pos[obj];
        drive_to(&mut st, &scene, opos);
        reach_arm(&mut st, &scene, opos);
        // Close the gripper: object becomes held.
        for _ in 0..3 {
            st.step(&scene, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.holding, Some(obj));
        assert!(st.obj_was_held[obj]);
        assert_eq!(st.first_held, Some(obj));
        // Carry to the sink: held object tracks the tip.
        let sink = cell_center(scene.sink.unwrap());
        drive_to(&mut st, &scene, sink);
        reach_arm(&mut st, &scene, sink);
        assert!(dist(st.obj_pos[obj], st.tip()) < 1e-9);
        // Open the gripper: object is contained.
        for _ in 0..3 {
            st.step(&scene, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.holding, None);
        assert_eq!(st.obj_container[obj], Some(ReceptacleKind::Sink));
        // Contained objects cannot be re-grasped.
        reach_arm(&mut st, &scene, sink);
        for _ in 0..3 {
            st.step(&scene, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.holding, None);
    }

    #[test]
    fn drawer_requires_open_before_containment() {
        let scene = generate_scene(3, 1, Embodiment::Mobile);
        let mut st = SimState::new(&scene);
        let drawer = cell_center(scene.drawer.unwrap());
        let obj = 4; // a drawer item
        let opos = st.obj_pos[obj];
        drive_to(&mut st, &scene, opos);
        reach_arm(&mut st, &scene, opos);
        for _ in 0..3 {
            st.step(&scene, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.holding, Some(obj));
        drive_to(&mut st, &scene, drawer);
        reach_arm(&mut st, &scene, drawer);
        // Release over the CLOSED drawer: no containment.
        for _ in 0..3 {
            st.step(&scene, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.obj_container[obj], None);
        // Open the drawer at the handle.
        let handle = scene.drawer_handle().unwrap();
        reach_arm(&mut st, &scene, handle);
        for _ in 0..5 {
            st.step(&scene, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert!(st.drawer_open >= DRAWER_OPEN_THRESH);
        assert!(st.drawer_was_open);
        // Pick the item back up and drop it in.
        let opos = st.obj_pos[obj];
        reach_arm(&mut st, &scene, opos);
        for _ in 0..4 {
            st.step(&scene, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.holding, Some(obj));
        reach_arm(&mut st, &scene, drawer);
        for _ in 0..4 {
            st.step(&scene, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.obj_container[obj], Some(ReceptacleKind::Drawer));
    }

    #[test]
    fn articulation_needs_tip_at_handle() {
        let scene = generate_scene(3, 1, Embodiment::Mobile);
        let mut st = SimState::new(&scene);
        // Far from the handle: articulation does nothing.
        for _ in 0..5 {
            st.step(&scene, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(st.drawer_open, 0.0);
    }

    #[test]
    fn arm_stays_within_reach_and_base_in_bounds() {
        let scene = generate_scene(11, 2, Embodiment::Mobile);
        let mut st = SimState::new(&scene);
        for _ in 0..60 {
            st.step(&scene, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        }
        let r = (st.arm.0 * st.arm.0 + st.arm.1 * st.arm.1).sqrt();
        assert!(r <= scene.embodiment.reach() + 1e-9);
        assert!(st.base.0 <= scene.w as f64 - 0.6 + 1e-9);
        assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&st.heading));
    }

    #[test]
    fn fixed_embodiment_ignores_base_channels() {
        let scene = generate_scene(5, 4, Embodiment::FixedA);
        let mut st = SimState::new(&scene);
        let start = st.base;
        st.step(&scene, &[0.2, 0.1, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(st.base, start);
        // Wrong action length is an error.
        assert!(st.step(&scene, &[0.0; 7]).is_err());
        // Non-finite actions are an error.
        assert!(st.step(&scene, &[f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn proprio_dimension_matches_native_action_width() {
        let scene = generate_scene(5, 4, Embodiment::Mobile);
        let st = SimState::new(&scene);
        let p = st.proprio(&scene);
        assert_eq!(p.len(), 7); // arm xy, grip, drawer, base xy, holding
        assert!(p.iter().all(|v| (-1.0..=1.0).contains(v)));
        let scene_a = generate_scene(5, 4, Embodiment::FixedA);
        let st_a = SimState::new(&scene_a);
        assert_eq!(st_a.proprio(&scene_a).len(), 5);
        let scene_b = generate_lab_scene(5);
        let st_b = SimState::new(&scene_b);
        assert_eq!(st_b.proprio(&scene_b).len(), 4);
    }
}
