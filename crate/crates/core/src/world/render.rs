//! Tiny two-camera raster renderer.
//!
//! Camera 0 is a world-aligned top-down view of the full room; camera 1 is a
//! 3x zoom window centered on the agent base for fine manipulation detail.
//! Both render to 16x16 RGB float images in [0, 1]. Footprint radii in the
//! coarse view are inflated so every entity covers at least one pixel center
//! (pixel pitch is 12/16 = 0.75 world units, worst-case center distance
//! 0.53).

use serde::{Deserialize, Serialize};

use super::palette::COLOR_RGB;
use super::scene::{cell_center, dist, Scene, IMG_SIZE};
use super::sim::SimState;

pub const N_CAMERAS: usize = 2;
pub const ZOOM: f64 = 3.0;

const WALL_RGB: [f32; 3] = [0.25, 0.25, 0.28];
const SINK_RGB: [f32; 3] = [0.72, 0.78, 0.85];
const DRAWER_RGB: [f32; 3] = [0.45, 0.30, 0.15];
const DRAWER_OPEN_RGB: [f32; 3] = [0.60, 0.43, 0.24];
const BASKET_RGB: [f32; 3] = [0.78, 0.62, 0.28];
const BED_RGB: [f32; 3] = [0.50, 0.33, 0.58];
const BED_HEAD_RGB: [f32; 3] = [0.68, 0.48, 0.74];
const AGENT_RGB: [f32; 3] = [0.06, 0.06, 0.08];
const TIP_RGB: [f32; 3] = [0.98, 0.98, 0.96];
const OUTSIDE_RGB: [f32; 3] = [0.10, 0.10, 0.12];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub h: usize,
    pub w: usize,
    /// Row-major h*w*3 floats in [0, 1].
    pub data: Vec<f32>,
}

impl Image {
    pub fn filled(h: usize, w: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(h * w * 3);
        for _ in 0..h * w {
            data.extend_from_slice(&rgb);
        }
        Image { h, w, data }
    }

    pub fn get(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.w + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let i = (y * self.w + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub images: Vec<Image>,
    pub proprio: Vec<f64>,
}

/// Pixel color at a world point, shared by both cameras. `detail` scales the
/// entity footprint radii (1.0 = true size, >1 inflates for coarse views).
fn shade(scene: &Scene, state: &SimState, p: (f64, f64), detail: f64) -> [f32; 3] {
    let w = scene.w as f64;
    if p.0 < 0.0 || p.1 < 0.0 || p.0 >= w || p.1 >= w {
        return OUTSIDE_RGB;
    }
    let tip = state.tip();
    // Arm tip marker on top.
    if dist(p, tip) <= 0.20 * detail.max(1.0) + 0.10 * (detail - 1.0).max(0.0) {
        return TIP_RGB;
    }
    // Held object ring around the tip.
    if let Some(i) = state.holding {
        if dist(p, tip) <= 0.42 * detail {
            return COLOR_RGB[scene.objects[i].category];
        }
    }
    // Agent base.
    if dist(p, state.base) <= 0.48 * detail.min(1.3) {
        return AGENT_RGB;
    }
    // Free objects.
    for (i, obj) in scene.objects.iter().enumerate() {
        if state.obj_container[i].is_some() || state.holding == Some(i) {
            continue;
        }
        if dist(p, state.obj_pos[i]) <= 0.40 * detail {
            return COLOR_RGB[obj.category];
        }
    }
    // Receptacles by cell membership.
    let cell = (p.0.floor() as usize, p.1.floor() as usize);
    if scene.sink == Some(cell) {
        return SINK_RGB;
    }
    if let Some(dc) = scene.drawer {
        if dc == cell {
            return if state.drawer_open >= 0.5 {
                DRAWER_OPEN_RGB
            } else {
                DRAWER_RGB
            };
        }
        // Opening extends the drawer one cell along its direction.
        if state.drawer_open > 0.15 {
            let ext = cell_center(dc);
            let ext = (
                ext.0 + scene.drawer_dir.0 * state.drawer_open,
                ext.1 + scene.drawer_dir.1 * state.drawer_open,
            );
            if (p.0 - ext.0).abs() <= 0.5 && (p.1 - ext.1).abs() <= 0.5 {
                return DRAWER_OPEN_RGB;
            }
        }
    }
    if scene.basket == Some(cell) {
        return BASKET_RGB;
    }
    if let Some(bed) = &scene.bed {
        if bed.cells().contains(&cell) {
            let is_head = bed
                .head
                .iter()
                .any(|&h| (h.0 - cell_center(cell).0).abs() < 0.1
                    && (h.1 - cell_center(cell).1).abs() < 0.1);
            return if is_head { BED_HEAD_RGB } else { BED_RGB };
        }
    }
    if scene.walls.contains(&cell) {
        return WALL_RGB;
    }
    scene.floor_tint
}

/// Top-down full-room camera.
pub fn render_overview(scene: &Scene, state: &SimState) -> Image {
    let mut img = Image::filled(IMG_SIZE, IMG_SIZE, [0.0; 3]);
    let scale = scene.w as f64 / IMG_SIZE as f64;
    for py in 0..IMG_SIZE {
        for px in 0..IMG_SIZE {
            let p = ((px as f64 + 0.5) * scale, (py as f64 + 0.5) * scale);
            img.set(py, px, shade(scene, state, p, 1.45));
        }
    }
    img
}

/// Agent-centered zoom camera (world-aligned, 3x magnification).
pub fn render_zoom(scene: &Scene, state: &SimState) -> Image {
    let mut img = Image::filled(IMG_SIZE, IMG_SIZE, [0.0; 3]);
    let span = scene.w as f64 / ZOOM;
    let origin = (state.base.0 - span / 2.0, state.base.1 - span / 2.0);
    let scale = span / IMG_SIZE as f64;
    for py in 0..IMG_SIZE {
        for px in 0..IMG_SIZE {
            let p = (
                origin.0 + (px as f64 + 0.5) * scale,
                origin.1 + (py as f64 + 0.5) * scale,
            );
            img.set(py, px, shade(scene, state, p, 1.0));
        }
    }
    img
}

pub fn observe(scene: &Scene, state: &SimState) -> Observation {
    Observation {
        images: vec![render_overview(scene, state), render_zoom(scene, state)],
        proprio: state.proprio(scene),
    }
}

/// Map a world coordinate to a location bin (the overview-camera pixel
/// column/row it falls in).
pub fn world_to_bin(v: f64, room_w: usize) -> u8 {
    let b = (v * IMG_SIZE as f64 / room_w as f64).floor();
    b.clamp(0.0, (IMG_SIZE - 1) as f64) as u8
}

/// Bounding box of a point entity with a half-cell footprint, as overview
/// pixel bins `[ymin, xmin, ymax, xmax]`.
pub fn point_box_bins(pos: (f64, f64), room_w: usize) -> [u8; 4] {
    let ymin = world_to_bin(pos.1 - 0.5, room_w);
    let xmin = world_to_bin(pos.0 - 0.5, room_w);
    let ymax = world_to_bin(pos.1 + 0.5, room_w).max(ymin);
    let xmax = world_to_bin(pos.0 + 0.5, room_w).max(xmin);
    [ymin, xmin, ymax, xmax]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scene::{generate_scene, Embodiment};

    fn count_color(img: &Image, rgb: [f32; 3]) -> usize {
        let mut n = 0;
        for y in 0..img.h {
            for x in 0..img.w {
                if img.get(y, x) == rgb {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn overview_shows_every_scene_object_and_agent() {
        for seed in 0..10u64 {
            let scene = generate_scene(seed, seed % 16, Embodiment::Mobile);
            let state = SimState::new(&scene);
            let img = render_overview(&scene, &state);
            // At the start the retracted tip sits on the base, so the tip
            // marker may claim the base's pixels; their union is always
            // large enough to cover at least one pixel center.
            assert!(
                count_color(&img, AGENT_RGB) + count_color(&img, TIP_RGB) >= 1,
                "agent visible"
            );
            assert!(count_color(&img, SINK_RGB) >= 1, "sink visible");
            // Every distinct object color appears somewhere.
            for obj in &scene.objects {
                let c = COLOR_RGB[obj.category];
                assert!(
                    count_color(&img, c) >= 1,
                    "object category {} visible (seed {seed})",
                    obj.category
                );
            }
        }
    }

    #[test]
    fn contained_objects_disappear() {
        let scene = generate_scene(3, 0, Embodiment::Mobile);
        let mut state = SimState::new(&scene);
        let cat = scene.objects[0].category;
        let before = count_color(&render_overview(&scene, &state), COLOR_RGB[cat]);
        assert!(before >= 1);
        state.obj_container[0] = Some(crate::world::scene::ReceptacleKind::Sink);
        // No other object of the same category in this scene?
        let dup = scene.objects[1..].iter().any(|o| o.category == cat);
        if !dup {
            let after = count_color(&render_overview(&scene, &state), COLOR_RGB[cat]);
            assert_eq!(after, 0);
        }
    }

    #[test]
    fn zoom_is_agent_centered() {
        let scene = generate_scene(5, 2, Embodiment::Mobile);
        let state = SimState::new(&scene);
        let img = render_zoom(&scene, &state);
        // The agent base sits at the window center.
        let mid = IMG_SIZE / 2;
        let mut found = false;
        for y in mid - 2..mid + 2 {
            for x in mid - 2..mid + 2 {
                if img.get(y, x) == AGENT_RGB || img.get(y, x) == TIP_RGB {
                    found = true;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn images_are_finite_unit_range() {
        let scene = generate_scene(1, 1, Embodiment::Mobile);
        let state = SimState::new(&scene);
        let obs = observe(&scene, &state);
        assert_eq!(obs.images.len(), N_CAMERAS);
        for img in &obs.images {
            assert_eq!(img.data.len(), IMG_SIZE * IMG_SIZE * 3);
            for &v in &img.data {
                assert!((0.0..=1.0).contains(&v) && v.is_finite());
            }
        }
    }

    #[test]
    fn location_bins_cover_the_room() {
        assert_eq!(world_to_bin(0.0, 12), 0);
        assert_eq!(world_to_bin(11.99, 12), 15);
        assert_eq!(world_to_bin(-1.0, 12), 0);
        assert_eq!(world_to_bin(20.0, 12), 15);
        let b = point_box_bins((6.0, 6.0), 12);
        assert!(b[0] <= b[2] && b[1] <= b[3]);
        assert!(b.iter().all(|&v| v < 16));
    }

    #[test]
    fn drawer_render_state_follows_openness() {
        let scene = generate_scene(2, 1, Embodiment::Mobile);
        let mut state = SimState::new(&scene);
        let closed = count_color(&render_overview(&scene, &state), DRAWER_OPEN_RGB);
        state.drawer_open = 1.0;
        let open = count_color(&render_overview(&scene, &state), DRAWER_OPEN_RGB);
        assert!(open > closed);
    }
}
