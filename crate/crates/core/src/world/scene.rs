//! Scene types and the deterministic scene generators.
//!
//! Layout (walls, floor tint, receptacle cells) is a pure function of
//! `env_id`; instance placement (objects, agent start) additionally depends
//! on the scene seed. All positions are in cell units on a `w x w` grid with
//! `x` growing right and `y` growing down; cell `(cx, cy)` has center
//! `(cx + 0.5, cy + 0.5)`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::palette::{
    env_specific_category, group_of, Group, BLANKET, CORE_DISHES, CORE_ITEMS, ENV_UNIVERSE,
    LAB_ENV_ID, PILLOW,
};
use crate::seeding;
use crate::text::OOD_CATEGORY_START;

pub const GRID_W: usize = 12;
pub const IMG_SIZE: usize = 16;
pub const MOBILE_REACH: f64 = 1.6;
pub const FIXED_REACH: f64 = 3.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Embodiment {
    Mobile,
    FixedA,
    FixedB,
}

impl Embodiment {
    /// Native continuous action dimension. Shared semantics lead:
    /// `[arm_dx, arm_dy, grip, articulation, base_vx, base_vy, turn]`;
    /// fixed embodiments truncate the base channels (FixedA keeps one spare
    /// always-zero auxiliary channel).
    pub fn action_dim(self) -> usize {
        match self {
            Embodiment::Mobile => 7,
            Embodiment::FixedA => 5,
            Embodiment::FixedB => 4,
        }
    }

    /// Steps executed open-loop from each predicted chunk.
    pub fn exec_horizon(self) -> usize {
        match self {
            Embodiment::Mobile => 8,
            Embodiment::FixedA => 6,
            Embodiment::FixedB => 4,
        }
    }

    pub fn control_mode(self) -> &'static str {
        match self {
            Embodiment::Mobile => "joint",
            Embodiment::FixedA => "end_effector",
            Embodiment::FixedB => "joint",
        }
    }

    pub fn reach(self) -> f64 {
        match self {
            Embodiment::Mobile => MOBILE_REACH,
            _ => FIXED_REACH,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Embodiment::Mobile => "mobile",
            Embodiment::FixedA => "fixed_a",
            Embodiment::FixedB => "fixed_b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mobile" => Some(Embodiment::Mobile),
            "fixed_a" => Some(Embodiment::FixedA),
            "fixed_b" => Some(Embodiment::FixedB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceptacleKind {
    Sink,
    Drawer,
    Basket,
    Bed,
}

impl ReceptacleKind {
    pub fn word(self) -> &'static str {
        match self {
            ReceptacleKind::Sink => "sink",
            ReceptacleKind::Drawer => "drawer",
            ReceptacleKind::Basket => "basket",
            ReceptacleKind::Bed => "bed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub category: usize,
    pub pos: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BedSpec {
    /// Top-left cell of the 2x2 bed region.
    pub origin: (usize, usize),
    /// Centers of the two head cells (where pillows belong).
    pub head: [(f64, f64); 2],
}

impl BedSpec {
    pub fn center(&self) -> (f64, f64) {
        (self.origin.0 as f64 + 1.0, self.origin.1 as f64 + 1.0)
    }

    pub fn cells(&self) -> [(usize, usize); 4] {
        let (x, y) = self.origin;
        [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub env_id: u64,
    pub embodiment: Embodiment,
    pub w: usize,
    pub seed: u64,
    pub floor_tint: [f32; 3],
    pub walls: Vec<(usize, usize)>,
    pub sink: Option<(usize, usize)>,
    pub drawer: Option<(usize, usize)>,
    /// Unit direction the drawer opens toward (into the room).
    pub drawer_dir: (f64, f64),
    pub drawer_initial_open: f64,
    pub basket: Option<(usize, usize)>,
    pub bed: Option<BedSpec>,
    pub objects: Vec<SceneObject>,
    pub agent_start: (f64, f64),
    pub heading_start: f64,
}

pub fn cell_center(c: (usize, usize)) -> (f64, f64) {
    (c.0 as f64 + 0.5, c.1 as f64 + 0.5)
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl Scene {
    pub fn receptacle_center(&self, kind: ReceptacleKind) -> Option<(f64, f64)> {
        match kind {
            ReceptacleKind::Sink => self.sink.map(cell_center),
            ReceptacleKind::Drawer => self.drawer.map(cell_center),
            ReceptacleKind::Basket => self.basket.map(cell_center),
            ReceptacleKind::Bed => self.bed.as_ref().map(|b| b.center()),
        }
    }

    /// Point the articulation channel operates on (drawer front edge).
    pub fn drawer_handle(&self) -> Option<(f64, f64)> {
        self.drawer.map(|c| {
            let ctr = cell_center(c);
            (
                ctr.0 + self.drawer_dir.0 * 0.55,
                ctr.1 + self.drawer_dir.1 * 0.55,
            )
        })
    }

    fn blocked_cells(&self) -> Vec<(usize, usize)> {
        let mut blocked = self.walls.clone();
        blocked.extend(self.sink);
        blocked.extend(self.drawer);
        blocked.extend(self.basket);
        if let Some(bed) = &self.bed {
            blocked.extend(bed.cells());
        }
        blocked
    }

    /// Cells available for object/agent placement.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let blocked = self.blocked_cells();
        let mut free = Vec::new();
        for y in 1..self.w - 1 {
            for x in 1..self.w - 1 {
                if !blocked.contains(&(x, y)) {
                    free.push((x, y));
                }
            }
        }
        free
    }
}

/// Layout pieces derived from `env_id` alone.
fn env_layout(env_id: u64, rng_tag: u64) -> Scene {
    let mut rng = seeding::rng(env_id, &[rng_tag]);
    let w = GRID_W;
    let tint_base = 0.80 + rng.gen_range(0.0..0.08);
    let floor_tint = [
        (tint_base + rng.gen_range(-0.03..0.03f64)) as f32,
        (tint_base + rng.gen_range(-0.03..0.03f64)) as f32,
        (tint_base + rng.gen_range(-0.03..0.03f64)) as f32,
    ];

    // Bed in one of the four corners.
    let corners = [(1, 1), (w - 3, 1), (1, w - 3), (w - 3, w - 3)];
    let bed_origin = corners[rng.gen_range(0..4)];
    // Head cells are on the bed edge nearest the world boundary.
    let bx = bed_origin.0 as f64 + 1.0;
    let by = bed_origin.1 as f64 + 1.0;
    let head = if by < w as f64 / 2.0 {
        [
            cell_center((bed_origin.0, bed_origin.1)),
            cell_center((bed_origin.0 + 1, bed_origin.1)),
        ]
    } else {
        [
            cell_center((bed_origin.0, bed_origin.1 + 1)),
            cell_center((bed_origin.0 + 1, bed_origin.1 + 1)),
        ]
    };
    let _ = bx;
    let bed = BedSpec {
        origin: bed_origin,
        head,
    };

    // Sink, drawer, basket: edge-adjacent cells, spread out, away from bed.
    let mut spots: Vec<(usize, usize)> = Vec::new();
    let mut guard = 0;
    while spots.len() < 3 && guard < 10_000 {
        guard += 1;
        let side = rng.gen_range(0..4usize);
        let off = rng.gen_range(1..w - 1);
        let cell = match side {
            0 => (off, 1),
            1 => (off, w - 2),
            2 => (1, off),
            _ => (w - 2, off),
        };
        let c = cell_center(cell);
        let far_enough = spots.iter().all(|&s| dist(cell_center(s), c) >= 3.5)
            && bed.cells().iter().all(|&b| dist(cell_center(b), c) >= 2.5);
        if far_enough {
            spots.push(cell);
        }
    }
    assert_eq!(spots.len(), 3, "receptacle layout failed for env {env_id}");
    let (sink, drawer, basket) = (spots[0], spots[1], spots[2]);
    let half = w as f64 / 2.0;
    let dctr = cell_center(drawer);
    let drawer_dir = if (dctr.0 - half).abs() > (dctr.1 - half).abs() {
        (if dctr.0 < half { 1.0 } else { -1.0 }, 0.0)
    } else {
        (0.0, if dctr.1 < half { 1.0 } else { -1.0 })
    };

    let mut scene = Scene {
        env_id,
        embodiment: Embodiment::Mobile,
        w,
        seed: 0,
        floor_tint,
        walls: Vec::new(),
        sink: Some(sink),
        drawer: Some(drawer),
        drawer_dir,
        drawer_initial_open: 0.0,
        basket: Some(basket),
        bed: Some(bed),
        objects: Vec::new(),
        agent_start: (half, half),
        heading_start: 0.0,
    };

    // Decorative interior wall segments.
    let n_walls = 2 + (env_id % 3) as usize;
    let mut walls = Vec::new();
    let mut guard = 0;
    while walls.len() < n_walls && guard < 10_000 {
        guard += 1;
        let x = rng.gen_range(2..w - 4);
        let y = rng.gen_range(2..w - 4);
        let len = rng.gen_range(2..4usize);
        let horiz: bool = rng.gen();
        let cells: Vec<(usize, usize)> = (0..len)
            .map(|i| if horiz { (x + i, y) } else { (x, y + i) })
            .collect();
        let clear = cells.iter().all(|&c| {
            let p = cell_center(c);
            dist(p, cell_center(sink)) >= 2.0
                && dist(p, cell_center(drawer)) >= 2.0
                && dist(p, cell_center(basket)) >= 2.0
                && scene
                    .bed
                    .as_ref()
                    .unwrap()
                    .cells()
                    .iter()
                    .all(|&b| dist(cell_center(b), p) >= 2.0)
                && !walls.contains(&c)
        });
        if clear {
            walls.extend(cells);
        }
    }
    scene.walls = walls;
    scene
}

fn take_free_cell(free: &mut Vec<(usize, usize)>, rng: &mut impl Rng) -> (usize, usize) {
    assert!(!free.is_empty(), "scene ran out of free cells");
    free.swap_remove(rng.gen_range(0..free.len()))
}

/// Generate a household scene. Layout follows `env_id`; object instances and
/// the agent pose follow `seed`. Mobile scenes support all four tasks;
/// `FixedA` scenes are a within-reach tabletop arrangement of the same
/// environment supporting the sink and drawer tasks.
pub fn generate_scene(seed: u64, env_id: u64, embodiment: Embodiment) -> Scene {
    assert!(
        env_id < ENV_UNIVERSE,
        "env_id {env_id} outside the {ENV_UNIVERSE}-environment universe"
    );
    let mut scene = env_layout(env_id, 0x5eed_1a70);
    scene.seed = seed;
    scene.embodiment = embodiment;
    let mut rng = seeding::rng(seed, &[0x0b1ec7, env_id, embodiment.action_dim() as u64]);

    let specific = env_specific_category(env_id);
    match embodiment {
        Embodiment::Mobile => {
            let mut free = scene.free_cells();
            // Four dishes: the three core dishes plus the env dish (or a
            // duplicate core dish when the env category is not a dish).
            let mut dish_cats: Vec<usize> = CORE_DISHES.to_vec();
            if group_of(specific) == Group::Dish {
                dish_cats.push(specific);
            } else {
                dish_cats.push(CORE_DISHES[rng.gen_range(0..CORE_DISHES.len())]);
            }
            // Two drawer items.
            let item_cats: Vec<usize> = if group_of(specific) == Group::Item {
                vec![specific, CORE_ITEMS[rng.gen_range(0..CORE_ITEMS.len())]]
            } else {
                CORE_ITEMS.to_vec()
            };
            // One clothing piece.
            let cloth_cat = if group_of(specific) == Group::Clothing {
                specific
            } else {
                super::palette::CORE_CLOTHING[0]
            };
            for cat in dish_cats.into_iter().chain(item_cats).chain([cloth_cat]) {
                let cell = take_free_cell(&mut free, &mut rng);
                scene.objects.push(SceneObject {
                    category: cat,
                    pos: cell_center(cell),
                });
            }
            // Bedding starts displaced near the bed.
            let bed_center = scene.bed.as_ref().unwrap().center();
            for cat in [BLANKET, PILLOW, PILLOW] {
                let near: Vec<usize> = (0..free.len())
                    .filter(|&i| dist(cell_center(free[i]), bed_center) <= 4.5)
                    .collect();
                let cell = if near.is_empty() {
                    take_free_cell(&mut free, &mut rng)
                } else {
                    free.swap_remove(near[rng.gen_range(0..near.len())])
                };
                scene.objects.push(SceneObject {
                    category: cat,
                    pos: cell_center(cell),
                });
            }
            let agent_cell = take_free_cell(&mut free, &mut rng);
            scene.agent_start = cell_center(agent_cell);
            scene.heading_start = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        }
        Embodiment::FixedA => {
            // Stationary arm: sink and drawer are rearranged within reach of
            // the base; basket/bed tasks are unavailable.
            scene.basket = None;
            scene.bed = None;
            let w = scene.w;
            let base = (
                rng.gen_range(3..w - 3) as f64 + 0.5,
                rng.gen_range(3..w - 3) as f64 + 0.5,
            );
            scene.agent_start = base;
            scene.heading_start = 0.0;
            let sink_cell = (
                (base.0 + 2.0).floor() as usize,
                base.1.floor() as usize,
            );
            let drawer_cell = (
                (base.0 - 3.0).floor() as usize,
                base.1.floor() as usize,
            );
            scene.sink = Some(sink_cell);
            scene.drawer = Some(drawer_cell);
            scene.drawer_dir = (1.0, 0.0);
            scene.walls.retain(|&c| {
                dist(cell_center(c), base) > FIXED_REACH + 1.0
            });
            // Objects inside the reach disk; a small fraction deliberately
            // lands out of reach so some episodes fail for filtering.
            let mut dish_cats: Vec<usize> = vec![
                CORE_DISHES[rng.gen_range(0..CORE_DISHES.len())],
                if group_of(specific) == Group::Dish {
                    specific
                } else {
                    CORE_DISHES[rng.gen_range(0..CORE_DISHES.len())]
                },
            ];
            let item_cat = if group_of(specific) == Group::Item {
                specific
            } else {
                CORE_ITEMS[rng.gen_range(0..CORE_ITEMS.len())]
            };
            dish_cats.push(item_cat);
            for cat in dish_cats {
                let out_of_reach = rng.gen_bool(0.06);
                let radius = if out_of_reach {
                    rng.gen_range(FIXED_REACH + 0.5..FIXED_REACH + 1.3)
                } else {
                    rng.gen_range(0.9..FIXED_REACH - 0.5)
                };
                let ang = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let pos = (
                    (base.0 + radius * ang.cos()).clamp(0.6, w as f64 - 0.6),
                    (base.1 + radius * ang.sin()).clamp(0.6, w as f64 - 0.6),
                );
                scene.objects.push(SceneObject { category: cat, pos });
            }
        }
        Embodiment::FixedB => {
            panic!("FixedB scenes come from generate_lab_scene");
        }
    }
    scene
}

/// Single-receptacle lab scene for the stationary `FixedB` arm. Categories
/// cycle through the whole in-distribution table (including categories whose
/// home environment is never in any training set), and the receptacle kind
/// follows the category group so every pick has a sensible place target.
pub fn generate_lab_scene(seed: u64) -> Scene {
    let mut rng = seeding::rng(seed, &[0x1ab5]);
    let w = GRID_W;
    let id_cats: Vec<usize> = (0..OOD_CATEGORY_START)
        .filter(|&c| c != PILLOW && c != BLANKET)
        .collect();
    let target = id_cats[(seed as usize) % id_cats.len()];
    let recep = match group_of(target) {
        Group::Dish => ReceptacleKind::Sink,
        Group::Item => ReceptacleKind::Drawer,
        _ => ReceptacleKind::Basket,
    };
    let base = (
        rng.gen_range(4..w - 4) as f64 + 0.5,
        rng.gen_range(4..w - 4) as f64 + 0.5,
    );
    let ang = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let rcell = (
        (base.0 + 2.2 * ang.cos()).floor() as usize,
        (base.1 + 2.2 * ang.sin()).floor() as usize,
    );
    let mut scene = Scene {
        env_id: LAB_ENV_ID,
        embodiment: Embodiment::FixedB,
        w,
        seed,
        floor_tint: [0.86, 0.86, 0.88],
        walls: Vec::new(),
        sink: None,
        drawer: None,
        drawer_dir: (1.0, 0.0),
        // Lab drawers start open: lab episodes are single pick-and-place.
        drawer_initial_open: 1.0,
        basket: None,
        bed: None,
        objects: Vec::new(),
        agent_start: base,
        heading_start: 0.0,
    };
    match recep {
        ReceptacleKind::Sink => scene.sink = Some(rcell),
        ReceptacleKind::Drawer => scene.drawer = Some(rcell),
        ReceptacleKind::Basket => scene.basket = Some(rcell),
        ReceptacleKind::Bed => unreachable!(),
    }
    // Target plus one distractor of a different category, both in reach.
    let distractor = id_cats[(seed as usize + 7) % id_cats.len()];
    let rctr = cell_center(rcell);
    for (i, cat) in [target, distractor].into_iter().enumerate() {
        let unreachable = i == 0 && rng.gen_bool(0.05);
        let mut pos;
        let mut guard = 0;
        loop {
            guard += 1;
            let radius = if unreachable {
                rng.gen_range(FIXED_REACH + 0.5..FIXED_REACH + 1.2)
            } else {
                rng.gen_range(0.9..FIXED_REACH - 0.6)
            };
            let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            pos = (
                (base.0 + radius * a.cos()).clamp(0.6, w as f64 - 0.6),
                (base.1 + radius * a.sin()).clamp(0.6, w as f64 - 0.6),
            );
            if dist(pos, rctr) > 1.2 || guard > 200 {
                break;
            }
        }
        scene.objects.push(SceneObject { category: cat, pos });
    }
    scene
}

/// Scene used by the instruction-following protocol: five objects, the
/// commanded target strictly farther from the agent than every distractor,
/// so reaching for the nearest object scores ~chance.
pub fn generate_lang_follow_scene(
    seed: u64,
    env_id: u64,
    ood: bool,
) -> (Scene, usize, ReceptacleKind) {
    let mut scene = env_layout(env_id, 0x5eed_1a70);
    scene.seed = seed;
    scene.embodiment = Embodiment::Mobile;
    let mut rng = seeding::rng(seed, &[0x1a46, env_id, ood as u64]);

    let pool: Vec<usize> = if ood {
        super::palette::ood_categories()
    } else {
        (0..20).collect() // dishes and drawer items
    };
    let mut cats = pool.clone();
    cats.shuffle(&mut rng);
    cats.truncate(5);
    let target = cats[0];
    let recep = if seed % 2 == 0 {
        ReceptacleKind::Sink
    } else {
        ReceptacleKind::Basket
    };
    // FixedA tabletop scenes removed basket; mobile layout always has one.
    let mut free = scene.free_cells();
    let agent_cell = take_free_cell(&mut free, &mut rng);
    scene.agent_start = cell_center(agent_cell);
    scene.heading_start = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);

    // Distractors close to the agent, target strictly farther.
    let apos = scene.agent_start;
    let mut near: Vec<(usize, usize)> = free
        .iter()
        .copied()
        .filter(|&c| dist(cell_center(c), apos) <= 4.0)
        .collect();
    near.shuffle(&mut rng);
    let mut max_d = 0.0f64;
    for &cat in &cats[1..] {
        let cell = near.pop().unwrap_or_else(|| {
            let c = free
                .iter()
                .copied()
                .min_by(|a, b| {
                    dist(cell_center(*a), apos)
                        .partial_cmp(&dist(cell_center(*b), apos))
                        .unwrap()
                })
                .expect("free cell");
            c
        });
        free.retain(|&c| c != cell);
        max_d = max_d.max(dist(cell_center(cell), apos));
        scene.objects.push(SceneObject {
            category: cat,
            pos: cell_center(cell),
        });
    }
    let far: Vec<(usize, usize)> = free
        .iter()
        .copied()
        .filter(|&c| dist(cell_center(c), apos) >= max_d + 1.0)
        .collect();
    let tcell = if far.is_empty() {
        // Fall back to the farthest available cell.
        free.iter()
            .copied()
            .max_by(|a, b| {
                dist(cell_center(*a), apos)
                    .partial_cmp(&dist(cell_center(*b), apos))
                    .unwrap()
            })
            .expect("free cell")
    } else {
        far[rng.gen_range(0..far.len())]
    };
    scene.objects.insert(
        0,
        SceneObject {
            category: target,
            pos: cell_center(tcell),
        },
    );
    (scene, target, recep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::palette;

    #[test]
    fn generation_is_deterministic() {
        for emb in [Embodiment::Mobile, Embodiment::FixedA] {
            let a = generate_scene(42, 3, emb);
            let b = generate_scene(42, 3, emb);
            assert_eq!(a, b);
        }
        assert_eq!(generate_lab_scene(9), generate_lab_scene(9));
    }

    #[test]
    fn different_env_ids_have_disjoint_specific_categories() {
        // 100 scenes from env 1 vs env 2: the non-core categories never
        // intersect.
        let spec1 = palette::env_specific_category(1);
        let spec2 = palette::env_specific_category(2);
        for seed in 0..100u64 {
            let s1 = generate_scene(seed, 1, Embodiment::Mobile);
            let s2 = generate_scene(seed, 2, Embodiment::Mobile);
            for o in &s1.objects {
                assert_ne!(o.category, spec2);
            }
            for o in &s2.objects {
                assert_ne!(o.category, spec1);
            }
        }
    }

    #[test]
    fn mobile_scene_supports_all_tasks() {
        for seed in 0..20u64 {
            let s = generate_scene(seed, seed % ENV_UNIVERSE, Embodiment::Mobile);
            let dishes = s
                .objects
                .iter()
                .filter(|o| palette::group_of(o.category) == Group::Dish)
                .count();
            let items = s
                .objects
                .iter()
                .filter(|o| palette::group_of(o.category) == Group::Item)
                .count();
            assert_eq!(dishes, 4);
            assert_eq!(items, 2);
            assert!(s.sink.is_some() && s.drawer.is_some());
            assert!(s.basket.is_some() && s.bed.is_some());
            // Objects sit on distinct free cells.
            for (i, a) in s.objects.iter().enumerate() {
                for b in &s.objects[i + 1..] {
                    assert!(dist(a.pos, b.pos) >= 0.99);
                }
            }
        }
    }

    #[test]
    fn env_id_outside_universe_panics() {
        let r = std::panic::catch_unwind(|| generate_scene(0, ENV_UNIVERSE, Embodiment::Mobile));
        assert!(r.is_err());
    }

    #[test]
    fn lang_follow_target_is_farther_than_distractors() {
        let mut ok = 0;
        for seed in 0..50u64 {
            let (scene, target, _) = generate_lang_follow_scene(seed, 16 + seed % 4, seed % 2 == 0);
            assert_eq!(scene.objects.len(), 5);
            assert_eq!(scene.objects[0].category, target);
            let td = dist(scene.objects[0].pos, scene.agent_start);
            if scene.objects[1..]
                .iter()
                .all(|o| dist(o.pos, scene.agent_start) < td)
            {
                ok += 1;
            }
            let cats: std::collections::HashSet<usize> =
                scene.objects.iter().map(|o| o.category).collect();
            assert_eq!(cats.len(), 5, "categories are distinct");
        }
        assert!(ok >= 48, "target farther in {ok}/50 scenes");
    }

    #[test]
    fn ood_scenes_use_only_web_categories() {
        for seed in 0..20u64 {
            let (scene, _, _) = generate_lang_follow_scene(seed, 17, true);
            for o in &scene.objects {
                assert!(o.category >= OOD_CATEGORY_START);
            }
        }
    }
}
