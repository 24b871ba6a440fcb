//! Long-horizon scoring rubrics.
//!
//! Each task is graded as earned points over the scene's achievable maximum,
//! so partially completed episodes get partial credit. On the canonical
//! mobile household scene the maxima are: dishes 8, drawer items 4,
//! laundry 3, bed 5.

use serde::{Deserialize, Serialize};

use super::expert::Task;
use super::palette::{group_of, Group, BLANKET, PILLOW};
use super::scene::{dist, ReceptacleKind, Scene};
use super::sim::SimState;

/// End-of-episode facts sufficient for scoring, detached from the simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RubricFacts {
    pub categories: Vec<usize>,
    pub was_held: Vec<bool>,
    pub containers: Vec<Option<ReceptacleKind>>,
    pub final_pos: Vec<(f64, f64)>,
    pub basket_release_dist: Vec<Option<f64>>,
    pub first_held_category: Option<usize>,
    pub drawer_open_final: f64,
    pub drawer_was_open: bool,
    pub steps: usize,
}

impl RubricFacts {
    pub fn from_state(scene: &Scene, state: &SimState) -> Self {
        RubricFacts {
            categories: scene.objects.iter().map(|o| o.category).collect(),
            was_held: state.obj_was_held.clone(),
            containers: state.obj_container.clone(),
            final_pos: state.obj_pos.clone(),
            basket_release_dist: state.basket_release_dist.clone(),
            first_held_category: state.first_held.map(|i| scene.objects[i].category),
            drawer_open_final: state.drawer_open,
            drawer_was_open: state.drawer_was_open,
            steps: state.step,
        }
    }
}

/// Points earned and the maximum achievable for this scene+task.
pub fn score(scene: &Scene, facts: &RubricFacts, task: &Task) -> (f64, f64) {
    let n = facts.categories.len();
    let of_group = |g: Group| (0..n).filter(move |&i| group_of(facts.categories[i]) == g);
    match task {
        Task::Dishes => {
            // Per dish: 1 point touched, 1 point in the sink.
            let mut pts = 0.0;
            let mut max = 0.0;
            for i in of_group(Group::Dish) {
                max += 2.0;
                if facts.was_held[i] {
                    pts += 1.0;
                }
                if facts.containers[i] == Some(ReceptacleKind::Sink) {
                    pts += 1.0;
                }
            }
            (pts, max)
        }
        Task::Items => {
            // 1 point opening the drawer, 1 per item inside, 1 closing it.
            let mut pts = 0.0;
            let mut max = 2.0;
            if facts.drawer_was_open {
                pts += 1.0;
            }
            for i in of_group(Group::Item) {
                max += 1.0;
                if facts.containers[i] == Some(ReceptacleKind::Drawer) {
                    pts += 1.0;
                }
            }
            if facts.drawer_was_open && facts.drawer_open_final <= 0.3 {
                pts += 1.0;
            }
            (pts, max)
        }
        Task::Laundry => {
            // Per clothing piece: touched, in the basket, released deep
            // inside (close to the basket center).
            let mut pts = 0.0;
            let mut max = 0.0;
            for i in of_group(Group::Clothing) {
                max += 3.0;
                if facts.was_held[i] {
                    pts += 1.0;
                }
                if facts.containers[i] == Some(ReceptacleKind::Basket) {
                    pts += 1.0;
                    if facts.basket_release_dist[i].map_or(false, |d| d <= 0.4) {
                        pts += 1.0;
                    }
                }
            }
            (pts, max)
        }
        Task::Bed => {
            let Some(bed) = scene.bed.as_ref() else {
                return (0.0, 0.0);
            };
            let mut pts = 0.0;
            let max = 5.0;
            // One point per head cell covered by a distinct pillow.
            let pillows: Vec<usize> = (0..n).filter(|&i| facts.categories[i] == PILLOW).collect();
            let mut used = vec![false; n];
            for &h in &bed.head {
                let mut best: Option<(usize, f64)> = None;
                for &p in &pillows {
                    if used[p] {
                        continue;
                    }
                    let d = dist(facts.final_pos[p], h);
                    if d <= 0.6 && best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((p, d));
                    }
                }
                if let Some((p, _)) = best {
                    used[p] = true;
                    pts += 1.0;
                }
            }
            if let Some(b) = (0..n).find(|&i| facts.categories[i] == BLANKET) {
                if dist(facts.final_pos[b], bed.center()) <= 0.7 {
                    pts += 1.0;
                }
                if facts.was_held[b] {
                    pts += 1.0;
                }
                // Everything tidy: all bedding on the bed footprint.
                let all_on = pillows
                    .iter()
                    .chain(std::iter::once(&b))
                    .all(|&i| dist(facts.final_pos[i], bed.center()) <= 1.6);
                if all_on && pts >= 3.0 {
                    pts += 1.0;
                }
            }
            (pts, max)
        }
        Task::Fetch { category, recep } => {
            // Touch the commanded object (1) and contain it (2).
            let mut pts = 0.0;
            let max = 3.0;
            if let Some(i) = (0..n).find(|&i| facts.categories[i] == *category) {
                if facts.was_held[i] {
                    pts += 1.0;
                }
                if facts.containers[i] == Some(*recep) {
                    pts += 2.0;
                }
            }
            (pts, max)
        }
    }
}

/// Did the agent's FIRST grasp match the commanded category?
pub fn followed_instruction(facts: &RubricFacts, task: &Task) -> bool {
    match task {
        Task::Fetch { category, .. } => facts.first_held_category == Some(*category),
        _ => false,
    }
}

/// Did the commanded object end up in the commanded receptacle?
pub fn fetch_succeeded(facts: &RubricFacts, task: &Task) -> bool {
    match task {
        Task::Fetch { category, recep } => facts
            .categories
            .iter()
            .position(|c| c == category)
            .map_or(false, |i| facts.containers[i] == Some(*recep)),
        _ => false,
    }
}
