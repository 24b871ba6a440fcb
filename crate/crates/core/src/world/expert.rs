//! Scripted expert: a stateless replanner that maps the current simulator
//! state to the next language subtask, plus proportional controllers that
//! execute each subtask. Because both are pure functions of state, the
//! expert recovers from perturbations, which makes noisy rollouts usable as
//! instruction-conditioned recovery data.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::palette::{category_name, group_of, Group, BLANKET, PILLOW};
use super::render::{observe, point_box_bins, Observation};
use super::rubric::{score, RubricFacts};
use super::scene::{dist, Embodiment, ReceptacleKind, Scene};
use super::sim::{
    SimState, DRAWER_OPEN_THRESH, GRAB_RADIUS, HANDLE_RADIUS, MAX_ARM_SPEED, MAX_BASE_SPEED,
};
use crate::{Error, Result};

/// Steps after which an unchanged subtask aborts the rollout.
const STALL_LIMIT: usize = 140;
const NAV_TOL: f64 = 1.05;
const DRAWER_CLOSED_THRESH: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    /// "put the dishes in the sink"
    Dishes,
    /// "put the items in the drawer" (open, fill, close)
    Items,
    /// "put the laundry in the basket"
    Laundry,
    /// "make the bed" (pillows to the head cells, blanket to the center)
    Bed,
    /// "put the <category> in the <receptacle>" (single object)
    Fetch {
        category: usize,
        recep: ReceptacleKind,
    },
}

impl Task {
    pub fn prompt(&self) -> String {
        match self {
            Task::Dishes => "put the dishes in the sink".into(),
            Task::Items => "put the items in the drawer".into(),
            Task::Laundry => "put the laundry in the basket".into(),
            Task::Bed => "make the bed".into(),
            Task::Fetch { category, recep } => {
                format!("put the {} in the {}", category_name(*category), recep.word())
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Task::Dishes => "dishes".into(),
            Task::Items => "items".into(),
            Task::Laundry => "laundry".into(),
            Task::Bed => "bed".into(),
            Task::Fetch { category, recep } => {
                format!("fetch:{}:{}", category_name(*category), recep.word())
            }
        }
    }

    pub fn parse(s: &str) -> Result<Task> {
        match s {
            "dishes" => Ok(Task::Dishes),
            "items" => Ok(Task::Items),
            "laundry" => Ok(Task::Laundry),
            "bed" => Ok(Task::Bed),
            other => {
                if let Some(rest) = other.strip_prefix("fetch:") {
                    let mut it = rest.split(':');
                    let cat_name = it.next().unwrap_or("");
                    let recep_name = it.next().unwrap_or("");
                    let category = super::palette::category_by_name(cat_name)
                        .ok_or_else(|| Error::UnknownTask(other.into()))?;
                    let recep = match recep_name {
                        "sink" => ReceptacleKind::Sink,
                        "drawer" => ReceptacleKind::Drawer,
                        "basket" => ReceptacleKind::Basket,
                        "bed" => ReceptacleKind::Bed,
                        _ => return Err(Error::UnknownTask(other.into())),
                    };
                    Ok(Task::Fetch { category, recep })
                } else {
                    Err(Error::UnknownTask(other.into()))
                }
            }
        }
    }

    /// Tasks a scene supports given its receptacles and objects.
    pub fn available(scene: &Scene) -> Vec<Task> {
        let mut tasks = Vec::new();
        let has = |g: Group| scene.objects.iter().any(|o| group_of(o.category) == g);
        if scene.sink.is_some() && has(Group::Dish) {
            tasks.push(Task::Dishes);
        }
        if scene.drawer.is_some() && has(Group::Item) {
            tasks.push(Task::Items);
        }
        if scene.basket.is_some() && has(Group::Clothing) {
            tasks.push(Task::Laundry);
        }
        if scene.bed.is_some() && has(Group::Bedding) {
            tasks.push(Task::Bed);
        }
        tasks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subtask {
    Pick { obj: usize },
    Place { recep: ReceptacleKind },
    OpenDrawer,
    CloseDrawer,
    /// Put the held object down where it is (recovery move).
    Release,
    /// Carry the held pillow to a bed head cell.
    PillowToHead { head: usize },
    /// Spread the held blanket at the bed center.
    BlanketToCenter,
}

impl Subtask {
    pub fn label(&self, scene: &Scene, state: &SimState) -> String {
        match self {
            Subtask::Pick { obj } => {
                format!("pick up the {}", category_name(scene.objects[*obj].category))
            }
            Subtask::Place { recep } => {
                let held = state
                    .holding
                    .map(|i| category_name(scene.objects[i].category))
                    .unwrap_or("item");
                format!("place the {} in the {}", held, recep.word())
            }
            Subtask::OpenDrawer => "open the drawer".into(),
            Subtask::CloseDrawer => "close the drawer".into(),
            Subtask::Release => {
                let held = state
                    .holding
                    .map(|i| category_name(scene.objects[i].category))
                    .unwrap_or("item");
                format!("put the {held} down")
            }
            Subtask::PillowToHead { .. } => "put the pillow at the head of the bed".into(),
            Subtask::BlanketToCenter => "straighten the blanket".into(),
        }
    }

    /// World point the subtask acts on (for localization supervision).
    pub fn target_point(&self, scene: &Scene, state: &SimState) -> Option<(f64, f64)> {
        match self {
            Subtask::Pick { obj } => Some(state.obj_pos[*obj]),
            Subtask::Place { recep } => scene.receptacle_center(*recep),
            Subtask::OpenDrawer | Subtask::CloseDrawer => scene.drawer_handle(),
            Subtask::Release => None,
            Subtask::PillowToHead { head } => scene.bed.as_ref().map(|b| b.head[*head]),
            Subtask::BlanketToCenter => scene.bed.as_ref().map(|b| b.center()),
        }
    }
}

fn reachable(scene: &Scene, state: &SimState, p: (f64, f64)) -> bool {
    scene.embodiment == Embodiment::Mobile || dist(state.base, p) <= scene.embodiment.reach() - 0.05
}

fn nearest_free_of_group(
    scene: &Scene,
    state: &SimState,
    group: Group,
    exclude_bedding: bool,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, obj) in scene.objects.iter().enumerate() {
        if group_of(obj.category) != group || state.obj_container[i].is_some() {
            continue;
        }
        if exclude_bedding && (obj.category == PILLOW || obj.category == BLANKET) {
            continue;
        }
        if state.holding == Some(i) || !reachable(scene, state, state.obj_pos[i]) {
            continue;
        }
        let d = dist(state.base, state.obj_pos[i]);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

fn target_recep(task: &Task) -> Option<ReceptacleKind> {
    match task {
        Task::Dishes => Some(ReceptacleKind::Sink),
        Task::Items => Some(ReceptacleKind::Drawer),
        Task::Laundry => Some(ReceptacleKind::Basket),
        Task::Bed => None,
        Task::Fetch { recep, .. } => Some(*recep),
    }
}

fn task_group(task: &Task) -> Option<Group> {
    match task {
        Task::Dishes => Some(Group::Dish),
        Task::Items => Some(Group::Item),
        Task::Laundry => Some(Group::Clothing),
        Task::Bed => Some(Group::Bedding),
        Task::Fetch { .. } => None,
    }
}

/// Bed bookkeeping: which head cells are satisfied, and which pillows are
/// already parked at a head.
fn bed_assignment(scene: &Scene, state: &SimState) -> (Vec<bool>, Vec<bool>) {
    let bed = scene.bed.as_ref().expect("bed task needs a bed");
    let pillows: Vec<usize> = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.category == PILLOW)
        .map(|(i, _)| i)
        .collect();
    let mut head_done = vec![false; bed.head.len()];
    let mut pillow_used = vec![false; scene.objects.len()];
    for (hi, &h) in bed.head.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for &p in &pillows {
            if pillow_used[p] || state.holding == Some(p) {
                continue;
            }
            let d = dist(state.obj_pos[p], h);
            if d <= 0.6 && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((p, d));
            }
        }
        if let Some((p, _)) = best {
            head_done[hi] = true;
            pillow_used[p] = true;
        }
    }
    (head_done, pillow_used)
}

/// The replanner: pure function of (scene, state, task). `None` means the
/// task is finished or nothing actionable remains.
pub fn next_subtask(scene: &Scene, state: &SimState, task: &Task) -> Option<Subtask> {
    // Holding something: either it belongs to the task, or put it down.
    if let Some(held) = state.holding {
        let cat = scene.objects[held].category;
        match task {
            Task::Bed => {
                if cat == PILLOW {
                    let (head_done, _) = bed_assignment(scene, state);
                    let hi = head_done.iter().position(|&d| !d).unwrap_or(0);
                    return Some(Subtask::PillowToHead { head: hi });
                }
                if cat == BLANKET {
                    return Some(Subtask::BlanketToCenter);
                }
                return Some(Subtask::Release);
            }
            Task::Fetch { category, recep } => {
                if cat == *category {
                    return Some(Subtask::Place { recep: *recep });
                }
                return Some(Subtask::Release);
            }
            _ => {
                let want = task_group(task).unwrap();
                if group_of(cat) == want {
                    let recep = target_recep(task).unwrap();
                    if recep == ReceptacleKind::Drawer && state.drawer_open < DRAWER_OPEN_THRESH {
                        return Some(Subtask::Release);
                    }
                    return Some(Subtask::Place { recep });
                }
                return Some(Subtask::Release);
            }
        }
    }

    match task {
        Task::Dishes | Task::Laundry => {
            let group = task_group(task).unwrap();
            let recep = target_recep(task).unwrap();
            let remaining = scene.objects.iter().enumerate().any(|(i, o)| {
                group_of(o.category) == group && state.obj_container[i] != Some(recep)
            });
            if !remaining {
                return None;
            }
            nearest_free_of_group(scene, state, group, true).map(|obj| Subtask::Pick { obj })
        }
        Task::Items => {
            let pending: Vec<usize> = scene
                .objects
                .iter()
                .enumerate()
                .filter(|(i, o)| {
                    group_of(o.category) == Group::Item && state.obj_container[*i].is_none()
                })
                .map(|(i, _)| i)
                .collect();
            let pending_reachable = pending
                .iter()
                .any(|&i| reachable(scene, state, state.obj_pos[i]));
            if pending.is_empty() || !pending_reachable {
                // Everything placeable is placed: close up if needed.
                if state.drawer_open > DRAWER_CLOSED_THRESH {
                    let closable = scene
                        .drawer_handle()
                        .map(|h| reachable(scene, state, h))
                        .unwrap_or(false);
                    return if closable { Some(Subtask::CloseDrawer) } else { None };
                }
                return None;
            }
            if state.drawer_open < DRAWER_OPEN_THRESH {
                let openable = scene
                    .drawer_handle()
                    .map(|h| reachable(scene, state, h))
                    .unwrap_or(false);
                return if openable { Some(Subtask::OpenDrawer) } else { None };
            }
            nearest_free_of_group(scene, state, Group::Item, false)
                .map(|obj| Subtask::Pick { obj })
        }
        Task::Bed => {
            let (head_done, pillow_used) = bed_assignment(scene, state);
            if let Some(_hi) = head_done.iter().position(|&d| !d) {
                let mut best: Option<(usize, f64)> = None;
                for (i, o) in scene.objects.iter().enumerate() {
                    if o.category != PILLOW || pillow_used[i] || state.obj_container[i].is_some() {
                        continue;
                    }
                    if !reachable(scene, state, state.obj_pos[i]) {
                        continue;
                    }
                    let d = dist(state.base, state.obj_pos[i]);
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
                if let Some((obj, _)) = best {
                    return Some(Subtask::Pick { obj });
                }
            }
            let bed = scene.bed.as_ref()?;
            let blanket = scene
                .objects
                .iter()
                .position(|o| o.category == BLANKET)?;
            if dist(state.obj_pos[blanket], bed.center()) > 0.7 {
                if reachable(scene, state, state.obj_pos[blanket]) {
                    return Some(Subtask::Pick { obj: blanket });
                }
            }
            None
        }
        Task::Fetch { category, recep } => {
            let obj = scene
                .objects
                .iter()
                .position(|o| o.category == *category)?;
            if state.obj_container[obj] == Some(*recep) {
                return None;
            }
            if state.obj_container[obj].is_some()
                || !reachable(scene, state, state.obj_pos[obj])
            {
                return None;
            }
            Some(Subtask::Pick { obj })
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a;
    while a >= std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    while a < -std::f64::consts::PI {
        a += 2.0 * std::f64::consts::PI;
    }
    a
}

/// Proportional controller for one subtask. Returns the full 7-dim command;
/// callers truncate to the embodiment's native dimension.
pub fn subtask_action(scene: &Scene, state: &SimState, subtask: &Subtask) -> [f64; 7] {
    let mut a = [0.0f64; 7];
    let mobile = scene.embodiment == Embodiment::Mobile;

    let drive = |a: &mut [f64; 7], target: (f64, f64)| {
        let dx = target.0 - state.base.0;
        let dy = target.1 - state.base.1;
        a[4] = (dx / MAX_BASE_SPEED).clamp(-1.0, 1.0);
        a[5] = (dy / MAX_BASE_SPEED).clamp(-1.0, 1.0);
        let want = dy.atan2(dx);
        a[6] = (wrap_angle(want - state.heading) / 0.6).clamp(-1.0, 1.0);
    };
    let arm_to = |a: &mut [f64; 7], target: (f64, f64)| {
        let tip = state.tip();
        a[0] = ((target.0 - tip.0) / MAX_ARM_SPEED).clamp(-1.0, 1.0);
        a[1] = ((target.1 - tip.1) / MAX_ARM_SPEED).clamp(-1.0, 1.0);
    };
    let retract = |a: &mut [f64; 7]| {
        a[0] = (-state.arm.0 / MAX_ARM_SPEED).clamp(-1.0, 1.0);
        a[1] = (-state.arm.1 / MAX_ARM_SPEED).clamp(-1.0, 1.0);
    };

    match subtask {
        Subtask::Pick { obj } => {
            let target = state.obj_pos[*obj];
            if mobile && dist(state.base, target) > NAV_TOL {
                drive(&mut a, target);
                retract(&mut a);
                a[2] = -1.0;
            } else {
                arm_to(&mut a, target);
                a[2] = if dist(state.tip(), target) <= GRAB_RADIUS * 0.5 {
                    1.0
                } else {
                    -1.0
                };
            }
        }
        Subtask::Place { recep } => {
            let target = scene
                .receptacle_center(*recep)
                .expect("place target receptacle missing");
            if mobile && dist(state.base, target) > NAV_TOL {
                drive(&mut a, target);
                retract(&mut a);
                a[2] = 1.0; // keep the grip closed while carrying
            } else {
                arm_to(&mut a, target);
                a[2] = if dist(state.tip(), target) <= 0.3 { -1.0 } else { 1.0 };
            }
        }
        Subtask::OpenDrawer | Subtask::CloseDrawer => {
            let handle = scene.drawer_handle().expect("drawer missing");
            let sign = if matches!(subtask, Subtask::OpenDrawer) {
                1.0
            } else {
                -1.0
            };
            if mobile && dist(state.base, handle) > NAV_TOL {
                drive(&mut a, handle);
                retract(&mut a);
            } else {
                arm_to(&mut a, handle);
                if dist(state.tip(), handle) <= HANDLE_RADIUS * 0.6 {
                    a[3] = sign;
                }
            }
            a[2] = -1.0;
        }
        Subtask::Release => {
            a[2] = -1.0;
        }
        Subtask::PillowToHead { head } => {
            let target = scene.bed.as_ref().expect("bed missing").head[*head];
            if mobile && dist(state.base, target) > NAV_TOL {
                drive(&mut a, target);
                retract(&mut a);
                a[2] = 1.0;
            } else {
                arm_to(&mut a, target);
                a[2] = if dist(state.tip(), target) <= 0.2 { -1.0 } else { 1.0 };
            }
        }
        Subtask::BlanketToCenter => {
            let target = scene.bed.as_ref().expect("bed missing").center();
            if mobile && dist(state.base, target) > NAV_TOL {
                drive(&mut a, target);
                retract(&mut a);
                a[2] = 1.0;
            } else {
                arm_to(&mut a, target);
                a[2] = if dist(state.tip(), target) <= 0.2 { -1.0 } else { 1.0 };
            }
        }
    }
    if !mobile {
        a[4] = 0.0;
        a[5] = 0.0;
        a[6] = 0.0;
    }
    a
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpStep {
    pub obs: Observation,
    pub subtask: String,
    pub subtask_box: Option<[u8; 4]>,
    /// Native-dimension command actually executed.
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub scene: Scene,
    pub task: Task,
    pub prompt: String,
    pub steps: Vec<EpStep>,
    pub facts: RubricFacts,
    pub score: f64,
    pub success: bool,
}

pub fn max_episode_steps(emb: Embodiment) -> usize {
    match emb {
        Embodiment::Mobile => 440,
        _ => 220,
    }
}

/// Roll the scripted expert on a scene. `noise` optionally perturbs every
/// command with clamped Gaussian noise, producing recovery demonstrations.
pub fn expert_rollout(
    scene: &Scene,
    task: &Task,
    noise: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<Episode> {
    let mut state = SimState::new(scene);
    let mut steps: Vec<EpStep> = Vec::new();
    let d = scene.embodiment.action_dim();
    let cap = max_episode_steps(scene.embodiment);
    let mut noise = noise;
    let mut last_label = String::new();
    let mut stall = 0usize;

    for _ in 0..cap {
        let Some(sub) = next_subtask(scene, &state, task) else {
            break;
        };
        let label = sub.label(scene, &state);
        if label == last_label {
            stall += 1;
            if stall > STALL_LIMIT {
                break;
            }
        } else {
            stall = 0;
            last_label = label.clone();
        }
        let obs = observe(scene, &state);
        let sub_box = sub
            .target_point(scene, &state)
            .map(|p| point_box_bins(p, scene.w));
        let mut cmd = subtask_action(scene, &state, &sub);
        if let Some((rng, sigma)) = noise.as_mut() {
            let n = Normal::new(0.0, *sigma).map_err(|e| Error::Other(e.to_string()))?;
            for v in cmd.iter_mut() {
                *v = (*v + n.sample(*rng)).clamp(-1.0, 1.0);
            }
        }
        let action: Vec<f64> = cmd[..d].to_vec();
        state.step(scene, &action)?;
        steps.push(EpStep {
            obs,
            subtask: label,
            subtask_box: sub_box,
            action,
        });
    }

    let facts = RubricFacts::from_state(scene, &state);
    let (pts, max) = score(scene, &facts, task);
    let frac = if max > 0.0 { pts / max } else { 0.0 };
    Ok(Episode {
        scene: scene.clone(),
        task: task.clone(),
        prompt: task.prompt(),
        steps,
        facts,
        score: frac,
        success: frac >= 1.0 - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use crate::world::scene::{generate_lab_scene, generate_scene};

    #[test]
    fn expert_completes_all_mobile_tasks() {
        for env in [0u64, 5, 11] {
            let scene = generate_scene(1000 + env, env, Embodiment::Mobile);
            for task in Task::available(&scene) {
                let ep = expert_rollout(&scene, &task, None).unwrap();
                assert!(
                    ep.success,
                    "task {:?} env {env} score {} after {} steps",
                    task,
                    ep.score,
                    ep.steps.len()
                );
                assert!(!ep.steps.is_empty());
            }
        }
    }

    #[test]
    fn expert_completes_tabletop_tasks() {
        let mut done = 0;
        let mut total = 0;
        for seed in 0..12u64 {
            let scene = generate_scene(seed, seed % 16, Embodiment::FixedA);
            for task in Task::available(&scene) {
                total += 1;
                let ep = expert_rollout(&scene, &task, None).unwrap();
                if ep.success {
                    done += 1;
                }
            }
        }
        // A small fraction of tabletop scenes place an object out of reach
        // on purpose; most episodes must still succeed.
        assert!(done * 10 >= total * 7, "{done}/{total} tabletop successes");
        assert!(done < total || total == 0 || done == total); // sanity
    }

    #[test]
    fn expert_completes_lab_scenes() {
        let mut done = 0;
        for seed in 0..20u64 {
            let scene = generate_lab_scene(seed);
            let target = scene.objects[0].category;
            let recep = [
                ReceptacleKind::Sink,
                ReceptacleKind::Drawer,
                ReceptacleKind::Basket,
            ]
            .into_iter()
            .find(|&k| scene.receptacle_center(k).is_some())
            .unwrap();
            let task = Task::Fetch {
                category: target,
                recep,
            };
            let ep = expert_rollout(&scene, &task, None).unwrap();
            if ep.success {
                done += 1;
            }
        }
        assert!(done >= 17, "{done}/20 lab successes");
    }

    #[test]
    fn noisy_expert_still_succeeds_often_and_differs() {
        let scene = generate_scene(77, 3, Embodiment::Mobile);
        let clean = expert_rollout(&scene, &Task::Dishes, None).unwrap();
        let mut rng = seeding::rng(9, &[0x7e57]);
        let noisy = expert_rollout(&scene, &Task::Dishes, Some((&mut rng, 0.25))).unwrap();
        assert_ne!(
            clean.steps.first().unwrap().action,
            noisy.steps.first().unwrap().action
        );
        let mut wins = 0;
        for s in 0..6u64 {
            let mut r = seeding::rng(s, &[0x7e58]);
            let ep = expert_rollout(&scene, &Task::Dishes, Some((&mut r, 0.25))).unwrap();
            if ep.success {
                wins += 1;
            }
        }
        assert!(wins >= 4, "noisy expert succeeded {wins}/6");
    }

    #[test]
    fn subtask_sequence_is_coherent_for_items_task() {
        let scene = generate_scene(21, 4, Embodiment::Mobile);
        let ep = expert_rollout(&scene, &Task::Items, None).unwrap();
        assert!(ep.success);
        let labels: Vec<&String> = ep.steps.iter().map(|s| &s.subtask).collect();
        // The drawer opens before anything is placed and closes at the end.
        let first_open = labels.iter().position(|l| l.as_str() == "open the drawer");
        let first_place = labels.iter().position(|l| l.starts_with("place the"));
        let last_close = labels.iter().rposition(|l| l.as_str() == "close the drawer");
        assert!(first_open.is_some() && first_place.is_some() && last_close.is_some());
        assert!(first_open.unwrap() < first_place.unwrap());
        assert!(first_place.unwrap() < last_close.unwrap());
        assert!(ep.facts.drawer_open_final <= 0.3);
    }

    #[test]
    fn rollout_is_deterministic() {
        let scene = generate_scene(5, 2, Embodiment::Mobile);
        let a = expert_rollout(&scene, &Task::Laundry, None).unwrap();
        let b = expert_rollout(&scene, &Task::Laundry, None).unwrap();
        assert_eq!(a.steps.len(), b.steps.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.action, y.action);
            assert_eq!(x.subtask, y.subtask);
        }
    }

    #[test]
    fn task_round_trips_through_name() {
        for t in [
            Task::Dishes,
            Task::Items,
            Task::Laundry,
            Task::Bed,
            Task::Fetch {
                category: 3,
                recep: ReceptacleKind::Sink,
            },
        ] {
            assert_eq!(Task::parse(&t.name()).unwrap(), t);
        }
        assert!(Task::parse("juggle").is_err());
    }

    #[test]
    fn subtask_labels_use_known_words_only() {
        let vocab = crate::text::TextVocab::new();
        let scene = generate_scene(8, 6, Embodiment::Mobile);
        for task in Task::available(&scene) {
            let ep = expert_rollout(&scene, &task, None).unwrap();
            assert!(vocab.encode(&ep.prompt).is_ok(), "prompt: {}", ep.prompt);
            for s in &ep.steps {
                assert!(vocab.encode(&s.subtask).is_ok(), "subtask: {}", s.subtask);
            }
        }
    }
}
