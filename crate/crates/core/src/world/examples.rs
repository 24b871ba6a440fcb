//! Training-example extraction: subtask-prediction views of episodes and
//! synthetic web-style image/question/answer data.

use rand::seq::SliceRandom;
use rand::Rng;

use super::expert::Episode;
use super::palette::{category_name, color_name, in_distribution_categories, ood_categories};
use super::render::{point_box_bins, render_overview, Image};
use super::scene::{cell_center, dist, generate_scene, Embodiment, ReceptacleKind};
use super::sim::SimState;
use crate::seeding;

/// One subtask-prediction example: given the observation and the overall
/// prompt, predict the current subtask (and optionally its location box).
#[derive(Debug, Clone)]
pub struct HlExample {
    pub step: usize,
    pub prompt: String,
    pub subtask: String,
    pub box_bins: Option<[u8; 4]>,
}

/// Subtask-prediction examples at every chunk boundary (the states where the
/// policy replans online).
pub fn hl_examples(ep: &Episode) -> Vec<HlExample> {
    let stride = ep.scene.embodiment.exec_horizon();
    let mut out = Vec::new();
    let mut t = 0;
    while t < ep.steps.len() {
        let s = &ep.steps[t];
        out.push(HlExample {
            step: t,
            prompt: ep.prompt.clone(),
            subtask: s.subtask.clone(),
            box_bins: s.subtask_box,
        });
        t += stride;
    }
    out
}

#[derive(Debug, Clone)]
pub struct WebExample {
    pub image: Image,
    pub question: String,
    pub answer: String,
    pub box_bins: Option<[u8; 4]>,
    pub env_id: u64,
}

/// Synthetic web-style data: rendered still scenes with color, localization
/// and spatial-relation question/answer pairs. Object categories mix the
/// in-distribution table with the web-only categories that never appear in
/// any robot episode, so this is the only source that names those.
pub fn make_web_examples(seed: u64, count: usize, envs: &[u64]) -> Vec<WebExample> {
    assert!(!envs.is_empty(), "web examples need at least one environment");
    let mut rng = seeding::rng(seed, &[0x3eb]);
    let id_pool = in_distribution_categories();
    let ood_pool = ood_categories();
    let mut out = Vec::new();
    let mut scene_idx = 0u64;
    while out.len() < count {
        let env = envs[rng.gen_range(0..envs.len())];
        let mut scene = generate_scene(
            seeding::child_seed(seed, &[0x3eb5, scene_idx]),
            env,
            Embodiment::Mobile,
        );
        scene_idx += 1;
        // Repurpose the household object slots: two in-distribution and two
        // web-only categories at existing (valid, separated) positions.
        let mut positions: Vec<(f64, f64)> = scene.objects.iter().map(|o| o.pos).collect();
        positions.shuffle(&mut rng);
        let mut cats: Vec<usize> = Vec::new();
        let mut id_c = id_pool.clone();
        let mut ood_c = ood_pool.clone();
        id_c.shuffle(&mut rng);
        ood_c.shuffle(&mut rng);
        cats.extend_from_slice(&id_c[..2]);
        cats.extend_from_slice(&ood_c[..2]);
        cats.shuffle(&mut rng);
        scene.objects = cats
            .iter()
            .zip(&positions)
            .map(|(&category, &pos)| super::scene::SceneObject { category, pos })
            .collect();
        let state = SimState::new(&scene);
        let image = render_overview(&scene, &state);

        // Three question templates per scene, each about a different object.
        let mut order: Vec<usize> = (0..scene.objects.len()).collect();
        order.shuffle(&mut rng);
        for (ti, &oi) in order.iter().take(3).enumerate() {
            if out.len() >= count {
                break;
            }
            let obj = scene.objects[oi];
            let cat = category_name(obj.category);
            let color = color_name(obj.category);
            let (question, answer, box_bins) = match ti {
                0 => (
                    format!("what color is the {cat}"),
                    color.to_string(),
                    None,
                ),
                1 => (
                    format!("where is the {cat}"),
                    format!("the {color} {cat}"),
                    Some(point_box_bins(obj.pos, scene.w)),
                ),
                _ => {
                    let recep = [
                        ReceptacleKind::Sink,
                        ReceptacleKind::Drawer,
                        ReceptacleKind::Basket,
                        ReceptacleKind::Bed,
                    ][rng.gen_range(0..4)];
                    let rc = scene.receptacle_center(recep).unwrap_or_else(|| {
                        cell_center(scene.sink.expect("mobile layout has a sink"))
                    });
                    let near = scene
                        .objects
                        .iter()
                        .min_by(|a, b| {
                            dist(a.pos, rc).partial_cmp(&dist(b.pos, rc)).unwrap()
                        })
                        .unwrap();
                    (
                        format!("what is near the {}", recep.word()),
                        format!(
                            "the {} {}",
                            color_name(near.category),
                            category_name(near.category)
                        ),
                        Some(point_box_bins(near.pos, scene.w)),
                    )
                }
            };
            out.push(WebExample {
                image: image.clone(),
                question,
                answer,
                box_bins,
                env_id: env,
            });
        }
    }
    out
}
