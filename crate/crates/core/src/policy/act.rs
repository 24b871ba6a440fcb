//! The chunked hierarchical control loop.
//!
//! Each cycle refreshes the subtask text at the configured period (default
//! once per executed chunk, so the high level runs at a lower frequency
//! than control), integrates one normalized action chunk conditioned only
//! on that text, maps it back to the embodiment's native action space
//! (unpad, then denormalize), and executes the leading `exec_horizon` steps
//! open-loop before re-observing.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{unpad_actions, ActionChunk};
use crate::model::forward::TwoExpertModel;
use crate::policy::integrate::integrate_flow;
use crate::policy::strategy::HlProvider;
use crate::seeding::child_seed;
use crate::text::TextVocab;
use crate::trainer::mixture::CodecArtifacts;
use crate::world::expert::{max_episode_steps, EpStep, Episode, Task};
use crate::world::render::{observe, Image};
use crate::world::rubric::{score, RubricFacts};
use crate::world::scene::Scene;
use crate::world::sim::SimState;
use crate::{Error, Result};

/// Rollout-facing policy configuration and mutable loop state.
#[derive(Debug, Clone)]
pub struct PolicyState {
    /// Overall task prompt ℓ.
    pub prompt: String,
    /// Control steps between subtask refreshes; `None` = once per chunk.
    pub refresh_period: Option<usize>,
    /// Cap on generated subtask tokens.
    pub max_subtask_tokens: usize,
    /// Denoising steps for each chunk.
    pub denoise_steps: usize,
    /// Episode step cap; `None` = the embodiment default.
    pub step_limit: Option<usize>,
    /// Camera indices the low level may see; others are blanked. The high
    /// level always sees every camera.
    pub ll_cameras: Option<Vec<usize>>,
    pub seed: u64,
}

impl PolicyState {
    pub fn new(prompt: &str, seed: u64) -> Self {
        PolicyState {
            prompt: prompt.to_string(),
            refresh_period: None,
            max_subtask_tokens: 16,
            denoise_steps: 10,
            step_limit: None,
            ll_cameras: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActStats {
    /// High-level refreshes performed.
    pub refreshes: usize,
    /// Chunks integrated.
    pub chunks: usize,
    /// True when the simulator rejected an action and the episode was cut.
    pub aborted: bool,
}

/// Blank every camera not in the allow-list, keeping sequence geometry.
fn restrict_cameras(images: &[Image], allow: &Option<Vec<usize>>) -> Vec<Image> {
    let Some(allow) = allow else {
        return images.to_vec();
    };
    images
        .iter()
        .enumerate()
        .map(|(i, im)| {
            if allow.contains(&i) {
                im.clone()
            } else {
                Image::filled(im.h, im.w, [0.0; 3])
            }
        })
        .collect()
}

/// Roll one episode of the trained policy on a live scene.
pub fn act_loop(
    model: &TwoExpertModel,
    vocab: &TextVocab,
    artifacts: &CodecArtifacts,
    scene: &Scene,
    task: &Task,
    provider: &HlProvider,
    st: &PolicyState,
) -> Result<(Episode, ActStats)> {
    let emb = scene.embodiment;
    let d = emb.action_dim();
    if d > model.config.d_max {
        return Err(Error::DimMismatch {
            context: "native action dims",
            expected: model.config.d_max,
            got: d,
        });
    }
    let norm = artifacts.norms.get(emb.name()).ok_or_else(|| {
        Error::InvalidConfig(format!("no normalizer for embodiment {}", emb.name()))
    })?;
    let exec = emb.exec_horizon().min(model.config.horizon);
    let refresh = st.refresh_period.unwrap_or(exec);
    if refresh == 0 {
        return Err(Error::InvalidConfig("refresh period must be at least 1".into()));
    }
    let limit = st.step_limit.unwrap_or_else(|| max_episode_steps(emb));

    let mut sim = SimState::new(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(st.seed, &[0x9c7]));
    let mut steps: Vec<EpStep> = Vec::new();
    let mut stats = ActStats::default();
    let mut subtask = String::new();
    // Force a refresh before the first chunk.
    let mut since_refresh = refresh;
    let mut executed = 0usize;
    let mut done = false;

    'episode: while executed < limit && !done {
        if since_refresh >= refresh {
            subtask = provider.provide(vocab, scene, &sim, task, &st.prompt, &mut rng)?;
            stats.refreshes += 1;
            since_refresh = 0;
        }
        let obs = observe(scene, &sim);
        let ll_images = restrict_cameras(&obs.images, &st.ll_cameras);
        let x = integrate_flow(
            model,
            vocab,
            &ll_images,
            &subtask,
            emb.control_mode(),
            &obs.proprio,
            st.denoise_steps,
            &mut rng,
        )?;
        stats.chunks += 1;
        let padded = ActionChunk {
            values: x.data,
            horizon: model.config.horizon,
            dim: model.config.d_max,
            is_normalized: true,
            control_mode: emb.control_mode().to_string(),
            padded_from: Some(d),
        };
        let chunk = norm.denormalize(&unpad_actions(&padded))?;

        for t in 0..exec {
            if executed >= limit || done {
                break;
            }
            let step_obs = observe(scene, &sim);
            let action: Vec<f64> = (0..d).map(|j| chunk.get(t, j)).collect();
            if sim.step(scene, &action).is_err() {
                stats.aborted = true;
                break 'episode;
            }
            steps.push(EpStep {
                obs: step_obs,
                subtask: subtask.clone(),
                subtask_box: None,
                action,
            });
            executed += 1;
            since_refresh += 1;
            let facts = RubricFacts::from_state(scene, &sim);
            let (pts, max) = score(scene, &facts, task);
            if max > 0.0 && pts / max >= 1.0 - 1e-9 {
                done = true;
            }
        }
    }

    let facts = RubricFacts::from_state(scene, &sim);
    let (pts, max) = score(scene, &facts, task);
    let frac = if max > 0.0 { pts / max } else { 0.0 };
    let ep = Episode {
        scene: scene.clone(),
        task: task.clone(),
        prompt: st.prompt.clone(),
        steps,
        facts,
        score: frac,
        success: !stats.aborted && frac >= 1.0 - 1e-9,
    };
    Ok((ep, stats))
}

/// Append-free JSON-lines episode log, one serialized episode per line.
pub fn write_episodes_jsonl(path: &Path, episodes: &[Episode]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for ep in episodes {
        let line = serde_json::to_string(ep)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}
