//! Dataset records, JSONL serialization, the manifest, and the generation
//! driver that assembles all heterogeneous data sources:
//!
//! - `MM`: mobile household episodes (actions + subtask labels)
//! - `ME`: stationary-arm tabletop episodes in the same environments
//! - `CE`: single-task lab pick-and-place episodes (separate embodiment)
//! - `HL`: subtask-prediction views of the episode sources
//! - `WD`: web-style image/question/answer data
//! - `VI`: instruction-following views of perturbed expert rollouts
//!
//! Action records store the full native chunk starting at a chunk boundary;
//! boundaries whose chunk would run past the episode end are skipped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::expert::{expert_rollout, Episode, Task};
use super::render::{Image, Observation};
use super::scene::{generate_lab_scene, generate_scene, Embodiment, ReceptacleKind};
use crate::seeding;
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;

/// Image payload: little-endian f32 RGB rows, base64-encoded.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ImageB64 {
    pub h: usize,
    pub w: usize,
    pub data_b64: String,
}

impl ImageB64 {
    pub fn from_image(img: &Image) -> Self {
        let mut bytes = Vec::with_capacity(img.data.len() * 4);
        for v in &img.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        ImageB64 {
            h: img.h,
            w: img.w,
            data_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    pub fn to_image(&self) -> Result<Image> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.data_b64)
            .map_err(|e| Error::Other(format!("image base64: {e}")))?;
        if bytes.len() != self.h * self.w * 3 * 4 {
            return Err(Error::DimMismatch {
                context: "image payload bytes",
                expected: self.h * self.w * 12,
                got: bytes.len(),
            });
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image payload"));
        }
        Ok(Image {
            h: self.h,
            w: self.w,
            data,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    /// Source category: MM, ME, CE, HL, WD, or VI.
    pub category: String,
    pub embodiment: String,
    pub env_id: u64,
    pub task: String,
    /// Overall task prompt (or the question for WD records).
    pub prompt: String,
    /// Current subtask label (or the answer for WD records).
    pub subtask: String,
    pub images: Vec<ImageB64>,
    pub proprio: Vec<f64>,
    /// Native action chunk, row-major `horizon x native_dim`; empty when the
    /// record carries no action supervision.
    pub actions: Vec<Vec<f64>>,
    /// Location boxes `[ymin, xmin, ymax, xmax]` in overview-camera bins.
    pub boxes: Vec<[u8; 4]>,
    pub control_mode: String,
    pub success: bool,
    pub ep_len: usize,
}

impl Record {
    pub fn has_actions(&self) -> bool {
        !self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Household environment ids used for MM/ME episodes.
    pub envs: Vec<u64>,
    /// Expert episodes per (environment, task) for the mobile robot.
    pub mm_seeds_per_task: usize,
    /// Expert episodes per (environment, task) for the tabletop arm.
    pub me_seeds_per_task: usize,
    /// Lab pick-and-place episodes.
    pub lab_count: usize,
    /// Web-style examples.
    pub web_count: usize,
    /// Perturbed rollouts for instruction-following data.
    pub vi_rollouts: usize,
    pub vi_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            envs: (0..16).collect(),
            mm_seeds_per_task: 2,
            me_seeds_per_task: 2,
            lab_count: 96,
            web_count: 900,
            vi_rollouts: 24,
            vi_noise: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// Sorted unique environment ids appearing in any record.
    pub env_ids: Vec<u64>,
    pub counts: BTreeMap<String, usize>,
    pub config: GenConfig,
}

fn obs_images(obs: &Observation) -> Vec<ImageB64> {
    obs.images.iter().map(ImageB64::from_image).collect()
}

/// Emit the action records (category `cat`) and subtask-prediction records
/// (category HL) of one episode at chunk-boundary strides.
fn episode_records(ep: &Episode, cat: &str, with_hl: bool, out: &mut Vec<Record>) {
    let emb = ep.scene.embodiment;
    let stride = emb.exec_horizon();
    let horizon = 8usize; // model chunk length; longer than any exec stride
    let len = ep.steps.len();
    let mut t = 0;
    while t < len {
        let step = &ep.steps[t];
        let base = Record {
            category: cat.to_string(),
            embodiment: emb.name().to_string(),
            env_id: ep.scene.env_id,
            task: ep.task.name(),
            prompt: ep.prompt.clone(),
            subtask: step.subtask.clone(),
            images: obs_images(&step.obs),
            proprio: step.obs.proprio.clone(),
            actions: Vec::new(),
            boxes: step.subtask_box.into_iter().collect(),
            control_mode: emb.control_mode().to_string(),
            success: ep.success,
            ep_len: len,
        };
        if t + horizon <= len {
            let mut rec = base.clone();
            rec.boxes = Vec::new();
            rec.actions = (t..t + horizon).map(|i| ep.steps[i].action.clone()).collect();
            out.push(rec);
        }
        if with_hl {
            let mut hl = base;
            hl.category = "HL".to_string();
            out.push(hl);
        }
        t += stride;
    }
}

/// Generate the full heterogeneous dataset.
pub fn generate_dataset(cfg: &GenConfig) -> Result<(Vec<Record>, Manifest)> {
    if cfg.envs.is_empty() {
        return Err(Error::EmptyInput("GenConfig.envs"));
    }
    let mut records: Vec<Record> = Vec::new();

    // MM: mobile household episodes across all four tasks.
    for (ei, &env) in cfg.envs.iter().enumerate() {
        for k in 0..cfg.mm_seeds_per_task {
            let seed = seeding::child_seed(cfg.seed, &[1, env, k as u64]);
            let scene = generate_scene(seed, env, Embodiment::Mobile);
            for task in Task::available(&scene) {
                let ep = expert_rollout(&scene, &task, None)?;
                episode_records(&ep, "MM", true, &mut records);
            }
        }
        let _ = ei;
    }

    // ME: tabletop arm in the same environments (sink + drawer tasks).
    for &env in &cfg.envs {
        for k in 0..cfg.me_seeds_per_task {
            let seed = seeding::child_seed(cfg.seed, &[2, env, k as u64]);
            let scene = generate_scene(seed, env, Embodiment::FixedA);
            for task in Task::available(&scene) {
                let ep = expert_rollout(&scene, &task, None)?;
                episode_records(&ep, "ME", true, &mut records);
            }
        }
    }

    // CE: lab pick-and-place with the third embodiment. Lab scenes cycle
    // through the full in-distribution category table.
    for i in 0..cfg.lab_count {
        let seed = seeding::child_seed(cfg.seed, &[3, i as u64]);
        let scene = generate_lab_scene(seed);
        let target = scene.objects[0].category;
        let recep = [
            ReceptacleKind::Sink,
            ReceptacleKind::Drawer,
            ReceptacleKind::Basket,
        ]
        .into_iter()
        .find(|&k| scene.receptacle_center(k).is_some())
        .ok_or(Error::SceneUnsupported {
            task: "lab".into(),
            reason: "no receptacle".to_string(),
        })?;
        let task = Task::Fetch {
            category: target,
            recep,
        };
        let ep = expert_rollout(&scene, &task, None)?;
        episode_records(&ep, "CE", true, &mut records);
    }

    // WD: web-style stills (single camera, no proprio, no actions).
    let web = super::examples::make_web_examples(
        seeding::child_seed(cfg.seed, &[4]),
        cfg.web_count,
        &cfg.envs,
    );
    for e in web {
        records.push(Record {
            category: "WD".to_string(),
            embodiment: "web".to_string(),
            env_id: e.env_id,
            task: "web".to_string(),
            prompt: e.question,
            subtask: e.answer,
            images: vec![ImageB64::from_image(&e.image)],
            proprio: Vec::new(),
            actions: Vec::new(),
            boxes: e.box_bins.into_iter().collect(),
            control_mode: "none".to_string(),
            success: true,
            ep_len: 0,
        });
    }

    // VI: perturbed expert rollouts; only the subtask labels are kept, so
    // the data teaches which instruction applies in off-nominal states.
    for i in 0..cfg.vi_rollouts {
        let env = cfg.envs[i % cfg.envs.len()];
        let seed = seeding::child_seed(cfg.seed, &[5, i as u64]);
        let scene = generate_scene(seed, env, Embodiment::Mobile);
        let tasks = Task::available(&scene);
        let task = tasks[i % tasks.len()].clone();
        let mut rng = seeding::rng(seed, &[0x41]);
        let ep = expert_rollout(&scene, &task, Some((&mut rng, cfg.vi_noise)))?;
        let before = records.len();
        episode_records(&ep, "VI", false, &mut records);
        for r in &mut records[before..] {
            r.category = "VI".to_string();
            r.actions = Vec::new();
        }
    }

    let mut env_ids: Vec<u64> = records.iter().map(|r| r.env_id).collect();
    env_ids.sort_unstable();
    env_ids.dedup();
    let mut counts = BTreeMap::new();
    for r in &records {
        *counts.entry(r.category.clone()).or_insert(0) += 1;
    }
    let manifest = Manifest {
        version: DATASET_VERSION,
        seed: cfg.seed,
        env_ids,
        counts,
        config: cfg.clone(),
    };
    Ok((records, manifest))
}

/// Verify that no record references any of the given held-out environments.
pub fn check_env_isolation(records: &[Record], held_out: &[u64]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if held_out.contains(&r.env_id) {
            return Err(Error::Other(format!(
                "record {i} ({}) references held-out environment {}",
                r.category, r.env_id
            )));
        }
    }
    Ok(())
}

pub fn write_jsonl(path: &Path, records: &[Record]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Record>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let s = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let s = std::fs::read_to_string(path)?;
    let m: Manifest = serde_json::from_str(&s)?;
    if m.version != DATASET_VERSION {
        return Err(Error::Other(format!(
            "manifest version {} != {}",
            m.version, DATASET_VERSION
        )));
    }
    Ok(m)
}
