//! Deterministic synthetic environment.
//!
//! Objects sit along a straight corridor (or around a fixed viewpoint in
//! pure-rotation mode). A pinhole camera turns them into segment records
//! with noisy appearance descriptors and ground-truth labels, so every other
//! module can be exercised end to end without real images.
//!
//! Frame conventions: `x` runs along the corridor, `y` points to the right
//! of the corridor axis, and yaw is measured from `+x` towards `+y`, so a
//! positive yaw rate turns the camera right. The camera looks along the
//! heading; image columns grow to the right.

mod eval;
mod trial;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::control::{ControlCommand, Observation};
use crate::error::{HopmapError, Result};
use crate::ingest::{FrameMeta, FrameSet, SegmentRecord};
use crate::vector::normalized;

pub use eval::{
    assign_instances_by_iou, bbox_iou, eval_association, AssociationScores, LabeledBox,
    DEFAULT_MIN_IOU,
};
pub use trial::{
    benchmark_pairs, run_navigation_trial, trial_results_csv, ControlMode, TrialPair, TrialResult,
};

/// Noise streams, so map and query traverses and trials never share draws.
pub const MAPPING_STREAM: u64 = 0;
pub const QUERY_STREAM: u64 = 1;
pub const TRIAL_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldMode {
    Corridor,
    PureRotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub hfov_deg: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            width: 640,
            height: 480,
            hfov_deg: 90.0,
        }
    }
}

impl Camera {
    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        f64::from(self.width) / 2.0 / (self.hfov_deg.to_radians() / 2.0).tan()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    pub n_objects: usize,
    /// Length of the traversed part of the corridor, metres.
    pub corridor_length: f64,
    pub n_frames: usize,
    pub descriptor_dim: usize,
    /// Per-component Gaussian noise added before renormalization.
    pub noise_sigma: f64,
    /// Objects that copy another object's descriptor exactly.
    pub n_aliases: usize,
    pub camera: Camera,
    pub mode: WorldMode,
    /// Objects farther than this are not observed, metres.
    pub max_range: f64,
    pub n_categories: usize,
    pub semantic_dim: usize,
    /// Along-track offset of the query traverse from the mapping traverse,
    /// metres (radians of yaw in pure-rotation mode).
    pub query_offset: f64,
    /// Corridor mode keeps the heading within this many degrees of the
    /// corridor axis.
    pub max_yaw_deg: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 42,
            n_objects: 20,
            corridor_length: 29.0,
            n_frames: 30,
            descriptor_dim: 64,
            noise_sigma: 0.05,
            n_aliases: 0,
            camera: Camera::default(),
            mode: WorldMode::Corridor,
            max_range: 6.0,
            n_categories: 6,
            semantic_dim: 32,
            query_offset: 0.3,
            max_yaw_deg: 45.0,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HopmapError::Config(m.to_string()));
        if self.n_objects < 2 {
            return fail("n_objects must be at least 2");
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return fail("noise_sigma must be non-negative");
        }
        if self.n_aliases >= self.n_objects {
            return fail("n_aliases must be smaller than n_objects");
        }
        if self.n_frames < 2 || self.descriptor_dim == 0 || self.n_categories == 0 {
            return fail("n_frames >= 2, descriptor_dim >= 1 and n_categories >= 1 required");
        }
        if !(self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 180.0) {
            return fail("camera hfov must be in (0, 180) degrees");
        }
        if !(self.max_yaw_deg > 0.0 && self.max_yaw_deg <= 180.0) {
            return fail("max_yaw_deg must be in (0, 180]");
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return fail("camera dimensions must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: usize,
    pub category: usize,
    pub x: f64,
    pub y: f64,
    /// Height relative to the camera, metres (positive is up).
    pub z: f64,
    /// Frontal area, square metres.
    pub size: f64,
    pub descriptor: Vec<f64>,
    pub semantic: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub objects: Vec<WorldObject>,
    /// One unit text embedding per category.
    pub category_bank: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    /// Position along the corridor, metres. Unused in pure-rotation mode.
    pub x: f64,
    /// Heading in (-pi, pi].
    pub yaw: f64,
}

impl AgentPose {
    pub fn new(x: f64, yaw: f64) -> Self {
        AgentPose {
            x,
            yaw: wrap_angle(yaw),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Mixes seed, stream, tick and object into one RNG seed (splitmix64).
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    normalized(
        (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
}

/// Uniform draws for one object's placement, in the order they are consumed:
/// along-track jitter, side, lateral distance, height, size.
pub const PLACEMENT_DRAWS: usize = 5;

/// Generates the world. Placement for object `k` with draws `u0..u4` from a
/// ChaCha8 stream seeded with `spec.seed`:
///
/// * corridor: slot `s = (corridor_length + max_range) / n`,
///   `x = (k + 0.5 + 0.6 (u0 - 0.5)) s`, `y = ±(1 + u2)` with the sign `-`
///   when `u1 < 0.5`;
/// * pure rotation: bearing `2 pi (k + 0.5 + 0.6 (u0 - 0.5)) / n`, range
///   `2 + 2 u2`, `u1` unused;
/// * both: `z = u3 - 0.5`, `size = 0.2 + 0.4 u4`.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let n = spec.n_objects;
    let mut place = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut looks = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, 0xA11A5]));

    let category_bank: Vec<Vec<f64>> = (0..spec.n_categories)
        .map(|_| gaussian_unit(&mut looks, spec.semantic_dim))
        .collect();

    let mut objects = Vec::with_capacity(n);
    for k in 0..n {
        let u: [f64; PLACEMENT_DRAWS] = std::array::from_fn(|_| place.gen::<f64>());
        let jitter = k as f64 + 0.5 + 0.6 * (u[0] - 0.5);
        let (x, y) = match spec.mode {
            WorldMode::Corridor => {
                let slot = (spec.corridor_length + spec.max_range) / n as f64;
                let side = if u[1] < 0.5 { -1.0 } else { 1.0 };
                (jitter * slot, side * (1.0 + u[2]))
            }
            WorldMode::PureRotation => {
                let bearing = 2.0 * PI * jitter / n as f64;
                let r = 2.0 + 2.0 * u[2];
                (r * bearing.cos(), r * bearing.sin())
            }
        };
        let category = k % spec.n_categories;
        let descriptor = gaussian_unit(&mut looks, spec.descriptor_dim);
        let instance: Vec<f64> = gaussian_unit(&mut looks, spec.semantic_dim);
        let semantic = normalized(
            category_bank[category]
                .iter()
                .zip(&instance)
                .map(|(c, i)| c + 0.35 * i)
                .collect(),
        );
        objects.push(WorldObject {
            id: k,
            category,
            x,
            y,
            z: u[3] - 0.5,
            size: 0.2 + 0.4 * u[4],
            descriptor,
            semantic,
        });
    }
    // The last objects become look-alikes of the first ones.
    for j in 0..spec.n_aliases {
        let (src, dst) = (j, n - 1 - j);
        objects[dst].descriptor = objects[src].descriptor.clone();
        objects[dst].category = objects[src].category;
    }
    Ok(World {
        spec: spec.clone(),
        objects,
        category_bank,
    })
}

impl World {
    pub fn frame_meta(&self, frame_id: usize) -> FrameMeta {
        FrameMeta::new(frame_id, self.spec.camera.width, self.spec.camera.height)
    }

    /// Agent position in world coordinates.
    pub fn position(&self, pose: &AgentPose) -> (f64, f64) {
        match self.spec.mode {
            WorldMode::Corridor => (pose.x, 0.0),
            WorldMode::PureRotation => (0.0, 0.0),
        }
    }

    /// Pose of mapping frame `t` (the query traverse adds `query_offset`).
    pub fn traverse_pose(&self, t: usize, offset: f64) -> AgentPose {
        let n = self.spec.n_frames;
        match self.spec.mode {
            WorldMode::Corridor => {
                let step = self.spec.corridor_length / (n - 1) as f64;
                AgentPose::new(t as f64 * step + offset, 0.0)
            }
            WorldMode::PureRotation => AgentPose::new(0.0, 2.0 * PI * t as f64 / n as f64 + offset),
        }
    }

    pub fn corridor_limit(&self) -> f64 {
        self.spec.corridor_length
    }

    /// Segments seen from `pose`. `stream` and `tick` select the noise draw.
    pub fn observe_stream(&self, pose: &AgentPose, stream: u64, tick: usize) -> Observation {
        let cam = &self.spec.camera;
        let f = cam.focal_px();
        let (w, h) = (f64::from(cam.width), f64::from(cam.height));
        let half_tan = (cam.hfov_deg.to_radians() / 2.0).tan();
        let (ax, ay) = self.position(pose);
        let (sin_y, cos_y) = pose.yaw.sin_cos();

        let mut segments = Vec::new();
        for o in &self.objects {
            let (dx, dy) = (o.x - ax, o.y - ay);
            let forward = dx * cos_y + dy * sin_y;
            let lateral = -dx * sin_y + dy * cos_y;
            let dist = dx.hypot(dy);
            if forward <= 0.0 || dist > self.spec.max_range || dist < 0.2 {
                continue;
            }
            if lateral.abs() > half_tan * forward {
                continue;
            }
            let cx = (w / 2.0 + f * lateral / forward).clamp(0.0, w);
            let cy = (h / 2.0 - f * o.z / forward).clamp(0.0, h);
            let area = (o.size * f * f / (dist * dist)).min(w * h);
            let side = area.sqrt();
            let bbox = [
                (cx - side / 2.0).max(0.0),
                (cy - side / 2.0).max(0.0),
                (cx + side / 2.0).min(w),
                (cy + side / 2.0).min(h),
            ];
            let descriptor = if self.spec.noise_sigma == 0.0 {
                o.descriptor.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                    self.spec.seed,
                    stream,
                    tick as u64,
                    o.id as u64,
                ]));
                normalized(
                    o.descriptor
                        .iter()
                        .map(|d| d + self.spec.noise_sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            };
            segments.push(SegmentRecord {
                frame_id: tick,
                segment_id: o.id,
                centroid_x: cx,
                centroid_y: cy,
                area_px: area,
                bbox,
                descriptor,
                semantic_vector: Some(o.semantic.clone()),
                gt_instance: Some(o.id as i64),
                gt_category: Some(o.category as i64),
            });
        }
        Observation {
            meta: self.frame_meta(tick),
            segments,
        }
    }

    /// Traverse of `n_frames` poses rendered on one noise stream.
    pub fn traverse(&self, offset: f64, stream: u64) -> Result<FrameSet> {
        let n = self.spec.n_frames;
        let mut frames = Vec::with_capacity(n);
        let mut records = Vec::new();
        for t in 0..n {
            let obs = self.observe_stream(&self.traverse_pose(t, offset), stream, t);
            let mut meta = obs.meta;
            meta.timestamp = Some(t as f64);
            meta.gt_map_frame = Some(t);
            frames.push(meta);
            records.extend(obs.segments);
        }
        let mut fs = FrameSet::new(frames, records, self.spec.mode == WorldMode::PureRotation)?;
        fs.descriptor_dim = self.spec.descriptor_dim;
        Ok(fs)
    }

    /// The traverse a map is built from.
    pub fn mapping_traverse(&self) -> Result<FrameSet> {
        self.traverse(0.0, MAPPING_STREAM)
    }

    /// A revisit offset by `query_offset` with fresh noise; each frame's
    /// ground-truth map frame is its own index.
    pub fn query_traverse(&self) -> Result<FrameSet> {
        self.traverse(self.spec.query_offset, QUERY_STREAM)
    }
}

/// Observation at `pose` on the mapping noise stream, tick 0.
pub fn observe(world: &World, pose: &AgentPose) -> Observation {
    world.observe_stream(pose, MAPPING_STREAM, 0)
}

/// Advances the agent one control period: translate along the current
/// heading's corridor component when `cmd.forward`, then turn by
/// `cmd.yaw_rate * dt`. In corridor mode the position is clamped to the
/// corridor and the heading to `max_yaw_deg` either side of its axis.
pub fn step_agent(
    world: &World,
    pose: &AgentPose,
    cmd: &ControlCommand,
    v_forward: f64,
    dt: f64,
) -> AgentPose {
    let mut x = pose.x;
    if cmd.forward && world.spec.mode == WorldMode::Corridor {
        x = (x + v_forward * dt * pose.yaw.cos()).clamp(0.0, world.corridor_limit());
    }
    let mut yaw = if cmd.yaw_rate == 0.0 {
        pose.yaw
    } else {
        wrap_angle(pose.yaw + cmd.yaw_rate * dt)
    };
    if world.spec.mode == WorldMode::Corridor {
        let limit = world.spec.max_yaw_deg.to_radians();
        yaw = yaw.clamp(-limit, limit);
    }
    AgentPose { x, yaw }
}
