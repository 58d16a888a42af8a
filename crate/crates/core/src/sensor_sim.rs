//! Synthetic cameras with a known sensor pattern.
//!
//! A capture follows the multiplicative sensor model
//! `I = I0 + I0 * K + psi`, clamped to `[0, 255]`, where `I0` is the scene,
//! `K` the camera's fixed pattern and `psi` white Gaussian noise.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame_io::{self, FrameError, FrameKind, FrameSequence, LuminanceFrame, Y4mChroma};
use crate::spectral::{bin_frequency, fft2, to_complex};

/// Brightness bounds every generated scene must respect.
pub const SCENE_FLOOR: f64 = 16.0;
pub const SCENE_CEILING: f64 = 240.0;

/// Frame rate written for registration sequences: one frame per second of
/// video, so stride-based selection keeps every frame.
pub const REGISTRATION_FPS: f64 = 1.0;
pub const QUERY_FPS: f64 = 25.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid camera parameters: {0}")]
    InvalidCamera(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene is {scene_w}x{scene_h}, camera is {cam_w}x{cam_h}")]
    DimensionMismatch {
        scene_w: usize,
        scene_h: usize,
        cam_w: usize,
        cam_h: usize,
    },
    #[error("cannot write dataset to {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub camera_id: String,
    pub width: usize,
    pub height: usize,
    k: Vec<f64>,
    pub k_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SensorModel {
    /// The true sensor pattern, row-major.
    pub fn pattern(&self) -> &[f64] {
        &self.k
    }

    /// Independent noise stream for one role (e.g. `"registration"`).
    pub fn noise_stream(&self, role: &str) -> NoiseStream {
        NoiseStream(derive_rng(self.seed, &self.camera_id, role))
    }
}

/// Random state advanced by [`capture`].
#[derive(Debug, Clone)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    pub fn from_seed(seed: u64) -> NoiseStream {
        NoiseStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

fn derive_rng(seed: u64, camera_id: &str, role: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(camera_id.as_bytes());
    h.update([0u8]);
    h.update(role.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn valid_camera_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Draws a camera whose pattern is i.i.d. Gaussian with standard deviation
/// `k_strength`, re-centered to an exact zero sample mean.
pub fn make_camera(
    camera_id: &str,
    width: usize,
    height: usize,
    k_strength: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SensorModel, SimError> {
    if width == 0 || height == 0 {
        return Err(SimError::InvalidCamera(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(k_strength.is_finite() && k_strength >= 0.0) {
        return Err(SimError::InvalidCamera(format!("k_strength {k_strength}")));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(SimError::InvalidCamera(format!("noise_sigma {noise_sigma}")));
    }
    if !valid_camera_id(camera_id) {
        return Err(SimError::InvalidCamera(format!(
            "camera id `{camera_id}` must be non-empty [A-Za-z0-9._-]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k: Vec<f64> = (0..width * height)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * k_strength
        })
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    Ok(SensorModel {
        camera_id: camera_id.to_string(),
        width,
        height,
        k,
        k_strength,
        noise_sigma,
        seed,
    })
}

/// Images `scene` through the camera; samples stay real-valued.
pub fn capture(
    cam: &SensorModel,
    scene: &LuminanceFrame,
    rng: &mut NoiseStream,
) -> Result<LuminanceFrame, SimError> {
    capture_with(cam, scene, rng, false)
}

/// [`capture`] with optional rounding to whole luminance levels.
pub fn capture_with(
    cam: &SensorModel,
    scene: &LuminanceFrame,
    rng: &mut NoiseStream,
    quantize: bool,
) -> Result<LuminanceFrame, SimError> {
    if (scene.width(), scene.height()) != (cam.width, cam.height) {
        return Err(SimError::DimensionMismatch {
            scene_w: scene.width(),
            scene_h: scene.height(),
            cam_w: cam.width,
            cam_h: cam.height,
        });
    }
    let noise = (cam.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cam.noise_sigma).expect("sigma validated"));
    let samples = scene
        .samples()
        .iter()
        .zip(&cam.k)
        .map(|(&i0, &k)| {
            let psi = noise.map_or(0.0, |n| n.sample(&mut rng.0));
            let v = (i0 + i0 * k + psi).clamp(0.0, 255.0);
            if quantize {
                v.round()
            } else {
                v
            }
        })
        .collect();
    Ok(LuminanceFrame::new(cam.width, cam.height, samples)?
        .with_index(scene.frame_index)
        .with_kind(scene.kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SceneKind {
    Flat { level: f64 },
    /// Gaussian-low-passed white noise; `cutoff` is the filter's standard
    /// deviation in cycles per pixel.
    SmoothRandom { cutoff: f64, seed: u64 },
    /// Horizontal gradient from the low to the high brightness bound.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub brightness: (f64, f64),
}

impl SceneSpec {
    pub fn flat(level: f64) -> SceneSpec {
        SceneSpec {
            kind: SceneKind::Flat { level },
            brightness: (SCENE_FLOOR, SCENE_CEILING),
        }
    }

    pub fn ramp() -> SceneSpec {
        SceneSpec {
            kind: SceneKind::Ramp,
            brightness: (SCENE_FLOOR, SCENE_CEILING),
        }
    }

    pub fn smooth_random(cutoff: f64, seed: u64) -> SceneSpec {
        SceneSpec {
            kind: SceneKind::SmoothRandom { cutoff, seed },
            brightness: (SCENE_FLOOR, SCENE_CEILING),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.brightness;
        if !(SCENE_FLOOR <= lo && lo <= hi && hi <= SCENE_CEILING) {
            return Err(SimError::InvalidScene(format!(
                "brightness range [{lo}, {hi}] must lie within [{SCENE_FLOOR}, {SCENE_CEILING}]"
            )));
        }
        match self.kind {
            SceneKind::Flat { level } if !(lo..=hi).contains(&level) => Err(SimError::InvalidScene(
                format!("flat level {level} outside [{lo}, {hi}]"),
            )),
            SceneKind::SmoothRandom { cutoff, .. } if !(cutoff.is_finite() && cutoff > 0.0) => {
                Err(SimError::InvalidScene(format!("cutoff {cutoff} must be > 0")))
            }
            _ => Ok(()),
        }
    }
}

pub fn generate_scene(
    spec: &SceneSpec,
    width: usize,
    height: usize,
) -> Result<LuminanceFrame, SimError> {
    spec.validate()?;
    let (lo, hi) = spec.brightness;
    let samples = match spec.kind {
        SceneKind::Flat { level } => vec![level; width * height],
        SceneKind::Ramp => {
            let row: Vec<f64> = (0..width)
                .map(|c| {
                    if width == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * c as f64 / (width - 1) as f64
                    }
                })
                .collect();
            row.iter().copied().cycle().take(width * height).collect()
        }
        SceneKind::SmoothRandom { cutoff, seed } => smooth_field(width, height, cutoff, seed, lo, hi),
    };
    Ok(LuminanceFrame::new(width, height, samples)?)
}

fn smooth_field(width: usize, height: usize, cutoff: f64, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..width * height).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut spectrum = to_complex(&white);
    fft2(&mut spectrum, height, width, FftDirection::Forward);
    let two_var = 2.0 * cutoff * cutoff;
    for r in 0..height {
        let fy = bin_frequency(r, height);
        for c in 0..width {
            let fx = bin_frequency(c, width);
            spectrum[r * width + c] *= (-(fx * fx + fy * fy) / two_var).exp();
        }
    }
    fft2(&mut spectrum, height, width, FftDirection::Inverse);
    let field: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    let (min, max) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if max - min <= f64::EPSILON * max.abs().max(1.0) {
        return vec![0.5 * (lo + hi); width * height];
    }
    field
        .iter()
        .map(|v| (lo + (hi - lo) * (v - min) / (max - min)).clamp(lo, hi))
        .collect()
}

/// How scenes are chosen for each frame of a rendered sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SceneSchedule {
    /// The same flat field in every frame.
    Flat { level: f64 },
    Ramp,
    /// A fresh smooth random scene per frame.
    SmoothRandom { cutoff: f64 },
}

impl Default for SceneSchedule {
    fn default() -> Self {
        SceneSchedule::SmoothRandom { cutoff: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceRole {
    Registration,
    Query,
}

impl SequenceRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SequenceRole::Registration => "registration",
            SequenceRole::Query => "query",
        }
    }

    pub fn fps(self) -> f64 {
        match self {
            SequenceRole::Registration => REGISTRATION_FPS,
            SequenceRole::Query => QUERY_FPS,
        }
    }
}

/// Renders `count` frames on demand for one camera and role.
///
/// Noise and scenes come from streams derived from `(seed, camera_id, role)`,
/// so sequences are independent of each other and of render order.
pub struct SequenceRenderer<'a> {
    cam: &'a SensorModel,
    role: SequenceRole,
    schedule: SceneSchedule,
    quantize: bool,
    noise: NoiseStream,
    scenes: ChaCha8Rng,
    next: usize,
}

impl<'a> SequenceRenderer<'a> {
    pub fn new(cam: &'a SensorModel, role: SequenceRole, schedule: SceneSchedule, quantize: bool) -> Self {
        SequenceRenderer {
            cam,
            role,
            schedule,
            quantize,
            noise: cam.noise_stream(role.as_str()),
            scenes: derive_rng(cam.seed, &cam.camera_id, &format!("{}/scene", role.as_str())),
            next: 0,
        }
    }

    fn scene_spec(&mut self) -> SceneSpec {
        match self.schedule {
            SceneSchedule::Flat { level } => SceneSpec::flat(level),
            SceneSchedule::Ramp => SceneSpec::ramp(),
            SceneSchedule::SmoothRandom { cutoff } => SceneSpec::smooth_random(cutoff, self.scenes.next_u64()),
        }
    }

    /// Returns the scene and the captured frame.
    pub fn next_pair(&mut self) -> Result<(LuminanceFrame, LuminanceFrame), SimError> {
        let spec = self.scene_spec();
        let kind = match (self.role, self.next) {
            (SequenceRole::Registration, _) => FrameKind::I,
            (SequenceRole::Query, 0) => FrameKind::I,
            (SequenceRole::Query, _) => FrameKind::P,
        };
        let scene = generate_scene(&spec, self.cam.width, self.cam.height)?
            .with_index(self.next)
            .with_kind(kind);
        let frame = capture_with(self.cam, &scene, &mut self.noise, self.quantize)?;
        self.next += 1;
        Ok((scene, frame))
    }

    pub fn next_frame(&mut self) -> Result<LuminanceFrame, SimError> {
        Ok(self.next_pair()?.1)
    }
}

pub fn render_sequence(
    cam: &SensorModel,
    role: SequenceRole,
    count: usize,
    schedule: SceneSchedule,
    quantize: bool,
) -> Result<FrameSequence, SimError> {
    let mut renderer = SequenceRenderer::new(cam, role, schedule, quantize);
    let frames = (0..count)
        .map(|_| renderer.next_frame())
        .collect::<Result<Vec<_>, _>>()?;
    let label = format!("{}/{}", cam.camera_id, role.as_str());
    Ok(FrameSequence::new(frames, label, Some(role.fps()))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub reg_frames: usize,
    pub query_frames: usize,
}

impl Default for FrameCounts {
    fn default() -> Self {
        FrameCounts {
            reg_frames: 60,
            query_frames: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// One `Cmono` Y4M file per sequence.
    #[default]
    Y4m,
    /// One PGM directory per sequence, with a `frames.txt` kind manifest.
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub camera_id: String,
    /// Relative to the dataset directory.
    pub registration_path: String,
    pub query_path: String,
    pub width: usize,
    pub height: usize,
    pub k_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub cameras: Vec<DatasetEntry>,
}

pub const DATASET_MANIFEST: &str = "manifest.json";
pub const KIND_MANIFEST: &str = "frames.txt";

impl DatasetManifest {
    pub fn load(dataset_dir: &Path) -> Result<DatasetManifest, SimError> {
        let path = dataset_dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|source| SimError::Output { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|e| SimError::Output {
            path,
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }
}

/// Loads a sequence written by [`render_dataset`] (either format).
pub fn load_sequence(path: &Path) -> Result<FrameSequence, FrameError> {
    if path.is_dir() {
        let manifest = path.join(KIND_MANIFEST);
        let manifest = manifest.exists().then_some(manifest);
        frame_io::load_frame_dir(path, manifest.as_deref())
    } else {
        let bytes = fs::read(path)?;
        let mut seq = frame_io::parse_y4m(&bytes)?;
        seq.source_id = path.display().to_string();
        Ok(seq)
    }
}

/// Writes one registration and one query sequence per camera plus a JSON
/// manifest into `out_dir`.
pub fn render_dataset(
    cameras: &[SensorModel],
    counts: FrameCounts,
    schedule: SceneSchedule,
    format: DatasetFormat,
    out_dir: &Path,
) -> Result<DatasetManifest, SimError> {
    if cameras.is_empty() {
        return Err(SimError::InvalidCamera("at least one camera is required".into()));
    }
    if counts.reg_frames == 0 || counts.query_frames == 0 {
        return Err(SimError::InvalidCamera("frame counts must be >= 1".into()));
    }
    let out_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Output { path, source }
    };
    fs::create_dir_all(out_dir).map_err(out_err(out_dir))?;

    let entries = cameras
        .par_iter()
        .map(|cam| {
            let cam_dir = out_dir.join(&cam.camera_id);
            fs::create_dir_all(&cam_dir).map_err(out_err(&cam_dir))?;
            let mut paths = Vec::with_capacity(2);
            for (role, count) in [
                (SequenceRole::Registration, counts.reg_frames),
                (SequenceRole::Query, counts.query_frames),
            ] {
                let rel = match format {
                    DatasetFormat::Y4m => format!("{}/{}.y4m", cam.camera_id, role.as_str()),
                    DatasetFormat::Pgm => format!("{}/{}", cam.camera_id, role.as_str()),
                };
                write_sequence(cam, role, count, schedule, format, &out_dir.join(&rel))?;
                paths.push(rel);
            }
            let query_path = paths.pop().expect("two roles");
            let registration_path = paths.pop().expect("two roles");
            Ok(DatasetEntry {
                camera_id: cam.camera_id.clone(),
                registration_path,
                query_path,
                width: cam.width,
                height: cam.height,
                k_strength: cam.k_strength,
                noise_sigma: cam.noise_sigma,
                seed: cam.seed,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let manifest = DatasetManifest { cameras: entries };
    let path = out_dir.join(DATASET_MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(out_err(&path))?;
    Ok(manifest)
}

/// Renders and writes one sequence a frame at a time, so memory use does not
/// grow with the frame count.
fn write_sequence(
    cam: &SensorModel,
    role: SequenceRole,
    count: usize,
    schedule: SceneSchedule,
    format: DatasetFormat,
    path: &Path,
) -> Result<(), SimError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| SimError::Output { path: p, source }
    };
    let frame_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e| match e {
            FrameError::Io(source) => SimError::Output { path: p, source },
            other => SimError::Frame(other),
        }
    };
    let mut renderer = SequenceRenderer::new(cam, role, schedule, false);
    match format {
        DatasetFormat::Y4m => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            let mut out = frame_io::Y4mWriter::new(
                BufWriter::new(file),
                cam.width,
                cam.height,
                Some(role.fps()),
                Y4mChroma::Mono,
            )
            .map_err(frame_err(path))?;
            for _ in 0..count {
                out.write_frame(&renderer.next_frame()?).map_err(frame_err(path))?;
            }
            std::io::Write::flush(&mut out.into_inner()).map_err(io_err(path))?;
        }
        DatasetFormat::Pgm => {
            fs::create_dir_all(path).map_err(io_err(path))?;
            let mut kinds = String::new();
            for _ in 0..count {
                let frame = renderer.next_frame()?;
                let name = format!("f{:05}.pgm", frame.frame_index);
                let mut buf = Vec::new();
                frame_io::write_pgm(&frame, &mut buf).expect("writing to memory");
                let file = path.join(&name);
                fs::write(&file, buf).map_err(io_err(&file))?;
                kinds.push_str(&format!("{name} {}\n", frame.kind.as_str()));
            }
            let manifest = path.join(KIND_MANIFEST);
            fs::write(&manifest, kinds).map_err(io_err(&manifest))?;
        }
    }
    Ok(())
}
