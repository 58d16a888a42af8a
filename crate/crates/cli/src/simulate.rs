//! The synthetic multi-camera experiment: render a dataset, register every
//! camera, then match every query against every registration.

use std::path::Path;
use std::time::Instant;

use chrono::{DateTime, Utc};
use prnu_core::sensor_sim::{render_dataset, DatasetFormat, FrameCounts};
use prnu_core::{
    make_camera, match_fingerprints, DenoiserConfig, FingerprintOptions, MatcherConfig,
    SceneSchedule,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::pipeline::{fingerprint_path, Pick};

pub const DEFAULT_SEED: u64 = 1;
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const DATASET_DIR: &str = "dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateParams {
    pub cameras: usize,
    pub width: usize,
    pub height: usize,
    pub k_strength: f64,
    pub noise_sigma: f64,
    pub reg_frames: usize,
    pub query_frames: usize,
    pub scene: SceneSchedule,
    pub format: DatasetFormat,
    pub seed: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            cameras: 10,
            width: 128,
            height: 128,
            k_strength: 0.02,
            noise_sigma: 2.0,
            reg_frames: 60,
            query_frames: 100,
            scene: SceneSchedule::default(),
            format: DatasetFormat::Y4m,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRow {
    pub camera_id: String,
    pub pixels: String,
    pub frames_registered: usize,
    pub frames_queried: usize,
    pub same_camera_pce: f64,
    pub accepted: bool,
    pub register_seconds: f64,
    pub verify_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub generated_at: DateTime<Utc>,
    pub params: SimulateParams,
    pub denoiser: DenoiserConfig,
    pub matcher: MatcherConfig,
    pub cameras: Vec<CameraRow>,
    /// `pce_matrix[i][j]` matches camera `j`'s query against camera `i`'s
    /// registration.
    pub pce_matrix: Vec<Vec<f64>>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub cross_comparisons: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub max_cross_pce: Option<f64>,
    pub total_seconds: f64,
}

/// Table-shaped CSV row.
#[derive(Debug, Serialize, Deserialize)]
pub struct CsvRow {
    pub camera_id: String,
    pub pixels: String,
    pub register_seconds: f64,
    pub verify_seconds: f64,
    pub first_query_pce: f64,
    pub accepted: bool,
}

pub fn camera_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn run_experiment(
    params: &SimulateParams,
    denoiser: &DenoiserConfig,
    matcher: &MatcherConfig,
    out_dir: &Path,
) -> Result<ExperimentReport, CliError> {
    if params.cameras == 0 {
        return Err(CliError::new("usage", "at least one camera is required"));
    }
    denoiser.validate().map_err(|e| CliError::new("config", e.to_string()))?;
    matcher.validate()?;
    let started = Instant::now();
    let digits = params.cameras.saturating_sub(1).to_string().len().max(2);
    let cams = (0..params.cameras)
        .map(|i| {
            make_camera(
                &format!("cam{i:0digits$}"),
                params.width,
                params.height,
                params.k_strength,
                params.noise_sigma,
                camera_seed(params.seed, i),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = out_dir.join(DATASET_DIR);
    let counts = FrameCounts {
        reg_frames: params.reg_frames,
        query_frames: params.query_frames,
    };
    let manifest = render_dataset(&cams, counts, params.scene, params.format, &dataset)?;

    let options = FingerprintOptions::default();
    let mut registered = Vec::with_capacity(cams.len());
    let mut queries = Vec::with_capacity(cams.len());
    let mut rows = Vec::with_capacity(cams.len());
    for entry in &manifest.cameras {
        let t = Instant::now();
        let reg = fingerprint_path(
            &dataset.join(&entry.registration_path),
            Pick::Registration,
            Some(params.reg_frames),
            denoiser,
            options,
        )?
        .to_storage_precision();
        let register_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let query = fingerprint_path(
            &dataset.join(&entry.query_path),
            Pick::Query,
            Some(params.query_frames),
            denoiser,
            options,
        )?;
        let report = match_fingerprints(&reg, &query, matcher)?;
        let verify_seconds = t.elapsed().as_secs_f64();

        rows.push(CameraRow {
            camera_id: entry.camera_id.clone(),
            pixels: format!("{}x{}", entry.width, entry.height),
            frames_registered: reg.frames_used(),
            frames_queried: query.frames_used(),
            same_camera_pce: report.pce,
            accepted: report.accepted,
            register_seconds,
            verify_seconds,
        });
        registered.push(reg);
        queries.push(query);
    }

    let n = cams.len();
    let mut pce_matrix = vec![vec![0.0; n]; n];
    let (mut false_positives, mut max_cross) = (0usize, None::<f64>);
    for i in 0..n {
        for j in 0..n {
            let pce = if i == j {
                rows[i].same_camera_pce
            } else {
                let r = match_fingerprints(&registered[i], &queries[j], matcher)?;
                false_positives += usize::from(r.accepted);
                max_cross = Some(max_cross.map_or(r.pce, |m: f64| m.max(r.pce)));
                r.pce
            };
            pce_matrix[i][j] = pce;
        }
    }
    let true_positives = rows.iter().filter(|r| r.accepted).count();
    let cross_comparisons = n * (n - 1);
    Ok(ExperimentReport {
        generated_at: Utc::now(),
        params: params.clone(),
        denoiser: denoiser.clone(),
        matcher: *matcher,
        cameras: rows,
        pce_matrix,
        true_positives,
        false_positives,
        cross_comparisons,
        tpr: true_positives as f64 / n as f64,
        fpr: if cross_comparisons == 0 {
            0.0
        } else {
            false_positives as f64 / cross_comparisons as f64
        },
        max_cross_pce: max_cross,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<(), CliError> {
    let out = |e: std::io::Error, name: &str| {
        CliError::new("output", format!("{}: {e}", out_dir.join(name).display()))
    };
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    std::fs::write(out_dir.join(REPORT_JSON), json).map_err(|e| out(e, REPORT_JSON))?;

    let mut csv = csv::Writer::from_path(out_dir.join(REPORT_CSV))
        .map_err(|e| CliError::new("output", e.to_string()))?;
    for row in &report.cameras {
        csv.serialize(CsvRow {
            camera_id: row.camera_id.clone(),
            pixels: row.pixels.clone(),
            register_seconds: row.register_seconds,
            verify_seconds: row.verify_seconds,
            first_query_pce: row.same_camera_pce,
            accepted: row.accepted,
        })
        .map_err(|e| CliError::new("output", e.to_string()))?;
    }
    csv.flush().map_err(|e| out(e, REPORT_CSV))?;
    Ok(())
}
