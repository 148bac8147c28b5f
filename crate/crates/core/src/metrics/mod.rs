//! Evaluation protocol: SSIM, landmark distance, pose distance and
//! per-video aggregation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use facelab_autograd::Graph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{canonical_3d, euler_from_landmarks, EulerAngles, LandmarkSet};
use crate::imgcore::{read_png, Image};
use crate::models::images_to_tensor;
use crate::training::ssim_map;

pub const REPORT_FILE_SCHEMA: &str = "facelab-eval-1";

/// Mean SSIM over all pixels and channels, computed in double precision with
/// the same windowed map the training loss uses.
pub fn ssim_score(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(invalid("ssim needs images of the same shape"));
    }
    let mut g = Graph::<f64>::new();
    let x = g.input(images_to_tensor(&[a])?);
    let y = g.input(images_to_tensor(&[b])?);
    let s = ssim_map(&mut g, x, y)?;
    let m = g.mean(s);
    Ok(g.value(m).item())
}

/// Mean Euclidean distance between corresponding landmarks, in pixels.
pub fn landmark_distance(a: &LandmarkSet, b: &LandmarkSet) -> f64 {
    let n = a.points().len() as f64;
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .sum::<f64>()
        / n
}

/// Wraps an angle difference into [−180, 180].
pub fn wrap_degrees(d: f64) -> f64 {
    let r = (d + 180.0).rem_euclid(360.0) - 180.0;
    if r == -180.0 && d > 0.0 {
        180.0
    } else {
        r
    }
}

/// Magnitude of the wrapped difference; depends only on `|d|`, so it is
/// exactly symmetric in the two angles.
fn angle_gap(a: f64, b: f64) -> f64 {
    let r = (a - b).abs().rem_euclid(360.0);
    r.min(360.0 - r)
}

/// Euclidean norm of the wrapped (yaw, pitch, roll) differences, in degrees.
pub fn pose_distance(a: &EulerAngles, b: &EulerAngles) -> f64 {
    let dy = angle_gap(a.yaw, b.yaw);
    let dp = angle_gap(a.pitch, b.pitch);
    let dr = angle_gap(a.roll, b.roll);
    (dy * dy + dp * dp + dr * dr).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub ssim: f64,
    /// `None` when either side lacks a landmark file.
    pub landmark_dist: Option<f64>,
    pub pose_dist: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        }
    }
}

/// Statistics pooled over frames and over per-video means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub frames: MeanStd,
    pub videos: MeanStd,
}

impl MetricSummary {
    fn from_videos(per_video: &[Vec<f64>]) -> Self {
        let all: Vec<f64> = per_video.iter().flatten().copied().collect();
        let means: Vec<f64> = per_video
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| MeanStd::of(v).mean)
            .collect();
        Self {
            frames: MeanStd::of(&all),
            videos: MeanStd::of(&means),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScores {
    pub name: String,
    pub frames: Vec<(String, FrameScore)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema: String,
    pub videos: usize,
    pub frames: usize,
    pub ssim: MetricSummary,
    pub landmarks_px: MetricSummary,
    /// Pose is estimated from landmarks, not by a learned head-pose model.
    pub pose_deg: MetricSummary,
    pub pose_source: String,
    /// Reserved; no face verifier is bundled.
    pub identity: Option<f64>,
    /// Reserved; no perceptual network is bundled.
    pub perceptual: Option<f64>,
    pub skipped: Vec<String>,
    pub per_video: Vec<VideoScores>,
}

impl AggregateReport {
    /// Aligned-column text table, one row per metric.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>20} {:>20}\n",
            "metric", "frames mean ± std", "videos mean ± std"
        );
        let row = |name: &str, m: &MetricSummary| {
            if m.frames.count == 0 {
                return format!("{:<12} {:>20} {:>20}\n", name, "n/a", "n/a");
            }
            format!(
                "{:<12} {:>20} {:>20}\n",
                name,
                format!("{:.4} ± {:.4}", m.frames.mean, m.frames.std),
                format!("{:.4} ± {:.4}", m.videos.mean, m.videos.std)
            )
        };
        out += &row("ssim", &self.ssim);
        out += &row("landmarks", &self.landmarks_px);
        out += &row("pose*", &self.pose_deg);
        out += &format!(
            "{} video(s), {} frame(s); *pose from landmarks\n",
            self.videos, self.frames
        );
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Picks `n` indices spread evenly over `0..len` (all of them when `n ≥ len`).
pub fn uniform_sample(len: usize, n: usize) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    (0..n).map(|i| i * len / n).collect()
}

fn stems(dir: &Path, ext: &str) -> Result<BTreeSet<String>> {
    if !dir.is_dir() {
        return Ok(BTreeSet::new());
    }
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == ext) {
            if let Some(s) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(s.to_string());
            }
        }
    }
    Ok(out)
}

/// A video is a directory holding `frames/*.png` and optionally
/// `landmarks/*.json`. A directory without `frames/` is treated as a
/// collection of such videos, paired with the other side by name.
pub fn video_pairs(dir_a: &Path, dir_b: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if dir_a.join("frames").is_dir() {
        let name = dir_a
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        return Ok(vec![(name, dir_a.to_path_buf(), dir_b.to_path_buf())]);
    }
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir_a).map_err(|e| Error::io(dir_a, e))? {
        let p = entry.map_err(|e| Error::io(dir_a, e))?.path();
        if p.join("frames").is_dir() {
            if let Some(n) = p.file_name() {
                names.insert(n.to_string_lossy().into_owned());
            }
        }
    }
    Ok(names
        .into_iter()
        .filter(|n| dir_b.join(n).join("frames").is_dir())
        .map(|n| (n.clone(), dir_a.join(&n), dir_b.join(&n)))
        .collect())
}

fn score_frame(a: &Path, b: &Path, name: &str) -> Result<FrameScore> {
    let fa = read_png(a.join("frames").join(format!("{name}.png")))?;
    let fb = read_png(b.join("frames").join(format!("{name}.png")))?;
    let ssim = ssim_score(&fa, &fb)?;
    let (la, lb) = (
        a.join("landmarks").join(format!("{name}.json")),
        b.join("landmarks").join(format!("{name}.json")),
    );
    let (landmark_dist, pose_dist) = if la.is_file() && lb.is_file() {
        let (la, lb) = (LandmarkSet::load(&la)?, LandmarkSet::load(&lb)?);
        let template = canonical_3d();
        let pose = pose_distance(&euler_from_landmarks(&la, template)?, &euler_from_landmarks(&lb, template)?);
        (Some(landmark_distance(&la, &lb)), Some(pose))
    } else {
        (None, None)
    };
    Ok(FrameScore {
        ssim,
        landmark_dist,
        pose_dist,
    })
}

/// Scores up to `sample` uniformly spaced frames per video pair and
/// aggregates them. Frames present on only one side are skipped and listed.
pub fn evaluate(dir_a: &Path, dir_b: &Path, sample: usize) -> Result<AggregateReport> {
    if sample == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let pairs = video_pairs(dir_a, dir_b)?;
    let mut skipped = Vec::new();
    let mut per_video = Vec::new();
    for (video, a, b) in &pairs {
        let (sa, sb) = (stems(&a.join("frames"), "png")?, stems(&b.join("frames"), "png")?);
        skipped.extend(sa.symmetric_difference(&sb).map(|n| format!("{video}/{n}: missing pair")));
        let common: Vec<&String> = sa.intersection(&sb).collect();
        let picked: Vec<&String> = uniform_sample(common.len(), sample).into_iter().map(|i| common[i]).collect();
        let scores: Vec<(String, FrameScore)> = picked
            .par_iter()
            .map(|n| score_frame(a, b, n).map(|s| ((*n).clone(), s)))
            .collect::<Result<_>>()?;
        if !scores.is_empty() {
            per_video.push(VideoScores {
                name: video.clone(),
                frames: scores,
            });
        }
    }
    if per_video.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no paired frames between {} and {}",
            dir_a.display(),
            dir_b.display()
        )));
    }
    let collect = |f: &dyn Fn(&FrameScore) -> Option<f64>| -> Vec<Vec<f64>> {
        per_video
            .iter()
            .map(|v| v.frames.iter().filter_map(|(_, s)| f(s)).collect())
            .collect()
    };
    Ok(AggregateReport {
        schema: REPORT_FILE_SCHEMA.into(),
        videos: per_video.len(),
        frames: per_video.iter().map(|v| v.frames.len()).sum(),
        ssim: MetricSummary::from_videos(&collect(&|s| Some(s.ssim))),
        landmarks_px: MetricSummary::from_videos(&collect(&|s| s.landmark_dist)),
        pose_deg: MetricSummary::from_videos(&collect(&|s| s.pose_dist)),
        pose_source: "landmarks".into(),
        identity: None,
        perceptual: None,
        skipped,
        per_video,
    })
}
