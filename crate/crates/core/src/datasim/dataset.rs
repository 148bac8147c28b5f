use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render, IdentityParams, StateParams, WalkParams};
use crate::error::{invalid, Error, Result};
use crate::imgcore::write_png;

pub const FRAME_SIZE: usize = 128;

/// Everything that determines a synthetic shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub identity: IdentityParams,
    pub n_frames: usize,
    pub seed: u64,
    pub size: usize,
    pub start: StateParams,
    pub walk: WalkParams,
}

impl DatasetSpec {
    pub fn new(identity: IdentityParams, n_frames: usize, seed: u64) -> Self {
        Self {
            identity,
            n_frames,
            seed,
            size: FRAME_SIZE,
            start: StateParams {
                background_seed: seed,
                ..StateParams::default()
            },
            walk: WalkParams::default(),
        }
    }

    pub fn states(&self) -> Vec<StateParams> {
        self.walk.walk(self.start, self.n_frames, self.seed)
    }
}

/// File stem shared by a frame, its landmarks, mask and ground truth.
pub fn frame_name(i: usize) -> String {
    format!("{i:05}")
}

/// Renders the shot into `out_dir/{frames,landmarks,masks,truth}` plus
/// `identity.json`. Returns the per-frame states.
pub fn make_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Vec<StateParams>> {
    if spec.n_frames == 0 {
        return Err(invalid("dataset needs at least one frame"));
    }
    spec.identity.validate()?;
    spec.start.validate()?;
    let dirs: Vec<PathBuf> = ["frames", "landmarks", "masks", "truth"]
        .iter()
        .map(|d| out_dir.join(d))
        .collect();
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let states = spec.states();
    states
        .par_iter()
        .enumerate()
        .try_for_each(|(i, st)| -> Result<()> {
            let r = render(&spec.identity, st, spec.size)?;
            let name = frame_name(i);
            write_png(dirs[0].join(format!("{name}.png")), &r.image)?;
            r.landmarks.save(dirs[1].join(format!("{name}.json")))?;
            write_png(dirs[2].join(format!("{name}.png")), &r.mask)?;
            write_json(&dirs[3].join(format!("{name}.json")), st)
        })?;
    write_json(&out_dir.join("identity.json"), &spec.identity)?;
    Ok(states)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn load_identity(side_dir: &Path) -> Result<IdentityParams> {
    read_json(&side_dir.join("identity.json"))
}

pub fn load_state(side_dir: &Path, name: &str) -> Result<StateParams> {
    read_json(&side_dir.join("truth").join(format!("{name}.json")))
}
