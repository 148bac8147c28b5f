use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use facelab_core::conversion::{convert_sequence, BlendMode, ColorMode, ConvertConfig, FrameDiagnostics, FrameInput};
use facelab_core::datasim::{make_dataset, DatasetSpec, IdentityParams};
use facelab_core::geometry::{
    align_face, canonical_3d, euler_from_landmarks, smooth_landmarks, AlignmentMeta, AlignmentTemplate, EulerAngles,
    ExtractionMode, LandmarkSet,
};
use facelab_core::imgcore::{read_png, warp_affine_with_border, write_png, Border, Image};
use facelab_core::metrics::evaluate;
use facelab_core::models::{Direction, Model, ModelConfig, Structure};
use facelab_core::training::{append_loss_log, train, FaceSet, LossReport, TrainConfig, TrainSession};
use facelab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::keyvalue;
use crate::workspace::{
    is_nonempty_dir, reset_dir, stems, Side, Workspace, DIAGNOSTICS, EXTRACT_MANIFEST, LOSS_LOG,
};
use crate::{
    BlendArg, ColorArg, Command, ConvertArgs, DirectionArg, EvaluateArgs, ExtractArgs, ModeArg, StructureArg,
    SynthArgs, TrainArgs,
};

/// Checkpoint directory inside `model/`.
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(&a),
        Command::Extract(a) => extract(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Convert(a) => convert(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let ws = Workspace::new(&a.out);
    let _lock = ws.lock()?;
    let side = ws.side(a.side.into());
    if is_nonempty_dir(&side) {
        if !a.force {
            return Err(Error::InvalidArgument(format!(
                "{} is not empty (pass --force to replace it)",
                side.display()
            )));
        }
        reset_dir(&side)?;
    }
    let identity = match &a.identity_file {
        Some(p) => {
            let id: IdentityParams = read_json(p)?;
            id.validate()?;
            id
        }
        None => IdentityParams::random(a.identity_seed),
    };
    let mut spec = DatasetSpec::new(identity, a.frames, a.motion_seed.unwrap_or(a.identity_seed));
    spec.size = a.size;
    make_dataset(&spec, &side)?;
    log::info!("rendered {} frames into {}", a.frames, side.display());
    Ok(())
}

/// Per-face sidecar written by `extract`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceMeta {
    #[serde(flatten)]
    pub alignment: AlignmentMeta,
    pub aligned_landmarks: LandmarkSet,
    pub euler: EulerAngles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedFrame {
    pub name: String,
    #[serde(flatten)]
    pub euler: EulerAngles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractManifest {
    pub mode: ExtractionMode,
    pub size: usize,
    pub smooth_window: usize,
    pub frames: Vec<ExtractedFrame>,
    /// Frames without a landmark file.
    pub skipped: Vec<String>,
}

fn mode_of(m: ModeArg) -> ExtractionMode {
    match m {
        ModeArg::HalfFace => ExtractionMode::HalfFace,
        ModeArg::FullFace => ExtractionMode::FullFace,
        ModeArg::WholeFace => ExtractionMode::WholeFace,
    }
}

fn read_mask_or_full(path: &Path, h: usize, w: usize) -> Result<Image> {
    if path.is_file() {
        let m = read_png(path)?;
        if m.channels() != 1 || m.height() != h || m.width() != w {
            return Err(Error::InvalidArgument(format!("{}: mask does not match its frame", path.display())));
        }
        Ok(m)
    } else {
        Ok(Image::filled(h, w, &[1.0]))
    }
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let ws = Workspace::new(&a.workspace);
    let side: Side = a.side.into();
    let frames_dir = ws.side_dir(side, "frames");
    let names = stems(&frames_dir, "png")?;
    if names.is_empty() {
        return Err(Error::EmptyDataset(format!("no frames in {}", frames_dir.display())));
    }
    let _lock = ws.lock()?;
    let lm_dir = ws.side_dir(side, "landmarks");
    let (with, skipped): (Vec<String>, Vec<String>) =
        names.into_iter().partition(|n| lm_dir.join(format!("{n}.json")).is_file());
    for n in &skipped {
        log::warn!("{n}: no landmark file, skipped");
    }
    if with.is_empty() {
        return Err(Error::EmptyDataset("no frame has landmarks".into()));
    }
    let raw: Vec<LandmarkSet> = with
        .iter()
        .map(|n| LandmarkSet::load(lm_dir.join(format!("{n}.json"))))
        .collect::<Result<_>>()?;
    let lms = if a.smooth_window > 1 { smooth_landmarks(&raw, a.smooth_window)? } else { raw };

    let mode = mode_of(a.mode);
    let template = AlignmentTemplate::new(mode);
    let (aligned_dir, masks_dir, meta_dir) =
        (ws.side_dir(side, "aligned"), ws.side_dir(side, "aligned_masks"), ws.side_dir(side, "meta"));
    for d in [&aligned_dir, &masks_dir, &meta_dir] {
        reset_dir(d)?;
    }
    let mut frames = Vec::with_capacity(with.len());
    for (name, l) in with.iter().zip(&lms) {
        let img = read_png(frames_dir.join(format!("{name}.png")))?;
        let (face, t) = align_face(&img, l, &template, a.size)?;
        let mask = read_mask_or_full(
            &ws.side_dir(side, "masks").join(format!("{name}.png")),
            img.height(),
            img.width(),
        )?;
        let inv = t.inverse()?;
        let aligned_mask = warp_affine_with_border(&mask, &inv.matrix(), a.size, a.size, Border::Constant(0.0))?;
        let euler = euler_from_landmarks(l, canonical_3d())?;
        write_png(aligned_dir.join(format!("{name}.png")), &face)?;
        write_png(masks_dir.join(format!("{name}.png")), &aligned_mask)?;
        let meta = FaceMeta {
            alignment: AlignmentMeta::new(&t, mode, a.size),
            aligned_landmarks: l.map(|p| t.apply(p)),
            euler,
        };
        write_json(&meta_dir.join(format!("{name}.json")), &meta)?;
        frames.push(ExtractedFrame { name: name.clone(), euler });
    }
    let manifest = ExtractManifest {
        mode,
        size: a.size,
        smooth_window: a.smooth_window,
        frames,
        skipped,
    };
    write_json(&ws.side(side).join(EXTRACT_MANIFEST), &manifest)?;
    log::info!("aligned {} faces ({} skipped)", manifest.frames.len(), manifest.skipped.len());
    Ok(())
}

/// Loads the aligned faces of one side as a training set.
pub fn load_face_set(ws: &Workspace, side: Side, eye_weight: f64) -> Result<FaceSet> {
    let aligned = ws.side_dir(side, "aligned");
    let meta_dir = ws.side_dir(side, "meta");
    let names: Vec<String> = stems(&aligned, "png")?.intersection(&stems(&meta_dir, "json")?).cloned().collect();
    if names.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no aligned faces in {} (run extract first)",
            aligned.display()
        )));
    }
    let (mut faces, mut masks, mut lms) = (Vec::new(), Vec::new(), Vec::new());
    for n in &names {
        let face = read_png(aligned.join(format!("{n}.png")))?;
        let mask = read_mask_or_full(
            &ws.side_dir(side, "aligned_masks").join(format!("{n}.png")),
            face.height(),
            face.width(),
        )?;
        let meta: FaceMeta = read_json(&meta_dir.join(format!("{n}.json")))?;
        faces.push(face);
        masks.push(mask);
        lms.push(meta.aligned_landmarks);
    }
    FaceSet::new(faces, masks, &lms, eye_weight)
}

/// Settings from an optional config file, split per config struct.
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub convert: ConvertConfig,
    /// Keys the file set explicitly.
    pub keys: Vec<String>,
}

pub fn load_settings(path: Option<&Path>) -> Result<Settings> {
    let mut entries: BTreeMap<String, Value> = match path {
        Some(p) => keyvalue::load(p)?,
        None => BTreeMap::new(),
    };
    let keys = entries.keys().cloned().collect();
    // Keys shared by name (none today) would be consumed by the first struct.
    let model = keyvalue::apply(&ModelConfig::default(), &mut entries)?;
    let train = keyvalue::apply(&TrainConfig::default(), &mut entries)?;
    let convert = keyvalue::apply(&ConvertConfig::default(), &mut entries)?;
    keyvalue::reject_unknown(&entries)?;
    Ok(Settings { model, train, convert, keys })
}

fn truncate_loss_log(path: &Path, upto: u64) -> Result<()> {
    if !path.is_file() {
        return Ok(());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kept = String::new();
    for line in text.lines() {
        let r: LossReport = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        if r.iteration <= upto {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    std::fs::write(path, kept).map_err(|e| Error::io(path, e))
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let ws = Workspace::new(&a.workspace);
    let s = load_settings(a.config.as_deref())?;
    let mut model_cfg = s.model;
    let mut train_cfg = s.train;
    if let Some(st) = a.structure {
        model_cfg.structure = match st {
            StructureArg::Df => Structure::Df,
            StructureArg::Liae => Structure::Liae,
        };
    }
    model_cfg.hd |= a.hd;
    if let Some(r) = a.resolution {
        model_cfg.resolution = r;
    }
    if let Some(b) = a.base_channels {
        model_cfg.base_channels = b;
    }
    if let Some(d) = a.ae_dims {
        model_cfg.ae_dims = d;
    }
    if let Some(n) = a.iterations {
        train_cfg.iterations = n;
    }
    if let Some(seed) = a.seed {
        train_cfg.seed = seed;
    }
    let _lock = ws.lock()?;
    let model_dir = ws.model_dir();
    let ckpt = model_dir.join(CHECKPOINT_DIR);
    let log_path = model_dir.join(LOSS_LOG);
    let mut session = if a.resume {
        if !ckpt.is_dir() {
            return Err(Error::InvalidArgument(format!("nothing to resume in {}", ckpt.display())));
        }
        let session = TrainSession::load(&ckpt)?;
        let have = session.model().config();
        let explicit_res = a.resolution.is_some() || s.keys.iter().any(|k| k == "resolution");
        if explicit_res && have.resolution != model_cfg.resolution {
            return Err(Error::InvalidArgument(format!(
                "checkpoint was trained at resolution {} but {} was requested",
                have.resolution, model_cfg.resolution
            )));
        }
        let explicit_structure = a.structure.is_some() || s.keys.iter().any(|k| k == "structure");
        if explicit_structure && have.structure != model_cfg.structure {
            return Err(Error::InvalidArgument("checkpoint structure differs from the requested one".into()));
        }
        truncate_loss_log(&log_path, session.iteration())?;
        session
    } else {
        if is_nonempty_dir(&model_dir) && !a.force {
            return Err(Error::InvalidArgument(format!(
                "{} already holds a model (use --resume or --force)",
                model_dir.display()
            )));
        }
        reset_dir(&model_dir)?;
        TrainSession::new(model_cfg, train_cfg)?
    };
    let until = if a.iterations.is_some() || s.keys.iter().any(|k| k == "iterations") {
        train_cfg.iterations
    } else {
        session.config().iterations
    };
    session.set_iterations(until);
    let eye = session.config().eye_weight;
    let src = load_face_set(&ws, Side::Src, eye)?;
    let dst = load_face_set(&ws, Side::Dst, eye)?;
    let res = session.model().config().resolution;
    for (name, set) in [("src", &src), ("dst", &dst)] {
        if set.size() != res {
            return Err(Error::InvalidArgument(format!(
                "{name} faces were extracted at {}px but the model resolution is {res}px",
                set.size()
            )));
        }
    }
    mkdir(&model_dir)?;
    let tf_weight = session.config().trueface_weight;
    let mut warned = false;
    train(&mut session, &src, &dst, until, Some(&ckpt), |r| {
        if r.iteration % 100 == 0 || r.iteration == until {
            log::info!("iteration {} loss {:.4}", r.iteration, r.total);
        }
        // The dst statistics are detached, so on some data the latent pair
        // drifts apart instead of converging.
        let tf = tf_weight * r.trueface;
        if !warned && tf > r.total - tf {
            warned = true;
            log::warn!(
                "iteration {}: trueface term {tf:.4} outweighs the rest of the loss; consider a lower trueface_weight",
                r.iteration
            );
        }
        append_loss_log(&log_path, r)
    })?;
    Ok(())
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    let ws = Workspace::new(&a.workspace);
    let s = load_settings(a.config.as_deref())?;
    let mut cfg = s.convert;
    if let Some(d) = a.direction {
        cfg.direction = match d {
            DirectionArg::Src2dst => Direction::Src2dst,
            DirectionArg::Dst2src => Direction::Dst2src,
        };
    }
    if let Some(c) = a.color {
        cfg.color_mode = match c {
            ColorArg::None => ColorMode::None,
            ColorArg::Rct => ColorMode::Rct,
            ColorArg::Idt => ColorMode::Idt,
        };
    }
    if let Some(b) = a.blend {
        cfg.blend_mode = match b {
            BlendArg::Alpha => BlendMode::Alpha,
            BlendArg::Poisson => BlendMode::Poisson,
        };
    }
    if let Some(x) = a.sharpen {
        cfg.sharpen_amount = x;
    }
    cfg.validate()?;
    let _lock = ws.lock()?;
    let ckpt = ws.model_dir().join(CHECKPOINT_DIR);
    if !ckpt.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "no trained model at {} (run train first)",
            ckpt.display()
        )));
    }
    let (model, _) = Model::<f32>::load(&ckpt)?;
    let side = match cfg.direction {
        Direction::Src2dst => Side::Dst,
        Direction::Dst2src => Side::Src,
    };
    let frames_dir = ws.side_dir(side, "frames");
    let names: Vec<String> = stems(&frames_dir, "png")?.into_iter().collect();
    let res = model.config().resolution;
    let mut inputs = Vec::with_capacity(names.len());
    for n in &names {
        let frame = read_png(frames_dir.join(format!("{n}.png")))?;
        let mask = read_mask_or_full(
            &ws.side_dir(side, "masks").join(format!("{n}.png")),
            frame.height(),
            frame.width(),
        )?;
        let meta_path = ws.side_dir(side, "meta").join(format!("{n}.json"));
        let transform = if meta_path.is_file() {
            let meta: FaceMeta = read_json(&meta_path)?;
            if meta.alignment.out_size != res {
                return Err(Error::InvalidArgument(format!(
                    "{n}: aligned at {}px but the model resolution is {res}px",
                    meta.alignment.out_size
                )));
            }
            Some(meta.alignment.transform())
        } else {
            None
        };
        inputs.push(FrameInput { frame, mask, transform });
    }
    let results = convert_sequence(&model, &inputs, &cfg, a.workers)?;

    let out = ws.output_dir();
    reset_dir(&out)?;
    let (of, om) = (out.join("frames"), out.join("masks"));
    mkdir(&of)?;
    mkdir(&om)?;
    let diag_path = out.join(DIAGNOSTICS);
    let mut diag = std::fs::File::create(&diag_path).map_err(|e| Error::io(&diag_path, e))?;
    let mut failures = 0;
    for ((name, input), result) in names.iter().zip(&inputs).zip(results) {
        #[derive(Serialize)]
        struct Line<'a> {
            frame: &'a str,
            error: Option<String>,
            #[serde(flatten)]
            diagnostics: FrameDiagnostics,
        }
        let line = match result {
            Ok(r) => {
                write_png(of.join(format!("{name}.png")), &r.frame)?;
                write_png(om.join(format!("{name}.png")), &r.mask)?;
                Line { frame: name, error: None, diagnostics: r.diagnostics }
            }
            Err(e) => {
                failures += 1;
                log::warn!("{name}: {e}");
                write_png(of.join(format!("{name}.png")), &input.frame)?;
                Line { frame: name, error: Some(e.to_string()), diagnostics: FrameDiagnostics::default() }
            }
        };
        let text = serde_json::to_string(&line).map_err(|e| Error::json(&diag_path, e))?;
        writeln!(diag, "{text}").map_err(|e| Error::io(&diag_path, e))?;
    }
    log::info!("converted {} frames ({failures} failed)", names.len());
    Ok(())
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let report = evaluate(&a.dir_a, &a.dir_b, a.sample)?;
    print!("{}", report.table());
    if let Some(p) = &a.report {
        report.save(p)?;
    }
    Ok(())
}
