use facelab_autograd::{Graph, Tensor};
use facelab_core::imgcore::Image;
use facelab_core::models::{
    forward_train, images_to_tensor, CheckpointInfo, Direction, Model, ModelConfig, Structure, MANIFEST_FILE,
    WEIGHTS_FILE,
};
use facelab_core::Error;

fn cfg(structure: Structure, hd: bool, res: usize) -> ModelConfig {
    ModelConfig {
        structure,
        hd,
        resolution: res,
        base_channels: 4,
        ae_dims: 8,
        mask_head: true,
    }
}

fn face(seed: usize, res: usize) -> Image {
    Image::from_fn(res, res, 3, |x, y, c| (((x * 7 + y * 3 + c * 5 + seed * 11) % 17) as f64) / 16.0)
}

#[test]
fn invalid_configs_rejected() {
    for bad in [
        ModelConfig { resolution: 40, ..Default::default() },
        ModelConfig { resolution: 0, ..Default::default() },
        ModelConfig { base_channels: 0, ..Default::default() },
        ModelConfig { ae_dims: 0, ..Default::default() },
    ] {
        assert!(Model::<f32>::build(bad, 1).is_err());
    }
}

#[test]
fn df_shapes_at_96() {
    let c = ModelConfig {
        base_channels: 2,
        ae_dims: 4,
        ..Default::default()
    };
    let m = Model::<f32>::build(c, 0).unwrap();
    let p = m.params();
    assert_eq!(p.get(p.find("encoder.conv3.weight").unwrap()).shape(), &[16, 8, 5, 5]);
    assert_eq!(p.get(p.find("inter.dense1.weight").unwrap()).shape(), &[6 * 6 * 4, 4]);
    assert_eq!(p.get(p.find("decoder_src.up0.weight").unwrap()).shape(), &[4 * 16, 4, 3, 3]);
    let mut g = Graph::<f32>::new();
    let x = g.input(images_to_tensor(&[&face(0, 96), &face(1, 96)]).unwrap());
    let y = g.input(images_to_tensor(&[&face(2, 96), &face(3, 96)]).unwrap());
    let out = forward_train(&mut g, &m, x, y).unwrap();
    assert_eq!(g.shape(out.pred_src), &[2, 3, 96, 96]);
    assert_eq!(g.shape(out.pred_dst_mask.unwrap()), &[2, 1, 96, 96]);
    let (ls, _) = out.latents.trueface_pair();
    assert_eq!(g.shape(ls), &[2, 4, 6, 6]);
}

#[test]
fn liae_decoder_takes_doubled_latent() {
    let m = Model::<f32>::build(cfg(Structure::Liae, false, 32), 0).unwrap();
    let p = m.params();
    let w = p.get(p.find("decoder.up0.weight").unwrap());
    assert_eq!(w.shape()[1], 16);
    assert!(p.find("inter_b.dense0.weight").is_ok());
    assert!(p.find("decoder_src.up0.weight").is_err());
}

#[test]
fn liae_src_path_leaves_inter_b_untouched() {
    let m = Model::<f64>::build(cfg(Structure::Liae, false, 32), 3).unwrap();
    let mut g = Graph::<f64>::new();
    let x = g.input(images_to_tensor(&[&face(0, 32)]).unwrap());
    let y = g.input(images_to_tensor(&[&face(1, 32)]).unwrap());
    let out = forward_train(&mut g, &m, x, y).unwrap();
    assert!(matches!(out.latents, facelab_core::models::Latents::Liae { .. }));
    let loss = g.mean(out.pred_src);
    let grads = g.backward(loss).unwrap();
    for (id, name, _) in m.params().iter() {
        if name.starts_with("inter_b.") {
            let zero = grads.param(id).map_or(true, |t| t.data().iter().all(|&v| v == 0.0));
            assert!(zero, "{name} got gradient from src path");
        }
    }
    let enc = m.params().find("encoder.conv0.weight").unwrap();
    assert!(grads.param(enc).unwrap().data().iter().any(|&v| v != 0.0));
}

#[test]
fn df_encoder_is_shared_between_paths() {
    let m = Model::<f64>::build(cfg(Structure::Df, false, 32), 3).unwrap();
    let enc = m.params().find("encoder.conv0.weight").unwrap();
    let run = |use_src: bool, use_dst: bool| {
        let mut g = Graph::<f64>::new();
        let x = g.input(images_to_tensor(&[&face(0, 32)]).unwrap());
        let y = g.input(images_to_tensor(&[&face(1, 32)]).unwrap());
        let out = forward_train(&mut g, &m, x, y).unwrap();
        let a = g.mean(out.pred_src);
        let b = g.mean(out.pred_dst);
        let a = g.mul_scalar(a, if use_src { 1.0 } else { 0.0 });
        let b = g.mul_scalar(b, if use_dst { 1.0 } else { 0.0 });
        let l = g.add(a, b).unwrap();
        g.backward(l).unwrap().param(enc).unwrap().clone()
    };
    let both = run(true, true);
    let s = run(true, false);
    let d = run(false, true);
    for i in 0..both.len() {
        assert!((both.data()[i] - s.data()[i] - d.data()[i]).abs() < 1e-12);
    }
}

#[test]
fn build_is_deterministic() {
    let a = Model::<f32>::build(cfg(Structure::Df, true, 32), 9).unwrap();
    let b = Model::<f32>::build(cfg(Structure::Df, true, 32), 9).unwrap();
    let c = Model::<f32>::build(cfg(Structure::Df, true, 32), 10).unwrap();
    for ((_, _, x), (_, _, y)) in a.params().iter().zip(b.params().iter()) {
        assert_eq!(x.data(), y.data());
    }
    let differs = a
        .params()
        .iter()
        .zip(c.params().iter())
        .any(|((_, _, x), (_, _, y))| x.data() != y.data());
    assert!(differs);
    assert!(a.params().find("encoder.res2.conv_a.weight").is_ok());
    assert!(a.params().find("decoder_dst.res3.conv_b.bias").is_ok());
}

#[test]
fn predict_swap_shapes_ranges_and_determinism() {
    for s in [Structure::Df, Structure::Liae] {
        let m = Model::<f32>::build(cfg(s, false, 32), 1).unwrap();
        let f = face(4, 32);
        for dir in [Direction::Src2dst, Direction::Dst2src] {
            let (img, mask) = m.predict_swap(&f, dir).unwrap();
            assert_eq!((img.width(), img.height(), img.channels()), (32, 32, 3));
            assert_eq!(mask.channels(), 1);
            assert!(img.data().iter().chain(mask.data()).all(|&v| v > 0.0 && v < 1.0));
            let (img2, mask2) = m.predict_swap(&f, dir).unwrap();
            assert_eq!(img, img2);
            assert_eq!(mask, mask2);
        }
        assert!(m.predict_swap(&face(0, 48), Direction::Src2dst).is_err());
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (i, s) in [Structure::Df, Structure::Liae].into_iter().enumerate() {
        let m = Model::<f32>::build(cfg(s, i == 1, 32), 5).unwrap();
        let path = dir.path().join(format!("ck{i}"));
        m.save(&path, CheckpointInfo { iteration: 42, seed: 5 }).unwrap();
        let (back, info) = Model::<f32>::load(&path).unwrap();
        assert_eq!(info, CheckpointInfo { iteration: 42, seed: 5 });
        assert_eq!(back.config(), m.config());
        let f = face(2, 32);
        assert_eq!(
            m.predict_swap(&f, Direction::Src2dst).unwrap(),
            back.predict_swap(&f, Direction::Src2dst).unwrap()
        );
    }
}

#[test]
fn truncated_checkpoint_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let m = Model::<f32>::build(cfg(Structure::Df, false, 32), 5).unwrap();
    m.save(dir.path(), CheckpointInfo { iteration: 1, seed: 5 }).unwrap();
    let w = dir.path().join(WEIGHTS_FILE);
    let bytes = std::fs::read(&w).unwrap();
    std::fs::write(&w, &bytes[..bytes.len() - 10]).unwrap();
    assert!(matches!(Model::<f32>::load(dir.path()), Err(Error::CorruptCheckpoint(_))));
    std::fs::remove_file(&w).unwrap();
    assert!(Model::<f32>::load(dir.path()).is_err());
}

#[test]
fn mismatched_resolution_names_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let m = Model::<f32>::build(cfg(Structure::Df, false, 32), 5).unwrap();
    m.save(dir.path(), CheckpointInfo { iteration: 1, seed: 5 }).unwrap();
    let mp = dir.path().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mp).unwrap();
    std::fs::write(&mp, text.replacen("\"resolution\": 32", "\"resolution\": 48", 1)).unwrap();
    match Model::<f32>::load(dir.path()) {
        Err(Error::CheckpointShape { name, .. }) => assert_eq!(name, "inter.dense0.weight"),
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn input_resolution_mismatch_is_explicit() {
    let m = Model::<f32>::build(cfg(Structure::Df, false, 32), 5).unwrap();
    let mut g = Graph::<f32>::new();
    let x = g.input(Tensor::zeros(&[1, 3, 16, 16]));
    let y = g.input(Tensor::zeros(&[1, 3, 32, 32]));
    assert!(forward_train(&mut g, &m, x, y).is_err());
}
