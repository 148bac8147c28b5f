use facelab_autograd::{gradcheck, GradcheckOptions, Graph, Tensor};
use facelab_core::geometry::{AlignmentTemplate, ExtractionMode};
use facelab_core::imgcore::{Image, WeightMap};
use facelab_core::models::{forward_train, images_to_tensor, masks_to_tensor, Model, ModelConfig, Structure};
use facelab_core::training::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn ssim_value(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let mut g = Graph::new();
    let (x, y) = (g.input(a.clone()), g.input(b.clone()));
    let s = ssim_map(&mut g, x, y).unwrap();
    g.value(s).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssim_self_is_one_and_symmetric(seed in any::<u64>(), h in 4usize..20, w in 4usize..20) {
        let a = random_tensor(&[1, 3, h, w], seed);
        let b = random_tensor(&[1, 3, h, w], seed ^ 1);
        for v in ssim_value(&a, &a).data() {
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
        let ab = ssim_value(&a, &b);
        let ba = ssim_value(&b, &a);
        prop_assert_eq!(ab.data(), ba.data());
        prop_assert!(ab.data().iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn constant_images_match_closed_form(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let c1 = SSIM_K1 * SSIM_K1;
        let expected = (2.0 * a * b + c1) / (a * a + b * b + c1);
        let s = ssim_value(&Tensor::full(&[1, 1, 8, 8], a), &Tensor::full(&[1, 1, 8, 8], b));
        for v in s.data() {
            prop_assert!((v - expected).abs() < 1e-9, "{} vs {}", v, expected);
        }
    }

    #[test]
    fn dssim_ignores_weight_scale(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let a = random_tensor(&[2, 3, 12, 12], seed);
        let b = random_tensor(&[2, 3, 12, 12], seed ^ 7);
        let w = random_tensor(&[2, 12, 12], seed ^ 9);
        let ws = Tensor::new(&[2, 12, 12], w.data().iter().map(|v| v * scale).collect()).unwrap();
        let eval = |w: &Tensor<f64>| {
            let mut g = Graph::new();
            let (x, y) = (g.input(a.clone()), g.input(b.clone()));
            let d = dssim(&mut g, x, y, w).unwrap();
            g.value(d).item()
        };
        prop_assert!((eval(&w) - eval(&ws)).abs() < 1e-12);
    }
}

#[test]
fn black_vs_white_ssim() {
    let c1 = SSIM_K1 * SSIM_K1;
    let s = ssim_value(&Tensor::zeros(&[1, 1, 6, 6]), &Tensor::full(&[1, 1, 6, 6], 1.0));
    assert!((s.data()[0] - c1 / (1.0 + c1)).abs() < 1e-12);
}

#[test]
fn mixed_loss_zero_for_perfect_prediction() {
    let x = random_tensor(&[2, 3, 16, 16], 3);
    let m = random_tensor(&[2, 1, 16, 16], 4);
    let mut g = Graph::new();
    let (p, t) = (g.input(x.clone()), g.input(x));
    let (pm, tm) = (g.input(m.clone()), g.input(m));
    let w = MixedWeights { dssim: 10.0, mse: 10.0, mask: 1.0 };
    let terms = mixed_loss(&mut g, p, t, Some(pm), tm, &Tensor::full(&[2, 16, 16], 1.0), &w).unwrap();
    assert!(g.value(terms.total).item().abs() < 1e-12);
}

/// Redraws every parameter so activations stay O(1) through the network;
/// at the zero-bias initialization the deep gradients are tiny enough for
/// finite-difference roundoff to dominate.
fn conditioned(mut model: Model<f64>, seed: u64) -> Model<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let t = model.params_mut().get_mut(id);
        let fan_in: usize = t.shape()[1..].iter().product();
        let limit = if t.shape().len() == 1 { 0.2 } else { (6.0 / fan_in as f64).sqrt() };
        for v in t.data_mut() {
            *v = limit * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    model
}

#[test]
fn mixed_loss_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        structure: Structure::Df,
        hd: false,
        resolution: 16,
        base_channels: 2,
        ae_dims: 3,
        mask_head: true,
    };
    let model = conditioned(Model::<f64>::build(cfg, 11).unwrap(), 99);
    let xs = random_tensor(&[1, 3, 16, 16], 1);
    let xd = random_tensor(&[1, 3, 16, 16], 2);
    let ms = random_tensor(&[1, 1, 16, 16], 3);
    let wt = random_tensor(&[1, 16, 16], 5);
    let w = MixedWeights { dssim: 10.0, mse: 10.0, mask: 1.0 };
    let report = gradcheck(
        model.params(),
        |g, p| {
            let m = model.with_params(p.clone()).unwrap();
            let (s, d, mk) = (g.input(xs.clone()), g.input(xd.clone()), g.input(ms.clone()));
            let out = forward_train(g, &m, s, d).unwrap();
            let t = mixed_loss(g, out.pred_src, s, out.pred_src_mask, mk, &wt, &w).unwrap();
            Ok(t.total)
        },
        GradcheckOptions { eps: 1e-4, max_entries_per_param: Some(3), ..Default::default() },
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-5, "{:?}", report.worst());
}

#[test]
fn trueface_loss_properties() {
    let a = random_tensor(&[2, 4, 3, 3], 8);
    let shift = [0.5, -0.25, 0.0, 1.0];
    let b = Tensor::new(
        &[2, 4, 3, 3],
        a.data().iter().enumerate().map(|(i, v)| v + shift[(i / 9) % 4]).collect(),
    )
    .unwrap();
    let mut store = facelab_autograd::ParamStore::new();
    let (xa, za) = (store.register("src", a.clone()), store.register("dst", b));
    let mut g = Graph::new();
    let (x, y, z) = (g.param(&store, xa), g.input(a.clone()), g.param(&store, za));
    let same = trueface_loss(&mut g, x, y).unwrap();
    assert!(g.value(same).item().abs() < 1e-15);
    let shifted = trueface_loss(&mut g, x, z).unwrap();
    let expected: f64 = shift.iter().map(|c| c * c).sum();
    assert!((g.value(shifted).item() - expected).abs() < 1e-12);
    let grads = g.backward(shifted).unwrap();
    assert!(grads.param(za).map_or(true, |t| t.data().iter().all(|v| *v == 0.0)));
    assert!(grads.param(xa).unwrap().data().iter().any(|v| *v != 0.0));
    let other = g.input(Tensor::zeros(&[2, 5, 3, 3]));
    assert!(trueface_loss(&mut g, x, other).is_err());
}

#[test]
fn latent_mean_distance_is_euclidean() {
    let a = Tensor::<f64>::zeros(&[1, 2, 2, 2]);
    let b = Tensor::new(&[1, 2, 2, 2], vec![3.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0]).unwrap();
    assert!((latent_mean_distance(&a, &b) - 5.0).abs() < 1e-12);
}

fn one_param_store(values: Vec<f32>) -> (facelab_autograd::ParamStore<f32>, facelab_autograd::ParamId) {
    let mut p = facelab_autograd::ParamStore::new();
    let n = values.len();
    let id = p.register("w", Tensor::new(&[n], values).unwrap());
    (p, id)
}

fn grads_of(p: &facelab_autograd::ParamStore<f32>, coef: &[f32]) -> facelab_autograd::Gradients<f32> {
    // loss = Σ coef_i · w_i, so the gradient equals coef.
    let mut g = Graph::new();
    let w = g.param(p, p.ids().next().unwrap());
    let c = g.input(Tensor::new(&[coef.len()], coef.to_vec()).unwrap());
    let prod = g.mul(w, c).unwrap();
    let s = g.sum(prod);
    g.backward(s).unwrap()
}

#[test]
fn adam_first_step_moves_by_lr() {
    let (mut p, id) = one_param_store(vec![1.0, 1.0, 1.0]);
    let mut st = AdamState::new(&p);
    let cfg = AdamConfig { lr: 0.01, beta1: 0.5, beta2: 0.999, lr_dropout_keep: 1.0 };
    let grads = grads_of(&p, &[2.0, -3.0, 0.0]);
    adam_step(&mut p, &grads, &mut st, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let w = p.get(id).data();
    assert!((w[0] as f64 - (1.0 - 0.01)).abs() < 1e-6);
    assert!((w[1] as f64 - (1.0 + 0.01)).abs() < 1e-6);
    assert_eq!(w[2], 1.0);
    assert_eq!(st.t, 1);
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let (mut p, id) = one_param_store(vec![0.3, -0.7]);
    let mut st = AdamState::new(&p);
    let cfg = AdamConfig { lr: 0.1, beta1: 0.5, beta2: 0.999, lr_dropout_keep: 1.0 };
    for _ in 0..5 {
        let grads = grads_of(&p, &[0.0, 0.0]);
        adam_step(&mut p, &grads, &mut st, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    }
    assert_eq!(p.get(id).data(), &[0.3, -0.7]);
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let (mut p, _) = one_param_store(vec![1.0]);
    let mut st = AdamState::new(&p);
    let cfg = AdamConfig { lr: 0.1, beta1: 0.5, beta2: 0.999, lr_dropout_keep: 1.0 };
    let grads = grads_of(&p, &[f32::NAN]);
    let err = adam_step(&mut p, &grads, &mut st, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
    assert!(err.to_string().contains('w'));
}

#[test]
fn lr_dropout_skips_some_updates() {
    let (mut p, id) = one_param_store(vec![0.0; 1000]);
    let mut st = AdamState::new(&p);
    let cfg = AdamConfig { lr: 0.1, beta1: 0.5, beta2: 0.999, lr_dropout_keep: 0.3 };
    let grads = grads_of(&p, &[1.0; 1000]);
    adam_step(&mut p, &grads, &mut st, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let moved = p.get(id).data().iter().filter(|v| **v != 0.0).count();
    assert!((200..400).contains(&moved), "{moved}");
}

#[test]
fn conv_aware_init_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = cai_init(&[6, 2, 3, 3], &mut rng).unwrap();
    let n = 18;
    for i in 0..6 {
        for j in 0..6 {
            let dot: f64 = (0..n).map(|k| t.data()[i * n + k] * t.data()[j * n + k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10);
        }
    }
    let wide = cai_init(&[400, 1, 2, 2], &mut rng).unwrap();
    let var = wide.data().iter().map(|v| v * v).sum::<f64>() / wide.len() as f64;
    assert!((var - 0.25).abs() < 0.03, "{var}");
    assert!(cai_init(&[3, 3], &mut rng).is_err());
}

#[test]
fn discriminator_patch_map_and_lsgan_fixed_point() {
    let d = Discriminator::<f64>::new(4, 1);
    let mut g = Graph::new();
    let x = g.input(Tensor::zeros(&[2, 3, 96, 96]));
    let out = d.forward(&mut g, x, true).unwrap();
    assert_eq!(g.shape(out), &[2, 1, 12, 12]);
    let half = g.input(Tensor::full(&[2, 1, 12, 12], 0.5));
    let dl = lsgan_discriminator(&mut g, half, half).unwrap();
    assert!((g.value(dl).item() - 0.25).abs() < 1e-15);
    let one = g.input(Tensor::full(&[2, 1, 12, 12], 1.0));
    let gl = lsgan_generator(&mut g, one);
    assert_eq!(g.value(gl).item(), 0.0);
}

#[test]
fn frozen_discriminator_gets_no_gradient() {
    let d = Discriminator::<f64>::new(2, 1);
    let mut store = facelab_autograd::ParamStore::new();
    let id = store.register("fake", random_tensor(&[1, 3, 16, 16], 1));
    let mut g = Graph::new();
    let x = g.param(&store, id);
    let out = d.forward(&mut g, x, false).unwrap();
    let l = lsgan_generator(&mut g, out);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.params().len(), 1);
    assert!(grads.param(id).is_some());
}

#[test]
fn eye_weights_cover_the_eyes() {
    let t = AlignmentTemplate::new(ExtractionMode::FullFace);
    let lms = t.target_landmarks(64);
    let w = eye_weight_map(&lms, 64, 3.0);
    let eye = lms.points()[36..42].iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / 6.0, a[1] + p[1] / 6.0]);
    assert_eq!(w.get(eye[0].round() as usize, eye[1].round() as usize), 3.0);
    assert_eq!(w.get(32, 60), 1.0);
}

fn synthetic_set(n: usize, size: usize, seed: u64) -> FaceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
            let face = Image::from_fn(size, size, 3, |x, y, c| {
                let u = (x as f64 + 0.5) / size as f64 - 0.5;
                let v = (y as f64 + 0.5) / size as f64 - 0.5;
                (0.5 + 0.4 * ((a * 6.0 + c as f64) * u + b * 4.0 * v).sin()).clamp(0.0, 1.0)
            });
            let mask = Image::from_fn(size, size, 1, |x, y, _| {
                let (dx, dy) = (x as f64 - size as f64 / 2.0, y as f64 - size as f64 / 2.0);
                if dx * dx + dy * dy < (size * size) as f64 / 8.0 { 1.0 } else { 0.0 }
            });
            FaceSample { face, mask, weights: WeightMap::uniform(size, size) }
        })
        .collect();
    FaceSet::from_samples(samples).unwrap()
}

fn tiny_model(structure: Structure) -> ModelConfig {
    ModelConfig { structure, hd: false, resolution: 16, base_channels: 4, ae_dims: 8, mask_head: true }
}

#[test]
fn sample_batch_shapes_and_plain_copy() {
    let set = synthetic_set(3, 16, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let b = sample_batch::<f64, _>(&set, 5, true, &mut rng).unwrap();
    assert_eq!(b.faces.shape(), &[5, 3, 16, 16]);
    assert_eq!(b.masks.shape(), &[5, 1, 16, 16]);
    assert_eq!(b.weights.shape(), &[5, 16, 16]);
    let b = sample_batch::<f64, _>(&set, 1, false, &mut rng).unwrap();
    let any = set.samples().iter().any(|s| {
        images_to_tensor::<f64>(&[&s.face]).unwrap().data() == b.faces.data()
            && masks_to_tensor::<f64>(&[&s.mask]).unwrap().data() == b.masks.data()
    });
    assert!(any);
}

#[test]
fn training_is_bit_deterministic() {
    let (src, dst) = (synthetic_set(4, 16, 1), synthetic_set(4, 16, 2));
    let run = || {
        let cfg = TrainConfig { seed: 3, lr_dropout_keep: 0.7, ..Default::default() };
        let mut s = TrainSession::new(tiny_model(Structure::Liae), cfg).unwrap();
        let reports: Vec<_> = (0..4).map(|_| s.step(&src, &dst).unwrap()).collect();
        (reports, s)
    };
    let (ra, sa) = run();
    let (rb, sb) = run();
    assert_eq!(ra, rb);
    for ((_, _, a), (_, _, b)) in sa.model().params().iter().zip(sb.model().params().iter()) {
        assert_eq!(a.data(), b.data());
    }
}

#[test]
fn resume_matches_uninterrupted_run() {
    let (src, dst) = (synthetic_set(4, 16, 1), synthetic_set(4, 16, 2));
    let cfg = TrainConfig { seed: 5, lr_dropout_keep: 0.8, ..Default::default() };
    let mut full = TrainSession::new(tiny_model(Structure::Df), cfg).unwrap();
    let mut reports = Vec::new();
    train(&mut full, &src, &dst, 6, None, |r| {
        reports.push(*r);
        Ok(())
    })
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("model");
    let mut part = TrainSession::new(tiny_model(Structure::Df), cfg).unwrap();
    train(&mut part, &src, &dst, 3, Some(&ck), |_| Ok(())).unwrap();
    let mut resumed = TrainSession::load(&ck).unwrap();
    assert_eq!(resumed.iteration(), 3);
    let mut tail = Vec::new();
    train(&mut resumed, &src, &dst, 6, None, |r| {
        tail.push(*r);
        Ok(())
    })
    .unwrap();
    assert_eq!(&reports[3..], &tail[..]);
    for ((_, _, a), (_, _, b)) in full.model().params().iter().zip(resumed.model().params().iter()) {
        assert_eq!(a.data(), b.data());
    }
    let (da, db) = (full.discriminator().unwrap(), resumed.discriminator().unwrap());
    for ((_, _, a), (_, _, b)) in da.params().iter().zip(db.params().iter()) {
        assert_eq!(a.data(), b.data());
    }
}

#[test]
fn report_total_is_weighted_sum() {
    let (src, dst) = (synthetic_set(2, 16, 1), synthetic_set(2, 16, 2));
    let cfg = TrainConfig::default();
    let mut s = TrainSession::new(tiny_model(Structure::Df), cfg).unwrap();
    let r = s.step(&src, &dst).unwrap();
    let side = |x: &SideReport| 10.0 * x.dssim + 10.0 * x.mse + x.mask;
    let expected = side(&r.src) + side(&r.dst) + 0.01 * r.trueface + 0.1 * r.gan;
    assert!((r.total - expected).abs() < 1e-12);
    assert!(r.gan_discriminator > 0.0);
}

#[test]
fn wrong_resolution_and_empty_sets_are_rejected() {
    let mut s = TrainSession::new(tiny_model(Structure::Df), TrainConfig::default()).unwrap();
    let (a, b) = (synthetic_set(2, 16, 1), synthetic_set(2, 32, 2));
    assert!(s.step(&a, &b).is_err());
    assert!(FaceSet::from_samples(vec![]).is_err());
}

#[test]
fn two_sample_overfit() {
    let (src, dst) = (synthetic_set(2, 16, 1), synthetic_set(2, 16, 2));
    let cfg = TrainConfig { lr: 2e-3, augment: false, gan_weight: 0.0, seed: 1, ..Default::default() };
    let mut s = TrainSession::new(tiny_model(Structure::Df), cfg).unwrap();
    let mut totals = Vec::new();
    train(&mut s, &src, &dst, 500, None, |r| {
        totals.push(r.total);
        Ok(())
    })
    .unwrap();
    let last = totals[totals.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(last < 0.1 * totals[9], "{} -> {last}", totals[9]);
}

#[test]
fn config_fills_missing_fields_with_defaults() {
    let c: TrainConfig = serde_json::from_str(r#"{"lr": 0.001, "gan_weight": 0.0}"#).unwrap();
    assert_eq!(c.lr, 0.001);
    assert_eq!(c.batch_size, 4);
    assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
}
