use ktts_core::audio::Waveform;
use ktts_core::latent::LatentSeq;
use ktts_core::networks::{
    self, discriminator, duration, text_encoder, wave_decoder, wave_encoder, DiscriminatorConfig, NetworkError,
    ParameterStore, TextNetConfig, VaeNetConfig, MAX_SLICE_FRAMES,
};
use ktts_core::phonemizer::{PhonemeSeq, PhonemeTable};
use ktts_tensor::{Bound, GradCheck, Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-0.8..0.8)).collect()
}

/// Moves every parameter off its initial value so zero biases and unit
/// gains do not hide mistakes.
fn jitter(store: &ParameterStore, seed: u64) -> ParameterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let t = out.get_mut(&name).unwrap();
        for v in t.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    out
}

fn project<'g>(y: Var<'g>, seed: u64) -> Var<'g> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Tensor::from_fn(&y.shape(), |_| rng.random_range(-1.0..1.0));
    (y * y.graph().constant(w)).sum()
}

fn check(name: &str, store: &ParameterStore, f: impl for<'g> Fn(&'g Graph, &Bound<'g>) -> Var<'g>) {
    let gc = GradCheck {
        max_per_tensor: Some(12),
        ..GradCheck::default()
    };
    let report = gc.run_store(store, f);
    assert!(
        report.passed(),
        "{name}: {} of {} mismatched, worst {:?}",
        report.failures.len(),
        report.checked,
        report.failures.first()
    );
}

fn text_ids(text: &str) -> PhonemeSeq {
    ktts_core::phonemizer::phonemize(text, &PhonemeTable::sorani()).unwrap()
}

#[test]
fn text_encoder_gradients() {
    let cfg = TextNetConfig::tiny();
    let store = jitter(&networks::init_text(&cfg, 1).unwrap(), 2).subset("text_encoder.");
    let ids = [3usize, 7, 1, 3, 12];
    check("text encoder", &store, |_, p| {
        let out = text_encoder::forward(p, &ids, &cfg.text_encoder);
        project(out.mean, 1) + project(out.log_std, 2) + project(out.hidden, 3)
    });
}

#[test]
fn duration_predictor_gradients() {
    let cfg = TextNetConfig::tiny();
    let store = jitter(&networks::init_text(&cfg, 3).unwrap(), 4).subset("duration.");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hidden = Tensor::from_fn(&[4, 6], |_| rng.random_range(-1.0..1.0));
    check("duration", &store, |g, p| {
        project(duration::forward(p, g.constant(hidden.clone()), &cfg.duration), 4)
    });
}

#[test]
fn wave_encoder_gradients() {
    let cfg = VaeNetConfig::tiny();
    let store = jitter(&networks::init_vae(&cfg, 6).unwrap(), 7).subset("wave_encoder.");
    let x = Tensor::new(vec![1, 2200 + 320], noise(2520, 8));
    check("wave encoder", &store, |g, p| {
        let (mean, log_std) = wave_encoder::forward(p, g.constant(x.clone()), &cfg.wave_encoder);
        project(mean, 5) + project(log_std, 6)
    });
}

#[test]
fn wave_decoder_gradients() {
    let cfg = VaeNetConfig::tiny();
    let store = jitter(&networks::init_vae(&cfg, 9).unwrap(), 10).subset("wave_decoder.");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z = Tensor::from_fn(&[4, 2], |_| rng.random_range(-1.0..1.0));
    check("wave decoder", &store, |g, p| {
        project(wave_decoder::forward(p, g.constant(z.clone()), &cfg.wave_decoder), 7)
    });
}

#[test]
fn discriminator_gradients() {
    let cfg = VaeNetConfig::tiny();
    let store = jitter(&networks::init_vae(&cfg, 12).unwrap(), 13).subset("discriminator.");
    let x = Tensor::new(vec![1, 64], noise(64, 14));
    check("discriminator", &store, |g, p| {
        project(discriminator::forward(p, g.constant(x.clone()), &cfg.discriminator), 8)
    });
}

#[test]
fn text_encode_shapes() {
    let cfg = TextNetConfig::default();
    let store = networks::init_text(&cfg, 1).unwrap();
    let one = PhonemeSeq::new(vec![5], &PhonemeTable::sorani()).unwrap();
    let (prior, hidden) = networks::text_encode(&store, &cfg.text_encoder, &one).unwrap();
    assert_eq!(prior.mean().shape(), &[256, 1]);
    assert_eq!(prior.std().shape(), &[256, 1]);
    assert_eq!(hidden.shape(), &[256, 1]);

    let tiny = TextNetConfig::tiny();
    let store = networks::init_text(&tiny, 1).unwrap();
    let short = text_ids("باران");
    let ids: Vec<usize> = short.ids().iter().chain(short.ids()).copied().collect();
    let double = PhonemeSeq::new(ids, &PhonemeTable::sorani()).unwrap();
    let (a, ha) = networks::text_encode(&store, &tiny.text_encoder, &short).unwrap();
    let (b, hb) = networks::text_encode(&store, &tiny.text_encoder, &double).unwrap();
    assert_eq!(2 * a.frames(), b.frames());
    assert_eq!(2 * ha.cols(), hb.cols());
}

#[test]
fn out_of_range_token_is_rejected() {
    let mut cfg = TextNetConfig::tiny();
    cfg.text_encoder.vocab_size = 4;
    let store = networks::init_text(&cfg, 1).unwrap();
    let seq = PhonemeSeq::new(vec![1, 9], &PhonemeTable::sorani()).unwrap();
    assert!(matches!(
        networks::text_encode(&store, &cfg.text_encoder, &seq),
        Err(NetworkError::TokenOutOfRange { id: 9, position: 1, vocab: 4 })
    ));
}

fn encode_columns(store: &ParameterStore, cfg: &TextNetConfig, ids: &[usize]) -> Tensor {
    let seq = PhonemeSeq::new(ids.to_vec(), &PhonemeTable::sorani()).unwrap();
    networks::text_encode(store, &cfg.text_encoder, &seq).unwrap().1
}

#[test]
fn positional_path_breaks_permutation_equivariance() {
    let cfg = TextNetConfig::tiny();
    let store = jitter(&networks::init_text(&cfg, 21).unwrap(), 22);
    let ids = [4usize, 9, 15, 4, 20];
    let swapped = [4usize, 15, 9, 4, 20];
    let a = encode_columns(&store, &cfg, &ids);
    let b = encode_columns(&store, &cfg, &swapped);
    let moved = (0..a.rows()).any(|r| a.at2(r, 1) != b.at2(r, 2) || a.at2(r, 2) != b.at2(r, 1));
    assert!(moved, "swapping tokens only permuted the outputs");

    let mut flat = store.clone();
    for name in [
        "text_encoder.stack.pos.conv.weight",
        "text_encoder.stack.pos.conv.bias",
        "text_encoder.stack.pos.proj.weight",
        "text_encoder.stack.pos.proj.bias",
    ] {
        let zeros = Tensor::zeros(flat.get(name).unwrap().shape());
        flat.set(name, zeros).unwrap();
    }
    let a = encode_columns(&flat, &cfg, &ids);
    let b = encode_columns(&flat, &cfg, &swapped);
    for r in 0..a.rows() {
        assert!((a.at2(r, 1) - b.at2(r, 2)).abs() < 1e-12);
        assert!((a.at2(r, 2) - b.at2(r, 1)).abs() < 1e-12);
        assert!((a.at2(r, 0) - b.at2(r, 0)).abs() < 1e-12);
    }
}

#[test]
fn feature_encoder_receptive_field_is_exact() {
    let cfg = VaeNetConfig::default();
    let store = networks::init_vae(&cfg, 31).unwrap();
    let feature = &cfg.wave_encoder.feature;
    let len = 2200 + 320 * 9;
    let base = noise(len, 32);
    let encode = |s: &[f64]| networks::feature_encode(&store, feature, &Waveform::new(s.to_vec()).unwrap()).unwrap();
    let reference = encode(&base);
    assert_eq!(reference.shape(), &[256, 10]);

    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut probes: Vec<usize> = vec![2199, 2200];
    probes.extend((0..10).map(|_| rng.random_range(0..len)));
    for pos in probes {
        let mut moved = base.clone();
        moved[pos] = if moved[pos] > 0.0 { -0.9 } else { 0.9 };
        let out = encode(&moved);
        for j in 0..reference.cols() {
            let inside = 320 * j <= pos && pos < 320 * j + 2200;
            let changed = (0..reference.rows()).any(|r| out.at2(r, j) != reference.at2(r, j));
            assert_eq!(changed, inside, "sample {pos}, column {j}");
        }
    }
}

#[test]
fn wave_encoder_lengths_and_clamp() {
    let cfg = VaeNetConfig::tiny();
    let mut store = networks::init_vae(&cfg, 41).unwrap();
    let enc = &cfg.wave_encoder;
    let w = Waveform::new(noise(22_050, 42)).unwrap();
    assert_eq!(networks::wave_encode(&store, enc, &w).unwrap().frames(), 63);
    let short = Waveform::new(noise(2199, 43)).unwrap();
    assert_eq!(
        networks::wave_encode(&store, enc, &short),
        Err(NetworkError::TooShort { len: 2199, min: 2200 })
    );
    let exact = Waveform::new(noise(2200, 44)).unwrap();
    assert_eq!(networks::wave_encode(&store, enc, &exact).unwrap().frames(), 1);

    // A huge head bias pushes log-std far outside the clamp range.
    let bias = store.get("wave_encoder.head.bias").unwrap().map(|_| 50.0);
    store.set("wave_encoder.head.bias", bias).unwrap();
    let post = networks::wave_encode(&store, enc, &w).unwrap();
    let first = post.std().data()[0];
    assert!(post.std().data().iter().all(|&s| s <= 4f64.exp() + 1e-9 && s >= (-9f64).exp()));
    assert!((first - 4f64.exp()).abs() < 1e-9);
    assert_eq!(post, networks::wave_encode(&store, enc, &w).unwrap());
}

#[test]
fn wave_decoder_length_law() {
    let cfg = VaeNetConfig::tiny();
    let store = jitter(&networks::init_vae(&cfg, 51).unwrap(), 52);
    let dec = &cfg.wave_decoder;
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for t in [1, 7, 32] {
        let z = LatentSeq::new(Tensor::from_fn(&[4, t], |_| rng.random_range(-2.0..2.0))).unwrap();
        let w = networks::wave_decode(&store, dec, &z).unwrap();
        assert_eq!(w.len(), 320 * t);
        assert!(w.samples().iter().all(|s| s.abs() <= 1.0));
    }
    assert!(LatentSeq::new(Tensor::zeros(&[4, 0])).is_err());
    let long = LatentSeq::new(Tensor::zeros(&[4, MAX_SLICE_FRAMES + 1])).unwrap();
    assert!(matches!(
        networks::wave_decode(&store, dec, &long),
        Err(NetworkError::SliceLength { frames: 33, .. })
    ));

    let full = VaeNetConfig::default();
    let store = networks::init_vae(&full, 54).unwrap();
    let z = LatentSeq::new(Tensor::zeros(&[256, 1])).unwrap();
    let w = networks::wave_decode(&store, &full.wave_decoder, &z).unwrap();
    assert_eq!(w.len(), 320);
}

#[test]
fn duration_head_blocks_gradient_into_text_encoder() {
    let cfg = TextNetConfig::tiny();
    let store = jitter(&networks::init_text(&cfg, 61).unwrap(), 62);
    let graph = Graph::new();
    let p = Bound::new(&graph, &store, true);
    let out = text_encoder::forward(&p, &[3, 5, 8], &cfg.text_encoder);
    let d = duration::forward(&p, out.hidden, &cfg.duration);
    assert_eq!(d.shape(), vec![1, 3]);
    let target = graph.constant(Tensor::new(vec![1, 3], vec![2.0, 5.0, 1.0]));
    let grads = p.gradients(&graph.backward(d.mse(target)));
    let mut reached_duration = false;
    for (name, g) in &grads {
        if name.starts_with("text_encoder.") {
            assert!(g.data().iter().all(|&v| v == 0.0), "{name} received gradient");
        } else {
            reached_duration |= g.data().iter().any(|&v| v != 0.0);
        }
    }
    assert!(reached_duration);
}

#[test]
fn discriminator_receptive_field_grows_per_layer() {
    for layers in 1..=10 {
        let cfg = DiscriminatorConfig {
            layers,
            channels: 4,
            ..DiscriminatorConfig::default()
        };
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(70 + layers as u64);
        let mut init = networks::layers::Init {
            store: &mut store,
            rng: &mut rng,
        };
        discriminator::init(&mut init, &cfg);
        let store = jitter(&store, 80);

        let len = 200;
        let base = Waveform::new(noise(len, 90)).unwrap();
        let reference = networks::discriminate(&store, &cfg, &base);
        assert_eq!(reference.len(), len);
        assert!(reference.iter().all(|s| s.is_finite()));

        let pos = 100;
        let mut moved = base.samples().to_vec();
        moved[pos] = -moved[pos];
        let out = networks::discriminate(&store, &cfg, &Waveform::new(moved).unwrap());
        let changed: Vec<usize> = (0..len).filter(|&i| out[i] != reference[i]).collect();
        let half = (cfg.receptive_field() - 1) / 2;
        assert_eq!(changed.first(), Some(&(pos - half)), "layers {layers}");
        assert_eq!(changed.last(), Some(&(pos + half)), "layers {layers}");
    }
}

#[test]
fn forward_passes_are_deterministic() {
    let cfg = TextNetConfig::tiny();
    let store = networks::init_text(&cfg, 99).unwrap();
    assert_eq!(store, networks::init_text(&cfg, 99).unwrap());
    let seq = text_ids("کوردستان");
    let (_, h) = networks::text_encode(&store, &cfg.text_encoder, &seq).unwrap();
    let a = networks::predict_durations(&store, &cfg.duration, &h);
    let b = networks::predict_durations(&store, &cfg.duration, &h);
    assert_eq!(a, b);
    assert_eq!(a.len(), seq.len());
}
