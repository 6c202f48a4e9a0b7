use jointhdr::image::Image;
use jointhdr::imaging::{ReferenceChoice, ScenePriors, TmoOperator, TonemappedImage};
use jointhdr::models::{
    batch, drdb_forward, load_weights, msa_attention, pcf_forward, pyramid_encode, run_pcf, run_predn, run_ranet,
    save_weights, Architecture, FrameInput, ModelError, ModelWeights, PcfConfig, PreDnConfig, RaNetConfig,
    RANET_INPUT,
};
use jointhdr_autograd::{Graph, Tensor};
use proptest::prelude::*;

fn noise_image(c: usize, h: usize, w: usize, seed: u32) -> Image {
    Image::from_fn(c, h, w, |c, y, x| {
        let v = (c as u32 * 7919 + y as u32 * 104729 + x as u32 * 1299709 + seed).wrapping_mul(2654435761);
        (v >> 8) as f32 / (1u32 << 24) as f32
    })
}

fn frames(h: usize, w: usize) -> [(Image, Image); 3] {
    std::array::from_fn(|i| (noise_image(3, h, w, i as u32), noise_image(3, h, w, 10 + i as u32).map(|v| v * 0.8)))
}

fn pcf(r: ReferenceChoice, seed: u64) -> ModelWeights {
    ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), seed)
}

#[test]
fn predn_contract() {
    let w = ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 1);
    let x = TonemappedImage { pixels: noise_image(3, 32, 48, 1), operator: TmoOperator::mu_law() };
    let y = run_predn(&w, &x, 800.0).unwrap();
    assert_eq!(y.pixels.dims(), x.pixels.dims());
    // the zero-initialized head makes a fresh denoiser the identity
    assert_eq!(y.pixels, x.pixels);
    let bad = TonemappedImage { pixels: noise_image(3, 30, 48, 1), ..x };
    match run_predn(&w, &bad, 800.0) {
        Err(ModelError::Shape(msg)) => assert!(msg.contains("level"), "{msg}"),
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn pyramid_levels_and_image_branch() {
    let cfg = PcfConfig::toy(ReferenceChoice::Medium);
    let w = ModelWeights::init(Architecture::Pcf(cfg.clone()), 2);
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let x = g.input(batch(&[&Image::filled(6, 128, 128, 0.3)]).unwrap());
    let py = pyramid_encode(&mut g, &cfg, &p, x).unwrap();
    let sides: Vec<usize> = py.features.iter().map(|&f| g.shape(f)[2]).collect();
    assert_eq!(sides, [128, 64, 32]);
    for &img in &py.images {
        assert!(g.value(img).data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
    }

    let one = PcfConfig { widths: vec![8], ..cfg };
    let w1 = ModelWeights::init(Architecture::Pcf(one.clone()), 3);
    let mut g = Graph::<f32>::new();
    let p = w1.bind(&mut g, false);
    let x = g.input(batch(&[&Image::filled(6, 20, 20, 0.3)]).unwrap());
    let py = pyramid_encode(&mut g, &one, &p, x).unwrap();
    assert_eq!(py.features.len(), 1);
    assert_eq!(g.shape(py.features[0]), [1, 8, 20, 20]);

    let x = g.input(batch(&[&Image::filled(6, 18, 20, 0.3)]).unwrap());
    assert!(pyramid_encode(&mut g, &PcfConfig::toy(ReferenceChoice::Medium), &p, x).is_err());
}

#[test]
fn attention_bounds_and_zero_weights() {
    let mut w = pcf(ReferenceChoice::Under, 4);
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let f_ref = g.input(Tensor::new(&[1, 8, 6, 6], noise_image(8, 6, 6, 1).data().iter().map(|v| v * 4.0 - 2.0).collect()).unwrap());
    let f_i = g.input(Tensor::new(&[1, 8, 6, 6], noise_image(8, 6, 6, 2).data().iter().map(|v| v * 4.0 - 2.0).collect()).unwrap());
    let (out, a) = msa_attention(&mut g, &p, 0, f_ref, f_i).unwrap();
    assert!(g.value(a).data().iter().all(|&v| v > 0.0 && v < 1.0));
    for (o, i) in g.value(out).data().iter().zip(g.value(f_i).data()) {
        assert!(o.abs() <= i.abs());
    }

    for name in ["att0.weight", "att0.bias"] {
        let t = w.get_mut(name).unwrap();
        *t = Tensor::zeros(t.shape());
    }
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    let fr = g.input(Tensor::full(&[1, 8, 4, 4], 1.0));
    let fi = g.input(Tensor::new(&[1, 8, 4, 4], (0..128).map(|v| v as f32).collect()).unwrap());
    let (out, _) = msa_attention(&mut g, &p, 0, fr, fi).unwrap();
    for (o, i) in g.value(out).data().iter().zip(g.value(fi).data()) {
        assert_eq!(*o, i / 2.0);
    }
    let small = g.input(Tensor::full(&[1, 8, 2, 2], 1.0));
    assert!(msa_attention(&mut g, &p, 0, small, fi).is_err());
}

#[test]
fn drdb_zero_weights_is_identity() {
    let mut w = pcf(ReferenceChoice::Over, 5);
    let names: Vec<String> = w.iter().map(|(n, _)| n.clone()).filter(|n| n.starts_with("drdb1.")).collect();
    for n in names {
        let t = w.get_mut(&n).unwrap();
        *t = Tensor::zeros(t.shape());
    }
    let mut g = Graph::<f32>::new();
    let p = w.bind(&mut g, false);
    for (h, wd) in [(5, 7), (16, 16)] {
        let x = g.input(Tensor::new(&[1, 16, h, wd], noise_image(16, h, wd, 3).into_data()).unwrap());
        let y = drdb_forward(&mut g, &p, "drdb1", x).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }
    let wrong = g.input(Tensor::zeros(&[1, 8, 4, 4]));
    assert!(drdb_forward(&mut g, &p, "drdb1", wrong).is_err());
}

#[test]
fn pcf_contract_and_path_mismatch() {
    let w = pcf(ReferenceChoice::Medium, 6);
    let f = frames(32, 32);
    let out = run_pcf(&w, &f, ReferenceChoice::Medium).unwrap();
    assert_eq!((out.channels(), out.height(), out.width()), (3, 32, 32));
    assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(out, run_pcf(&w, &f, ReferenceChoice::Medium).unwrap());
    assert!(matches!(run_pcf(&w, &f, ReferenceChoice::Under), Err(ModelError::Path { .. })));
    let wrong = ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 0);
    assert!(matches!(run_pcf(&wrong, &f, ReferenceChoice::Medium), Err(ModelError::Architecture { .. })));
}

#[test]
fn path_isolation_by_gradient_sparsity() {
    let paths: Vec<ModelWeights> = ReferenceChoice::ALL.iter().map(|&r| pcf(r, 7 + r.index() as u64)).collect();
    for r in ReferenceChoice::ALL {
        let mut g = Graph::<f32>::new();
        let bound: Vec<_> = paths.iter().map(|w| w.bind(&mut g, true)).collect();
        let f = frames(16, 16);
        let inputs: [FrameInput; 3] = std::array::from_fn(|i| FrameInput {
            ldr: g.input(batch(&[&f[i].0]).unwrap()),
            hdr: g.input(batch(&[&f[i].1]).unwrap()),
        });
        let Architecture::Pcf(cfg) = paths[r.index()].arch() else { unreachable!() };
        let y = pcf_forward(&mut g, cfg, &bound[r.index()], &inputs, r).unwrap();
        let t = g.input(Tensor::full(&[1, 3, 16, 16], 0.5));
        let l = g.mean_abs_diff(y, t).unwrap();
        let grads = g.backward(l).unwrap();
        for (k, b) in bound.iter().enumerate() {
            for (_, &v) in b.iter() {
                let zero = grads.get(v).map_or(true, |t| t.data().iter().all(|&x| x == 0.0));
                if k != r.index() {
                    assert!(zero, "path {k} received gradient while running {r}");
                }
            }
        }
        let touched = bound[r.index()].iter().filter(|(_, &v)| grads.get(v).is_some()).count();
        assert!(touched > 0);
    }
}

#[test]
fn ranet_contract() {
    assert!(Architecture::RaNet(RaNetConfig::default_size()).param_count() <= 300_000);
    let w = ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 8);
    let priors = ScenePriors { brightness: 1.0, iso: 400.0, ev_steps: [-3.0, 0.0, 3.0] };
    let x = noise_image(9, RANET_INPUT, RANET_INPUT, 4);
    let logits = run_ranet(&w, &x, &priors).unwrap();
    assert!(logits.iter().all(|v| v.is_finite()));
    let r = ReferenceChoice::argmax(&logits);
    assert!(r.index() < 3);
    assert_eq!(logits, run_ranet(&w, &x, &priors).unwrap());
    let small = noise_image(9, 112, 112, 4);
    assert!(matches!(run_ranet(&w, &small, &priors), Err(ModelError::Shape(_))));
}

#[test]
fn seeded_init_is_deterministic() {
    for arch in [
        Architecture::PreDn(PreDnConfig::toy()),
        Architecture::Pcf(PcfConfig::toy(ReferenceChoice::Over)),
        Architecture::RaNet(RaNetConfig::toy()),
    ] {
        let a = ModelWeights::init(arch.clone(), 11);
        assert_eq!(a, ModelWeights::init(arch.clone(), 11));
        assert_ne!(a, ModelWeights::init(arch, 12));
        assert!(a.all_finite());
    }
}

#[test]
fn checkpoint_round_trip_and_faults() {
    let dir = tempfile::tempdir().unwrap();
    let w = pcf(ReferenceChoice::Under, 9);
    save_weights(&w, dir.path()).unwrap();
    let back = load_weights(dir.path()).unwrap();
    assert_eq!(back, w);
    let other = tempfile::tempdir().unwrap();
    save_weights(&back, other.path()).unwrap();
    for f in ["meta.json", "params.f32"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(other.path().join(f)).unwrap());
    }

    let params = dir.path().join("params.f32");
    let mut bytes = std::fs::read(&params).unwrap();
    bytes[10] ^= 0x40;
    std::fs::write(&params, &bytes).unwrap();
    assert!(matches!(load_weights(dir.path()), Err(ModelError::Parse { .. })));
    std::fs::remove_file(&params).unwrap();
    assert!(matches!(load_weights(dir.path()), Err(ModelError::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn shape_closure(h4 in 8usize..=128, w4 in 8usize..=32) {
        // spans 32..512 on one side, 32..128 on the other
        let (h, w) = (h4 * 4, w4 * 4);
        let (h, w) = if h4 % 2 == 0 { (h, w) } else { (w, h) };
        let pd = ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 1);
        let x = TonemappedImage { pixels: noise_image(3, h, w, 5), operator: TmoOperator::mu_law() };
        let y = run_predn(&pd, &x, 1600.0).unwrap();
        prop_assert_eq!(y.pixels.dims(), x.pixels.dims());
        let out = run_pcf(&pcf(ReferenceChoice::Under, 2), &frames(h, w), ReferenceChoice::Under).unwrap();
        prop_assert_eq!((out.height(), out.width()), (h, w));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
