//! Finite-difference checks of every network at tiny sizes, in f64.

use jointhdr::imaging::ReferenceChoice;
use jointhdr::loss::total_loss_graph;
use jointhdr::models::gradcheck::check_gradients;
use jointhdr::models::{
    drdb_forward, msa_attention, pcf_forward, predn_forward, ranet_forward, Architecture, FrameInput, ModelWeights,
    PcfConfig, PreDnConfig, RaNetConfig,
};
use jointhdr_autograd::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-3;

fn random(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn tiny_pcf(reference: ReferenceChoice) -> PcfConfig {
    PcfConfig { preset: "tiny".into(), widths: vec![2, 3, 4], growth: 2, reference }
}

fn randomize(w: &mut ModelWeights, name: &str, seed: u64) {
    let t = w.get_mut(name).unwrap();
    *t = random(t.shape(), -0.3, 0.3, seed).cast();
}

fn assert_report(what: &str, r: jointhdr::models::gradcheck::GradCheckReport) {
    println!("{what}: {}/{} within {TOL}, max rel {:.2e}", r.passed, r.checked, r.max_rel_error);
    assert!(r.checked > 0);
    assert!(r.pass_rate() >= 0.95, "{what}: pass rate {}", r.pass_rate());
}

fn target(g: &mut Graph<f64>, shape: &[usize], seed: u64) -> Var {
    g.input(random(shape, 0.0, 1.0, seed))
}

#[test]
fn msa_attention_gradients() {
    let w = ModelWeights::init(Architecture::Pcf(tiny_pcf(ReferenceChoice::Medium)), 1);
    let r = check_gradients(&w, &["att0"], H, TOL, |g, p| {
        let f_ref = g.input(random(&[1, 2, 4, 4], -1.0, 1.0, 10));
        let f_i = g.input(random(&[1, 2, 4, 4], -1.0, 1.0, 11));
        let (out, _) = msa_attention(g, p, 0, f_ref, f_i)?;
        let t = target(g, &[1, 2, 4, 4], 12);
        Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
    })
    .unwrap();
    assert_report("msa", r);
}

#[test]
fn drdb_gradients() {
    let w = ModelWeights::init(Architecture::Pcf(tiny_pcf(ReferenceChoice::Medium)), 2);
    let r = check_gradients(&w, &["drdb0"], H, TOL, |g, p| {
        let f = g.input(random(&[1, 2, 8, 8], -1.0, 1.0, 20));
        let out = drdb_forward(g, p, "drdb0", f)?;
        let t = target(g, &[1, 2, 8, 8], 21);
        Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
    })
    .unwrap();
    assert_report("drdb", r);
}

#[test]
fn predn_gradients() {
    let cfg = PreDnConfig { preset: "tiny".into(), base: 2, depth: 3 };
    let arch = Architecture::PreDn(cfg.clone());
    assert!(arch.param_count() <= 5000);
    let mut w = ModelWeights::init(arch, 3);
    randomize(&mut w, "head.weight", 30);
    let r = check_gradients(&w, &[], H, TOL, |g, p| {
        let x = g.input(random(&[1, 3, 8, 8], 0.2, 0.8, 31));
        let iso = g.input(Tensor::full(&[1, 1, 8, 8], 0.25));
        let out = predn_forward(g, &cfg, p, x, iso)?;
        let t = target(g, &[1, 3, 8, 8], 32);
        Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
    })
    .unwrap();
    assert_report("predn", r);
}

#[test]
fn pcf_gradients() {
    for reference in ReferenceChoice::ALL {
        let cfg = tiny_pcf(reference);
        let arch = Architecture::Pcf(cfg.clone());
        assert!(arch.param_count() <= 5000, "{}", arch.param_count());
        let mut w = ModelWeights::init(arch, 4);
        // the zero-initialized head would zero every upstream gradient
        randomize(&mut w, "head.weight", 41);
        let r = check_gradients(&w, &[], H, TOL, |g, p| {
            let frames: Vec<FrameInput> = (0..3)
                .map(|i| FrameInput {
                    ldr: g.input(random(&[1, 3, 8, 8], 0.2, 0.8, 40 + i)),
                    hdr: g.input(random(&[1, 3, 8, 8], 0.2, 0.6, 50 + i)),
                })
                .collect();
            let frames: [FrameInput; 3] = frames.try_into().unwrap();
            let out = pcf_forward(g, &cfg, p, &frames, reference)?;
            let t = target(g, &[1, 3, 8, 8], 60);
            Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
        })
        .unwrap();
        assert_report(&format!("pcf/{reference}"), r);
    }
}

#[test]
fn ranet_gradients() {
    let cfg = RaNetConfig { preset: "tiny".into(), widths: vec![2, 2, 2, 2, 2], hidden: 4 };
    let w = ModelWeights::init(Architecture::RaNet(cfg.clone()), 5);
    // only the dense head and last stage: full 224² FD is slow
    let r = check_gradients(&w, &["fc", "conv4"], H, TOL, |g, p| {
        let x = g.input(random(&[2, 9, 224, 224], 0.0, 1.0, 70));
        let pr = g.input(random(&[2, 5], -1.0, 1.0, 71));
        let logits = ranet_forward(g, &cfg, p, x, pr)?;
        Ok(g.softmax_cross_entropy(logits, &[0, 2])?)
    })
    .unwrap();
    assert_report("ranet", r);
}
