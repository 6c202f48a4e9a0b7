//! Acceptance run: one PASS/FAIL line per criterion, tolerances fixed here.
//! Exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use jointhdr::image::Image;
use jointhdr::imaging::{
    inv_tmo_apply, tmo_apply, Gamma, LinearImage, ReferenceChoice, TmoOperator, TonemappedImage,
    DEFAULT_MU,
};
use jointhdr::loss::total_loss_graph;
use jointhdr::metrics::{psnr, Metric, MetricDomain};
use jointhdr::models::gradcheck::{check_gradients, GradCheckReport};
use jointhdr::models::{
    drdb_forward, msa_attention, pcf_forward, predn_forward, run_predn, Architecture, FrameInput, ModelWeights,
    PcfConfig, PreDnConfig, RaNetConfig,
};
use jointhdr::pipeline::{evaluate, fuse, inverse, load_pipeline, prepare_frames, save_pipeline, score_paths};
use jointhdr::pipeline::{TrainedPipeline, Variant};
use jointhdr::sim::{
    make_sample, read_dataset, sensor_signal, simulate_exposure, synth_hdr_scene, write_dataset_split, CaptureSettings,
    DatasetSample, DatasetSpec, MotionSpec, NoiseSpec, SampleSpec, SceneSpec, DEFAULT_EXPOSURES, RADIANCE_CEILING,
};
use jointhdr::training::{
    ablate_tmo, denoise_pairs, label_paths, pcf_items, ranet_examples, rule_labels, train_pcf, train_predn,
    train_ranet, LogRecord, ScheduleKind, TrainConfig, RULE_ISO_BANDS,
};
use jointhdr_autograd::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// pinned tolerances
const TMO_ROUND_TRIP: f64 = 1e-6;
const TMO_RUNTIME: Duration = Duration::from_secs(1);
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_PASS_RATE: f64 = 0.95;
const GRAD_RUNTIME: Duration = Duration::from_secs(300);
const ALIGN_TOL: f64 = 1e-6;
const OVERFIT_PSNR_MU: f64 = 40.0;
const OVERFIT_MAX_STEPS: usize = 2000;
const OVERFIT_RUNTIME: Duration = Duration::from_secs(15 * 60);
const DENOISE_GAIN_DB: f64 = 3.0;
const SELECTOR_ACCURACY: f64 = 0.90;
const SELECTIVE_SLACK_DB: f64 = 0.2;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn c1_tmo_inverse_pairs() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut xs: Vec<f32> = (0..998).map(|_| rng.gen::<f32>()).collect();
    xs.extend([0.0, 1.0]);
    let x = Image::new(1, 1, xs.len(), xs).unwrap();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for kind in TmoOperator::KINDS {
        let op = TmoOperator::from_kind(kind, DEFAULT_MU).unwrap();
        let y = tmo_apply(&x, op).map_err(|e| e.to_string())?;
        let back = inv_tmo_apply(&y.pixels, op).map_err(|e| e.to_string())?;
        let err = back.zip_map(&x, |a, b| (a - b).abs()).min_max().1 as f64;
        worst = worst.max(err);
        detail.push(format!("{kind} {err:.1e}"));
    }
    let mu = TmoOperator::mu_law();
    let anchors = mu.forward(0.0) == 0.0 && mu.forward(1.0) == 1.0;
    let dt = t.elapsed();
    check(
        worst <= TMO_ROUND_TRIP && anchors && dt < TMO_RUNTIME,
        format!("max |inv(fwd(x))-x| {worst:.1e} over 1000 samples [{}]; mu-law T(0)=0, T(1)=1", detail.join(", ")),
        format!("worst {worst:.1e} (tol {TMO_ROUND_TRIP:.0e}), anchors {anchors}, {dt:?}"),
    )
}

fn random(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn randomize_head(w: &mut ModelWeights, seed: u64) {
    let t = w.get_mut("head.weight").unwrap();
    *t = random(t.shape(), -0.3, 0.3, seed).cast();
}

fn c2_gradient_suite() -> Outcome {
    let t = Instant::now();
    let tiny = |r| PcfConfig { preset: "tiny".into(), widths: vec![2, 3, 4], growth: 2, reference: r };
    let h = 1e-6;
    let target = |g: &mut Graph<f64>, shape: &[usize], seed| -> Var { g.input(random(shape, 0.0, 1.0, seed)) };
    let err = |e: jointhdr::models::ModelError| e.to_string();
    let mut reports: Vec<(String, GradCheckReport)> = Vec::new();

    let w = ModelWeights::init(Architecture::Pcf(tiny(ReferenceChoice::Medium)), 1);
    reports.push((
        "msa".into(),
        check_gradients(&w, &["att0"], h, GRAD_REL_TOL, |g, p| {
            let f_ref = g.input(random(&[1, 2, 4, 4], -1.0, 1.0, 10));
            let f_i = g.input(random(&[1, 2, 4, 4], -1.0, 1.0, 11));
            let (out, _) = msa_attention(g, p, 0, f_ref, f_i)?;
            let t = target(g, &[1, 2, 4, 4], 12);
            Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
        })
        .map_err(err)?,
    ));
    reports.push((
        "drdb".into(),
        check_gradients(&w, &["drdb0"], h, GRAD_REL_TOL, |g, p| {
            let f = g.input(random(&[1, 2, 8, 8], -1.0, 1.0, 20));
            let out = drdb_forward(g, p, "drdb0", f)?;
            let t = target(g, &[1, 2, 8, 8], 21);
            Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
        })
        .map_err(err)?,
    ));
    let pd = PreDnConfig { preset: "tiny".into(), base: 2, depth: 3 };
    let mut w = ModelWeights::init(Architecture::PreDn(pd.clone()), 3);
    randomize_head(&mut w, 30);
    reports.push((
        "predn".into(),
        check_gradients(&w, &[], h, GRAD_REL_TOL, |g, p| {
            let x = g.input(random(&[1, 3, 8, 8], 0.2, 0.8, 31));
            let iso = g.input(Tensor::full(&[1, 1, 8, 8], 0.25));
            let out = predn_forward(g, &pd, p, x, iso)?;
            let t = target(g, &[1, 3, 8, 8], 32);
            Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
        })
        .map_err(err)?,
    ));
    for r in ReferenceChoice::ALL {
        let cfg = tiny(r);
        let mut w = ModelWeights::init(Architecture::Pcf(cfg.clone()), 4);
        randomize_head(&mut w, 41);
        reports.push((
            format!("pcf/{r}"),
            check_gradients(&w, &[], h, GRAD_REL_TOL, |g, p| {
                let frames: [FrameInput; 3] = std::array::from_fn(|i| FrameInput {
                    ldr: g.input(random(&[1, 3, 8, 8], 0.2, 0.8, 40 + i as u64)),
                    hdr: g.input(random(&[1, 3, 8, 8], 0.2, 0.6, 50 + i as u64)),
                });
                let out = pcf_forward(g, &cfg, p, &frames, r)?;
                let t = target(g, &[1, 3, 8, 8], 60);
                Ok(total_loss_graph(g, out, t, 0.5).unwrap().total)
            })
            .map_err(err)?,
        ));
    }
    let dt = t.elapsed();
    let worst = reports.iter().map(|(_, r)| r.pass_rate()).fold(1.0, f64::min);
    let summary: Vec<String> =
        reports.iter().map(|(n, r)| format!("{n} {}/{}", r.passed, r.checked)).collect();
    check(
        worst >= GRAD_PASS_RATE && dt < GRAD_RUNTIME,
        format!("rel err <= {GRAD_REL_TOL:.0e}: {}", summary.join(", ")),
        format!("lowest pass rate {worst:.3} [{}], {dt:?}", summary.join(", ")),
    )
}

fn c3_exposure_consistency() -> Outcome {
    let scene = synth_hdr_scene(&SceneSpec::new(3, 48, 48)).map_err(|e| e.to_string())?;
    // scale so even the longest exposure stays unclipped
    let peak = scene.radiance().0.min_max().1 as f64;
    let radiance = LinearImage(scene.radiance().0.map(|v| (v as f64 * 0.9 / (peak * DEFAULT_EXPOSURES[2])) as f32));
    let mut pre = 0.0f64;
    let mut post = 0.0f64;
    for gamma in [Gamma::Rgb, Gamma::Raw] {
        let step = 1.0 / ((1u32 << gamma.bit_depth()) - 1) as f64;
        let noise = NoiseSpec::noiseless();
        let aligned: Vec<Image> = DEFAULT_EXPOSURES
            .iter()
            .map(|&t| sensor_signal(&radiance, t, &noise, 100.0, 0).map(|v| (v as f64 / t) as f32))
            .collect();
        for a in &aligned[1..] {
            pre = pre.max(a.zip_map(&aligned[0], |x, y| (x - y).abs()).min_max().1 as f64);
        }
        for (i, &t) in DEFAULT_EXPOSURES.iter().enumerate() {
            let s = CaptureSettings { exposure_time: t, iso: 100.0, ev: 0.0, gamma, noise, seed: i as u64 };
            let frame = simulate_exposure(&radiance, &s).map_err(|e| e.to_string())?;
            let ideal = radiance.0.map(|v| ((v as f64 * t).powf(1.0 / gamma.value())) as f32);
            let err = frame.pixels().zip_map(&ideal, |a, b| (a - b).abs()).min_max().1 as f64;
            post = post.max(err / step);
        }
    }
    check(
        pre <= ALIGN_TOL && post <= 1.0,
        format!("aligned radiance spread {pre:.1e} pre-quantization; codes within {post:.2} step (RGB and RAW)"),
        format!("pre-quantization spread {pre:.1e} (tol {ALIGN_TOL:.0e}), post {post:.2} steps"),
    )
}

fn psnr_mu_of_path(w: &ModelWeights, s: &DatasetSample, r: ReferenceChoice, predn: Option<&ModelWeights>) -> f64 {
    let tmo = TmoOperator::mu_law();
    let stages = prepare_frames(&s.variant(r), predn, tmo, RADIANCE_CEILING).unwrap();
    let out = inverse(&fuse(w, &stages, r, tmo).unwrap()).unwrap();
    psnr(&out.0, &s.ground_truth.0, MetricDomain::Mu).unwrap()
}

fn c4_overfit() -> Outcome {
    let t = Instant::now();
    let samples: Vec<DatasetSample> = (0..4)
        .map(|i| {
            let mut s = SampleSpec::new(SceneSpec::new(10 + i, 128, 128), 100.0);
            s.noise = NoiseSpec::noiseless();
            make_sample(&s).unwrap()
        })
        .collect();
    let r = ReferenceChoice::Medium;
    let items = pcf_items(&samples, None, r, TmoOperator::mu_law()).map_err(|e| e.to_string())?;
    let steps = 600;
    let cfg = TrainConfig {
        epochs: steps,
        batch_size: 4,
        lr0: 1e-3,
        decay_gamma: 0.5,
        decay_every_epochs: 200,
        patch_size: 64,
        seed: 1,
        ..TrainConfig::toy_pcf()
    };
    let init = ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), 1);
    let before: f64 = samples.iter().map(|s| psnr_mu_of_path(&init, s, r, None)).sum::<f64>() / 4.0;
    let out = train_pcf(&cfg, init, &items).map_err(|e| e.to_string())?;
    let after: f64 = samples.iter().map(|s| psnr_mu_of_path(&out.weights, s, r, None)).sum::<f64>() / 4.0;
    let dt = t.elapsed();
    check(
        after >= OVERFIT_PSNR_MU && out.log.len() <= OVERFIT_MAX_STEPS && dt <= OVERFIT_RUNTIME,
        format!(
            "training-set PSNR-mu {after:.2} dB (from {before:.2}) after {} steps on 4 x 128^2",
            out.log.len()
        ),
        format!("PSNR-mu {after:.2} dB after {} steps, {dt:?}", out.log.len()),
    )
}

/// Denoiser shared by the denoising, selection and failure-case criteria.
fn c5_denoising(predn_out: &mut Option<ModelWeights>) -> Outcome {
    let isos = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0];
    let train: Vec<DatasetSample> = (0..12)
        .map(|i| make_sample(&SampleSpec::new(SceneSpec::new(1000 + i, 64, 64), isos[i as usize % 6])).unwrap())
        .collect();
    let tmo = TmoOperator::mu_law();
    let pairs = denoise_pairs(&train, tmo).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: 160, lr0: 3e-3, decay_every_epochs: 60, seed: 5, ..TrainConfig::toy_predn() };
    let init = ModelWeights::init(Architecture::PreDn(PreDnConfig::toy()), 0);
    let out = train_predn(&cfg, init, &pairs).map_err(|e| e.to_string())?;
    let mut gains = Vec::new();
    let mut rows = Vec::new();
    for iso in [400.0, 1600.0, 3200.0] {
        let test: Vec<DatasetSample> =
            (0..3).map(|i| make_sample(&SampleSpec::new(SceneSpec::new(9000 + i, 64, 64), iso)).unwrap()).collect();
        let (mut noisy, mut clean) = (0.0, 0.0);
        let pairs = denoise_pairs(&test, tmo).map_err(|e| e.to_string())?;
        for p in &pairs {
            let x = TonemappedImage { pixels: p.input.clone(), operator: tmo };
            let d = run_predn(&out.weights, &x, iso).map_err(|e| e.to_string())?;
            noisy += psnr(&p.input, &p.target, MetricDomain::Linear).unwrap();
            clean += psnr(&d.pixels, &p.target, MetricDomain::Linear).unwrap();
        }
        let n = pairs.len() as f64;
        rows.push(format!("ISO {iso}: {:.2} -> {:.2}", noisy / n, clean / n));
        gains.push((clean - noisy) / n);
    }
    let gain = gains.iter().sum::<f64>() / 3.0;
    *predn_out = Some(out.weights);
    check(
        gain >= DENOISE_GAIN_DB,
        format!(
            "held-out PSNR (mu-law frames) gain {gain:.2} dB [{}], {} steps",
            rows.join("; "),
            out.log.len()
        ),
        format!("gain {gain:.2} dB [{}]", rows.join("; ")),
    )
}

fn iso_clear_of_bands(rng: &mut impl Rng) -> f64 {
    loop {
        let iso = (rng.gen_range(100f64.log2()..3200f64.log2())).exp2().round();
        if RULE_ISO_BANDS.iter().all(|&b| (iso / b).log2().abs() > 0.2) {
            return iso;
        }
    }
}

fn c6_selector_accuracy() -> Outcome {

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let make = |n: usize, base: u64, rng: &mut ChaCha8Rng| -> Vec<DatasetSample> {
        (0..n)
            .map(|i| {
                let mut s = SampleSpec::new(SceneSpec::new(base + i as u64, 32, 32), iso_clear_of_bands(rng));
                s.reference = ReferenceChoice::ALL[i % 3];
                make_sample(&s).unwrap()
            })
            .collect()
    };
    let train = make(60, 6000, &mut rng);
    let test = make(30, 7000, &mut rng);
    let tmo = TmoOperator::mu_law();
    let ex_train = ranet_examples(&train, &rule_labels(&train), tmo).map_err(|e| e.to_string())?;
    let ex_test = ranet_examples(&test, &rule_labels(&test), tmo).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: 80, seed: 6, ..TrainConfig::toy_ranet() };
    let init = ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 6);
    let (_, rep) = train_ranet(&cfg, init, &ex_train, &ex_test).map_err(|e| e.to_string())?;
    check(
        rep.heldout_accuracy >= SELECTOR_ACCURACY && !rep.degenerate,
        format!(
            "held-out accuracy {:.1}% on 30 samples with ISO-rule labels (train {:.1}%)",
            100.0 * rep.heldout_accuracy,
            100.0 * rep.train_accuracy
        ),
        format!("held-out accuracy {:.1}%", 100.0 * rep.heldout_accuracy),
    )
}

/// Trains the three paths, labels a disjoint split with each sample's
/// winning path and trains the selector on those labels. Labels taken on
/// the paths' own training samples are biased toward whichever path
/// memorized them best.
fn trained_pipeline(predn: &ModelWeights) -> Result<(TrainedPipeline, Vec<DatasetSample>, String), String> {
    let (n_paths, n_labels) = (24, 72);
    let spec = DatasetSpec::new(77, n_paths + n_labels, 15, 64);
    let all = spec.generate().map_err(|e| e.to_string())?;
    let (train, rest) = all.split_at(n_paths);
    let (label_set, test) = rest.split_at(n_labels);
    let tmo = TmoOperator::mu_law();
    let cfg = TrainConfig { epochs: 80, decay_every_epochs: 30, seed: 7, ..TrainConfig::toy_pcf() };
    let mut paths = Vec::new();
    for r in ReferenceChoice::ALL {
        let items = pcf_items(train, Some(predn), r, tmo).map_err(|e| e.to_string())?;
        let init = ModelWeights::init(Architecture::Pcf(PcfConfig::toy(r)), 70 + r.index() as u64);
        paths.push(train_pcf(&cfg, init, &items).map_err(|e| e.to_string())?.weights);
    }
    let paths: [ModelWeights; 3] = paths.try_into().unwrap();
    let pipe = TrainedPipeline::new(Some(predn.clone()), paths, None, tmo).map_err(|e| e.to_string())?;
    let winners = |s: &[DatasetSample]| -> Result<Vec<ReferenceChoice>, String> {
        Ok(label_paths(&pipe, s, Metric::PsnrMu).map_err(|e| e.to_string())?.iter().map(|l| l.winner).collect())
    };
    let (l_train, l_test) = (winners(label_set)?, winners(test)?);
    let count = |l: &[ReferenceChoice]| ReferenceChoice::ALL.map(|r| l.iter().filter(|&&x| x == r).count());
    let ex_train = ranet_examples(label_set, &l_train, tmo).map_err(|e| e.to_string())?;
    let ex_test = ranet_examples(test, &l_test, tmo).map_err(|e| e.to_string())?;
    let rcfg = TrainConfig { epochs: 60, seed: 8, ..TrainConfig::toy_ranet() };
    let init = ModelWeights::init(Architecture::RaNet(RaNetConfig::toy()), 8);
    let (out, rep) = train_ranet(&rcfg, init, &ex_train, &ex_test).map_err(|e| e.to_string())?;
    let pipe = pipe.with_ranet(out.weights).map_err(|e| e.to_string())?;
    let note = format!(
        "label counts u/m/o selector-train {:?} test {:?}, selector held-out {:.0}%",
        count(&l_train),
        count(&l_test),
        100.0 * rep.heldout_accuracy
    );
    Ok((pipe, test.to_vec(), note))
}

fn c7_oracle_dominance(pipe: &TrainedPipeline, test: &[DatasetSample], note: &str) -> Outcome {
    let ev = evaluate(pipe, test, &Variant::TABLE, Metric::PsnrMu).map_err(|e| e.to_string())?;
    let fixed: Vec<&jointhdr::metrics::MetricReport> =
        ReferenceChoice::ALL.iter().map(|&r| ev.report(Variant::Fixed(r)).unwrap()).collect();
    let oracle = ev.report(Variant::OracleSelective).unwrap();
    let hits = (0..test.len())
        .filter(|&i| {
            let best = fixed.iter().map(|r| r.records[i].psnr_mu).fold(f64::NEG_INFINITY, f64::max);
            oracle.records[i].psnr_mu == best
        })
        .count();
    let best_fixed = fixed.iter().map(|r| r.mean(Metric::PsnrMu)).fold(f64::NEG_INFINITY, f64::max);
    let selective = ev.report(Variant::Selective).unwrap().mean(Metric::PsnrMu);
    println!("{}", ev.table());
    check(
        hits == test.len() && selective >= best_fixed - SELECTIVE_SLACK_DB,
        format!(
            "oracle = per-sample max on {hits}/{}; selective {selective:.2} dB vs best fixed {best_fixed:.2} dB ({note})",
            test.len()
        ),
        format!(
            "oracle hits {hits}/{}, selective {selective:.2} vs best fixed {best_fixed:.2} - {SELECTIVE_SLACK_DB} ({note})",
            test.len()
        ),
    )
}

fn c8_tmo_ablation() -> Outcome {

    let spec = DatasetSpec::new(88, 6, 4, 64);
    let all = spec.generate().map_err(|e| e.to_string())?;
    let (train, test) = all.split_at(6);
    let ops: Vec<TmoOperator> = TmoOperator::KINDS.iter().map(|k| TmoOperator::from_kind(k, DEFAULT_MU).unwrap()).collect();
    let cfg = TrainConfig { epochs: 60, decay_every_epochs: 30, seed: 9, ..TrainConfig::toy_pcf() };
    let rows = ablate_tmo(&cfg, &PcfConfig::toy(ReferenceChoice::Medium), ReferenceChoice::Medium, &ops, train, test)
        .map_err(|e| e.to_string())?;
    let table: Vec<(String, [f64; 4])> = rows.iter().map(|r| (r.tmo.clone(), r.means)).collect();
    println!("{}", jointhdr::metrics::render_table("tmo", &table));
    let get = |name: &str| rows.iter().find(|r| r.tmo == name).map(|r| r.means[0]).unwrap_or(f64::NAN);
    let (mu, lin) = (get("mu_law"), get("linear"));
    check(
        rows.len() == 5 && mu >= lin,
        format!("PSNR-mu: mu_law {mu:.2} dB >= linear {lin:.2} dB; 5-row table above"),
        format!("mu_law {mu:.2} dB vs linear {lin:.2} dB ({} rows)", rows.len()),
    )
}

fn c9_failure_case(pipe: &TrainedPipeline) -> Outcome {
    let mut spec = SampleSpec::new(SceneSpec { n_foreground_objects: 1, ..SceneSpec::new(4242, 64, 64) }, 200.0);
    spec.motion = MotionSpec { global_shift: (0, 0), object_shifts: vec![(5, 3)], occlusion: true };
    let s = make_sample(&spec).map_err(|e| e.to_string())?;
    // saturated in the medium reference frame (any channel at full code)
    let med = s.static_frames[1].pixels();
    let (h, w) = (med.height(), med.width());
    let mask: Vec<bool> = (0..h * w).map(|i| (0..3).any(|c| med.plane(c)[i] >= 254.5 / 255.0)).collect();
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err("constructed scene has no saturated pixels".into());
    }
    let ps = score_paths(pipe, &s, "occlusion").map_err(|e| e.to_string())?;
    let tmo = TmoOperator::mu_law();
    let gt = tmo_apply(&s.ground_truth.0, tmo).unwrap().pixels;
    let masked = |out: &Image| {
        let o = tmo_apply(&out.map(|v| v.clamp(0.0, 1.0)), tmo).unwrap().pixels;
        let mut acc = 0.0;
        for c in 0..3 {
            for i in (0..h * w).filter(|&i| mask[i]) {
                acc += ((o.plane(c)[i] - gt.plane(c)[i]) as f64).powi(2);
            }
        }
        acc / (3 * n) as f64
    };
    let (under, medium) = (masked(&ps.outputs[0]), masked(&ps.outputs[1]));
    check(
        under < medium,
        format!("masked mu-law MSE over {n} saturated px: under-ref {under:.2e} < medium-ref {medium:.2e}"),
        format!("under-ref {under:.2e} vs medium-ref {medium:.2e} over {n} px"),
    )
}

fn tree_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism(pipe: &TrainedPipeline) -> Outcome {
    let data = DatasetSpec::new(10, 3, 1, 32).generate().map_err(|e| e.to_string())?;
    let pairs = denoise_pairs(&data, TmoOperator::mu_law()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: 3, batch_size: 4, patch_size: 16, seed: 10, schedule: ScheduleKind::Step, ..TrainConfig::toy_predn() };
    let arch = Architecture::PreDn(PreDnConfig { preset: "toy".into(), base: 4, depth: 2 });
    let key = |log: &[LogRecord]| log.iter().map(LogRecord::trace_key).collect::<Vec<_>>();
    let a = train_predn(&cfg, ModelWeights::init(arch.clone(), 1), &pairs).map_err(|e| e.to_string())?;
    let b = train_predn(&cfg, ModelWeights::init(arch, 1), &pairs).map_err(|e| e.to_string())?;
    let traces = key(&a.log) == key(&b.log) && a.weights == b.weights;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    write_dataset_split(&data, &d1, 3).map_err(|e| e.to_string())?;
    let back = read_dataset(&d1).map_err(|e| e.to_string())?;
    write_dataset_split(&back, &d2, 3).map_err(|e| e.to_string())?;
    let dataset = back == data && tree_bytes(&d1) == tree_bytes(&d2);

    let (p1, p2) = (tmp.path().join("p1"), tmp.path().join("p2"));
    save_pipeline(pipe, &p1).map_err(|e| e.to_string())?;
    let loaded = load_pipeline(&p1).map_err(|e| e.to_string())?;
    save_pipeline(&loaded, &p2).map_err(|e| e.to_string())?;
    let bundle = tree_bytes(&p1) == tree_bytes(&p2);
    check(
        traces && dataset && bundle,
        format!("{} identical loss records across runs; dataset and pipeline containers byte-identical after round trip", a.log.len()),
        format!("traces {traces}, dataset {dataset}, pipeline {bundle}"),
    )
}

/// `ACCEPTANCE_ONLY=7,9` restricts the run; prerequisites still train.
fn selection() -> Option<Vec<usize>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() {
    let start = Instant::now();
    let only = selection();
    let wanted = |id: usize| only.as_ref().map_or(true, |v| v.contains(&id));
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let r = f();
        let dt = t.elapsed();
        let (tag, msg) = match &r {
            Ok(m) => ("PASS", m.clone()),
            Err(m) => ("FAIL", m.clone()),
        };
        println!("[{tag}] {id:>2} {name}: {msg} ({:.1}s)", dt.as_secs_f64());
        results.push((id, name, r, dt));
    };
    run(1, "tmo inverse pairs", &mut c1_tmo_inverse_pairs);
    run(2, "gradient suite", &mut c2_gradient_suite);
    run(3, "exposure consistency", &mut c3_exposure_consistency);
    run(4, "fusion overfit", &mut c4_overfit);
    let needs_pipeline = [7, 9, 10].iter().any(|&i| wanted(i));
    let mut predn = None;
    if wanted(5) {
        run(5, "denoising gain", &mut || c5_denoising(&mut predn));
    } else if needs_pipeline {
        let _ = c5_denoising(&mut predn);
    }
    run(6, "selector accuracy", &mut c6_selector_accuracy);
    let trained = if needs_pipeline {
        predn.as_ref().ok_or_else(|| "denoiser unavailable".to_string()).and_then(trained_pipeline)
    } else {
        Err("not requested".into())
    };
    let fail = |e: &String| -> Outcome { Err(format!("pipeline training failed: {e}")) };
    match &trained {
        Ok((pipe, test, note)) => run(7, "oracle-selective dominance", &mut || c7_oracle_dominance(pipe, test, note)),
        Err(e) => run(7, "oracle-selective dominance", &mut || fail(e)),
    }
    run(8, "tmo ablation direction", &mut c8_tmo_ablation);
    match &trained {
        Ok((pipe, _, _)) => {
            run(9, "occlusion-in-saturation case", &mut || c9_failure_case(pipe));
            run(10, "determinism and persistence", &mut || c10_determinism(pipe));
        }
        Err(e) => {
            run(9, "occlusion-in-saturation case", &mut || fail(e));
            run(10, "determinism and persistence", &mut || fail(e));
        }
    }
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {}/{} passed in {:.0}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
