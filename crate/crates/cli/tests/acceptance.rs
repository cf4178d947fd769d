//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use tierflow::dataset::*;
use tierflow::diagnostics::*;
use tierflow::ftl::*;
use tierflow::nn::Activation;
use tierflow::vae::{train_vae, VaeConfig};
use tierflow::{AdamState, DenseNetwork, RngStream, Tensor2};
use tierflow_cli::{cmd_train, RunOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn benchmark_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/synth_benchmark.json");
    ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn benchmark_for_seed(seed: u64) -> (ExperimentConfig, DataContext) {
    let mut config = benchmark_config();
    config.seed = seed;
    config.synth.as_mut().unwrap().seed = seed;
    let data = config.load_data(Path::new(".")).unwrap();
    (config, data)
}

fn tier(lo: u32, hi: u32) -> TierSpec {
    TierSpec::new(lo, hi).unwrap()
}

// 1 -----------------------------------------------------------------------

fn kinked(net: &DenseNetwork, batch: &Tensor2) -> bool {
    let mut x = batch.clone();
    for layer in net.layers() {
        let (pre, post) = layer.forward(&x).unwrap();
        if layer.activation() == Activation::ReLU && pre.data().iter().any(|z| z.abs() < 1e-3) {
            return true;
        }
        x = post;
    }
    false
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(1);
    let h = 1e-5;
    let (mut checked, mut worst, mut failures) = (0usize, 0.0f64, 0usize);
    let mut nets = 0;
    while nets < 20 {
        let depth = 1 + rng.index(4);
        let input = 1 + rng.index(10);
        let sizes: Vec<usize> = (0..depth).map(|_| 1 + rng.index(12)).collect();
        let acts: Vec<Activation> = (0..depth)
            .map(|i| {
                if (i + nets) % 2 == 0 {
                    Activation::ReLU
                } else {
                    Activation::Sigmoid
                }
            })
            .collect();
        let mut net = DenseNetwork::init(&sizes, input, &acts, &mut rng).unwrap();
        if net.param_count() > 500 {
            continue;
        }
        for layer in net.layers_mut() {
            for b in layer.biases_mut() {
                *b = rng.uniform_range(-0.2, 0.2);
            }
        }
        let sample = |rng: &mut RngStream, r, c| {
            Tensor2::from_vec(
                r,
                c,
                (0..r * c).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            )
            .unwrap()
        };
        let mut x = sample(&mut rng, 3, input);
        while kinked(&net, &x) {
            x = sample(&mut rng, 3, input);
        }
        let g = sample(&mut rng, 3, net.output_dim());
        let loss = |n: &DenseNetwork| -> f64 {
            let out = n.predict(&x).unwrap();
            out.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let acts = net.forward(&x).unwrap();
        let grads = net.backward(&acts, &g).unwrap();
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        for (s, slice) in analytic.iter().enumerate() {
            for (j, &a) in slice.iter().enumerate() {
                let mut plus = net.clone();
                plus.params_mut()[s][j] += h;
                let mut minus = net.clone();
                minus.params_mut()[s][j] -= h;
                let n = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let diff = (a - n).abs();
                // Components below 1e-8 are compared absolutely.
                let ok = if a.abs() < 1e-8 {
                    diff <= 1e-8
                } else {
                    let rel = diff / a.abs();
                    worst = worst.max(rel);
                    rel <= 1e-4
                };
                if !ok {
                    failures += 1;
                }
                checked += 1;
            }
        }
        nets += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(30),
        format!("20 networks, {checked} components, worst relative error {worst:.2e}, {failures} over 1e-4, {elapsed:.2?}"),
    )
}

// 2 -----------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut rng = RngStream::new(2);
    let n = 32;
    let lr = 0.01;
    let mut params: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut theta = params.clone();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut adam = AdamState::new(&[n], lr);
    for t in 1..=100 {
        let grads: Vec<f64> = (0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        adam.step(&mut [params.as_mut_slice()], &[grads.as_slice()])
            .unwrap();
        for i in 0..n {
            m[i] = 0.9 * m[i] + (1.0 - 0.9) * grads[i];
            v[i] = 0.999 * v[i] + (1.0 - 0.999) * grads[i] * grads[i];
            let m_hat = m[i] / (1.0 - 0.9f64.powi(t));
            let v_hat = v[i] / (1.0 - 0.999f64.powi(t));
            theta[i] -= lr * m_hat / (v_hat.sqrt() + 1e-8);
        }
    }
    let worst = params
        .iter()
        .zip(&theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!("100 steps x {n} scalars, max deviation {worst:.2e}"),
    )
}

// 3 -----------------------------------------------------------------------

fn percentile_oracle(scores: &[u32], p: f64) -> u32 {
    let mut hist = vec![0usize; MAX_SCORE as usize + 1];
    for &s in scores {
        hist[s as usize] += 1;
    }
    let need = (100.0 - p) * scores.len() as f64;
    let mut above = 0;
    for s in (0..=MAX_SCORE as usize).rev() {
        above += hist[s];
        if hist[s] > 0 && above as f64 * 100.0 >= need {
            return s as u32;
        }
    }
    unreachable!()
}

fn criterion_3() -> Outcome {
    let mut rng = RngStream::new(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = 1 + rng.index(10_000);
        let scores: Vec<u32> = (0..n).map(|_| rng.index(1001) as u32).collect();
        let records = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| InteractionRecord::new(format!("c{i}"), format!("p{}", i % 13), s))
            .collect();
        let table = InteractionTable::new(records).unwrap();
        let lo = rng.index(1000) as u32;
        let hi = lo + 1 + rng.index((1000 - lo) as usize) as u32;
        let got = tier_filter(&table, tier(lo, hi));
        let want: Vec<&InteractionRecord> = table
            .records()
            .iter()
            .filter(|r| lo <= r.score && r.score < hi)
            .collect();
        if got.records().iter().collect::<Vec<_>>() != want {
            mismatches += 1;
        }
        let p = rng.uniform_range(0.0, 100.0);
        if percentile_cutoff(&table, p).unwrap() != percentile_oracle(&scores, p) {
            mismatches += 1;
        }
    }
    // 1000 records: 82% below 319, 8% in [319, 389), 8% in [389, 700), 2% at 700 or above.
    let mut reference: Vec<u32> = (0..820).map(|i| 150 + i % 169).collect();
    reference.extend((0..80).map(|i| 319 + i % 70));
    reference.extend((0..80).map(|i| 389 + i % 311));
    reference.extend((0..20).map(|i| 700 + 10 * i));
    let table = InteractionTable::new(
        reference
            .iter()
            .enumerate()
            .map(|(i, &s)| InteractionRecord::new(format!("c{i}"), "p", s))
            .collect(),
    )
    .unwrap();
    let mapping: Vec<u32> = [82.0, 90.0, 98.0]
        .iter()
        .map(|&p| percentile_cutoff(&table, p).unwrap())
        .collect();
    outcome(
        mismatches == 0 && mapping == [319, 389, 700],
        format!("1000 random tables, {mismatches} mismatches; 82/90/98 -> {mapping:?}"),
    )
}

// 4 -----------------------------------------------------------------------

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn criterion_4() -> Outcome {
    let mut rng = RngStream::new(4);
    let (mut total, mut positives_hit, mut duplicate_calls) = (0usize, 0usize, 0usize);
    while total < 1_000_000 {
        let (nc, np) = (5 + rng.index(200), 5 + rng.index(200));
        let (c, p) = (ids("c", nc), ids("p", np));
        let mut positives = PairSet::new();
        let target = rng.index(nc * np / 2);
        while positives.len() < target {
            positives.insert((c[rng.index(nc)].clone(), p[rng.index(np)].clone()));
        }
        let sampler = NegativeSampler::new(&c, &p, &positives).unwrap();
        let count = 1 + rng.index(sampler.complement_size());
        let out = sampler.sample(count, &mut rng).unwrap();
        positives_hit += out.iter().filter(|x| positives.contains(&x.pair())).count();
        if out.iter().map(|x| x.pair()).collect::<HashSet<_>>().len() != out.len() {
            duplicate_calls += 1;
        }
        total += out.len();
    }

    let (c, p) = (ids("c", 10), ids("p", 10));
    let mut positives = PairSet::new();
    while positives.len() < 25 {
        positives.insert((c[rng.index(10)].clone(), p[rng.index(10)].clone()));
    }
    let sampler = NegativeSampler::new(&c, &p, &positives).unwrap();
    let cells = sampler.complement_size();
    let draws = 100_000;
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    for _ in 0..draws {
        *counts
            .entry(sampler.sample(1, &mut rng).unwrap()[0].pair())
            .or_default() += 1;
    }
    let expected = draws as f64 / cells as f64;
    let stat: f64 = counts
        .values()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>()
        + (cells - counts.len()) as f64 * expected;
    let critical = ChiSquared::new((cells - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    outcome(
        positives_hit == 0 && duplicate_calls == 0 && stat < critical,
        format!(
            "{total} negatives, {positives_hit} positives, {duplicate_calls} calls with duplicates; \
             chi-square {stat:.1} < {critical:.1} over {cells} cells"
        ),
    )
}

// 5 -----------------------------------------------------------------------

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(5);
    let prototypes: Vec<Vec<bool>> = (0..4)
        .map(|_| (0..32).map(|_| rng.uniform() < 0.5).collect())
        .collect();
    let mut store = BitVectorStore::new(32);
    for i in 0..500 {
        let proto = &prototypes[rng.index(4)];
        let bits: Vec<bool> = proto.iter().map(|&b| b ^ (rng.uniform() < 0.1)).collect();
        store.insert_bools(format!("v{i}"), &bits).unwrap();
    }
    let config = VaeConfig {
        input_dim: 32,
        encoder_hidden: vec![16],
        latent_dim: 4,
        epochs: 100,
        batch_size: 100,
        learning_rate: 1e-3,
    };
    let (_, log) = train_vae(&config, &store, &mut RngStream::new(50)).unwrap();
    let min_kl = log
        .records
        .iter()
        .map(|r| r.kl)
        .fold(f64::INFINITY, f64::min);
    let tail: Vec<f64> = log.records[20..].iter().map(|r| r.loss).collect();
    let s = slope(&tail);
    let elapsed = start.elapsed();
    outcome(
        min_kl >= 0.0 && s <= 0.0 && log.records.len() == 100 && elapsed < Duration::from_secs(60),
        format!(
            "min KL {min_kl:.4}, final-80 loss slope {s:.4e}, loss {:.3} -> {:.3}, {elapsed:.2?}",
            log.records[0].loss, log.records[99].loss
        ),
    )
}

// 6 -----------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut wins, mut sum_ftl, mut sum_base) = (0, 0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 1..=10 {
        let (config, data) = benchmark_for_seed(seed);
        let result = run_experiment(&config, &data).unwrap();
        let ftl = result.report.arm("ftl_300_700").unwrap().best_val_accuracy;
        let base = result
            .report
            .arm("baseline_700_900")
            .unwrap()
            .best_val_accuracy;
        if ftl > base {
            wins += 1;
        }
        sum_ftl += ftl;
        sum_base += base;
        per_seed.push(format!("{:+.2}", ftl - base));
    }
    let elapsed = start.elapsed();
    let (mean_ftl, mean_base) = (sum_ftl / 10.0, sum_base / 10.0);
    outcome(
        wins >= 7 && mean_ftl > mean_base && elapsed < Duration::from_secs(600),
        format!(
            "FTL ahead in {wins}/10 seeds, mean best accuracy {mean_ftl:.2}% vs {mean_base:.2}%, \
             per-seed gaps [{}], {elapsed:.2?}",
            per_seed.join(" ")
        ),
    )
}

// 7 -----------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let (config, data) = benchmark_for_seed(7);
    let settings = config.settings();
    let single_step = TrainSchedule {
        steps: vec![TrainStep {
            tier: tier(700, 900),
            epochs: 15,
        }],
        settings: settings.clone(),
    };
    let a = train_ftl(&single_step, &data).unwrap();
    let b = train_single(tier(700, 900), 15, &data, &settings).unwrap();
    let bitwise = a.log.records().len() == b.log.records().len()
        && a.log.records().iter().zip(b.log.records()).all(|(x, y)| {
            (x.step, x.epoch, x.split) == (y.step, y.epoch, y.split)
                && x.loss.to_bits() == y.loss.to_bits()
                && x.accuracy.to_bits() == y.accuracy.to_bits()
        });
    outcome(
        bitwise,
        format!("{} records compared bit for bit", a.log.len()),
    )
}

// 8 -----------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let mut rng = RngStream::new(8);
    let shapes = [(6, 5), (4, 6), (1, 4)];
    let snap = |rng: &mut RngStream, tag: &str| WeightSnapshot {
        tag: tag.into(),
        layers: shapes
            .iter()
            .map(|&(r, c)| SnapshotLayer {
                rows: r,
                cols: c,
                weights: (0..r * c).map(|_| rng.normal()).collect(),
                biases: (0..r).map(|_| rng.normal()).collect(),
            })
            .collect(),
    };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (snap(&mut rng, "a"), snap(&mut rng, "b"));
        let report = layer_distance(&a, &b).unwrap();
        for (k, (la, lb)) in a.layers.iter().zip(&b.layers).enumerate() {
            let mut ss = 0.0;
            for i in 0..la.weights.len() {
                ss += (la.weights[i] - lb.weights[i]) * (la.weights[i] - lb.weights[i]);
            }
            for i in 0..la.biases.len() {
                ss += (la.biases[i] - lb.biases[i]) * (la.biases[i] - lb.biases[i]);
            }
            let n = (la.weights.len() + la.biases.len()) as f64;
            worst = worst.max((report.layers[k].distance - ss.sqrt() / n).abs());
        }
    }
    let base = snap(&mut rng, "a");
    let mut exact = true;
    for (layer, delta) in [(0usize, 0.75f64), (1, -0.125), (2, 3.0)] {
        let mut moved = base.clone();
        moved.layers[layer].biases[0] += delta;
        let d = layer_distance(&base, &moved).unwrap().layers[layer];
        // Dyadic offsets keep the subtraction exact, so the formula must be too.
        let recovered = moved.layers[layer].biases[0] - base.layers[layer].biases[0];
        exact &= d.distance == recovered.abs() / d.n_weights as f64;
    }

    let (config, data) = benchmark_for_seed(1);
    let arm = config.arm("ftl_300_700").unwrap();
    let schedule = config.schedule(arm);
    let run = figure5_protocol(&schedule, &data, 20).unwrap();
    let prefix = run.ftl_start.bit_identical(&run.baseline_start);
    let zero = figure5_protocol(&schedule, &data, 0).unwrap();
    let zero_ok = zero.ftl_start.bit_identical(&zero.baseline_start)
        && zero.report.ftl.distances().iter().all(|&d| d == 0.0);
    let folds: Vec<String> = run
        .report
        .fold_changes
        .iter()
        .map(|f| f.map_or("NA".into(), |v| format!("{v:.2}")))
        .collect();
    outcome(
        worst <= 1e-12 && exact && prefix && zero_ok,
        format!(
            "brute-force gap {worst:.1e}, single-offset exact {exact}, shared prefix {prefix}, \
             zero offset all-zero {zero_ok}; benchmark fold changes (reported only) [{}]",
            folds.join(" ")
        ),
    )
}

// 9 -----------------------------------------------------------------------

fn metric_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = vec![dir.join("metrics.csv")];
    let mut per_arm: Vec<PathBuf> = std::fs::read_dir(dir.join("metrics"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    per_arm.sort();
    files.extend(per_arm);
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_owned(), bytes)
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/synth_benchmark.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_train(&config, &a, &RunOptions::default()).unwrap();
    cmd_train(&config, &b, &RunOptions::default()).unwrap();
    let (fa, fb) = (metric_files(&a), metric_files(&b));
    let bytes: usize = fa.iter().map(|(_, v)| v.len()).sum();
    outcome(
        fa == fb && fa.len() == 3,
        format!(
            "{} metrics files, {bytes} bytes, identical across runs",
            fa.len()
        ),
    )
}

// 10 ----------------------------------------------------------------------

fn round_trip(dir: &Path, name: &str, save: impl Fn(&Path), resave: impl Fn(&Path, &Path)) -> bool {
    let (first, second) = (dir.join(format!("{name}.1")), dir.join(format!("{name}.2")));
    save(&first);
    resave(&first, &second);
    std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap()
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (config, data) = benchmark_for_seed(10);
    let synth = synth_generate(config.synth.as_ref().unwrap()).unwrap();
    let net = DenseNetwork::classifier(
        &config.layers,
        data.features.feature_dim(),
        &mut RngStream::new(10),
    )
    .unwrap();
    let mut rng = RngStream::new(11);
    let mut latents = LatentStore::new(5);
    for i in 0..200 {
        let v = (0..5)
            .map(|_| rng.normal() * 10f64.powi(rng.index(20) as i32 - 10))
            .collect();
        latents.insert(format!("m{i}"), v).unwrap();
    }
    let results = [
        (
            "bit-vector store",
            round_trip(
                dir,
                "bits",
                |p| synth.compounds.save(p).unwrap(),
                |a, b| BitVectorStore::load(a).unwrap().save(b).unwrap(),
            ),
        ),
        (
            "interaction TSV",
            round_trip(
                dir,
                "table",
                |p| synth.table.save(p).unwrap(),
                |a, b| InteractionTable::load(a).unwrap().save(b).unwrap(),
            ),
        ),
        (
            "checkpoint JSON",
            round_trip(
                dir,
                "ckpt",
                |p| net.save_checkpoint(p).unwrap(),
                |a, b| {
                    DenseNetwork::load_checkpoint(a)
                        .unwrap()
                        .save_checkpoint(b)
                        .unwrap()
                },
            ),
        ),
        (
            "latent TSV",
            round_trip(
                dir,
                "latent",
                |p| latents.save(p).unwrap(),
                |a, b| LatentStore::load(a).unwrap().save(b).unwrap(),
            ),
        ),
    ];
    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            "bit-vector store, interaction TSV, checkpoint JSON and latent TSV byte-identical"
                .into()
        } else {
            format!("differs: {}", failed.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", criterion_1),
        ("Adam oracle", criterion_2),
        ("tier algebra", criterion_3),
        ("negative-sampler safety", criterion_4),
        ("VAE sanity", criterion_5),
        ("FTL ordering benchmark", criterion_6),
        ("degenerate equivalence", criterion_7),
        ("diagnostics exactness", criterion_8),
        ("end-to-end determinism", criterion_9),
        ("format round-trips", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            name,
            result.detail
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
