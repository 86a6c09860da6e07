//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use qflsim::bench::{load_data, parse_config, run_poc1, run_poc2, run_single, ExperimentConfig};
use qflsim::encoding::{amplitude_encode, EncodingKind, FeatureVector, StatePrep};
use qflsim::federation::{aggregate, aggregate_weighted, DeviceState, Federation, GlobalModel};
use qflsim::qstate::StateVector;
use qflsim::vqc::{Classifier, TrainConfig, VqcParams};
use qflsim::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn config(text: &str) -> ExperimentConfig {
    parse_config(text.as_bytes()).expect("acceptance config")
}

fn simulator_matches_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let (q, gates) = random_circuit(&mut rng, 3, 20);
        let mut state = StateVector::zero(q).map_err(|e| e.to_string())?;
        state
            .apply_circuit(&build(q, &gates), &[])
            .map_err(|e| e.to_string())?;
        let psi = apply(&circuit_unitary(&gates, q), &basis_zero(q));
        for i in 0..q {
            let got = state.expectation_z(i).map_err(|e| e.to_string())?;
            let err = (got - expectation_z(&psi, i, q)).abs();
            worst = worst.max(err);
            ensure(err <= 1e-10, || {
                format!("circuit {case} qubit {i}: error {err:e}")
            })?;
        }
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!("50 circuits, max |Δ⟨Z⟩| = {worst:.1e}, {took:.2?}"))
}

fn gradient_matches_finite_differences() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for case in 0..20 {
        let q = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let c = rng.random_range(1..=q);
        let encoding = EncodingKind::ALL[rng.random_range(0..3)];
        let prep = if rng.random_bool(0.5) {
            StatePrep::Angle
        } else {
            StatePrep::Amplitude
        };
        let clf = Classifier::new(q, k, c, encoding, prep).map_err(|e| e.to_string())?;
        let angles: Vec<f64> = (0..3 * k * q)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let batch: Vec<FeatureVector> = (0..rng.random_range(1..=4))
            .map(|_| {
                let values = (0..q).map(|_| rng.random_range(0.05..1.0)).collect();
                FeatureVector::new(values, rng.random_range(0..c))
            })
            .collect();
        let params = VqcParams::from_flat(k, q, angles.clone()).map_err(|e| e.to_string())?;
        let analytic = clf.gradient(&params, &batch).map_err(|e| e.to_string())?;
        let mean_loss = |a: Vec<f64>| {
            let p = VqcParams::from_flat(k, q, a).unwrap();
            batch
                .iter()
                .map(|s| clf.sample_loss(&p, s).unwrap())
                .sum::<f64>()
                / batch.len() as f64
        };
        for j in 0..angles.len() {
            let mut up = angles.clone();
            let mut down = angles.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (mean_loss(up) - mean_loss(down)) / (2.0 * h);
            if numeric.abs() <= 1e-8 {
                continue;
            }
            let rel = (analytic[j] - numeric).abs() / numeric.abs();
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || {
                format!(
                    "instance {case} slot {j}: analytic {} numeric {numeric} rel {rel:e}",
                    analytic[j]
                )
            })?;
        }
    }
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!(
        "20 instances, max relative error {worst:.1e}, {took:.2?}"
    ))
}

fn aggregation_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..8);
        let one: Vec<f64> = (0..12).map(|_| rng.random_range(-4.0..4.0)).collect();
        let copies = vec![VqcParams::from_flat(2, 2, one.clone()).unwrap(); n];
        let avg = aggregate(&copies).map_err(|e| e.to_string())?;
        ensure(avg.as_slice() == &one[..], || {
            "mean of equal models changed the model".into()
        })?;
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
        let wavg = aggregate_weighted(&copies, &weights).map_err(|e| e.to_string())?;
        ensure(wavg.as_slice() == &one[..], || {
            "weighted mean of equal models changed the model".into()
        })?;

        let models: Vec<VqcParams> = (0..n)
            .map(|_| {
                let a = (0..12).map(|_| rng.random_range(-4.0..4.0)).collect();
                VqcParams::from_flat(2, 2, a).unwrap()
            })
            .collect();
        for avg in [aggregate(&models), aggregate_weighted(&models, &weights)] {
            let avg = avg.map_err(|e| e.to_string())?;
            for j in 0..12 {
                let col = models.iter().map(|m| m.as_slice()[j]);
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                let v = avg.as_slice()[j];
                ensure(lo <= v && v <= hi, || {
                    format!("element {j}: {v} outside [{lo}, {hi}]")
                })?;
            }
        }
    }

    let clf = Classifier::new(4, 2, 3, EncodingKind::Vanilla, StatePrep::Angle).unwrap();
    let data = load_data(&config(""), &data_dir()).map_err(|e| e.to_string())?;
    let train = TrainConfig::default();
    for seed in 0..3u64 {
        let init = clf.init_params(train.init_range, seed);
        let device = DeviceState::new(0, data.train.samples.clone(), init.clone(), seed + 100)
            .map_err(|e| e.to_string())?;
        let (expected, _) = clf
            .train_local(&init, &device.shard, &device.train_config(&train, 1))
            .map_err(|e| e.to_string())?;
        let fed = Federation::new(clf.clone(), train);
        let (next, _) = fed
            .run_round(
                &GlobalModel {
                    params: init,
                    round: 0,
                },
                &mut [device],
                &[],
            )
            .map_err(|e| e.to_string())?;
        ensure(next.params == expected, || {
            "1-device round differs from local training".into()
        })?;
    }
    Ok(
        "equal-mean identity, envelope (plain and weighted), 1-device round ≡ local training"
            .into(),
    )
}

fn poc1_trends() -> Outcome {
    let started = Instant::now();
    let base = config("dataset = synthetic\nclasses = 2\nrounds = 10\n");
    let root = data_dir();
    let by_devices =
        run_poc1(&base, &[2, 4, 8], &[4], 3, false, &root).map_err(|e| e.to_string())?;
    let by_qubits =
        run_poc1(&base, &[4], &[2, 4, 6], 3, false, &root).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for (name, report) in [("n", &by_devices), ("q", &by_qubits)] {
        let pts = &report.points;
        for w in pts.windows(2) {
            ensure(w[0].modeled_delay_s < w[1].modeled_delay_s, || {
                format!(
                    "modeled delay not increasing over {name}: {} -> {}",
                    w[0].modeled_delay_s, w[1].modeled_delay_s
                )
            })?;
            ensure(w[0].round_wall_clock_s <= w[1].round_wall_clock_s, || {
                format!(
                    "measured delay decreased over {name}: {:.4}s -> {:.4}s",
                    w[0].round_wall_clock_s, w[1].round_wall_clock_s
                )
            })?;
        }
        let wall: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.4}", p.round_wall_clock_s))
            .collect();
        lines.push(format!("{name}-sweep wall {}", wall.join("<")));
    }
    let took = within(Duration::from_secs(300), started)?;
    Ok(format!("{}, {took:.1?}", lines.join("; ")))
}

fn iris_learning() -> Outcome {
    let root = data_dir();
    let mut best = Vec::new();
    for seed in 0..3 {
        let c = config(&format!(
            "dataset = iris\nn_devices = 4\nqubits = 4\nlayers = 2\nencoding = vanilla\n\
             state_prep = angle\nrounds = 100\nseed = {seed}\nmetrics.record_wall_clock = false\n"
        ));
        let data = load_data(&c, &root).map_err(|e| e.to_string())?;
        let records = qflsim::federation::run_experiment(&c, &data).map_err(|e| e.to_string())?;
        ensure(records.len() == 100, || {
            format!("{} records", records.len())
        })?;
        best.push(
            records
                .iter()
                .map(|r| r.mean_train_accuracy)
                .fold(0.0, f64::max),
        );
    }
    let m = median(best.clone());
    ensure(m >= 0.85, || {
        format!("median best train accuracy {m:.3} < 0.85 ({best:?})")
    })?;
    Ok(format!(
        "median best train accuracy {m:.3} over seeds 0..3 ({best:.3?})"
    ))
}

struct Poc2Finals {
    /// `[k index][encoding index]` final mean train loss per seed.
    losses: Vec<Vec<Vec<f64>>>,
}

const POC2_LAYERS: [usize; 2] = [2, 8];

fn poc2_finals() -> Result<Poc2Finals, String> {
    let root = data_dir();
    let mut losses = vec![vec![Vec::new(); 3]; POC2_LAYERS.len()];
    for seed in 0..5 {
        let c = config(&format!(
            "dataset = mnist\nstate_prep = amplitude\nn_devices = 4\nqubits = 4\n\
             classes_per_device = 3\nrounds = 20\nseed = {seed}\nmetrics.record_wall_clock = false\n"
        ));
        let data = load_data(&c, &root).map_err(|e| e.to_string())?;
        ensure(data.train.len() == 600, || {
            format!("{} training samples", data.train.len())
        })?;
        let report = run_poc2(&c, &POC2_LAYERS, &EncodingKind::ALL, false, &root)
            .map_err(|e| e.to_string())?;
        for run in &report.runs {
            let ki = POC2_LAYERS.iter().position(|&k| k == run.layers).unwrap();
            let ei = EncodingKind::ALL
                .iter()
                .position(|&e| e == run.encoding)
                .unwrap();
            ensure(run.records.len() == 20, || "round count".into())?;
            losses[ki][ei].push(run.final_record().unwrap().mean_train_loss);
        }
    }
    Ok(Poc2Finals { losses })
}

fn poc2_layer_trend(f: &Poc2Finals) -> Outcome {
    let vanilla = EncodingKind::ALL
        .iter()
        .position(|&e| e == EncodingKind::Vanilla)
        .unwrap();
    let k2 = median(f.losses[0][vanilla].clone());
    let k8 = median(f.losses[1][vanilla].clone());
    ensure(k8 <= k2, || {
        format!("median final train loss k=8 {k8:.4} > k=2 {k2:.4}")
    })?;
    let others: Vec<String> = EncodingKind::ALL
        .iter()
        .enumerate()
        .map(|(e, kind)| {
            format!(
                "{kind} {:.4}->{:.4}",
                median(f.losses[0][e].clone()),
                median(f.losses[1][e].clone())
            )
        })
        .collect();
    Ok(format!(
        "median final train loss k=2 {k2:.4} >= k=8 {k8:.4} ({})",
        others.join(", ")
    ))
}

fn encoding_sensitivity(f: &Poc2Finals) -> Outcome {
    let mut smallest = f64::INFINITY;
    for (ki, k) in POC2_LAYERS.iter().enumerate() {
        let med: Vec<f64> = (0..3).map(|e| median(f.losses[ki][e].clone())).collect();
        for a in 0..3 {
            for b in a + 1..3 {
                let gap = (med[a] - med[b]).abs();
                smallest = smallest.min(gap);
                ensure(gap > 1e-3, || {
                    format!(
                        "k={k}: {} vs {} gap {gap:.2e}",
                        EncodingKind::ALL[a],
                        EncodingKind::ALL[b]
                    )
                })?;
            }
        }
    }
    Ok(format!(
        "smallest pairwise gap of median final loss {smallest:.4} (k=2 and k=8)"
    ))
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = data_dir();
    let read = |dir: &Path, body: &str| -> Result<Vec<u8>, String> {
        let c = config(&format!(
            "output_dir = \"{}\"\nseed = 9\nrounds = 15\n{body}",
            dir.display()
        ));
        let (_, path) = run_single(&c, &root).map_err(|e| e.to_string())?;
        fs::read(path).map_err(|e| e.to_string())
    };
    let a = read(&tmp.path().join("a"), "metrics.record_wall_clock = false\n")?;
    let b = read(&tmp.path().join("b"), "metrics.record_wall_clock = false\n")?;
    ensure(a == b, || "metrics CSVs differ".into())?;
    let drop_timing = |bytes: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(bytes)
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(5);
                f.join(",")
            })
            .collect()
    };
    let c = read(&tmp.path().join("c"), "")?;
    ensure(drop_timing(&a) == drop_timing(&c), || {
        "non-timing columns depend on timing flag".into()
    })?;
    Ok(format!(
        "two runs byte-identical ({} bytes); non-timing columns stable with wall-clock on",
        a.len()
    ))
}

fn degenerate_inputs() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let real = data_dir();
    let out = tmp.path().join("out");
    let run = |body: &str, root: &Path| {
        let text = format!("output_dir = \"{}\"\n{body}", out.display());
        parse_config(text.as_bytes()).and_then(|c| run_single(&c, root))
    };
    let no_output = || -> Result<(), String> {
        ensure(!out.exists(), || {
            format!("partial output left in {}", out.display())
        })
    };

    let shard = DeviceState::new(0, Vec::new(), VqcParams::zeros(1, 2), 0);
    ensure(matches!(shard, Err(Error::DegenerateInput(_))), || {
        format!("empty shard: {shard:?}")
    })?;
    let sparse = run(
        "dataset = synthetic\nn_devices = 8\nsynthetic.samples_per_device = 1\nclasses = 2\n",
        &real,
    );
    ensure(
        matches!(sparse, Err(Error::Partition(_) | Error::DegenerateInput(_))),
        || format!("empty device shard: {sparse:?}"),
    )?;
    no_output()?;

    let zero = amplitude_encode(&FeatureVector::new(vec![0.0; 4], 0), 2);
    ensure(matches!(zero, Err(Error::DegenerateInput(_))), || {
        format!("all-zero amplitude: {zero:?}")
    })?;

    let wide = run("classes = 4\nqubits = 3\n", &real);
    ensure(
        matches!(&wide, Err(Error::Config { field, .. }) if field == "classes"),
        || format!("C > q: {wide:?}"),
    )?;
    no_output()?;

    let bad = tmp.path().join("bad");
    fs::create_dir_all(bad.join("mnist")).map_err(|e| e.to_string())?;
    let labels =
        fs::read(real.join("mnist/mnist-subset-labels-idx1-ubyte")).map_err(|e| e.to_string())?;
    fs::write(bad.join("mnist/mnist-subset-labels-idx1-ubyte"), labels)
        .map_err(|e| e.to_string())?;
    let mut images =
        fs::read(real.join("mnist/mnist-subset-images-idx3-ubyte")).map_err(|e| e.to_string())?;
    images[3] = 0x02;
    fs::write(bad.join("mnist/mnist-subset-images-idx3-ubyte"), &images)
        .map_err(|e| e.to_string())?;
    let magic = run("dataset = mnist\n", &bad);
    ensure(matches!(magic, Err(Error::Format { .. })), || {
        format!("bad IDX magic: {magic:?}")
    })?;
    images[3] = 0x03;
    images.truncate(images.len() - 10);
    fs::write(bad.join("mnist/mnist-subset-images-idx3-ubyte"), &images)
        .map_err(|e| e.to_string())?;
    let short = run("dataset = mnist\n", &bad);
    ensure(matches!(short, Err(Error::Format { .. })), || {
        format!("truncated IDX: {short:?}")
    })?;
    no_output()?;

    fs::write(
        bad.join("iris.csv"),
        "5.1,3.5,1.4,0.2,setosa\n4.9,3.0,1.4\n",
    )
    .map_err(|e| e.to_string())?;
    let csv = run("", &bad);
    ensure(matches!(csv, Err(Error::Parse { line: 2, .. })), || {
        format!("malformed CSV: {csv:?}")
    })?;
    no_output()?;
    Ok("empty shard, zero amplitude vector, C > q, bad IDX magic/length, bad CSV row: named errors, no output".into())
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let guarded = |f: &dyn Fn() -> Outcome| match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    };
    results.push((
        1,
        "simulator oracle equivalence",
        guarded(&simulator_matches_oracle),
    ));
    results.push((
        2,
        "parameter-shift gradient",
        guarded(&gradient_matches_finite_differences),
    ));
    results.push((3, "aggregation algebra", guarded(&aggregation_algebra)));
    results.push((
        4,
        "delay trends over devices and qubits",
        guarded(&poc1_trends),
    ));
    results.push((5, "federated IRIS learning", guarded(&iris_learning)));
    let finals = catch_unwind(poc2_finals).unwrap_or_else(|_| Err("panic".into()));
    match &finals {
        Ok(f) => {
            results.push((6, "layer-count trend", guarded(&|| poc2_layer_trend(f))));
            results.push((
                7,
                "encoding sensitivity",
                guarded(&|| encoding_sensitivity(f)),
            ));
        }
        Err(e) => {
            results.push((6, "layer-count trend", Err(e.clone())));
            results.push((7, "encoding sensitivity", Err(e.clone())));
        }
    }
    results.push((8, "reproducible metrics", guarded(&reproducibility)));
    results.push((9, "degenerate input handling", guarded(&degenerate_inputs)));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  criterion {n}: {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  criterion {n}: {name}: {reason}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        results.len() - failed,
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
