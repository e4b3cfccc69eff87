//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use qhaq_core::agent::{AgentConfig, DdpgAgent, MlpNet, Transition};
use qhaq_core::evaluator::{AccuracyOracle, SyntheticSensitivity};
use qhaq_core::hw::{builtin_hardware, estimate_cost, model_size, op_intensity, Arch, HardwareSpec};
use qhaq_core::model::{build_observations, builtin_topology, LayerDescriptor, NetworkModel};
use qhaq_core::policy::{
    action_to_bits, clamped_minimum, default_pins, enforce_budget, BitRange, Budget, BudgetKind, QuantPolicy,
};
use qhaq_core::quant::{kl_calibrate, kl_candidates, kl_divergence_at, linear_quantize, QuantSpec, TensorF32};
use qhaq_core::search::{search_loop, write_run, SearchConfig};
use qhaq_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    let detail = detail.into();
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    match out {
        Ok(d) if took <= limit => Ok(format!("{d}; {:.2}s", took.as_secs_f64())),
        Ok(d) => Err(format!("{d}; took {:.2}s, limit {:.0}s", took.as_secs_f64(), limit.as_secs_f64())),
        Err(d) => Err(d),
    }
}

const MIB: f64 = 1024.0 * 1024.0;

fn model_size_anchors() -> Outcome {
    timed(Duration::from_secs(1), || {
        let mut details = Vec::new();
        let mut ok = true;
        for (name, anchor) in [("mobilenet_v1", 16.14), ("mobilenet_v2", 13.37), ("resnet50", 97.49)] {
            let m = builtin_topology(name).map_err(|e| e.to_string())?;
            let bytes = model_size(&m, &QuantPolicy::uniform(m.len(), 32, 32), false).map_err(|e| e.to_string())?;
            let mib = bytes as f64 / MIB;
            let rel = (mib - anchor) / anchor;
            ok &= rel.abs() <= 0.01;
            details.push(format!("{name} {mib:.3} MiB ({:+.3}%)", rel * 100.0));
        }
        check(ok, details.join(", "))
    })
}

/// Independent evaluation: nearest level found by floor plus explicit
/// half-away-from-zero tie handling.
fn reference_quantize(w: f32, bits: u8, clip: f64, signed: bool) -> f32 {
    let max_level = if signed { 2f64.powi(bits as i32 - 1) - 1.0 } else { 2f64.powi(bits as i32) - 1.0 };
    let s = clip / max_level;
    let lo = if signed { -clip } else { 0.0 };
    let x = f64::from(w);
    let x = if x < lo {
        lo
    } else if x > clip {
        clip
    } else {
        x
    };
    let r = x / s;
    let fl = r.floor();
    let frac = r - fl;
    let level = if frac > 0.5 || (frac == 0.5 && r > 0.0) { fl + 1.0 } else { fl };
    (level * s) as f32
}

fn quantizer_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0usize;
    let mut ties = 0usize;
    let per_case = 1_000_000 / 14 + 1;
    for bits in 2..=8u8 {
        for signed in [true, false] {
            let probe = QuantSpec::new(bits, 1.0, signed).map_err(|e| e.to_string())?;
            // Alternate between an arbitrary clip and one whose step is a
            // power of two, so that midpoints between levels are exact.
            let clip: f64 = if bits % 2 == 0 {
                rng.random_range(0.05..4.0)
            } else {
                probe.max_level() as f64 * 2f64.powi(-rng.random_range(3..8))
            };
            let spec = QuantSpec::new(bits, clip, signed).map_err(|e| e.to_string())?;
            let step = spec.step();
            let data: Vec<f32> = (0..per_case)
                .map(|i| {
                    if i % 10 == 0 {
                        // midpoints between levels
                        let k = rng.random_range(spec.min_level()..spec.max_level()) as f64;
                        ((k + 0.5) * step) as f32
                    } else {
                        rng.random_range(-1.5 * clip..1.5 * clip) as f32
                    }
                })
                .collect();
            let t = TensorF32::from_vec(data.clone()).map_err(|e| e.to_string())?;
            let q = linear_quantize(&t, &spec).map_err(|e| e.to_string())?;
            for (i, (&w, &got)) in data.iter().zip(q.data()).enumerate() {
                let want = reference_quantize(w, bits, clip, signed);
                if got.to_bits() != want.to_bits() {
                    return Err(format!("bits {bits} signed {signed} value {w}: got {got}, want {want} (index {i})"));
                }
                let r = f64::from(w) / step;
                ties += usize::from(r.fract().abs() == 0.5);
            }
            checked += data.len();
        }
    }
    check(checked >= 1_000_000, format!("{checked} values bit-identical, {ties} exact ties"))
}

fn kl_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_rel = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(500..3000);
        let signed = case % 2 == 0;
        let bits = rng.random_range(2..=8u8);
        let spread: f64 = rng.random_range(0.1..3.0);
        let data: Vec<f32> = (0..n)
            .map(|_| {
                let g: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() * spread;
                (if signed { g } else { g.abs() }) as f32
            })
            .collect();
        let t = TensorF32::from_vec(data.clone()).map_err(|e| e.to_string())?;
        let c = kl_calibrate(&t, bits, signed).map_err(|e| e.to_string())?;
        let mut best = (f64::INFINITY, 0.0);
        for cand in kl_candidates(f64::from(t.max_abs())) {
            let d = kl_divergence_at(&t, bits, signed, cand).map_err(|e| e.to_string())?;
            if d <= best.0 {
                best = (d, cand);
            }
        }
        if c != best.1 {
            return Err(format!("case {case}: calibrate {c}, grid argmin {}", best.1));
        }
        for alpha in [0.25f32, 2.0, 8.0] {
            let scaled = TensorF32::from_vec(data.iter().map(|v| v * alpha).collect()).map_err(|e| e.to_string())?;
            let cs = kl_calibrate(&scaled, bits, signed).map_err(|e| e.to_string())?;
            let rel = (cs - f64::from(alpha) * c).abs() / (f64::from(alpha) * c);
            worst_rel = worst_rel.max(rel);
        }
    }
    check(worst_rel <= 1e-6, format!("20 tensors match grid argmin, worst scale error {worst_rel:.2e}"))
}

fn action_mapping() -> Outcome {
    let range = BitRange::default();
    let mut seen = [false; 9];
    let mut prev = 0u8;
    for i in 0..=10_000 {
        let a = i as f64 / 10_000.0;
        let b = action_to_bits(a, range).map_err(|e| e.to_string())?;
        if b < prev {
            return Err(format!("decrease at a = {a}"));
        }
        prev = b;
        seen[b as usize] = true;
    }
    let endpoints = (action_to_bits(0.0, range).unwrap(), action_to_bits(1.0, range).unwrap());
    check(
        seen[2..=8].iter().all(|&s| s) && endpoints == (2, 8),
        format!("monotone over 10001 points, covers 2..=8, endpoints {endpoints:?}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (NetworkModel, HardwareSpec, QuantPolicy) {
    let model = if rng.random_bool(0.15) {
        builtin_topology("mobilenet_v1").unwrap()
    } else {
        builtin_topology(&format!("toy({})", rng.random_range(1..=16))).unwrap()
    };
    let hw = builtin_hardware(["edge", "cloud", "bitfusion"][rng.random_range(0..3)]).unwrap();
    let layers = (0..model.len()).map(|_| (rng.random_range(2..=8), rng.random_range(2..=8))).collect::<Vec<_>>();
    let mut policy = QuantPolicy::uniform(model.len(), 8, 8);
    for (l, (w, a)) in policy.layers.iter_mut().zip(layers) {
        l.w_bits = w;
        l.a_bits = a;
    }
    (model, hw, policy)
}

fn budget_enforcement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut fit, mut infeasible) = (0, 0);
    for case in 0..100 {
        let (model, hw, policy) = random_instance(&mut rng);
        let kind = [BudgetKind::LatencyMs, BudgetKind::EnergyMj, BudgetKind::SizeBytes][rng.random_range(0..3)];
        let pins = default_pins(model.len());
        let probe = Budget { kind, limit: 1.0 };
        let floor = probe.cost(&model, &clamped_minimum(&policy, &pins, 2), &hw).unwrap();
        let top = probe.cost(&model, &policy, &hw).unwrap();
        let limit = rng.random_range(0.8 * floor..=1.1 * top.max(floor));
        let budget = Budget::new(kind, limit).unwrap();
        match enforce_budget(&model, &policy, &hw, &budget, &pins, 2) {
            Ok(out) => {
                let cost = budget.cost(&model, &out, &hw).unwrap();
                if cost > limit {
                    return Err(format!("case {case}: cost {cost} exceeds {limit}"));
                }
                for (i, (o, p)) in out.layers.iter().zip(&policy.layers).enumerate() {
                    if o.w_bits > p.w_bits || o.a_bits > p.a_bits {
                        return Err(format!("case {case}: layer {i} increased"));
                    }
                    if pins[i] && o != p {
                        return Err(format!("case {case}: pinned layer {i} changed"));
                    }
                }
                fit += 1;
            }
            Err(Error::Infeasible { best, .. }) => {
                if floor <= limit || best <= limit {
                    return Err(format!("case {case}: reported infeasible but floor {floor} <= {limit}"));
                }
                infeasible += 1;
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    check(fit > 0 && infeasible > 0, format!("{fit} satisfied, {infeasible} infeasible"))
}

fn grad_batch(seed: u64) -> Vec<Transition> {
    let obs = build_observations(&builtin_topology("toy(4)").unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..obs.len())
        .map(|k| {
            let prev = rng.random_range(0.0..1.0);
            let action = rng.random_range(0.0..1.0);
            let terminal = k + 1 == obs.len();
            Transition {
                obs: obs[k].with_prev_action(prev),
                action,
                reward: rng.random_range(-1.0..0.0),
                next_obs: obs[(k + 1).min(obs.len() - 1)].with_prev_action(action),
                terminal,
            }
        })
        .collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn max_fd_error(
    agent: &mut DdpgAgent,
    which: fn(&mut DdpgAgent) -> &mut MlpNet,
    loss: &dyn Fn(&DdpgAgent) -> f64,
    analytic: &MlpNet,
) -> (f64, usize) {
    const DELTA: f64 = 1e-5;
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in 0..8 {
        let len = which(agent).params()[p].len();
        for i in 0..len {
            let orig = which(agent).params()[p][i];
            which(agent).params_mut()[p][i] = orig + DELTA;
            let up = loss(agent);
            which(agent).params_mut()[p][i] = orig - DELTA;
            let down = loss(agent);
            which(agent).params_mut()[p][i] = orig;
            let numeric = (up - down) / (2.0 * DELTA);
            worst = worst.max(rel_err(analytic.params()[p][i], numeric));
            count += 1;
        }
    }
    (worst, count)
}

fn gradient_correctness() -> Outcome {
    timed(Duration::from_secs(30), || {
        let cfg = AgentConfig { hidden1: 4, hidden2: 4, seed: 6, ..AgentConfig::default() };
        let mut agent = DdpgAgent::new(cfg).map_err(|e| e.to_string())?;
        let batch = grad_batch(6);
        let targets = agent.targets_for(&batch, -0.3);
        let (_, critic_grads) = agent.critic_loss_and_grads(&batch, &targets);
        let (critic_err, n_c) = max_fd_error(
            &mut agent,
            DdpgAgent::critic_mut,
            &|a: &DdpgAgent| a.critic_loss_and_grads(&batch, &targets).0,
            &critic_grads,
        );
        let (_, actor_grads) = agent.actor_loss_and_grads(&batch);
        let (actor_err, n_a) = max_fd_error(
            &mut agent,
            DdpgAgent::actor_mut,
            &|a: &DdpgAgent| a.actor_loss_and_grads(&batch).0,
            &actor_grads,
        );
        check(
            critic_err < 1e-4 && actor_err < 1e-4,
            format!("critic {n_c} params max rel err {critic_err:.2e}, actor {n_a} params {actor_err:.2e}"),
        )
    })
}

const TOY_SIZE_LIMIT: f64 = 150.0;

fn toy_search_config(seed: u64, episodes: u64) -> SearchConfig {
    SearchConfig::parse(&format!(
        r#"{{"model": "toy(3)", "hardware": "edge",
            "budget": {{"kind": "size_bytes", "limit": {TOY_SIZE_LIMIT}}},
            "episodes": {episodes}, "bits": {{"min": 2, "max": 4}}, "pin_first_last": false,
            "agent": {{"seed": {seed}}}, "oracle": {{"kind": "synthetic", "seed": 42}}}}"#
    ))
    .expect("valid config")
}

/// Exhaustive optimum over all 3^6 policies of toy(3) with bits {2,3,4}.
fn brute_force_optimum() -> f64 {
    let model = builtin_topology("toy(3)").unwrap();
    let oracle = SyntheticSensitivity::for_model(42, &model);
    let origin = oracle.evaluate(&model, &QuantPolicy::uniform(3, 8, 8)).unwrap();
    let budget = Budget::new(BudgetKind::SizeBytes, TOY_SIZE_LIMIT).unwrap();
    let hw = builtin_hardware("edge").unwrap();
    let mut best = f64::NEG_INFINITY;
    for code in 0..729u32 {
        let mut c = code;
        let steps: Vec<u8> = (0..6)
            .map(|_| {
                let b = 2 + (c % 3) as u8;
                c /= 3;
                b
            })
            .collect();
        let p = QuantPolicy::from_steps(&steps).unwrap();
        if budget.satisfied_by(budget.cost(&model, &p, &hw).unwrap()) {
            best = best.max(0.1 * (oracle.evaluate(&model, &p).unwrap() - origin));
        }
    }
    best
}

fn search_optimality() -> Outcome {
    timed(Duration::from_secs(300), || {
        let optimum = brute_force_optimum();
        let mut hits = 0;
        let mut found = Vec::new();
        for seed in 7..12 {
            let out = search_loop(&toy_search_config(seed, 300)).map_err(|e| e.to_string())?;
            if out.best_reward >= optimum - 0.02 * optimum.abs() {
                hits += 1;
            }
            found.push(format!("{:.5}", out.best_reward));
        }
        check(hits >= 4, format!("optimum {optimum:.5}, seeds 7..=11 found [{}], {hits}/5 within 2%", found.join(", ")))
    })
}

fn cost_triple(model: &NetworkModel, p: &QuantPolicy, hw: &HardwareSpec) -> (f64, f64, u64) {
    let c = estimate_cost(model, p, hw).unwrap();
    (c.latency_ms, c.energy_mj, model_size(model, p, false).unwrap())
}

fn compute_bound_layer() -> (NetworkModel, HardwareSpec) {
    let layer = LayerDescriptor::conv(0, 256, 256, 3, 1, 28, false).unwrap();
    let model = NetworkModel::new("compute_bound", vec![layer]).unwrap();
    let mut hw = builtin_hardware("edge").unwrap();
    hw.arch = Arch::TemporalBitserial;
    hw.dram_bw_gbps = 1000.0;
    hw.axi_bits = 4096;
    (model, hw)
}

fn cost_model_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..10_000 {
        let (model, hw, policy) = random_instance(&mut rng);
        let layer = rng.random_range(0..model.len());
        let mut raised = policy.clone();
        if rng.random_bool(0.5) {
            raised.layers[layer].w_bits += 1;
        } else {
            raised.layers[layer].a_bits += 1;
        }
        let lo = cost_triple(&model, &policy, &hw);
        let hi = cost_triple(&model, &raised, &hw);
        if hi.0 < lo.0 || hi.1 < lo.1 || hi.2 < lo.2 {
            return Err(format!("case {case}: raising layer {layer} lowered cost {lo:?} -> {hi:?}"));
        }
    }
    let (model, hw) = compute_bound_layer();
    let c8 = estimate_cost(&model, &QuantPolicy::uniform(1, 8, 8), &hw).unwrap();
    let c4 = estimate_cost(&model, &QuantPolicy::uniform(1, 4, 4), &hw).unwrap();
    let ratio = c8.latency_ms / c4.latency_ms;
    let bound = c4.layers[0].bound;
    check(
        ratio == 4.0 && format!("{bound:?}") == "Compute",
        format!("10000 perturbations monotone; latency(8,8)/latency(4,4) = {ratio}"),
    )
}

fn roofline_depthwise() -> Outcome {
    let m = builtin_topology("mobilenet_v1").unwrap();
    let mut pairs = 0;
    for batch in [1u64, 16] {
        for bits in 2..=8u8 {
            for (i, l) in m.layers.iter().enumerate() {
                if !l.is_depthwise {
                    continue;
                }
                let dw = op_intensity(l, bits, bits, batch);
                for j in [i.wrapping_sub(1), i + 1] {
                    let Some(n) = m.layers.get(j) else { continue };
                    if n.kernel != 1 || n.is_depthwise || !matches!(n.kind, qhaq_core::model::LayerKind::Conv) {
                        continue;
                    }
                    let pw = op_intensity(n, bits, bits, batch);
                    if dw >= pw {
                        return Err(format!("layer {i} ({dw}) vs {j} ({pw}) at {bits} bits, batch {batch}"));
                    }
                    pairs += 1;
                }
            }
        }
    }
    check(pairs > 0, format!("{pairs} depthwise/pointwise comparisons, all strictly lower"))
}

fn hardware_specialization() -> Outcome {
    let m = builtin_topology("mobilenet_v1").unwrap();
    let edge = builtin_hardware("edge").unwrap();
    let cloud = builtin_hardware("cloud").unwrap();
    let mut candidates = Vec::new();
    for w in 2..=8u8 {
        for a in 2..=8u8 {
            let p = QuantPolicy::uniform(m.len(), w, a);
            let le = estimate_cost(&m, &p, &edge).unwrap().latency_ms;
            let lc = estimate_cost(&m, &p, &cloud).unwrap().latency_ms;
            candidates.push(((w, a), le, lc));
        }
    }
    for x in &candidates {
        for y in &candidates {
            if x.1 < y.1 && x.2 > y.2 {
                return Ok(format!(
                    "w{}a{} faster on edge ({:.3} < {:.3} ms), w{}a{} faster on cloud ({:.4} < {:.4} ms)",
                    x.0 .0, x.0 .1, x.1, y.1, y.0 .0, y.0 .1, y.2, x.2
                ));
            }
        }
    }
    Err("no latency ordering flip among uniform policies".into())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = toy_search_config(11, 60);
    cfg.model = "toy(4)".into();
    write_run(&cfg, a.path()).map_err(|e| e.to_string())?;
    write_run(&cfg, b.path()).map_err(|e| e.to_string())?;
    for f in ["policy.json", "episodes.csv"] {
        let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok("policy.json and episodes.csv byte-identical across two runs".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("model-size anchors", model_size_anchors),
        ("quantizer exactness", quantizer_exactness),
        ("KL calibration", kl_calibration),
        ("action mapping", action_mapping),
        ("budget enforcement", budget_enforcement),
        ("gradient correctness", gradient_correctness),
        ("search optimality", search_optimality),
        ("cost-model laws", cost_model_laws),
        ("roofline depthwise", roofline_depthwise),
        ("hardware specialization", hardware_specialization),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
