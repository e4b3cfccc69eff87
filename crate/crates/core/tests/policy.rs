use proptest::prelude::*;
use qhaq_core::evaluator::{AccuracyOracle, SyntheticSensitivity};
use qhaq_core::hw::{builtin_hardware, estimate_cost, model_size};
use qhaq_core::model::builtin_topology;
use qhaq_core::policy::{action_to_bits, default_pins, enforce_budget, BitRange, Budget, BudgetKind, QuantPolicy};
use qhaq_core::Error;

/// Hand replay of the reverse sweep, written against flat step vectors.
fn replay_sweep(steps: &[u8], pins: &[bool], min: u8, fits: impl Fn(&[u8]) -> bool) -> Option<Vec<u8>> {
    let mut cur = steps.to_vec();
    if fits(&cur) {
        return Some(cur);
    }
    loop {
        let mut changed = false;
        for k in (0..cur.len()).rev() {
            if pins[k / 2] || cur[k] <= min {
                continue;
            }
            cur[k] -= 1;
            changed = true;
            if fits(&cur) {
                return Some(cur);
            }
        }
        if !changed {
            return None;
        }
    }
}

#[test]
fn toy4_enforcement_matches_replayed_sweep() {
    let m = builtin_topology("toy(4)").unwrap();
    let hw = builtin_hardware("edge").unwrap();
    let pins = vec![false; 4];
    let all8 = QuantPolicy::uniform(4, 8, 8);
    let all2 = QuantPolicy::uniform(4, 2, 2);
    for kind in [BudgetKind::LatencyMs, BudgetKind::EnergyMj, BudgetKind::SizeBytes] {
        let probe = Budget { kind, limit: 1.0 };
        let (hi, lo) = (probe.cost(&m, &all8, &hw).unwrap(), probe.cost(&m, &all2, &hw).unwrap());
        for frac in [0.1, 0.35, 0.6, 0.9] {
            let budget = Budget::new(kind, lo + frac * (hi - lo)).unwrap();
            let got = enforce_budget(&m, &all8, &hw, &budget, &pins, 2).unwrap();
            let fits = |s: &[u8]| {
                let p = QuantPolicy::from_steps(s).unwrap();
                let c = match kind {
                    BudgetKind::LatencyMs => estimate_cost(&m, &p, &hw).unwrap().latency_ms,
                    BudgetKind::EnergyMj => estimate_cost(&m, &p, &hw).unwrap().energy_mj,
                    BudgetKind::SizeBytes => model_size(&m, &p, false).unwrap() as f64,
                };
                c <= budget.limit
            };
            let want = replay_sweep(&all8.steps(), &pins, 2, fits).unwrap();
            assert_eq!(got.steps(), want, "{kind:?} at {frac}");
            assert!(budget.cost(&m, &got, &hw).unwrap() <= budget.limit);
        }
    }
}

#[test]
fn below_floor_reports_best_achievable() {
    let m = builtin_topology("toy(4)").unwrap();
    let hw = builtin_hardware("cloud").unwrap();
    let pins = default_pins(4);
    let p = QuantPolicy::uniform(4, 8, 8);
    match enforce_budget(&m, &p, &hw, &Budget::new(BudgetKind::SizeBytes, 1.0).unwrap(), &pins, 2) {
        Err(Error::Infeasible { best, limit, kind }) => {
            let mut floor = QuantPolicy::uniform(4, 2, 2);
            floor.layers[0] = p.layers[0];
            floor.layers[3] = p.layers[3];
            assert_eq!(best, model_size(&m, &floor, false).unwrap() as f64);
            assert_eq!((limit, kind), (1.0, "size_bytes"));
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

/// Brute force over all 3^6 policies of toy(3) with bits {2,3,4}.
fn brute_force(oracle: &SyntheticSensitivity, limit: f64) -> (f64, Vec<u8>) {
    let m = builtin_topology("toy(3)").unwrap();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for code in 0..729u32 {
        let steps: Vec<u8> = (0..6).map(|k| 2 + (code / 3u32.pow(k) % 3) as u8).collect();
        let p = QuantPolicy::from_steps(&steps).unwrap();
        if model_size(&m, &p, false).unwrap() as f64 <= limit {
            let acc = oracle.evaluate(&m, &p).unwrap();
            if acc > best.0 {
                best = (acc, steps);
            }
        }
    }
    best
}

/// Closed form: size depends only on weight bits, accuracy is additive, so
/// activations take the top bitwidth and weights solve a three-item
/// knapsack that is small enough to scan per layer.
fn closed_form(oracle: &SyntheticSensitivity, limit: f64) -> f64 {
    let m = builtin_topology("toy(3)").unwrap();
    let bytes_per_bit: Vec<f64> = m.layers.iter().map(|l| (l.n_params + l.affine_params) as f64 / 8.0).collect();
    let term = |k: usize, b: u8| oracle.sensitivities[k] * (-(f64::from(b) - 2.0)).exp2();
    let act_penalty: f64 = (0..3).map(|i| term(2 * i + 1, 4)).sum();
    let mut best_penalty = f64::INFINITY;
    for w0 in 2..=4u8 {
        for w1 in 2..=4u8 {
            for w2 in 2..=4u8 {
                let size: f64 =
                    [w0, w1, w2].iter().zip(&bytes_per_bit).map(|(&b, per)| (per * f64::from(b)).ceil()).sum();
                if size <= limit {
                    let p = term(0, w0) + term(2, w1) + term(4, w2);
                    best_penalty = best_penalty.min(p);
                }
            }
        }
    }
    oracle.base_accuracy - oracle.scale * (best_penalty + act_penalty)
}

#[test]
fn synthetic_argmax_matches_brute_force() {
    let m = builtin_topology("toy(3)").unwrap();
    for seed in 0..10 {
        let oracle = SyntheticSensitivity::for_model(seed, &m);
        for limit in [110.0, 130.0, 150.0, 180.0, 212.0] {
            let (acc, steps) = brute_force(&oracle, limit);
            assert!((acc - closed_form(&oracle, limit)).abs() < 1e-12, "seed {seed} limit {limit}");
            assert!(steps.iter().skip(1).step_by(2).all(|&b| b == 4));
        }
    }
}

proptest! {
    #[test]
    fn action_mapping_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, lo in 1u8..=8, width in 0u8..=8) {
        let range = BitRange::new(lo, lo + width).unwrap();
        let (x, y) = (action_to_bits(a, range).unwrap(), action_to_bits(b, range).unwrap());
        prop_assert!(range.contains(x) && range.contains(y));
        if a <= b {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn enforcement_never_raises_or_touches_pins(
        bits in prop::collection::vec((2u8..=8, 2u8..=8), 6),
        frac in 0.0f64..1.2,
        kind_idx in 0usize..3,
    ) {
        let m = builtin_topology("toy(6)").unwrap();
        let hw = builtin_hardware("bitfusion").unwrap();
        let mut p = QuantPolicy::uniform(6, 8, 8);
        for (l, (w, a)) in p.layers.iter_mut().zip(bits) {
            l.w_bits = w;
            l.a_bits = a;
        }
        let kind = [BudgetKind::LatencyMs, BudgetKind::EnergyMj, BudgetKind::SizeBytes][kind_idx];
        let top = Budget { kind, limit: 1.0 }.cost(&m, &p, &hw).unwrap();
        let budget = Budget::new(kind, (top * frac).max(1e-9)).unwrap();
        let pins = default_pins(6);
        match enforce_budget(&m, &p, &hw, &budget, &pins, 2) {
            Ok(out) => {
                prop_assert!(budget.cost(&m, &out, &hw).unwrap() <= budget.limit);
                for (i, (o, q)) in out.layers.iter().zip(&p.layers).enumerate() {
                    prop_assert!(o.w_bits <= q.w_bits && o.a_bits <= q.a_bits);
                    if pins[i] { prop_assert_eq!(o, q); }
                }
            }
            Err(Error::Infeasible { best, .. }) => prop_assert!(best > budget.limit),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
