#![no_main]

use libfuzzer_sys::fuzz_target;
use qhaq_core::hw::{estimate_cost, parse_hardware};
use qhaq_core::model::builtin_topology;
use qhaq_core::policy::QuantPolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(hw) = parse_hardware(text) {
        let m = builtin_topology("toy(2)").unwrap();
        let report = estimate_cost(&m, &QuantPolicy::uniform(2, 8, 8), &hw).expect("valid spec costs");
        assert!(report.latency_ms.is_finite() && report.energy_mj.is_finite());
    }
});
