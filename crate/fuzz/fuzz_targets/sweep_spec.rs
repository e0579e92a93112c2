#![no_main]

use hettree::experiment::{parse_sweep, Scenario};
use hettree::{CpRule, MeanStructure, SelectionRule};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(values) = parse_sweep(data) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|c| c.is_finite() && *c >= 0.0));
    }
    let _ = data.parse::<Scenario>();
    let _ = data.parse::<MeanStructure>();
    let _ = data.parse::<CpRule>();
    if let Ok(rule) = data.parse::<SelectionRule>() {
        assert_eq!(rule.to_string().parse::<SelectionRule>().unwrap(), rule);
    }
});
