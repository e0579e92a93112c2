#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = hettree::Dataset::read_csv(data) {
        assert_eq!(d.x().len(), d.y().len());
        assert!(d.x().windows(2).all(|w| w[0] <= w[1]));
        assert!(d.x().iter().chain(d.y()).all(|v| v.is_finite()));
    }
});
