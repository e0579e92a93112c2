#![no_main]

use hettree::{fit_pruned, Dataset, GrowthConfig, PruneConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 4096 {
        return;
    }
    let Ok(d) = Dataset::read_csv(data) else {
        return;
    };
    let growth = GrowthConfig {
        minbucket: 1,
        minsplit: 2,
        ..GrowthConfig::default()
    };
    let prune = PruneConfig {
        n_folds: d.len().clamp(2, 5),
        ..PruneConfig::default()
    };
    if let Ok(fit) = fit_pruned(&d, &growth, &prune) {
        assert!(fit.pruned.n_leaves() <= fit.full.n_leaves());
        for &x in d.x() {
            assert!(fit.pruned.predict(x).is_finite());
        }
    }
});
