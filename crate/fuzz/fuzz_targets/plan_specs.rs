#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudopar::schedule::{Mode, SwitchCriterion};
use pseudopar::ThresholdGrid;

// Short spec strings: `--switch`, `--mode` and `--grid` values.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = text.parse::<SwitchCriterion>();
    if let Ok(mode) = text.parse::<Mode>() {
        assert_eq!(mode.label().parse::<Mode>().unwrap(), mode);
    }
    if let Ok(grid) = text.parse::<ThresholdGrid>() {
        // bounded: a parsed grid never expands into an absurd sweep
        let _ = grid.thresholds(&[1.0, 1.1]);
    }
});
