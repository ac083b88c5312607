#![no_main]

use libfuzzer_sys::fuzz_target;
use nmmc_core::metrics::read_distribution_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = read_distribution_csv(data) {
        assert_eq!(d.ids.len(), d.values.len());
    }
});
