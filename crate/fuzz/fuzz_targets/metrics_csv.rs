#![no_main]

use libfuzzer_sys::fuzz_target;
use nmmc_core::metrics::MetricsLog;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = MetricsLog::read_csv(data) {
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        assert_eq!(MetricsLog::read_csv(out.as_slice()).unwrap().rows.len(), log.rows.len());
    }
});
