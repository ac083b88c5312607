#![no_main]

use libfuzzer_sys::fuzz_target;
use nmmc_core::graph::{largest_scc, parse_edge_list, LoadOptions};

fuzz_target!(|data: &[u8]| {
    for options in [
        LoadOptions::default(),
        LoadOptions {
            drop_self_loops: false,
            dedup: false,
        },
    ] {
        if let Ok((g, map)) = parse_edge_list(data, options) {
            assert_eq!(map.len(), g.node_count());
            if g.node_count() > 0 {
                let (h, _) = largest_scc(&g);
                assert!(h.is_strongly_connected());
            }
        }
    }
});
