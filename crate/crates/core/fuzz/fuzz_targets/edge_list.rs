#![no_main]

use dragon_core::io::parse_edge_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_edge_list(text) {
            // anything accepted must be a usable graph
            assert!(g
                .edges()
                .iter()
                .all(|&(i, j, w)| i != j && w > 0.0 && w.is_finite()));
            assert!(g
                .edges()
                .iter()
                .all(|&(i, j, _)| i < g.node_count() && j < g.node_count()));
        }
    }
});
