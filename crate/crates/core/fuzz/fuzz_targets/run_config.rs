#![no_main]

use dragon_cli::config::{
    parse, ConvergenceConfig, FitWaitConfig, SolveConfig, ViscoFitConfig, ViscoGenConfig,
    WalkRunConfig,
};
use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse::<SolveConfig>(text);
    if let Ok(w) = parse::<WalkRunConfig>(text) {
        if w.graph.file.is_none() {
            if let Ok(g) = w.graph.build(Path::new(".")) {
                let _ = w.start_distribution(g.node_count());
            }
        }
    }
    let _ = parse::<ConvergenceConfig>(text);
    let _ = parse::<ViscoGenConfig>(text);
    let _ = parse::<ViscoFitConfig>(text);
    let _ = parse::<FitWaitConfig>(text);
});
