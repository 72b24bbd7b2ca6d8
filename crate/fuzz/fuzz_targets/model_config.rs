#![no_main]

use libfuzzer_sys::fuzz_target;
use smpsim::config::ModelConfig;
use smpsim::layout::MarkResolution;

fuzz_target!(|data: &[u8]| {
    let Ok(config) = ModelConfig::from_json_bytes(data) else {
        return;
    };
    let _ = config.canonical_json();
    let _ = config.content_hash();
    let Ok(model) = config.build() else {
        return;
    };
    // keep the derived-quantity exercise bounded so throughput stays sane
    if model.num_states() <= 8 {
        let _ = model.validate(4.0, 0.5);
        let resolution = MarkResolution::new(&model);
        let _ = resolution.resolve_mark(1, 0.5, 1, 0.25);
        let _ = resolution.overlap_lengths(1, 0.3, 0, 1.7, 2);
        let _ = model.gamma(1, 2.0, 1);
        let _ = model.embedded_probs(1, 0.5, 0);
        let _ = model.kernel(1, 2, 0.5, 0);
    }
});
