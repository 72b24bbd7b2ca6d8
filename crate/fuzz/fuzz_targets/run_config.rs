#![no_main]

use libfuzzer_sys::fuzz_target;
use smpsim_cli::run_config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(config) = RunConfig::from_json_bytes(data) else {
        return;
    };
    // a parsed config re-serializes and re-parses to the same document
    let json = serde_json::to_string(&config).expect("parsed configs serialize");
    let back = RunConfig::from_json_str(&json).expect("canonical form re-parses");
    assert_eq!(config, back);
    if config.model.states <= 8 {
        let _ = config.model.build();
    }
});
