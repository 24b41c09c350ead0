#![no_main]

use libfuzzer_sys::fuzz_target;
use qng::scenario::{parse_config_str, ConfigError};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    match parse_config_str(text) {
        Ok(config) => {
            assert!(config.graph.n_agents() >= 1);
            assert!(config.graph.diameter() < config.graph.n_agents().max(1));
        }
        Err(ConfigError::Invalid(errors)) => assert!(!errors.is_empty()),
        Err(_) => {}
    }
});
