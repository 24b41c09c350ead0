#![no_main]

use libfuzzer_sys::fuzz_target;
use qng::scenario::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(graph) = std::str::from_utf8(data) else {
        return;
    };
    let text = format!(
        r#"{{"scenario": "cournot", "graph": {graph}, "params": {{"price": 2, "noise_var": 1}}, "horizon": 0}}"#
    );
    let Ok(config) = parse_config_str(&text) else {
        return;
    };
    let g = &config.graph;
    for i in 0..g.n_agents() {
        let nb = g.neighbors(i).unwrap();
        assert!(nb.windows(2).all(|w| w[0] < w[1]));
        assert!(!nb.contains(&i));
        for &j in nb {
            assert!(g.neighbors(j).unwrap().contains(&i));
        }
    }
});
