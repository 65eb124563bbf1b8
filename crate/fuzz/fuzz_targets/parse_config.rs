#![no_main]
use libfuzzer_sys::fuzz_target;
use phaselab::experiments::{
    parse_config, EquivalenceConfig, FitConfig, SweepConfig, UnboundedConfig, WidthConfig,
};


fn roundtrip<T>(text: &str)
where
    T: serde::de::DeserializeOwned + serde::Serialize + phaselab::experiments::Validate,
{
    if let Ok(config) = parse_config::<T>(text) {
        // an accepted config must survive its own serialization
        let again = serde_json::to_string(&config).expect("config serializes");
        parse_config::<T>(&again).expect("serialized config is accepted");
    }
}

// The first byte picks the config type so one corpus covers all of them.
fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    match selector % 5 {
        0 => roundtrip::<SweepConfig>(text),
        1 => roundtrip::<UnboundedConfig>(text),
        2 => roundtrip::<EquivalenceConfig>(text),
        3 => roundtrip::<WidthConfig>(text),
        _ => roundtrip::<FitConfig>(text),
    }
});
