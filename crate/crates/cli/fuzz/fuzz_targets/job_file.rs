#![no_main]

use errvar_cli::job::{parse, Job, Kind};
use libfuzzer_sys::fuzz_target;

const KINDS: [Kind; 5] = [Kind::Adjust, Kind::Propagate, Kind::Synthesize, Kind::Simulate, Kind::Dist];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut accepted = 0;
    for kind in KINDS {
        if let Ok(job) = parse(text, kind) {
            accepted += 1;
            let matches = matches!(
                (&job, kind),
                (Job::Adjust(_), Kind::Adjust)
                    | (Job::Propagate(_), Kind::Propagate)
                    | (Job::Synthesize(_), Kind::Synthesize)
                    | (Job::Simulate(_), Kind::Simulate)
                    | (Job::Dist(_), Kind::Dist)
            );
            assert!(matches);
        }
    }
    assert!(accepted <= 1);
});
