//! The breadth-first explorer against the depth-first reference, on every
//! shipped model.

mod support;

use std::fs;
use std::path::Path;

use ogwb::model::parse_model;
use ogwb_core::explorer::{explore, ExploreOptions, Limits, Program};

fn limits() -> ExploreOptions {
    ExploreOptions::new(Limits {
        max_states: 1_000_000,
        max_depth: 1_000_000,
    })
}

#[test]
fn state_counts_agree_on_every_model() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("models");
    let mut paths = vec![dir.join("echronos.og")];
    paths.extend(fs::read_dir(dir.join("corpus")).unwrap().map(|e| e.unwrap().path()));
    for path in paths {
        let m = parse_model(&fs::read_to_string(&path).unwrap()).unwrap();
        let expected = support::count_reachable(&m.system, 1_000_000).unwrap();
        let r = explore(&Program::new(m.system), &[], limits());
        assert!(r.terminated);
        assert_eq!(r.reachable, expected as u64, "{}", path.display());
    }
}
