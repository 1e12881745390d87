//! Bundled domains, problems, prompt examples and instance files.

pub const BLOCKSWORLD_DOMAIN: &str = include_str!("../fixtures/domains/blocksworld.dom");
pub const BLOCKSWORLD_ANNOTATIONS: &str =
    include_str!("../fixtures/domains/blocksworld.annotations.json");
pub const BLOCKSWORLD_EXAMPLES: &str =
    include_str!("../fixtures/domains/blocksworld.examples.json");

pub const DEPOTS_DOMAIN: &str = include_str!("../fixtures/domains/depots.dom");
pub const DEPOTS_ANNOTATIONS: &str = include_str!("../fixtures/domains/depots.annotations.json");
pub const DEPOTS_EXAMPLES: &str = include_str!("../fixtures/domains/depots.examples.json");

pub const GRIPPERS_DOMAIN: &str = include_str!("../fixtures/domains/grippers.dom");
pub const GRIPPERS_ANNOTATIONS: &str =
    include_str!("../fixtures/domains/grippers.annotations.json");
pub const GRIPPERS_EXAMPLES: &str = include_str!("../fixtures/domains/grippers.examples.json");

pub const BW_P01: &str = include_str!("../fixtures/problems/bw-p01.prob");
pub const BW_P02: &str = include_str!("../fixtures/problems/bw-p02.prob");
pub const BW_P03: &str = include_str!("../fixtures/problems/bw-p03.prob");
pub const DEPOTS_HOIST: &str = include_str!("../fixtures/problems/depots-hoist.prob");
pub const DEPOTS_P01: &str = include_str!("../fixtures/problems/depots-p01.prob");
pub const GRIPPERS_P01: &str = include_str!("../fixtures/problems/grippers-p01.prob");

/// Every bundled problem with the name of its domain.
pub const PROBLEMS: &[(&str, &str)] = &[
    ("blocksworld", BW_P01),
    ("blocksworld", BW_P02),
    ("blocksworld", BW_P03),
    ("depots", DEPOTS_HOIST),
    ("depots", DEPOTS_P01),
    ("grippers", GRIPPERS_P01),
];

/// The 19-step Depots sequence over `DEPOTS_HOIST`.
/// Step 1 is not executable: hoist1 is not holding crate2.
pub const DEPOTS_HOIST_PLAN: &[&str] = &[
    "(lift hoist0 crate2 pallet0 depot0)",
    "(drop hoist1 crate2 pallet1 depot1)",
    "(unload hoist3 crate0 truck0 distributor0)",
    "(lift hoist5 crate0 pallet5 distributor2)",
    "(load hoist5 crate1 truck0 distributor2)",
    "(lift hoist5 crate1 crate0 distributor2)",
    "(unload hoist1 crate2 truck1 depot1)",
    "(load hoist2 crate3 truck2 depot2)",
    "(drive truck1 depot0 depot1)",
    "(drive truck2 depot2 distributor3)",
    "(load hoist0 crate2 truck1 depot0)",
    "(lift hoist2 crate3 pallet2 depot2)",
    "(drop hoist3 crate0 pallet3 distributor0)",
    "(load hoist5 crate0 truck0 distributor2)",
    "(unload hoist5 crate1 truck0 distributor2)",
    "(drop hoist6 crate3 pallet6 distributor3)",
    "(unload hoist6 crate3 truck2 distributor3)",
    "(drive truck0 distributor2 distributor0)",
    "(drive truck1 depot1 depot0)",
];

pub const BLOCKSWORLD_INSTANCES: &str = include_str!("../fixtures/instances/blocksworld.jsonl");
pub const DEPOTS_INSTANCES: &str = include_str!("../fixtures/instances/depots.jsonl");
pub const GRIPPERS_INSTANCES: &str = include_str!("../fixtures/instances/grippers.jsonl");
/// A Depots executability instance labeled "True" although step 1 fails.
pub const DEPOTS_MISLABELED_INSTANCE: &str =
    include_str!("../fixtures/instances/depots-mislabeled.jsonl");

/// The audited instance files of every domain, in one string.
pub fn consistent_instances() -> String {
    [BLOCKSWORLD_INSTANCES, DEPOTS_INSTANCES, GRIPPERS_INSTANCES].concat()
}
