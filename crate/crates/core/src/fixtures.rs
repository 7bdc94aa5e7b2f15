//! Embedded benchmark rule groups.

use crate::props::{load_catalog, select, Property};
use crate::rule::{parse_rules, ParseError, RuleSet};
use crate::scenario::{parse_scenario, Scenario};

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub rules: &'static str,
    pub scenario: &'static str,
    pub property: &'static str,
    /// Expected vulnerability tag, if the group has one.
    pub pattern: Option<&'static str>,
    pub tick_sec: u32,
}

macro_rules! fixture {
    ($name:literal, $file:literal, $prop:literal, $pat:expr) => {
        Fixture {
            name: $name,
            rules: include_str!(concat!("../data/fixtures/", $file, ".rules")),
            scenario: include_str!(concat!("../data/fixtures/", $file, ".scn")),
            property: $prop,
            pattern: $pat,
            tick_sec: BENCH_TICK_SEC,
        }
    };
}

/// All fixture latencies are multiples of five minutes, so the benchmark
/// runs at that granularity.
pub const BENCH_TICK_SEC: u32 = 300;

pub const BENCHMARK: [Fixture; 7] = [
    fixture!("Group 1", "g1", "P.22", Some("V4")),
    fixture!("Group 2", "g2", "P.17", Some("V5")),
    fixture!("Group 3", "g3", "P.26", Some("V6")),
    fixture!("Group 4", "g4", "P.34", Some("V7")),
    fixture!("Group 5", "g5", "P.23", Some("V8")),
    fixture!("N/A 1", "na1", "P.28", None),
    fixture!("N/A 2", "na2", "P.21", None),
];

/// Rain and CO rules fighting over the window.
pub const PRIORITY_CONFLICT: Fixture = fixture!("window conflict", "priority", "P.49,P.53", None);

impl Fixture {
    pub fn rule_set(&self) -> Result<RuleSet, ParseError> {
        parse_rules(self.rules)
    }

    pub fn load(&self) -> (RuleSet, Scenario, Vec<Property>) {
        let set = self.rule_set().expect("fixture rules parse");
        let sc = parse_scenario(self.scenario, &set).expect("fixture scenario parses");
        let keys: Vec<String> = self.property.split(',').map(str::to_string).collect();
        let catalog = load_catalog();
        let props = select(&catalog, &keys).into_iter().cloned().collect();
        (set, sc, props)
    }
}

pub fn by_name(name: &str) -> Option<&'static Fixture> {
    let n = name.to_ascii_lowercase().replace([' ', '/', '-', '_'], "");
    BENCHMARK.iter().find(|f| {
        let k = f.name.to_ascii_lowercase().replace([' ', '/', '-', '_'], "");
        k == n || k.replace("group", "g") == n
    })
}
