//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Each entry point takes the rule and scenario text straight from the
//! page's text areas and hands back JSON.

use wasm_bindgen::prelude::*;

use taprepair::automaton::BuildOptions;
use taprepair::env::ChannelTable;
use taprepair::props::{load_catalog, select};
use taprepair::repair::Limits;
use taprepair::report::{run_check, run_repair, Inputs, Report, Settings};
use taprepair::rule::parse_rules;
use taprepair::scenario::parse_scenario;

fn inputs(rules: &str, scenario: &str, props: &str) -> Result<Inputs, String> {
    let rules = parse_rules(rules).map_err(|e| format!("rules: {e}"))?;
    let scenario = parse_scenario(scenario, &rules).map_err(|e| format!("scenario: {e}"))?;
    let catalog = load_catalog();
    let keys: Vec<String> = props
        .split(',')
        .map(|k| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .collect();
    let properties: Vec<_> = if keys.is_empty() {
        catalog.iter().filter(|p| p.applies_to(&rules)).cloned().collect()
    } else {
        select(&catalog, &keys).into_iter().cloned().collect()
    };
    if properties.is_empty() {
        return Err("no property to check".into());
    }
    Ok(Inputs {
        rules,
        scenario,
        table: ChannelTable::builtin(),
        properties,
        catalog,
    })
}

fn settings(tick_sec: u32) -> Settings {
    Settings {
        opts: BuildOptions {
            tick_sec: tick_sec.max(1),
            // keep the tab responsive
            state_cap: 200_000,
            ..Default::default()
        },
        limits: Limits::default(),
    }
}

fn to_json(r: &Report) -> String {
    serde_json::to_string(r).expect("report serializes")
}

pub fn check_text(rules: &str, scenario: &str, props: &str, tick_sec: u32) -> Result<String, String> {
    Ok(to_json(&run_check(
        &inputs(rules, scenario, props)?,
        &settings(tick_sec),
    )))
}

pub fn repair_text(rules: &str, scenario: &str, props: &str, tick_sec: u32) -> Result<String, String> {
    Ok(to_json(&run_repair(
        &inputs(rules, scenario, props)?,
        &settings(tick_sec),
    )))
}

/// Catalog properties that mention only attributes the rules declare,
/// one per line in property syntax.
pub fn catalog_text(rules: &str) -> Result<String, String> {
    let rules = parse_rules(rules).map_err(|e| format!("rules: {e}"))?;
    let lines: Vec<String> = load_catalog()
        .iter()
        .filter(|p| p.applies_to(&rules))
        .map(ToString::to_string)
        .collect();
    Ok(lines.join("\n"))
}

#[wasm_bindgen]
pub fn check(rules: &str, scenario: &str, props: &str, tick_sec: u32) -> Result<String, JsError> {
    check_text(rules, scenario, props, tick_sec).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn repair(rules: &str, scenario: &str, props: &str, tick_sec: u32) -> Result<String, JsError> {
    repair_text(rules, scenario, props, tick_sec).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn catalog(rules: &str) -> Result<String, JsError> {
    catalog_text(rules).map_err(|e| JsError::new(&e))
}
