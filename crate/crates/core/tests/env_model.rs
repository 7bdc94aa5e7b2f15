use std::cmp::Ordering;

use proptest::prelude::*;

use taprepair::env::{
    implicit_effects, joint_effect, load_channel_table, sample_nondeterministic, sampled_joint_effect, Channel,
    ChannelTable, EffectContext,
};
use taprepair::rule::{AttributeId, Value};

type Act = (AttributeId, Value);

fn act(e: &str, c: &str, v: &str) -> Act {
    (AttributeId::new(e, c), Value::Label(v.into()))
}

fn actions() -> Vec<Act> {
    vec![
        act("heater", "switch", "on"),
        act("window", "switch", "open"),
        act("ac", "mode", "heating"),
        act("ac", "mode", "cooling"),
        act("fan", "switch", "on"),
        act("sprinkler", "switch", "on"),
        act("dehumidifier", "switch", "on"),
        act("light", "switch", "on"),
    ]
}

fn ctx(o: Option<Ordering>) -> EffectContext {
    EffectContext { outdoor_vs_indoor: o }
}

#[test]
fn heater_rate_per_tick() {
    // +1 per 600..900 s, so a 600 s tick moves 600/900 .. 600/600
    let t = ChannelTable::builtin();
    let (lo, hi) = joint_effect(
        &[act("heater", "switch", "on")],
        Channel::Temperature,
        &t,
        600,
        &ctx(None),
    );
    assert!((lo - 2.0 / 3.0).abs() < 1e-9);
    assert!((hi - 1.0).abs() < 1e-9);
}

#[test]
fn heater_and_cooling_ac_cancel_in_range() {
    let t = ChannelTable::builtin();
    let both = [act("heater", "switch", "on"), act("ac", "mode", "cooling")];
    let (lo, hi) = joint_effect(&both, Channel::Temperature, &t, 900, &ctx(None));
    // [1, 1.5] + [-1.5, -1]
    assert!((lo + 0.5).abs() < 1e-9 && (hi - 0.5).abs() < 1e-9);
}

#[test]
fn immediate_effects_are_not_rates() {
    let t = ChannelTable::builtin();
    let light = implicit_effects(&act("light", "switch", "on"), &t);
    assert_eq!(light.len(), 1);
    assert!(light[0].is_immediate());
    assert_eq!(
        joint_effect(
            &[act("light", "switch", "on")],
            Channel::Illuminance,
            &t,
            60,
            &ctx(None)
        ),
        (0.0, 0.0)
    );
}

#[test]
fn custom_table_replaces_builtin() {
    let t = load_channel_table("EFFECT heater.switch=on -> temperature +2 PER [300..300]s").unwrap();
    let (lo, hi) = joint_effect(
        &[act("heater", "switch", "on")],
        Channel::Temperature,
        &t,
        600,
        &ctx(None),
    );
    assert_eq!((lo, hi), (4.0, 4.0));
}

#[test]
fn sampling_is_uniform() {
    // chi-square over 10 bins; 27.88 is the 0.999 quantile for 9 degrees of freedom
    let n = 20_000u64;
    let mut bins = [0u64; 10];
    for seed in 0..n {
        let x = sample_nondeterministic(100, 109, seed);
        bins[(x - 100) as usize] += 1;
    }
    let expected = n as f64 / 10.0;
    let chi2: f64 = bins.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 27.88, "chi2 = {chi2}, bins {bins:?}");
}

proptest! {
    #[test]
    fn joint_effect_is_additive(
        mask in prop::collection::vec(0..3u8, 8),
        tick in prop::sample::select(vec![60u32, 300, 600, 900]),
        chan in prop::sample::select(Channel::ALL.to_vec()),
        outdoor in prop::sample::select(vec![None, Some(Ordering::Less), Some(Ordering::Greater)]),
    ) {
        let t = ChannelTable::builtin();
        let all = actions();
        let a: Vec<Act> = all.iter().zip(&mask).filter(|(_, m)| **m == 1).map(|(x, _)| x.clone()).collect();
        let b: Vec<Act> = all.iter().zip(&mask).filter(|(_, m)| **m == 2).map(|(x, _)| x.clone()).collect();
        let ab: Vec<Act> = a.iter().chain(&b).cloned().collect();
        let c = ctx(outdoor);
        let (la, ha) = joint_effect(&a, chan, &t, tick, &c);
        let (lb, hb) = joint_effect(&b, chan, &t, tick, &c);
        let (l, h) = joint_effect(&ab, chan, &t, tick, &c);
        prop_assert!((l - (la + lb)).abs() < 1e-9);
        prop_assert!((h - (ha + hb)).abs() < 1e-9);
        prop_assert!(l <= h + 1e-12);
    }

    #[test]
    fn sampled_rate_lies_in_joint_range(
        mask in prop::collection::vec(any::<bool>(), 8),
        tick in prop::sample::select(vec![60u32, 300, 600]),
        chan in prop::sample::select(Channel::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let t = ChannelTable::builtin();
        let active: Vec<Act> = actions().into_iter().zip(&mask).filter(|(_, m)| **m).map(|(x, _)| x).collect();
        let c = ctx(Some(Ordering::Less));
        let (lo, hi) = joint_effect(&active, chan, &t, tick, &c);
        let s = sampled_joint_effect(&active, chan, &t, tick, &c, seed);
        prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9, "{s} outside [{lo}, {hi}]");
    }

    #[test]
    fn samples_stay_in_range(lo in -1000i64..1000, width in 0i64..500, seed in any::<u64>()) {
        let x = sample_nondeterministic(lo, lo + width, seed);
        prop_assert!(x >= lo && x <= lo + width);
        prop_assert_eq!(x, sample_nondeterministic(lo, lo + width, seed));
    }
}
