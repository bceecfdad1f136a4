use proptest::prelude::*;
use triage_core::{BuiltinResolver, ReferenceQuery, Resolver, Rule};

fn resolver() -> BuiltinResolver {
    BuiltinResolver::new(["mary", "dana", "linda", "anne marie"])
}

fn filler() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("the witness took the stand.".to_string()),
        Just("she said nothing at all.".to_string()),
        Just("he left the room early.".to_string()),
        Just("mary called the police.".to_string()),
        Just("ms. smith was at the diner.".to_string()),
        Just("they waited for an hour.".to_string()),
        Just("her car was parked outside.".to_string()),
        "[a-z]{2,7} [a-z]{2,7} [a-z]{2,7}\\.".prop_map(String::from),
    ]
}

fn query(context: Vec<String>, target: String) -> ReferenceQuery {
    let mut s = context;
    s.push(target);
    ReferenceQuery {
        target_index_in_context: s.len() - 1,
        context_sentences: s,
        defendant_aliases: vec!["ms. smith".into(), "smith".into(), "jane".into()],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn direct_alias_ignores_context_order(
        context in prop::collection::vec(filler(), 0..=19),
        target in prop_oneof![Just("smith cried on the stand.".to_string()), Just("jane never asked.".to_string()), filler()],
        seed in any::<u64>(),
    ) {
        let r = resolver();
        let a = r.resolve(&query(context.clone(), target.clone())).unwrap();
        let mut shuffled = context;
        let mut state = seed;
        for k in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(k, (state >> 33) as usize % (k + 1));
        }
        let b = r.resolve(&query(shuffled, target)).unwrap();
        if a.rule_fired == Rule::DirectAlias {
            prop_assert_eq!(&b, &a);
        }
        prop_assert_eq!(b.rule_fired == Rule::DirectAlias, a.rule_fired == Rule::DirectAlias);
    }

    #[test]
    fn cluster_rule_needs_no_names(context in prop::collection::vec(filler(), 0..=19), target in filler()) {
        let q = query(context, target);
        let v = resolver().resolve(&q).unwrap();
        prop_assert_eq!(v.mentions_defendant, v.rule_fired != Rule::None);
        if v.rule_fired == Rule::SheHerOnlyCluster {
            let text = q.context_sentences.join(" ");
            for name in ["mary", "dana", "linda", "smith", "jane"] {
                prop_assert!(!text.split(|c: char| !c.is_alphanumeric()).any(|w| w == name));
            }
        }
    }
}

#[test]
fn rules_on_a_short_exchange() {
    let r = resolver();
    let ctx = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let v = r.resolve(&query(ctx(&["ms. smith came in late."]), "she ordered pie.".into())).unwrap();
    assert_eq!(v.rule_fired, Rule::PronounChain);
    let v = r.resolve(&query(ctx(&["mary came in late."]), "she ordered pie.".into())).unwrap();
    assert_eq!(v.rule_fired, Rule::None);
    let v = r.resolve(&query(ctx(&["someone came in late."]), "she ordered pie.".into())).unwrap();
    assert_eq!(v.rule_fired, Rule::SheHerOnlyCluster);
    let v = r.resolve(&query(vec![], "the cook ordered pie.".into())).unwrap();
    assert_eq!(v.rule_fired, Rule::None);
    assert!(!v.mentions_defendant);
}
