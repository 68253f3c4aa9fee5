use std::collections::BTreeSet;

use proptest::prelude::*;

use wsc_core::facts::{parse_fact_file, serialize_fact_file, Fact, Predicate};
use wsc_core::graph::{
    label, topological_order, validate_sentence_graph, Edge, InstanceGraph, LabeledGraph,
    INSTANCE_OF,
};
use wsc_core::matcher::{
    enumerate_isomorphisms, extract_knowledge_core, extract_sentence_core, node_compatible,
    CompatibilityPolicy, SearchBudget,
};
use wsc_core::oracle::{check_mapping, generate_instance, RandomInstanceSpec};
use wsc_core::resolver::{solve, SolveConfig};

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

fn fact() -> impl Strategy<Value = Fact> {
    prop::sample::select(Predicate::ALL.to_vec()).prop_flat_map(|p| {
        prop::collection::vec(ident(), p.arity()).prop_map(move |args| Fact::new(p, &args).unwrap())
    })
}

fn instance() -> impl Strategy<Value = RandomInstanceSpec> {
    (
        3usize..=10,
        2usize..=6,
        0.1f64..0.6,
        1usize..=3,
        1usize..=3,
        any::<u64>(),
    )
        .prop_map(
            |(s, k, density, labels, classes, seed)| RandomInstanceSpec {
                sentence_nodes: s,
                knowledge_nodes: k.min(s),
                edge_density: density,
                label_alphabet_size: labels,
                class_alphabet_size: classes,
                seed,
            },
        )
}

fn budget() -> SearchBudget {
    SearchBudget::new(usize::MAX, std::time::Duration::from_secs(60), 64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn facts_round_trip(facts in prop::collection::vec(fact(), 0..20)) {
        let text = serialize_fact_file(&facts);
        let parsed = parse_fact_file(&text).unwrap();
        let want: BTreeSet<Fact> = facts.into_iter().collect();
        let got: BTreeSet<Fact> = parsed.iter().cloned().collect();
        prop_assert_eq!(&got, &want);
        prop_assert_eq!(serialize_fact_file(&parsed), text);
    }

    #[test]
    fn generated_graphs_are_well_formed(spec in instance()) {
        let b = generate_instance(&spec).unwrap();
        let s = b.problem.sentence();
        // every node is either an instance or a class, never both
        let instances = s.instance_nodes();
        let classes = s.class_nodes();
        prop_assert!(instances.is_disjoint(classes));
        prop_assert_eq!(instances.len() + classes.len(), s.graph().nodes().len());
        for n in instances {
            let outgoing = s.graph().edges().iter().filter(|e| &e.source == n && e.label.as_str() == INSTANCE_OF).count();
            prop_assert_eq!(outgoing, 1);
        }
        prop_assert!(topological_order(s.graph()).is_some());
        prop_assert!(topological_order(b.knowledge.graph()).is_some());
        prop_assert_eq!(b.knowledge.same_as_pairs().len(), 1);
    }

    #[test]
    fn every_enumerated_mapping_is_an_isomorphism(spec in instance()) {
        let b = generate_instance(&spec).unwrap();
        let policy = CompatibilityPolicy::class_only();
        let compat = |x: &_, y: &_| node_compatible(&policy, b.problem.sentence(), &b.knowledge, x, y);
        let s = extract_sentence_core(b.problem.sentence());
        let k = extract_knowledge_core(&b.knowledge);
        let e = enumerate_isomorphisms(&s, &k, compat, &budget()).unwrap();
        prop_assert!(e.exhaustiveness.is_complete());
        for m in &e.mappings {
            prop_assert!(check_mapping(&s, &k, compat, m));
        }
        let distinct: BTreeSet<_> = e.mappings.iter().collect();
        prop_assert_eq!(distinct.len(), e.mappings.len());
    }

    #[test]
    fn extra_sentence_edges_never_lose_mappings(spec in instance(), pick in any::<(usize, usize, bool)>()) {
        let b = generate_instance(&spec).unwrap();
        let sentence = b.problem.sentence();
        let order: Vec<_> = topological_order(sentence.graph())
            .unwrap()
            .into_iter()
            .filter(|n| sentence.is_instance(n.as_str()))
            .collect();
        let (i, j) = (pick.0 % order.len(), pick.1 % order.len());
        prop_assume!(i != j);
        let (from, to) = if i < j { (&order[i], &order[j]) } else { (&order[j], &order[i]) };
        let lbl = label(if pick.2 { "r0" } else { "r1" });
        let mut edges: Vec<Edge> = sentence.graph().edges().iter().cloned().collect();
        edges.push(Edge::new(from.clone(), lbl, to.clone()));
        let bigger = validate_sentence_graph(&LabeledGraph::from_edges(edges)).unwrap();

        let policy = CompatibilityPolicy::class_only();
        let k = extract_knowledge_core(&b.knowledge);
        let before = enumerate_isomorphisms(
            &extract_sentence_core(sentence), &k,
            |x, y| node_compatible(&policy, sentence, &b.knowledge, x, y), &budget(),
        ).unwrap();
        let after = enumerate_isomorphisms(
            &extract_sentence_core(&bigger), &k,
            |x, y| node_compatible(&policy, &bigger, &b.knowledge, x, y), &budget(),
        ).unwrap();
        let after: BTreeSet<_> = after.mappings.into_iter().collect();
        for m in before.mappings {
            prop_assert!(after.contains(&m));
        }
    }

    #[test]
    fn solving_is_deterministic(spec in instance()) {
        let b = generate_instance(&spec).unwrap();
        let cfg = SolveConfig { budget: budget(), ..SolveConfig::default() };
        let one = solve(&b, &cfg);
        let two = solve(&b, &cfg);
        prop_assert_eq!(&one.verdict, &two.verdict);
        prop_assert_eq!(one.report.stable().to_json(), two.report.stable().to_json());
    }
}

#[test]
fn a_thousand_seeds_generate_valid_bundles() {
    for seed in 0..1000 {
        let spec = RandomInstanceSpec::new(3 + (seed % 8) as usize, 2 + (seed % 2) as usize, seed);
        let b = generate_instance(&spec).unwrap();
        let roles = [
            b.problem.pronoun(),
            b.problem.answer_choice_1(),
            b.problem.answer_choice_2(),
        ];
        assert_eq!(roles.iter().collect::<BTreeSet<_>>().len(), 3);
        // no isolated instance nodes, so every instance node is in a core
        assert_eq!(
            extract_sentence_core(b.problem.sentence()).nodes.len(),
            spec.sentence_nodes
        );
        assert_eq!(
            extract_knowledge_core(&b.knowledge).nodes.len(),
            spec.knowledge_nodes
        );
    }
}
