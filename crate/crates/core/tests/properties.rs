use forge_core::audit::{
    above_random, eval_blind_partitioned, eval_plain, eval_shuffled, ShuffleScoring,
};
use forge_core::backends::{parse_choice, Choice, Mode, Scripted};
use forge_core::curriculum::{CurriculumConfig, Formula};
use forge_core::dataset::{
    apply_visibility_relabel, gen_synthetic_base, option_letter, partition_by_visibility, Partition,
};
use forge_core::generation::{
    build_dataset, numeric_ids, rewrite_agent_id, GenerationConfig, Strategy as Build,
    StyledExpert, TemplateExpert,
};
use forge_core::stats::chi_square_uniform;
use forge_core::{Exact, McqaDataset};
use proptest::prelude::*;

fn dataset(n: usize, rate: f64, seed: u64, debiased: bool, styled: bool) -> McqaDataset {
    let base = apply_visibility_relabel(&gen_synthetic_base(n, rate, seed));
    let strategy = if debiased {
        Build::Debiased
    } else {
        Build::Llm
    };
    let cfg = GenerationConfig::new(strategy, seed);
    if styled {
        build_dataset(&base, &cfg, &StyledExpert::new("notably", seed))
            .unwrap()
            .dataset
    } else {
        build_dataset(&base, &cfg, &TemplateExpert::new(seed))
            .unwrap()
            .dataset
    }
}

fn scripted() -> impl Strategy<Value = Scripted> {
    prop_oneof![
        Just(Scripted::Oracle),
        (0usize..4).prop_map(Scripted::FixedPosition),
        Just(Scripted::LongestOption),
        any::<u64>().prop_map(|seed| Scripted::MarkerSeeker {
            marker: "notably".into(),
            seed
        }),
        any::<u64>().prop_map(|seed| Scripted::UniformRandom { seed }),
        any::<u64>().prop_map(|seed| Scripted::AbsenceDefault { seed }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_are_a_disjoint_cover(
        n in 1usize..150, rate in 0.0f64..1.0, seed: u64, debiased: bool, styled: bool,
    ) {
        let ds = dataset(n, rate, seed, debiased, styled);
        let parts = partition_by_visibility(&ds).unwrap();
        let mut seen = vec![0u8; ds.len()];
        for p in Partition::ALL {
            for &i in parts.get(p) {
                seen[i] += 1;
                prop_assert_eq!(Partition::of(&ds.records()[i]).unwrap(), p);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn relabeling_is_idempotent(n in 0usize..200, rate in 0.0f64..1.0, seed: u64) {
        let once = apply_visibility_relabel(&gen_synthetic_base(n, rate, seed));
        let twice = apply_visibility_relabel(&once);
        prop_assert_eq!(once.to_canonical_bytes(), twice.to_canonical_bytes());
    }

    #[test]
    fn shuffled_never_beats_plain(
        n in 4usize..120, seed: u64, debiased: bool, backend in scripted(), variants in 2usize..6, audit_seed: u64,
    ) {
        let ds = dataset(n, 0.188, seed, debiased, true);
        let plain = eval_plain::<Exact>(&ds, &backend, Mode::Full).unwrap().accuracy;
        let all = eval_shuffled::<Exact>(&ds, &backend, Mode::Full, variants, audit_seed, ShuffleScoring::AllVariants)
            .unwrap()
            .accuracy;
        let mean = eval_shuffled::<Exact>(&ds, &backend, Mode::Full, variants, audit_seed, ShuffleScoring::Mean)
            .unwrap()
            .accuracy;
        prop_assert!(all <= plain, "{:?} {:?}", all, plain);
        prop_assert!(all <= mean, "{:?} {:?}", all, mean);
    }

    #[test]
    fn blind_partitions_recombine_exactly(n in 1usize..150, seed: u64, backend in scripted()) {
        let ds = dataset(n, 0.3, seed, true, false);
        let b = eval_blind_partitioned::<Exact>(&ds, &backend).unwrap();
        let total: usize = b.partitions.iter().map(|p| p.1).sum();
        prop_assert_eq!(total, ds.len());
        let mut weighted = Exact::from_integer(0);
        for &(_, size, _, acc) in &b.partitions {
            if let Some(acc) = acc {
                weighted += acc * Exact::from_integer(size as i64);
            }
        }
        prop_assert_eq!(weighted / Exact::from_integer(ds.len() as i64), b.overall.accuracy);
    }

    #[test]
    fn above_random_plus_chance_is_identity(num in 0i64..=10_000, den in 1i64..=10_000, k in 2usize..10) {
        let acc = Exact::new(num.min(den), den);
        let d = above_random(acc, k).unwrap();
        prop_assert_eq!(d + Exact::new(1, k as i64), acc);
    }

    #[test]
    fn interpolated_schedule_is_monotone(
        lo in 0u32..=100, span in 0u32..=100, tau in 1u64..3000, t in 0u64..6000,
    ) {
        let d_min = Exact::from_integer(lo as i64);
        let d_max = Exact::from_integer((lo + span).min(100) as i64);
        let cfg = CurriculumConfig::new(d_min, d_max, tau, Formula::Interpolated).unwrap();
        let (a, b) = (cfg.drop_fraction(t), cfg.drop_fraction(t + 1));
        prop_assert!(b <= a);
        prop_assert!(d_min <= a && a <= d_max);
        prop_assert_eq!(cfg.drop_fraction(0), d_max);
        prop_assert_eq!(cfg.drop_fraction(tau + t), d_min);
    }

    #[test]
    fn chi_square_is_nonnegative_and_zero_when_flat(counts in prop::collection::vec(0u64..1000, 2..8), level in 1u64..500) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        prop_assert!(chi_square_uniform::<Exact>(&counts) >= Exact::from_integer(0));
        let flat = vec![level; counts.len()];
        prop_assert_eq!(chi_square_uniform::<Exact>(&flat), Exact::from_integer(0));
    }

    #[test]
    fn answer_positions_are_balanced(n in 1usize..300, seed: u64, debiased: bool) {
        let ds = dataset(n, 0.188, seed, debiased, false);
        let mut counts = [0usize; 4];
        for inst in ds.iter() {
            counts[inst.correct_index] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1, "{:?}", counts);
    }

    #[test]
    fn rewritten_text_names_only_the_target(source in 1u32..100_000, target in 1u32..100_000, gloss in "[a-z ]{0,30}") {
        let text = format!("Agent {source} {gloss}.");
        let out = rewrite_agent_id(&text, &target.to_string()).unwrap();
        let target_str = target.to_string();
        prop_assert_eq!(numeric_ids(&out), vec![target_str.as_str()]);
    }

    #[test]
    fn leading_letter_parses(i in 0usize..8, tail in "([ .):,;-][a-zA-Z ]{0,20})?") {
        let reply = format!("{}{}", option_letter(i), tail);
        prop_assert_eq!(parse_choice(&reply, 8), Choice::Index(i));
        prop_assert_eq!(parse_choice(&reply.to_lowercase(), 8), Choice::Index(i));
    }

    #[test]
    fn dataset_bytes_round_trip(n in 1usize..60, seed: u64, debiased: bool) {
        let ds = dataset(n, 0.2, seed, debiased, true);
        let bytes = ds.to_canonical_bytes();
        let back = McqaDataset::from_reader(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.to_canonical_bytes(), bytes);
    }
}
