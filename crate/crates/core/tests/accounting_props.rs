mod common;

use common::{cloud, edge};
use hymas_core::accounting::{
    aggregate_calls, api_cost_usd, energy_joules, kv_cache_bytes, CallRole, RoleProfiles,
};
use hymas_core::{KvGeometry, TokenUsage, Usd};
use proptest::prelude::*;

fn usage() -> impl Strategy<Value = TokenUsage> {
    (0u64..2_000_000, 0u64..2_000_000, 0u64..500_000)
        .prop_map(|(p, c, g)| TokenUsage::new(p, c.min(p), g))
}

fn calls() -> impl Strategy<Value = Vec<(bool, TokenUsage)>> {
    prop::collection::vec((any::<bool>(), usage()), 0..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn energy_doubles_with_tokens(p in 0u64..1_000_000, g in 0u64..1_000_000, n in 1e8f64..1e11) {
        let profile = { let mut e = edge(1); e.param_count = Some(n); e };
        let one = energy_joules(&profile, &TokenUsage::new(p, 0, g)).unwrap();
        let two = energy_joules(&profile, &TokenUsage::new(2 * p, 0, 2 * g)).unwrap();
        prop_assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn energy_linear_in_params(p in 0u64..1_000_000, g in 0u64..1_000_000, n in 1e8f64..1e11) {
        let mut a = edge(1);
        a.param_count = Some(n);
        let mut b = edge(1);
        b.param_count = Some(2.0 * n);
        let u = TokenUsage::new(p, 0, g);
        prop_assert_eq!(energy_joules(&b, &u).unwrap(), 2.0 * energy_joules(&a, &u).unwrap());
    }

    #[test]
    fn cost_additive_over_splits(u in usage(), cut in 0.0f64..1.0) {
        let split = |x: u64| ((x as f64) * cut) as u64;
        let c1 = split(u.cached_tokens);
        let first = TokenUsage::new(split(u.prompt_tokens).max(c1), c1, split(u.generated_tokens));
        let second = TokenUsage::new(
            u.prompt_tokens - first.prompt_tokens,
            u.cached_tokens - first.cached_tokens,
            u.generated_tokens - first.generated_tokens,
        );
        prop_assume!(second.cached_tokens <= second.prompt_tokens);
        let whole = api_cost_usd(&cloud(), &u).unwrap();
        let parts = api_cost_usd(&cloud(), &first).unwrap() + api_cost_usd(&cloud(), &second).unwrap();
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn cost_monotone(u in usage(), d in 0u64..1000) {
        let base = api_cost_usd(&cloud(), &u).unwrap();
        let more = [
            TokenUsage::new(u.prompt_tokens + d, u.cached_tokens, u.generated_tokens),
            TokenUsage::new(u.prompt_tokens + d, u.cached_tokens + d, u.generated_tokens),
            TokenUsage::new(u.prompt_tokens, u.cached_tokens, u.generated_tokens + d),
        ];
        for m in more {
            prop_assert!(api_cost_usd(&cloud(), &m).unwrap() >= base);
        }
    }

    #[test]
    fn kv_linear(l in 1u64..100, h in 1u64..64, d in 1u64..256, b in 1u64..4, c in 0u64..200_000, k in 1u64..5) {
        let g = KvGeometry { layers: l, kv_heads: h, head_dim: d, bytes_per_activation: b };
        let base = kv_cache_bytes(&g, c);
        prop_assert_eq!(kv_cache_bytes(&g, k * c), k * base);
        prop_assert_eq!(base, 2 * l * h * d * b * c);
        let scaled = KvGeometry { layers: k * l, ..g };
        prop_assert_eq!(kv_cache_bytes(&scaled, c), k * base);
    }

    #[test]
    fn aggregate_order_invariant(mut cs in calls(), seed in any::<u64>()) {
        let e = edge(u64::MAX);
        let c = cloud();
        let profiles = RoleProfiles { executor: &e, supervisor: Some(&c) };
        let tag = |v: &[(bool, TokenUsage)]| -> Vec<(CallRole, TokenUsage)> {
            v.iter().map(|&(ex, u)| (if ex { CallRole::Executor } else { CallRole::Supervisor }, u)).collect()
        };
        let a = aggregate_calls(tag(&cs), profiles).unwrap();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        cs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = aggregate_calls(tag(&cs), profiles).unwrap();
        prop_assert_eq!(a.cost_usd, b.cost_usd);
        prop_assert_eq!(a.max_context_tokens, b.max_context_tokens);
        prop_assert_eq!(a.max_kv_bytes, b.max_kv_bytes);
        prop_assert!((a.energy_joules - b.energy_joules).abs() <= 1e-9 * a.energy_joules.max(1.0));
        let direct: Usd = cs.iter().filter(|(ex, _)| !ex).map(|(_, u)| api_cost_usd(&c, u).unwrap()).sum();
        prop_assert_eq!(a.cost_usd, direct);
    }
}
