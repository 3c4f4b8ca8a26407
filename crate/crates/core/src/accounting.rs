//! Cost models: edge inference energy, cloud API dollars, and KV-cache bytes.
//!
//! The energy model counts `2·N` operations per processed token and divides
//! by hardware efficiency. It has no prompt-cache term: cached prompt tokens
//! cost the same joules as any other prompt token, which makes it a lower
//! bound on device energy rather than a cache-aware estimate.

use crate::trajectory::{TrajectoryRecord, TrajectoryTotals};
use crate::types::{KvGeometry, ModelProfile, Placement, Pricing, TokenUsage, Usd};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AccountingError {
    #[error("model '{model}' is {actual:?}-placed; this cost model needs {expected:?}")]
    WrongPlacement {
        model: String,
        expected: Placement,
        actual: Placement,
    },
    #[error("model '{model}' lacks {field}")]
    MissingField { model: String, field: &'static str },
    #[error("trajectory has supervisor calls but no supervisor profile")]
    MissingSupervisorProfile,
}

/// `2·N·(n_p + n_d) / η` joules.
pub fn inference_energy(
    param_count: f64,
    prompt_tokens: u64,
    generated_tokens: u64,
    efficiency: f64,
) -> f64 {
    2.0 * param_count * (prompt_tokens + generated_tokens) as f64 / efficiency
}

/// Energy of one edge call. Cached tokens are not discounted.
pub fn energy_joules(profile: &ModelProfile, usage: &TokenUsage) -> Result<f64, AccountingError> {
    if profile.placement != Placement::Edge {
        return Err(AccountingError::WrongPlacement {
            model: profile.name.clone(),
            expected: Placement::Edge,
            actual: profile.placement,
        });
    }
    let missing = |field| AccountingError::MissingField {
        model: profile.name.clone(),
        field,
    };
    let n = profile.param_count.ok_or_else(|| missing("param_count"))?;
    let eta = profile.efficiency.ok_or_else(|| missing("efficiency"))?;
    Ok(inference_energy(
        n,
        usage.prompt_tokens,
        usage.generated_tokens,
        eta,
    ))
}

fn micro_per_million(dollars_per_million: f64) -> u128 {
    (dollars_per_million * 1e6).round() as u128
}

/// Dollar cost of `usage` under three disjoint rates: uncached prompt tokens
/// at the prefill rate, cached prompt tokens at the cached rate, and
/// generated tokens at the generation rate. Prices are taken at whole
/// micro-dollar per million resolution, so the result is exact.
pub fn price_usage(pricing: &Pricing, usage: &TokenUsage) -> Usd {
    let cached = usage.cached_tokens.min(usage.prompt_tokens) as u128;
    let uncached = usage.prompt_tokens as u128 - cached;
    Usd::from_picodollars(
        uncached * micro_per_million(pricing.prefill)
            + cached * micro_per_million(pricing.cached)
            + usage.generated_tokens as u128 * micro_per_million(pricing.generated),
    )
}

pub fn api_cost_usd(profile: &ModelProfile, usage: &TokenUsage) -> Result<Usd, AccountingError> {
    if profile.placement != Placement::Cloud {
        return Err(AccountingError::WrongPlacement {
            model: profile.name.clone(),
            expected: Placement::Cloud,
            actual: profile.placement,
        });
    }
    let pricing = profile
        .pricing
        .as_ref()
        .ok_or_else(|| AccountingError::MissingField {
            model: profile.name.clone(),
            field: "pricing",
        })?;
    Ok(price_usage(pricing, usage))
}

/// `2·L·H_KV·d_h·b_act·C` bytes: keys and values for every layer.
pub fn kv_cache_bytes(geometry: &KvGeometry, context_tokens: u64) -> u64 {
    2 * geometry.layers
        * geometry.kv_heads
        * geometry.head_dim
        * geometry.bytes_per_activation
        * context_tokens
}

/// KV-cache bytes for `profile` holding `context_tokens`.
pub fn profile_kv_bytes(
    profile: &ModelProfile,
    context_tokens: u64,
) -> Result<u64, AccountingError> {
    let geometry = profile
        .kv
        .as_ref()
        .ok_or_else(|| AccountingError::MissingField {
            model: profile.name.clone(),
            field: "kv",
        })?;
    Ok(kv_cache_bytes(geometry, context_tokens))
}

/// Which profile pays for a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallRole {
    Executor,
    Supervisor,
}

#[derive(Debug, Clone, Copy)]
pub struct RoleProfiles<'a> {
    pub executor: &'a ModelProfile,
    pub supervisor: Option<&'a ModelProfile>,
}

/// Folds per-call usages into totals. Cloud calls add dollars, edge calls
/// add joules. Context and KV maxima come from executor calls only; the KV
/// figure is zero when the executor profile has no attention geometry.
pub fn aggregate_calls<I>(
    calls: I,
    profiles: RoleProfiles<'_>,
) -> Result<TrajectoryTotals, AccountingError>
where
    I: IntoIterator<Item = (CallRole, TokenUsage)>,
{
    let mut totals = TrajectoryTotals::default();
    for (role, usage) in calls {
        let profile = match role {
            CallRole::Executor => profiles.executor,
            CallRole::Supervisor => profiles
                .supervisor
                .ok_or(AccountingError::MissingSupervisorProfile)?,
        };
        match profile.placement {
            Placement::Cloud => totals.cost_usd += api_cost_usd(profile, &usage)?,
            Placement::Edge => totals.energy_joules += energy_joules(profile, &usage)?,
        }
        if role == CallRole::Executor {
            totals.max_context_tokens = totals.max_context_tokens.max(usage.context_tokens());
        }
    }
    totals.max_kv_bytes = profiles
        .executor
        .kv
        .map_or(0, |g| kv_cache_bytes(&g, totals.max_context_tokens));
    Ok(totals)
}

/// Every billed call of a trajectory, tagged with the role that made it.
pub fn trajectory_calls(record: &TrajectoryRecord) -> Vec<(CallRole, TokenUsage)> {
    let mut calls = Vec::with_capacity(record.turns.len() + record.supervisor_calls.len() + 1);
    if let Some(p) = &record.planning {
        calls.push((CallRole::Supervisor, p.usage));
    }
    calls.extend(record.turns.iter().map(|t| (CallRole::Executor, t.usage)));
    calls.extend(
        record
            .supervisor_calls
            .iter()
            .map(|c| (CallRole::Supervisor, c.usage)),
    );
    calls
}

pub fn aggregate(
    record: &TrajectoryRecord,
    profiles: RoleProfiles<'_>,
) -> Result<TrajectoryTotals, AccountingError> {
    aggregate_calls(trajectory_calls(record), profiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn edge(n: f64, eta: f64) -> ModelProfile {
        ModelProfile {
            name: "edge".into(),
            placement: Placement::Edge,
            param_count: Some(n),
            kv: Some(KvGeometry {
                layers: 36,
                kv_heads: 8,
                head_dim: 128,
                bytes_per_activation: 2,
            }),
            efficiency: Some(eta),
            pricing: None,
            context_cap: 32768,
        }
    }

    pub(crate) fn cloud() -> ModelProfile {
        ModelProfile {
            name: "cloud".into(),
            placement: Placement::Cloud,
            param_count: None,
            kv: None,
            efficiency: None,
            pricing: Some(Pricing::GPT4O),
            context_cap: 128_000,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn energy_worked_example() {
        let e = energy_joules(&edge(4e9, 1.5e12), &TokenUsage::new(1000, 0, 200)).unwrap();
        assert!(rel_close(e, 6.4, 1e-12), "{e}");
    }

    #[test]
    fn energy_zero_tokens() {
        assert_eq!(
            energy_joules(&edge(4e9, 1.5e12), &TokenUsage::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn energy_hand_evaluated() {
        // 2 * 8e9 * 1000 / 1e12
        let e = energy_joules(&edge(8e9, 1e12), &TokenUsage::new(500, 0, 500)).unwrap();
        assert!(rel_close(e, 16.0, 1e-12));
    }

    #[test]
    fn energy_ignores_cache() {
        let p = edge(4e9, 1.5e12);
        let a = energy_joules(&p, &TokenUsage::new(1000, 0, 200)).unwrap();
        let b = energy_joules(&p, &TokenUsage::new(1000, 900, 200)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn energy_on_cloud_is_error() {
        assert!(matches!(
            energy_joules(&cloud(), &TokenUsage::default()),
            Err(AccountingError::WrongPlacement { .. })
        ));
    }

    #[test]
    fn cost_one_million_prefill() {
        let c = api_cost_usd(&cloud(), &TokenUsage::new(1_000_000, 0, 0)).unwrap();
        assert_eq!(c, Usd::from_picodollars(2_500_000_000_000));
    }

    #[test]
    fn cost_mixed() {
        // 0.1*2.5 + 0.1*1.25 + 0.05*10
        let c = api_cost_usd(&cloud(), &TokenUsage::new(200_000, 100_000, 50_000)).unwrap();
        assert_eq!(c, Usd::from_picodollars(875_000_000_000));
        assert_eq!(
            api_cost_usd(&cloud(), &TokenUsage::default()).unwrap(),
            Usd::ZERO
        );
    }

    #[test]
    fn cost_on_edge_is_error() {
        assert!(api_cost_usd(&edge(4e9, 1e12), &TokenUsage::default()).is_err());
    }

    #[test]
    fn kv_examples() {
        let g = edge(4e9, 1e12).kv.unwrap();
        assert_eq!(kv_cache_bytes(&g, 32768), 4_831_838_208);
        assert_eq!(kv_cache_bytes(&g, 0), 0);
        let unit = KvGeometry {
            layers: 1,
            kv_heads: 1,
            head_dim: 1,
            bytes_per_activation: 2,
        };
        assert_eq!(kv_cache_bytes(&unit, 10), 40);
        assert_eq!(
            profile_kv_bytes(&edge(4e9, 1e12), 32768).unwrap(),
            4_831_838_208
        );
        assert!(profile_kv_bytes(&cloud(), 1).is_err());
    }

    #[test]
    fn aggregate_three_edge_calls() {
        let e = edge(4e9, 1.5e12);
        let calls = vec![(CallRole::Executor, TokenUsage::new(1000, 0, 200)); 3];
        let t = aggregate_calls(
            calls,
            RoleProfiles {
                executor: &e,
                supervisor: None,
            },
        )
        .unwrap();
        assert!(rel_close(t.energy_joules, 19.2, 1e-12));
        assert_eq!(t.cost_usd, Usd::ZERO);
        assert_eq!(t.max_context_tokens, 1200);
        assert_eq!(t.max_kv_bytes, kv_cache_bytes(&e.kv.unwrap(), 1200));
    }

    #[test]
    fn aggregate_mixed_placements() {
        let e = edge(4e9, 1.5e12);
        let c = cloud();
        let calls = vec![
            (CallRole::Executor, TokenUsage::new(1000, 0, 200)),
            (
                CallRole::Supervisor,
                TokenUsage::new(200_000, 100_000, 50_000),
            ),
            (CallRole::Executor, TokenUsage::new(1300, 0, 100)),
        ];
        let t = aggregate_calls(
            calls,
            RoleProfiles {
                executor: &e,
                supervisor: Some(&c),
            },
        )
        .unwrap();
        assert_eq!(t.cost_usd, Usd::from_picodollars(875_000_000_000));
        assert_eq!(t.max_context_tokens, 1400);
    }

    #[test]
    fn aggregate_empty() {
        let e = edge(4e9, 1.5e12);
        let t = aggregate_calls(
            Vec::new(),
            RoleProfiles {
                executor: &e,
                supervisor: None,
            },
        )
        .unwrap();
        assert_eq!(t, TrajectoryTotals::default());
    }

    #[test]
    fn supervisor_call_without_profile() {
        let e = edge(4e9, 1.5e12);
        let r = aggregate_calls(
            vec![(CallRole::Supervisor, TokenUsage::default())],
            RoleProfiles {
                executor: &e,
                supervisor: None,
            },
        );
        assert_eq!(r, Err(AccountingError::MissingSupervisorProfile));
    }
}
