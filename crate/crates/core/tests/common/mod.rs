#![allow(dead_code)]

use std::collections::HashMap;

use hymas_core::environments::ScriptedEnv;
use hymas_core::{
    Architecture, BenchmarkTag, KvGeometry, ModelProfile, Placement, Pricing, RunConfig, Sampling,
    TaskInstance, ToolCall,
};

pub const DEFAULT_OBS: &str = "nothing here";

pub fn edge(cap: u64) -> ModelProfile {
    ModelProfile {
        name: "edge-8b".into(),
        placement: Placement::Edge,
        param_count: Some(8e9),
        kv: Some(KvGeometry {
            layers: 36,
            kv_heads: 8,
            head_dim: 128,
            bytes_per_activation: 2,
        }),
        efficiency: Some(1.5e12),
        pricing: None,
        context_cap: cap,
    }
}

pub fn cloud() -> ModelProfile {
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

pub fn config(arch: Architecture, max_turns: u32, verify_interval: u32) -> RunConfig {
    config_with_cap(arch, max_turns, verify_interval, 1_000_000)
}

pub fn config_with_cap(
    arch: Architecture,
    max_turns: u32,
    verify_interval: u32,
    cap: u64,
) -> RunConfig {
    RunConfig {
        architecture: arch,
        max_turns: Some(max_turns),
        verify_interval,
        executor: edge(cap),
        supervisor: arch.needs_supervisor().then(cloud),
        environment_id: "scripted".into(),
        seed: 7,
        sampling: Sampling::default(),
    }
}

pub fn task(golds: &[&str]) -> TaskInstance {
    TaskInstance {
        id: "t1".into(),
        query: "Which city hosts the tower?".into(),
        gold_answers: golds.iter().map(|s| s.to_string()).collect(),
        benchmark_tag: BenchmarkTag::Hotpotqa,
        environment_id: "scripted".into(),
    }
}

pub fn env() -> ScriptedEnv {
    ScriptedEnv::new(
        HashMap::from([(
            ToolCall::new("search", "Tower"),
            "The tower is in Paris.".to_string(),
        )]),
        DEFAULT_OBS,
    )
}

/// `n` distinct non-finishing executor replies.
pub fn searches(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("Looking. search[item{i}]"))
        .collect()
}

pub const PLAN: &str = "<PLAN>\n1. search[Tower]\n2. finish[Paris]\n</PLAN>";
