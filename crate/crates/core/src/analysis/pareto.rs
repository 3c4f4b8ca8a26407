use serde::{Deserialize, Serialize};

/// One configuration on a cost/performance plane. `cost` is dollars or
/// joules depending on the chosen axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub label: String,
    pub cost: f64,
    pub performance: f64,
}

impl ConfigPoint {
    pub fn new(label: impl Into<String>, cost: f64, performance: f64) -> Self {
        Self {
            label: label.into(),
            cost,
            performance,
        }
    }
}

/// Points not dominated by any other point, sorted by cost ascending.
///
/// `q` dominates `p` when it is no more expensive, performs at least as
/// well, and is strictly better on one axis. Points with identical
/// coordinates never dominate each other, so duplicates survive together.
/// Runs in O(n log n).
pub fn pareto_frontier(points: &[ConfigPoint]) -> Vec<ConfigPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].cost.total_cmp(&points[b].cost).then(a.cmp(&b)));

    let mut frontier = Vec::new();
    // Best performance among strictly cheaper points.
    let mut best_cheaper = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let cost = points[order[i]].cost;
        let mut j = i;
        while j < order.len() && points[order[j]].cost == cost {
            j += 1;
        }
        let group = &order[i..j];
        let top = group
            .iter()
            .map(|&k| points[k].performance)
            .fold(f64::NEG_INFINITY, f64::max);
        if top > best_cheaper {
            frontier.extend(
                group
                    .iter()
                    .filter(|&&k| points[k].performance == top)
                    .map(|&k| points[k].clone()),
            );
            best_cheaper = top;
        }
        i = j;
    }
    frontier
}
