use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::vql::VisType;

use super::{CheckName, Hardness, OutcomeKind};

/// Checks that need pixel analysis and are reported but never run.
pub const NOT_EVALUATED: [&str; 2] = ["layout", "scale_ticks"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub outcome: OutcomeKind,
    pub failed_check: Option<CheckName>,
    pub detail: Option<String>,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n_cases: usize,
    pub invalid: usize,
    pub illegal: usize,
    pub pass: usize,
    pub invalid_rate: f64,
    pub illegal_rate: f64,
    pub pass_rate: f64,
    pub mean_readability: Option<f64>,
    pub mean_quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub summary: Rates,
    pub per_hardness: IndexMap<String, Rates>,
    pub per_chart_type: IndexMap<String, Rates>,
    pub cases: Vec<CaseSummary>,
    pub not_evaluated: IndexMap<String, String>,
    /// Cases that failed on a model or prompt fault rather than a bad
    /// answer.
    pub internal_faults: usize,
}

/// Percentages to two decimals that sum to exactly 100.00.
pub fn largest_remainder_rates(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0.0; counts.len()];
    }
    const SCALE: u128 = 10_000;
    let exact: Vec<u128> = counts.iter().map(|&c| c as u128 * SCALE).collect();
    let mut units: Vec<u128> = exact.iter().map(|e| e / n as u128).collect();
    let short = SCALE - units.iter().sum::<u128>();
    let mut by_rem: Vec<usize> = (0..counts.len()).collect();
    by_rem.sort_by(|&a, &b| {
        (exact[b] % n as u128)
            .cmp(&(exact[a] % n as u128))
            .then(a.cmp(&b))
    });
    for &i in by_rem.iter().take(short as usize) {
        units[i] += 1;
    }
    units.iter().map(|&u| u as f64 / 100.0).collect()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub(crate) struct Scored {
    pub kind: OutcomeKind,
    pub readability: Option<f64>,
    pub quality: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| round2(sum / n as f64))
}

pub(crate) fn rates<'a>(items: impl Iterator<Item = &'a Scored> + Clone) -> Rates {
    let count = |k| items.clone().filter(|s| s.kind == k).count();
    let (invalid, illegal, pass) = (
        count(OutcomeKind::Invalid),
        count(OutcomeKind::Illegal),
        count(OutcomeKind::Pass),
    );
    let r = largest_remainder_rates(&[invalid, illegal, pass]);
    let mean_readability = mean(items.clone().filter_map(|s| s.readability));
    // Without any judged chart the quality of passing cases is unknown.
    let mean_quality = mean_readability.and_then(|_| mean(items.clone().filter_map(|s| s.quality)));
    Rates {
        n_cases: invalid + illegal + pass,
        invalid,
        illegal,
        pass,
        invalid_rate: r[0],
        illegal_rate: r[1],
        pass_rate: r[2],
        mean_readability,
        mean_quality,
    }
}

pub(crate) fn build_report(
    scored: &[Scored],
    hardness: &[Hardness],
    chart_type: &[VisType],
    cases: Vec<CaseSummary>,
    internal_faults: usize,
) -> MetricsReport {
    let mut per_hardness = IndexMap::new();
    for h in Hardness::ALL {
        let sel: Vec<&Scored> = scored
            .iter()
            .zip(hardness)
            .filter(|(_, x)| **x == h)
            .map(|(s, _)| s)
            .collect();
        if !sel.is_empty() {
            per_hardness.insert(h.label().to_string(), rates(sel.into_iter()));
        }
    }
    let mut per_chart_type = IndexMap::new();
    for v in VisType::ALL {
        let sel: Vec<&Scored> = scored
            .iter()
            .zip(chart_type)
            .filter(|(_, x)| **x == v)
            .map(|(s, _)| s)
            .collect();
        if !sel.is_empty() {
            let key = serde_json::to_value(v).expect("vis type serializes");
            per_chart_type.insert(
                key.as_str().unwrap_or_default().to_string(),
                rates(sel.into_iter()),
            );
        }
    }
    MetricsReport {
        summary: rates(scored.iter()),
        per_hardness,
        per_chart_type,
        cases,
        not_evaluated: NOT_EVALUATED
            .iter()
            .map(|k| (k.to_string(), "not evaluated".to_string()))
            .collect(),
        internal_faults,
    }
}
