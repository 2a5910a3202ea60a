//! Oracles shared by several test targets.

/// Two-sided p by listing all 2ⁿ sign assignments of the midranks.
pub fn brute_force_wilcoxon(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|v| {
            let below = abs.iter().filter(|w| *w < v).count() as f64;
            let equal = abs.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let observed: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let dev = (observed - mean).abs();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let w: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            (w - mean).abs() >= dev - 1e-9
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}
