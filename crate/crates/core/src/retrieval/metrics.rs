/// Fraction of the first `k` ranked items sharing the query's class. Lists
/// shorter than `k` still divide by `k`.
pub fn precision_at_k<L: PartialEq>(ranked: &[L], query: &L, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|l| *l == query).count();
    hits as f64 / k as f64
}

/// Sum of `Precision@i` over relevant positions `i ≤ k`, divided by
/// `min(total_relevant, k)`; zero when that minimum is zero.
pub fn average_precision_at_k<L: PartialEq>(ranked: &[L], query: &L, k: usize, total_relevant: usize) -> f64 {
    let norm = total_relevant.min(k);
    if norm == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, l) in ranked.iter().take(k).enumerate() {
        if l == query {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / norm as f64
}
