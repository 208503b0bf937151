use rand::Rng;

use crate::rng;

/// Greedy max-min subsampling of `k` out of `candidates` indices. The first
/// index is drawn uniformly from `seed`.
pub fn farthest_point_sample<F>(dist: F, candidates: usize, k: usize, seed: u64) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    if candidates == 0 || k == 0 {
        return Vec::new();
    }
    let first = rng::rng(seed).gen_range(0..candidates);
    farthest_point_sample_from(dist, candidates, k, first)
}

/// As [`farthest_point_sample`] with an explicit first index. Each next
/// index maximizes the distance to the selected set, ties to the lowest
/// index.
pub fn farthest_point_sample_from<F>(dist: F, candidates: usize, k: usize, first: usize) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    let k = k.min(candidates);
    if k == 0 {
        return Vec::new();
    }
    assert!(first < candidates, "first index {first} out of range");
    let mut chosen = vec![first];
    let mut taken = vec![false; candidates];
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..candidates).map(|c| dist(first, c)).collect();
    while chosen.len() < k {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for c in 0..candidates {
            if !taken[c] && nearest[c] > best_d {
                best = Some(c);
                best_d = nearest[c];
            }
        }
        let next = best.expect("fewer candidates than requested");
        taken[next] = true;
        chosen.push(next);
        for (c, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist(next, c));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: usize, b: usize) -> f64 {
        (a as f64 - b as f64).abs()
    }

    #[test]
    fn far_end_first() {
        assert_eq!(farthest_point_sample_from(line, 10, 2, 0), vec![0, 9]);
    }

    #[test]
    fn third_point_breaks_tie_low() {
        // 4 and 5 are both at distance 4 from {0, 9}.
        assert_eq!(farthest_point_sample_from(line, 10, 3, 0), vec![0, 9, 4]);
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let mut s = farthest_point_sample(line, 10, 10, 3);
        s.sort();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_and_deterministic() {
        let a = farthest_point_sample(line, 50, 7, 11);
        assert_eq!(a, farthest_point_sample(line, 50, 7, 11));
        assert_eq!(a.len(), 7);
    }

    #[test]
    fn selection_matches_max_min_definition() {
        let pts: Vec<f64> = (0..30).map(|i| ((i * 37) % 29) as f64 * 0.7 + (i as f64).sin()).collect();
        let d = |a: usize, b: usize| (pts[a] - pts[b]).abs();
        let s = farthest_point_sample_from(d, pts.len(), 8, 5);
        for t in 1..s.len() {
            let score = |c: usize| s[..t].iter().map(|&p| d(p, c)).fold(f64::INFINITY, f64::min);
            let max = (0..pts.len()).filter(|c| !s[..t].contains(c)).map(score).fold(f64::MIN, f64::max);
            assert_eq!(score(s[t]), max);
        }
    }
}
