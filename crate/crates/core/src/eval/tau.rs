//! Tie-corrected Kendall rank correlation (tau-b).
//!
//! Computed the scipy way: sort by the first key, count tie groups, and
//! count discordances as mergesort swaps on the second key, giving
//! `tau_b = (C - D) / sqrt((n0 - n1) * (n0 - n2))`. The test suite checks
//! this against literal O(n^2) pair counting, which is the definitional
//! route.

use crate::error::{Error, Result};

pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "rank vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Parameter("kendall tau needs at least two entries".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    // tie pair counts: n1 in x, n2 in y, n3 in both
    let n0 = n * (n - 1) / 2;
    let mut n1 = 0usize;
    let mut n3 = 0usize;
    let mut run = 1usize;
    let mut xy_run = 1usize;
    for w in 1..n {
        if x[order[w]] == x[order[w - 1]] {
            run += 1;
            if y[order[w]] == y[order[w - 1]] {
                xy_run += 1;
            } else {
                n3 += pairs(xy_run);
                xy_run = 1;
            }
        } else {
            n1 += pairs(run);
            run = 1;
            n3 += pairs(xy_run);
            xy_run = 1;
        }
    }
    n1 += pairs(run);
    n3 += pairs(xy_run);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let swaps = count_swaps(&mut ys);

    let mut n2 = 0usize;
    run = 1;
    for w in 1..n {
        if ys[w] == ys[w - 1] {
            run += 1;
        } else {
            n2 += pairs(run);
            run = 1;
        }
    }
    n2 += pairs(run);

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(Error::Parameter("kendall tau undefined: one ranking is all ties".into()));
    }
    let concordant_minus_discordant =
        n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((concordant_minus_discordant / denom.sqrt()).clamp(-1.0, 1.0))
}

fn pairs(t: usize) -> usize {
    t * (t - 1) / 2
}

/// Mergesort swap counting; equals the number of discordant pairs once the
/// array is ordered by the other key.
fn count_swaps(values: &mut [f64]) -> u64 {
    let n = values.len();
    let mut buffer = values.to_vec();
    let mut swaps = 0u64;
    let mut width = 1usize;
    while width < n {
        let mut lo = 0usize;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                swaps += merge(&values[lo..mid], &values[mid..hi], &mut buffer[lo..hi]);
                values[lo..hi].copy_from_slice(&buffer[lo..hi]);
            }
            lo += 2 * width;
        }
        width *= 2;
    }
    swaps
}

fn merge(left: &[f64], right: &[f64], out: &mut [f64]) -> u64 {
    let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);
    let mut swaps = 0u64;
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            swaps += (left.len() - i) as u64;
            out[k] = right[j];
            j += 1;
        } else {
            out[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        out[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        out[k] = right[j];
        j += 1;
        k += 1;
    }
    swaps
}

/// Definitional O(n^2) tau-b; kept public for oracle-style verification.
pub fn kendall_tau_bruteforce(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Parameter("need two aligned vectors of length >= 2".into()));
    }
    let n = x.len();
    let (mut concordant, mut discordant) = (0u64, 0u64);
    let (mut tied_x_only, mut tied_y_only) = (0u64, 0u64);
    for a in 0..n {
        for b in a + 1..n {
            let dx = x[a].total_cmp(&x[b]) as i8;
            let dy = y[a].total_cmp(&y[b]) as i8;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tied_x_only += 1,
                (_, 0) => tied_y_only += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let c = concordant as f64;
    let d = discordant as f64;
    let denom = (c + d + tied_y_only as f64) * (c + d + tied_x_only as f64);
    if denom == 0.0 {
        return Err(Error::Parameter("kendall tau undefined: one ranking is all ties".into()));
    }
    Ok((c - d) / denom.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_reversal() {
        let r: Vec<f64> = (1..=4).map(f64::from).collect();
        let rev: Vec<f64> = r.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&r, &r).unwrap(), 1.0);
        assert_eq!(kendall_tau(&r, &rev).unwrap(), -1.0);
    }

    #[test]
    fn adjacent_swap_of_four() {
        // one adjacent swap: C = 5, D = 1 -> 4/6
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        assert!((kendall_tau(&a, &b).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn matches_bruteforce_on_tied_data() {
        let a = [1.0, 2.5, 2.5, 4.0, 5.0, 6.0];
        let b = [2.0, 1.0, 3.5, 3.5, 5.0, 6.0];
        let fast = kendall_tau(&a, &b).unwrap();
        let slow = kendall_tau_bruteforce(&a, &b).unwrap();
        assert!((fast - slow).abs() < 1e-14);
    }

    #[test]
    fn exhaustive_small_permutations_match_bruteforce() {
        fn permute(n: usize) -> Vec<Vec<f64>> {
            let mut out = Vec::new();
            let mut items: Vec<f64> = (1..=n).map(|v| v as f64).collect();
            heap_permutations(&mut items, n, &mut out);
            out
        }
        fn heap_permutations(items: &mut Vec<f64>, k: usize, out: &mut Vec<Vec<f64>>) {
            if k == 1 {
                out.push(items.clone());
                return;
            }
            for i in 0..k {
                heap_permutations(items, k - 1, out);
                if k % 2 == 0 {
                    items.swap(i, k - 1);
                } else {
                    items.swap(0, k - 1);
                }
            }
        }
        for n in 2..=5 {
            let identity: Vec<f64> = (1..=n).map(|v| v as f64).collect();
            for perm in permute(n) {
                let fast = kendall_tau(&identity, &perm).unwrap();
                let slow = kendall_tau_bruteforce(&identity, &perm).unwrap();
                assert!((fast - slow).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
