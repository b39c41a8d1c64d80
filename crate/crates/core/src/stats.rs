//! Rank statistics: Kendall's tau (used for dependence starting values and
//! summaries) and the one-sample Kolmogorov-Smirnov statistic (used by the
//! residual diagnostics).

/// Kendall's tau-b in O(n log n) time (merge-sort inversion counting),
/// with the usual correction for ties in either argument.
///
/// Inputs must be finite and of equal length; returns 0 for fewer than two
/// observations or when either variable is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    // pairs tied on x, and tied on both x and y
    let mut ties_x: u64 = 0;
    let mut ties_xy: u64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        ties_x += pairs(j - i);
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && y[idx[b]] == y[idx[a]] {
                b += 1;
            }
            ties_xy += pairs(b - a);
            a = b;
        }
        i = j;
    }

    // discordant pairs = strict inversions of y once sorted by x
    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut ties_y: u64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        ties_y += pairs(j - i);
        i = j;
    }

    let tot = pairs(n);
    let num =
        tot as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    let den = ((tot - ties_x) as f64).sqrt() * ((tot - ties_y) as f64).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn pairs(t: usize) -> u64 {
    let t = t as u64;
    t * (t - 1) / 2
}

fn merge_count(a: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut s = {
        let (l, r) = a.split_at_mut(mid);
        merge_count(l, &mut buf[..mid]) + merge_count(r, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[i] <= a[j] {
            buf[k] = a[i];
            i += 1;
        } else {
            buf[k] = a[j];
            j += 1;
            s += (mid - i) as u64;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
    let k = k + mid - i;
    buf[k..k + n - j].copy_from_slice(&a[j..n]);
    a.copy_from_slice(&buf[..n]);
    s
}

/// One-sample Kolmogorov-Smirnov statistic of `sample` against a reference
/// cdf: sup_x |F_n(x) - F(x)|. Sorts a copy of the sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic 1% critical value for the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
