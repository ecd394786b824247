//! Small numeric helpers shared across the pipeline.

/// Linear-interpolation quantile, `q` in [0, 1]. Matches the usual
/// "index = q * (n - 1)" convention on a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&v, q)
}

/// Empirical CDF with weak inequality: fraction of entries <= v.
/// Evaluating at the maximum therefore yields exactly 1.0.
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = values.into_iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ecdf { sorted }
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, v: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        // number of entries <= v
        let count = self.sorted.partition_point(|x| *x <= v);
        count as f64 / self.sorted.len() as f64
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation; 0 by convention when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Average ranks (ties get the mean of the tied rank range), 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// FNV-1a over the stage name mixed with the master seed. Used to derive
/// per-stage RNG seeds so the whole pipeline is reproducible from one value.
pub fn stage_seed(master_seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in master_seed.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    for b in stage.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// exp(x) for x <= 0, accurate to ~1e-7 relative, written so the
/// optimizer can vectorize the perplexity search inner loop.
#[inline]
pub fn fast_exp_neg(x: f64) -> f64 {
    debug_assert!(x <= 1e-12);
    if x < -700.0 {
        return 0.0;
    }
    // 2^t with t = x * log2(e); round-to-nearest reduction keeps the
    // fractional part in [-0.5, 0.5] where the Taylor series converges fast
    let t = x * std::f64::consts::LOG2_E;
    let ti = t.round();
    let tf = t - ti;
    // degree-7 Taylor series of 2^tf: coefficients ln(2)^k / k!
    let p = 1.0
        + tf * (0.6931471805599453
            + tf * (0.2402265069591007
                + tf * (0.05550410866482158
                    + tf * (0.009618129107628477
                        + tf * (0.0013333558146428443
                            + tf * (1.540353039338161e-4 + tf * 1.5252733804059841e-5))))));
    let bits = ((ti as i64 + 1023) << 52) as u64;
    f64::from_bits(bits) * p
}
