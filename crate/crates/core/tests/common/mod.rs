//! Brute-force reference implementations shared by the integration tests.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// All increasing index tuples of length `m` from `0..n`.
pub fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut Vec::new(), &mut out);
    out
}

pub type Phi = dyn Fn(&[ArrayView1<f64>]) -> Vec<f64>;

/// Kernel values on every m-subset of the rows, in `subsets` order.
pub fn kernel_table(data: &Array2<f64>, m: usize, phi: &Phi) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let subs = subsets(data.nrows(), m);
    let vals = subs
        .iter()
        .map(|s| {
            let rows: Vec<_> = s.iter().map(|&i| data.row(i)).collect();
            phi(&rows)
        })
        .collect();
    (subs, vals)
}

pub struct Brute {
    pub uhat: Array1<f64>,
    pub q: Array2<f64>,
    pub vhat: Array1<f64>,
}

/// û, Q and v̂ straight from their definitions.
pub fn brute_ustat(data: &Array2<f64>, m: usize, phi: &Phi) -> Brute {
    let n = data.nrows();
    let (subs, vals) = kernel_table(data, m, phi);
    let q = vals[0].len();
    let mut uhat = Array1::<f64>::zeros(q);
    for v in &vals {
        for s in 0..q {
            uhat[s] += v[s];
        }
    }
    uhat /= subs.len() as f64;
    let mut qm = Array2::<f64>::zeros((n, q));
    let mut counts = vec![0usize; n];
    for (sub, v) in subs.iter().zip(&vals) {
        for &k in sub {
            counts[k] += 1;
            for s in 0..q {
                qm[[k, s]] += v[s];
            }
        }
    }
    for k in 0..n {
        for s in 0..q {
            qm[[k, s]] /= counts[k] as f64;
        }
    }
    let mut vhat = Array1::<f64>::zeros(q);
    for k in 0..n {
        for s in 0..q {
            vhat[s] += (qm[[k, s]] - uhat[s]).powi(2);
        }
    }
    vhat *= (m * m) as f64 / n as f64;
    Brute { uhat, q: qm, vhat }
}

/// Bootstrap replicate as the average over subsets of
/// `(ε_{k1}+…+ε_{km})(Φ(subset) − û)`.
pub fn subset_bootstrap(
    data: &Array2<f64>,
    m: usize,
    phi: &Phi,
    uhat: &Array1<f64>,
    eps: &[f64],
) -> Vec<f64> {
    let (subs, vals) = kernel_table(data, m, phi);
    let q = uhat.len();
    let mut out = vec![0.0; q];
    for (sub, v) in subs.iter().zip(&vals) {
        let w: f64 = sub.iter().map(|&k| eps[k]).sum();
        for s in 0..q {
            out[s] += w * (v[s] - uhat[s]);
        }
    }
    out.iter().map(|x| x / subs.len() as f64).collect()
}

/// Elements in logical (row-major) order, whatever the memory layout.
pub fn flat<S: ndarray::Data<Elem = f64>, D: ndarray::Dimension>(
    a: &ndarray::ArrayBase<S, D>,
) -> Vec<f64> {
    a.iter().copied().collect()
}

/// `max|a−b| / max|b|`, falling back to absolute error when `b` is zero.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Top-s0 magnitudes in descending order, then L_p.
pub fn naive_sp_norm(v: &[f64], s0: usize, p: f64) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    mags.truncate(s0.min(v.len()));
    if p.is_infinite() {
        mags.first().copied().unwrap_or(0.0)
    } else {
        mags.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `#{b' ≠ b : t_{b'} > t_b} / B`, quadratic in `B`.
pub fn naive_exceed(values: &[f64]) -> Vec<f64> {
    let b = values.len();
    (0..b)
        .map(|i| {
            let c = (0..b).filter(|&j| j != i && values[j] > values[i]).count();
            c as f64 / b as f64
        })
        .collect()
}

pub fn cov_phi(pairs: Vec<(usize, usize)>) -> Box<Phi> {
    Box::new(move |r: &[ArrayView1<f64>]| {
        pairs
            .iter()
            .map(|&(j, l)| 0.5 * (r[0][j] - r[1][j]) * (r[0][l] - r[1][l]))
            .collect()
    })
}

pub fn tau_phi(pairs: Vec<(usize, usize)>) -> Box<Phi> {
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    Box::new(move |r: &[ArrayView1<f64>]| {
        pairs
            .iter()
            .map(|&(j, l)| sign(r[0][j] - r[1][j]) * sign(r[0][l] - r[1][l]))
            .collect()
    })
}

pub fn mean_phi() -> Box<Phi> {
    Box::new(|r: &[ArrayView1<f64>]| r[0].to_vec())
}
