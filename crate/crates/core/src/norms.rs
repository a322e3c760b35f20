//! The (s0,p)-norm: the L_p norm of the `s0` largest-magnitude coordinates.
//!
//! For `s0 = q` this is the ordinary L_p norm and for `p = ∞` it is the
//! max-magnitude for every `s0`. Small `p` accumulates many moderate entries
//! (sum-type), large `p` concentrates on a few large ones (max-type).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent of an (s0,p)-norm: a real `p ≥ 1` or `∞`.
///
/// Spelled `inf` in every textual surface (CLI flags, reports).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::Config(format!(
                "norm exponent must be >= 1 or inf, got {p}"
            )))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// Total order used for deduplication and display (∞ last).
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }

    /// Parses a comma-separated list such as `"1,2,3,4,5,inf"`.
    pub fn parse_list(s: &str) -> Result<Vec<Exponent>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinity => f.write_str("inf"),
            Exponent::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse norm exponent {s:?}")))?;
        Exponent::new(p)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Infinity => serializer.serialize_str("inf"),
            Exponent::Finite(p) => serializer.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => Exponent::new(p).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Sorted, deduplicated copy of an exponent set.
pub fn dedup_exponents(ps: &[Exponent]) -> Vec<Exponent> {
    let mut out = ps.to_vec();
    out.sort_by(Exponent::total_cmp);
    out.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpNormConfig {
    pub s0: usize,
    pub p: Exponent,
}

impl SpNormConfig {
    pub fn new(s0: usize, p: Exponent) -> Result<Self> {
        if s0 == 0 {
            return Err(Error::Config("s0 must be at least 1".into()));
        }
        if let Exponent::Finite(v) = p {
            Exponent::new(v)?;
        }
        Ok(Self { s0, p })
    }
}

/// Writes the `min(s0, len)` largest magnitudes of `v` into `buf`, in
/// descending order.
fn top_magnitudes(v: &[f64], s0: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(v.iter().map(|x| x.abs()));
    let k = s0.min(buf.len());
    if k == 0 {
        return;
    }
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        buf.truncate(k);
    }
    buf.sort_unstable_by(|a, b| b.total_cmp(a));
}

/// Norm of a vector of nonnegative magnitudes already sorted descending.
fn norm_of_sorted(desc: &[f64], p: Exponent) -> f64 {
    let Some(&largest) = desc.first() else {
        return 0.0;
    };
    if largest == 0.0 {
        return 0.0;
    }
    match p {
        Exponent::Infinity => largest,
        Exponent::Finite(1.0) => desc.iter().sum(),
        Exponent::Finite(p) => {
            // max-factored to stay clear of overflow for large p
            let acc: f64 = if p.fract() == 0.0 && p <= i32::MAX as f64 {
                let ip = p as i32;
                desc.iter().map(|a| (a / largest).powi(ip)).sum()
            } else {
                desc.iter().map(|a| (a / largest).powf(p)).sum()
            };
            largest * acc.powf(1.0 / p)
        }
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "non-finite entry {} at coordinate {i}",
            v[i]
        ))),
        None => Ok(()),
    }
}

/// (s0,p)-norm of `v`; `s0` larger than `v.len()` is clamped.
pub fn sp_norm(v: &[f64], cfg: &SpNormConfig) -> Result<f64> {
    check_finite(v)?;
    let mut buf = Vec::with_capacity(v.len());
    top_magnitudes(v, cfg.s0, &mut buf);
    Ok(norm_of_sorted(&buf, cfg.p))
}

/// (s0,p)-norms of `v` for several exponents sharing one `s0`.
///
/// The top-`s0` selection is done once. `buf` is scratch space. Inputs are
/// not checked for finiteness.
pub fn sp_norm_multi_into(
    v: &[f64],
    s0: usize,
    ps: &[Exponent],
    buf: &mut Vec<f64>,
    out: &mut [f64],
) {
    debug_assert_eq!(ps.len(), out.len());
    top_magnitudes(v, s0, buf);
    for (o, &p) in out.iter_mut().zip(ps) {
        *o = norm_of_sorted(buf, p);
    }
}

/// Row-wise (s0,p)-norm of a `B × q` matrix.
pub fn sp_norm_batch(m: ArrayView2<'_, f64>, cfg: &SpNormConfig) -> Result<Array1<f64>> {
    if let Some(bad) = m.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite matrix entry {bad}"
        )));
    }
    let rows: Vec<f64> = m
        .axis_iter(Axis(0))
        .into_par_iter()
        .map_init(Vec::new, |buf, row| {
            let mut out = [0.0];
            match row.as_slice() {
                Some(s) => sp_norm_multi_into(s, cfg.s0, &[cfg.p], buf, &mut out),
                None => sp_norm_multi_into(&row.to_vec(), cfg.s0, &[cfg.p], buf, &mut out),
            }
            out[0]
        })
        .collect();
    Ok(Array1::from(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn cfg(s0: usize, p: f64) -> SpNormConfig {
        SpNormConfig::new(s0, Exponent::new(p).unwrap()).unwrap()
    }

    #[test]
    fn worked_values() {
        assert_eq!(sp_norm(&[3.0, -1.0, 2.0], &cfg(2, 1.0)).unwrap(), 5.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(sp_norm(&[0.0; 4], &cfg(3, p)).unwrap(), 0.0);
        }
        assert!((sp_norm(&[1.0; 4], &cfg(4, 2.0)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            sp_norm(&[-7.0, 0.5, 3.0], &cfg(2, f64::INFINITY)).unwrap(),
            7.0
        );
    }

    #[test]
    fn s0_is_clamped() {
        assert_eq!(sp_norm(&[3.0, -1.0, 2.0], &cfg(50, 1.0)).unwrap(), 6.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sp_norm(&[1.0, f64::NAN], &cfg(1, 1.0)).is_err());
        assert!(SpNormConfig::new(0, Exponent::Infinity).is_err());
        assert!(Exponent::new(0.5).is_err());
        assert!("0.9".parse::<Exponent>().is_err());
    }

    #[test]
    fn large_p_does_not_overflow() {
        let v = [1e300, 1e300, 1e299];
        let n = sp_norm(&v, &cfg(3, 40.0)).unwrap();
        assert!(n.is_finite());
        assert!(n >= 1e300 && n <= 1e300 * 2f64.powf(1.0 / 40.0) * 1.0000001);
    }

    #[test]
    fn batch_rows() {
        let m = array![[3.0, -1.0, 2.0], [0.0, 0.0, 0.0]];
        let out = sp_norm_batch(m.view(), &cfg(2, 1.0)).unwrap();
        assert_eq!(out.to_vec(), vec![5.0, 0.0]);
        let single = array![[1.5, -4.0, 2.0]];
        let c = cfg(2, 3.0);
        assert_eq!(
            sp_norm_batch(single.view(), &c).unwrap()[0],
            sp_norm(single.row(0).as_slice().unwrap(), &c).unwrap()
        );
    }

    #[test]
    fn batch_full_l2_matches_euclidean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = ndarray::Array2::from_shape_fn((100, 20), |_| rng.random_range(-3.0..3.0));
        let out = sp_norm_batch(m.view(), &cfg(20, 2.0)).unwrap();
        for (row, got) in m.rows().into_iter().zip(out.iter()) {
            let want = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((got - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn exponent_text_round_trip() {
        let ps = Exponent::parse_list("1, 2,inf,2").unwrap();
        assert_eq!(
            dedup_exponents(&ps)
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>(),
            ["1", "2", "inf"]
        );
        let json = serde_json::to_string(&ps).unwrap();
        assert_eq!(json, r#"[1.0,2.0,"inf",2.0]"#);
        let back: Vec<Exponent> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ps);
    }

    fn exponent() -> impl Strategy<Value = Exponent> {
        prop_oneof![
            (1.0f64..8.0).prop_map(Exponent::Finite),
            (1u8..6).prop_map(|p| Exponent::Finite(p as f64)),
            Just(Exponent::Infinity),
        ]
    }

    proptest! {
        #[test]
        fn permutation_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..30), s0 in 1usize..35, p in exponent(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let c = SpNormConfig::new(s0, p).unwrap();
            prop_assert_eq!(sp_norm(&v, &c).unwrap(), sp_norm(&w, &c).unwrap());
        }

        #[test]
        fn monotone_in_s0(v in prop::collection::vec(-50.0f64..50.0, 1..30), s0 in 1usize..30, p in exponent()) {
            let lo = sp_norm(&v, &SpNormConfig::new(s0, p).unwrap()).unwrap();
            let hi = sp_norm(&v, &SpNormConfig::new(s0 + 1, p).unwrap()).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-14));
        }
    }
}
