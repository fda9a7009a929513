//! Exact probabilities by exhaustive enumeration of configurations.
//!
//! Results are kept as integer counts grouped by how many vertices are open
//! and closed, so they can be evaluated at any `p` either in floating point
//! or as an exact rational.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::engine::{EventSpec, PreparedEvent, Scratch};
use crate::error::{Error, Result};
use crate::graph::GraphView;

/// Largest number of live vertices [`enumerate_event`] will enumerate.
pub const EVENT_ENUMERATION_CAP: usize = 24;

/// The decimal an `f64` prints as, read as a rational: `0.45` is `9/20`,
/// not the nearest dyadic. Exact for every dyadic with a short expansion.
pub fn rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "finite probability");
    let text = x.to_string();
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(numer, denom);
    if neg {
        -r
    } else {
        r
    }
}

/// `sum counts[(a, b)] * p^a * (1-p)^b` over a dense table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    /// Row-major over `(open, closed)` with `stride` columns.
    counts: Vec<u64>,
    stride: usize,
}

impl CountTable {
    pub fn new(max_open: usize, max_closed: usize) -> Self {
        CountTable { counts: vec![0; (max_open + 1) * (max_closed + 1)], stride: max_closed + 1 }
    }

    #[inline]
    pub fn add(&mut self, open: usize, closed: usize, count: u64) {
        self.counts[open * self.stride + closed] += count;
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (i / self.stride, i % self.stride, c))
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn value(&self, p: f64) -> f64 {
        // Pairwise-free accumulation of nonnegative terms is accurate enough
        // here; the rational evaluation is the reference.
        self.entries().map(|(a, b, c)| c as f64 * p.powi(a as i32) * (1.0 - p).powi(b as i32)).sum()
    }

    pub fn rational(&self, p: &BigRational) -> BigRational {
        let q = BigRational::one() - p;
        let mut total = BigRational::zero();
        let mut p_pow: Vec<BigRational> = vec![BigRational::one()];
        let mut q_pow: Vec<BigRational> = vec![BigRational::one()];
        for (a, b, c) in self.entries() {
            while p_pow.len() <= a {
                let next = p_pow.last().unwrap() * p;
                p_pow.push(next);
            }
            while q_pow.len() <= b {
                let next = q_pow.last().unwrap() * &q;
                q_pow.push(next);
            }
            total += BigRational::from_integer(BigInt::from(c)) * &p_pow[a] * &q_pow[b];
        }
        total
    }
}

/// Counts of configurations of the live vertices in which `event` holds.
pub fn enumerate_event(view: &GraphView, event: &EventSpec) -> Result<CountTable> {
    event.validate(view)?;
    let live: Vec<_> = view.live_vertices().collect();
    let n = live.len();
    if n > EVENT_ENUMERATION_CAP {
        return Err(Error::Resource(format!(
            "{n} live vertices exceeds the enumeration cap of {EVENT_ENUMERATION_CAP}"
        )));
    }
    let mut position = vec![usize::MAX; view.id_bound()];
    for (i, v) in live.iter().enumerate() {
        position[v.raw() as usize] = i;
    }
    let prepared = PreparedEvent::new(view, event);
    let mut scratch = Scratch::new(view.id_bound());
    let mut table = CountTable::new(n, n);
    for mask in 0u64..(1u64 << n) {
        let is_open = |v: crate::graph::VertexId| {
            let i = position[v.raw() as usize];
            i != usize::MAX && mask >> i & 1 == 1
        };
        if prepared.holds(view, is_open, &mut scratch) {
            let open = mask.count_ones() as usize;
            table.add(open, n - open, 1);
        }
    }
    Ok(table)
}
