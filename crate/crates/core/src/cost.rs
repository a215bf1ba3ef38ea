//! The cost domain the assignment kernel runs over.
//!
//! Any totally ordered additive group with exact subtraction works. Two
//! realizations matter in practice: exact scalars (`i64`, [`BigInt`],
//! [`BigRational`]) and [`RankCounts`], a per-rank occurrence vector ordered
//! lexicographically from the highest rank down. `RankCounts` orders
//! matchings the way `sum(base^rank)` does whenever the base exceeds the
//! number of rows, without materializing the powers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Element of a totally ordered abelian group with exact arithmetic.
pub trait CostValue:
    Clone
    + Ord
    + fmt::Debug
    + Zero
    + Sub<Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
{
}

impl<T> CostValue for T where
    T: Clone
        + Ord
        + fmt::Debug
        + Zero
        + Sub<Output = T>
        + for<'a> AddAssign<&'a T>
        + for<'a> SubAssign<&'a T>
{
}

/// Sparse count-per-rank vector. Terms are sorted by rank and never zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RankCounts {
    terms: Vec<(u32, i64)>,
}

impl RankCounts {
    /// One occurrence at `rank`.
    pub fn unit(rank: u32) -> Self {
        Self {
            terms: vec![(rank, 1)],
        }
    }

    pub fn from_counts<I: IntoIterator<Item = (u32, i64)>>(counts: I) -> Self {
        let mut out = Self::default();
        for (rank, count) in counts {
            out.add_term(rank, count);
        }
        out
    }

    pub fn count(&self, rank: u32) -> i64 {
        self.terms
            .binary_search_by_key(&rank, |&(r, _)| r)
            .map(|idx| self.terms[idx].1)
            .unwrap_or(0)
    }

    pub fn terms(&self) -> &[(u32, i64)] {
        &self.terms
    }

    /// `sum(count * base^rank)`.
    pub fn to_scalar(&self, base: &BigInt) -> BigInt {
        self.terms
            .iter()
            .map(|&(rank, count)| {
                BigInt::from(count) * num_traits::pow(base.clone(), rank as usize)
            })
            .sum()
    }

    fn add_term(&mut self, rank: u32, count: i64) {
        if count == 0 {
            return;
        }
        match self.terms.binary_search_by_key(&rank, |&(r, _)| r) {
            Ok(idx) => {
                self.terms[idx].1 += count;
                if self.terms[idx].1 == 0 {
                    self.terms.remove(idx);
                }
            }
            Err(idx) => self.terms.insert(idx, (rank, count)),
        }
    }

    fn merged(&self, other: &Self, sign: i64) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut a, mut b) = (0, 0);
        while a < self.terms.len() || b < other.terms.len() {
            let left = self.terms.get(a);
            let right = other.terms.get(b);
            match (left, right) {
                (Some(&(ra, ca)), Some(&(rb, cb))) if ra == rb => {
                    let c = ca + sign * cb;
                    if c != 0 {
                        terms.push((ra, c));
                    }
                    a += 1;
                    b += 1;
                }
                (Some(&(ra, ca)), Some(&(rb, _))) if ra < rb => {
                    terms.push((ra, ca));
                    a += 1;
                }
                (Some(&(ra, ca)), None) => {
                    terms.push((ra, ca));
                    a += 1;
                }
                (_, Some(&(rb, cb))) => {
                    terms.push((rb, sign * cb));
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Self { terms }
    }
}

impl Ord for RankCounts {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter().rev().peekable();
        let mut b = other.terms.iter().rev().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(&&(_, ca)), None) => return ca.cmp(&0),
                (None, Some(&&(_, cb))) => return 0.cmp(&cb),
                (Some(&&(ra, ca)), Some(&&(rb, cb))) => match ra.cmp(&rb) {
                    Ordering::Greater => return ca.cmp(&0),
                    Ordering::Less => return 0.cmp(&cb),
                    Ordering::Equal => {
                        if ca != cb {
                            return ca.cmp(&cb);
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }
}

impl PartialOrd for RankCounts {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for RankCounts {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.merged(&rhs, 1)
    }
}

impl Sub for RankCounts {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.merged(&rhs, -1)
    }
}

impl<'a> AddAssign<&'a RankCounts> for RankCounts {
    fn add_assign(&mut self, rhs: &'a RankCounts) {
        if rhs.terms.len() == 1 {
            self.add_term(rhs.terms[0].0, rhs.terms[0].1);
        } else if !rhs.terms.is_empty() {
            *self = self.merged(rhs, 1);
        }
    }
}

impl<'a> SubAssign<&'a RankCounts> for RankCounts {
    fn sub_assign(&mut self, rhs: &'a RankCounts) {
        if rhs.terms.len() == 1 {
            self.add_term(rhs.terms[0].0, -rhs.terms[0].1);
        } else if !rhs.terms.is_empty() {
            *self = self.merged(rhs, -1);
        }
    }
}

impl Neg for RankCounts {
    type Output = Self;
    fn neg(mut self) -> Self {
        for term in &mut self.terms {
            term.1 = -term.1;
        }
        self
    }
}

impl Zero for RankCounts {
    fn zero() -> Self {
        Self::default()
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Renders a rational exactly: integers as-is, terminating fractions as
/// decimals, everything else as `p/q`.
pub fn format_rational(value: &BigRational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let denom = value.denom().clone();
    let mut rest = denom.clone();
    let (mut twos, mut fives) = (0u32, 0u32);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", value.numer(), denom);
    }
    let digits = twos.max(fives) as usize;
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (value * BigRational::from_integer(scale)).to_integer();
    let sign = if scaled.is_negative() { "-" } else { "" };
    let magnitude = scaled.abs().to_string();
    let padded = format!("{magnitude:0>width$}", width = digits + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - digits);
    format!("{sign}{int_part}.{frac_part}")
}

/// Parses integers, decimals (`-0.25`) and fractions (`3/4`).
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = text.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let joined: BigInt = format!("{int_digits}{frac_part}").parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac_part.len());
        let value = BigRational::new(joined, scale);
        return Some(if negative { -value } else { value });
    }
    text.parse::<BigInt>().ok().map(BigRational::from_integer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rc(counts: &[(u32, i64)]) -> RankCounts {
        RankCounts::from_counts(counts.iter().copied())
    }

    #[test]
    fn higher_rank_dominates() {
        assert!(rc(&[(2, 1)]) > rc(&[(1, 1000)]));
        assert!(rc(&[(3, 1), (1, -5)]) > rc(&[(2, 9)]));
        assert!(rc(&[(1, -1)]) < RankCounts::zero());
        assert_eq!(rc(&[(1, 2), (1, -2)]), RankCounts::zero());
    }

    #[test]
    fn group_operations_are_exact() {
        let a = rc(&[(1, 2), (4, 1)]);
        let b = rc(&[(1, 2), (3, -1)]);
        let mut c = a.clone();
        c -= &b;
        assert_eq!(c, rc(&[(3, 1), (4, 1)]));
        c += &b;
        assert_eq!(c, a);
        assert_eq!(a.clone() - a.clone(), RankCounts::zero());
    }

    #[test]
    fn rational_rendering() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(format_rational(&r(15, 1)), "15");
        assert_eq!(format_rational(&r(-1, 4)), "-0.25");
        assert_eq!(format_rational(&r(1, 20)), "0.05");
        assert_eq!(format_rational(&r(2, 3)), "2/3");
        assert_eq!(parse_rational("0.05"), Some(r(1, 20)));
        assert_eq!(parse_rational("-1"), Some(r(-1, 1)));
        assert_eq!(parse_rational("7/14"), Some(r(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    proptest! {
        #[test]
        fn rendering_round_trips(n in -100_000i64..100_000, d in 1i64..5_000) {
            let value = BigRational::new(n.into(), d.into());
            prop_assert_eq!(parse_rational(&format_rational(&value)), Some(value));
        }

        #[test]
        fn order_matches_scalar_when_base_is_large(
            a in prop::collection::vec(0i64..6, 1..6),
            b in prop::collection::vec(0i64..6, 1..6),
        ) {
            // count differences stay within 5, so any base above 6 orders like the vectors
            let to_rc = |v: &[i64]| RankCounts::from_counts(v.iter().enumerate().map(|(k, &c)| (k as u32 + 1, c)));
            let base = BigInt::from(13);
            let (ra, rb) = (to_rc(&a), to_rc(&b));
            prop_assert_eq!(ra.cmp(&rb), ra.to_scalar(&base).cmp(&rb.to_scalar(&base)));
        }
    }
}
