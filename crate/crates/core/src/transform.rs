//! Cardinal utility transformations: strictly increasing, non-negative maps
//! from ranks to additive costs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::cost::{format_rational, parse_rational};
use crate::error::{Error, Result};
use crate::model::{Matching, SchoolChoiceProblem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UtilityTransform {
    /// `slope * rank + intercept`.
    Linear {
        slope: BigRational,
        intercept: BigRational,
    },
    /// `base^rank`; `None` picks `max(seats, students) + 1` per problem.
    Exponential { base: Option<u64> },
    /// Explicit values for ranks `1..=len`.
    Table(BTreeMap<u32, BigRational>),
}

impl UtilityTransform {
    pub fn linear(slope: BigRational, intercept: BigRational) -> Result<Self> {
        if !slope.is_positive() {
            return Err(Error::InvalidTransform(format!(
                "linear slope must be positive, got {}",
                format_rational(&slope)
            )));
        }
        if (&slope + &intercept).is_negative() {
            return Err(Error::InvalidTransform(
                "linear transform is negative at rank 1".into(),
            ));
        }
        Ok(Self::Linear { slope, intercept })
    }

    /// `rank - 1`: the cost that sums to the preference index.
    pub fn rank_minus_one() -> Self {
        Self::Linear {
            slope: BigRational::one(),
            intercept: -BigRational::one(),
        }
    }

    /// `rank` itself.
    pub fn identity() -> Self {
        Self::Linear {
            slope: BigRational::one(),
            intercept: BigRational::zero(),
        }
    }

    pub fn exponential(base: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidTransform(format!(
                "exponential base must be at least 2, got {base}"
            )));
        }
        Ok(Self::Exponential { base: Some(base) })
    }

    pub fn exponential_auto() -> Self {
        Self::Exponential { base: None }
    }

    /// Validates eagerly: ranks must be `1..=k`, values non-negative and
    /// strictly increasing.
    pub fn table(values: BTreeMap<u32, BigRational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidTransform("empty table".into()));
        }
        for (expected, (&rank, value)) in (1u32..).zip(&values) {
            if rank != expected {
                return Err(Error::InvalidTransform(format!(
                    "table ranks must run 1..={} without gaps; rank {expected} is missing",
                    values.len()
                )));
            }
            if value.is_negative() {
                return Err(Error::InvalidTransform(format!(
                    "table value for rank {rank} is negative"
                )));
            }
        }
        let transform = Self::Table(values);
        if !transform.is_strictly_increasing(transform.table_len().unwrap_or(0)) {
            return Err(Error::InvalidTransform(
                "table values are not strictly increasing".into(),
            ));
        }
        Ok(transform)
    }

    /// Reads a two-column `rank,value` CSV; a non-numeric first row is taken
    /// as a header.
    pub fn table_from_csv(path: &Path) -> Result<Self> {
        let io_err = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| io_err(std::io::Error::other(e)))?;
        let mut values = BTreeMap::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| io_err(std::io::Error::other(e)))?;
            if record.len() != 2 {
                return Err(Error::InvalidTransform(format!(
                    "{}:{}: expected two columns rank,value",
                    path.display(),
                    line + 1
                )));
            }
            let rank = record[0].parse::<u32>();
            let value = parse_rational(&record[1]);
            match (rank, value) {
                (Ok(rank), Some(value)) => {
                    if values.insert(rank, value).is_some() {
                        return Err(Error::InvalidTransform(format!(
                            "{}:{}: rank {rank} listed twice",
                            path.display(),
                            line + 1
                        )));
                    }
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::InvalidTransform(format!(
                        "{}:{}: cannot parse `{},{}`",
                        path.display(),
                        line + 1,
                        &record[0],
                        &record[1]
                    )))
                }
            }
        }
        Self::table(values)
    }

    fn table_len(&self) -> Option<u32> {
        match self {
            Self::Table(values) => values.keys().next_back().copied(),
            _ => None,
        }
    }

    /// Base the exponential transform uses on `problem`.
    pub fn auto_base(problem: &SchoolChoiceProblem) -> u64 {
        problem.total_seats().max(problem.student_count()) as u64 + 1
    }

    /// Fixes an automatic exponential base for `problem`; other transforms
    /// are returned as-is.
    pub fn resolved_for(&self, problem: &SchoolChoiceProblem) -> Self {
        match self {
            Self::Exponential { base: None } => Self::Exponential {
                base: Some(Self::auto_base(problem)),
            },
            other => other.clone(),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }

    /// `f(rank)` as an exact rational.
    pub fn apply(&self, rank: u32) -> Result<BigRational> {
        if rank == 0 {
            return Err(Error::RankOutOfDomain(rank));
        }
        match self {
            Self::Linear { slope, intercept } => {
                Ok(slope * BigRational::from_integer(rank.into()) + intercept)
            }
            Self::Exponential { base: Some(base) } => Ok(BigRational::from_integer(
                num_traits::pow(BigInt::from(*base), rank as usize),
            )),
            Self::Exponential { base: None } => Err(Error::InvalidTransform(
                "exponential base is chosen per problem; resolve it first".into(),
            )),
            Self::Table(values) => values
                .get(&rank)
                .cloned()
                .ok_or(Error::RankOutOfDomain(rank)),
        }
    }

    /// True iff `f(1) >= 0` and `f(r) < f(r + 1)` for `1 <= r < max_rank`.
    pub fn is_strictly_increasing(&self, max_rank: u32) -> bool {
        // any base >= 2 behaves the same here
        let probe = match self {
            Self::Exponential { base: None } => Self::Exponential { base: Some(2) },
            other => other.clone(),
        };
        let Ok(mut prev) = probe.apply(1) else {
            return false;
        };
        if prev.is_negative() {
            return false;
        }
        for rank in 2..=max_rank {
            match probe.apply(rank) {
                Ok(next) if next > prev => prev = next,
                _ => return false,
            }
        }
        true
    }
}

impl fmt::Display for UtilityTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { slope, intercept } => write!(
                f,
                "linear:a={},b={}",
                format_rational(slope),
                format_rational(intercept)
            ),
            Self::Exponential { base: None } => write!(f, "exp"),
            Self::Exponential { base: Some(b) } => write!(f, "exp:base={b}"),
            Self::Table(values) => {
                let body = values
                    .iter()
                    .map(|(r, v)| format!("{r}={}", format_rational(v)))
                    .collect::<Vec<_>>()
                    .join(",");
                write!(f, "table[{body}]")
            }
        }
    }
}

/// `f(rank)`; see [`UtilityTransform::apply`].
pub fn apply(transform: &UtilityTransform, rank: u32) -> Result<BigRational> {
    transform.apply(rank)
}

pub fn check_strictly_increasing(transform: &UtilityTransform, max_rank: u32) -> bool {
    transform.is_strictly_increasing(max_rank)
}

/// `sum_i f(rank_i(M_i))`, charging unassigned students one rank past their
/// last completed tier.
pub fn cost_of_matching(
    transform: &UtilityTransform,
    problem: &SchoolChoiceProblem,
    matching: &Matching,
) -> Result<BigRational> {
    matching.check(problem)?;
    let table = problem.rank_table()?;
    let transform = transform.resolved_for(problem);
    let mut total = BigRational::zero();
    for (student, school) in matching.assignment().iter().enumerate() {
        total += transform.apply(table.rank_of(student, *school))?;
    }
    Ok(total)
}

/// Parses `linear:a=<rat>,b=<rat>`, `exp`, `exp:base=<int>` or
/// `table:<path>`.
pub fn parse_transform_spec(spec: &str) -> Result<UtilityTransform> {
    let spec = spec.trim();
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "linear" => {
            let mut slope = None;
            let mut intercept = None;
            for part in args.split(',').filter(|p| !p.trim().is_empty()) {
                let (key, value) = part.split_once('=').ok_or_else(|| {
                    Error::InvalidTransform(format!("expected key=value, got `{part}`"))
                })?;
                let value = parse_rational(value).ok_or_else(|| {
                    Error::InvalidTransform(format!("`{value}` is not a rational number"))
                })?;
                match key.trim() {
                    "a" => slope = Some(value),
                    "b" => intercept = Some(value),
                    other => {
                        return Err(Error::InvalidTransform(format!(
                            "unknown linear parameter `{other}`"
                        )))
                    }
                }
            }
            let slope =
                slope.ok_or_else(|| Error::InvalidTransform("linear needs a=<rat>".into()))?;
            UtilityTransform::linear(slope, intercept.unwrap_or_else(BigRational::zero))
        }
        "exp" if args.is_empty() => Ok(UtilityTransform::exponential_auto()),
        "exp" => {
            let base = args
                .strip_prefix("base=")
                .and_then(|b| b.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::InvalidTransform(format!("bad exponential spec `{spec}`")))?;
            UtilityTransform::exponential(base)
        }
        "table" if !args.is_empty() => UtilityTransform::table_from_csv(Path::new(args)),
        _ => Err(Error::InvalidTransform(format!(
            "unknown transform spec `{spec}`"
        ))),
    }
}
