//! The seat grid: one column per school seat, squared with dummy rows or
//! columns, priced through a utility transformation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::cost::{CostValue, RankCounts};
use crate::error::{Error, Result};
use crate::model::{Matching, RankTable, SchoolChoiceProblem};
use crate::transform::UtilityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowOwner {
    Student(usize),
    /// A nonexistent student; selecting it leaves a seat open.
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnOwner {
    Seat {
        school: usize,
        ordinal: u32,
    },
    /// A nonexistent school; selecting it leaves the student unassigned.
    Dummy,
}

/// Shape of the grid and the rank behind every cell. `None` cells cost the
/// group zero (dummy rows, dummy x dummy).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeatLayout {
    rows: Vec<RowOwner>,
    columns: Vec<ColumnOwner>,
    ranks: Vec<Vec<Option<u32>>>,
    school_count: usize,
}

impl SeatLayout {
    pub fn new(problem: &SchoolChoiceProblem) -> Result<Self> {
        let table = problem.rank_table()?;
        Ok(Self::from_table(problem, &table))
    }

    fn from_table(problem: &SchoolChoiceProblem, table: &RankTable) -> Self {
        let seats = problem.total_seats();
        let students = problem.student_count();
        let n = seats.max(students);

        let mut columns = Vec::with_capacity(n);
        for (school, s) in problem.schools().iter().enumerate() {
            columns.extend((1..=s.capacity).map(|ordinal| ColumnOwner::Seat { school, ordinal }));
        }
        columns.resize(n, ColumnOwner::Dummy);
        let mut rows: Vec<RowOwner> = (0..students).map(RowOwner::Student).collect();
        rows.resize(n, RowOwner::Dummy);

        let ranks = rows
            .iter()
            .map(|row| {
                columns
                    .iter()
                    .map(|col| match (row, col) {
                        (RowOwner::Student(i), ColumnOwner::Seat { school, .. }) => {
                            Some(table.rank(*i, *school))
                        }
                        (RowOwner::Student(i), ColumnOwner::Dummy) => {
                            Some(table.unassigned_rank(*i))
                        }
                        (RowOwner::Dummy, _) => None,
                    })
                    .collect()
            })
            .collect();
        Self {
            rows,
            columns,
            ranks,
            school_count: problem.school_count(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[RowOwner] {
        &self.rows
    }

    pub fn columns(&self) -> &[ColumnOwner] {
        &self.columns
    }

    pub fn rank(&self, row: usize, col: usize) -> Option<u32> {
        self.ranks[row][col]
    }

    pub fn school_count(&self) -> usize {
        self.school_count
    }

    pub fn student_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r, RowOwner::Student(_)))
            .count()
    }

    /// Largest rank carried by any cell.
    pub fn highest_rank(&self) -> u32 {
        self.ranks
            .iter()
            .flatten()
            .flatten()
            .copied()
            .max()
            .unwrap_or(1)
    }

    /// Prices every cell; `None` cells become `T::zero()`.
    pub fn price<T, F>(&self, mut price: F) -> Result<Vec<Vec<T>>>
    where
        T: CostValue,
        F: FnMut(u32) -> Result<T>,
    {
        let top = self.highest_rank();
        let prices = (1..=top).map(&mut price).collect::<Result<Vec<T>>>()?;
        Ok(self
            .ranks
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| match cell {
                        Some(rank) => prices[*rank as usize - 1].clone(),
                        None => T::zero(),
                    })
                    .collect()
            })
            .collect())
    }

    /// Decodes a row -> column bijection into a matching.
    pub fn decode(&self, assignment: &[usize]) -> Matching {
        let mut out = vec![None; self.student_count()];
        for (row, &col) in assignment.iter().enumerate() {
            if let (RowOwner::Student(i), ColumnOwner::Seat { school, .. }) =
                (self.rows[row], self.columns[col])
            {
                out[i] = Some(school);
            }
        }
        Matching::from_raw(out)
    }
}

/// Square cost matrix over seats with its index maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeatGrid<T> {
    layout: SeatLayout,
    matrix: Vec<Vec<T>>,
    transform: UtilityTransform,
}

impl<T: CostValue> SeatGrid<T> {
    pub fn from_parts(
        layout: SeatLayout,
        matrix: Vec<Vec<T>>,
        transform: UtilityTransform,
    ) -> Result<Self> {
        let n = layout.dimension();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::MalformedGrid(format!(
                "matrix does not match the {n}x{n} layout"
            )));
        }
        Ok(Self {
            layout,
            matrix,
            transform,
        })
    }

    pub fn layout(&self) -> &SeatLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.matrix
    }

    pub fn transform(&self) -> &UtilityTransform {
        &self.transform
    }

    pub fn dimension(&self) -> usize {
        self.matrix.len()
    }

    pub fn add_to_row(&mut self, row: usize, amount: &T) {
        for cell in &mut self.matrix[row] {
            *cell += amount;
        }
    }

    pub fn add_to_column(&mut self, col: usize, amount: &T) {
        for row in &mut self.matrix {
            row[col] += amount;
        }
    }
}

/// Seat grid priced with exact rationals: `f(rank)` per cell, zero for dummy
/// rows, `f(r_max + 1)` for real students in dummy columns.
pub fn build_seat_grid(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
) -> Result<SeatGrid<BigRational>> {
    let layout = SeatLayout::new(problem)?;
    let transform = transform.resolved_for(problem);
    check_transform(&layout, &transform)?;
    let matrix = layout.price(|rank| transform.apply(rank))?;
    SeatGrid::from_parts(layout, matrix, transform)
}

pub(crate) fn check_transform(layout: &SeatLayout, transform: &UtilityTransform) -> Result<()> {
    let top = layout.highest_rank();
    if transform.is_strictly_increasing(top) {
        Ok(())
    } else {
        Err(Error::InvalidTransform(format!(
            "{transform} is not non-negative and strictly increasing on ranks 1..={top}"
        )))
    }
}

/// How costs are represented inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostRealization {
    /// Rank-count vectors for exponential transforms whose base exceeds the
    /// grid dimension, exact scalars otherwise.
    #[default]
    Auto,
    Scalar,
    RankCounts,
}

/// A grid priced in one concrete realization.
#[derive(Debug, Clone)]
pub enum RealizedGrid {
    /// Linear/table costs scaled to machine integers.
    Machine(Vec<Vec<i64>>),
    /// Scaled or exponential costs too wide for `i64`.
    Wide(Vec<Vec<BigInt>>),
    Counts(Vec<Vec<RankCounts>>),
}

impl RealizedGrid {
    pub fn kind(&self) -> &'static str {
        match self {
            RealizedGrid::Machine(_) => "machine-integer",
            RealizedGrid::Wide(_) => "big-integer",
            RealizedGrid::Counts(_) => "rank-counts",
        }
    }
}

/// Least common denominator of the transform's values on the layout's ranks.
/// Scalar realizations price cells as `f(rank) * scale`.
pub fn cost_scale(layout: &SeatLayout, transform: &UtilityTransform) -> Result<BigInt> {
    (1..=layout.highest_rank()).try_fold(BigInt::one(), |acc, rank| {
        Ok(acc.lcm(transform.apply(rank)?.denom()))
    })
}

/// Prices `layout` for the kernel. Positive rescaling keeps every argmin, so
/// rational linear/table costs run on integers.
pub fn realize(
    layout: &SeatLayout,
    transform: &UtilityTransform,
    realization: CostRealization,
) -> Result<RealizedGrid> {
    check_transform(layout, transform)?;
    let n = layout.dimension();
    let use_counts = match (realization, transform) {
        (CostRealization::RankCounts, UtilityTransform::Exponential { base }) => {
            if let Some(b) = base {
                if (*b as usize) <= n {
                    return Err(Error::InvalidTransform(format!(
                        "rank-count costs need a base above {n}, got {b}"
                    )));
                }
            }
            true
        }
        (CostRealization::RankCounts, _) => {
            return Err(Error::InvalidTransform(
                "rank-count costs only realize exponential transforms".into(),
            ))
        }
        (CostRealization::Auto, UtilityTransform::Exponential { base }) => {
            base.is_none_or(|b| b as usize > n)
        }
        _ => false,
    };
    if use_counts {
        return Ok(RealizedGrid::Counts(
            layout.price(|rank| Ok(RankCounts::unit(rank)))?,
        ));
    }
    if let UtilityTransform::Exponential { base: None } = transform {
        return Err(Error::InvalidTransform(
            "exponential base is chosen per problem; resolve it first".into(),
        ));
    }

    let scale = cost_scale(layout, transform)?;
    let scaled: Vec<BigInt> = (1..=layout.highest_rank())
        .map(|rank| {
            Ok((transform.apply(rank)? * BigRational::from_integer(scale.clone())).to_integer())
        })
        .collect::<Result<_>>()?;
    let largest = scaled.iter().map(|v| v.abs()).max().unwrap_or_default();
    // the kernel's potentials stay within n times the largest entry
    let headroom = BigInt::from(i64::MAX / 4) / BigInt::from(n.max(1) as i64 + 1);
    if largest <= headroom {
        let machine: Vec<i64> = scaled.iter().map(|v| v.to_i64().unwrap_or(0)).collect();
        return Ok(RealizedGrid::Machine(
            layout.price(|rank| Ok(machine[rank as usize - 1]))?,
        ));
    }
    Ok(RealizedGrid::Wide(
        layout.price(|rank| Ok(scaled[rank as usize - 1].clone()))?,
    ))
}
