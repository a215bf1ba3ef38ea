//! Hungarian-method kernel over any exact ordered cost group.
//!
//! The classic matrix procedure: reduce rows, reduce columns, cover the
//! zeros with as few lines as possible, and while fewer than `n` lines are
//! needed, shift the smallest uncovered entry. Reductions are kept as row and
//! column potentials (`reduced = cost - row - col`) so no step rewrites the
//! whole matrix. The line cover comes from a maximum matching on zero cells
//! and the König construction, grown as an alternating forest from every
//! unmatched row at once.

use crate::cost::CostValue;
use crate::error::{Error, Result};

/// Lines covering every zero of a reduced matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineCover {
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
}

impl LineCover {
    pub fn len(&self) -> usize {
        self.rows.len() + self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() && self.columns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveTrace<T> {
    /// Number of uncovered-minimum adjustments (step 5) performed.
    pub iterations: usize,
    pub final_reduced: Vec<Vec<T>>,
    pub cover_lines: LineCover,
}

impl<T: CostValue> SolveTrace<T> {
    pub fn zero_mask(&self) -> Vec<Vec<bool>> {
        self.final_reduced
            .iter()
            .map(|row| row.iter().map(T::is_zero).collect())
            .collect()
    }
}

fn check_square<T: CostValue>(matrix: &[Vec<T>]) -> Result<()> {
    let n = matrix.len();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::MalformedGrid(format!(
                "row {i} has {} entries in a {n}-row matrix",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|c| *c < T::zero()) {
            return Err(Error::MalformedGrid(format!(
                "entry ({i}, {j}) is negative"
            )));
        }
    }
    Ok(())
}

fn row_potentials<T: CostValue>(matrix: &[Vec<T>]) -> Vec<T> {
    matrix
        .iter()
        .map(|row| row.iter().min().cloned().unwrap_or_else(T::zero))
        .collect()
}

fn column_potentials<T: CostValue>(matrix: &[Vec<T>], rows: &[T]) -> Vec<T> {
    let n = matrix.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| reduced(&matrix[i][j], &rows[i], &T::zero()))
                .min()
                .unwrap_or_else(T::zero)
        })
        .collect()
}

fn reduced<T: CostValue>(cost: &T, row: &T, col: &T) -> T {
    let mut out = cost.clone();
    out -= row;
    out -= col;
    out
}

/// The matrix after row then column reduction.
pub fn initial_reduction<T: CostValue>(matrix: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    check_square(matrix)?;
    let u = row_potentials(matrix);
    let v = column_potentials(matrix, &u);
    Ok(matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| reduced(c, &u[i], &v[j]))
                .collect()
        })
        .collect())
}

/// Minimum-cost row -> column bijection of a square, non-negative matrix.
pub fn hungarian_solve<T: CostValue>(matrix: &[Vec<T>]) -> Result<(Vec<usize>, SolveTrace<T>)> {
    check_square(matrix)?;
    let n = matrix.len();
    let mut row_pot = row_potentials(matrix);
    let mut col_pot = column_potentials(matrix, &row_pot);

    let mut row_match: Vec<Option<usize>> = vec![None; n];
    let mut col_match: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        for j in 0..n {
            if col_match[j].is_none() && reduced(&matrix[i][j], &row_pot[i], &col_pot[j]).is_zero()
            {
                row_match[i] = Some(j);
                col_match[j] = Some(i);
                break;
            }
        }
    }

    let cap = n * n;
    let mut iterations = 0usize;
    let mut matched = row_match.iter().filter(|m| m.is_some()).count();

    while matched < n {
        // alternating forest rooted at every unmatched row
        let mut row_in = vec![false; n];
        let mut col_in = vec![false; n];
        let mut slack: Vec<Option<T>> = vec![None; n];
        let mut slack_row = vec![0usize; n];
        let mut parent_row = vec![0usize; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| row_match[i].is_none()).collect();
        for &i in &queue {
            row_in[i] = true;
        }

        'grow: loop {
            while let Some(i) = queue.pop() {
                for j in 0..n {
                    if col_in[j] {
                        continue;
                    }
                    let r = reduced(&matrix[i][j], &row_pot[i], &col_pot[j]);
                    if slack[j].as_ref().is_none_or(|s| r < *s) {
                        slack[j] = Some(r);
                        slack_row[j] = i;
                    }
                }
            }

            let tight = (0..n).find(|&j| !col_in[j] && slack[j].as_ref().is_some_and(T::is_zero));
            match tight {
                Some(j) => {
                    col_in[j] = true;
                    parent_row[j] = slack_row[j];
                    match col_match[j] {
                        Some(next) => {
                            row_in[next] = true;
                            queue.push(next);
                        }
                        None => {
                            augment(j, &parent_row, &mut row_match, &mut col_match);
                            matched += 1;
                            break 'grow;
                        }
                    }
                }
                None => {
                    // fewer than n lines: shift by the smallest uncovered entry
                    iterations += 1;
                    if iterations > cap {
                        return Err(Error::IterationCap {
                            cap,
                            dimension: n,
                            matched,
                        });
                    }
                    let delta = (0..n)
                        .filter(|&j| !col_in[j])
                        .filter_map(|j| slack[j].clone())
                        .min()
                        .expect("an unmatched row leaves an uncovered column");
                    for i in (0..n).filter(|&i| row_in[i]) {
                        row_pot[i] += &delta;
                    }
                    for j in 0..n {
                        if col_in[j] {
                            col_pot[j] -= &delta;
                        } else if let Some(s) = slack[j].as_mut() {
                            *s -= &delta;
                        }
                    }
                }
            }
        }
    }

    let assignment: Vec<usize> = row_match
        .into_iter()
        .map(|m| m.expect("perfect matching"))
        .collect();
    let final_reduced: Vec<Vec<T>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| reduced(c, &row_pot[i], &col_pot[j]))
                .collect()
        })
        .collect();
    let zeros: Vec<Vec<bool>> = final_reduced
        .iter()
        .map(|row| row.iter().map(T::is_zero).collect())
        .collect();
    let cover_lines = konig_cover(
        &zeros,
        &assignment.iter().map(|&j| Some(j)).collect::<Vec<_>>(),
    );
    Ok((
        assignment,
        SolveTrace {
            iterations,
            final_reduced,
            cover_lines,
        },
    ))
}

fn augment(
    mut col: usize,
    parent_row: &[usize],
    row_match: &mut [Option<usize>],
    col_match: &mut [Option<usize>],
) {
    loop {
        let row = parent_row[col];
        let previous = row_match[row].replace(col);
        col_match[col] = Some(row);
        match previous {
            Some(prev_col) => col = prev_col,
            None => return,
        }
    }
}

/// Minimum line cover of the `true` cells given a maximum matching on them:
/// rows not reachable from a free row by alternating paths, plus reachable
/// columns.
pub fn konig_cover(zeros: &[Vec<bool>], row_match: &[Option<usize>]) -> LineCover {
    let n = zeros.len();
    let m = zeros.first().map_or(0, Vec::len);
    let mut col_match = vec![None; m];
    for (i, j) in row_match.iter().enumerate() {
        if let Some(j) = j {
            col_match[*j] = Some(i);
        }
    }
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; m];
    let mut stack: Vec<usize> = (0..n).filter(|&i| row_match[i].is_none()).collect();
    for &i in &stack {
        row_seen[i] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..m {
            if zeros[i][j] && !col_seen[j] && row_match[i] != Some(j) {
                col_seen[j] = true;
                if let Some(k) = col_match[j] {
                    if !row_seen[k] {
                        row_seen[k] = true;
                        stack.push(k);
                    }
                }
            }
        }
    }
    LineCover {
        rows: (0..n).filter(|&i| !row_seen[i]).collect(),
        columns: (0..m).filter(|&j| col_seen[j]).collect(),
    }
}
