//! Dense phase-one simplex over exact rationals.
//!
//! Decides feasibility of `A x = b, x >= 0` with `b >= 0` by minimizing the
//! sum of artificial variables. Bland's rule (smallest eligible index for
//! both the entering column and the leaving row) makes the pivot sequence
//! finite and deterministic; all arithmetic is in `BigRational`, so the
//! verdict is exact.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub(crate) enum PhaseOne {
    /// Values of the original (non-artificial) variables at a feasible point.
    Feasible(Vec<BigRational>),
    /// Minimal attainable sum of artificials; strictly positive.
    Infeasible { residual: BigRational },
}

pub(crate) fn phase_one(columns: usize, rows: &[Vec<BigRational>], rhs: &[BigRational]) -> PhaseOne {
    let m = rows.len();
    let n = columns;
    debug_assert_eq!(rhs.len(), m);
    debug_assert!(rows.iter().all(|r| r.len() == n));
    debug_assert!(rhs.iter().all(|b| !b.is_negative()));

    // Tableau: n original columns, m artificial columns, then the rhs.
    let width = n + m + 1;
    let mut tab: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut t = Vec::with_capacity(width);
            t.extend(row.iter().cloned());
            for k in 0..m {
                t.push(if k == i {
                    BigRational::one()
                } else {
                    BigRational::zero()
                });
            }
            t.push(rhs[i].clone());
            t
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced-cost row for minimizing the artificial sum: with the artificial
    // basis, cost(j) = c_j - sum_i tab[i][j], which is 0 on artificials and
    // -colsum on originals.
    let mut cost: Vec<BigRational> = (0..width)
        .map(|j| {
            let colsum: BigRational = tab.iter().map(|row| row[j].clone()).sum();
            if (n..n + m).contains(&j) {
                BigRational::one() - colsum
            } else {
                -colsum
            }
        })
        .collect();

    loop {
        let Some(entering) = (0..n + m).find(|&j| cost[j].is_negative()) else {
            break;
        };
        // Ratio test; ties resolved toward the smallest basis variable.
        let mut leaving: Option<(usize, BigRational)> = None;
        for i in 0..m {
            if tab[i][entering].is_positive() {
                let ratio = &tab[i][width - 1] / &tab[i][entering];
                let better = match &leaving {
                    None => true,
                    Some((li, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*li])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        // The artificial objective is bounded below by zero, so a pivot row
        // always exists.
        let (pivot_row, _) = leaving.expect("phase-one objective is bounded");

        let pivot = tab[pivot_row][entering].clone();
        for v in tab[pivot_row].iter_mut() {
            *v /= &pivot;
        }
        for i in 0..m {
            if i != pivot_row && !tab[i][entering].is_zero() {
                let factor = tab[i][entering].clone();
                for j in 0..width {
                    let adj = &factor * &tab[pivot_row][j];
                    tab[i][j] -= adj;
                }
            }
        }
        if !cost[entering].is_zero() {
            let factor = cost[entering].clone();
            for j in 0..width {
                let adj = &factor * &tab[pivot_row][j];
                cost[j] -= adj;
            }
        }
        basis[pivot_row] = entering;
    }

    let residual: BigRational = (0..m)
        .filter(|&i| basis[i] >= n)
        .map(|i| tab[i][width - 1].clone())
        .sum();
    if residual.is_zero() {
        let mut x = vec![BigRational::zero(); n];
        for i in 0..m {
            if basis[i] < n {
                x[basis[i]] = tab[i][width - 1].clone();
            }
        }
        PhaseOne::Feasible(x)
    } else {
        PhaseOne::Infeasible { residual }
    }
}
