//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Variables are free; the solver splits them internally. Infeasible systems
//! come back with a Farkas certificate (p >= 0, q) such that
//! p^T A_le + q^T A_eq = 0 and p^T b_le + q^T b_eq < 0, and every certificate
//! re-verifies by exact substitution.

use crate::error::{NlqualError, Result};
use crate::rational::Rat;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone)]
pub struct Lp {
    pub num_vars: usize,
    /// Maximized objective; empty means pure feasibility.
    pub objective: Vec<Rat>,
    pub a_le: Vec<Vec<Rat>>,
    pub b_le: Vec<Rat>,
    pub a_eq: Vec<Vec<Rat>>,
    pub b_eq: Vec<Rat>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<Rat>, value: Rat },
    Unbounded { x: Vec<Rat>, ray: Vec<Rat> },
    Infeasible { farkas_le: Vec<Rat>, farkas_eq: Vec<Rat> },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum LpStatus {
    Feasible,
    Infeasible,
    Unbounded,
}

/// Primal or Farkas witness, exactly re-verifiable against the source system.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LpCertificate {
    pub status: LpStatus,
    /// Primal point for Feasible, (p, q) stacked for Infeasible.
    pub witness: Vec<String>,
}

impl Lp {
    pub fn feasibility(
        num_vars: usize,
        a_le: Vec<Vec<Rat>>,
        b_le: Vec<Rat>,
        a_eq: Vec<Vec<Rat>>,
        b_eq: Vec<Rat>,
    ) -> Lp {
        Lp {
            num_vars,
            objective: vec![Rat::zero(); num_vars],
            a_le,
            b_le,
            a_eq,
            b_eq,
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let bad = |what: &str| Err(NlqualError::DimMismatch(format!("LP {what} row length")));
        if self.objective.len() != self.num_vars {
            return bad("objective");
        }
        if self.a_le.len() != self.b_le.len() || self.a_eq.len() != self.b_eq.len() {
            return bad("rhs");
        }
        for r in self.a_le.iter().chain(self.a_eq.iter()) {
            if r.len() != self.num_vars {
                return bad("constraint");
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        self.check_shapes()?;
        let out = Tableau::new(self).solve()?;
        debug_assert!(self.verify(&out));
        Ok(out)
    }

    /// Exact substitution check of an outcome against the system.
    pub fn verify(&self, out: &LpOutcome) -> bool {
        match out {
            LpOutcome::Optimal { x, .. } => self.point_feasible(x),
            LpOutcome::Unbounded { x, ray } => {
                if !self.point_feasible(x) {
                    return false;
                }
                // ray must be a recession direction with positive objective gain
                let gain: Rat = dot(&self.objective, ray);
                if !gain.is_positive() {
                    return false;
                }
                self.a_le.iter().all(|row| !dot(row, ray).is_positive())
                    && self.a_eq.iter().all(|row| dot(row, ray).is_zero())
            }
            LpOutcome::Infeasible {
                farkas_le,
                farkas_eq,
            } => {
                if farkas_le.iter().any(|p| p.is_negative()) {
                    return false;
                }
                for j in 0..self.num_vars {
                    let mut s = Rat::zero();
                    for (p, row) in farkas_le.iter().zip(&self.a_le) {
                        s += p * &row[j];
                    }
                    for (q, row) in farkas_eq.iter().zip(&self.a_eq) {
                        s += q * &row[j];
                    }
                    if !s.is_zero() {
                        return false;
                    }
                }
                let rhs = dot(farkas_le, &self.b_le) + dot(farkas_eq, &self.b_eq);
                rhs.is_negative()
            }
        }
    }

    pub fn point_feasible(&self, x: &[Rat]) -> bool {
        x.len() == self.num_vars
            && self
                .a_le
                .iter()
                .zip(&self.b_le)
                .all(|(row, b)| dot(row, x) <= *b)
            && self
                .a_eq
                .iter()
                .zip(&self.b_eq)
                .all(|(row, b)| dot(row, x) == *b)
    }
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pivot_limit() -> usize {
    std::env::var("NLQUAL_LP_PIVOT_LIMIT")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1_000_000)
}

/// Dense tableau in equality standard form: columns are
/// [u_1..u_n, v_1..v_n, slacks, artificials], all nonnegative.
struct Tableau {
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
    n_struct: usize,
    n_slack: usize,
    n_art: usize,
    num_vars: usize,
    /// true where the equality-form row was negated to get rhs >= 0
    flipped: Vec<bool>,
    n_le: usize,
    objective: Vec<Rat>,
}

impl Tableau {
    fn new(lp: &Lp) -> Tableau {
        let n = lp.num_vars;
        let n_le = lp.a_le.len();
        let m = n_le + lp.a_eq.len();
        let n_struct = 2 * n;
        let n_slack = n_le;
        let n_art = m;
        let ncols = n_struct + n_slack + n_art;

        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut flipped = vec![false; m];
        for (i, (a, b)) in lp
            .a_le
            .iter()
            .zip(&lp.b_le)
            .chain(lp.a_eq.iter().zip(&lp.b_eq))
            .enumerate()
        {
            let mut row = vec![Rat::zero(); ncols];
            let flip = b.is_negative();
            flipped[i] = flip;
            let sgn = if flip {
                -Rat::one()
            } else {
                Rat::one()
            };
            for j in 0..n {
                row[j] = &sgn * &a[j];
                row[n + j] = -&row[j];
            }
            if i < n_le {
                row[n_struct + i] = sgn.clone();
            }
            row[n_struct + n_slack + i] = Rat::one();
            rows.push(row);
            rhs.push(if flip { -b.clone() } else { b.clone() });
        }

        let basis = (0..m).map(|i| n_struct + n_slack + i).collect();
        Tableau {
            rows,
            rhs,
            basis,
            n_struct,
            n_slack,
            n_art,
            num_vars: n,
            flipped,
            n_le,
            objective: lp.objective.clone(),
        }
    }

    fn ncols(&self) -> usize {
        self.n_struct + self.n_slack + self.n_art
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &piv;
        }
        self.rhs[r] /= &piv;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for j in 0..self.rows[i].len() {
                let d = &f * &self.rows[r][j];
                self.rows[i][j] -= d;
            }
            let d = &f * &self.rhs[r];
            self.rhs[i] -= d;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for min c^T x over current basis; returns (z, obj_val).
    fn reduced_costs(&self, cost: &[Rat]) -> (Vec<Rat>, Rat) {
        let m = self.rows.len();
        let mut z = cost.to_vec();
        let mut val = Rat::zero();
        for r in 0..m {
            let cb = &cost[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..z.len() {
                if !self.rows[r][j].is_zero() {
                    let d = cb * &self.rows[r][j];
                    z[j] -= d;
                }
            }
            val += cb * &self.rhs[r];
        }
        (z, val)
    }

    /// Bland's rule simplex on min cost; allowed(j) gates entering columns.
    /// Returns Some(entering) when unbounded, None at optimality.
    fn run_min(&mut self, cost: &[Rat], allowed: &dyn Fn(usize) -> bool) -> Result<Option<usize>> {
        let limit = pivot_limit();
        for _ in 0..limit {
            let (z, _) = self.reduced_costs(cost);
            let enter = (0..z.len()).find(|&j| allowed(j) && z[j].is_negative());
            let Some(c) = enter else {
                return Ok(None);
            };
            // ratio test, Bland tie-break on smallest basic variable index
            let mut best: Option<(usize, Rat)> = None;
            for r in 0..self.rows.len() {
                if self.rows[r][c].is_positive() {
                    let ratio = &self.rhs[r] / &self.rows[r][c];
                    let better = match &best {
                        None => true,
                        Some((br, bratio)) => {
                            ratio < *bratio
                                || (ratio == *bratio && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(Some(c)),
            }
        }
        Err(NlqualError::BudgetExceeded(
            "LP pivot limit exceeded".into(),
        ))
    }

    fn extract_x(&self) -> Vec<Rat> {
        let n = self.num_vars;
        let mut x = vec![Rat::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] += &self.rhs[r];
            } else if b < 2 * n {
                x[b - n] -= &self.rhs[r];
            }
        }
        x
    }

    fn solve(mut self) -> Result<LpOutcome> {
        let ncols = self.ncols();
        let art_start = self.n_struct + self.n_slack;

        // Phase 1: minimize the sum of artificials.
        let mut cost1 = vec![Rat::zero(); ncols];
        for c in cost1.iter_mut().skip(art_start) {
            *c = Rat::one();
        }
        let unb = self.run_min(&cost1, &|_| true)?;
        debug_assert!(unb.is_none(), "phase 1 is always bounded below by 0");
        let (z1, val1) = self.reduced_costs(&cost1);
        if val1.is_positive() {
            // Farkas dual from the artificial columns (they carry B^{-1}).
            // y_i = 1 - z_art_i; undo row flips; map to (p, q) with p >= 0.
            let mut p = vec![Rat::zero(); self.n_le];
            let mut q = vec![Rat::zero(); self.rows.len() - self.n_le];
            for i in 0..self.rows.len() {
                let mut y = Rat::one() - &z1[art_start + i];
                if self.flipped[i] {
                    y = -y;
                }
                if i < self.n_le {
                    p[i] = -y;
                } else {
                    q[i - self.n_le] = -y;
                }
            }
            return Ok(LpOutcome::Infeasible {
                farkas_le: p,
                farkas_eq: q,
            });
        }

        // Drive any basic artificials out; drop redundant rows.
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| !self.rows[r][c].is_zero()) {
                    self.pivot(r, c);
                    r += 1;
                } else {
                    self.rows.remove(r);
                    self.rhs.remove(r);
                    self.basis.remove(r);
                    self.flipped.remove(r);
                }
            } else {
                r += 1;
            }
        }

        // Phase 2: minimize -(objective) over structural + slack columns.
        let n = self.num_vars;
        let mut cost2 = vec![Rat::zero(); ncols];
        for j in 0..n {
            cost2[j] = -self.objective[j].clone();
            cost2[n + j] = self.objective[j].clone();
        }
        let unb = self.run_min(&cost2, &|j| j < art_start)?;
        let x = self.extract_x();
        match unb {
            None => {
                let value = dot(&self.objective, &x);
                Ok(LpOutcome::Optimal { x, value })
            }
            Some(enter) => {
                // Recession direction: entering column 1, basic vars move by
                // -column entry; translate to original variable space.
                let n = self.num_vars;
                let mut dir = vec![Rat::zero(); n];
                let add = |dir: &mut Vec<Rat>, col: usize, amt: Rat| {
                    if col < n {
                        dir[col] += amt;
                    } else if col < 2 * n {
                        dir[col - n] -= amt;
                    }
                };
                add(&mut dir, enter, Rat::one());
                for r in 0..self.rows.len() {
                    if !self.rows[r][enter].is_zero() {
                        add(&mut dir, self.basis[r], -self.rows[r][enter].clone());
                    }
                }
                Ok(LpOutcome::Unbounded { x, ray: dir })
            }
        }
    }
}
