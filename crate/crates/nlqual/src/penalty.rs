//! Exact penalization: penalized objective oracles, the lifted restricted
//! system, empirical error-bound moduli, and sampling-based exactness checks.

use crate::error::{NlqualError, Result};
use crate::model::{NormKind, OuterFn, ProblemSpec, ScalarFn};
use crate::rational::{rat_to_f64, Rat};
use crate::setalg::dd::{self, HForm};
use crate::setalg::{Polyhedron, PolySet};
use crate::subdiff::{outer_table, superlinear_growth};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const EXACTNESS_SLACK: f64 = 1e-9;
pub const MIN_POSITIVE_RESIDUAL_SAMPLES: usize = 10;
pub const GROWTH_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct PenaltyProblem {
    pub base: ProblemSpec,
    pub rho: f64,
    pub norm: NormKind,
}

impl PenaltyProblem {
    /// f(x) + sum phi_i(omega_i(x)) + rho (||g_+|| + ||h||), restricted to
    /// Omega. None means +infinity (outside Omega or a custom-outer domain).
    pub fn value_f64(&self, x: &[f64]) -> Result<Option<f64>> {
        if self.base.omega.residual_f64(self.base.dim, x)? > 1e-9 {
            return Ok(None);
        }
        let Some(obj) = self.base.objective_f64(x)? else {
            return Ok(None);
        };
        Ok(Some(obj + self.rho * self.residual_f64(x)?))
    }

    /// ||g(x)_+|| + ||h(x)|| in the configured norm.
    pub fn residual_f64(&self, x: &[f64]) -> Result<f64> {
        let gp: Vec<f64> = self
            .base
            .ineq
            .iter()
            .map(|g| g.eval_f64(x).map(|v| v.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        let hv: Vec<f64> = self
            .base
            .eq
            .iter()
            .map(|h| h.eval_f64(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.norm.eval(&gp) + self.norm.eval(&hv))
    }

    /// The penalty term vanishes identically on the feasible set.
    pub fn residual_zero_on(&self, x: &[Rat]) -> bool {
        let all_affine = self.base.ineq.iter().chain(&self.base.eq).all(|f| f.is_affine());
        if !all_affine {
            return false;
        }
        self.base
            .ineq
            .iter()
            .all(|g| g.eval_rat(x).map(|v| !num_traits::Signed::is_positive(&v)).unwrap_or(false))
            && self
                .base
                .eq
                .iter()
                .all(|h| h.eval_rat(x).map(|v| v.is_zero()).unwrap_or(false))
    }
}

pub fn build_penalty(p: &ProblemSpec, rho: f64, norm: NormKind) -> Result<PenaltyProblem> {
    if rho < 0.0 {
        return Err(NlqualError::Domain("rho must be nonnegative".into()));
    }
    Ok(PenaltyProblem {
        base: p.clone(),
        rho,
        norm,
    })
}

// ---------------------------------------------------------------------------
// restricted system (lifted to (x, t))

#[derive(Debug, Clone)]
pub struct RestrictedSystem {
    pub base: ProblemSpec,
    /// t* = omega(x*), one entry per composite term
    pub t_star: Vec<Rat>,
    /// terms whose horizon subdifferential at t_i* is trivial
    pub free_rows: Vec<usize>,
    /// complement: rows pinned by t_i = t_i*
    pub pinned_rows: Vec<usize>,
    /// rows lifted with the plus-map inside the equality (outer |t|^p instead
    /// of (t_+)^p; applies at t* = 0 only)
    pub plus_map: Vec<bool>,
}

impl RestrictedSystem {
    pub fn dim(&self) -> usize {
        self.base.dim + self.base.phi.len()
    }

    pub fn anchor_f64(&self, x_star: &[Rat]) -> Vec<f64> {
        x_star
            .iter()
            .chain(self.t_star.iter())
            .map(rat_to_f64)
            .collect()
    }
}

fn horizon_trivial(outer: &OuterFn, t: &Rat) -> Result<bool> {
    let table = outer_table(outer, t)?;
    let set = &table.horizon.set;
    Ok(!set.is_whole()
        && set
            .pieces()
            .iter()
            .all(|p| p.rays.is_empty() && p.lines.is_empty()))
}

pub fn build_restricted_system(p: &ProblemSpec, x_star: &[Rat]) -> Result<RestrictedSystem> {
    let mut t_star = Vec::new();
    for term in &p.phi {
        let t = term.inner_value_rat(x_star).ok_or_else(|| {
            NlqualError::Eval("restricted system needs exact inner values".into())
        })?;
        t_star.push(t);
    }
    let mut free_rows = Vec::new();
    let mut pinned_rows = Vec::new();
    let mut plus_map = vec![false; p.phi.len()];
    for (i, term) in p.phi.iter().enumerate() {
        if horizon_trivial(&term.outer, &t_star[i])? {
            free_rows.push(i);
            continue;
        }
        pinned_rows.push(i);
        if superlinear_growth(&term.outer, &t_star[i])? {
            continue;
        }
        // the plus-composite at 0 is rescued by moving the plus-map into the
        // equality row, with outer |t|^p
        match &term.outer {
            OuterFn::PowPlus { .. } if t_star[i].is_zero() => plus_map[i] = true,
            _ => {
                return Err(NlqualError::HypothesisViolated(format!(
                    "pinned row {i}: the outer function does not grow \
                     superlinearly at its anchor value"
                )))
            }
        }
    }
    Ok(RestrictedSystem {
        base: p.clone(),
        t_star,
        free_rows,
        pinned_rows,
        plus_map,
    })
}

// ---------------------------------------------------------------------------
// error-bound targets

/// A system whose error-bound modulus can be sampled: residual rows plus,
/// when the data is polyhedral, an exact projection target.
pub trait EbTarget {
    fn dim(&self) -> usize;
    /// None when the point is outside the sampling domain (Omega etc.)
    fn residual_rows(&self, z: &[f64]) -> Result<Option<Vec<f64>>>;
    fn polyset(&self) -> Result<Option<PolySet>>;
}

/// The plain feasible region of a problem.
pub struct FeasTarget<'a>(pub &'a ProblemSpec);

impl EbTarget for FeasTarget<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn residual_rows(&self, z: &[f64]) -> Result<Option<Vec<f64>>> {
        if self.0.omega.residual_f64(self.0.dim, z)? > 1e-9 {
            return Ok(None);
        }
        let mut rows = Vec::new();
        for g in &self.0.ineq {
            rows.push(g.eval_f64(z)?.max(0.0));
        }
        for h in &self.0.eq {
            rows.push(h.eval_f64(z)?);
        }
        Ok(Some(rows))
    }

    fn polyset(&self) -> Result<Option<PolySet>> {
        let p = self.0;
        if !p.ineq.iter().chain(&p.eq).all(|f| f.is_affine()) {
            return Ok(None);
        }
        let mut pieces = Vec::new();
        let omega_pieces: Vec<(Vec<Vec<Rat>>, Vec<Rat>)> = if p.omega.is_whole() {
            vec![(vec![], vec![])]
        } else {
            p.omega
                .pieces()
                .iter()
                .map(|hp| (hp.a.clone(), hp.b.clone()))
                .collect()
        };
        for (oa, ob) in omega_pieces {
            let mut a_ineq = oa;
            let mut b_ineq = ob;
            let mut a_eq = Vec::new();
            let mut b_eq = Vec::new();
            for g in &p.ineq {
                let (a, b) = affine_row(g)?;
                a_ineq.push(a);
                b_ineq.push(-b);
            }
            for h in &p.eq {
                let (a, b) = affine_row(h)?;
                a_eq.push(a);
                b_eq.push(-b);
            }
            let h = HForm {
                a_ineq: a_ineq.clone(),
                b_ineq: b_ineq.clone(),
                a_eq,
                b_eq,
            };
            let (points, rays, lines) = dd::poly_h_to_v(p.dim, &h)?;
            let piece = Polyhedron {
                points,
                rays,
                lines,
            };
            if !piece.is_empty_repr() {
                pieces.push(piece);
            }
        }
        if pieces.is_empty() {
            return Ok(Some(PolySet::empty(p.dim)));
        }
        Ok(Some(PolySet::from_pieces(p.dim, pieces)))
    }
}

fn affine_row(f: &ScalarFn) -> Result<(Vec<Rat>, Rat)> {
    match f {
        ScalarFn::Affine { a, b } => Ok((a.clone(), b.clone())),
        ScalarFn::Smooth { .. } => Err(NlqualError::Unsupported(
            "affine row requested for a smooth constraint".into(),
        )),
    }
}

impl EbTarget for RestrictedSystem {
    fn dim(&self) -> usize {
        RestrictedSystem::dim(self)
    }

    fn residual_rows(&self, z: &[f64]) -> Result<Option<Vec<f64>>> {
        let d = self.base.dim;
        let (x, t) = z.split_at(d);
        if self.base.omega.residual_f64(d, x)? > 1e-9 {
            return Ok(None);
        }
        let mut rows = Vec::new();
        for (i, term) in self.base.phi.iter().enumerate() {
            let w = term.inner.eval_f64(x)?;
            let w = if self.plus_map[i] { w.max(0.0) } else { w };
            rows.push(w - t[i]);
        }
        for &i in &self.pinned_rows {
            rows.push(t[i] - rat_to_f64(&self.t_star[i]));
        }
        for g in &self.base.ineq {
            rows.push(g.eval_f64(x)?.max(0.0));
        }
        for h in &self.base.eq {
            rows.push(h.eval_f64(x)?);
        }
        Ok(Some(rows))
    }

    fn polyset(&self) -> Result<Option<PolySet>> {
        let p = &self.base;
        let d = p.dim;
        let s = p.phi.len();
        let affine = p.ineq.iter().chain(&p.eq).all(|f| f.is_affine())
            && p.phi.iter().all(|term| term.inner.is_affine())
            && !self.plus_map.iter().any(|&b| b);
        if !affine {
            return Ok(None);
        }
        let ext = |row: &[Rat]| -> Vec<Rat> {
            let mut r = row.to_vec();
            r.resize(d + s, Rat::zero());
            r
        };
        let omega_pieces: Vec<(Vec<Vec<Rat>>, Vec<Rat>)> = if p.omega.is_whole() {
            vec![(vec![], vec![])]
        } else {
            p.omega
                .pieces()
                .iter()
                .map(|hp| (hp.a.clone(), hp.b.clone()))
                .collect()
        };
        let mut pieces = Vec::new();
        for (oa, ob) in omega_pieces {
            let mut a_ineq: Vec<Vec<Rat>> = oa.iter().map(|r| ext(r)).collect();
            let mut b_ineq = ob.clone();
            let mut a_eq = Vec::new();
            let mut b_eq = Vec::new();
            for g in &p.ineq {
                let (a, b) = affine_row(g)?;
                a_ineq.push(ext(&a));
                b_ineq.push(-b);
            }
            for h in &p.eq {
                let (a, b) = affine_row(h)?;
                a_eq.push(ext(&a));
                b_eq.push(-b);
            }
            for (i, term) in p.phi.iter().enumerate() {
                let (a, b) = affine_row(&term.inner)?;
                let mut row = ext(&a);
                row[d + i] = -<Rat as num_traits::One>::one();
                a_eq.push(row);
                b_eq.push(-b);
            }
            for &i in &self.pinned_rows {
                let mut row = vec![Rat::zero(); d + s];
                row[d + i] = <Rat as num_traits::One>::one();
                a_eq.push(row);
                b_eq.push(self.t_star[i].clone());
            }
            let h = HForm {
                a_ineq,
                b_ineq,
                a_eq,
                b_eq,
            };
            let (points, rays, lines) = dd::poly_h_to_v(d + s, &h)?;
            let piece = Polyhedron {
                points,
                rays,
                lines,
            };
            if !piece.is_empty_repr() {
                pieces.push(piece);
            }
        }
        if pieces.is_empty() {
            return Ok(Some(PolySet::empty(d + s)));
        }
        Ok(Some(PolySet::from_pieces(d + s, pieces)))
    }
}

/// Lambda = {(x,y) in Omega x R : Psi(x) - y = 0, g <= 0, h = 0} with
/// Psi = sum phi_i(omega_i(.)).
pub struct LiftedSet {
    pub base: ProblemSpec,
    pub y_star: f64,
}

pub fn build_lifted_set(p: &ProblemSpec, x_star: &[Rat]) -> Result<LiftedSet> {
    let xf: Vec<f64> = x_star.iter().map(rat_to_f64).collect();
    let mut psi = 0.0;
    for term in &p.phi {
        let t = term.inner.eval_f64(&xf)?;
        psi += term
            .outer
            .eval_f64(t)?
            .ok_or_else(|| NlqualError::PhiInfinite("anchor outside the outer domain".into()))?;
    }
    Ok(LiftedSet {
        base: p.clone(),
        y_star: psi,
    })
}

impl EbTarget for LiftedSet {
    fn dim(&self) -> usize {
        self.base.dim + 1
    }

    fn residual_rows(&self, z: &[f64]) -> Result<Option<Vec<f64>>> {
        let d = self.base.dim;
        let (x, y) = z.split_at(d);
        if self.base.omega.residual_f64(d, x)? > 1e-9 {
            return Ok(None);
        }
        let mut psi = 0.0;
        for term in &self.base.phi {
            let t = term.inner.eval_f64(x)?;
            match term.outer.eval_f64(t)? {
                Some(v) => psi += v,
                None => return Ok(None),
            }
        }
        let mut rows = vec![psi - y[0]];
        for g in &self.base.ineq {
            rows.push(g.eval_f64(x)?.max(0.0));
        }
        for h in &self.base.eq {
            rows.push(h.eval_f64(x)?);
        }
        Ok(Some(rows))
    }

    fn polyset(&self) -> Result<Option<PolySet>> {
        Ok(None)
    }
}

/// A bare equation system h(x) = 0 over expressions (for canaries and ad-hoc
/// error-bound experiments).
pub struct EquationTarget {
    pub dim: usize,
    pub rows: Vec<crate::expr::Expr>,
}

impl EbTarget for EquationTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual_rows(&self, z: &[f64]) -> Result<Option<Vec<f64>>> {
        let rows = self
            .rows
            .iter()
            .map(|e| e.eval_f64(z))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(rows))
    }

    fn polyset(&self) -> Result<Option<PolySet>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EbVerdict {
    Bounded,
    Growing,
    Degenerate,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorBoundEstimate {
    pub kappa_hat: f64,
    pub verdict: EbVerdict,
    /// (radius, max dist/residual ratio, positive-residual sample count)
    pub table: Vec<(f64, f64, usize)>,
}

/// Distance to the target set: exact projection when polyhedral, otherwise an
/// inner quadratic-penalty descent on ||w - z||^2 + C * sum r_k(w)^2.
fn target_distance(
    target: &dyn EbTarget,
    poly: &Option<PolySet>,
    z: &[f64],
) -> Result<Option<f64>> {
    if let Some(ps) = poly {
        return Ok(Some(ps.project(z)?.1));
    }
    // Gauss-Newton normal flow: w <- w - J^T (J J^T)^-1 r, which converges to
    // a nearby point of {r = 0} and gives the local distance
    let dim = target.dim();
    let mut w = z.to_vec();
    let scale = 1.0 + z.iter().map(|c| c * c).sum::<f64>().sqrt();
    // row-wise relative targets: each initial residual must shrink by 1e9
    let rows0 = match target.residual_rows(z)? {
        Some(r) => r,
        None => return Ok(None),
    };
    let tol_row: Vec<f64> = rows0.iter().map(|r| 1e-9 * r.abs() + 1e-30).collect();
    let mut converged = false;
    for _ in 0..500 {
        let Some(rows) = target.residual_rows(&w)? else {
            return Ok(None);
        };
        let active: Vec<(usize, f64)> = rows
            .iter()
            .enumerate()
            .filter(|(k, r)| r.abs() > tol_row[*k])
            .map(|(k, r)| (k, *r))
            .collect();
        if active.is_empty() {
            converged = true;
            break;
        }
        // central-difference Jacobian of the active rows
        let hstep = 1e-6 * scale;
        let mut jac = vec![vec![0.0; dim]; active.len()];
        for c in 0..dim {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[c] += hstep;
            wm[c] -= hstep;
            let (rp, rm) = match (target.residual_rows(&wp)?, target.residual_rows(&wm)?) {
                (Some(a), Some(b)) => (a, b),
                _ => return Ok(None),
            };
            for (ai, &(k, _)) in active.iter().enumerate() {
                jac[ai][c] = (rp[k] - rm[k]) / (2.0 * hstep);
            }
        }
        let na = active.len();
        let mut gram = vec![vec![0.0; na]; na];
        for i in 0..na {
            for j in 0..na {
                gram[i][j] = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
            }
            gram[i][i] = gram[i][i] * (1.0 + 1e-12) + 1e-300;
        }
        let rhs: Vec<f64> = active.iter().map(|&(_, r)| r).collect();
        let Some(y) = solve_dense_f64(&mut gram, &rhs) else {
            return Ok(None);
        };
        let mut moved = 0.0;
        for c in 0..dim {
            let d: f64 = (0..na).map(|i| jac[i][c] * y[i]).sum();
            w[c] -= d;
            moved += d * d;
        }
        if moved.sqrt() < 1e-14 * scale {
            break;
        }
    }
    if !converged {
        let rows = target
            .residual_rows(&w)?
            .ok_or_else(|| NlqualError::ProjectionFailure("inner solve diverged".into()))?;
        if rows
            .iter()
            .zip(&tol_row)
            .any(|(r, t)| r.abs() > 10.0 * t + 1e-12 * scale)
        {
            return Ok(None);
        }
    }
    Ok(Some(
        w.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    ))
}

fn solve_dense_f64(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, pv) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())?;
        if pv < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        let d = a[col][col];
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col] / d;
                for c2 in col..n {
                    a[r][c2] -= f * a[col][c2];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in 0..n {
        x[col] /= a[col][col];
    }
    Some(x)
}

pub fn estimate_error_bound(
    target: &dyn EbTarget,
    anchor: &[f64],
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ErrorBoundEstimate> {
    if anchor.len() != target.dim() {
        return Err(NlqualError::DimMismatch(
            "anchor length does not match the target dimension".into(),
        ));
    }
    let poly = target.polyset()?;
    let mut table = Vec::new();
    let mut kappa_hat: f64 = 0.0;
    let mut positive_total = 0usize;
    let mut projection_failures = 0usize;
    for &r in radii {
        let mut max_ratio: f64 = 0.0;
        let mut positive = 0usize;
        for s in 0..samples {
            // per-sample stream, shared across rungs: the same unit offsets
            // are rescaled per radius, so rung ratios are comparable
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64));
            let z: Vec<f64> = anchor
                .iter()
                .map(|c| c + rng.gen_range(-1.0..1.0) * r)
                .collect();
            let Some(rows) = target.residual_rows(&z)? else {
                continue;
            };
            let residual: f64 = rows.iter().map(|v| v.abs()).sum();
            if residual <= 1e-18 {
                continue;
            }
            positive += 1;
            match target_distance(target, &poly, &z)? {
                Some(dist) => {
                    let ratio = dist / residual;
                    max_ratio = max_ratio.max(ratio);
                    kappa_hat = kappa_hat.max(ratio);
                }
                None => projection_failures += 1,
            }
        }
        positive_total += positive;
        table.push((r, max_ratio, positive));
    }
    let verdict = if positive_total < MIN_POSITIVE_RESIDUAL_SAMPLES
        || projection_failures * 10 > positive_total
    {
        EbVerdict::Degenerate
    } else {
        let n = table.len();
        let growing = n >= 3
            && table[n - 1].1 > table[n - 2].1
            && table[n - 2].1 > table[n - 3].1
            && table[n - 1].1 > GROWTH_FACTOR * table[n - 3].1;
        if growing {
            EbVerdict::Growing
        } else {
            EbVerdict::Bounded
        }
    };
    Ok(ErrorBoundEstimate {
        kappa_hat,
        verdict,
        table,
    })
}

// ---------------------------------------------------------------------------
// threshold search and exactness validation

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExactnessReport {
    pub passed: bool,
    pub rho: f64,
    /// worst (point, penalized value - anchor value) over the probe set
    pub worst: Option<(Vec<f64>, f64)>,
    pub samples_used: usize,
}

pub fn validate_exactness(
    pp: &PenaltyProblem,
    x_star: &[Rat],
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<ExactnessReport> {
    let xf: Vec<f64> = x_star.iter().map(rat_to_f64).collect();
    let v_star = pp.value_f64(&xf)?.ok_or_else(|| {
        NlqualError::Domain("anchor outside the penalized objective's domain".into())
    })?;
    let dim = pp.base.dim;
    let mut probes: Vec<Vec<f64>> = Vec::new();
    if radius > 0.0 {
        for k in 0..dim {
            for sgn in [1.0, -1.0] {
                let mut y = xf.clone();
                y[k] += sgn * radius;
                probes.push(y);
            }
        }
        // vertices of Omega pieces inside the ball
        for piece in pp.base.omega.pieces() {
            if let Ok(v) = piece.to_vform(dim) {
                for pt in &v.points {
                    let ptf: Vec<f64> = pt.iter().map(rat_to_f64).collect();
                    let d2: f64 = ptf.iter().zip(&xf).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 <= radius * radius {
                        probes.push(ptf);
                    }
                }
            }
        }
        for s in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64));
            probes.push(
                xf.iter()
                    .map(|c| c + rng.gen_range(-1.0..1.0) * radius)
                    .collect(),
            );
        }
    }
    let mut worst: Option<(Vec<f64>, f64)> = None;
    let mut used = 0usize;
    for y in &probes {
        let Some(v) = pp.value_f64(y)? else {
            continue; // outside Omega or an outer domain: value is +infinity
        };
        used += 1;
        let margin = v - v_star;
        if worst.as_ref().map(|(_, m)| margin < *m).unwrap_or(true) {
            worst = Some((y.clone(), margin));
        }
    }
    let passed = worst
        .as_ref()
        .map(|(_, m)| *m >= -EXACTNESS_SLACK)
        .unwrap_or(true);
    Ok(ExactnessReport {
        passed,
        rho: pp.rho,
        worst: if passed { worst } else { worst.clone() },
        samples_used: used,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Rho0Report {
    /// smallest power-of-two rho passing validation; None when the cap was hit
    pub rho0: Option<f64>,
    pub attempts: Vec<ExactnessReport>,
    pub cap: f64,
}

pub fn find_rho0(
    p: &ProblemSpec,
    x_star: &[Rat],
    radius: f64,
    samples: usize,
    seed: u64,
    rho_cap: f64,
) -> Result<Rho0Report> {
    let feas = p.check_feasible(x_star, 1e-9)?;
    if !feas.feasible {
        return Err(NlqualError::Domain(
            "rho search anchored at an infeasible point".into(),
        ));
    }
    let mut attempts = Vec::new();
    let mut rho = 1.0;
    while rho <= rho_cap {
        let pp = build_penalty(p, rho, p.norm)?;
        let rec = validate_exactness(&pp, x_star, radius, samples, seed)?;
        let passed = rec.passed;
        attempts.push(rec);
        if passed {
            return Ok(Rho0Report {
                rho0: Some(rho),
                attempts,
                cap: rho_cap,
            });
        }
        rho *= 2.0;
    }
    Ok(Rho0Report {
        rho0: None,
        attempts,
        cap: rho_cap,
    })
}

pub fn restricted_system_to_json(sys: &RestrictedSystem) -> Value {
    json!({
        "t_star": sys.t_star.iter().map(crate::rational::rat_to_string).collect::<Vec<_>>(),
        "free_rows": sys.free_rows,
        "pinned_rows": sys.pinned_rows,
        "plus_map": sys.plus_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::model::parse_problem;
    use crate::rational::rat_int;

    fn load(name: &str) -> ProblemSpec {
        let path = format!(
            "{}/../../problems/{name}.json",
            env!("CARGO_MANIFEST_DIR")
        );
        parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn rv(vals: &[i64]) -> Vec<Rat> {
        vals.iter().map(|&v| rat_int(v)).collect()
    }

    #[test]
    fn example1_penalized_value_at_the_anchor() {
        let p = load("example1");
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let v = pp.value_f64(&[1.0, 0.0, 1.0, 0.0]).unwrap().unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(pp.residual_zero_on(&rv(&[1, 0, 1, 0])));
    }

    #[test]
    fn example1_penalized_value_off_the_region() {
        let p = load("example1");
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let v = pp.value_f64(&[1.0, 1.0, 1.0, 1.0]).unwrap().unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rho_irrelevant_on_feasible_points() {
        let p = load("example1");
        let a = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let b = build_penalty(&p, 128.0, NormKind::L1).unwrap();
        let x = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(a.value_f64(&x).unwrap(), b.value_f64(&x).unwrap());
    }

    #[test]
    fn penalized_value_monotone_in_rho() {
        let p = load("example1");
        let lo = build_penalty(&p, 2.0, NormKind::L1).unwrap();
        let hi = build_penalty(&p, 5.0, NormKind::L1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = lo.value_f64(&x).unwrap().unwrap();
            let b = hi.value_f64(&x).unwrap().unwrap();
            assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn example1_restricted_system_partition() {
        let p = load("example1");
        let sys = build_restricted_system(&p, &rv(&[1, 0, 1, 0])).unwrap();
        assert_eq!(sys.t_star, rv(&[1, 0, 1, 0]));
        assert_eq!(sys.free_rows, vec![0, 2]);
        assert_eq!(sys.pinned_rows, vec![1, 3]);
        assert!(!sys.plus_map.iter().any(|&b| b));
    }

    #[test]
    fn lipschitz_outer_rows_are_all_free() {
        let src = r#"{"dim":2,
            "phi":[{"outer":{"kind":"linear","c":"3"},
                    "inner":{"kind":"affine","a":["1","0"],"b":"0"}}],
            "ineq":[{"kind":"affine","a":["1","1"],"b":"0"}]}"#;
        let p = parse_problem(src).unwrap();
        let sys = build_restricted_system(&p, &rv(&[0, 0])).unwrap();
        assert_eq!(sys.free_rows, vec![0]);
        assert!(sys.pinned_rows.is_empty());
    }

    #[test]
    fn plus_composite_rescued_by_the_plus_map_row() {
        let src = r#"{"dim":1,
            "phi":[{"outer":{"kind":"pow_plus","p":"1/2"},
                    "inner":{"kind":"affine","a":["1"],"b":"0"}}]}"#;
        let p = parse_problem(src).unwrap();
        let sys = build_restricted_system(&p, &rv(&[0])).unwrap();
        assert_eq!(sys.pinned_rows, vec![0]);
        assert!(sys.plus_map[0]);
    }

    #[test]
    fn cubic_custom_outer_violates_the_growth_hypothesis() {
        let p = load("example3");
        let err = build_restricted_system(&p, &rv(&[0])).unwrap_err();
        assert!(matches!(err, NlqualError::HypothesisViolated(_)));
    }

    #[test]
    fn example1_feasible_region_error_bound_is_bounded() {
        let p = load("example1");
        let radii: Vec<f64> = (1..=5).map(|k| 10f64.powi(-k)).collect();
        let est = estimate_error_bound(
            &FeasTarget(&p),
            &[1.0, 0.0, 1.0, 0.0],
            &radii,
            64,
            42,
        )
        .unwrap();
        assert_eq!(est.verdict, EbVerdict::Bounded);
        assert!(est.kappa_hat.is_finite() && est.kappa_hat > 0.0);
    }

    #[test]
    fn example1_restricted_system_error_bound_is_bounded() {
        let p = load("example1");
        let x = rv(&[1, 0, 1, 0]);
        let sys = build_restricted_system(&p, &x).unwrap();
        let anchor = sys.anchor_f64(&x);
        let radii: Vec<f64> = (1..=4).map(|k| 10f64.powi(-k)).collect();
        let est = estimate_error_bound(&sys, &anchor, &radii, 32, 42).unwrap();
        assert_eq!(est.verdict, EbVerdict::Bounded);
    }

    #[test]
    fn squared_equation_canary_is_growing() {
        let target = EquationTarget {
            dim: 1,
            rows: vec![Expr::parse("x1^2", 1).unwrap()],
        };
        let radii: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
        let est = estimate_error_bound(&target, &[0.0], &radii, 32, 42).unwrap();
        assert_eq!(est.verdict, EbVerdict::Growing);
    }

    #[test]
    fn example1_rho0_found_below_cap() {
        let p = load("example1");
        let rep = find_rho0(&p, &rv(&[1, 0, 1, 0]), 0.1, 500, 42, 64.0).unwrap();
        let rho0 = rep.rho0.expect("threshold expected below the cap");
        assert!(rho0 <= 64.0);
    }

    #[test]
    fn one_dimensional_threshold_is_one() {
        // min -x s.t. x = 0: |-x| + rho|x| has 0 as a minimizer iff rho >= 1
        let src = r#"{"dim":1,"smooth":"0 - x1",
            "eq":[{"kind":"affine","a":["1"],"b":"0","sense":"="}]}"#;
        let p = parse_problem(src).unwrap();
        let rep = find_rho0(&p, &rv(&[0]), 0.5, 200, 42, 64.0).unwrap();
        assert_eq!(rep.rho0, Some(1.0));
    }

    #[test]
    fn infeasible_anchor_rejected() {
        let p = load("example1");
        assert!(find_rho0(&p, &rv(&[1, 1, 1, 1]), 0.1, 10, 42, 4.0).is_err());
    }

    #[test]
    fn zero_rho_fails_with_a_violator() {
        let p = load("example1");
        let pp = build_penalty(&p, 0.0, NormKind::L1).unwrap();
        let rec = validate_exactness(&pp, &rv(&[1, 0, 1, 0]), 0.5, 2000, 42).unwrap();
        assert!(!rec.passed);
        assert!(rec.worst.unwrap().1 < 0.0);
    }

    #[test]
    fn zero_radius_is_vacuous() {
        let p = load("example1");
        let pp = build_penalty(&p, 0.0, NormKind::L1).unwrap();
        let rec = validate_exactness(&pp, &rv(&[1, 0, 1, 0]), 0.0, 100, 42).unwrap();
        assert!(rec.passed);
    }

    #[test]
    fn corollary4_union_region_error_bound_is_bounded() {
        let p = load("corollary4");
        let radii: Vec<f64> = (1..=4).map(|k| 10f64.powi(-k)).collect();
        let est = estimate_error_bound(&FeasTarget(&p), &[1.0, 0.0], &radii, 48, 42).unwrap();
        assert_eq!(est.verdict, EbVerdict::Bounded);
    }

    #[test]
    fn lifted_set_anchor_and_residual() {
        let p = load("example1");
        let x = rv(&[1, 0, 1, 0]);
        let lam = build_lifted_set(&p, &x).unwrap();
        assert!((lam.y_star - 2.0).abs() < 1e-12);
        let z = [1.0, 0.0, 1.0, 0.0, 2.0];
        let rows = lam.residual_rows(&z).unwrap().unwrap();
        assert!(rows.iter().all(|r| r.abs() < 1e-12));
    }
}
