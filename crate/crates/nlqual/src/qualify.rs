//! Qualification-condition checkers. Affine data with exact subdifferential
//! fields gets certified verdicts; everything else is graded, with witnesses
//! that re-verify by direct substitution.

use crate::error::{NlqualError, Result};
use crate::model::{ProblemSpec, ScalarFn};
use crate::rational::{rat_from_f64, rat_to_f64, rat_to_string, Rat};
use crate::setalg::lp::{Lp, LpOutcome};
use crate::setalg::{Polyhedron, PolySet, SetKind};
use crate::subdiff::{normal_cone_omega, phi_bundle, Exactness, SetField};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const PATTERN_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Nnamcq,
    QnHorizon,
    RcpldHorizon,
    QnCoderiv,
    Bq,
    Cond13,
    Implication28,
    StandardQn,
    StandardRcpld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedHolds,
    LikelyHolds,
    Unknown,
    LikelyFails,
    CertifiedFails,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::CertifiedHolds | Verdict::LikelyHolds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    AffineExact,
    SmoothHeuristic,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct QualReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub regime: Regime,
    pub certificate: Value,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct QualOptions {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub delta: f64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for QualOptions {
    fn default() -> Self {
        QualOptions {
            radii: (1..=8).map(|k| 10f64.powi(-k)).collect(),
            samples: 512,
            delta: 1e-2,
            probes: 64,
            seed: 42,
        }
    }
}

// ---------------------------------------------------------------------------
// gradients and linear algebra helpers

struct Gradients {
    g: Vec<Vec<Rat>>,
    h: Vec<Vec<Rat>>,
    exact: bool,
    affine: bool,
}

fn gradients_at(p: &ProblemSpec, x: &[Rat]) -> Result<Gradients> {
    let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
    let mut exact = true;
    let mut affine = true;
    let mut take = |f: &ScalarFn| -> Result<Vec<Rat>> {
        if !f.is_affine() {
            affine = false;
        }
        match f.grad_rat(x) {
            Some(g) => Ok(g),
            None => {
                exact = false;
                Ok(f.grad_f64(&xf)?.into_iter().map(rat_from_f64).collect())
            }
        }
    };
    let g = p.ineq.iter().map(&mut take).collect::<Result<Vec<_>>>()?;
    let h = p.eq.iter().map(&mut take).collect::<Result<Vec<_>>>()?;
    Ok(Gradients {
        g,
        h,
        exact,
        affine,
    })
}

fn exact_rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let mut rank = 0;
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    for col in 0..cols {
        if let Some(pr) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) {
            m.swap(rank, pr);
            let piv = m[rank][col].clone();
            for c in col..cols {
                m[rank][c] = &m[rank][c] / &piv;
            }
            for r in 0..m.len() {
                if r != rank && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in col..cols {
                        m[r][c] = &m[r][c] - &f * &m[rank][c];
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

/// Greedy independent subset of rows, in index order.
fn exact_basis_subset(rows: &[Vec<Rat>]) -> Vec<usize> {
    let mut chosen: Vec<Vec<Rat>> = Vec::new();
    let mut idx = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        chosen.push(r.clone());
        if exact_rank(&chosen) == chosen.len() {
            idx.push(i);
        } else {
            chosen.pop();
        }
    }
    idx
}

fn float_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut rank = 0;
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    for col in 0..cols {
        let (pr, pv) = match (rank..m.len())
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            Some(p) => p,
            None => break,
        };
        if pv < tol {
            continue;
        }
        m.swap(rank, pr);
        let piv = m[rank][col];
        for c in col..cols {
            m[rank][c] /= piv;
        }
        for r in 0..m.len() {
            if r != rank {
                let f = m[r][col];
                if f != 0.0 {
                    for c in col..cols {
                        m[r][c] -= f * m[rank][c];
                    }
                }
            }
        }
        rank += 1;
    }
    rank
}

fn rat_vec_str(v: &[Rat]) -> Vec<String> {
    v.iter().map(rat_to_string).collect()
}

fn require_feasible(p: &ProblemSpec, x: &[Rat]) -> Result<()> {
    let r = p.check_feasible(x, 1e-9)?;
    if !r.feasible {
        return Err(NlqualError::Domain(
            "qualification query at an infeasible point".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// abnormal multiplier cone

#[derive(Debug, Clone)]
pub struct AbnormalCone {
    /// active inequality indices (0-based); lambda coordinates follow this order
    pub active: Vec<usize>,
    /// cone in (lambda_active, mu) space
    pub cone: PolySet,
    pub exact: bool,
    pub affine: bool,
}

impl AbnormalCone {
    pub fn is_trivial(&self) -> bool {
        self.cone
            .pieces()
            .iter()
            .all(|p| p.rays.is_empty() && p.lines.is_empty())
    }

    /// First nonzero generator, if any.
    pub fn witness(&self) -> Option<Vec<Rat>> {
        for p in self.cone.pieces() {
            if let Some(g) = p.rays.first().or(p.lines.first()) {
                return Some(g.clone());
            }
        }
        None
    }

    /// Expand a reduced (lambda_active, mu) vector to full-length lambda.
    pub fn expand(&self, v: &[Rat], n: usize, m: usize) -> (Vec<Rat>, Vec<Rat>) {
        let mut lam = vec![Rat::zero(); n];
        for (k, &i) in self.active.iter().enumerate() {
            lam[i] = v[k].clone();
        }
        let mu = v[self.active.len()..self.active.len() + m].to_vec();
        (lam, mu)
    }
}

/// V-form of the cone of multipliers (lambda >= 0 on the active set, mu free)
/// with -(sum lambda grad g + sum mu grad h) inside `k`.
fn multiplier_cone(
    k: &PolySet,
    g_act: &[Vec<Rat>],
    h: &[Vec<Rat>],
    dim: usize,
) -> Result<PolySet> {
    let na = g_act.len();
    let m = h.len();
    let out_dim = na + m;
    if out_dim == 0 {
        return Ok(PolySet::zero(0));
    }
    let mut pieces: Vec<Polyhedron> = Vec::new();
    let k_pieces: Vec<Polyhedron> = match &k.kind {
        SetKind::WholeSpace => {
            // membership vacuous: lambda orthant times mu span
            let mut rays = Vec::new();
            for i in 0..na {
                let mut e = vec![Rat::zero(); out_dim];
                e[i] = Rat::one();
                rays.push(e);
            }
            let mut lines = Vec::new();
            for j in 0..m {
                let mut e = vec![Rat::zero(); out_dim];
                e[na + j] = Rat::one();
                lines.push(e);
            }
            return Ok(PolySet::from_piece(out_dim, Polyhedron::cone(rays, lines)));
        }
        SetKind::Empty => return Ok(PolySet::zero(out_dim)),
        SetKind::Union(ps) => ps.clone(),
    };
    for kp in &k_pieces {
        let nr = kp.rays.len();
        let nl = kp.lines.len();
        let nv = out_dim + nr + nl;
        // inequality rows: -lambda <= 0, -rho <= 0
        let mut ineqs = Vec::new();
        for i in (0..na).chain(out_dim..out_dim + nr) {
            let mut row = vec![Rat::zero(); nv];
            row[i] = -Rat::one();
            ineqs.push(row);
        }
        // equality rows: sum lambda g + sum mu h + w = 0, w = R rho + L tau
        let mut eqs = Vec::new();
        for r in 0..dim {
            let mut row = Vec::with_capacity(nv);
            for gi in g_act {
                row.push(gi[r].clone());
            }
            for hj in h {
                row.push(hj[r].clone());
            }
            for ray in &kp.rays {
                row.push(ray[r].clone());
            }
            for line in &kp.lines {
                row.push(line[r].clone());
            }
            eqs.push(row);
        }
        let vc = crate::setalg::dd::cone_h_to_v(nv, &ineqs, &eqs)?;
        let truncate = |vs: &[Vec<Rat>]| -> Vec<Vec<Rat>> {
            vs.iter()
                .map(|v| v[..out_dim].to_vec())
                .filter(|v| v.iter().any(|c| !c.is_zero()))
                .collect()
        };
        let piece = Polyhedron::cone(truncate(&vc.rays), truncate(&vc.lines));
        pieces.push(piece);
    }
    let nonzero: Vec<Polyhedron> = pieces
        .into_iter()
        .filter(|p| !p.rays.is_empty() || !p.lines.is_empty())
        .collect();
    if nonzero.is_empty() {
        return Ok(PolySet::zero(out_dim));
    }
    Ok(PolySet::from_pieces(out_dim, nonzero))
}

pub fn abnormal_cone(p: &ProblemSpec, x: &[Rat]) -> Result<AbnormalCone> {
    require_feasible(p, x)?;
    let grads = gradients_at(p, x)?;
    let bundle = phi_bundle(p, x)?;
    let active = p.active_inequalities(x)?;
    let g_act: Vec<Vec<Rat>> = active.iter().map(|&i| grads.g[i].clone()).collect();
    let cone = multiplier_cone(&bundle.horizon.set, &g_act, &grads.h, p.dim)?;
    Ok(AbnormalCone {
        active,
        cone,
        exact: grads.exact && bundle.horizon.exact == Exactness::Exact,
        affine: grads.affine,
    })
}

/// Re-verifies a multiplier witness: lambda >= 0 with complementarity and
/// -(sum lambda grad g + sum mu grad h) in the given cone.
pub fn verify_abnormal_witness(
    p: &ProblemSpec,
    x: &[Rat],
    cone: &PolySet,
    lam: &[Rat],
    mu: &[Rat],
) -> Result<bool> {
    if lam.iter().any(|l| l.is_negative()) {
        return Ok(false);
    }
    for (i, l) in lam.iter().enumerate() {
        if !l.is_zero() {
            let gi = p.ineq[i].eval_rat(x);
            match gi {
                Some(v) if v.is_zero() => {}
                _ => return Ok(false),
            }
        }
    }
    let grads = gradients_at(p, x)?;
    let mut w = vec![Rat::zero(); p.dim];
    for (i, l) in lam.iter().enumerate() {
        for (wc, gc) in w.iter_mut().zip(&grads.g[i]) {
            *wc += l * gc;
        }
    }
    for (j, m) in mu.iter().enumerate() {
        for (wc, hc) in w.iter_mut().zip(&grads.h[j]) {
            *wc += m * hc;
        }
    }
    let neg: Vec<Rat> = w.iter().map(|c| -c).collect();
    Ok(cone.contains_point(&neg)?.0)
}

pub fn check_nnamcq(p: &ProblemSpec, x: &[Rat]) -> Result<QualReport> {
    let ac = abnormal_cone(p, x)?;
    let regime = if ac.affine && ac.exact {
        Regime::AffineExact
    } else {
        Regime::SmoothHeuristic
    };
    if ac.active.is_empty() && p.eq.is_empty() {
        // no multipliers at all: the implication is vacuous only through the
        // horizon part, which multiplier_cone already folded in
    }
    if ac.is_trivial() {
        let verdict = if regime == Regime::AffineExact {
            Verdict::CertifiedHolds
        } else {
            Verdict::LikelyHolds
        };
        return Ok(QualReport {
            condition: Condition::Nnamcq,
            verdict,
            regime,
            certificate: json!({"abnormal_cone": "trivial"}),
            notes: vec![],
        });
    }
    let w = ac.witness().expect("nontrivial cone has a generator");
    let (lam, mu) = ac.expand(&w, p.ineq.len(), p.eq.len());
    let bundle = phi_bundle(p, x)?;
    let ok = verify_abnormal_witness(p, x, &bundle.horizon.set, &lam, &mu)?;
    let verdict = if regime == Regime::AffineExact && ok {
        Verdict::CertifiedFails
    } else {
        Verdict::LikelyFails
    };
    Ok(QualReport {
        condition: Condition::Nnamcq,
        verdict,
        regime,
        certificate: json!({
            "witness_lambda": rat_vec_str(&lam),
            "witness_mu": rat_vec_str(&mu),
            "reverified": ok,
        }),
        notes: vec![],
    })
}

// ---------------------------------------------------------------------------
// quasi-normality (horizon and coderivative variants share the machinery)

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum MuSign {
    Zero,
    Pos,
    Neg,
}

struct Pattern {
    /// subset of positions into the active list with lambda > 0
    lam_pos: Vec<bool>,
    mu_sign: Vec<MuSign>,
}

fn patterns(na: usize, m: usize) -> Option<Vec<Pattern>> {
    let count = 1usize
        .checked_shl(na as u32)?
        .checked_mul(3usize.checked_pow(m as u32)?)?;
    if count > PATTERN_BUDGET {
        return None;
    }
    let mut out = Vec::with_capacity(count);
    for imask in 0..(1usize << na) {
        let lam_pos: Vec<bool> = (0..na).map(|i| imask & (1 << i) != 0).collect();
        let mut sigma = vec![0u8; m];
        loop {
            let mu_sign: Vec<MuSign> = sigma
                .iter()
                .map(|&s| match s {
                    0 => MuSign::Zero,
                    1 => MuSign::Pos,
                    _ => MuSign::Neg,
                })
                .collect();
            let nonempty =
                lam_pos.iter().any(|&b| b) || mu_sign.iter().any(|&s| s != MuSign::Zero);
            if nonempty {
                out.push(Pattern {
                    lam_pos: lam_pos.clone(),
                    mu_sign,
                });
            }
            // base-3 increment
            let mut j = 0;
            loop {
                if j == m {
                    break;
                }
                sigma[j] += 1;
                if sigma[j] < 3 {
                    break;
                }
                sigma[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
    }
    Some(out)
}

/// LP (a): multipliers matching the pattern with membership in a piece of k.
/// Returns (lambda_active, mu) when feasible.
fn pattern_multiplier_lp(
    k: &PolySet,
    g_act: &[Vec<Rat>],
    h: &[Vec<Rat>],
    dim: usize,
    pat: &Pattern,
) -> Result<Option<(Vec<Rat>, Vec<Rat>)>> {
    let na = g_act.len();
    let m = h.len();
    let k_pieces: Vec<Polyhedron> = match &k.kind {
        SetKind::WholeSpace => vec![Polyhedron::cone(
            vec![],
            (0..dim)
                .map(|r| {
                    let mut e = vec![Rat::zero(); dim];
                    e[r] = Rat::one();
                    e
                })
                .collect(),
        )],
        SetKind::Empty => return Ok(None),
        SetKind::Union(ps) => ps.clone(),
    };
    for kp in &k_pieces {
        let nr = kp.rays.len();
        let nl = kp.lines.len();
        let nv = na + m + nr + nl;
        let mut a_le: Vec<Vec<Rat>> = Vec::new();
        let mut b_le: Vec<Rat> = Vec::new();
        let mut a_eq: Vec<Vec<Rat>> = Vec::new();
        let mut b_eq: Vec<Rat> = Vec::new();
        for r in 0..dim {
            let mut row = Vec::with_capacity(nv);
            for gi in g_act {
                row.push(gi[r].clone());
            }
            for hj in h {
                row.push(hj[r].clone());
            }
            for ray in &kp.rays {
                row.push(ray[r].clone());
            }
            for line in &kp.lines {
                row.push(line[r].clone());
            }
            a_eq.push(row);
            b_eq.push(Rat::zero());
        }
        for (i, &pos) in pat.lam_pos.iter().enumerate() {
            let mut row = vec![Rat::zero(); nv];
            row[i] = -Rat::one();
            if pos {
                a_le.push(row);
                b_le.push(-Rat::one()); // lambda_i >= 1
            } else {
                a_eq.push(row);
                b_eq.push(Rat::zero()); // lambda_i = 0
            }
        }
        for (j, &s) in pat.mu_sign.iter().enumerate() {
            let mut row = vec![Rat::zero(); nv];
            row[na + j] = Rat::one();
            match s {
                MuSign::Zero => {
                    a_eq.push(row);
                    b_eq.push(Rat::zero());
                }
                MuSign::Pos => {
                    for c in row.iter_mut() {
                        *c = -c.clone();
                    }
                    a_le.push(row);
                    b_le.push(-Rat::one()); // mu_j >= 1
                }
                MuSign::Neg => {
                    a_le.push(row);
                    b_le.push(-Rat::one()); // mu_j <= -1
                }
            }
        }
        for k in 0..nr {
            let mut row = vec![Rat::zero(); nv];
            row[na + m + k] = -Rat::one();
            a_le.push(row);
            b_le.push(Rat::zero());
        }
        let lp = Lp::feasibility(nv, a_le, b_le, a_eq, b_eq);
        if let LpOutcome::Optimal { x: w, .. } = lp.solve()? {
            let lam = w[..na].to_vec();
            let mu = w[na..na + m].to_vec();
            return Ok(Some((lam, mu)));
        }
    }
    Ok(None)
}

/// LP (b): common ascent direction for the pattern (affine-exact regime).
fn pattern_direction_lp(
    g_act: &[Vec<Rat>],
    h: &[Vec<Rat>],
    dim: usize,
    pat: &Pattern,
) -> Result<Option<Vec<Rat>>> {
    let mut a_le = Vec::new();
    let mut b_le = Vec::new();
    for (i, &pos) in pat.lam_pos.iter().enumerate() {
        if pos {
            a_le.push(g_act[i].iter().map(|c| -c).collect());
            b_le.push(-Rat::one()); // grad g_i . d >= 1
        }
    }
    for (j, &s) in pat.mu_sign.iter().enumerate() {
        match s {
            MuSign::Zero => {}
            MuSign::Pos => {
                a_le.push(h[j].iter().map(|c| -c).collect());
                b_le.push(-Rat::one());
            }
            MuSign::Neg => {
                a_le.push(h[j].clone());
                b_le.push(-Rat::one());
            }
        }
    }
    if a_le.is_empty() {
        return Ok(None);
    }
    let lp = Lp::feasibility(dim, a_le, b_le, vec![], vec![]);
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Ok(Some(x)),
        _ => Ok(None),
    }
}

/// Witness ladder x + dir/2^k, k = 1..8, verified by exact evaluation of the
/// strict sign conditions.
fn affine_ladder(
    p: &ProblemSpec,
    x: &[Rat],
    dir: &[Rat],
    active: &[usize],
    pat: &Pattern,
) -> Result<Option<Vec<Vec<Rat>>>> {
    let mut ladder = Vec::new();
    for k in 1..=8u32 {
        let scale = crate::rational::rat(1, 1 << k);
        let xk: Vec<Rat> = x
            .iter()
            .zip(dir)
            .map(|(xc, dc)| xc + &scale * dc)
            .collect();
        for (pos_i, &i) in active.iter().enumerate() {
            if pat.lam_pos[pos_i] {
                let v = p.ineq[i]
                    .eval_rat(&xk)
                    .ok_or_else(|| NlqualError::Eval("exact evaluation expected".into()))?;
                if !v.is_positive() {
                    return Ok(None);
                }
            }
        }
        for (j, &s) in pat.mu_sign.iter().enumerate() {
            let v = p.eq[j]
                .eval_rat(&xk)
                .ok_or_else(|| NlqualError::Eval("exact evaluation expected".into()))?;
            match s {
                MuSign::Zero => {}
                MuSign::Pos => {
                    if !v.is_positive() {
                        return Ok(None);
                    }
                }
                MuSign::Neg => {
                    if !v.is_negative() {
                        return Ok(None);
                    }
                }
            }
        }
        ladder.push(xk);
    }
    Ok(Some(ladder))
}

fn sample_sphere(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|c| c / n * radius).collect();
        }
    }
}

/// Randomized search for one ladder point at the given radius satisfying the
/// strict sign conditions (float evaluation).
fn heuristic_ladder(
    p: &ProblemSpec,
    x: &[Rat],
    active: &[usize],
    pat: &Pattern,
    opts: &QualOptions,
) -> Result<Option<Vec<Vec<f64>>>> {
    let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ladder = Vec::new();
    for &r in &opts.radii {
        let mut found = None;
        'samples: for _ in 0..opts.samples {
            let step = sample_sphere(&mut rng, p.dim, r);
            let y: Vec<f64> = xf.iter().zip(&step).map(|(a, b)| a + b).collect();
            for (pos_i, &i) in active.iter().enumerate() {
                if pat.lam_pos[pos_i] && p.ineq[i].eval_f64(&y)? <= 0.0 {
                    continue 'samples;
                }
            }
            for (j, &s) in pat.mu_sign.iter().enumerate() {
                let v = p.eq[j].eval_f64(&y)?;
                let ok = match s {
                    MuSign::Zero => true,
                    MuSign::Pos => v > 0.0,
                    MuSign::Neg => v < 0.0,
                };
                if !ok {
                    continue 'samples;
                }
            }
            found = Some(y);
            break;
        }
        match found {
            Some(y) => ladder.push(y),
            None => return Ok(None),
        }
    }
    Ok(Some(ladder))
}

fn quasinormality_with_cone(
    p: &ProblemSpec,
    x: &[Rat],
    cone: &SetField,
    condition: Condition,
    opts: &QualOptions,
) -> Result<QualReport> {
    require_feasible(p, x)?;
    let grads = gradients_at(p, x)?;
    let active = p.active_inequalities(x)?;
    let g_act: Vec<Vec<Rat>> = active.iter().map(|&i| grads.g[i].clone()).collect();
    let na = g_act.len();
    let m = grads.h.len();
    let affine_exact = grads.affine && grads.exact && cone.exact == Exactness::Exact;
    let regime = if affine_exact {
        Regime::AffineExact
    } else {
        Regime::SmoothHeuristic
    };

    let pats = match patterns(na, m) {
        Some(ps) => ps,
        None => {
            return Ok(QualReport {
                condition,
                verdict: Verdict::Unknown,
                regime,
                certificate: json!({"reason": "pattern budget exceeded"}),
                notes: vec![format!(
                    "more than {PATTERN_BUDGET} support patterns; no exhaustive check"
                )],
            })
        }
    };

    let mut any_multiplier_pattern = false;
    for pat in &pats {
        let Some((lam_a, mu)) = pattern_multiplier_lp(&cone.set, &g_act, &grads.h, p.dim, pat)?
        else {
            continue;
        };
        any_multiplier_pattern = true;
        if affine_exact {
            if let Some(dir) = pattern_direction_lp(&g_act, &grads.h, p.dim, pat)? {
                if let Some(ladder) = affine_ladder(p, x, &dir, &active, pat)? {
                    let mut lam = vec![Rat::zero(); p.ineq.len()];
                    for (k, &i) in active.iter().enumerate() {
                        lam[i] = lam_a[k].clone();
                    }
                    let ok = verify_abnormal_witness(p, x, &cone.set, &lam, &mu)?;
                    return Ok(QualReport {
                        condition,
                        verdict: Verdict::CertifiedFails,
                        regime,
                        certificate: json!({
                            "witness_lambda": rat_vec_str(&lam),
                            "witness_mu": rat_vec_str(&mu),
                            "direction": rat_vec_str(&dir),
                            "ladder": ladder.iter().map(|p| rat_vec_str(p)).collect::<Vec<_>>(),
                            "reverified": ok,
                        }),
                        notes: vec![],
                    });
                }
            }
        } else if let Some(ladder) = heuristic_ladder(p, x, &active, pat, opts)? {
            let mut lam = vec![Rat::zero(); p.ineq.len()];
            for (k, &i) in active.iter().enumerate() {
                lam[i] = lam_a[k].clone();
            }
            return Ok(QualReport {
                condition,
                verdict: Verdict::LikelyFails,
                regime,
                certificate: json!({
                    "witness_lambda": rat_vec_str(&lam),
                    "witness_mu": rat_vec_str(&mu),
                    "ladder": ladder,
                    "radii": opts.radii,
                }),
                notes: vec![],
            });
        }
    }

    let verdict = if affine_exact {
        Verdict::CertifiedHolds
    } else {
        Verdict::LikelyHolds
    };
    Ok(QualReport {
        condition,
        verdict,
        regime,
        certificate: json!({
            "patterns_checked": pats.len(),
            "multiplier_feasible_patterns": any_multiplier_pattern,
        }),
        notes: if any_multiplier_pattern && !affine_exact {
            vec!["abnormal multipliers exist but no witness ladder was found".into()]
        } else {
            vec![]
        },
    })
}

pub fn check_quasinormality_horizon(
    p: &ProblemSpec,
    x: &[Rat],
    opts: &QualOptions,
) -> Result<QualReport> {
    let bundle = phi_bundle(p, x)?;
    quasinormality_with_cone(p, x, &bundle.horizon, Condition::QnHorizon, opts)
}

/// Standard quasi-normality: the horizon term drops to the normal cone of
/// Omega alone (trivial when Omega is the whole space).
pub fn check_standard_quasinormality(
    p: &ProblemSpec,
    x: &[Rat],
    opts: &QualOptions,
) -> Result<QualReport> {
    let nc = normal_cone_omega(&p.omega, p.dim, x)?;
    let field = SetField {
        set: nc.outer.clone(),
        exact: if nc.exact {
            Exactness::Exact
        } else {
            Exactness::OuterEstimate
        },
    };
    quasinormality_with_cone(p, x, &field, Condition::StandardQn, opts)
}

pub fn check_quasinormality_coderiv(
    p: &ProblemSpec,
    x: &[Rat],
    opts: &QualOptions,
) -> Result<QualReport> {
    let bundle = phi_bundle(p, x)?;
    let nc = normal_cone_omega(&p.omega, p.dim, x)?;
    if !nc.exact {
        // bracket the normal cone; verdicts must agree or the answer is UNKNOWN
        let lo = SetField {
            set: bundle.coderiv0.set.minkowski_sum(&nc.inner)?,
            exact: Exactness::OuterEstimate,
        };
        let hi = SetField {
            set: bundle.coderiv0.set.minkowski_sum(&nc.outer)?,
            exact: Exactness::OuterEstimate,
        };
        let r_lo = quasinormality_with_cone(p, x, &lo, Condition::QnCoderiv, opts)?;
        let r_hi = quasinormality_with_cone(p, x, &hi, Condition::QnCoderiv, opts)?;
        if r_lo.verdict.holds() != r_hi.verdict.holds() {
            return Ok(QualReport {
                condition: Condition::QnCoderiv,
                verdict: Verdict::Unknown,
                regime: Regime::SmoothHeuristic,
                certificate: json!({"reason": "normal-cone estimates disagree"}),
                notes: vec!["Omega union pieces overlap at the query point".into()],
            });
        }
        return Ok(r_hi);
    }
    let field = SetField {
        set: bundle.coderiv0.set.minkowski_sum(&nc.outer)?,
        exact: bundle.coderiv0.exact,
    };
    quasinormality_with_cone(p, x, &field, Condition::QnCoderiv, opts)
}

// ---------------------------------------------------------------------------
// RCPLD

fn probe_points(
    x: &[f64],
    delta: f64,
    probes: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let dim = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1e995);
    let mut out = Vec::new();
    // deterministic axis probes first
    for k in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut y = x.to_vec();
            y[k] += sgn * delta / 2.0;
            out.push(y);
        }
    }
    while out.len() < probes + 2 * dim {
        let scale = delta * rng.gen_range(0.1..1.0);
        let step = sample_sphere(&mut rng, dim, scale);
        out.push(x.iter().zip(&step).map(|(a, b)| a + b).collect());
    }
    out
}

fn rcpld_with_cone(
    p: &ProblemSpec,
    x: &[Rat],
    cone: &SetField,
    condition: Condition,
    opts: &QualOptions,
) -> Result<QualReport> {
    require_feasible(p, x)?;
    let grads = gradients_at(p, x)?;
    let active = p.active_inequalities(x)?;
    let g_act: Vec<Vec<Rat>> = active.iter().map(|&i| grads.g[i].clone()).collect();
    let na = g_act.len();
    let affine_exact = grads.affine && grads.exact && cone.exact == Exactness::Exact;
    let regime = if affine_exact {
        Regime::AffineExact
    } else {
        Regime::SmoothHeuristic
    };
    let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();

    // equality-gradient basis at x
    let basis = exact_basis_subset(&grads.h);
    let rank_x = basis.len();

    // rank constancy of the h-Jacobian near x
    if !grads.affine {
        for y in probe_points(&xf, opts.delta, opts.probes, opts.seed) {
            let rows: Vec<Vec<f64>> = p
                .eq
                .iter()
                .map(|h| h.grad_f64(&y))
                .collect::<Result<Vec<_>>>()?;
            if float_rank(&rows, 1e-9) != rank_x {
                return Ok(QualReport {
                    condition,
                    verdict: Verdict::LikelyFails,
                    regime,
                    certificate: json!({
                        "reason": "rank drift of the equality Jacobian",
                        "probe": y,
                    }),
                    notes: vec![],
                });
            }
        }
    }

    if 1usize.checked_shl(na as u32).map(|c| c > PATTERN_BUDGET) != Some(false) {
        return Ok(QualReport {
            condition,
            verdict: Verdict::Unknown,
            regime,
            certificate: json!({"reason": "pattern budget exceeded"}),
            notes: vec![],
        });
    }

    let h_basis: Vec<Vec<Rat>> = basis.iter().map(|&j| grads.h[j].clone()).collect();
    for imask in 0..(1usize << na) {
        let sel: Vec<usize> = (0..na).filter(|i| imask & (1 << i) != 0).collect();
        let g_sel: Vec<Vec<Rat>> = sel.iter().map(|&i| g_act[i].clone()).collect();
        // multiplier feasibility (normalized so (lambda, mu) != 0)
        let Some((lam_sel, mu_b)) =
            rcpld_multiplier_witness(&cone.set, &g_sel, &h_basis, p.dim)?
        else {
            continue;
        };
        // dependence of the selected gradient family near x
        let fam: Vec<Vec<Rat>> = g_sel.iter().chain(h_basis.iter()).cloned().collect();
        if grads.affine {
            if exact_rank(&fam) < fam.len() {
                continue; // dependent everywhere: pattern consistent with RCPLD
            }
            let mut lam = vec![Rat::zero(); p.ineq.len()];
            for (k, &pos) in sel.iter().enumerate() {
                lam[active[pos]] = lam_sel[k].clone();
            }
            let mut mu = vec![Rat::zero(); p.eq.len()];
            for (k, &j) in basis.iter().enumerate() {
                mu[j] = mu_b[k].clone();
            }
            return Ok(QualReport {
                condition,
                verdict: if affine_exact {
                    Verdict::CertifiedFails
                } else {
                    Verdict::LikelyFails
                },
                regime,
                certificate: json!({
                    "witness_lambda": rat_vec_str(&lam),
                    "witness_mu": rat_vec_str(&mu),
                    "independent_family": "constant gradients are linearly independent",
                }),
                notes: vec![],
            });
        }
        // smooth data: hunt for a probe point with independent gradients
        for y in probe_points(&xf, opts.delta, opts.probes, opts.seed) {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for &i in &sel {
                rows.push(p.ineq[active[i]].grad_f64(&y)?);
            }
            for &j in &basis {
                rows.push(p.eq[j].grad_f64(&y)?);
            }
            if float_rank(&rows, 1e-9) == rows.len() {
                let mut lam = vec![Rat::zero(); p.ineq.len()];
                for (k, &pos) in sel.iter().enumerate() {
                    lam[active[pos]] = lam_sel[k].clone();
                }
                let mut mu = vec![Rat::zero(); p.eq.len()];
                for (k, &j) in basis.iter().enumerate() {
                    mu[j] = mu_b[k].clone();
                }
                return Ok(QualReport {
                    condition,
                    verdict: Verdict::LikelyFails,
                    regime,
                    certificate: json!({
                        "witness_lambda": rat_vec_str(&lam),
                        "witness_mu": rat_vec_str(&mu),
                        "independent_probe": y,
                    }),
                    notes: vec![],
                });
            }
        }
    }

    Ok(QualReport {
        condition,
        verdict: if affine_exact {
            Verdict::CertifiedHolds
        } else {
            Verdict::LikelyHolds
        },
        regime,
        certificate: json!({
            "equality_basis": basis,
            "rank": rank_x,
        }),
        notes: vec![],
    })
}

/// Nonzero multipliers for an RCPLD pattern: a generator of the solution cone
/// in (lambda_sel, mu_basis) space. A generator is nonzero by construction, so
/// no float or normalization artifact can smuggle in a zero witness.
fn rcpld_multiplier_witness(
    k: &PolySet,
    g_sel: &[Vec<Rat>],
    h_basis: &[Vec<Rat>],
    dim: usize,
) -> Result<Option<(Vec<Rat>, Vec<Rat>)>> {
    let na = g_sel.len();
    let m = h_basis.len();
    if na + m == 0 {
        return Ok(None);
    }
    let cone = multiplier_cone(k, g_sel, h_basis, dim)?;
    for piece in cone.pieces() {
        if let Some(gen) = piece.rays.first().or(piece.lines.first()) {
            let lam = gen[..na].to_vec();
            let mu = gen[na..na + m].to_vec();
            return Ok(Some((lam, mu)));
        }
    }
    Ok(None)
}

pub fn check_rcpld_horizon(p: &ProblemSpec, x: &[Rat], opts: &QualOptions) -> Result<QualReport> {
    let bundle = phi_bundle(p, x)?;
    rcpld_with_cone(p, x, &bundle.horizon, Condition::RcpldHorizon, opts)
}

pub fn check_standard_rcpld(p: &ProblemSpec, x: &[Rat], opts: &QualOptions) -> Result<QualReport> {
    let nc = normal_cone_omega(&p.omega, p.dim, x)?;
    let field = SetField {
        set: nc.outer.clone(),
        exact: if nc.exact {
            Exactness::Exact
        } else {
            Exactness::OuterEstimate
        },
    };
    rcpld_with_cone(p, x, &field, Condition::StandardRcpld, opts)
}

// ---------------------------------------------------------------------------
// BQ (12), condition (13), implication (28)

/// Exact normal cone of the (polyhedral) constraint region at x.
fn region_normal_cone(p: &ProblemSpec, x: &[Rat]) -> Result<PolySet> {
    let grads = gradients_at(p, x)?;
    if !grads.affine {
        return Err(NlqualError::Unsupported(
            "region normal cone needs affine constraints".into(),
        ));
    }
    if p.omega.pieces().len() > 1 {
        return Err(NlqualError::Unsupported(
            "region normal cone needs a single polyhedral Omega".into(),
        ));
    }
    let active = p.active_inequalities(x)?;
    let mut rays: Vec<Vec<Rat>> = active.iter().map(|&i| grads.g[i].clone()).collect();
    let lines: Vec<Vec<Rat>> = grads.h.clone();
    if let Some(piece) = p.omega.pieces().first() {
        if !piece.contains_rat(x) {
            return Err(NlqualError::Domain("x outside Omega".into()));
        }
        for i in piece.active_rows(x) {
            rays.push(piece.a[i].clone());
        }
    }
    if rays.is_empty() && lines.is_empty() {
        return Ok(PolySet::zero(p.dim));
    }
    Ok(PolySet::from_piece(p.dim, Polyhedron::cone(rays, lines)))
}

fn bq_like(
    p: &ProblemSpec,
    x: &[Rat],
    left: &SetField,
    condition: Condition,
) -> Result<QualReport> {
    require_feasible(p, x)?;
    let nf = match region_normal_cone(p, x) {
        Ok(c) => c,
        Err(NlqualError::Unsupported(msg)) => {
            return Ok(QualReport {
                condition,
                verdict: Verdict::Unknown,
                regime: Regime::SmoothHeuristic,
                certificate: json!({"reason": msg}),
                notes: vec![
                    "nonlinear constraints or Omega unions are out of scope here; \
                     quasi-normality implies this condition when it holds"
                        .into(),
                ],
            })
        }
        Err(e) => return Err(e),
    };
    let neg = left.set.negate();
    let (trivial, witness) = neg.cone_intersection_trivial(&nf)?;
    let certified = left.exact == Exactness::Exact;
    let verdict = match (trivial, certified) {
        (true, true) => Verdict::CertifiedHolds,
        (true, false) => Verdict::LikelyHolds,
        (false, true) => Verdict::CertifiedFails,
        (false, false) => Verdict::LikelyFails,
    };
    Ok(QualReport {
        condition,
        verdict,
        regime: if certified {
            Regime::AffineExact
        } else {
            Regime::SmoothHeuristic
        },
        certificate: match witness {
            Some(w) => json!({"intersection_witness": rat_vec_str(&w)}),
            None => json!({"intersection": "trivial"}),
        },
        notes: vec![],
    })
}

pub fn check_bq(p: &ProblemSpec, x: &[Rat]) -> Result<QualReport> {
    let bundle = phi_bundle(p, x)?;
    bq_like(p, x, &bundle.horizon, Condition::Bq)
}

pub fn check_cond13(p: &ProblemSpec, x: &[Rat]) -> Result<QualReport> {
    let bundle = phi_bundle(p, x)?;
    bq_like(p, x, &bundle.coderiv0, Condition::Cond13)
}

pub fn check_implication28(p: &ProblemSpec, x: &[Rat]) -> Result<QualReport> {
    let grads = gradients_at(p, x)?;
    if !grads.affine {
        return Err(NlqualError::Unsupported(
            "implication (over linear constraints) needs affine g, h".into(),
        ));
    }
    let ac = abnormal_cone(p, x)?;
    let n = p.ineq.len();
    let m = p.eq.len();
    // each generator (lambda, mu) must satisfy sum lambda grad g + sum mu grad h = 0
    let mut bad: Option<Vec<Rat>> = None;
    'outer: for piece in ac.cone.pieces() {
        for gen in piece.rays.iter().chain(piece.lines.iter()) {
            let (lam, mu) = ac.expand(gen, n, m);
            let mut s = vec![Rat::zero(); p.dim];
            for (i, l) in lam.iter().enumerate() {
                for (sc, gc) in s.iter_mut().zip(&grads.g[i]) {
                    *sc += l * gc;
                }
            }
            for (j, mv) in mu.iter().enumerate() {
                for (sc, hc) in s.iter_mut().zip(&grads.h[j]) {
                    *sc += mv * hc;
                }
            }
            if s.iter().any(|c| !c.is_zero()) {
                bad = Some(gen.clone());
                break 'outer;
            }
        }
    }
    let certified = ac.exact;
    let verdict = match (&bad, certified) {
        (None, true) => Verdict::CertifiedHolds,
        (None, false) => Verdict::LikelyHolds,
        (Some(_), true) => Verdict::CertifiedFails,
        (Some(_), false) => Verdict::LikelyFails,
    };
    Ok(QualReport {
        condition: Condition::Implication28,
        verdict,
        regime: if certified {
            Regime::AffineExact
        } else {
            Regime::SmoothHeuristic
        },
        certificate: match bad {
            Some(w) => json!({"violating_generator": rat_vec_str(&w)}),
            None => json!({"generators": "all satisfy the zero-sum condition"}),
        },
        notes: vec![],
    })
}

// ---------------------------------------------------------------------------
// local persistence probe

#[derive(Debug, Clone, serde::Serialize)]
pub struct PersistenceReport {
    pub condition: Condition,
    pub radius: f64,
    pub points_tested: usize,
    pub failures: Vec<Value>,
    pub consistent: bool,
}

/// Re-runs a checker at feasible sampled points near x. A failure indicates
/// either an engine bug or a radius beyond the persistence neighborhood; it is
/// reported, never swallowed.
pub fn persistence_probe(
    p: &ProblemSpec,
    x: &[Rat],
    condition: Condition,
    radius: f64,
    samples: usize,
    seed: u64,
    opts: &QualOptions,
) -> Result<PersistenceReport> {
    require_feasible(p, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // sample tangentially to the affine equalities so that samples stay feasible
    let eq_rows: Vec<Vec<Rat>> = p
        .eq
        .iter()
        .filter_map(|h| match h {
            ScalarFn::Affine { a, .. } => Some(a.clone()),
            ScalarFn::Smooth { .. } => None,
        })
        .collect();
    let null_basis = rational_null_space(&eq_rows, p.dim);
    let mut failures = Vec::new();
    let mut tested = 0;
    let mut tries = 0;
    while tested < samples && tries < samples * 20 {
        tries += 1;
        if radius == 0.0 {
            break;
        }
        let coeffs: Vec<f64> = (0..null_basis.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let mut y: Vec<Rat> = x.to_vec();
        for (c, b) in coeffs.iter().zip(&null_basis) {
            let cr = rat_from_f64(c * radius);
            for (yc, bc) in y.iter_mut().zip(b) {
                *yc += &cr * bc;
            }
        }
        if !p.check_feasible(&y, 1e-9)?.feasible {
            continue;
        }
        tested += 1;
        let report = match condition {
            Condition::QnHorizon => check_quasinormality_horizon(p, &y, opts)?,
            Condition::QnCoderiv => check_quasinormality_coderiv(p, &y, opts)?,
            Condition::RcpldHorizon => check_rcpld_horizon(p, &y, opts)?,
            Condition::Nnamcq => check_nnamcq(p, &y)?,
            other => {
                return Err(NlqualError::Unsupported(format!(
                    "persistence probe not defined for {other:?}"
                )))
            }
        };
        if !report.verdict.holds() {
            failures.push(json!({
                "point": rat_vec_str(&y),
                "verdict": report.verdict,
            }));
        }
    }
    Ok(PersistenceReport {
        condition,
        radius,
        points_tested: tested,
        consistent: failures.is_empty(),
        failures,
    })
}

/// Rational null-space basis of the row space (kernel vectors).
fn rational_null_space(rows: &[Vec<Rat>], dim: usize) -> Vec<Vec<Rat>> {
    if rows.is_empty() {
        return (0..dim)
            .map(|k| {
                let mut e = vec![Rat::zero(); dim];
                e[k] = Rat::one();
                e
            })
            .collect();
    }
    // reduced row echelon form
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for col in 0..dim {
        if let Some(pr) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) {
            m.swap(rank, pr);
            let piv = m[rank][col].clone();
            for c in 0..dim {
                m[rank][c] = &m[rank][c] / &piv;
            }
            for r in 0..m.len() {
                if r != rank && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in 0..dim {
                        m[r][c] = &m[r][c] - &f * &m[rank][c];
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
    }
    let mut basis = Vec::new();
    for free in 0..dim {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![Rat::zero(); dim];
        v[free] = Rat::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_problem;
    use crate::setalg::lp::dot;
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
    fn example1_abnormal_cone_is_the_expected_ray() {
        let p = load("example1");
        let ac = abnormal_cone(&p, &rv(&[1, 0, 1, 0])).unwrap();
        assert!(ac.exact && ac.affine);
        assert!(!ac.is_trivial());
        // cone = ray through (1,-1,-1) in (lambda, mu1, mu2)
        let expected = PolySet::from_piece(
            3,
            Polyhedron::cone(vec![rv(&[1, -1, -1])], vec![]),
        );
        assert!(ac.cone.set_equal(&expected).unwrap());
    }

    #[test]
    fn example1_nnamcq_certified_fails() {
        let p = load("example1");
        let r = check_nnamcq(&p, &rv(&[1, 0, 1, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedFails);
        assert_eq!(r.regime, Regime::AffineExact);
        assert_eq!(r.certificate["reverified"], true);
    }

    #[test]
    fn unconstrained_nnamcq_holds() {
        let p = parse_problem(r#"{"dim":2,"smooth":"x1^2"}"#).unwrap();
        let r = check_nnamcq(&p, &rv(&[0, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn example2_nnamcq_fails() {
        let p = load("example2");
        let r = check_nnamcq(&p, &rv(&[1, 0, 0])).unwrap();
        assert!(matches!(
            r.verdict,
            Verdict::CertifiedFails | Verdict::LikelyFails
        ));
    }

    #[test]
    fn example1_quasinormality_certified_holds() {
        let p = load("example1");
        let r =
            check_quasinormality_horizon(&p, &rv(&[1, 0, 1, 0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
        assert_eq!(r.regime, Regime::AffineExact);
    }

    #[test]
    fn example2_quasinormality_likely_holds() {
        let p = load("example2");
        let r =
            check_quasinormality_horizon(&p, &rv(&[1, 0, 0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::LikelyHolds);
        assert_eq!(r.regime, Regime::SmoothHeuristic);
    }

    #[test]
    fn constructed_instance_quasinormality_fails_with_ladder() {
        // min sqrt(|x1|) s.t. -x1 <= 0 at 0: lambda = 1 with horizon R solves
        // the inclusion and dir = 1 gives -g = x1 > 0 along the ladder
        let src = r#"{"dim":1,
            "phi":[{"outer":{"kind":"pow_abs","p":"1/2"},
                    "inner":{"kind":"affine","a":["1"],"b":"0"}}],
            "ineq":[{"kind":"affine","a":["-1"],"b":"0"}]}"#;
        let p = parse_problem(src).unwrap();
        let r = check_quasinormality_horizon(&p, &rv(&[0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedFails);
        assert!(r.certificate["ladder"].as_array().unwrap().len() == 8);
    }

    #[test]
    fn example1_rcpld_certified_holds() {
        let p = load("example1");
        let r = check_rcpld_horizon(&p, &rv(&[1, 0, 1, 0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn example2_rcpld_likely_fails() {
        let p = load("example2");
        let r = check_rcpld_horizon(&p, &rv(&[1, 0, 0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::LikelyFails);
        assert!(r.certificate["independent_probe"].is_array());
    }

    #[test]
    fn example1_dstar_quasinormality_holds() {
        let p = load("example1");
        let r =
            check_quasinormality_coderiv(&p, &rv(&[1, 0, 1, 0]), &QualOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn example3_all_conditions_hold() {
        let p = load("example3");
        let x = rv(&[0]);
        let opts = QualOptions::default();
        assert_eq!(
            check_quasinormality_coderiv(&p, &x, &opts).unwrap().verdict,
            Verdict::CertifiedHolds
        );
        assert_eq!(
            check_quasinormality_horizon(&p, &x, &opts).unwrap().verdict,
            Verdict::CertifiedHolds
        );
        assert_eq!(check_bq(&p, &x).unwrap().verdict, Verdict::CertifiedHolds);
        assert_eq!(
            check_cond13(&p, &x).unwrap().verdict,
            Verdict::CertifiedHolds
        );
    }

    #[test]
    fn example1_bq_certified_holds() {
        let p = load("example1");
        let r = check_bq(&p, &rv(&[1, 0, 1, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn lipschitz_phi_bq_trivially_holds() {
        let src = r#"{"dim":2,
            "phi":[{"outer":{"kind":"linear","c":"2"},
                    "inner":{"kind":"affine","a":["1","1"],"b":"0"}}],
            "ineq":[{"kind":"affine","a":["1","0"],"b":"0"}]}"#;
        let p = parse_problem(src).unwrap();
        let r = check_bq(&p, &rv(&[0, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn example4_implication_holds() {
        let p = load("example4");
        let r = check_implication28(&p, &rv(&[1, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn example1_implication_holds_on_the_ray() {
        let p = load("example1");
        let r = check_implication28(&p, &rv(&[1, 0, 1, 0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedHolds);
    }

    #[test]
    fn implication_fails_when_gradient_sum_is_nonzero() {
        // min sqrt(|x1|) over x1 <= 0 (1-D): abnormal ray lambda = 1 with
        // gradient sum -1 != 0 breaks the implication
        let src = r#"{"dim":1,
            "phi":[{"outer":{"kind":"pow_abs","p":"1/2"},
                    "inner":{"kind":"affine","a":["1"],"b":"0"}}],
            "ineq":[{"kind":"affine","a":["-1"],"b":"0"}]}"#;
        let p = parse_problem(src).unwrap();
        let r = check_implication28(&p, &rv(&[0])).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedFails);
    }

    #[test]
    fn prop3_cross_check_examples() {
        // QN_HORIZON == standard-QN && BQ in the affine regime (Example 1),
        // and RCPLD_HORIZON == standard-RCPLD && BQ
        let p = load("example1");
        let x = rv(&[1, 0, 1, 0]);
        let opts = QualOptions::default();
        let qn = check_quasinormality_horizon(&p, &x, &opts).unwrap();
        let sqn = check_standard_quasinormality(&p, &x, &opts).unwrap();
        let bq = check_bq(&p, &x).unwrap();
        assert_eq!(
            qn.verdict.holds(),
            sqn.verdict.holds() && bq.verdict.holds()
        );
        let rc = check_rcpld_horizon(&p, &x, &opts).unwrap();
        let src = check_standard_rcpld(&p, &x, &opts).unwrap();
        assert_eq!(
            rc.verdict.holds(),
            src.verdict.holds() && bq.verdict.holds()
        );
    }

    #[test]
    fn equality_scaling_keeps_verdicts() {
        let p = load("example1");
        let mut scaled = p.clone();
        // multiply h1 by 3/2
        if let ScalarFn::Affine { a, b } = &mut scaled.eq[0] {
            for c in a.iter_mut() {
                *c *= crate::rational::rat(3, 2);
            }
            *b *= crate::rational::rat(3, 2);
        }
        let x = rv(&[1, 0, 1, 0]);
        let opts = QualOptions::default();
        for (r1, r2) in [
            (
                check_nnamcq(&p, &x).unwrap(),
                check_nnamcq(&scaled, &x).unwrap(),
            ),
            (
                check_quasinormality_horizon(&p, &x, &opts).unwrap(),
                check_quasinormality_horizon(&scaled, &x, &opts).unwrap(),
            ),
            (
                check_rcpld_horizon(&p, &x, &opts).unwrap(),
                check_rcpld_horizon(&scaled, &x, &opts).unwrap(),
            ),
        ] {
            assert_eq!(r1.verdict, r2.verdict);
        }
    }

    #[test]
    fn persistence_example1_qn() {
        let p = load("example1");
        let r = persistence_probe(
            &p,
            &rv(&[1, 0, 1, 0]),
            Condition::QnHorizon,
            1e-3,
            16,
            7,
            &QualOptions::default(),
        )
        .unwrap();
        assert!(r.consistent, "failures: {:?}", r.failures);
        assert!(r.points_tested > 0);
    }

    #[test]
    fn persistence_radius_zero_is_trivial() {
        let p = load("example1");
        let r = persistence_probe(
            &p,
            &rv(&[1, 0, 1, 0]),
            Condition::QnHorizon,
            0.0,
            4,
            7,
            &QualOptions::default(),
        )
        .unwrap();
        assert!(r.consistent);
    }

    #[test]
    fn null_space_basis() {
        let rows = vec![rv(&[1, 1, 0, 0]), rv(&[0, 0, 1, 1])];
        let basis = rational_null_space(&rows, 4);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!(dot(&rows[0], b).is_zero());
            assert!(dot(&rows[1], b).is_zero());
        }
    }
}
