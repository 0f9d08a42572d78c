//! Proximal-gradient solver for penalized problems with separable power
//! composites. Desk scale: dense, deterministic, multistart.

use crate::error::{NlqualError, Result};
use crate::model::{NormKind, OuterFn, ProblemSpec, ScalarFn};
use crate::penalty::PenaltyProblem;
use crate::rational::{rat_to_f64, Rat};
use crate::setalg::PolySet;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub enum StepRule {
    Fixed(f64),
    /// halve on insufficient decrease
    Backtracking { beta: f64, c: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step: StepRule,
    pub max_iters: usize,
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: StepRule::Backtracking {
                beta: 0.5,
                c: 1e-4,
            },
            max_iters: 5000,
            tol: 1e-8,
            starts: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// objective after each accepted step of the winning start
    pub trace: Vec<f64>,
}

// ---------------------------------------------------------------------------
// scalar prox of lam * |t|^p

fn pow_objective(t: f64, v: f64, lam: f64, p: f64) -> f64 {
    0.5 * (t - v) * (t - v) + lam * t.abs().powf(p)
}

/// Largest real root of 2u^3 - 2vu + lam = 0 with u > 0 (half-thresholding
/// stationarity in u = sqrt(t)), if any.
fn half_threshold_root(v: f64, lam: f64) -> Option<f64> {
    // u^3 + a1 u + a0 with a1 = -v, a0 = lam/2
    let a1 = -v;
    let a0 = lam / 2.0;
    let disc = -(4.0 * a1 * a1 * a1 + 27.0 * a0 * a0);
    if disc <= 0.0 {
        return None; // single real root, negative for lam > 0
    }
    // three real roots: trigonometric form
    let m = 2.0 * (-a1 / 3.0).sqrt();
    let theta = (3.0 * a0 / (a1 * m)).acos() / 3.0;
    let u = m * theta.cos(); // largest root
    if u > 0.0 {
        Some(u * u)
    } else {
        None
    }
}

/// Global minimizer of (1/2)(t - v)^2 + lam |t|^p for p in (0, 1]; ties with
/// the origin resolve to 0.
pub fn prox_pow_abs(p: &Rat, lam: f64, v: f64) -> Result<f64> {
    let pf = p.to_f64().ok_or_else(|| NlqualError::Eval("bad exponent".into()))?;
    if !(0.0 < pf && pf <= 1.0) {
        return Err(NlqualError::Domain("prox exponent must lie in (0, 1]".into()));
    }
    if lam < 0.0 {
        return Err(NlqualError::Domain("prox weight must be nonnegative".into()));
    }
    if lam == 0.0 {
        return Ok(v);
    }
    if pf == 1.0 {
        return Ok(v.signum() * (v.abs() - lam).max(0.0));
    }
    let (sign, w) = (v.signum(), v.abs());
    if w == 0.0 {
        return Ok(0.0);
    }
    let candidate = if (pf - 0.5).abs() < 1e-15 {
        half_threshold_root(w, lam)
    } else {
        positive_branch_root(w, lam, pf)
    };
    match candidate {
        Some(t) if pow_objective(t, w, lam, pf) < pow_objective(0.0, w, lam, pf) - 0.0 => {
            Ok(sign * t)
        }
        _ => Ok(0.0),
    }
}

/// Largest root of g(t) = t - v + lam p t^(p-1) on t > 0, by safeguarded
/// Newton with a bisection fallback.
fn positive_branch_root(v: f64, lam: f64, p: f64) -> Option<f64> {
    let g = |t: f64| t - v + lam * p * t.powf(p - 1.0);
    let dg = |t: f64| 1.0 + lam * p * (p - 1.0) * t.powf(p - 2.0);
    // inflection of g: below it g decreases, above it increases
    let t_inf = (lam * p * (1.0 - p)).powf(1.0 / (2.0 - p));
    if t_inf >= v || g(t_inf) > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (t_inf, v.max(t_inf * 2.0));
    if g(hi) < 0.0 {
        return None; // cannot happen for v > 0, defensive
    }
    let mut t = v;
    for _ in 0..200 {
        let gt = g(t);
        if gt.abs() < 1e-14 * (1.0 + v) {
            return Some(t);
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = gt / dg(t);
        let next = t - step;
        t = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    // bisection always terminates
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// separable structure

struct SepTerm {
    coord: usize,
    /// inner is a * x_coord + b
    a: f64,
    b: f64,
    p: Rat,
}

/// Splits the composite part into per-coordinate power terms (proxable) and
/// linear-outer terms folded into the smooth oracle.
fn separable_structure(p: &ProblemSpec) -> Result<(Vec<SepTerm>, Vec<(f64, Vec<f64>)>)> {
    let mut terms = Vec::new();
    let mut linear = Vec::new();
    let mut used = vec![false; p.dim];
    for term in &p.phi {
        let ScalarFn::Affine { a, b } = &term.inner else {
            return Err(NlqualError::Unsupported(
                "solver needs affine inner maps".into(),
            ));
        };
        match &term.outer {
            OuterFn::Linear { c } => {
                let cf = rat_to_f64(c);
                linear.push((cf, a.iter().map(rat_to_f64).collect()));
            }
            OuterFn::PowAbs { p: expo } => {
                let support: Vec<usize> = a
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                    .map(|(i, _)| i)
                    .collect();
                let [coord] = support[..] else {
                    return Err(NlqualError::Unsupported(
                        "solver needs single-coordinate power terms".into(),
                    ));
                };
                if used[coord] {
                    return Err(NlqualError::Unsupported(
                        "two power terms share a coordinate".into(),
                    ));
                }
                used[coord] = true;
                terms.push(SepTerm {
                    coord,
                    a: rat_to_f64(&a[coord]),
                    b: rat_to_f64(b),
                    p: expo.clone(),
                });
            }
            _ => {
                return Err(NlqualError::Unsupported(
                    "solver supports POW_ABS and LINEAR outers only".into(),
                ))
            }
        }
    }
    Ok((terms, linear))
}

/// Subgradient of the smooth-plus-penalty part (everything except the power
/// composites); kinks get a one-sided choice and backtracking absorbs them.
fn smooth_grad(
    pp: &PenaltyProblem,
    linear: &[(f64, Vec<f64>)],
    x: &[f64],
) -> Result<Vec<f64>> {
    let p = &pp.base;
    let mut grad = p.smooth.grad_f64(x)?;
    for (c, a) in linear {
        for (gc, ac) in grad.iter_mut().zip(a) {
            *gc += c * ac;
        }
    }
    let gv: Vec<f64> = p
        .ineq
        .iter()
        .map(|g| g.eval_f64(x).map(|v| v.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let hv: Vec<f64> = p
        .eq
        .iter()
        .map(|h| h.eval_f64(x))
        .collect::<Result<Vec<_>>>()?;
    let mut weights_g = vec![0.0; gv.len()];
    let mut weights_h = vec![0.0; hv.len()];
    match pp.norm {
        NormKind::L1 => {
            for (w, v) in weights_g.iter_mut().zip(&gv) {
                *w = if *v > 0.0 { 1.0 } else { 0.0 };
            }
            for (w, v) in weights_h.iter_mut().zip(&hv) {
                *w = if *v > 0.0 {
                    1.0
                } else if *v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        NormKind::L2 => {
            let n = (gv.iter().chain(&hv).map(|v| v * v).sum::<f64>()).sqrt();
            if n > 1e-12 {
                for (w, v) in weights_g.iter_mut().zip(&gv) {
                    *w = v / n;
                }
                for (w, v) in weights_h.iter_mut().zip(&hv) {
                    *w = v / n;
                }
            }
        }
        NormKind::Linf => {
            let mut best = (0.0f64, None);
            for (k, v) in gv.iter().enumerate() {
                if v.abs() > best.0 {
                    best = (v.abs(), Some((true, k, v.signum())));
                }
            }
            for (k, v) in hv.iter().enumerate() {
                if v.abs() > best.0 {
                    best = (v.abs(), Some((false, k, v.signum())));
                }
            }
            match best.1 {
                Some((true, k, s)) => weights_g[k] = s,
                Some((false, k, s)) => weights_h[k] = s,
                None => {}
            }
        }
    }
    for (k, w) in weights_g.iter().enumerate() {
        if *w != 0.0 {
            let gr = p.ineq[k].grad_f64(x)?;
            for (gc, rc) in grad.iter_mut().zip(&gr) {
                *gc += pp.rho * w * rc;
            }
        }
    }
    for (k, w) in weights_h.iter().enumerate() {
        if *w != 0.0 {
            let gr = p.eq[k].grad_f64(x)?;
            for (gc, rc) in grad.iter_mut().zip(&gr) {
                *gc += pp.rho * w * rc;
            }
        }
    }
    Ok(grad)
}

fn prox_step(
    terms: &[SepTerm],
    w: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    for t in terms {
        // min_x (x - w)^2/2 + step |a x + b|^p, via s = a x + b
        let s = prox_pow_abs(&t.p, step * t.a * t.a, t.a * w[t.coord] + t.b)?;
        out[t.coord] = (s - t.b) / t.a;
    }
    Ok(out)
}

fn omega_pieces(p: &ProblemSpec) -> Result<Vec<PolySet>> {
    if p.omega.is_whole() {
        return Ok(vec![]);
    }
    p.omega
        .pieces()
        .iter()
        .map(|hp| Ok(PolySet::from_piece(p.dim, hp.to_vform(p.dim)?)))
        .collect()
}

fn run_start(
    pp: &PenaltyProblem,
    terms: &[SepTerm],
    linear: &[(f64, Vec<f64>)],
    piece: Option<&PolySet>,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<Option<SolveResult>> {
    let project = |x: &[f64]| -> Result<Vec<f64>> {
        match piece {
            Some(ps) => Ok(ps.project(x)?.0),
            None => Ok(x.to_vec()),
        }
    };
    let value = |x: &[f64]| -> Result<Option<f64>> { pp.value_f64(x) };
    let mut x = project(x0)?;
    let Some(mut fx) = value(&x)? else {
        return Ok(None);
    };
    let mut trace = vec![fx];
    let (beta, c, mut step0) = match cfg.step {
        StepRule::Fixed(s) => (0.5, 0.0, s),
        StepRule::Backtracking { beta, c } => (beta, c, 1.0),
    };
    let mut status = SolveStatus::MaxIters;
    let mut iterations = cfg.max_iters;
    for it in 0..cfg.max_iters {
        let grad = smooth_grad(pp, linear, &x)?;
        let mut step = step0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..60 {
            let fwd: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let cand = project(&prox_step(terms, &fwd, step)?)?;
            if let Some(fc) = value(&cand)? {
                let move2: f64 = cand.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if fc <= fx - c * move2 / step.max(1e-300) + 1e-12 {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= beta;
            if let StepRule::Fixed(_) = cfg.step {
                break;
            }
        }
        let Some((next, fnext)) = accepted else {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        };
        let moved: f64 = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        fx = fx.min(fnext);
        trace.push(fnext);
        step0 = (step * 2.0).min(1.0);
        if moved <= cfg.tol * (1.0 + xnorm) {
            status = SolveStatus::Converged;
            iterations = it + 1;
            break;
        }
    }
    let (x, fx) = polish(pp, terms, piece, x, fx)?;
    trace.push(fx);
    Ok(Some(SolveResult {
        x,
        objective: fx,
        iterations,
        status,
        trace,
    }))
}

/// Separable prox steps cannot move along directions coupled by the penalty
/// kinks (e.g. the |h| valley). Polish with line searches in the null space of
/// the equality Jacobian plus exact snaps to the power-term kinks, accepting
/// only full-objective decreases.
fn polish(
    pp: &PenaltyProblem,
    terms: &[SepTerm],
    piece: Option<&PolySet>,
    mut x: Vec<f64>,
    mut fx: f64,
) -> Result<(Vec<f64>, f64)> {
    let value = |y: &[f64]| -> Result<Option<f64>> {
        match piece {
            Some(ps) if ps.project(y)?.1 > 1e-9 => Ok(None),
            _ => pp.value_f64(y),
        }
    };
    let dim = pp.base.dim;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if !pp.base.eq.is_empty() {
        let rows: Vec<Vec<f64>> = pp
            .base
            .eq
            .iter()
            .map(|h| h.grad_f64(&x))
            .collect::<Result<Vec<_>>>()?;
        dirs = null_space_f64(&rows, dim);
    }
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        dirs.push(e);
    }
    let eq_rows: Vec<(Vec<f64>, f64)> = pp
        .base
        .eq
        .iter()
        .filter_map(|h| match h {
            crate::model::ScalarFn::Affine { a, b } => Some((
                a.iter().map(crate::rational::rat_to_f64).collect(),
                crate::rational::rat_to_f64(b),
            )),
            crate::model::ScalarFn::Smooth { .. } => None,
        })
        .collect();
    for _ in 0..30 {
        let mut improved = false;
        // equality kinks: solve one affine row for one coordinate
        for (a, b) in &eq_rows {
            for k in 0..dim {
                if a[k].abs() < 1e-12 {
                    continue;
                }
                let rest: f64 = (0..dim).filter(|&j| j != k).map(|j| a[j] * x[j]).sum();
                let mut cand = x.clone();
                cand[k] = -(b + rest) / a[k];
                if cand[k] != x[k] && (cand[k] - x[k]).abs() < 1e-1 {
                    if let Some(fc) = value(&cand)? {
                        if fc < fx {
                            x = cand;
                            fx = fc;
                            improved = true;
                        }
                    }
                }
            }
        }
        // kink snaps: set a power coordinate exactly to its breakpoint
        for t in terms {
            let kink = -t.b / t.a;
            if (x[t.coord] - kink).abs() < 1e-3 && x[t.coord] != kink {
                let mut cand = x.clone();
                cand[t.coord] = kink;
                if let Some(fc) = value(&cand)? {
                    if fc < fx {
                        x = cand;
                        fx = fc;
                        improved = true;
                    }
                }
            }
        }
        for d in &dirs {
            let (best_t, best_f) = line_search(&value, &x, d, fx)?;
            if best_f < fx - 1e-14 {
                for (xc, dc) in x.iter_mut().zip(d) {
                    *xc += best_t * dc;
                }
                fx = best_f;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((x, fx))
}

fn line_search(
    value: &dyn Fn(&[f64]) -> Result<Option<f64>>,
    x: &[f64],
    d: &[f64],
    fx: f64,
) -> Result<(f64, f64)> {
    let mut center = 0.0f64;
    let mut span = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut best = (0.0f64, fx);
    for _ in 0..8 {
        for k in -40..=40i64 {
            let t = center + span * (k as f64) / 40.0;
            let cand: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
            if let Some(fc) = value(&cand)? {
                if fc < best.1 {
                    best = (t, fc);
                }
            }
        }
        center = best.0;
        span /= 20.0;
    }
    Ok(best)
}

fn null_space_f64(rows: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    // orthonormal basis of the orthogonal complement of the row space
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    let push_orth = |v: &[f64], ortho: &mut Vec<Vec<f64>>| -> Option<Vec<f64>> {
        let mut w = v.to_vec();
        for u in ortho.iter() {
            let dp: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            for (wc, uc) in w.iter_mut().zip(u) {
                *wc -= dp * uc;
            }
        }
        let n = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < 1e-10 {
            return None;
        }
        for c in w.iter_mut() {
            *c /= n;
        }
        ortho.push(w.clone());
        Some(w)
    };
    for r in rows {
        push_orth(r, &mut ortho);
    }
    let mut basis = Vec::new();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        if let Some(w) = push_orth(&e, &mut ortho) {
            basis.push(w);
        }
    }
    basis
}

pub fn solve(pp: &PenaltyProblem, x0: &[f64], cfg: &SolverConfig) -> Result<SolveResult> {
    if x0.len() != pp.base.dim {
        return Err(NlqualError::DimMismatch("start point has wrong length".into()));
    }
    let (terms, linear) = separable_structure(&pp.base)?;
    let pieces = omega_pieces(&pp.base)?;
    let scale = 1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut starts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.starts.max(1) {
        starts.push(
            x0.iter()
                .map(|v| v + rng.gen_range(-0.5..0.5) * scale)
                .collect(),
        );
    }
    let piece_refs: Vec<Option<&PolySet>> = if pieces.is_empty() {
        vec![None]
    } else {
        pieces.iter().map(Some).collect()
    };
    let mut best: Option<SolveResult> = None;
    for piece in &piece_refs {
        for s in &starts {
            if let Some(res) = run_start(pp, &terms, &linear, *piece, s, cfg)? {
                let better = best
                    .as_ref()
                    .map(|b| res.objective < b.objective)
                    .unwrap_or(true);
                if better {
                    best = Some(res);
                }
            }
        }
    }
    best.ok_or_else(|| NlqualError::Domain("no start produced a finite objective".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_problem;
    use crate::penalty::build_penalty;
    use crate::rational::rat;

    fn load(name: &str) -> ProblemSpec {
        let path = format!(
            "{}/../../problems/{name}.json",
            env!("CARGO_MANIFEST_DIR")
        );
        parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    /// brute-force 1-D oracle: best grid point, then trisection refinement
    fn prox_oracle(p: f64, lam: f64, v: f64) -> f64 {
        let obj = |t: f64| 0.5 * (t - v) * (t - v) + lam * t.abs().powf(p);
        let span = v.abs().max(1.0) * 2.0;
        let mut best = (obj(0.0), 0.0f64);
        for k in -2000..=2000i64 {
            let t = span * (k as f64) / 1000.0;
            if obj(t) < best.0 {
                best = (obj(t), t);
            }
        }
        let (mut lo, mut hi) = (best.1 - span / 1000.0, best.1 + span / 1000.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if obj(m1) < obj(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let t = 0.5 * (lo + hi);
        if obj(0.0) <= obj(t) {
            0.0
        } else {
            t
        }
    }

    #[test]
    fn prox_at_origin_is_zero() {
        assert_eq!(prox_pow_abs(&rat(1, 2), 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn prox_large_input_matches_stationarity() {
        let t = prox_pow_abs(&rat(1, 2), 1.0, 10.0).unwrap();
        assert!((t - 9.8406).abs() < 1e-3);
        // stationarity: t - 10 + 1/(2 sqrt t) = 0
        assert!((t - 10.0 + 0.5 / t.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn prox_thresholding_region_snaps_to_zero() {
        assert_eq!(prox_pow_abs(&rat(1, 2), 1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn prox_soft_threshold_at_p_one() {
        assert_eq!(prox_pow_abs(&rat(1, 1), 2.0, 5.0).unwrap(), 3.0);
        assert_eq!(prox_pow_abs(&rat(1, 1), 2.0, -5.0).unwrap(), -3.0);
        assert_eq!(prox_pow_abs(&rat(1, 1), 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn prox_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let pnum = rng.gen_range(1..=9);
            let p = rat(pnum, 10);
            let pf = pnum as f64 / 10.0;
            let lam = rng.gen_range(0.01..4.0);
            let v = rng.gen_range(-8.0..8.0);
            let got = prox_pow_abs(&p, lam, v).unwrap();
            let want = prox_oracle(pf, lam, v);
            if want == 0.0 {
                assert_eq!(got, 0.0, "p={pf} lam={lam} v={v}");
            } else {
                assert!(
                    (got - want).abs() < 1e-6,
                    "p={pf} lam={lam} v={v}: got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn prox_output_beats_every_grid_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let p = rat(rng.gen_range(1..=9), 10);
            let pf = crate::rational::rat_to_f64(&p);
            let lam = rng.gen_range(0.01..3.0);
            let v = rng.gen_range(-5.0..5.0);
            let t = prox_pow_abs(&p, lam, v).unwrap();
            let obj = |s: f64| 0.5 * (s - v) * (s - v) + lam * s.abs().powf(pf);
            for k in -2000..=2000i64 {
                let s = v * (k as f64) / 1000.0;
                assert!(obj(t) <= obj(s) + 1e-9);
            }
        }
    }

    #[test]
    fn smooth_quadratic_reaches_the_stationary_point() {
        let p = parse_problem(r#"{"dim":2,"smooth":"(x1-3)^2 + (x2+1)^2"}"#).unwrap();
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert!((res.x[0] - 3.0).abs() < 1e-6);
        assert!((res.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_solve_matches_the_prox_oracle() {
        let src = r#"{"dim":1,"smooth":"((x1-10)^2)/2",
            "phi":[{"outer":{"kind":"pow_abs","p":"1/2"},
                    "inner":{"kind":"affine","a":["1"],"b":"0"}}]}"#;
        let p = parse_problem(src).unwrap();
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[5.0], &SolverConfig::default()).unwrap();
        let want = prox_pow_abs(&rat(1, 2), 1.0, 10.0).unwrap();
        assert!((res.x[0] - want).abs() < 1e-6, "{} vs {want}", res.x[0]);
    }

    #[test]
    fn example1_penalized_solve_reaches_the_anchor_value() {
        let p = load("example1");
        let pp = build_penalty(&p, 64.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[1.05, 0.02, 0.95, -0.02], &SolverConfig::default()).unwrap();
        assert!(res.objective <= 2.0 + 1e-6, "objective {}", res.objective);
    }

    #[test]
    fn descent_is_monotone_up_to_slack() {
        let p = load("example1");
        let pp = build_penalty(&p, 8.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[2.0, -1.0, 0.5, 0.5], &SolverConfig::default()).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn fixed_point_of_the_prox_step() {
        let src = r#"{"dim":1,"smooth":"((x1-10)^2)/2",
            "phi":[{"outer":{"kind":"pow_abs","p":"1/2"},
                    "inner":{"kind":"affine","a":["1"],"b":"0"}}]}"#;
        let p = parse_problem(src).unwrap();
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[5.0], &SolverConfig::default()).unwrap();
        let (terms, linear) = separable_structure(&pp.base).unwrap();
        let step = 1e-3;
        let grad = smooth_grad(&pp, &linear, &res.x).unwrap();
        let fwd: Vec<f64> = res.x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let next = prox_step(&terms, &fwd, step).unwrap();
        assert!((next[0] - res.x[0]).abs() < 1e-5);
    }

    #[test]
    fn nonseparable_structure_is_rejected() {
        let src = r#"{"dim":2,
            "phi":[{"outer":{"kind":"pow_abs","p":"1/2"},
                    "inner":{"kind":"affine","a":["1","1"],"b":"0"}}]}"#;
        let p = parse_problem(src).unwrap();
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let err = solve(&pp, &[0.0, 0.0], &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, NlqualError::Unsupported(_)));
    }

    #[test]
    fn union_region_solver_respects_omega() {
        // min (x1-2)^2 + (x2-2)^2 over two boxes, best vertex is in the
        // x2 <= 0 piece at (2, 0)
        let src = r#"{"dim":2,"smooth":"(x1-2)^2 + (x2-2)^2",
            "omega":{"kind":"union","pieces":[
                {"A":[["0","1"]],"b":["0"]},
                {"A":[["0","-1"],["0","1"],["1","0"],["-1","0"]],
                 "b":["-3","4","0","0"]}]}}"#;
        let p = parse_problem(src).unwrap();
        let pp = build_penalty(&p, 1.0, NormKind::L1).unwrap();
        let res = solve(&pp, &[1.0, -1.0], &SolverConfig::default()).unwrap();
        assert!((res.x[0] - 2.0).abs() < 1e-6);
        assert!(res.x[1].abs() < 1e-6);
    }
}
