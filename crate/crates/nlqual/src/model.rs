//! Problem representation and ingestion of the JSON problem format.
//!
//! Problems are `min f(x) + sum_i phi_i(omega_i(x))` over the region
//! `{x in Omega : g(x) <= 0, h(x) = 0}`. Affine data is kept as exact
//! rationals; smooth pieces are expression trees with gradient oracles.

use crate::error::{NlqualError, Result};
use crate::expr::Expr;
use crate::rational::{parse_rat, rat, rat_to_f64, rat_to_string, Rat};
use crate::setalg::{dd, Polyhedron, PolySet};
use num_traits::{One, Signed, Zero};
use serde_json::Value;

/// A scalar function of x: exact affine a.x + b, or a smooth expression.
#[derive(Debug, Clone)]
pub enum ScalarFn {
    Affine { a: Vec<Rat>, b: Rat },
    Smooth { expr: Expr },
}

impl ScalarFn {
    pub fn is_affine(&self) -> bool {
        matches!(self, ScalarFn::Affine { .. })
    }

    pub fn eval_rat(&self, x: &[Rat]) -> Option<Rat> {
        match self {
            ScalarFn::Affine { a, b } => {
                Some(a.iter().zip(x).map(|(c, v)| c * v).sum::<Rat>() + b)
            }
            ScalarFn::Smooth { expr } => expr.eval_rat(x),
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarFn::Affine { a, b } => Ok(a
                .iter()
                .zip(x)
                .map(|(c, v)| rat_to_f64(c) * v)
                .sum::<f64>()
                + rat_to_f64(b)),
            ScalarFn::Smooth { expr } => expr.eval_f64(x),
        }
    }

    pub fn grad_rat(&self, x: &[Rat]) -> Option<Vec<Rat>> {
        match self {
            ScalarFn::Affine { a, .. } => Some(a.clone()),
            ScalarFn::Smooth { expr } => expr.grad_rat(x),
        }
    }

    pub fn grad_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScalarFn::Affine { a, .. } => Ok(a.iter().map(rat_to_f64).collect()),
            ScalarFn::Smooth { expr } => expr.grad_f64(x),
        }
    }

    fn check_dim(&self, dim: usize, what: &str) -> Result<()> {
        if let ScalarFn::Affine { a, .. } = self {
            if a.len() != dim {
                return Err(NlqualError::DimMismatch(format!(
                    "{what}: affine coefficient length {} vs dim {dim}",
                    a.len()
                )));
            }
        }
        Ok(())
    }
}

/// Subdifferential data at one breakpoint of a CUSTOM outer function.
/// All four sets live in R (dim 1).
#[derive(Debug, Clone)]
pub struct Breakpoint {
    pub t: Rat,
    pub regular: PolySet,
    pub limiting: PolySet,
    pub horizon: PolySet,
    pub coderiv0: PolySet,
}

/// User-supplied one-dimensional outer function: a value expression over t,
/// an optional closed interval domain (infinite value outside), and
/// subdifferential tables at its breakpoints. Between breakpoints the
/// expression must be Lipschitz with a usable derivative.
#[derive(Debug, Clone)]
pub struct CustomOuter {
    pub expr: Expr,
    pub domain: (Option<Rat>, Option<Rat>),
    pub breakpoints: Vec<Breakpoint>,
}

impl CustomOuter {
    pub fn in_domain_rat(&self, t: &Rat) -> bool {
        let (lo, hi) = &self.domain;
        lo.as_ref().map(|l| t >= l).unwrap_or(true) && hi.as_ref().map(|h| t <= h).unwrap_or(true)
    }

    pub fn in_domain_f64(&self, t: f64) -> bool {
        let (lo, hi) = &self.domain;
        lo.as_ref().map(|l| t >= rat_to_f64(l) - 1e-12).unwrap_or(true)
            && hi.as_ref().map(|h| t <= rat_to_f64(h) + 1e-12).unwrap_or(true)
    }

    pub fn breakpoint_at(&self, t: &Rat) -> Option<&Breakpoint> {
        self.breakpoints.iter().find(|b| &b.t == t)
    }
}

/// The one-dimensional outer function phi of a composite term.
#[derive(Debug, Clone)]
pub enum OuterFn {
    /// |t|^p with rational p in (0,1]
    PowAbs { p: Rat },
    /// (max(t,0))^p with rational p in (0,1]
    PowPlus { p: Rat },
    /// c*t
    Linear { c: Rat },
    Custom(CustomOuter),
}

impl OuterFn {
    /// Value at t; None means +infinity (outside a CUSTOM domain).
    pub fn eval_f64(&self, t: f64) -> Result<Option<f64>> {
        match self {
            OuterFn::PowAbs { p } => Ok(Some(t.abs().powf(rat_to_f64(p)))),
            OuterFn::PowPlus { p } => Ok(Some(t.max(0.0).powf(rat_to_f64(p)))),
            OuterFn::Linear { c } => Ok(Some(rat_to_f64(c) * t)),
            OuterFn::Custom(c) => {
                if !c.in_domain_f64(t) {
                    return Ok(None);
                }
                Ok(Some(c.expr.eval_f64(&[t])?))
            }
        }
    }

    /// Derivative at a point of smoothness; None at kinks/breakpoints or when
    /// the derivative is unavailable.
    pub fn deriv_f64(&self, t: f64) -> Option<f64> {
        match self {
            OuterFn::PowAbs { p } => {
                if t == 0.0 {
                    return None;
                }
                let p = rat_to_f64(p);
                Some(p * t.abs().powf(p - 1.0) * t.signum())
            }
            OuterFn::PowPlus { p } => {
                if t > 0.0 {
                    let p = rat_to_f64(p);
                    Some(p * t.powf(p - 1.0))
                } else if t < 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            OuterFn::Linear { c } => Some(rat_to_f64(c)),
            OuterFn::Custom(c) => {
                if !c.in_domain_f64(t) {
                    return None;
                }
                let tr = crate::rational::rat_from_f64(t);
                if c.breakpoints.iter().any(|b| rat_to_f64(&b.t) == t) && c.breakpoint_at(&tr).is_some() {
                    return None;
                }
                c.expr.grad_f64(&[t]).ok().map(|g| g[0])
            }
        }
    }

    pub fn is_lipschitz_everywhere(&self) -> bool {
        matches!(self, OuterFn::Linear { .. })
    }
}

#[derive(Debug, Clone)]
pub struct CompositeTerm {
    pub outer: OuterFn,
    pub inner: ScalarFn,
}

impl CompositeTerm {
    pub fn inner_value_rat(&self, x: &[Rat]) -> Option<Rat> {
        self.inner.eval_rat(x)
    }
}

/// One H-form piece of Omega: { x : A x <= b }.
#[derive(Debug, Clone)]
pub struct HPiece {
    pub a: Vec<Vec<Rat>>,
    pub b: Vec<Rat>,
}

impl HPiece {
    pub fn contains_rat(&self, x: &[Rat]) -> bool {
        self.a
            .iter()
            .zip(&self.b)
            .all(|(row, rhs)| &crate::setalg::lp::dot(row, x) <= rhs)
    }

    /// Indices of rows active (tight) at x.
    pub fn active_rows(&self, x: &[Rat]) -> Vec<usize> {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .filter(|(_, (row, rhs))| &crate::setalg::lp::dot(row, x) == *rhs)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_vform(&self, dim: usize) -> Result<Polyhedron> {
        let h = dd::HForm {
            a_ineq: self.a.clone(),
            b_ineq: self.b.clone(),
            a_eq: vec![],
            b_eq: vec![],
        };
        let (points, rays, lines) = dd::poly_h_to_v(dim, &h)?;
        Ok(Polyhedron {
            points,
            rays,
            lines,
        })
    }
}

#[derive(Debug, Clone)]
pub enum AbstractSet {
    Whole,
    Union(Vec<HPiece>),
}

impl AbstractSet {
    pub fn is_whole(&self) -> bool {
        matches!(self, AbstractSet::Whole)
    }

    pub fn pieces(&self) -> &[HPiece] {
        match self {
            AbstractSet::Whole => &[],
            AbstractSet::Union(ps) => ps,
        }
    }

    pub fn contains_rat(&self, x: &[Rat]) -> bool {
        match self {
            AbstractSet::Whole => true,
            AbstractSet::Union(ps) => ps.iter().any(|p| p.contains_rat(x)),
        }
    }

    pub fn to_polyset(&self, dim: usize) -> Result<PolySet> {
        match self {
            AbstractSet::Whole => Ok(PolySet::whole_space(dim)),
            AbstractSet::Union(ps) => {
                let pieces = ps
                    .iter()
                    .map(|p| p.to_vform(dim))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PolySet::from_pieces(dim, pieces))
            }
        }
    }

    /// Membership violation: min over pieces of the worst row violation,
    /// straight off the H-form so hot loops avoid the exact projection.
    pub fn residual_f64(&self, _dim: usize, x: &[f64]) -> Result<f64> {
        match self {
            AbstractSet::Whole => Ok(0.0),
            AbstractSet::Union(ps) => {
                let mut best = f64::INFINITY;
                for piece in ps {
                    let mut worst: f64 = 0.0;
                    for (row, rhs) in piece.a.iter().zip(&piece.b) {
                        let lhs: f64 = row
                            .iter()
                            .zip(x)
                            .map(|(c, v)| crate::rational::rat_to_f64(c) * v)
                            .sum();
                        worst = worst.max(lhs - crate::rational::rat_to_f64(rhs));
                    }
                    best = best.min(worst);
                }
                Ok(best)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|c| c.abs()).sum(),
            NormKind::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().map(|c| c.abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub smooth: Expr,
    pub phi: Vec<CompositeTerm>,
    pub omega: AbstractSet,
    pub ineq: Vec<ScalarFn>,
    pub eq: Vec<ScalarFn>,
    pub norm: NormKind,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FeasReport {
    pub feasible: bool,
    pub g_residual: Vec<f64>,
    pub h_residual: Vec<f64>,
    pub omega_residual: f64,
}

impl ProblemSpec {
    /// Indices (0-based) of inequality constraints active at x. Exact for
    /// affine constraints; tolerance 1e-9 for smooth oracles.
    pub fn active_inequalities(&self, x: &[Rat]) -> Result<Vec<usize>> {
        self.check_point(x)?;
        let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
        let mut out = Vec::new();
        for (i, g) in self.ineq.iter().enumerate() {
            let active = match g {
                ScalarFn::Affine { .. } => g.eval_rat(x).expect("affine is exact").is_zero(),
                ScalarFn::Smooth { .. } => g.eval_f64(&xf)?.abs() <= 1e-9,
            };
            if active {
                out.push(i);
            }
        }
        Ok(out)
    }

    pub fn check_feasible(&self, x: &[Rat], tol: f64) -> Result<FeasReport> {
        self.check_point(x)?;
        let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
        let mut g_residual = Vec::new();
        for g in &self.ineq {
            let v = match g.eval_rat(x) {
                Some(r) => rat_to_f64(&r),
                None => g.eval_f64(&xf)?,
            };
            g_residual.push(v.max(0.0));
        }
        let mut h_residual = Vec::new();
        for h in &self.eq {
            let v = match h.eval_rat(x) {
                Some(r) => rat_to_f64(&r),
                None => h.eval_f64(&xf)?,
            };
            h_residual.push(v.abs());
        }
        let omega_residual = if self.omega.contains_rat(x) {
            0.0
        } else {
            self.omega.residual_f64(self.dim, &xf)?
        };
        let worst = g_residual
            .iter()
            .chain(h_residual.iter())
            .cloned()
            .fold(omega_residual, f64::max);
        Ok(FeasReport {
            feasible: worst <= tol,
            g_residual,
            h_residual,
            omega_residual,
        })
    }

    /// f(x) + sum_i phi_i(omega_i(x)); None when a CUSTOM outer is infinite.
    pub fn objective_f64(&self, x: &[f64]) -> Result<Option<f64>> {
        let mut total = self.smooth.eval_f64(x)?;
        for term in &self.phi {
            let t = term.inner.eval_f64(x)?;
            match term.outer.eval_f64(t)? {
                Some(v) => total += v,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    pub fn check_point(&self, x: &[Rat]) -> Result<()> {
        if x.len() != self.dim {
            return Err(NlqualError::DimMismatch(format!(
                "point has length {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON ingestion

pub fn load_problem(path: &std::path::Path) -> Result<ProblemSpec> {
    let src = std::fs::read_to_string(path)?;
    parse_problem(&src)
}

pub fn parse_problem(src: &str) -> Result<ProblemSpec> {
    let doc: Value =
        serde_json::from_str(src).map_err(|e| NlqualError::Parse(format!("invalid json: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| NlqualError::Schema("top level must be an object".into()))?;

    let dim = obj
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| NlqualError::Schema("missing or non-integer \"dim\"".into()))?
        as usize;
    if dim == 0 {
        return Err(NlqualError::Schema("dim must be positive".into()));
    }

    let smooth_src = obj.get("smooth").and_then(Value::as_str).unwrap_or("0");
    let smooth = Expr::parse(smooth_src, dim)?;

    let mut phi = Vec::new();
    if let Some(arr) = obj.get("phi") {
        for (k, item) in as_array(arr, "phi")?.iter().enumerate() {
            phi.push(parse_composite(item, dim).map_err(|e| prefix(e, &format!("phi[{k}]")))?);
        }
    }

    let mut ineq = Vec::new();
    if let Some(arr) = obj.get("ineq") {
        for (k, item) in as_array(arr, "ineq")?.iter().enumerate() {
            let (f, sense) =
                parse_constraint(item, dim).map_err(|e| prefix(e, &format!("ineq[{k}]")))?;
            let f = match sense.as_deref() {
                None | Some("<=") => f,
                Some(">=") => negate_fn(f)?,
                Some(s) => {
                    return Err(NlqualError::Schema(format!(
                        "ineq[{k}]: unsupported sense {s:?}"
                    )))
                }
            };
            ineq.push(f);
        }
    }

    let mut eq = Vec::new();
    if let Some(arr) = obj.get("eq") {
        for (k, item) in as_array(arr, "eq")?.iter().enumerate() {
            let (f, sense) =
                parse_constraint(item, dim).map_err(|e| prefix(e, &format!("eq[{k}]")))?;
            if let Some(s) = sense {
                if s != "=" {
                    return Err(NlqualError::Schema(format!(
                        "eq[{k}]: sense must be \"=\", got {s:?}"
                    )));
                }
            }
            eq.push(f);
        }
    }

    let omega = match obj.get("omega") {
        None => AbstractSet::Whole,
        Some(v) => parse_omega(v, dim)?,
    };

    let norm = match obj.get("norm").and_then(Value::as_str) {
        None | Some("l1") => NormKind::L1,
        Some("l2") => NormKind::L2,
        Some("linf") => NormKind::Linf,
        Some(s) => return Err(NlqualError::Schema(format!("unknown norm {s:?}"))),
    };

    for (f, what) in ineq
        .iter()
        .map(|f| (f, "ineq"))
        .chain(eq.iter().map(|f| (f, "eq")))
    {
        f.check_dim(dim, what)?;
    }
    for (k, t) in phi.iter().enumerate() {
        t.inner.check_dim(dim, &format!("phi[{k}].inner"))?;
    }

    Ok(ProblemSpec {
        dim,
        smooth,
        phi,
        omega,
        ineq,
        eq,
        norm,
    })
}

fn prefix(e: NlqualError, ctx: &str) -> NlqualError {
    match e {
        NlqualError::Schema(m) => NlqualError::Schema(format!("{ctx}: {m}")),
        NlqualError::Parse(m) => NlqualError::Parse(format!("{ctx}: {m}")),
        NlqualError::DimMismatch(m) => NlqualError::DimMismatch(format!("{ctx}: {m}")),
        other => other,
    }
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| NlqualError::Schema(format!("{what} must be an array")))
}

fn get_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| NlqualError::Schema(format!("missing string field {key:?}")))
}

/// Rationals appear as strings "p/q"; bare JSON integers are also accepted.
pub fn json_rat(v: &Value) -> Result<Rat> {
    match v {
        Value::String(s) => parse_rat(s),
        Value::Number(n) => n
            .as_i64()
            .map(crate::rational::rat_int)
            .ok_or_else(|| NlqualError::Schema(format!("non-integer numeric rational {n}"))),
        other => Err(NlqualError::Schema(format!(
            "expected a rational string, got {other}"
        ))),
    }
}

fn json_rat_vec(v: &Value, what: &str) -> Result<Vec<Rat>> {
    as_array(v, what)?.iter().map(json_rat).collect()
}

fn parse_constraint(v: &Value, dim: usize) -> Result<(ScalarFn, Option<String>)> {
    let kind = get_str(v, "kind")?;
    let sense = v
        .get("sense")
        .and_then(Value::as_str)
        .map(|s| s.to_string());
    let f = match kind {
        "affine" => {
            let a = json_rat_vec(
                v.get("a")
                    .ok_or_else(|| NlqualError::Schema("affine needs \"a\"".into()))?,
                "a",
            )?;
            let b = json_rat(
                v.get("b")
                    .ok_or_else(|| NlqualError::Schema("affine needs \"b\"".into()))?,
            )?;
            if a.len() != dim {
                return Err(NlqualError::DimMismatch(format!(
                    "affine \"a\" has length {}, dim is {dim}",
                    a.len()
                )));
            }
            ScalarFn::Affine { a, b }
        }
        "smooth" => ScalarFn::Smooth {
            expr: Expr::parse(get_str(v, "expr")?, dim)?,
        },
        other => {
            return Err(NlqualError::Schema(format!(
                "unknown constraint kind {other:?}"
            )))
        }
    };
    Ok((f, sense))
}

fn negate_fn(f: ScalarFn) -> Result<ScalarFn> {
    Ok(match f {
        ScalarFn::Affine { a, b } => ScalarFn::Affine {
            a: a.into_iter().map(|c| -c).collect(),
            b: -b,
        },
        ScalarFn::Smooth { expr } => ScalarFn::Smooth { expr: expr.negated() },
    })
}

fn check_p(p: &Rat) -> Result<()> {
    if p.is_positive() && p <= &Rat::one() {
        Ok(())
    } else {
        Err(NlqualError::Schema(format!(
            "exponent p = {} outside (0,1]",
            rat_to_string(p)
        )))
    }
}

fn parse_composite(v: &Value, dim: usize) -> Result<CompositeTerm> {
    let outer_v = v
        .get("outer")
        .ok_or_else(|| NlqualError::Schema("composite term needs \"outer\"".into()))?;
    let inner_v = v
        .get("inner")
        .ok_or_else(|| NlqualError::Schema("composite term needs \"inner\"".into()))?;

    let outer = match get_str(outer_v, "kind")? {
        "pow_abs" => {
            let p = json_rat(
                outer_v
                    .get("p")
                    .ok_or_else(|| NlqualError::Schema("pow_abs needs \"p\"".into()))?,
            )?;
            check_p(&p)?;
            OuterFn::PowAbs { p }
        }
        "pow_plus" => {
            let p = json_rat(
                outer_v
                    .get("p")
                    .ok_or_else(|| NlqualError::Schema("pow_plus needs \"p\"".into()))?,
            )?;
            check_p(&p)?;
            OuterFn::PowPlus { p }
        }
        "sqrt_abs" => OuterFn::PowAbs { p: rat(1, 2) },
        "linear" => OuterFn::Linear {
            c: json_rat(
                outer_v
                    .get("c")
                    .ok_or_else(|| NlqualError::Schema("linear needs \"c\"".into()))?,
            )?,
        },
        "custom" => {
            let expr = Expr::parse(get_str(outer_v, "expr")?, 1)?;
            let domain = match outer_v.get("domain") {
                None => (None, None),
                Some(d) => {
                    let lo = d.get("lo").map(json_rat).transpose()?;
                    let hi = d.get("hi").map(json_rat).transpose()?;
                    (lo, hi)
                }
            };
            let mut breakpoints = Vec::new();
            if let Some(arr) = outer_v.get("breakpoints") {
                for bp in as_array(arr, "breakpoints")? {
                    breakpoints.push(Breakpoint {
                        t: json_rat(
                            bp.get("t")
                                .ok_or_else(|| NlqualError::Schema("breakpoint needs \"t\"".into()))?,
                        )?,
                        regular: parse_set_spec(req(bp, "regular")?, 1)?,
                        limiting: parse_set_spec(req(bp, "limiting")?, 1)?,
                        horizon: parse_set_spec(req(bp, "horizon")?, 1)?,
                        coderiv0: parse_set_spec(req(bp, "coderiv0")?, 1)?,
                    });
                }
            }
            OuterFn::Custom(CustomOuter {
                expr,
                domain,
                breakpoints,
            })
        }
        other => return Err(NlqualError::Schema(format!("unknown outer kind {other:?}"))),
    };

    let (inner, sense) = parse_constraint(inner_v, dim)?;
    if sense.is_some() {
        return Err(NlqualError::Schema(
            "inner functions do not take a \"sense\"".into(),
        ));
    }
    Ok(CompositeTerm { outer, inner })
}

fn req<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| NlqualError::Schema(format!("missing field {key:?}")))
}

fn parse_omega(v: &Value, dim: usize) -> Result<AbstractSet> {
    match get_str(v, "kind")? {
        "whole" => Ok(AbstractSet::Whole),
        "polyhedron" => Ok(AbstractSet::Union(vec![parse_hpiece(v, dim)?])),
        "union" => {
            let mut pieces = Vec::new();
            for p in as_array(req(v, "pieces")?, "pieces")? {
                pieces.push(parse_hpiece(p, dim)?);
            }
            Ok(AbstractSet::Union(pieces))
        }
        other => Err(NlqualError::Schema(format!("unknown omega kind {other:?}"))),
    }
}

fn parse_hpiece(v: &Value, dim: usize) -> Result<HPiece> {
    let a_rows = as_array(req(v, "A")?, "A")?;
    let b = json_rat_vec(req(v, "b")?, "b")?;
    let mut a = Vec::with_capacity(a_rows.len());
    for row in a_rows {
        let r = json_rat_vec(row, "A row")?;
        if r.len() != dim {
            return Err(NlqualError::DimMismatch(format!(
                "omega row has length {}, dim is {dim}",
                r.len()
            )));
        }
        a.push(r);
    }
    if a.len() != b.len() {
        return Err(NlqualError::DimMismatch(
            "omega: A and b have different row counts".into(),
        ));
    }
    Ok(HPiece { a, b })
}

/// SetSpec: {"kind":"reals"} | {"kind":"cone","rays":[..],"lines":[..]}
/// | {"kind":"points","pts":[..]}. Vectors are arrays of rational strings.
pub fn parse_set_spec(v: &Value, dim: usize) -> Result<PolySet> {
    match get_str(v, "kind")? {
        "reals" => Ok(PolySet::whole_space(dim)),
        "cone" => {
            let rays = opt_vecs(v.get("rays"), dim)?;
            let lines = opt_vecs(v.get("lines"), dim)?;
            Ok(PolySet::from_piece(dim, Polyhedron::cone(rays, lines)))
        }
        "points" => {
            let pts = opt_vecs(v.get("pts"), dim)?;
            if pts.is_empty() {
                return Ok(PolySet::empty(dim));
            }
            Ok(PolySet::from_piece(
                dim,
                Polyhedron {
                    points: pts,
                    rays: vec![],
                    lines: vec![],
                },
            ))
        }
        other => Err(NlqualError::Schema(format!("unknown set kind {other:?}"))),
    }
}

fn opt_vecs(v: Option<&Value>, dim: usize) -> Result<Vec<Vec<Rat>>> {
    let Some(v) = v else { return Ok(vec![]) };
    let mut out = Vec::new();
    for item in as_array(v, "generator list")? {
        let g = json_rat_vec(item, "generator")?;
        if g.len() != dim {
            return Err(NlqualError::DimMismatch(format!(
                "generator has length {}, expected {dim}",
                g.len()
            )));
        }
        out.push(g);
    }
    Ok(out)
}

pub fn set_spec_to_json(s: &PolySet) -> Value {
    use serde_json::json;
    match &s.kind {
        crate::setalg::SetKind::WholeSpace => json!({"kind": "reals"}),
        crate::setalg::SetKind::Empty => json!({"kind": "points", "pts": []}),
        crate::setalg::SetKind::Union(ps) => {
            let piece_json = |p: &Polyhedron| {
                json!({
                    "points": rat_vecs(&p.points),
                    "rays": rat_vecs(&p.rays),
                    "lines": rat_vecs(&p.lines),
                })
            };
            if ps.len() == 1 {
                let p = &ps[0];
                if p.is_cone() && (!p.rays.is_empty() || !p.lines.is_empty()) {
                    return json!({
                        "kind": "cone",
                        "rays": rat_vecs(&p.rays),
                        "lines": rat_vecs(&p.lines),
                    });
                }
                if p.rays.is_empty() && p.lines.is_empty() {
                    return json!({"kind": "points", "pts": rat_vecs(&p.points)});
                }
            }
            json!({"kind": "poly", "pieces": ps.iter().map(piece_json).collect::<Vec<_>>()})
        }
    }
}

fn rat_vecs(vs: &[Vec<Rat>]) -> Vec<Vec<String>> {
    vs.iter()
        .map(|v| v.iter().map(rat_to_string).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_int;

    fn example1_src() -> String {
        std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../problems/example1.json"
        ))
        .unwrap()
    }

    fn rv(vals: &[i64]) -> Vec<Rat> {
        vals.iter().map(|&v| rat_int(v)).collect()
    }

    #[test]
    fn load_example1() {
        let p = parse_problem(&example1_src()).unwrap();
        assert_eq!(p.dim, 4);
        assert_eq!(p.phi.len(), 4);
        assert_eq!(p.ineq.len(), 1);
        assert_eq!(p.eq.len(), 2);
        assert!(p.omega.is_whole());
        assert!(matches!(
            p.phi[0].outer,
            OuterFn::PowAbs { ref p } if *p == rat(1, 2)
        ));
    }

    #[test]
    fn bad_exponent_rejected() {
        let src = r#"{"dim":1,"phi":[{"outer":{"kind":"pow_abs","p":"3/2"},
            "inner":{"kind":"affine","a":["1"],"b":"0"}}]}"#;
        assert!(matches!(
            parse_problem(src),
            Err(NlqualError::Schema(_))
        ));
    }

    #[test]
    fn dim_mismatch_rejected() {
        let src = r#"{"dim":4,"ineq":[{"kind":"affine","a":["1","1","1"],"b":"0"}]}"#;
        assert!(matches!(
            parse_problem(src),
            Err(NlqualError::DimMismatch(_))
        ));
    }

    #[test]
    fn active_set_example1() {
        let p = parse_problem(&example1_src()).unwrap();
        assert_eq!(p.active_inequalities(&rv(&[1, 0, 1, 0])).unwrap(), vec![0]);
        assert!(p.active_inequalities(&rv(&[0, 0, 0, 0])).unwrap().is_empty());
    }

    #[test]
    fn feasibility_example1() {
        let p = parse_problem(&example1_src()).unwrap();
        let r = p.check_feasible(&rv(&[1, 0, 1, 0]), 0.0).unwrap();
        assert!(r.feasible);
        let r = p.check_feasible(&rv(&[1, 1, 1, 1]), 0.0).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.g_residual, vec![2.0]);
        assert_eq!(r.h_residual, vec![1.0, 1.0]);
    }

    #[test]
    fn no_constraints_always_feasible() {
        let p = parse_problem(r#"{"dim":2,"smooth":"x1^2 + x2^2"}"#).unwrap();
        assert!(p.check_feasible(&rv(&[7, -3]), 0.0).unwrap().feasible);
    }

    #[test]
    fn ge_sense_negated_at_load() {
        let src = r#"{"dim":2,"ineq":[
            {"kind":"affine","a":["1","1"],"b":"-1","sense":">="},
            {"kind":"affine","a":["1","1"],"b":"-1","sense":"<="}]}"#;
        let p = parse_problem(src).unwrap();
        let ScalarFn::Affine { a, b } = &p.ineq[0] else {
            panic!()
        };
        assert_eq!(a, &rv(&[-1, -1]));
        assert_eq!(b, &rat_int(1));
        // both constraints active at (1,0)
        assert_eq!(p.active_inequalities(&rv(&[1, 0])).unwrap(), vec![0, 1]);
    }

    #[test]
    fn omega_polyhedron_membership_and_residual() {
        let src = r#"{"dim":2,"omega":{"kind":"polyhedron",
            "A":[["1","0"],["0","1"],["-1","0"],["0","-1"]],
            "b":["1","1","0","0"]}}"#;
        let p = parse_problem(src).unwrap();
        assert!(p.omega.contains_rat(&rv(&[1, 0])));
        assert!(!p.omega.contains_rat(&rv(&[2, 0])));
        let r = p.check_feasible(&rv(&[2, 0]), 0.0).unwrap();
        assert!(!r.feasible);
        assert!((r.omega_residual - 1.0).abs() < 1e-9);
    }

    #[test]
    fn set_spec_round_trip() {
        let v = serde_json::json!({"kind":"cone","rays":[["1","0"]],"lines":[["0","1"]]});
        let s = parse_set_spec(&v, 2).unwrap();
        let back = set_spec_to_json(&s);
        assert_eq!(back["kind"], "cone");
        let s2 = parse_set_spec(&back, 2).unwrap();
        assert!(s.set_equal(&s2).unwrap());
    }

    #[test]
    fn custom_outer_domain() {
        let c = CustomOuter {
            expr: Expr::parse("0 - t^3", 1).unwrap(),
            domain: (None, Some(Rat::zero())),
            breakpoints: vec![],
        };
        assert!(c.in_domain_rat(&rat_int(-1)));
        assert!(!c.in_domain_rat(&rat_int(1)));
        let o = OuterFn::Custom(c);
        assert_eq!(o.eval_f64(-2.0).unwrap(), Some(8.0));
        assert_eq!(o.eval_f64(1.0).unwrap(), None);
    }
}
