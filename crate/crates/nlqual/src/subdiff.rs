//! Subdifferential engine: regular, limiting, and horizon subdifferentials
//! plus the zero-slice coderivative D*Psi(x)(0), assembled from per-term
//! one-dimensional tables through affine/smooth pullbacks and Minkowski sums.
//!
//! Every field carries an exactness flag. Certified verdicts downstream may
//! only rely on EXACT fields; OUTER_ESTIMATE fields are sound outer sets.

use crate::error::{NlqualError, Result};
use crate::model::{AbstractSet, CompositeTerm, OuterFn, ProblemSpec, ScalarFn};
use crate::rational::{rat_from_f64, rat_pow_exact, Rat};
use crate::setalg::{Polyhedron, PolySet};
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Exactness {
    Exact,
    OuterEstimate,
}

impl Exactness {
    pub fn and(self, other: Exactness) -> Exactness {
        if self == Exactness::Exact && other == Exactness::Exact {
            Exactness::Exact
        } else {
            Exactness::OuterEstimate
        }
    }
}

#[derive(Debug, Clone)]
pub struct SetField {
    pub set: PolySet,
    pub exact: Exactness,
}

impl SetField {
    pub fn exact(set: PolySet) -> SetField {
        SetField {
            set,
            exact: Exactness::Exact,
        }
    }

    pub fn outer(set: PolySet) -> SetField {
        SetField {
            set,
            exact: Exactness::OuterEstimate,
        }
    }
}

/// Subdifferential data of a function at a point. `coderiv0` refers to the
/// continuous part Psi only (the indicator of Omega is excluded there and
/// enters through the normal cone separately).
#[derive(Debug, Clone)]
pub struct SubdiffBundle {
    pub regular: SetField,
    pub limiting: SetField,
    pub horizon: SetField,
    pub coderiv0: SetField,
}

impl SubdiffBundle {
    pub fn dim(&self) -> usize {
        self.limiting.set.dim
    }

    pub fn all_exact(&self) -> bool {
        [
            &self.regular,
            &self.limiting,
            &self.horizon,
            &self.coderiv0,
        ]
        .iter()
        .all(|f| f.exact == Exactness::Exact)
    }

    fn singleton(dim: usize, v: Vec<Rat>, exact: Exactness) -> SubdiffBundle {
        let s = PolySet::singleton(v);
        let z = PolySet::zero(dim);
        SubdiffBundle {
            regular: SetField { set: s.clone(), exact },
            limiting: SetField { set: s, exact },
            horizon: SetField::exact(z.clone()),
            coderiv0: SetField::exact(z),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let field = |f: &SetField| {
            serde_json::json!({
                "set": crate::model::set_spec_to_json(&f.set),
                "exact": f.exact == Exactness::Exact,
            })
        };
        serde_json::json!({
            "regular": field(&self.regular),
            "limiting": field(&self.limiting),
            "horizon": field(&self.horizon),
            "coderiv0": field(&self.coderiv0),
        })
    }
}

fn reals1() -> PolySet {
    PolySet::from_piece(1, Polyhedron::cone(vec![], vec![vec![Rat::one()]]))
}

fn halfline_pos() -> PolySet {
    PolySet::from_piece(1, Polyhedron::cone(vec![vec![Rat::one()]], vec![]))
}

fn seg1(a: Rat, b: Rat) -> PolySet {
    PolySet::from_piece(
        1,
        Polyhedron {
            points: vec![vec![a], vec![b]],
            rays: vec![],
            lines: vec![],
        },
    )
}

/// Derivative value p * |t|^(p-1) * sign(t), exact when representable.
fn pow_deriv(p: &Rat, t: &Rat) -> (Rat, Exactness) {
    let pm1 = p - Rat::one();
    match rat_pow_exact(&t.abs(), &pm1) {
        Some(v) => {
            let mut d = p * v;
            if t.is_negative() {
                d = -d;
            }
            (d, Exactness::Exact)
        }
        None => {
            let tf = crate::rational::rat_to_f64(t);
            let pf = crate::rational::rat_to_f64(p);
            let d = pf * tf.abs().powf(pf - 1.0) * tf.signum();
            (rat_from_f64(d), Exactness::OuterEstimate)
        }
    }
}

/// One-dimensional subdifferential tables of an outer function at t.
pub fn outer_table(outer: &OuterFn, t: &Rat) -> Result<SubdiffBundle> {
    match outer {
        OuterFn::Linear { c } => Ok(SubdiffBundle::singleton(
            1,
            vec![c.clone()],
            Exactness::Exact,
        )),
        OuterFn::PowAbs { p } => {
            if p.is_one() {
                // |t|: Lipschitz
                if t.is_zero() {
                    let seg = seg1(-Rat::one(), Rat::one());
                    return Ok(SubdiffBundle {
                        regular: SetField::exact(seg.clone()),
                        limiting: SetField::exact(seg),
                        horizon: SetField::exact(PolySet::zero(1)),
                        coderiv0: SetField::exact(PolySet::zero(1)),
                    });
                }
                let s = if t.is_positive() { Rat::one() } else { -Rat::one() };
                return Ok(SubdiffBundle::singleton(1, vec![s], Exactness::Exact));
            }
            if t.is_zero() {
                let r = reals1();
                Ok(SubdiffBundle {
                    regular: SetField::exact(r.clone()),
                    limiting: SetField::exact(r.clone()),
                    horizon: SetField::exact(r.clone()),
                    coderiv0: SetField::exact(r),
                })
            } else {
                let (d, ex) = pow_deriv(p, t);
                Ok(SubdiffBundle::singleton(1, vec![d], ex))
            }
        }
        OuterFn::PowPlus { p } => {
            if p.is_one() {
                // max(t,0): Lipschitz
                if t.is_zero() {
                    let seg = seg1(Rat::zero(), Rat::one());
                    return Ok(SubdiffBundle {
                        regular: SetField::exact(seg.clone()),
                        limiting: SetField::exact(seg),
                        horizon: SetField::exact(PolySet::zero(1)),
                        coderiv0: SetField::exact(PolySet::zero(1)),
                    });
                }
                let s = if t.is_positive() { Rat::one() } else { Rat::zero() };
                return Ok(SubdiffBundle::singleton(1, vec![s], Exactness::Exact));
            }
            if t.is_negative() {
                Ok(SubdiffBundle::singleton(
                    1,
                    vec![Rat::zero()],
                    Exactness::Exact,
                ))
            } else if t.is_zero() {
                // one-sided cusp: the positive half-line, with the limiting
                // and coderivative fields only outer-estimated
                let h = halfline_pos();
                Ok(SubdiffBundle {
                    regular: SetField::exact(h.clone()),
                    limiting: SetField::outer(h.clone()),
                    horizon: SetField::exact(h.clone()),
                    coderiv0: SetField::outer(h),
                })
            } else {
                let (d, ex) = pow_deriv(p, t);
                Ok(SubdiffBundle::singleton(1, vec![d], ex))
            }
        }
        OuterFn::Custom(c) => {
            if !c.in_domain_rat(t) {
                return Err(NlqualError::Domain(format!(
                    "custom outer queried outside its domain at t = {}",
                    crate::rational::rat_to_string(t)
                )));
            }
            if let Some(bp) = c.breakpoint_at(t) {
                return Ok(SubdiffBundle {
                    regular: SetField::exact(bp.regular.clone()),
                    limiting: SetField::exact(bp.limiting.clone()),
                    horizon: SetField::exact(bp.horizon.clone()),
                    coderiv0: SetField::exact(bp.coderiv0.clone()),
                });
            }
            // a domain boundary without a table is not differentiable data
            let (lo, hi) = &c.domain;
            if lo.as_ref() == Some(t) || hi.as_ref() == Some(t) {
                return Err(NlqualError::Domain(
                    "custom outer needs a breakpoint table at its domain boundary".into(),
                ));
            }
            match c.expr.grad_rat(&[t.clone()]) {
                Some(g) => Ok(SubdiffBundle::singleton(1, g, Exactness::Exact)),
                None => {
                    let tf = crate::rational::rat_to_f64(t);
                    let g = c.expr.grad_f64(&[tf])?;
                    Ok(SubdiffBundle::singleton(
                        1,
                        vec![rat_from_f64(g[0])],
                        Exactness::OuterEstimate,
                    ))
                }
            }
        }
    }
}

/// Lemma-style superlinear growth test: true iff the regular subdifferential
/// of the outer function at t is all of R.
pub fn superlinear_growth(outer: &OuterFn, t: &Rat) -> Result<bool> {
    match outer {
        OuterFn::Linear { .. } => Ok(false),
        OuterFn::PowAbs { p } => Ok(t.is_zero() && !p.is_one()),
        OuterFn::PowPlus { .. } => Ok(false),
        OuterFn::Custom(c) => {
            if !c.in_domain_rat(t) {
                return Err(NlqualError::Domain("superlinear_growth outside domain".into()));
            }
            if let Some(bp) = c.breakpoint_at(t) {
                return Ok(bp.regular.is_whole());
            }
            // numeric fallback on a geometric grid
            let tf = crate::rational::rat_to_f64(t);
            let phi_t = c.expr.eval_f64(&[tf])?;
            let m = 1e6;
            let h = 2f64.powi(-40);
            let mut worst = f64::INFINITY;
            for side in [tf - h, tf + h] {
                if c.in_domain_f64(side) {
                    let v = c.expr.eval_f64(&[side])?;
                    worst = worst.min((v - phi_t) / h);
                }
            }
            Ok(worst.is_finite() && worst >= m)
        }
    }
}

/// Image of a 1-D set under v -> v * a (pullback of an affine inner row).
pub fn pullback_1d(set: &PolySet, a: &[Rat]) -> PolySet {
    let rows: Vec<Vec<Rat>> = a.iter().map(|c| vec![c.clone()]).collect();
    set.linear_image(&rows)
}

/// Normal cone of Omega at x. For a union, `inner`/`outer` bracket the true
/// limiting normal cone; `exact` holds when the brackets coincide (single
/// containing piece, or identical cones).
#[derive(Debug, Clone)]
pub struct OmegaNormal {
    pub inner: PolySet,
    pub outer: PolySet,
    pub exact: bool,
}

pub fn normal_cone_omega(omega: &AbstractSet, dim: usize, x: &[Rat]) -> Result<OmegaNormal> {
    match omega {
        AbstractSet::Whole => Ok(OmegaNormal {
            inner: PolySet::zero(dim),
            outer: PolySet::zero(dim),
            exact: true,
        }),
        AbstractSet::Union(pieces) => {
            let mut cones = Vec::new();
            for p in pieces {
                if p.contains_rat(x) {
                    let rays: Vec<Vec<Rat>> = p
                        .active_rows(x)
                        .into_iter()
                        .map(|i| p.a[i].clone())
                        .collect();
                    cones.push(if rays.is_empty() {
                        PolySet::zero(dim)
                    } else {
                        PolySet::from_piece(dim, Polyhedron::cone(rays, vec![]))
                    });
                }
            }
            if cones.is_empty() {
                return Err(NlqualError::PhiInfinite(
                    "normal cone queried at a point outside Omega".into(),
                ));
            }
            if cones.len() == 1 {
                let c = cones.pop().unwrap();
                return Ok(OmegaNormal {
                    inner: c.clone(),
                    outer: c,
                    exact: true,
                });
            }
            let mut inner = cones[0].clone();
            for c in &cones[1..] {
                inner = inner.cone_intersection(c)?;
            }
            let outer_pieces: Vec<Polyhedron> = cones
                .iter()
                .flat_map(|c| c.pieces().to_vec())
                .collect();
            let outer = PolySet::from_pieces(dim, outer_pieces);
            let exact = inner.set_equal(&outer)?;
            Ok(OmegaNormal {
                inner,
                outer,
                exact,
            })
        }
    }
}

/// Bundle of a single composite term phi_i(omega_i(x)), pulled back to R^d.
pub fn term_bundle(term: &CompositeTerm, _dim: usize, x: &[Rat]) -> Result<SubdiffBundle> {
    match &term.inner {
        ScalarFn::Affine { a, b: _ } => {
            let t = term.inner.eval_rat(x).expect("affine is exact");
            let tab = outer_table(&term.outer, &t)?;
            let map = |f: &SetField| SetField {
                set: pullback_1d(&f.set, a),
                exact: f.exact,
            };
            Ok(SubdiffBundle {
                regular: map(&tab.regular),
                limiting: map(&tab.limiting),
                horizon: map(&tab.horizon),
                coderiv0: map(&tab.coderiv0),
            })
        }
        ScalarFn::Smooth { .. } => {
            let xf: Vec<f64> = x.iter().map(crate::rational::rat_to_f64).collect();
            let (t, t_exact) = match term.inner.eval_rat(x) {
                Some(r) => (r, true),
                None => (rat_from_f64(term.inner.eval_f64(&xf)?), false),
            };
            let tab = outer_table(&term.outer, &t)?;
            let lipschitz_here = {
                let (triv, _) = tab
                    .horizon
                    .set
                    .cone_intersection_trivial(&tab.horizon.set)?;
                triv
            };
            if !lipschitz_here {
                return Err(NlqualError::Unsupported(
                    "non-Lipschitz outer composed with a smooth non-affine inner at the kink"
                        .into(),
                ));
            }
            // chain rule at a Lipschitz point of the outer function
            let (grad, grad_exact): (Vec<Rat>, Exactness) = match term.inner.grad_rat(x) {
                Some(g) => (g, Exactness::Exact),
                None => {
                    let g = term.inner.grad_f64(&xf)?;
                    (
                        g.into_iter().map(rat_from_f64).collect(),
                        Exactness::OuterEstimate,
                    )
                }
            };
            let base = if t_exact {
                Exactness::Exact
            } else {
                Exactness::OuterEstimate
            };
            let map = |f: &SetField| SetField {
                set: pullback_1d(&f.set, &grad),
                exact: f.exact.and(grad_exact).and(base),
            };
            Ok(SubdiffBundle {
                regular: map(&tab.regular),
                limiting: map(&tab.limiting),
                horizon: map(&tab.horizon),
                coderiv0: map(&tab.coderiv0),
            })
        }
    }
}

/// True when the term is non-Lipschitz at x (nontrivial 1-D horizon cone).
fn term_nonlipschitz(term: &CompositeTerm, x: &[Rat]) -> Result<Option<Vec<usize>>> {
    let t = match term.inner.eval_rat(x) {
        Some(r) => r,
        None => {
            let xf: Vec<f64> = x.iter().map(crate::rational::rat_to_f64).collect();
            rat_from_f64(term.inner.eval_f64(&xf)?)
        }
    };
    let tab = outer_table(&term.outer, &t)?;
    let trivial = tab
        .horizon
        .set
        .cone_intersection_trivial(&tab.horizon.set)?
        .0;
    if trivial {
        return Ok(None);
    }
    // support of the inner map (affine rows only reach their nonzero coords)
    let support = match &term.inner {
        ScalarFn::Affine { a, .. } => a
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i)
            .collect(),
        ScalarFn::Smooth { .. } => (0..usize::MAX).take(0).collect::<Vec<_>>(),
    };
    Ok(Some(support))
}

/// Full bundle for Phi = sum_i phi_i(omega_i(x)) + delta_Omega at x.
/// `coderiv0` covers the continuous part Psi only.
pub fn phi_bundle(p: &ProblemSpec, x: &[Rat]) -> Result<SubdiffBundle> {
    p.check_point(x)?;
    let dim = p.dim;
    if !p.omega.contains_rat(x) {
        return Err(NlqualError::PhiInfinite("x outside Omega".into()));
    }
    for term in &p.phi {
        if let OuterFn::Custom(c) = &term.outer {
            let t = match term.inner.eval_rat(x) {
                Some(r) => r,
                None => {
                    let xf: Vec<f64> = x.iter().map(crate::rational::rat_to_f64).collect();
                    rat_from_f64(term.inner.eval_f64(&xf)?)
                }
            };
            if !c.in_domain_rat(&t) {
                return Err(NlqualError::PhiInfinite(
                    "custom outer infinite at the query point".into(),
                ));
            }
        }
    }

    // sum-rule exactness: at most one non-Lipschitz term, or all of them
    // affine with pairwise disjoint coordinate supports
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut smooth_nonlip = false;
    for term in &p.phi {
        if let Some(s) = term_nonlipschitz(term, x)? {
            if s.is_empty() && matches!(term.inner, ScalarFn::Smooth { .. }) {
                smooth_nonlip = true;
            }
            supports.push(s);
        }
    }
    let disjoint = {
        let mut seen = std::collections::HashSet::new();
        let mut ok = true;
        for s in &supports {
            for i in s {
                if !seen.insert(*i) {
                    ok = false;
                }
            }
        }
        ok
    };
    let sum_exact = if supports.len() <= 1 || (disjoint && !smooth_nonlip) {
        Exactness::Exact
    } else {
        Exactness::OuterEstimate
    };

    let mut acc = SubdiffBundle {
        regular: SetField::exact(PolySet::zero(dim)),
        limiting: SetField::exact(PolySet::zero(dim)),
        horizon: SetField::exact(PolySet::zero(dim)),
        coderiv0: SetField::exact(PolySet::zero(dim)),
    };
    for term in &p.phi {
        let tb = term_bundle(term, dim, x)?;
        let add = |a: &SetField, b: &SetField| -> Result<SetField> {
            Ok(SetField {
                set: a.set.minkowski_sum(&b.set)?,
                exact: a.exact.and(b.exact).and(sum_exact),
            })
        };
        acc = SubdiffBundle {
            regular: add(&acc.regular, &tb.regular)?,
            limiting: add(&acc.limiting, &tb.limiting)?,
            horizon: add(&acc.horizon, &tb.horizon)?,
            coderiv0: add(&acc.coderiv0, &tb.coderiv0)?,
        };
    }

    // indicator of Omega contributes its normal cone (not to coderiv0)
    if !p.omega.is_whole() {
        let nc = normal_cone_omega(&p.omega, dim, x)?;
        let ex = if nc.exact {
            Exactness::Exact
        } else {
            Exactness::OuterEstimate
        };
        let add_cone = |f: &SetField| -> Result<SetField> {
            Ok(SetField {
                set: f.set.minkowski_sum(&nc.outer)?,
                exact: f.exact.and(ex),
            })
        };
        acc.regular = add_cone(&acc.regular)?;
        acc.limiting = add_cone(&acc.limiting)?;
        acc.horizon = add_cone(&acc.horizon)?;
    }
    Ok(acc)
}

/// D*Psi(x)(0) for the continuous part of Phi.
pub fn coderiv0(p: &ProblemSpec, x: &[Rat]) -> Result<SetField> {
    Ok(phi_bundle(p, x)?.coderiv0)
}
