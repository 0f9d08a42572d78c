//! Stationarity checks: verify a candidate multiplier vector, search for one
//! by exact LP over set generators, and the two first-order alternatives.

use crate::error::{NlqualError, Result};
use crate::model::ProblemSpec;
use crate::qualify::abnormal_cone;
use crate::rational::{rat_from_f64, rat_to_f64, rat_to_string, Rat};
use crate::setalg::lp::{Lp, LpOutcome};
use crate::setalg::{PolySet, SetKind};
use crate::subdiff::{phi_bundle, Exactness};
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

pub const FLOAT_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MultiplierVector {
    pub lambda: Vec<Rat>,
    pub mu: Vec<Rat>,
}

impl serde::Serialize for MultiplierVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("MultiplierVector", 2)?;
        st.serialize_field(
            "lambda",
            &self.lambda.iter().map(rat_to_string).collect::<Vec<_>>(),
        )?;
        st.serialize_field("mu", &self.mu.iter().map(rat_to_string).collect::<Vec<_>>())?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KktStatus {
    Verified,
    Found,
    NotFound,
    Unknown,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct KktReport {
    pub status: KktStatus,
    pub multipliers: Option<MultiplierVector>,
    /// distance of 0 to the assembled sum in the float regime
    pub residual: Option<f64>,
    pub certificate: Value,
    pub notes: Vec<String>,
}

fn require_feasible(p: &ProblemSpec, x: &[Rat]) -> Result<()> {
    let r = p.check_feasible(x, 1e-9)?;
    if !r.feasible {
        return Err(NlqualError::Domain(
            "stationarity query at an infeasible point".into(),
        ));
    }
    Ok(())
}

fn smooth_grad(p: &ProblemSpec, x: &[Rat]) -> Result<(Vec<Rat>, bool)> {
    match p.smooth.grad_rat(x) {
        Some(g) => Ok((g, true)),
        None => {
            let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
            let g = p.smooth.grad_f64(&xf)?;
            Ok((g.into_iter().map(rat_from_f64).collect(), false))
        }
    }
}

struct ConstraintData {
    g: Vec<Vec<Rat>>,
    h: Vec<Vec<Rat>>,
    active: Vec<usize>,
    exact: bool,
}

fn constraint_data(p: &ProblemSpec, x: &[Rat]) -> Result<ConstraintData> {
    let xf: Vec<f64> = x.iter().map(rat_to_f64).collect();
    let mut exact = true;
    let mut take = |f: &crate::model::ScalarFn| -> Result<Vec<Rat>> {
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
    let active = p.active_inequalities(x)?;
    Ok(ConstraintData {
        g,
        h,
        active,
        exact,
    })
}

/// The singleton grad f + sum lambda grad g + sum mu grad h.
fn fixed_part(
    grad_f: &[Rat],
    data: &ConstraintData,
    lam: &[Rat],
    mu: &[Rat],
) -> Vec<Rat> {
    let mut s = grad_f.to_vec();
    for (i, l) in lam.iter().enumerate() {
        for (sc, gc) in s.iter_mut().zip(&data.g[i]) {
            *sc += l * gc;
        }
    }
    for (j, m) in mu.iter().enumerate() {
        for (sc, hc) in s.iter_mut().zip(&data.h[j]) {
            *sc += m * hc;
        }
    }
    s
}

pub fn verify_kkt(p: &ProblemSpec, x: &[Rat], mult: &MultiplierVector) -> Result<KktReport> {
    require_feasible(p, x)?;
    if mult.lambda.len() != p.ineq.len() || mult.mu.len() != p.eq.len() {
        return Err(NlqualError::DimMismatch(
            "multiplier vector lengths do not match the constraint counts".into(),
        ));
    }
    if mult.lambda.iter().any(|l| l.is_negative()) {
        return Ok(KktReport {
            status: KktStatus::NotFound,
            multipliers: Some(mult.clone()),
            residual: None,
            certificate: json!({"reason": "negative lambda"}),
            notes: vec![],
        });
    }
    let data = constraint_data(p, x)?;
    for (i, l) in mult.lambda.iter().enumerate() {
        if !l.is_zero() && !data.active.contains(&i) {
            return Ok(KktReport {
                status: KktStatus::NotFound,
                multipliers: Some(mult.clone()),
                residual: None,
                certificate: json!({"reason": "complementarity violated", "index": i}),
                notes: vec![],
            });
        }
    }
    let (grad_f, grad_exact) = smooth_grad(p, x)?;
    let bundle = phi_bundle(p, x)?;
    let fixed = fixed_part(&grad_f, &data, &mult.lambda, &mult.mu);
    let s = PolySet::singleton(fixed).minkowski_sum(&bundle.limiting.set)?;
    let exact = grad_exact && data.exact && bundle.limiting.exact == Exactness::Exact;
    let (ok, cert) = s.contains_zero()?;
    if ok {
        return Ok(KktReport {
            status: KktStatus::Verified,
            multipliers: Some(mult.clone()),
            residual: Some(0.0),
            certificate: serde_json::to_value(&cert).unwrap_or(Value::Null),
            notes: if exact {
                vec![]
            } else {
                vec!["inclusion verified on estimated generator sets".into()]
            },
        });
    }
    if !exact {
        // float fallback: distance of the assembled set to the origin
        let (_, dist) = s.project(&vec![0.0; p.dim])?;
        let verified = dist <= FLOAT_RESIDUAL_TOL;
        return Ok(KktReport {
            status: if verified {
                KktStatus::Verified
            } else {
                KktStatus::NotFound
            },
            multipliers: Some(mult.clone()),
            residual: Some(dist),
            certificate: json!({"regime": "float-residual"}),
            notes: vec![],
        });
    }
    Ok(KktReport {
        status: KktStatus::NotFound,
        multipliers: Some(mult.clone()),
        residual: None,
        certificate: serde_json::to_value(&cert).unwrap_or(Value::Null),
        notes: vec![],
    })
}

pub fn find_kkt_multipliers(p: &ProblemSpec, x: &[Rat]) -> Result<KktReport> {
    require_feasible(p, x)?;
    let data = constraint_data(p, x)?;
    let (grad_f, grad_exact) = smooth_grad(p, x)?;
    let bundle = phi_bundle(p, x)?;
    let exact = grad_exact && data.exact && bundle.limiting.exact == Exactness::Exact;
    let d = p.dim;
    let na = data.active.len();
    let m = data.h.len();

    let pieces: Vec<crate::setalg::Polyhedron> = match &bundle.limiting.set.kind {
        SetKind::WholeSpace => {
            // anything is absorbed; zero multipliers suffice
            let mult = MultiplierVector {
                lambda: vec![Rat::zero(); p.ineq.len()],
                mu: vec![Rat::zero(); m],
            };
            return Ok(KktReport {
                status: KktStatus::Found,
                multipliers: Some(mult),
                residual: Some(0.0),
                certificate: json!({"limiting_set": "whole space"}),
                notes: vec![],
            });
        }
        SetKind::Empty => {
            return Err(NlqualError::PhiInfinite(
                "empty limiting subdifferential at a feasible point".into(),
            ))
        }
        SetKind::Union(ps) => ps.clone(),
    };

    let mut farkas: Vec<Value> = Vec::new();
    for piece in &pieces {
        let pts: Vec<Vec<Rat>> = if piece.points.is_empty() {
            vec![vec![Rat::zero(); d]]
        } else {
            piece.points.clone()
        };
        let np = pts.len();
        let nr = piece.rays.len();
        let nl = piece.lines.len();
        // vars: sigma (np), rho (nr), tau (nl), lambda_active (na), mu (m)
        let nv = np + nr + nl + na + m;
        let mut a_eq = Vec::new();
        let mut b_eq = Vec::new();
        for r in 0..d {
            let mut row = Vec::with_capacity(nv);
            for q in &pts {
                row.push(q[r].clone());
            }
            for ray in &piece.rays {
                row.push(ray[r].clone());
            }
            for line in &piece.lines {
                row.push(line[r].clone());
            }
            for &i in &data.active {
                row.push(data.g[i][r].clone());
            }
            for hj in &data.h {
                row.push(hj[r].clone());
            }
            a_eq.push(row);
            b_eq.push(-grad_f[r].clone());
        }
        // convexity of sigma
        let mut conv = vec![Rat::zero(); nv];
        for c in conv.iter_mut().take(np) {
            *c = Rat::one();
        }
        a_eq.push(conv);
        b_eq.push(Rat::one());
        // sigma, rho, lambda >= 0
        let mut a_le = Vec::new();
        let mut b_le = Vec::new();
        for i in (0..np + nr).chain(np + nr + nl..np + nr + nl + na) {
            let mut row = vec![Rat::zero(); nv];
            row[i] = -Rat::one();
            a_le.push(row);
            b_le.push(Rat::zero());
        }
        let lp = Lp::feasibility(nv, a_le, b_le, a_eq, b_eq);
        match lp.solve()? {
            LpOutcome::Optimal { x: w, .. } => {
                let mut lambda = vec![Rat::zero(); p.ineq.len()];
                for (k, &i) in data.active.iter().enumerate() {
                    lambda[i] = w[np + nr + nl + k].clone();
                }
                let mu = w[np + nr + nl + na..].to_vec();
                let mult = MultiplierVector { lambda, mu };
                let check = verify_kkt(p, x, &mult)?;
                return Ok(KktReport {
                    status: KktStatus::Found,
                    multipliers: Some(mult),
                    residual: check.residual,
                    certificate: check.certificate,
                    notes: check.notes,
                });
            }
            LpOutcome::Infeasible {
                farkas_le,
                farkas_eq,
            } => {
                farkas.push(json!({
                    "farkas_le": farkas_le.iter().map(rat_to_string).collect::<Vec<_>>(),
                    "farkas_eq": farkas_eq.iter().map(rat_to_string).collect::<Vec<_>>(),
                }));
            }
            LpOutcome::Unbounded { .. } => unreachable!("feasibility LP cannot be unbounded"),
        }
    }
    Ok(KktReport {
        status: if exact {
            KktStatus::NotFound
        } else {
            KktStatus::Unknown
        },
        multipliers: None,
        residual: None,
        certificate: json!({"per_piece_farkas": farkas}),
        notes: if exact {
            vec![]
        } else {
            vec!["generator sets are estimates; absence of multipliers is not conclusive".into()]
        },
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FritzJohnReport {
    /// abnormal multipliers exist (lambda on the active set, mu, not all zero)
    pub case_i: bool,
    /// normal stationarity: the multiplier search succeeds
    pub case_ii: bool,
    pub abnormal_witness: Option<Vec<String>>,
    pub multipliers: Option<MultiplierVector>,
}

pub fn fritz_john(p: &ProblemSpec, x: &[Rat]) -> Result<FritzJohnReport> {
    let ac = abnormal_cone(p, x)?;
    let abnormal = ac.witness();
    let kkt = find_kkt_multipliers(p, x)?;
    Ok(FritzJohnReport {
        case_i: abnormal.is_some(),
        case_ii: kkt.status == KktStatus::Found,
        abnormal_witness: abnormal.map(|w| w.iter().map(rat_to_string).collect()),
        multipliers: kkt.multipliers,
    })
}
