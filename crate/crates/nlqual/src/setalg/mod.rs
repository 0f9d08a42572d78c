//! Exact polyhedral set algebra over rationals. Sets are finite unions of
//! convex polyhedra in generator (V-) form; all certificate-bearing decisions
//! go through the exact simplex LP. Floats appear only in `project`.

pub mod dd;
pub mod lp;

use crate::error::{NlqualError, Result};
use crate::rational::{rat_to_f64, Rat};
use dd::{HForm, VCone};
use lp::{dot, Lp, LpCertificate, LpOutcome, LpStatus};
use num_traits::{One, Signed, Zero};

/// One convex polyhedron conv(points) + cone(rays) + span(lines).
/// Empty `points` with nonempty rays/lines is read as points = {0}.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub points: Vec<Vec<Rat>>,
    pub rays: Vec<Vec<Rat>>,
    pub lines: Vec<Vec<Rat>>,
}

impl Polyhedron {
    pub fn singleton(p: Vec<Rat>) -> Polyhedron {
        Polyhedron {
            points: vec![p],
            rays: vec![],
            lines: vec![],
        }
    }

    pub fn cone(rays: Vec<Vec<Rat>>, lines: Vec<Vec<Rat>>) -> Polyhedron {
        Polyhedron {
            points: vec![],
            rays,
            lines,
        }
    }

    pub fn is_empty_repr(&self) -> bool {
        self.points.is_empty() && self.rays.is_empty() && self.lines.is_empty()
    }

    /// points <= {0}: the piece is a cone.
    pub fn is_cone(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|c| c.is_zero()))
    }

    fn effective_points(&self, dim: usize) -> Vec<Vec<Rat>> {
        if self.points.is_empty() {
            vec![vec![Rat::zero(); dim]]
        } else {
            self.points.clone()
        }
    }

    fn canonicalize(&mut self) {
        for v in self
            .rays
            .iter_mut()
            .chain(self.lines.iter_mut())
        {
            dd::normalize_ray(v);
        }
        self.rays.retain(|r| r.iter().any(|c| !c.is_zero()));
        self.lines.retain(|l| l.iter().any(|c| !c.is_zero()));
        self.points.sort();
        self.points.dedup();
        self.rays.sort();
        self.rays.dedup();
        self.lines.sort();
        self.lines.dedup();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    WholeSpace,
    Empty,
    Union(Vec<Polyhedron>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolySet {
    pub dim: usize,
    pub kind: SetKind,
}

impl PolySet {
    pub fn whole_space(dim: usize) -> PolySet {
        PolySet {
            dim,
            kind: SetKind::WholeSpace,
        }
    }

    pub fn empty(dim: usize) -> PolySet {
        PolySet {
            dim,
            kind: SetKind::Empty,
        }
    }

    pub fn zero(dim: usize) -> PolySet {
        PolySet::from_piece(dim, Polyhedron::singleton(vec![Rat::zero(); dim]))
    }

    pub fn singleton(p: Vec<Rat>) -> PolySet {
        let dim = p.len();
        PolySet::from_piece(dim, Polyhedron::singleton(p))
    }

    pub fn from_piece(dim: usize, piece: Polyhedron) -> PolySet {
        PolySet::from_pieces(dim, vec![piece])
    }

    pub fn from_pieces(dim: usize, pieces: Vec<Polyhedron>) -> PolySet {
        let mut pieces: Vec<Polyhedron> = pieces
            .into_iter()
            .filter(|p| !p.is_empty_repr())
            .collect();
        for p in pieces.iter_mut() {
            p.canonicalize();
        }
        if pieces.is_empty() {
            return PolySet::empty(dim);
        }
        PolySet {
            dim,
            kind: SetKind::Union(pieces),
        }
    }

    pub fn pieces(&self) -> &[Polyhedron] {
        match &self.kind {
            SetKind::Union(ps) => ps,
            _ => &[],
        }
    }

    pub fn is_whole(&self) -> bool {
        matches!(self.kind, SetKind::WholeSpace)
    }

    pub fn is_empty_set(&self) -> bool {
        matches!(self.kind, SetKind::Empty)
    }

    /// All pieces are cones.
    pub fn is_cone(&self) -> bool {
        match &self.kind {
            SetKind::WholeSpace => true,
            SetKind::Empty => false,
            SetKind::Union(ps) => ps.iter().all(|p| p.is_cone()),
        }
    }

    pub fn negate(&self) -> PolySet {
        self.map_generators(|v| v.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, s: &Rat) -> PolySet {
        if s.is_zero() {
            return match self.kind {
                SetKind::Empty => PolySet::empty(self.dim),
                _ => PolySet::zero(self.dim),
            };
        }
        let neg = s.is_negative();
        let out = self.map_generators(|v| v.iter().map(|c| c * s).collect());
        if neg {
            // scaling rays by a negative factor flips them; map_generators
            // already multiplied, so representation is consistent
            let _ = neg;
        }
        out
    }

    fn map_generators(&self, f: impl Fn(&Vec<Rat>) -> Vec<Rat>) -> PolySet {
        match &self.kind {
            SetKind::WholeSpace => PolySet::whole_space(self.dim),
            SetKind::Empty => PolySet::empty(self.dim),
            SetKind::Union(ps) => PolySet::from_pieces(
                self.dim,
                ps.iter()
                    .map(|p| Polyhedron {
                        points: p.points.iter().map(&f).collect(),
                        rays: p.rays.iter().map(&f).collect(),
                        lines: p.lines.iter().map(&f).collect(),
                    })
                    .collect(),
            ),
        }
    }

    /// Linear image under x -> M x given as rows of M (length = self.dim).
    pub fn linear_image(&self, rows: &[Vec<Rat>]) -> PolySet {
        let out_dim = rows.len();
        match &self.kind {
            SetKind::Empty => PolySet::empty(out_dim),
            SetKind::WholeSpace => {
                // image of R^d: span of the columns; represent as line span of rows^T images of basis
                let mut lines = Vec::new();
                for j in 0..self.dim {
                    let col: Vec<Rat> = rows.iter().map(|r| r[j].clone()).collect();
                    lines.push(col);
                }
                PolySet::from_piece(out_dim, Polyhedron::cone(vec![], lines))
            }
            SetKind::Union(ps) => PolySet::from_pieces(
                out_dim,
                ps.iter()
                    .map(|p| Polyhedron {
                        points: p.points.iter().map(|v| mat_vec(rows, v)).collect(),
                        rays: p.rays.iter().map(|v| mat_vec(rows, v)).collect(),
                        lines: p.lines.iter().map(|v| mat_vec(rows, v)).collect(),
                    })
                    .collect(),
            ),
        }
    }

    /// Minkowski sum, distributing over piece pairs. WHOLE_SPACE absorbs.
    pub fn minkowski_sum(&self, other: &PolySet) -> Result<PolySet> {
        if self.dim != other.dim {
            return Err(NlqualError::DimMismatch(format!(
                "minkowski_sum: {} vs {}",
                self.dim, other.dim
            )));
        }
        let dim = self.dim;
        match (&self.kind, &other.kind) {
            (SetKind::Empty, _) | (_, SetKind::Empty) => Ok(PolySet::empty(dim)),
            (SetKind::WholeSpace, _) | (_, SetKind::WholeSpace) => Ok(PolySet::whole_space(dim)),
            (SetKind::Union(a), SetKind::Union(b)) => {
                let mut pieces = Vec::with_capacity(a.len() * b.len());
                for pa in a {
                    for pb in b {
                        let mut points = Vec::new();
                        for qa in pa.effective_points(dim) {
                            for qb in pb.effective_points(dim) {
                                points.push(vec_add(&qa, &qb));
                            }
                        }
                        let mut rays = pa.rays.clone();
                        rays.extend(pb.rays.iter().cloned());
                        let mut lines = pa.lines.clone();
                        lines.extend(pb.lines.iter().cloned());
                        pieces.push(Polyhedron {
                            points,
                            rays,
                            lines,
                        });
                    }
                }
                Ok(PolySet::from_pieces(dim, pieces))
            }
        }
    }

    /// Exact membership decision with an LP certificate.
    pub fn contains_point(&self, x: &[Rat]) -> Result<(bool, LpCertificate)> {
        match &self.kind {
            SetKind::WholeSpace => Ok((
                true,
                LpCertificate {
                    status: LpStatus::Feasible,
                    witness: vec![],
                },
            )),
            SetKind::Empty => Ok((
                false,
                LpCertificate {
                    status: LpStatus::Infeasible,
                    witness: vec![],
                },
            )),
            SetKind::Union(ps) => {
                let mut last = None;
                for p in ps {
                    let (ok, cert) = piece_contains_point(self.dim, p, x)?;
                    if ok {
                        return Ok((true, cert));
                    }
                    last = Some(cert);
                }
                Ok((false, last.expect("nonempty union")))
            }
        }
    }

    pub fn contains_zero(&self) -> Result<(bool, LpCertificate)> {
        self.contains_point(&vec![Rat::zero(); self.dim])
    }

    /// True iff self `intersect` other = {0}; both must be cones.
    /// On a nontrivial intersection the nonzero witness is returned.
    pub fn cone_intersection_trivial(&self, other: &PolySet) -> Result<(bool, Option<Vec<Rat>>)> {
        if !self.is_cone() || !other.is_cone() {
            return Err(NlqualError::NotACone(
                "cone_intersection_trivial needs cone arguments".into(),
            ));
        }
        if self.dim != other.dim {
            return Err(NlqualError::DimMismatch("cone intersection".into()));
        }
        let dim = self.dim;
        if self.is_empty_set() || other.is_empty_set() {
            return Ok((true, None));
        }
        if self.is_whole() && other.is_whole() {
            return Ok((
                false,
                Some(unit_vec(dim, 0)),
            ));
        }
        // WHOLE_SPACE on one side: nontrivial iff the other side has a generator
        if self.is_whole() {
            return Ok(whole_vs_cone(other));
        }
        if other.is_whole() {
            return Ok(whole_vs_cone(self));
        }
        for p1 in self.pieces() {
            for p2 in other.pieces() {
                if let Some(w) = cone_pieces_intersect(dim, p1, p2)? {
                    return Ok((false, Some(w)));
                }
            }
        }
        Ok((true, None))
    }

    /// Intersection of two cones, piecewise through H-forms.
    pub fn cone_intersection(&self, other: &PolySet) -> Result<PolySet> {
        if !self.is_cone() || !other.is_cone() {
            return Err(NlqualError::NotACone("cone_intersection".into()));
        }
        if self.dim != other.dim {
            return Err(NlqualError::DimMismatch("cone_intersection".into()));
        }
        let dim = self.dim;
        if self.is_empty_set() || other.is_empty_set() {
            return Ok(PolySet::empty(dim));
        }
        if self.is_whole() {
            return Ok(other.clone());
        }
        if other.is_whole() {
            return Ok(self.clone());
        }
        let mut pieces = Vec::new();
        for p1 in self.pieces() {
            let h1 = dd::cone_v_to_h(
                dim,
                &VCone {
                    rays: p1.rays.clone(),
                    lines: p1.lines.clone(),
                },
            )?;
            for p2 in other.pieces() {
                let h2 = dd::cone_v_to_h(
                    dim,
                    &VCone {
                        rays: p2.rays.clone(),
                        lines: p2.lines.clone(),
                    },
                )?;
                let mut ineqs = h1.a_ineq.clone();
                ineqs.extend(h2.a_ineq.iter().cloned());
                let mut eqs = h1.a_eq.clone();
                eqs.extend(h2.a_eq.iter().cloned());
                let vc = dd::cone_h_to_v(dim, &ineqs, &eqs)?;
                pieces.push(Polyhedron::cone(vc.rays, vc.lines));
            }
        }
        let nonzero: Vec<Polyhedron> = pieces
            .into_iter()
            .filter(|p| !p.rays.is_empty() || !p.lines.is_empty())
            .collect();
        if nonzero.is_empty() {
            return Ok(PolySet::zero(dim));
        }
        Ok(PolySet::from_pieces(dim, nonzero))
    }

    /// Euclidean projection: nearest point and distance (floats).
    pub fn project(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        match &self.kind {
            SetKind::WholeSpace => Ok((x.to_vec(), 0.0)),
            SetKind::Empty => Err(NlqualError::ProjectionFailure(
                "projection onto the empty set".into(),
            )),
            SetKind::Union(ps) => {
                let mut best: Option<(Vec<f64>, f64)> = None;
                for p in ps {
                    let h = self.piece_hform(p)?;
                    let (y, d) = project_hform(self.dim, &h, x)?;
                    if best.as_ref().map(|(_, bd)| d < *bd).unwrap_or(true) {
                        best = Some((y, d));
                    }
                }
                best.ok_or_else(|| NlqualError::ProjectionFailure("no pieces".into()))
            }
        }
    }

    pub fn piece_hform(&self, p: &Polyhedron) -> Result<HForm> {
        dd::poly_v_to_h(
            self.dim,
            &p.effective_points(self.dim),
            &p.rays,
            &p.lines,
        )
    }

    /// Set equality by mutual generator membership (plus ray membership
    /// through cone recession checks). Used by tests and canonical checks.
    pub fn set_equal(&self, other: &PolySet) -> Result<bool> {
        Ok(self.subset_of(other)? && other.subset_of(self)?)
    }

    pub fn subset_of(&self, other: &PolySet) -> Result<bool> {
        match (&self.kind, &other.kind) {
            (SetKind::Empty, _) => Ok(true),
            (_, SetKind::WholeSpace) => Ok(true),
            (SetKind::WholeSpace, _) => {
                // R^d inside a union only if some piece is R^d; approximate by
                // testing basis directions both ways
                for k in 0..self.dim {
                    for sgn in [1i64, -1] {
                        let mut v = vec![Rat::zero(); self.dim];
                        v[k] = crate::rational::rat_int(sgn);
                        if !other.contains_recession_dir(&v)? {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            (_, SetKind::Empty) => Ok(false),
            (SetKind::Union(ps), _) => {
                for p in ps {
                    for pt in p.effective_points(self.dim) {
                        if !other.contains_point(&pt)?.0 {
                            return Ok(false);
                        }
                    }
                    for r in &p.rays {
                        if !other.contains_recession_dir(r)? {
                            return Ok(false);
                        }
                    }
                    for l in &p.lines {
                        let neg: Vec<Rat> = l.iter().map(|c| -c).collect();
                        if !other.contains_recession_dir(l)?
                            || !other.contains_recession_dir(&neg)?
                        {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
        }
    }

    /// Direction d is a recession direction of some piece.
    pub fn contains_recession_dir(&self, d: &[Rat]) -> Result<bool> {
        match &self.kind {
            SetKind::WholeSpace => Ok(true),
            SetKind::Empty => Ok(false),
            SetKind::Union(ps) => {
                for p in ps {
                    let cone = Polyhedron::cone(p.rays.clone(), p.lines.clone());
                    if piece_contains_point(self.dim, &cone, d)?.0 {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}

fn whole_vs_cone(k: &PolySet) -> (bool, Option<Vec<Rat>>) {
    for p in k.pieces() {
        if let Some(g) = p.rays.first().or(p.lines.first()) {
            return (false, Some(g.clone()));
        }
    }
    (true, None)
}

fn unit_vec(dim: usize, k: usize) -> Vec<Rat> {
    let mut v = vec![Rat::zero(); dim];
    v[k] = Rat::one();
    v
}

pub fn vec_add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn mat_vec(rows: &[Vec<Rat>], v: &[Rat]) -> Vec<Rat> {
    rows.iter().map(|r| dot(r, v)).collect()
}

/// LP membership: x = sum sigma_k p_k + sum rho r + sum tau l with
/// sigma >= 0 summing to 1 and rho >= 0.
fn piece_contains_point(
    dim: usize,
    piece: &Polyhedron,
    x: &[Rat],
) -> Result<(bool, LpCertificate)> {
    if piece.is_empty_repr() {
        // empty piece contains nothing
        return Ok((
            false,
            LpCertificate {
                status: LpStatus::Infeasible,
                witness: vec![],
            },
        ));
    }
    let pts = piece.effective_points(dim);
    let np = pts.len();
    let nr = piece.rays.len();
    let nl = piece.lines.len();
    let nv = np + nr + nl;

    // equality rows: combination = x (dim rows) and convex row sum sigma = 1
    let mut a_eq: Vec<Vec<Rat>> = Vec::with_capacity(dim + 1);
    let mut b_eq: Vec<Rat> = Vec::with_capacity(dim + 1);
    for row in 0..dim {
        let mut r = Vec::with_capacity(nv);
        for p in &pts {
            r.push(p[row].clone());
        }
        for ry in &piece.rays {
            r.push(ry[row].clone());
        }
        for ln in &piece.lines {
            r.push(ln[row].clone());
        }
        a_eq.push(r);
        b_eq.push(x[row].clone());
    }
    let mut convex = vec![Rat::zero(); nv];
    for c in convex.iter_mut().take(np) {
        *c = Rat::one();
    }
    a_eq.push(convex);
    b_eq.push(Rat::one());

    // sign rows: -sigma <= 0, -rho <= 0
    let mut a_le = Vec::new();
    let mut b_le = Vec::new();
    for k in 0..np + nr {
        let mut r = vec![Rat::zero(); nv];
        r[k] = -Rat::one();
        a_le.push(r);
        b_le.push(Rat::zero());
    }

    let lp = Lp::feasibility(nv, a_le, b_le, a_eq, b_eq);
    match lp.solve()? {
        LpOutcome::Optimal { x: w, .. } => Ok((
            true,
            LpCertificate {
                status: LpStatus::Feasible,
                witness: w.iter().map(crate::rational::rat_to_string).collect(),
            },
        )),
        LpOutcome::Infeasible {
            farkas_le,
            farkas_eq,
        } => Ok((
            false,
            LpCertificate {
                status: LpStatus::Infeasible,
                witness: farkas_le
                    .iter()
                    .chain(farkas_eq.iter())
                    .map(crate::rational::rat_to_string)
                    .collect(),
            },
        )),
        LpOutcome::Unbounded { .. } => unreachable!("feasibility LP has a zero objective"),
    }
}

/// Nonzero witness of K1-piece `intersect` K2-piece, if any. Both are cones.
fn cone_pieces_intersect(
    dim: usize,
    p1: &Polyhedron,
    p2: &Polyhedron,
) -> Result<Option<Vec<Rat>>> {
    let h2 = dd::cone_v_to_h(
        dim,
        &VCone {
            rays: p1_rays_lines(p2).0,
            lines: p1_rays_lines(p2).1,
        },
    )?;
    let (rays1, lines1) = p1_rays_lines(p1);
    let nr = rays1.len();
    let nl = lines1.len();
    if nr + nl == 0 {
        return Ok(None);
    }

    // candidate objective directions: rays of K1 and both signs of its lines
    let mut dirs: Vec<Vec<Rat>> = rays1.clone();
    for l in &lines1 {
        dirs.push(l.clone());
        dirs.push(l.iter().map(|c| -c).collect());
    }

    for c in dirs {
        // variables: rho (>= 0) over rays1, tau free over lines1; v = R rho + L tau
        let nv = nr + nl;
        let v_row = |coef: &[Rat]| -> Vec<Rat> {
            // coef . v as a row over (rho, tau)
            let mut row = Vec::with_capacity(nv);
            for r in &rays1 {
                row.push(dot(coef, r));
            }
            for l in &lines1 {
                row.push(dot(coef, l));
            }
            row
        };
        let mut a_le = Vec::new();
        let mut b_le = Vec::new();
        for k in 0..nr {
            let mut r = vec![Rat::zero(); nv];
            r[k] = -Rat::one();
            a_le.push(r);
            b_le.push(Rat::zero());
        }
        for a in &h2.a_ineq {
            a_le.push(v_row(a));
            b_le.push(Rat::zero());
        }
        // cap c.v <= 1
        a_le.push(v_row(&c));
        b_le.push(Rat::one());
        let mut a_eq = Vec::new();
        let mut b_eq = Vec::new();
        for e in &h2.a_eq {
            a_eq.push(v_row(e));
            b_eq.push(Rat::zero());
        }
        let lp = Lp {
            num_vars: nv,
            objective: v_row(&c),
            a_le,
            b_le,
            a_eq,
            b_eq,
        };
        if let LpOutcome::Optimal { x: w, value } = lp.solve()? {
            if value.is_positive() {
                // reconstruct v
                let mut v = vec![Rat::zero(); dim];
                for (k, r) in rays1.iter().enumerate() {
                    for (vc, rc) in v.iter_mut().zip(r) {
                        *vc += &w[k] * rc;
                    }
                }
                for (k, l) in lines1.iter().enumerate() {
                    for (vc, lc) in v.iter_mut().zip(l) {
                        *vc += &w[nr + k] * lc;
                    }
                }
                if v.iter().any(|c| !c.is_zero()) {
                    return Ok(Some(v));
                }
            }
        }
    }
    Ok(None)
}

fn p1_rays_lines(p: &Polyhedron) -> (Vec<Vec<Rat>>, Vec<Vec<Rat>>) {
    (p.rays.clone(), p.lines.clone())
}

/// Face-enumeration projection onto an H-form polyhedron.
fn project_hform(dim: usize, h: &HForm, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if dim > dd::MAX_DIM {
        return Err(NlqualError::DimensionTooLarge(format!(
            "projection limited to dimension {}",
            dd::MAX_DIM
        )));
    }
    let n_ineq = h.a_ineq.len();
    if n_ineq > 24 {
        return Err(NlqualError::DimensionTooLarge(
            "too many faces for enumeration".into(),
        ));
    }
    let af: Vec<Vec<f64>> = h
        .a_ineq
        .iter()
        .map(|r| r.iter().map(rat_to_f64).collect())
        .collect();
    let bf: Vec<f64> = h.b_ineq.iter().map(rat_to_f64).collect();
    let ef: Vec<Vec<f64>> = h
        .a_eq
        .iter()
        .map(|r| r.iter().map(rat_to_f64).collect())
        .collect();
    let ff: Vec<f64> = h.b_eq.iter().map(rat_to_f64).collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    // subsets of inequality rows of size <= dim, treated as equalities
    for mask in 0u32..(1u32 << n_ineq) {
        if (mask.count_ones() as usize) > dim {
            continue;
        }
        let mut rows = ef.clone();
        let mut rhs = ff.clone();
        for (i, (a, b)) in af.iter().zip(&bf).enumerate() {
            if mask & (1 << i) != 0 {
                rows.push(a.clone());
                rhs.push(*b);
            }
        }
        let Some(y) = project_affine(x, &rows, &rhs) else {
            continue;
        };
        // feasibility of the candidate
        let viol = af
            .iter()
            .zip(&bf)
            .map(|(a, b)| dot_f64(a, &y) - b)
            .fold(0.0, f64::max)
            .max(
                ef.iter()
                    .zip(&ff)
                    .map(|(e, f)| (dot_f64(e, &y) - f).abs())
                    .fold(0.0, f64::max),
            );
        if viol > 1e-9 * scale {
            continue;
        }
        let d = dist_f64(x, &y);
        if best.as_ref().map(|(_, bd)| d < *bd).unwrap_or(true) {
            best = Some((y, d));
        }
    }
    best.ok_or_else(|| NlqualError::ProjectionFailure("no feasible face candidate".into()))
}

fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Projection of x onto {y : rows y = rhs} via the KKT system
/// [I A^T; A 0] [y; nu] = [x; rhs]. Returns None when rows are inconsistent.
fn project_affine(x: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let d = x.len();
    let m = rows.len();
    if m == 0 {
        return Some(x.to_vec());
    }
    let n = d + m;
    let mut mat = vec![vec![0.0; n + 1]; n];
    for i in 0..d {
        mat[i][i] = 1.0;
        for (j, r) in rows.iter().enumerate() {
            mat[i][d + j] = r[i];
        }
        mat[i][n] = x[i];
    }
    for (j, r) in rows.iter().enumerate() {
        for i in 0..d {
            mat[d + j][i] = r[i];
        }
        mat[d + j][n] = rhs[j];
    }
    // Gaussian elimination with partial pivoting; singular systems (redundant
    // rows) are solved in the least-norm sense by skipping dependent rows.
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let (pr, pv) = (row..n)
            .map(|r| (r, mat[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        if pv < 1e-12 {
            continue;
        }
        mat.swap(row, pr);
        let piv = mat[row][col];
        for c in col..=n {
            mat[row][c] /= piv;
        }
        for r in 0..n {
            if r != row && mat[r][col] != 0.0 {
                let f = mat[r][col];
                for c in col..=n {
                    mat[r][c] -= f * mat[row][c];
                }
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == n {
            break;
        }
    }
    // inconsistent system: a zero row with nonzero rhs
    for r in row..n {
        if mat[r][n].abs() > 1e-8 {
            return None;
        }
    }
    let mut sol = vec![0.0; n];
    for (r, c) in pivots {
        sol[c] = mat[r][n];
    }
    Some(sol[..d].to_vec())
}
