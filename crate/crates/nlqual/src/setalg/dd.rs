//! Double description over exact rationals: extreme rays and lineality of
//! H-form cones, plus the homogenization/polarity bridges between H- and
//! V-forms of polyhedra. Limited to the desk-scale regime (d <= 12, <= 64
//! generators per piece).

use crate::error::{NlqualError, Result};
use crate::rational::Rat;
use crate::setalg::lp::dot;
use num_traits::{Signed, Zero};

pub const MAX_DIM: usize = 12;
pub const MAX_GENERATORS: usize = 64;

/// V-form of a polyhedral cone: cone(rays) + span(lines).
#[derive(Debug, Clone, PartialEq)]
pub struct VCone {
    pub rays: Vec<Vec<Rat>>,
    pub lines: Vec<Vec<Rat>>,
}

/// H-form Ax <= b, Ex = f. Cones have zero right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct HForm {
    pub a_ineq: Vec<Vec<Rat>>,
    pub b_ineq: Vec<Rat>,
    pub a_eq: Vec<Vec<Rat>>,
    pub b_eq: Vec<Rat>,
}

/// Scales a nonzero vector so its first nonzero entry is +-1.
pub fn normalize_ray(v: &mut [Rat]) {
    if let Some(p) = v.iter().find(|c| !c.is_zero()).cloned() {
        let s = p.abs();
        for c in v.iter_mut() {
            *c /= &s;
        }
    }
}

fn dedup(vs: &mut Vec<Vec<Rat>>) {
    vs.sort();
    vs.dedup();
}

struct Ray {
    dir: Vec<Rat>,
    /// tight flags over the inequalities processed so far
    tight: Vec<bool>,
}

fn check_limits(dim: usize, n_rows: usize) -> Result<()> {
    if dim > MAX_DIM {
        return Err(NlqualError::DimensionTooLarge(format!(
            "double description limited to dimension {MAX_DIM}, got {dim}"
        )));
    }
    if n_rows > MAX_GENERATORS {
        return Err(NlqualError::DimensionTooLarge(format!(
            "double description limited to {MAX_GENERATORS} rows/generators, got {n_rows}"
        )));
    }
    Ok(())
}

/// Extreme rays and lineality of {x : a.x <= 0 for a in ineqs, e.x = 0 for e in eqs}.
pub fn cone_h_to_v(dim: usize, ineqs: &[Vec<Rat>], eqs: &[Vec<Rat>]) -> Result<VCone> {
    // equalities become inequality pairs
    let mut rows: Vec<Vec<Rat>> = ineqs.to_vec();
    for e in eqs {
        rows.push(e.clone());
        rows.push(e.iter().map(|c| -c).collect());
    }
    check_limits(dim, rows.len())?;

    let mut lines: Vec<Vec<Rat>> = (0..dim)
        .map(|i| {
            let mut v = vec![Rat::zero(); dim];
            v[i] = Rat::from_integer(1.into());
            v
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (step, a) in rows.iter().enumerate() {
        // Case 1: some line leaves the hyperplane of `a`.
        if let Some(k) = lines.iter().position(|l| !dot(a, l).is_zero()) {
            let mut l0 = lines.remove(k);
            if dot(a, &l0).is_negative() {
                for c in l0.iter_mut() {
                    *c = -c.clone();
                }
            }
            let al0 = dot(a, &l0);
            for l in lines.iter_mut() {
                let f = dot(a, l) / &al0;
                if !f.is_zero() {
                    for (c, l0c) in l.iter_mut().zip(&l0) {
                        *c -= &f * l0c;
                    }
                }
            }
            for r in rays.iter_mut() {
                let f = dot(a, &r.dir) / &al0;
                if !f.is_zero() {
                    for (c, l0c) in r.dir.iter_mut().zip(&l0) {
                        *c -= &f * l0c;
                    }
                }
                r.tight.push(true);
            }
            let mut neg = l0.iter().map(|c| -c).collect::<Vec<_>>();
            normalize_ray(&mut neg);
            let mut tight = vec![true; step];
            tight.push(false);
            rays.push(Ray { dir: neg, tight });
            continue;
        }

        // Case 2: split rays against the halfspace.
        let vals: Vec<Rat> = rays.iter().map(|r| dot(a, &r.dir)).collect();
        let mut next: Vec<Ray> = Vec::new();
        for (r, v) in rays.iter().zip(&vals) {
            if !v.is_positive() {
                let mut t = r.tight.clone();
                t.push(v.is_zero());
                next.push(Ray {
                    dir: r.dir.clone(),
                    tight: t,
                });
            }
        }
        for (i, vi) in vals.iter().enumerate() {
            if !vi.is_positive() {
                continue;
            }
            for (j, vj) in vals.iter().enumerate() {
                if !vj.is_negative() {
                    continue;
                }
                if !adjacent(&rays, i, j) {
                    continue;
                }
                // w = (a.ri) rj - (a.rj) ri, positive combination with a.w = 0
                let mut w: Vec<Rat> = rays[j]
                    .dir
                    .iter()
                    .zip(&rays[i].dir)
                    .map(|(rj, ri)| vi * rj - vj * ri)
                    .collect();
                if w.iter().all(|c| c.is_zero()) {
                    continue;
                }
                normalize_ray(&mut w);
                let mut t: Vec<bool> = rays[i]
                    .tight
                    .iter()
                    .zip(&rays[j].tight)
                    .map(|(x, y)| *x && *y)
                    .collect();
                t.push(true);
                next.push(Ray { dir: w, tight: t });
            }
        }
        // dedup directions
        next.sort_by(|x, y| x.dir.cmp(&y.dir));
        next.dedup_by(|x, y| x.dir == y.dir);
        rays = next;
    }

    let mut out_rays: Vec<Vec<Rat>> = rays.into_iter().map(|r| r.dir).collect();
    for r in out_rays.iter_mut() {
        normalize_ray(r);
    }
    dedup(&mut out_rays);
    let mut out_lines = reduce_lines(lines);
    for l in out_lines.iter_mut() {
        normalize_ray(l);
    }
    Ok(VCone {
        rays: out_rays,
        lines: out_lines,
    })
}

/// Combinatorial adjacency: rays i, j are adjacent iff no other ray is tight
/// on every constraint where both are tight.
fn adjacent(rays: &[Ray], i: usize, j: usize) -> bool {
    let common: Vec<usize> = (0..rays[i].tight.len())
        .filter(|&k| rays[i].tight[k] && rays[j].tight[k])
        .collect();
    for (t, r) in rays.iter().enumerate() {
        if t == i || t == j {
            continue;
        }
        if common.iter().all(|&k| r.tight[k]) {
            return false;
        }
    }
    true
}

/// Gaussian elimination to a row-echelon basis, dropping zero rows.
fn reduce_lines(mut lines: Vec<Vec<Rat>>) -> Vec<Vec<Rat>> {
    let mut out: Vec<Vec<Rat>> = Vec::new();
    let dim = match lines.first() {
        Some(l) => l.len(),
        None => return out,
    };
    let mut col = 0;
    while col < dim && !lines.is_empty() {
        if let Some(p) = lines.iter().position(|l| !l[col].is_zero()) {
            let piv = lines.remove(p);
            for l in lines.iter_mut() {
                if !l[col].is_zero() {
                    let f = &l[col] / &piv[col];
                    for (c, pc) in l.iter_mut().zip(&piv) {
                        *c -= &f * pc;
                    }
                }
            }
            out.push(piv);
        }
        col += 1;
    }
    out
}

/// Polar of a V-cone, as a V-cone: {a : a.r <= 0, a.l = 0}.
pub fn polar(dim: usize, cone: &VCone) -> Result<VCone> {
    cone_h_to_v(dim, &cone.rays, &cone.lines)
}

/// H-form of a V-cone via polarity.
pub fn cone_v_to_h(dim: usize, cone: &VCone) -> Result<HForm> {
    let p = polar(dim, cone)?;
    Ok(HForm {
        a_ineq: p.rays,
        b_ineq: vec![Rat::zero(); 0],
        a_eq: p.lines,
        b_eq: vec![Rat::zero(); 0],
    }
    .with_zero_rhs())
}

impl HForm {
    fn with_zero_rhs(mut self) -> HForm {
        self.b_ineq = vec![Rat::zero(); self.a_ineq.len()];
        self.b_eq = vec![Rat::zero(); self.a_eq.len()];
        self
    }

    pub fn dim(&self) -> usize {
        self.a_ineq
            .first()
            .or(self.a_eq.first())
            .map(|r| r.len())
            .unwrap_or(0)
    }

    /// Exact membership for rational points.
    pub fn contains_rat(&self, x: &[Rat]) -> bool {
        self.a_ineq
            .iter()
            .zip(&self.b_ineq)
            .all(|(a, b)| dot(a, x) <= *b)
            && self.a_eq.iter().zip(&self.b_eq).all(|(a, b)| dot(a, x) == *b)
    }

    /// Max constraint violation at a float point.
    pub fn violation_f64(&self, x: &[f64]) -> f64 {
        let dotf = |a: &[Rat], x: &[f64]| -> f64 {
            a.iter()
                .zip(x)
                .map(|(c, v)| crate::rational::rat_to_f64(c) * v)
                .sum()
        };
        let mut worst: f64 = 0.0;
        for (a, b) in self.a_ineq.iter().zip(&self.b_ineq) {
            worst = worst.max(dotf(a, x) - crate::rational::rat_to_f64(b));
        }
        for (a, b) in self.a_eq.iter().zip(&self.b_eq) {
            worst = worst.max((dotf(a, x) - crate::rational::rat_to_f64(b)).abs());
        }
        worst
    }
}

/// V-form generators of a polyhedron given in H-form (homogenization).
pub fn poly_h_to_v(dim: usize, h: &HForm) -> Result<(Vec<Vec<Rat>>, Vec<Vec<Rat>>, Vec<Vec<Rat>>)> {
    // cone {(x,t) : Ax - bt <= 0, Ex - ft = 0, -t <= 0}
    let mut ineqs: Vec<Vec<Rat>> = Vec::new();
    for (a, b) in h.a_ineq.iter().zip(&h.b_ineq) {
        let mut row = a.clone();
        row.push(-b.clone());
        ineqs.push(row);
    }
    let mut tround = vec![Rat::zero(); dim + 1];
    tround[dim] = Rat::from_integer((-1).into());
    ineqs.push(tround);
    let mut eqs: Vec<Vec<Rat>> = Vec::new();
    for (e, f) in h.a_eq.iter().zip(&h.b_eq) {
        let mut row = e.clone();
        row.push(-f.clone());
        eqs.push(row);
    }
    let cone = cone_h_to_v(dim + 1, &ineqs, &eqs)?;
    let mut points = Vec::new();
    let mut rays = Vec::new();
    let mut lines = Vec::new();
    for mut r in cone.rays {
        let t = r.pop().expect("homogenized ray");
        if t.is_zero() {
            points_or_push(&mut rays, r);
        } else {
            // t > 0 by the -t <= 0 row
            let pt: Vec<Rat> = r.into_iter().map(|c| c / &t).collect();
            points.push(pt);
        }
    }
    for mut l in cone.lines {
        let t = l.pop().expect("homogenized line");
        debug_assert!(t.is_zero(), "lines cannot move the homogenizing coordinate");
        points_or_push(&mut lines, l);
    }
    dedup(&mut points);
    dedup(&mut rays);
    Ok((points, rays, lines))
}

fn points_or_push(out: &mut Vec<Vec<Rat>>, v: Vec<Rat>) {
    if v.iter().any(|c| !c.is_zero()) {
        out.push(v);
    }
}

/// H-form of conv(points) + cone(rays) + span(lines), via homogenization + polar.
pub fn poly_v_to_h(
    dim: usize,
    points: &[Vec<Rat>],
    rays: &[Vec<Rat>],
    lines: &[Vec<Rat>],
) -> Result<HForm> {
    let mut hom = VCone {
        rays: Vec::new(),
        lines: Vec::new(),
    };
    for p in points {
        let mut v = p.clone();
        v.push(Rat::from_integer(1.into()));
        hom.rays.push(v);
    }
    for r in rays {
        let mut v = r.clone();
        v.push(Rat::zero());
        hom.rays.push(v);
    }
    for l in lines {
        let mut v = l.clone();
        v.push(Rat::zero());
        hom.lines.push(v);
    }
    let pol = polar(dim + 1, &hom)?;
    // polar generators (a, c) give rows a.x <= -c; lines give equalities
    let mut h = HForm {
        a_ineq: Vec::new(),
        b_ineq: Vec::new(),
        a_eq: Vec::new(),
        b_eq: Vec::new(),
    };
    for mut g in pol.rays {
        let c = g.pop().expect("polar ray");
        if g.iter().all(|v| v.is_zero()) {
            continue; // row 0.x <= -c with c <= 0: vacuous
        }
        h.a_ineq.push(g);
        h.b_ineq.push(-c);
    }
    for mut g in pol.lines {
        let c = g.pop().expect("polar line");
        if g.iter().all(|v| v.is_zero()) {
            continue;
        }
        h.a_eq.push(g);
        h.b_eq.push(-c);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_int;

    fn v(vals: &[i64]) -> Vec<Rat> {
        vals.iter().map(|&x| rat_int(x)).collect()
    }

    #[test]
    fn octant_h_to_v() {
        // {x : -x1 <= 0, -x2 <= 0} = cone(e1, e2)
        let c = cone_h_to_v(2, &[v(&[-1, 0]), v(&[0, -1])], &[]).unwrap();
        assert_eq!(c.lines.len(), 0);
        let mut rays = c.rays;
        rays.sort();
        assert_eq!(rays, vec![v(&[0, 1]), v(&[1, 0])]);
    }

    #[test]
    fn halfspace_keeps_a_line() {
        let c = cone_h_to_v(2, &[v(&[1, 0])], &[]).unwrap();
        assert_eq!(c.lines.len(), 1);
        assert_eq!(c.rays.len(), 1);
        assert!(c.lines[0][1] != Rat::zero());
        assert!(c.rays[0][0].is_negative());
    }

    #[test]
    fn equality_only_cone() {
        // {x : x1 + x2 = 0} in R^2 -> line (1, -1)
        let c = cone_h_to_v(2, &[], &[v(&[1, 1])]).unwrap();
        assert!(c.rays.is_empty());
        assert_eq!(c.lines.len(), 1);
        assert_eq!(c.lines[0][0], -c.lines[0][1].clone());
    }

    #[test]
    fn trivial_cone() {
        // {x : x1 <= 0, -x1 <= 0, x2 <= 0, -x2 <= 0} = {0}
        let c = cone_h_to_v(
            2,
            &[v(&[1, 0]), v(&[-1, 0]), v(&[0, 1]), v(&[0, -1])],
            &[],
        )
        .unwrap();
        assert!(c.rays.is_empty() && c.lines.is_empty());
    }

    #[test]
    fn box_h_to_v_vertices() {
        // unit square
        let h = HForm {
            a_ineq: vec![v(&[1, 0]), v(&[-1, 0]), v(&[0, 1]), v(&[0, -1])],
            b_ineq: v(&[1, 0, 1, 0]),
            a_eq: vec![],
            b_eq: vec![],
        };
        let (points, rays, lines) = poly_h_to_v(2, &h).unwrap();
        assert_eq!(points.len(), 4);
        assert!(rays.is_empty() && lines.is_empty());
    }

    #[test]
    fn v_to_h_round_trip_on_simplex() {
        let pts = vec![v(&[0, 0]), v(&[1, 0]), v(&[0, 1])];
        let h = poly_v_to_h(2, &pts, &[], &[]).unwrap();
        // all three vertices on the boundary, centroid inside
        for p in &pts {
            assert!(h.contains_rat(p));
        }
        assert!(h.contains_rat(&[crate::rational::rat(1, 4), crate::rational::rat(1, 4)]));
        assert!(!h.contains_rat(&v(&[1, 1])));
        assert!(!h.contains_rat(&v(&[-1, 0])));
    }

    #[test]
    fn v_to_h_cone_with_line() {
        let cone = VCone {
            rays: vec![v(&[1, 0, 0])],
            lines: vec![v(&[0, 1, 0])],
        };
        let h = cone_v_to_h(3, &cone).unwrap();
        assert!(h.contains_rat(&v(&[5, -3, 0])));
        assert!(!h.contains_rat(&v(&[-1, 0, 0])));
        assert!(!h.contains_rat(&v(&[0, 0, 1])));
    }

    #[test]
    fn dimension_cap_enforced() {
        let rows: Vec<Vec<Rat>> = vec![vec![Rat::zero(); 13]];
        assert!(matches!(
            cone_h_to_v(13, &rows, &[]),
            Err(NlqualError::DimensionTooLarge(_))
        ));
    }
}
