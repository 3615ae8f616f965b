//! Exhaustive enumeration of small rooted planar maps and loop configurations
//! on quadrangulations with a boundary.
//!
//! Maps are generated by canonical polygon gluing: starting from the root side
//! of the boundary polygon, the first unmatched side is glued either to another
//! open side or to side 0 of a fresh polygon. Every rooted map is produced
//! exactly once, with its faces numbered in discovery order.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::rings::ring_gf_coefficients;
use crate::series::{MultiSeries, Rational, SeriesError};

/// Largest number of edges the enumerators accept.
pub const EDGE_CAP: usize = 12;
/// Largest number of internal faces for loop enumeration.
pub const FACE_CAP: usize = 6;

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A map given by its faces as polygons and the side pairing.
#[derive(Clone, Debug)]
pub struct RotationSystem {
    /// Degree of each face; face 0 is the boundary face, containing the root.
    pub face_degrees: Vec<usize>,
    offsets: Vec<usize>,
    face_of: Vec<usize>,
    /// Fixed-point-free involution pairing darts into edges.
    pub alpha: Vec<usize>,
}

impl RotationSystem {
    pub fn darts(&self) -> usize {
        self.alpha.len()
    }

    pub fn edges(&self) -> usize {
        self.alpha.len() / 2
    }

    pub fn faces(&self) -> usize {
        self.face_degrees.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn face_of(&self, d: usize) -> usize {
        self.face_of[d]
    }

    /// First dart of face `f`.
    pub fn face_start(&self, f: usize) -> usize {
        self.offsets[f]
    }

    /// The dart following `d` counterclockwise around its face.
    pub fn next_in_face(&self, d: usize) -> usize {
        let f = self.face_of[d];
        let o = self.offsets[f];
        o + (d - o + 1) % self.face_degrees[f]
    }

    /// Dart order around vertices: σ = φ ∘ α.
    pub fn sigma(&self) -> Vec<usize> {
        (0..self.darts())
            .map(|d| self.next_in_face(self.alpha[d]))
            .collect()
    }

    pub fn vertices(&self) -> usize {
        count_cycles(&self.sigma())
    }

    pub fn genus(&self) -> i64 {
        let chi = self.vertices() as i64 - self.edges() as i64 + self.faces() as i64;
        (2 - chi) / 2
    }

    pub fn is_involution(&self) -> bool {
        self.alpha
            .iter()
            .enumerate()
            .all(|(d, &a)| a != d && a < self.darts() && self.alpha[a] == d)
    }

    pub fn is_bipartite(&self) -> bool {
        self.face_degrees.iter().all(|d| d % 2 == 0)
    }
}

fn count_cycles(p: &[usize]) -> usize {
    let mut seen = vec![false; p.len()];
    let mut cycles = 0;
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        cycles += 1;
        let mut d = s;
        while !seen[d] {
            seen[d] = true;
            d = p[d];
        }
    }
    cycles
}

const OPEN: usize = usize::MAX;

struct Gluer<'a, F: FnMut(&RotationSystem)> {
    map: RotationSystem,
    /// (half-degree, cost) of the polygons that may be added.
    options: &'a [(usize, u32)],
    max_edges: usize,
    visit: F,
}

impl<F: FnMut(&RotationSystem)> Gluer<'_, F> {
    fn push_face(&mut self, degree: usize) {
        let f = self.map.face_degrees.len();
        self.map.offsets.push(self.map.alpha.len());
        self.map.face_degrees.push(degree);
        for _ in 0..degree {
            self.map.alpha.push(OPEN);
            self.map.face_of.push(f);
        }
    }

    fn pop_face(&mut self) {
        let degree = self.map.face_degrees.pop().expect("face to pop");
        self.map.offsets.pop();
        let len = self.map.alpha.len() - degree;
        self.map.alpha.truncate(len);
        self.map.face_of.truncate(len);
    }

    fn run(&mut self, from: usize, budget: u32) {
        let alpha = &self.map.alpha;
        let Some(s) = (from..alpha.len()).find(|&d| alpha[d] == OPEN) else {
            if self.map.genus() == 0 {
                (self.visit)(&self.map);
            }
            return;
        };
        for t in s + 1..self.map.alpha.len() {
            if self.map.alpha[t] != OPEN {
                continue;
            }
            self.map.alpha[s] = t;
            self.map.alpha[t] = s;
            self.run(s + 1, budget);
            self.map.alpha[s] = OPEN;
            self.map.alpha[t] = OPEN;
        }
        for i in 0..self.options.len() {
            let (k, cost) = self.options[i];
            if cost > budget || (self.map.alpha.len() + 2 * k) / 2 > self.max_edges {
                continue;
            }
            self.push_face(2 * k);
            let t = self.map.alpha.len() - 2 * k;
            self.map.alpha[s] = t;
            self.map.alpha[t] = s;
            self.run(s + 1, budget - cost);
            self.map.alpha[s] = OPEN;
            self.pop_face();
        }
    }
}

/// Calls `visit` once for every rooted planar map whose boundary face has
/// degree 2p and whose other faces are polygons from `options`, with total
/// cost at most `budget` and at most `max_edges` edges.
pub fn for_each_map<F: FnMut(&RotationSystem)>(
    p: usize,
    options: &[(usize, u32)],
    budget: u32,
    max_edges: usize,
    visit: F,
) {
    if p == 0 {
        return;
    }
    let mut g = Gluer {
        map: RotationSystem {
            face_degrees: vec![],
            offsets: vec![],
            face_of: vec![],
            alpha: vec![],
        },
        options,
        max_edges,
        visit,
    };
    g.push_face(2 * p);
    g.run(0, budget);
}

/// Counts of rooted bipartite maps with boundary 2p and at most `max_edges`
/// edges, keyed by the sorted list of internal face degrees.
pub fn enumerate_bipartite(
    p: usize,
    max_edges: usize,
) -> Result<BTreeMap<Vec<usize>, u64>, EnumError> {
    if p == 0 {
        return Err(EnumError::Invalid("p must be at least 1".into()));
    }
    if max_edges > EDGE_CAP {
        return Err(EnumError::CapExceeded(format!(
            "max_edges = {max_edges} > {EDGE_CAP}"
        )));
    }
    let options: Vec<(usize, u32)> = (1..=max_edges).map(|k| (k, 0)).collect();
    let mut out = BTreeMap::new();
    for_each_map(p, &options, 0, max_edges, |m| {
        let mut prof: Vec<usize> = m.face_degrees[1..].to_vec();
        prof.sort_unstable();
        *out.entry(prof).or_insert(0) += 1;
    });
    Ok(out)
}

/// Variables of the loop polynomials, in the order used by the series backend.
pub const LOOP_VARS: [&str; 4] = ["n", "g", "h1", "h2"];

/// Face of a quadrangulation crossed by a loop: none, opposite or adjacent sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FaceVisit {
    A,
    B,
    C,
}

/// Covered sides of a square for each admissible visit.
const VISITS: [(FaceVisit, u8); 7] = [
    (FaceVisit::A, 0b0000),
    (FaceVisit::B, 0b0101),
    (FaceVisit::B, 0b1010),
    (FaceVisit::C, 0b0011),
    (FaceVisit::C, 0b0110),
    (FaceVisit::C, 0b1100),
    (FaceVisit::C, 0b1001),
];

/// Loop configurations on a given quadrangulation with boundary: each entry is
/// the exponent vector (#loops, #a, #b, #c) with its multiplicity.
pub fn loop_configurations(m: &RotationSystem, rigid: bool) -> HashMap<[u32; 4], u64> {
    let nf = m.faces();
    let mut covered = vec![false; m.darts()];
    let mut assigned = vec![false; nf];
    assigned[0] = true;
    let mut choice = vec![0usize; nf];
    let mut out = HashMap::new();
    fn rec(
        f: usize,
        m: &RotationSystem,
        rigid: bool,
        covered: &mut Vec<bool>,
        assigned: &mut Vec<bool>,
        choice: &mut Vec<usize>,
        out: &mut HashMap<[u32; 4], u64>,
    ) {
        if f == m.faces() {
            let mut key = [0u32; 4];
            let mut uf: Vec<usize> = (0..m.darts()).collect();
            fn find(uf: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while uf[r] != r {
                    r = uf[r];
                }
                let mut y = x;
                while uf[y] != r {
                    let nx = uf[y];
                    uf[y] = r;
                    y = nx;
                }
                r
            }
            for face in 1..m.faces() {
                let (visit, mask) = VISITS[choice[face]];
                match visit {
                    FaceVisit::A => key[1] += 1,
                    FaceVisit::B => key[2] += 1,
                    FaceVisit::C => key[3] += 1,
                }
                if mask != 0 {
                    let o = m.face_start(face);
                    let ds: Vec<usize> = (0..4)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| o + i)
                        .collect();
                    let e0 = ds[0].min(m.alpha[ds[0]]);
                    let e1 = ds[1].min(m.alpha[ds[1]]);
                    let (a, b) = (find(&mut uf, e0), find(&mut uf, e1));
                    uf[a] = b;
                }
            }
            let mut roots = std::collections::HashSet::new();
            for d in 0..m.darts() {
                if covered[d] && d < m.alpha[d] {
                    roots.insert(find(&mut uf, d));
                }
            }
            key[0] = roots.len() as u32;
            *out.entry(key).or_insert(0) += 1;
            return;
        }
        let o = m.face_start(f);
        for (ci, &(visit, mask)) in VISITS.iter().enumerate() {
            if rigid && visit == FaceVisit::C {
                continue;
            }
            for i in 0..4 {
                covered[o + i] = mask >> i & 1 == 1;
            }
            assigned[f] = true;
            let ok = (0..4).all(|i| {
                let d = o + i;
                let e = m.alpha[d];
                !assigned[m.face_of(e)] || covered[e] == covered[d]
            });
            if ok {
                choice[f] = ci;
                rec(f + 1, m, rigid, covered, assigned, choice, out);
            }
            assigned[f] = false;
            for i in 0..4 {
                covered[o + i] = false;
            }
        }
    }
    rec(
        1,
        m,
        rigid,
        &mut covered,
        &mut assigned,
        &mut choice,
        &mut out,
    );
    out
}

/// F_p^loop restricted to quadrangulations with at most `max_faces` internal
/// faces, as an exact polynomial in (n, g, h1, h2) without truncation.
pub fn enumerate_loops(p: usize, max_faces: usize, rigid: bool) -> Result<MultiSeries, EnumError> {
    if max_faces > FACE_CAP {
        return Err(EnumError::CapExceeded(format!(
            "max_faces = {max_faces} > {FACE_CAP}"
        )));
    }
    let order = 2 * max_faces as u32 + 1;
    let mut s = MultiSeries::zero(&LOOP_VARS, order);
    if p == 0 {
        return Ok(s.one_like());
    }
    let mut acc: HashMap<[u32; 4], u64> = HashMap::new();
    for_each_map(p, &[(2, 1)], max_faces as u32, p + 2 * max_faces, |m| {
        for (k, c) in loop_configurations(m, rigid) {
            *acc.entry(k).or_insert(0) += c;
        }
    });
    for (k, c) in acc {
        s.insert(k.to_vec(), Rational::from_integer(BigInt::from(c)));
    }
    Ok(s)
}

/// Re-expresses a series over (n, g, h1, h2) with unit grading, truncated at
/// `order`. Variables outside that list must not occur.
pub fn in_loop_layout(s: &MultiSeries, order: u32) -> Result<MultiSeries, EnumError> {
    let mut out = MultiSeries::zero(&LOOP_VARS, order);
    let idx: Vec<Option<usize>> = s
        .variables()
        .iter()
        .map(|v| LOOP_VARS.iter().position(|w| w == v))
        .collect();
    for (mono, c) in s.terms() {
        let mut e = vec![0u32; LOOP_VARS.len()];
        for (i, &x) in mono.0.iter().enumerate() {
            match idx[i] {
                Some(j) => e[j] = x,
                None if x == 0 => {}
                None => {
                    return Err(EnumError::Invalid(format!(
                        "variable {} not in the loop layout",
                        s.variables()[i]
                    )))
                }
            }
        }
        if e.iter().sum::<u32>() <= order {
            out.insert(e, c.clone());
        }
    }
    Ok(out)
}

/// Coefficient-wise comparison of two series by variable name, up to total
/// degree `order`. Returns a description of the first mismatch.
pub fn first_mismatch(a: &MultiSeries, b: &MultiSeries, order: u32) -> Option<String> {
    let named = |s: &MultiSeries| -> BTreeMap<Vec<(String, u32)>, Rational> {
        let mut out = BTreeMap::new();
        for (mono, c) in s.terms() {
            let key: Vec<(String, u32)> = s
                .variables()
                .iter()
                .zip(&mono.0)
                .filter(|(_, &e)| e > 0)
                .map(|(v, &e)| (v.clone(), e))
                .collect();
            if key.iter().map(|(_, e)| e).sum::<u32>() <= order {
                out.insert(key, c.clone());
            }
        }
        out
    };
    let (ma, mb) = (named(a), named(b));
    let zero = Rational::from_integer(0.into());
    for key in ma.keys().chain(mb.keys()) {
        let ca = ma.get(key).unwrap_or(&zero);
        let cb = mb.get(key).unwrap_or(&zero);
        if ca != cb {
            return Some(format!("{key:?}: {ca} vs {cb}"));
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub order: u32,
    pub rigid: bool,
    /// Boundary half-lengths checked.
    pub boundaries: Vec<usize>,
    pub coefficients_checked: usize,
    pub failure: Option<String>,
}

impl FixedPointReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Counting-level check of the gasket decomposition: for p = 1, 2 the loop
/// polynomial F_p^loop enumerated directly equals Σ over enumerated bipartite
/// maps of Π g_k, with g_k = g δ_{k,2} + n Σ_{k'} A_{k,k'} F_{k'}^loop and
/// F_{k'}^loop again enumerated.
pub fn verify_fixed_point_order(order: u32, rigid: bool) -> Result<FixedPointReport, EnumError> {
    if order == 0 || order > 4 {
        return Err(EnumError::Invalid(format!("order {order} outside 1..=4")));
    }
    let of = order as usize;
    let zero = MultiSeries::zero(&LOOP_VARS, order);
    // A_{k,k'} F_{k'} has degree at least k + k' + 1, so k' <= order - 2 suffices.
    let pmax = of.saturating_sub(2).max(2);
    let floop: Vec<MultiSeries> = (0..=pmax)
        .map(|p| enumerate_loops(p, of, rigid).map(|s| s.truncate(order)))
        .collect::<Result<_, _>>()?;
    let floop: Vec<MultiSeries> = floop
        .iter()
        .map(|s| in_loop_layout(s, order))
        .collect::<Result<_, _>>()?;
    let n = zero.var_like("n")?;
    let g = zero.var_like("g")?;
    let h1 = zero.var_like("h1")?;
    let h2 = zero.var_like("h2")?;
    // face weights g_k, k = 1..=order
    let mut gk = vec![zero.clone(); of + 1];
    for k in 1..=of {
        let mut acc = if k == 2 { g.clone() } else { zero.clone() };
        for kp in 0..=pmax {
            let ring = if rigid {
                if kp == k {
                    h1.pow(2 * k as u32)
                } else {
                    continue;
                }
            } else {
                let mut r = zero.clone();
                for (j, c) in ring_gf_coefficients(k, kp) {
                    r = r.add(
                        &h1.pow(2 * j as u32)
                            .mul(&h2.pow((k + kp - 2 * j) as u32))?
                            .scale(&c),
                    )?;
                }
                r
            };
            acc = acc.add(&n.mul(&ring)?.mul(&floop[kp])?)?;
        }
        gk[k] = acc;
    }
    let options: Vec<(usize, u32)> = (1..=of)
        .filter_map(|k| gk[k].valuation().map(|v| (k, v.max(1))))
        .collect();
    let mut checked = 0;
    for p in 1..=2usize {
        let mut rhs = zero.clone();
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for_each_map(p, &options, order, EDGE_CAP, |m| {
            let mut prof: Vec<usize> = m.face_degrees[1..].iter().map(|d| d / 2).collect();
            prof.sort_unstable();
            *counts.entry(prof).or_insert(0) += 1;
        });
        for (prof, c) in counts {
            let mut term = zero.constant_like(Rational::from_integer(BigInt::from(c)));
            for k in prof {
                term = term.mul(&gk[k])?;
            }
            rhs = rhs.add(&term)?;
        }
        checked += floop[p].len().max(rhs.len());
        if let Some(msg) = first_mismatch(&floop[p], &rhs, order) {
            return Ok(FixedPointReport {
                order,
                rigid,
                boundaries: (1..=p).collect(),
                coefficients_checked: checked,
                failure: Some(format!("p = {p}: {msg}")),
            });
        }
    }
    Ok(FixedPointReport {
        order,
        rigid,
        boundaries: vec![1, 2],
        coefficients_checked: checked,
        failure: None,
    })
}
