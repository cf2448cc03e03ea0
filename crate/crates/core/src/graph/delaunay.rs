//! Delaunay triangulation of segment centroids.
//!
//! Lexicographic sweep to get an initial triangulation, then Lawson edge
//! flips until every interior edge is locally Delaunay. Orientation and
//! in-circle tests use exact adaptive predicates, so the result does not
//! depend on floating-point luck. Inputs are small (tens of segments per
//! image), the quadratic worst case is irrelevant here.

use std::collections::{BTreeSet, HashMap};

use robust::{incircle, orient2d, Coord};

/// Offset applied per unit of segment id to separate coincident centroids.
pub const DUPLICATE_PERTURBATION_PX: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triangulation {
    /// Counter-clockwise triangles as indices into the input points.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

fn coord(p: (f64, f64)) -> Coord<f64> {
    Coord { x: p.0, y: p.1 }
}

fn orient(p: &[(f64, f64)], a: usize, b: usize, c: usize) -> f64 {
    orient2d(coord(p[a]), coord(p[b]), coord(p[c]))
}

/// Moves every point that shares its exact position with another point by
/// `(eps * id, eps * id)`. Points with unique positions are untouched.
pub fn perturb_duplicates(points: &[(f64, f64)], ids: &[usize]) -> Vec<(f64, f64)> {
    let mut counts: HashMap<(u64, u64), usize> = HashMap::new();
    for p in points {
        *counts.entry((p.0.to_bits(), p.1.to_bits())).or_default() += 1;
    }
    points
        .iter()
        .zip(ids)
        .map(|(&(x, y), &id)| {
            if counts[&(x.to_bits(), y.to_bits())] > 1 {
                let d = DUPLICATE_PERTURBATION_PX * id as f64;
                (x + d, y + d)
            } else {
                (x, y)
            }
        })
        .collect()
}

/// Triangulates `points`. `ids` feed the duplicate perturbation and must be
/// distinct (segment ids within one image are).
///
/// Fewer than three points give the complete graph on them; an all-collinear
/// set gives the path through the points in coordinate order.
pub fn triangulate(points: &[(f64, f64)], ids: &[usize]) -> Triangulation {
    assert_eq!(points.len(), ids.len());
    let n = points.len();
    if n < 2 {
        return Triangulation::default();
    }
    if n == 2 {
        return Triangulation {
            triangles: Vec::new(),
            edges: vec![(0, 1)],
        };
    }
    let pts = perturb_duplicates(points, ids);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .0
            .total_cmp(&pts[b].0)
            .then(pts[a].1.total_cmp(&pts[b].1))
            .then(a.cmp(&b))
    });

    let Some(k) = (2..n).find(|&k| orient(&pts, order[0], order[1], order[k]) != 0.0) else {
        let edges = order
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        return Triangulation {
            triangles: Vec::new(),
            edges,
        };
    };

    // Fan from the first off-line point onto the collinear prefix.
    let apex = order[k];
    let chain = &order[..k];
    let mut triangles = Vec::with_capacity(2 * n);
    for w in chain.windows(2) {
        triangles.push(ccw(&pts, w[0], w[1], apex));
    }
    let mut hull: Vec<usize> = if orient(&pts, chain[0], chain[1], apex) > 0.0 {
        chain.iter().copied().chain([apex]).collect()
    } else {
        chain.iter().rev().copied().chain([apex]).collect()
    };

    // Points later in the sweep cannot lie inside the current hull.
    for &p in &order[k + 1..] {
        let m = hull.len();
        let visible: Vec<bool> = (0..m)
            .map(|i| orient(&pts, hull[i], hull[(i + 1) % m], p) < 0.0)
            .collect();
        let Some(first) = (0..m).find(|&i| visible[i] && !visible[(i + m - 1) % m]) else {
            // Unreachable for distinct points swept in lexicographic order.
            continue;
        };
        let run = (0..m).take_while(|&j| visible[(first + j) % m]).count();
        for j in 0..run {
            let a = hull[(first + j) % m];
            let b = hull[(first + j + 1) % m];
            triangles.push([b, a, p]);
        }
        let mut next = Vec::with_capacity(m - run + 2);
        for j in 0..=(m - run) {
            next.push(hull[(first + run + j) % m]);
        }
        next.push(p);
        hull = next;
    }

    legalize(&pts, &mut triangles);

    let edges = triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Triangulation { triangles, edges }
}

fn ccw(pts: &[(f64, f64)], a: usize, b: usize, c: usize) -> [usize; 3] {
    if orient(pts, a, b, c) > 0.0 {
        [a, b, c]
    } else {
        [a, c, b]
    }
}

/// Lawson flips until no interior edge has its opposite vertex strictly
/// inside the neighbouring circumcircle. Cocircular quads keep the diagonal
/// they already have.
fn legalize(pts: &[(f64, f64)], triangles: &mut [[usize; 3]]) {
    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
    for (ti, t) in triangles.iter().enumerate() {
        for e in 0..3 {
            owner.insert((t[e], t[(e + 1) % 3]), ti);
        }
    }
    let mut stack: Vec<(usize, usize)> = owner
        .keys()
        .filter(|&&(a, b)| a < b)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .rev()
        .collect();

    while let Some((u, v)) = stack.pop() {
        let (Some(&t1), Some(&t2)) = (owner.get(&(u, v)), owner.get(&(v, u))) else {
            continue;
        };
        // t1 = (a, b, c) with directed edge a->b, t2 = (b, a, d).
        let (a, b) = (u, v);
        let c = third(&triangles[t1], a, b);
        let d = third(&triangles[t2], b, a);
        let inside = incircle(coord(pts[a]), coord(pts[b]), coord(pts[c]), coord(pts[d]));
        if inside <= 0.0 {
            continue;
        }
        owner.remove(&(a, b));
        owner.remove(&(b, a));
        triangles[t1] = [a, d, c];
        triangles[t2] = [d, b, c];
        for (x, y, t) in [
            (a, d, t1),
            (d, c, t1),
            (c, a, t1),
            (d, b, t2),
            (b, c, t2),
            (c, d, t2),
        ] {
            owner.insert((x, y), t);
        }
        for (x, y) in [(a, d), (d, b), (b, c), (c, a)] {
            stack.push((x.min(y), x.max(y)));
        }
    }
}

fn third(t: &[usize; 3], a: usize, b: usize) -> usize {
    t.iter()
        .copied()
        .find(|&x| x != a && x != b)
        .expect("triangle has three distinct vertices")
}
