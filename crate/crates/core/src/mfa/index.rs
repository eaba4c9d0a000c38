//! Exact closed-ball counting with a k-d tree.
//!
//! Besides single-radius queries the tree answers "mass of `B_r(x)` for every
//! `r` in a sorted list" in one traversal: a node whose bounding box lies
//! entirely inside a radius (or entirely outside) is resolved without
//! visiting its points, so the cost tracks the number of ball boundaries
//! crossing the tree rather than the number of enclosed points.
//!
//! All comparisons are `d² ≤ r²` with `d²` summed in coordinate order, the
//! same arithmetic as [`brute_force_count`]; the box bounds are monotone in
//! each coordinate under rounding, so pruning never changes a result.

use crate::cloud::PointCloud;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    mass: f64,
    children: Option<(usize, usize)>,
}

/// Immutable spatial index over a [`PointCloud`]; safe to share across threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    nodes: Vec<Node>,
    /// Coordinates in tree order.
    coords: Vec<f64>,
    weights: Vec<f64>,
    /// Tree position -> original sample index.
    order: Vec<usize>,
    /// Original sample weights in sample order.
    sample_weights: Vec<f64>,
    sample_coords: Vec<f64>,
    uniform: bool,
}

/// Per-radius tallies for one centre: counts and masses of the closed balls.
#[derive(Debug, Clone, PartialEq)]
pub struct BallTallies {
    pub counts: Vec<u64>,
    pub masses: Vec<f64>,
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Reference count of sample points with `|x - c| ≤ r`.
pub fn brute_force_count(cloud: &PointCloud, center: &[f64], r: f64) -> usize {
    let r2 = r * r;
    cloud.points().filter(|p| dist_sq(center, p) <= r2).count()
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let dim = cloud.dim();
        let n = cloud.len();
        let mut order: Vec<usize> = (0..n).collect();
        let sample_weights = cloud.weight_vec();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(cloud, &sample_weights, &mut order, 0, n, &mut nodes);
        }
        let mut coords = Vec::with_capacity(n * dim);
        let mut weights = Vec::with_capacity(n);
        for &i in &order {
            coords.extend_from_slice(cloud.point(i));
            weights.push(sample_weights[i]);
        }
        Self {
            dim,
            nodes,
            coords,
            weights,
            order,
            sample_weights,
            sample_coords: cloud.coords().to_vec(),
            uniform: cloud.is_uniform(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.sample_coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn sample_weight(&self, i: usize) -> f64 {
        self.sample_weights[i]
    }

    /// Whether `x` lies in the closed bounding box of the samples.
    pub fn box_contains(&self, x: &[f64]) -> bool {
        self.nodes.first().is_some_and(|root| {
            x.iter()
                .zip(root.lo.iter().zip(&root.hi))
                .all(|(v, (a, b))| v >= a && v <= b)
        })
    }

    /// Number of sample points in the closed ball `B_r(center)`.
    pub fn count_ball(&self, center: &[f64], r: f64) -> usize {
        self.tallies(center, &[r], None).counts[0] as usize
    }

    /// Total weight of the closed ball `B_r(center)`.
    pub fn mass_ball(&self, center: &[f64], r: f64) -> f64 {
        self.tallies(center, &[r], None).masses[0]
    }

    /// Counts and masses of `B_r(center)` for each radius in `radii_asc`
    /// (non-decreasing). `exclude = Some((i, w))` removes samples `j` with
    /// `|i - j| < w` (sample order) from every tally.
    pub fn tallies(&self, center: &[f64], radii_asc: &[f64], exclude: Option<(usize, usize)>) -> BallTallies {
        let r2: Vec<f64> = radii_asc.iter().map(|r| r * r).collect();
        let k = r2.len();
        let mut dc = vec![0i64; k + 1];
        let mut dm = vec![0.0f64; k + 1];
        if !self.nodes.is_empty() {
            self.visit(0, center, &r2, &mut dc, &mut dm);
        }
        if let Some((i, w)) = exclude {
            if w > 0 {
                let lo = i.saturating_sub(w - 1);
                let hi = (i + w).min(self.len());
                for j in lo..hi {
                    let d2 = dist_sq(center, self.sample(j));
                    let bin = r2.partition_point(|&r| r < d2);
                    dc[bin] -= 1;
                    dm[bin] -= self.sample_weights[j];
                }
            }
        }
        let n = self.len() as f64;
        let mut counts = Vec::with_capacity(k);
        let mut masses = Vec::with_capacity(k);
        let (mut c, mut m) = (0i64, 0.0);
        for b in 0..k {
            c += dc[b];
            m += dm[b];
            counts.push(c as u64);
            masses.push(if c == 0 {
                0.0
            } else if self.uniform {
                c as f64 / n
            } else {
                m.max(0.0)
            });
        }
        BallTallies { counts, masses }
    }

    fn visit(&self, id: usize, center: &[f64], r2: &[f64], dc: &mut [i64], dm: &mut [f64]) {
        let node = &self.nodes[id];
        let (mut dmin, mut dmax) = (0.0, 0.0);
        for d in 0..self.dim {
            let c = center[d];
            let (a, b) = (node.lo[d], node.hi[d]);
            let near = if c < a {
                a - c
            } else if c > b {
                c - b
            } else {
                0.0
            };
            let far = (c - a).abs().max((c - b).abs());
            dmin += near * near;
            dmax += far * far;
        }
        let j0 = r2.partition_point(|&r| r < dmin);
        if j0 == r2.len() {
            return;
        }
        let j1 = r2.partition_point(|&r| r < dmax);
        if j0 == j1 {
            dc[j1] += (node.end - node.start) as i64;
            dm[j1] += node.mass;
            return;
        }
        match node.children {
            Some((l, r)) => {
                self.visit(l, center, r2, dc, dm);
                self.visit(r, center, r2, dc, dm);
            }
            None => {
                for p in node.start..node.end {
                    let d2 = dist_sq(center, &self.coords[p * self.dim..(p + 1) * self.dim]);
                    let bin = r2.partition_point(|&r| r < d2);
                    dc[bin] += 1;
                    dm[bin] += self.weights[p];
                }
            }
        }
    }
}

fn build_node(
    cloud: &PointCloud,
    weights: &[f64],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let dim = cloud.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut mass = 0.0;
    for &i in &order[start..end] {
        let p = cloud.point(i);
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
        mass += weights[i];
    }
    let id = nodes.len();
    nodes.push(Node {
        lo: lo.clone(),
        hi: hi.clone(),
        start,
        end,
        mass,
        children: None,
    });
    let (axis, spread) = (0..dim)
        .map(|d| (d, hi[d] - lo[d]))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if end - start <= LEAF_SIZE || spread <= 0.0 {
        return id;
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis])
    });
    let left = build_node(cloud, weights, order, start, mid, nodes);
    let right = build_node(cloud, weights, order, mid, end, nodes);
    nodes[id].children = Some((left, right));
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let coords = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        PointCloud::uniform(dim, coords, "rand").unwrap()
    }

    #[test]
    fn matches_brute_force_on_random_queries() {
        let cloud = random_cloud(1000, 2, 1);
        let index = NeighborIndex::build(&cloud);
        let mut rng = crate::rng::stream_rng(2, 0);
        for _ in 0..50 {
            let c = [rng.gen::<f64>(), rng.gen::<f64>()];
            let r = rng.gen::<f64>() * 0.4;
            assert_eq!(index.count_ball(&c, r), brute_force_count(&cloud, &c, r));
        }
    }

    #[test]
    fn single_point_and_coincident_points() {
        let one = PointCloud::uniform(2, vec![0.3, 0.7], "one").unwrap();
        let idx = NeighborIndex::build(&one);
        assert_eq!(idx.count_ball(&[0.3, 0.7], 1e-9), 1);
        let two = PointCloud::uniform(2, vec![0.3, 0.7, 0.3, 0.7], "two").unwrap();
        let idx = NeighborIndex::build(&two);
        assert_eq!(idx.count_ball(&[0.3, 0.7], 0.0), 2);
        assert!((idx.mass_ball(&[0.3, 0.7], 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn multi_radius_tallies_are_cumulative() {
        let cloud = random_cloud(500, 3, 3);
        let idx = NeighborIndex::build(&cloud);
        let radii: Vec<f64> = (1..=20).map(|k| k as f64 * 0.03).collect();
        let c = cloud.point(17).to_vec();
        let t = idx.tallies(&c, &radii, None);
        for (k, r) in radii.iter().enumerate() {
            assert_eq!(t.counts[k] as usize, brute_force_count(&cloud, &c, *r));
        }
        let ex = idx.tallies(&c, &radii, Some((17, 3)));
        for k in 0..radii.len() {
            let expected = (0..cloud.len())
                .filter(|j| (*j as i64 - 17).abs() >= 3)
                .filter(|j| dist_sq(&c, cloud.point(*j)) <= radii[k] * radii[k])
                .count();
            assert_eq!(ex.counts[k] as usize, expected);
        }
    }
}
