use crate::geometry::Vec3;

const LEAF: usize = 8;

/// Exact nearest-neighbour index over a fixed set of points.
///
/// Balanced by median splits on the axis of largest spread. Queries are
/// exact; ties on distance resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self { points: points.to_vec(), order: (0..points.len()).collect(), axis: vec![0; points.len()] };
        tree.build(0, points.len());
        tree
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF {
            return;
        }
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[lo..hi] {
            min = min.inf(&self.points[i]);
            max = max.sup(&self.points[i]);
        }
        let ext = max - min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
        let mid = (lo + hi) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        self.axis[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index and distance of the nearest stored point. Panics on an empty tree.
    pub fn nearest(&self, query: &Vec3) -> (usize, f64) {
        assert!(!self.is_empty(), "nearest() on an empty KdTree");
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(0, self.len(), query, &mut best);
        (best.1, best.0.sqrt())
    }

    fn search(&self, lo: usize, hi: usize, q: &Vec3, best: &mut (f64, usize)) {
        let consider = |i: usize, best: &mut (f64, usize)| {
            let d2 = (self.points[i] - q).norm_squared();
            if d2 < best.0 || (d2 == best.0 && i < best.1) {
                *best = (d2, i);
            }
        };
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                consider(i, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        consider(i, best);
        let axis = self.axis[mid] as usize;
        let diff = q[axis] - self.points[i][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, q, best);
        if diff * diff <= best.0 {
            self.search(far.0, far.1, q, best);
        }
    }

    /// Calls `visit(index, squared_distance)` for every point within `radius` (inclusive).
    pub fn for_each_within(&self, query: &Vec3, radius: f64, mut visit: impl FnMut(usize, f64)) {
        if self.is_empty() {
            return;
        }
        self.within(0, self.len(), query, radius * radius, &mut visit);
    }

    fn within(&self, lo: usize, hi: usize, q: &Vec3, r2: f64, visit: &mut impl FnMut(usize, f64)) {
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                let d2 = (self.points[i] - q).norm_squared();
                if d2 <= r2 {
                    visit(i, d2);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = (self.points[i] - q).norm_squared();
        if d2 <= r2 {
            visit(i, d2);
        }
        let axis = self.axis[mid] as usize;
        let diff = q[axis] - self.points[i][axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within(lo, mid, q, r2, visit);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within(mid + 1, hi, q, r2, visit);
        }
    }

    /// Indices within `radius`, sorted ascending.
    pub fn radius_search(&self, query: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(query, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)))
            .collect()
    }

    #[test]
    fn stored_point_is_its_own_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 500);
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(p), (i, 0.0));
        }
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 10_000);
        let tree = KdTree::new(&pts);
        for _ in 0..1000 {
            let q = Vec3::new(rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0));
            assert_eq!(tree.nearest(&q), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn equidistant_pair_returns_lower_index() {
        let mut pts: Vec<Vec3> = (0..50).map(|i| Vec3::new(1000.0 + i as f64, 0.0, 0.0)).collect();
        pts.push(Vec3::new(1.0, 0.0, 0.0));
        pts.push(Vec3::new(-1.0, 0.0, 0.0));
        pts.reverse();
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vec3::zeros()), (0, 1.0));
        // Same pair in the other order.
        pts.swap(0, 1);
        assert_eq!(KdTree::new(&pts).nearest(&Vec3::zeros()), (0, 1.0));
    }

    #[test]
    fn radius_search_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 3000);
        let tree = KdTree::new(&pts);
        for _ in 0..100 {
            let q = pts[rng.random_range(0..pts.len())];
            let got = tree.radius_search(&q, 15.0);
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= 15.0).collect();
            assert_eq!(got, want);
        }
    }
}
