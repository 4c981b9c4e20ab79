use super::{Aabb, TriangleMesh, Vec3};

/// Nearest intersection of a ray with a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
}

// Barycentric slack so a ray through a shared edge is not lost to rounding.
const BARY_EPS: f64 = 1e-12;
const PARALLEL_EPS: f64 = 1e-14;

/// Möller–Trumbore test. Returns the ray parameter of a hit with `t > 0`.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPS * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

fn better(t: f64, idx: usize, best: &Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, bi)) => t < *bt || (t == *bt && idx < *bi),
    }
}

/// Brute-force nearest hit over every triangle; ties go to the lowest triangle index.
pub fn ray_cast(mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..mesh.triangles.len() {
        if let Some(t) = ray_triangle(origin, dir, &mesh.triangle(i)) {
            if better(t, i, &best) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, i)| RayHit { point: origin + dir * t, distance: t, triangle: i })
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    // Leaf: `count > 0`, triangles `order[start..start+count]`.
    // Inner: children at `start` and `start + 1` in `nodes`.
    start: usize,
    count: usize,
}

/// Bounding-volume hierarchy over a mesh for fast ray casting.
///
/// Returns the same hit as [`ray_cast`], including the tie-break.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    mesh: TriangleMesh,
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

const LEAF_SIZE: usize = 4;

impl MeshBvh {
    pub fn new(mesh: TriangleMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|i| mesh.triangle(i)).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = vec![BvhNode { bounds: Aabb::empty(), start: 0, count: tris.len() }];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start, nodes[ni].count);
            let slice = &mut order[start..start + count];
            let mut b = Aabb::empty();
            let mut cb = Aabb::empty();
            for &i in slice.iter() {
                for v in &tris[i] {
                    b.grow(v);
                }
                cb.grow(&centroids[i]);
            }
            nodes[ni].bounds = b;
            if count <= LEAF_SIZE {
                continue;
            }
            let ext = cb.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(BvhNode { bounds: Aabb::empty(), start, count: mid });
            nodes.push(BvhNode { bounds: Aabb::empty(), start: start + mid, count: count - mid });
            nodes[ni].start = left;
            nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        Self { mesh, tris, order, nodes }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        if self.tris.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let Some(entry) = slab(&node.bounds, origin, &inv) else { continue };
            if let Some((bt, _)) = best {
                if entry > bt {
                    continue;
                }
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    if let Some(t) = ray_triangle(origin, dir, &self.tris[i]) {
                        if better(t, i, &best) {
                            best = Some((t, i));
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        best.map(|(t, i)| RayHit { point: origin + dir * t, distance: t, triangle: i })
    }
}

/// Entry parameter of the ray into the box, if it intersects at `t >= 0`.
fn slab(b: &Aabb, origin: &Vec3, inv: &Vec3) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let mut lo = (b.min[a] - origin[a]) * inv[a];
        let mut hi = (b.max[a] - origin[a]) * inv[a];
        if lo.is_nan() || hi.is_nan() {
            // Ray parallel to and lying on a slab face.
            if origin[a] < b.min[a] || origin[a] > b.max[a] {
                return None;
            }
            continue;
        }
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        // Pad so rays grazing a face are kept.
        let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()).min(1e12));
        t0 = t0.max(lo - pad);
        t1 = t1.min(hi + pad);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> TriangleMesh {
        TriangleMesh::cuboid(Vec3::repeat(0.5))
    }

    #[test]
    fn hits_cube_bottom_face() {
        let hit = ray_cast(&unit_cube(), &Vec3::new(0.0, 0.0, -10.0), &Vec3::z()).unwrap();
        assert!((hit.point - Vec3::new(0.0, 0.0, -0.5)).norm() < 1e-12);
        assert!((hit.distance - 9.5).abs() < 1e-12);
    }

    #[test]
    fn ray_pointing_away_misses() {
        assert!(ray_cast(&unit_cube(), &Vec3::new(0.0, 0.0, -10.0), &-Vec3::z()).is_none());
    }

    #[test]
    fn shared_edge_resolves_to_lowest_index() {
        // Ray through the diagonal shared by triangles 0 and 1 of the bottom face.
        let mesh = unit_cube();
        let origin = Vec3::new(0.1, 0.1, -10.0);
        let candidates: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&i| ray_triangle(&origin, &Vec3::z(), &mesh.triangle(i)).is_some_and(|t| (t - 9.5).abs() < 1e-12))
            .collect();
        assert_eq!(candidates, vec![0, 1]);
        let hit = ray_cast(&mesh, &origin, &Vec3::z()).unwrap();
        assert_eq!(hit.triangle, 0);
        assert_eq!(MeshBvh::new(mesh).cast(&origin, &Vec3::z()).unwrap().triangle, 0);
    }

    #[test]
    fn hit_lies_on_triangle_plane() {
        let mesh = TriangleMesh::uv_sphere(100.0, 12, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let origin = Vec3::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0), 400.0);
            let dir = (Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), 0.0) - origin).normalize();
            if let Some(hit) = ray_cast(&mesh, &origin, &dir) {
                let [a, b, c] = mesh.triangle(hit.triangle);
                let n = (b - a).cross(&(c - a)).normalize();
                assert!((hit.point - a).dot(&n).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut mesh = TriangleMesh::default();
            for _ in 0..rng.random_range(1..=33) {
                let base = Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
                let off = |rng: &mut ChaCha8Rng| Vec3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
                let tri = TriangleMesh::new(vec![base, base + off(&mut rng), base + off(&mut rng)], vec![[0, 1, 2]]).unwrap();
                mesh.merge(&tri);
            }
            assert!(mesh.triangles.len() <= 100);
            let bvh = MeshBvh::new(mesh.clone());
            for _ in 0..200 {
                let origin = Vec3::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
                let target = Vec3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
                let dir = (target - origin).normalize();
                let a = ray_cast(&mesh, &origin, &dir);
                let b = bvh.cast(&origin, &dir);
                assert_eq!(a.map(|h| (h.triangle, h.distance)), b.map(|h| (h.triangle, h.distance)));
            }
        }
    }
}
