//! Face-level bounding volume hierarchy for nearest-surface queries.

use crate::geometry::{point_triangle_distance_sq, Aabb, Vec3};

const LEAF_SIZE: usize = 4;

struct Node {
    bounds: Aabb,
    /// Leaf: `[first, first + count)` into `tris`. Inner nodes have
    /// `count == 0`, the left child directly after them and the right child
    /// at `right`.
    first: u32,
    count: u32,
    right: u32,
}

pub(crate) struct TriangleBvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3; 3]>,
}

impl TriangleBvh {
    pub fn build(tris: Vec<[Vec3; 3]>) -> Self {
        let mut items: Vec<(Aabb, Vec3, [Vec3; 3])> = tris
            .into_iter()
            .map(|t| {
                let b = Aabb::from_points(&t).expect("three points");
                (b, (t[0] + t[1] + t[2]) / 3.0, t)
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * items.len() / LEAF_SIZE + 1);
        if !items.is_empty() {
            let n = items.len();
            Self::split(&mut items, 0, n, &mut nodes);
        }
        Self {
            nodes,
            tris: items.into_iter().map(|(_, _, t)| t).collect(),
        }
    }

    fn split(
        items: &mut [(Aabb, Vec3, [Vec3; 3])],
        lo: usize,
        hi: usize,
        nodes: &mut Vec<Node>,
    ) -> u32 {
        let slice = &mut items[lo..hi];
        let bounds = slice
            .iter()
            .skip(1)
            .fold(slice[0].0, |acc, (b, _, _)| acc.union(b));
        let idx = nodes.len() as u32;
        nodes.push(Node {
            bounds,
            first: lo as u32,
            count: (hi - lo) as u32,
            right: 0,
        });
        if hi - lo <= LEAF_SIZE {
            return idx;
        }
        let cb = Aabb::from_points(slice.iter().map(|(_, c, _)| c)).expect("nonempty");
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (hi - lo) / 2;
        slice.select_nth_unstable_by(mid, |a, b| a.1[axis].total_cmp(&b.1[axis]));
        Self::split(items, lo, lo + mid, nodes);
        let right = Self::split(items, lo + mid, hi, nodes);
        let node = &mut nodes[idx as usize];
        node.count = 0;
        node.right = right;
        idx
    }

    /// Squared distance from `p` to the nearest triangle, searching only
    /// below `bound_sq` (returned unchanged when nothing is closer).
    pub fn nearest_distance_sq(&self, p: &Vec3, bound_sq: f64) -> f64 {
        let mut best = bound_sq;
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance_sq(p) >= best {
                continue;
            }
            if node.count > 0 {
                let first = node.first as usize;
                for t in &self.tris[first..first + node.count as usize] {
                    let d = point_triangle_distance_sq(p, &t[0], &t[1], &t[2]);
                    if d < best {
                        best = d;
                    }
                }
            } else {
                let left = ni + 1;
                let right = node.right;
                let dl = self.nodes[left as usize].bounds.distance_sq(p);
                let dr = self.nodes[right as usize].bounds.distance_sq(p);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(right);
                    stack.push(left);
                } else {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        best
    }
}
