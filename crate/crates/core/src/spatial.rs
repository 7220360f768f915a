//! Uniform bucket grid for radius and nearest-neighbour queries.

use std::collections::HashMap;

use crate::nodes::distance;

type Cell = [i64; 3];

/// Static spatial hash over a point array.
#[derive(Debug, Clone)]
pub struct PointIndex {
    dim: usize,
    coords: Vec<f64>,
    cell: f64,
    buckets: HashMap<Cell, Vec<usize>>,
}

impl PointIndex {
    /// `cell` defaults to a size giving a few points per bucket.
    pub fn new(dim: usize, coords: &[f64], cell: Option<f64>) -> Self {
        let n = coords.len() / dim;
        let cell = cell.unwrap_or_else(|| auto_cell(dim, coords)).max(1e-300);
        let mut buckets: HashMap<Cell, Vec<usize>> = HashMap::with_capacity(n);
        for i in 0..n {
            let key = key_of(&coords[i * dim..(i + 1) * dim], cell);
            buckets.entry(key).or_default().push(i);
        }
        PointIndex {
            dim,
            coords: coords.to_vec(),
            cell,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Calls `f(index, distance)` for every point with distance `< radius`.
    pub fn for_each_within(&self, x: &[f64], radius: f64, mut f: impl FnMut(usize, f64)) {
        let reach = (radius / self.cell).ceil() as i64;
        let center = key_of(x, self.cell);
        self.visit_block(center, reach, |i| {
            let d = distance(x, self.point(i));
            if d < radius {
                f(i, d);
            }
        });
    }

    /// Indices within `radius`, sorted ascending.
    pub fn within(&self, x: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(x, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Nearest point and its distance. Ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let center = key_of(x, self.cell);
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 0i64;
        loop {
            self.visit_shell(center, ring, |i| {
                let d = distance(x, self.point(i));
                match best {
                    Some((bi, bd)) if d > bd || (d == bd && i > bi) => {}
                    _ => best = Some((i, d)),
                }
            });
            // Every unvisited point is at least `ring * cell` away.
            if let Some((_, bd)) = best {
                if bd <= ring as f64 * self.cell {
                    return best;
                }
            }
            ring += 1;
            if ring > 32 {
                // Far from every bucket: a linear scan is cheaper.
                return self.nearest_brute(x);
            }
        }
    }

    fn nearest_brute(&self, x: &[f64]) -> Option<(usize, f64)> {
        (0..self.len())
            .map(|i| (i, distance(x, self.point(i))))
            .fold(None, |best, (i, d)| match best {
                Some((_, bd)) if d >= bd => best,
                _ => Some((i, d)),
            })
    }

    fn visit_block(&self, center: Cell, reach: i64, mut f: impl FnMut(usize)) {
        let r = |k: usize| if k < self.dim { reach } else { 0 };
        for a in -r(0)..=r(0) {
            for b in -r(1)..=r(1) {
                for c in -r(2)..=r(2) {
                    let key = [center[0] + a, center[1] + b, center[2] + c];
                    if let Some(list) = self.buckets.get(&key) {
                        list.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }

    fn visit_shell(&self, center: Cell, ring: i64, mut f: impl FnMut(usize)) {
        let r = |k: usize| if k < self.dim { ring } else { 0 };
        for a in -r(0)..=r(0) {
            for b in -r(1)..=r(1) {
                for c in -r(2)..=r(2) {
                    let m = a.abs().max(b.abs()).max(c.abs());
                    if m != ring {
                        continue;
                    }
                    let key = [center[0] + a, center[1] + b, center[2] + c];
                    if let Some(list) = self.buckets.get(&key) {
                        list.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}

fn key_of(x: &[f64], cell: f64) -> Cell {
    let mut k = [0i64; 3];
    for (slot, v) in k.iter_mut().zip(x) {
        *slot = (v / cell).floor() as i64;
    }
    k
}

fn auto_cell(dim: usize, coords: &[f64]) -> f64 {
    let n = coords.len() / dim;
    if n == 0 {
        return 1.0;
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in coords.chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let vol: f64 = (0..dim).map(|k| (hi[k] - lo[k]).max(1e-9)).product();
    let per_point = vol / n as f64 * 2.0;
    let cell = per_point.powf(1.0 / dim as f64);
    let span = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if span == 0.0 {
        return 1.0;
    }
    if cell.is_finite() && cell > 0.0 {
        cell.max(span * 1e-6).max(1e-12)
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_brute_force() {
        let pts: Vec<f64> = (0..200)
            .flat_map(|i| {
                let t = i as f64 * 0.7;
                [t.sin() * 3.0, (t * 1.3).cos() * 2.0]
            })
            .collect();
        let index = PointIndex::new(2, &pts, None);
        for q in [[0.1, 0.2], [5.0, -4.0], [-2.9, 1.7]] {
            let (i, d) = index.nearest(&q).unwrap();
            let brute = pts
                .chunks(2)
                .map(|p| distance(p, &q))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d, brute);
            assert_eq!(distance(&pts[2 * i..2 * i + 2], &q), d);
        }
    }

    #[test]
    fn radius_query_is_exact() {
        let pts: Vec<f64> = (0..10).flat_map(|i| [i as f64, 0.0, 0.0]).collect();
        let index = PointIndex::new(3, &pts, Some(0.3));
        assert_eq!(index.within(&[4.0, 0.0, 0.0], 2.0), vec![3, 4, 5]);
    }
}
