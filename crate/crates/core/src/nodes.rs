//! Point sets shared by every stage of the solver.

use crate::error::{input, Result};
use crate::spatial::PointIndex;

/// What a node set is used for. Fixed when the set is created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    RbfCenters,
    InteriorEval,
    BoundaryEval,
    Probe,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::RbfCenters => "rbf-centers",
            Role::InteriorEval => "interior-eval",
            Role::BoundaryEval => "boundary-eval",
            Role::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "rbf-centers" => Some(Role::RbfCenters),
            "interior-eval" => Some(Role::InteriorEval),
            "boundary-eval" => Some(Role::BoundaryEval),
            "probe" => Some(Role::Probe),
            _ => None,
        }
    }
}

/// Minimum separation below which two points count as duplicates.
pub const DISTINCT_TOL: f64 = 1e-12;

/// A list of points in `dim` dimensions stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    role: Role,
    fill_distance: Option<f64>,
}

impl NodeSet {
    /// Builds a node set, rejecting duplicated points.
    pub fn new(dim: usize, coords: Vec<f64>, role: Role) -> Result<Self> {
        let set = Self::new_unchecked(dim, coords, role)?;
        if let Some((i, j)) = set.find_duplicate() {
            return input(format!("node set has coincident points {i} and {j}"));
        }
        Ok(set)
    }

    /// Builds a node set without the duplicate scan; only the shape is checked.
    pub fn new_unchecked(dim: usize, coords: Vec<f64>, role: Role) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return input(format!(
                "coordinate array of length {} does not hold {dim}-dimensional points",
                coords.len()
            ));
        }
        Ok(NodeSet {
            dim,
            coords,
            role,
            fill_distance: None,
        })
    }

    pub fn empty(dim: usize, role: Role) -> Self {
        NodeSet {
            dim,
            coords: Vec::new(),
            role,
            fill_distance: None,
        }
    }

    pub fn with_fill_distance(mut self, h: f64) -> Self {
        self.fill_distance = Some(h);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn fill_distance(&self) -> Option<f64> {
        self.fill_distance
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Returns a copy carrying a different role.
    pub fn relabel(&self, role: Role) -> NodeSet {
        NodeSet {
            role,
            ..self.clone()
        }
    }

    /// Pair of indices closer than [`DISTINCT_TOL`], if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        if self.len() < 2 {
            return None;
        }
        let index = PointIndex::new(self.dim, &self.coords, None);
        for i in 0..self.len() {
            let mut hit = None;
            index.for_each_within(self.point(i), DISTINCT_TOL, |j, _| {
                if j != i && hit.is_none() {
                    hit = Some(j);
                }
            });
            if let Some(j) = hit {
                return Some((i.min(j), i.max(j)));
            }
        }
        None
    }

    /// Smallest pairwise distance, by brute force.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(distance(self.point(i), self.point(j)));
            }
        }
        best
    }
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
