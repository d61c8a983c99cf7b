//! Finite boxes in the integer lattice, tiles and boundary layers.
//!
//! Sites are integer vectors. A [`LatticeBox`] fixes a row-major numbering of
//! its sites (the last coordinate varies fastest), which every matrix builder
//! in the crate uses as its basis order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Site = Vec<i64>;

/// Rectangular box `[lower, upper]` (inclusive) in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    lower: Vec<i64>,
    upper: Vec<i64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl LatticeBox {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::domain("box dimension must be positive"));
        }
        if lower.len() != upper.len() {
            return Err(Error::SizeMismatch { expected: lower.len(), got: upper.len() });
        }
        if let Some(axis) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::domain(format!(
                "box lower bound exceeds upper bound on axis {axis}"
            )));
        }
        let extents: Vec<usize> =
            lower.iter().zip(&upper).map(|(l, u)| (u - l + 1) as usize).collect();
        let mut strides = vec![1usize; extents.len()];
        for i in (0..extents.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * extents[i + 1];
        }
        Ok(Self { lower, upper, strides })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.upper[axis] - self.lower[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim()
            && site.iter().enumerate().all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        Some(
            site.iter()
                .enumerate()
                .map(|(i, &x)| (x - self.lower[i]) as usize * self.strides[i])
                .sum(),
        )
    }

    pub fn site(&self, index: usize) -> Site {
        assert!(index < self.len(), "site index {index} out of range");
        let mut rest = index;
        self.strides
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let q = rest / s;
                rest %= s;
                self.lower[i] + q as i64
            })
            .collect()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }

    /// Index offset between a site and its `+e_axis` neighbour.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// `l^1` neighbours of `site` that lie inside the box.
    pub fn neighbors(&self, site: &[i64]) -> Result<Vec<Site>> {
        if !self.contains(site) {
            return Err(Error::domain(format!("site {site:?} is outside the box")));
        }
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            for step in [-1, 1] {
                let mut k = site.to_vec();
                k[axis] += step;
                if self.contains(&k) {
                    out.push(k);
                }
            }
        }
        Ok(out)
    }

    /// Same as [`neighbors`](Self::neighbors) but in index space.
    pub fn neighbor_indices(&self, index: usize) -> Vec<usize> {
        let site = self.site(index);
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            if site[axis] > self.lower[axis] {
                out.push(index - self.strides[axis]);
            }
            if site[axis] < self.upper[axis] {
                out.push(index + self.strides[axis]);
            }
        }
        out
    }
}

pub fn enumerate_sites(b: &LatticeBox) -> Vec<Site> {
    b.sites().collect()
}

/// Tiling of `Z^d` by translates `C_m = C_0 + (m_1 L_1, ..., m_d L_d)` of the
/// base tile `C_0 = {0..L_1-1} x ... x {0..L_d-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGeometry {
    period: Vec<i64>,
}

impl TileGeometry {
    pub fn new(period: Vec<i64>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::domain("tile period must have at least one axis"));
        }
        if period.iter().any(|&l| l <= 0) {
            return Err(Error::domain("tile periods must be positive"));
        }
        Ok(Self { period })
    }

    pub fn dim(&self) -> usize {
        self.period.len()
    }

    pub fn period(&self) -> &[i64] {
        &self.period
    }

    pub fn tile_size(&self) -> usize {
        self.period.iter().product::<i64>() as usize
    }

    /// The base tile `C_0` as a box.
    pub fn base_tile(&self) -> LatticeBox {
        LatticeBox::new(vec![0; self.dim()], self.period.iter().map(|l| l - 1).collect())
            .expect("periods are positive")
    }

    pub fn tile_of(&self, site: &[i64]) -> Vec<i64> {
        site.iter().zip(&self.period).map(|(&x, &l)| x.div_euclid(l)).collect()
    }

    pub fn offset(&self, tile: &[i64]) -> Site {
        tile.iter().zip(&self.period).map(|(&m, &l)| m * l).collect()
    }

    /// Position of `site` inside its own tile, as a row-major index into `C_0`.
    pub fn local_index(&self, site: &[i64]) -> usize {
        let local: Vec<i64> = site.iter().zip(&self.period).map(|(&x, &l)| x.rem_euclid(l)).collect();
        self.base_tile().index_of(&local).expect("local coordinate lies in C_0")
    }

    /// Sites of `C_m` in row-major order.
    pub fn tile(&self, tile: &[i64]) -> LatticeBox {
        let lower = self.offset(tile);
        let upper = lower.iter().zip(&self.period).map(|(x, l)| x + l - 1).collect();
        LatticeBox::new(lower, upper).expect("tile bounds are ordered")
    }

    /// Tiles meeting the box, sorted lexicographically.
    pub fn tiles_in(&self, b: &LatticeBox) -> Vec<Vec<i64>> {
        let lo = self.tile_of(b.lower());
        let hi = self.tile_of(b.upper());
        LatticeBox::new(lo, hi).expect("tile range ordered").sites().collect()
    }

    pub fn are_neighbors(a: &[i64], b: &[i64]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).filter(|(x, y)| x != y).count() == 1
            && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1)
    }
}

fn linf_distance(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Partition of the tiles meeting a box into an inner set, the shell of tiles
/// at `l^inf` tile-distance one from it, and everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLayer {
    pub inner: Vec<Vec<i64>>,
    pub layer: Vec<Vec<i64>>,
    pub exterior: Vec<Vec<i64>>,
}

impl BoundaryLayer {
    pub fn around(geom: &TileGeometry, ambient: &LatticeBox, inner: &[Vec<i64>]) -> Self {
        let inner_set: BTreeSet<Vec<i64>> = inner.iter().cloned().collect();
        let mut layer = Vec::new();
        let mut exterior = Vec::new();
        for m in geom.tiles_in(ambient) {
            if inner_set.contains(&m) {
                continue;
            }
            if inner_set.iter().any(|c| linf_distance(c, &m) == 1) {
                layer.push(m);
            } else {
                exterior.push(m);
            }
        }
        Self { inner: inner_set.into_iter().collect(), layer, exterior }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_small_boxes() {
        let b = LatticeBox::new(vec![0], vec![2]).unwrap();
        assert_eq!(enumerate_sites(&b), vec![vec![0], vec![1], vec![2]]);
        let b = LatticeBox::cube(2, 0, 1).unwrap();
        assert_eq!(enumerate_sites(&b), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let b = LatticeBox::new(vec![3, -2], vec![3, -2]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(enumerate_sites(&b), vec![vec![3, -2]]);
    }

    #[test]
    fn invalid_boxes() {
        assert!(LatticeBox::new(vec![1], vec![0]).is_err());
        assert!(LatticeBox::new(vec![], vec![]).is_err());
        assert!(LatticeBox::new(vec![0, 0], vec![1]).is_err());
    }

    #[test]
    fn neighbor_counts() {
        let b = LatticeBox::cube(2, 0, 4).unwrap();
        assert_eq!(b.neighbors(&[2, 2]).unwrap().len(), 4);
        assert_eq!(b.neighbors(&[0, 0]).unwrap().len(), 2);
        let b3 = LatticeBox::cube(3, -1, 1).unwrap();
        assert_eq!(b3.neighbors(&[0, 0, 0]).unwrap().len(), 6);
        assert!(b.neighbors(&[5, 0]).is_err());
    }

    #[test]
    fn neighbor_indices_agree_with_sites() {
        let b = LatticeBox::new(vec![-1, 0, 2], vec![1, 2, 3]).unwrap();
        for i in 0..b.len() {
            let mut by_site: Vec<usize> = b
                .neighbors(&b.site(i))
                .unwrap()
                .iter()
                .map(|s| b.index_of(s).unwrap())
                .collect();
            let mut by_index = b.neighbor_indices(i);
            by_site.sort();
            by_index.sort();
            assert_eq!(by_site, by_index);
        }
    }

    #[test]
    fn tile_of_uses_floor_division() {
        let g = TileGeometry::new(vec![2, 2]).unwrap();
        assert_eq!(g.tile_of(&[0, 1]), vec![0, 0]);
        assert_eq!(g.tile_of(&[-1, 0]), vec![-1, 0]);
        assert_eq!(g.tile_of(&[2, 3]), vec![1, 1]);
        assert_eq!(g.tile(&[0, 0]), g.base_tile());
        assert_eq!(g.tile(&[-1, 0]).lower(), &[-2, 0]);
    }

    #[test]
    fn boundary_layer_is_partition() {
        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let ambient = LatticeBox::cube(2, -4, 5).unwrap();
        let inner = vec![vec![0, 0], vec![1, 0]];
        let bl = BoundaryLayer::around(&g, &ambient, &inner);
        assert_eq!(bl.inner.len(), 2);
        // 4x3 tile block around a 2x1 pair minus the pair itself
        assert_eq!(bl.layer.len(), 10);
        let total = bl.inner.len() + bl.layer.len() + bl.exterior.len();
        assert_eq!(total, g.tiles_in(&ambient).len());
    }

    #[test]
    fn neighbouring_tiles() {
        assert!(TileGeometry::are_neighbors(&[0, 0], &[1, 0]));
        assert!(TileGeometry::are_neighbors(&[0, 0], &[0, -1]));
        assert!(!TileGeometry::are_neighbors(&[0, 0], &[1, 1]));
        assert!(!TileGeometry::are_neighbors(&[0, 0], &[2, 0]));
        assert!(!TileGeometry::are_neighbors(&[0, 0], &[0, 0]));
    }
}
