//! Index bookkeeping for the linear state `(theta_0..theta_{n+m-1}, u_0..u_{n-1})`.
//!
//! Bus indices are 0-based internal indices: PQ buses `0..n`, PV buses
//! `n..n+m`, slack `n+m`. The angle of bus `i` sits at position `i`, the
//! relative voltage deviation of PQ bus `i` at position `n+m+i`. PV and
//! slack buses have no voltage coordinate, so their voltage selector is the
//! zero functional.

use crate::error::{Error, Result};

/// A sparse signed selector with at most two entries: a unit vector, the
/// difference of two unit vectors, or zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selector {
    entries: [(usize, f64); 2],
    len: u8,
}

impl Selector {
    pub const ZERO: Selector = Selector { entries: [(0, 0.0); 2], len: 0 };

    pub fn unit(pos: usize) -> Self {
        Selector { entries: [(pos, 1.0), (0, 0.0)], len: 1 }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries[..self.len as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.len == 0
    }

    /// `self - other`, merging equal positions and dropping cancelled entries.
    pub fn minus(self, other: Selector) -> Selector {
        let mut out = self;
        for &(pos, coef) in other.entries() {
            out = out.add_entry(pos, -coef);
        }
        out
    }

    fn add_entry(mut self, pos: usize, coef: f64) -> Selector {
        let len = self.len as usize;
        if let Some(k) = (0..len).find(|&k| self.entries[k].0 == pos) {
            self.entries[k].1 += coef;
            if self.entries[k].1 == 0.0 {
                self.entries[k] = self.entries[len - 1];
                self.len -= 1;
            }
        } else {
            assert!(len < 2, "selector holds at most two entries");
            self.entries[len] = (pos, coef);
            self.len += 1;
        }
        self
    }

    /// `selᵀ x` in O(1).
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries().iter().map(|&(p, c)| c * x[p]).sum()
    }

    /// `selᵀ other`.
    pub fn dot_sel(&self, other: &Selector) -> f64 {
        self.entries()
            .iter()
            .map(|&(p, c)| other.entries().iter().filter(|e| e.0 == p).map(|e| c * e.1).sum::<f64>())
            .sum()
    }

    /// `x += alpha * sel`.
    pub fn axpy(&self, alpha: f64, x: &mut [f64]) {
        for &(p, c) in self.entries() {
            x[p] += alpha * c;
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        self.axpy(1.0, &mut v);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateIndexer {
    pub n: usize,
    pub m: usize,
}

impl StateIndexer {
    pub fn new(n: usize, m: usize) -> Self {
        StateIndexer { n, m }
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn slack(&self) -> usize {
        self.n + self.m
    }

    /// Angle coordinate of bus `i`, if it has one.
    pub fn theta_pos(&self, i: usize) -> Option<usize> {
        (i < self.n + self.m).then_some(i)
    }

    /// Voltage coordinate of bus `i`, if it has one.
    pub fn u_pos(&self, i: usize) -> Option<usize> {
        (i < self.n).then_some(self.n + self.m + i)
    }

    /// Angle / real-power selector of a non-slack bus.
    pub fn eta(&self, i: usize) -> Result<Selector> {
        self.theta_pos(i)
            .map(Selector::unit)
            .ok_or(Error::NoStateCoordinate { index: i, what: "angle" })
    }

    /// Voltage / reactive-power selector; zero for PV and slack buses.
    pub fn zeta(&self, i: usize) -> Selector {
        self.u_pos(i).map(Selector::unit).unwrap_or(Selector::ZERO)
    }

    /// Angle selector that maps the slack to zero instead of failing.
    pub fn eta_or_zero(&self, i: usize) -> Selector {
        self.theta_pos(i).map(Selector::unit).unwrap_or(Selector::ZERO)
    }

    /// `eta_i - eta_j`; the slack contributes nothing.
    pub fn mu(&self, i: usize, j: usize) -> Selector {
        self.eta_or_zero(i).minus(self.eta_or_zero(j))
    }

    /// `zeta_i - zeta_j`.
    pub fn nu(&self, i: usize, j: usize) -> Selector {
        self.zeta(i).minus(self.zeta(j))
    }
}
