//! Brute-force enumeration in exact rationals, independent of the crate's
//! oracle. Treatment probabilities are supplied as closures written in the
//! test, not read back from a `Mechanism`.

#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use designbench::population::{Latents, PopulationSpec};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    BigRational::new(num.into(), den.into())
}

pub fn qf(v: f64) -> Q {
    BigRational::from_float(v).expect("finite")
}

pub fn f(v: &Q) -> f64 {
    v.to_f64().unwrap()
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub y1: Q,
    pub y0: Q,
    pub x: u32,
    pub u: u32,
    pub p: Q,
    pub w: bool,
    pub prob: Q,
}

impl Cell {
    pub fn y(&self) -> Q {
        if self.w {
            self.y1.clone()
        } else {
            self.y0.clone()
        }
    }
}

/// Every (stratum, w) cell with its exact probability.
pub fn enumerate(pop: &PopulationSpec, p: impl Fn(&Latents) -> Q) -> Vec<Cell> {
    let mut cells = Vec::new();
    for s in pop.strata() {
        let l = s.latents;
        let pi = p(&l);
        for w in [true, false] {
            let pw = if w { pi.clone() } else { q(1, 1) - pi.clone() };
            cells.push(Cell {
                y1: qf(l.y1),
                y0: qf(l.y0),
                x: l.x,
                u: l.u,
                p: pi.clone(),
                w,
                prob: s.weight.clone() * pw,
            });
        }
    }
    cells
}

pub fn expect(cells: &[Cell], g: impl Fn(&Cell) -> Q) -> Q {
    cells
        .iter()
        .filter(|c| !c.prob.is_zero())
        .fold(Q::zero(), |acc, c| acc + c.prob.clone() * g(c))
}

pub fn prob(cells: &[Cell], keep: impl Fn(&Cell) -> bool) -> Q {
    cells.iter().filter(|c| keep(c)).fold(Q::zero(), |acc, c| acc + c.prob.clone())
}

/// `E[Y | W = w]`.
pub fn arm_mean(cells: &[Cell], w: bool) -> Q {
    let mass = prob(cells, |c| c.w == w);
    expect(cells, |c| if c.w == w { c.y() } else { Q::zero() }) / mass
}

/// Mean and variance of the HT term with weights `score(cell)`.
pub fn weighted_term_moments(cells: &[Cell], score: impl Fn(&Cell) -> Q) -> (Q, Q) {
    let one = q(1, 1);
    let term = |c: &Cell| {
        let s = score(c);
        if c.w {
            c.y() / s
        } else {
            -(c.y() / (one.clone() - s))
        }
    };
    let mean = expect(cells, term);
    let var = expect(cells, |c| {
        let d = term(c) - mean.clone();
        d.clone() * d
    });
    (mean, var)
}

pub fn eq1(l: &Latents) -> Q {
    (q(3, 1) - qf(l.y1)) / q(4, 1)
}
