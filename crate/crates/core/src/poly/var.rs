use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PolyError;

/// A variable that can appear in a [`Polynomial`](super::Polynomial).
///
/// Every variable type comes with a universe describing which variables are
/// legal; polynomials only combine when their universes agree.
pub trait Variable: Copy + Ord + Hash + fmt::Debug + fmt::Display + Send + Sync {
    type Universe: Copy + Eq + fmt::Debug + Send + Sync;

    fn belongs_to(&self, universe: &Self::Universe) -> bool;
}

/// The coordinate ring of `V × W*` with `V = (R^d)^n` and `W = R^d`.
///
/// Variables `v[j][i]` (1 ≤ j ≤ n, 1 ≤ i ≤ d) are the coordinates of the
/// input vectors; `l[i]` are the dual coordinates of `ℓ ∈ W*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarUniverse {
    d: usize,
    n: usize,
}

impl VarUniverse {
    pub fn new(d: usize, n: usize) -> Result<Self, PolyError> {
        if d == 0 || n == 0 {
            return Err(PolyError::InvalidUniverse { d, n });
        }
        Ok(Self { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn var_count(&self) -> usize {
        self.d * self.n + self.d
    }

    /// Dense position of a variable: the V-block row-major by vector, then
    /// the ℓ-block. Used by compiled float evaluation.
    pub fn index(&self, var: Var) -> Option<usize> {
        if !var.belongs_to(self) {
            return None;
        }
        Some(match var {
            Var::V { vector, coord } => (vector as usize - 1) * self.d + coord as usize - 1,
            Var::L { coord } => self.n * self.d + coord as usize - 1,
        })
    }

    /// All variables in monomial-order position.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        let vs = (1..=self.n).flat_map(move |j| (1..=self.d).map(move |i| Var::v(j, i)));
        vs.chain((1..=self.d).map(Var::l))
    }

    pub fn ell_vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.d).map(Var::l)
    }
}

impl fmt::Display for VarUniverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d={}, n={})", self.d, self.n)
    }
}

/// A coordinate variable. The derived order puts the V-block before the
/// ℓ-block and then compares indices lexicographically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Coordinate `coord` of input vector `vector` (both 1-indexed).
    V { vector: u32, coord: u32 },
    /// Dual coordinate `coord` of ℓ (1-indexed).
    L { coord: u32 },
}

impl Var {
    pub fn v(vector: usize, coord: usize) -> Self {
        Var::V {
            vector: vector as u32,
            coord: coord as u32,
        }
    }

    pub fn l(coord: usize) -> Self {
        Var::L {
            coord: coord as u32,
        }
    }

    pub fn is_ell(&self) -> bool {
        matches!(self, Var::L { .. })
    }
}

impl Variable for Var {
    type Universe = VarUniverse;

    fn belongs_to(&self, u: &VarUniverse) -> bool {
        match *self {
            Var::V { vector, coord } => {
                (1..=u.n as u32).contains(&vector) && (1..=u.d as u32).contains(&coord)
            }
            Var::L { coord } => (1..=u.d as u32).contains(&coord),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::V { vector, coord } => write!(f, "v{vector}_{coord}"),
            Var::L { coord } => write!(f, "l_{coord}"),
        }
    }
}

fn parse_index(s: &str, name: &str) -> Result<u32, PolyError> {
    match s.parse::<u32>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(PolyError::Malformed(format!("bad variable name {name:?}"))),
    }
}

impl FromStr for Var {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, PolyError> {
        if let Some(rest) = s.strip_prefix("l_") {
            return Ok(Var::L {
                coord: parse_index(rest, s)?,
            });
        }
        if let Some(rest) = s.strip_prefix('v') {
            if let Some((j, i)) = rest.split_once('_') {
                return Ok(Var::V {
                    vector: parse_index(j, s)?,
                    coord: parse_index(i, s)?,
                });
            }
        }
        Err(PolyError::Malformed(format!("bad variable name {s:?}")))
    }
}

/// Abstract variable `X_k` standing for the k-th generator (1-indexed).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct XVar(pub u32);

impl XVar {
    pub fn new(k: usize) -> Self {
        XVar(k as u32)
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

/// Universe of `X_1..X_count`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct XUniverse {
    pub count: usize,
}

impl Variable for XVar {
    type Universe = XUniverse;

    fn belongs_to(&self, u: &XUniverse) -> bool {
        (1..=u.count as u32).contains(&self.0)
    }
}

impl fmt::Display for XVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}", self.0)
    }
}

impl FromStr for XVar {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, PolyError> {
        s.strip_prefix('X')
            .ok_or_else(|| PolyError::Malformed(format!("bad variable name {s:?}")))
            .and_then(|k| parse_index(k, s))
            .map(XVar)
    }
}
