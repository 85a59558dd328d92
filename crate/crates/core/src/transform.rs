//! Maps between constrained parameters and the unconstrained space the
//! random-walk sampler moves in.

use std::ops::Range;

use crate::math::{log_sigmoid, logistic, logit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// `theta = exp(z)`.
    Positive,
    /// Stick-breaking map from `K - 1` reals onto the `K`-simplex.
    Simplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub transform: Transform,
    /// Length in constrained space.
    pub len: usize,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, transform: Transform, len: usize) -> Self {
        assert!(len > 0, "empty parameter block");
        assert!(transform != Transform::Simplex || len >= 2, "simplex needs at least 2 components");
        Self { name: name.into(), transform, len }
    }

    pub fn unconstrained_len(&self) -> usize {
        match self.transform {
            Transform::Simplex => self.len - 1,
            _ => self.len,
        }
    }
}

/// Ordered parameter blocks of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
}

impl ParamLayout {
    pub fn new(blocks: Vec<ParamBlock>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn constrained_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn unconstrained_dim(&self) -> usize {
        self.blocks.iter().map(ParamBlock::unconstrained_len).sum()
    }

    /// Range of block `name` in the constrained vector.
    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        let mut start = 0;
        for b in &self.blocks {
            if b.name == name {
                return Some(start..start + b.len);
            }
            start += b.len;
        }
        None
    }

    /// Coordinate names such as `mu[2]` (1-based) or `sigma_state`.
    pub fn coordinate_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| {
                (0..b.len).map(move |i| if b.len == 1 { b.name.clone() } else { format!("{}[{}]", b.name, i + 1) })
            })
            .collect()
    }

    /// Constrained point and `log |det J|` of the map at `z`.
    pub fn constrain(&self, z: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(z.len(), self.unconstrained_dim());
        let mut theta = Vec::with_capacity(self.constrained_dim());
        let mut log_jac = 0.0;
        let mut at = 0;
        for b in &self.blocks {
            let zb = &z[at..at + b.unconstrained_len()];
            at += zb.len();
            match b.transform {
                Transform::Identity => theta.extend_from_slice(zb),
                Transform::Positive => {
                    theta.extend(zb.iter().map(|v| v.exp()));
                    log_jac += zb.iter().sum::<f64>();
                }
                Transform::Simplex => log_jac += stick_breaking(zb, &mut theta),
            }
        }
        (theta, log_jac)
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.constrained_dim());
        let mut z = Vec::with_capacity(self.unconstrained_dim());
        let mut at = 0;
        for b in &self.blocks {
            let tb = &theta[at..at + b.len];
            at += b.len;
            match b.transform {
                Transform::Identity => z.extend_from_slice(tb),
                Transform::Positive => z.extend(tb.iter().map(|v| v.ln())),
                Transform::Simplex => inverse_stick_breaking(tb, &mut z),
            }
        }
        z
    }

    /// Whether `theta` satisfies every block constraint (simplex sums within
    /// `tol` of 1).
    pub fn satisfies_constraints(&self, theta: &[f64], tol: f64) -> bool {
        let mut at = 0;
        self.blocks.iter().all(|b| {
            let tb = &theta[at..at + b.len];
            at += b.len;
            match b.transform {
                Transform::Identity => tb.iter().all(|v| v.is_finite()),
                Transform::Positive => tb.iter().all(|&v| v > 0.0 && v.is_finite()),
                Transform::Simplex => tb.iter().all(|&v| v > 0.0) && (tb.iter().sum::<f64>() - 1.0).abs() <= tol,
            }
        })
    }
}

// Offsets of ln(K - k) centre the map so that z = 0 gives the uniform
// simplex.
fn stick_breaking(z: &[f64], out: &mut Vec<f64>) -> f64 {
    let k = z.len() + 1;
    let mut stick = 1.0;
    let mut log_jac = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let u = zi - ((k - i - 1) as f64).ln();
        let frac = logistic(u);
        let x = stick * frac;
        log_jac += log_sigmoid(u) + log_sigmoid(-u) + stick.ln();
        out.push(x);
        stick -= x;
    }
    out.push(stick);
    log_jac
}

fn inverse_stick_breaking(x: &[f64], out: &mut Vec<f64>) {
    let k = x.len();
    let mut stick = 1.0;
    for (i, &xi) in x[..k - 1].iter().enumerate() {
        out.push(logit(xi / stick) + ((k - i - 1) as f64).ln());
        stick -= xi;
    }
}
