use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(input("bounds must have at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(input(format!(
                "lower has {} entries but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(input(format!("bound {i} is not finite")));
            }
            if l >= u {
                return Err(input(format!("lower[{i}] = {l} must be < upper[{i}] = {u}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval repeated over `dim` coordinates.
    pub fn uniform(lower: f64, upper: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Mean side length; the scale used for lengthscale boxes and step sizes.
    pub fn mean_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).sum::<f64>() / self.dim() as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// The box obtained by stacking `copies` of this one, used for flattened batches.
    pub fn replicate(&self, copies: usize) -> Bounds {
        Bounds {
            lower: self.lower.repeat(copies),
            upper: self.upper.repeat(copies),
        }
    }
}

/// Evaluated pairs `(x_i, y_i)` together with their domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    bounds: Bounds,
}

impl Dataset {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            bounds,
        }
    }

    pub fn from_parts(bounds: Bounds, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(input(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let mut data = Self::new(bounds);
        for (x, y) in points.into_iter().zip(values) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.bounds.dim() {
            return Err(input(format!(
                "point has dimension {} but domain has {}",
                x.len(),
                self.bounds.dim()
            )));
        }
        if !self.bounds.contains(&x) {
            return Err(input(format!("point {x:?} lies outside the domain")));
        }
        if !y.is_finite() {
            return Err(input(format!("observed value {y} is not finite")));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Index and value of the largest observation.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (i, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((i, v)),
            })
    }
}
