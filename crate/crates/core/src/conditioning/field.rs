use nalgebra::DVector;

use crate::error::{invalid, Result};

/// A `d`-component real function sampled on an `n`-point periodic grid.
///
/// Flat views are component-major: entry `i * n + j` is component `i` at
/// site `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    components: Vec<Vec<f64>>,
    spacing: f64,
}

impl Field {
    pub fn new(components: Vec<Vec<f64>>, spacing: f64) -> Result<Self> {
        let n = components
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("a field needs at least one component"))?;
        if n == 0 {
            return Err(invalid("a field needs at least one grid point"));
        }
        if components.iter().any(|c| c.len() != n) {
            return Err(invalid("field components have different lengths"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(Self { components, spacing })
    }

    pub fn zeros(d: usize, n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; n]; d.max(1)], spacing).and_then(|f| {
            if d == 0 {
                Err(invalid("a field needs at least one component"))
            } else {
                Ok(f)
            }
        })
    }

    /// Rebuilds a field from a component-major flat vector.
    pub fn from_flat(flat: &[f64], d: usize, spacing: f64) -> Result<Self> {
        if d == 0 || flat.len() % d != 0 {
            return Err(invalid(format!(
                "cannot split {} values into {d} components",
                flat.len()
            )));
        }
        let n = flat.len() / d;
        Self::new(flat.chunks(n).map(<[f64]>::to_vec).collect(), spacing)
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components[0].len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Value at a possibly out-of-range site, wrapped periodically.
    pub fn get(&self, component: usize, site: isize) -> f64 {
        let n = self.n() as isize;
        self.components[component][site.rem_euclid(n) as usize]
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.d() * self.n(),
            self.components.iter().flatten().copied(),
        )
    }

    /// Grid coordinates `x_j = j * spacing`.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n()).map(|j| j as f64 * self.spacing).collect()
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
