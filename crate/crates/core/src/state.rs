use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::mesh::Field;

/// Snapshot of a 1D simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimState {
    pub t: f64,
    /// Density (total density for two-species runs).
    pub n: Field,
    /// Nutrient concentration, when a nutrient model is attached.
    pub c: Option<Field>,
    /// Necrotic density of the two-species model.
    pub n_d: Option<Field>,
}

impl SimState {
    pub fn new(t: f64, n: Field) -> Self {
        Self {
            t,
            n,
            c: None,
            n_d: None,
        }
    }

    pub fn with_nutrient(mut self, c: Field) -> Self {
        self.c = Some(c);
        self
    }

    /// Per-node growth rates for a nutrient-fed law, read from the attached
    /// nutrient field.
    pub fn nutrient_rates(&self, growth: &GrowthModel) -> Result<Vec<f64>> {
        let c = self.c.as_ref().ok_or_else(|| {
            Error::InvalidArgument("nutrient-fed growth needs a nutrient field on the state".into())
        })?;
        Ok(c.iter().map(|&ci| growth.eval(ci)).collect())
    }
}
