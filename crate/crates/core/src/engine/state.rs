use serde::Serialize;

/// Static description of one stock in a model's state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StockSpec {
    pub name: &'static str,
    pub units: &'static str,
    /// Housing-market stocks are clamped at zero; smoothing states are not.
    pub non_negative: bool,
}

/// Levels of every stock, laid out in the order of a static `StockSpec` table.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: &'static [StockSpec],
    values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(layout: &'static [StockSpec]) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn from_values(layout: &'static [StockSpec], values: Vec<f64>) -> Self {
        assert_eq!(layout.len(), values.len(), "state vector length mismatch");
        Self { layout, values }
    }

    pub fn layout(&self) -> &'static [StockSpec] {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layout.iter().position(|s| s.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.values[i])
    }

    /// Names of non-negative stocks currently below zero.
    pub fn negative_stocks(&self) -> Vec<&'static str> {
        self.layout
            .iter()
            .zip(&self.values)
            .filter(|(spec, v)| spec.non_negative && **v < 0.0)
            .map(|(spec, _)| spec.name)
            .collect()
    }
}
