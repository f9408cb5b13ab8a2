use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Position of a type inside its [`TypeSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeIdx(pub u16);

impl TypeIdx {
    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for TypeIdx {
    fn from(i: usize) -> Self {
        TypeIdx(u16::try_from(i).expect("type space larger than u16::MAX"))
    }
}

/// One element of the type space: the load's baseline for the day plus the
/// parameters of its curtailment cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoadType {
    pub id: String,
    /// Baseline consumption in energy quanta.
    #[serde(default)]
    pub baseline: u32,
    /// Quadratic cost coefficient: curtailing `x` costs `kappa / 2 * x^2`.
    pub kappa: f64,
}

impl LoadType {
    pub fn new(id: impl Into<String>, baseline: u32, kappa: f64) -> Self {
        Self {
            id: id.into(),
            baseline,
            kappa,
        }
    }
}

/// The finite, ordered type space shared by all loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TypeSpace {
    /// Upper bound on baselines (energy quanta).
    pub d_max: u32,
    pub types: Vec<LoadType>,
}

impl TypeSpace {
    pub fn new(d_max: u32, types: Vec<LoadType>) -> Self {
        Self { d_max, types }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, idx: TypeIdx) -> &LoadType {
        &self.types[idx.get()]
    }

    pub fn index_of(&self, id: &str) -> Option<TypeIdx> {
        self.types.iter().position(|t| t.id == id).map(TypeIdx::from)
    }

    /// Finds the type with the given baseline and cost coefficient.
    pub fn find(&self, baseline: u32, kappa: f64) -> Option<TypeIdx> {
        self.types
            .iter()
            .position(|t| t.baseline == baseline && (t.kappa - kappa).abs() <= 1e-12 * kappa.abs().max(1.0))
            .map(TypeIdx::from)
    }

    pub fn indices(&self) -> impl Iterator<Item = TypeIdx> {
        (0..self.types.len()).map(TypeIdx::from)
    }

    pub fn baseline(&self, idx: TypeIdx) -> f64 {
        self.types[idx.get()].baseline as f64
    }
}
