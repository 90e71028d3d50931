//! Exact linear-separability oracle for single threshold neurons.
//!
//! A threshold neuron computes `step(w . x + b)`, so the labelings it can
//! realize over a point set are exactly the linearly separable ones. The
//! oracle decides separability by exact rational feasibility of the margin
//! system `w . x + b >= 1` on label-1 points and `w . x + b <= -1` on label-0
//! points; the margin form is scale-invariant and keeps every point off the
//! hyperplane, so the step function's value at zero never matters. Forbidden
//! layer mappings are never enumerated up front: each candidate labeling is
//! decided lazily and may be cached.

mod simplex;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::code::Code;
use crate::entropyflow::{LayerState, MappingAssignment};
use simplex::{phase_one, PhaseOne};

/// Most points one separability query may carry.
pub const MAX_POINTS: usize = 256;
/// Highest point dimension one separability query may carry.
pub const MAX_DIMENSION: usize = 12;
/// Highest dimension for full-hypercube enumeration (2^(2^m) labelings).
pub const MAX_ENUMERATION_DIMENSION: usize = 4;

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("{got} points exceed the supported maximum of {MAX_POINTS}")]
    TooManyPoints { got: usize },
    #[error("dimension {got} exceeds the supported maximum of {MAX_DIMENSION}")]
    DimensionTooLarge { got: usize },
    #[error("{points} points but {labels} labels")]
    LabelMismatch { points: usize, labels: usize },
    #[error("duplicate point {0}")]
    DuplicatePoint(Code),
    #[error("points mix widths {a} and {b}")]
    MixedWidths { a: usize, b: usize },
    #[error("no points given")]
    NoPoints,
    #[error("hypercube enumeration supports dimension <= {MAX_ENUMERATION_DIMENSION}, got {0}")]
    EnumerationTooLarge(usize),
    #[error("synthesized weight exceeds the i64 range")]
    WeightOverflow,
}

/// An exact rational hyperplane realizing one neuron's labeling with unit
/// margin: `w . x + b >= 1` on label-1 points, `<= -1` on label-0 points.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityCertificate {
    pub weights: Vec<BigRational>,
    pub bias: BigRational,
}

impl SeparabilityCertificate {
    /// Exact check of the margin inequalities on every point.
    pub fn verify(&self, points: &[Code], labels: &[bool]) -> bool {
        if points.len() != labels.len() {
            return false;
        }
        points.iter().zip(labels).all(|(point, &label)| {
            let mut lhs = self.bias.clone();
            for (j, w) in self.weights.iter().enumerate() {
                if point.bit(j) {
                    lhs += w;
                }
            }
            if label {
                lhs >= BigRational::one()
            } else {
                lhs <= -BigRational::one()
            }
        })
    }

    /// Scale to the smallest integer vector: multiply through by the LCM of
    /// all denominators.
    pub fn to_integer(&self) -> Result<(Vec<i64>, i64), FeasibilityError> {
        let mut lcm = BigInt::one();
        for w in self.weights.iter().chain(std::iter::once(&self.bias)) {
            lcm = lcm.lcm(w.denom());
        }
        let scale = |r: &BigRational| -> Result<i64, FeasibilityError> {
            ((r * &lcm).to_integer())
                .to_i64()
                .ok_or(FeasibilityError::WeightOverflow)
        };
        let weights = self.weights.iter().map(&scale).collect::<Result<_, _>>()?;
        Ok((weights, scale(&self.bias)?))
    }
}

/// Outcome of a separability query.
#[derive(Debug, Clone, PartialEq)]
pub enum Separability {
    Separable(SeparabilityCertificate),
    Inseparable {
        /// Human-readable statement of why no hyperplane exists.
        witness: String,
    },
}

impl Separability {
    pub fn is_separable(&self) -> bool {
        matches!(self, Separability::Separable(_))
    }
}

fn validate_points(points: &[Code], labels: &[bool]) -> Result<usize, FeasibilityError> {
    if points.is_empty() {
        return Err(FeasibilityError::NoPoints);
    }
    if points.len() != labels.len() {
        return Err(FeasibilityError::LabelMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if points.len() > MAX_POINTS {
        return Err(FeasibilityError::TooManyPoints { got: points.len() });
    }
    let dim = points[0].width();
    for p in points {
        if p.width() != dim {
            return Err(FeasibilityError::MixedWidths {
                a: dim,
                b: p.width(),
            });
        }
    }
    if dim > MAX_DIMENSION {
        return Err(FeasibilityError::DimensionTooLarge { got: dim });
    }
    let mut sorted: Vec<Code> = points.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(FeasibilityError::DuplicatePoint(pair[0]));
        }
    }
    Ok(dim)
}

/// Decide exactly whether a hyperplane separates the label-1 points from the
/// label-0 points, returning a verifying certificate when one exists.
pub fn check_separable(
    points: &[Code],
    labels: &[bool],
) -> Result<Separability, FeasibilityError> {
    let dim = validate_points(points, labels)?;

    // Margin system in equality form with nonnegative variables:
    // w = wp - wn, b = bp - bn, one slack per point, all rhs = 1.
    //   label 1:  w.x + b - s = 1
    //   label 0: -w.x - b - s = 1
    let cols = 2 * dim + 2 + points.len();
    let one = BigRational::one;
    let rows: Vec<Vec<BigRational>> = points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (point, &label))| {
            let sign = if label { 1 } else { -1 };
            let mut row = vec![BigRational::zero(); cols];
            for j in 0..dim {
                if point.bit(j) {
                    row[j] = BigRational::from_integer(BigInt::from(sign));
                    row[dim + j] = BigRational::from_integer(BigInt::from(-sign));
                }
            }
            row[2 * dim] = BigRational::from_integer(BigInt::from(sign));
            row[2 * dim + 1] = BigRational::from_integer(BigInt::from(-sign));
            row[2 * dim + 2 + i] = -one();
            row
        })
        .collect();
    let rhs = vec![one(); points.len()];

    match phase_one(cols, &rows, &rhs) {
        PhaseOne::Feasible(x) => {
            let weights: Vec<BigRational> =
                (0..dim).map(|j| &x[j] - &x[dim + j]).collect();
            let bias = &x[2 * dim] - &x[2 * dim + 1];
            let certificate = SeparabilityCertificate { weights, bias };
            debug_assert!(certificate.verify(points, labels));
            Ok(Separability::Separable(certificate))
        }
        PhaseOne::Infeasible { residual } => Ok(Separability::Inseparable {
            witness: format!(
                "margin system has no solution; minimal infeasibility residual {residual} > 0"
            ),
        }),
    }
}

/// Certificates realizing one layer's mapping, one per neuron (output bit).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRealization {
    pub certificates: Vec<SeparabilityCertificate>,
}

/// Whether a whole layer mapping is realizable by threshold neurons.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerFeasibility {
    Feasible(LayerRealization),
    /// Index of the first output bit whose labeling is not separable.
    Infeasible { neuron: usize },
}

impl LayerFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LayerFeasibility::Feasible(_))
    }
}

fn layer_feasible_with<F>(
    state: &LayerState,
    map: &MappingAssignment,
    mut check: F,
) -> Result<LayerFeasibility, FeasibilityError>
where
    F: FnMut(&[Code], &[bool]) -> Result<Arc<Separability>, FeasibilityError>,
{
    let points = state.codes();
    let mut certificates = Vec::with_capacity(map.width());
    for bit in 0..map.width() {
        let labels: Vec<bool> = map.target_codes.iter().map(|c| c.bit(bit)).collect();
        match check(&points, &labels)?.as_ref() {
            Separability::Separable(cert) => certificates.push(cert.clone()),
            Separability::Inseparable { .. } => {
                return Ok(LayerFeasibility::Infeasible { neuron: bit })
            }
        }
    }
    Ok(LayerFeasibility::Feasible(LayerRealization { certificates }))
}

/// A layer mapping is realizable iff every output bit's labeling of the
/// source codes is linearly separable. Returns the first failing neuron
/// index otherwise.
pub fn layer_feasible(
    state: &LayerState,
    map: &MappingAssignment,
) -> Result<LayerFeasibility, FeasibilityError> {
    layer_feasible_with(state, map, |points, labels| {
        check_separable(points, labels).map(Arc::new)
    })
}

/// Memoized oracle keyed by (source code set, label vector). Safe for
/// concurrent use; results are independent of interleaving because the
/// oracle is a pure function.
#[derive(Default)]
pub struct FeasibilityCache {
    entries: Mutex<HashMap<(Vec<Code>, Vec<bool>), Arc<Separability>>>,
}

impl FeasibilityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(
        &self,
        points: &[Code],
        labels: &[bool],
    ) -> Result<Arc<Separability>, FeasibilityError> {
        let key = (points.to_vec(), labels.to_vec());
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let decision = Arc::new(check_separable(points, labels)?);
        self.entries
            .lock()
            .unwrap()
            .insert(key, decision.clone());
        Ok(decision)
    }

    pub fn layer_feasible(
        &self,
        state: &LayerState,
        map: &MappingAssignment,
    ) -> Result<LayerFeasibility, FeasibilityError> {
        layer_feasible_with(state, map, |points, labels| self.check(points, labels))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The exact set of threshold-realizable labelings of the full hypercube
/// `{0,1}^m`, as label vectors in ascending point order.
pub fn enumerate_threshold_functions(
    m: usize,
) -> Result<BTreeSet<Vec<bool>>, FeasibilityError> {
    if m == 0 || m > MAX_ENUMERATION_DIMENSION {
        return Err(FeasibilityError::EnumerationTooLarge(m));
    }
    let points: Vec<Code> = Code::all(m).collect();
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << points.len()) {
        let labels: Vec<bool> = (0..points.len()).map(|i| (mask >> i) & 1 == 1).collect();
        if check_separable(&points, &labels)?.is_separable() {
            out.insert(labels);
        }
    }
    Ok(out)
}

/// Integer weights and biases for one layer, one row per neuron.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LayerWeights {
    pub weights: Vec<Vec<i64>>,
    pub biases: Vec<i64>,
}

impl LayerWeights {
    /// Forward-evaluate the layer with the step activation (1 iff the
    /// affine form is nonnegative). Certificates keep every point at margin
    /// distance, so the boundary case never decides anything.
    pub fn forward(&self, input: Code) -> Code {
        let mut bits = 0u16;
        for (row, bias) in self.weights.iter().zip(&self.biases) {
            let z: i64 = row
                .iter()
                .enumerate()
                .map(|(j, w)| if input.bit(j) { *w } else { 0 })
                .sum::<i64>()
                + bias;
            bits = (bits << 1) | (z >= 0) as u16;
        }
        Code::new(self.weights.len(), bits)
    }
}

/// Clear rational denominators in every certificate, producing the integer
/// weight matrix and bias vector reported for the layer.
pub fn synthesize_layer_weights(
    realization: &LayerRealization,
) -> Result<LayerWeights, FeasibilityError> {
    let mut weights = Vec::with_capacity(realization.certificates.len());
    let mut biases = Vec::with_capacity(realization.certificates.len());
    for cert in &realization.certificates {
        let (w, b) = cert.to_integer()?;
        weights.push(w);
        biases.push(b);
    }
    Ok(LayerWeights { weights, biases })
}
