//! Domain types shared by every other module.
//!
//! All types are plain values. Operations elsewhere in the crate take them by
//! reference and return new values, so models can be shared freely between
//! threads.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "Rx")]
    Rx,
    #[serde(rename = "Ry")]
    Ry,
    #[serde(rename = "Rz")]
    Rz,
    #[serde(rename = "scalar")]
    Scalar,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::X => "x",
            Direction::Y => "y",
            Direction::Z => "z",
            Direction::Rx => "Rx",
            Direction::Ry => "Ry",
            Direction::Rz => "Rz",
            Direction::Scalar => "scalar",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "x" => Direction::X,
            "y" => Direction::Y,
            "z" => Direction::Z,
            "Rx" => Direction::Rx,
            "Ry" => Direction::Ry,
            "Rz" => Direction::Rz,
            "scalar" => Direction::Scalar,
            other => return Err(Error::Parse(format!("unknown direction {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofKind {
    #[default]
    Internal,
    Interface,
}

/// A degree of freedom: where a force is applied or a motion is measured.
///
/// Identity is `(component, node, direction)`; `kind` is an annotation and is
/// ignored by equality and hashing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DofLabel {
    pub component: String,
    pub node: String,
    pub direction: Direction,
    #[serde(default)]
    pub kind: DofKind,
}

impl DofLabel {
    pub fn new(component: impl Into<String>, node: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            node: node.into(),
            direction: Direction::Scalar,
            kind: DofKind::Internal,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_kind(mut self, kind: DofKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn same_dof(&self, other: &DofLabel) -> bool {
        self.component == other.component
            && self.node == other.node
            && self.direction == other.direction
    }
}

impl PartialEq for DofLabel {
    fn eq(&self, other: &Self) -> bool {
        self.same_dof(other)
    }
}

impl Eq for DofLabel {}

impl Hash for DofLabel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.component.hash(state);
        self.node.hash(state);
        self.direction.hash(state);
    }
}

impl fmt::Display for DofLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.component, self.node, self.direction.as_str())
    }
}

impl FromStr for DofLabel {
    type Err = Error;

    /// Parses `component:node[:direction]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [c, n] => Ok(DofLabel::new(*c, *n)),
            [c, n, d] => Ok(DofLabel::new(*c, *n).with_direction(d.parse()?)),
            _ => Err(Error::Parse(format!("malformed DOF label {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputKind {
    #[serde(rename = "disp")]
    Displacement,
    #[serde(rename = "vel")]
    Velocity,
    #[serde(rename = "accel")]
    Acceleration,
}

impl OutputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputKind::Displacement => "disp",
            OutputKind::Velocity => "vel",
            OutputKind::Acceleration => "accel",
        }
    }

    pub fn response_kind(&self) -> ResponseKind {
        match self {
            OutputKind::Displacement => ResponseKind::Receptance,
            OutputKind::Velocity => ResponseKind::Mobility,
            OutputKind::Acceleration => ResponseKind::Accelerance,
        }
    }
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disp" => Ok(OutputKind::Displacement),
            "vel" => Ok(OutputKind::Velocity),
            "accel" => Ok(OutputKind::Acceleration),
            other => Err(Error::Parse(format!("unknown output kind {other:?}"))),
        }
    }
}

/// Physical role of a state in a coupling-form model.
///
/// Interface states carry the DOF whose output (or output derivative) they
/// hold, which is what lets duplicated interface states be matched after a
/// coupling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateTag {
    Internal,
    InterfaceOutput(DofLabel),
    DerivInterfaceOutput(DofLabel),
}

impl StateTag {
    pub fn name(&self) -> &'static str {
        match self {
            StateTag::Internal => "internal",
            StateTag::InterfaceOutput(_) => "interface_output",
            StateTag::DerivInterfaceOutput(_) => "deriv_interface_output",
        }
    }

    pub fn dof(&self) -> Option<&DofLabel> {
        match self {
            StateTag::Internal => None,
            StateTag::InterfaceOutput(d) | StateTag::DerivInterfaceOutput(d) => Some(d),
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, StateTag::Internal)
    }
}

/// Continuous-time LTI model `ẋ = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub output_kind: OutputKind,
    pub inputs: Vec<DofLabel>,
    pub outputs: Vec<DofLabel>,
    pub state_tags: Vec<StateTag>,
}

impl StateSpaceModel {
    /// Builds a model with all-internal state tags and checks its invariants.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        output_kind: OutputKind,
        inputs: Vec<DofLabel>,
        outputs: Vec<DofLabel>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = Self {
            a,
            b,
            c,
            d,
            output_kind,
            inputs,
            outputs,
            state_tags: vec![StateTag::Internal; n],
        };
        m.checked()
    }

    pub fn checked(self) -> Result<Self> {
        let v = validate_model(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn input_index(&self, label: &DofLabel) -> Option<usize> {
        self.inputs.iter().position(|l| l == label)
    }

    pub fn output_index(&self, label: &DofLabel) -> Option<usize> {
        self.outputs.iter().position(|l| l == label)
    }

    pub fn is_coupling_form(&self) -> bool {
        self.state_tags.iter().any(|t| !t.is_internal())
    }

    pub fn require_kind(&self, expected: OutputKind) -> Result<()> {
        if self.output_kind == expected {
            Ok(())
        } else {
            Err(Error::WrongOutputKind {
                expected: expected.as_str(),
                found: self.output_kind,
            })
        }
    }

    /// Keeps the listed inputs and outputs, in the given order.
    pub fn select_io(&self, inputs: &[DofLabel], outputs: &[DofLabel]) -> Result<Self> {
        let in_idx = inputs
            .iter()
            .map(|l| self.input_index(l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let out_idx = outputs
            .iter()
            .map(|l| self.output_index(l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.permute_io(&in_idx, &out_idx))
    }

    /// New model whose input `k` is old input `in_idx[k]` (same for outputs).
    pub(crate) fn permute_io(&self, in_idx: &[usize], out_idx: &[usize]) -> Self {
        let n = self.n_states();
        let b = DMatrix::from_fn(n, in_idx.len(), |r, k| self.b[(r, in_idx[k])]);
        let c = DMatrix::from_fn(out_idx.len(), n, |k, col| self.c[(out_idx[k], col)]);
        let d = DMatrix::from_fn(out_idx.len(), in_idx.len(), |i, j| {
            self.d[(out_idx[i], in_idx[j])]
        });
        Self {
            a: self.a.clone(),
            b,
            c,
            d,
            output_kind: self.output_kind,
            inputs: in_idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: out_idx.iter().map(|&i| self.outputs[i].clone()).collect(),
            state_tags: self.state_tags.clone(),
        }
    }

    /// Rewrites every label (I/O and state tags) through `f`.
    pub fn map_labels(&self, f: impl Fn(&DofLabel) -> DofLabel) -> Self {
        let tag = |t: &StateTag| match t {
            StateTag::Internal => StateTag::Internal,
            StateTag::InterfaceOutput(d) => StateTag::InterfaceOutput(f(d)),
            StateTag::DerivInterfaceOutput(d) => StateTag::DerivInterfaceOutput(f(d)),
        };
        Self {
            inputs: self.inputs.iter().map(&f).collect(),
            outputs: self.outputs.iter().map(&f).collect(),
            state_tags: self.state_tags.iter().map(tag).collect(),
            ..self.clone()
        }
    }
}

/// Second-order lumped system `M ẍ + V ẋ + K x = f`.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalSystem {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub dofs: Vec<DofLabel>,
}

impl MechanicalSystem {
    pub fn new(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        damping: DMatrix<f64>,
        dofs: Vec<DofLabel>,
    ) -> Result<Self> {
        let s = Self {
            mass,
            stiffness,
            damping,
            dofs,
        };
        let v = s.violations();
        if v.is_empty() {
            Ok(s)
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    pub fn n_dof(&self) -> usize {
        self.mass.nrows()
    }

    pub fn violations(&self) -> Vec<String> {
        let n = self.dofs.len();
        let mut out = Vec::new();
        for (name, m) in [("M", &self.mass), ("K", &self.stiffness), ("V", &self.damping)] {
            if m.shape() != (n, n) {
                out.push(format!("{name} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols()));
                continue;
            }
            if m.iter().any(|x| !x.is_finite()) {
                out.push(format!("{name} not finite"));
                continue;
            }
            let scale = m.amax().max(f64::MIN_POSITIVE);
            if (m - m.transpose()).amax() > 1e-12 * scale {
                out.push(format!("{name} not symmetric"));
                continue;
            }
            let eig = m.clone().symmetric_eigenvalues();
            let min = eig.min();
            if name == "M" {
                if min <= 0.0 {
                    out.push("M not positive definite".into());
                }
            } else if min < -1e-10 * scale {
                out.push(format!("{name} not positive semidefinite"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Receptance,
    Mobility,
    Accelerance,
    DynamicStiffness,
    /// Interface force per unit external force.
    InterfaceForce,
}

/// Sampled frequency response: one complex `n_o × n_i` matrix per frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfMatrix {
    pub freqs_hz: Vec<f64>,
    pub data: Vec<DMatrix<Complex64>>,
    pub response_kind: ResponseKind,
    pub inputs: Vec<DofLabel>,
    pub outputs: Vec<DofLabel>,
}

impl FrfMatrix {
    pub fn new(
        freqs_hz: Vec<f64>,
        data: Vec<DMatrix<Complex64>>,
        response_kind: ResponseKind,
        inputs: Vec<DofLabel>,
        outputs: Vec<DofLabel>,
    ) -> Result<Self> {
        let f = Self {
            freqs_hz,
            data,
            response_kind,
            inputs,
            outputs,
        };
        let v = f.violations();
        if v.is_empty() {
            Ok(f)
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.freqs_hz.is_empty() {
            out.push("frequency grid empty".into());
        }
        if self.freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            out.push("frequencies not strictly increasing".into());
        }
        if self.data.len() != self.freqs_hz.len() {
            out.push(format!(
                "{} FRF slices for {} frequencies",
                self.data.len(),
                self.freqs_hz.len()
            ));
        }
        for (k, h) in self.data.iter().enumerate() {
            if h.shape() != (self.outputs.len(), self.inputs.len()) {
                out.push(format!("slice {k} has shape {:?}", h.shape()));
                break;
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                out.push(format!("H not finite at frequency index {k}"));
                break;
            }
        }
        out
    }

    /// Keeps the listed inputs and outputs, in the given order.
    pub fn select(&self, inputs: &[DofLabel], outputs: &[DofLabel]) -> Result<Self> {
        let find = |list: &[DofLabel], l: &DofLabel| {
            list.iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))
        };
        let ii = inputs.iter().map(|l| find(&self.inputs, l)).collect::<Result<Vec<_>>>()?;
        let oo = outputs.iter().map(|l| find(&self.outputs, l)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            freqs_hz: self.freqs_hz.clone(),
            data: self
                .data
                .iter()
                .map(|h| DMatrix::from_fn(oo.len(), ii.len(), |r, c| h[(oo[r], ii[c])]))
                .collect(),
            response_kind: self.response_kind,
            inputs: inputs.to_vec(),
            outputs: outputs.to_vec(),
        })
    }

    pub fn map_labels(&self, f: impl Fn(&DofLabel) -> DofLabel) -> Self {
        Self {
            inputs: self.inputs.iter().map(&f).collect(),
            outputs: self.outputs.iter().map(&f).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|h| h * s).collect(),
            ..self.clone()
        }
    }
}

/// Returns every violated invariant of `m`; empty when the model is valid.
pub fn validate_model(m: &StateSpaceModel) -> Vec<String> {
    let mut out = Vec::new();
    let n = m.a.nrows();
    if m.a.ncols() != n {
        out.push(format!("A not square ({}x{})", m.a.nrows(), m.a.ncols()));
    }
    if m.b.nrows() != n {
        out.push("B row count ≠ n".into());
    }
    if m.c.ncols() != n {
        out.push("C column count ≠ n".into());
    }
    if m.d.nrows() != m.c.nrows() || m.d.ncols() != m.b.ncols() {
        out.push("D shape ≠ n_o×n_i".into());
    }
    if m.inputs.len() != m.b.ncols() {
        out.push("input label count ≠ n_i".into());
    }
    if m.outputs.len() != m.c.nrows() {
        out.push("output label count ≠ n_o".into());
    }
    if m.state_tags.len() != n {
        out.push("state tag count ≠ n".into());
    }
    for (name, mat) in [("A", &m.a), ("B", &m.b), ("C", &m.c), ("D", &m.d)] {
        if let Some(i) = mat.iter().position(|x| !x.is_finite()) {
            // column-major storage
            let (r, c) = (i % mat.nrows(), i / mat.nrows());
            out.push(format!("{name} not finite at ({r},{c})"));
        }
    }
    for (what, list) in [("input", &m.inputs), ("output", &m.outputs)] {
        for (i, l) in list.iter().enumerate() {
            if list[..i].contains(l) {
                out.push(format!("duplicate {what} label {l} at {i}"));
            }
        }
    }
    if m.state_tags.len() == n {
        if let Err(e) = check_tag_layout(&m.state_tags) {
            out.push(e);
        }
    }
    out
}

/// Tags must be all internal, or a sequence of blocks each laid out as
/// `[deriv × k, output × k, internal × *]` with matching DOFs.
fn check_tag_layout(tags: &[StateTag]) -> std::result::Result<(), String> {
    let mut i = 0;
    while i < tags.len() {
        let start = i;
        let mut derivs = Vec::new();
        while let Some(StateTag::DerivInterfaceOutput(d)) = tags.get(i) {
            derivs.push(d);
            i += 1;
        }
        for (j, d) in derivs.iter().enumerate() {
            match tags.get(i + j) {
                Some(StateTag::InterfaceOutput(o)) if o == *d => {}
                _ => {
                    return Err(format!(
                        "state tag {} breaks the [derivative; output; internal] layout",
                        i + j
                    ))
                }
            }
        }
        i += derivs.len();
        if derivs.is_empty() && !tags[i].is_internal() {
            return Err(format!("state tag {i} is an unpaired interface tag"));
        }
        while let Some(StateTag::Internal) = tags.get(i) {
            i += 1;
        }
        debug_assert!(i > start);
    }
    Ok(())
}
