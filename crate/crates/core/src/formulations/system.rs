//! The assembled DAE `M ẋ + K x = r(t)` with its source terms, state layout,
//! initial-value predicates and derived observables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{norm2, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    FullwaveEh,
    AphiLorenz,
    AphiCoulomb,
    WavePair,
    Eqs,
    EqsMixed,
    MqsAstar,
    MqsTomega,
    DarwinA,
    DarwinB,
}

impl Formulation {
    pub const ALL: [Formulation; 10] = [
        Formulation::FullwaveEh,
        Formulation::AphiLorenz,
        Formulation::AphiCoulomb,
        Formulation::WavePair,
        Formulation::Eqs,
        Formulation::EqsMixed,
        Formulation::MqsAstar,
        Formulation::MqsTomega,
        Formulation::DarwinA,
        Formulation::DarwinB,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Formulation::FullwaveEh => "fullwave-eh",
            Formulation::AphiLorenz => "aphi-lorenz",
            Formulation::AphiCoulomb => "aphi-coulomb",
            Formulation::WavePair => "wave-pair",
            Formulation::Eqs => "eqs",
            Formulation::EqsMixed => "eqs-mixed",
            Formulation::MqsAstar => "mqs-astar",
            Formulation::MqsTomega => "mqs-tomega",
            Formulation::DarwinA => "darwin-a",
            Formulation::DarwinB => "darwin-b",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown formulation '{s}'")))
    }
}

/// Scalar time function multiplying a source vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Waveform {
    #[default]
    Zero,
    /// `amplitude · sin(2π·frequency·t)`.
    Sine { amplitude: f64, frequency: f64 },
    /// Linear rise from 0 to `amplitude` over `rise_time`, then constant.
    Ramp { amplitude: f64, rise_time: f64 },
    /// `amplitude` for `t > 0`. The derivative is taken as zero.
    Step { amplitude: f64 },
    Constant { value: f64 },
}

impl Waveform {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Waveform::Zero => 0.0,
            Waveform::Sine { amplitude, frequency } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            Waveform::Ramp { amplitude, rise_time } => amplitude * (t / rise_time).clamp(0.0, 1.0),
            Waveform::Step { amplitude } => {
                if t > 0.0 {
                    amplitude
                } else {
                    0.0
                }
            }
            Waveform::Constant { value } => value,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Waveform::Sine { amplitude, frequency } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w * (w * t).cos()
            }
            Waveform::Ramp { amplitude, rise_time } if (0.0..rise_time).contains(&t) => amplitude / rise_time,
            _ => 0.0,
        }
    }

    /// Characteristic time, used to pick sample instants.
    pub fn time_scale(&self) -> f64 {
        match *self {
            Waveform::Sine { frequency, .. } if frequency > 0.0 => 1.0 / frequency,
            Waveform::Ramp { rise_time, .. } => rise_time,
            _ => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Waveform::Zero => true,
            Waveform::Sine { amplitude, .. } | Waveform::Ramp { amplitude, .. } | Waveform::Step { amplitude } => {
                amplitude == 0.0
            }
            Waveform::Constant { value } => value == 0.0,
        }
    }
}

/// One term `vector · w(t)` or `vector · w'(t)` of the right-hand side.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    pub vector: Vec<f64>,
    pub waveform: Waveform,
    pub derivative: bool,
}

impl SourceTerm {
    pub fn new(vector: Vec<f64>, waveform: Waveform) -> Self {
        Self { vector, waveform, derivative: false }
    }

    pub fn rate(vector: Vec<f64>, waveform: Waveform) -> Self {
        Self { vector, waveform, derivative: true }
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        if self.derivative {
            self.waveform.derivative(t)
        } else {
            self.waveform.value(t)
        }
    }

    /// As [`coefficient`](Self::coefficient), with the derivative replaced by the
    /// backward difference over `dt`.
    pub fn coefficient_backward(&self, t: f64, dt: f64) -> f64 {
        if self.derivative {
            (self.waveform.value(t) - self.waveform.value(t - dt)) / dt
        } else {
            self.waveform.value(t)
        }
    }
}

/// Named contiguous slice of the state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Linear relation `P x = offset` an initial state must satisfy.
#[derive(Debug, Clone)]
pub struct Predicate {
    pub name: String,
    pub matrix: SparseMatrix,
    pub offset: Vec<f64>,
}

impl Predicate {
    /// Absolute residual `‖P x − offset‖` and the scale `‖|P|·|x|‖ + ‖offset‖` it is judged against.
    pub fn residual(&self, x: &[f64]) -> (f64, f64) {
        let px = self.matrix.matvec(x);
        let r: Vec<f64> = px.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        let mut mag = vec![0.0; self.matrix.nrows()];
        for (i, j, v) in self.matrix.triplets() {
            mag[i] += (v * x[j]).abs();
        }
        (norm2(&r), norm2(&mag) + norm2(&self.offset))
    }
}

/// Linear field recovered from the state: `map·x + lift·w(t)`, or its time derivative
/// when `rate` is set (evaluated from consecutive states).
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub name: String,
    pub map: SparseMatrix,
    pub lift: Vec<SourceTerm>,
    pub rate: bool,
}

impl FieldMap {
    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut f = self.map.matvec(x);
        for term in &self.lift {
            let c = term.coefficient(t);
            if c != 0.0 {
                f.iter_mut().zip(&term.vector).for_each(|(f, v)| *f += c * v);
            }
        }
        f
    }
}

#[derive(Debug, Clone)]
pub enum Reduce {
    /// `wᵀf`.
    Weighted(Vec<f64>),
    /// `½ fᵀ diag(d) f`.
    Energy(Vec<f64>),
}

/// Scalar reported per time step.
#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    /// Index into [`DaeSystem::fields`].
    pub field: usize,
    pub reduce: Reduce,
}

impl Observable {
    pub fn reduce(&self, f: &[f64]) -> f64 {
        match &self.reduce {
            Reduce::Weighted(w) => w.iter().zip(f).map(|(w, f)| w * f).sum(),
            Reduce::Energy(d) => 0.5 * d.iter().zip(f).map(|(d, f)| d * f * f).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DaeSystem {
    pub formulation: Formulation,
    pub m: SparseMatrix,
    pub k: SparseMatrix,
    pub sources: Vec<SourceTerm>,
    pub x0: Vec<f64>,
    /// Layout of the unknowns (columns).
    pub blocks: Vec<Block>,
    /// Layout of the equations (rows).
    pub rows: Vec<Block>,
    /// `None` when no index result is known for the system.
    pub expected_index: Option<usize>,
    pub predicates: Vec<Predicate>,
    pub fields: Vec<FieldMap>,
    pub observables: Vec<Observable>,
}

impl DaeSystem {
    pub fn new(
        formulation: Formulation,
        m: SparseMatrix,
        k: SparseMatrix,
        blocks: &[(&str, usize)],
        rows: &[(&str, usize)],
    ) -> Self {
        let n = m.nrows();
        assert_eq!(m.shape(), (n, n), "M must be square");
        assert_eq!(k.shape(), (n, n), "K must match M");
        let layout = |parts: &[(&str, usize)]| {
            let mut start = 0;
            let out: Vec<Block> = parts
                .iter()
                .map(|&(name, len)| {
                    let b = Block { name: name.to_string(), start, len };
                    start += len;
                    b
                })
                .collect();
            assert_eq!(start, n, "blocks must partition the system");
            out
        };
        let blocks = layout(blocks);
        let rows = layout(rows);
        Self {
            formulation,
            m,
            k,
            sources: Vec::new(),
            x0: vec![0.0; n],
            blocks,
            rows,
            expected_index: None,
            predicates: Vec::new(),
            fields: Vec::new(),
            observables: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn row(&self, name: &str) -> Option<&Block> {
        self.rows.iter().find(|b| b.name == name)
    }

    /// Embeds a block-local vector into a full-length state vector.
    pub fn embed(&self, name: &str, local: &[f64]) -> Vec<f64> {
        let b = self.block(name).unwrap_or_else(|| panic!("no block '{name}'"));
        embed_into(b, self.dim(), local)
    }

    /// Adds `local·w(t)` (or `local·w'(t)`) to the equations of row block `row`.
    pub fn add_source(&mut self, row: &str, local: Vec<f64>, waveform: Waveform, derivative: bool) {
        if waveform.is_zero() || local.iter().all(|&v| v == 0.0) {
            return;
        }
        let b = self.row(row).unwrap_or_else(|| panic!("no row block '{row}'"));
        let vector = embed_into(b, self.dim(), &local);
        self.sources.push(SourceTerm { vector, waveform, derivative });
    }

    /// Right-hand side `r(t)`.
    pub fn rhs(&self, t: f64) -> Vec<f64> {
        self.rhs_with(|s| s.coefficient(t))
    }

    /// Right-hand side with waveform derivatives taken as backward differences over
    /// `dt`, matching the implicit Euler difference of the algebraic rows.
    pub fn rhs_backward(&self, t: f64, dt: f64) -> Vec<f64> {
        self.rhs_with(|s| s.coefficient_backward(t, dt))
    }

    fn rhs_with(&self, coefficient: impl Fn(&SourceTerm) -> f64) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        for s in &self.sources {
            let c = coefficient(s);
            if c != 0.0 {
                r.iter_mut().zip(&s.vector).for_each(|(r, v)| *r += c * v);
            }
        }
        r
    }

    pub fn add_field(&mut self, field: FieldMap) -> usize {
        assert_eq!(field.map.ncols(), self.dim(), "field map must act on the state");
        self.fields.push(field);
        self.fields.len() - 1
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Sub-matrix of `K` between equation block `row` and unknown block `col`.
    pub fn k_block(&self, row: &str, col: &str) -> SparseMatrix {
        let (r, c) = self.ranges(row, col);
        self.k.select(&r, &c)
    }

    pub fn m_block(&self, row: &str, col: &str) -> SparseMatrix {
        let (r, c) = self.ranges(row, col);
        self.m.select(&r, &c)
    }

    fn ranges(&self, row: &str, col: &str) -> (Vec<usize>, Vec<usize>) {
        let r = self.row(row).unwrap_or_else(|| panic!("no row block '{row}'"));
        let c = self.block(col).unwrap_or_else(|| panic!("no block '{col}'"));
        (r.range().collect(), c.range().collect())
    }
}

fn embed_into(b: &Block, n: usize, local: &[f64]) -> Vec<f64> {
    assert_eq!(local.len(), b.len, "block '{}' length mismatch", b.name);
    let mut v = vec![0.0; n];
    v[b.range()].copy_from_slice(local);
    v
}
