//! Single-qubit channels in Pauli-transfer-matrix form.
//!
//! A channel acts on the Pauli coefficient vector `(1, r_x, r_y, r_z)` of a
//! state. The first row of every trace-preserving PTM is `(1, 0, 0, 0)`; the
//! lower-right 3x3 block is the unital part and the first column below the
//! diagonal the translation (non-zero only for non-unital channels).
//!
//! Fidelities here are average channel fidelities over pure input states.
//! Entanglement fidelity differs but is a monotone function of the same
//! depolarizing parameter for twirled channels.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPtm(pub Matrix4<f64>);

impl ChannelPtm {
    pub fn identity() -> Self {
        ChannelPtm(Matrix4::identity())
    }

    /// Depolarizing channel with survival parameter `p` (block `diag(p, p, p)`).
    pub fn depolarizing(p: f64) -> Self {
        ChannelPtm(Matrix4::from_diagonal(&Vector4::new(1.0, p, p, p)))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (self.0[(0, 0)] - 1.0).abs() <= tol && (1..4).all(|j| self.0[(0, j)].abs() <= tol)
    }

    pub fn apply(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.0 * v
    }
}

impl fmt::Display for ChannelPtm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            writeln!(
                f,
                "[{:>9.6} {:>9.6} {:>9.6} {:>9.6}]",
                self.0[(i, 0)],
                self.0[(i, 1)],
                self.0[(i, 2)],
                self.0[(i, 3)]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Depolarizing,
    Dephasing,
    AmplitudeDamping,
    BitFlip,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Depolarizing,
        NoiseKind::Dephasing,
        NoiseKind::AmplitudeDamping,
        NoiseKind::BitFlip,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Depolarizing => "depolarizing",
            NoiseKind::Dephasing => "dephasing",
            NoiseKind::AmplitudeDamping => "amplitude_damping",
            NoiseKind::BitFlip => "bit_flip",
        }
    }

    /// Smallest average fidelity this model reaches with strength in [0, 1].
    pub fn min_fidelity(&self) -> f64 {
        match self {
            NoiseKind::Depolarizing | NoiseKind::AmplitudeDamping => 0.5,
            NoiseKind::Dephasing | NoiseKind::BitFlip => 1.0 / 3.0,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "depolarizing" => Ok(NoiseKind::Depolarizing),
            "dephasing" => Ok(NoiseKind::Dephasing),
            "amplitude_damping" => Ok(NoiseKind::AmplitudeDamping),
            "bit_flip" => Ok(NoiseKind::BitFlip),
            other => Err(Error::Config(format!("unknown noise model '{other}'"))),
        }
    }
}

/// A noise model instance. `strength` is the damping rate for amplitude
/// damping and the error probability for the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub strength: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::OutOfRange {
                name: "noise strength",
                value: strength,
            });
        }
        Ok(NoiseModel { kind, strength })
    }
}

pub fn ptm_of(model: NoiseModel) -> Result<ChannelPtm> {
    let q = model.strength;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "noise strength",
            value: q,
        });
    }
    let m = match model.kind {
        NoiseKind::Depolarizing => Matrix4::from_diagonal(&Vector4::new(1.0, 1.0 - q, 1.0 - q, 1.0 - q)),
        NoiseKind::Dephasing => Matrix4::from_diagonal(&Vector4::new(1.0, 1.0 - 2.0 * q, 1.0 - 2.0 * q, 1.0)),
        NoiseKind::BitFlip => Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0 - 2.0 * q, 1.0 - 2.0 * q)),
        NoiseKind::AmplitudeDamping => {
            let s = (1.0 - q).sqrt();
            let mut m = Matrix4::from_diagonal(&Vector4::new(1.0, s, s, 1.0 - q));
            m[(3, 0)] = q;
            m
        }
    };
    Ok(ChannelPtm(m))
}

/// Depolarizing parameter of the Clifford twirl: trace of the unital block / 3.
pub fn effective_depolarizing(channel: &ChannelPtm) -> f64 {
    let m = channel.matrix();
    (m[(1, 1)] + m[(2, 2)] + m[(3, 3)]) / 3.0
}

/// Noise strength giving average fidelity `f` (equivalently `p = 2f - 1`).
pub fn strength_from_fidelity(kind: NoiseKind, f: f64) -> Result<NoiseModel> {
    if !(f >= kind.min_fidelity() && f <= 1.0) {
        return Err(Error::UnreachableFidelity {
            kind: kind.name().to_string(),
            fidelity: f,
        });
    }
    let strength = match kind {
        NoiseKind::Depolarizing => 2.0 * (1.0 - f),
        NoiseKind::Dephasing | NoiseKind::BitFlip => 1.5 * (1.0 - f),
        NoiseKind::AmplitudeDamping => {
            // p = (2s + s^2)/3 with s = sqrt(1 - gamma)
            let s = (6.0 * f - 2.0).sqrt() - 1.0;
            1.0 - s * s
        }
    };
    NoiseModel::new(kind, strength.clamp(0.0, 1.0))
}

/// `a` followed by `b`.
pub fn compose(a: &ChannelPtm, b: &ChannelPtm) -> ChannelPtm {
    ChannelPtm(b.0 * a.0)
}

/// Sequential composition of a chain of channels, first element applied first.
pub fn compose_chain(chain: &[ChannelPtm]) -> ChannelPtm {
    chain.iter().fold(ChannelPtm::identity(), |acc, c| compose(&acc, c))
}

/// The 24 single-qubit Clifford elements in PTM form, generated from words in
/// H and S.
pub struct CliffordTable {
    elements: Vec<Matrix4<f64>>,
    product: Vec<[u8; 24]>,
    inverse: [u8; 24],
}

pub static CLIFFORDS: LazyLock<CliffordTable> = LazyLock::new(CliffordTable::generate);

fn integer_key(m: &Matrix4<f64>) -> [i8; 16] {
    let mut key = [0i8; 16];
    for (i, v) in m.iter().enumerate() {
        key[i] = v.round() as i8;
    }
    key
}

impl CliffordTable {
    pub const SIZE: usize = 24;

    fn generate() -> Self {
        #[rustfmt::skip]
        let h = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        #[rustfmt::skip]
        let s = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let mut elements = vec![Matrix4::identity()];
        let mut keys = vec![integer_key(&elements[0])];
        let mut frontier = 0;
        while frontier < elements.len() {
            let base = elements[frontier];
            for g in [&h, &s] {
                let next = g * base;
                let key = integer_key(&next);
                if !keys.contains(&key) {
                    keys.push(key);
                    elements.push(next);
                }
            }
            frontier += 1;
        }
        assert_eq!(elements.len(), Self::SIZE, "Clifford closure");

        let index_of = |m: &Matrix4<f64>| {
            let key = integer_key(m);
            keys.iter().position(|k| *k == key).expect("closed under products") as u8
        };
        let product = (0..Self::SIZE)
            .map(|a| {
                let mut row = [0u8; 24];
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot = index_of(&(elements[a] * elements[b]));
                }
                row
            })
            .collect();
        let mut inverse = [0u8; 24];
        for (a, slot) in inverse.iter_mut().enumerate() {
            *slot = index_of(&elements[a].transpose());
        }
        CliffordTable {
            elements,
            product,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn ptm(&self, index: usize) -> &Matrix4<f64> {
        &self.elements[index]
    }

    /// Index of `elements[a] * elements[b]` (apply `b`, then `a`).
    pub fn product(&self, a: usize, b: usize) -> usize {
        self.product[a][b] as usize
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..Self::SIZE)
    }

    /// Exact twirl: average of `C^T R C` over the group.
    pub fn twirl(&self, channel: &ChannelPtm) -> ChannelPtm {
        let sum = self
            .elements
            .iter()
            .fold(Matrix4::zeros(), |acc, c| acc + c.transpose() * channel.0 * c);
        ChannelPtm(sum / Self::SIZE as f64)
    }
}
