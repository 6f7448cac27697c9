use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};

use super::operators::PanelOperators;
use crate::geometry::{QuadratureSpec, SurfaceMesh};
use crate::{Error, Result};

/// How the 1/r weight that closes each ψ-chain is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterWeight {
    /// Discretized single-layer operator: the literal 1/r-weighted double integral.
    InverseDistance,
    /// Green's identity for the harmonic function xⱼ, S𝒩ⱼ = 2πxⱼ + Kxⱼ (K the double layer,
    /// the adjoint of ψ), which turns the closing 1/r weight into one more ψ factor:
    /// b⁽ᵐ⁾ᵢⱼ = 2π⟨xⱼ, ψᵐ⁻¹𝒩ᵢ⟩ + ⟨xⱼ, ψᵐ𝒩ᵢ⟩. Equal to `InverseDistance` in the continuum; the
    /// discrete series built from it has no consistency defect between the two operators.
    GreenIdentity,
    /// Constant 1; every tensor then vanishes on a closed surface.
    Unit,
}

/// One tensor of the chain: b⁽ᵐ⁾ᵢⱼ (length³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BChainTensor {
    pub order: usize,
    pub tensor: Matrix3<f64>,
    pub spec: QuadratureSpec,
}

/// The tensors b⁽⁰⁾ … b⁽ⁿ⁾ of one mesh.
///
/// Index convention (fixed by the ball calibration): b⁽⁰⁾ᵢⱼ = ∮ 𝒩ᵢ xⱼ dS = V δᵢⱼ, and for
/// m ≥ 1, b⁽ᵐ⁾ᵢⱼ = ∫∫ 𝒩ᵢ(t) 𝒩ⱼ(s) [(1/r) ψᵐ⁻¹](s, t) ds dt, a chain of m − 1 ψ factors
/// closed by the 1/r weight. b⁽¹⁾ is the plain 1/r-weighted normal-pair tensor.
#[derive(Debug, Clone)]
pub struct BChain {
    tensors: Vec<Matrix3<f64>>,
    volume: f64,
    spec: QuadratureSpec,
    weight: OuterWeight,
}

impl BChain {
    /// Chain used by the polarizability series (Green-identity closure).
    pub fn compute(mesh: &SurfaceMesh, max_order: usize, spec: &QuadratureSpec) -> Result<Self> {
        Self::compute_with(mesh, max_order, spec, OuterWeight::GreenIdentity)
    }

    pub fn compute_with(mesh: &SurfaceMesh, max_order: usize, spec: &QuadratureSpec, weight: OuterWeight) -> Result<Self> {
        let ops = match weight {
            OuterWeight::InverseDistance => PanelOperators::assemble(mesh, spec)?,
            _ => PanelOperators::assemble_psi_only(mesh, spec)?,
        };
        Self::from_operators(mesh, &ops, max_order, weight)
    }

    /// Chains products of the assembled operators: O(max_order · P²).
    pub fn from_operators(mesh: &SurfaceMesh, ops: &PanelOperators, max_order: usize, weight: OuterWeight) -> Result<Self> {
        let n = mesh.num_panels();
        if ops.psi.nrows() != n {
            return Err(Error::InvalidArgument("operators were assembled for a different mesh".into()));
        }
        let panels = mesh.panels();
        let weighted_normals = DMatrix::from_fn(n, 3, |p, j| panels[p].area * panels[p].normal[j]);
        let weighted_positions = DMatrix::from_fn(n, 3, |p, j| panels[p].area * panels[p].centroid[j]);
        // ⟨xⱼ, v_i⟩ for the columns v_i of a chain.
        let moments = |chain: &DMatrix<f64>| {
            let m = chain.transpose() * &weighted_positions;
            Matrix3::from_fn(|i, j| m[(i, j)])
        };

        let mut chain = DMatrix::from_fn(n, 3, |p, i| panels[p].normal[i]);
        let b0 = match weight {
            OuterWeight::Unit => Matrix3::zeros(),
            _ => moments(&chain),
        };
        let mut tensors = Vec::with_capacity(max_order + 1);
        tensors.push(b0);
        let mut previous_moment = b0;
        for m in 1..=max_order {
            if m > 1 {
                chain = &ops.psi * &chain;
            }
            let b = match weight {
                OuterWeight::InverseDistance => {
                    let single = ops.single_layer.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("the single-layer operator was not assembled".into())
                    })?;
                    // b_ij = Σ_p |p| 𝒩_j(p) (S ψ^{m-1} 𝒩_i)(p)
                    let closed = single * &chain;
                    let b = closed.transpose() * &weighted_normals;
                    Matrix3::from_fn(|i, j| b[(i, j)])
                }
                OuterWeight::GreenIdentity => {
                    let next = moments(&(&ops.psi * &chain));
                    let b = previous_moment * (2.0 * PI) + next;
                    previous_moment = next;
                    b
                }
                OuterWeight::Unit => {
                    let total: Vec<f64> = (0..3).map(|i| (0..n).map(|p| panels[p].area * chain[(p, i)]).sum()).collect();
                    let flux: Vec<f64> = (0..3).map(|j| (0..n).map(|p| weighted_normals[(p, j)]).sum()).collect();
                    Matrix3::from_fn(|i, j| total[i] * flux[j])
                }
            };
            tensors.push(b);
        }
        Ok(Self {
            tensors,
            volume: mesh.measures().volume,
            spec: ops.spec,
            weight,
        })
    }

    pub fn max_order(&self) -> usize {
        self.tensors.len() - 1
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn weight(&self) -> OuterWeight {
        self.weight
    }

    pub fn tensor(&self, m: usize) -> Result<BChainTensor> {
        self.tensors
            .get(m)
            .map(|t| BChainTensor { order: m, tensor: *t, spec: self.spec })
            .ok_or_else(|| Error::InvalidArgument(format!("order {m} exceeds the computed chain length {}", self.max_order())))
    }

    pub fn tensors(&self) -> &[Matrix3<f64>] {
        &self.tensors
    }
}

/// The m-th chain tensor of `mesh`, with the 1/r weight integrated directly.
pub fn compute_b_tensor(mesh: &SurfaceMesh, m: usize, spec: &QuadratureSpec) -> Result<BChainTensor> {
    BChain::compute_with(mesh, m, spec, OuterWeight::InverseDistance)?.tensor(m)
}

#[cfg(test)]
impl BChain {
    pub(crate) fn from_parts(tensors: Vec<Matrix3<f64>>, volume: f64, spec: QuadratureSpec, weight: OuterWeight) -> Self {
        Self { tensors, volume, spec, weight }
    }
}
