//! Calculated power, mismatch, loss and its gradient, and the explicit
//! Jacobian used by Newton-Raphson.
//!
//! The gradient of the mean-squared mismatch is `(2/m)·Jᵀ·[dp; dq]`. It is
//! evaluated without forming `J`: writing the mismatch weights as
//! `w_i = dp_i − j·dq_i` (zero where a component is not constrained), every
//! column sum of the partial-derivative blocks collapses onto a single
//! transpose-apply of `Y_bus`:
//!
//! ```text
//! T      = Y_busᵀ · conj(w ⊙ V)
//! ∂L/∂θ_j  ∝ Re( −j·V̄_j·T̄_j + j·w_j·V_j·Ī_j )
//! ∂L/∂|V_j| ∝ Re(    V̄_j·T̄_j +   w_j·V_j·Ī_j ) / |V_j|
//! ```
//!
//! so one iteration costs two sparse products and a handful of length-N
//! vectors.

use crate::grid::PowerFlowProblem;
use crate::sparse::{DenseRealMatrix, SparseComplexMatrix, TripletBuilder};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const J: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfError {
    #[error("voltage magnitude is zero at bus index {bus}")]
    ZeroMagnitude { bus: usize },
    #[error("state has {got} buses, network has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Borrowed view of everything the power-flow equations need. Batches expose
/// the same view over their stacked arrays, with one slack per case.
#[derive(Debug, Clone, Copy)]
pub struct NetworkView<'a> {
    pub y_bus: &'a SparseComplexMatrix,
    pub s_bus: &'a [Complex64],
    pub pv: &'a [usize],
    pub pq: &'a [usize],
    pub slacks: &'a [usize],
    pub vm_setpoint: &'a [f64],
}

impl NetworkView<'_> {
    pub fn n_buses(&self) -> usize {
        self.s_bus.len()
    }

    /// Number of mismatch components, `|pv| + 2|pq|`.
    pub fn n_components(&self) -> usize {
        self.pv.len() + 2 * self.pq.len()
    }

    /// Number of trainable parameters, also `|pv| + 2|pq|`.
    pub fn n_params(&self) -> usize {
        self.n_components()
    }

    /// Iterates `pv` followed by `pq`, the angle ordering used everywhere.
    pub fn pvpq(&self) -> impl Iterator<Item = usize> + '_ {
        self.pv.iter().chain(self.pq).copied()
    }
}

impl PowerFlowProblem {
    pub fn view(&self) -> NetworkView<'_> {
        NetworkView {
            y_bus: &self.y_bus,
            s_bus: &self.s_bus,
            pv: &self.pv,
            pq: &self.pq,
            slacks: std::slice::from_ref(&self.slack),
            vm_setpoint: &self.vm_setpoint,
        }
    }
}

/// Polar bus voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageState {
    /// p.u.
    pub vm: Vec<f64>,
    /// radians
    pub va: Vec<f64>,
}

impl VoltageState {
    /// Magnitudes at their setpoints (1.0 at pq), all angles zero.
    pub fn flat(net: &NetworkView) -> Self {
        Self {
            vm: net.vm_setpoint.to_vec(),
            va: vec![0.0; net.n_buses()],
        }
    }

    pub fn n_buses(&self) -> usize {
        self.vm.len()
    }

    pub fn complex(&self) -> Vec<Complex64> {
        self.vm
            .iter()
            .zip(&self.va)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    /// Forces slack angles to zero and pv/slack magnitudes to their
    /// setpoints.
    pub fn project(&mut self, net: &NetworkView) {
        for &s in net.slacks {
            self.va[s] = 0.0;
            self.vm[s] = net.vm_setpoint[s];
        }
        for &k in net.pv {
            self.vm[k] = net.vm_setpoint[k];
        }
    }

    /// Packs the trainable entries as `[va(pv), va(pq), vm(pq)]`.
    pub fn pack(&self, net: &NetworkView) -> Vec<f64> {
        let mut out = Vec::with_capacity(net.n_params());
        out.extend(net.pvpq().map(|k| self.va[k]));
        out.extend(net.pq.iter().map(|&k| self.vm[k]));
        out
    }

    /// Inverse of [`VoltageState::pack`]; non-trainable entries are left
    /// untouched.
    pub fn unpack(&mut self, net: &NetworkView, params: &[f64]) {
        let n_angles = net.pv.len() + net.pq.len();
        for (k, bus) in net.pvpq().enumerate() {
            self.va[bus] = params[k];
        }
        for (k, &bus) in net.pq.iter().enumerate() {
            self.vm[bus] = params[n_angles + k];
        }
    }

    /// ∞-norm distance over concatenated `(vm, va)`.
    pub fn distance(&self, other: &VoltageState) -> f64 {
        self.vm
            .iter()
            .zip(&other.vm)
            .chain(self.va.iter().zip(&other.va))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Active mismatch over `pv ∪ pq` and reactive mismatch over `pq`, both as
/// calculated minus specified.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mismatch {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
}

impl Mismatch {
    pub fn with_capacity(net: &NetworkView) -> Self {
        Self {
            dp: Vec::with_capacity(net.pv.len() + net.pq.len()),
            dq: Vec::with_capacity(net.pq.len()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.dp.iter().chain(&self.dq).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum_squares(&self) -> f64 {
        self.dp.iter().chain(&self.dq).map(|v| v * v).sum()
    }

    pub fn len(&self) -> usize {
        self.dp.len() + self.dq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[dp; dq]`
    pub fn stacked(&self) -> Vec<f64> {
        self.dp.iter().chain(&self.dq).copied().collect()
    }
}

/// Gradient of the loss with respect to the trainable parameters only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradient {
    /// over `pv ∪ pq`
    pub d_va: Vec<f64>,
    /// over `pq`
    pub d_vm: Vec<f64>,
}

impl Gradient {
    /// Same ordering as [`VoltageState::pack`].
    pub fn packed(&self) -> Vec<f64> {
        self.d_va.iter().chain(&self.d_vm).copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.d_va.iter().chain(&self.d_vm).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.d_va.iter().chain(&self.d_vm).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct JacobianBlocks {
    pub ds_dvm: SparseComplexMatrix,
    pub ds_dva: SparseComplexMatrix,
    /// Rows `[P(pv∪pq); Q(pq)]`, columns `[θ(pv∪pq); |V|(pq)]`.
    pub assembled: DenseRealMatrix,
}

/// `S_calc = V ⊙ conj(Y_bus·V)`.
pub fn calc_power(state: &VoltageState, y_bus: &SparseComplexMatrix) -> Result<Vec<Complex64>, PfError> {
    check_dims(state, y_bus.n_rows())?;
    let v = state.complex();
    let current = y_bus.spmv(&v).expect("dimensions checked");
    Ok(v.iter().zip(&current).map(|(v, i)| v * i.conj()).collect())
}

pub fn mismatch(state: &VoltageState, net: &NetworkView) -> Result<Mismatch, PfError> {
    let mut ws = PfWorkspace::new(net.n_buses());
    let mut out = Mismatch::with_capacity(net);
    ws.forward(state, net, &mut out)?;
    Ok(out)
}

/// Mean squared mismatch, `(Σdp² + Σdq²) / (|pv| + 2|pq|)`.
pub fn loss(m: &Mismatch) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.sum_squares() / m.len() as f64
    }
}

pub fn grad_loss(state: &VoltageState, net: &NetworkView) -> Result<Gradient, PfError> {
    let mut ws = PfWorkspace::new(net.n_buses());
    let mut m = Mismatch::with_capacity(net);
    ws.forward(state, net, &mut m)?;
    let mut grad = Gradient {
        d_va: vec![0.0; net.pv.len() + net.pq.len()],
        d_vm: vec![0.0; net.pq.len()],
    };
    let scale = if m.is_empty() { 0.0 } else { 2.0 / m.len() as f64 };
    ws.backward(state, net, &m, scale, &mut grad.d_va, &mut grad.d_vm)?;
    Ok(grad)
}

/// `∂S/∂|V|` and `∂S/∂θ` as sparse matrices on the pattern of `Y_bus` plus
/// the full diagonal.
pub fn partial_derivatives(
    state: &VoltageState,
    y_bus: &SparseComplexMatrix,
) -> Result<(SparseComplexMatrix, SparseComplexMatrix), PfError> {
    check_dims(state, y_bus.n_rows())?;
    check_magnitudes(state)?;
    let n = state.n_buses();
    let v = state.complex();
    let current = y_bus.spmv(&v).expect("dimensions checked");
    let unit: Vec<Complex64> = v.iter().zip(&state.vm).map(|(v, &m)| v / m).collect();

    let cap = y_bus.nnz() + n;
    let mut dvm = TripletBuilder::with_capacity(n, n, cap);
    let mut dva = TripletBuilder::with_capacity(n, n, cap);
    for i in 0..n {
        let (cols, vals) = y_bus.row(i);
        let mut has_diag = false;
        for (&j, &y) in cols.iter().zip(vals) {
            let mut m_ij = v[i] * (y * unit[j]).conj();
            let mut a_ij = -J * v[i] * (y * v[j]).conj();
            if j == i {
                has_diag = true;
                m_ij += unit[i] * current[i].conj();
                a_ij += J * v[i] * current[i].conj();
            }
            dvm.push(i, j, m_ij).expect("in range");
            dva.push(i, j, a_ij).expect("in range");
        }
        if !has_diag {
            dvm.push(i, i, unit[i] * current[i].conj()).expect("in range");
            dva.push(i, i, J * v[i] * current[i].conj()).expect("in range");
        }
    }
    Ok((dvm.build(), dva.build()))
}

pub fn assemble_jacobian(state: &VoltageState, net: &NetworkView) -> Result<JacobianBlocks, PfError> {
    let (ds_dvm, ds_dva) = partial_derivatives(state, net.y_bus)?;
    let n = state.n_buses();
    let n_angles = net.pv.len() + net.pq.len();
    let size = n_angles + net.pq.len();

    let mut angle_pos = vec![usize::MAX; n];
    for (k, bus) in net.pvpq().enumerate() {
        angle_pos[bus] = k;
    }
    let mut mag_pos = vec![usize::MAX; n];
    for (k, &bus) in net.pq.iter().enumerate() {
        mag_pos[bus] = k;
    }

    let mut jac = DenseRealMatrix::zeros(size, size);
    for i in 0..n {
        let p_row = angle_pos[i];
        let q_row = mag_pos[i];
        if p_row == usize::MAX {
            continue;
        }
        let (cols, vals) = ds_dva.row(i);
        for (&j, d) in cols.iter().zip(vals) {
            if angle_pos[j] != usize::MAX {
                jac[(p_row, angle_pos[j])] = d.re;
                if q_row != usize::MAX {
                    jac[(n_angles + q_row, angle_pos[j])] = d.im;
                }
            }
        }
        let (cols, vals) = ds_dvm.row(i);
        for (&j, d) in cols.iter().zip(vals) {
            if mag_pos[j] != usize::MAX {
                jac[(p_row, n_angles + mag_pos[j])] = d.re;
                if q_row != usize::MAX {
                    jac[(n_angles + q_row, n_angles + mag_pos[j])] = d.im;
                }
            }
        }
    }
    Ok(JacobianBlocks {
        ds_dvm,
        ds_dva,
        assembled: jac,
    })
}

fn check_dims(state: &VoltageState, n: usize) -> Result<(), PfError> {
    if state.vm.len() != n || state.va.len() != n {
        return Err(PfError::DimensionMismatch {
            expected: n,
            got: state.vm.len(),
        });
    }
    Ok(())
}

fn check_magnitudes(state: &VoltageState) -> Result<(), PfError> {
    match state.vm.iter().position(|&m| m == 0.0) {
        Some(bus) => Err(PfError::ZeroMagnitude { bus }),
        None => Ok(()),
    }
}

/// Reusable scratch for the forward and backward passes: four complex
/// vectors of length N. One workspace per concurrent solver run.
#[derive(Debug, Clone)]
pub struct PfWorkspace {
    voltage: Vec<Complex64>,
    current: Vec<Complex64>,
    weighted: Vec<Complex64>,
    back: Vec<Complex64>,
}

impl PfWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            voltage: vec![ZERO; n],
            current: vec![ZERO; n],
            weighted: vec![ZERO; n],
            back: vec![ZERO; n],
        }
    }

    /// Evaluates `V`, `I = Y_bus·V` and the mismatch into `out`. Leaves `V`
    /// and `I` cached for [`PfWorkspace::backward`].
    pub fn forward(&mut self, state: &VoltageState, net: &NetworkView, out: &mut Mismatch) -> Result<(), PfError> {
        let n = net.n_buses();
        check_dims(state, n)?;
        if self.voltage.len() != n {
            *self = Self::new(n);
        }
        for ((v, &m), &a) in self.voltage.iter_mut().zip(&state.vm).zip(&state.va) {
            *v = Complex64::from_polar(m, a);
        }
        net.y_bus
            .spmv_into(&self.voltage, &mut self.current)
            .expect("dimensions checked");
        out.dp.clear();
        out.dq.clear();
        for bus in net.pvpq() {
            let s = self.voltage[bus] * self.current[bus].conj();
            out.dp.push(s.re - net.s_bus[bus].re);
        }
        for &bus in net.pq {
            let s = self.voltage[bus] * self.current[bus].conj();
            out.dq.push(s.im - net.s_bus[bus].im);
        }
        Ok(())
    }

    /// `scale·Jᵀ·[dp; dq]` written into `d_va` (over pv∪pq) and `d_vm`
    /// (over pq). Must follow a [`PfWorkspace::forward`] on the same state.
    pub fn backward(
        &mut self,
        state: &VoltageState,
        net: &NetworkView,
        m: &Mismatch,
        scale: f64,
        d_va: &mut [f64],
        d_vm: &mut [f64],
    ) -> Result<(), PfError> {
        let n_pv = net.pv.len();
        for &bus in net.pq {
            if state.vm[bus] == 0.0 {
                return Err(PfError::ZeroMagnitude { bus });
            }
        }
        self.weighted.fill(ZERO);
        for (k, bus) in net.pvpq().enumerate() {
            self.weighted[bus] = Complex64::new(m.dp[k], 0.0);
        }
        for (k, &bus) in net.pq.iter().enumerate() {
            self.weighted[bus].im = -m.dq[k];
        }
        for (w, v) in self.weighted.iter_mut().zip(&self.voltage) {
            *w = (*w * v).conj();
        }
        net.y_bus
            .transpose_apply_into(&self.weighted, &mut self.back)
            .expect("dimensions checked");

        // weighted[j] now holds conj(w_j V_j), so w_j V_j Ī_j = conj(weighted_j) Ī_j.
        let diag = |ws: &Self, bus: usize| ws.weighted[bus].conj() * ws.current[bus].conj();
        let off = |ws: &Self, bus: usize| ws.voltage[bus].conj() * ws.back[bus].conj();

        for (k, bus) in net.pvpq().enumerate() {
            let g = -J * off(self, bus) + J * diag(self, bus);
            d_va[k] = scale * g.re;
        }
        for (k, &bus) in net.pq.iter().enumerate() {
            let g = off(self, bus) + diag(self, bus);
            d_vm[k] = scale * g.re / state.vm[bus];
        }
        debug_assert_eq!(d_va.len(), n_pv + net.pq.len());
        Ok(())
    }
}
