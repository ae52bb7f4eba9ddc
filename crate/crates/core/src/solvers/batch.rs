use super::dpf::{prepare_init, run};
use super::{DpfConfig, Solution, SolverError};
use crate::grid::PowerFlowProblem;
use crate::pf::{NetworkView, VoltageState};
use crate::sparse::{block_diag, SparseComplexMatrix};
use num_complex::Complex64;
use std::ops::Range;

/// Several problems stacked into one block-diagonal system. Bus `k` of case
/// `b` sits at index `k + offsets[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedProblem {
    pub y_bus: SparseComplexMatrix,
    pub s_bus: Vec<Complex64>,
    pub pv: Vec<usize>,
    pub pq: Vec<usize>,
    pub slacks: Vec<usize>,
    pub vm_setpoint: Vec<f64>,
    pub case_sizes: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl BatchedProblem {
    pub fn n_cases(&self) -> usize {
        self.case_sizes.len()
    }

    pub fn view(&self) -> NetworkView<'_> {
        NetworkView {
            y_bus: &self.y_bus,
            s_bus: &self.s_bus,
            pv: &self.pv,
            pq: &self.pq,
            slacks: &self.slacks,
            vm_setpoint: &self.vm_setpoint,
        }
    }

    pub fn case_range(&self, case: usize) -> Range<usize> {
        self.offsets[case]..self.offsets[case] + self.case_sizes[case]
    }
}

pub fn make_batch(problems: &[&PowerFlowProblem]) -> Result<BatchedProblem, SolverError> {
    if problems.is_empty() {
        return Err(SolverError::EmptyBatch);
    }
    let blocks: Vec<&SparseComplexMatrix> = problems.iter().map(|p| &p.y_bus).collect();
    let y_bus = block_diag(&blocks).expect("admittance matrices are square and non-empty list");
    let mut batch = BatchedProblem {
        y_bus,
        s_bus: Vec::new(),
        pv: Vec::new(),
        pq: Vec::new(),
        slacks: Vec::new(),
        vm_setpoint: Vec::new(),
        case_sizes: Vec::new(),
        offsets: Vec::new(),
    };
    let mut offset = 0;
    for p in problems {
        batch.s_bus.extend_from_slice(&p.s_bus);
        batch.vm_setpoint.extend_from_slice(&p.vm_setpoint);
        batch.pv.extend(p.pv.iter().map(|k| k + offset));
        batch.pq.extend(p.pq.iter().map(|k| k + offset));
        batch.slacks.push(p.slack + offset);
        batch.case_sizes.push(p.n_buses());
        batch.offsets.push(offset);
        offset += p.n_buses();
    }
    Ok(batch)
}

/// One gradient run over the stacked system with a single shared loss.
/// Each case is judged on its own mismatch and frozen once converged.
pub fn solve_batch(
    batch: &BatchedProblem,
    config: &DpfConfig,
    inits: Option<&[VoltageState]>,
) -> Result<Vec<Solution>, SolverError> {
    let net = batch.view();
    let stacked = match inits {
        Some(states) => {
            if states.len() != batch.n_cases() {
                return Err(SolverError::InvalidConfig(format!(
                    "{} initial states for {} cases",
                    states.len(),
                    batch.n_cases()
                )));
            }
            let mut vm = Vec::with_capacity(net.n_buses());
            let mut va = Vec::with_capacity(net.n_buses());
            for s in states {
                vm.extend_from_slice(&s.vm);
                va.extend_from_slice(&s.va);
            }
            Some(VoltageState { vm, va })
        }
        None => None,
    };
    let start = prepare_init(&net, stacked.as_ref())?;
    let ranges: Vec<Range<usize>> = (0..batch.n_cases()).map(|c| batch.case_range(c)).collect();
    run(&net, &ranges, config, start)
}
