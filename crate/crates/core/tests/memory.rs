//! Holds a single test so the counting allocator sees no other threads.

mod common;

use gridflux::grid::build_problem;
use gridflux::pf::{grad_loss, VoltageState};
use gridflux::scaling::node_scale;
use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

struct LargestAlloc;

static ARMED: AtomicBool = AtomicBool::new(false);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for LargestAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if ARMED.load(Ordering::Relaxed) {
            LARGEST.fetch_max(layout.size(), Ordering::Relaxed);
        }
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        if ARMED.load(Ordering::Relaxed) {
            LARGEST.fetch_max(new_size, Ordering::Relaxed);
        }
        System.realloc(ptr, layout, new_size)
    }
}

#[global_allocator]
static ALLOC: LargestAlloc = LargestAlloc;

#[test]
fn gradient_allocates_nothing_of_dense_size() {
    let case = node_scale(&common::case("case118"), 8, 1).unwrap();
    let p = build_problem(&case).unwrap();
    let n = p.n_buses();
    let state = VoltageState::flat(&p.view());
    ARMED.store(true, Ordering::SeqCst);
    let g = grad_loss(&state, &p.view()).unwrap();
    ARMED.store(false, Ordering::SeqCst);
    assert!(g.max_abs().is_finite());
    let largest = LARGEST.load(Ordering::SeqCst);
    // A dense N×N real matrix would need 8·N² bytes; every buffer here is
    // a vector of length O(N).
    assert!(largest <= 16 * 2 * n, "largest allocation {largest} bytes for N = {n}");
}
