//! Peak heap use of a streamed step does not grow with the number of
//! directions. Single test: the counting allocator is process-wide.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use random_bases::nn::ParamVector;
use random_bases::objective::Quadratic;
use random_bases::optim::{Optimizer, OptimizerConfig, Rule, TrainerState};
use random_bases::subspace::SchemeKind;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
        PEAK.fetch_max(now, Ordering::SeqCst);
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
        System.dealloc(ptr, layout)
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

const DIM: usize = 200_000;

/// Extra bytes at the high-water mark of one step.
fn step_peak(rule: Rule, d: usize, scheme: SchemeKind) -> usize {
    let q = Quadratic::bowl(DIM);
    let opt = Optimizer::for_dim(OptimizerConfig::new(rule, -4).with_d(d).with_scheme(scheme), DIM).unwrap();
    let mut state = TrainerState::new(ParamVector(vec![1.0; DIM]));
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    opt.step(&mut state, &q).unwrap();
    opt.step(&mut state, &q).unwrap();
    PEAK.load(Ordering::SeqCst) - base
}

#[test]
fn streamed_steps_use_memory_independent_of_d() {
    let vector = DIM * 8;
    for rule in [Rule::Rbd, Rule::Fpd] {
        for scheme in [SchemeKind::Single, SchemeKind::Even(4)] {
            let small = step_peak(rule, 4, scheme);
            let large = step_peak(rule, 128, scheme);
            // Gradient, update and one direction buffer, plus FPD's anchor.
            assert!(large <= 5 * vector, "{rule} {scheme}: {large} bytes");
            assert!(large <= small + 4096, "{rule} {scheme}: d=4 {small} vs d=128 {large}");
            // A materialized basis would need d·D·8 bytes.
            assert!(large * 20 < 128 * vector);
        }
    }
}
