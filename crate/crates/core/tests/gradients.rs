mod common;

use common::{bpr_gradient_error, nmor_gradient_error, sgns_gradient_error, transr_gradient_error, GRAD_TOLERANCE};

#[test]
fn bpr_matches_central_differences() {
    for seed in 0..3 {
        let err = bpr_gradient_error(seed);
        assert!(err < GRAD_TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn skip_gram_matches_central_differences() {
    for seed in 0..3 {
        let err = sgns_gradient_error(seed);
        assert!(err < GRAD_TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn transr_matches_central_differences_for_every_group() {
    for seed in 0..3 {
        let err = transr_gradient_error(seed);
        assert!(err < GRAD_TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn gate_matches_central_differences() {
    for seed in 0..3 {
        let err = nmor_gradient_error(seed);
        assert!(err < GRAD_TOLERANCE, "seed {seed}: {err}");
    }
}
