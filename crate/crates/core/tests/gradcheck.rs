mod common;

use common::gradcheck::*;
use eegret::nn::{Block, DropoutRates, EncoderDims};

fn assert_reports(reports: &[BlockReport], what: &str) {
    for r in reports {
        println!("{what} {:?}: {} coords, max rel err {:.2e}", r.block.unwrap(), r.checked, r.max_rel);
    }
    for r in reports {
        assert!(r.max_rel < TOL, "{what} {:?}: rel err {:.3e}", r.block.unwrap(), r.max_rel);
    }
}

#[test]
fn dense_check_with_second_stream() {
    let p = smooth_problem(micro_dims(), true, DropoutRates::NONE, 0, 0.02);
    assert_reports(&dense_check(&p), "dense+evnet");
}

#[test]
fn dense_check_blur_only() {
    let p = smooth_problem(micro_dims(), false, DropoutRates::NONE, 100, 0.02);
    assert_reports(&dense_check(&p), "dense-blur");
}

#[test]
fn dense_check_with_dropout() {
    let p = smooth_problem(micro_dims(), true, DropoutRates { mlp1: 0.25, mlp2: 0.3, adapter: 0.3 }, 200, 0.02);
    assert_reports(&dense_check(&p), "dense+dropout");
}

#[test]
fn running_statistics_have_no_gradient() {
    let p = smooth_problem(micro_dims(), true, DropoutRates::NONE, 0, 0.02);
    let g = p.gradient();
    for b in [Block::BnRunningMean, Block::BnRunningVar] {
        assert!(g[p.params.layout().range(b)].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn full_dims_spot_check() {
    let p = Problem::new(EncoderDims::default(), 4, true, DropoutRates::NONE, 7);
    assert_reports(&spot_check(&p, 6), "full");
}
