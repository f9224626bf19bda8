mod common;

use common::*;

const TOL: f64 = 1e-6;

#[test]
fn conv2d_matches_oracle() {
    let e = conv2d_oracle_error(50, 1);
    assert!(e <= TOL, "{e}");
}

#[test]
fn causal_conv1d_matches_oracle() {
    let e = conv1d_oracle_error(50, 2);
    assert!(e <= TOL, "{e}");
}

#[test]
fn linear_matches_oracle() {
    let e = linear_oracle_error(50, 3);
    assert!(e <= TOL, "{e}");
}

#[test]
fn gru_matches_oracle() {
    let e = gru_oracle_error(50, 4);
    assert!(e <= TOL, "{e}");
}

#[test]
fn deep_filter_matches_oracle() {
    let e = deep_filter_oracle_error(50, 5);
    assert!(e <= TOL, "{e}");
}
