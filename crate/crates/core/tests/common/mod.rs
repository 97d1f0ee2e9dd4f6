#![allow(dead_code)]

use phasegate::optics::{KrausOp, PolKet};
use phasegate::qmath::{CMat, Mat2, Mat4, C64};
use proptest::prelude::*;

pub fn c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

pub fn mat<const N: usize>() -> impl Strategy<Value = CMat<N>> {
    proptest::collection::vec(c64(), N * N).prop_map(|v| {
        let mut m = CMat::<N>::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = v[i * N + j];
            }
        }
        m
    })
}

pub fn mat2() -> impl Strategy<Value = Mat2> {
    mat::<2>()
}

pub fn mat4() -> impl Strategy<Value = Mat4> {
    mat::<4>()
}

pub fn hermitian4() -> impl Strategy<Value = Mat4> {
    mat4().prop_map(|m| m.hermitian_part())
}

pub fn ket() -> impl Strategy<Value = PolKet> {
    (c64(), c64())
        .prop_filter("non-zero ket", |(a, b)| a.norm_sqr() + b.norm_sqr() > 1e-3)
        .prop_map(|(a, b)| PolKet::new(a, b).unwrap())
}

/// Any operator with singular values at most one.
pub fn contraction() -> impl Strategy<Value = KrausOp> {
    mat2().prop_map(|m| {
        let s = (m.adjoint() * m).max_abs() * 2.0;
        KrausOp(m.scale_re(1.0 / s.sqrt().max(1.0)))
    })
}

/// Haar-distributed U(2) element (`|U₀₀|²` uniform, phases uniform).
pub fn unitary2() -> impl Strategy<Value = Mat2> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU).prop_map(
        |(u, a, b, g)| {
            let c = u.sqrt();
            let s = (1.0 - u).sqrt();
            let e = |x: f64| C64::from_polar(1.0, x);
            let mut m = Mat2::zeros();
            m.0[0][0] = e(a) * c;
            m.0[0][1] = e(b) * s;
            m.0[1][0] = -e(g - b) * s;
            m.0[1][1] = e(g - a) * c;
            m
        },
    )
}
