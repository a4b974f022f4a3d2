use proptest::prelude::*;

use super::*;
use crate::models::{ag_frame, euclidean_frame, heisenberg_frame};
use crate::polynomial::{rat, ratio, Polynomial, Rational};

fn poly(n: usize, terms: &[(&[u32], i64)]) -> Polynomial {
    Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), rat(*c)))).unwrap()
}

fn zero_pt(n: usize) -> Vec<Rational> {
    vec![rat(0); n]
}

fn mi(e: &[usize]) -> MultiIndex {
    MultiIndex::new(e.to_vec(), 2).unwrap()
}

// Expected values below were produced by tests/oracles/brackets_sympy.py.

#[test]
fn ag_first_bracket() {
    let f = ag_frame();
    let b = lie_bracket(f.generator(1).unwrap(), f.generator(2).unwrap()).unwrap();
    let expected = VectorField::new(vec![
        Polynomial::zero(4),
        Polynomial::zero(4),
        poly(4, &[(&[0, 0, 0, 0], -4)]),
        poly(4, &[(&[1, 0, 1, 0], 4)]),
    ])
    .unwrap();
    assert_eq!(b, expected);
    assert_eq!(iterated_commutator(&f, &mi(&[2, 1])).unwrap(), expected);
}

#[test]
fn ag_iterated_commutators() {
    let f = ag_frame();
    let c211 = iterated_commutator(&f, &mi(&[2, 1, 1])).unwrap();
    assert_eq!(c211.coeff(3), &poly(4, &[(&[0, 0, 1, 0], 12), (&[1, 1, 0, 0], 8)]));
    assert!((0..3).all(|i| c211.coeff(i).is_zero()));
    let c21112 = iterated_commutator(&f, &mi(&[2, 1, 1, 1, 2])).unwrap();
    assert_eq!(c21112, VectorField::coordinate(4, 3).scale(&rat(32)));
    assert_eq!(iterated_commutator(&f, &mi(&[2])).unwrap(), f.generator(2).unwrap().clone());
}

#[test]
fn bracket_of_field_with_itself_vanishes() {
    let f = ag_frame();
    let x = f.generator(1).unwrap();
    assert!(lie_bracket(x, x).unwrap().is_zero());
}

#[test]
fn single_term_bracket() {
    let h = heisenberg_frame();
    let b = lie_bracket(h.generator(1).unwrap(), h.generator(2).unwrap()).unwrap();
    assert_eq!(b, VectorField::coordinate(3, 2));
}

#[test]
fn multi_index_out_of_range() {
    assert!(matches!(MultiIndex::new(vec![1, 3], 2), Err(crate::Error::IndexOutOfRange { .. })));
    assert!(MultiIndex::new(vec![], 2).is_err());
}

#[test]
fn ag_layers_at_origin() {
    let f = ag_frame();
    let d2 = layer_at(&f, &zero_pt(4), 2).unwrap();
    assert_eq!(d2.len(), 1);
    assert_eq!(d2[0][2].clone() * d2[0][2].clone() > rat(0), true);
    assert!(d2[0][0] == rat(0) && d2[0][1] == rat(0) && d2[0][3] == rat(0));
    assert!(layer_at(&f, &zero_pt(4), 3).unwrap().is_empty());
    let d1 = layer_at(&f, &zero_pt(4), 1).unwrap();
    assert_eq!(d1.len(), 2);
}

#[test]
fn ag_growth_report() {
    let r = growth_report(&ag_frame(), &zero_pt(4), 6).unwrap();
    assert_eq!(r.layer_dims, vec![2, 3, 3, 3, 4]);
    assert_eq!(r.step, Some(5));
    assert_eq!(r.weights, vec![1, 1, 2, 5]);
    assert!(r.condition_13);
    assert!(!r.condition_12);
    assert!(r.bracket_generating);
    assert!(weight_gap_check(&r));
}

#[test]
fn heisenberg_and_euclidean_growth() {
    let r = growth_report(&heisenberg_frame(), &zero_pt(3), DEFAULT_CAP).unwrap();
    assert_eq!(r.layer_dims, vec![2, 3]);
    assert!(r.condition_13);
    let e = growth_report(&euclidean_frame(2), &zero_pt(2), DEFAULT_CAP).unwrap();
    assert_eq!(e.layer_dims, vec![2]);
    assert_eq!(e.step, Some(1));
}

#[test]
fn not_bracket_generating_is_reported() {
    // d1, d2 in R^3 never reach the third direction
    let f = Frame::with_identity_metric(vec![VectorField::coordinate(3, 0), VectorField::coordinate(3, 1)]).unwrap();
    let r = growth_report(&f, &zero_pt(3), 4).unwrap();
    assert!(!r.bracket_generating);
    assert_eq!(r.step, None);
    assert!(matches!(adapted_basis(&f, &zero_pt(3), 4), Err(crate::Error::NotBracketGenerating { .. })));
}

#[test]
fn adapted_bases() {
    let b = adapted_basis(&ag_frame(), &zero_pt(4), DEFAULT_CAP).unwrap();
    let idx: Vec<Vec<usize>> = b.indices.iter().map(|m| m.entries().to_vec()).collect();
    assert_eq!(idx, vec![vec![1], vec![2], vec![2, 1], vec![2, 1, 1, 1, 2]]);
    assert_eq!(b.weights, vec![1, 1, 2, 5]);
    let h = adapted_basis(&heisenberg_frame(), &zero_pt(3), DEFAULT_CAP).unwrap();
    assert_eq!(h.weights, vec![1, 1, 2]);
    assert_eq!(h.indices[2].entries(), &[2, 1]);
    let e = adapted_basis(&euclidean_frame(2), &zero_pt(2), DEFAULT_CAP).unwrap();
    assert_eq!(e.weights, vec![1, 1]);
}

#[test]
fn weight_gaps() {
    assert!(weights_satisfy_gap(&[1, 1, 2, 5]));
    assert!(weights_satisfy_gap(&[1, 1, 2]));
    assert!(!weights_satisfy_gap(&[1, 1, 2, 3]));
}

#[test]
fn condition_13_dims() {
    assert!(condition_13_from_dims(&[2, 3, 3, 3, 4], 4));
    assert!(!condition_13_from_dims(&[2, 3, 4, 5], 5));
    assert!(condition_13_from_dims(&[2, 3], 3));
}

#[test]
fn equiregularity_on_samples() {
    // AG frame: at x1 != 0 the weight-3 bracket reaches d4
    let rep = equiregularity(&ag_frame(), &[vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]], 6).unwrap();
    assert_eq!(rep.samples[0].layer_dims, vec![2, 3, 3, 3, 4]);
    assert_eq!(rep.samples[1].layer_dims, vec![2, 3, 4]);
    assert!(!rep.equiregular_on_samples);
    let h = equiregularity(&heisenberg_frame(), &[vec![0.0; 3], vec![2.0, -1.0, 5.0]], 4).unwrap();
    assert!(h.equiregular_on_samples);
}

#[test]
fn frame_json_round_trip() {
    let f = ag_frame();
    let s = serde_json::to_string(&f).unwrap();
    assert!(s.contains(r#""metric":"identity""#));
    assert_eq!(Frame::from_json_str(&s).unwrap(), f);
    let g = f.with_metric(Metric::new(vec![vec![rat(2), ratio(1, 2)], vec![ratio(1, 2), rat(1)]]).unwrap()).unwrap();
    assert_eq!(Frame::from_json_str(&serde_json::to_string(&g).unwrap()).unwrap(), g);
}

#[test]
fn metric_validation() {
    assert!(Metric::new(vec![vec![rat(1), rat(2)], vec![rat(2), rat(1)]]).is_err());
    assert!(Metric::new(vec![vec![rat(1), rat(0)], vec![rat(1), rat(1)]]).is_err());
    assert!(Metric::new(vec![vec![rat(-1)]]).is_err());
}

fn arb_field(dim: usize) -> impl Strategy<Value = VectorField> {
    let coeff = prop::collection::vec((prop::collection::vec(0u32..2, dim), -3i64..=3), 0..3)
        .prop_map(move |ts| Polynomial::from_terms(dim, ts.into_iter().map(|(e, c)| (e, rat(c)))).unwrap());
    prop::collection::vec(coeff, dim).prop_map(|c| VectorField::new(c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bracket_identities(x in arb_field(3), y in arb_field(3), z in arb_field(3), a in -3i64..3) {
        let xy = lie_bracket(&x, &y).unwrap();
        prop_assert_eq!(xy.clone(), lie_bracket(&y, &x).unwrap().scale(&rat(-1)));
        let lhs = lie_bracket(&x.scale(&rat(a)).try_add(&z).unwrap(), &y).unwrap();
        let rhs = xy.scale(&rat(a)).try_add(&lie_bracket(&z, &y).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        let j = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap()
            .try_add(&lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap()).unwrap()
            .try_add(&lie_bracket(&z, &xy).unwrap()).unwrap();
        prop_assert!(j.is_zero());
    }

    #[test]
    fn derivation_property(x in arb_field(3), y in arb_field(3), f in arb_field(3)) {
        let f = f.coeff(0).clone();
        let lhs = lie_bracket(&x, &y).unwrap().apply(&f).unwrap();
        let rhs = &x.apply(&y.apply(&f).unwrap()).unwrap() - &y.apply(&x.apply(&f).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn layer_dims_nondecreasing(x in arb_field(3), y in arb_field(3)) {
        let f = Frame::with_identity_metric(vec![x, y]).unwrap();
        let r = growth_report(&f, &zero_pt(3), 4).unwrap();
        prop_assert!(r.layer_dims.windows(2).all(|w| w[0] <= w[1]));
        if r.bracket_generating {
            prop_assert_eq!(*r.layer_dims.last().unwrap(), 3);
        }
    }
}
