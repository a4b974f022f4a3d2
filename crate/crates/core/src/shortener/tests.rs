use super::*;
use crate::bracket::{MultiIndex, VectorField};
use crate::flow::{horizontal_lift, DEFAULT_TOL};
use crate::models::{ag_frame, euclidean_frame, heisenberg_frame};
use crate::polynomial::{rat, Polynomial};

fn ag_triangular() -> Triangularization {
    Triangularization::new(&ag_frame(), &[1, 1, 2, 5], &[rat(1), rat(-1)], &[rat(1), rat(1)]).unwrap()
}

#[test]
fn heisenberg_square_path() {
    let h = heisenberg_frame();
    let beta = MultiIndex::new(vec![2, 1], 2).unwrap();
    let raw = raw_bracket_path(&beta, 2, 0.01);
    assert_eq!(raw.len(), 4);
    let len = legs_length(&raw, &h.metric().to_f64());
    assert!((len - 0.4).abs() < 1e-15);
    let p = synthesize_bracket_path(&h, &beta, 0.01, &[0.0; 3], 1e-12).unwrap();
    assert!(p.endpoint.iter().zip([0.0, 0.0, 0.01]).all(|(a, b)| (a - b).abs() < 1e-12));
    assert_eq!(p.legs.len(), 4, "square loop is exact");
    assert!(synthesize_bracket_path(&h, &beta, 0.0, &[0.0; 3], 1e-12).unwrap().legs.is_empty());
}

#[test]
fn leg_counts() {
    for (k, count) in [(1usize, 1usize), (2, 4), (3, 10), (4, 22)] {
        let beta = MultiIndex::new((0..k).map(|i| if i == 0 { 2 } else { 1 }).collect(), 2).unwrap();
        assert_eq!(raw_bracket_path(&beta, 2, 0.3).len(), count);
    }
}

#[test]
fn ag_bracket_path_reaches_target() {
    let f = ag_frame();
    let beta = MultiIndex::new(vec![2, 1, 1, 1], 2).unwrap();
    let p = synthesize_bracket_path(&f, &beta, 1e-4, &[0.0, 1.0, 0.0, 0.0], 1e-12).unwrap();
    assert!(p.endpoint_error <= 1e-12, "{:?}", p.residual_history);
}

#[test]
fn projection() {
    let h = TriangularFrame::new(heisenberg_frame(), vec![1, 1, 2]).unwrap();
    let e = h.project().unwrap();
    assert_eq!(e.frame(), &euclidean_frame(2));
    assert!(e.project().is_err());
    let t = ag_triangular().triangular;
    let once = t.project().unwrap().project().unwrap();
    assert_eq!(once.dimension(), 2);
    assert_eq!(once.frame(), &euclidean_frame(2).with_metric(t.frame().metric().clone()).unwrap());
}

#[test]
fn triangular_validation() {
    assert!(TriangularFrame::new(ag_frame(), vec![1, 1, 2, 5]).is_err());
    let n = 3;
    // p3 = x3 depends on its own axis
    let x2 = VectorField::new(vec![Polynomial::zero(n), Polynomial::one(n), Polynomial::var(n, 2)]).unwrap();
    let f = Frame::with_identity_metric(vec![VectorField::coordinate(n, 0), x2]).unwrap();
    assert!(TriangularFrame::new(f, vec![1, 1, 2]).is_err());
}

#[test]
fn ag_triangularization() {
    let tri = ag_triangular();
    let t = &tri.triangular;
    assert_eq!(t.weights(), &[1, 1, 2, 5]);
    let y = tri.to_original(&[0.0, 1.0, 0.0, 0.0]);
    let x = tri.to_original(&[1.0, 0.0, 0.0, 0.0]);
    assert!(y.iter().zip([-1.0, 1.0, 0.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-15), "{y:?}");
    assert!(x.iter().zip([1.0, 1.0, 0.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-15), "{x:?}");
    let p = [0.3, -0.2, 0.1, 0.05];
    let back = tri.to_triangular(&tri.to_original(&p));
    assert!(back.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-14));
    // the corner in triangular coordinates lifts to the original corner
    let legs = corner_legs();
    let mapped: Legs = legs.iter().map(|(d, v)| (*d, tri.original_controls(v))).collect();
    assert_eq!(mapped[0].1, vec![1.0, -1.0]);
    assert_eq!(mapped[1].1, vec![1.0, 1.0]);
    let z = choose_z(t).unwrap();
    assert_eq!(z.beta_hat.len(), 4);
}

#[test]
fn euclidean_corner_certificate() {
    let tf = TriangularFrame::new(euclidean_frame(2), vec![1, 1]).unwrap();
    let c = shorten(&tf, &ShortenConfig::default()).unwrap();
    assert!((c.margin - (2.0 - 2f64.sqrt())).abs() < 1e-15);
    assert!(c.endpoint_error < 1e-15);
}

#[test]
fn heisenberg_corner_certificate() {
    let tf = TriangularFrame::new(heisenberg_frame(), vec![1, 1, 2]).unwrap();
    let c = shorten(&tf, &ShortenConfig::default()).unwrap();
    assert!(c.margin > 0.0);
    assert!(c.endpoint_error <= 1e-6);
    let lifted = horizontal_lift(&heisenberg_frame(), &c.competitor, DEFAULT_TOL).unwrap();
    assert!(lifted.endpoint().unwrap().iter().zip([1.0, 0.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn ag_corner_certificate() {
    let c = shorten_corner(&ag_frame(), &[rat(1), rat(-1)], &[rat(1), rat(1)], &ShortenConfig::default()).unwrap();
    assert!((c.corner_length - 8f64.sqrt()).abs() < 1e-15);
    assert!(c.margin > 1e-3, "{}", c.margin);
    assert!(c.endpoint_error <= 1e-6);
    assert_eq!(c.start, vec![-1.0, 1.0, 0.0, 0.0]);
    let lifted = horizontal_lift(&ag_frame(), &c.competitor, 1e-12).unwrap();
    let end = lifted.endpoint().unwrap();
    assert!(end.iter().zip([1.0, 1.0, 0.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-6), "{end:?}");
    let ledger = &c.triangular.trace.last().unwrap().candidates;
    assert!(ledger.iter().all(|e| (e.assembled_length - e.ledger_length).abs() <= 1e-12 * e.ledger_length));
}
