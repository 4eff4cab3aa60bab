use std::f64::consts::TAU;

use mole2d::angles::wrap;
use mole2d::cycles::{cycle_basis, BasisKind};
use mole2d::estimator::{gamma_estimator, ml_estimate, theta_given_gamma};
use mole2d::io::{
    bootstrapped, parse_g2o, parse_toro, solve_positions_given_orientations, write_g2o, write_toro,
    PoseGraph2D, PositionMode,
};
use mole2d::oracle::true_gamma;
use mole2d::synth::{circle_graph, grid_walk, NoiseMode};

fn position_rmse(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        .sum();
    (sum / a.len() as f64).sqrt()
}

#[test]
fn noiseless_square_gives_exact_positions() {
    let text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 0 0 0\nVERTEX_SE2 2 0 0 0\nVERTEX_SE2 3 0 0 0\n\
                EDGE_SE2 0 1 1 0 1.5707963267948966 1 0 0 1 0 1\n\
                EDGE_SE2 1 2 1 0 1.5707963267948966 1 0 0 1 0 1\n\
                EDGE_SE2 2 3 1 0 1.5707963267948966 1 0 0 1 0 1\n\
                EDGE_SE2 3 0 1 0 1.5707963267948966 1 0 0 1 0 1\n";
    let g = parse_g2o(text).unwrap();
    let theta = [TAU / 4.0, TAU / 2.0, -TAU / 4.0];
    let p = solve_positions_given_orientations(&g, &theta).unwrap();
    let expected = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    for (a, b) in p.iter().zip(&expected) {
        assert!(
            (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9,
            "{p:?}"
        );
    }
    let shifted: Vec<f64> = theta.iter().map(|t| t + TAU).collect();
    let q = solve_positions_given_orientations(&g, &shifted).unwrap();
    assert!(position_rmse(&p, &q) < 1e-12);
}

#[test]
fn circle_positions_track_the_chosen_hypothesis() {
    let inst = circle_graph(18, 0.2, NoiseMode::Fixed, 0).unwrap();
    let g2 = PoseGraph2D::from_instance(&inst, 100.0).unwrap();
    let basis = cycle_basis(&inst.graph, BasisKind::Mcb).unwrap();
    let truth = theta_given_gamma(&inst.graph, &basis, &true_gamma(&inst, &basis)).unwrap();
    let ml = ml_estimate(
        &inst.graph,
        &basis,
        &gamma_estimator(&inst.graph, &basis),
        3,
    )
    .unwrap();
    assert_eq!(ml.hypothesis.gamma, vec![2]);
    let true_positions = inst.positions.clone().unwrap();
    let good = solve_positions_given_orientations(&g2, &truth.theta_wrapped).unwrap();
    let bad = solve_positions_given_orientations(&g2, &ml.hypothesis.theta_wrapped).unwrap();
    let (e_good, e_bad) = (
        position_rmse(&good, &true_positions),
        position_rmse(&bad, &true_positions),
    );
    assert!(e_good < 1e-9, "{e_good}");
    assert!(e_bad > 0.5, "{e_bad}");
}

#[test]
fn true_orientations_reproduce_the_input_file() {
    let inst = grid_walk(6, 6, 0.4, 0.0, 5).unwrap();
    let g2 = PoseGraph2D::from_instance(&inst, 100.0).unwrap();
    for mode in [PositionMode::Odometry, PositionMode::Linear] {
        let out = bootstrapped(&g2, &g2.relative_orientations(), mode).unwrap();
        assert_eq!(out.edges, g2.edges);
        assert_eq!(out.ids, g2.ids);
        for (a, b) in out.vertices.iter().zip(&g2.vertices) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
            assert!(wrap(a[2] - b[2]).abs() < 1e-12);
        }
        let back = parse_g2o(&write_g2o(&out)).unwrap();
        assert_eq!(back.edges, out.edges);
    }
}

#[test]
fn synthetic_outputs_round_trip_in_both_formats() {
    for seed in 0..5 {
        let inst = grid_walk(8, 8, 0.3, 0.15, seed).unwrap();
        let g2 = PoseGraph2D::from_instance(&inst, 10.0).unwrap();
        let g2o = write_g2o(&g2);
        let once = parse_g2o(&g2o).unwrap();
        let twice = parse_g2o(&write_g2o(&once)).unwrap();
        assert_eq!(once.edges, twice.edges);
        assert_eq!(once.vertices, twice.vertices);
        assert_eq!(
            once.orientation.measurements(),
            twice.orientation.measurements()
        );
        let toro = parse_toro(&write_toro(&once)).unwrap();
        assert_eq!(toro.edges, once.edges);
        assert_eq!(toro.orientation.variances(), once.orientation.variances());
    }
}
