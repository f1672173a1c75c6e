use std::sync::Arc;

use pmcgraph::*;

fn cap_problem(n: usize) -> Problem {
    let bump = "0.05*(1 - 16*x1^4)*(1 - 16*x2^4)";
    Problem {
        grid: GridSpec::new(&[n, n], &[1.0, 1.0], &[Topology::Dirichlet; 2])
            .with_origin(&[-0.5, -0.5]),
        h: Arc::new(ExprPmc::constant(2.0)),
        quasi: None,
        barriers: BarrierSpec::Exprs {
            u1: format!("sqrt(1 - x1^2 - x2^2) - {bump}"),
            u0: format!("sqrt(1 - x1^2 - x2^2) + {bump}"),
            psi: Some("sqrt(1 - x1^2 - x2^2)".into()),
        },
        working: None,
        config: SolveConfig::default(),
    }
}

#[test]
fn constant_curvature_recovers_the_spherical_cap() {
    let errs: Vec<f64> = [17, 33]
        .iter()
        .map(|&n| {
            let (u, report) = cap_problem(n).solve().unwrap();
            assert!(report.converged);
            assert!(report.monotonicity_violation.iter().all(|&v| v <= 1e-9));
            let exact = cap_field(u.grid(), 1.0).unwrap();
            sup_norm(&u, &exact).unwrap()
        })
        .collect();
    assert!(errs[1] < 2e-3, "{errs:?}");
    let order = (errs[0] / errs[1]).log2();
    assert!(order > 1.7, "order {order}");
}

#[test]
fn inverted_barriers_are_rejected_before_solving() {
    let mut p = cap_problem(9);
    p.barriers = BarrierSpec::Exprs {
        u1: "1".into(),
        u0: "0".into(),
        psi: None,
    };
    match p.solve() {
        Err(Error::BarrierOrder { .. }) => {}
        other => panic!("expected an ordering error, got {other:?}"),
    }
}

#[test]
fn linear_quasi_decreasing_problem_has_constant_solution() {
    // H = -z + 0.3 t on the torus: the only solution is u = 0.3
    let h1: Pmc = Arc::new(parse_pmc("-z").unwrap());
    let h2: Pmc = Arc::new(ExprPmc::constant(0.3));
    let p = Problem {
        grid: GridSpec::new(&[16, 16], &[1.0, 1.0], &[Topology::Periodic; 2]),
        h: QuasiDecomposition::new(h1.clone(), h2.clone()).composite(),
        quasi: Some(QuasiDecomposition::new(h1, h2)),
        barriers: BarrierSpec::Exprs {
            u1: "-1".into(),
            u0: "1".into(),
            psi: None,
        },
        working: None,
        config: SolveConfig::default(),
    };
    let (u, report) = p.solve().unwrap();
    assert!(report.converged);
    assert!(
        u.values().iter().all(|v| (v - 0.3).abs() < 1e-7),
        "{} {}",
        u.min(),
        u.max()
    );
}

#[test]
fn conformal_transform_round_trips() {
    let f = ConformalFactor::from_expr("0.3*sin(6.283185307179586*x1)*r + 0.1*r^2").unwrap();
    let h: Pmc = Arc::new(parse_pmc("z*(1 - z) + 0.2*t + x2").unwrap());
    let back = inverse_conformal_transform_pmc(conformal_transform_pmc(h.clone(), &f, 2), &f, 2);
    for (i, &z) in [0.2, 0.7, 1.3].iter().enumerate() {
        let p = PmcArg::new([0.1 * i as f64, 0.4], z, [0.3, -0.2], 0.5 - 0.3 * i as f64);
        let (a, b) = (h.jet(&p).value, back.jet(&p).value);
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn area_of_a_tilted_plane() {
    let spec = GridSpec::new(&[33, 17], &[2.0, 1.0], &[Topology::Dirichlet; 2]);
    let grid = BaseGrid::build(&spec).unwrap();
    let u = field_from_expr(&grid, "0.5*x1 - 0.25*x2").unwrap();
    let exact = 2.0 * (1.0f64 + 0.25 + 0.0625).sqrt();
    assert!((area_functional(&u) - exact).abs() < 1e-12);
    assert!((mesh_area_oracle(&u).unwrap() - exact).abs() < 1e-12);
}
