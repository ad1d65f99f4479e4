use hzgsvd::factor::jacobi_eigenvalues;
use hzgsvd::harness::{
    accuracy_report, gen_condition_pair, gen_pair, gevd_route, max_rel_error, pitfall_row, pitfall_tsv, random_orthogonal,
    AccuracyReport, GenSpec,
};
use hzgsvd::{solve, Field, GsvdResult, Matrix, ProblemPair, SolverConfig};
use num_complex::Complex64;

const ULP: f64 = f64::EPSILON / 2.0;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn orth_defect(q: &Matrix) -> f64 {
    q.adjoint().matmul(q, true).unwrap().sub(&Matrix::identity(q.cols(), q.field())).frobenius()
}

#[test]
fn orthogonal_examples() {
    let q = random_orthogonal(1, 3, Field::Real);
    assert_eq!(q.get(0, 0).re.abs(), 1.0);
    let q = random_orthogonal(1, 3, Field::Complex);
    assert!((q.get(0, 0).norm() - 1.0).abs() <= 2.0 * ULP);
    for field in [Field::Real, Field::Complex] {
        let q = random_orthogonal(8, 11, field);
        assert!(orth_defect(&q) <= 8e-15);
        assert_eq!(q, random_orthogonal(8, 11, field));
        assert_ne!(q, random_orthogonal(8, 12, field));
        assert!(orth_defect(&random_orthogonal(100, 1, field)) <= 100.0 * 8.0 * ULP);
    }
}

#[test]
fn diagonal_construction() {
    let spec = GenSpec {
        n: 2,
        sigma_f: vec![1.0, 2.0],
        sigma_g: vec![2.0, 1.0],
        lambda_x: vec![1.0, 1.0],
        seed: 0,
        field: Field::Real,
        identity_factors: true,
    };
    let (p, sigma) = gen_pair(&spec).unwrap();
    assert_eq!(p.f, Matrix::from_row_major(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    assert_eq!(p.g, Matrix::from_row_major(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    assert_eq!(sigma, vec![2.0, 0.5]);
    assert!(gen_pair(&GenSpec { sigma_g: vec![0.0, 1.0], ..spec }).is_err());
}

#[test]
fn reference_does_not_depend_on_x() {
    let a = GenSpec::random(16, 5, Field::Complex);
    let b = GenSpec { lambda_x: vec![3.0; 16], ..a.clone() };
    let (pa, ra) = gen_pair(&a).unwrap();
    let (pb, rb) = gen_pair(&b).unwrap();
    assert_eq!(ra, rb);
    assert_ne!(pa.f, pb.f);
}

#[test]
fn generated_pairs_are_recovered() {
    for n in [16, 33, 64] {
        for field in [Field::Real, Field::Complex] {
            let (p, reference) = gen_pair(&GenSpec::random(n, n as u64, field)).unwrap();
            let r = solve(&p.f, &p.g, &SolverConfig::default()).unwrap();
            assert!(max_rel_error(&r.sigma, &reference) <= 1e-11, "{n} {field:?}");
        }
    }
}

#[test]
fn condition_pair_spectra() {
    let cp = gen_condition_pair(8, 0, 1, Field::Real).unwrap();
    let defect = cp.b.sub(&Matrix::identity(8, Field::Real)).frobenius();
    assert!(defect <= 64.0 * ULP);
    let cp = gen_condition_pair(8, 4, 1, Field::Real).unwrap();
    let max = cp.lambda_b.iter().cloned().fold(f64::MIN, f64::max);
    let min = cp.lambda_b.iter().cloned().fold(f64::MAX, f64::min);
    assert!((max / min - 1e4).abs() <= 1e4 * 1e-14);
    let a_ratio = cp.lambda_a[0] / cp.lambda_a[7];
    assert!((a_ratio - 10.0).abs() <= 1e-13);
    assert!(gen_condition_pair(1, 4, 1, Field::Real).is_err());
}

#[test]
fn gevd_examples() {
    let id = Matrix::identity(2, Field::Real);
    assert_eq!(gevd_route(&Matrix::from_row_major(2, 2, &[1.0, 0.0, 0.0, 4.0]), &id).unwrap(), vec![4.0, 1.0]);
    let l = gevd_route(&Matrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 2.0]), &id).unwrap();
    assert!((l[0] - 3.0).abs() <= 4.0 * ULP && (l[1] - 1.0).abs() <= 4.0 * ULP);
    // with B = I the reduction is exact
    let cp = gen_condition_pair(12, 3, 2, Field::Real).unwrap();
    let eye = Matrix::identity(12, Field::Real);
    assert_eq!(gevd_route(&cp.a, &eye).unwrap(), jacobi_eigenvalues(&cp.a, 30));
}

#[test]
fn small_pair_breaks_the_eigenvalue_route() {
    let p = hzgsvd::harness::small_pitfall_pair(1e-10);
    let a = p.f.adjoint().matmul(&p.f, false).unwrap();
    let b = p.g.adjoint().matmul(&p.g, false).unwrap();
    let exact = [1.999999999800000e20, 1.0, 1.0, 0.5000000000500000];
    match gevd_route(&a, &b) {
        Ok(l) => {
            let worst = l[1..].iter().zip(&exact[1..]).map(|(x, e)| ((x - e) / e).abs()).fold(0.0, f64::max);
            assert!(worst >= 0.5, "{l:?}");
        }
        Err(e) => assert!(e.is_rank_failure()),
    }
}

fn exact_result() -> GsvdResult {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let id = Matrix::identity(3, Field::Real);
    GsvdResult {
        u: id.clone(),
        v: id.clone(),
        z: Matrix::from_fn(3, 3, Field::Real, |i, j| c(if i == j { h } else { 0.0 })),
        sigma_f: vec![h; 3],
        sigma_g: vec![h; 3],
        sigma: vec![1.0; 3],
        sweeps: 1,
        total_transforms: 0,
        big_transforms: 0,
        converged: true,
        workers: 1,
    }
}

#[test]
fn report_examples() {
    let id = Matrix::identity(3, Field::Real);
    let p = ProblemPair::new(id.clone(), id).unwrap();
    let rep = accuracy_report(&p, &exact_result(), None).unwrap();
    assert!(rep.res_f <= 4.0 * ULP && rep.res_g <= 4.0 * ULP);
    assert_eq!((rep.orth_u, rep.orth_v, rep.max_rel_sigma), (0.0, 0.0, None));

    let mut r = exact_result();
    r.sigma[1] *= 1.0 + 1e-8;
    let rep = accuracy_report(&p, &r, Some(&[1.0; 3])).unwrap();
    assert!((rep.max_rel_sigma.unwrap() - 1e-8).abs() <= 1e-15);
    assert!((rep.avg_rel_sigma.unwrap() - 1e-8 / 3.0).abs() <= 1e-15);
    assert_eq!(rep.tsv_row().split('\t').count(), AccuracyReport::TSV_HEADER.split('\t').count());
}

#[test]
fn report_on_generated_pair() {
    let (p, reference) = gen_pair(&GenSpec::random(48, 2, Field::Complex)).unwrap();
    let r = solve(&p.f, &p.g, &SolverConfig::default()).unwrap();
    let rep = accuracy_report(&p, &r, Some(&reference)).unwrap();
    assert!(rep.res_f <= 1e-12 && rep.res_g <= 1e-12, "{rep:?}");
    assert!(rep.orth_u <= 48.0 * 1e-14 && rep.orth_v <= 48.0 * 1e-14, "{rep:?}");
    assert!(rep.max_rel_sigma.unwrap() <= 1e-11);
}

#[test]
fn pitfall_rows() {
    let cfg = SolverConfig::default();
    let row = pitfall_row(64, 1, 1, &cfg).unwrap();
    assert!(row.mre_gsvd <= 1e-13 && row.mre_gevd <= 1e-13, "{row:?}");
    let row = pitfall_row(64, 12, 1, &cfg).unwrap();
    assert!(row.mre_gsvd <= 1e-12, "{row:?}");
    assert!(row.mre_gevd.is_nan() || row.mre_gevd >= 1e3 * row.mre_gsvd, "{row:?}");
    let tsv = pitfall_tsv(&[row]);
    assert!(tsv.starts_with("kappaB\tmre_gsvd\tmre_gevd\n"));
    assert_eq!(tsv.lines().count(), 2);
}

#[test]
fn eigenvalue_route_degrades_with_conditioning() {
    let cfg = SolverConfig::default();
    let mut prev = 0.0;
    for j in (2..=14).step_by(2) {
        let mean = (1..=5).map(|seed| pitfall_row(32, j, seed, &cfg).unwrap().mre_gevd).sum::<f64>() / 5.0;
        assert!(mean.is_nan() || mean >= prev, "j={j}: {mean} < {prev}");
        prev = mean;
    }
}

#[test]
fn scaling_by_two_keeps_residuals() {
    let (p, _) = gen_pair(&GenSpec::random(16, 4, Field::Real)).unwrap();
    let twice = |m: &Matrix| Matrix::from_fn(m.rows(), m.cols(), m.field(), |i, j| m.get(i, j) * 2.0);
    let q = ProblemPair::new(twice(&p.f), twice(&p.g)).unwrap();
    let cfg = SolverConfig::default();
    let a = accuracy_report(&p, &solve(&p.f, &p.g, &cfg).unwrap(), None).unwrap();
    let b = accuracy_report(&q, &solve(&q.f, &q.g, &cfg).unwrap(), None).unwrap();
    for (x, y) in [(a.res_f, b.res_f), (a.res_g, b.res_g)] {
        assert!(y <= 2.0 * x.max(ULP) && x <= 2.0 * y.max(ULP));
    }
}
