use proptest::prelude::*;

use super::*;
use crate::linalg::norm2;
use crate::testing::{random_vec, rng};

fn direct_conv(c: &[f64], x: &[f64]) -> Vec<f64> {
    (0..c.len() + x.len() - 1)
        .map(|k| {
            (0..x.len())
                .filter(|&j| k >= j && k - j < c.len())
                .map(|j| c[k - j] * x[j])
                .sum()
        })
        .collect()
}

#[test]
fn kernel_is_floored_gaussian() {
    for n in [64, 1000, 4096] {
        let c = gaussian_kernel(n);
        assert_eq!(c.len(), n);
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, KERNEL_FLOOR, "n = {n}");
        let peak = c.iter().copied().fold(0.0, f64::max);
        // Ratio of neighbours one standard deviation apart from the centre.
        let mid = (n - 1) / 2;
        let sd = n / 10;
        let ratio = c[mid + sd] / c[mid];
        let off = (mid + sd) as f64 - (n as f64 - 1.0) / 2.0;
        let mo = mid as f64 - (n as f64 - 1.0) / 2.0;
        let want = (-(off * off - mo * mo) / (2.0 * (n as f64 / 10.0).powi(2))).exp();
        assert!((ratio - want).abs() < 1e-12, "n = {n}");
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-3);
        assert!(peak <= 1.0);
    }
}

#[test]
fn deconv_instances_follow_the_recipe() {
    for seed in 0..10 {
        let n = 256;
        let d = deconv_data(n, seed).unwrap();
        let nz: Vec<f64> = d.x_true.iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nz.len(), SPIKES);
        assert!(nz.iter().all(|&v| (0.0..=n as f64 / 10.0).contains(&v)));
        let signal = direct_conv(&d.kernel, &d.x_true);
        assert_eq!(signal.len(), 2 * n - 1);
        for (a, b) in signal.iter().zip(&d.signal) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        for ((b, s), v) in d.b.iter().zip(&signal).zip(&d.noise) {
            assert!((b - s - v).abs() < 1e-12 * (1.0 + b.abs()));
        }
        let snr = norm2(&signal) / norm2(&d.noise);
        assert!((15.0..=25.0).contains(&snr), "seed {seed}: snr {snr}");
    }
}

#[test]
fn generators_reject_small_sizes() {
    assert!(gen_deconv(9, 0).is_err());
    assert!(gen_deconv(10, 0).is_ok());
    assert!(gen_sylvester(1, 0).is_err());
    assert!(gen_sylvester(2, 0).is_ok());
}

#[test]
fn same_seed_same_problem() {
    assert_eq!(
        deconv_spec(64, 3).unwrap().to_json().unwrap(),
        deconv_spec(64, 3).unwrap().to_json().unwrap()
    );
    assert_ne!(deconv_spec(64, 3).unwrap(), deconv_spec(64, 4).unwrap());
    let a = canonicalize(&gen_sylvester(4, 9).unwrap()).unwrap();
    let b = canonicalize(&gen_sylvester(4, 9).unwrap()).unwrap();
    assert!(a.same_as(&b));
    assert_eq!(sylvester_data(4, 9).unwrap(), sylvester_data(4, 9).unwrap());
    assert_ne!(sylvester_data(4, 9).unwrap(), sylvester_data(4, 10).unwrap());
}

#[test]
fn sylvester_instances_follow_the_recipe() {
    for q in [2, 3, 8] {
        let d = sylvester_data(q, 1).unwrap();
        let p = SYLVESTER_K * q;
        assert_eq!((d.a.rows(), d.a.cols()), (p, p));
        assert_eq!((d.b.rows(), d.b.cols()), (q, q));
        assert!(d.a.as_slice().iter().chain(d.b.as_slice()).all(|&v| v >= 1e-6));
        assert!(d.c.as_slice().iter().all(|&v| v == 1.0));
        let cp = canonicalize(&gen_sylvester(q, 1).unwrap()).unwrap();
        assert_eq!(cp.n(), 5 * q * q);
        assert_eq!(Problem::Sylvester.variable_size(q), cp.n());
        // Tr(DᵀX) at a random X, summed entrywise.
        let x = random_vec(&mut rng(q as u64), cp.n());
        let want: f64 = d.d.as_slice().iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((cp.objective(&x) - want).abs() < 1e-10 * (1.0 + want.abs()));
    }
}

#[test]
fn standard_normal_entries_look_standard() {
    let d = sylvester_data(20, 2).unwrap();
    let v = d.d.as_slice();
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    assert!(mean.abs() < 0.1 && (var - 1.0).abs() < 0.1, "{mean} {var}");
    // Folded normal has mean √(2/π).
    let a = d.a.as_slice();
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    assert!((ma - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.05, "{ma}");
}

#[test]
fn sparse_oracle_holds_the_toeplitz_block() {
    let n = 24;
    let cp = canonicalize(&gen_deconv(n, 5).unwrap()).unwrap();
    let c = gaussian_kernel(n);
    let a = cp.oracle_matrix().unwrap().to_dense();
    // Rows: x ≥ 0, then the epigraph cone (2(c*x − b), t − 1, t + 1).
    for i in 0..2 * n - 1 {
        for j in 0..n {
            let want = if i >= j && i - j < n { 2.0 * c[i - j] } else { 0.0 };
            assert!((a[(n + i, j)] - want).abs() < 1e-15, "({i}, {j})");
        }
    }
}

#[test]
fn slope_examples() {
    let sq: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&n| (n, n * n)).collect();
    assert!((fit_slope(&sq).unwrap() - 2.0).abs() < 1e-12);
    let flat: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n| (n, 0.5)).collect();
    assert!(fit_slope(&flat).unwrap().abs() < 1e-12);
    assert!(fit_slope(&sq[..2]).is_err());
    assert!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    assert!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)]).is_err());
}

fn quick() -> BenchConfig {
    BenchConfig {
        min_batch: Duration::from_micros(200),
        ..BenchConfig::default()
    }
}

#[test]
fn empty_seed_list_gives_nothing() {
    let r = run_bench(Problem::Deconv, &[16, 32], &[], Backend::Matfree, &quick());
    assert!(r.records.is_empty() && r.failures.is_empty());
}

#[test]
fn failures_are_recorded_and_the_run_continues() {
    let cfg = BenchConfig {
        solve: false,
        ..quick()
    };
    let r = run_bench(Problem::Deconv, &[4, 16, 32], &[0, 1], Backend::Matfree, &cfg);
    assert_eq!(r.failures.len(), 2);
    assert!(r.failures.iter().all(|f| f.size == 4));
    assert_eq!(r.records.iter().map(|r| r.n).collect::<Vec<_>>(), vec![16, 32]);
    assert!(r
        .records
        .iter()
        .all(|r| r.multiply_seconds > 0.0 && r.solve_seconds.is_none()));
}

#[test]
fn backends_agree_on_small_instances() {
    for (problem, sizes) in [(Problem::Deconv, vec![16, 32]), (Problem::Sylvester, vec![2, 3])] {
        let m = run_bench(problem, &sizes, &[0], Backend::Matfree, &quick());
        let s = run_bench(problem, &sizes, &[0], Backend::SparseOracle, &quick());
        assert!(m.failures.is_empty() && s.failures.is_empty());
        for (a, b) in m.records.iter().zip(&s.records) {
            assert_eq!(a.n, b.n);
            let (oa, ob) = (a.objective.unwrap(), b.objective.unwrap());
            assert!(
                (oa - ob).abs() <= 1e-2 * oa.abs().max(ob.abs()),
                "{problem} n={}: {oa} vs {ob}",
                a.n
            );
        }
    }
}

#[test]
fn csv_round_trip_and_header() {
    let recs = vec![
        BenchRecord {
            problem: Problem::Deconv,
            n: 4096,
            backend: Backend::Matfree,
            solve_seconds: Some(0.25),
            multiply_seconds: 1.5e-4,
            iterations: Some(120),
            objective: Some(3.5),
        },
        BenchRecord {
            problem: Problem::Sylvester,
            n: 320,
            backend: Backend::SparseOracle,
            solve_seconds: None,
            multiply_seconds: 2e-5,
            iterations: None,
            objective: None,
        },
    ];
    let mut buf = Vec::new();
    write_csv(&recs, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,n,backend,solve_seconds,multiply_seconds,iterations,objective"
    );
    assert_eq!(lines.next().unwrap(), "deconv,4096,matfree,0.25,0.00015,120,3.5");
    assert_eq!(lines.next().unwrap(), "sylvester,320,sparse-oracle,,0.00002,,");
    assert_eq!(read_csv(&buf[..]).unwrap(), recs);
    assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    let empty = {
        let mut b = Vec::new();
        write_csv(&[], &mut b).unwrap();
        b
    };
    assert!(read_csv(&empty[..]).unwrap().is_empty());
}

#[test]
fn names_parse_and_print() {
    assert_eq!("sparse".parse::<Backend>().unwrap(), Backend::SparseOracle);
    assert_eq!(Backend::SparseOracle.to_string(), "sparse-oracle");
    assert_eq!("sylvester".parse::<Problem>().unwrap(), Problem::Sylvester);
    assert!("lasso".parse::<Problem>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_are_bit_reproducible(seed in any::<u64>(), n in 10usize..200, q in 2usize..6) {
        prop_assert_eq!(deconv_data(n, seed).unwrap(), deconv_data(n, seed).unwrap());
        prop_assert_eq!(sylvester_data(q, seed).unwrap(), sylvester_data(q, seed).unwrap());
    }

    #[test]
    fn slope_recovers_power_laws(k in -1.0f64..3.0, a in 1e-6f64..10.0) {
        let pts: Vec<(f64, f64)> = [64.0, 256.0, 1024.0, 4096.0].iter().map(|&n: &f64| (n, a * n.powf(k))).collect();
        prop_assert!((fit_slope(&pts).unwrap() - k).abs() < 1e-9);
    }
}
