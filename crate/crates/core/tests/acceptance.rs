//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr with the measured numbers before asserting.
//!
//! The Monte Carlo criteria run hundreds of topologies per cell and take a few
//! minutes on one core.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdma_core::beamforming::{
    beamform_objective, candidate_basis, effective_channel, intf_column, mmse_covariance, tx_beamform, tx_beamnull,
};
use sdma_core::harness::{self, child_seed, realize, run_scenario, Scenario, FIG2_NOISE_RATIOS};
use sdma_core::linalg::{self, c64, CMat};
use sdma_core::mac::{evaluate_concurrent, max_nulling_residual};
use sdma_core::metrics::{effective_ppsnr, mcs_rate, select_mcs};
use sdma_core::rf::path_loss;
use sdma_core::{McsPolicy, McsTable, RxStrategy, SchemeConfig, SimParams, SweepResult, TxStrategy};

const SEED: u64 = 20_240_611;
const TOPOLOGIES: usize = 500;

/// Written straight to stderr so the line survives libtest's output capture.
fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).expect("write report");
}

fn samples<'a>(r: &'a SweepResult, scheme: &str, k: usize) -> &'a [f64] {
    r.cell(scheme, k)
        .and_then(|c| c.samples.as_deref())
        .expect("samples retained")
}

/// Mean relative gain of `a` over `b` across every (curve pair, K) cell, and
/// the largest single-cell gain.
fn gains(r: &SweepResult, pairs: &[(&str, &str)]) -> (f64, f64) {
    let mut all = Vec::new();
    for (a, b) in pairs {
        for &k in &r.k_values {
            all.push(r.mean(a, k).unwrap() / r.mean(b, k).unwrap() - 1.0);
        }
    }
    let avg = all.iter().sum::<f64>() / all.len() as f64;
    let peak = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (avg, peak)
}

fn random_cmat(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        c64(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    })
}

#[test]
fn criterion_1_kernel_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_eig: f64 = 0.0;
    let mut worst_svd: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_cmat(&mut rng, 4);
        let h = &a + a.adjoint();
        let mine = linalg::hermitian_eigen(&h);
        let mut oracle: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().cloned().collect();
        oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let scale = oracle.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for (x, y) in mine.values.iter().zip(&oracle) {
            worst_eig = worst_eig.max((x - y).abs() / scale);
        }
        let recon = &mine.vectors
            * CMat::from_diagonal(&mine.values.iter().map(|&l| c64(l, 0.0)).collect::<Vec<_>>().into())
            * mine.vectors.adjoint();
        worst_eig = worst_eig.max((recon - &h).norm() / h.norm());

        let s = linalg::svd(&a);
        let mut oracle: Vec<f64> = DMatrix::from(a.clone())
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .collect();
        oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in s.singular_values.iter().zip(&oracle) {
            worst_svd = worst_svd.max((x - y).abs() / oracle[0]);
        }
        let sigma = CMat::from_diagonal(
            &s.singular_values
                .iter()
                .map(|&x| c64(x, 0.0))
                .collect::<Vec<_>>()
                .into(),
        );
        worst_svd = worst_svd.max((&s.u * sigma * s.v.adjoint() - &a).norm() / a.norm());
    }

    let p = SimParams::default();
    let table = McsTable::default();
    let mut examples = Vec::new();
    examples.push(tx_beamnull(&[], 4) == linalg::basis_vector(4, 0));
    let g100 = path_loss(100.0, &p).unwrap();
    let want = (0.125 / (4.0 * std::f64::consts::PI)).powi(2) * 1e-6;
    examples.push((g100 - want).abs() <= 1e-9 * want);
    examples.push(path_loss(0.5, &p).unwrap() == path_loss(1.0, &p).unwrap());
    let rates: Vec<f64> = table.entries().iter().map(|e| mcs_rate(e, &p)).collect();
    examples.push(
        rates
            .iter()
            .zip([8.0, 16.0, 24.0, 32.0, 48.0, 64.0, 72.0, 80.0])
            .all(|(a, b)| (a - b).abs() <= 1e-9 * b),
    );
    examples.push(effective_ppsnr(&[10.0; 64], 0.125, 0.0).unwrap() == 10.0);
    let mut half = vec![8.0; 32];
    half.extend([12.0; 32]);
    examples.push((effective_ppsnr(&half, 0.125, 0.0).unwrap() - 9.5).abs() < 1e-12);
    examples.push(select_mcs(1.4, &table) == Some(0) && select_mcs(1.39, &table).is_none());
    examples.push(select_mcs(18.8, &table) == Some(7) && select_mcs(15.9, &table) == Some(5));

    let pass = worst_eig <= 1e-9 && worst_svd <= 1e-9 && examples.iter().all(|&x| x);
    report(
        1,
        pass,
        &format!(
            "eigen max rel err {worst_eig:.2e}, svd max rel err {worst_svd:.2e}, examples {}/{}",
            examples.iter().filter(|&&x| x).count(),
            examples.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_nulling_residual() {
    let p = SimParams::default();
    let mut worst: f64 = 0.0;
    for tx in [TxStrategy::Beamnull, TxStrategy::Beamform] {
        for k in 2..=4 {
            for t in 0..TOPOLOGIES {
                let c = realize(k, child_seed(SEED, k, t), &p).unwrap();
                let run = evaluate_concurrent(tx, RxStrategy::Mmse, 0.0, &c, &p).unwrap();
                worst = worst.max(max_nulling_residual(&run.beams, &c));
            }
        }
    }
    let pass = worst <= 1e-8;
    report(
        2,
        pass,
        &format!("max scaled residual {worst:.2e} over K = 2..4, both TX strategies"),
    );
    assert!(pass);
}

/// Shared by criteria 3 and 4.
fn fig1_run() -> &'static SweepResult {
    static RUN: OnceLock<SweepResult> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut s = harness::fig1();
        s.n_topologies = TOPOLOGIES;
        s.base_seed = SEED;
        s.keep_samples = true;
        run_scenario(&s).unwrap()
    })
}

#[test]
fn criterion_3_optimality_dominance() {
    let r = fig1_run();
    let mut vs_mmse = 0;
    let mut vs_zf = 0;
    let mut total = 0;
    for k in 1..=8 {
        let zf = samples(r, "zf-mcs0", k);
        let mm = samples(r, "mmse-mcs0", k);
        let um = samples(r, "ummse-mcs0", k);
        for t in 0..zf.len() {
            total += 1;
            vs_mmse += usize::from(um[t] < mm[t]);
            vs_zf += usize::from(um[t] < zf[t]);
        }
    }

    // The beamforming objective against plain nulling at the same access instant.
    let p = SimParams::default();
    let mut objective_violations = 0;
    let mut objective_checks = 0;
    for k in 1..=8 {
        for t in 0..TOPOLOGIES {
            let c = realize(k, child_seed(SEED, k, t), &p).unwrap();
            let run = evaluate_concurrent(TxStrategy::Beamform, RxStrategy::Mmse, 0.0, &c, &p).unwrap();
            for q in 0..k.min(p.n_antennas) {
                for i in 0..p.n_subcarriers {
                    let cols: Vec<_> = (0..q)
                        .map(|j| intf_column(c.channel(j, q, i), c.gain(j, q), &p, run.beams.rx(j, i)).unwrap())
                        .collect();
                    let prior: Vec<_> = (0..q)
                        .map(|j| effective_channel(c.channel(q, j, i), c.gain(q, j), &p, run.beams.tx(j, i)).unwrap())
                        .collect();
                    let cov = mmse_covariance(&prior, p.n_antennas, p.noise_var_mw).unwrap();
                    let h = c.channel(q, q, i);
                    let basis = candidate_basis(&cols, p.n_antennas).unwrap();
                    let bf = tx_beamform(&basis, h, c.gain(q, q), &p, &cov).unwrap();
                    let a = beamform_objective(h, c.gain(q, q), &p, &cov, &bf).unwrap();
                    let b = beamform_objective(h, c.gain(q, q), &p, &cov, &tx_beamnull(&cols, p.n_antennas)).unwrap();
                    objective_checks += 1;
                    objective_violations += usize::from(a < b * (1.0 - 1e-9));
                }
            }
        }
    }

    let pass = vs_mmse == 0 && vs_zf == 0 && objective_violations == 0;
    report(
        3,
        pass,
        &format!(
            "UMMSE < MMSE in {vs_mmse}/{total}, UMMSE < ZF in {vs_zf}/{total}, beamform objective < nulling in {objective_violations}/{objective_checks}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_receiver_comparison() {
    let r = fig1_run();
    let (mmse_avg, mmse_peak) = gains(r, &[("mmse-mcs0", "zf-mcs0"), ("mmse-mcs5", "zf-mcs5")]);
    let (_, ummse_peak) = gains(r, &[("ummse-mcs0", "zf-mcs0"), ("ummse-mcs5", "zf-mcs5")]);
    let interior = r.schemes.iter().all(|s| {
        let curve = r.curve(s);
        let (k_best, _) = curve
            .iter()
            .cloned()
            .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
        k_best > 1 && k_best < 8
    });
    let pass = (0.03..=0.25).contains(&mmse_avg) && (0.20..=0.60).contains(&ummse_peak) && interior;
    let curves: Vec<String> = r
        .schemes
        .iter()
        .map(|s| {
            format!(
                "{s} [{}]",
                r.curve(s)
                    .iter()
                    .map(|(_, m)| format!("{m:.1}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        })
        .collect();
    report(
        4,
        pass,
        &format!(
            "MMSE/ZF avg gain {:.1}% (max {:.1}%), UMMSE/ZF peak gain {:.1}%, interior maxima {interior}; {}",
            100.0 * mmse_avg,
            100.0 * mmse_peak,
            100.0 * ummse_peak,
            curves.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_estimation_error() {
    let mut s = harness::fig2();
    s.n_topologies = TOPOLOGIES;
    s.base_seed = SEED;
    s.keep_samples = true;
    let r = run_scenario(&s).unwrap();
    let name = |m: usize, x: f64| format!("zf-mcs{m}-est{x}");

    let mut violations = Vec::new();
    for m in [0, 5] {
        for k in 1..=8 {
            for w in FIG2_NOISE_RATIOS.windows(2) {
                let lo = samples(&r, &name(m, w[0]), k);
                let hi = samples(&r, &name(m, w[1]), k);
                let d: Vec<f64> = hi.iter().zip(lo).map(|(a, b)| a - b).collect();
                let stats = sdma_core::CellStats::from_samples(&d, false);
                if stats.mean_mbps > stats.std_error() {
                    violations.push(format!("mcs{m} K={k} {}->{} +{:.2}", w[0], w[1], stats.mean_mbps));
                }
            }
        }
    }
    let mut losses = Vec::new();
    for m in [0, 5] {
        let perfect = r.mean(&name(m, 0.0), 4).unwrap();
        for x in [0.5, 1.0] {
            losses.push((m, x, 1.0 - r.mean(&name(m, x), 4).unwrap() / perfect));
        }
    }
    let pass = violations.is_empty() && losses.iter().all(|l| l.2 >= 0.30);
    let loss_txt: Vec<String> = losses
        .iter()
        .map(|(m, x, l)| format!("mcs{m}@{x}: {:.1}%", 100.0 * l))
        .collect();
    report(
        5,
        pass,
        &format!(
            "monotonicity violations {:?}; loss at K=4 vs perfect CSI {}",
            violations,
            loss_txt.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_link_adaptation() {
    let mut s = harness::fig3();
    s.n_topologies = TOPOLOGIES;
    s.base_seed = SEED;
    s.k_values = vec![4];
    let r = run_scenario(&s).unwrap();
    let adaptive = r.mean("zf-adaptive", 4).unwrap();
    let g0 = adaptive / r.mean("zf-mcs0", 4).unwrap() - 1.0;
    let g5 = adaptive / r.mean("zf-mcs5", 4).unwrap() - 1.0;
    let pass = (1.20..=3.00).contains(&g0) && (0.35..=1.20).contains(&g5);
    report(
        6,
        pass,
        &format!(
            "K=4 adaptive {adaptive:.1} Mbps, gain over MCS0 {:.1}%, over MCS5 {:.1}%",
            100.0 * g0,
            100.0 * g5
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_tx_beamforming() {
    let mut s = harness::fig4();
    s.n_topologies = TOPOLOGIES;
    s.base_seed = SEED;
    let r = run_scenario(&s).unwrap();
    let (vs_zf, _) = gains(
        &r,
        &[
            ("beamform-mmse-mcs0", "beamnull-zf-mcs0"),
            ("beamform-mmse-adaptive", "beamnull-zf-adaptive"),
        ],
    );
    let (vs_mmse, _) = gains(
        &r,
        &[
            ("beamform-mmse-mcs0", "beamnull-mmse-mcs0"),
            ("beamform-mmse-adaptive", "beamnull-mmse-adaptive"),
        ],
    );
    let pass = vs_zf >= 0.10 && vs_mmse >= 0.05;
    report(
        7,
        pass,
        &format!(
            "beamform+MMSE avg gain over nulling+ZF {:.1}%, over nulling+MMSE {:.1}%",
            100.0 * vs_zf,
            100.0 * vs_mmse
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_mac_schemes() {
    let mut s = harness::fig5();
    s.n_topologies = 1000;
    s.base_seed = SEED;
    s.k_values = vec![4];
    let r = run_scenario(&s).unwrap();
    let m = |n: &str| r.mean(n, 4).unwrap();
    let (base, enh, um, nc) = (m("baseline"), m("enhanced"), m("enhanced-ummse"), m("non-concurrent"));
    let ratio = um / base;
    let over_nc = um / nc - 1.0;
    let lowest = base < enh && base < um && base < nc;
    let enh_below = enh < nc;
    let pass = (3.0..=7.0).contains(&ratio) && (0.15..=0.70).contains(&over_nc) && lowest && enh_below;
    report(
        8,
        pass,
        &format!(
            "K=4 baseline {base:.1}, enhanced {enh:.1}, enhanced-ummse {um:.1}, non-concurrent {nc:.1} Mbps; \
             ummse/baseline {ratio:.2}x, ummse over non-concurrent {:.1}%, baseline lowest {lowest}, enhanced below non-concurrent {enh_below}",
            100.0 * over_nc
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let mut pass = true;
    for mut s in harness::figure_scenarios() {
        s.n_topologies = 5;
        s.base_seed = SEED;
        s.k_values = vec![1, 3, 6];
        let a = run_scenario(&s).unwrap().to_csv();
        let b = run_scenario(&s).unwrap().to_csv();
        pass &= a == b;
    }
    let custom = Scenario {
        n_topologies: 3,
        k_values: vec![2, 5],
        ..Scenario::new(
            "custom",
            vec![SchemeConfig::concurrent(
                "x",
                TxStrategy::Beamform,
                RxStrategy::UniversalMmse,
                McsPolicy::Adaptive,
                0.5,
            )],
        )
    };
    pass &= run_scenario(&custom).unwrap().to_csv() == run_scenario(&custom).unwrap().to_csv();
    report(
        9,
        pass,
        "identical seeds give byte-identical CSV for all five figures and a custom scenario",
    );
    assert!(pass);
}
