//! Acceptance gate: nine numbered end-to-end criteria covering
//! orthogonalization, kernel estimation, contribution accounting, in-class
//! convergence, parametric extraction, hyper-parameter behavior,
//! pre-distortion, inverse structure, and metric anchors.
//!
//! Each criterion prints exactly one `PASS`/`FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernelpa::dpd::{
    carrier_composition_error, dpd_apply, dpd_train, memory_phase_agreement, DpdModel,
};
use kernelpa::kernel::estimate_function;
use kernelpa::metrics::{acepr_db, nmse_db};
use kernelpa::npmodel::{fit, NonParametricModel};
use kernelpa::parametric::{extract, identify_least_squares, to_original_domain};
use kernelpa::refpa::{default_config, reference_pa, TRANSIENT_SAMPLES};
use kernelpa::regressor::{build_regressor_set, gram_schmidt, reverse};
use kernelpa::signal::{generate, ComplexSignal};

// ---------------------------------------------------------------------------
// Reporting helpers: collect failures, emit one line per criterion.
// ---------------------------------------------------------------------------

struct Criterion {
    number: usize,
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: usize, name: &'static str) -> Self {
        Self {
            number,
            name,
            failures: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, detail: String) {
        if !ok {
            self.failures.push(detail);
        }
    }

    fn conclude(self, summary: String) {
        if self.failures.is_empty() {
            println!(
                "acceptance criterion {} ({}): PASS — {}",
                self.number, self.name, summary
            );
        } else {
            println!(
                "acceptance criterion {} ({}): FAIL — {}",
                self.number,
                self.name,
                self.failures.join("; ")
            );
            panic!("acceptance criterion {} failed", self.number);
        }
    }
}

// ---------------------------------------------------------------------------
// Shared fixtures (built once per test binary).
// ---------------------------------------------------------------------------

fn scaled_drive(n: usize, seed: u64) -> ComplexSignal {
    let u = generate(n, 400e6, 100e6, seed).unwrap();
    u.with_samples(u.samples().iter().map(|v| v * 0.5).collect(), u.label())
        .unwrap()
}

fn refpa_pair(n: usize, seed: u64) -> (ComplexSignal, ComplexSignal) {
    let u = scaled_drive(n, seed);
    let y = reference_pa(&u, &default_config()).unwrap();
    (u, y)
}

/// 100k-sample record pair, the default-configuration fit on its leading 10%
/// (plus how long the fit took), shared by criteria 3 and 4.
struct FitFixture {
    u: ComplexSignal,
    y: ComplexSignal,
    model: NonParametricModel,
    est_len: usize,
    build_time: Duration,
}

fn fit_fixture() -> &'static FitFixture {
    static FIX: OnceLock<FitFixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let start = Instant::now();
        let (u, y) = refpa_pair(100_000, 42);
        let est_len = 10_000;
        let ue = u
            .with_samples(u.samples()[..est_len].to_vec(), "est")
            .unwrap();
        let ye = y
            .with_samples(y.samples()[..est_len].to_vec(), "est")
            .unwrap();
        let model = fit(&ue, &ye, 3, 3, 70, 1.0 / 70.0).unwrap();
        FitFixture {
            u,
            y,
            model,
            est_len,
            build_time: start.elapsed(),
        }
    })
}

/// Forward model and pre-distorter trained on a 100k refpa record, shared by
/// criteria 3, 7, and 8.
struct DpdFixture {
    u: ComplexSignal,
    forward: NonParametricModel,
    dpd: DpdModel,
    build_time: Duration,
}

fn dpd_fixture() -> &'static DpdFixture {
    static FIX: OnceLock<DpdFixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let start = Instant::now();
        let (u, y) = refpa_pair(100_000, 43);
        let forward = fit(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
        let dpd = dpd_train(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
        DpdFixture {
            u,
            forward,
            dpd,
            build_time: start.elapsed(),
        }
    })
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// 1. Orthogonality invariant over 100 random signals.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_orthogonality_invariant() {
    let mut c = Criterion::new(1, "orthogonality invariant");
    let start = Instant::now();
    let mut worst_offdiag = 0.0f64;
    let mut worst_reverse = 0.0f64;

    for seed in 1..=100u64 {
        let u = generate(10_000, 400e6, 100e6, seed).unwrap();
        let r = build_regressor_set(&u, 3, 3).unwrap();
        let b = gram_schmidt(&r).unwrap();
        let cols = b.columns();
        let flags = b.degenerate_flags();

        let norms: Vec<f64> = cols.iter().map(|(_, q)| l2(q)).collect();
        for k in 0..cols.len() {
            if flags[k] {
                continue;
            }
            for l in (k + 1)..cols.len() {
                if flags[l] {
                    continue;
                }
                let dot: Complex64 = cols[k]
                    .1
                    .iter()
                    .zip(&cols[l].1)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                worst_offdiag = worst_offdiag.max(dot.norm() / (norms[k] * norms[l]));
            }
        }

        let rec = reverse(&b).unwrap();
        for ((_, orig), (_, back)) in r.columns().iter().zip(rec.columns()) {
            let diff: f64 = orig
                .iter()
                .zip(back)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale = l2(orig);
            if scale > 0.0 {
                worst_reverse = worst_reverse.max(diff / scale);
            }
        }
    }
    let elapsed = start.elapsed();

    c.require(
        worst_offdiag <= 1e-9,
        format!("max off-diagonal {worst_offdiag:.3e} > 1e-9"),
    );
    c.require(
        worst_reverse <= 1e-10,
        format!("max reverse error {worst_reverse:.3e} > 1e-10"),
    );
    c.require(
        elapsed < Duration::from_secs(60),
        format!("runtime {elapsed:.1?} >= 1 min"),
    );
    c.conclude(format!(
        "100 signals, off-diagonal {worst_offdiag:.2e}, reverse {worst_reverse:.2e}, {elapsed:.1?}"
    ));
}

// ---------------------------------------------------------------------------
// 2. Kernel-estimator oracle against the cubic and a brute-force evaluation.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_kernel_estimator_oracle() {
    let mut c = Criterion::new(2, "kernel estimator oracle");
    let start = Instant::now();

    let n = 10_000;
    let t_grid = 70usize;
    let fraction = 1.0 / 70.0;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let z: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::from_polar(v * v * v, 0.3))
        .collect();

    let est = estimate_function(&x, &z, t_grid, fraction).unwrap();

    // Grid NMSE against the true function at defined grid points.
    let mut err = 0.0;
    let mut pow = 0.0;
    for ((&g, &v), &d) in est.grid().iter().zip(est.values()).zip(est.defined()) {
        if !d {
            continue;
        }
        let truth = Complex64::from_polar(g * g * g, 0.3);
        err += (v - truth).norm_sqr();
        pow += truth.norm_sqr();
    }
    let grid_nmse = 10.0 * (err / pow).log10();

    // Brute-force direct evaluation of the smoother at every grid point.
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let aperture = fraction * (hi - lo);
    let mut worst_direct = 0.0f64;
    for (i, &g) in est.grid().iter().enumerate() {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (&xi, &zi) in x.iter().zip(&z) {
            let t = (xi - g).abs() / aperture;
            if t < 1.0 {
                let w = 1.0 - t;
                num += w * zi;
                den += w;
            }
        }
        if den > 0.0 {
            let direct = num / den;
            let delta = (est.values()[i] - direct).norm() / direct.norm().max(1e-30);
            worst_direct = worst_direct.max(delta);
            if !est.defined()[i] {
                c.require(false, format!("grid point {i} defined in oracle only"));
            }
        } else {
            c.require(
                !est.defined()[i],
                format!("grid point {i} defined without mass"),
            );
        }
    }
    let elapsed = start.elapsed();

    c.require(
        grid_nmse <= -35.0,
        format!("grid NMSE {grid_nmse:.1} dB > -35 dB"),
    );
    c.require(
        worst_direct <= 1e-9,
        format!("direct-evaluation mismatch {worst_direct:.3e}"),
    );
    c.require(
        elapsed < Duration::from_secs(5),
        format!("runtime {elapsed:.1?} >= 5 s"),
    );
    c.conclude(format!(
        "grid NMSE {grid_nmse:.1} dB, brute-force agreement {worst_direct:.1e}, {elapsed:.1?}"
    ));
}

// ---------------------------------------------------------------------------
// 3. Telescoping identity of contribution tables.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_contribution_rows_telescope() {
    let mut c = Criterion::new(3, "telescoping contribution identity");

    // A small dedicated fit plus every fixture model in this suite.
    let (us, ys) = refpa_pair(6_000, 44);
    let small = fit(&us, &ys, 1, 2, 50, 1.0 / 50.0).unwrap();
    let fixture = fit_fixture();
    let dpd_fix = dpd_fixture();
    let models: [(&str, &NonParametricModel); 4] = [
        ("small", &small),
        ("default fit", &fixture.model),
        ("forward", &dpd_fix.forward),
        ("inverse", dpd_fix.dpd.inner()),
    ];

    let mut worst = 0.0f64;
    for (name, model) in models {
        let report = model.training_report();
        let sum: f64 = report.rows().iter().map(|r| r.dnmse_db).sum();
        let gap = (sum - report.total_nmse_db()).abs();
        worst = worst.max(gap);
        c.require(
            gap <= 1e-9,
            format!("{name}: rows sum {sum} vs total {} ", report.total_nmse_db()),
        );
        // Rebuild the table on the training data of the small model to show
        // the identity also holds for freshly computed tables.
        if name == "small" {
            let fresh = model.contribution_table(&us, &ys).unwrap();
            let fresh_sum: f64 = fresh.rows().iter().map(|r| r.dnmse_db).sum();
            let fresh_gap = (fresh_sum - fresh.total_nmse_db()).abs();
            worst = worst.max(fresh_gap);
            c.require(fresh_gap <= 1e-9, format!("fresh table gap {fresh_gap:.3e}"));
        }
    }
    c.conclude(format!("4 models, worst row-sum gap {worst:.2e} dB"));
}

// ---------------------------------------------------------------------------
// 4. In-class convergence and pruning stability at N=1e5.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_in_class_convergence_and_pruning() {
    let mut c = Criterion::new(4, "in-class convergence and pruning");
    let fix = fit_fixture();
    let start = Instant::now();

    let uv = fix
        .u
        .with_samples(fix.u.samples()[fix.est_len..].to_vec(), "val")
        .unwrap();
    let yv = &fix.y.samples()[fix.est_len..];

    let yhat = fix.model.predict(&uv).unwrap();
    let val_nmse = nmse_db(&yv[fix.model.m_depth()..], yhat.samples()).unwrap();

    let pruned = fix.model.prune(-0.1).unwrap();
    let yhat_p = pruned.predict(&uv).unwrap();
    let val_pruned = nmse_db(&yv[pruned.m_depth()..], yhat_p.samples()).unwrap();
    let shift = (val_pruned - val_nmse).abs();
    let elapsed = fix.build_time + start.elapsed();

    c.require(
        val_nmse <= -35.0,
        format!("validation NMSE {val_nmse:.1} dB > -35 dB"),
    );
    c.require(
        pruned.active_count() < fix.model.active_count(),
        "pruning removed nothing".into(),
    );
    c.require(
        shift <= 0.5,
        format!("pruning moved validation NMSE by {shift:.2} dB"),
    );
    c.require(
        elapsed < Duration::from_secs(120),
        format!("runtime {elapsed:.1?} >= 2 min"),
    );
    c.conclude(format!(
        "validation NMSE {val_nmse:.1} dB, prune shift {shift:.3} dB ({} -> {} bases), {elapsed:.1?}",
        fix.model.active_count(),
        pruned.active_count()
    ));
}

// ---------------------------------------------------------------------------
// 5. Parametric extraction and domain conversion.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_parametric_extraction() {
    let mut c = Criterion::new(5, "parametric extraction");

    // Device restricted to the six-term class; transient trimmed so both
    // models see a pure steady-state record.
    let u_full = scaled_drive(30_000, 45);
    let cfg = default_config().restrict_to_compact_class();
    let y_full = reference_pa(&u_full, &cfg).unwrap();
    let u = u_full
        .with_samples(u_full.samples()[TRANSIENT_SAMPLES..].to_vec(), "u")
        .unwrap();
    let y = y_full
        .with_samples(y_full.samples()[TRANSIENT_SAMPLES..].to_vec(), "y")
        .unwrap();

    let np = fit(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
    let np_nmse = np.training_report().total_nmse_db();

    let structure = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (2, 1)];
    let pm = identify_least_squares(&structure, &u, &y).unwrap();
    let pm_nmse = pm.training_nmse_db().unwrap();

    c.require(
        pm_nmse <= np_nmse + 1.0,
        format!("six-term NMSE {pm_nmse:.1} dB vs non-parametric {np_nmse:.1} dB"),
    );

    // Orthogonal -> original conversion preserves predictions.
    let pm_orth = extract(&np, 7).unwrap();
    let in_orth = pm_orth.predict_in_orthogonal_domain(&np, &u).unwrap();
    let pm_orig = to_original_domain(&pm_orth, &np).unwrap();
    let in_orig = pm_orig.predict(&u).unwrap();
    let diff: f64 = in_orth
        .samples()
        .iter()
        .zip(in_orig.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let rel = diff / l2(in_orth.samples());
    c.require(
        rel <= 1e-9,
        format!("conversion changed predictions by {rel:.3e} relative"),
    );
    c.conclude(format!(
        "six-term {pm_nmse:.1} dB vs non-parametric {np_nmse:.1} dB, conversion drift {rel:.1e}"
    ));
}

// ---------------------------------------------------------------------------
// 6. Small-aperture degradation at fixed T.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_small_aperture_degrades() {
    let mut c = Criterion::new(6, "small-aperture degradation");

    let (u, y) = refpa_pair(20_000, 46);
    let train = 10_000;
    let ue = u.with_samples(u.samples()[..train].to_vec(), "est").unwrap();
    let ye = y.with_samples(y.samples()[..train].to_vec(), "est").unwrap();
    let uv = u.with_samples(u.samples()[train..].to_vec(), "val").unwrap();

    let val_nmse = |delta: f64| -> f64 {
        let model = fit(&ue, &ye, 3, 3, 70, delta).unwrap();
        let yhat = model.predict(&uv).unwrap();
        nmse_db(&y.samples()[train + model.m_depth()..], yhat.samples()).unwrap()
    };
    let narrow = val_nmse(0.001);
    let reference = val_nmse(1.0 / 70.0);

    c.require(
        narrow > reference,
        format!("aperture 0.001 gave {narrow:.1} dB, not worse than 1/70's {reference:.1} dB"),
    );
    c.conclude(format!(
        "aperture 0.001: {narrow:.1} dB vs 1/70: {reference:.1} dB on the validation split"
    ));
}

// ---------------------------------------------------------------------------
// 7. Pre-distortion improvement at N=1e5.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_dpd_improvement() {
    let mut c = Criterion::new(7, "pre-distortion improvement");
    let fix = dpd_fixture();
    let start = Instant::now();

    let cfg = default_config();
    let g0 = fix.dpd.gain_normalization();
    let m = fix.dpd.inner().m_depth();
    let skip = TRANSIENT_SAMPLES;
    let desired: Vec<Complex64> = fix.u.samples()[m..].iter().map(|v| v / g0).collect();

    let y = reference_pa(&fix.u, &cfg).unwrap();
    let base_nmse = nmse_db(&desired[skip..], &y.samples()[m + skip..]).unwrap();
    let base_acepr = acepr_db(
        &desired[skip..],
        &y.samples()[m + skip..],
        fix.u.sample_rate_hz(),
        fix.u.bandwidth_hz(),
    )
    .unwrap();

    let d = dpd_apply(&fix.dpd, &fix.u).unwrap();
    let yd = reference_pa(&d, &cfg).unwrap();
    let dpd_nmse = nmse_db(&desired[skip..], &yd.samples()[skip..]).unwrap();
    let dpd_acepr = acepr_db(
        &desired[skip..],
        &yd.samples()[skip..],
        fix.u.sample_rate_hz(),
        fix.u.bandwidth_hz(),
    )
    .unwrap();

    let nmse_gain = base_nmse - dpd_nmse;
    let acepr_gain = base_acepr - dpd_acepr;
    let elapsed = fix.build_time + start.elapsed();

    c.require(
        nmse_gain >= 15.0,
        format!("cascade NMSE improved only {nmse_gain:.1} dB"),
    );
    c.require(
        acepr_gain >= 10.0,
        format!("cascade ACEPR improved only {acepr_gain:.1} dB"),
    );
    c.require(
        elapsed < Duration::from_secs(180),
        format!("runtime {elapsed:.1?} >= 3 min"),
    );
    c.conclude(format!(
        "NMSE {base_nmse:.1} -> {dpd_nmse:.1} dB (+{nmse_gain:.1}), ACEPR {base_acepr:.1} -> {dpd_acepr:.1} dB (+{acepr_gain:.1}), {elapsed:.1?}"
    ));
}

// ---------------------------------------------------------------------------
// 8. Inverse structure of the pre-distorter.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_inverse_structure() {
    let mut c = Criterion::new(8, "inverse structure");
    let fix = dpd_fixture();

    let comp = carrier_composition_error(&fix.forward, &fix.dpd, 0.8, 400).unwrap();
    c.require(
        comp <= 0.05,
        format!("carrier composition deviates {:.1}% from identity", comp * 100.0),
    );

    let phases = memory_phase_agreement(&fix.forward, &fix.dpd, 400).unwrap();
    c.require(
        phases.len() == fix.forward.m_depth(),
        format!("expected {} memory lags, got {}", fix.forward.m_depth(), phases.len()),
    );
    let mut worst = 0.0f64;
    for &(lag, deviation) in &phases {
        worst = worst.max(deviation);
        c.require(
            deviation <= 25.0,
            format!("lag {lag} phase deviates {deviation:.1} degrees from 180"),
        );
    }
    c.conclude(format!(
        "composition within {:.2}% of identity, memory phases within {worst:.1} degrees of 180",
        comp * 100.0
    ));
}

// ---------------------------------------------------------------------------
// 9. Metric unit anchors.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_metric_anchors() {
    let mut c = Criterion::new(9, "metric anchors");

    // nmse([1,1],[1.1,0.9]) = -20 dB.
    let reference = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
    let measured = [Complex64::new(1.1, 0.0), Complex64::new(0.9, 0.0)];
    let nmse = nmse_db(&reference, &measured).unwrap();
    c.require(
        (nmse + 20.0).abs() <= 1e-12,
        format!("nmse anchor gave {nmse}"),
    );

    // Constant-envelope PAPR = 0 dB.
    let constant: Vec<Complex64> = (0..4096)
        .map(|i| Complex64::from_polar(1.0, 0.01 * i as f64))
        .collect();
    let papr = kernelpa::signal::papr_db(&constant).unwrap();
    c.require((papr).abs() <= 1e-12, format!("constant-envelope PAPR {papr}"));

    // ACEPR scale invariance to 1e-12.
    let u = generate(16_384, 200e6, 50e6, 47).unwrap();
    let y: Vec<Complex64> = u
        .samples()
        .iter()
        .map(|v| v + 0.05 * v * v.norm_sqr())
        .collect();
    let a1 = acepr_db(u.samples(), &y, 200e6, 50e6).unwrap();
    let alpha = Complex64::from_polar(370.0, 1.1);
    let us: Vec<Complex64> = u.samples().iter().map(|v| alpha * v).collect();
    let ys: Vec<Complex64> = y.iter().map(|v| alpha * v).collect();
    let a2 = acepr_db(&us, &ys, 200e6, 50e6).unwrap();
    c.require(
        (a1 - a2).abs() <= 1e-12,
        format!("ACEPR moved {} dB under scaling", (a1 - a2).abs()),
    );

    c.conclude(format!(
        "nmse anchor {nmse:.12} dB, PAPR {papr:.1e} dB, ACEPR scale drift {:.1e} dB",
        (a1 - a2).abs()
    ));
}
