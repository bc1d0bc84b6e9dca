//! Acceptance criteria 1 to 8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that every line reaches the terminal
//! and solved points are shared between criteria. Criteria 4 to 7 are
//! evaluated at the desk truncation unless raising `n_max` by 2 moves one of
//! their observables by more than 5%; such runs are flagged and the
//! criterion is evaluated at the larger truncation. The line of criterion 8
//! reports whether every observable stayed within 5%.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use faer::{c64, Mat, Scale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperspin::density::DensityMatrix;
use hyperspin::entanglement::negativity;
use hyperspin::fock::{annihilation, creation, FockSpace};
use hyperspin::liouvillian::build_liouvillian;
use hyperspin::network::{Connectivity, NetworkParams};
use hyperspin::observables::{displacement_kernel, wigner, wigner_at, SliceSpec, WignerGrid};
use hyperspin::steady::{default_time_step, evolve, solve_steady_state, SolverMethod};
use hyperspin_cli::config::{ExperimentConfig, NegativityOutput, OutputsConfig, PumpSpec, SeriesConfig, SolverConfig};
use hyperspin_cli::pipeline::{solve_point, PointResult};
use hyperspin_cli::presets::{presets, Scale as RunScale, FIG3_PUMPS};

// Tolerances.
const TRACE_TOL: f64 = 1e-12;
const HERMITICITY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-8;
const RESIDUAL_TOL: f64 = 1e-9;
const N3_PRESET_BUDGET_S: f64 = 15.0 * 60.0;
const ORACLE_TOL: f64 = 1e-7;
const VACUUM_TOL: f64 = 1e-12;
const WIGNER_TOL: f64 = 1e-10;
const BELL_TOL: f64 = 1e-10;
const KERNEL_TOL: f64 = 1e-8;
const GRID_STEP: f64 = 0.1;
const RING_TOL: f64 = 0.10;
const PT2_TOL: f64 = 1e-8;
const PT3_REL_TOL: f64 = 1e-6;
const CONVERGENCE_TOL: f64 = 0.05;
/// Negativities below this are noise and count as converged.
const CONVERGENCE_FLOOR: f64 = 1e-8;

const DESK_N2: usize = 12;
const DESK_N3: usize = 8;
const FIG2_PUMPS: [f64; 13] = [0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8];
const FIG3_C: f64 = 0.15;
const SNAPSHOT: f64 = 1.5;

/// What the criteria need from a solved point; `ρ` is kept for two modes only.
struct Point {
    rho: Option<DensityMatrix>,
    negativities: Vec<f64>,
    mean_n: Vec<f64>,
    trace_error: f64,
    hermiticity: f64,
    min_eigenvalue: f64,
    scaled_residual: f64,
    n_max: usize,
}

impl Point {
    fn new(p: PointResult) -> Self {
        let rho = p.rho;
        Self {
            negativities: p.negativities.iter().map(|n| n.negativity).collect(),
            mean_n: p.mean_n,
            trace_error: (rho.trace() - c64::new(1.0, 0.0)).norm(),
            hermiticity: rho.hermiticity_error(),
            min_eigenvalue: rho.min_eigenvalue().unwrap(),
            scaled_residual: p.info.scaled_residual,
            n_max: p.n_max,
            rho: (rho.space().num_modes() <= 2).then_some(rho),
        }
    }
}

type Cache = Mutex<HashMap<String, Arc<Point>>>;

struct Suite {
    cache: Cache,
    /// Observable shifts under `n_max → n_max + 2`, filled by criteria 4 to 7.
    shifts: Mutex<Vec<Shift>>,
}

struct Shift {
    criterion: usize,
    what: String,
    relative: f64,
}

fn config(n_max: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: "acceptance".into(),
        seed: 1,
        output_dir: "out".into(),
        n_max,
        pump: PumpSpec::absolute(vec![1.0]),
        solver: SolverConfig::default(),
        outputs: OutputsConfig {
            steady: true,
            negativity: Some(NegativityOutput::default()),
            ..Default::default()
        },
        series: Vec::new(),
    }
}

impl Suite {
    fn point(&self, series: &SeriesConfig, n_max: usize, h: f64) -> Arc<Point> {
        let key = format!("{:?}|{n_max}|{}", series.params(h).unwrap(), h.to_bits());
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let p = Arc::new(Point::new(solve_point(&config(n_max), series, 0, h).unwrap_or_else(|e| panic!("{e}"))));
        self.cache.lock().unwrap().insert(key, p.clone());
        p
    }

    /// Point at `h = r·h_th`.
    fn relative(&self, series: &SeriesConfig, n_max: usize, r: f64) -> Arc<Point> {
        self.point(series, n_max, r * series.threshold().unwrap())
    }

    fn record(&self, criterion: usize, what: String, a: f64, b: f64) -> bool {
        let relative = relative_shift(a, b);
        self.shifts.lock().unwrap().push(Shift { criterion, what, relative });
        relative <= CONVERGENCE_TOL
    }
}

fn relative_shift(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale <= CONVERGENCE_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn graph(label: &str, modes: usize, c: Connectivity) -> SeriesConfig {
    SeriesConfig::graph(label, modes, c)
}

/// Index of the largest entry.
fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn interior_maximum(v: &[f64]) -> bool {
    let k = argmax(v);
    k > 0 && k + 1 < v.len()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

// Criterion 1.

fn criterion_1(s: &Suite) -> (bool, String) {
    let mut worst = [0.0f64; 4];
    let mut failures = Vec::new();
    let mut count = 0;
    let mut slowest_n3: f64 = 0.0;
    for p in presets() {
        let cfg = p.config(RunScale::Desk);
        let start = Instant::now();
        for series in &cfg.series {
            for h in cfg.pumps(series).unwrap() {
                let pt = s.point(series, cfg.n_max, h);
                let (tr, herm, min, res) = (pt.trace_error, pt.hermiticity, pt.min_eigenvalue, pt.scaled_residual);
                worst = [worst[0].max(tr), worst[1].max(herm), worst[2].min(min), worst[3].max(res)];
                if tr > TRACE_TOL || herm > HERMITICITY_TOL || min < PSD_TOL || res > RESIDUAL_TOL {
                    failures.push(format!("{} {} h={h:.4}", p.name, series.label));
                }
                count += 1;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        if p.modes() == 3 {
            slowest_n3 = slowest_n3.max(elapsed);
            if elapsed > N3_PRESET_BUDGET_S {
                failures.push(format!("{} took {elapsed:.0} s", p.name));
            }
        }
    }
    (
        failures.is_empty(),
        format!(
            "steady-state validity over {count} desk-scale preset points: max |tr-1| {:.1e}, max hermiticity {:.1e}, min eigenvalue {:.1e}, max scaled residual {:.1e}, slowest N=3 preset {slowest_n3:.0} s{}",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

// Criterion 2.

fn criterion_2() -> (bool, String) {
    let p = |n, conn, h| NetworkParams::from_connectivity(n, conn, h, 0.5, 0.1).unwrap();
    let cases = [
        (p(1, Connectivity::Decoupled, 2.0), FockSpace::new(1, 12).unwrap()),
        (p(1, Connectivity::Decoupled, 0.7), FockSpace::new(1, 10).unwrap()),
        (p(2, Connectivity::Ferromagnetic { c: 0.1 }, 1.2), FockSpace::new(2, 6).unwrap()),
        (p(2, Connectivity::Hyperspin, 1.5), FockSpace::new(2, 6).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (params, space) in &cases {
        let l = build_liouvillian(params, space).unwrap();
        let reference = solve_steady_state(&l, SolverMethod::NullspaceLu).unwrap();
        for m in [SolverMethod::ShiftInvertArnoldi, SolverMethod::DenseFallback] {
            worst = worst.max(solve_steady_state(&l, m).unwrap().frobenius_distance(&reference));
        }
        let late = evolve(&l, &DensityMatrix::vacuum(*space), 200.0 / params.loss, default_time_step(params, space)).unwrap();
        worst = worst.max(late.frobenius_distance(&reference));
    }
    (
        worst <= ORACLE_TOL,
        format!("nullspace LU vs shift-invert Arnoldi vs dense vs RK4 (t = 200/g) on N=1 d<=12 and N=2 d=6: max Frobenius distance {worst:.1e}"),
    )
}

// Criterion 3.

/// Taylor series of exp(M) with scaling and squaring.
fn expm(m: &Mat<c64>) -> Mat<c64> {
    let n = m.nrows();
    let norm = (0..n).map(|i| (0..n).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = norm.log2().ceil().max(0.0) as i32 + 1;
    let scaled = m * Scale(c64::new(0.5f64.powi(s), 0.0));
    let mut term = Mat::<c64>::identity(n, n);
    let mut sum = Mat::<c64>::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled * Scale(c64::new(1.0 / k as f64, 0.0));
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn criterion_3() -> (bool, String) {
    // Vacuum steady state below any pump.
    let mut vac: f64 = 0.0;
    for (n, conn, n_max) in [(1, Connectivity::Decoupled, 8), (2, Connectivity::Ferromagnetic { c: 0.1 }, 6), (3, Connectivity::Hyperspin, 3)] {
        let params = NetworkParams::from_connectivity(n, conn, 0.0, 0.5, 0.1).unwrap();
        let space = FockSpace::with_n_max(n, n_max).unwrap();
        let rho = solve_steady_state(&build_liouvillian(&params, &space).unwrap(), SolverMethod::Auto).unwrap();
        vac = vac.max(rho.frobenius_distance(&DensityMatrix::vacuum(space)));
    }

    // Vacuum Wigner function.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut wig: f64 = 0.0;
    for n in 1..=3 {
        let rho = DensityMatrix::vacuum(FockSpace::with_n_max(n, 4).unwrap());
        let origin = vec![c64::new(0.0, 0.0); n];
        wig = wig.max((wigner_at(&rho, &origin).unwrap() - (2.0 / PI).powi(n as i32)).abs());
        for _ in 0..20 {
            let alpha: Vec<c64> = (0..n).map(|_| c64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))).collect();
            let r2: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
            let want = (2.0 / PI).powi(n as i32) * (-2.0 * r2).exp();
            wig = wig.max((wigner_at(&rho, &alpha).unwrap() - want).abs());
        }
    }

    // Two-qubit Bell state in three Fock levels.
    let space = FockSpace::with_n_max(2, 2).unwrap();
    let mut psi = vec![c64::new(0.0, 0.0); 9];
    psi[space.flat_index(&[0, 0]).unwrap()] = c64::new(0.5f64.sqrt(), 0.0);
    psi[space.flat_index(&[1, 1]).unwrap()] = c64::new(0.5f64.sqrt(), 0.0);
    let bell = DensityMatrix::pure(space, &psi).unwrap();
    let bell_err = (0..2).map(|m| (negativity(&bell, m).unwrap().negativity - 0.5).abs()).fold(0.0, f64::max);

    // Displaced-parity kernel against exp(βa† − β̄a) in 60 extra levels.
    let d = 10;
    let big = FockSpace::new(1, d + 60).unwrap();
    let a = annihilation(&big, 0).unwrap().to_dense();
    let ad = creation(&big, 0).unwrap().to_dense();
    let mut kern: f64 = 0.0;
    for _ in 0..6 {
        let alpha = c64::from_polar(rng.random_range(0.05..1.2), rng.random_range(0.0..std::f64::consts::TAU));
        let beta = alpha * 2.0;
        let dm = expm(&(&ad * Scale(beta) - &a * Scale(beta.conj())));
        let k = displacement_kernel(alpha, d).unwrap();
        for m in 0..d {
            for n in 0..d {
                let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
                kern = kern.max((k.matrix[(m, n)] - dm[(m, n)] * parity).norm());
            }
        }
    }
    (
        vac <= VACUUM_TOL && wig <= WIGNER_TOL && bell_err <= BELL_TOL && kern <= KERNEL_TOL,
        format!("analytic anchors: h=0 vacuum {vac:.1e}, vacuum Wigner {wig:.1e}, Bell negativity {bell_err:.1e}, kernel vs padded expm {kern:.1e}"),
    )
}

// Criterion 4.

fn grid(p: &Point) -> WignerGrid {
    wigner(p.rho.as_ref().unwrap(), &SliceSpec::real_cube(2, 3.0, 61)).unwrap()
}

/// Positions of the local maxima of a real-plane grid.
fn maxima(g: &WignerGrid) -> Vec<(f64, f64)> {
    g.local_maxima()
        .iter()
        .map(|i| {
            let c = g.coordinates(i);
            (c[0].re, c[1].re)
        })
        .collect()
}

/// Radius of the global maximum of the grid.
fn ring_radius(g: &WignerGrid) -> f64 {
    let k = argmax(&g.values);
    let n = g.shape()[1];
    let c = g.coordinates(&[k / n, k % n]);
    (c[0].re.powi(2) + c[1].re.powi(2)).sqrt()
}

fn criterion_4(s: &Suite) -> (bool, String) {
    let dec = graph("decoupled", 2, Connectivity::Decoupled);
    let hs = graph("hyperspin", 2, Connectivity::Hyperspin);
    let s1 = ((SNAPSHOT * dec.threshold().unwrap() / 2.0 - 0.5) / 0.1).sqrt();
    let s_hs = ((SNAPSHOT * hs.threshold().unwrap() / 2.0 - 0.5) / 0.1).sqrt();

    let evaluate = |n_max: usize| {
        let m = maxima(&grid(&s.relative(&dec, n_max, SNAPSHOT)));
        let worst = m
            .iter()
            .map(|&(x, y)| ((x.abs() - s1).powi(2) + (y.abs() - s1).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let quadrants = m.iter().map(|&(x, y)| (x > 0.0, y > 0.0)).collect::<std::collections::BTreeSet<_>>().len();
        let r = ring_radius(&grid(&s.relative(&hs, n_max, SNAPSHOT)));
        (m, worst, quadrants, r)
    };
    let low = evaluate(DESK_N2);
    let high = evaluate(DESK_N2 + 2);
    let mean_radius = |m: &[(f64, f64)]| m.iter().map(|&(x, y)| (x * x + y * y).sqrt()).sum::<f64>() / m.len().max(1) as f64;
    let ok_max = s.record(4, "decoupled maxima radius".into(), mean_radius(&low.0), mean_radius(&high.0));
    let ok_ring = s.record(4, "hyperspin ring radius".into(), low.3, high.3);
    let (dec_eval, n_dec) = if ok_max { (&low, DESK_N2) } else { (&high, DESK_N2 + 2) };
    let (r, n_hs) = if ok_ring { (low.3, DESK_N2) } else { (high.3, DESK_N2 + 2) };
    let (m, worst, quadrants) = (&dec_eval.0, dec_eval.1, dec_eval.2);
    let ring_err = (r - s_hs).abs() / s_hs;
    (
        m.len() == 4 && quadrants == 4 && worst <= GRID_STEP && ring_err <= RING_TOL,
        format!(
            "classical consistency at h/h_th=1.5: decoupled {} maxima in {quadrants} quadrants, max distance to (+-S1,+-S1) {worst:.3} (S1={s1:.4}, n_max {n_dec}); hyperspin ring radius {r:.3} vs S={s_hs:.4} ({:.1}%, n_max {n_hs})",
            m.len(),
            100.0 * ring_err
        ),
    )
}

// Criteria 5 and 6 share the sweep logic.

struct Sweep {
    /// `[point][mode]`.
    neg: Vec<Vec<f64>>,
    n_max: usize,
}

impl Sweep {
    fn pt(&self, mode: usize) -> Vec<f64> {
        self.neg.iter().map(|v| v[mode]).collect()
    }
}

/// Sweep at `n_max`, replaced by `n_max + 2` when any point moves by >5%.
fn converged_sweep(s: &Suite, criterion: usize, series: &SeriesConfig, n_max: usize, pumps: &[f64]) -> Sweep {
    let run = |n: usize| {
        let pts: Vec<_> = pumps.iter().map(|&r| s.relative(series, n, r)).collect();
        Sweep {
            neg: pts.iter().map(|p| p.negativities.clone()).collect(),
            n_max: n,
        }
    };
    let low = run(n_max);
    let high = run(n_max + 2);
    let mut ok = true;
    for (k, r) in pumps.iter().enumerate() {
        for m in 0..low.neg[k].len() {
            ok &= s.record(criterion, format!("{} h/h_th={r} PT{}", series.label, m + 1), low.neg[k][m], high.neg[k][m]);
        }
    }
    if ok {
        low
    } else {
        high
    }
}

fn criterion_5(s: &Suite) -> (bool, String) {
    let fm1 = graph("ferromagnetic c=0.1", 2, Connectivity::Ferromagnetic { c: 0.1 });
    let fm2 = graph("ferromagnetic c=0.2", 2, Connectivity::Ferromagnetic { c: 0.2 });
    let hs = graph("hyperspin", 2, Connectivity::Hyperspin);
    let a = converged_sweep(s, 5, &fm1, DESK_N2, &FIG2_PUMPS);
    let b = converged_sweep(s, 5, &fm2, DESK_N2, &FIG2_PUMPS);
    let h = converged_sweep(s, 5, &hs, DESK_N2, &FIG2_PUMPS);
    let pt_gap = [&a, &b, &h]
        .iter()
        .flat_map(|sw| sw.neg.iter().map(|v| (v[0] - v[1]).abs()))
        .fold(0.0, f64::max);
    let (na, nb, nh) = (a.pt(0), b.pt(0), h.pt(0));
    let (ka, kb) = (argmax(&na), argmax(&nb));
    let checks = [
        ("c=0.1 interior maximum", interior_maximum(&na)),
        ("c=0.2 interior maximum", interior_maximum(&nb)),
        ("peak value grows with c", nb[kb] > na[ka]),
        ("peak location grows with c", FIG2_PUMPS[kb] > FIG2_PUMPS[ka]),
        ("PT1 = PT2", pt_gap <= PT2_TOL),
        ("hyperspin strictly increasing", strictly_increasing(&nh)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        format!(
            "N=2 sweep h/h_th 0.6..1.8 ({} points): c=0.1 peak {:.3e} at {} [n_max {}], c=0.2 peak {:.3e} at {} [n_max {}], max |PT1-PT2| {pt_gap:.1e}, hyperspin {} [n_max {}]; c=0.1 curve {}{}",
            FIG2_PUMPS.len(),
            na[ka],
            FIG2_PUMPS[ka],
            a.n_max,
            nb[kb],
            FIG2_PUMPS[kb],
            b.n_max,
            if strictly_increasing(&nh) { "increasing" } else { "not increasing" },
            h.n_max,
            fmt_list(&na),
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    )
}

fn rel_spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

fn criterion_6(s: &Suite) -> (bool, String) {
    let fm = graph("ferromagnetic", 3, Connectivity::Ferromagnetic { c: FIG3_C });
    let ff = graph("fully-frustrated", 3, Connectivity::FullyFrustrated { c: FIG3_C });
    let ni = graph("non-ising", 3, Connectivity::NonIsing { c: FIG3_C });
    let hs = graph("hyperspin", 3, Connectivity::Hyperspin);
    let sweeps: Vec<(&SeriesConfig, Sweep)> = [&fm, &ff, &ni, &hs]
        .into_iter()
        .map(|g| (g, converged_sweep(s, 6, g, DESK_N3, &FIG3_PUMPS)))
        .collect();
    let mut failed = Vec::new();
    let mut notes = Vec::new();
    for (g, sw) in &sweeps {
        let curve = sw.pt(0);
        let linear = g.label != "hyperspin";
        if g.label != "non-ising" {
            let spread = sw.neg.iter().map(|v| rel_spread(v)).fold(0.0, f64::max);
            if spread > PT3_REL_TOL {
                failed.push(format!("{} PT spread {spread:.1e}", g.label));
            }
        } else {
            for r in [1.2, 1.5] {
                let k = FIG3_PUMPS.iter().position(|&x| x == r).unwrap();
                let v = &sw.neg[k];
                if !(v[1] < v[0] && rel_spread(&[v[0], v[2]]) <= PT3_REL_TOL) {
                    failed.push(format!("non-ising PT ordering at {r}: {}", fmt_list(v)));
                }
            }
        }
        if linear && !interior_maximum(&curve) {
            failed.push(format!("{} has no interior maximum", g.label));
        }
        if !linear && !strictly_increasing(&curve) {
            failed.push("hyperspin not increasing".into());
        }
        notes.push(format!("{} [n_max {}] {}", g.label, sw.n_max, fmt_list(&curve)));
    }
    let ni_sw = &sweeps[2].1;
    let k = FIG3_PUMPS.iter().position(|&x| x == 1.5).unwrap();
    (
        failed.is_empty(),
        format!(
            "N=3 sweeps (c={FIG3_C}, h/h_th {:?}): PT1 curves {}; non-ising at 1.5 PT1/PT2/PT3 {}{}",
            FIG3_PUMPS,
            notes.join("; "),
            fmt_list(&ni_sw.neg[k]),
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    )
}

// Criterion 7.

fn criterion_7(s: &Suite) -> (bool, String) {
    let ni = graph("non-ising", 3, Connectivity::NonIsing { c: 0.1 });
    let ff = graph("fully-frustrated", 3, Connectivity::FullyFrustrated { c: 0.1 });
    let low = s.relative(&ni, DESK_N3, SNAPSHOT);
    let high = s.relative(&ni, DESK_N3 + 2, SNAPSHOT);
    let ok1 = s.record(7, "non-ising <n1>".into(), low.mean_n[0], high.mean_n[0]);
    let ok2 = s.record(7, "non-ising <n2>".into(), low.mean_n[1], high.mean_n[1]);
    let p = if ok1 && ok2 { low } else { high };
    let ratio = p.mean_n[0] / p.mean_n[1];
    let sym = s.relative(&ff, DESK_N3, SNAPSHOT);
    (
        p.mean_n[1] < p.mean_n[0],
        format!(
            "dark middle mode at h/h_th=1.5, c=0.1 [n_max {}]: C13=-2c <n1>={:.4} <n2>={:.4} <n3>={:.4}, factor {ratio:.2} (target 5); C13=-c gives <n1>={:.4} <n2>={:.4}",
            p.n_max, p.mean_n[0], p.mean_n[1], p.mean_n[2], sym.mean_n[0], sym.mean_n[1]
        ),
    )
}

// Criterion 8.

fn criterion_8(s: &Suite) -> (bool, String) {
    let shifts = s.shifts.lock().unwrap();
    let flagged: Vec<&Shift> = shifts.iter().filter(|x| x.relative > CONVERGENCE_TOL).collect();
    let worst = shifts.iter().map(|x| x.relative).fold(0.0, f64::max);
    let mut by_criterion = String::new();
    for c in 4..=7 {
        let all = shifts.iter().filter(|x| x.criterion == c).count();
        let bad = flagged.iter().filter(|x| x.criterion == c).count();
        by_criterion.push_str(&format!(" c{c} {bad}/{all}"));
    }
    let examples: Vec<String> = flagged.iter().take(6).map(|x| format!("{} {:.1}%", x.what, 100.0 * x.relative)).collect();
    (
        !shifts.is_empty() && flagged.is_empty(),
        format!(
            "n_max -> n_max+2 shifts over {} observables: flagged{by_criterion}, worst {:.1}%{}",
            shifts.len(),
            100.0 * worst,
            if examples.is_empty() { String::new() } else { format!("; e.g. {}", examples.join(", ")) }
        ),
    )
}

fn main() {
    let suite = Suite {
        cache: Mutex::new(HashMap::new()),
        shifts: Mutex::new(Vec::new()),
    };
    let criteria: Vec<(usize, Box<dyn Fn(&Suite) -> (bool, String)>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(|_| criterion_2())),
        (3, Box::new(|_| criterion_3())),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
    ];
    let mut failed = Vec::new();
    for (k, f) in &criteria {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(|| f(&suite))) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!("criterion {k} {} ({:.0} s): {detail}", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        if !ok {
            failed.push(*k);
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
