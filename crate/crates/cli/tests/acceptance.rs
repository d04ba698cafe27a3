//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/N/A line
//! each and exits non-zero if any criterion fails.
//!
//! Built with `harness = false` so the report is printed even when all
//! criteria pass.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use memsyield::devices::calibrate_frequency_constant;
use memsyield::distributions::sample_rng;
use memsyield::montecarlo::run_monte_carlo;
use memsyield::netlist::{parse, serialize};
use memsyield::sensitivity::{jacobian_at, Scheme, DEFAULT_REL_STEP};
use memsyield::sweep::{run_sweep, Axis, Cell};
use memsyield::worstcase::{oracle_grid_error, wcd_brute_oracle, wcd_linear_for, wcd_relinearized, yield_from_beta};
use memsyield::{DesignProblem, Metric};
use rand::seq::SliceRandom;
use rand::Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    NotApplicable(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn cantilever(width: &str, spec_hz: f64) -> DesignProblem {
    let calib = calibrate_frequency_constant(2e-6, 100e-6, 50e3).unwrap();
    parse(&format!(
        "device cantilever calib_f={calib:e}\n{width}\nbind w = w\nbind l = 100e-6\nmetric resonant_frequency\nspec resonant_frequency ge {spec_hz:e}\n"
    ))
    .unwrap()
}

// Width below which f < 49 kHz, from f ∝ w^(3/2) at fixed length.
fn width_boundary() -> f64 {
    2e-6 * (49.0f64 / 50.0).powf(2.0 / 3.0)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("memsyield-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn c1_fixed_width() -> Verdict {
    let calib = calibrate_frequency_constant(2e-6, 100e-6, 50e3).unwrap();
    let path = scratch("fixed.sam");
    std::fs::write(&path, serialize(&cantilever("param w nominal=2e-6 dist=none", 49e3))).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_memsyield"))
        .args(["mc", path.to_str().unwrap(), "--samples", "10000", "--seed", "1"])
        .output()
        .unwrap();
    if !out.status.success() {
        return Verdict::Fail(format!("mc exited with {:?}", out.status.code()));
    }
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let y = v["result"]["yield_estimate"].as_f64().unwrap();
    let f = memsyield::devices::CantileverModel::new(169e9, 2e-6, 2e-6, 100e-6, calib).unwrap().resonant_frequency().unwrap();
    verdict(y == 1.0, format!("yield = {y}, nominal f = {f:.6} Hz"))
}

const HALFWIDTH: f64 = 0.04778e-6;

fn c2_uniform_78() -> Verdict {
    let p = cantilever(&format!("param w nominal=2e-6 dist=uniform halfwidth={HALFWIDTH:e}"), 49e3);
    let mc = run_monte_carlo(&p, 1_000_000, 2).unwrap();
    let delta = 2e-6 - width_boundary();
    let analytic = (HALFWIDTH + delta) / (2.0 * HALFWIDTH);
    let err = (mc.yield_estimate - 0.78).abs();
    verdict(
        err <= 0.002,
        format!("MC yield = {:.5} (target 0.78 ± 0.002, uniform-width oracle {analytic:.5})", mc.yield_estimate),
    )
}

fn c3_widened_beam() -> Verdict {
    let p = cantilever(&format!("param w nominal=4e-6 dist=uniform halfwidth={HALFWIDTH:e}"), 49e3);
    let mc = run_monte_carlo(&p, 1_000_000, 3).unwrap();
    verdict(mc.yield_estimate >= 0.999, format!("MC yield = {:.6} at w = 4 µm", mc.yield_estimate))
}

// Φ by its Maclaurin series, independent of the library's erfc path.
fn phi_series(x: f64) -> f64 {
    let (mut term, mut sum, mut k) = (x, x, 0.0);
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        k += 1.0;
        term *= -x * x / 2.0 / k;
        sum += term / (2.0 * k + 1.0);
    }
    0.5 + sum / (2.0 * std::f64::consts::PI).sqrt()
}

fn c4_yield_mapping() -> Verdict {
    let (y0, y3, ym1) = (yield_from_beta(0.0), yield_from_beta(3.0), yield_from_beta(-1.0));
    let ok = y0 == 0.5
        && (y3 - 0.99865).abs() <= 1e-5
        && (ym1 - 0.15866).abs() <= 1e-5
        && (y3 - phi_series(3.0)).abs() <= 1e-12
        && (ym1 - phi_series(-1.0)).abs() <= 1e-12;
    verdict(ok, format!("Y(0) = {y0}, Y(3) = {y3:.7}, Y(-1) = {ym1:.7}"))
}

fn c5_wcd_vs_mc() -> Verdict {
    let p = parse(
        "device linear c0=-0.5 c1=1 c2=-2
         param a nominal=1 dist=gaussian sigma=1
         param b nominal=-0.25 dist=gaussian sigma=0.5
         bind x1 = a
         bind x2 = b
         metric response
         spec response ge 0",
    )
    .unwrap();
    let w = wcd_linear_for(&p, &p.specs()[0]).unwrap();
    let mc = run_monte_carlo(&p, 1_000_000, 5).unwrap();
    let diff = (w.linear_yield - mc.yield_estimate).abs();
    verdict(
        diff <= 0.002,
        format!("beta = {:.6}, linear yield = {:.5}, MC = {:.5}, |diff| = {diff:.5}", w.beta, w.linear_yield, mc.yield_estimate),
    )
}

// The one-shot linear solve inherits the curvature of the metric, so it is
// held to the oracle only where the process spread keeps the metric close
// to linear over the worst-case distance. The relinearized solve is held to
// it everywhere.
fn c6_oracle_agreement() -> Verdict {
    const RADIUS: f64 = 3.5;
    const POINTS: usize = 501;
    let calib = calibrate_frequency_constant(2e-6, 100e-6, 50e3).unwrap();
    let cantilever_f = |sw: &str, sl: &str, bound: &str| {
        format!(
            "device cantilever calib_f={calib:e}\nparam w nominal=2e-6 dist=gaussian sigma={sw}\nparam l nominal=100e-6 dist=gaussian sigma={sl}\n\
             bind w = w\nbind l = l\nmetric resonant_frequency\nspec resonant_frequency ge {bound}\n"
        )
    };
    let cantilever_k = |st: &str, sl: &str, bound: &str| {
        format!(
            "device cantilever\nparam t nominal=2e-6 dist=gaussian sigma={st}\nparam l nominal=100e-6 dist=gaussian sigma={sl}\n\
             bind t = t\nbind l = l\nmetric spring_constant\nspec spring_constant le {bound}\n"
        )
    };
    let pressure = |st: &str, sl: &str, bound: &str| {
        format!(
            "device pressure_sensor\nparam t nominal=1e-6 dist=gaussian sigma={st}\nparam l nominal=300e-6 dist=gaussian sigma={sl}\n\
             bind t = t\nbind l = l\nmetric touchdown_force\nspec touchdown_force ge {bound}\n"
        )
    };
    let problems = [
        ("cantilever f, 0.1% spread", cantilever_f("0.002e-6", "0.05e-6", "49.8e3"), true),
        ("cantilever k, 0.1% spread", cantilever_k("0.0005e-6", "0.1e-6", "2.7256"), true),
        ("pressure sensor F, 0.2% spread", pressure("0.002e-6", "0.3e-6", "1.973e-5"), true),
        ("cantilever f, 1% spread", cantilever_f("0.02e-6", "0.5e-6", "48e3"), false),
        ("cantilever k, 1% spread", cantilever_k("0.005e-6", "1e-6", "2.92"), false),
        ("pressure sensor F, 2% spread", pressure("0.02e-6", "3e-6", "1.7e-5"), false),
    ];
    let grid = oracle_grid_error(RADIUS, POINTS, 2);
    let tol = grid.min(0.02);
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, text, linear_held) in &problems {
        let p = parse(text).unwrap();
        let spec = &p.specs()[0];
        let oracle = wcd_brute_oracle(&p, spec, RADIUS, POINTS).unwrap();
        let lin = wcd_linear_for(&p, spec).unwrap().beta;
        let relin = wcd_relinearized(&p, spec, 100, 1e-10).unwrap().beta;
        ok &= (relin - oracle).abs() <= tol && oracle < RADIUS - grid;
        if *linear_held {
            ok &= (lin - oracle).abs() <= tol;
        }
        lines.push(format!(
            "{label}: oracle {oracle:.4}, linear {lin:.4}{}, relinearized {relin:.4}",
            if *linear_held { "" } else { " (curvature, not held)" }
        ));
    }
    verdict(ok, format!("tolerance {tol:.4}; {}", lines.join("; ")))
}

fn c7_jacobian_fidelity() -> Verdict {
    let calib = calibrate_frequency_constant(2e-6, 100e-6, 50e3).unwrap();
    let cases = [
        (
            Metric::SpringConstant,
            "device cantilever\nparam E nominal=169e9 dist=gaussian sigma=5e9\nparam t nominal=2e-6 dist=gaussian sigma=5e-8\nparam w nominal=2e-6 dist=gaussian sigma=5e-8\nparam l nominal=100e-6 dist=gaussian sigma=1e-6\nbind E = E\nbind t = t\nbind w = w\nbind l = l\nmetric spring_constant\n".to_string(),
        ),
        (
            Metric::ResonantFrequency,
            format!("device cantilever calib_f={calib:e}\nparam w nominal=2e-6 dist=gaussian sigma=5e-8\nparam l nominal=100e-6 dist=gaussian sigma=1e-6\nparam E nominal=169e9 dist=gaussian sigma=5e9\nbind w = w\nbind l = l\nbind E = E\nmetric resonant_frequency\n"),
        ),
        (
            Metric::TouchdownForce,
            "device pressure_sensor\nparam E nominal=169e9 dist=gaussian sigma=5e9\nparam t nominal=1e-6 dist=gaussian sigma=2e-8\nparam w nominal=100e-6 dist=gaussian sigma=1e-6\nparam l nominal=300e-6 dist=gaussian sigma=3e-6\nparam g nominal=2e-6 dist=gaussian sigma=5e-8\nbind E = E\nbind t = t\nbind w = w\nbind l = l\nbind g0 = g\nmetric touchdown_force\n".to_string(),
        ),
        (
            Metric::Response,
            "device linear c0=0.5 c1=3 c2=-1e-3 c3=7e4\nparam a nominal=1 dist=gaussian sigma=0.1\nparam b nominal=10 dist=uniform halfwidth=2\nparam c nominal=1e-4 dist=exponential rate=1e5 offset=0\nbind x1 = a\nbind x2 = b\nbind x3 = c\nmetric response\n".to_string(),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut rng = sample_rng(7, 0);
    for (metric, text) in &cases {
        let p = parse(text).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = p.nominal_point().iter().map(|v| v * rng.gen_range(0.5..2.0)).collect();
            let central = jacobian_at(&p, &x, Scheme::Central, DEFAULT_REL_STEP).unwrap();
            let analytic = jacobian_at(&p, &x, Scheme::Analytic, DEFAULT_REL_STEP).unwrap();
            let row = central.metrics.iter().position(|m| m == metric).unwrap();
            for (c, a) in central.jacobian[row].iter().zip(&analytic.jacobian[row]) {
                worst = worst.max((c - a).abs() / a.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    verdict(worst <= 1e-6, format!("max relative error {worst:.2e} over 400 points"))
}

fn c8_sweep_integrity() -> Verdict {
    let mut notes = Vec::new();

    let pressure = parse(
        "device pressure_sensor
         param w nominal=100e-6 dist=gaussian sigma=1e-6
         param l nominal=300e-6 dist=gaussian sigma=3e-6
         bind w = w
         bind l = l
         metric touchdown_force
         spec touchdown_force ge 2e-5",
    )
    .unwrap();
    let map = run_sweep(&pressure, Axis::new("w", 60e-6, 140e-6, 41).unwrap(), Axis::new("l", 200e-6, 400e-6, 41).unwrap()).unwrap();

    let mut rng = sample_rng(8, 0);
    let mut recompute_ok = true;
    for _ in 0..20 {
        let (i, j) = (rng.gen_range(0..41), rng.gen_range(0..41));
        let mut x = pressure.nominal_point();
        x[0] = map.x_values[i];
        x[1] = map.y_values[j];
        let direct = pressure.passes(&x).unwrap();
        recompute_ok &= (map.classification[i][j] == Cell::Pass) == direct;
    }
    notes.push(format!("recomputation {}", if recompute_ok { "exact" } else { "MISMATCH" }));

    // F grows with w and shrinks with l: a pass at (i, j) implies passes at
    // every larger w and smaller l.
    let pass = |i: usize, j: usize| map.classification[i][j] == Cell::Pass;
    let mut staircase_ok = true;
    for i in 0..41 {
        for j in 0..41 {
            if pass(i, j) {
                staircase_ok &= (i..41).all(|a| (0..=j).all(|b| pass(a, b)));
            }
        }
    }
    let mixed = map.pass_count() > 0 && map.pass_count() < 41 * 41;
    notes.push(format!("staircase {} (pass fraction {:.4})", if staircase_ok { "holds" } else { "BROKEN" }, map.yield_fraction));

    let corner = parse(
        "device linear c0=0 c1=1 c2=1
         param a nominal=0.5 dist=gaussian sigma=1
         param b nominal=0.5 dist=gaussian sigma=1
         bind x1 = a
         bind x2 = b
         metric response
         spec response ge 1.5",
    )
    .unwrap();
    let small = run_sweep(&corner, Axis::new("a", 0.0, 1.0, 2).unwrap(), Axis::new("b", 0.0, 1.0, 2).unwrap()).unwrap();
    notes.push(format!("2x2 fraction {}", small.yield_fraction));

    verdict(recompute_ok && staircase_ok && mixed && small.yield_fraction == 0.25, notes.join(", "))
}

fn c9_not_reproducible() -> Verdict {
    Verdict::NotApplicable(
        "86% pressure-sensor yield and its width/length ranking depend on an external simulator's sensor model; \
         criteria 6 to 8 stand in for them"
            .into(),
    )
}

fn c10_thread_determinism() -> Verdict {
    let path = scratch("determinism.sam");
    let text = format!(
        "device cantilever calib_f={:e}\nparam w nominal=2e-6 dist=uniform halfwidth={HALFWIDTH:e}\nparam l nominal=100e-6 dist=gaussian sigma=0.5e-6\nbind w = w\nbind l = l\nmetric resonant_frequency\nspec resonant_frequency ge 49e3\n",
        calibrate_frequency_constant(2e-6, 100e-6, 50e3).unwrap()
    );
    std::fs::write(&path, text).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_memsyield"))
            .args(["mc", path.to_str().unwrap(), "--samples", "1000000", "--seed", "10", "--threads", threads])
            .output()
            .unwrap()
    };
    let (one, eight) = (run("1"), run("8"));
    let ok = one.status.success() && eight.status.success() && one.stdout == eight.stdout && !one.stdout.is_empty();
    verdict(ok, format!("{} bytes at --threads 1, {} bytes at --threads 8, identical: {}", one.stdout.len(), eight.stdout.len(), one.stdout == eight.stdout))
}

fn random_value(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    // Log-uniform magnitudes exercise the exponent formatting.
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn random_problem_text(rng: &mut impl Rng) -> String {
    let (device, fields, metrics): (String, Vec<String>, Vec<&str>) = match rng.gen_range(0..3) {
        0 => {
            let calib = if rng.gen_bool(0.5) { format!(" calib_f={:e}", random_value(rng, 1e5, 1e9)) } else { String::new() };
            (
                format!("device cantilever{calib}"),
                ["E", "t", "w", "l"].map(String::from).to_vec(),
                vec!["spring_constant", "resonant_frequency"],
            )
        }
        1 => ("device pressure_sensor".into(), ["E", "t", "w", "l", "g0"].map(String::from).to_vec(), vec!["touchdown_force"]),
        _ => {
            let n = rng.gen_range(1..=4);
            let mut d = format!("device linear c0={:e}", rng.gen_range(-5.0..5.0));
            for k in 1..=n {
                d.push_str(&format!(" c{k}={:e}", rng.gen_range(-5.0..5.0)));
            }
            (d, (1..=n).map(|k| format!("x{k}")).collect(), vec!["response"])
        }
    };
    let mut lines = vec![device];

    let n_params = rng.gen_range(1..=4);
    let names: Vec<String> = (0..n_params).map(|k| format!("{}{k}", ["p", "geom_", "Q"][k % 3])).collect();
    for name in &names {
        let nominal = random_value(rng, 1e-7, 1e11);
        let dist = match rng.gen_range(0..5) {
            0 => "dist=none".to_string(),
            1 => format!("dist=gaussian sigma={:e}", nominal * random_value(rng, 1e-4, 0.2)),
            2 => format!("dist=uniform halfwidth={:e}", nominal * random_value(rng, 1e-4, 0.5)),
            3 => format!("dist=uniform lo={:e} hi={:e}", nominal * 0.9, nominal * 1.3),
            _ => format!("dist=exponential rate={:e} offset={:e}", random_value(rng, 1e-3, 1e8), nominal * 0.5),
        };
        lines.push(format!("param {name} nominal={nominal:e} {dist}"));
    }

    let mut bound: Vec<&String> = fields.iter().collect();
    bound.shuffle(rng);
    bound.truncate(rng.gen_range(0..=fields.len()));
    for field in bound {
        if rng.gen_bool(0.7) {
            lines.push(format!("bind {field} = {}", names.choose(rng).unwrap()));
        } else {
            lines.push(format!("bind {field}={:e}", random_value(rng, 1e-6, 1e3)));
        }
    }

    let mut declared = metrics.clone();
    declared.shuffle(rng);
    declared.truncate(rng.gen_range(1..=metrics.len()));
    for m in &declared {
        lines.push(format!("metric {m}"));
    }
    for _ in 0..rng.gen_range(0..=3) {
        let rel = if rng.gen_bool(0.5) { "ge" } else { "le" };
        lines.push(format!("spec {} {rel} {:e}", declared.choose(rng).unwrap(), rng.gen_range(-1e3..1e3)));
    }

    // Statements may come in any order; sprinkle comments and blank lines.
    lines[1..].shuffle(rng);
    let mut text = String::new();
    for line in lines {
        match rng.gen_range(0..6) {
            0 => text.push_str("# comment line\n"),
            1 => text.push('\n'),
            _ => {}
        }
        text.push_str(&line);
        if rng.gen_bool(0.2) {
            text.push_str("   # trailing");
        }
        text.push('\n');
    }
    text
}

fn mutate(rng: &mut impl Rng, text: &str) -> String {
    const ALPHABET: &[char] = &['=', '#', ' ', '\n', '\t', '-', '+', '.', 'e', 'E', '0', '9', 'x', '_', 'µ', '"', ':', ',', '\u{0}'];
    const TOKENS: &[&str] = &["device", "param", "bind", "metric", "spec", "dist=", "nominal=", "ge", "le", "nan", "inf", "1e400", "=="];
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.gen_range(1..=3) {
        let at = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..6) {
            0 if !chars.is_empty() => {
                chars.remove(at.min(chars.len() - 1));
            }
            1 => chars.insert(at, *ALPHABET.choose(rng).unwrap()),
            2 => {
                let token: Vec<char> = TOKENS.choose(rng).unwrap().chars().collect();
                chars.splice(at..at, token);
            }
            3 if !chars.is_empty() => {
                let i = at.min(chars.len() - 1);
                chars[i] = *ALPHABET.choose(rng).unwrap();
            }
            4 => chars.truncate(at),
            _ => {
                let mut lines: Vec<String> = chars.iter().collect::<String>().lines().map(str::to_string).collect();
                if !lines.is_empty() {
                    let i = rng.gen_range(0..lines.len());
                    let dup = lines[i].clone();
                    lines.insert(rng.gen_range(0..=lines.len()), dup);
                }
                chars = lines.join("\n").chars().collect();
            }
        }
    }
    chars.into_iter().collect()
}

fn c11_parser_totality() -> Verdict {
    let mut rng = sample_rng(11, 0);
    let mut corpus = Vec::new();
    let mut roundtrip_failures = 0;
    while corpus.len() < 50 {
        let text = random_problem_text(&mut rng);
        let Ok(problem) = parse(&text) else {
            // Random bindings may leave a problem invalid; those are skipped.
            continue;
        };
        let canonical = serialize(&problem);
        match parse(&canonical) {
            Ok(again) if again == problem && serialize(&again) == canonical => {}
            _ => roundtrip_failures += 1,
        }
        corpus.push(text);
    }

    let mut panics = 0;
    let mut bad_lines = 0;
    let mut rejected = 0;
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for k in 0..10_000 {
        let mutated = mutate(&mut rng, &corpus[k % corpus.len()]);
        match panic::catch_unwind(AssertUnwindSafe(|| parse(&mutated))) {
            Err(_) => panics += 1,
            Ok(Err(e)) => {
                rejected += 1;
                let line_count = mutated.split('\n').count().max(1);
                if e.line == 0 || e.line > line_count || e.column == 0 {
                    bad_lines += 1;
                }
            }
            Ok(Ok(_)) => {}
        }
    }
    panic::set_hook(hook);
    verdict(
        roundtrip_failures == 0 && panics == 0 && bad_lines == 0,
        format!(
            "round-trip failures {roundtrip_failures}/50; 10000 mutations: {rejected} rejected, {panics} panics, {bad_lines} errors without a valid line"
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, Duration, Check); 11] = [
        (1, "cantilever fixed width yields 1.0", Duration::from_secs(1), c1_fixed_width),
        (2, "cantilever uniform width yields 0.78", Duration::from_secs(10), c2_uniform_78),
        (3, "widened beam yields >= 0.999", Duration::from_secs(10), c3_widened_beam),
        (4, "yield from worst-case distance", Duration::from_secs(1), c4_yield_mapping),
        (5, "worst-case yield matches Monte Carlo", Duration::from_secs(10), c5_wcd_vs_mc),
        (6, "worst-case distance matches grid oracle", Duration::from_secs(30), c6_oracle_agreement),
        (7, "central differences match analytic gradients", Duration::from_secs(5), c7_jacobian_fidelity),
        (8, "sweep integrity", Duration::from_secs(5), c8_sweep_integrity),
        (9, "pressure-sensor 86% yield", Duration::ZERO, c9_not_reproducible),
        (10, "mc output independent of thread count", Duration::from_secs(20), c10_thread_determinism),
        (11, "parser round-trip and totality", Duration::from_secs(10), c11_parser_totality),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let v = panic::catch_unwind(check).unwrap_or_else(|_| Verdict::Fail("panicked".into()));
        let took = start.elapsed();
        let (tag, detail) = match v {
            Verdict::NotApplicable(d) => ("N/A ", d),
            Verdict::Pass(d) if took <= budget => ("PASS", d),
            Verdict::Pass(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Verdict::Fail(d) => ("FAIL", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} [{id:>2}] {name}: {detail} ({:.2} s)", took.as_secs_f64());
    }
    println!("acceptance: {} of 11 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
