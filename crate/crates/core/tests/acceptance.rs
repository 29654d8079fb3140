//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use ostrowski_bounds::bounds::{
    cor23_constant, hadamard_chain, midpoint_concave_bound, montgomery_residual, thm2_power_closed_form,
    thm2_rhs, thm4_endpoint_form, thm4_midpoint_form, BoundEngine, BoundId, ProblemInstance,
};
use ostrowski_bounds::harness::{run_falsify, run_sweep, Scenario, XPolicy};
use ostrowski_bounds::hclass::{HSpec, Sampling};
use ostrowski_bounds::means::{audit_prop1, audit_prop2, audit_prop3};
use ostrowski_bounds::quadrature::{integrate, integrate_pure, QuadStatus};
use ostrowski_bounds::scalar::linspace;
use ostrowski_bounds::special::{beta, log_gamma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn identity_reduction() -> Check {
    let start = Instant::now();
    let funcs = ["x^2", "x^4", "exp(x)", "x^3 - x"];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for i in 0..50 {
        let f = funcs[i % funcs.len()];
        let a = rng.gen_range(0.0..2.5);
        let b = rng.gen_range(a + 0.05..=3.0);
        let inst = ProblemInstance::parse(f, a, b, a, HSpec::identity())
            .map_err(|e| e.to_string())?
            .with_estimated_m()
            .map_err(|e| e.to_string())?;
        let engine = BoundEngine::new(inst);
        for x in linspace(a, b, 11) {
            let c = engine.classical_at(x).map_err(|e| e.to_string())?.rhs;
            let t = engine.thm2_at(x).map_err(|e| e.to_string())?.rhs;
            let rel = (c - t).abs() / c.abs().max(f64::MIN_POSITIVE);
            if c != t {
                worst = worst.max(rel);
            }
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("{compared} comparisons, max relative difference {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn closed_forms() -> Check {
    let mut worst_closed = 0.0f64;
    for s in [0.25, 0.5, 0.75, 1.0] {
        let r = integrate_pure(|t: f64| t.powf(2.0 * s) + (t - t * t).powf(s), 0.0, 1.0, 1e-10);
        worst_closed = worst_closed.max((r.value - thm2_power_closed_form(s)).abs());
    }
    let mut worst_beta = 0.0f64;
    for (x, y) in [(1.0, 1.0), (2.0, 2.0), (1.5, 1.5), (0.5, 0.5)] {
        let r = integrate_pure(|t: f64| t.powf(x - 1.0) * (1.0 - t).powf(y - 1.0), 0.0, 1.0, 1e-9);
        let b: f64 = beta(x, y).map_err(|e| e.to_string())?;
        worst_beta = worst_beta.max((r.value - b).abs());
    }
    let ln24 = (log_gamma(5.0f64).map_err(|e| e.to_string())? - 24f64.ln()).abs();
    ensure(
        worst_closed <= 1e-6 && worst_beta <= 1e-7 && ln24 <= 1e-10,
        format!("power closed form max error {worst_closed:.2e}, beta max error {worst_beta:.2e}"),
    )
}

fn montgomery() -> Check {
    let mut worst = 0.0f64;
    for f in ["x^2", "x^4", "exp(x)", "ln(x+1)"] {
        for x in linspace(0.0, 1.0, 9) {
            let inst = ProblemInstance::parse(f, 0.0, 1.0, x, HSpec::identity()).map_err(|e| e.to_string())?;
            worst = worst.max(montgomery_residual(&inst).map_err(|e| e.to_string())?);
        }
    }
    ensure(worst <= 1e-8, format!("36 residuals, max {worst:.2e}"))
}

struct SuiteCounts {
    certified: [usize; 5],
    checked_points: usize,
    violations: Vec<String>,
    chains: usize,
}

fn inequality_suite() -> Check {
    let catalog: [(&str, f64, f64); 9] = [
        ("x^2", 0.0, 1.0),
        ("x^4", 0.0, 1.0),
        ("exp(x)", 0.0, 1.0),
        ("ln(x+1)", 0.0, 1.0),
        ("x^3 - x", 0.0, 1.0),
        ("sin(x)", 0.0, 3.0),
        ("(2/3)*x^(3/2)", 1.0, 2.0),
        ("(3/4)*x^(4/3)", 1.0, 2.0),
        ("(3/5)*x^(5/3)", 1.0, 2.0),
    ];
    let hs = ["t", "t^s:0.5", "t^s:0.25", "1", "1/t", "t^n:2", "shifted:1:2", "shifted:1:0.5"];
    let ids = [BoundId::Classical, BoundId::Thm2, BoundId::Thm3, BoundId::Thm4, BoundId::Thm5];
    let mut counts = SuiteCounts {
        certified: [0; 5],
        checked_points: 0,
        violations: Vec::new(),
        chains: 0,
    };
    for (f, a, b) in catalog {
        for h in hs {
            let h: HSpec = h.parse().map_err(|e: ostrowski_bounds::hclass::HSpecError| e.to_string())?;
            let base = ProblemInstance::parse(f, a, b, a, h.clone())
                .map_err(|e| e.to_string())?
                .with_estimated_m()
                .map_err(|e| e.to_string())?;
            for exponents in [Some(1.5), Some(2.0), Some(3.0), None] {
                let inst = match exponents {
                    Some(p) => base.clone().with_p(p),
                    None => base.clone().with_q(1.0),
                }
                .map_err(|e| e.to_string())?;
                let engine = BoundEngine::new(inst);
                for (k, id) in ids.iter().enumerate() {
                    let needs_p = matches!(id, BoundId::Thm3 | BoundId::Thm5);
                    if needs_p && exponents.is_none() {
                        continue;
                    }
                    if exponents.is_some_and(|p| p != 2.0) && matches!(id, BoundId::Classical | BoundId::Thm2) {
                        continue;
                    }
                    let probe = engine.evaluate(*id, a, None).map_err(|e| e.to_string())?;
                    if !probe.applicable {
                        continue;
                    }
                    counts.certified[k] += 1;
                    for x in linspace(a, b, 101) {
                        let lhs = engine.lhs_at(x).map_err(|e| e.to_string())?;
                        let v = engine.evaluate(*id, x, None).map_err(|e| e.to_string())?;
                        counts.checked_points += 1;
                        if !v.holds_for(lhs) {
                            counts.violations.push(format!("{id} f={f} h={h} {exponents:?} x={x}: {lhs} > {}", v.rhs));
                        }
                    }
                }
            }
            let chain = hadamard_chain(|u| base.f.eval(u), &h, a, b, Sampling::default()).map_err(|e| e.to_string())?;
            let nonneg = linspace(a, b, 201).into_iter().all(|u| base.f.eval(u).is_ok_and(|v| v >= 0.0));
            if chain.applicable && nonneg {
                counts.chains += 1;
                if !chain.holds() {
                    counts.violations.push(format!("hadamard f={f} h={h}: {:?}", (chain.left, chain.middle, chain.right)));
                }
            }
        }
    }
    let nonvacuous = counts.certified.iter().all(|&c| c > 0) && counts.chains > 0;
    let detail = format!(
        "certified (classical, thm2, thm3, thm4, thm5) = {:?}, {} points, {} chains, {} violations{}",
        counts.certified,
        counts.checked_points,
        counts.chains,
        counts.violations.len(),
        counts.violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
    );
    ensure(counts.violations.is_empty() && nonvacuous, detail)
}

fn divergence() -> Check {
    let inst = ProblemInstance::parse("x^2", 0.0, 1.0, 0.5, HSpec::reciprocal())
        .and_then(|i| i.with_m(2.0))
        .map_err(|e| e.to_string())?;
    let v = thm2_rhs(&inst).map_err(|e| e.to_string())?;
    let h = HSpec::reciprocal();
    let r = integrate(|t: f64| Ok::<_, ostrowski_bounds::expr::DomainError>(h.eval(t * t)? + h.eval(t - t * t)?), 0.0, 1.0, 1e-10)
        .map_err(|e| e.to_string())?;
    let noted = v.notes.iter().any(|n| n.contains("divergenceSuspected"));
    ensure(
        v.rhs == f64::INFINITY && noted && r.status == QuadStatus::DivergenceSuspected,
        format!("rhs = {}, quadrature status {:?}, note present: {noted}", v.rhs, r.status),
    )
}

fn power_constant() -> Check {
    let mut claimed = Vec::new();
    let mut outside = Vec::new();
    for n in [2u32, 3, 4] {
        for p in [1.1, 1.5, 2.0, 3.0] {
            let c = cor23_constant(n, p);
            if p < n as f64 {
                claimed.push((n, p, c));
            } else {
                outside.push(format!("n={n} p={p}: {c:.6} {}", if c < 0.5 { "< 1/2" } else { ">= 1/2" }));
            }
        }
    }
    let bad: Vec<_> = claimed.iter().filter(|(_, _, c)| *c >= 0.5).collect();
    ensure(
        bad.is_empty(),
        format!(
            "{} cases with p < n all below 1/2 (max {:.6}); p >= n: {}",
            claimed.len(),
            claimed.iter().map(|c| c.2).fold(0.0, f64::max),
            outside.join("; ")
        ),
    )
}

fn specializations() -> Check {
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    for (f, a, b, h) in [("x^3", 0.0, 2.0, "t^s:0.5"), ("exp(x)", -1.0, 1.0, "t"), ("sin(x)", 0.0, 3.0, "shifted:1:2")] {
        let h: HSpec = h.parse().map_err(|e: ostrowski_bounds::hclass::HSpecError| e.to_string())?;
        for q in [1.0, 1.5, 2.0, 4.0] {
            let inst = ProblemInstance::parse(f, a, b, a, h.clone())
                .and_then(|i| i.with_estimated_m())
                .and_then(|i| i.with_q(q))
                .map_err(|e| e.to_string())?;
            let m = inst.m.map(|m| m.value()).unwrap_or_default();
            let engine = BoundEngine::new(inst);
            let (integral, _) = engine.pair_integral().map_err(|e| e.to_string())?;
            let mid = engine.thm4_at(0.5 * (a + b)).map_err(|e| e.to_string())?.rhs;
            worst = worst.max(rel(mid, thm4_midpoint_form(m, a, b, q, integral)));
            for x in [a, b] {
                let end = engine.thm4_at(x).map_err(|e| e.to_string())?.rhs;
                worst = worst.max(rel(end, thm4_endpoint_form(m, a, b, q, integral)));
            }
        }
    }
    let mut worst5 = 0.0f64;
    for (f, a, b) in [("(2/3)*x^(3/2)", 1.0, 2.0), ("ln(x+1)", 0.0, 1.0), ("x^4", 0.5, 2.0)] {
        for p in [1.5, 2.0, 3.0] {
            let inst = ProblemInstance::parse(f, a, b, a, HSpec::identity())
                .and_then(|i| i.with_p(p))
                .map_err(|e| e.to_string())?;
            let direct = midpoint_concave_bound(&inst.f_prime, a, b, p).map_err(|e| e.to_string())?;
            let v = BoundEngine::new(inst).thm5_at(0.5 * (a + b)).map_err(|e| e.to_string())?.rhs;
            worst5 = worst5.max(rel(v, direct));
        }
    }
    ensure(
        worst <= 1e-12 && worst5 <= 1e-12,
        format!("power-mean max relative gap {worst:.2e}, concave midpoint max relative gap {worst5:.2e}"),
    )
}

fn audit_report() -> Check {
    let out = Command::new(env!("CARGO_BIN_EXE_ostrowski"))
        .args(["audit"])
        .output()
        .map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let audits = v["audits"].as_array().ok_or("no audits array")?;
    let mut seen = Vec::new();
    for a in audits {
        let sides = ["lhs", "lhsAsPrinted", "rhsAsPrinted", "rhsFromTheorem"]
            .iter()
            .all(|k| a[*k].as_f64().is_some());
        let verdicts = ["verdictPrinted", "verdictDerived"]
            .iter()
            .all(|k| matches!(a[*k].as_str(), Some("holds" | "violated")));
        if !(sides && verdicts) {
            return Err(format!("{} lacks sides or verdicts", a["proposition"]));
        }
        seen.push(a["proposition"].as_str().unwrap_or("?").to_owned());
    }
    let p3 = audits.iter().find(|a| a["proposition"] == "P3").ok_or("no P3 audit")?;
    let concave = p3["preconditions"]
        .as_array()
        .and_then(|ps| ps.iter().find(|p| p["property"] == "hConcave"))
        .ok_or("P3 has no h-concavity verdict")?;
    let text = String::from_utf8_lossy(&out.stdout).to_lowercase();
    let asserts_correct = text.contains("correct");
    ensure(
        seen == ["P1", "P2", "P3"] && concave["verdict"] == "violated" && !asserts_correct,
        format!("audits {seen:?}, h-concavity of |f'|^q: {}", concave["verdict"]),
    )
}

/// Everything the suite reports, serialized.
fn full_suite_json(seed: u64) -> Result<String, String> {
    let mut parts = Vec::new();
    let mut s = Scenario::new("x^2", 0.0, 1.0, "t");
    s.m = Some(2.0);
    s.seed = seed;
    s.bounds = vec![BoundId::Classical, BoundId::Thm2, BoundId::Hadamard];
    s.x = XPolicy::Grid(11);
    parts.push(run_sweep(&s).and_then(|r| r.to_json()).map_err(|e| e.to_string())?);

    let mut s = Scenario::new("(2/3)*x^(3/2)", 1.0, 2.0, "t");
    s.p = Some(2.0);
    s.seed = seed;
    s.x = XPolicy::Grid(21);
    parts.push(run_sweep(&s).and_then(|r| r.to_json()).map_err(|e| e.to_string())?);

    let mut s = Scenario::new("x^2", 0.0, 1.0, "1/t");
    s.m = Some(2.0);
    s.seed = seed;
    s.bounds = vec![BoundId::Thm2];
    parts.push(run_sweep(&s).and_then(|r| r.to_json()).map_err(|e| e.to_string())?);

    let mut s = Scenario::new("x", 0.0, 1.0, "t^n:2");
    s.n = Some(2);
    s.p = Some(2.0);
    s.m = Some(1.0);
    s.seed = seed;
    s.budget = 2000;
    parts.push(run_falsify(&s, BoundId::Cor23).and_then(|r| r.to_json()).map_err(|e| e.to_string())?);

    let mut s = Scenario::new("exp(x)", 0.0, 1.0, "t^s");
    s.s = Some(0.5);
    s.p = Some(2.0);
    s.seed = seed;
    s.budget = 256;
    s.check_budget = 300;
    s.ranges.b = Some(ostrowski_bounds::harness::ParamRange { lo: 0.5, hi: 2.0 });
    s.ranges.s = Some(ostrowski_bounds::harness::ParamRange { lo: 0.2, hi: 1.0 });
    parts.push(run_falsify(&s, BoundId::Thm3).and_then(|r| r.to_json()).map_err(|e| e.to_string())?);

    let sampling = Sampling::new(1000, seed);
    let audits = [
        audit_prop1(1.0, 2.0, 2, 0.5, sampling),
        audit_prop2(1.0, 2.0, 0.5, 2.0, 2, sampling),
        audit_prop3(1.0, 2.0, 2.0, sampling),
    ];
    for a in audits {
        let a = a.map_err(|e| e.to_string())?;
        parts.push(serde_json::to_string(&a).map_err(|e| e.to_string())?);
    }
    Ok(parts.join("\n"))
}

fn determinism() -> Check {
    let first = full_suite_json(42)?;
    let second = full_suite_json(42)?;
    let cli = |_: ()| -> Result<Vec<u8>, String> {
        Command::new(env!("CARGO_BIN_EXE_ostrowski"))
            .args(["sweep", "--f", "exp(x)", "--a", "0", "--b", "1", "--h", "t^s:0.5", "--p", "2", "--x", "grid:7"])
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    let (c1, c2) = (cli(())?, cli(())?);
    ensure(
        first == second && c1 == c2 && !first.is_empty(),
        format!("{} bytes of suite JSON and {} bytes of CLI JSON identical across runs", first.len(), c1.len()),
    )
}

fn main() {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Check); 9] = [
        ("identity-h reduction to the classical bound", identity_reduction),
        ("closed forms against quadrature", closed_forms),
        ("montgomery identity residual", montgomery),
        ("inequality suite over the certified catalog", inequality_suite),
        ("divergent right-hand side", divergence),
        ("power-h constant below one half", power_constant),
        ("specialization identities", specializations),
        ("audit report sides and verdicts", audit_report),
        ("byte-identical reports for a fixed seed", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[{:>2}] PASS {name}: {detail} ({secs:.2} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[{:>2}] FAIL {name}: {detail} ({secs:.2} s)", i + 1);
            }
        }
    }
    let total = start.elapsed();
    if total < Duration::from_secs(60) {
        println!("[10] PASS full suite within budget: {:.2} s of 60 s", total.as_secs_f64());
    } else {
        failed += 1;
        println!("[10] FAIL full suite within budget: {:.2} s of 60 s", total.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
