use ptcure::*;
use std::time::Instant;

fn main() {
    let mut cfg = SimConfig::new(100, 5, 2024);
    cfg.structure = CorrelationFamily::Exchangeable;
    cfg.tau_corr = 0.4;
    cfg.eta_corr = 0.8;
    cfg.nu = 0.270186;

    // timing breakdown
    let t0 = Instant::now();
    cfg.seed = 1022;
    let (ds, _) = generate_dataset(&cfg).unwrap();
    println!("generate: {:?}", t0.elapsed());
    for (m, f) in [
        (Method::Npm, CorrelationFamily::Independence),
        (Method::Gee, CorrelationFamily::Exchangeable),
        (Method::Qif, CorrelationFamily::Exchangeable),
    ] {
        let t = Instant::now();
        let r = fit(&ds, &FitConfig::new(m, f)).unwrap();
        println!("{m}:{f} fit: {:?} (converged={}, outer={})", t.elapsed(), r.converged, r.iterations);
    }

    // failing reps in detail
    for rep in [1022u64, 1027] {
        cfg.seed = rep;
        let (ds, _) = generate_dataset(&cfg).unwrap();
        for f in [CorrelationFamily::Exchangeable, CorrelationFamily::Ar1] {
            match fit(&ds, &FitConfig::new(Method::Qif, f)) {
                Ok(r) => {
                    println!("seed {rep} qif:{f}: conv={} iters={} |U|={:.2e} beta={:?}", r.converged, r.iterations, r.score_norm, r.beta_hat);
                    for d in r.diagnostics.iter().take(6) { println!("   {d}"); }
                }
                Err(e) => println!("seed {rep} qif:{f}: ERR {e}"),
            }
        }
    }
}
