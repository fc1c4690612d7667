//! CSV tables and the plain-text report. Every float is written with 17
//! significant digits (`{:.16e}`), which round-trips an `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::channel::Basis;
use crate::error::Result;
use crate::estimation::ObservedStats;

use super::{sweep_cutoffs, Cutoff, KeyRateReport, SweepPoint};

pub const SWEEP_HEADER: [&str; 8] =
    ["loss_db", "eta_a", "eta_b", "rate_asymptotic", "rate_nalpha0", "rate_finite", "y11_z_lower", "e11_x_upper"];

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    Ok(wtr.into_inner().map_err(|e| e.into_error())?)
}

fn cell_prefix(basis: Basis, k: usize, l: usize, mu: f64, nu: f64) -> Vec<String> {
    vec![basis.to_string(), k.to_string(), l.to_string(), num(mu), num(nu)]
}

pub fn gains_csv(obs: &ObservedStats) -> Result<Vec<u8>> {
    csv_bytes(
        &["basis", "k", "l", "mu", "nu", "pulses", "gain"],
        obs.iter().map(|o| {
            let mut row = cell_prefix(o.basis, o.k, o.l, o.mu, o.nu);
            row.extend([o.pulses.to_string(), num(o.gain)]);
            row
        }),
    )
}

pub fn qbers_csv(obs: &ObservedStats) -> Result<Vec<u8>> {
    csv_bytes(
        &["basis", "k", "l", "mu", "nu", "qber"],
        obs.iter().map(|o| {
            let mut row = cell_prefix(o.basis, o.k, o.l, o.mu, o.nu);
            row.push(num(o.qber));
            row
        }),
    )
}

/// Rows `quantity,lower,upper,asymptotic`; the asymptotic column is empty
/// when the channel is unknown.
pub fn bounds_csv(report: &KeyRateReport) -> Result<Vec<u8>> {
    let b = &report.bounds;
    let t = report.truth;
    let truth = |f: fn(&crate::channel::SinglePhotonStats) -> f64| t.as_ref().map_or(String::new(), |t| num(f(t)));
    let rows = vec![
        vec!["y11_z".into(), num(b.y11_z_lower), num(b.y11_z_upper), truth(|t| t.y11)],
        vec!["y11_x".into(), num(b.y11_x_lower), num(b.y11_x_upper), truth(|t| t.y11)],
        vec!["ey11_z".into(), num(b.ey11_z_lower), num(b.ey11_z_upper), truth(|t| t.e11_z * t.y11)],
        vec!["ey11_x".into(), num(b.ey11_x_lower), num(b.ey11_x_upper), truth(|t| t.e11_x * t.y11)],
        vec!["e11_z".into(), num(b.e11_z_lower), num(b.e11_z_upper), truth(|t| t.e11_z)],
        vec!["e11_x".into(), num(b.e11_x_lower), num(b.e11_x_upper), truth(|t| t.e11_x)],
    ];
    csv_bytes(&["quantity", "lower", "upper", "asymptotic"], rows)
}

pub fn sweep_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    csv_bytes(
        &SWEEP_HEADER,
        points.iter().map(|p| {
            [p.loss_db, p.eta_a, p.eta_b, p.rate_asymptotic, p.rate_nalpha0, p.rate_finite, p.y11_z_lower(), p.e11_x_upper()]
                .into_iter()
                .map(num)
                .collect()
        }),
    )
}

pub fn point_report(report: &KeyRateReport) -> String {
    let mut s = String::new();
    let b = &report.bounds;
    let c = &report.config;
    let _ = writeln!(s, "MDI-QKD decoy-state analysis");
    if let Some(ch) = &report.channel {
        let _ = writeln!(s, "channel: eta_a = {}, eta_b = {}, p_d = {}, e_d = {}", ch.eta_a, ch.eta_b, ch.p_d, ch.e_d);
    }
    let _ = writeln!(
        s,
        "estimation: n_alpha = {}, cutoff = {}, rigorous_tail = {}, coupled = {}, zero counts = {:?}",
        c.n_alpha, c.cutoff, c.rigorous_tail, c.coupled, c.zero_count_policy
    );
    let _ = writeln!(s, "failure probability: {:.4e}", report.failure_probability);
    let _ = writeln!(
        s,
        "signal pair: (k, l) = ({}, {}), mu = {}, nu = {}",
        report.signal.0, report.signal.1, report.signal_mu, report.signal_nu
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<8} {:>14} {:>14} {:>14}", "", "lower", "upper", "asymptotic");
    let truth = report.truth;
    let rows: [(&str, f64, f64, Option<f64>); 4] = [
        ("Y11 z", b.y11_z_lower, b.y11_z_upper, truth.map(|t| t.y11)),
        ("Y11 x", b.y11_x_lower, b.y11_x_upper, truth.map(|t| t.y11)),
        ("e11 z", b.e11_z_lower, b.e11_z_upper, truth.map(|t| t.e11_z)),
        ("e11 x", b.e11_x_lower, b.e11_x_upper, truth.map(|t| t.e11_x)),
    ];
    for (name, lo, hi, t) in rows {
        let t = t.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(s, "{name:<8} {lo:>14.6e} {hi:>14.6e} {t:>14}");
    }
    if b.vacuous {
        let _ = writeln!(s, "warning: bounds are vacuous (too few decoy intensities or e11 upper bound undefined)");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "signal z gain: {:.6e}, QBER: {:.6e}, f_ec = {}", report.gain_z, report.qber_z, report.f_ec);
    let _ = writeln!(s, "q11 z lower: {:.6e}", report.q11_z_lower);
    let _ = writeln!(s, "error-correction cost: {:.6e}", report.finite.ec_cost);
    let _ = writeln!(s, "key rate (per signal-pair z pulse): {:.6e}  raw {:.6e}", report.finite.rate, report.finite.raw);
    if report.finite.privacy_saturated {
        let _ = writeln!(s, "warning: phase-error bound reached 1/2, no privacy-amplified key");
    }
    let _ = writeln!(s, "key rate (per pulse sent, all pairs and bases): {:.6e}", report.rate_per_total_pulse);
    if let Some(a) = report.asymptotic {
        let _ = writeln!(s, "asymptotic key rate: {:.6e}", a.rate);
    }
    s
}

fn cutoff_text(c: Cutoff) -> String {
    match c {
        Cutoff::Within(db) => format!("{db:.2} dB"),
        Cutoff::BeyondGrid => "beyond grid".into(),
        Cutoff::NoKey => "no key on grid".into(),
    }
}

pub fn sweep_report(points: &[SweepPoint], n_alpha: f64) -> String {
    let mut s = String::new();
    let [asym, exact, finite] = sweep_cutoffs(points);
    let _ = writeln!(s, "loss sweep: {} points", points.len());
    let _ = writeln!(s, "positive-rate cutoff, asymptotic: {}", cutoff_text(asym));
    let _ = writeln!(s, "positive-rate cutoff, n_alpha = 0: {}", cutoff_text(exact));
    let _ = writeln!(s, "positive-rate cutoff, n_alpha = {n_alpha}: {}", cutoff_text(finite));
    for p in points.iter().filter(|p| p.error.is_some()) {
        let _ = writeln!(s, "point {} ({} dB) failed: {}", p.index, p.loss_db, p.error.as_deref().unwrap_or(""));
    }
    s
}

/// `gains.csv`, `qbers.csv`, `bounds.csv` and `report.txt` under `dir`.
pub fn write_point(report: &KeyRateReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("gains.csv"), gains_csv(&report.observed)?)?;
    fs::write(dir.join("qbers.csv"), qbers_csv(&report.observed)?)?;
    fs::write(dir.join("bounds.csv"), bounds_csv(report)?)?;
    fs::write(dir.join("report.txt"), point_report(report))?;
    Ok(())
}

/// `sweep.csv` and `report.txt` under `dir`.
pub fn write_sweep(points: &[SweepPoint], n_alpha: f64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(points)?)?;
    fs::write(dir.join("report.txt"), sweep_report(points, n_alpha))?;
    Ok(())
}
