use mdiqkd::channel::{gain_qber, single_photon_stats, Basis};
use mdiqkd::estimation::FluctuationConfig;
use mdiqkd::runner::{self, output, simulate_observed, Mode, Scenario};

#[test]
fn counts_round_trip_is_exact() {
    let mut s = Scenario::vacuum_two_weak();
    s.mode = Mode::Sampled;
    s.seed = 11;
    let obs = simulate_observed(&s.channel_params().unwrap(), &s.protocol, s.mode, s.seed, 0).unwrap();
    let mut buf = Vec::new();
    runner::write_counts(&obs, &mut buf).unwrap();
    let back = runner::read_counts(buf.as_slice()).unwrap();
    assert_eq!(back, obs);
    for (a, b) in obs.iter().zip(back.iter()) {
        assert_eq!(a.gain.to_bits(), b.gain.to_bits());
        assert_eq!(a.qber.to_bits(), b.qber.to_bits());
    }
}

#[test]
fn analytic_stats_written_as_rounded_counts() {
    let s = Scenario::vacuum_weak();
    let obs = simulate_observed(&s.channel_params().unwrap(), &s.protocol, s.mode, 0, 0).unwrap();
    let mut buf = Vec::new();
    runner::write_counts(&obs, &mut buf).unwrap();
    let back = runner::read_counts(buf.as_slice()).unwrap();
    for (a, b) in obs.iter().zip(back.iter()) {
        assert!((a.gain - b.gain).abs() <= 0.5 / a.pulses as f64);
    }
}

#[test]
fn sampled_mode_is_reproducible() {
    let mut s = Scenario::vacuum_weak();
    s.mode = Mode::Sampled;
    s.seed = 99;
    let p = s.channel_params().unwrap();
    let a = simulate_observed(&p, &s.protocol, s.mode, s.seed, 3).unwrap();
    let b = simulate_observed(&p, &s.protocol, s.mode, s.seed, 3).unwrap();
    assert_eq!(a, b);
    let other_point = simulate_observed(&p, &s.protocol, s.mode, s.seed, 4).unwrap();
    let other_seed = simulate_observed(&p, &s.protocol, s.mode, 100, 3).unwrap();
    assert_ne!(a, other_point);
    assert_ne!(a, other_seed);
}

// Binomial concentration: at N = 1e12 pulses per cell every sampled gain
// and QBER sits within 3 standard deviations of its expectation.
#[test]
fn sampled_rates_converge() {
    let mut s = Scenario::vacuum_weak();
    s.mode = Mode::Sampled;
    s.protocol.n_data = 2e12;
    let p = s.channel_params().unwrap();
    let obs = simulate_observed(&p, &s.protocol, s.mode, s.seed, 0).unwrap();
    for o in obs.iter() {
        let want = gain_qber(&p, o.basis, o.mu, o.nu).unwrap();
        let n = o.pulses as f64;
        let sd_gain = (want.gain * (1.0 - want.gain) / n).sqrt();
        assert!((o.gain - want.gain).abs() <= 3.0 * sd_gain, "{o:?}");
        let successes = n * want.gain;
        let sd_qber = (want.qber * (1.0 - want.qber) / successes).sqrt();
        assert!((o.qber - want.qber).abs() <= 3.0 * sd_qber + 3.0 * sd_gain / want.gain, "{o:?}");
    }
}

#[test]
fn rates_order_by_confidence() {
    for base in [Scenario::vacuum_weak(), Scenario::vacuum_two_weak()] {
        let mut prev = f64::INFINITY;
        for n_alpha in [0.0, 1.0, 3.0, 5.0, 7.0] {
            let mut s = base.clone();
            s.estimation.n_alpha = n_alpha;
            let r = runner::run_point(&s).unwrap();
            assert!(r.finite.rate <= prev);
            assert!(r.finite.rate <= r.asymptotic.unwrap().rate);
            prev = r.finite.rate;
        }
    }
}

#[test]
fn sweep_envelope_and_order() {
    let s = Scenario::vacuum_two_weak();
    let grid: Vec<f64> = (0..30).map(|i| 70.0 - 2.0 * i as f64).collect();
    let pts = runner::run_sweep(&s, &grid).unwrap();
    for (i, p) in pts.iter().enumerate() {
        assert_eq!(p.index, i);
        assert_eq!(p.loss_db, grid[i]);
        assert!(p.error.is_none(), "{:?}", p.error);
        assert!((-10.0 * (p.eta_a * p.eta_b).log10() - p.loss_db).abs() < 1e-9);
        assert!(p.rate_asymptotic >= p.rate_nalpha0 && p.rate_nalpha0 >= p.rate_finite);
    }
    // Independent of how rayon scheduled the work.
    let single = runner::run_sweep(&s, &grid[7..8]).unwrap();
    assert_eq!(single[0].rate_finite.to_bits(), pts[7].rate_finite.to_bits());
}

// Every analytic point from 0 to 80 dB estimates without error and brackets
// the true single-photon yield, for several confidence levels.
#[test]
fn analytic_estimation_never_fails() {
    for base in [Scenario::vacuum_weak(), Scenario::vacuum_two_weak()] {
        for n_alpha in [0.0, 3.0, 5.0, 7.0] {
            let mut s = base.clone();
            s.estimation = FluctuationConfig::default().with_n_alpha(n_alpha);
            let grid: Vec<f64> = (0..=80).map(|i| i as f64).collect();
            for p in runner::run_sweep(&s, &grid).unwrap() {
                assert!(p.error.is_none(), "{} dB, n_alpha {n_alpha}: {:?}", p.loss_db, p.error);
                let truth = single_photon_stats(&s.channel_at_loss(p.loss_db).unwrap()).unwrap();
                let b = p.bounds.unwrap();
                assert!(b.y11_z_lower <= truth.y11 * (1.0 + 1e-9) && truth.y11 <= b.y11_z_upper * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn point_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let report = runner::run_point(&Scenario::vacuum_weak()).unwrap();
    output::write_point(&report, dir.path()).unwrap();
    let gains = std::fs::read_to_string(dir.path().join("gains.csv")).unwrap();
    assert_eq!(gains.lines().count(), 1 + 18);
    assert!(gains.starts_with("basis,k,l,mu,nu,pulses,gain\n"));
    let bounds = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let y11_row = bounds.lines().find(|l| l.starts_with("y11_z,")).unwrap();
    let lower: f64 = y11_row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(lower.to_bits(), report.bounds.y11_z_lower.to_bits());
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("6.887952e-5"), "{text}");
    let z_signal = report.observed.get(Basis::Z, 2, 2).unwrap();
    assert_eq!(z_signal.gain, report.gain_z);
}

#[test]
fn sweep_csv_parses_back_exactly() {
    let s = Scenario::vacuum_weak();
    let pts = runner::run_sweep(&s, &[0.0, 13.0, 27.5, 40.0]).unwrap();
    let bytes = output::sweep_csv(&pts).unwrap();
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), output::SWEEP_HEADER);
    for (rec, p) in rdr.records().zip(&pts) {
        let rec = rec.unwrap();
        let vals: Vec<f64> = rec.iter().map(|v| v.parse().unwrap()).collect();
        let want = [p.loss_db, p.eta_a, p.eta_b, p.rate_asymptotic, p.rate_nalpha0, p.rate_finite, p.y11_z_lower(), p.e11_x_upper()];
        for (v, w) in vals.iter().zip(want) {
            assert_eq!(v.to_bits(), w.to_bits());
        }
    }
}
