//! The `verify` subcommand: runs the executable property suite on fixed
//! fixtures and reports one pass/fail line per check.

use actgen_core::cpe::{CpeArch, CpeModel};
use actgen_core::genmodel::{Family, SearchDist};
use actgen_core::rng::Stream;
use actgen_core::verification::{
    check_gradient_negative_control, check_gradient_unbiasedness, check_hits_gap,
    check_posterior_recovery, check_variance_rate, CheckReport, TinyDomainFixture,
};

pub struct SuiteOutcome {
    pub reports: Vec<CheckReport>,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Run every check at its reference scale. Deterministic for a fixed seed.
pub fn run_suite(seed: u64) -> Result<SuiteOutcome, actgen_core::Error> {
    let rng = Stream::new(seed).derive(b"verify");
    let mut reports = Vec::new();

    // Score-gradient unbiasedness on an enumerable fixture.
    {
        let mut r = rng.derive(b"grad");
        let fixture = TinyDomainFixture::random(2, 3, 0.1, &mut r)?;
        let mut q = SearchDist::uniform(Family::MeanField, 3, 2);
        for p in q.params_mut() {
            *p = 0.4 * r.normal();
        }
        reports.push(check_gradient_unbiasedness(&fixture, &q, 200_000, 20, &mut r)?);
        reports.push(check_gradient_negative_control(&fixture, &q, 200_000, 20, &mut r)?);
    }

    // Posterior recovery with an identifiable (additive) target.
    {
        let mut r = rng.derive(b"recovery");
        let (len, vocab) = (4usize, 3usize);
        let weights: Vec<f64> = (0..len * vocab).map(|_| 1.5 * r.normal()).collect();
        let model = CpeModel::with_weights(CpeArch::Additive, len, vocab, 1e-6, weights)?;
        reports.push(check_posterior_recovery(&model, 3000, 1e-2, &mut r)?);
    }

    // GP posterior variance rate under persistent sampling.
    {
        let mut r = rng.derive(b"variance");
        let fixture = TinyDomainFixture::two_level(2, 4, 1, 0.15)?;
        let out = check_variance_rate(&fixture, 500, 200, &mut r)?;
        reports.push(out.report);
    }

    // Hits gap between the learned sampler and the informed oracle.
    {
        let mut r = rng.derive(b"hits");
        let fixture = TinyDomainFixture::two_level(2, 5, 8, 0.4)?;
        let out = check_hits_gap(&fixture, 0.5, 64, 24, 1.8, &mut r)?;
        reports.push(out.report);
    }

    Ok(SuiteOutcome { reports })
}

pub fn print_reports(outcome: &SuiteOutcome) {
    for r in &outcome.reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {}: {}", r.name, r.detail);
    }
}
