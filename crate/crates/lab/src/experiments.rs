//! The experiments behind each subcommand.

use std::time::Instant;

use rwre_core::dirichlet::WeightVector;
use rwre_core::environment::{EnvironmentView, TransitionRows};
use rwre_core::green::{
    green_derivative_check, green_fourier_origin, green_killed, green_return_bound, green_return_sample,
    green_series_origin, homogeneous_stats, symmetrize_check, GreenReturnEstimate, KilledGreenOperator,
};
use rwre_core::ibp::{catalog_function, ibp_residuals, IbpEstimator, SimplexFunction, CATALOG};
use rwre_core::kalikow::{
    expansion_consistency_1d, expansion_velocity, kalikow_drift, kalikow_sample, prop2_bounds, theorem1_drift_box,
    KalikowAccumulator,
};
use rwre_core::lattice::{make_box, FiniteDomain, Link, Site};
use rwre_core::rng::{derive_seed, open01, CounterRng, StreamTag};
use rwre_core::stats::MeanEstimate;
use rwre_core::walk::{
    annealed_path_logprob, enumerate_paths, exact_velocity_1d, reinforced_path_logprob, run_reinforced,
    theorem1_bounds, Path, VelocityEstimate,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LabError, Result};
use crate::manifest::{ExperimentKind, ExperimentManifest, GreenMode};
use crate::parallel::Pool;
use crate::record::{Metric, Outcome, RunRecord, Table};

/// Tolerance of exact identities (total probability, Green identities).
pub const IDENTITY_TOL: f64 = 1e-10;
/// Closed-form versus sequential path log-probabilities.
pub const DUAL_ROUTE_TOL: f64 = 1e-12;
pub const DUAL_ROUTE_STEPS: usize = 12;
pub const DUAL_ROUTE_PATHS: usize = 1000;
/// Fourier versus series: allowed gap on top of the series tail bound.
pub const SERIES_SLACK: f64 = 1e-8;
pub const DERIVATIVE_TOL: f64 = 1e-6;
pub const LEMMA2_INSTANCES: usize = 50;
pub const CONSISTENCY_TOL: f64 = 1e-12;
pub const CHI_SQUARE_LEVEL: f64 = 0.99;
/// Bins with a smaller expected count are pooled for the chi-square test.
pub const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;
/// Monte Carlo verdicts allow this many standard errors.
pub const K_SIGMA: f64 = 3.0;

fn failed<T>(experiment: &'static str, r: rwre_core::Result<T>) -> Result<T> {
    r.map_err(|source| LabError::ExperimentFailed { experiment, source })
}

/// Runs a manifest and times it.
pub fn run_manifest(manifest: &ExperimentManifest, pool: &Pool) -> Result<(RunRecord, Outcome)> {
    let start = Instant::now();
    let outcome = run_experiment(manifest, pool)?;
    let record = RunRecord::new(manifest, &outcome, start.elapsed().as_secs_f64());
    Ok((record, outcome))
}

pub fn run_experiment(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let invalid = m.check();
    if !invalid.is_empty() {
        return Err(LabError::ManifestInvalid(invalid));
    }
    match m.kind {
        ExperimentKind::Velocity => velocity(m, pool),
        ExperimentKind::Equivalence => equivalence(m, pool),
        ExperimentKind::Green => green(m, pool),
        ExperimentKind::Kalikow => kalikow(m, pool),
        ExperimentKind::Expansion => expansion(m, pool),
        ExperimentKind::Verify => verify(m, pool),
    }
}

fn weights_of(m: &ExperimentManifest) -> WeightVector {
    m.weights().expect("checked manifest has weights")
}

fn fmt_coords(site: &Site) -> String {
    site.coords().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn direction_name(dir: usize, dim: usize) -> String {
    if dir < dim {
        format!("+e{}", dir + 1)
    } else {
        format!("-e{}", dir - dim + 1)
    }
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

// ---------------------------------------------------------------- velocity

pub fn velocity(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let (steps, runs) = (m.steps.unwrap(), m.runs.unwrap());
    if steps == 0 {
        return failed("velocity", Err(rwre_core::Error::InvalidParameter("steps must be positive".into())));
    }
    let mut horizons = m.horizons.clone().unwrap_or_else(|| vec![steps]);
    horizons.retain(|&h| h <= steps);
    let seed = m.seed;
    let runs_out: Vec<(Vec<i64>, Vec<Vec<i64>>)> = pool.map(runs, |r| {
        let mut rng = CounterRng::indexed(seed, StreamTag::Walk, r as u64);
        if m.dump_displacements {
            let path = run_reinforced(&w, steps, &mut rng);
            let sites = path.sites();
            let at = horizons.iter().map(|&h| sites[h].coords().to_vec()).collect();
            (sites[steps].coords().to_vec(), at)
        } else {
            (rwre_core::walk::reinforced_displacement(&w, steps, &mut rng), Vec::new())
        }
    });
    let ends: Vec<Vec<i64>> = runs_out.iter().map(|r| r.0.clone()).collect();
    let est = VelocityEstimate::from_displacements(steps, &ends);

    let mut out = Outcome::default();
    let bounds = theorem1_bounds(&w).ok();
    let mut vs = Vec::new();
    for i in 0..w.dim() {
        let (lo, hi) = bounds.as_ref().map_or((None, None), |b| (Some(b[i].lo), Some(b[i].hi)));
        vs.push(out.metric(
            Metric::value(format!("v_{}", i + 1), est.mean_velocity[i]).with_sigma(est.std_error[i]).with_bounds(lo, hi),
        ));
    }
    if bounds.is_some() {
        out.verdict("theorem1", &vs, K_SIGMA);
    }
    if w.dim() == 1 {
        let exact = failed("velocity", exact_velocity_1d(&w))?;
        out.metric(Metric::value("v_exact", exact));
        let gap = out.metric(
            Metric::value("v_1_minus_exact", est.mean_velocity[0] - exact)
                .with_sigma(est.std_error[0])
                .with_bounds(Some(0.0), Some(0.0)),
        );
        out.verdict("exact_velocity_1d", &[gap], K_SIGMA);
    }
    if m.dump_displacements {
        let mut header = vec!["run".to_string(), "step_horizon".to_string()];
        header.extend(coord_header("x_", w.dim()));
        let mut t = Table { name: "displacements".into(), header, rows: Vec::new() };
        for (r, (_, at)) in runs_out.iter().enumerate() {
            for (h, x) in horizons.iter().zip(at) {
                let mut row = vec![r.to_string(), h.to_string()];
                row.extend(x.iter().map(ToString::to_string));
                t.rows.push(row);
            }
        }
        out.tables.push(t);
    }
    Ok(out)
}

// ------------------------------------------------------------- equivalence

fn path_index(path: &Path, k: usize) -> usize {
    path.directions().iter().fold(0, |acc, &d| acc * k + d as usize)
}

/// Chi-square statistic and degrees of freedom, pooling sparse bins.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < CHI_SQUARE_MIN_EXPECTED {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    (stat, bins.saturating_sub(1))
}

pub fn equivalence(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let (n, runs) = (m.steps.unwrap(), m.runs.unwrap());
    let k = w.directions();
    let paths = enumerate_paths(w.dim(), n);
    let probs: Vec<f64> = paths.iter().map(|p| annealed_path_logprob(&w, p).exp()).collect();
    let total: f64 = probs.iter().sum();

    let block = 4096;
    let blocks = runs.div_ceil(block);
    let seed = m.seed;
    let partial: Vec<Vec<u64>> = pool.map(blocks, |b| {
        let mut counts = vec![0u64; paths.len()];
        for r in b * block..((b + 1) * block).min(runs) {
            let mut rng = CounterRng::indexed(seed, StreamTag::Walk, r as u64);
            counts[path_index(&run_reinforced(&w, n, &mut rng), k)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; paths.len()];
    for c in &partial {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    let (stat, df) = chi_square(&counts, &probs);
    let quantile = ChiSquared::new(df.max(1) as f64).expect("positive dof").inverse_cdf(CHI_SQUARE_LEVEL);

    let count = m.paths.unwrap_or(DUAL_ROUTE_PATHS);
    let gaps = pool.map(count, |i| {
        let mut rng = CounterRng::indexed(seed, StreamTag::Sample, i as u64);
        let dirs = (0..DUAL_ROUTE_STEPS).map(|_| ((open01(&mut rng) * k as f64) as usize).min(k - 1) as u8).collect();
        let p = Path::from_directions(w.dim(), dirs).expect("directions in range");
        (annealed_path_logprob(&w, &p) - reinforced_path_logprob(&w, &p)).abs()
    });
    let worst = gaps.into_iter().fold(0.0, f64::max);

    let mut out = Outcome::default();
    let tp = out.metric(Metric::value("total_probability", total).with_bounds(Some(1.0 - IDENTITY_TOL), Some(1.0 + IDENTITY_TOL)));
    out.verdict("prop1_total_probability", &[tp], 0.0);
    let chi = out.metric(Metric::value("chi_square", stat).with_bounds(None, Some(quantile)));
    out.metric(Metric::value("chi_square_dof", df as f64));
    out.verdict("prop1_chi_square", &[chi], 0.0);
    let dual = out.metric(Metric::value("dual_route_max_gap", worst).with_bounds(None, Some(DUAL_ROUTE_TOL)));
    out.verdict("prop1_dual_route", &[dual], 0.0);

    let mut t = Table::new("paths", &["index", "directions", "probability", "observed"]);
    for (i, (p, (prob, c))) in paths.iter().zip(probs.iter().zip(&counts)).enumerate() {
        let dirs: Vec<String> = p.directions().iter().map(|&d| direction_name(d as usize, w.dim())).collect();
        t.push([i.to_string(), dirs.join(" "), prob.to_string(), c.to_string()]);
    }
    out.tables.push(t);
    Ok(out)
}

// ------------------------------------------------------------------- green

pub fn green(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    match m.mode.expect("checked manifest has a mode") {
        GreenMode::Killed => green_killed_mode(m),
        GreenMode::Fourier => green_fourier_mode(m),
        GreenMode::Series => green_series_mode(m),
        GreenMode::Symmetrize => green_symmetrize_mode(m),
        GreenMode::Lemma2 => green_lemma2_mode(m, pool),
        GreenMode::Lemma3 => green_lemma3_mode(m, pool),
    }
}

fn box_of(m: &ExperimentManifest) -> (FiniteDomain, Site) {
    let z0 = m.anchor_site().expect("checked manifest has dim");
    (make_box(&z0, m.radius.unwrap()), z0)
}

fn green_killed_mode(m: &ExperimentManifest) -> Result<Outcome> {
    let w = weights_of(m);
    let (domain, z0) = box_of(m);
    let delta = m.delta.unwrap();
    let view = EnvironmentView::new(m.seed, w.clone());
    let rows = TransitionRows::from_view(&view, &domain);
    let op = failed("green", KilledGreenOperator::solve(&domain, &rows, delta))?;
    let row = failed("green", green_killed(&rows, &domain, delta, &z0))?;

    let mut out = Outcome::default();
    let res = out.metric(
        Metric::value("return_identity_residual", op.return_identity_residual(&rows)).with_bounds(None, Some(IDENTITY_TOL)),
    );
    out.verdict("green_return_identity", &[res], 0.0);
    let (min_entry, min_diag) = op.min_entry_and_diagonal();
    let pos = out.metric(Metric::value("min_entry", min_entry).with_bounds(Some(0.0), None));
    let diag = out.metric(Metric::value("min_diagonal", min_diag).with_bounds(Some(1.0), None));
    out.verdict("green_positivity", &[pos, diag], 0.0);
    out.metric(Metric::value("green_anchor", op.entry(&z0, &z0)));

    let mut header = coord_header("x_", w.dim());
    header.extend(["boundary".to_string(), "green".to_string()]);
    let mut t = Table { name: "green_row".into(), header, rows: Vec::new() };
    for (site, (g, b)) in domain
        .interior()
        .iter()
        .zip(row.interior.iter().map(|g| (*g, 0)))
        .chain(domain.boundary().iter().zip(row.boundary.iter().map(|g| (*g, 1))))
    {
        let mut r: Vec<String> = site.coords().iter().map(ToString::to_string).collect();
        r.push(b.to_string());
        r.push(g.to_string());
        t.rows.push(r);
    }
    out.tables.push(t);
    Ok(out)
}

fn kernel_metrics(out: &mut Outcome, w: &WeightVector) {
    let k = homogeneous_stats(w);
    out.metric(Metric::value("k_m", k.k_m));
    out.metric(Metric::value("one_minus_k_m", k.one_minus_k));
    out.metric(Metric::value("eta_m", k.eta_m));
}

fn green_fourier_mode(m: &ExperimentManifest) -> Result<Outcome> {
    let w = weights_of(m);
    let mut out = Outcome::default();
    kernel_metrics(&mut out, &w);
    let value = failed("green", green_fourier_origin(&homogeneous_stats(&w)))?;
    if w.dim() == 1 {
        let closed = 1.0 / (w.mean(0) - w.mean(1)).abs();
        let g = out.metric(Metric::value("green_origin", value).with_bounds(Some(closed - IDENTITY_TOL), Some(closed + IDENTITY_TOL)));
        out.verdict("green_closed_form_1d", &[g], 0.0);
    } else {
        out.metric(Metric::value("green_origin", value));
    }
    Ok(out)
}

fn green_series_mode(m: &ExperimentManifest) -> Result<Outcome> {
    let w = weights_of(m);
    let kernel = homogeneous_stats(&w);
    let mut out = Outcome::default();
    kernel_metrics(&mut out, &w);
    let series = failed("green", green_series_origin(&kernel, m.horizon))?;
    let fourier = failed("green", green_fourier_origin(&kernel))?;
    out.metric(Metric::value("green_series", series.value));
    out.metric(Metric::value("series_tail_bound", series.tail_bound));
    out.metric(Metric::value("series_horizon", series.horizon as f64));
    out.metric(Metric::value("green_fourier", fourier));
    let gap = out.metric(
        Metric::value("fourier_series_gap", (fourier - series.value).abs())
            .with_bounds(None, Some(series.tail_bound + SERIES_SLACK)),
    );
    out.verdict("green_fourier_series", &[gap], 0.0);
    Ok(out)
}

fn green_symmetrize_mode(m: &ExperimentManifest) -> Result<Outcome> {
    let w = weights_of(m);
    let (domain, _) = box_of(m);
    let dev = failed("green", symmetrize_check(&homogeneous_stats(&w), m.delta.unwrap(), &domain))?;
    let mut out = Outcome::default();
    let d = out.metric(Metric::value("symmetrization_max_deviation", dev).with_bounds(None, Some(IDENTITY_TOL)));
    out.verdict("green_symmetrization", &[d], 0.0);
    Ok(out)
}

/// One random derivative stencil: `(x1, x2, x3, x4)` with `x3` a neighbour of
/// `x2`; `to_boundary` forces `x3` onto the boundary.
fn random_stencil(domain: &FiniteDomain, rng: &mut CounterRng, to_boundary: bool) -> [Site; 4] {
    let interior = domain.interior();
    let k = 2 * domain.dim();
    let mut pick = |n: usize| ((open01(rng) * n as f64) as usize).min(n - 1);
    let x1 = interior[pick(interior.len())].clone();
    let x4 = interior[pick(interior.len())].clone();
    let (x2, dir) = if to_boundary {
        let edges: Vec<(usize, usize)> = (0..interior.len())
            .flat_map(|i| (0..k).map(move |d| (i, d)))
            .filter(|&(i, d)| matches!(domain.link(i, d), Link::Boundary(_)))
            .collect();
        let (i, d) = edges[pick(edges.len())];
        (interior[i].clone(), d)
    } else {
        let interior_edges: Vec<(usize, usize)> = (0..interior.len())
            .flat_map(|i| (0..k).map(move |d| (i, d)))
            .filter(|&(i, d)| matches!(domain.link(i, d), Link::Interior(_)))
            .collect();
        if interior_edges.is_empty() {
            (interior[0].clone(), 0)
        } else {
            let (i, d) = interior_edges[pick(interior_edges.len())];
            (interior[i].clone(), d)
        }
    };
    let x3 = x2.step(dir);
    [x1, x2, x3, x4]
}

fn green_lemma2_mode(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let (domain, _) = box_of(m);
    let delta = m.delta.unwrap();
    let instances = m.samples.unwrap_or(LEMMA2_INSTANCES);
    let out = lemma2_checks(&w, &domain, delta, instances, m.seed, pool, "")?;
    Ok(out)
}

fn lemma2_checks(
    w: &WeightVector,
    domain: &FiniteDomain,
    delta: f64,
    instances: usize,
    seed: u64,
    pool: &Pool,
    prefix: &str,
) -> Result<Outcome> {
    let results = pool.try_map(instances, |i| {
        let view = EnvironmentView::new(derive_seed(seed, StreamTag::Sample, i as u64), w.clone());
        let rows = TransitionRows::from_view(&view, domain);
        let mut rng = CounterRng::indexed(seed, StreamTag::MonteCarlo, i as u64);
        let [a, b, c, d] = random_stencil(domain, &mut rng, false);
        let inner = green_derivative_check(&rows, domain, delta, &a, &b, &c, &d)?;
        let [a, b, c, d] = random_stencil(domain, &mut rng, true);
        let edge = green_derivative_check(&rows, domain, delta, &a, &b, &c, &d)?;
        Ok((inner.relative_error(), edge.analytic.abs().max(edge.numeric.abs())))
    });
    let results = failed("green", results)?;
    let worst_rel = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_edge = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut out = Outcome::default();
    let rel = out.metric(Metric::value(format!("{prefix}derivative_max_relative_error"), worst_rel).with_bounds(None, Some(DERIVATIVE_TOL)));
    let edge = out.metric(Metric::value(format!("{prefix}boundary_stencil_max_abs"), worst_edge).with_bounds(Some(0.0), Some(0.0)));
    out.verdict(&format!("{prefix}lemma2"), &[rel, edge], 0.0);
    Ok(out)
}

fn green_lemma3_mode(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let (domain, z0) = box_of(m);
    lemma3_check(&w, &domain, &z0, m.samples.unwrap(), m.seed, pool, "")
}

fn lemma3_check(
    w: &WeightVector,
    domain: &FiniteDomain,
    z0: &Site,
    samples: usize,
    seed: u64,
    pool: &Pool,
    prefix: &str,
) -> Result<Outcome> {
    let values = failed("green", pool.try_map(samples, |s| green_return_sample(w, domain, z0, seed, s as u64)))?;
    let est = GreenReturnEstimate::new(MeanEstimate::from_samples(&values), green_return_bound(w, domain, z0));
    let bound = failed("green", est.bound())?;
    let mut out = Outcome::default();
    out.metric(Metric::value(format!("{prefix}steps_to_boundary"), bound.steps_to_boundary as f64));
    let g = out.metric(
        Metric::value(format!("{prefix}mean_green_return"), est.estimate.mean)
            .with_sigma(est.estimate.std_error)
            .with_bounds(None, Some(bound.value)),
    );
    out.verdict(&format!("{prefix}lemma3"), &[g], K_SIGMA);
    Ok(out)
}

// ----------------------------------------------------------------- kalikow

/// Estimates the auxiliary kernel with environment samples spread over the
/// pool and accumulated in sample order.
pub fn kalikow_estimate(
    w: &WeightVector,
    domain: &FiniteDomain,
    delta: f64,
    z0: &Site,
    samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<rwre_core::kalikow::AuxiliaryKernel> {
    if samples < 2 {
        return failed("kalikow", Err(rwre_core::Error::InvalidParameter("at least two environment samples are needed".into())));
    }
    let mut acc = failed("kalikow", KalikowAccumulator::new(domain, delta, z0))?;
    failed(
        "kalikow",
        pool.fold_chunks(samples, |s| kalikow_sample(w, domain, delta, z0, seed, s as u64), |sample| acc.push(&sample)),
    )?;
    Ok(acc.finish())
}

fn kalikow_report(
    w: &WeightVector,
    domain: &FiniteDomain,
    delta: f64,
    z0: &Site,
    samples: usize,
    seed: u64,
    pool: &Pool,
    prefix: &str,
) -> Result<Outcome> {
    let kernel = kalikow_estimate(w, domain, delta, z0, samples, seed, pool)?;
    let bounds = failed("kalikow", prop2_bounds(w))?;
    let dim = w.dim();
    let mut out = Outcome::default();
    let mut header = coord_header("x_", dim);
    header.extend(["direction", "value", "sigma", "bound_low", "bound_high", "vacuous"].map(String::from));
    let mut t = Table { name: format!("{prefix}kernel"), header, rows: Vec::new() };
    let mut cited = Vec::new();
    for (i, site) in domain.interior().iter().enumerate() {
        for (dir, (e, b)) in kernel.row(i).iter().zip(&bounds).enumerate() {
            let name = format!("{prefix}w[{}][{}]", fmt_coords(site), direction_name(dir, dim));
            cited.push(out.metric(
                Metric::value(name, e.value)
                    .with_sigma(e.std_error)
                    .with_bounds(Some(b.interval.lo), Some(b.interval.hi)),
            ));
            let mut row: Vec<String> = site.coords().iter().map(ToString::to_string).collect();
            row.extend([
                direction_name(dir, dim),
                e.value.to_string(),
                e.std_error.to_string(),
                b.interval.lo.to_string(),
                b.interval.hi.to_string(),
                b.vacuous.to_string(),
            ]);
            t.rows.push(row);
        }
    }
    out.verdict(&format!("{prefix}prop2"), &cited, K_SIGMA);
    out.tables.push(t);

    if let Ok(boxed) = theorem1_drift_box(w) {
        let drift = failed("kalikow", kalikow_drift(&kernel, z0))?;
        let mut drifts = Vec::new();
        for (i, iv) in boxed.intervals.iter().enumerate() {
            drifts.push(out.metric(
                Metric::value(format!("{prefix}drift_{}", i + 1), drift.drift[i])
                    .with_sigma(drift.std_error[i])
                    .with_bounds(Some(iv.lo), Some(iv.hi)),
            ));
        }
        out.metric(Metric::value(format!("{prefix}drift_box_excludes_zero"), if boxed.excludes_zero { 1.0 } else { 0.0 }));
        out.verdict(&format!("{prefix}theorem1"), &drifts, K_SIGMA);
    }
    Ok(out)
}

pub fn kalikow(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let domain = make_box(&Site::origin(w.dim()), m.radius.unwrap());
    let z0 = m.anchor_site().unwrap();
    kalikow_report(&w, &domain, m.delta.unwrap(), &z0, m.samples.unwrap(), m.seed, pool, "")
}

// --------------------------------------------------------------- expansion

pub fn expansion(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let w = weights_of(m);
    let report = failed("expansion", expansion_velocity(&w))?;
    let mut out = Outcome::default();
    out.metric(Metric::value("gamma", report.gamma));
    out.metric(Metric::value("k_m", report.k_m));
    out.metric(Metric::value("eta_m", report.eta_m));
    out.metric(Metric::value("green_origin", report.green_origin));
    for (i, (d, c)) in report.d_m.iter().zip(&report.expansion).enumerate() {
        out.metric(Metric::value(format!("d_m_{}", i + 1), *d));
        out.metric(Metric::value(format!("center_{}", i + 1), *c));
    }
    let small = out.metric(Metric::value("smallness", report.smallness).with_bounds(None, Some(1.0)));
    if report.error_bound.is_finite() {
        out.metric(Metric::value("error_bound", report.error_bound));
    }

    if w.dim() == 1 {
        if let Ok(gap) = expansion_consistency_1d(&w) {
            let g = out.metric(Metric::value("consistency_1d", gap).with_bounds(None, Some(CONSISTENCY_TOL)));
            out.verdict("prop3_exact_1d", &[g], 0.0);
        }
    }

    if let (Some(steps), Some(runs)) = (m.steps, m.runs) {
        let est = velocity_estimate(&w, steps, runs, m.seed, pool)?;
        let mut cited = vec![small];
        for i in 0..w.dim() {
            out.metric(Metric::value(format!("v_{}", i + 1), est.mean_velocity[i]).with_sigma(est.std_error[i]));
            cited.push(out.metric(
                Metric::value(format!("prop3_gap_{}", i + 1), (est.mean_velocity[i] - report.expansion[i]).abs())
                    .with_sigma(est.std_error[i])
                    .with_bounds(None, Some(report.error_bound)),
            ));
        }
        if !report.precondition_ok {
            cited.push(Metric::value("theorem1_condition", 0.0).with_bounds(Some(1.0), None));
            out.metrics.push(cited.last().unwrap().clone());
        }
        out.verdict("prop3", &cited, K_SIGMA);
    }
    Ok(out)
}

/// Parallel velocity estimate, aggregated in run order.
pub fn velocity_estimate(w: &WeightVector, steps: usize, runs: usize, seed: u64, pool: &Pool) -> Result<VelocityEstimate> {
    if steps == 0 || runs == 0 {
        return failed("velocity", Err(rwre_core::Error::InvalidParameter("steps and runs must be positive".into())));
    }
    let ends = pool.map(runs, |r| rwre_core::walk::run_displacement(w, steps, seed, r as u64));
    Ok(VelocityEstimate::from_displacements(steps, &ends))
}

// ------------------------------------------------------------------ verify

/// Random weights with entries uniform in `[lo, hi)`.
pub fn random_weights(rng: &mut CounterRng, dim: usize, lo: f64, hi: f64) -> WeightVector {
    let alphas = (0..2 * dim).map(|_| lo + (hi - lo) * open01(rng)).collect();
    WeightVector::new(dim, alphas).expect("positive weights")
}

/// Reduced-size versions of every check, as one record.
pub fn verify(m: &ExperimentManifest, pool: &Pool) -> Result<Outcome> {
    let seed = m.seed;
    let mut rng = CounterRng::indexed(seed, StreamTag::Environment, u64::MAX);
    let mut out = Outcome::default();

    // Integration by parts, exact rule then Monte Carlo.
    let nodes = m.nodes.unwrap_or(8);
    let draws = m.draws.unwrap_or(100_000);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let w = random_weights(&mut rng, 1, 0.5, 5.0);
        let polys: Vec<_> = CATALOG.iter().map(|n| catalog_function(n, 2).unwrap()).collect();
        let fs: Vec<&dyn SimplexFunction> = polys.iter().map(|p| p as &dyn SimplexFunction).collect();
        for dir in 0..2 {
            for r in failed("verify", ibp_residuals(&w, &fs, dir, IbpEstimator::Quadrature { nodes }))? {
                worst = worst.max(r.residual.abs());
            }
        }
    }
    let q = out.metric(Metric::value("ibp_quadrature_max_residual", worst).with_bounds(None, Some(IDENTITY_TOL)));
    out.verdict("lemma1_quadrature", &[q], 0.0);
    let w = random_weights(&mut rng, 2, 0.5, 5.0);
    let polys: Vec<_> = CATALOG.iter().map(|n| catalog_function(n, 4).unwrap()).collect();
    let fs: Vec<&dyn SimplexFunction> = polys.iter().map(|p| p as &dyn SimplexFunction).collect();
    let reports = failed("verify", ibp_residuals(&w, &fs, 0, IbpEstimator::MonteCarlo { draws, seed }))?;
    let cited: Vec<Metric> = CATALOG
        .iter()
        .zip(&reports)
        .map(|(name, r)| {
            out.metric(
                Metric::value(format!("ibp_mc_residual[{name}]"), r.residual)
                    .with_sigma(r.std_error.unwrap_or(0.0))
                    .with_bounds(Some(0.0), Some(0.0)),
            )
        })
        .collect();
    out.verdict("lemma1_monte_carlo", &cited, K_SIGMA);

    // Green identities on random environments.
    let mut worst_identity: f64 = 0.0;
    for i in 0..6u64 {
        let dim = 1 + (i % 2) as usize;
        let w = random_weights(&mut rng, dim, 0.5, 5.0);
        let domain = make_box(&Site::origin(dim), 2);
        let rows = TransitionRows::from_view(&EnvironmentView::new(derive_seed(seed, StreamTag::Sample, i), w), &domain);
        for delta in [0.5, 0.9, 1.0] {
            let op = failed("verify", KilledGreenOperator::solve(&domain, &rows, delta))?;
            worst_identity = worst_identity.max(op.return_identity_residual(&rows));
        }
    }
    let gi = out.metric(Metric::value("green_return_identity_max", worst_identity).with_bounds(None, Some(IDENTITY_TOL)));
    out.verdict("green_return_identity", &[gi], 0.0);

    // Fourier against series and the closed form.
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..5 {
        let dim = 1 + i % 3;
        let w = loop {
            let w = random_weights(&mut rng, dim, 0.5, 5.0);
            if homogeneous_stats(&w).k_m <= 0.95 {
                break w;
            }
        };
        let kernel = homogeneous_stats(&w);
        let s = failed("verify", green_series_origin(&kernel, None))?;
        let f = failed("verify", green_fourier_origin(&kernel))?;
        worst_excess = worst_excess.max((f - s.value).abs() - s.tail_bound);
    }
    let fs_gap = out.metric(Metric::value("fourier_series_excess_over_tail", worst_excess).with_bounds(None, Some(SERIES_SLACK)));
    let w1 = WeightVector::new(1, vec![3.0, 1.0]).unwrap();
    let g1 = failed("verify", green_fourier_origin(&homogeneous_stats(&w1)))?;
    let cf = out.metric(Metric::value("fourier_closed_form_1d", g1).with_bounds(Some(2.0 - IDENTITY_TOL), Some(2.0 + IDENTITY_TOL)));
    out.verdict("green_fourier", &[fs_gap, cf], 0.0);

    // Symmetrization.
    let mut worst_sym: f64 = 0.0;
    for dim in [1, 2] {
        let w = random_weights(&mut rng, dim, 0.5, 5.0);
        for delta in [0.8, 0.9] {
            let dev = failed("verify", symmetrize_check(&homogeneous_stats(&w), delta, &make_box(&Site::origin(dim), 3)))?;
            worst_sym = worst_sym.max(dev);
        }
    }
    let sym = out.metric(Metric::value("symmetrization_max_deviation", worst_sym).with_bounds(None, Some(IDENTITY_TOL)));
    out.verdict("green_symmetrization", &[sym], 0.0);

    // Derivative formula.
    let w2 = random_weights(&mut rng, 2, 0.5, 5.0);
    out.merge(lemma2_checks(&w2, &make_box(&Site::origin(2), 2), 0.9, 10, seed, pool, "")?);

    // Annealed law against the reinforced sampler.
    let mut eq = ExperimentManifest::new(ExperimentKind::Equivalence, seed);
    eq.dim = Some(2);
    eq.alphas = Some(random_weights(&mut rng, 2, 0.5, 3.0).alphas().to_vec());
    eq.steps = Some(3);
    eq.runs = Some(200_000);
    eq.paths = Some(200);
    let mut e = equivalence(&eq, pool)?;
    e.tables.clear();
    out.merge(e);

    // Kalikow bounds and the return bound.
    let wk = WeightVector::new(1, vec![3.0, 1.0]).unwrap();
    let mut k = kalikow_report(&wk, &make_box(&Site::origin(1), 2), 0.9, &Site::origin(1), 2000, seed, pool, "")?;
    k.tables.clear();
    out.merge(k);
    out.merge(lemma3_check(&wk, &make_box(&Site::origin(1), 4), &Site::origin(1), 2000, seed, pool, "")?);

    // Exact one-dimensional expansion.
    let mut worst_gap: f64 = 0.0;
    for _ in 0..5 {
        let w = loop {
            let w = random_weights(&mut rng, 1, 0.5, 10.0);
            if (w.alpha(0) - w.alpha(1)).abs() > 1.0 {
                break w;
            }
        };
        worst_gap = worst_gap.max(failed("verify", expansion_consistency_1d(&w))?);
    }
    let c = out.metric(Metric::value("expansion_consistency_1d_max", worst_gap).with_bounds(None, Some(CONSISTENCY_TOL)));
    out.verdict("prop3_exact_1d", &[c], 0.0);
    Ok(out)
}

/// CSV of a materialized box: site coordinates and the `2d` probabilities.
pub fn dump_environment(w: &WeightVector, seed: u64, radius: u32) -> Table {
    let dim = w.dim();
    let domain = make_box(&Site::origin(dim), radius);
    let view = EnvironmentView::new(seed, w.clone());
    let mut header = coord_header("x_", dim);
    header.extend((0..2 * dim).map(|d| format!("p_{}", direction_name(d, dim))));
    let mut t = Table { name: "environment".into(), header, rows: Vec::new() };
    let mut probs = vec![0.0; 2 * dim];
    for site in domain.interior() {
        view.fill(site, &mut probs);
        let mut row: Vec<String> = site.coords().iter().map(ToString::to_string).collect();
        row.extend(probs.iter().map(ToString::to_string));
        t.rows.push(row);
    }
    t
}
