use nalgebra::DMatrix;

use errvar::adjustment::{AdjustOptions, Adjuster, DesignMatrix, ObservationVector, DEFAULT_DOF_WARNING};
use errvar::distributions::{empirical_moments, Center};
use errvar::montecarlo::{simulate, CampaignSpec};
use errvar::propagation::{expanded_to_standard, propagate, synthesize, LinearMap};
use errvar::{co_uncertainty, CovarianceMatrix, RegularErrorDistribution};

use crate::job::{budget, AdjustJob, DistJob, PropagateJob, SimulateJob, SynthesizeJob};
use crate::report::{Node, Report};

/// Analytic entries smaller than this fraction of the largest are compared
/// on an absolute scale only.
const RELATIVE_FLOOR: f64 = 1e-12;

const DEFAULT_PDF_POINTS: usize = 9;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Observation and parameter unit labels; parameters default to the
/// observation unit.
fn push_units(report: &mut Report, observations: &Option<String>, parameters: &Option<String>) {
    let mut fields = Vec::new();
    if let Some(u) = observations {
        fields.push(("observations", Node::text(u)));
    }
    if let Some(u) = parameters.as_ref().or(observations.as_ref()) {
        fields.push(("parameters", Node::text(u)));
    }
    if !fields.is_empty() {
        report.push("units", Node::object(fields));
    }
}

fn push_unit(report: &mut Report, unit: &Option<String>) {
    if let Some(u) = unit {
        report.push("unit", Node::text(u));
    }
}

fn design(rows: &Option<Vec<Vec<f64>>>, n: usize) -> errvar::Result<DesignMatrix> {
    match rows {
        Some(rows) => DesignMatrix::from_rows(rows),
        None => DesignMatrix::ones(n),
    }
}

fn push_adjustment_fields(
    report: &mut Report,
    adjuster: &Adjuster,
    measured_values: &[f64],
    residuals: &[f64],
    sigma_unit: f64,
    warnings: Vec<String>,
) {
    let cofactor = adjuster.cofactor();
    report.push("measured_values", Node::vector(measured_values.iter().copied()));
    report.push("residuals", Node::vector(residuals.iter().copied()));
    report.push("sigma_unit", Node::Num(sigma_unit));
    report.push("degrees_of_freedom", Node::Int(adjuster.degrees_of_freedom() as u64));
    report.push("cofactor", Node::matrix(&rows(cofactor)));
    report.push("estimator", Node::matrix(&rows(&adjuster.estimator())));
    report.push("typeA_covariance", Node::matrix(&rows(&(cofactor * (sigma_unit * sigma_unit)))));
    report.push("warnings", Node::List(warnings.into_iter().map(Node::Text).collect()));
}

pub fn adjust(job: &AdjustJob, dof_warn: Option<usize>, precision: usize) -> errvar::Result<Report> {
    let options = AdjustOptions {
        dof_warning_threshold: dof_warn.unwrap_or(DEFAULT_DOF_WARNING),
    };
    let design = design(&job.design, job.observations.len())?;
    let budget = job.budget.as_deref().map(budget).transpose()?;
    let observations = ObservationVector::new(job.observations.clone())?;
    let adjuster = Adjuster::with_options(design, options)?;
    let result = adjuster.solve(&observations)?;
    let budget_covariance = match &budget {
        Some(b) if !b.is_empty() => Some(adjuster.estimate_covariance(&b.observation_covariance(&job.observations)?)?),
        _ => None,
    };

    let mut report = Report::new("adjust", precision);
    push_units(&mut report, &job.unit, &job.parameter_unit);
    push_adjustment_fields(
        &mut report,
        &adjuster,
        result.measured_values.as_slice(),
        result.residuals.as_slice(),
        result.sigma_unit,
        result.warnings.iter().map(ToString::to_string).collect(),
    );
    if let Some(d) = budget_covariance {
        report.push("budget_covariance", Node::matrix(&d.to_rows()));
        report.push("budget_standard_uncertainties", Node::vector(d.std_devs()));
    }
    Ok(report)
}

pub fn propagate_job(job: &PropagateJob, precision: usize) -> errvar::Result<Report> {
    let map = LinearMap::from_rows(&job.map, job.offset.clone())?;
    let input = match (&job.covariance, &job.budget) {
        (Some(rows), None) => CovarianceMatrix::from_rows(rows)?,
        (None, Some(specs)) => {
            let Some(values) = &job.values else {
                return Err(errvar::Error::Input {
                    field: "values",
                    reason: "a budget is evaluated at the input values, which are missing".into(),
                });
            };
            budget(specs)?.observation_covariance(values)?
        }
        _ => {
            return Err(errvar::Error::Input {
                field: "covariance",
                reason: "give exactly one of `covariance` and `budget`".into(),
            })
        }
    };
    let output = propagate(&map, &input)?;
    let values = job.values.as_deref().map(|x| map.apply(x)).transpose()?;

    let mut report = Report::new("propagate", precision);
    push_unit(&mut report, &job.unit);
    if let Some(z) = values {
        report.push("values", Node::vector(z));
    }
    report.push("input_covariance", Node::matrix(&input.to_rows()));
    report.push("covariance", Node::matrix(&output.to_rows()));
    report.push("standard_uncertainties", Node::vector(output.std_devs()));
    Ok(report)
}

pub fn synthesize_job(job: &SynthesizeJob, precision: usize) -> errvar::Result<Report> {
    let type_b = match (job.type_b, &job.type_b_expanded) {
        (Some(b), None) => b,
        (None, Some(e)) => expanded_to_standard(e.expanded, e.coverage_factor)?.sigma,
        _ => {
            return Err(errvar::Error::Input {
                field: "type_b",
                reason: "give exactly one of `type_b` and `type_b_expanded`".into(),
            })
        }
    };
    let covariance = match (job.covariance, job.shared_sigma) {
        (c, None) => c,
        (None, Some(s)) => Some(co_uncertainty(s)?),
        (Some(_), Some(_)) => {
            return Err(errvar::Error::Input {
                field: "shared_sigma",
                reason: "give at most one of `covariance` and `shared_sigma`".into(),
            })
        }
    };
    let mut result = synthesize(job.type_a, type_b, covariance)?;
    if let Some(k) = job.coverage_factor {
        result = result.with_coverage_factor(k)?;
    }
    if let Some(x0) = job.measured_value {
        result = result.with_measured_value(x0)?;
    }

    let mut report = Report::new("synthesize", precision);
    push_unit(&mut report, &job.unit);
    report.push("type_a", Node::Num(result.type_a));
    report.push("type_b", Node::Num(result.type_b));
    report.push("covariance", Node::Num(result.covariance));
    report.push("total", Node::Num(result.total));
    report.push("total_variance", Node::Num(result.total_variance()));
    report.push("coverage_factor", Node::Num(result.coverage_factor));
    report.push("expanded", Node::Num(result.expanded));
    if let Some(t) = result.true_value() {
        let moments = |m: errvar::propagation::Moments| {
            Node::object(vec![("expectation", Node::Num(m.expectation)), ("variance", Node::Num(m.variance))])
        };
        report.push(
            "probability_expression",
            Node::object(vec![
                ("measured_value", moments(t.measured_value)),
                ("error", moments(t.error)),
                ("true_value", moments(t.true_value)),
            ]),
        );
    }
    Ok(report)
}

pub fn simulate_job(job: &SimulateJob, seed: Option<u64>, precision: usize) -> errvar::Result<Report> {
    if job.trials < 2 {
        return Err(errvar::Error::Input {
            field: "trials",
            reason: format!("need at least 2 trials for an empirical covariance, got {}", job.trials),
        });
    }
    let noise = match &job.noise {
        Some(d) => d.to_distribution()?,
        None => RegularErrorDistribution::normal(0.0)?,
    };
    let spec = CampaignSpec {
        design: DesignMatrix::from_rows(&job.design)?,
        true_values: job.true_values.clone(),
        budget: job.budget.as_deref().map(budget).transpose()?.unwrap_or_default(),
        noise,
        trials: job.trials,
        seed: seed.or(job.seed).unwrap_or(0),
    };
    spec.validate()?;
    let adjuster = Adjuster::new(spec.design.clone())?;
    let analytic = spec.analytic_estimate_covariance()?;
    let outcome = simulate(&spec)?;
    let empirical = outcome.estimate_error_covariance()?;

    let mut report = Report::new("simulate", precision);
    push_units(&mut report, &job.unit, &job.parameter_unit);
    report.push("trials", Node::Int(spec.trials as u64));
    report.push("seed", Node::Int(spec.seed));
    report.push("true_values", Node::vector(spec.true_values.iter().copied()));
    report.push("observation_covariance", Node::matrix(&spec.observation_covariance()?.to_rows()));
    let warnings = adjuster.warnings().iter().map(ToString::to_string).collect();
    push_adjustment_fields(
        &mut report,
        &adjuster,
        outcome.estimates.row(0),
        outcome.residuals.row(0),
        outcome.sigma_unit[0],
        warnings,
    );
    let t = spec.true_values.len();
    let mean_error: Vec<f64> = (0..t)
        .map(|j| outcome.estimates.iter_rows().map(|r| r[j] - spec.true_values[j]).sum::<f64>() / spec.trials as f64)
        .collect();
    report.push("mean_error", Node::vector(mean_error));
    report.push("mean_sigma_unit", Node::Num(outcome.mean_sigma_unit()));
    report.push("analytic_covariance", Node::matrix(&analytic.to_rows()));
    report.push("empirical_covariance", Node::matrix(&empirical.to_rows()));
    let scale = analytic.as_matrix().amax();
    let relative: Vec<Node> = (0..t)
        .map(|i| {
            Node::List(
                (0..t)
                    .map(|j| {
                        let a = analytic.get(i, j);
                        if a.abs() > RELATIVE_FLOOR * scale {
                            Node::Num(empirical.get(i, j) / a - 1.0)
                        } else {
                            Node::text("n/a")
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    report.push("relative_difference", Node::List(relative));
    report.push(
        "absolute_difference",
        Node::matrix(&rows(&(empirical.as_matrix() - analytic.as_matrix()))),
    );
    Ok(report)
}

pub fn dist(job: &DistJob, precision: usize) -> errvar::Result<Report> {
    let d = job.distribution.to_distribution()?;
    let (lo, hi) = match d {
        RegularErrorDistribution::Normal { sigma } => (-4.0 * sigma, 4.0 * sigma),
        _ => d.support(),
    };
    let points = match &job.points {
        Some(p) => {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(errvar::Error::Input {
                    field: "points",
                    reason: "must be finite".into(),
                });
            }
            p.clone()
        }
        None => (0..DEFAULT_PDF_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (DEFAULT_PDF_POINTS - 1) as f64)
            .collect(),
    };
    let empirical = match job.samples {
        Some(0) => {
            return Err(errvar::Error::Input {
                field: "samples",
                reason: "must be positive".into(),
            })
        }
        Some(count) => {
            let seed = job.seed.unwrap_or(0);
            let s = d.sample(count, seed)?;
            Some((
                count,
                seed,
                empirical_moments(&s, Center::Zero)?,
                empirical_moments(&s, Center::Mean)?,
            ))
        }
        None => None,
    };

    let mut report = Report::new("dist", precision);
    push_unit(&mut report, &job.unit);
    report.push("distribution", Node::text(d.name()));
    let (name, value) = match d {
        RegularErrorDistribution::ArcsineCyclic { amplitude } => ("amplitude", amplitude),
        RegularErrorDistribution::UniformRounding { half_width } => ("half_width", half_width),
        RegularErrorDistribution::Normal { sigma } => ("sigma", sigma),
    };
    report.push(name, Node::Num(value));
    report.push("expectation", Node::Num(d.expectation()));
    report.push("variance", Node::Num(d.variance()));
    report.push("std_dev", Node::Num(d.std_dev()));
    let (s_lo, s_hi) = d.support();
    report.push("support", Node::vector([s_lo, s_hi]));
    report.push(
        "pdf",
        Node::object(vec![
            ("points", Node::vector(points.iter().copied())),
            ("density", Node::vector(points.iter().map(|&x| d.pdf(x)))),
        ]),
    );
    if let Some((count, seed, about_zero, about_mean)) = empirical {
        report.push(
            "empirical",
            Node::object(vec![
                ("samples", Node::Int(count as u64)),
                ("seed", Node::Int(seed)),
                ("mean", Node::Num(about_zero.mean)),
                ("variance", Node::Num(about_zero.variance)),
                ("variance_about_mean", Node::Num(about_mean.variance)),
            ]),
        );
    }
    Ok(report)
}
