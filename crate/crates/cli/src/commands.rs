use rayon::prelude::*;
use startup_timing::exit_pre::critical_alpha;
use startup_timing::verify::{
    consistency_check, killing_identity_check, perturbation_optimality, simulate_npv, McError,
    Stage, ThresholdKind, ThresholdStrategy,
};
use startup_timing::{
    solve_entry, solve_pre_exit, validate, Entry, Params, PiecewiseValue, SolveError,
};

use crate::output::{Cell, Table};
use crate::scenario::{set_param, spaced, ScenarioFile, Spacing};
use crate::CliError;

/// Columns of every `solve` and `sweep` row.
pub const RESULT_COLUMNS: [&str; 13] = [
    "param",
    "value",
    "status",
    "case",
    "alpha0",
    "a_tilde_star",
    "a_star",
    "c_star",
    "e_star",
    "pre_exit_residual",
    "entry_residual",
    "warnings",
    "error",
];

pub const VALUE_COLUMNS: [&str; 4] = ["x", "v_tilde", "v", "psi"];

pub const VERIFY_COLUMNS: [&str; 9] = [
    "check",
    "item",
    "x0",
    "expected",
    "estimate",
    "std_err",
    "statistic",
    "limit",
    "pass",
];

const STATUS_COLUMN: usize = 2;
const VALIDATION_CODES: [&str; 3] = ["E_VALIDATION", "E_INFINITE_VALUE", "E_SCENARIO"];
const CONSISTENCY_LIMIT: f64 = 1e-8;
const SCAN_POINTS: usize = 1000;
const MC_Z_LIMIT: f64 = 3.0;
const KILLING_Z_LIMIT: f64 = 4.0;
const PERTURBATIONS: [f64; 4] = [-0.10, -0.05, 0.05, 0.10];

pub struct GridSpec {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n: usize,
}

struct Solved {
    row: Vec<Cell>,
    solution: Option<Entry>,
}

fn solve_point(p: &Params, swept: Option<(&str, f64)>) -> Solved {
    let mut alpha0 = None;
    let mut case = String::new();
    let mut a_tilde = None;
    let mut a_star = None;
    let mut pre_residual = None;
    let mut warnings = validate(p).warnings;
    let outcome: Result<Entry, SolveError> = solve_pre_exit(p).and_then(|pre| {
        alpha0 = Some(critical_alpha(p));
        case = pre.case.label().to_string();
        a_tilde = Some(pre.a_tilde_star());
        a_star = Some(pre.a_star);
        pre_residual = Some(pre.system_residual);
        solve_entry(p, &pre)
    });
    if let Ok(sol) = &outcome {
        warnings.extend(sol.warnings.iter().cloned());
    }
    let (status, error) = match &outcome {
        Ok(_) => ("ok".to_string(), String::new()),
        Err(e) => (e.code().to_string(), e.to_string()),
    };
    let sol = outcome.ok();
    let row = vec![
        Cell::Text(swept.map(|s| s.0.to_string()).unwrap_or_default()),
        Cell::Num(swept.map(|s| s.1)),
        status.into(),
        case.into(),
        alpha0.into(),
        a_tilde.into(),
        a_star.into(),
        sol.as_ref().map(|s| s.c_star).into(),
        sol.as_ref().map(|s| s.e_star).into(),
        pre_residual.into(),
        sol.as_ref().map(|s| s.max_residual()).into(),
        warnings.join("; ").into(),
        error.into(),
    ];
    Solved { row, solution: sol }
}

fn value_table(sol: &Entry, grid: &GridSpec) -> Table {
    let pre = &sol.pre_exit;
    let post = pre.post();
    let top = [sol.e_star, pre.a_star, post.a_tilde_star]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max);
    let lo = grid.min.unwrap_or(0.25 * sol.c_star);
    let hi = grid.max.unwrap_or(2.0 * top);
    let mut t = Table::new(&VALUE_COLUMNS);
    if grid.n == 0 || !(lo > 0.0 && hi >= lo) {
        return t;
    }
    for x in spaced(lo, hi, grid.n, Spacing::Log) {
        t.push(vec![
            x.into(),
            post.value(x).ok().into(),
            pre.value(x).ok().into(),
            sol.value(x).ok().into(),
        ]);
    }
    t
}

pub fn solve(scenario: &ScenarioFile, grid: Option<GridSpec>) -> (Table, Option<Table>) {
    let solved = solve_point(&scenario.params(), None);
    let mut table = Table::new(&RESULT_COLUMNS);
    table.push(solved.row);
    let values = grid.and_then(|g| solved.solution.as_ref().map(|s| value_table(s, &g)));
    (table, values)
}

pub fn sweep(scenario: &ScenarioFile) -> anyhow::Result<Table> {
    let block = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation {
            code: "E_SCENARIO",
            message: "scenario has no [sweep] section".into(),
        })?;
    let grid = block.grid()?;
    let base = scenario.params();
    let rows: Vec<Vec<Cell>> = grid
        .par_iter()
        .map(|&v| {
            let mut p = base;
            set_param(&mut p, &block.param, v);
            solve_point(&p, Some((&block.param, v))).row
        })
        .collect();
    let mut table = Table::new(&RESULT_COLUMNS);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

/// Maps error markers in the status column to an exit status: any
/// validation failure wins over solver failures.
pub fn row_status(table: &Table) -> anyhow::Result<()> {
    let failures: Vec<(String, String)> = table
        .rows
        .iter()
        .map(|r| {
            (
                r[STATUS_COLUMN].render(),
                r.last().map(Cell::render).unwrap_or_default(),
            )
        })
        .filter(|(status, _)| status != "ok")
        .collect();
    let Some(first) = failures.first() else {
        return Ok(());
    };
    let message = format!(
        "{} of {} row(s) failed; first: {}",
        failures.len(),
        table.rows.len(),
        first.1
    );
    let validation = failures
        .iter()
        .find_map(|(s, _)| VALIDATION_CODES.iter().find(|&&c| c == s.as_str()));
    let err = if let Some(&code) = validation {
        CliError::Validation { code, message }
    } else {
        CliError::Solver {
            code: "E_SOLVER",
            message,
        }
    };
    Err(err.into())
}

pub struct VerifyReport {
    pub table: Table,
    pub failed: usize,
}

fn mc_err(e: McError) -> CliError {
    CliError::Validation {
        code: "E_MC_CONFIG",
        message: e.to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn check_row(
    check: &str,
    item: String,
    x0: Option<f64>,
    expected: Option<f64>,
    estimate: f64,
    std_err: Option<f64>,
    statistic: Option<f64>,
    limit: f64,
    pass: bool,
) -> Vec<Cell> {
    vec![
        check.into(),
        item.into(),
        x0.into(),
        expected.into(),
        estimate.into(),
        std_err.into(),
        statistic.into(),
        limit.into(),
        pass.into(),
    ]
}

/// `diff / se`, signed infinity when only the error vanishes.
fn ratio(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn solver_err(e: SolveError) -> CliError {
    if e.is_validation() {
        CliError::Validation {
            code: e.code(),
            message: e.to_string(),
        }
    } else {
        CliError::Solver {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

/// Runs the pasting and ODE audit, Monte Carlo agreement, the killing
/// identity and threshold perturbations. The Monte Carlo strategy is the
/// analytic optimum with any `[strategy]` overrides applied.
pub fn verify(scenario: &ScenarioFile) -> anyhow::Result<VerifyReport> {
    let p = scenario.params();
    let pre = solve_pre_exit(&p).map_err(solver_err)?;
    let sol = solve_entry(&p, &pre).map_err(solver_err)?;
    let cfg = scenario.mc_config(&p);
    cfg.check().map_err(mc_err)?;
    let strategy = scenario.strategy(ThresholdStrategy::optimal(&sol));
    strategy.check().map_err(mc_err)?;

    let mut table = Table::new(&VERIFY_COLUMNS);
    let mut failed = 0;
    let mut push = |row: Vec<Cell>, pass: bool| {
        failed += usize::from(!pass);
        table.push(row);
    };

    let audit = consistency_check(&p, &sol, SCAN_POINTS).map_err(|e| CliError::Solver {
        code: "E_SCAN",
        message: e.to_string(),
    })?;
    for (item, v) in [
        ("pasting_gap", audit.max_pasting_gap),
        ("ode_residual", audit.max_ode_residual),
    ] {
        let pass = v < CONSISTENCY_LIMIT;
        push(
            check_row(
                "consistency",
                item.into(),
                None,
                None,
                v,
                None,
                None,
                CONSISTENCY_LIMIT,
                pass,
            ),
            pass,
        );
    }

    let pre = &sol.pre_exit;
    let post = *pre.post();
    let mut points: Vec<(Stage, f64, f64)> = Vec::new();
    if post.a_tilde_star.is_finite() {
        for m in [1.5, 2.0, 3.0] {
            let x = m * post.a_tilde_star;
            points.push((Stage::PostCompetition, x, post.value(x)?));
        }
    }
    for m in [1.5, 2.0, 3.0] {
        let x = m * pre.a_star;
        points.push((Stage::PostEntry, x, pre.value(x)?));
    }
    for f in [0.25, 0.5, 0.75] {
        let x = sol.c_star + f * (sol.e_star - sol.c_star);
        points.push((Stage::PreEntry, x, sol.value(x)?));
    }
    for (stage, x, analytic) in points {
        let est = simulate_npv(&p, &strategy, stage, x, &cfg).map_err(mc_err)?;
        let z = ratio(est.mean - analytic, est.std_err);
        let pass = z.abs() <= MC_Z_LIMIT;
        push(
            check_row(
                "mc_agreement",
                stage.label().into(),
                Some(x),
                Some(analytic),
                est.mean,
                Some(est.std_err),
                Some(z),
                MC_Z_LIMIT,
                pass,
            ),
            pass,
        );
    }

    let x0 = 2.0
        * [pre.a_star, post.a_tilde_star]
            .into_iter()
            .filter(|x| x.is_finite())
            .fold(0.0, f64::max);
    let k = killing_identity_check(&p, &strategy, x0, &cfg).map_err(mc_err)?;
    let pass = k.z.abs() < KILLING_Z_LIMIT;
    push(
        check_row(
            "killing_identity",
            Stage::PostEntry.label().into(),
            Some(x0),
            Some(k.killed.mean),
            k.two_clock.mean,
            Some(k.two_clock.std_err.hypot(k.killed.std_err)),
            Some(k.z),
            KILLING_Z_LIMIT,
            pass,
        ),
        pass,
    );

    for which in ThresholdKind::ALL {
        if !which.get(&strategy).is_finite() {
            continue;
        }
        let x0 = match which.stage() {
            Stage::PostCompetition => 1.5 * strategy.abandon_post_at,
            Stage::PostEntry => 1.5 * strategy.abandon_pre_at,
            Stage::PreEntry => 0.5 * (strategy.cancel_at + strategy.enter_at),
        };
        // A perturbation that breaks cancel_at <= enter_at prices nothing.
        let deltas: Vec<f64> = PERTURBATIONS
            .into_iter()
            .filter(|&d| {
                let ok = which
                    .with(&strategy, which.get(&strategy) * (1.0 + d))
                    .check()
                    .is_ok();
                if !ok {
                    eprintln!(
                        "note: skipping {} {d:+}: perturbed strategy is not ordered",
                        which.label()
                    );
                }
                ok
            })
            .collect();
        let report =
            perturbation_optimality(&p, &strategy, which, &deltas, x0, &cfg).map_err(mc_err)?;
        for r in &report.rows {
            let pass = !r.improved;
            let stat = ratio(r.diff, r.combined_std_err);
            push(
                check_row(
                    "perturbation",
                    format!("{} {:+}", which.label(), r.delta),
                    Some(x0),
                    Some(report.base.mean),
                    r.estimate.mean,
                    Some(r.combined_std_err),
                    Some(stat),
                    MC_Z_LIMIT,
                    pass,
                ),
                pass,
            );
        }
    }
    Ok(VerifyReport { table, failed })
}
