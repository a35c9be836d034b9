//! Experiment orchestration behind the `trimquad` binary.

mod config;

pub use config::{parse_cases, parse_usize_list, RunConfig, StrategySelection, MAX_DEGREE};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use crate::assembly::{cut_degree, cut_points, form_with_timings, CoefficientField, FormOptions, FormationReport, Strategy};
use crate::error::Result;
use crate::projection::{benchmark_target, run_convergence_study, ConvergenceRecord, StudyOptions};
use crate::quadrature::{build_dwq, WeightRow, WeightedRuleSet};
use crate::splinecore::TensorBasis2D;
use crate::trimming::{CaseName, CaseParams, CutCellQuadrature, TrimConfiguration};

/// A convergence rate below `p + RATE_MARGIN` is flagged.
pub const RATE_MARGIN: f64 = 0.8;

/// Largest accepted relative error difference to the reference.
pub const AGREEMENT_TOL: f64 = 1e-10;

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn options(config: &RunConfig) -> FormOptions {
    FormOptions { parallel: config.parallel, ..FormOptions::default() }
}

/// Deviation of the fast strategies from the reference for one space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassTableRow {
    pub case: CaseName,
    pub mesh: usize,
    pub degree: usize,
    pub dofs: usize,
    /// `(absolute, relative)` Frobenius deviations.
    pub hybrid: (f64, f64),
    pub dwq: (f64, f64),
    pub wq: (f64, f64),
}

impl MassTableRow {
    pub const CSV_HEADER: &'static str = "case,mesh,degree,dofs,hybrid_abs,hybrid_rel,dwq_abs,dwq_rel,wq_abs,wq_rel";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.case,
            self.mesh,
            self.degree,
            self.dofs,
            self.hybrid.0,
            self.hybrid.1,
            self.dwq.0,
            self.dwq.1,
            self.wq.0,
            self.wq.1
        )
    }
}

/// Forms every strategy's matrix on `mesh x mesh` elements and compares it to
/// the reference.
pub fn mass_matrix_table(
    case: CaseName,
    params: &CaseParams,
    degrees: &[usize],
    mesh: usize,
    options: FormOptions,
) -> Result<Vec<MassTableRow>> {
    let field = CoefficientField::identity();
    let domain = params.domain(case);
    degrees
        .iter()
        .map(|&p| {
            let basis = TensorBasis2D::open_uniform(p, mesh)?;
            let config = TrimConfiguration::new(&basis, &domain)?;
            let (reference, _) = form_with_timings(Strategy::Reference, &config, &field, options)?;
            let norm = reference.frobenius();
            let dev = |s| -> Result<(f64, f64)> {
                let (m, _) = form_with_timings(s, &config, &field, options)?;
                let d = m.deviation(&reference)?;
                Ok((d, d / norm))
            };
            Ok(MassTableRow {
                case,
                mesh,
                degree: p,
                dofs: reference.dim(),
                hybrid: dev(Strategy::Hybrid)?,
                dwq: dev(Strategy::Dwq)?,
                wq: dev(Strategy::Wq)?,
            })
        })
        .collect()
}

/// Writes `mass_matrix_<case>.csv` for every case and mesh of the config.
pub fn run_mass_matrix_table(config: &RunConfig) -> Result<Vec<MassTableRow>> {
    config.validate()?;
    let mut all = Vec::new();
    for &case in &config.cases {
        let mut rows = Vec::new();
        for &mesh in &config.meshes {
            rows.extend(mass_matrix_table(case, &config.params, &config.degrees, mesh, options(config))?);
        }
        let path = config.out.join(format!("mass_matrix_{case}.csv"));
        write_lines(&path, MassTableRow::CSV_HEADER, rows.iter().map(MassTableRow::csv_row))?;
        all.extend(rows);
    }
    Ok(all)
}

/// Rates and reference agreement of one `(case, strategy, p)` series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub case: String,
    pub strategy: Strategy,
    pub p: usize,
    /// Rate between the two finest meshes.
    pub final_rate: Option<f64>,
    pub min_rate: Option<f64>,
    pub max_rel_diff: f64,
}

impl RateSummary {
    pub const CSV_HEADER: &'static str = "case,strategy,p,final_rate,min_rate,max_rel_diff,rates,agreement";

    /// Every rate of the series reaches `p + RATE_MARGIN`.
    pub fn rates_ok(&self) -> bool {
        self.min_rate.is_some_and(|r| r >= self.p as f64 + RATE_MARGIN)
    }

    pub fn final_rate_ok(&self) -> bool {
        self.final_rate.is_some_and(|r| r >= self.p as f64 + RATE_MARGIN)
    }

    pub fn agreement_ok(&self) -> bool {
        self.max_rel_diff <= AGREEMENT_TOL
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
        format!(
            "{},{},{},{},{},{:.3e},{},{}",
            self.case,
            self.strategy,
            self.p,
            opt(self.final_rate),
            opt(self.min_rate),
            self.max_rel_diff,
            flag(self.rates_ok()),
            flag(self.agreement_ok())
        )
    }
}

/// Groups records by `(case, strategy, p)` in order of appearance.
pub fn summarize(records: &[ConvergenceRecord]) -> Vec<RateSummary> {
    let mut out: Vec<RateSummary> = Vec::new();
    for r in records {
        let pos = out.iter().position(|s| s.case == r.case && s.strategy == r.strategy && s.p == r.p);
        let s = match pos {
            Some(k) => &mut out[k],
            None => {
                out.push(RateSummary {
                    case: r.case.clone(),
                    strategy: r.strategy,
                    p: r.p,
                    final_rate: None,
                    min_rate: None,
                    max_rel_diff: 0.0,
                });
                out.last_mut().expect("just pushed")
            }
        };
        if let Some(rate) = r.rate {
            s.final_rate = Some(rate);
            s.min_rate = Some(s.min_rate.map_or(rate, |m: f64| m.min(rate)));
        }
        s.max_rel_diff = s.max_rel_diff.max(r.rel_diff_to_reference.unwrap_or(0.0));
    }
    out
}

/// Runs the projection study for every case and writes
/// `convergence_<case>.csv` and `convergence_summary.csv`.
pub fn run_convergence(config: &RunConfig) -> Result<(Vec<ConvergenceRecord>, Vec<RateSummary>)> {
    config.validate()?;
    let strategies = config.strategy.strategies();
    let study = StudyOptions { form: options(config), ..StudyOptions::default() };
    let mut meshes = config.meshes.clone();
    meshes.sort_unstable();
    meshes.dedup();
    let mut all = Vec::new();
    for &case in &config.cases {
        let records = run_convergence_study(
            case.as_str(),
            &config.params.domain(case),
            benchmark_target(),
            &strategies,
            &config.degrees,
            &meshes,
            study,
        )?;
        let path = config.out.join(format!("convergence_{case}.csv"));
        write_lines(&path, ConvergenceRecord::CSV_HEADER, records.iter().map(ConvergenceRecord::csv_row))?;
        all.extend(records);
    }
    let summary = summarize(&all);
    let path = config.out.join("convergence_summary.csv");
    write_lines(&path, RateSummary::CSV_HEADER, summary.iter().map(RateSummary::csv_row))?;
    Ok((all, summary))
}

/// Median formation report of one `(case, strategy, p)` triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub case: CaseName,
    pub strategy: Strategy,
    pub p: usize,
    pub mesh: usize,
    pub report: FormationReport,
}

impl TimingRow {
    pub const CSV_HEADER: &'static str = "case,strategy,p,mesh,t_weights,t_interior,t_cut_regular,t_cut_elements,t_total,\
        wq_points,dwq_points,dwq_rule_sets,dwq_fallbacks,cut_points,sum_factor_ops";

    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{},{},{},{}",
            self.case,
            self.strategy,
            self.p,
            self.mesh,
            r.t_weights,
            r.t_interior,
            r.t_cut_regular,
            r.t_cut_elements,
            r.t_total,
            r.wq_points,
            r.dwq_points,
            r.dwq_rule_sets,
            r.dwq_fallbacks,
            r.cut_points,
            r.sum_factor_ops
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Component-wise medians of `reps` timed formations per strategy after one
/// warm-up each. The strategy order is shuffled in every repetition.
pub fn time_formation(
    config: &TrimConfiguration,
    strategies: &[Strategy],
    reps: usize,
    options: FormOptions,
    rng: &mut StdRng,
) -> Result<Vec<(Strategy, FormationReport)>> {
    let field = CoefficientField::identity();
    let mut runs: Vec<Vec<FormationReport>> = vec![Vec::new(); strategies.len()];
    for &s in strategies {
        form_with_timings(s, config, &field, options)?;
    }
    let mut order: Vec<usize> = (0..strategies.len()).collect();
    for _ in 0..reps {
        order.shuffle(rng);
        for &k in &order {
            runs[k].push(form_with_timings(strategies[k], config, &field, options)?.1);
        }
    }
    Ok(strategies
        .iter()
        .zip(runs)
        .map(|(&s, reports)| {
            let pick = |f: fn(&FormationReport) -> f64| median(reports.iter().map(f).collect());
            let mut report = reports.last().cloned().unwrap_or_default();
            report.t_weights = pick(|r| r.t_weights);
            report.t_interior = pick(|r| r.t_interior);
            report.t_cut_regular = pick(|r| r.t_cut_regular);
            report.t_cut_elements = pick(|r| r.t_cut_elements);
            report.t_total = pick(|r| r.t_total);
            (s, report)
        })
        .collect())
}

/// Times every strategy at the finest mesh and writes `timings.csv`.
pub fn run_timings(config: &RunConfig) -> Result<Vec<TimingRow>> {
    config.validate()?;
    let mesh = config.finest_mesh();
    let strategies = config.strategy.strategies();
    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    for &case in &config.cases {
        let domain = config.params.domain(case);
        for &p in &config.degrees {
            let basis = TensorBasis2D::open_uniform(p, mesh)?;
            let tc = TrimConfiguration::new(&basis, &domain)?;
            for (strategy, report) in time_formation(&tc, &strategies, config.repetitions, options(config), &mut rng)? {
                log::info!("{case} {strategy} p={p}: {:.4} s", report.t_total);
                rows.push(TimingRow { case, strategy, p, mesh, report });
            }
        }
    }
    write_lines(&config.out.join("timings.csv"), TimingRow::CSV_HEADER, rows.iter().map(TimingRow::csv_row))?;
    Ok(rows)
}

#[derive(Serialize)]
struct RowView<'a> {
    test: usize,
    start: usize,
    weights: &'a [f64],
}

impl<'a> RowView<'a> {
    fn of(test: usize, row: &'a WeightRow) -> Self {
        RowView { test, start: row.start, weights: &row.weights }
    }
}

#[derive(Serialize)]
struct DwqView<'a> {
    direction: usize,
    u_disc: f64,
    split: usize,
    points: &'a [f64],
    rows: Vec<RowView<'a>>,
}

#[derive(Serialize)]
struct WqView<'a> {
    direction: usize,
    points: &'a [f64],
    rows: Vec<RowView<'a>>,
}

/// Writes the WQ and DWQ rules (`rules_<case>_p<p>_n<n>.json`) and the
/// cut-cell points (`cutcells_<case>_p<p>_n<n>.csv`) at the finest mesh.
pub fn dump_rules(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let n = config.finest_mesh();
    fs::create_dir_all(&config.out)?;
    for &case in &config.cases {
        let domain = config.params.domain(case);
        for &p in &config.degrees {
            let basis = TensorBasis2D::open_uniform(p, n)?;
            let tc = TrimConfiguration::new(&basis, &domain)?;
            let wq = [
                WeightedRuleSet::for_basis(&basis.dirs[0], config.parallel)?,
                WeightedRuleSet::for_basis(&basis.dirs[1], config.parallel)?,
            ];
            let mut dwq = Vec::new();
            for d in 0..2 {
                for &u in tc.u_disc(d) {
                    dwq.push((d, build_dwq(&basis.dirs[d], wq[d].layout(), u, config.parallel)?));
                }
            }
            let wq_view: Vec<WqView> = wq
                .iter()
                .enumerate()
                .map(|(d, set)| WqView {
                    direction: d,
                    points: set.layout().points(),
                    rows: set.rows().iter().enumerate().map(|(i, r)| RowView::of(i, r)).collect(),
                })
                .collect();
            let dwq_view: Vec<DwqView> = dwq
                .iter()
                .map(|(d, set)| DwqView {
                    direction: *d,
                    u_disc: set.u_disc(),
                    split: set.split(),
                    points: set.layout().points(),
                    rows: set.tests().filter_map(|i| set.row(i).map(|r| RowView::of(i, r))).collect(),
                })
                .collect();
            let path = config.out.join(format!("rules_{case}_p{p}_n{n}.json"));
            let json = serde_json::json!({ "case": case, "degree": p, "mesh": n, "wq": wq_view, "dwq": dwq_view });
            fs::write(&path, serde_json::to_string_pretty(&json)?)?;
            let cq = CutCellQuadrature::with_points(&tc, cut_degree(p), cut_points(p), config.parallel)?;
            let path = config.out.join(format!("cutcells_{case}_p{p}_n{n}.csv"));
            cq.write_csv(BufWriter::new(fs::File::create(&path)?))?;
            log::info!("wrote rules and cut cells for {case} p={p}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_tracks_rates() {
        let rec = |h: f64, e: f64, rate: Option<f64>, d: f64| ConvergenceRecord {
            case: "line".into(),
            strategy: Strategy::Dwq,
            p: 1,
            h,
            dofs: 4,
            l2_rel: e,
            rate,
            rel_diff_to_reference: Some(d),
            condition: 1.0,
        };
        let s = summarize(&[rec(0.5, 1e-2, None, 0.0), rec(0.25, 2.5e-3, Some(2.0), 1e-12), rec(0.125, 7e-4, Some(1.7), 0.0)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].final_rate, Some(1.7));
        assert!(!s[0].rates_ok() && !s[0].final_rate_ok() && s[0].agreement_ok());
        assert!(s[0].csv_row().ends_with("FAIL,PASS"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
