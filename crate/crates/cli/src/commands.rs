use ergodic_towers::counterexample::{
    build_config, chain_check, choose_n0, integral_lower_bound, lower_halves, stability_partitions,
    verify_lower_half_bound,
};
use ergodic_towers::estimator::mean_curve;
use ergodic_towers::intrinsic::run_intrinsic;
use ergodic_towers::towers::{
    column_check, fatness_partial, inflation_tower, kakutani, partition_check, rokhlin, tower_check, Column,
    Tower, TowerReport,
};
use ergodic_towers::{Error, Exact, Field, LeveledSet, QuadNumber, System};
use serde_json::json;

use crate::args::{
    parse_set, Command, CounterexampleArgs, EstimateArgs, InflateArgs, IntrinsicArgs, KakutaniArgs, RokhlinArgs,
    SystemSpec,
};
use crate::report::{cells, Report};

type Outcome = Result<(Report, Option<TowerReport>), Error>;

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Kakutani(_) => "kakutani",
        Command::Rokhlin(_) => "rokhlin",
        Command::Inflate(_) => "inflate",
        Command::Counterexample(_) => "counterexample",
        Command::Intrinsic(_) => "intrinsic",
        Command::Estimate(_) => "estimate",
    }
}

pub fn dispatch(cmd: &Command, cap: usize) -> Outcome {
    match cmd {
        Command::Kakutani(a) => kakutani_cmd(a, cap),
        Command::Rokhlin(a) => rokhlin_cmd(a, cap),
        Command::Inflate(a) => inflate_cmd(a),
        Command::Counterexample(a) => counterexample_cmd(a, cap),
        Command::Intrinsic(a) => intrinsic_cmd(a, cap),
        Command::Estimate(a) => estimate_cmd(a),
    }
}

/// A ground-coordinate set, lifted to level 0 of a skyscraper.
fn ground_set(sys: &System, text: &str) -> Result<LeveledSet, Error> {
    let set = parse_set(sys.field(), text)?;
    Ok(if sys.is_flat() {
        LeveledSet::flat(set)
    } else {
        sys.lift_ground(&set)
    })
}

fn inflation(alpha: &str, imax: usize) -> Result<System, Error> {
    SystemSpec::Inflation {
        imax,
        alpha: alpha.to_string(),
        d: Field::GOLDEN.discriminant(),
    }
    .build()
}

fn column_row(sys: &System, c: &Column) -> Vec<String> {
    let mut row = vec![c.index().to_string(), c.height().to_string()];
    row.extend(cells(&sys.measure(c.base())));
    row.extend(cells(&c.measure(sys)));
    row
}

const COLUMN_HEADER: [&str; 6] = [
    "index",
    "height",
    "base_measure",
    "base_measure_decimal",
    "column_measure",
    "column_measure_decimal",
];

fn kakutani_cmd(a: &KakutaniArgs, cap: usize) -> Outcome {
    let sys = a.system.build()?;
    let base = ground_set(&sys, &a.base)?;
    let tower = kakutani(&sys, &base, cap)?;
    let kac = tower.kac_sum(&sys);
    let fat = fatness_partial(&sys, &tower, tower.columns().len());
    let mut r = Report::new("kakutani", &COLUMN_HEADER);
    for c in tower.columns() {
        r.row(column_row(&sys, c));
    }
    r.value("kac_sum", &kac)
        .value("base_measure", &sys.measure(&base))
        .value("fatness_column_form", &fat.column_form);
    if let Some(f) = &fat.return_time_form {
        r.value("fatness_return_time_form", f);
    }
    r.audit("kac_sum_is_one", kac == sys.field().one())
        .audit("partition", partition_check(&tower, &sys.full_space()))
        .audit("columns", tower_check(&sys, &tower))
        .audit("fatness_forms_agree", fat.forms_agree());
    r.details(&json!({ "system": sys.description() }));
    Ok((r, Some(tower.report(&sys))))
}

fn rokhlin_cmd(a: &RokhlinArgs, cap: usize) -> Outcome {
    let sys = a.system.build()?;
    let res = rokhlin(&sys, a.height, &a.eps, cap)?;
    let eps = sys.field().rational(a.eps.clone());
    let err = sys.measure(&res.error_set);
    let mut r = Report::new("rokhlin", &COLUMN_HEADER);
    r.row(column_row(&sys, &res.column));
    r.value("error_measure", &err)
        .exact("eps", Exact::rational(&a.eps))
        .value("base_measure", &sys.measure(res.column.base()))
        .value("column_measure", &res.column.measure(&sys));
    r.audit("column", column_check(&sys, &res.column))
        .audit("error_below_eps", err < eps)
        .audit(
            "covers_space",
            res.column.union().union(&res.error_set) == sys.full_space(),
        );
    let tower = Tower::new(vec![res.column]);
    Ok((r, Some(tower.report(&sys))))
}

fn inflate_cmd(a: &InflateArgs) -> Outcome {
    let sys = inflation(&a.alpha, a.imax)?;
    let tower = inflation_tower(&sys)?;
    let field = sys.field();
    let fat = fatness_partial(&sys, &tower, tower.columns().len());
    let closed_form = &field.int(3 * a.imax as i64) / sys.normalizer();
    let tail = Column::new(&sys, 0, sys.lift_ground(&sys.cell(0).base), 1)?;
    let mut with_tail = tower.columns().to_vec();
    with_tail.push(tail);
    let mut r = Report::new("inflate", &COLUMN_HEADER);
    for c in &with_tail {
        r.row(column_row(&sys, c));
    }
    let total = sys.measure(&sys.full_space());
    r.value("normalizer", sys.normalizer())
        .value("total_measure", &total)
        .value("fatness", &fat.column_form);
    r.audit("total_measure_is_one", total == field.one())
        .audit("columns", tower_check(&sys, &tower))
        .audit("partition", partition_check(&Tower::new(with_tail), &sys.full_space()))
        .audit("fatness_is_3imax_over_z", fat.column_form == closed_form);
    r.details(&json!({ "system": sys.description() }));
    Ok((r, Some(tower.report(&sys))))
}

fn default_horizons(h: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (4..usize::BITS).map(|p| 1usize << p).take_while(|&x| x < h).collect();
    out.push(h);
    out
}

fn counterexample_cmd(a: &CounterexampleArgs, cap: usize) -> Outcome {
    let sys = inflation(&a.alpha, a.imax)?;
    let tower = inflation_tower(&sys)?;
    let n0 = choose_n0(&sys, &tower, &a.bound)?;
    let cfg = build_config(&sys, &tower, n0)?;
    let halves = lower_halves(&tower, n0);
    let verdicts = verify_lower_half_bound(&sys, &cfg, &halves, cap)?;
    let horizons = a.horizons.clone().unwrap_or_else(|| default_horizons(a.horizon));
    let partitions = stability_partitions(&sys, &cfg, &horizons, cap)?;
    let mut r = Report::new(
        "counterexample",
        &[
            "H",
            "K",
            "lhs",
            "lhs_decimal",
            "middle",
            "middle_decimal",
            "integral_lower_bound",
            "integral_lower_bound_decimal",
            "ok",
        ],
    );
    let field = sys.field();
    let mut chains_ok = true;
    let mut disjoint = true;
    let mut exceed = true;
    let mut sums_to_one = true;
    let mut integrals: Vec<QuadNumber> = Vec::new();
    for sp in &partitions {
        let h = sp.horizon();
        let k = a.k.unwrap_or_else(|| {
            tower
                .columns()
                .iter()
                .filter(|c| c.height() <= h)
                .map(Column::index)
                .max()
                .unwrap_or(0)
        });
        let chain = chain_check(&sys, &cfg, &halves, sp, k)?;
        let total = sp.cells().values().fold(field.zero(), |acc, s| acc + sys.measure(s));
        sums_to_one &= total == field.one();
        chains_ok &= chain.ok;
        disjoint &= chain.pieces_disjoint;
        exceed &= chain.halves_exceed;
        let mut row = vec![h.to_string(), k.to_string()];
        row.extend(cells(&chain.lhs));
        row.extend(cells(&chain.middle));
        row.extend(cells(&chain.rhs));
        row.push(chain.ok.to_string());
        r.row(row);
        integrals.push(integral_lower_bound(&sys, sp));
    }
    r.value("mu_a", cfg.f_integral())
        .value("threshold", cfg.threshold())
        .value("normalizer", sys.normalizer());
    r.audit("mu_a_below_quarter", *cfg.f_integral() < field.ratio(1, 4))
        .audit("lower_half_bound", verdicts.values().all(|&v| v))
        .audit("chain", chains_ok)
        .audit("chain_pieces_disjoint", disjoint)
        .audit("lower_halves_exceed_height", exceed)
        .audit("partition_sums_to_one", sums_to_one)
        .audit("integral_monotone", integrals.windows(2).all(|w| w[0] <= w[1]));
    r.details(&json!({
        "n0": n0,
        "lower_half_bound_by_column": verdicts,
        "horizons": horizons,
    }));
    Ok((r, Some(tower.report(&sys))))
}

fn intrinsic_cmd(a: &IntrinsicArgs, cap: usize) -> Outcome {
    let sys = a.system.build()?;
    let (tower, report) = run_intrinsic(&sys, &a.ks, a.stages, &a.eps, &a.budget, cap)?;
    let mut r = Report::new(
        "intrinsic",
        &[
            "stage",
            "k",
            "first_measure",
            "first_measure_decimal",
            "first_bound",
            "first_bound_decimal",
            "fatness",
            "fatness_decimal",
            "partition_ok",
            "heights_ok",
            "p3_ok",
        ],
    );
    for s in &report.stage_reports {
        r.row(vec![
            s.stage.to_string(),
            s.k.to_string(),
            s.first_measure.exact.clone(),
            s.first_measure.decimal.clone(),
            s.first_bound.exact.clone(),
            s.first_bound.decimal.clone(),
            s.fatness.exact.clone(),
            s.fatness.decimal.clone(),
            s.partition_ok.to_string(),
            s.heights_ok.to_string(),
            s.p3_ok.to_string(),
        ]);
    }
    r.exact("fatness", report.fatness.clone())
        .exact("fatness_bound", report.fatness_bound.clone())
        .exact("growth_sum_bound", report.growth.sum_bound.clone());
    if let Some(l) = &report.limit {
        r.exact("limit_bound", l.bound.clone());
    }
    r.audit("growth", report.growth.passed)
        .audit("p1_partition", report.p1)
        .audit("p2_heights", report.p2)
        .audit("p3_measures", report.p3)
        .audit("nesting", report.nesting)
        .audit("removal_bound", report.removal)
        .audit("returned_disjoint", report.returned_disjoint)
        .audit("fatness", report.fatness_ok);
    r.details(&report);
    Ok((r, Some(tower.report(&sys))))
}

fn estimate_cmd(a: &EstimateArgs) -> Outcome {
    let sys = a.system.build()?;
    let set = match &a.set {
        Some(text) => ground_set(&sys, text)?,
        None => {
            let tower = inflation_tower(&sys)
                .map_err(|_| Error::Precondition("--set is required for non-inflation systems".into()))?;
            let n0 = choose_n0(&sys, &tower, &a.bound)?;
            build_config(&sys, &tower, n0)?.set().clone()
        }
    };
    let rows = mean_curve(&sys, &set, &a.horizons, a.samples, a.seed)?;
    let mut r = Report::new("estimate", &["H", "samples", "mean", "stderr", "seed"]);
    for row in &rows {
        r.row(row.csv().split(',').map(str::to_string).collect());
    }
    let mu = sys.measure(&set);
    r.value("mu_a", &mu).value("threshold", &mu.scale_int(2));
    r.audit("means_monotone", rows.windows(2).all(|w| w[0].mean <= w[1].mean));
    r.details(&json!({ "system": sys.description(), "rows": rows }));
    Ok((r, None))
}
