use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use torus_trace::bohr_sommerfeld::{bracketing_check, bs_predict_with, sweep_csv, BsOptions};
use torus_trace::orbits::{orbit_catalog, OrbitCatalog};
use torus_trace::quantize::{anti_wick_op, cosine_closed_form, spectral_norm, weyl_op};
use torus_trace::spectral::{eigendecompose, propagator_trace, Spectrum, DEFAULT_DEGENERACY_TOL};
use torus_trace::symbols::ModelKind;
use torus_trace::trace_formula::{
    compare, make_test_function, poisson_shipped, potential_case_rhs, require_smooth, van_vleck_row_error,
    TestFunction,
};
use torus_trace::{build_model, Error, FourierSymbol, Result};

use crate::config::RunConfig;
use crate::output::{write_json, write_text, Csv};

fn model(cfg: &RunConfig, n: usize) -> Result<FourierSymbol> {
    build_model(&cfg.model, cfg.geom(n)?)
}

fn spectrum_for(cfg: &RunConfig, n: usize) -> Result<Spectrum> {
    let g = cfg.geom(n)?;
    eigendecompose(&weyl_op(&model(cfg, n)?, &g)?, DEFAULT_DEGENERACY_TOL, false)
}

fn reformat(json: &str) -> Result<Value> {
    Ok(serde_json::from_str(json)?)
}

fn test_function(cfg: &RunConfig, catalog: &OrbitCatalog) -> Result<TestFunction> {
    match (cfg.rho.t, cfg.rho.period_factor) {
        (Some(t), _) => make_test_function(t),
        (None, f) => {
            let f = f.unwrap_or(1.35);
            let tp = catalog.min_period().ok_or_else(|| {
                Error::Spec(format!("rho.period_factor needs at least one orbit at E = {}", catalog.energy))
            })?;
            make_test_function(f * tp)
        }
    }
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Summary {
        #[serde(rename = "N")]
        n: usize,
        hbar: f64,
        min: f64,
        max: f64,
        residual: f64,
        degeneracy_histogram: BTreeMap<String, usize>,
    }
    let specs: Vec<Spectrum> = cfg.n_list.par_iter().map(|&n| spectrum_for(cfg, n)).collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (&n, s) in cfg.n_list.iter().zip(&specs) {
        write_text(out, &format!("spectrum_N{n}.csv"), &s.to_csv())?;
        let mut hist = BTreeMap::new();
        for (_, m) in s.groups() {
            *hist.entry(m.to_string()).or_insert(0) += 1;
        }
        summary.push(Summary {
            n,
            hbar: s.hbar(),
            min: s.eigenvalues()[0],
            max: *s.eigenvalues().last().unwrap(),
            residual: s.residual(),
            degeneracy_histogram: hist,
        });
    }
    write_json(out, "spectrum_summary.json", &summary)
}

pub fn orbits(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.require_energies()?;
    let h = model(cfg, cfg.n_list[0])?;
    let cats: Vec<OrbitCatalog> =
        cfg.energies.par_iter().map(|&e| orbit_catalog(&h, e, cfg.grid_res)).collect::<Result<_>>()?;
    for (i, c) in cats.iter().enumerate() {
        write_json(out, &format!("orbits_E{i}.json"), &reformat(&c.to_json()?)?)?;
    }
    Ok(())
}

pub fn trace_check(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.require_energies()?;
    let h0 = model(cfg, cfg.n_list[0])?;
    require_smooth(&h0)?;
    let analytic = h0.is_position_only();
    let specs: Vec<Spectrum> = cfg.n_list.par_iter().map(|&n| spectrum_for(cfg, n)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.energies.len()).flat_map(|i| (0..cfg.n_list.len()).map(move |j| (i, j))).collect();
    let reports = cells
        .par_iter()
        .map(|&(i, j)| {
            let e = cfg.energies[i];
            let n = cfg.n_list[j];
            let g = cfg.geom(n)?;
            let h = model(cfg, n)?;
            let cat = orbit_catalog(&h, e, cfg.grid_res)?;
            let rho = test_function(cfg, &cat)?;
            let r = compare(&specs[j], &cat, &rho, e, &g, cfg.windows.k_max)?;
            let a = if analytic { Some(potential_case_rhs(&h, &rho, e, &g, cfg.windows.k_max)?) } else { None };
            Ok((r, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["E", "N", "hbar", "lhs", "rhs_total", "rel_error"];
    if analytic {
        header.extend(["analytic_rhs", "analytic_rel_error"]);
    }
    let mut csv = Csv::new(&header);
    for (&(i, _), (r, a)) in cells.iter().zip(&reports) {
        write_json(out, &format!("trace_E{i}_N{}.json", r.n), &reformat(&r.to_json()?)?)?;
        let mut row = vec![r.energy.into(), r.n.into(), r.hbar.into(), r.lhs.into(), r.rhs.rhs_total.into(), r.rel_error.into()];
        if let Some(a) = a {
            row.push((*a).into());
            row.push(((r.lhs - a).abs() / r.lhs.abs()).into());
        }
        csv.row(row);
    }
    write_text(out, "trace_convergence.csv", &csv.finish())
}

pub fn bs_check(cfg: &RunConfig, out: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Pred {
        #[serde(rename = "E")]
        e: f64,
        family: usize,
        k: i64,
        maslov: i64,
        residual: f64,
        nearest_eigenvalue: f64,
        distance: f64,
    }
    #[derive(Serialize)]
    struct PerN {
        #[serde(rename = "N")]
        n: usize,
        hbar: f64,
        predictions: Vec<Pred>,
    }
    let specs: Vec<Spectrum> = cfg.n_list.par_iter().map(|&n| spectrum_for(cfg, n)).collect::<Result<_>>()?;
    if !cfg.energies.is_empty() {
        for (&n, spec) in cfg.n_list.iter().zip(&specs) {
            let h = model(cfg, n)?;
            let reports = cfg
                .energies
                .par_iter()
                .map(|&e| bracketing_check(spec, &orbit_catalog(&h, e, cfg.grid_res)?, cfg.windows.r))
                .collect::<Result<Vec<_>>>()?;
            write_text(out, &format!("bs_sweep_N{n}.csv"), &sweep_csv(&reports))?;
            let vals: Vec<Value> = reports.iter().map(|q| reformat(&q.to_json()?)).collect::<Result<_>>()?;
            write_json(out, &format!("bs_reports_N{n}.json"), &vals)?;
        }
    }
    if let Some(window) = cfg.bs.e_window {
        let opts = BsOptions { grid_res: cfg.grid_res, ..BsOptions::default() };
        let per_n = cfg
            .n_list
            .par_iter()
            .zip(&specs)
            .map(|(&n, spec)| {
                let g = cfg.geom(n)?;
                let p = bs_predict_with(&model(cfg, n)?, window, &g, cfg.bs.k_range, &opts)?;
                let predictions = p
                    .into_iter()
                    .map(|q| {
                        let near = spec
                            .eigenvalues()
                            .iter()
                            .copied()
                            .min_by(|a, b| (a - q.energy).abs().total_cmp(&(b - q.energy).abs()))
                            .unwrap();
                        Pred {
                            e: q.energy,
                            family: q.family,
                            k: q.k,
                            maslov: q.maslov,
                            residual: q.residual,
                            nearest_eigenvalue: near,
                            distance: (near - q.energy).abs(),
                        }
                    })
                    .collect();
                Ok(PerN { n, hbar: g.hbar(), predictions })
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(out, "bs_predictions.json", &per_n)?;
    }
    if cfg.energies.is_empty() && cfg.bs.e_window.is_none() {
        return Err(Error::Spec("bs-check needs energies, bs.E_window, or both".into()));
    }
    Ok(())
}

pub fn antiwick_compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    let harper = cfg.model.kind == ModelKind::Harper;
    let rows = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let g = cfg.geom(n)?;
            let h = model(cfg, n)?;
            let weyl = weyl_op(&h, &g)?;
            let aw = anti_wick_op(|x, xi| h.eval(x, xi), &g, cfg.antiwick.n_trunc, cfg.antiwick.quad)?;
            let rel = spectral_norm(&(aw.entries() - weyl.entries())) / weyl.norm2();
            let closed = if harper {
                let cw = cosine_closed_form(&g, 0.0, 1.0, 1.0, false);
                let ca = cosine_closed_form(&g, 0.0, 1.0, 1.0, true);
                let dev = |a: &torus_trace::quantize::HermitianOperator, b: &torus_trace::quantize::HermitianOperator| {
                    a.entries().iter().zip(b.entries().iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
                };
                let d = (dev(&weyl, &cw), dev(&aw, &ca));
                Some((cw, ca, d))
            } else {
                None
            };
            Ok((n, g.hbar(), rel, closed))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["N", "hbar", "rel_norm_diff", "ratio_to_previous", "weyl_closed_dev", "aw_closed_dev"]);
    let mut prev: Option<f64> = None;
    for (n, hbar, rel, closed) in &rows {
        let (dw, da) = closed.as_ref().map_or((None, None), |c| (Some(c.2 .0), Some(c.2 .1)));
        csv.row(vec![(*n).into(), (*hbar).into(), (*rel).into(), prev.map(|p| p / rel).into(), dw.into(), da.into()]);
        prev = Some(*rel);
        if let Some((cw, ca, _)) = closed {
            write_text(out, &format!("harper_weyl_N{n}.csv"), &cw.to_csv())?;
            write_text(out, &format!("harper_antiwick_N{n}.csv"), &ca.to_csv())?;
        }
    }
    write_text(out, "antiwick_compare.csv", &csv.finish())
}

pub fn poisson_check(cfg: &RunConfig, out: &Path) -> Result<()> {
    let rows = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let g = cfg.geom(n)?;
            Ok((n, g.hbar(), poisson_shipped(&g, cfg.poisson.nu)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["N", "hbar", "sum_re", "sum_im", "integral_re", "integral_im", "error"]);
    for (n, hbar, r) in rows {
        csv.row(vec![
            n.into(),
            hbar.into(),
            r.discrete_sum.re.into(),
            r.discrete_sum.im.into(),
            r.integral.re.into(),
            r.integral.im.into(),
            r.error.into(),
        ]);
    }
    write_text(out, "poisson_check.csv", &csv.finish())
}

pub fn propagator(cfg: &RunConfig, out: &Path) -> Result<()> {
    let opts = &cfg.propagator;
    if opts.times.is_empty() {
        return Err(Error::Spec("propagator.times must be nonempty".into()));
    }
    let momentum_only = model(cfg, cfg.n_list[0])?.is_momentum_only();
    let rows = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let g = cfg.geom(n)?;
            let h = model(cfg, n)?;
            let spec = spectrum_for(cfg, n)?;
            opts.times
                .iter()
                .map(|&t| {
                    let tr = propagator_trace(&spec, t);
                    let vv = if momentum_only { Some(van_vleck_row_error(&h, &g, t, opts.row, opts.ratio)?) } else { None };
                    Ok((n, t, tr, vv))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trace = Csv::new(&["N", "t", "trace_re", "trace_im"]);
    let mut vv = Csv::new(&["N", "t", "row", "rms_rel_error", "elements"]);
    for (n, t, tr, v) in rows.into_iter().flatten() {
        trace.row(vec![n.into(), t.into(), tr.re.into(), tr.im.into()]);
        if let Some((err, count)) = v {
            vv.row(vec![n.into(), t.into(), opts.row.into(), err.into(), count.into()]);
        }
    }
    write_text(out, "propagator_trace.csv", &trace.finish())?;
    if momentum_only {
        write_text(out, "van_vleck.csv", &vv.finish())?;
    }
    Ok(())
}
