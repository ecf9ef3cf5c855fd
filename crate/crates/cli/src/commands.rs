use std::io::Write;
use std::path::PathBuf;

use bcd_core::free1d::{
    complex_scaled_eigenvalue_near, complex_scaled_spectrum, find_free_resonances, free_scan, normalize_max,
    resonant_pair_free, FreeSystem, Grid1D, Potential,
};
use bcd_core::greens::{dos_bcd, dos_smearing};
use bcd_core::lattice::band_sweep;
use bcd_core::nep::scan_minima;
use bcd_core::{
    fermi_golden_rule, normalize_residue, refine_resonance, resonant_state_samples, svd_scan_with, trace_map,
    validate_parameters, ComplexEnergyGrid, DefectOperator, Dof, Error, GreenEvaluator, TightBindingModel,
    TraceMode,
};
use num_complex::Complex64;

use crate::output::{num, opt, Run};
use crate::{CliError, Command, RunConfig};

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Bands => bands(cfg),
        Command::Greenmap => greenmap(cfg),
        Command::Dos => dos(cfg),
        Command::Scan => scan(cfg),
        Command::Refine => refine(cfg),
        Command::Free1d => free1d(cfg),
        Command::Validate { rmax, depth } => validate(cfg, *rmax, *depth),
    }
}

fn default_path(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-0.5], vec![0.5]],
        // Gamma, M, K, Gamma for the bundled graphene lattice.
        2 => vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0 / 3.0, -1.0 / 3.0], vec![0.0, 0.0]],
        _ => vec![vec![0.0; 3], vec![0.5, 0.0, 0.0], vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.5], vec![0.0; 3]],
    }
}

fn bands(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model.build()?;
    let d = model.dim();
    let corners = if cfg.bands.path.is_empty() {
        default_path(d)
    } else {
        cfg.bands.path.clone()
    };
    if corners.len() < 2 || corners.iter().any(|c| c.len() != d) {
        return Err(CliError::Config(format!("band path needs at least two {d}-dimensional points")));
    }
    let per = cfg.bands.points_per_segment.max(1);
    let mut path = Vec::new();
    let mut arc = Vec::new();
    let mut s = 0.0;
    for (seg, w) in corners.windows(2).enumerate() {
        let len = w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        for i in usize::from(seg > 0)..=per {
            let t = i as f64 / per as f64;
            path.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect::<Vec<_>>());
            arc.push(s + t * len);
        }
        s += len;
    }
    let data = band_sweep(&model, &path);

    let mut run = Run::new(cfg, "bands")?;
    let mut header = vec!["s".to_string()];
    header.extend((0..d).map(|a| format!("k{a}")));
    header.extend((0..model.n_orbitals()).map(|n| format!("e{n}")));
    let mut w = run.csv("bands.csv", &header)?;
    for ((b, k), s) in data.iter().zip(&path).zip(&arc) {
        let mut row = vec![num(*s)];
        row.extend(k.iter().copied().map(num));
        row.extend(b.energies.iter().copied().map(num));
        w.write_record(&row)?;
    }
    w.flush()?;
    let lo = data.iter().flat_map(|b| b.energies.first()).copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().flat_map(|b| b.energies.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    run.result("points", path.len());
    run.result("energy_min", lo);
    run.result("energy_max", hi);
    run.finish()
}

fn window_grid(cfg: &RunConfig) -> Result<ComplexEnergyGrid, CliError> {
    let w = cfg
        .window
        .ok_or_else(|| CliError::Config("this command needs --window re_min,re_max,im_min,im_max".into()))?;
    Ok(ComplexEnergyGrid::new(w.re(), w.im(), cfg.resolution[0], cfg.resolution[1])?)
}

/// Evaluator and map mode from the deformation settings. Adaptive maps start
/// from the window centre and retarget per column.
fn map_evaluator(
    cfg: &RunConfig,
    model: TightBindingModel,
    grid: &ComplexEnergyGrid,
) -> Result<(GreenEvaluator, TraceMode), CliError> {
    let d = &cfg.deformation;
    let centre = 0.5 * (grid.re_min + grid.re_max);
    Ok(if d.adaptive {
        let e = d.energy.unwrap_or(centre);
        (GreenEvaluator::deformed(model, d.params(e)?, cfg.nk)?, TraceMode::AdaptiveEnergy)
    } else if let Some(e) = d.energy {
        (GreenEvaluator::deformed(model, d.params(e)?, cfg.nk)?, TraceMode::FixedEnergy)
    } else {
        (GreenEvaluator::undeformed(model, cfg.nk)?, TraceMode::FixedEnergy)
    })
}

fn mode_name(ev: &GreenEvaluator, mode: TraceMode) -> &'static str {
    match mode {
        TraceMode::AdaptiveEnergy => "adaptive",
        TraceMode::FixedEnergy if ev.field().is_trivial() => "undeformed",
        TraceMode::FixedEnergy => "fixed",
    }
}

fn greenmap(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let grid = window_grid(cfg)?;
    let (ev, mode) = map_evaluator(cfg, cfg.model.build()?, &grid)?;
    let nodes = trace_map(&ev, &grid, mode)?;

    let mut run = Run::new(cfg, "greenmap")?;
    run.warn(ev.warnings());
    let header = ["re", "im", "trace_re", "trace_im"].map(String::from);
    let mut w = run.csv("greenmap.csv", &header)?;
    let mut masked = 0;
    for n in &nodes {
        masked += usize::from(n.value.is_none());
        w.write_record([num(n.z.re), num(n.z.im), opt(n.value.map(|v| v.re)), opt(n.value.map(|v| v.im))])?;
    }
    w.flush()?;
    run.result("mode", mode_name(&ev, mode));
    run.result("nodes", nodes.len());
    run.result("masked", masked);
    run.finish()
}

fn dos(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model.build()?;
    let [lo, hi] = cfg.dos.energies;
    let count = cfg.dos.count.max(2);
    let mut run = Run::new(cfg, "dos")?;
    let header = ["energy", "dos_bcd", "dos_smearing"].map(String::from);
    let mut w = run.csv("dos.csv", &header)?;
    let mut failed = 0;
    for i in 0..count {
        let e = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let params = cfg.deformation.params(e)?;
        let bcd = match dos_bcd(&model, e, params, cfg.nk) {
            Ok((v, warnings)) => {
                run.warn(&warnings);
                Some(v)
            }
            // Exactly on the discrete spectrum (flat bands, undeformable
            // points): leave the cell empty.
            Err(err) if err.is_numerical() => {
                failed += 1;
                None
            }
            Err(err) => return Err(err.into()),
        };
        let smear = dos_smearing(&model, e, cfg.dos.eta, cfg.nk)?;
        w.write_record([num(e), opt(bcd), num(smear)])?;
    }
    w.flush()?;
    run.result("points", count);
    run.result("bcd_failed", failed);
    run.finish()
}

fn build_defect(cfg: &RunConfig, model: &TightBindingModel) -> Result<DefectOperator, CliError> {
    cfg.defect
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --defect".into()))?
        .build(model)
}

fn scan(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model.build()?;
    let defect = build_defect(cfg, &model)?;
    let grid = window_grid(cfg)?;
    let (ev, mode) = map_evaluator(cfg, model, &grid)?;
    let nodes = svd_scan_with(&ev, &defect, &grid, mode)?;

    let mut run = Run::new(cfg, "scan")?;
    run.warn(ev.warnings());
    let mut w = run.csv("scan.csv", &["re", "im", "log10_sigma_min"].map(String::from))?;
    for n in &nodes {
        w.write_record([num(n.z.re), num(n.z.im), opt(n.value)])?;
    }
    w.flush()?;
    let minima = scan_minima(&grid, &nodes);
    let mut w = run.csv("scan_minima.csv", &["re", "im", "log10_sigma_min"].map(String::from))?;
    for (z, v) in &minima {
        w.write_record([num(z.re), num(z.im), num(*v)])?;
    }
    w.flush()?;
    run.result("mode", mode_name(&ev, mode));
    run.result("masked", nodes.iter().filter(|n| n.value.is_none()).count());
    run.result("minima", minima.len());
    run.finish()
}

fn window_cells(dim: usize) -> Vec<Vec<i64>> {
    let r: i64 = match dim {
        1 => 10,
        2 => 4,
        _ => 2,
    };
    let mut cells = vec![vec![]];
    for _ in 0..dim {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                (-r..=r).map(move |x| {
                    let mut c = c.clone();
                    c.push(x);
                    c
                })
            })
            .collect();
    }
    cells
}

fn refine(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model.build()?;
    let defect = build_defect(cfg, &model)?;
    let seeds = cfg.seeds_complex();
    if seeds.is_empty() {
        return Err(CliError::Config("refine needs at least one --seed-z".into()));
    }
    let normalizable = model.is_real() && defect.is_real();
    let mut run = Run::new(cfg, "refine")?;
    let header = [
        "seed_re",
        "seed_im",
        "z_re",
        "z_im",
        "sigma_min",
        "sigma_second",
        "iterations",
        "residual",
        "scale_re",
        "scale_im",
        "status",
    ]
    .map(String::from);
    let mut w = run.csv("refine.csv", &header)?;
    let mut first_failure: Option<Error> = None;
    let mut states = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        let energy = cfg.deformation.energy.unwrap_or(seed.re);
        let ev = GreenEvaluator::deformed(model.clone(), cfg.deformation.params(energy)?, cfg.nk)?;
        run.warn(ev.warnings());
        let result = refine_resonance(&ev, &defect, *seed).and_then(|r| {
            if normalizable {
                normalize_residue(&ev, &defect, &r)
            } else {
                Ok(r)
            }
        });
        match result {
            Ok(r) => {
                let scale = r.residue_scale;
                w.write_record([
                    num(seed.re),
                    num(seed.im),
                    num(r.z0.re),
                    num(r.z0.im),
                    num(r.sigma_min),
                    num(r.sigma_second),
                    r.newton_iters.to_string(),
                    num(r.residual),
                    opt(scale.map(|s| s.re)),
                    opt(scale.map(|s| s.im)),
                    "ok".into(),
                ])?;
                let samples = resonant_state_samples(&ev, &defect, &r, &window_cells(model.dim()))?;
                states.push((i, samples));
                if i == 0 {
                    if let Some(fgr) = golden_rule(&ev, &defect)? {
                        run.result("fermi_golden_rule", fgr);
                    }
                }
            }
            Err(e) if e.is_numerical() => {
                let mut row = vec![num(seed.re), num(seed.im)];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.name().into());
                w.write_record(&row)?;
                first_failure.get_or_insert(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    for (i, samples) in states {
        write_state(&mut run, &model, &defect, i, &samples)?;
    }
    run.result("seeds", seeds.len());
    let written = run.finish()?;
    match first_failure {
        Some(e) => Err(e.into()),
        None => Ok(written),
    }
}

fn golden_rule(ev: &GreenEvaluator, defect: &DefectOperator) -> Result<Option<Complex64>, CliError> {
    match fermi_golden_rule(ev, defect) {
        Ok(v) => Ok(Some(v)),
        Err(Error::PatternMismatch(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn write_state(
    run: &mut Run,
    model: &TightBindingModel,
    defect: &DefectOperator,
    index: usize,
    samples: &std::collections::BTreeMap<Dof, Complex64>,
) -> Result<(), CliError> {
    let d = model.dim();
    let mut header = vec!["kind".to_string(), "cell".into(), "orbital".into()];
    header.extend((0..d).map(|a| format!("x{a}")));
    header.extend(["re", "im", "abs"].map(String::from));
    let mut w = run.csv(&format!("state_{index}.csv"), &header)?;
    for (dof, v) in samples {
        let (kind, cell, orbital, pos) = match dof {
            Dof::Lattice { cell, orbital } => ("lattice", cell.clone(), *orbital, model.cartesian_position(cell, *orbital)),
            Dof::Extra(k) => {
                // Drawn on top of the first orbital it couples to.
                let (cell, orb) = defect.extra_sites()[*k].couplings.keys().next().cloned().unwrap_or((vec![0; d], 0));
                ("extra", cell.clone(), *k, model.cartesian_position(&cell, orb))
            }
        };
        let cell_s = cell.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let mut row = vec![kind.to_string(), cell_s, orbital.to_string()];
        row.extend(pos.into_iter().map(num));
        row.extend([num(v.re), num(v.im), num(v.norm())]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn free1d(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let f = &cfg.free1d;
    let potential = Potential::from_name(&f.potential)?;
    let first = FreeSystem::new(Grid1D::new(f.box_length, f.step)?, potential);
    let second = FreeSystem::new(Grid1D::new(f.check_length, f.step)?, potential);
    let window = cfg.window.map_or(([0.05, 2.5], [-1.5, 0.05]), |w| ([w.0[0], w.0[1]], [w.0[2], w.0[3]]));
    let grid = ComplexEnergyGrid::new(
        (window.0[0], window.0[1]),
        (window.1[0], window.1[1]),
        cfg.resolution[0],
        cfg.resolution[1],
    )?;

    let mut run = Run::new(cfg, "free1d")?;
    let nodes = free_scan(&first, &grid);
    let mut w = run.csv("free1d_scan.csv", &["re", "im", "log10_sigma_min"].map(String::from))?;
    for n in &nodes {
        w.write_record([num(n.z.re), num(n.z.im), opt(n.value)])?;
    }
    w.flush()?;

    let found = find_free_resonances(&first, &second, &grid);
    let header = ["re", "im", "box_drift", "residual", "scaled_re", "scaled_im"].map(String::from);
    let mut w = run.csv("free1d_resonances.csv", &header)?;
    let mut pairs = Vec::new();
    for r in &found {
        let cs = complex_scaled_eigenvalue_near(first.grid(), potential, f.theta, r.z).ok();
        w.write_record([
            num(r.z.re),
            num(r.z.im),
            opt(r.drift),
            num(r.residual),
            opt(cs.map(|z| z.re)),
            opt(cs.map(|z| z.im)),
        ])?;
        pairs.push(resonant_pair_free(&first, r.z)?);
    }
    w.flush()?;

    let mut header = vec!["x".to_string(), "potential".into()];
    for i in 0..found.len() {
        header.extend(["phi", "psi"].iter().flat_map(|p| [format!("{p}{i}_re"), format!("{p}{i}_im")]));
    }
    let mut w = run.csv("free1d_states.csv", &header)?;
    let scaled: Vec<_> = pairs.iter().map(|(phi, psi)| (normalize_max(phi), normalize_max(psi))).collect();
    for (j, x) in first.nodes().iter().enumerate() {
        let mut row = vec![num(*x), num(potential.eval_real(*x))];
        for (phi, psi) in &scaled {
            row.extend([num(phi[j].re), num(phi[j].im), num(psi[j].re), num(psi[j].im)]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let spectrum = complex_scaled_spectrum(first.grid(), potential, f.theta)?;
    let mut w = run.csv("free1d_scaled_spectrum.csv", &["re", "im"].map(String::from))?;
    for z in &spectrum {
        w.write_record([num(z.re), num(z.im)])?;
    }
    w.flush()?;
    run.result("resonances", found.len());
    run.finish()
}

fn validate(cfg: &RunConfig, rmax: f64, depth: f64) -> Result<Vec<PathBuf>, CliError> {
    let model = cfg.model.build()?;
    let energy = cfg
        .deformation
        .energy
        .ok_or_else(|| CliError::Config("validate needs --energy".into()))?;
    let params = cfg.deformation.params(energy)?;
    let report = validate_parameters(&model, &params, cfg.nk, rmax, depth);
    let _ = writeln!(std::io::stdout(), "{report}");

    let mut run = Run::new(cfg, "validate")?;
    let header = ["rule", "status", "small", "large", "factor"].map(String::from);
    let mut w = run.csv("validate.csv", &header)?;
    for r in &report.rules {
        w.write_record([r.rule.to_string(), r.status.to_string(), num(r.small), num(r.large), num(r.ratio)])?;
    }
    w.flush()?;
    run.result("worst", report.worst());
    run.result("fermi_points", report.fermi_points);
    run.result(
        "van_hove",
        report.van_hove.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(" "),
    );
    run.finish()
}
