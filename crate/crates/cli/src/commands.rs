use std::fs;
use std::io::Write;

use log::{info, warn};
use rdim::bounds::{one_shot_bound, eps_search, RdEvaluator};
use rdim::geometry::{
    ball_mass_estimate, eigenvalue_sandwich, graph_chart, grassmannian_cover_rhs, iso_check as certify,
    sample_grassmannian, sine_tangent_check, top_eigenspace, COVER_CONSTANT,
};
use rdim::io::{write_bundle, write_report, write_report_to, MatrixBundle, ReportFormat};
use rdim::linalg::op_norm;
use rdim::network::{forward_with_hooks, layer_gram_spectra, lipschitz_surrogates, FcnModel};
use rdim::pipeline::analyze as run_analysis;
use rdim::trainer::{train, TrainConfig};
use rdim::{Matrix, Rng, Spectrum};

use crate::args::{AnalyzeArgs, GeometryArgs, IsoCheckArgs, SweepArgs, TrainDemoArgs};
use crate::data::{check_input_dim, load_data, load_model, load_source, output};
use crate::Failure;

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let data = load_data(&args.data, args.seed)?;
    check_input_dim(&model, &data)?;
    let cfg = args.bounds.analysis_config();
    let report = run_analysis(&model, &data.inputs, &cfg, &mut Rng::new(args.seed))?;
    info!(
        "eps* = {:.4e}, d_R = {:.4e}, one-shot = {:.4e}",
        report.eps_star, report.d_r_total, report.one_shot_bound
    );
    write_report_to(output(args.out.as_ref())?, &report, args.format.into())?;
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    if args.points < 2 {
        return Err(Failure::Input("--points must be at least 2".into()));
    }
    let model = load_model(&args.model)?;
    let data = load_data(&args.data, args.seed)?;
    check_input_dim(&model, &data)?;
    let cfg = args.bounds.analysis_config();
    cfg.rd.validate()?;
    let n = data.len();
    let feats = forward_with_hooks(&model, &data.inputs)?;
    let spectra = layer_gram_spectra(&feats, cfg.sketch, &mut Rng::new(args.seed))?;
    let lip = lipschitz_surrogates(&model)?;
    let eval = RdEvaluator::new(&spectra, &model, &lip, n, cfg.rd.include_log_terms)?;
    let (lo, hi) = eval.search_range();
    let mut w = csv::Writer::from_writer(output(args.out.as_ref())?);
    w.write_record(["eps", "d_r_total", "d_r_total_no_log_terms", "r_eff_total", "one_shot_bound"])
        .map_err(rdim::Error::from)?;
    for i in 0..args.points {
        let eps = lo * (hi / lo).powf(i as f64 / (args.points - 1) as f64);
        let b = eval.breakdown(eps)?;
        let bound = one_shot_bound(|e| eval.d_r(e), cfg.rd.beta, n, eps)?;
        let ranks: usize = b.per_layer.iter().map(|t| t.r_eff).sum();
        w.write_record([
            eps.to_string(),
            b.d_r_total.to_string(),
            b.d_r_total_no_log_terms.to_string(),
            ranks.to_string(),
            bound.to_string(),
        ])
        .map_err(rdim::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn train_demo(args: &TrainDemoArgs) -> Result<(), Failure> {
    if args.snapshot_every == 0 {
        return Err(Failure::Input("--snapshot-every must be positive".into()));
    }
    if args.widths.iter().any(|&w| w == 0) || args.hidden_layers == 0 {
        return Err(Failure::Input("widths and --hidden-layers must be positive".into()));
    }
    let data = args.synthetic.generate(args.seed)?;
    let cfg = args.bounds.analysis_config();
    fs::create_dir_all(&args.out_dir)?;
    let mut snaps: Vec<usize> = (0..=args.epochs).step_by(args.snapshot_every).collect();
    if snaps.last() != Some(&args.epochs) {
        snaps.push(args.epochs);
    }
    let mut init_rng = Rng::new(args.seed);
    for &width in &args.widths {
        let mut widths = vec![data.inputs.rows()];
        widths.extend(std::iter::repeat(width).take(args.hidden_layers));
        widths.push(data.num_classes);
        let model = FcnModel::kaiming_uniform(&widths, &mut init_rng.split())?;
        let train_cfg = TrainConfig {
            lr: args.lr,
            momentum: args.momentum,
            weight_decay: args.weight_decay,
            epochs: args.epochs,
            batch_size: args.batch_size,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let (trained, snapshots) = train(&model, &data, &train_cfg, &snaps)?;
        write_bundle(
            args.out_dir.join(format!("model_w{width}.rdb")),
            &MatrixBundle::from_model(&trained),
        )?;

        let series = args.out_dir.join(format!("series_w{width}.csv"));
        let mut w = csv::Writer::from_path(&series).map_err(rdim::Error::from)?;
        let mut header = vec!["epoch", "train_error", "train_loss", "eps_star", "d_r_total"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend((1..widths.len()).map(|l| format!("r_eff_{l}")));
        w.write_record(&header).map_err(rdim::Error::from)?;
        for s in &snapshots {
            let report = run_analysis(&s.model, &data.inputs, &cfg, &mut Rng::new(args.seed))?;
            write_report(
                args.out_dir.join(format!("report_w{width}_e{:04}.json", s.epoch)),
                &report,
                ReportFormat::Json,
            )?;
            let mut row = vec![
                s.epoch.to_string(),
                s.train_error.to_string(),
                s.train_loss.to_string(),
                report.eps_star.to_string(),
                report.d_r_total.to_string(),
            ];
            row.extend(report.per_layer.iter().map(|t| t.r_eff.to_string()));
            w.write_record(&row).map_err(rdim::Error::from)?;
            info!(
                "width {width} epoch {}: error {:.3}, d_R {:.4e}",
                s.epoch, s.train_error, report.d_r_total
            );
        }
        w.flush()?;
        println!("{}", series.display());
    }
    Ok(())
}

struct CheckLine {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn geometric_diag(d: usize) -> Vec<f64> {
    (0..d).map(|k| 4.0 * 0.25f64.powi(k as i32)).collect()
}

pub fn geometry_verify(args: &GeometryArgs) -> Result<(), Failure> {
    let (d, r) = (args.d, args.r);
    if d == 0 || d > 8 || r == 0 || r > d {
        return Err(Failure::Input(format!("need 1 <= r <= d <= 8, got d = {d}, r = {r}")));
    }
    if !(args.eps >= 0.0) || args.samples == 0 {
        return Err(Failure::Input("need eps >= 0 and samples >= 1".into()));
    }
    let mut rng = Rng::new(args.seed);
    let mut lines = Vec::new();

    if r < d {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let vbar = sample_grassmannian(d, r, &mut rng)?;
            let scale = rng.uniform_in(-3.0, 2.0).exp();
            let x = rng.normal_matrix(d - r, r, scale);
            let (rho, pred) = sine_tangent_check(&vbar, &x)?;
            worst = worst.max((rho - pred).abs());
        }
        lines.push(CheckLine {
            name: "sine-tangent",
            pass: worst <= 1e-8,
            detail: format!("max |rho - predicted| = {worst:.2e} (tolerance 1e-8)"),
        });
    } else {
        lines.push(CheckLine {
            name: "sine-tangent",
            pass: true,
            detail: "skipped: r = d leaves a single subspace".into(),
        });
    }

    let center = sample_grassmannian(d, r, &mut rng)?;
    for (label, diag) in [("isotropic", vec![1.0; d]), ("anisotropic", geometric_diag(d))] {
        let spectrum = Spectrum::exact(diag.clone())?;
        let sigma = Matrix::from_diag(&diag);
        let mass = ball_mass_estimate(&center, &sigma, args.eps, args.samples, &mut rng)?;
        let name = if label == "isotropic" { "ball mass (isotropic)" } else { "ball mass (anisotropic)" };
        let line = if args.eps == 0.0 || !mass.reliable {
            warn!("{label} ball mass rests on {} hits; estimate unreliable", mass.hits);
            CheckLine {
                name,
                pass: true,
                detail: format!("unreliable: {} hits in {} samples, not checked", mass.hits, mass.samples),
            }
        } else {
            let rhs = grassmannian_cover_rhs(d, r, &spectrum, args.eps, COVER_CONSTANT)?;
            let lhs = mass.log_inv_mass.unwrap_or(f64::INFINITY);
            CheckLine {
                name,
                pass: lhs <= rhs,
                detail: format!("-ln mass = {lhs:.4} <= {rhs:.4} (margin {:.4}, {} hits)", rhs - lhs, mass.hits),
            }
        };
        lines.push(line);
    }

    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for i in 0..200 {
        let a = rng.normal_matrix(d, d, 1.0);
        let sigma = a.matmul_transpose(&a)?.symmetrized()?;
        let v = top_eigenspace(&sigma, r)?;
        let vbar = if i % 2 == 0 && r < d {
            let std = rng.uniform_in(0.01, 0.5);
            graph_chart(&v, &rng.normal_matrix(d - r, r, std))?
        } else {
            sample_grassmannian(d, r, &mut rng)?
        };
        let m = eigenvalue_sandwich(&sigma, &v, &vbar)?;
        let scale = op_norm(&sigma)?;
        let margin = m.upper.min(m.lower) / scale;
        if margin < -1e-10 {
            violations += 1;
        }
        min_margin = min_margin.min(margin);
    }
    lines.push(CheckLine {
        name: "eigenvalue sandwich",
        pass: violations == 0,
        detail: format!("{violations}/200 violations, min relative margin {min_margin:.3e}"),
    });

    let mut out = std::io::stdout().lock();
    for l in &lines {
        writeln!(out, "{}  {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail)?;
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} geometry check(s) failed")));
    }
    Ok(())
}

pub fn iso_check(args: &IsoCheckArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let data = load_data(&args.data, args.seed)?;
    check_input_dim(&model, &data)?;
    let prime_seed = args.prime_seed.unwrap_or(args.seed.wrapping_add(1));
    let (s, sp) = if args.halves {
        let half = data.len() / 2;
        if half == 0 {
            return Err(Failure::Input("--halves needs at least two samples".into()));
        }
        let first: Vec<usize> = (0..half).collect();
        let second: Vec<usize> = (half..2 * half).collect();
        (data.subset(&first), data.subset(&second))
    } else if args.prime_idx_images.is_some() || args.prime_synthetic.is_some() {
        let other = load_source(
            args.prime_idx_images.as_ref(),
            args.prime_idx_labels.as_ref(),
            args.prime_synthetic.as_ref(),
            prime_seed,
        )?;
        (data, other)
    } else {
        (data.clone(), data)
    };
    if s.inputs.shape() != sp.inputs.shape() {
        return Err(Failure::Input(format!(
            "samples must share dimension and size: {}x{} vs {}x{}",
            s.inputs.rows(),
            s.inputs.cols(),
            sp.inputs.rows(),
            sp.inputs.cols()
        )));
    }
    let lip = lipschitz_surrogates(&model)?;
    let fs = forward_with_hooks(&model, &s.inputs)?;
    let fp = forward_with_hooks(&model, &sp.inputs)?;
    let eps = match args.eps {
        Some(e) => e,
        None => {
            let spectra = layer_gram_spectra(&fs, Default::default(), &mut Rng::new(args.seed))?;
            let eval = RdEvaluator::new(&spectra, &model, &lip, s.len(), true)?;
            eps_search(&eval, &Default::default())?
        }
    };
    let cert = certify(&fs, &fp, &model, &lip, eps)?;
    for l in cert.per_layer.iter().filter(|l| l.degenerate) {
        warn!("feature layer {}: no eigenvalue reaches theta = {:.3e}", l.layer, l.theta);
    }
    let mut out = output(args.out.as_ref())?;
    serde_json::to_writer_pretty(&mut out, &cert).map_err(rdim::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
