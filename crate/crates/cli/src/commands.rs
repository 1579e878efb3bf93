use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use resonator_core::circle_fit::{fit_trace, monte_carlo_uncertainty, DelayMode, FitOptions};
use resonator_core::constants::H_PLANCK;
use resonator_core::inductance::{
    alpha_from_fr, characteristic_impedance, lk_from_alpha, sheet_inductance_fit, CapacitanceTable, StripPoint,
};
use resonator_core::io::config::DeviceConfig;
use resonator_core::io::units::{attenuate, parse_quantity, Dimension};
use resonator_core::io::{
    parse_table, parse_trace, write_table, write_trace, AnalysisConfig, DeviceReport, Provenance, ReportBundle,
};
use resonator_core::io::report::sha256_hex;
use resonator_core::jja::{infer_array, kerr_from_power_sweep, SweepPoint};
use resonator_core::loss::{package_loss, residual_loss, tls_fit, total_internal_loss, LossPoint};
use resonator_core::mattis_bardeen::{fit_tc, freq_shift_vs_temperature, MbSettings};
use resonator_core::model::{bcs_gap, charging_energy};
use resonator_core::qp::{fit_burst, rates_from_fit, steady_state_xqp, trace_to_xqp, BurstFitOptions};
use resonator_core::s21::{photon_number, s21_at, Environment};
use resonator_core::synth::{gen_burst, gen_power_sweep, gen_temp_sweep, gen_trace, GroundTruth, Scenario};
use resonator_core::{DeviceGeometry, Error, HangerParams, Result};

use crate::{
    Cli, Command, FitS21Args, KerrArgs, PowerSweepArgs, QpArgs, ReportArgs, SheetArgs, SimKind, SimulateArgs, TcArgs,
};

type Table = (Vec<&'static str>, Vec<Vec<f64>>);

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::FitS21(a) => fit_s21(cli, a),
        Command::PowerSweep(a) => power_sweep(cli, a),
        Command::SheetInductance(a) => sheet_inductance(cli, a),
        Command::Kerr(a) => kerr(cli, a),
        Command::LossBudget => loss_budget(cli),
        Command::QpBurst(a) => qp_burst(cli, a),
        Command::TcFit(a) => tc_fit(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn q(key: &str, text: &str, dim: Dimension) -> Result<f64> {
    parse_quantity(key, text, dim)
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(key.into()))
}

struct Session {
    provenance: Provenance,
    config: Option<AnalysisConfig>,
}

impl Session {
    fn new(cli: &Cli, command: &str) -> Result<Self> {
        let mut provenance = Provenance {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            ..Default::default()
        };
        let config = match &cli.config {
            Some(path) => {
                let text = read_bytes(path)?;
                provenance.config_hash = Some(sha256_hex(&text));
                let cfg = AnalysisConfig::load(path)?;
                provenance.seed = cfg.seed;
                Some(cfg)
            }
            None => None,
        };
        Ok(Self { provenance, config })
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = read_bytes(path)?;
        self.provenance.inputs.insert(file_label(path), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|_| Error::Parse { line: 0, msg: format!("{} is not UTF-8", path.display()) })
    }

    fn fit_options(&self, delay: Option<&String>) -> Result<FitOptions> {
        let mut opts = self.config.as_ref().map(|c| c.fit).unwrap_or_default();
        if let Some(d) = delay {
            opts.delay = parse_delay(d)?;
        }
        Ok(opts)
    }

    fn devices(&self) -> &[DeviceConfig] {
        self.config.as_ref().map_or(&[], |c| &c.devices)
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn device_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned())
}

fn parse_delay(text: &str) -> Result<DelayMode> {
    match text.trim() {
        "auto" => Ok(DelayMode::Auto),
        "off" => Ok(DelayMode::Off),
        t => Ok(DelayMode::Fixed(q("delay", t, Dimension::Time)?)),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn finish(cli: &Cli, bundle: &ReportBundle, plot: Option<Table>) -> Result<()> {
    write_text(cli.out.as_deref(), &bundle.to_json()?)?;
    if let Some(path) = &cli.csv {
        let f = fs::File::create(path)?;
        match plot {
            Some((header, rows)) => write_table(f, &header, &rows)?,
            None => bundle.write_csv(f)?,
        }
    }
    Ok(())
}

/// Adds `truth_<k>` and the relative (or, for a zero truth, absolute) error
/// for every fitted value the generator recorded.
fn compare_truth(dev: &mut DeviceReport, meta: &BTreeMap<String, String>, fitted: &[(&str, f64)]) {
    let Ok(truth) = GroundTruth::from_meta(meta) else { return };
    compare_with(dev, &truth, fitted);
}

fn compare_with(dev: &mut DeviceReport, truth: &GroundTruth, fitted: &[(&str, f64)]) {
    for (k, v) in fitted {
        if let Some(t) = truth.get(k) {
            dev.set(&format!("truth_{k}"), t);
            if t != 0.0 {
                dev.set(&format!("rel_err_{k}"), (v - t) / t);
            } else {
                dev.set(&format!("abs_err_{k}"), v - t);
            }
        }
    }
}

fn hanger_values(p: &HangerParams) -> [(&'static str, f64); 4] {
    [("f_r", p.f_r), ("q_int", p.q_int), ("q_c_mag", p.q_c_mag), ("phi", p.phi)]
}

fn fit_s21(cli: &Cli, a: &FitS21Args) -> Result<()> {
    let mut s = Session::new(cli, "fit-s21")?;
    let opts = s.fit_options(a.delay.as_ref())?;
    let text = s.read(&a.input)?;
    let mut trace = parse_trace(&text)?;
    if let Some(p) = &a.power {
        let source = q("power", p, Dimension::Power)?;
        let att = s.config.as_ref().map_or(0.0, |c| c.attenuation_db);
        trace.power_in = Some(attenuate(source, att));
    }
    let fit = fit_trace(&trace, &opts)?;

    let mut dev = DeviceReport::new(&device_name(&a.input));
    dev.fits.push(fit.report.clone());
    dev.set("linewidth", fit.params.linewidth());
    dev.set("linewidths_spanned", fit.linewidths_spanned);
    dev.set("circle_radius", fit.circle.radius);
    if let Some(n) = fit.report.photon_number {
        dev.set("n_bar", n);
    }
    if let Some(p) = trace.power_in {
        dev.set("power_in", p);
    }
    for w in &fit.report.warnings {
        dev.flag(w.clone());
    }
    compare_truth(&mut dev, &trace.meta, &hanger_values(&fit.params));
    if let Some(draws) = a.mc_draws {
        s.provenance.seed = Some(a.seed);
        for e in monte_carlo_uncertainty(&trace, &fit, &opts, draws, a.seed)? {
            dev.set(&e.name, e.value);
            if let Some(sig) = e.sigma {
                dev.set(&format!("{}_sigma", e.name), sig);
            }
        }
    }

    let freqs = trace.freqs().unwrap_or(&[]);
    let rows = freqs
        .iter()
        .zip(&trace.values)
        .map(|(&f, z)| {
            let m = fit.environment.factor(f) * s21_at(&fit.params, f);
            vec![f, z.re, z.im, m.re, m.im]
        })
        .collect();
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices.push(dev);
    finish(cli, &bundle, Some((vec!["freq_hz", "re", "im", "model_re", "model_im"], rows)))
}

fn power_sweep(cli: &Cli, a: &PowerSweepArgs) -> Result<()> {
    let mut s = Session::new(cli, "power-sweep")?;
    let opts = s.fit_options(a.delay.as_ref())?;
    let mut dev = DeviceReport::new("power_sweep");
    let mut points = Vec::new();
    let mut truth = None;
    for path in &a.inputs {
        let text = s.read(path)?;
        let trace = parse_trace(&text)?;
        let power = trace
            .power_in
            .ok_or_else(|| Error::MissingKey(format!("power_in_w in {}", path.display())))?;
        let fit = fit_trace(&trace, &opts)?;
        let n_bar = photon_number(&fit.params, power)?;
        for w in &fit.report.warnings {
            dev.flag(format!("{}: {w}", file_label(path)));
        }
        let sigma_f = fit.report.get("f_r").and_then(|e| e.sigma);
        points.push((SweepPoint { n_bar, f_r: fit.params.f_r, sigma_f }, fit.params));
        dev.fits.push(fit.report);
        if truth.is_none() {
            truth = GroundTruth::from_meta(&trace.meta).ok();
        }
    }
    points.sort_by(|x, y| x.0.n_bar.total_cmp(&y.0.n_bar));
    let sweep: Vec<SweepPoint> = points.iter().map(|p| p.0).collect();
    let k = kerr_from_power_sweep(&sweep)?;
    dev.set("kerr", k.k).set("kerr_sigma", k.k_sigma).set("f_0", k.f_0);
    if let Some(t) = &truth {
        compare_with(&mut dev, t, &[("kerr", k.k)]);
    }

    let losses: Vec<LossPoint> =
        points.iter().map(|(sp, p)| LossPoint { n_bar: sp.n_bar, inv_q: 1.0 / p.q_int, sigma: None }).collect();
    match tls_fit(&losses) {
        Ok(t) => {
            dev.set("tls_q0", t.model.q0).set("single_photon_q", t.single_photon_q);
            if t.constant_only {
                dev.flag("no resolvable TLS saturation; constant loss reported");
            } else {
                dev.set("tls_loss", t.model.tls_loss).set("tls_n_c", t.model.n_c).set("tls_beta", t.model.beta);
            }
            if !t.converged {
                dev.flag("TLS fit did not converge");
            }
        }
        Err(e) => {
            dev.flag(format!("TLS fit skipped: {e}"));
        }
    }

    let rows = points.iter().map(|(sp, p)| vec![sp.n_bar, sp.f_r, p.q_int, p.q_c_mag]).collect();
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices.push(dev);
    finish(cli, &bundle, Some((vec!["n_bar", "f_r", "q_int", "q_c_mag"], rows)))
}

/// Kinetic inductance of a configured device: from `alpha`, from
/// `f_r`, `l_g`, `c_s`, or from `l_sq` times the strip squares.
fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::invalid(&path.display().to_string(), &e.to_string()))
}

fn device_lk(d: &DeviceConfig) -> Result<Option<(f64, Option<f64>)>> {
    if let (Some(alpha), Some(l_g)) = (d.alpha, d.l_g) {
        return Ok(Some((lk_from_alpha(alpha, l_g)?, Some(alpha))));
    }
    if let (Some(f_r), Some(l_g), Some(c_s)) = (d.f_r, d.l_g, d.c_s) {
        let alpha = alpha_from_fr(f_r, l_g, c_s)?;
        return Ok(Some((lk_from_alpha(alpha, l_g)?, Some(alpha))));
    }
    if let (Some(l_sq), Some(l), Some(w)) = (d.l_sq, d.l_strip, d.w_strip) {
        return Ok(Some((l_sq * l / w, None)));
    }
    Ok(None)
}

fn sheet_inductance(cli: &Cli, a: &SheetArgs) -> Result<()> {
    let mut s = Session::new(cli, "sheet-inductance")?;
    let mut bundle_devices = Vec::new();
    let mut points = Vec::new();
    let mut widths = Vec::new();
    match &a.input {
        Some(path) => {
            let text = s.read(path)?;
            let has_sigma = text
                .lines()
                .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .is_some_and(|h| h.split(',').any(|c| c.trim().eq_ignore_ascii_case("sigma")));
            let cols: &[&str] = if has_sigma { &["n_sq", "l_k", "sigma"] } else { &["n_sq", "l_k"] };
            for r in parse_table(&text, cols)? {
                points.push(StripPoint { n_sq: r[0], l_k: r[1], sigma: r.get(2).copied() });
            }
        }
        None => {
            for d in s.devices() {
                let (Some(l), Some(w)) = (d.l_strip, d.w_strip) else { continue };
                let Some((l_k, alpha)) = device_lk(d)? else { continue };
                let mut dev = DeviceReport::new(&d.name);
                if let Some(al) = alpha {
                    dev.set("alpha", al);
                }
                dev.set("l_k", l_k).set("n_sq", l / w);
                points.push(StripPoint { n_sq: l / w, l_k, sigma: None });
                widths.push(w);
                bundle_devices.push(dev);
            }
            if points.is_empty() {
                return Err(Error::MissingKey(
                    "--in table or config devices with l_strip, w_strip and an inductance source".into(),
                ));
            }
        }
    }
    let fit = sheet_inductance_fit(&points)?;
    let table = CapacitanceTable::coaxial_tunnel();
    for (dev, w) in bundle_devices.iter_mut().zip(&widths) {
        let c0 = table.c0(*w);
        dev.set("c0", c0);
        dev.set("z0", characteristic_impedance(fit.l_sq, *w, c0)?);
    }
    let mut summary = DeviceReport::new("sheet");
    summary
        .set("l_sq", fit.l_sq)
        .set("l_sq_sigma", fit.l_sq_sigma())
        .set("intercept", fit.intercept)
        .set("intercept_sigma", fit.covariance[1][1].sqrt());
    if points.len() == 2 {
        summary.flag("two strips: the line passes through both points and the uncertainty is not meaningful");
    }
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices = bundle_devices;
    bundle.devices.push(summary);
    let rows = points.iter().map(|p| vec![p.n_sq, p.l_k, fit.l_sq * p.n_sq + fit.intercept]).collect();
    finish(cli, &bundle, Some((vec!["n_sq", "l_k", "model_l_k"], rows)))
}

struct KerrInput {
    name: String,
    kerr: f64,
    c_s: f64,
    l_k: f64,
    p_strip: f64,
    geometry: DeviceGeometry,
}

fn kerr(cli: &Cli, a: &KerrArgs) -> Result<()> {
    let s = Session::new(cli, "kerr")?;
    let mut inputs = Vec::new();
    if let Some(k) = &a.kerr {
        use Dimension::*;
        inputs.push(KerrInput {
            name: "cli".into(),
            kerr: q("kerr", k, Frequency)?,
            c_s: q("c_s", &need(a.c_s.clone(), "--c-s")?, Capacitance)?,
            l_k: q("l_k", &need(a.l_k.clone(), "--l-k")?, Inductance)?,
            p_strip: q("p_strip", &a.p_strip, Dimensionless)?,
            geometry: DeviceGeometry {
                l_strip: q("l_strip", &need(a.l_strip.clone(), "--l-strip")?, Length)?,
                w_strip: q("w_strip", &need(a.w_strip.clone(), "--w-strip")?, Length)?,
                thickness: q("thickness", &need(a.thickness.clone(), "--thickness")?, Length)?,
            },
        });
    } else {
        for d in s.devices() {
            let Some(k) = d.kerr else { continue };
            let key = |f: &str| format!("device.{}.{f}", d.name);
            let l_k = need(device_lk(d)?, &key("alpha"))?.0;
            inputs.push(KerrInput {
                name: d.name.clone(),
                kerr: k,
                c_s: need(d.c_s, &key("c_s"))?,
                l_k,
                p_strip: d.p_strip.unwrap_or(1.0),
                geometry: DeviceGeometry {
                    l_strip: need(d.l_strip, &key("l_strip"))?,
                    w_strip: need(d.w_strip, &key("w_strip"))?,
                    thickness: need(d.thickness, &key("thickness"))?,
                },
            });
        }
        if inputs.is_empty() {
            return Err(Error::MissingKey("--kerr or config devices with kerr".into()));
        }
    }
    let mut bundle = ReportBundle::new(s.provenance);
    for k in inputs {
        let e_c = charging_energy(k.c_s);
        let m = infer_array(k.kerr, k.p_strip, e_c, k.l_k, &k.geometry)?;
        let mut dev = DeviceReport::new(&k.name);
        dev.set("e_c_over_h", e_c / H_PLANCK)
            .set("k_measured", m.k_measured)
            .set("k_strip", m.k_strip)
            .set("n_jj", m.n_jj)
            .set("a_eff", m.a_eff)
            .set("l_j", m.l_j)
            .set("i_c", m.i_c)
            .set("j_c", m.j_c)
            .set("j_c_a_per_cm2", m.j_c * 1e-4);
        bundle.devices.push(dev);
    }
    finish(cli, &bundle, None)
}

fn loss_budget(cli: &Cli) -> Result<()> {
    let s = Session::new(cli, "loss-budget")?;
    let cfg = need(s.config.as_ref(), "--config")?;
    let ledger = need(cfg.loss, "[loss] section")?;
    let pkg = package_loss(&ledger)?;
    let mut package = DeviceReport::new("package");
    package
        .set("surface", pkg.surface)
        .set("conductor", pkg.conductor)
        .set("seam", pkg.seam)
        .set("total", pkg.total);
    if pkg.total > 0.0 {
        package.set("q_pkg", pkg.q_pkg());
    }
    let int = total_internal_loss(&ledger)?;
    let mut internal = DeviceReport::new("internal");
    internal
        .set("bulk", int.bulk)
        .set("surface", int.surface)
        .set("inductive_and_contact", int.inductive_and_contact)
        .set("total", int.total);
    if let Some(sp) = ledger.split {
        internal.set("inductive", sp.q_ind_inv).set("contact", sp.q_contact_inv);
    }
    let mut devices = vec![package];
    if int.total > 0.0 {
        internal.set("q_int", int.q_int());
        devices.push(internal);
    }
    for d in &cfg.devices {
        let (Some(qi), Some(qb)) = (d.q_int, d.q_bulk) else { continue };
        let r = residual_loss(qi, qb)?;
        let mut dev = DeviceReport::new(&d.name);
        dev.set("q_int", qi).set("q_bulk", qb).set("q_res_inv", r.q_res_inv);
        if r.negative {
            dev.flag("negative residual loss: q_int exceeds the bulk limit");
        } else {
            dev.set("q_res", 1.0 / r.q_res_inv);
        }
        devices.push(dev);
    }
    let mut bundle = ReportBundle::new(s.provenance.clone());
    bundle.devices = devices;
    finish(cli, &bundle, None)
}

fn qp_burst(cli: &Cli, a: &QpArgs) -> Result<()> {
    use Dimension::*;
    let mut s = Session::new(cli, "qp-burst")?;
    let alpha = q("alpha", &a.alpha, Dimensionless)?;
    let (params, env): (HangerParams, Option<Environment>) = match &a.reference {
        Some(path) => {
            let opts = s.fit_options(None)?;
            let text = s.read(path)?;
            let fit = fit_trace(&parse_trace(&text)?, &opts)?;
            (fit.params, Some(fit.environment))
        }
        None => {
            let p = HangerParams::new(
                q("f_r", &need(a.f_r.clone(), "--f-r or --reference")?, Frequency)?,
                q("q_int", &need(a.q_int.clone(), "--q-int")?, Dimensionless)?,
                q("q_c", &need(a.q_c.clone(), "--q-c")?, Dimensionless)?,
                q("phi", &a.phi, Dimensionless)?,
            )?;
            (p, None)
        }
    };
    let text = s.read(&a.input)?;
    let trace = parse_trace(&text)?;
    let series = trace_to_xqp(&trace, &params, alpha, env.as_ref())?;
    let opts = BurstFitOptions { mask: q("mask", &a.mask, Time)?, ..Default::default() };
    let model = fit_burst(&series, &opts)?;

    let mut dev = DeviceReport::new(&device_name(&a.input));
    dev.set("tau_ss", model.tau_ss)
        .set("tau_ss_sigma", model.tau_sigma)
        .set("x_i", model.x_i)
        .set("x_i_sigma", model.x_i_sigma)
        .set("r_prime", model.r_prime)
        .set("r_prime_sigma", model.r_prime_sigma)
        .set("t_peak", model.t_peak)
        .set("baseline", model.baseline)
        .set("baseline_sigma", model.baseline_sigma)
        .set("n_points", model.n_points as f64)
        .set("dropped_points", series.dropped.len() as f64);
    for w in &model.warnings {
        dev.flag(w.clone());
    }
    if !model.converged {
        dev.flag("burst fit did not converge");
    }
    compare_truth(&mut dev, &trace.meta, &[("tau_ss", model.tau_ss), ("x_i", model.x_i), ("r_prime", model.r_prime)]);

    let x0 = match (&a.x0, &a.q_res, &a.t_c) {
        (Some(x), _, _) => Some(q("x0", x, Dimensionless)?),
        (None, Some(qr), Some(tc)) => Some(steady_state_xqp(
            alpha,
            q("q_res", qr, Dimensionless)?,
            params.f_r,
            bcs_gap(q("t_c", tc, Temperature)?),
        )?),
        (None, Some(_), None) => return Err(Error::MissingKey("--t-c (needed with --q-res)".into())),
        _ => None,
    };
    match x0 {
        Some(x0) => {
            let r = rates_from_fit(model.tau_ss, model.x_i, model.r_prime, x0)?;
            dev.set("x0", r.x0)
                .set("r", r.r)
                .set("s", r.s)
                .set("g", r.g)
                .set("consistency_residual", r.consistency_residual);
            dev.flag("x0 is an upper bound; r and s inherit that caveat");
            for w in r.warnings {
                dev.flag(w);
            }
        }
        None => {
            dev.flag("no steady-state density given; rates not computed");
        }
    }

    let rows = series
        .t
        .iter()
        .zip(&series.dx)
        .map(|(&t, &dx)| {
            let m = if t >= model.t_peak { model.baseline + model.eval(t - model.t_peak) } else { model.baseline };
            vec![t, dx, m]
        })
        .collect();
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices.push(dev);
    finish(cli, &bundle, Some((vec!["t_s", "dx", "model"], rows)))
}

fn table_meta(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .take_while(|l| l.is_empty() || l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn tc_fit(cli: &Cli, a: &TcArgs) -> Result<()> {
    let mut s = Session::new(cli, "tc-fit")?;
    let f_r = q("f_r", &a.f_r, Dimension::Frequency)?;
    let alpha = q("alpha", &a.alpha, Dimension::Dimensionless)?;
    let text = s.read(&a.input)?;
    let rows = parse_table(&text, &["t_k", "delta_f_hz"])?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let settings = MbSettings::default();
    let fit = fit_tc(&points, f_r, alpha, a.offset, &settings)?;

    let mut dev = DeviceReport::new(&device_name(&a.input));
    dev.set("t_c", fit.t_c).set("t_c_sigma", fit.t_c_sigma).set("residual_rms", fit.residual_rms);
    if let Some(o) = fit.offset {
        dev.set("offset", o);
    }
    if let Some(o) = fit.offset_sigma {
        dev.set("offset_sigma", o);
    }
    compare_truth(&mut dev, &table_meta(&text), &[("t_c", fit.t_c)]);

    let temps: Vec<f64> = points.iter().map(|p| p.0).collect();
    let model = freq_shift_vs_temperature(&temps, f_r, alpha, fit.t_c, &settings)?;
    let off = fit.offset.unwrap_or(0.0);
    let plot = points.iter().zip(&model).map(|(p, m)| vec![p.0, p.1, m.delta_f + off]).collect();
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices.push(dev);
    finish(cli, &bundle, Some((vec!["t_k", "delta_f_hz", "model_hz"], plot)))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let name = match a.kind {
        SimKind::Trace => "trace",
        SimKind::PowerSweep => "power-sweep",
        SimKind::Burst => "burst",
        SimKind::TempSweep => "temp-sweep",
    };
    let mut sc = match &a.scenario {
        Some(path) => {
            let sc = Scenario::from_json(&fs::read_to_string(path)?)?;
            if sc.kind_name() != name {
                return Err(Error::invalid("scenario", &format!("is `{}` but `{name}` was requested", sc.kind_name())));
            }
            sc
        }
        None => match a.kind {
            SimKind::Trace => Scenario::default_trace(0),
            SimKind::PowerSweep => Scenario::default_power_sweep(0),
            SimKind::Burst => Scenario::default_burst(0),
            SimKind::TempSweep => Scenario::default_temp_sweep(0),
        },
    };
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    if let Some(sigma) = a.sigma {
        sc.sigma = sigma;
    }
    sc.validate()?;

    let mut buf = Vec::new();
    match a.kind {
        SimKind::Trace => write_trace(&gen_trace(&sc)?, &mut buf)?,
        SimKind::Burst => write_trace(&gen_burst(&sc)?, &mut buf)?,
        SimKind::TempSweep => {
            let (pts, truth) = gen_temp_sweep(&sc)?;
            for (k, v) in truth.to_meta() {
                writeln!(buf, "# {k} = {v}")?;
            }
            let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
            write_table(&mut buf, &["t_k", "delta_f_hz"], &rows)?;
        }
        SimKind::PowerSweep => {
            let dir: &PathBuf = need(cli.out.as_ref(), "--out (directory for the sweep files)")?;
            fs::create_dir_all(dir)?;
            for (i, t) in gen_power_sweep(&sc)?.iter().enumerate() {
                write_trace(t, fs::File::create(dir.join(format!("sweep_{i:03}.csv")))?)?;
            }
            return Ok(());
        }
    }
    let text = String::from_utf8(buf).expect("CSV writer emits UTF-8");
    write_text(cli.out.as_deref(), &text)
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let mut s = Session::new(cli, "report")?;
    let mut devices = Vec::new();
    for path in &a.inputs {
        let text = s.read(path)?;
        let b = ReportBundle::from_json(&text)?;
        devices.extend(b.devices);
    }
    let mut bundle = ReportBundle::new(s.provenance);
    bundle.devices = devices;
    finish(cli, &bundle, None)
}
