use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use mpsqc::compiler::{
    compile, compile_obc, compile_pbc, optimize_disentanglers, CompileOptions, DisentangleConfig, QuantumCircuit,
};
use mpsqc::json::{fmt_real, to_canonical_string_pretty};
use mpsqc::models::{
    dmrg_excited_obc, heisenberg, lowest_eigs, pbc_ground_mps, schwinger, terms_to_mpo, DmrgConfig, PbcFitConfig,
};
use mpsqc::mps::{
    compress_obc, compress_pbc, fidelity, right_canonicalize, right_isometry_residual, to_statevector, Boundary,
    MatrixProductState,
};
use mpsqc::simulator::{evolve_quench, mps_expectation, verify_circuit, Statevector, STATEVECTOR_QUBIT_GUARD};

use crate::config::{DisentangleModel, ExperimentConfig, ExperimentKind, QuenchInit};
use crate::error::{CliError, CliResult};

/// Output directory plus the metrics that end up in the manifest.
pub struct Run {
    pub out_dir: PathBuf,
    pub threads: usize,
    pub metrics: Map<String, Value>,
    pub artifacts: Vec<String>,
}

impl Run {
    pub fn new(out_dir: PathBuf, threads: usize) -> Self {
        Self { out_dir, threads: threads.max(1), metrics: Map::new(), artifacts: Vec::new() }
    }

    fn write(&mut self, name: &str, body: &str) -> CliResult<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &impl serde::Serialize) -> CliResult<()> {
        let s = to_canonical_string_pretty(v)?;
        self.write(name, &(s + "\n"))
    }

    fn metric(&mut self, key: &str, v: Value) {
        self.metrics.insert(key.to_string(), v);
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_mps(path: &Path) -> CliResult<MatrixProductState> {
    MatrixProductState::from_json(&read(path)?).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn load_circuit(path: &Path) -> CliResult<QuantumCircuit> {
    QuantumCircuit::from_json(&read(path)?).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

/// Runs `f` over `items` on up to `threads` workers; results come back in input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> CliResult<R> + Sync) -> CliResult<Vec<R>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let workers = threads.min(items.len());
    let mut slots: Vec<Option<CliResult<R>>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    (w..items.len()).step_by(workers).map(|i| (i, f(&items[i]))).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn compile_options(cfg: &ExperimentConfig, layers: Option<usize>) -> CompileOptions {
    let mut optimizer = cfg.optimizer.clone();
    optimizer.seed = cfg.seed;
    CompileOptions { layers, native: cfg.native, alpha: cfg.alpha, seed: cfg.seed, optimizer }
}

fn ring_fit(cfg: &ExperimentConfig, n: usize, d: usize) -> CliResult<mpsqc::models::PbcFit> {
    let fc = PbcFitConfig { d_target: d, fidelity_floor: cfg.fidelity_floor, ..Default::default() };
    pbc_ground_mps(n, cfg.delta, &fc).map_err(|e| CliError::from(e).context(&format!("ring fit N={n} D={d}")))
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    match kind {
        ExperimentKind::Canonicalize => canonicalize(cfg, r),
        ExperimentKind::Compile => compile_cmd(cfg, r),
        ExperimentKind::Verify => verify(cfg, r),
        ExperimentKind::SuccessRateScan => success_rate_scan(cfg, r),
        ExperimentKind::DecomposeScan => decompose_scan(cfg, r),
        ExperimentKind::DisentangleScan => disentangle_scan(cfg, r),
        ExperimentKind::Quench => quench(cfg, r),
        ExperimentKind::SchwingerSpectrum => schwinger_spectrum(cfg, r),
    }
}

fn canonicalize(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let m = load_mps(cfg.mps_path.as_deref().expect("validated"))?;
    let c = right_canonicalize(&m)?;
    let residual = c.tensors().iter().map(right_isometry_residual).fold(0.0, f64::max);
    let f = fidelity(&m, &c)?;
    r.write("canonical_mps.json", &(c.to_json()? + "\n"))?;
    r.metric("max_isometry_residual", json!(residual));
    r.metric("fidelity", json!(f));
    r.metric("lambda", json!(c.lambda()));
    Ok(())
}

fn compile_cmd(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let m = load_mps(cfg.mps_path.as_deref().expect("validated"))?;
    let comp = compile(&m, &compile_options(cfg, cfg.layers))?;
    r.write("circuit.json", &(comp.circuit.to_json()? + "\n"))?;
    let counts: Map<String, Value> = comp.circuit.counts().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let mut report = json!({
        "boundary": comp.boundary_kind,
        "success_rate": comp.success_rate,
        "site_distances": comp.site_distances,
        "gate_counts": counts,
        "n_qubits": comp.circuit.n_qubits(),
    });
    if comp.circuit.n_qubits() <= STATEVECTOR_QUBIT_GUARD {
        let v = verify_circuit(&comp.circuit, &m)?;
        r.metric("fidelity", json!(v.fidelity));
        r.metric("probability", json!(v.probability));
        report["verification"] = serde_json::to_value(&v).expect("plain data");
    }
    r.metric("success_rate", json!(comp.success_rate));
    r.write_json("compile_report.json", &report)
}

fn verify(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let c = load_circuit(cfg.circuit_path.as_deref().expect("validated"))?;
    if c.gates.is_empty() {
        return Err(CliError::Validation("circuit has an empty gate list".into()));
    }
    let m = load_mps(cfg.mps_path.as_deref().expect("validated"))?;
    let v = verify_circuit(&c, &m)?;
    r.metric("fidelity", json!(v.fidelity));
    r.metric("probability", json!(v.probability));
    r.metric("predicted_probability", json!(v.predicted_probability));
    r.write_json("verify_report.json", &v)
}

fn success_rate_scan(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let grid: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| cfg.d_values.iter().map(move |&d| (n, d))).collect();
    let rows = par_map(&grid, r.threads, |&(n, d)| {
        let fit = ring_fit(cfg, n, d)?;
        let comp = compile_pbc(&fit.mps, &compile_options(cfg, None))?;
        let measured = if comp.circuit.n_qubits() <= STATEVECTOR_QUBIT_GUARD {
            Some(verify_circuit(&comp.circuit, &fit.mps)?.probability)
        } else {
            None
        };
        Ok(vec![
            n.to_string(),
            d.to_string(),
            fmt_real(fit.fidelity),
            fmt_real(comp.success_rate),
            opt_real(measured),
            opt_real(measured.map(|p| (p - comp.success_rate).abs())),
        ])
    })?;
    let min = rows.iter().map(|row| row[3].parse::<f64>().expect("own format")).fold(f64::INFINITY, f64::min);
    r.metric("min_success_rate", json!(min));
    r.write("success_rate.csv", &csv("n,d,fit_fidelity,success_rate,measured_probability,abs_error", &rows))
}

fn decompose_scan(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let fits = par_map(&cfg.n_values, r.threads, |&n| ring_fit(cfg, n, cfg.d))?;
    let grid: Vec<(usize, usize)> =
        (0..fits.len()).flat_map(|i| cfg.layer_values.iter().map(move |&l| (i, l))).collect();
    let rows = par_map(&grid, r.threads, |&(i, l)| {
        let fit = &fits[i];
        let comp = compile_pbc(&fit.mps, &compile_options(cfg, Some(l)))?;
        let f = fidelity(&comp.realized_mps()?, &fit.mps)?;
        let maxd = comp.site_distances.iter().cloned().fold(0.0, f64::max);
        Ok(vec![cfg.n_values[i].to_string(), cfg.d.to_string(), l.to_string(), fmt_real(1.0 - f), fmt_real(maxd)])
    })?;
    r.write("decompose.csv", &csv("n,d,layers,infidelity,max_site_distance", &rows))
}

fn disentangle_scan(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let layers = cfg.layers.unwrap_or(10);
    let dcfg = DisentangleConfig {
        optimizer: mpsqc::compiler::OptimizerConfig { seed: cfg.seed, ..cfg.optimizer.clone() },
        layout: cfg.layout,
    };
    // (n, state index, original, compressed)
    let mut jobs: Vec<(usize, usize, MatrixProductState, MatrixProductState)> = Vec::new();
    let label = match cfg.model {
        DisentangleModel::HeisenbergPbc => {
            for &n in &cfg.n_values {
                let fit = ring_fit(cfg, n, cfg.d_from)?;
                let (c, _) = compress_pbc(&fit.mps, cfg.d, cfg.compress_sweeps, 1e-12)?;
                jobs.push((n, 0, fit.mps, c));
            }
            "heisenberg_pbc"
        }
        DisentangleModel::SchwingerObc => {
            for &n in &cfg.n_values {
                let h = terms_to_mpo(&schwinger(n, cfg.x, cfg.mu, cfg.l)?, 1e-12)?;
                // DMRG truncated straight to d_from cycles instead of converging for some
                // excited states, so solve at d_ref and truncate.
                let dc = DmrgConfig { d_max: cfg.d_ref, sector: Some(0), seed: cfg.seed, ..Default::default() };
                let spectrum = dmrg_excited_obc(&h, cfg.k, &dc)?;
                for (k, s) in spectrum.states.into_iter().enumerate() {
                    let (s, _) = compress_obc(&s, cfg.d_from)?;
                    let (c, _) = compress_obc(&s, cfg.d)?;
                    jobs.push((n, k, s, c));
                }
            }
            "schwinger_obc"
        }
    };
    let results = par_map(&jobs, r.threads, |(_, _, orig, comp)| Ok(optimize_disentanglers(orig, comp, layers, &dcfg)?))?;
    let mut rows = Vec::new();
    for ((n, k, _, _), res) in jobs.iter().zip(&results) {
        for (l, f) in res.fidelities.iter().enumerate() {
            rows.push(vec![label.to_string(), n.to_string(), k.to_string(), l.to_string(), fmt_real(*f)]);
        }
    }
    let worst = results.iter().map(|res| *res.fidelities.last().expect("layer 0")).fold(1.0, f64::min);
    r.metric("min_final_fidelity", json!(worst));
    r.write("disentangle.csv", &csv("model,n,state,layers,fidelity", &rows))
}

/// Least-squares line `y = a + b x`; returns `(b, a, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (slope, my - slope * mx, r2)
}

fn quench(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let inits = par_map(&cfg.n_values, r.threads, |&n| {
        let v = match cfg.quench_init {
            QuenchInit::Exact => {
                let h = heisenberg(n, cfg.delta, Boundary::Pbc)?;
                lowest_eigs(&h, 1, Some(0))?.1.swap_remove(0)
            }
            QuenchInit::Mps => to_statevector(&ring_fit(cfg, n, cfg.d)?.mps)?,
        };
        Ok(Statevector::from_real(&v)?)
    })?;
    let grid: Vec<(usize, f64)> =
        (0..inits.len()).flat_map(|i| cfg.delta_values.iter().map(move |&d| (i, d))).collect();
    let traces = par_map(&grid, r.threads, |&(i, d)| {
        Ok(evolve_quench(&inits[i], d, cfg.dt, cfg.t_final, cfg.record_stride)?)
    })?;
    let mut rows = Vec::new();
    for (&(i, d), tr) in grid.iter().zip(&traces) {
        let n = cfg.n_values[i];
        r.write(&format!("quench_n{n}_delta{d:+.2}.csv"), &tr.to_csv())?;
        rows.push(vec![n.to_string(), fmt_real(d), fmt_real(tr.entropy[0]), fmt_real(tr.max_entropy())]);
    }
    r.write("quench_summary.csv", &csv("n,delta,s_initial,s_max", &rows))?;
    let mut fits = Vec::new();
    let mut min_r2 = f64::INFINITY;
    for &d in &cfg.delta_values {
        let (xs, ys): (Vec<f64>, Vec<f64>) = grid
            .iter()
            .zip(&traces)
            .filter(|((_, dd), _)| *dd == d)
            .map(|(&(i, _), tr)| (cfg.n_values[i] as f64, tr.max_entropy()))
            .unzip();
        let (b, a, r2) = linear_fit(&xs, &ys);
        min_r2 = min_r2.min(r2);
        fits.push(vec![fmt_real(d), fmt_real(b), fmt_real(a), fmt_real(r2)]);
    }
    r.metric("min_r_squared", json!(min_r2));
    r.write("volume_law.csv", &csv("delta,slope,intercept,r_squared", &fits))
}

fn schwinger_spectrum(cfg: &ExperimentConfig, r: &mut Run) -> CliResult<()> {
    let h = schwinger(cfg.n, cfg.x, cfg.mu, cfg.l)?;
    let w = terms_to_mpo(&h, 1e-12)?;
    let dc = DmrgConfig { d_max: cfg.d_ref, sector: Some(0), seed: cfg.seed, ..Default::default() };
    let spectrum = dmrg_excited_obc(&w, cfg.k, &dc)?;
    let ed = if cfg.n <= 12 { Some(lowest_eigs(&h, cfg.k, Some(0))?.0) } else { None };
    let grid: Vec<(usize, usize)> =
        (0..spectrum.states.len()).flat_map(|k| (0..cfg.d_values.len()).map(move |j| (k, j))).collect();
    let rows = par_map(&grid, r.threads, |&(k, j)| {
        let (d, l) = (cfg.d_values[j], cfg.spectrum_layers[j]);
        let (c, _) = compress_obc(&spectrum.states[k], d)?;
        let comp = compile_obc(&c, &compile_options(cfg, Some(l)))?;
        let m = comp.realized_mps()?;
        let f = fidelity(&m, &spectrum.states[k])?;
        let e = mps_expectation(&m, &h)?;
        Ok(vec![
            k.to_string(),
            fmt_real(spectrum.energies[k]),
            opt_real(ed.as_ref().map(|v| v[k])),
            d.to_string(),
            l.to_string(),
            fmt_real(f),
            fmt_real(e),
            fmt_real((e - spectrum.energies[k]).abs() / cfg.n as f64),
        ])
    })?;
    if let Some(v) = &ed {
        let dev = v.iter().zip(&spectrum.energies).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.metric("max_ed_deviation", json!(dev));
    }
    r.write("schwinger_spectrum.csv", &csv("k,energy_ref,energy_ed,d,layers,fidelity,energy,ediff_per_site", &rows))
}
