use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ingest::{ingest, InputFormat};
use super::output::{fmt_f64, to_json_bytes, write_atomic, write_csv_with_manifest, RunManifest};
use super::{DataArgs, FitArgs, LossRequest, PriorKind, SampleArgs, SifArgs, SimulateArgs, TuneArgs, AUTO_ARE_TARGET};
use crate::asymptotics::{self, TuningKind};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::robustness::{self, ProbePoint, SifField};
use crate::simlab::{self, Contamination, Estimator, MseTable, SimConfig};
use crate::solver::SolveReport;
use crate::vmf::{self, Dataset, NaturalParam};
use crate::wbb::{self, PosteriorDraws, PriorSpec};

struct Run {
    start: Instant,
    manifest: RunManifest,
    timing: bool,
}

impl Run {
    fn new<T: Serialize>(command: &str, args: &T, seed: Option<u64>, timing: bool) -> Result<Self> {
        let manifest = RunManifest::new(command, serde_json::to_value(args)?, seed);
        Ok(Run { start: Instant::now(), manifest, timing })
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.manifest.warnings.push(w.into());
    }

    fn finish(mut self) -> RunManifest {
        if self.timing {
            self.manifest.wall_time_seconds = Some(self.start.elapsed().as_secs_f64());
        }
        self.manifest
    }
}

fn load(input: &DataArgs, run: &mut Run) -> Result<Dataset> {
    let path = input.data.as_deref().ok_or_else(|| Error::Argument("--data is required".into()))?;
    let ing = ingest(path, input.format, input.header)?;
    for w in ing.warnings {
        run.warn(w);
    }
    if ing.data.n() < ing.data.p() {
        run.warn(format!("only {} observations in dimension {}", ing.data.n(), ing.data.p()));
    }
    Ok(ing.data)
}

fn emit_json(value: &Value, out: Option<&Path>) -> Result<()> {
    let bytes = to_json_bytes(value)?;
    match out {
        Some(path) => write_atomic(path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// Pilot-based tuning for `dpd:auto` and `gamma:auto`.
#[derive(Debug, Clone, Serialize)]
struct TuningNote {
    pilot_xi: Vec<f64>,
    target: f64,
    tuning: f64,
}

fn resolve(request: LossRequest, pilot: &mut Option<NaturalParam>, data: &Dataset) -> Result<(LossSpec, Option<TuningNote>)> {
    match request {
        LossRequest::Fixed(spec) => Ok((spec.validated()?, None)),
        LossRequest::Auto(kind) => {
            if pilot.is_none() {
                *pilot = Some(wbb::point_estimate(data, LossSpec::Kl)?);
            }
            let xi = pilot.as_ref().expect("pilot set above");
            let t = asymptotics::select_tuning(kind, xi, AUTO_ARE_TARGET)?;
            let note = TuningNote { pilot_xi: xi.as_slice().to_vec(), target: AUTO_ARE_TARGET, tuning: t };
            Ok((kind.spec(t), Some(note)))
        }
    }
}

fn xi_header(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("{prefix}_{j}")).collect()
}

/// `fit`: WBB posterior per requested loss. Returns the summary document.
pub fn cmd_fit(args: &FitArgs, timing: bool) -> Result<Value> {
    let mut run = Run::new("fit", args, Some(args.seed), timing)?;
    let data = load(&args.input, &mut run)?;
    let p = data.p();
    let prior = match args.prior {
        PriorKind::Uniform => PriorSpec::Uniform,
        PriorKind::Gaussian => {
            let mean = args.prior_mean.clone().unwrap_or_else(|| vec![0.0; p]);
            PriorSpec::gaussian(args.prior_lambda, mean, args.prior_scale)?
        }
    };
    let mut pilot = None;
    let mut fits = Vec::new();
    let mut rows = Vec::new();
    for &request in &args.losses {
        let (spec, tuning) = resolve(request, &mut pilot, &data)?;
        let draws = wbb::wbb_sample(&data, spec, &prior, args.draws, args.seed)?;
        let summary = wbb::summarize(&draws, args.level)?;
        if let Some(w) = &draws.warning {
            run.warn(format!("{spec}: {w}"));
        }
        for (m, (d, r)) in draws.draws.iter().zip(&draws.reports).enumerate() {
            let mut row = vec![spec.to_string(), m.to_string()];
            row.extend(d.iter().map(|v| fmt_f64(*v)));
            row.push(u8::from(r.converged).to_string());
            rows.push(row);
        }
        fits.push(json!({
            "requested": request.to_string(),
            "loss": spec.to_string(),
            "tuning": tuning,
            "failed_draws": draws.n_failed(),
            "summary": summary,
        }));
    }
    let manifest = run.finish();
    if let Some(path) = &args.draws_out {
        let mut header = vec!["loss".to_string(), "draw".to_string()];
        header.extend(xi_header("xi", p));
        header.push("converged".into());
        write_csv_with_manifest(path, &header, &rows, &manifest)?;
    }
    let doc = json!({ "manifest": manifest, "n": data.n(), "p": p, "fits": fits });
    emit_json(&doc, args.out.as_deref())?;
    Ok(doc)
}

/// `tune`: tuning parameter reaching the target ARE at a pilot.
pub fn cmd_tune(args: &TuneArgs, timing: bool) -> Result<Value> {
    let mut run = Run::new("tune", args, None, timing)?;
    let pilot = match (&args.pilot_xi, &args.input.data) {
        (Some(xi), _) => NaturalParam::new(xi.clone())?,
        (None, Some(_)) => {
            let data = load(&args.input, &mut run)?;
            wbb::point_estimate(&data, LossSpec::Kl)?
        }
        (None, None) => return Err(Error::Argument("give --data or --pilot-xi".into())),
    };
    let tuning = asymptotics::select_tuning(args.kind, &pilot, args.target)?;
    let are = asymptotics::are(args.kind.spec(tuning), &pilot)?;
    if tuning <= asymptotics::TUNING_MIN {
        run.warn("target efficiency is not reachable above the smallest tuning; returned the lower bracket");
    }
    let doc = json!({
        "manifest": run.finish(),
        "kind": args.kind,
        "target": args.target,
        "tuning": tuning,
        "are": are,
        "pilot_xi": pilot.as_slice(),
    });
    emit_json(&doc, args.out.as_deref())?;
    Ok(doc)
}

/// Study description read by `simulate`. Scalars broadcast; `n` and `epsilon` may be grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    #[serde(default = "SimFile::default_xi")]
    pub true_xi: Vec<f64>,
    #[serde(default = "SimFile::default_n")]
    pub n: Vec<usize>,
    #[serde(default = "SimFile::default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "SimFile::default_contamination")]
    pub contamination: Contamination,
    #[serde(default = "SimFile::default_replications")]
    pub replications: usize,
    #[serde(default = "SimFile::default_losses")]
    pub losses: Vec<LossRequest>,
    #[serde(default = "SimFile::default_seed")]
    pub seed: u64,
    #[serde(default = "SimFile::default_m")]
    pub wbb_m: usize,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "SimFile::default_target")]
    pub are_target: f64,
}

impl SimFile {
    fn default_xi() -> Vec<f64> {
        vec![20.0, 0.0]
    }
    fn default_n() -> Vec<usize> {
        vec![100, 200]
    }
    fn default_epsilon() -> Vec<f64> {
        vec![0.0, 0.05, 0.1]
    }
    fn default_contamination() -> Contamination {
        Contamination::UniformSphere
    }
    fn default_replications() -> usize {
        100
    }
    fn default_losses() -> Vec<LossRequest> {
        vec![LossRequest::Fixed(LossSpec::Kl), LossRequest::Auto(TuningKind::Dpd), LossRequest::Auto(TuningKind::Gamma)]
    }
    fn default_seed() -> u64 {
        20240
    }
    fn default_m() -> usize {
        300
    }
    fn default_target() -> f64 {
        AUTO_ARE_TARGET
    }
}

impl Default for SimFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Resolves `auto` losses once at the true parameter.
pub(crate) fn resolve_at_truth(losses: &[LossRequest], xi: &NaturalParam, target: f64) -> Result<Vec<LossSpec>> {
    losses
        .iter()
        .map(|r| match *r {
            LossRequest::Fixed(s) => s.validated(),
            LossRequest::Auto(kind) => Ok(kind.spec(asymptotics::select_tuning(kind, xi, target)?)),
        })
        .collect()
}

/// `simulate`: MSE table over the `n × ε` grid.
pub fn cmd_simulate(args: &SimulateArgs, timing: bool) -> Result<MseTable> {
    let mut file = match &args.config {
        Some(path) => serde_json::from_slice::<SimFile>(&std::fs::read(path)?)?,
        None => SimFile::default(),
    };
    if let Some(r) = args.replications {
        file.replications = r;
    }
    let mut run = Run::new("simulate", &json!({ "args": args, "study": file }), Some(file.seed), timing)?;
    let truth = NaturalParam::new(file.true_xi.clone())?;
    let losses = resolve_at_truth(&file.losses, &truth, file.are_target)?;
    let mut rows = Vec::new();
    for &n in &file.n {
        for &epsilon in &file.epsilon {
            let config = SimConfig {
                p: truth.dim(),
                n,
                epsilon,
                true_xi: truth.clone(),
                contamination: file.contamination.clone(),
                replications: file.replications,
                losses: losses.clone(),
                seed: file.seed,
                wbb_m: file.wbb_m,
                estimator: file.estimator,
            };
            let table = simlab::run_study(&config)?;
            if let Some(r) = table.rows.first().filter(|r| r.dropped > 0) {
                run.warn(format!("n = {n}, ε = {epsilon}: {} replicates dropped", r.dropped));
            }
            rows.extend(table.rows);
        }
    }
    let table = MseTable { rows };
    let manifest = run.finish();
    let header: Vec<String> =
        ["n", "epsilon", "loss", "metric", "value", "replications", "dropped", "seed"].iter().map(|s| s.to_string()).collect();
    let csv_rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.epsilon),
                r.loss.clone(),
                r.metric.to_string(),
                fmt_f64(r.value),
                r.replications.to_string(),
                r.dropped.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let base = args.out.as_os_str().to_owned();
    let with_ext = |ext: &str| {
        let mut s = base.clone();
        s.push(ext);
        std::path::PathBuf::from(s)
    };
    write_csv_with_manifest(&with_ext(".csv"), &header, &csv_rows, &manifest)?;
    let tunings: Vec<String> = losses.iter().map(LossSpec::to_string).collect();
    let doc = json!({ "manifest": manifest, "losses": tunings, "rows": table.rows });
    write_atomic(&with_ext(".json"), &to_json_bytes(&doc)?)?;
    Ok(table)
}

/// Reads `fit --draws-out` output, keeping the rows of one loss.
fn read_draws(path: &Path, request: LossRequest) -> Result<PosteriorDraws> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut draws = Vec::new();
    let mut reports = Vec::new();
    let mut chosen: Option<LossSpec> = None;
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let bad = |m: &str| Error::Input { row, message: m.to_string() };
        if rec.len() < 4 {
            return Err(bad("draws rows need loss, draw, coordinates and a convergence flag"));
        }
        let spec: LossSpec = rec[0].parse()?;
        let wanted = match request {
            LossRequest::Fixed(s) => s == spec,
            LossRequest::Auto(TuningKind::Dpd) => matches!(spec, LossSpec::Dpd { .. }),
            LossRequest::Auto(TuningKind::Gamma) => matches!(spec, LossSpec::Gamma { .. }),
        };
        if !wanted {
            continue;
        }
        match chosen {
            None => chosen = Some(spec),
            Some(c) if c != spec => return Err(bad("several tunings of the requested family; name one with --loss")),
            _ => {}
        }
        let xi = rec.iter().skip(2).take(rec.len() - 3).map(|f| f.parse::<f64>().map_err(|_| bad("unparsable coordinate"))).collect::<Result<Vec<_>>>()?;
        let converged = &rec[rec.len() - 1] == "1";
        reports.push(SolveReport {
            minimizer: xi.clone(),
            objective: f64::NAN,
            gradient_norm: f64::NAN,
            iterations: 0,
            converged,
            restarts_used: 0,
            history: Vec::new(),
        });
        draws.push(xi);
    }
    let loss = chosen.ok_or_else(|| Error::Argument(format!("no draws for loss {request} in {}", path.display())))?;
    Ok(PosteriorDraws { draws, loss, prior: PriorSpec::Uniform, seed: 0, reports, warning: None })
}

/// `sif`: IF vectors and SIF norms over the probes.
pub fn cmd_sif(args: &SifArgs, timing: bool) -> Result<SifField> {
    let mut run = Run::new("sif", args, Some(args.seed), timing)?;
    let given_eta = args.eta.clone().map(NaturalParam::new).transpose()?;
    let (draws, eta, n) = if let Some(path) = &args.from_draws {
        let eta = given_eta.ok_or_else(|| Error::Argument("--from-draws needs --eta".into()))?;
        let n = args.n.ok_or_else(|| Error::Argument("--from-draws needs --n".into()))?;
        (read_draws(path, args.loss)?, eta, n)
    } else {
        let data = match args.sample_n {
            Some(m) => {
                let eta = given_eta.as_ref().ok_or_else(|| Error::Argument("--sample-n needs --eta".into()))?;
                vmf::sample(eta, m, &mut crate::rng_for(args.seed, u64::MAX))?
            }
            None => load(&args.input, &mut run)?,
        };
        let eta = match given_eta {
            Some(e) => e,
            None => wbb::point_estimate(&data, LossSpec::Kl)?,
        };
        let mut pilot = None;
        let (spec, _) = resolve(args.loss, &mut pilot, &data)?;
        let draws = wbb::wbb_sample(&data, spec, &PriorSpec::Uniform, args.draws, args.seed)?;
        if let Some(w) = &draws.warning {
            run.warn(w.clone());
        }
        (draws, eta, data.n())
    };
    let p = eta.dim();
    let probes: Vec<ProbePoint> = match &args.probe_file {
        Some(path) => {
            let d = ingest(path, InputFormat::UnitVectors, false)?.data;
            (0..d.n()).map(|i| ProbePoint::new(d.point(i))).collect()
        }
        None if p == 2 => robustness::probe_circle(args.probes),
        None => return Err(Error::Argument("probe grids are built in only for p = 2; pass --probe-file".into())),
    };
    let field = robustness::sif_field(&draws, &probes, &eta, n)?;
    let manifest = run.finish();
    let mut header = Vec::new();
    if p == 2 {
        header.push("angle".to_string());
    }
    header.extend(xi_header("y", p));
    header.extend(xi_header("if", p));
    header.push("sif".into());
    let rows: Vec<Vec<String>> = field
        .probes
        .iter()
        .zip(&field.if_vectors)
        .zip(&field.sif_norms)
        .map(|((probe, v), s)| {
            let mut r = Vec::new();
            if p == 2 {
                r.push(fmt_f64(probe.y.angle()));
            }
            r.extend(probe.y.coords().iter().map(|c| fmt_f64(*c)));
            r.extend(v.iter().map(|c| fmt_f64(*c)));
            r.push(fmt_f64(*s));
            r
        })
        .collect();
    write_csv_with_manifest(&args.out, &header, &rows, &manifest)?;
    Ok(field)
}

/// `sample`: `n` draws from `vMF(ξ)`, written without a header.
pub fn cmd_sample(args: &SampleArgs, timing: bool) -> Result<()> {
    let run = Run::new("sample", args, Some(args.seed), timing)?;
    let xi = NaturalParam::new(args.xi.clone())?;
    let data = vmf::sample(&xi, args.n, &mut crate::rng_for(args.seed, 0))?;
    let rows: Vec<Vec<String>> = match args.format {
        InputFormat::UnitVectors => data.rows().map(|r| r.iter().map(|v| fmt_f64(*v)).collect()).collect(),
        InputFormat::AnglesRadians if data.p() == 2 => data.rows().map(|r| vec![fmt_f64(r[1].atan2(r[0]))]).collect(),
        _ => return Err(Error::Argument("sample writes unit_vectors, or angles_radians for p = 2".into())),
    };
    write_csv_with_manifest(&args.out, &[], &rows, &run.finish())
}
