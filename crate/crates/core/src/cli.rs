//! Run configuration and the commands behind the `lawson` binary.
//!
//! Every command writes into the output directory (config `output.dir`,
//! overridden by the environment variable [`OUT_DIR_ENV`]) and tags each file
//! with the library version and the SHA-256 of the effective configuration.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{self, Provenance};
use crate::iwasawa::{IwasawaOptions, SimpleFactor};
use crate::reconstruct::{build_mesh, MeshReport, ReconstructOptions, Reconstruction, SurfaceMesh};
use crate::spectral::{self, SolveReport, SpectralData, SpectralOptions, SpectralSolver, SymConfig};
use crate::theta::{self, ThetaFn, ThetaSuiteReport};
use crate::unitarizer::{self, AuSolver};

/// Environment variable overriding `output.dir`.
pub const OUT_DIR_ENV: &str = "LAWSON_OUT_DIR";

/// Points at which the reconstruction reports its conformality defect.
const CONFORMALITY_PROBES: [Complex64; 3] = [
    Complex64::new(1.3, 0.9),
    Complex64::new(0.7, 1.6),
    Complex64::new(2.2, 2.3),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random choice (theta-check sample points).
    pub seed: u64,
    pub output: OutputConfig,
    pub theta: ThetaConfig,
    pub au: AuConfig,
    pub spectral: SpectralConfig,
    pub reconstruct: ReconstructConfig,
    pub dress: DressConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaConfig {
    /// Number of series terms.
    pub terms: usize,
    /// Random points in the unit cell.
    pub points: usize,
    /// Side of the additional cell-centred grid.
    pub grid: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuConfig {
    /// Side of the cell-centred grid on `[0, 1/2)^2`.
    pub grid: usize,
    pub tol: f64,
    pub transport_tol: f64,
    /// File name of the table inside the output directory.
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Number of `x` coefficients `N`.
    pub truncation: usize,
    /// Collocation nodes on the unit circle; `4 (N + 1)` gives a square system.
    pub n_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Leading coefficient of the default initial guess.
    pub x1: [f64; 2],
    /// Explicit initial guess, overriding `x1` when both are given.
    pub x_coeffs: Option<Vec<[f64; 2]>>,
    pub a_coeffs: Option<Vec<[f64; 2]>>,
    /// Circle samples written next to the solution.
    pub samples: usize,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub n_lambda: usize,
    /// Grid cells per unit length of the torus domain.
    pub cells: usize,
    /// Sym points `lambda_1, lambda_2`.
    pub sym: [[f64; 2]; 2],
    pub transport_tol: f64,
    pub gap: f64,
    pub iwasawa_truncation: usize,
    pub iwasawa_tol: f64,
    /// Relative tolerance of mesh area against the area formula.
    pub area_tol: f64,
    /// Base name of the mesh files.
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DressConfig {
    pub lambda0: [f64; 2],
    pub line: [[f64; 2]; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output: OutputConfig::default(),
            theta: ThetaConfig::default(),
            au: AuConfig::default(),
            spectral: SpectralConfig::default(),
            reconstruct: ReconstructConfig::default(),
            dress: DressConfig::default(),
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl Default for ThetaConfig {
    fn default() -> Self {
        Self {
            terms: theta::DEFAULT_TRUNCATION,
            points: 100,
            grid: 8,
            tol: 1e-12,
        }
    }
}

impl Default for AuConfig {
    fn default() -> Self {
        let s = AuSolver::default();
        Self {
            grid: 8,
            tol: s.tol,
            transport_tol: s.transport_tol,
            out: "au_table.csv".into(),
        }
    }
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            truncation: 29,
            n_points: 120,
            tol: 1e-10,
            max_iter: 30,
            x1: [0.25, 0.25],
            x_coeffs: None,
            a_coeffs: None,
            samples: 256,
            out: "spectral.json".into(),
        }
    }
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        let o = ReconstructOptions::default();
        Self {
            n_lambda: o.n_lambda,
            cells: 16,
            sym: [[1.0, 0.0], [-1.0, 0.0]],
            transport_tol: o.transport_tol,
            gap: o.gap,
            iwasawa_truncation: o.iwasawa.truncation,
            iwasawa_tol: o.iwasawa.tol,
            area_tol: 0.01,
            name: "surface".into(),
        }
    }
}

impl Default for DressConfig {
    fn default() -> Self {
        Self {
            lambda0: [0.5, 0.2],
            line: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be at least 1")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Read a config file; a missing or unreadable file is a usage error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical text of the effective configuration; its hash tags outputs.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command, &self.canonical())
    }

    pub fn validate(&self) -> Result<()> {
        nonzero("theta.terms", self.theta.terms)?;
        nonzero("theta.points", self.theta.points)?;
        nonzero("theta.grid", self.theta.grid)?;
        positive("theta.tol", self.theta.tol)?;
        nonzero("au.grid", self.au.grid)?;
        positive("au.tol", self.au.tol)?;
        positive("au.transport_tol", self.au.transport_tol)?;
        nonzero("spectral.truncation", self.spectral.truncation)?;
        positive("spectral.tol", self.spectral.tol)?;
        nonzero("spectral.max_iter", self.spectral.max_iter)?;
        if self.spectral.n_points < 4 || !self.spectral.n_points.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "spectral.n_points must be a positive multiple of 4, got {}",
                self.spectral.n_points
            )));
        }
        if self.spectral.x_coeffs.is_some() != self.spectral.a_coeffs.is_some() {
            return Err(Error::Config(
                "spectral.x_coeffs and spectral.a_coeffs must be given together".into(),
            ));
        }
        nonzero("spectral.samples", self.spectral.samples)?;
        if !self.reconstruct.n_lambda.is_power_of_two() || self.reconstruct.n_lambda < 16 {
            return Err(Error::Config(format!(
                "reconstruct.n_lambda must be a power of two >= 16, got {}",
                self.reconstruct.n_lambda
            )));
        }
        if self.reconstruct.cells < 2 || !self.reconstruct.cells.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "reconstruct.cells must be even and >= 2, got {}",
                self.reconstruct.cells
            )));
        }
        positive("reconstruct.transport_tol", self.reconstruct.transport_tol)?;
        positive("reconstruct.gap", self.reconstruct.gap)?;
        positive("reconstruct.iwasawa_tol", self.reconstruct.iwasawa_tol)?;
        positive("reconstruct.area_tol", self.reconstruct.area_tol)?;
        nonzero("reconstruct.iwasawa_truncation", self.reconstruct.iwasawa_truncation)?;
        self.sym()?;
        self.dressing()?;
        Ok(())
    }

    /// Output directory, honouring [`OUT_DIR_ENV`].
    pub fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }

    pub fn sym(&self) -> Result<SymConfig> {
        SymConfig::new(cx(self.reconstruct.sym[0]), cx(self.reconstruct.sym[1]))
    }

    pub fn dressing(&self) -> Result<SimpleFactor> {
        SimpleFactor::new(cx(self.dress.lambda0), self.dress.line.map(cx))
            .map_err(|e| Error::Config(format!("dress: {e}")))
    }

    pub fn reconstruct_options(&self) -> Result<ReconstructOptions> {
        let r = &self.reconstruct;
        Ok(ReconstructOptions {
            n_lambda: r.n_lambda,
            transport_tol: r.transport_tol,
            iwasawa: IwasawaOptions {
                truncation: r.iwasawa_truncation,
                tol: r.iwasawa_tol,
                ..IwasawaOptions::default()
            },
            sym: self.sym()?,
            gap: r.gap,
        })
    }

    fn au_solver(&self) -> AuSolver {
        AuSolver {
            theta: ThetaFn::new(self.theta.terms),
            tol: self.au.tol,
            transport_tol: self.au.transport_tol,
            ..AuSolver::default()
        }
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let dir = self.out_dir();
        fs::create_dir_all(&dir)?;
        let path = dir.join(name);
        let f = File::create(&path)?;
        Ok((path, BufWriter::new(f)))
    }
}

/// Sample points of the theta check: `points` random points of the unit cell
/// followed by the cell-centred `grid x grid` lattice.
pub fn theta_sample_points(points: usize, grid: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Complex64> = (0..points)
        .map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let h = 1.0 / grid as f64;
    for j in 0..grid {
        for i in 0..grid {
            out.push(Complex64::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
        }
    }
    out
}

/// Run the theta invariant suite; failing checks are an error naming them.
pub fn cmd_theta_check(cfg: &RunConfig) -> Result<ThetaSuiteReport> {
    cfg.validate()?;
    let th = ThetaFn::new(cfg.theta.terms);
    let pts = theta_sample_points(cfg.theta.points, cfg.theta.grid, cfg.seed);
    let r = theta::invariant_suite(&th, &pts);
    println!("theta-check: {} terms, {} points", cfg.theta.terms, r.points);
    println!("  real period      {:.3e}", r.real_period);
    println!("  quasi period     {:.3e}", r.quasi_period);
    println!("  lattice zeros    {:.3e}", r.lattice_zeros);
    println!("  zero count       {:.3e}", r.zero_count);
    let failed = r.failures(cfg.theta.tol);
    if failed.is_empty() {
        Ok(r)
    } else {
        Err(Error::Rejected(format!(
            "theta checks above {:.1e}: {}",
            cfg.theta.tol,
            failed.join(", ")
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuTableSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub su2_ok: usize,
    pub failed: usize,
    pub max_fe_residual: f64,
}

/// Tabulate `a^u` on the cell grid; per-cell failures go to the status column.
pub fn cmd_au_table(cfg: &RunConfig) -> Result<AuTableSummary> {
    cfg.validate()?;
    let solver = cfg.au_solver();
    let rows = unitarizer::au_table(&solver, &unitarizer::cell_grid(cfg.au.grid), true);
    let (path, w) = cfg.create(&cfg.au.out)?;
    unitarizer::write_table(w, &rows, &cfg.provenance("au-table").lines())?;
    let s = AuTableSummary {
        path,
        rows: rows.len(),
        su2_ok: rows.iter().filter(|r| r.su2_ok).count(),
        failed: rows.iter().filter(|r| r.status.starts_with("failed")).count(),
        max_fe_residual: rows
            .iter()
            .map(|r| r.fe_residual)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
    };
    println!(
        "au-table: {} rows, {} su2_ok, {} failed, max functional-equation residual {:.3e} -> {}",
        s.rows,
        s.su2_ok,
        s.failed,
        s.max_fe_residual,
        s.path.display()
    );
    Ok(s)
}

/// Contents of the spectral-data file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveFile {
    pub data: SpectralData,
    pub report: SolveReport,
    pub n_points: usize,
    pub area: f64,
    /// Imaginary part of the area formula; zero for admissible data.
    pub area_imag: f64,
    pub pole_product: Complex64,
    pub pole_coefficient: Complex64,
    /// Reality residual on twice as many nodes as were solved for.
    pub reality_residual_double: f64,
}

fn initial_guess(cfg: &RunConfig, solver: &SpectralSolver) -> Result<SpectralData> {
    let s = &cfg.spectral;
    match (&s.x_coeffs, &s.a_coeffs) {
        (Some(x), Some(a)) => {
            let d = SpectralData::new(x.iter().map(|&p| cx(p)).collect(), a.iter().map(|&p| cx(p)).collect())
                .map_err(|e| Error::Config(format!("spectral guess: {e}")))?;
            d.with_truncation(s.truncation)
        }
        _ => solver.initial_guess(s.truncation, cx(s.x1), s.n_points),
    }
}

/// Solve for spectral data. On non-convergence the last iterate and its
/// residual history are written to `<out>.failed.json` and an error returned.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveFile> {
    cfg.validate()?;
    let solver = SpectralSolver::new(cfg.au_solver());
    let guess = initial_guess(cfg, &solver)?;
    let opts = SpectralOptions {
        n_points: cfg.spectral.n_points,
        tol: cfg.spectral.tol,
        max_iter: cfg.spectral.max_iter,
        ..SpectralOptions::default()
    };
    let out = solver.solve(&guess, &opts)?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    let dbl = solver
        .reality_residual(&out.data, 2 * opts.n_points)?
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let ac = spectral::area_complex(&out.data);
    let file = SolveFile {
        data: out.data.clone(),
        report: out.report.clone(),
        n_points: opts.n_points,
        area: ac.re,
        area_imag: ac.im,
        pole_product: out.data.pole_product(),
        pole_coefficient: out.data.pole_coefficient(),
        reality_residual_double: dbl,
    };
    let prov = cfg.provenance("solve");
    let converged = out.report.converged;
    let name = if converged {
        cfg.spectral.out.clone()
    } else {
        format!("{}.failed.json", cfg.spectral.out.trim_end_matches(".json"))
    };
    let (path, w) = cfg.create(&name)?;
    export::write_json(w, &prov, &file)?;
    println!(
        "solve: N = {}, {} nodes, {} after {} iterations, residual {:.3e}",
        out.data.n,
        opts.n_points,
        if converged { "converged" } else { "NOT converged" },
        out.report.iterations,
        out.report.residual_history.last().copied().unwrap_or(f64::NAN)
    );
    println!("  reality residual at double density {dbl:.3e}");
    println!("  area {:.10} (imaginary part {:.3e})", ac.re, ac.im);
    println!("  -> {}", path.display());
    if !converged {
        return Err(Error::NonConvergence {
            what: "spectral solve",
            iterations: out.report.iterations,
            residual: out.report.residual_history.last().copied().unwrap_or(f64::NAN),
        });
    }
    let samples = solver.circle_samples(&out.data, cfg.spectral.samples)?;
    let csv_name = format!("{}.samples.csv", cfg.spectral.out.trim_end_matches(".json"));
    let (_, mut w) = cfg.create(&csv_name)?;
    for l in prov.lines() {
        use std::io::Write;
        writeln!(w, "# {l}")?;
    }
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["Re t", "Im t", "Re x", "Im x", "Re a", "Im a", "Re a^u", "Im a^u"])?;
    for s in samples {
        cw.write_record(
            [s.t.re, s.t.im, s.x.re, s.x.im, s.a.re, s.a.im, s.a_u.re, s.a_u.im].map(|v| format!("{v:.15e}")),
        )?;
    }
    cw.flush()?;
    Ok(file)
}

/// Read spectral data written by [`cmd_solve`]; a missing file is a usage error.
pub fn load_spectral(path: &Path) -> Result<SpectralData> {
    let f = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open spectral data {}: {e}", path.display())))?;
    let env: export::Envelope<SolveFile> = export::read_json(BufReader::new(f))
        .map_err(|e| Error::Config(format!("cannot parse spectral data {}: {e}", path.display())))?;
    let d = env.body.data;
    SpectralData::new(d.x_coeffs, d.a_coeffs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructSummary {
    pub mesh: MeshReport,
    pub family: crate::reconstruct::FamilyReport,
    pub area_formula: f64,
    /// `|mesh area - formula| / formula`; only for antipodal Sym points.
    pub area_relative_error: Option<f64>,
    pub conformality_defect: f64,
    pub dressed: Option<DressSummary>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DressSummary {
    pub lambda0: Complex64,
    pub line: [Complex64; 2],
    pub mesh: MeshReport,
    /// Largest distance between corresponding vertices of the two meshes.
    pub max_vertex_distance: f64,
}

fn write_mesh(cfg: &RunConfig, name: &str, mesh: &SurfaceMesh, prov: &Provenance) -> Result<Vec<PathBuf>> {
    let (p1, w) = cfg.create(&format!("{name}.obj"))?;
    export::write_obj(w, mesh, prov)?;
    let (p2, w) = cfg.create(&format!("{name}.ply"))?;
    export::write_ply(w, mesh, prov)?;
    Ok(vec![p1, p2])
}

/// Reconstruct the surface from spectral data, optionally also its simple
/// factor dressing. A mesh area off the formula by more than `area_tol` is an
/// error after all files are written.
pub fn cmd_reconstruct(cfg: &RunConfig, data: &Path, dress: bool) -> Result<ReconstructSummary> {
    cfg.validate()?;
    let d = load_spectral(data)?;
    let command = if dress { "dress" } else { "reconstruct" };
    let prov = cfg.provenance(command);
    let solver = SpectralSolver::new(cfg.au_solver());
    let rec = Reconstruction::new(&solver, &d, cfg.reconstruct_options()?)?;
    let (mesh, report) = build_mesh(&rec, cfg.reconstruct.cells, None)?;
    let mut files = write_mesh(cfg, &cfg.reconstruct.name, &mesh, &prov)?;
    let mut conf: f64 = 0.0;
    for p in CONFORMALITY_PROBES {
        conf = conf.max(rec.conformality_defect(p, 1e-4)?);
    }
    let area_formula = spectral::area(&d);
    let minimal = spectral::mean_curvature(&rec.opts.sym)?.norm() < 1e-12;
    let area_relative_error = report
        .area
        .filter(|_| minimal)
        .map(|a| (a - area_formula).abs() / area_formula.abs());
    let dressed = if dress {
        let df = cfg.dressing()?;
        let (dm, dr) = build_mesh(&rec, cfg.reconstruct.cells, Some(&df))?;
        files.extend(write_mesh(cfg, &format!("{}_dressed", cfg.reconstruct.name), &dm, &prov)?);
        let max_vertex_distance = dm
            .vertices
            .iter()
            .zip(&mesh.vertices)
            .map(|(a, b)| (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Some(DressSummary {
            lambda0: df.lambda_0,
            line: df.line,
            mesh: dr,
            max_vertex_distance,
        })
    } else {
        None
    };
    let summary = ReconstructSummary {
        mesh: report,
        family: rec.report.clone(),
        area_formula,
        area_relative_error,
        conformality_defect: conf,
        dressed,
        files,
    };
    let (path, w) = cfg.create(&format!("{}.report.json", cfg.reconstruct.name))?;
    export::write_json(w, &prov, &summary)?;
    let m = &summary.mesh;
    println!(
        "{command}: {} vertices, {} faces, {} sheets",
        m.vertices, m.faces, m.sheets
    );
    println!("  sphere defect       {:.3e}", m.sphere_defect);
    if let Some(o) = m.order_three_defect {
        println!("  order-3 defect      {o:.3e}");
    }
    println!("  seam defect         {:.3e}", m.seam_defect);
    println!("  conformality defect {conf:.3e}");
    if let Some(a) = m.area {
        println!("  mesh area           {a:.6}");
    }
    println!("  formula area        {area_formula:.6}");
    if let Some(ds) = &summary.dressed {
        println!("  dressed: max vertex distance {:.3e}", ds.max_vertex_distance);
    }
    println!("  -> {}", path.display());
    match summary.area_relative_error {
        Some(e) if !(e <= cfg.reconstruct.area_tol) => Err(Error::Rejected(format!(
            "mesh area differs from the formula by {:.2}% (limit {:.2}%)",
            100.0 * e,
            100.0 * cfg.reconstruct.area_tol
        ))),
        _ => Ok(summary),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaSummary {
    pub area: f64,
    pub area_imag: f64,
    pub x1: Complex64,
    pub a_minus1: Complex64,
    pub pole_coefficient: Complex64,
    pub mean_curvature: Complex64,
}

/// Evaluate the area formula on stored spectral data.
pub fn cmd_area(cfg: &RunConfig, data: &Path) -> Result<AreaSummary> {
    cfg.validate()?;
    let d = load_spectral(data)?;
    let ac = spectral::area_complex(&d);
    let s = AreaSummary {
        area: ac.re,
        area_imag: ac.im,
        x1: d.x1(),
        a_minus1: d.a_minus1(),
        pole_coefficient: d.pole_coefficient(),
        mean_curvature: spectral::mean_curvature(&cfg.sym()?)?,
    };
    let (path, w) = cfg.create("area.json")?;
    export::write_json(w, &cfg.provenance("area"), &s)?;
    println!("area: {:.10} (imaginary part {:.3e})", s.area, s.area_imag);
    println!("  x1 = {:.10}, a_-1 = {:.10}, c_-1 = {:.10}", s.x1, s.a_minus1, s.pole_coefficient);
    println!("  -> {}", path.display());
    Ok(s)
}
