use std::fs;
use std::path::Path;

use serde::Serialize;

use hs_spectral::brown::{
    brown_atoms, brown_density_reg, fk_determinant, modified_spectral_radius, Atom, GridSpec,
};
use hs_spectral::flow::{run_flow_with, FlowOptions};
use hs_spectral::integrate::{
    additivity_check, dyadic_integral, level_difference_check, reflection_check, DiscrepancyReport,
    LevelDifference,
};
use hs_spectral::io::{
    density_csv, parse_grid_spec, parse_matrix, parse_path_spec, to_json, JsonMatrix,
};
use hs_spectral::lab::{GinibreSampler, HistogramGrid, Lab};
use hs_spectral::linalg::{c64, eigenvalues, identity, norm2, op_norm, qr, CMatrix};
use hs_spectral::riesz::{riesz_projection, ContourSpec, RieszSummary};
use hs_spectral::subspace::{
    atom_count, oracle_generalized_eigenspace, spectral_subspace, weighted_shift_demo,
    SetDescriptor, SubspaceSummary,
};
use hs_spectral::unitary::BlockUnitary2;

use crate::{
    BrownArgs, Check, Cli, Command, FlowArgs, IntegrateArgs, PerturbArgs, ProjectArgs, RieszArgs,
    ShiftArgs,
};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<hs_spectral::Error> for CliError {
    fn from(e: hs_spectral::Error) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(parse_matrix(&text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(to_json(value)?)
}

fn precondition(message: impl Into<String>) -> CliError {
    CliError {
        code: 4,
        message: message.into(),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(precondition("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| precondition(e.to_string()))?;
    }
    let report = match &cli.command {
        Command::Brown(a) => brown(a)?,
        Command::Project(a) => project(a)?,
        Command::Flow(a) => flow(a)?,
        Command::Riesz(a) => riesz(a)?,
        Command::Integrate(a) => integrate(a)?,
        Command::Perturb(a) => perturb(a, cli.seed)?,
        Command::ShiftDemo(a) => shift_demo(a)?,
    };
    if let Some(path) = &cli.json_out {
        write_file(path, &format!("{report}\n"))?;
    }
    if !cli.quiet {
        println!("{report}");
    }
    Ok(())
}

#[derive(Serialize)]
struct DensitySummary {
    a: f64,
    h: f64,
    re_points: usize,
    im_points: usize,
    mass: f64,
    laplacian_discrepancy: Option<f64>,
}

#[derive(Serialize)]
struct BrownReport {
    n: usize,
    atoms: Vec<Atom>,
    fk_determinant: f64,
    modified_spectral_radius: f64,
    density: Option<DensitySummary>,
}

/// Bounding box of the spectrum widened by `margin`.
fn spectrum_box(t: &CMatrix, margin: f64) -> Result<[f64; 4]> {
    let ev = eigenvalues(t)?;
    let fold = |f: fn(&c64) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        ev.iter().map(f).fold(init, pick)
    };
    Ok([
        fold(|z| z.re, f64::INFINITY, f64::min) - margin,
        fold(|z| z.re, f64::NEG_INFINITY, f64::max) + margin,
        fold(|z| z.im, f64::INFINITY, f64::min) - margin,
        fold(|z| z.im, f64::NEG_INFINITY, f64::max) + margin,
    ])
}

fn brown(args: &BrownArgs) -> Result<String> {
    let t = read_matrix(&args.input)?;
    let mu = brown_atoms(&t)?;
    let density = match args.reg {
        None => {
            if args.grid.is_some() || args.out.is_some() {
                return Err(precondition("--grid and --out require --reg"));
            }
            None
        }
        Some(a) => {
            let grid = match &args.grid {
                Some(s) => parse_grid_spec(s)?,
                None => {
                    let [re_min, re_max, im_min, im_max] = spectrum_box(&t, 3.0 * a)?;
                    GridSpec {
                        re_min,
                        re_max,
                        im_min,
                        im_max,
                        h: a / 4.0,
                    }
                }
            };
            let d = brown_density_reg(&t, a, &grid, args.cross_check)?;
            if let Some(path) = &args.out {
                write_file(path, &density_csv(&d))?;
            }
            Some(DensitySummary {
                a,
                h: d.h,
                re_points: d.re.len(),
                im_points: d.im.len(),
                mass: d.mass(),
                laplacian_discrepancy: d.laplacian_discrepancy,
            })
        }
    };
    json(&BrownReport {
        n: t.nrows(),
        atoms: mu.atoms,
        fk_determinant: fk_determinant(&t),
        modified_spectral_radius: modified_spectral_radius(&t)?,
        density,
    })
}

#[derive(Serialize)]
struct ProjectReport {
    #[serde(flatten)]
    subspace: SubspaceSummary,
    atom_count: usize,
    oracle_distance: Option<f64>,
}

fn project(args: &ProjectArgs) -> Result<String> {
    let t = read_matrix(&args.input)?;
    let set: SetDescriptor = args.set.parse()?;
    let s = spectral_subspace(&t, &set, args.n)?;
    let oracle_distance = if args.oracle {
        let o = oracle_generalized_eigenspace(&t, |z| set.contains(z))?;
        Some(norm2(&(&o.matrix - &s.proj.matrix)))
    } else {
        None
    };
    json(&ProjectReport {
        subspace: s.summary(),
        atom_count: atom_count(&brown_atoms(&t)?, &set),
        oracle_distance,
    })
}

#[derive(Serialize)]
struct FlowReport {
    t_end: f64,
    t_final: f64,
    steps: usize,
    rejected: usize,
    converged: bool,
    commutator_norm: f64,
    initial_norm2: f64,
    final_norm2: f64,
    similarity_residual: f64,
    transport_residual: f64,
    max_energy_mismatch: f64,
    /// Largest relative drift of `Delta(X - lambda)` at the probe points.
    det_probe_drift: f64,
    samples: usize,
}

fn flow(args: &FlowArgs) -> Result<String> {
    let t = read_matrix(&args.input)?;
    let scale = norm2(&t).powi(2);
    let t_end = args
        .t_end
        .unwrap_or(if scale > 0.0 { 200.0 / scale } else { 0.0 });
    if args.record_every == 0 {
        return Err(precondition("--record-every must be positive"));
    }
    let opts = FlowOptions {
        t_end,
        tol: args.tol,
        record_every: args.record_every,
        ..FlowOptions::default()
    };
    let st = run_flow_with(&t, &opts)?;
    let first = &st.diagnostics[0].det_probes;
    let det_probe_drift = st
        .diagnostics
        .iter()
        .flat_map(|s| {
            s.det_probes
                .iter()
                .zip(first)
                .map(|(d, d0)| (d - d0).abs() / d0.abs().max(f64::MIN_POSITIVE))
        })
        .fold(0.0, f64::max);
    if let Some(path) = &args.out {
        write_file(path, &st.diagnostics_csv())?;
    }
    if let Some(path) = &args.out_matrix {
        write_file(
            path,
            &format!("{}\n", hs_spectral::io::matrix_to_json(&st.x)),
        )?;
    }
    json(&FlowReport {
        t_end,
        t_final: st.t,
        steps: st.steps,
        rejected: st.rejected,
        converged: st.converged,
        commutator_norm: st.commutator_norm(),
        initial_norm2: norm2(&t),
        final_norm2: norm2(&st.x),
        similarity_residual: st.similarity_residual(&t),
        transport_residual: st.transport_residual(),
        max_energy_mismatch: st.max_energy_mismatch,
        det_probe_drift,
        samples: st.diagnostics.len(),
    })
}

fn parse_complex(s: &str) -> Result<c64> {
    let bad = || CliError {
        code: 2,
        message: format!("expected re,im, got `{s}`"),
    };
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    let re: f64 = re.trim().parse().map_err(|_| bad())?;
    let im: f64 = im.trim().parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(c64::new(re, im))
}

#[derive(Serialize)]
struct RieszReport {
    center: [f64; 2],
    radius: f64,
    #[serde(flatten)]
    summary: RieszSummary,
    commutation_residual: f64,
    invariance_residual: f64,
    history: Vec<(usize, f64)>,
    monotone_decay: bool,
}

fn riesz(args: &RieszArgs) -> Result<String> {
    let t = read_matrix(&args.input)?;
    let center = parse_complex(&args.center)?;
    let contour = ContourSpec::new(center, args.radius, args.nodes)?;
    let r = riesz_projection(&t, &contour, args.tol)?;
    json(&RieszReport {
        center: [center.re, center.im],
        radius: args.radius,
        summary: r.summary(),
        commutation_residual: r.commutation_residual,
        invariance_residual: r.invariance_residual,
        history: r.history.clone(),
        monotone_decay: r.monotone_decay,
    })
}

#[derive(Serialize)]
struct IntegrateReport {
    path: String,
    p: f64,
    levels: u32,
    integral: JsonMatrix,
    tail_bound: f64,
    level_differences: Vec<LevelDifference>,
    additivity: DiscrepancyReport,
    reflection: DiscrepancyReport,
}

fn integrate(args: &IntegrateArgs) -> Result<String> {
    let spec = parse_path_spec(&args.path)?;
    let m = match &args.input {
        Some(p) => read_matrix(p)?,
        None => identity(1),
    };
    let path = spec.build(&m, args.p)?;
    let (integral, tail_bound) = dyadic_integral(&path, args.levels)?;
    let mid = 0.5 * (spec.a + spec.b);
    json(&IntegrateReport {
        path: spec.to_string(),
        p: args.p,
        levels: args.levels,
        integral: JsonMatrix::from_matrix(&integral),
        tail_bound,
        level_differences: level_difference_check(&path, args.levels)?,
        additivity: additivity_check(&path, mid, args.levels)?,
        reflection: reflection_check(&path, args.levels)?,
    })
}

/// Haar-distributed unitary of size `n` on a reserved stream of `seed`.
fn random_unitary(n: usize, seed: u64, stream: u64) -> CMatrix {
    let (q, r) = qr(&GinibreSampler::new(n, seed, stream).next_matrix());
    // Fix the phases of R's diagonal so the distribution is Haar.
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
        }
    }
    q
}

const RESERVED_STREAM: u64 = u64::MAX - 16;

fn perturb(args: &PerturbArgs, seed: u64) -> Result<String> {
    let lab = Lab::new(seed);
    let trials = args.trials.unwrap_or(match args.check {
        Check::DpRight | Check::DpLeft | Check::GuNorm => 200,
        _ => 20,
    });
    let need_t = || -> Result<CMatrix> {
        match &args.input {
            Some(p) => read_matrix(p),
            None => Err(CliError {
                code: 2,
                message: "this check needs an input matrix".into(),
            }),
        }
    };
    let block =
        |k: u64| BlockUnitary2::from_matrix(&random_unitary(2, seed, RESERVED_STREAM + k), 1e-10);
    match args.check {
        Check::Determinant => {
            json(&lab.determinant_identity(&need_t()?, args.a, args.m, trials)?)
        }
        Check::Histogram => {
            let t = need_t()?;
            let grid = HistogramGrid::covering(&t, args.a, args.bin.unwrap_or(args.a))?;
            let r = lab.density_histogram(&t, args.a, args.m, trials, &grid)?;
            if let Some(path) = &args.out {
                write_file(path, &r.csv())?;
            }
            json(&r)
        }
        Check::Weak => json(&lab.weak_convergence(&need_t()?, args.m, &args.a_values, trials)?),
        Check::Resolvent => {
            let t = need_t()?;
            let e = GinibreSampler::new(t.nrows(), seed, RESERVED_STREAM).next_matrix();
            let s = &t + e.unscale(op_norm(&e)).scale(args.eps);
            json(&lab.resolvent_lipschitz(&s, &t, args.p, args.m, trials)?)
        }
        Check::DpRight => json(&lab.dp_right_invariance(
            &block(1)?,
            &block(2)?,
            &block(3)?,
            args.p,
            args.m,
            trials,
        )?),
        Check::DpLeft => {
            let w = BlockUnitary2::diag(
                random_unitary(1, seed, RESERVED_STREAM + 4),
                random_unitary(1, seed, RESERVED_STREAM + 5),
            )?;
            json(&lab.dp_left_invariance(&block(1)?, &block(2)?, &w, args.p, args.m, trials)?)
        }
        Check::GuNorm => json(&lab.gu_norm_invariance(&block(1)?, args.p, args.m, trials)?),
    }
}

fn shift_demo(args: &ShiftArgs) -> Result<String> {
    json(&weighted_shift_demo(args.levels)?)
}
