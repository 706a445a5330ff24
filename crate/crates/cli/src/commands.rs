use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use causet_qft::causet::{CausalSet, Direction, PastRule, PreferredPast};
use causet_qft::classical::{kernel_diagnostics, Interaction};
use causet_qft::discrete::{
    build_plambda, build_plambda_lattice, build_sorkin, cauchy_evolution, continuum_residual, greens, order_preserving_pairs, rce,
    refinement_levels, GreenSet, KVariant, WaveOperator,
};
use causet_qft::functional::{Orders, PolyFunctional};
use causet_qft::generators::{diamond_lattice, sprinkle, subdivide_cell, DiamondLattice, LatticeSpec, SprinklingSpec};
use causet_qft::interacting::{correlator_json, feynman, InteractingTheory};
use causet_qft::io::{matrix_csv, matrix_rows, CausetFile};
use causet_qft::quantum::{npoint_by_star, omega0_at, quasifree_npoint, sj_two_point, sj_via_square_root, TwoPoint};
use causet_qft::scalar::c_real;
use causet_qft::Error;
use nalgebra::{Complex, DMatrix};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, OperatorChoice, PastChoice, StateChoice};
use crate::expr;

/// A command's JSON result, CSV projections, and whether it reports success.
pub struct Outcome {
    pub json: Value,
    pub csv: Vec<(String, String)>,
    pub ok: bool,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Outcome { json, csv: Vec::new(), ok: true }
    }

    fn with_csv(mut self, name: &str, body: String) -> Self {
        self.csv.push((name.to_string(), body));
        self
    }
}

/// Exit status for a failed run: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::SingularOperator(_)
            | Error::NotInvertible { .. }
            | Error::NoConvergence { .. }
            | Error::Eigen(_)
            | Error::Unphysical { .. }
            | Error::DegreeCap { .. }
            | Error::HbarUnderflow { .. }
            | Error::NonUnitLeading,
        ) => 3,
        _ => 2,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Gen => gen(cfg),
        Command::Analyze => analyze(cfg),
        Command::Green => green(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Sj => sj(cfg),
        Command::Converge => converge(cfg),
        Command::Correlate => correlate(cfg),
        Command::Interact => interact(cfg),
        Command::Rce => rce_experiment(cfg),
        Command::Validate => validate(cfg),
    }
}

struct Source {
    cs: CausalSet,
    lattice: Option<DiamondLattice>,
}

fn parse_lattice(spec: &str, ell: f64) -> Result<DiamondLattice> {
    let (r, c) = spec.split_once(['x', 'X']).ok_or_else(|| anyhow!("lattice must look like 8x8, got '{spec}'"))?;
    let rows: usize = r.trim().parse().with_context(|| format!("bad lattice rows '{r}'"))?;
    let cols: usize = c.trim().parse().with_context(|| format!("bad lattice columns '{c}'"))?;
    if rows == 0 || cols == 0 {
        bail!("lattice sides must be positive");
    }
    if !(ell > 0.0) {
        bail!("ell must be positive");
    }
    Ok(diamond_lattice(LatticeSpec::new(rows, cols, ell)))
}

/// Reads a causet file, or the `"causet"` member of another command's output.
fn read_causet_value(path: &Path) -> Result<CausetFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = value.get("causet").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner).with_context(|| format!("{} is not a causal-set file", path.display()))?)
}

fn source(cfg: &ExperimentConfig) -> Result<Source> {
    let given = [cfg.input.is_some(), cfg.lattice.is_some(), cfg.sprinkle.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        bail!("give exactly one of --input, --lattice or a sprinkling");
    }
    if let Some(path) = &cfg.input {
        let cs = read_causet_value(path)?.to_causet()?;
        return Ok(Source { cs, lattice: None });
    }
    if let Some(spec) = &cfg.lattice {
        let lat = parse_lattice(spec, cfg.ell.unwrap_or(1.0))?;
        return Ok(Source { cs: lat.causet().clone(), lattice: Some(lat) });
    }
    let sp = cfg.sprinkle.as_ref().expect("counted above");
    let cs = sprinkle(&SprinklingSpec { region: sp.region, density: sp.density, seed: cfg.seed.unwrap_or(0) })?;
    Ok(Source { cs, lattice: None })
}

fn operator(cfg: &ExperimentConfig, src: &Source) -> Result<WaveOperator<f64>> {
    let choice = cfg.operator.unwrap_or_default();
    let w = match choice {
        OperatorChoice::Sorkin => {
            if cfg.kvariant.is_some() {
                bail!("K variants apply to the preferred-past operators only");
            }
            return Ok(build_sorkin(&src.cs, cfg.k.unwrap_or(3)));
        }
        OperatorChoice::Plambda => {
            if cfg.k.is_some_and(|k| k != 2) {
                bail!("the preferred-past operator has boundary depth 2");
            }
            let rule = match cfg.preferred_past.unwrap_or_default() {
                PastChoice::MaxLayer => PastRule::MaxLayer,
                PastChoice::Random => PastRule::SeededRandom(cfg.seed.unwrap_or(0)),
            };
            build_plambda(&src.cs, &PreferredPast::choose(&src.cs, rule)?)
        }
        OperatorChoice::Lattice => {
            let lat = src.lattice.as_ref().ok_or_else(|| anyhow!("the lattice operator needs --lattice"))?;
            build_plambda_lattice(lat)
        }
    };
    Ok(match cfg.kvariant {
        Some(v) => w.with_k_variant(v)?,
        None => w,
    })
}

/// Green functions from a `"ret"` file or from the configured operator.
fn green_setup(cfg: &ExperimentConfig) -> Result<(GreenSet<f64>, Option<WaveOperator<f64>>)> {
    if let Some(path) = &cfg.green {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)?;
        let rows: Vec<Vec<f64>> = serde_json::from_value(value.get("ret").cloned().ok_or_else(|| anyhow!("{} has no \"ret\" matrix", path.display()))?)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            bail!("\"ret\" must be square");
        }
        let ret = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        return Ok((GreenSet::from_retarded(ret), None));
    }
    let src = source(cfg)?;
    let w = operator(cfg, &src)?;
    Ok((greens(&w)?, Some(w)))
}

fn complex_json(m: &DMatrix<Complex<f64>>) -> Value {
    json!({ "re": matrix_rows(&m.map(|z| z.re)), "im": matrix_rows(&m.map(|z| z.im)) })
}

fn pair(z: Complex<f64>) -> Value {
    json!([z.re, z.im])
}

fn gen(cfg: &ExperimentConfig) -> Result<Outcome> {
    let src = source(cfg)?;
    Ok(Outcome::ok(serde_json::to_value(CausetFile::from_causet(&src.cs))?))
}

fn analyze(cfg: &ExperimentConfig) -> Result<Outcome> {
    let src = source(cfg)?;
    let cs = &src.cs;
    let n = cs.len();
    let k = cfg.k.unwrap_or(2);
    let elements: Vec<Value> = (0..n)
        .map(|x| {
            let mut layers = Vec::new();
            let mut seen = 0;
            let below = cs.past_of(x).count();
            let mut i = 1;
            while seen < below {
                let size = cs.layers(x, i, Direction::Past).len();
                layers.push(size);
                seen += size;
                i += 1;
            }
            json!({
                "index": x,
                "past": below,
                "future": cs.future_of(x).count(),
                "links_below": cs.links_below(x),
                "layer_sizes": layers,
            })
        })
        .collect();
    let ranks = cs.rank_matrix();
    let pp = match cfg.preferred_past.unwrap_or_default() {
        PastChoice::MaxLayer => PreferredPast::choose(cs, PastRule::MaxLayer),
        PastChoice::Random => PreferredPast::choose(cs, PastRule::SeededRandom(cfg.seed.unwrap_or(0))),
    };
    let preferred = match pp {
        Ok(pp) => json!({
            "map": pp.map(),
            "admissible": (0..n).map(|p| pp.admissible_choices(p)).collect::<Vec<_>>(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(Outcome::ok(json!({
        "causet": CausetFile::from_causet(cs),
        "n": n,
        "relations": cs.causal_matrix().count_ones(),
        "links": cs.link_matrix().count_ones(),
        "naturally_labelled": cs.is_naturally_labelled(),
        "checksum": cs.c_checksum(),
        "elements": elements,
        "infinities": {
            "k": k,
            "past": cs.infinity(k, Direction::Past).members,
            "future": cs.infinity(k, Direction::Future).members,
            "rank_past": cs.rank_infinity(&ranks, k, Direction::Past).members,
            "rank_future": cs.rank_infinity(&ranks, k, Direction::Future).members,
        },
        "preferred_past": preferred,
    })))
}

fn green(cfg: &ExperimentConfig) -> Result<Outcome> {
    let src = source(cfg)?;
    let w = operator(cfg, &src)?;
    let g = greens(&w)?;
    let (p, k) = (w.p().to_dense(), w.k().to_dense());
    let json = json!({
        "operator": w.kind(),
        "depth": w.depth(),
        "kvariant": cfg.kvariant.unwrap_or(KVariant::Half),
        "n": w.n(),
        "P": matrix_rows(&p),
        "K": matrix_rows(&k),
        "ret": matrix_rows(&g.ret),
        "adv": matrix_rows(&g.adv),
        "E": matrix_rows(&g.e),
        "residual": g.residual(&w),
        "retarded": g.is_retarded(&src.cs),
        "past_boundary": w.past_boundary().members,
        "future_boundary": w.future_boundary().members,
    });
    Ok(Outcome::ok(json)
        .with_csv("P.csv", matrix_csv(&p))
        .with_csv("K.csv", matrix_csv(&k))
        .with_csv("ret.csv", matrix_csv(&g.ret))
        .with_csv("E.csv", matrix_csv(&g.e)))
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (g, _) = green_setup(cfg)?;
    let rep = kernel_diagnostics(&g, cfg.tol.unwrap_or(1e-10));
    let csv: String = rep.eigenvalues.iter().map(|x| causet_qft::io::format_g17(*x) + "\n").collect();
    Ok(Outcome::ok(json!({ "n": g.n(), "spectrum": rep })).with_csv("eigenvalues.csv", csv))
}

fn two_point(cfg: &ExperimentConfig, g: &GreenSet<f64>) -> Result<TwoPoint<f64>> {
    Ok(match cfg.state.unwrap_or_default() {
        StateChoice::Sj => sj_two_point(g)?,
        StateChoice::Zero => TwoPoint::from_parts(g.e.clone(), DMatrix::zeros(g.n(), g.n()))?,
    })
}

fn sj(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (g, _) = green_setup(cfg)?;
    let tp = sj_two_point(&g)?;
    let other = (sj_via_square_root(&g) - &tp.w).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let json = json!({
        "n": g.n(),
        "W": complex_json(&tp.w),
        "H": matrix_rows(&tp.h),
        "axioms": tp.report(),
        "square_root_route": other,
    });
    Ok(Outcome::ok(json).with_csv("W_re.csv", matrix_csv(&tp.w.map(|z| z.re))).with_csv("W_im.csv", matrix_csv(&tp.w.map(|z| z.im))))
}

fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let text = cfg.f.as_deref().unwrap_or("sin(u)*sin(v)");
    let field = expr::parse(text)?;
    let levels = cfg.levels.unwrap_or(4);
    if levels == 0 || levels > 8 {
        bail!("levels must be between 1 and 8");
    }
    let refinements: Vec<usize> = (0..levels).map(|i| 1 << i).collect();
    let pps = cfg.points_per_side.unwrap_or(8);
    if pps < 3 {
        bail!("need at least 3 points per side");
    }
    let delta0 = cfg.delta0.unwrap_or(0.25);
    let dim = cfg.dim.unwrap_or(0);
    let lattices = refinement_levels(pps, delta0, &refinements);
    let res = continuum_residual(&lattices, |p| field.value(p.u, p.v), |p| field.box_value(p.u, p.v), dim)?;
    let mut rows = Vec::new();
    let mut csv = String::from("refinement,delta,points,max_residual,ratio\n");
    for (i, r) in res.iter().enumerate() {
        let ratio = if i > 0 { Some(res[i - 1].max_residual / r.max_residual) } else { None };
        rows.push(json!({ "refinement": r.refinement, "delta": r.delta, "points": r.points, "max_residual": r.max_residual, "ratio": ratio }));
        let fmt = causet_qft::io::format_g17;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.refinement,
            fmt(r.delta),
            r.points,
            fmt(r.max_residual),
            ratio.map(fmt).unwrap_or_default()
        ));
    }
    Ok(Outcome::ok(json!({ "f": text, "dim": dim, "points_per_side": pps, "delta0": delta0, "levels": rows })).with_csv("residuals.csv", csv))
}

fn smearings(cfg: &ExperimentConfig, n: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(s) = &cfg.smearings {
        if s.iter().any(|v| v.len() != n) {
            bail!("smearing vectors must have {n} entries");
        }
        return Ok(s.clone());
    }
    let points = cfg.points.as_ref().ok_or_else(|| anyhow!("give --points or smearings"))?;
    points
        .iter()
        .map(|&p| {
            if p >= n {
                return Err(Error::IndexOutOfRange { index: p, size: n }.into());
            }
            let mut v = vec![0.0; n];
            v[p] = 1.0;
            Ok(v)
        })
        .collect()
}

fn correlate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (g, _) = green_setup(cfg)?;
    let tp = two_point(cfg, &g)?;
    let fs = smearings(cfg, g.n())?;
    let star = npoint_by_star(&fs, &tp)?;
    let matching = if fs.len() % 2 == 0 { quasifree_npoint(&fs, &tp)? } else { Complex::new(0.0, 0.0) };
    Ok(Outcome::ok(json!({
        "n": g.n(),
        "state": cfg.state.unwrap_or_default(),
        "order": fs.len(),
        "value": pair(matching),
        "star_route": pair(star),
        "difference": (matching - star).norm(),
    })))
}

fn interaction(cfg: &ExperimentConfig, n: usize, w: Option<&WaveOperator<f64>>) -> Result<Interaction<f64>> {
    let spec = cfg.interaction.as_ref().ok_or_else(|| anyhow!("interact needs an interaction"))?;
    let on_boundary = |i: usize| w.is_some_and(|w| w.past_boundary().contains(i));
    let couplings: Vec<f64> = match spec.couplings.len() {
        1 => (0..n).map(|i| if on_boundary(i) { 0.0 } else { spec.couplings[0] }).collect(),
        m if m == n => spec.couplings.clone(),
        m => bail!("{m} couplings for {n} elements"),
    };
    if spec.powers.is_empty() {
        bail!("the interaction needs at least one power");
    }
    let g: Vec<Complex<f64>> = couplings.iter().map(|&c| c_real(c)).collect();
    let v = spec.powers.iter().fold(PolyFunctional::zero(n), |acc, &p| acc.add(&PolyFunctional::hadamard_monomial(&g, p)));
    Ok(match w {
        Some(w) => Interaction::new(v, w.past_boundary())?,
        None => Interaction::unrestricted(v)?,
    })
}

fn interact(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (g, w) = green_setup(cfg)?;
    let tp = two_point(cfg, &g)?;
    let orientation = cfg.orientation.unwrap_or_default();
    let fp = feynman(&tp, &g, orientation)?;
    let v = interaction(cfg, g.n(), w.as_ref())?;
    let o = cfg.orders.unwrap_or_default();
    let orders = Orders::new(o.hbar, o.lambda);
    let th = InteractingTheory::new(&v, &tp, &fp, orders)?;
    let fs = smearings(cfg, g.n())?;
    let a = th.npoint(&fs)?;
    let b = th.npoint_via_star_int(&fs)?;
    let lambda = cfg.interaction.as_ref().map_or(1.0, |i| i.lambda);
    Ok(Outcome::ok(json!({
        "n": g.n(),
        "orientation": orientation,
        "state": cfg.state.unwrap_or_default(),
        "interaction": cfg.interaction,
        "correlator": correlator_json(&a),
        "via_star_int": correlator_json(&b),
        "route_difference": a.distance(&b),
        "value": pair(omega0_at(&a, 1.0, lambda)),
    })))
}

fn rce_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let src = source(cfg)?;
    let lat = src.lattice.as_ref().ok_or_else(|| anyhow!("rce needs a --lattice source"))?;
    let [i, j] = cfg.subdivide.unwrap_or([(lat.spec.rows - 1) / 2, (lat.spec.cols - 1) / 2]);
    let cs = lat.causet();
    let sub = subdivide_cell(lat, i, j)?;
    let build = |c: &CausalSet| -> Result<WaveOperator<f64>> { Ok(build_plambda(c, &PreferredPast::choose(c, PastRule::MaxLayer)?)) };
    let (w, w2) = (build(cs)?, build(&sub)?);
    let (g, g2) = (greens(&w)?, greens(&w2)?);
    let im = order_preserving_pairs(cs, w.past_boundary(), &sub, w2.past_boundary())?;
    let ip = order_preserving_pairs(cs, w.future_boundary(), &sub, w2.future_boundary())?;
    let r = rce(cs, &sub, &im, &ip, &w, &w2, &g, &g2)?;
    let (ev, ev2) = (cauchy_evolution(&w, &g), cauchy_evolution(&w2, &g2));
    let fmt_pairs = |p: &[(usize, usize)]| p.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>();
    Ok(Outcome::ok(json!({
        "lattice": format!("{}x{}", lat.spec.rows, lat.spec.cols),
        "subdivide": [i, j],
        "n": cs.len(),
        "n_perturbed": sub.len(),
        "past_pairs": fmt_pairs(&im),
        "future_pairs": fmt_pairs(&ip),
        "deviation": r.deviation_from_identity(),
        "condition": ev.condition,
        "condition_perturbed": ev2.condition,
        "rce": matrix_rows(&r.matrix),
    }))
    .with_csv("rce.csv", matrix_csv(&r.matrix)))
}

fn validate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let path = cfg.input.as_ref().ok_or_else(|| anyhow!("validate needs a file"))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = match serde_json::from_str::<CausetFile>(&text) {
        Ok(file) => {
            let rep = file.validate();
            json!({
                "status": if rep.ok { "ok" } else { "invalid" },
                "violations": rep.violations,
                "naturally_labelled": rep.naturally_labelled,
                "checksum": rep.checksum,
            })
        }
        Err(e) => json!({ "status": "invalid", "violations": [format!("parse error: {e}")] }),
    };
    let ok = report["status"] == "ok";
    Ok(Outcome { json: report, csv: Vec::new(), ok })
}
