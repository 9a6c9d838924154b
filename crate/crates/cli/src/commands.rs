use std::fs;

use ellipsoidal::bem::{convergence_study, mesh_semiaxes};
use ellipsoidal::coords::ROUND_TRIP_TOL;
use ellipsoidal::harmonics::{HarmonicBasis, HarmonicIndex};
use ellipsoidal::lame2::eval_f_signed;
use ellipsoidal::solvation::{born_energy, solvation_energy, DielectricModel, PointCharge, KCAL_PER_MOL};
use ellipsoidal::{EllipsoidSystem, Error, LameFunction, Sign};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::charges::read_charges;
use crate::cli::{Cli, Command, Common};
use crate::error::CliError;
use crate::output::{num, Table};

/// Validated inputs shared by every subcommand.
pub struct JobConfig {
    pub common: Common,
    pub command: Command,
    pub charges: Option<Vec<PointCharge>>,
    pub hash: String,
}

impl JobConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let Cli { common, command } = cli;
        if common.order > common.n_max {
            return Err(Error::DegreeTooLarge { n: common.order, n_max: common.n_max }.into());
        }
        if !(common.quad_rel_tol > 0.0 && common.quad_rel_tol < 1.0) {
            return Err(CliError::validation("InvalidInput", "--quad-rel-tol must lie in (0, 1)"));
        }
        DielectricModel::new(common.eps1, common.eps2)?;
        let charges = common.charges.as_deref().map(read_charges).transpose()?;
        let payload = json!({ "common": common, "command": command, "charges": charges });
        let digest = Sha256::digest(payload.to_string().as_bytes());
        let hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { common, command, charges, hash })
    }

    fn system(&self) -> Result<EllipsoidSystem, CliError> {
        let [a, b, c] = self.common.semiaxes;
        Ok(EllipsoidSystem::new(a, b, c)?)
    }

    fn basis(&self, sys: EllipsoidSystem) -> HarmonicBasis {
        let c = &self.common;
        HarmonicBasis::with_options(sys, c.n_max, c.gamma_order, c.quad_rel_tol)
    }

    fn dielectrics(&self) -> Result<DielectricModel, CliError> {
        Ok(DielectricModel::new(self.common.eps1, self.common.eps2)?)
    }

    fn required_charges(&self) -> Result<&[PointCharge], CliError> {
        self.charges
            .as_deref()
            .ok_or_else(|| CliError::validation("InvalidInput", "this subcommand needs --charges FILE"))
    }
}

pub fn run(cfg: &JobConfig) -> Result<Table, CliError> {
    let mut table = match &cfg.command {
        Command::Transform { points, brick } => transform(cfg, points, *brick),
        Command::Lame { degree, p, s } => lame(cfg, *degree, *p, s),
        Command::Harmonic { point } => harmonic(cfg, *point),
        Command::Gamma => gamma(cfg),
        Command::Coulomb { source, field } => coulomb(cfg, *source, *field),
        Command::Solvation => solvation(cfg),
        Command::BornLimit { deltas } => born_limit(cfg, deltas),
        Command::BemValidate { refinements, mesh_out } => bem_validate(cfg, refinements, mesh_out.as_deref()),
    }?;
    table.config_hash = cfg.hash.clone();
    Ok(table)
}

fn sign(s: Sign) -> Value {
    json!(s.value() as i32)
}

fn brick_points(sys: &EllipsoidSystem, n: usize) -> Vec<[f64; 3]> {
    let [a, b, c] = sys.semiaxes();
    let mut pts = Vec::with_capacity(8 * n * n * n);
    for octant in 0..8 {
        let sg = |bit: u32| if (octant >> bit) & 1 == 1 { -1.0 } else { 1.0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = |m: usize| 1.5 * (m as f64 + 0.5) / n as f64;
                    pts.push([sg(0) * a * f(i), sg(1) * b * f(j), sg(2) * c * f(k)]);
                }
            }
        }
    }
    pts
}

fn transform(cfg: &JobConfig, points: &[[f64; 3]], brick: Option<usize>) -> Result<Table, CliError> {
    let sys = cfg.system()?;
    let mut all = points.to_vec();
    if let Some(n) = brick {
        all.extend(brick_points(&sys, n));
    }
    if all.is_empty() {
        return Err(CliError::validation("InvalidInput", "transform needs --point or --brick"));
    }
    let mut t = Table::new(
        "transform",
        "lengths in Å",
        &["x", "y", "z", "lambda", "mu", "nu", "s_lambda", "s_mu", "s_nu", "roundtrip_residual"],
    );
    let mut worst = 0.0_f64;
    for r in all {
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {r:?}")).into());
        }
        let pt = sys.cart_to_ell_unchecked(r);
        let back = sys.ell_to_cart(&pt)?;
        let res = (0..3).map(|i| (back[i] - r[i]).abs()).fold(0.0, f64::max);
        worst = worst.max(res);
        t.push(vec![
            num(r[0]),
            num(r[1]),
            num(r[2]),
            num(pt.lambda),
            num(pt.mu),
            num(pt.nu),
            sign(pt.s_lambda),
            sign(pt.s_mu),
            sign(pt.s_nu),
            num(res),
        ]);
    }
    t.diag("max_roundtrip_residual", num(worst));
    t.diag("roundtrip_tolerance", num(ROUND_TRIP_TOL));
    Ok(t)
}

fn lame(cfg: &JobConfig, n: usize, p: usize, samples: &[f64]) -> Result<Table, CliError> {
    let sys = cfg.system()?;
    if n > cfg.common.n_max {
        return Err(Error::DegreeTooLarge { n, n_max: cfg.common.n_max }.into());
    }
    let f = LameFunction::new(&sys, n, p)?;
    let mut t = Table::new(
        "lame",
        "s in Å; E normalized to leading term s^n; F is the second-kind function, empty for |s| <= k",
        &["n", "p", "class", "separation_constant", "s", "E", "dE_ds", "lame_residual", "F"],
    );
    for &s in samples {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite sample s = {s}")).into());
        }
        let e = f.eval(s, Sign::Plus, Sign::Plus);
        let de = f.derivative(s, Sign::Plus, Sign::Plus).map(num).unwrap_or(Value::Null);
        let res = f.lame_residual(s).map(num).unwrap_or(Value::Null);
        let second = if s.abs() > sys.k() {
            num(eval_f_signed(&f, s, Sign::Plus, Sign::Plus, cfg.common.quad_rel_tol)?.f_value)
        } else {
            Value::Null
        };
        t.push(vec![
            json!(n),
            json!(p),
            json!(f.cls.tag.to_string()),
            num(f.separation_constant),
            num(s),
            num(e),
            de,
            res,
            second,
        ]);
    }
    t.diag("p_local", f.cls.p_local);
    t.diag("coefficients", f.coeffs.iter().map(|&c| num(c)).collect::<Vec<_>>());
    Ok(t)
}

fn harmonic(cfg: &JobConfig, point: [f64; 3]) -> Result<Table, CliError> {
    let sys = cfg.system()?;
    let basis = cfg.basis(sys);
    let pt = sys.cart_to_ell(point)?;
    let mut t = Table::new(
        "harmonic",
        "lengths in Å; exterior column empty inside the focal ellipse",
        &["n", "p", "interior_solid", "exterior_solid"],
    );
    for idx in HarmonicIndex::up_to(cfg.common.order) {
        let ext = if pt.lambda.abs() > sys.k() {
            num(basis.exterior_solid(idx, &pt)?)
        } else {
            Value::Null
        };
        t.push(vec![json!(idx.n), json!(idx.p), num(basis.interior_solid(idx, &pt)?), ext]);
    }
    t.diag("lambda", num(pt.lambda));
    t.diag("mu", num(pt.mu));
    t.diag("nu", num(pt.nu));
    Ok(t)
}

fn gamma(cfg: &JobConfig) -> Result<Table, CliError> {
    let basis = cfg.basis(cfg.system()?);
    let mut t = Table::new(
        "gamma",
        "gamma in Å^(4n+2)",
        &["n", "p", "gamma", "error_estimate", "quadrature_order"],
    );
    for idx in HarmonicIndex::up_to(cfg.common.order) {
        let g = basis.gamma(idx)?;
        t.push(vec![
            json!(idx.n),
            json!(idx.p),
            num(g.value),
            num(g.error_estimate),
            json!(g.quadrature_order),
        ]);
    }
    Ok(t)
}

fn coulomb(cfg: &JobConfig, source: [f64; 3], field: [f64; 3]) -> Result<Table, CliError> {
    let basis = cfg.basis(cfg.system()?);
    let e = basis.coulomb_expand(source, field, cfg.common.order)?;
    let mut t = Table::new(
        "coulomb",
        "potentials in Å^-1 (unit charge, unit dielectric)",
        &[
            "n",
            "partial_sum",
            "abs_error",
            "rel_error",
            "max_abs_interior",
            "max_abs_exterior",
            "min_gamma",
            "cancellation_ratio",
            "cancellation",
        ],
    );
    for d in &e.degrees {
        let err = (d.partial_sum - e.exact).abs();
        t.push(vec![
            json!(d.n),
            num(d.partial_sum),
            num(err),
            num(err / e.exact.abs()),
            num(d.max_interior),
            num(d.max_exterior),
            num(d.min_gamma),
            num(d.cancellation_ratio),
            json!(d.cancellation),
        ]);
    }
    t.diag("exact", num(e.exact));
    t.diag("flagged_degrees", e.flagged_degrees());
    Ok(t)
}

fn solvation(cfg: &JobConfig) -> Result<Table, CliError> {
    let basis = cfg.basis(cfg.system()?);
    let charges = cfg.required_charges()?;
    let e = solvation_energy(&basis, charges, &cfg.dielectrics()?, cfg.common.order)?;
    let mut t = Table::new(
        "solvation",
        "energies in kcal/mol and e^2/Å, truncated after degree n",
        &["n", "energy_kcal_per_mol", "energy_e2_per_angstrom"],
    );
    for (n, &v) in e.by_degree.iter().enumerate() {
        t.push(vec![json!(n), num(v * KCAL_PER_MOL), num(v)]);
    }
    t.diag("energy_kcal_per_mol", num(e.kcal_per_mol));
    t.diag("cancellation_degrees", e.cancellation_degrees);
    Ok(t)
}

fn born_limit(cfg: &JobConfig, deltas: &[f64]) -> Result<Table, CliError> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(CliError::validation("InvalidInput", "deltas must be positive"));
    }
    let diel = cfg.dielectrics()?;
    let q = [PointCharge::new([0.0; 3], 1.0)];
    let born = born_energy(1.0, 1.0, &diel)?;
    let mut t = Table::new(
        "born-limit",
        "semiaxes in Å; energies in kcal/mol; unit charge at the origin",
        &["delta", "a", "b", "c", "energy_kcal_per_mol", "born_kcal_per_mol", "rel_deviation"],
    );
    let mut devs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let sys = EllipsoidSystem::new(1.0 + d, 1.0 + d / 5.0, 1.0 + d / 10.0)?;
        let e = solvation_energy(&cfg.basis(sys), &q, &diel, cfg.common.order)?;
        let dev = ((e.gaussian - born) / born).abs();
        devs.push(dev);
        let [a, b, c] = sys.semiaxes();
        t.push(vec![
            num(d),
            num(a),
            num(b),
            num(c),
            num(e.kcal_per_mol),
            num(born * KCAL_PER_MOL),
            num(dev),
        ]);
    }
    t.diag("monotone", devs.windows(2).all(|w| w[1] < w[0]));
    Ok(t)
}

fn bem_validate(
    cfg: &JobConfig,
    refinements: &[usize],
    mesh_out: Option<&std::path::Path>,
) -> Result<Table, CliError> {
    let sys = cfg.system()?;
    let charges = cfg.required_charges()?;
    let diel = cfg.dielectrics()?;
    let semi = solvation_energy(&cfg.basis(sys), charges, &diel, cfg.common.order)?;
    let study = convergence_study(sys.semiaxes(), charges, &diel, refinements, Some(semi.gaussian))?;
    let mut t = Table::new(
        "bem-validate",
        "energies in kcal/mol; deviation from the harmonic solution",
        &["refinement", "panels", "energy_kcal_per_mol", "deviation_kcal_per_mol"],
    );
    for r in &study.rows {
        t.push(vec![
            json!(r.refinement),
            json!(r.panel_count),
            num(r.energy * KCAL_PER_MOL),
            num(r.deviation * KCAL_PER_MOL),
        ]);
    }
    t.diag("semi_analytic_kcal_per_mol", num(semi.kcal_per_mol));
    t.diag("slope", num(study.slope));
    t.diag("extrapolated_kcal_per_mol", num(study.extrapolated * KCAL_PER_MOL));
    t.diag(
        "extrapolated_rel_gap",
        num(((study.extrapolated - semi.gaussian) / semi.gaussian).abs()),
    );
    if let (Some(path), Some(&finest)) = (mesh_out, refinements.iter().max()) {
        let mesh = mesh_semiaxes(sys.semiaxes(), finest)?;
        fs::write(path, mesh.to_triangle_soup()).map_err(CliError::io)?;
    }
    Ok(t)
}
