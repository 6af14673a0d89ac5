//! The contraction semigroup generated by `−A^s`, built from the resolvent
//! of the Dirichlet-to-Neumann operator by the exponential formula
//! `T(t)φ ≈ (J_{t/m})^m φ`, with optional reconstruction of the extension
//! field `U(r, t)`.

use std::path::Path;

use serde::Serialize;

use crate::dtn::DtnOperator;
use crate::error::{Error, Result};
use crate::hilbert::HVector;

#[derive(Debug, Clone)]
pub struct UField {
    /// Extension variable `r` at the mesh nodes.
    pub r: Vec<f64>,
    pub time_indices: Vec<usize>,
    /// `values[k][i] = U(r_i, times[time_indices[k]])`.
    pub values: Vec<Vec<HVector>>,
}

#[derive(Debug, Clone)]
pub struct SemigroupTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<HVector>,
    pub substeps: usize,
    pub u_field: Option<UField>,
    /// Largest discretization slack of the underlying extension solves.
    pub eps_disc: f64,
    /// Largest inclusion residual of the Robin solves.
    pub max_step_residual: f64,
}

/// One implicit Euler step, `J_dt^{Λ_s}(state)`.
pub fn step(dtn: &DtnOperator, dt: f64, state: &HVector) -> Result<HVector> {
    dtn.resolve(dt, state)
}

/// `m` resolvent steps of size `t_final/m` from `φ`. When `record_stride` is
/// given, the Dirichlet extension of every `stride`-th state (and the last)
/// is stored as `U(·, t_k)`.
pub fn evolve(
    dtn: &DtnOperator,
    phi: &HVector,
    t_final: f64,
    m: usize,
    record_stride: Option<usize>,
) -> Result<SemigroupTrajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::param(
            "t_final",
            format!("must be positive, got {t_final}"),
        ));
    }
    if m == 0 {
        return Err(Error::param("m", "at least one substep required"));
    }
    if record_stride == Some(0) {
        return Err(Error::param("record_stride", "must be at least 1"));
    }
    let dt = t_final / m as f64;
    let mut times = vec![0.0];
    let mut states = vec![phi.clone()];
    let mut eps_disc = 0.0f64;
    let mut max_step_residual = 0.0f64;
    let mut field = record_stride.map(|_| UField {
        r: dtn.mesh.t_nodes(&dtn.params),
        time_indices: Vec::new(),
        values: Vec::new(),
    });
    let mut guess: Option<Vec<HVector>> = None;

    let record = |k: usize,
                  state: &HVector,
                  warm: Option<&[HVector]>,
                  field: &mut Option<UField>|
     -> Result<()> {
        if let (Some(f), Some(stride)) = (field.as_mut(), record_stride) {
            if k % stride == 0 || k == m {
                let ext = dtn.apply_from(state, warm)?;
                f.time_indices.push(k);
                f.values.push(ext.solution.v.values().to_vec());
            }
        }
        Ok(())
    };
    record(0, phi, None, &mut field)?;

    for k in 1..=m {
        let prev = states.last().unwrap();
        let sol = dtn.resolve_from(dt, prev, guess.as_deref())?;
        eps_disc = eps_disc.max(sol.eps_disc);
        let cert = sol.inclusion_residual;
        max_step_residual = max_step_residual.max(cert);
        let next = sol.trace_v0.clone();
        let nodes = sol.v.values().to_vec();
        record(k, &next, Some(&nodes), &mut field)?;
        guess = Some(nodes);
        times.push(k as f64 * dt);
        states.push(next);
    }
    Ok(SemigroupTrajectory {
        times,
        states,
        substeps: m,
        u_field: field,
        eps_disc,
        max_step_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryAudit {
    /// Largest increase of `‖a_k − b_k‖` between consecutive times.
    pub max_increase: f64,
    /// Largest `max_j (a_k − b_k)_j` (resp. its negative) for ordered initial data; `None` if unordered.
    pub order_violation: Option<f64>,
    pub l1_increase: f64,
    pub linf_increase: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Pairwise contraction of two trajectories on the same time grid. With
/// `lattice` set, also order preservation and `L¹`/`L^∞` non-expansion.
pub fn trajectory_audit(
    a: &SemigroupTrajectory,
    b: &SemigroupTrajectory,
    lattice: bool,
) -> Result<TrajectoryAudit> {
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(Error::MeshMismatch(
            "trajectories use different time grids".into(),
        ));
    }
    let tolerance = 1e-8 + a.eps_disc.max(b.eps_disc);
    let diffs: Vec<HVector> = a.states.iter().zip(&b.states).map(|(x, y)| x - y).collect();
    let incr = |f: &dyn Fn(&HVector) -> f64| {
        diffs
            .windows(2)
            .map(|w| f(&w[1]) - f(&w[0]))
            .fold(0.0, f64::max)
    };
    let max_increase = incr(&|d| d.norm());
    let (mut l1_increase, mut linf_increase, mut order_violation) = (0.0, 0.0, None);
    let mut pass = max_increase <= tolerance;
    if lattice {
        l1_increase = incr(&|d| d.lp_norm(1));
        linf_increase = incr(&|d| d.amax());
        let d0 = &diffs[0];
        let sign = if d0.iter().all(|&x| x <= 0.0) {
            Some(1.0)
        } else if d0.iter().all(|&x| x >= 0.0) {
            Some(-1.0)
        } else {
            None
        };
        order_violation = sign.map(|sg| diffs.iter().map(|d| (d * sg).max()).fold(0.0, f64::max));
        pass &= l1_increase <= tolerance
            && linf_increase <= tolerance
            && order_violation.unwrap_or(0.0) <= tolerance;
    }
    Ok(TrajectoryAudit {
        max_increase,
        order_violation,
        l1_increase,
        linf_increase,
        tolerance,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorAudit {
    /// `max_k ‖Λ_s u_k + (u_k − u_{k−1})/dt‖`.
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares `−Λ_s(states[k])`, re-evaluated by a Dirichlet solve, with the
/// backward difference of the trajectory.
pub fn generator_audit(dtn: &DtnOperator, traj: &SemigroupTrajectory) -> Result<GeneratorAudit> {
    let dt = traj.times[1] - traj.times[0];
    let mut max_error = 0.0f64;
    let mut tolerance = 0.0f64;
    for k in 1..traj.states.len() {
        let lu = dtn.apply(&traj.states[k])?.lambda_s_phi;
        let bd = (&traj.states[k] - &traj.states[k - 1]) / dt;
        max_error = max_error.max((lu + bd).norm());
        tolerance = tolerance.max(5.0 * dtn.cfg.tol * (1.0 + traj.states[k - 1].norm()) / dt);
    }
    Ok(GeneratorAudit {
        max_error,
        tolerance,
        pass: max_error <= tolerance,
    })
}

/// CSV with columns `t, u_0, …`.
pub fn write_trajectory_csv(traj: &SemigroupTrajectory, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let d = traj.states[0].len();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|k| format!("u_{k}")));
    wtr.write_record(&header)?;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![format!("{t:.17e}")];
        row.extend(u.iter().map(|x| format!("{x:.17e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One CSV per recorded time, `u_field_<k>.csv` with columns `r, U_0, …`.
pub fn write_u_field(traj: &SemigroupTrajectory, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let Some(f) = &traj.u_field else {
        return Ok(Vec::new());
    };
    let mut written = Vec::new();
    for (k, vals) in f.time_indices.iter().zip(&f.values) {
        let path = dir.join(format!("u_field_{k:05}.csv"));
        let mut wtr = csv::Writer::from_path(&path)?;
        let d = vals[0].len();
        let mut header = vec!["r".to_string()];
        header.extend((0..d).map(|j| format!("U_{j}")));
        wtr.write_record(&header)?;
        for (r, v) in f.r.iter().zip(vals) {
            let mut row = vec![format!("{r:.17e}")];
            row.extend(v.iter().map(|x| format!("{x:.17e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DVector;

    use super::*;
    use crate::extension::SolverConfig;
    use crate::mesh::{graded_zmesh, FracParams};
    use crate::monops::make_scalar;

    fn scalar(a: f64) -> DtnOperator {
        let op = Arc::new(make_scalar(1, a).unwrap());
        DtnOperator::new(
            op,
            FracParams::new(0.5).unwrap(),
            graded_zmesh(256, 20.0, 2.0).unwrap(),
            SolverConfig::default(),
        )
        .unwrap()
    }

    fn one(x: f64) -> HVector {
        DVector::from_element(1, x)
    }

    #[test]
    fn single_step_examples() {
        let d = scalar(4.0);
        assert_eq!(step(&d, 0.5, &one(0.0)).unwrap()[0], 0.0);
        assert!((step(&d, 0.5, &one(1.0)).unwrap()[0] - 0.5).abs() < 1e-4);
        let traj = evolve(&d, &one(1.0), 0.5, 1, None).unwrap();
        assert_eq!(traj.states[1], step(&d, 0.5, &one(1.0)).unwrap());
    }

    #[test]
    fn zero_trajectory_is_constant() {
        let traj = evolve(&scalar(4.0), &one(0.0), 1.0, 8, Some(4)).unwrap();
        assert!(traj.states.iter().all(|s| s[0] == 0.0));
        let f = traj.u_field.unwrap();
        assert_eq!(f.time_indices, vec![0, 4, 8]);
        assert!(f.values.iter().flatten().all(|v| v[0] == 0.0));
    }

    #[test]
    fn exponential_decay_and_field() {
        let d = scalar(4.0);
        let traj = evolve(&d, &one(1.0), 1.0, 64, Some(32)).unwrap();
        assert_eq!(traj.times.len(), 65);
        let exact = (-2.0f64).exp();
        let euler = (1.0f64 + 2.0 / 64.0).powi(-64);
        assert!((traj.states[64][0] - euler).abs() < 1e-4);
        assert!((traj.states[64][0] - exact).abs() < 4.5e-3);
        let f = traj.u_field.as_ref().unwrap();
        assert_eq!(f.values.last().unwrap()[0], traj.states[64]);
        let g = generator_audit(&d, &traj).unwrap();
        assert!(g.pass, "{g:?}");
    }

    #[test]
    fn audit_pairs() {
        let d = scalar(4.0);
        let a = evolve(&d, &one(1.0), 1.0, 8, None).unwrap();
        let b = evolve(&d, &one(-0.5), 1.0, 8, None).unwrap();
        let same = trajectory_audit(&a, &a, true).unwrap();
        assert_eq!(same.max_increase, 0.0);
        let rep = trajectory_audit(&a, &b, true).unwrap();
        assert!(rep.pass && rep.order_violation.is_some(), "{rep:?}");
        let c = evolve(&d, &one(1.0), 2.0, 8, None).unwrap();
        assert!(trajectory_audit(&a, &c, false).is_err());
    }

    #[test]
    fn writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let traj = evolve(&scalar(1.0), &one(1.0), 1.0, 4, Some(2)).unwrap();
        write_trajectory_csv(&traj, &dir.path().join("traj.csv")).unwrap();
        let files = write_u_field(&traj, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
        assert!(text.starts_with("t,u_0\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
