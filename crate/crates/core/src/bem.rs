//! Dense boundary-element solver for point charges in a dielectric
//! ellipsoid, used to cross-check the harmonic solution.
//!
//! The unknown is an apparent surface charge density `sigma`, one value per
//! flat panel, collocated at panel centroids. With
//! `Phi_src = sum q_k / (eps1 |r - r_k|)`, flux continuity gives
//!
//! `2 pi (eps1 + eps2)/(eps2 - eps1) sigma_i
//!     - sum_{j != i} A_j sigma_j d/dn_i (1/|c_i - c_j|) = dPhi_src/dn (c_i)`.
//!
//! The reaction potential at a charge is `sum_i sigma_i A_i / |r_k - c_i|`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::coords::EllipsoidSystem;
use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;
use crate::solvation::{DielectricModel, PointCharge, KCAL_PER_MOL};

/// Largest refinement level accepted (20 * 4^5 panels).
pub const MAX_REFINEMENT: usize = 5;

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriMesh {
    pub vertices: Vec<V3>,
    pub triangles: Vec<[usize; 3]>,
    pub centroids: Vec<V3>,
    pub areas: Vec<f64>,
    pub normals: Vec<V3>,
}

impl TriMesh {
    fn from_parts(vertices: Vec<V3>, mut triangles: Vec<[usize; 3]>) -> Self {
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for t in &mut triangles {
            let [p0, p1, p2] = t.map(|i| vertices[i]);
            let c = [
                (p0[0] + p1[0] + p2[0]) / 3.0,
                (p0[1] + p1[1] + p2[1]) / 3.0,
                (p0[2] + p1[2] + p2[2]) / 3.0,
            ];
            let mut n = cross(sub(p1, p0), sub(p2, p0));
            if dot(n, c) < 0.0 {
                t.swap(1, 2);
                n = n.map(|v| -v);
            }
            let len = norm(n);
            centroids.push(c);
            areas.push(0.5 * len);
            normals.push(n.map(|v| v / len));
        }
        Self {
            vertices,
            triangles,
            centroids,
            areas,
            normals,
        }
    }

    pub fn panel_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Plain-text triangle soup: a header line `nv nt`, then one `x y z`
    /// line per vertex, then one zero-based `i j k` line per triangle.
    pub fn to_triangle_soup(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

/// Unit icosphere: an icosahedron subdivided `refinement` times with new
/// vertices projected onto the sphere.
fn icosphere(refinement: usize) -> (Vec<V3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<V3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| {
        let l = norm(*v);
        v.map(|x| x / l)
    })
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<V3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = [
                    vertices[a][0] + vertices[b][0],
                    vertices[a][1] + vertices[b][1],
                    vertices[a][2] + vertices[b][2],
                ];
                let l = norm(m);
                vertices.push(m.map(|x| x / l));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Icosphere mesh scaled per axis by `semiaxes`. Accepts equal semiaxes,
/// so a sphere can be meshed too.
pub fn mesh_semiaxes(semiaxes: [f64; 3], refinement: usize) -> Result<TriMesh> {
    if refinement > MAX_REFINEMENT {
        return Err(Error::InvalidInput(format!(
            "refinement {refinement} exceeds {MAX_REFINEMENT}"
        )));
    }
    if semiaxes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput(format!("semiaxes {semiaxes:?} must be positive")));
    }
    let (unit, triangles) = icosphere(refinement);
    let vertices = unit
        .iter()
        .map(|v| [v[0] * semiaxes[0], v[1] * semiaxes[1], v[2] * semiaxes[2]])
        .collect();
    Ok(TriMesh::from_parts(vertices, triangles))
}

pub fn mesh_ellipsoid(sys: &EllipsoidSystem, refinement: usize) -> Result<TriMesh> {
    mesh_semiaxes(sys.semiaxes(), refinement)
}

/// Surface area of the ellipsoid with the given semiaxes by tensor
/// Gauss-Legendre quadrature over the spherical parametrization.
pub fn ellipsoid_area(semiaxes: [f64; 3], order: usize) -> Result<f64> {
    let [a, b, c] = semiaxes;
    let th = gauss_legendre(order, 0.0, PI)?;
    let ph = gauss_legendre(order, 0.0, 2.0 * PI)?;
    let mut total = 0.0;
    for (&t, &wt) in th.nodes.iter().zip(&th.weights) {
        let (st, ct) = t.sin_cos();
        for (&p, &wp) in ph.nodes.iter().zip(&ph.weights) {
            let (sp, cp) = p.sin_cos();
            let g = (b * c * st * cp).powi(2) + (a * c * st * sp).powi(2) + (a * b * ct).powi(2);
            total += wt * wp * st * g.sqrt();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BemSolution {
    pub sigma: Vec<f64>,
    /// e²/Å.
    pub energy: f64,
    pub kcal_per_mol: f64,
    pub panel_count: usize,
    pub induced_charge: f64,
}

/// Solves the apparent-surface-charge equation by centroid collocation and
/// a dense LU factorization.
pub fn solve_bem(mesh: &TriMesh, semiaxes: [f64; 3], charges: &[PointCharge], diel: &DielectricModel) -> Result<BemSolution> {
    let n = mesh.panel_count();
    for c in charges {
        let [x, y, z] = c.position;
        let s = (x / semiaxes[0]).powi(2) + (y / semiaxes[1]).powi(2) + (z / semiaxes[2]).powi(2);
        if !(s < 1.0) {
            return Err(Error::ChargeOutsideEllipsoid { x, y, z });
        }
    }
    if diel.eps1 == diel.eps2 {
        return Ok(BemSolution {
            sigma: vec![0.0; n],
            energy: 0.0,
            kcal_per_mol: 0.0,
            panel_count: n,
            induced_charge: 0.0,
        });
    }
    let diag = 2.0 * PI * (diel.eps1 + diel.eps2) / (diel.eps2 - diel.eps1);

    let mut rows = vec![0.0; n * n];
    rows.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let (ci, ni) = (mesh.centroids[i], mesh.normals[i]);
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if i == j {
                diag
            } else {
                let d = sub(ci, mesh.centroids[j]);
                let r = norm(d);
                mesh.areas[j] * dot(d, ni) / (r * r * r)
            };
        }
    });
    let a = Mat::<f64>::from_fn(n, n, |i, j| rows[i * n + j]);
    drop(rows);

    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| {
        let (ci, ni) = (mesh.centroids[i], mesh.normals[i]);
        charges
            .iter()
            .map(|c| {
                let d = sub(ci, c.position);
                let r = norm(d);
                -c.q / diel.eps1 * dot(d, ni) / (r * r * r)
            })
            .sum::<f64>()
    });

    let x = a.partial_piv_lu().solve(&rhs);
    let sigma: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::SingularSystem("non-finite surface charge".into()));
    }

    let mut energy = 0.0;
    for c in charges {
        let psi: f64 = (0..n)
            .map(|i| sigma[i] * mesh.areas[i] / norm(sub(c.position, mesh.centroids[i])))
            .sum();
        energy += 0.5 * c.q * psi;
    }
    let induced_charge = sigma.iter().zip(&mesh.areas).map(|(s, a)| s * a).sum();
    Ok(BemSolution {
        sigma,
        energy,
        kcal_per_mol: energy * KCAL_PER_MOL,
        panel_count: n,
        induced_charge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub refinement: usize,
    pub panel_count: usize,
    /// e²/Å.
    pub energy: f64,
    /// `|energy - reference|`, or against the extrapolated limit when no
    /// reference is given.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares `-d log(deviation) / d log(panel_count)`.
    pub slope: f64,
    /// Limit of `E(N) = E_inf + C/N` through the two finest meshes.
    pub extrapolated: f64,
    pub reference: Option<f64>,
}

/// Solves on each refinement level and fits the rate of convergence.
pub fn convergence_study(
    semiaxes: [f64; 3],
    charges: &[PointCharge],
    diel: &DielectricModel,
    refinements: &[usize],
    reference: Option<f64>,
) -> Result<ConvergenceStudy> {
    if refinements.len() < 3 {
        return Err(Error::InvalidInput("convergence study needs at least 3 refinement levels".into()));
    }
    let mut solved = Vec::with_capacity(refinements.len());
    for &r in refinements {
        let mesh = mesh_semiaxes(semiaxes, r)?;
        let sol = solve_bem(&mesh, semiaxes, charges, diel)?;
        solved.push((r, sol.panel_count, sol.energy));
    }
    let (_, n1, e1) = solved[solved.len() - 2];
    let (_, n2, e2) = solved[solved.len() - 1];
    let (n1, n2) = (n1 as f64, n2 as f64);
    let extrapolated = (n2 * e2 - n1 * e1) / (n2 - n1);
    let target = reference.unwrap_or(extrapolated);

    let rows: Vec<ConvergenceRow> = solved
        .iter()
        .map(|&(refinement, panel_count, energy)| ConvergenceRow {
            refinement,
            panel_count,
            energy,
            deviation: (energy - target).abs(),
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| ((r.panel_count as f64).ln(), r.deviation.ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    Ok(ConvergenceStudy {
        rows,
        slope: -sxy / sxx,
        extrapolated,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn icosahedron_counts() {
        for r in 0..=3 {
            let m = mesh_semiaxes([1.0, 1.0, 1.0], r).unwrap();
            assert_eq!(m.panel_count(), 20 * 4usize.pow(r as u32));
            assert_eq!(m.vertices.len(), 10 * 4usize.pow(r as u32) + 2);
        }
    }

    #[test]
    fn normals_outward_and_areas_positive() {
        let m = mesh_semiaxes([15.0, 12.0, 10.0], 2).unwrap();
        for i in 0..m.panel_count() {
            assert!(m.areas[i] > 0.0);
            assert!(dot(m.normals[i], m.centroids[i]) > 0.0);
            assert_relative_eq!(norm(m.normals[i]), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn area_converges_to_analytic() {
        let exact = ellipsoid_area([15.0, 12.0, 10.0], 96).unwrap();
        let m = mesh_semiaxes([15.0, 12.0, 10.0], 3).unwrap();
        assert_eq!(m.panel_count(), 1280);
        assert!((m.total_area() / exact - 1.0).abs() < 0.01);
        assert_relative_eq!(ellipsoid_area([1.0, 1.0, 1.0], 32).unwrap(), 4.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn scaled_mesh_matches_direct_mesh() {
        let sys = EllipsoidSystem::new(15.0, 12.0, 10.0).unwrap();
        let a = mesh_ellipsoid(&sys, 2).unwrap();
        let b = mesh_semiaxes([15.0, 12.0, 10.0], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equal_dielectrics_give_zero() {
        let m = mesh_semiaxes([2.0, 1.5, 1.0], 1).unwrap();
        let d = DielectricModel::new(4.0, 4.0).unwrap();
        let s = solve_bem(&m, [2.0, 1.5, 1.0], &[PointCharge::new([0.1, 0.0, 0.0], 1.0)], &d).unwrap();
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn born_sphere() {
        let d = DielectricModel::new(4.0, 80.0).unwrap();
        let m = mesh_semiaxes([1.0; 3], 4).unwrap();
        let s = solve_bem(&m, [1.0; 3], &[PointCharge::new([0.0; 3], 1.0)], &d).unwrap();
        let born = 0.5 * (1.0 / 80.0 - 1.0 / 4.0);
        assert!((s.energy / born - 1.0).abs() < 0.01, "{} vs {born}", s.energy);
        let gauss = 1.0 / 80.0 - 1.0 / 4.0;
        assert!((s.induced_charge / gauss - 1.0).abs() < 0.01);
    }

    #[test]
    fn triangle_soup_layout() {
        let m = mesh_semiaxes([1.0; 3], 0).unwrap();
        let soup = m.to_triangle_soup();
        let lines: Vec<&str> = soup.lines().collect();
        assert_eq!(lines[0], "12 20");
        assert_eq!(lines.len(), 1 + 12 + 20);
    }
}
