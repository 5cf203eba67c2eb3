//! Surface coordinates, rotations and placement constraints.
//!
//! Each surface carries a local frame whose x/y axes span the element grid and
//! whose +z axis is the radiating face. A pose maps that frame into the global
//! frame, with the base station at the global origin.

use crate::error::{Error, Result};
use crate::math::{RotationMatrix, Vec3};
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-9;
const DEGENERATE_CROSS: f64 = 1e-6;

/// Rotation by `alpha` radians about the unit axis `v`.
pub fn rodrigues(v: Vec3, alpha: f64) -> Result<RotationMatrix> {
    if !v.is_unit(UNIT_TOL) {
        return Err(Error::invalid(format!("rotation axis has norm {}", v.norm())));
    }
    let (s, c) = alpha.sin_cos();
    let a = [v.x, v.y, v.z];
    let skew = [[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            r[i][j] = c * id + (1.0 - c) * a[i] * a[j] + s * skew[i][j];
        }
    }
    Ok(RotationMatrix(r))
}

/// Rotation taking `u_local` onto `u_global` about their common normal.
///
/// Parallel inputs give the identity. Antiparallel inputs are rotated by π
/// about the axis orthogonal to `u_local` closest to e₁.
pub fn rotation_between(u_local: Vec3, u_global: Vec3) -> Result<RotationMatrix> {
    if !u_local.is_unit(UNIT_TOL) || !u_global.is_unit(UNIT_TOL) {
        return Err(Error::invalid("rotation_between needs unit vectors"));
    }
    let cross = u_local.cross(u_global);
    let cn = cross.norm();
    let dot = u_local.dot(u_global);
    if cn < DEGENERATE_CROSS && dot < 0.0 {
        return rodrigues(antiparallel_axis(u_local), std::f64::consts::PI);
    }
    if cn < 1e-15 {
        return Ok(RotationMatrix::IDENTITY);
    }
    let axis = cross * (1.0 / cn);
    rodrigues(axis, cn.atan2(dot))
}

/// Point at fraction `t` along the geodesic from `a` to `b`.
pub fn interpolate_rotation(a: &RotationMatrix, b: &RotationMatrix, t: f64) -> RotationMatrix {
    let d = a.transpose().mul(b);
    let m = d.0;
    let tr = m[0][0] + m[1][1] + m[2][2];
    let angle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    if angle < 1e-12 {
        return *a;
    }
    let w = Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]);
    let axis = if w.norm() > 1e-9 {
        w * (1.0 / w.norm())
    } else {
        // angle near π: axis from the symmetric part
        let c = (0..3).max_by(|&i, &j| m[i][i].total_cmp(&m[j][j])).unwrap();
        let v = Vec3::new(m[0][c] + if c == 0 { 1.0 } else { 0.0 }, m[1][c] + if c == 1 { 1.0 } else { 0.0 }, m[2][c] + if c == 2 { 1.0 } else { 0.0 });
        v.normalized().unwrap_or(Vec3::E1)
    };
    a.mul(&rodrigues(axis, t * angle).expect("unit axis"))
}

fn antiparallel_axis(u: Vec3) -> Vec3 {
    let e1 = Vec3::E1;
    (e1 - u * u.dot(e1))
        .normalized()
        .unwrap_or_else(|| (Vec3::E2 - u * u.dot(Vec3::E2)).normalized().unwrap())
}

/// Element grid and feed placement of one surface, in its local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceLayout {
    pub mx: usize,
    pub my: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Feed positions in the local frame (z = 0 plane).
    pub feeds: Vec<Vec3>,
}

impl SurfaceLayout {
    pub fn new(mx: usize, my: usize, spacing: f64, feeds: Vec<Vec3>) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::invalid("element counts must be at least 1"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        Ok(SurfaceLayout { mx, my, spacing, feeds })
    }

    pub fn elements(&self) -> usize {
        self.mx * self.my
    }

    pub fn num_feeds(&self) -> usize {
        self.feeds.len()
    }

    /// Local coordinate of element (m_x, m_y); flat index m_x·M_y + m_y.
    pub fn local_element(&self, mx: usize, my: usize) -> Vec3 {
        Vec3::new(mx as f64 * self.spacing, my as f64 * self.spacing, 0.0)
    }

    /// All local element coordinates in flat-index order.
    pub fn local_elements(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.elements());
        for mx in 0..self.mx {
            for my in 0..self.my {
                out.push(self.local_element(mx, my));
            }
        }
        out
    }

    /// Geometric center of the element grid in the local frame.
    pub fn aperture_center(&self) -> Vec3 {
        Vec3::new(
            (self.mx as f64 - 1.0) * self.spacing / 2.0,
            (self.my as f64 - 1.0) * self.spacing / 2.0,
            0.0,
        )
    }

    /// Smallest pairwise feed distance (infinite for fewer than two feeds).
    pub fn min_feed_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.feeds.len() {
            for j in i + 1..self.feeds.len() {
                d = d.min(self.feeds[i].distance(self.feeds[j]));
            }
        }
        d
    }
}

/// Candidate surface-center positions (the translation slots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTable {
    pub positions: Vec<Vec3>,
}

impl SlotTable {
    /// `n` points of a Fibonacci lattice on a sphere of the given radius.
    pub fn fibonacci(n: usize, radius: f64) -> Self {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let positions = (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
            })
            .collect();
        SlotTable { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Orientation state of one surface: rotation plus selected slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePose {
    pub rotation: RotationMatrix,
    pub slot: usize,
    /// Surface reference point q_b, copied from the slot table.
    pub position: Vec3,
}

impl SurfacePose {
    pub fn new(rotation: RotationMatrix, slot: usize, table: &SlotTable) -> Result<Self> {
        let position = *table
            .positions
            .get(slot)
            .ok_or_else(|| Error::invalid(format!("slot {slot} out of range")))?;
        Ok(SurfacePose { rotation, slot, position })
    }

    /// Pose at an arbitrary point, used by tests and fixed deployments.
    pub fn at(rotation: RotationMatrix, position: Vec3) -> Self {
        SurfacePose { rotation, slot: 0, position }
    }

    pub fn identity() -> Self {
        SurfacePose::at(RotationMatrix::IDENTITY, Vec3::ZERO)
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation.normal()
    }

    /// Maps a local-frame point into the global frame.
    pub fn to_global(&self, local: Vec3) -> Vec3 {
        self.position + self.rotation.apply(local)
    }
}

/// Rotation whose +z axis points along `position` (radially outward).
pub fn radial_rotation(position: Vec3) -> RotationMatrix {
    match position.normalized() {
        Some(n) => rotation_between(Vec3::E3, n).expect("unit inputs"),
        None => RotationMatrix::IDENTITY,
    }
}

pub fn element_coords(pose: &SurfacePose, layout: &SurfaceLayout, mx: usize, my: usize) -> Result<Vec3> {
    if mx >= layout.mx || my >= layout.my {
        return Err(Error::invalid(format!("element ({mx},{my}) outside {}x{}", layout.mx, layout.my)));
    }
    Ok(pose.to_global(layout.local_element(mx, my)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Ordered pairs (b1, b2) where surface b2 lies in front of surface b1.
    pub reflection: Vec<(usize, usize)>,
    /// Surfaces facing back toward the base station.
    pub blockage: Vec<usize>,
    /// Unordered pairs (b1 < b2) closer than the minimum distance.
    pub collision: Vec<(usize, usize)>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.reflection.is_empty() && self.blockage.is_empty() && self.collision.is_empty()
    }
}

const FEAS_TOL: f64 = 1e-12;

/// Checks reflection, blockage and collision constraints for a set of poses.
pub fn check_feasible(poses: &[SurfacePose], normals: &[Vec3], d_min: f64) -> FeasibilityReport {
    assert_eq!(poses.len(), normals.len(), "one normal per pose");
    let mut rep = FeasibilityReport::default();
    for (b, (p, n)) in poses.iter().zip(normals).enumerate() {
        if n.dot(p.position) < -FEAS_TOL {
            rep.blockage.push(b);
        }
    }
    for b1 in 0..poses.len() {
        for b2 in 0..poses.len() {
            if b1 == b2 {
                continue;
            }
            if normals[b1].dot(poses[b2].position - poses[b1].position) > FEAS_TOL {
                rep.reflection.push((b1, b2));
            }
            if b1 < b2 && poses[b1].position.distance(poses[b2].position) < d_min {
                rep.collision.push((b1, b2));
            }
        }
    }
    rep
}

/// Feasibility using each pose's own normal.
pub fn check_poses(poses: &[SurfacePose], d_min: f64) -> FeasibilityReport {
    let normals: Vec<Vec3> = poses.iter().map(|p| p.normal()).collect();
    check_feasible(poses, &normals, d_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rodrigues_zero_angle_is_identity() {
        let r = rodrigues(Vec3::E3, 0.0).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
    }

    #[test]
    fn rodrigues_half_turn_about_x() {
        let r = rodrigues(Vec3::E1, PI).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((r.0[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let r = rodrigues(Vec3::E3, PI / 2.0).unwrap();
        assert!(close(r.apply(Vec3::E1), Vec3::E2, 1e-15));
    }

    #[test]
    fn rodrigues_rejects_non_unit_axis() {
        assert!(rodrigues(Vec3::new(1.0, 1.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn rotation_between_cases() {
        let r = rotation_between(Vec3::E3, Vec3::E3).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
        let r = rotation_between(Vec3::E3, Vec3::E1).unwrap();
        assert!(close(r.apply(Vec3::E3), Vec3::E1, 1e-12));
        let r = rotation_between(Vec3::E3, -Vec3::E3).unwrap();
        assert!(close(r.apply(Vec3::E3), -Vec3::E3, 1e-12));
        assert!(r.orthonormality_error() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antiparallel_axis_along_e1_falls_back() {
        let r = rotation_between(Vec3::E1, -Vec3::E1).unwrap();
        assert!(close(r.apply(Vec3::E1), -Vec3::E1, 1e-12));
    }

    #[test]
    fn element_coords_examples() {
        let layout = SurfaceLayout::new(4, 4, 0.005, vec![]).unwrap();
        let p = element_coords(&SurfacePose::identity(), &layout, 2, 3).unwrap();
        assert!(close(p, Vec3::new(0.010, 0.015, 0.0), 1e-15));

        let pose = SurfacePose::at(rodrigues(Vec3::new(0.6, 0.0, 0.8), 1.1).unwrap(), Vec3::new(0.3, -0.2, 0.9));
        assert_eq!(element_coords(&pose, &layout, 0, 0).unwrap(), pose.position);

        let unit = SurfaceLayout::new(2, 2, 1.0, vec![]).unwrap();
        let quarter = SurfacePose::at(rodrigues(Vec3::E3, PI / 2.0).unwrap(), Vec3::ZERO);
        assert!(close(element_coords(&quarter, &unit, 1, 0).unwrap(), Vec3::E2, 1e-15));
        assert!(element_coords(&quarter, &unit, 2, 0).is_err());
    }

    #[test]
    fn coincident_surfaces_collide() {
        let p = SurfacePose::at(RotationMatrix::IDENTITY, Vec3::new(0.0, 0.0, 1.0));
        let rep = check_feasible(&[p, p], &[Vec3::E3, Vec3::E3], 0.1);
        assert_eq!(rep.collision, vec![(0, 1)]);
    }

    #[test]
    fn single_radial_surface_is_feasible() {
        let q = Vec3::new(0.3, 0.4, 0.5);
        let p = SurfacePose::at(radial_rotation(q), q);
        assert!(check_poses(&[p], 0.25).is_feasible());
    }

    #[test]
    fn radial_sphere_layout_is_feasible() {
        // n_b1 . (q_b2 - q_b1) = q̂_b1 . q_b2 - 1 <= 0 on a unit sphere.
        let table = SlotTable::fibonacci(12, 1.0);
        let poses: Vec<SurfacePose> = (0..12)
            .map(|i| SurfacePose::new(radial_rotation(table.positions[i]), i, &table).unwrap())
            .collect();
        let rep = check_poses(&poses, 0.25);
        assert!(rep.is_feasible(), "{rep:?}");
        for a in &poses {
            for b in &poses {
                assert!(a.normal().dot(b.position - a.position) <= 1e-12);
            }
        }
    }

    #[test]
    fn surface_in_front_violates_reflection() {
        let a = SurfacePose::at(RotationMatrix::IDENTITY, Vec3::new(0.0, 0.0, 1.0));
        let b = SurfacePose::at(RotationMatrix::IDENTITY, Vec3::new(0.0, 0.0, 2.0));
        let rep = check_poses(&[a, b], 0.25);
        assert_eq!(rep.reflection, vec![(0, 1)]);
    }

    #[test]
    fn fibonacci_three_points() {
        let t = SlotTable::fibonacci(3, 1.0);
        let zs: Vec<f64> = t.positions.iter().map(|p| p.z).collect();
        assert!((zs[0] - 2.0 / 3.0).abs() < 1e-15 && zs[1].abs() < 1e-15);
        for p in &t.positions {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_hits_endpoints_and_splits_angle() {
        let a = rodrigues(Vec3::E3, 0.3).unwrap();
        let b = rodrigues(Vec3::E3, 1.3).unwrap();
        let mid = interpolate_rotation(&a, &b, 0.5);
        let want = rodrigues(Vec3::E3, 0.8).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((mid.0[i][j] - want.0[i][j]).abs() < 1e-12);
                assert!((interpolate_rotation(&a, &b, 1.0).0[i][j] - b.0[i][j]).abs() < 1e-12);
            }
        }
        assert_eq!(interpolate_rotation(&a, &b, 0.0), a);
        let half = rodrigues(Vec3::E1, PI).unwrap();
        let q = interpolate_rotation(&RotationMatrix::IDENTITY, &half, 0.5);
        assert!(q.orthonormality_error() < 1e-12);
        assert!(close(q.apply(Vec3::E3), Vec3::new(0.0, -1.0, 0.0), 1e-9) || close(q.apply(Vec3::E3), Vec3::E2, 1e-9));
    }
}
