//! Small fixed-size vector and matrix types used by the renderer and the
//! geometry code. Generic over [`Real`].

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
    /// z component of the 3D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}
impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}
impl<T: Real> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
    /// Unit vector, or zero when the norm vanishes.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self.scale(T::one() / n)
        } else {
            Self::zero()
        }
    }
    pub fn component_mul(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }
    pub fn min_component(self) -> T {
        self.x.min(self.y).min(self.z)
    }
    pub fn max_component(self) -> T {
        self.x.max(self.y).max(self.z)
    }
    /// Index of the smallest component; ties resolve to the lowest index.
    pub fn argmin(self) -> usize {
        let mut k = 0;
        if self.y < self[k] {
            k = 1;
        }
        if self.z < self[k] {
            k = 2;
        }
        k
    }
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}
impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}
impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}
impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}
impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}
impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}
impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}
impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }
    pub fn zero() -> Self {
        Self::from_rows([[T::zero(); 3]; 3])
    }
    pub fn identity() -> Self {
        Self::diag(Vec3::splat(T::one()))
    }
    pub fn diag(d: Vec3<T>) -> Self {
        let z = T::zero();
        Self::from_rows([[d.x, z, z], [z, d.y, z], [z, z, d.z]])
    }
    pub fn from_cols(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Self {
        Self::from_rows([[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]])
    }
    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }
    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from_array(self.m[i])
    }
    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s += self.m[i][k] * o.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }
    pub fn scale(&self, s: T) -> Self {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }
    pub fn add(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }
    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
    /// Largest deviation of `RᵀR` from identity.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose().mul_mat(self);
        let mut e = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                e = e.max((p.m[i][j] - target).abs());
            }
        }
        e
    }
    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut r = Mat3::<U>::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = U::lit(self.m[i][j].as_f64());
            }
        }
        r
    }

    /// Rotation about the z axis.
    pub fn rot_z(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let z = T::zero();
        Self::from_rows([[c, -s, z], [s, c, z], [z, z, T::one()]])
    }
    pub fn rot_x(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let z = T::zero();
        Self::from_rows([[T::one(), z, z], [z, c, -s], [z, s, c]])
    }
    pub fn rot_y(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let z = T::zero();
        Self::from_rows([[c, z, s], [z, T::one(), z], [-s, z, c]])
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
    /// Returns eigenvalues ascending with matching unit eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> (Vec3<T>, Mat3<T>) {
        let mut a = self.m;
        let mut v = Self::identity().m;
        let two = T::lit(2.0);
        for _sweep in 0..64 {
            let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
            let scale = a[0][0].abs() + a[1][1].abs() + a[2][2].abs() + off;
            if off <= T::epsilon() * scale || off == T::zero() {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
        let vals = Vec3::new(a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]);
        let vecs = Mat3::from_cols(
            Mat3::from_rows(v).col(order[0]),
            Mat3::from_rows(v).col(order[1]),
            Mat3::from_rows(v).col(order[2]),
        );
        (vals, vecs)
    }
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }
    pub fn determinant(&self) -> T {
        self.a * self.c - self.b * self.b
    }
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if !(det > T::zero()) || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        Some(Self::new(self.c * inv, -self.b * inv, self.a * inv))
    }
    /// Eigenvalues, larger first.
    pub fn eigenvalues(&self) -> (T, T) {
        let half = T::lit(0.5);
        let mid = half * (self.a + self.c);
        let diff = half * (self.a - self.c);
        let r = (diff * diff + self.b * self.b).sqrt();
        (mid + r, mid - r)
    }
    /// Largest absolute entry.
    pub fn max_abs_entry(&self) -> T {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }
    pub fn quad_form(&self, d: Vec2<T>) -> T {
        self.a * d.x * d.x + T::lit(2.0) * self.b * d.x * d.y + self.c * d.y * d.y
    }
}

/// Quaternion stored as `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }
    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let a = axis.normalized();
        let (s, c) = (angle * T::lit(0.5)).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }
    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }
    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }
    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
    /// Rotation matrix of the normalized quaternion.
    pub fn to_rotation_matrix(self) -> Mat3<T> {
        let q = self.normalized();
        unit_quat_matrix(q.w, q.x, q.y, q.z)
    }
    /// Quaternion of a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(r: &Mat3<T>) -> Self {
        let m = &r.m;
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * T::lit(2.0);
            Self::new(quarter * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
            Self::new((m[2][1] - m[1][2]) / s, quarter * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        } else if m[1][1] > m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
            Self::new((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, quarter * s, (m[1][2] + m[2][1]) / s)
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
            Self::new((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, quarter * s)
        };
        q.normalized()
    }
    pub fn cast<U: Real>(self) -> Quat<U> {
        Quat::new(
            U::lit(self.w.as_f64()),
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

/// Rotation matrix of a unit quaternion given by its components.
pub fn unit_quat_matrix<T: Real>(w: T, x: T, y: T, z: T) -> Mat3<T> {
    let one = T::one();
    let two = T::lit(2.0);
    Mat3::from_rows([
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ])
}

/// Back-propagates a gradient on the rotation matrix to the raw (possibly
/// non-unit) quaternion that produced it through normalization.
pub fn quat_matrix_backward<T: Real>(q: Quat<T>, grad_r: &Mat3<T>) -> Quat<T> {
    let n = q.norm();
    let (w, x, y, z) = (q.w / n, q.x / n, q.y / n, q.z / n);
    let g = &grad_r.m;
    let two = T::lit(2.0);
    // d R / d(w,x,y,z) contracted against grad_r.
    let gw = two * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0] + x * g[2][1]);
    let gx = two
        * (y * g[0][1] + z * g[0][2] + y * g[1][0] - two * x * g[1][1] - w * g[1][2] + z * g[2][0]
            + w * g[2][1]
            - two * x * g[2][2]);
    let gy = two
        * (-two * y * g[0][0] + x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2] - w * g[2][0]
            + z * g[2][1]
            - two * y * g[2][2]);
    let gz = two
        * (-two * z * g[0][0] - w * g[0][1] + x * g[0][2] + w * g[1][0] - two * z * g[1][1]
            + y * g[1][2]
            + x * g[2][0]
            + y * g[2][1]);
    // Project out the radial component and undo the 1/|q| scaling.
    let dot = w * gw + x * gx + y * gy + z * gz;
    Quat::new(
        (gw - w * dot) / n,
        (gx - x * dot) / n,
        (gy - y * dot) / n,
        (gz - z * dot) / n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let r = Quat::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.7f64).to_rotation_matrix();
        let d = Mat3::diag(Vec3::new(3.0, 0.5, 1.25));
        let a = r.mul_mat(&d).mul_mat(&r.transpose());
        let (vals, vecs) = a.symmetric_eigen();
        assert!((vals.x - 0.5).abs() < 1e-12);
        assert!((vals.y - 1.25).abs() < 1e-12);
        assert!((vals.z - 3.0).abs() < 1e-12);
        let v0 = vecs.col(0);
        let av = a.mul_vec(v0);
        assert!((av - v0.scale(0.5)).norm() < 1e-10);
    }

    #[test]
    fn quaternion_matrix_round_trip() {
        let q = Quat::from_axis_angle(Vec3::new(-0.3, 0.2, 0.9), 2.5f64);
        let back = Quat::from_rotation_matrix(&q.to_rotation_matrix());
        let same = (back.to_array().iter().zip(q.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .min(back.to_array().iter().zip(q.to_array()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max));
        assert!(same < 1e-12);
    }

    #[test]
    fn quat_backward_matches_finite_differences() {
        let q = Quat::new(0.9f64, -0.2, 0.35, 0.1);
        // Loss = sum_ij W_ij R_ij with a fixed weight matrix.
        let w = Mat3::from_rows([[0.3, -1.0, 0.2], [0.5, 0.7, -0.4], [1.1, 0.05, -0.6]]);
        let loss = |q: Quat<f64>| {
            let r = q.to_rotation_matrix();
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| w.m[i][j] * r.m[i][j]).sum::<f64>()
        };
        let g = quat_matrix_backward(q, &w).to_array();
        let h = 1e-6;
        for k in 0..4 {
            let mut p = q.to_array();
            let mut m = q.to_array();
            p[k] += h;
            m[k] -= h;
            let fd = (loss(Quat::from_array(p)) - loss(Quat::from_array(m))) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "component {k}: fd {fd} analytic {}", g[k]);
        }
    }
}
