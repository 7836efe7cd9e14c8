//! Constrained energy minimization on a [`Network`].
//!
//! Minimize `Σ c (x_a - x_b)²` subject to fixed values on some vertices and
//! linear equality constraints `Σ_v β_v x_v = t`. Small systems go through a
//! dense LU of the KKT matrix; large ones through Jacobi-preconditioned CG on
//! the free block plus a Schur complement for the equality rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Network;

/// Above this many unknowns (free vertices plus equality rows) CG is used.
pub const DENSE_LIMIT: usize = 2000;
pub const CG_TOL: f64 = 1e-12;

/// `Σ weights · x = target`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanConstraint {
    pub weights: Vec<(u32, f64)>,
    pub target: f64,
}

/// Fixed vertex values and equality constraints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub dirichlet: Vec<(u32, f64)>,
    pub means: Vec<MeanConstraint>,
}

enum Backend {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Cg { diag: Vec<f64>, z: Vec<Vec<f64>>, schur: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> },
    Trivial,
}

/// A factorized problem: fixed vertex set and constraint rows are frozen,
/// values and targets vary per solve.
pub struct HarmonicSolver<'a> {
    net: &'a Network,
    fixed: Vec<u32>,
    free: Vec<u32>,
    /// Vertex → position among free vertices, or `u32::MAX`.
    pos: Vec<u32>,
    /// Constraint rows split into free and fixed parts.
    rows_free: Vec<Vec<(usize, f64)>>,
    rows_fixed: Vec<Vec<(usize, f64)>>,
    backend: Backend,
}

impl<'a> HarmonicSolver<'a> {
    pub fn new(net: &'a Network, fixed: &[u32], rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        let n = net.n;
        let mut is_fixed = vec![false; n];
        for &v in fixed {
            if v as usize >= n {
                return Err(Error::InvalidInput(format!("constrained vertex {v} not in graph")));
            }
            if is_fixed[v as usize] {
                return Err(Error::Infeasible(format!("vertex {v} fixed twice")));
            }
            is_fixed[v as usize] = true;
        }
        let mut pos = vec![u32::MAX; n];
        let mut free = Vec::new();
        for v in 0..n {
            if !is_fixed[v] {
                pos[v] = free.len() as u32;
                free.push(v as u32);
            }
        }
        let mut rows_free = Vec::new();
        let mut rows_fixed = Vec::new();
        for r in rows {
            let mut rf = Vec::new();
            let mut rx = Vec::new();
            for &(v, w) in r {
                if v as usize >= n {
                    return Err(Error::InvalidInput(format!("constraint vertex {v} not in graph")));
                }
                if is_fixed[v as usize] {
                    rx.push((v as usize, w));
                } else {
                    rf.push((pos[v as usize] as usize, w));
                }
            }
            rows_free.push(rf);
            rows_fixed.push(rx);
        }
        let mut s = HarmonicSolver {
            net,
            fixed: fixed.to_vec(),
            free,
            pos,
            rows_free,
            rows_fixed,
            backend: Backend::Trivial,
        };
        s.backend = s.factor()?;
        Ok(s)
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    fn factor(&self) -> Result<Backend> {
        let nf = self.free.len();
        let k = self.rows_free.len();
        if nf == 0 {
            if k > 0 {
                return Err(Error::Infeasible("equality constraints on fully fixed vertices".into()));
            }
            return Ok(Backend::Trivial);
        }
        if nf + k <= DENSE_LIMIT {
            let m = nf + k;
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (i, &v) in self.free.iter().enumerate() {
                for (u, c) in self.net.neighbors(v as usize) {
                    a[(i, i)] += c;
                    let p = self.pos[u];
                    if p != u32::MAX {
                        a[(i, p as usize)] -= c;
                    }
                }
            }
            for (r, row) in self.rows_free.iter().enumerate() {
                for &(i, w) in row {
                    a[(nf + r, i)] += w;
                    a[(i, nf + r)] += w;
                }
            }
            let scale = a.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0);
            let lu = a.lu();
            let u = lu.u();
            let min_pivot = (0..m).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
            if !(min_pivot > 1e-12 * scale) {
                return Err(Error::Singular(format!(
                    "KKT matrix is singular (pivot {min_pivot:e}); some component lacks constraints or constraints are dependent"
                )));
            }
            return Ok(Backend::Dense(lu));
        }
        // Large: the free block must be positive definite on its own.
        let (count, label) = self.free_components();
        let mut anchored = vec![false; count];
        for (i, &v) in self.free.iter().enumerate() {
            if self.net.neighbors(v as usize).any(|(u, _)| self.pos[u] == u32::MAX) {
                anchored[label[i] as usize] = true;
            }
        }
        if anchored.iter().any(|&a| !a) {
            return Err(Error::Singular(
                "a free region has no fixed vertex and is too large for the dense KKT path".into(),
            ));
        }
        let diag: Vec<f64> = self.free.iter().map(|&v| self.net.degree(v as usize)).collect();
        let mut z = Vec::with_capacity(k);
        for row in &self.rows_free {
            let mut b = vec![0.0; nf];
            for &(i, w) in row {
                b[i] += w;
            }
            z.push(self.cg(&diag, &b)?);
        }
        let schur = if k > 0 {
            let mut s = DMatrix::<f64>::zeros(k, k);
            for (r, row) in self.rows_free.iter().enumerate() {
                for (q, zq) in z.iter().enumerate() {
                    s[(r, q)] = row.iter().map(|&(i, w)| w * zq[i]).sum();
                }
            }
            let scale = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let lu = s.lu();
            let u = lu.u();
            let min_pivot = (0..k).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
            if !(min_pivot > 1e-12 * scale) {
                return Err(Error::Singular("equality constraints are linearly dependent".into()));
            }
            Some(lu)
        } else {
            None
        };
        Ok(Backend::Cg { diag, z, schur })
    }

    fn free_components(&self) -> (usize, Vec<u32>) {
        let nf = self.free.len();
        let mut label = vec![u32::MAX; nf];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for s in 0..nf {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for (u, _) in self.net.neighbors(self.free[i] as usize) {
                    let p = self.pos[u];
                    if p != u32::MAX && label[p as usize] == u32::MAX {
                        label[p as usize] = count;
                        stack.push(p as usize);
                    }
                }
            }
            count += 1;
        }
        (count as usize, label)
    }

    fn apply_free(&self, x: &[f64], out: &mut [f64]) {
        for (i, &v) in self.free.iter().enumerate() {
            let mut s = 0.0;
            for (u, c) in self.net.neighbors(v as usize) {
                s += c * x[i];
                let p = self.pos[u];
                if p != u32::MAX {
                    s -= c * x[p as usize];
                }
            }
            out[i] = s;
        }
    }

    fn cg(&self, diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let max_iter = 20 * n + 1000;
        for _ in 0..max_iter {
            self.apply_free(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Singular("free block is not positive definite".into()));
            }
            let a = rz / pap;
            for i in 0..n {
                x[i] += a * p[i];
                r[i] -= a * ap[i];
            }
            let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rnorm <= CG_TOL * bnorm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence(format!("CG did not reach {CG_TOL:e} in {max_iter} iterations")))
    }

    /// Minimizer for the given fixed values (same order as at construction) and targets.
    pub fn solve(&self, fixed_values: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
        if fixed_values.len() != self.fixed.len() || targets.len() != self.rows_free.len() {
            return Err(Error::InvalidInput("value/target count mismatch".into()));
        }
        let n = self.net.n;
        let nf = self.free.len();
        let mut x = vec![0.0; n];
        for (&v, &g) in self.fixed.iter().zip(fixed_values) {
            x[v as usize] = g;
        }
        // rhs = -L_FD g
        let mut rhs = vec![0.0; nf];
        for (i, &v) in self.free.iter().enumerate() {
            for (u, c) in self.net.neighbors(v as usize) {
                if self.pos[u] == u32::MAX {
                    rhs[i] += c * x[u];
                }
            }
        }
        let t: Vec<f64> = self
            .rows_fixed
            .iter()
            .zip(targets)
            .map(|(row, &t)| t - row.iter().map(|&(v, w)| w * x[v]).sum::<f64>())
            .collect();
        let xf = match &self.backend {
            Backend::Trivial => Vec::new(),
            Backend::Dense(lu) => {
                let mut b = DVector::<f64>::zeros(nf + t.len());
                for i in 0..nf {
                    b[i] = rhs[i];
                }
                for (r, &tv) in t.iter().enumerate() {
                    b[nf + r] = tv;
                }
                let sol = lu.solve(&b).ok_or_else(|| Error::Singular("KKT solve failed".into()))?;
                sol.iter().take(nf).copied().collect()
            }
            Backend::Cg { diag, z, schur } => {
                let y = self.cg(diag, &rhs)?;
                match schur {
                    None => y,
                    Some(lu) => {
                        let k = t.len();
                        let mut b = DVector::<f64>::zeros(k);
                        for (r, row) in self.rows_free.iter().enumerate() {
                            b[r] = row.iter().map(|&(i, w)| w * y[i]).sum::<f64>() - t[r];
                        }
                        let lam = lu.solve(&b).ok_or_else(|| Error::Singular("Schur solve failed".into()))?;
                        let mut out = y;
                        for (q, zq) in z.iter().enumerate() {
                            for i in 0..nf {
                                out[i] -= lam[q] * zq[i];
                            }
                        }
                        out
                    }
                }
            }
        };
        for (i, &v) in self.free.iter().enumerate() {
            x[v as usize] = xf[i];
        }
        Ok(x)
    }

    /// Relative residual of the optimality conditions at `x`.
    pub fn residual(&self, x: &[f64], targets: &[f64]) -> f64 {
        // Stationarity holds up to a combination of constraint rows; project it out by least squares.
        let nf = self.free.len();
        let mut grad = vec![0.0; nf];
        let mut scale = 0.0f64;
        for (i, &v) in self.free.iter().enumerate() {
            for (u, c) in self.net.neighbors(v as usize) {
                grad[i] += c * (x[v as usize] - x[u]);
                scale = scale.max((c * x[u]).abs()).max((c * x[v as usize]).abs());
            }
        }
        let k = self.rows_free.len();
        if k > 0 {
            let mut a = DMatrix::<f64>::zeros(nf, k);
            for (r, row) in self.rows_free.iter().enumerate() {
                for &(i, w) in row {
                    a[(i, r)] += w;
                }
            }
            let g = DVector::from_vec(grad.clone());
            let ata = a.transpose() * &a;
            if let Some(lam) = ata.lu().solve(&(a.transpose() * &g)) {
                let proj = &a * lam;
                for i in 0..nf {
                    grad[i] -= proj[i];
                }
            }
        }
        let mut res = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        for (r, (rf, rx)) in self.rows_free.iter().zip(&self.rows_fixed).enumerate() {
            let lhs: f64 = rf.iter().map(|&(i, w)| w * x[self.free[i] as usize]).sum::<f64>()
                + rx.iter().map(|&(v, w)| w * x[v]).sum::<f64>();
            res += (lhs - targets[r]).abs();
        }
        res / scale.max(1e-300)
    }
}

/// One-shot constrained minimization.
pub fn minimize(net: &Network, constraints: &ConstraintSet) -> Result<Vec<f64>> {
    let fixed: Vec<u32> = constraints.dirichlet.iter().map(|&(v, _)| v).collect();
    let values: Vec<f64> = constraints.dirichlet.iter().map(|&(_, g)| g).collect();
    let rows: Vec<Vec<(u32, f64)>> = constraints.means.iter().map(|m| m.weights.clone()).collect();
    let targets: Vec<f64> = constraints.means.iter().map(|m| m.target).collect();
    if constraints.dirichlet.is_empty() && constraints.means.is_empty() {
        return Err(Error::Infeasible("no constraints".into()));
    }
    HarmonicSolver::new(net, &fixed, &rows)?.solve(&values, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Network {
        Network::from_edges(n, (0..n - 1).map(|i| (i as u32, i as u32 + 1, 1.0)).collect()).unwrap()
    }

    #[test]
    fn path_is_linear() {
        let net = path(5);
        let x = minimize(&net, &ConstraintSet { dirichlet: vec![(0, 0.0), (4, 1.0)], means: vec![] }).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v - i as f64 / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_only_constraint_gives_constant() {
        let net = path(4);
        let m = MeanConstraint { weights: (0..4).map(|v| (v, 0.25)).collect(), target: 3.0 };
        let x = minimize(&net, &ConstraintSet { dirichlet: vec![], means: vec![m] }).unwrap();
        assert!(x.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn unconstrained_component_is_singular() {
        let net = Network::from_edges(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let r = minimize(&net, &ConstraintSet { dirichlet: vec![(0, 1.0)], means: vec![] });
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn cg_matches_dense() {
        // a 50×50 grid exceeds the dense limit
        let side = 50usize;
        let id = |x: usize, y: usize| (y * side + x) as u32;
        let mut e = Vec::new();
        for y in 0..side {
            for x in 0..side {
                if x + 1 < side {
                    e.push((id(x, y), id(x + 1, y), 1.0));
                }
                if y + 1 < side {
                    e.push((id(x, y), id(x, y + 1), 1.0 + (x % 3) as f64));
                }
            }
        }
        let net = Network::from_edges(side * side, e).unwrap();
        let fixed: Vec<u32> = (0..side).map(|x| id(x, 0)).chain((0..side).map(|x| id(x, side - 1))).collect();
        let vals: Vec<f64> = (0..side).map(|_| 0.0).chain((0..side).map(|x| x as f64 / side as f64)).collect();
        let row: Vec<(u32, f64)> = (0..side).map(|x| (id(x, side / 2), 1.0 / side as f64)).collect();
        let s = HarmonicSolver::new(&net, &fixed, &[row.clone()]).unwrap();
        assert!(matches!(s.backend, Backend::Cg { .. }));
        let x = s.solve(&vals, &[0.7]).unwrap();
        let mean: f64 = row.iter().map(|&(v, w)| w * x[v as usize]).sum();
        assert!((mean - 0.7).abs() < 1e-9);
        assert!(s.residual(&x, &[0.7]) < 1e-9);
        // Check against the same problem solved with dense KKT on a reduced copy: compare energies
        // by perturbation: any feasible perturbation raises the energy.
        let e0 = net.raw_energy(&x).unwrap();
        let mut y = x.clone();
        y[id(3, 10) as usize] += 1e-3;
        y[id(4, 10) as usize] -= 1e-3;
        assert!(net.raw_energy(&y).unwrap() > e0);
    }
}
