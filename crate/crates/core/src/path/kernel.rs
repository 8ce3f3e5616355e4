use super::{Density, Grid, SampledPath};
use crate::error::{Error, Result};

/// Largest dense plane grid accepted (nodes per axis).
pub const MAX_DENSE_NODES: usize = 513;

/// `coef · left(x) right(y)` on the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableTerm {
    pub coef: f64,
    pub left: Density,
    pub right: Density,
}

/// Bilinear plane density on `[x_start,0]²`, row index `x`, column index `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKernel {
    start: usize,
    n_nodes: usize,
    values: Vec<f64>,
}

impl DenseKernel {
    pub fn new(grid: Grid, start: usize, values: Vec<f64>) -> Result<Self> {
        let n_nodes = grid.n_nodes();
        if n_nodes > MAX_DENSE_NODES {
            return Err(Error::Invalid(format!(
                "dense kernel limited to {MAX_DENSE_NODES} nodes per axis, grid has {n_nodes}"
            )));
        }
        if values.len() != n_nodes * n_nodes {
            return Err(Error::Invalid("dense kernel needs (N+1)^2 samples".into()));
        }
        Ok(Self { start, n_nodes, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.x(i), grid.x(j)));
            }
        }
        Self::new(grid, 0, values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_nodes + j]
    }

    fn transposed(&self) -> DenseKernel {
        let n = self.n_nodes;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        DenseKernel { start: self.start, n_nodes: n, values }
    }

    /// `Σ_ij D_ij a_i b_j` with moment vectors `a`, `b`.
    fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n_nodes;
        (self.start..n)
            .map(|i| {
                let row = &self.values[i * n..(i + 1) * n];
                a[i] * (self.start..n).map(|j| row[j] * b[j]).sum::<f64>()
            })
            .sum()
    }
}

/// Second-derivative object on `[-T,0]²`:
/// `atom00 δ₀⊗δ₀ + cross_x(x)dx⊗δ₀ + δ₀⊗cross_y(y)dy + plane(x,y)dxdy`,
/// with the plane stored as separable terms plus an optional dense grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2 {
    grid: Grid,
    pub atom00: f64,
    pub cross_x: Option<Density>,
    pub cross_y: Option<Density>,
    pub terms: Vec<SeparableTerm>,
    pub dense: Option<DenseKernel>,
}

impl Kernel2 {
    pub fn zero(grid: Grid) -> Self {
        Self { grid, atom00: 0.0, cross_x: None, cross_y: None, terms: Vec::new(), dense: None }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn with_term(mut self, coef: f64, left: Density, right: Density) -> Result<Self> {
        self.grid.check_same(&left.grid())?;
        self.grid.check_same(&right.grid())?;
        self.terms.push(SeparableTerm { coef, left, right });
        Ok(self)
    }

    pub fn with_dense(mut self, dense: DenseKernel) -> Result<Self> {
        if dense.n_nodes != self.grid.n_nodes() {
            return Err(Error::GridMismatch("dense kernel size".into()));
        }
        self.dense = Some(dense);
        Ok(self)
    }

    /// `∫∫ g(x) h(y) K(dx,dy)`.
    pub fn pair(&self, g: &SampledPath, h: &SampledPath) -> Result<f64> {
        self.grid.check_same(&g.grid())?;
        self.grid.check_same(&h.grid())?;
        let (g0, h0) = (g.last(), h.last());
        let mut acc = self.atom00 * g0 * h0;
        if let Some(c) = &self.cross_x {
            acc += c.pair(g)? * h0;
        }
        if let Some(c) = &self.cross_y {
            acc += g0 * c.pair(h)?;
        }
        for t in &self.terms {
            acc += t.coef * t.left.pair(g)? * t.right.pair(h)?;
        }
        if let Some(d) = &self.dense {
            let step = self.grid.step();
            let n = self.grid.n_steps();
            let a = super::hat_moments(step, g.values(), d.start, n);
            let b = super::hat_moments(step, h.values(), d.start, n);
            acc += d.bilinear(&a, &b);
        }
        Ok(acc)
    }

    /// The kernel with its two arguments exchanged.
    pub fn swapped(&self) -> Kernel2 {
        Kernel2 {
            grid: self.grid,
            atom00: self.atom00,
            cross_x: self.cross_y.clone(),
            cross_y: self.cross_x.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| SeparableTerm { coef: t.coef, left: t.right.clone(), right: t.left.clone() })
                .collect(),
            dense: self.dense.as_ref().map(DenseKernel::transposed),
        }
    }

    /// `|⟨K, g⊗h⟩ - ⟨K, h⊗g⟩|`.
    pub fn asymmetry(&self, g: &SampledPath, h: &SampledPath) -> Result<f64> {
        Ok((self.pair(g, h)? - self.pair(h, g)?).abs())
    }

    /// Mass of the kernel on `[x_k, 0]²`, atoms included.
    pub fn mass_on_square(&self, k: usize) -> f64 {
        let mut acc = self.atom00;
        if let Some(c) = &self.cross_x {
            acc += c.integral_from(k);
        }
        if let Some(c) = &self.cross_y {
            acc += c.integral_from(k);
        }
        for t in &self.terms {
            acc += t.coef * t.left.integral_from(k) * t.right.integral_from(k);
        }
        if let Some(d) = &self.dense {
            let ones = vec![1.0; self.grid.n_nodes()];
            let m = super::hat_moments(self.grid.step(), &ones, k.max(d.start), self.grid.n_steps());
            acc += d.bilinear(&m, &m);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.atom00 == 0.0
            && self.cross_x.as_ref().is_none_or(Density::is_zero)
            && self.cross_y.as_ref().is_none_or(Density::is_zero)
            && self.terms.iter().all(|t| t.coef == 0.0 || t.left.is_zero() || t.right.is_zero())
            && self.dense.as_ref().is_none_or(|d| d.values.iter().all(|&v| v == 0.0))
    }

    /// `self += w * other`. Separable terms with identical factors are merged.
    pub fn accumulate(&mut self, other: &Kernel2, w: f64) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        self.atom00 += w * other.atom00;
        add_density(&mut self.cross_x, other.cross_x.as_ref(), w)?;
        add_density(&mut self.cross_y, other.cross_y.as_ref(), w)?;
        for t in &other.terms {
            match self.terms.iter_mut().find(|s| s.left == t.left && s.right == t.right) {
                Some(s) => s.coef += w * t.coef,
                None => self.terms.push(SeparableTerm {
                    coef: w * t.coef,
                    left: t.left.clone(),
                    right: t.right.clone(),
                }),
            }
        }
        if let Some(d) = &other.dense {
            match &mut self.dense {
                Some(mine) => {
                    mine.start = mine.start.min(d.start);
                    mine.values.iter_mut().zip(&d.values).for_each(|(a, b)| *a += w * b);
                }
                None => {
                    let mut copy = d.clone();
                    copy.values.iter_mut().for_each(|v| *v *= w);
                    self.dense = Some(copy);
                }
            }
        }
        Ok(())
    }

    /// Transport through the derivative of `η ↦ Y_T^{t,η}` on both arguments
    /// (`k` is the grid index of `t`): plane mass on `[-T,t-T)²` moves to
    /// `[-t,0)²`, mass on the strip `[t-T,0]` in one argument collapses to `δ₀`.
    pub fn pullback_flow(&self, k: usize) -> Kernel2 {
        let grid = self.grid;
        let n = grid.n_steps();
        let mut out = Kernel2::zero(grid);
        out.atom00 = self.mass_on_square(k);

        let mut cross_x: Option<Density> = None;
        let mut cross_y: Option<Density> = None;
        let push = |slot: &mut Option<Density>, d: Density, w: f64| {
            // grids agree by construction
            add_density(slot, Some(&d), w).expect("same grid");
        };
        if let Some(c) = &self.cross_x {
            if let Some(s) = c.shift_to_window(k) {
                push(&mut cross_x, s, 1.0);
            }
        }
        if let Some(c) = &self.cross_y {
            if let Some(s) = c.shift_to_window(k) {
                push(&mut cross_y, s, 1.0);
            }
        }
        for t in &self.terms {
            let (l, r) = (t.left.shift_to_window(k), t.right.shift_to_window(k));
            if let Some(l) = &l {
                push(&mut cross_x, l.clone(), t.coef * t.right.integral_from(k));
            }
            if let Some(r) = &r {
                push(&mut cross_y, r.clone(), t.coef * t.left.integral_from(k));
            }
            if let (Some(l), Some(r)) = (l, r) {
                out.terms.push(SeparableTerm { coef: t.coef, left: l, right: r });
            }
        }
        if let Some(d) = &self.dense {
            if d.start <= k {
                let step = grid.step();
                let nodes = grid.n_nodes();
                let ones = vec![1.0; nodes];
                let strip = super::hat_moments(step, &ones, k.max(d.start), n);
                let offset = n - k;
                let mut row_mass = vec![0.0; nodes];
                let mut col_mass = vec![0.0; nodes];
                let mut shifted = vec![0.0; nodes * nodes];
                for i in d.start..=k {
                    row_mass[i + offset] = (0..nodes).map(|j| d.at(i, j) * strip[j]).sum();
                    col_mass[i + offset] = (0..nodes).map(|j| d.at(j, i) * strip[j]).sum();
                    for j in d.start..=k {
                        shifted[(i + offset) * nodes + j + offset] = d.at(i, j);
                    }
                }
                let start = d.start + offset;
                push(&mut cross_x, Density::new(grid, start, row_mass).expect("sized"), 1.0);
                push(&mut cross_y, Density::new(grid, start, col_mass).expect("sized"), 1.0);
                out.dense = Some(DenseKernel { start, n_nodes: nodes, values: shifted });
            }
        }
        out.cross_x = cross_x;
        out.cross_y = cross_y;
        out
    }
}

fn add_density(slot: &mut Option<Density>, other: Option<&Density>, w: f64) -> Result<()> {
    if let Some(o) = other {
        match slot {
            Some(mine) => mine.add_scaled(o, w)?,
            None => *slot = Some(o.scaled(w)),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1.0, 16).unwrap()
    }

    fn sample_kernel() -> Kernel2 {
        let g = grid();
        let a = Density::from_fn(g, |x| 1.0 + x);
        let b = Density::from_fn(g, |x| (2.0 * x).sin());
        let mut k = Kernel2::zero(g)
            .with_term(0.7, a.clone(), b.clone())
            .unwrap()
            .with_term(0.7, b.clone(), a.clone())
            .unwrap()
            .with_dense(DenseKernel::from_fn(g, |x, y| (x * y).exp()).unwrap())
            .unwrap();
        k.atom00 = 1.5;
        k.cross_x = Some(a.clone());
        k.cross_y = Some(a);
        k
    }

    #[test]
    fn symmetric_kernel_pairs_symmetrically() {
        let k = sample_kernel();
        let g = SampledPath::from_fn(grid(), |x| x * x - 0.3);
        let h = SampledPath::from_fn(grid(), |x| (5.0 * x).cos());
        assert!(k.asymmetry(&g, &h).unwrap() < 1e-13);
        assert_eq!(k.swapped(), k.swapped().swapped().swapped());
    }

    #[test]
    fn constant_plane_mass() {
        let g = grid();
        let k = Kernel2::zero(g)
            .with_term(2.0, Density::constant(g, 1.0), Density::constant(g, 1.0))
            .unwrap();
        let one = SampledPath::constant(g, 1.0);
        assert!((k.pair(&one, &one).unwrap() - 2.0).abs() < 1e-14);
        assert!((k.mass_on_square(8) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dense_matches_separable() {
        let g = grid();
        let sep = Kernel2::zero(g)
            .with_term(1.0, Density::from_fn(g, |x| x), Density::from_fn(g, |y| 1.0 - y))
            .unwrap();
        let dense = Kernel2::zero(g)
            .with_dense(DenseKernel::from_fn(g, |x, y| x * (1.0 - y)).unwrap())
            .unwrap();
        let p = SampledPath::from_fn(g, |x| x.exp());
        let q = SampledPath::from_fn(g, |x| 2.0 + x);
        assert!((sep.pair(&p, &q).unwrap() - dense.pair(&p, &q).unwrap()).abs() < 1e-14);
        let (a, b) = (sep.pullback_flow(5), dense.pullback_flow(5));
        assert!((a.pair(&p, &q).unwrap() - b.pair(&p, &q).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn dense_size_is_capped() {
        let g = Grid::new(1.0, 600).unwrap();
        assert!(DenseKernel::new(g, 0, vec![0.0; 601 * 601]).is_err());
    }

    #[test]
    fn accumulate_merges_equal_terms() {
        let g = grid();
        let one = Density::constant(g, 1.0);
        let k = Kernel2::zero(g).with_term(2.0, one.clone(), one).unwrap();
        let mut acc = Kernel2::zero(g);
        acc.accumulate(&k, 0.5).unwrap();
        acc.accumulate(&k, 0.5).unwrap();
        assert_eq!(acc.terms.len(), 1);
        assert!((acc.terms[0].coef - 2.0).abs() < 1e-15);
    }
}
