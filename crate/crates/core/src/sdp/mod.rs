//! Linear matrix inequalities over structured matrix variables and a
//! primal-dual interior-point oracle for them.
//!
//! Every LMI is written as `F(V) = F₀ + Σ (L V R + (L V R)ᵀ) ⪯ 0`, where each
//! term places `L V R` in block `(r, c)` and its transpose in block `(c, r)`.

mod ipm;

pub use ipm::{solve_feasibility, solve_objective, FeasibilityMode, SdpOptions, SdpOutcome, SdpSolution};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmiId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct VarSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
    /// First scalar coordinate of this variable.
    pub offset: usize,
}

impl VarSpec {
    pub fn n_coords(&self) -> usize {
        match self.kind {
            VarKind::Symmetric => self.rows * (self.rows + 1) / 2,
            VarKind::Full => self.rows * self.cols,
        }
    }

    /// Entry positions touched by each coordinate; symmetric off-diagonal coordinates touch two.
    pub fn coord_entries(&self) -> Vec<([(usize, usize); 2], usize)> {
        let mut out = Vec::with_capacity(self.n_coords());
        match self.kind {
            VarKind::Symmetric => {
                for a in 0..self.rows {
                    for b in a..self.rows {
                        if a == b {
                            out.push(([(a, a), (a, a)], 1));
                        } else {
                            out.push(([(a, b), (b, a)], 2));
                        }
                    }
                }
            }
            VarKind::Full => {
                for a in 0..self.rows {
                    for b in 0..self.cols {
                        out.push(([(a, b), (a, b)], 1));
                    }
                }
            }
        }
        out
    }

    pub fn to_matrix(&self, y: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for (k, (entries, cnt)) in self.coord_entries().into_iter().enumerate() {
            for &(a, b) in &entries[..cnt] {
                m[(a, b)] = y[self.offset + k];
            }
        }
        m
    }

    pub fn from_matrix(&self, m: &Mat, y: &mut [f64]) {
        for (k, (entries, _)) in self.coord_entries().into_iter().enumerate() {
            let (a, b) = entries[0];
            y[self.offset + k] = match self.kind {
                VarKind::Symmetric => 0.5 * (m[(a, b)] + m[(b, a)]),
                VarKind::Full => m[(a, b)],
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: VarId,
    pub row_blk: usize,
    pub col_blk: usize,
    pub left: Mat,
    pub right: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lmi {
    pub name: String,
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub constant: Mat,
    pub terms: Vec<Term>,
    /// Strict inequalities are enforced with a margin.
    pub strict: bool,
}

impl Lmi {
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<VarSpec>,
    pub lmis: Vec<Lmi>,
    /// Linear objective `Σ ⟨W, V⟩` to minimise.
    pub objective: Vec<(VarId, Mat)>,
}

/// Per-LMI outcome of an independent eigenvalue check.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiCheck {
    pub name: String,
    pub max_eig: f64,
    pub strict: bool,
}

impl Default for LmiProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LmiProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            lmis: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn n_coords(&self) -> usize {
        self.vars.iter().map(VarSpec::n_coords).sum()
    }

    pub fn var(&self, id: VarId) -> &VarSpec {
        &self.vars[id.0]
    }

    pub fn add_var(&mut self, name: &str, rows: usize, cols: usize, kind: VarKind) -> VarId {
        assert!(kind == VarKind::Full || rows == cols, "symmetric variables are square");
        let offset = self.n_coords();
        self.vars.push(VarSpec {
            name: name.to_string(),
            rows,
            cols,
            kind,
            offset,
        });
        VarId(self.vars.len() - 1)
    }

    /// Symmetric variable with a strict `V ≻ 0` constraint attached.
    pub fn add_pd_var(&mut self, name: &str, n: usize) -> VarId {
        let v = self.add_var(name, n, n, VarKind::Symmetric);
        let l = self.add_lmi(&format!("{name} > 0"), &[n], true);
        self.add_sym_term(l, 0, v, -1.0);
        v
    }

    pub fn add_lmi(&mut self, name: &str, sizes: &[usize], strict: bool) -> LmiId {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        self.lmis.push(Lmi {
            name: name.to_string(),
            sizes: sizes.to_vec(),
            offsets,
            constant: Mat::zeros(acc, acc),
            terms: Vec::new(),
            strict,
        });
        LmiId(self.lmis.len() - 1)
    }

    /// Adds `L V R` at block `(r, c)` and its transpose at `(c, r)`; on the diagonal both land in the same block.
    pub fn add_term(&mut self, lmi: LmiId, r: usize, c: usize, left: Mat, var: VarId, right: Mat) {
        let spec = &self.vars[var.0];
        let l = &self.lmis[lmi.0];
        assert_eq!(left.shape(), (l.sizes[r], spec.rows), "left factor shape for {}", spec.name);
        assert_eq!(right.shape(), (spec.cols, l.sizes[c]), "right factor shape for {}", spec.name);
        self.lmis[lmi.0].terms.push(Term {
            var,
            row_blk: r,
            col_blk: c,
            left,
            right,
        });
    }

    /// Adds `scale · V` on diagonal block `r` for a symmetric `V`.
    pub fn add_sym_term(&mut self, lmi: LmiId, r: usize, var: VarId, scale: f64) {
        let n = self.vars[var.0].rows;
        let l = Mat::identity(self.lmis[lmi.0].sizes[r], n) * (0.5 * scale);
        self.add_term(lmi, r, r, l, var, Mat::identity(n, n));
    }

    /// Adds a constant at `(r, c)` and its transpose at `(c, r)`; diagonal constants are symmetrised.
    pub fn add_constant(&mut self, lmi: LmiId, r: usize, c: usize, m: &Mat) {
        let l = &mut self.lmis[lmi.0];
        let (or, oc) = (l.offsets[r], l.offsets[c]);
        assert_eq!(m.shape(), (l.sizes[r], l.sizes[c]));
        if r == c {
            let s = linalg::symmetrize(m);
            let mut v = l.constant.view_mut((or, oc), (l.sizes[r], l.sizes[c]));
            v += s;
        } else {
            {
                let mut v = l.constant.view_mut((or, oc), (l.sizes[r], l.sizes[c]));
                v += m;
            }
            let mut v = l.constant.view_mut((oc, or), (l.sizes[c], l.sizes[r]));
            v += m.transpose();
        }
    }

    pub fn set_objective(&mut self, var: VarId, weight: Mat) {
        let spec = &self.vars[var.0];
        assert_eq!(weight.shape(), (spec.rows, spec.cols));
        self.objective.push((var, weight));
    }

    /// Objective coefficient vector over the scalar coordinates.
    pub fn objective_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_coords()];
        for (var, w) in &self.objective {
            let spec = self.var(*var);
            for (k, (entries, cnt)) in spec.coord_entries().into_iter().enumerate() {
                for &(a, b) in &entries[..cnt] {
                    c[spec.offset + k] += w[(a, b)];
                }
            }
        }
        c
    }

    pub fn values_from_coords(&self, y: &[f64]) -> Vec<Mat> {
        self.vars.iter().map(|v| v.to_matrix(y)).collect()
    }

    pub fn coords_from_values(&self, values: &[Mat]) -> Result<Vec<f64>> {
        if values.len() != self.vars.len() {
            return Err(Error::DimensionMismatch("one matrix per variable expected".into()));
        }
        let mut y = vec![0.0; self.n_coords()];
        for (spec, m) in self.vars.iter().zip(values) {
            if m.shape() != (spec.rows, spec.cols) {
                return Err(Error::DimensionMismatch(format!("variable {} has wrong shape", spec.name)));
            }
            spec.from_matrix(m, &mut y);
        }
        Ok(y)
    }

    /// Dense value of LMI `lmi` at the given variable values.
    pub fn assemble(&self, lmi: LmiId, values: &[Mat]) -> Mat {
        let l = &self.lmis[lmi.0];
        let mut f = l.constant.clone();
        for t in &l.terms {
            let x = &t.left * &values[t.var.0] * &t.right;
            let (or, oc) = (l.offsets[t.row_blk], l.offsets[t.col_blk]);
            {
                let mut v = f.view_mut((or, oc), x.shape());
                v += &x;
            }
            let mut v = f.view_mut((oc, or), (x.ncols(), x.nrows()));
            v += x.transpose();
        }
        f
    }

    /// Reassembles every LMI densely and reports its largest eigenvalue.
    pub fn check(&self, values: &[Mat]) -> Vec<LmiCheck> {
        (0..self.lmis.len())
            .map(|k| LmiCheck {
                name: self.lmis[k].name.clone(),
                max_eig: linalg::max_eig_sym(&self.assemble(LmiId(k), values)),
                strict: self.lmis[k].strict,
            })
            .collect()
    }

    /// True iff strict LMIs have max eigenvalue `≤ -strict_tol` and the rest `≤ nonstrict_tol`.
    pub fn satisfied(&self, values: &[Mat], strict_tol: f64, nonstrict_tol: f64) -> bool {
        self.check(values).iter().all(|c| {
            if c.strict {
                c.max_eig <= -strict_tol
            } else {
                c.max_eig <= nonstrict_tol
            }
        })
    }

    /// Writes every LMI's constant part and term data in a plain text layout.
    pub fn dump(&self, values: Option<&[Mat]>) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for (k, l) in self.lmis.iter().enumerate() {
            let _ = writeln!(s, "# lmi {} \"{}\" sizes {:?} strict {}", k, l.name, l.sizes, l.strict);
            let m = match values {
                Some(v) => self.assemble(LmiId(k), v),
                None => l.constant.clone(),
            };
            s.push_str(&crate::io::format_matrix(&m));
        }
        s
    }
}
