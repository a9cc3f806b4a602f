//! Equality elimination.
//!
//! Unknowns that never enter an LMI block or a PSD floor are solved out of the
//! equalities component by component. What remains is a set of consistency
//! constraints on the LMI unknowns, which is parametrized by its nullspace.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SVD};

use super::problem::{SdpProblem, VariableKind};
use super::SdpError;

/// LMI block rewritten as `constant + sum_j w_j coefficients[j] <= 0`.
#[derive(Debug, Clone)]
pub struct ReducedBlock {
    pub label: String,
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<DMatrix<f64>>,
}

impl ReducedBlock {
    pub fn eval(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (j, a) in self.coefficients.iter().enumerate() {
            if w[j] != 0.0 {
                m += a * w[j];
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub blocks: Vec<ReducedBlock>,
    /// Number of parameters the blocks depend on.
    pub dim: usize,
    /// Nullspace parameters that no block depends on.
    pub free_dim: usize,
    pub original_unknowns: usize,
    pub recovery: Recovery,
}

impl ReducedProblem {
    pub fn reduced_unknowns(&self) -> usize {
        self.dim + self.free_dim
    }
}

#[derive(Debug, Clone)]
struct Component {
    vars: Vec<usize>,
    /// Row-normalized kept-unknown coefficients and right-hand side.
    kept_coeffs: DMatrix<f64>,
    rhs: DVector<f64>,
    pinv: DMatrix<f64>,
    null_basis: DMatrix<f64>,
}

/// Affine map from reduced parameters back to every original unknown.
#[derive(Debug, Clone)]
pub struct Recovery {
    total: usize,
    kept: Vec<usize>,
    kept_offset: DVector<f64>,
    kept_basis: DMatrix<f64>,
    components: Vec<Component>,
    orphans: Vec<usize>,
}

impl Recovery {
    /// `free` parametrizes the eliminated nullspace; `None` picks the minimum-norm point.
    pub fn recover(&self, w: &DVector<f64>, free: Option<&DVector<f64>>) -> DVector<f64> {
        let mut z = DVector::zeros(self.total);
        let zk = &self.kept_offset + &self.kept_basis * w;
        for (p, &i) in self.kept.iter().enumerate() {
            z[i] = zk[p];
        }
        let mut cursor = 0;
        for c in &self.components {
            let mut ze = &c.pinv * (&c.rhs - &c.kept_coeffs * &zk);
            let nf = c.null_basis.ncols();
            if let Some(f) = free {
                if nf > 0 {
                    ze += &c.null_basis * f.rows(cursor, nf);
                }
            }
            cursor += nf;
            for (p, &i) in c.vars.iter().enumerate() {
                z[i] = ze[p];
            }
        }
        if let Some(f) = free {
            for &i in &self.orphans {
                z[i] = f[cursor];
                cursor += 1;
            }
        }
        z
    }
}

struct Row {
    equality: usize,
    entries: Vec<(usize, f64)>,
    rhs: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn lmi_unknowns(problem: &SdpProblem) -> Vec<bool> {
    let layout = problem.layout();
    let mut kept = vec![false; layout.total];
    for b in &problem.lmi_blocks {
        for t in &b.terms {
            kept[layout.index(problem, &t.variable, t.row, t.col)] = true;
        }
    }
    for f in &problem.psd_floors {
        let off = layout.offset(&f.variable);
        let n = problem.variable(&f.variable).unwrap().kind.unknowns();
        kept[off..off + n].iter_mut().for_each(|k| *k = true);
    }
    kept
}

/// Label, constant part and `(kept unknown, row, col, coefficient)` entries of one LMI.
type BlockTerms = (String, DMatrix<f64>, Vec<(usize, usize, usize, f64)>);

fn block_terms(problem: &SdpProblem, kept_pos: &[Option<usize>]) -> Vec<BlockTerms> {
    let layout = problem.layout();
    let mut out = Vec::new();
    for b in &problem.lmi_blocks {
        let terms = b
            .terms
            .iter()
            .map(|t| {
                let p = kept_pos[layout.index(problem, &t.variable, t.row, t.col)].unwrap();
                (p, t.block_row, t.block_col, t.coefficient)
            })
            .collect();
        out.push((b.label.clone(), b.constant_matrix(), terms));
    }
    for f in &problem.psd_floors {
        let v = problem.variable(&f.variable).unwrap();
        let VariableKind::Symmetric { dim } = v.kind else { unreachable!() };
        let mut terms = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let p = kept_pos[layout.index(problem, &f.variable, i, j)].unwrap();
                terms.push((p, i, j, -1.0));
            }
        }
        out.push((format!("floor:{}", f.variable), DMatrix::identity(dim, dim) * f.margin, terms));
    }
    out
}

fn place(m: &mut DMatrix<f64>, r: usize, c: usize, v: f64) {
    m[(r, c)] += v;
    if r != c {
        m[(c, r)] += v;
    }
}

fn full_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    // Pad so that V is square and the nullspace is available.
    let (r, c) = a.shape();
    let padded = if r < c { a.clone().resize_vertically(c, 0.0) } else { a.clone() };
    let svd = SVD::new(padded, true, true);
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap().transpose();
    (u.rows(0, r).into_owned(), svd.singular_values, v)
}

/// Sorted singular-value indices (nalgebra does not guarantee order).
fn ranked(sv: &DVector<f64>, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    idx.into_iter().partition(|&i| sv[i] > threshold)
}

pub fn presolve_eliminate(problem: &SdpProblem, rank_tol: f64, consistency_tol: f64) -> Result<ReducedProblem, SdpError> {
    let layout = problem.layout();
    let total = layout.total;
    let is_kept = lmi_unknowns(problem);
    let kept: Vec<usize> = (0..total).filter(|&i| is_kept[i]).collect();
    let mut kept_pos = vec![None; total];
    for (p, &i) in kept.iter().enumerate() {
        kept_pos[i] = Some(p);
    }
    let nk = kept.len();

    let mut rows = Vec::new();
    for (e, eq) in problem.equalities.iter().enumerate() {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &eq.terms {
            *acc.entry(layout.index(problem, &t.variable, t.row, t.col)).or_insert(0.0) += t.coefficient;
        }
        let entries: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, v)| v != 0.0).collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if eq.rhs.abs() > consistency_tol {
                return Err(SdpError::InconsistentEqualities {
                    row: e,
                    residual: eq.rhs.abs(),
                });
            }
            continue;
        }
        rows.push(Row {
            equality: e,
            entries: entries.into_iter().map(|(i, v)| (i, v / norm)).collect(),
            rhs: eq.rhs / norm,
        });
    }

    let mut parent: Vec<usize> = (0..total).collect();
    let mut touched = vec![false; total];
    for row in &rows {
        let mut first = None;
        for &(i, _) in &row.entries {
            if is_kept[i] {
                continue;
            }
            touched[i] = true;
            match first {
                None => first = Some(i),
                Some(f) => {
                    let (a, b) = (find(&mut parent, f), find(&mut parent, i));
                    if a != b {
                        parent[b] = a;
                    }
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let mut pure_rows = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        match row.entries.iter().find(|(i, _)| !is_kept[*i]) {
            Some(&(i, _)) => groups.entry(find(&mut parent, i)).or_default().1.push(ri),
            None => pure_rows.push(ri),
        }
    }
    for (i, _) in touched.iter().enumerate().filter(|(_, &t)| t) {
        groups.entry(find(&mut parent, i)).or_default().0.push(i);
    }
    let orphans: Vec<usize> = (0..total).filter(|&i| !is_kept[i] && !touched[i]).collect();

    // Consistency system on the kept unknowns: c_rows * z_k = g.
    let mut c_rows: Vec<DVector<f64>> = Vec::new();
    let mut g: Vec<f64> = Vec::new();
    for &ri in &pure_rows {
        let mut v = DVector::zeros(nk);
        for &(i, a) in &rows[ri].entries {
            v[kept_pos[i].unwrap()] += a;
        }
        c_rows.push(v);
        g.push(rows[ri].rhs);
    }

    let mut components = Vec::new();
    for (_, (vars, row_ids)) in groups {
        let local: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let (r, nc) = (row_ids.len(), vars.len());
        let mut ey = DMatrix::zeros(r, nc);
        let mut ek = DMatrix::zeros(r, nk);
        let mut f = DVector::zeros(r);
        for (q, &ri) in row_ids.iter().enumerate() {
            for &(i, a) in &rows[ri].entries {
                match kept_pos[i] {
                    Some(p) => ek[(q, p)] += a,
                    None => ey[(q, local[&i])] += a,
                }
            }
            f[q] = rows[ri].rhs;
        }
        let (u, sv, v) = full_svd(&ey);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let (range, null) = ranked(&sv, rank_tol * smax);
        let mut pinv = DMatrix::zeros(nc, r);
        let mut u1 = DMatrix::zeros(r, range.len());
        for (q, &k) in range.iter().enumerate() {
            let uk = u.column(k);
            pinv += v.column(k) * uk.transpose() / sv[k];
            u1.set_column(q, &uk);
        }
        let null_basis = DMatrix::from_fn(nc, null.len() + nc.saturating_sub(sv.len()), |i, q| {
            if q < null.len() {
                v[(i, null[q])]
            } else {
                v[(i, sv.len() + q - null.len())]
            }
        });
        if r > range.len() {
            let ck = &ek - &u1 * (u1.transpose() * &ek);
            let gk = &f - &u1 * (u1.transpose() * &f);
            for q in 0..r {
                c_rows.push(ck.row(q).transpose());
                g.push(gk[q]);
            }
        }
        components.push(Component {
            vars,
            kept_coeffs: ek,
            rhs: f,
            pinv,
            null_basis,
        });
    }

    let g = DVector::from_vec(g);
    let (kept_offset, kept_basis, residual) = if nk == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0), g.amax())
    } else if c_rows.is_empty() {
        (DVector::zeros(nk), DMatrix::identity(nk, nk), 0.0)
    } else {
        let c = DMatrix::from_fn(c_rows.len(), nk, |i, j| c_rows[i][j]);
        let (u, sv, v) = full_svd(&c);
        let (range, null) = ranked(&sv, consistency_tol.max(rank_tol));
        let mut z0 = DVector::zeros(nk);
        for &k in &range {
            z0 += v.column(k) * (u.column(k).dot(&g) / sv[k]);
        }
        let mut null_cols: Vec<usize> = null;
        null_cols.extend(sv.len()..nk);
        let basis = DMatrix::from_fn(nk, null_cols.len(), |i, q| v[(i, null_cols[q])]);
        let res = (&c * &z0 - &g).amax();
        (z0, basis, res)
    };

    let recovery = Recovery {
        total,
        kept: kept.clone(),
        kept_offset,
        kept_basis,
        components,
        orphans,
    };

    let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
    if residual > consistency_tol * scale {
        let z = recovery.recover(&DVector::zeros(recovery.kept_basis.ncols()), None);
        let (row, res) = rows
            .iter()
            .map(|r| (r.equality, (r.entries.iter().map(|&(i, a)| a * z[i]).sum::<f64>() - r.rhs).abs()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let norm = problem.equalities[row]
            .terms
            .iter()
            .map(|t| t.coefficient * t.coefficient)
            .sum::<f64>()
            .sqrt()
            .max(1.0);
        return Err(SdpError::InconsistentEqualities {
            row,
            residual: res * norm,
        });
    }

    let dim = recovery.kept_basis.ncols();
    let blocks = block_terms(problem, &kept_pos)
        .into_iter()
        .map(|(label, c0, terms)| {
            let d = c0.nrows();
            let mut constant = c0;
            let mut coefficients = vec![DMatrix::zeros(d, d); dim];
            for (p, br, bc, a) in terms {
                place(&mut constant, br, bc, a * recovery.kept_offset[p]);
                for (j, cj) in coefficients.iter_mut().enumerate() {
                    let b = recovery.kept_basis[(p, j)];
                    if b != 0.0 {
                        place(cj, br, bc, a * b);
                    }
                }
            }
            ReducedBlock {
                label,
                constant,
                coefficients,
            }
        })
        .collect();

    let free_dim = recovery.components.iter().map(|c| c.null_basis.ncols()).sum::<usize>() + recovery.orphans.len();
    Ok(ReducedProblem {
        blocks,
        dim,
        free_dim,
        original_unknowns: total,
        recovery,
    })
}
