//! One-iteration Floquet operator in the register basis, its
//! diagonalization, and the parity decomposition `m -> -m mod N`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imperfections::InterGatePropagator;
use crate::qcore::apply_gate_slice;
use crate::sawtooth::{check_dense, GateSequence, MapParams};

/// How the one-iteration operator is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildStrategy {
    /// Columnwise for diagonal (or absent) propagators, composed otherwise.
    Auto,
    /// Evolve every basis state through the sequence independently.
    Columnwise,
    /// Multiply the full `N x N` operator gate by gate.
    Composed,
}

/// Builds the one-iteration operator; column `m` is the image of basis state `m`.
pub fn build_floquet(
    p: &MapParams,
    seq: &GateSequence,
    propagator: Option<&InterGatePropagator>,
) -> Result<Mat<C64>> {
    build_floquet_with(p, seq, propagator, BuildStrategy::Auto)
}

pub fn build_floquet_with(
    p: &MapParams,
    seq: &GateSequence,
    propagator: Option<&InterGatePropagator>,
    strategy: BuildStrategy,
) -> Result<Mat<C64>> {
    check_dense(p.n_q)?;
    if seq.n_qubits() != p.n_q {
        return Err(Error::Contract(format!(
            "gate sequence acts on {} qubits, map has {}",
            seq.n_qubits(),
            p.n_q
        )));
    }
    if let Some(e) = propagator {
        if e.dim() != p.dim {
            return Err(Error::Contract(format!(
                "propagator dimension {} does not match N = {}",
                e.dim(),
                p.dim
            )));
        }
    }
    let composed = match strategy {
        BuildStrategy::Columnwise => false,
        BuildStrategy::Composed => true,
        BuildStrategy::Auto => propagator.is_some_and(|e| !e.is_diagonal()),
    };
    Ok(if composed {
        build_composed(p.dim, seq, propagator)
    } else {
        build_columnwise(p.dim, seq, propagator)
    })
}

fn build_columnwise(
    dim: usize,
    seq: &GateSequence,
    propagator: Option<&InterGatePropagator>,
) -> Mat<C64> {
    let n_q = seq.n_qubits();
    let mut u = Mat::<C64>::zeros(dim, dim);
    u.par_col_iter_mut().enumerate().for_each_init(
        || vec![C64::new(0.0, 0.0); dim],
        |scratch, (m, col)| {
            let amp = col
                .try_as_col_major_mut()
                .expect("contiguous column")
                .as_slice_mut();
            amp[m] = C64::new(1.0, 0.0);
            for gate in seq.gates() {
                apply_gate_slice(amp, n_q, gate);
                if let Some(e) = propagator {
                    e.apply(amp, scratch);
                }
            }
        },
    );
    u
}

fn build_composed(
    dim: usize,
    seq: &GateSequence,
    propagator: Option<&InterGatePropagator>,
) -> Mat<C64> {
    let n_q = seq.n_qubits();
    let mut u = Mat::<C64>::identity(dim, dim);
    let mut scratch = Mat::<C64>::zeros(dim, dim);
    for gate in seq.gates() {
        u.par_col_iter_mut().for_each(|col| {
            apply_gate_slice(
                col.try_as_col_major_mut()
                    .expect("contiguous column")
                    .as_slice_mut(),
                n_q,
                gate,
            )
        });
        if let Some(e) = propagator {
            e.apply_left(&mut u, &mut scratch);
        }
    }
    u
}

/// `max |U^dagger U - I|`.
pub fn unitarity_residual(u: &Mat<C64>) -> f64 {
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(id, 0.0)).norm());
        }
    }
    worst
}

/// Eigensystem of a one-iteration operator.
#[derive(Clone, Debug)]
pub struct FloquetSpectrum {
    /// Quasi-energies in `[0, 2 pi)`, ascending.
    pub quasi_energies: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` belongs to `quasi_energies[k]`.
    pub eigenvectors: Mat<C64>,
    pub unitarity_residual: f64,
    /// `max_k |U v_k - exp(i lambda_k) v_k|`.
    pub eigen_residual: f64,
}

impl FloquetSpectrum {
    pub fn dim(&self) -> usize {
        self.quasi_energies.len()
    }
}

/// Maps an angle into `[0, 2 pi)`; values that round up to `2 pi` become 0.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

// Filter values closer than this are resolved jointly; eigenvectors of the
// filter mix across a gap g by about N * 1e-16 / g.
const CLUSTER_GAP: f64 = 1e-3;
const FILTER_SHIFT: f64 = 0.5;
const MAX_REFINEMENTS: usize = 8;

// (exp(-i mu) z - exp(i mu) z^dagger) / 2i, with eigenvalues sin(lambda - mu).
fn sin_filter(z: &Mat<C64>, mu: f64) -> Mat<C64> {
    let shift = C64::from_polar(1.0, -mu);
    let n = z.nrows();
    Mat::from_fn(n, n, |i, j| {
        let a = shift * z[(i, j)];
        let b = shift * z[(j, i)];
        (a - b.conj()) * C64::new(0.0, -0.5)
    })
}

fn filter_eigen(z: &Mat<C64>, mu: f64) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = sin_filter(z, mu)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("self-adjoint eigensolve failed: {e:?}")))?;
    let values = (0..z.nrows()).map(|k| evd.S()[k].re).collect();
    Ok((values, evd.U().to_owned()))
}

// Index ranges of runs whose consecutive gaps are below CLUSTER_GAP.
fn clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < CLUSTER_GAP {
            end += 1;
        }
        out.push((start, end));
        start = end;
    }
    out
}

/// Full eigensystem of a unitary matrix.
///
/// The self-adjoint part of `exp(-i mu) U` shares its eigenvectors with `U`;
/// its eigendecomposition gives an orthonormal basis even for exactly
/// degenerate spectra. Near-coincident filter values are resolved inside
/// their span with filters centred on the cluster.
pub fn diagonalize(u: &Mat<C64>) -> Result<FloquetSpectrum> {
    let n = u.nrows();
    if n != u.ncols() || n == 0 {
        return Err(Error::Contract(
            "operator must be square and non-empty".into(),
        ));
    }
    let unitarity = unitarity_residual(u);
    if unitarity > 1e-6 {
        return Err(Error::Contract(format!(
            "operator is not unitary (residual {unitarity:e})"
        )));
    }

    let (values, mut w) = filter_eigen(u, FILTER_SHIFT)?;
    for (start, end) in clusters(&values) {
        if end - start > 1 {
            refine_columns(u, &mut w, start, end, 0)?;
        }
    }

    let uw = u * &w;
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let z: C64 = w
                .col_as_slice(k)
                .iter()
                .zip(uw.col_as_slice(k))
                .map(|(a, b)| a.conj() * b)
                .sum();
            (wrap_phase(z.arg()), k)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut eigen_residual = 0.0f64;
    let mut vectors = Mat::<C64>::zeros(n, n);
    for (dst, &(lambda, k)) in order.iter().enumerate() {
        let phase = C64::from_polar(1.0, lambda);
        let r2: f64 = uw
            .col_as_slice(k)
            .iter()
            .zip(w.col_as_slice(k))
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum();
        eigen_residual = eigen_residual.max(r2.sqrt());
        vectors
            .col_as_slice_mut(dst)
            .copy_from_slice(w.col_as_slice(k));
    }
    if eigen_residual > 1e-8f64.max(100.0 * unitarity) {
        return Err(Error::Numeric(format!(
            "eigen residual {eigen_residual:e} exceeds tolerance"
        )));
    }
    Ok(FloquetSpectrum {
        quasi_energies: order.into_iter().map(|(l, _)| l).collect(),
        eigenvectors: vectors,
        unitarity_residual: unitarity,
        eigen_residual,
    })
}

// Replaces columns start..end of w, spanning an invariant subspace of u, by
// eigenvectors of u.
fn refine_columns(
    u: &Mat<C64>,
    w: &mut Mat<C64>,
    start: usize,
    end: usize,
    depth: usize,
) -> Result<()> {
    let block = w.subcols(start, end - start).to_owned();
    let z = block.adjoint() * (u * &block);
    let rotated = &block * resolve_compressed(&z, depth)?;
    for k in 0..end - start {
        w.col_as_slice_mut(start + k)
            .copy_from_slice(rotated.col_as_slice(k));
    }
    Ok(())
}

/// Orthonormal eigenbasis of a small compressed unitary.
fn resolve_compressed(z: &Mat<C64>, depth: usize) -> Result<Mat<C64>> {
    if depth > MAX_REFINEMENTS {
        return Err(Error::Numeric(
            "eigenvalue cluster could not be resolved".into(),
        ));
    }
    let k = z.nrows();
    let trace: C64 = (0..k).map(|i| z[(i, i)]).sum();
    // Centred on the cluster, nearby phases map almost linearly and phases
    // mirrored about the previous filter land on opposite sides.
    let mu = if trace.norm() > 1e-3 * k as f64 {
        trace.arg()
    } else {
        0.0
    } + 0.7 * depth as f64;
    let (values, mut v) = filter_eigen(z, mu)?;
    let groups = clusters(&values);
    if groups.len() == 1 {
        return if compressed_residual(z, &v) < 1e-10 {
            Ok(v)
        } else {
            resolve_compressed(z, depth + 1)
        };
    }
    for (start, end) in groups {
        if end - start > 1 {
            refine_columns(z, &mut v, start, end, depth + 1)?;
        }
    }
    Ok(v)
}

// max_j |z v_j - (v_j^dagger z v_j) v_j|
fn compressed_residual(z: &Mat<C64>, v: &Mat<C64>) -> f64 {
    let zv = z * v;
    (0..v.ncols())
        .map(|j| {
            let q: C64 = v
                .col_as_slice(j)
                .iter()
                .zip(zv.col_as_slice(j))
                .map(|(a, b)| a.conj() * b)
                .sum();
            zv.col_as_slice(j)
                .iter()
                .zip(v.col_as_slice(j))
                .map(|(a, b)| (a - q * b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Distinct values of a circular spectrum: `(center, multiplicity)` for each
/// group whose neighbours lie within `tol`, including groups that wrap
/// through `0`.
pub fn distinct_levels(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut groups: Vec<Vec<f64>> = vec![vec![sorted[0]]];
    for w in sorted.windows(2) {
        if w[1] - w[0] < tol {
            groups.last_mut().expect("non-empty").push(w[1]);
        } else {
            groups.push(vec![w[1]]);
        }
    }
    if groups.len() > 1 && sorted[0] + TAU - sorted[sorted.len() - 1] < tol {
        let mut tail = groups.pop().expect("non-empty");
        tail.extend(groups[0].iter().map(|x| x + TAU));
        groups[0] = tail;
    }
    groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            (wrap_phase(mean), g.len())
        })
        .collect()
}

/// Rotates the spectrum so that its most populated level sits at 0.
pub fn remove_global_phase(sorted: &[f64], tol: f64) -> Vec<f64> {
    let levels = distinct_levels(sorted, tol);
    let Some(&(center, _)) = levels
        .iter()
        .reduce(|best, l| if l.1 > best.1 { l } else { best })
    else {
        return Vec::new();
    };
    let mut out: Vec<f64> = sorted
        .iter()
        .map(|&x| {
            let d = wrap_phase(x - center);
            // Members of the reference cluster just below it land at 0, not 2 pi.
            if TAU - d < tol {
                0.0
            } else {
                d
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Parity partner of register index `m`.
pub fn parity_partner(m: usize, dim: usize) -> usize {
    (dim - m) % dim
}

/// Largest entry of `|U P - P U|` for the parity permutation `P`.
pub fn parity_commutator(u: &Mat<C64>) -> f64 {
    let n = u.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        let pj = parity_partner(j, n);
        for i in 0..n {
            worst = worst.max((u[(i, pj)] - u[(parity_partner(i, n), j)]).norm());
        }
    }
    worst
}

// (index, partner, sign): basis vector (|index> + sign |partner>) / sqrt(2),
// or |index> alone when the index is self-paired.
fn parity_basis(dim: usize, even: bool) -> Vec<(usize, usize, f64)> {
    let half = dim / 2;
    let mut basis = Vec::with_capacity(if even { half + 1 } else { half - 1 });
    if even {
        basis.push((0, 0, 1.0));
        basis.push((half, half, 1.0));
    }
    let sign = if even { 1.0 } else { -1.0 };
    for m in 1..half {
        basis.push((m, dim - m, sign));
    }
    basis
}

fn project(u: &Mat<C64>, basis: &[(usize, usize, f64)]) -> Mat<C64> {
    let amps = |&(a, b, s): &(usize, usize, f64)| -> Vec<(usize, f64)> {
        if a == b {
            vec![(a, 1.0)]
        } else {
            vec![(a, FRAC_1_SQRT_2), (b, s * FRAC_1_SQRT_2)]
        }
    };
    let vecs: Vec<Vec<(usize, f64)>> = basis.iter().map(amps).collect();
    Mat::from_fn(basis.len(), basis.len(), |r, c| {
        let mut acc = C64::new(0.0, 0.0);
        for &(i, ci) in &vecs[r] {
            for &(j, cj) in &vecs[c] {
                acc += u[(i, j)] * (ci * cj);
            }
        }
        acc
    })
}

/// Restrictions of a parity-symmetric operator to the even (`N/2 + 1`) and
/// odd (`N/2 - 1`) subspaces.
pub fn parity_blocks(p: &MapParams, u: &Mat<C64>) -> Result<(Mat<C64>, Mat<C64>)> {
    if u.nrows() != p.dim || u.ncols() != p.dim {
        return Err(Error::Contract(format!(
            "operator is {}x{}, expected {}",
            u.nrows(),
            u.ncols(),
            p.dim
        )));
    }
    if p.is_shifted() {
        return Err(Error::Contract(
            "parity decomposition requires theta0 = phi = 0".into(),
        ));
    }
    let comm = parity_commutator(u);
    if comm > 1e-8 {
        return Err(Error::Contract(format!(
            "operator breaks parity (commutator {comm:e})"
        )));
    }
    Ok((
        project(u, &parity_basis(p.dim, true)),
        project(u, &parity_basis(p.dim, false)),
    ))
}
