//! Selling's decomposition of symmetric positive definite matrices in
//! dimension ≤ 3: `D = Σₖ ρₖ vₖ vₖᵀ` with `ρₖ ≥ 0` and integer offsets `vₖ`.
//!
//! A superbase `(b₀, …, b_d)` of `ℤᵈ` with `Σ bᵢ = 0` is reduced until it is
//! `D`-obtuse (`⟨bᵢ, D bⱼ⟩ ≤ 0` for `i ≠ j`); the weights are then
//! `−⟨bᵢ, D bⱼ⟩` attached to the offset orthogonal to the remaining vectors.

pub type Offset = [i64; 3];

/// One term `ρ v vᵀ` of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellingTerm {
    pub weight: f64,
    pub offset: Offset,
}

const MAX_REDUCTIONS: usize = 10_000;

fn dot_d(d: &[[f64; 3]; 3], a: &Offset, b: &Offset, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i] as f64 * d[i][j] * b[j] as f64;
        }
    }
    s
}

/// Decomposes the leading `dim × dim` block of `d`. Zero weights are dropped.
pub fn decompose(d: &[[f64; 3]; 3], dim: usize) -> Vec<SellingTerm> {
    match dim {
        1 => vec![SellingTerm {
            weight: d[0][0],
            offset: [1, 0, 0],
        }],
        2 => decompose_2d(d),
        3 => decompose_3d(d),
        _ => panic!("Selling decomposition supports dimensions 1..=3"),
    }
    .into_iter()
    .filter(|t| t.weight > 0.0)
    .collect()
}

fn decompose_2d(d: &[[f64; 3]; 3]) -> Vec<SellingTerm> {
    let scale = d[0][0] + d[1][1];
    let mut b: [Offset; 3] = [[1, 0, 0], [0, 1, 0], [-1, -1, 0]];
    for _ in 0..MAX_REDUCTIONS {
        let mut reduced = false;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if dot_d(d, &b[i], &b[j], 2) > 1e-14 * scale {
                let k = 3 - i - j;
                let (bi, bj) = (b[i], b[j]);
                b[i] = [-bi[0], -bi[1], 0];
                b[k] = [bi[0] - bj[0], bi[1] - bj[1], 0];
                reduced = true;
                break;
            }
        }
        if !reduced {
            break;
        }
    }
    (0..3)
        .map(|k| {
            let (i, j) = match k {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            SellingTerm {
                weight: (-dot_d(d, &b[i], &b[j], 2)).max(0.0),
                offset: canonical([-b[k][1], b[k][0], 0]),
            }
        })
        .collect()
}

fn decompose_3d(d: &[[f64; 3]; 3]) -> Vec<SellingTerm> {
    let scale = d[0][0] + d[1][1] + d[2][2];
    let mut b: [Offset; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for _ in 0..MAX_REDUCTIONS {
        let mut reduced = false;
        for &(i, j) in &pairs {
            if dot_d(d, &b[i], &b[j], 3) > 1e-14 * scale {
                let bi = b[i];
                for k in 0..4 {
                    if k != i && k != j {
                        for c in 0..3 {
                            b[k][c] += bi[c];
                        }
                    }
                }
                b[i] = [-bi[0], -bi[1], -bi[2]];
                reduced = true;
                break;
            }
        }
        if !reduced {
            break;
        }
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
            let (p, q) = (b[others[0]], b[others[1]]);
            let cross = [
                p[1] * q[2] - p[2] * q[1],
                p[2] * q[0] - p[0] * q[2],
                p[0] * q[1] - p[1] * q[0],
            ];
            SellingTerm {
                weight: (-dot_d(d, &b[i], &b[j], 3)).max(0.0),
                offset: canonical(cross),
            }
        })
        .collect()
}

/// Sign-normalizes an offset so that its first nonzero entry is positive.
fn canonical(v: Offset) -> Offset {
    let first = v.iter().find(|c| **c != 0).copied().unwrap_or(0);
    if first < 0 {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}
