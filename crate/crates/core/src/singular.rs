//! Cell-averaged values of the weakly singular kernels 1/r, 1/r² and ∂(1/r)/∂z_i.
//!
//! The midpoint rule breaks down in the few cells around the singular point.
//! There we replace the point value by the exact average of the kernel over the
//! cell. For a box with the singular point at a corner, the average follows from
//! homogeneity: the half-size corner box carries 2^{-(3+p)} of the integral for a
//! kernel of degree p, so I = R / (1 − 2^{-(3+p)}) where R is the regular part.

use std::sync::OnceLock;

use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SingularKernel {
    /// 1/|z|
    InvR,
    /// 1/|z|²
    InvR2,
    /// z_a/|z|³ = ∂(1/r)/∂y_a with z = x − y (0-based axis).
    GradInvR(usize),
}

impl SingularKernel {
    #[inline]
    pub fn eval(&self, z: [f64; 3]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        match *self {
            SingularKernel::InvR => 1.0 / r2.sqrt(),
            SingularKernel::InvR2 => 1.0 / r2,
            SingularKernel::GradInvR(a) => z[a] / (r2 * r2.sqrt()),
        }
    }

    /// Homogeneity degree p: K(λz) = λ^p K(z).
    pub fn degree(&self) -> i32 {
        match self {
            SingularKernel::InvR => -1,
            SingularKernel::InvR2 | SingularKernel::GradInvR(_) => -2,
        }
    }
}

const GL_POINTS: usize = 8;
const MAX_DEPTH: u32 = 10;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_POINTS))
}

fn gl_box(k: SingularKernel, lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let (x, w) = rule();
    let c: [f64; 3] = std::array::from_fn(|a| 0.5 * (lo[a] + hi[a]));
    let h: [f64; 3] = std::array::from_fn(|a| 0.5 * (hi[a] - lo[a]));
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        for (xj, wj) in x.iter().zip(w) {
            for (xk, wk) in x.iter().zip(w) {
                let z = [c[0] + h[0] * xi, c[1] + h[1] * xj, c[2] + h[2] * xk];
                s += wi * wj * wk * k.eval(z);
            }
        }
    }
    s * h[0] * h[1] * h[2]
}

fn distance_to_origin(lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let d = if lo[a] > 0.0 {
            lo[a]
        } else if hi[a] < 0.0 {
            -hi[a]
        } else {
            0.0
        };
        d2 += d * d;
    }
    d2.sqrt()
}

fn diameter(lo: [f64; 3], hi: [f64; 3]) -> f64 {
    (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt()
}

fn children(lo: [f64; 3], hi: [f64; 3]) -> impl Iterator<Item = ([f64; 3], [f64; 3])> {
    let mid: [f64; 3] = std::array::from_fn(|a| 0.5 * (lo[a] + hi[a]));
    (0..8).map(move |bits| {
        let mut clo = [0.0; 3];
        let mut chi = [0.0; 3];
        for a in 0..3 {
            if bits >> a & 1 == 0 {
                clo[a] = lo[a];
                chi[a] = mid[a];
            } else {
                clo[a] = mid[a];
                chi[a] = hi[a];
            }
        }
        (clo, chi)
    })
}

/// ∫ over a box not containing the origin, subdividing near it.
fn regular_box(k: SingularKernel, lo: [f64; 3], hi: [f64; 3], depth: u32) -> f64 {
    if depth >= MAX_DEPTH || distance_to_origin(lo, hi) >= 1.5 * diameter(lo, hi) {
        return gl_box(k, lo, hi);
    }
    children(lo, hi).map(|(a, b)| regular_box(k, a, b, depth + 1)).sum()
}

/// ∫ over a box having the origin as one of its corners.
fn corner_box(k: SingularKernel, lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let mut regular = 0.0;
    for (a, b) in children(lo, hi) {
        let touches = (0..3).all(|ax| a[ax] == 0.0 || b[ax] == 0.0);
        if !touches {
            regular += regular_box(k, a, b, 1);
        }
    }
    regular / (1.0 - 2f64.powi(-(3 + k.degree())))
}

/// Exact integral of the kernel over the axis-aligned box [lo, hi].
pub fn box_integral(k: SingularKernel, lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let contains = (0..3).all(|a| lo[a] <= 0.0 && hi[a] >= 0.0);
    if !contains {
        return regular_box(k, lo, hi, 0);
    }
    // split at the origin so every piece has it as a corner
    let mut cuts: [Vec<(f64, f64)>; 3] = Default::default();
    for a in 0..3 {
        if lo[a] < 0.0 {
            cuts[a].push((lo[a], 0.0));
        }
        if hi[a] > 0.0 {
            cuts[a].push((0.0, hi[a]));
        }
    }
    let mut total = 0.0;
    for &(x0, x1) in &cuts[0] {
        for &(y0, y1) in &cuts[1] {
            for &(z0, z1) in &cuts[2] {
                total += corner_box(k, [x0, y0, z0], [x1, y1, z1]);
            }
        }
    }
    total
}

/// Cell averages of a kernel on the unit lattice near the singular point.
///
/// `offset` shifts cell centres relative to the singular point: 0.0 when the
/// singular point sits at a cell centre, 0.5 when it sits at a cell corner.
#[derive(Debug, Clone)]
pub struct NearField {
    kernel: SingularKernel,
    radius: i64,
    offset: f64,
    values: Vec<f64>,
}

impl NearField {
    pub fn new(kernel: SingularKernel, radius: usize, offset: f64) -> Self {
        let radius = radius as i64;
        let (lo_k, span) = Self::range(radius, offset);
        let mut values = Vec::with_capacity((span * span * span) as usize);
        for kz in 0..span {
            for ky in 0..span {
                for kx in 0..span {
                    let c = [
                        (lo_k + kx) as f64 + offset,
                        (lo_k + ky) as f64 + offset,
                        (lo_k + kz) as f64 + offset,
                    ];
                    let lo = [c[0] - 0.5, c[1] - 0.5, c[2] - 0.5];
                    let hi = [c[0] + 0.5, c[1] + 0.5, c[2] + 0.5];
                    values.push(box_integral(kernel, lo, hi));
                }
            }
        }
        Self {
            kernel,
            radius,
            offset,
            values,
        }
    }

    fn range(radius: i64, offset: f64) -> (i64, i64) {
        if offset == 0.0 {
            (-radius, 2 * radius + 1)
        } else {
            (-radius, 2 * radius)
        }
    }

    /// Average over the unit cell with integer index `k` (centre k + offset),
    /// or `None` outside the corrected neighbourhood.
    pub fn unit_average(&self, k: [i64; 3]) -> Option<f64> {
        let (lo_k, span) = Self::range(self.radius, self.offset);
        let idx: Option<Vec<usize>> = k
            .iter()
            .map(|&v| {
                let i = v - lo_k;
                (0..span).contains(&i).then_some(i as usize)
            })
            .collect();
        let idx = idx?;
        let span = span as usize;
        Some(self.values[idx[0] + span * (idx[1] + span * idx[2])])
    }

    /// Kernel weight for a cell of spacing `h`: the cell average near the
    /// singular point, the centre value elsewhere.
    pub fn cell_value(&self, k: [i64; 3], h: f64) -> f64 {
        match self.unit_average(k) {
            Some(avg) => avg * h.powi(self.kernel.degree()),
            None => {
                let z = [
                    (k[0] as f64 + self.offset) * h,
                    (k[1] as f64 + self.offset) * h,
                    (k[2] as f64 + self.offset) * h,
                ];
                self.kernel.eval(z)
            }
        }
    }
}

/// Shared tables for cell-centred convolution kernels (singular point at a cell centre).
pub fn centred_table(kernel: SingularKernel) -> &'static NearField {
    static TABLES: OnceLock<[NearField; 5]> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        [
            NearField::new(SingularKernel::InvR, 3, 0.0),
            NearField::new(SingularKernel::InvR2, 3, 0.0),
            NearField::new(SingularKernel::GradInvR(0), 3, 0.0),
            NearField::new(SingularKernel::GradInvR(1), 3, 0.0),
            NearField::new(SingularKernel::GradInvR(2), 3, 0.0),
        ]
    });
    match kernel {
        SingularKernel::InvR => &tables[0],
        SingularKernel::InvR2 => &tables[1],
        SingularKernel::GradInvR(a) => &tables[2 + a],
    }
}

/// Shared table for 1/r² with the singular point on a cell corner.
pub fn corner_inv_r2_table() -> &'static NearField {
    static TABLE: OnceLock<NearField> = OnceLock::new();
    TABLE.get_or_init(|| NearField::new(SingularKernel::InvR2, 4, 0.5))
}
