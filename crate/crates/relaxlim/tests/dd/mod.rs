//! Test-only high-precision reference for the damped mode: the 2x2 system
//! matrix exponential evaluated by a Taylor series with scaling and
//! squaring in double-double (compensated) arithmetic, about 30 decimal
//! digits. Root-regime agnostic, so it cross-checks every branch of the
//! closed forms.

#[derive(Debug, Clone, Copy)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }
}

fn renorm(hi: f64, lo: f64) -> Dd {
    let s = hi + lo;
    Dd {
        hi: s,
        lo: (hi - s) + lo,
    }
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let e = a.mul_add(b, -p);
    Dd { hi: p, lo: e }
}

pub fn add(x: Dd, y: Dd) -> Dd {
    let s = two_sum(x.hi, y.hi);
    renorm(s.hi, s.lo + x.lo + y.lo)
}

pub fn mul(x: Dd, y: Dd) -> Dd {
    let p = two_prod(x.hi, y.hi);
    renorm(p.hi, p.lo + x.hi * y.lo + x.lo * y.hi)
}

fn div_f64(x: Dd, d: f64) -> Dd {
    let q1 = x.hi / d;
    let r = add(x, scale(two_prod(q1, d), -1.0));
    let q2 = (r.hi + r.lo) / d;
    renorm(q1, q2)
}

fn scale(x: Dd, s: f64) -> Dd {
    // exact only for powers of two and -1, which is how it is used
    Dd {
        hi: x.hi * s,
        lo: x.lo * s,
    }
}

type Mat = [[Dd; 2]; 2];

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[Dd::from(0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = add(mul(a[i][0], b[0][j]), mul(a[i][1], b[1][j]));
        }
    }
    out
}

fn mat_add(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[Dd::from(0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = add(a[i][j], b[i][j]);
        }
    }
    out
}

fn identity() -> Mat {
    [
        [Dd::from(1.0), Dd::from(0.0)],
        [Dd::from(0.0), Dd::from(1.0)],
    ]
}

/// exp(M) by Taylor with scaling and squaring; assumes finite entries.
fn expm(m: &Mat) -> Mat {
    let norm = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, e| acc.max(e.hi.abs()));
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let factor = (0.5f64).powi(s);
    let scaled = [
        [scale(m[0][0], factor), scale(m[0][1], factor)],
        [scale(m[1][0], factor), scale(m[1][1], factor)],
    ];
    // Taylor: term_{n+1} = term_n * A / (n + 1); norm <= 0.25 so 40 terms
    // land far below the double-double epsilon
    let mut sum = identity();
    let mut term = identity();
    for n in 1..=40 {
        term = mat_mul(&term, &scaled);
        for row in term.iter_mut() {
            for entry in row.iter_mut() {
                *entry = div_f64(*entry, n as f64);
            }
        }
        sum = mat_add(&sum, &term);
    }
    for _ in 0..s {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// Reference (value, velocity) at time t for
/// eps g'' + g' + ksq g = 0, g(0) = a, g'(0) = b.
pub fn reference_mode(eps: f64, ksq: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    // x' = [[0, 1], [-ksq/eps, -1/eps]] x
    let m: Mat = [
        [Dd::from(0.0), Dd::from(t)],
        [
            div_f64(mul(Dd::from(-ksq), Dd::from(t)), eps),
            div_f64(Dd::from(-t), eps),
        ],
    ];
    let e = expm(&m);
    let av = Dd::from(a);
    let bv = Dd::from(b);
    let value = add(mul(e[0][0], av), mul(e[0][1], bv));
    let velocity = add(mul(e[1][0], av), mul(e[1][1], bv));
    (value.hi(), velocity.hi())
}
