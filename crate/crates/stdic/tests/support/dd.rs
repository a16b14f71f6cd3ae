//! Minimal double-double arithmetic (~31 significant digits) for use as an
//! extended-precision reference, plus a pivoted 4x4 solve. Error-free
//! transformations follow the classic Dekker/Knuth constructions with
//! `mul_add` providing the exact product remainder.

#[derive(Debug, Clone, Copy)]
pub struct DD {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DD {
    pub fn from(v: f64) -> DD {
        DD { hi: v, lo: 0.0 }
    }

    /// Exact product of two doubles as a DD.
    pub fn prod(a: f64, b: f64) -> DD {
        let (hi, lo) = two_prod(a, b);
        DD { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn abs(self) -> f64 {
        self.hi.abs()
    }
}

impl std::ops::Add for DD {
    type Output = DD;
    fn add(self, rhs: DD) -> DD {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let e = e + self.lo + rhs.lo;
        let (hi, lo) = quick_two_sum(s, e);
        DD { hi, lo }
    }
}

impl std::ops::Sub for DD {
    type Output = DD;
    fn sub(self, rhs: DD) -> DD {
        self + (-rhs)
    }
}

impl std::ops::Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Mul for DD {
    type Output = DD;
    fn mul(self, rhs: DD) -> DD {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }
}

impl std::ops::Div for DD {
    type Output = DD;
    fn div(self, rhs: DD) -> DD {
        // two Newton-style correction terms are ample here
        let q1 = self.hi / rhs.hi;
        let r = self - DD::from(q1) * rhs;
        let q2 = r.hi / rhs.hi;
        let r = r - DD::from(q2) * rhs;
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::from(q3)
    }
}

/// Gaussian elimination with partial pivoting, entirely in double-double.
pub fn solve_4x4(mut a: [[DD; 4]; 4], mut b: [DD; 4]) -> [DD; 4] {
    let n = 4;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = [DD::from(0.0); 4];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_sums_track_exact_rationals() {
        // 10 additions of 0.1 miss 1.0 in f64 but not in DD
        let tenth = DD::from(1.0) / DD::from(10.0);
        let mut acc = DD::from(0.0);
        for _ in 0..10 {
            acc = acc + tenth;
        }
        let err = (acc - DD::from(1.0)).abs();
        assert!(err < 1e-30, "err {err}");
    }

    #[test]
    fn solve_recovers_known_solution() {
        // A x = b with x = [1, -2, 3, -4]
        let a_f = [
            [4.0, 1.0, 2.0, 0.5],
            [1.0, 3.0, 0.0, 1.0],
            [2.0, 0.0, 5.0, 1.5],
            [0.5, 1.0, 1.5, 4.0],
        ];
        let x_true = [1.0, -2.0, 3.0, -4.0];
        let mut b = [DD::from(0.0); 4];
        let mut a = [[DD::from(0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] = DD::from(a_f[i][j]);
                b[i] = b[i] + DD::prod(a_f[i][j], x_true[j]);
            }
        }
        let x = solve_4x4(a, b);
        for i in 0..4 {
            assert!((x[i].hi() - x_true[i]).abs() < 1e-14);
        }
    }
}
