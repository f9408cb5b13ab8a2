//! Closed-form solution of the quadratic real-time program
//!
//! ```text
//! min  a * x_r^2 + sum_t m_t * kappa_t / 2 * x_t^2
//! s.t. x_r + sum_t m_t * x_t = s,   lo_t <= x_t <= hi_t
//! ```
//!
//! At the optimum every block curtails `clip(lambda / kappa_t, lo_t, hi_t)`
//! where `lambda = 2 a x_r` is the marginal reserve price. The excess
//! `F(lambda) = lambda / (2a) + sum_t m_t clip(lambda / kappa_t) - s` is
//! strictly increasing and piecewise linear, so the root is found exactly by
//! locating its segment among the clip breakpoints.

/// `mult` identical loads with cost `kappa / 2 * x^2` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Block {
    pub kappa: f64,
    pub lo: f64,
    pub hi: f64,
    pub mult: f64,
}

impl Block {
    #[inline]
    pub fn response(&self, price: f64) -> f64 {
        (price / self.kappa).clamp(self.lo, self.hi)
    }
}

/// Marginal reserve price clearing the mismatch `s`.
pub(crate) fn clearing_price(a: f64, blocks: &[Block], s: f64) -> f64 {
    if a <= 0.0 {
        // free reserve absorbs everything; loads stay at zero (inside any box)
        return 0.0;
    }
    let inv = 0.5 / a;
    let excess =
        |price: f64| -> f64 { price * inv + blocks.iter().map(|b| b.mult * b.response(price)).sum::<f64>() - s };

    let mut breaks: Vec<f64> = blocks
        .iter()
        .flat_map(|b| [b.kappa * b.lo, b.kappa * b.hi])
        .filter(|x| x.is_finite())
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let j = breaks.partition_point(|&b| excess(b) < 0.0);
    if let Some(&b) = breaks.get(j) {
        if excess(b) == 0.0 {
            return b;
        }
    }
    let left = j.checked_sub(1).map(|k| breaks[k]);
    let right = breaks.get(j).copied();
    let probe = match (left, right) {
        (None, None) => 0.0,
        (None, Some(r)) => r - 1.0,
        (Some(l), None) => l + 1.0,
        (Some(l), Some(r)) => 0.5 * (l + r),
    };

    // linear on the segment containing the probe
    let mut slope = inv;
    let mut rhs = s;
    for b in blocks {
        let x = probe / b.kappa;
        if x <= b.lo {
            rhs -= b.mult * b.lo;
        } else if x >= b.hi {
            rhs -= b.mult * b.hi;
        } else {
            slope += b.mult / b.kappa;
        }
    }
    let price = rhs / slope;
    let lo = left.unwrap_or(f64::NEG_INFINITY);
    let hi = right.unwrap_or(f64::INFINITY);
    price.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(kappa: f64, mult: f64) -> Block {
        Block {
            kappa,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            mult,
        }
    }

    #[test]
    fn unconstrained_two_loads() {
        let price = clearing_price(5.0, &[free(1.0, 1.0), free(2.0, 1.0)], 16.0);
        assert!((price - 10.0).abs() < 1e-12);
    }

    #[test]
    fn box_binds_both() {
        let blocks = [
            Block {
                kappa: 1.0,
                lo: 0.0,
                hi: 3.0,
                mult: 1.0,
            },
            Block {
                kappa: 2.0,
                lo: 0.0,
                hi: 3.0,
                mult: 1.0,
            },
        ];
        let price = clearing_price(5.0, &blocks, 16.0);
        // x_r = 16 - 6 = 10, price = 2 * 5 * 10
        assert!((price - 100.0).abs() < 1e-9);
        assert_eq!(blocks[0].response(price), 3.0);
        assert_eq!(blocks[1].response(price), 3.0);
    }

    #[test]
    fn negative_mismatch_with_box() {
        let blocks = [Block {
            kappa: 1.0,
            lo: 0.0,
            hi: 3.0,
            mult: 2.0,
        }];
        let price = clearing_price(1.0, &blocks, -4.0);
        assert!((price + 8.0).abs() < 1e-12);
        assert_eq!(blocks[0].response(price), 0.0);
    }

    #[test]
    fn zero_reserve_cost() {
        assert_eq!(clearing_price(0.0, &[free(1.0, 3.0)], 7.0), 0.0);
    }

    #[test]
    fn excess_vanishes_at_root() {
        let blocks = [
            Block {
                kappa: 0.5,
                lo: 0.0,
                hi: 1.0,
                mult: 3.0,
            },
            Block {
                kappa: 4.0,
                lo: 0.0,
                hi: 2.0,
                mult: 1.0,
            },
            free(2.5, 2.0),
        ];
        for &s in &[-10.0, -0.1, 0.0, 0.7, 3.0, 9.0, 40.0] {
            let a = 1.5;
            let p = clearing_price(a, &blocks, s);
            let f = p / (2.0 * a) + blocks.iter().map(|b| b.mult * b.response(p)).sum::<f64>() - s;
            assert!(f.abs() < 1e-9, "s={s} residual {f}");
        }
    }
}
