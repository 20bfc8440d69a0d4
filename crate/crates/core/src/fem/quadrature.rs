//! Seven-point degree-5 rule on triangles.

/// Barycentric points and weights (weights sum to one; multiply by the area).
pub struct Rule {
    pub points: [[f64; 3]; 7],
    pub weights: [f64; 7],
}

pub fn degree5() -> &'static Rule {
    static RULE: std::sync::OnceLock<Rule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        let r15 = 15f64.sqrt();
        let a1 = (6.0 - r15) / 21.0;
        let b1 = 1.0 - 2.0 * a1;
        let a2 = (6.0 + r15) / 21.0;
        let b2 = 1.0 - 2.0 * a2;
        let w1 = (155.0 - r15) / 1200.0;
        let w2 = (155.0 + r15) / 1200.0;
        let c = 1.0 / 3.0;
        Rule {
            points: [
                [c, c, c],
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: [9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of l0^a l1^b l2^c over a triangle of unit area:
    /// 2 a! b! c! / (a+b+c+2)!
    fn exact(a: u32, b: u32, c: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2)
    }

    #[test]
    fn exact_through_degree_five() {
        let r = degree5();
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for a in 0..=5 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                        .sum();
                    assert!((q - exact(a, b, c)).abs() < 1e-14, "{a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn not_exact_at_degree_six() {
        let r = degree5();
        let q: f64 = r.points.iter().zip(r.weights).map(|(p, w)| w * p[0].powi(6)).sum();
        assert!((q - exact(6, 0, 0)).abs() > 1e-8);
    }
}
