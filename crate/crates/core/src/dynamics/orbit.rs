use super::{CatMatrix, DynamicsError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

/// A point `(p1/q, p2/q)` of the torus with a common denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalPoint {
    pub p1: u64,
    pub p2: u64,
    pub q: u64,
}

impl RationalPoint {
    /// Reduces the numerators modulo `q`; `q` must be positive.
    pub fn new(p1: i64, p2: i64, q: u64) -> Result<Self, DynamicsError> {
        if q == 0 {
            return Err(DynamicsError::InvalidPoint("zero denominator".into()));
        }
        let qi = q as i128;
        Ok(RationalPoint {
            p1: (p1 as i128).rem_euclid(qi) as u64,
            p2: (p2 as i128).rem_euclid(qi) as u64,
            q,
        })
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.p1 as f64 / self.q as f64, self.p2 as f64 / self.q as f64]
    }

    /// One exact step of the map, arithmetic mod `q`.
    pub fn step(&self, m: &CatMatrix) -> RationalPoint {
        let [[a, b], [c, d]] = m.entries();
        let q = self.q as i128;
        let (x, y) = (self.p1 as i128, self.p2 as i128);
        RationalPoint {
            p1: (a as i128 * x + b as i128 * y).rem_euclid(q) as u64,
            p2: (c as i128 * x + d as i128 * y).rem_euclid(q) as u64,
            q: self.q,
        }
    }

    /// Each coordinate as a reduced fraction string, e.g. `"2/3"` or `"0"`.
    pub fn coordinate_strings(&self) -> [String; 2] {
        [reduced(self.p1, self.q), reduced(self.p2, self.q)]
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduced(p: u64, q: u64) -> String {
    if p == 0 {
        return "0".into();
    }
    let g = gcd(p, q);
    format!("{}/{}", p / g, q / g)
}

impl fmt::Display for RationalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y] = self.coordinate_strings();
        write!(f, "({x}, {y})")
    }
}

/// Parses `"p/q,r/s"` (integers allowed) into a point with common denominator `lcm(q, s)`.
impl FromStr for RationalPoint {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DynamicsError::InvalidPoint(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(bad());
        }
        let frac = |t: &str| -> Result<(i64, u64), DynamicsError> {
            match t.split_once('/') {
                Some((n, d)) => {
                    let n: i64 = n.trim().parse().map_err(|_| bad())?;
                    let d: u64 = d.trim().parse().map_err(|_| bad())?;
                    if d == 0 {
                        return Err(bad());
                    }
                    Ok((n, d))
                }
                None => Ok((t.parse().map_err(|_| bad())?, 1)),
            }
        };
        let (n1, d1) = frac(parts[0])?;
        let (n2, d2) = frac(parts[1])?;
        let q = d1 / gcd(d1, d2) * d2;
        let s1 = i64::try_from(q / d1).map_err(|_| bad())?;
        let s2 = i64::try_from(q / d2).map_err(|_| bad())?;
        RationalPoint::new(
            n1.checked_mul(s1).ok_or_else(bad)?,
            n2.checked_mul(s2).ok_or_else(bad)?,
            q,
        )
    }
}

/// A closed orbit of the cat map through rational points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<RationalPoint>,
    pub period: usize,
}

impl PeriodicOrbit {
    pub fn points_f64(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(RationalPoint::to_f64).collect()
    }
}

/// Forward orbit of `x` until its first return. `A` permutes the finite set
/// `(ℤ/q)²`, so every rational point is periodic.
pub fn orbit_of_rational(m: &CatMatrix, x: RationalPoint) -> PeriodicOrbit {
    let mut points = vec![x];
    let mut p = x.step(m);
    while p != x {
        points.push(p);
        p = p.step(m);
    }
    let period = points.len();
    PeriodicOrbit { points, period }
}

fn mat_mul_mod(x: &[[u64; 2]; 2], y: &[[u64; 2]; 2], m: u64) -> [[u64; 2]; 2] {
    let m = m as u128;
    let e = |i: usize, j: usize| {
        ((x[i][0] as u128 * y[0][j] as u128 + x[i][1] as u128 * y[1][j] as u128) % m) as u64
    };
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn reduce_mod(a: &CatMatrix, m: u64) -> [[u64; 2]; 2] {
    a.entries().map(|r| r.map(|v| (v as i128).rem_euclid(m as i128) as u64))
}

/// Least `k ≥ 1` with `A^k ≡ I (mod m)`, or `None` if it exceeds `k_max`.
pub fn period_mod_bounded(a: &CatMatrix, m: u64, k_max: u64) -> Option<u64> {
    assert!(m >= 1, "modulus must be positive");
    let identity = reduce_mod(&CatMatrix { a: 1, b: 0, c: 0, d: 1 }, m);
    let base = reduce_mod(a, m);
    let mut power = base;
    let mut k = 1;
    while power != identity {
        if k >= k_max {
            return None;
        }
        power = mat_mul_mod(&power, &base, m);
        k += 1;
    }
    Some(k)
}

/// Least `k ≥ 1` with `A^k ≡ I (mod m)`; it exists because `A` is invertible mod `m`.
pub fn period_mod(a: &CatMatrix, m: u64) -> u64 {
    period_mod_bounded(a, m, u64::MAX).expect("A is invertible modulo m")
}

/// All `N` in `range` whose period of `A` modulo `2N` is at most `k_max`,
/// sorted by period and then by `N`.
pub fn special_n_scan(a: &CatMatrix, range: RangeInclusive<u64>, k_max: u64) -> Vec<(u64, u64)> {
    assert!(k_max >= 1, "k_max must be positive");
    let mut out: Vec<(u64, u64)> = range
        .filter(|&n| n >= 1)
        .filter_map(|n| period_mod_bounded(a, 2 * n, k_max).map(|k| (n, k)))
        .collect();
    out.sort_by_key(|&(n, k)| (k, n));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arnold() -> CatMatrix {
        CatMatrix::arnold()
    }

    #[test]
    fn figure_orbit() {
        let x: RationalPoint = "1/3,0".parse().unwrap();
        let orbit = orbit_of_rational(&arnold(), x);
        assert_eq!(orbit.period, 4);
        let got: Vec<String> = orbit.points.iter().map(|p| p.to_string()).collect();
        assert_eq!(got, ["(1/3, 0)", "(2/3, 1/3)", "(2/3, 0)", "(1/3, 2/3)"]);
    }

    #[test]
    fn origin_is_fixed() {
        let orbit = orbit_of_rational(&arnold(), RationalPoint::new(0, 0, 7).unwrap());
        assert_eq!(orbit.period, 1);
    }

    #[test]
    fn fifth_point_period_matches_brute_force() {
        // oracle: iterate the map on (ℤ/5)² by hand
        let (mut x, mut y, mut n) = (1i64, 0i64, 0);
        loop {
            (x, y) = ((2 * x + y) % 5, (x + y) % 5);
            n += 1;
            if (x, y) == (1, 0) {
                break;
            }
        }
        let orbit = orbit_of_rational(&arnold(), "1/5,0".parse().unwrap());
        assert_eq!(orbit.period, n);
        assert_eq!(n, 10);
    }

    #[test]
    fn periods_mod_m() {
        assert_eq!(period_mod(&arnold(), 2584), 18);
        assert_eq!(period_mod(&arnold(), 1), 1);
        assert_eq!(period_mod(&arnold(), 2), 3);
        assert_eq!(period_mod_bounded(&arnold(), 2584, 17), None);
    }

    #[test]
    fn special_scan() {
        let hits = special_n_scan(&arnold(), 1200..=1300, 18);
        assert!(hits.contains(&(1292, 18)));
        assert!(special_n_scan(&arnold(), 10..=9, 5).is_empty());

        let scan = special_n_scan(&arnold(), 2..=100, 6);
        let brute: Vec<u64> = (2..=100u64).filter(|&n| period_mod(&arnold(), 2 * n) <= 6).collect();
        let mut got: Vec<u64> = scan.iter().map(|&(n, _)| n).collect();
        got.sort();
        assert_eq!(got, brute);
        for &(n, k) in &scan {
            assert_eq!(period_mod(&arnold(), 2 * n), k);
        }
        assert!(scan.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn parsing() {
        let p: RationalPoint = "1/3, 1/2".parse().unwrap();
        assert_eq!(p, RationalPoint { p1: 2, p2: 3, q: 6 });
        let p: RationalPoint = "-1/3,0".parse().unwrap();
        assert_eq!(p, RationalPoint { p1: 2, p2: 0, q: 3 });
        assert!("1/0,1".parse::<RationalPoint>().is_err());
        assert!("1/2".parse::<RationalPoint>().is_err());
        assert!("a,b".parse::<RationalPoint>().is_err());
    }

    fn small_cat() -> impl Strategy<Value = CatMatrix> {
        (1i64..4, 1i64..4).prop_map(|(p, q)| {
            CatMatrix::new([[1 + p * q, p], [q, 1]]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn period_of_multiple_annihilates_divisor(a in small_cat(), m in 1u64..40, m2 in 1u64..20) {
            let k = period_mod(&a, m * m2);
            // A^k ≡ I mod m·m' implies the same mod m
            let p = reduce_mod(&a.checked_pow(1).unwrap(), m);
            let mut acc = p;
            for _ in 1..k { acc = mat_mul_mod(&acc, &p, m); }
            prop_assert_eq!(acc, reduce_mod(&CatMatrix { a: 1, b: 0, c: 0, d: 1 }, m));
            prop_assert_eq!(k % period_mod(&a, m), 0);
        }

        #[test]
        fn orbits_are_cyclic(a in small_cat(), p1 in 0i64..30, p2 in 0i64..30, q in 1u64..30) {
            let x = RationalPoint::new(p1, p2, q).unwrap();
            let orbit = orbit_of_rational(&a, x);
            let n = orbit.period;
            for (i, p) in orbit.points.iter().enumerate() {
                prop_assert_eq!(p.step(&a), orbit.points[(i + 1) % n]);
                let mut y = *p;
                for _ in 0..n { y = y.step(&a); }
                prop_assert_eq!(y, *p);
            }
            let mut uniq = orbit.points.clone();
            uniq.sort_by_key(|p| (p.p1, p.p2));
            uniq.dedup();
            prop_assert_eq!(uniq.len(), n);
        }
    }
}
