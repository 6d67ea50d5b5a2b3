//! Standard normal distribution function, upper tail and upper-tail quantile.
//!
//! Every probability in the crate is carried on the ordinary scale. The
//! upper tail `phi_bar` is evaluated through `erfc`, which keeps full relative
//! precision far into the tail; the quantile `z_of` starts from Wichura's
//! AS 241 rational approximation and is polished with one Newton step
//! against `phi_bar`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Like [`Probability::new`] but additionally rejects 0 and 1.
    pub fn open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside (0, 1)")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Standard normal deviate with this upper-tail area.
    pub fn z(self) -> Result<ZScore> {
        z_of(self.0).map(ZScore)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A standard normal deviate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ZScore(pub f64);

impl ZScore {
    /// Upper-tail area beyond this deviate.
    pub fn upper_tail(self) -> Probability {
        Probability(phi_bar(self.0))
    }
}

/// Standard normal density.
#[inline]
pub fn phi_density(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Upper tail `1 - Φ(z)`.
#[inline]
pub fn phi_bar(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Distribution function `Φ(z)`.
#[inline]
pub fn phi(z: f64) -> f64 {
    phi_bar(-z)
}

/// Upper-tail quantile: the `z` with `phi_bar(z) = u`.
pub fn z_of(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("z_of requires 0 < u < 1, got {u}")));
    }
    Ok(z_of_unchecked(u))
}

/// [`z_of`] without the domain check; `u` must lie in `(0, 1)`.
pub(crate) fn z_of_unchecked(u: f64) -> f64 {
    let mut z = -ppnd16(u);
    // One Newton step on phi_bar(z) - u; AS 241 is already close to machine
    // precision so a single correction suffices.
    let d = phi_density(z);
    if d > 0.0 {
        z += (phi_bar(z) - u) / d;
    }
    z
}

/// Two-sided p-value from a one-sided one: `min(1, 2 min(p, 1 - p))`.
#[inline]
pub fn two_sided(p: f64) -> f64 {
    (2.0 * p.min(1.0 - p)).min(1.0)
}

/// Wichura (1988), algorithm AS 241: lower-tail normal quantile.
#[allow(clippy::excessive_precision)] // coefficients as published
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent erfc: Maclaurin series of erf for small arguments and a
    /// Lentz continued fraction for the tail.
    fn erfc_oracle(x: f64) -> f64 {
        if x < 0.0 {
            return 2.0 - erfc_oracle(-x);
        }
        if x < 2.5 {
            // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
            let mut term = x;
            let mut sum = x;
            let mut n = 0.0;
            loop {
                n += 1.0;
                term *= -x * x / n;
                let add = term / (2.0 * n + 1.0);
                sum += add;
                if add.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
            let tiny = 1e-300;
            let mut f = x;
            let mut c = x;
            let mut d = 0.0;
            for k in 1..500 {
                let a = k as f64 / 2.0;
                d = x + a * d;
                if d.abs() < tiny {
                    d = tiny;
                }
                c = x + a / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                d = 1.0 / d;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            (-x * x).exp() / std::f64::consts::PI.sqrt() / f
        }
    }

    fn phi_bar_oracle(z: f64) -> f64 {
        0.5 * erfc_oracle(z / std::f64::consts::SQRT_2)
    }

    #[test]
    fn phi_bar_examples() {
        assert_eq!(phi_bar(0.0), 0.5);
        assert!((phi_bar(1.959964) - 0.025).abs() < 1e-6);
        assert!((phi_bar(-0.5) + phi_bar(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_bar_matches_series_oracle() {
        let mut z = -8.0;
        while z <= 8.0 {
            let diff = (phi_bar(z) - phi_bar_oracle(z)).abs();
            assert!(diff <= 1e-12, "z={z} diff={diff}");
            z += 0.01;
        }
    }

    #[test]
    fn phi_bar_tail_relative_accuracy() {
        let mut z = 6.0;
        while z <= 10.0 {
            let (a, b) = (phi_bar(z), phi_bar_oracle(z));
            assert!(((a - b) / b).abs() <= 1e-6, "z={z}");
            z += 0.05;
        }
    }

    // Below about -5.6 neighbouring grid values round to the same double
    // near 1, so monotonicity is only checked where it is representable.
    #[test]
    fn phi_bar_strictly_decreasing() {
        let mut prev = phi_bar(-5.0);
        for i in 1..10_000 {
            let z = -5.0 + 15.0 * i as f64 / 10_000.0;
            let cur = phi_bar(z);
            assert!(cur < prev, "z={z}");
            prev = cur;
        }
    }

    #[test]
    fn z_of_examples() {
        assert_eq!(z_of(0.5).unwrap(), 0.0);
        assert!((z_of(0.025).unwrap() - 1.959964).abs() < 1e-5);
        assert!((z_of(phi_bar(1.23)).unwrap() - 1.23).abs() < 1e-9);
        // Oracle: bisection on the series phi_bar.
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi_bar_oracle(mid) > 0.025 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((z_of(0.025).unwrap() - lo).abs() < 1e-10);
    }

    #[test]
    fn z_of_domain() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(z_of(bad), Err(Error::Domain(_))));
        }
        assert!(Probability::new(1.2).is_err());
        assert!(Probability::open(0.0).is_err());
    }

    #[test]
    fn two_sided_doubling() {
        assert_eq!(two_sided(0.0042), 0.0084);
        assert_eq!(two_sided(0.5), 1.0);
        assert!((two_sided(0.99) - 0.02).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(z in -5.0f64..8.0) {
            let back = z_of(phi_bar(z)).unwrap();
            prop_assert!((back - z).abs() <= 1e-8, "z={} back={}", z, back);
        }

        // Near u = 1 the input itself carries an error of one ulp, which the
        // quantile magnifies by 1 / phi(z).
        #[test]
        fn round_trip_lower_tail(z in -8.0f64..-5.0) {
            let u = phi_bar(z);
            let back = z_of(u).unwrap();
            let bound = 4.0 * f64::EPSILON / phi_density(z);
            prop_assert!((back - z).abs() <= bound, "z={} back={}", z, back);
        }

        #[test]
        fn quantile_inverts(u in 1e-12f64..0.999_999) {
            let z = z_of(u).unwrap();
            prop_assert!((phi_bar(z) - u).abs() <= 1e-9);
        }

        #[test]
        fn quantile_decreasing(a in 1e-9f64..0.999, b in 1e-9f64..0.999) {
            prop_assume!(a < b);
            prop_assert!(z_of(a).unwrap() >= z_of(b).unwrap());
        }
    }
}
