//! Radial derivatives of g(r) = e^{ikr}/(kr).

use num_complex::Complex64;

use crate::c64;

// Below this |kr| the regular part of g′ is summed as a series to avoid cancellation.
const SERIES_CUTOFF: f64 = 0.5;

pub(crate) fn g(r: f64, k: f64) -> Complex64 {
    c64(0.0, k * r).exp() / (k * r)
}

/// g′(r) = e^{ikr}(ikr − 1)/(k r²).
pub(crate) fn dg(r: f64, k: f64) -> Complex64 {
    c64(0.0, k * r).exp() * c64(-1.0, k * r) / (k * r * r)
}

/// g′(r) + 1/(k r²): what is left of g′ once the static part is removed. Bounded as r → 0.
pub(crate) fn dg_regular(r: f64, k: f64) -> Complex64 {
    let kr = k * r;
    if kr >= SERIES_CUTOFF {
        return dg(r, k) + 1.0 / (k * r * r);
    }
    // (1/(k r²)) Σ_{n≥2} (ikr)ⁿ (n − 1)/n!
    let z = c64(0.0, kr);
    let mut term = z / 1.0;
    let mut sum = c64(0.0, 0.0);
    for n in 2..30 {
        term = term * z / n as f64;
        let add = term * (n - 1) as f64;
        sum += add;
        if add.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    // term carries (ikr)ⁿ/n!, so divide by r² and k once: (1/(k r²))·Σ = k·Σ/(kr)².
    sum * (k / (kr * kr))
}

/// g″(r) = e^{ikr}[−k²/r − 2ik/r² + 2/r³]/k.
pub(crate) fn d2g(r: f64, k: f64) -> Complex64 {
    let r2 = r * r;
    c64(0.0, k * r).exp() * c64(-k * k / r + 2.0 / (r2 * r), -2.0 * k / r2) / k
}
