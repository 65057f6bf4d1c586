//! Test-only oracles, independent of the library's evaluation paths.
#![allow(dead_code)]

const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn gk21(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK21[10];
    let mut g = 0.0;
    for j in 0..10 {
        let dx = h * XGK21[j];
        let pair = f(c - dx) + f(c + dx);
        k += WGK21[j] * pair;
        if j % 2 == 1 {
            g += WG10[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, rel: f64, depth: u32) -> f64 {
    let (whole, err) = gk21(f, a, b);
    if err <= tol.max(rel * whole.abs()) || depth == 0 {
        return whole;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, rel, depth - 1) + adapt(f, m, b, 0.5 * tol, rel, depth - 1)
}

/// Adaptive Gauss–Kronrod (10/21); a panel is accepted once its error
/// estimate is below `tol` or `1e-14` of its own value.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 1e-14, 30)
}

/// `φ(t)` straight from the formula.
pub fn density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `∫₀^60 u^α exp(−tu − u²/2) du`, i.e. `E(Z − t)₊^α / φ(t)`, integrated on
/// unit panels so the tolerance is relative to the peak of the integrand.
pub fn scaled_moment_oracle(alpha: u32, t: f64) -> f64 {
    let f = move |u: f64| u.powi(alpha as i32) * (-t * u - 0.5 * u * u).exp();
    // Peak location and height fix the scale of the absolute tolerance.
    let peak_u = {
        let disc = t * t + 4.0 * alpha as f64;
        ((-t + disc.sqrt()) / 2.0).max(0.0)
    };
    let peak = f(peak_u).max(f(1e-3));
    let mut total = 0.0;
    for k in 0..60 {
        total += integrate(f, k as f64, k as f64 + 1.0, 1e-16 * peak);
    }
    total
}

/// `E(Z − t)₊^α` by quadrature.
pub fn moment_oracle(alpha: u32, t: f64) -> f64 {
    density(t) * scaled_moment_oracle(alpha, t)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
