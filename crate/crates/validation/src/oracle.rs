//! Reference computations that share no numerical code with the library:
//! exact rational Laguerre sums, the first blue CM sideband Hamiltonian
//! written out level by level, a Taylor matrix exponential and a 2×2
//! matrix logarithm.

use ndarray::Array2;
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use vibronic::fock::ModeParams;
use vibronic::hamiltonian::DriveParams;
use vibronic::operator::ElectronicLabel;

fn binomial(n: u64, r: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..r {
        acc *= BigInt::from(n - i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

/// L_n^k(x) = Σ_{i=0}^{n} (-1)^i C(n+k, n-i) x^i / i!, summed exactly in
/// rationals and rounded once.
pub fn laguerre_exact(n: u64, k: u64, x: f64) -> f64 {
    let x = BigRational::from_float(x).expect("finite x");
    let mut sum = BigRational::zero();
    let mut power = BigRational::one();
    let mut fact = BigInt::one();
    for i in 0..=n {
        if i > 0 {
            power *= x.clone();
            fact *= BigInt::from(i);
        }
        let term =
            BigRational::from_integer(binomial(n + k, n - i)) * power.clone() / BigRational::from_integer(fact.clone());
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.to_f64().expect("representable")
}

/// e^{-η²/2} m!/(m+k)! L_m^k(η²)
pub fn mode_weight_exact(m: usize, k: usize, eta: f64) -> f64 {
    let ratio: f64 = (m + 1..=m + k).map(|j| 1.0 / j as f64).product();
    (-0.5 * eta * eta).exp() * ratio * laguerre_exact(m as u64, k as u64, eta * eta)
}

/// Effective Hamiltonian of the first blue CM sideband (k = 1, k_r = 0)
/// assembled entry by entry: two-ion flip, exchange and light shifts. The
/// truncated ladder operators lose a a† on the top CM level.
pub fn effective_elementwise(params: &ModeParams, drive: &DriveParams) -> Array2<C64> {
    assert!(params.k == 1 && params.k_r == 0, "first blue CM sideband only");
    let basis = params.basis();
    let (eta, eta_r) = (params.eta, params.eta_r);
    let omega0 = drive.omega0();
    let top = params.n_cm_max - 1;
    let mut h = Array2::<C64>::zeros((basis.dim(), basis.dim()));
    for n in 0..params.n_cm_max {
        for n_r in 0..params.n_rel_max {
            let g2 = mode_weight_exact(n_r, 0, eta_r).powi(2);
            let f0 = mode_weight_exact(n, 0, eta);
            // ⟨n|X†X|n⟩ and ⟨n|XX†|n⟩ without the factor g₀²
            let xdx = if n < top { eta * eta * (n + 1) as f64 * mode_weight_exact(n, 1, eta).powi(2) } else { 0.0 };
            let xxd = if n > 0 { eta * eta * n as f64 * mode_weight_exact(n - 1, 1, eta).powi(2) } else { 0.0 };
            let idx = |l| basis.index(l, n, n_r).expect("in basis");
            h[[idx(ElectronicLabel::DownDown), idx(ElectronicLabel::DownDown)]] =
                C64::new(-2.0 * omega0 * g2 * (xdx - f0 * f0), 0.0);
            h[[idx(ElectronicLabel::UpUp), idx(ElectronicLabel::UpUp)]] =
                C64::new(2.0 * omega0 * g2 * (xxd - f0 * f0), 0.0);
            let single = C64::new(omega0 * g2 * (xxd - xdx), 0.0);
            h[[idx(ElectronicLabel::DownUp), idx(ElectronicLabel::DownUp)]] = single;
            h[[idx(ElectronicLabel::UpDown), idx(ElectronicLabel::UpDown)]] = single;
            let exchange = single * C64::from_polar(1.0, drive.phi0);
            h[[idx(ElectronicLabel::UpDown), idx(ElectronicLabel::DownUp)]] = exchange;
            h[[idx(ElectronicLabel::DownUp), idx(ElectronicLabel::UpDown)]] = exchange.conj();
            if n < top {
                let up = basis.index(ElectronicLabel::UpUp, n + 1, n_r).expect("in basis");
                let down = idx(ElectronicLabel::DownDown);
                let c = C64::new(0.0, 2.0 * omega0 * eta * ((n + 1) as f64).sqrt())
                    * mode_weight_exact(n, 1, eta)
                    * g2
                    * (f0 - mode_weight_exact(n + 1, 0, eta));
                h[[up, down]] = c;
                h[[down, up]] = c.conj();
            }
        }
    }
    h
}

/// exp(A) by scaling and squaring with a 30-term Taylor series.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let norm1 = (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let n = a.nrows();
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for j in 1..=30 {
        term = term.dot(&scaled).mapv(|z| z / j as f64);
        result += &term;
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Principal logarithm of a 2×2 matrix with distinct eigenvalues, by
/// Sylvester's formula.
pub fn logm2(m: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr * 0.25 - det).sqrt();
    let (l1, l2) = (tr * 0.5 + disc, tr * 0.5 - disc);
    let (f1, f2) = (l1.ln(), l2.ln());
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            out[i][j] = f1 * (m[i][j] - id * l2) / (l1 - l2) + f2 * (m[i][j] - id * l1) / (l2 - l1);
        }
    }
    out
}
