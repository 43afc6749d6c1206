#include "msh2/spectrum.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace msh2 {

namespace {

// Roots of a real polynomial c_0 + c_1 x + ... + c_d x^d via the companion
// matrix; the leading coefficient must be nonzero.
ComplexVector poly_roots(const Vector& coeffs) {
    const Index d = coeffs.size() - 1;
    Matrix companion = Matrix::Zero(d, d);
    for (Index i = 1; i < d; ++i) {
        companion(i, i - 1) = 1.0;
    }
    for (Index i = 0; i < d; ++i) {
        companion(i, d - 1) = -coeffs(i) / coeffs(d);
    }
    return eigenvalues(companion);
}

// Multiply a complex polynomial (ascending powers) by (x - root).
void append_root(ComplexVector& poly, const Complex& root) {
    ComplexVector out = ComplexVector::Zero(poly.size() + 1);
    out.tail(poly.size()) += poly;
    out.head(poly.size()) -= root * poly;
    poly = out;
}

Vector convolve_with_reversal(const Vector& phi) {
    // c(lambda) = sum_i phi_i phi_{i+lambda}, lambda = 0..tau
    const Index m = phi.size();
    Vector c = Vector::Zero(m);
    for (Index lam = 0; lam < m; ++lam) {
        double acc = 0.0;
        for (Index i = 0; i + lam < m; ++i) {
            acc += phi(i) * phi(i + lam);
        }
        c(lam) = acc;
    }
    return c;
}

}  // namespace

bool SpectralModel::noise_free() const {
    return Phi.cwiseAbs().maxCoeff() == 0.0;
}

StateSpace SpectralModel::mean_system() const {
    return StateSpace(Ahat, Bhat1, Matrix(Chat), Matrix::Constant(1, 1, Dhat1));
}

StateSpace SpectralModel::factor_system() const {
    return StateSpace(Ahat, Bhat2, Matrix(Chat), Matrix::Constant(1, 1, Dhat2));
}

LaurentSpectrum autocorrelation(const NoiseModel& noise) {
    const int tau = noise.horizon();
    Vector r = Vector::Zero(tau + 1);
    for (int lam = 0; lam <= tau; ++lam) {
        double acc = 0.0;
        for (int i = 0; i + lam <= tau; ++i) {
            acc += noise.beta(i, i + lam);
        }
        r(lam) = acc;
    }
    return LaurentSpectrum{r};
}

Vector spectrum_on_grid(const LaurentSpectrum& spectrum, int grid_points) {
    Vector values(grid_points);
    const int tau = spectrum.horizon();
    for (int k = 0; k < grid_points; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / grid_points;
        double s = spectrum.r(0);
        for (int lam = 1; lam <= tau; ++lam) {
            s += 2.0 * spectrum.r(lam) * std::cos(lam * theta);
        }
        values(k) = s;
    }
    return values;
}

Vector spectral_factorize(const LaurentSpectrum& spectrum) {
    const int tau = spectrum.horizon();
    const Vector& r = spectrum.r;
    const double scale = std::max(r.cwiseAbs().maxCoeff(), 1e-300);

    const Vector grid = spectrum_on_grid(spectrum);
    const double grid_min = grid.minCoeff();
    if (grid_min < -1e-9 * std::max(1.0, scale)) {
        std::ostringstream os;
        os << "spectral_factorize: spectrum is negative on the unit circle (min " << grid_min
           << ")";
        throw std::invalid_argument(os.str());
    }
    if (r(0) <= 0.0) {
        throw std::invalid_argument("spectral_factorize: r(0) must be positive");
    }

    // Effective degree: trailing correlations that vanish shorten the factor.
    int deg = tau;
    while (deg > 0 && std::abs(r(deg)) <= 1e-14 * scale) {
        --deg;
    }

    Vector phi = Vector::Zero(tau + 1);
    if (deg == 0) {
        phi(0) = std::sqrt(r(0));
        return phi;
    }

    // Roots of p(x) = x^deg S(x) = sum_{k=0}^{2 deg} r(|k - deg|) x^k come in
    // reciprocal pairs; keep the strictly-inside member of each pair.
    Vector p(2 * deg + 1);
    for (int k = 0; k <= 2 * deg; ++k) {
        p(k) = r(std::abs(k - deg));
    }
    ComplexVector roots = poly_roots(p);

    std::vector<Complex> pool(roots.data(), roots.data() + roots.size());
    std::vector<Complex> inside;
    while (!pool.empty()) {
        const Complex rho = pool.back();
        pool.pop_back();
        Index partner = -1;
        double best = 1e-6;
        for (Index i = 0; i < static_cast<Index>(pool.size()); ++i) {
            const double mismatch = std::abs(rho * pool[i] - 1.0);
            if (mismatch < best) {
                best = mismatch;
                partner = i;
            }
        }
        if (partner < 0) {
            std::ostringstream os;
            os << "spectral_factorize: unpaired root " << format_complex(rho)
               << " (no reciprocal partner)";
            throw std::domain_error(os.str());
        }
        const Complex mate = pool[static_cast<size_t>(partner)];
        pool.erase(pool.begin() + partner);
        const Complex in = std::abs(rho) <= std::abs(mate) ? rho : mate;
        if (std::abs(in) >= 1.0 - kCircleTol) {
            std::ostringstream os;
            os << "spectral_factorize: spectrum vanishes on the unit circle near theta = "
               << std::arg(in) << " rad (root " << format_complex(in) << ")";
            throw std::domain_error(os.str());
        }
        inside.push_back(in);
    }

    // Monic polynomial q(z^-1) = prod (1 - rho_i z^-1), then scale so that the
    // factor reproduces r(0).
    ComplexVector q = ComplexVector::Ones(1);
    for (const Complex& rho : inside) {
        append_root(q, rho);
    }
    // q now holds prod (x - rho_i) in ascending powers; the z^-1 coefficient
    // vector is the reversal (up to sign bookkeeping handled by the rescale).
    Vector qr(deg + 1);
    for (int i = 0; i <= deg; ++i) {
        qr(i) = q(deg - i).real();
    }
    if (qr(0) < 0.0) {
        qr = -qr;
    }
    const double energy = qr.squaredNorm();
    const double gain = std::sqrt(r(0) / energy);
    phi.head(deg + 1) = gain * qr;

    // The root set determines the factor up to one scalar, so matching r(0)
    // must reproduce every coefficient.
    const Vector check = convolve_with_reversal(phi);
    for (int lam = 0; lam <= tau; ++lam) {
        if (std::abs(check(lam) - r(lam)) > 1e-10 * std::max(1.0, scale)) {
            std::ostringstream os;
            os << "spectral_factorize: round-trip mismatch at lag " << lam << " ("
               << check(lam) << " vs " << r(lam) << ")";
            throw std::runtime_error(os.str());
        }
    }
    return phi;
}

SpectralModel shared_realization(const Vector& H, const Vector& Phi) {
    if (H.size() != Phi.size() || H.size() < 1) {
        throw std::invalid_argument("shared_realization: H and Phi must have equal length >= 1");
    }
    const int tau = static_cast<int>(H.size()) - 1;

    SpectralModel sm;
    sm.H = H;
    sm.Phi = Phi;
    sm.Ahat = Matrix::Zero(tau, tau);
    for (int i = 0; i + 1 < tau; ++i) {
        sm.Ahat(i, i + 1) = 1.0;
    }
    sm.Bhat1 = H.tail(tau);
    sm.Bhat2 = Phi.tail(tau);
    sm.Chat = RowVector::Zero(tau);
    if (tau > 0) {
        sm.Chat(0) = 1.0;
    }
    sm.Dhat1 = H(0);
    sm.Dhat2 = Phi(0);

    // Impulse-response replay over tau+1 samples must reproduce the
    // coefficients exactly.
    const double tol = 1e-12 * std::max(1.0, std::max(H.cwiseAbs().maxCoeff(),
                                                      Phi.cwiseAbs().maxCoeff()));
    Vector xh = sm.Bhat1;
    Vector xp = sm.Bhat2;
    for (int k = 0; k <= tau; ++k) {
        const double h_k = (k == 0) ? sm.Dhat1 : (sm.Chat * xh)(0);
        const double p_k = (k == 0) ? sm.Dhat2 : (sm.Chat * xp)(0);
        if (std::abs(h_k - H(k)) > tol || std::abs(p_k - Phi(k)) > tol) {
            throw std::runtime_error("shared_realization: impulse-response replay mismatch");
        }
        if (k > 0) {
            xh = (sm.Ahat * xh).eval();
            xp = (sm.Ahat * xp).eval();
        }
    }
    return sm;
}

SpectralModel spectral_model_from_noise(const NoiseModel& noise) {
    const LaurentSpectrum spec = autocorrelation(noise);
    Vector phi;
    if (spec.r.cwiseAbs().maxCoeff() <= 1e-300) {
        phi = Vector::Zero(spec.r.size());
    } else {
        phi = spectral_factorize(spec);
    }
    return shared_realization(noise.mu, phi);
}

}  // namespace msh2
