#pragma once

// Two-mode Gaussian states in the (X1, Y1, X2, Y2) quadrature ordering with
// vacuum variance 1/2, symplectic transforms, and the entanglement measures
// computed from the covariance matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "cvent/minimize.hpp"

namespace cvent {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kVacuumVariance = 0.5;
/// Square-root arguments in [-kClampTolerance, 0) are clamped to zero.
inline constexpr double kClampTolerance = 1e-9;
inline constexpr double kSymplecticTolerance = 1e-10;

/// Standard two-mode symplectic form, blockdiag([[0,1],[-1,0]] x 2).
inline Mat4 symplectic_form()
{
    Mat4 omega = Mat4::Zero();
    omega(0, 1) = 1.0;
    omega(1, 0) = -1.0;
    omega(2, 3) = 1.0;
    omega(3, 2) = -1.0;
    return omega;
}

class GaussianState {
  public:
    GaussianState(const Vec4& mu, const Mat4& sigma) : mu_(mu), sigma_(0.5 * (sigma + sigma.transpose()))
    {
        if (!mu_.allFinite() || !sigma_.allFinite()) {
            throw std::invalid_argument("GaussianState: non-finite entries");
        }
    }

    const Vec4& mu() const { return mu_; }
    const Mat4& sigma() const { return sigma_; }

    // Sigma = [[A, Gamma], [Gamma^T, B]]
    Mat2 block_a() const { return sigma_.block<2, 2>(0, 0); }
    Mat2 block_b() const { return sigma_.block<2, 2>(2, 2); }
    Mat2 block_gamma() const { return sigma_.block<2, 2>(0, 2); }

    friend bool operator==(const GaussianState& l, const GaussianState& r)
    {
        return l.mu_ == r.mu_ && l.sigma_ == r.sigma_;
    }

  private:
    Vec4 mu_;
    Mat4 sigma_;
};

inline GaussianState vacuum_state()
{
    return GaussianState(Vec4::Zero(), kVacuumVariance * Mat4::Identity());
}

class SymplecticTransform {
  public:
    explicit SymplecticTransform(const Mat4& m) : matrix_(m)
    {
        const Mat4 omega = symplectic_form();
        const double err = (m * omega * m.transpose() - omega).cwiseAbs().maxCoeff();
        if (!(err < kSymplecticTolerance)) {
            throw std::invalid_argument("SymplecticTransform: M Omega M^T != Omega (max error " +
                                        std::to_string(err) + ")");
        }
    }

    const Mat4& matrix() const { return matrix_; }

    /// Composition: (this * other) applies `other` first.
    SymplecticTransform operator*(const SymplecticTransform& other) const
    {
        return SymplecticTransform(matrix_ * other.matrix_);
    }

  private:
    Mat4 matrix_;
};

/// Squeezes mode 1: X1 -> X1/sqrt(s), Y1 -> Y1*sqrt(s).
inline SymplecticTransform squeeze_transform(double s)
{
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("squeeze_transform: s must be positive");
    }
    return SymplecticTransform(Vec4(1.0 / std::sqrt(s), std::sqrt(s), 1.0, 1.0).asDiagonal());
}

inline SymplecticTransform beamsplitter_transform(double t)
{
    if (!(t > 0.0 && t < 1.0)) {
        throw std::invalid_argument("beamsplitter_transform: t must lie in (0, 1)");
    }
    const double tr = std::sqrt(t);
    const double cp = std::sqrt(1.0 - t);
    Mat4 m;
    // clang-format off
    m << tr,  0.0, -cp,  0.0,
         0.0, tr,   0.0, -cp,
         cp,  0.0,  tr,  0.0,
         0.0, cp,   0.0, tr;
    // clang-format on
    return SymplecticTransform(m);
}

inline SymplecticTransform phase_transform(double phi1, double phi2)
{
    const double c1 = std::cos(phi1), s1 = std::sin(phi1);
    const double c2 = std::cos(phi2), s2 = std::sin(phi2);
    Mat4 m;
    // clang-format off
    m << c1,  s1,  0.0, 0.0,
         -s1, c1,  0.0, 0.0,
         0.0, 0.0, c2,  s2,
         0.0, 0.0, -s2, c2;
    // clang-format on
    return SymplecticTransform(m);
}

inline GaussianState apply_transform(const GaussianState& state, const SymplecticTransform& m)
{
    const Mat4& mm = m.matrix();
    return GaussianState(mm * state.mu(), mm * state.sigma() * mm.transpose());
}

/// Pure-loss channel on each mode: each mode is mixed with vacuum on a beam
/// splitter of transmissivity eta and the ancilla is traced out.
inline GaussianState apply_loss(const GaussianState& state, double eta1, double eta2)
{
    if (!(eta1 >= 0.0 && eta1 <= 1.0) || !(eta2 >= 0.0 && eta2 <= 1.0)) {
        throw std::invalid_argument("apply_loss: efficiencies must lie in [0, 1]");
    }
    const Vec4 h(eta1, eta1, eta2, eta2);
    const Vec4 root = h.cwiseSqrt();
    const Mat4 kept = root.asDiagonal() * state.sigma() * root.asDiagonal();
    const Mat4 added = (kVacuumVariance * (Vec4::Ones() - h)).asDiagonal();
    return GaussianState(root.cwiseProduct(state.mu()), kept + added);
}

// ---------------------------------------------------------------------------
// Block invariants and symplectic spectra
// ---------------------------------------------------------------------------

struct BlockInvariants {
    double det_a;
    double det_b;
    double det_gamma;
    double det_sigma;

    /// Delta(Sigma) = |A| + |B| + 2|Gamma|, invariant under Sp(4, R).
    double delta() const { return det_a + det_b + 2.0 * det_gamma; }
    /// Same quantity for the partial transpose (Y2 -> -Y2).
    double delta_transposed() const { return det_a + det_b - 2.0 * det_gamma; }
};

namespace detail {
inline double det2(const Mat2& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

inline double clamped_sqrt(double x, const char* what)
{
    if (x < 0.0) {
        if (x < -kClampTolerance) {
            throw std::domain_error(std::string(what) + ": negative square-root argument " +
                                    std::to_string(x));
        }
        return 0.0;
    }
    return std::sqrt(x);
}
}  // namespace detail

inline BlockInvariants block_invariants(const Mat4& sigma)
{
    return {detail::det2(sigma.block<2, 2>(0, 0)), detail::det2(sigma.block<2, 2>(2, 2)),
            detail::det2(sigma.block<2, 2>(0, 2)), sigma.determinant()};
}

struct SymplecticPair {
    double nu1;  ///< smaller
    double nu2;
};

/// nu_{1,2} = sqrt((delta -+ sqrt(delta^2 - 4 det)) / 2).
inline SymplecticPair symplectic_pair(double delta, double det)
{
    const double disc = detail::clamped_sqrt(delta * delta - 4.0 * det, "symplectic discriminant");
    return {detail::clamped_sqrt(0.5 * (delta - disc), "symplectic eigenvalue"),
            detail::clamped_sqrt(0.5 * (delta + disc), "symplectic eigenvalue")};
}

inline SymplecticPair symplectic_eigenvalues(const Mat4& sigma)
{
    const BlockInvariants inv = block_invariants(sigma);
    return symplectic_pair(inv.delta(), inv.det_sigma);
}

struct PhysicalityCheck {
    bool physical;
    double min_nu;  ///< NaN when the spectrum is not real
};

/// Heisenberg check: Sigma > 0 and nu1 >= 1/2 (within 1e-9). Never throws.
inline PhysicalityCheck check_physicality(const Mat4& sigma)
{
    double nu1 = std::numeric_limits<double>::quiet_NaN();
    try {
        nu1 = symplectic_eigenvalues(sigma).nu1;
    } catch (const std::domain_error&) {
        return {false, nu1};
    }
    const Eigen::SelfAdjointEigenSolver<Mat4> eig(sigma, Eigen::EigenvaluesOnly);
    const bool positive = eig.eigenvalues().minCoeff() > 0.0;
    return {positive && nu1 >= kVacuumVariance - kClampTolerance, nu1};
}

struct NegativityResult {
    SymplecticPair nu;
    SymplecticPair nu_tilde;
    double negativity;
};

inline NegativityResult negativity(const Mat4& sigma)
{
    const BlockInvariants inv = block_invariants(sigma);
    NegativityResult out{};
    out.nu = symplectic_pair(inv.delta(), inv.det_sigma);
    out.nu_tilde = symplectic_pair(inv.delta_transposed(), inv.det_sigma);
    const double nt = out.nu_tilde.nu1;
    if (!(nt > 0.0)) {
        throw std::domain_error("negativity: partial-transpose symplectic eigenvalue is zero");
    }
    out.negativity = std::max(0.0, (kVacuumVariance - nt) / (2.0 * nt));
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature statistics and the separability witness
// ---------------------------------------------------------------------------

struct QuadratureMoments {
    double var1;
    double var2;
    double cov;
};

/// Variances of W1(theta1), W2(theta2) and their covariance, with
/// W(theta) = X cos(theta) + Y sin(theta).
inline QuadratureMoments quadrature_variance(const Mat4& sigma, double theta1, double theta2)
{
    const Vec4 u1(std::cos(theta1), std::sin(theta1), 0.0, 0.0);
    const Vec4 u2(0.0, 0.0, std::cos(theta2), std::sin(theta2));
    return {u1.dot(sigma * u1), u2.dot(sigma * u2), u1.dot(sigma * u2)};
}

namespace detail {
inline double wrap_two_pi(double x)
{
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    x = std::fmod(x, kTwoPi);
    return x < 0.0 ? x + kTwoPi : x;
}
}  // namespace detail

struct PhaseMinimum {
    double value;
    double theta1;
    double theta2;
};

/// min over theta of Var(W_mode(theta)): the smaller eigenvalue of the
/// mode's 2x2 block (mode 0 or 1). The unused phase is reported as 0.
inline PhaseMinimum minimum_mode_variance(const Mat4& sigma, int mode)
{
    if (mode != 0 && mode != 1) throw std::invalid_argument("minimum_mode_variance: mode must be 0 or 1");
    const Mat2 block = sigma.block<2, 2>(2 * mode, 2 * mode);
    const double mean = 0.5 * (block(0, 0) + block(1, 1));
    const double half_diff = 0.5 * (block(0, 0) - block(1, 1));
    const double radius = std::hypot(half_diff, block(0, 1));
    // Var(theta) = mean + half_diff cos 2 theta + b01 sin 2 theta
    const double theta = detail::wrap_two_pi(0.5 * std::atan2(-block(0, 1), -half_diff));
    const double th = theta >= std::numbers::pi ? theta - std::numbers::pi : theta;
    return mode == 0 ? PhaseMinimum{mean - radius, th, 0.0} : PhaseMinimum{mean - radius, 0.0, th};
}

/// min over (theta1, theta2) of (1/2) Var(W1(theta1) + W2(theta2)): a
/// 180 x 360 grid over [0, pi) x [0, 2 pi) followed by a simplex polish.
/// The joint shift (theta1 + pi, theta2 + pi) leaves it unchanged.
inline PhaseMinimum minimum_joint_variance(const Mat4& sigma)
{
    auto half_var = [&](double t1, double t2) {
        const QuadratureMoments m = quadrature_variance(sigma, t1, t2);
        return 0.5 * (m.var1 + m.var2 + 2.0 * m.cov);
    };
    constexpr int kN1 = 180;
    constexpr int kN2 = 360;
    const double step = std::numbers::pi / kN1;
    double best = std::numeric_limits<double>::infinity();
    double b1 = 0.0, b2 = 0.0;
    for (int i = 0; i < kN1; ++i) {
        for (int j = 0; j < kN2; ++j) {
            const double v = half_var(i * step, j * step);
            if (v < best) {
                best = v;
                b1 = i * step;
                b2 = j * step;
            }
        }
    }
    const auto r = nelder_mead<2>([&](const std::array<double, 2>& x) { return half_var(x[0], x[1]); },
                                  {b1, b2}, {0.5 * step, 0.5 * step}, 1e-16);
    if (r.f < best) {
        best = r.f;
        b1 = r.x[0];
        b2 = r.x[1];
    }
    b1 = detail::wrap_two_pi(b1);
    b2 = detail::wrap_two_pi(b2);
    if (b1 >= std::numbers::pi) {
        b1 -= std::numbers::pi;
        b2 = detail::wrap_two_pi(b2 + std::numbers::pi);
    }
    return {best, b1, b2};
}

struct WitnessResult {
    double e_w;
    double a_star;
    /// Optimal theta1 + theta2 in [0, 2 pi).
    double phase_star;
    double delta_epr;
    /// True when the closed form did not apply (an unphysical single-mode
    /// block) and the bounded grid search was used.
    bool grid_fallback = false;
};

/// R(theta1, theta2, a) - (a^2 + 1/a^2) for a > 0, evaluated from Sigma.
inline double witness_objective(const Mat4& sigma, double theta1, double theta2, double a)
{
    const double c1 = std::cos(theta1), s1 = std::sin(theta1);
    const double c2 = std::cos(theta2), s2 = std::sin(theta2);
    const Vec4 v(a * c1, a * s1, c2 / a, s2 / a);
    const Vec4 w(-a * s1, a * c1, s2 / a, -c2 / a);
    return v.dot(sigma * v) + w.dot(sigma * w) - (a * a + 1.0 / (a * a));
}

/// Bounded grid search over theta1 in [0, 2 pi) (theta2 = 0) and a in
/// [0.2, 5]: 721 phases x 121 log-spaced a values, then alternating
/// golden-section refinement.
inline WitnessResult witness_grid_search(const Mat4& sigma)
{
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    constexpr int kPhases = 721;
    constexpr int kAmps = 121;
    const double log_lo = std::log(0.2);
    const double log_hi = std::log(5.0);
    const double phase_step = kTwoPi / (kPhases - 1);
    const double log_step = (log_hi - log_lo) / (kAmps - 1);

    auto objective = [&](double phase, double log_a) {
        return witness_objective(sigma, phase, 0.0, std::exp(log_a));
    };

    double best_phase = 0.0;
    double best_log_a = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kPhases; ++i) {
        const double phase = i * phase_step;
        for (int j = 0; j < kAmps; ++j) {
            const double la = log_lo + j * log_step;
            const double f = objective(phase, la);
            if (f < best) {
                best = f;
                best_phase = phase;
                best_log_a = la;
            }
        }
    }

    for (int round = 0; round < 200; ++round) {
        const double before = best;
        const double la = best_log_a;
        const auto p = golden_section([&](double x) { return objective(x, la); },
                                      best_phase - phase_step, best_phase + phase_step, 1e-12);
        best_phase = p.x;
        const double ph = best_phase;
        const auto q = golden_section([&](double x) { return objective(ph, x); },
                                      std::max(log_lo, best_log_a - log_step),
                                      std::min(log_hi, best_log_a + log_step), 1e-12);
        best_log_a = q.x;
        best = q.f;
        if (std::abs(before - best) < 1e-15) break;
    }

    // Delta_EPR: a = 1, minimized over the combined phase.
    double epr_phase = 0.0;
    double epr_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kPhases; ++i) {
        const double f = objective(i * phase_step, 0.0);
        if (f < epr_best) {
            epr_best = f;
            epr_phase = i * phase_step;
        }
    }
    const auto e = golden_section([&](double x) { return objective(x, 0.0); }, epr_phase - phase_step,
                                  epr_phase + phase_step, 1e-12);

    return {best, std::exp(best_log_a), detail::wrap_two_pi(best_phase), 0.5 * (e.f + 2.0), true};
}

/// E_W = min over phases and a of R - (a^2 + 1/a^2), in closed form:
/// E_W = 2 sqrt(c1 c2) + c3 with c1 = Tr A - 1, c2 = Tr B - 1 and c3 the
/// phase-optimized cross term. E_W < 0 certifies entanglement.
inline WitnessResult entanglement_witness(const Mat4& sigma)
{
    const double c1_raw = sigma(0, 0) + sigma(1, 1) - 1.0;
    const double c2_raw = sigma(2, 2) + sigma(3, 3) - 1.0;
    if (c1_raw < -kClampTolerance || c2_raw < -kClampTolerance) {
        return witness_grid_search(sigma);
    }
    const double c1 = std::max(0.0, c1_raw);
    const double c2 = std::max(0.0, c2_raw);

    // Gamma'_xx - Gamma'_yy = cos(th1 + th2) p + sin(th1 + th2) q
    const double p = sigma(0, 2) - sigma(1, 3);
    const double q = sigma(0, 3) + sigma(1, 2);
    const double amplitude = std::hypot(p, q);
    const double c3 = -2.0 * amplitude;
    const double phase = amplitude > 0.0 ? detail::wrap_two_pi(std::atan2(-q, -p)) : 0.0;

    WitnessResult out;
    if (c1 * c2 > 0.0) {
        out.e_w = 2.0 * std::sqrt(c1 * c2) + c3;
        out.a_star = std::pow(c2 / c1, 0.25);
    } else {
        out.e_w = c3;
        out.a_star = 1.0;
    }
    out.phase_star = phase;
    out.delta_epr = 0.5 * (sigma(0, 0) + sigma(1, 1) + sigma(2, 2) + sigma(3, 3) + c3);
    return out;
}

}  // namespace cvent
