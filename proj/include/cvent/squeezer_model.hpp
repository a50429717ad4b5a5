#pragma once

// Single-squeezer model: a squeezed vacuum and a vacuum mixed on a beam
// splitter, with per-channel loss, fixed phase offsets, and gain ratios.
// Provides the covariance-matrix view and the vacuum-normalized variance
// traces, and fits the seven model parameters to measured traces.

#include <Eigen/Dense>

#include <array>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvent/errors.hpp"
#include "cvent/gaussian_core.hpp"
#include "cvent/least_squares.hpp"
#include "cvent/minimize.hpp"

namespace cvent {

struct SqueezerParams {
    double s = 1.0;      ///< squeezing parameter; squeezed variance 1/(2s)
    double alpha = 0.0;  ///< t * eta1
    double beta = 0.0;   ///< (1 - t) * eta2
    double phi1 = 0.0;   ///< radians
    double phi2 = 0.0;   ///< radians
    double g1 = 1.0;     ///< on/off gain ratio, channel 1
    double g2 = 1.0;     ///< on/off gain ratio, channel 2

    void validate() const
    {
        auto fail = [](const std::string& m) { throw std::invalid_argument("SqueezerParams: " + m); };
        if (!(s > 0.0) || !std::isfinite(s)) fail("s must be positive");
        if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
        if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
        if (alpha + beta > 1.0 + 1e-12) fail("alpha + beta must not exceed 1");
        if (!(g1 > 0.0) || !(g2 > 0.0) || !std::isfinite(g1) || !std::isfinite(g2)) {
            fail("gain ratios must be positive");
        }
        if (!std::isfinite(phi1) || !std::isfinite(phi2)) fail("phases must be finite");
    }
};

/// Gain ratio expressed as a percent change, (g - 1) * 100.
inline double gain_change_percent(double g) { return (g - 1.0) * 100.0; }

inline constexpr double kDefaultTransmissivity = 0.51;

/// Covariance matrix just before measurement. With `split` the full chain
/// P(phi) B(t) S(s) on vacuum followed by loss with eta1 = alpha / t and
/// eta2 = beta / (1 - t) is evaluated; without it the closed form in alpha
/// and beta is used directly. Both give the same matrix for any admissible t.
inline GaussianState predict_covariance(const SqueezerParams& params,
                                        double t = kDefaultTransmissivity, bool split = true)
{
    params.validate();
    if (split) {
        if (!(t > 0.0 && t < 1.0)) {
            throw std::invalid_argument("predict_covariance: t must lie in (0, 1)");
        }
        if (params.alpha > t + 1e-15 || params.beta > 1.0 - t + 1e-15) {
            throw std::invalid_argument("predict_covariance: alpha <= t and beta <= 1 - t required (t = " +
                                        std::to_string(t) + ")");
        }
        const double eta1 = std::min(1.0, params.alpha / t);
        const double eta2 = std::min(1.0, params.beta / (1.0 - t));
        const SymplecticTransform chain = phase_transform(params.phi1, params.phi2) *
                                          beamsplitter_transform(t) * squeeze_transform(params.s);
        return apply_loss(apply_transform(vacuum_state(), chain), eta1, eta2);
    }

    const double s = params.s;
    const double a = params.alpha;
    const double b = params.beta;
    const double vx = 0.5 / s;  // squeezed input variance
    const double vy = 0.5 * s;  // anti-squeezed input variance
    const double root = std::sqrt(a * b);
    Mat4 sigma = Mat4::Zero();
    sigma(0, 0) = a * vx + 0.5 * (1.0 - a);
    sigma(1, 1) = a * vy + 0.5 * (1.0 - a);
    sigma(2, 2) = b * vx + 0.5 * (1.0 - b);
    sigma(3, 3) = b * vy + 0.5 * (1.0 - b);
    sigma(0, 2) = sigma(2, 0) = root * (vx - 0.5);
    sigma(1, 3) = sigma(3, 1) = root * (vy - 0.5);
    return apply_transform(GaussianState(Vec4::Zero(), sigma), phase_transform(params.phi1, params.phi2));
}

/// The trace model's phase origin is a quarter turn ahead of the W(theta)
/// convention: predict_traces at theta equals 2 Var(W) of predict_covariance
/// at theta + pi/2 on both modes.
inline constexpr double kTracePhaseOffset = std::numbers::pi / 2.0;

struct PhasePair {
    double theta1;
    double theta2;
};

/// Variance traces in vacuum = 1 normalization: Var(U1), Var(U2),
/// Var(U1 + U2) and optionally Var(U1 - U2), one entry per phase pair.
struct VarianceTraces {
    std::vector<PhasePair> phases;
    std::vector<double> var1;
    std::vector<double> var2;
    std::vector<double> var_sum;
    std::vector<double> var_diff;  ///< empty when not measured

    std::size_t size() const { return phases.size(); }
    bool has_diff() const { return !var_diff.empty(); }

    void validate() const
    {
        const auto n = phases.size();
        if (var1.size() != n || var2.size() != n || var_sum.size() != n ||
            (has_diff() && var_diff.size() != n)) {
            throw std::invalid_argument("VarianceTraces: trace lengths differ");
        }
        auto check = [](const std::vector<double>& v) {
            for (double x : v) {
                if (!(x >= 0.0) || !std::isfinite(x)) {
                    throw std::invalid_argument("VarianceTraces: variances must be finite and non-negative");
                }
            }
        };
        check(var1);
        check(var2);
        check(var_sum);
        check(var_diff);
    }
};

namespace detail {

struct TraceTerms {
    double var1, var2, cross;
};

inline double c0_of(double s) { return 0.5 * (s - 1.0) * (s - 1.0) / s; }
inline double c2_of(double s) { return 0.5 * (s * s - 1.0) / s; }

inline TraceTerms trace_terms(const SqueezerParams& p, double theta1, double theta2)
{
    const double c0 = c0_of(p.s);
    const double c2 = c2_of(p.s);
    const double v1 = p.g1 * (1.0 + c0 * p.alpha + c2 * p.alpha * std::cos(2.0 * theta1 + 2.0 * p.phi1));
    const double v2 = p.g2 * (1.0 + c0 * p.beta + c2 * p.beta * std::cos(2.0 * theta2 + 2.0 * p.phi2));
    const double q = std::sqrt(p.g1 * p.g2 * p.alpha * p.beta);
    const double cross = q * (2.0 * c2 * std::cos(theta1 + theta2 + p.phi1 + p.phi2) +
                              2.0 * c0 * std::cos(theta2 - theta1 + p.phi2 - p.phi1));
    return {v1, v2, cross};
}

}  // namespace detail

/// Vacuum-normalized variance traces of the model; Var(U1 +- U2) =
/// Var(U1) + Var(U2) +- cross term.
inline VarianceTraces predict_traces(const SqueezerParams& params, const std::vector<PhasePair>& phases)
{
    params.validate();
    VarianceTraces out;
    out.phases = phases;
    out.var1.reserve(phases.size());
    out.var2.reserve(phases.size());
    out.var_sum.reserve(phases.size());
    out.var_diff.reserve(phases.size());
    for (const auto& ph : phases) {
        const auto t = detail::trace_terms(params, ph.theta1, ph.theta2);
        out.var1.push_back(t.var1);
        out.var2.push_back(t.var2);
        out.var_sum.push_back(t.var1 + t.var2 + t.cross);
        out.var_diff.push_back(t.var1 + t.var2 - t.cross);
    }
    return out;
}

struct ModelFit {
    SqueezerParams params;
    SqueezerParams std_errors;  ///< same layout, one standard error per field
    double residual_rms = 0.0;
    std::size_t n_residuals = 0;
    int iterations = 0;
    bool used_simplex = false;
};

namespace detail {

inline constexpr int kModelParams = 7;

inline Eigen::VectorXd pack(const SqueezerParams& p)
{
    Eigen::VectorXd x(kModelParams);
    x << p.s, p.alpha, p.beta, p.phi1, p.phi2, p.g1, p.g2;
    return x;
}

inline SqueezerParams unpack(const Eigen::VectorXd& x)
{
    return {x[0], x[1], x[2], x[3], x[4], x[5], x[6]};
}

inline Eigen::VectorXd project_params(Eigen::VectorXd x)
{
    x[0] = std::max(x[0], 1.0);
    x[1] = std::clamp(x[1], 1e-12, 1.0);
    x[2] = std::clamp(x[2], 1e-12, 1.0);
    x[5] = std::max(x[5], 1e-12);
    x[6] = std::max(x[6], 1e-12);
    return x;
}

/// Stacked residuals (model - data) with analytic Jacobian.
inline void trace_residuals(const VarianceTraces& data, const Eigen::VectorXd& x, Eigen::VectorXd& r,
                            Eigen::MatrixXd* jac)
{
    const SqueezerParams p = unpack(x);
    const std::size_t n = data.size();
    const int per = data.has_diff() ? 4 : 3;
    r.resize(static_cast<Eigen::Index>(n * per));
    if (jac) jac->setZero(static_cast<Eigen::Index>(n * per), kModelParams);

    const double s = p.s;
    const double c0 = c0_of(s), c2 = c2_of(s);
    const double dc0 = 0.5 * (1.0 - 1.0 / (s * s));
    const double dc2 = 0.5 * (1.0 + 1.0 / (s * s));
    const double q = std::sqrt(p.g1 * p.g2 * p.alpha * p.beta);

    for (std::size_t i = 0; i < n; ++i) {
        const double th1 = data.phases[i].theta1;
        const double th2 = data.phases[i].theta2;
        const double a1 = 2.0 * th1 + 2.0 * p.phi1;
        const double a2 = 2.0 * th2 + 2.0 * p.phi2;
        const double sum = th1 + th2 + p.phi1 + p.phi2;
        const double dif = th2 - th1 + p.phi2 - p.phi1;
        const double cos1 = std::cos(a1), cos2 = std::cos(a2);
        const double h = 2.0 * c2 * std::cos(sum) + 2.0 * c0 * std::cos(dif);

        const double v1 = p.g1 * (1.0 + c0 * p.alpha + c2 * p.alpha * cos1);
        const double v2 = p.g2 * (1.0 + c0 * p.beta + c2 * p.beta * cos2);
        const double k = q * h;

        const auto row = static_cast<Eigen::Index>(i * per);
        r[row] = v1 - data.var1[i];
        r[row + 1] = v2 - data.var2[i];
        r[row + 2] = v1 + v2 + k - data.var_sum[i];
        if (per == 4) r[row + 3] = v1 + v2 - k - data.var_diff[i];

        if (!jac) continue;
        Eigen::Matrix<double, 1, kModelParams> d1, d2, dk;
        d1.setZero();
        d2.setZero();
        d1[0] = p.g1 * p.alpha * (dc0 + dc2 * cos1);
        d1[1] = p.g1 * (c0 + c2 * cos1);
        d1[3] = -2.0 * p.g1 * c2 * p.alpha * std::sin(a1);
        d1[5] = v1 / p.g1;
        d2[0] = p.g2 * p.beta * (dc0 + dc2 * cos2);
        d2[2] = p.g2 * (c0 + c2 * cos2);
        d2[4] = -2.0 * p.g2 * c2 * p.beta * std::sin(a2);
        d2[6] = v2 / p.g2;
        dk[0] = q * (2.0 * dc2 * std::cos(sum) + 2.0 * dc0 * std::cos(dif));
        dk[1] = 0.5 * k / p.alpha;
        dk[2] = 0.5 * k / p.beta;
        dk[3] = q * (-2.0 * c2 * std::sin(sum) + 2.0 * c0 * std::sin(dif));
        dk[4] = q * (-2.0 * c2 * std::sin(sum) - 2.0 * c0 * std::sin(dif));
        dk[5] = 0.5 * k / p.g1;
        dk[6] = 0.5 * k / p.g2;
        jac->row(row) = d1;
        jac->row(row + 1) = d2;
        jac->row(row + 2) = d1 + d2 + dk;
        if (per == 4) jac->row(row + 3) = d1 + d2 - dk;
    }
}

inline double wrap_pi(double x)  // to [-pi, pi)
{
    constexpr double kPi = std::numbers::pi;
    return x - 2.0 * kPi * std::floor((x + kPi) / (2.0 * kPi));
}

/// phi -> phi + pi on both channels is the only exact symmetry of the model.
inline SqueezerParams canonical_phases(SqueezerParams p)
{
    constexpr double kPi = std::numbers::pi;
    const double k = std::floor((p.phi1 + 0.5 * kPi) / kPi);
    p.phi1 -= k * kPi;
    p.phi2 = wrap_pi(p.phi2 - k * kPi);
    return p;
}

inline std::complex<double> harmonic(const std::vector<double>& v, const std::vector<double>& angle)
{
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i] * std::polar(1.0, -angle[i]);
    }
    return acc / static_cast<double>(v.size());
}

inline double mean_of(const std::vector<double>& v)
{
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace detail

/// Starting values from trace means and Fourier components: each channel
/// trace is m + A cos(2 theta + 2 phi); the cross term carries harmonics in
/// theta1 + theta2 and theta2 - theta1 whose amplitude ratio is (s-1)/(s+1).
inline SqueezerParams initial_params(const VarianceTraces& traces)
{
    const std::size_t n = traces.size();
    std::vector<double> two1(n), two2(n), sum(n), dif(n), cross(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t1 = traces.phases[i].theta1;
        const double t2 = traces.phases[i].theta2;
        two1[i] = 2.0 * t1;
        two2[i] = 2.0 * t2;
        sum[i] = t1 + t2;
        dif[i] = t2 - t1;
        cross[i] = traces.has_diff() ? 0.5 * (traces.var_sum[i] - traces.var_diff[i])
                                     : traces.var_sum[i] - traces.var1[i] - traces.var2[i];
    }
    const double m1 = detail::mean_of(traces.var1);
    const double m2 = detail::mean_of(traces.var2);
    const auto z1 = detail::harmonic(traces.var1, two1);
    const auto z2 = detail::harmonic(traces.var2, two2);
    const auto zs = detail::harmonic(cross, sum);
    const auto zd = detail::harmonic(cross, dif);
    const double amp1 = 2.0 * std::abs(z1);
    const double amp2 = 2.0 * std::abs(z2);
    const double amp_sum = 2.0 * std::abs(zs);
    const double amp_dif = 2.0 * std::abs(zd);

    constexpr double kFlat = 1e-8;
    if (amp1 <= kFlat * m1 && amp2 <= kFlat * m2 && amp_sum <= kFlat * (m1 + m2)) {
        throw Unidentifiable("fit_model: traces show no phase modulation; s is unidentifiable");
    }

    SqueezerParams p;
    const double ratio = amp_sum > 0.0 ? amp_dif / amp_sum : 0.0;
    p.s = ratio < 1.0 ? (1.0 + ratio) / (1.0 - ratio) : 10.0;
    p.s = std::clamp(p.s, 1.001, 1e3);
    const double c0 = detail::c0_of(p.s);
    const double c2 = detail::c2_of(p.s);

    p.g1 = std::max(m1 - amp1 * c0 / c2, 1e-3);
    p.g2 = std::max(m2 - amp2 * c0 / c2, 1e-3);
    p.alpha = std::clamp(amp1 / (p.g1 * c2), 1e-6, 1.0);
    p.beta = std::clamp(amp2 / (p.g2 * c2), 1e-6, 1.0);

    constexpr double kPi = std::numbers::pi;
    p.phi1 = 0.5 * std::arg(z1);
    p.phi2 = 0.5 * std::arg(z2);
    if (amp_sum > 0.0 && std::abs(detail::wrap_pi(p.phi1 + p.phi2 - std::arg(zs))) > 0.5 * kPi) {
        p.phi2 += kPi;
    }
    return detail::canonical_phases(p);
}

/// Joint least-squares fit of the trace model (uniform weights). Throws
/// Unidentifiable for flat traces and NotConverged after the iteration cap.
inline ModelFit fit_model(const VarianceTraces& traces, std::optional<SqueezerParams> init = std::nullopt,
                          const LmOptions& options = {})
{
    traces.validate();
    if (traces.size() < static_cast<std::size_t>(detail::kModelParams)) {
        throw std::invalid_argument("fit_model: need at least 7 phase pairs");
    }
    {
        std::complex<double> m1 = 0.0, m2 = 0.0;
        for (const auto& ph : traces.phases) {
            m1 += std::polar(1.0, 2.0 * ph.theta1);
            m2 += std::polar(1.0, 2.0 * ph.theta2);
        }
        const double n = static_cast<double>(traces.size());
        if (std::abs(m1) / n > 0.5 || std::abs(m2) / n > 0.5) {
            throw std::invalid_argument("fit_model: phases do not cover a full period of both channels");
        }
    }

    const SqueezerParams start = init ? *init : initial_params(traces);
    auto model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
        detail::trace_residuals(traces, x, r, j);
    };

    ModelFit fit;
    Eigen::VectorXd x0 = detail::project_params(detail::pack(start));
    {
        Eigen::VectorXd r;
        Eigen::MatrixXd j;
        model(x0, r, &j);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
        if (qr.rank() < detail::kModelParams) {
            // Rank-deficient start: polish with the simplex before handing
            // back to the derivative-based solver.
            std::array<double, 7> a0{}, scale{};
            for (int i = 0; i < 7; ++i) {
                a0[i] = x0[i];
                scale[i] = 0.05 * std::max(std::abs(x0[i]), 0.1);
            }
            auto cost = [&](const std::array<double, 7>& a) {
                Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(a.data(), 7);
                Eigen::VectorXd rr;
                model(detail::project_params(x), rr, nullptr);
                return rr.squaredNorm();
            };
            const auto nm = nelder_mead<7>(cost, a0, scale, 1e-14, 20000);
            x0 = detail::project_params(Eigen::Map<const Eigen::VectorXd>(nm.x.data(), 7));
            fit.used_simplex = true;
        }
    }

    const LmResult lm = levenberg_marquardt(model, x0, detail::project_params, options);
    if (!lm.converged) {
        throw NotConverged("fit_model: no convergence after " + std::to_string(options.max_iterations) +
                           " iterations");
    }
    fit.params = detail::canonical_phases(detail::unpack(lm.x));
    fit.iterations = lm.iterations;
    fit.n_residuals = static_cast<std::size_t>(lm.residuals.size());
    fit.residual_rms = std::sqrt(lm.cost / static_cast<double>(lm.residuals.size()));
    const Eigen::MatrixXd cov = parameter_covariance(lm.jacobian, lm.cost);
    Eigen::VectorXd se(detail::kModelParams);
    for (int i = 0; i < detail::kModelParams; ++i) se[i] = std::sqrt(cov(i, i));
    fit.std_errors = detail::unpack(se);
    return fit;
}

}  // namespace cvent
