#pragma once

// Thermal-sweep calibration of the two measurement chains and conversion of
// raw digitizer samples to quadratures in vacuum units.
//
// Raw variance model for a chain at fridge temperature T_F:
//   Var(V) = G [ (1/2) coth(h f_s / (2 k_B T_in)) + A0 + A2 T_F^2 ],
//   T_in = sqrt(T_F^2 + T_e^2).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvent/errors.hpp"
#include "cvent/gaussian_core.hpp"
#include "cvent/least_squares.hpp"
#include "cvent/minimize.hpp"

namespace cvent {

inline constexpr double kPlanck = 6.62607015e-34;    // J s
inline constexpr double kBoltzmann = 1.380649e-23;   // J / K
inline constexpr double kSignalFrequency = 6.327e9;  // Hz
/// Below this input temperature the thermal variance is treated as vacuum.
inline constexpr double kVacuumLikeTemperature = 29.7e-3;  // K

inline double input_temperature(double t_fridge, double t_e) { return std::hypot(t_fridge, t_e); }

/// (1/2) coth(h f / (2 k_B T)); exactly 1/2 at T = 0.
inline double thermal_input_variance(double t_in, double f_s = kSignalFrequency)
{
    if (!(t_in > 0.0)) return kVacuumVariance;
    const double x = kPlanck * f_s / (2.0 * kBoltzmann * t_in);
    return x > 40.0 ? kVacuumVariance : 0.5 / std::tanh(x);
}

/// Input variance sigma used for calibration: 1/2 below the vacuum-like
/// temperature unless `exact` asks for the coth value.
inline double calibration_sigma(double t_in, bool exact = false, double f_s = kSignalFrequency)
{
    if (!exact && t_in < kVacuumLikeTemperature) return kVacuumVariance;
    return thermal_input_variance(t_in, f_s);
}

struct ChannelNoise {
    double gain = 1.0;  ///< digitizer units per vacuum unit
    double a0 = 0.0;    ///< added noise, vacuum units
    double a2 = 0.0;    ///< vacuum units per K^2
};

struct ThermalCalibration {
    std::vector<ChannelNoise> channels;
    double t_e = 0.0;  ///< K, excess termination temperature (shared)
    double f_s = kSignalFrequency;
    std::optional<double> t_e_upper_bound;  ///< K, one-sided 95%; absent if unbounded

    void validate() const
    {
        if (channels.empty()) throw std::invalid_argument("ThermalCalibration: no channels");
        for (const auto& c : channels) {
            if (!(c.gain > 0.0)) throw std::invalid_argument("ThermalCalibration: gain must be positive");
            if (!(c.a0 >= 0.0)) throw std::invalid_argument("ThermalCalibration: a0 must be non-negative");
        }
        if (!(t_e >= 0.0)) throw std::invalid_argument("ThermalCalibration: t_e must be non-negative");
        if (!(f_s > 0.0)) throw std::invalid_argument("ThermalCalibration: f_s must be positive");
    }
};

inline double thermal_model(double t_fridge, const ChannelNoise& channel, double t_e, double f_s = kSignalFrequency)
{
    if (!(t_fridge > 0.0)) throw std::invalid_argument("thermal_model: temperature must be positive");
    const double t_in = input_temperature(t_fridge, t_e);
    return channel.gain * (thermal_input_variance(t_in, f_s) + channel.a0 + channel.a2 * t_fridge * t_fridge);
}

inline double thermal_model(double t_fridge, const ThermalCalibration& calib, std::size_t channel)
{
    return thermal_model(t_fridge, calib.channels.at(channel), calib.t_e, calib.f_s);
}

struct ThermalSweepPoint {
    std::uint32_t channel = 0;  ///< channel id; fit orders channels by id
    double t_fridge = 0.0;      ///< K
    double var_raw = 0.0;       ///< digitizer units
    std::uint32_t repeat_index = 0;
};

struct ThermalFit {
    ThermalCalibration calibration;
    std::vector<std::uint32_t> channel_ids;  ///< id of calibration.channels[i]
    std::vector<ChannelNoise> std_errors;
    double t_e_std_error = std::numeric_limits<double>::quiet_NaN();
    double rss = 0.0;  ///< sum of squared relative residuals
    std::size_t dof = 0;
    std::vector<double> residuals;  ///< (model - data) / data, input order
};

namespace detail {

struct SweepChannel {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<std::size_t> index;  // position in the input sweep
};

/// Best (G, G A0, G A2) for fixed t_e by linear least squares on relative
/// residuals; returns the residual sum of squares.
inline double profile_channel(const SweepChannel& ch, double t_e, double f_s, Eigen::Vector3d* coef)
{
    const auto n = static_cast<Eigen::Index>(ch.t.size());
    Eigen::MatrixXd design(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double inv = 1.0 / ch.y[i];
        design(i, 0) = thermal_input_variance(input_temperature(ch.t[i], t_e), f_s) * inv;
        design(i, 1) = inv;
        design(i, 2) = ch.t[i] * ch.t[i] * inv;
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::Vector3d c = design.colPivHouseholderQr().solve(ones);
    if (coef) *coef = c;
    return (design * c - ones).squaredNorm();
}

}  // namespace detail

/// Fits (G, A0, A2) per channel and a shared T_e. Throws Unidentifiable
/// when the sweep lacks temperature leverage.
inline ThermalFit fit_thermal(std::span<const ThermalSweepPoint> sweep, double f_s = kSignalFrequency)
{
    std::map<std::uint32_t, detail::SweepChannel> by_channel;
    double t_max = 0.0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const auto& p = sweep[i];
        if (!(p.t_fridge > 0.0) || !(p.var_raw > 0.0)) {
            throw std::invalid_argument("fit_thermal: temperatures and variances must be positive");
        }
        auto& ch = by_channel[p.channel];
        ch.t.push_back(p.t_fridge);
        ch.y.push_back(p.var_raw);
        ch.index.push_back(i);
        t_max = std::max(t_max, p.t_fridge);
    }
    if (by_channel.empty()) throw std::invalid_argument("fit_thermal: empty sweep");

    for (const auto& [id, ch] : by_channel) {
        const std::set<double> distinct(ch.t.begin(), ch.t.end());
        if (distinct.size() < 5) {
            throw Unidentifiable("fit_thermal: channel " + std::to_string(id) + " needs >= 5 distinct temperatures");
        }
        // x = h f / (2 k T): coth(x) is flat for x >> 1 and classical for x << 1.
        const double x_cold = kPlanck * f_s / (2.0 * kBoltzmann * *distinct.begin());
        const double x_hot = kPlanck * f_s / (2.0 * kBoltzmann * *distinct.rbegin());
        if (x_cold < 1.0 || x_hot > 2.0) {
            throw Unidentifiable("fit_thermal: channel " + std::to_string(id) +
                                 " sweep lacks temperature leverage (needs points on both sides of h f/(2 k_B))");
        }
    }

    auto profile = [&](double t_e) {
        double rss = 0.0;
        for (const auto& [id, ch] : by_channel) rss += detail::profile_channel(ch, t_e, f_s, nullptr);
        return rss;
    };

    constexpr int kGrid = 400;
    const double step = t_max / kGrid;
    int best_i = 0;
    double best = profile(0.0);
    for (int i = 1; i <= kGrid; ++i) {
        const double v = profile(i * step);
        if (v < best) {
            best = v;
            best_i = i;
        }
    }
    const auto refined = golden_section(profile, std::max(0.0, (best_i - 1) * step), (best_i + 1) * step, 1e-15);
    double t_e = refined.f < best ? refined.x : best_i * step;

    // Polish all parameters jointly; also supplies the Jacobian for errors.
    const std::size_t nch = by_channel.size();
    const auto npar = static_cast<Eigen::Index>(3 * nch + 1);
    Eigen::VectorXd x0(npar);
    {
        std::size_t c = 0;
        for (const auto& [id, ch] : by_channel) {
            Eigen::Vector3d coef;
            detail::profile_channel(ch, t_e, f_s, &coef);
            x0[3 * c] = coef[0];
            x0[3 * c + 1] = coef[1] / coef[0];
            x0[3 * c + 2] = coef[2] / coef[0];
            ++c;
        }
        x0[npar - 1] = t_e;
    }
    auto model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(static_cast<Eigen::Index>(sweep.size()));
        if (jac) jac->setZero(r.size(), npar);
        const double te = x[npar - 1];
        std::size_t c = 0;
        for (const auto& [id, ch] : by_channel) {
            const double g = x[3 * c], a0 = x[3 * c + 1], a2 = x[3 * c + 2];
            for (std::size_t i = 0; i < ch.t.size(); ++i) {
                const double tf = ch.t[i];
                const double t_in = input_temperature(tf, te);
                const double sig = thermal_input_variance(t_in, f_s);
                const double inv = 1.0 / ch.y[i];
                const auto row = static_cast<Eigen::Index>(ch.index[i]);
                r[row] = g * (sig + a0 + a2 * tf * tf) * inv - 1.0;
                if (!jac) continue;
                (*jac)(row, 3 * c) = (sig + a0 + a2 * tf * tf) * inv;
                (*jac)(row, 3 * c + 1) = g * inv;
                (*jac)(row, 3 * c + 2) = g * tf * tf * inv;
                // d/dTe of (1/2) coth(x), x = h f / (2 k T_in)
                const double xx = kPlanck * f_s / (2.0 * kBoltzmann * t_in);
                const double sh = std::sinh(xx);
                const double dsig = xx > 40.0 ? 0.0 : 0.5 / (sh * sh) * xx / t_in * (te / t_in);
                (*jac)(row, npar - 1) = g * dsig * inv;
            }
            ++c;
        }
    };
    auto project = [&](Eigen::VectorXd x) {
        for (std::size_t c = 0; c < nch; ++c) {
            x[3 * c] = std::max(x[3 * c], 1e-300);
            x[3 * c + 1] = std::max(x[3 * c + 1], 0.0);
        }
        x[npar - 1] = std::abs(x[npar - 1]);
        return x;
    };
    const LmResult lm = levenberg_marquardt(model, x0, project);

    ThermalFit fit;
    fit.rss = lm.cost;
    fit.dof = sweep.size() > static_cast<std::size_t>(npar) ? sweep.size() - static_cast<std::size_t>(npar) : 1;
    fit.residuals.assign(lm.residuals.data(), lm.residuals.data() + lm.residuals.size());
    fit.calibration.f_s = f_s;
    fit.calibration.t_e = lm.x[npar - 1];
    const Eigen::MatrixXd cov = parameter_covariance(lm.jacobian, lm.cost);
    {
        std::size_t c = 0;
        for (const auto& [id, ch] : by_channel) {
            fit.channel_ids.push_back(id);
            fit.calibration.channels.push_back({lm.x[3 * c], lm.x[3 * c + 1], lm.x[3 * c + 2]});
            const auto k = static_cast<Eigen::Index>(3 * c);
            fit.std_errors.push_back({std::sqrt(cov(k, k)), std::sqrt(cov(k + 1, k + 1)), std::sqrt(cov(k + 2, k + 2))});
            ++c;
        }
    }
    fit.t_e_std_error = std::sqrt(cov(npar - 1, npar - 1));

    // One-sided 95% profile bound on T_e.
    const double rss_min = std::min(lm.cost, profile(fit.calibration.t_e));
    const double threshold = rss_min + 2.706 * rss_min / static_cast<double>(fit.dof);
    const double fine = t_max / 4000.0;
    double lo = fit.calibration.t_e;
    std::optional<double> upper;
    for (double te = lo + fine; te <= 10.0 * t_max; te += fine) {
        if (profile(te) > threshold) {
            double a = lo, b = te;
            for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                const double mid = 0.5 * (a + b);
                (profile(mid) > threshold ? b : a) = mid;
            }
            upper = b;
            break;
        }
        lo = te;
    }
    fit.calibration.t_e_upper_bound = upper;
    return fit;
}

struct CalibratedQuadratures {
    std::vector<double> w1;
    std::vector<double> w2;
    double var_off1 = 0.0;
    double var_off2 = 0.0;
    double g1 = 1.0;
    double g2 = 1.0;
    double sigma = kVacuumVariance;
};

inline double unbiased_variance(std::span<const double> v)
{
    if (v.size() < 2) throw std::invalid_argument("variance needs at least 2 samples");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

/// U_i = V_i,on / sqrt(Var V_i,off) (off-state variance = one input unit),
/// then W_i = U_i sqrt(sigma / g_i), so Var(W) = sigma Var(U) / g.
inline CalibratedQuadratures normalize_and_calibrate(std::span<const double> v1_on, std::span<const double> v2_on,
                                                     std::span<const double> v1_off, std::span<const double> v2_off,
                                                     double g1, double g2, double sigma_in = kVacuumVariance)
{
    if (!(g1 > 0.0) || !(g2 > 0.0)) throw std::invalid_argument("normalize_and_calibrate: gains must be positive");
    if (!(sigma_in >= kVacuumVariance)) {
        throw std::invalid_argument("normalize_and_calibrate: input variance must be at least 1/2");
    }
    if (v1_on.size() != v2_on.size()) throw std::invalid_argument("normalize_and_calibrate: channel lengths differ");
    CalibratedQuadratures out;
    out.var_off1 = unbiased_variance(v1_off);
    out.var_off2 = unbiased_variance(v2_off);
    if (!(out.var_off1 > 0.0) || !(out.var_off2 > 0.0)) {
        throw std::invalid_argument("normalize_and_calibrate: off-state variance is zero");
    }
    out.g1 = g1;
    out.g2 = g2;
    out.sigma = sigma_in;
    const double k1 = std::sqrt(sigma_in / (g1 * out.var_off1));
    const double k2 = std::sqrt(sigma_in / (g2 * out.var_off2));
    out.w1.reserve(v1_on.size());
    out.w2.reserve(v2_on.size());
    for (double v : v1_on) out.w1.push_back(v * k1);
    for (double v : v2_on) out.w2.push_back(v * k2);
    return out;
}

}  // namespace cvent
