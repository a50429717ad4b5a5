#pragma once

// Seeded synthesis of dual-channel quadrature records following the
// detuned-pump phase sweep: both phases advance linearly within a record and
// every record repeats the same phase sequence.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cvent/gaussian_core.hpp"
#include "cvent/parallel.hpp"
#include "cvent/random.hpp"

namespace cvent {

struct AcquisitionConfig {
    double sample_interval = 1e-7;  ///< seconds (10 MHz sampling)
    double detune1 = 1e3;           ///< Hz, channel-1 phase rotation rate
    double detune2 = 5e4;           ///< Hz, channel-2 phase rotation rate
    std::uint32_t samples_per_record = 10000;
    std::uint32_t n_records = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 0;  ///< 0 = hardware concurrency; never affects results

    /// Whole phase periods per record for a detuning; throws unless integral.
    std::uint64_t periods_per_record(double detune) const
    {
        const double periods = samples_per_record * sample_interval * detune;
        const double rounded = std::round(periods);
        if (!(rounded >= 1.0) || std::abs(periods - rounded) > 1e-6 * std::max(1.0, rounded)) {
            throw std::invalid_argument("AcquisitionConfig: a record must span a whole number (>= 1) of "
                                        "phase periods; got " + std::to_string(periods));
        }
        return static_cast<std::uint64_t>(rounded);
    }

    void validate() const
    {
        if (!(sample_interval > 0.0)) throw std::invalid_argument("AcquisitionConfig: sample_interval must be positive");
        if (samples_per_record == 0 || n_records == 0) {
            throw std::invalid_argument("AcquisitionConfig: records and samples must be nonzero");
        }
        periods_per_record(detune1);
        periods_per_record(detune2);
    }

    std::size_t total_samples() const { return std::size_t{n_records} * samples_per_record; }
};

/// theta_i = 2 pi detune_i k dt (mod 2 pi), evaluated exactly as
/// 2 pi ((P_i k) mod n) / n with P_i whole periods per n-sample record.
inline std::pair<double, double> phase_schedule(const AcquisitionConfig& config, std::uint32_t sample_index)
{
    if (sample_index >= config.samples_per_record) {
        throw std::out_of_range("phase_schedule: sample index " + std::to_string(sample_index) +
                                " outside record of " + std::to_string(config.samples_per_record));
    }
    const std::uint64_t n = config.samples_per_record;
    const std::uint64_t p1 = config.periods_per_record(config.detune1);
    const std::uint64_t p2 = config.periods_per_record(config.detune2);
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    return {kTwoPi * static_cast<double>((p1 * sample_index) % n) / static_cast<double>(n),
            kTwoPi * static_cast<double>((p2 * sample_index) % n) / static_cast<double>(n)};
}

/// Mean and symmetric square root of the projected 2x2 covariance of
/// (W1(theta1), W2(theta2)).
struct ProjectedSampler {
    double mean1 = 0.0, mean2 = 0.0;
    double r11 = 0.0, r12 = 0.0, r22 = 0.0;

    ProjectedSampler() = default;
    ProjectedSampler(const GaussianState& state, double theta1, double theta2)
    {
        const Vec4 u1(std::cos(theta1), std::sin(theta1), 0.0, 0.0);
        const Vec4 u2(0.0, 0.0, std::cos(theta2), std::sin(theta2));
        mean1 = u1.dot(state.mu());
        mean2 = u2.dot(state.mu());
        const QuadratureMoments m = quadrature_variance(state.sigma(), theta1, theta2);
        const double trace = m.var1 + m.var2;
        const double spread = std::hypot(m.var1 - m.var2, 2.0 * m.cov);
        if (0.5 * (trace - spread) < -1e-12) {
            throw std::domain_error("sample_pair: projected covariance is not positive semidefinite at (" +
                                    std::to_string(theta1) + ", " + std::to_string(theta2) + ")");
        }
        // sqrt(C) = (C + sqrt(det C) I) / sqrt(tr C + 2 sqrt(det C))
        const double root_det = std::sqrt(std::max(0.0, m.var1 * m.var2 - m.cov * m.cov));
        const double norm2 = trace + 2.0 * root_det;
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            r11 = (m.var1 + root_det) * inv;
            r22 = (m.var2 + root_det) * inv;
            r12 = m.cov * inv;
        }
    }

    std::pair<double, double> operator()(std::pair<double, double> z) const
    {
        return {mean1 + r11 * z.first + r12 * z.second, mean2 + r12 * z.first + r22 * z.second};
    }
};

/// One bivariate-normal draw of (W1(theta1), W2(theta2)) from a pair of
/// independent standard normals.
inline std::pair<double, double> sample_pair(const GaussianState& state, double theta1, double theta2,
                                             std::pair<double, double> standard_normals)
{
    return ProjectedSampler(state, theta1, theta2)(standard_normals);
}

inline std::pair<double, double> sample_pair(const GaussianState& state, double theta1, double theta2,
                                             const CounterRng& rng, std::uint32_t record, std::uint32_t sample)
{
    return sample_pair(state, theta1, theta2, rng.normal_pair(record, sample));
}

/// Per-sample-index sampling table shared by every record.
class RecordSampler {
  public:
    RecordSampler(const GaussianState& state, const AcquisitionConfig& config) : config_(config), rng_(config.seed)
    {
        config_.validate();
        theta1_.resize(config_.samples_per_record);
        theta2_.resize(config_.samples_per_record);
        table_.resize(config_.samples_per_record);
        for (std::uint32_t k = 0; k < config_.samples_per_record; ++k) {
            const auto [t1, t2] = phase_schedule(config_, k);
            theta1_[k] = t1;
            theta2_[k] = t2;
            table_[k] = ProjectedSampler(state, t1, t2);
        }
    }

    const AcquisitionConfig& config() const { return config_; }
    std::span<const double> theta1() const { return theta1_; }
    std::span<const double> theta2() const { return theta2_; }

    /// Fills one record; w1 and w2 must hold samples_per_record values.
    void sample_record(std::uint32_t record, std::span<double> w1, std::span<double> w2) const
    {
        for (std::uint32_t k = 0; k < config_.samples_per_record; ++k) {
            const auto [a, b] = table_[k](rng_.normal_pair(record, k));
            w1[k] = a;
            w2[k] = b;
        }
    }

  private:
    AcquisitionConfig config_;
    CounterRng rng_;
    std::vector<double> theta1_, theta2_;
    std::vector<ProjectedSampler> table_;
};

/// Quadruplets (theta1, w1, theta2, w2) in record-major order: row i belongs
/// to record i / samples_per_record and sample i % samples_per_record.
struct QuadratureDataset {
    AcquisitionConfig config;
    std::vector<double> theta1;
    std::vector<double> w1;
    std::vector<double> theta2;
    std::vector<double> w2;

    std::size_t size() const { return w1.size(); }
    std::uint32_t samples_per_record() const { return config.samples_per_record; }
    std::uint32_t n_records() const { return config.n_records; }

    void resize(std::size_t n)
    {
        theta1.resize(n);
        w1.resize(n);
        theta2.resize(n);
        w2.resize(n);
    }

    void check_layout() const
    {
        if (theta1.size() != size() || theta2.size() != size() || w2.size() != size()) {
            throw std::invalid_argument("QuadratureDataset: column lengths differ");
        }
        if (size() != config.total_samples()) {
            throw std::invalid_argument("QuadratureDataset: row count does not equal records x samples");
        }
    }
};

inline QuadratureDataset generate_dataset(const GaussianState& state, const AcquisitionConfig& config)
{
    const RecordSampler sampler(state, config);
    const std::size_t spr = config.samples_per_record;
    QuadratureDataset out;
    out.config = config;
    out.resize(config.total_samples());
    parallel_for(config.n_records, config.threads, [&](std::size_t r) {
        const std::size_t offset = r * spr;
        std::copy(sampler.theta1().begin(), sampler.theta1().end(), out.theta1.begin() + offset);
        std::copy(sampler.theta2().begin(), sampler.theta2().end(), out.theta2.begin() + offset);
        sampler.sample_record(static_cast<std::uint32_t>(r), std::span(out.w1).subspan(offset, spr),
                              std::span(out.w2).subspan(offset, spr));
    });
    return out;
}

}  // namespace cvent
