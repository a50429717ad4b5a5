#pragma once

// Moment-based Gaussian state estimation from phase-swept quadrature
// records, per-phase-pair variance surfaces, and parametric bootstrap.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvent/gaussian_core.hpp"
#include "cvent/parallel.hpp"
#include "cvent/random.hpp"
#include "cvent/squeezer_model.hpp"
#include "cvent/synth.hpp"

namespace cvent {

/// Compensated (Kahan-Babuska-Neumaier) running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x)
    {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    void merge(const CompensatedSum& other)
    {
        add(other.sum);
        carry += other.carry;
    }
    double value() const { return sum + carry; }
};

/// Running sums of the trigonometric moments the estimator needs.
class MomentAccumulator {
  public:
    enum Moment : int {
        kW1Cos, kW1Sin, kW2Cos, kW2Sin,
        kW1SqCosCos, kW1SqSinSin, kW1SqCosSin,
        kW2SqCosCos, kW2SqSinSin, kW2SqCosSin,
        kCrossCC, kCrossCS, kCrossSC, kCrossSS,
        kMomentCount
    };

    void add(double theta1, double w1, double theta2, double w2)
    {
        const double c1 = std::cos(theta1), s1 = std::sin(theta1);
        const double c2 = std::cos(theta2), s2 = std::sin(theta2);
        const double a1 = w1 * c1, b1 = w1 * s1;
        const double a2 = w2 * c2, b2 = w2 * s2;
        sums_[kW1Cos].add(a1);
        sums_[kW1Sin].add(b1);
        sums_[kW2Cos].add(a2);
        sums_[kW2Sin].add(b2);
        sums_[kW1SqCosCos].add(a1 * a1);
        sums_[kW1SqSinSin].add(b1 * b1);
        sums_[kW1SqCosSin].add(a1 * b1);
        sums_[kW2SqCosCos].add(a2 * a2);
        sums_[kW2SqSinSin].add(b2 * b2);
        sums_[kW2SqCosSin].add(a2 * b2);
        sums_[kCrossCC].add(a1 * a2);
        sums_[kCrossCS].add(a1 * b2);
        sums_[kCrossSC].add(b1 * a2);
        sums_[kCrossSS].add(b1 * b2);

        // Phase coverage: harmonics 1..4 of each phase and 1..2 of the
        // sum and difference.
        const std::complex<double> e1(c1, s1), e2(c2, s2);
        std::complex<double> p1 = 1.0, p2 = 1.0;
        for (int k = 0; k < 4; ++k) {
            p1 *= e1;
            p2 *= e2;
            coverage_[k] += p1;
            coverage_[4 + k] += p2;
        }
        const std::complex<double> sum = e1 * e2, dif = e1 * std::conj(e2);
        coverage_[8] += sum;
        coverage_[9] += dif;
        coverage_[10] += sum * sum;
        coverage_[11] += dif * dif;
        ++count_;
    }

    /// Merges in a fixed order; merging per-record accumulators in record
    /// order defines the canonical summation order.
    void merge(const MomentAccumulator& other)
    {
        for (int i = 0; i < kMomentCount; ++i) sums_[i].merge(other.sums_[i]);
        for (std::size_t i = 0; i < coverage_.size(); ++i) coverage_[i] += other.coverage_[i];
        count_ += other.count_;
    }

    std::uint64_t count() const { return count_; }
    double mean(Moment m) const { return sums_[m].value() / static_cast<double>(count_); }

    /// Largest |mean exp(i k theta)| over the coverage harmonics; values
    /// near zero mean the phases sample the circle uniformly.
    double max_phase_bias() const
    {
        double worst = 0.0;
        for (const auto& c : coverage_) worst = std::max(worst, std::abs(c) / static_cast<double>(count_));
        return worst;
    }

    friend bool operator==(const MomentAccumulator& l, const MomentAccumulator& r)
    {
        for (int i = 0; i < kMomentCount; ++i) {
            if (l.sums_[i].sum != r.sums_[i].sum || l.sums_[i].carry != r.sums_[i].carry) return false;
        }
        return l.count_ == r.count_ && l.coverage_ == r.coverage_;
    }

  private:
    std::array<CompensatedSum, kMomentCount> sums_{};
    std::array<std::complex<double>, 12> coverage_{};
    std::uint64_t count_ = 0;
};

/// Accumulates one record's rows into a fresh accumulator.
inline MomentAccumulator accumulate_record(std::span<const double> theta1, std::span<const double> w1,
                                           std::span<const double> theta2, std::span<const double> w2)
{
    MomentAccumulator acc;
    for (std::size_t k = 0; k < w1.size(); ++k) acc.add(theta1[k], w1[k], theta2[k], w2[k]);
    return acc;
}

inline MomentAccumulator accumulate_dataset(const QuadratureDataset& data)
{
    data.check_layout();
    const std::size_t spr = data.samples_per_record();
    std::vector<MomentAccumulator> per_record(data.n_records());
    parallel_for(per_record.size(), data.config.threads, [&](std::size_t r) {
        const std::size_t off = r * spr;
        per_record[r] = accumulate_record(std::span(data.theta1).subspan(off, spr), std::span(data.w1).subspan(off, spr),
                                          std::span(data.theta2).subspan(off, spr), std::span(data.w2).subspan(off, spr));
    });
    MomentAccumulator total;
    for (const auto& acc : per_record) total.merge(acc);
    return total;
}

/// Generates and accumulates records without materializing the dataset.
/// Bit-identical to accumulate_dataset(generate_dataset(state, config)).
inline MomentAccumulator simulate_moments(const GaussianState& state, const AcquisitionConfig& config)
{
    const RecordSampler sampler(state, config);
    const std::size_t spr = config.samples_per_record;
    std::vector<MomentAccumulator> per_record(config.n_records);
    parallel_for(per_record.size(), config.threads, [&](std::size_t r) {
        std::vector<double> w1(spr), w2(spr);
        sampler.sample_record(static_cast<std::uint32_t>(r), w1, w2);
        per_record[r] = accumulate_record(sampler.theta1(), w1, sampler.theta2(), w2);
    });
    MomentAccumulator total;
    for (const auto& acc : per_record) total.merge(acc);
    return total;
}

inline constexpr double kMaxPhaseBias = 0.5;

struct StateEstimate {
    GaussianState state;
    PhysicalityCheck physicality;
};

/// Mean vector and covariance matrix from trigonometric sample means,
/// assuming phases uniform on the circle and independent of the state. No
/// physicality constraint is imposed on the result.
inline StateEstimate estimate_from_moments(const MomentAccumulator& acc)
{
    using M = MomentAccumulator;
    if (acc.count() < 2) {
        throw std::invalid_argument("estimate_state: need at least 2 samples");
    }
    if (acc.max_phase_bias() > kMaxPhaseBias) {
        throw std::invalid_argument("estimate_state: degenerate phase coverage (phase moment bias " +
                                    std::to_string(acc.max_phase_bias()) + ")");
    }
    const Vec4 mu(2.0 * acc.mean(M::kW1Cos), 2.0 * acc.mean(M::kW1Sin), 2.0 * acc.mean(M::kW2Cos),
                  2.0 * acc.mean(M::kW2Sin));
    Mat4 sigma;
    auto single = [&](int i, M::Moment cc, M::Moment ss, M::Moment cs) {
        const double mx = mu[i], my = mu[i + 1];
        sigma(i, i) = 3.0 * acc.mean(cc) - acc.mean(ss) - mx * mx;
        sigma(i + 1, i + 1) = 3.0 * acc.mean(ss) - acc.mean(cc) - my * my;
        sigma(i, i + 1) = sigma(i + 1, i) = 4.0 * acc.mean(cs) - mx * my;
    };
    single(0, M::kW1SqCosCos, M::kW1SqSinSin, M::kW1SqCosSin);
    single(2, M::kW2SqCosCos, M::kW2SqSinSin, M::kW2SqCosSin);
    sigma(0, 2) = sigma(2, 0) = 4.0 * acc.mean(M::kCrossCC) - mu[0] * mu[2];
    sigma(0, 3) = sigma(3, 0) = 4.0 * acc.mean(M::kCrossCS) - mu[0] * mu[3];
    sigma(1, 2) = sigma(2, 1) = 4.0 * acc.mean(M::kCrossSC) - mu[1] * mu[2];
    sigma(1, 3) = sigma(3, 1) = 4.0 * acc.mean(M::kCrossSS) - mu[1] * mu[3];
    GaussianState state(mu, sigma);
    return {state, check_physicality(state.sigma())};
}

inline StateEstimate estimate_state(const QuadratureDataset& data)
{
    if (data.size() < 2) {
        throw std::invalid_argument("estimate_state: dataset is empty or has a single row");
    }
    return estimate_from_moments(accumulate_dataset(data));
}

// ---------------------------------------------------------------------------
// Per-phase-pair variances
// ---------------------------------------------------------------------------

enum class JointConvention {
    kHalfSum,        ///< (1/2) Var(W1 + W2), vacuum 1/2
    kUnitNormalized  ///< (1/2) Var(U1 + U2) with vacuum-normalized U, vacuum 1
};

struct VarianceBin {
    std::uint32_t sample = 0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double var_w1 = 0.0;
    double var_w2 = 0.0;
    double var_plus = 0.0;   ///< Var(W1 + W2)
    double var_minus = 0.0;  ///< Var(W1 - W2)
    std::uint32_t count = 0;
};

struct BinnedVariances {
    std::vector<VarianceBin> bins;  ///< ordered by sample index
    JointConvention convention = JointConvention::kHalfSum;

    double joint(const VarianceBin& b) const
    {
        // U = W / sqrt(1/2) at unit gain, so (1/2) Var(U1 + U2) = Var(W1 + W2).
        return convention == JointConvention::kHalfSum ? 0.5 * b.var_plus : b.var_plus;
    }
};

namespace detail {
struct Welford {
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x, double n)
    {
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
};
}  // namespace detail

/// Unbiased sample variances across records at every sample index.
inline BinnedVariances bin_variances(const QuadratureDataset& data,
                                     JointConvention convention = JointConvention::kHalfSum)
{
    data.check_layout();
    const std::uint32_t spr = data.samples_per_record();
    const std::uint32_t records = data.n_records();
    if (records < 2) {
        throw std::invalid_argument("bin_variances: need at least 2 records");
    }
    std::vector<std::array<detail::Welford, 4>> acc(spr);
    for (std::uint32_t r = 0; r < records; ++r) {
        const double n = static_cast<double>(r + 1);
        const std::size_t off = std::size_t{r} * spr;
        for (std::uint32_t k = 0; k < spr; ++k) {
            const std::size_t i = off + k;
            if (std::abs(data.theta1[i] - data.theta1[k]) > 1e-9 || std::abs(data.theta2[i] - data.theta2[k]) > 1e-9) {
                throw std::invalid_argument("bin_variances: record " + std::to_string(r) +
                                            " does not repeat the phase schedule at sample " + std::to_string(k));
            }
            const double a = data.w1[i], b = data.w2[i];
            acc[k][0].add(a, n);
            acc[k][1].add(b, n);
            acc[k][2].add(a + b, n);
            acc[k][3].add(a - b, n);
        }
    }
    BinnedVariances out;
    out.convention = convention;
    out.bins.resize(spr);
    const double dof = static_cast<double>(records - 1);
    for (std::uint32_t k = 0; k < spr; ++k) {
        auto& bin = out.bins[k];
        bin.sample = k;
        bin.theta1 = data.theta1[k];
        bin.theta2 = data.theta2[k];
        bin.var_w1 = acc[k][0].m2 / dof;
        bin.var_w2 = acc[k][1].m2 / dof;
        bin.var_plus = acc[k][2].m2 / dof;
        bin.var_minus = acc[k][3].m2 / dof;
        bin.count = records;
    }
    return out;
}

/// Converts binned W variances to vacuum-normalized traces for the model
/// fit, Var(U) = Var(W) / sigma_in (unit gain ratio assumed; the fit
/// recovers g). Phases are shifted to the trace model's origin.
inline VarianceTraces to_variance_traces(const BinnedVariances& binned, double sigma_in = kVacuumVariance)
{
    VarianceTraces t;
    const double scale = 1.0 / sigma_in;
    for (const auto& b : binned.bins) {
        t.phases.push_back({b.theta1 - kTracePhaseOffset, b.theta2 - kTracePhaseOffset});
        t.var1.push_back(b.var_w1 * scale);
        t.var2.push_back(b.var_w2 * scale);
        t.var_sum.push_back(b.var_plus * scale);
        t.var_diff.push_back(b.var_minus * scale);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Parametric bootstrap and repeated trials
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kBootstrapStream = 0x626f6f74;  // "boot"
inline constexpr std::uint64_t kTrialStream = 0x7472696c;      // "tril"

struct PipelineQuantities {
    double e_w;
    double negativity;
    double delta_epr;
    bool physical;
};

inline PipelineQuantities analyze_estimate(const StateEstimate& est)
{
    const WitnessResult w = entanglement_witness(est.state.sigma());
    const NegativityResult n = negativity(est.state.sigma());
    return {w.e_w, n.negativity, w.delta_epr, est.physicality.physical};
}

/// Sample standard deviation (divisor n - 1); empty for fewer than 2 values.
inline std::optional<double> sample_std(const std::vector<double>& v)
{
    if (v.size() < 2) return std::nullopt;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double sample_mean(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) mean += x;
    return v.empty() ? 0.0 : mean / static_cast<double>(v.size());
}

struct BootstrapReport {
    std::uint32_t replicates = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> e_w;
    std::vector<double> negativity;
    std::vector<double> delta_epr;
    std::uint32_t unphysical_replicates = 0;
    double std_e_w = 0.0;
    double std_negativity = 0.0;
    double std_delta_epr = 0.0;
};

/// Relative slack on the Heisenberg bound accepted when resimulating from an
/// estimated state; finite-n estimates of near-pure states fall slightly
/// below nu1 = 1/2.
inline constexpr double kSamplingTolerance = 0.01;

namespace detail {
inline void require_sampleable(const GaussianState& state, const char* who)
{
    const PhysicalityCheck phys = check_physicality(state.sigma());
    const Eigen::SelfAdjointEigenSolver<Mat4> eig(state.sigma(), Eigen::EigenvaluesOnly);
    const bool positive = eig.eigenvalues().minCoeff() > 0.0;
    if (!positive || !(phys.min_nu >= kVacuumVariance * (1.0 - kSamplingTolerance))) {
        throw std::domain_error(std::string(who) + ": state is unphysical (min symplectic eigenvalue " +
                                std::to_string(phys.min_nu) + "); cannot resimulate from it");
    }
}
}  // namespace detail

/// Resimulates `replicates` datasets from `state` with seeds derived from
/// config.seed and reports the spread of the re-estimated quantities.
inline BootstrapReport parametric_bootstrap(const GaussianState& state, const AcquisitionConfig& config,
                                            std::uint32_t replicates = 20)
{
    detail::require_sampleable(state, "parametric_bootstrap");
    if (replicates < 2) throw std::invalid_argument("parametric_bootstrap: need at least 2 replicates");
    config.validate();

    BootstrapReport report;
    report.replicates = replicates;
    report.base_seed = config.seed;
    for (std::uint32_t i = 0; i < replicates; ++i) {
        AcquisitionConfig cfg = config;
        cfg.seed = derive_seed(config.seed, i, kBootstrapStream);
        const PipelineQuantities q = analyze_estimate(estimate_from_moments(simulate_moments(state, cfg)));
        report.e_w.push_back(q.e_w);
        report.negativity.push_back(q.negativity);
        report.delta_epr.push_back(q.delta_epr);
        if (!q.physical) ++report.unphysical_replicates;
    }
    report.std_e_w = *sample_std(report.e_w);
    report.std_negativity = *sample_std(report.negativity);
    report.std_delta_epr = *sample_std(report.delta_epr);
    return report;
}

struct TrialSummary {
    std::uint32_t trials = 0;
    std::vector<double> e_w;
    std::vector<double> negativity;
    double mean_e_w = 0.0;
    double mean_negativity = 0.0;
    std::optional<double> std_e_w;  ///< absent for a single trial
    std::optional<double> std_negativity;
};

/// Independent full simulate-estimate-analyze runs.
inline TrialSummary repeatability_trials(const GaussianState& state, const AcquisitionConfig& config,
                                         std::uint32_t trials)
{
    detail::require_sampleable(state, "repeatability_trials");
    if (trials < 1) throw std::invalid_argument("repeatability_trials: need at least 1 trial");
    config.validate();

    TrialSummary out;
    out.trials = trials;
    for (std::uint32_t i = 0; i < trials; ++i) {
        AcquisitionConfig cfg = config;
        cfg.seed = derive_seed(config.seed, i, kTrialStream);
        const PipelineQuantities q = analyze_estimate(estimate_from_moments(simulate_moments(state, cfg)));
        out.e_w.push_back(q.e_w);
        out.negativity.push_back(q.negativity);
    }
    out.mean_e_w = sample_mean(out.e_w);
    out.mean_negativity = sample_mean(out.negativity);
    out.std_e_w = sample_std(out.e_w);
    out.std_negativity = sample_std(out.negativity);
    return out;
}

}  // namespace cvent
