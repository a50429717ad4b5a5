#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cvent/estimator.hpp"
#include "cvent/squeezer_model.hpp"

using namespace cvent;

namespace {

constexpr double kPi = std::numbers::pi;

GaussianState headline_state() { return predict_covariance({5.41, 0.1304, 0.202, 0.0, 0.0, 1.0, 1.0}); }

AcquisitionConfig config_1000(std::uint32_t records, std::uint64_t seed, unsigned threads = 1)
{
    AcquisitionConfig c;
    c.samples_per_record = 1000;
    c.n_records = records;
    c.detune1 = 1e4;  // 1 period per record
    c.detune2 = 5e5;  // 50 periods
    c.seed = seed;
    c.threads = threads;
    return c;
}

// Each record is one fixed phase-space point read out on an 8 x 8 product
// grid of phases.
QuadratureDataset cloud_dataset(const std::vector<Vec4>& cloud)
{
    QuadratureDataset d;
    d.config.samples_per_record = 64;
    d.config.n_records = static_cast<std::uint32_t>(cloud.size());
    d.resize(d.config.total_samples());
    for (std::size_t r = 0; r < cloud.size(); ++r) {
        for (int k = 0; k < 64; ++k) {
            const double t1 = 2 * kPi * (k % 8) / 8.0, t2 = 2 * kPi * (k / 8) / 8.0;
            const std::size_t i = r * 64 + k;
            d.theta1[i] = t1;
            d.theta2[i] = t2;
            d.w1[i] = cloud[r][0] * std::cos(t1) + cloud[r][1] * std::sin(t1);
            d.w2[i] = cloud[r][2] * std::cos(t2) + cloud[r][3] * std::sin(t2);
        }
    }
    return d;
}

}  // namespace

TEST(CompensatedSum, RecoversCancelledLowOrderTerms)
{
    CompensatedSum s;
    double naive = 1.0;
    s.add(1.0);
    for (int i = 0; i < 1000; ++i) {
        s.add(1e-16);
        naive += 1e-16;
    }
    s.add(-1.0);
    naive -= 1.0;
    EXPECT_NEAR(s.value(), 1e-13, 1e-12 * 1e-13);
    EXPECT_GT(std::abs(naive - 1e-13), 1e-2 * 1e-13);
}

TEST(Estimate, ExactOnPhaseGridPointCloud)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec4> cloud(7);
    for (auto& p : cloud) p = Vec4(n(rng), n(rng), n(rng), n(rng)) + Vec4(0.3, -0.1, 0.2, 0.4);
    Vec4 mean = Vec4::Zero();
    for (const auto& p : cloud) mean += p;
    mean /= 7.0;
    Mat4 cov = Mat4::Zero();
    for (const auto& p : cloud) cov += (p - mean) * (p - mean).transpose();
    cov /= 7.0;  // population covariance: the estimator uses 1/N means

    const StateEstimate est = estimate_state(cloud_dataset(cloud));
    EXPECT_LT((est.state.mu() - mean).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((est.state.sigma() - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Estimate, AllZeroDataGivesZeroMatrix)
{
    QuadratureDataset d = cloud_dataset(std::vector<Vec4>(3, Vec4::Zero()));
    const StateEstimate est = estimate_state(d);
    EXPECT_TRUE(est.state.sigma().isZero());
    EXPECT_TRUE(est.state.mu().isZero());
    EXPECT_FALSE(est.physicality.physical);
}

TEST(Estimate, VacuumWithinSamplingError)
{
    const auto est = estimate_state(generate_dataset(vacuum_state(), config_1000(200, 3)));
    EXPECT_LT((est.state.sigma() - vacuum_state().sigma()).cwiseAbs().maxCoeff(), 0.02);
    EXPECT_LT(est.state.mu().cwiseAbs().maxCoeff(), 0.02);
}

TEST(Estimate, HeadlineStateWithinSamplingError)
{
    const GaussianState truth = headline_state();
    const auto est = estimate_from_moments(simulate_moments(truth, config_1000(400, 12, 0)));
    EXPECT_LT((est.state.sigma() - truth.sigma()).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Estimate, RejectsDegenerateCoverage)
{
    QuadratureDataset d = cloud_dataset(std::vector<Vec4>(3, Vec4(1, 0, 1, 0)));
    for (auto& t : d.theta1) t = 0.4;
    EXPECT_THROW(estimate_state(d), std::invalid_argument);
    QuadratureDataset one;
    one.config.samples_per_record = 1;
    one.config.n_records = 1;
    one.resize(1);
    EXPECT_THROW(estimate_state(one), std::invalid_argument);
}

TEST(Estimate, StreamingMatchesMaterializedBitForBit)
{
    const auto cfg = config_1000(37, 101);
    const MomentAccumulator streamed = simulate_moments(headline_state(), cfg);
    const MomentAccumulator batch = accumulate_dataset(generate_dataset(headline_state(), cfg));
    EXPECT_TRUE(streamed == batch);
}

TEST(Estimate, IndependentOfThreadCount)
{
    const auto ref = estimate_from_moments(simulate_moments(headline_state(), config_1000(53, 5, 1)));
    for (unsigned t : {2u, 5u, 16u}) {
        const auto est = estimate_from_moments(simulate_moments(headline_state(), config_1000(53, 5, t)));
        EXPECT_EQ(ref.state.sigma(), est.state.sigma()) << t;
        EXPECT_EQ(ref.state.mu(), est.state.mu()) << t;
    }
}

TEST(BinVariances, MatchesDirectComputation)
{
    const auto d = generate_dataset(headline_state(), config_1000(5, 2));
    const auto binned = bin_variances(d);
    ASSERT_EQ(binned.bins.size(), 1000u);
    for (std::uint32_t k : {0u, 250u, 999u}) {
        double m = 0, mp = 0;
        for (int r = 0; r < 5; ++r) {
            m += d.w1[r * 1000 + k];
            mp += d.w1[r * 1000 + k] + d.w2[r * 1000 + k];
        }
        m /= 5;
        mp /= 5;
        double v = 0, vp = 0;
        for (int r = 0; r < 5; ++r) {
            v += std::pow(d.w1[r * 1000 + k] - m, 2);
            vp += std::pow(d.w1[r * 1000 + k] + d.w2[r * 1000 + k] - mp, 2);
        }
        EXPECT_NEAR(binned.bins[k].var_w1, v / 4, 1e-13);
        EXPECT_NEAR(binned.bins[k].var_plus, vp / 4, 1e-13);
        EXPECT_EQ(binned.bins[k].count, 5u);
        EXPECT_EQ(binned.bins[k].theta1, d.theta1[k]);
    }
    EXPECT_DOUBLE_EQ(binned.joint(binned.bins[3]), 0.5 * binned.bins[3].var_plus);
    const auto unit = bin_variances(d, JointConvention::kUnitNormalized);
    EXPECT_DOUBLE_EQ(unit.joint(unit.bins[3]), unit.bins[3].var_plus);
}

TEST(BinVariances, IdenticalRecordsHaveZeroVariance)
{
    auto d = generate_dataset(headline_state(), config_1000(2, 4));
    std::copy(d.w1.begin(), d.w1.begin() + 1000, d.w1.begin() + 1000);
    std::copy(d.w2.begin(), d.w2.begin() + 1000, d.w2.begin() + 1000);
    for (const auto& b : bin_variances(d).bins) {
        EXPECT_EQ(b.var_w1, 0.0);
        EXPECT_EQ(b.var_w2, 0.0);
        EXPECT_EQ(b.var_plus, 0.0);
        EXPECT_EQ(b.var_minus, 0.0);
    }
}

TEST(BinVariances, Validation)
{
    auto d = generate_dataset(headline_state(), config_1000(3, 4));
    d.theta1[1000 + 7] += 0.1;
    EXPECT_THROW(bin_variances(d), std::invalid_argument);
    EXPECT_THROW(bin_variances(generate_dataset(headline_state(), config_1000(1, 4))), std::invalid_argument);
}

TEST(VarianceTraces, ShiftAndScale)
{
    const auto binned = bin_variances(generate_dataset(headline_state(), config_1000(3, 4)));
    const auto tr = to_variance_traces(binned, 0.6);
    ASSERT_EQ(tr.size(), 1000u);
    EXPECT_DOUBLE_EQ(tr.phases[10].theta1, binned.bins[10].theta1 - kTracePhaseOffset);
    EXPECT_DOUBLE_EQ(tr.var1[10], binned.bins[10].var_w1 / 0.6);
    EXPECT_DOUBLE_EQ(tr.var_diff[10], binned.bins[10].var_minus / 0.6);
}

TEST(Pipeline, BinnedTracesFitRecoversModel)
{
    const SqueezerParams truth{5.41, 0.1304, 0.202, 0.3, -0.4, 1.0, 1.0};
    const auto d = generate_dataset(predict_covariance(truth), config_1000(2000, 21, 0));
    const auto fit = fit_model(to_variance_traces(bin_variances(d)));
    EXPECT_LT(std::abs(fit.params.s - truth.s), 5 * fit.std_errors.s);
    EXPECT_LT(std::abs(fit.params.alpha - truth.alpha), 5 * fit.std_errors.alpha);
    EXPECT_LT(std::abs(fit.params.beta - truth.beta), 5 * fit.std_errors.beta);
    EXPECT_LT(std::abs(fit.params.phi1 - truth.phi1), 5 * fit.std_errors.phi1);
    EXPECT_LT(std::abs(fit.params.phi2 - truth.phi2), 5 * fit.std_errors.phi2);
    EXPECT_LT(std::abs(fit.params.g1 - 1.0), 5 * fit.std_errors.g1);
}

TEST(Bootstrap, ReproducibleAndConsistent)
{
    const auto cfg = config_1000(20, 9, 0);
    const auto a = parametric_bootstrap(headline_state(), cfg, 5);
    const auto b = parametric_bootstrap(headline_state(), cfg, 5);
    EXPECT_EQ(a.e_w, b.e_w);
    ASSERT_EQ(a.e_w.size(), 5u);
    EXPECT_EQ(a.replicates, 5u);
    EXPECT_EQ(a.base_seed, 9u);
    EXPECT_DOUBLE_EQ(a.std_e_w, *sample_std(a.e_w));
    EXPECT_DOUBLE_EQ(a.std_negativity, *sample_std(a.negativity));
    EXPECT_GT(a.std_e_w, 0.0);
    EXPECT_LE(a.unphysical_replicates, 5u);
}

TEST(Bootstrap, RejectsBadInput)
{
    const auto cfg = config_1000(4, 9);
    EXPECT_THROW(parametric_bootstrap(headline_state(), cfg, 1), std::invalid_argument);
    EXPECT_THROW(parametric_bootstrap(GaussianState(Vec4::Zero(), 0.3 * Mat4::Identity()), cfg), std::domain_error);
    EXPECT_THROW(parametric_bootstrap(GaussianState(Vec4::Zero(), Mat4::Zero()), cfg), std::domain_error);
}

TEST(Trials, SingleTrialHasNoSpread)
{
    const auto t = repeatability_trials(headline_state(), config_1000(10, 1), 1);
    EXPECT_EQ(t.trials, 1u);
    EXPECT_FALSE(t.std_e_w.has_value());
    EXPECT_FALSE(t.std_negativity.has_value());
    EXPECT_DOUBLE_EQ(t.mean_e_w, t.e_w[0]);
    EXPECT_THROW(repeatability_trials(headline_state(), config_1000(10, 1), 0), std::invalid_argument);
}

TEST(Trials, SpreadShrinksAsInverseRootN)
{
    const auto small = repeatability_trials(headline_state(), config_1000(25, 7, 0), 24);
    const auto large = repeatability_trials(headline_state(), config_1000(100, 7, 0), 24);
    const double ratio = *small.std_e_w / *large.std_e_w;
    EXPECT_GT(ratio, 1.3);
    EXPECT_LT(ratio, 3.0);
    EXPECT_NEAR(large.mean_e_w, entanglement_witness(headline_state().sigma()).e_w, 5 * *large.std_e_w);
}
