#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "cvent/random.hpp"
#include "cvent/squeezer_model.hpp"
#include "cvent/synth.hpp"

using namespace cvent;

namespace {

constexpr double kPi = std::numbers::pi;

GaussianState headline_state() { return predict_covariance({5.41, 0.1304, 0.202, 0.0, 0.0, 1.0, 1.0}); }

AcquisitionConfig small_config(std::uint64_t seed, std::uint32_t records = 64, unsigned threads = 1)
{
    AcquisitionConfig c;
    c.samples_per_record = 4;
    c.n_records = records;
    c.detune1 = 2.5e6;  // one period per 4-sample record
    c.detune2 = 5e6;    // two periods
    c.seed = seed;
    c.threads = threads;
    return c;
}

}  // namespace

TEST(Philox, KnownAnswerVectors)
{
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    EXPECT_EQ(Philox4x32(K{0, 0})(C{0, 0, 0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32(K{0xffffffff, 0xffffffff})(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32(K{0xa4093822, 0x299f31d0})(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, SeedSplitsIntoKeyWords)
{
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32(0x299f31d0a4093822ull)(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Random, OpenUnitNeverHitsEndpoints)
{
    EXPECT_GT(to_open_unit(0), 0.0);
    EXPECT_LT(to_open_unit(~0ull), 1.0);
}

TEST(Random, DerivedSeedsAreDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 3; ++s) {
        for (std::uint64_t i = 0; i < 1000; ++i) {
            seen.insert(derive_seed(42, i, s));
        }
    }
    EXPECT_EQ(seen.size(), 3000u);
    EXPECT_EQ(derive_seed(42, 7, 1), derive_seed(42, 7, 1));
}

TEST(Random, NormalPairMoments)
{
    const CounterRng rng(123);
    const int n = 200000;
    double s1 = 0, s2 = 0, q1 = 0, q2 = 0, c = 0;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = rng.normal_pair(static_cast<std::uint32_t>(i / 1000), static_cast<std::uint32_t>(i % 1000));
        s1 += a;
        s2 += b;
        q1 += a * a;
        q2 += b * b;
        c += a * b;
    }
    const double se = 1.0 / std::sqrt(n);
    EXPECT_NEAR(s1 / n, 0.0, 5 * se);
    EXPECT_NEAR(s2 / n, 0.0, 5 * se);
    EXPECT_NEAR(q1 / n, 1.0, 5 * std::sqrt(2.0) * se);
    EXPECT_NEAR(q2 / n, 1.0, 5 * std::sqrt(2.0) * se);
    EXPECT_NEAR(c / n, 0.0, 5 * se);
}

TEST(PhaseSchedule, MatchesDirectFormula)
{
    const AcquisitionConfig c;  // 10000 samples, 1 and 50 periods per record
    const auto [a, b] = phase_schedule(c, 5000);
    EXPECT_DOUBLE_EQ(a, kPi);
    EXPECT_DOUBLE_EQ(b, 0.0);
    for (std::uint32_t k : {0u, 1u, 17u, 2500u, 9999u}) {
        const auto [t1, t2] = phase_schedule(c, k);
        const double d1 = std::fmod(2 * kPi * c.detune1 * k * c.sample_interval, 2 * kPi);
        const double d2 = std::fmod(2 * kPi * c.detune2 * k * c.sample_interval, 2 * kPi);
        EXPECT_NEAR(std::remainder(t1 - d1, 2 * kPi), 0.0, 1e-9) << k;
        EXPECT_NEAR(std::remainder(t2 - d2, 2 * kPi), 0.0, 1e-9) << k;
        EXPECT_GE(t1, 0.0);
        EXPECT_LT(t1, 2 * kPi);
    }
    EXPECT_THROW(phase_schedule(c, 10000), std::out_of_range);
}

TEST(PhaseSchedule, DefaultRecordVisitsDistinctPairs)
{
    const AcquisitionConfig c;
    std::set<std::pair<double, double>> seen;
    for (std::uint32_t k = 0; k < c.samples_per_record; ++k) seen.insert(phase_schedule(c, k));
    EXPECT_EQ(seen.size(), c.samples_per_record);
}

TEST(AcquisitionConfig, RequiresWholePeriods)
{
    AcquisitionConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.periods_per_record(c.detune1), 1u);
    EXPECT_EQ(c.periods_per_record(c.detune2), 50u);
    c.detune1 = 1.5e3;  // 1.5 periods
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.detune1 = 150.0;  // less than one period
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = AcquisitionConfig{};
    c.n_records = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SamplePair, MomentsMatchProjection)
{
    const GaussianState st = headline_state();
    const double t1 = 0.7, t2 = 2.1;
    const CounterRng rng(9);
    const int n = 200000;
    double q1 = 0, q2 = 0, c = 0;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = sample_pair(st, t1, t2, rng, 0, static_cast<std::uint32_t>(i));
        q1 += a * a;
        q2 += b * b;
        c += a * b;
    }
    const Vec4 u1(std::cos(t1), std::sin(t1), 0, 0), u2(0, 0, std::cos(t2), std::sin(t2));
    const double v1 = u1.dot(st.sigma() * u1), v2 = u2.dot(st.sigma() * u2), cv = u1.dot(st.sigma() * u2);
    EXPECT_NEAR(q1 / n, v1, 5 * v1 * std::sqrt(2.0 / n));
    EXPECT_NEAR(q2 / n, v2, 5 * v2 * std::sqrt(2.0 / n));
    EXPECT_NEAR(c / n, cv, 5 * std::sqrt((v1 * v2 + cv * cv) / n));
}

TEST(SamplePair, SquareRootReproducesCovariance)
{
    const GaussianState st = headline_state();
    const ProjectedSampler p(st, 0.3, 1.9);
    const Vec4 u1(std::cos(0.3), std::sin(0.3), 0, 0), u2(0, 0, std::cos(1.9), std::sin(1.9));
    EXPECT_NEAR(p.r11 * p.r11 + p.r12 * p.r12, u1.dot(st.sigma() * u1), 1e-14);
    EXPECT_NEAR(p.r22 * p.r22 + p.r12 * p.r12, u2.dot(st.sigma() * u2), 1e-14);
    EXPECT_NEAR(p.r12 * (p.r11 + p.r22), u1.dot(st.sigma() * u2), 1e-14);
}

TEST(SamplePair, MeanIsCarried)
{
    const GaussianState st(Vec4(1.0, 2.0, -3.0, 0.5), vacuum_state().sigma());
    const auto [a, b] = sample_pair(st, kPi / 2, 0.0, {0.0, 0.0});
    EXPECT_NEAR(a, 2.0, 1e-15);
    EXPECT_NEAR(b, -3.0, 1e-15);
}

TEST(SamplePair, RejectsIndefiniteProjection)
{
    const GaussianState st(Vec4::Zero(), -0.5 * Mat4::Identity());
    EXPECT_THROW(sample_pair(st, 0.0, 0.0, {0.0, 0.0}), std::domain_error);
}

TEST(GenerateDataset, LayoutAndPhases)
{
    const auto d = generate_dataset(headline_state(), small_config(1, 8));
    EXPECT_NO_THROW(d.check_layout());
    EXPECT_EQ(d.size(), 32u);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto [t1, t2] = phase_schedule(d.config, static_cast<std::uint32_t>(i % 4));
        EXPECT_EQ(d.theta1[i], t1);
        EXPECT_EQ(d.theta2[i], t2);
    }
}

TEST(GenerateDataset, IndependentOfThreadCount)
{
    const auto a = generate_dataset(headline_state(), small_config(77, 997, 1));
    for (unsigned t : {2u, 3u, 8u, 0u}) {
        const auto b = generate_dataset(headline_state(), small_config(77, 997, t));
        EXPECT_EQ(a.w1, b.w1) << t;
        EXPECT_EQ(a.w2, b.w2) << t;
    }
}

TEST(GenerateDataset, SeedControlsDraws)
{
    const auto a = generate_dataset(headline_state(), small_config(5));
    const auto b = generate_dataset(headline_state(), small_config(5));
    const auto c = generate_dataset(headline_state(), small_config(6));
    EXPECT_EQ(a.w1, b.w1);
    EXPECT_NE(a.w1, c.w1);
}

TEST(GenerateDataset, RecordsAreAddressable)
{
    const auto cfg = small_config(31, 50);
    const auto d = generate_dataset(headline_state(), cfg);
    const RecordSampler sampler(headline_state(), cfg);
    std::vector<double> w1(4), w2(4);
    sampler.sample_record(37, w1, w2);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(w1[k], d.w1[37 * 4 + k]);
        EXPECT_EQ(w2[k], d.w2[37 * 4 + k]);
    }
}

TEST(ParallelFor, VisitsEveryIndexAndPropagatesErrors)
{
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 7, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 63) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}
