// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cvent/calibration.hpp"
#include "cvent/estimator.hpp"
#include "cvent/gaussian_core.hpp"
#include "cvent/io.hpp"
#include "cvent/squeezer_model.hpp"
#include "cvent/synth.hpp"
#include "oracles.hpp"

using namespace cvent;

namespace {

// Pinned tolerances.
constexpr double kEwLo = -0.270, kEwHi = -0.256;
constexpr double kAStarLo = 1.10, kAStarHi = 1.12;
constexpr double kNegLo = 0.0814, kNegHi = 0.0834;
constexpr double kMaxVarW2 = 0.425, kMaxVarW1 = 0.45;
constexpr double kJointLo = 0.37, kJointHi = 0.385;
constexpr double kFastLimitMs = 1.0;
constexpr double kEwRecovery = 0.01, kNegRecovery = 0.003;
constexpr double kPipelineLimitS = 120.0;
constexpr double kStdEwLo = 0.0005, kStdEwHi = 0.004;
constexpr double kStdNegLo = 0.0002, kStdNegHi = 0.0015;
constexpr double kBootstrapLimitS = 1800.0;
constexpr double kFitS = 0.06, kFitAlpha = 0.002, kFitBeta = 0.003;
constexpr double kWitnessOracleTol = 1e-6, kSpectrumTol = 1e-9;
constexpr double kTmsvTol = 1e-10;
constexpr double kRotationTol = 1e-9;
constexpr double kCalibrationSigmas = 3.0;
constexpr double kTinTol = 0.1e-3;
constexpr double kSystematicEw = -0.297, kSystematicNeg = 0.0921;
constexpr double kExcludeSigmas = 5.0;
constexpr std::uint64_t kSeed = 20240101;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failures = 0;

void report(int id, bool pass, const std::string& detail)
{
    if (!pass) ++g_failures;
    std::printf("C%-2d %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

/// Median wall time of `reps` calls, in milliseconds.
double median_ms(const std::function<void()>& f, int reps = 201)
{
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        t.push_back(1e3 * seconds_since(t0));
    }
    std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
    return t[reps / 2];
}

Mat4 headline_sigma() { return predict_covariance({5.41, 0.1304, 0.202, 0.0, 0.0, 1.0, 1.0}).sigma(); }

AcquisitionConfig full_scale()
{
    AcquisitionConfig c;  // 1000 records x 10000 samples
    c.seed = kSeed;
    return c;
}

double rel_noise(std::mt19937_64& rng, double sd)
{
    std::normal_distribution<double> n(0.0, sd);
    return 1.0 + n(rng);
}

}  // namespace

int main()
{
    const Mat4 sigma = headline_sigma();

    // C1
    {
        const WitnessResult w = entanglement_witness(sigma);
        double sink = 0.0;
        const double ms = median_ms([&] { sink += entanglement_witness(sigma).e_w; });
        const bool pass = within(w.e_w, kEwLo, kEwHi) && within(w.a_star, kAStarLo, kAStarHi) && ms < kFastLimitMs;
        report(1, pass,
               fmt("e_w=%.6f in [%.3f, %.3f], a*=%.6f in [%.2f, %.2f], median %.4f ms < %.0f ms", w.e_w, kEwLo, kEwHi,
                   w.a_star, kAStarLo, kAStarHi, ms, kFastLimitMs));
        (void)sink;
    }

    // C2
    {
        const double n = negativity(sigma).negativity;
        double sink = 0.0;
        const double ms = median_ms([&] { sink += negativity(sigma).negativity; });
        report(2, within(n, kNegLo, kNegHi) && ms < kFastLimitMs,
               fmt("N=%.6f in [%.4f, %.4f], median %.4f ms < %.0f ms", n, kNegLo, kNegHi, ms, kFastLimitMs));
        (void)sink;
    }

    // C3
    {
        const double v1 = minimum_mode_variance(sigma, 0).value;
        const double v2 = minimum_mode_variance(sigma, 1).value;
        const double joint = minimum_joint_variance(sigma).value;
        const bool pass = v2 <= kMaxVarW2 && v1 <= kMaxVarW1 && within(joint, kJointLo, kJointHi);
        report(3, pass,
               fmt("min Var(W2)=%.6f <= %.3f, min Var(W1)=%.6f <= %.2f, min (1/2)Var(W1+W2)=%.6f in [%.3f, %.3f]", v2,
                   kMaxVarW2, v1, kMaxVarW1, joint, kJointLo, kJointHi));
    }

    // C4 and C6 share the full-scale dataset.
    const WitnessResult model_w = entanglement_witness(sigma);
    const double model_n = negativity(sigma).negativity;
    StateEstimate estimate{vacuum_state(), {}};
    double sim_e_w = 0.0, sim_n = 0.0;
    {
        const auto t0 = Clock::now();
        const QuadratureDataset data = generate_dataset(GaussianState(Vec4::Zero(), sigma), full_scale());
        estimate = estimate_state(data);
        sim_e_w = entanglement_witness(estimate.state.sigma()).e_w;
        sim_n = negativity(estimate.state.sigma()).negativity;
        const double secs = seconds_since(t0);
        const bool pass = std::abs(sim_e_w - model_w.e_w) <= kEwRecovery && std::abs(sim_n - model_n) <= kNegRecovery &&
                          secs < kPipelineLimitS;
        report(4, pass,
               fmt("%zu quadruplets: e_w=%.5f (model %.5f, |d|=%.5f <= %.2f), N=%.5f (model %.5f, |d|=%.5f <= %.3f), "
                   "%.1f s < %.0f s",
                   data.size(), sim_e_w, model_w.e_w, std::abs(sim_e_w - model_w.e_w), kEwRecovery, sim_n, model_n,
                   std::abs(sim_n - model_n), kNegRecovery, secs, kPipelineLimitS));

        // C6
        const ModelFit fit = fit_model(to_variance_traces(bin_variances(data)));
        const auto& p = fit.params;
        const bool fit_pass = std::abs(p.s - 5.41) <= kFitS && std::abs(p.alpha - 0.1304) <= kFitAlpha &&
                              std::abs(p.beta - 0.202) <= kFitBeta;
        const std::string fit_detail = fmt("s=%.4f (|d|=%.4f <= %.2f), alpha=%.5f (|d|=%.5f <= %.3f), beta=%.5f (|d|=%.5f <= %.3f)",
                                 p.s, std::abs(p.s - 5.41), kFitS, p.alpha, std::abs(p.alpha - 0.1304), kFitAlpha,
                                 p.beta, std::abs(p.beta - 0.202), kFitBeta);
        // C5
        const auto t1 = Clock::now();
        const BootstrapReport boot = parametric_bootstrap(estimate.state, full_scale(), 20);
        const double bsecs = seconds_since(t1);
        report(5,
               within(boot.std_e_w, kStdEwLo, kStdEwHi) && within(boot.std_negativity, kStdNegLo, kStdNegHi) &&
                   bsecs < kBootstrapLimitS,
               fmt("20 replicates: std(E_W)=%.5f in [%.4f, %.3f], std(N)=%.5f in [%.4f, %.4f], %.1f s < %.0f s",
                   boot.std_e_w, kStdEwLo, kStdEwHi, boot.std_negativity, kStdNegLo, kStdNegHi, bsecs,
                   kBootstrapLimitS));
        report(6, fit_pass, fit_detail);

        // C11 uses the bootstrap spread as the simulation's statistical scale.
        const double ew_gap = std::abs(sim_e_w - kSystematicEw) / boot.std_e_w;
        const double n_gap = std::abs(sim_n - kSystematicNeg) / boot.std_negativity;
        const std::string c11 = fmt("simulation gives E_W=%.4f, N=%.4f; reported model-systematic E_W=%.3f is %.0f std away, "
                  "N=%.4f is %.0f std away (> %.0f: not reproducible in simulation)",
                  sim_e_w, sim_n, kSystematicEw, ew_gap, kSystematicNeg, n_gap, kExcludeSigmas);
        const bool c11_pass = ew_gap > kExcludeSigmas && n_gap > kExcludeSigmas;

        // C7
        {
            std::mt19937_64 rng(7);
            double worst_w = 0.0, worst_nu = 0.0;
            for (int i = 0; i < 100; ++i) {
                const Mat4 s = oracle::random_physical(rng, 0.8);
                worst_w = std::max(worst_w, std::abs(entanglement_witness(s).e_w - oracle::brute_force_witness(s).e_w));
                const auto nu = symplectic_eigenvalues(s);
                const auto ref = oracle::symplectic_spectrum(s);
                worst_nu = std::max({worst_nu, std::abs(nu.nu1 - ref.first), std::abs(nu.nu2 - ref.second)});
            }
            report(7, worst_w <= kWitnessOracleTol && worst_nu <= kSpectrumTol,
                   fmt("100 random states: max |E_W - dense grid|=%.2e <= %.0e, max |nu - eig(i Omega Sigma)|=%.2e <= "
                       "%.0e",
                       worst_w, kWitnessOracleTol, worst_nu, kSpectrumTol));
        }

        // C8
        {
            double worst = 0.0;
            for (double r : {0.1, 0.5, 1.0}) {
                const double n = negativity(oracle::two_mode_squeezed(r)).negativity;
                worst = std::max(worst, std::abs(n - 0.5 * (std::exp(2.0 * r) - 1.0)));
            }
            report(8, worst <= kTmsvTol,
                   fmt("r in {0.1, 0.5, 1.0}: max |N - (e^{2r}-1)/2|=%.2e <= %.0e", worst, kTmsvTol));
        }

        // C9
        {
            std::mt19937_64 rng(9);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double rot = 0.0;
            int loss_violations = 0, separable_violations = 0;
            for (int i = 0; i < 100; ++i) {
                const Mat4 s = oracle::random_physical(rng, 0.8);
                const Mat4 p = phase_transform(6.3 * u(rng), 6.3 * u(rng)).matrix();
                const Mat4 r = p * s * p.transpose();
                rot = std::max({rot, std::abs(negativity(s).negativity - negativity(r).negativity),
                                std::abs(entanglement_witness(s).e_w - entanglement_witness(r).e_w)});
                const GaussianState st(Vec4::Zero(), s);
                double prev = negativity(s).negativity;
                for (double eta : {0.9, 0.7, 0.5, 0.3, 0.1}) {
                    const double n = negativity(apply_loss(st, eta, std::sqrt(eta)).sigma()).negativity;
                    if (n > prev + 1e-12) ++loss_violations;
                    prev = n;
                }
                // Product of single-mode mixed states plus classical correlated noise.
                Mat4 sep = Mat4::Zero();
                Mat4 a = oracle::random_physical(rng, 0.8);
                Mat4 b = oracle::random_physical(rng, 0.8);
                sep.block<2, 2>(0, 0) = a.block<2, 2>(0, 0);
                sep.block<2, 2>(2, 2) = b.block<2, 2>(2, 2);
                const Vec4 v(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
                sep += v * v.transpose();
                if (entanglement_witness(sep).e_w < -1e-9 || negativity(sep).negativity != 0.0) ++separable_violations;
            }
            bool vacuum_fixed = true;
            for (double e : {0.0, 0.25, 0.5, 1.0}) {
                vacuum_fixed = vacuum_fixed &&
                               apply_loss(vacuum_state(), e, 1.0 - e).sigma().isApprox(vacuum_state().sigma(), 1e-15);
            }
            AcquisitionConfig cfg;
            cfg.n_records = 50;
            cfg.samples_per_record = 1000;
            cfg.detune1 = 1e4;
            cfg.detune2 = 5e5;
            cfg.seed = 31;
            cfg.threads = 1;
            const GaussianState head(Vec4::Zero(), sigma);
            const std::string ref = io::dataset_to_csv(generate_dataset(head, cfg));
            bool deterministic = ref == io::dataset_to_csv(generate_dataset(head, cfg));
            for (unsigned t : {2u, 4u, 0u}) {
                cfg.threads = t;
                const auto d = generate_dataset(head, cfg);
                deterministic = deterministic && io::dataset_to_csv(d) == ref;
            }
            report(9,
                   rot <= kRotationTol && loss_violations == 0 && separable_violations == 0 && vacuum_fixed &&
                       deterministic,
                   fmt("rotation max diff %.1e <= %.0e; loss monotonicity violations %d/100; separable violations "
                       "%d/100; vacuum fixed point %s; seeded generation byte-identical across runs and 1/2/4/all "
                       "threads: %s",
                       rot, kRotationTol, loss_violations, separable_violations, vacuum_fixed ? "yes" : "no",
                       deterministic ? "yes" : "no"));
        }

        // C10
        {
            const std::vector<ChannelNoise> truth{{1.0e6, 0.25, 10.0}, {7.5e5, 0.40, 6.0}};
            const double t_e = 40e-3;
            std::mt19937_64 rng(10);
            std::vector<ThermalSweepPoint> sweep;
            for (std::uint32_t c = 0; c < truth.size(); ++c) {
                for (int i = 0; i < 12; ++i) {
                    const double t = 15e-3 * std::pow(250.0 / 15.0, i / 11.0);
                    for (std::uint32_t r = 0; r < 3; ++r) {
                        const double v = thermal_model(t, truth[c], t_e) * rel_noise(rng, 0.002);
                        sweep.push_back({c, t, v, r});
                    }
                }
            }
            const ThermalFit fit = fit_thermal(sweep);
            double worst = std::abs(fit.calibration.t_e - t_e) / fit.t_e_std_error;
            for (std::size_t c = 0; c < truth.size(); ++c) {
                const auto& g = fit.calibration.channels[c];
                const auto& e = fit.std_errors[c];
                worst = std::max({worst, std::abs(g.gain - truth[c].gain) / e.gain, std::abs(g.a0 - truth[c].a0) / e.a0,
                                  std::abs(g.a2 - truth[c].a2) / e.a2});
            }
            if (!std::isfinite(worst)) worst = INFINITY;
            const double t_in = input_temperature(25e-3, 16.1e-3);
            report(10, worst <= kCalibrationSigmas && std::abs(t_in - 29.7e-3) <= kTinTol,
                   fmt("2-channel sweep, 0.2%% noise, T_e=%.1f mK: fitted T_e=%.2f +- %.2f mK, worst |error|/std over "
                       "(G, A0, A2, T_e)=%.2f <= %.0f; T_in(25 mK, 16.1 mK)=%.3f mK (|d| <= %.1f mK)",
                       1e3 * t_e, 1e3 * fit.calibration.t_e, 1e3 * fit.t_e_std_error, worst, kCalibrationSigmas,
                       1e3 * t_in, 1e3 * kTinTol));
        }

        report(11, c11_pass, c11);
    }

    std::printf("%s: %d criterion(s) failed\n", g_failures ? "FAIL" : "PASS", g_failures);
    return g_failures ? 1 : 0;
}
