// cvent: command-line pipeline for two-mode Gaussian entanglement analysis.
//
//   simulate -> [calibrate-apply] -> estimate -> analyze / bootstrap
//   variances, fit-model, calibrate-thermal, reproduce-paper
//
// Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 domain error.

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "cvent/analysis.hpp"
#include "cvent/calibration.hpp"
#include "cvent/estimator.hpp"
#include "cvent/io.hpp"
#include "cvent/squeezer_model.hpp"
#include "cvent/synth.hpp"

namespace {

using namespace cvent;
using io::Json;

constexpr int kExitInvalid = 2;
constexpr int kExitIo = 3;
constexpr int kExitDomain = 4;
constexpr std::string_view kConfigSchema = "cvent.cli_config/1";

void emit(const std::string& path, std::string_view text)
{
    if (path == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw IoError("error writing to standard output");
    } else {
        io::write_text_file(path, text);
    }
}

enum class DataFormat { kAuto, kCsv, kBinary };

const std::map<std::string, DataFormat> kFormatNames{
    {"auto", DataFormat::kAuto}, {"csv", DataFormat::kCsv}, {"binary", DataFormat::kBinary}};

bool ends_with(const std::string& s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

QuadratureDataset load_dataset(const std::string& path, DataFormat format)
{
    if (format == DataFormat::kBinary || (format == DataFormat::kAuto && ends_with(path, ".bin"))) {
        return io::read_dataset_binary(path);
    }
    return io::dataset_from_csv(io::read_text_file(path));
}

void save_dataset(const QuadratureDataset& data, const std::string& path, DataFormat format)
{
    if (format == DataFormat::kBinary || (format == DataFormat::kAuto && ends_with(path, ".bin"))) {
        if (path == "-") throw std::invalid_argument("binary output needs a file path");
        io::write_dataset_binary(data, path);
    } else {
        emit(path, io::dataset_to_csv(data));
    }
}

// ---------------------------------------------------------------------------
// Options shared by several subcommands
// ---------------------------------------------------------------------------

struct AcquisitionOptions {
    AcquisitionConfig config;
    CLI::Option* seed = nullptr;

    void attach(CLI::App& app)
    {
        seed = app.add_option("--seed", config.seed, "64-bit seed for all random draws");
        app.add_option("--records", config.n_records, "records per dataset")->capture_default_str();
        app.add_option("--samples-per-record", config.samples_per_record, "samples per record")
            ->capture_default_str();
        app.add_option("--sample-interval", config.sample_interval, "seconds between samples")
            ->capture_default_str();
        app.add_option("--detune1", config.detune1, "channel-1 phase rotation rate, Hz")->capture_default_str();
        app.add_option("--detune2", config.detune2, "channel-2 phase rotation rate, Hz")->capture_default_str();
        app.add_option("--threads", config.threads, "worker threads (0 = all cores; never changes results)")
            ->capture_default_str();
    }

    AcquisitionConfig require_seeded(const char* command) const
    {
        if (seed->count() == 0) {
            throw std::invalid_argument(std::string(command) + ": --seed is required (no clock seeding)");
        }
        config.validate();
        return config;
    }
};

void require_path(const std::string& value, const char* flag)
{
    if (value.empty()) throw std::invalid_argument(std::string(flag) + " is required");
}

/// Values from a JSON config file fill every option not given on the
/// command line. Keys are long option names without the leading dashes.
void merge_config(CLI::App& app, const std::string& path)
{
    const Json j = io::parse_json(io::read_text_file(path), path);
    io::require_schema(j, kConfigSchema);
    for (const auto& [key, value] : j.items()) {
        if (key == "schema") continue;
        CLI::Option* opt = app.get_option_no_throw("--" + key);
        if (opt == nullptr) throw std::invalid_argument(path + ": unknown option \"" + key + "\"");
        if (opt->count() > 0) continue;
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_boolean()) {
            text = value.get<bool>() ? "true" : "false";
        } else if (value.is_number()) {
            text = value.dump();
        } else {
            throw std::invalid_argument(path + ": option \"" + key + "\" must be a scalar");
        }
        opt->add_result(text);
        opt->run_callback();
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct Simulate {
    std::string params_path, out = "-";
    DataFormat format = DataFormat::kAuto;
    double transmissivity = kDefaultTransmissivity;
    AcquisitionOptions acq;

    void attach(CLI::App& app)
    {
        app.add_option("--params", params_path, "squeezer parameters JSON");
        app.add_option("--out", out, "output dataset path ('-' for stdout)");
        app.add_option("--format", format, "csv | binary | auto (by .bin extension)")
            ->transform(CLI::CheckedTransformer(kFormatNames));
        app.add_option("--transmissivity", transmissivity, "beam-splitter transmissivity t")->capture_default_str();
        acq.attach(app);
    }

    int run() const
    {
        require_path(params_path, "--params");
        const AcquisitionConfig config = acq.require_seeded("simulate");
        const SqueezerParams params = io::squeezer_params_from_json(
            io::parse_json(io::read_text_file(params_path), params_path));
        const GaussianState state = predict_covariance(params, transmissivity);
        save_dataset(generate_dataset(state, config), out, format);
        return 0;
    }
};

struct Estimate {
    std::string in, out = "-";
    DataFormat format = DataFormat::kAuto;
    unsigned threads = 0;

    void attach(CLI::App& app)
    {
        app.add_option("--in", in, "dataset path");
        app.add_option("--out", out, "state JSON path ('-' for stdout)");
        app.add_option("--format", format, "csv | binary | auto")->transform(CLI::CheckedTransformer(kFormatNames));
        app.add_option("--threads", threads, "worker threads");
    }

    int run() const
    {
        require_path(in, "--in");
        QuadratureDataset data = load_dataset(in, format);
        data.config.threads = threads;
        const StateEstimate est = estimate_state(data);
        Json j = io::to_json(est.state);
        j["physical"] = est.physicality.physical;
        j["min_symplectic_eigenvalue"] = io::detail::finite_or_null(est.physicality.min_nu);
        j["n_samples"] = data.size();
        emit(out, io::dump(j));
        return 0;
    }
};

struct Analyze {
    std::string state_path, out = "-";
    std::uint32_t bootstrap = 0;
    AcquisitionOptions acq;

    void attach(CLI::App& app)
    {
        app.add_option("--state", state_path, "state JSON (or a previous analysis report)");
        app.add_option("--out", out, "report JSON path ('-' for stdout)");
        app.add_option("--bootstrap", bootstrap, "parametric bootstrap replicates (0 = none)");
        acq.attach(app);
    }

    int run() const
    {
        require_path(state_path, "--state");
        const GaussianState state =
            io::state_from_document(io::parse_json(io::read_text_file(state_path), state_path));
        std::optional<BootstrapRequest> request;
        if (bootstrap > 0) request = BootstrapRequest{acq.require_seeded("analyze --bootstrap"), bootstrap};
        emit(out, io::dump(io::to_json(analyze(state, request))));
        return 0;
    }
};

struct Bootstrap {
    std::string state_path, out = "-";
    std::uint32_t replicates = 20;
    AcquisitionOptions acq;

    void attach(CLI::App& app)
    {
        app.add_option("--state", state_path, "state JSON (or an analysis report)");
        app.add_option("--out", out, "bootstrap report JSON path");
        app.add_option("--replicates", replicates, "number of resimulated datasets")->capture_default_str();
        acq.attach(app);
    }

    int run() const
    {
        require_path(state_path, "--state");
        const AcquisitionConfig config = acq.require_seeded("bootstrap");
        const GaussianState state =
            io::state_from_document(io::parse_json(io::read_text_file(state_path), state_path));
        Json j = io::to_json(parametric_bootstrap(state, config, replicates));
        j["acquisition"] = io::to_json(config);
        j["input_hash"] = io::hex64(io::fnv1a64(io::to_json(state).dump()));
        emit(out, io::dump(j));
        return 0;
    }
};

const std::map<std::string, JointConvention> kJointNames{{"half-sum", JointConvention::kHalfSum},
                                                          {"unit", JointConvention::kUnitNormalized}};

struct Variances {
    std::string in, out = "-";
    DataFormat format = DataFormat::kAuto;
    JointConvention joint = JointConvention::kHalfSum;

    void attach(CLI::App& app)
    {
        app.add_option("--in", in, "dataset path");
        app.add_option("--out", out, "variances CSV path ('-' for stdout)");
        app.add_option("--format", format, "csv | binary | auto")->transform(CLI::CheckedTransformer(kFormatNames));
        app.add_option("--joint", joint, "joint column: half-sum = (1/2)Var(W1+W2), unit = vacuum-1 units")
            ->transform(CLI::CheckedTransformer(kJointNames));
    }

    int run() const
    {
        require_path(in, "--in");
        emit(out, io::variances_to_csv(bin_variances(load_dataset(in, format), joint)));
        return 0;
    }
};

struct FitModel {
    std::string in, out = "-", init_path;
    DataFormat format = DataFormat::kAuto;
    double sigma = kVacuumVariance;

    void attach(CLI::App& app)
    {
        app.add_option("--in", in, "dataset path");
        app.add_option("--out", out, "fit report JSON path ('-' for stdout)");
        app.add_option("--format", format, "csv | binary | auto")->transform(CLI::CheckedTransformer(kFormatNames));
        app.add_option("--sigma", sigma, "input variance used to normalize W to U")->capture_default_str();
        app.add_option("--init", init_path, "optional starting parameters JSON");
    }

    int run() const
    {
        require_path(in, "--in");
        std::optional<SqueezerParams> init;
        if (!init_path.empty()) {
            init = io::squeezer_params_from_json(io::parse_json(io::read_text_file(init_path), init_path));
        }
        const VarianceTraces traces = to_variance_traces(bin_variances(load_dataset(in, format)), sigma);
        emit(out, io::dump(io::to_json(fit_model(traces, init))));
        return 0;
    }
};

struct CalibrateThermal {
    std::string in, out = "-";
    double f_s = kSignalFrequency;

    void attach(CLI::App& app)
    {
        app.add_option("--in", in, "thermal sweep CSV");
        app.add_option("--out", out, "calibration JSON path ('-' for stdout)");
        app.add_option("--f-s", f_s, "signal frequency, Hz")->capture_default_str();
    }

    int run() const
    {
        require_path(in, "--in");
        const auto sweep = io::sweep_from_csv(io::read_text_file(in));
        emit(out, io::dump(io::to_json(fit_thermal(sweep, f_s))));
        return 0;
    }
};

struct CalibrateApply {
    std::string raw, off, calibration, out = "-";
    double g1 = 1.0, g2 = 1.0;
    double t_fridge = 0.0;
    bool exact_sigma = false;
    CLI::Option* sigma_opt = nullptr;
    double sigma = kVacuumVariance;

    void attach(CLI::App& app)
    {
        app.add_option("--raw", raw, "raw records CSV (record,sample,theta1,v1,theta2,v2)");
        app.add_option("--off", off, "raw records CSV taken with the source bypassed");
        app.add_option("--g1", g1, "channel-1 gain ratio")->capture_default_str();
        app.add_option("--g2", g2, "channel-2 gain ratio")->capture_default_str();
        app.add_option("--calibration", calibration, "thermal calibration JSON (supplies T_e)");
        app.add_option("--t-fridge", t_fridge, "cryostat temperature during acquisition, K");
        app.add_flag("--exact-sigma", exact_sigma, "keep the coth value of sigma below 29.7 mK");
        sigma_opt = app.add_option("--sigma", sigma, "input variance override (vacuum units)");
        app.add_option("--out", out, "calibrated dataset CSV ('-' for stdout)");
    }

    int run() const
    {
        require_path(raw, "--raw");
        require_path(off, "--off");
        double s = kVacuumVariance;
        if (sigma_opt->count() > 0) {
            s = sigma;
        } else if (!calibration.empty()) {
            if (!(t_fridge > 0.0)) throw std::invalid_argument("--t-fridge must be positive with --calibration");
            const ThermalCalibration c =
                io::thermal_calibration_from_json(io::parse_json(io::read_text_file(calibration), calibration));
            s = calibration_sigma(input_temperature(t_fridge, c.t_e), exact_sigma, c.f_s);
        }
        QuadratureDataset on = io::raw_records_from_csv(io::read_text_file(raw));
        const QuadratureDataset bypass = io::raw_records_from_csv(io::read_text_file(off));
        const CalibratedQuadratures cal = normalize_and_calibrate(on.w1, on.w2, bypass.w1, bypass.w2, g1, g2, s);
        on.w1 = cal.w1;
        on.w2 = cal.w2;
        emit(out, io::dataset_to_csv(on));
        return 0;
    }
};

struct ReproducePaper {
    AcquisitionOptions acq;
    std::uint32_t replicates = 20;
    std::string out;

    void attach(CLI::App& app)
    {
        acq.attach(app);
        acq.config.seed = 20240101;
        acq.seed->default_str("20240101");
        app.add_option("--replicates", replicates, "bootstrap replicates (0 = skip)")->capture_default_str();
        app.add_option("--out", out, "optional JSON summary path");
    }

    int run() const;
};

void row(const char* name, const std::string& paper, double model, std::optional<double> sim, const char* fmt)
{
    char m[32], s[32] = "-";
    std::snprintf(m, sizeof m, fmt, model);
    if (sim) std::snprintf(s, sizeof s, fmt, *sim);
    std::printf("  %-30s %-18s %-12s %-12s\n", name, paper.c_str(), m, s);
}

int ReproducePaper::run() const
{
    const AcquisitionConfig config = acq.config;
    config.validate();
    const SqueezerParams params{5.41, 0.1304, 0.202, -1.070, -0.176, 0.9830, 1.0204};
    const GaussianState model = predict_covariance(params);
    const WitnessResult w = entanglement_witness(model.sigma());
    const NegativityResult n = negativity(model.sigma());
    const auto sq1 = minimum_mode_variance(model.sigma(), 0);
    const auto sq2 = minimum_mode_variance(model.sigma(), 1);
    const auto joint = minimum_joint_variance(model.sigma());
    auto below = [](double v) { return 100.0 * (1.0 - v / kVacuumVariance); };

    std::printf("simulating %u records x %u samples (seed %llu)\n", config.n_records, config.samples_per_record,
                static_cast<unsigned long long>(config.seed));
    const QuadratureDataset data = generate_dataset(model, config);
    const StateEstimate est = estimate_state(data);
    const WitnessResult we = entanglement_witness(est.state.sigma());
    const NegativityResult ne = negativity(est.state.sigma());
    const auto sq1_sim = minimum_mode_variance(est.state.sigma(), 0);
    const auto sq2_sim = minimum_mode_variance(est.state.sigma(), 1);
    const auto joint_sim = minimum_joint_variance(est.state.sigma());
    // Uncalibrated channel outputs carry the gain ratios: U_i = sqrt(g_i / sigma) W_i.
    QuadratureDataset uncalibrated = data;
    for (double& v : uncalibrated.w1) v *= std::sqrt(params.g1);
    for (double& v : uncalibrated.w2) v *= std::sqrt(params.g2);
    const BinnedVariances bins = bin_variances(uncalibrated);
    std::optional<ModelFit> fit;
    try {
        fit = fit_model(to_variance_traces(bins));
    } catch (const std::exception& e) {
        std::printf("model fit failed: %s\n", e.what());
    }
    std::optional<BootstrapReport> boot;
    if (replicates >= 2) boot = parametric_bootstrap(est.state, config, replicates);

    std::printf("\n  %-30s %-18s %-12s %-12s\n", "quantity", "reported", "model", "simulated");
    row("E_W", "-0.263", w.e_w, we.e_w, "%.4f");
    row("a*", "1.11", w.a_star, we.a_star, "%.3f");
    row("N", "0.0824", n.negativity, ne.negativity, "%.4f");
    row("Delta_EPR", "< 1", w.delta_epr, we.delta_epr, "%.4f");
    row("min Var(W1), % below vacuum", "~15", below(sq1.value), below(sq1_sim.value), "%.1f");
    row("min Var(W2), % below vacuum", "~15", below(sq2.value), below(sq2_sim.value), "%.1f");
    row("min (1/2)Var(W1+W2), % below", "~25", below(joint.value), below(joint_sim.value), "%.1f");
    if (fit) {
        row("fit s", "5.41 +- 0.03", params.s, fit->params.s, "%.3f");
        row("fit alpha", "0.1304 +- 0.0007", params.alpha, fit->params.alpha, "%.4f");
        row("fit beta", "0.202 +- 0.001", params.beta, fit->params.beta, "%.4f");
        row("fit phi1", "-1.070", params.phi1, fit->params.phi1, "%.3f");
        row("fit phi2", "-0.176", params.phi2, fit->params.phi2, "%.3f");
        row("fit g1, % change", "-1.70 +- 0.07", gain_change_percent(params.g1),
            gain_change_percent(fit->params.g1), "%.2f");
        row("fit g2, % change", "2.04 +- 0.08", gain_change_percent(params.g2),
            gain_change_percent(fit->params.g2), "%.2f");
    }
    if (boot) {
        std::printf("\n  bootstrap (%u replicates): sigma(E_W) = %.5f (reported 0.001), sigma(N) = %.5f "
                    "(reported 0.0004), unphysical replicates %u\n",
                    boot->replicates, boot->std_e_w, boot->std_negativity, boot->unphysical_replicates);
    }
    std::printf("\n  note: the general-Gaussian-model figures E_W = -0.297 and N = 0.0921 come from\n"
                "  systematics of the physical measurement chain that a simulation from the model\n"
                "  state does not contain; they are not reproducible here. In simulation the\n"
                "  estimator agrees with the generating state instead (simulated vs model columns).\n");

    if (!out.empty()) {
        Json j = {{"acquisition", io::to_json(config)},
                  {"model", {{"e_w", w.e_w}, {"a_star", w.a_star}, {"negativity", n.negativity},
                             {"delta_epr", w.delta_epr}, {"min_var_w1", sq1.value}, {"min_var_w2", sq2.value},
                             {"min_joint", joint.value}}},
                  {"simulated", {{"e_w", we.e_w}, {"a_star", we.a_star}, {"negativity", ne.negativity},
                                 {"delta_epr", we.delta_epr}, {"state", io::to_json(est.state)}}}};
        if (fit) j["fit"] = io::to_json(*fit);
        if (boot) j["bootstrap"] = io::to_json(*boot);
        emit(out, io::dump(j));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-mode Gaussian entanglement pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Simulate simulate;
    Estimate estimate;
    Analyze analyze_cmd;
    FitModel fit;
    CalibrateThermal thermal;
    CalibrateApply apply;
    Variances variances;
    Bootstrap bootstrap;
    ReproducePaper reproduce;

    std::vector<std::pair<CLI::App*, std::function<int()>>> commands;
    std::map<CLI::App*, std::string> config_paths;
    auto add = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        cmd.attach(*sub);
        sub->add_option("--config", config_paths[sub], "JSON config; explicit flags take precedence");
        commands.emplace_back(sub, [&cmd] { return cmd.run(); });
    };
    add("simulate", "generate a quadrature dataset from squeezer parameters", simulate);
    add("estimate", "estimate the Gaussian state of a dataset", estimate);
    add("analyze", "witness, negativity and optional bootstrap for a state", analyze_cmd);
    add("fit-model", "fit the single-squeezer variance model to a dataset", fit);
    add("calibrate-thermal", "fit gain, added noise and T_e to a thermal sweep", thermal);
    add("calibrate-apply", "convert raw records to calibrated quadratures", apply);
    add("variances", "per-phase-pair variances across records", variances);
    add("bootstrap", "parametric bootstrap of E_W, N and Delta_EPR", bootstrap);
    add("reproduce-paper", "run the full pipeline at the reference parameters", reproduce);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        for (auto& [sub, run] : commands) {
            if (!sub->parsed()) continue;
            if (!config_paths[sub].empty()) merge_config(*sub, config_paths[sub]);
            return run();
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const NotConverged& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitInvalid;
}
