#pragma once

// File formats: versioned JSON documents, CSV tables and a compact binary
// dataset container with a JSON sidecar.

#include "json.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cvent/calibration.hpp"
#include "cvent/errors.hpp"
#include "cvent/estimator.hpp"
#include "cvent/gaussian_core.hpp"
#include "cvent/squeezer_model.hpp"
#include "cvent/synth.hpp"

namespace cvent::io {

using Json = nlohmann::json;

namespace schema {
inline constexpr std::string_view kGaussianState = "cvent.gaussian_state/1";
inline constexpr std::string_view kSqueezerParams = "cvent.squeezer_params/1";
inline constexpr std::string_view kModelFit = "cvent.model_fit/1";
inline constexpr std::string_view kThermalCalibration = "cvent.thermal_calibration/1";
inline constexpr std::string_view kAcquisition = "cvent.acquisition/1";
inline constexpr std::string_view kBootstrap = "cvent.bootstrap/1";
inline constexpr std::string_view kAnalysis = "cvent.analysis/1";
inline constexpr std::string_view kBinaryDataset = "cvent.dataset_binary/1";
}  // namespace schema

inline constexpr std::string_view kDatasetHeader = "record,sample,theta1,w1,theta2,w2";
inline constexpr std::string_view kRawHeader = "record,sample,theta1,v1,theta2,v2";
inline constexpr std::string_view kSweepHeader = "channel,t_fridge_kelvin,var_raw,repeat_index";
inline constexpr std::string_view kVariancesHeader = "sample,theta1,theta2,var_w1,var_w2,var_joint,count";

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return buf.str();
}

inline void write_text_file(const std::string& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + path + "'");
}

/// Pretty-printed JSON with a trailing newline; numbers use the shortest
/// representation that reads back to the same double.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json(std::string_view text, const std::string& what)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(what + ": invalid JSON: " + e.what(), 0);
    }
}

inline void require_schema(const Json& j, std::string_view expected)
{
    if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
        throw std::invalid_argument("JSON document has no \"schema\" field (expected \"" + std::string(expected) + "\")");
    }
    const auto& got = j["schema"].get_ref<const std::string&>();
    if (got != expected) {
        throw std::invalid_argument("unsupported schema \"" + got + "\" (expected \"" + std::string(expected) + "\")");
    }
}

namespace detail {

inline double number(const Json& j, const char* key)
{
    if (!j.contains(key)) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
    const Json& v = j.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string("field \"") + key + "\" must be a number");
    return v.get<double>();
}

/// NaN and infinities are written as null.
inline Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline double number_or_nan(const Json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return number(j, key);
}

inline std::vector<double> numbers(const Json& j)
{
    if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw std::invalid_argument("expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GaussianState
// ---------------------------------------------------------------------------

inline Json to_json(const GaussianState& state)
{
    Json mu = Json::array();
    for (int i = 0; i < 4; ++i) mu.push_back(state.mu()[i]);
    Json sigma = Json::array();
    for (int r = 0; r < 4; ++r) {
        Json row = Json::array();
        for (int c = 0; c < 4; ++c) row.push_back(state.sigma()(r, c));
        sigma.push_back(row);
    }
    return {{"schema", schema::kGaussianState}, {"convention", "vacuum=0.5"}, {"mu", mu}, {"sigma", sigma}};
}

inline GaussianState gaussian_state_from_json(const Json& j)
{
    require_schema(j, schema::kGaussianState);
    if (j.value("convention", std::string()) != "vacuum=0.5") {
        throw std::invalid_argument("GaussianState JSON: convention must be \"vacuum=0.5\"");
    }
    const auto mu = detail::numbers(j.at("mu"));
    if (mu.size() != 4) throw std::invalid_argument("GaussianState JSON: mu must have 4 entries");
    const Json& rows = j.at("sigma");
    if (!rows.is_array() || rows.size() != 4) throw std::invalid_argument("GaussianState JSON: sigma must be 4x4");
    Mat4 sigma;
    for (int r = 0; r < 4; ++r) {
        const auto row = detail::numbers(rows[static_cast<std::size_t>(r)]);
        if (row.size() != 4) throw std::invalid_argument("GaussianState JSON: sigma must be 4x4");
        for (int c = 0; c < 4; ++c) sigma(r, c) = row[static_cast<std::size_t>(c)];
    }
    for (int r = 0; r < 4; ++r) {
        for (int c = r + 1; c < 4; ++c) {
            if (std::abs(sigma(r, c) - sigma(c, r)) > 1e-12 * std::max(1.0, std::abs(sigma(r, c)))) {
                throw std::invalid_argument("GaussianState JSON: sigma is not symmetric");
            }
        }
    }
    return GaussianState(Vec4(mu[0], mu[1], mu[2], mu[3]), sigma);
}

/// 64-bit FNV-1a, used to fingerprint canonical JSON inputs.
inline std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// SqueezerParams and model fits
// ---------------------------------------------------------------------------

inline Json params_fields(const SqueezerParams& p)
{
    return {{"s", detail::finite_or_null(p.s)},         {"alpha", detail::finite_or_null(p.alpha)},
            {"beta", detail::finite_or_null(p.beta)},   {"phi1", detail::finite_or_null(p.phi1)},
            {"phi2", detail::finite_or_null(p.phi2)},   {"g1", detail::finite_or_null(p.g1)},
            {"g2", detail::finite_or_null(p.g2)}};
}

inline Json to_json(const SqueezerParams& p)
{
    Json j = params_fields(p);
    j["schema"] = schema::kSqueezerParams;
    return j;
}

inline SqueezerParams squeezer_params_from_json(const Json& j)
{
    require_schema(j, schema::kSqueezerParams);
    SqueezerParams p;
    p.s = detail::number(j, "s");
    p.alpha = detail::number(j, "alpha");
    p.beta = detail::number(j, "beta");
    p.phi1 = j.contains("phi1") ? detail::number(j, "phi1") : 0.0;
    p.phi2 = j.contains("phi2") ? detail::number(j, "phi2") : 0.0;
    p.g1 = j.contains("g1") ? detail::number(j, "g1") : 1.0;
    p.g2 = j.contains("g2") ? detail::number(j, "g2") : 1.0;
    p.validate();
    return p;
}

inline Json to_json(const ModelFit& fit)
{
    return {{"schema", schema::kModelFit},
            {"params", to_json(fit.params)},
            {"std_errors", params_fields(fit.std_errors)},
            {"gain_change_percent", {gain_change_percent(fit.params.g1), gain_change_percent(fit.params.g2)}},
            {"residual_rms", fit.residual_rms},
            {"n_residuals", fit.n_residuals},
            {"iterations", fit.iterations},
            {"used_simplex", fit.used_simplex}};
}

// ---------------------------------------------------------------------------
// Thermal calibration
// ---------------------------------------------------------------------------

inline Json to_json(const ThermalCalibration& c)
{
    Json channels = Json::array();
    for (const auto& ch : c.channels) channels.push_back({{"gain", ch.gain}, {"a0", ch.a0}, {"a2", ch.a2}});
    Json j = {{"schema", schema::kThermalCalibration}, {"channels", channels}, {"t_e_kelvin", c.t_e}, {"f_s_hz", c.f_s}};
    j["t_e_upper_bound"] = c.t_e_upper_bound ? Json(*c.t_e_upper_bound) : Json(nullptr);
    return j;
}

inline Json to_json(const ThermalFit& fit)
{
    Json j = to_json(fit.calibration);
    Json errors = Json::array();
    for (const auto& e : fit.std_errors) {
        errors.push_back({{"gain", detail::finite_or_null(e.gain)},
                          {"a0", detail::finite_or_null(e.a0)},
                          {"a2", detail::finite_or_null(e.a2)}});
    }
    j["channel_ids"] = fit.channel_ids;
    j["std_errors"] = errors;
    j["t_e_std_error"] = detail::finite_or_null(fit.t_e_std_error);
    j["relative_rss"] = fit.rss;
    j["dof"] = fit.dof;
    return j;
}

inline ThermalCalibration thermal_calibration_from_json(const Json& j)
{
    require_schema(j, schema::kThermalCalibration);
    ThermalCalibration c;
    const Json& channels = j.at("channels");
    if (!channels.is_array()) throw std::invalid_argument("calibration JSON: channels must be an array");
    for (const auto& ch : channels) {
        c.channels.push_back({detail::number(ch, "gain"), detail::number(ch, "a0"), detail::number(ch, "a2")});
    }
    c.t_e = detail::number(j, "t_e_kelvin");
    c.f_s = detail::number(j, "f_s_hz");
    if (j.contains("t_e_upper_bound") && !j["t_e_upper_bound"].is_null()) {
        c.t_e_upper_bound = detail::number(j, "t_e_upper_bound");
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Acquisition config and bootstrap report
// ---------------------------------------------------------------------------

inline Json to_json(const AcquisitionConfig& c)
{
    return {{"schema", schema::kAcquisition},
            {"sample_interval", c.sample_interval},
            {"detune1", c.detune1},
            {"detune2", c.detune2},
            {"samples_per_record", c.samples_per_record},
            {"n_records", c.n_records},
            {"seed", c.seed}};
}

inline AcquisitionConfig acquisition_from_json(const Json& j)
{
    require_schema(j, schema::kAcquisition);
    AcquisitionConfig c;
    c.sample_interval = detail::number(j, "sample_interval");
    c.detune1 = detail::number(j, "detune1");
    c.detune2 = detail::number(j, "detune2");
    c.samples_per_record = j.at("samples_per_record").get<std::uint32_t>();
    c.n_records = j.at("n_records").get<std::uint32_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline Json to_json(const BootstrapReport& r)
{
    return {{"schema", schema::kBootstrap},
            {"replicates", r.replicates},
            {"base_seed", r.base_seed},
            {"unphysical_replicates", r.unphysical_replicates},
            {"std", {{"e_w", r.std_e_w}, {"negativity", r.std_negativity}, {"delta_epr", r.std_delta_epr}}},
            {"values", {{"e_w", r.e_w}, {"negativity", r.negativity}, {"delta_epr", r.delta_epr}}}};
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

namespace detail {

/// Splits `text` into lines, tolerating CRLF and a missing final newline.
inline std::vector<std::string_view> lines(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
        pos = end + 1;
    }
    return out;
}

template <class T>
T parse_field(std::string_view field, std::size_t line, const char* column)
{
    T value{};
    const char* first = field.data();
    const char* last = first + field.size();
    if (!field.empty() && field.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty()) {
        throw ParseError(std::string("bad value '") + std::string(field) + "' in column " +
                             column,
                         line);
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) {
            throw ParseError(std::string("non-finite value in column ") + column, line);
        }
    }
    return value;
}

/// Splits a CSV row into exactly N fields (no quoting: all fields are numeric).
template <std::size_t N>
std::array<std::string_view, N> split_row(std::string_view line, std::size_t line_no)
{
    std::array<std::string_view, N> out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t comma = line.find(',', pos);
        const bool last = i + 1 == N;
        if (last != (comma == std::string_view::npos)) {
            throw ParseError("expected " + std::to_string(N) + " columns",
                             line_no);
        }
        out[i] = line.substr(pos, last ? std::string_view::npos : comma - pos);
        pos = comma + 1;
    }
    return out;
}

inline void expect_header(const std::vector<std::string_view>& rows, std::string_view header, const std::string& what)
{
    if (rows.empty()) throw ParseError(what + ": empty file", 1);
    if (rows.front() != header) {
        throw ParseError(what + ": expected header '" + std::string(header) + "'", 1);
    }
}

inline void append_number(std::string& out, const char* fmt, double v)
{
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, fmt, v);
    out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

inline std::string dataset_to_csv(const QuadratureDataset& data)
{
    data.check_layout();
    std::string out;
    out.reserve(64 * data.size() + 64);
    out.append(kDatasetHeader).push_back('\n');
    const std::uint32_t spr = data.samples_per_record();
    for (std::size_t i = 0; i < data.size(); ++i) {
        out += std::to_string(i / spr);
        out.push_back(',');
        out += std::to_string(i % spr);
        out.push_back(',');
        detail::append_number(out, "%.12g", data.theta1[i]);
        out.push_back(',');
        detail::append_number(out, "%.9g", data.w1[i]);
        out.push_back(',');
        detail::append_number(out, "%.12g", data.theta2[i]);
        out.push_back(',');
        detail::append_number(out, "%.9g", data.w2[i]);
        out.push_back('\n');
    }
    return out;
}

namespace detail {

/// Shared reader for the two six-column record tables (calibrated and raw).
inline QuadratureDataset parse_record_table(std::string_view text, std::string_view header, const std::string& what)
{
    const auto rows = lines(text);
    expect_header(rows, header, what);
    QuadratureDataset data;
    std::uint32_t spr = 0;
    std::size_t n = 0;
    for (std::size_t li = 1; li < rows.size(); ++li) {
        if (rows[li].empty() && li + 1 == rows.size()) break;
        const std::size_t line_no = li + 1;
        const auto f = split_row<6>(rows[li], line_no);
        const auto record = parse_field<std::uint32_t>(f[0], line_no, "record");
        const auto sample = parse_field<std::uint32_t>(f[1], line_no, "sample");
        if (record == 0 && sample == n) {
            spr = sample + 1;
        } else if (spr == 0 || record != n / spr || sample != n % spr) {
            throw ParseError(what + ": rows must be record-major with consecutive sample indices",
                             line_no);
        }
        data.theta1.push_back(parse_field<double>(f[2], line_no, "theta1"));
        data.w1.push_back(parse_field<double>(f[3], line_no, "w1"));
        data.theta2.push_back(parse_field<double>(f[4], line_no, "theta2"));
        data.w2.push_back(parse_field<double>(f[5], line_no, "w2"));
        ++n;
    }
    if (n == 0) throw ParseError(what + ": no data rows", 2);
    if (n % spr != 0) throw ParseError(what + ": last record is incomplete", rows.size());
    data.config.samples_per_record = spr;
    data.config.n_records = static_cast<std::uint32_t>(n / spr);
    return data;
}

}  // namespace detail

/// Reads a dataset CSV. Only the record layout is recovered into `config`;
/// acquisition rates are not stored in the CSV.
inline QuadratureDataset dataset_from_csv(std::string_view text)
{
    return detail::parse_record_table(text, kDatasetHeader, "dataset CSV");
}

/// Raw digitizer records (v1, v2 in place of w1, w2).
inline QuadratureDataset raw_records_from_csv(std::string_view text)
{
    return detail::parse_record_table(text, kRawHeader, "raw CSV");
}

// ---------------------------------------------------------------------------
// Binary dataset container: <path> holds little-endian f64 rows
// (record, sample, theta1, w1, theta2, w2); <path>.json holds the config.
// ---------------------------------------------------------------------------

inline constexpr int kBinaryColumns = 6;

namespace detail {
inline std::uint64_t to_little_endian(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0x00000000ffffffffull) << 32) | ((v & 0xffffffff00000000ull) >> 32);
        v = ((v & 0x0000ffff0000ffffull) << 16) | ((v & 0xffff0000ffff0000ull) >> 16);
        v = ((v & 0x00ff00ff00ff00ffull) << 8) | ((v & 0xff00ff00ff00ff00ull) >> 8);
    }
    return v;
}
}  // namespace detail

inline std::string binary_sidecar_path(const std::string& path) { return path + ".json"; }

inline void write_dataset_binary(const QuadratureDataset& data, const std::string& path)
{
    data.check_layout();
    std::vector<std::uint64_t> buf(data.size() * kBinaryColumns);
    const std::uint32_t spr = data.samples_per_record();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double row[kBinaryColumns] = {static_cast<double>(i / spr), static_cast<double>(i % spr),
                                            data.theta1[i], data.w1[i], data.theta2[i], data.w2[i]};
        for (int c = 0; c < kBinaryColumns; ++c) {
            buf[i * kBinaryColumns + c] = detail::to_little_endian(std::bit_cast<std::uint64_t>(row[c]));
        }
    }
    write_text_file(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size() * 8));
    Json side = {{"schema", schema::kBinaryDataset},
                 {"columns", {"record", "sample", "theta1", "w1", "theta2", "w2"}},
                 {"rows", data.size()},
                 {"byte_order", "little"},
                 {"acquisition", to_json(data.config)}};
    write_text_file(binary_sidecar_path(path), dump(side));
}

inline QuadratureDataset read_dataset_binary(const std::string& path)
{
    const Json side = parse_json(read_text_file(binary_sidecar_path(path)), binary_sidecar_path(path));
    require_schema(side, schema::kBinaryDataset);
    QuadratureDataset data;
    data.config = acquisition_from_json(side.at("acquisition"));
    const auto rows = side.at("rows").get<std::size_t>();
    if (rows != data.config.total_samples()) {
        throw std::invalid_argument("binary dataset: row count does not match acquisition config");
    }
    const std::string bytes = read_text_file(path);
    if (bytes.size() != rows * kBinaryColumns * 8) {
        throw std::invalid_argument("binary dataset: file size does not match the sidecar row count");
    }
    data.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double row[kBinaryColumns];
        for (int c = 0; c < kBinaryColumns; ++c) {
            std::uint64_t v;
            std::memcpy(&v, bytes.data() + (i * kBinaryColumns + c) * 8, 8);
            row[c] = std::bit_cast<double>(detail::to_little_endian(v));
        }
        data.theta1[i] = row[2];
        data.w1[i] = row[3];
        data.theta2[i] = row[4];
        data.w2[i] = row[5];
    }
    return data;
}

// ---------------------------------------------------------------------------
// Thermal sweep CSV
// ---------------------------------------------------------------------------

inline std::vector<ThermalSweepPoint> sweep_from_csv(std::string_view text)
{
    const auto rows = detail::lines(text);
    detail::expect_header(rows, kSweepHeader, "thermal sweep CSV");
    std::vector<ThermalSweepPoint> out;
    for (std::size_t li = 1; li < rows.size(); ++li) {
        if (rows[li].empty() && li + 1 == rows.size()) break;
        const std::size_t line_no = li + 1;
        const auto f = detail::split_row<4>(rows[li], line_no);
        ThermalSweepPoint p;
        p.channel = detail::parse_field<std::uint32_t>(f[0], line_no, "channel");
        p.t_fridge = detail::parse_field<double>(f[1], line_no, "t_fridge_kelvin");
        p.var_raw = detail::parse_field<double>(f[2], line_no, "var_raw");
        p.repeat_index = detail::parse_field<std::uint32_t>(f[3], line_no, "repeat_index");
        if (!(p.t_fridge > 0.0) || !(p.var_raw > 0.0)) {
            throw ParseError("temperature and variance must be positive",
                             line_no);
        }
        out.push_back(p);
    }
    if (out.empty()) throw ParseError("thermal sweep CSV: no data rows", 2);
    return out;
}

inline std::string sweep_to_csv(std::span<const ThermalSweepPoint> sweep)
{
    std::string out(kSweepHeader);
    out.push_back('\n');
    for (const auto& p : sweep) {
        out += std::to_string(p.channel);
        out.push_back(',');
        detail::append_number(out, "%.17g", p.t_fridge);
        out.push_back(',');
        detail::append_number(out, "%.17g", p.var_raw);
        out.push_back(',');
        out += std::to_string(p.repeat_index);
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binned variances CSV
// ---------------------------------------------------------------------------

inline std::string variances_to_csv(const BinnedVariances& binned)
{
    std::string out(kVariancesHeader);
    out.push_back('\n');
    for (const auto& b : binned.bins) {
        out += std::to_string(b.sample);
        for (double v : {b.theta1, b.theta2, b.var_w1, b.var_w2, binned.joint(b)}) {
            out.push_back(',');
            detail::append_number(out, "%.17g", v);
        }
        out.push_back(',');
        out += std::to_string(b.count);
        out.push_back('\n');
    }
    return out;
}

}  // namespace cvent::io
