#pragma once

// Headline analysis of an estimated state: witness, negativity, physicality
// and an optional parametric bootstrap, with provenance for exact re-runs.

#include <cstdint>
#include <optional>
#include <string>

#include "cvent/estimator.hpp"
#include "cvent/gaussian_core.hpp"
#include "cvent/io.hpp"

namespace cvent {

inline constexpr const char* kToolVersion = "1.0.0";

struct Provenance {
    std::string input_hash;  ///< FNV-1a of the canonical state JSON, hex
    std::optional<std::uint64_t> seed;
    std::string tool_version = kToolVersion;
};

struct BootstrapRequest {
    AcquisitionConfig config;  ///< config.seed is the base seed
    std::uint32_t replicates = 20;
};

struct AnalysisReport {
    GaussianState state = vacuum_state();
    WitnessResult witness{};
    NegativityResult negativity{};
    PhysicalityCheck physicality{};
    bool entangled = false;
    std::optional<BootstrapReport> bootstrap;
    std::optional<AcquisitionConfig> bootstrap_config;
    Provenance provenance;
};

/// Entanglement is claimed only for a physical state whose partial
/// transpose violates the uncertainty bound.
inline AnalysisReport analyze(const GaussianState& state, const std::optional<BootstrapRequest>& bootstrap = {})
{
    AnalysisReport r;
    r.state = state;
    r.physicality = check_physicality(state.sigma());
    r.witness = entanglement_witness(state.sigma());
    r.negativity = negativity(state.sigma());
    r.entangled = r.physicality.physical && r.negativity.negativity > 0.0;
    r.provenance.input_hash = io::hex64(io::fnv1a64(io::to_json(state).dump()));
    if (bootstrap) {
        r.bootstrap = parametric_bootstrap(state, bootstrap->config, bootstrap->replicates);
        r.bootstrap_config = bootstrap->config;
        r.provenance.seed = bootstrap->config.seed;
    }
    return r;
}

namespace io {

inline Json to_json(const AnalysisReport& r)
{
    Json j = {{"schema", schema::kAnalysis},
              {"state", to_json(r.state)},
              {"witness",
               {{"e_w", r.witness.e_w},
                {"a_star", detail::finite_or_null(r.witness.a_star)},
                {"phase_star", detail::finite_or_null(r.witness.phase_star)},
                {"delta_epr", r.witness.delta_epr},
                {"grid_fallback", r.witness.grid_fallback}}},
              {"negativity",
               {{"negativity", r.negativity.negativity},
                {"nu_tilde", {r.negativity.nu_tilde.nu1, r.negativity.nu_tilde.nu2}},
                {"nu", {detail::finite_or_null(r.negativity.nu.nu1), detail::finite_or_null(r.negativity.nu.nu2)}}}},
              {"physical", r.physicality.physical},
              {"min_symplectic_eigenvalue", detail::finite_or_null(r.physicality.min_nu)},
              {"entangled", r.entangled}};
    j["bootstrap"] = r.bootstrap ? to_json(*r.bootstrap) : Json(nullptr);
    j["bootstrap_acquisition"] = r.bootstrap_config ? to_json(*r.bootstrap_config) : Json(nullptr);
    j["provenance"] = {{"input_hash", r.provenance.input_hash},
                       {"seed", r.provenance.seed ? Json(*r.provenance.seed) : Json(nullptr)},
                       {"tool_version", r.provenance.tool_version}};
    return j;
}

/// Accepts a state document or an analysis report (its embedded state).
inline GaussianState state_from_document(const Json& j)
{
    if (j.is_object() && j.value("schema", std::string()) == schema::kAnalysis) {
        return gaussian_state_from_json(j.at("state"));
    }
    return gaussian_state_from_json(j);
}

}  // namespace io

}  // namespace cvent
