#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funloc/diagnostics.hpp"
#include "funloc/experiments.hpp"

namespace funloc {

inline constexpr const char* kToolVersion = "funloc 0.3.0";

struct LoadedConfig {
    ExperimentConfig config;
    std::vector<std::string> notices;  ///< canonicalisation performed (e.g. sorted n_grid)
};

/// Validates and fills defaults. Unknown keys, missing required keys and ill-typed values
/// raise ConfigError naming the JSON path (e.g. "noise.sigma").
LoadedConfig parse_config(const nlohmann::json& doc);
LoadedConfig load_config(const std::filesystem::path& path);

/// Fully-defaulted canonical form; keys are emitted sorted.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// SHA-256 hex of the canonical serialisation.
std::string config_digest(const ExperimentConfig& config);
std::string sha256_hex(const std::string& bytes);

/// 17 significant digits, round-trip exact.
std::string format_double(double v);

struct RunManifest {
    std::string tool_version;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string timestamp;
    std::vector<std::string> files;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& out_dir);

/// results.csv, summary.json, plotdata.csv and manifest.json in out_dir. Nothing is written
/// when the result has no rows.
RunManifest write_results(const RateStudyResult& result, const std::filesystem::path& out_dir);

std::string results_csv(const RateStudyResult& result);
nlohmann::json summary_json(const RateStudyResult& result);
std::string plotdata_csv(const RateStudyResult& result);

/// Parses a results.csv back into rows (arm, n, J, K and the statistics; delta is not stored).
std::vector<RatePoint> read_results_csv(const std::filesystem::path& path);

nlohmann::json decomposition_to_json(const DecompositionReport& r);
nlohmann::json bounds_to_json(const BoundsReport& r);
nlohmann::json conditions_to_json(const ConditionCheck& c);
nlohmann::json estimate_to_json(const EstimateResult& r);
nlohmann::json gamma_to_json(const GammaDiagonalReport& r);
/// Decomposition and bounds fields side by side, gamma report under "gamma_diagonal".
nlohmann::json diagnose_to_json(const DiagnoseResult& r);

/// Dataset CSV with header "y,coeff1,...,coeffL[,tail_norm_sq]".
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
/// Same, but curves as values on an N-point midpoint grid: header "y,t0,...,t{N-1}".
void write_dataset_grid_csv(const std::filesystem::path& path, const Dataset& data, const Basis& basis,
                            std::size_t grid_points);

/// Reads either dataset layout; grid curves are projected on the first grid_L basis functions
/// (0: N/4).
Dataset read_dataset_csv(const std::filesystem::path& path, const Basis& basis, int grid_L = 0);

/// Site from a CSV file (coefficient header, grid header, or a headerless row of grid values)
/// or, when `spec` is not a file, from inline comma-separated coefficients.
FunctionVec read_site(const std::string& spec, const Basis& basis, int grid_L = 0);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace funloc
