#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/chsh.hpp"
#include "bellsim/diagnostics.hpp"
#include "bellsim/fit.hpp"

/// Count tables (CSV), configurations and results (JSON). Layouts are
/// documented in docs/formats.md.
namespace bellsim::io {

inline constexpr std::string_view kCountTableHeader =
    "alpha_deg,beta_deg,duration_s,n_a,n_b,n_coinc";
inline constexpr std::string_view kConfigSchema = "bellsim.config/1";
inline constexpr std::string_view kResultSchema = "bellsim.result/1";

// ---- count tables -------------------------------------------------------

/// Parses CSV text. Errors carry the 1-based line number.
std::vector<sim::CountRecord> parse_counts(std::string_view text);
std::string format_counts(std::span<const sim::CountRecord> records);

std::vector<sim::CountRecord> load_counts(const std::filesystem::path& path);
void save_counts(const std::filesystem::path& path, std::span<const sim::CountRecord> records);

// ---- provenance ---------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
/// "sha256:<hex>" of the canonical CSV serialization of the records.
std::string content_digest(std::span<const sim::CountRecord> records);

// ---- configuration ------------------------------------------------------

/// Everything needed to stand up a simulated bench.
struct SessionConfig {
  sim::ApparatusConfig apparatus = default_apparatus();
  sim::PhotonSource source{0.0, 0.9};
  sim::BenchSettings initial{45.0, 0.0, 0.0, 0.0};
  ChshAngles angles = ChshAngles::canonical();
  double duration_s = 15.0;

  /// Rates on the scale of the classic 15 s CHSH count table.
  static sim::ApparatusConfig default_apparatus();
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

/// Unknown fields are rejected; missing fields take SessionConfig defaults.
/// Errors name the offending field path, e.g. "apparatus.pair_rate".
SessionConfig parse_config(const nlohmann::json& doc);
SessionConfig parse_config_text(std::string_view text);
SessionConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const SessionConfig& config);

// ---- values -------------------------------------------------------------

nlohmann::json to_json(const sim::CountRecord& record);
sim::CountRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const sim::BenchSettings& settings);
nlohmann::json to_json(const est::ChshResult& result);
nlohmann::json to_json(const est::StateDiagnostics& diagnostics);
nlohmann::json to_json(const est::FitResult& fit);

// ---- results ------------------------------------------------------------

using ResultDocument = std::variant<est::ChshResult, est::StateDiagnostics, est::FitResult>;

struct LoadedResult {
  ResultDocument result;
  std::string inputs_digest;
};

nlohmann::json result_document(const ResultDocument& result, std::string_view inputs_digest);
void save_result(const ResultDocument& result, const std::filesystem::path& path,
                 std::string_view inputs_digest);
LoadedResult parse_result(const nlohmann::json& doc);
LoadedResult load_result(const std::filesystem::path& path);

}  // namespace bellsim::io
