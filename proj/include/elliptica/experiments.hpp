#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace elliptica {

using Json = nlohmann::ordered_json;

const char* version();

struct ExperimentSpec {
  std::string id;
  std::string reference;  // the result the experiment reproduces
  std::string summary;
  Json defaults;          // every accepted parameter with its default
  bool stochastic = false;
};

const std::vector<ExperimentSpec>& experiment_catalog();
const ExperimentSpec& experiment_spec(const std::string& id);  // ConfigParseError naming the valid ids
std::string catalog_text();

struct Assertion {
  std::string name;
  std::string invariant;  // module invariant the assertion checks
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct ExperimentOutput {
  Json report;  // schema "1"; deterministic for a fixed config and seed
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  double elapsed_seconds = 0.0;

  bool passed() const;
};

Json parse_config(const std::string& text);
// Defaults merged with the config; unknown keys or mistyped values throw ConfigParseError.
Json resolve_parameters(const Json& config, std::optional<std::uint64_t> seed = std::nullopt);
ExperimentOutput run_experiment(const Json& config, std::optional<std::uint64_t> seed = std::nullopt);

// Writes report.json, metadata.json and the CSV/JSON tables into out_dir.
// Returns 0 when every assertion passes, 2 when one fails, 1 on error.
int run_to_directory(const std::string& config_path, const std::string& out_dir,
                     std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err);

}  // namespace elliptica
