#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "midway/dag.hpp"
#include "midway/error.hpp"
#include "midway/table.hpp"

namespace midway::app {

std::string version();

struct InputPaths {
  std::string data, schema, dag;
};

// Loaded inputs, immutable after load(); shared by the CLI and the service.
class Workspace {
 public:
  static Workspace load(const InputPaths& paths);
  static Workspace from_memory(std::optional<PatientTable> table, std::optional<Dag> dag);

  const std::optional<PatientTable>& table() const noexcept { return table_; }
  const std::optional<Dag>& dag() const noexcept { return dag_; }
  const PatientTable& require_table() const;
  const Dag& require_dag() const;
  // Paths and FNV-1a hashes of the loaded files.
  const nlohmann::ordered_json& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::optional<PatientTable> table_;
  std::optional<Dag> dag_;
  nlohmann::ordered_json fingerprint_ = nlohmann::ordered_json::object();
};

struct Output {
  std::string body;  // JSON, or CSV for simulate
  std::string content_type = "application/json";
  std::string text;  // human-readable summary
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  int exit_code = 0;
};

inline constexpr const char* kCommands[] = {"identify", "positivity", "match", "monitor", "simulate"};

// Requests are JSON objects; unknown keys are rejected.
Output identify(const Workspace& ws, const nlohmann::json& request);
Output positivity(const Workspace& ws, const nlohmann::json& request);
Output match(const Workspace& ws, const nlohmann::json& request);
Output monitor(const Workspace& ws, const nlohmann::json& request);
Output simulate(const nlohmann::json& request);
Output run(const std::string& command, const Workspace& ws, const nlohmann::json& request);

std::string dag_to_json(const Dag& g);
std::string manifest(const std::string& command, const nlohmann::json& request, const Workspace& ws,
                     const Output& out);
std::string error_to_json(const Error& e);
int http_status(const Error& e);

}  // namespace midway::app
