#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saan/harness.hpp"

namespace saan {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);  // throws Format

// Dataset text format:
//   # saan-dataset input_dim=<D> manifest_hash=<hex>
//   session,label,split,x0,...,x{D-1}
//   0,3,train,0.25,...
void write_dataset(std::ostream& out, const Dataset& data, const std::string& manifest_hash);
Dataset read_dataset(std::istream& in);  // throws Format

// A manifest fixes every input of a run. The "outputs" section names
// artifact locations and is left out of the hash.
struct RunManifest {
  ExperimentConfig experiment;
  std::string output_dir = "saan_out";
  std::string tool_version = kToolVersion;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
// Strict: every field is required and unknown keys are rejected. Errors are
// InvalidConfig naming the field path.
RunManifest manifest_from_json(const nlohmann::json& j);
// Hex SHA-256 of the compact dump, outputs section removed.
std::string manifest_hash(const RunManifest& manifest);

nlohmann::json checkpoint_to_json(const TrainedState& state, const Classifier& classifier,
                                  SessionIndex session, std::uint64_t seed,
                                  const std::string& manifest_hash);

struct Checkpoint {
  TrainedState state;
  Classifier classifier;
  SessionIndex session = 0;
  std::uint64_t seed = 0;
  std::string manifest_hash;
};
Checkpoint checkpoint_from_json(const nlohmann::json& j);

// Line-delimited records: one "manifest" record, one "session" record per
// session, one "summary" record. Every record carries the manifest hash.
void write_results_jsonl(std::ostream& out, const RunManifest& manifest,
                         const ExperimentResult& result);
// Flat accuracy curve: a "# manifest_hash=" line, a header, one row per session.
void write_results_csv(std::ostream& out, const RunManifest& manifest,
                       const ExperimentResult& result);

struct AblationRow {
  std::string method;
  MetricsReport metrics;
};
void write_ablation_jsonl(std::ostream& out, const RunManifest& manifest,
                          const std::vector<AblationRow>& rows);
void write_ablation_csv(std::ostream& out, const RunManifest& manifest,
                        const std::vector<AblationRow>& rows);

struct LoadedResults {
  RunManifest manifest;
  std::string manifest_hash;
  std::vector<nlohmann::json> records;
};
// Rejects (ManifestMismatch) a file whose records disagree with the hash of
// its embedded manifest, or with `expected_hash` when that is non-empty.
LoadedResults load_results(std::istream& in, const std::string& expected_hash = "");

}  // namespace saan
