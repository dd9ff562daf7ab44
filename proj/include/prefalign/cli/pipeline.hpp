#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefalign/cli/config.hpp"
#include "prefalign/common/error.hpp"
#include "prefalign/corpus/annotator.hpp"

namespace prefalign::cli {

/// A stage failed; what() carries the stage name and the cause.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Pipeline stages in execution order. "make-toy" is an optional first
/// stage that writes a synthetic corpus.
const std::vector<std::string>& pipeline_stages();
/// Comma-separated names or "all" (every stage except make-toy). The result
/// is put in pipeline order.
std::vector<std::string> parse_stage_list(const std::string& list);

std::uint64_t stage_seed(std::uint64_t global_seed, const std::string& stage);

/// 64-bit FNV-1a of the file bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Append-only record of stage runs in <run_dir>/manifest.jsonl.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path run_dir);
  /// One line: stage, seed, config hash, version, inputs and outputs with
  /// their hashes. Paths are stored relative to the run directory when
  /// they lie inside it.
  void record(const std::string& stage, std::uint64_t seed, const std::string& config_hash,
              const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs);
  std::vector<nlohmann::json> entries() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path run_dir_;
  std::filesystem::path path_;
};

/// Mock annotator (and the network switched off) in mock mode, otherwise
/// the HTTP backend.
std::unique_ptr<corpus::Annotator> make_annotator(const RunConfig& cfg);

/// Runs one stage; throws StageError.
void run_stage(const RunConfig& cfg, const std::string& stage);
/// Runs stages in pipeline order. Returns 0 when all succeed, 1 otherwise
/// (the failure is logged; earlier outputs stay on disk).
int run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages);

/// Gap experiment: writes gap.csv, gap_summary.csv and one SVG per (n, beta)
/// into cfg.bench_dir and logs the summary. Returns 0 when every bound holds.
int theorybench_cmd(const RunConfig& cfg);

/// SVG plots from existing run outputs: preference-training curves and, if
/// present, the bench scatter. Returns 0 when at least one plot was written.
int plot_cmd(const RunConfig& cfg);

}  // namespace prefalign::cli
