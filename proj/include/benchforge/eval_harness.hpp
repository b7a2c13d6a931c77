#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "benchforge/corpus.hpp"
#include "benchforge/json_util.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

struct EvalRecord {
  std::string model_id;
  std::string task_id;
  std::string raw_output;
  std::optional<char> parsed_choice;
  bool is_correct = false;
  bool invalid = false;
  std::string note;  // "transport: ..." when the query failed

  bool transport_failed() const { return note.rfind("transport", 0) == 0; }
  Json to_json() const;
  static EvalRecord from_json(const Json& j);
  bool operator==(const EvalRecord&) const = default;
};

/// Default zero-shot template with {statement} and {options}.
std::string default_mcq_template();

/// "A. text" lines in A..E order.
std::string render_option_lines(const McqCandidate& c);

std::string render_mcq_prompt(const BenchmarkTask& task, std::string_view tmpl);

/// Answer extraction. Returns nullopt for invalid output.
std::optional<char> parse_choice(std::string_view raw);

/// Scores a raw model answer against a task.
EvalRecord score_output(const std::string& model_id, const BenchmarkTask& task, std::string raw);

struct EvalOptions {
  std::string prompt_template = default_mcq_template();
  double temperature = 0.0;
  std::optional<int> max_output_tokens;
  std::size_t concurrency = 1;
  /// Per-model record file; existing records are reused, failures retried.
  std::filesystem::path records_path;
};

/// One record per task, in benchmark order.
std::vector<EvalRecord> evaluate_model(Gateway& model, const std::string& model_name,
                                       const std::vector<BenchmarkTask>& benchmark, const EvalOptions& opts);

/// Last record per task wins.
std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path);

struct SliceStat {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  std::uint64_t invalid = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(const SliceStat&) const = default;
};

/// Accuracy per (model, slice); slices are "overall", "area:<id>",
/// "competency:<id>" and "bloom:<level>".
struct AccuracyTable {
  std::vector<std::string> models;  // sorted
  std::vector<std::string> slices;  // overall, areas, competencies, blooms (taxonomy order)
  std::map<std::string, std::map<std::string, SliceStat>> cells;  // model -> slice -> stat

  const SliceStat& at(const std::string& model, const std::string& slice) const;
  std::string to_csv() const;
  Json to_json() const;
};

/// Resolves the competency of a task (by id, then by display name).
const Competency& task_competency(const BenchmarkTask& task, const Taxonomy& taxonomy);

/// Throws ValidationError when a record's task_id is not in the benchmark or
/// a task's competency cannot be resolved.
AccuracyTable aggregate(const std::vector<EvalRecord>& records, const std::vector<BenchmarkTask>& benchmark,
                        const Taxonomy& taxonomy);

/// Formats a real for CSV output with fixed precision.
std::string format_real(double v, int digits = 6);
std::string csv_field(std::string_view s);

}  // namespace benchforge
