#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "benchforge/json_util.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

struct DedupConfig {
  double threshold = 0.90;
  void validate() const;  // finite and within [-1, 1]
};

/// Question stem, one space, then the text of the correct option.
std::string dedup_key(const McqCandidate& c);

/// Throws ValidationError on a zero vector or mismatched dimensions.
double cosine(const std::vector<double>& u, const std::vector<double>& v);

struct DedupMatch {
  std::size_t removed = 0;  // input index
  std::size_t matched = 0;  // earlier retained index with the highest similarity
  double similarity = 0.0;
};

struct FilterResult {
  std::vector<std::size_t> retained;  // input order
  std::vector<DedupMatch> removed;
};

/// Sequential pass: an item is dropped when its best similarity against the
/// items retained so far is strictly above the threshold.
FilterResult greedy_filter(const std::vector<std::vector<double>>& embeddings, const DedupConfig& cfg);

struct DedupOutcome {
  std::vector<BenchmarkTask> retained;
  Json report;
};

/// Per-chapter filtering of `tasks` (chapter = book_id + chapter_id, order of
/// first appearance), embedding the dedup keys through `embedder`.
DedupOutcome dedup_tasks(const std::vector<BenchmarkTask>& tasks, Gateway& embedder, const DedupConfig& cfg);

}  // namespace benchforge
