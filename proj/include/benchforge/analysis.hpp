#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "benchforge/corpus.hpp"
#include "benchforge/eval_harness.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/prompts.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

struct CompetencyDistribution {
  std::map<std::string, std::uint64_t> counts;  // competency_id -> count
  std::size_t N = 0;                            // taxonomy competency count
};

/// H / log N over the counts; zero counts contribute nothing but N counts
/// every competency. Throws ValidationError when N < 2, the total is zero or
/// more distinct competencies are counted than N allows.
double normalized_entropy(const std::vector<std::uint64_t>& counts, std::size_t N);
double normalized_entropy(const CompetencyDistribution& d);

/// Counts tasks per competency; every task must resolve in the taxonomy.
CompetencyDistribution distribution_of(const std::vector<BenchmarkTask>& benchmark, const Taxonomy& taxonomy);

using ModelAccuracyVector = std::map<std::string, double>;

/// 1 - max accuracy. Throws ValidationError on an empty vector.
double difficulty(const ModelAccuracyVector& acc);
/// Mean absolute deviation. Throws ValidationError on an empty vector.
double separability(const ModelAccuracyVector& acc);
double difficulty(const std::vector<double>& acc);
double separability(const std::vector<double>& acc);

/// Ranks starting at 1; ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Pearson correlation of average ranks; nullopt when either side is
/// constant. Throws ValidationError for fewer than 2 values or length mismatch.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);
/// Same, over the shared model set (throws when the key sets differ).
std::optional<double> spearman(const ModelAccuracyVector& x, const ModelAccuracyVector& y);

std::map<std::string, std::optional<double>> correlation_profile(
    const ModelAccuracyVector& overall, const std::map<std::string, ModelAccuracyVector>& per_competency);

/// Per-competency accuracy vectors from an accuracy table.
std::map<std::string, ModelAccuracyVector> competency_vectors(const AccuracyTable& table);
/// Per model, the mean of its per-competency accuracies.
ModelAccuracyVector macro_overall_vector(const AccuracyTable& table);
/// Per model, the "overall" slice accuracy.
ModelAccuracyVector overall_accuracy(const AccuracyTable& table);

struct Classification {
  std::string area_id;
  std::string competency_id;
  int off_list_retries = 0;
};

/// Two-stage classification: area first, then a competency of that area.
/// Each stage accepts only offered identifiers and asks once more after an
/// off-list reply; a second off-list reply throws ParseError.
Classification classify_external_problem(const std::string& problem_text, const Taxonomy& taxonomy,
                                         Gateway& classifier, const PromptLibrary& prompts,
                                         const std::string& tag_prefix);

struct ReviewSamples {
  std::vector<std::string> uniform;
  std::vector<std::string> incorrectly_solved;
  std::size_t incorrect_pool_size = 0;
  Json to_json() const;
};

/// Uniform sample of ceil(fraction * n) task ids and a shuffled sample of
/// tasks missed by at least one frontier model (all of them unless capped).
ReviewSamples select_review_samples(const std::vector<BenchmarkTask>& benchmark,
                                    const std::map<std::string, std::vector<EvalRecord>>& records_by_model,
                                    double fraction, const std::set<std::string>& frontier_models,
                                    std::uint64_t rng_seed, std::optional<std::size_t> incorrect_cap = std::nullopt);

}  // namespace benchforge
