#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "benchforge/corpus.hpp"
#include "benchforge/error.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/prompts.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

enum class StageId {
  KnowledgeStructuring,
  SeedGeneration,
  SelfContainment,
  TraceIntegrity,
  Conciseness,
  SourceRefRemoval,
  Soundness,
  FinalVerification,
  Repair
};

/// Tag suffix used in call tags and audit records ("seed", "soundness", ...).
std::string_view stage_name(StageId s);

inline constexpr std::array<StageId, 5> kRefinementStages{StageId::SelfContainment, StageId::TraceIntegrity,
                                                          StageId::Conciseness, StageId::SourceRefRemoval,
                                                          StageId::Soundness};

/// Raised when a chapter's knowledge summary cannot be obtained.
class UnstructurableChapter : public Error {
 public:
  using Error::Error;
};

/// "<book_id>.<chapter_id>"; chapter ids repeat across books.
std::string chapter_key(const ChapterDoc& c);

struct Agents {
  Gateway* designer = nullptr;
  Gateway* verifier = nullptr;
};

struct PipelineConfig {
  int max_repairs = 3;
  int quota_per_category = 5;
  std::vector<BloomDifficultyPair> categories = default_target_categories();
  /// Easy/Medium targets are refused unless set.
  bool allow_non_hard = false;
  std::uint64_t seed = 0;
  std::vector<std::string> exemplars;
  std::size_t exemplars_per_prompt = 3;
  double designer_temperature = 0.0;
  double verifier_temperature = 0.0;
  std::optional<int> max_output_tokens;

  /// Throws ValidationError on invalid pairings, non-Hard targets without
  /// allow_non_hard, negative budgets or zero quota.
  void validate() const;
};

struct GenerationJob {
  const ChapterDoc* chapter = nullptr;
  const ChapterKnowledge* knowledge = nullptr;
  BloomDifficultyPair target;
  std::vector<std::string> exemplars;
  std::vector<McqCandidate> accepted_so_far;
  int retry_budget = 3;
  std::string candidate_id;
};

/// One agent interaction in a candidate's audit trail.
struct StageRecord {
  std::string stage;
  int cycle = 0;  // repairs performed before this call
  std::string tag;
  std::vector<Message> prompt;
  std::string response;
  Json parsed;  // candidate (agent form) or verifier report; null if unparseable
  std::vector<std::string> diagnostics;

  Json to_json() const;
};

enum class CandidateStatus { Accepted, DiscardedRetry, DiscardedTransport };
std::string_view to_string(CandidateStatus s);

struct CandidateOutcome {
  std::string candidate_id;
  BloomDifficultyPair category;
  int ordinal = 0;
  CandidateStatus status = CandidateStatus::DiscardedRetry;
  std::optional<McqCandidate> candidate;  // set when accepted
  int repairs = 0;
  int verifications = 0;
  int verification_passes = 0;
  std::string discard_reason;
  std::vector<StageRecord> trail;

  /// Stage names in call order, for audit and ordering checks.
  std::vector<std::string> stage_sequence() const;
};

struct BloomStats {
  std::uint64_t candidates = 0;
  std::uint64_t accepted = 0;
  std::uint64_t repairs = 0;
  std::uint64_t verifications = 0;
  std::uint64_t verification_passes = 0;
  bool operator==(const BloomStats&) const = default;
};

struct RunLedger {
  std::uint64_t seed_count = 0;
  std::uint64_t pass_first = 0;
  std::uint64_t repaired = 0;
  std::uint64_t discarded_retry = 0;
  std::uint64_t discarded_transport = 0;
  std::uint64_t dedup_removed = 0;
  std::uint64_t final_count = 0;
  std::map<std::string, BloomStats> per_bloom;  // keyed by Bloom level name

  /// Counts one finished candidate in exactly one outcome bucket.
  void record(const CandidateOutcome& o);
  void add(const RunLedger& other);
  /// Sets dedup_removed and recomputes final_count.
  void set_dedup_removed(std::uint64_t n);
  bool identities_hold() const;

  Json to_json() const;
  static RunLedger from_json(const Json& j);
  bool operator==(const RunLedger&) const = default;
};

struct ChapterResult {
  std::string chapter_key;
  std::vector<CandidateOutcome> outcomes;
  RunLedger ledger;
};

class Pipeline {
 public:
  Pipeline(const PromptLibrary& prompts, Agents agents, PipelineConfig config);

  const PipelineConfig& config() const { return cfg_; }

  /// One designer call; throws UnstructurableChapter when the reply cannot be
  /// parsed or the transport budget is exhausted.
  ChapterKnowledge structure_knowledge(const ChapterDoc& chapter, StageRecord* audit = nullptr) const;

  /// Messages for the seed-generation call (exposed for prompt checks).
  std::vector<Message> seed_prompt(const GenerationJob& job) const;

  /// Full lifecycle of one candidate: seed, refinement stages, final
  /// verification, repair loop.
  CandidateOutcome run_candidate(const GenerationJob& job) const;

  /// All categories x quota for one chapter, sequentially, threading the
  /// accepted questions into later prompts.
  ChapterResult run_chapter(const ChapterDoc& chapter, const ChapterKnowledge& knowledge) const;

  /// Exemplars for a candidate, drawn with its own RNG stream.
  std::vector<std::string> pick_exemplars(const std::string& candidate_id) const;

 private:
  struct Attempt;
  Attempt call_candidate_stage(StageId stage, const std::string& tag_stage, std::vector<Message> prompt,
                               const McqCandidate* base, const GenerationJob& job, int cycle,
                               CandidateOutcome& out) const;
  std::vector<Message> refinement_prompt(StageId stage, const McqCandidate& c) const;
  std::vector<Message> verification_prompt(const McqCandidate& c) const;
  std::vector<Message> repair_prompt(bool format_only, const std::string& previous_output,
                                     const VerifierReport& report, const McqCandidate& c,
                                     const GenerationJob& job) const;
  std::string guidance(const BloomDifficultyPair& p) const;

  const PromptLibrary& prompts_;
  Agents agents_;
  PipelineConfig cfg_;
};

/// Rendered list of prior questions ("1. ...").
std::string render_previous_questions(const std::vector<McqCandidate>& prior);

/// True when question/options/answer/trace/solution are byte-identical.
bool same_content(const McqCandidate& a, const McqCandidate& b);

}  // namespace benchforge
