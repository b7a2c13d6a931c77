#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "benchforge/json_util.hpp"

namespace benchforge {

enum class BloomLevel { Remember, Understand, Apply, Analyze, Evaluate, Create };
enum class Difficulty { Easy, Medium, Hard };

std::string_view to_string(BloomLevel b);
std::string_view to_string(Difficulty d);

/// Accepts the bare token ("Apply", case-insensitive) or the long
/// descriptive form stored in benchmark files ("Apply - Use knowledge ...").
std::optional<BloomLevel> parse_bloom(std::string_view text);
std::optional<Difficulty> parse_difficulty(std::string_view text);

/// Long descriptive strings used in exported benchmark records.
std::string_view bloom_description(BloomLevel b);
std::string_view difficulty_description(Difficulty d);
std::string bloom_long_form(BloomLevel b);
std::string difficulty_long_form(Difficulty d);

bool is_valid_pairing(BloomLevel bloom, Difficulty difficulty);

struct BloomDifficultyPair {
  BloomLevel bloom = BloomLevel::Apply;
  Difficulty difficulty = Difficulty::Hard;

  bool valid() const { return is_valid_pairing(bloom, difficulty); }
  /// "Hard-Apply" style name; also used as a path component.
  std::string name() const;
  /// Parses "Hard-Apply", "hard_apply" or "Apply/Hard". Throws ValidationError.
  static BloomDifficultyPair parse(std::string_view text);

  bool operator==(const BloomDifficultyPair&) const = default;
};

/// The four Hard categories used for the released benchmarks.
std::vector<BloomDifficultyPair> default_target_categories();

struct Violation {
  std::string code;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct GraphNode {
  std::string id;
  std::string content;
  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::string from;
  std::string to;
  std::string operation;
  bool operator==(const GraphEdge&) const = default;
};

struct SolutionGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  static SolutionGraph from_json(const Json& j);  // throws ParseError on shape errors
  Json to_json() const;
  bool operator==(const SolutionGraph&) const = default;
};

/// Empty iff ids are unique, every edge endpoint resolves, there is at least
/// one node and the graph is acyclic. Cycle violations name every node that
/// lies on a cycle.
std::vector<Violation> validate_solution_graph(const SolutionGraph& g);

struct Provenance {
  std::string book_id;
  std::string chapter_id;
  std::string competency_id;
  bool operator==(const Provenance&) const = default;
};

inline constexpr std::string_view kNoneOfTheAbove = "None of the above";
inline constexpr std::array<char, 5> kOptionLabels{'A', 'B', 'C', 'D', 'E'};

struct McqCandidate {
  std::string question;
  std::map<char, std::string> options;
  std::string correct_answer;
  SolutionGraph solution_graph;
  std::string complete_solution;
  BloomLevel bloom = BloomLevel::Apply;
  Difficulty difficulty = Difficulty::Hard;
  Provenance provenance;
  /// Unrecognised top-level fields from agent output, kept for round-trips.
  Json extras = Json::object();

  const std::string* option(char label) const;
  bool operator==(const McqCandidate&) const = default;
};

std::vector<Violation> validate_candidate(const McqCandidate& c);

/// Agent-facing JSON (solution_graph, question, options, correct_answer,
/// complete_solution, then extras).
Json to_agent_json(const McqCandidate& c);

/// Parses agent output. Fields missing from `doc` are taken from `base` when
/// given (repair prompts may omit the trace); otherwise they are required.
/// Throws ParseError for structural problems (non-letter option keys,
/// wrong JSON types, missing required fields).
McqCandidate candidate_from_agent_json(const Json& doc, const McqCandidate* base = nullptr);

/// Finds the first balanced JSON object in `raw` after stripping code fences
/// and parses it strictly. Throws ParseError.
Json extract_json(std::string_view raw);

/// One record of a benchmark JSONL file.
struct BenchmarkTask {
  std::string task_id;
  std::string task_statement;  // verbatim, may end with an "Options:" block
  std::string task_type = "multiple_choice";
  McqCandidate mcq;            // mcq.question is the stem
  std::string competency;      // display name
  std::string area_name;
  std::string domain;
  std::string book_name;
  std::string difficulty_text;  // as stored on disk
  std::string bloom_text;
  Json extras = Json::object();

  static BenchmarkTask from_candidate(std::string task_id, const McqCandidate& c, std::string competency_name,
                                      std::string area_name, std::string domain, std::string book_name);
  static BenchmarkTask from_json(const Json& j);  // throws ParseError / ValidationError
  Json to_json() const;

  /// Question text without a trailing options listing.
  const std::string& stem() const { return mcq.question; }
  bool operator==(const BenchmarkTask&) const = default;
};

/// "Options:\nA. ...\n...\nE. None of the above" block appended to stems on export.
std::string render_options_block(const McqCandidate& c);

std::vector<BenchmarkTask> read_benchmark(const std::filesystem::path& path);
void write_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkTask>& tasks);

struct KnowledgeNode {
  std::string id;
  std::string label;
  std::string type;
};

struct KnowledgeEdge {
  std::string from;
  std::string to;
  std::string relation;
};

struct ChapterKnowledge {
  Json core_concepts = Json::array();
  Json definitions = Json::array();
  Json theorems_or_rules = Json::array();
  Json procedures = Json::array();
  Json algorithms = Json::array();
  Json derived_relationships = Json::array();
  std::vector<std::string> subtle_constraints_or_caveats;
  std::vector<KnowledgeNode> nodes;
  std::vector<KnowledgeEdge> edges;
  /// Reference-integrity findings (dangling endpoints, unknown relations, cycles).
  std::vector<std::string> warnings;

  /// Throws ParseError on wrong member types; integrity issues become warnings.
  static ChapterKnowledge from_json(const Json& j);
  Json to_json() const;  // without warnings
};

enum class YesNo { Yes, No };
enum class Verdict { Pass, Fail };

struct QuestionEvaluation {
  YesNo distractors_plausible = YesNo::No;
  std::vector<std::string> main_issues;
  std::string fix;
};

struct VerifierReport {
  YesNo json_format_valid = YesNo::No;
  YesNo mcq_integrity = YesNo::No;
  YesNo blooms_alignment = YesNo::No;
  YesNo constraint_compliance = YesNo::No;
  Verdict agent_verdict = Verdict::Fail;  // as emitted by the verifier
  std::string explanation;
  QuestionEvaluation question_evaluation;
  std::vector<std::string> notes;  // local diagnostics (consistency, format)

  /// Pass iff all four dimensions are Yes.
  Verdict overall_verdict() const;
  /// Locally recomputed verdict agrees with the agent's and is Pass.
  bool accepted() const { return overall_verdict() == Verdict::Pass && agent_verdict == Verdict::Pass; }
  /// The only failing dimension is json_format_valid.
  bool format_only_failure() const;

  static VerifierReport from_json(const Json& j);  // throws ParseError
  Json to_json() const;

  /// Report synthesised locally when a candidate cannot be verified.
  static VerifierReport local_failure(bool format_ok, std::vector<std::string> issues);
};

std::string_view to_string(YesNo v);
std::string_view to_string(Verdict v);

}  // namespace benchforge
