#include "benchforge/gen_pipeline.hpp"

#include <numeric>
#include <random>

#include "benchforge/hashing.hpp"

namespace benchforge {

std::string_view stage_name(StageId s) {
  switch (s) {
    case StageId::KnowledgeStructuring: return "knowledge";
    case StageId::SeedGeneration: return "seed";
    case StageId::SelfContainment: return "self_containment";
    case StageId::TraceIntegrity: return "trace_integrity";
    case StageId::Conciseness: return "conciseness";
    case StageId::SourceRefRemoval: return "source_ref_removal";
    case StageId::Soundness: return "soundness";
    case StageId::FinalVerification: return "final_verification";
    case StageId::Repair: return "repair";
  }
  return "unknown";
}

std::string chapter_key(const ChapterDoc& c) { return c.book_id + "." + c.chapter_id; }

std::string_view to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::DiscardedRetry: return "retry";
    case CandidateStatus::DiscardedTransport: return "transport";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  if (max_repairs < 0) throw ValidationError("max_repairs must be >= 0");
  if (quota_per_category < 1) throw ValidationError("quota must be a positive integer");
  if (categories.empty()) throw ValidationError("at least one target category is required");
  for (const auto& c : categories) {
    if (!c.valid()) throw ValidationError("invalid Bloom/difficulty pairing " + c.name());
    if (!allow_non_hard && c.difficulty != Difficulty::Hard)
      throw ValidationError("category " + c.name() + " is not Hard; enable allow_non_hard to generate it");
  }
}

Json StageRecord::to_json() const {
  Json msgs = Json::array();
  for (const auto& m : prompt) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"stage", stage}, {"cycle", cycle},         {"tag", tag},
          {"prompt", msgs}, {"response", response}, {"parsed", parsed},
          {"diagnostics", diagnostics}};
}

std::vector<std::string> CandidateOutcome::stage_sequence() const {
  std::vector<std::string> out;
  for (const auto& r : trail) out.push_back(r.stage);
  return out;
}

// ---------------------------------------------------------------- ledger

void RunLedger::record(const CandidateOutcome& o) {
  ++seed_count;
  auto& b = per_bloom[std::string(to_string(o.category.bloom))];
  ++b.candidates;
  b.repairs += static_cast<std::uint64_t>(o.repairs);
  b.verifications += static_cast<std::uint64_t>(o.verifications);
  b.verification_passes += static_cast<std::uint64_t>(o.verification_passes);
  switch (o.status) {
    case CandidateStatus::Accepted:
      ++b.accepted;
      if (o.repairs == 0) ++pass_first;
      else ++repaired;
      break;
    case CandidateStatus::DiscardedRetry: ++discarded_retry; break;
    case CandidateStatus::DiscardedTransport: ++discarded_transport; break;
  }
  final_count = pass_first + repaired - dedup_removed;
}

void RunLedger::add(const RunLedger& o) {
  seed_count += o.seed_count;
  pass_first += o.pass_first;
  repaired += o.repaired;
  discarded_retry += o.discarded_retry;
  discarded_transport += o.discarded_transport;
  dedup_removed += o.dedup_removed;
  for (const auto& [k, v] : o.per_bloom) {
    auto& b = per_bloom[k];
    b.candidates += v.candidates;
    b.accepted += v.accepted;
    b.repairs += v.repairs;
    b.verifications += v.verifications;
    b.verification_passes += v.verification_passes;
  }
  final_count = pass_first + repaired - dedup_removed;
}

void RunLedger::set_dedup_removed(std::uint64_t n) {
  if (n > pass_first + repaired) throw ValidationError("dedup removed more candidates than were accepted");
  dedup_removed = n;
  final_count = pass_first + repaired - dedup_removed;
}

bool RunLedger::identities_hold() const {
  return seed_count == pass_first + repaired + discarded_retry + discarded_transport &&
         pass_first + repaired >= dedup_removed && final_count == pass_first + repaired - dedup_removed;
}

Json RunLedger::to_json() const {
  Json bloom = Json::object();
  for (const auto& [k, v] : per_bloom) {
    double pass_rate = v.verifications ? static_cast<double>(v.verification_passes) / v.verifications : 0.0;
    double final_rate = v.candidates ? static_cast<double>(v.accepted) / v.candidates : 0.0;
    double avg_retries = v.candidates ? static_cast<double>(v.repairs) / v.candidates : 0.0;
    bloom[k] = {{"candidates", v.candidates},
                {"accepted", v.accepted},
                {"repairs", v.repairs},
                {"verifications", v.verifications},
                {"verification_passes", v.verification_passes},
                {"verification_pass_rate", pass_rate},
                {"final_pass_rate", final_rate},
                {"avg_retries", avg_retries}};
  }
  return {{"seed_count", seed_count},
          {"pass_first", pass_first},
          {"repaired", repaired},
          {"discarded_retry", discarded_retry},
          {"discarded_transport", discarded_transport},
          {"dedup_removed", dedup_removed},
          {"final_count", final_count},
          {"per_bloom", bloom}};
}

RunLedger RunLedger::from_json(const Json& j) {
  RunLedger l;
  l.seed_count = j.value("seed_count", std::uint64_t{0});
  l.pass_first = j.value("pass_first", std::uint64_t{0});
  l.repaired = j.value("repaired", std::uint64_t{0});
  l.discarded_retry = j.value("discarded_retry", std::uint64_t{0});
  l.discarded_transport = j.value("discarded_transport", std::uint64_t{0});
  l.dedup_removed = j.value("dedup_removed", std::uint64_t{0});
  l.final_count = j.value("final_count", std::uint64_t{0});
  if (j.contains("per_bloom"))
    for (const auto& [k, v] : j["per_bloom"].items()) {
      BloomStats b;
      b.candidates = v.value("candidates", std::uint64_t{0});
      b.accepted = v.value("accepted", std::uint64_t{0});
      b.repairs = v.value("repairs", std::uint64_t{0});
      b.verifications = v.value("verifications", std::uint64_t{0});
      b.verification_passes = v.value("verification_passes", std::uint64_t{0});
      l.per_bloom[k] = b;
    }
  return l;
}

// ---------------------------------------------------------------- helpers

std::string render_previous_questions(const std::vector<McqCandidate>& prior) {
  if (prior.empty()) return "None";
  std::string out;
  for (size_t i = 0; i < prior.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + prior[i].question;
  }
  return out;
}

bool same_content(const McqCandidate& a, const McqCandidate& b) {
  return a.question == b.question && a.options == b.options && a.correct_answer == b.correct_answer &&
         a.solution_graph == b.solution_graph && a.complete_solution == b.complete_solution;
}

// ---------------------------------------------------------------- pipeline

struct Pipeline::Attempt {
  bool ok = false;
  std::optional<McqCandidate> candidate;  // parsed, possibly invalid
  std::string raw;
  std::vector<std::string> diagnostics;
};

Pipeline::Pipeline(const PromptLibrary& prompts, Agents agents, PipelineConfig config)
    : prompts_(prompts), agents_(agents), cfg_(std::move(config)) {
  if (!agents_.designer || !agents_.verifier) throw ValidationError("pipeline needs designer and verifier gateways");
  cfg_.validate();
}

std::string Pipeline::guidance(const BloomDifficultyPair& p) const {
  return prompts_.render("difficulty_blooms_guidance",
                         {{"difficulty", std::string(to_string(p.difficulty))},
                          {"blooms_level", std::string(to_string(p.bloom))}});
}

ChapterKnowledge Pipeline::structure_knowledge(const ChapterDoc& chapter, StageRecord* audit) const {
  std::vector<Message> prompt{
      {"system", prompts_.raw("knowledge_structuring.system")},
      {"user", prompts_.render("knowledge_structuring.user", {{"chapter_excerpts", chapter.body}})}};
  ChatRequest req;
  req.messages = prompt;
  req.temperature = cfg_.designer_temperature;
  req.max_output_tokens = cfg_.max_output_tokens;
  req.tag = chapter_key(chapter) + "/knowledge";
  StageRecord rec;
  rec.stage = "knowledge";
  rec.tag = req.tag;
  rec.prompt = prompt;
  ChapterKnowledge k;
  try {
    ChatResponse resp = agents_.designer->chat(req);
    rec.response = resp.text;
    k = ChapterKnowledge::from_json(extract_json(resp.text));
  } catch (const TransportError& e) {
    throw UnstructurableChapter("chapter " + chapter_key(chapter) + ": knowledge structuring failed: " + e.what());
  } catch (const ParseError& e) {
    if (audit) *audit = rec;
    throw UnstructurableChapter("chapter " + chapter_key(chapter) + ": knowledge summary unusable: " + e.what());
  }
  rec.parsed = k.to_json();
  rec.diagnostics = k.warnings;
  if (audit) *audit = std::move(rec);
  return k;
}

std::vector<std::string> Pipeline::pick_exemplars(const std::string& candidate_id) const {
  std::vector<std::string> pool = cfg_.exemplars;
  std::mt19937_64 rng(derive_seed(cfg_.seed, {"exemplars", candidate_id}));
  size_t k = std::min(cfg_.exemplars_per_prompt, pool.size());
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<Message> Pipeline::seed_prompt(const GenerationJob& job) const {
  std::string examples;
  for (size_t i = 0; i < job.exemplars.size(); ++i) {
    if (i) examples += "\n\n";
    examples += "Example - " + std::to_string(i + 1) + ":\n" + job.exemplars[i];
  }
  std::string anti;
  if (!job.accepted_so_far.empty())
    anti = "\n" + prompts_.raw("anti_duplication") + "\n\nPreviously generated questions:\n" +
           render_previous_questions(job.accepted_so_far) + "\n";
  return {{"system", prompts_.render("seed_generation.system", {{"exemplars", examples}})},
          {"user", prompts_.render("seed_generation.user",
                                   {{"difficulty_and_blooms_guidance", guidance(job.target)},
                                    {"chapter_excerpts", job.chapter->body},
                                    {"chapter_knowledge_text", job.knowledge->to_json().dump(2)},
                                    {"anti_duplication", anti}})}};
}

std::vector<Message> Pipeline::refinement_prompt(StageId stage, const McqCandidate& c) const {
  std::string full = to_agent_json(c).dump(2);
  switch (stage) {
    case StageId::SelfContainment:
      return {{"user", prompts_.render("self_containment.user", {{"candidate_question", full}})}};
    case StageId::Conciseness:
      return {{"user", prompts_.render("conciseness.user", {{"candidate_question", full}})}};
    case StageId::SourceRefRemoval:
      return {{"user", prompts_.render("source_ref_removal.user", {{"candidate_question", full}})}};
    case StageId::Soundness:
      return {{"user", prompts_.render("soundness.user", {{"candidate_question", full}})}};
    case StageId::TraceIntegrity: {
      Json q = Json::object();
      Json agent = to_agent_json(c);
      q["question"] = agent["question"];
      q["options"] = agent["options"];
      q["correct_answer"] = agent["correct_answer"];
      return {{"system", prompts_.raw("trace_integrity.system")},
              {"user", prompts_.render("trace_integrity.user",
                                       {{"candidate_question", q.dump(2)},
                                        {"solution_trace", c.solution_graph.to_json().dump(2)},
                                        {"solution_full", full},
                                        {"blooms_level", std::string(to_string(c.bloom))}})}};
    }
    default: break;
  }
  throw ValidationError("not a refinement stage: " + std::string(stage_name(stage)));
}

std::vector<Message> Pipeline::verification_prompt(const McqCandidate& c) const {
  return {{"system", prompts_.raw("final_verification.system")},
          {"user", prompts_.render("final_verification.user",
                                   {{"blooms_level", std::string(to_string(c.bloom))},
                                    {"candidate_output", to_agent_json(c).dump(2)}})}};
}

std::vector<Message> Pipeline::repair_prompt(bool format_only, const std::string& previous_output,
                                             const VerifierReport& report, const McqCandidate& c,
                                             const GenerationJob& job) const {
  std::string feedback = report.to_json().dump(2);
  if (format_only)
    return {{"system", prompts_.raw("repair_format.system")},
            {"user", prompts_.render("repair_format.user", {{"previous_candidate_output", previous_output},
                                                            {"verifier_llm_feedback", feedback}})}};
  return {{"system", prompts_.raw("repair_content.system")},
          {"user", prompts_.render("repair_content.user",
                                   {{"previous_candidate_output", previous_output},
                                    {"verifier_llm_feedback", feedback},
                                    {"difficulty_and_blooms_guidance", guidance(job.target)},
                                    {"previous_questions", render_previous_questions(job.accepted_so_far)},
                                    {"chapter_material", job.chapter->body},
                                    {"chapter_knowledge_text", job.knowledge->to_json().dump(2)},
                                    {"solution_trace", c.solution_graph.to_json().dump(2)}})}};
}

Pipeline::Attempt Pipeline::call_candidate_stage(StageId stage, const std::string& tag_stage,
                                                 std::vector<Message> prompt, const McqCandidate* base,
                                                 const GenerationJob& job, int cycle, CandidateOutcome& out) const {
  bool on_verifier = stage == StageId::TraceIntegrity || stage == StageId::FinalVerification;
  Gateway* gw = on_verifier ? agents_.verifier : agents_.designer;
  ChatRequest req;
  req.messages = prompt;
  req.temperature = on_verifier ? cfg_.verifier_temperature : cfg_.designer_temperature;
  req.max_output_tokens = cfg_.max_output_tokens;
  req.tag = job.candidate_id + "/" + tag_stage;

  StageRecord rec;
  rec.stage = tag_stage;
  rec.cycle = cycle;
  rec.tag = req.tag;
  rec.prompt = std::move(prompt);
  try {
    rec.response = gw->chat(req).text;
  } catch (const TransportError& e) {
    rec.diagnostics.push_back(std::string("transport: ") + e.what());
    out.trail.push_back(std::move(rec));
    throw;
  }

  Attempt a;
  a.raw = rec.response;
  try {
    McqCandidate c = candidate_from_agent_json(extract_json(rec.response), base);
    c.bloom = job.target.bloom;
    c.difficulty = job.target.difficulty;
    c.provenance = {job.chapter->book_id, job.chapter->chapter_id, job.chapter->competency_id};
    rec.parsed = to_agent_json(c);
    auto violations = validate_candidate(c);
    for (const auto& v : violations) a.diagnostics.push_back(v.code + ": " + v.message);
    a.ok = violations.empty();
    a.candidate = std::move(c);
  } catch (const ParseError& e) {
    a.diagnostics.push_back(std::string("unparseable output: ") + e.what());
  }
  rec.diagnostics = a.diagnostics;
  out.trail.push_back(std::move(rec));
  return a;
}

CandidateOutcome Pipeline::run_candidate(const GenerationJob& job) const {
  CandidateOutcome out;
  out.candidate_id = job.candidate_id;
  out.category = job.target;
  if (!job.chapter || !job.knowledge) throw ValidationError("generation job needs a chapter and its knowledge");

  auto local_report = [](const Attempt& a) {
    return VerifierReport::local_failure(a.candidate.has_value(), a.diagnostics);
  };

  try {
    McqCandidate current;
    current.bloom = job.target.bloom;
    current.difficulty = job.target.difficulty;
    current.provenance = {job.chapter->book_id, job.chapter->chapter_id, job.chapter->competency_id};
    std::optional<VerifierReport> pending;
    std::string previous_output;
    // Whether `current` is the parsed form of `previous_output`; the
    // byte-identity check of format repairs needs that reference.
    bool reference_valid = false;

    Attempt a = call_candidate_stage(StageId::SeedGeneration, "seed", seed_prompt(job), nullptr, job, 0, out);
    previous_output = a.raw;
    if (a.candidate) {
      current = *a.candidate;
      reference_valid = true;
    }
    if (!a.ok) pending = local_report(a);

    while (true) {
      if (!pending) {
        for (StageId s : kRefinementStages) {
          a = call_candidate_stage(s, std::string(stage_name(s)), refinement_prompt(s, current), &current, job,
                                   out.repairs, out);
          if (a.candidate) current = *a.candidate;
          reference_valid = a.candidate.has_value();
          previous_output = a.raw;
          if (!a.ok) {
            pending = local_report(a);
            break;
          }
        }
      }
      if (!pending) {
        ChatRequest req;
        req.messages = verification_prompt(current);
        req.temperature = cfg_.verifier_temperature;
        req.max_output_tokens = cfg_.max_output_tokens;
        req.tag = job.candidate_id + "/final_verification";
        StageRecord rec;
        rec.stage = "final_verification";
        rec.cycle = out.repairs;
        rec.tag = req.tag;
        rec.prompt = req.messages;
        try {
          rec.response = agents_.verifier->chat(req).text;
        } catch (const TransportError& e) {
          rec.diagnostics.push_back(std::string("transport: ") + e.what());
          out.trail.push_back(std::move(rec));
          throw;
        }
        ++out.verifications;
        VerifierReport report;
        try {
          report = VerifierReport::from_json(extract_json(rec.response));
        } catch (const ParseError& e) {
          report.json_format_valid = YesNo::Yes;
          report.agent_verdict = Verdict::Fail;
          report.explanation = "verifier report could not be parsed";
          report.notes.push_back(std::string("unparseable verifier report: ") + e.what());
        }
        rec.parsed = report.to_json();
        rec.diagnostics = report.notes;
        out.trail.push_back(std::move(rec));
        if (report.accepted()) {
          ++out.verification_passes;
          out.status = CandidateStatus::Accepted;
          out.candidate = current;
          return out;
        }
        pending = std::move(report);
        previous_output = to_agent_json(current).dump(2);
        reference_valid = true;
      }

      if (out.repairs >= job.retry_budget) {
        out.status = CandidateStatus::DiscardedRetry;
        std::string why = pending->explanation;
        for (const auto& n : pending->notes) why += (why.empty() ? "" : "; ") + n;
        out.discard_reason = "retry budget exhausted after " + std::to_string(out.repairs) + " repairs: " + why;
        return out;
      }
      ++out.repairs;
      const bool format_only = pending->format_only_failure();
      a = call_candidate_stage(StageId::Repair, format_only ? "repair_format" : "repair_content",
                               repair_prompt(format_only, previous_output, *pending, current, job), &current, job,
                               out.repairs, out);
      if (!a.ok) {
        pending = local_report(a);
        if (a.candidate) current = *a.candidate;
        reference_valid = a.candidate.has_value();
        previous_output = a.raw;
        continue;
      }
      if (format_only && reference_valid && !same_content(*a.candidate, current)) {
        pending->notes.push_back("format-only repair changed content fields; repair rejected");
        out.trail.back().diagnostics.push_back("format-only repair changed content fields");
        continue;
      }
      current = *a.candidate;
      reference_valid = true;
      pending.reset();
    }
  } catch (const TransportError& e) {
    out.status = CandidateStatus::DiscardedTransport;
    out.candidate.reset();
    out.discard_reason = std::string("transport failure: ") + e.what();
    return out;
  }
}

ChapterResult Pipeline::run_chapter(const ChapterDoc& chapter, const ChapterKnowledge& knowledge) const {
  ChapterResult result;
  result.chapter_key = chapter_key(chapter);
  std::vector<McqCandidate> accepted;
  for (const auto& cat : cfg_.categories) {
    for (int k = 0; k < cfg_.quota_per_category; ++k) {
      GenerationJob job;
      job.chapter = &chapter;
      job.knowledge = &knowledge;
      job.target = cat;
      job.candidate_id = result.chapter_key + "." + cat.name() + "." + std::to_string(k);
      job.exemplars = pick_exemplars(job.candidate_id);
      job.accepted_so_far = accepted;
      job.retry_budget = cfg_.max_repairs;
      CandidateOutcome o = run_candidate(job);
      o.ordinal = k;
      result.ledger.record(o);
      if (o.status == CandidateStatus::Accepted) accepted.push_back(*o.candidate);
      result.outcomes.push_back(std::move(o));
    }
  }
  return result;
}

}  // namespace benchforge
