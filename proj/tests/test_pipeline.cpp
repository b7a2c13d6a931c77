#include <algorithm>
#include <random>

#include "benchforge/error.hpp"
#include "benchforge/gen_pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace benchforge;
using namespace benchforge::testing;

namespace {

const std::vector<std::string> kRefinement{"self_containment", "trace_integrity", "conciseness",
                                           "source_ref_removal", "soundness"};

// Designer and verifier served from one scripted mock.
struct Rig {
  Json rules = Json::array();
  std::shared_ptr<MockProvider> mock;
  std::shared_ptr<CostLedger> ledger = std::make_shared<CostLedger>();
  std::unique_ptr<Gateway> designer, verifier;
  PromptLibrary prompts{prompts_dir()};
  ChapterDoc chapter{"b1", "ch0", "Sums", "c1", "Adding two numbers yields their sum, according to the chapter."};
  ChapterKnowledge knowledge = ChapterKnowledge::from_json(knowledge_json());

  void add(const std::string& tag, Json responses) { rules.push_back({{"tag", tag}, {"responses", responses}}); }

  // Identity refinement and repair, valid seeds, verifier responses as given.
  void defaults(Json verdicts) {
    add("*/knowledge", {{{"json", knowledge_json()}}});
    add("*/seed", {{{"json", sample_candidate_json("What is 2 + 3?")}}});
    for (const auto& s : kRefinement) add("*/" + s, {{{"echo_json", true}}});
    add("*/repair_*", {{{"echo_json", true}}});
    add("*/final_verification", std::move(verdicts));
  }

  Pipeline make(PipelineConfig cfg = {}) {
    mock = std::make_shared<MockProvider>(Json{{"chat", rules}});
    GatewayOptions d;
    d.role = "designer";
    d.model_id = "designer-m";
    GatewayOptions v;
    v.role = "verifier";
    v.model_id = "verifier-m";
    designer = std::make_unique<Gateway>(mock, ledger, d);
    verifier = std::make_unique<Gateway>(mock, ledger, v);
    return Pipeline(prompts, Agents{designer.get(), verifier.get()}, std::move(cfg));
  }

  GenerationJob job(const std::string& id = "b1.ch0.Hard-Apply.0", int budget = 3) {
    GenerationJob j;
    j.chapter = &chapter;
    j.knowledge = &knowledge;
    j.target = BloomDifficultyPair{BloomLevel::Apply, Difficulty::Hard};
    j.retry_budget = budget;
    j.candidate_id = id;
    return j;
  }

  std::vector<std::string> models_for(const std::string& suffix) const {
    std::vector<std::string> out;
    for (const auto& r : mock->history())
      if (r.tag.size() >= suffix.size() && r.tag.compare(r.tag.size() - suffix.size(), suffix.size(), suffix) == 0)
        out.push_back(r.model_id);
    return out;
  }
};

Json fails_then_pass(int k) {
  Json v = Json::array();
  for (int i = 0; i < k; ++i) v.push_back({{"json", verifier_json(true, false, true, true)}});
  v.push_back({{"json", verifier_pass()}});
  return v;
}

int count(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<int>(std::count(v.begin(), v.end(), s));
}

}  // namespace

TEST_CASE("knowledge structuring") {
  Rig rig;
  SUBCASE("minimal schema") {
    rig.add("*/knowledge", {{{"json", knowledge_json()}}});
    Pipeline p = rig.make();
    StageRecord audit;
    ChapterKnowledge k = p.structure_knowledge(rig.chapter, &audit);
    CHECK(k.core_concepts.size() == 1);
    CHECK(audit.tag == "b1.ch0/knowledge");
    CHECK(rig.mock->calls_for("b1.ch0/knowledge") == 1);
  }
  SUBCASE("prose around the JSON") {
    rig.add("*/knowledge", {{{"text", "Sure! Here it is:\n" + knowledge_json().dump() + "\nDone."}}});
    CHECK(rig.make().structure_knowledge(rig.chapter).core_concepts.size() == 1);
  }
  SUBCASE("dangling edge is a warning") {
    Json k = knowledge_json();
    k["dependency_graph"]["edges"].push_back({{"from", "n1"}, {"to", "ghost"}, {"relation", "uses"}});
    rig.add("*/knowledge", {{{"json", k}}});
    ChapterKnowledge got = rig.make().structure_knowledge(rig.chapter);
    REQUIRE(got.warnings.size() == 1);
    CHECK(got.warnings[0].find("ghost") != std::string::npos);
    CHECK(got.edges.size() == 2);
  }
  SUBCASE("unusable output") {
    rig.add("*/knowledge", {"I cannot help with that."});
    CHECK_THROWS_AS(rig.make().structure_knowledge(rig.chapter), UnstructurableChapter);
  }
  SUBCASE("transport failure") {
    rig.add("*/knowledge", {{{"error", "fatal"}}});
    CHECK_THROWS_AS(rig.make().structure_knowledge(rig.chapter), UnstructurableChapter);
  }
}

TEST_CASE("seed prompt contents") {
  Rig rig;
  rig.defaults({{{"json", verifier_pass()}}});
  PipelineConfig cfg;
  cfg.exemplars = {"EX-ONE", "EX-TWO"};
  Pipeline p = rig.make(cfg);
  GenerationJob j = rig.job();
  j.exemplars = p.pick_exemplars(j.candidate_id);
  CHECK(j.exemplars.size() == 2);
  auto msgs = p.seed_prompt(j);
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].content.find("Example - 1:") != std::string::npos);
  CHECK(msgs[1].content.find(rig.chapter.body) != std::string::npos);
  CHECK(msgs[1].content.find("- Difficulty: Hard") != std::string::npos);
  CHECK(msgs[1].content.find("Previously generated questions") == std::string::npos);
  CHECK(msgs[1].content.find("{chapter_excerpts}") == std::string::npos);

  j.accepted_so_far = {sample_candidate("Prior one?"), sample_candidate("Prior two?"), sample_candidate("Prior three?")};
  std::string user = p.seed_prompt(j)[1].content;
  for (const char* q : {"Prior one?", "Prior two?", "Prior three?"}) CHECK(user.find(q) != std::string::npos);
  CHECK(user.find("NOT near-duplicates") != std::string::npos);
}

TEST_CASE("exemplar choice is a per-candidate deterministic stream") {
  Rig rig;
  rig.defaults({{{"json", verifier_pass()}}});
  PipelineConfig cfg;
  for (int i = 0; i < 10; ++i) cfg.exemplars.push_back("ex" + std::to_string(i));
  cfg.seed = 42;
  Pipeline p = rig.make(cfg);
  CHECK(p.pick_exemplars("a") == p.pick_exemplars("a"));
  CHECK(p.pick_exemplars("a").size() == 3);
  bool differs = false;
  for (int i = 0; i < 20 && !differs; ++i) differs = p.pick_exemplars("id" + std::to_string(i)) != p.pick_exemplars("a");
  CHECK(differs);
}

TEST_CASE("pass on first attempt with identity stages") {
  Rig rig;
  rig.defaults({{{"json", verifier_pass()}}});
  Pipeline p = rig.make();
  CandidateOutcome o = p.run_candidate(rig.job());
  REQUIRE(o.status == CandidateStatus::Accepted);
  CHECK(o.repairs == 0);
  CHECK(o.verifications == 1);
  std::vector<std::string> expected{"seed"};
  expected.insert(expected.end(), kRefinement.begin(), kRefinement.end());
  expected.push_back("final_verification");
  CHECK(o.stage_sequence() == expected);
  McqCandidate seed = sample_candidate("What is 2 + 3?");
  seed.provenance = {"b1", "ch0", "c1"};
  CHECK(*o.candidate == seed);
  CHECK(validate_candidate(*o.candidate).empty());
}

TEST_CASE("stage routing between designer and verifier") {
  Rig rig;
  rig.defaults({{{"json", verifier_pass()}}});
  rig.make().run_candidate(rig.job());
  CHECK(rig.models_for("/seed") == std::vector<std::string>{"designer-m"});
  CHECK(rig.models_for("/trace_integrity") == std::vector<std::string>{"verifier-m"});
  CHECK(rig.models_for("/final_verification") == std::vector<std::string>{"verifier-m"});
  for (const char* s : {"/self_containment", "/conciseness", "/source_ref_removal", "/soundness"})
    CHECK(rig.models_for(s) == std::vector<std::string>{"designer-m"});
}

TEST_CASE("source reference removal edits are kept") {
  Rig rig;
  rig.add("*/source_ref_removal", {{{"echo_json", true}, {"replace", Json::array({Json::array({" according to the chapter", ""})})}}});
  rig.add("*/seed", {{{"json", sample_candidate_json("What is 2 + 3 according to the chapter?")}}});
  rig.defaults({{{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  REQUIRE(o.candidate);
  CHECK(o.candidate->question == "What is 2 + 3?");
}

TEST_CASE("trace integrity relabel keeps exactly one matching option") {
  Rig rig;
  Json seed = sample_candidate_json("What is 2 + 3?");
  seed["options"]["A"] = "4";
  seed["options"]["C"] = "5";
  seed["correct_answer"] = "B";
  rig.add("*/seed", {{{"json", seed}}});
  rig.add("*/trace_integrity", {{{"echo_json", true}, {"patch", {{"correct_answer", "C"}, {"options", {{"B", "6"}}}}}}});
  rig.defaults({{{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  REQUIRE(o.candidate);
  CHECK(o.candidate->correct_answer == "C");
  int matching = 0;
  for (const auto& [label, text] : o.candidate->options) matching += text == "5";
  CHECK(matching == 1);
}

TEST_CASE("verifier disagreement is coerced to Fail") {
  Rig rig;
  Json lying = verifier_json(true, true, false, true);
  lying["overall_verdict"] = "Pass";
  rig.defaults({{{"json", lying}}, {{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::Accepted);
  CHECK(o.repairs == 1);
  bool noted = false;
  for (const auto& r : o.trail)
    if (r.stage == "final_verification")
      for (const auto& d : r.diagnostics) noted |= d.find("disagrees") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("format-invalid report fails regardless of others") {
  Rig rig;
  Json j = verifier_json(false, true, true, true);
  j["overall_verdict"] = "Pass";
  rig.defaults({{{"json", j}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::DiscardedRetry);
  CHECK(count(o.stage_sequence(), "repair_format") == 3);
}

TEST_CASE("retry cycles: Fail,Fail,Pass is accepted after two repairs") {
  Rig rig;
  rig.defaults(fails_then_pass(2));
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::Accepted);
  CHECK(o.repairs == 2);
  CHECK(o.verifications == 3);
  RunLedger l;
  l.record(o);
  CHECK(l.repaired == 1);
  CHECK(l.per_bloom["Apply"].repairs == 2);
}

TEST_CASE("always Fail: discarded after exactly 3 repairs and 4 verifications") {
  Rig rig;
  rig.defaults({{{"json", verifier_json(true, true, true, false)}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::DiscardedRetry);
  CHECK(o.repairs == 3);
  CHECK(o.verifications == 4);
  CHECK(count(o.stage_sequence(), "repair_content") == 3);
  CHECK(o.discard_reason.find("3 repairs") != std::string::npos);
  RunLedger l;
  l.record(o);
  CHECK(l.discarded_retry == 1);
  CHECK(l.identities_hold());
}

TEST_CASE("repair re-enters at self containment and keeps stage order") {
  Rig rig;
  rig.defaults(fails_then_pass(1));
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  auto seq = o.stage_sequence();
  std::vector<std::string> block(kRefinement);
  block.push_back("final_verification");
  std::vector<std::string> expected{"seed"};
  expected.insert(expected.end(), block.begin(), block.end());
  expected.push_back("repair_content");
  expected.insert(expected.end(), block.begin(), block.end());
  CHECK(seq == expected);
}

TEST_CASE("content repair prompt carries full context") {
  Rig rig;
  rig.defaults(fails_then_pass(1));
  Pipeline p = rig.make();
  GenerationJob j = rig.job();
  j.accepted_so_far = {sample_candidate("Earlier question?")};
  p.run_candidate(j);
  std::string prompt;
  for (const auto& r : rig.mock->history())
    if (r.tag == j.candidate_id + "/repair_content") prompt = r.messages.back().content;
  REQUIRE_FALSE(prompt.empty());
  CHECK(prompt.find(rig.chapter.body) != std::string::npos);
  CHECK(prompt.find("Earlier question?") != std::string::npos);
  CHECK(prompt.find("\"mcq_integrity\": \"No\"") != std::string::npos);
  CHECK(prompt.find("Addition") != std::string::npos);
  CHECK(prompt.find("\"nodes\"") != std::string::npos);
}

TEST_CASE("substantive repair revising a distractor") {
  Rig rig;
  rig.add("*/repair_content", {{{"echo_json", true}, {"patch", {{"options", {{"D", "9"}}}}}}});
  rig.defaults(fails_then_pass(1));
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  REQUIRE(o.candidate);
  McqCandidate seed = sample_candidate("What is 2 + 3?");
  CHECK(o.candidate->question == seed.question);
  CHECK(o.candidate->solution_graph == seed.solution_graph);
  CHECK(o.candidate->complete_solution == seed.complete_solution);
  CHECK(*o.candidate->option('D') == "9");
}

TEST_CASE("format-only repair keeps content byte-identical") {
  SUBCASE("identity repair accepted") {
    Rig rig;
    rig.defaults({{{"json", verifier_json(false, true, true, true)}}, {{"json", verifier_pass()}}});
    CandidateOutcome o = rig.make().run_candidate(rig.job());
    CHECK(o.status == CandidateStatus::Accepted);
    CHECK(count(o.stage_sequence(), "repair_format") == 1);
    CHECK(o.candidate->question == "What is 2 + 3?");
  }
  SUBCASE("content-changing repair rejected") {
    Rig rig;
    rig.add("*/repair_format", {{{"echo_json", true}, {"patch", {{"question", "Something else?"}}}}});
    rig.defaults({{{"json", verifier_json(false, true, true, true)}}, {{"json", verifier_pass()}}});
    CandidateOutcome o = rig.make().run_candidate(rig.job());
    CHECK(o.status == CandidateStatus::DiscardedRetry);
    CHECK(count(o.stage_sequence(), "repair_format") == 3);
    CHECK(count(o.stage_sequence(), "final_verification") == 1);
  }
  SUBCASE("seed with broken quoting fixed by the format repair") {
    Rig rig;
    std::string broken = sample_candidate_json("What is 2 + 3?").dump();
    broken.replace(broken.find("\"correct_answer\""), 16, "correct_answer");
    rig.add("*/seed", {{{"text", broken}}});
    rig.add("*/repair_format", {{{"json", sample_candidate_json("What is 2 + 3?")}}});
    rig.defaults({{{"json", verifier_pass()}}});
    CandidateOutcome o = rig.make().run_candidate(rig.job());
    CHECK(o.status == CandidateStatus::Accepted);
    CHECK(o.repairs == 1);
    CHECK(o.stage_sequence()[1] == "repair_format");
    CHECK(o.candidate->question == "What is 2 + 3?");
  }
}

TEST_CASE("cyclic seed graph goes to repair with a cycle diagnostic") {
  Rig rig;
  Json seed = sample_candidate_json("What is 2 + 3?");
  seed["solution_graph"]["edges"].push_back({{"from", "V2"}, {"to", "V1"}, {"operation", "loop"}});
  rig.add("*/seed", {{{"json", seed}}});
  rig.defaults({{{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  REQUIRE(o.trail.size() >= 2);
  bool cycle = false;
  for (const auto& d : o.trail[0].diagnostics) cycle |= d.rfind("cycle", 0) == 0;
  CHECK(cycle);
  CHECK(o.trail[1].stage == "repair_content");
  CHECK(o.status == CandidateStatus::DiscardedRetry);
}

TEST_CASE("unparseable outputs consume retries") {
  Rig rig;
  rig.add("*/seed", {"garbage"});
  rig.defaults({{{"json", verifier_pass()}}});
  rig.rules[rig.rules.size() - 2] = {{"tag", "*/repair_*"}, {"responses", {"still garbage"}}};
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::DiscardedRetry);
  CHECK(o.repairs == 3);
  CHECK(o.verifications == 0);
}

TEST_CASE("unparseable verifier report is a Fail") {
  Rig rig;
  rig.defaults({"I think it is fine.", {{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::Accepted);
  CHECK(o.repairs == 1);
  CHECK(o.verifications == 2);
}

TEST_CASE("transport failure discards the candidate") {
  Rig rig;
  rig.add("*/conciseness", {{{"error", "fatal"}}});
  rig.defaults({{{"json", verifier_pass()}}});
  CandidateOutcome o = rig.make().run_candidate(rig.job());
  CHECK(o.status == CandidateStatus::DiscardedTransport);
  CHECK_FALSE(o.candidate);
  RunLedger l;
  l.record(o);
  CHECK(l.discarded_transport == 1);
}

TEST_CASE("retry budget boundary") {
  for (int k = 0; k <= 6; ++k) {
    Rig rig;
    rig.defaults(fails_then_pass(k));
    CandidateOutcome o = rig.make().run_candidate(rig.job());
    INFO("k = " << k);
    CHECK((o.status == CandidateStatus::Accepted) == (k <= 3));
    CHECK(o.repairs == std::min(k, 3));
    CHECK(count(o.stage_sequence(), "repair_content") == std::min(k, 3));
  }
}

TEST_CASE("run_chapter: always-pass quota 5 over 4 categories") {
  Rig rig;
  rig.defaults({{{"json", verifier_pass()}}});
  Pipeline p = rig.make();
  ChapterResult r = p.run_chapter(rig.chapter, rig.knowledge);
  CHECK(r.outcomes.size() == 20);
  CHECK(r.ledger.pass_first == 20);
  CHECK(r.ledger.seed_count == 20);
  CHECK(r.ledger.identities_hold());
  CHECK(r.outcomes[5].candidate_id == "b1.ch0.Hard-Analyze.0");
  // Later seeds see the questions accepted before them.
  std::string last_seed;
  for (const auto& req : rig.mock->history())
    if (req.tag == r.outcomes.back().candidate_id + "/seed") last_seed = req.messages.back().content;
  CHECK(last_seed.find("19. What is 2 + 3?") != std::string::npos);
}

TEST_CASE("seed count arithmetic for 53 chapters") {
  PipelineConfig cfg;
  CHECK(53 * static_cast<int>(cfg.categories.size()) * cfg.quota_per_category == 1060);
}

TEST_CASE("ledger identities under random mixes") {
  std::mt19937_64 rng(3);
  RunLedger total;
  for (int i = 0; i < 500; ++i) {
    CandidateOutcome o;
    o.category = default_target_categories()[rng() % 4];
    o.repairs = static_cast<int>(rng() % 4);
    o.status = static_cast<CandidateStatus>(rng() % 3);
    total.record(o);
  }
  CHECK(total.identities_hold());
  total.set_dedup_removed(total.pass_first + total.repaired);
  CHECK(total.final_count == 0);
  CHECK(total.identities_hold());
  CHECK_THROWS_AS(total.set_dedup_removed(total.pass_first + total.repaired + 1), ValidationError);
  CHECK(RunLedger::from_json(total.to_json()) == total);
}

TEST_CASE("config validation") {
  PipelineConfig cfg;
  cfg.validate();
  cfg.categories = {{BloomLevel::Apply, Difficulty::Medium}};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.allow_non_hard = true;
  cfg.validate();
  cfg.categories = {{BloomLevel::Remember, Difficulty::Hard}};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.quota_per_category = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.max_repairs = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
