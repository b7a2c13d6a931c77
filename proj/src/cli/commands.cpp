#include "benchforge/cli/commands.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "benchforge/analysis.hpp"
#include "benchforge/cli/run_dir.hpp"
#include "benchforge/contamination.hpp"
#include "benchforge/corpus.hpp"
#include "benchforge/dedup.hpp"
#include "benchforge/error.hpp"
#include "benchforge/eval_harness.hpp"
#include "benchforge/gen_pipeline.hpp"
#include "benchforge/hashing.hpp"
#include "benchforge/prompts.hpp"

namespace benchforge::cli {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `width` threads; rethrows the first failure.
template <class F>
void parallel_for(std::size_t n, std::size_t width, F&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  width = std::max<std::size_t>(1, std::min(width, n));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

// Common state for one command invocation inside the run directory.
class Session {
 public:
  Session(const RunConfig& cfg, std::string command)
      : cfg_(cfg),
        dir_(cfg.run_dir()),
        lock_(dir_),
        command_(std::move(command)),
        ledger_(std::make_shared<CostLedger>(cfg.pricing)),
        factory_(cfg, ledger_) {}

  ~Session() {
    try {
      write_costs();
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write cost report: " << e.what() << "\n";
    }
  }

  const RunConfig& cfg() const { return cfg_; }
  fs::path path(const fs::path& rel) const { return inside(dir_, rel); }
  GatewayFactory& factory() { return factory_; }

  PromptLibrary& prompts() {
    if (!prompts_) prompts_ = std::make_unique<PromptLibrary>(cfg_.prompts_dir);
    return *prompts_;
  }

  const Taxonomy& taxonomy() {
    if (!taxonomy_) {
      if (cfg_.taxonomy.empty()) throw ValidationError("config key 'taxonomy' is required for this command");
      taxonomy_ = std::make_unique<Taxonomy>(load_taxonomy(cfg_.taxonomy));
    }
    return *taxonomy_;
  }

  std::vector<BenchmarkTask> benchmark() {
    fs::path p = cfg_.benchmark.empty() ? path("benchmark.jsonl") : cfg_.benchmark;
    if (!fs::exists(p)) throw MissingArtifactError("missing " + p.string() + " (run 'dedup' first)");
    return read_benchmark(p);
  }

 private:
  void write_costs() {
    if (ledger_->rows().empty()) return;
    fs::path p = path(fs::path("costs") / (command_ + ".json"));
    CostLedger merged(cfg_.pricing);
    if (fs::exists(p)) merged.merge_report(read_json_file(p));
    merged.merge_report(ledger_report(*ledger_));
    fs::create_directories(p.parent_path());
    write_json_file(p, ledger_report(merged));
  }

  const RunConfig& cfg_;
  fs::path dir_;
  RunLock lock_;
  std::string command_;
  std::shared_ptr<CostLedger> ledger_;
  GatewayFactory factory_;
  std::unique_ptr<PromptLibrary> prompts_;
  std::unique_ptr<Taxonomy> taxonomy_;
};

Json candidate_record(const McqCandidate& c) {
  Json j = to_agent_json(c);
  j["bloom"] = to_string(c.bloom);
  j["difficulty"] = to_string(c.difficulty);
  j["provenance"] = {{"book_id", c.provenance.book_id},
                     {"chapter_id", c.provenance.chapter_id},
                     {"competency_id", c.provenance.competency_id}};
  return j;
}

McqCandidate candidate_from_record(const Json& j) {
  Json agent = j;
  agent.erase("bloom");
  agent.erase("difficulty");
  agent.erase("provenance");
  McqCandidate c = candidate_from_agent_json(agent);
  auto b = parse_bloom(j.at("bloom").get<std::string>());
  auto d = parse_difficulty(j.at("difficulty").get<std::string>());
  if (!b || !d) throw ParseError("stored candidate has an unknown bloom or difficulty");
  c.bloom = *b;
  c.difficulty = *d;
  const Json& p = j.at("provenance");
  c.provenance = {p.value("book_id", ""), p.value("chapter_id", ""), p.value("competency_id", "")};
  return c;
}

Json outcome_json(const CandidateOutcome& o) {
  Json j = {{"candidate_id", o.candidate_id},
            {"category", o.category.name()},
            {"ordinal", o.ordinal},
            {"status", to_string(o.status)},
            {"repairs", o.repairs},
            {"verifications", o.verifications},
            {"verification_passes", o.verification_passes},
            {"stages", o.stage_sequence()}};
  if (o.candidate) j["candidate"] = candidate_record(*o.candidate);
  if (!o.discard_reason.empty()) j["discard_reason"] = o.discard_reason;
  return j;
}

struct StoredChapter {
  RunLedger ledger;
  Json outcomes;
};

// Loads or produces knowledge summaries; returns the keys that failed.
std::vector<std::string> ensure_knowledge(Session& s, const std::vector<ChapterDoc>& chapters,
                                          std::map<std::string, ChapterKnowledge>& out) {
  const auto& cfg = s.cfg();
  std::unique_ptr<Gateway> designer;
  std::unique_ptr<Pipeline> pipeline;
  auto need_pipeline = [&] {
    if (pipeline) return;
    designer = s.factory().make(cfg.role(cfg.designer, "designer"), "designer");
    pipeline = std::make_unique<Pipeline>(s.prompts(), Agents{designer.get(), designer.get()}, cfg.pipeline);
  };
  std::vector<size_t> todo;
  for (size_t i = 0; i < chapters.size(); ++i) {
    std::string key = chapter_key(chapters[i]);
    fs::path p = s.path(fs::path("knowledge") / (key + ".json"));
    if (fs::exists(p)) out.emplace(key, ChapterKnowledge::from_json(read_json_file(p).at("knowledge")));
    else todo.push_back(i);
  }
  if (todo.empty()) return {};
  need_pipeline();
  fs::create_directories(s.path("knowledge"));
  std::mutex mu;
  std::vector<std::string> failed;
  parallel_for(todo.size(), cfg.concurrency, [&](size_t k) {
    const ChapterDoc& ch = chapters[todo[k]];
    std::string key = chapter_key(ch);
    StageRecord audit;
    try {
      ChapterKnowledge kn = pipeline->structure_knowledge(ch, &audit);
      write_json_file(s.path(fs::path("knowledge") / (key + ".audit.json")), audit.to_json());
      write_json_file(s.path(fs::path("knowledge") / (key + ".json")),
                      Json{{"chapter", key}, {"knowledge", kn.to_json()}, {"warnings", kn.warnings}});
      for (const auto& w : kn.warnings) std::cerr << "warning: " << key << ": " << w << "\n";
      std::lock_guard lock(mu);
      out.emplace(key, std::move(kn));
    } catch (const UnstructurableChapter& e) {
      if (!audit.tag.empty())
        write_json_file(s.path(fs::path("knowledge") / (key + ".audit.json")), audit.to_json());
      std::lock_guard lock(mu);
      std::cerr << "error: " << e.what() << "\n";
      failed.push_back(key);
    }
  });
  std::sort(failed.begin(), failed.end());
  return failed;
}

std::vector<ChapterDoc> load_chapters(Session& s) {
  const auto& cfg = s.cfg();
  if (cfg.chapters.empty()) throw ValidationError("config key 'chapters' is required for this command");
  auto chapters = load_corpus(cfg.chapters, s.taxonomy());
  CoverageReport cov = validate_corpus(s.taxonomy(), chapters);
  for (const auto& w : cov.warnings) std::cerr << "warning: " << w << "\n";
  write_json_file(s.path("coverage.json"), cov.to_json());
  return chapters;
}

std::map<std::string, std::vector<EvalRecord>> load_eval(Session& s) {
  std::map<std::string, std::vector<EvalRecord>> by_model;
  for (const auto& subj : s.cfg().subjects) {
    fs::path p = s.path(fs::path("eval") / (subj.name + ".jsonl"));
    if (!fs::exists(p)) throw MissingArtifactError("missing " + p.string() + " (run 'evaluate' first)");
    by_model[subj.name] = read_eval_records(p);
  }
  return by_model;
}

}  // namespace

// ---------------------------------------------------------------- commands

int cmd_structure(const RunConfig& cfg) {
  Session s(cfg, "structure");
  auto chapters = load_chapters(s);
  std::map<std::string, ChapterKnowledge> knowledge;
  auto failed = ensure_knowledge(s, chapters, knowledge);
  std::cout << "structured " << knowledge.size() << " of " << chapters.size() << " chapters\n";
  return failed.empty() ? kExitOk : kExitRuntime;
}

int cmd_generate(const RunConfig& cfg) {
  Session s(cfg, "generate");
  auto chapters = load_chapters(s);
  std::map<std::string, ChapterKnowledge> knowledge;
  auto failed = ensure_knowledge(s, chapters, knowledge);

  auto designer = s.factory().make(cfg.role(cfg.designer, "designer"), "designer");
  auto verifier = s.factory().make(cfg.role(cfg.verifier, "verifier"), "verifier");
  Pipeline pipeline(s.prompts(), Agents{designer.get(), verifier.get()}, cfg.pipeline);
  fs::create_directories(s.path("chapters"));

  std::vector<std::optional<StoredChapter>> stored(chapters.size());
  parallel_for(chapters.size(), cfg.concurrency, [&](size_t i) {
    const ChapterDoc& ch = chapters[i];
    std::string key = chapter_key(ch);
    auto kn = knowledge.find(key);
    if (kn == knowledge.end()) return;
    fs::path done = s.path(fs::path("chapters") / (key + ".json"));
    if (fs::exists(done)) {
      Json j = read_json_file(done);
      stored[i] = StoredChapter{RunLedger::from_json(j.at("ledger")), j.at("outcomes")};
      return;
    }
    ChapterResult r = pipeline.run_chapter(ch, kn->second);
    Json outcomes = Json::array();
    for (const auto& o : r.outcomes) {
      fs::path cdir = s.path(fs::path("candidates") / o.candidate_id);
      fs::create_directories(cdir);
      for (size_t n = 0; n < o.trail.size(); ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "stage-%02zu.json", n + 1);
        write_json_file(cdir / name, o.trail[n].to_json());
      }
      outcomes.push_back(outcome_json(o));
    }
    write_json_file(done, Json{{"chapter", key}, {"ledger", r.ledger.to_json()}, {"outcomes", outcomes}});
    stored[i] = StoredChapter{r.ledger, outcomes};
  });

  const Taxonomy& tax = s.taxonomy();
  Json book_names = cfg.effective.value("book_names", Json::object());
  RunLedger total;
  std::vector<Json> accepted, discards;
  size_t next_id = 0;
  for (size_t i = 0; i < chapters.size(); ++i) {
    if (!stored[i]) continue;
    total.add(stored[i]->ledger);
    const ChapterDoc& ch = chapters[i];
    const Competency* comp = tax.find_competency(ch.competency_id);
    const Area* area = comp ? tax.find_area(comp->area_id) : nullptr;
    for (const auto& o : stored[i]->outcomes) {
      if (o.at("status") == "accepted") {
        McqCandidate c = candidate_from_record(o.at("candidate"));
        char id[64];
        std::snprintf(id, sizeof id, "%s_task_%06zu", cfg.benchmark_prefix.c_str(), next_id++);
        BenchmarkTask t = BenchmarkTask::from_candidate(id, c, comp ? comp->name : ch.competency_id,
                                                        area ? area->name : "", tax.domain_name(),
                                                        book_names.value(ch.book_id, ch.book_id));
        t.extras["candidate_id"] = o.at("candidate_id");
        accepted.push_back(t.to_json());
      } else {
        Json d = o;
        d["chapter"] = chapter_key(ch);
        discards.push_back(d);
      }
    }
  }
  write_jsonl_file(s.path("accepted.jsonl"), accepted);
  write_jsonl_file(s.path("discards.jsonl"), discards);
  write_json_file(s.path("ledger.json"), total.to_json());
  std::cout << "seeds " << total.seed_count << ", pass@1 " << total.pass_first << ", repaired " << total.repaired
            << ", discarded " << total.discarded_retry << " (retry) + " << total.discarded_transport
            << " (transport)\n";
  return failed.empty() ? kExitOk : kExitRuntime;
}

int cmd_dedup(const RunConfig& cfg) {
  Session s(cfg, "dedup");
  fs::path accepted_path = s.path("accepted.jsonl");
  fs::path ledger_path = s.path("ledger.json");
  if (!fs::exists(accepted_path)) throw MissingArtifactError("missing " + accepted_path.string() + " (run 'generate' first)");
  if (!fs::exists(ledger_path)) throw MissingArtifactError("missing " + ledger_path.string() + " (run 'generate' first)");
  auto tasks = read_benchmark(accepted_path);
  RunLedger ledger = RunLedger::from_json(read_json_file(ledger_path));
  auto embedder = s.factory().make(cfg.role(cfg.embedder, "embedder"), "embedder", s.path("embeddings"));
  DedupOutcome out;
  if (tasks.empty()) {
    out.report = {{"embedder", {{"provider", embedder->provider().name()}, {"model_id", embedder->model_id()}}},
                  {"threshold", cfg.dedup.threshold}, {"input_count", 0}, {"retained_count", 0},
                  {"removed_count", 0}, {"chapters", Json::array()}, {"removed", Json::array()}};
  } else {
    out = dedup_tasks(tasks, *embedder, cfg.dedup);
  }
  write_json_file(s.path("dedup_report.json"), out.report);
  write_benchmark(s.path("benchmark.jsonl"), out.retained);
  ledger.set_dedup_removed(tasks.size() - out.retained.size());
  write_json_file(ledger_path, ledger.to_json());
  std::cout << "dedup removed " << ledger.dedup_removed << ", final " << ledger.final_count << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg) {
  Session s(cfg, "evaluate");
  auto bench = s.benchmark();
  if (cfg.subjects.empty()) throw ValidationError("config key 'subjects' lists no models to evaluate");
  fs::create_directories(s.path("eval"));
  std::vector<EvalRecord> all;
  for (const auto& subj : cfg.subjects) {
    auto gw = s.factory().make(subj, "subject");
    EvalOptions opts;
    opts.prompt_template = cfg.eval_template;
    opts.temperature = cfg.eval_temperature;
    opts.max_output_tokens = cfg.eval_max_tokens;
    opts.concurrency = cfg.eval_concurrency;
    opts.records_path = s.path(fs::path("eval") / (subj.name + ".jsonl"));
    auto recs = evaluate_model(*gw, subj.name, bench, opts);
    size_t correct = 0;
    for (const auto& r : recs) correct += r.is_correct ? 1 : 0;
    std::cout << subj.name << ": " << correct << "/" << recs.size() << " correct\n";
    all.insert(all.end(), recs.begin(), recs.end());
  }
  AccuracyTable table = aggregate(all, bench, s.taxonomy());
  write_text_file(s.path("accuracy.csv"), table.to_csv());
  write_json_file(s.path("accuracy.json"), table.to_json());
  return kExitOk;
}

int cmd_classify(const RunConfig& cfg) {
  Session s(cfg, "classify");
  const Taxonomy& tax = s.taxonomy();
  auto classifier = s.factory().make(cfg.role(cfg.classifier, "classifier"), "classifier");
  fs::create_directories(s.path("classify"));
  int failures = 0;
  for (const auto& ext : cfg.externals) {
    if (ext.problems.empty()) continue;
    fs::path out_path = s.path(fs::path("classify") / (ext.id + ".jsonl"));
    std::map<std::string, Json> cache;
    if (fs::exists(out_path))
      for (const auto& r : read_jsonl_file(out_path))
        if (!r.contains("error")) cache[r.at("problem_hash").get<std::string>()] = r;
    auto rows = read_jsonl_file(ext.problems);
    std::vector<Json> out(rows.size());
    std::atomic<int> errs{0};
    parallel_for(rows.size(), cfg.concurrency, [&](size_t i) {
      const Json& row = rows[i];
      std::string text;
      for (const char* k : {"problem", "task_statement", "question"})
        if (row.contains(k) && row[k].is_string()) {
          text = row[k].get<std::string>();
          break;
        }
      if (text.empty()) throw ValidationError(ext.problems.string() + ": row " + std::to_string(i + 1) + " has no problem text");
      std::string id = row.contains("id") ? row["id"].dump() : row.contains("task_id") ? row["task_id"].get<std::string>()
                                                                                        : std::to_string(i);
      if (row.contains("id") && row["id"].is_string()) id = row["id"].get<std::string>();
      std::string hash = sha256_hex(text).substr(0, 16);
      if (auto it = cache.find(hash); it != cache.end()) {
        out[i] = it->second;
        out[i]["problem_id"] = id;
        return;
      }
      Json rec = {{"problem_id", id}, {"problem_hash", hash}};
      try {
        Classification c = classify_external_problem(text, tax, *classifier, s.prompts(), "classify/" + ext.id + "/" + hash);
        rec["area_id"] = c.area_id;
        rec["competency_id"] = c.competency_id;
        rec["off_list_retries"] = c.off_list_retries;
      } catch (const ParseError& e) {
        rec["error"] = e.what();
        ++errs;
      } catch (const TransportError& e) {
        rec["error"] = std::string("transport: ") + e.what();
        ++errs;
      }
      out[i] = rec;
    });
    write_jsonl_file(out_path, out);
    failures += errs.load();
    std::cout << ext.id << ": classified " << rows.size() - errs.load() << " of " << rows.size() << "\n";
  }
  return failures ? kExitRuntime : kExitOk;
}

int cmd_analyze(const RunConfig& cfg) {
  Session s(cfg, "analyze");
  const Taxonomy& tax = s.taxonomy();
  auto bench = s.benchmark();
  auto by_model = load_eval(s);
  std::vector<EvalRecord> all;
  for (const auto& [m, recs] : by_model) all.insert(all.end(), recs.begin(), recs.end());
  AccuracyTable table = aggregate(all, bench, tax);
  fs::create_directories(s.path("analysis"));

  std::string entropy = "benchmark,entropy,difficulty,separability,size\n";
  {
    ModelAccuracyVector acc = overall_accuracy(table);
    std::string e = bench.empty() ? "" : format_real(normalized_entropy(distribution_of(bench, tax)));
    std::string d = acc.empty() ? "" : format_real(difficulty(acc));
    std::string sp = acc.empty() ? "" : format_real(separability(acc));
    entropy += csv_field(cfg.benchmark_prefix) + "," + e + "," + d + "," + sp + "," + std::to_string(bench.size()) + "\n";
  }
  for (const auto& ext : cfg.externals) {
    std::string e, size;
    fs::path cp = s.path(fs::path("classify") / (ext.id + ".jsonl"));
    if (fs::exists(cp)) {
      CompetencyDistribution dist;
      dist.N = tax.competency_count();
      std::uint64_t n = 0;
      for (const auto& r : read_jsonl_file(cp))
        if (r.contains("competency_id")) {
          ++dist.counts[r["competency_id"].get<std::string>()];
          ++n;
        }
      if (n) e = format_real(normalized_entropy(dist));
      size = std::to_string(n);
    }
    std::string d = ext.accuracies.empty() ? "" : format_real(difficulty(ext.accuracies));
    std::string sp = ext.accuracies.empty() ? "" : format_real(separability(ext.accuracies));
    entropy += csv_field(ext.id) + "," + e + "," + d + "," + sp + "," + size + "\n";
  }
  write_text_file(s.path("analysis/entropy.csv"), entropy);
  write_text_file(s.path("analysis/slices.csv"), table.to_csv());

  std::string sp = "competency_id,competency,spearman\n";
  if (table.models.size() >= 2) {
    auto profile = correlation_profile(macro_overall_vector(table), competency_vectors(table));
    for (const auto& c : tax.competencies()) {
      auto it = profile.find(c.competency_id);
      if (it == profile.end()) continue;
      sp += csv_field(c.competency_id) + "," + csv_field(c.name) + "," +
            (it->second ? format_real(*it->second) : std::string("undefined")) + "\n";
    }
  } else {
    std::cerr << "warning: Spearman profile needs at least 2 subject models\n";
  }
  write_text_file(s.path("analysis/spearman.csv"), sp);

  std::set<std::string> frontier = cfg.frontier_models;
  if (frontier.empty())
    for (const auto& subj : cfg.subjects) frontier.insert(subj.name);
  if (!bench.empty()) {
    ReviewSamples rs = select_review_samples(bench, by_model, cfg.review_fraction, frontier, cfg.pipeline.seed,
                                             cfg.incorrect_cap);
    Json j = rs.to_json();
    j["fraction"] = cfg.review_fraction;
    j["frontier_models"] = frontier;
    write_json_file(s.path("analysis/samples.json"), j);
  }
  std::cout << "analysis written for " << bench.size() << " tasks and " << table.models.size() << " models\n";
  return kExitOk;
}

int cmd_tsguess(const RunConfig& cfg) {
  Session s(cfg, "tsguess");
  auto bench = s.benchmark();
  std::vector<const RoleConfig*> models;
  for (const auto& subj : cfg.subjects)
    if (cfg.tsguess_models.empty() ||
        std::find(cfg.tsguess_models.begin(), cfg.tsguess_models.end(), subj.name) != cfg.tsguess_models.end())
      models.push_back(&subj);
  if (models.empty()) throw ValidationError("config key 'subjects' lists no models for TS-Guessing");
  fs::create_directories(s.path("tsguess"));
  Json summary = Json::array();
  for (const auto* m : models) {
    auto gw = s.factory().make(*m, "subject");
    auto res = run_ts_guessing(bench, *gw, m->name, cfg.pipeline.seed, cfg.ts_template, cfg.eval_concurrency);
    std::vector<Json> rows;
    for (const auto& t : res.trials) rows.push_back(t.to_json());
    write_jsonl_file(s.path(fs::path("tsguess") / (m->name + ".jsonl")), rows);
    summary.push_back(res.summary.to_json());
    std::cout << m->name << ": " << res.summary.matched_count << "/" << res.summary.eligible_count
              << " reconstructed\n";
  }
  write_json_file(s.path("tsguess/summary.json"), summary);
  return kExitOk;
}

int cmd_ledger(const RunConfig& cfg) {
  Session s(cfg, "ledger");
  bool any = false;
  CostLedger costs(cfg.pricing);
  fs::path cdir = s.path("costs");
  if (fs::exists(cdir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cdir))
      if (e.path().extension() == ".json" && e.path().stem() != "total" && e.path().stem() != "ledger")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      costs.merge_report(read_json_file(f));
      any = true;
    }
  }
  Json report = ledger_report(costs);
  Json out = {{"costs", report}};
  fs::path lp = s.path("ledger.json");
  if (fs::exists(lp)) {
    RunLedger l = RunLedger::from_json(read_json_file(lp));
    out["pipeline"] = l.to_json();
    out["identities_hold"] = l.identities_hold();
    std::cout << "seeds " << l.seed_count << " = pass@1 " << l.pass_first << " + repaired " << l.repaired
              << " + discarded " << l.discarded_retry << " + transport " << l.discarded_transport << "; final "
              << l.final_count << (l.identities_hold() ? "" : " (IDENTITY VIOLATED)") << "\n";
    any = true;
  }
  if (!any) throw MissingArtifactError("no ledger or cost reports in " + cfg.run_dir().string());
  for (const auto& r : report["rows"])
    std::cout << r["role"].get<std::string>() << " " << r["model_id"].get<std::string>() << ": in "
              << r["input_tokens"] << ", out " << r["output_tokens"] << ", usd " << format_real(r["usd"].get<double>(), 2)
              << "\n";
  std::cout << "total: in " << report["total"]["input_tokens"] << ", out " << report["total"]["output_tokens"]
            << ", usd " << format_real(report["total"]["usd"].get<double>(), 2) << "\n";
  write_json_file(s.path("costs/total.json"), out);
  return out.value("identities_hold", true) ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------- entry point

int run(int argc, char** argv) {
  CLI::App app{"Benchmark generation and evaluation toolkit"};
  app.require_subcommand(1);
  std::string config;
  Overrides ov;
  std::string categories;
  int quota = 0, max_repairs = -1;
  std::uint64_t seed = 0;
  std::string mock, run_id;
  std::size_t concurrency = 0;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"structure", "Build knowledge summaries for every chapter"},
      {"generate", "Generate, refine and verify candidate tasks"},
      {"dedup", "Remove near-duplicate tasks within each chapter"},
      {"evaluate", "Query subject models on the benchmark"},
      {"classify", "Map external benchmark problems onto the taxonomy"},
      {"analyze", "Compute coverage, difficulty, separability and profiles"},
      {"tsguess", "Run the masked-option reconstruction probe"},
      {"ledger", "Report token usage, cost and pipeline accounting"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Run configuration (JSON)")->required();
    sub->add_option("--quota", quota, "Seeds per chapter and category");
    sub->add_option("--categories", categories, "Comma-separated categories, e.g. Hard-Apply,Hard-Create");
    sub->add_option("--max-repairs", max_repairs, "Repair cycles per candidate");
    sub->add_option("--seed", seed, "Run RNG seed");
    sub->add_option("--mock-script", mock, "Serve every model role from this mock script");
    sub->add_option("--concurrency", concurrency, "Chapters processed in parallel");
    sub->add_option("--run-id", run_id, "Explicit run directory name");
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::string cmd;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) cmd = name;
  CLI::App* sub = subs[cmd];
  if (sub->count("--quota")) ov.quota = quota;
  if (sub->count("--max-repairs")) ov.max_repairs = max_repairs;
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--mock-script")) ov.mock_script = mock;
  if (sub->count("--concurrency")) ov.concurrency = concurrency;
  if (sub->count("--run-id")) ov.run_id = run_id;
  if (sub->count("--categories")) {
    std::vector<std::string> cats;
    std::string cur;
    for (char c : categories + ",") {
      if (c == ',') {
        if (!cur.empty()) cats.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur.push_back(c);
      }
    }
    ov.categories = cats;
  }

  try {
    RunConfig cfg = load_run_config(config, ov);
    if (cmd == "structure") return cmd_structure(cfg);
    if (cmd == "generate") return cmd_generate(cfg);
    if (cmd == "dedup") return cmd_dedup(cfg);
    if (cmd == "evaluate") return cmd_evaluate(cfg);
    if (cmd == "classify") return cmd_classify(cfg);
    if (cmd == "analyze") return cmd_analyze(cfg);
    if (cmd == "tsguess") return cmd_tsguess(cfg);
    return cmd_ledger(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace benchforge::cli
