#include "benchforge/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>

#include "benchforge/error.hpp"
#include "benchforge/prompts.hpp"

namespace benchforge {

Json EvalRecord::to_json() const {
  Json j = {{"model_id", model_id},
            {"task_id", task_id},
            {"raw_output", raw_output},
            {"parsed_choice", parsed_choice ? Json(std::string(1, *parsed_choice)) : Json(nullptr)},
            {"is_correct", is_correct},
            {"invalid", invalid}};
  if (!note.empty()) j["note"] = note;
  return j;
}

EvalRecord EvalRecord::from_json(const Json& j) {
  EvalRecord r;
  r.model_id = require_string(j, "model_id");
  r.task_id = require_string(j, "task_id");
  r.raw_output = optional_string(j, "raw_output");
  if (j.contains("parsed_choice") && j["parsed_choice"].is_string()) {
    std::string c = j["parsed_choice"].get<std::string>();
    if (c.size() != 1 || c[0] < 'A' || c[0] > 'E') throw ValidationError("parsed_choice must be one of A-E");
    r.parsed_choice = c[0];
  }
  r.is_correct = j.value("is_correct", false);
  r.invalid = j.value("invalid", !r.parsed_choice.has_value());
  r.note = optional_string(j, "note");
  if (r.invalid && (r.parsed_choice || r.is_correct))
    throw ValidationError("eval record " + r.task_id + ": invalid records carry no choice and are incorrect");
  return r;
}

std::string default_mcq_template() {
  return "Answer the following multiple-choice question. Exactly one option is correct.\n\n"
         "Question:\n{statement}\n\nOptions:\n{options}\n\n"
         "Respond with the letter of the correct option only (A, B, C, D, or E).";
}

std::string render_option_lines(const McqCandidate& c) {
  std::string out;
  for (char l : kOptionLabels) {
    const auto* t = c.option(l);
    if (!t) continue;
    if (!out.empty()) out += "\n";
    out.push_back(l);
    out += ". " + *t;
  }
  return out;
}

std::string render_mcq_prompt(const BenchmarkTask& task, std::string_view tmpl) {
  return substitute(tmpl, {{"statement", task.stem()}, {"options", render_option_lines(task.mcq)}});
}

namespace {

std::string strip_think_blocks(std::string_view raw) {
  std::string s(raw);
  for (;;) {
    size_t open = s.find("<think>");
    if (open == std::string::npos) break;
    size_t close = s.find("</think>", open);
    if (close == std::string::npos) {
      s.erase(open);
      break;
    }
    s.erase(open, close + 8 - open);
  }
  return s;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string o(s);
  for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return o;
}

std::optional<char> letter_at(const std::string& s, size_t i) {
  if (i >= s.size()) return std::nullopt;
  char c = s[i];
  bool upper = c >= 'A' && c <= 'E';
  bool low = c >= 'a' && c <= 'e';
  if (!upper && !low) return std::nullopt;
  if (i > 0 && is_alnum(s[i - 1])) return std::nullopt;
  bool end = i + 1 >= s.size();
  if (!end && is_alnum(s[i + 1])) return std::nullopt;
  // Lowercase letters only count when nothing word-like follows ("answer is a
  // value..." is prose, "answer is c." is a choice).
  if (low && !end && std::isspace(static_cast<unsigned char>(s[i + 1]))) {
    size_t j = i + 1;
    while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j < s.size()) return std::nullopt;
  }
  return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
}

}  // namespace

std::optional<char> parse_choice(std::string_view raw) {
  std::string s = strip_think_blocks(raw);

  // Final line equal to a letter.
  {
    size_t end = s.find_last_not_of(" \t\r\n");
    if (end != std::string::npos) {
      size_t start = s.rfind('\n', end);
      start = start == std::string::npos ? 0 : start + 1;
      std::string line = s.substr(start, end - start + 1);
      std::string core;
      for (char c : line)
        if (c == 0 || !std::strchr("*()[]. :\t\"'`", c)) core.push_back(c);
      if (core.size() == 1) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(core[0])));
        if (c >= 'A' && c <= 'E') return c;
      }
    }
  }

  // Last cue match.
  std::string ls = lower(s);
  std::optional<char> cued;
  size_t best = std::string::npos;
  for (const char* cue : {"answer is", "answer:"}) {
    for (size_t pos = ls.find(cue); pos != std::string::npos; pos = ls.find(cue, pos + 1)) {
      size_t i = pos + std::strlen(cue);
      while (i < s.size() && s[i] != 0 && std::strchr(" \t\r\n:*([\"'`", s[i])) ++i;
      auto l = letter_at(s, i);
      if (l && (best == std::string::npos || pos > best)) {
        best = pos;
        cued = l;
      }
    }
  }
  if (cued) return cued;

  // Exactly one distinct standalone uppercase letter.
  std::set<char> seen;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c < 'A' || c > 'E') continue;
    if (i > 0 && is_alnum(s[i - 1])) continue;
    if (i + 1 < s.size() && is_alnum(s[i + 1])) continue;
    seen.insert(c);
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

EvalRecord score_output(const std::string& model_id, const BenchmarkTask& task, std::string raw) {
  EvalRecord r;
  r.model_id = model_id;
  r.task_id = task.task_id;
  r.parsed_choice = parse_choice(raw);
  r.raw_output = std::move(raw);
  r.invalid = !r.parsed_choice;
  r.is_correct = r.parsed_choice && std::string(1, *r.parsed_choice) == task.mcq.correct_answer;
  return r;
}

std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path) {
  std::vector<EvalRecord> out;
  std::map<std::string, size_t> pos;
  for (const auto& j : read_jsonl_file(path)) {
    EvalRecord r = EvalRecord::from_json(j);
    auto it = pos.find(r.task_id);
    if (it == pos.end()) {
      pos.emplace(r.task_id, out.size());
      out.push_back(std::move(r));
    } else {
      out[it->second] = std::move(r);
    }
  }
  return out;
}

std::vector<EvalRecord> evaluate_model(Gateway& model, const std::string& model_name,
                                       const std::vector<BenchmarkTask>& benchmark, const EvalOptions& opts) {
  std::map<std::string, EvalRecord> done;
  if (!opts.records_path.empty() && std::filesystem::exists(opts.records_path))
    for (auto& r : read_eval_records(opts.records_path))
      if (!r.transport_failed()) done.emplace(r.task_id, std::move(r));

  std::vector<size_t> todo;
  for (size_t i = 0; i < benchmark.size(); ++i)
    if (!done.count(benchmark[i].task_id)) todo.push_back(i);

  std::vector<std::optional<EvalRecord>> fresh(benchmark.size());
  std::mutex append_mu;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next.fetch_add(1); k < todo.size(); k = next.fetch_add(1)) {
      const auto& task = benchmark[todo[k]];
      ChatRequest req;
      req.messages = {{"user", render_mcq_prompt(task, opts.prompt_template)}};
      req.temperature = opts.temperature;
      req.max_output_tokens = opts.max_output_tokens;
      req.tag = "eval/" + model_name + "/" + task.task_id;
      EvalRecord rec;
      try {
        rec = score_output(model_name, task, model.chat(req).text);
      } catch (const TransportError& e) {
        rec.model_id = model_name;
        rec.task_id = task.task_id;
        rec.invalid = true;
        rec.note = std::string("transport: ") + e.what();
      }
      std::lock_guard lock(append_mu);
      if (!opts.records_path.empty()) append_jsonl_line(opts.records_path, rec.to_json());
      fresh[todo[k]] = std::move(rec);
    }
  };
  size_t n = std::max<size_t>(1, std::min(opts.concurrency, todo.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<EvalRecord> out;
  out.reserve(benchmark.size());
  for (size_t i = 0; i < benchmark.size(); ++i) {
    if (fresh[i]) out.push_back(std::move(*fresh[i]));
    else out.push_back(done.at(benchmark[i].task_id));
  }
  // Canonical order on disk once the pass is complete.
  if (!opts.records_path.empty()) {
    std::vector<Json> rows;
    for (const auto& r : out) rows.push_back(r.to_json());
    write_jsonl_file(opts.records_path, rows);
  }
  return out;
}

// ---------------------------------------------------------------- aggregation

const SliceStat& AccuracyTable::at(const std::string& model, const std::string& slice) const {
  static const SliceStat empty;
  auto m = cells.find(model);
  if (m == cells.end()) return empty;
  auto s = m->second.find(slice);
  return s == m->second.end() ? empty : s->second;
}

std::string format_real(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string AccuracyTable::to_csv() const {
  std::string out = "slice";
  for (const auto& m : models) out += "," + csv_field(m);
  out += "\n";
  for (const auto& s : slices) {
    out += csv_field(s);
    for (const auto& m : models) out += "," + format_real(at(m, s).accuracy());
    out += "\n";
  }
  return out;
}

Json AccuracyTable::to_json() const {
  Json j = Json::object();
  j["models"] = models;
  j["slices"] = slices;
  Json rows = Json::array();
  for (const auto& m : models)
    for (const auto& s : slices) {
      const auto& c = at(m, s);
      rows.push_back({{"model_id", m},
                      {"slice", s},
                      {"correct", c.correct},
                      {"total", c.total},
                      {"invalid", c.invalid},
                      {"accuracy", c.accuracy()}});
    }
  j["cells"] = rows;
  return j;
}

const Competency& task_competency(const BenchmarkTask& task, const Taxonomy& taxonomy) {
  const Competency* c = nullptr;
  if (!task.mcq.provenance.competency_id.empty()) c = taxonomy.find_competency(task.mcq.provenance.competency_id);
  if (!c) c = taxonomy.find_competency(task.competency);
  if (!c) c = taxonomy.find_competency_by_name(task.competency);
  if (!c)
    throw ValidationError("task " + task.task_id + ": competency '" + task.competency +
                          "' is not in the taxonomy");
  return *c;
}

AccuracyTable aggregate(const std::vector<EvalRecord>& records, const std::vector<BenchmarkTask>& benchmark,
                        const Taxonomy& taxonomy) {
  struct Labels {
    std::string area, competency, bloom;
  };
  std::map<std::string, Labels> labels;
  std::set<std::string> used_areas, used_comps;
  std::set<BloomLevel> used_blooms;
  for (const auto& t : benchmark) {
    const Competency& c = task_competency(t, taxonomy);
    labels[t.task_id] = {c.area_id, c.competency_id, std::string(to_string(t.mcq.bloom))};
    used_areas.insert(c.area_id);
    used_comps.insert(c.competency_id);
    used_blooms.insert(t.mcq.bloom);
  }

  AccuracyTable table;
  std::set<std::string> models;
  for (const auto& r : records) {
    auto it = labels.find(r.task_id);
    if (it == labels.end()) throw ValidationError("eval record for unknown task_id '" + r.task_id + "'");
    models.insert(r.model_id);
    auto& row = table.cells[r.model_id];
    for (const std::string& slice : {std::string("overall"), "area:" + it->second.area,
                                     "competency:" + it->second.competency, "bloom:" + it->second.bloom}) {
      auto& s = row[slice];
      ++s.total;
      if (r.is_correct && !r.invalid) ++s.correct;
      if (r.invalid) ++s.invalid;
    }
  }
  table.models.assign(models.begin(), models.end());
  table.slices.push_back("overall");
  for (const auto& a : taxonomy.areas())
    if (used_areas.count(a.area_id)) table.slices.push_back("area:" + a.area_id);
  for (const auto& c : taxonomy.competencies())
    if (used_comps.count(c.competency_id)) table.slices.push_back("competency:" + c.competency_id);
  for (BloomLevel b : used_blooms) table.slices.push_back("bloom:" + std::string(to_string(b)));
  return table;
}

}  // namespace benchforge
