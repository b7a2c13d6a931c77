#include "benchforge/task_schema.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <unordered_map>

#include "benchforge/error.hpp"

namespace benchforge {

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

// Leading token of "Token - description" or a bare token.
std::string leading_token(std::string_view text) {
  std::string t = trim(text);
  size_t dash = t.find(" - ");
  if (dash != std::string::npos) t = trim(std::string_view(t).substr(0, dash));
  return t;
}

constexpr std::array<std::string_view, 6> kBloomNames{"Remember", "Understand", "Apply",
                                                      "Analyze",  "Evaluate",   "Create"};
constexpr std::array<std::string_view, 3> kDifficultyNames{"Easy", "Medium", "Hard"};

constexpr std::array<std::string_view, 6> kBloomDescriptions{
    "Recall facts, terms, and basic concepts",
    "Explain ideas or concepts in own words",
    "Use knowledge or methods in new but familiar situations. Example verbs: calculate, demonstrate, use, implement.",
    "Break information into parts and examine relationships or patterns. Example verbs: differentiate, compare, "
    "examine, infer.",
    "Make judgments based on criteria and standards. Example verbs: justify, critique, assess, argue.",
    "Combine elements to form a new pattern, structure, or product. Example verbs: design, compose, formulate, "
    "generate.",
};

constexpr std::array<std::string_view, 3> kDifficultyDescriptions{
    "Direct use of a single idea from the chapter with little or no intermediate work.",
    "Requires a few connected steps or combining two closely related ideas from the chapter.",
    "Involves complex reasoning, integration of several sub-topics, or solving non-trivial problems that demand "
    "deeper conceptual understanding.",
};

Json required_member(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_member(const Json& obj, const char* key) {
  Json v = required_member(obj, key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::string string_or_empty(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

YesNo parse_yes_no(const Json& obj, const char* key) {
  std::string v = trim(string_member(obj, key));
  if (iequals(v, "yes")) return YesNo::Yes;
  if (iequals(v, "no")) return YesNo::No;
  throw ParseError(std::string("field '") + key + "' must be Yes or No, got '" + v + "'");
}

}  // namespace

std::string_view to_string(BloomLevel b) { return kBloomNames[static_cast<size_t>(b)]; }
std::string_view to_string(Difficulty d) { return kDifficultyNames[static_cast<size_t>(d)]; }

std::optional<BloomLevel> parse_bloom(std::string_view text) {
  std::string tok = leading_token(text);
  for (size_t i = 0; i < kBloomNames.size(); ++i)
    if (iequals(tok, kBloomNames[i])) return static_cast<BloomLevel>(i);
  return std::nullopt;
}

std::optional<Difficulty> parse_difficulty(std::string_view text) {
  std::string tok = leading_token(text);
  for (size_t i = 0; i < kDifficultyNames.size(); ++i)
    if (iequals(tok, kDifficultyNames[i])) return static_cast<Difficulty>(i);
  return std::nullopt;
}

std::string_view bloom_description(BloomLevel b) { return kBloomDescriptions[static_cast<size_t>(b)]; }
std::string_view difficulty_description(Difficulty d) { return kDifficultyDescriptions[static_cast<size_t>(d)]; }

std::string bloom_long_form(BloomLevel b) {
  return std::string(to_string(b)) + " - " + std::string(bloom_description(b));
}
std::string difficulty_long_form(Difficulty d) {
  return std::string(to_string(d)) + " - " + std::string(difficulty_description(d));
}

bool is_valid_pairing(BloomLevel bloom, Difficulty difficulty) {
  switch (bloom) {
    case BloomLevel::Remember: return difficulty == Difficulty::Easy;
    case BloomLevel::Understand: return difficulty != Difficulty::Hard;
    case BloomLevel::Apply: return true;
    case BloomLevel::Analyze:
    case BloomLevel::Evaluate:
    case BloomLevel::Create: return difficulty != Difficulty::Easy;
  }
  return false;
}

std::string BloomDifficultyPair::name() const {
  return std::string(to_string(difficulty)) + "-" + std::string(to_string(bloom));
}

BloomDifficultyPair BloomDifficultyPair::parse(std::string_view text) {
  std::string t = trim(text);
  size_t sep = t.find_first_of("-_/: ");
  if (sep == std::string::npos) throw ValidationError("category '" + t + "' is not of the form Difficulty-Bloom");
  std::string a = t.substr(0, sep), b = trim(std::string_view(t).substr(sep + 1));
  BloomDifficultyPair p;
  if (auto d = parse_difficulty(a); d) {
    auto bl = parse_bloom(b);
    if (!bl) throw ValidationError("unknown Bloom level in category '" + t + "'");
    p.difficulty = *d;
    p.bloom = *bl;
  } else if (auto bl2 = parse_bloom(a); bl2) {
    auto d2 = parse_difficulty(b);
    if (!d2) throw ValidationError("unknown difficulty in category '" + t + "'");
    p.difficulty = *d2;
    p.bloom = *bl2;
  } else {
    throw ValidationError("category '" + t + "' is not of the form Difficulty-Bloom");
  }
  return p;
}

std::vector<BloomDifficultyPair> default_target_categories() {
  return {{BloomLevel::Apply, Difficulty::Hard},
          {BloomLevel::Analyze, Difficulty::Hard},
          {BloomLevel::Evaluate, Difficulty::Hard},
          {BloomLevel::Create, Difficulty::Hard}};
}

// ---------------------------------------------------------------- graphs

SolutionGraph SolutionGraph::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("solution_graph must be an object");
  SolutionGraph g;
  Json nodes = j.contains("nodes") ? j["nodes"] : Json::array();
  Json edges = j.contains("edges") ? j["edges"] : Json::array();
  if (!nodes.is_array() || !edges.is_array()) throw ParseError("solution_graph nodes/edges must be arrays");
  for (const auto& n : nodes) {
    if (!n.is_object()) throw ParseError("solution_graph node must be an object");
    g.nodes.push_back({string_member(n, "id"), string_or_empty(n, "content")});
  }
  for (const auto& e : edges) {
    if (!e.is_object()) throw ParseError("solution_graph edge must be an object");
    g.edges.push_back({string_member(e, "from"), string_member(e, "to"), string_or_empty(e, "operation")});
  }
  return g;
}

Json SolutionGraph::to_json() const {
  Json n = Json::array(), e = Json::array();
  for (const auto& x : nodes) n.push_back({{"id", x.id}, {"content", x.content}});
  for (const auto& x : edges) e.push_back({{"from", x.from}, {"to", x.to}, {"operation", x.operation}});
  return {{"nodes", n}, {"edges", e}};
}

namespace {

// Nodes lying on some directed cycle (Tarjan SCCs of size > 1, plus self loops).
std::vector<std::string> cyclic_nodes(const std::vector<std::string>& ids,
                                      const std::vector<std::vector<size_t>>& adj) {
  const size_t n = ids.size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false), cyclic(n, false);
  std::vector<size_t> stack;
  int counter = 0;
  std::function<void(size_t)> strong = [&](size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (size_t w : adj[v]) {
      if (w == v) cyclic[v] = true;
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<size_t> comp;
      size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      if (comp.size() > 1)
        for (size_t c : comp) cyclic[c] = true;
    }
  };
  for (size_t v = 0; v < n; ++v)
    if (index[v] < 0) strong(v);
  std::vector<std::string> out;
  for (size_t v = 0; v < n; ++v)
    if (cyclic[v]) out.push_back(ids[v]);
  return out;
}

}  // namespace

std::vector<Violation> validate_solution_graph(const SolutionGraph& g) {
  std::vector<Violation> out;
  if (g.nodes.empty()) out.push_back({"empty_graph", "solution graph has no nodes"});
  std::unordered_map<std::string, size_t> pos;
  std::vector<std::string> ids;
  for (const auto& n : g.nodes) {
    if (trim(n.id).empty()) {
      out.push_back({"empty_node_id", "solution graph node with empty id"});
      continue;
    }
    if (!pos.emplace(n.id, ids.size()).second) {
      out.push_back({"duplicate_node", "duplicate node id '" + n.id + "'"});
      continue;
    }
    ids.push_back(n.id);
  }
  std::vector<std::vector<size_t>> adj(ids.size());
  for (const auto& e : g.edges) {
    auto f = pos.find(e.from), t = pos.find(e.to);
    if (f == pos.end())
      out.push_back({"dangling_edge", "edge endpoint '" + e.from + "' does not name a node"});
    if (t == pos.end()) out.push_back({"dangling_edge", "edge endpoint '" + e.to + "' does not name a node"});
    if (f != pos.end() && t != pos.end()) adj[f->second].push_back(t->second);
  }
  auto cyc = cyclic_nodes(ids, adj);
  if (!cyc.empty()) {
    std::string msg = "solution graph has a cycle through";
    for (const auto& c : cyc) msg += " " + c;
    out.push_back({"cycle", msg});
  }
  return out;
}

// ---------------------------------------------------------------- candidates

const std::string* McqCandidate::option(char label) const {
  auto it = options.find(label);
  return it == options.end() ? nullptr : &it->second;
}

std::vector<Violation> validate_candidate(const McqCandidate& c) {
  std::vector<Violation> out;
  if (trim(c.question).empty()) out.push_back({"empty_question", "question text is empty"});
  bool all_labels = c.options.size() == 5;
  for (char l : kOptionLabels)
    if (!c.options.count(l)) all_labels = false;
  if (!all_labels)
    out.push_back({"option_count", "expected exactly five options A-E, got " + std::to_string(c.options.size())});
  for (const auto& [label, text] : c.options) {
    if (trim(text).empty()) out.push_back({"empty_option", std::string("option ") + label + " is empty"});
  }
  if (const auto* e = c.option('E'); e && *e != kNoneOfTheAbove)
    out.push_back({"option_e_text", "option E must be exactly \"None of the above\", got \"" + *e + "\""});
  std::string ans = trim(c.correct_answer);
  if (!(ans.size() == 1 && ans[0] >= 'A' && ans[0] <= 'E'))
    out.push_back({"correct_answer", "correct_answer must be one of A-E, got \"" + c.correct_answer + "\""});
  if (!is_valid_pairing(c.bloom, c.difficulty))
    out.push_back({"pairing", "invalid pairing " + std::string(to_string(c.bloom)) + " x " +
                                  std::string(to_string(c.difficulty))});
  for (auto& v : validate_solution_graph(c.solution_graph)) out.push_back(std::move(v));
  return out;
}

Json to_agent_json(const McqCandidate& c) {
  Json j = Json::object();
  j["solution_graph"] = c.solution_graph.to_json();
  j["question"] = c.question;
  Json opts = Json::object();
  for (const auto& [label, text] : c.options) opts[std::string(1, label)] = text;
  j["options"] = opts;
  j["correct_answer"] = c.correct_answer;
  j["complete_solution"] = c.complete_solution;
  for (const auto& [k, v] : c.extras.items()) j[k] = v;
  return j;
}

McqCandidate candidate_from_agent_json(const Json& doc, const McqCandidate* base) {
  if (!doc.is_object()) throw ParseError("candidate must be a JSON object");
  McqCandidate c = base ? *base : McqCandidate{};
  auto need = [&](const char* key) {
    if (!doc.contains(key) && !base) throw ParseError(std::string("missing field '") + key + "'");
    return doc.contains(key);
  };
  if (need("question")) c.question = string_member(doc, "question");
  if (need("options")) {
    const Json& o = doc["options"];
    std::map<char, std::string> opts;
    if (o.is_object()) {
      for (const auto& [k, v] : o.items()) {
        std::string key = trim(k);
        if (key.size() != 1 || key[0] < 'A' || key[0] > 'E')
          throw ParseError("option key '" + k + "' is not one of A-E");
        if (!v.is_string()) throw ParseError("option " + key + " must be a string");
        if (!opts.emplace(key[0], v.get<std::string>()).second) throw ParseError("duplicate option " + key);
      }
    } else if (o.is_array()) {
      for (const auto& item : o) {
        if (!item.is_object()) throw ParseError("option entries must be objects");
        std::string key = trim(string_member(item, "label"));
        if (key.size() != 1 || key[0] < 'A' || key[0] > 'E')
          throw ParseError("option key '" + key + "' is not one of A-E");
        std::string text = item.contains("solution") ? string_member(item, "solution") : string_member(item, "text");
        if (!opts.emplace(key[0], text).second) throw ParseError("duplicate option " + key);
      }
    } else {
      throw ParseError("options must be an object keyed A-E");
    }
    c.options = std::move(opts);
  }
  if (need("correct_answer")) c.correct_answer = trim(string_member(doc, "correct_answer"));
  if (need("solution_graph")) c.solution_graph = SolutionGraph::from_json(doc["solution_graph"]);
  if (need("complete_solution")) c.complete_solution = string_member(doc, "complete_solution");
  static const std::set<std::string> known{"question", "options", "correct_answer", "solution_graph",
                                           "complete_solution"};
  for (const auto& [k, v] : doc.items())
    if (!known.count(k)) c.extras[k] = v;
  return c;
}

// ---------------------------------------------------------------- extraction

namespace {

std::string strip_fences(std::string_view raw) {
  std::string out;
  size_t i = 0;
  while (i < raw.size()) {
    size_t eol = raw.find('\n', i);
    std::string_view line = raw.substr(i, eol == std::string_view::npos ? std::string_view::npos : eol - i);
    std::string t = trim(line);
    if (t.rfind("```", 0) != 0) {
      out.append(line);
      out.push_back('\n');
    }
    if (eol == std::string_view::npos) break;
    i = eol + 1;
  }
  return out;
}

// End index (inclusive) of the balanced object starting at `start`, or npos.
size_t balanced_end(const std::string& s, size_t start) {
  int depth = 0;
  bool in_str = false, esc = false;
  for (size_t i = start; i < s.size(); ++i) {
    char ch = s[i];
    if (in_str) {
      if (esc) esc = false;
      else if (ch == '\\') esc = true;
      else if (ch == '"') in_str = false;
      continue;
    }
    if (ch == '"') in_str = true;
    else if (ch == '{' || ch == '[') ++depth;
    else if (ch == '}' || ch == ']') {
      if (--depth == 0) return ch == '}' ? i : std::string::npos;
      if (depth < 0) return std::string::npos;
    }
  }
  return std::string::npos;
}

}  // namespace

Json extract_json(std::string_view raw) {
  std::string text = strip_fences(raw);
  std::string t = trim(text);
  if (!t.empty() && t[0] == '[') {
    Json whole;
    bool ok = true;
    try {
      whole = parse_json_strict(t);
    } catch (const ParseError&) {
      ok = false;
    }
    if (ok) throw ParseError("agent output is JSON but not an object at top level");
  }
  std::string first_error;
  for (size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
    size_t end = balanced_end(text, pos);
    if (end == std::string::npos) continue;
    try {
      Json j = parse_json_strict(std::string_view(text).substr(pos, end - pos + 1));
      if (j.is_object()) return j;
    } catch (const ParseError& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw ParseError("no valid JSON object in agent output: " + first_error);
  throw ParseError("no balanced JSON object in agent output");
}

// ---------------------------------------------------------------- benchmark records

std::string render_options_block(const McqCandidate& c) {
  std::string out = "Options:";
  for (const auto& [label, text] : c.options) {
    out += "\n";
    out.push_back(label);
    out += ". " + text;
  }
  return out;
}

BenchmarkTask BenchmarkTask::from_candidate(std::string task_id, const McqCandidate& c, std::string competency_name,
                                            std::string area_name, std::string domain, std::string book_name) {
  BenchmarkTask t;
  t.task_id = std::move(task_id);
  t.mcq = c;
  t.task_statement = c.question + "\n\n" + render_options_block(c);
  t.competency = std::move(competency_name);
  t.area_name = std::move(area_name);
  t.domain = std::move(domain);
  t.book_name = std::move(book_name);
  t.difficulty_text = difficulty_long_form(c.difficulty);
  t.bloom_text = bloom_long_form(c.bloom);
  return t;
}

BenchmarkTask BenchmarkTask::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("benchmark record must be an object");
  BenchmarkTask t;
  t.task_id = string_member(j, "task_id");
  t.task_statement = string_member(j, "task_statement");
  t.task_type = string_or_empty(j, "task_type");
  t.difficulty_text = string_member(j, "difficulty");
  t.bloom_text = string_member(j, "bloom_level");
  auto d = parse_difficulty(t.difficulty_text);
  if (!d) throw ParseError("task " + t.task_id + ": unknown difficulty '" + t.difficulty_text + "'");
  auto b = parse_bloom(t.bloom_text);
  if (!b) throw ParseError("task " + t.task_id + ": unknown bloom_level '" + t.bloom_text + "'");
  t.mcq.difficulty = *d;
  t.mcq.bloom = *b;

  Json choices = required_member(j, "choices");
  if (!choices.is_array()) throw ParseError("task " + t.task_id + ": choices must be an array");
  for (const auto& ch : choices) {
    if (!ch.is_object()) throw ParseError("task " + t.task_id + ": choice must be an object");
    std::string label = trim(string_member(ch, "label"));
    if (label.size() != 1 || label[0] < 'A' || label[0] > 'E')
      throw ParseError("task " + t.task_id + ": choice label '" + label + "' is not one of A-E");
    if (!t.mcq.options.emplace(label[0], string_member(ch, "solution")).second)
      throw ParseError("task " + t.task_id + ": duplicate choice " + label);
  }
  t.competency = string_member(j, "competency");
  t.area_name = string_or_empty(j, "area_name");
  t.domain = string_or_empty(j, "domain");
  t.book_name = string_or_empty(j, "book_name");
  t.mcq.provenance.chapter_id = string_or_empty(j, "chapter_id");
  t.mcq.provenance.book_id = string_or_empty(j, "book_id");
  t.mcq.provenance.competency_id = string_or_empty(j, "competency_id");
  t.mcq.correct_answer = trim(string_member(j, "correct_answer"));
  t.mcq.solution_graph = SolutionGraph::from_json(required_member(j, "solution_graph"));
  t.mcq.complete_solution = string_or_empty(j, "complete_solution");

  // The stem is the statement minus a trailing listing of exactly these options.
  std::string block = "\n\n" + render_options_block(t.mcq);
  const std::string& st = t.task_statement;
  if (st.size() >= block.size() && st.compare(st.size() - block.size(), block.size(), block) == 0)
    t.mcq.question = st.substr(0, st.size() - block.size());
  else
    t.mcq.question = st;

  static const std::set<std::string> known{
      "task_id",   "task_statement", "task_type", "difficulty",     "bloom_level",    "choices",
      "competency", "area_name",     "domain",    "book_name",      "chapter_id",     "correct_answer",
      "solution_graph", "complete_solution", "book_id", "competency_id"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) t.extras[k] = v;
  return t;
}

Json BenchmarkTask::to_json() const {
  Json j = Json::object();
  j["task_id"] = task_id;
  j["task_statement"] = task_statement;
  j["task_type"] = task_type;
  j["difficulty"] = difficulty_text.empty() ? difficulty_long_form(mcq.difficulty) : difficulty_text;
  j["bloom_level"] = bloom_text.empty() ? bloom_long_form(mcq.bloom) : bloom_text;
  Json choices = Json::array();
  for (const auto& [label, text] : mcq.options) choices.push_back({{"label", std::string(1, label)}, {"solution", text}});
  j["choices"] = choices;
  j["competency"] = competency;
  j["area_name"] = area_name;
  j["domain"] = domain;
  j["book_name"] = book_name;
  j["chapter_id"] = mcq.provenance.chapter_id;
  j["correct_answer"] = mcq.correct_answer;
  j["solution_graph"] = mcq.solution_graph.to_json();
  j["complete_solution"] = mcq.complete_solution;
  if (!mcq.provenance.book_id.empty()) j["book_id"] = mcq.provenance.book_id;
  if (!mcq.provenance.competency_id.empty()) j["competency_id"] = mcq.provenance.competency_id;
  for (const auto& [k, v] : extras.items()) j[k] = v;
  return j;
}

std::vector<BenchmarkTask> read_benchmark(const std::filesystem::path& path) {
  std::vector<BenchmarkTask> out;
  std::set<std::string> seen;
  size_t row = 0;
  for (const auto& j : read_jsonl_file(path)) {
    ++row;
    BenchmarkTask t;
    try {
      t = BenchmarkTask::from_json(j);
    } catch (const Error& e) {
      throw ParseError(path.string() + ": record " + std::to_string(row) + ": " + e.what());
    }
    if (!seen.insert(t.task_id).second)
      throw ValidationError(path.string() + ": duplicate task_id '" + t.task_id + "'");
    out.push_back(std::move(t));
  }
  return out;
}

void write_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkTask>& tasks) {
  std::vector<Json> rows;
  rows.reserve(tasks.size());
  for (const auto& t : tasks) rows.push_back(t.to_json());
  write_jsonl_file(path, rows);
}

// ---------------------------------------------------------------- knowledge

ChapterKnowledge ChapterKnowledge::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("chapter knowledge must be an object");
  ChapterKnowledge k;
  auto list = [&](const char* key, Json& dst) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    if (!it->is_array()) throw ParseError(std::string("knowledge field '") + key + "' must be an array");
    dst = *it;
  };
  list("core_concepts", k.core_concepts);
  list("definitions", k.definitions);
  list("theorems_or_rules", k.theorems_or_rules);
  list("procedures", k.procedures);
  list("algorithms", k.algorithms);
  list("derived_relationships", k.derived_relationships);
  Json caveats = Json::array();
  list("subtle_constraints_or_caveats", caveats);
  for (const auto& c : caveats) {
    if (!c.is_string()) throw ParseError("subtle_constraints_or_caveats entries must be strings");
    k.subtle_constraints_or_caveats.push_back(c.get<std::string>());
  }
  if (auto it = j.find("dependency_graph"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("dependency_graph must be an object");
    Json nodes = it->contains("nodes") ? (*it)["nodes"] : Json::array();
    Json edges = it->contains("edges") ? (*it)["edges"] : Json::array();
    if (!nodes.is_array() || !edges.is_array()) throw ParseError("dependency_graph nodes/edges must be arrays");
    for (const auto& n : nodes) {
      if (!n.is_object()) throw ParseError("dependency_graph node must be an object");
      k.nodes.push_back({string_member(n, "id"), string_or_empty(n, "label"), string_or_empty(n, "type")});
    }
    for (const auto& e : edges) {
      if (!e.is_object()) throw ParseError("dependency_graph edge must be an object");
      k.edges.push_back({string_member(e, "from"), string_member(e, "to"), string_or_empty(e, "relation")});
    }
  }

  std::unordered_map<std::string, size_t> pos;
  std::vector<std::string> ids;
  for (const auto& n : k.nodes) {
    if (!pos.emplace(n.id, ids.size()).second) {
      k.warnings.push_back("dependency_graph: duplicate node id '" + n.id + "'");
      continue;
    }
    ids.push_back(n.id);
  }
  std::vector<std::vector<size_t>> adj(ids.size());
  for (const auto& e : k.edges) {
    auto f = pos.find(e.from), t = pos.find(e.to);
    if (f == pos.end()) k.warnings.push_back("dependency_graph: edge endpoint '" + e.from + "' does not name a node");
    if (t == pos.end()) k.warnings.push_back("dependency_graph: edge endpoint '" + e.to + "' does not name a node");
    if (e.relation != "requires" && e.relation != "depends_on" && e.relation != "uses")
      k.warnings.push_back("dependency_graph: unknown relation '" + e.relation + "' on " + e.from + "->" + e.to);
    if (f != pos.end() && t != pos.end()) adj[f->second].push_back(t->second);
  }
  auto cyc = cyclic_nodes(ids, adj);
  if (!cyc.empty()) {
    std::string msg = "dependency_graph: cycle through";
    for (const auto& c : cyc) msg += " " + c;
    k.warnings.push_back(msg);
  }
  return k;
}

Json ChapterKnowledge::to_json() const {
  Json j = Json::object();
  j["core_concepts"] = core_concepts;
  j["definitions"] = definitions;
  j["theorems_or_rules"] = theorems_or_rules;
  j["procedures"] = procedures;
  j["algorithms"] = algorithms;
  j["derived_relationships"] = derived_relationships;
  j["subtle_constraints_or_caveats"] = subtle_constraints_or_caveats;
  Json n = Json::array(), e = Json::array();
  for (const auto& x : nodes) n.push_back({{"id", x.id}, {"label", x.label}, {"type", x.type}});
  for (const auto& x : edges) e.push_back({{"from", x.from}, {"to", x.to}, {"relation", x.relation}});
  j["dependency_graph"] = {{"nodes", n}, {"edges", e}};
  return j;
}

// ---------------------------------------------------------------- verifier

std::string_view to_string(YesNo v) { return v == YesNo::Yes ? "Yes" : "No"; }
std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "Pass" : "Fail"; }

Verdict VerifierReport::overall_verdict() const {
  bool all = json_format_valid == YesNo::Yes && mcq_integrity == YesNo::Yes && blooms_alignment == YesNo::Yes &&
             constraint_compliance == YesNo::Yes;
  return all ? Verdict::Pass : Verdict::Fail;
}

bool VerifierReport::format_only_failure() const {
  return json_format_valid == YesNo::No && mcq_integrity == YesNo::Yes && blooms_alignment == YesNo::Yes &&
         constraint_compliance == YesNo::Yes;
}

VerifierReport VerifierReport::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("verifier report must be an object");
  VerifierReport r;
  r.json_format_valid = parse_yes_no(j, "json_format_valid");
  r.mcq_integrity = parse_yes_no(j, "mcq_integrity");
  r.blooms_alignment = parse_yes_no(j, "blooms_alignment");
  r.constraint_compliance = parse_yes_no(j, "constraint_compliance");
  std::string v = trim(string_member(j, "overall_verdict"));
  if (iequals(v, "pass")) r.agent_verdict = Verdict::Pass;
  else if (iequals(v, "fail")) r.agent_verdict = Verdict::Fail;
  else throw ParseError("overall_verdict must be Pass or Fail, got '" + v + "'");
  r.explanation = string_or_empty(j, "explanation");
  if (auto it = j.find("question_evaluation"); it != j.end() && it->is_object()) {
    const Json& q = *it;
    if (q.contains("distractors_plausible")) r.question_evaluation.distractors_plausible = parse_yes_no(q, "distractors_plausible");
    if (auto mi = q.find("main_issues"); mi != q.end()) {
      if (mi->is_array()) {
        for (const auto& s : *mi)
          r.question_evaluation.main_issues.push_back(s.is_string() ? s.get<std::string>() : s.dump());
      } else if (mi->is_string()) {
        r.question_evaluation.main_issues.push_back(mi->get<std::string>());
      }
    }
    r.question_evaluation.fix = string_or_empty(q, "fix");
  }
  if (r.overall_verdict() != r.agent_verdict)
    r.notes.push_back("verifier verdict " + std::string(to_string(r.agent_verdict)) +
                      " disagrees with its dimension fields; recomputed verdict is " +
                      std::string(to_string(r.overall_verdict())));
  return r;
}

Json VerifierReport::to_json() const {
  Json issues = question_evaluation.main_issues;
  Json j = {{"json_format_valid", to_string(json_format_valid)},
            {"mcq_integrity", to_string(mcq_integrity)},
            {"blooms_alignment", to_string(blooms_alignment)},
            {"constraint_compliance", to_string(constraint_compliance)},
            {"overall_verdict", to_string(overall_verdict())},
            {"explanation", explanation},
            {"question_evaluation",
             {{"distractors_plausible", to_string(question_evaluation.distractors_plausible)},
              {"main_issues", issues},
              {"fix", question_evaluation.fix}}}};
  if (agent_verdict != overall_verdict()) j["agent_verdict"] = to_string(agent_verdict);
  if (!notes.empty()) j["notes"] = notes;
  return j;
}

VerifierReport VerifierReport::local_failure(bool format_ok, std::vector<std::string> issues) {
  VerifierReport r;
  r.json_format_valid = format_ok ? YesNo::Yes : YesNo::No;
  r.mcq_integrity = format_ok ? YesNo::No : YesNo::Yes;
  r.blooms_alignment = YesNo::Yes;
  r.constraint_compliance = format_ok ? YesNo::No : YesNo::Yes;
  r.agent_verdict = Verdict::Fail;
  r.explanation = format_ok ? "candidate violates structural constraints" : "output is not valid JSON";
  r.question_evaluation.main_issues = issues;
  r.question_evaluation.fix = format_ok ? "fix the listed structural violations" : "emit one valid JSON object";
  r.notes = std::move(issues);
  return r;
}

}  // namespace benchforge
