#include "benchforge/contamination.hpp"

#include <atomic>
#include <cctype>
#include <cstring>
#include <regex>
#include <thread>

#include "benchforge/error.hpp"
#include "benchforge/hashing.hpp"
#include "benchforge/prompts.hpp"

namespace benchforge {

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// UTF-8 symbols accepted in expressions: minus, times, divide, middle dot,
// less/greater-or-equal, not equal, approx, square root, infinity, pi.
const char* const kMathSymbols[] = {"\xe2\x88\x92", "\xc3\x97", "\xc3\xb7", "\xc2\xb7", "\xe2\x89\xa4",
                                    "\xe2\x89\xa5", "\xe2\x89\xa0", "\xe2\x89\x88", "\xe2\x88\x9a",
                                    "\xe2\x88\x9e", "\xcf\x80"};

}  // namespace

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in) ++n;
    in = !ws;
  }
  return n;
}

bool is_numeric_option(std::string_view s) {
  static const std::regex re(
      R"(^[+-]?\s?(\$|\\\$|USD\s?|EUR\s?)?[+-]?(\d{1,3}(,\d{3})+|\d+)?(\.\d+)?\s?%?$)");
  std::string t = trim(s);
  if (t.empty() || t.find_first_of("0123456789") == std::string::npos) return false;
  return std::regex_match(t, re);
}

bool is_math_expression(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return false;
  bool any_math = false;
  size_t i = 0;
  while (i < t.size()) {
    char c = t[i];
    if (c == '$') {
      size_t close = t.find('$', i + 1);
      if (close == std::string::npos) return false;
      any_math = true;
      i = close + 1;
      continue;
    }
    if (c == '\\' && i + 1 < t.size() && t[i + 1] == '(') {
      size_t close = t.find("\\)", i + 2);
      if (close == std::string::npos) return false;
      any_math = true;
      i = close + 2;
      continue;
    }
    if (c == '\\' && i + 1 < t.size() && std::isalpha(static_cast<unsigned char>(t[i + 1]))) {
      i += 2;
      while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
      any_math = true;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      any_math = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || std::strchr("+-*/^=<>()[]{}|.,!%_'", c)) {
      if (c == 0) return false;
      ++i;
      continue;
    }
    bool matched = false;
    for (const char* sym : kMathSymbols) {
      size_t n = std::strlen(sym);
      if (t.compare(i, n, sym) == 0) {
        i += n;
        matched = true;
        any_math = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return any_math;
}

bool eligible(const BenchmarkTask& task) {
  for (char l : {'A', 'B', 'C', 'D'}) {
    const auto* o = task.mcq.option(l);
    if (!o) return false;
    if (word_count(*o) <= 5 || is_numeric_option(*o) || is_math_expression(*o)) continue;
    return false;
  }
  return true;
}

char pick_mask(const BenchmarkTask& task, std::mt19937_64& rng) {
  std::vector<char> wrong;
  for (char l : {'A', 'B', 'C', 'D'})
    if (task.mcq.correct_answer != std::string(1, l)) wrong.push_back(l);
  if (wrong.empty()) throw ValidationError("task " + task.task_id + " has no incorrect option among A-D");
  return wrong[uniform_index(rng, wrong.size())];
}

char pick_mask(const BenchmarkTask& task, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {"tsguess", task.task_id}));
  return pick_mask(task, rng);
}

bool ts_match(std::string_view guess, std::string_view truth) {
  std::string a = trim(guess), b = trim(truth);
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

std::string default_ts_template() {
  return "The following is a multiple-choice question from a benchmark. One answer option has been hidden.\n\n"
         "Question:\n{statement}\n\nOptions shown so far:\n{shown_options}\n\n"
         "Fill in option {masked_label}. Reply with the exact text of option {masked_label} only, without the "
         "label and without any explanation.";
}

std::string render_ts_prompt(const BenchmarkTask& task, char masked_label, std::string_view tmpl) {
  std::string shown;
  for (char l : kOptionLabels) {
    if (l >= masked_label) break;
    if (const auto* o = task.mcq.option(l)) {
      if (!shown.empty()) shown += "\n";
      shown.push_back(l);
      shown += ". " + *o;
    }
  }
  if (shown.empty()) shown = "(none)";
  return substitute(tmpl, {{"statement", task.stem()},
                           {"shown_options", shown},
                           {"masked_label", std::string(1, masked_label)}});
}

Json TsGuessTrial::to_json() const {
  Json shown = Json::array();
  for (const auto& [l, t] : shown_options) shown.push_back({{"label", std::string(1, l)}, {"text", t}});
  Json j = {{"task_id", task_id},
            {"masked_label", std::string(1, masked_label)},
            {"shown_options", shown},
            {"model_guess", model_guess},
            {"matched", matched}};
  if (!note.empty()) j["note"] = note;
  return j;
}

Json TsGuessSummary::to_json() const {
  return {{"model_id", model_id},
          {"benchmark_size", benchmark_size},
          {"eligible_count", eligible_count},
          {"matched_count", matched_count},
          {"rate", rate}};
}

TsGuessResult run_ts_guessing(const std::vector<BenchmarkTask>& benchmark, Gateway& model,
                              const std::string& model_name, std::uint64_t rng_seed, std::string_view tmpl,
                              std::size_t concurrency) {
  std::vector<const BenchmarkTask*> pool;
  for (const auto& t : benchmark)
    if (eligible(t)) pool.push_back(&t);
  if (pool.empty()) throw ValidationError("no task is eligible for TS-Guessing");

  TsGuessResult res;
  res.trials.resize(pool.size());
  std::atomic<size_t> next{0};
  const std::string tmpl_s(tmpl);
  auto worker = [&] {
    for (size_t k = next.fetch_add(1); k < pool.size(); k = next.fetch_add(1)) {
      const BenchmarkTask& t = *pool[k];
      TsGuessTrial trial;
      trial.task_id = t.task_id;
      trial.masked_label = pick_mask(t, rng_seed);
      for (char l : kOptionLabels) {
        if (l >= trial.masked_label) break;
        if (const auto* o = t.mcq.option(l)) trial.shown_options.emplace_back(l, *o);
      }
      ChatRequest req;
      req.messages = {{"user", render_ts_prompt(t, trial.masked_label, tmpl_s)}};
      req.tag = "tsguess/" + model_name + "/" + t.task_id;
      try {
        trial.model_guess = model.chat(req).text;
        trial.matched = ts_match(trial.model_guess, *t.mcq.option(trial.masked_label));
      } catch (const TransportError& e) {
        trial.note = std::string("transport: ") + e.what();
      }
      res.trials[k] = std::move(trial);
    }
  };
  size_t n = std::max<size_t>(1, std::min(concurrency, pool.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  res.summary.model_id = model_name;
  res.summary.benchmark_size = benchmark.size();
  res.summary.eligible_count = pool.size();
  for (const auto& t : res.trials) res.summary.matched_count += t.matched ? 1 : 0;
  res.summary.rate = static_cast<double>(res.summary.matched_count) / static_cast<double>(pool.size());
  return res;
}

}  // namespace benchforge
