#include "benchforge/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "benchforge/error.hpp"
#include "benchforge/hashing.hpp"

namespace benchforge {

double normalized_entropy(const std::vector<std::uint64_t>& counts, std::size_t N) {
  if (N < 2) throw ValidationError("normalized entropy needs at least 2 competencies");
  std::size_t nonzero = 0;
  long double total = 0;
  for (auto c : counts) {
    total += c;
    if (c) ++nonzero;
  }
  if (total == 0) throw ValidationError("normalized entropy of an empty distribution");
  if (nonzero > N) throw ValidationError("more counted competencies than N");
  long double h = 0;
  for (auto c : counts) {
    if (!c) continue;
    long double p = c / total;
    h -= p * std::log(p);
  }
  return static_cast<double>(h / std::log(static_cast<long double>(N)));
}

double normalized_entropy(const CompetencyDistribution& d) {
  if (d.counts.size() > d.N) throw ValidationError("distribution has more competencies than N");
  std::vector<std::uint64_t> c;
  for (const auto& [k, v] : d.counts) c.push_back(v);
  return normalized_entropy(c, d.N);
}

CompetencyDistribution distribution_of(const std::vector<BenchmarkTask>& benchmark, const Taxonomy& taxonomy) {
  CompetencyDistribution d;
  d.N = taxonomy.competency_count();
  for (const auto& t : benchmark) ++d.counts[task_competency(t, taxonomy).competency_id];
  return d;
}

namespace {

std::vector<double> values_of(const ModelAccuracyVector& acc) {
  std::vector<double> v;
  for (const auto& [k, a] : acc) v.push_back(a);
  return v;
}

}  // namespace

double difficulty(const std::vector<double>& acc) {
  if (acc.empty()) throw ValidationError("difficulty of an empty accuracy vector");
  return 1.0 - *std::max_element(acc.begin(), acc.end());
}

double separability(const std::vector<double>& acc) {
  if (acc.empty()) throw ValidationError("separability of an empty accuracy vector");
  long double mean = 0;
  for (double a : acc) mean += a;
  mean /= acc.size();
  long double mad = 0;
  for (double a : acc) mad += std::fabs(a - mean);
  return static_cast<double>(mad / acc.size());
}

double difficulty(const ModelAccuracyVector& acc) { return difficulty(values_of(acc)); }
double separability(const ModelAccuracyVector& acc) { return separability(values_of(acc)); }

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("spearman: vectors differ in length");
  if (x.size() < 2) throw ValidationError("spearman needs at least 2 models");
  auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  if (rx == ry) return 1.0;
  double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

std::optional<double> spearman(const ModelAccuracyVector& x, const ModelAccuracyVector& y) {
  if (x.size() != y.size()) throw ValidationError("spearman: model sets differ");
  std::vector<double> a, b;
  for (const auto& [m, v] : x) {
    auto it = y.find(m);
    if (it == y.end()) throw ValidationError("spearman: model '" + m + "' missing from one vector");
    a.push_back(v);
    b.push_back(it->second);
  }
  return spearman(a, b);
}

std::map<std::string, std::optional<double>> correlation_profile(
    const ModelAccuracyVector& overall, const std::map<std::string, ModelAccuracyVector>& per_competency) {
  std::map<std::string, std::optional<double>> out;
  for (const auto& [c, v] : per_competency) out[c] = spearman(overall, v);
  return out;
}

std::map<std::string, ModelAccuracyVector> competency_vectors(const AccuracyTable& table) {
  std::map<std::string, ModelAccuracyVector> out;
  for (const auto& s : table.slices) {
    if (s.rfind("competency:", 0) != 0) continue;
    auto& v = out[s.substr(11)];
    for (const auto& m : table.models) v[m] = table.at(m, s).accuracy();
  }
  return out;
}

ModelAccuracyVector macro_overall_vector(const AccuracyTable& table) {
  ModelAccuracyVector out;
  auto comps = competency_vectors(table);
  for (const auto& m : table.models) {
    double sum = 0;
    for (const auto& [c, v] : comps) sum += v.at(m);
    out[m] = comps.empty() ? 0.0 : sum / static_cast<double>(comps.size());
  }
  return out;
}

ModelAccuracyVector overall_accuracy(const AccuracyTable& table) {
  ModelAccuracyVector out;
  for (const auto& m : table.models) out[m] = table.at(m, "overall").accuracy();
  return out;
}

// ---------------------------------------------------------------- classification

namespace {

std::string normalize_reply(std::string_view raw) {
  std::string s(raw);
  auto strip = [&](const char* chars) {
    size_t b = s.find_first_not_of(chars);
    size_t e = s.find_last_not_of(chars);
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  strip(" \t\r\n*`\"'.");
  return s;
}

bool iequal(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string choose(Gateway& gw, const std::string& prompt, const std::vector<std::string>& ids,
                   const std::string& tag, int& retries) {
  if (ids.size() == 1) return ids.front();
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest req;
    req.messages = {{"user", prompt}};
    req.tag = tag;
    last = normalize_reply(gw.chat(req).text);
    for (const auto& id : ids)
      if (last == id) return id;
    for (const auto& id : ids)
      if (iequal(last, id)) return id;
    if (attempt == 0) ++retries;
  }
  throw ParseError("classifier answered '" + last + "', which is not one of the offered identifiers (" + tag + ")");
}

}  // namespace

Classification classify_external_problem(const std::string& problem_text, const Taxonomy& taxonomy,
                                         Gateway& classifier, const PromptLibrary& prompts,
                                         const std::string& tag_prefix) {
  Classification c;
  std::string area_choices;
  std::vector<std::string> area_ids;
  for (const auto& a : taxonomy.areas()) {
    area_ids.push_back(a.area_id);
    area_choices += "- " + a.area_id + ": " + a.name;
    if (!a.description.empty()) area_choices += ". " + a.description;
    area_choices += "\n";
  }
  std::string p1 = prompts.render("classify_area", {{"domain", taxonomy.domain_name()},
                                                    {"choices", area_choices},
                                                    {"problem", problem_text}});
  c.area_id = choose(classifier, p1, area_ids, tag_prefix + "/area", c.off_list_retries);

  const Area* area = taxonomy.find_area(c.area_id);
  std::string comp_choices;
  std::vector<std::string> comp_ids;
  for (const auto* comp : taxonomy.competencies_in(c.area_id)) {
    comp_ids.push_back(comp->competency_id);
    comp_choices += "- " + comp->competency_id + ": " + comp->name;
    if (!comp->description.empty()) comp_choices += ". " + comp->description;
    comp_choices += "\n";
  }
  std::string p2 = prompts.render("classify_competency", {{"domain", taxonomy.domain_name()},
                                                          {"area_name", area ? area->name : c.area_id},
                                                          {"choices", comp_choices},
                                                          {"problem", problem_text}});
  c.competency_id = choose(classifier, p2, comp_ids, tag_prefix + "/competency", c.off_list_retries);
  return c;
}

// ---------------------------------------------------------------- review samples

Json ReviewSamples::to_json() const {
  return {{"uniform", uniform}, {"incorrectly_solved", incorrectly_solved}, {"incorrect_pool_size", incorrect_pool_size}};
}

namespace {

void shuffle(std::vector<std::string>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

ReviewSamples select_review_samples(const std::vector<BenchmarkTask>& benchmark,
                                    const std::map<std::string, std::vector<EvalRecord>>& records_by_model,
                                    double fraction, const std::set<std::string>& frontier_models,
                                    std::uint64_t rng_seed, std::optional<std::size_t> incorrect_cap) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("review fraction must be in (0, 1]");
  ReviewSamples out;
  std::vector<std::string> ids;
  for (const auto& t : benchmark) ids.push_back(t.task_id);

  std::mt19937_64 rng(derive_seed(rng_seed, {"review", "uniform"}));
  std::vector<std::string> pool = ids;
  shuffle(pool, rng);
  auto k = static_cast<size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
  pool.resize(std::min(k, pool.size()));
  out.uniform = pool;

  std::set<std::string> missed;
  for (const auto& m : frontier_models) {
    auto it = records_by_model.find(m);
    if (it == records_by_model.end()) throw MissingArtifactError("no evaluation records for frontier model '" + m + "'");
    for (const auto& r : it->second)
      if (!r.is_correct) missed.insert(r.task_id);
  }
  std::vector<std::string> wrong;
  for (const auto& id : ids)
    if (missed.count(id)) wrong.push_back(id);
  out.incorrect_pool_size = wrong.size();
  std::mt19937_64 rng2(derive_seed(rng_seed, {"review", "incorrect"}));
  shuffle(wrong, rng2);
  if (incorrect_cap && wrong.size() > *incorrect_cap) wrong.resize(*incorrect_cap);
  out.incorrectly_solved = wrong;
  return out;
}

}  // namespace benchforge
