#include "benchforge/dedup.hpp"

#include <cmath>
#include <map>

#include "benchforge/error.hpp"

namespace benchforge {

void DedupConfig::validate() const {
  if (!std::isfinite(threshold) || threshold < -1.0 || threshold > 1.0)
    throw ValidationError("dedup threshold must be a finite value in [-1, 1]");
}

std::string dedup_key(const McqCandidate& c) {
  std::string answer;
  if (!c.correct_answer.empty())
    if (const auto* text = c.option(c.correct_answer[0])) answer = *text;
  return c.question + " " + answer;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size())
    throw ValidationError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double dot = 0, nu = 0, nv = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) throw ValidationError("cosine: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

FilterResult greedy_filter(const std::vector<std::vector<double>>& embeddings, const DedupConfig& cfg) {
  cfg.validate();
  FilterResult r;
  for (size_t i = 0; i < embeddings.size(); ++i) {
    bool found = false;
    DedupMatch best{i, 0, -2.0};
    for (size_t j : r.retained) {
      double s = cosine(embeddings[i], embeddings[j]);
      if (s > best.similarity) {
        best.similarity = s;
        best.matched = j;
        found = true;
      }
    }
    if (found && best.similarity > cfg.threshold) r.removed.push_back(best);
    else r.retained.push_back(i);
  }
  return r;
}

DedupOutcome dedup_tasks(const std::vector<BenchmarkTask>& tasks, Gateway& embedder, const DedupConfig& cfg) {
  cfg.validate();
  std::vector<std::string> order;
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const auto& p = tasks[i].mcq.provenance;
    std::string key = p.book_id + "." + p.chapter_id;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(i);
  }

  std::vector<bool> keep(tasks.size(), true);
  Json removed = Json::array();
  Json chapters = Json::array();
  for (const auto& key : order) {
    const auto& idx = groups[key];
    std::vector<std::string> texts;
    for (size_t i : idx) texts.push_back(dedup_key(tasks[i].mcq));
    auto vectors = embedder.embed(texts);
    FilterResult fr = greedy_filter(vectors, cfg);
    for (const auto& m : fr.removed) {
      keep[idx[m.removed]] = false;
      removed.push_back({{"chapter", key},
                         {"task_id", tasks[idx[m.removed]].task_id},
                         {"matched_task_id", tasks[idx[m.matched]].task_id},
                         {"similarity", m.similarity}});
    }
    chapters.push_back({{"chapter", key}, {"input", idx.size()}, {"retained", fr.retained.size()}});
  }

  DedupOutcome out;
  for (size_t i = 0; i < tasks.size(); ++i)
    if (keep[i]) out.retained.push_back(tasks[i]);
  out.report = {{"embedder", {{"provider", embedder.provider().name()}, {"model_id", embedder.model_id()}}},
                {"threshold", cfg.threshold},
                {"input_count", tasks.size()},
                {"retained_count", out.retained.size()},
                {"removed_count", removed.size()},
                {"chapters", chapters},
                {"removed", removed}};
  return out;
}

}  // namespace benchforge
