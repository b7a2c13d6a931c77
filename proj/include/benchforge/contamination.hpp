#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "benchforge/json_util.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

std::size_t word_count(std::string_view s);
/// Plain number, optionally signed, with thousands separators, a currency
/// sign or a trailing percent ("$1,250.00", "-3.5%").
bool is_numeric_option(std::string_view s);
/// Digits, operators, grouping and comparison symbols, backslash commands,
/// and inline-math segments delimited by `$...$` or `\(...\)`.
bool is_math_expression(std::string_view s);

/// Every option A..D is short (<= 5 words), numeric or a math expression.
bool eligible(const BenchmarkTask& task);

/// Uniform over the incorrect labels among A..D. Throws ValidationError if
/// none is incorrect.
char pick_mask(const BenchmarkTask& task, std::mt19937_64& rng);

/// Mask for a task under a run seed; stable per task id.
char pick_mask(const BenchmarkTask& task, std::uint64_t seed);

/// Trim + ASCII case-fold equality.
bool ts_match(std::string_view guess, std::string_view truth);

std::string default_ts_template();
std::string render_ts_prompt(const BenchmarkTask& task, char masked_label, std::string_view tmpl);

struct TsGuessTrial {
  std::string task_id;
  char masked_label = 'A';
  std::vector<std::pair<char, std::string>> shown_options;
  std::string model_guess;
  bool matched = false;
  std::string note;

  Json to_json() const;
};

struct TsGuessSummary {
  std::string model_id;
  std::size_t benchmark_size = 0;
  std::size_t eligible_count = 0;
  std::size_t matched_count = 0;
  double rate = 0.0;

  Json to_json() const;
};

struct TsGuessResult {
  std::vector<TsGuessTrial> trials;
  TsGuessSummary summary;
};

/// One trial per eligible task. Throws ValidationError when no task is eligible.
TsGuessResult run_ts_guessing(const std::vector<BenchmarkTask>& benchmark, Gateway& model,
                              const std::string& model_name, std::uint64_t rng_seed,
                              std::string_view tmpl = default_ts_template(), std::size_t concurrency = 1);

}  // namespace benchforge
