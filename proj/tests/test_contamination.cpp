#include <map>

#include "benchforge/contamination.hpp"
#include "benchforge/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace benchforge;
using namespace benchforge::testing;

namespace {

BenchmarkTask with_options(std::vector<std::string> abcd, char answer = 'A', const std::string& id = "t") {
  BenchmarkTask t = make_task(id, "c1", 'A');
  for (int i = 0; i < 4; ++i) t.mcq.options[static_cast<char>('A' + i)] = abcd[i];
  t.mcq.correct_answer = std::string(1, answer);
  return t;
}

std::vector<BenchmarkTask> numeric_bench(std::size_t n) {
  std::vector<BenchmarkTask> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(with_options({std::to_string(i), std::to_string(i + 1), std::to_string(i + 2), std::to_string(i + 3)},
                               static_cast<char>('A' + i % 5), "t" + std::to_string(i)));
  return out;
}

Gateway gateway(std::shared_ptr<MockProvider> mock) {
  GatewayOptions o;
  o.role = "subject";
  o.model_id = "s";
  return Gateway(mock, std::make_shared<CostLedger>(), o);
}

}  // namespace

TEST_CASE("option classifiers") {
  CHECK(word_count("  one two\tthree\n") == 3);
  CHECK(word_count("") == 0);
  for (const char* s : {"42", "-3.5", "$1,250.00", "12%", "+7", "0.5"}) CHECK(is_numeric_option(s));
  for (const char* s : {"abc", "1.2.3", "$", "", "12 apples"}) CHECK_FALSE(is_numeric_option(s));
  CHECK(is_math_expression("$\\frac{-(e+2)}{\\sqrt{3e^2+4e+2}}$"));
  CHECK(is_math_expression("(3+1)^2 >= 0"));
  CHECK(is_math_expression("$(x+1)^2$ >= 0"));
  CHECK(is_math_expression("\\(a \\leq b\\)"));
  CHECK_FALSE(is_math_expression("the rate rises sharply"));
}

TEST_CASE("eligibility") {
  CHECK(eligible(with_options({"$10.00", "$12.50", "$1,000", "$3"})));
  CHECK_FALSE(eligible(with_options({"1", "2", "3", "the model then learns all of the weights"})));
  CHECK(eligible(with_options({"$\\frac{-(e+2)}{\\sqrt{3e^2+4e+2}}$", "$e$", "$2e$", "$0$"})));
  CHECK(eligible(with_options({"gradient descent", "Adam", "momentum with decay", "plain SGD"})));
  // Option E is exempt.
  BenchmarkTask t = with_options({"1", "2", "3", "4"});
  t.mcq.options['E'] = "A very long option text that goes well past five words";
  CHECK(eligible(t));
}

TEST_CASE("mask selection") {
  BenchmarkTask b = with_options({"1", "2", "3", "4"}, 'B');
  std::map<char, std::size_t> counts;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    char m = pick_mask(b, rng);
    CHECK(m != 'B');
    CHECK(m != 'E');
    ++counts[m];
  }
  REQUIRE(counts.size() == 3);
  CHECK(uniform_chi_square_p({counts['A'], counts['C'], counts['D']}) > 0.01);

  BenchmarkTask e = with_options({"1", "2", "3", "4"}, 'E');
  counts.clear();
  for (int i = 0; i < 10000; ++i) ++counts[pick_mask(e, rng)];
  REQUIRE(counts.size() == 4);
  CHECK(uniform_chi_square_p({counts['A'], counts['B'], counts['C'], counts['D']}) > 0.01);

  CHECK(pick_mask(b, 5) == pick_mask(b, 5));
}

TEST_CASE("chi-square tail matches reference values") {
  CHECK(chi_square_sf(9.2103, 2) == doctest::Approx(0.0100002018619183).epsilon(1e-10));
  CHECK(chi_square_sf(11.3449, 3) == doctest::Approx(0.009999846237341873).epsilon(1e-10));
  CHECK(chi_square_sf(3.0, 1) == doctest::Approx(0.08326451666355042).epsilon(1e-10));
  CHECK(chi_square_sf(5.5, 5) == doctest::Approx(0.357945880850958).epsilon(1e-10));
  CHECK(chi_square_sf(2.0, 4) == doctest::Approx(0.7357588823428847).epsilon(1e-10));
}

TEST_CASE("prompt shows only options before the mask") {
  BenchmarkTask t = with_options({"10", "20", "30", "40"}, 'A');
  std::string p = render_ts_prompt(t, 'C', "{statement}|{shown_options}|{masked_label}");
  CHECK(p == "What is 2 + 3?|A. 10\nB. 20|C");
  CHECK(render_ts_prompt(t, 'A', "{shown_options}") == "(none)");
}

TEST_CASE("matching is trim plus case fold") {
  CHECK(ts_match("  Adam \n", "adam"));
  CHECK_FALSE(ts_match("Adam.", "Adam"));
  CHECK_FALSE(ts_match("$10", "$10.00"));
}

TEST_CASE("run_ts_guessing") {
  auto bench = numeric_bench(30);
  bench.push_back(with_options({"1", "2", "3", "an option with far more than five words"}, 'A', "long"));
  SUBCASE("memorizing model") {
    Json rules = Json::array();
    for (const auto& t : bench)
      if (eligible(t))
        rules.push_back({{"tag", "tsguess/mem/" + t.task_id},
                         {"responses", {" " + *t.mcq.option(pick_mask(t, 11)) + "\n"}}});
    auto mock = std::make_shared<MockProvider>(Json{{"chat", rules}});
    Gateway g = gateway(mock);
    TsGuessResult r = run_ts_guessing(bench, g, "mem", 11);
    CHECK(r.summary.rate == 1.0);
    CHECK(r.summary.eligible_count == 30);
    CHECK(r.summary.benchmark_size == 31);
    CHECK(r.trials.size() == 30);
    for (const auto& tr : r.trials) {
      const BenchmarkTask* t = nullptr;
      for (const auto& b : bench)
        if (b.task_id == tr.task_id) t = &b;
      REQUIRE(t);
      CHECK(std::string(1, tr.masked_label) != t->mcq.correct_answer);
      CHECK(tr.masked_label != 'E');
      REQUIRE(tr.shown_options.size() == static_cast<std::size_t>(tr.masked_label - 'A'));
      for (std::size_t i = 0; i < tr.shown_options.size(); ++i) {
        CHECK(tr.shown_options[i].first == static_cast<char>('A' + i));
        CHECK(tr.shown_options[i].second == *t->mcq.option(static_cast<char>('A' + i)));
      }
    }
  }
  SUBCASE("nonsense model") {
    auto mock = std::make_shared<MockProvider>(Json{{"chat", {{{"tag", "*"}, {"responses", {"zzz"}}}}}});
    Gateway g = gateway(mock);
    TsGuessResult r = run_ts_guessing(bench, g, "n", 11, default_ts_template(), 4);
    CHECK(r.summary.rate == 0.0);
    CHECK(r.summary.matched_count == 0);
    CHECK(r.summary.to_json()["eligible_count"] == 30);
  }
  SUBCASE("reproducible") {
    auto mock = std::make_shared<MockProvider>(Json{{"chat", {{{"tag", "*"}, {"responses", {"3"}}}}}});
    Gateway g = gateway(mock);
    TsGuessResult a = run_ts_guessing(bench, g, "x", 3);
    TsGuessResult b = run_ts_guessing(bench, g, "x", 3, default_ts_template(), 8);
    CHECK(a.summary.to_json() == b.summary.to_json());
    for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].to_json() == b.trials[i].to_json());
  }
  SUBCASE("transport failure is unmatched with a note") {
    auto mock = std::make_shared<MockProvider>(Json{{"chat", {{{"tag", "*"}, {"responses", {{{"error", "fatal"}}}}}}}});
    Gateway g = gateway(mock);
    TsGuessResult r = run_ts_guessing(bench, g, "x", 3);
    CHECK(r.summary.rate == 0.0);
    CHECK(r.trials[0].note.rfind("transport", 0) == 0);
  }
  SUBCASE("no eligible task") {
    auto mock = std::make_shared<MockProvider>(Json{{"chat", Json::array()}});
    Gateway g = gateway(mock);
    CHECK_THROWS_AS(run_ts_guessing({bench.back()}, g, "x", 3), ValidationError);
  }
}

TEST_CASE("eligible subset of the sample records") {
  auto bench = read_benchmark(fixture("sample_tasks.jsonl"));
  std::size_t expected = 0;
  for (const auto& t : bench) expected += eligible(t);
  auto mock = std::make_shared<MockProvider>(Json{{"chat", {{{"tag", "*"}, {"responses", {"x"}}}}}});
  Gateway g = gateway(mock);
  if (expected == 0) {
    CHECK_THROWS_AS(run_ts_guessing(bench, g, "x", 1), ValidationError);
  } else {
    TsGuessResult r = run_ts_guessing(bench, g, "x", 1);
    CHECK(r.summary.eligible_count == expected);
    CHECK(r.trials.size() == expected);
  }
}
