#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "confusio/error.hpp"
#include "confusio/rules.hpp"

using namespace confusio;

namespace {

FactorVector x(double x1, double x2, double x3, double x4, double x5) {
  FactorVector v;
  v.values = {x1, x2, x3, x4, x5};
  return v;
}

std::vector<Judgment> votes(std::initializer_list<int> v) {
  std::vector<Judgment> out;
  for (int i : v) out.push_back(i ? Judgment::Confusion : Judgment::NoConfusion);
  return out;
}

}  // namespace

TEST_CASE("annotator 1 examples") {
  const auto a1 = builtin_ruleset("annotator1");
  CHECK(evaluate_rules(a1, x(5, 5, 5, 5, 5)) == Outcome::Confusion);
  CHECK(evaluate_rules(a1, x(4, 1, 1, 3, 3)) == Outcome::Conflict);
  CHECK(evaluate_rules(a1, x(3, 3, 3, 3, 3)) == Outcome::Undetermined);
}

TEST_CASE("annotator 2 duplicated predicate conflicts") {
  const auto a2 = builtin_ruleset("annotator2");
  CHECK(evaluate_rules(a2, x(4, 2, 2, 2, 3)) == Outcome::Conflict);
  CHECK(evaluate_rules(a2, x(4, 3, 3, 3, 4)) == Outcome::Confusion);
  CHECK(evaluate_rules(a2, x(1, 1, 1, 1, 1)) == Outcome::Undetermined);
}

TEST_CASE("reconciled set decides low scores as no confusion") {
  const auto r = builtin_ruleset("annotator1_reconciled");
  CHECK(evaluate_rules(r, x(3, 1, 3, 3, 3)) == Outcome::NoConfusion);
  CHECK(evaluate_rules(r, x(5, 5, 5, 5, 5)) == Outcome::Confusion);
}

TEST_CASE("verbatim annotator 1 never yields no confusion on the grid") {
  const auto a1 = builtin_ruleset("annotator1");
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b)
      for (int c = 0; c <= 5; ++c)
        for (int d = 0; d <= 5; ++d)
          for (int e = 1; e <= 5; ++e) CHECK(evaluate_rules(a1, x(a, b, c, d, e)) != Outcome::NoConfusion);
}

TEST_CASE("range violations are errors") {
  const auto a1 = builtin_ruleset("annotator1");
  CHECK_THROWS_AS(evaluate_rules(a1, x(0, 3, 3, 3, 3)), ValidationError);
  CHECK_THROWS_AS(evaluate_rules(a1, x(3, 3, 6, 3, 3)), ValidationError);
}

TEST_CASE("half points compare as reals") {
  auto p = parse_predicate("x1 > 3");
  CHECK(p.evaluate(x(3.5, 1, 1, 1, 1)));
  CHECK_FALSE(p.evaluate(x(3, 1, 1, 1, 1)));
}

TEST_CASE("rule 1 is monotone in every factor") {
  const auto rule1 = builtin_ruleset("annotator1").confusion_rules.at(0);
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b)
      for (int c = 0; c <= 5; ++c)
        for (int d = 0; d <= 5; ++d)
          for (int e = 1; e <= 5; ++e) {
            auto v = x(a, b, c, d, e);
            if (!rule1.evaluate(v)) continue;
            for (std::size_t i = 0; i < 5; ++i) {
              auto up = v;
              up.values[i] = std::min(5.0, up.values[i] + 1);
              CHECK(rule1.evaluate(up));
            }
          }
}

TEST_CASE("predicate grammar") {
  auto p = parse_predicate("(x1 >= 4) & ((x2 >= 4) | (x3 >= 4))");
  CHECK(p.to_string() == "((x1 >= 4) & ((x2 >= 4) | (x3 >= 4)))");
  CHECK(parse_predicate(p.to_string()).to_string() == p.to_string());
  CHECK(parse_predicate("x1>=4&x2<2|x3<=1").to_string() == "(((x1 >= 4) & (x2 < 2)) | (x3 <= 1))");
  CHECK_THROWS(parse_predicate("x6 > 1"));
  CHECK_THROWS(parse_predicate("x1 = 1"));
  CHECK_THROWS(parse_predicate("(x1 > 1"));
  CHECK_THROWS(parse_predicate("x1 > 9"));
  CHECK_THROWS(parse_predicate(""));
}

TEST_CASE("rule files") {
  for (auto name : builtin_ruleset_names()) {
    auto rs = builtin_ruleset(name);
    auto again = parse_ruleset(format_ruleset(rs));
    CHECK(again.annotator == rs.annotator);
    CHECK(format_ruleset(again) == format_ruleset(rs));
    CHECK_FALSE(rs.confusion_rules.empty());
    CHECK_FALSE(rs.no_confusion_rules.empty());
  }
  CHECK(builtin_ruleset("annotator1").confusion_rules.size() == 3);
  CHECK(builtin_ruleset("annotator1_reconciled").no_confusion_rules.size() == 2);
  CHECK_THROWS(builtin_ruleset("annotator9"));
  CHECK_THROWS(parse_ruleset("annotator = 1\n[confusion]\nx1 > 1\n"));
  CHECK_THROWS(parse_ruleset("[confusion]\nx1 > 1\n[no_confusion]\nx1 < 1\n"));

  auto path = std::filesystem::temp_directory_path() / "confusio-test.rules";
  std::ofstream(path) << "# comment\nannotator = t\n[confusion]\nx1 >= 3 # inline\n[no_confusion]\nx1 < 3\n";
  auto rs = resolve_ruleset(path.string());
  CHECK(rs.annotator == "t");
  CHECK(evaluate_rules(rs, x(3, 1, 1, 1, 1)) == Outcome::Confusion);
  CHECK(resolve_ruleset("annotator2").annotator == "2");
}

TEST_CASE("majority label") {
  CHECK(majority_label(votes({1, 1, 0})) == Judgment::Confusion);
  CHECK(majority_label(votes({0})) == Judgment::NoConfusion);
  CHECK(majority_label(votes({1, 0})) == Judgment::NoConfusion);
  CHECK(majority_label(votes({1, 0}), TiePolicy::Confusion) == Judgment::Confusion);
  CHECK_THROWS(majority_label(votes({})));
  auto v = votes({1, 0, 1, 1, 0});
  std::sort(v.begin(), v.end());
  do {
    CHECK(majority_label(v) == Judgment::Confusion);
  } while (std::next_permutation(v.begin(), v.end()));
}
