#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "confusio/corpus.hpp"

namespace confusio {

// x1..x5 = goods/services, visual, phonetic, conceptual, attention.
using FactorVector = FactorScores;

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual };

// Boolean expression tree over factor comparisons.
class RulePredicate {
 public:
  struct Comparison {
    FeatureKind factor;
    CompareOp op;
    double constant;
  };
  struct And {
    std::vector<RulePredicate> terms;
  };
  struct Or {
    std::vector<RulePredicate> terms;
  };
  using Node = std::variant<Comparison, And, Or>;

  explicit RulePredicate(Node node);

  static RulePredicate compare(FeatureKind factor, CompareOp op, double constant);
  static RulePredicate all_of(std::vector<RulePredicate> terms);
  static RulePredicate any_of(std::vector<RulePredicate> terms);

  // Real-valued comparisons; half-point scores work unchanged.
  bool evaluate(const FactorVector& x) const;

  const Node& node() const noexcept { return *node_; }

  // Canonical infix form, fully parenthesised, e.g. "((x1 >= 4) & (x2 < 2))".
  std::string to_string() const;

 private:
  std::shared_ptr<const Node> node_;
};

// Parses the infix grammar:
//   expr := term ('|' term)* ;  term := atom ('&' atom)*
//   atom := '(' expr ')' | 'x' DIGIT op NUMBER ;  op := < <= > >=
RulePredicate parse_predicate(std::string_view text);

struct RuleSet {
  std::string annotator;
  std::vector<RulePredicate> confusion_rules;
  std::vector<RulePredicate> no_confusion_rules;
};

// Rule file: `annotator = <id>` header, then `[confusion]` and
// `[no_confusion]` sections with one predicate per line. '#' starts a comment.
RuleSet parse_ruleset(std::string_view text);
RuleSet load_ruleset(const std::filesystem::path& path);
std::string format_ruleset(const RuleSet& rules);

// Shipped rule sets: "annotator1", "annotator2" (as published) and
// "annotator1_reconciled" (third confusion predicate of annotator 1 moved to
// the no-confusion side).
RuleSet builtin_ruleset(std::string_view name);
std::string_view builtin_ruleset_text(std::string_view name);
std::vector<std::string_view> builtin_ruleset_names();

// A builtin name or a path to a rule file.
RuleSet resolve_ruleset(std::string_view name_or_path);

enum class Outcome { Confusion, NoConfusion, Undetermined, Conflict };

std::string_view outcome_name(Outcome o) noexcept;

// Confusion if only confusion rules fire, NoConfusion if only no-confusion
// rules fire, Conflict if both sides fire, Undetermined if none does.
// Throws ValidationError if x is outside the annotation scales.
Outcome evaluate_rules(const RuleSet& rules, const FactorVector& x);

enum class TiePolicy { NoConfusion, Confusion };

// Label with the strictly larger count; ties go to `tie`.
Judgment majority_label(std::span<const Judgment> votes, TiePolicy tie = TiePolicy::NoConfusion);

}  // namespace confusio
