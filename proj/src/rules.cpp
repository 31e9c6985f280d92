#include "confusio/rules.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "builtin_rules.hpp"
#include "confusio/error.hpp"

namespace confusio {

namespace {

std::string_view op_symbol(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEqual: return ">=";
  }
  return "?";
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Recursive-descent parser over a single predicate line.
class PredicateParser {
 public:
  explicit PredicateParser(std::string_view text) : text_(text) {}

  RulePredicate parse() {
    auto p = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  RulePredicate expr() {
    std::vector<RulePredicate> terms{term()};
    while (accept('|')) terms.push_back(term());
    return terms.size() == 1 ? std::move(terms.front()) : RulePredicate::any_of(std::move(terms));
  }

  RulePredicate term() {
    std::vector<RulePredicate> atoms{atom()};
    while (accept('&')) atoms.push_back(atom());
    return atoms.size() == 1 ? std::move(atoms.front()) : RulePredicate::all_of(std::move(atoms));
  }

  RulePredicate atom() {
    if (accept('(')) {
      auto inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    return comparison();
  }

  RulePredicate comparison() {
    skip_space();
    if (pos_ + 1 >= text_.size() || (text_[pos_] != 'x' && text_[pos_] != 'X'))
      fail("expected factor variable x1..x5");
    const char digit = text_[pos_ + 1];
    if (digit < '1' || digit > '5') fail("factor variable must be x1..x5");
    pos_ += 2;
    const auto factor = static_cast<FeatureKind>(digit - '1');

    skip_space();
    CompareOp op;
    if (accept_raw("<=")) op = CompareOp::LessEqual;
    else if (accept_raw(">=")) op = CompareOp::GreaterEqual;
    else if (accept_raw("<")) op = CompareOp::Less;
    else if (accept_raw(">")) op = CompareOp::Greater;
    else fail("expected comparison operator");

    skip_space();
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{}) fail("expected numeric constant");
    pos_ += static_cast<std::size_t>(ptr - begin);
    if (value < 0.0 || value > 5.0) fail("constant " + format_number(value) + " outside [0, 5]");
    return RulePredicate::compare(factor, op, value);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_raw(std::string_view s) {
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("predicate '" + std::string(text_) + "' at column " +
                          std::to_string(pos_ + 1) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

RulePredicate::RulePredicate(Node node) : node_(std::make_shared<const Node>(std::move(node))) {}

RulePredicate RulePredicate::compare(FeatureKind factor, CompareOp op, double constant) {
  return RulePredicate(Comparison{factor, op, constant});
}
RulePredicate RulePredicate::all_of(std::vector<RulePredicate> terms) {
  return RulePredicate(And{std::move(terms)});
}
RulePredicate RulePredicate::any_of(std::vector<RulePredicate> terms) {
  return RulePredicate(Or{std::move(terms)});
}

bool RulePredicate::evaluate(const FactorVector& x) const {
  struct Visitor {
    const FactorVector& x;
    bool operator()(const Comparison& c) const {
      const double v = x[c.factor];
      switch (c.op) {
        case CompareOp::Less: return v < c.constant;
        case CompareOp::LessEqual: return v <= c.constant;
        case CompareOp::Greater: return v > c.constant;
        case CompareOp::GreaterEqual: return v >= c.constant;
      }
      return false;
    }
    bool operator()(const And& a) const {
      return std::all_of(a.terms.begin(), a.terms.end(),
                         [&](const RulePredicate& p) { return p.evaluate(x); });
    }
    bool operator()(const Or& o) const {
      return std::any_of(o.terms.begin(), o.terms.end(),
                         [&](const RulePredicate& p) { return p.evaluate(x); });
    }
  };
  return std::visit(Visitor{x}, *node_);
}

std::string RulePredicate::to_string() const {
  struct Visitor {
    std::string operator()(const Comparison& c) const {
      return "(x" + std::to_string(feature_index(c.factor) + 1) + " " +
             std::string(op_symbol(c.op)) + " " + format_number(c.constant) + ")";
    }
    std::string join(const std::vector<RulePredicate>& terms, std::string_view sep) const {
      std::string out = "(";
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += sep;
        out += terms[i].to_string();
      }
      return out + ")";
    }
    std::string operator()(const And& a) const { return join(a.terms, " & "); }
    std::string operator()(const Or& o) const { return join(o.terms, " | "); }
  };
  return std::visit(Visitor{}, *node_);
}

RulePredicate parse_predicate(std::string_view text) { return PredicateParser(text).parse(); }

RuleSet parse_ruleset(std::string_view text) {
  RuleSet rules;
  enum class Section { None, Confusion, NoConfusion } section = Section::None;
  bool have_header = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line == "[confusion]") {
        section = Section::Confusion;
      } else if (line == "[no_confusion]") {
        section = Section::NoConfusion;
      } else if (line.starts_with("annotator")) {
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ValidationError("expected 'annotator = <id>'");
        rules.annotator = std::string(trim(line.substr(eq + 1)));
        if (rules.annotator.empty()) throw ValidationError("empty annotator id");
        have_header = true;
      } else if (section == Section::Confusion) {
        rules.confusion_rules.push_back(parse_predicate(line));
      } else if (section == Section::NoConfusion) {
        rules.no_confusion_rules.push_back(parse_predicate(line));
      } else {
        throw ValidationError("predicate outside of a section");
      }
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header) throw ValidationError("rule file lacks 'annotator = <id>' header");
  if (rules.confusion_rules.empty() || rules.no_confusion_rules.empty())
    throw ValidationError("rule set '" + rules.annotator + "' needs at least one rule per outcome");
  return rules;
}

RuleSet load_ruleset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rule file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_ruleset(buffer.str());
}

std::string format_ruleset(const RuleSet& rules) {
  std::string out = "annotator = " + rules.annotator + "\n\n[confusion]\n";
  for (const auto& r : rules.confusion_rules) out += r.to_string() + "\n";
  out += "\n[no_confusion]\n";
  for (const auto& r : rules.no_confusion_rules) out += r.to_string() + "\n";
  return out;
}

std::vector<std::string_view> builtin_ruleset_names() {
  return {"annotator1", "annotator2", "annotator1_reconciled"};
}

std::string_view builtin_ruleset_text(std::string_view name) {
  if (name == "annotator1") return detail::kAnnotator1Rules;
  if (name == "annotator2") return detail::kAnnotator2Rules;
  if (name == "annotator1_reconciled") return detail::kAnnotator1ReconciledRules;
  throw ConfigError("unknown builtin rule set '" + std::string(name) + "'");
}

RuleSet builtin_ruleset(std::string_view name) { return parse_ruleset(builtin_ruleset_text(name)); }

RuleSet resolve_ruleset(std::string_view name_or_path) {
  const auto names = builtin_ruleset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return builtin_ruleset(name_or_path);
  return load_ruleset(std::filesystem::path(name_or_path));
}

std::string_view outcome_name(Outcome o) noexcept {
  switch (o) {
    case Outcome::Confusion: return "confusion";
    case Outcome::NoConfusion: return "no_confusion";
    case Outcome::Undetermined: return "undetermined";
    case Outcome::Conflict: return "conflict";
  }
  return "undetermined";
}

Outcome evaluate_rules(const RuleSet& rules, const FactorVector& x) {
  x.validate();
  auto fires = [&](const std::vector<RulePredicate>& side) {
    return std::any_of(side.begin(), side.end(),
                       [&](const RulePredicate& p) { return p.evaluate(x); });
  };
  const bool confusion = fires(rules.confusion_rules);
  const bool no_confusion = fires(rules.no_confusion_rules);
  if (confusion && no_confusion) return Outcome::Conflict;
  if (confusion) return Outcome::Confusion;
  if (no_confusion) return Outcome::NoConfusion;
  return Outcome::Undetermined;
}

Judgment majority_label(std::span<const Judgment> votes, TiePolicy tie) {
  if (votes.empty()) throw ValidationError("majority_label: no votes");
  const auto yes = std::count(votes.begin(), votes.end(), Judgment::Confusion);
  const auto no = static_cast<std::ptrdiff_t>(votes.size()) - yes;
  if (yes > no) return Judgment::Confusion;
  if (no > yes) return Judgment::NoConfusion;
  return tie == TiePolicy::Confusion ? Judgment::Confusion : Judgment::NoConfusion;
}

}  // namespace confusio
