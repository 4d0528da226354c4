#include "mosaic/operators/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>
#include <set>

namespace mosaic::operators {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Digits only, at most nine of them.
std::optional<int> small_index(std::string_view digits, const ActionSpace& space) {
  if (digits.empty() || digits.size() > 9) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return space.contains(value) ? std::optional<int>(value) : std::nullopt;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<int> token_to_action(std::string_view token, const ActionSpace& space) {
  if (all_digits(token)) return small_index(token, space);
  return space.index_of(token);
}

std::optional<std::smatch> last_match(const std::string& text, const std::regex& re) {
  std::optional<std::smatch> last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    last = *it;
  }
  return last;
}

const std::regex& keyword_re() {
  static const std::regex re(R"(\bACTION[ \t]*:[ \t]*([A-Za-z_][A-Za-z0-9_-]*|[0-9]+))",
                             std::regex::ECMAScript | std::regex::icase);
  return re;
}

const std::regex& json_field_re() {
  static const std::regex re(R"re("action"[ \t\r\n]*:[ \t\r\n]*(?:"([^"\\]*)"|(-?[0-9]+)(?![0-9.eE])))re",
                             std::regex::ECMAScript);
  return re;
}

}  // namespace

std::optional<int> ActionSpace::index_of(std::string_view label) const {
  const auto wanted = lower(label);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (lower(labels[i]) == wanted) return static_cast<int>(i);
  }
  return std::nullopt;
}

void ActionSpace::check() const {
  if (k <= 0) throw ValidationError("action_space.k", "must be positive");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != k) throw ValidationError("action_space.labels", "must have k entries");
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (!seen.insert(lower(l)).second) throw ValidationError("action_space.labels", "duplicate label " + l);
    }
  }
  if (!contains(null_action)) throw ValidationError("action_space.null_action", "outside the action space");
}

std::optional<int> match_grammar(std::string_view text_view, const ActionSpace& space, Grammar grammar) {
  switch (grammar) {
    case Grammar::strict_integer: {
      auto t = trim(text_view);
      if (!all_digits(t)) return std::nullopt;
      return small_index(t, space);
    }
    case Grammar::labeled_keyword: {
      const std::string text(text_view);
      auto m = last_match(text, keyword_re());
      if (!m) return std::nullopt;
      return token_to_action((*m)[1].str(), space);
    }
    case Grammar::json_field: {
      const std::string text(text_view);
      auto m = last_match(text, json_field_re());
      if (!m) return std::nullopt;
      if ((*m)[1].matched) return token_to_action((*m)[1].str(), space);
      auto number = (*m)[2].str();
      if (number.front() == '-') return std::nullopt;
      return small_index(number, space);
    }
  }
  return std::nullopt;
}

ParsedAction parse_action(std::string_view text, const ActionSpace& space, const ParsePolicy& policy,
                          Rng& fallback_rng) {
  if (auto a = match_grammar(text, space, policy.grammar)) return {*a, ParseOutcome::parsed};
  switch (policy.fallback) {
    case Fallback::error:
      throw ParseError(std::string(text));
    case Fallback::noop:
      return {space.null_action, ParseOutcome::fell_back_noop};
    case Fallback::random_logged:
      return {static_cast<int>(fallback_rng.uniform_below(static_cast<std::uint64_t>(space.k))),
              ParseOutcome::fell_back_random};
  }
  throw ParseError(std::string(text));
}

std::string_view to_string(Grammar g) {
  switch (g) {
    case Grammar::strict_integer: return "strict_integer";
    case Grammar::labeled_keyword: return "labeled_keyword";
    case Grammar::json_field: return "json_field";
  }
  return "?";
}

std::string_view to_string(Fallback f) {
  switch (f) {
    case Fallback::error: return "error";
    case Fallback::noop: return "noop";
    case Fallback::random_logged: return "random_logged";
  }
  return "?";
}

std::string_view to_string(ParseOutcome o) {
  switch (o) {
    case ParseOutcome::parsed: return "parsed";
    case ParseOutcome::fell_back_noop: return "fell_back_noop";
    case ParseOutcome::fell_back_random: return "fell_back_random";
    case ParseOutcome::error: return "error";
  }
  return "?";
}

std::optional<Grammar> grammar_from_string(std::string_view text) {
  for (auto g : {Grammar::strict_integer, Grammar::labeled_keyword, Grammar::json_field}) {
    if (to_string(g) == text) return g;
  }
  return std::nullopt;
}

std::optional<Fallback> fallback_from_string(std::string_view text) {
  for (auto f : {Fallback::error, Fallback::noop, Fallback::random_logged}) {
    if (to_string(f) == text) return f;
  }
  return std::nullopt;
}

std::optional<ParseOutcome> parse_outcome_from_string(std::string_view text) {
  for (auto o : {ParseOutcome::parsed, ParseOutcome::fell_back_noop, ParseOutcome::fell_back_random,
                 ParseOutcome::error}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

}  // namespace mosaic::operators
