#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/util/errors.hpp"
#include "mosaic/util/rng.hpp"

namespace mosaic::operators {

/// Discrete actions 0..K-1, optionally labelled.
struct ActionSpace {
  int k = 1;
  std::vector<std::string> labels;  // empty or exactly k unique names
  int null_action = 0;

  bool contains(std::int64_t action) const { return action >= 0 && action < k; }
  /// Case-insensitive label lookup.
  std::optional<int> index_of(std::string_view label) const;
  /// Throws ValidationError when labels are malformed.
  void check() const;
};

enum class Grammar { strict_integer, labeled_keyword, json_field };
enum class Fallback { error, noop, random_logged };
enum class ParseOutcome { parsed, fell_back_noop, fell_back_random, error };

std::string_view to_string(Grammar g);
std::string_view to_string(Fallback f);
std::string_view to_string(ParseOutcome o);
std::optional<Grammar> grammar_from_string(std::string_view text);
std::optional<Fallback> fallback_from_string(std::string_view text);
std::optional<ParseOutcome> parse_outcome_from_string(std::string_view text);

struct ParsePolicy {
  Grammar grammar = Grammar::labeled_keyword;
  Fallback fallback = Fallback::noop;
};

struct ParsedAction {
  int action = 0;
  ParseOutcome outcome = ParseOutcome::parsed;
};

class ParseError : public MosaicError {
 public:
  explicit ParseError(std::string text)
      : MosaicError("unparseable action text: " + text), text_(std::move(text)) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// Grammar match only; nullopt when the text does not name a valid action.
std::optional<int> match_grammar(std::string_view text, const ActionSpace& space, Grammar grammar);

/// The parsing function phi. `fallback_rng` is drawn from only on the
/// random_logged fallback path. Throws ParseError under Fallback::error.
ParsedAction parse_action(std::string_view text, const ActionSpace& space, const ParsePolicy& policy,
                          Rng& fallback_rng);

}  // namespace mosaic::operators
