#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mosaic/operators/config.hpp"

namespace mosaic::evaluation {

enum class Family { adversarial, cooperative };
std::string_view to_string(Family f);
std::optional<Family> family_from_string(std::string_view text);

struct MatrixSpec {
  Family family = Family::adversarial;
  std::string task{env::kTeamTagTask};
  std::size_t n = 4;
  std::size_t n_a = 2;
  std::size_t n_b = 2;
  /// Agents available per paradigm (RL, LLM, VLM, Human). A row is feasible
  /// when it needs no more of a paradigm than its pool holds.
  std::map<operators::Paradigm, std::size_t> pools{{operators::Paradigm::rl, 4},
                                                   {operators::Paradigm::llm, 4},
                                                   {operators::Paradigm::vlm, 4},
                                                   {operators::Paradigm::human, 0}};
  std::uint64_t seed = 0;
  std::uint64_t episodes = 100;
};

struct MatrixEntry {
  std::string id;  // A1..A7, C1..C8
  std::string purpose;
  operators::RunConfig config;
};

class InfeasibleMatrix : public ValidationError {
 public:
  explicit InfeasibleMatrix(std::vector<std::string> rows);
  const std::vector<std::string>& rows() const { return rows_; }

 private:
  std::vector<std::string> rows_;
};

/// Adversarial rows A1-A7 or cooperative rows C1-C8 as run configs.
/// Throws InfeasibleMatrix listing every row the pools cannot staff.
std::vector<MatrixEntry> build_matrix(const MatrixSpec& spec);

/// Sorted paradigm symbols per team (RL, LLM, VLM, Human, rho, nu), keyed by
/// team id. Baselines use their short symbols.
std::map<std::string, std::vector<std::string>> team_composition(const operators::RunConfig& config);

/// Writes <dir>/<id>.config for each entry. Returns the paths.
std::vector<std::filesystem::path> write_matrix(const std::filesystem::path& dir,
                                                const std::vector<MatrixEntry>& entries);

}  // namespace mosaic::evaluation
