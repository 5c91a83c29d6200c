#pragma once

// Agreement between two score sources (e.g. human vs automatic) over a set of
// runs: Kendall's tau-b on macro scores, and whether paired Wilcoxon
// signed-rank tests reach the same conclusion for every pair of runs.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "argue/core_model.hpp"

namespace argue::meta {

/// Runs x topics; values[r][t] is run r's score on topic t.
struct ScoreMatrix {
  std::vector<std::string> runs;
  std::vector<std::string> topics;
  std::vector<std::vector<double>> values;

  /// Throws std::invalid_argument unless rectangular with values in [0,1].
  void check() const;
  double macro(std::size_t run) const;
  const std::vector<double>& row(const std::string& run_id) const;
};

/// Header row "run_id<TAB>topic...", then one row per run.
ScoreMatrix read_matrix_tsv(const std::filesystem::path& path);
std::string matrix_to_tsv(const ScoreMatrix& m);

/// One metric taken from several scores files (one per run).
ScoreMatrix matrix_from_scores(std::span<const json> scores_documents, const std::string& metric);

/// Descending macro score; ties by run_id ascending.
std::vector<std::pair<std::string, double>> rank_runs(const ScoreMatrix& m);

struct TauResult {
  double tau = 0.0;
  long long concordant_minus_discordant = 0;
  long long pairs_untied_a = 0;  // n0 - n1
  long long pairs_untied_b = 0;  // n0 - n2
  bool degenerate = false;       // one side entirely tied; tau reported as 0
};

/// Tau-b over paired score vectors, O(n log n). Throws std::invalid_argument
/// on length mismatch or fewer than two items.
TauResult kendall_tau_b(std::span<const double> a, std::span<const double> b);

enum class Direction { ABetter, BBetter, NoSigDiff };
std::string to_string(Direction d);

struct WilcoxonResult {
  double w_plus = 0.0;   // rank sum of positive differences x - y
  double w_minus = 0.0;
  double statistic = 0.0;  // min(w_plus, w_minus)
  double p_value = 1.0;    // two-sided
  std::size_t n_effective = 0;  // nonzero differences
  bool exact = true;
  int direction_hint = 0;  // +1 when x tends larger, -1 when y does, 0 none
};

inline constexpr std::size_t kExactWilcoxonMaxN = 25;
/// Differences with magnitude at or below this are zero; magnitudes closer
/// than this are tied.
inline constexpr double kTieTolerance = 1e-10;

/// Paired signed-rank test on x - y. Zero differences are discarded, tied
/// magnitudes get mean ranks. Exact null distribution for n <= 25, else
/// normal approximation with tie and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

struct PairDecision {
  std::string run_a;
  std::string run_b;
  Direction direction = Direction::NoSigDiff;
  double p_value = 1.0;
  double statistic = 0.0;
};

/// Significant when p <= alpha; the side with the larger rank sum wins.
PairDecision pair_decision(std::span<const double> x, std::span<const double> y, double alpha,
                           std::string run_a = {}, std::string run_b = {});

struct PairRow {
  PairDecision human;
  PairDecision automatic;
  bool agree = false;
};

struct MetaEvalReport {
  std::string metric_name;
  double alpha = 0.05;
  TauResult tau;
  double agreement_accuracy = 0.0;
  std::size_t n_pairs = 0;
  std::vector<PairRow> pair_table;
  std::vector<std::pair<std::string, double>> ranking_human;
  std::vector<std::pair<std::string, double>> ranking_auto;
};

/// Matrices must share run and topic sets (order may differ); otherwise
/// MisalignmentError listing the symmetric difference.
MetaEvalReport agreement_accuracy(const ScoreMatrix& human, const ScoreMatrix& automatic,
                                  double alpha = 0.05, std::string metric_name = {});

json to_json(const MetaEvalReport& r);
std::string pair_table_tsv(const MetaEvalReport& r);

}  // namespace argue::meta
