#pragma once

// Report-level metrics computed from judgments: sentence precision, nugget
// recall (unweighted and importance-weighted), their F1, and fine-grained
// citation statistics, plus fixed-divisor macro averages over a topic set.

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "argue/core_model.hpp"
#include "argue/judgment.hpp"

namespace argue::metrics {

enum class PrecisionMode {
  CitedOnly,        // denominator: sentences with at least one citation
  CitedOrRequired,  // plus uncited sentences judged to need a citation
};

/// Accepts "cited", "cited-or-required", "CITED_ONLY", "CITED_OR_REQUIRED".
PrecisionMode parse_precision_mode(std::string_view s);
std::string to_string(PrecisionMode mode);

struct Precision {
  double value = 0.0;  // 0.0 when degenerate
  bool degenerate = false;
  std::size_t precise = 0;
  std::size_t denominator = 0;
};

Precision sentence_precision(const ReportJudgments& judgments, PrecisionMode mode);

/// Throws std::invalid_argument on an empty bank.
double nugget_recall(const std::set<std::string>& answered, std::span<const Nugget> bank,
                     bool weighted, const ImportanceWeights& weights = {});

/// Harmonic mean; 0 when both inputs are 0.
double f1(double precision, double recall);

struct FineStats {
  double pct_relevant_citations = 0.0;
  double pct_attesting_citations = 0.0;
  double pct_sentences_cited = 0.0;
  double citations_per_sentence = 0.0;
  std::size_t n_rewards = 0;
  std::size_t n_penalties = 0;
  std::size_t n_neutral = 0;
  std::size_t n_missing_citation_penalties = 0;

  bool operator==(const FineStats&) const = default;
};

FineStats fine_stats(const ReportJudgments& judgments);

struct ScoreConfig {
  PrecisionMode precision_mode = PrecisionMode::CitedOnly;
  ImportanceWeights weights;
};

struct TopicScore {
  std::string request_id;
  double sentence_precision = 0.0;
  double nugget_recall = 0.0;
  double nugget_recall_weighted = 0.0;
  double f1 = 0.0;
  double f1_weighted = 0.0;
  FineStats fine;
  std::vector<std::string> answered_nuggets;  // sorted

  bool precision_degenerate = false;
  bool degenerate_report = false;  // no sentences
  bool missing = false;            // no (judged) report for this topic

  std::vector<std::string> flags() const;
  bool operator==(const TopicScore&) const = default;
};

TopicScore score_topic(const ReportJudgments& judgments, std::span<const Nugget> bank,
                       const ScoreConfig& config = {});

/// All-zero score for a topic the run did not cover.
TopicScore missing_topic_score(const std::string& request_id);

struct RunScore {
  std::string run_id;
  std::size_t n_topics = 0;
  double sentence_precision = 0.0;
  double nugget_recall = 0.0;
  double nugget_recall_weighted = 0.0;
  double f1 = 0.0;
  double f1_weighted = 0.0;
  FineStats fine;  // ratios macro-averaged, counts summed
  std::vector<std::string> missing_topics;
  std::vector<std::string> degenerate_topics;

  bool operator==(const RunScore&) const = default;
};

/// Topic scores in `expected_topics` order; absent topics become
/// missing_topic_score entries. Scores for unexpected topics are dropped.
std::vector<TopicScore> align_topics(std::span<const TopicScore> scores,
                                     std::span<const std::string> expected_topics);

/// Arithmetic mean over `expected_topics`; absent topics contribute zeros.
RunScore score_run(const std::string& run_id, std::span<const TopicScore> scores,
                   std::span<const std::string> expected_topics);

json to_json(const FineStats& f);
json to_json(const TopicScore& t);
json to_json(const RunScore& r);
TopicScore topic_score_from_json(const json& j);

/// Scores file: {"run_id", "topics", "macro", "metadata"}.
json scores_document(const RunScore& macro, std::span<const TopicScore> topics,
                     const ScoreConfig& config, std::span<const Nugget> defaulted_nuggets = {});

}  // namespace argue::metrics
