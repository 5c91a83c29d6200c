#include "argue/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "argue/errors.hpp"

namespace argue::metrics {

PrecisionMode parse_precision_mode(std::string_view s) {
  if (s == "cited" || s == "CITED_ONLY") return PrecisionMode::CitedOnly;
  if (s == "cited-or-required" || s == "CITED_OR_REQUIRED") return PrecisionMode::CitedOrRequired;
  throw ConfigError("unknown precision mode: " + std::string(s));
}

std::string to_string(PrecisionMode mode) {
  return mode == PrecisionMode::CitedOnly ? "CITED_ONLY" : "CITED_OR_REQUIRED";
}

Precision sentence_precision(const ReportJudgments& judgments, PrecisionMode mode) {
  Precision p;
  for (const auto& s : judgments.sentence_outcomes) {
    if (s.citation_outcomes.empty()) {
      if (mode == PrecisionMode::CitedOrRequired && s.missing_citation_penalty) ++p.denominator;
      continue;
    }
    ++p.denominator;
    const bool all_attest = std::all_of(s.citation_outcomes.begin(), s.citation_outcomes.end(),
                                        [](const CitationOutcome& c) { return c.attests; });
    if (all_attest) ++p.precise;
  }
  if (p.denominator == 0) {
    p.degenerate = true;
    return p;
  }
  p.value = static_cast<double>(p.precise) / static_cast<double>(p.denominator);
  return p;
}

double nugget_recall(const std::set<std::string>& answered, std::span<const Nugget> bank,
                     bool weighted, const ImportanceWeights& weights) {
  if (bank.empty()) throw std::invalid_argument("nugget recall on an empty nugget bank");
  double got = 0.0;
  double total = 0.0;
  for (const auto& n : bank) {
    const double w = weighted ? weights.of(n.importance) : 1.0;
    total += w;
    if (answered.contains(n.nugget_id)) got += w;
  }
  return got / total;
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

FineStats fine_stats(const ReportJudgments& judgments) {
  FineStats f;
  std::size_t citations = 0;
  std::size_t relevant = 0;
  std::size_t attesting = 0;
  std::size_t cited_sentences = 0;
  for (const auto& s : judgments.sentence_outcomes) {
    if (!s.citation_outcomes.empty()) ++cited_sentences;
    if (s.missing_citation_penalty) ++f.n_missing_citation_penalties;
    for (const auto& c : s.citation_outcomes) {
      ++citations;
      if (c.relevant) ++relevant;
      if (c.attests) ++attesting;
      switch (c.outcome) {
        case Outcome::Reward: ++f.n_rewards; break;
        case Outcome::Penalty: ++f.n_penalties; break;
        case Outcome::Neutral: ++f.n_neutral; break;
      }
    }
  }
  const auto sentences = judgments.sentence_outcomes.size();
  if (citations > 0) {
    f.pct_relevant_citations = static_cast<double>(relevant) / static_cast<double>(citations);
    f.pct_attesting_citations = static_cast<double>(attesting) / static_cast<double>(citations);
  }
  if (sentences > 0) {
    f.pct_sentences_cited = static_cast<double>(cited_sentences) / static_cast<double>(sentences);
    f.citations_per_sentence = static_cast<double>(citations) / static_cast<double>(sentences);
  }
  return f;
}

std::vector<std::string> TopicScore::flags() const {
  std::vector<std::string> out;
  if (missing) out.emplace_back("missing_report");
  if (degenerate_report) out.emplace_back("degenerate_report");
  if (precision_degenerate) out.emplace_back("degenerate_precision");
  return out;
}

TopicScore score_topic(const ReportJudgments& judgments, std::span<const Nugget> bank,
                       const ScoreConfig& config) {
  TopicScore t;
  t.request_id = judgments.request_id;
  t.degenerate_report = judgments.degenerate;

  const auto answered = aggregate_answered(judgments, bank);
  t.answered_nuggets.assign(answered.begin(), answered.end());
  t.nugget_recall = nugget_recall(answered, bank, false, config.weights);
  t.nugget_recall_weighted = nugget_recall(answered, bank, true, config.weights);

  const auto p = sentence_precision(judgments, config.precision_mode);
  t.sentence_precision = p.value;
  t.precision_degenerate = p.degenerate;

  t.f1 = f1(t.sentence_precision, t.nugget_recall);
  t.f1_weighted = f1(t.sentence_precision, t.nugget_recall_weighted);
  t.fine = fine_stats(judgments);
  return t;
}

TopicScore missing_topic_score(const std::string& request_id) {
  TopicScore t;
  t.request_id = request_id;
  t.missing = true;
  return t;
}

std::vector<TopicScore> align_topics(std::span<const TopicScore> scores,
                                     std::span<const std::string> expected_topics) {
  std::map<std::string, const TopicScore*> by_id;
  for (const auto& s : scores) by_id.emplace(s.request_id, &s);
  std::vector<TopicScore> out;
  out.reserve(expected_topics.size());
  for (const auto& id : expected_topics) {
    auto it = by_id.find(id);
    out.push_back(it == by_id.end() ? missing_topic_score(id) : *it->second);
  }
  return out;
}

RunScore score_run(const std::string& run_id, std::span<const TopicScore> scores,
                   std::span<const std::string> expected_topics) {
  RunScore r;
  r.run_id = run_id;
  r.n_topics = expected_topics.size();
  if (expected_topics.empty()) return r;

  for (const auto& t : align_topics(scores, expected_topics)) {
    if (t.missing) r.missing_topics.push_back(t.request_id);
    if (t.precision_degenerate) r.degenerate_topics.push_back(t.request_id);
    r.sentence_precision += t.sentence_precision;
    r.nugget_recall += t.nugget_recall;
    r.nugget_recall_weighted += t.nugget_recall_weighted;
    r.f1 += t.f1;
    r.f1_weighted += t.f1_weighted;
    r.fine.pct_relevant_citations += t.fine.pct_relevant_citations;
    r.fine.pct_attesting_citations += t.fine.pct_attesting_citations;
    r.fine.pct_sentences_cited += t.fine.pct_sentences_cited;
    r.fine.citations_per_sentence += t.fine.citations_per_sentence;
    r.fine.n_rewards += t.fine.n_rewards;
    r.fine.n_penalties += t.fine.n_penalties;
    r.fine.n_neutral += t.fine.n_neutral;
    r.fine.n_missing_citation_penalties += t.fine.n_missing_citation_penalties;
  }
  const double n = static_cast<double>(expected_topics.size());
  for (double* v : {&r.sentence_precision, &r.nugget_recall, &r.nugget_recall_weighted, &r.f1,
                    &r.f1_weighted, &r.fine.pct_relevant_citations,
                    &r.fine.pct_attesting_citations, &r.fine.pct_sentences_cited,
                    &r.fine.citations_per_sentence}) {
    *v /= n;
  }
  return r;
}

// ---------------------------------------------------------------------------

json to_json(const FineStats& f) {
  return json{{"pct_relevant_citations", f.pct_relevant_citations},
              {"pct_attesting_citations", f.pct_attesting_citations},
              {"pct_sentences_cited", f.pct_sentences_cited},
              {"citations_per_sentence", f.citations_per_sentence},
              {"n_rewards", f.n_rewards},
              {"n_penalties", f.n_penalties},
              {"n_neutral", f.n_neutral},
              {"n_missing_citation_penalties", f.n_missing_citation_penalties}};
}

json to_json(const TopicScore& t) {
  return json{{"request_id", t.request_id},
              {"sentence_precision", t.sentence_precision},
              {"nugget_recall", t.nugget_recall},
              {"nugget_recall_weighted", t.nugget_recall_weighted},
              {"f1", t.f1},
              {"f1_weighted", t.f1_weighted},
              {"fine", to_json(t.fine)},
              {"answered_nuggets", t.answered_nuggets},
              {"flags", t.flags()}};
}

json to_json(const RunScore& r) {
  return json{{"run_id", r.run_id},
              {"n_topics", r.n_topics},
              {"sentence_precision", r.sentence_precision},
              {"nugget_recall", r.nugget_recall},
              {"nugget_recall_weighted", r.nugget_recall_weighted},
              {"f1", r.f1},
              {"f1_weighted", r.f1_weighted},
              {"fine", to_json(r.fine)},
              {"missing_topics", r.missing_topics},
              {"degenerate_topics", r.degenerate_topics}};
}

TopicScore topic_score_from_json(const json& j) {
  TopicScore t;
  t.request_id = j.at("request_id").get<std::string>();
  t.sentence_precision = j.at("sentence_precision").get<double>();
  t.nugget_recall = j.at("nugget_recall").get<double>();
  t.nugget_recall_weighted = j.at("nugget_recall_weighted").get<double>();
  t.f1 = j.at("f1").get<double>();
  t.f1_weighted = j.at("f1_weighted").get<double>();
  const json& f = j.at("fine");
  t.fine.pct_relevant_citations = f.at("pct_relevant_citations").get<double>();
  t.fine.pct_attesting_citations = f.at("pct_attesting_citations").get<double>();
  t.fine.pct_sentences_cited = f.at("pct_sentences_cited").get<double>();
  t.fine.citations_per_sentence = f.at("citations_per_sentence").get<double>();
  t.fine.n_rewards = f.at("n_rewards").get<std::size_t>();
  t.fine.n_penalties = f.at("n_penalties").get<std::size_t>();
  t.fine.n_neutral = f.at("n_neutral").get<std::size_t>();
  t.fine.n_missing_citation_penalties = f.at("n_missing_citation_penalties").get<std::size_t>();
  t.answered_nuggets = j.value("answered_nuggets", std::vector<std::string>{});
  for (const auto& flag : j.value("flags", std::vector<std::string>{})) {
    if (flag == "missing_report") t.missing = true;
    if (flag == "degenerate_report") t.degenerate_report = true;
    if (flag == "degenerate_precision") t.precision_degenerate = true;
  }
  return t;
}

json scores_document(const RunScore& macro, std::span<const TopicScore> topics,
                     const ScoreConfig& config, std::span<const Nugget> defaulted_nuggets) {
  json topic_list = json::array();
  for (const auto& t : topics) topic_list.push_back(to_json(t));

  json defaulted = json::array();
  for (const auto& n : defaulted_nuggets) {
    json fields = json::array();
    if (n.combinator_defaulted) fields.push_back("combinator");
    if (n.importance_defaulted) fields.push_back("importance");
    defaulted.push_back(
        {{"request_id", n.request_id}, {"nugget_id", n.nugget_id}, {"fields", std::move(fields)}});
  }
  json metadata{{"precision_mode", to_string(config.precision_mode)},
                {"weights", {{"vital", config.weights.vital}, {"okay", config.weights.okay}}},
                {"nugget_defaults", {{"combinator", "ANY"}, {"importance", "vital"}}},
                {"defaulted_nuggets", std::move(defaulted)},
                {"degenerate_precision_value", 0.0},
                {"missing_topic_value", 0.0}};
  return json{{"run_id", macro.run_id},
              {"topics", std::move(topic_list)},
              {"macro", to_json(macro)},
              {"metadata", std::move(metadata)}};
}

}  // namespace argue::metrics
