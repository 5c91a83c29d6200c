#pragma once

// Per-sentence judgment tree: citation path (support and relevance of each
// citation, or whether an uncited sentence needed one) and content path
// (which nugget answers a sentence conveys, or whether it claims a nugget is
// unanswerable). Every resolved question becomes a JudgmentRecord.

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "argue/core_model.hpp"

namespace argue {

enum class JudgmentKind {
  HasCitations,
  DocRelevant,
  CitationAttests,
  RequiresCitation,
  NuggetAnswerable,
  ClaimsUnanswerable,
  AnswersQuestion,
  AnswerMatches,
};

enum class Verdict { Yes, No };
enum class Provenance { Lookup, Human, Llm };

std::string to_string(JudgmentKind kind);   // "CITATION_ATTESTS", ...
std::string to_string(Verdict verdict);     // "YES" / "NO"
std::string to_string(Provenance p);        // "LOOKUP" / "HUMAN" / "LLM"
std::optional<JudgmentKind> parse_judgment_kind(std::string_view s);
std::optional<Verdict> parse_verdict_label(std::string_view s);
std::optional<Provenance> parse_provenance(std::string_view s);

/// True for the kinds a judge answers; HAS_CITATIONS and NUGGET_ANSWERABLE
/// are always lookups, DOC_RELEVANT only reaches a judge as a fallback.
bool is_judge_resolved(JudgmentKind kind);

/// What a judgment is about. Sentence-level questions leave every field empty.
struct Subject {
  std::string doc_id;
  std::string nugget_id;
  std::string answer_id;

  static Subject doc(std::string id) { return {std::move(id), {}, {}}; }
  static Subject nugget(std::string id) { return {{}, std::move(id), {}}; }
  static Subject answer(std::string nugget, std::string answer) {
    return {{}, std::move(nugget), std::move(answer)};
  }

  auto operator<=>(const Subject&) const = default;
};

struct JudgmentKey {
  JudgmentKind kind = JudgmentKind::HasCitations;
  std::string run_id;
  std::string request_id;
  std::size_t sentence_index = 0;
  Subject subject;

  auto operator<=>(const JudgmentKey&) const = default;
};

struct JudgmentRecord {
  JudgmentKey key;
  Verdict verdict = Verdict::No;
  Provenance provenance = Provenance::Lookup;
  std::optional<std::string> raw_output;
  std::optional<std::string> prompt_fingerprint;
  // Set when the verdict was not read from the judge output (default-NO).
  std::optional<std::string> warning;

  bool operator==(const JudgmentRecord&) const = default;
};

void to_json(json& j, const JudgmentRecord& r);
JudgmentRecord judgment_record_from_json(const json& j);

/// Append-only judgment store keyed by JudgmentKey. A key is recorded at
/// most once; later appends of a present key are ignored.
class JudgmentLog {
 public:
  JudgmentLog() = default;
  JudgmentLog(const JudgmentLog& other);
  JudgmentLog& operator=(const JudgmentLog& other);

  /// Missing file yields an empty log; malformed lines throw IoError.
  static JudgmentLog load(const std::filesystem::path& path);
  /// Atomic replace of `path` with the log's content.
  void save(const std::filesystem::path& path) const;

  const JudgmentRecord* find(const JudgmentKey& key) const;
  bool append(JudgmentRecord record);
  void append_all(std::span<const JudgmentRecord> records);

  std::vector<JudgmentRecord> records() const;
  std::size_t size() const;
  std::string to_jsonl() const;

 private:
  mutable std::mutex mutex_;
  std::vector<JudgmentRecord> records_;
  std::map<JudgmentKey, std::size_t> index_;
};

/// Variables a prompt may reference: sentence, document, question, answer,
/// problem_statement, user_story.
using Variables = std::map<std::string, std::string>;

struct JudgeQuery {
  JudgmentKey key;
  Variables variables;
};

struct JudgeAnswer {
  Verdict verdict = Verdict::No;
  Provenance provenance = Provenance::Llm;
  std::optional<std::string> raw_output;
  std::optional<std::string> prompt_fingerprint;
  std::optional<std::string> warning;
};

/// Answers binary questions for judge-resolved kinds. Must be deterministic
/// for fixed inputs and fixed cache state, and safe to call concurrently.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeAnswer ask(const JudgeQuery& query) = 0;
};

enum class Outcome { Reward, Penalty, Neutral };
std::string to_string(Outcome o);  // "REWARD" / "PENALTY" / "NEUTRAL"

/// REWARD iff relevant and attesting; PENALTY iff not attesting; NEUTRAL
/// iff attesting but not relevant.
Outcome citation_outcome(bool relevant, bool attests) noexcept;

struct CitationOutcome {
  std::string doc_id;
  bool relevant = false;
  bool attests = false;
  Outcome outcome = Outcome::Penalty;

  bool operator==(const CitationOutcome&) const = default;
};

struct SentenceOutcome {
  std::size_t sentence_index = 0;
  std::vector<CitationOutcome> citation_outcomes;
  bool missing_citation_penalty = false;
  std::set<std::pair<std::string, std::string>> answered;  // (nugget_id, answer_id)
  std::set<std::string> unanswerable_claims;               // nugget_id

  bool operator==(const SentenceOutcome&) const = default;
};

struct ReportJudgments {
  std::string run_id;
  std::string request_id;
  std::vector<SentenceOutcome> sentence_outcomes;
  std::vector<JudgmentRecord> records;
  bool degenerate = false;  // report has no sentences
};

/// Resolves one judgment: a prior record wins, otherwise the lookup value or
/// the judge is used and a new record is kept. In replay mode every value must
/// come from the prior log.
class Recorder {
 public:
  Recorder(JudgmentKey prefix, const JudgmentLog* prior, Judge* judge, bool replay_only);

  JudgmentRecord lookup(JudgmentKind kind, const Subject& subject, Verdict value,
                        Provenance provenance = Provenance::Lookup);
  JudgmentRecord ask(JudgmentKind kind, const Subject& subject, Variables variables);
  const JudgmentRecord* prior(JudgmentKind kind, const Subject& subject) const;

  bool has_judge() const { return judge_ != nullptr; }
  std::size_t judge_calls() const { return judge_calls_; }
  std::vector<JudgmentRecord>& records() { return records_; }
  std::vector<JudgmentRecord> take_records() { return std::move(records_); }

 private:
  JudgmentKey key(JudgmentKind kind, const Subject& subject) const;
  std::optional<JudgmentRecord> reuse(const JudgmentKey& k);

  JudgmentKey prefix_;
  const JudgmentLog* prior_;
  Judge* judge_;
  bool replay_only_;
  std::size_t judge_calls_ = 0;
  std::vector<JudgmentRecord> records_;
};

/// Everything the tree needs to judge one sentence.
struct SentenceContext {
  const ReportRequest& request;
  const Sentence& sentence;
  std::span<const Nugget> nuggets;
  const DocumentCollection& collection;
  const RelevanceStore* qrels;  // may be null
  Recorder& recorder;
};

struct Relevance {
  Verdict verdict = Verdict::No;
  Provenance provenance = Provenance::Lookup;
};

/// Order: qrels entry (HUMAN), then nugget doc links (LOOKUP), then the judge
/// when some nugget's doc links are incomplete (LLM). Otherwise NO/LOOKUP.
Relevance doc_relevant(SentenceContext& ctx, const std::string& doc_id);

CitationOutcome evaluate_citation(SentenceContext& ctx, const std::string& doc_id);

/// Precondition: the sentence has no citations.
bool evaluate_uncited_sentence(SentenceContext& ctx);

/// Answer ids of an answerable nugget that the sentence conveys. The
/// per-answer question is asked only when the sentence addresses the nugget.
std::set<std::string> evaluate_content(SentenceContext& ctx, const Nugget& nugget);

/// Precondition: the nugget has no answers.
bool evaluate_unanswerable(SentenceContext& ctx, const Nugget& nugget);

SentenceOutcome evaluate_sentence(SentenceContext& ctx);

struct EngineOptions {
  std::size_t concurrency = 1;  // sentences judged in parallel
  bool replay_only = false;     // every verdict must come from the prior log
};

/// Judges every sentence of a report. Records from `prior` are reused rather
/// than re-asked. Output is independent of concurrency. On a judge failure
/// the records of fully judged sentences are appended to `partial` (if given)
/// before the error propagates.
ReportJudgments evaluate_report(const Report& report, const ReportRequest& request,
                                std::span<const Nugget> nuggets,
                                const DocumentCollection& collection, const RelevanceStore* qrels,
                                Judge* judge, const JudgmentLog* prior,
                                const EngineOptions& options = {},
                                std::vector<JudgmentRecord>* partial = nullptr);

std::set<std::string> aggregate_answered(const ReportJudgments& judgments,
                                         std::span<const Nugget> nuggets);

/// Bounds on judge calls for one sentence, for cost estimation.
struct CallBudget {
  std::size_t min_calls = 0;
  std::size_t max_calls = 0;
};
CallBudget judge_call_budget(const Sentence& sentence, std::span<const Nugget> nuggets,
                             bool relevance_by_judge = false);

}  // namespace argue
