#pragma once

// In-tree judges that need no model endpoint.

#include <string>
#include <string_view>

#include "argue/judgment.hpp"

namespace argue {

/// Deterministic rule-based judge for hermetic runs:
///   CITATION_ATTESTS     document contains the sentence (normalized)
///   ANSWER_MATCHES       sentence contains the answer text (normalized)
///   ANSWERS_QUESTION     sentence shares a content word with the question
///   REQUIRES_CITATION    sentence has a digit or a capitalized non-initial word
///   CLAIMS_UNANSWERABLE  sentence has an unanswerability cue and shares a
///                        content word with the question
///   DOC_RELEVANT         document contains one of the newline-separated answers
/// Matching is case-insensitive, punctuation-insensitive, and whitespace-collapsed.
class OracleJudge final : public Judge {
 public:
  JudgeAnswer ask(const JudgeQuery& query) override;

  static bool contains_normalized(std::string_view haystack, std::string_view needle);
  static bool shares_content_word(std::string_view a, std::string_view b);
  static bool has_factual_claim_token(std::string_view sentence);
  static bool has_unanswerable_cue(std::string_view sentence);
};

/// Replays verdicts from a judgment log (e.g. human assessments), provenance
/// HUMAN. A key absent from the log is a JudgeError.
class LogReplayJudge final : public Judge {
 public:
  explicit LogReplayJudge(JudgmentLog log) : log_(std::move(log)) {}
  JudgeAnswer ask(const JudgeQuery& query) override;

 private:
  JudgmentLog log_;
};

}  // namespace argue
