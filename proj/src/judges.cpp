#include "argue/judges.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

#include "argue/errors.hpp"

namespace argue {

namespace {

// Lowercase, punctuation mapped to spaces, whitespace collapsed, padded with
// one space at both ends so containment respects word boundaries.
std::string normalize(std::string_view s) {
  std::string out = " ";
  for (unsigned char c : s) {
    char mapped = std::isalnum(c) || c >= 0x80 ? static_cast<char>(std::tolower(c)) : ' ';
    if (mapped == ' ' && out.back() == ' ') continue;
    out += mapped;
  }
  if (out.back() != ' ') out += ' ';
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in(normalize(s));
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStop{
      "about", "after", "also", "been", "before", "being", "could", "does", "from", "have",
      "into", "more", "most", "other", "over", "some", "such", "than", "that", "their",
      "them", "then", "there", "these", "they", "this", "those", "were", "what", "when",
      "where", "which", "while", "whom", "whose", "will", "with", "would", "your"};
  return kStop;
}

std::set<std::string> content_words(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : words(s)) {
    if (w.size() >= 4 && !stopwords().contains(w)) out.insert(std::move(w));
  }
  return out;
}

std::string variable(const JudgeQuery& q, const char* name) {
  auto it = q.variables.find(name);
  if (it == q.variables.end()) {
    throw JudgeError("oracle judge missing variable " + std::string(name) + " for " +
                     to_string(q.key.kind));
  }
  return it->second;
}

}  // namespace

bool OracleJudge::contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = normalize(needle);
  if (n == " ") return false;
  return normalize(haystack).find(n) != std::string::npos;
}

bool OracleJudge::shares_content_word(std::string_view a, std::string_view b) {
  const auto wa = content_words(a);
  const auto wb = content_words(b);
  return std::any_of(wa.begin(), wa.end(), [&](const std::string& w) { return wb.contains(w); });
}

bool OracleJudge::has_factual_claim_token(std::string_view sentence) {
  if (std::any_of(sentence.begin(), sentence.end(),
                  [](unsigned char c) { return std::isdigit(c); })) {
    return true;
  }
  // Capitalized word after the first one, e.g. a named entity.
  std::istringstream in{std::string(sentence)};
  std::string token;
  bool first = true;
  while (in >> token) {
    if (!first && std::isupper(static_cast<unsigned char>(token.front()))) return true;
    first = false;
  }
  return false;
}

bool OracleJudge::has_unanswerable_cue(std::string_view sentence) {
  static constexpr std::array<std::string_view, 8> kCues{
      "no information", "not found", "could not be determined", "no evidence",
      "is unknown",     "remains unknown", "no reliable",        "not available"};
  const std::string n = normalize(sentence);
  return std::any_of(kCues.begin(), kCues.end(), [&](std::string_view cue) {
    return n.find(normalize(cue)) != std::string::npos;
  });
}

JudgeAnswer OracleJudge::ask(const JudgeQuery& q) {
  bool yes = false;
  switch (q.key.kind) {
    case JudgmentKind::CitationAttests:
      yes = contains_normalized(variable(q, "document"), variable(q, "sentence"));
      break;
    case JudgmentKind::AnswerMatches:
      yes = contains_normalized(variable(q, "sentence"), variable(q, "answer"));
      break;
    case JudgmentKind::AnswersQuestion:
      yes = shares_content_word(variable(q, "sentence"), variable(q, "question"));
      break;
    case JudgmentKind::RequiresCitation:
      yes = has_factual_claim_token(variable(q, "sentence"));
      break;
    case JudgmentKind::ClaimsUnanswerable: {
      const auto sentence = variable(q, "sentence");
      yes = has_unanswerable_cue(sentence) && shares_content_word(sentence, variable(q, "question"));
      break;
    }
    case JudgmentKind::DocRelevant: {
      const auto doc = variable(q, "document");
      std::istringstream answers(variable(q, "answer"));
      for (std::string line; std::getline(answers, line);) {
        if (contains_normalized(doc, line)) {
          yes = true;
          break;
        }
      }
      break;
    }
    case JudgmentKind::HasCitations:
    case JudgmentKind::NuggetAnswerable:
      throw JudgeError(to_string(q.key.kind) + " is resolved by lookup, not by a judge");
  }
  JudgeAnswer a;
  a.verdict = yes ? Verdict::Yes : Verdict::No;
  a.provenance = Provenance::Lookup;
  return a;
}

JudgeAnswer LogReplayJudge::ask(const JudgeQuery& q) {
  const JudgmentRecord* r = log_.find(q.key);
  if (r == nullptr) {
    throw JudgeError("human judgment log has no " + to_string(q.key.kind) + " verdict for (" +
                     q.key.run_id + ", " + q.key.request_id + ") sentence " +
                     std::to_string(q.key.sentence_index));
  }
  JudgeAnswer a;
  a.verdict = r->verdict;
  a.provenance = Provenance::Human;
  a.raw_output = r->raw_output;
  return a;
}

}  // namespace argue
