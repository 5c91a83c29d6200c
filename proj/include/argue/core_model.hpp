#pragma once

// Domain types for report-generation evaluation and their line-oriented
// file formats: runs, topics (report requests), nugget banks, qrels, and
// document collections.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace argue {

using json = nlohmann::json;

struct SourceLocation {
  std::string file;
  std::size_t line = 0;  // 1-based; 0 when the value was not read from a file
};

struct ReportRequest {
  std::string request_id;
  std::string problem_statement;
  std::string user_story;
  std::string collection_id;
  std::optional<std::string> background;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  std::vector<std::string> citations;  // duplicates collapsed, first occurrence kept
};

struct Report {
  std::string run_id;
  std::string request_id;
  std::vector<Sentence> sentences;
  SourceLocation origin;
};

enum class Combinator { All, Any };
enum class Importance { Vital, Okay };

struct ImportanceWeights {
  double vital = 1.0;
  double okay = 0.5;

  double of(Importance importance) const noexcept {
    return importance == Importance::Vital ? vital : okay;
  }
};

struct Answer {
  std::string answer_id;
  std::string text;
  std::vector<std::string> attesting_doc_ids;
};

struct Nugget {
  std::string nugget_id;
  std::string request_id;
  std::string question;
  Combinator combinator = Combinator::Any;
  Importance importance = Importance::Vital;
  std::vector<Answer> answers;

  // Some answer has no attesting documents, so doc-link lookup cannot be
  // treated as closed-world for this nugget.
  bool lookup_incomplete = false;
  bool combinator_defaulted = false;
  bool importance_defaulted = false;

  bool answerable() const noexcept { return !answers.empty(); }
};

class NuggetBank {
 public:
  void add(Nugget nugget);

  /// Nuggets for one request, in file order. Empty when the request is unknown.
  std::span<const Nugget> for_request(const std::string& request_id) const;
  bool contains(const std::string& request_id) const;
  std::vector<std::string> request_ids() const;
  std::size_t size() const;

 private:
  std::map<std::string, std::vector<Nugget>> by_request_;
};

class RelevanceStore {
 public:
  void set(const std::string& request_id, const std::string& doc_id, int grade);
  std::optional<int> grade(const std::string& request_id, const std::string& doc_id) const;
  bool relevant(const std::string& request_id, const std::string& doc_id) const;

  /// Every (request_id, doc_id) with grade > 0.
  std::set<std::pair<std::string, std::string>> binary_view() const;
  const std::map<std::pair<std::string, std::string>, int>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, int> entries_;
};

struct Document {
  std::optional<std::string> title;
  std::string text;
};

class DocumentCollection {
 public:
  bool add(std::string doc_id, Document doc);  // false when the id already exists
  const Document* find(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const { return find(doc_id) != nullptr; }
  const std::map<std::string, Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }

 private:
  std::map<std::string, Document> docs_;
};

enum class Severity { Error, Warning };

struct ValidationIssue {
  Severity severity = Severity::Error;
  SourceLocation location;
  std::string message;
};

std::string to_string(const ValidationIssue& issue);
bool has_errors(std::span<const ValidationIssue> issues);

template <class T>
struct Parsed {
  T value;
  std::vector<ValidationIssue> issues;

  bool ok() const { return !has_errors(issues); }
};

// Parsers collect per-line problems as issues; lines with ERROR issues are
// dropped from the value. A file that cannot be opened throws IoError.
Parsed<std::vector<Report>> parse_run(const std::filesystem::path& path);
Parsed<std::vector<ReportRequest>> parse_topics(const std::filesystem::path& path);
Parsed<NuggetBank> parse_nuggets(const std::filesystem::path& path);
Parsed<RelevanceStore> parse_qrels(const std::filesystem::path& path);
Parsed<DocumentCollection> parse_documents(const std::filesystem::path& path);

Parsed<std::vector<Report>> parse_run(std::istream& in, const std::string& label);
Parsed<std::vector<ReportRequest>> parse_topics(std::istream& in, const std::string& label);
Parsed<NuggetBank> parse_nuggets(std::istream& in, const std::string& label);
Parsed<RelevanceStore> parse_qrels(std::istream& in, const std::string& label);
Parsed<DocumentCollection> parse_documents(std::istream& in, const std::string& label);

/// Cross-file checks: every report names a known topic with a nonempty
/// nugget bank; every citation names a document in the collection. A null
/// collection skips the citation check.
std::vector<ValidationIssue> validate_inputs(std::span<const Report> reports,
                                             std::span<const ReportRequest> topics,
                                             const NuggetBank& bank,
                                             const DocumentCollection* collection);

/// Topics that can be scored: present in the topic file and in the bank.
std::vector<std::string> scorable_topics(std::span<const ReportRequest> topics,
                                         const NuggetBank& bank);

std::string to_string(Combinator c);
std::string to_string(Importance i);

// Serialization in the same shape as the input line formats.
void to_json(json& j, const Sentence& s);
void to_json(json& j, const Report& r);
void to_json(json& j, const ReportRequest& r);
void to_json(json& j, const Answer& a);
void to_json(json& j, const Nugget& n);

/// One nuggets-file line per request, ordered by request_id.
std::vector<json> nugget_lines(const NuggetBank& bank);

}  // namespace argue
