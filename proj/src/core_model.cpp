#include "argue/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "argue/errors.hpp"

namespace argue {

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  auto begin = std::find_if(s.begin(), s.end(), not_space);
  auto end = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return begin < end ? std::string_view(&*begin, static_cast<std::size_t>(end - begin))
                     : std::string_view{};
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

// Reads typed fields from one JSON object, recording issues against a line.
class FieldReader {
 public:
  FieldReader(const json& object, std::string what, SourceLocation where,
              std::vector<ValidationIssue>& issues)
      : object_(object), what_(std::move(what)), where_(std::move(where)), issues_(issues) {}

  bool failed() const { return failed_; }

  std::optional<std::string> string(const char* key, bool required = true) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end() || it->is_null()) {
      if (required) error("missing field " + std::string(key));
      return std::nullopt;
    }
    if (!it->is_string()) {
      error("field " + std::string(key) + " must be a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  // Nonempty after trimming whitespace.
  std::optional<std::string> text(const char* key) {
    auto value = string(key);
    if (value && trim(*value).empty()) {
      error("field " + std::string(key) + " is empty");
      return std::nullopt;
    }
    return value;
  }

  const json* array(const char* key, bool required = true) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end() || it->is_null()) {
      if (required) error("missing field " + std::string(key));
      return nullptr;
    }
    if (!it->is_array()) {
      error("field " + std::string(key) + " must be an array");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::vector<std::string>> string_list(const char* key, bool required = true) {
    const json* arr = array(key, required);
    if (arr == nullptr) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      if (!item.is_string()) {
        error("field " + std::string(key) + " must contain only strings");
        return std::nullopt;
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  void warn_unknown() {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.contains(key)) warning("unknown field " + key);
    }
  }

  void error(const std::string& message) {
    failed_ = true;
    issues_.push_back({Severity::Error, where_, message + suffix()});
  }

  void warning(const std::string& message) {
    issues_.push_back({Severity::Warning, where_, message + suffix()});
  }

 private:
  std::string suffix() const {
    std::string s;
    if (!what_.empty()) s += " in " + what_;
    s += " at line " + std::to_string(where_.line);
    return s;
  }

  const json& object_;
  std::string what_;
  SourceLocation where_;
  std::vector<ValidationIssue>& issues_;
  std::unordered_set<std::string> seen_;
  bool failed_ = false;
};

// Calls fn(object, location) for every nonblank line holding a JSON object.
template <class Fn>
void for_each_json_line(std::istream& in, const std::string& label,
                        std::vector<ValidationIssue>& issues, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    SourceLocation where{label, number};
    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      issues.push_back({Severity::Error, where,
                        "malformed JSON at line " + std::to_string(number) + ": " + e.what()});
      continue;
    }
    if (!object.is_object()) {
      issues.push_back({Severity::Error, where,
                        "expected a JSON object at line " + std::to_string(number)});
      continue;
    }
    fn(object, where);
  }
}

std::optional<Combinator> parse_combinator(std::string_view s) {
  auto u = upper(s);
  if (u == "ALL" || u == "AND") return Combinator::All;
  if (u == "ANY" || u == "OR") return Combinator::Any;
  return std::nullopt;
}

std::optional<Importance> parse_importance(std::string_view s) {
  auto u = upper(s);
  if (u == "VITAL") return Importance::Vital;
  if (u == "OKAY") return Importance::Okay;
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

void NuggetBank::add(Nugget nugget) {
  by_request_[nugget.request_id].push_back(std::move(nugget));
}

std::span<const Nugget> NuggetBank::for_request(const std::string& request_id) const {
  auto it = by_request_.find(request_id);
  if (it == by_request_.end()) return {};
  return it->second;
}

bool NuggetBank::contains(const std::string& request_id) const {
  auto it = by_request_.find(request_id);
  return it != by_request_.end() && !it->second.empty();
}

std::vector<std::string> NuggetBank::request_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, nuggets] : by_request_) ids.push_back(id);
  return ids;
}

std::size_t NuggetBank::size() const {
  std::size_t n = 0;
  for (const auto& [id, nuggets] : by_request_) n += nuggets.size();
  return n;
}

void RelevanceStore::set(const std::string& request_id, const std::string& doc_id, int grade) {
  entries_[{request_id, doc_id}] = grade;
}

std::optional<int> RelevanceStore::grade(const std::string& request_id,
                                         const std::string& doc_id) const {
  auto it = entries_.find({request_id, doc_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool RelevanceStore::relevant(const std::string& request_id, const std::string& doc_id) const {
  auto g = grade(request_id, doc_id);
  return g && *g > 0;
}

std::set<std::pair<std::string, std::string>> RelevanceStore::binary_view() const {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [key, grade] : entries_) {
    if (grade > 0) out.insert(key);
  }
  return out;
}

bool DocumentCollection::add(std::string doc_id, Document doc) {
  return docs_.emplace(std::move(doc_id), std::move(doc)).second;
}

const Document* DocumentCollection::find(const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  return it == docs_.end() ? nullptr : &it->second;
}

std::string to_string(const ValidationIssue& issue) {
  std::string out = issue.severity == Severity::Error ? "ERROR" : "WARNING";
  out += " ";
  if (!issue.location.file.empty()) {
    out += issue.location.file;
    if (issue.location.line > 0) out += ":" + std::to_string(issue.location.line);
    out += ": ";
  }
  out += issue.message;
  return out;
}

bool has_errors(std::span<const ValidationIssue> issues) {
  return std::any_of(issues.begin(), issues.end(),
                     [](const ValidationIssue& i) { return i.severity == Severity::Error; });
}

std::string to_string(Combinator c) { return c == Combinator::All ? "ALL" : "ANY"; }
std::string to_string(Importance i) { return i == Importance::Vital ? "vital" : "okay"; }

// ---------------------------------------------------------------------------
// Parsers

Parsed<std::vector<Report>> parse_run(std::istream& in, const std::string& label) {
  Parsed<std::vector<Report>> out;
  std::map<std::pair<std::string, std::string>, std::size_t> first_line;

  for_each_json_line(in, label, out.issues, [&](const json& obj, const SourceLocation& where) {
    FieldReader fields(obj, "", where, out.issues);
    auto run_id = fields.string("run_id");
    auto request_id = fields.string("request_id");
    const json* sentences = fields.array("sentences");
    fields.warn_unknown();
    if (fields.failed()) return;

    Report report{*run_id, *request_id, {}, where};
    bool bad = false;
    for (std::size_t i = 0; i < sentences->size(); ++i) {
      const json& s = (*sentences)[i];
      std::string what = "sentence " + std::to_string(i);
      if (!s.is_object()) {
        out.issues.push_back({Severity::Error, where,
                              what + " must be an object at line " + std::to_string(where.line)});
        bad = true;
        continue;
      }
      FieldReader sf(s, what, where, out.issues);
      auto text = sf.text("text");
      auto citations = sf.string_list("citations", /*required=*/false);
      sf.warn_unknown();
      if (sf.failed()) {
        bad = true;
        continue;
      }
      Sentence sentence{i, *text, {}};
      for (auto& doc_id : citations.value_or(std::vector<std::string>{})) {
        if (std::find(sentence.citations.begin(), sentence.citations.end(), doc_id) !=
            sentence.citations.end()) {
          sf.warning("duplicate citation " + doc_id + " collapsed");
          continue;
        }
        sentence.citations.push_back(std::move(doc_id));
      }
      report.sentences.push_back(std::move(sentence));
    }
    if (bad) return;

    auto key = std::make_pair(report.run_id, report.request_id);
    if (auto it = first_line.find(key); it != first_line.end()) {
      out.issues.push_back({Severity::Error, where,
                            "duplicate report (" + key.first + ", " + key.second + ") at line " +
                                std::to_string(where.line) + "; first seen at line " +
                                std::to_string(it->second)});
      return;
    }
    first_line.emplace(key, where.line);
    out.value.push_back(std::move(report));
  });
  return out;
}

Parsed<std::vector<ReportRequest>> parse_topics(std::istream& in, const std::string& label) {
  Parsed<std::vector<ReportRequest>> out;
  std::map<std::string, std::size_t> first_line;

  for_each_json_line(in, label, out.issues, [&](const json& obj, const SourceLocation& where) {
    FieldReader fields(obj, "", where, out.issues);
    auto request_id = fields.text("request_id");
    auto problem = fields.text("problem_statement");
    auto story = fields.text("user_story");
    auto collection = fields.string("collection_id");
    auto background = fields.string("background", /*required=*/false);
    fields.warn_unknown();
    if (fields.failed()) return;

    if (auto it = first_line.find(*request_id); it != first_line.end()) {
      fields.error("duplicate request_id " + *request_id + " (first seen at line " +
                   std::to_string(it->second) + ")");
      return;
    }
    first_line.emplace(*request_id, where.line);
    out.value.push_back({*request_id, *problem, *story, *collection, background});
  });
  return out;
}

Parsed<NuggetBank> parse_nuggets(std::istream& in, const std::string& label) {
  Parsed<NuggetBank> out;
  std::set<std::pair<std::string, std::string>> seen;

  for_each_json_line(in, label, out.issues, [&](const json& obj, const SourceLocation& where) {
    FieldReader fields(obj, "", where, out.issues);
    auto request_id = fields.text("request_id");
    const json* nuggets = fields.array("nuggets");
    fields.warn_unknown();
    if (fields.failed()) return;

    for (std::size_t i = 0; i < nuggets->size(); ++i) {
      const json& n = (*nuggets)[i];
      std::string what = "nugget " + std::to_string(i);
      if (!n.is_object()) {
        out.issues.push_back({Severity::Error, where,
                              what + " must be an object at line " + std::to_string(where.line)});
        continue;
      }
      FieldReader nf(n, what, where, out.issues);
      auto nugget_id = nf.text("nugget_id");
      auto question = nf.text("question");
      auto combinator = nf.string("combinator", /*required=*/false);
      auto importance = nf.string("importance", /*required=*/false);
      const json* answers = nf.array("answers");
      nf.warn_unknown();
      if (nf.failed()) continue;

      Nugget nugget;
      nugget.nugget_id = *nugget_id;
      nugget.request_id = *request_id;
      nugget.question = *question;
      if (combinator) {
        auto c = parse_combinator(*combinator);
        if (!c) {
          nf.error("invalid combinator " + *combinator);
          continue;
        }
        nugget.combinator = *c;
      } else {
        nugget.combinator_defaulted = true;
      }
      if (importance) {
        auto imp = parse_importance(*importance);
        if (!imp) {
          nf.error("invalid importance " + *importance);
          continue;
        }
        nugget.importance = *imp;
      } else {
        nugget.importance_defaulted = true;
      }

      bool bad = false;
      std::unordered_set<std::string> answer_ids;
      for (std::size_t a = 0; a < answers->size(); ++a) {
        const json& ans = (*answers)[a];
        std::string awhat = what + " answer " + std::to_string(a);
        if (!ans.is_object()) {
          nf.error(awhat + " must be an object");
          bad = true;
          continue;
        }
        FieldReader af(ans, *nugget_id + " answer " + std::to_string(a), where, out.issues);
        auto answer_id = af.text("answer_id");
        auto text = af.text("text");
        auto doc_ids = af.string_list("doc_ids", /*required=*/false);
        af.warn_unknown();
        if (af.failed()) {
          bad = true;
          continue;
        }
        if (!answer_ids.insert(*answer_id).second) {
          af.error("duplicate answer_id " + *answer_id);
          bad = true;
          continue;
        }
        Answer answer{*answer_id, *text, {}};
        for (auto& d : doc_ids.value_or(std::vector<std::string>{})) {
          if (std::find(answer.attesting_doc_ids.begin(), answer.attesting_doc_ids.end(), d) ==
              answer.attesting_doc_ids.end()) {
            answer.attesting_doc_ids.push_back(std::move(d));
          }
        }
        if (answer.attesting_doc_ids.empty()) {
          af.warning("answer " + *answer_id + " has no attesting documents (lookup-incomplete)");
          nugget.lookup_incomplete = true;
        }
        nugget.answers.push_back(std::move(answer));
      }
      if (bad) continue;

      if (!seen.insert({*request_id, *nugget_id}).second) {
        nf.error("duplicate nugget_id " + *nugget_id + " for request " + *request_id);
        continue;
      }
      out.value.add(std::move(nugget));
    }
  });
  return out;
}

Parsed<RelevanceStore> parse_qrels(std::istream& in, const std::string& label) {
  Parsed<RelevanceStore> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    SourceLocation where{label, number};
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string col; fields >> col;) cols.push_back(col);
    if (cols.size() != 4) {
      out.issues.push_back({Severity::Error, where,
                            "expected 4 columns (request_id iter doc_id grade) at line " +
                                std::to_string(number)});
      continue;
    }
    int grade = 0;
    const std::string& g = cols[3];
    auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
    if (ec != std::errc{} || ptr != g.data() + g.size()) {
      out.issues.push_back({Severity::Error, where,
                            "non-integer grade " + g + " at line " + std::to_string(number)});
      continue;
    }
    if (grade < 0) {
      out.issues.push_back({Severity::Error, where,
                            "negative grade " + g + " at line " + std::to_string(number)});
      continue;
    }
    if (out.value.grade(cols[0], cols[2])) {
      out.issues.push_back({Severity::Warning, where,
                            "duplicate judgment (" + cols[0] + ", " + cols[2] +
                                ") overwrites earlier grade at line " + std::to_string(number)});
    }
    out.value.set(cols[0], cols[2], grade);
  }
  return out;
}

Parsed<DocumentCollection> parse_documents(std::istream& in, const std::string& label) {
  Parsed<DocumentCollection> out;
  for_each_json_line(in, label, out.issues, [&](const json& obj, const SourceLocation& where) {
    FieldReader fields(obj, "", where, out.issues);
    auto doc_id = fields.text("doc_id");
    auto title = fields.string("title", /*required=*/false);
    auto text = fields.text("text");
    fields.warn_unknown();
    if (fields.failed()) return;
    if (!out.value.add(*doc_id, Document{title, *text})) {
      fields.error("duplicate doc_id " + *doc_id);
    }
  });
  return out;
}

#define ARGUE_FILE_PARSER(name, type)                                   \
  Parsed<type> name(const std::filesystem::path& path) {               \
    auto in = open_or_throw(path);                                      \
    return name(in, path.string());                                     \
  }

ARGUE_FILE_PARSER(parse_run, std::vector<Report>)
ARGUE_FILE_PARSER(parse_topics, std::vector<ReportRequest>)
ARGUE_FILE_PARSER(parse_nuggets, NuggetBank)
ARGUE_FILE_PARSER(parse_qrels, RelevanceStore)
ARGUE_FILE_PARSER(parse_documents, DocumentCollection)

#undef ARGUE_FILE_PARSER

// ---------------------------------------------------------------------------

std::vector<ValidationIssue> validate_inputs(std::span<const Report> reports,
                                             std::span<const ReportRequest> topics,
                                             const NuggetBank& bank,
                                             const DocumentCollection* collection) {
  std::vector<ValidationIssue> issues;
  std::set<std::string> topic_ids;
  for (const auto& t : topics) topic_ids.insert(t.request_id);

  for (const auto& t : topics) {
    if (!bank.contains(t.request_id)) {
      issues.push_back({Severity::Warning, {},
                        "topic " + t.request_id + " has no nuggets and cannot be scored"});
    }
  }
  for (const auto& id : bank.request_ids()) {
    if (!topic_ids.contains(id)) {
      issues.push_back({Severity::Warning, {}, "nuggets given for unknown request_id " + id});
    }
  }

  for (const auto& report : reports) {
    const std::string who = "report (" + report.run_id + ", " + report.request_id + ")";
    if (!topic_ids.contains(report.request_id)) {
      issues.push_back({Severity::Error, report.origin,
                        who + " names unknown request_id " + report.request_id});
      continue;
    }
    if (!bank.contains(report.request_id)) {
      issues.push_back({Severity::Error, report.origin,
                        who + " is unscorable: request " + report.request_id + " has no nuggets"});
    }
    if (collection == nullptr) continue;
    for (const auto& s : report.sentences) {
      for (const auto& doc_id : s.citations) {
        if (!collection->contains(doc_id)) {
          issues.push_back({Severity::Warning, report.origin,
                            who + " sentence " + std::to_string(s.index) +
                                " cites unknown document " + doc_id});
        }
      }
    }
  }
  return issues;
}

std::vector<std::string> scorable_topics(std::span<const ReportRequest> topics,
                                         const NuggetBank& bank) {
  std::vector<std::string> out;
  for (const auto& t : topics) {
    if (bank.contains(t.request_id)) out.push_back(t.request_id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(json& j, const Sentence& s) {
  j = json{{"text", s.text}, {"citations", s.citations}};
}

void to_json(json& j, const Report& r) {
  j = json{{"run_id", r.run_id}, {"request_id", r.request_id}, {"sentences", r.sentences}};
}

void to_json(json& j, const ReportRequest& r) {
  j = json{{"request_id", r.request_id},
           {"problem_statement", r.problem_statement},
           {"user_story", r.user_story},
           {"collection_id", r.collection_id}};
  if (r.background) j["background"] = *r.background;
}

void to_json(json& j, const Answer& a) {
  j = json{{"answer_id", a.answer_id}, {"text", a.text}, {"doc_ids", a.attesting_doc_ids}};
}

void to_json(json& j, const Nugget& n) {
  j = json{{"nugget_id", n.nugget_id},
           {"question", n.question},
           {"combinator", to_string(n.combinator)},
           {"importance", to_string(n.importance)},
           {"answers", n.answers}};
}

std::vector<json> nugget_lines(const NuggetBank& bank) {
  std::vector<json> lines;
  for (const auto& id : bank.request_ids()) {
    json nuggets = json::array();
    for (const auto& n : bank.for_request(id)) nuggets.push_back(n);
    lines.push_back(json{{"request_id", id}, {"nuggets", std::move(nuggets)}});
  }
  return lines;
}

}  // namespace argue
