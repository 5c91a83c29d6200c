#include "argue/judgment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "argue/errors.hpp"
#include "argue/io_util.hpp"

namespace argue {

namespace {

constexpr std::array<std::pair<JudgmentKind, const char*>, 8> kKindNames{{
    {JudgmentKind::HasCitations, "HAS_CITATIONS"},
    {JudgmentKind::DocRelevant, "DOC_RELEVANT"},
    {JudgmentKind::CitationAttests, "CITATION_ATTESTS"},
    {JudgmentKind::RequiresCitation, "REQUIRES_CITATION"},
    {JudgmentKind::NuggetAnswerable, "NUGGET_ANSWERABLE"},
    {JudgmentKind::ClaimsUnanswerable, "CLAIMS_UNANSWERABLE"},
    {JudgmentKind::AnswersQuestion, "ANSWERS_QUESTION"},
    {JudgmentKind::AnswerMatches, "ANSWER_MATCHES"},
}};

std::string describe(const JudgmentKey& k) {
  std::string s = to_string(k.kind) + " for (" + k.run_id + ", " + k.request_id + ") sentence " +
                  std::to_string(k.sentence_index);
  if (!k.subject.doc_id.empty()) s += " doc " + k.subject.doc_id;
  if (!k.subject.nugget_id.empty()) s += " nugget " + k.subject.nugget_id;
  if (!k.subject.answer_id.empty()) s += " answer " + k.subject.answer_id;
  return s;
}

Variables base_variables(const SentenceContext& ctx) {
  return {{"sentence", ctx.sentence.text},
          {"problem_statement", ctx.request.problem_statement},
          {"user_story", ctx.request.user_story}};
}

std::string document_text(const Document& doc) {
  if (doc.title && !doc.title->empty()) return *doc.title + "\n" + doc.text;
  return doc.text;
}

}  // namespace

std::string to_string(JudgmentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "UNKNOWN";
}

std::optional<JudgmentKind> parse_judgment_kind(std::string_view s) {
  for (const auto& [k, name] : kKindNames) {
    if (s == name) return k;
  }
  return std::nullopt;
}

std::string to_string(Verdict v) { return v == Verdict::Yes ? "YES" : "NO"; }

std::optional<Verdict> parse_verdict_label(std::string_view s) {
  if (s == "YES") return Verdict::Yes;
  if (s == "NO") return Verdict::No;
  return std::nullopt;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Lookup: return "LOOKUP";
    case Provenance::Human: return "HUMAN";
    case Provenance::Llm: return "LLM";
  }
  return "LOOKUP";
}

std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "LOOKUP") return Provenance::Lookup;
  if (s == "HUMAN") return Provenance::Human;
  if (s == "LLM") return Provenance::Llm;
  return std::nullopt;
}

bool is_judge_resolved(JudgmentKind kind) {
  return kind != JudgmentKind::HasCitations && kind != JudgmentKind::NuggetAnswerable;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Reward: return "REWARD";
    case Outcome::Penalty: return "PENALTY";
    case Outcome::Neutral: return "NEUTRAL";
  }
  return "PENALTY";
}

Outcome citation_outcome(bool relevant, bool attests) noexcept {
  if (!attests) return Outcome::Penalty;
  return relevant ? Outcome::Reward : Outcome::Neutral;
}

// ---------------------------------------------------------------------------
// Records and the log

void to_json(json& j, const JudgmentRecord& r) {
  json subject = json::object();
  if (!r.key.subject.doc_id.empty()) subject["doc_id"] = r.key.subject.doc_id;
  if (!r.key.subject.nugget_id.empty()) subject["nugget_id"] = r.key.subject.nugget_id;
  if (!r.key.subject.answer_id.empty()) subject["answer_id"] = r.key.subject.answer_id;
  j = json{{"kind", to_string(r.key.kind)},
           {"run_id", r.key.run_id},
           {"request_id", r.key.request_id},
           {"sentence_index", r.key.sentence_index},
           {"subject", std::move(subject)},
           {"verdict", to_string(r.verdict)},
           {"provenance", to_string(r.provenance)},
           {"raw_output", r.raw_output ? json(*r.raw_output) : json(nullptr)},
           {"prompt_fingerprint", r.prompt_fingerprint ? json(*r.prompt_fingerprint) : json(nullptr)}};
  if (r.warning) j["warning"] = *r.warning;
}

JudgmentRecord judgment_record_from_json(const json& j) {
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  JudgmentRecord r;
  auto kind = parse_judgment_kind(j.at("kind").get<std::string>());
  auto verdict = parse_verdict_label(j.at("verdict").get<std::string>());
  auto provenance = parse_provenance(j.at("provenance").get<std::string>());
  if (!kind || !verdict || !provenance) throw std::invalid_argument("invalid enum value in record");
  r.key.kind = *kind;
  r.key.run_id = j.at("run_id").get<std::string>();
  r.key.request_id = j.at("request_id").get<std::string>();
  r.key.sentence_index = j.at("sentence_index").get<std::size_t>();
  const json& subject = j.at("subject");
  r.key.subject.doc_id = subject.value("doc_id", "");
  r.key.subject.nugget_id = subject.value("nugget_id", "");
  r.key.subject.answer_id = subject.value("answer_id", "");
  r.verdict = *verdict;
  r.provenance = *provenance;
  r.raw_output = optional_string("raw_output");
  r.prompt_fingerprint = optional_string("prompt_fingerprint");
  r.warning = optional_string("warning");
  return r;
}

JudgmentLog::JudgmentLog(const JudgmentLog& other) {
  std::lock_guard lock(other.mutex_);
  records_ = other.records_;
  index_ = other.index_;
}

JudgmentLog& JudgmentLog::operator=(const JudgmentLog& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  records_ = other.records_;
  index_ = other.index_;
  return *this;
}

JudgmentLog JudgmentLog::load(const std::filesystem::path& path) {
  JudgmentLog log;
  if (!std::filesystem::exists(path)) return log;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open judgment log " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.append(judgment_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError("malformed judgment record at " + path.string() + ":" +
                    std::to_string(number) + ": " + e.what());
    }
  }
  return log;
}

void JudgmentLog::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_jsonl());
}

const JudgmentRecord* JudgmentLog::find(const JudgmentKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &records_[it->second];
}

bool JudgmentLog::append(JudgmentRecord record) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = index_.emplace(record.key, records_.size());
  if (!inserted) return false;
  records_.push_back(std::move(record));
  return true;
}

void JudgmentLog::append_all(std::span<const JudgmentRecord> records) {
  for (const auto& r : records) append(r);
}

std::vector<JudgmentRecord> JudgmentLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t JudgmentLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string JudgmentLog::to_jsonl() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& r : records_) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recorder

Recorder::Recorder(JudgmentKey prefix, const JudgmentLog* prior, Judge* judge, bool replay_only)
    : prefix_(std::move(prefix)), prior_(prior), judge_(judge), replay_only_(replay_only) {}

JudgmentKey Recorder::key(JudgmentKind kind, const Subject& subject) const {
  JudgmentKey k = prefix_;
  k.kind = kind;
  k.subject = subject;
  return k;
}

const JudgmentRecord* Recorder::prior(JudgmentKind kind, const Subject& subject) const {
  return prior_ == nullptr ? nullptr : prior_->find(key(kind, subject));
}

std::optional<JudgmentRecord> Recorder::reuse(const JudgmentKey& k) {
  if (prior_ != nullptr) {
    if (const auto* found = prior_->find(k)) {
      records_.push_back(*found);
      return *found;
    }
  }
  if (replay_only_) throw IncompleteLogError("judgment log has no " + describe(k));
  return std::nullopt;
}

JudgmentRecord Recorder::lookup(JudgmentKind kind, const Subject& subject, Verdict value,
                                Provenance provenance) {
  auto k = key(kind, subject);
  if (auto found = reuse(k)) return *found;
  JudgmentRecord r{std::move(k), value, provenance, std::nullopt, std::nullopt, std::nullopt};
  records_.push_back(r);
  return r;
}

JudgmentRecord Recorder::ask(JudgmentKind kind, const Subject& subject, Variables variables) {
  auto k = key(kind, subject);
  if (auto found = reuse(k)) return *found;
  if (judge_ == nullptr) throw JudgeError("no judge configured to answer " + describe(k));
  JudgeAnswer answer = judge_->ask(JudgeQuery{k, std::move(variables)});
  ++judge_calls_;
  JudgmentRecord r{std::move(k), answer.verdict, answer.provenance, std::move(answer.raw_output),
                   std::move(answer.prompt_fingerprint), std::move(answer.warning)};
  records_.push_back(r);
  return r;
}

// ---------------------------------------------------------------------------
// Tree operations

Relevance doc_relevant(SentenceContext& ctx, const std::string& doc_id) {
  const auto subject = Subject::doc(doc_id);
  const auto& request_id = ctx.request.request_id;
  auto resolved = [](const JudgmentRecord& r) { return Relevance{r.verdict, r.provenance}; };

  if (ctx.qrels != nullptr) {
    if (auto grade = ctx.qrels->grade(request_id, doc_id)) {
      return resolved(ctx.recorder.lookup(JudgmentKind::DocRelevant, subject,
                                          *grade > 0 ? Verdict::Yes : Verdict::No,
                                          Provenance::Human));
    }
  }

  bool linked = false;
  bool incomplete = false;
  for (const auto& nugget : ctx.nuggets) {
    incomplete = incomplete || nugget.lookup_incomplete;
    for (const auto& answer : nugget.answers) {
      const auto& ids = answer.attesting_doc_ids;
      linked = linked || std::find(ids.begin(), ids.end(), doc_id) != ids.end();
    }
  }
  if (linked) return resolved(ctx.recorder.lookup(JudgmentKind::DocRelevant, subject, Verdict::Yes));

  const Document* doc = ctx.collection.find(doc_id);
  if (incomplete && ctx.recorder.has_judge() && doc != nullptr) {
    Variables vars = base_variables(ctx);
    vars["document"] = document_text(*doc);
    std::string answers;
    for (const auto& nugget : ctx.nuggets) {
      for (const auto& answer : nugget.answers) {
        if (!answers.empty()) answers += '\n';
        answers += answer.text;
      }
    }
    vars["answer"] = std::move(answers);
    return resolved(ctx.recorder.ask(JudgmentKind::DocRelevant, subject, std::move(vars)));
  }
  return resolved(ctx.recorder.lookup(JudgmentKind::DocRelevant, subject, Verdict::No));
}

CitationOutcome evaluate_citation(SentenceContext& ctx, const std::string& doc_id) {
  const auto subject = Subject::doc(doc_id);
  bool attests = false;
  if (const Document* doc = ctx.collection.find(doc_id); doc == nullptr) {
    // Unknown document: cannot support the sentence, no judge call.
    attests = ctx.recorder.lookup(JudgmentKind::CitationAttests, subject, Verdict::No).verdict ==
              Verdict::Yes;
  } else {
    Variables vars = base_variables(ctx);
    vars["document"] = document_text(*doc);
    attests = ctx.recorder.ask(JudgmentKind::CitationAttests, subject, std::move(vars)).verdict ==
              Verdict::Yes;
  }
  const bool relevant = doc_relevant(ctx, doc_id).verdict == Verdict::Yes;
  return CitationOutcome{doc_id, relevant, attests, citation_outcome(relevant, attests)};
}

bool evaluate_uncited_sentence(SentenceContext& ctx) {
  if (!ctx.sentence.citations.empty()) {
    throw std::invalid_argument("evaluate_uncited_sentence called on a cited sentence");
  }
  return ctx.recorder.ask(JudgmentKind::RequiresCitation, Subject{}, base_variables(ctx)).verdict ==
         Verdict::Yes;
}

std::set<std::string> evaluate_content(SentenceContext& ctx, const Nugget& nugget) {
  if (!nugget.answerable()) {
    throw std::invalid_argument("evaluate_content called on unanswerable nugget " +
                                nugget.nugget_id);
  }
  Variables vars = base_variables(ctx);
  vars["question"] = nugget.question;
  std::set<std::string> attested;
  if (ctx.recorder.ask(JudgmentKind::AnswersQuestion, Subject::nugget(nugget.nugget_id), vars)
          .verdict == Verdict::No) {
    return attested;
  }
  for (const auto& answer : nugget.answers) {
    Variables answer_vars = vars;
    answer_vars["answer"] = answer.text;
    auto r = ctx.recorder.ask(JudgmentKind::AnswerMatches,
                              Subject::answer(nugget.nugget_id, answer.answer_id),
                              std::move(answer_vars));
    if (r.verdict == Verdict::Yes) attested.insert(answer.answer_id);
  }
  return attested;
}

bool evaluate_unanswerable(SentenceContext& ctx, const Nugget& nugget) {
  if (nugget.answerable()) {
    throw std::invalid_argument("evaluate_unanswerable called on answerable nugget " +
                                nugget.nugget_id);
  }
  Variables vars = base_variables(ctx);
  vars["question"] = nugget.question;
  return ctx.recorder
             .ask(JudgmentKind::ClaimsUnanswerable, Subject::nugget(nugget.nugget_id),
                  std::move(vars))
             .verdict == Verdict::Yes;
}

SentenceOutcome evaluate_sentence(SentenceContext& ctx) {
  SentenceOutcome out;
  out.sentence_index = ctx.sentence.index;

  const bool cited = !ctx.sentence.citations.empty();
  ctx.recorder.lookup(JudgmentKind::HasCitations, Subject{}, cited ? Verdict::Yes : Verdict::No);
  if (cited) {
    for (const auto& doc_id : ctx.sentence.citations) {
      out.citation_outcomes.push_back(evaluate_citation(ctx, doc_id));
    }
  } else {
    out.missing_citation_penalty = evaluate_uncited_sentence(ctx);
  }

  for (const auto& nugget : ctx.nuggets) {
    const bool answerable = nugget.answerable();
    ctx.recorder.lookup(JudgmentKind::NuggetAnswerable, Subject::nugget(nugget.nugget_id),
                        answerable ? Verdict::Yes : Verdict::No);
    if (answerable) {
      for (auto& answer_id : evaluate_content(ctx, nugget)) {
        out.answered.emplace(nugget.nugget_id, std::move(answer_id));
      }
    } else if (evaluate_unanswerable(ctx, nugget)) {
      out.unanswerable_claims.insert(nugget.nugget_id);
    }
  }
  return out;
}

ReportJudgments evaluate_report(const Report& report, const ReportRequest& request,
                                std::span<const Nugget> nuggets,
                                const DocumentCollection& collection, const RelevanceStore* qrels,
                                Judge* judge, const JudgmentLog* prior,
                                const EngineOptions& options,
                                std::vector<JudgmentRecord>* partial) {
  const std::size_t n = report.sentences.size();
  struct Slot {
    std::optional<SentenceOutcome> outcome;
    std::vector<JudgmentRecord> records;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const Sentence& sentence = report.sentences[i];
      JudgmentKey prefix{JudgmentKind::HasCitations, report.run_id, report.request_id,
                         sentence.index, {}};
      Recorder recorder(std::move(prefix), prior, judge, options.replay_only);
      SentenceContext ctx{request, sentence, nuggets, collection, qrels, recorder};
      try {
        slots[i].outcome = evaluate_sentence(ctx);
        slots[i].records = recorder.take_records();
      } catch (...) {
        slots[i].error = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options.concurrency, 1), n);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  ReportJudgments out{report.run_id, report.request_id, {}, {}, n == 0};
  std::exception_ptr first_error;
  for (auto& slot : slots) {
    if (slot.error && !first_error) first_error = slot.error;
    if (!slot.outcome) continue;
    out.sentence_outcomes.push_back(std::move(*slot.outcome));
    out.records.insert(out.records.end(), std::make_move_iterator(slot.records.begin()),
                       std::make_move_iterator(slot.records.end()));
  }
  if (first_error) {
    if (partial != nullptr) {
      partial->insert(partial->end(), out.records.begin(), out.records.end());
    }
    std::rethrow_exception(first_error);
  }
  return out;
}

std::set<std::string> aggregate_answered(const ReportJudgments& judgments,
                                         std::span<const Nugget> nuggets) {
  std::set<std::pair<std::string, std::string>> answered;
  std::set<std::string> claims;
  for (const auto& s : judgments.sentence_outcomes) {
    answered.insert(s.answered.begin(), s.answered.end());
    claims.insert(s.unanswerable_claims.begin(), s.unanswerable_claims.end());
  }

  std::set<std::string> out;
  for (const auto& nugget : nuggets) {
    if (!nugget.answerable()) {
      if (claims.contains(nugget.nugget_id)) out.insert(nugget.nugget_id);
      continue;
    }
    auto given = [&](const Answer& a) { return answered.contains({nugget.nugget_id, a.answer_id}); };
    const bool ok = nugget.combinator == Combinator::All
                        ? std::all_of(nugget.answers.begin(), nugget.answers.end(), given)
                        : std::any_of(nugget.answers.begin(), nugget.answers.end(), given);
    if (ok) out.insert(nugget.nugget_id);
  }
  return out;
}

CallBudget judge_call_budget(const Sentence& sentence, std::span<const Nugget> nuggets,
                             bool relevance_by_judge) {
  CallBudget b;
  if (sentence.citations.empty()) {
    b.min_calls = b.max_calls = 1;
  } else {
    b.min_calls = b.max_calls = sentence.citations.size();
    if (relevance_by_judge) b.max_calls += sentence.citations.size();
  }
  for (const auto& nugget : nuggets) {
    b.min_calls += 1;
    b.max_calls += 1 + nugget.answers.size();
  }
  return b;
}

}  // namespace argue
