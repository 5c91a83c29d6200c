#pragma once

// Helpers shared by the test binaries: scratch directories, the synthetic
// end-to-end fixture, and a brute-force scorer over judgment-log files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "argue/core_model.hpp"
#include "argue/judges.hpp"
#include "argue/judgment.hpp"
#include "argue/metrics.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    for (;;) {
      path_ = fs::temp_directory_path() / ("argue-test-" + std::to_string(rd()));
      if (fs::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::set<std::string> lines_of(const std::string& text) {
  std::set<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.insert(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic fixture: 3 topics, 20 documents, 12 nuggets (mixed ALL/ANY and
// vital/okay, one without answers), 4 runs. Run r4 skips topic t3 and run r3
// leaves t2 empty.

struct SyntheticFiles {
  fs::path runs, topics, nuggets, docs, qrels;
};

struct Synthetic {
  std::vector<argue::ReportRequest> topics;
  std::vector<argue::Nugget> nuggets;
  std::map<std::string, std::string> docs;  // doc_id -> text
  std::vector<std::tuple<std::string, std::string, int>> qrels;
  std::vector<argue::Report> reports;

  SyntheticFiles write(const fs::path& dir) const {
    SyntheticFiles f{dir / "runs.jsonl", dir / "topics.jsonl", dir / "nuggets.jsonl",
                     dir / "docs.jsonl", dir / "qrels.txt"};
    std::string text;
    for (const auto& r : reports) text += json(r).dump() + "\n";
    write_text(f.runs, text);
    text.clear();
    for (const auto& t : topics) text += json(t).dump() + "\n";
    write_text(f.topics, text);
    text.clear();
    for (const auto& t : topics) {
      json line{{"request_id", t.request_id}, {"nuggets", json::array()}};
      for (const auto& n : nuggets) {
        if (n.request_id == t.request_id) line["nuggets"].push_back(json(n));
      }
      text += line.dump() + "\n";
    }
    write_text(f.nuggets, text);
    text.clear();
    for (const auto& [id, body] : docs) {
      text += json{{"doc_id", id}, {"title", "Record " + id}, {"text", body}}.dump() + "\n";
    }
    write_text(f.docs, text);
    text.clear();
    for (const auto& [req, doc, grade] : qrels) {
      text += req + " 0 " + doc + " " + std::to_string(grade) + "\n";
    }
    write_text(f.qrels, text);
    return f;
  }
};

inline Synthetic make_synthetic(std::uint32_t seed = 7) {
  static const std::vector<std::string> kSubjects{
      "harbor", "glacier", "turbine", "orchard", "lantern", "canyon",
      "meadow", "quarry",  "beacon",  "summit",  "delta",   "ferry"};
  static const std::vector<std::string> kSyllables{"ka", "lo", "mi", "ru", "ze", "to", "vi", "xa"};
  std::mt19937 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto token = [&](std::size_t i) {
    // Distinct nonsense word per index.
    return kSyllables[i % 8] + kSyllables[(i / 8) % 8] + kSyllables[(i / 64 + 3) % 8] + "n";
  };
  auto fact = [](const std::string& subject, const std::string& answer) {
    return "the " + subject + " record lists " + answer + ".";
  };

  Synthetic s;
  for (int t = 1; t <= 3; ++t) {
    argue::ReportRequest r;
    r.request_id = "t" + std::to_string(t);
    r.problem_statement = "Write a report on site group " + std::to_string(t) + ".";
    r.user_story = "An analyst comparing sites.";
    r.collection_id = "synthetic";
    s.topics.push_back(r);
  }

  // Documents d01..d20; topic of doc j is (j - 1) % 3.
  std::vector<std::vector<std::string>> doc_text(21);
  auto doc_id = [](std::size_t j) { return std::string(j < 10 ? "d0" : "d") + std::to_string(j); };
  auto docs_for_topic = [&](std::size_t t) {
    std::vector<std::size_t> out;
    for (std::size_t j = 1; j <= 20; ++j) {
      if ((j - 1) % 3 == t) out.push_back(j);
    }
    return out;
  };

  std::size_t answer_counter = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    const std::size_t t = i / 4;
    argue::Nugget n;
    n.nugget_id = "n" + std::to_string(i + 1);
    n.request_id = s.topics[t].request_id;
    n.question = "Which value does the " + kSubjects[i] + " record list?";
    n.combinator = i % 3 == 0 ? argue::Combinator::All : argue::Combinator::Any;
    n.importance = i % 2 == 1 ? argue::Importance::Okay : argue::Importance::Vital;
    if (i != 11) {
      const std::size_t count = 1 + (i + 1) % 3;
      for (std::size_t k = 0; k < count; ++k) {
        argue::Answer a;
        a.answer_id = n.nugget_id + "a" + std::to_string(k + 1);
        a.text = token(answer_counter++);
        const auto pool = docs_for_topic(t);
        const std::size_t first = pool[pick(pool.size())];
        doc_text[first].push_back(fact(kSubjects[i], a.text));
        if (answer_counter % 5 != 0) a.attesting_doc_ids.push_back(doc_id(first));
        if (pick(2) == 0) {
          const std::size_t second = pool[pick(pool.size())];
          if (second != first) {
            doc_text[second].push_back(fact(kSubjects[i], a.text));
            if (answer_counter % 5 != 0) a.attesting_doc_ids.push_back(doc_id(second));
          }
        }
        n.answers.push_back(std::move(a));
      }
      n.lookup_incomplete = std::any_of(n.answers.begin(), n.answers.end(),
                                        [](const argue::Answer& a) { return a.attesting_doc_ids.empty(); });
    }
    s.nuggets.push_back(std::move(n));
  }
  for (std::size_t j = 1; j <= 20; ++j) {
    doc_text[j].push_back("the weather near site " + std::to_string(j) + " was mild.");
    std::string body;
    for (const auto& sentence : doc_text[j]) body += (body.empty() ? "" : " ") + sentence;
    s.docs[doc_id(j)] = body;
  }
  s.qrels = {{"t1", "d01", 1}, {"t1", "d04", 0}, {"t2", "d05", 2}, {"t3", "d03", 0},
             {"t3", "d12", 1}, {"t2", "d11", 0}};

  for (int run = 1; run <= 4; ++run) {
    for (std::size_t t = 0; t < 3; ++t) {
      if (run == 4 && t == 2) continue;
      argue::Report report;
      report.run_id = "r" + std::to_string(run);
      report.request_id = s.topics[t].request_id;
      const std::size_t n_sentences = (run == 3 && t == 1) ? 0 : 4 + pick(5);
      for (std::size_t k = 0; k < n_sentences; ++k) {
        const std::size_t ni = t * 4 + pick(4);
        const argue::Nugget& nugget = s.nuggets[ni];
        const std::string& subject = kSubjects[ni];
        const auto pool = docs_for_topic(t);
        argue::Sentence sentence;
        sentence.index = k;
        switch (pick(7)) {
          case 0:
          case 1: {  // stated fact, cited to a document that holds it (or not)
            if (!nugget.answerable()) {
              sentence.text = "The " + subject + " record is the subject of this paragraph.";
              break;
            }
            const auto& answer = nugget.answers[pick(nugget.answers.size())];
            sentence.text = fact(subject, answer.text);
            sentence.text[0] = 'T';
            for (std::size_t c = 0; c < 1 + pick(2); ++c) {
              const std::string id = doc_id(pool[pick(pool.size())]);
              if (std::find(sentence.citations.begin(), sentence.citations.end(), id) ==
                  sentence.citations.end()) {
                sentence.citations.push_back(id);
              }
            }
            if (!answer.attesting_doc_ids.empty() && pick(2) == 0) {
              sentence.citations.insert(sentence.citations.begin(), answer.attesting_doc_ids.front());
              sentence.citations.erase(
                  std::unique(sentence.citations.begin(), sentence.citations.end()),
                  sentence.citations.end());
            }
            break;
          }
          case 2: {  // two answers in one sentence, uncited
            if (nugget.answers.size() >= 2) {
              sentence.text = "Both " + nugget.answers[0].text + " and " + nugget.answers[1].text +
                              " appear in the " + subject + " record.";
            } else {
              sentence.text = "in summary, the following holds for the " + subject + ".";
            }
            break;
          }
          case 3:  // fabricated citation
            sentence.text = "The " + subject + " record was updated in 2019.";
            sentence.citations.push_back("dX" + std::to_string(run));
            break;
          case 4:  // uncited claim needing a citation
            sentence.text = "Inspections of the " + subject + " began in 1994.";
            break;
          case 5:  // unanswerability claim about the last nugget of the topic
            sentence.text = "No information about the " + kSubjects[t * 4 + 3] + " value was found.";
            if (pick(2) == 0) sentence.citations.push_back(doc_id(pool[pick(pool.size())]));
            break;
          default:  // filler
            sentence.text = "in summary, the following holds.";
            break;
        }
        report.sentences.push_back(std::move(sentence));
      }
      // Split one ALL nugget's answers across two sentences in run r1.
      if (run == 1 && t == 0 && s.nuggets[0].answers.size() >= 1) {
        for (const auto& a : s.nuggets[0].answers) {
          argue::Sentence extra;
          extra.index = report.sentences.size();
          extra.text = "Separately, the " + kSubjects[0] + " record lists " + a.text + ".";
          report.sentences.push_back(extra);
        }
      }
      s.reports.push_back(std::move(report));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Brute-force scorer: recomputes every metric from the raw lines of a
// judgment-log file with plain set arithmetic.

struct BruteForce {
  std::map<std::string, argue::metrics::TopicScore> topics;  // keyed by run_id + "/" + request_id
  std::map<std::string, argue::metrics::RunScore> runs;
};

inline BruteForce brute_force_scores(const fs::path& log_path,
                                     const std::vector<argue::Report>& reports,
                                     const std::vector<argue::Nugget>& nuggets,
                                     const std::vector<std::string>& expected_topics,
                                     bool cited_or_required = false, double vital = 1.0,
                                     double okay = 0.5) {
  // (kind, run, request, sentence, doc, nugget, answer) -> YES?
  std::map<std::string, bool> yes;
  std::ifstream in(log_path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const json& subj = j.at("subject");
    const std::string key = j.at("kind").get<std::string>() + "|" +
                            j.at("run_id").get<std::string>() + "|" +
                            j.at("request_id").get<std::string>() + "|" +
                            std::to_string(j.at("sentence_index").get<std::size_t>()) + "|" +
                            subj.value("doc_id", "") + "|" + subj.value("nugget_id", "") + "|" +
                            subj.value("answer_id", "");
    yes[key] = j.at("verdict") == "YES";
  }
  auto verdict = [&](const std::string& kind, const argue::Report& r, std::size_t i,
                     const std::string& doc, const std::string& nugget,
                     const std::string& answer) {
    const std::string key = kind + "|" + r.run_id + "|" + r.request_id + "|" + std::to_string(i) +
                            "|" + doc + "|" + nugget + "|" + answer;
    auto it = yes.find(key);
    if (it == yes.end()) throw std::runtime_error("brute force: log lacks " + key);
    return it->second;
  };

  BruteForce out;
  for (const auto& r : reports) {
    std::vector<const argue::Nugget*> bank;
    for (const auto& n : nuggets) {
      if (n.request_id == r.request_id) bank.push_back(&n);
    }
    std::size_t cited = 0, precise = 0, required = 0, citations = 0, relevant = 0, attesting = 0;
    std::size_t rewards = 0, penalties = 0, neutral = 0;
    std::set<std::pair<std::string, std::string>> pairs;
    std::set<std::string> claims;
    for (const auto& s : r.sentences) {
      const bool has = verdict("HAS_CITATIONS", r, s.index, "", "", "");
      if (has) {
        ++cited;
        bool all = true;
        for (const auto& d : s.citations) {
          const bool a = verdict("CITATION_ATTESTS", r, s.index, d, "", "");
          const bool rel = verdict("DOC_RELEVANT", r, s.index, d, "", "");
          ++citations;
          relevant += rel;
          attesting += a;
          all = all && a;
          if (!a) ++penalties;
          else if (rel) ++rewards;
          else ++neutral;
        }
        precise += all;
      } else if (verdict("REQUIRES_CITATION", r, s.index, "", "", "")) {
        ++required;
      }
      for (const auto* n : bank) {
        if (n->answers.empty()) {
          if (verdict("CLAIMS_UNANSWERABLE", r, s.index, "", n->nugget_id, "")) {
            claims.insert(n->nugget_id);
          }
        } else if (verdict("ANSWERS_QUESTION", r, s.index, "", n->nugget_id, "")) {
          for (const auto& a : n->answers) {
            if (verdict("ANSWER_MATCHES", r, s.index, "", n->nugget_id, a.answer_id)) {
              pairs.emplace(n->nugget_id, a.answer_id);
            }
          }
        }
      }
    }

    argue::metrics::TopicScore t;
    t.request_id = r.request_id;
    t.degenerate_report = r.sentences.empty();
    double got = 0, total = 0, got_w = 0, total_w = 0;
    for (const auto* n : bank) {
      bool answered;
      if (n->answers.empty()) {
        answered = claims.contains(n->nugget_id);
      } else {
        std::size_t hit = 0;
        for (const auto& a : n->answers) hit += pairs.contains({n->nugget_id, a.answer_id});
        answered = n->combinator == argue::Combinator::All ? hit == n->answers.size() : hit > 0;
      }
      const double w = n->importance == argue::Importance::Vital ? vital : okay;
      total += 1;
      total_w += w;
      if (answered) {
        got += 1;
        got_w += w;
        t.answered_nuggets.push_back(n->nugget_id);
      }
    }
    std::sort(t.answered_nuggets.begin(), t.answered_nuggets.end());
    t.nugget_recall = got / total;
    t.nugget_recall_weighted = got_w / total_w;
    const std::size_t denom = cited_or_required ? cited + required : cited;
    t.precision_degenerate = denom == 0;
    t.sentence_precision = denom == 0 ? 0.0 : double(precise) / double(denom);
    auto harmonic = [](double p, double q) { return p + q == 0 ? 0.0 : 2 * p * q / (p + q); };
    t.f1 = harmonic(t.sentence_precision, t.nugget_recall);
    t.f1_weighted = harmonic(t.sentence_precision, t.nugget_recall_weighted);
    const double ns = double(r.sentences.size());
    if (citations > 0) {
      t.fine.pct_relevant_citations = double(relevant) / double(citations);
      t.fine.pct_attesting_citations = double(attesting) / double(citations);
    }
    if (!r.sentences.empty()) {
      t.fine.pct_sentences_cited = double(cited) / ns;
      t.fine.citations_per_sentence = double(citations) / ns;
    }
    t.fine.n_rewards = rewards;
    t.fine.n_penalties = penalties;
    t.fine.n_neutral = neutral;
    t.fine.n_missing_citation_penalties = required;
    out.topics[r.run_id + "/" + r.request_id] = t;
  }

  std::set<std::string> run_ids;
  for (const auto& r : reports) run_ids.insert(r.run_id);
  for (const auto& run : run_ids) {
    argue::metrics::RunScore m;
    m.run_id = run;
    m.n_topics = expected_topics.size();
    for (const auto& topic : expected_topics) {
      auto it = out.topics.find(run + "/" + topic);
      argue::metrics::TopicScore t;
      t.request_id = topic;
      if (it == out.topics.end()) {
        m.missing_topics.push_back(topic);
      } else {
        t = it->second;
      }
      if (t.precision_degenerate) m.degenerate_topics.push_back(topic);
      m.sentence_precision += t.sentence_precision;
      m.nugget_recall += t.nugget_recall;
      m.nugget_recall_weighted += t.nugget_recall_weighted;
      m.f1 += t.f1;
      m.f1_weighted += t.f1_weighted;
      m.fine.pct_relevant_citations += t.fine.pct_relevant_citations;
      m.fine.pct_attesting_citations += t.fine.pct_attesting_citations;
      m.fine.pct_sentences_cited += t.fine.pct_sentences_cited;
      m.fine.citations_per_sentence += t.fine.citations_per_sentence;
      m.fine.n_rewards += t.fine.n_rewards;
      m.fine.n_penalties += t.fine.n_penalties;
      m.fine.n_neutral += t.fine.n_neutral;
      m.fine.n_missing_citation_penalties += t.fine.n_missing_citation_penalties;
    }
    const double n = double(expected_topics.size());
    m.sentence_precision /= n;
    m.nugget_recall /= n;
    m.nugget_recall_weighted /= n;
    m.f1 /= n;
    m.f1_weighted /= n;
    m.fine.pct_relevant_citations /= n;
    m.fine.pct_attesting_citations /= n;
    m.fine.pct_sentences_cited /= n;
    m.fine.citations_per_sentence /= n;
    out.runs[run] = m;
  }
  return out;
}

// Brute-force topic scores of one run in expected-topic order, with an
// all-zero entry flagged missing for each topic the run skipped.
inline std::vector<argue::metrics::TopicScore> brute_run_topics(
    const BruteForce& b, const std::string& run, const std::vector<std::string>& expected_topics) {
  std::vector<argue::metrics::TopicScore> out;
  for (const auto& topic : expected_topics) {
    auto it = b.topics.find(run + "/" + topic);
    if (it != b.topics.end()) {
      out.push_back(it->second);
    } else {
      argue::metrics::TopicScore t;
      t.request_id = topic;
      t.missing = true;
      out.push_back(t);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Three sentences judged by the oracle: s1 cites two documents that both
// attest it, s2 cites one that does not, s3 is uncited but states a named
// entity, so it needs a citation.

inline argue::ReportJudgments precision_fixture() {
  argue::DocumentCollection docs;
  docs.add("d1", {std::nullopt, "The dam opened in 1936. It is 221 meters tall."});
  docs.add("d2", {std::nullopt, "Records show the dam opened in 1936."});
  argue::Nugget n;
  n.nugget_id = "n1";
  n.request_id = "t1";
  n.question = "When was the dam opened?";
  n.answers = {{"a1", "1936", {"d1"}}};
  const std::vector<argue::Nugget> bank{n};
  argue::Report report{"r1", "t1",
                       {{0, "The dam opened in 1936.", {"d1", "d2"}},
                        {1, "The dam cost 9 billion dollars.", {"d1"}},
                        {2, "The dam is in Nevada.", {}}},
                       {}};
  argue::ReportRequest request{"t1", "Describe the dam.", "A student.", "c", std::nullopt};
  argue::OracleJudge oracle;
  return argue::evaluate_report(report, request, bank, docs, nullptr, &oracle, nullptr);
}

}  // namespace testing_support
