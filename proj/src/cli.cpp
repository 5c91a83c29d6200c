#include "argue/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>

#include "argue/errors.hpp"
#include "argue/io_util.hpp"
#include "argue/judges.hpp"
#include "argue/llm_gateway.hpp"
#include "argue/meta_eval.hpp"

#ifndef ARGUE_DEFAULT_PROMPTS_DIR
#define ARGUE_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace argue::cli {

namespace fs = std::filesystem;

namespace {

struct Inputs {
  std::vector<Report> reports;
  std::vector<ReportRequest> topics;
  NuggetBank bank;
  std::optional<RelevanceStore> qrels;
  std::optional<DocumentCollection> docs;
  std::vector<ValidationIssue> issues;
};

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
}

template <class T>
T take(Parsed<T> parsed, std::vector<ValidationIssue>& issues) {
  issues.insert(issues.end(), parsed.issues.begin(), parsed.issues.end());
  return std::move(parsed.value);
}

Inputs load_inputs(const Config& c, bool need_docs) {
  require(c.runs, "--runs");
  require(c.topics, "--topics");
  require(c.nuggets, "--nuggets");
  if (need_docs && !c.docs) throw ConfigError("--docs is required");
  Inputs in;
  in.reports = take(parse_run(c.runs), in.issues);
  in.topics = take(parse_topics(c.topics), in.issues);
  in.bank = take(parse_nuggets(c.nuggets), in.issues);
  if (c.qrels) in.qrels = take(parse_qrels(*c.qrels), in.issues);
  if (c.docs) in.docs = take(parse_documents(*c.docs), in.issues);
  auto cross = validate_inputs(in.reports, in.topics, in.bank, in.docs ? &*in.docs : nullptr);
  in.issues.insert(in.issues.end(), cross.begin(), cross.end());
  return in;
}

// Prints issues; true when any is an ERROR.
bool report_issues(const std::vector<ValidationIssue>& issues, std::ostream& err) {
  std::size_t errors = 0;
  for (const auto& i : issues) {
    err << to_string(i) << '\n';
    if (i.severity == Severity::Error) ++errors;
  }
  return errors > 0;
}

std::map<std::string, const ReportRequest*> topic_index(const std::vector<ReportRequest>& topics) {
  std::map<std::string, const ReportRequest*> out;
  for (const auto& t : topics) out.emplace(t.request_id, &t);
  return out;
}

std::vector<std::string> run_ids_in_order(const std::vector<Report>& reports) {
  std::vector<std::string> ids;
  for (const auto& r : reports) {
    if (std::find(ids.begin(), ids.end(), r.run_id) == ids.end()) ids.push_back(r.run_id);
  }
  return ids;
}

std::vector<Nugget> defaulted_nuggets(const NuggetBank& bank) {
  std::vector<Nugget> out;
  for (const auto& id : bank.request_ids()) {
    for (const auto& n : bank.for_request(id)) {
      if (n.combinator_defaulted || n.importance_defaulted) out.push_back(n);
    }
  }
  return out;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const JudgeError& e) {
    err << "judge error: " << e.what();
    if (!e.fingerprint().empty()) err << " (fingerprint " << e.fingerprint() << ")";
    err << '\n';
    return kJudgeFailure;
  } catch (const IncompleteLogError& e) {
    err << "incomplete judgment log: " << e.what() << '\n';
    return kIncomplete;
  } catch (const MisalignmentError& e) {
    err << "misaligned score sources: " << e.what() << '\n';
    return kMisaligned;
  } catch (const json::exception& e) {
    err << "malformed JSON input: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace

void check_config(const Config& c) {
  if (!(c.weights.vital > 0.0) || !(c.weights.okay > 0.0)) {
    throw ConfigError("importance weights must be positive");
  }
  if (c.concurrency < 1) throw ConfigError("--concurrency must be at least 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("--alpha must be in (0, 1)");
  if (c.judge == JudgeMode::Llm && (c.endpoint.empty() || c.model.empty())) {
    throw ConfigError("--judge llm requires --endpoint and --model");
  }
  if (c.judge == JudgeMode::HumanLog && !c.human_log) {
    throw ConfigError("--judge human-log requires --human-log");
  }
  if (c.max_attempts < 1) throw ConfigError("--max-attempts must be at least 1");
}

// ---------------------------------------------------------------------------

int cmd_validate(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    auto in = load_inputs(config, /*need_docs=*/true);
    const bool failed = report_issues(in.issues, err);
    const auto errors = static_cast<std::size_t>(
        std::count_if(in.issues.begin(), in.issues.end(),
                      [](const ValidationIssue& i) { return i.severity == Severity::Error; }));
    out << in.reports.size() << " reports, " << errors << " errors, "
        << in.issues.size() - errors << " warnings\n";
    return failed ? kValidation : kOk;
  });
}

int cmd_judge(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    require(config.out, "--out");
    auto in = load_inputs(config, /*need_docs=*/true);
    if (report_issues(in.issues, err)) return static_cast<int>(kValidation);

    JudgmentLog log = JudgmentLog::load(config.out);
    const std::size_t resumed = log.size();

    std::unique_ptr<llm::LlmGateway> gateway;
    std::unique_ptr<Judge> judge;
    switch (config.judge) {
      case JudgeMode::Oracle:
        judge = std::make_unique<OracleJudge>();
        break;
      case JudgeMode::HumanLog:
        if (!fs::exists(*config.human_log)) {
          throw IoError("human judgment log not found: " + config.human_log->string());
        }
        judge = std::make_unique<LogReplayJudge>(JudgmentLog::load(*config.human_log));
        break;
      case JudgeMode::Llm: {
        llm::GatewayConfig g;
        g.endpoint = config.endpoint;
        g.model = config.model;
        g.api_key_env = config.api_key_env;
        g.max_tokens = config.max_tokens;
        g.retry.max_attempts = config.max_attempts;
        g.retry.base_delay = std::chrono::milliseconds(config.retry_base_ms);
        g.timeout = std::chrono::seconds(config.timeout_s);
        g.cache_dir = config.cache_dir;
        gateway = std::make_unique<llm::LlmGateway>(std::move(g));
        const fs::path prompts = config.prompts_dir.value_or(fs::path(ARGUE_DEFAULT_PROMPTS_DIR));
        judge = std::make_unique<llm::LlmJudge>(*gateway, llm::load_templates(prompts));
        break;
      }
    }

    const auto topics = topic_index(in.topics);
    EngineOptions options{config.concurrency, false};
    std::size_t defaulted = 0;
    for (const auto& report : in.reports) {
      std::vector<JudgmentRecord> partial;
      try {
        auto judged = evaluate_report(report, *topics.at(report.request_id),
                                      in.bank.for_request(report.request_id), *in.docs,
                                      in.qrels ? &*in.qrels : nullptr, judge.get(), &log, options,
                                      &partial);
        for (const auto& r : judged.records) {
          if (r.warning && !log.find(r.key)) ++defaulted;
        }
        log.append_all(judged.records);
      } catch (const JudgeError&) {
        log.append_all(partial);
        log.save(config.out);
        err << "judging stopped at report (" << report.run_id << ", " << report.request_id
            << "); " << log.size() << " records saved for resume\n";
        throw;
      }
      log.save(config.out);
    }
    log.save(config.out);

    out << log.size() << " judgment records (" << resumed << " reused from existing log)";
    if (gateway) out << ", " << gateway->requests_sent() << " HTTP requests";
    out << '\n';
    if (defaulted > 0) {
      err << "WARNING " << defaulted << " verdicts were unparseable twice and defaulted to NO\n";
    }
    return static_cast<int>(kOk);
  });
}

int cmd_score(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    require(config.out, "--out");
    require(config.log, "--log");
    auto in = load_inputs(config, /*need_docs=*/false);
    if (report_issues(in.issues, err)) return static_cast<int>(kValidation);
    if (!fs::exists(config.log)) throw IoError("judgment log not found: " + config.log.string());
    const JudgmentLog log = JudgmentLog::load(config.log);

    const auto topics = topic_index(in.topics);
    const auto expected = scorable_topics(in.topics, in.bank);
    auto run_ids = run_ids_in_order(in.reports);
    if (config.run_id) {
      if (std::find(run_ids.begin(), run_ids.end(), *config.run_id) == run_ids.end()) {
        throw ConfigError("run " + *config.run_id + " not in " + config.runs.string());
      }
      run_ids = {*config.run_id};
    }
    const bool per_run_files = run_ids.size() > 1;
    const metrics::ScoreConfig score_config{config.precision_mode, config.weights};
    const auto defaulted = defaulted_nuggets(in.bank);

    for (const auto& run_id : run_ids) {
      std::vector<metrics::TopicScore> scores;
      std::vector<std::string> unjudged;
      for (const auto& report : in.reports) {
        if (report.run_id != run_id) continue;
        const auto nuggets = in.bank.for_request(report.request_id);
        try {
          auto judged = evaluate_report(report, *topics.at(report.request_id), nuggets,
                                        DocumentCollection{}, nullptr, nullptr, &log,
                                        EngineOptions{1, /*replay_only=*/true});
          scores.push_back(metrics::score_topic(judged, nuggets, score_config));
        } catch (const IncompleteLogError& e) {
          if (!config.allow_partial) throw;
          unjudged.push_back(report.request_id);
          err << "WARNING run " << run_id << " topic " << report.request_id
              << " not fully judged; scored as missing\n";
        }
      }
      const auto aligned = metrics::align_topics(scores, expected);
      const auto macro = metrics::score_run(run_id, aligned, expected);
      json doc = metrics::scores_document(macro, aligned, score_config, defaulted);
      doc["metadata"]["unjudged_topics"] = unjudged;
      const fs::path target = per_run_files ? config.out / (run_id + ".scores.json") : config.out;
      write_file_atomic(target, dump_fixed6(doc) + "\n");
      out << run_id << ": topics=" << macro.n_topics << " missing=" << macro.missing_topics.size()
          << " sentence_precision=" << macro.sentence_precision
          << " nugget_recall=" << macro.nugget_recall << " f1=" << macro.f1 << '\n';
    }
    return static_cast<int>(kOk);
  });
}

int cmd_meta(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    if (config.human.empty() || config.automatic.empty()) {
      throw ConfigError("--human and --auto score sources are required");
    }
    auto is_tsv = [](const fs::path& p) { return p.extension() == ".tsv"; };
    const bool human_tsv = std::all_of(config.human.begin(), config.human.end(), is_tsv);
    const bool auto_tsv = std::all_of(config.automatic.begin(), config.automatic.end(), is_tsv);
    const bool any_tsv = std::any_of(config.human.begin(), config.human.end(), is_tsv) ||
                         std::any_of(config.automatic.begin(), config.automatic.end(), is_tsv);

    std::vector<meta::MetaEvalReport> reports;
    if (any_tsv) {
      if (!human_tsv || !auto_tsv || config.human.size() != 1 || config.automatic.size() != 1) {
        throw ConfigError("TSV input takes exactly one matrix per source");
      }
      const std::string metric = config.metrics.empty() ? "score" : config.metrics.front();
      reports.push_back(meta::agreement_accuracy(meta::read_matrix_tsv(config.human.front()),
                                                 meta::read_matrix_tsv(config.automatic.front()),
                                                 config.alpha, metric));
    } else {
      auto load_all = [](const std::vector<fs::path>& paths) {
        std::vector<json> docs;
        for (const auto& p : paths) docs.push_back(json::parse(read_file(p)));
        return docs;
      };
      const auto human_docs = load_all(config.human);
      const auto auto_docs = load_all(config.automatic);
      std::vector<std::string> metric_names = config.metrics;
      if (metric_names.empty()) metric_names = {"sentence_precision", "nugget_recall"};
      for (const auto& m : metric_names) {
        static const std::set<std::string> kKnown{"sentence_precision", "nugget_recall",
                                                  "nugget_recall_weighted", "f1", "f1_weighted"};
        if (!kKnown.contains(m)) throw ConfigError("unknown metric " + m);
        reports.push_back(meta::agreement_accuracy(meta::matrix_from_scores(human_docs, m),
                                                   meta::matrix_from_scores(auto_docs, m),
                                                   config.alpha, m));
      }
    }

    json doc{{"reports", json::array()}};
    for (const auto& r : reports) {
      doc["reports"].push_back(meta::to_json(r));
      out << r.metric_name << ": tau=" << r.tau.tau << " agreement_accuracy="
          << r.agreement_accuracy << " pairs=" << r.n_pairs << '\n';
    }
    if (!config.out.empty()) write_file_atomic(config.out, doc.dump(2) + "\n");
    if (config.pair_table) {
      for (const auto& r : reports) {
        fs::path target = *config.pair_table;
        if (reports.size() > 1) {
          target = target.parent_path() /
                   (target.stem().string() + "." + r.metric_name + target.extension().string());
        }
        write_file_atomic(target, meta::pair_table_tsv(r));
      }
    }
    return static_cast<int>(kOk);
  });
}

json build_viz_bundle(std::span<const Report> reports, const NuggetBank& bank,
                      const JudgmentLog& log, const json& scores_document) {
  const std::string run_id = scores_document.at("run_id").get<std::string>();
  ImportanceWeights weights;
  if (const auto m = scores_document.find("metadata"); m != scores_document.end()) {
    if (const auto w = m->find("weights"); w != m->end()) {
      weights.vital = w->value("vital", weights.vital);
      weights.okay = w->value("okay", weights.okay);
    }
  }
  std::map<std::string, const Report*> by_topic;
  for (const auto& r : reports) {
    if (r.run_id == run_id) by_topic.emplace(r.request_id, &r);
  }

  json topics = json::array();
  for (const auto& topic_score : scores_document.at("topics")) {
    const std::string request_id = topic_score.at("request_id").get<std::string>();
    const auto nuggets = bank.for_request(request_id);

    std::optional<ReportJudgments> judged;
    const Report* report = nullptr;
    if (auto it = by_topic.find(request_id); it != by_topic.end()) {
      report = it->second;
      try {
        ReportRequest request;
        request.request_id = request_id;
        judged = evaluate_report(*report, request, nuggets, DocumentCollection{}, nullptr, nullptr,
                                 &log, EngineOptions{1, /*replay_only=*/true});
      } catch (const IncompleteLogError&) {
        judged.reset();
      }
    }

    json sentences = json::array();
    std::map<std::string, std::vector<std::size_t>> answering;
    if (judged) {
      for (const auto& s : judged->sentence_outcomes) {
        json citations = json::array();
        bool supported = !s.citation_outcomes.empty();
        for (const auto& c : s.citation_outcomes) {
          supported = supported && c.attests;
          citations.push_back({{"doc_id", c.doc_id},
                               {"relevant", c.relevant},
                               {"attests", c.attests},
                               {"outcome", to_string(c.outcome)}});
        }
        json answers = json::array();
        std::set<std::string> nuggets_hit;
        for (const auto& [nugget_id, answer_id] : s.answered) {
          answers.push_back({{"nugget_id", nugget_id}, {"answer_id", answer_id}});
          nuggets_hit.insert(nugget_id);
        }
        for (const auto& n : s.unanswerable_claims) nuggets_hit.insert(n);
        for (const auto& n : nuggets_hit) answering[n].push_back(s.sentence_index);
        sentences.push_back({{"index", s.sentence_index},
                             {"text", report->sentences[s.sentence_index].text},
                             {"citations", std::move(citations)},
                             {"missing_citation_penalty", s.missing_citation_penalty},
                             {"supported", supported},
                             {"answers", std::move(answers)},
                             {"unanswerable_claims", s.unanswerable_claims}});
      }
    }

    const auto answered = judged ? aggregate_answered(*judged, nuggets) : std::set<std::string>{};
    json nugget_rows = json::array();
    for (const auto& n : nuggets) {
      nugget_rows.push_back({{"nugget_id", n.nugget_id},
                             {"question", n.question},
                             {"importance", to_string(n.importance)},
                             {"combinator", to_string(n.combinator)},
                             {"weight", weights.of(n.importance)},
                             {"answerable", n.answerable()},
                             {"answered", answered.contains(n.nugget_id)},
                             {"answered_by_sentences", answering[n.nugget_id]}});
    }
    topics.push_back({{"request_id", request_id},
                      {"metrics", topic_score},
                      {"judged", judged.has_value()},
                      {"sentences", std::move(sentences)},
                      {"nuggets", std::move(nugget_rows)}});
  }
  return json{{"run_id", run_id},
              {"macro", scores_document.at("macro")},
              {"topics", std::move(topics)}};
}

int cmd_export_viz(const Config& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require(config.out, "--out");
    require(config.log, "--log");
    if (config.scores.size() != 1) throw ConfigError("--scores takes exactly one scores file");
    auto in = load_inputs(config, /*need_docs=*/false);
    if (report_issues(in.issues, err)) return static_cast<int>(kValidation);
    if (!fs::exists(config.log)) throw IoError("judgment log not found: " + config.log.string());
    const JudgmentLog log = JudgmentLog::load(config.log);
    const json scores = json::parse(read_file(config.scores.front()));
    const json bundle = build_viz_bundle(in.reports, in.bank, log, scores);
    write_file_atomic(config.out, dump_fixed6(bundle) + "\n");
    out << "wrote bundle for run " << bundle.at("run_id").get<std::string>() << " with "
        << bundle.at("topics").size() << " topics\n";
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config c;
  CLI::App app{"Report-generation evaluation: judging, scoring, and meta-evaluation"};
  app.require_subcommand(1);

  std::string judge_mode = "oracle";
  std::string precision_mode = "cited";
  std::string qrels, docs, human_log, prompts_dir, pair_table, run_id;

  auto inputs = [&](CLI::App* sub) {
    sub->add_option("--runs", c.runs, "Run file (JSON Lines)");
    sub->add_option("--topics", c.topics, "Topics file (JSON Lines)");
    sub->add_option("--nuggets", c.nuggets, "Nuggets file (JSON Lines)");
  };

  auto* validate = app.add_subcommand("validate", "Check run, topic, nugget, and document files");
  inputs(validate);
  validate->add_option("--qrels", qrels, "Relevance judgments");
  validate->add_option("--docs", docs, "Document collection (JSON Lines)");

  auto* judge = app.add_subcommand("judge", "Judge every report sentence; writes a judgment log");
  inputs(judge);
  judge->add_option("--qrels", qrels, "Relevance judgments");
  judge->add_option("--docs", docs, "Document collection (JSON Lines)");
  judge->add_option("--judge", judge_mode, "Judge backend")
      ->check(CLI::IsMember({"oracle", "llm", "human-log"}));
  judge->add_option("--human-log", human_log, "Judgment log replayed by --judge human-log");
  judge->add_option("--endpoint", c.endpoint, "Chat-completions URL");
  judge->add_option("--model", c.model, "Model name sent to the endpoint");
  judge->add_option("--api-key-env", c.api_key_env, "Environment variable holding the API key");
  judge->add_option("--cache-dir", c.cache_dir, "Response cache directory");
  judge->add_option("--prompts-dir", prompts_dir, "Prompt template directory");
  judge->add_option("--concurrency", c.concurrency, "Sentences judged in parallel");
  judge->add_option("--max-attempts", c.max_attempts, "HTTP attempts per request");
  judge->add_option("--retry-base-ms", c.retry_base_ms, "Initial retry backoff");
  judge->add_option("--timeout", c.timeout_s, "HTTP timeout in seconds");
  judge->add_option("--max-tokens", c.max_tokens, "max_tokens for each completion");
  judge->add_option("--out", c.out, "Judgment log to write or resume");

  auto* score = app.add_subcommand("score", "Compute per-topic and macro metrics from a log");
  inputs(score);
  score->add_option("--log", c.log, "Judgment log");
  score->add_option("--precision-mode", precision_mode, "Sentence precision denominator")
      ->check(CLI::IsMember({"cited", "cited-or-required"}));
  score->add_option("--vital-weight", c.weights.vital, "Weight of vital nuggets");
  score->add_option("--okay-weight", c.weights.okay, "Weight of okay nuggets");
  score->add_option("--run-id", run_id, "Score only this run");
  score->add_flag("--allow-partial", c.allow_partial, "Score unjudged topics as missing");
  score->add_option("--out", c.out, "Scores file (a directory when scoring several runs)");

  auto* metaeval = app.add_subcommand("meta", "Agreement between human and automatic scores");
  metaeval->add_option("--human", c.human, "Human scores: scores files or one TSV matrix")
      ->expected(1, -1);
  metaeval->add_option("--auto", c.automatic, "Automatic scores: scores files or one TSV matrix")
      ->expected(1, -1);
  metaeval->add_option("--metric", c.metrics, "Topic-score field(s) to compare")->expected(1, -1);
  metaeval->add_option("--alpha", c.alpha, "Wilcoxon significance level");
  metaeval->add_option("--pair-table", pair_table, "Also write the pair table as TSV");
  metaeval->add_option("--out", c.out, "Meta-evaluation report (JSON)");

  auto* viz = app.add_subcommand("export-viz", "Write the viewer bundle for one run");
  inputs(viz);
  viz->add_option("--log", c.log, "Judgment log");
  viz->add_option("--scores", c.scores, "Scores file for the run");
  viz->add_option("--out", c.out, "Bundle file");

  std::vector<std::string> argv_storage{"argue"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (!qrels.empty()) c.qrels = qrels;
  if (!docs.empty()) c.docs = docs;
  if (!human_log.empty()) c.human_log = human_log;
  if (!prompts_dir.empty()) c.prompts_dir = prompts_dir;
  if (!pair_table.empty()) c.pair_table = pair_table;
  if (!run_id.empty()) c.run_id = run_id;
  c.judge = judge_mode == "llm"         ? JudgeMode::Llm
            : judge_mode == "human-log" ? JudgeMode::HumanLog
                                        : JudgeMode::Oracle;
  c.precision_mode = metrics::parse_precision_mode(precision_mode);

  if (validate->parsed()) return cmd_validate(c, out, err);
  if (judge->parsed()) return cmd_judge(c, out, err);
  if (score->parsed()) return cmd_score(c, out, err);
  if (metaeval->parsed()) return cmd_meta(c, out, err);
  if (viz->parsed()) return cmd_export_viz(c, out, err);
  return kUsage;
}

}  // namespace argue::cli
