#include "argue/meta_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "argue/errors.hpp"
#include "argue/io_util.hpp"

namespace argue::meta {

void ScoreMatrix::check() const {
  if (values.size() != runs.size()) throw std::invalid_argument("score matrix row count mismatch");
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values[r].size() != topics.size()) {
      throw std::invalid_argument("score matrix row " + runs[r] + " has wrong length");
    }
    for (double v : values[r]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("score matrix value outside [0,1] for run " + runs[r]);
      }
    }
  }
}

double ScoreMatrix::macro(std::size_t run) const {
  const auto& row = values.at(run);
  if (row.empty()) return 0.0;
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

const std::vector<double>& ScoreMatrix::row(const std::string& run_id) const {
  auto it = std::find(runs.begin(), runs.end(), run_id);
  if (it == runs.end()) throw std::out_of_range("no run " + run_id + " in score matrix");
  return values[static_cast<std::size_t>(it - runs.begin())];
}

ScoreMatrix read_matrix_tsv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  ScoreMatrix m;
  std::string line;
  std::size_t number = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, '\t')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (m.topics.empty()) {
      if (cells.size() < 2) throw IoError(path.string() + ": header needs at least one topic");
      m.topics.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() != m.topics.size() + 1) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected " +
                    std::to_string(m.topics.size() + 1) + " columns");
    }
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size()) {
        throw IoError(path.string() + ":" + std::to_string(number) + ": bad value " + cells[c]);
      }
      row.push_back(v);
    }
    m.runs.push_back(cells[0]);
    m.values.push_back(std::move(row));
  }
  try {
    m.check();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

std::string matrix_to_tsv(const ScoreMatrix& m) {
  std::ostringstream out;
  out << "run_id";
  for (const auto& t : m.topics) out << '\t' << t;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.runs.size(); ++r) {
    out << m.runs[r];
    for (double v : m.values[r]) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  return out.str();
}

ScoreMatrix matrix_from_scores(std::span<const json> documents, const std::string& metric) {
  ScoreMatrix m;
  std::set<std::string> seen_runs;
  for (const auto& doc : documents) {
    const auto run_id = doc.at("run_id").get<std::string>();
    if (!seen_runs.insert(run_id).second) {
      throw MisalignmentError("run " + run_id + " given more than once");
    }
    std::map<std::string, double> by_topic;
    for (const auto& t : doc.at("topics")) {
      by_topic[t.at("request_id").get<std::string>()] = t.at(metric).get<double>();
    }
    if (m.runs.empty()) {
      for (const auto& t : doc.at("topics")) m.topics.push_back(t.at("request_id").get<std::string>());
    } else {
      std::set<std::string> expected(m.topics.begin(), m.topics.end());
      std::set<std::string> got;
      for (const auto& [id, v] : by_topic) got.insert(id);
      if (got != expected) {
        throw MisalignmentError("run " + run_id + " covers a different topic set than run " +
                                m.runs.front());
      }
    }
    std::vector<double> row;
    for (const auto& t : m.topics) row.push_back(by_topic.at(t));
    m.runs.push_back(run_id);
    m.values.push_back(std::move(row));
  }
  m.check();
  return m;
}

std::vector<std::pair<std::string, double>> rank_runs(const ScoreMatrix& m) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 0; r < m.runs.size(); ++r) out.emplace_back(m.runs[r], m.macro(r));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Kendall tau-b (Knight's algorithm)

namespace {

long long tied_pairs(std::span<const double> sorted_values) {
  long long total = 0;
  std::size_t i = 0;
  while (i < sorted_values.size()) {
    std::size_t j = i + 1;
    while (j < sorted_values.size() && sorted_values[j] == sorted_values[i]) ++j;
    const auto t = static_cast<long long>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

// Stable merge sort of v, returning the number of strict inversions.
long long merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

TauResult kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall tau: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("kendall tau needs at least two runs");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  std::vector<double> sa(n), sb(n);
  for (std::size_t k = 0; k < n; ++k) {
    sa[k] = a[order[k]];
    sb[k] = b[order[k]];
  }
  const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long n1 = tied_pairs(sa);

  long long n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sa[j] == sa[i] && sb[j] == sb[i]) ++j;
    const auto t = static_cast<long long>(j - i);
    n3 += t * (t - 1) / 2;
    i = j;
  }

  std::vector<double> scratch(n);
  const long long swaps = merge_count(sb, scratch, 0, n);
  const long long n2 = tied_pairs(sb);

  TauResult r;
  r.concordant_minus_discordant = n0 - n1 - n2 + n3 - 2 * swaps;
  r.pairs_untied_a = n0 - n1;
  r.pairs_untied_b = n0 - n2;
  if (r.pairs_untied_a == 0 || r.pairs_untied_b == 0) {
    r.degenerate = true;
    return r;
  }
  r.tau = static_cast<double>(r.concordant_minus_discordant) /
          std::sqrt(static_cast<double>(r.pairs_untied_a) * static_cast<double>(r.pairs_untied_b));
  r.tau = std::clamp(r.tau, -1.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

std::string to_string(Direction d) {
  switch (d) {
    case Direction::ABetter: return "A_BETTER";
    case Direction::BBetter: return "B_BETTER";
    case Direction::NoSigDiff: return "NO_SIG_DIFF";
  }
  return "NO_SIG_DIFF";
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: x and y differ in length");

  struct Diff {
    double magnitude;
    bool positive;
  };
  std::vector<Diff> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (std::abs(d) <= kTieTolerance) continue;
    diffs.push_back({std::abs(d), d > 0});
  }
  std::sort(diffs.begin(), diffs.end(),
            [](const Diff& p, const Diff& q) { return p.magnitude < q.magnitude; });

  WilcoxonResult r;
  const std::size_t n = diffs.size();
  r.n_effective = n;
  if (n == 0) return r;

  // Doubled mean ranks keep tied ranks integral: 2 * mean(first..last) = first + last.
  std::vector<long long> rank2(n);
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && diffs[j].magnitude - diffs[j - 1].magnitude <= kTieTolerance) ++j;
    const auto doubled = static_cast<long long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank2[k] = doubled;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  long long plus2 = 0;
  long long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i].positive) plus2 += rank2[i];
  }
  const long long minus2 = total2 - plus2;
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(minus2) / 2.0;
  r.statistic = std::min(r.w_plus, r.w_minus);
  r.direction_hint = plus2 > minus2 ? 1 : (plus2 < minus2 ? -1 : 0);

  if (n <= kExactWilcoxonMaxN) {
    // Number of sign assignments for every achievable doubled W+.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      reach += rank2[i];
      for (long long s = reach; s >= rank2[i]; --s) {
        ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - rank2[i])];
      }
    }
    const long long tail_limit = std::min(plus2, minus2);
    double tail = 0.0;
    for (long long s = 0; s <= tail_limit; ++s) tail += ways[static_cast<std::size_t>(s)];
    r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    r.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    r.exact = false;
    if (var <= 0.0) {
      r.p_value = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
      r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
  }
  return r;
}

PairDecision pair_decision(std::span<const double> x, std::span<const double> y, double alpha,
                           std::string run_a, std::string run_b) {
  const auto w = wilcoxon_signed_rank(x, y);
  PairDecision d{std::move(run_a), std::move(run_b), Direction::NoSigDiff, w.p_value, w.statistic};
  if (w.p_value <= alpha && w.direction_hint != 0) {
    d.direction = w.direction_hint > 0 ? Direction::ABetter : Direction::BBetter;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Agreement

namespace {

std::string symmetric_difference(const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::vector<std::string> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                std::back_inserter(diff));
  std::string out;
  for (const auto& d : diff) out += (out.empty() ? "" : ", ") + d;
  return out;
}

// `m` reordered to the given run and topic order.
ScoreMatrix reorder(const ScoreMatrix& m, const std::vector<std::string>& runs,
                    const std::vector<std::string>& topics) {
  std::map<std::string, std::size_t> col;
  for (std::size_t t = 0; t < m.topics.size(); ++t) col[m.topics[t]] = t;
  ScoreMatrix out{runs, topics, {}};
  for (const auto& run : runs) {
    const auto& src = m.row(run);
    std::vector<double> row;
    row.reserve(topics.size());
    for (const auto& t : topics) row.push_back(src[col.at(t)]);
    out.values.push_back(std::move(row));
  }
  return out;
}

}  // namespace

MetaEvalReport agreement_accuracy(const ScoreMatrix& human, const ScoreMatrix& automatic,
                                  double alpha, std::string metric_name) {
  human.check();
  automatic.check();
  std::string problems;
  if (auto d = symmetric_difference(human.runs, automatic.runs); !d.empty()) {
    problems += "runs not in both sources: " + d;
  }
  if (auto d = symmetric_difference(human.topics, automatic.topics); !d.empty()) {
    problems += std::string(problems.empty() ? "" : "; ") + "topics not in both sources: " + d;
  }
  if (human.runs.size() != std::set<std::string>(human.runs.begin(), human.runs.end()).size() ||
      automatic.runs.size() !=
          std::set<std::string>(automatic.runs.begin(), automatic.runs.end()).size()) {
    problems += std::string(problems.empty() ? "" : "; ") + "duplicate run ids";
  }
  if (!problems.empty()) throw MisalignmentError(problems);

  std::vector<std::string> runs = human.runs;
  std::sort(runs.begin(), runs.end());
  std::vector<std::string> topics = human.topics;
  std::sort(topics.begin(), topics.end());
  const ScoreMatrix h = reorder(human, runs, topics);
  const ScoreMatrix a = reorder(automatic, runs, topics);

  MetaEvalReport report;
  report.metric_name = std::move(metric_name);
  report.alpha = alpha;
  report.ranking_human = rank_runs(h);
  report.ranking_auto = rank_runs(a);

  std::vector<double> macro_h, macro_a;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    macro_h.push_back(h.macro(r));
    macro_a.push_back(a.macro(r));
  }
  report.tau = kendall_tau_b(macro_h, macro_a);

  std::size_t agreeing = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      PairRow row;
      row.human = pair_decision(h.values[i], h.values[j], alpha, runs[i], runs[j]);
      row.automatic = pair_decision(a.values[i], a.values[j], alpha, runs[i], runs[j]);
      row.agree = row.human.direction == row.automatic.direction;
      if (row.agree) ++agreeing;
      report.pair_table.push_back(std::move(row));
    }
  }
  report.n_pairs = report.pair_table.size();
  report.agreement_accuracy =
      report.n_pairs == 0 ? 0.0
                          : static_cast<double>(agreeing) / static_cast<double>(report.n_pairs);
  return report;
}

json to_json(const MetaEvalReport& r) {
  auto decision = [](const PairDecision& d) {
    return json{{"direction", to_string(d.direction)},
                {"p_value", d.p_value},
                {"statistic", d.statistic}};
  };
  auto ranking = [](const std::vector<std::pair<std::string, double>>& rk) {
    json out = json::array();
    for (const auto& [run, score] : rk) out.push_back({{"run_id", run}, {"macro", score}});
    return out;
  };
  json pairs = json::array();
  for (const auto& row : r.pair_table) {
    pairs.push_back({{"run_a", row.human.run_a},
                     {"run_b", row.human.run_b},
                     {"human", decision(row.human)},
                     {"auto", decision(row.automatic)},
                     {"agree", row.agree}});
  }
  return json{{"metric", r.metric_name},
              {"tau", r.tau.tau},
              {"tau_degenerate", r.tau.degenerate},
              {"agreement_accuracy", r.agreement_accuracy},
              {"n_pairs", r.n_pairs},
              {"ranking_human", ranking(r.ranking_human)},
              {"ranking_auto", ranking(r.ranking_auto)},
              {"pair_table", std::move(pairs)},
              {"metadata",
               {{"alpha", r.alpha},
                {"tau_variant", "tau-b"},
                {"tau_input", "macro scores"},
                {"wilcoxon_zero_differences", "discarded"},
                {"wilcoxon_ties", "mean ranks"},
                {"wilcoxon_exact_max_n", kExactWilcoxonMaxN},
                {"wilcoxon_large_n", "normal approximation with tie and continuity correction"},
                {"significance_rule", "p <= alpha"},
                {"agreement_rule", "identical direction (A_BETTER, B_BETTER, NO_SIG_DIFF)"}}}};
}

std::string pair_table_tsv(const MetaEvalReport& r) {
  std::ostringstream out;
  out << "run_a\trun_b\thuman_direction\thuman_p\tauto_direction\tauto_p\tagree\n";
  char hp[32], ap[32];
  for (const auto& row : r.pair_table) {
    std::snprintf(hp, sizeof hp, "%.6g", row.human.p_value);
    std::snprintf(ap, sizeof ap, "%.6g", row.automatic.p_value);
    out << row.human.run_a << '\t' << row.human.run_b << '\t' << to_string(row.human.direction)
        << '\t' << hp << '\t' << to_string(row.automatic.direction) << '\t' << ap << '\t'
        << (row.agree ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace argue::meta
