// Copyright 2026 The Acute Eval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acute/stats.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <thread>
#include <unordered_map>
#include <tuple>
#include <utility>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "acute/errors.h"
#include "acute/random.h"

namespace acute {
namespace {

using nlohmann::json;

void CheckCounts(int64_t k, int64_t n) {
  if (n < 1 || k < 0 || k > n) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("binomial test needs 0 <= k <= n and n >= 1 (k={}, n={})", k, n));
  }
}

// log(exp(a) + exp(b)) without overflow.
double LogAddExp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log P(X <= i) for X ~ Binomial(n, 1/2), i = 0..last.
std::vector<double> LowerTailLogs(int64_t n, int64_t last) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(last + 1));
  double log_pmf = -static_cast<double>(n) * std::numbers::ln2;
  double log_tail = -INFINITY;
  for (int64_t i = 0; i <= last; ++i) {
    if (i > 0) {
      log_pmf += std::log(static_cast<double>(n - i + 1) / static_cast<double>(i));
    }
    log_tail = LogAddExp(log_tail, log_pmf);
    out.push_back(log_tail);
  }
  return out;
}

double PValueFromTail(int64_t m, int64_t n, double log_tail) {
  if (2 * m == n) return 1.0;
  return std::min(1.0, 2.0 * std::exp(log_tail));
}

// Normalized pmf of Binomial(n, p), computed in log space.
std::vector<double> BinomialPmf(int64_t n, double p) {
  std::vector<double> pmf(static_cast<size_t>(n + 1), 0.0);
  if (p <= 0.0) {
    pmf.front() = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf.back() = 1.0;
    return pmf;
  }
  std::vector<double> logs(pmf.size());
  const double log_ratio = std::log(p) - std::log1p(-p);
  logs[0] = static_cast<double>(n) * std::log1p(-p);
  double log_total = logs[0];
  for (int64_t i = 1; i <= n; ++i) {
    logs[i] = logs[i - 1] +
              std::log(static_cast<double>(n - i + 1) / static_cast<double>(i)) +
              log_ratio;
    log_total = LogAddExp(log_total, logs[i]);
  }
  for (size_t i = 0; i < pmf.size(); ++i) pmf[i] = std::exp(logs[i] - log_total);
  return pmf;
}

std::unordered_map<std::string, const Matchup*> IndexPlan(const Plan& plan) {
  std::unordered_map<std::string, const Matchup*> index;
  for (const auto* list : {&plan.matchups, &plan.qc_pool}) {
    for (const Matchup& m : *list) index.emplace(m.matchup_id, &m);
  }
  return index;
}

const Matchup& Lookup(const std::unordered_map<std::string, const Matchup*>& index,
                      const Annotation& a) {
  auto it = index.find(a.matchup_id);
  if (it == index.end()) {
    Fail(ErrorCode::kNotFound,
         fmt::format("annotation {} references unknown matchup {}",
                     a.annotation_id, a.matchup_id));
  }
  return *it->second;
}

std::pair<std::string, std::string> ConvPair(const Matchup& m) {
  auto [lo, hi] = std::minmax(m.left_conv, m.right_conv);
  return {lo, hi};
}

std::string FormatRate(double x) { return fmt::format("{:.4f}", x); }
std::string FormatP(double x) { return fmt::format("{:.6g}", x); }

}  // namespace

double BinomTwoSided(int64_t k, int64_t n) {
  CheckCounts(k, n);
  const int64_t m = std::min(k, n - k);
  if (2 * m == n) return 1.0;
  return PValueFromTail(m, n, LowerTailLogs(n, m).back());
}

std::vector<double> BinomTwoSidedTable(int64_t n) {
  CheckCounts(0, n);
  const auto tails = LowerTailLogs(n, n / 2);
  std::vector<double> out(static_cast<size_t>(n + 1));
  for (int64_t k = 0; k <= n; ++k) {
    const int64_t m = std::min(k, n - k);
    out[static_cast<size_t>(k)] = PValueFromTail(m, n, tails[static_cast<size_t>(m)]);
  }
  return out;
}

double BinomialCdf(int64_t k, int64_t n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0) {
    Fail(ErrorCode::kInvalidArgument, "invalid binomial parameters");
  }
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  const auto pmf = BinomialPmf(n, p);
  double cdf = 0.0;
  for (int64_t i = 0; i <= k; ++i) cdf += pmf[static_cast<size_t>(i)];
  return std::min(1.0, cdf);
}

CountInterval CentralBinomialInterval(int64_t n, double p, double level) {
  if (n < 0 || p < 0.0 || p > 1.0 || level <= 0.0 || level >= 1.0) {
    Fail(ErrorCode::kInvalidArgument, "invalid interval parameters");
  }
  const double tail = (1.0 - level) / 2.0;
  const auto pmf = BinomialPmf(n, p);
  CountInterval out{0, n};
  double cdf = 0.0;
  bool have_lo = false;
  for (int64_t x = 0; x <= n; ++x) {
    cdf += pmf[static_cast<size_t>(x)];
    if (!have_lo && cdf > tail) {
      out.lo = x;
      have_lo = true;
    }
    if (cdf >= 1.0 - tail) {
      out.hi = x;
      break;
    }
  }
  return out;
}

std::optional<size_t> WinMatrix::IndexOf(const AgentId& agent) const {
  for (size_t i = 0; i < agents.size(); ++i) {
    if (agents[i] == agent) return i;
  }
  return std::nullopt;
}

const std::optional<WinCell>& WinMatrix::CellFor(const AgentId& loser,
                                                 const AgentId& winner) const {
  static const std::optional<WinCell> kAbsent;
  const auto row = IndexOf(loser);
  const auto col = IndexOf(winner);
  if (!row || !col) return kAbsent;
  return cell(*row, *col);
}

int WinMatrix::total_annotations() const {
  int total = 0;
  for (size_t i = 0; i < agents.size(); ++i) {
    for (size_t j = i + 1; j < agents.size(); ++j) {
      if (const auto& c = cell(i, j)) total += c->total;
    }
  }
  return total;
}

WinMatrix ComputeWinMatrix(std::span<const Annotation> annotations,
                           const Plan& plan, double alpha) {
  WinMatrix matrix;
  matrix.alpha = alpha;
  auto note = [&matrix](const AgentId& a) {
    if (!matrix.IndexOf(a)) matrix.agents.push_back(a);
  };
  for (const ComparisonSpec& spec : plan.comparisons) {
    if (spec.self_check) continue;
    note(spec.agent_a);
    note(spec.agent_b);
  }
  for (const Matchup& m : plan.matchups) {
    if (m.left_agent == m.right_agent) continue;
    note(m.left_agent);
    note(m.right_agent);
  }

  const size_t n = matrix.agents.size();
  std::vector<int> wins(n * n, 0);  // wins[winner * n + loser]
  const auto index = IndexPlan(plan);
  for (const Annotation& a : annotations) {
    const Matchup& m = Lookup(index, a);
    if (m.is_qc) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("QC annotation {} passed to the win matrix", a.annotation_id));
    }
    if (m.left_agent == m.right_agent) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("annotation {} is on a self-check matchup", a.annotation_id));
    }
    const size_t winner = *matrix.IndexOf(m.AgentOn(a.chosen_side));
    const size_t loser = *matrix.IndexOf(m.AgentOn(OtherSide(a.chosen_side)));
    ++wins[winner * n + loser];
  }

  matrix.cells.assign(n * n, std::nullopt);
  for (size_t row = 0; row < n; ++row) {
    for (size_t col = 0; col < n; ++col) {
      if (row == col) continue;
      const int col_wins = wins[col * n + row];
      const int total = col_wins + wins[row * n + col];
      if (total == 0) continue;
      WinCell c;
      c.wins = col_wins;
      c.total = total;
      c.win_rate = static_cast<double>(col_wins) / total;
      c.p_value = BinomTwoSided(col_wins, total);
      c.significant = c.p_value < alpha;
      matrix.cells[row * n + col] = c;
    }
  }
  return matrix;
}

void WriteWinMatrixTsv(std::ostream& out, const WinMatrix& matrix) {
  out << "loses\\wins";
  for (const AgentId& a : matrix.agents) out << '\t' << a.name;
  out << '\n';
  for (size_t row = 0; row < matrix.agents.size(); ++row) {
    out << matrix.agents[row].name;
    for (size_t col = 0; col < matrix.agents.size(); ++col) {
      out << '\t';
      if (const auto& c = matrix.cell(row, col)) {
        out << fmt::format("{:.0f}{}", c->win_rate * 100.0, c->significant ? "*" : "");
      }
    }
    out << '\n';
  }
}

void WriteWinCellsTsv(std::ostream& out, const WinMatrix& matrix) {
  out << "loser\twinner\twins\ttotal\twin_rate\tp_value\tsignificant\n";
  for (size_t row = 0; row < matrix.agents.size(); ++row) {
    for (size_t col = 0; col < matrix.agents.size(); ++col) {
      const auto& c = matrix.cell(row, col);
      if (!c) continue;
      out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", matrix.agents[row].Key(),
                         matrix.agents[col].Key(), c->wins, c->total,
                         FormatRate(c->win_rate), FormatP(c->p_value), c->significant);
    }
  }
}

json ToJson(const WinMatrix& matrix) {
  json agents = json::array();
  for (const AgentId& a : matrix.agents) agents.push_back(a);
  json cells = json::array();
  for (size_t row = 0; row < matrix.agents.size(); ++row) {
    for (size_t col = 0; col < matrix.agents.size(); ++col) {
      const auto& c = matrix.cell(row, col);
      if (!c) continue;
      cells.push_back({{"loser", matrix.agents[row].Key()},
                       {"winner", matrix.agents[col].Key()},
                       {"wins", c->wins},
                       {"total", c->total},
                       {"win_rate", c->win_rate},
                       {"p_value", c->p_value},
                       {"significant", c->significant}});
    }
  }
  return {{"alpha", matrix.alpha}, {"agents", agents}, {"cells", cells}};
}

AgreementResult Agreement(std::span<const Annotation> annotations,
                          const Plan& plan, std::string_view question_id,
                          double alpha) {
  if (annotations.empty()) {
    Fail(ErrorCode::kInvalidArgument, "agreement needs at least one annotation");
  }
  const auto index = IndexPlan(plan);
  AgreementResult r;
  r.question_id = std::string(question_id);
  int votes_a = 0;
  for (const Annotation& a : annotations) {
    const Matchup& m = Lookup(index, a);
    if (m.question_id != question_id) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("annotation {} is for question {}, not {}", a.annotation_id,
                       m.question_id, question_id));
    }
    auto [lo, hi] = ConvPair(m);
    if (r.n_annotations == 0) {
      r.conv_a = lo;
      r.conv_b = hi;
    } else if (lo != r.conv_a || hi != r.conv_b) {
      Fail(ErrorCode::kInvalidArgument,
           "agreement annotations span more than one conversation pair");
    }
    ++r.n_annotations;
    if (m.ConvOn(a.chosen_side) == r.conv_a) ++votes_a;
  }
  r.majority_count = std::max(votes_a, r.n_annotations - votes_a);
  r.agreement_rate = static_cast<double>(r.majority_count) / r.n_annotations;
  r.p_value = BinomTwoSided(r.majority_count, r.n_annotations);
  r.significant = r.p_value < alpha;
  return r;
}

std::vector<AgreementResult> AgreementTable(std::span<const Annotation> annotations,
                                            const Plan& plan, int min_annotations,
                                            double alpha) {
  const auto index = IndexPlan(plan);
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<Annotation>>
      groups;
  for (const Annotation& a : annotations) {
    const Matchup& m = Lookup(index, a);
    auto [lo, hi] = ConvPair(m);
    groups[{m.question_id, lo, hi}].push_back(a);
  }
  std::vector<AgreementResult> out;
  for (const auto& [key, group] : groups) {
    if (static_cast<int>(group.size()) < std::max(1, min_annotations)) continue;
    out.push_back(Agreement(group, plan, std::get<0>(key), alpha));
  }
  return out;
}

void WriteAgreementTsv(std::ostream& out, std::span<const AgreementResult> rows) {
  out << "question\tconv_a\tconv_b\tn\tmajority\tagreement\tp_value\tsignificant\n";
  for (const AgreementResult& r : rows) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.question_id, r.conv_a,
                       r.conv_b, r.n_annotations, r.majority_count,
                       FormatRate(r.agreement_rate), FormatP(r.p_value), r.significant);
  }
}

AaResult AaCheck(std::span<const Annotation> annotations, const Plan& plan,
                 double alpha) {
  if (annotations.empty()) {
    Fail(ErrorCode::kInvalidArgument, "A/A check needs at least one annotation");
  }
  const auto index = IndexPlan(plan);
  AaResult r;
  for (const Annotation& a : annotations) {
    const Matchup& m = Lookup(index, a);
    if (m.left_agent != m.right_agent) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("matchup {} compares {} with {}; not an A/A comparison",
                       m.matchup_id, m.left_agent.Key(), m.right_agent.Key()));
    }
    ++r.n;
    if (a.chosen_side == Side::kLeft) ++r.left_wins;
  }
  r.left_rate = static_cast<double>(r.left_wins) / r.n;
  r.p_value = BinomTwoSided(r.left_wins, r.n);
  r.position_bias_warning = r.p_value < alpha;
  return r;
}

std::string_view ToString(ResampleUnit unit) {
  return unit == ResampleUnit::kAnnotation ? "ANNOTATION" : "CONVERSATION";
}

ResampleUnit ParseResampleUnit(std::string_view s) {
  if (s == "ANNOTATION") return ResampleUnit::kAnnotation;
  if (s == "CONVERSATION") return ResampleUnit::kConversation;
  Fail(ErrorCode::kInvalidArgument, fmt::format("unknown resample unit \"{}\"", s));
}

std::vector<PairOutcome> PairOutcomes(std::span<const Annotation> annotations,
                                      const Plan& plan, const AgentId& first,
                                      const AgentId& second) {
  const auto index = IndexPlan(plan);
  std::vector<PairOutcome> out;
  for (const Annotation& a : annotations) {
    const Matchup& m = Lookup(index, a);
    if (m.is_qc) continue;
    const bool forward = m.left_agent == first && m.right_agent == second;
    const bool backward = m.left_agent == second && m.right_agent == first;
    if (!forward && !backward) continue;
    auto [lo, hi] = ConvPair(m);
    out.push_back({lo + "|" + hi, m.AgentOn(a.chosen_side) == first});
  }
  return out;
}

namespace {

constexpr int kTrialsPerBlock = 1024;

struct UnitTally {
  int wins = 0;
  int n = 0;
};

// Counts significant resamples among the `count` trials of one block.
int RunBlock(uint64_t seed, int block, int count, const BootstrapOptions& options,
             std::span<const UnitTally> units, std::span<const double> table) {
  Rng rng(DeriveSeed(seed, static_cast<uint64_t>(block)));
  int hits = 0;
  const uint64_t size = units.size();
  for (int t = 0; t < count; ++t) {
    int64_t wins = 0;
    int64_t n = 0;
    for (int draw = 0; draw < options.k; ++draw) {
      const UnitTally& u = units[rng.Below(size)];
      wins += u.wins;
      n += u.n;
    }
    const double p = options.unit == ResampleUnit::kAnnotation
                         ? table[static_cast<size_t>(wins)]
                         : BinomTwoSided(wins, n);
    if (p < options.alpha) ++hits;
  }
  return hits;
}

}  // namespace

double BootstrapPower(std::span<const PairOutcome> outcomes,
                      const BootstrapOptions& options) {
  if (outcomes.empty()) {
    Fail(ErrorCode::kInvalidArgument, "bootstrap needs a nonempty annotation set");
  }
  if (options.k < 1 || options.trials < 1) {
    Fail(ErrorCode::kInvalidArgument, "bootstrap needs k >= 1 and trials >= 1");
  }

  std::vector<UnitTally> units;
  if (options.unit == ResampleUnit::kAnnotation) {
    for (const PairOutcome& o : outcomes) units.push_back({o.first_wins ? 1 : 0, 1});
  } else {
    std::map<std::string, UnitTally> grouped;
    for (const PairOutcome& o : outcomes) {
      UnitTally& u = grouped[o.unit];
      u.wins += o.first_wins ? 1 : 0;
      ++u.n;
    }
    for (const auto& [unit, tally] : grouped) units.push_back(tally);
  }
  std::vector<double> table;
  if (options.unit == ResampleUnit::kAnnotation) table = BinomTwoSidedTable(options.k);

  const int blocks = (options.trials + kTrialsPerBlock - 1) / kTrialsPerBlock;
  auto block_size = [&](int b) {
    return std::min(kTrialsPerBlock, options.trials - b * kTrialsPerBlock);
  };
  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, blocks);

  std::vector<int> hits(static_cast<size_t>(blocks), 0);
  if (threads <= 1) {
    for (int b = 0; b < blocks; ++b) {
      hits[b] = RunBlock(options.seed, b, block_size(b), options, units, table);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int b = next++; b < blocks; b = next++) {
          hits[b] = RunBlock(options.seed, b, block_size(b), options, units, table);
        }
      });
    }
  }
  int total = 0;
  for (int h : hits) total += h;
  return static_cast<double>(total) / options.trials;
}

namespace {

void CheckIncreasing(std::span<const int> sample_sizes, int minimum) {
  for (size_t i = 0; i < sample_sizes.size(); ++i) {
    if (sample_sizes[i] < minimum ||
        (i > 0 && sample_sizes[i] <= sample_sizes[i - 1])) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("sample sizes must be strictly increasing and >= {}", minimum));
    }
  }
}

}  // namespace

PowerCurve BootstrapPowerCurve(std::span<const PairOutcome> outcomes,
                               std::span<const int> sample_sizes,
                               BootstrapOptions options) {
  CheckIncreasing(sample_sizes, 1);
  PowerCurve curve;
  curve.alpha = options.alpha;
  curve.bootstrap_trials = options.trials;
  for (int k : sample_sizes) {
    options.k = k;
    curve.sample_sizes.push_back(k);
    curve.power.push_back(BootstrapPower(outcomes, options));
  }
  return curve;
}

PowerCurve CostCurve(PowerCurve curve, double seconds_per_annotation) {
  if (!(seconds_per_annotation > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "seconds_per_annotation must be positive");
  }
  CheckIncreasing(curve.sample_sizes, 0);
  curve.person_hours.clear();
  for (int k : curve.sample_sizes) {
    curve.person_hours.push_back(k * seconds_per_annotation / 3600.0);
  }
  return curve;
}

PowerCurve LikertPowerCurve(const LikertProfile& profile,
                            std::span<const int> sample_sizes, double alpha) {
  if (!(profile.score_variance > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "Likert profile needs positive variance");
  }
  CheckIncreasing(sample_sizes, 0);
  const boost::math::normal standard;
  const double z_crit = boost::math::quantile(standard, 1.0 - alpha / 2.0);
  PowerCurve curve;
  curve.alpha = alpha;
  for (int k : sample_sizes) {
    const double per_model = k / 2.0;
    double power = 0.0;
    if (per_model >= 1.0) {
      const double se = std::sqrt(2.0 * profile.score_variance / per_model);
      const double z = std::abs(profile.mean_difference) / se;
      power = boost::math::cdf(standard, z - z_crit) +
              boost::math::cdf(standard, -z - z_crit);
    }
    curve.sample_sizes.push_back(k);
    curve.power.push_back(power);
  }
  return CostCurve(std::move(curve), profile.seconds_per_rating);
}

void WritePowerCurveTsv(std::ostream& out, const PowerCurve& curve,
                        std::string_view label) {
  for (size_t i = 0; i < curve.sample_sizes.size(); ++i) {
    out << fmt::format("{}\t{}\t{:.4f}\t", label, curve.sample_sizes[i], curve.power[i]);
    if (i < curve.person_hours.size()) out << fmt::format("{:.4f}", curve.person_hours[i]);
    out << '\n';
  }
}

}  // namespace acute
