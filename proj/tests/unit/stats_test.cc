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

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <doctest.h>
#include <fmt/format.h>

#include "acute/errors.h"
#include "acute/random.h"
#include "acute/stats.h"
#include "binom_oracle.h"

namespace acute {
namespace {

const AgentId kA = AgentId::Model("retriever");
const AgentId kB = AgentId::Model("generator");
const AgentId kC = AgentId::Model("ranker");

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

Matchup Pair(std::string id, const AgentId& left, const AgentId& right,
             std::string question = "engagingness") {
  Matchup m;
  m.matchup_id = std::move(id);
  m.left_conv = m.matchup_id + "-l";
  m.right_conv = m.matchup_id + "-r";
  m.left_agent = left;
  m.right_agent = right;
  m.question_id = std::move(question);
  m.comparison = 0;
  return m;
}

Annotation Vote(const Matchup& m, Side side, int i) {
  Annotation a;
  a.annotation_id = fmt::format("a{}", i);
  a.matchup_id = m.matchup_id;
  a.worker_id = fmt::format("w{}", i);
  a.chosen_side = side;
  a.chosen_agent = m.AgentOn(side);
  return a;
}

// `left` votes for the left side, `right` for the right.
std::vector<Annotation> Votes(const Matchup& m, int left, int right) {
  std::vector<Annotation> out;
  for (int i = 0; i < left + right; ++i) {
    out.push_back(Vote(m, i < left ? Side::kLeft : Side::kRight, i));
  }
  return out;
}

Plan PlanOf(std::vector<Matchup> matchups) {
  Plan p;
  p.matchups = std::move(matchups);
  return p;
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

TEST_CASE("binomial p-values match the exact rational oracle for n <= 30") {
  double worst = 0.0;
  for (int n = 1; n <= 30; ++n) {
    const auto table = BinomTwoSidedTable(n);
    for (int k = 0; k <= n; ++k) {
      const double exact = testing::ExactTwoSided(k, n).convert_to<double>();
      worst = std::max(worst, std::abs(BinomTwoSided(k, n) - exact));
      worst = std::max(worst, std::abs(table[k] - exact));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("binomial examples") {
  CHECK(BinomTwoSided(2, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(BinomTwoSided(50, 100) == 1.0);
  CHECK(BinomTwoSided(1, 1) == 1.0);
  CHECK(BinomTwoSided(60, 100) >= 0.05);
  CHECK(BinomTwoSided(61, 100) < 0.05);
  CHECK(BinomTwoSided(60, 100) == doctest::Approx(0.056887).epsilon(1e-4));
  CHECK(BinomTwoSided(61, 100) == doctest::Approx(0.035200).epsilon(1e-4));
  CHECK(CodeOf([] { BinomTwoSided(3, 2); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { BinomTwoSided(0, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { BinomTwoSided(-1, 4); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("binomial p-values are symmetric and fall away from the centre") {
  for (int n = 1; n <= 200; ++n) {
    const auto table = BinomTwoSidedTable(n);
    for (int k = 0; k <= n; ++k) {
      CHECK_MESSAGE(table[k] == table[n - k], n, " ", k);
      CHECK(table[k] == BinomTwoSided(k, n));
      CHECK(table[k] > 0.0);
      CHECK(table[k] <= 1.0);
    }
    for (int k = n / 2; k < n; ++k) CHECK(table[k + 1] <= table[k]);
  }
}

TEST_CASE("binomial stays finite for large n") {
  const auto table = BinomTwoSidedTable(20000);
  CHECK(table[10000] == 1.0);
  CHECK(table[0] == 0.0);
  CHECK(table[10200] > 0.0);
  CHECK(table[10200] < 0.01);
  CHECK(table[10100] == doctest::Approx(BinomTwoSided(10100, 20000)));
  CHECK(std::isfinite(BinomTwoSided(5000, 10000)));
}

TEST_CASE("binomial cdf and central interval") {
  CHECK(BinomialCdf(2, 2, 0.5) == doctest::Approx(1.0));
  CHECK(BinomialCdf(0, 3, 0.5) == doctest::Approx(0.125));
  CHECK(BinomialCdf(1, 4, 0.25) == doctest::Approx(0.31640625 + 0.421875));
  const CountInterval ci = CentralBinomialInterval(100, 0.6, 0.95);
  CHECK(ci.Contains(60));
  CHECK(BinomialCdf(ci.lo - 1, 100, 0.6) <= 0.025);
  CHECK(BinomialCdf(ci.lo, 100, 0.6) > 0.025);
  CHECK(1.0 - BinomialCdf(ci.hi, 100, 0.6) <= 0.025);
  CHECK(1.0 - BinomialCdf(ci.hi - 1, 100, 0.6) > 0.025);
}

TEST_CASE("win matrix: 67 to 33") {
  const Matchup m = Pair("m1", kA, kB);
  const Plan plan = PlanOf({m});
  const WinMatrix w = ComputeWinMatrix(Votes(m, 67, 33), plan);
  const auto& cell = w.CellFor(kB, kA);
  REQUIRE(cell.has_value());
  CHECK(cell->wins == 67);
  CHECK(cell->total == 100);
  CHECK(cell->win_rate == doctest::Approx(0.67));
  CHECK(cell->p_value == doctest::Approx(testing::ExactTwoSided(67, 100).convert_to<double>()));
  CHECK(cell->significant);
  const auto& mirror = w.CellFor(kA, kB);
  REQUIRE(mirror.has_value());
  CHECK(mirror->wins == 33);
  CHECK(mirror->p_value == cell->p_value);
  CHECK(w.total_annotations() == 100);

  std::ostringstream tsv;
  WriteWinMatrixTsv(tsv, w);
  CHECK(tsv.str() == "loses\\wins\tretriever\tgenerator\n"
                     "retriever\t\t33*\n"
                     "generator\t67*\t\n");
}

TEST_CASE("win matrix: even split and empty set") {
  const Matchup m = Pair("m1", kA, kB);
  const Plan plan = PlanOf({m});
  const WinMatrix even = ComputeWinMatrix(Votes(m, 5, 5), plan);
  CHECK(even.CellFor(kB, kA)->win_rate == 0.5);
  CHECK(even.CellFor(kB, kA)->p_value == 1.0);
  CHECK_FALSE(even.CellFor(kB, kA)->significant);

  const WinMatrix empty = ComputeWinMatrix({}, plan);
  CHECK(empty.agents.size() == 2);
  for (const auto& c : empty.cells) CHECK_FALSE(c.has_value());
  CHECK(empty.total_annotations() == 0);
  CHECK_FALSE(empty.CellFor(kA, kC).has_value());
}

TEST_CASE("win matrix rejects unknown, QC and self-check annotations") {
  Matchup qc = Pair("q", kA, kB);
  qc.is_qc = true;
  qc.gold_side = Side::kLeft;
  const Matchup aa = Pair("s", kA, kA);
  Plan plan = PlanOf({aa});
  plan.qc_pool = {qc};
  CHECK(CodeOf([&] { ComputeWinMatrix(Votes(qc, 1, 0), plan); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { ComputeWinMatrix(Votes(aa, 1, 0), plan); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { ComputeWinMatrix(Votes(Pair("x", kA, kB), 1, 0), plan); }) ==
        ErrorCode::kNotFound);
}

TEST_CASE("property: win matrix totals equal the annotation count") {
  const std::vector<AgentId> agents = {kA, kB, kC};
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<Matchup> matchups;
    for (int i = 0; i < 10; ++i) {
      const size_t a = rng.Below(3);
      const size_t b = (a + 1 + rng.Below(2)) % 3;
      matchups.push_back(Pair(fmt::format("m{}", i), agents[a], agents[b]));
    }
    const Plan plan = PlanOf(matchups);
    std::vector<Annotation> votes;
    const int n = static_cast<int>(rng.Below(200));
    for (int i = 0; i < n; ++i) {
      votes.push_back(Vote(matchups[rng.Below(matchups.size())],
                           rng.Bernoulli(0.5) ? Side::kLeft : Side::kRight, i));
    }
    const WinMatrix w = ComputeWinMatrix(votes, plan);
    CHECK(w.total_annotations() == n);
    for (size_t r = 0; r < w.agents.size(); ++r) {
      for (size_t c = 0; c < w.agents.size(); ++c) {
        if (!w.cell(r, c)) continue;
        CHECK(w.cell(r, c)->wins + w.cell(c, r)->wins == w.cell(r, c)->total);
        CHECK(w.cell(r, c)->p_value == w.cell(c, r)->p_value);
      }
    }
  }
}

TEST_CASE("agreement examples") {
  const Matchup m = Pair("m", kA, kB);
  const Plan plan = PlanOf({m});
  const AgreementResult strong = Agreement(Votes(m, 4, 16), plan, "engagingness");
  CHECK(strong.n_annotations == 20);
  CHECK(strong.majority_count == 16);
  CHECK(strong.agreement_rate == doctest::Approx(0.8));
  CHECK(strong.significant);
  const AgreementResult tie = Agreement(Votes(m, 10, 10), plan, "engagingness");
  CHECK(tie.agreement_rate == 0.5);
  CHECK(tie.p_value == 1.0);
  CHECK(CodeOf([&] { Agreement({}, plan, "engagingness"); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { Agreement(Votes(m, 1, 1), plan, "humanness"); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("agreement counts conversations, not screen sides") {
  // The same pair shown in both placements.
  const Matchup fwd = Pair("f", kA, kB);
  Matchup rev = Pair("r", kB, kA);
  rev.left_conv = fwd.right_conv;
  rev.right_conv = fwd.left_conv;
  const Plan plan = PlanOf({fwd, rev});
  std::vector<Annotation> votes = Votes(fwd, 6, 0);
  for (Annotation& a : Votes(rev, 0, 6)) votes.push_back(a);
  const AgreementResult r = Agreement(votes, plan, "engagingness");
  CHECK(r.majority_count == 12);
  CHECK(r.conv_a == "f-l");
}

TEST_CASE("agreement table reproduces the best engagingness wording") {
  const Matchup m = Pair("m", kA, kB);
  const Matchup other = Pair("o", kA, kC);
  const Plan plan = PlanOf({m, other});
  std::vector<Annotation> votes = Votes(m, 21, 3);
  for (Annotation& a : Votes(other, 1, 1)) votes.push_back(a);
  const auto rows = AgreementTable(votes, plan, 3);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].agreement_rate == 0.875);
  CHECK(rows[0].significant);
  std::ostringstream tsv;
  WriteAgreementTsv(tsv, rows);
  CHECK(tsv.str().find("engagingness\tm-l\tm-r\t24\t21\t0.8750\t") != std::string::npos);
  CHECK(AgreementTable(votes, plan, 1).size() == 2);
}

TEST_CASE("A/A checks") {
  const Matchup m = Pair("aa", kA, kA);
  const Plan plan = PlanOf({m, Pair("ab", kA, kB)});
  const AaResult even = AaCheck(Votes(m, 50, 50), plan);
  CHECK(even.left_rate == 0.5);
  CHECK(even.p_value == 1.0);
  CHECK_FALSE(even.position_bias_warning);
  const AaResult biased = AaCheck(Votes(m, 70, 30), plan);
  CHECK(biased.left_wins == 70);
  CHECK(biased.p_value < 0.05);
  CHECK(biased.position_bias_warning);
  CHECK(CodeOf([&] { AaCheck({}, plan); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { AaCheck(Votes(plan.matchups[1], 1, 0), plan); }) ==
        ErrorCode::kInvalidArgument);
}

std::vector<PairOutcome> Outcomes(int first, int second) {
  std::vector<PairOutcome> out;
  for (int i = 0; i < first + second; ++i) {
    out.push_back({fmt::format("u{}", i / 2), i < first});
  }
  return out;
}

TEST_CASE("pair outcomes follow the chosen agent in both placements") {
  const Matchup fwd = Pair("f", kA, kB);
  const Matchup rev = Pair("r", kB, kA);
  const Matchup other = Pair("o", kA, kC);
  const Plan plan = PlanOf({fwd, rev, other});
  std::vector<Annotation> votes = Votes(fwd, 3, 1);
  for (Annotation& a : Votes(rev, 2, 0)) votes.push_back(a);
  for (Annotation& a : Votes(other, 5, 0)) votes.push_back(a);
  const auto out = PairOutcomes(votes, plan, kA, kB);
  CHECK(out.size() == 6);
  CHECK(std::count_if(out.begin(), out.end(), [](auto& o) { return o.first_wins; }) == 3);
}

TEST_CASE("bootstrap power examples") {
  BootstrapOptions o;
  o.k = 61;
  o.trials = 2000;
  o.seed = 9;
  CHECK(BootstrapPower(Outcomes(40, 0), o) == 1.0);
  o.k = 1;
  CHECK(BootstrapPower(Outcomes(40, 3), o) == 0.0);
  o.k = 0;
  CHECK(CodeOf([&] { BootstrapPower(Outcomes(1, 1), o); }) == ErrorCode::kInvalidArgument);
  o.k = 5;
  o.trials = 0;
  CHECK(CodeOf([&] { BootstrapPower(Outcomes(1, 1), o); }) == ErrorCode::kInvalidArgument);
  o.trials = 10;
  CHECK(CodeOf([&] { BootstrapPower({}, o); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("bootstrap is deterministic and independent of thread count") {
  const auto outcomes = Outcomes(60, 40);
  BootstrapOptions o;
  o.k = 150;
  o.trials = 5000;
  o.seed = 4;
  o.threads = 1;
  const double one = BootstrapPower(outcomes, o);
  o.threads = 3;
  CHECK(BootstrapPower(outcomes, o) == one);
  o.threads = 0;
  CHECK(BootstrapPower(outcomes, o) == one);
  o.seed = 5;
  CHECK(BootstrapPower(outcomes, o) != one);
  o.unit = ResampleUnit::kConversation;
  o.k = 75;
  const double conv = BootstrapPower(outcomes, o);
  CHECK(conv >= 0.0);
  CHECK(conv <= 1.0);
}

TEST_CASE("bootstrap curve rises with k on a doubling grid") {
  const std::vector<int> ks = {10, 20, 40, 80, 160, 320};
  BootstrapOptions o;
  o.trials = 4000;
  o.seed = 1;
  const PowerCurve c = BootstrapPowerCurve(Outcomes(60, 40), ks, o);
  REQUIRE(c.power.size() == ks.size());
  for (size_t i = 1; i < ks.size(); ++i) CHECK(c.power[i] >= c.power[i - 1] - 0.03);
  CHECK(c.power.back() > 0.9);
  CHECK(c.bootstrap_trials == 4000);
  const std::vector<int> bad = {5, 5};
  CHECK(CodeOf([&] { BootstrapPowerCurve(Outcomes(1, 1), bad, o); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("cost curve") {
  PowerCurve c;
  c.sample_sizes = {0, 36, 360};
  c.power = {0.0, 0.4, 0.9};
  const PowerCurve slow = CostCurve(c, 100);
  CHECK(slow.person_hours == std::vector<double>{0.0, 1.0, 10.0});
  CHECK(slow.power == c.power);
  const PowerCurve fast = CostCurve(c, 50);
  CHECK(fast.power == slow.power);
  CHECK(fast.person_hours[2] == 5.0);
  CHECK(CodeOf([&] { CostCurve(c, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { CostCurve(c, -1); }) == ErrorCode::kInvalidArgument);

  std::ostringstream tsv;
  WritePowerCurveTsv(tsv, slow, "a_vs_b");
  CHECK(tsv.str() == "a_vs_b\t0\t0.0000\t0.0000\n"
                     "a_vs_b\t36\t0.4000\t1.0000\n"
                     "a_vs_b\t360\t0.9000\t10.0000\n");
  std::ostringstream bare;
  WritePowerCurveTsv(bare, c, "x");
  CHECK(bare.str().substr(0, 11) == "x\t0\t0.0000\t");
}

TEST_CASE("Likert comparison curve matches a two-sample z test") {
  const LikertProfile profile{.seconds_per_rating = 30, .mean_difference = 0.5,
                              .score_variance = 1.0};
  const std::vector<int> ks = {0, 100, 400};
  const PowerCurve c = LikertPowerCurve(profile, ks, 0.05);
  const double z_crit = 1.959963984540054;
  const double z = 0.5 / std::sqrt(2.0 / 50.0);
  CHECK(c.power[0] == 0.0);
  CHECK(c.power[1] == doctest::Approx(NormalCdf(z - z_crit) + NormalCdf(-z - z_crit)));
  CHECK(c.power[2] > c.power[1]);
  CHECK(c.person_hours[1] == doctest::Approx(100 * 30 / 3600.0));
  CHECK(CodeOf([&] { LikertPowerCurve({30, 0.5, 0.0}, ks, 0.05); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("resample unit names") {
  CHECK(ParseResampleUnit("CONVERSATION") == ResampleUnit::kConversation);
  CHECK(ToString(ResampleUnit::kAnnotation) == "ANNOTATION");
  CHECK(CodeOf([] { ParseResampleUnit("dialogue"); }) == ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace acute
