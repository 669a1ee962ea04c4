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

#ifndef ACUTE_STATS_H_
#define ACUTE_STATS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acute/annotation.h"
#include "acute/corpus.h"
#include "acute/pairing.h"

namespace acute {

inline constexpr double kDefaultAlpha = 0.05;

// ---------------------------------------------------------------------------
// Exact binomial inference.
// ---------------------------------------------------------------------------

// Exact two-sided p-value of k successes in n trials under p = 1/2, using the
// small-p-sum rule: the probabilities of every outcome no more likely than k
// are added up. Under p = 1/2 the pmf is symmetric and unimodal, so outcome i
// qualifies iff |2i - n| >= |2k - n|; membership is decided on integers and
// only the summation is done in floating point (log-space recurrence, stable
// well beyond n = 10^4). Throws kInvalidArgument unless 0 <= k <= n, n >= 1.
double BinomTwoSided(int64_t k, int64_t n);

// BinomTwoSided(k, n) for every k in [0, n], in O(n).
std::vector<double> BinomTwoSidedTable(int64_t n);

// P(X <= k) for X ~ Binomial(n, p).
double BinomialCdf(int64_t k, int64_t n, double p);

struct CountInterval {
  int64_t lo = 0;
  int64_t hi = 0;
  bool Contains(int64_t x) const { return lo <= x && x <= hi; }
};

// Equal-tailed interval of Binomial(n, p) counts holding at least `level` of
// the mass: each excluded tail has probability <= (1 - level) / 2.
CountInterval CentralBinomialInterval(int64_t n, double p, double level);

// ---------------------------------------------------------------------------
// Win matrix.
// ---------------------------------------------------------------------------

struct WinCell {
  int wins = 0;   // column agent over row agent
  int total = 0;  // all annotations between the pair
  double win_rate = 0.0;
  double p_value = 1.0;
  bool significant = false;

  friend bool operator==(const WinCell&, const WinCell&) = default;
};

// Square table oriented like a results table: the row agent loses the
// reported share of matches, the column agent wins it.
struct WinMatrix {
  std::vector<AgentId> agents;
  double alpha = kDefaultAlpha;
  // cells[row * agents.size() + col]; diagonal and unplayed pairs are empty.
  std::vector<std::optional<WinCell>> cells;

  const std::optional<WinCell>& cell(size_t row, size_t col) const {
    return cells[row * agents.size() + col];
  }
  std::optional<size_t> IndexOf(const AgentId& agent) const;
  // Cell where `winner` is the column and `loser` the row.
  const std::optional<WinCell>& CellFor(const AgentId& loser,
                                        const AgentId& winner) const;
  // Sum of totals over unordered pairs.
  int total_annotations() const;

  friend bool operator==(const WinMatrix&, const WinMatrix&) = default;
};

// Tallies chosen agents per agent pair. Annotations must reference non-QC,
// non-self-check matchups of `plan` (kNotFound / kInvalidArgument otherwise).
WinMatrix ComputeWinMatrix(std::span<const Annotation> annotations,
                           const Plan& plan, double alpha = kDefaultAlpha);

// Percent table; significant cells carry a trailing '*'.
void WriteWinMatrixTsv(std::ostream& out, const WinMatrix& matrix);
// One record per present cell with a boolean significance column.
void WriteWinCellsTsv(std::ostream& out, const WinMatrix& matrix);
nlohmann::json ToJson(const WinMatrix& matrix);

// ---------------------------------------------------------------------------
// Agreement and A/A checks.
// ---------------------------------------------------------------------------

struct AgreementResult {
  std::string question_id;
  std::string conv_a;  // lexicographically smaller conversation of the pair
  std::string conv_b;
  int n_annotations = 0;
  int majority_count = 0;
  double agreement_rate = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

// Agreement on one conversation pair under one question. The modal choice is
// counted per conversation, which equals the per-side count when placement is
// fixed. Throws kInvalidArgument on an empty set or on annotations that span
// several pairs or questions.
AgreementResult Agreement(std::span<const Annotation> annotations,
                          const Plan& plan, std::string_view question_id,
                          double alpha = kDefaultAlpha);

// Agreement for every (pair, question) group with at least `min_annotations`.
std::vector<AgreementResult> AgreementTable(std::span<const Annotation> annotations,
                                            const Plan& plan, int min_annotations,
                                            double alpha = kDefaultAlpha);
void WriteAgreementTsv(std::ostream& out, std::span<const AgreementResult> rows);

struct AaResult {
  int n = 0;
  int left_wins = 0;
  double left_rate = 0.0;
  double p_value = 1.0;
  bool position_bias_warning = false;  // p < alpha
};

// Position-bias check on a self-vs-self comparison. Throws kInvalidArgument
// on an empty set or when any matchup pits two different agents.
AaResult AaCheck(std::span<const Annotation> annotations, const Plan& plan,
                 double alpha = kDefaultAlpha);

// ---------------------------------------------------------------------------
// Bootstrap power and cost curves.
// ---------------------------------------------------------------------------

enum class ResampleUnit { kAnnotation, kConversation };

std::string_view ToString(ResampleUnit unit);
ResampleUnit ParseResampleUnit(std::string_view s);

// Outcome of one annotation between a fixed pair, plus the resampling unit
// (the conversation pair it was judged on).
struct PairOutcome {
  std::string unit;
  bool first_wins = false;
};

// Outcomes of every annotation on a matchup between `first` and `second`.
std::vector<PairOutcome> PairOutcomes(std::span<const Annotation> annotations,
                                      const Plan& plan, const AgentId& first,
                                      const AgentId& second);

struct BootstrapOptions {
  int k = 1;
  double alpha = kDefaultAlpha;
  int trials = 10000;
  uint64_t seed = 0;
  ResampleUnit unit = ResampleUnit::kAnnotation;
  // 0 = hardware concurrency. Results do not depend on this value.
  int threads = 0;
};

// Fraction of `trials` resamples (k units drawn with replacement) whose
// binomial test reaches p < alpha. Throws kInvalidArgument on an empty
// outcome set, k < 1 or trials < 1.
double BootstrapPower(std::span<const PairOutcome> outcomes,
                      const BootstrapOptions& options);

struct PowerCurve {
  std::vector<int> sample_sizes;
  std::vector<double> power;
  double alpha = kDefaultAlpha;
  int bootstrap_trials = 0;
  std::vector<double> person_hours;  // empty until a cost model is applied
};

// Power at each k (strictly increasing), all with the same seed.
PowerCurve BootstrapPowerCurve(std::span<const PairOutcome> outcomes,
                               std::span<const int> sample_sizes,
                               BootstrapOptions options);

// Attaches person-hours = k * seconds_per_annotation / 3600.
PowerCurve CostCurve(PowerCurve curve, double seconds_per_annotation);

// Summary of a Likert study used for a comparison curve: k ratings are split
// evenly between the two models and compared with a two-sample z test.
struct LikertProfile {
  double seconds_per_rating = 0.0;
  double mean_difference = 0.0;
  double score_variance = 0.0;
};

PowerCurve LikertPowerCurve(const LikertProfile& profile,
                            std::span<const int> sample_sizes, double alpha);

void WritePowerCurveTsv(std::ostream& out, const PowerCurve& curve,
                        std::string_view label);

}  // namespace acute

#endif  // ACUTE_STATS_H_
