#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "conse/embedding_store.hpp"
#include "conse/types.hpp"

namespace conse {

/// One image's classifier output over the TRAIN labels, indexed in
/// LabelCatalog::train_order().
struct ScoreRecord {
  std::string image_id;
  std::vector<double> scores;
  std::optional<LabelId> true_label;
  /// False for records produced by scale_scores(); the sum-to-one check is
  /// skipped for those.
  bool probabilistic = true;
};

inline constexpr double kScoreSumTolerance = 1e-4;

/// Throws InvalidDistribution for negative, non-finite, or (when
/// probabilistic) non-normalized scores.
void validate(const ScoreRecord& record);

struct WeightedLabel {
  LabelId label_id = 0;
  double weight = 0.0;

  friend bool operator==(const WeightedLabel&, const WeightedLabel&) = default;
};

struct ConseVector {
  std::string image_id;
  std::vector<double> vector;
  double norm = 0.0;
  /// Labels used in the combination with renormalized weights.
  std::vector<WeightedLabel> support;
};

struct ScoredLabel {
  LabelId label_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredLabel&, const ScoredLabel&) = default;
};

struct RankedPrediction {
  std::string image_id;
  std::vector<ScoredLabel> ranked;

  friend bool operator==(const RankedPrediction&, const RankedPrediction&) = default;
};

/// A single synonym's cosine before labels are deduplicated.
struct ScoredWord {
  LabelId label_id = 0;
  std::string term;
  double score = 0.0;
};

/// The T most probable TRAIN labels, highest first, ties by ascending id.
/// Zero-probability labels are never returned.
std::vector<WeightedLabel> top_t(const ScoreRecord& record, std::size_t t,
                                 std::span<const LabelId> train_order);

/// Convex combination of the top-T label mean vectors weighted by their
/// renormalized probabilities.
ConseVector conse_embed(const ScoreRecord& record, std::size_t t, std::span<const LabelId> train_order,
                        const LabelEmbeddings& embeddings);

/// Flattened synonym vectors for a fixed candidate label set. Built once and
/// shared (read-only) across images.
class CandidateIndex {
 public:
  CandidateIndex(std::span<const LabelId> candidates, const LabelEmbeddings& embeddings);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<LabelId>& labels() const noexcept { return labels_; }
  bool contains(LabelId id) const;

  RankedPrediction rank(const ConseVector& v) const;
  std::vector<ScoredWord> rank_words(const ConseVector& v) const;

 private:
  std::vector<double> word_cosines(const ConseVector& v) const;

  std::size_t dimension_ = 0;
  std::vector<LabelId> labels_;          // sorted ascending
  std::vector<std::size_t> word_begin_;  // per label, into rows; size labels_+1
  std::vector<double> rows_;             // unit-scaled word vectors, row major
  std::vector<std::string> terms_;
};

RankedPrediction rank_candidates(const ConseVector& v, std::span<const LabelId> candidates,
                                 const LabelEmbeddings& embeddings);

/// Multiplies every score by c > 0; the result is marked non-probabilistic.
ScoreRecord scale_scores(const ScoreRecord& record, double c);

/// Ranked candidates for each retained TRAIN label as if it were the sole
/// top-1 prediction. Ranking a T=1 image reduces to a lookup in this table.
std::unordered_map<LabelId, RankedPrediction> precompute_expansions(
    std::span<const LabelId> train_labels, const CandidateIndex& index, const LabelEmbeddings& embeddings);

}  // namespace conse
