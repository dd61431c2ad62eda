#include "conse/conse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conse/error.hpp"

namespace conse {

void validate(const ScoreRecord& record) {
  double sum = 0.0;
  for (double s : record.scores) {
    if (!std::isfinite(s) || s < 0.0) {
      throw Error(ErrorCode::InvalidDistribution,
                  "image '" + record.image_id + "' has a negative or non-finite score");
    }
    sum += s;
  }
  if (record.probabilistic && std::abs(sum - 1.0) > kScoreSumTolerance) {
    throw Error(ErrorCode::InvalidDistribution,
                "image '" + record.image_id + "' scores sum to " + std::to_string(sum));
  }
}

std::vector<WeightedLabel> top_t(const ScoreRecord& record, std::size_t t,
                                 std::span<const LabelId> train_order) {
  if (record.scores.size() != train_order.size()) {
    throw Error(ErrorCode::DimensionMismatch, "image '" + record.image_id + "' has " +
                                                  std::to_string(record.scores.size()) +
                                                  " scores for " + std::to_string(train_order.size()) +
                                                  " training labels");
  }
  if (t < 1 || t > train_order.size()) {
    throw Error(ErrorCode::InvalidArgument, "T must lie in [1, " + std::to_string(train_order.size()) + "]");
  }
  std::vector<WeightedLabel> positive;
  for (std::size_t i = 0; i < train_order.size(); ++i) {
    if (record.scores[i] > 0.0) positive.push_back({train_order[i], record.scores[i]});
  }
  if (positive.empty()) {
    throw Error(ErrorCode::DegenerateDistribution, "image '" + record.image_id + "' has no positive score");
  }
  const std::size_t keep = std::min(t, positive.size());
  std::partial_sort(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(keep), positive.end(),
                    [](const WeightedLabel& a, const WeightedLabel& b) {
                      if (a.weight != b.weight) return a.weight > b.weight;
                      return a.label_id < b.label_id;
                    });
  positive.resize(keep);
  return positive;
}

ConseVector conse_embed(const ScoreRecord& record, std::size_t t, std::span<const LabelId> train_order,
                        const LabelEmbeddings& embeddings) {
  validate(record);
  auto top = top_t(record, t, train_order);

  double z = 0.0;
  for (const auto& w : top) z += w.weight;
  if (!(z > 0.0)) {
    throw Error(ErrorCode::DegenerateDistribution, "image '" + record.image_id + "' has Z = 0");
  }

  ConseVector out;
  out.image_id = record.image_id;
  out.vector.assign(embeddings.dimension(), 0.0);
  out.support.reserve(top.size());
  for (const auto& w : top) {
    const LabelEmbedding& e = embeddings.at(w.label_id);
    const double weight = w.weight / z;
    for (std::size_t d = 0; d < out.vector.size(); ++d) out.vector[d] += weight * e.mean_vector[d];
    out.support.push_back({w.label_id, weight});
  }
  double sum_sq = 0.0;
  for (double x : out.vector) sum_sq += x * x;
  out.norm = std::sqrt(sum_sq);
  return out;
}

CandidateIndex::CandidateIndex(std::span<const LabelId> candidates, const LabelEmbeddings& embeddings)
    : dimension_(embeddings.dimension()), labels_(candidates.begin(), candidates.end()) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  if (labels_.empty()) throw Error(ErrorCode::EmptyCandidateSet, "no candidate labels");

  word_begin_.reserve(labels_.size() + 1);
  for (LabelId id : labels_) {
    const LabelEmbedding& e = embeddings.at(id);
    word_begin_.push_back(terms_.size());
    for (std::size_t w = 0; w < e.word_vectors.size(); ++w) {
      const auto& v = e.word_vectors[w];
      double sum_sq = 0.0;
      for (double x : v) sum_sq += x * x;
      const double norm = std::sqrt(sum_sq);
      for (double x : v) rows_.push_back(x / norm);
      terms_.push_back(e.terms[w]);
    }
  }
  word_begin_.push_back(terms_.size());
}

bool CandidateIndex::contains(LabelId id) const {
  return std::binary_search(labels_.begin(), labels_.end(), id);
}

std::vector<double> CandidateIndex::word_cosines(const ConseVector& v) const {
  if (v.vector.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "ConSE vector dimension does not match candidates");
  }
  if (!(v.norm > 0.0)) {
    throw Error(ErrorCode::ZeroConseVector, "image '" + v.image_id + "' has a zero ConSE vector");
  }
  std::vector<double> cosines(terms_.size());
  const double* row = rows_.data();
  for (std::size_t w = 0; w < terms_.size(); ++w, row += dimension_) {
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += v.vector[d] * row[d];
    cosines[w] = dot / v.norm;
  }
  return cosines;
}

namespace {

template <typename T>
void sort_by_score(std::vector<T>& items) {
  std::sort(items.begin(), items.end(), [](const T& a, const T& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label_id < b.label_id;
  });
}

}  // namespace

RankedPrediction CandidateIndex::rank(const ConseVector& v) const {
  const auto cosines = word_cosines(v);
  RankedPrediction out;
  out.image_id = v.image_id;
  out.ranked.reserve(labels_.size());
  for (std::size_t l = 0; l < labels_.size(); ++l) {
    const auto first = cosines.begin() + static_cast<std::ptrdiff_t>(word_begin_[l]);
    const auto last = cosines.begin() + static_cast<std::ptrdiff_t>(word_begin_[l + 1]);
    out.ranked.push_back({labels_[l], *std::max_element(first, last)});
  }
  sort_by_score(out.ranked);
  return out;
}

std::vector<ScoredWord> CandidateIndex::rank_words(const ConseVector& v) const {
  const auto cosines = word_cosines(v);
  std::vector<ScoredWord> out;
  out.reserve(terms_.size());
  for (std::size_t l = 0; l < labels_.size(); ++l) {
    for (std::size_t w = word_begin_[l]; w < word_begin_[l + 1]; ++w) {
      out.push_back({labels_[l], terms_[w], cosines[w]});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredWord& a, const ScoredWord& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.label_id != b.label_id) return a.label_id < b.label_id;
    return a.term < b.term;
  });
  return out;
}

RankedPrediction rank_candidates(const ConseVector& v, std::span<const LabelId> candidates,
                                 const LabelEmbeddings& embeddings) {
  if (!(v.norm > 0.0)) {
    throw Error(ErrorCode::ZeroConseVector, "image '" + v.image_id + "' has a zero ConSE vector");
  }
  return CandidateIndex(candidates, embeddings).rank(v);
}

ScoreRecord scale_scores(const ScoreRecord& record, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::InvalidArgument, "scale factor must be positive and finite");
  }
  ScoreRecord out = record;
  for (double& s : out.scores) s *= c;
  out.probabilistic = false;
  return out;
}

std::unordered_map<LabelId, RankedPrediction> precompute_expansions(
    std::span<const LabelId> train_labels, const CandidateIndex& index, const LabelEmbeddings& embeddings) {
  std::unordered_map<LabelId, RankedPrediction> out;
  for (LabelId id : train_labels) {
    const LabelEmbedding& e = embeddings.at(id);
    ConseVector v;
    v.vector = e.mean_vector;
    double sum_sq = 0.0;
    for (double x : v.vector) sum_sq += x * x;
    v.norm = std::sqrt(sum_sq);
    v.support = {{id, 1.0}};
    out.emplace(id, index.rank(v));
  }
  return out;
}

}  // namespace conse
