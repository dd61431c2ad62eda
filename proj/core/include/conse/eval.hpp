#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "conse/conse.hpp"
#include "conse/embedding_store.hpp"
#include "conse/hierarchy.hpp"

namespace conse {

/// 1 iff true_label is among the first k ranked labels.
int flat_hit_at_k(const RankedPrediction& pred, LabelId true_label, std::size_t k);

/// Fraction of the top k predictions that fall in relevance_set(true_label, k).
/// The denominator is always k.
double hier_precision_at_k(const RankedPrediction& pred, LabelId true_label, std::size_t k,
                           const LabelHierarchy& h, const LabelSet& universe);

enum class CandidateMode { TestOnly, PlusTrain };

std::string_view to_string(CandidateMode mode) noexcept;
std::optional<CandidateMode> parse_candidate_mode(std::string_view s) noexcept;

struct EvalConfig {
  std::size_t t = 10;
  CandidateMode candidate_mode = CandidateMode::TestOnly;
  std::vector<std::size_t> ks{1, 2, 5, 10, 20};
  std::optional<std::size_t> max_hops;
  /// 0 means one worker per available core.
  std::size_t threads = 0;
};

struct EvalAssets {
  const LabelCatalog& catalog;
  const LabelEmbeddings& embeddings;
  /// Optional; required for max_hops and for hierarchical precision.
  const LabelHierarchy* hierarchy = nullptr;
};

struct SkippedImage {
  std::string image_id;
  std::string reason;

  friend bool operator==(const SkippedImage&, const SkippedImage&) = default;
};

struct EvalReport {
  EvalConfig config;
  std::size_t candidate_count = 0;
  std::size_t total = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::size_t excluded_label = 0;
  std::size_t zero_vector = 0;
  /// Percentages in [0, 100], one per config.ks entry.
  std::vector<double> hit_at_k;
  /// One per config.ks entry; nullopt when no hierarchy was given or k
  /// exceeds the candidate count.
  std::vector<std::optional<double>> precision_at_k;
  /// Mean ConSE vector norm over evaluated images.
  double mean_norm = 0.0;
  /// Sorted by image id, then reason.
  std::vector<SkippedImage> skips;
};

/// Per-image ConSE pipeline over a fixed candidate set.
class ConsePipeline {
 public:
  ConsePipeline(const EvalAssets& assets, const EvalConfig& config);

  const LabelSet& candidates() const noexcept { return candidates_; }
  ConseVector embed(const ScoreRecord& record) const;
  RankedPrediction predict(const ScoreRecord& record) const;

  EvalReport evaluate(const std::vector<ScoreRecord>& records) const;

 private:
  struct Outcome;
  Outcome evaluate_one(const ScoreRecord& record) const;

  const EvalAssets assets_;
  EvalConfig config_;
  LabelSet candidates_;
  std::vector<LabelId> candidate_list_;
  CandidateIndex index_;
};

/// Candidate labels for the mode: retained TEST labels (restricted to
/// max_hops of TRAIN when set), plus retained TRAIN labels for PlusTrain.
LabelSet candidate_set(const EvalAssets& assets, const EvalConfig& config);

EvalReport evaluate_batch(const std::vector<ScoreRecord>& records, const EvalAssets& assets,
                          const EvalConfig& config);

nlohmann::json to_json(const EvalReport& report);
/// Aligned text table: hit@k to one decimal, precision@k to three.
std::string format_table(const EvalReport& report);

}  // namespace conse
