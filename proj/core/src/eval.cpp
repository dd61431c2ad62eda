#include "conse/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <thread>
#include <tuple>

#include "conse/error.hpp"

namespace conse {

int flat_hit_at_k(const RankedPrediction& pred, LabelId true_label, std::size_t k) {
  const std::size_t n = std::min(k, pred.ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (pred.ranked[i].label_id == true_label) return 1;
  }
  return 0;
}

namespace {

std::size_t relevant_in_top_k(const RankedPrediction& pred, LabelId true_label, std::size_t k,
                              const LabelHierarchy& h, const LabelSet& universe) {
  const LabelSet relevant = relevance_set(h, true_label, k, universe);
  const std::size_t n = std::min(k, pred.ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += relevant.contains(pred.ranked[i].label_id) ? 1 : 0;
  return hits;
}

}  // namespace

double hier_precision_at_k(const RankedPrediction& pred, LabelId true_label, std::size_t k,
                           const LabelHierarchy& h, const LabelSet& universe) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  return static_cast<double>(relevant_in_top_k(pred, true_label, k, h, universe)) / static_cast<double>(k);
}

std::string_view to_string(CandidateMode mode) noexcept {
  return mode == CandidateMode::TestOnly ? "TEST_ONLY" : "PLUS_TRAIN";
}

std::optional<CandidateMode> parse_candidate_mode(std::string_view s) noexcept {
  if (s == "TEST_ONLY") return CandidateMode::TestOnly;
  if (s == "PLUS_TRAIN") return CandidateMode::PlusTrain;
  return std::nullopt;
}

LabelSet candidate_set(const EvalAssets& assets, const EvalConfig& config) {
  const auto test_ids = assets.catalog.ids(Split::Test);
  const auto train_ids = assets.catalog.ids(Split::Train);
  LabelSet out(test_ids.begin(), test_ids.end());
  if (config.max_hops) {
    if (assets.hierarchy == nullptr) {
      throw Error(ErrorCode::InvalidArgument, "max_hops requires a hierarchy");
    }
    out = hop_candidate_set(*assets.hierarchy, LabelSet(train_ids.begin(), train_ids.end()), out, *config.max_hops);
  }
  if (config.candidate_mode == CandidateMode::PlusTrain) out.insert(train_ids.begin(), train_ids.end());
  return out;
}

namespace {

std::vector<LabelId> to_vector(const LabelSet& s) { return {s.begin(), s.end()}; }

}  // namespace

ConsePipeline::ConsePipeline(const EvalAssets& assets, const EvalConfig& config)
    : assets_(assets),
      config_(config),
      candidates_(candidate_set(assets, config)),
      candidate_list_(to_vector(candidates_)),
      index_(candidate_list_, assets.embeddings) {
  if (config_.ks.empty()) throw Error(ErrorCode::InvalidArgument, "at least one k is required");
  for (std::size_t k : config_.ks) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  }
}

ConseVector ConsePipeline::embed(const ScoreRecord& record) const {
  return conse_embed(record, config_.t, assets_.catalog.train_order(), assets_.embeddings);
}

RankedPrediction ConsePipeline::predict(const ScoreRecord& record) const { return index_.rank(embed(record)); }

struct ConsePipeline::Outcome {
  bool evaluated = false;
  double norm = 0.0;
  std::vector<std::size_t> hits;
  std::vector<std::size_t> relevant;
  bool excluded_label = false;
  bool zero_vector = false;
  std::optional<SkippedImage> skip;
};

ConsePipeline::Outcome ConsePipeline::evaluate_one(const ScoreRecord& record) const {
  Outcome out;
  auto skip = [&](std::string reason) {
    out.skip = SkippedImage{record.image_id, std::move(reason)};
    return out;
  };
  if (!record.true_label) return skip("missing true_label");
  const LabelId truth = *record.true_label;
  if (!assets_.catalog.is_resolved(truth)) {
    if (assets_.catalog.is_declared(truth)) {
      out.excluded_label = true;
      return skip("true label " + std::to_string(truth) + " excluded (out of vocabulary)");
    }
    return skip("true label " + std::to_string(truth) + " unknown");
  }
  if (!candidates_.contains(truth)) return skip("true label " + std::to_string(truth) + " not a candidate");

  try {
    const ConseVector v = embed(record);
    const RankedPrediction pred = index_.rank(v);
    out.norm = v.norm;
    for (std::size_t k : config_.ks) {
      out.hits.push_back(static_cast<std::size_t>(flat_hit_at_k(pred, truth, k)));
      if (assets_.hierarchy != nullptr && k <= candidates_.size()) {
        out.relevant.push_back(relevant_in_top_k(pred, truth, k, *assets_.hierarchy, candidates_));
      } else {
        out.relevant.push_back(0);
      }
    }
  } catch (const Error& e) {
    out.hits.clear();
    out.relevant.clear();
    out.zero_vector = e.code() == ErrorCode::ZeroConseVector;
    return skip(e.what());
  }
  out.evaluated = true;
  return out;
}

EvalReport ConsePipeline::evaluate(const std::vector<ScoreRecord>& records) const {
  std::vector<Outcome> outcomes(records.size());
  std::size_t workers = config_.threads != 0 ? config_.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, records.size()));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) outcomes[i] = evaluate_one(records[i]);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  EvalReport report;
  report.config = config_;
  report.candidate_count = candidates_.size();
  report.total = records.size();
  std::vector<std::size_t> hits(config_.ks.size(), 0);
  std::vector<std::size_t> relevant(config_.ks.size(), 0);
  std::vector<double> norms;
  for (auto& o : outcomes) {
    if (!o.evaluated) {
      ++report.skipped;
      report.excluded_label += o.excluded_label ? 1 : 0;
      report.zero_vector += o.zero_vector ? 1 : 0;
      report.skips.push_back(std::move(*o.skip));
      continue;
    }
    ++report.evaluated;
    norms.push_back(o.norm);
    for (std::size_t i = 0; i < config_.ks.size(); ++i) {
      hits[i] += o.hits[i];
      relevant[i] += o.relevant[i];
    }
  }

  const double total = static_cast<double>(report.total);
  for (std::size_t i = 0; i < config_.ks.size(); ++i) {
    const std::size_t k = config_.ks[i];
    report.hit_at_k.push_back(report.total == 0 ? 0.0 : 100.0 * static_cast<double>(hits[i]) / total);
    if (assets_.hierarchy != nullptr && k <= candidates_.size()) {
      report.precision_at_k.push_back(
          report.total == 0 ? 0.0 : static_cast<double>(relevant[i]) / (static_cast<double>(k) * total));
    } else {
      report.precision_at_k.push_back(std::nullopt);
    }
  }
  std::sort(norms.begin(), norms.end());
  double norm_sum = 0.0;
  for (double n : norms) norm_sum += n;
  report.mean_norm = norms.empty() ? 0.0 : norm_sum / static_cast<double>(norms.size());
  std::sort(report.skips.begin(), report.skips.end(), [](const SkippedImage& a, const SkippedImage& b) {
    return std::tie(a.image_id, a.reason) < std::tie(b.image_id, b.reason);
  });
  return report;
}

EvalReport evaluate_batch(const std::vector<ScoreRecord>& records, const EvalAssets& assets,
                          const EvalConfig& config) {
  return ConsePipeline(assets, config).evaluate(records);
}

namespace {

double round_to(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return std::stod(os.str());
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json hit = nlohmann::json::object();
  nlohmann::json precision = nlohmann::json::object();
  for (std::size_t i = 0; i < report.config.ks.size(); ++i) {
    const std::string k = std::to_string(report.config.ks[i]);
    hit[k] = round_to(report.hit_at_k[i], 1);
    precision[k] = report.precision_at_k[i] ? nlohmann::json(round_to(*report.precision_at_k[i], 3))
                                            : nlohmann::json(nullptr);
  }
  nlohmann::json skips = nlohmann::json::array();
  for (const auto& s : report.skips) skips.push_back({{"image_id", s.image_id}, {"reason", s.reason}});
  nlohmann::json config = {{"T", report.config.t},
                           {"candidate_mode", to_string(report.config.candidate_mode)},
                           {"ks", report.config.ks},
                           {"max_hops", report.config.max_hops ? nlohmann::json(*report.config.max_hops)
                                                               : nlohmann::json(nullptr)}};
  return {{"config", std::move(config)},
          {"candidate_count", report.candidate_count},
          {"total", report.total},
          {"evaluated", report.evaluated},
          {"skipped", report.skipped},
          {"excluded_label", report.excluded_label},
          {"zero_vector", report.zero_vector},
          {"flat_hit_at_k_percent", std::move(hit)},
          {"hierarchical_precision_at_k", std::move(precision)},
          {"mean_conse_norm", report.mean_norm},
          {"skips", std::move(skips)}};
}

std::string format_table(const EvalReport& report) {
  std::ostringstream os;
  const auto& cfg = report.config;
  os << "ConSE(" << cfg.t << ")  mode=" << to_string(cfg.candidate_mode) << "  max_hops="
     << (cfg.max_hops ? std::to_string(*cfg.max_hops) : std::string("none")) << "  candidates=" << report.candidate_count
     << "\n";
  os << "images=" << report.total << "  evaluated=" << report.evaluated << "  skipped=" << report.skipped
     << " (excluded_label=" << report.excluded_label << ", zero_vector=" << report.zero_vector << ")\n";
  os << std::fixed << std::setprecision(4) << "mean ||f(x)||=" << report.mean_norm << "\n\n";

  constexpr int label_width = 26;
  constexpr int col_width = 8;
  os << std::left << std::setw(label_width) << "k" << std::right;
  for (std::size_t k : cfg.ks) os << std::setw(col_width) << k;
  os << "\n" << std::left << std::setw(label_width) << "Flat hit@k (%)" << std::right;
  for (double v : report.hit_at_k) os << std::setw(col_width) << std::setprecision(1) << v;
  os << "\n";
  const bool any_precision =
      std::any_of(report.precision_at_k.begin(), report.precision_at_k.end(), [](const auto& p) { return p.has_value(); });
  if (any_precision) {
    os << std::left << std::setw(label_width) << "Hierarchical precision@k" << std::right;
    for (const auto& p : report.precision_at_k) {
      if (p) {
        os << std::setw(col_width) << std::setprecision(3) << *p;
      } else {
        os << std::setw(col_width) << "-";
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace conse
