#include "conse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "conse/error.hpp"
#include "conse/score_io.hpp"
#include "text_util.hpp"

namespace conse::synth {

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "synth config: " + what); };
  if (q == 0 || n0 == 0 || n1 == 0 || clusters == 0 || images_per_label == 0) fail("counts must be positive");
  if (!(spread > 0.0 && spread < std::numbers::pi / 2)) fail("spread must lie in (0, pi/2)");
  if (!(plant_fraction >= 0.0 && plant_fraction <= 1.0)) fail("plant fraction must lie in [0, 1]");
  if (!(noise >= 0.0 && noise <= 1.0)) fail("noise must lie in [0, 1]");
  if (plant_fraction > 0.0 && n0 < 2) fail("planting needs at least 2 training labels");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"seed", c.seed},   {"q", c.q},         {"n0", c.n0},
          {"n1", c.n1},       {"clusters", c.clusters}, {"spread", c.spread},
          {"noise", c.noise}, {"plant_fraction", c.plant_fraction}, {"images_per_label", c.images_per_label}};
}

double PortableRng::normal() {
  double sum = 0.0;
  for (int i = 0; i < 12; ++i) sum += uniform();
  return sum - 6.0;
}

namespace {

using Vec = std::vector<double>;

void normalize(Vec& v) {
  double sum_sq = 0.0;
  for (double x : v) sum_sq += x * x;
  const double n = std::sqrt(sum_sq);
  for (double& x : v) x /= n;
}

Vec random_unit(PortableRng& rng, std::size_t q) {
  Vec v(q);
  double sum_sq = 0.0;
  do {
    sum_sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      sum_sq += x * x;
    }
  } while (sum_sq < 1e-12);
  normalize(v);
  return v;
}

// Unit vector at angle atan(t) from `center`, t uniform in [0, max_tan).
Vec perturb(PortableRng& rng, const Vec& center, double max_tan) {
  const std::size_t q = center.size();
  const double t = rng.uniform() * max_tan;
  if (q == 1) return center;
  Vec u;
  double dot = 0.0;
  double sum_sq = 0.0;
  do {
    u = random_unit(rng, q);
    dot = 0.0;
    for (std::size_t d = 0; d < q; ++d) dot += u[d] * center[d];
    sum_sq = 0.0;
    for (std::size_t d = 0; d < q; ++d) {
      u[d] -= dot * center[d];
      sum_sq += u[d] * u[d];
    }
  } while (sum_sq < 1e-12);
  normalize(u);
  Vec out(q);
  for (std::size_t d = 0; d < q; ++d) out[d] = center[d] + t * u[d];
  normalize(out);
  return out;
}

std::string train_term(std::size_t i) { return "train_" + std::to_string(i); }
std::string test_term(std::size_t j) { return "test_" + std::to_string(j); }

}  // namespace

std::vector<double> plant_between(std::span<const double> a, std::span<const double> b, double lambda) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "planting vectors differ in dimension");
  Vec out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) out[d] = lambda * a[d] + (1 - lambda) * b[d];
  normalize(out);
  return out;
}

SynthBundle liger_bundle() {
  SynthBundle b;
  b.config.q = 2;
  b.config.n0 = 2;
  b.config.n1 = 2;
  b.config.clusters = 1;
  b.config.plant_fraction = 0.5;
  b.config.images_per_label = 1;
  b.q = 2;
  const Vec lion{1.0, 0.0};
  const Vec tiger{0.0, 1.0};
  b.embeddings = {{"lion", lion}, {"tiger", tiger}, {"liger", plant_between(lion, tiger, 0.5)}, {"jaguar", {0.96, 0.28}}};
  b.labels = {{0, {"lion"}, Split::Train}, {1, {"tiger"}, Split::Train}, {2, {"liger"}, Split::Test}, {3, {"jaguar"}, Split::Test}};
  b.edges = {{0, 2}, {1, 2}, {0, 3}};
  b.planted = {{2, 0, 1, 0.5}};
  ScoreRecord r;
  r.image_id = "liger_0";
  r.scores = {0.5, 0.5};
  r.true_label = 2;
  b.records.push_back(std::move(r));
  return b;
}

SynthBundle generate(const SynthConfig& config) {
  config.validate();
  PortableRng rng(config.seed);
  SynthBundle b;
  b.config = config;
  b.q = config.q;
  const std::size_t q = config.q;
  const double max_tan = std::tan(config.spread);

  std::vector<Vec> centers;
  for (std::size_t c = 0; c < config.clusters; ++c) centers.push_back(random_unit(rng, q));

  // TRAIN labels: ids 0..n0-1, cluster i % clusters.
  std::vector<Vec> train_means;
  for (std::size_t i = 0; i < config.n0; ++i) {
    Label label{static_cast<LabelId>(i), {train_term(i)}, Split::Train};
    Vec primary = perturb(rng, centers[i % config.clusters], max_tan);
    b.embeddings.emplace_back(train_term(i), primary);
    Vec mean = primary;
    if (rng.uniform() < 0.3) {
      Vec alt = perturb(rng, primary, max_tan / 4);
      b.embeddings.emplace_back(train_term(i) + "_alt", alt);
      label.synonyms.push_back(train_term(i) + "_alt");
      for (std::size_t d = 0; d < q; ++d) mean[d] = (mean[d] + alt[d]) / 2;
    }
    if (i % 7 == 3) label.synonyms.push_back(train_term(i) + "_oov");
    train_means.push_back(std::move(mean));
    b.labels.push_back(std::move(label));
  }

  // TEST labels: ids n0..n0+n1-1; the first round(fraction * n1) are planted.
  const auto planted_count = static_cast<std::size_t>(std::llround(config.plant_fraction * static_cast<double>(config.n1)));
  std::set<std::pair<std::size_t, std::size_t>> used_pairs;
  const std::size_t pair_count = config.n0 * (config.n0 - 1) / 2;
  std::vector<Vec> test_vectors;
  std::vector<std::size_t> test_parent;
  std::vector<std::pair<std::size_t, std::size_t>> unplanted_cluster;
  for (std::size_t j = 0; j < config.n1; ++j) {
    const auto id = static_cast<LabelId>(config.n0 + j);
    Label label{id, {test_term(j)}, Split::Test};
    Vec primary;
    if (j < planted_count) {
      std::size_t a = 0;
      std::size_t bb = 0;
      do {
        a = rng.below(config.n0);
        bb = rng.below(config.n0 - 1);
        if (bb >= a) ++bb;
      } while (used_pairs.size() < pair_count && used_pairs.contains({std::min(a, bb), std::max(a, bb)}));
      used_pairs.insert({std::min(a, bb), std::max(a, bb)});
      const double lambda = 0.3 + 0.4 * rng.uniform();
      primary = plant_between(train_means[a], train_means[bb], lambda);
      b.planted.push_back({id, static_cast<LabelId>(a), static_cast<LabelId>(bb), lambda});
      test_parent.push_back(a);
    } else {
      const std::size_t c = rng.below(config.clusters);
      primary = perturb(rng, centers[c], max_tan);
      if (rng.uniform() < 0.3) {
        b.embeddings.emplace_back(test_term(j) + "_alt", perturb(rng, primary, max_tan / 4));
        label.synonyms.push_back(test_term(j) + "_alt");
      }
      // Parent: a random TRAIN label or earlier unplanted TEST label of the
      // same cluster, so unplanted labels sit at varying depths.
      std::vector<std::size_t> members;
      for (std::size_t i = c; i < config.n0; i += config.clusters) members.push_back(i);
      for (const auto& [test_id, cluster] : unplanted_cluster) {
        if (cluster == c) members.push_back(test_id);
      }
      test_parent.push_back(members.empty() ? config.n0 + config.n1 + 1 + c : members[rng.below(members.size())]);
      unplanted_cluster.emplace_back(config.n0 + j, c);
    }
    if (j % 5 == 2) label.synonyms.push_back(test_term(j) + "_oov");
    b.embeddings.emplace_back(test_term(j), primary);
    test_vectors.push_back(std::move(primary));
    b.labels.push_back(std::move(label));
  }

  // Hierarchy: root -> cluster nodes -> TRAIN labels -> TEST labels.
  const auto root = static_cast<LabelId>(config.n0 + config.n1);
  for (std::size_t c = 0; c < config.clusters; ++c) b.edges.emplace_back(root, root + 1 + static_cast<LabelId>(c));
  for (std::size_t i = 0; i < config.n0; ++i) {
    b.edges.emplace_back(root + 1 + static_cast<LabelId>(i % config.clusters), static_cast<LabelId>(i));
  }
  for (std::size_t j = 0; j < config.n1; ++j) {
    b.edges.emplace_back(static_cast<LabelId>(test_parent[j]), static_cast<LabelId>(config.n0 + j));
  }

  // Scores.
  for (std::size_t j = 0; j < config.n1; ++j) {
    const PlantedLabel* plant = j < planted_count ? &b.planted[j] : nullptr;
    for (std::size_t r = 0; r < config.images_per_label; ++r) {
      Vec clean(config.n0, 0.0);
      if (plant != nullptr) {
        clean[static_cast<std::size_t>(plant->first)] = plant->lambda;
        clean[static_cast<std::size_t>(plant->second)] = 1 - plant->lambda;
      } else {
        double sum = 0.0;
        for (std::size_t i = 0; i < config.n0; ++i) {
          double cos = 0.0;
          for (std::size_t d = 0; d < q; ++d) cos += test_vectors[j][d] * train_means[i][d];
          const double pos = std::max(cos, 0.0);
          const double p2 = pos * pos;
          clean[i] = p2 * p2 * p2 * p2;
          sum += clean[i];
        }
        for (double& p : clean) p = sum > 0.0 ? p / sum : 1.0 / static_cast<double>(config.n0);
      }
      Vec scores(config.n0);
      if (config.noise > 0.0) {
        Vec simplex(config.n0);
        double sum = 0.0;
        for (double& x : simplex) {
          x = rng.uniform();
          sum += x;
        }
        for (std::size_t i = 0; i < config.n0; ++i) {
          scores[i] = (1 - config.noise) * clean[i] + config.noise * simplex[i] / sum;
        }
      } else {
        scores = clean;
      }
      ScoreRecord record;
      record.image_id = "img_" + std::to_string(j) + "_" + std::to_string(r);
      record.scores = std::move(scores);
      record.true_label = static_cast<LabelId>(config.n0 + j);
      b.records.push_back(std::move(record));
    }
  }
  return b;
}

std::map<std::string, std::string> serialize(const SynthBundle& b) {
  std::map<std::string, std::string> out;
  {
    std::ostringstream os;
    os << b.embeddings.size() << ' ' << b.q << '\n';
    for (const auto& [term, v] : b.embeddings) {
      os << term;
      for (double x : v) os << ' ' << detail::format_double(x);
      os << '\n';
    }
    out[files::kEmbeddings] = os.str();
  }
  {
    std::ostringstream labels;
    std::ostringstream splits;
    for (const auto& label : b.labels) {
      labels << label.id << '\t';
      for (std::size_t i = 0; i < label.synonyms.size(); ++i) labels << (i > 0 ? "," : "") << label.synonyms[i];
      labels << '\n';
      splits << label.id << ' ' << to_string(label.split) << '\n';
    }
    out[files::kLabels] = labels.str();
    out[files::kSplits] = splits.str();
  }
  {
    std::ostringstream os;
    for (const auto& [parent, child] : b.edges) os << parent << ' ' << child << '\n';
    out[files::kHierarchy] = os.str();
  }
  {
    std::ostringstream os;
    for (const auto& r : b.records) write_score_record(os, r);
    out[files::kScores] = os.str();
  }
  nlohmann::json planted = nlohmann::json::array();
  for (const auto& p : b.planted) {
    planted.push_back({{"test_label", p.test_label}, {"first", p.first}, {"second", p.second}, {"lambda", p.lambda}});
  }
  nlohmann::json meta = {{"format_version", 1},
                         {"generator", PortableRng::kName},
                         {"config", to_json(b.config)},
                         {"planted", std::move(planted)},
                         {"files",
                          {{"embeddings", files::kEmbeddings},
                           {"labels", files::kLabels},
                           {"splits", files::kSplits},
                           {"hierarchy", files::kHierarchy},
                           {"scores", files::kScores}}}};
  out[files::kMetadata] = meta.dump(2) + "\n";
  return out;
}

void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : serialize(bundle)) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
    f << content;
  }
}

namespace {

LoadedBundle parse_bundle(std::istream& embeddings, std::istream& labels, std::istream& splits,
                          std::istream& hierarchy, std::istream& scores, std::istream& metadata) {
  LoadedBundle out;
  out.table = load_embeddings(embeddings);
  out.catalog = load_catalog(labels, splits, out.table);
  out.embeddings = LabelEmbeddings(out.catalog, out.table);
  std::vector<LabelId> ids;
  for (const auto& l : out.catalog.labels()) ids.push_back(l.id);
  out.hierarchy = load_hierarchy(hierarchy, ids);
  out.records = read_score_records(scores);
  out.metadata = nlohmann::json::parse(metadata, nullptr, false);
  if (out.metadata.is_discarded()) throw Error(ErrorCode::Parse, "metadata.json is not valid JSON");
  return out;
}

}  // namespace

LoadedBundle load_bundle(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + (dir / name).string());
    return f;
  };
  auto e = open(files::kEmbeddings);
  auto l = open(files::kLabels);
  auto s = open(files::kSplits);
  auto h = open(files::kHierarchy);
  auto r = open(files::kScores);
  auto m = open(files::kMetadata);
  return parse_bundle(e, l, s, h, r, m);
}

LoadedBundle materialize(const SynthBundle& bundle) {
  auto text = serialize(bundle);
  std::istringstream e(text[files::kEmbeddings]);
  std::istringstream l(text[files::kLabels]);
  std::istringstream s(text[files::kSplits]);
  std::istringstream h(text[files::kHierarchy]);
  std::istringstream r(text[files::kScores]);
  std::istringstream m(text[files::kMetadata]);
  return parse_bundle(e, l, s, h, r, m);
}

// Everything below is deliberately naive and shares no arithmetic with the
// conse-core implementation.

namespace {

const ScoreRecord& find_record(const LoadedBundle& bundle, const std::string& image_id) {
  for (const auto& r : bundle.records) {
    if (r.image_id == image_id) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "no image '" + image_id + "' in bundle");
}

using LVec = std::vector<long double>;

LVec oracle_mean(const LoadedBundle& bundle, LabelId id) {
  const Label* label = bundle.catalog.find(id);
  if (label == nullptr) throw Error(ErrorCode::UnresolvedLabel, "label " + std::to_string(id));
  LVec sum(bundle.table.dimension(), 0.0L);
  std::size_t count = 0;
  for (const auto& term : label->synonyms) {
    auto v = bundle.table.find(term);
    if (!v) continue;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += (*v)[d];
    ++count;
  }
  for (auto& x : sum) x /= static_cast<long double>(count);
  return sum;
}

LVec oracle_vector(const LoadedBundle& bundle, const ScoreRecord& record, std::size_t t,
                   std::vector<WeightedLabel>* support) {
  const auto& order = bundle.catalog.train_order();
  if (record.scores.size() != order.size()) throw Error(ErrorCode::DimensionMismatch, "score width");
  if (t < 1 || t > order.size()) throw Error(ErrorCode::InvalidArgument, "T out of range");
  std::vector<std::pair<double, LabelId>> all;
  for (std::size_t i = 0; i < order.size(); ++i) all.emplace_back(record.scores[i], order[i]);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::pair<double, LabelId>> top;
  for (const auto& entry : all) {
    if (top.size() == t) break;
    if (entry.first > 0.0) top.push_back(entry);
  }
  if (top.empty()) throw Error(ErrorCode::DegenerateDistribution, "no positive score");
  long double z = 0.0L;
  for (const auto& entry : top) z += entry.first;
  LVec f(bundle.table.dimension(), 0.0L);
  for (const auto& [p, id] : top) {
    const LVec mean = oracle_mean(bundle, id);
    for (std::size_t d = 0; d < f.size(); ++d) f[d] += (static_cast<long double>(p) / z) * mean[d];
    if (support != nullptr) support->push_back({id, static_cast<double>(static_cast<long double>(p) / z)});
  }
  return f;
}

long double lnorm(const LVec& v) {
  long double s = 0.0L;
  for (auto x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

ConseVector oracle_conse_vector(const LoadedBundle& bundle, const ScoreRecord& record, std::size_t t) {
  ConseVector out;
  out.image_id = record.image_id;
  const LVec f = oracle_vector(bundle, record, t, &out.support);
  for (auto x : f) out.vector.push_back(static_cast<double>(x));
  out.norm = static_cast<double>(lnorm(f));
  return out;
}

ConseVector oracle_conse_vector(const LoadedBundle& bundle, const std::string& image_id, std::size_t t) {
  return oracle_conse_vector(bundle, find_record(bundle, image_id), t);
}

RankedPrediction oracle_conse(const LoadedBundle& bundle, const ScoreRecord& record, std::size_t t,
                              CandidateMode mode) {
  const LVec f = oracle_vector(bundle, record, t, nullptr);
  const long double fn = lnorm(f);
  if (fn == 0.0L) throw Error(ErrorCode::ZeroConseVector, "zero ConSE vector");

  std::vector<ScoredLabel> ranked;
  for (const auto& label : bundle.catalog.labels()) {
    if (label.split == Split::Train && mode == CandidateMode::TestOnly) continue;
    long double best = -2.0L;
    for (const auto& term : label.synonyms) {
      auto w = bundle.table.find(term);
      if (!w) continue;
      long double dot = 0.0L;
      long double wn = 0.0L;
      for (std::size_t d = 0; d < f.size(); ++d) {
        dot += f[d] * (*w)[d];
        wn += static_cast<long double>((*w)[d]) * (*w)[d];
      }
      best = std::max(best, dot / (fn * std::sqrt(wn)));
    }
    ranked.push_back({label.id, static_cast<double>(best)});
  }
  if (ranked.empty()) throw Error(ErrorCode::EmptyCandidateSet, "no candidates");
  std::sort(ranked.begin(), ranked.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    return a.score > b.score || (a.score == b.score && a.label_id < b.label_id);
  });
  return {record.image_id, std::move(ranked)};
}

RankedPrediction oracle_conse(const LoadedBundle& bundle, const std::string& image_id, std::size_t t,
                              CandidateMode mode) {
  return oracle_conse(bundle, find_record(bundle, image_id), t, mode);
}

}  // namespace conse::synth
