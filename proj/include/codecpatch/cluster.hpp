#pragma once

// Offline k-means over frozen-encoder embeddings, top-L multi-label
// assignment, and the sampled multi-label discrimination loss
//   L = sum_m mean_{(u,k) in pairs_m} log(1 + exp(-y * e_u . c_k))
// with analytic gradients.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/random.hpp"

namespace codecpatch {

enum class Modality : std::uint8_t { obj = 0, vid = 1 };

inline std::string to_string(Modality m) { return m == Modality::obj ? "obj" : "vid"; }

inline Modality parse_modality(const std::string& s) {
  if (s == "obj") return Modality::obj;
  if (s == "vid") return Modality::vid;
  throw ConfigError("unknown modality '" + s + "'");
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double inner(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Unit-norm sample embedding. The constructor normalizes its input.
class Embedding {
 public:
  Embedding(std::vector<double> values, Modality modality, std::uint64_t sample_id = 0)
      : values_(std::move(values)), modality_(modality), sample_id_(sample_id) {
    const double norm = std::sqrt(inner(values_, values_));
    if (values_.empty() || !(norm > 0.0) || !std::isfinite(norm)) {
      throw InvariantError("embedding " + std::to_string(sample_id) + " has zero or non-finite norm");
    }
    for (auto& v : values_) v /= norm;
  }

  std::span<const double> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  Modality modality() const { return modality_; }
  std::uint64_t sample_id() const { return sample_id_; }

 private:
  std::vector<double> values_;
  Modality modality_;
  std::uint64_t sample_id_;
};

struct CentroidBank {
  Modality modality = Modality::obj;
  std::size_t dim = 0;
  std::vector<double> data;  // K x dim, row-major

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t k) const { return {data.data() + k * dim, dim}; }
  std::span<double> row(std::size_t k) { return {data.data() + k * dim, dim}; }
};

// C_uni = C_obj united with C_vid.
struct UnionBank {
  CentroidBank obj{Modality::obj, 0, {}};
  CentroidBank vid{Modality::vid, 0, {}};

  const CentroidBank& of(Modality m) const { return m == Modality::obj ? obj : vid; }
  CentroidBank& of(Modality m) { return m == Modality::obj ? obj : vid; }
};

struct KMeansResult {
  CentroidBank bank;
  std::vector<double> objective_history;  // within-cluster sum after each assignment step
  std::vector<std::size_t> assignment;

  double objective() const { return objective_history.empty() ? 0.0 : objective_history.back(); }
};

namespace detail {

inline void check_batch(std::span<const Embedding> points) {
  if (points.empty()) throw ConfigError("no embeddings");
  for (const auto& p : points) {
    if (p.dim() != points.front().dim()) throw ConfigError("embedding dimensions differ");
    if (p.modality() != points.front().modality()) throw ConfigError("k-means runs on a single modality per call");
  }
}

// Nearest centroid per point; on ties the current assignment is kept, else
// the smallest index wins. Returns the objective.
inline double assign_points(std::span<const Embedding> points, const CentroidBank& bank,
                            std::vector<std::size_t>& assignment, std::vector<double>& dist, bool keep_ties) {
  double objective = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = keep_ties ? assignment[i] : 0;
    double best_d = squared_distance(points[i].values(), bank.row(best));
    for (std::size_t k = 0; k < bank.size(); ++k) {
      const double d = squared_distance(points[i].values(), bank.row(k));
      if (d < best_d || (d == best_d && !keep_ties && k < best)) {
        best_d = d;
        best = k;
      }
    }
    assignment[i] = best;
    dist[i] = best_d;
    objective += best_d;
  }
  return objective;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding. Empty clusters are re-seeded to
// the point farthest from its centroid. Stops early once assignments settle.
inline KMeansResult kmeans(std::span<const Embedding> points, std::size_t k, int iters, std::uint64_t seed) {
  detail::check_batch(points);
  if (k < 1) throw ConfigError("k must be >= 1");
  if (points.size() < k) {
    throw ConfigError("need at least k points (N=" + std::to_string(points.size()) + ", K=" + std::to_string(k) + ")");
  }
  if (iters < 0) throw ConfigError("iteration count must be >= 0");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().dim();
  KMeansResult result;
  result.bank = {points.front().modality(), dim, std::vector<double>(k * dim)};
  auto& bank = result.bank;

  Rng rng(seed);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  auto place = [&](std::size_t c, std::size_t p) {
    std::copy(points[p].values().begin(), points[p].values().end(), bank.row(c).begin());
    chosen[p] = true;
    for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], squared_distance(points[i].values(), bank.row(c)));
  };
  place(0, static_cast<std::size_t>(uniform_index(rng, n)));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double target = uniform_unit(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] <= 0.0) continue;
        pick = i;
        target -= dist[i];
        if (target < 0.0) break;
      }
    } else {
      // Remaining points coincide with chosen centroids.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    place(c, pick);
  }

  result.assignment.assign(n, 0);
  result.objective_history.push_back(detail::assign_points(points, bank, result.assignment, dist, false));

  for (int it = 0; it < iters; ++it) {
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = result.assignment[i];
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points[i].values()[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) bank.data[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
    }
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(points[i].values(), bank.row(result.assignment[i]));
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy(points[far].values().begin(), points[far].values().end(), bank.row(c).begin());
      dist[far] = 0.0;
    }

    const auto previous = result.assignment;
    result.objective_history.push_back(detail::assign_points(points, bank, result.assignment, dist, true));
    if (result.assignment == previous) break;
  }
  return result;
}

struct LabelAssignment {
  std::vector<std::size_t> positives;  // by decreasing similarity
  Modality modality = Modality::obj;
  std::uint64_t sample_id = 0;
};

// Indices of the min(L, K) centroids with the largest inner product; ties
// by smallest index.
inline LabelAssignment assign_topL(const Embedding& e, const CentroidBank& bank, std::size_t top_l = 10) {
  if (bank.size() == 0) throw ConfigError("empty centroid bank");
  if (bank.dim != e.dim()) throw ConfigError("embedding and bank dimensions differ");
  std::vector<std::pair<double, std::size_t>> scored(bank.size());
  for (std::size_t k = 0; k < bank.size(); ++k) scored[k] = {inner(e.values(), bank.row(k)), k};
  const std::size_t l = std::min(top_l, bank.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(l), scored.end(), [](auto a, auto b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  LabelAssignment out;
  out.modality = e.modality();
  out.sample_id = e.sample_id();
  for (std::size_t i = 0; i < l; ++i) out.positives.push_back(scored[i].second);
  return out;
}

inline constexpr std::size_t kVideoClusterFrames = 16;

// L2-normalize each frame embedding, concatenate, L2-normalize.
inline Embedding video_embed(std::span<const std::vector<double>> frames, std::size_t expected_frames = kVideoClusterFrames,
                             std::uint64_t sample_id = 0) {
  if (frames.size() != expected_frames) {
    throw ConfigError("expected " + std::to_string(expected_frames) + " frame embeddings, got " + std::to_string(frames.size()));
  }
  std::vector<double> concat;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].size() != frames.front().size()) throw ConfigError("frame embedding dimensions differ");
    const double norm = std::sqrt(inner(frames[f], frames[f]));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw InvariantError("frame embedding " + std::to_string(f) + " has zero or non-finite norm");
    }
    for (double v : frames[f]) concat.push_back(v / norm);
  }
  return Embedding(std::move(concat), Modality::vid, sample_id);
}

struct SampledPair {
  std::size_t sample = 0;
  std::size_t centroid = 0;  // index within the sample's modality bank
  int label = 1;             // +1 positive, -1 negative

  bool operator==(const SampledPair&) const = default;
};

// Every positive of every sample plus max(1, floor(r * (K_m - L))) distinct
// negatives drawn uniformly from the sample's non-positive centroids.
inline std::vector<SampledPair> sample_pairs(std::span<const Embedding> batch, const UnionBank& bank,
                                             std::span<const LabelAssignment> assignments, double neg_ratio,
                                             std::uint64_t seed) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (assignments.size() != batch.size()) throw ConfigError("one label assignment per sample required");
  if (!(neg_ratio > 0.0 && neg_ratio <= 1.0)) throw ConfigError("negative ratio must lie in (0, 1]");
  Rng rng(seed);
  std::vector<SampledPair> pairs;
  for (std::size_t u = 0; u < batch.size(); ++u) {
    const auto& a = assignments[u];
    const auto& centroids = bank.of(batch[u].modality());
    if (a.modality != batch[u].modality()) throw ConfigError("assignment modality differs from its sample");
    if (centroids.dim != batch[u].dim()) throw ConfigError("sample and bank dimensions differ");
    std::vector<bool> positive(centroids.size(), false);
    for (auto k : a.positives) {
      if (k >= centroids.size() || positive[k]) throw ConfigError("assignment references an invalid or repeated centroid");
      positive[k] = true;
      pairs.push_back({u, k, +1});
    }
    std::vector<std::size_t> pool;
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      if (!positive[k]) pool.push_back(k);
    }
    if (pool.empty()) continue;
    const auto wanted = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(neg_ratio * static_cast<double>(pool.size()))));
    for (std::size_t i = 0; i < wanted; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
      std::swap(pool[i], pool[j]);
      pairs.push_back({u, pool[i], -1});
    }
  }
  return pairs;
}

struct CentroidGradient {
  Modality modality = Modality::obj;
  std::size_t index = 0;
  std::vector<double> grad;
};

struct LossResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grad_e;  // per batch sample
  std::vector<CentroidGradient> grad_c;     // per sampled centroid, ordered by (modality, index)
};

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// A sample as the loss sees it: the gradient is taken with respect to these
// raw values, without re-normalization.
struct SampleView {
  std::span<const double> values;
  Modality modality = Modality::obj;

  std::size_t dim() const { return values.size(); }
};

// Loss and gradients on a fixed pair set.
inline LossResult evaluate_pairs(std::span<const SampleView> batch, const UnionBank& bank, std::span<const SampledPair> pairs) {
  LossResult out;
  out.grad_e.resize(batch.size());
  for (std::size_t u = 0; u < batch.size(); ++u) out.grad_e[u].assign(batch[u].dim(), 0.0);

  std::array<std::size_t, 2> pair_count{0, 0};
  for (const auto& p : pairs) {
    if (p.sample >= batch.size()) throw ConfigError("pair references a sample outside the batch");
    ++pair_count[static_cast<std::size_t>(batch[p.sample].modality)];
  }
  std::array<std::vector<std::vector<double>>, 2> cgrad;
  std::array<std::vector<bool>, 2> touched;
  for (int m = 0; m < 2; ++m) {
    const auto& b = bank.of(static_cast<Modality>(m));
    cgrad[m].assign(b.size(), {});
    touched[m].assign(b.size(), false);
  }

  std::array<double, 2> sums{0.0, 0.0};
  for (const auto& p : pairs) {
    const auto& e = batch[p.sample];
    const auto m = static_cast<std::size_t>(e.modality);
    const auto& centroids = bank.of(e.modality);
    if (centroids.dim != e.dim()) throw ConfigError("sample and bank dimensions differ");
    if (p.centroid >= centroids.size()) throw ConfigError("pair references a centroid outside the bank");
    const auto c = centroids.row(p.centroid);
    const double y = p.label;
    const double sigma = inner(e.values, c);
    sums[m] += softplus(-y * sigma);
    const double w = -y * logistic(-y * sigma) / static_cast<double>(pair_count[m]);
    auto& ge = out.grad_e[p.sample];
    auto& gc = cgrad[m][p.centroid];
    if (!touched[m][p.centroid]) {
      gc.assign(c.size(), 0.0);
      touched[m][p.centroid] = true;
    }
    for (std::size_t d = 0; d < c.size(); ++d) {
      ge[d] += w * c[d];
      gc[d] += w * e.values[d];
    }
  }
  for (int m = 0; m < 2; ++m) {
    if (pair_count[m] > 0) out.loss += sums[m] / static_cast<double>(pair_count[m]);
    for (std::size_t k = 0; k < cgrad[m].size(); ++k) {
      if (touched[m][k]) out.grad_c.push_back({static_cast<Modality>(m), k, std::move(cgrad[m][k])});
    }
  }
  return out;
}

inline LossResult evaluate_pairs(std::span<const Embedding> batch, const UnionBank& bank, std::span<const SampledPair> pairs) {
  std::vector<SampleView> views;
  views.reserve(batch.size());
  for (const auto& e : batch) views.push_back({e.values(), e.modality()});
  return evaluate_pairs(std::span<const SampleView>(views), bank, pairs);
}

inline LossResult discrimination_loss(std::span<const Embedding> batch, const UnionBank& bank,
                                      std::span<const LabelAssignment> assignments, double neg_ratio, std::uint64_t seed) {
  const auto pairs = sample_pairs(batch, bank, assignments, neg_ratio, seed);
  return evaluate_pairs(batch, bank, pairs);
}

}  // namespace codecpatch
