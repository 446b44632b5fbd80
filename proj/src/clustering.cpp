//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kse/parallel.hpp"

namespace kse {
namespace {

// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer; decorrelates per-channel streams drawn from one seed.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    sq += diff * diff;
  }
  return sq;
}

// Nearest centroid of point p; ties go to the lower centroid id.
int nearest_centroid(const std::vector<double>& p,
                     const std::vector<std::vector<double>>& centroids,
                     double* best_sq = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(centroids.size()); ++j) {
    double d = sq_dist(p, centroids[static_cast<std::size_t>(j)]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (best_sq) *best_sq = best_d;
  return best;
}

// Distance-weighted seeding: first centroid uniform, then each next point is
// chosen with probability proportional to its squared distance to the
// nearest centroid picked so far.
std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& points, int q,
    std::mt19937_64& rng) {
  std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(q));
  std::size_t first = static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
  if (first >= n) first = n - 1;
  centroids.push_back(points[first]);

  // d2[i]: squared distance from point i to the nearest chosen centroid.
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], centroids[0]);
  while (centroids.size() < static_cast<std::size_t>(q)) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total == 0.0) {
      // All remaining mass sits on already-chosen points; fall back to a
      // uniform draw (duplicates are later separated by empty-cluster repair).
      pick = static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
      if (pick >= n) pick = n - 1;
    } else {
      double target = u01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(points[i], centroids.back()));
  }
  return centroids;
}

}  // namespace

void CompressionConfig::validate() const {
  if (granularity < 2)
    fail(errc::config, "granularity G must be >= 2, got " +
                           std::to_string(granularity));
  if (k_neighbors < 1) fail(errc::config, "k_neighbors must be >= 1");
  if (alpha < 0.0) fail(errc::config, "alpha must be >= 0");
  if (kmeans_max_iters < 1) fail(errc::config, "kmeans_max_iters must be >= 1");
  if (!(kmeans_tol > 0.0)) fail(errc::config, "kmeans_tol must be > 0");
  if (workers < 0) fail(errc::config, "workers must be >= 0");
}

int kernel_count(double v, int n_filters, const CompressionConfig& cfg) {
  cfg.validate();
  if (!(v >= 0.0 && v <= 1.0))
    fail(errc::invalid_argument, "indicator must lie in [0, 1]");
  if (n_filters < 1) fail(errc::invalid_argument, "n_filters must be >= 1");

  int g = cfg.granularity;
  double vg = v * static_cast<double>(g);
  if (std::floor(vg) == 0.0) return 0;          // prune the channel
  int ceil_vg = static_cast<int>(std::ceil(vg));
  if (ceil_vg >= g) return n_filters;           // keep every kernel
  long long exponent = static_cast<long long>(g) - ceil_vg + cfg.shift;
  long long q;
  if (exponent <= 0) {
    q = n_filters;  // divider <= 1 can only enlarge; clamp to N
  } else if (exponent >= 63) {
    q = 1;  // divider overflows 2^63; ceil(N / huge) = 1 for N >= 1
  } else {
    long long div = 1LL << exponent;
    q = (static_cast<long long>(n_filters) + div - 1) / div;  // ceil
  }
  return static_cast<int>(std::clamp(q, 0LL, static_cast<long long>(n_filters)));
}

ClusterResult kmeans_kernels(const std::vector<std::vector<double>>& kernels,
                             int q, const CompressionConfig& cfg) {
  cfg.validate();
  int n = static_cast<int>(kernels.size());
  if (n < 1) fail(errc::invalid_argument, "k-means needs at least one point");
  if (q < 1 || q > n)
    fail(errc::invalid_argument, "cluster count " + std::to_string(q) +
                                     " out of [1, " + std::to_string(n) + "]");
  std::size_t dim = kernels[0].size();
  if (dim == 0) fail(errc::invalid_argument, "k-means points must be non-empty");
  for (const std::vector<double>& p : kernels)
    if (p.size() != dim)
      fail(errc::invalid_argument, "k-means points must share one dimension");

  std::mt19937_64 rng(cfg.kmeans_seed);
  ClusterResult r;
  r.centroids = seed_centroids(kernels, q, rng);
  r.assignments.assign(static_cast<std::size_t>(n), 0);

  std::vector<int> counts(static_cast<std::size_t>(q), 0);
  std::vector<std::vector<double>> sums(
      static_cast<std::size_t>(q), std::vector<double>(dim, 0.0));

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.kmeans_max_iters; ++iter) {
    // Assignment step.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      double best_sq = 0.0;
      int id = nearest_centroid(kernels[static_cast<std::size_t>(i)],
                                r.centroids, &best_sq);
      r.assignments[static_cast<std::size_t>(i)] =
          static_cast<std::uint16_t>(id + 1);
      inertia += best_sq;
    }

    // Empty-cluster repair: steal the member farthest from its centroid.
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint16_t a : r.assignments) ++counts[a - 1];
    for (int j = 0; j < q; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      int worst = -1;
      double worst_sq = -1.0;
      for (int i = 0; i < n; ++i) {
        int owner = r.assignments[static_cast<std::size_t>(i)] - 1;
        if (counts[static_cast<std::size_t>(owner)] < 2) continue;
        double d = sq_dist(kernels[static_cast<std::size_t>(i)],
                           r.centroids[static_cast<std::size_t>(owner)]);
        if (d > worst_sq) {
          worst_sq = d;
          worst = i;
        }
      }
      if (worst < 0)
        fail(errc::internal, "k-means could not repair an empty cluster");
      int owner = r.assignments[static_cast<std::size_t>(worst)] - 1;
      --counts[static_cast<std::size_t>(owner)];
      ++counts[static_cast<std::size_t>(j)];
      r.assignments[static_cast<std::size_t>(worst)] =
          static_cast<std::uint16_t>(j + 1);
      r.centroids[static_cast<std::size_t>(j)] =
          kernels[static_cast<std::size_t>(worst)];
      // Inertia bookkeeping: the stolen point now sits on its centroid.
      inertia -= worst_sq;
    }

    r.inertia_history.push_back(inertia);
    if (inertia > prev_inertia + 1e-12)
      fail(errc::internal, "k-means inertia increased across an iteration");
    prev_inertia = inertia;
    r.inertia = inertia;

    // Update step.
    for (std::vector<double>& s : sums) std::fill(s.begin(), s.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int j = r.assignments[static_cast<std::size_t>(i)] - 1;
      ++counts[static_cast<std::size_t>(j)];
      const std::vector<double>& p = kernels[static_cast<std::size_t>(i)];
      std::vector<double>& s = sums[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < dim; ++t) s[t] += p[t];
    }
    double moved = 0.0;
    for (int j = 0; j < q; ++j) {
      std::vector<double> next(dim);
      for (std::size_t t = 0; t < dim; ++t)
        next[t] = sums[static_cast<std::size_t>(j)][t] /
                  static_cast<double>(counts[static_cast<std::size_t>(j)]);
      moved = std::max(
          moved, std::sqrt(sq_dist(next, r.centroids[static_cast<std::size_t>(j)])));
      r.centroids[static_cast<std::size_t>(j)] = std::move(next);
    }
    if (moved < cfg.kmeans_tol) break;
  }

  // Final assignment against the last centroid update.
  double inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    double best_sq = 0.0;
    int id = nearest_centroid(kernels[static_cast<std::size_t>(i)],
                              r.centroids, &best_sq);
    r.assignments[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(id + 1);
    inertia += best_sq;
  }
  // Keep the no-empty-cluster invariant after the final reassignment.
  std::fill(counts.begin(), counts.end(), 0);
  for (std::uint16_t a : r.assignments) ++counts[a - 1];
  for (int j = 0; j < q; ++j) {
    if (counts[static_cast<std::size_t>(j)] > 0) continue;
    int worst = -1;
    double worst_sq = -1.0;
    for (int i = 0; i < n; ++i) {
      int owner = r.assignments[static_cast<std::size_t>(i)] - 1;
      if (counts[static_cast<std::size_t>(owner)] < 2) continue;
      double d = sq_dist(kernels[static_cast<std::size_t>(i)],
                         r.centroids[static_cast<std::size_t>(owner)]);
      if (d > worst_sq) {
        worst_sq = d;
        worst = i;
      }
    }
    if (worst < 0)
      fail(errc::internal, "k-means could not repair an empty cluster");
    int owner = r.assignments[static_cast<std::size_t>(worst)] - 1;
    --counts[static_cast<std::size_t>(owner)];
    ++counts[static_cast<std::size_t>(j)];
    r.assignments[static_cast<std::size_t>(worst)] =
        static_cast<std::uint16_t>(j + 1);
    r.centroids[static_cast<std::size_t>(j)] =
        kernels[static_cast<std::size_t>(worst)];
    inertia -= worst_sq;
  }
  if (inertia > prev_inertia + 1e-12)
    fail(errc::internal, "k-means inertia increased at the final step");
  r.inertia = inertia;
  r.inertia_history.push_back(inertia);
  return r;
}

CompressedLayer compress_layer(const WeightTensor& w, const KseReport& report,
                               const CompressionConfig& cfg) {
  cfg.validate();
  report.validate();
  if (report.in_channels != w.in_channels() ||
      report.n_filters != w.n_filters())
    fail(errc::invalid_argument,
         "report shape does not match the layer weights");
  int n = w.n_filters();
  int c_count = w.in_channels();
  if (n > 0xffff)
    fail(errc::invalid_argument, "layers beyond 65535 filters are unsupported");

  CompressedLayer cl;
  cl.n_filters = n;
  cl.in_channels = c_count;
  cl.kernel_h = w.kernel_h();
  cl.kernel_w = w.kernel_w();
  cl.q.resize(static_cast<std::size_t>(c_count));
  cl.centroids.resize(static_cast<std::size_t>(c_count));
  cl.index.resize(static_cast<std::size_t>(c_count));

  std::size_t ks = static_cast<std::size_t>(w.kernel_size());
  parallel_for(static_cast<std::size_t>(c_count), cfg.workers, [&](std::size_t ci) {
    int c = static_cast<int>(ci);
    int q = kernel_count(report.indicator[ci], n, cfg);
    cl.q[ci] = static_cast<std::uint16_t>(q);
    if (q == 0) return;  // pruned: no centroids, no index

    if (q == n) {
      // Keep-all channel: verbatim kernels, identity assignment.
      cl.centroids[ci].reserve(static_cast<std::size_t>(n) * ks);
      for (int f = 0; f < n; ++f) {
        std::span<const float> k = w.kernel(f, c);
        cl.centroids[ci].insert(cl.centroids[ci].end(), k.begin(), k.end());
      }
      if (q >= 2) {
        cl.index[ci].resize(static_cast<std::size_t>(n));
        for (int f = 0; f < n; ++f)
          cl.index[ci][static_cast<std::size_t>(f)] =
              static_cast<std::uint16_t>(f + 1);
      }
      return;
    }

    std::vector<std::vector<double>> points(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) {
      std::span<const float> k = w.kernel(f, c);
      points[static_cast<std::size_t>(f)].assign(k.begin(), k.end());
    }
    CompressionConfig channel_cfg = cfg;
    channel_cfg.kmeans_seed = mix64(cfg.kmeans_seed ^ mix64(ci));
    ClusterResult res = kmeans_kernels(points, q, channel_cfg);

    cl.centroids[ci].resize(static_cast<std::size_t>(q) * ks);
    for (int j = 0; j < q; ++j)
      for (std::size_t t = 0; t < ks; ++t)
        cl.centroids[ci][static_cast<std::size_t>(j) * ks + t] =
            static_cast<float>(res.centroids[static_cast<std::size_t>(j)][t]);
    if (q >= 2) cl.index[ci] = std::move(res.assignments);
  });

  cl.validate();
  return cl;
}

ModelGraph compress_model(const ModelGraph& m,
                          const std::vector<KseReport>& reports,
                          const CompressionConfig& cfg) {
  cfg.validate();
  if (m.has_compressed_payload())
    fail(errc::state, "model already carries compressed payloads");
  m.validate();

  ModelGraph out = m;
  for (const KseReport& report : reports) {
    if (report.layer_id < 0 ||
        report.layer_id >= static_cast<int>(out.layers.size()))
      fail(errc::invalid_argument,
           "report references layer " + std::to_string(report.layer_id) +
               " outside the model");
    LayerSpec& layer = out.layers[static_cast<std::size_t>(report.layer_id)];
    std::string where = "layer " + std::to_string(report.layer_id) +
                        (layer.name.empty() ? "" : " (" + layer.name + ")");
    if (!layer.weight_bearing())
      fail(errc::invalid_argument, where + ": not a weight-bearing layer");
    if (layer.compress_exempt) continue;  // exempt layers stay dense
    if (!layer.weights) fail(errc::state, where + ": no dense payload");
    try {
      layer.compressed = compress_layer(*layer.weights, report, cfg);
    } catch (const error& e) {
      fail(e.code(), where + ": " + e.what());
    }
    layer.weights.reset();
  }

  // Every non-exempt weight-bearing layer must have been covered.
  for (int i = 0; i < static_cast<int>(out.layers.size()); ++i) {
    const LayerSpec& layer = out.layers[static_cast<std::size_t>(i)];
    if (layer.weight_bearing() && !layer.compress_exempt && !layer.compressed)
      fail(errc::invalid_argument,
           "no report covers compressible layer " + std::to_string(i));
  }

  out.metadata["kse.granularity"] = std::to_string(cfg.granularity);
  out.metadata["kse.shift"] = std::to_string(cfg.shift);
  out.metadata["kse.k_neighbors"] = std::to_string(cfg.k_neighbors);
  out.metadata["kse.alpha"] = std::to_string(cfg.alpha);
  out.metadata["kse.kmeans_seed"] = std::to_string(cfg.kmeans_seed);
  out.validate();
  return out;
}

}  // namespace kse
