//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io_util.hpp"
#include "kse/parallel.hpp"

namespace kse {
namespace {

// Sums values in descending order so the result does not depend on the
// caller's element order (exact permutation invariance).
double ordered_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end(), std::greater<>());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

void check_channel(const WeightTensor& w, int c) {
  if (c < 0 || c >= w.in_channels())
    fail(errc::invalid_argument,
         "channel " + std::to_string(c) + " out of range [0, " +
             std::to_string(w.in_channels()) + ")");
}

}  // namespace

double kernel_sparsity(const WeightTensor& w, int c) {
  check_channel(w, c);
  std::vector<double> per_kernel(static_cast<std::size_t>(w.n_filters()));
  for (int n = 0; n < w.n_filters(); ++n) {
    double l1 = 0.0;
    for (float v : w.kernel(n, c)) l1 += std::abs(static_cast<double>(v));
    per_kernel[static_cast<std::size_t>(n)] = l1;
  }
  return ordered_sum(std::move(per_kernel));
}

NeighborMatrix knn_distance_matrix(const WeightTensor& w, int c, int k) {
  check_channel(w, c);
  int n = w.n_filters();
  if (n < 2)
    fail(errc::degenerate,
         "kNN distance matrix needs at least 2 kernels, layer has " +
             std::to_string(n));
  if (k < 1) fail(errc::invalid_argument, "k must be >= 1");

  NeighborMatrix a;
  a.n = n;
  a.k = std::min(k, n - 1);
  a.a.assign(static_cast<std::size_t>(n) * n, 0.0);

  // Pairwise Euclidean distances over flattened kernels.
  std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::span<const float> ki = w.kernel(i, c);
    for (int j = i + 1; j < n; ++j) {
      std::span<const float> kj = w.kernel(j, c);
      double sq = 0.0;
      for (std::size_t t = 0; t < ki.size(); ++t) {
        double diff = static_cast<double>(ki[t]) - static_cast<double>(kj[t]);
        sq += diff * diff;
      }
      double d = std::sqrt(sq);
      dist[static_cast<std::size_t>(i) * n + j] = d;
      dist[static_cast<std::size_t>(j) * n + i] = d;
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    // Ties go to the lower index; std::sort on (distance, index) is total.
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      double dx = dist[static_cast<std::size_t>(i) * n + x];
      double dy = dist[static_cast<std::size_t>(i) * n + y];
      return dx != dy ? dx < dy : x < y;
    });
    for (int t = 0; t < a.k; ++t) {
      int j = order[static_cast<std::size_t>(t)];
      a.at(i, j) = dist[static_cast<std::size_t>(i) * n + j];
    }
  }
  return a;
}

std::vector<double> density_metric(const NeighborMatrix& a) {
  std::vector<double> dm(static_cast<std::size_t>(a.n));
  std::vector<double> row(static_cast<std::size_t>(a.n));
  for (int i = 0; i < a.n; ++i) {
    for (int j = 0; j < a.n; ++j) row[static_cast<std::size_t>(j)] = a.at(i, j);
    dm[static_cast<std::size_t>(i)] = ordered_sum(row);
  }
  return dm;
}

double kernel_entropy(const NeighborMatrix& a) {
  if (a.n < 1) fail(errc::invalid_argument, "empty neighbor matrix");
  double upper = std::log2(static_cast<double>(a.n));
  std::vector<double> dm = density_metric(a);
  std::sort(dm.begin(), dm.end(), std::greater<>());
  double d = 0.0;
  for (double v : dm) d += v;
  if (d == 0.0) return upper;  // identical kernels: uniform limit
  double e = 0.0;
  for (double v : dm) {
    if (v == 0.0) continue;  // 0 * log 0 = 0
    double p = v / d;
    e -= p * std::log2(p);
  }
  return std::clamp(e, 0.0, upper);
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty())
    fail(errc::invalid_argument, "cannot normalize an empty vector");
  for (double v : values)
    if (!std::isfinite(v))
      fail(errc::invalid_argument, "cannot normalize non-finite values");
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size());
  if (lo == hi) {
    std::fill(out.begin(), out.end(), 1.0);  // constant vector: keep all
    return out;
  }
  double range = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = std::clamp((values[i] - lo) / range, 0.0, 1.0);
  return out;
}

double kse_indicator(double s_norm, double e_norm, double alpha) {
  if (!(s_norm >= 0.0 && s_norm <= 1.0) || !(e_norm >= 0.0 && e_norm <= 1.0))
    fail(errc::invalid_argument, "indicator inputs must lie in [0, 1]");
  if (alpha < 0.0) fail(errc::invalid_argument, "alpha must be >= 0");
  return std::sqrt(s_norm / (1.0 + alpha * e_norm));
}

void KseReport::validate() const {
  if (in_channels < 1 || n_filters < 2)
    fail(errc::invalid_argument, "report needs C >= 1 and N >= 2");
  if (k_neighbors < 1) fail(errc::invalid_argument, "report k must be >= 1");
  if (alpha < 0.0) fail(errc::invalid_argument, "report alpha must be >= 0");
  std::size_t c = static_cast<std::size_t>(in_channels);
  if (sparsity_raw.size() != c || entropy_raw.size() != c ||
      sparsity_norm.size() != c || entropy_norm.size() != c ||
      indicator.size() != c)
    fail(errc::invalid_argument, "report vectors must all have length C");
  double upper = std::log2(static_cast<double>(n_filters));
  for (std::size_t i = 0; i < c; ++i) {
    if (!(sparsity_raw[i] >= 0.0))
      fail(errc::invalid_argument, "raw sparsity must be >= 0");
    if (!(entropy_raw[i] >= 0.0 && entropy_raw[i] <= upper))
      fail(errc::invalid_argument, "raw entropy must lie in [0, log2 N]");
    for (double v : {sparsity_norm[i], entropy_norm[i], indicator[i]})
      if (!(v >= 0.0 && v <= 1.0))
        fail(errc::invalid_argument,
             "normalized report values must lie in [0, 1]");
  }
}

KseReport analyze_layer(const WeightTensor& w, int k, double alpha) {
  if (w.n_filters() < 2)
    fail(errc::degenerate,
         "analysis needs at least 2 filters, layer has " +
             std::to_string(w.n_filters()));
  if (w.in_channels() < 1)
    fail(errc::invalid_argument, "analysis needs at least one input channel");
  if (k < 1) fail(errc::invalid_argument, "k must be >= 1");
  if (alpha < 0.0) fail(errc::invalid_argument, "alpha must be >= 0");

  KseReport r;
  r.n_filters = w.n_filters();
  r.in_channels = w.in_channels();
  r.k_neighbors = std::min(k, w.n_filters() - 1);
  r.alpha = alpha;
  std::size_t c_count = static_cast<std::size_t>(w.in_channels());
  r.sparsity_raw.resize(c_count);
  r.entropy_raw.resize(c_count);
  for (int c = 0; c < w.in_channels(); ++c) {
    r.sparsity_raw[static_cast<std::size_t>(c)] = kernel_sparsity(w, c);
    r.entropy_raw[static_cast<std::size_t>(c)] =
        kernel_entropy(knn_distance_matrix(w, c, k));
  }
  r.sparsity_norm = minmax_normalize(r.sparsity_raw);
  r.entropy_norm = minmax_normalize(r.entropy_raw);
  std::vector<double> v(c_count);
  for (std::size_t i = 0; i < c_count; ++i)
    v[i] = kse_indicator(r.sparsity_norm[i], r.entropy_norm[i], alpha);
  r.indicator = minmax_normalize(v);
  r.validate();
  return r;
}

std::vector<KseReport> analyze_model(const ModelGraph& m, int k, double alpha,
                                     int workers) {
  if (m.has_compressed_payload())
    fail(errc::state, "analysis requires a dense model");
  m.validate();

  std::vector<int> targets;
  for (int i = 0; i < static_cast<int>(m.layers.size()); ++i)
    if (m.layers[i].weight_bearing() && !m.layers[i].compress_exempt)
      targets.push_back(i);

  std::vector<KseReport> reports(targets.size());
  parallel_for(targets.size(), workers, [&](std::size_t t) {
    int i = targets[t];
    const LayerSpec& layer = m.layers[static_cast<std::size_t>(i)];
    try {
      reports[t] = analyze_layer(*layer.weights, k, alpha);
    } catch (const error& e) {
      fail(e.code(), "layer " + std::to_string(i) +
                         (layer.name.empty() ? "" : " (" + layer.name + ")") +
                         ": " + e.what());
    }
    reports[t].layer_id = i;
    reports[t].layer_name = layer.name;
  });
  return reports;
}

void save_reports(std::span<const KseReport> reports,
                  const std::string& path) {
  std::string text;
  for (const KseReport& r : reports) {
    r.validate();
    nlohmann::json j;
    j["layer_id"] = r.layer_id;
    j["layer_name"] = r.layer_name;
    j["n_filters"] = r.n_filters;
    j["in_channels"] = r.in_channels;
    j["k_neighbors"] = r.k_neighbors;
    j["alpha"] = r.alpha;
    j["sparsity_raw"] = r.sparsity_raw;
    j["entropy_raw"] = r.entropy_raw;
    j["sparsity_norm"] = r.sparsity_norm;
    j["entropy_norm"] = r.entropy_norm;
    j["indicator"] = r.indicator;
    text += j.dump();
    text += '\n';
  }
  detail::write_file_text(path, text);
}

std::vector<KseReport> load_reports(const std::string& path) {
  std::string text = detail::read_file_text(path);
  std::vector<KseReport> reports;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string what = path + ":" + std::to_string(line_no);
    nlohmann::json j = detail::parse_json(line, what);
    KseReport r;
    r.layer_id = static_cast<int>(detail::require_int(j, "layer_id", what));
    r.layer_name = detail::require_string(j, "layer_name", what);
    r.n_filters = static_cast<int>(detail::require_int(j, "n_filters", what));
    r.in_channels =
        static_cast<int>(detail::require_int(j, "in_channels", what));
    r.k_neighbors =
        static_cast<int>(detail::require_int(j, "k_neighbors", what));
    const nlohmann::json& alpha = detail::require_field(j, "alpha", what);
    if (!alpha.is_number()) fail(errc::parse, what + ": alpha must be a number");
    r.alpha = alpha.get<double>();
    auto vec = [&](const char* key) {
      const nlohmann::json& v = detail::require_field(j, key, what);
      if (!v.is_array())
        fail(errc::parse, what + ": field '" + key + "' must be an array");
      std::vector<double> out;
      out.reserve(v.size());
      for (const nlohmann::json& x : v) {
        if (!x.is_number())
          fail(errc::parse, what + ": field '" + key + "' must hold numbers");
        out.push_back(x.get<double>());
      }
      return out;
    };
    r.sparsity_raw = vec("sparsity_raw");
    r.entropy_raw = vec("entropy_raw");
    r.sparsity_norm = vec("sparsity_norm");
    r.entropy_norm = vec("entropy_norm");
    r.indicator = vec("indicator");
    try {
      r.validate();
    } catch (const error& e) {
      fail(errc::parse, what + ": " + e.what());
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace kse
