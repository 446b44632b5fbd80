//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "kse/inference.hpp"
#include "kse/model_io.hpp"

namespace kse {
namespace {

double index_log2_term(int q) { return q <= 1 ? 0.0 : std::log2(q); }

// Formula-exact compressed size of one layer in bits: centroid floats plus
// N * log2(q_c) index bits per channel.
double compressed_bits_exact(const CompressedLayer& layer) {
  double ks = static_cast<double>(layer.kernel_size());
  double bits = 0.0;
  for (std::uint16_t qc : layer.q)
    bits += static_cast<double>(qc) * ks * 32.0 +
            static_cast<double>(layer.n_filters) * index_log2_term(qc);
  return bits;
}

nlohmann::json json_ratio(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

std::string format_ratio(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string format_bits(double bits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", bits);
  return buf;
}

void check_same_architecture(const ModelGraph& dense,
                             const ModelGraph& compressed) {
  if (dense.layers.size() != compressed.layers.size())
    fail(errc::invalid_argument, "models differ in layer count");
  if (!(dense.input_shape == compressed.input_shape))
    fail(errc::invalid_argument, "models differ in input shape");
  for (std::size_t i = 0; i < dense.layers.size(); ++i) {
    const LayerSpec& a = dense.layers[i];
    const LayerSpec& b = compressed.layers[i];
    std::string where = "layer " + std::to_string(i);
    if (a.kind != b.kind)
      fail(errc::invalid_argument, where + ": layer kinds differ");
    if (!(a.geometry == b.geometry))
      fail(errc::invalid_argument, where + ": geometries differ");
    if (a.weight_bearing() &&
        (a.out_channels() != b.out_channels() ||
         a.in_channels() != b.in_channels() || a.kernel_h() != b.kernel_h() ||
         a.kernel_w() != b.kernel_w()))
      fail(errc::invalid_argument, where + ": weight dims differ");
  }
}

}  // namespace

double compression_ratio(const CompressedLayer& layer) {
  layer.validate();
  double ks = static_cast<double>(layer.kernel_size());
  double numer =
      static_cast<double>(layer.n_filters) * layer.in_channels * ks;
  double denom = 0.0;
  for (std::uint16_t qc : layer.q)
    denom += static_cast<double>(qc) * ks +
             static_cast<double>(layer.n_filters) * index_log2_term(qc) / 32.0;
  if (denom == 0.0) {
    std::cerr << "warning: fully pruned layer; compression ratio is infinite\n";
    return std::numeric_limits<double>::infinity();
  }
  return numer / denom;
}

double acceleration_ratio(const CompressedLayer& layer) {
  layer.validate();
  std::uint64_t sum_q = layer.total_kernels();
  double numer =
      static_cast<double>(layer.n_filters) * static_cast<double>(layer.in_channels);
  if (sum_q == 0) {
    std::cerr << "warning: fully pruned layer; acceleration ratio is infinite\n";
    return std::numeric_limits<double>::infinity();
  }
  return numer / static_cast<double>(sum_q);
}

RatioReport model_report(const ModelGraph& dense, const ModelGraph& compressed,
                         const Shape3& input_shape) {
  if (dense.has_compressed_payload())
    fail(errc::state, "reference model must be dense");
  dense.validate();
  compressed.validate();
  check_same_architecture(dense, compressed);

  FlopCount flops_dense = count_flops(dense, input_shape);
  FlopCount flops_comp = count_flops(compressed, input_shape);

  RatioReport report;
  for (int i = 0; i < static_cast<int>(dense.layers.size()); ++i) {
    const LayerSpec& d = dense.layers[static_cast<std::size_t>(i)];
    const LayerSpec& c = compressed.layers[static_cast<std::size_t>(i)];
    if (!d.weight_bearing()) continue;

    LayerRatio row;
    row.layer_id = i;
    row.name = d.name;
    row.nc = static_cast<std::uint64_t>(d.out_channels()) * d.in_channels();
    row.params_dense =
        row.nc * static_cast<std::uint64_t>(d.kernel_h()) * d.kernel_w();
    row.flops_dense =
        flops_dense.layers[static_cast<std::size_t>(i)].multiply_adds;
    row.flops_compressed =
        flops_comp.layers[static_cast<std::size_t>(i)].multiply_adds;
    if (c.has_compressed_payload()) {
      const CompressedLayer& cl = *c.compressed;
      row.compressed = true;
      row.params_compressed_bits = compressed_bits_exact(cl);
      row.storage_bits_on_disk = compressed_section_bits(cl);
      row.r_comp = compression_ratio(cl);
      row.r_acce = acceleration_ratio(cl);
      row.sum_q = cl.total_kernels();
    } else {
      row.params_compressed_bits = static_cast<double>(row.params_dense) * 32.0;
      row.storage_bits_on_disk = row.params_dense * 32;
      row.r_comp = 1.0;
      row.r_acce = 1.0;
      row.sum_q = row.nc;
    }
    report.params_dense_total += row.params_dense;
    report.params_compressed_bits_total += row.params_compressed_bits;
    report.layers.push_back(std::move(row));
  }

  report.flops_dense_total = flops_dense.total_multiply_adds;
  report.flops_compressed_total = flops_comp.total_multiply_adds;
  report.r_comp_model =
      report.params_compressed_bits_total == 0.0
          ? std::numeric_limits<double>::infinity()
          : static_cast<double>(report.params_dense_total) * 32.0 /
                report.params_compressed_bits_total;
  report.r_acce_model =
      report.flops_compressed_total == 0
          ? std::numeric_limits<double>::infinity()
          : static_cast<double>(report.flops_dense_total) /
                static_cast<double>(report.flops_compressed_total);

  // Echo the compression settings recorded by compress_model, if present.
  for (const auto& [key, value] : compressed.metadata)
    if (key.rfind("kse.", 0) == 0) report.config_echo[key.substr(4)] = value;
  return report;
}

std::string render_report_text(const RatioReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-4s %-12s %14s %14s %8s %14s %16s %8s\n",
                "id", "name", "FLOPs dense", "FLOPs comp", "r_acce",
                "#Param dense", "#Param comp", "r_comp");
  out << line;
  for (const LayerRatio& row : report.layers) {
    std::snprintf(line, sizeof(line),
                  "%-4d %-12s %14llu %14llu %8s %14llu %16s %8s\n",
                  row.layer_id, row.name.c_str(),
                  static_cast<unsigned long long>(row.flops_dense),
                  static_cast<unsigned long long>(row.flops_compressed),
                  format_ratio(row.r_acce).c_str(),
                  static_cast<unsigned long long>(row.params_dense),
                  (format_bits(row.params_compressed_bits / 32.0) +
                   (row.compressed ? "" : " (dense)"))
                      .c_str(),
                  format_ratio(row.r_comp).c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "%-17s %14llu %14llu %8s %14llu %16s %8s\n", "model",
                static_cast<unsigned long long>(report.flops_dense_total),
                static_cast<unsigned long long>(report.flops_compressed_total),
                format_ratio(report.r_acce_model).c_str(),
                static_cast<unsigned long long>(report.params_dense_total),
                format_bits(report.params_compressed_bits_total / 32.0).c_str(),
                format_ratio(report.r_comp_model).c_str());
  out << line;
  out << "FLOPs (r_acce): multiply-adds, channel-fusion additions excluded; "
         "#Param (r_comp): 32-bit-parameter equivalents, biases excluded.\n";
  if (!report.config_echo.empty()) {
    out << "config:";
    for (const auto& [key, value] : report.config_echo)
      out << " " << key << "=" << value;
    out << "\n";
  }
  return out.str();
}

std::string render_report_json(const RatioReport& report) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const LayerRatio& row : report.layers) {
    nlohmann::json r;
    r["layer_id"] = row.layer_id;
    r["name"] = row.name;
    r["compressed"] = row.compressed;
    r["params_dense"] = row.params_dense;
    r["params_compressed_bits"] = row.params_compressed_bits;
    r["storage_bits_on_disk"] = row.storage_bits_on_disk;
    r["r_comp"] = json_ratio(row.r_comp);
    r["flops_dense"] = row.flops_dense;
    r["flops_compressed"] = row.flops_compressed;
    r["r_acce"] = json_ratio(row.r_acce);
    r["sum_q"] = row.sum_q;
    r["nc"] = row.nc;
    j["layers"].push_back(std::move(r));
  }
  j["totals"]["params_dense"] = report.params_dense_total;
  j["totals"]["params_compressed_bits"] = report.params_compressed_bits_total;
  j["totals"]["flops_dense"] = report.flops_dense_total;
  j["totals"]["flops_compressed"] = report.flops_compressed_total;
  j["totals"]["r_comp"] = json_ratio(report.r_comp_model);
  j["totals"]["r_acce"] = json_ratio(report.r_acce_model);
  j["config"] = report.config_echo;
  return j.dump(2) + "\n";
}

}  // namespace kse
