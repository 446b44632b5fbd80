//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/model_io.hpp"

#include <bit>
#include <filesystem>
#include <utility>

#include "io_util.hpp"

namespace kse {
namespace {

using detail::BlobReader;
using nlohmann::json;

constexpr int kFormatVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip_known_suffix(std::string base) {
  for (const char* suffix : {".manifest.json", ".bin"})
    if (ends_with(base, suffix))
      return base.substr(0, base.size() - std::string(suffix).size());
  return base;
}

// Bits needed for one packed index entry of a channel with q centroids.
int index_bit_width(int q) {
  return q <= 1 ? 0 : std::bit_width(static_cast<unsigned>(q - 1));
}

// LSB-first bit packing of (id - 1) values, flushed to a byte boundary.
void append_packed_index(std::vector<std::uint8_t>& out,
                         const std::vector<std::uint16_t>& ids, int width) {
  std::uint32_t acc = 0;
  int nbits = 0;
  for (std::uint16_t id : ids) {
    acc |= static_cast<std::uint32_t>(id - 1u) << nbits;
    nbits += width;
    while (nbits >= 8) {
      out.push_back(static_cast<std::uint8_t>(acc & 0xff));
      acc >>= 8;
      nbits -= 8;
    }
  }
  if (nbits > 0) out.push_back(static_cast<std::uint8_t>(acc & 0xff));
}

std::vector<std::uint16_t> read_packed_index(BlobReader& r, int n, int q,
                                             int channel) {
  int width = index_bit_width(q);
  std::vector<std::uint16_t> ids(static_cast<std::size_t>(n));
  std::uint32_t acc = 0;
  int nbits = 0;
  for (int i = 0; i < n; ++i) {
    while (nbits < width) {
      acc |= static_cast<std::uint32_t>(r.u8()) << nbits;
      nbits += 8;
    }
    std::uint32_t v = acc & ((1u << width) - 1u);
    acc >>= width;
    nbits -= width;
    if (static_cast<int>(v) + 1 > q)
      fail(errc::corrupt, "index entry " + std::to_string(v + 1) +
                              " of channel " + std::to_string(channel) +
                              " exceeds q = " + std::to_string(q));
    ids[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(v + 1);
  }
  return ids;  // remaining bits of the final byte are padding
}

json shape_json(const Shape3& s) {
  return json{{"channels", s.channels}, {"height", s.height},
              {"width", s.width}};
}

Shape3 shape_from_json(const json& j, const std::string& what) {
  Shape3 s;
  s.channels = static_cast<int>(detail::require_int(j, "channels", what));
  s.height = static_cast<int>(detail::require_int(j, "height", what));
  s.width = static_cast<int>(detail::require_int(j, "width", what));
  return s;
}

void append_floats(std::vector<std::uint8_t>& blob,
                   std::span<const float> values) {
  for (float v : values) detail::put_f32(blob, v);
}

json geometry_json(const ConvGeometry& g) {
  return json{{"stride_h", g.stride_h},
              {"stride_w", g.stride_w},
              {"pad_h", g.pad_h},
              {"pad_w", g.pad_w}};
}

ConvGeometry geometry_from_json(const json& j, const std::string& what) {
  ConvGeometry g;
  g.stride_h = static_cast<int>(detail::require_int(j, "stride_h", what));
  g.stride_w = static_cast<int>(detail::require_int(j, "stride_w", what));
  g.pad_h = static_cast<int>(detail::require_int(j, "pad_h", what));
  g.pad_w = static_cast<int>(detail::require_int(j, "pad_w", what));
  return g;
}

void append_compressed_section(std::vector<std::uint8_t>& blob,
                               const CompressedLayer& cl) {
  for (std::uint16_t qc : cl.q) detail::put_u16(blob, qc);
  for (const std::vector<float>& channel : cl.centroids)
    append_floats(blob, channel);
  for (int c = 0; c < cl.in_channels; ++c)
    if (cl.q[c] >= 2)
      append_packed_index(blob, cl.index[c], index_bit_width(cl.q[c]));
}

json layer_to_json(const LayerSpec& layer, int layer_index,
                   std::vector<std::uint8_t>& blob) {
  json j;
  j["kind"] = layer_kind_name(layer.kind);
  if (!layer.name.empty()) j["name"] = layer.name;
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::fully_connected: {
      j["filters"] = layer.out_channels();
      j["in_channels"] = layer.in_channels();
      j["kernel_h"] = layer.kernel_h();
      j["kernel_w"] = layer.kernel_w();
      j["geometry"] = geometry_json(layer.geometry);
      j["compress_exempt"] = layer.compress_exempt;
      std::size_t offset = blob.size();
      if (layer.weights) {
        j["payload"] = "dense";
        append_floats(blob, layer.weights->data());
      } else {
        j["payload"] = "compressed";
        append_compressed_section(blob, *layer.compressed);
      }
      j["offset"] = offset;
      j["bytes"] = blob.size() - offset;
      if (!layer.bias.empty()) {
        j["bias_offset"] = blob.size();
        append_floats(blob, layer.bias);
      }
      break;
    }
    case LayerKind::pool_avg:
      j["window_h"] = layer.pool_h;
      j["window_w"] = layer.pool_w;
      j["geometry"] = geometry_json(layer.geometry);
      break;
    case LayerKind::residual_add:
      j["source"] = layer.residual_source;
      break;
    case LayerKind::relu:
    case LayerKind::flatten:
      break;
  }
  (void)layer_index;
  return j;
}

CompressedLayer read_compressed_section(BlobReader& r, int n_filters,
                                        int in_channels, int kernel_h,
                                        int kernel_w,
                                        const std::string& where) {
  CompressedLayer cl;
  cl.n_filters = n_filters;
  cl.in_channels = in_channels;
  cl.kernel_h = kernel_h;
  cl.kernel_w = kernel_w;
  cl.q.resize(static_cast<std::size_t>(in_channels));
  for (int c = 0; c < in_channels; ++c) {
    cl.q[c] = r.u16();
    if (cl.q[c] > n_filters)
      fail(errc::corrupt, where + ": q[" + std::to_string(c) + "] = " +
                              std::to_string(cl.q[c]) + " exceeds N = " +
                              std::to_string(n_filters));
  }
  std::size_t ks =
      static_cast<std::size_t>(kernel_h) * static_cast<std::size_t>(kernel_w);
  cl.centroids.resize(static_cast<std::size_t>(in_channels));
  for (int c = 0; c < in_channels; ++c) {
    cl.centroids[c].resize(cl.q[c] * ks);
    for (float& v : cl.centroids[c]) v = r.f32();
  }
  cl.index.resize(static_cast<std::size_t>(in_channels));
  for (int c = 0; c < in_channels; ++c)
    if (cl.q[c] >= 2) cl.index[c] = read_packed_index(r, n_filters, cl.q[c], c);
  try {
    cl.validate();
  } catch (const error& e) {
    fail(errc::corrupt, where + ": " + e.what());
  }
  return cl;
}

LayerSpec layer_from_json(const json& j, int layer_index, BlobReader& r) {
  std::string where = "layer " + std::to_string(layer_index);
  LayerSpec layer;
  layer.kind = layer_kind_from_name(detail::require_string(j, "kind", where));
  if (j.contains("name")) layer.name = detail::require_string(j, "name", where);
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::fully_connected: {
      int n = static_cast<int>(detail::require_int(j, "filters", where));
      int c = static_cast<int>(detail::require_int(j, "in_channels", where));
      int kh = static_cast<int>(detail::require_int(j, "kernel_h", where));
      int kw = static_cast<int>(detail::require_int(j, "kernel_w", where));
      if (n < 1 || c < 1 || kh < 1 || kw < 1)
        fail(errc::parse, where + ": layer dims must be >= 1");
      layer.geometry =
          geometry_from_json(detail::require_field(j, "geometry", where), where);
      layer.compress_exempt = detail::optional_bool(j, "compress_exempt", false);
      std::size_t offset =
          static_cast<std::size_t>(detail::require_int(j, "offset", where));
      std::size_t bytes =
          static_cast<std::size_t>(detail::require_int(j, "bytes", where));
      r.seek(offset);
      std::string payload = detail::require_string(j, "payload", where);
      if (payload == "dense") {
        std::size_t count = static_cast<std::size_t>(n) * c * kh * kw;
        if (bytes != count * 4)
          fail(errc::parse,
               where + ": manifest dims need " + std::to_string(count * 4) +
                   " payload bytes but record " + std::to_string(bytes));
        std::vector<float> data(count);
        for (float& v : data) v = r.f32();
        try {
          layer.weights = WeightTensor(n, c, kh, kw, std::move(data));
        } catch (const error& e) {
          fail(errc::corrupt, where + ": " + e.what());
        }
      } else if (payload == "compressed") {
        layer.compressed = read_compressed_section(r, n, c, kh, kw, where);
        if (r.pos() - offset != bytes)
          fail(errc::parse, where + ": compressed section occupies " +
                                std::to_string(r.pos() - offset) +
                                " bytes but manifest records " +
                                std::to_string(bytes));
      } else {
        fail(errc::parse, where + ": unknown payload '" + payload + "'");
      }
      if (j.contains("bias_offset")) {
        r.seek(static_cast<std::size_t>(
            detail::require_int(j, "bias_offset", where)));
        layer.bias.resize(static_cast<std::size_t>(n));
        for (float& v : layer.bias) v = r.f32();
      }
      break;
    }
    case LayerKind::pool_avg:
      layer.pool_h =
          static_cast<int>(detail::require_int(j, "window_h", where));
      layer.pool_w =
          static_cast<int>(detail::require_int(j, "window_w", where));
      layer.geometry =
          geometry_from_json(detail::require_field(j, "geometry", where), where);
      break;
    case LayerKind::residual_add:
      layer.residual_source =
          static_cast<int>(detail::require_int(j, "source", where));
      break;
    case LayerKind::relu:
    case LayerKind::flatten:
      break;
  }
  return layer;
}

}  // namespace

std::string manifest_path(const std::string& base) {
  if (ends_with(base, ".manifest.json")) return base;
  return strip_known_suffix(base) + ".manifest.json";
}

std::string blob_path(const std::string& base) {
  if (ends_with(base, ".bin")) return base;
  return strip_known_suffix(base) + ".bin";
}

std::uint64_t compressed_section_bits(const CompressedLayer& layer) {
  std::uint64_t bits = static_cast<std::uint64_t>(layer.in_channels) * 16;
  std::uint64_t ks = static_cast<std::uint64_t>(layer.kernel_size());
  for (int c = 0; c < layer.in_channels; ++c) {
    bits += static_cast<std::uint64_t>(layer.q[c]) * ks * 32;
    std::uint64_t index_bits = static_cast<std::uint64_t>(layer.n_filters) *
                               index_bit_width(layer.q[c]);
    bits += (index_bits + 7) / 8 * 8;  // per-channel byte padding
  }
  return bits;
}

void save_model(const ModelGraph& m, const std::string& base) {
  m.validate();
  std::vector<std::uint8_t> blob;
  json layers = json::array();
  for (int i = 0; i < static_cast<int>(m.layers.size()); ++i)
    layers.push_back(layer_to_json(m.layers[i], i, blob));

  std::filesystem::path bin = blob_path(base);
  json manifest;
  manifest["format"] = "kse-model";
  manifest["version"] = kFormatVersion;
  manifest["payload"] = m.has_compressed_payload() ? "compressed" : "dense";
  manifest["input_shape"] = shape_json(m.input_shape);
  manifest["metadata"] = m.metadata;
  manifest["layers"] = layers;
  manifest["blob"] = bin.filename().string();
  manifest["blob_bytes"] = blob.size();

  detail::write_file_bytes(bin.string(), blob);
  detail::write_file_text(manifest_path(base), manifest.dump(2) + "\n");
}

ModelGraph load_model(const std::string& base) {
  std::string mpath = manifest_path(base);
  json manifest = detail::parse_json(detail::read_file_text(mpath), mpath);
  if (!manifest.is_object())
    fail(errc::parse, mpath + ": manifest must be a JSON object");
  std::string what = "manifest";
  if (detail::require_string(manifest, "format", what) != "kse-model")
    fail(errc::parse, mpath + ": not a kse-model manifest");
  if (detail::require_int(manifest, "version", what) != kFormatVersion)
    fail(errc::parse, mpath + ": unsupported format version");

  std::string blob_name = detail::require_string(manifest, "blob", what);
  std::filesystem::path bpath =
      std::filesystem::path(mpath).parent_path() / blob_name;
  std::vector<std::uint8_t> blob = detail::read_file_bytes(bpath.string());
  std::uint64_t claimed = static_cast<std::uint64_t>(
      detail::require_int(manifest, "blob_bytes", what));
  if (blob.size() != claimed)
    fail(errc::parse, bpath.string() + ": blob truncated or oversized (manifest claims " +
                          std::to_string(claimed) + " bytes, file has " +
                          std::to_string(blob.size()) + ")");

  ModelGraph m;
  m.input_shape = shape_from_json(
      detail::require_field(manifest, "input_shape", what), what);
  const json& meta = detail::require_field(manifest, "metadata", what);
  if (!meta.is_object()) fail(errc::parse, mpath + ": metadata must be an object");
  for (auto it = meta.begin(); it != meta.end(); ++it) {
    if (!it.value().is_string())
      fail(errc::parse, mpath + ": metadata values must be strings");
    m.metadata[it.key()] = it.value().get<std::string>();
  }

  const json& layers = detail::require_field(manifest, "layers", what);
  if (!layers.is_array()) fail(errc::parse, mpath + ": layers must be an array");
  BlobReader reader(blob.data(), blob.size(), bpath.string());
  for (int i = 0; i < static_cast<int>(layers.size()); ++i)
    m.layers.push_back(layer_from_json(layers[i], i, reader));

  std::string payload = detail::require_string(manifest, "payload", what);
  bool compressed = m.has_compressed_payload();
  if (payload != (compressed ? "compressed" : "dense"))
    fail(errc::parse, mpath + ": payload field does not match layer payloads");

  m.validate();
  return m;
}

void save_dense(const ModelGraph& m, const std::string& base) {
  if (m.has_compressed_payload())
    fail(errc::state, "save_dense: model carries compressed payloads");
  save_model(m, base);
}

ModelGraph load_dense(const std::string& base) {
  ModelGraph m = load_model(base);
  if (m.has_compressed_payload())
    fail(errc::state, "load_dense: '" + base + "' holds a compressed model");
  return m;
}

void save_compressed(const ModelGraph& m, const std::string& base) {
  if (!m.has_compressed_payload())
    fail(errc::state, "save_compressed: model has no compressed payloads");
  save_model(m, base);
}

ModelGraph load_compressed(const std::string& base) {
  ModelGraph m = load_model(base);
  if (!m.has_compressed_payload())
    fail(errc::state, "load_compressed: '" + base + "' holds a dense model");
  return m;
}

}  // namespace kse
