//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#include "kse/dataset.hpp"

#include <cmath>
#include <filesystem>

#include "io_util.hpp"

namespace kse {
namespace {

using nlohmann::json;

std::string item_file_name(std::size_t i) {
  std::string digits = std::to_string(i);
  return "img_" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') +
         digits + ".bin";
}

}  // namespace

void Dataset::validate() const {
  if (shape.channels < 1 || shape.height < 1 || shape.width < 1)
    fail(errc::invalid_argument, "dataset shape must be positive");
  if (labels.size() != images.size())
    fail(errc::invalid_argument, "dataset label count must match image count");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FeatureStack& img = images[i];
    if (img.channels() != shape.channels || img.height() != shape.height ||
        img.width() != shape.width)
      fail(errc::invalid_argument,
           "image " + std::to_string(i) + " does not match dataset shape " +
               shape.str());
    for (float v : img.data())
      if (!std::isfinite(v))
        fail(errc::invalid_argument,
             "image " + std::to_string(i) + " holds non-finite values");
    if (labels[i] < 0)
      fail(errc::invalid_argument,
           "label " + std::to_string(i) + " must be non-negative");
  }
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  ds.validate();
  std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) fail(errc::io, "cannot create dataset directory '" + dir + "'");

  json items = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::string name = item_file_name(i);
    std::vector<std::uint8_t> blob;
    blob.reserve(ds.images[i].size() * 4);
    for (float v : ds.images[i].data()) detail::put_f32(blob, v);
    detail::write_file_bytes((root / name).string(), blob);
    items.push_back(json{{"file", name}, {"label", ds.labels[i]}});
  }

  json manifest;
  manifest["format"] = "kse-dataset";
  manifest["version"] = 1;
  manifest["shape"] = json{{"channels", ds.shape.channels},
                           {"height", ds.shape.height},
                           {"width", ds.shape.width}};
  manifest["items"] = items;
  detail::write_file_text((root / "dataset.manifest.json").string(),
                          manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  std::filesystem::path root(dir);
  std::string mpath = (root / "dataset.manifest.json").string();
  json manifest = detail::parse_json(detail::read_file_text(mpath), mpath);
  if (!manifest.is_object())
    fail(errc::parse, mpath + ": manifest must be a JSON object");
  std::string what = "dataset manifest";
  if (detail::require_string(manifest, "format", what) != "kse-dataset")
    fail(errc::parse, mpath + ": not a kse-dataset manifest");
  if (detail::require_int(manifest, "version", what) != 1)
    fail(errc::parse, mpath + ": unsupported format version");

  const json& shape = detail::require_field(manifest, "shape", what);
  Dataset ds;
  ds.shape.channels =
      static_cast<int>(detail::require_int(shape, "channels", what));
  ds.shape.height =
      static_cast<int>(detail::require_int(shape, "height", what));
  ds.shape.width = static_cast<int>(detail::require_int(shape, "width", what));
  if (ds.shape.channels < 1 || ds.shape.height < 1 || ds.shape.width < 1)
    fail(errc::parse, mpath + ": dataset shape must be positive");

  const json& items = detail::require_field(manifest, "items", what);
  if (!items.is_array()) fail(errc::parse, mpath + ": items must be an array");
  std::size_t count = ds.shape.count();
  for (const json& item : items) {
    std::string file = detail::require_string(item, "file", what);
    int label = static_cast<int>(detail::require_int(item, "label", what));
    if (label < 0) fail(errc::parse, mpath + ": labels must be non-negative");
    std::vector<std::uint8_t> blob =
        detail::read_file_bytes((root / file).string());
    if (blob.size() != count * 4)
      fail(errc::parse, file + ": image blob holds " +
                            std::to_string(blob.size()) + " bytes, shape " +
                            ds.shape.str() + " needs " +
                            std::to_string(count * 4));
    std::vector<float> pixels(count);
    detail::BlobReader reader(blob.data(), blob.size(), file);
    for (float& v : pixels) v = reader.f32();
    ds.images.emplace_back(ds.shape.channels, ds.shape.height, ds.shape.width,
                           std::move(pixels));
    ds.labels.push_back(label);
  }
  try {
    ds.validate();
  } catch (const error& e) {
    fail(errc::corrupt, std::string("dataset '") + dir + "': " + e.what());
  }
  return ds;
}

}  // namespace kse
