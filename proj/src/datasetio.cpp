#include "cclab/datasetio.hpp"

#include <cstring>
#include <filesystem>

#include "binio.hpp"
#include "cclab/error.hpp"

namespace cclab {

namespace {
constexpr char kMagic[8] = {'B', 'G', 'S', 'E', 'T', '1', '\0', '\0'};
constexpr std::uint8_t kConnectivity = 4;
}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  if (ds.images.size() != ds.labels.size())
    throw FormatError("dataset: image and label counts differ");
  const std::uint32_t w = ds.images.empty() ? ds.config.image_size : ds.images[0].width();
  const std::uint32_t h = ds.images.empty() ? ds.config.image_size : ds.images[0].height();
  detail::ByteWriter out;
  out.raw(kMagic, sizeof kMagic);
  out.u16(ds.format_version);
  out.u32(w);
  out.u32(h);
  out.u32(static_cast<std::uint32_t>(ds.images.size()));
  out.u8(kConnectivity);
  out.zeros(kDatasetHeaderBytes - 23);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& g = ds.images[i];
    if (g.width() != w || g.height() != h)
      throw FormatError("dataset: image " + std::to_string(i) + " has different dimensions");
    out.u32(ds.labels[i]);
    out.raw(g.bytes().data(), g.bytes().size());
  }
  return std::move(out.bytes());
}

Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes.data(), bytes.size(), "dataset");
  if (bytes.size() < kDatasetHeaderBytes) throw FormatError("dataset: truncated header");
  if (std::memcmp(in.take(sizeof kMagic), kMagic, sizeof kMagic) != 0)
    throw FormatError("dataset: bad magic (expected BGSET1)");
  Dataset ds;
  ds.format_version = in.u16();
  if (ds.format_version != kDatasetFormatVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(ds.format_version));
  const auto w = in.u32();
  const auto h = in.u32();
  const auto count = in.u32();
  if (in.u8() != kConnectivity) throw FormatError("dataset: connectivity must be 4");
  in.take(kDatasetHeaderBytes - 23);
  if (w == 0 || h == 0) throw FormatError("dataset: zero image dimensions");

  const std::size_t row_bytes = (std::size_t{w} + 7) / 8;
  const std::size_t record = 4 + row_bytes * h;
  if (in.remaining() != record * count)
    throw FormatError("dataset: payload holds " + std::to_string(in.remaining()) +
                      " bytes, header declares " + std::to_string(count) + " images of " +
                      std::to_string(record) + " bytes");
  ds.config.image_size = w;
  ds.config.n_images = count;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.labels.push_back(in.u32());
    const auto* p = in.take(row_bytes * h);
    ds.images.push_back(BitGrid::from_packed(w, h, std::vector<std::uint8_t>(p, p + row_bytes * h)));
  }
  return ds;
}

void verify_labels(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto actual = num_components(ds.images[i]);
    if (actual != ds.labels[i])
      throw VerificationError("dataset: image " + std::to_string(i) + " stores label " +
                                  std::to_string(ds.labels[i]) + " but has " +
                                  std::to_string(actual) + " components",
                              i);
  }
}

std::string manifest_path(const std::string& dataset_path) { return dataset_path + ".json"; }

nlohmann::json manifest_json(const Dataset& ds) {
  return {{"format", "BGSET1"},
          {"version", ds.format_version},
          {"connectivity", 4},
          {"image_count", ds.images.size()},
          {"config", ds.config}};
}

std::uint64_t write_dataset(const Dataset& ds, const std::string& path) {
  const auto bytes = serialize_dataset(ds);
  detail::write_file(path, bytes);
  detail::write_text(manifest_path(path), manifest_json(ds).dump(2) + "\n");
  return bytes.size();
}

Dataset read_dataset(const std::string& path, bool verify) {
  auto ds = deserialize_dataset(detail::read_file(path));
  const auto sidecar = manifest_path(path);
  if (std::filesystem::exists(sidecar)) {
    const auto text = detail::read_file(sidecar);
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    ds.config = j.at("config").get<GenConfig>();
    if (ds.config.n_images != ds.images.size())
      throw FormatError("dataset: manifest image count disagrees with container");
  }
  if (verify) verify_labels(ds);
  return ds;
}

}  // namespace cclab
