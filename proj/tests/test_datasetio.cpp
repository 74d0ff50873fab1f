#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cclab/datasetio.hpp"
#include "cclab/error.hpp"
#include "cclab/plot.hpp"
#include "oracles.hpp"

using namespace cclab;
namespace fs = std::filesystem;

namespace {

Dataset small_set(std::uint32_t image, std::uint64_t n, std::uint64_t seed = 1) {
  GenConfig c;
  c.image_size = image;
  c.shape = {ShapeKind::triangle, {2, 8}, {1, 6}};
  c.n_images = n;
  c.seed = seed;
  return gen_dataset(c);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "cclab_datasetio_test";
  fs::create_directories(dir);
  return dir / name;
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

nlohmann::json tiny_report() {
  return {
      {"id", "demo"},
      {"training_range", {10, 20}},
      {"sets",
       {{{"name", "T-a"},
         {"matched", true},
         {"mean_error", 0.05},
         {"samples", {{10, 10.5}, {15, 14}, {20, 21}}},
         {"bins", {{{"lo", 10}, {"hi", 15}, {"n", 1}, {"mean_error", 0.05}},
                   {{"lo", 15}, {"hi", 20}, {"n", 2}, {"mean_error", 0.05}}}}}}},
      {"traces",
       {{{"name", "m"},
         {"train_loss", {4.0, 2.0, 0.5}},
         {"val_loss", {5.0, 2.5, 0.7}},
         {"loss_threshold", 1.0},
         {"epochs_to_threshold", 3}}}}};
}

}  // namespace

TEST(DatasetIo, RoundTripPreservesImagesAndLabels) {
  const auto ds = small_set(37, 12);
  const auto back = deserialize_dataset(serialize_dataset(ds));
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.format_version, kDatasetFormatVersion);
}

TEST(DatasetIo, HeaderLayoutAndSizeArithmetic) {
  const auto ds = small_set(37, 12);
  const auto bytes = serialize_dataset(ds);
  // 32-byte header, then per image a u32 label and 37 rows of 5 bytes.
  EXPECT_EQ(bytes.size(), 32u + 12u * (4u + 37u * 5u));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "BGSET1");
  EXPECT_EQ(le32(bytes, 10), 37u);
  EXPECT_EQ(le32(bytes, 14), 37u);
  EXPECT_EQ(le32(bytes, 18), 12u);
  EXPECT_EQ(bytes[22], 4);
  EXPECT_EQ(le32(bytes, 32), ds.labels[0]);
}

TEST(DatasetIo, PaperScaleSizeArithmetic) {
  // 10,000 images of 256 x 256 at 8 KiB each plus the label word.
  const std::uint64_t expect = 32 + 10000ull * (4 + 256 * 32);
  EXPECT_EQ(expect, 81'960'032ull);
  const auto one = serialize_dataset(small_set(256, 1));
  EXPECT_EQ(one.size(), 32u + 4u + 8192u);
}

TEST(DatasetIo, FileRoundTripWithSidecar) {
  const auto ds = small_set(20, 5, 3);
  const auto path = scratch("roundtrip.bgset").string();
  const auto written = write_dataset(ds, path);
  EXPECT_EQ(written, fs::file_size(path));
  EXPECT_TRUE(fs::exists(manifest_path(path)));
  const auto back = read_dataset(path, true);
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.config, ds.config);
}

TEST(DatasetIo, CorruptedLabelIsReportedByIndex) {
  auto ds = small_set(24, 8, 4);
  ds.labels[5] += 1;
  try {
    verify_labels(ds);
    FAIL() << "expected a verification error";
  } catch (const VerificationError& e) {
    EXPECT_EQ(e.index(), 5u);
  }
  const auto path = scratch("corrupt.bgset").string();
  write_dataset(ds, path);
  EXPECT_NO_THROW(read_dataset(path, false));
  EXPECT_THROW(read_dataset(path, true), VerificationError);
}

TEST(DatasetIo, RejectsMalformedContainers) {
  auto bytes = serialize_dataset(small_set(16, 3));
  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  EXPECT_THROW(deserialize_dataset(bad_magic), FormatError);
  auto bad_conn = bytes;
  bad_conn[22] = 8;
  EXPECT_THROW(deserialize_dataset(bad_conn), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(deserialize_dataset(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_dataset(trailing), FormatError);
  EXPECT_THROW(read_dataset("/nonexistent/none.bgset"), Error);
}

TEST(DatasetIo, ManifestDescribesConfig) {
  const auto ds = small_set(20, 4, 8);
  const auto m = manifest_json(ds);
  EXPECT_EQ(m.at("config").get<GenConfig>(), ds.config);
}

TEST(Plot, RenderingIsDeterministicSvg) {
  const auto r = tiny_report();
  for (auto kind : {PlotKind::scatter_true_vs_pred, PlotKind::loss_curves, PlotKind::error_vs_count}) {
    const auto a = render_plot(r, kind);
    EXPECT_EQ(a, render_plot(r, kind));
    EXPECT_EQ(a.rfind("<?xml", 0), 0u) << to_string(kind);
    EXPECT_NE(a.find("</svg>"), std::string::npos);
  }
}

TEST(Plot, ScatterHasReferenceLineAndRangeBox) {
  const auto svg = render_plot(tiny_report(), PlotKind::scatter_true_vs_pred);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("<circle"), std::string::npos);
  EXPECT_NE(svg.find("T-a"), std::string::npos);
}

TEST(Plot, EmptySamplesStillRender) {
  auto r = tiny_report();
  r["sets"][0]["samples"] = nlohmann::json::array();
  const auto svg = render_plot(r, PlotKind::scatter_true_vs_pred);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("<circle"), std::string::npos);
}

TEST(Plot, MissingFieldsRaiseFormatError) {
  const nlohmann::json empty = nlohmann::json::object();
  EXPECT_THROW(render_plot(empty, PlotKind::scatter_true_vs_pred), FormatError);
  EXPECT_THROW(render_plot(empty, PlotKind::loss_curves), FormatError);
  EXPECT_THROW(render_plot(empty, PlotKind::error_vs_count), FormatError);
}

TEST(Plot, KindNamesAndFileOutput) {
  EXPECT_EQ(parse_plot_kind("loss"), PlotKind::loss_curves);
  EXPECT_EQ(parse_plot_kind(to_string(PlotKind::error_vs_count)), PlotKind::error_vs_count);
  EXPECT_THROW(parse_plot_kind("pie"), ConfigError);
  const auto path = scratch("plot.svg");
  emit_plot(tiny_report(), PlotKind::loss_curves, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(content, render_plot(tiny_report(), PlotKind::loss_curves));
}
