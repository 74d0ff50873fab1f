#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace cclab {

enum class PlotKind { scatter_true_vs_pred, loss_curves, error_vs_count };

std::string_view to_string(PlotKind kind);
PlotKind parse_plot_kind(std::string_view text);

/// Renders a static SVG 1.1 chart from an experiment report.
///
/// scatter_true_vs_pred  needs "sets" (each with "samples" [[true, pred]...]);
///                       draws y = x and, when present, the "training_range"
///                       box.
/// loss_curves           needs "traces" (train_loss / val_loss per epoch);
///                       marks each trace's loss_threshold crossing.
/// error_vs_count        needs "sets" with "bins".
///
/// Output depends only on the report (fixed precision, stable order). Throws
/// FormatError when the fields the kind needs are missing.
std::string render_plot(const nlohmann::json& report, PlotKind kind);

void emit_plot(const nlohmann::json& report, PlotKind kind, const std::filesystem::path& path);

}  // namespace cclab
