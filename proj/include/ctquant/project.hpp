#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctquant/chunk_store.hpp"
#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/parameters.hpp"

namespace ctquant {

enum class HistogramVariant { bulk, surface, outer, inner };

inline constexpr std::array<HistogramVariant, 4> kHistogramVariants{
    HistogramVariant::bulk, HistogramVariant::surface, HistogramVariant::outer, HistogramVariant::inner};

[[nodiscard]] constexpr std::string_view to_string(HistogramVariant v) noexcept {
    switch (v) {
        case HistogramVariant::bulk: return "bulk";
        case HistogramVariant::surface: return "surface";
        case HistogramVariant::outer: return "outer";
        case HistogramVariant::inner: return "inner";
    }
    return "bulk";
}

[[nodiscard]] inline HistogramVariant parse_histogram_variant(std::string_view s) {
    for (auto v : kHistogramVariants) {
        if (to_string(v) == s) return v;
    }
    throw Error(ErrorCode::validation, "unknown histogram variant '" + std::string(s) + "'", {"variant"});
}

/// Paths of a project tree:
///
///   <root>/analysis/  Properties.csv, {Bulk,Surface,Outer,Inner}_histogram.csv,
///                     Gradient.csv, labelList.csv
///   <root>/gray/      copies of the input TIFF planes
///   <root>/mask/      instance_mask.tiff
///   <root>/project/   <name>.vol chunk store (also holds the pipeline state)
///   <root>/report/    parameters.yml, quantification.csv, report.json
struct ProjectLayout {
    fs::path root;
    std::string name;

    [[nodiscard]] fs::path analysis_dir() const { return root / "analysis"; }
    [[nodiscard]] fs::path gray_dir() const { return root / "gray"; }
    [[nodiscard]] fs::path mask_dir() const { return root / "mask"; }
    [[nodiscard]] fs::path project_dir() const { return root / "project"; }
    [[nodiscard]] fs::path report_dir() const { return root / "report"; }

    [[nodiscard]] fs::path volume_store() const { return project_dir() / (name + ".vol"); }
    [[nodiscard]] fs::path state_file() const { return volume_store() / "pipeline_state.json"; }
    [[nodiscard]] fs::path failure_file() const { return volume_store() / "failure.json"; }
    [[nodiscard]] fs::path parameters_file() const { return report_dir() / "parameters.yml"; }
    [[nodiscard]] fs::path quantification_csv() const { return report_dir() / "quantification.csv"; }
    [[nodiscard]] fs::path report_json() const { return report_dir() / "report.json"; }
    [[nodiscard]] fs::path instance_mask() const { return mask_dir() / "instance_mask.tiff"; }
    [[nodiscard]] fs::path extracted_labels() const { return mask_dir() / "extracted_labels.tiff"; }
    [[nodiscard]] fs::path properties_csv() const { return analysis_dir() / "Properties.csv"; }
    [[nodiscard]] fs::path gradient_csv() const { return analysis_dir() / "Gradient.csv"; }
    [[nodiscard]] fs::path labellist_csv() const { return analysis_dir() / "labelList.csv"; }
    [[nodiscard]] fs::path histogram_csv(HistogramVariant v) const {
        switch (v) {
            case HistogramVariant::bulk: return analysis_dir() / "Bulk_histogram.csv";
            case HistogramVariant::surface: return analysis_dir() / "Surface_histogram.csv";
            case HistogramVariant::outer: return analysis_dir() / "Outer_histogram.csv";
            case HistogramVariant::inner: return analysis_dir() / "Inner_histogram.csv";
        }
        return analysis_dir() / "Bulk_histogram.csv";
    }

    [[nodiscard]] std::vector<fs::path> subdirs() const {
        return {analysis_dir(), gray_dir(), mask_dir(), project_dir(), report_dir()};
    }
};

/// Creates the project tree at `root`, copies the input TIFF planes into
/// gray/ and writes `params` to report/parameters.yml. An existing project
/// at `root` is replaced only when `overwrite` is set.
inline ProjectLayout create_project(const fs::path& input_dir, const fs::path& root, bool overwrite = false,
                                    const Parameters& params = {}) {
    validate(params);
    const auto planes = list_tiff_files(input_dir);
    if (planes.empty()) throw Error(ErrorCode::no_input, "no TIFF files in " + input_dir.string());

    ProjectLayout layout{fs::absolute(root).lexically_normal(), {}};
    layout.name = layout.root.filename().string();
    if (layout.name.empty()) layout.name = "project";

    if (fs::exists(layout.root) && !fs::is_empty(layout.root)) {
        if (!overwrite) throw Error(ErrorCode::already_exists, layout.root.string() + " already exists");
        if (fs::equivalent(fs::absolute(input_dir), layout.root) ||
            fs::absolute(input_dir).lexically_normal().string().starts_with(layout.root.string() + "/")) {
            throw Error(ErrorCode::validation, "input directory lies inside the project to overwrite");
        }
        for (const auto& dir : layout.subdirs()) fs::remove_all(dir);
    }
    for (const auto& dir : layout.subdirs()) fs::create_directories(dir);
    for (const auto& plane : planes) {
        fs::copy_file(plane, layout.gray_dir() / plane.filename(), fs::copy_options::overwrite_existing);
    }
    save_parameters(layout.parameters_file(), params);
    return layout;
}

/// Opens an existing project tree; the store name is taken from the single
/// `*.vol` entry under project/, or from the root directory name.
[[nodiscard]] inline ProjectLayout load_project(const fs::path& root) {
    ProjectLayout layout{fs::absolute(root).lexically_normal(), {}};
    for (const auto& dir : layout.subdirs()) {
        if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "not a project: missing " + dir.string());
    }
    layout.name = layout.root.filename().string();
    for (const auto& entry : fs::directory_iterator(layout.project_dir())) {
        if (entry.is_directory() && entry.path().extension() == ".vol") {
            layout.name = entry.path().stem().string();
            break;
        }
    }
    return layout;
}

}  // namespace ctquant
