#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctquant/error.hpp"
#include "ctquant/histograms.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/quantify.hpp"
#include "ctquant/region_props.hpp"

namespace ctquant {

namespace detail {

inline std::string cell(double v) { return std::isnan(v) ? std::string() : format_number(v); }

template <class T>
T parse_integer(const std::string& s, const fs::path& path) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 0) throw std::invalid_argument(s);
        return static_cast<T>(v);
    } catch (const std::exception&) {
        throw Error(ErrorCode::validation, path.string() + ": '" + s + "' is not a nonnegative integer");
    }
}

inline double parse_double(const std::string& s, const fs::path& path) {
    if (s.empty()) return kNaN;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::validation, path.string() + ": '" + s + "' is not a number");
    }
}

inline void require_header(const CsvTable& t, const std::vector<std::string>& expected, const fs::path& path) {
    if (t.header != expected) throw Error(ErrorCode::validation, path.string() + ": unexpected columns");
}

}  // namespace detail

/// Value rounded to the six significant digits used in every output file.
[[nodiscard]] inline double round6(double v) { return std::isfinite(v) ? std::stod(format_number(v)) : v; }

// ---------------------------------------------------------------- histograms

/// Long format `label,gray_value,count`, sorted by (label, gray_value).
inline void write_histogram_table(const fs::path& path, const std::vector<RegionHistogram>& rows) {
    std::vector<const RegionHistogram*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->label < b->label; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->label == sorted[i - 1]->label) {
            throw Error(ErrorCode::validation, "duplicate histogram for label " + std::to_string(sorted[i]->label));
        }
    }
    std::string out = "label,gray_value,count\n";
    for (const auto* r : sorted) {
        const std::string label = std::to_string(r->label);
        for (const auto& [g, c] : r->counts) {
            if (c == 0) continue;
            out += label;
            out += ',';
            out += std::to_string(g);
            out += ',';
            out += std::to_string(c);
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

[[nodiscard]] inline std::vector<RegionHistogram> read_histogram_table(const fs::path& path) {
    const auto t = read_csv(path);
    detail::require_header(t, {"label", "gray_value", "count"}, path);
    std::map<Label, RegionHistogram> by_label;
    for (const auto& row : t.rows) {
        const auto label = detail::parse_integer<Label>(row[0], path);
        const auto g = detail::parse_integer<std::uint64_t>(row[1], path);
        if (g > 65535) throw Error(ErrorCode::validation, path.string() + ": gray value out of range");
        auto& h = by_label[label];
        h.label = label;
        h.counts[static_cast<GrayValue>(g)] += detail::parse_integer<std::uint64_t>(row[2], path);
    }
    std::vector<RegionHistogram> out;
    for (auto& [l, h] : by_label) out.push_back(std::move(h));
    return out;
}

// ---------------------------------------------------------------- properties

[[nodiscard]] inline std::vector<std::string> property_columns(const ExtractionParams& p) {
    std::vector<std::string> cols{"label"};
    if (p.basic_properties) {
        for (const char* c : {"volume", "surface_area", "min", "max", "mean", "centroid_z", "centroid_y", "centroid_x",
                              "equivalent_diameter"}) {
            cols.emplace_back(c);
        }
    }
    if (p.ferets) cols.insert(cols.end(), {"feret_min", "feret_max"});
    if (p.mean_max) cols.emplace_back("mean_over_max");
    if (p.inertia) cols.insert(cols.end(), {"inertia_1", "inertia_2", "inertia_3"});
    if (p.entropy) cols.emplace_back("entropy");
    if (p.aspect_ratio) cols.emplace_back("aspect_ratio");
    if (p.moments) {
        for (const auto& e : moment_exponents()) {
            cols.push_back("moment_" + std::to_string(e[0]) + std::to_string(e[1]) + std::to_string(e[2]));
        }
    }
    if (p.euler) cols.emplace_back("euler_number");
    if (p.solidity) cols.emplace_back("solidity");
    cols.emplace_back("status");
    return cols;
}

/// Properties.csv with the columns enabled by `p`, ascending label order.
inline void write_properties_csv(const fs::path& path, const std::vector<RegionProperties>& rows,
                                 const ExtractionParams& p) {
    std::vector<const RegionProperties*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->label < b->label; });
    std::string out = join_csv(property_columns(p));
    for (const auto* r : sorted) {
        std::vector<std::string> cells{std::to_string(r->label)};
        const auto put = [&](double v) { cells.push_back(detail::cell(v)); };
        if (p.basic_properties) {
            for (double v : {r->volume, r->surface_area, r->min_gray, r->max_gray, r->mean_gray, r->centroid[0],
                             r->centroid[1], r->centroid[2], r->equivalent_diameter}) {
                put(v);
            }
        }
        if (p.ferets) {
            put(r->feret_min);
            put(r->feret_max);
        }
        if (p.mean_max) put(r->mean_over_max);
        if (p.inertia) {
            for (double v : r->inertia) put(v);
        }
        if (p.entropy) put(r->entropy);
        if (p.aspect_ratio) put(r->aspect_ratio);
        if (p.moments) {
            for (std::size_t i = 0; i < moment_exponents().size(); ++i) {
                put(i < r->moments.size() ? r->moments[i] : kNaN);
            }
        }
        if (p.euler) put(r->euler_number);
        if (p.solidity) put(r->solidity);
        cells.push_back(r->status);
        out += join_csv(cells);
    }
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------- gradient

inline void write_gradient_csv(const fs::path& path, const std::vector<GradientProfile>& profiles) {
    std::vector<const GradientProfile*> sorted;
    for (const auto& p : profiles) sorted.push_back(&p);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->label < b->label; });
    std::string out = "label,depth,mean_gray,voxel_count\n";
    for (const auto* p : sorted) {
        for (const auto& l : p->layers) {
            out += join_csv({std::to_string(p->label), std::to_string(l.depth), format_number(l.mean_gray),
                             std::to_string(l.voxel_count)});
        }
    }
    write_file_atomic(path, out);
}

[[nodiscard]] inline std::vector<GradientProfile> read_gradient_csv(const fs::path& path) {
    const auto t = read_csv(path);
    detail::require_header(t, {"label", "depth", "mean_gray", "voxel_count"}, path);
    std::map<Label, GradientProfile> by_label;
    for (const auto& row : t.rows) {
        const auto label = detail::parse_integer<Label>(row[0], path);
        auto& p = by_label[label];
        p.label = label;
        GradientLayer layer;
        layer.depth = detail::parse_integer<int>(row[1], path);
        layer.mean_gray = detail::parse_double(row[2], path);
        layer.voxel_count = detail::parse_integer<std::uint64_t>(row[3], path);
        layer.gray_sum = static_cast<std::uint64_t>(std::llround(layer.mean_gray * static_cast<double>(layer.voxel_count)));
        p.layers.push_back(layer);
    }
    std::vector<GradientProfile> out;
    for (auto& [l, p] : by_label) out.push_back(std::move(p));
    return out;
}

// ---------------------------------------------------------------- label list

inline constexpr std::array<const char*, 7> kLabelSlots{"A", "B", "C", "D", "E", "F", "X"};

/// Region selections A-F and X; nullopt is an empty slot.
using LabelList = std::array<std::optional<Label>, 7>;

inline void write_labellist_csv(const fs::path& path, const LabelList& list) {
    std::string out = "slot,label\n";
    for (std::size_t i = 0; i < kLabelSlots.size(); ++i) {
        out += join_csv({kLabelSlots[i], list[i] ? std::to_string(*list[i]) : std::string()});
    }
    write_file_atomic(path, out);
}

[[nodiscard]] inline LabelList read_labellist_csv(const fs::path& path) {
    const auto t = read_csv(path);
    detail::require_header(t, {"slot", "label"}, path);
    LabelList list;
    for (const auto& row : t.rows) {
        const auto it = std::find_if(kLabelSlots.begin(), kLabelSlots.end(), [&](const char* s) { return row[0] == s; });
        if (it == kLabelSlots.end()) throw Error(ErrorCode::validation, path.string() + ": unknown slot " + row[0]);
        if (!row[1].empty()) list[static_cast<std::size_t>(it - kLabelSlots.begin())] = detail::parse_integer<Label>(row[1], path);
    }
    return list;
}

// ---------------------------------------------------------------- quantification

[[nodiscard]] inline std::vector<std::string> quantification_columns() {
    std::vector<std::string> cols{"label"};
    for (char c : kClassNames) {
        for (const char* stem : {"volume_", "volume_fraction_", "mass_fraction_", "surface_fraction_", "peak_gray_"}) {
            cols.push_back(std::string(stem) + c);
        }
    }
    cols.insert(cols.end(), {"n_phases", "volume_analyzed_fraction", "region_volume"});
    return cols;
}

inline void write_quantification_csv(const fs::path& path, const std::vector<QuantResult>& rows) {
    std::vector<const QuantResult*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->label < b->label; });
    std::string out = join_csv(quantification_columns());
    for (const auto* q : sorted) {
        std::vector<std::string> cells{std::to_string(q->label)};
        for (std::size_t c = 0; c < 5; ++c) {
            cells.push_back(format_number(q->volume[c]));
            cells.push_back(format_number(q->volume_fraction[c]));
            cells.push_back(format_number(q->mass_fraction[c]));
            cells.push_back(format_number(q->surface_fraction[c]));
            cells.push_back(q->peak_gray[c] ? format_number(*q->peak_gray[c]) : std::string());
        }
        cells.push_back(std::to_string(q->n_phases));
        cells.push_back(format_number(q->volume_analyzed_fraction));
        cells.push_back(format_number(q->region_volume));
        out += join_csv(cells);
    }
    write_file_atomic(path, out);
}

/// Reads quantification.csv back; values carry the file's six digits.
[[nodiscard]] inline std::vector<QuantResult> read_quantification_csv(const fs::path& path) {
    const auto t = read_csv(path);
    detail::require_header(t, quantification_columns(), path);
    std::vector<QuantResult> out;
    for (const auto& row : t.rows) {
        QuantResult q;
        q.label = detail::parse_integer<Label>(row[0], path);
        for (std::size_t c = 0; c < 5; ++c) {
            const std::size_t base = 1 + c * 5;
            q.volume[c] = detail::parse_double(row[base], path);
            q.volume_fraction[c] = detail::parse_double(row[base + 1], path);
            q.mass_fraction[c] = detail::parse_double(row[base + 2], path);
            q.surface_fraction[c] = detail::parse_double(row[base + 3], path);
            if (!row[base + 4].empty()) q.peak_gray[c] = detail::parse_double(row[base + 4], path);
        }
        q.n_phases = detail::parse_integer<int>(row[26], path);
        q.volume_analyzed_fraction = detail::parse_double(row[27], path);
        q.region_volume = detail::parse_double(row[28], path);
        q.analyzed = q.n_phases > 0;
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------- report

[[nodiscard]] inline nlohmann::ordered_json report_to_json(const Report& r) {
    nlohmann::ordered_json classes = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < 5; ++c) {
        if (!r.classes[c]) continue;
        classes[std::string(1, kClassNames[c])] = {
            {"volume", round6(r.classes[c]->volume)},
            {"volume_fraction", round6(r.classes[c]->volume_fraction)},
            {"mass_fraction", round6(r.classes[c]->mass_fraction)},
            {"density", round6(r.density[c])},
        };
    }
    return {
        {"classes", classes},
        {"regions_total", r.regions_total},
        {"regions_analyzed", r.regions_analyzed},
        {"regions_with_1_phase", r.regions_with_1_phase},
        {"regions_with_2_phases", r.regions_with_2_phases},
        {"mean_volume_analyzed_fraction", round6(r.mean_volume_analyzed_fraction)},
        {"global_volume_analyzed_fraction", round6(r.global_volume_analyzed_fraction)},
    };
}

inline void write_report_json(const fs::path& path, const Report& r) {
    write_file_atomic(path, report_to_json(r).dump(2) + "\n");
}

[[nodiscard]] inline Report read_report_json(const fs::path& path) {
    Report r;
    try {
        const auto j = nlohmann::json::parse(read_text_file(path));
        for (std::size_t c = 0; c < 5; ++c) {
            const std::string key(1, kClassNames[c]);
            if (!j.at("classes").contains(key)) continue;
            const auto& e = j.at("classes").at(key);
            r.classes[c] = ClassSummary{e.at("volume").get<double>(), e.at("volume_fraction").get<double>(),
                                        e.at("mass_fraction").get<double>()};
            r.density[c] = e.at("density").get<double>();
        }
        r.regions_total = j.at("regions_total").get<std::uint64_t>();
        r.regions_analyzed = j.at("regions_analyzed").get<std::uint64_t>();
        r.regions_with_1_phase = j.at("regions_with_1_phase").get<std::uint64_t>();
        r.regions_with_2_phases = j.at("regions_with_2_phases").get<std::uint64_t>();
        r.mean_volume_analyzed_fraction = j.at("mean_volume_analyzed_fraction").get<double>();
        r.global_volume_analyzed_fraction = j.at("global_volume_analyzed_fraction").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::validation, path.string() + ": " + e.what());
    }
    return r;
}

}  // namespace ctquant
