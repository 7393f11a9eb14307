#pragma once

#include <yaml-cpp/yaml.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"

namespace ctquant {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::array<char, 5> kClassNames{'A', 'B', 'C', 'D', 'E'};

/// Peak finding, class table and quantification switches.
struct MineralogyParams {
    std::array<double, 5> density{1.0, 1.0, 1.0, 1.0, 1.0};
    std::array<std::optional<double>, 5> max_grey{19660.0, 32767.0, 45874.0, 58981.0, 65535.0};
    double background_q = 0.0;
    int bin_input = 256;
    bool enable_savgol = false;
    bool enable_pvb = true;
    double gray_value_width = 0.0;
    double horiz_distance = 1.0;
    double min_frequency = 0.001;
    double prominence = 0.001;
    int savgol_input = 0;
    double vert_distance = 0.0;
};

struct ExtractionParams {
    bool aspect_ratio = false;
    double background = 0.0;
    bool basic_properties = true;
    int end_slice = -1;
    bool entropy = false;
    bool euler = false;
    double feret_angle = 10.0;
    bool ferets = false;
    bool histogram = true;
    bool inertia = false;
    bool mean_max = false;
    int mesh_spacing = 1;
    bool moments = false;
    int num_threads = -1;
    bool save_labels = false;
    bool solidity = false;
    int start_slice = -1;
    double voxel_size = 1.0;
};

/// Threshold segmentation plus the keys of the learned segmenter, which are
/// kept verbatim for round-tripping but otherwise unused.
struct SegmentationParams {
    int apply_to_slice = -1;
    ordered_json average_particle_size_mm = 0.0;
    ordered_json model_path = "";
    std::int64_t remove_small = 800;
    bool save_seg_labels = true;
    ordered_json voxel_size_mm = 0.0;
    std::vector<int> dilation_erosion_operations;
    std::int64_t manual_thresholding = 6000;
};

struct Parameters {
    MineralogyParams mineralogy;
    ExtractionParams extraction;
    SegmentationParams segmentation;
};

enum class ParamCategory { mineralogy, property_extraction, segmentation, manual_segmentation };

/// Key names grouped as in the parameter file, in file order.
[[nodiscard]] inline const std::vector<std::string>& parameter_keys(ParamCategory category) {
    static const std::vector<std::string> mineralogy{
        "DensityA", "DensityB", "DensityC", "DensityD", "DensityE",
        "MaxGreyValueA", "MaxGreyValueB", "MaxGreyValueC", "MaxGreyValueD", "MaxGreyValueE",
        "background_q", "binInput", "enableSavgol", "enablePVB", "gray_value_width",
        "horizDistance", "min_frequency", "prominence", "savgolInput", "vertDistance"};
    static const std::vector<std::string> extraction{
        "aspect_ratio", "background", "basic_properties", "end_slice", "entropy", "euler",
        "feret_angle", "ferets", "histogram", "inertia", "mean_max", "mesh_spacing", "moments",
        "num_threads", "save_labels", "solidity", "start_slice", "voxel_size"};
    static const std::vector<std::string> segmentation{
        "apply_to_slice", "average_particle_size_mm", "model_path", "remove_small", "save_seg_labels",
        "voxel_size_mm"};
    static const std::vector<std::string> manual{"dilation_erosion_operations", "manual_thresholding"};
    switch (category) {
        case ParamCategory::mineralogy: return mineralogy;
        case ParamCategory::property_extraction: return extraction;
        case ParamCategory::segmentation: return segmentation;
        case ParamCategory::manual_segmentation: return manual;
    }
    return mineralogy;
}

[[nodiscard]] inline ordered_json to_json(const Parameters& p) {
    ordered_json j = ordered_json::object();
    const auto& m = p.mineralogy;
    for (std::size_t i = 0; i < 5; ++i) j[std::string("Density") + kClassNames[i]] = m.density[i];
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string key = std::string("MaxGreyValue") + kClassNames[i];
        j[key] = m.max_grey[i] ? ordered_json(*m.max_grey[i]) : ordered_json(nullptr);
    }
    j["background_q"] = m.background_q;
    j["binInput"] = m.bin_input;
    j["enableSavgol"] = m.enable_savgol;
    j["enablePVB"] = m.enable_pvb;
    j["gray_value_width"] = m.gray_value_width;
    j["horizDistance"] = m.horiz_distance;
    j["min_frequency"] = m.min_frequency;
    j["prominence"] = m.prominence;
    j["savgolInput"] = m.savgol_input;
    j["vertDistance"] = m.vert_distance;

    const auto& e = p.extraction;
    j["aspect_ratio"] = e.aspect_ratio;
    j["background"] = e.background;
    j["basic_properties"] = e.basic_properties;
    j["end_slice"] = e.end_slice;
    j["entropy"] = e.entropy;
    j["euler"] = e.euler;
    j["feret_angle"] = e.feret_angle;
    j["ferets"] = e.ferets;
    j["histogram"] = e.histogram;
    j["inertia"] = e.inertia;
    j["mean_max"] = e.mean_max;
    j["mesh_spacing"] = e.mesh_spacing;
    j["moments"] = e.moments;
    j["num_threads"] = e.num_threads;
    j["save_labels"] = e.save_labels;
    j["solidity"] = e.solidity;
    j["start_slice"] = e.start_slice;
    j["voxel_size"] = e.voxel_size;

    const auto& s = p.segmentation;
    j["apply_to_slice"] = s.apply_to_slice;
    j["average_particle_size_mm"] = s.average_particle_size_mm;
    j["model_path"] = s.model_path;
    j["remove_small"] = s.remove_small;
    j["save_seg_labels"] = s.save_seg_labels;
    j["voxel_size_mm"] = s.voxel_size_mm;
    j["dilation_erosion_operations"] = s.dilation_erosion_operations;
    j["manual_thresholding"] = s.manual_thresholding;
    return j;
}

/// Range and consistency checks; every offending key is reported at once.
inline void validate(const Parameters& p) {
    std::vector<std::string> bad;
    const auto& m = p.mineralogy;
    for (std::size_t i = 0; i < 5; ++i) {
        if (!(m.density[i] > 0.0)) bad.push_back(std::string("Density") + kClassNames[i]);
    }
    std::optional<double> previous;
    bool any_class = false;
    for (std::size_t i = 0; i < 5; ++i) {
        if (!m.max_grey[i]) continue;
        any_class = true;
        const double v = *m.max_grey[i];
        if (v < 0.0 || v > 65535.0 || (previous && !(v > *previous))) {
            bad.push_back(std::string("MaxGreyValue") + kClassNames[i]);
        }
        if (!previous && !(m.background_q < v)) bad.push_back("background_q");
        previous = v;
    }
    if (!any_class) bad.push_back("MaxGreyValueA");
    if (m.background_q < 0.0 || m.background_q > 65535.0) bad.push_back("background_q");
    if (m.bin_input < 2 || m.bin_input > 65536) bad.push_back("binInput");
    if (m.gray_value_width < 0.0) bad.push_back("gray_value_width");
    if (m.horiz_distance < 0.0) bad.push_back("horizDistance");
    if (m.min_frequency < 0.0) bad.push_back("min_frequency");
    if (m.prominence < 0.0) bad.push_back("prominence");
    if (m.savgol_input < 0) bad.push_back("savgolInput");
    if (m.vert_distance < 0.0) bad.push_back("vertDistance");

    const auto& e = p.extraction;
    if (!(e.feret_angle > 0.0 && e.feret_angle <= 90.0)) bad.push_back("feret_angle");
    if (e.mesh_spacing < 1) bad.push_back("mesh_spacing");
    if (e.num_threads == 0 || e.num_threads < -1) bad.push_back("num_threads");
    if (!(e.voxel_size > 0.0)) bad.push_back("voxel_size");
    if (e.start_slice < -1) bad.push_back("start_slice");
    if (e.end_slice < -1) bad.push_back("end_slice");
    if (e.start_slice >= 0 && e.end_slice >= 0 && e.start_slice > e.end_slice) {
        bad.push_back("start_slice");
        bad.push_back("end_slice");
    }

    const auto& s = p.segmentation;
    if (s.apply_to_slice < -1) bad.push_back("apply_to_slice");
    if (s.remove_small < 0) bad.push_back("remove_small");
    if (s.manual_thresholding < 0 || s.manual_thresholding > 65535) bad.push_back("manual_thresholding");
    for (int op : s.dilation_erosion_operations) {
        if (op != 1 && op != 2) {
            bad.push_back("dilation_erosion_operations");
            break;
        }
    }
    if (!bad.empty()) {
        std::string msg = "invalid parameters:";
        for (const auto& k : bad) msg += " " + k;
        throw Error(ErrorCode::validation, msg, bad);
    }
}

namespace detail {

template <class T>
T param_get(const ordered_json& j, const std::string& key, std::vector<std::string>& bad) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw std::invalid_argument("not a boolean");
            return j.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (j.is_number_integer()) return j.get<T>();
            if (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>()) {
                return static_cast<T>(j.get<double>());
            }
            throw std::invalid_argument("not an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) throw std::invalid_argument("not a number");
            return j.get<T>();
        } else {
            return j.get<T>();
        }
    } catch (const std::exception&) {
        bad.push_back(key);
        return T{};
    }
}

}  // namespace detail

/// Overlays the keys present in `j` onto `base`. Unknown keys and ill-typed
/// values are rejected with their names; absent keys keep `base` values.
[[nodiscard]] inline Parameters parameters_from_json(const ordered_json& j, Parameters base = {}) {
    if (!j.is_object()) throw Error(ErrorCode::validation, "parameters must be a mapping");
    std::vector<std::string> bad;
    auto& m = base.mineralogy;
    auto& e = base.extraction;
    auto& s = base.segmentation;
    for (const auto& [key, v] : j.items()) {
        using detail::param_get;
        bool known = true;
        if (key.size() == 8 && key.starts_with("Density") && key[7] >= 'A' && key[7] <= 'E') {
            m.density[static_cast<std::size_t>(key[7] - 'A')] = param_get<double>(v, key, bad);
        } else if (key.size() == 13 && key.starts_with("MaxGreyValue") && key[12] >= 'A' && key[12] <= 'E') {
            auto& slot = m.max_grey[static_cast<std::size_t>(key[12] - 'A')];
            slot = v.is_null() ? std::nullopt : std::optional<double>(param_get<double>(v, key, bad));
        } else if (key == "background_q") m.background_q = param_get<double>(v, key, bad);
        else if (key == "binInput") m.bin_input = param_get<int>(v, key, bad);
        else if (key == "enableSavgol") m.enable_savgol = param_get<bool>(v, key, bad);
        else if (key == "enablePVB") m.enable_pvb = param_get<bool>(v, key, bad);
        else if (key == "gray_value_width") m.gray_value_width = param_get<double>(v, key, bad);
        else if (key == "horizDistance") m.horiz_distance = param_get<double>(v, key, bad);
        else if (key == "min_frequency") m.min_frequency = param_get<double>(v, key, bad);
        else if (key == "prominence") m.prominence = param_get<double>(v, key, bad);
        else if (key == "savgolInput") m.savgol_input = param_get<int>(v, key, bad);
        else if (key == "vertDistance") m.vert_distance = param_get<double>(v, key, bad);
        else if (key == "aspect_ratio") e.aspect_ratio = param_get<bool>(v, key, bad);
        else if (key == "background") e.background = param_get<double>(v, key, bad);
        else if (key == "basic_properties") e.basic_properties = param_get<bool>(v, key, bad);
        else if (key == "end_slice") e.end_slice = param_get<int>(v, key, bad);
        else if (key == "entropy") e.entropy = param_get<bool>(v, key, bad);
        else if (key == "euler") e.euler = param_get<bool>(v, key, bad);
        else if (key == "feret_angle") e.feret_angle = param_get<double>(v, key, bad);
        else if (key == "ferets") e.ferets = param_get<bool>(v, key, bad);
        else if (key == "histogram") e.histogram = param_get<bool>(v, key, bad);
        else if (key == "inertia") e.inertia = param_get<bool>(v, key, bad);
        else if (key == "mean_max") e.mean_max = param_get<bool>(v, key, bad);
        else if (key == "mesh_spacing") e.mesh_spacing = param_get<int>(v, key, bad);
        else if (key == "moments") e.moments = param_get<bool>(v, key, bad);
        else if (key == "num_threads") e.num_threads = param_get<int>(v, key, bad);
        else if (key == "save_labels") e.save_labels = param_get<bool>(v, key, bad);
        else if (key == "solidity") e.solidity = param_get<bool>(v, key, bad);
        else if (key == "start_slice") e.start_slice = param_get<int>(v, key, bad);
        else if (key == "voxel_size") e.voxel_size = param_get<double>(v, key, bad);
        else if (key == "apply_to_slice") s.apply_to_slice = param_get<int>(v, key, bad);
        else if (key == "average_particle_size_mm") s.average_particle_size_mm = v;
        else if (key == "model_path") s.model_path = v;
        else if (key == "remove_small") s.remove_small = param_get<std::int64_t>(v, key, bad);
        else if (key == "save_seg_labels") s.save_seg_labels = param_get<bool>(v, key, bad);
        else if (key == "voxel_size_mm") s.voxel_size_mm = v;
        else if (key == "dilation_erosion_operations") {
            if (v.is_null()) {
                s.dilation_erosion_operations.clear();
            } else if (!v.is_array()) {
                bad.push_back(key);
            } else {
                s.dilation_erosion_operations.clear();
                for (const auto& op : v) s.dilation_erosion_operations.push_back(param_get<int>(op, key, bad));
            }
        } else if (key == "manual_thresholding") s.manual_thresholding = param_get<std::int64_t>(v, key, bad);
        else known = false;
        if (!known) bad.push_back(key);
    }
    if (!bad.empty()) {
        std::string msg = "unknown or ill-typed parameters:";
        for (const auto& k : bad) msg += " " + k;
        throw Error(ErrorCode::validation, msg, bad);
    }
    validate(base);
    return base;
}

namespace detail {

inline ordered_json yaml_scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    static const std::regex int_re(R"([-+]?[0-9]+)");
    static const std::regex float_re(R"([-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?)");
    if (text.empty() || text == "~" || text == "null" || text == "Null" || text == "NULL") return nullptr;
    if (text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "false" || text == "False" || text == "FALSE") return false;
    if (std::regex_match(text, int_re)) return std::stoll(text);
    if (std::regex_match(text, float_re)) return std::stod(text);
    return text;
}

inline ordered_json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Scalar: return yaml_scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            ordered_json arr = ordered_json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            ordered_json obj = ordered_json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    return nullptr;
}

}  // namespace detail

/// Parses parameters.yml. Keys may be flat or nested one level under a
/// category heading; the flat key names are authoritative.
[[nodiscard]] inline Parameters parse_parameters_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::validation, std::string("parameters.yml is not valid YAML: ") + e.what());
    }
    if (root.IsNull()) return Parameters{};
    ordered_json raw = detail::yaml_to_json(root);
    if (!raw.is_object()) throw Error(ErrorCode::validation, "parameters.yml must be a mapping");
    ordered_json flat = ordered_json::object();
    for (const auto& [key, v] : raw.items()) {
        if (v.is_object()) {
            for (const auto& [inner, iv] : v.items()) flat[inner] = iv;
        } else {
            flat[key] = v;
        }
    }
    return parameters_from_json(flat);
}

[[nodiscard]] inline Parameters load_parameters(const fs::path& path) {
    return parse_parameters_yaml(read_text_file(path));
}

/// Flat YAML, grouped by category with comment headings. Numbers use the
/// shortest round-trip representation, so load(save(p)) == p.
[[nodiscard]] inline std::string parameters_to_yaml(const Parameters& p) {
    const ordered_json j = to_json(p);
    std::string out;
    const std::pair<ParamCategory, const char*> groups[] = {
        {ParamCategory::mineralogy, "Mineralogy Analysis"},
        {ParamCategory::property_extraction, "Property Extraction"},
        {ParamCategory::segmentation, "Segmentation"},
        {ParamCategory::manual_segmentation, "Manual Segmentation"},
    };
    for (const auto& [category, title] : groups) {
        if (!out.empty()) out += '\n';
        out += "# ";
        out += title;
        out += '\n';
        for (const auto& key : parameter_keys(category)) {
            const auto& v = j.at(key);
            out += key + ": " + (v.is_null() ? std::string("null") : v.dump()) + '\n';
        }
    }
    return out;
}

inline void save_parameters(const fs::path& path, const Parameters& p) {
    validate(p);
    write_file_atomic(path, parameters_to_yaml(p));
}

[[nodiscard]] inline bool operator==(const Parameters& a, const Parameters& b) { return to_json(a) == to_json(b); }

/// Subset of the flat parameter JSON restricted to `keys`.
[[nodiscard]] inline ordered_json parameter_subset(const Parameters& p, const std::vector<std::string>& keys) {
    const ordered_json all = to_json(p);
    ordered_json out = ordered_json::object();
    for (const auto& k : keys) out[k] = all.at(k);
    return out;
}

}  // namespace ctquant
