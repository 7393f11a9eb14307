#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/peaks.hpp"
#include "ctquant/pipeline.hpp"
#include "ctquant/png.hpp"
#include "ctquant/project.hpp"
#include "ctquant/quantify.hpp"
#include "ctquant/regions.hpp"
#include "ctquant/tables.hpp"

namespace ctquant {

/// Uniform sample of `n` labels without replacement (partial Fisher-Yates on
/// a 64-bit Mersenne Twister). Deterministic per seed; returned ascending.
/// n larger than the label set returns every label.
[[nodiscard]] inline std::vector<Label> random_subset(std::vector<Label> labels, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorCode::validation, "n must be >= 1", {"n"});
    std::sort(labels.begin(), labels.end());
    if (n >= labels.size()) return labels;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        // rejection-free bounded draw: uniform_int_distribution differs across
        // standard libraries, this does not
        const std::uint64_t range = labels.size() - i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
        std::uint64_t r = rng();
        while (r >= limit) r = rng();
        std::swap(labels[i], labels[i + static_cast<std::size_t>(r % range)]);
    }
    labels.resize(n);
    std::sort(labels.begin(), labels.end());
    return labels;
}

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using Query = std::map<std::string, std::string>;

[[nodiscard]] inline int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::not_found:
        case ErrorCode::no_input: return 404;
        case ErrorCode::validation:
        case ErrorCode::range:
        case ErrorCode::shape_mismatch:
        case ErrorCode::unsupported_format: return 400;
        case ErrorCode::already_exists: return 409;
        default: return 500;
    }
}

[[nodiscard]] inline Response error_response(const Error& e) {
    const nlohmann::ordered_json body{
        {"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"fields", e.fields()}}}};
    return {http_status(e.code()), "application/json", body.dump()};
}

namespace detail {

inline Response json_response(const nlohmann::ordered_json& j) { return {200, "application/json", j.dump()}; }

inline nlohmann::ordered_json class_map(const std::array<double, 5>& v) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < 5; ++c) j[std::string(1, kClassNames[c])] = v[c];
    return j;
}

inline nlohmann::ordered_json class_map(const ClassPeaks& v) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < 5; ++c) {
        j[std::string(1, kClassNames[c])] = v[c] ? nlohmann::ordered_json(*v[c]) : nlohmann::ordered_json(nullptr);
    }
    return j;
}

inline nlohmann::ordered_json peaks_json(const std::vector<Peak>& peaks) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& p : peaks) {
        out.push_back({{"gray", p.gray},
                       {"height", p.height},
                       {"prominence", p.prominence},
                       {"class", p.assigned_class < 0 ? nlohmann::ordered_json(nullptr)
                                                      : nlohmann::ordered_json(std::string(
                                                            1, kClassNames[static_cast<std::size_t>(p.assigned_class)]))}});
    }
    return out;
}

inline nlohmann::ordered_json quant_json(const QuantResult& q) {
    return {{"label", q.label},
            {"analyzed", q.analyzed},
            {"region_volume", q.region_volume},
            {"volume", class_map(q.volume)},
            {"volume_fraction", class_map(q.volume_fraction)},
            {"mass_fraction", class_map(q.mass_fraction)},
            {"surface_fraction", class_map(q.surface_fraction)},
            {"peak_gray", class_map(q.peak_gray)},
            {"n_phases", q.n_phases},
            {"volume_analyzed_fraction", q.volume_analyzed_fraction}};
}

inline std::int64_t parse_int_arg(const Query& q, const std::string& key, std::int64_t fallback) {
    const auto it = q.find(key);
    if (it == q.end() || it->second.empty()) return fallback;
    std::size_t used = 0;
    try {
        const long long v = std::stoll(it->second, &used);
        if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::validation, "'" + key + "' must be an integer", {key});
}

inline std::vector<Label> parse_label_list(const std::string& text) {
    std::vector<Label> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
        }
        if (used != item.size() || v < 1 || v > std::numeric_limits<Label>::max()) {
            throw Error(ErrorCode::validation, "bad label '" + item + "'", {"labels"});
        }
        out.push_back(static_cast<Label>(v));
    }
    return out;
}

inline nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    try {
        auto j = nlohmann::json::parse(body);
        if (!j.is_object()) throw Error(ErrorCode::validation, "request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::validation, std::string("malformed JSON body: ") + e.what());
    }
}

inline std::vector<Label> body_labels(const nlohmann::json& body) {
    std::vector<Label> out;
    if (!body.contains("labels")) return out;
    const auto& l = body["labels"];
    if (!l.is_array()) throw Error(ErrorCode::validation, "'labels' must be an array", {"labels"});
    for (const auto& v : l) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
            throw Error(ErrorCode::validation, "'labels' must hold positive integers", {"labels"});
        }
        out.push_back(v.get<Label>());
    }
    return out;
}

}  // namespace detail

/// HTTP-independent request handlers over one project directory. Reads may
/// run concurrently; anything that writes project files is serialized.
class ProjectService {
public:
    explicit ProjectService(const fs::path& root) : layout_(load_project(root)) {}

    [[nodiscard]] const ProjectLayout& layout() const noexcept { return layout_; }

    Response handle(const std::string& method, const std::string& path, const Query& query,
                    const std::string& body) {
        try {
            const bool write = method != "GET";
            std::shared_lock read_lock(files_, std::defer_lock);
            std::unique_lock write_lock(files_, std::defer_lock);
            if (write) write_lock.lock();
            else read_lock.lock();
            return dispatch(method, path, query, body);
        } catch (const Error& e) {
            return error_response(e);
        } catch (const std::exception& e) {
            return error_response(Error(ErrorCode::io, e.what()));
        }
    }

private:
    using Histograms = std::map<Label, RegionHistogram>;

    Response dispatch(const std::string& method, const std::string& path, const Query& q, const std::string& body) {
        if (method == "GET" && path == "/regions") return get_regions();
        if (method == "GET" && path == "/histograms") return get_histograms(q);
        if (method == "POST" && path == "/peaks") return post_peaks(detail::parse_body(body));
        if (method == "POST" && path == "/quantify") return post_quantify(detail::parse_body(body));
        if (method == "POST" && path == "/quantify_all") return post_quantify_all(detail::parse_body(body));
        if (method == "GET" && path == "/parameters") return detail::json_response(to_json(parameters()));
        if (method == "PUT" && path == "/parameters") return put_parameters(detail::parse_body(body));
        if (method == "GET" && path == "/labellist") return get_labellist();
        if (method == "PUT" && path == "/labellist") return put_labellist(detail::parse_body(body));
        if (method == "GET" && path == "/slice") return get_slice(q);
        if (method == "GET" && path == "/peaks_overview") return get_peaks_overview();
        if (method == "GET" && path == "/random_subset") return get_random_subset(q);
        throw Error(ErrorCode::not_found, "no endpoint " + method + " " + path);
    }

    [[nodiscard]] Parameters parameters() const { return load_parameters(layout_.parameters_file()); }

    /// Current parameters with a request's "params" object applied on top.
    [[nodiscard]] Parameters with_overrides(const nlohmann::json& body) const {
        if (!body.contains("params")) return parameters();
        if (!body["params"].is_object()) throw Error(ErrorCode::validation, "'params' must be an object", {"params"});
        return parameters_from_json(ordered_json::parse(body["params"].dump()), parameters());
    }

    std::shared_ptr<const Histograms> histograms(HistogramVariant v) {
        const fs::path path = layout_.histogram_csv(v);
        if (!fs::exists(path)) throw Error(ErrorCode::not_found, path.filename().string() + " missing; run extract first");
        const auto stamp = fs::last_write_time(path);
        std::lock_guard lock(cache_mutex_);
        auto& slot = cache_[static_cast<std::size_t>(v)];
        if (!slot.data || slot.stamp != stamp) {
            auto h = std::make_shared<Histograms>();
            for (auto& r : read_histogram_table(path)) h->emplace(r.label, std::move(r));
            slot = {stamp, std::move(h)};
        }
        return slot.data;
    }

    /// Requested labels, or every label when none are given; unknown labels
    /// are a not_found error.
    static std::vector<Label> select(const Histograms& h, std::vector<Label> labels) {
        if (labels.empty()) {
            for (const auto& [l, _] : h) labels.push_back(l);
            return labels;
        }
        for (Label l : labels) {
            if (!h.count(l)) throw Error(ErrorCode::not_found, "unknown label " + std::to_string(l), {"labels"});
        }
        return labels;
    }

    Response get_regions() {
        if (!fs::exists(layout_.properties_csv())) throw Error(ErrorCode::not_found, "Properties.csv missing; run extract first");
        const auto t = read_csv(layout_.properties_csv());
        nlohmann::ordered_json regions = nlohmann::ordered_json::array();
        nlohmann::ordered_json labels = nlohmann::ordered_json::array();
        for (const auto& row : t.rows) {
            nlohmann::ordered_json r = nlohmann::ordered_json::object();
            for (std::size_t i = 0; i < t.header.size() && i < row.size(); ++i) {
                const auto& cell = row[i];
                if (t.header[i] == "status") {
                    r[t.header[i]] = cell;
                } else if (cell.empty()) {
                    r[t.header[i]] = nullptr;
                } else {
                    r[t.header[i]] = std::stod(cell);
                }
            }
            r["label"] = std::stoull(row[0]);
            labels.push_back(r["label"]);
            regions.push_back(std::move(r));
        }
        return detail::json_response({{"labels", labels}, {"columns", t.header}, {"regions", regions}});
    }

    Response get_histograms(const Query& q) {
        const auto vit = q.find("variant");
        HistogramVariant variant = HistogramVariant::bulk;
        if (vit != q.end()) {
            try {
                variant = parse_histogram_variant(vit->second);
            } catch (const Error& e) {
                throw Error(ErrorCode::validation, e.what(), {"variant"});
            }
        }
        const Parameters p = parameters();
        const auto bins = detail::parse_int_arg(q, "bins", p.mineralogy.bin_input);
        if (bins < 2 || bins > static_cast<std::int64_t>(kGrayLevels)) {
            throw Error(ErrorCode::validation, "bins must lie in [2, 65536]", {"bins"});
        }
        const auto savgol = detail::parse_int_arg(q, "savgol", 0);
        if (savgol < 0) throw Error(ErrorCode::validation, "savgol must be >= 0", {"savgol"});
        const auto h = histograms(variant);
        const auto lit = q.find("labels");
        const auto labels = select(*h, lit == q.end() ? std::vector<Label>{} : detail::parse_label_list(lit->second));
        nlohmann::ordered_json series = nlohmann::ordered_json::array();
        std::vector<double> centers;
        for (Label l : labels) {
            BinnedHistogram b = rebin(h->at(l).counts, static_cast<std::size_t>(bins));
            if (savgol > 0) b.freq = savgol_smooth(b.freq, static_cast<int>(savgol));
            centers = b.centers;
            series.push_back({{"label", l}, {"freq", b.freq}});
        }
        if (centers.empty()) centers = rebin({}, static_cast<std::size_t>(bins)).centers;
        return detail::json_response(
            {{"variant", to_string(variant)}, {"bins", bins}, {"centers", centers}, {"series", series}});
    }

    Response post_peaks(const nlohmann::json& body) {
        const Parameters p = with_overrides(body);
        const auto h = histograms(HistogramVariant::bulk);
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (Label l : select(*h, detail::body_labels(body))) {
            const auto rp = analyze_peaks(h->at(l), p.mineralogy);
            out.push_back({{"label", l}, {"peaks", detail::peaks_json(rp.peaks)}, {"class_peaks", detail::class_map(rp.class_peaks)}});
        }
        return detail::json_response({{"regions", out}});
    }

    Response post_quantify(const nlohmann::json& body) {
        const Parameters p = with_overrides(body);
        const auto bulk = histograms(HistogramVariant::bulk);
        const auto surface = histograms(HistogramVariant::surface);
        const ClassTable classes = ClassTable::from(p.mineralogy);
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (Label l : select(*bulk, detail::body_labels(body))) {
            const auto rp = analyze_peaks(bulk->at(l), p.mineralogy);
            const auto sit = surface->find(l);
            const RegionHistogram empty{l, {}};
            auto qr = quantify_region(bulk->at(l), sit == surface->end() ? empty : sit->second, rp.class_peaks, classes,
                                      p.extraction.voxel_size);
            qr.peaks = rp.peaks;
            out.push_back(detail::quant_json(qr));
        }
        return detail::json_response({{"results", out}});
    }

    /// Persists parameter overrides, then brings quantification.csv and
    /// report.json up to date through the cached pipeline.
    Response post_quantify_all(const nlohmann::json& body) {
        if (body.contains("params")) save_parameters(layout_.parameters_file(), with_overrides(body));
        (void)run_pipeline(layout_, Stage::report);
        return {200, "application/json", read_text_file(layout_.report_json())};
    }

    Response put_parameters(const nlohmann::json& body) {
        const Parameters p = parameters_from_json(ordered_json::parse(body.dump()), parameters());
        save_parameters(layout_.parameters_file(), p);
        return detail::json_response(to_json(p));
    }

    [[nodiscard]] LabelList labellist() const {
        return fs::exists(layout_.labellist_csv()) ? read_labellist_csv(layout_.labellist_csv()) : LabelList{};
    }

    static nlohmann::ordered_json labellist_json(const LabelList& list) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < kLabelSlots.size(); ++i) {
            j[kLabelSlots[i]] = list[i] ? nlohmann::ordered_json(*list[i]) : nlohmann::ordered_json(nullptr);
        }
        return j;
    }

    Response get_labellist() { return detail::json_response(labellist_json(labellist())); }

    Response put_labellist(const nlohmann::json& body) {
        LabelList list = labellist();
        std::vector<std::string> bad;
        for (const auto& [slot, value] : body.items()) {
            const auto it = std::find_if(kLabelSlots.begin(), kLabelSlots.end(), [&](const char* s) { return slot == s; });
            if (it == kLabelSlots.end() || !(value.is_null() || (value.is_number_integer() && value.get<std::int64_t>() >= 1))) {
                bad.push_back(slot);
                continue;
            }
            list[static_cast<std::size_t>(it - kLabelSlots.begin())] =
                value.is_null() ? std::nullopt : std::optional<Label>(value.get<Label>());
        }
        if (!bad.empty()) throw Error(ErrorCode::validation, "invalid label list entries", bad);
        const auto h = histograms(HistogramVariant::bulk);
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i] && !h->count(*list[i])) {
                throw Error(ErrorCode::not_found, "unknown label " + std::to_string(*list[i]), {kLabelSlots[i]});
            }
        }
        write_labellist_csv(layout_.labellist_csv(), list);
        return detail::json_response(labellist_json(list));
    }

    /// Gray and label volumes as extract saw them, cached per input stamps.
    std::shared_ptr<const ExtractionInputs> volumes() {
        const Parameters p = parameters();
        const std::string key = parameter_subset(p, {"start_slice", "end_slice", "remove_small", "voxel_size"}).dump() +
                                std::to_string(fs::last_write_time(layout_.instance_mask()).time_since_epoch().count()) +
                                std::to_string(fs::last_write_time(layout_.volume_store() / "meta.json").time_since_epoch().count());
        std::lock_guard lock(cache_mutex_);
        if (!volumes_ || volumes_key_ != key) {
            volumes_ = std::make_shared<ExtractionInputs>(load_extraction_inputs(layout_, p));
            volumes_key_ = key;
            bounds_.clear();
            for (const auto& b : extract_bounding_regions(volumes_->labels)) bounds_.emplace(b.label, b);
        }
        return volumes_;
    }

    Response get_slice(const Query& q) {
        const auto label_arg = detail::parse_int_arg(q, "label", -1);
        if (label_arg < 1) throw Error(ErrorCode::validation, "'label' is required", {"label"});
        std::size_t axis = 0;
        if (const auto it = q.find("axis"); it != q.end()) {
            if (it->second == "z") axis = 0;
            else if (it->second == "y") axis = 1;
            else if (it->second == "x") axis = 2;
            else throw Error(ErrorCode::validation, "axis must be z, y or x", {"axis"});
        }
        const auto vols = volumes();
        RegionBounds b;
        {
            std::lock_guard lock(cache_mutex_);
            const auto it = bounds_.find(static_cast<Label>(label_arg));
            if (it == bounds_.end()) throw Error(ErrorCode::not_found, "unknown label " + std::to_string(label_arg), {"label"});
            b = it->second;
        }
        // index is global; the loaded volumes start at z_offset
        Box box = b.box;
        const auto off = static_cast<std::int64_t>(vols->z_offset);
        box.lo.z += off;
        box.hi.z += off;
        const std::int64_t mid = (box.lo[axis] + box.hi[axis]) / 2;
        const std::int64_t index = std::clamp(detail::parse_int_arg(q, "index", mid), box.lo[axis], box.hi[axis]);

        const Dims d = vols->labels.dims();
        const std::size_t ua = axis == 0 ? 1 : 0;  // image rows
        const std::size_t va = axis == 2 ? 1 : 2;  // image columns
        const std::int64_t r0 = std::max<std::int64_t>(b.box.lo[ua] - 2, 0);
        const std::int64_t r1 = std::min<std::int64_t>(b.box.hi[ua] + 2, static_cast<std::int64_t>(d[ua]) - 1);
        const std::int64_t c0 = std::max<std::int64_t>(b.box.lo[va] - 2, 0);
        const std::int64_t c1 = std::min<std::int64_t>(b.box.hi[va] + 2, static_cast<std::int64_t>(d[va]) - 1);
        const auto h = static_cast<std::uint32_t>(r1 - r0 + 1);
        const auto w = static_cast<std::uint32_t>(c1 - c0 + 1);
        const Label label = b.label;
        const auto at = [&](std::int64_t r, std::int64_t c) {
            Index3 p{};
            std::array<std::int64_t, 3> idx{};
            idx[axis] = index - off;
            idx[ua] = r;
            idx[va] = c;
            p = {idx[0], idx[1], idx[2]};
            return p;
        };
        const auto inside = [&](std::int64_t r, std::int64_t c) {
            const Index3 p = at(r, c);
            return vols->labels.get_or(p.z, p.y, p.x, 0) == label;
        };
        std::vector<std::uint8_t> rgb(std::size_t{w} * h * 3);
        for (std::int64_t r = r0; r <= r1; ++r) {
            for (std::int64_t c = c0; c <= c1; ++c) {
                const Index3 p = at(r, c);
                const auto g = static_cast<std::uint8_t>(vols->volume.voxels(static_cast<std::size_t>(p.z), static_cast<std::size_t>(p.y),
                                                                             static_cast<std::size_t>(p.x)) >> 8);
                const bool edge = inside(r, c) &&
                                  (!inside(r - 1, c) || !inside(r + 1, c) || !inside(r, c - 1) || !inside(r, c + 1));
                auto* px = &rgb[(static_cast<std::size_t>(r - r0) * w + static_cast<std::size_t>(c - c0)) * 3];
                px[0] = edge ? 255 : g;
                px[1] = edge ? 0 : g;
                px[2] = edge ? 0 : g;
            }
        }
        return {200, "image/png", encode_png_rgb(rgb, w, h)};
    }

    Response get_peaks_overview() {
        const Parameters p = parameters();
        const auto h = histograms(HistogramVariant::bulk);
        nlohmann::ordered_json points = nlohmann::ordered_json::array();
        for (const auto& [l, hist] : *h) {
            for (const auto& pk : analyze_peaks(hist, p.mineralogy).peaks) {
                nlohmann::ordered_json j = detail::peaks_json({pk})[0];
                j["label"] = l;
                points.push_back(std::move(j));
            }
        }
        return detail::json_response({{"bins", p.mineralogy.bin_input}, {"regions", h->size()}, {"peaks", points}});
    }

    Response get_random_subset(const Query& q) {
        const auto n = detail::parse_int_arg(q, "n", 3);
        const auto seed = detail::parse_int_arg(q, "seed", 0);
        if (n < 1) throw Error(ErrorCode::validation, "n must be >= 1", {"n"});
        const auto h = histograms(HistogramVariant::bulk);
        std::vector<Label> labels;
        for (const auto& [l, _] : *h) labels.push_back(l);
        return detail::json_response(
            {{"labels", random_subset(labels, static_cast<std::size_t>(n), static_cast<std::uint64_t>(seed))}});
    }

    struct CacheSlot {
        fs::file_time_type stamp;
        std::shared_ptr<const Histograms> data;
    };

    ProjectLayout layout_;
    std::shared_mutex files_;
    std::mutex cache_mutex_;
    std::array<CacheSlot, 4> cache_;
    std::shared_ptr<const ExtractionInputs> volumes_;
    std::string volumes_key_;
    std::map<Label, RegionBounds> bounds_;
};

}  // namespace ctquant
