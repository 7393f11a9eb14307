#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctquant/chunk_store.hpp"
#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/project.hpp"
#include "ctquant/quantify.hpp"
#include "ctquant/region_props.hpp"
#include "ctquant/segmentation.hpp"
#include "ctquant/tables.hpp"
#include "ctquant/tiff_io.hpp"

namespace ctquant {

enum class Stage { import, segment, extract, analyze, report };

inline constexpr std::array<Stage, 5> kStages{Stage::import, Stage::segment, Stage::extract, Stage::analyze,
                                              Stage::report};

[[nodiscard]] constexpr std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::import: return "import";
        case Stage::segment: return "segment";
        case Stage::extract: return "extract";
        case Stage::analyze: return "analyze";
        case Stage::report: return "report";
    }
    return "import";
}

[[nodiscard]] inline Stage parse_stage(std::string_view s) {
    for (Stage st : kStages) {
        if (to_string(st) == s) return st;
    }
    throw Error(ErrorCode::validation, "unknown stage '" + std::string(s) + "'");
}

/// Incremental SHA-256 (OpenSSL EVP).
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorCode::io, "cannot initialize SHA-256");
        }
    }

    Sha256& update(std::string_view data) {
        EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
        return *this;
    }

    /// Length-prefixed, so concatenated fields cannot collide.
    Sha256& field(std::string_view data) {
        const std::string len = std::to_string(data.size()) + ":";
        update(len);
        return update(data);
    }

    Sha256& file(const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::no_input, "missing input " + path.string());
        field(path.filename().string());
        std::array<char, 1 << 16> buf{};
        while (in) {
            in.read(buf.data(), buf.size());
            update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
        }
        return update(";");
    }

    [[nodiscard]] std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        std::string out;
        char byte[3];
        for (unsigned i = 0; i < len; ++i) {
            std::snprintf(byte, sizeof(byte), "%02x", md[i]);
            out += byte;
        }
        return out;
    }

private:
    struct Free {
        void operator()(EVP_MD_CTX* c) const noexcept { EVP_MD_CTX_free(c); }
    };
    std::unique_ptr<EVP_MD_CTX, Free> ctx_;
};

[[nodiscard]] inline std::string sha256_file(const fs::path& path) { return Sha256().file(path).hex(); }

/// Files and parameter keys a stage reads, and the files it owns.
struct StagePlan {
    std::vector<fs::path> inputs;
    std::vector<std::string> params;
    std::vector<fs::path> outputs;
};

namespace detail {

inline std::vector<fs::path> store_files(const ProjectLayout& p) {
    std::vector<fs::path> files{p.volume_store() / "meta.json"};
    if (!fs::is_directory(p.volume_store())) return files;
    std::vector<fs::path> chunks;
    for (const auto& e : fs::directory_iterator(p.volume_store())) {
        if (e.path().extension() == ".bin") chunks.push_back(e.path());
    }
    std::sort(chunks.begin(), chunks.end());
    files.insert(files.end(), chunks.begin(), chunks.end());
    return files;
}

}  // namespace detail

[[nodiscard]] inline StagePlan stage_plan(Stage s, const ProjectLayout& p, const Parameters& params) {
    StagePlan plan;
    switch (s) {
        case Stage::import:
            plan.inputs = list_tiff_files(p.gray_dir());
            plan.params = {"voxel_size"};
            plan.outputs = {p.volume_store() / "meta.json"};
            break;
        case Stage::segment:
            plan.inputs = detail::store_files(p);
            plan.params = {"remove_small", "save_seg_labels", "dilation_erosion_operations", "manual_thresholding"};
            plan.outputs = {p.instance_mask()};
            break;
        case Stage::extract: {
            plan.inputs = detail::store_files(p);
            plan.inputs.push_back(p.instance_mask());
            for (const auto& k : parameter_keys(ParamCategory::property_extraction)) {
                if (k != "num_threads") plan.params.push_back(k);
            }
            plan.params.push_back("remove_small");
            plan.outputs = {p.properties_csv(), p.gradient_csv()};
            for (auto v : kHistogramVariants) plan.outputs.push_back(p.histogram_csv(v));
            if (params.extraction.save_labels) plan.outputs.push_back(p.extracted_labels());
            break;
        }
        case Stage::analyze:
            plan.inputs = {p.histogram_csv(HistogramVariant::bulk), p.histogram_csv(HistogramVariant::surface)};
            plan.params = parameter_keys(ParamCategory::mineralogy);
            plan.params.push_back("voxel_size");
            plan.outputs = {p.quantification_csv()};
            break;
        case Stage::report:
            plan.inputs = {p.quantification_csv()};
            plan.params = parameter_keys(ParamCategory::mineralogy);
            plan.params.push_back("voxel_size");
            plan.outputs = {p.report_json()};
            break;
    }
    return plan;
}

/// Bumped whenever a stage's output format or algorithm changes, so old
/// caches are not trusted.
inline constexpr std::string_view kPipelineVersion = "ctquant-pipeline-1";

/// Hash of the stage name, its parameter subset and its input file bytes.
[[nodiscard]] inline std::string stage_fingerprint(Stage s, const ProjectLayout& p, const Parameters& params) {
    const auto plan = stage_plan(s, p, params);
    Sha256 h;
    h.field(kPipelineVersion);
    h.field(to_string(s));
    h.field(parameter_subset(params, plan.params).dump());
    for (const auto& f : plan.inputs) h.file(f);
    return h.hex();
}

// ---------------------------------------------------------------- stages

/// Loads the gray volume and the label volume as the extract stage sees
/// them: z-restricted, border regions and small regions removed.
struct ExtractionInputs {
    GrayVolume volume;
    LabelVolume labels;
    std::size_t z_offset = 0;
};

[[nodiscard]] inline ExtractionInputs load_extraction_inputs(const ProjectLayout& p, const Parameters& params) {
    const int threads = params.extraction.num_threads;
    GrayVolume vol = ChunkStore::open(p.volume_store()).read_volume(threads);
    vol.voxel_size = params.extraction.voxel_size;
    LabelVolume labels = ensure_labeled(labels_from_u16(read_tiff_stack(p.instance_mask())));
    if (labels.dims() != vol.dims()) {
        throw Error(ErrorCode::shape_mismatch, "instance_mask.tiff does not match the volume shape");
    }
    const SliceRange r = resolve_slice_range(vol.dims().z, params.extraction.start_slice, params.extraction.end_slice);
    auto [v, l] = restrict_slices(vol, labels, params.extraction.start_slice, params.extraction.end_slice);
    l = remove_small(remove_border_regions(std::move(l)), params.segmentation.remove_small);
    return {std::move(v), std::move(l), r.begin};
}

inline void run_import(const ProjectLayout& p, const Parameters& params) {
    (void)import_tiff_stack(p.gray_dir(), {64, 64, 64}, p.volume_store(), params.extraction.voxel_size);
}

inline void run_segment(const ProjectLayout& p, const Parameters& params) {
    const GrayVolume vol = ChunkStore::open(p.volume_store()).read_volume(params.extraction.num_threads);
    LabelVolume labels = segment_volume(vol.voxels, params.segmentation);
    if (!params.segmentation.save_seg_labels) {
        for (auto& v : labels.values()) v = v != 0 ? 1 : 0;
    }
    const fs::path tmp = p.instance_mask().string() + ".tmp";
    write_tiff_stack(tmp, labels_to_u16(labels));
    fs::rename(tmp, p.instance_mask());
}

inline void run_extract(const ProjectLayout& p, const Parameters& params) {
    const auto in = load_extraction_inputs(p, params);
    auto result = extract_all(in.volume, in.labels, params.extraction);
    const double s = params.extraction.voxel_size;
    for (auto& row : result.properties) row.centroid[0] += static_cast<double>(in.z_offset) * s;

    std::array<std::vector<RegionHistogram>, 4> tables;
    std::vector<GradientProfile> profiles;
    for (const auto& h : result.histograms) {
        if (h.bulk.label == 0) continue;
        tables[0].push_back(h.bulk);
        tables[1].push_back(h.surface);
        tables[2].push_back(h.outer);
        tables[3].push_back(h.inner);
        profiles.push_back(h.profile);
    }
    write_properties_csv(p.properties_csv(), result.properties, params.extraction);
    for (std::size_t i = 0; i < 4; ++i) write_histogram_table(p.histogram_csv(kHistogramVariants[i]), tables[i]);
    write_gradient_csv(p.gradient_csv(), profiles);
    if (!fs::exists(p.labellist_csv())) write_labellist_csv(p.labellist_csv(), {});
    if (params.extraction.save_labels) {
        const fs::path tmp = p.extracted_labels().string() + ".tmp";
        write_tiff_stack(tmp, labels_to_u16(in.labels));
        fs::rename(tmp, p.extracted_labels());
    } else {
        fs::remove(p.extracted_labels());
    }
}

inline void run_analyze(const ProjectLayout& p, const Parameters& params) {
    const auto bulk = read_histogram_table(p.histogram_csv(HistogramVariant::bulk));
    const auto surface = read_histogram_table(p.histogram_csv(HistogramVariant::surface));
    const auto results =
        quantify_all(bulk, surface, params.mineralogy, params.extraction.voxel_size, params.extraction.num_threads);
    write_quantification_csv(p.quantification_csv(), results);
}

inline void run_report(const ProjectLayout& p, const Parameters& params) {
    const auto results = read_quantification_csv(p.quantification_csv());
    write_report_json(p.report_json(), build_report(results, params.mineralogy.density));
}

inline void run_stage(Stage s, const ProjectLayout& p, const Parameters& params) {
    switch (s) {
        case Stage::import: run_import(p, params); break;
        case Stage::segment: run_segment(p, params); break;
        case Stage::extract: run_extract(p, params); break;
        case Stage::analyze: run_analyze(p, params); break;
        case Stage::report: run_report(p, params); break;
    }
}

// ---------------------------------------------------------------- driver

struct PipelineOptions {
    bool force = false;
    std::optional<int> num_threads;  // overrides the parameter file
};

struct PipelineRun {
    std::vector<Stage> executed;
    std::vector<Stage> cached;
};

namespace detail {

inline nlohmann::ordered_json read_state(const ProjectLayout& p) {
    if (!fs::exists(p.state_file())) return nlohmann::ordered_json::object();
    try {
        auto j = nlohmann::ordered_json::parse(read_text_file(p.state_file()));
        return j.is_object() ? j : nlohmann::ordered_json::object();
    } catch (const nlohmann::json::exception&) {
        return nlohmann::ordered_json::object();
    }
}

inline bool outputs_match(const nlohmann::ordered_json& recorded, const std::vector<fs::path>& outputs) {
    if (!recorded.is_object() || recorded.size() != outputs.size()) return false;
    for (const auto& f : outputs) {
        const auto key = f.filename().string();
        if (!recorded.contains(key) || !fs::exists(f) || recorded[key] != sha256_file(f)) return false;
    }
    return true;
}

}  // namespace detail

/// Runs the stages up to and including `through`, skipping any stage whose
/// fingerprint and outputs match the recorded state. On failure writes a
/// failure record next to the state file and rethrows.
inline PipelineRun run_pipeline(const ProjectLayout& p, Stage through, const PipelineOptions& opts = {}) {
    Parameters params = load_parameters(p.parameters_file());
    if (opts.num_threads) {
        params.extraction.num_threads = *opts.num_threads;
        validate(params);
    }
    PipelineRun run;
    auto state = detail::read_state(p);
    Stage current = Stage::import;
    try {
        for (Stage s : kStages) {
            current = s;
            const auto key = std::string(to_string(s));
            const auto fp = stage_fingerprint(s, p, params);
            const auto plan = stage_plan(s, p, params);
            const bool clean = !opts.force && state.contains(key) && state[key].value("fingerprint", "") == fp &&
                               detail::outputs_match(state[key].value("outputs", nlohmann::ordered_json()), plan.outputs);
            if (clean) {
                run.cached.push_back(s);
            } else {
                run_stage(s, p, params);
                nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
                for (const auto& f : plan.outputs) outputs[f.filename().string()] = sha256_file(f);
                state[key] = {{"fingerprint", fp}, {"outputs", outputs}};
                // downstream records are stale once this stage has rerun
                for (Stage later : kStages) {
                    if (later > s) state.erase(std::string(to_string(later)));
                }
                write_file_atomic(p.state_file(), state.dump(2) + "\n");
                run.executed.push_back(s);
            }
            if (s == through) break;
        }
    } catch (const Error& e) {
        const nlohmann::ordered_json failure{
            {"stage", to_string(current)}, {"code", to_string(e.code())}, {"message", e.what()}, {"fields", e.fields()}};
        std::error_code ec;
        fs::create_directories(p.volume_store(), ec);
        write_file_atomic(p.failure_file(), failure.dump(2) + "\n");
        throw;
    }
    fs::remove(p.failure_file());
    return run;
}

}  // namespace ctquant
