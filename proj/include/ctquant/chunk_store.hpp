#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/parallel.hpp"
#include "ctquant/tiff_io.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

struct ChunkStoreMeta {
    Dims dims;
    Dims chunks;
    double voxel_size = 1.0;
};

/// On-disk chunked 16-bit volume: `meta.json` plus one raw little-endian
/// file per chunk named `z_y_x.bin`. Edge chunks are stored at their
/// clipped extent. Chunk reads are independent and may run concurrently.
class ChunkStore {
public:
    static constexpr const char* kFormat = "ctquant-chunks/1";

    static ChunkStore create(const fs::path& root, Dims dims, Dims chunks, double voxel_size) {
        validate(dims, chunks, voxel_size);
        fs::create_directories(root);
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.path().extension() == ".bin") fs::remove(entry.path());
        }
        ChunkStore store(root, {dims, chunks, voxel_size});
        const nlohmann::ordered_json meta = {
            {"format", kFormat},
            {"dtype", "uint16"},
            {"byte_order", "little"},
            {"dims", {dims.z, dims.y, dims.x}},
            {"chunks", {chunks.z, chunks.y, chunks.x}},
            {"voxel_size", voxel_size},
        };
        write_file_atomic(root / "meta.json", meta.dump(2) + "\n");
        return store;
    }

    static ChunkStore open(const fs::path& root) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(read_text_file(root / "meta.json"));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::unsupported_format, root.string() + ": bad meta.json: " + e.what());
        }
        if (meta.value("format", "") != kFormat || meta.value("dtype", "") != "uint16") {
            throw Error(ErrorCode::unsupported_format, root.string() + ": not a uint16 chunk store");
        }
        const auto d = meta.at("dims").get<std::array<std::size_t, 3>>();
        const auto c = meta.at("chunks").get<std::array<std::size_t, 3>>();
        ChunkStoreMeta m{{d[0], d[1], d[2]}, {c[0], c[1], c[2]}, meta.at("voxel_size").get<double>()};
        validate(m.dims, m.chunks, m.voxel_size);
        return ChunkStore(root, m);
    }

    [[nodiscard]] const ChunkStoreMeta& meta() const noexcept { return meta_; }
    [[nodiscard]] const fs::path& root() const noexcept { return root_; }

    [[nodiscard]] Dims chunk_grid() const noexcept {
        const auto up = [](std::size_t n, std::size_t c) { return (n + c - 1) / c; };
        return {up(meta_.dims.z, meta_.chunks.z), up(meta_.dims.y, meta_.chunks.y),
                up(meta_.dims.x, meta_.chunks.x)};
    }

    [[nodiscard]] Box chunk_box(std::size_t cz, std::size_t cy, std::size_t cx) const noexcept {
        const auto lo = [](std::size_t c, std::size_t size) { return static_cast<std::int64_t>(c * size); };
        const auto hi = [](std::size_t c, std::size_t size, std::size_t n) {
            return static_cast<std::int64_t>(std::min((c + 1) * size, n)) - 1;
        };
        const auto& d = meta_.dims;
        const auto& s = meta_.chunks;
        return {{lo(cz, s.z), lo(cy, s.y), lo(cx, s.x)},
                {hi(cz, s.z, d.z), hi(cy, s.y, d.y), hi(cx, s.x, d.x)}};
    }

    [[nodiscard]] fs::path chunk_path(std::size_t cz, std::size_t cy, std::size_t cx) const {
        return root_ / (std::to_string(cz) + "_" + std::to_string(cy) + "_" + std::to_string(cx) + ".bin");
    }

    void write_chunk(std::size_t cz, std::size_t cy, std::size_t cx, std::span<const GrayValue> values) const {
        if (values.size() != chunk_box(cz, cy, cx).dims().voxels()) {
            throw Error(ErrorCode::shape_mismatch, "chunk payload does not match chunk extent");
        }
        std::string bytes(values.size() * 2, '\0');
        for (std::size_t i = 0; i < values.size(); ++i) {
            bytes[2 * i] = static_cast<char>(values[i] & 0xFF);
            bytes[2 * i + 1] = static_cast<char>(values[i] >> 8);
        }
        write_file_atomic(chunk_path(cz, cy, cx), bytes);
    }

    [[nodiscard]] std::vector<GrayValue> read_chunk(std::size_t cz, std::size_t cy, std::size_t cx) const {
        const std::size_t n = chunk_box(cz, cy, cx).dims().voxels();
        const std::string bytes = read_text_file(chunk_path(cz, cy, cx));
        if (bytes.size() != 2 * n) {
            throw Error(ErrorCode::unsupported_format, chunk_path(cz, cy, cx).string() + ": wrong chunk size");
        }
        std::vector<GrayValue> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = static_cast<GrayValue>(static_cast<std::uint8_t>(bytes[2 * i]) |
                                            (static_cast<std::uint8_t>(bytes[2 * i + 1]) << 8));
        }
        return out;
    }

    void write_volume(const Volume<GrayValue>& vol) const {
        if (vol.dims() != meta_.dims) throw Error(ErrorCode::shape_mismatch, "volume dims differ from store");
        write_slab(vol, 0);
    }

    /// Writes the chunk row(s) covered by `slab`, whose first plane is global
    /// z = `z0`. `z0` must be chunk-aligned and the slab must end on a chunk
    /// boundary or at the volume's last plane.
    void write_slab(const Volume<GrayValue>& slab, std::size_t z0) const {
        const Dims grid = chunk_grid();
        const std::size_t cz0 = z0 / meta_.chunks.z;
        const std::size_t cz1 = (z0 + slab.dims().z - 1) / meta_.chunks.z;
        for (std::size_t cz = cz0; cz <= cz1 && cz < grid.z; ++cz) {
            for (std::size_t cy = 0; cy < grid.y; ++cy) {
                for (std::size_t cx = 0; cx < grid.x; ++cx) {
                    Box box = chunk_box(cz, cy, cx);
                    box.lo.z -= static_cast<std::int64_t>(z0);
                    box.hi.z -= static_cast<std::int64_t>(z0);
                    const auto chunk = crop(slab, box);
                    write_chunk(cz, cy, cx, chunk.values());
                }
            }
        }
    }

    /// Loads planes [z_begin, z_end) by reading only the chunk rows that
    /// intersect them.
    [[nodiscard]] GrayVolume read_slices(std::size_t z_begin, std::size_t z_end, int threads = 1) const {
        if (z_begin >= z_end || z_end > meta_.dims.z) throw Error(ErrorCode::range, "slice range out of bounds");
        const Dims grid = chunk_grid();
        GrayVolume out{Volume<GrayValue>({z_end - z_begin, meta_.dims.y, meta_.dims.x}), meta_.voxel_size};
        const std::size_t cz0 = z_begin / meta_.chunks.z;
        const std::size_t cz1 = (z_end - 1) / meta_.chunks.z;
        const std::size_t rows = cz1 - cz0 + 1;
        parallel_for(rows * grid.y * grid.x, threads, [&](std::size_t i) {
            const std::size_t cz = cz0 + i / (grid.y * grid.x);
            const std::size_t cy = (i / grid.x) % grid.y;
            const std::size_t cx = i % grid.x;
            const Box box = chunk_box(cz, cy, cx);
            const auto data = read_chunk(cz, cy, cx);
            const Dims cd = box.dims();
            for (std::size_t z = 0; z < cd.z; ++z) {
                const auto gz = static_cast<std::size_t>(box.lo.z) + z;
                if (gz < z_begin || gz >= z_end) continue;
                for (std::size_t y = 0; y < cd.y; ++y) {
                    const auto* src = data.data() + (z * cd.y + y) * cd.x;
                    auto* dst = &out.voxels(gz - z_begin, static_cast<std::size_t>(box.lo.y) + y,
                                            static_cast<std::size_t>(box.lo.x));
                    std::copy_n(src, cd.x, dst);
                }
            }
        });
        return out;
    }

    [[nodiscard]] GrayVolume read_volume(int threads = 1) const { return read_slices(0, meta_.dims.z, threads); }

private:
    ChunkStore(fs::path root, ChunkStoreMeta meta) : root_(std::move(root)), meta_(meta) {}

    static void validate(Dims dims, Dims chunks, double voxel_size) {
        if (dims.z < 1 || dims.y < 1 || dims.x < 1) throw Error(ErrorCode::validation, "dims must be >= 1");
        if (chunks.z < 1 || chunks.y < 1 || chunks.x < 1 || chunks.z > dims.z || chunks.y > dims.y ||
            chunks.x > dims.x) {
            throw Error(ErrorCode::validation, "chunk shape must lie in [1, dims]");
        }
        if (!(voxel_size > 0.0)) throw Error(ErrorCode::validation, "voxel_size must be > 0", {"voxel_size"});
    }

    fs::path root_;
    ChunkStoreMeta meta_;
};

/// Regular files ending in .tif/.tiff (any case), sorted lexicographically
/// by file name. This order defines z.
[[nodiscard]] inline std::vector<fs::path> list_tiff_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::no_input, dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".tif" || ext == ".tiff") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

/// Imports a directory of single-plane TIFFs into a chunk store at
/// `store_root` and returns the assembled volume. The chunk shape is clipped
/// to the volume dims. 8-bit planes are widened by value.
inline GrayVolume import_tiff_stack(const fs::path& dir, Dims chunk_shape, const fs::path& store_root,
                                    double voxel_size = 1.0) {
    const auto files = list_tiff_files(dir);
    if (files.empty()) throw Error(ErrorCode::no_input, "no TIFF files in " + dir.string());

    std::vector<TiffPlane> planes;
    planes.reserve(files.size());
    for (const auto& f : files) {
        planes.push_back(read_tiff_plane(f));
        if (planes.back().height != planes.front().height || planes.back().width != planes.front().width) {
            throw Error(ErrorCode::shape_mismatch,
                        f.filename().string() + " is " + std::to_string(planes.back().height) + "x" +
                            std::to_string(planes.back().width) + ", expected " +
                            std::to_string(planes.front().height) + "x" + std::to_string(planes.front().width));
        }
    }
    const Dims dims{planes.size(), planes.front().height, planes.front().width};
    GrayVolume vol{Volume<GrayValue>(dims), voxel_size};
    for (std::size_t z = 0; z < dims.z; ++z) {
        std::copy(planes[z].values.begin(), planes[z].values.end(), vol.voxels.plane(z).begin());
    }
    const Dims chunks{std::clamp<std::size_t>(chunk_shape.z, 1, dims.z),
                      std::clamp<std::size_t>(chunk_shape.y, 1, dims.y),
                      std::clamp<std::size_t>(chunk_shape.x, 1, dims.x)};
    ChunkStore::create(store_root, dims, chunks, voxel_size).write_volume(vol.voxels);
    return vol;
}

}  // namespace ctquant
